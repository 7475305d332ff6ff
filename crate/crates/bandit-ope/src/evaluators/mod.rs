//! The offline evaluators.
//!
//! Six estimators of a target policy's value from logged exploration data:
//!
//! * `drns_evaluate` — doubly-robust evaluation with quantile-capped
//!   rejection sampling; handles nonstationary (history-dependent) targets.
//! * `wc_evaluate` — the same accumulation with a constant cap for the whole
//!   run (the conservative configuration; no quantile adaptation).
//! * `rs_evaluate` — plain rejection sampling: average observed reward over
//!   accepted events, no reward model, no importance correction.
//! * `dm_evaluate` / `ips_evaluate` / `dr_evaluate` — the stationary
//!   direct-method, inverse-propensity, and doubly-robust baselines.
//!
//! One evaluation run is strictly sequential: the cap, the tracked ratio
//! multiset, and the simulated interaction history at event `k` depend on
//! everything before it. Distinct runs share nothing and can execute in
//! parallel. All randomness comes from a seeded stream whose `k`-th draw is
//! the acceptance variable `u_k` for event `k`, so a run is a pure function
//! of `(events, policy, rhat, parameters, seed)`.

pub mod quantile;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::UniformStream;
use crate::types::{
    ActionDistribution, ExplorationEvent, HistoryEntry, Policy, RewardEstimator, TargetHistory,
};

pub use quantile::QuantileTracker;

// ── Per-event doubly-robust term ────────────────────────────────────────

/// The doubly-robust per-event estimate
/// `Σ_a' dist[a']·r̂(x,a') + (dist[a]/p)·(r − r̂(x,a))`.
///
/// When the target puts zero mass on the logged action the correction term
/// is exactly zero and only the model term survives.
pub fn dr_term<R: RewardEstimator + ?Sized>(
    event: &ExplorationEvent,
    dist: &ActionDistribution,
    rhat: &R,
) -> f64 {
    let mut model = 0.0;
    for (a, pa) in dist.iter() {
        model += pa * rhat.estimate(&event.context, a);
    }
    let pa = dist.prob(event.action);
    if pa > 0.0 {
        let correction =
            (pa / event.propensity) * (event.reward - rhat.estimate(&event.context, event.action));
        model + correction
    } else {
        model
    }
}

// ── Evaluator state ─────────────────────────────────────────────────────

/// Mutable state of one capped-rejection evaluation run.
///
/// `block_index` is the index `t` of the block being filled (1-based), so
/// `block_index = 1 + history.len()` always. `cap` is the acceptance cap
/// `c_t` in force; it starts at `c_max` and, under the quantile rule, is
/// recomputed only when an event is accepted.
#[derive(Debug, Clone)]
pub struct EvaluatorState {
    pub block_index: usize,
    pub cap: f64,
    pub value_acc: f64,
    pub count_acc: f64,
    pub tracker: QuantileTracker,
    pub history: TargetHistory,
    pub events_processed: usize,
    pub c_max: f64,
    update_caps: bool,
}

impl EvaluatorState {
    /// State for the adaptive-cap rule: `c_1 = c_max`, later caps are
    /// `min(c_max, q-th quantile of the observed ratios)`.
    pub fn new(q: f64, c_max: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::invalid_argument(format!(
                "quantile order must be in [0, 1], got {q}"
            )));
        }
        if !(c_max > 0.0 && c_max <= 1.0) {
            return Err(Error::invalid_argument(format!(
                "c_max must be in (0, 1], got {c_max}"
            )));
        }
        Ok(Self {
            block_index: 1,
            cap: c_max,
            value_acc: 0.0,
            count_acc: 0.0,
            tracker: QuantileTracker::new(q),
            history: TargetHistory::new(),
            events_processed: 0,
            c_max,
            update_caps: true,
        })
    }

    /// State for a constant cap `c` (the worst-case variant). The tracker is
    /// still fed for diagnostics but never consulted.
    pub fn with_constant_cap(c: f64) -> Result<Self> {
        if !(c > 0.0 && c <= 1.0) {
            return Err(Error::invalid_argument(format!(
                "constant cap must be in (0, 1], got {c}"
            )));
        }
        let mut state = Self::new(1.0, c)?;
        state.update_caps = false;
        Ok(state)
    }
}

// ── Run traces ──────────────────────────────────────────────────────────

/// What the evaluator saw and did at one event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    /// 1-based event index `k`.
    pub k: usize,
    /// Block `t` the event fell into.
    pub block: usize,
    /// Cap `c_t` in force while processing the event.
    pub cap: f64,
    /// The per-event estimate `R_k`.
    pub estimate: f64,
    /// Importance ratio `p / dist[a]`; `+∞` when the target puts no mass on
    /// the logged action.
    pub ratio: f64,
    pub accepted: bool,
    /// The uniform draw the acceptance test compared against.
    pub u: f64,
}

/// Full per-event record of a run, plus the accepted history it produced.
///
/// Blocks partition the processed events: block `t` is the run of events
/// ending with the `t`-th acceptance. Events after the last acceptance form
/// a partial trailing block that still contributes to the accumulators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct RunTrace {
    pub records: Vec<TraceRecord>,
    pub final_history: TargetHistory,
}

impl RunTrace {
    /// 1-based indices `κ(1) < κ(2) < …` of the accepted events.
    pub fn acceptance_indices(&self) -> Vec<usize> {
        self.records
            .iter()
            .filter(|r| r.accepted)
            .map(|r| r.k)
            .collect()
    }

    /// Number of completed blocks `T` (= number of acceptances).
    pub fn completed_blocks(&self) -> usize {
        self.records.iter().filter(|r| r.accepted).count()
    }

    /// Sizes `|B(1)|, …, |B(T)|` of the completed blocks.
    pub fn block_sizes(&self) -> Vec<usize> {
        let mut sizes = Vec::new();
        let mut current = 0usize;
        for r in &self.records {
            current += 1;
            if r.accepted {
                sizes.push(current);
                current = 0;
            }
        }
        sizes
    }

    /// The cap in force during each completed block. Caps only change on
    /// acceptance, so every event of a block shares one cap.
    pub fn block_caps(&self) -> Vec<f64> {
        let mut caps = Vec::new();
        for r in &self.records {
            if r.accepted {
                caps.push(r.cap);
            }
        }
        caps
    }

    /// Events after the last acceptance (the partial trailing block).
    pub fn trailing_len(&self) -> usize {
        let last = self
            .records
            .iter()
            .rev()
            .position(|r| r.accepted)
            .unwrap_or(self.records.len());
        last
    }

    /// Re-derive the accumulators `R = Σ_k c·R_k`, `C = Σ_k c` from the
    /// per-event records.
    pub fn recompute_accumulators(&self) -> (f64, f64) {
        let mut r = 0.0;
        let mut c = 0.0;
        for rec in &self.records {
            r += rec.cap * rec.estimate;
            c += rec.cap;
        }
        (r, c)
    }

    /// Same sums restricted to completed blocks (the trailing partial block
    /// dropped). This is the form the weight normalization of the
    /// prefix-mixture policy uses.
    pub fn truncated_accumulators(&self) -> (f64, f64) {
        let keep = self.records.len() - self.trailing_len();
        let mut r = 0.0;
        let mut c = 0.0;
        for rec in &self.records[..keep] {
            r += rec.cap * rec.estimate;
            c += rec.cap;
        }
        (r, c)
    }
}

/// Outcome of one evaluation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    /// The value estimate `R / C`.
    pub estimate: f64,
    pub accepted_count: usize,
    /// Completed blocks `T`; equal to `accepted_count` by construction.
    pub completed_blocks: usize,
    /// Events consumed from the stream.
    pub events_used: usize,
    /// Final accumulators, exposed for weight and bias analyses.
    pub value_acc: f64,
    pub count_acc: f64,
    pub trace: Option<RunTrace>,
}

/// Extra knobs for a capped run; the plain entry points use the defaults.
#[derive(Debug, Clone, Default)]
pub struct EvalOptions {
    /// Keep the full per-event trace in the result.
    pub record_trace: bool,
    /// Stop consuming events once this many have been accepted.
    pub accept_limit: Option<usize>,
}

// ── The capped-rejection engine ─────────────────────────────────────────

/// Advance one event: accumulate the weighted doubly-robust term, record the
/// observed ratio, and run the acceptance test with the caller-supplied
/// uniform draw `u`.
pub fn drns_step<P, RE>(
    state: &mut EvaluatorState,
    event: &ExplorationEvent,
    policy: &P,
    rhat: &RE,
    u: f64,
) -> TraceRecord
where
    P: Policy + ?Sized,
    RE: RewardEstimator + ?Sized,
{
    let dist = policy.action_distribution(&event.context, &state.history);
    let r_k = dr_term(event, &dist, rhat);
    let pa = dist.prob(event.action);
    debug_assert!(
        r_k.abs() <= 1.0 + pa / event.propensity + 1e-9,
        "per-event estimate out of range: |{r_k}| > 1 + {}",
        pa / event.propensity
    );

    let cap = state.cap;
    state.value_acc += cap * r_k;
    state.count_acc += cap;

    let ratio = if pa > 0.0 {
        event.propensity / pa
    } else {
        f64::INFINITY
    };
    state.tracker.insert(ratio);

    let accepted = pa > 0.0 && u <= cap * pa / event.propensity;
    let block = state.block_index;
    if accepted {
        state.history.push(HistoryEntry {
            context: event.context.clone(),
            action: event.action,
            reward: event.reward,
        });
        state.block_index += 1;
        if state.update_caps {
            state.cap = state.c_max.min(state.tracker.query());
        }
    }
    state.events_processed += 1;

    TraceRecord {
        k: state.events_processed,
        block,
        cap,
        estimate: r_k,
        ratio,
        accepted,
        u,
    }
}

fn run_capped<P, RE>(
    events: &[ExplorationEvent],
    policy: &P,
    rhat: &RE,
    mut state: EvaluatorState,
    seed: u64,
    options: &EvalOptions,
) -> Result<EvalResult>
where
    P: Policy + ?Sized,
    RE: RewardEstimator + ?Sized,
{
    if events.is_empty() {
        return Err(Error::NoData);
    }
    let mut stream = UniformStream::new(seed);
    let mut records = Vec::new();
    let mut accepted = 0usize;
    for event in events {
        let u = stream.next_f64();
        let record = drns_step(&mut state, event, policy, rhat, u);
        if record.accepted {
            accepted += 1;
        }
        if options.record_trace {
            records.push(record);
        }
        if options.accept_limit.is_some_and(|limit| accepted >= limit) {
            break;
        }
    }
    debug_assert_eq!(accepted, state.history.len());
    Ok(EvalResult {
        estimate: state.value_acc / state.count_acc,
        accepted_count: accepted,
        completed_blocks: accepted,
        events_used: state.events_processed,
        value_acc: state.value_acc,
        count_acc: state.count_acc,
        trace: options.record_trace.then(|| RunTrace {
            records,
            final_history: state.history,
        }),
    })
}

/// Doubly-robust evaluation with quantile-adapted acceptance caps.
///
/// `q` is the quantile order used to refresh the cap after each acceptance;
/// `c_max` bounds the cap from above. `u_k` is the `k`-th draw of the stream
/// seeded with `seed`.
pub fn drns_evaluate<P, RE>(
    events: &[ExplorationEvent],
    policy: &P,
    rhat: &RE,
    q: f64,
    c_max: f64,
    seed: u64,
) -> Result<EvalResult>
where
    P: Policy + ?Sized,
    RE: RewardEstimator + ?Sized,
{
    run_capped(
        events,
        policy,
        rhat,
        EvaluatorState::new(q, c_max)?,
        seed,
        &EvalOptions::default(),
    )
}

/// As [`drns_evaluate`], with extra run options (trace recording, an
/// acceptance budget).
pub fn drns_evaluate_with<P, RE>(
    events: &[ExplorationEvent],
    policy: &P,
    rhat: &RE,
    q: f64,
    c_max: f64,
    seed: u64,
    options: &EvalOptions,
) -> Result<EvalResult>
where
    P: Policy + ?Sized,
    RE: RewardEstimator + ?Sized,
{
    run_capped(events, policy, rhat, EvaluatorState::new(q, c_max)?, seed, options)
}

/// Worst-case variant: the cap is the constant `c` for the whole run.
pub fn wc_evaluate<P, RE>(
    events: &[ExplorationEvent],
    policy: &P,
    rhat: &RE,
    c: f64,
    seed: u64,
) -> Result<EvalResult>
where
    P: Policy + ?Sized,
    RE: RewardEstimator + ?Sized,
{
    run_capped(
        events,
        policy,
        rhat,
        EvaluatorState::with_constant_cap(c)?,
        seed,
        &EvalOptions::default(),
    )
}

/// As [`wc_evaluate`], with extra run options.
pub fn wc_evaluate_with<P, RE>(
    events: &[ExplorationEvent],
    policy: &P,
    rhat: &RE,
    c: f64,
    seed: u64,
    options: &EvalOptions,
) -> Result<EvalResult>
where
    P: Policy + ?Sized,
    RE: RewardEstimator + ?Sized,
{
    run_capped(
        events,
        policy,
        rhat,
        EvaluatorState::with_constant_cap(c)?,
        seed,
        options,
    )
}

/// Minimum logged propensity over a dataset. The conservative configurations
/// of WC and RS take their constant `c` from this pre-pass.
pub fn min_propensity(events: &[ExplorationEvent]) -> Result<f64> {
    if events.is_empty() {
        return Err(Error::NoData);
    }
    Ok(events
        .iter()
        .map(|e| e.propensity)
        .fold(f64::INFINITY, f64::min))
}

/// Plain rejection sampling: accept event `k` with probability
/// `c·dist[a_k]/p_k` and estimate the target's value as the arithmetic mean
/// of the observed rewards of accepted events.
///
/// Unbiasedness needs `c ≤` the minimum true ratio; the caller picks `c`
/// (typically [`min_propensity`]) and this function does not check it.
pub fn rs_evaluate<P>(
    events: &[ExplorationEvent],
    policy: &P,
    c: f64,
    seed: u64,
) -> Result<EvalResult>
where
    P: Policy + ?Sized,
{
    rs_evaluate_with(events, policy, c, seed, None)
}

/// As [`rs_evaluate`], optionally stopping after `accept_limit` acceptances.
pub fn rs_evaluate_with<P>(
    events: &[ExplorationEvent],
    policy: &P,
    c: f64,
    seed: u64,
    accept_limit: Option<usize>,
) -> Result<EvalResult>
where
    P: Policy + ?Sized,
{
    if events.is_empty() {
        return Err(Error::NoData);
    }
    if !(c > 0.0 && c <= 1.0) {
        return Err(Error::invalid_argument(format!(
            "acceptance constant must be in (0, 1], got {c}"
        )));
    }
    let mut stream = UniformStream::new(seed);
    let mut history = TargetHistory::new();
    let mut reward_sum = 0.0;
    let mut accepted = 0usize;
    let mut used = 0usize;
    for event in events {
        let u = stream.next_f64();
        used += 1;
        let dist = policy.action_distribution(&event.context, &history);
        let pa = dist.prob(event.action);
        if pa > 0.0 && u <= c * pa / event.propensity {
            reward_sum += event.reward;
            accepted += 1;
            history.push(HistoryEntry {
                context: event.context.clone(),
                action: event.action,
                reward: event.reward,
            });
            if accept_limit.is_some_and(|limit| accepted >= limit) {
                break;
            }
        }
    }
    if accepted == 0 {
        return Err(Error::NoAcceptedSamples);
    }
    Ok(EvalResult {
        estimate: reward_sum / accepted as f64,
        accepted_count: accepted,
        completed_blocks: accepted,
        events_used: used,
        value_acc: reward_sum,
        count_acc: accepted as f64,
        trace: None,
    })
}

// ── Stationary baselines ────────────────────────────────────────────────

fn empty_history() -> TargetHistory {
    TargetHistory::new()
}

/// Direct method: mean over events of `Σ_a dist[a]·r̂(x,a)`. Deterministic.
pub fn dm_evaluate<P, RE>(events: &[ExplorationEvent], policy: &P, rhat: &RE) -> Result<f64>
where
    P: Policy + ?Sized,
    RE: RewardEstimator + ?Sized,
{
    if events.is_empty() {
        return Err(Error::NoData);
    }
    let h = empty_history();
    let mut sum = 0.0;
    for event in events {
        let dist = policy.action_distribution(&event.context, &h);
        let mut model = 0.0;
        for (a, pa) in dist.iter() {
            model += pa * rhat.estimate(&event.context, a);
        }
        sum += model;
    }
    Ok(sum / events.len() as f64)
}

/// Inverse propensity scoring: mean over events of `(dist[a]/p)·r` — the
/// randomized-policy generalization of `r·I(π(x)=a)/p`.
pub fn ips_evaluate<P>(events: &[ExplorationEvent], policy: &P) -> Result<f64>
where
    P: Policy + ?Sized,
{
    if events.is_empty() {
        return Err(Error::NoData);
    }
    let h = empty_history();
    let mut sum = 0.0;
    for event in events {
        let dist = policy.action_distribution(&event.context, &h);
        sum += (dist.prob(event.action) / event.propensity) * event.reward;
    }
    Ok(sum / events.len() as f64)
}

/// Stationary doubly-robust baseline: mean of [`dr_term`] with an empty
/// history. Collapses to [`ips_evaluate`] when `rhat ≡ 0`.
pub fn dr_evaluate<P, RE>(events: &[ExplorationEvent], policy: &P, rhat: &RE) -> Result<f64>
where
    P: Policy + ?Sized,
    RE: RewardEstimator + ?Sized,
{
    if events.is_empty() {
        return Err(Error::NoData);
    }
    let h = empty_history();
    let mut sum = 0.0;
    for event in events {
        let dist = policy.action_distribution(&event.context, &h);
        sum += dr_term(event, &dist, rhat);
    }
    Ok(sum / events.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{ConstantEstimator, Context};

    /// Context-independent stationary policy used throughout the tests.
    struct Fixed(Vec<f64>);

    impl Policy for Fixed {
        fn action_distribution(&self, _: &Context, _: &TargetHistory) -> ActionDistribution {
            ActionDistribution::new(self.0.clone()).unwrap()
        }
    }

    fn event(action: usize, reward: f64, propensity: f64) -> ExplorationEvent {
        ExplorationEvent::new(Context::one_hot(0), action, reward, propensity).unwrap()
    }

    /// Events logged by the fixed distribution `mu`, with deterministic
    /// rewards `reward(a)`.
    fn log_events(
        mu: &[f64],
        reward: impl Fn(usize) -> f64,
        n: usize,
        seed: u64,
    ) -> Vec<ExplorationEvent> {
        let mut stream = UniformStream::new(seed);
        (0..n)
            .map(|_| {
                let a = stream.next_weighted(mu);
                event(a, reward(a), mu[a])
            })
            .collect()
    }

    #[test]
    fn dr_term_importance_weighting() {
        let e = event(0, 1.0, 0.5);
        let dist = ActionDistribution::point_mass(0, 2);
        let rhat = ConstantEstimator::new(0.0).unwrap();
        assert_eq!(dr_term(&e, &dist, &rhat), 2.0);
    }

    #[test]
    fn dr_term_zero_mass_action_keeps_model_term() {
        let e = event(0, 1.0, 0.2);
        let dist = ActionDistribution::point_mass(1, 2);
        let rhat = ConstantEstimator::new(0.3).unwrap();
        assert_eq!(dr_term(&e, &dist, &rhat), 0.3);
    }

    #[test]
    fn step_rejection_still_accumulates() {
        let mut state = EvaluatorState::new(0.5, 1.0).unwrap();
        state.cap = 0.5;
        let e = event(0, 1.0, 0.8);
        let policy = Fixed(vec![0.2, 0.8]);
        let rhat = ConstantEstimator::new(0.0).unwrap();
        // threshold = 0.5 * 0.2 / 0.8 = 0.125 < u
        let rec = drns_step(&mut state, &e, &policy, &rhat, 0.2);
        assert!(!rec.accepted);
        assert_eq!(rec.block, 1);
        assert_eq!(rec.cap, 0.5);
        assert_eq!(rec.ratio, 4.0);
        assert_eq!(state.count_acc, 0.5);
        assert_eq!(state.value_acc, 0.5 * rec.estimate);
        assert!(state.history.is_empty());
        assert_eq!(state.block_index, 1);
        assert_eq!(state.tracker.len(), 1);
    }

    #[test]
    fn step_zero_probability_action_rejects_even_at_u_zero() {
        let mut state = EvaluatorState::new(0.5, 1.0).unwrap();
        let e = event(0, 1.0, 0.5);
        let policy = Fixed(vec![0.0, 1.0]);
        let rhat = ConstantEstimator::new(0.3).unwrap();
        let rec = drns_step(&mut state, &e, &policy, &rhat, 0.0);
        assert!(!rec.accepted);
        assert_eq!(rec.ratio, f64::INFINITY);
        assert_eq!(rec.estimate, 0.3); // pure model term
        assert_eq!(state.tracker.query_at(1.0), f64::INFINITY);
    }

    #[test]
    fn step_acceptance_grows_history_and_updates_cap() {
        let mut state = EvaluatorState::new(0.0, 1.0).unwrap();
        let e = event(0, 0.7, 0.9);
        let policy = Fixed(vec![0.3, 0.7]);
        let rhat = ConstantEstimator::new(0.5).unwrap();
        // threshold = 1 * 0.3 / 0.9 = 1/3; u below it
        let rec = drns_step(&mut state, &e, &policy, &rhat, 0.1);
        assert!(rec.accepted);
        assert_eq!(state.history.len(), 1);
        assert_eq!(state.block_index, 2);
        assert_eq!(state.history.entries()[0].action, 0);
        // q = 0: new cap is min(c_max, min ratio) = min(1, 3) = 1
        assert_eq!(state.cap, 1.0);
    }

    #[test]
    fn self_evaluation_accepts_every_event() {
        let mu = [0.3, 0.7];
        let events = log_events(&mu, |a| if a == 1 { 1.0 } else { 0.0 }, 50, 11);
        let policy = Fixed(mu.to_vec());
        let rhat = ConstantEstimator::new(0.5).unwrap();
        let res = drns_evaluate(&events, &policy, &rhat, 0.3, 1.0, 99).unwrap();
        assert_eq!(res.accepted_count, 50);
        assert_eq!(res.events_used, 50);
        assert_eq!(res.completed_blocks, 50);

        // Constant cap 1 walks the identical path.
        let wc = wc_evaluate(&events, &policy, &rhat, 1.0, 99).unwrap();
        assert_eq!(wc.estimate.to_bits(), res.estimate.to_bits());
        assert_eq!(wc.accepted_count, res.accepted_count);
    }

    #[test]
    fn min_propensity_examples() {
        let events = vec![event(0, 0.0, 0.5), event(0, 0.0, 0.1), event(0, 0.0, 0.9)];
        assert_eq!(min_propensity(&events).unwrap(), 0.1);
        let uniform = vec![event(0, 0.0, 0.25); 4];
        assert_eq!(min_propensity(&uniform).unwrap(), 0.25);
        assert!(matches!(min_propensity(&[]), Err(Error::NoData)));
    }

    #[test]
    fn rs_classic_replay() {
        // Uniform logging over two actions, deterministic target on action 0,
        // c = 1/K: the acceptance threshold is 1 on matching events and 0
        // otherwise, so RS replays exactly the matching subset.
        let events = vec![
            event(0, 1.0, 0.5),
            event(1, 0.0, 0.5),
            event(0, 0.0, 0.5),
            event(1, 1.0, 0.5),
            event(0, 1.0, 0.5),
        ];
        let policy = Fixed(vec![1.0, 0.0]);
        let res = rs_evaluate(&events, &policy, 0.5, 7).unwrap();
        assert_eq!(res.accepted_count, 3);
        assert!((res.estimate - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn rs_zero_acceptances_is_an_error() {
        let events = vec![event(0, 1.0, 0.5); 10];
        let policy = Fixed(vec![0.0, 1.0]); // never the logged action
        assert!(matches!(
            rs_evaluate(&events, &policy, 0.5, 7),
            Err(Error::NoAcceptedSamples)
        ));
    }

    #[test]
    fn dm_constant_estimators() {
        let events = vec![event(0, 1.0, 0.5), event(1, 0.0, 0.5)];
        let policy = Fixed(vec![0.4, 0.6]);
        let half = ConstantEstimator::new(0.5).unwrap();
        assert!((dm_evaluate(&events, &policy, &half).unwrap() - 0.5).abs() < 1e-15);
        let zero = ConstantEstimator::new(0.0).unwrap();
        assert_eq!(dm_evaluate(&events, &policy, &zero).unwrap(), 0.0);
    }

    #[test]
    fn ips_examples() {
        let single = vec![event(0, 1.0, 0.25)];
        let matching = Fixed(vec![1.0, 0.0]);
        assert_eq!(ips_evaluate(&single, &matching).unwrap(), 4.0);
        let avoiding = Fixed(vec![0.0, 1.0]);
        assert_eq!(ips_evaluate(&single, &avoiding).unwrap(), 0.0);
    }

    #[test]
    fn dr_point_mass_example() {
        let events = vec![event(0, 0.7, 1.0)];
        let policy = Fixed(vec![1.0, 0.0]);
        let rhat = ConstantEstimator::new(0.0).unwrap();
        assert_eq!(dr_evaluate(&events, &policy, &rhat).unwrap(), 0.7);
    }

    #[test]
    fn dr_with_zero_model_matches_ips_bitwise() {
        let mu = [0.15, 0.25, 0.6];
        let events = log_events(&mu, |a| [0.2, 0.9, 0.4][a], 200, 3);
        let policy = Fixed(vec![0.5, 0.3, 0.2]);
        let rhat = ConstantEstimator::new(0.0).unwrap();
        let dr = dr_evaluate(&events, &policy, &rhat).unwrap();
        let ips = ips_evaluate(&events, &policy).unwrap();
        assert_eq!(dr.to_bits(), ips.to_bits());
    }

    #[test]
    fn trace_recomputes_accumulators() {
        let mu = [0.3, 0.7];
        let events = log_events(&mu, |a| a as f64, 300, 5);
        let policy = Fixed(vec![0.8, 0.2]);
        let rhat = ConstantEstimator::new(0.5).unwrap();
        let options = EvalOptions {
            record_trace: true,
            accept_limit: None,
        };
        let res = drns_evaluate_with(&events, &policy, &rhat, 0.2, 0.4, 21, &options).unwrap();
        let trace = res.trace.as_ref().unwrap();
        let (r, c) = trace.recompute_accumulators();
        assert!((r - res.value_acc).abs() <= 1e-12);
        assert!((c - res.count_acc).abs() <= 1e-12);
        assert!((res.estimate - r / c).abs() <= 1e-12);

        // Blocks partition the prefix; κ strictly increasing.
        let kappa = trace.acceptance_indices();
        assert!(kappa.windows(2).all(|w| w[0] < w[1]));
        let sizes = trace.block_sizes();
        assert_eq!(sizes.len(), res.completed_blocks);
        let covered: usize = sizes.iter().sum();
        assert_eq!(covered + trace.trailing_len(), res.events_used);
        assert_eq!(trace.final_history.len(), res.accepted_count);

        // Truncated accumulators drop exactly the trailing partial block.
        let (rt, ct) = trace.truncated_accumulators();
        assert!(rt <= r + 1e-12);
        let trailing_mass: f64 = trace.records[covered..].iter().map(|rec| rec.cap).sum();
        assert!((c - ct - trailing_mass).abs() <= 1e-12);
    }

    #[test]
    fn caps_nonincreasing_at_q_zero() {
        let mu = [0.5, 0.5];
        let events = log_events(&mu, |a| a as f64, 400, 13);
        // Asymmetric target gives ratios {0.5/0.9, 0.5/0.1} = {0.56, 5}.
        let policy = Fixed(vec![0.9, 0.1]);
        let rhat = ConstantEstimator::new(0.5).unwrap();
        let options = EvalOptions {
            record_trace: true,
            accept_limit: None,
        };
        let res = drns_evaluate_with(&events, &policy, &rhat, 0.0, 1.0, 17, &options).unwrap();
        let caps: Vec<f64> = res.trace.as_ref().unwrap().records.iter().map(|r| r.cap).collect();
        assert!(caps.windows(2).all(|w| w[1] <= w[0] + 1e-15));
        assert!(caps.iter().all(|&c| c > 0.0 && c <= 1.0));
        // With both ratios present the q=0 cap must settle at min(1, 5/9).
        assert!((caps.last().unwrap() - 5.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn accept_limit_stops_early() {
        let mu = [0.5, 0.5];
        let events = log_events(&mu, |_| 1.0, 200, 23);
        let policy = Fixed(vec![0.5, 0.5]);
        let rhat = ConstantEstimator::new(0.5).unwrap();
        let options = EvalOptions {
            record_trace: false,
            accept_limit: Some(10),
        };
        let res = drns_evaluate_with(&events, &policy, &rhat, 0.1, 1.0, 29, &options).unwrap();
        assert_eq!(res.accepted_count, 10);
        assert_eq!(res.events_used, 10); // self-evaluation accepts every event
        assert!(res.events_used < events.len());
    }

    #[test]
    fn parameter_validation() {
        let events = vec![event(0, 1.0, 0.5)];
        let policy = Fixed(vec![1.0, 0.0]);
        let rhat = ConstantEstimator::new(0.0).unwrap();
        assert!(drns_evaluate(&events, &policy, &rhat, -0.1, 1.0, 0).is_err());
        assert!(drns_evaluate(&events, &policy, &rhat, 0.5, 0.0, 0).is_err());
        assert!(drns_evaluate(&events, &policy, &rhat, 0.5, 1.5, 0).is_err());
        assert!(wc_evaluate(&events, &policy, &rhat, 0.0, 0).is_err());
        assert!(rs_evaluate(&events, &policy, 1.5, 0).is_err());
        assert!(matches!(
            drns_evaluate(&[], &policy, &rhat, 0.5, 1.0, 0),
            Err(Error::NoData)
        ));
    }
}
