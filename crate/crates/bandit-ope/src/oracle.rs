//! Exact brute-force computations on tiny worlds.
//!
//! Everything the evaluators claim statistically is checked here against
//! ground truth that needs no sampling: policy values by direct summation
//! over `D(x)·π(a|x,h)·D(r|x,a)`, the per-state bias mass ε and the two
//! theorem-statement bounds as plain formulas, the prefix-mixture policy
//! `π_PV` whose value `R/C` estimates, and exhaustive enumeration of the
//! per-event estimate `R_k` verifying its conditional mean, range, and
//! second moment. The Monte Carlo experiments (`bias_experiment`,
//! `coverage_experiment`) tie the evaluator's sampled behavior back to
//! those exact quantities.
//!
//! Scale discipline: worlds are capped at 8 contexts × 4 actions, and full
//! trajectory enumeration is refused beyond a 10⁶-branch budget rather than
//! silently degrading.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::{sample_world_log, TinyWorld};
use crate::error::{Error, Result};
use crate::evaluators::{dr_term, drns_evaluate_with, EvalOptions, RunTrace};
use crate::policies::{EmpiricalGreedyPolicy, TablePolicy, TableRewardEstimator};
use crate::rng::{derive_seed, UniformStream};
use crate::types::{
    ActionDistribution, ConstantEstimator, Context, ExplorationEvent, HistoryEntry, Policy,
    RewardEstimator, TargetHistory,
};

/// Branch budget for exhaustive trajectory enumeration.
pub const ENUMERATION_BUDGET: u64 = 1_000_000;

/// Tolerance on the exact conditional-mean identity (Lemma 3 check).
pub const MEAN_GAP_TOLERANCE: f64 = 1e-10;

/// Slack for floating-point noise on the range/second-moment inequalities.
const BOUND_SLACK: f64 = 1e-9;

// ── Exact values ────────────────────────────────────────────────────────

/// Exact value of a policy played once from an empty history:
/// `Σ_x D(x) Σ_a π(a|x,∅)·P(r=1|x,a)`.
pub fn exact_stationary_value<P: Policy + ?Sized>(world: &TinyWorld, policy: &P) -> f64 {
    let empty = TargetHistory::new();
    let mut value = 0.0;
    for (x, &dx) in world.contexts.iter().enumerate() {
        if dx == 0.0 {
            continue;
        }
        let dist = policy.action_distribution(&world.context(x), &empty);
        for (a, pa) in dist.iter() {
            value += dx * pa * world.rewards[x][a];
        }
    }
    value
}

/// Exact expected cumulative reward `E_π[Σ_{t=1..rounds} r_t]` of a
/// (possibly nonstationary) policy interacting with the world, by full
/// enumeration of context/action/reward sequences.
///
/// Refused up front when the worst case `(|X|·K·2)^rounds` exceeds
/// [`ENUMERATION_BUDGET`]; callers fall back to Monte Carlo.
pub fn exact_trajectory_value<P: Policy + ?Sized>(
    world: &TinyWorld,
    policy: &P,
    rounds: usize,
) -> Result<f64> {
    let per_round = (world.num_contexts() * world.num_actions() * 2) as f64;
    let required = per_round.powi(rounds as i32);
    if required > ENUMERATION_BUDGET as f64 {
        return Err(Error::BranchBudget {
            required: if required > u64::MAX as f64 {
                u64::MAX
            } else {
                required as u64
            },
            budget: ENUMERATION_BUDGET,
        });
    }
    let mut history = TargetHistory::new();
    Ok(trajectory_recurse(world, policy, &mut history, rounds))
}

fn trajectory_recurse<P: Policy + ?Sized>(
    world: &TinyWorld,
    policy: &P,
    history: &mut TargetHistory,
    remaining: usize,
) -> f64 {
    if remaining == 0 {
        return 0.0;
    }
    let mut total = 0.0;
    for (x, &dx) in world.contexts.iter().enumerate() {
        if dx == 0.0 {
            continue;
        }
        let context = world.context(x);
        let dist = policy.action_distribution(&context, history);
        for (a, pa) in dist.iter() {
            if pa == 0.0 {
                continue;
            }
            let p1 = world.rewards[x][a];
            for (r, pr) in [(1.0, p1), (0.0, 1.0 - p1)] {
                if pr == 0.0 {
                    continue;
                }
                history.push(HistoryEntry {
                    context: context.clone(),
                    action: a,
                    reward: r,
                });
                let rest = trajectory_recurse(world, policy, history, remaining - 1);
                history.pop();
                total += dx * pa * pr * (r + rest);
            }
        }
    }
    total
}

// ── Bias mass and the theorem bounds ────────────────────────────────────

/// The bias mass `ε = P_{(x,a)∼π}[E] − P_{(x,a)∼μ}[E]/c` over the bad set
/// `E = {(x,a) : c·π(a|x) > μ(a|x)}`, for one cap value `c`.
///
/// Always in `[0, 1)` for valid inputs (each bad pair contributes
/// `π − μ/c ∈ (0, π]`).
pub fn bias_mass(
    context_probs: &[f64],
    pi: &[ActionDistribution],
    mu: &[ActionDistribution],
    c: f64,
) -> Result<f64> {
    if !(c > 0.0) {
        return Err(Error::invalid_argument(format!(
            "cap must be positive, got {c}"
        )));
    }
    if pi.len() != context_probs.len() || mu.len() != context_probs.len() {
        return Err(Error::invalid_argument(
            "one distribution per context required",
        ));
    }
    let mut mass = 0.0;
    for (x, &dx) in context_probs.iter().enumerate() {
        for (a, pa) in pi[x].iter() {
            let mua = mu[x].prob(a);
            if c * pa > mua {
                mass += dx * (pa - mua / c);
            }
        }
    }
    debug_assert!((0.0..1.0 + BOUND_SLACK).contains(&mass));
    Ok(mass)
}

/// [`bias_mass`] of a policy state `(history, cap)` against a world's
/// logging table.
pub fn world_bias_mass<P: Policy + ?Sized>(
    world: &TinyWorld,
    policy: &P,
    history: &TargetHistory,
    cap: f64,
) -> f64 {
    let pi: Vec<ActionDistribution> = (0..world.num_contexts())
        .map(|x| policy.action_distribution(&world.context(x), history))
        .collect();
    let mu: Vec<ActionDistribution> = world
        .logging
        .iter()
        .map(|row| ActionDistribution::new(row.clone()).expect("validated world"))
        .collect();
    bias_mass(&world.contexts, &pi, &mu, cap).expect("validated world state")
}

/// Theorem 1's worst-case cumulative bias bound `T(T+1)/2 · ε/(1−ε)`.
pub fn theorem1_bound(t: usize, eps: f64) -> Result<f64> {
    if t == 0 {
        return Err(Error::invalid_argument("need at least one block"));
    }
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::invalid_argument(format!(
            "eps must be in [0, 1), got {eps}"
        )));
    }
    let t = t as f64;
    Ok(t * (t + 1.0) / 2.0 * eps / (1.0 - eps))
}

/// Theorem 2's deviation bound
/// `(n·c_max/C) · 2·max{(1+M)·ln(2/δ)/n, √((3+M)·ln(2/δ)/n)}`.
pub fn theorem2_bound(n: usize, m: f64, c_max: f64, c_acc: f64, delta: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid_argument("need at least one event"));
    }
    if !(m > 0.0) {
        return Err(Error::invalid_argument(format!(
            "ratio bound M must be positive, got {m}"
        )));
    }
    if !(c_max > 0.0 && c_max <= 1.0) {
        return Err(Error::invalid_argument(format!(
            "c_max must be in (0, 1], got {c_max}"
        )));
    }
    if !(c_acc > 0.0) {
        return Err(Error::invalid_argument(format!(
            "accumulated cap mass must be positive, got {c_acc}"
        )));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid_argument(format!(
            "delta must be in (0, 1), got {delta}"
        )));
    }
    let n_f = n as f64;
    let log_term = (2.0 / delta).ln();
    let linear = (1.0 + m) * log_term / n_f;
    let sqrt = ((3.0 + m) * log_term / n_f).sqrt();
    Ok((n_f * c_max / c_acc) * 2.0 * linear.max(sqrt))
}

/// Largest observed target-to-logging ratio `π/μ` in a trace — a lower
/// bound on the true sup `M`. (Trace ratios are stored as `p/π`.)
pub fn estimate_m(trace: &RunTrace) -> f64 {
    assert!(!trace.records.is_empty(), "estimate_m needs a nonempty trace");
    trace
        .records
        .iter()
        .map(|r| 1.0 / r.ratio)
        .fold(0.0, f64::max)
}

/// Exact `max_{x,a} π(a|x,h)/μ(a|x)` at one policy state.
pub fn state_sup_ratio<P: Policy + ?Sized>(
    world: &TinyWorld,
    policy: &P,
    history: &TargetHistory,
) -> f64 {
    let mut sup = 0.0f64;
    for x in 0..world.num_contexts() {
        let dist = policy.action_distribution(&world.context(x), history);
        for (a, pa) in dist.iter() {
            sup = sup.max(pa / world.logging[x][a]);
        }
    }
    sup
}

/// [`state_sup_ratio`] at the empty history — the exact `M` of a stationary
/// policy.
pub fn stationary_sup_ratio<P: Policy + ?Sized>(world: &TinyWorld, policy: &P) -> f64 {
    state_sup_ratio(world, policy, &TargetHistory::new())
}

// ── The progressive-validation mixture policy ───────────────────────────

/// The stationary mixture `π_PV(a|x) = Σ_t w_t·π(a|x, h_{t−1})` with
/// `w_t = c_t·|B(t)|/C` over the history snapshots of one completed run.
///
/// Weights are normalized over completed blocks, so they sum to 1 even when
/// the run ended mid-block; the excluded trailing share of the accumulator
/// is reported by [`PVPolicy::trailing_mass`].
pub struct PVPolicy<'a, P: Policy + ?Sized> {
    weights: Vec<f64>,
    snapshots: Vec<TargetHistory>,
    policy: &'a P,
    trailing_mass: f64,
}

impl<'a, P: Policy + ?Sized> PVPolicy<'a, P> {
    pub fn num_components(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Fraction of the full cap mass `C` that fell in the trailing partial
    /// block and is excluded from the mixture. Zero for complete runs.
    pub fn trailing_mass(&self) -> f64 {
        self.trailing_mass
    }
}

impl<'a, P: Policy + ?Sized> Policy for PVPolicy<'a, P> {
    fn action_distribution(&self, context: &Context, _: &TargetHistory) -> ActionDistribution {
        let mut probs: Option<Vec<f64>> = None;
        for (w, snapshot) in self.weights.iter().zip(&self.snapshots) {
            let dist = self.policy.action_distribution(context, snapshot);
            let acc = probs.get_or_insert_with(|| vec![0.0; dist.num_actions()]);
            for (a, pa) in dist.iter() {
                acc[a] += w * pa;
            }
        }
        ActionDistribution::new(probs.expect("at least one component"))
            .expect("convex combination of distributions")
    }
}

/// Build `π_PV` from a recorded run. Errors if no block completed.
pub fn pv_policy<'a, P: Policy + ?Sized>(trace: &RunTrace, policy: &'a P) -> Result<PVPolicy<'a, P>> {
    let caps = trace.block_caps();
    let sizes = trace.block_sizes();
    if caps.is_empty() {
        return Err(Error::invalid_argument(
            "progressive-validation mixture needs at least one completed block",
        ));
    }
    let (_, c_full) = trace.recompute_accumulators();
    let masses: Vec<f64> = caps.iter().zip(&sizes).map(|(c, &s)| c * s as f64).collect();
    let c_trunc: f64 = masses.iter().sum();
    let weights: Vec<f64> = masses.iter().map(|m| m / c_trunc).collect();
    debug_assert!((weights.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
    let snapshots: Vec<TargetHistory> = (0..caps.len())
        .map(|t| trace.final_history.prefix(t))
        .collect();
    Ok(PVPolicy {
        weights,
        snapshots,
        policy,
        trailing_mass: (c_full - c_trunc) / c_full,
    })
}

// ── Lemma verification by enumeration ───────────────────────────────────

/// One evaluator state to check: the simulated history and the cap in
/// force. The cap does not enter the per-event estimate, so the lemma
/// checks depend on the history only; the cap is carried for reporting.
#[derive(Debug, Clone)]
pub struct LemmaState {
    pub history: TargetHistory,
    pub cap: f64,
}

/// Outcome of exhaustive per-state checks of the conditional mean, range,
/// and second moment of the per-event estimate `R_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub states_checked: usize,
    /// Worst `|E_μ[R_k] − E_{π_t}[r]|` — must not exceed 1e-10.
    pub worst_mean_gap: f64,
    /// Worst `max|R_k| − (1 + M)`; negative means the bound held with margin.
    pub worst_range_margin: f64,
    /// Worst `E_μ[R_k²] − (3 + M)`.
    pub worst_second_moment_margin: f64,
    pub pass: bool,
}

impl LemmaReport {
    fn empty() -> Self {
        Self {
            states_checked: 0,
            worst_mean_gap: 0.0,
            worst_range_margin: f64::NEG_INFINITY,
            worst_second_moment_margin: f64::NEG_INFINITY,
            pass: true,
        }
    }

    fn absorb(&mut self, other: &LemmaReport) {
        self.states_checked += other.states_checked;
        self.worst_mean_gap = self.worst_mean_gap.max(other.worst_mean_gap);
        self.worst_range_margin = self.worst_range_margin.max(other.worst_range_margin);
        self.worst_second_moment_margin = self
            .worst_second_moment_margin
            .max(other.worst_second_moment_margin);
        self.pass = self.pass && other.pass;
    }
}

/// Enumerate every `(x, a, r)` outcome under the logging distribution at
/// each supplied state and check, exactly:
///
/// * conditional unbiasedness — `E_μ[R_k] = E_{r∼π_t}[r]` to 1e-10;
/// * range — every realizable `|R_k| ≤ 1 + M`;
/// * second moment — `E_μ[R_k²] ≤ 3 + M`;
///
/// with `M` the exact sup ratio `π_t/μ` at that state.
pub fn verify_lemmas<P, RE>(
    world: &TinyWorld,
    policy: &P,
    rhat: &RE,
    states: &[LemmaState],
) -> LemmaReport
where
    P: Policy + ?Sized,
    RE: RewardEstimator + ?Sized,
{
    let mut report = LemmaReport::empty();
    report.states_checked = states.len();
    for state in states {
        let dists: Vec<ActionDistribution> = (0..world.num_contexts())
            .map(|x| policy.action_distribution(&world.context(x), &state.history))
            .collect();
        let m = {
            let mut sup = 0.0f64;
            for (x, dist) in dists.iter().enumerate() {
                for (a, pa) in dist.iter() {
                    sup = sup.max(pa / world.logging[x][a]);
                }
            }
            sup
        };
        let mut target_mean = 0.0;
        let mut mean = 0.0;
        let mut second = 0.0;
        let mut max_abs = 0.0f64;
        for (x, &dx) in world.contexts.iter().enumerate() {
            let context = world.context(x);
            for (a, pa) in dists[x].iter() {
                target_mean += dx * pa * world.rewards[x][a];
                let mu = world.logging[x][a];
                let p1 = world.rewards[x][a];
                for (r, pr) in [(1.0, p1), (0.0, 1.0 - p1)] {
                    let weight = dx * mu * pr;
                    if weight == 0.0 {
                        continue;
                    }
                    let event = ExplorationEvent {
                        context: context.clone(),
                        action: a,
                        reward: r,
                        propensity: mu,
                    };
                    let rk = dr_term(&event, &dists[x], rhat);
                    mean += weight * rk;
                    second += weight * rk * rk;
                    max_abs = max_abs.max(rk.abs());
                }
            }
        }
        let gap = (mean - target_mean).abs();
        let range_margin = max_abs - (1.0 + m);
        let second_margin = second - (3.0 + m);
        report.worst_mean_gap = report.worst_mean_gap.max(gap);
        report.worst_range_margin = report.worst_range_margin.max(range_margin);
        report.worst_second_moment_margin =
            report.worst_second_moment_margin.max(second_margin);
        if gap > MEAN_GAP_TOLERANCE
            || range_margin > BOUND_SLACK
            || second_margin > BOUND_SLACK
        {
            report.pass = false;
        }
    }
    report
}

// ── Random instances for sweeps ─────────────────────────────────────────

/// A random valid tiny world: 1–3 contexts, 2–4 actions, uniform reward
/// probabilities, logging rows bounded away from zero.
pub fn random_world(stream: &mut UniformStream) -> TinyWorld {
    let nx = 1 + stream.next_index(3);
    let k = 2 + stream.next_index(3);
    let mut contexts: Vec<f64> = (0..nx).map(|_| 0.1 + stream.next_f64()).collect();
    let total: f64 = contexts.iter().sum();
    contexts.iter_mut().for_each(|p| *p /= total);
    let rewards = (0..nx)
        .map(|_| (0..k).map(|_| stream.next_f64()).collect())
        .collect();
    let logging = (0..nx)
        .map(|_| {
            let mut row: Vec<f64> = (0..k).map(|_| 0.1 + stream.next_f64()).collect();
            let total: f64 = row.iter().sum();
            row.iter_mut().for_each(|p| *p /= total);
            row
        })
        .collect();
    TinyWorld::new(contexts, rewards, logging).expect("constructed within limits")
}

/// A random policy table for the world, with strictly positive entries.
pub fn random_policy_table(world: &TinyWorld, stream: &mut UniformStream) -> TablePolicy {
    let rows = (0..world.num_contexts())
        .map(|_| {
            let mut row: Vec<f64> = (0..world.num_actions())
                .map(|_| 0.05 + stream.next_f64())
                .collect();
            let total: f64 = row.iter().sum();
            row.iter_mut().for_each(|p| *p /= total);
            row
        })
        .collect();
    TablePolicy::new(rows).expect("normalized rows")
}

/// A random plausible history: entries drawn from the world under its own
/// logging table.
pub fn random_history(world: &TinyWorld, stream: &mut UniformStream, max_len: usize) -> TargetHistory {
    let len = stream.next_index(max_len + 1);
    let mut history = TargetHistory::new();
    for event in sample_world_log(world, len, derive_seed(0x68697374, stream.next_index(1 << 30) as u64))
    {
        history.push(HistoryEntry {
            context: event.context,
            action: event.action,
            reward: event.reward,
        });
    }
    history
}

/// Run [`verify_lemmas`] across `num_worlds` random worlds × policies ×
/// reward estimators, with `states_per_world` random states each, and
/// aggregate the worst margins.
pub fn lemma_sweep(num_worlds: usize, states_per_world: usize, seed: u64) -> LemmaReport {
    let mut stream = UniformStream::new(seed);
    let mut report = LemmaReport::empty();
    for w in 0..num_worlds {
        let world = random_world(&mut stream);
        let states: Vec<LemmaState> = (0..states_per_world)
            .map(|_| LemmaState {
                history: random_history(&world, &mut stream, 6),
                cap: 0.05 + 0.95 * stream.next_f64(),
            })
            .collect();
        let table_policy;
        let greedy_policy;
        let policy: &dyn Policy = if w % 2 == 0 {
            table_policy = random_policy_table(&world, &mut stream);
            &table_policy
        } else {
            greedy_policy =
                EmpiricalGreedyPolicy::new(world.num_actions(), 0.1).expect("valid eps");
            &greedy_policy
        };
        let zero;
        let half;
        let exact;
        let random_table;
        let rhat: &dyn RewardEstimator = match w % 4 {
            0 => {
                zero = ConstantEstimator::new(0.0).expect("in range");
                &zero
            }
            1 => {
                half = ConstantEstimator::new(0.5).expect("in range");
                &half
            }
            2 => {
                exact = world.exact_reward_estimator();
                &exact
            }
            _ => {
                random_table = TableRewardEstimator::new(
                    (0..world.num_contexts())
                        .map(|_| (0..world.num_actions()).map(|_| stream.next_f64()).collect())
                        .collect(),
                )
                .expect("values in range");
                &random_table
            }
        };
        report.absorb(&verify_lemmas(&world, policy, rhat, &states));
    }
    report
}

// ── Monte Carlo experiments ─────────────────────────────────────────────

/// Exploration events granted per requested block in [`bias_experiment`];
/// runs that still fail to complete all blocks are counted as failures.
const EVENTS_PER_BLOCK: usize = 200;

/// Caveat attached to every bias report.
const EPS_CAVEAT: &str = "eps is measured over visited states only; it lower-bounds the uniform eps the bound statement assumes";

/// Monte Carlo check of the worst-case bias bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub runs: usize,
    pub failed_runs: usize,
    /// True when more than 1% of runs failed to complete all blocks.
    pub inconclusive: bool,
    /// Worst bias mass observed at each block index (1-based block t at
    /// position t−1).
    pub eps_per_block: Vec<f64>,
    pub eps_max: f64,
    pub bound: f64,
    pub exact_target_value: f64,
    pub mc_estimate: f64,
    pub mc_standard_error: f64,
    pub measured_bias: f64,
    /// `measured_bias ≤ bound + 3·SE`.
    pub within_bound: bool,
    pub note: String,
}

struct BiasRun {
    contribution: Option<f64>,
    /// `(block index, bias mass)` for every state the run visited.
    eps_visits: Vec<(usize, f64)>,
}

/// Estimate `E_μ[Σ_{t≤T} c_t·R_{B(t)}]` over seeded runs truncated at `T`
/// completed blocks, compare against the exact `E_π[Σ_{t≤T} r_t]`, and
/// check the gap against `theorem1_bound(T, ε)` with ε the worst bias mass
/// over visited states.
pub fn bias_experiment<P, RE>(
    world: &TinyWorld,
    policy: &P,
    rhat: &RE,
    q: f64,
    c_max: f64,
    t_blocks: usize,
    runs: usize,
    seed: u64,
) -> Result<BiasReport>
where
    P: Policy + ?Sized,
    RE: RewardEstimator + ?Sized,
{
    if runs < 1000 {
        return Err(Error::invalid_argument(
            "bias experiment needs at least 1000 runs",
        ));
    }
    if t_blocks == 0 {
        return Err(Error::invalid_argument("need at least one block"));
    }
    world.validate()?;
    let exact = exact_trajectory_value(world, policy, t_blocks)?;
    let n_events = EVENTS_PER_BLOCK * t_blocks;
    let options = EvalOptions {
        record_trace: true,
        accept_limit: Some(t_blocks),
    };

    let outcomes: Vec<BiasRun> = (0..runs)
        .into_par_iter()
        .map(|i| {
            let run_seed = seed.wrapping_add(i as u64);
            let events = sample_world_log(world, n_events, derive_seed(run_seed, 1));
            let result = drns_evaluate_with(
                &events,
                policy,
                rhat,
                q,
                c_max,
                derive_seed(run_seed, 2),
                &options,
            )
            .expect("nonempty stream");
            let trace = result.trace.as_ref().expect("trace requested");
            let mut eps_visits = Vec::new();
            let caps = trace.block_caps();
            for (t, &cap) in caps.iter().enumerate() {
                let history = trace.final_history.prefix(t);
                eps_visits.push((t + 1, world_bias_mass(world, policy, &history, cap)));
            }
            if trace.trailing_len() > 0 {
                let cap = trace.records.last().expect("nonempty run").cap;
                eps_visits.push((
                    caps.len() + 1,
                    world_bias_mass(world, policy, &trace.final_history, cap),
                ));
            }
            let contribution =
                (result.completed_blocks >= t_blocks).then_some(result.value_acc);
            BiasRun {
                contribution,
                eps_visits,
            }
        })
        .collect();

    let mut eps_per_block = vec![0.0f64; t_blocks];
    let mut contributions = Vec::with_capacity(runs);
    let mut failed = 0usize;
    for run in &outcomes {
        for &(t, eps) in &run.eps_visits {
            if t <= t_blocks {
                eps_per_block[t - 1] = eps_per_block[t - 1].max(eps);
            }
        }
        match run.contribution {
            Some(v) => contributions.push(v),
            None => failed += 1,
        }
    }
    let eps_max = eps_per_block.iter().fold(0.0f64, |a, &b| a.max(b));
    let bound = theorem1_bound(t_blocks, eps_max)?;
    let n = contributions.len().max(1) as f64;
    let mc_estimate = contributions.iter().sum::<f64>() / n;
    let variance = contributions
        .iter()
        .map(|v| (v - mc_estimate).powi(2))
        .sum::<f64>()
        / (n - 1.0).max(1.0);
    let mc_standard_error = (variance / n).sqrt();
    let measured_bias = (mc_estimate - exact).abs();
    Ok(BiasReport {
        runs,
        failed_runs: failed,
        inconclusive: (failed as f64) > 0.01 * runs as f64,
        eps_per_block,
        eps_max,
        bound,
        exact_target_value: exact,
        mc_estimate,
        mc_standard_error,
        measured_bias,
        within_bound: measured_bias <= bound + 3.0 * mc_standard_error,
        note: EPS_CAVEAT.to_string(),
    })
}

/// Empirical coverage of the Theorem 2 deviation bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub runs: usize,
    /// Runs with zero completed blocks, excluded from coverage.
    pub failed_runs: usize,
    pub m_used: f64,
    pub delta: f64,
    /// Coverage of `|R_trunc/C_trunc − E_{π_PV}[r]|` (completed blocks only).
    pub covered_truncated: usize,
    /// Same check with the full accumulators (trailing block included).
    pub covered_full: usize,
    pub coverage: f64,
    pub coverage_full: f64,
    /// Required coverage: `(1−δ)` minus a 3-sigma binomial allowance.
    pub threshold: f64,
    pub mean_bound: f64,
    pub pass: bool,
}

/// Per seeded run: evaluate, build `π_PV`, compute its exact value, and
/// check `|R/C − E_{π_PV}[r]| ≤ theorem2_bound(n, M, c_max, C, δ)`.
///
/// `M` is the exact stationary sup ratio of the target, so the experiment
/// is meaningful for stationary policies (nonstationary ones would need a
/// sup over reachable histories).
pub fn coverage_experiment<P, RE>(
    world: &TinyWorld,
    policy: &P,
    rhat: &RE,
    q: f64,
    c_max: f64,
    n_events: usize,
    runs: usize,
    delta: f64,
    seed: u64,
) -> Result<CoverageReport>
where
    P: Policy + ?Sized,
    RE: RewardEstimator + ?Sized,
{
    if runs == 0 || n_events == 0 {
        return Err(Error::invalid_argument("need runs ≥ 1 and events ≥ 1"));
    }
    world.validate()?;
    let m_used = stationary_sup_ratio(world, policy);
    let options = EvalOptions {
        record_trace: true,
        accept_limit: None,
    };

    struct CoverageRun {
        covered_truncated: bool,
        covered_full: bool,
        bound: f64,
    }

    let outcomes: Vec<Option<CoverageRun>> = (0..runs)
        .into_par_iter()
        .map(|i| {
            let run_seed = seed.wrapping_add(i as u64);
            let events = sample_world_log(world, n_events, derive_seed(run_seed, 1));
            let result = drns_evaluate_with(
                &events,
                policy,
                rhat,
                q,
                c_max,
                derive_seed(run_seed, 2),
                &options,
            )
            .expect("nonempty stream");
            let trace = result.trace.as_ref().expect("trace requested");
            if result.completed_blocks == 0 {
                return None;
            }
            let pv = pv_policy(trace, policy).expect("has completed blocks");
            let v_pv = exact_stationary_value(world, &pv);
            let (r_trunc, c_trunc) = trace.truncated_accumulators();
            let n_trunc = trace.records.len() - trace.trailing_len();
            let bound_trunc = theorem2_bound(n_trunc, m_used, c_max, c_trunc, delta)
                .expect("positive accumulators");
            let bound_full =
                theorem2_bound(result.events_used, m_used, c_max, result.count_acc, delta)
                    .expect("positive accumulators");
            Some(CoverageRun {
                covered_truncated: (r_trunc / c_trunc - v_pv).abs() <= bound_trunc,
                covered_full: (result.estimate - v_pv).abs() <= bound_full,
                bound: bound_trunc,
            })
        })
        .collect();

    let mut covered_truncated = 0usize;
    let mut covered_full = 0usize;
    let mut failed = 0usize;
    let mut bound_sum = 0.0;
    for outcome in &outcomes {
        match outcome {
            Some(run) => {
                covered_truncated += run.covered_truncated as usize;
                covered_full += run.covered_full as usize;
                bound_sum += run.bound;
            }
            None => failed += 1,
        }
    }
    let successes = runs - failed;
    let n = successes.max(1) as f64;
    let coverage = covered_truncated as f64 / n;
    let coverage_full = covered_full as f64 / n;
    let threshold = (1.0 - delta) - 3.0 * (delta * (1.0 - delta) / n).sqrt();
    Ok(CoverageReport {
        runs,
        failed_runs: failed,
        m_used,
        delta,
        covered_truncated,
        covered_full,
        coverage,
        coverage_full,
        threshold,
        mean_bound: bound_sum / n,
        pass: successes > 0 && coverage >= threshold,
    })
}
