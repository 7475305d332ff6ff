//! Streaming quantile of observed importance ratios.
//!
//! The rejection sampler keeps the multiset of ratios `p / π(a|x,h)` seen so
//! far and, after each accepted event, re-reads its `q`-th quantile to set
//! the next acceptance cap. Events where the target puts zero mass on the
//! logged action contribute a `+∞` entry, which sorts after every finite
//! ratio and drags the upper quantiles up.
//!
//! The quantile is the nearest-rank lower variant: with the `n` entries in
//! ascending order, `quantile(q) = sorted[floor(q * (n - 1))]`. At the scale
//! this library targets a sorted `Vec` with binary-search insertion is
//! simpler and faster in practice than a tree or sketch.

/// Multiset of importance ratios with nearest-rank quantile queries.
#[derive(Debug, Clone)]
pub struct QuantileTracker {
    q: f64,
    sorted: Vec<f64>,
}

impl QuantileTracker {
    /// `q` is the configured quantile order in `[0, 1]`.
    pub fn new(q: f64) -> Self {
        assert!((0.0..=1.0).contains(&q), "quantile order must be in [0, 1]");
        Self {
            q,
            sorted: Vec::new(),
        }
    }

    pub fn order(&self) -> f64 {
        self.q
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// Insert one ratio; `+∞` is allowed, NaN is not.
    pub fn insert(&mut self, ratio: f64) {
        debug_assert!(!ratio.is_nan(), "ratio must not be NaN");
        debug_assert!(ratio >= 0.0, "ratio must be nonnegative");
        let pos = self.sorted.partition_point(|&v| v < ratio);
        self.sorted.insert(pos, ratio);
    }

    /// Quantile at the configured order. Must not be called on an empty
    /// tracker; the evaluator always inserts before querying.
    pub fn query(&self) -> f64 {
        self.query_at(self.q)
    }

    /// Nearest-rank lower quantile at an arbitrary order in `[0, 1]`.
    pub fn query_at(&self, q: f64) -> f64 {
        assert!((0.0..=1.0).contains(&q), "quantile order must be in [0, 1]");
        assert!(!self.sorted.is_empty(), "quantile of empty multiset");
        let rank = (q * (self.sorted.len() - 1) as f64).floor() as usize;
        self.sorted[rank]
    }
}
