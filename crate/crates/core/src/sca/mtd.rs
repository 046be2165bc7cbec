//! Measurement-count estimation: how many traces until the correct guess
//! ranks first, judged over repeated independent captures.

/// Log-spaced integer checkpoints from `lo` to `hi` inclusive, `per_decade`
/// points per decade, deduplicated and sorted.
pub fn log_spaced_counts(lo: usize, hi: usize, per_decade: usize) -> Vec<usize> {
    assert!(lo >= 1 && per_decade >= 1);
    if hi < lo {
        return Vec::new();
    }
    let mut counts = Vec::new();
    let step = 10f64.powf(1.0 / per_decade as f64);
    let mut x = lo as f64;
    while x < hi as f64 {
        counts.push(x.round() as usize);
        x *= step;
    }
    counts.push(hi);
    counts.dedup();
    counts
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MtdEstimate {
    /// Smallest checkpoint at which the key ranked first in enough repeats.
    Reached(usize),
    NotReached,
}

impl std::fmt::Display for MtdEstimate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MtdEstimate::Reached(n) => write!(f, "{n}"),
            MtdEstimate::NotReached => write!(f, "not reached"),
        }
    }
}

/// Estimate the minimum trace count over `n_repeats` independent captures.
///
/// `run_repeat(repeat_index, checkpoints)` must return, for each checkpoint,
/// whether the correct byte ranked first at that count. The estimate is the
/// smallest checkpoint at which at least `n_repeats - 1` repeats rank it
/// first; `NotReached` past `max_traces`.
pub fn estimate_mtd<F>(run_repeat: F, max_traces: usize, n_repeats: usize) -> MtdEstimate
where
    F: Fn(usize, &[usize]) -> Vec<bool>,
{
    assert!(n_repeats >= 3, "need at least 3 repeats");
    let checkpoints = log_spaced_counts(100.min(max_traces), max_traces, 10);
    let curves: Vec<Vec<bool>> = (0..n_repeats)
        .map(|r| {
            let curve = run_repeat(r, &checkpoints);
            assert_eq!(curve.len(), checkpoints.len(), "repeat {r} curve length");
            curve
        })
        .collect();
    for (i, &count) in checkpoints.iter().enumerate() {
        let hits = curves.iter().filter(|c| c[i]).count();
        if hits >= n_repeats - 1 {
            return MtdEstimate::Reached(count);
        }
    }
    MtdEstimate::NotReached
}
