//! Model-independent leakage assessment: Welch's t between a fixed-plaintext
//! and a random-plaintext population, per sample, with the customary 4.5
//! decision threshold.

use super::accumulator::Welford;
use super::mtd::log_spaced_counts;
use super::TraceSet;
use crate::error::AnalysisError;

/// |t| above this value flags meaningful leakage.
pub const TVLA_THRESHOLD: f64 = 4.5;

#[derive(Debug, Clone)]
pub struct TvlaResult {
    /// Welch t per sample at the full trace count.
    pub t_values: Vec<f64>,
    pub max_abs_t: f64,
    /// Smallest analyzed total trace count (log-spaced prefixes, both classes
    /// combined) at which max|t| crossed the threshold.
    pub first_leaky_trace_count: Option<usize>,
    /// (total trace count, max|t|) at each prefix checkpoint.
    pub t_vs_count: Vec<(usize, f64)>,
}

impl TvlaResult {
    pub fn leaks(&self) -> bool {
        self.max_abs_t > TVLA_THRESHOLD
    }
}

/// Welch's t for two accumulated populations. Zero when both the means and
/// the numerator agree exactly; infinite when variances vanish but means
/// differ (degenerate synthetic inputs).
fn welch_t(fixed: &Welford, random: &Welford) -> f64 {
    let num = fixed.mean - random.mean;
    let denom2 = fixed.sample_variance() / fixed.count as f64
        + random.sample_variance() / random.count as f64;
    if num == 0.0 {
        return 0.0;
    }
    if denom2 <= 0.0 {
        return if num > 0.0 { f64::INFINITY } else { f64::NEG_INFINITY };
    }
    num / denom2.sqrt()
}

/// Per-sample Welch t between the fixed and random populations, with the
/// leakage onset located over log-spaced prefixes of both sets.
pub fn tvla(fixed: &TraceSet, random: &TraceSet) -> Result<TvlaResult, AnalysisError> {
    if fixed.n_traces() == 0 || random.n_traces() == 0 {
        return Err(AnalysisError::EmptyTraceSet);
    }
    if fixed.n_samples != random.n_samples {
        return Err(AnalysisError::SampleCountMismatch {
            left: fixed.n_samples,
            right: random.n_samples,
        });
    }
    if fixed.n_traces() < 2 || random.n_traces() < 2 {
        return Err(AnalysisError::SingleTraceClass);
    }

    let n_samples = fixed.n_samples;
    let per_class = fixed.n_traces().min(random.n_traces());
    let checkpoints = log_spaced_counts(2.max(per_class.min(50)), per_class, 10);

    let mut acc_fixed = vec![Welford::new(); n_samples];
    let mut acc_random = vec![Welford::new(); n_samples];
    let mut consumed = 0usize;
    let mut t_vs_count = Vec::with_capacity(checkpoints.len());
    let mut first_leaky = None;
    let mut final_t = vec![0.0; n_samples];

    for &cp in &checkpoints {
        while consumed < cp {
            for (w, &s) in acc_fixed.iter_mut().zip(fixed.trace(consumed).iter()) {
                w.add(f64::from(s));
            }
            for (w, &s) in acc_random.iter_mut().zip(random.trace(consumed).iter()) {
                w.add(f64::from(s));
            }
            consumed += 1;
        }
        let mut max_abs = 0.0f64;
        for s in 0..n_samples {
            let t = welch_t(&acc_fixed[s], &acc_random[s]);
            if t.abs() > max_abs {
                max_abs = t.abs();
            }
            if cp == per_class {
                final_t[s] = t;
            }
        }
        let total = 2 * cp;
        t_vs_count.push((total, max_abs));
        if first_leaky.is_none() && max_abs > TVLA_THRESHOLD {
            first_leaky = Some(total);
        }
    }

    let max_abs_t = final_t.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    Ok(TvlaResult {
        t_values: final_t,
        max_abs_t,
        first_leaky_trace_count: first_leaky,
        t_vs_count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::CounterRng;
    use crate::sca::CaptureMetadata;

    fn gaussian_set(n: usize, n_samples: usize, mean: f64, sigma: f64, seed: u64) -> TraceSet {
        let mut rng = CounterRng::new(seed);
        let mut set = TraceSet::empty(n_samples, CaptureMetadata::default());
        for _ in 0..n {
            let row: Vec<f32> = (0..n_samples)
                .map(|_| (mean + rng.next_gaussian(sigma)) as f32)
                .collect();
            set.push_trace([0; 16], [0; 16], &row);
        }
        set
    }

    #[test]
    fn identical_sets_give_exactly_zero() {
        let set = gaussian_set(500, 6, 1.0, 0.3, 42);
        let result = tvla(&set, &set).unwrap();
        for &t in &result.t_values {
            assert_eq!(t, 0.0);
        }
        assert_eq!(result.max_abs_t, 0.0);
        assert!(result.first_leaky_trace_count.is_none());
    }

    #[test]
    fn swapping_arguments_negates_t_exactly() {
        let a = gaussian_set(400, 5, 1.0, 0.2, 7);
        let b = gaussian_set(400, 5, 1.08, 0.2, 8);
        let ab = tvla(&a, &b).unwrap();
        let ba = tvla(&b, &a).unwrap();
        for (x, y) in ab.t_values.iter().zip(ba.t_values.iter()) {
            assert!(
                (x + y).abs() <= 1e-12 * x.abs().max(1.0),
                "antisymmetry broken: {x} vs {y}"
            );
        }
    }

    #[test]
    fn distinguishes_separated_means() {
        let fixed = gaussian_set(2000, 4, 1.0, 0.5, 1);
        let random = gaussian_set(2000, 4, 1.2, 0.5, 2);
        let result = tvla(&fixed, &random).unwrap();
        assert!(result.max_abs_t > TVLA_THRESHOLD);
        assert!(result.first_leaky_trace_count.is_some());
        // Onset threshold is crossed no later than the full count.
        assert!(result.first_leaky_trace_count.unwrap() <= 4000);
    }

    #[test]
    fn equal_distributions_stay_quiet() {
        let fixed = gaussian_set(3000, 4, 1.0, 0.5, 3);
        let random = gaussian_set(3000, 4, 1.0, 0.5, 4);
        let result = tvla(&fixed, &random).unwrap();
        assert!(result.max_abs_t < TVLA_THRESHOLD, "max |t| = {}", result.max_abs_t);
    }

    #[test]
    fn rejects_degenerate_inputs() {
        let ok = gaussian_set(10, 3, 0.0, 1.0, 5);
        let empty = TraceSet::empty(3, CaptureMetadata::default());
        assert!(matches!(tvla(&empty, &ok), Err(AnalysisError::EmptyTraceSet)));

        let single = gaussian_set(1, 3, 0.0, 1.0, 6);
        assert!(matches!(tvla(&single, &ok), Err(AnalysisError::SingleTraceClass)));

        let wrong_width = gaussian_set(10, 4, 0.0, 1.0, 7);
        assert!(matches!(
            tvla(&ok, &wrong_width),
            Err(AnalysisError::SampleCountMismatch { .. })
        ));
    }

    #[test]
    fn t_vs_count_tracks_growth() {
        let fixed = gaussian_set(4000, 2, 1.0, 0.8, 8);
        let random = gaussian_set(4000, 2, 1.1, 0.8, 9);
        let result = tvla(&fixed, &random).unwrap();
        // More traces, more resolving power: the last checkpoint dominates
        // the first by a wide margin.
        let first = result.t_vs_count.first().unwrap().1;
        let last = result.t_vs_count.last().unwrap().1;
        assert!(last > first, "{first} -> {last}");
    }
}
