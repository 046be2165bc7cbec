//! Mergeable statistics accumulators.
//!
//! Everything the attack and leakage analyses need is expressed as sums that
//! merge by addition, so trace batches can be folded in parallel and reduced
//! in a fixed order for bit-reproducible results.

/// Per-sample Welford accumulator (count, mean, M2), mergeable.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Welford {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Welford {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        self.count += 1;
        let delta = value - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (value - self.mean);
    }

    pub fn sample_variance(&self) -> f64 {
        if self.count < 2 {
            f64::NAN
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn merge(&mut self, other: &Welford) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = other.clone();
            return;
        }
        let n1 = self.count as f64;
        let n2 = other.count as f64;
        let total = n1 + n2;
        let delta = other.mean - self.mean;
        self.mean = (n1 * self.mean + n2 * other.mean) / total;
        self.m2 = self.m2 + other.m2 + delta * delta * n1 * n2 / total;
        self.count += other.count;
    }
}

/// Sums needed for Pearson correlation between each of 256 key-guess
/// hypotheses and every sample column of a trace set.
///
/// Sample values are accumulated relative to a per-column reference (the
/// first trace seen), which keeps the n*S2 - S^2 cancellation conditioned
/// even for near-constant columns riding on a large offset. Correlation is
/// shift-invariant, so the math is unchanged:
/// r = (n*Sht - Sh*St) / sqrt((n*Shh - Sh^2)(n*Stt - St^2)).
#[derive(Debug, Clone)]
pub struct CorrelationAccumulator {
    pub n_samples: usize,
    pub n_traces: u64,
    /// Per-column offsets subtracted from every trace. Partials being merged
    /// must share the same reference.
    reference: Option<Vec<f64>>,
    /// Per sample: sum of centered trace values and of their squares.
    pub sum_t: Vec<f64>,
    pub sum_tt: Vec<f64>,
    /// Per guess: sum of hypothesis values and of their squares.
    pub sum_h: [f64; 256],
    pub sum_hh: [f64; 256],
    /// Per guess, per sample: sum of products. Row-major `[guess][sample]`.
    pub sum_ht: Vec<f64>,
}

impl CorrelationAccumulator {
    pub fn new(n_samples: usize) -> Self {
        CorrelationAccumulator {
            n_samples,
            n_traces: 0,
            reference: None,
            sum_t: vec![0.0; n_samples],
            sum_tt: vec![0.0; n_samples],
            sum_h: [0.0; 256],
            sum_hh: [0.0; 256],
            sum_ht: vec![0.0; 256 * n_samples],
        }
    }

    /// Empty accumulator sharing this one's reference, for parallel partials.
    pub fn partial(&self) -> Self {
        let mut p = CorrelationAccumulator::new(self.n_samples);
        p.reference = self.reference.clone();
        p
    }

    /// Pin the per-column reference if not set yet.
    pub fn ensure_reference(&mut self, samples: &[f64]) {
        if self.reference.is_none() {
            self.reference = Some(samples.to_vec());
        }
    }

    /// Fold in one trace with its 256 hypothesis values.
    pub fn add_trace(&mut self, samples: &[f64], hypotheses: &[f64; 256]) {
        debug_assert_eq!(samples.len(), self.n_samples);
        self.ensure_reference(samples);
        let reference = self.reference.as_ref().unwrap();
        self.n_traces += 1;
        // Centered copy reused across all guesses.
        let centered: Vec<f64> = samples
            .iter()
            .zip(reference.iter())
            .map(|(&t, &r)| t - r)
            .collect();
        for (j, &t) in centered.iter().enumerate() {
            self.sum_t[j] += t;
            self.sum_tt[j] += t * t;
        }
        for (g, &h) in hypotheses.iter().enumerate() {
            self.sum_h[g] += h;
            self.sum_hh[g] += h * h;
            let row = &mut self.sum_ht[g * self.n_samples..(g + 1) * self.n_samples];
            for (acc, &t) in row.iter_mut().zip(centered.iter()) {
                *acc += h * t;
            }
        }
    }

    pub fn merge(&mut self, other: &CorrelationAccumulator) {
        assert_eq!(self.n_samples, other.n_samples);
        if other.n_traces == 0 {
            return;
        }
        match (&self.reference, &other.reference) {
            (None, Some(r)) => self.reference = Some(r.clone()),
            (Some(a), Some(b)) => {
                debug_assert!(a == b, "merging accumulators with different references")
            }
            _ => {}
        }
        self.n_traces += other.n_traces;
        for (a, b) in self.sum_t.iter_mut().zip(other.sum_t.iter()) {
            *a += b;
        }
        for (a, b) in self.sum_tt.iter_mut().zip(other.sum_tt.iter()) {
            *a += b;
        }
        for g in 0..256 {
            self.sum_h[g] += other.sum_h[g];
            self.sum_hh[g] += other.sum_hh[g];
        }
        for (a, b) in self.sum_ht.iter_mut().zip(other.sum_ht.iter()) {
            *a += b;
        }
    }

    /// Correlation of one guess against one sample column, clamped into
    /// [-1, 1] against last-bit rounding of the sums.
    pub fn correlation(&self, guess: usize, sample: usize) -> f64 {
        let n = self.n_traces as f64;
        let sh = self.sum_h[guess];
        let st = self.sum_t[sample];
        let num = n * self.sum_ht[guess * self.n_samples + sample] - sh * st;
        let var_h = n * self.sum_hh[guess] - sh * sh;
        let var_t = n * self.sum_tt[sample] - st * st;
        let denom = (var_h * var_t).sqrt();
        if denom == 0.0 {
            0.0
        } else {
            (num / denom).clamp(-1.0, 1.0)
        }
    }

    /// Full 256 x n_samples correlation matrix, row-major by guess.
    pub fn correlation_matrix(&self) -> Vec<f64> {
        let mut out = vec![0.0; 256 * self.n_samples];
        for g in 0..256 {
            for s in 0..self.n_samples {
                out[g * self.n_samples + s] = self.correlation(g, s);
            }
        }
        out
    }

    /// Sample columns whose variance is exactly zero.
    pub fn zero_variance_columns(&self) -> Vec<usize> {
        let n = self.n_traces as f64;
        (0..self.n_samples)
            .filter(|&s| n * self.sum_tt[s] - self.sum_t[s] * self.sum_t[s] <= 0.0)
            .collect()
    }
}

/// Naive two-pass Pearson correlation, kept as the oracle the streaming
/// implementation is checked against.
pub fn pearson_two_pass(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (&a, &b) in x.iter().zip(y.iter()) {
        let dx = a - mx;
        let dy = b - my;
        cov += dx * dy;
        vx += dx * dx;
        vy += dy * dy;
    }
    if vx == 0.0 || vy == 0.0 {
        0.0
    } else {
        cov / (vx.sqrt() * vy.sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::CounterRng;

    #[test]
    fn welford_matches_two_pass_moments() {
        let mut rng = CounterRng::new(1);
        let data: Vec<f64> = (0..1000).map(|_| rng.next_gaussian(2.5) + 1.0).collect();
        let mut w = Welford::new();
        for &d in &data {
            w.add(d);
        }
        let mean = data.iter().sum::<f64>() / data.len() as f64;
        let var = data.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>()
            / (data.len() - 1) as f64;
        assert!((w.mean - mean).abs() < 1e-12);
        assert!((w.sample_variance() - var).abs() < 1e-12);
    }

    #[test]
    fn welford_merge_equals_sequential() {
        let mut rng = CounterRng::new(2);
        let data: Vec<f64> = (0..500).map(|_| rng.next_gaussian(1.0)).collect();
        let mut whole = Welford::new();
        for &d in &data {
            whole.add(d);
        }
        let mut left = Welford::new();
        let mut right = Welford::new();
        for &d in &data[..123] {
            left.add(d);
        }
        for &d in &data[123..] {
            right.add(d);
        }
        left.merge(&right);
        assert_eq!(left.count, whole.count);
        assert!((left.mean - whole.mean).abs() < 1e-12);
        assert!((left.m2 - whole.m2).abs() < 1e-9 * whole.m2.abs().max(1.0));
    }

    #[test]
    fn streaming_correlation_matches_two_pass_oracle() {
        let mut rng = CounterRng::new(3);
        let n_traces = 400;
        let n_samples = 7;
        let mut acc = CorrelationAccumulator::new(n_samples);
        let mut traces = Vec::new();
        let mut hyps: Vec<[f64; 256]> = Vec::new();
        for _ in 0..n_traces {
            let t: Vec<f64> = (0..n_samples).map(|_| rng.next_gaussian(1.0)).collect();
            let mut h = [0.0f64; 256];
            for v in h.iter_mut() {
                *v = (rng.next_u64() % 9) as f64;
            }
            acc.add_trace(&t, &h);
            traces.push(t);
            hyps.push(h);
        }
        for guess in [0usize, 17, 255] {
            for sample in 0..n_samples {
                let xs: Vec<f64> = hyps.iter().map(|h| h[guess]).collect();
                let ys: Vec<f64> = traces.iter().map(|t| t[sample]).collect();
                let oracle = pearson_two_pass(&xs, &ys);
                let got = acc.correlation(guess, sample);
                assert!(
                    (got - oracle).abs() <= 1e-9 * oracle.abs().max(1.0),
                    "guess {guess} sample {sample}: {got} vs {oracle}"
                );
            }
        }
    }

    #[test]
    fn correlation_merge_equals_sequential() {
        let mut rng = CounterRng::new(4);
        let n_samples = 5;
        let gen = |rng: &mut CounterRng| {
            let t: Vec<f64> = (0..n_samples).map(|_| rng.next_gaussian(1.0)).collect();
            let mut h = [0.0f64; 256];
            for v in h.iter_mut() {
                *v = (rng.next_u64() % 9) as f64;
            }
            (t, h)
        };
        let mut whole = CorrelationAccumulator::new(n_samples);
        let mut a = CorrelationAccumulator::new(n_samples);
        let mut b = CorrelationAccumulator::new(n_samples);
        for i in 0..200 {
            let (t, h) = gen(&mut rng);
            if i == 0 {
                // Partials of one logical stream share its reference.
                whole.ensure_reference(&t);
                a.ensure_reference(&t);
                b.ensure_reference(&t);
            }
            whole.add_trace(&t, &h);
            if i < 77 {
                a.add_trace(&t, &h);
            } else {
                b.add_trace(&t, &h);
            }
        }
        a.merge(&b);
        assert_eq!(a.n_traces, whole.n_traces);
        for g in [0usize, 128] {
            for s in 0..n_samples {
                assert!((a.correlation(g, s) - whole.correlation(g, s)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_variance_columns_are_reported() {
        let mut acc = CorrelationAccumulator::new(3);
        let h = [1.0f64; 256];
        acc.add_trace(&[1.0, 5.0, 2.0], &h);
        acc.add_trace(&[1.0, 6.0, 2.0], &h);
        assert_eq!(acc.zero_variance_columns(), vec![0, 2]);
    }
}
