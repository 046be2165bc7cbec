//! Frequency-domain attack support: radix-2 transform, magnitude spectra,
//! and correlation analysis over a frequency band.

use super::cpa::{AttackOptions, AttackResult, CpaStream};
use super::TraceSet;
use crate::error::AnalysisError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Complex {
    pub re: f64,
    pub im: f64,
}

impl Complex {
    pub const ZERO: Complex = Complex { re: 0.0, im: 0.0 };

    pub fn new(re: f64, im: f64) -> Self {
        Complex { re, im }
    }

    #[inline]
    fn mul(self, other: Complex) -> Complex {
        Complex {
            re: self.re * other.re - self.im * other.im,
            im: self.re * other.im + self.im * other.re,
        }
    }

    pub fn abs(self) -> f64 {
        self.re.hypot(self.im)
    }
}

/// Iterative radix-2 decimation-in-time transform, in place. Length must be
/// a power of two.
fn fft_in_place(buf: &mut [Complex], inverse: bool) {
    let n = buf.len();
    assert!(n.is_power_of_two(), "fft length must be a power of two");
    if n <= 1 {
        return;
    }

    // Bit-reversal permutation.
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = (i as u32).reverse_bits() >> (32 - bits);
        let j = j as usize;
        if j > i {
            buf.swap(i, j);
        }
    }

    let sign = if inverse { 1.0 } else { -1.0 };
    let mut len = 2;
    while len <= n {
        let angle = sign * 2.0 * std::f64::consts::PI / len as f64;
        let w_len = Complex::new(angle.cos(), angle.sin());
        for start in (0..n).step_by(len) {
            let mut w = Complex::new(1.0, 0.0);
            for k in 0..len / 2 {
                let even = buf[start + k];
                let odd = buf[start + k + len / 2].mul(w);
                buf[start + k] = Complex::new(even.re + odd.re, even.im + odd.im);
                buf[start + k + len / 2] = Complex::new(even.re - odd.re, even.im - odd.im);
                w = w.mul(w_len);
            }
        }
        len <<= 1;
    }

    if inverse {
        let scale = 1.0 / n as f64;
        for v in buf.iter_mut() {
            v.re *= scale;
            v.im *= scale;
        }
    }
}

pub fn fft_forward(buf: &mut [Complex]) {
    fft_in_place(buf, false);
}

pub fn fft_inverse(buf: &mut [Complex]) {
    fft_in_place(buf, true);
}

/// Magnitude spectrum of a real signal, zero-padded to the next power of two.
/// Returns the non-negative-frequency bins (N/2 + 1 values).
pub fn magnitude_spectrum(signal: &[f64]) -> Vec<f64> {
    let n = signal.len().next_power_of_two().max(1);
    let mut buf = vec![Complex::ZERO; n];
    for (b, &s) in buf.iter_mut().zip(signal.iter()) {
        b.re = s;
    }
    fft_forward(&mut buf);
    buf[..n / 2 + 1].iter().map(|c| c.abs()).collect()
}

/// Correlation attack across frequency bins restricted to `[f_lo, f_hi]`.
///
/// Each trace is replaced by the magnitude of its discrete spectrum
/// (zero-padded to a power of two), and the usual per-guess correlation runs
/// over the bins inside the band. Bin width is `sample_rate / n_fft`.
pub fn spectral_cpa(
    traces: &TraceSet,
    opts: &AttackOptions,
    f_lo: f64,
    f_hi: f64,
) -> Result<AttackResult, AnalysisError> {
    if opts.target_byte >= 16 {
        return Err(AnalysisError::ByteIndexOutOfRange(opts.target_byte));
    }
    if traces.n_traces() == 0 {
        return Err(AnalysisError::EmptyTraceSet);
    }
    let fs = traces.metadata.sample_rate_hz;
    let nyquist = fs / 2.0;
    if f_hi > nyquist {
        return Err(AnalysisError::AboveNyquist { f_hi, nyquist });
    }
    if f_lo >= f_hi {
        return Err(AnalysisError::EmptyBand { f_lo, f_hi });
    }

    let n_fft = traces.n_samples.next_power_of_two();
    let bin_hz = fs / n_fft as f64;
    let bins: Vec<usize> = (0..=n_fft / 2)
        .filter(|&k| {
            let f = k as f64 * bin_hz;
            f >= f_lo && f <= f_hi
        })
        .collect();
    if bins.is_empty() {
        return Err(AnalysisError::EmptyBand { f_lo, f_hi });
    }

    let mut stream = CpaStream::new(
        bins.len(),
        opts.target_byte,
        opts.known_key_byte,
        traces.n_traces(),
    )?;
    let mut spectra = Vec::with_capacity(traces.n_traces() * bins.len());
    for i in 0..traces.n_traces() {
        let row: Vec<f64> = traces.trace(i).iter().map(|&s| f64::from(s)).collect();
        let mag = magnitude_spectrum(&row);
        spectra.extend(bins.iter().map(|&k| mag[k]));
    }
    stream.push_batch(&traces.ciphertexts, &spectra, bins.len());
    stream.finalize()
}
