//! Attack and leakage-assessment toolkit: correlation attacks in time and
//! frequency domain, Welch-t leakage assessment, and measurement-count
//! estimation, all built on mergeable accumulators.

pub mod accumulator;
pub mod cpa;
pub mod method;
pub mod mtd;
pub mod spectrum;
pub mod tvla;

pub use accumulator::{pearson_two_pass, CorrelationAccumulator, Welford};
pub use cpa::{cema_attack, cpa_attack, AttackOptions, AttackResult, CpaStream, MtdPoint};
pub use method::{AttackMethod, AttackRequest, MethodRegistry};
pub use mtd::{estimate_mtd, log_spaced_counts, MtdEstimate};
pub use spectrum::{fft_inverse, fft_forward, magnitude_spectrum, spectral_cpa, Complex};
pub use tvla::{tvla, TvlaResult, TVLA_THRESHOLD};

use crate::error::TraceIoError;

/// Capture conditions a trace set carries with it.
#[derive(Debug, Clone, PartialEq)]
pub struct CaptureMetadata {
    pub sample_rate_hz: f64,
    /// Delivery mode or channel the set was captured from, free-form.
    pub source: String,
}

impl Default for CaptureMetadata {
    fn default() -> Self {
        CaptureMetadata {
            sample_rate_hz: 80e6,
            source: String::new(),
        }
    }
}

/// A matrix of leakage samples with the plaintext/ciphertext of every trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSet {
    pub n_samples: usize,
    /// Row-major `n_traces x n_samples`. Stored as f32, the on-disk sample
    /// type, so in-memory analysis matches file-based analysis bit for bit.
    pub samples: Vec<f32>,
    pub plaintexts: Vec<[u8; 16]>,
    pub ciphertexts: Vec<[u8; 16]>,
    pub metadata: CaptureMetadata,
}

impl TraceSet {
    pub fn empty(n_samples: usize, metadata: CaptureMetadata) -> Self {
        TraceSet {
            n_samples,
            samples: Vec::new(),
            plaintexts: Vec::new(),
            ciphertexts: Vec::new(),
            metadata,
        }
    }

    pub fn n_traces(&self) -> usize {
        self.plaintexts.len()
    }

    pub fn trace(&self, i: usize) -> &[f32] {
        &self.samples[i * self.n_samples..(i + 1) * self.n_samples]
    }

    pub fn push_trace(&mut self, pt: [u8; 16], ct: [u8; 16], samples: &[f32]) {
        debug_assert_eq!(samples.len(), self.n_samples);
        self.plaintexts.push(pt);
        self.ciphertexts.push(ct);
        self.samples.extend_from_slice(samples);
    }

    /// Keep only the first `n` traces.
    pub fn truncated(&self, n: usize) -> TraceSet {
        let n = n.min(self.n_traces());
        TraceSet {
            n_samples: self.n_samples,
            samples: self.samples[..n * self.n_samples].to_vec(),
            plaintexts: self.plaintexts[..n].to_vec(),
            ciphertexts: self.ciphertexts[..n].to_vec(),
            metadata: self.metadata.clone(),
        }
    }

    pub fn validate(&self) -> Result<(), TraceIoError> {
        let n = self.plaintexts.len();
        if self.ciphertexts.len() != n {
            return Err(TraceIoError::InconsistentSet(format!(
                "{} plaintexts vs {} ciphertexts",
                n,
                self.ciphertexts.len()
            )));
        }
        if self.samples.len() != n * self.n_samples {
            return Err(TraceIoError::InconsistentSet(format!(
                "{} sample values for {} traces x {} samples",
                self.samples.len(),
                n,
                self.n_samples
            )));
        }
        Ok(())
    }
}
