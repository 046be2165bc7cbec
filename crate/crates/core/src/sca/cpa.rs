//! Correlation attacks with the last-round Hamming-distance model.
//!
//! The same machinery serves power traces (CPA) and the electromagnetic
//! proxy (CEMA); only the trace source differs. Hypotheses for all 256
//! guesses of one final-round key byte are correlated against every sample
//! column; the guess ranking is taken at the globally best sample.

use rayon::prelude::*;

use super::accumulator::CorrelationAccumulator;
use super::mtd::log_spaced_counts;
use super::TraceSet;
use crate::aes::last_round_hd_hypothesis;
use crate::error::AnalysisError;

/// Traces folded into per-batch accumulators in parallel; batch size is fixed
/// so the reduction order is deterministic.
const BATCH: usize = 2048;

#[derive(Debug, Clone)]
pub struct AttackOptions {
    pub target_byte: usize,
    /// Repeat-encryption averaging factor. Consecutive traces with identical
    /// plaintexts are averaged in groups of this size before the attack; a
    /// set without repeats is used as-is.
    pub averaging: usize,
    /// True final-round key byte, when the evaluator knows it. Enables rank
    /// reporting.
    pub known_key_byte: Option<u8>,
}

impl Default for AttackOptions {
    fn default() -> Self {
        AttackOptions {
            target_byte: 0,
            averaging: 1,
            known_key_byte: None,
        }
    }
}

/// Guess ranking at one measurement-count checkpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MtdPoint {
    pub trace_count: usize,
    pub best_guess: u8,
    pub best_correlation: f64,
    /// Rank of the true byte (0 = recovered), when the truth is known.
    pub correct_rank: Option<u16>,
}

#[derive(Debug, Clone)]
pub struct AttackResult {
    /// Final correlation matrix, row-major `256 x n_samples`.
    pub correlations: Vec<f64>,
    pub n_samples: usize,
    pub n_traces_used: usize,
    pub best_guess: u8,
    pub best_sample: usize,
    pub best_correlation: f64,
    /// Rank of the true byte at the final count (0 = recovered).
    pub key_rank: Option<u16>,
    /// Ranking at log-spaced checkpoints, strictly increasing in count.
    pub mtd_curve: Vec<MtdPoint>,
    pub recovered_key_bytes: Vec<u8>,
}

impl AttackResult {
    pub fn recovered(&self) -> Option<bool> {
        self.key_rank.map(|r| r == 0)
    }

    /// Smallest checkpoint from which the correct byte ranks first at every
    /// later checkpoint too. A transient rank-0 blip at one early checkpoint
    /// is not a disclosure.
    pub fn disclosure_count(&self) -> Option<usize> {
        let mut stable_from = None;
        for point in self.mtd_curve.iter().rev() {
            if point.correct_rank == Some(0) {
                stable_from = Some(point.trace_count);
            } else {
                break;
            }
        }
        stable_from
    }
}

/// All 256 last-round hypotheses for one ciphertext and target byte.
#[inline]
pub fn hypothesis_row(ct: &[u8; 16], target_byte: usize) -> [f64; 256] {
    let mut row = [0.0f64; 256];
    for (guess, h) in row.iter_mut().enumerate() {
        *h = f64::from(last_round_hd_hypothesis(ct, target_byte, guess as u8));
    }
    row
}

/// Streaming attack state: feed traces, snapshot the ranking at log-spaced
/// checkpoints, finalize into an [`AttackResult`].
#[derive(Debug, Clone)]
pub struct CpaStream {
    acc: CorrelationAccumulator,
    target_byte: usize,
    known_key_byte: Option<u8>,
    checkpoints: Vec<usize>,
    next_checkpoint: usize,
    mtd_curve: Vec<MtdPoint>,
}

impl CpaStream {
    pub fn new(
        n_samples: usize,
        target_byte: usize,
        known_key_byte: Option<u8>,
        max_traces: usize,
    ) -> Result<Self, AnalysisError> {
        if target_byte >= 16 {
            return Err(AnalysisError::ByteIndexOutOfRange(target_byte));
        }
        Ok(CpaStream {
            acc: CorrelationAccumulator::new(n_samples),
            target_byte,
            known_key_byte,
            checkpoints: log_spaced_counts(100, max_traces, 10),
            next_checkpoint: 0,
            mtd_curve: Vec::new(),
        })
    }

    pub fn n_traces(&self) -> usize {
        self.acc.n_traces as usize
    }

    pub fn push(&mut self, ct: &[u8; 16], samples: &[f64]) {
        let hyp = hypothesis_row(ct, self.target_byte);
        self.acc.add_trace(samples, &hyp);
        self.maybe_snapshot();
    }

    /// Fold a batch of traces, accumulating sub-batches in parallel and
    /// merging them in index order.
    pub fn push_batch(&mut self, cts: &[[u8; 16]], samples: &[f64], n_samples: usize) {
        debug_assert_eq!(samples.len(), cts.len() * n_samples);
        if cts.is_empty() {
            return;
        }
        // All partials must center on the same per-column reference.
        self.acc.ensure_reference(&samples[..n_samples]);
        let mut start = 0usize;
        while start < cts.len() {
            // Stop at the next checkpoint boundary so snapshots land exactly.
            let until_cp = self
                .checkpoints
                .get(self.next_checkpoint)
                .map(|&cp| cp.saturating_sub(self.acc.n_traces as usize))
                .unwrap_or(usize::MAX);
            let len = (cts.len() - start).min(until_cp.max(1));
            let end = start + len;

            let target_byte = self.target_byte;
            let template = self.acc.partial();
            let partials: Vec<CorrelationAccumulator> = (start..end)
                .collect::<Vec<_>>()
                .par_chunks(BATCH)
                .map(|chunk| {
                    let mut local = template.partial();
                    for &i in chunk {
                        let hyp = hypothesis_row(&cts[i], target_byte);
                        local.add_trace(&samples[i * n_samples..(i + 1) * n_samples], &hyp);
                    }
                    local
                })
                .collect();
            for p in &partials {
                self.acc.merge(p);
            }
            self.maybe_snapshot();
            start = end;
        }
    }

    fn maybe_snapshot(&mut self) {
        while self.next_checkpoint < self.checkpoints.len()
            && self.acc.n_traces as usize >= self.checkpoints[self.next_checkpoint]
        {
            let count = self.checkpoints[self.next_checkpoint];
            let (best_guess, _, best_corr, rank) = rank_guesses(&self.acc, self.known_key_byte);
            self.mtd_curve.push(MtdPoint {
                trace_count: count,
                best_guess,
                best_correlation: best_corr,
                correct_rank: rank,
            });
            self.next_checkpoint += 1;
        }
    }

    pub fn finalize(self) -> Result<AttackResult, AnalysisError> {
        if self.acc.n_traces < 256 {
            return Err(AnalysisError::TooFewTraces {
                needed: 256,
                got: self.acc.n_traces as usize,
            });
        }
        let zero_cols = self.acc.zero_variance_columns();
        if !zero_cols.is_empty() {
            return Err(AnalysisError::ZeroVarianceColumns(zero_cols));
        }
        let (best_guess, best_sample, best_correlation, key_rank) =
            rank_guesses(&self.acc, self.known_key_byte);
        Ok(AttackResult {
            correlations: self.acc.correlation_matrix(),
            n_samples: self.acc.n_samples,
            n_traces_used: self.acc.n_traces as usize,
            best_guess,
            best_sample,
            best_correlation,
            key_rank,
            mtd_curve: self.mtd_curve,
            recovered_key_bytes: vec![best_guess],
        })
    }
}

/// Best guess/sample by absolute correlation, and the rank of the true byte
/// within the globally best sample column.
fn rank_guesses(
    acc: &CorrelationAccumulator,
    known_key_byte: Option<u8>,
) -> (u8, usize, f64, Option<u16>) {
    let matrix = acc.correlation_matrix();
    let n_samples = acc.n_samples;
    let mut best_guess = 0usize;
    let mut best_sample = 0usize;
    let mut best_abs = -1.0f64;
    for g in 0..256 {
        for s in 0..n_samples {
            let v = matrix[g * n_samples + s].abs();
            if v > best_abs {
                best_abs = v;
                best_guess = g;
                best_sample = s;
            }
        }
    }
    let key_rank = known_key_byte.map(|correct| {
        let correct_abs = matrix[correct as usize * n_samples + best_sample].abs();
        let rank = (0..256)
            .filter(|&g| g != correct as usize)
            .filter(|&g| matrix[g * n_samples + best_sample].abs() > correct_abs)
            .count();
        rank as u16
    });
    (
        best_guess as u8,
        best_sample,
        matrix[best_guess * n_samples + best_sample],
        key_rank,
    )
}

/// Average consecutive identical-plaintext repeats in groups of `averaging`.
/// A set with no consecutive repeats is returned unchanged.
fn apply_repeat_averaging(traces: &TraceSet, averaging: usize) -> TraceSet {
    if averaging <= 1 || traces.n_traces() == 0 {
        return traces.clone();
    }
    let has_repeats = traces
        .plaintexts
        .windows(2)
        .any(|w| w[0] == w[1]);
    if !has_repeats {
        return traces.clone();
    }
    let mut out = TraceSet::empty(traces.n_samples, traces.metadata.clone());
    let mut i = 0;
    while i < traces.n_traces() {
        let pt = traces.plaintexts[i];
        let mut group = 0usize;
        let mut mean = vec![0.0f64; traces.n_samples];
        while i < traces.n_traces() && traces.plaintexts[i] == pt && group < averaging {
            for (m, &s) in mean.iter_mut().zip(traces.trace(i).iter()) {
                *m += f64::from(s);
            }
            group += 1;
            i += 1;
        }
        let averaged: Vec<f32> = mean.iter().map(|m| (*m / group as f64) as f32).collect();
        out.push_trace(pt, traces.ciphertexts[i - 1], &averaged);
    }
    out
}

/// Correlation power attack over a trace set.
pub fn cpa_attack(traces: &TraceSet, opts: &AttackOptions) -> Result<AttackResult, AnalysisError> {
    if opts.target_byte >= 16 {
        return Err(AnalysisError::ByteIndexOutOfRange(opts.target_byte));
    }
    let averaged = apply_repeat_averaging(traces, opts.averaging);
    let n = averaged.n_traces();
    if n < 256 {
        return Err(AnalysisError::TooFewTraces { needed: 256, got: n });
    }
    let mut stream = CpaStream::new(
        averaged.n_samples,
        opts.target_byte,
        opts.known_key_byte,
        n,
    )?;
    let samples_f64: Vec<f64> = averaged.samples.iter().map(|&s| f64::from(s)).collect();
    stream.push_batch(&averaged.ciphertexts, &samples_f64, averaged.n_samples);
    stream.finalize()
}

/// Correlation electromagnetic attack: identical machinery applied to the
/// EM-proxy trace set.
pub fn cema_attack(
    em_traces: &TraceSet,
    opts: &AttackOptions,
) -> Result<AttackResult, AnalysisError> {
    cpa_attack(em_traces, opts)
}
