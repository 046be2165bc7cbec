//! Error types shared across the crate.

use thiserror::Error;

/// Failures of the circuit simulation and waveform synthesis.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("integration step too coarse: |dV| = {dv:.3e} V exceeds VDD/2 = {limit:.3e} V at t = {time:.3e} s")]
    StepTooCoarse { dv: f64, limit: f64, time: f64 },
    #[error("waveform length mismatch: {left} vs {right} samples")]
    LengthMismatch { left: usize, right: usize },
    #[error("waveform dt mismatch: {left:.3e} vs {right:.3e}")]
    DtMismatch { left: f64, right: f64 },
    #[error(
        "supply-drop scenario infeasible: needs {n_required} slices in the linear region \
         ({per_slice_ua:.3} uA each) but only {n_max} exist"
    )]
    VlbInfeasible {
        n_required: u32,
        n_max: u32,
        per_slice_ua: f64,
    },
    #[error("operating point is not in the linear region (v_ds = {v_ds} >= v_ov = {v_ov})")]
    NotLinearRegion { v_ds: f64, v_ov: f64 },
}

/// Failures of the statistical analyses.
#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("need at least {needed} traces after averaging, got {got}")]
    TooFewTraces { needed: usize, got: usize },
    #[error("zero-variance sample columns: {0:?}")]
    ZeroVarianceColumns(Vec<usize>),
    #[error("byte index {0} out of range 0..15")]
    ByteIndexOutOfRange(usize),
    #[error("f_hi = {f_hi:.3e} Hz exceeds Nyquist {nyquist:.3e} Hz")]
    AboveNyquist { f_hi: f64, nyquist: f64 },
    #[error("empty frequency band: f_lo {f_lo:.3e} >= f_hi {f_hi:.3e}")]
    EmptyBand { f_lo: f64, f_hi: f64 },
    #[error("trace sets have different sample counts: {left} vs {right}")]
    SampleCountMismatch { left: usize, right: usize },
    #[error("a class needs at least 2 traces for a variance estimate")]
    SingleTraceClass,
    #[error("trace set is empty")]
    EmptyTraceSet,
}

/// Failures of trace-file persistence.
#[derive(Debug, Error)]
pub enum TraceIoError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic {found:02x?}, expected \"RSTL\"")]
    BadMagic { found: [u8; 4] },
    #[error("unsupported version {0}")]
    UnsupportedVersion(u16),
    #[error("unsupported sample dtype {0}")]
    UnsupportedDtype(u8),
    #[error("unsupported record layout: pt_len {pt_len}, ct_len {ct_len}")]
    UnsupportedRecordLayout { pt_len: u8, ct_len: u8 },
    #[error("file truncated: expected {expected} bytes, found {found}")]
    Truncated { expected: u64, found: u64 },
    #[error("file size mismatch: expected {expected} bytes, found {found}")]
    SizeMismatch { expected: u64, found: u64 },
    #[error("trace set too large: {n_traces} x {n_samples} exceeds the 32-bit record budget")]
    TooLarge { n_traces: u64, n_samples: u64 },
    #[error("non-finite sample at trace {trace}, sample {sample}")]
    NonFiniteSample { trace: usize, sample: usize },
    #[error("inconsistent trace set: {0}")]
    InconsistentSet(String),
}

/// Failures while reading an experiment config file.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unknown key '{key}' (line {line})")]
    UnknownKey { key: String, line: usize },
    #[error("missing mandatory key '{0}'")]
    MissingKey(String),
    #[error("invalid value for '{key}' (line {line}): {message}")]
    InvalidValue {
        key: String,
        line: usize,
        message: String,
    },
}
