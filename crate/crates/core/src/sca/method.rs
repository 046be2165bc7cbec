//! Attack-method strategy registry.
//!
//! Each analysis variant lives behind a common trait and is selected by name
//! at runtime, so the command layer stays a thin dispatcher and new
//! distinguishers slot in without touching it.

use std::collections::BTreeMap;

use super::cpa::{cema_attack, cpa_attack, AttackOptions, AttackResult};
use super::spectrum::spectral_cpa;
use super::TraceSet;
use crate::error::AnalysisError;

/// Everything a method may need for one run.
#[derive(Debug, Clone)]
pub struct AttackRequest {
    pub options: AttackOptions,
    /// Frequency band for spectral analysis; defaults to DC..Nyquist.
    pub band: Option<(f64, f64)>,
}

impl AttackRequest {
    pub fn new(options: AttackOptions) -> Self {
        AttackRequest { options, band: None }
    }
}

pub trait AttackMethod: Send + Sync {
    fn name(&self) -> &'static str;
    fn run(&self, traces: &TraceSet, request: &AttackRequest) -> Result<AttackResult, AnalysisError>;
}

struct Cpa;

impl AttackMethod for Cpa {
    fn name(&self) -> &'static str {
        "cpa"
    }

    fn run(&self, traces: &TraceSet, request: &AttackRequest) -> Result<AttackResult, AnalysisError> {
        cpa_attack(traces, &request.options)
    }
}

struct Cema;

impl AttackMethod for Cema {
    fn name(&self) -> &'static str {
        "cema"
    }

    fn run(&self, traces: &TraceSet, request: &AttackRequest) -> Result<AttackResult, AnalysisError> {
        cema_attack(traces, &request.options)
    }
}

struct Spectral;

impl AttackMethod for Spectral {
    fn name(&self) -> &'static str {
        "spectral"
    }

    fn run(&self, traces: &TraceSet, request: &AttackRequest) -> Result<AttackResult, AnalysisError> {
        let nyquist = traces.metadata.sample_rate_hz / 2.0;
        let (f_lo, f_hi) = request.band.unwrap_or((0.0, nyquist));
        spectral_cpa(traces, &request.options, f_lo, f_hi)
    }
}

/// Name-indexed method collection with the built-in distinguishers
/// pre-registered.
pub struct MethodRegistry {
    methods: BTreeMap<&'static str, Box<dyn AttackMethod>>,
}

impl MethodRegistry {
    pub fn with_builtins() -> Self {
        let mut reg = MethodRegistry {
            methods: BTreeMap::new(),
        };
        reg.register(Box::new(Cpa));
        reg.register(Box::new(Cema));
        reg.register(Box::new(Spectral));
        reg
    }

    pub fn register(&mut self, method: Box<dyn AttackMethod>) {
        self.methods.insert(method.name(), method);
    }

    pub fn get(&self, name: &str) -> Option<&dyn AttackMethod> {
        self.methods.get(name).map(|m| m.as_ref())
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.methods.keys().copied().collect()
    }
}

impl Default for MethodRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}
