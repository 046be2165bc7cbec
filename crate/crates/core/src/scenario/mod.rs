//! Experiment orchestration: delivery modes behind a common trait, selected
//! by name, each producing power and EM-proxy trace captures plus the
//! physical measurements that go into a run report.
//!
//! Four modes ship: `unprotected` (the engine drawn straight from the rail),
//! `protected` (stacked current-source slices in saturation), `degenerated`
//! (top device bypassed) and `vlb` (protected topology after a malicious
//! supply drop re-biases the slices into the linear region).

pub mod cosim;

use std::collections::BTreeMap;

use crate::aes::{encrypt, ROUNDS};
use crate::config::ExperimentConfig;
use crate::error::SimError;
use crate::leakage::{round_amplitudes, CurrentWaveform};
use crate::pdn::{
    attenuation_ratio, smc_step, step_pdn, vlb_feasible, AttenuationRatio, CsSliceBank, PdnState,
    Region, SmcConfig, VlbInjection,
};
use crate::rng::CounterRng;
use crate::sca::{CaptureMetadata, TraceSet};

/// Node-integration substeps per recorded sample: at least four, and enough
/// that the step stays at or below a tenth of the engine clock period.
pub fn substeps_per_sample(samples_per_round: u32) -> usize {
    let needed = 10usize.div_ceil(samples_per_round.max(1) as usize);
    needed.max(4)
}
/// Controller periods allowed for initial settling.
const SETTLE_SMC_CYCLES: usize = 100;
/// Controller periods allowed for post-drop recovery.
const RECOVERY_SMC_CYCLES: usize = 220;
/// Traces folded into the attenuation measurement window.
const ATTENUATION_WINDOW_TRACES: usize = 256;

const STREAM_PLAINTEXT: u64 = 0x10;
const STREAM_SETTLE: u64 = 0x11;
const STREAM_CRYPTO_NOISE: u64 = 0x12;
const STREAM_CAPTURE_NOISE: u64 = 0x13;
const STREAM_EM_NOISE: u64 = 0x14;

/// How plaintexts are chosen across a capture.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlaintextPolicy {
    Random,
    Fixed([u8; 16]),
    /// Alternate fixed (even indices) and random (odd indices) within one
    /// run, so both leakage-assessment classes share the identical loop
    /// operating point.
    Interleaved([u8; 16]),
}

/// What to capture.
#[derive(Debug, Clone)]
pub struct CaptureRequest {
    pub n_traces: usize,
    pub seed: u64,
    pub plaintexts: PlaintextPolicy,
}

impl CaptureRequest {
    pub fn random(n_traces: usize, seed: u64) -> Self {
        CaptureRequest {
            n_traces,
            seed,
            plaintexts: PlaintextPolicy::Random,
        }
    }

    pub fn fixed(n_traces: usize, seed: u64, pt: [u8; 16]) -> Self {
        CaptureRequest {
            n_traces,
            seed,
            plaintexts: PlaintextPolicy::Fixed(pt),
        }
    }

    /// `n_per_class` fixed plus `n_per_class` random traces, interleaved.
    pub fn interleaved(n_per_class: usize, seed: u64, pt: [u8; 16]) -> Self {
        CaptureRequest {
            n_traces: 2 * n_per_class,
            seed,
            plaintexts: PlaintextPolicy::Interleaved(pt),
        }
    }
}

/// Split an interleaved capture into its (fixed, random) classes.
pub fn split_interleaved(set: &TraceSet) -> (TraceSet, TraceSet) {
    let mut fixed = TraceSet::empty(set.n_samples, set.metadata.clone());
    let mut random = TraceSet::empty(set.n_samples, set.metadata.clone());
    for i in 0..set.n_traces() {
        let dst = if i % 2 == 0 { &mut fixed } else { &mut random };
        dst.push_trace(set.plaintexts[i], set.ciphertexts[i], set.trace(i));
    }
    (fixed, random)
}

/// Consumer of captured traces. Lets large runs stream into accumulators
/// instead of materializing every sample.
pub trait TraceSink {
    fn accept(&mut self, index: usize, pt: [u8; 16], ct: [u8; 16], power: &[f32], em: &[f32]);
}

/// Sink that materializes both trace sets.
pub struct SetSink {
    pub power: TraceSet,
    pub em: TraceSet,
}

impl SetSink {
    pub fn new(n_samples: usize, sample_rate_hz: f64, source: &str) -> Self {
        let meta = |chan: &str| CaptureMetadata {
            sample_rate_hz,
            source: format!("{source}/{chan}"),
        };
        SetSink {
            power: TraceSet::empty(n_samples, meta("power")),
            em: TraceSet::empty(n_samples, meta("em")),
        }
    }
}

impl TraceSink for SetSink {
    fn accept(&mut self, _index: usize, pt: [u8; 16], ct: [u8; 16], power: &[f32], em: &[f32]) {
        self.power.push_trace(pt, ct, power);
        self.em.push_trace(pt, ct, em);
    }
}

/// Physical measurements of one capture run, reported alongside the traces.
#[derive(Debug, Clone)]
pub struct CaptureStats {
    pub mode: &'static str,
    pub n_traces: usize,
    pub n_samples: usize,
    pub sample_rate_hz: f64,
    /// Attenuation over the measurement window (crypto AC-RMS over supply
    /// AC-RMS), before capture noise.
    pub attenuation: Option<AttenuationRatio>,
    pub crypto_peak_to_peak: f64,
    pub supply_peak_to_peak: f64,
    pub mean_power_w: f64,
    /// Delivery-loop state at end of capture (simulated modes only).
    pub final_n_on: Option<u32>,
    pub final_v_aes: Option<f64>,
    pub final_region: Option<Region>,
    /// Supply-drop scenario bookkeeping.
    pub vlb: Option<VlbPhases>,
    /// Simulated durations, seconds.
    pub settle_sim_time: f64,
    pub capture_sim_time: f64,
}

/// Loop phases observed while a supply drop plays out.
#[derive(Debug, Clone)]
pub struct VlbPhases {
    /// Deepest node voltage seen after the drop.
    pub droop_min_v: f64,
    /// Seconds from drop completion to a stable in-band node.
    pub recovery_time: Option<f64>,
    pub stabilized: bool,
    pub brown_out: bool,
    pub n_on_after: u32,
    pub region_after: Region,
    pub n_required: u32,
}

/// A named capture strategy.
pub trait DeliveryMode: Send + Sync {
    fn name(&self) -> &'static str;
    fn capture(
        &self,
        cfg: &ExperimentConfig,
        req: &CaptureRequest,
        sink: &mut dyn TraceSink,
    ) -> Result<CaptureStats, SimError>;

    /// Convenience wrapper materializing both channels.
    fn capture_sets(
        &self,
        cfg: &ExperimentConfig,
        req: &CaptureRequest,
    ) -> Result<(TraceSet, TraceSet, CaptureStats), SimError> {
        let n_samples = ROUNDS * cfg.leakage.samples_per_round as usize;
        let rate = cfg.device.aes_clock_hz * f64::from(cfg.leakage.samples_per_round);
        let mut sink = SetSink::new(n_samples, rate, self.name());
        let stats = self.capture(cfg, req, &mut sink)?;
        Ok((sink.power, sink.em, stats))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Topology {
    Direct,
    Cascoded,
    Degenerated,
}

struct StandardMode {
    name: &'static str,
    topology: Topology,
    inject: bool,
}

impl DeliveryMode for StandardMode {
    fn name(&self) -> &'static str {
        self.name
    }

    fn capture(
        &self,
        cfg: &ExperimentConfig,
        req: &CaptureRequest,
        sink: &mut dyn TraceSink,
    ) -> Result<CaptureStats, SimError> {
        match self.topology {
            Topology::Direct => capture_unprotected(self.name, cfg, req, sink),
            Topology::Cascoded | Topology::Degenerated => capture_regulated(
                self.name,
                cfg,
                req,
                self.topology == Topology::Cascoded,
                self.inject,
                sink,
            ),
        }
    }
}

/// Name-indexed mode collection with the built-ins registered.
pub struct ScenarioRegistry {
    modes: BTreeMap<&'static str, Box<dyn DeliveryMode>>,
}

impl ScenarioRegistry {
    pub fn with_builtins() -> Self {
        let mut reg = ScenarioRegistry {
            modes: BTreeMap::new(),
        };
        reg.register(Box::new(StandardMode {
            name: "unprotected",
            topology: Topology::Direct,
            inject: false,
        }));
        reg.register(Box::new(StandardMode {
            name: "protected",
            topology: Topology::Cascoded,
            inject: false,
        }));
        reg.register(Box::new(StandardMode {
            name: "degenerated",
            topology: Topology::Degenerated,
            inject: false,
        }));
        reg.register(Box::new(StandardMode {
            name: "vlb",
            topology: Topology::Cascoded,
            inject: true,
        }));
        reg
    }

    pub fn register(&mut self, mode: Box<dyn DeliveryMode>) {
        self.modes.insert(mode.name(), mode);
    }

    pub fn get(&self, name: &str) -> Option<&dyn DeliveryMode> {
        self.modes.get(name).map(|m| m.as_ref())
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.modes.keys().copied().collect()
    }
}

impl Default for ScenarioRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

/// Mean crypto current at the calibration point: baseline plus the expected
/// per-round switching term (mean register Hamming distance is 64).
pub fn mean_crypto_current(cfg: &ExperimentConfig) -> f64 {
    cfg.leakage.baseline_current + 64.0 * cfg.leakage.current_per_hd
}

/// Average current the slice bank must deliver at the nominal node voltage.
pub fn bank_demand(cfg: &ExperimentConfig) -> f64 {
    mean_crypto_current(cfg) + cfg.smc.bleed_conductance * cfg.device.v_aes_nominal
}

/// Closed-form feasibility of the supply-drop scenario for a given drop.
pub fn vlb_feasibility_check(
    cfg: &ExperimentConfig,
    vdd_drop: f64,
) -> Result<crate::pdn::VlbFeasibility, SimError> {
    let vdd_attack = cfg.device.vdd - vdd_drop;
    if vdd_attack <= cfg.device.v_aes_nominal {
        return Err(SimError::InvalidParameter(format!(
            "attack rail {vdd_attack:.3} V cannot hold the node at {} V",
            cfg.device.v_aes_nominal
        )));
    }
    let bank = cfg.device.build_bank(true);
    let v_gs = vdd_attack * (1.0 - bank.bias_ratio);
    let v_ds = vdd_attack - cfg.device.v_aes_nominal;
    vlb_feasible(
        bank_demand(cfg),
        cfg.device.k_device,
        cfg.device.v_t,
        v_gs,
        v_ds,
        cfg.device.n_max,
    )
}

// ---------------------------------------------------------------------------
// capture pipelines
// ---------------------------------------------------------------------------

fn trace_streams(master: &CounterRng, index: usize) -> (CounterRng, CounterRng, CounterRng) {
    let per_trace = master.for_trace(index as u64);
    (
        per_trace.split(STREAM_CRYPTO_NOISE),
        per_trace.split(STREAM_CAPTURE_NOISE),
        per_trace.split(STREAM_EM_NOISE),
    )
}

fn plaintext_for(master: &CounterRng, req: &CaptureRequest, index: usize) -> [u8; 16] {
    let fixed = match req.plaintexts {
        PlaintextPolicy::Random => None,
        PlaintextPolicy::Fixed(pt) => Some(pt),
        PlaintextPolicy::Interleaved(pt) => index.is_multiple_of(2).then_some(pt),
    };
    if let Some(pt) = fixed {
        return pt;
    }
    let mut rng = master.split(STREAM_PLAINTEXT).for_trace(index as u64);
    let mut pt = [0u8; 16];
    rng.fill_bytes(&mut pt);
    pt
}

/// Rectangular per-round crypto current of one encryption, with per-sample
/// on-die noise.
fn crypto_samples_for(
    enc: &crate::aes::AesStateTrace,
    cfg: &ExperimentConfig,
    noise: &mut CounterRng,
    out: &mut Vec<f64>,
) {
    let spr = cfg.leakage.samples_per_round as usize;
    let amps = round_amplitudes(enc, &cfg.leakage);
    out.clear();
    for amp in amps {
        for _ in 0..spr {
            let v = amp + noise.next_gaussian(cfg.leakage.gaussian_noise_sigma);
            out.push(v.max(0.0));
        }
    }
}

/// EM proxy of one trace's supply samples: scaled first difference plus
/// pickup noise; the leading sample has no predecessor.
fn em_row(supply: &[f64], dt: f64, cfg: &ExperimentConfig, noise: &mut CounterRng) -> Vec<f32> {
    let mut out = Vec::with_capacity(supply.len());
    for i in 0..supply.len() {
        let diff = if i == 0 {
            0.0
        } else {
            cfg.leakage.em_scale * (supply[i] - supply[i - 1]) / dt
        };
        out.push((diff + noise.next_gaussian(cfg.leakage.em_noise_sigma)) as f32);
    }
    out
}

fn capture_unprotected(
    mode: &'static str,
    cfg: &ExperimentConfig,
    req: &CaptureRequest,
    sink: &mut dyn TraceSink,
) -> Result<CaptureStats, SimError> {
    cfg.leakage.validate()?;
    let spr = cfg.leakage.samples_per_round as usize;
    let n_samples = ROUNDS * spr;
    let dt = 1.0 / (cfg.device.aes_clock_hz * spr as f64);
    let master = CounterRng::new(req.seed);
    let key = cfg.attack.key;

    let mut crypto = Vec::with_capacity(n_samples);
    let mut window_crypto = Vec::new();
    let mut power_row = vec![0.0f32; n_samples];
    let mut energy = 0.0f64;

    for i in 0..req.n_traces {
        let pt = plaintext_for(&master, req, i);
        let enc = encrypt(&key, &pt);
        let (mut crypto_noise, mut capture_noise, mut em_noise) = trace_streams(&master, i);
        crypto_samples_for(&enc, cfg, &mut crypto_noise, &mut crypto);

        for (dst, &s) in power_row.iter_mut().zip(crypto.iter()) {
            *dst = (s + capture_noise.next_gaussian(cfg.capture_noise_sigma)) as f32;
        }
        let em = em_row(&crypto, dt, cfg, &mut em_noise);
        if i < ATTENUATION_WINDOW_TRACES {
            window_crypto.extend_from_slice(&crypto);
        }
        energy += crypto.iter().sum::<f64>() * dt * cfg.device.v_aes_nominal;
        sink.accept(i, pt, enc.ciphertext, &power_row, &em);
    }

    let window = CurrentWaveform {
        dt,
        t0: 0.0,
        samples: window_crypto,
    };
    let capture_sim_time = req.n_traces as f64 * n_samples as f64 * dt;
    Ok(CaptureStats {
        mode,
        n_traces: req.n_traces,
        n_samples,
        sample_rate_hz: 1.0 / dt,
        // The supply is the crypto current itself here.
        attenuation: Some(AttenuationRatio::Finite(1.0)),
        crypto_peak_to_peak: window.peak_to_peak(),
        supply_peak_to_peak: window.peak_to_peak(),
        mean_power_w: if capture_sim_time > 0.0 {
            energy / capture_sim_time
        } else {
            0.0
        },
        final_n_on: None,
        final_v_aes: None,
        final_region: None,
        vlb: None,
        settle_sim_time: 0.0,
        capture_sim_time,
    })
}

/// Shared plumbing for the slice-bank modes: settle the loop, optionally play
/// the supply drop, then capture back-to-back encryptions.
struct LoopSim {
    state: PdnState,
    bank: CsSliceBank,
    smc: SmcConfig,
    dt: f64,
    substeps_per_sample: usize,
    substeps_per_smc: u64,
    substeps_done: u64,
    injection: Option<VlbInjection>,
}

impl LoopSim {
    fn new(cfg: &ExperimentConfig, cascoded: bool) -> Result<Self, SimError> {
        let smc = cfg.smc.clone();
        smc.validate()?;
        cfg.leakage.validate()?;
        let bank = cfg.device.build_bank(cascoded);
        bank.validate()?;
        let mut state = PdnState::new(cfg.device.vdd);
        state.c_load = cfg.device.c_load;
        state.c_decap = cfg.device.c_decap;
        let spr = cfg.leakage.samples_per_round;
        let substeps_per_sample = substeps_per_sample(spr);
        let dt = 1.0
            / (cfg.device.aes_clock_hz * f64::from(spr) * substeps_per_sample as f64);
        let substeps_per_smc = (1.0 / smc.smc_clock_hz / dt).round() as u64;
        Ok(LoopSim {
            state,
            bank,
            smc,
            dt,
            substeps_per_sample,
            substeps_per_smc: substeps_per_smc.max(1),
            substeps_done: 0,
            injection: None,
        })
    }

    /// Seconds between recorded samples.
    fn sample_dt(&self) -> f64 {
        self.dt * self.substeps_per_sample as f64
    }

    fn engine_running(&self, v_brownout: f64) -> bool {
        self.state.v_aes >= v_brownout
    }

    /// Advance one substep under the given crypto draw; fires the controller
    /// at its period boundaries. Returns the supply current.
    fn advance(&mut self, i_crypto: f64) -> Result<f64, SimError> {
        if let Some(inj) = &self.injection {
            self.state.v_dd = inj.vdd_at(self.state.time);
        }
        let supply = step_pdn(&mut self.state, &mut self.bank, &self.smc, i_crypto, self.dt)?;
        self.substeps_done += 1;
        if self.substeps_done.is_multiple_of(self.substeps_per_smc) {
            smc_step(&mut self.state, &mut self.bank, &self.smc);
        }
        Ok(supply)
    }

    /// Run one sample window at constant crypto draw; returns the
    /// window-mean supply current.
    fn run_sample(&mut self, i_crypto: f64) -> Result<f64, SimError> {
        let mut acc = 0.0;
        for _ in 0..self.substeps_per_sample {
            acc += self.advance(i_crypto)?;
        }
        Ok(acc / self.substeps_per_sample as f64)
    }
}

/// Drive the loop with back-to-back encryptions for a whole number of
/// controller cycles, as happens while the device settles. Plaintexts and
/// noise come from independent streams split off the given one; the engine
/// idles at baseline while the node is below the brown-out voltage.
fn run_settle_cycles(
    sim: &mut LoopSim,
    cfg: &ExperimentConfig,
    rng: &mut CounterRng,
    cycles: usize,
) -> Result<(), SimError> {
    let spr = cfg.leakage.samples_per_round as usize;
    let substeps_per_enc = (ROUNDS * spr * sim.substeps_per_sample) as u64;
    let mut noise_rng = rng.fork();
    let mut crypto = Vec::with_capacity(ROUNDS * spr);
    let target_substeps = sim.substeps_done + cycles as u64 * sim.substeps_per_smc;
    while sim.substeps_done < target_substeps {
        if sim.engine_running(cfg.device.v_brownout) {
            let mut pt = [0u8; 16];
            rng.fill_bytes(&mut pt);
            let enc = encrypt(&cfg.attack.key, &pt);
            crypto_samples_for(&enc, cfg, &mut noise_rng, &mut crypto);
            for &i in crypto.iter() {
                for _ in 0..sim.substeps_per_sample {
                    sim.advance(i)?;
                    if sim.substeps_done >= target_substeps {
                        return Ok(());
                    }
                }
            }
        } else {
            let idle = cfg.leakage.baseline_current;
            let remaining = substeps_per_enc.min(target_substeps - sim.substeps_done);
            for _ in 0..remaining {
                sim.advance(idle)?;
            }
        }
    }
    Ok(())
}

fn capture_regulated(
    mode: &'static str,
    cfg: &ExperimentConfig,
    req: &CaptureRequest,
    cascoded: bool,
    inject: bool,
    sink: &mut dyn TraceSink,
) -> Result<CaptureStats, SimError> {
    let spr = cfg.leakage.samples_per_round as usize;
    let n_samples = ROUNDS * spr;
    let mut sim = LoopSim::new(cfg, cascoded)?;
    let sample_dt = sim.sample_dt();
    let master = CounterRng::new(req.seed);
    let mut settle_rng = master.split(STREAM_SETTLE);

    // Feasibility gate before burning simulation time.
    let feasibility = if inject {
        let f = vlb_feasibility_check(cfg, cfg.attack.vdd_drop)?;
        if !f.feasible {
            let vdd_attack = cfg.device.vdd - cfg.attack.vdd_drop;
            let v_gs = vdd_attack * (1.0 - sim.bank.bias_ratio);
            let v_ds = vdd_attack - cfg.device.v_aes_nominal;
            let per_slice = cfg.device.k_device
                * (v_gs - cfg.device.v_t - 0.5 * v_ds)
                * v_ds;
            return Err(SimError::VlbInfeasible {
                n_required: f.n_required,
                n_max: cfg.device.n_max,
                per_slice_ua: per_slice * 1e6,
            });
        }
        Some(f)
    } else {
        None
    };

    run_settle_cycles(&mut sim, cfg, &mut settle_rng, SETTLE_SMC_CYCLES)?;
    let settle_end = sim.state.time;

    // Optional supply drop, then wait for the loop to find its new footing.
    let mut vlb_phases = None;
    if inject {
        let injection = VlbInjection::new(
            cfg.device.vdd,
            cfg.attack.vdd_drop,
            cfg.attack.ramp,
            sim.state.time,
        )?;
        let mut phases = await_recovery(&mut sim, cfg, injection, &mut settle_rng)?;
        phases.n_required = feasibility.map(|f| f.n_required).unwrap_or(0);
        vlb_phases = Some(phases);
    }

    // Capture: encryptions back to back, state carried across traces.
    let key = cfg.attack.key;
    let mut crypto = Vec::with_capacity(n_samples);
    let mut supply = vec![0.0f64; n_samples];
    let mut power_row = vec![0.0f32; n_samples];
    let mut window_crypto = Vec::new();
    let mut window_supply = Vec::new();
    let mut energy = 0.0f64;
    let capture_start = sim.state.time;

    for i in 0..req.n_traces {
        let pt = plaintext_for(&master, req, i);
        let enc = encrypt(&key, &pt);
        let (mut crypto_noise, mut capture_noise, mut em_noise) = trace_streams(&master, i);
        crypto_samples_for(&enc, cfg, &mut crypto_noise, &mut crypto);

        for (s, &i_crypto) in crypto.iter().enumerate() {
            supply[s] = sim.run_sample(i_crypto)?;
        }
        for (dst, &s) in power_row.iter_mut().zip(supply.iter()) {
            *dst = (s + capture_noise.next_gaussian(cfg.capture_noise_sigma)) as f32;
        }
        let em = em_row(&supply, sample_dt, cfg, &mut em_noise);
        if i < ATTENUATION_WINDOW_TRACES {
            window_crypto.extend_from_slice(&crypto);
            window_supply.extend_from_slice(&supply);
        }
        energy += crypto.iter().sum::<f64>() * sample_dt * sim.state.v_aes;
        sink.accept(i, pt, enc.ciphertext, &power_row, &em);
    }

    let crypto_wf = CurrentWaveform {
        dt: sample_dt,
        t0: 0.0,
        samples: window_crypto,
    };
    let supply_wf = CurrentWaveform {
        dt: sample_dt,
        t0: 0.0,
        samples: window_supply,
    };
    let attenuation = if crypto_wf.is_empty() {
        None
    } else {
        Some(attenuation_ratio(&supply_wf, &crypto_wf)?)
    };

    let capture_sim_time = sim.state.time - capture_start;
    Ok(CaptureStats {
        mode,
        n_traces: req.n_traces,
        n_samples,
        sample_rate_hz: 1.0 / sample_dt,
        attenuation,
        crypto_peak_to_peak: crypto_wf.peak_to_peak(),
        supply_peak_to_peak: supply_wf.peak_to_peak(),
        mean_power_w: if capture_sim_time > 0.0 {
            energy / capture_sim_time
        } else {
            0.0
        },
        final_n_on: Some(sim.bank.n_on),
        final_v_aes: Some(sim.state.v_aes),
        final_region: Some(sim.bank.region),
        vlb: vlb_phases,
        settle_sim_time: settle_end,
        capture_sim_time,
    })
}

/// Apply a supply-drop injection and drive the loop until it either finds a
/// stable footing or the recovery budget runs out.
///
/// Stability is judged over a trailing five-cycle window: the node must stay
/// above the brown-out voltage and the controller must have stopped moving
/// (on-count range of at most one slice).
fn await_recovery(
    sim: &mut LoopSim,
    cfg: &ExperimentConfig,
    injection: VlbInjection,
    rng: &mut CounterRng,
) -> Result<VlbPhases, SimError> {
    let drop_done = injection.drop_complete_time();
    sim.injection = Some(injection);

    const WINDOW: usize = 5;
    let mut droop_min = sim.state.v_aes;
    let mut history: Vec<(f64, u32)> = Vec::with_capacity(RECOVERY_SMC_CYCLES);
    let mut recovery_time = None;
    let mut stable_extra = 0u32;
    for _ in 0..RECOVERY_SMC_CYCLES {
        run_settle_cycles(sim, cfg, rng, 1)?;
        droop_min = droop_min.min(sim.state.v_aes);
        history.push((sim.state.v_aes, sim.bank.n_on));
        let stable = sim.state.time > drop_done && trailing_stable(&history, WINDOW, cfg);
        if stable {
            if recovery_time.is_none() {
                recovery_time = Some(sim.state.time - drop_done);
            }
            stable_extra += 1;
            if stable_extra >= 3 {
                break;
            }
        } else {
            stable_extra = 0;
            recovery_time = None;
        }
    }
    let stabilized = trailing_stable(&history, WINDOW, cfg);
    let brown_out = !stabilized || sim.state.v_aes < cfg.device.v_brownout;
    Ok(VlbPhases {
        droop_min_v: droop_min,
        recovery_time,
        stabilized,
        brown_out,
        n_on_after: sim.bank.n_on,
        region_after: sim.bank.region,
        n_required: 0,
    })
}

fn trailing_stable(history: &[(f64, u32)], window: usize, cfg: &ExperimentConfig) -> bool {
    if history.len() < window {
        return false;
    }
    let tail = &history[history.len() - window..];
    let v_ok = tail.iter().all(|(v, _)| *v >= cfg.device.v_brownout);
    let n_lo = tail.iter().map(|(_, n)| *n).min().unwrap();
    let n_hi = tail.iter().map(|(_, n)| *n).max().unwrap();
    v_ok && n_hi - n_lo <= 1
}

/// Play a supply drop against the regulated loop without any feasibility
/// pre-check, reporting whether the loop finds a stable footing or the engine
/// browns out. Exists so resource-exhausted drops can be observed end to end.
pub fn run_vlb_recovery(
    cfg: &ExperimentConfig,
    vdd_drop: f64,
    seed: u64,
) -> Result<VlbPhases, SimError> {
    let mut sim = LoopSim::new(cfg, true)?;
    let master = CounterRng::new(seed);
    let mut settle_rng = master.split(STREAM_SETTLE);

    run_settle_cycles(&mut sim, cfg, &mut settle_rng, SETTLE_SMC_CYCLES)?;
    let injection = VlbInjection::new(cfg.device.vdd, vdd_drop, cfg.attack.ramp, sim.state.time)?;
    await_recovery(&mut sim, cfg, injection, &mut settle_rng)
}
