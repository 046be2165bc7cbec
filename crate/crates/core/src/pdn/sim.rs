//! Time-stepped power-delivery simulation.
//!
//! Two-node behavioral model: the slice bank sources current from the global
//! supply into the internal node, the crypto engine and the oscillator bleed
//! path sink from it, and the node capacitance integrates the difference.
//! The attacker's observable is the bank current, never the node voltage.

use super::ladder::{nand_bias_voltage, NandLadderConfig};
use super::mos::{classify_region, pmos_slice_current, Region};
use crate::error::SimError;
use crate::leakage::CurrentWaveform;

/// Bank of identical current-source slices. All on-slices share terminal
/// voltages, so region tracking is per bank.
#[derive(Debug, Clone)]
pub struct CsSliceBank {
    pub n_max: u32,
    pub n_on: u32,
    /// MOS device constant, A/V^2.
    pub k_device: f64,
    /// Threshold magnitude, volts.
    pub v_t: f64,
    /// Gate bias of the top device (from the NAND ladder tap). Tracks the
    /// supply ratiometrically; refresh via [`CsSliceBank::refresh_bias`].
    pub v_bias_top: f64,
    /// Gate bias of the bottom device: half the supply, from the
    /// self-connected inverter.
    pub v_bias_bottom: f64,
    pub region: Region,
    /// True for the stacked (cascoded) topology; false bypasses the top
    /// device, leaving the source-degenerated single-device structure.
    pub cascoded: bool,
    /// Behavioral output conductance of one slice in its current topology,
    /// siemens. Stands in for everything that makes a real current source
    /// imperfect; the stacked topology earns a much smaller value.
    pub g_out_slice: f64,
    /// Tap ratio of the bias ladder (v_bias_top / v_dd).
    pub bias_ratio: f64,
}

/// Default per-slice output conductance of the stacked topology.
pub const G_OUT_CASCODED: f64 = 0.3e-6;
/// Default per-slice output conductance with the top device bypassed.
pub const G_OUT_DEGENERATED: f64 = 6.0e-6;

impl Default for CsSliceBank {
    fn default() -> Self {
        let ladder = NandLadderConfig::default();
        let v_bias = nand_bias_voltage(&ladder).expect("default ladder is valid");
        CsSliceBank {
            n_max: 96,
            n_on: 0,
            k_device: 920e-6,
            v_t: 0.2,
            v_bias_top: v_bias,
            v_bias_bottom: ladder.vdd / 2.0,
            region: Region::Cutoff,
            cascoded: true,
            g_out_slice: G_OUT_CASCODED,
            bias_ratio: v_bias / ladder.vdd,
        }
    }
}

impl CsSliceBank {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.n_on > self.n_max {
            return Err(SimError::InvalidParameter(format!(
                "n_on {} exceeds n_max {}",
                self.n_on, self.n_max
            )));
        }
        if !(self.v_t > 0.0) {
            return Err(SimError::InvalidParameter("v_t must be positive".into()));
        }
        if !(self.k_device > 0.0) {
            return Err(SimError::InvalidParameter("k_device must be positive".into()));
        }
        Ok(())
    }

    /// Rebias the ladder tap and the half-rail inverter for the present
    /// supply. Both generators are ratiometric in the supply.
    pub fn refresh_bias(&mut self, v_dd: f64) {
        self.v_bias_top = self.bias_ratio * v_dd;
        self.v_bias_bottom = v_dd / 2.0;
    }

    /// Gate drive of the current-limiting device.
    pub fn effective_v_sg(&self, v_dd: f64) -> f64 {
        if self.cascoded {
            v_dd - self.v_bias_top
        } else {
            v_dd - self.v_bias_bottom
        }
    }

    /// Current of one slice at the given terminals.
    pub fn slice_current(&self, v_dd: f64, v_aes: f64) -> f64 {
        let v_sg = self.effective_v_sg(v_dd);
        let v_sd = (v_dd - v_aes).max(0.0);
        if classify_region(v_sg, v_sd, self.v_t) == Region::Cutoff {
            return 0.0;
        }
        pmos_slice_current(v_sg, v_sd, self.k_device, self.v_t) + self.g_out_slice * v_sd
    }

    /// Total bank current: the attacker's observable.
    pub fn total_current(&self, v_dd: f64, v_aes: f64) -> f64 {
        f64::from(self.n_on) * self.slice_current(v_dd, v_aes)
    }

    pub fn update_region(&mut self, v_dd: f64, v_aes: f64) {
        let v_sg = self.effective_v_sg(v_dd);
        let v_sd = (v_dd - v_aes).max(0.0);
        self.region = classify_region(v_sg, v_sd, self.v_t);
    }
}

/// Instantaneous state of the delivery network.
#[derive(Debug, Clone)]
pub struct PdnState {
    /// Global supply. The attacker's knob.
    pub v_dd: f64,
    /// Internal node feeding the crypto engine.
    pub v_aes: f64,
    pub c_load: f64,
    pub c_decap: f64,
    /// Bleed sink current at the last step.
    pub bleed_current: f64,
    /// Divided oscillator edges accumulated in the running controller period.
    pub smc_counter: u64,
    /// Raw oscillator phase for the same period (edges before division).
    pub ro_phase: f64,
    pub time: f64,
}

impl PdnState {
    pub fn new(v_dd: f64) -> Self {
        PdnState {
            v_dd,
            v_aes: 0.0,
            c_load: 150e-12,
            c_decap: 30e-12,
            bleed_current: 0.0,
            smc_counter: 0,
            ro_phase: 0.0,
            time: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.c_load > 0.0) || !(self.c_decap > 0.0) {
            return Err(SimError::InvalidParameter("capacitances must be positive".into()));
        }
        if self.v_aes < 0.0 || self.v_aes > self.v_dd {
            return Err(SimError::InvalidParameter(format!(
                "v_aes {} outside [0, v_dd = {}]",
                self.v_aes, self.v_dd
            )));
        }
        Ok(())
    }
}

/// Switched-mode controller and oscillator-bleed parameters. The bleed ring
/// oscillator doubles as the controller's voltage-to-frequency sensor.
#[derive(Debug, Clone)]
pub struct SmcConfig {
    pub smc_clock_hz: f64,
    /// Linearized oscillator gain, hertz per volt.
    pub ro_freq_per_volt: f64,
    pub ro_freq_offset: f64,
    pub divider_ratio: u32,
    pub target_count: u64,
    /// Dead band around the target, in counts.
    pub hysteresis: u64,
    /// Conductance of the oscillator bleed path, siemens.
    pub bleed_conductance: f64,
}

impl Default for SmcConfig {
    fn default() -> Self {
        // One divided count resolves 12.8 mV; target 63 +/- 2 holds the node
        // in [0.781, 0.845) V.
        SmcConfig {
            smc_clock_hz: 10e3,
            ro_freq_per_volt: 50e6,
            ro_freq_offset: 0.0,
            divider_ratio: 64,
            target_count: 63,
            hysteresis: 2,
            bleed_conductance: 1.0e-3,
        }
    }
}

impl SmcConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.smc_clock_hz > 0.0) {
            return Err(SimError::InvalidParameter("smc clock must be positive".into()));
        }
        if self.divider_ratio < 1 {
            return Err(SimError::InvalidParameter("divider_ratio must be >= 1".into()));
        }
        if self.bleed_conductance < 0.0 {
            return Err(SimError::InvalidParameter("bleed conductance must be >= 0".into()));
        }
        Ok(())
    }

    pub fn ro_frequency(&self, v: f64) -> f64 {
        (self.ro_freq_per_volt * v + self.ro_freq_offset).max(0.0)
    }
}

/// Advance the node one step. Returns the supply current drawn through the
/// slice bank during the step.
pub fn step_pdn(
    state: &mut PdnState,
    bank: &mut CsSliceBank,
    smc: &SmcConfig,
    i_crypto: f64,
    dt: f64,
) -> Result<f64, SimError> {
    debug_assert!(dt > 0.0);
    bank.refresh_bias(state.v_dd);
    bank.update_region(state.v_dd, state.v_aes);

    let supply_current = bank.total_current(state.v_dd, state.v_aes);
    let bleed = smc.bleed_conductance * state.v_aes;
    let c_total = state.c_load + state.c_decap;
    let dv = (supply_current - i_crypto - bleed) / c_total * dt;

    if dv.abs() > state.v_dd / 2.0 {
        return Err(SimError::StepTooCoarse {
            dv: dv.abs(),
            limit: state.v_dd / 2.0,
            time: state.time,
        });
    }

    state.v_aes = (state.v_aes + dv).clamp(0.0, state.v_dd);
    state.bleed_current = bleed;
    state.ro_phase += smc.ro_frequency(state.v_aes) * dt;
    state.smc_counter = (state.ro_phase / f64::from(smc.divider_ratio)) as u64;
    state.time += dt;
    Ok(supply_current)
}

/// Controller decision at the end of one controller period: compare the
/// accumulated divided count against the target band and switch one slice,
/// then restart the count. Returns the new on-count.
pub fn smc_step(state: &mut PdnState, bank: &mut CsSliceBank, smc: &SmcConfig) -> u32 {
    let count = state.smc_counter;
    if count < smc.target_count.saturating_sub(smc.hysteresis) {
        bank.n_on = (bank.n_on + 1).min(bank.n_max);
    } else if count > smc.target_count + smc.hysteresis {
        bank.n_on = bank.n_on.saturating_sub(1);
    }
    state.ro_phase = 0.0;
    state.smc_counter = 0;
    bank.n_on
}

/// Signature suppression achieved between the crypto draw and its supply-side
/// image, as a mean-subtracted RMS ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AttenuationRatio {
    Finite(f64),
    /// The supply carried no data-dependent component at all.
    Infinite,
}

impl AttenuationRatio {
    pub fn as_finite(&self) -> Option<f64> {
        match self {
            AttenuationRatio::Finite(v) => Some(*v),
            AttenuationRatio::Infinite => None,
        }
    }
}

impl std::fmt::Display for AttenuationRatio {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AttenuationRatio::Finite(v) => write!(f, "{v:.2}"),
            AttenuationRatio::Infinite => write!(f, "inf"),
        }
    }
}

pub fn attenuation_ratio(
    supply: &CurrentWaveform,
    crypto: &CurrentWaveform,
) -> Result<AttenuationRatio, SimError> {
    if supply.samples.len() != crypto.samples.len() {
        return Err(SimError::LengthMismatch {
            left: supply.samples.len(),
            right: crypto.samples.len(),
        });
    }
    if (supply.dt - crypto.dt).abs() > 1e-15 * supply.dt.abs().max(crypto.dt.abs()) {
        return Err(SimError::DtMismatch {
            left: supply.dt,
            right: crypto.dt,
        });
    }
    let supply_rms = supply.ac_rms();
    if supply_rms == 0.0 {
        return Ok(AttenuationRatio::Infinite);
    }
    Ok(AttenuationRatio::Finite(crypto.ac_rms() / supply_rms))
}

/// Outcome of the linear-region resource check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VlbFeasibility {
    pub n_required: u32,
    pub feasible: bool,
}

/// Closed-form slice count needed to carry `i_demand_avg` with every slice in
/// the linear region at the given terminals. The attack only works when that
/// count fits the bank.
pub fn vlb_feasible(
    i_demand_avg: f64,
    k: f64,
    v_t: f64,
    v_gs: f64,
    v_ds: f64,
    n_max: u32,
) -> Result<VlbFeasibility, SimError> {
    if !(k > 0.0) || !(v_t > 0.0) || !(v_gs > 0.0) || !(v_ds > 0.0) {
        return Err(SimError::InvalidParameter(
            "k, v_t, v_gs, v_ds must all be positive".into(),
        ));
    }
    if i_demand_avg < 0.0 {
        return Err(SimError::InvalidParameter("current demand must be >= 0".into()));
    }
    let v_ov = v_gs - v_t;
    if v_ds >= v_ov {
        return Err(SimError::NotLinearRegion { v_ds, v_ov });
    }
    let per_slice = k * (v_ov - 0.5 * v_ds) * v_ds;
    let n_required = (i_demand_avg / per_slice).ceil() as u32;
    Ok(VlbFeasibility {
        n_required,
        feasible: n_required <= n_max,
    })
}

/// A supply-drop injection: the global rail ramps down linearly over `ramp`
/// seconds starting at `start`, by `drop` volts.
#[derive(Debug, Clone, Copy)]
pub struct VlbInjection {
    pub start: f64,
    pub drop: f64,
    pub ramp: f64,
    pub vdd_nominal: f64,
}

impl VlbInjection {
    pub fn new(vdd_nominal: f64, drop: f64, ramp: f64, start: f64) -> Result<Self, SimError> {
        if drop < 0.0 || drop >= vdd_nominal {
            return Err(SimError::InvalidParameter(format!(
                "vdd drop {drop} outside [0, vdd = {vdd_nominal})"
            )));
        }
        if ramp < 0.0 {
            return Err(SimError::InvalidParameter("ramp must be >= 0".into()));
        }
        Ok(VlbInjection {
            start,
            drop,
            ramp,
            vdd_nominal,
        })
    }

    /// Supply value at time `t`.
    pub fn vdd_at(&self, t: f64) -> f64 {
        if self.drop == 0.0 || t <= self.start {
            return self.vdd_nominal;
        }
        if self.ramp <= 0.0 || t >= self.start + self.ramp {
            return self.vdd_nominal - self.drop;
        }
        let frac = (t - self.start) / self.ramp;
        self.vdd_nominal - self.drop * frac
    }

    pub fn drop_complete_time(&self) -> f64 {
        if self.drop == 0.0 {
            f64::INFINITY
        } else {
            self.start + self.ramp
        }
    }
}
