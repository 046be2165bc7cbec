//! Bias generation by the three-stage NAND ladder.
//!
//! Each stage is 16 gates in parallel between two rail nodes; a self-connected
//! gate contributes its on-resistance, the rest contribute off-resistance.
//! The top-device bias is the tap above the middle stage of the resulting
//! three-element divider.

use crate::error::SimError;

pub const NANDS_PER_STAGE: u32 = 16;

#[derive(Debug, Clone)]
pub struct NandLadderConfig {
    /// Self-connected gate counts: bottom, middle, top stage.
    pub p: u32,
    pub q: u32,
    pub r: u32,
    /// Resistance of one self-connected gate, ohms.
    pub r_on: f64,
    /// Resistance of one off gate, ohms.
    pub r_off: f64,
    pub vdd: f64,
}

impl Default for NandLadderConfig {
    fn default() -> Self {
        // (4, 4, 3) at this on/off ratio puts the tap at 0.721 V from 1.2 V.
        NandLadderConfig {
            p: 4,
            q: 4,
            r: 3,
            r_on: 1.0e3,
            r_off: 3.0e5,
            vdd: 1.2,
        }
    }
}

impl NandLadderConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        for (name, count) in [("p", self.p), ("q", self.q), ("r", self.r)] {
            if count > NANDS_PER_STAGE {
                return Err(SimError::InvalidParameter(format!(
                    "stage count {name} = {count} outside 0..=16"
                )));
            }
        }
        if !(self.r_on > 0.0) || !(self.r_off > self.r_on) {
            return Err(SimError::InvalidParameter(
                "need r_off > r_on > 0".into(),
            ));
        }
        if !(self.vdd > 0.0) {
            return Err(SimError::InvalidParameter("vdd must be positive".into()));
        }
        Ok(())
    }
}

/// Impedance of one stage: on-gates in parallel with off-gates. A stage with
/// zero self-connected gates is all off-gates in parallel.
pub fn stage_impedance(on_count: u32, r_on: f64, r_off: f64) -> f64 {
    let off_count = NANDS_PER_STAGE - on_count;
    let g_on = f64::from(on_count) / r_on;
    let g_off = f64::from(off_count) / r_off;
    1.0 / (g_on + g_off)
}

/// Tap voltage of the ladder:
/// `VDD * (Z_bottom + Z_mid) / (Z_bottom + Z_mid + Z_top)`.
pub fn nand_bias_voltage(cfg: &NandLadderConfig) -> Result<f64, SimError> {
    cfg.validate()?;
    let z_bottom = stage_impedance(cfg.p, cfg.r_on, cfg.r_off);
    let z_mid = stage_impedance(cfg.q, cfg.r_on, cfg.r_off);
    let z_top = stage_impedance(cfg.r, cfg.r_on, cfg.r_off);
    Ok(cfg.vdd * (z_bottom + z_mid) / (z_bottom + z_mid + z_top))
}
