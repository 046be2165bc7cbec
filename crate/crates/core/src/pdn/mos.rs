//! Square-law PMOS device model for the current-source slices.
//!
//! Standard factor convention: saturation current (K/2)*v_ov^2, linear-region
//! current K*(v_ov - v_sd/2)*v_sd, which makes the two expressions meet
//! exactly at v_sd = v_ov. Channel-length modulation is not modeled at the
//! device level; the bank adds a behavioral output conductance per topology.

/// Operating region of a slice (shared by all on-slices of a bank, since the
/// slices are identical parallel devices seeing the same terminals).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Cutoff,
    Linear,
    Saturation,
}

/// Region for given source-gate drive and source-drain drop.
pub fn classify_region(v_sg: f64, v_sd: f64, v_t: f64) -> Region {
    let v_ov = v_sg - v_t;
    if v_ov <= 0.0 {
        Region::Cutoff
    } else if v_sd < v_ov {
        Region::Linear
    } else {
        Region::Saturation
    }
}

pub fn saturation_current(k: f64, v_ov: f64) -> f64 {
    0.5 * k * v_ov * v_ov
}

pub fn linear_region_current(k: f64, v_ov: f64, v_sd: f64) -> f64 {
    k * (v_ov - 0.5 * v_sd) * v_sd
}

/// Drain current of one PMOS slice device.
pub fn pmos_slice_current(v_sg: f64, v_sd: f64, k: f64, v_t: f64) -> f64 {
    let v_ov = v_sg - v_t;
    match classify_region(v_sg, v_sd, v_t) {
        Region::Cutoff => 0.0,
        Region::Linear => linear_region_current(k, v_ov, v_sd),
        Region::Saturation => saturation_current(k, v_ov),
    }
}

/// d(I)/d(v_sd) of the square-law expression, used for analysis and tests.
pub fn square_law_output_conductance(v_sg: f64, v_sd: f64, k: f64, v_t: f64) -> f64 {
    match classify_region(v_sg, v_sd, v_t) {
        Region::Linear => k * (v_sg - v_t - v_sd),
        _ => 0.0,
    }
}
