//! Signature-attenuating power delivery: bias ladder, slice bank, node
//! integration, switched-mode control, and the supply-drop attack primitives.

pub mod ladder;
pub mod mos;
pub mod sim;

pub use ladder::{nand_bias_voltage, stage_impedance, NandLadderConfig, NANDS_PER_STAGE};
pub use mos::{
    classify_region, linear_region_current, pmos_slice_current, saturation_current,
    square_law_output_conductance, Region,
};
pub use sim::{
    attenuation_ratio, smc_step, step_pdn, vlb_feasible, AttenuationRatio, CsSliceBank, PdnState,
    SmcConfig, VlbFeasibility, VlbInjection, G_OUT_CASCODED, G_OUT_DEGENERATED,
};
