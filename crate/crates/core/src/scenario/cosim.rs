//! Detector co-simulation: the regulated delivery loop, the encryption
//! engine, and the drop detector share one timeline. The detector samples
//! cycle-averaged voltages, the gate stops issuing encryptions the moment the
//! flag latches, and the report relates encryptions-before-halt to the trace
//! budget a disclosure would need.

use crate::aes::{encrypt, ROUNDS};
use crate::config::ExperimentConfig;
use crate::detector::{detector_step, DetectorState, EncryptionGate};
use crate::error::SimError;
use crate::pdn::VlbInjection;
use crate::rng::CounterRng;

use super::{crypto_samples_for, run_settle_cycles, LoopSim};

/// One comparator window in the counter log.
#[derive(Debug, Clone, Copy)]
pub struct WindowRecord {
    pub time: f64,
    pub count_vdd: u64,
    pub count_vaes: u64,
    pub flagged: bool,
}

#[derive(Debug, Clone)]
pub struct CosimReport {
    /// Simulated time of the flag, if raised.
    pub detection_sim_time: Option<f64>,
    /// Latency from drop completion to the flag.
    pub detection_latency: Option<f64>,
    pub flagged_counts: Option<(u64, u64)>,
    /// Encryptions completed between drop start and the halt (or run end).
    pub encryptions_before_halt: u64,
    /// Same, as a fraction of the disclosure trace budget.
    pub fraction_of_budget: f64,
    pub mtd_budget: u64,
    pub droop_min_v: f64,
    pub windows: Vec<WindowRecord>,
    /// Whether the flag rose with no drop applied.
    pub false_positive: bool,
}

/// Run the protected loop with the detector attached; apply a supply drop of
/// `vdd_drop` volts (zero means no attack) once the loop has settled, and
/// observe for `observe_windows` comparator windows.
pub fn run_detector_cosim(
    cfg: &ExperimentConfig,
    vdd_drop: f64,
    ramp: f64,
    seed: u64,
    observe_windows: u32,
) -> Result<CosimReport, SimError> {
    let spr = cfg.leakage.samples_per_round as usize;
    let mut sim = LoopSim::new(cfg, true)?;
    let master = CounterRng::new(seed);
    let mut settle_rng = master.split(0x5e);
    let mut pt_rng = master.split(0x51);
    let mut noise_rng = master.split(0x52);

    // Let the loop find its operating point before arming the detector;
    // power-up itself would otherwise read as a drop.
    run_settle_cycles(&mut sim, cfg, &mut settle_rng, 100)?;

    let injection = if vdd_drop > 0.0 {
        Some(VlbInjection::new(
            cfg.device.vdd,
            vdd_drop,
            ramp,
            sim.state.time,
        )?)
    } else {
        None
    };
    let drop_done = injection.map(|i| i.drop_complete_time());
    sim.injection = injection;

    let det_cfg = &cfg.detector;
    let substeps_per_det_cycle =
        ((1.0 / det_cfg.detector_clock_hz / sim.dt).round() as u64).max(1);
    let mut det_state = DetectorState::new();
    let mut gate = EncryptionGate::new();

    let total_cycles = u64::from(observe_windows) * u64::from(det_cfg.time_to_count);
    let mut windows = Vec::new();
    let mut droop_min = sim.state.v_aes;
    let mut encryptions_completed = 0u64;
    let mut detection_sim_time = None;
    let mut flagged_counts = None;

    let mut crypto = Vec::with_capacity(ROUNDS * spr);
    let mut cycle_v_sum = 0.0f64;
    let mut cycle_substeps = 0u64;
    let mut cycles_done = 0u64;

    while cycles_done < total_cycles {
        // One engine activity block: an encryption when the gate and the node
        // allow it, otherwise an idle stretch of the same length.
        let running = gate.may_start_encryption() && sim.engine_running(cfg.device.v_brownout);
        if running {
            let mut pt = [0u8; 16];
            pt_rng.fill_bytes(&mut pt);
            let enc = encrypt(&cfg.attack.key, &pt);
            crypto_samples_for(&enc, cfg, &mut noise_rng, &mut crypto);
        } else {
            crypto.clear();
            crypto.resize(ROUNDS * spr, cfg.leakage.baseline_current);
        }

        let substeps = sim.substeps_per_sample;
        for &i_crypto in crypto.iter() {
            for _ in 0..substeps {
                sim.advance(i_crypto)?;
                droop_min = droop_min.min(sim.state.v_aes);
                cycle_v_sum += sim.state.v_aes;
                cycle_substeps += 1;

                if cycle_substeps == substeps_per_det_cycle {
                    let v_aes_avg = cycle_v_sum / cycle_substeps as f64;
                    cycle_v_sum = 0.0;
                    cycle_substeps = 0;
                    let flag_before = det_state.attack_flag;
                    let compares_now = det_state.cycles_elapsed + 1 >= det_cfg.time_to_count;
                    detector_step(&mut det_state, det_cfg, sim.state.v_dd, v_aes_avg);
                    if compares_now {
                        let (c_vdd, c_vaes) = det_state.last_window_counts.unwrap_or((0, 0));
                        windows.push(WindowRecord {
                            time: sim.state.time,
                            count_vdd: c_vdd,
                            count_vaes: c_vaes,
                            flagged: det_state.attack_flag && !flag_before,
                        });
                    }
                    if det_state.attack_flag && !flag_before {
                        detection_sim_time = Some(sim.state.time);
                        flagged_counts = det_state.flagged_counts;
                    }
                    gate.observe_flag(det_state.attack_flag);
                    cycles_done += 1;
                }
            }
        }
        // The block ran to completion: tally the encryption.
        if running {
            encryptions_completed += 1;
        }
    }

    let detection_latency = match (detection_sim_time, drop_done) {
        (Some(t), Some(d)) => Some((t - d).max(0.0)),
        _ => None,
    };
    let budget = cfg.attack.mtd_budget.max(1);
    Ok(CosimReport {
        detection_sim_time,
        detection_latency,
        flagged_counts,
        encryptions_before_halt: encryptions_completed,
        fraction_of_budget: encryptions_completed as f64 / budget as f64,
        mtd_budget: cfg.attack.mtd_budget,
        droop_min_v: droop_min,
        windows,
        false_positive: vdd_drop == 0.0 && detection_sim_time.is_some(),
    })
}

/// Detection probability over seeds for each threshold in the sweep.
pub fn threshold_sweep(
    cfg: &ExperimentConfig,
    thresholds: &[u64],
    vdd_drop: f64,
    ramp: f64,
    seeds: &[u64],
) -> Result<Vec<(u64, f64)>, SimError> {
    let mut out = Vec::with_capacity(thresholds.len());
    for &threshold in thresholds {
        let mut swept = cfg.clone();
        swept.detector.diff_threshold = threshold;
        let mut detected = 0usize;
        for &seed in seeds {
            let report = run_detector_cosim(&swept, vdd_drop, ramp, seed, 40)?;
            if report.detection_sim_time.is_some() {
                detected += 1;
            }
        }
        out.push((threshold, detected as f64 / seeds.len() as f64));
    }
    Ok(out)
}
