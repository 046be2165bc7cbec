//! Prints the operating-point numbers of the default configuration: per-mode
//! attenuation, attack trace counts, leakage-assessment onsets, and detector
//! behavior. Used to sanity-check the defaults.

use attenlab::config::ExperimentConfig;
use attenlab::sca::{cpa_attack, tvla, AttackOptions};
use attenlab::scenario::cosim::run_detector_cosim;
use attenlab::scenario::{split_interleaved, CaptureRequest, ScenarioRegistry};
use attenlab::aes::last_round_key;

fn main() {
    let cfg = ExperimentConfig::default();
    let reg = ScenarioRegistry::with_builtins();
    let correct = last_round_key(&cfg.attack.key)[0];

    println!("== capture stats (2000 traces each) ==");
    for mode in ["unprotected", "protected", "degenerated", "vlb"] {
        let req = CaptureRequest::random(2000, 42);
        let (power, _em, stats) = reg.get(mode).unwrap().capture_sets(&cfg, &req).unwrap();
        println!(
            "{mode:>12}: atten={} pkpk_crypto={:.3e} pkpk_supply={:.3e} n_on={:?} region={:?} power={:.2}uW",
            stats.attenuation.unwrap(),
            stats.crypto_peak_to_peak,
            stats.supply_peak_to_peak,
            stats.final_n_on,
            stats.final_region,
            stats.mean_power_w * 1e6,
        );
        if let Some(v) = &stats.vlb {
            println!(
                "              vlb: droop={:.3} rec={:?} n_req={} n_after={}",
                v.droop_min_v, v.recovery_time, v.n_required, v.n_on_after
            );
        }

        // CPA on this mode.
        let res = cpa_attack(
            &power,
            &AttackOptions {
                target_byte: 0,
                averaging: 1,
                known_key_byte: Some(correct),
            },
        )
        .unwrap();
        let first0 = res
            .mtd_curve
            .iter()
            .find(|p| p.correct_rank == Some(0))
            .map(|p| p.trace_count);
        println!(
            "              cpa: rank={:?} best_corr={:.4} first_rank0={:?}",
            res.key_rank, res.best_correlation, first0
        );
    }

    println!("== cpa/cema trace requirements (60000 traces) ==");
    for mode in ["unprotected", "vlb"] {
        let req = CaptureRequest::random(60000, 7);
        let (power, em, _) = reg.get(mode).unwrap().capture_sets(&cfg, &req).unwrap();
        for (name, set) in [("cpa", &power), ("cema", &em)] {
            let res = cpa_attack(
                set,
                &AttackOptions {
                    target_byte: 0,
                    averaging: 1,
                    known_key_byte: Some(correct),
                },
            )
            .unwrap();
            let curve: Vec<(usize, Option<u16>)> = res
                .mtd_curve
                .iter()
                .map(|p| (p.trace_count, p.correct_rank))
                .collect();
            let first0 = res
                .mtd_curve
                .iter()
                .find(|p| p.correct_rank == Some(0))
                .map(|p| p.trace_count);
            println!("{mode:>12}/{name}: rank={:?} first_rank0={:?}", res.key_rank, first0);
            println!("              curve: {curve:?}");
        }
    }

    println!("== tvla (interleaved capture) ==");
    for mode in ["unprotected", "protected", "vlb"] {
        let n = if mode == "protected" { 50000 } else { 5000 };
        let req = CaptureRequest::interleaved(n, 101, [0u8; 16]);
        let m = reg.get(mode).unwrap();
        let (power, _, _) = m.capture_sets(&cfg, &req).unwrap();
        let (fixed, random) = split_interleaved(&power);
        let res = tvla(&fixed, &random).unwrap();
        println!(
            "{mode:>12}: max|t|={:.2} first_leaky={:?}",
            res.max_abs_t, res.first_leaky_trace_count
        );
    }

    println!("== detector ==");
    let rep = run_detector_cosim(&cfg, cfg.attack.vdd_drop, cfg.attack.ramp, 3, 60).unwrap();
    println!(
        "latency={:?} counts={:?} droop={:.3} enc_before_halt={} frac={:.4}%",
        rep.detection_latency,
        rep.flagged_counts,
        rep.droop_min_v,
        rep.encryptions_before_halt,
        rep.fraction_of_budget * 100.0
    );
    for w in rep.windows.iter().take(12) {
        println!(
            "  t={:.4} c_vdd={} c_vaes={} flag={}",
            w.time, w.count_vdd, w.count_vaes, w.flagged
        );
    }
}
