//! Acceptance suite: one test per release criterion, each printing a
//! `[acceptance] criterion N` line with its verdict. Run with
//! `cargo test --test acceptance -- --nocapture` to see every line.
//!
//! Real-chip disclosure counts are not reproducible at desk scale; the
//! criteria here pin desk-scale thresholds, orderings, and oracle
//! equivalences instead.

use std::process::Command;
use std::time::Instant;

use attenlab::aes::{
    decrypt_block, encrypt, last_round_key, AesKey256, BLOCK_LEN, KEY_LEN, ROUNDS,
};
use attenlab::config::ExperimentConfig;
use attenlab::detector::{comparator_flags, detector_step, DetectorConfig, DetectorState};
use attenlab::pdn::{
    linear_region_current, nand_bias_voltage, saturation_current, step_pdn,
    vlb_feasible, CsSliceBank, NandLadderConfig, PdnState, Region, SmcConfig,
};
use attenlab::rng::CounterRng;
use attenlab::sca::{
    cema_attack, cpa_attack, estimate_mtd, fft_forward, fft_inverse, pearson_two_pass, tvla,
    AttackOptions, Complex, CpaStream, MtdEstimate, TraceSet,
};
use attenlab::scenario::cosim::run_detector_cosim;
use attenlab::scenario::{
    run_vlb_recovery, split_interleaved, CaptureRequest, ScenarioRegistry, TraceSink,
};

/// Collects sub-check results for one criterion and prints its verdict line.
struct Criterion {
    number: u32,
    name: &'static str,
    failures: Vec<String>,
    checks: usize,
    started: Instant,
}

impl Criterion {
    fn new(number: u32, name: &'static str) -> Self {
        Criterion {
            number,
            name,
            failures: Vec::new(),
            checks: 0,
            started: Instant::now(),
        }
    }

    fn check(&mut self, label: &str, ok: bool, detail: String) {
        self.checks += 1;
        if !ok {
            self.failures.push(format!("{label}: {detail}"));
        }
    }

    fn finish(self) {
        let verdict = if self.failures.is_empty() { "PASS" } else { "FAIL" };
        println!(
            "[acceptance] criterion {:>2} ({}): {} ({} checks, {:.1}s)",
            self.number,
            self.name,
            verdict,
            self.checks,
            self.started.elapsed().as_secs_f64()
        );
        for f in &self.failures {
            println!("    failed -> {f}");
        }
        assert!(
            self.failures.is_empty(),
            "criterion {} ({}) failed: {:?}",
            self.number,
            self.name,
            self.failures
        );
    }
}

fn default_key_byte(cfg: &ExperimentConfig, byte: usize) -> u8 {
    last_round_key(&cfg.attack.key)[byte]
}

// ---------------------------------------------------------------------------

#[test]
fn criterion_01_aes_correctness() {
    let mut c = Criterion::new(1, "AES-256 correctness");
    let started = Instant::now();

    let key = {
        let mut k = [0u8; KEY_LEN];
        for (i, b) in k.iter_mut().enumerate() {
            *b = i as u8;
        }
        AesKey256(k)
    };
    let mut pt = [0u8; BLOCK_LEN];
    for (i, b) in pt.iter_mut().enumerate() {
        *b = (i as u8) * 0x11;
    }
    let expected: [u8; 16] = [
        0x8e, 0xa2, 0xb7, 0xca, 0x51, 0x67, 0x45, 0xbf, 0xea, 0xfc, 0x49, 0x90, 0x4b, 0x49, 0x60,
        0x89,
    ];
    let trace = encrypt(&key, &pt);
    c.check(
        "reference vector",
        trace.ciphertext == expected,
        format!("got {:02x?}", trace.ciphertext),
    );

    let mut rng = CounterRng::new(0xc1);
    let mut all_ok = true;
    for _ in 0..10_000 {
        let mut k = [0u8; KEY_LEN];
        rng.fill_bytes(&mut k);
        let key = AesKey256(k);
        let mut pt = [0u8; BLOCK_LEN];
        rng.fill_bytes(&mut pt);
        let enc = encrypt(&key, &pt);
        if decrypt_block(&key, &enc.ciphertext) != pt || enc.round_states.len() != ROUNDS + 1 {
            all_ok = false;
            break;
        }
    }
    c.check("10^4 round trips", all_ok, "a round trip failed".into());

    let elapsed = started.elapsed().as_secs_f64();
    c.check("runtime < 5 s", elapsed < 5.0, format!("{elapsed:.2}s"));
    c.finish();
}

#[test]
fn criterion_02_bias_ladder_oracle() {
    let mut c = Criterion::new(2, "bias-ladder oracle equivalence and range");

    // Independent oracle: direct nodal analysis of the two internal nodes.
    let nodal = |cfg: &NandLadderConfig| -> f64 {
        let g = |on: u32| f64::from(on) / cfg.r_on + f64::from(16 - on) / cfg.r_off;
        let (gb, gm, gt) = (g(cfg.p), g(cfg.q), g(cfg.r));
        let a11 = gb + gm;
        let a12 = -gm;
        let a21 = -gm;
        let a22 = gm + gt;
        let det = a11 * a22 - a12 * a21;
        (a11 * (gt * cfg.vdd)) / det
    };

    let mut rng = CounterRng::new(0xeb1a5);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let r_on = 100.0 * (1.0 + 50.0 * rng.next_unit_open());
        let cfg = NandLadderConfig {
            p: (rng.next_u64() % 17) as u32,
            q: (rng.next_u64() % 17) as u32,
            r: (rng.next_u64() % 17) as u32,
            r_on,
            r_off: r_on * (2.0 + 1000.0 * rng.next_unit_open()),
            vdd: 0.5 + rng.next_unit_open(),
        };
        let v = nand_bias_voltage(&cfg).unwrap();
        let oracle = nodal(&cfg);
        worst = worst.max((v - oracle).abs() / oracle.abs().max(1.0));
    }
    c.check(
        "10^3 random configs vs nodal oracle, rel < 1e-10",
        worst < 1e-10,
        format!("worst rel err {worst:.3e}"),
    );

    // Calibrated sweep over the tuning knobs at the nominal rail.
    let base = NandLadderConfig::default();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for p in 1..=15 {
        for q in 1..=15 {
            for r in 1..=15 {
                let v = nand_bias_voltage(&NandLadderConfig {
                    p,
                    q,
                    r,
                    ..base.clone()
                })
                .unwrap();
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
    }
    c.check(
        "sweep high endpoint 1.15 V +/- 15 mV",
        (hi - 1.15).abs() <= 0.015,
        format!("high endpoint {hi:.4} V"),
    );
    // Known model limitation: the three-stage divider tap cannot reach
    // 110 mV. Its algebraic floor over this sweep is VDD*(2*rho+30)/
    // (17*rho+31) with rho = r_off/r_on, i.e. > 2/17 * VDD = 141 mV at any
    // calibration. The check is kept as specified and is expected to fail.
    c.check(
        "sweep low endpoint 110 mV +/- 15 mV",
        (lo - 0.110).abs() <= 0.015,
        format!("low endpoint {lo:.4} V (floor of the divider is 2/17 * VDD = 141 mV)"),
    );
    c.finish();
}

#[test]
fn criterion_03_mos_region_continuity() {
    let mut c = Criterion::new(3, "MOS model continuity at the region boundary");
    let mut rng = CounterRng::new(0x305);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let k = 1e-4 + 9e-3 * rng.next_unit_open();
        let v_ov = 0.02 + 0.7 * rng.next_unit_open();
        let gap = (linear_region_current(k, v_ov, v_ov) - saturation_current(k, v_ov)).abs();
        worst = worst.max(gap);
    }
    c.check(
        "|I_lin - I_sat| < 1e-12 A at v_sd = v_ov, 10^3 points",
        worst < 1e-12,
        format!("worst gap {worst:.3e} A"),
    );
    c.finish();
}

#[test]
fn criterion_04_attenuation_ordering() {
    let mut c = Criterion::new(4, "attenuation ordering across topologies");
    let started = Instant::now();
    let cfg = ExperimentConfig::default();
    let reg = ScenarioRegistry::with_builtins();
    let req = CaptureRequest::random(300, 4242);

    let atten = |mode: &str| -> f64 {
        let (_, _, stats) = reg.get(mode).unwrap().capture_sets(&cfg, &req).unwrap();
        stats
            .attenuation
            .unwrap()
            .as_finite()
            .expect("finite attenuation")
    };
    let cascoded = atten("protected");
    let degenerated = atten("degenerated");
    let vlb = atten("vlb");

    c.check(
        "attenuation(cascoded) > 100",
        cascoded > 100.0,
        format!("{cascoded:.1}"),
    );
    c.check(
        "cascoded / degenerated > 5",
        cascoded / degenerated > 5.0,
        format!("{cascoded:.1} / {degenerated:.1} = {:.2}", cascoded / degenerated),
    );
    c.check(
        "vlb < cascoded / 10",
        vlb < cascoded / 10.0,
        format!("vlb {vlb:.2} vs cascoded/10 {:.2}", cascoded / 10.0),
    );
    let elapsed = started.elapsed().as_secs_f64();
    c.check("runtime < 60 s", elapsed < 60.0, format!("{elapsed:.1}s"));
    c.finish();
}

#[test]
fn criterion_05_attack_pipeline() {
    let mut c = Criterion::new(5, "attack pipeline on unprotected captures");
    let started = Instant::now();
    let cfg = ExperimentConfig::default();
    let reg = ScenarioRegistry::with_builtins();
    let correct = default_key_byte(&cfg, 0);
    let opts = AttackOptions {
        target_byte: 0,
        averaging: 1,
        known_key_byte: Some(correct),
    };

    let mut recovered = 0;
    let mut cema_never_better = true;
    let mut detail = String::new();
    for seed in 0..5u64 {
        let req = CaptureRequest::random(10_000, 1000 + seed);
        let (power, em, _) = reg.get("unprotected").unwrap().capture_sets(&cfg, &req).unwrap();
        let cpa = cpa_attack(&power, &opts).unwrap();
        let cema = cema_attack(&em, &opts).unwrap();
        if cpa.key_rank == Some(0) {
            recovered += 1;
        }
        let cpa_mtd = cpa.disclosure_count().unwrap_or(usize::MAX);
        let cema_mtd = cema.disclosure_count().unwrap_or(usize::MAX);
        if cema_mtd < cpa_mtd {
            cema_never_better = false;
        }
        detail.push_str(&format!(
            "seed {seed}: cpa rank {:?} mtd {:?}, cema mtd {:?}; ",
            cpa.key_rank,
            cpa.disclosure_count(),
            cema.disclosure_count()
        ));
    }
    c.check(
        "CPA rank 0 at 10K traces in >= 4 of 5 repeats",
        recovered >= 4,
        format!("{recovered}/5 ({detail})"),
    );
    c.check(
        "CEMA needs at least as many traces as CPA in every paired run",
        cema_never_better,
        detail,
    );
    let elapsed = started.elapsed().as_secs_f64();
    c.check("runtime < 5 min", elapsed < 300.0, format!("{elapsed:.0}s"));
    c.finish();
}

/// Streams captured power traces straight into a correlation attack.
struct CpaSink {
    stream: CpaStream,
    buf_ct: Vec<[u8; 16]>,
    buf_samples: Vec<f64>,
    n_samples: usize,
}

impl CpaSink {
    fn new(n_samples: usize, known: u8, max_traces: usize) -> Self {
        CpaSink {
            stream: CpaStream::new(n_samples, 0, Some(known), max_traces).unwrap(),
            buf_ct: Vec::new(),
            buf_samples: Vec::new(),
            n_samples,
        }
    }

    fn flush(&mut self) {
        if !self.buf_ct.is_empty() {
            self.stream
                .push_batch(&self.buf_ct, &self.buf_samples, self.n_samples);
            self.buf_ct.clear();
            self.buf_samples.clear();
        }
    }
}

impl TraceSink for CpaSink {
    fn accept(&mut self, _i: usize, _pt: [u8; 16], ct: [u8; 16], power: &[f32], _em: &[f32]) {
        self.buf_ct.push(ct);
        self.buf_samples.extend(power.iter().map(|&s| f64::from(s)));
        if self.buf_ct.len() >= 8192 {
            self.flush();
        }
    }
}

fn streamed_cpa(cfg: &ExperimentConfig, mode: &str, n_traces: usize, seed: u64) -> attenlab::sca::AttackResult {
    let reg = ScenarioRegistry::with_builtins();
    let n_samples = ROUNDS * cfg.leakage.samples_per_round as usize;
    let mut sink = CpaSink::new(n_samples, default_key_byte(cfg, 0), n_traces);
    reg.get(mode)
        .unwrap()
        .capture(cfg, &CaptureRequest::random(n_traces, seed), &mut sink)
        .unwrap();
    sink.flush();
    sink.stream.finalize().unwrap()
}

#[test]
fn criterion_06_protection_property() {
    let mut c = Criterion::new(6, "protection holds under CPA and leakage assessment");
    let started = Instant::now();
    let cfg = ExperimentConfig::default();
    let reg = ScenarioRegistry::with_builtins();

    // CPA against one million protected traces.
    let protected = streamed_cpa(&cfg, "protected", 1_000_000, 60_001);
    c.check(
        "protected CPA at 10^6 traces: MTD not reached",
        protected.disclosure_count().is_none() && protected.key_rank != Some(0),
        format!(
            "rank {:?}, disclosure {:?}",
            protected.key_rank,
            protected.disclosure_count()
        ),
    );

    // Leakage assessment: protected quiet at 1e5 traces, unprotected loud
    // within 1e3.
    let m = reg.get("protected").unwrap();
    let req = CaptureRequest::interleaved(50_000, 60_002, [0u8; 16]);
    let (power, _, _) = m.capture_sets(&cfg, &req).unwrap();
    let (fixed, random) = split_interleaved(&power);
    let quiet = tvla(&fixed, &random).unwrap();
    c.check(
        "protected TVLA max|t| < 4.5 at 10^5 traces",
        quiet.max_abs_t < 4.5,
        format!("max|t| = {:.2}", quiet.max_abs_t),
    );

    let m = reg.get("unprotected").unwrap();
    let req = CaptureRequest::interleaved(500, 60_003, [0u8; 16]);
    let (power, _, _) = m.capture_sets(&cfg, &req).unwrap();
    let (fixed, random) = split_interleaved(&power);
    let loud = tvla(&fixed, &random).unwrap();
    c.check(
        "unprotected TVLA crosses 4.5 within 10^3 traces",
        loud.first_leaky_trace_count.map(|n| n <= 1000).unwrap_or(false),
        format!("onset {:?}", loud.first_leaky_trace_count),
    );

    let elapsed = started.elapsed().as_secs_f64();
    c.check("runtime < 30 min", elapsed < 1800.0, format!("{elapsed:.0}s"));
    c.finish();
}

#[test]
fn criterion_07_vlb_efficacy() {
    let mut c = Criterion::new(7, "supply-drop attack collapses the protection");
    let cfg = ExperimentConfig::default();
    let reg = ScenarioRegistry::with_builtins();
    let correct = default_key_byte(&cfg, 0);
    let opts = AttackOptions {
        target_byte: 0,
        averaging: 1,
        known_key_byte: Some(correct),
    };

    // Unprotected baseline MTD by majority over three repeats.
    let unprotected_mtd = estimate_mtd(
        |repeat, checkpoints| {
            let req = CaptureRequest::random(*checkpoints.last().unwrap(), 7000 + repeat as u64);
            let (power, _, _) = reg.get("unprotected").unwrap().capture_sets(&cfg, &req).unwrap();
            checkpoints
                .iter()
                .map(|&n| {
                    matches!(
                        cpa_attack(&power.truncated(n), &opts),
                        Ok(r) if r.key_rank == Some(0)
                    )
                })
                .collect()
        },
        10_000,
        3,
    );
    let m_u = match unprotected_mtd {
        MtdEstimate::Reached(n) => n,
        MtdEstimate::NotReached => {
            c.check("unprotected MTD measurable", false, "not reached at 10K".into());
            c.finish();
            return;
        }
    };
    let budget = 100 * m_u;

    // The drop scenario disclosing within 100x the unprotected MTD.
    let vlb = streamed_cpa(&cfg, "vlb", budget, 70_001);
    let vlb_disclosure = vlb.disclosure_count();
    c.check(
        "VLB CPA disclosure within 100x unprotected MTD",
        vlb_disclosure.is_some(),
        format!("unprotected {m_u}, budget {budget}, vlb {vlb_disclosure:?}"),
    );

    // The protected baseline stays closed at the same budget.
    let protected = streamed_cpa(&cfg, "protected", budget, 70_002);
    c.check(
        "protected baseline unreached at the same budget",
        protected.disclosure_count().is_none() && protected.key_rank != Some(0),
        format!("rank {:?}", protected.key_rank),
    );

    // The drop collapses the required trace count by at least two orders of
    // magnitude against the protected baseline: the protected device is
    // still closed at one hundred times the drop-scenario disclosure count.
    if let Some(vlb_n) = vlb_disclosure {
        let collapsed = streamed_cpa(&cfg, "protected", 100 * vlb_n, 70_005);
        c.check(
            "disclosure collapses >= 100x vs the protected baseline",
            collapsed.disclosure_count().is_none() && collapsed.key_rank != Some(0),
            format!(
                "protected rank {:?} at {} traces",
                collapsed.key_rank,
                100 * vlb_n
            ),
        );
    }

    // Leakage-assessment onset within 10x the unprotected onset.
    let onset = |mode: &str, per_class: usize, seed: u64| -> Option<usize> {
        let req = CaptureRequest::interleaved(per_class, seed, [0u8; 16]);
        let (power, _, _) = reg.get(mode).unwrap().capture_sets(&cfg, &req).unwrap();
        let (fixed, random) = split_interleaved(&power);
        tvla(&fixed, &random).unwrap().first_leaky_trace_count
    };
    let onset_u = onset("unprotected", 2_000, 70_003);
    let onset_v = onset("vlb", 10_000, 70_004);
    let ok = match (onset_u, onset_v) {
        (Some(u), Some(v)) => v <= 10 * u,
        _ => false,
    };
    c.check(
        "VLB TVLA onset within 10x the unprotected onset",
        ok,
        format!("unprotected {onset_u:?}, vlb {onset_v:?}"),
    );
    c.finish();
}

#[test]
fn criterion_08_linear_region_resource_oracle() {
    let mut c = Criterion::new(8, "linear-region slice-count closed form vs simulation");

    // Relax a fixed-slice-count bank (pure square law, controller off) to its
    // equilibrium under a constant draw and test whether the node holds the
    // target voltage in the linear region.
    #[allow(clippy::too_many_arguments)]
    fn equilibrium_reaches_target(
        n_on: u32,
        k: f64,
        v_t: f64,
        bias_ratio: f64,
        vdd: f64,
        g_bleed: f64,
        i_crypto: f64,
        v_target: f64,
    ) -> bool {
        let mut bank = CsSliceBank {
            n_max: n_on.max(1),
            n_on,
            k_device: k,
            v_t,
            v_bias_top: bias_ratio * vdd,
            v_bias_bottom: vdd / 2.0,
            region: Region::Cutoff,
            cascoded: true,
            g_out_slice: 0.0,
            bias_ratio,
        };
        let smc = SmcConfig {
            bleed_conductance: g_bleed,
            ..SmcConfig::default()
        };
        let mut state = PdnState::new(vdd);
        state.v_aes = 0.0;
        let dt = 2e-9;
        for _ in 0..200_000 {
            step_pdn(&mut state, &mut bank, &smc, i_crypto, dt).unwrap();
        }
        state.v_aes >= v_target - 1e-9 && bank.region == Region::Linear
    }

    let mut rng = CounterRng::new(0xe902);
    let mut exact_matches = 0;
    let mut mismatches = Vec::new();
    for case in 0..20 {
        let k = (300.0 + 1500.0 * rng.next_unit_open()) * 1e-6;
        let v_t = 0.15 + 0.1 * rng.next_unit_open();
        let v_target = 0.7 + 0.15 * rng.next_unit_open();
        let v_ov = 0.08 + 0.2 * rng.next_unit_open();
        let v_ds = v_ov * (0.2 + 0.7 * rng.next_unit_open());
        let vdd = v_target + v_ds;
        let v_gs = v_ov + v_t;
        let bias_ratio = 1.0 - v_gs / vdd;
        let g_bleed = (0.5 + rng.next_unit_open()) * 1e-3;
        let i_crypto = (100.0 + 400.0 * rng.next_unit_open()) * 1e-6;
        let demand = i_crypto + g_bleed * v_target;

        let feas = vlb_feasible(demand, k, v_t, v_gs, v_ds, 100_000).unwrap();

        // Brute-force sweep: smallest n whose equilibrium holds the target.
        let mut sim_n = None;
        for n in 1..=feas.n_required + 3 {
            if equilibrium_reaches_target(n, k, v_t, bias_ratio, vdd, g_bleed, i_crypto, v_target)
            {
                sim_n = Some(n);
                break;
            }
        }
        if sim_n == Some(feas.n_required) {
            exact_matches += 1;
        } else {
            mismatches.push(format!(
                "case {case}: formula {} vs sim {:?}",
                feas.n_required, sim_n
            ));
        }
    }
    c.check(
        "closed form matches simulation sweep exactly on 20 random configs",
        exact_matches == 20,
        format!("{exact_matches}/20; {mismatches:?}"),
    );

    // Resource-starved drops brown the engine out instead of stabilizing.
    let mut all_brown_out = true;
    for n_max in [30u32, 45, 60] {
        let mut cfg = ExperimentConfig::default();
        cfg.device.n_max = n_max;
        let feas = attenlab::scenario::vlb_feasibility_check(&cfg, cfg.attack.vdd_drop).unwrap();
        assert!(!feas.feasible, "n_max {n_max} unexpectedly feasible");
        let phases = run_vlb_recovery(&cfg, cfg.attack.vdd_drop, 80 + u64::from(n_max)).unwrap();
        if !phases.brown_out {
            all_brown_out = false;
        }
    }
    c.check(
        "infeasible configs brown out in simulation",
        all_brown_out,
        "a starved config stabilized".into(),
    );
    c.finish();
}

#[test]
fn criterion_09_detector() {
    let mut c = Criterion::new(9, "drop detector latency, accuracy, and halt");
    let cfg = ExperimentConfig::default();

    // Default scenario: detect within 0.8 ms of drop completion.
    let report = run_detector_cosim(&cfg, cfg.attack.vdd_drop, cfg.attack.ramp, 90_001, 60).unwrap();
    let latency = report.detection_latency;
    c.check(
        "detection within 0.8 ms at the default 10 kHz / 5-cycle / threshold-10 config",
        latency.map(|t| t <= 0.8e-3).unwrap_or(false),
        format!("latency {latency:?}"),
    );

    // Worked comparator example: counts 20 vs 8 against threshold 10.
    c.check(
        "counts 20 vs 8 exceed threshold 10 (difference 12) and flag",
        comparator_flags(20, 8, 10) && !comparator_flags(20, 8, 12),
        "comparator decision wrong".into(),
    );

    // A million stable detector cycles with nominal node ripple: no flag.
    let det_cfg = DetectorConfig::default();
    let mut state = DetectorState::new();
    let mut rng = CounterRng::new(90_002);
    let mut false_positive = false;
    for _ in 0..1_000_000u32 {
        let v_aes = cfg.device.v_aes_nominal + rng.next_gaussian(5e-3);
        if detector_step(&mut state, &det_cfg, cfg.device.vdd, v_aes) {
            false_positive = true;
            break;
        }
    }
    c.check(
        "zero false positives over 10^6 stable cycles",
        !false_positive,
        format!("flag at {:?}", state.detection_time),
    );

    // Encryptions completed before the halt, against the disclosure budget.
    c.check(
        "encryptions before halt <= 1.1% of the 105K-trace budget",
        report.fraction_of_budget <= 0.011,
        format!(
            "{} encryptions = {:.3}%",
            report.encryptions_before_halt,
            report.fraction_of_budget * 100.0
        ),
    );
    c.finish();
}

#[test]
fn criterion_10_statistics_oracles() {
    let mut c = Criterion::new(10, "statistics implementations vs naive oracles");

    // Streaming correlation against the two-pass oracle.
    let mut rng = CounterRng::new(0xacc);
    let n_traces = 5000;
    let n_samples = 8;
    let mut stream = CpaStream::new(n_samples, 0, None, n_traces).unwrap();
    let mut cts = Vec::new();
    let mut rows = Vec::new();
    for _ in 0..n_traces {
        let mut ct = [0u8; 16];
        rng.fill_bytes(&mut ct);
        let row: Vec<f64> = (0..n_samples)
            .map(|_| 2.0e-4 + rng.next_gaussian(3.0e-5))
            .collect();
        stream.push(&ct, &row);
        cts.push(ct);
        rows.push(row);
    }
    let result = stream.finalize().unwrap();
    let mut worst = 0.0f64;
    for guess in [0usize, 77, 201, 255] {
        let hyps: Vec<f64> = cts
            .iter()
            .map(|ct| f64::from(attenlab::aes::last_round_hd_hypothesis(ct, 0, guess as u8)))
            .collect();
        for s in 0..n_samples {
            let col: Vec<f64> = rows.iter().map(|r| r[s]).collect();
            let oracle = pearson_two_pass(&hyps, &col);
            let got = result.correlations[guess * n_samples + s];
            worst = worst.max((got - oracle).abs() / oracle.abs().max(1e-30));
        }
    }
    c.check(
        "streaming CPA equals two-pass oracle, rel < 1e-9",
        worst < 1e-9,
        format!("worst rel err {worst:.3e}"),
    );

    // Welch-t exactness properties.
    let gaussian_set = |n: usize, mean: f64, seed: u64| -> TraceSet {
        let mut rng = CounterRng::new(seed);
        let mut set = TraceSet::empty(4, Default::default());
        for _ in 0..n {
            let row: Vec<f32> = (0..4).map(|_| (mean + rng.next_gaussian(0.4)) as f32).collect();
            set.push_trace([0; 16], [0; 16], &row);
        }
        set
    };
    let a = gaussian_set(800, 1.0, 1);
    let b = gaussian_set(800, 1.05, 2);
    let ab = tvla(&a, &b).unwrap();
    let ba = tvla(&b, &a).unwrap();
    let antisym = ab
        .t_values
        .iter()
        .zip(ba.t_values.iter())
        .all(|(x, y)| (x + y).abs() <= 1e-12 * x.abs().max(1.0));
    c.check("TVLA antisymmetry exact to 1e-12", antisym, "t(a,b) != -t(b,a)".into());
    let self_t = tvla(&a, &a).unwrap();
    c.check(
        "TVLA zero on identical sets, exact",
        self_t.t_values.iter().all(|&t| t == 0.0) && self_t.max_abs_t == 0.0,
        format!("max|t| = {}", self_t.max_abs_t),
    );

    // Transform round trip.
    let mut rng = CounterRng::new(0xff7);
    let original: Vec<Complex> = (0..1024)
        .map(|_| Complex::new(rng.next_gaussian(1.0), rng.next_gaussian(1.0)))
        .collect();
    let mut buf = original.clone();
    fft_forward(&mut buf);
    fft_inverse(&mut buf);
    let norm = original.iter().map(|z| z.abs()).fold(0.0, f64::max);
    let worst = original
        .iter()
        .zip(buf.iter())
        .map(|(a, b)| ((a.re - b.re).abs().max((a.im - b.im).abs())) / norm)
        .fold(0.0, f64::max);
    c.check(
        "DFT forward-inverse round trip, rel < 1e-9",
        worst < 1e-9,
        format!("worst rel err {worst:.3e}"),
    );
    c.finish();
}

#[test]
fn criterion_11_reproducibility() {
    let mut c = Criterion::new(11, "bit-identical reruns of every subcommand");
    let dir = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_attenlab");
    let run = |args: &[&str]| {
        let out = Command::new(bin)
            .current_dir(dir.path())
            .args(args)
            .output()
            .expect("binary runs");
        assert!(
            out.status.success(),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    };
    let file = |name: &str| std::fs::read(dir.path().join(name)).unwrap();

    for tag in ["x", "y"] {
        run(&[
            "simulate",
            "--mode",
            "vlb",
            "--n-traces",
            "400",
            "--seed",
            "5",
            "--out",
            &format!("sim_{tag}"),
        ]);
        run(&[
            "attack",
            "--traces",
            &format!("sim_{tag}_power.trc"),
            "--method",
            "cpa",
            "--byte",
            "0",
            "--out",
            &format!("atk_{tag}"),
        ]);
        run(&[
            "simulate",
            "--mode",
            "unprotected",
            "--n-traces",
            "400",
            "--plaintext",
            "tvla",
            "--seed",
            "6",
            "--out",
            &format!("tv_{tag}"),
        ]);
        run(&[
            "tvla",
            "--fixed",
            &format!("tv_{tag}_power_fixed.trc"),
            "--random",
            &format!("tv_{tag}_power_random.trc"),
            "--out",
            &format!("tvres_{tag}"),
        ]);
        run(&[
            "detect",
            "--seed",
            "7",
            "--windows",
            "30",
            "--out",
            &format!("det_{tag}"),
        ]);
    }

    let pairs = [
        ("sim_x_power.trc", "sim_y_power.trc"),
        ("sim_x_em.trc", "sim_y_em.trc"),
        ("atk_x_corr_vs_traces.csv", "atk_y_corr_vs_traces.csv"),
        ("tv_x_power_fixed.trc", "tv_y_power_fixed.trc"),
        ("tv_x_power_random.trc", "tv_y_power_random.trc"),
        ("tvres_x_t_vs_sample.csv", "tvres_y_t_vs_sample.csv"),
        ("tvres_x_t_vs_count.csv", "tvres_y_t_vs_count.csv"),
        ("det_x_counters.csv", "det_y_counters.csv"),
        ("atk_x.report", "atk_y.report"),
        ("tvres_x.report", "tvres_y.report"),
        ("det_x.report", "det_y.report"),
    ];
    for (x, y) in pairs {
        c.check(
            &format!("{x} == {y}"),
            file(x) == file(y),
            "bytes differ".into(),
        );
    }
    c.finish();
}
