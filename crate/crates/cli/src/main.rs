//! Laboratory driver. One binary, four subcommands, reproducible runs: a
//! seed and a config determine every output file bit for bit.
//!
//! Exit codes are a stable scripting contract: 0 success, 2 configuration or
//! argument error, 3 data-format error, 4 infeasible scenario.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use attenlab::aes::{last_round_key, AesKey256};
use attenlab::config::ExperimentConfig;
use attenlab::error::{AnalysisError, ConfigError, SimError, TraceIoError};
use attenlab::report::RunReport;
use attenlab::sca::{
    tvla, AttackRequest, AttackOptions, AttackResult, MethodRegistry, TraceSet, TVLA_THRESHOLD,
};
use attenlab::scenario::cosim::{run_detector_cosim, threshold_sweep};
use attenlab::scenario::{split_interleaved, CaptureRequest, ScenarioRegistry};
use attenlab::trace_io::{fmt_float, read_traces, write_traces, CsvWriter};

const EXIT_CONFIG: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_INFEASIBLE: u8 = 4;

/// Print a summary line, tolerating a closed stdout (downstream `head`).
macro_rules! outln {
    ($($arg:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

#[derive(Parser)]
#[command(
    name = "attenlab",
    about = "Side-channel laboratory: signature-attenuating power delivery around AES-256, \
             supply-drop attack injection, detection, and trace analysis",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a capture campaign and write power and EM-proxy trace files.
    Simulate {
        /// Experiment config file; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Delivery mode: unprotected, protected, degenerated, or vlb.
        #[arg(long, default_value = "protected")]
        mode: String,
        #[arg(long = "n-traces", default_value_t = 1000)]
        n_traces: usize,
        /// Output path stem; channel suffixes and extensions are appended.
        #[arg(long)]
        out: PathBuf,
        /// Master seed; overrides the config's leakage.rng_seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Plaintext policy: "random", "fixed" (all-zero block),
        /// "fixed:<32 hex>", or "tvla" (interleaved fixed/random written as
        /// separate class files; --n-traces then counts per class).
        #[arg(long, default_value = "random")]
        plaintext: String,
    },
    /// Run a key-recovery attack against a trace file.
    Attack {
        #[arg(long)]
        traces: PathBuf,
        /// Attack method: cpa, cema, or spectral.
        #[arg(long, default_value = "cpa")]
        method: String,
        /// Targeted final-round key byte.
        #[arg(long, default_value_t = 0, value_parser = clap::value_parser!(u8).range(0..=15))]
        byte: u8,
        /// Repeat-encryption averaging factor.
        #[arg(long, default_value_t = 1)]
        averaging: usize,
        /// Use only the first N traces of the file.
        #[arg(long = "max-traces")]
        max_traces: Option<usize>,
        /// Known master key (64 hex chars) for rank and disclosure reporting.
        #[arg(long = "known-key")]
        known_key: Option<String>,
        /// Frequency band for the spectral method, hertz.
        #[arg(long = "f-lo")]
        f_lo: Option<f64>,
        #[arg(long = "f-hi")]
        f_hi: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Welch-t leakage assessment between fixed and random trace classes.
    Tvla {
        #[arg(long)]
        fixed: PathBuf,
        #[arg(long)]
        random: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Co-simulate the protected loop with the drop detector.
    Detect {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Supply drop in volts; defaults to the config's attack.vdd_drop.
        #[arg(long = "vdd-drop")]
        vdd_drop: Option<f64>,
        /// Drop ramp time in seconds; defaults to the config's attack.ramp.
        #[arg(long)]
        ramp: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Comparator windows to observe.
        #[arg(long, default_value_t = 60)]
        windows: u32,
        /// Comma-separated thresholds for a detection-probability sweep.
        #[arg(long = "sweep-thresholds")]
        sweep_thresholds: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Errors mapped onto the exit-code contract.
enum CliError {
    Config(String),
    Data(String),
    Infeasible(String),
    Other(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Data(_) => EXIT_DATA,
            CliError::Infeasible(_) => EXIT_INFEASIBLE,
            CliError::Other(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Data(m) | CliError::Infeasible(m) | CliError::Other(m) => m,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<TraceIoError> for CliError {
    fn from(e: TraceIoError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::VlbInfeasible { .. } | SimError::NotLinearRegion { .. } => {
                CliError::Infeasible(format!("VLB infeasible: {e}"))
            }
            SimError::InvalidParameter(_) => CliError::Config(e.to_string()),
            other => CliError::Other(other.to_string()),
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::ByteIndexOutOfRange(_)
            | AnalysisError::AboveNyquist { .. }
            | AnalysisError::EmptyBand { .. } => CliError::Config(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_worker_pool();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message());
            ExitCode::from(err.exit_code())
        }
    }
}

/// Worker count comes from ATTENLAB_WORKERS; default is machine parallelism.
fn init_worker_pool() {
    if let Ok(value) = std::env::var("ATTENLAB_WORKERS") {
        if let Ok(n) = value.parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate {
            config,
            mode,
            n_traces,
            out,
            seed,
            plaintext,
        } => cmd_simulate(config, &mode, n_traces, &out, seed, &plaintext),
        Command::Attack {
            traces,
            method,
            byte,
            averaging,
            max_traces,
            known_key,
            f_lo,
            f_hi,
            out,
        } => cmd_attack(
            &traces,
            &method,
            byte as usize,
            averaging,
            max_traces,
            known_key.as_deref(),
            f_lo,
            f_hi,
            &out,
        ),
        Command::Tvla { fixed, random, out } => cmd_tvla(&fixed, &random, &out),
        Command::Detect {
            config,
            vdd_drop,
            ramp,
            seed,
            windows,
            sweep_thresholds,
            out,
        } => cmd_detect(config, vdd_drop, ramp, seed, windows, sweep_thresholds.as_deref(), &out),
    }
}

fn load_config(path: Option<PathBuf>) -> Result<ExperimentConfig, CliError> {
    match path {
        Some(p) => Ok(ExperimentConfig::from_file(p)?),
        None => Ok(ExperimentConfig::default()),
    }
}

fn with_suffix(stem: &Path, suffix: &str) -> PathBuf {
    let mut name = stem
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".to_string());
    name.push_str(suffix);
    stem.with_file_name(name)
}

fn parse_plaintext_policy(
    text: &str,
    n_traces: usize,
    seed: u64,
) -> Result<CaptureRequest, CliError> {
    if text == "random" {
        return Ok(CaptureRequest::random(n_traces, seed));
    }
    if text == "tvla" {
        return Ok(CaptureRequest::interleaved(n_traces, seed, [0u8; 16]));
    }
    if text == "fixed" {
        return Ok(CaptureRequest::fixed(n_traces, seed, [0u8; 16]));
    }
    if let Some(hex) = text.strip_prefix("fixed:") {
        let block = parse_hex_block(hex)
            .ok_or_else(|| CliError::Config(format!("bad fixed plaintext '{hex}'")))?;
        return Ok(CaptureRequest::fixed(n_traces, seed, block));
    }
    Err(CliError::Config(format!(
        "unknown plaintext policy '{text}' (expected random, fixed, fixed:<hex>, tvla)"
    )))
}

fn parse_hex_block(hex: &str) -> Option<[u8; 16]> {
    if hex.len() != 32 || !hex.chars().all(|c| c.is_ascii_hexdigit()) {
        return None;
    }
    let mut block = [0u8; 16];
    for (i, b) in block.iter_mut().enumerate() {
        *b = u8::from_str_radix(&hex[2 * i..2 * i + 2], 16).ok()?;
    }
    Some(block)
}

fn parse_key(hex: &str) -> Option<AesKey256> {
    if hex.len() != 64 || !hex.chars().all(|c| c.is_ascii_hexdigit()) {
        return None;
    }
    let mut key = [0u8; 32];
    for (i, b) in key.iter_mut().enumerate() {
        *b = u8::from_str_radix(&hex[2 * i..2 * i + 2], 16).ok()?;
    }
    Some(AesKey256(key))
}

fn cmd_simulate(
    config: Option<PathBuf>,
    mode: &str,
    n_traces: usize,
    out: &Path,
    seed: Option<u64>,
    plaintext: &str,
) -> Result<(), CliError> {
    let cfg = load_config(config)?;
    let seed = seed.unwrap_or(cfg.leakage.rng_seed);
    let registry = ScenarioRegistry::with_builtins();
    let delivery = registry.get(mode).ok_or_else(|| {
        CliError::Config(format!(
            "unknown mode '{mode}' (available: {})",
            registry.names().join(", ")
        ))
    })?;

    let tvla_split = plaintext == "tvla";
    let req = parse_plaintext_policy(plaintext, n_traces, seed)?;
    let (power, em, stats) = delivery.capture_sets(&cfg, &req)?;

    let mut written = Vec::new();
    if tvla_split {
        let (power_fixed, power_random) = split_interleaved(&power);
        let (em_fixed, em_random) = split_interleaved(&em);
        for (suffix, set) in [
            ("_power_fixed.trc", &power_fixed),
            ("_power_random.trc", &power_random),
            ("_em_fixed.trc", &em_fixed),
            ("_em_random.trc", &em_random),
        ] {
            let path = with_suffix(out, suffix);
            write_traces(&path, set)?;
            written.push(path);
        }
    } else {
        for (suffix, set) in [("_power.trc", &power), ("_em.trc", &em)] {
            let path = with_suffix(out, suffix);
            write_traces(&path, set)?;
            written.push(path);
        }
    }

    let mut report = stats.to_report(seed);
    report.put("plaintext_policy", plaintext);
    for path in &written {
        report.put("output", path.display());
    }
    let report_path = with_suffix(out, ".report");
    report.write_to(&report_path)?;

    outln!(
        "{}: {} traces x {} samples, attenuation {}",
        stats.mode,
        stats.n_traces,
        stats.n_samples,
        stats
            .attenuation
            .map(|a| a.to_string())
            .unwrap_or_else(|| "n/a".into())
    );
    if let Some(vlb) = &stats.vlb {
        outln!(
            "vlb: droop to {:.3} V, recovered with {} slices in {:?} region (needed {})",
            vlb.droop_min_v, vlb.n_on_after, vlb.region_after, vlb.n_required
        );
    }
    outln!("report: {}", report_path.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_attack(
    traces_path: &Path,
    method_name: &str,
    byte: usize,
    averaging: usize,
    max_traces: Option<usize>,
    known_key: Option<&str>,
    f_lo: Option<f64>,
    f_hi: Option<f64>,
    out: &Path,
) -> Result<(), CliError> {
    let registry = MethodRegistry::with_builtins();
    let method = registry.get(method_name).ok_or_else(|| {
        CliError::Config(format!(
            "unknown method '{method_name}' (available: {})",
            registry.names().join(", ")
        ))
    })?;
    let known_key_byte = match known_key {
        Some(hex) => {
            let key = parse_key(hex)
                .ok_or_else(|| CliError::Config("known key must be 64 hex characters".into()))?;
            Some(last_round_key(&key)[byte])
        }
        None => None,
    };

    let full = read_traces(traces_path)?;
    let set: TraceSet = match max_traces {
        Some(n) => full.truncated(n),
        None => full,
    };

    let request = AttackRequest {
        options: AttackOptions {
            target_byte: byte,
            averaging: averaging.max(1),
            known_key_byte,
        },
        band: match (f_lo, f_hi) {
            (Some(lo), Some(hi)) => Some((lo, hi)),
            (None, None) => None,
            _ => {
                return Err(CliError::Config(
                    "--f-lo and --f-hi must be given together".into(),
                ))
            }
        },
    };
    let result = method.run(&set, &request)?;

    write_attack_outputs(out, method_name, byte, &result)?;
    outln!("{}", attack_summary(method_name, byte, &result));
    Ok(())
}

fn attack_summary(method: &str, byte: usize, result: &AttackResult) -> String {
    let mtd = result
        .disclosure_count()
        .map(|n| n.to_string())
        .unwrap_or_else(|| "not reached".into());
    match result.key_rank {
        Some(0) => format!(
            "{method}: byte {byte} recovered, guess 0x{:02x}, |corr| {:.4}, disclosure at {} traces (of {})",
            result.best_guess,
            result.best_correlation.abs(),
            mtd,
            result.n_traces_used
        ),
        Some(rank) => format!(
            "{method}: byte {byte} NOT recovered (rank {rank}), best guess 0x{:02x}, MTD not reached at {} traces",
            result.best_guess, result.n_traces_used
        ),
        None => format!(
            "{method}: byte {byte} best guess 0x{:02x}, |corr| {:.4} ({} traces; key unknown)",
            result.best_guess,
            result.best_correlation.abs(),
            result.n_traces_used
        ),
    }
}

fn write_attack_outputs(
    out: &Path,
    method: &str,
    byte: usize,
    result: &AttackResult,
) -> Result<(), CliError> {
    let corr_path = with_suffix(out, "_corr_vs_traces.csv");
    let mut corr = CsvWriter::create(
        &corr_path,
        &["trace_count", "best_guess", "best_abs_corr", "correct_rank"],
    )?;
    for point in &result.mtd_curve {
        corr.row(&[
            point.trace_count.to_string(),
            format!("0x{:02x}", point.best_guess),
            fmt_float(point.best_correlation.abs()),
            point
                .correct_rank
                .map(|r| r.to_string())
                .unwrap_or_default(),
        ])?;
    }
    corr.finish()?;

    let rank_path = with_suffix(out, "_rank_vs_traces.csv");
    if result.key_rank.is_some() {
        let mut rank = CsvWriter::create(&rank_path, &["trace_count", "correct_rank"])?;
        for point in &result.mtd_curve {
            rank.row(&[
                point.trace_count.to_string(),
                point.correct_rank.map(|r| r.to_string()).unwrap_or_default(),
            ])?;
        }
        rank.finish()?;
    }

    let mut report = RunReport::new();
    report.put("method", method);
    report.put("target_byte", byte);
    report.put("n_traces", result.n_traces_used);
    report.put("best_guess", format!("0x{:02x}", result.best_guess));
    report.put("best_abs_corr", fmt_float(result.best_correlation.abs()));
    report.put("best_sample", result.best_sample);
    match result.key_rank {
        Some(rank) => {
            report.put("key_rank", rank);
            report.put("recovered", rank == 0);
            report.put(
                "disclosure_traces",
                result
                    .disclosure_count()
                    .map(|n| n.to_string())
                    .unwrap_or_else(|| "not reached".into()),
            );
        }
        None => report.put("key_rank", "unknown"),
    }
    report.put("summary", attack_summary(method, byte, result));
    report.write_to(with_suffix(out, ".report"))?;
    Ok(())
}

fn cmd_tvla(fixed_path: &Path, random_path: &Path, out: &Path) -> Result<(), CliError> {
    let fixed = read_traces(fixed_path)?;
    let random = read_traces(random_path)?;
    let result = tvla(&fixed, &random)?;

    let mut by_sample = CsvWriter::create(with_suffix(out, "_t_vs_sample.csv"), &["sample", "t"])?;
    for (s, t) in result.t_values.iter().enumerate() {
        by_sample.row(&[s.to_string(), fmt_float(*t)])?;
    }
    by_sample.finish()?;

    let mut by_count = CsvWriter::create(
        with_suffix(out, "_t_vs_count.csv"),
        &["trace_count", "max_abs_t"],
    )?;
    for (count, t) in &result.t_vs_count {
        by_count.row(&[count.to_string(), fmt_float(*t)])?;
    }
    by_count.finish()?;

    let mut report = RunReport::new();
    report.put("n_fixed", fixed.n_traces());
    report.put("n_random", random.n_traces());
    report.put("max_abs_t", fmt_float(result.max_abs_t));
    report.put("threshold", TVLA_THRESHOLD);
    report.put("leaks", result.leaks());
    report.put(
        "first_leaky_trace_count",
        result
            .first_leaky_trace_count
            .map(|n| n.to_string())
            .unwrap_or_else(|| "none".into()),
    );
    report.write_to(with_suffix(out, ".report"))?;

    outln!(
        "tvla: max|t| = {:.2} ({}); onset {}",
        result.max_abs_t,
        if result.leaks() { "leaks" } else { "quiet" },
        result
            .first_leaky_trace_count
            .map(|n| format!("at {n} traces"))
            .unwrap_or_else(|| "not observed".into())
    );
    Ok(())
}

fn cmd_detect(
    config: Option<PathBuf>,
    vdd_drop: Option<f64>,
    ramp: Option<f64>,
    seed: Option<u64>,
    windows: u32,
    sweep_thresholds: Option<&str>,
    out: &Path,
) -> Result<(), CliError> {
    let cfg = load_config(config)?;
    let vdd_drop = vdd_drop.unwrap_or(cfg.attack.vdd_drop);
    let ramp = ramp.unwrap_or(cfg.attack.ramp);
    let seed = seed.unwrap_or(cfg.leakage.rng_seed);
    if vdd_drop < 0.0 || vdd_drop >= cfg.device.vdd {
        return Err(CliError::Config(format!(
            "vdd drop {vdd_drop} outside [0, {})",
            cfg.device.vdd
        )));
    }

    let report = run_detector_cosim(&cfg, vdd_drop, ramp, seed, windows)?;

    let mut counters = CsvWriter::create(
        with_suffix(out, "_counters.csv"),
        &["time_s", "count_vdd", "count_vaes", "abs_diff", "flagged"],
    )?;
    for w in &report.windows {
        counters.row(&[
            fmt_float(w.time),
            w.count_vdd.to_string(),
            w.count_vaes.to_string(),
            w.count_vdd.abs_diff(w.count_vaes).to_string(),
            w.flagged.to_string(),
        ])?;
    }
    counters.finish()?;

    if let Some(list) = sweep_thresholds {
        let thresholds: Vec<u64> = list
            .split(',')
            .map(|s| s.trim().parse::<u64>())
            .collect::<Result<_, _>>()
            .map_err(|_| CliError::Config(format!("bad threshold list '{list}'")))?;
        let seeds: Vec<u64> = (0..5).map(|i| seed.wrapping_add(i)).collect();
        let sweep = threshold_sweep(&cfg, &thresholds, vdd_drop, ramp, &seeds)?;
        let mut csv = CsvWriter::create(
            with_suffix(out, "_threshold_sweep.csv"),
            &["diff_threshold", "detection_probability"],
        )?;
        for (threshold, probability) in &sweep {
            csv.row(&[threshold.to_string(), fmt_float(*probability)])?;
        }
        csv.finish()?;
    }

    let mut run_report = RunReport::new();
    run_report.put("vdd_drop_v", vdd_drop);
    run_report.put("ramp_s", ramp);
    run_report.put("seed", seed);
    run_report.put("diff_threshold", cfg.detector.diff_threshold);
    run_report.put("windows_observed", report.windows.len());
    match report.detection_latency {
        Some(latency) => {
            run_report.put("detected", true);
            run_report.put("detection_latency_s", fmt_float(latency));
            run_report.put(
                "detection_sim_time_s",
                fmt_float(report.detection_sim_time.unwrap_or_default()),
            );
        }
        None => run_report.put("detected", vdd_drop > 0.0 && report.detection_sim_time.is_some()),
    }
    if let Some((c_vdd, c_vaes)) = report.flagged_counts {
        run_report.put("flagged_count_vdd", c_vdd);
        run_report.put("flagged_count_vaes", c_vaes);
    }
    run_report.put("droop_min_v", fmt_float(report.droop_min_v));
    run_report.put("encryptions_before_halt", report.encryptions_before_halt);
    run_report.put("mtd_budget", report.mtd_budget);
    run_report.put(
        "fraction_of_budget_pct",
        fmt_float(report.fraction_of_budget * 100.0),
    );
    run_report.put("false_positive", report.false_positive);
    run_report.write_to(with_suffix(out, ".report"))?;

    match report.detection_latency {
        Some(latency) => outln!(
            "detected {:.3} ms after the drop completed; {} encryptions before halt ({:.3}% of a {}-trace budget)",
            latency * 1e3,
            report.encryptions_before_halt,
            report.fraction_of_budget * 100.0,
            report.mtd_budget
        ),
        None => outln!(
            "no attack detected over {} windows ({} encryptions ran)",
            report.windows.len(),
            report.encryptions_before_halt
        ),
    }
    Ok(())
}
