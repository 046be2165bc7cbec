//! Experiment configuration: a flat sectioned key-value file with unit
//! suffixes on every physical quantity, parsed strictly. Unknown keys are
//! errors so a typo can never silently fall back to a default.

use std::path::Path;

use crate::aes::AesKey256;
use crate::detector::DetectorConfig;
use crate::error::ConfigError;
use crate::leakage::LeakageParams;
use crate::pdn::{CsSliceBank, NandLadderConfig, SmcConfig, G_OUT_CASCODED, G_OUT_DEGENERATED};

/// Circuit-level parameters of the device under test.
#[derive(Debug, Clone)]
pub struct DeviceConfig {
    pub vdd: f64,
    pub v_t: f64,
    /// MOS device constant, A/V^2.
    pub k_device: f64,
    pub n_max: u32,
    pub c_load: f64,
    pub c_decap: f64,
    pub g_out_cascoded: f64,
    pub g_out_degenerated: f64,
    pub ladder: NandLadderConfig,
    pub aes_clock_hz: f64,
    /// Node voltage the engine needs to operate.
    pub v_brownout: f64,
    /// Nominal internal node voltage.
    pub v_aes_nominal: f64,
}

impl Default for DeviceConfig {
    fn default() -> Self {
        DeviceConfig {
            vdd: 1.2,
            v_t: 0.2,
            k_device: 920e-6,
            n_max: 128,
            c_load: 150e-12,
            c_decap: 30e-12,
            g_out_cascoded: G_OUT_CASCODED,
            g_out_degenerated: G_OUT_DEGENERATED,
            ladder: NandLadderConfig::default(),
            aes_clock_hz: 20e6,
            v_brownout: 0.65,
            v_aes_nominal: 0.8,
        }
    }
}

impl DeviceConfig {
    /// Slice bank configured for the requested topology.
    pub fn build_bank(&self, cascoded: bool) -> CsSliceBank {
        let ladder = NandLadderConfig {
            vdd: self.vdd,
            ..self.ladder.clone()
        };
        let v_bias = crate::pdn::nand_bias_voltage(&ladder).unwrap_or(self.vdd * 0.6);
        CsSliceBank {
            n_max: self.n_max,
            n_on: 0,
            k_device: self.k_device,
            v_t: self.v_t,
            v_bias_top: v_bias,
            v_bias_bottom: self.vdd / 2.0,
            region: crate::pdn::Region::Cutoff,
            cascoded,
            g_out_slice: if cascoded {
                self.g_out_cascoded
            } else {
                self.g_out_degenerated
            },
            bias_ratio: v_bias / self.vdd,
        }
    }
}

/// Attack-scenario parameters.
#[derive(Debug, Clone)]
pub struct AttackConfig {
    /// Master key of the device under test.
    pub key: AesKey256,
    pub target_byte: usize,
    pub averaging: usize,
    /// Supply drop applied in the injection scenario, volts.
    pub vdd_drop: f64,
    /// Drop ramp time, seconds.
    pub ramp: f64,
    /// Trace budget a disclosure needs, used for the encryptions-before-halt
    /// figure in detector reports.
    pub mtd_budget: u64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        let mut key = [0u8; 32];
        for (i, b) in key.iter_mut().enumerate() {
            *b = (i as u8).wrapping_mul(17).wrapping_add(5);
        }
        AttackConfig {
            key: AesKey256(key),
            target_byte: 0,
            averaging: 1,
            vdd_drop: 0.30,
            ramp: 10e-6,
            mtd_budget: 105_000,
        }
    }
}

/// Full experiment configuration.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub device: DeviceConfig,
    pub leakage: LeakageParams,
    pub smc: SmcConfig,
    pub detector: DetectorConfig,
    pub attack: AttackConfig,
    /// Noise floor of the measurement chain, amperes referred to the sense
    /// point. Rides on every captured sample regardless of how small the
    /// device's own signature is, which is exactly why attenuation buys
    /// security.
    pub capture_noise_sigma: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            device: DeviceConfig::default(),
            leakage: LeakageParams::default(),
            smc: SmcConfig::default(),
            detector: DetectorConfig::default(),
            attack: AttackConfig::default(),
            capture_noise_sigma: 40e-6,
        }
    }
}

impl ExperimentConfig {
    /// Parse a config file. The seed key is mandatory; everything else
    /// defaults to the calibrated operating point.
    pub fn from_file<P: AsRef<Path>>(path: P) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_str_checked(&text)
    }

    pub fn from_str_checked(text: &str) -> Result<Self, ConfigError> {
        let entries = parse_entries(text)?;
        let mut cfg = ExperimentConfig::default();
        let mut seed_seen = false;

        for entry in &entries {
            let key = entry.dotted.as_str();
            let line = entry.line;
            let value = entry.value.as_str();
            let mut set = Setter { key, line, value };
            match key {
                "device.vdd" => cfg.device.vdd = set.volts()?,
                "device.v_t" => cfg.device.v_t = set.volts()?,
                "device.k_device" => cfg.device.k_device = set.amps_per_v2()?,
                "device.n_max" => cfg.device.n_max = set.integer()? as u32,
                "device.c_load" => cfg.device.c_load = set.farads()?,
                "device.c_decap" => cfg.device.c_decap = set.farads()?,
                "device.g_out_cascoded" => cfg.device.g_out_cascoded = set.siemens()?,
                "device.g_out_degenerated" => cfg.device.g_out_degenerated = set.siemens()?,
                "device.nand_p" => cfg.device.ladder.p = set.integer()? as u32,
                "device.nand_q" => cfg.device.ladder.q = set.integer()? as u32,
                "device.nand_r" => cfg.device.ladder.r = set.integer()? as u32,
                "device.r_on" => cfg.device.ladder.r_on = set.ohms()?,
                "device.r_off" => cfg.device.ladder.r_off = set.ohms()?,
                "device.aes_clock" => cfg.device.aes_clock_hz = set.hertz()?,
                "device.v_brownout" => cfg.device.v_brownout = set.volts()?,
                "device.v_aes_nominal" => cfg.device.v_aes_nominal = set.volts()?,

                "leakage.current_per_hd" => cfg.leakage.current_per_hd = set.amperes()?,
                "leakage.baseline_current" => cfg.leakage.baseline_current = set.amperes()?,
                "leakage.samples_per_round" => cfg.leakage.samples_per_round = set.integer()? as u32,
                "leakage.gaussian_noise_sigma" => cfg.leakage.gaussian_noise_sigma = set.amperes()?,
                "leakage.capture_noise_sigma" => cfg.capture_noise_sigma = set.amperes()?,
                "leakage.em_scale" => cfg.leakage.em_scale = set.dimensionless()?,
                "leakage.em_noise_sigma" => cfg.leakage.em_noise_sigma = set.amperes()?,
                "leakage.rng_seed" => {
                    cfg.leakage.rng_seed = set.integer()?;
                    seed_seen = true;
                }

                "smc.smc_clock" => cfg.smc.smc_clock_hz = set.hertz()?,
                "smc.ro_freq_per_volt" => cfg.smc.ro_freq_per_volt = set.hertz()?,
                "smc.ro_freq_offset" => cfg.smc.ro_freq_offset = set.hertz_signed()?,
                "smc.divider_ratio" => cfg.smc.divider_ratio = set.integer()? as u32,
                "smc.target_count" => cfg.smc.target_count = set.integer()?,
                "smc.hysteresis" => cfg.smc.hysteresis = set.integer()?,
                "smc.bleed_conductance" => cfg.smc.bleed_conductance = set.siemens()?,

                "detector.detector_clock" => cfg.detector.detector_clock_hz = set.hertz()?,
                "detector.time_to_count" => cfg.detector.time_to_count = set.integer()? as u32,
                "detector.diff_threshold" => cfg.detector.diff_threshold = set.integer()?,
                "detector.divider_ratio" => cfg.detector.divider_ratio = set.integer()? as u32,
                "detector.vdd_divider_ratio" => cfg.detector.vdd_divider_ratio = set.dimensionless()?,
                "detector.ro_gain" => cfg.detector.ro_gain = set.hertz()?,
                "detector.ro_offset" => cfg.detector.ro_offset = set.hertz_signed()?,

                "attack.key" => cfg.attack.key = set.key256()?,
                "attack.target_byte" => cfg.attack.target_byte = set.integer()? as usize,
                "attack.averaging" => cfg.attack.averaging = set.integer()? as usize,
                "attack.vdd_drop" => cfg.attack.vdd_drop = set.volts()?,
                "attack.ramp" => cfg.attack.ramp = set.seconds()?,
                "attack.mtd_budget" => cfg.attack.mtd_budget = set.integer()?,

                _ => {
                    return Err(ConfigError::UnknownKey {
                        key: key.to_string(),
                        line,
                    })
                }
            }
        }

        if !seed_seen {
            return Err(ConfigError::MissingKey("leakage.rng_seed".into()));
        }
        Ok(cfg)
    }
}

/// Parsed key = value entry.
struct Entry {
    dotted: String,
    value: String,
    line: usize,
}

fn parse_entries(text: &str) -> Result<Vec<Entry>, ConfigError> {
    let mut entries = Vec::new();
    let mut section = String::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name.strip_suffix(']').ok_or_else(|| ConfigError::Parse {
                line: line_no,
                message: "unterminated section header".into(),
            })?;
            section = name.trim().to_string();
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Parse {
            line: line_no,
            message: "expected 'key = value'".into(),
        })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(ConfigError::Parse {
                line: line_no,
                message: "empty key".into(),
            });
        }
        let dotted = if section.is_empty() {
            key.to_string()
        } else {
            format!("{section}.{key}")
        };
        entries.push(Entry {
            dotted,
            value: value.trim().to_string(),
            line: line_no,
        });
    }
    Ok(entries)
}

struct Setter<'a> {
    key: &'a str,
    line: usize,
    value: &'a str,
}

impl Setter<'_> {
    fn err(&self, message: impl Into<String>) -> ConfigError {
        ConfigError::InvalidValue {
            key: self.key.to_string(),
            line: self.line,
            message: message.into(),
        }
    }

    fn volts(&mut self) -> Result<f64, ConfigError> {
        self.quantity(&["V"])
    }

    fn amperes(&mut self) -> Result<f64, ConfigError> {
        self.quantity(&["A"])
    }

    fn farads(&mut self) -> Result<f64, ConfigError> {
        self.quantity(&["F"])
    }

    fn ohms(&mut self) -> Result<f64, ConfigError> {
        self.quantity(&["Ohm", "ohm"])
    }

    fn siemens(&mut self) -> Result<f64, ConfigError> {
        self.quantity(&["S"])
    }

    fn seconds(&mut self) -> Result<f64, ConfigError> {
        self.quantity(&["s"])
    }

    fn hertz(&mut self) -> Result<f64, ConfigError> {
        let v = self.quantity(&["Hz"])?;
        if v < 0.0 {
            return Err(self.err("must be nonnegative"));
        }
        Ok(v)
    }

    fn hertz_signed(&mut self) -> Result<f64, ConfigError> {
        self.quantity(&["Hz"])
    }

    fn amps_per_v2(&mut self) -> Result<f64, ConfigError> {
        self.quantity(&["A/V2", "A/V^2"])
    }

    fn dimensionless(&mut self) -> Result<f64, ConfigError> {
        self.value
            .parse::<f64>()
            .map_err(|_| self.err("expected a plain number"))
    }

    fn integer(&mut self) -> Result<u64, ConfigError> {
        self.value
            .parse::<u64>()
            .map_err(|_| self.err("expected a nonnegative integer"))
    }

    fn key256(&mut self) -> Result<AesKey256, ConfigError> {
        let hex = self.value;
        if hex.len() != 64 || !hex.chars().all(|c| c.is_ascii_hexdigit()) {
            return Err(self.err("expected 64 hex characters"));
        }
        let mut bytes = [0u8; 32];
        for (i, b) in bytes.iter_mut().enumerate() {
            *b = u8::from_str_radix(&hex[2 * i..2 * i + 2], 16)
                .map_err(|_| self.err("bad hex"))?;
        }
        Ok(AesKey256(bytes))
    }

    /// Parse `<number><si-prefix><unit>`, e.g. "150pF", "20MHz", "0.72V",
    /// "-2.4MHz", "920uA/V2".
    fn quantity(&mut self, units: &[&str]) -> Result<f64, ConfigError> {
        let text = self.value;
        let unit = units
            .iter()
            .find(|u| text.ends_with(*u))
            .ok_or_else(|| self.err(format!("expected a value with unit {}", units[0])))?;
        let body = &text[..text.len() - unit.len()];
        if body.is_empty() {
            return Err(self.err("missing numeric part"));
        }
        let (number_part, scale) = match body.chars().last().unwrap() {
            'p' => (&body[..body.len() - 1], 1e-12),
            'n' => (&body[..body.len() - 1], 1e-9),
            'u' => (&body[..body.len() - 1], 1e-6),
            'µ' => (&body[..body.len() - 'µ'.len_utf8()], 1e-6),
            'm' => (&body[..body.len() - 1], 1e-3),
            'k' | 'K' => (&body[..body.len() - 1], 1e3),
            'M' => (&body[..body.len() - 1], 1e6),
            'G' => (&body[..body.len() - 1], 1e9),
            _ => (body, 1.0),
        };
        let base: f64 = number_part
            .parse()
            .map_err(|_| self.err(format!("bad number '{number_part}'")))?;
        Ok(base * scale)
    }
}
