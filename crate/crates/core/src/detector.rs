//! Supply-drop attack detector.
//!
//! Two ring oscillators sample two voltages: the global rail through a
//! stacked-inverter divider, and the internal node directly. Each oscillator
//! feeds a frequency divider and an asynchronous counter. Every
//! `time_to_count` clock cycles a comparator checks the absolute count
//! difference against a threshold; a sustained mismatch between the divided
//! rail and the regulated node is what a malicious supply drop looks like.

/// Detector calibration.
#[derive(Debug, Clone)]
pub struct DetectorConfig {
    pub detector_clock_hz: f64,
    /// Clock cycles accumulated before each comparison.
    pub time_to_count: u32,
    /// Count difference that flags an attack.
    pub diff_threshold: u64,
    pub divider_ratio: u32,
    /// Rail divider tap (stacked inverters), as a fraction of the rail.
    pub vdd_divider_ratio: f64,
    /// Linearized oscillator gain and offset.
    pub ro_gain: f64,
    pub ro_offset: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        // Both counters read about 28 per window at the nominal operating
        // point (1.2 V rail, 0.8 V node), and a 0.27 V rail drop opens a gap
        // of about 17 counts against the sagging node.
        DetectorConfig {
            detector_clock_hz: 10e3,
            time_to_count: 5,
            diff_threshold: 10,
            divider_ratio: 128,
            vdd_divider_ratio: 2.0 / 3.0,
            ro_gain: 12e6,
            ro_offset: -2.4e6,
        }
    }
}

impl DetectorConfig {
    pub fn ro_frequency(&self, v: f64) -> f64 {
        (self.ro_gain * v + self.ro_offset).max(0.0)
    }

    pub fn window_period(&self) -> f64 {
        f64::from(self.time_to_count) / self.detector_clock_hz
    }
}

/// Counter and comparator state.
#[derive(Debug, Clone)]
pub struct DetectorState {
    pub count_vdd: u64,
    pub count_vaes: u64,
    pub cycles_elapsed: u32,
    pub attack_flag: bool,
    pub detection_time: Option<f64>,
    /// Oscillator phase accumulators (pre-division edge counts carry across
    /// cycles within a window).
    phase_vdd: f64,
    phase_vaes: f64,
    time: f64,
    /// Counts captured by the comparator that raised the flag.
    pub flagged_counts: Option<(u64, u64)>,
    /// Counts seen by the most recent comparison.
    pub last_window_counts: Option<(u64, u64)>,
}

impl DetectorState {
    pub fn new() -> Self {
        DetectorState {
            count_vdd: 0,
            count_vaes: 0,
            cycles_elapsed: 0,
            attack_flag: false,
            detection_time: None,
            phase_vdd: 0.0,
            phase_vaes: 0.0,
            time: 0.0,
            flagged_counts: None,
            last_window_counts: None,
        }
    }

    pub fn time(&self) -> f64 {
        self.time
    }
}

impl Default for DetectorState {
    fn default() -> Self {
        Self::new()
    }
}

/// Comparator decision on a pair of window counts.
pub fn comparator_flags(count_vdd: u64, count_vaes: u64, diff_threshold: u64) -> bool {
    count_vdd.abs_diff(count_vaes) > diff_threshold
}

/// Advance the detector by one clock cycle, sampling the rail and node
/// voltages over that cycle. At the end of every `time_to_count` cycles the
/// comparator runs and the counters reset. The flag latches.
pub fn detector_step(
    state: &mut DetectorState,
    cfg: &DetectorConfig,
    v_dd: f64,
    v_aes: f64,
) -> bool {
    let cycle = 1.0 / cfg.detector_clock_hz;
    state.phase_vdd += cfg.ro_frequency(cfg.vdd_divider_ratio * v_dd) * cycle;
    state.phase_vaes += cfg.ro_frequency(v_aes) * cycle;
    state.count_vdd = (state.phase_vdd / f64::from(cfg.divider_ratio)) as u64;
    state.count_vaes = (state.phase_vaes / f64::from(cfg.divider_ratio)) as u64;
    state.cycles_elapsed += 1;
    state.time += cycle;

    if state.cycles_elapsed >= cfg.time_to_count {
        let flagged = comparator_flags(state.count_vdd, state.count_vaes, cfg.diff_threshold);
        state.last_window_counts = Some((state.count_vdd, state.count_vaes));
        if flagged && !state.attack_flag {
            state.attack_flag = true;
            state.detection_time = Some(state.time);
            state.flagged_counts = Some((state.count_vdd, state.count_vaes));
        }
        state.count_vdd = 0;
        state.count_vaes = 0;
        state.phase_vdd = 0.0;
        state.phase_vaes = 0.0;
        state.cycles_elapsed = 0;
    }
    state.attack_flag
}

/// Encryption-enable gate driven by the detector flag: once the flag is up no
/// new encryption starts; the one in flight completes.
#[derive(Debug, Clone, Copy)]
pub struct EncryptionGate {
    enabled: bool,
}

impl EncryptionGate {
    pub fn new() -> Self {
        EncryptionGate { enabled: true }
    }

    pub fn observe_flag(&mut self, attack_flag: bool) {
        if attack_flag {
            self.enabled = false;
        }
    }

    pub fn may_start_encryption(&self) -> bool {
        self.enabled
    }
}

impl Default for EncryptionGate {
    fn default() -> Self {
        Self::new()
    }
}
