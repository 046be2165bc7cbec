//! Run reports: a flat key-value text document summarizing one experiment.
//! Every number in a report is an operation output; durations are simulated
//! time, so a rerun with the same seed produces an identical report.

use std::fmt::Display;
use std::io::Write;
use std::path::Path;

use crate::error::TraceIoError;

#[derive(Debug, Clone, Default)]
pub struct RunReport {
    entries: Vec<(String, String)>,
}

impl RunReport {
    pub fn new() -> Self {
        RunReport::default()
    }

    pub fn put(&mut self, key: &str, value: impl Display) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(v);
            out.push('\n');
        }
        out
    }

    pub fn write_to<P: AsRef<Path>>(&self, path: P) -> Result<(), TraceIoError> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.render().as_bytes())?;
        Ok(())
    }
}

impl crate::scenario::CaptureStats {
    /// Render the capture measurements as a report.
    pub fn to_report(&self, seed: u64) -> RunReport {
        let mut r = RunReport::new();
        r.put("mode", self.mode);
        r.put("seed", seed);
        r.put("n_traces", self.n_traces);
        r.put("n_samples", self.n_samples);
        r.put("sample_rate_hz", self.sample_rate_hz);
        match &self.attenuation {
            Some(a) => r.put("attenuation_rms", a),
            None => r.put("attenuation_rms", "n/a"),
        }
        r.put("crypto_peak_to_peak_a", self.crypto_peak_to_peak);
        r.put("supply_peak_to_peak_a", self.supply_peak_to_peak);
        r.put("mean_power_w", self.mean_power_w);
        if let Some(n) = self.final_n_on {
            r.put("final_n_on", n);
        }
        if let Some(v) = self.final_v_aes {
            r.put("final_v_aes", v);
        }
        if let Some(region) = self.final_region {
            r.put("final_region", format!("{region:?}"));
        }
        if let Some(vlb) = &self.vlb {
            r.put("vlb_droop_min_v", vlb.droop_min_v);
            r.put(
                "vlb_recovery_time_s",
                vlb.recovery_time
                    .map(|t| t.to_string())
                    .unwrap_or_else(|| "none".into()),
            );
            r.put("vlb_stabilized", vlb.stabilized);
            r.put("vlb_brown_out", vlb.brown_out);
            r.put("vlb_n_on_after", vlb.n_on_after);
            r.put("vlb_region_after", format!("{:?}", vlb.region_after));
            r.put("vlb_n_required", vlb.n_required);
        }
        r.put("settle_sim_time_s", self.settle_sim_time);
        r.put("capture_sim_time_s", self.capture_sim_time);
        r
    }
}
