use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::TdcSample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    /// Minimum |hw - baseline| that counts as deviating.
    pub threshold: u32,
    /// Consecutive deviating samples needed to alert, and consecutive
    /// quiet samples needed to re-arm.
    pub persistence: u32,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig { threshold: 8, persistence: 3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Alert {
    pub t: f64,
    pub sensor: usize,
    /// Largest |hw - baseline| among the samples that raised the alert.
    pub peak_deviation: u32,
}

/// Per-sensor persistence filter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Detector {
    cfg: DetectorConfig,
    baseline: u32,
    armed: bool,
    streak: u32,
    peak: u32,
}

impl Detector {
    pub fn new(cfg: DetectorConfig, baseline: u32) -> Self {
        assert!(cfg.threshold >= 1 && cfg.persistence >= 1, "threshold and persistence must be at least 1");
        Detector { cfg, baseline, armed: true, streak: 0, peak: 0 }
    }

    pub fn is_armed(&self) -> bool {
        self.armed
    }

    pub fn push(&mut self, s: &TdcSample) -> Option<Alert> {
        let dev = s.hw.abs_diff(self.baseline);
        let deviating = dev >= self.cfg.threshold;
        if self.armed {
            if !deviating {
                self.streak = 0;
                self.peak = 0;
                return None;
            }
            self.streak += 1;
            self.peak = self.peak.max(dev);
            if self.streak < self.cfg.persistence {
                return None;
            }
            let alert = Alert { t: s.t, sensor: s.sensor, peak_deviation: self.peak };
            self.armed = false;
            self.streak = 0;
            self.peak = 0;
            Some(alert)
        } else {
            self.streak = if deviating { 0 } else { self.streak + 1 };
            if self.streak >= self.cfg.persistence {
                self.armed = true;
                self.streak = 0;
            }
            None
        }
    }
}

/// Runs one detector per sensor over `stream`, in stream order.
pub fn detect(stream: &[TdcSample], cfg: DetectorConfig, baseline: u32) -> Vec<Alert> {
    let mut detectors: BTreeMap<usize, Detector> = BTreeMap::new();
    stream
        .iter()
        .filter_map(|s| detectors.entry(s.sensor).or_insert_with(|| Detector::new(cfg, baseline)).push(s))
        .collect()
}
