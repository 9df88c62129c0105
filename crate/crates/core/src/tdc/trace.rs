use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Which sensor a disturbance is centered on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum SensorScope {
    /// Full amplitude at every sensor.
    #[default]
    Global,
    /// Full amplitude at sensor `i`, attenuated elsewhere.
    Near(usize),
}

impl SensorScope {
    /// Amplitude factor seen by `sensor`.
    pub fn gain(self, sensor: usize, attenuation: f64) -> f64 {
        match self {
            SensorScope::Global => 1.0,
            SensorScope::Near(i) if i == sensor => 1.0,
            SensorScope::Near(_) => attenuation,
        }
    }
}

impl fmt::Display for SensorScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SensorScope::Global => f.write_str("global"),
            SensorScope::Near(i) => write!(f, "sensor{i}"),
        }
    }
}

impl FromStr for SensorScope {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "global" {
            return Ok(SensorScope::Global);
        }
        s.strip_prefix("sensor")
            .and_then(|i| i.parse().ok())
            .map(SensorScope::Near)
            .ok_or_else(|| format!("bad sensor scope `{s}` (expected global or sensorN)"))
    }
}

impl Serialize for SensorScope {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SensorScope {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Named disturbance amplitudes, standing in for laser exposure levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Below the fault threshold (1 A equivalent).
    Radiate,
    /// Transient-fault level (1.5 A equivalent).
    Softfault,
    /// Permanent-fault level (2.5 A equivalent).
    Hardfault,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Radiate, Preset::Softfault, Preset::Hardfault];

    pub fn dv_mv(self) -> f64 {
        match self {
            Preset::Radiate => 50.0,
            Preset::Softfault => 75.0,
            Preset::Hardfault => 125.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::Radiate => "radiate",
            Preset::Softfault => "softfault",
            Preset::Hardfault => "hardfault",
        }
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown preset `{s}` (expected radiate, softfault or hardfault)"))
    }
}

/// One rectangular disturbance pulse over `[t_start, t_end)` core cycles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pulse {
    #[serde(rename = "t_start_cycles")]
    pub t_start: f64,
    #[serde(rename = "t_end_cycles")]
    pub t_end: f64,
    pub dv_mv: f64,
    #[serde(rename = "sensor_scope", default)]
    pub scope: SensorScope,
}

impl Pulse {
    pub fn preset(t_start: f64, t_end: f64, preset: Preset, scope: SensorScope) -> Self {
        Pulse { t_start, t_end, dv_mv: preset.dv_mv(), scope }
    }

    pub fn active(&self, t: f64) -> bool {
        self.t_start <= t && t < self.t_end
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("pulse {index}: start {t_start} is not before end {t_end}")]
    Empty { index: usize, t_start: f64, t_end: f64 },
    #[error("pulse {index} overlaps the previous pulse")]
    Overlap { index: usize },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Time-ordered, non-overlapping pulses plus the seed for sensor noise.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DisturbanceTrace {
    pub pulses: Vec<Pulse>,
    #[serde(default)]
    pub noise_seed: u64,
}

impl DisturbanceTrace {
    /// Sorts by start time and checks the invariants.
    pub fn new(mut pulses: Vec<Pulse>, noise_seed: u64) -> Result<Self, TraceError> {
        pulses.sort_by(|a, b| a.t_start.total_cmp(&b.t_start));
        for (index, p) in pulses.iter().enumerate() {
            if p.t_start.partial_cmp(&p.t_end) != Some(std::cmp::Ordering::Less) {
                return Err(TraceError::Empty { index, t_start: p.t_start, t_end: p.t_end });
            }
            if index > 0 && pulses[index - 1].t_end > p.t_start {
                return Err(TraceError::Overlap { index });
            }
        }
        Ok(DisturbanceTrace { pulses, noise_seed })
    }

    /// Disturbance seen by `sensor` at time `t`.
    pub fn dv_at(&self, t: f64, sensor: usize, attenuation: f64) -> f64 {
        // pulses are sorted; the last one starting at or before t is the candidate
        let idx = self.pulses.partition_point(|p| p.t_start <= t);
        match idx.checked_sub(1).map(|i| &self.pulses[i]) {
            Some(p) if p.active(t) => p.dv_mv * p.scope.gain(sensor, attenuation),
            _ => 0.0,
        }
    }

    /// Reads `t_start_cycles,t_end_cycles,dv_mv,sensor_scope`.
    pub fn read_csv(input: impl Read, noise_seed: u64) -> Result<Self, TraceError> {
        let pulses = csv::Reader::from_reader(input).deserialize().collect::<Result<Vec<Pulse>, _>>()?;
        Self::new(pulses, noise_seed)
    }

    pub fn write_csv(&self, out: impl Write) -> Result<(), TraceError> {
        let mut w = csv::Writer::from_writer(out);
        if self.pulses.is_empty() {
            w.write_record(["t_start_cycles", "t_end_cycles", "dv_mv", "sensor_scope"])?;
        }
        for p in &self.pulses {
            w.serialize(p)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}
