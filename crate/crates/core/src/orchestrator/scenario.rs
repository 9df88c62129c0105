use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::benchmarks::Benchmark;
use crate::emulator::{CostModel, UnitFault};
use crate::fabric::{FabricConfig, Rect, ReconfigCost};
use crate::resynth::VariantId;
use crate::tdc::{DetectorConfig, Preset, Pulse, SensorScope, TdcConfig};
use crate::unit::Unit;

use super::{Phase, SanityReport};

/// One disturbance pulse; the amplitude is either explicit or a preset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub t_start_cycles: f64,
    pub t_end_cycles: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dv_mv: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<Preset>,
    #[serde(default)]
    pub sensor_scope: SensorScope,
}

impl TraceEntry {
    pub fn pulse(&self) -> Result<Pulse, ScenarioError> {
        let dv_mv = match (self.dv_mv, self.preset) {
            (Some(dv), None) => dv,
            (None, Some(p)) => p.dv_mv(),
            _ => return Err(ScenarioError::Invalid("trace entry needs exactly one of dv_mv or preset".into())),
        };
        Ok(Pulse { t_start: self.t_start_cycles, t_end: self.t_end_cycles, dv_mv, scope: self.sensor_scope })
    }
}

/// A unit fault that appears at `cycle`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultEvent {
    pub cycle: u64,
    pub unit: Unit,
    #[serde(flatten)]
    pub fault: UnitFault,
}

/// Permanent fabric damage at `cycle`, given as a tile rectangle or as the
/// current rectangle of a named placement (`core`, `tdc`, or a footprint).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DamageEvent {
    pub cycle: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<Rect>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub placement: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Seeds {
    /// Sensor jitter stream.
    pub noise: u64,
    /// Jitter draw used while calibrating.
    pub calibration: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds { noise: 1, calibration: 2 }
    }
}

fn default_max_cycles() -> u64 {
    5_000_000
}

fn default_sensors() -> usize {
    2
}

fn default_attenuation() -> f64 {
    crate::tdc::DEFAULT_ATTENUATION
}

/// A scripted run: benchmark, disturbances, timed faults and damage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub benchmark: Benchmark,
    #[serde(default)]
    pub trace: Vec<TraceEntry>,
    #[serde(default)]
    pub unit_faults: Vec<FaultEvent>,
    #[serde(default)]
    pub damage: Vec<DamageEvent>,
    #[serde(default)]
    pub seeds: Seeds,
    #[serde(default = "default_max_cycles")]
    pub max_cycles: u64,
    #[serde(default)]
    pub fabric: FabricConfig,
    #[serde(default)]
    pub tdc: TdcConfig,
    #[serde(default)]
    pub detector: DetectorConfig,
    #[serde(default = "default_sensors")]
    pub sensors: usize,
    #[serde(default = "default_attenuation")]
    pub attenuation: f64,
    #[serde(default)]
    pub uart_latency_cycles: u64,
    #[serde(default)]
    pub cost: CostModel,
}

impl Scenario {
    /// A scenario with no events and default settings.
    pub fn new(benchmark: Benchmark) -> Self {
        Scenario {
            benchmark,
            trace: Vec::new(),
            unit_faults: Vec::new(),
            damage: Vec::new(),
            seeds: Seeds::default(),
            max_cycles: default_max_cycles(),
            fabric: FabricConfig::default(),
            tdc: TdcConfig::default(),
            detector: DetectorConfig::default(),
            sensors: default_sensors(),
            attenuation: default_attenuation(),
            uart_latency_cycles: 0,
            cost: CostModel::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let invalid = |m: String| Err(ScenarioError::Invalid(m));
        if self.max_cycles == 0 {
            return invalid("max_cycles must be positive".into());
        }
        if self.sensors == 0 {
            return invalid("at least one sensor is required".into());
        }
        if !(0.0..=1.0).contains(&self.attenuation) {
            return invalid("attenuation must be within [0, 1]".into());
        }
        if !self.unit_faults.is_sorted_by_key(|e| e.cycle) || !self.damage.is_sorted_by_key(|e| e.cycle) {
            return invalid("fault and damage events must be in time order".into());
        }
        for e in &self.unit_faults {
            e.fault.validate().or_else(|m| invalid(format!("fault at cycle {}: {m}", e.cycle)))?;
        }
        for d in &self.damage {
            if d.region.is_some() == d.placement.is_some() {
                return invalid(format!("damage at cycle {} needs exactly one of region or placement", d.cycle));
            }
        }
        for t in &self.trace {
            t.pulse()?;
        }
        self.cost.validate().map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        self.tdc.validate().map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        if self.detector.threshold == 0 || self.detector.persistence == 0 {
            return invalid("detector threshold and persistence must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScenarioError {
    #[error("cannot parse scenario: {0}")]
    Parse(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("setup failed: {0}")]
    Setup(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlertSource {
    Sensor,
    /// Raised by the core trapping, with no sensor involved.
    Watchdog,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlertRecord {
    pub cycle: u64,
    pub source: AlertSource,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sensor: Option<usize>,
    pub peak_deviation: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SanityRecord {
    pub cycle: u64,
    pub report: SanityReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSwap {
    pub cycle: u64,
    pub from: VariantId,
    pub to: VariantId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Relocation {
    pub cycle: u64,
    pub footprint: String,
    pub from: Rect,
    pub to: Rect,
    pub cost: ReconfigCost,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub cycle: u64,
    pub from: Phase,
    pub to: Phase,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogEntry {
    pub cycle: u64,
    pub event: String,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    /// Finished without any recovery.
    Completed,
    Recovered,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub benchmark: Benchmark,
    pub outcome: Outcome,
    pub final_phase: Phase,
    /// Exit value of the final program run matches the host oracle.
    pub correct: bool,
    pub exit_code: Option<u32>,
    pub expected_exit: u32,
    pub final_variant: VariantId,
    pub alerts: Vec<AlertRecord>,
    pub sanity_reports: Vec<SanityRecord>,
    pub variant_swaps: Vec<VariantSwap>,
    pub relocations: Vec<Relocation>,
    pub transitions: Vec<Transition>,
    /// Cycles from start to finish, recovery included.
    pub total_cycles: u64,
    /// Cycles spent in diagnosis, signalling and reconfiguration.
    pub recovery_overhead_cycles: u64,
    /// Cycles of the final program run alone.
    pub program_cycles: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure_reason: Option<String>,
    pub log: Vec<LogEntry>,
}

impl ScenarioReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Writes the event log as CSV `cycle,event,detail`.
    pub fn write_log_csv(&self, out: impl Write) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["cycle", "event", "detail"])?;
        for e in &self.log {
            w.write_record([e.cycle.to_string(), e.event.clone(), e.detail.clone()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn log_csv(&self) -> String {
        let mut out = Vec::new();
        self.write_log_csv(&mut out).expect("writing to memory");
        String::from_utf8(out).expect("csv is utf-8")
    }
}
