//! Fixtures shared by the criterion benches.

use reforge::benchmarks::Benchmark;
use reforge::emulator::{FaultKind, UnitFault};
use reforge::fabric::{FabricConfig, FabricGrid, FootprintLibrary};
use reforge::orchestrator::{FaultEvent, Scenario, TraceEntry};
use reforge::tdc::{calibrate, DetectorConfig, DisturbanceTrace, Preset, SensorArray, SensorScope, TdcConfig};
use reforge::unit::Unit;

/// mac with a hardfault pulse and a dead multiplier at cycle 10 000.
pub fn soft_recovery_scenario() -> Scenario {
    let mut s = Scenario::new(Benchmark::Mac);
    s.trace.push(TraceEntry {
        t_start_cycles: 10_000.0,
        t_end_cycles: 10_200.0,
        dv_mv: None,
        preset: Some(Preset::Hardfault),
        sensor_scope: SensorScope::Global,
    });
    s.unit_faults.push(FaultEvent { cycle: 10_000, unit: Unit::Mul, fault: UnitFault::new(FaultKind::Disabled) });
    s
}

/// Two calibrated sensors with no disturbance.
pub fn quiet_array(seed: u64) -> SensorArray {
    let cfg = calibrate(&TdcConfig::default(), 1000, 2).expect("default config calibrates");
    let trace = DisturbanceTrace::new(Vec::new(), seed).expect("empty trace is valid");
    SensorArray::new(cfg, 2, reforge::tdc::DEFAULT_ATTENUATION, trace, DetectorConfig::default())
}

/// Default-size fabric with the core and sensors placed.
pub fn floorplan() -> FabricGrid {
    let lib = FootprintLibrary::default();
    let mut g = FabricGrid::new(FabricConfig::default()).expect("default grid");
    for name in ["rocket_core", "tdc_sensors"] {
        g.place(&lib.get(name).expect("bundled")).expect("fits");
    }
    g
}
