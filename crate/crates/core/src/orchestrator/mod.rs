//! Housekeeping controller: watches the sensors while the benchmark runs,
//! interrupts on an alert, diagnoses the ALU, and recovers either by
//! swapping to a program variant that avoids the faulty units or by
//! relocating the core on the fabric.
//!
//! Everything runs on one deterministic event loop. Time is counted in core
//! cycles; recovery work (diagnosis, signalling, reconfiguration) advances
//! the same clock, and the sensors keep sampling throughout.

mod sanity;
mod scenario;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::asm::Program;
use crate::benchmarks::ENTRY;
use crate::emulator::{load, FaultConfig, MachineState};
use crate::fabric::{FabricGrid, FootprintLibrary, PlacementId};
use crate::resynth::{generate_variants, instruction_units, select_variant, Selection, VariantId};
use crate::tdc::{calibrate, Alert, DisturbanceTrace, SensorArray};
use crate::unit::UnitSet;

pub use sanity::{sanity_check, SanityReport, UnitVerdict};
pub use scenario::{
    AlertRecord, AlertSource, DamageEvent, FaultEvent, LogEntry, Outcome, Relocation, SanityRecord, Scenario,
    ScenarioError, ScenarioReport, Seeds, TraceEntry, Transition, VariantSwap,
};

/// Core clock period (200 MHz), used to convert reconfiguration time.
pub const CLOCK_PERIOD_NS: u64 = 5;

/// Footprint of the processor placement.
pub const CORE_FOOTPRINT: &str = "rocket_core";
/// Footprint of the sensor placement.
pub const SENSOR_FOOTPRINT: &str = "tdc_sensors";

/// Samples drawn when calibrating the sensors at start-up.
const CALIBRATION_SAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Phase {
    Running,
    Alert,
    Diagnosing,
    SoftRecovery,
    HardRecovery,
    Recovered,
    Failed,
}

impl Phase {
    pub const ALL: [Phase; 7] = [
        Phase::Running,
        Phase::Alert,
        Phase::Diagnosing,
        Phase::SoftRecovery,
        Phase::HardRecovery,
        Phase::Recovered,
        Phase::Failed,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Phase::Running => "RUNNING",
            Phase::Alert => "ALERT",
            Phase::Diagnosing => "DIAGNOSING",
            Phase::SoftRecovery => "SOFT_RECOVERY",
            Phase::HardRecovery => "HARD_RECOVERY",
            Phase::Recovered => "RECOVERED",
            Phase::Failed => "FAILED",
        }
    }

    pub fn is_terminal(self) -> bool {
        self == Phase::Failed
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The legal phase transitions. Any non-terminal phase may also abort to
/// FAILED (cycle budget exhausted).
pub fn legal_transition(from: Phase, to: Phase) -> bool {
    use Phase::*;
    matches!(
        (from, to),
        (Running, Alert)
            | (Alert, Diagnosing)
            | (Diagnosing, SoftRecovery | HardRecovery | Running)
            | (SoftRecovery, Recovered | HardRecovery)
            | (HardRecovery, Recovered)
            | (Recovered, Running)
    ) || (to == Failed && !from.is_terminal())
}

/// Cycles needed for `ns` nanoseconds of work, rounded up.
pub fn ns_to_cycles(ns: u64) -> u64 {
    ns.div_ceil(CLOCK_PERIOD_NS)
}

/// The controller and everything it drives.
pub struct Orchestrator {
    scenario: Scenario,
    expected: u32,
    variants: [Program; 4],
    variant: VariantId,
    machine: MachineState,
    faults: FaultConfig,
    grid: FabricGrid,
    library: FootprintLibrary,
    sensors: SensorArray,
    phase: Phase,
    known_faulty: UnitSet,
    pending: Vec<AlertRecord>,
    now: u64,
    next_fault: usize,
    next_damage: usize,
    overhead: u64,
    report: ReportParts,
}

#[derive(Default)]
struct ReportParts {
    alerts: Vec<AlertRecord>,
    sanity: Vec<SanityRecord>,
    swaps: Vec<VariantSwap>,
    relocations: Vec<Relocation>,
    transitions: Vec<Transition>,
    log: Vec<LogEntry>,
    exit_code: Option<u32>,
    failure: Option<String>,
    finished: bool,
    recovered: bool,
}

impl Orchestrator {
    /// Calibrates the sensors, floorplans the fabric and loads V1.
    pub fn new(scenario: Scenario) -> Result<Self, ScenarioError> {
        scenario.validate()?;
        let setup = |e: &dyn fmt::Display| ScenarioError::Setup(e.to_string());
        let program = scenario.benchmark.program();
        let variants = generate_variants(&program).map_err(|e| setup(&e))?;
        let machine = load(&variants[0], ENTRY).map_err(|e| setup(&e))?;
        let tdc = calibrate(&scenario.tdc, CALIBRATION_SAMPLES, scenario.seeds.calibration).map_err(|e| setup(&e))?;
        let pulses = scenario.trace.iter().map(|t| t.pulse()).collect::<Result<Vec<_>, _>>()?;
        let trace = DisturbanceTrace::new(pulses, scenario.seeds.noise).map_err(|e| setup(&e))?;
        let sensors = SensorArray::new(tdc, scenario.sensors, scenario.attenuation, trace, scenario.detector);
        let library = FootprintLibrary::default();
        let mut grid = FabricGrid::new(scenario.fabric).map_err(|e| setup(&e))?;
        for name in [CORE_FOOTPRINT, SENSOR_FOOTPRINT] {
            grid.place(&library.get(name).expect("bundled footprint")).map_err(|e| setup(&e))?;
        }
        let mut o = Orchestrator {
            expected: scenario.benchmark.expected_exit(),
            scenario,
            variants,
            variant: VariantId::V1,
            machine,
            faults: FaultConfig::healthy(),
            grid,
            library,
            sensors,
            phase: Phase::Running,
            known_faulty: UnitSet::EMPTY,
            pending: Vec::new(),
            now: 0,
            next_fault: 0,
            next_damage: 0,
            overhead: 0,
            report: ReportParts::default(),
        };
        let floorplan: Vec<String> = o.grid.placements().map(|p| format!("{}={}", p.footprint, p.rect)).collect();
        o.log("start", format!("benchmark={} variant=V1 floorplan={}", o.scenario.benchmark, floorplan.join(";")));
        Ok(o)
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn machine(&self) -> &MachineState {
        &self.machine
    }

    pub fn grid(&self) -> &FabricGrid {
        &self.grid
    }

    fn log(&mut self, event: &str, detail: impl Into<String>) {
        self.report.log.push(LogEntry { cycle: self.now, event: event.to_string(), detail: detail.into() });
    }

    fn transition(&mut self, to: Phase) {
        let from = self.phase;
        assert!(legal_transition(from, to), "illegal transition {from} -> {to}");
        self.report.transitions.push(Transition { cycle: self.now, from, to });
        self.log("phase", format!("{from}->{to}"));
        self.phase = to;
    }

    fn fail(&mut self, reason: String) {
        self.log("failed", reason.clone());
        self.report.failure = Some(reason);
        self.transition(Phase::Failed);
        self.report.finished = true;
    }

    /// Applies fault and damage events due at the current cycle.
    fn apply_events(&mut self) {
        while let Some(e) = self.scenario.unit_faults.get(self.next_fault).filter(|e| e.cycle <= self.now).cloned() {
            self.next_fault += 1;
            self.faults.set(e.unit, e.fault);
            self.log("fault_injected", format!("unit={} {:?}", e.unit, e.fault));
        }
        while let Some(d) = self.scenario.damage.get(self.next_damage).filter(|e| e.cycle <= self.now).cloned() {
            self.next_damage += 1;
            let region = match (&d.region, &d.placement) {
                (Some(r), _) => Some(*r),
                (None, Some(name)) => self.placement_by_name(name).map(|id| self.grid.placement(id).unwrap().rect),
                (None, None) => None,
            };
            match region.map(|r| (r, self.grid.damage(r))) {
                Some((r, Ok(affected))) => {
                    let affected: Vec<String> = affected.iter().map(|id| id.to_string()).collect();
                    self.log("damage", format!("region={r} affected=[{}]", affected.join(",")));
                }
                Some((r, Err(e))) => self.log("damage_ignored", format!("region={r}: {e}")),
                None => self.log("damage_ignored", format!("unknown placement {:?}", d.placement)),
            }
        }
    }

    fn placement_by_name(&self, name: &str) -> Option<PlacementId> {
        let footprint = match name {
            "core" => CORE_FOOTPRINT,
            "tdc" | "sensors" => SENSOR_FOOTPRINT,
            other => other,
        };
        self.grid.find(footprint).map(|p| p.id)
    }

    /// Advances the clock by `cycles`, sampling the sensors each cycle.
    fn advance(&mut self, cycles: u64) {
        for _ in 0..cycles {
            let (_, alerts) = self.sensors.poll(self.now);
            for a in alerts {
                self.raise(a);
            }
            self.now += 1;
        }
    }

    fn raise(&mut self, a: Alert) {
        let rec = AlertRecord {
            cycle: self.now,
            source: AlertSource::Sensor,
            sensor: Some(a.sensor),
            peak_deviation: a.peak_deviation,
        };
        self.log("alert", format!("sensor={} t={} peak_deviation={}", a.sensor, a.t, a.peak_deviation));
        self.report.alerts.push(rec.clone());
        self.pending.push(rec);
    }

    /// Recovery overhead: advances the clock and accounts it separately.
    fn spend(&mut self, cycles: u64) {
        self.overhead += cycles;
        self.advance(cycles);
    }

    /// Handles an alert. While RUNNING, the core is interrupted at the
    /// current instruction boundary and diagnosed; otherwise the alert is
    /// queued for the next time the core is running.
    pub fn on_alert(&mut self, alert: AlertRecord) {
        self.pending.push(alert);
        if self.phase == Phase::Running {
            self.service_alerts();
        }
    }

    /// One diagnosis pass for every alert queued so far.
    fn service_alerts(&mut self) {
        let batch = std::mem::take(&mut self.pending);
        if batch.is_empty() {
            return;
        }
        let watchdog = batch.iter().any(|a| a.source == AlertSource::Watchdog);
        self.transition(Phase::Alert);
        let snapshot = self.machine.clone();
        self.log("nmi", format!("alerts={} pc={:#010x} retired={}", batch.len(), snapshot.pc, snapshot.retired));
        self.spend(self.scenario.uart_latency_cycles);
        self.transition(Phase::Diagnosing);
        let report = sanity_check(&self.faults, &self.scenario.cost);
        self.spend(report.cycles);
        self.log("sanity_report", report.summary());
        let faulty = report.failed();
        self.report.sanity.push(SanityRecord { cycle: self.now, report });
        self.known_faulty = self.known_faulty.union(faulty);
        let damaged = self.damaged_placements();

        if faulty.is_empty() && damaged.is_empty() && !watchdog {
            self.log("near_miss", "sanity clean; resuming from snapshot");
            self.machine = snapshot;
            self.transition(Phase::Running);
            return;
        }
        if damaged.is_empty() {
            if let Selection::Variant(v) = select_variant(self.known_faulty) {
                let needs = instruction_units(&self.variants[v as usize]);
                if needs.is_disjoint(self.known_faulty) && !(watchdog && faulty.is_empty()) {
                    self.soft_recover(v);
                    return;
                }
            }
        }
        self.transition(Phase::HardRecovery);
        self.hard_recover();
    }

    fn damaged_placements(&self) -> Vec<PlacementId> {
        self.grid.placements().filter(|p| self.grid.overlaps_damage(&p.rect)).map(|p| p.id).collect()
    }

    fn soft_recover(&mut self, v: VariantId) {
        self.transition(Phase::SoftRecovery);
        self.spend(self.scenario.uart_latency_cycles);
        self.report.swaps.push(VariantSwap { cycle: self.now, from: self.variant, to: v });
        self.log("variant_swap", format!("{}->{} faulty={}", self.variant, v, self.known_faulty));
        self.variant = v;
        self.restart();
    }

    /// Relocates damaged placements (or the core, if nothing is damaged),
    /// replaces the faulty silicon and restarts the original program.
    fn hard_recover(&mut self) {
        self.spend(self.scenario.uart_latency_cycles);
        let mut targets = self.damaged_placements();
        if targets.is_empty() {
            targets.extend(self.placement_by_name("core"));
        }
        for id in targets {
            let old = self.grid.placement(id).expect("placement exists").clone();
            let footprint = self.library.get(&old.footprint).expect("known footprint");
            match self.grid.relocate(id, &footprint) {
                Ok((new, cost)) => {
                    self.log("relocation", format!("{} {}->{} tiles={} ns={}", old.footprint, old.rect, new.rect, cost.tiles, cost.time_ns));
                    self.report.relocations.push(Relocation {
                        cycle: self.now,
                        footprint: old.footprint.clone(),
                        from: old.rect,
                        to: new.rect,
                        cost,
                    });
                    self.spend(ns_to_cycles(cost.time_ns));
                }
                Err(e) => {
                    self.fail(format!("relocation failed: {e}"));
                    return;
                }
            }
        }
        self.faults.clear();
        self.known_faulty = UnitSet::EMPTY;
        let check = sanity_check(&self.faults, &self.scenario.cost);
        self.spend(check.cycles);
        self.log("sanity_report", check.summary());
        let clean = check.all_pass();
        self.report.sanity.push(SanityRecord { cycle: self.now, report: check });
        if !clean {
            self.fail("relocated core failed its sanity check".into());
            return;
        }
        if self.variant != VariantId::V1 {
            self.report.swaps.push(VariantSwap { cycle: self.now, from: self.variant, to: VariantId::V1 });
            self.log("variant_swap", format!("{}->V1 after reconfiguration", self.variant));
            self.variant = VariantId::V1;
        }
        self.restart();
    }

    fn restart(&mut self) {
        self.machine = load(&self.variants[self.variant as usize], ENTRY).expect("variant loads");
        self.log("restart", format!("variant={} entry={ENTRY}", self.variant));
    }

    /// Executes one instruction and handles what follows from it.
    fn step(&mut self) {
        match self.machine.step(&self.faults, &self.scenario.cost) {
            Ok(info) => {
                self.advance(info.cycles as u64);
                if self.machine.halted {
                    self.on_exit(self.machine.exit_code.unwrap_or_default());
                }
            }
            Err(trap) => {
                self.log("trap", trap.to_string());
                match self.phase {
                    Phase::Running => {
                        let rec = AlertRecord { cycle: self.now, source: AlertSource::Watchdog, sensor: None, peak_deviation: 0 };
                        self.log("alert", "watchdog");
                        self.report.alerts.push(rec.clone());
                        self.pending.push(rec);
                    }
                    Phase::SoftRecovery => {
                        self.transition(Phase::HardRecovery);
                        self.hard_recover();
                    }
                    _ => self.fail(format!("trap during {}: {trap}", self.phase)),
                }
            }
        }
    }

    fn on_exit(&mut self, code: u32) {
        let correct = code == self.expected;
        self.report.exit_code = Some(code);
        self.log("exit", format!("code={code:#010x} expected={:#010x} correct={correct}", self.expected));
        match self.phase {
            Phase::Running => self.report.finished = true,
            Phase::SoftRecovery if correct => {
                self.transition(Phase::Recovered);
                self.report.recovered = true;
                self.report.finished = true;
            }
            Phase::SoftRecovery => {
                self.transition(Phase::HardRecovery);
                self.hard_recover();
            }
            Phase::HardRecovery if correct => {
                self.transition(Phase::Recovered);
                self.report.recovered = true;
                self.report.finished = true;
            }
            _ => self.fail("wrong result after reconfiguration".into()),
        }
    }

    /// Runs the event loop to completion.
    pub fn run(mut self) -> ScenarioReport {
        while !self.report.finished {
            if self.now >= self.scenario.max_cycles {
                self.fail(format!("cycle limit {} reached", self.scenario.max_cycles));
                break;
            }
            self.apply_events();
            if self.phase == Phase::Running && !self.pending.is_empty() {
                self.service_alerts();
                continue;
            }
            self.step();
        }
        self.finish()
    }

    fn finish(self) -> ScenarioReport {
        let r = self.report;
        let correct = r.exit_code == Some(self.expected) && self.phase != Phase::Failed;
        let outcome = match self.phase {
            Phase::Failed => Outcome::Failed,
            _ if r.recovered => Outcome::Recovered,
            _ => Outcome::Completed,
        };
        ScenarioReport {
            benchmark: self.scenario.benchmark,
            outcome,
            final_phase: self.phase,
            correct,
            exit_code: r.exit_code,
            expected_exit: self.expected,
            final_variant: self.variant,
            alerts: r.alerts,
            sanity_reports: r.sanity,
            variant_swaps: r.swaps,
            relocations: r.relocations,
            transitions: r.transitions,
            total_cycles: self.now,
            recovery_overhead_cycles: self.overhead,
            program_cycles: self.machine.cycles,
            failure_reason: r.failure,
            log: r.log,
        }
    }
}

/// Builds and runs a scenario.
pub fn run_scenario(s: &Scenario) -> Result<ScenarioReport, ScenarioError> {
    Ok(Orchestrator::new(s.clone())?.run())
}
