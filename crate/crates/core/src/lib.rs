//! Simulation of a self-repairing RV32IM soft core: assembler and emulator
//! with a fault-injectable ALU, instruction-substitution passes, delay-line
//! voltage sensors, a reconfigurable fabric model, and the controller that
//! ties them together.

pub mod asm;
pub mod bench;
pub mod benchmarks;
pub mod emulator;
pub mod fabric;
pub mod orchestrator;
pub mod resynth;
pub mod tdc;
pub mod unit;

pub use asm::{parse_program, print_program, AsmError, Instruction, Item, Mnemonic, Program, Reg};
pub use bench::{bench, BenchResult};
pub use benchmarks::Benchmark;
pub use emulator::{load, run, FaultConfig, FaultKind, MachineState, RunResult, Termination, Trap, UnitFault};
pub use fabric::{FabricConfig, FabricGrid, Footprint, FootprintLibrary, Rect};
pub use orchestrator::{run_scenario, Outcome, Phase, Scenario, ScenarioReport};
pub use resynth::{generate_variants, select_variant, Pass, Selection, VariantId};
pub use tdc::{DetectorConfig, DisturbanceTrace, SensorArray, TdcConfig};
pub use unit::{Unit, UnitSet};
