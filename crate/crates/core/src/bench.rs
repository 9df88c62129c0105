//! Code-size and cycle overhead of the four variants of each benchmark.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::benchmarks::{Benchmark, ENTRY};
use crate::emulator::{load, run, CostModel, FaultConfig, LoadError, Termination};
use crate::resynth::{generate_variants, ResynthError, VariantId};

/// Cycle budget for one fault-free benchmark run.
pub const BENCH_MAX_CYCLES: u64 = 100_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BenchResult {
    pub benchmark: Benchmark,
    pub variant: VariantId,
    pub code_bytes: u32,
    pub data_bytes: u32,
    pub cycles: u64,
    pub instructions: u64,
    pub correct: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Resynth(#[from] ResynthError),
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error("{benchmark} {variant}: expected exit {expected:#010x}, run ended with {termination:?}")]
    Incorrect { benchmark: Benchmark, variant: VariantId, expected: u32, termination: Termination },
    #[error("no results to emit")]
    Empty,
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Measures every variant of `benchmark` fault-free.
pub fn bench_one(benchmark: Benchmark, cost: &CostModel) -> Result<Vec<BenchResult>, BenchError> {
    let expected = benchmark.expected_exit();
    let variants = generate_variants(&benchmark.program())?;
    VariantId::ALL
        .into_iter()
        .zip(variants)
        .map(|(variant, p)| {
            let r = run(load(&p, ENTRY)?, &FaultConfig::healthy(), cost, BENCH_MAX_CYCLES);
            if r.exit_code() != Some(expected) {
                return Err(BenchError::Incorrect { benchmark, variant, expected, termination: r.termination });
            }
            Ok(BenchResult {
                benchmark,
                variant,
                code_bytes: p.code_size_bytes(),
                data_bytes: p.data_size_bytes(),
                cycles: r.cycles,
                instructions: r.retired,
                correct: true,
            })
        })
        .collect()
}

/// All variants of every benchmark in `suite`, sorted by (benchmark, variant).
pub fn bench(suite: &[Benchmark], cost: &CostModel) -> Result<Vec<BenchResult>, BenchError> {
    let mut rows = Vec::new();
    for b in suite {
        rows.extend(bench_one(*b, cost)?);
    }
    rows.sort_by_key(|r| (r.benchmark, r.variant));
    Ok(rows)
}

/// Writes `benchmark,variant,code_bytes,data_bytes,cycles,instructions,correct`.
pub fn write_csv<W: Write>(results: &[BenchResult], out: W) -> Result<(), BenchError> {
    if results.is_empty() {
        return Err(BenchError::Empty);
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["benchmark", "variant", "code_bytes", "data_bytes", "cycles", "instructions", "correct"])?;
    for r in results {
        w.write_record([
            r.benchmark.name().to_string(),
            r.variant.name().to_string(),
            r.code_bytes.to_string(),
            r.data_bytes.to_string(),
            r.cycles.to_string(),
            r.instructions.to_string(),
            r.correct.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit(results: &[BenchResult], path: &Path) -> Result<(), BenchError> {
    if results.is_empty() {
        return Err(BenchError::Empty);
    }
    write_csv(results, std::fs::File::create(path)?)
}

/// Row lookup helper.
pub fn find(results: &[BenchResult], b: Benchmark, v: VariantId) -> Option<&BenchResult> {
    results.iter().find(|r| r.benchmark == b && r.variant == v)
}
