use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use reforge::asm::{parse_program, print_program_styled, PrintStyle, Program};
use reforge::bench::{bench, write_csv};
use reforge::benchmarks::{Benchmark, ENTRY};
use reforge::emulator::{load, run_observed, CostModel, FaultConfig, Termination, TraceWriter};
use reforge::fabric::{parse_dims, FabricConfig, FabricGrid, FootprintLibrary, Rect};
use reforge::orchestrator::{run_scenario, Scenario, CORE_FOOTPRINT, SENSOR_FOOTPRINT};
use reforge::resynth::{generate_variant, translate, Pass, VariantId};
use reforge::tdc::{calibrate, write_samples, DetectorConfig, DisturbanceTrace, SensorArray, TdcConfig};

/// Exit codes by error class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Category {
    /// Malformed input: assembly, fault configs, traces, scenarios.
    Input = 3,
    Io = 4,
    /// A translation pass refused the program.
    Translate = 5,
    /// The program trapped, ran out of cycles or computed a wrong result.
    Execution = 6,
    /// No room on the fabric.
    Placement = 7,
}

#[derive(Debug)]
struct Failure {
    category: Category,
    error: anyhow::Error,
}

type CliResult<T = ()> = Result<T, Failure>;

trait Categorize<T> {
    fn or_fail(self, category: Category) -> CliResult<T>;
}

impl<T, E: Into<anyhow::Error>> Categorize<T> for Result<T, E> {
    fn or_fail(self, category: Category) -> CliResult<T> {
        self.map_err(|e| Failure { category, error: e.into() })
    }
}

#[derive(Parser)]
#[command(name = "reforge", version, about = "Fault detection and recovery for a simulated RV32IM soft core")]
struct Cli {
    /// Seed for sensor noise (overrides scenario and trace seeds).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write the main output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rewrite an assembly program with substitution passes.
    Translate {
        input: PathBuf,
        /// Comma-separated passes, applied left to right.
        #[arg(long, conflicts_with = "variant")]
        passes: Option<String>,
        /// Shorthand for a variant's pass list (V1-V4).
        #[arg(long)]
        variant: Option<VariantId>,
        /// Print pseudo-instructions where they fit.
        #[arg(long)]
        folded: bool,
    },
    /// Execute a program on the emulator.
    Run {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value = "V1")]
        variant: VariantId,
        /// Fault configuration (`unit=MUL fault=stuck_at bit=3 value=1` per line).
        #[arg(long)]
        faults: Option<PathBuf>,
        /// Write an execution trace CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long, default_value_t = 100_000_000)]
        max_cycles: u64,
        #[arg(long, default_value = ENTRY)]
        entry: String,
    },
    /// Sample the sensor array under a disturbance trace.
    Sense {
        /// Disturbance trace CSV (`t_start_cycles,t_end_cycles,dv_mv,sensor_scope`).
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long, default_value_t = 2000)]
        cycles: u64,
        #[arg(long, default_value_t = 2)]
        sensors: usize,
        #[arg(long, default_value_t = reforge::tdc::DEFAULT_ATTENUATION)]
        attenuation: f64,
        /// Jitter standard deviation in ps.
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long, default_value_t = 8)]
        threshold: u32,
        #[arg(long, default_value_t = 3)]
        persistence: u32,
        /// Write the alert list as JSON.
        #[arg(long)]
        alerts: Option<PathBuf>,
    },
    /// Floorplan the core and sensors, apply damage and relocate.
    Fabric {
        #[arg(long, default_value = "40x60")]
        grid: String,
        #[arg(long, default_value_t = 50)]
        tile_luts: u32,
        #[arg(long, default_value_t = 100)]
        tile_ffs: u32,
        /// Footprint library JSON (defaults to the published utilisation).
        #[arg(long)]
        footprints: Option<PathBuf>,
        /// Damaged region `WxH@X,Y`; repeatable.
        #[arg(long)]
        damage: Vec<Rect>,
    },
    /// Run a scenario file through the recovery controller.
    Orchestrate {
        scenario: PathBuf,
        /// Write the flat event log CSV (`cycle,event,detail`).
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Measure code size and cycles of every variant.
    Bench {
        /// Comma-separated benchmarks.
        #[arg(long, default_value = "mac,rs_encode", value_delimiter = ',')]
        benchmarks: Vec<Benchmark>,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// Assembly file.
    input: Option<PathBuf>,
    /// Bundled benchmark (mac, rs_encode).
    #[arg(long)]
    benchmark: Option<Benchmark>,
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).or_fail(Category::Io)
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display())).or_fail(Category::Io)
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> CliResult {
    match out {
        Some(p) => write_file(p, bytes),
        None => io::stdout().write_all(bytes).or_fail(Category::Io),
    }
}

fn assembly(path: &Path) -> CliResult<Program> {
    parse_program(&read(path)?).with_context(|| path.display().to_string()).or_fail(Category::Input)
}

fn translate_cmd(cli: &Cli, input: &Path, passes: Option<&str>, variant: Option<VariantId>, folded: bool) -> CliResult {
    let p = assembly(input)?;
    let passes = match (passes, variant) {
        (Some(list), _) => Pass::parse_list(list).or_fail(Category::Input)?,
        (None, Some(v)) => v.passes().to_vec(),
        (None, None) => Vec::new(),
    };
    let t = translate(&p, &passes).or_fail(Category::Translate)?;
    let style = if folded { PrintStyle::Folded } else { PrintStyle::Expanded };
    emit(cli.out.as_deref(), print_program_styled(&t, style).as_bytes())
}

struct RunOpts<'a> {
    source: &'a Source,
    variant: VariantId,
    faults: Option<&'a Path>,
    trace: Option<&'a Path>,
    max_cycles: u64,
    entry: &'a str,
}

fn run_cmd(cli: &Cli, o: RunOpts) -> CliResult {
    let (base, expected) = match (&o.source.input, o.source.benchmark) {
        (Some(path), _) => (assembly(path)?, None),
        (None, Some(b)) => (b.program(), Some(b.expected_exit())),
        (None, None) => unreachable!("clap requires a source"),
    };
    let p = generate_variant(&base, o.variant).or_fail(Category::Translate)?;
    let faults = match o.faults {
        Some(path) => FaultConfig::parse(&read(path)?).or_fail(Category::Input)?,
        None => FaultConfig::healthy(),
    };
    let state = load(&p, o.entry).or_fail(Category::Input)?;
    let mut trace = match o.trace {
        Some(path) => Some(TraceWriter::new(fs::File::create(path).or_fail(Category::Io)?).or_fail(Category::Io)?),
        None => None,
    };
    let mut trace_err = None;
    let r = run_observed(state, &faults, &CostModel::default(), o.max_cycles, |step, _| {
        if let Some(w) = trace.as_mut() {
            if let Err(e) = w.record(step) {
                trace_err.get_or_insert(e);
            }
        }
    });
    if let Some(e) = trace_err {
        return Err(e).or_fail(Category::Io);
    }
    if let Some(w) = trace {
        w.finish().or_fail(Category::Io)?;
    }
    let correct = expected.map(|e| r.exit_code() == Some(e));
    let report = json!({
        "variant": o.variant,
        "termination": r.termination,
        "exit_code": r.exit_code(),
        "expected_exit": expected,
        "correct": correct,
        "cycles": r.cycles,
        "retired": r.retired,
        "code_bytes": p.code_size_bytes(),
        "data_bytes": p.data_size_bytes(),
    });
    emit(cli.out.as_deref(), format!("{report:#}\n").as_bytes())?;
    match r.termination {
        Termination::Exit { .. } if correct != Some(false) => Ok(()),
        Termination::Exit { .. } => Err(anyhow::anyhow!("wrong result")).or_fail(Category::Execution),
        t => Err(anyhow::anyhow!("run did not exit: {t:?}")).or_fail(Category::Execution),
    }
}

struct SenseOpts<'a> {
    trace: Option<&'a Path>,
    cycles: u64,
    sensors: usize,
    attenuation: f64,
    sigma: Option<f64>,
    det: DetectorConfig,
    alerts: Option<&'a Path>,
}

fn sense_cmd(cli: &Cli, o: SenseOpts) -> CliResult {
    let seed = cli.seed.unwrap_or(1);
    let trace = match o.trace {
        Some(path) => DisturbanceTrace::read_csv(read(path)?.as_bytes(), seed).or_fail(Category::Input)?,
        None => DisturbanceTrace::new(Vec::new(), seed).or_fail(Category::Input)?,
    };
    let mut cfg = TdcConfig::default();
    if let Some(s) = o.sigma {
        cfg.sigma_ps = s;
    }
    let cfg = calibrate(&cfg, 1000, seed.wrapping_add(1)).or_fail(Category::Input)?;
    let mut array = SensorArray::new(cfg, o.sensors, o.attenuation, trace, o.det);
    let (mut samples, mut alerts) = (Vec::new(), Vec::new());
    for c in 0..o.cycles {
        let (s, a) = array.poll(c);
        samples.extend(s);
        alerts.extend(a);
    }
    let mut csv = Vec::new();
    write_samples(&samples, &mut csv).or_fail(Category::Io)?;
    emit(cli.out.as_deref(), &csv)?;
    let summary = json!({ "baseline": cfg.baseline(), "d0_ps": cfg.d0_ps, "alerts": alerts });
    match o.alerts {
        Some(p) => write_file(p, format!("{summary:#}\n").as_bytes()),
        None => {
            eprintln!("{} alerts", alerts.len());
            Ok(())
        }
    }
}

fn fabric_cmd(cli: &Cli, grid: &str, tile_luts: u32, tile_ffs: u32, footprints: Option<&Path>, damage: &[Rect]) -> CliResult {
    let (width, height) =
        parse_dims(grid).ok_or_else(|| anyhow::anyhow!("bad grid `{grid}` (want WxH)")).or_fail(Category::Input)?;
    let cfg = FabricConfig { width, height, tile_luts, tile_ffs, ..FabricConfig::default() };
    let lib = match footprints {
        Some(p) => FootprintLibrary::from_json(&read(p)?).or_fail(Category::Input)?,
        None => FootprintLibrary::default(),
    };
    let mut g = FabricGrid::new(cfg).or_fail(Category::Input)?;
    let mut events = Vec::new();
    for name in [CORE_FOOTPRINT, SENSOR_FOOTPRINT] {
        let f = lib.get(name).ok_or_else(|| anyhow::anyhow!("no footprint `{name}`")).or_fail(Category::Input)?;
        let p = g.place(&f).or_fail(Category::Placement)?;
        events.push(json!({ "event": "place", "footprint": name, "rect": p.rect.to_string() }));
    }
    let mut failed = None;
    for r in damage {
        let affected = g.damage(*r).or_fail(Category::Input)?;
        events.push(json!({ "event": "damage", "rect": r.to_string(), "affected": affected }));
        for id in affected {
            let old = g.placement(id).expect("placement exists").clone();
            let f = lib.get(&old.footprint).expect("placed footprints are in the library");
            match g.relocate(id, &f) {
                Ok((p, cost)) => events.push(json!({
                    "event": "relocate", "footprint": old.footprint, "from": old.rect.to_string(),
                    "to": p.rect.to_string(), "tiles": cost.tiles, "time_ns": cost.time_ns,
                })),
                Err(e) => {
                    events.push(json!({ "event": "relocate_failed", "footprint": old.footprint, "error": e.to_string() }));
                    failed.get_or_insert(e);
                }
            }
        }
    }
    let placements: Vec<_> = g.placements().map(|p| json!({ "footprint": p.footprint, "rect": p.rect.to_string() })).collect();
    let report = json!({
        "grid": format!("{width}x{height}"),
        "healthy_tiles": g.healthy_tiles(),
        "free_healthy_tiles": g.free_healthy_tiles(),
        "events": events,
        "placements": placements,
    });
    emit(cli.out.as_deref(), format!("{report:#}\n").as_bytes())?;
    match failed {
        Some(e) => Err(e).or_fail(Category::Placement),
        None => Ok(()),
    }
}

fn orchestrate_cmd(cli: &Cli, path: &Path, log: Option<&Path>) -> CliResult {
    let mut s = Scenario::from_json(&read(path)?).or_fail(Category::Input)?;
    if let Some(seed) = cli.seed {
        s.seeds.noise = seed;
    }
    let r = run_scenario(&s).or_fail(Category::Input)?;
    if let Some(p) = log {
        write_file(p, r.log_csv().as_bytes())?;
    }
    emit(cli.out.as_deref(), format!("{}\n", r.to_json()).as_bytes())
}

fn bench_cmd(cli: &Cli, suite: &[Benchmark]) -> CliResult {
    let rows = bench(suite, &CostModel::default()).or_fail(Category::Execution)?;
    let mut csv = Vec::new();
    write_csv(&rows, &mut csv).or_fail(Category::Io)?;
    emit(cli.out.as_deref(), &csv)
}

fn dispatch(cli: &Cli) -> CliResult {
    match &cli.command {
        Command::Translate { input, passes, variant, folded } => {
            translate_cmd(cli, input, passes.as_deref(), *variant, *folded)
        }
        Command::Run { source, variant, faults, trace, max_cycles, entry } => run_cmd(
            cli,
            RunOpts {
                source,
                variant: *variant,
                faults: faults.as_deref(),
                trace: trace.as_deref(),
                max_cycles: *max_cycles,
                entry,
            },
        ),
        Command::Sense { trace, cycles, sensors, attenuation, sigma, threshold, persistence, alerts } => sense_cmd(
            cli,
            SenseOpts {
                trace: trace.as_deref(),
                cycles: *cycles,
                sensors: *sensors,
                attenuation: *attenuation,
                sigma: *sigma,
                det: DetectorConfig { threshold: *threshold, persistence: *persistence },
                alerts: alerts.as_deref(),
            },
        ),
        Command::Fabric { grid, tile_luts, tile_ffs, footprints, damage } => {
            fabric_cmd(cli, grid, *tile_luts, *tile_ffs, footprints.as_deref(), damage)
        }
        Command::Orchestrate { scenario, log } => orchestrate_cmd(cli, scenario, log.as_deref()),
        Command::Bench { benchmarks } => bench_cmd(cli, benchmarks),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.category as u8)
        }
    }
}
