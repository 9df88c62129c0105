//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use reforge::asm::{Instruction, Item, Mnemonic, Program, Reg};
use reforge::bench::{bench, find, write_csv};
use reforge::benchmarks::{Benchmark, ENTRY};
use reforge::emulator::{load, run, run_observed, CostModel, FaultConfig, FaultKind, UnitFault, SYS_EXIT};
use reforge::fabric::{FabricConfig, FabricGrid, FootprintLibrary, Rect};
use reforge::orchestrator::{
    run_scenario, AlertSource, DamageEvent, FaultEvent, Outcome, Scenario, ScenarioReport, TraceEntry,
};
use reforge::resynth::{ripple_borrow_iterations, ripple_carry_iterations, shift_add_iterations};
use reforge::resynth::{generate_variant, translate, Pass, VariantId};
use reforge::tdc::{
    calibrate, mean_hw, write_samples, Alert, DetectorConfig, DisturbanceTrace, Preset, Pulse, SensorArray,
    SensorScope, TdcConfig, TdcSample, DEFAULT_ATTENUATION,
};
use reforge::unit::Unit;

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

// ---------------------------------------------------------------- 1

const EDGES: [u32; 6] = [0, 1, u32::MAX, 0x7FFF_FFFF, 0x8000_0000, 0xFFFF_FFFF];

fn oracle(op: Mnemonic, a: u32, b: u32) -> u32 {
    match op {
        Mnemonic::Mul => a.wrapping_mul(b),
        Mnemonic::Add => a.wrapping_add(b),
        Mnemonic::Sub => a.wrapping_sub(b),
        Mnemonic::Addi => a.wrapping_add(imm12(b) as u32),
        Mnemonic::And => a & b,
        _ => unreachable!(),
    }
}

/// Low 12 bits of `b`, sign-extended.
fn imm12(b: u32) -> i32 {
    ((b << 20) as i32) >> 20
}

fn kernel(op: Mnemonic, b: u32) -> Program {
    let ins = if op == Mnemonic::Addi {
        Instruction::imm(op, Reg::A0, Reg::A0, imm12(b))
    } else {
        Instruction::reg(op, Reg::A0, Reg::A0, Reg::A1)
    };
    Program::new(vec![Item::Label("main".into()), Item::Instr(ins), Item::Instr(Instruction::ecall())]).unwrap()
}

fn exec(p: &Program, a: u32, b: u32) -> Option<u32> {
    let mut m = load(p, "main").ok()?;
    m.set_reg(Reg::A0, a);
    m.set_reg(Reg::A1, b);
    m.set_reg(Reg::A7, SYS_EXIT);
    run(m, &FaultConfig::healthy(), &CostModel::default(), 1_000_000).exit_code()
}

fn translator_equivalence() -> Verdict {
    let start = Instant::now();
    let configs: [(&str, &[Pass], &[Mnemonic]); 4] = [
        ("mul2addshift", &[Pass::MulToShiftAdd], &[Mnemonic::Mul]),
        ("add2xorand", &[Pass::AddToXorAnd], &[Mnemonic::Add, Mnemonic::Sub, Mnemonic::Addi]),
        ("and2demorgan", &[Pass::AndToDeMorgan], &[Mnemonic::And]),
        ("V3", VariantId::V3.passes(), &[Mnemonic::Mul, Mnemonic::Add, Mnemonic::Sub, Mnemonic::Addi]),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED);
    let mut pairs: Vec<(u32, u32)> = (0..10_000).map(|_| (rng.random(), rng.random())).collect();
    pairs.extend(EDGES.iter().flat_map(|&a| EDGES.iter().map(move |&b| (a, b))));
    let mut cases = 0;
    for (name, passes, ops) in configs {
        for &op in ops {
            let fixed = (op != Mnemonic::Addi).then(|| translate(&kernel(op, 0), passes).unwrap());
            for &(a, b) in &pairs {
                let p = match &fixed {
                    Some(p) => p.clone(),
                    None => translate(&kernel(op, b), passes).unwrap(),
                };
                let got = exec(&p, a, b);
                let want = oracle(op, a, b);
                check(got == Some(want), format!("{name} {op:?} a={a:#x} b={b:#x}: got {got:?}, want {want:#x}"))?;
                cases += 1;
            }
        }
    }
    let took = start.elapsed();
    check(took < Duration::from_secs(60), format!("took {took:?}"))?;
    Ok(format!("{cases} cases exact in {:.1}s", took.as_secs_f64()))
}

// ---------------------------------------------------------------- 2

fn exit_of(b: Benchmark, v: VariantId, faults: &FaultConfig) -> Option<u32> {
    let p = generate_variant(&b.program(), v).unwrap();
    run(load(&p, ENTRY).unwrap(), faults, &CostModel::default(), 100_000_000).exit_code()
}

fn functional_fault_recovery() -> Verdict {
    let mul = FaultConfig::disabled([Unit::Mul].into());
    let mac = Benchmark::Mac.expected_exit();
    let v1 = exit_of(Benchmark::Mac, VariantId::V1, &mul);
    let v2 = exit_of(Benchmark::Mac, VariantId::V2, &mul);
    check(v1 != Some(mac), format!("mac V1 under MUL fault still correct ({v1:?})"))?;
    check(v2 == Some(mac), format!("mac V2 under MUL fault gave {v2:?}, want {mac:#x}"))?;

    let mut both = mul.clone();
    both.set(Unit::Add, UnitFault::instruction_only(FaultKind::Disabled));
    let rs = Benchmark::RsEncode.expected_exit();
    let v3 = exit_of(Benchmark::RsEncode, VariantId::V3, &both);
    check(v3 == Some(rs), format!("rs_encode V3 under MUL+ADD faults gave {v3:?}, want {rs:#x}"))?;
    Ok(format!("mac V1={v1:?} V2={v2:?}, rs_encode V3={v3:?}"))
}

// ---------------------------------------------------------------- 3

fn loop_visits(p: &Program, label: &str, a: u32, b: u32) -> u32 {
    let target = p.layout().symbols[label];
    let mut m = load(p, "main").unwrap();
    m.set_reg(Reg::A0, a);
    m.set_reg(Reg::A1, b);
    m.set_reg(Reg::A7, SYS_EXIT);
    let mut n = 0;
    run_observed(m, &FaultConfig::healthy(), &CostModel::default(), 1_000_000, |s, _| n += (s.pc == target) as u32);
    n
}

fn termination_bounds() -> Verdict {
    let mut worst = (0, 0, 0);
    // Emitted loops iterate exactly as the host models do.
    let mul = translate(&kernel(Mnemonic::Mul, 0), &[Pass::MulToShiftAdd]).unwrap();
    let add = translate(&kernel(Mnemonic::Add, 0), &[Pass::AddToXorAnd]).unwrap();
    let sub = translate(&kernel(Mnemonic::Sub, 0), &[Pass::AddToXorAnd]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..500 {
        let (a, b): (u32, u32) = (rng.random(), rng.random());
        check(loop_visits(&mul, "__mul0_loop", a, b) == shift_add_iterations(a, b, 32).1, "mul loop model")?;
        check(loop_visits(&add, "__add0_loop", a, b) == ripple_carry_iterations(a, b, 32).1, "add loop model")?;
        check(loop_visits(&sub, "__add0_loop", a, b) == ripple_borrow_iterations(a, b, 32).1, "sub loop model")?;
    }

    let mut verify = |a: u32, b: u32, w: u32| -> Result<(), String> {
        let m = if w == 32 { u32::MAX } else { (1 << w) - 1 };
        let (p, n1) = shift_add_iterations(a, b, w);
        let (s, n2) = ripple_carry_iterations(a, b, w);
        let (d, n3) = ripple_borrow_iterations(a, b, w);
        check(p == a.wrapping_mul(b) & m && s == a.wrapping_add(b) & m && d == a.wrapping_sub(b) & m, "wrong result")?;
        check(n1 <= w && n2 <= w + 1 && n3 <= w + 1, format!("bound violated at w={w} a={a:#x} b={b:#x}"))?;
        if w == 32 {
            worst = (worst.0.max(n1), worst.1.max(n2), worst.2.max(n3));
        }
        Ok(())
    };
    for a in 0..=0xFFFFu32 {
        for j in 0..1024u32 {
            let b = j * 64 + 63 * (j & 1);
            verify(a, b, 16)?;
            verify(b, a, 16)?;
        }
    }
    for _ in 0..1_000_000 {
        verify(rng.random(), rng.random(), 32)?;
    }
    for &a in &EDGES {
        for &b in &EDGES {
            verify(a, b, 32)?;
        }
    }
    Ok(format!("0 violations; worst 32-bit iterations mul={} add={} sub={}", worst.0, worst.1, worst.2))
}

// ---------------------------------------------------------------- 4-6

fn sensor_calibration() -> Verdict {
    let exact = calibrate(&TdcConfig { sigma_ps: 0.0, ..TdcConfig::default() }, 1000, 2).map_err(|e| e.to_string())?;
    let hw0 = mean_hw(&exact, 1000, 7);
    check(hw0 == 64.0, format!("sigma=0 mean HW {hw0}"))?;
    let cal = calibrate(&TdcConfig::default(), 1000, 2).map_err(|e| e.to_string())?;
    let hw = mean_hw(&cal, 10_000, 7);
    check((63.0..=65.0).contains(&hw), format!("default sigma mean HW {hw}"))?;
    Ok(format!("sigma=0 HW={hw0} (d0={} ps); default mean HW={hw:.3}", exact.d0_ps))
}

fn sensor_run(pulses: Vec<Pulse>, sensors: usize, cycles: u64, seed: u64) -> (Vec<TdcSample>, Vec<Alert>) {
    let cfg = calibrate(&TdcConfig::default(), 1000, 2).unwrap();
    let trace = DisturbanceTrace::new(pulses, seed).unwrap();
    let mut a = SensorArray::new(cfg, sensors, DEFAULT_ATTENUATION, trace, DetectorConfig::default());
    let (mut s, mut al) = (Vec::new(), Vec::new());
    for c in 0..cycles {
        let (x, y) = a.poll(c);
        s.extend(x);
        al.extend(y);
    }
    (s, al)
}

fn detection() -> Verdict {
    let det = DetectorConfig::default();
    let os = TdcConfig::default().oversampling;
    let onset = 1000.0;
    let pulse = Pulse::preset(onset, onset + 200.0, Preset::Radiate, SensorScope::Global);
    let (samples, alerts) = sensor_run(vec![pulse], 1, 2000, 11);
    check(alerts.len() == 1, format!("{} alerts for one pulse", alerts.len()))?;
    let latency = samples.iter().filter(|s| s.t >= onset && s.t <= alerts[0].t).count() as u32;
    check(latency <= det.persistence * os, format!("alert after {latency} samples"))?;
    check(sensor_run(vec![pulse], 1, 2000, 11) == (samples, alerts.clone()), "not deterministic")?;

    let (quiet, none) = sensor_run(vec![], 1, 10_000 / os as u64, 12);
    check(quiet.len() == 10_000, format!("{} noise samples", quiet.len()))?;
    check(none.is_empty(), format!("{} false alerts on noise", none.len()))?;
    Ok(format!("1 alert after {latency} samples (peak deviation {}); 0 alerts in 10000 noise samples", alerts[0].peak_deviation))
}

fn sensor_locality() -> Verdict {
    let pulse = Pulse::preset(500.0, 700.0, Preset::Radiate, SensorScope::Near(0));
    let (_, alerts) = sensor_run(vec![pulse], 2, 1000, 13);
    let on = |i| alerts.iter().filter(|a| a.sensor == i).count();
    check(on(0) >= 1 && on(1) == 0, format!("sensor0={} sensor1={}", on(0), on(1)))?;
    Ok(format!("sensor0 alerts={} sensor1 alerts=0 at attenuation {DEFAULT_ATTENUATION}", on(0)))
}

// ---------------------------------------------------------------- 7-8

fn pulse_at(cycle: u64) -> TraceEntry {
    TraceEntry {
        t_start_cycles: cycle as f64,
        t_end_cycles: cycle as f64 + 200.0,
        dv_mv: None,
        preset: Some(Preset::Hardfault),
        sensor_scope: SensorScope::Global,
    }
}

fn soft_scenario() -> Scenario {
    let mut s = Scenario::new(Benchmark::Mac);
    s.trace.push(pulse_at(10_000));
    s.unit_faults.push(FaultEvent { cycle: 10_000, unit: Unit::Mul, fault: UnitFault::new(FaultKind::Disabled) });
    s
}

fn hard_scenario(height: u32) -> Scenario {
    let mut s = Scenario::new(Benchmark::Mac);
    s.fabric = FabricConfig { width: 32, height, ..FabricConfig::default() };
    s.trace.push(pulse_at(4000));
    for unit in [Unit::Mul, Unit::Add, Unit::Xor] {
        s.unit_faults.push(FaultEvent { cycle: 4000, unit, fault: UnitFault::new(FaultKind::Disabled) });
    }
    s.damage.push(DamageEvent { cycle: 4000, region: None, placement: Some("core".into()) });
    s
}

fn soft_recovery() -> Verdict {
    let start = Instant::now();
    let r = run_scenario(&soft_scenario()).map_err(|e| e.to_string())?;
    let took = start.elapsed();
    check(r.outcome == Outcome::Recovered, format!("outcome {:?}", r.outcome))?;
    check(r.correct && r.exit_code == Some(Benchmark::Mac.expected_exit()), format!("exit {:?}", r.exit_code))?;
    let pos = |pred: &dyn Fn(&str, &str) -> bool| r.log.iter().position(|e| pred(&e.event, &e.detail));
    let alert = pos(&|e, _| e == "alert");
    let sanity = pos(&|e, d| e == "sanity_report" && d.split(',').any(|x| x == "MUL:fail"));
    let swap = pos(&|e, d| e == "variant_swap" && d.starts_with("V1->V2"));
    check(matches!((alert, sanity, swap), (Some(a), Some(s), Some(w)) if a < s && s < w), "log sequence missing")?;
    check(r.alerts[0].source == AlertSource::Sensor, "first alert not from a sensor")?;
    check(took < Duration::from_secs(10), format!("took {took:?}"))?;
    Ok(format!(
        "RECOVERED as {}, overhead {} cycles, {:.2}s",
        r.final_variant,
        r.recovery_overhead_cycles,
        took.as_secs_f64()
    ))
}

fn hard_recovery() -> Verdict {
    let r = run_scenario(&hard_scenario(5)).map_err(|e| e.to_string())?;
    check(r.outcome == Outcome::Recovered && r.correct, format!("outcome {:?} {:?}", r.outcome, r.failure_reason))?;
    check(r.relocations.len() == 1, format!("{} relocations", r.relocations.len()))?;
    let reloc = &r.relocations[0];
    // Rebuild the damaged fabric independently and inspect the new rectangle.
    let lib = FootprintLibrary::default();
    let mut grid = FabricGrid::new(hard_scenario(5).fabric).unwrap();
    let core = grid.place(&lib.get("rocket_core").unwrap()).unwrap();
    grid.place(&lib.get("tdc_sensors").unwrap()).unwrap();
    check(core.rect == reloc.from, "relocated from an unexpected rectangle")?;
    grid.damage(core.rect).unwrap();
    let damaged = reloc.to.tiles().filter(|&(x, y)| grid.is_damaged(x, y)).count();
    check(damaged == 0, format!("new placement overlaps {damaged} damaged tiles"))?;
    check(reloc.cost.tiles == 64, format!("core needs {} tiles", reloc.cost.tiles))?;

    let small = hard_scenario(4);
    let spare = small.fabric.width * small.fabric.height - Rect::new(0, 0, 32, 2).area() - 4;
    check(spare < 64, format!("{spare} spare tiles"))?;
    let f = run_scenario(&small).map_err(|e| e.to_string())?;
    check(f.outcome == Outcome::Failed, format!("32x4 outcome {:?}", f.outcome))?;
    Ok(format!("32x5: {} -> {} ({} ns); 32x4 ({spare} spare tiles): FAILED", reloc.from, reloc.to, reloc.cost.time_ns))
}

// ---------------------------------------------------------------- 9

fn overhead_ordinals() -> Verdict {
    let rows = bench(&Benchmark::ALL, &CostModel::default()).map_err(|e| e.to_string())?;
    let mut notes = Vec::new();
    for b in Benchmark::ALL {
        let get = |v| find(&rows, b, v).unwrap();
        let [v1, v2, v3, v4] = VariantId::ALL.map(get);
        check([v1, v2, v3, v4].iter().all(|r| r.correct), format!("{b}: incorrect variant"))?;
        check(v3.cycles > v2.cycles && v2.cycles > v1.cycles, format!("{b}: cycles V3>V2>V1 violated"))?;
        check(v4.cycles > v1.cycles, format!("{b}: cycles V4>V1 violated"))?;
        let d2 = v2.code_bytes + v2.data_bytes - v1.code_bytes - v1.data_bytes;
        let d3 = v3.code_bytes + v3.data_bytes - v1.code_bytes - v1.data_bytes;
        check(d3 >= 5 * d2, format!("{b}: delta V3 {d3} < 5 x delta V2 {d2}"))?;
        notes.push(format!("{b} dV2={d2}B dV3={d3}B ({:.1}x)", d3 as f64 / d2 as f64));
    }
    Ok(notes.join("; "))
}

// ---------------------------------------------------------------- 10

fn render(r: &ScenarioReport) -> (String, String) {
    (r.to_json(), r.log_csv())
}

fn determinism() -> Verdict {
    let mut near = Scenario::new(Benchmark::RsEncode);
    near.trace.push(TraceEntry { preset: Some(Preset::Radiate), ..pulse_at(2000) });
    let mut count = 0;
    for s in [Scenario::new(Benchmark::Mac), near, soft_scenario(), hard_scenario(5), hard_scenario(4)] {
        let a = render(&run_scenario(&s).map_err(|e| e.to_string())?);
        let b = render(&run_scenario(&Scenario::from_json(&s.to_json()).unwrap()).map_err(|e| e.to_string())?);
        check(a == b, format!("{} scenario differs across runs", s.benchmark))?;
        count += 1;
    }
    let csv = |seed| {
        let pulse = Pulse::preset(100.0, 300.0, Preset::Softfault, SensorScope::Near(1));
        let mut out = Vec::new();
        write_samples(&sensor_run(vec![pulse], 2, 500, seed).0, &mut out).unwrap();
        out
    };
    check(csv(21) == csv(21), "sample CSV differs")?;
    check(csv(21) != csv(22), "noise seed has no effect")?;
    let bench_csv = || {
        let mut out = Vec::new();
        write_csv(&bench(&Benchmark::ALL, &CostModel::default()).unwrap(), &mut out).unwrap();
        out
    };
    check(bench_csv() == bench_csv(), "bench CSV differs")?;
    Ok(format!("{count} scenarios, sample and bench CSVs byte-identical"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("translator equivalence", translator_equivalence),
        ("functional-fault recovery", functional_fault_recovery),
        ("termination bounds", termination_bounds),
        ("sensor calibration", sensor_calibration),
        ("detection", detection),
        ("sensor locality", sensor_locality),
        ("end-to-end soft recovery", soft_recovery),
        ("end-to-end hard recovery", hard_recovery),
        ("overhead ordinals", overhead_ordinals),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(note) => println!("PASS {:>2} {name}: {note}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why}", i + 1);
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
