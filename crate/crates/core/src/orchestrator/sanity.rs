use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::asm::{Instruction, Item, Mnemonic, Program, Reg};
use crate::emulator::{load, run, AluOp, CostModel, FaultConfig};
use crate::unit::{Unit, UnitSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitVerdict {
    pub pass: bool,
    pub vectors: u32,
    pub failures: u32,
}

/// Per-unit outcome of the diagnostic routine.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SanityReport {
    pub units: BTreeMap<Unit, UnitVerdict>,
    /// Emulated cycles spent running the vectors.
    pub cycles: u64,
}

impl SanityReport {
    pub fn failed(&self) -> UnitSet {
        self.units.iter().filter(|(_, v)| !v.pass).map(|(u, _)| *u).collect()
    }

    pub fn all_pass(&self) -> bool {
        self.failed().is_empty()
    }

    /// `MUL:fail,ADD:pass,...` in diagnosis order.
    pub fn summary(&self) -> String {
        self.units
            .iter()
            .map(|(u, v)| format!("{u}:{}", if v.pass { "pass" } else { "fail" }))
            .collect::<Vec<_>>()
            .join(",")
    }
}

const M: u32 = u32::MAX;

/// Golden vectors per unit: (operation, a, b). Each unit's set includes an
/// identity case, an all-zeros result and an all-ones result, so a stuck-at
/// fault on any bit flips at least one expected value.
fn vectors(unit: Unit) -> Vec<(Mnemonic, u32, u32)> {
    use Mnemonic::*;
    let v = |op, list: &[(u32, u32)]| list.iter().map(|(a, b)| (op, *a, *b)).collect::<Vec<_>>();
    match unit {
        Unit::Mul => v(Mul, &[(6, 7), (0, 12345), (0xDEAD_BEEF, 1), (M, 1), (M, M), (0x10000, 0x10000), (3, 0x5555_5555), (0x8000_0000, 2)]),
        Unit::Add => v(Add, &[(2, 2), (0, 0), (0x1234_5678, 0), (M, 0), (M, 1), (0x7FFF_FFFF, 1), (0x5555_5555, 0xAAAA_AAAA), (0x0F0F_0F0F, 0x0101_0101)]),
        Unit::Shift => {
            let mut out = v(Sll, &[(1, 0), (1, 31), (0xFFFF, 16), (0, 5)]);
            out.extend(v(Srl, &[(0x8000_0000, 31), (M, 4)]));
            out.extend(v(Sra, &[(M, 1), (0x8000_0000, 4), (0x4000_0000, 30)]));
            out
        }
        Unit::And => v(And, &[(0xF0, 0x3C), (M, M), (0x1234_5678, M), (0, M), (0xAAAA_AAAA, 0x5555_5555), (0xFF00_FF00, 0x0FF0_0FF0), (M, 0x8000_0001), (7, 5)]),
        Unit::Or => v(Or, &[(0, 0), (M, 0), (0x1234_5678, 0), (0xAAAA_AAAA, 0x5555_5555), (0xF0, 0x0F), (0x8000_0000, 1), (0, M), (3, 5)]),
        Unit::Xor => v(Xor, &[(0, 0), (M, 0), (0x1234_5678, 0), (M, M), (0xAAAA_AAAA, 0x5555_5555), (0xF0F0, 0xFF00), (0x8000_0000, 1), (6, 3)]),
    }
}

fn alu_op(op: Mnemonic) -> AluOp {
    match op {
        Mnemonic::Mul => AluOp::Mul,
        Mnemonic::Add => AluOp::Add,
        Mnemonic::Sll => AluOp::Sll,
        Mnemonic::Srl => AluOp::Srl,
        Mnemonic::Sra => AluOp::Sra,
        Mnemonic::And => AluOp::And,
        Mnemonic::Or => AluOp::Or,
        Mnemonic::Xor => AluOp::Xor,
        _ => unreachable!("not a vector operation"),
    }
}

/// Runs `OP a0, a0, a1; ecall` with the operands and exit code preloaded,
/// so the program touches no unit other than the one under test.
fn run_vector(op: Mnemonic, a: u32, b: u32, faults: &FaultConfig, cost: &CostModel) -> (Option<u32>, u64) {
    let p = Program::new(vec![
        Item::Label("main".into()),
        Item::Instr(Instruction::reg(op, Reg::A0, Reg::A0, Reg::A1)),
        Item::Instr(Instruction::ecall()),
    ])
    .expect("vector program is valid");
    let mut m = load(&p, "main").expect("vector program loads");
    m.regs[Reg::A0.index()] = a;
    m.regs[Reg::A1.index()] = b;
    m.regs[Reg::A7.index()] = crate::emulator::SYS_EXIT;
    let r = run(m, faults, cost, 100);
    (r.exit_code(), r.cycles)
}

/// Exercises every unit with its golden vectors under `faults`. A mismatch
/// or a trap fails the unit.
pub fn sanity_check(faults: &FaultConfig, cost: &CostModel) -> SanityReport {
    let mut units = BTreeMap::new();
    let mut cycles = 0;
    for unit in Unit::ALL {
        let vs = vectors(unit);
        let mut failures = 0;
        for (op, a, b) in &vs {
            let (got, c) = run_vector(*op, *a, *b, faults, cost);
            cycles += c;
            if got != Some(alu_op(*op).eval(*a, *b)) {
                failures += 1;
            }
        }
        units.insert(unit, UnitVerdict { pass: failures == 0, vectors: vs.len() as u32, failures });
    }
    SanityReport { units, cycles }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emulator::{FaultKind, UnitFault};

    fn with(unit: Unit, kind: FaultKind) -> FaultConfig {
        let mut f = FaultConfig::healthy();
        f.set(unit, UnitFault::new(kind));
        f
    }

    #[test]
    fn healthy_passes_everything() {
        let r = sanity_check(&FaultConfig::healthy(), &CostModel::default());
        assert!(r.all_pass());
        assert!(r.units.values().all(|v| v.vectors >= 8));
        assert_eq!(r.units.len(), 6);
        assert_eq!(r.summary(), "MUL:pass,ADD:pass,SHIFT:pass,AND:pass,OR:pass,XOR:pass");
    }

    #[test]
    fn isolates_single_unit_faults() {
        for unit in Unit::ALL {
            let r = sanity_check(&with(unit, FaultKind::Disabled), &CostModel::default());
            assert_eq!(r.failed(), UnitSet::from([unit]), "{unit}");
        }
    }

    #[test]
    fn add_stuck_at_is_caught_by_two_plus_two() {
        let f = with(Unit::Add, FaultKind::StuckAt { bit: 0, value: 1 });
        assert_eq!(run_vector(Mnemonic::Add, 2, 2, &f, &CostModel::default()).0, Some(5));
        assert_eq!(sanity_check(&f, &CostModel::default()).failed(), UnitSet::from([Unit::Add]));
    }

    #[test]
    fn every_stuck_at_is_detected() {
        for unit in Unit::ALL {
            for bit in 0..32 {
                for value in 0..2 {
                    let r = sanity_check(&with(unit, FaultKind::StuckAt { bit, value }), &CostModel::default());
                    assert_eq!(r.failed(), UnitSet::from([unit]), "{unit} bit {bit} = {value}");
                }
            }
        }
    }
}
