use crate::unit::Unit;

use super::fault::{FaultConfig, FaultKind};

/// An operation performed by one ALU functional unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AluOp {
    Add,
    Sub,
    Sll,
    Srl,
    Sra,
    And,
    Or,
    Xor,
    Mul,
}

impl AluOp {
    pub const ALL: [AluOp; 9] = [
        AluOp::Add,
        AluOp::Sub,
        AluOp::Sll,
        AluOp::Srl,
        AluOp::Sra,
        AluOp::And,
        AluOp::Or,
        AluOp::Xor,
        AluOp::Mul,
    ];

    /// The functional unit that executes this operation. `sub` shares the adder.
    pub fn unit(self) -> Unit {
        match self {
            AluOp::Add | AluOp::Sub => Unit::Add,
            AluOp::Sll | AluOp::Srl | AluOp::Sra => Unit::Shift,
            AluOp::And => Unit::And,
            AluOp::Or => Unit::Or,
            AluOp::Xor => Unit::Xor,
            AluOp::Mul => Unit::Mul,
        }
    }

    /// Fault-free RV32IM semantics.
    pub fn eval(self, a: u32, b: u32) -> u32 {
        match self {
            AluOp::Add => a.wrapping_add(b),
            AluOp::Sub => a.wrapping_sub(b),
            AluOp::Sll => a << (b & 31),
            AluOp::Srl => a >> (b & 31),
            AluOp::Sra => ((a as i32) >> (b & 31)) as u32,
            AluOp::And => a & b,
            AluOp::Or => a | b,
            AluOp::Xor => a ^ b,
            AluOp::Mul => a.wrapping_mul(b),
        }
    }
}

/// Who is asking the ALU for a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AluPath {
    /// An explicit ALU instruction (`add`, `xori`, `mul`, `auipc`, ...).
    Instruction,
    /// Branch comparison, load/store address generation and `jalr` targets.
    Implicit,
}

/// Executes `op` on the unit it maps to, applying that unit's fault.
/// Faults are silent: a faulty unit returns a wrong value, never an error.
pub fn alu_execute(op: AluOp, a: u32, b: u32, faults: &FaultConfig) -> u32 {
    alu_execute_on(op, a, b, faults, AluPath::Instruction)
}

pub fn alu_execute_on(op: AluOp, a: u32, b: u32, faults: &FaultConfig, path: AluPath) -> u32 {
    let result = op.eval(a, b);
    match faults.active(op.unit(), path) {
        Some(kind) => kind.apply(result),
        None => result,
    }
}

impl FaultKind {
    /// Corrupts a correct unit result.
    pub fn apply(self, result: u32) -> u32 {
        match self {
            FaultKind::Healthy => result,
            FaultKind::Disabled => 0,
            FaultKind::StuckAt { bit, value } => {
                let mask = 1u32 << bit;
                if value == 0 {
                    result & !mask
                } else {
                    result | mask
                }
            }
            FaultKind::WrongResult { mask } => result ^ mask,
        }
    }
}
