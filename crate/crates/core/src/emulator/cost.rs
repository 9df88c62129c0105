use serde::{Deserialize, Serialize};

use crate::asm::{Format, Mnemonic};

/// Cycles charged per retired instruction, by class.
///
/// The defaults are a documented stand-in for an in-order single-issue
/// core; only ordinal comparisons between runs are meaningful.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostModel {
    pub alu: u32,
    pub mul: u32,
    pub load: u32,
    pub store: u32,
    pub branch_taken: u32,
    pub branch_not_taken: u32,
    /// `jal` and `jalr` (always taken).
    pub jump: u32,
    pub system: u32,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            alu: 1,
            mul: 5,
            load: 2,
            store: 2,
            branch_taken: 2,
            branch_not_taken: 1,
            jump: 2,
            system: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("every instruction cost must be at least one cycle")]
pub struct ZeroCost;

impl CostModel {
    /// A model charging one cycle for everything.
    pub fn uniform() -> Self {
        CostModel {
            alu: 1,
            mul: 1,
            load: 1,
            store: 1,
            branch_taken: 1,
            branch_not_taken: 1,
            jump: 1,
            system: 1,
        }
    }

    pub fn validate(&self) -> Result<(), ZeroCost> {
        let all = [
            self.alu,
            self.mul,
            self.load,
            self.store,
            self.branch_taken,
            self.branch_not_taken,
            self.jump,
            self.system,
        ];
        if all.iter().all(|c| *c >= 1) {
            Ok(())
        } else {
            Err(ZeroCost)
        }
    }

    pub fn max_cost(&self) -> u32 {
        [
            self.alu,
            self.mul,
            self.load,
            self.store,
            self.branch_taken,
            self.branch_not_taken,
            self.jump,
            self.system,
        ]
        .into_iter()
        .max()
        .unwrap_or(1)
    }

    pub fn cycles(&self, op: Mnemonic, taken: bool) -> u32 {
        match op.format() {
            _ if op == Mnemonic::Mul => self.mul,
            Format::Load => self.load,
            Format::Store => self.store,
            Format::Branch if taken => self.branch_taken,
            Format::Branch => self.branch_not_taken,
            Format::Jump | Format::JumpReg => self.jump,
            Format::System => self.system,
            Format::Reg | Format::Imm | Format::Shift | Format::Upper => self.alu,
        }
    }
}
