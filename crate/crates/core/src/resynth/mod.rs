//! Instruction resynthesis: rewrite a program so it no longer issues
//! instructions executed by a faulty ALU unit.
//!
//! Each pass replaces its target instructions in place with a short loop or
//! identity built from other units. Scratch registers are statically
//! reserved (`t3`-`t6`); programs fed to the passes must not keep values in
//! them across a rewrite site, which [`translate`] checks.

mod bounds;
mod passes;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::asm::{AsmError, Item, Mnemonic, Program, Reg};
use crate::unit::{Unit, UnitSet};

pub use bounds::{ripple_carry_iterations, ripple_borrow_iterations, shift_add_iterations};
pub use passes::{pass_add_to_xor_and, pass_and_to_demorgan, pass_mul_to_shift_add};

/// Scratch registers of the mul pass: multiplicand, multiplier, bit test.
pub const MUL_SCRATCH: [Reg; 3] = [Reg::T4, Reg::T5, Reg::T6];
/// Scratch registers of the add pass: addend copy, carry.
pub const ADD_SCRATCH: [Reg; 2] = [Reg::T3, Reg::T6];
/// Scratch register of the and pass: the inverted second operand.
pub const AND_SCRATCH: [Reg; 1] = [Reg::T5];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ResynthError {
    #[error("`{mnemonic}` at instruction {index} uses reserved scratch register {reg}")]
    ScratchAlias { index: usize, mnemonic: &'static str, reg: Reg },
    #[error("scratch register {reg} is read at instruction {read_at} while live across the rewrite at instruction {site}")]
    LiveScratch { site: usize, read_at: usize, reg: Reg },
    #[error("unknown pass `{0}` (expected mul2addshift, add2xorand or and2demorgan)")]
    UnknownPass(String),
    #[error(transparent)]
    Asm(#[from] AsmError),
}

/// A rewrite pass, by its command-line name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pass {
    MulToShiftAdd,
    AddToXorAnd,
    AndToDeMorgan,
}

impl Pass {
    pub const ALL: [Pass; 3] = [Pass::MulToShiftAdd, Pass::AddToXorAnd, Pass::AndToDeMorgan];

    pub fn name(self) -> &'static str {
        match self {
            Pass::MulToShiftAdd => "mul2addshift",
            Pass::AddToXorAnd => "add2xorand",
            Pass::AndToDeMorgan => "and2demorgan",
        }
    }

    pub fn apply(self, p: &Program) -> Result<Program, ResynthError> {
        match self {
            Pass::MulToShiftAdd => pass_mul_to_shift_add(p),
            Pass::AddToXorAnd => pass_add_to_xor_and(p),
            Pass::AndToDeMorgan => pass_and_to_demorgan(p),
        }
    }

    /// Parses a comma-separated list such as `mul2addshift,add2xorand`.
    pub fn parse_list(list: &str) -> Result<Vec<Pass>, ResynthError> {
        list.split(',').map(str::trim).filter(|s| !s.is_empty()).map(str::parse).collect()
    }
}

impl fmt::Display for Pass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Pass {
    type Err = ResynthError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Pass::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| ResynthError::UnknownPass(s.to_string()))
    }
}

/// Applies `passes` left to right.
pub fn translate(p: &Program, passes: &[Pass]) -> Result<Program, ResynthError> {
    passes.iter().try_fold(p.clone(), |acc, pass| pass.apply(&acc))
}

/// The four pre-generated program variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VariantId {
    V1,
    V2,
    V3,
    V4,
}

impl VariantId {
    pub const ALL: [VariantId; 4] = [VariantId::V1, VariantId::V2, VariantId::V3, VariantId::V4];

    pub fn name(self) -> &'static str {
        match self {
            VariantId::V1 => "V1",
            VariantId::V2 => "V2",
            VariantId::V3 => "V3",
            VariantId::V4 => "V4",
        }
    }

    /// Passes that produce this variant from the original program.
    pub fn passes(self) -> &'static [Pass] {
        match self {
            VariantId::V1 => &[],
            VariantId::V2 => &[Pass::MulToShiftAdd],
            VariantId::V3 => &[Pass::MulToShiftAdd, Pass::AddToXorAnd],
            VariantId::V4 => &[Pass::AndToDeMorgan],
        }
    }

    /// Units whose instructions the variant issues, for the benchmark
    /// programs (which use no `or`). Implicit adder use is not included.
    pub fn nominal_units(self) -> UnitSet {
        match self {
            VariantId::V1 => UnitSet::ALL,
            VariantId::V2 => UnitSet::ALL.without(Unit::Mul),
            VariantId::V3 => UnitSet::from([Unit::Xor, Unit::And, Unit::Shift]),
            VariantId::V4 => UnitSet::ALL.without(Unit::And),
        }
    }
}

impl fmt::Display for VariantId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for VariantId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        VariantId::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown variant `{s}` (expected V1..V4)"))
    }
}

/// Outcome of variant selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    Variant(VariantId),
    Unrecoverable,
}

/// Picks the variant for a faulty-unit set: `{}`→V1, `{MUL}`→V2, anything
/// with ADD→V3, `{AND}`→V4. The choice is unrecoverable when the variant
/// still needs one of the faulty units, or when no rule applies.
pub fn select_variant(faulty: UnitSet) -> Selection {
    let v = if faulty.is_empty() {
        VariantId::V1
    } else if faulty.contains(Unit::Add) {
        VariantId::V3
    } else if faulty == UnitSet::from([Unit::Mul]) {
        VariantId::V2
    } else if faulty == UnitSet::from([Unit::And]) {
        VariantId::V4
    } else {
        return Selection::Unrecoverable;
    };
    if v.nominal_units().is_disjoint(faulty) {
        Selection::Variant(v)
    } else {
        Selection::Unrecoverable
    }
}

/// Unit that executes `op` when issued as an instruction, if any.
pub fn mnemonic_unit(op: Mnemonic) -> Option<Unit> {
    use Mnemonic::*;
    match op {
        Mul => Some(Unit::Mul),
        Add | Addi | Sub | Auipc => Some(Unit::Add),
        Sll | Slli | Srl | Srli | Sra | Srai => Some(Unit::Shift),
        And | Andi => Some(Unit::And),
        Or | Ori => Some(Unit::Or),
        Xor | Xori => Some(Unit::Xor),
        _ => None,
    }
}

/// Units named by the instructions of `p`, without implicit uses.
pub fn instruction_units(p: &Program) -> UnitSet {
    p.instructions().filter_map(|i| mnemonic_unit(i.op)).collect()
}

/// Units a variant program depends on: every unit its instructions name,
/// plus ADD, which address generation and branch comparison always use.
pub fn required_units(_v: VariantId, p: &Program) -> UnitSet {
    instruction_units(p).with(Unit::Add)
}

/// Builds variant `v` of `p`.
pub fn generate_variant(p: &Program, v: VariantId) -> Result<Program, ResynthError> {
    translate(p, v.passes())
}

/// All four variants, in order V1..V4.
pub fn generate_variants(p: &Program) -> Result<[Program; 4], ResynthError> {
    let v2 = pass_mul_to_shift_add(p)?;
    let v3 = pass_add_to_xor_and(&v2)?;
    let v4 = pass_and_to_demorgan(p)?;
    Ok([p.clone(), v2, v3, v4])
}

/// Checks that none of `scratch` is read after instruction `site` before
/// being written, scanning the instruction stream linearly.
fn check_scratch_dead(instrs: &[&crate::asm::Instruction], site: usize, scratch: &[Reg]) -> Result<(), ResynthError> {
    let mut live: Vec<Reg> = scratch.to_vec();
    for (offset, ins) in instrs[site + 1..].iter().enumerate() {
        if let Some(reg) = ins.reads().into_iter().find(|r| live.contains(r)) {
            return Err(ResynthError::LiveScratch { site, read_at: site + 1 + offset, reg });
        }
        if let Some(w) = ins.writes() {
            live.retain(|r| *r != w);
        }
        if live.is_empty() {
            break;
        }
    }
    Ok(())
}

/// Hands out unique labels of the form `__{prefix}{n}_{suffix}`.
struct LabelGen {
    prefix: &'static str,
    next: usize,
    taken: BTreeSet<String>,
}

impl LabelGen {
    fn new(prefix: &'static str, items: &[Item]) -> Self {
        let taken = items
            .iter()
            .filter_map(|i| match i {
                Item::Label(l) => Some(l.clone()),
                _ => None,
            })
            .collect();
        LabelGen { prefix, next: 0, taken }
    }

    fn fresh<const K: usize>(&mut self, suffixes: [&str; K]) -> [String; K] {
        loop {
            let n = self.next;
            self.next += 1;
            let names = suffixes.map(|s| format!("__{}{}_{}", self.prefix, n, s));
            if names.iter().all(|l| !self.taken.contains(l)) {
                self.taken.extend(names.iter().cloned());
                return names;
            }
        }
    }
}
