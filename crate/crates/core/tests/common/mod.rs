//! Random straight-line programs for the property suites.

#![allow(dead_code)]

use proptest::prelude::*;
use reforge::asm::{Instruction, Item, Mnemonic, Program, Reg};
use reforge::emulator::{load, MachineState, SYS_EXIT};

pub const REG_OPS: [Mnemonic; 9] = {
    use Mnemonic::*;
    [Add, Sub, Sll, Srl, Sra, And, Or, Xor, Mul]
};
pub const IMM_OPS: [Mnemonic; 7] = {
    use Mnemonic::*;
    [Addi, Andi, Ori, Xori, Slli, Srli, Srai]
};

/// Fixed case count, no regression files.
pub fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, failure_persistence: None, ..ProptestConfig::default() }
}

/// Registers a generated program may use: everything except `sp`, `a7`
/// (holds the exit code) and the translator scratch registers.
pub fn pool() -> Vec<Reg> {
    (0u8..28).filter(|i| ![2, 17].contains(i)).map(|i| Reg::new(i).unwrap()).collect()
}

pub fn reg() -> impl Strategy<Value = Reg> {
    proptest::sample::select(pool())
}

pub fn instruction(ops: Vec<Mnemonic>) -> impl Strategy<Value = Instruction> {
    (proptest::sample::select(ops), reg(), reg(), reg(), -2048i32..2048).prop_map(|(op, rd, rs1, rs2, imm)| {
        match op {
            Mnemonic::Slli | Mnemonic::Srli | Mnemonic::Srai => Instruction::imm(op, rd, rs1, imm & 31),
            op if IMM_OPS.contains(&op) => Instruction::imm(op, rd, rs1, imm),
            op => Instruction::reg(op, rd, rs1, rs2),
        }
    })
}

pub fn alu_instruction() -> impl Strategy<Value = Instruction> {
    instruction(REG_OPS.iter().chain(&IMM_OPS).copied().collect())
}

/// `main:` followed by `body` and an exit `ecall`.
pub fn program(body: Vec<Instruction>) -> Program {
    let mut items = vec![Item::Label("main".into())];
    items.extend(body.into_iter().map(Item::Instr));
    items.push(Item::Instr(Instruction::ecall()));
    Program::new(items).unwrap()
}

/// Loads `p` with every pool register seeded from `seeds`.
pub fn machine(p: &Program, seeds: &[u32]) -> MachineState {
    let mut m = load(p, "main").unwrap();
    for (r, v) in pool().into_iter().zip(seeds.iter().cycle()) {
        m.set_reg(r, *v);
    }
    m.set_reg(Reg::A7, SYS_EXIT);
    m
}

/// Register values a translation must preserve.
pub fn visible(m: &MachineState) -> Vec<u32> {
    pool().into_iter().map(|r| m.reg(r)).collect()
}
