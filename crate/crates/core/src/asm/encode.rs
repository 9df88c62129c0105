//! Machine-code encoding of the instruction subset.

use std::collections::BTreeMap;

use super::{AsmError, Data, Format, Instruction, Item, Mnemonic, Program};

pub(crate) mod opcode {
    pub const LOAD: u32 = 0x03;
    pub const OP_IMM: u32 = 0x13;
    pub const AUIPC: u32 = 0x17;
    pub const STORE: u32 = 0x23;
    pub const OP: u32 = 0x33;
    pub const LUI: u32 = 0x37;
    pub const BRANCH: u32 = 0x63;
    pub const JALR: u32 = 0x67;
    pub const JAL: u32 = 0x6F;
    pub const SYSTEM: u32 = 0x73;
    pub const ECALL: u32 = 0x0000_0073;
}

/// An assembled program: text words, the data image and symbol addresses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub text: Vec<u32>,
    pub data: Vec<u8>,
    pub symbols: BTreeMap<String, u32>,
}

/// Assembles `p` using its [`Program::layout`].
pub fn assemble(p: &Program) -> Result<Image, AsmError> {
    let layout = p.layout();
    let mut text = Vec::with_capacity(layout.instructions as usize);
    let mut data = Vec::with_capacity(layout.data_bytes as usize);
    for item in p.items() {
        match item {
            Item::Instr(ins) => {
                let pc = super::TEXT_BASE + 4 * text.len() as u32;
                text.push(encode(ins, pc, &layout.symbols)?);
            }
            Item::Data(d) => {
                if matches!(d, Data::Word(_)) {
                    data.resize(data.len().div_ceil(4) * 4, 0);
                }
                match d {
                    Data::Word(words) => words.iter().for_each(|w| data.extend_from_slice(&w.to_le_bytes())),
                    Data::Byte(bytes) => data.extend_from_slice(bytes),
                    Data::Asciz(bytes) => {
                        data.extend_from_slice(bytes);
                        data.push(0);
                    }
                }
            }
            Item::Label(_) | Item::Section(_) => {}
        }
    }
    Ok(Image { text, data, symbols: layout.symbols })
}

fn funct3(op: Mnemonic) -> u32 {
    use Mnemonic::*;
    match op {
        Add | Sub | Mul | Addi | Beq | Lb | Sb | Jalr => 0,
        Sll | Slli | Bne => 1,
        Lw | Sw => 2,
        Xor | Xori | Blt | Lbu => 4,
        Srl | Srli | Sra | Srai | Bge => 5,
        Or | Ori | Bltu => 6,
        And | Andi | Bgeu => 7,
        Lui | Auipc | Jal | Ecall => 0,
    }
}

fn funct7(op: Mnemonic) -> u32 {
    match op {
        Mnemonic::Sub | Mnemonic::Sra | Mnemonic::Srai => 0x20,
        Mnemonic::Mul => 0x01,
        _ => 0,
    }
}

/// Encodes one instruction located at `pc`.
pub fn encode(ins: &Instruction, pc: u32, symbols: &BTreeMap<String, u32>) -> Result<u32, AsmError> {
    let rd = ins.rd.index() as u32;
    let rs1 = ins.rs1.index() as u32;
    let rs2 = ins.rs2.index() as u32;
    let f3 = funct3(ins.op);
    let imm = ins.imm as u32;
    let offset = |bits: u32| -> Result<u32, AsmError> {
        let label = ins.target.as_deref().unwrap_or_default();
        let addr = *symbols.get(label).ok_or_else(|| AsmError::UnresolvedLabel(label.to_string()))?;
        let off = addr as i64 - pc as i64;
        let limit = 1i64 << (bits - 1);
        if off < -limit || off >= limit {
            return Err(AsmError::BranchRange { label: label.to_string(), offset: off });
        }
        Ok(off as i32 as u32)
    };
    let word = match ins.op.format() {
        Format::Reg => (funct7(ins.op) << 25) | (rs2 << 20) | (rs1 << 15) | (f3 << 12) | (rd << 7) | opcode::OP,
        Format::Imm => ((imm & 0xFFF) << 20) | (rs1 << 15) | (f3 << 12) | (rd << 7) | opcode::OP_IMM,
        Format::Shift => {
            (funct7(ins.op) << 25) | ((imm & 0x1F) << 20) | (rs1 << 15) | (f3 << 12) | (rd << 7) | opcode::OP_IMM
        }
        Format::Load => ((imm & 0xFFF) << 20) | (rs1 << 15) | (f3 << 12) | (rd << 7) | opcode::LOAD,
        Format::Store => {
            (((imm >> 5) & 0x7F) << 25)
                | (rs2 << 20)
                | (rs1 << 15)
                | (f3 << 12)
                | ((imm & 0x1F) << 7)
                | opcode::STORE
        }
        Format::Branch => {
            let off = offset(13)?;
            (((off >> 12) & 1) << 31)
                | (((off >> 5) & 0x3F) << 25)
                | (rs2 << 20)
                | (rs1 << 15)
                | (f3 << 12)
                | (((off >> 1) & 0xF) << 8)
                | (((off >> 11) & 1) << 7)
                | opcode::BRANCH
        }
        Format::Upper => {
            let opc = if ins.op == Mnemonic::Lui { opcode::LUI } else { opcode::AUIPC };
            ((imm & 0xFFFFF) << 12) | (rd << 7) | opc
        }
        Format::Jump => {
            let off = offset(21)?;
            (((off >> 20) & 1) << 31)
                | (((off >> 1) & 0x3FF) << 21)
                | (((off >> 11) & 1) << 20)
                | (((off >> 12) & 0xFF) << 12)
                | (rd << 7)
                | opcode::JAL
        }
        Format::JumpReg => ((imm & 0xFFF) << 20) | (rs1 << 15) | (rd << 7) | opcode::JALR,
        Format::System => opcode::ECALL,
    };
    Ok(word)
}
