use crate::asm::{opcode, Mnemonic, Reg};

/// A decoded instruction word. `imm` holds the sign-extended immediate; for
/// branches and `jal` it is the pc-relative byte offset, for `lui`/`auipc`
/// the already-shifted upper value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Decoded {
    pub op: Mnemonic,
    pub rd: Reg,
    pub rs1: Reg,
    pub rs2: Reg,
    pub imm: i32,
}

fn reg(word: u32, shift: u32) -> Reg {
    Reg::new(((word >> shift) & 0x1F) as u8).expect("5-bit field")
}

/// Decodes a word of the supported subset; anything else is `None`.
pub fn decode(word: u32) -> Option<Decoded> {
    use Mnemonic::*;
    let opc = word & 0x7F;
    let f3 = (word >> 12) & 7;
    let f7 = word >> 25;
    let i_imm = (word as i32) >> 20;
    let (rd, rs1, rs2) = (reg(word, 7), reg(word, 15), reg(word, 20));
    let mk = |op, imm| Some(Decoded { op, rd, rs1, rs2, imm });
    match opc {
        opcode::OP => {
            let op = match (f7, f3) {
                (0x00, 0) => Add,
                (0x20, 0) => Sub,
                (0x00, 1) => Sll,
                (0x00, 4) => Xor,
                (0x00, 5) => Srl,
                (0x20, 5) => Sra,
                (0x00, 6) => Or,
                (0x00, 7) => And,
                (0x01, 0) => Mul,
                _ => return None,
            };
            mk(op, 0)
        }
        opcode::OP_IMM => {
            let shamt = ((word >> 20) & 0x1F) as i32;
            match (f3, f7) {
                (0, _) => mk(Addi, i_imm),
                (4, _) => mk(Xori, i_imm),
                (6, _) => mk(Ori, i_imm),
                (7, _) => mk(Andi, i_imm),
                (1, 0x00) => mk(Slli, shamt),
                (5, 0x00) => mk(Srli, shamt),
                (5, 0x20) => mk(Srai, shamt),
                _ => None,
            }
        }
        opcode::LOAD => match f3 {
            0 => mk(Lb, i_imm),
            2 => mk(Lw, i_imm),
            4 => mk(Lbu, i_imm),
            _ => None,
        },
        opcode::STORE => {
            let imm = ((word as i32 >> 25) << 5) | ((word >> 7) & 0x1F) as i32;
            match f3 {
                0 => mk(Sb, imm),
                2 => mk(Sw, imm),
                _ => None,
            }
        }
        opcode::BRANCH => {
            let imm = ((word as i32 >> 31) << 12)
                | (((word >> 7) & 1) << 11) as i32
                | (((word >> 25) & 0x3F) << 5) as i32
                | (((word >> 8) & 0xF) << 1) as i32;
            let op = match f3 {
                0 => Beq,
                1 => Bne,
                4 => Blt,
                5 => Bge,
                6 => Bltu,
                7 => Bgeu,
                _ => return None,
            };
            mk(op, imm)
        }
        opcode::LUI => mk(Lui, (word & 0xFFFF_F000) as i32),
        opcode::AUIPC => mk(Auipc, (word & 0xFFFF_F000) as i32),
        opcode::JAL => {
            let imm = ((word as i32 >> 31) << 20)
                | (((word >> 12) & 0xFF) << 12) as i32
                | (((word >> 20) & 1) << 11) as i32
                | (((word >> 21) & 0x3FF) << 1) as i32;
            mk(Jal, imm)
        }
        opcode::JALR if f3 == 0 => mk(Jalr, i_imm),
        opcode::SYSTEM if word == opcode::ECALL => mk(Ecall, 0),
        _ => None,
    }
}
