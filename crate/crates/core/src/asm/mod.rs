//! The RV32IM-subset assembly dialect.
//!
//! Source text is parsed into a [`Program`]: an ordered list of labels,
//! instructions, data directives and section switches. Pseudo-instructions
//! (`li`, `la`, `mv`, `not`, `nop`, `j`, `ret`) are expanded while parsing,
//! so every [`Instruction`] in a program is a real 4-byte RV32 instruction.
//! The printer emits that expanded form by default; [`PrintStyle::Folded`]
//! re-folds single instructions that have a byte-identical pseudo spelling.

mod encode;
mod parser;
mod printer;
mod reg;

use std::collections::BTreeMap;
use std::fmt;

pub use encode::{assemble, encode, Image};
pub(crate) use encode::opcode;
pub use parser::parse_program;
pub use printer::{print_program, print_program_styled, PrintStyle};
pub use reg::Reg;

/// Base address of the text section.
pub const TEXT_BASE: u32 = 0x1000;
/// Base address of the data section.
pub const DATA_BASE: u32 = 0x10000;

/// Supported (real) instruction mnemonics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mnemonic {
    Add,
    Addi,
    Sub,
    And,
    Andi,
    Or,
    Ori,
    Xor,
    Xori,
    Sll,
    Slli,
    Srl,
    Srli,
    Sra,
    Srai,
    Mul,
    Lw,
    Lb,
    Lbu,
    Sw,
    Sb,
    Lui,
    Auipc,
    Beq,
    Bne,
    Blt,
    Bge,
    Bltu,
    Bgeu,
    Jal,
    Jalr,
    Ecall,
}

/// Operand layout of a mnemonic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    /// `op rd, rs1, rs2`
    Reg,
    /// `op rd, rs1, imm` with a 12-bit signed immediate
    Imm,
    /// `op rd, rs1, shamt`
    Shift,
    /// `op rd, imm(rs1)`
    Load,
    /// `op rs2, imm(rs1)`
    Store,
    /// `op rs1, rs2, label`
    Branch,
    /// `op rd, imm20`
    Upper,
    /// `jal rd, label`
    Jump,
    /// `jalr rd, imm(rs1)`
    JumpReg,
    /// `ecall`
    System,
}

impl Mnemonic {
    pub const ALL: [Mnemonic; 32] = [
        Mnemonic::Add,
        Mnemonic::Addi,
        Mnemonic::Sub,
        Mnemonic::And,
        Mnemonic::Andi,
        Mnemonic::Or,
        Mnemonic::Ori,
        Mnemonic::Xor,
        Mnemonic::Xori,
        Mnemonic::Sll,
        Mnemonic::Slli,
        Mnemonic::Srl,
        Mnemonic::Srli,
        Mnemonic::Sra,
        Mnemonic::Srai,
        Mnemonic::Mul,
        Mnemonic::Lw,
        Mnemonic::Lb,
        Mnemonic::Lbu,
        Mnemonic::Sw,
        Mnemonic::Sb,
        Mnemonic::Lui,
        Mnemonic::Auipc,
        Mnemonic::Beq,
        Mnemonic::Bne,
        Mnemonic::Blt,
        Mnemonic::Bge,
        Mnemonic::Bltu,
        Mnemonic::Bgeu,
        Mnemonic::Jal,
        Mnemonic::Jalr,
        Mnemonic::Ecall,
    ];

    pub fn name(self) -> &'static str {
        use Mnemonic::*;
        match self {
            Add => "add",
            Addi => "addi",
            Sub => "sub",
            And => "and",
            Andi => "andi",
            Or => "or",
            Ori => "ori",
            Xor => "xor",
            Xori => "xori",
            Sll => "sll",
            Slli => "slli",
            Srl => "srl",
            Srli => "srli",
            Sra => "sra",
            Srai => "srai",
            Mul => "mul",
            Lw => "lw",
            Lb => "lb",
            Lbu => "lbu",
            Sw => "sw",
            Sb => "sb",
            Lui => "lui",
            Auipc => "auipc",
            Beq => "beq",
            Bne => "bne",
            Blt => "blt",
            Bge => "bge",
            Bltu => "bltu",
            Bgeu => "bgeu",
            Jal => "jal",
            Jalr => "jalr",
            Ecall => "ecall",
        }
    }

    pub fn from_name(name: &str) -> Option<Mnemonic> {
        Mnemonic::ALL.into_iter().find(|m| m.name() == name)
    }

    pub fn format(self) -> Format {
        use Mnemonic::*;
        match self {
            Add | Sub | And | Or | Xor | Sll | Srl | Sra | Mul => Format::Reg,
            Addi | Andi | Ori | Xori => Format::Imm,
            Slli | Srli | Srai => Format::Shift,
            Lw | Lb | Lbu => Format::Load,
            Sw | Sb => Format::Store,
            Beq | Bne | Blt | Bge | Bltu | Bgeu => Format::Branch,
            Lui | Auipc => Format::Upper,
            Jal => Format::Jump,
            Jalr => Format::JumpReg,
            Ecall => Format::System,
        }
    }

    /// Whether the instruction writes `rd`.
    pub fn writes_rd(self) -> bool {
        !matches!(self.format(), Format::Store | Format::Branch | Format::System)
    }
}

impl fmt::Display for Mnemonic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One real RV32 instruction. Fields not used by the mnemonic's format are
/// zero (registers) / zero (imm) / `None` (target).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Instruction {
    pub op: Mnemonic,
    pub rd: Reg,
    pub rs1: Reg,
    pub rs2: Reg,
    /// Immediate. For `lui`/`auipc` this is the 20-bit upper value
    /// (0..=0xFFFFF); for loads, stores and `jalr` it is the offset.
    pub imm: i32,
    /// Label operand of branches and `jal`.
    pub target: Option<String>,
}

impl Instruction {
    fn base(op: Mnemonic) -> Self {
        Instruction { op, rd: Reg::ZERO, rs1: Reg::ZERO, rs2: Reg::ZERO, imm: 0, target: None }
    }

    pub fn reg(op: Mnemonic, rd: Reg, rs1: Reg, rs2: Reg) -> Self {
        Instruction { rd, rs1, rs2, ..Self::base(op) }
    }

    /// Register-immediate ALU, shift-immediate and load forms.
    pub fn imm(op: Mnemonic, rd: Reg, rs1: Reg, imm: i32) -> Self {
        Instruction { rd, rs1, imm, ..Self::base(op) }
    }

    pub fn store(op: Mnemonic, rs2: Reg, rs1: Reg, offset: i32) -> Self {
        Instruction { rs1, rs2, imm: offset, ..Self::base(op) }
    }

    pub fn branch(op: Mnemonic, rs1: Reg, rs2: Reg, target: impl Into<String>) -> Self {
        Instruction { rs1, rs2, target: Some(target.into()), ..Self::base(op) }
    }

    pub fn upper(op: Mnemonic, rd: Reg, imm20: i32) -> Self {
        Instruction { rd, imm: imm20, ..Self::base(op) }
    }

    pub fn jal(rd: Reg, target: impl Into<String>) -> Self {
        Instruction { rd, target: Some(target.into()), ..Self::base(Mnemonic::Jal) }
    }

    pub fn jalr(rd: Reg, rs1: Reg, offset: i32) -> Self {
        Instruction { rd, rs1, imm: offset, ..Self::base(Mnemonic::Jalr) }
    }

    pub fn ecall() -> Self {
        Self::base(Mnemonic::Ecall)
    }

    /// Registers read by this instruction.
    pub fn reads(&self) -> Vec<Reg> {
        match self.op.format() {
            Format::Reg | Format::Store | Format::Branch => vec![self.rs1, self.rs2],
            Format::Imm | Format::Shift | Format::Load | Format::JumpReg => vec![self.rs1],
            Format::Upper | Format::Jump | Format::System => {
                // ecall reads a7 and a0 under the exit convention
                if self.op == Mnemonic::Ecall {
                    vec![Reg::A0, Reg::A7]
                } else {
                    Vec::new()
                }
            }
        }
    }

    /// Register written by this instruction, if any (writes to x0 included).
    pub fn writes(&self) -> Option<Reg> {
        self.op.writes_rd().then_some(self.rd)
    }
}

/// Data-section directives.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Data {
    Word(Vec<u32>),
    Byte(Vec<u8>),
    /// NUL-terminated string; the stored bytes exclude the terminator.
    Asciz(Vec<u8>),
}

impl Data {
    /// Bytes emitted by the directive itself, not counting alignment padding.
    pub fn size(&self) -> u32 {
        match self {
            Data::Word(w) => 4 * w.len() as u32,
            Data::Byte(b) => b.len() as u32,
            Data::Asciz(s) => s.len() as u32 + 1,
        }
    }

    fn alignment(&self) -> u32 {
        match self {
            Data::Word(_) => 4,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Section {
    Text,
    Data,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Item {
    Label(String),
    Instr(Instruction),
    Data(Data),
    Section(Section),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AsmError {
    #[error("line {line}: syntax error: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: unknown mnemonic `{name}`")]
    UnknownMnemonic { line: usize, name: String },
    #[error("line {line}: `{mnemonic}` takes {expected} operand(s), found {found}")]
    Arity { line: usize, mnemonic: String, expected: usize, found: usize },
    #[error("line {line}: unknown register `{name}`")]
    BadRegister { line: usize, name: String },
    #[error("line {line}: immediate {value} out of range for `{mnemonic}`")]
    ImmediateRange { line: usize, mnemonic: String, value: i64 },
    #[error("duplicate label `{0}`")]
    DuplicateLabel(String),
    #[error("unresolved label `{0}`")]
    UnresolvedLabel(String),
    #[error("{0} is not allowed in the {1:?} section")]
    Misplaced(&'static str, Section),
    #[error("invalid instruction `{0}`")]
    InvalidInstruction(String),
    #[error("branch to `{label}` is out of range (offset {offset})")]
    BranchRange { label: String, offset: i64 },
}

/// Address layout of a program.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Layout {
    /// Label name to absolute address.
    pub symbols: BTreeMap<String, u32>,
    /// Number of instructions in the text section.
    pub instructions: u32,
    /// Size of the data image, including alignment padding.
    pub data_bytes: u32,
}

/// A validated assembly program.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Program {
    items: Vec<Item>,
    symbols: BTreeMap<String, usize>,
}

impl Program {
    /// Validates `items` and builds the symbol table: labels are unique,
    /// every branch/jump target exists, instructions live in `.text` and data
    /// directives in `.data`, and immediates are in range.
    pub fn new(items: Vec<Item>) -> Result<Self, AsmError> {
        let mut symbols = BTreeMap::new();
        let mut section = Section::Text;
        for (idx, item) in items.iter().enumerate() {
            match item {
                Item::Label(name) => {
                    if symbols.insert(name.clone(), idx).is_some() {
                        return Err(AsmError::DuplicateLabel(name.clone()));
                    }
                }
                Item::Section(s) => section = *s,
                Item::Instr(ins) => {
                    if section != Section::Text {
                        return Err(AsmError::Misplaced("an instruction", section));
                    }
                    validate_instruction(ins)?;
                }
                Item::Data(_) => {
                    if section != Section::Data {
                        return Err(AsmError::Misplaced("a data directive", section));
                    }
                }
            }
        }
        for item in &items {
            if let Item::Instr(Instruction { target: Some(t), .. }) = item {
                if !symbols.contains_key(t) {
                    return Err(AsmError::UnresolvedLabel(t.clone()));
                }
            }
        }
        Ok(Program { items, symbols })
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    pub fn into_items(self) -> Vec<Item> {
        self.items
    }

    /// Label name to item index.
    pub fn symbols(&self) -> &BTreeMap<String, usize> {
        &self.symbols
    }

    pub fn instructions(&self) -> impl Iterator<Item = &Instruction> {
        self.items.iter().filter_map(|i| match i {
            Item::Instr(ins) => Some(ins),
            _ => None,
        })
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Computes label addresses with text at [`TEXT_BASE`] and data at
    /// [`DATA_BASE`]. `.word` directives are naturally aligned.
    pub fn layout(&self) -> Layout {
        layout_items(&self.items)
    }

    /// Bytes of text: four per instruction.
    pub fn text_size_bytes(&self) -> u32 {
        4 * self.instructions().count() as u32
    }

    /// Bytes emitted by data directives.
    pub fn data_size_bytes(&self) -> u32 {
        self.items
            .iter()
            .map(|i| match i {
                Item::Data(d) => d.size(),
                _ => 0,
            })
            .sum()
    }

    /// Total memory footprint: text plus data directive bytes.
    pub fn code_size_bytes(&self) -> u32 {
        self.text_size_bytes() + self.data_size_bytes()
    }
}

pub(crate) fn layout_items(items: &[Item]) -> Layout {
    let mut layout = Layout::default();
    let mut section = Section::Text;
    let mut pending: Vec<&str> = Vec::new();
    // labels bind to the location counter of the section they appear in
    let flush = |layout: &mut Layout, pending: &mut Vec<&str>, addr: u32| {
        for name in pending.drain(..) {
            layout.symbols.insert(name.to_string(), addr);
        }
    };
    for item in items {
        match item {
            Item::Label(name) => pending.push(name),
            Item::Section(s) => {
                let addr = section_end(&layout, section);
                flush(&mut layout, &mut pending, addr);
                section = *s;
            }
            Item::Instr(_) => {
                let addr = TEXT_BASE + 4 * layout.instructions;
                flush(&mut layout, &mut pending, addr);
                layout.instructions += 1;
            }
            Item::Data(d) => {
                let align = d.alignment();
                layout.data_bytes = layout.data_bytes.div_ceil(align) * align;
                let addr = DATA_BASE + layout.data_bytes;
                flush(&mut layout, &mut pending, addr);
                layout.data_bytes += d.size();
            }
        }
    }
    let addr = section_end(&layout, section);
    flush(&mut layout, &mut pending, addr);
    layout
}

fn section_end(layout: &Layout, section: Section) -> u32 {
    match section {
        Section::Text => TEXT_BASE + 4 * layout.instructions,
        Section::Data => DATA_BASE + layout.data_bytes,
    }
}

fn validate_instruction(ins: &Instruction) -> Result<(), AsmError> {
    let bad = || AsmError::InvalidInstruction(printer::format_instruction(ins));
    let needs_target = matches!(ins.op.format(), Format::Branch | Format::Jump);
    if needs_target != ins.target.is_some() {
        return Err(bad());
    }
    let ok = match ins.op.format() {
        Format::Imm | Format::Load | Format::Store | Format::JumpReg => {
            (-2048..=2047).contains(&ins.imm)
        }
        Format::Shift => (0..=31).contains(&ins.imm),
        Format::Upper => (0..=0xFFFFF).contains(&ins.imm),
        Format::Reg | Format::Branch | Format::Jump | Format::System => ins.imm == 0,
    };
    if ok {
        Ok(())
    } else {
        Err(bad())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_aligns_words_after_bytes() {
        let p = parse_program(
            ".data\nb: .byte 1, 2, 3\nw: .word 7\n.text\nmain: nop\nend:\n",
        )
        .unwrap();
        let layout = p.layout();
        assert_eq!(layout.symbols["b"], DATA_BASE);
        assert_eq!(layout.symbols["w"], DATA_BASE + 4);
        assert_eq!(layout.symbols["main"], TEXT_BASE);
        assert_eq!(layout.symbols["end"], TEXT_BASE + 4);
        assert_eq!(layout.data_bytes, 8);
        assert_eq!(p.data_size_bytes(), 7);
    }

    #[test]
    fn code_size_counts_four_bytes_per_instruction() {
        let src: String = (0..10).map(|i| format!("addi t0, t0, {i}\n")).collect();
        assert_eq!(parse_program(&src).unwrap().code_size_bytes(), 40);
        assert_eq!(parse_program("li t0, 0x12345678").unwrap().code_size_bytes(), 8);
        assert_eq!(parse_program("li t0, -5").unwrap().code_size_bytes(), 4);
        assert_eq!(parse_program("li t0, 0x1000").unwrap().code_size_bytes(), 4);
        assert_eq!(
            parse_program("not a0, a1\nmv a0, a1\nnop\nx: j x\nret").unwrap().code_size_bytes(),
            20
        );
        assert_eq!(parse_program(".data\n.word 1, 2, 3\n.asciz \"hi\"").unwrap().code_size_bytes(), 15);
    }

    #[test]
    fn code_size_is_invariant_under_label_renaming() {
        let a = parse_program("top: addi t0, t0, 1\nbne t0, t1, top\n").unwrap();
        let b = parse_program("other_name: addi t0, t0, 1\nbne t0, t1, other_name\n").unwrap();
        assert_eq!(a.code_size_bytes(), b.code_size_bytes());
    }

    #[test]
    fn program_validation() {
        let dup = vec![Item::Label("a".into()), Item::Label("a".into())];
        assert_eq!(Program::new(dup), Err(AsmError::DuplicateLabel("a".into())));
        let unresolved = vec![Item::Instr(Instruction::jal(Reg::ZERO, "nowhere"))];
        assert_eq!(Program::new(unresolved), Err(AsmError::UnresolvedLabel("nowhere".into())));
        let misplaced = vec![Item::Section(Section::Data), Item::Instr(Instruction::ecall())];
        assert!(matches!(Program::new(misplaced), Err(AsmError::Misplaced(..))));
        let wide = vec![Item::Instr(Instruction::imm(Mnemonic::Slli, Reg::A0, Reg::A0, 32))];
        assert!(matches!(Program::new(wide), Err(AsmError::InvalidInstruction(_))));
    }
}
