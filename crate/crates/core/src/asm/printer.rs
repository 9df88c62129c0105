use std::fmt::Write;

use super::{Data, Format, Instruction, Item, Mnemonic, Program, Reg, Section};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PrintStyle {
    /// Every instruction in its real form.
    #[default]
    Expanded,
    /// Single instructions with a byte-identical pseudo spelling (`li`
    /// with a 12-bit value, `mv`, `not`, `nop`, `j`, `ret`) printed as that
    /// pseudo.
    Folded,
}

/// Prints a program in expanded form. `parse_program(print_program(p)) == p`.
pub fn print_program(p: &Program) -> String {
    print_program_styled(p, PrintStyle::Expanded)
}

pub fn print_program_styled(p: &Program, style: PrintStyle) -> String {
    let mut out = String::new();
    for item in p.items() {
        match item {
            Item::Label(name) => {
                let _ = writeln!(out, "{name}:");
            }
            Item::Section(Section::Text) => out.push_str(".text\n"),
            Item::Section(Section::Data) => out.push_str(".data\n"),
            Item::Instr(ins) => {
                let text = match style {
                    PrintStyle::Folded => fold(ins).unwrap_or_else(|| format_instruction(ins)),
                    PrintStyle::Expanded => format_instruction(ins),
                };
                let _ = writeln!(out, "    {text}");
            }
            Item::Data(d) => {
                let _ = writeln!(out, "    {}", format_data(d));
            }
        }
    }
    out
}

pub(crate) fn format_instruction(ins: &Instruction) -> String {
    let Instruction { op, rd, rs1, rs2, imm, target } = ins;
    let target = target.as_deref().unwrap_or("?");
    match op.format() {
        Format::Reg => format!("{op} {rd}, {rs1}, {rs2}"),
        Format::Imm | Format::Shift => format!("{op} {rd}, {rs1}, {imm}"),
        Format::Load => format!("{op} {rd}, {imm}({rs1})"),
        Format::Store => format!("{op} {rs2}, {imm}({rs1})"),
        Format::Branch => format!("{op} {rs1}, {rs2}, {target}"),
        Format::Upper => format!("{op} {rd}, {imm:#x}"),
        Format::Jump => format!("{op} {rd}, {target}"),
        Format::JumpReg => format!("{op} {rd}, {imm}({rs1})"),
        Format::System => op.to_string(),
    }
}

fn fold(ins: &Instruction) -> Option<String> {
    let Instruction { op, rd, rs1, imm, .. } = ins;
    match op {
        Mnemonic::Addi if *rd == Reg::ZERO && *rs1 == Reg::ZERO && *imm == 0 => Some("nop".into()),
        Mnemonic::Addi if *rs1 == Reg::ZERO => Some(format!("li {rd}, {imm}")),
        Mnemonic::Addi if *imm == 0 => Some(format!("mv {rd}, {rs1}")),
        Mnemonic::Xori if *imm == -1 => Some(format!("not {rd}, {rs1}")),
        Mnemonic::Jal if *rd == Reg::ZERO => Some(format!("j {}", ins.target.as_deref()?)),
        Mnemonic::Jalr if *rd == Reg::ZERO && *rs1 == Reg::RA && *imm == 0 => Some("ret".into()),
        _ => None,
    }
}

fn format_data(d: &Data) -> String {
    match d {
        Data::Word(words) => {
            let vals: Vec<String> = words.iter().map(|w| format!("{w:#010x}")).collect();
            format!(".word {}", vals.join(", "))
        }
        Data::Byte(bytes) => {
            let vals: Vec<String> = bytes.iter().map(u8::to_string).collect();
            format!(".byte {}", vals.join(", "))
        }
        Data::Asciz(bytes) => {
            let mut s = String::from(".asciz \"");
            for &b in bytes {
                match b {
                    b'"' => s.push_str("\\\""),
                    b'\\' => s.push_str("\\\\"),
                    b'\n' => s.push_str("\\n"),
                    b'\t' => s.push_str("\\t"),
                    b'\r' => s.push_str("\\r"),
                    0x20..=0x7E => s.push(b as char),
                    _ => {
                        let _ = write!(s, "\\x{b:02x}");
                    }
                }
            }
            s.push('"');
            s
        }
    }
}
