use super::{
    layout_items, AsmError, Data, Format, Instruction, Item, Mnemonic, Program, Reg, Section,
};

/// Parses assembly source into a validated [`Program`].
///
/// One item per line (a line may carry leading labels); `#` starts a
/// comment. Pseudo-instructions are expanded in place.
pub fn parse_program(text: &str) -> Result<Program, AsmError> {
    let mut parser = Parser::default();
    for (idx, raw) in text.lines().enumerate() {
        parser.line(idx + 1, raw)?;
    }
    parser.finish()
}

#[derive(Default)]
struct Parser {
    items: Vec<Item>,
    /// `la` expansions awaiting the final layout: (index of the `lui`, label, line)
    pending_la: Vec<(usize, String, usize)>,
}

impl Parser {
    fn line(&mut self, line: usize, raw: &str) -> Result<(), AsmError> {
        let mut rest = strip_comment(raw).trim();
        while let Some((label, tail)) = split_label(rest) {
            self.items.push(Item::Label(label.to_string()));
            rest = tail.trim_start();
        }
        if rest.is_empty() {
            return Ok(());
        }
        if rest.starts_with('.') {
            return self.directive(line, rest);
        }
        let (name, operands) = match rest.split_once(char::is_whitespace) {
            Some((n, ops)) => (n, ops.trim()),
            None => (rest, ""),
        };
        let ops = split_operands(line, operands)?;
        self.instruction(line, &name.to_ascii_lowercase(), &ops)
    }

    fn directive(&mut self, line: usize, text: &str) -> Result<(), AsmError> {
        let (name, args) = match text.split_once(char::is_whitespace) {
            Some((n, a)) => (n, a.trim()),
            None => (text, ""),
        };
        let no_args = |item: Item| {
            if args.is_empty() {
                Ok(item)
            } else {
                Err(syntax(line, format!("`{name}` takes no arguments")))
            }
        };
        let item = match name {
            ".text" => no_args(Item::Section(Section::Text))?,
            ".data" => no_args(Item::Section(Section::Data))?,
            ".word" => {
                let words = split_operands(line, args)?
                    .iter()
                    .map(|a| {
                        let v = parse_int(a).ok_or_else(|| syntax(line, format!("bad number `{a}`")))?;
                        if (-(1i64 << 31)..(1i64 << 32)).contains(&v) {
                            Ok(v as u32)
                        } else {
                            Err(syntax(line, format!("`{a}` does not fit in a word")))
                        }
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                if words.is_empty() {
                    return Err(syntax(line, ".word needs at least one value"));
                }
                Item::Data(Data::Word(words))
            }
            ".byte" => {
                let bytes = split_operands(line, args)?
                    .iter()
                    .map(|a| {
                        let v = parse_int(a).ok_or_else(|| syntax(line, format!("bad number `{a}`")))?;
                        if (-128..256).contains(&v) {
                            Ok(v as u8)
                        } else {
                            Err(syntax(line, format!("`{a}` does not fit in a byte")))
                        }
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                if bytes.is_empty() {
                    return Err(syntax(line, ".byte needs at least one value"));
                }
                Item::Data(Data::Byte(bytes))
            }
            ".asciz" => Item::Data(Data::Asciz(parse_string(line, args)?)),
            other => return Err(syntax(line, format!("unsupported directive `{other}`"))),
        };
        self.items.push(item);
        Ok(())
    }

    fn instruction(&mut self, line: usize, name: &str, ops: &[&str]) -> Result<(), AsmError> {
        let arity = |expected: usize| {
            if ops.len() == expected {
                Ok(())
            } else {
                Err(AsmError::Arity { line, mnemonic: name.to_string(), expected, found: ops.len() })
            }
        };
        let reg = |s: &str| Reg::parse(s).ok_or_else(|| AsmError::BadRegister { line, name: s.to_string() });
        match name {
            "li" => {
                arity(2)?;
                let rd = reg(ops[0])?;
                let v = parse_int(ops[1]).ok_or_else(|| syntax(line, format!("bad number `{}`", ops[1])))?;
                if !(-(1i64 << 31)..(1i64 << 32)).contains(&v) {
                    return Err(AsmError::ImmediateRange { line, mnemonic: "li".into(), value: v });
                }
                for ins in expand_li(rd, v as u32 as i32) {
                    self.push(ins);
                }
                return Ok(());
            }
            "la" => {
                arity(2)?;
                let rd = reg(ops[0])?;
                let label = label(line, ops[1])?;
                self.pending_la.push((self.items.len(), label.to_string(), line));
                self.push(Instruction::upper(Mnemonic::Lui, rd, 0));
                self.push(Instruction::imm(Mnemonic::Addi, rd, rd, 0));
                return Ok(());
            }
            "mv" => {
                arity(2)?;
                self.push(Instruction::imm(Mnemonic::Addi, reg(ops[0])?, reg(ops[1])?, 0));
                return Ok(());
            }
            "not" => {
                arity(2)?;
                self.push(Instruction::imm(Mnemonic::Xori, reg(ops[0])?, reg(ops[1])?, -1));
                return Ok(());
            }
            "nop" => {
                arity(0)?;
                self.push(Instruction::imm(Mnemonic::Addi, Reg::ZERO, Reg::ZERO, 0));
                return Ok(());
            }
            "j" => {
                arity(1)?;
                self.push(Instruction::jal(Reg::ZERO, label(line, ops[0])?));
                return Ok(());
            }
            "ret" => {
                arity(0)?;
                self.push(Instruction::jalr(Reg::ZERO, Reg::RA, 0));
                return Ok(());
            }
            _ => {}
        }

        let op = Mnemonic::from_name(name)
            .ok_or_else(|| AsmError::UnknownMnemonic { line, name: name.to_string() })?;
        let imm_in = |s: &str, lo: i64, hi: i64| {
            let v = parse_int(s).ok_or_else(|| syntax(line, format!("bad immediate `{s}`")))?;
            if (lo..=hi).contains(&v) {
                Ok(v)
            } else {
                Err(AsmError::ImmediateRange { line, mnemonic: name.to_string(), value: v })
            }
        };
        let ins = match op.format() {
            Format::Reg => {
                arity(3)?;
                Instruction::reg(op, reg(ops[0])?, reg(ops[1])?, reg(ops[2])?)
            }
            Format::Imm => {
                arity(3)?;
                let imm = imm_in(ops[2], -2048, 2047)? as i32;
                Instruction::imm(op, reg(ops[0])?, reg(ops[1])?, imm)
            }
            Format::Shift => {
                arity(3)?;
                let imm = imm_in(ops[2], 0, 31)? as i32;
                Instruction::imm(op, reg(ops[0])?, reg(ops[1])?, imm)
            }
            Format::Load => {
                arity(2)?;
                let (offset, base) = self.mem_operand(line, name, ops[1])?;
                Instruction::imm(op, reg(ops[0])?, base, offset)
            }
            Format::Store => {
                arity(2)?;
                let (offset, base) = self.mem_operand(line, name, ops[1])?;
                Instruction::store(op, reg(ops[0])?, base, offset)
            }
            Format::Branch => {
                arity(3)?;
                Instruction::branch(op, reg(ops[0])?, reg(ops[1])?, label(line, ops[2])?)
            }
            Format::Upper => {
                arity(2)?;
                let v = imm_in(ops[1], -(1 << 19), 0xFFFFF)?;
                Instruction::upper(op, reg(ops[0])?, (v & 0xFFFFF) as i32)
            }
            Format::Jump => match ops.len() {
                1 => Instruction::jal(Reg::RA, label(line, ops[0])?),
                2 => Instruction::jal(reg(ops[0])?, label(line, ops[1])?),
                _ => return Err(AsmError::Arity { line, mnemonic: name.into(), expected: 2, found: ops.len() }),
            },
            Format::JumpReg => match ops.len() {
                1 => Instruction::jalr(Reg::RA, reg(ops[0])?, 0),
                2 => {
                    let (offset, base) = self.mem_operand(line, name, ops[1])?;
                    Instruction::jalr(reg(ops[0])?, base, offset)
                }
                3 => {
                    let imm = imm_in(ops[2], -2048, 2047)? as i32;
                    Instruction::jalr(reg(ops[0])?, reg(ops[1])?, imm)
                }
                _ => return Err(AsmError::Arity { line, mnemonic: name.into(), expected: 2, found: ops.len() }),
            },
            Format::System => {
                arity(0)?;
                Instruction::ecall()
            }
        };
        self.push(ins);
        Ok(())
    }

    /// Parses `imm(reg)` or `(reg)`.
    fn mem_operand(&self, line: usize, name: &str, text: &str) -> Result<(i32, Reg), AsmError> {
        let open = text.find('(').ok_or_else(|| syntax(line, format!("expected `imm(reg)`, found `{text}`")))?;
        let inner = text[open + 1..]
            .strip_suffix(')')
            .ok_or_else(|| syntax(line, format!("unclosed `(` in `{text}`")))?
            .trim();
        let base = Reg::parse(inner).ok_or_else(|| AsmError::BadRegister { line, name: inner.to_string() })?;
        let imm_text = text[..open].trim();
        let offset = if imm_text.is_empty() {
            0
        } else {
            let v = parse_int(imm_text).ok_or_else(|| syntax(line, format!("bad offset `{imm_text}`")))?;
            if !(-2048..=2047).contains(&v) {
                return Err(AsmError::ImmediateRange { line, mnemonic: name.to_string(), value: v });
            }
            v as i32
        };
        Ok((offset, base))
    }

    fn push(&mut self, ins: Instruction) {
        self.items.push(Item::Instr(ins));
    }

    fn finish(mut self) -> Result<Program, AsmError> {
        if !self.pending_la.is_empty() {
            let layout = layout_items(&self.items);
            for (idx, label, _line) in &self.pending_la {
                let addr = *layout
                    .symbols
                    .get(label)
                    .ok_or_else(|| AsmError::UnresolvedLabel(label.clone()))?;
                let (hi, lo) = split_hi_lo(addr as i32);
                if let Item::Instr(lui) = &mut self.items[*idx] {
                    lui.imm = hi;
                }
                if let Item::Instr(addi) = &mut self.items[*idx + 1] {
                    addi.imm = lo;
                }
            }
        }
        Program::new(self.items)
    }
}

/// Splits a 32-bit value into a `lui` upper part and a sign-extended 12-bit
/// low part such that `(hi << 12) + lo == value` (wrapping).
pub(crate) fn split_hi_lo(value: i32) -> (i32, i32) {
    let hi = ((value as u32).wrapping_add(0x800) >> 12) & 0xFFFFF;
    let lo = value.wrapping_sub((hi << 12) as i32);
    (hi as i32, lo)
}

/// `li` expansion: one `addi` for 12-bit values, otherwise `lui` plus an
/// optional `addi`.
pub(crate) fn expand_li(rd: Reg, value: i32) -> Vec<Instruction> {
    if (-2048..=2047).contains(&value) {
        return vec![Instruction::imm(Mnemonic::Addi, rd, Reg::ZERO, value)];
    }
    let (hi, lo) = split_hi_lo(value);
    let mut out = vec![Instruction::upper(Mnemonic::Lui, rd, hi)];
    if lo != 0 {
        out.push(Instruction::imm(Mnemonic::Addi, rd, rd, lo));
    }
    out
}

fn syntax(line: usize, msg: impl Into<String>) -> AsmError {
    AsmError::Syntax { line, msg: msg.into() }
}

fn strip_comment(line: &str) -> &str {
    let mut in_string = false;
    let mut escaped = false;
    for (i, c) in line.char_indices() {
        match c {
            _ if escaped => escaped = false,
            '\\' if in_string => escaped = true,
            '"' => in_string = !in_string,
            '#' if !in_string => return &line[..i],
            _ => {}
        }
    }
    line
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' || c == '.' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.' || c == '$')
}

fn split_label(text: &str) -> Option<(&str, &str)> {
    let (head, tail) = text.split_once(':')?;
    let head = head.trim_end();
    is_identifier(head).then_some((head, tail))
}

fn label(line: usize, s: &str) -> Result<&str, AsmError> {
    if is_identifier(s) {
        Ok(s)
    } else {
        Err(syntax(line, format!("expected a label, found `{s}`")))
    }
}

fn split_operands(line: usize, text: &str) -> Result<Vec<&str>, AsmError> {
    if text.is_empty() {
        return Ok(Vec::new());
    }
    text.split(',')
        .map(|s| {
            let s = s.trim();
            if s.is_empty() {
                Err(syntax(line, "empty operand"))
            } else {
                Ok(s)
            }
        })
        .collect()
}

fn parse_int(s: &str) -> Option<i64> {
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let magnitude = if let Some(hex) = body.strip_prefix("0x").or_else(|| body.strip_prefix("0X")) {
        i64::from_str_radix(hex, 16).ok()?
    } else if let Some(bin) = body.strip_prefix("0b").or_else(|| body.strip_prefix("0B")) {
        i64::from_str_radix(bin, 2).ok()?
    } else if !body.is_empty() && body.bytes().all(|b| b.is_ascii_digit()) {
        body.parse().ok()?
    } else {
        return None;
    };
    Some(if neg { -magnitude } else { magnitude })
}

fn parse_string(line: usize, text: &str) -> Result<Vec<u8>, AsmError> {
    let inner = text
        .strip_prefix('"')
        .and_then(|t| t.strip_suffix('"'))
        .ok_or_else(|| syntax(line, "expected a quoted string"))?;
    let mut out = Vec::new();
    let mut chars = inner.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            let mut buf = [0u8; 4];
            out.extend_from_slice(c.encode_utf8(&mut buf).as_bytes());
            continue;
        }
        let esc = chars.next().ok_or_else(|| syntax(line, "dangling escape"))?;
        out.push(match esc {
            'n' => b'\n',
            't' => b'\t',
            'r' => b'\r',
            '0' => 0,
            '\\' => b'\\',
            '"' => b'"',
            'x' => {
                let hex: String = chars.by_ref().take(2).collect();
                u8::from_str_radix(&hex, 16).map_err(|_| syntax(line, format!("bad escape `\\x{hex}`")))?
            }
            other => return Err(syntax(line, format!("unknown escape `\\{other}`"))),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asm::{DATA_BASE, TEXT_BASE};

    fn instrs(src: &str) -> Vec<Instruction> {
        parse_program(src).unwrap().instructions().cloned().collect()
    }

    #[test]
    fn register_form() {
        assert_eq!(
            instrs("add t0, t1, t2"),
            vec![Instruction::reg(Mnemonic::Add, Reg::new(5).unwrap(), Reg::new(6).unwrap(), Reg::new(7).unwrap())]
        );
        assert_eq!(instrs("add x5, x6, x7"), instrs("add t0, t1, t2"));
    }

    #[test]
    fn label_and_branch() {
        let p = parse_program("loop: bne t2, zero, loop").unwrap();
        assert_eq!(p.items()[0], Item::Label("loop".into()));
        assert_eq!(p.items()[1], Item::Instr(Instruction::branch(Mnemonic::Bne, Reg::T2, Reg::ZERO, "loop")));
        assert_eq!(p.symbols()["loop"], 0);
    }

    #[test]
    fn arity_error() {
        let err = parse_program("mul t0, t1").unwrap_err();
        assert!(matches!(err, AsmError::Arity { line: 1, expected: 3, found: 2, .. }), "{err}");
    }

    #[test]
    fn errors_carry_line_numbers() {
        assert!(matches!(
            parse_program("nop\nfrobnicate a0").unwrap_err(),
            AsmError::UnknownMnemonic { line: 2, .. }
        ));
        assert!(matches!(parse_program("\n\naddi a0, a0, 5000").unwrap_err(), AsmError::ImmediateRange { line: 3, .. }));
        assert!(matches!(parse_program("add a0, a1, q9").unwrap_err(), AsmError::BadRegister { line: 1, .. }));
        assert!(matches!(parse_program("lw a0, 4[sp]").unwrap_err(), AsmError::Syntax { line: 1, .. }));
        assert_eq!(parse_program("a:\na:").unwrap_err(), AsmError::DuplicateLabel("a".into()));
        assert_eq!(parse_program("j missing").unwrap_err(), AsmError::UnresolvedLabel("missing".into()));
    }

    #[test]
    fn pseudo_expansion() {
        assert_eq!(
            instrs("li t0, 0x12345678"),
            vec![
                Instruction::upper(Mnemonic::Lui, Reg::T0, 0x12345),
                Instruction::imm(Mnemonic::Addi, Reg::T0, Reg::T0, 0x678)
            ]
        );
        // low half with bit 11 set borrows from the upper half
        let li = instrs("li a0, 0xFFFFF800");
        assert_eq!(li, vec![Instruction::imm(Mnemonic::Addi, Reg::A0, Reg::ZERO, -2048)]);
        let li = instrs("li a0, 0x00012FFF");
        assert_eq!(
            li,
            vec![Instruction::upper(Mnemonic::Lui, Reg::A0, 0x13), Instruction::imm(Mnemonic::Addi, Reg::A0, Reg::A0, -1)]
        );
        assert_eq!(instrs("not a0, a1"), vec![Instruction::imm(Mnemonic::Xori, Reg::A0, Reg::A1, -1)]);
        assert_eq!(instrs("ret"), vec![Instruction::jalr(Reg::ZERO, Reg::RA, 0)]);
        assert_eq!(instrs("x: j x")[0], Instruction::jal(Reg::ZERO, "x"));
    }

    #[test]
    fn split_hi_lo_reconstructs() {
        for v in [0, 1, -1, 0x7FF, 0x800, -2048, -2049, i32::MAX, i32::MIN, 0x12345678] {
            let (hi, lo) = split_hi_lo(v);
            assert!((-2048..=2047).contains(&lo));
            assert_eq!(((hi as u32) << 12).wrapping_add(lo as u32), v as u32, "{v:#x}");
        }
    }

    #[test]
    fn la_resolves_forward_data_labels() {
        let p = parse_program("la a0, buf\necall\n.data\n.word 1\nbuf: .word 2\n").unwrap();
        let ins: Vec<_> = p.instructions().cloned().collect();
        let addr = DATA_BASE + 4;
        let (hi, lo) = split_hi_lo(addr as i32);
        assert_eq!(ins[0], Instruction::upper(Mnemonic::Lui, Reg::A0, hi));
        assert_eq!(ins[1], Instruction::imm(Mnemonic::Addi, Reg::A0, Reg::A0, lo));
        let p = parse_program("here: la a0, here").unwrap();
        assert_eq!(p.layout().symbols["here"], TEXT_BASE);
    }

    #[test]
    fn memory_operands_and_jumps() {
        let p = instrs("lw a0, -4(sp)\nsw a0, (sp)\nx: jal x\njalr a0\njalr t0, 8(a1)\njalr t0, a1, 8");
        assert_eq!(p[0], Instruction::imm(Mnemonic::Lw, Reg::A0, Reg::SP, -4));
        assert_eq!(p[1], Instruction::store(Mnemonic::Sw, Reg::A0, Reg::SP, 0));
        assert_eq!(p[2], Instruction::jal(Reg::RA, "x"));
        assert_eq!(p[3], Instruction::jalr(Reg::RA, Reg::A0, 0));
        assert_eq!(p[4], p[5]);
    }

    #[test]
    fn data_directives_and_comments() {
        let p = parse_program(".data\nmsg: .asciz \"a#b\\n\" # trailing\n.byte -1, 0x7f\n.word -1\n").unwrap();
        assert_eq!(p.items()[2], Item::Data(Data::Asciz(b"a#b\n".to_vec())));
        assert_eq!(p.items()[3], Item::Data(Data::Byte(vec![0xFF, 0x7F])));
        assert_eq!(p.items()[4], Item::Data(Data::Word(vec![0xFFFF_FFFF])));
    }

    #[test]
    fn instructions_outside_text_are_rejected() {
        assert!(matches!(parse_program(".data\nnop"), Err(AsmError::Misplaced(..))));
        assert!(matches!(parse_program(".word 3"), Err(AsmError::Misplaced(..))));
    }
}
