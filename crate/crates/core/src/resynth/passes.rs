use crate::asm::{Instruction, Item, Mnemonic, Program, Reg};

use super::{check_scratch_dead, LabelGen, ResynthError, ADD_SCRATCH, AND_SCRATCH, MUL_SCRATCH};

use Mnemonic::*;

/// Replacement for one instruction and the scratch registers it clobbers.
struct Rewrite {
    items: Vec<Item>,
    scratch: &'static [Reg],
}

fn ins(i: Instruction) -> Item {
    Item::Instr(i)
}

fn label(l: &str) -> Item {
    Item::Label(l.to_string())
}

fn copy(rd: Reg, rs: Reg) -> Instruction {
    Instruction::imm(Xori, rd, rs, 0)
}

fn rewrite(
    p: &Program,
    prefix: &'static str,
    mut f: impl FnMut(&Instruction, &mut LabelGen) -> Option<Rewrite>,
) -> Result<Program, ResynthError> {
    let instrs: Vec<&Instruction> = p.instructions().collect();
    let mut labels = LabelGen::new(prefix, p.items());
    let mut out = Vec::with_capacity(p.items().len());
    let mut index = 0;
    for item in p.items() {
        let Item::Instr(i) = item else {
            out.push(item.clone());
            continue;
        };
        match f(i, &mut labels) {
            Some(rw) => {
                let used = i.reads().into_iter().chain(i.writes());
                if let Some(reg) = used.into_iter().find(|r| rw.scratch.contains(r)) {
                    return Err(ResynthError::ScratchAlias { index, mnemonic: i.op.name(), reg });
                }
                check_scratch_dead(&instrs, index, rw.scratch)?;
                out.extend(rw.items);
            }
            None => out.push(item.clone()),
        }
        index += 1;
    }
    Ok(Program::new(out)?)
}

/// Replaces every `mul rd, rs1, rs2` with a shift-and-add loop over the
/// bits of `rs2`, using `t4`, `t5`, `t6`.
pub fn pass_mul_to_shift_add(p: &Program) -> Result<Program, ResynthError> {
    let [a, b, bit] = MUL_SCRATCH;
    rewrite(p, "mul", |i, labels| {
        if i.op != Mul {
            return None;
        }
        let [lp, skip, done] = labels.fresh(["loop", "skip", "done"]);
        let items = vec![
            ins(Instruction::imm(Addi, a, i.rs1, 0)),
            ins(Instruction::imm(Addi, b, i.rs2, 0)),
            ins(Instruction::imm(Addi, i.rd, Reg::ZERO, 0)),
            ins(Instruction::branch(Beq, b, Reg::ZERO, &done)),
            label(&lp),
            ins(Instruction::imm(Andi, bit, b, 1)),
            ins(Instruction::branch(Beq, bit, Reg::ZERO, &skip)),
            ins(Instruction::reg(Add, i.rd, i.rd, a)),
            label(&skip),
            ins(Instruction::imm(Slli, a, a, 1)),
            ins(Instruction::imm(Srli, b, b, 1)),
            ins(Instruction::branch(Bne, b, Reg::ZERO, &lp)),
            label(&done),
        ];
        Some(Rewrite { items, scratch: &MUL_SCRATCH })
    })
}

/// Replaces `add`, `addi` and `sub` with xor/and ripple loops using `t3`
/// (running addend) and `t6` (carry or borrow). `addi` with a zero
/// immediate or a zero base becomes a single `xori`.
pub fn pass_add_to_xor_and(p: &Program) -> Result<Program, ResynthError> {
    let [b, carry] = ADD_SCRATCH;
    rewrite(p, "add", |i, labels| {
        let (rd, rs1) = (i.rd, i.rs1);
        let mut items = Vec::new();
        match i.op {
            Addi if i.imm == 0 => return Some(Rewrite { items: vec![ins(copy(rd, rs1))], scratch: &[] }),
            Addi if rs1 == Reg::ZERO => {
                let items = vec![ins(Instruction::imm(Xori, rd, Reg::ZERO, i.imm))];
                return Some(Rewrite { items, scratch: &[] });
            }
            Sub if i.rs2 == Reg::ZERO => return Some(Rewrite { items: vec![ins(copy(rd, rs1))], scratch: &[] }),
            Addi => items.push(ins(Instruction::imm(Xori, b, Reg::ZERO, i.imm))),
            Add | Sub => items.push(ins(copy(b, i.rs2))),
            _ => return None,
        }
        let [lp, done] = labels.fresh(["loop", "done"]);
        if rd != rs1 {
            items.push(ins(copy(rd, rs1)));
        }
        if i.op != Addi {
            items.push(ins(Instruction::branch(Beq, b, Reg::ZERO, &done)));
        }
        items.push(label(&lp));
        if i.op == Sub {
            items.push(ins(Instruction::imm(Xori, carry, rd, -1)));
            items.push(ins(Instruction::reg(And, carry, carry, b)));
        } else {
            items.push(ins(Instruction::reg(And, carry, rd, b)));
        }
        items.extend([
            ins(Instruction::reg(Xor, rd, rd, b)),
            ins(Instruction::imm(Slli, b, carry, 1)),
            ins(Instruction::branch(Bne, b, Reg::ZERO, &lp)),
            label(&done),
        ]);
        Some(Rewrite { items, scratch: &ADD_SCRATCH })
    })
}

/// Replaces `and`/`andi` with `~(~a | ~b)`, inverting by xor with -1.
/// `and` keeps `~b` in `t5`; `andi` folds `~imm` into an `ori` and needs no
/// scratch. `rs2` is inverted before `rd` is written, so `rd` may alias
/// either operand.
pub fn pass_and_to_demorgan(p: &Program) -> Result<Program, ResynthError> {
    let [nb] = AND_SCRATCH;
    rewrite(p, "and", |i, _| {
        let not_a = ins(Instruction::imm(Xori, i.rd, i.rs1, -1));
        let (items, scratch): (_, &'static [Reg]) = match i.op {
            And => (
                vec![
                    ins(Instruction::imm(Xori, nb, i.rs2, -1)),
                    not_a,
                    ins(Instruction::reg(Or, i.rd, i.rd, nb)),
                ],
                &AND_SCRATCH,
            ),
            Andi => (vec![not_a, ins(Instruction::imm(Ori, i.rd, i.rd, !i.imm))], &[]),
            _ => return None,
        };
        let mut items = items;
        items.push(ins(Instruction::imm(Xori, i.rd, i.rd, -1)));
        Some(Rewrite { items, scratch })
    })
}
