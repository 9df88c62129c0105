//! RV32IM-subset emulator with a unit-decomposed, failable ALU.
//!
//! Every value produced by an ALU functional unit goes through
//! [`alu_execute_on`], including the implicit uses: branch comparisons are a
//! subtraction on the adder and load/store/`jalr` addresses are an addition.
//! A fault on the ADD unit at [`FaultScope::Unit`] therefore corrupts control
//! flow and addressing, not just `add` instructions.

mod alu;
mod cost;
mod decode;
mod fault;
mod memory;
mod trace;

use serde::{Deserialize, Serialize};

use crate::asm::{assemble, AsmError, Mnemonic, Program, Reg, DATA_BASE, TEXT_BASE};

pub use alu::{alu_execute, alu_execute_on, AluOp, AluPath};
pub use cost::{CostModel, ZeroCost};
pub use decode::{decode, Decoded};
pub use fault::{FaultConfig, FaultConfigError, FaultKind, FaultScope, UnitFault};
pub use memory::{MemFault, Memory, DEFAULT_WINDOW};
pub use trace::TraceWriter;

/// `a7` value requesting program exit with code `a0`.
pub const SYS_EXIT: u32 = 93;

/// Bytes kept free below the top of the window for the stack.
const STACK_RESERVE: u32 = 64 * 1024;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LoadError {
    #[error(transparent)]
    Asm(#[from] AsmError),
    #[error("entry label `{0}` not found")]
    MissingEntry(String),
    #[error("{section} section needs {bytes} bytes but only {limit} fit")]
    TooLarge { section: &'static str, bytes: u32, limit: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[serde(tag = "trap", rename_all = "snake_case")]
pub enum Trap {
    #[error("misaligned access to {addr:#010x} at pc {pc:#010x}")]
    Misaligned { pc: u32, addr: u32 },
    #[error("access to unmapped address {addr:#010x} at pc {pc:#010x}")]
    Unmapped { pc: u32, addr: u32 },
    #[error("illegal instruction word {word:#010x} at pc {pc:#010x}")]
    IllegalInstruction { pc: u32, word: u32 },
    #[error("unsupported ecall {code} at pc {pc:#010x}")]
    UnsupportedEcall { pc: u32, code: u32 },
}

impl Trap {
    fn from_mem(pc: u32, fault: MemFault) -> Self {
        match fault {
            MemFault::Unmapped(addr) => Trap::Unmapped { pc, addr },
            MemFault::Misaligned(addr) => Trap::Misaligned { pc, addr },
        }
    }
}

/// Architectural state plus accounting.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MachineState {
    pub regs: [u32; 32],
    pub pc: u32,
    pub mem: Memory,
    pub cycles: u64,
    pub retired: u64,
    pub halted: bool,
    pub exit_code: Option<u32>,
}

impl MachineState {
    pub fn new(mem: Memory) -> Self {
        MachineState { regs: [0; 32], pc: TEXT_BASE, mem, cycles: 0, retired: 0, halted: false, exit_code: None }
    }

    pub fn reg(&self, r: Reg) -> u32 {
        self.regs[r.index()]
    }

    /// Writes to `zero` are discarded.
    pub fn set_reg(&mut self, r: Reg, value: u32) {
        if r != Reg::ZERO {
            self.regs[r.index()] = value;
        }
    }

    /// Executes one instruction. On a trap the state is left at the
    /// faulting instruction (nothing retired, pc unchanged).
    pub fn step(&mut self, faults: &FaultConfig, cost: &CostModel) -> Result<StepInfo, Trap> {
        debug_assert!(!self.halted, "step on a halted machine");
        let pc = self.pc;
        let word = self.mem.read_u32(pc).map_err(|f| Trap::from_mem(pc, f))?;
        let d = decode(word).ok_or(Trap::IllegalInstruction { pc, word })?;
        let x = |r: Reg| self.regs[r.index()];
        let (a, b) = (x(d.rs1), x(d.rs2));
        let imm = d.imm as u32;
        let alu = |op: AluOp, a: u32, b: u32| alu_execute_on(op, a, b, faults, AluPath::Instruction);
        let agu = |a: u32, b: u32| alu_execute_on(AluOp::Add, a, b, faults, AluPath::Implicit);
        let mem_trap = |f: MemFault| Trap::from_mem(pc, f);

        let mut next = pc.wrapping_add(4);
        let mut taken = false;
        let mut write: Option<u32> = None;
        use Mnemonic::*;
        match d.op {
            Add => write = Some(alu(AluOp::Add, a, b)),
            Sub => write = Some(alu(AluOp::Sub, a, b)),
            Sll => write = Some(alu(AluOp::Sll, a, b)),
            Srl => write = Some(alu(AluOp::Srl, a, b)),
            Sra => write = Some(alu(AluOp::Sra, a, b)),
            And => write = Some(alu(AluOp::And, a, b)),
            Or => write = Some(alu(AluOp::Or, a, b)),
            Xor => write = Some(alu(AluOp::Xor, a, b)),
            Mul => write = Some(alu(AluOp::Mul, a, b)),
            Addi => write = Some(alu(AluOp::Add, a, imm)),
            Andi => write = Some(alu(AluOp::And, a, imm)),
            Ori => write = Some(alu(AluOp::Or, a, imm)),
            Xori => write = Some(alu(AluOp::Xor, a, imm)),
            Slli => write = Some(alu(AluOp::Sll, a, imm)),
            Srli => write = Some(alu(AluOp::Srl, a, imm)),
            Srai => write = Some(alu(AluOp::Sra, a, imm)),
            Lui => write = Some(imm),
            Auipc => write = Some(alu(AluOp::Add, pc, imm)),
            Lw => write = Some(self.mem.read_u32(agu(a, imm)).map_err(mem_trap)?),
            Lb => write = Some(self.mem.read_u8(agu(a, imm)).map_err(mem_trap)? as i8 as i32 as u32),
            Lbu => write = Some(self.mem.read_u8(agu(a, imm)).map_err(mem_trap)? as u32),
            Sw => self.mem.write_u32(agu(a, imm), b).map_err(mem_trap)?,
            Sb => self.mem.write_u8(agu(a, imm), b as u8).map_err(mem_trap)?,
            Beq | Bne | Blt | Bge | Bltu | Bgeu => {
                let diff = alu_execute_on(AluOp::Sub, a, b, faults, AluPath::Implicit);
                taken = branch_taken(d.op, a, b, diff);
                if taken {
                    next = pc.wrapping_add(imm);
                }
            }
            Jal => {
                write = Some(pc.wrapping_add(4));
                next = pc.wrapping_add(imm);
                taken = true;
            }
            Jalr => {
                write = Some(pc.wrapping_add(4));
                next = agu(a, imm) & !1;
                taken = true;
            }
            Ecall => {
                let code = self.regs[Reg::A7.index()];
                if code != SYS_EXIT {
                    return Err(Trap::UnsupportedEcall { pc, code });
                }
                self.halted = true;
                self.exit_code = Some(self.regs[Reg::A0.index()]);
            }
        }
        if !next.is_multiple_of(4) {
            return Err(Trap::Misaligned { pc, addr: next });
        }
        let rd = write.map(|v| {
            self.set_reg(d.rd, v);
            (d.rd, self.reg(d.rd))
        });
        let cycles = cost.cycles(d.op, taken);
        self.pc = next;
        self.cycles += cycles as u64;
        self.retired += 1;
        Ok(StepInfo { cycle: self.cycles - cycles as u64, pc, op: d.op, rd, cycles })
    }
}

/// Branch outcome derived from the adder's `a - b`, so a faulty adder
/// produces wrong decisions. Exact when `diff == a - b`.
fn branch_taken(op: Mnemonic, a: u32, b: u32, diff: u32) -> bool {
    let msb = |v: u32| v >> 31 == 1;
    let overflow = msb((a ^ b) & (a ^ diff));
    let borrow = msb((!a & b) | (!(a ^ b) & diff));
    match op {
        Mnemonic::Beq => diff == 0,
        Mnemonic::Bne => diff != 0,
        Mnemonic::Blt => msb(diff) != overflow,
        Mnemonic::Bge => msb(diff) == overflow,
        Mnemonic::Bltu => borrow,
        Mnemonic::Bgeu => !borrow,
        _ => unreachable!("not a branch"),
    }
}

/// What one retired instruction did.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepInfo {
    /// Cycle count before the instruction.
    pub cycle: u64,
    pub pc: u32,
    pub op: Mnemonic,
    /// Destination register and the value it holds afterwards.
    pub rd: Option<(Reg, u32)>,
    pub cycles: u32,
}

/// Loads `p` into a fresh 1 MiB machine: text at [`TEXT_BASE`], data at
/// [`DATA_BASE`], `sp` at the top of the window, `pc` at `entry`.
pub fn load(p: &Program, entry: &str) -> Result<MachineState, LoadError> {
    load_with_window(p, entry, DEFAULT_WINDOW)
}

pub fn load_with_window(p: &Program, entry: &str, window: u32) -> Result<MachineState, LoadError> {
    let image = assemble(p)?;
    let pc = *image.symbols.get(entry).ok_or_else(|| LoadError::MissingEntry(entry.to_string()))?;
    let mut mem = Memory::new(window);
    let text_bytes = 4 * image.text.len() as u32;
    if text_bytes > DATA_BASE - TEXT_BASE {
        return Err(LoadError::TooLarge { section: "text", bytes: text_bytes, limit: DATA_BASE - TEXT_BASE });
    }
    let data_limit = mem.window().saturating_sub(DATA_BASE + STACK_RESERVE);
    if image.data.len() as u32 > data_limit {
        return Err(LoadError::TooLarge { section: "data", bytes: image.data.len() as u32, limit: data_limit });
    }
    for (i, w) in image.text.iter().enumerate() {
        mem.write_u32(TEXT_BASE + 4 * i as u32, *w).expect("text fits the window");
    }
    mem.write_bytes(DATA_BASE, &image.data).expect("data fits the window");
    let mut state = MachineState::new(mem);
    state.pc = pc;
    state.regs[Reg::SP.index()] = state.mem.window();
    Ok(state)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Termination {
    Exit { code: u32 },
    CycleLimit,
    Trap(Trap),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunResult {
    pub state: MachineState,
    pub cycles: u64,
    pub retired: u64,
    pub termination: Termination,
}

impl RunResult {
    pub fn exit_code(&self) -> Option<u32> {
        match self.termination {
            Termination::Exit { code } => Some(code),
            _ => None,
        }
    }
}

/// Steps until exit, trap, or the cycle budget is used up. The budget is
/// checked before each instruction, so the final count can exceed
/// `max_cycles` by less than the most expensive instruction.
pub fn run(state: MachineState, faults: &FaultConfig, cost: &CostModel, max_cycles: u64) -> RunResult {
    run_observed(state, faults, cost, max_cycles, |_, _| {})
}

/// [`run`] with a callback after every retired instruction.
pub fn run_observed(
    mut state: MachineState,
    faults: &FaultConfig,
    cost: &CostModel,
    max_cycles: u64,
    mut observe: impl FnMut(&StepInfo, &MachineState),
) -> RunResult {
    let termination = loop {
        if state.halted {
            break Termination::Exit { code: state.exit_code.unwrap_or_default() };
        }
        if state.cycles >= max_cycles {
            break Termination::CycleLimit;
        }
        match state.step(faults, cost) {
            Ok(info) => observe(&info, &state),
            Err(trap) => break Termination::Trap(trap),
        }
    };
    RunResult { cycles: state.cycles, retired: state.retired, state, termination }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asm::parse_program;
    use crate::unit::Unit;

    fn boot(src: &str) -> MachineState {
        load(&parse_program(src).unwrap(), "main").unwrap()
    }

    fn exit_of(src: &str, faults: &FaultConfig) -> Termination {
        run(boot(src), faults, &CostModel::default(), 1_000_000).termination
    }

    #[test]
    fn load_layout() {
        let s = boot("main: nop\necall");
        assert_eq!(s.pc, 0x1000);
        assert_eq!(s.regs[Reg::SP.index()], DEFAULT_WINDOW);
        let s = boot(".data\n.word 1, 2, 3\n.text\nnop\nmain: nop");
        assert_eq!(s.pc, 0x1004);
        assert_eq!(s.mem.read_u32(DATA_BASE + 8), Ok(3));
        assert_eq!(s.mem.read_u32(DATA_BASE + 12), Ok(0));
        let p = parse_program("start: nop").unwrap();
        assert_eq!(load(&p, "main"), Err(LoadError::MissingEntry("main".into())));
    }

    #[test]
    fn program_too_large() {
        let p = parse_program(".data\n.word 0").unwrap();
        let big: Vec<_> = std::iter::once(crate::asm::Item::Label("main".into()))
            .chain(std::iter::repeat_n(
                crate::asm::Item::Instr(crate::asm::Instruction::imm(Mnemonic::Addi, Reg::ZERO, Reg::ZERO, 0)),
                ((DATA_BASE - TEXT_BASE) / 4 + 1) as usize,
            ))
            .collect();
        let big = Program::new(big).unwrap();
        assert!(matches!(load(&big, "main"), Err(LoadError::TooLarge { section: "text", .. })));
        assert!(matches!(
            load_with_window(&p, "main", DATA_BASE),
            Err(LoadError::MissingEntry(_))
        ));
    }

    #[test]
    fn addi_retires_in_one_cycle() {
        let mut s = boot("main: addi t0, zero, 5");
        let info = s.step(&FaultConfig::healthy(), &CostModel::default()).unwrap();
        assert_eq!(s.regs[5], 5);
        assert_eq!(s.cycles, 1);
        assert_eq!(info.rd, Some((Reg::T0, 5)));
    }

    #[test]
    fn taken_branch_costs_two() {
        let mut s = boot("main: beq zero, zero, t\nt: nop");
        s.step(&FaultConfig::healthy(), &CostModel::default()).unwrap();
        assert_eq!(s.cycles, 2);
        assert_eq!(s.pc, 0x1004);
    }

    #[test]
    fn load_from_unmapped_address_traps() {
        let mut s = boot("main: li t0, 0x80000000\nlw a0, 0(t0)");
        let f = FaultConfig::healthy();
        let c = CostModel::default();
        s.step(&f, &c).unwrap();
        let before = s.clone();
        assert_eq!(s.step(&f, &c), Err(Trap::Unmapped { pc: 0x1004, addr: 0x8000_0000 }));
        assert_eq!(s, before);
        assert!(matches!(exit_of("main: lw a0, 2(sp)", &f), Termination::Trap(Trap::Misaligned { .. })));
    }

    #[test]
    fn infinite_loop_hits_cycle_limit() {
        let r = run(boot("main: j main"), &FaultConfig::healthy(), &CostModel::default(), 1000);
        assert_eq!(r.termination, Termination::CycleLimit);
        assert_eq!(r.cycles, 1000);
        assert_eq!(r.retired, 500);
    }

    #[test]
    fn falling_off_the_end_is_illegal() {
        let t = exit_of("main: nop", &FaultConfig::healthy());
        assert_eq!(t, Termination::Trap(Trap::IllegalInstruction { pc: 0x1004, word: 0 }));
        let t = exit_of("main: li a7, 64\necall", &FaultConfig::healthy());
        assert!(matches!(t, Termination::Trap(Trap::UnsupportedEcall { code: 64, .. })));
    }

    #[test]
    fn exit_call_and_x0() {
        let src = "main:\n addi zero, zero, 9\n li a0, 7\n li a7, 93\n ecall";
        let r = run(boot(src), &FaultConfig::healthy(), &CostModel::default(), 100);
        assert_eq!(r.exit_code(), Some(7));
        assert_eq!(r.state.regs[0], 0);
    }

    #[test]
    fn byte_loads_extend_correctly() {
        let src = "main:\n la t0, v\n lb a1, 0(t0)\n lbu a2, 0(t0)\n sb a1, 1(t0)\n lw a0, 0(t0)\n li a7, 93\n ecall\n.data\nv: .word 0x80\n";
        let r = run(boot(src), &FaultConfig::healthy(), &CostModel::default(), 1000);
        assert_eq!(r.state.regs[11], 0xFFFF_FF80);
        assert_eq!(r.state.regs[12], 0x80);
        assert_eq!(r.exit_code(), Some(0x8080));
    }

    #[test]
    fn branch_conditions_match_host_comparisons() {
        let vals = [0u32, 1, 2, 0x7FFF_FFFF, 0x8000_0000, 0xFFFF_FFFF, 0x1234_5678, 0xFFFF_0000];
        for &a in &vals {
            for &b in &vals {
                let d = a.wrapping_sub(b);
                assert_eq!(branch_taken(Mnemonic::Beq, a, b, d), a == b);
                assert_eq!(branch_taken(Mnemonic::Bne, a, b, d), a != b);
                assert_eq!(branch_taken(Mnemonic::Blt, a, b, d), (a as i32) < (b as i32));
                assert_eq!(branch_taken(Mnemonic::Bge, a, b, d), (a as i32) >= (b as i32));
                assert_eq!(branch_taken(Mnemonic::Bltu, a, b, d), a < b);
                assert_eq!(branch_taken(Mnemonic::Bgeu, a, b, d), a >= b);
            }
        }
    }

    #[test]
    fn adder_faults_corrupt_addressing() {
        let src = "main:\n la t0, v\n lw a0, 0(t0)\n li a7, 93\n ecall\n.data\nv: .word 5\n";
        let mut faults = FaultConfig::healthy();
        faults.set(Unit::Add, UnitFault::new(FaultKind::StuckAt { bit: 1, value: 1 }));
        // la's addi and the load address both go through the faulty adder
        assert!(matches!(exit_of(src, &faults), Termination::Trap(Trap::Misaligned { .. })));
        faults.set(Unit::Add, UnitFault::instruction_only(FaultKind::StuckAt { bit: 1, value: 1 }));
        assert!(matches!(exit_of(src, &faults), Termination::Trap(Trap::Misaligned { .. })));
        let src = "main:\n lui t0, 0x10\n lw a0, 0(t0)\n lui a7, 0\n xori a7, a7, 93\n ecall\n.data\nv: .word 5\n";
        assert_eq!(exit_of(src, &faults), Termination::Exit { code: 5 });
    }
}
