use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use super::decode::{decode, Cond, Instr, LogicOp, MoveKind, ShiftKind};
use super::mexpr::{Field, Flag, MBin, MExpr};
use super::MachState;
use crate::bir::Width;

/// One case of an instruction's behavior: when `guard` holds, all `updates`
/// are applied simultaneously (right-hand sides read the pre-state).
#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GuardedEffect {
    pub guard: MExpr,
    pub updates: Vec<(Field, MExpr)>,
}

impl GuardedEffect {
    pub fn update(&self, f: Field) -> Option<&MExpr> {
        self.updates.iter().find(|(g, _)| *g == f).map(|(_, e)| e)
    }

    pub fn apply(&self, s: &MachState) -> MachState {
        let mut out = s.clone();
        for (f, e) in &self.updates {
            match f {
                Field::X(i) => out.r[usize::from(*i)] = e.eval_word(s).bits(),
                Field::Sp => out.sp = e.eval_word(s).bits(),
                Field::Pc => out.pc = e.eval_word(s).bits(),
                Field::Flag(fl) => out.set_flag(*fl, e.eval_bool(s)),
                Field::Mem => out.mem = e.eval_mem(s).into_owned(),
            }
        }
        out
    }
}

impl fmt::Display for GuardedEffect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] ", self.guard)?;
        for (i, (fl, e)) in self.updates.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{fl} <- {e}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Stuck {
    #[error("undecodable word {0:#010x}")]
    Undecodable(u32),
    #[error("unpredictable: no guard holds")]
    Unpredictable,
}

/// Register read; number 31 is SP when `sp31`, else the zero register.
fn read(r: u8, sp31: bool) -> MExpr {
    match (r, sp31) {
        (31, true) => MExpr::Field(Field::Sp),
        (31, false) => MExpr::c64(0),
        (r, _) => MExpr::x(r),
    }
}

/// Register write target; writes to the zero register are dropped.
fn dest(r: u8, sp31: bool) -> Option<Field> {
    match (r, sp31) {
        (31, true) => Some(Field::Sp),
        (31, false) => None,
        (r, _) => Some(Field::X(r)),
    }
}

fn shifted(e: MExpr, kind: ShiftKind, amount: u8) -> MExpr {
    let k = u32::from(amount);
    if k == 0 {
        return e;
    }
    let b = alloc::boxed::Box::new(e);
    match kind {
        ShiftKind::Lsl => MExpr::Shl(b, k),
        ShiftKind::Lsr => MExpr::LShr(b, k),
        ShiftKind::Asr => MExpr::AShr(b, k),
        ShiftKind::Ror => MExpr::Ror(b, k),
    }
}

/// Symbolic guard for a condition code.
pub fn cond_guard(c: Cond) -> MExpr {
    let f = MExpr::flag;
    let base = match c {
        Cond::Eq | Cond::Ne => f(Flag::Z),
        Cond::Cs | Cond::Cc => f(Flag::C),
        Cond::Mi | Cond::Pl => f(Flag::N),
        Cond::Vs | Cond::Vc => f(Flag::V),
        Cond::Hi | Cond::Ls => MExpr::and(f(Flag::C), MExpr::not(f(Flag::Z))),
        Cond::Ge | Cond::Lt => MExpr::eq(f(Flag::N), f(Flag::V)),
        Cond::Gt | Cond::Le => MExpr::and(MExpr::eq(f(Flag::Z), MExpr::bool(false)), MExpr::eq(f(Flag::N), f(Flag::V))),
        Cond::Al | Cond::Nv => return MExpr::bool(true),
    };
    if c.bits() & 1 == 1 {
        MExpr::not(base)
    } else {
        base
    }
}

fn next() -> (Field, MExpr) {
    (Field::Pc, MExpr::pc_plus(4))
}

fn unconditional(mut updates: Vec<(Field, MExpr)>) -> Vec<GuardedEffect> {
    updates.push(next());
    vec![GuardedEffect { guard: MExpr::bool(true), updates }]
}

fn branch(guard: MExpr, offset: i64) -> Vec<GuardedEffect> {
    vec![
        GuardedEffect { guard: guard.clone(), updates: vec![(Field::Pc, MExpr::pc_plus(offset))] },
        GuardedEffect { guard: MExpr::not(guard), updates: vec![next()] },
    ]
}

fn arith(rd: Option<Field>, a: MExpr, b: MExpr, sub: bool, setflags: bool) -> Vec<GuardedEffect> {
    let op = if sub { MBin::Sub } else { MBin::Add };
    let result = MExpr::bin(op, a.clone(), b.clone());
    let mut updates = Vec::new();
    if let Some(rd) = rd {
        updates.push((rd, result.clone()));
    }
    if setflags {
        let (ba, bb) = (alloc::boxed::Box::new(a), alloc::boxed::Box::new(b));
        let (c, v) = if sub {
            (MExpr::CarrySub(ba.clone(), bb.clone()), MExpr::OverflowSub(ba, bb))
        } else {
            (MExpr::CarryAdd(ba.clone(), bb.clone()), MExpr::OverflowAdd(ba, bb))
        };
        updates.push((Field::Flag(Flag::N), MExpr::Msb(alloc::boxed::Box::new(result.clone()))));
        updates.push((Field::Flag(Flag::Z), MExpr::eq(result, MExpr::c64(0))));
        updates.push((Field::Flag(Flag::C), c));
        updates.push((Field::Flag(Flag::V), v));
    }
    unconditional(updates)
}

/// The guarded cases of an instruction. Program-counter arithmetic is
/// expressed over `Field::Pc`, so the result does not depend on the address.
pub fn step_cases(i: &Instr) -> Vec<GuardedEffect> {
    match *i {
        Instr::AddSubImm { rd, rn, imm12, shift12, sub, setflags } => {
            let imm = u64::from(imm12) << if shift12 { 12 } else { 0 };
            arith(dest(rd, !setflags), read(rn, true), MExpr::c64(imm), sub, setflags)
        }
        Instr::AddSubReg { rd, rn, rm, shift, amount, sub, setflags } => {
            arith(dest(rd, false), read(rn, false), shifted(read(rm, false), shift, amount), sub, setflags)
        }
        Instr::LogicReg { op, rd, rn, rm, shift, amount } => {
            let op = match op {
                LogicOp::And => MBin::And,
                LogicOp::Orr => MBin::Or,
                LogicOp::Eor => MBin::Xor,
            };
            let value = MExpr::bin(op, read(rn, false), shifted(read(rm, false), shift, amount));
            unconditional(dest(rd, false).map(|f| (f, value)).into_iter().collect())
        }
        Instr::MovWide { kind, rd, imm16, hw } => {
            let shift = 16 * u32::from(hw);
            let imm = u64::from(imm16) << shift;
            let value = match kind {
                MoveKind::Zero => MExpr::c64(imm),
                MoveKind::Not => MExpr::c64(!imm),
                MoveKind::Keep => {
                    MExpr::or(MExpr::and(read(rd, false), MExpr::c64(!(0xffffu64 << shift))), MExpr::c64(imm))
                }
            };
            unconditional(dest(rd, false).map(|f| (f, value)).into_iter().collect())
        }
        Instr::LdrStr { load, size64, rt, rn, offset } => {
            let addr = MExpr::add(read(rn, true), MExpr::c64(u64::from(offset)));
            let (width, k) = if size64 { (Width::W64, 3) } else { (Width::W32, 2) };
            let guard = MExpr::aligned(addr.clone(), k);
            let mem = alloc::boxed::Box::new(MExpr::Field(Field::Mem));
            let b = alloc::boxed::Box::new;
            let mut updates = Vec::new();
            if load {
                let value = MExpr::Read(mem, b(addr), width);
                let value = if size64 { value } else { MExpr::ZeroExt(Width::W64, b(value)) };
                if let Some(f) = dest(rt, false) {
                    updates.push((f, value));
                }
            } else {
                let value = read(rt, false);
                let value = if size64 { value } else { MExpr::Trunc(Width::W32, b(value)) };
                updates.push((Field::Mem, MExpr::Write(mem, b(addr), b(value), width)));
            }
            updates.push(next());
            vec![GuardedEffect { guard, updates }]
        }
        Instr::B { offset } => {
            vec![GuardedEffect { guard: MExpr::bool(true), updates: vec![(Field::Pc, MExpr::pc_plus(offset))] }]
        }
        Instr::BCond { cond: Cond::Al | Cond::Nv, offset } => step_cases(&Instr::B { offset }),
        Instr::BCond { cond, offset } => branch(cond_guard(cond), offset),
        Instr::Cbz { nonzero, rt, offset } => {
            let zero = MExpr::eq(read(rt, false), MExpr::c64(0));
            branch(if nonzero { MExpr::not(zero) } else { zero }, offset)
        }
        Instr::Ret { rn } => {
            let target = read(rn, false);
            vec![GuardedEffect { guard: MExpr::aligned(target.clone(), 2), updates: vec![(Field::Pc, target)] }]
        }
        Instr::Nop => unconditional(Vec::new()),
    }
}

/// Reference interpreter: fetch, decode, and apply the case whose guard holds.
pub fn mach_step(s: &MachState) -> Result<MachState, Stuck> {
    if !s.pc.is_multiple_of(4) {
        return Err(Stuck::Unpredictable);
    }
    let word = s.fetch(s.pc);
    let instr = decode(word).map_err(|_| Stuck::Undecodable(word))?;
    let cases = step_cases(&instr);
    let case = cases.iter().find(|c| c.guard.eval_bool(s)).ok_or(Stuck::Unpredictable)?;
    Ok(case.apply(s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    #[test]
    fn add_example() {
        let mut s = MachState::with_program(&[(0x1000, 0x8b00_0020)], 0x1000);
        s.r[0] = 2;
        s.r[1] = 3;
        let t = mach_step(&s).unwrap();
        assert_eq!(t.r[0], 5);
        assert_eq!(t.pc, 0x1004);
        let cases = step_cases(&decode(0x8b00_0020).unwrap());
        assert_eq!(cases.len(), 1);
        assert_eq!(cases[0].to_string(), "[true] x0 <- (x1 + x0), pc <- (pc + 0x4)");
    }

    #[test]
    fn bgt_cases() {
        let cases = step_cases(&decode(0x54ff_fe8c).unwrap());
        assert_eq!(cases.len(), 2);
        assert_eq!(cases[0].guard.to_string(), "((Z == false) & (N == V))");
        let mut s = MachState::with_program(&[(0x1000_000c, 0x54ff_fe8c)], 0x1000_000c);
        for nzcv in 0..16u8 {
            s.set_nzcv(nzcv);
            let holding = cases.iter().filter(|c| c.guard.eval_bool(&s)).count();
            assert_eq!(holding, 1);
            let t = mach_step(&s).unwrap();
            let taken = Cond::Gt.holds(s.n, s.z, s.c, s.v);
            assert_eq!(t.pc, if taken { 0x1000_000c - 0x30 } else { 0x1000_0010 });
        }
    }

    #[test]
    fn str_example() {
        let cases = step_cases(&decode(0xf900_07e0).unwrap());
        assert_eq!(cases[0].guard.to_string(), "aligned8((sp + 0x8))");
        let mut s = MachState::with_program(&[(0x1000, 0xf900_07e0)], 0x1000);
        s.sp = 0x8000;
        s.r[0] = 0x1122_3344_5566_7788;
        let t = mach_step(&s).unwrap();
        assert_eq!(t.mem.load(0x8008, Width::W64).unwrap().bits(), 0x1122_3344_5566_7788);
        s.sp = 0x8004;
        assert_eq!(mach_step(&s), Err(Stuck::Unpredictable));
    }

    #[test]
    fn undecodable_and_misaligned() {
        let s = MachState::with_program(&[(0x1000, 0)], 0x1000);
        assert_eq!(mach_step(&s), Err(Stuck::Undecodable(0)));
        let s = MachState::with_program(&[(0x1000, 0xd503_201f)], 0x1002);
        assert_eq!(mach_step(&s), Err(Stuck::Unpredictable));
    }

    #[test]
    fn flag_setting_subtract() {
        // subs xzr, x1, x2 (cmp x1, x2)
        let mut s = MachState::with_program(&[(0, 0xeb02_003f)], 0);
        s.r[1] = 5;
        s.r[2] = 7;
        let t = mach_step(&s).unwrap();
        assert!(t.n && !t.z && !t.c && !t.v);
        s.r[2] = 5;
        let t = mach_step(&s).unwrap();
        assert!(!t.n && t.z && t.c && !t.v);
    }

    #[test]
    fn movk_keeps_other_halfwords() {
        let mut s = MachState::with_program(&[(0, 0xf2a0_0020)], 0);
        s.r[0] = 0xffff_ffff_ffff_ffff;
        let t = mach_step(&s).unwrap();
        assert_eq!(t.r[0], 0xffff_ffff_0001_ffff);
    }
}
