//! Translation of machine instructions to BIR fragments.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::bir::expr::*;
use crate::bir::{AddrWidth, BExpr, BType, Label, Typing, Width};
use crate::isa::{decode, step_cases, Field, Flag, GuardedEffect, Instr, MBin, MExpr, MachState};
use crate::sem::{Block, Cf, Program, Stmt};

pub const MEM: &str = "MEM";
pub const SP: &str = "SP";

/// BIR variable holding a machine field. The program counter has no variable.
pub fn var_name(f: Field) -> Option<String> {
    Some(match f {
        Field::X(i) => format!("R{i}"),
        Field::Sp => SP.into(),
        Field::Flag(fl) => fl.name().into(),
        Field::Mem => MEM.into(),
        Field::Pc => return None,
    })
}

/// Types of every variable of the machine-to-BIR mapping.
pub fn machine_typing() -> Typing {
    let mut t = Typing::new();
    for i in 0..31 {
        t.insert(format!("R{i}"), BType::Reg(Width::W64));
    }
    t.insert(SP.into(), BType::Reg(Width::W64));
    for f in Flag::ALL {
        t.insert(f.name().into(), BType::BOOL);
    }
    t.insert(MEM.into(), BType::Mem(AddrWidth::A64));
    t
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum LiftError {
    #[error("no instructions")]
    NoInstructions,
    #[error("duplicate instruction address {0:#x}")]
    DuplicateAddress(u64),
    #[error("misaligned instruction address {0:#x}")]
    Misaligned(u64),
    #[error("entry {0:#x} is not an instruction address")]
    BadEntry(u64),
    #[error("unsupported operator {0} in machine expression")]
    UnsupportedOperator(&'static str),
    #[error("case without a program-counter update")]
    NoPcUpdate,
    #[error(transparent)]
    Unsupported(#[from] crate::isa::Unsupported),
}

/// A set of disjoint inclusive address intervals, kept sorted and merged.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MemRegion {
    intervals: Vec<(u64, u64)>,
}

impl MemRegion {
    pub fn new(intervals: impl IntoIterator<Item = (u64, u64)>) -> MemRegion {
        let mut v: Vec<(u64, u64)> = intervals.into_iter().map(|(a, b)| (a.min(b), a.max(b))).collect();
        v.sort_unstable();
        let mut out: Vec<(u64, u64)> = Vec::with_capacity(v.len());
        for (lo, hi) in v {
            match out.last_mut() {
                Some(last) if lo <= last.1.saturating_add(1) => last.1 = last.1.max(hi),
                _ => out.push((lo, hi)),
            }
        }
        MemRegion { intervals: out }
    }

    pub fn intervals(&self) -> &[(u64, u64)] {
        &self.intervals
    }

    pub fn contains(&self, a: u64) -> bool {
        self.intervals.iter().any(|&(lo, hi)| lo <= a && a <= hi)
    }

    /// True if any of the `len` bytes from `a` (wrapping) is inside.
    pub fn touches(&self, a: u64, len: u64) -> bool {
        (0..len).any(|i| self.contains(a.wrapping_add(i)))
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }
}

impl fmt::Display for MemRegion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (lo, hi)) in self.intervals.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "[{lo:#x}, {hi:#x}]")?;
        }
        Ok(())
    }
}

/// Translates a machine expression to BIR; the program counter becomes the
/// constant `at`.
pub fn translate_mach_expr(e: &MExpr, at: u64) -> Result<BExpr, LiftError> {
    let tr = |x: &MExpr| translate_mach_expr(x, at);
    let width = |x: &MExpr| x.width().ok_or(LiftError::UnsupportedOperator("memory operand"));
    Ok(match e {
        MExpr::Const(w) => BExpr::Const(*w),
        MExpr::Field(Field::Pc) => w64(at),
        MExpr::Field(f) => var(var_name(*f).expect("mapped field")),
        MExpr::Not(a) => not(tr(a)?),
        MExpr::Bin(op, a, b) => {
            let (a, b) = (tr(a)?, tr(b)?);
            match op {
                MBin::Add => add(a, b),
                MBin::Sub => sub(a, b),
                MBin::And => and(a, b),
                MBin::Or => or(a, b),
                MBin::Xor => xor(a, b),
                MBin::Eq => eq(a, b),
                MBin::ULt => ult(a, b),
            }
        }
        MExpr::Shl(a, k) => shl(tr(a)?, word(width(a)?, u64::from(*k))),
        MExpr::LShr(a, k) => lshr(tr(a)?, word(width(a)?, u64::from(*k))),
        MExpr::AShr(a, k) => ashr(tr(a)?, word(width(a)?, u64::from(*k))),
        MExpr::Ror(a, k) => {
            let w = width(a)?;
            let k = u64::from(*k) % u64::from(w.bits());
            let x = tr(a)?;
            if k == 0 {
                x
            } else {
                or(lshr(x.clone(), word(w, k)), shl(x, word(w, u64::from(w.bits()) - k)))
            }
        }
        MExpr::Msb(a) => {
            let w = width(a)?;
            trunc(Width::W1, lshr(tr(a)?, word(w, u64::from(w.bits() - 1))))
        }
        // Carry out of x + y is (~x) <u y.
        MExpr::CarryAdd(a, b) => ult(not(tr(a)?), tr(b)?),
        MExpr::CarrySub(a, b) => not(ult(tr(a)?, tr(b)?)),
        MExpr::OverflowAdd(a, b) => {
            let w = width(a)?;
            let (x, y) = (tr(a)?, tr(b)?);
            let r = add(x.clone(), y.clone());
            let m = and(xor(x, r.clone()), xor(y, r));
            trunc(Width::W1, lshr(m, word(w, u64::from(w.bits() - 1))))
        }
        MExpr::OverflowSub(a, b) => {
            let w = width(a)?;
            let (x, y) = (tr(a)?, tr(b)?);
            let r = sub(x.clone(), y.clone());
            let m = and(xor(x.clone(), y), xor(x, r));
            trunc(Width::W1, lshr(m, word(w, u64::from(w.bits() - 1))))
        }
        MExpr::Aligned(a, k) => {
            let w = width(a)?;
            eq(and(tr(a)?, word(w, (1u64 << k) - 1)), word(w, 0))
        }
        MExpr::ZeroExt(w, a) => zext(*w, tr(a)?),
        MExpr::Trunc(w, a) => trunc(*w, tr(a)?),
        MExpr::Read(m, a, w) => load(tr(m)?, tr(a)?, *w),
        MExpr::Write(m, a, v, w) => store(tr(m)?, tr(a)?, tr(v)?, *w),
        MExpr::UDiv(..) => return Err(LiftError::UnsupportedOperator("udiv")),
    })
}

/// Label of the `j`-th (1-based) internal block of the instruction at `at`.
pub fn internal_label(at: u64, j: usize) -> Label {
    Label::Name(format!("{at}-{j}"))
}

fn guards_exhaustive(cases: &[GuardedEffect]) -> bool {
    let t = MExpr::bool(true);
    match cases {
        [c] => c.guard == t,
        [a, b] => matches!(&b.guard, MExpr::Not(g) if **g == a.guard) || a.guard == t,
        _ => cases.iter().any(|c| c.guard == t),
    }
}

fn implies_aligned(guard: &MExpr, addr: &MExpr, k: u32) -> bool {
    match guard {
        MExpr::Aligned(a, k2) => **a == *addr && *k2 >= k,
        MExpr::Bin(MBin::And, x, y) => implies_aligned(x, addr, k) || implies_aligned(y, addr, k),
        _ => false,
    }
}

/// `a .. a+n-1` lies outside `memr`. The short form assumes the access does
/// not wrap around the address space, which alignment guarantees.
fn outside_memr(a: &BExpr, n: u64, memr: &MemRegion, no_wrap: bool) -> BExpr {
    let last = if n > 1 { add(a.clone(), w64(n - 1)) } else { a.clone() };
    conj(memr.intervals().iter().map(|&(lo, hi)| {
        let below = ult(last.clone(), w64(lo));
        let above = ult(w64(hi), a.clone());
        if no_wrap || n == 1 {
            bor(below, above)
        } else {
            let wraps = ult(last.clone(), a.clone());
            bor(band(below.clone(), above.clone()), band(not(wraps), bor(below, above)))
        }
    }))
}

/// Constant value of `e` once the program counter is fixed to `at`.
fn static_value(e: &MExpr, at: u64) -> Option<u64> {
    let mut reads = BTreeSet::new();
    e.reads(&mut reads);
    if reads.iter().all(|f| *f == Field::Pc) && e.width().is_some() {
        let s = MachState { pc: at, ..MachState::default() };
        Some(e.eval_word(&s).bits())
    } else {
        None
    }
}

/// Target of a case when it only moves the program counter to a constant.
fn pc_only_target(c: &GuardedEffect, at: u64) -> Option<u64> {
    match c.updates.as_slice() {
        [(Field::Pc, e)] => static_value(e, at),
        _ => None,
    }
}

/// Statements and control flow of one case.
fn case_body(c: &GuardedEffect, at: u64, memr: &MemRegion) -> Result<(Vec<Stmt>, Cf), LiftError> {
    let mut stmts = Vec::new();
    for (f, e) in &c.updates {
        if *f != Field::Mem {
            continue;
        }
        for (addr, w) in e.written_addresses() {
            let n = u64::from(w.bytes().expect("addressable width"));
            if memr.is_empty() {
                continue;
            }
            let aligned = implies_aligned(&c.guard, addr, n.trailing_zeros());
            stmts.push(Stmt::Assert(outside_memr(&translate_mach_expr(addr, at)?, n, memr, aligned)));
        }
    }

    let pc = c.update(Field::Pc).ok_or(LiftError::NoPcUpdate)?;
    let written: BTreeSet<Field> = c.updates.iter().map(|(f, _)| *f).filter(|f| *f != Field::Pc).collect();
    let read_by_others = |f: Field| {
        c.updates.iter().any(|(g, e)| {
            if *g == f {
                return false;
            }
            let mut r = BTreeSet::new();
            e.reads(&mut r);
            r.contains(&f)
        })
    };
    let needs_tmp: BTreeSet<Field> = written.iter().copied().filter(|f| read_by_others(*f)).collect();
    let tmp = |f: Field| format!("tmp_{}", var_name(f).expect("mapped field"));

    for (f, e) in &c.updates {
        if needs_tmp.contains(f) {
            stmts.push(Stmt::Assign(tmp(*f), translate_mach_expr(e, at)?));
        }
    }
    let target = match static_value(pc, at) {
        Some(t) => w64(t),
        None => {
            let mut r = BTreeSet::new();
            pc.reads(&mut r);
            let t = translate_mach_expr(pc, at)?;
            if r.iter().any(|f| written.contains(f)) {
                stmts.push(Stmt::Assign("tmp_PC".into(), t));
                var("tmp_PC")
            } else {
                t
            }
        }
    };
    for (f, e) in &c.updates {
        if *f != Field::Pc && !needs_tmp.contains(f) {
            stmts.push(Stmt::Assign(var_name(*f).expect("mapped field"), translate_mach_expr(e, at)?));
        }
    }
    for (f, _) in &c.updates {
        if needs_tmp.contains(f) {
            stmts.push(Stmt::Assign(var_name(*f).expect("mapped field"), var(tmp(*f))));
        }
    }
    Ok((stmts, Cf::Jmp(target)))
}

/// Builds the fragment for the instruction at `at` from its guarded cases.
pub fn lift_cases(at: u64, cases: &[GuardedEffect], memr: &MemRegion) -> Result<Vec<Block>, LiftError> {
    let mut block0 = Vec::new();
    if !guards_exhaustive(cases) {
        let gs = cases.iter().map(|c| translate_mach_expr(&c.guard, at)).collect::<Result<Vec<_>, _>>()?;
        block0.push(Stmt::Assert(disj(gs)));
    }
    if let [c] = cases {
        let (stmts, cf) = case_body(c, at, memr)?;
        block0.extend(stmts);
        return Ok(vec![Block::new(at, block0, cf)]);
    }

    let mut blocks = Vec::new();
    let mut targets = Vec::new();
    for (j, c) in cases.iter().enumerate() {
        match pc_only_target(c, at) {
            Some(t) => targets.push(w64(t)),
            None => {
                let l = internal_label(at, j + 1);
                let (stmts, cf) = case_body(c, at, memr)?;
                targets.push(label_expr(&l));
                blocks.push(Block { label: l, stmts, cf });
            }
        }
    }
    // Route through the guards in order; the last case takes what remains.
    let n = cases.len();
    let mut dispatch = Vec::new();
    for j in (0..n - 1).rev() {
        let cond = translate_mach_expr(&cases[j].guard, at)?;
        let otherwise = if j == n - 2 { targets[n - 1].clone() } else { label(format!("{at}-c{}", j + 2)) };
        let cf = Cf::CJmp(cond, targets[j].clone(), otherwise);
        if j == 0 {
            dispatch.insert(0, Block::new(at, core::mem::take(&mut block0), cf));
        } else {
            dispatch.insert(0, Block::new(Label::Name(format!("{at}-c{}", j + 1)), Vec::new(), cf));
        }
    }
    dispatch.extend(blocks);
    Ok(dispatch)
}

/// Always-failing placeholder for a word outside the supported subset.
pub fn unsupported_block(at: u64) -> Block {
    Block::new(at, vec![Stmt::Assert(ff())], Cf::Jmp(w64(at.wrapping_add(4))))
}

pub fn lift_instruction(word: u32, at: u64, memr: &MemRegion) -> Result<Vec<Block>, LiftError> {
    let instr = decode(word)?;
    lift_cases(at, &step_cases(&instr), memr)
}

/// Per-instruction record of a lifted program.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LiftedInstr {
    pub addr: u64,
    pub word: u32,
    /// `None` for unsupported words.
    pub instr: Option<Instr>,
    pub cases: Arc<Vec<GuardedEffect>>,
    pub labels: Vec<Label>,
}

#[derive(Clone, Debug)]
pub struct LiftedProgram {
    pub program: Program,
    pub entry: u64,
    /// Instruction-address labels.
    pub entry_labels: BTreeSet<Label>,
    /// Constant jump targets that are not blocks of the program.
    pub exits: BTreeSet<Label>,
    pub memr: MemRegion,
    pub source: Vec<(u64, u32)>,
    pub instrs: Vec<LiftedInstr>,
    pub unsupported: Vec<(u64, u32)>,
    /// Instructions whose cases were reused from an earlier identical word.
    pub cache_hits: usize,
}

impl LiftedProgram {
    pub fn typing(&self) -> Typing {
        machine_typing()
    }

    pub fn instr_at(&self, at: u64) -> Option<&LiftedInstr> {
        self.instrs.iter().find(|i| i.addr == at)
    }

    /// Entry labels plus exits: the stopping set for one-instruction runs.
    pub fn stop_labels(&self) -> BTreeSet<Label> {
        self.entry_labels.union(&self.exits).cloned().collect()
    }
}

/// Constant targets of `cf` as labels.
pub fn static_targets(cf: &Cf) -> impl Iterator<Item = Label> + '_ {
    cf.targets().filter_map(|t| t.as_label())
}

pub fn lift_program(words: &[(u64, u32)], entry: u64) -> Result<LiftedProgram, LiftError> {
    lift_program_with(words, entry, |_, _, cases| cases.to_vec())
}

/// Like [`lift_program`], but passes each instruction's cases through `edit`
/// before translation. Used to inject faults into the lifter.
pub fn lift_program_with(
    words: &[(u64, u32)],
    entry: u64,
    mut edit: impl FnMut(u64, &Instr, &[GuardedEffect]) -> Vec<GuardedEffect>,
) -> Result<LiftedProgram, LiftError> {
    if words.is_empty() {
        return Err(LiftError::NoInstructions);
    }
    let mut seen = BTreeSet::new();
    for &(a, _) in words {
        if a % 4 != 0 {
            return Err(LiftError::Misaligned(a));
        }
        if !seen.insert(a) {
            return Err(LiftError::DuplicateAddress(a));
        }
    }
    if !seen.contains(&entry) {
        return Err(LiftError::BadEntry(entry));
    }
    let memr = MemRegion::new(words.iter().map(|&(a, _)| (a, a.wrapping_add(3))));
    let mut cache: BTreeMap<u32, Arc<Vec<GuardedEffect>>> = BTreeMap::new();
    let mut cache_hits = 0;
    let mut blocks = Vec::new();
    let mut instrs = Vec::new();
    let mut unsupported = Vec::new();
    for &(at, word) in words {
        let (instr, cases, frag) = match decode(word) {
            Ok(i) => {
                let cases = match cache.get(&word) {
                    Some(c) => {
                        cache_hits += 1;
                        c.clone()
                    }
                    None => {
                        let c = Arc::new(step_cases(&i));
                        cache.insert(word, c.clone());
                        c
                    }
                };
                let cases = Arc::new(edit(at, &i, &cases));
                let frag = lift_cases(at, &cases, &memr)?;
                (Some(i), cases, frag)
            }
            Err(_) => {
                unsupported.push((at, word));
                (None, Arc::new(Vec::new()), vec![unsupported_block(at)])
            }
        };
        instrs.push(LiftedInstr {
            addr: at,
            word,
            instr,
            cases,
            labels: frag.iter().map(|b| b.label.clone()).collect(),
        });
        blocks.extend(frag);
    }
    let program = Program::new(blocks);
    let exits = program.blocks().iter().flat_map(|b| static_targets(&b.cf)).filter(|l| !program.has_label(l)).collect();
    Ok(LiftedProgram {
        program,
        entry,
        entry_labels: words.iter().map(|&(a, _)| Label::Addr(a)).collect(),
        exits,
        memr,
        source: words.to_vec(),
        instrs,
        unsupported,
        cache_hits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bir::{eval, BValue, Env, Word};
    use crate::typecheck::check_program_with;
    use alloc::string::ToString;

    const AT: u64 = 0x1000_000c;

    fn region() -> MemRegion {
        MemRegion::new([(AT, AT + 3)])
    }

    #[test]
    fn add_is_one_plain_block() {
        let b = lift_instruction(0x8b00_0020, AT, &region()).unwrap();
        assert_eq!(b.len(), 1);
        assert_eq!(b[0].label, Label::Addr(AT));
        assert_eq!(b[0].stmts, vec![Stmt::Assign("R0".into(), add(var("R1"), var("R0")))]);
        assert_eq!(b[0].cf, Cf::Jmp(w64(AT + 4)));
    }

    #[test]
    fn bgt_routes_directly() {
        let b = lift_instruction(0x54ff_fe8c, AT, &region()).unwrap();
        assert_eq!(b.len(), 1);
        assert!(b[0].stmts.is_empty());
        let Cf::CJmp(c, t, e) = &b[0].cf else { panic!() };
        assert_eq!(c.to_string(), "(and (eq Z false) (eq N V))");
        assert_eq!(*t, w64(AT - 0x30));
        assert_eq!(*e, w64(AT + 4));
    }

    #[test]
    fn str_asserts_alignment_then_memr() {
        let b = lift_instruction(0xf900_07e0, AT, &MemRegion::new([(AT, AT + 3)])).unwrap();
        assert_eq!(b.len(), 1);
        let s = &b[0].stmts;
        assert_eq!(s.len(), 3);
        assert_eq!(s[0], Stmt::Assert(eq(and(add(var("SP"), w64(8)), w64(7)), w64(0))));
        assert_eq!(
            s[1],
            Stmt::Assert(bor(
                ult(add(add(var("SP"), w64(8)), w64(7)), w64(AT)),
                ult(w64(AT + 3), add(var("SP"), w64(8)))
            ))
        );
        assert!(matches!(&s[2], Stmt::Assign(v, BExpr::Store(..)) if v == "MEM"));
        assert_eq!(b[0].cf, Cf::Jmp(w64(AT + 4)));
    }

    #[test]
    fn carry_translation_uses_not_ult() {
        let e = MExpr::CarryAdd(alloc::boxed::Box::new(MExpr::x(23)), alloc::boxed::Box::new(MExpr::x(24)));
        assert_eq!(translate_mach_expr(&e, 0).unwrap().to_string(), "(ult (not R23) R24)");
        let e = MExpr::UDiv(alloc::boxed::Box::new(MExpr::x(1)), alloc::boxed::Box::new(MExpr::x(2)));
        assert_eq!(translate_mach_expr(&e, 0), Err(LiftError::UnsupportedOperator("udiv")));
    }

    #[test]
    fn swap_needs_temporaries() {
        let swap = GuardedEffect {
            guard: MExpr::bool(true),
            updates: vec![(Field::X(0), MExpr::x(1)), (Field::X(1), MExpr::x(0)), (Field::Pc, MExpr::pc_plus(4))],
        };
        let b = lift_cases(0x40, &[swap], &MemRegion::default()).unwrap();
        let names: Vec<String> = b[0]
            .stmts
            .iter()
            .map(|s| match s {
                Stmt::Assign(v, e) => format!("{v}={e}"),
                Stmt::Assert(e) => format!("assert {e}"),
            })
            .collect();
        assert_eq!(names, ["tmp_R0=R1", "tmp_R1=R0", "R0=tmp_R0", "R1=tmp_R1"]);
        let env = Env::new().with("R0", Word::new(Width::W64, 1)).with("R1", Word::new(Width::W64, 2));
        let out = crate::sem::exec_block(&Program::new(b), crate::sem::State::new(env, 0x40u64));
        assert_eq!(out.env.get("R0"), Some(&BValue::word(Width::W64, 2)));
        assert_eq!(out.pc, crate::sem::Pc::Failed);
    }

    #[test]
    fn adds_reading_its_destination() {
        // adds x1, x1, #1: the flags read x1, so x1 goes through a temporary.
        let b = lift_instruction(0xb100_0421, 0, &MemRegion::default()).unwrap();
        assert!(matches!(&b[0].stmts[0], Stmt::Assign(v, _) if v == "tmp_R1"));
        assert!(matches!(b[0].stmts.last(), Some(Stmt::Assign(v, BExpr::Var(t))) if v == "R1" && t == "tmp_R1"));
    }

    #[test]
    fn ret_is_indirect() {
        let b = lift_instruction(0xd65f_03c0, 0x2000, &MemRegion::default()).unwrap();
        assert_eq!(b[0].cf, Cf::Jmp(var("R30")));
        assert_eq!(b[0].stmts.len(), 1);
    }

    #[test]
    fn program_lifting() {
        let words = [(0x1000_0004, 0x8b00_0020), (0x1000_0008, 0x54ff_fe8c), (AT, 0xf900_07e0)];
        let lp = lift_program(&words, 0x1000_0004).unwrap();
        assert_eq!(lp.entry_labels.len(), 3);
        assert_eq!(lp.memr.intervals(), &[(0x1000_0004, 0x1000_000f)]);
        assert!(check_program_with(&lp.program, &machine_typing()).is_ok());
        assert!(lp.exits.contains(&Label::Addr(0x1000_0008 - 0x30)));
        assert!(lp.exits.contains(&Label::Addr(0x1000_0010)));
        assert_eq!(lift_program(&[], 0).unwrap_err(), LiftError::NoInstructions);
        assert_eq!(lift_program(&[(0, 0), (0, 0)], 0).unwrap_err(), LiftError::DuplicateAddress(0));
        let lp = lift_program(&[(0, 0), (4, 0x8b00_0020), (8, 0x8b00_0020)], 0).unwrap();
        assert_eq!(lp.unsupported, vec![(0, 0)]);
        assert_eq!(lp.cache_hits, 1);
        assert_eq!(lp.program.blocks()[0].stmts, vec![Stmt::Assert(ff())]);
    }

    #[test]
    fn memr_normalizes() {
        let m = MemRegion::new([(10, 12), (0, 3), (4, 5), (11, 20)]);
        assert_eq!(m.intervals(), &[(0, 5), (10, 20)]);
        assert!(m.touches(8, 3));
        assert!(!m.touches(6, 4));
    }

    #[test]
    fn wrapping_range_check() {
        let memr = MemRegion::new([(0, 3)]);
        let e = outside_memr(&var("a"), 8, &memr, false);
        let check =
            |a: u64| eval(&e, &Env::new().with("a", Word::new(Width::W64, a))).unwrap() == BValue::Word(Word::TRUE);
        assert!(!check(u64::MAX - 2));
        assert!(check(u64::MAX - 10));
        assert!(!check(2));
        assert!(check(4));
    }
}
