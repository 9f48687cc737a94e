//! Programs, states and the block-level operational semantics.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::bir::{eval, BExpr, BType, BValue, Env, Label, Width};

#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Stmt {
    Assign(String, BExpr),
    Assert(BExpr),
}

#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Cf {
    Jmp(BExpr),
    CJmp(BExpr, BExpr, BExpr),
}

impl Cf {
    pub fn targets(&self) -> impl Iterator<Item = &BExpr> {
        let arr: [Option<&BExpr>; 2] = match self {
            Cf::Jmp(t) => [Some(t), None],
            Cf::CJmp(_, t, e) => [Some(t), Some(e)],
        };
        arr.into_iter().flatten()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Block {
    pub label: Label,
    pub stmts: Vec<Stmt>,
    pub cf: Cf,
}

impl Block {
    pub fn new(label: impl Into<Label>, stmts: Vec<Stmt>, cf: Cf) -> Block {
        Block { label: label.into(), stmts, cf }
    }
}

/// An ordered list of blocks. Lookup by label finds the first block with
/// that label; duplicates are reported by the type checker.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Program {
    blocks: Vec<Block>,
    index: BTreeMap<Label, usize>,
}

impl Program {
    pub fn new(blocks: Vec<Block>) -> Program {
        let mut index = BTreeMap::new();
        for (i, b) in blocks.iter().enumerate() {
            index.entry(b.label.clone()).or_insert(i);
        }
        Program { blocks, index }
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn into_blocks(self) -> Vec<Block> {
        self.blocks
    }

    pub fn block(&self, l: &Label) -> Option<&Block> {
        self.index.get(l).map(|&i| &self.blocks[i])
    }

    pub fn has_label(&self, l: &Label) -> bool {
        self.index.contains_key(l)
    }

    pub fn labels(&self) -> impl Iterator<Item = &Label> {
        self.blocks.iter().map(|b| &b.label)
    }

    pub fn duplicate_labels(&self) -> Vec<Label> {
        let mut seen = BTreeSet::new();
        let mut dups = Vec::new();
        for b in &self.blocks {
            if !seen.insert(&b.label) && !dups.contains(&b.label) {
                dups.push(b.label.clone());
            }
        }
        dups
    }
}

impl FromIterator<Block> for Program {
    fn from_iter<I: IntoIterator<Item = Block>>(iter: I) -> Program {
        Program::new(iter.into_iter().collect())
    }
}

/// Program counter of a BIR state, including the two error sentinels.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Pc {
    Label(Label),
    /// A failed assertion or an invalid jump.
    Failed,
    TypeError,
}

impl Pc {
    pub fn is_error(&self) -> bool {
        !matches!(self, Pc::Label(_))
    }

    pub fn label(&self) -> Option<&Label> {
        match self {
            Pc::Label(l) => Some(l),
            _ => None,
        }
    }
}

impl fmt::Display for Pc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pc::Label(l) => write!(f, "{l}"),
            Pc::Failed => f.write_str("failed"),
            Pc::TypeError => f.write_str("type-error"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct State {
    pub env: Env,
    pub pc: Pc,
}

impl State {
    pub fn new(env: Env, pc: impl Into<Label>) -> State {
        State { env, pc: Pc::Label(pc.into()) }
    }
}

/// Error outcome of a statement.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Halt {
    Failed,
    TypeError,
}

impl From<Halt> for Pc {
    fn from(h: Halt) -> Pc {
        match h {
            Halt::Failed => Pc::Failed,
            Halt::TypeError => Pc::TypeError,
        }
    }
}

/// The fuel ran out before reaching the label set.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Diverged;

pub const DEFAULT_FUEL: u64 = 1_000_000;

pub fn exec_stmt(s: &Stmt, env: &Env) -> Result<Env, Halt> {
    let mut env = env.clone();
    exec_stmt_in_place(s, &mut env)?;
    Ok(env)
}

pub fn exec_stmt_in_place(s: &Stmt, env: &mut Env) -> Result<(), Halt> {
    match s {
        Stmt::Assign(v, e) => {
            let value = eval(e, env).map_err(|_| Halt::TypeError)?;
            if value.ty() == BType::Label {
                return Err(Halt::TypeError);
            }
            if env.get(v).is_some_and(|old| old.ty() != value.ty()) {
                return Err(Halt::TypeError);
            }
            env.insert(v.clone(), value);
            Ok(())
        }
        Stmt::Assert(e) => match eval(e, env) {
            Ok(BValue::Word(w)) if w.width() == Width::W1 => {
                if w.is_true() {
                    Ok(())
                } else {
                    Err(Halt::Failed)
                }
            }
            _ => Err(Halt::TypeError),
        },
    }
}

fn jump_target(e: &BExpr, env: &Env) -> Result<Label, Halt> {
    match eval(e, env) {
        Ok(BValue::Word(w)) => Ok(Label::Addr(w.bits())),
        Ok(BValue::Label(l)) => Ok(l),
        _ => Err(Halt::TypeError),
    }
}

/// Executes the block at `bs.pc`. Jumps are valid only to labels of `p`.
pub fn exec_block(p: &Program, bs: State) -> State {
    exec_block_in(p, bs, &BTreeSet::new())
}

/// Executes one block; a jump is valid if its target is a block of `p` or a
/// member of `exits`.
pub fn exec_block_in(p: &Program, mut bs: State, exits: &BTreeSet<Label>) -> State {
    let Pc::Label(l) = &bs.pc else {
        return bs;
    };
    let Some(block) = p.block(l) else {
        bs.pc = Pc::Failed;
        return bs;
    };
    for s in &block.stmts {
        if let Err(h) = exec_stmt_in_place(s, &mut bs.env) {
            bs.pc = h.into();
            return bs;
        }
    }
    let target = match &block.cf {
        Cf::Jmp(t) => jump_target(t, &bs.env),
        Cf::CJmp(c, t, e) => match eval(c, &bs.env) {
            Ok(BValue::Word(w)) if w.width() == Width::W1 => jump_target(if w.is_true() { t } else { e }, &bs.env),
            _ => Err(Halt::TypeError),
        },
    };
    bs.pc = match target {
        Ok(l) if p.has_label(&l) || exits.contains(&l) => Pc::Label(l),
        Ok(_) => Pc::Failed,
        Err(h) => h.into(),
    };
    bs
}

/// Weak transition: runs blocks until the pc is in `ls` or an error state.
/// A start state already in `ls` is returned unchanged. Jumps to members of
/// `ls` are valid even when they are not blocks of `p`.
pub fn weak_exec(p: &Program, mut bs: State, ls: &BTreeSet<Label>, fuel: u64) -> Result<State, Diverged> {
    let mut fuel = fuel;
    loop {
        match &bs.pc {
            Pc::Label(l) if !ls.contains(l) => {}
            _ => return Ok(bs),
        }
        if fuel == 0 {
            return Err(Diverged);
        }
        fuel -= 1;
        bs = exec_block_in(p, bs, ls);
    }
}

/// Executes the current block unconditionally, then continues as
/// [`weak_exec`]. Used when the start label itself belongs to `ls`.
pub fn run_to_next(p: &Program, bs: State, ls: &BTreeSet<Label>, fuel: u64) -> Result<State, Diverged> {
    if fuel == 0 {
        return Err(Diverged);
    }
    weak_exec(p, exec_block_in(p, bs, ls), ls, fuel - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bir::expr::*;
    use crate::bir::{AddrWidth, Memory, Word};
    use alloc::vec;

    fn labels(ls: &[u64]) -> BTreeSet<Label> {
        ls.iter().map(|&a| Label::Addr(a)).collect()
    }

    #[test]
    fn assert_outcomes() {
        let env = Env::new();
        assert_eq!(exec_stmt(&Stmt::Assert(ff()), &env), Err(Halt::Failed));
        assert_eq!(exec_stmt(&Stmt::Assert(word(Width::W8, 1)), &env), Err(Halt::TypeError));
        assert_eq!(exec_stmt(&Stmt::Assert(tt()), &env), Ok(env));
    }

    #[test]
    fn assign_keeps_types_fixed() {
        let env = Env::new().with("x", Word::new(Width::W8, 1));
        assert_eq!(exec_stmt(&Stmt::Assign("x".into(), tt()), &env), Err(Halt::TypeError));
        assert_eq!(exec_stmt(&Stmt::Assign("y".into(), label("l")), &env), Err(Halt::TypeError));
        let out = exec_stmt(&Stmt::Assign("y".into(), tt()), &env).unwrap();
        assert_eq!(out.get("y"), Some(&BValue::Word(Word::TRUE)));
    }

    #[test]
    fn cjmp_and_missing_labels() {
        let p = Program::new(vec![
            Block::new(0u64, vec![], Cf::CJmp(var("c"), w64(0x10), w64(0x20))),
            Block::new(0x10u64, vec![], Cf::Jmp(w64(0x99))),
            Block::new(0x20u64, vec![], Cf::Jmp(w64(0x10))),
        ]);
        let env = Env::new().with("c", Word::TRUE);
        let s = exec_block(&p, State::new(env.clone(), 0u64));
        assert_eq!(s.pc, Pc::Label(Label::Addr(0x10)));
        let s = exec_block(&p, s);
        assert_eq!(s.pc, Pc::Failed);
        let s = weak_exec(&p, State::new(env, 0u64), &labels(&[0x99]), 10).unwrap();
        assert_eq!(s.pc, Pc::Label(Label::Addr(0x99)));
    }

    #[test]
    fn zero_steps_and_divergence() {
        let p =
            Program::new(vec![Block::new(1u64, vec![], Cf::Jmp(w64(2))), Block::new(2u64, vec![], Cf::Jmp(w64(1)))]);
        let start = State::new(Env::new(), 1u64);
        assert_eq!(weak_exec(&p, start.clone(), &labels(&[1]), 5), Ok(start.clone()));
        assert_eq!(weak_exec(&p, start.clone(), &BTreeSet::new(), 100), Err(Diverged));
        let s = run_to_next(&p, start, &labels(&[1]), 5).unwrap();
        assert_eq!(s.pc, Pc::Label(Label::Addr(1)));
    }

    #[test]
    fn pop_push() {
        let p = Program::new(vec![
            Block::new(
                0x400000u64,
                vec![
                    Stmt::Assign("R1".into(), load(var("MEM"), var("SP"), Width::W32)),
                    Stmt::Assign("SP".into(), add(var("SP"), word(Width::W32, 4))),
                ],
                Cf::Jmp(w64(0x400004)),
            ),
            Block::new(
                0x400004u64,
                vec![
                    Stmt::Assign("MEM".into(), store(var("MEM"), var("SP"), var("R1"), Width::W32)),
                    Stmt::Assign("SP".into(), sub(var("SP"), word(Width::W32, 4))),
                ],
                Cf::Jmp(w64(0x400008)),
            ),
        ]);
        let mem = Memory::from_bytes(AddrWidth::A32, [(0x100, 0xef), (0x101, 0xbe), (0x102, 0xad), (0x103, 0xde)]);
        let env =
            Env::new().with("SP", Word::new(Width::W32, 0x100)).with("MEM", mem).with("R1", Word::new(Width::W32, 7));
        let s = exec_block(&p, State::new(env, 0x400000u64));
        assert_eq!(s.pc, Pc::Label(Label::Addr(0x400004)));
        assert_eq!(s.env.get("R1"), Some(&BValue::word(Width::W32, 0xdeadbeef)));
        assert_eq!(s.env.get("SP"), Some(&BValue::word(Width::W32, 0x104)));
    }
}
