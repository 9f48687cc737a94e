//! Seeded random generators for programs, environments and goals, shared
//! by the property tests and the acceptance harness.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::bir::expr::*;
use crate::bir::{AddrWidth, BExpr, BType, BValue, BinOp, Env, Label, Memory, Typing, UnOp, Width};
use crate::sem::{Block, Cf, Program, Stmt};
use crate::simplify::TautologyGoal;
use crate::wp::{EnvDomain, PredMap};

/// Knobs for type-directed expression generation.
#[derive(Clone, Debug)]
pub struct ExprGen {
    pub typing: Typing,
    /// Every address is masked with this before use.
    pub addr_mask: Option<u64>,
    /// Widths used for loads and stores.
    pub access_widths: Vec<Width>,
}

const ARITH: [BinOp; 9] =
    [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::And, BinOp::Or, BinOp::Xor, BinOp::Shl, BinOp::LShr, BinOp::AShr];

fn pick_width<R: Rng + ?Sized>(rng: &mut R, pool: &[Width]) -> Width {
    *pool.choose(rng).unwrap()
}

/// Constants biased towards boundary values.
pub fn interesting_bits<R: Rng + ?Sized>(rng: &mut R, w: Width) -> u64 {
    let m = w.mask();
    match rng.gen_range(0..8) {
        0 => 0,
        1 => m,
        2 => m >> 1,
        3 => (m >> 1) + 1,
        4 => rng.gen_range(0..4),
        _ => rng.gen::<u64>() & m,
    }
}

impl ExprGen {
    pub fn new(typing: Typing) -> ExprGen {
        ExprGen { typing, addr_mask: None, access_widths: vec![Width::W8, Width::W16, Width::W32, Width::W64] }
    }

    fn vars_of(&self, t: BType) -> Vec<&String> {
        self.typing.iter().filter(|(_, ty)| **ty == t).map(|(n, _)| n).collect()
    }

    fn mems(&self) -> Vec<(&String, AddrWidth)> {
        self.typing
            .iter()
            .filter_map(|(n, t)| match t {
                BType::Mem(a) => Some((n, *a)),
                _ => None,
            })
            .collect()
    }

    fn leaf<R: Rng + ?Sized>(&self, rng: &mut R, t: BType) -> Option<BExpr> {
        let vars = self.vars_of(t);
        match t {
            BType::Reg(w) if vars.is_empty() || rng.gen_bool(0.3) => Some(word(w, interesting_bits(rng, w))),
            _ => vars.choose(rng).map(|v| var((*v).clone())),
        }
    }

    fn addr<R: Rng + ?Sized>(&self, rng: &mut R, a: AddrWidth, depth: u32) -> BExpr {
        let e = self.word(rng, a.word(), depth);
        match self.addr_mask {
            Some(m) => and(e, word(a.word(), m)),
            None => e,
        }
    }

    pub fn mem<R: Rng + ?Sized>(&self, rng: &mut R, a: AddrWidth, depth: u32) -> Option<BExpr> {
        let base = self.leaf(rng, BType::Mem(a))?;
        if depth == 0 || rng.gen_bool(0.5) {
            return Some(base);
        }
        let m = self.mem(rng, a, depth - 1).unwrap_or(base);
        let w = pick_width(rng, &self.access_widths);
        Some(store(m, self.addr(rng, a, depth - 1), self.word(rng, w, depth - 1), w))
    }

    /// A well-typed expression of type `Reg(w)`.
    pub fn word<R: Rng + ?Sized>(&self, rng: &mut R, w: Width, depth: u32) -> BExpr {
        if depth == 0 || rng.gen_bool(0.25) {
            return self.leaf(rng, BType::Reg(w)).unwrap();
        }
        let d = depth - 1;
        if w == Width::W1 && rng.gen_bool(0.5) {
            return self.predicate(rng, d);
        }
        match rng.gen_range(0..6) {
            0 => un(*[UnOp::Not, UnOp::Neg].choose(rng).unwrap(), self.word(rng, w, d)),
            1 => {
                let other = pick_width(rng, &Width::ALL);
                let e = self.word(rng, other, d);
                if other.bits() < w.bits() {
                    if rng.gen_bool(0.5) {
                        zext(w, e)
                    } else {
                        sext(w, e)
                    }
                } else {
                    trunc(w, e)
                }
            }
            2 => ite(self.word(rng, Width::W1, d), self.word(rng, w, d), self.word(rng, w, d)),
            3 if w != Width::W1 && self.access_widths.contains(&w) => {
                let mems = self.mems();
                match mems.choose(rng) {
                    Some((_, a)) => {
                        let m = self.mem(rng, *a, d).unwrap();
                        load(m, self.addr(rng, *a, d), w)
                    }
                    None => self.word(rng, w, d),
                }
            }
            _ => bin(*ARITH.choose(rng).unwrap(), self.word(rng, w, d), self.word(rng, w, d)),
        }
    }

    /// A `Reg1` comparison or boolean combination.
    pub fn predicate<R: Rng + ?Sized>(&self, rng: &mut R, depth: u32) -> BExpr {
        if depth == 0 {
            return self.leaf(rng, BType::BOOL).unwrap();
        }
        let d = depth - 1;
        match rng.gen_range(0..5) {
            0 => {
                let op = *[BinOp::BoolAnd, BinOp::BoolOr, BinOp::Implies].choose(rng).unwrap();
                bin(op, self.word(rng, Width::W1, d), self.word(rng, Width::W1, d))
            }
            1 if !self.mems().is_empty() && rng.gen_bool(0.3) => {
                let a = self.mems().choose(rng).unwrap().1;
                eq(self.mem(rng, a, d).unwrap(), self.mem(rng, a, d).unwrap())
            }
            _ => {
                let w = pick_width(rng, &[Width::W8, Width::W16, Width::W32, Width::W64]);
                let op = *[BinOp::Eq, BinOp::ULt, BinOp::SLt].choose(rng).unwrap();
                bin(op, self.word(rng, w, d), self.word(rng, w, d))
            }
        }
    }

    pub fn of_type<R: Rng + ?Sized>(&self, rng: &mut R, t: BType, depth: u32) -> Option<BExpr> {
        match t {
            BType::Reg(w) => Some(self.word(rng, w, depth)),
            BType::Mem(a) => self.mem(rng, a, depth),
            BType::Label => None,
        }
    }
}

/// A memory with a few random non-zero bytes below `span`.
pub fn random_memory<R: Rng + ?Sized>(rng: &mut R, a: AddrWidth, span: u64) -> Memory {
    let n = rng.gen_range(0..6);
    Memory::from_bytes(a, (0..n).map(|_| (rng.gen_range(0..span), rng.gen())))
}

pub fn random_env<R: Rng + ?Sized>(rng: &mut R, typing: &Typing) -> Env {
    typing
        .iter()
        .filter_map(|(n, t)| {
            let v = match *t {
                BType::Reg(w) => BValue::word(w, interesting_bits(rng, w)),
                BType::Mem(a) => BValue::Mem(random_memory(rng, a, 64)),
                BType::Label => return None,
            };
            Some((n.clone(), v))
        })
        .collect()
}

/// Variables of every width and both memory kinds.
pub fn random_typing<R: Rng + ?Sized>(rng: &mut R) -> Typing {
    let mut t = Typing::new();
    for (i, w) in Width::ALL.iter().enumerate() {
        for j in 0..rng.gen_range(1..3) {
            t.insert(format!("v{i}_{j}"), BType::Reg(*w));
        }
    }
    t.insert("M32".into(), BType::Mem(AddrWidth::A32));
    if rng.gen_bool(0.5) {
        t.insert("M64".into(), BType::Mem(AddrWidth::A64));
    }
    t
}

/// A typed program with typing and initial environment.
#[derive(Clone, Debug)]
pub struct RandomProgram {
    pub program: Program,
    pub typing: Typing,
    pub env: Env,
    pub entry: Label,
}

/// Up to `max_blocks` blocks with arbitrary (possibly cyclic) control flow,
/// including indirect jumps and jumps to labels outside the program.
pub fn random_program<R: Rng + ?Sized>(rng: &mut R, max_blocks: usize) -> RandomProgram {
    let typing = random_typing(rng);
    let g = ExprGen::new(typing.clone());
    let n = rng.gen_range(1..=max_blocks);
    let labels: Vec<Label> = (0..n)
        .map(|i| if rng.gen_bool(0.5) { Label::Addr(0x1000 + 4 * i as u64) } else { Label::Name(format!("b{i}")) })
        .collect();
    let assignable: Vec<&String> = typing.keys().collect();
    let target = |rng: &mut R| -> BExpr {
        match rng.gen_range(0..10) {
            0 => label_expr(&Label::Addr(0x9000)),
            1 => {
                let a = labels.choose(rng).unwrap();
                let same: Vec<&Label> =
                    labels.iter().filter(|l| l.as_addr().is_some() == a.as_addr().is_some()).collect();
                ite(g.predicate(rng, 1), label_expr(a), label_expr(same.choose(rng).unwrap()))
            }
            _ => label_expr(labels.choose(rng).unwrap()),
        }
    };
    let blocks = labels
        .iter()
        .map(|l| {
            let stmts = (0..rng.gen_range(0..5))
                .map(|_| {
                    if rng.gen_bool(0.1) {
                        Stmt::Assert(g.predicate(rng, 2))
                    } else {
                        let v = (*assignable.choose(rng).unwrap()).clone();
                        let e = g.of_type(rng, typing[&v], 3).unwrap();
                        Stmt::Assign(v, e)
                    }
                })
                .collect();
            let cf = if rng.gen_bool(0.5) {
                Cf::Jmp(target(rng))
            } else {
                Cf::CJmp(g.predicate(rng, 2), target(rng), target(rng))
            };
            Block::new(l.clone(), stmts, cf)
        })
        .collect();
    let env = random_env(rng, &typing);
    RandomProgram { program: Program::new(blocks), typing, env, entry: labels[0].clone() }
}

/// A loop-free program with exit postconditions and a small enumerable
/// environment space.
#[derive(Clone, Debug)]
pub struct LoopFreeCase {
    pub program: Program,
    pub typing: Typing,
    pub entry: Label,
    pub post: PredMap,
    pub domain: EnvDomain,
}

/// Bytes per memory in loop-free cases; addresses are masked to stay inside.
pub const SMALL_MEMORY: u64 = 16;

pub fn random_loop_free<R: Rng + ?Sized>(rng: &mut R, max_blocks: usize) -> LoopFreeCase {
    let mut typing = Typing::new();
    let n1 = rng.gen_range(1..=2);
    let n8 = rng.gen_range(1..=2);
    for i in 0..n1 {
        typing.insert(format!("c{i}"), BType::BOOL);
    }
    for i in 0..n8 {
        typing.insert(format!("x{i}"), BType::Reg(Width::W8));
    }
    typing.insert("MEM".into(), BType::Mem(AddrWidth::A32));
    let g = ExprGen { typing: typing.clone(), addr_mask: Some(SMALL_MEMORY - 1), access_widths: vec![Width::W8] };
    let narrow = |rng: &mut R, t: BType| -> BExpr {
        match t {
            BType::Reg(w) => g.word(rng, w, 2),
            _ => g.of_type(rng, t, 1).unwrap(),
        }
    };
    let n = rng.gen_range(1..=max_blocks);
    let exits = [Label::name("exit0"), Label::name("exit1")];
    let names: Vec<String> = typing.keys().cloned().collect();
    let blocks = (0..n)
        .map(|i| {
            let later: Vec<Label> =
                (i + 1..n).map(|j| Label::Name(format!("b{j}"))).chain(exits.iter().cloned()).collect();
            let stmts = (0..rng.gen_range(0..4))
                .map(|_| {
                    if rng.gen_bool(0.15) {
                        Stmt::Assert(g.predicate(rng, 1))
                    } else {
                        let v = names.choose(rng).unwrap().clone();
                        Stmt::Assign(v.clone(), narrow(rng, typing[&v]))
                    }
                })
                .collect();
            let t = |rng: &mut R| label_expr(later.choose(rng).unwrap());
            let cf = if rng.gen_bool(0.5) { Cf::Jmp(t(rng)) } else { Cf::CJmp(g.predicate(rng, 1), t(rng), t(rng)) };
            Block::new(Label::Name(format!("b{i}")), stmts, cf)
        })
        .collect();
    let post: PredMap = exits.iter().map(|l| (l.clone(), Arc::new(g.predicate(rng, 2)))).collect();

    let mut domain = EnvDomain::new();
    for (name, t) in &typing {
        let values = match *t {
            BType::Reg(Width::W1) => vec![BValue::word(Width::W1, 0), BValue::word(Width::W1, 1)],
            BType::Reg(w) => {
                let mut s: BTreeSet<u64> = [0, 1, 0x7f, 0x80, 0xff].into_iter().collect();
                while s.len() < 12 {
                    s.insert(rng.gen::<u64>() & w.mask());
                }
                s.into_iter().map(|b| BValue::word(w, b)).collect()
            }
            BType::Mem(a) => {
                let mut ms = vec![Memory::new(a)];
                ms.extend((0..3).map(|_| random_memory(rng, a, SMALL_MEMORY)));
                ms.into_iter().map(BValue::Mem).collect()
            }
            BType::Label => unreachable!(),
        };
        domain = domain.with(name.clone(), values);
    }
    LoopFreeCase { program: Program::new(blocks), typing, entry: Label::name("b0"), post, domain }
}

/// A goal with explicit substitutions, plus an environment space for the
/// brute-force oracle.
#[derive(Clone, Debug)]
pub struct GoalCase {
    pub goal: TautologyGoal,
    pub typing: Typing,
    pub domain: EnvDomain,
}

/// At most `max_subst` substitutions, of which at most one binds a `Reg8`
/// variable so the fresh-variable space stays enumerable.
pub fn random_goal<R: Rng + ?Sized>(rng: &mut R, max_subst: usize) -> GoalCase {
    let typing: Typing = [
        ("a".into(), BType::Reg(Width::W8)),
        ("b".into(), BType::Reg(Width::W8)),
        ("p".into(), BType::BOOL),
        ("q".into(), BType::BOOL),
    ]
    .into_iter()
    .collect();
    let g = ExprGen::new(typing.clone());
    let small = |rng: &mut R| g.predicate(rng, 2);
    struct Budget {
        subst: usize,
        reg8: bool,
    }
    fn conclusion<R: Rng + ?Sized>(
        rng: &mut R,
        g: &ExprGen,
        b: &mut Budget,
        depth: u32,
        leaf: &dyn Fn(&mut R) -> BExpr,
    ) -> BExpr {
        let choice = if depth == 0 { 0 } else { rng.gen_range(0..5) };
        match choice {
            1 => {
                let l = conclusion(rng, g, b, depth - 1, leaf);
                band(l, conclusion(rng, g, b, depth - 1, leaf))
            }
            2 => implies(leaf(rng), conclusion(rng, g, b, depth - 1, leaf)),
            3 | 4 if b.subst > 0 => {
                b.subst -= 1;
                let v = if !b.reg8 && rng.gen_bool(0.5) {
                    b.reg8 = true;
                    if rng.gen_bool(0.5) {
                        "a"
                    } else {
                        "b"
                    }
                } else if rng.gen_bool(0.5) {
                    "p"
                } else {
                    "q"
                };
                let e = g.of_type(rng, g.typing[v], 2).unwrap();
                subst(e, v, conclusion(rng, g, b, depth - 1, leaf))
            }
            _ => leaf(rng),
        }
    }
    let mut budget = Budget { subst: max_subst, reg8: false };
    let c = conclusion(rng, &g, &mut budget, 5, &small);
    let premise = if rng.gen_bool(0.3) { tt() } else { g.predicate(rng, 1) };
    let reg8: Vec<BValue> = {
        let mut s: BTreeSet<u64> = [0, 0xff].into_iter().collect();
        while s.len() < 4 {
            s.insert(rng.gen::<u8>().into());
        }
        s.into_iter().map(|v| BValue::word(Width::W8, v)).collect()
    };
    let bools = vec![BValue::word(Width::W1, 0), BValue::word(Width::W1, 1)];
    let domain = EnvDomain::new().with("a", reg8.clone()).with("b", reg8).with("p", bools.clone()).with("q", bools);
    GoalCase { goal: TautologyGoal::new(premise, c), typing, domain }
}

/// A Subst-free implication over `Reg8` variables and, sometimes, a
/// four-byte memory.
#[derive(Clone, Debug)]
pub struct SolverCase {
    pub premise: BExpr,
    pub conclusion: BExpr,
    pub typing: Typing,
    pub domain: EnvDomain,
    /// Whether `domain` covers every environment over the free variables.
    pub exhaustive: bool,
}

pub const SOLVER_MEMORY_BYTES: u64 = 4;

pub fn random_solver_case<R: Rng + ?Sized>(rng: &mut R) -> SolverCase {
    let with_mem = rng.gen_bool(0.5);
    let mut typing: Typing = [("x".into(), BType::Reg(Width::W8))].into_iter().collect();
    if with_mem {
        typing.insert("M".into(), BType::Mem(AddrWidth::A32));
    } else {
        typing.insert("y".into(), BType::Reg(Width::W8));
    }
    let g =
        ExprGen { typing: typing.clone(), addr_mask: Some(SOLVER_MEMORY_BYTES - 1), access_widths: vec![Width::W8] };
    let pred = |rng: &mut R| {
        let w = if rng.gen_bool(0.7) { Width::W8 } else { Width::W16 };
        let op = *[BinOp::Eq, BinOp::ULt, BinOp::SLt].choose(rng).unwrap();
        let e = bin(op, g.word(rng, w, 3), g.word(rng, w, 2));
        if rng.gen_bool(0.3) {
            band(e, g.predicate(rng, 2))
        } else {
            e
        }
    };
    let premise = if rng.gen_bool(0.3) { tt() } else { pred(rng) };
    let conclusion = pred(rng);
    let all8: Vec<BValue> = (0..256).map(|v| BValue::word(Width::W8, v)).collect();
    let mut domain = EnvDomain::new().with("x", all8.clone());
    if with_mem {
        let alphabet = [0u8, 1, 0x80, 0xff];
        let mems = (0..alphabet.len().pow(SOLVER_MEMORY_BYTES as u32))
            .map(|mut k| {
                let bytes = (0..SOLVER_MEMORY_BYTES).map(|a| {
                    let b = alphabet[k % alphabet.len()];
                    k /= alphabet.len();
                    (a, b)
                });
                BValue::Mem(Memory::from_bytes(AddrWidth::A32, bytes.collect::<Vec<_>>()))
            })
            .collect();
        domain = domain.with("M", mems);
    } else {
        domain = domain.with("y", all8);
    }
    SolverCase { premise, conclusion, typing, domain, exhaustive: !with_mem }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bir::{eval, type_of_expr};
    use crate::typecheck::check_program_with;
    use crate::wp::wp_fragment;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generated_expressions_are_well_typed() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..300 {
            let t = random_typing(&mut rng);
            let g = ExprGen::new(t.clone());
            let env = random_env(&mut rng, &t);
            for w in Width::ALL {
                let e = g.word(&mut rng, w, 4);
                assert_eq!(type_of_expr(&e, &t), Ok(BType::Reg(w)), "{e}");
                assert_eq!(eval(&e, &env).map(|v| v.ty()), Ok(BType::Reg(w)), "{e}");
            }
        }
    }

    #[test]
    fn generated_programs_typecheck() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let rp = random_program(&mut rng, 8);
            check_program_with(&rp.program, &rp.typing).unwrap();
        }
    }

    #[test]
    fn loop_free_cases_propagate() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let c = random_loop_free(&mut rng, 6);
            check_program_with(&c.program, &c.typing).unwrap();
            let h = wp_fragment(&c.program, &c.post, &[c.entry.clone()].into_iter().collect()).unwrap();
            assert!(h.contains_key(&c.entry));
            assert!(c.domain.size() <= 2 * 2 * 12 * 12 * 4);
        }
    }

    #[test]
    fn goals_respect_budgets() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..300 {
            let c = random_goal(&mut rng, 4);
            assert!(c.goal.conclusion.subst_count() <= 4);
            c.goal.check(&c.typing).unwrap();
        }
    }
}
