//! Fault injection into lifted fragments, used to measure how well
//! co-simulation detects lifter bugs.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bir::{BExpr, BinOp, Word};
use crate::lifter::LiftedProgram;
use crate::sem::{Block, Cf, Program, Stmt};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum MutationKind {
    /// Replace one binary operator by a related one.
    SwapOperator,
    ConstantPlusOne,
    ConstantMinusOne,
    /// Delete an assignment to a flag variable.
    DropFlagUpdate,
    DropAssert,
    /// Replace one variable reference by a neighbouring machine variable.
    SwapVariable,
    /// Add 4 to a constant jump target.
    ShiftTarget,
    SwapBranches,
}

impl MutationKind {
    pub const ALL: [MutationKind; 8] = [
        MutationKind::SwapOperator,
        MutationKind::ConstantPlusOne,
        MutationKind::ConstantMinusOne,
        MutationKind::DropFlagUpdate,
        MutationKind::DropAssert,
        MutationKind::SwapVariable,
        MutationKind::ShiftTarget,
        MutationKind::SwapBranches,
    ];
}

#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Mutant {
    pub addr: u64,
    pub kind: MutationKind,
    /// Index of the mutated site among the fragment's sites of this kind.
    pub site: usize,
}

fn swapped(op: BinOp) -> BinOp {
    match op {
        BinOp::Add => BinOp::Sub,
        BinOp::Sub => BinOp::Add,
        BinOp::Mul => BinOp::Add,
        BinOp::And => BinOp::Or,
        BinOp::Or => BinOp::And,
        BinOp::Xor => BinOp::Or,
        BinOp::Shl => BinOp::LShr,
        BinOp::LShr => BinOp::Shl,
        BinOp::AShr => BinOp::LShr,
        BinOp::Eq => BinOp::ULt,
        BinOp::ULt => BinOp::SLt,
        BinOp::SLt => BinOp::ULt,
        BinOp::BoolAnd => BinOp::BoolOr,
        BinOp::BoolOr => BinOp::BoolAnd,
        BinOp::Implies => BinOp::BoolOr,
    }
}

fn neighbour(v: &str) -> Option<String> {
    if let Some(i) = v.strip_prefix('R').and_then(|n| n.parse::<u32>().ok()) {
        return Some(format!("R{}", (i + 1) % 31));
    }
    Some(
        match v {
            "SP" => "R0",
            "N" => "Z",
            "Z" => "C",
            "C" => "V",
            "V" => "N",
            _ => return None,
        }
        .into(),
    )
}

/// Visits expression sites in a fixed order; `f` returns a replacement for
/// the node if it is the chosen site.
struct Rewriter<'a> {
    counter: usize,
    target: usize,
    f: &'a dyn Fn(&BExpr) -> Option<BExpr>,
}

impl Rewriter<'_> {
    fn expr(&mut self, e: &BExpr) -> BExpr {
        if let Some(r) = (self.f)(e) {
            let hit = self.counter == self.target;
            self.counter += 1;
            if hit {
                return r;
            }
        }
        let mut go = |c: &Arc<BExpr>| Arc::new(self.expr(c));
        match e {
            BExpr::Const(_) | BExpr::Label(_) | BExpr::Var(_) => e.clone(),
            BExpr::Ite(a, b, c) => BExpr::Ite(go(a), go(b), go(c)),
            BExpr::Un(op, a) => BExpr::Un(*op, go(a)),
            BExpr::Bin(op, a, b) => BExpr::Bin(*op, go(a), go(b)),
            BExpr::Load(m, a, w) => BExpr::Load(go(m), go(a), *w),
            BExpr::Store(m, a, v, w) => BExpr::Store(go(m), go(a), go(v), *w),
            BExpr::Subst(r, v, b) => BExpr::Subst(go(r), v.clone(), go(b)),
        }
    }

    fn block(&mut self, b: &Block) -> Block {
        let stmts = b
            .stmts
            .iter()
            .map(|s| match s {
                Stmt::Assign(v, e) => Stmt::Assign(v.clone(), self.expr(e)),
                Stmt::Assert(e) => Stmt::Assert(self.expr(e)),
            })
            .collect();
        let cf = match &b.cf {
            Cf::Jmp(t) => Cf::Jmp(self.expr(t)),
            Cf::CJmp(c, t, e) => Cf::CJmp(self.expr(c), self.expr(t), self.expr(e)),
        };
        Block { label: b.label.clone(), stmts, cf }
    }
}

fn expr_site(kind: MutationKind) -> Option<fn(&BExpr) -> Option<BExpr>> {
    Some(match kind {
        MutationKind::SwapOperator => |e| match e {
            BExpr::Bin(op, a, b) => Some(BExpr::Bin(swapped(*op), a.clone(), b.clone())),
            _ => None,
        },
        MutationKind::ConstantPlusOne => |e| match e {
            BExpr::Const(w) => Some(BExpr::Const(Word::new(w.width(), w.bits().wrapping_add(1)))),
            _ => None,
        },
        MutationKind::ConstantMinusOne => |e| match e {
            BExpr::Const(w) => Some(BExpr::Const(Word::new(w.width(), w.bits().wrapping_sub(1)))),
            _ => None,
        },
        MutationKind::SwapVariable => |e| match e {
            BExpr::Var(v) => neighbour(v).map(BExpr::Var),
            _ => None,
        },
        _ => return None,
    })
}

fn is_flag_assign(s: &Stmt) -> bool {
    matches!(s, Stmt::Assign(v, _) if matches!(v.as_str(), "N" | "Z" | "C" | "V"))
}

/// Applies a mutant to a copy of `blocks`; `None` if the site does not exist.
fn mutate_blocks(blocks: &[Block], kind: MutationKind, site: usize) -> Option<Vec<Block>> {
    if let Some(f) = expr_site(kind) {
        let mut rw = Rewriter { counter: 0, target: site, f: &f };
        let out: Vec<Block> = blocks.iter().map(|b| rw.block(b)).collect();
        return (rw.counter > site).then_some(out);
    }
    let mut out = blocks.to_vec();
    let mut n = 0;
    match kind {
        MutationKind::DropFlagUpdate | MutationKind::DropAssert => {
            let pick: fn(&Stmt) -> bool =
                if kind == MutationKind::DropAssert { |s| matches!(s, Stmt::Assert(_)) } else { is_flag_assign };
            for b in out.iter_mut() {
                let idxs: Vec<usize> = b.stmts.iter().enumerate().filter(|(_, s)| pick(s)).map(|(i, _)| i).collect();
                if site < n + idxs.len() {
                    b.stmts.remove(idxs[site - n]);
                    return Some(out);
                }
                n += idxs.len();
            }
            None
        }
        MutationKind::ShiftTarget => {
            for b in out.iter_mut() {
                let targets: Vec<&mut BExpr> = match &mut b.cf {
                    Cf::Jmp(t) => alloc::vec![t],
                    Cf::CJmp(_, t, e) => alloc::vec![t, e],
                };
                for t in targets {
                    if let BExpr::Const(w) = t {
                        if n == site {
                            *t = BExpr::Const(Word::new(w.width(), w.bits().wrapping_add(4)));
                            return Some(out);
                        }
                        n += 1;
                    }
                }
            }
            None
        }
        MutationKind::SwapBranches => {
            for b in out.iter_mut() {
                if let Cf::CJmp(_, t, e) = &mut b.cf {
                    if n == site {
                        core::mem::swap(t, e);
                        return Some(out);
                    }
                    n += 1;
                }
            }
            None
        }
        _ => None,
    }
}

fn fragment(lp: &LiftedProgram, addr: u64) -> Option<Vec<Block>> {
    let li = lp.instr_at(addr)?;
    Some(li.labels.iter().filter_map(|l| lp.program.block(l).cloned()).collect())
}

/// Returns `lp` with the mutant's fragment replaced, or `None` if the
/// mutant does not apply.
pub fn apply(lp: &LiftedProgram, m: &Mutant) -> Option<LiftedProgram> {
    let li = lp.instr_at(m.addr)?;
    let mutated = mutate_blocks(&fragment(lp, m.addr)?, m.kind, m.site)?;
    let mut blocks: Vec<Block> = Vec::new();
    for b in lp.program.blocks() {
        if li.labels.contains(&b.label) {
            if b.label == li.labels[0] {
                blocks.extend(mutated.iter().cloned());
            }
        } else {
            blocks.push(b.clone());
        }
    }
    let mut out = lp.clone();
    out.program = Program::new(blocks);
    Some(out)
}

/// Every applicable mutant of every supported instruction of `lp`.
pub fn enumerate(lp: &LiftedProgram) -> Vec<Mutant> {
    let mut out = Vec::new();
    for li in lp.instrs.iter().filter(|i| i.instr.is_some()) {
        let Some(frag) = fragment(lp, li.addr) else { continue };
        for kind in MutationKind::ALL {
            let mut site = 0;
            while mutate_blocks(&frag, kind, site).is_some() {
                out.push(Mutant { addr: li.addr, kind, site });
                site += 1;
            }
        }
    }
    out
}

/// `n` mutants chosen deterministically from `seed`, spread over kinds.
pub fn select(lp: &LiftedProgram, n: usize, seed: u64) -> Vec<Mutant> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pools: Vec<Vec<Mutant>> = MutationKind::ALL
        .iter()
        .map(|k| {
            let mut v: Vec<Mutant> = enumerate(lp).into_iter().filter(|m| m.kind == *k).collect();
            v.shuffle(&mut rng);
            v
        })
        .collect();
    let mut out = Vec::new();
    while out.len() < n && pools.iter().any(|p| !p.is_empty()) {
        for p in pools.iter_mut() {
            if out.len() < n {
                if let Some(m) = p.pop() {
                    out.push(m);
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cosim::check_instruction;
    use crate::lifter::lift_program;

    #[test]
    fn mutants_apply_and_are_detected() {
        let words = [(0x1000, 0xab82_1020), (0x1004, 0x54ff_fe8c), (0x1008, 0xf900_07e0)];
        let lp = lift_program(&words, 0x1000).unwrap();
        let all = enumerate(&lp);
        for kind in MutationKind::ALL {
            assert!(all.iter().any(|m| m.kind == kind), "{kind:?}");
        }
        let chosen = select(&lp, 16, 3);
        assert_eq!(chosen, select(&lp, 16, 3));
        let killed = chosen
            .iter()
            .filter(|m| {
                let mlp = apply(&lp, m).unwrap();
                assert_ne!(mlp.program, lp.program);
                !check_instruction(&mlp, m.addr, 2000, 11).passed()
            })
            .count();
        assert!(killed >= 14, "killed {killed} of 16");
    }
}
