//! Removes explicit substitutions from `P ⇒ P'` goals by naming each
//! substituted value with a fresh, universally quantified variable.

mod oracle;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::bir::subst::collect_names;
use crate::bir::{expand_substs, fresh_name, is_free_in, type_of_expr, BExpr, BType, BinOp, TypeError, Typing};

pub use oracle::{equisatisfiable_oracle, OracleError, OracleFailure};

/// Goal `premise ⇒ conclusion`; only the conclusion may hold substitutions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TautologyGoal {
    pub premise: Arc<BExpr>,
    pub conclusion: Arc<BExpr>,
}

impl TautologyGoal {
    pub fn new(premise: impl Into<Arc<BExpr>>, conclusion: impl Into<Arc<BExpr>>) -> TautologyGoal {
        TautologyGoal { premise: premise.into(), conclusion: conclusion.into() }
    }

    pub fn implication(&self) -> BExpr {
        BExpr::Bin(BinOp::Implies, self.premise.clone(), self.conclusion.clone())
    }

    /// Rejects goals whose sides are not `Reg1` under `typing`.
    pub fn check(&self, typing: &Typing) -> Result<(), TypeError> {
        for side in [&self.premise, &self.conclusion] {
            if type_of_expr(side, typing)? != BType::BOOL {
                return Err(TypeError("goal sides must be Reg1"));
            }
        }
        Ok(())
    }
}

/// An introduced name and the (renamed) expression it abbreviates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FreshVar {
    pub name: String,
    pub origin: String,
    pub def: Arc<BExpr>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Simplified {
    pub conclusion: Arc<BExpr>,
    /// In introduction order; a definition only mentions earlier names.
    pub fresh: Vec<FreshVar>,
}

impl Simplified {
    /// `typing` extended with the types of the fresh variables.
    pub fn typing(&self, base: &Typing) -> Result<Typing, TypeError> {
        let mut t = base.clone();
        for f in &self.fresh {
            let ty = type_of_expr(&f.def, &t)?;
            t.insert(f.name.clone(), ty);
        }
        Ok(t)
    }
}

/// Renames free occurrences of `from` to the variable `to`. An inner
/// substitution binding `from` shadows it in its body.
pub fn push_subst(from: &str, to: &str, e: &Arc<BExpr>) -> Arc<BExpr> {
    let to = Arc::new(BExpr::Var(String::from(to)));
    let mut memo = BTreeMap::new();
    rename(from, &to, e, &mut memo)
}

fn rename(v: &str, to: &Arc<BExpr>, e: &Arc<BExpr>, memo: &mut BTreeMap<usize, Arc<BExpr>>) -> Arc<BExpr> {
    let key = Arc::as_ptr(e) as usize;
    if let Some(done) = memo.get(&key) {
        return done.clone();
    }
    let mut go = |c: &Arc<BExpr>| rename(v, to, c, memo);
    let out = match &**e {
        BExpr::Var(x) if x == v => to.clone(),
        BExpr::Const(_) | BExpr::Label(_) | BExpr::Var(_) => e.clone(),
        BExpr::Ite(a, b, c) => Arc::new(BExpr::Ite(go(a), go(b), go(c))),
        BExpr::Un(op, a) => Arc::new(BExpr::Un(*op, go(a))),
        BExpr::Bin(op, a, b) => Arc::new(BExpr::Bin(*op, go(a), go(b))),
        BExpr::Load(m, a, w) => Arc::new(BExpr::Load(go(m), go(a), *w)),
        BExpr::Store(m, a, x, w) => Arc::new(BExpr::Store(go(m), go(a), go(x), *w)),
        BExpr::Subst(r, w, body) if w == v => Arc::new(BExpr::Subst(go(r), w.clone(), body.clone())),
        BExpr::Subst(r, w, body) => Arc::new(BExpr::Subst(go(r), w.clone(), go(body))),
    };
    memo.insert(key, out.clone());
    out
}

struct Simplifier {
    avoid: BTreeSet<String>,
    fresh: Vec<FreshVar>,
    memo: BTreeMap<usize, (Arc<BExpr>, Arc<BExpr>)>,
}

impl Simplifier {
    fn run(&mut self, a: &Arc<BExpr>) -> Arc<BExpr> {
        let key = Arc::as_ptr(a) as usize;
        if let Some((_, done)) = self.memo.get(&key) {
            return done.clone();
        }
        let out = match &**a {
            BExpr::Bin(BinOp::BoolAnd, l, r) => {
                let (l2, r2) = (self.run(l), self.run(r));
                Arc::new(BExpr::Bin(BinOp::BoolAnd, l2, r2))
            }
            BExpr::Bin(BinOp::Implies, h, c) => {
                let h2 = leaf(h);
                Arc::new(BExpr::Bin(BinOp::Implies, h2, self.run(c)))
            }
            BExpr::Subst(e, v, body) if is_free_in(v, body) => {
                let name = fresh_name(&self.avoid, v);
                self.avoid.insert(name.clone());
                let def = leaf(e);
                self.fresh.push(FreshVar { name: name.clone(), origin: v.clone(), def: def.clone() });
                let eq = Arc::new(BExpr::Bin(BinOp::Eq, Arc::new(BExpr::Var(name.clone())), def));
                let pushed = push_subst(v, &name, body);
                Arc::new(BExpr::Bin(BinOp::Implies, eq, self.run(&pushed)))
            }
            BExpr::Subst(_, _, body) => self.run(body),
            _ => leaf(a),
        };
        // The input is kept alive so its address cannot be reused.
        self.memo.insert(key, (a.clone(), out.clone()));
        out
    }
}

fn leaf(a: &Arc<BExpr>) -> Arc<BExpr> {
    if a.contains_subst() {
        expand_substs(a)
    } else {
        a.clone()
    }
}

/// Subst-free conclusion `P''` with `(P ⇒ P')` valid iff
/// `∀ fresh. (P ⇒ P'')` is valid. The premise is kept as is.
pub fn simplify(goal: &TautologyGoal) -> Simplified {
    let mut avoid = BTreeSet::new();
    collect_names(&goal.premise, &mut avoid);
    collect_names(&goal.conclusion, &mut avoid);
    let mut s = Simplifier { avoid, fresh: Vec::new(), memo: BTreeMap::new() };
    let conclusion = s.run(&goal.conclusion);
    Simplified { conclusion, fresh: s.fresh }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bir::expr::*;
    use crate::bir::Width;
    use alloc::format;
    use alloc::string::ToString;

    fn b8(v: u64) -> BExpr {
        word(Width::W8, v)
    }

    /// {X+X/Y}({Y+Y/Z} Q) with Q = (Z = X·4).
    pub(super) fn worked_example() -> TautologyGoal {
        let q = eq(var("Z"), mul(var("X"), b8(4)));
        let c = subst(add(var("X"), var("X")), "Y", subst(add(var("Y"), var("Y")), "Z", q));
        TautologyGoal::new(tt(), c)
    }

    #[test]
    fn worked_example_shape() {
        let s = simplify(&worked_example());
        assert_eq!(
            s.conclusion.to_string(),
            "(implies (eq Y_1 (add X X)) (implies (eq Z_1 (add Y_1 Y_1)) (eq Z_1 (mul X (const 8 0x4)))))"
        );
        assert_eq!(s.fresh.iter().map(|f| f.name.as_str()).collect::<Vec<_>>(), ["Y_1", "Z_1"]);
        assert!(!s.conclusion.contains_subst());
    }

    #[test]
    fn dead_substitution_is_dropped() {
        let g = TautologyGoal::new(tt(), subst(var("X"), "Y", eq(var("X"), b8(1))));
        let s = simplify(&g);
        assert_eq!(*s.conclusion, eq(var("X"), b8(1)));
        assert!(s.fresh.is_empty());
        // The type hazard: x is Reg8 in the replacement and Reg1 in the body.
        let hazard = subst(add(var("x"), b8(1)), "y", eq(var("x"), tt()));
        assert_eq!(*simplify(&TautologyGoal::new(tt(), hazard)).conclusion, eq(var("x"), tt()));
    }

    #[test]
    fn subst_free_goal_unchanged() {
        let g = TautologyGoal::new(var("P"), band(var("a"), implies(var("b"), var("c"))));
        assert_eq!(simplify(&g).conclusion, g.conclusion);
    }

    #[test]
    fn push_rules() {
        let e = Arc::new(subst(var("v"), "v", var("v")));
        assert_eq!(push_subst("v", "v_1", &e).to_string(), "(subst v_1 v v)");
        let e = Arc::new(subst(var("v"), "w", add(var("v"), var("w"))));
        assert_eq!(push_subst("v", "v_1", &e).to_string(), "(subst v_1 w (add v_1 w))");
        assert_eq!(*push_subst("v", "v_1", &Arc::new(var("v"))), var("v_1"));
    }

    #[test]
    fn chain_stays_linear() {
        for n in [5usize, 10, 20] {
            let mut c = eq(var(format!("Y{n}")), b8(0));
            for i in (1..=n).rev() {
                let prev = if i == 1 { String::from("X") } else { format!("Y{}", i - 1) };
                c = subst(add(var(prev.clone()), var(prev)), format!("Y{i}"), c);
            }
            let g = TautologyGoal::new(tt(), c);
            let s = simplify(&g);
            assert!(s.conclusion.tree_size() <= 50 * n as u128);
            assert_eq!(expand_substs(&g.conclusion).var_occurrences(), 1 << n);
        }
    }

    #[test]
    fn fresh_typing_follows_definitions() {
        let s = simplify(&worked_example());
        let mut t = Typing::new();
        t.insert("X".into(), BType::Reg(Width::W8));
        let t2 = s.typing(&t).unwrap();
        assert_eq!(t2["Z_1"], BType::Reg(Width::W8));
        worked_example().check(&t).unwrap();
    }
}
