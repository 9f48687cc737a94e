use alloc::collections::BTreeSet;
use alloc::sync::Arc;
use alloc::vec::Vec;

use super::cfg::{build_cfg, Cfg};
use super::PredMap;
use crate::bir::expr::not;
use crate::bir::{BExpr, BinOp, Label};
use crate::sem::{Block, Cf, Program, Stmt};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum WpError {
    #[error("fragment not loop-free: cycle {}", display_path(.0))]
    Cycle(Vec<Label>),
    #[error("cannot propagate through indirect jump in block {0}")]
    Unresolved(Label),
    #[error("cannot propagate: no precondition or block for label {0}")]
    Missing(Label),
}

fn display_path(p: &[Label]) -> alloc::string::String {
    let parts: Vec<alloc::string::String> = p.iter().map(|l| alloc::format!("{l}")).collect();
    parts.join(" -> ")
}

/// Assignments become explicit substitutions; assertions conjoin.
pub fn wp_stmt(s: &Stmt, q: Arc<BExpr>) -> Arc<BExpr> {
    match s {
        Stmt::Assign(v, e) => Arc::new(BExpr::Subst(Arc::new(e.clone()), v.clone(), q)),
        Stmt::Assert(e) => Arc::new(BExpr::Bin(BinOp::BoolAnd, Arc::new(e.clone()), q)),
    }
}

fn lookup(t: &BExpr, h: &PredMap, from: &Label) -> Result<Arc<BExpr>, WpError> {
    let l = t.as_label().ok_or_else(|| WpError::Unresolved(from.clone()))?;
    h.get(&l).cloned().ok_or(WpError::Missing(l))
}

/// Precondition of a control-flow statement given the successors' map.
pub fn wp_cf(cf: &Cf, h: &PredMap, from: &Label) -> Result<Arc<BExpr>, WpError> {
    match cf {
        Cf::Jmp(t) => lookup(t, h, from),
        Cf::CJmp(c, t, e) => {
            let a = lookup(t, h, from)?;
            let b = lookup(e, h, from)?;
            Ok(Arc::new(BExpr::Bin(
                BinOp::BoolAnd,
                Arc::new(BExpr::Bin(BinOp::Implies, Arc::new(c.clone()), a)),
                Arc::new(BExpr::Bin(BinOp::Implies, Arc::new(not(c.clone())), b)),
            )))
        }
    }
}

pub fn wp_block(b: &Block, h: &PredMap) -> Result<Arc<BExpr>, WpError> {
    let mut q = wp_cf(&b.cf, h, &b.label)?;
    for s in b.stmts.iter().rev() {
        q = wp_stmt(s, q);
    }
    Ok(q)
}

/// Step-wise propagation. Each [`WpIter::step`] adds the precondition of
/// the lowest eligible label, i.e. a block whose successors all have one.
pub struct WpIter<'p> {
    program: &'p Program,
    cfg: Cfg,
    relevant: BTreeSet<Label>,
    h: PredMap,
}

impl<'p> WpIter<'p> {
    pub fn new(program: &'p Program, q: &PredMap, targets: &BTreeSet<Label>) -> Result<WpIter<'p>, WpError> {
        let cfg = build_cfg(program);
        // Blocks reachable from the targets without passing through dom(q).
        let mut relevant = BTreeSet::new();
        let mut stack: Vec<Label> = targets.iter().cloned().collect();
        while let Some(l) = stack.pop() {
            if q.contains_key(&l) || relevant.contains(&l) {
                continue;
            }
            if !cfg.nodes.contains(&l) {
                return Err(WpError::Missing(l));
            }
            if cfg.unresolved.contains(&l) {
                return Err(WpError::Unresolved(l));
            }
            stack.extend(cfg.successors(&l).cloned());
            relevant.insert(l);
        }
        let sub = Cfg {
            edges: cfg.edges.iter().filter(|(a, b)| relevant.contains(a) && relevant.contains(b)).cloned().collect(),
            ..Cfg::default()
        };
        if let Some(c) = sub.find_cycle(&relevant) {
            return Err(WpError::Cycle(c));
        }
        Ok(WpIter { program, cfg, relevant, h: q.clone() })
    }

    pub fn h(&self) -> &PredMap {
        &self.h
    }

    /// Labels that could be selected next, in selection order.
    pub fn eligible(&self) -> impl Iterator<Item = &Label> {
        self.relevant
            .iter()
            .filter(|l| !self.h.contains_key(*l) && self.cfg.successors(l).all(|s| self.h.contains_key(s)))
    }

    /// Extends the map by one label; `None` when nothing is eligible.
    pub fn step(&mut self) -> Option<Result<Label, WpError>> {
        let l = self.eligible().next()?.clone();
        let block = self.program.block(&l).expect("relevant labels are blocks");
        Some(wp_block(block, &self.h).map(|p| {
            self.h.insert(l.clone(), p);
            l
        }))
    }

    pub fn into_map(self) -> PredMap {
        self.h
    }
}

/// Extends `q` backwards until every target has a precondition, and returns
/// the map restricted to `targets ∪ dom(q)`.
pub fn wp_fragment(p: &Program, q: &PredMap, targets: &BTreeSet<Label>) -> Result<PredMap, WpError> {
    let mut it = WpIter::new(p, q, targets)?;
    while let Some(r) = it.step() {
        r?;
    }
    let h = it.into_map();
    if let Some(l) = targets.iter().find(|l| !h.contains_key(*l)) {
        return Err(WpError::Missing(l.clone()));
    }
    Ok(h.into_iter().filter(|(l, _)| targets.contains(l) || q.contains_key(l)).collect())
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::bir::expr::*;
    use crate::bir::Width;
    use alloc::format;
    use alloc::string::ToString;
    use alloc::vec;

    fn l(i: u32) -> Label {
        Label::Name(format!("l{i}"))
    }

    /// The two-entry, two-exit DAG: l0..l5 are blocks, l6 and l7 exits.
    pub(crate) fn diamond() -> Program {
        let j = |a: u32| Cf::Jmp(label(format!("l{a}")));
        let cj = |a: u32, b: u32| Cf::CJmp(var(format!("c{a}{b}")), label(format!("l{a}")), label(format!("l{b}")));
        Program::new(vec![
            Block::new(l(0), vec![], cj(2, 3)),
            Block::new(l(1), vec![], j(4)),
            Block::new(l(2), vec![], cj(4, 5)),
            Block::new(l(3), vec![], j(5)),
            Block::new(l(4), vec![], cj(5, 7)),
            Block::new(l(5), vec![], cj(6, 7)),
        ])
    }

    #[test]
    fn diamond_iterations() {
        let p = diamond();
        let g = build_cfg(&p);
        assert_eq!(g.entries, [l(0), l(1)].into_iter().collect());
        assert_eq!(g.exits, [l(6), l(7)].into_iter().collect());
        let q: PredMap = [(l(6), Arc::new(var("q6"))), (l(7), Arc::new(var("q7")))].into_iter().collect();
        let targets = [l(0), l(1)].into_iter().collect();
        let mut it = WpIter::new(&p, &q, &targets).unwrap();
        assert_eq!(it.eligible().cloned().collect::<Vec<_>>(), vec![l(5)]);
        assert_eq!(it.step().unwrap().unwrap(), l(5));
        assert_eq!(it.h().keys().cloned().collect::<Vec<_>>(), vec![l(5), l(6), l(7)]);
        assert_eq!(it.eligible().cloned().collect::<Vec<_>>(), vec![l(3), l(4)]);
        let order: Vec<Label> = core::iter::from_fn(|| it.step().map(Result::unwrap)).collect();
        assert_eq!(order, vec![l(3), l(4), l(1), l(2), l(0)]);
        let h = wp_fragment(&p, &q, &targets).unwrap();
        assert_eq!(h.keys().cloned().collect::<Vec<_>>(), vec![l(0), l(1), l(6), l(7)]);
    }

    #[test]
    fn statement_rules() {
        let q = Arc::new(var("Q"));
        let s = wp_stmt(&Stmt::Assign("Z".into(), add(var("Y"), var("Y"))), q);
        let s = wp_stmt(&Stmt::Assign("Y".into(), add(var("X"), var("X"))), s);
        assert_eq!(s.to_string(), "(subst (add X X) Y (subst (add Y Y) Z Q))");
        assert_eq!(wp_stmt(&Stmt::Assert(var("c")), Arc::new(tt())).to_string(), "(band c true)");
    }

    #[test]
    fn cf_rules_and_errors() {
        let h: PredMap = [(l(1), Arc::new(var("A"))), (l(2), Arc::new(var("B")))].into_iter().collect();
        let cf = Cf::CJmp(var("c"), label("l1"), label("l2"));
        assert_eq!(wp_cf(&cf, &h, &l(0)).unwrap().to_string(), "(band (implies c A) (implies (not c) B))");
        assert_eq!(wp_cf(&Cf::Jmp(label("l1")), &h, &l(0)).unwrap().to_string(), "A");
        assert_eq!(wp_cf(&Cf::Jmp(var("X")), &h, &l(0)), Err(WpError::Unresolved(l(0))));
        assert_eq!(wp_cf(&Cf::Jmp(label("l9")), &h, &l(0)), Err(WpError::Missing(l(9))));
    }

    #[test]
    fn loops_are_rejected() {
        let p = Program::new(vec![
            Block::new(l(0), vec![], Cf::Jmp(label("l1"))),
            Block::new(l(1), vec![], Cf::CJmp(var("c"), label("l0"), label("l2"))),
        ]);
        let q: PredMap = [(l(2), Arc::new(tt()))].into_iter().collect();
        let err = wp_fragment(&p, &q, &[l(0)].into_iter().collect()).unwrap_err();
        assert!(matches!(err, WpError::Cycle(_)));
        assert!(err.to_string().starts_with("fragment not loop-free"));
    }

    #[test]
    fn exit_only_query_is_identity() {
        let q: PredMap = [(l(6), Arc::new(word(Width::W1, 1)))].into_iter().collect();
        assert_eq!(wp_fragment(&diamond(), &q, &[l(6)].into_iter().collect()).unwrap(), q);
    }
}
