//! Whole-program type inference and checking.
//!
//! Each variable has one type for the whole program, fixed by its first
//! use. Inference runs to a fixpoint, then every statement is re-checked
//! against the inferred context with [`type_of_expr`].

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::bir::eval::{binop_type, load_type, store_type, unop_type};
use crate::bir::{type_of_expr, AddrWidth, BExpr, BType, Env, Label, Typing, UnOp, Width};
use crate::sem::{Cf, Program, Stmt};

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TypingContext {
    pub vars: Typing,
    pub labels: BTreeSet<Label>,
}

/// Location of a problem: block label and statement index. The control-flow
/// statement has index `stmts.len()`.
#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Diagnostic {
    pub label: Label,
    pub index: usize,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} #{}: {}", self.label, self.index, self.message)
    }
}

pub fn check_program(p: &Program) -> Result<TypingContext, Vec<Diagnostic>> {
    check_program_with(p, &Typing::new())
}

/// Like [`check_program`], with some variable types declared up front.
pub fn check_program_with(p: &Program, declared: &Typing) -> Result<TypingContext, Vec<Diagnostic>> {
    let mut diags = Vec::new();
    for l in p.duplicate_labels() {
        diags.push(Diagnostic { label: l, index: 0, message: "duplicate block label".into() });
    }
    let mut inf = Infer { vars: declared.clone(), changed: false };
    loop {
        inf.changed = false;
        for b in p.blocks() {
            for s in &b.stmts {
                match s {
                    Stmt::Assign(v, e) => match inf.vars.get(v).copied() {
                        Some(t) => inf.check(e, t),
                        None => {
                            if let Some(t) = inf.synth(e) {
                                if t != BType::Label {
                                    inf.bind(v, t);
                                }
                            }
                        }
                    },
                    Stmt::Assert(e) => inf.check(e, BType::BOOL),
                }
            }
            match &b.cf {
                Cf::Jmp(t) => {
                    inf.synth(t);
                }
                Cf::CJmp(c, t, e) => {
                    inf.check(c, BType::BOOL);
                    inf.synth(t);
                    inf.synth(e);
                }
            }
        }
        if !inf.changed {
            break;
        }
    }
    let vars = inf.vars;

    for b in p.blocks() {
        let mut report = |index: usize, message: String| {
            diags.push(Diagnostic { label: b.label.clone(), index, message });
        };
        let ty = |index: usize, e: &BExpr, report: &mut dyn FnMut(usize, String)| -> Option<BType> {
            if e.contains_subst() {
                report(index, "substitution in a program statement".into());
                return None;
            }
            match type_of_expr(e, &vars) {
                Ok(t) => Some(t),
                Err(err) => {
                    let missing = crate::bir::free_vars(e).into_iter().find(|v| !vars.contains_key(v));
                    match missing {
                        Some(v) => report(index, format!("cannot infer the type of {v}")),
                        None => report(index, err.0.to_string()),
                    }
                    None
                }
            }
        };
        for (i, s) in b.stmts.iter().enumerate() {
            match s {
                Stmt::Assign(v, e) => {
                    if let Some(t) = ty(i, e, &mut report) {
                        match vars.get(v) {
                            _ if t == BType::Label => report(i, "labels cannot be assigned".into()),
                            Some(&vt) if vt != t => report(i, format!("conflicting types for {v}: {vt} and {t}")),
                            _ => {}
                        }
                    }
                }
                Stmt::Assert(e) => {
                    if let Some(t) = ty(i, e, &mut report) {
                        if t != BType::BOOL {
                            report(i, "condition must be Reg1".into());
                        }
                    }
                }
            }
        }
        let i = b.stmts.len();
        if let Cf::CJmp(c, _, _) = &b.cf {
            if let Some(t) = ty(i, c, &mut report) {
                if t != BType::BOOL {
                    report(i, "condition must be Reg1".into());
                }
            }
        }
        for t in b.cf.targets() {
            if let Some(BType::Mem(_)) = ty(i, t, &mut report) {
                report(i, "jump target must be a word or a label".into());
            }
        }
    }

    if diags.is_empty() {
        Ok(TypingContext { vars, labels: p.labels().cloned().collect() })
    } else {
        Err(diags)
    }
}

/// True iff every variable of `ctx` is bound in `env` with its type.
pub fn check_env(env: &Env, ctx: &TypingContext) -> bool {
    ctx.vars.iter().all(|(v, t)| env.get(v).is_some_and(|val| val.ty() == *t))
}

struct Infer {
    vars: Typing,
    changed: bool,
}

impl Infer {
    fn bind(&mut self, v: &str, t: BType) {
        if !self.vars.contains_key(v) {
            self.vars.insert(v.into(), t);
            self.changed = true;
        }
    }

    /// Best-effort type; binds unknown variables where the context forces them.
    fn synth(&mut self, e: &BExpr) -> Option<BType> {
        match e {
            BExpr::Const(w) => Some(BType::Reg(w.width())),
            BExpr::Label(_) => Some(BType::Label),
            BExpr::Var(v) => self.vars.get(v).copied(),
            BExpr::Ite(c, t, f) => {
                self.check(c, BType::BOOL);
                let tt = self.synth(t);
                let ft = self.synth(f);
                match (tt, ft) {
                    (Some(x), None) => {
                        self.check(f, x);
                        Some(x)
                    }
                    (None, Some(y)) => {
                        self.check(t, y);
                        Some(y)
                    }
                    (x, _) => x,
                }
            }
            BExpr::Un(op, a) => {
                let at = self.synth(a)?;
                unop_type(*op, at).ok()
            }
            BExpr::Bin(op, a, b) => {
                if op.is_boolean() {
                    self.check(a, BType::BOOL);
                    self.check(b, BType::BOOL);
                    return Some(BType::BOOL);
                }
                let at = self.synth(a);
                let bt = self.synth(b);
                let t = match (at, bt) {
                    (Some(x), None) => {
                        self.check(b, x);
                        x
                    }
                    (None, Some(y)) => {
                        self.check(a, y);
                        y
                    }
                    (Some(x), Some(_)) => x,
                    (None, None) if op.is_predicate() => return Some(BType::BOOL),
                    (None, None) => return None,
                };
                binop_type(*op, t, t).ok()
            }
            BExpr::Load(m, a, w) => {
                self.mem_addr(m, a);
                if w.bytes().is_some() {
                    Some(BType::Reg(*w))
                } else {
                    None
                }
            }
            BExpr::Store(m, a, v, w) => {
                self.check(v, BType::Reg(*w));
                let mt = self.mem_addr(m, a)?;
                store_type(mt, BType::Reg(mt_addr(mt)?), BType::Reg(*w), *w).ok()
            }
            BExpr::Subst(..) => None,
        }
    }

    /// Relates a memory operand and its address operand; returns the memory type.
    fn mem_addr(&mut self, m: &BExpr, a: &BExpr) -> Option<BType> {
        let mt = self.synth(m);
        let at = self.synth(a);
        match (mt, at) {
            (Some(BType::Mem(aw)), None) => {
                self.check(a, BType::Reg(aw.word()));
                mt
            }
            (None, Some(BType::Reg(w))) => {
                let aw = match w {
                    Width::W32 => AddrWidth::A32,
                    Width::W64 => AddrWidth::A64,
                    _ => return None,
                };
                self.check(m, BType::Mem(aw));
                Some(BType::Mem(aw))
            }
            (Some(t), Some(a)) => load_type(t, a, Width::W8).ok().map(|_| t),
            _ => None,
        }
    }

    /// Pushes an expected type down to unbound variables.
    fn check(&mut self, e: &BExpr, t: BType) {
        match e {
            BExpr::Var(v) => {
                if t != BType::Label {
                    self.bind(v, t);
                }
            }
            BExpr::Ite(c, a, b) => {
                self.check(c, BType::BOOL);
                self.check(a, t);
                self.check(b, t);
            }
            BExpr::Un(UnOp::Not | UnOp::Neg, a) => self.check(a, t),
            BExpr::Bin(op, a, b) if !op.is_predicate() => {
                self.check(a, t);
                self.check(b, t);
            }
            BExpr::Store(m, a, v, w) => {
                self.check(m, t);
                if let BType::Mem(aw) = t {
                    self.check(a, BType::Reg(aw.word()));
                }
                self.check(v, BType::Reg(*w));
            }
            _ => {
                self.synth(e);
            }
        }
    }
}

fn mt_addr(t: BType) -> Option<Width> {
    match t {
        BType::Mem(aw) => Some(aw.word()),
        _ => None,
    }
}
