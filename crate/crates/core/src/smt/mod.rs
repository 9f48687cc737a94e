//! SMT-LIB2 export (`QF_ABV`) and solver answer parsing. The export is
//! untrusted; it is checked against evaluation by differential tests.

mod model;

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::bir::{free_vars, BExpr, BType, BinOp, TypeError, Typing, UnOp, Width};

pub use model::{parse_answer, Answer, MalformedOutput, Model, ModelValue};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum SmtError {
    #[error("substitution present: simplify first")]
    SubstPresent,
    #[error("no type for variable {0}")]
    Untyped(String),
    #[error("labels have no SMT encoding")]
    Label,
    #[error("variable name {0:?} cannot be written as an SMT symbol")]
    BadName(String),
    #[error("ill-typed expression: {0}")]
    Type(TypeError),
}

pub fn sort(ty: BType) -> Result<String, SmtError> {
    match ty {
        BType::Reg(w) => Ok(format!("(_ BitVec {})", w.bits())),
        BType::Mem(a) => Ok(format!("(Array (_ BitVec {}) (_ BitVec 8))", a.word().bits())),
        BType::Label => Err(SmtError::Label),
    }
}

pub fn symbol(name: &str) -> Result<String, SmtError> {
    if name.is_empty() || name.contains(['|', '\\']) {
        return Err(SmtError::BadName(String::from(name)));
    }
    Ok(format!("|{name}|"))
}

fn bv(bits: u64, w: Width) -> String {
    if w == Width::W1 {
        String::from(if bits & 1 == 1 { "#b1" } else { "#b0" })
    } else {
        format!("(_ bv{} {})", bits & w.mask(), w.bits())
    }
}

fn reg(ty: BType) -> Result<Width, SmtError> {
    match ty {
        BType::Reg(w) => Ok(w),
        _ => Err(SmtError::Type(TypeError("expected a word"))),
    }
}

fn bool_to_bv(pred: String) -> String {
    format!("(ite {pred} #b1 #b0)")
}

/// Translates a Subst-free expression, returning its term and type.
pub fn to_smt(e: &BExpr, typing: &Typing) -> Result<(String, BType), SmtError> {
    use crate::bir::eval::{binop_type, ite_type, load_type, store_type, unop_type};
    let ty = |r: Result<BType, TypeError>| r.map_err(SmtError::Type);
    Ok(match e {
        BExpr::Const(w) => (bv(w.bits(), w.width()), BType::Reg(w.width())),
        BExpr::Label(_) => return Err(SmtError::Label),
        BExpr::Var(v) => {
            let t = *typing.get(v).ok_or_else(|| SmtError::Untyped(v.clone()))?;
            sort(t)?;
            (symbol(v)?, t)
        }
        BExpr::Subst(..) => return Err(SmtError::SubstPresent),
        BExpr::Ite(c, a, b) => {
            let (c, ct) = to_smt(c, typing)?;
            let (a, at) = to_smt(a, typing)?;
            let (b, bt) = to_smt(b, typing)?;
            let t = ty(ite_type(ct, at, bt))?;
            (format!("(ite (= {c} #b1) {a} {b})"), t)
        }
        BExpr::Un(op, a) => {
            let (a, at) = to_smt(a, typing)?;
            let t = ty(unop_type(*op, at))?;
            let from = reg(at)?.bits();
            let to = reg(t)?.bits();
            let s = match op {
                UnOp::Not => format!("(bvnot {a})"),
                UnOp::Neg => format!("(bvneg {a})"),
                _ if from == to => a,
                UnOp::ZeroExt(_) => format!("((_ zero_extend {}) {a})", to - from),
                UnOp::SignExt(_) => format!("((_ sign_extend {}) {a})", to - from),
                UnOp::Trunc(_) => format!("((_ extract {} 0) {a})", to - 1),
            };
            (s, t)
        }
        BExpr::Bin(op, a, b) => {
            let (a, at) = to_smt(a, typing)?;
            let (b, bt) = to_smt(b, typing)?;
            let t = ty(binop_type(*op, at, bt))?;
            let shift = |name: &str| -> Result<String, SmtError> {
                let w = reg(at)?;
                Ok(format!("({name} {a} (bvurem {b} {}))", bv(u64::from(w.bits()), w)))
            };
            let s = match op {
                BinOp::Add => format!("(bvadd {a} {b})"),
                BinOp::Sub => format!("(bvsub {a} {b})"),
                BinOp::Mul => format!("(bvmul {a} {b})"),
                BinOp::And | BinOp::BoolAnd => format!("(bvand {a} {b})"),
                BinOp::Or | BinOp::BoolOr => format!("(bvor {a} {b})"),
                BinOp::Xor => format!("(bvxor {a} {b})"),
                BinOp::Implies => format!("(bvor (bvnot {a}) {b})"),
                BinOp::Shl => shift("bvshl")?,
                BinOp::LShr => shift("bvlshr")?,
                BinOp::AShr => shift("bvashr")?,
                BinOp::Eq => bool_to_bv(format!("(= {a} {b})")),
                BinOp::ULt => bool_to_bv(format!("(bvult {a} {b})")),
                BinOp::SLt => bool_to_bv(format!("(bvslt {a} {b})")),
            };
            (s, t)
        }
        BExpr::Load(m, a, w) => {
            let (m, mt) = to_smt(m, typing)?;
            let (a, at) = to_smt(a, typing)?;
            let t = ty(load_type(mt, at, *w))?;
            let aw = reg(at)?;
            let n = w.bytes().expect("load_type checked the width");
            let mut bytes: Vec<String> = (0..n).map(|i| format!("(select {m} {})", offset(&a, i, aw))).collect();
            bytes.reverse();
            let s = if n == 1 { bytes.pop().unwrap() } else { format!("(concat {})", bytes.join(" ")) };
            (s, t)
        }
        BExpr::Store(m, a, v, w) => {
            let (m, mt) = to_smt(m, typing)?;
            let (a, at) = to_smt(a, typing)?;
            let (v, vt) = to_smt(v, typing)?;
            let t = ty(store_type(mt, at, vt, *w))?;
            let aw = reg(at)?;
            let mut s = m;
            for i in 0..w.bytes().expect("store_type checked the width") {
                let byte =
                    if *w == Width::W8 { v.clone() } else { format!("((_ extract {} {}) {v})", 8 * i + 7, 8 * i) };
                s = format!("(store {s} {} {byte})", offset(&a, i, aw));
            }
            (s, t)
        }
    })
}

fn offset(a: &str, i: u32, w: Width) -> String {
    if i == 0 {
        String::from(a)
    } else {
        format!("(bvadd {a} {})", bv(u64::from(i), w))
    }
}

/// A complete script and the variables whose values it asks for.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Query {
    pub script: String,
    pub vars: Vec<(String, BType)>,
}

/// Script asserting `premise ∧ ¬conclusion`: unsat means the implication
/// is valid. Declarations are sorted by name so the text is deterministic.
pub fn implication_query(premise: &BExpr, conclusion: &BExpr, typing: &Typing) -> Result<Query, SmtError> {
    let mut names: BTreeSet<String> = free_vars(premise);
    names.extend(free_vars(conclusion));
    let mut vars = Vec::new();
    let mut s = String::from("(set-logic QF_ABV)\n(set-option :produce-models true)\n");
    for n in names {
        let t = *typing.get(&n).ok_or_else(|| SmtError::Untyped(n.clone()))?;
        let _ = writeln!(s, "(declare-fun {} () {})", symbol(&n)?, sort(t)?);
        vars.push((n, t));
    }
    for (e, truth) in [(premise, "#b1"), (conclusion, "#b0")] {
        let (term, t) = to_smt(e, typing)?;
        if t != BType::BOOL {
            return Err(SmtError::Type(TypeError("goal sides must be Reg1")));
        }
        let _ = writeln!(s, "(assert (= {term} {truth}))");
    }
    s.push_str("(check-sat)\n");
    if !vars.is_empty() {
        let syms: Vec<String> = vars.iter().map(|(n, _)| format!("|{n}|")).collect();
        let _ = writeln!(s, "(get-value ({}))", syms.join(" "));
    }
    s.push_str("(exit)\n");
    Ok(Query { script: s, vars })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bir::expr::*;
    use crate::bir::AddrWidth;
    use alloc::string::ToString;

    fn typing() -> Typing {
        [
            ("X".into(), BType::Reg(Width::W64)),
            ("Y".into(), BType::Reg(Width::W64)),
            ("M".into(), BType::Mem(AddrWidth::A32)),
            ("A".into(), BType::Reg(Width::W32)),
            ("b".into(), BType::BOOL),
        ]
        .into_iter()
        .collect()
    }

    #[test]
    fn carry_formula() {
        let (s, t) = to_smt(&ult(not(var("X")), var("Y")), &typing()).unwrap();
        assert_eq!(s, "(ite (bvult (bvnot |X|) |Y|) #b1 #b0)");
        assert_eq!(t, BType::BOOL);
    }

    #[test]
    fn little_endian_memory() {
        let (s, _) = to_smt(&load(var("M"), var("A"), Width::W32), &typing()).unwrap();
        assert_eq!(
            s,
            "(concat (select |M| (bvadd |A| (_ bv3 32))) (select |M| (bvadd |A| (_ bv2 32))) \
             (select |M| (bvadd |A| (_ bv1 32))) (select |M| |A|))"
        );
        let (s, _) = to_smt(&store(var("M"), var("A"), word(Width::W16, 0x1234), Width::W16), &typing()).unwrap();
        assert_eq!(
            s,
            "(store (store |M| |A| ((_ extract 7 0) (_ bv4660 16))) (bvadd |A| (_ bv1 32)) ((_ extract 15 8) (_ bv4660 16)))"
        );
    }

    #[test]
    fn booleans_are_one_bit() {
        let (s, _) = to_smt(&band(var("b"), tt()), &typing()).unwrap();
        assert_eq!(s, "(bvand |b| #b1)");
    }

    #[test]
    fn errors() {
        let t = typing();
        assert_eq!(to_smt(&subst(var("X"), "X", tt()), &t), Err(SmtError::SubstPresent));
        assert_eq!(to_smt(&var("Z"), &t), Err(SmtError::Untyped("Z".into())));
        assert!(matches!(to_smt(&add(var("X"), var("A")), &t), Err(SmtError::Type(_))));
        assert_eq!(SmtError::SubstPresent.to_string(), "substitution present: simplify first");
    }

    #[test]
    fn script_is_deterministic() {
        let p = ult(var("Y"), var("X"));
        let q = implies(var("b"), eq(var("X"), var("Y")));
        let a = implication_query(&p, &q, &typing()).unwrap();
        assert_eq!(a, implication_query(&p, &q, &typing()).unwrap());
        assert_eq!(
            a.script,
            "(set-logic QF_ABV)\n(set-option :produce-models true)\n\
             (declare-fun |X| () (_ BitVec 64))\n(declare-fun |Y| () (_ BitVec 64))\n(declare-fun |b| () (_ BitVec 1))\n\
             (assert (= (ite (bvult |Y| |X|) #b1 #b0) #b1))\n\
             (assert (= (bvor (bvnot |b|) (ite (= |X| |Y|) #b1 #b0)) #b0))\n\
             (check-sat)\n(get-value (|X| |Y| |b|))\n(exit)\n"
        );
    }
}
