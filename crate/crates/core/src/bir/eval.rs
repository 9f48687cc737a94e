//! Evaluation and static typing of BIR expressions.
//!
//! Both functions share the per-operator typing rules below, so a
//! well-typed expression evaluated in an environment consistent with its
//! typing never yields a [`TypeError`].

use alloc::borrow::Cow;
use alloc::collections::BTreeMap;
use alloc::string::String;

use super::env::Env;
use super::expr::{BExpr, BinOp, UnOp};
use super::types::{BType, Width};
use super::value::{BValue, Label, Word};

/// The type-error outcome of evaluation (the "•" result). Carries a short
/// reason for diagnostics only.
#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
#[error("type error: {0}")]
pub struct TypeError(pub &'static str);

type TResult<T> = Result<T, TypeError>;

pub fn unop_type(op: UnOp, t: BType) -> TResult<BType> {
    let BType::Reg(w) = t else {
        return Err(TypeError("unary operator applied to a non-word"));
    };
    match op {
        UnOp::Not | UnOp::Neg => Ok(t),
        UnOp::ZeroExt(to) | UnOp::SignExt(to) if to.bits() >= w.bits() => Ok(BType::Reg(to)),
        UnOp::ZeroExt(_) | UnOp::SignExt(_) => Err(TypeError("extension to a narrower width")),
        UnOp::Trunc(to) if to.bits() <= w.bits() => Ok(BType::Reg(to)),
        UnOp::Trunc(_) => Err(TypeError("truncation to a wider width")),
    }
}

pub fn binop_type(op: BinOp, a: BType, b: BType) -> TResult<BType> {
    if a != b {
        return Err(TypeError("operand types differ"));
    }
    match (op, a) {
        (BinOp::BoolAnd | BinOp::BoolOr | BinOp::Implies, BType::Reg(Width::W1)) => Ok(BType::BOOL),
        (BinOp::BoolAnd | BinOp::BoolOr | BinOp::Implies, _) => Err(TypeError("boolean operator on non-Reg1 operands")),
        (BinOp::Eq, BType::Reg(_) | BType::Mem(_)) => Ok(BType::BOOL),
        (BinOp::ULt | BinOp::SLt, BType::Reg(_)) => Ok(BType::BOOL),
        (_, BType::Reg(_)) if !op.is_predicate() => Ok(a),
        _ => Err(TypeError("operator not defined on this type")),
    }
}

pub fn load_type(mem: BType, addr: BType, width: Width) -> TResult<BType> {
    match mem {
        BType::Mem(aw) if addr == BType::Reg(aw.word()) => {}
        BType::Mem(_) => return Err(TypeError("address width does not match memory")),
        _ => return Err(TypeError("load from a non-memory")),
    }
    if width.bytes().is_none() {
        return Err(TypeError("Reg1 is not addressable"));
    }
    Ok(BType::Reg(width))
}

pub fn store_type(mem: BType, addr: BType, value: BType, width: Width) -> TResult<BType> {
    load_type(mem, addr, width)?;
    if value != BType::Reg(width) {
        return Err(TypeError("stored value does not match store width"));
    }
    Ok(mem)
}

pub fn ite_type(c: BType, t: BType, e: BType) -> TResult<BType> {
    if c != BType::BOOL {
        return Err(TypeError("condition must be Reg1"));
    }
    if t != e {
        return Err(TypeError("branches of ite differ in type"));
    }
    Ok(t)
}

fn sign_extend(w: Word, to: Width) -> Word {
    Word::new(to, w.signed() as u64)
}

pub fn apply_unop(op: UnOp, w: Word) -> Word {
    match op {
        UnOp::Not => Word::new(w.width(), !w.bits()),
        UnOp::Neg => Word::new(w.width(), w.bits().wrapping_neg()),
        UnOp::ZeroExt(to) | UnOp::Trunc(to) => Word::new(to, w.bits()),
        UnOp::SignExt(to) => sign_extend(w, to),
    }
}

/// Word-level binary operators. Callers must have checked `binop_type`.
pub fn apply_binop(op: BinOp, a: Word, b: Word) -> Word {
    let width = a.width();
    let bits = width.bits();
    let amount = |b: Word| (b.bits() % u64::from(bits)) as u32;
    let w = |v: u64| Word::new(width, v);
    match op {
        BinOp::Add => w(a.bits().wrapping_add(b.bits())),
        BinOp::Sub => w(a.bits().wrapping_sub(b.bits())),
        BinOp::Mul => w(a.bits().wrapping_mul(b.bits())),
        BinOp::And | BinOp::BoolAnd => w(a.bits() & b.bits()),
        BinOp::Or | BinOp::BoolOr => w(a.bits() | b.bits()),
        BinOp::Xor => w(a.bits() ^ b.bits()),
        BinOp::Implies => w(!a.bits() | b.bits()),
        BinOp::Shl => w(a.bits() << amount(b)),
        BinOp::LShr => w(a.bits() >> amount(b)),
        BinOp::AShr => w((a.signed() >> amount(b)) as u64),
        BinOp::Eq => Word::from_bool(a == b),
        BinOp::ULt => Word::from_bool(a.bits() < b.bits()),
        BinOp::SLt => Word::from_bool(a.signed() < b.signed()),
    }
}

enum Scope<'a> {
    Base(&'a Env),
    Bind { name: &'a str, value: &'a BValue, parent: &'a Scope<'a> },
}

impl<'a> Scope<'a> {
    fn lookup(&self, var: &str) -> Option<&'a BValue> {
        match self {
            Scope::Base(env) => env.get(var),
            Scope::Bind { name, value, parent } => {
                if *name == var {
                    Some(value)
                } else {
                    parent.lookup(var)
                }
            }
        }
    }
}

/// Evaluates `e` in `env`. Total: every failure is a [`TypeError`].
///
/// `Subst(r, v, body)` evaluates `body` with `v` bound to the value of `r`.
pub fn eval(e: &BExpr, env: &Env) -> TResult<BValue> {
    eval_in(e, &Scope::Base(env)).map(Cow::into_owned)
}

/// Evaluates a `Reg1` expression to a boolean.
pub fn eval_bool(e: &BExpr, env: &Env) -> TResult<bool> {
    match eval(e, env)? {
        BValue::Word(w) if w.width() == Width::W1 => Ok(w.is_true()),
        _ => Err(TypeError("expected a Reg1 value")),
    }
}

fn word_of(v: &BValue) -> TResult<Word> {
    v.as_word().ok_or(TypeError("expected a word"))
}

fn eval_in<'a>(e: &'a BExpr, scope: &Scope<'a>) -> TResult<Cow<'a, BValue>> {
    Ok(match e {
        BExpr::Const(w) => Cow::Owned(BValue::Word(*w)),
        BExpr::Label(n) => Cow::Owned(BValue::Label(Label::Name(n.clone()))),
        BExpr::Var(v) => Cow::Borrowed(scope.lookup(v).ok_or(TypeError("unbound variable"))?),
        BExpr::Ite(c, t, f) => {
            let c = eval_in(c, scope)?;
            let t = eval_in(t, scope)?;
            let f = eval_in(f, scope)?;
            ite_type(c.ty(), t.ty(), f.ty())?;
            if word_of(&c)?.is_true() {
                t
            } else {
                f
            }
        }
        BExpr::Un(op, a) => {
            let a = eval_in(a, scope)?;
            unop_type(*op, a.ty())?;
            Cow::Owned(BValue::Word(apply_unop(*op, word_of(&a)?)))
        }
        BExpr::Bin(op, a, b) => {
            let a = eval_in(a, scope)?;
            let b = eval_in(b, scope)?;
            binop_type(*op, a.ty(), b.ty())?;
            let out = match (&*a, &*b) {
                (BValue::Word(x), BValue::Word(y)) => apply_binop(*op, *x, *y),
                (BValue::Mem(x), BValue::Mem(y)) => Word::from_bool(x == y),
                _ => return Err(TypeError("operator not defined on this type")),
            };
            Cow::Owned(BValue::Word(out))
        }
        BExpr::Load(m, a, w) => {
            let m = eval_in(m, scope)?;
            let a = eval_in(a, scope)?;
            load_type(m.ty(), a.ty(), *w)?;
            let mem = m.as_mem().ok_or(TypeError("load from a non-memory"))?;
            let v = mem.load(word_of(&a)?.bits(), *w).ok_or(TypeError("Reg1 is not addressable"))?;
            Cow::Owned(BValue::Word(v))
        }
        BExpr::Store(m, a, v, w) => {
            let m = eval_in(m, scope)?;
            let a = eval_in(a, scope)?;
            let v = eval_in(v, scope)?;
            store_type(m.ty(), a.ty(), v.ty(), *w)?;
            let BValue::Mem(mut mem) = m.into_owned() else {
                return Err(TypeError("store to a non-memory"));
            };
            mem.store_in_place(word_of(&a)?.bits(), word_of(&v)?).ok_or(TypeError("Reg1 is not addressable"))?;
            Cow::Owned(BValue::Mem(mem))
        }
        BExpr::Subst(r, v, body) => {
            let value = eval_in(r, scope)?.into_owned();
            let frame = Scope::Bind { name: v, value: &value, parent: scope };
            Cow::Owned(eval_in(body, &frame)?.into_owned())
        }
    })
}

/// Variable typing used by [`type_of_expr`].
pub type Typing = BTreeMap<String, BType>;

enum TyScope<'a> {
    Base(&'a Typing),
    Bind { name: &'a str, ty: BType, parent: &'a TyScope<'a> },
}

impl TyScope<'_> {
    fn lookup(&self, var: &str) -> Option<BType> {
        match self {
            TyScope::Base(t) => t.get(var).copied(),
            TyScope::Bind { name, ty, parent } => {
                if *name == var {
                    Some(*ty)
                } else {
                    parent.lookup(var)
                }
            }
        }
    }
}

/// Static type of `e` under `typing`, or the reason it is ill-typed.
pub fn type_of_expr(e: &BExpr, typing: &Typing) -> TResult<BType> {
    type_in(e, &TyScope::Base(typing))
}

fn type_in(e: &BExpr, scope: &TyScope<'_>) -> TResult<BType> {
    match e {
        BExpr::Const(w) => Ok(BType::Reg(w.width())),
        BExpr::Label(_) => Ok(BType::Label),
        BExpr::Var(v) => scope.lookup(v).ok_or(TypeError("unbound variable")),
        BExpr::Ite(c, t, f) => ite_type(type_in(c, scope)?, type_in(t, scope)?, type_in(f, scope)?),
        BExpr::Un(op, a) => unop_type(*op, type_in(a, scope)?),
        BExpr::Bin(op, a, b) => binop_type(*op, type_in(a, scope)?, type_in(b, scope)?),
        BExpr::Load(m, a, w) => load_type(type_in(m, scope)?, type_in(a, scope)?, *w),
        BExpr::Store(m, a, v, w) => store_type(type_in(m, scope)?, type_in(a, scope)?, type_in(v, scope)?, *w),
        BExpr::Subst(r, v, body) => {
            let ty = type_in(r, scope)?;
            if ty == BType::Label {
                return Err(TypeError("labels cannot be substituted"));
            }
            type_in(body, &TyScope::Bind { name: v, ty, parent: scope })
        }
    }
}
