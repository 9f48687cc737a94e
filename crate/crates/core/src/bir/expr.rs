use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::sync::Arc;
use core::fmt;

use super::types::Width;
use super::value::{Label, Word};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum UnOp {
    /// Bitwise complement; boolean negation on `Reg1`.
    Not,
    Neg,
    ZeroExt(Width),
    SignExt(Width),
    Trunc(Width),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    And,
    Or,
    Xor,
    Shl,
    LShr,
    AShr,
    Eq,
    ULt,
    SLt,
    BoolAnd,
    BoolOr,
    Implies,
}

impl BinOp {
    pub const ALL: [BinOp; 15] = [
        BinOp::Add,
        BinOp::Sub,
        BinOp::Mul,
        BinOp::And,
        BinOp::Or,
        BinOp::Xor,
        BinOp::Shl,
        BinOp::LShr,
        BinOp::AShr,
        BinOp::Eq,
        BinOp::ULt,
        BinOp::SLt,
        BinOp::BoolAnd,
        BinOp::BoolOr,
        BinOp::Implies,
    ];

    pub const fn keyword(self) -> &'static str {
        match self {
            BinOp::Add => "add",
            BinOp::Sub => "sub",
            BinOp::Mul => "mul",
            BinOp::And => "and",
            BinOp::Or => "or",
            BinOp::Xor => "xor",
            BinOp::Shl => "shl",
            BinOp::LShr => "lshr",
            BinOp::AShr => "ashr",
            BinOp::Eq => "eq",
            BinOp::ULt => "ult",
            BinOp::SLt => "slt",
            BinOp::BoolAnd => "band",
            BinOp::BoolOr => "bor",
            BinOp::Implies => "implies",
        }
    }

    pub fn from_keyword(s: &str) -> Option<BinOp> {
        BinOp::ALL.into_iter().find(|op| op.keyword() == s)
    }

    /// Operators producing a `Reg1` result regardless of operand width.
    pub const fn is_predicate(self) -> bool {
        matches!(self, BinOp::Eq | BinOp::ULt | BinOp::SLt)
    }

    pub const fn is_boolean(self) -> bool {
        matches!(self, BinOp::BoolAnd | BinOp::BoolOr | BinOp::Implies)
    }
}

/// BIR expression.
///
/// Children are reference counted so that predicates built by the WP engine
/// can share sub-formulas.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum BExpr {
    Const(Word),
    /// A string label; only meaningful as a jump target.
    Label(String),
    Var(String),
    Ite(Arc<BExpr>, Arc<BExpr>, Arc<BExpr>),
    Un(UnOp, Arc<BExpr>),
    Bin(BinOp, Arc<BExpr>, Arc<BExpr>),
    /// `load(mem, addr, width)`: little-endian read of `width / 8` bytes.
    Load(Arc<BExpr>, Arc<BExpr>, Width),
    /// `store(mem, addr, value, width)`: the updated memory.
    Store(Arc<BExpr>, Arc<BExpr>, Arc<BExpr>, Width),
    /// Explicit substitution `{replacement / var} body`, only produced by
    /// weakest-precondition generation.
    Subst(Arc<BExpr>, String, Arc<BExpr>),
}

pub fn word(width: Width, bits: u64) -> BExpr {
    BExpr::Const(Word::new(width, bits))
}

pub fn w64(bits: u64) -> BExpr {
    word(Width::W64, bits)
}

pub fn tt() -> BExpr {
    BExpr::Const(Word::TRUE)
}

pub fn ff() -> BExpr {
    BExpr::Const(Word::FALSE)
}

pub fn var(name: impl Into<String>) -> BExpr {
    BExpr::Var(name.into())
}

pub fn label(name: impl Into<String>) -> BExpr {
    BExpr::Label(name.into())
}

/// Constant expression denoting a jump to `l`.
pub fn label_expr(l: &Label) -> BExpr {
    match l {
        Label::Addr(a) => w64(*a),
        Label::Name(n) => label(n.clone()),
    }
}

pub fn un(op: UnOp, e: BExpr) -> BExpr {
    BExpr::Un(op, Arc::new(e))
}

pub fn bin(op: BinOp, a: BExpr, b: BExpr) -> BExpr {
    BExpr::Bin(op, Arc::new(a), Arc::new(b))
}

pub fn ite(c: BExpr, t: BExpr, e: BExpr) -> BExpr {
    BExpr::Ite(Arc::new(c), Arc::new(t), Arc::new(e))
}

pub fn load(mem: BExpr, addr: BExpr, width: Width) -> BExpr {
    BExpr::Load(Arc::new(mem), Arc::new(addr), width)
}

pub fn store(mem: BExpr, addr: BExpr, value: BExpr, width: Width) -> BExpr {
    BExpr::Store(Arc::new(mem), Arc::new(addr), Arc::new(value), width)
}

pub fn subst(replacement: BExpr, v: impl Into<String>, body: BExpr) -> BExpr {
    BExpr::Subst(Arc::new(replacement), v.into(), Arc::new(body))
}

macro_rules! bin_builders {
    ($($name:ident => $op:ident),* $(,)?) => {
        $(
            pub fn $name(a: BExpr, b: BExpr) -> BExpr {
                bin(BinOp::$op, a, b)
            }
        )*
    };
}

bin_builders! {
    add => Add, sub => Sub, mul => Mul, and => And, or => Or, xor => Xor,
    shl => Shl, lshr => LShr, ashr => AShr, eq => Eq, ult => ULt, slt => SLt,
    band => BoolAnd, bor => BoolOr, implies => Implies,
}

pub fn not(e: BExpr) -> BExpr {
    un(UnOp::Not, e)
}

pub fn neg(e: BExpr) -> BExpr {
    un(UnOp::Neg, e)
}

pub fn zext(w: Width, e: BExpr) -> BExpr {
    un(UnOp::ZeroExt(w), e)
}

pub fn sext(w: Width, e: BExpr) -> BExpr {
    un(UnOp::SignExt(w), e)
}

pub fn trunc(w: Width, e: BExpr) -> BExpr {
    un(UnOp::Trunc(w), e)
}

/// Conjunction of all `parts`; `true` when empty.
pub fn conj(parts: impl IntoIterator<Item = BExpr>) -> BExpr {
    let mut it = parts.into_iter();
    match it.next() {
        None => tt(),
        Some(first) => it.fold(first, band),
    }
}

/// Disjunction of all `parts`; `false` when empty.
pub fn disj(parts: impl IntoIterator<Item = BExpr>) -> BExpr {
    let mut it = parts.into_iter();
    match it.next() {
        None => ff(),
        Some(first) => it.fold(first, bor),
    }
}

impl BExpr {
    pub fn is_true(&self) -> bool {
        matches!(self, BExpr::Const(w) if w.is_true())
    }

    pub fn as_const(&self) -> Option<Word> {
        match self {
            BExpr::Const(w) => Some(*w),
            _ => None,
        }
    }

    /// Constant jump target denoted by this expression, if any.
    pub fn as_label(&self) -> Option<Label> {
        match self {
            BExpr::Const(w) => Some(Label::Addr(w.bits())),
            BExpr::Label(n) => Some(Label::Name(n.clone())),
            _ => None,
        }
    }

    /// Direct children in evaluation order.
    pub fn children(&self) -> impl Iterator<Item = &Arc<BExpr>> {
        let arr: [Option<&Arc<BExpr>>; 3] = match self {
            BExpr::Const(_) | BExpr::Label(_) | BExpr::Var(_) => [None, None, None],
            BExpr::Ite(a, b, c) | BExpr::Store(a, b, c, _) => [Some(a), Some(b), Some(c)],
            BExpr::Un(_, a) => [Some(a), None, None],
            BExpr::Bin(_, a, b) | BExpr::Load(a, b, _) | BExpr::Subst(a, _, b) => [Some(a), Some(b), None],
        };
        arr.into_iter().flatten()
    }

    pub fn contains_subst(&self) -> bool {
        matches!(self, BExpr::Subst(..)) || self.children().any(|c| c.contains_subst())
    }

    /// Number of nodes of the expression viewed as a tree (shared
    /// sub-expressions counted once per reference). Saturates at `u128::MAX`.
    pub fn tree_size(&self) -> u128 {
        fn go(e: &BExpr, memo: &mut BTreeMap<usize, u128>) -> u128 {
            let key = e as *const BExpr as usize;
            if let Some(n) = memo.get(&key) {
                return *n;
            }
            let n = e.children().fold(1u128, |acc, c| acc.saturating_add(go(c, memo)));
            memo.insert(key, n);
            n
        }
        go(self, &mut BTreeMap::new())
    }

    /// Number of distinct nodes in memory (each shared node counted once).
    pub fn dag_size(&self) -> usize {
        fn go(e: &BExpr, seen: &mut BTreeMap<usize, ()>) {
            if seen.insert(e as *const BExpr as usize, ()).is_some() {
                return;
            }
            for c in e.children() {
                go(c, seen);
            }
        }
        let mut seen = BTreeMap::new();
        go(self, &mut seen);
        seen.len()
    }

    /// Occurrences of variable references in the tree view (bound or free).
    pub fn var_occurrences(&self) -> u128 {
        fn go(e: &BExpr, memo: &mut BTreeMap<usize, u128>) -> u128 {
            let key = e as *const BExpr as usize;
            if let Some(n) = memo.get(&key) {
                return *n;
            }
            let own = u128::from(matches!(e, BExpr::Var(_)));
            let n = e.children().fold(own, |acc, c| acc.saturating_add(go(c, memo)));
            memo.insert(key, n);
            n
        }
        go(self, &mut BTreeMap::new())
    }

    pub fn subst_count(&self) -> usize {
        usize::from(matches!(self, BExpr::Subst(..))) + self.children().map(|c| c.subst_count()).sum::<usize>()
    }
}

fn write_word(f: &mut fmt::Formatter<'_>, w: Word) -> fmt::Result {
    if w.width() == Width::W1 {
        f.write_str(if w.is_true() { "true" } else { "false" })
    } else {
        write!(f, "(const {} {:#x})", w.width(), w.bits())
    }
}

pub(crate) fn write_quoted(f: &mut fmt::Formatter<'_>, s: &str) -> fmt::Result {
    f.write_str("\"")?;
    for c in s.chars() {
        match c {
            '"' => f.write_str("\\\"")?,
            '\\' => f.write_str("\\\\")?,
            c => write!(f, "{c}")?,
        }
    }
    f.write_str("\"")
}

/// Canonical S-expression rendering.
impl fmt::Display for BExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BExpr::Const(w) => write_word(f, *w),
            BExpr::Label(n) => {
                f.write_str("(label ")?;
                write_quoted(f, n)?;
                f.write_str(")")
            }
            BExpr::Var(v) => f.write_str(v),
            BExpr::Ite(c, t, e) => write!(f, "(ite {c} {t} {e})"),
            BExpr::Un(op, e) => match op {
                UnOp::Not => write!(f, "(not {e})"),
                UnOp::Neg => write!(f, "(neg {e})"),
                UnOp::ZeroExt(w) => write!(f, "(zext {w} {e})"),
                UnOp::SignExt(w) => write!(f, "(sext {w} {e})"),
                UnOp::Trunc(w) => write!(f, "(trunc {w} {e})"),
            },
            BExpr::Bin(op, a, b) => write!(f, "({} {a} {b})", op.keyword()),
            BExpr::Load(m, a, w) => write!(f, "(load {m} {a} {w})"),
            BExpr::Store(m, a, v, w) => write!(f, "(store {m} {a} {v} {w})"),
            BExpr::Subst(r, v, body) => write!(f, "(subst {r} {v} {body})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    #[test]
    fn renders_canonically() {
        let e = store(var("MEM"), var("SP"), var("R1"), Width::W32);
        assert_eq!(e.to_string(), "(store MEM SP R1 32)");
        assert_eq!(add(var("SP"), word(Width::W32, 4)).to_string(), "(add SP (const 32 0x4))");
        assert_eq!(band(tt(), ff()).to_string(), "(band true false)");
        assert_eq!(label("a\"b").to_string(), "(label \"a\\\"b\")");
    }

    #[test]
    fn shared_subtrees_count_per_reference() {
        let x = Arc::new(add(var("X"), var("X")));
        let e = BExpr::Bin(BinOp::Add, x.clone(), x);
        assert_eq!(e.tree_size(), 7);
        assert_eq!(e.dag_size(), 4);
        assert_eq!(e.var_occurrences(), 4);
    }
}
