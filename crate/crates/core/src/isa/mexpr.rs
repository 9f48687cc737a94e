//! Symbolic machine-level expressions used in guards and updates.
//!
//! Evaluation here is the reference semantics: flag operators are defined
//! on unbounded integers, independently of the bitvector rewrites used
//! when translating to BIR.

use alloc::borrow::Cow;
use alloc::boxed::Box;
use core::fmt;

use super::MachState;
use crate::bir::{Memory, Width, Word};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Flag {
    N,
    Z,
    C,
    V,
}

impl Flag {
    pub const ALL: [Flag; 4] = [Flag::N, Flag::Z, Flag::C, Flag::V];

    pub fn name(self) -> &'static str {
        match self {
            Flag::N => "N",
            Flag::Z => "Z",
            Flag::C => "C",
            Flag::V => "V",
        }
    }
}

/// A machine state component.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Field {
    /// General register 0..=30.
    X(u8),
    Sp,
    Pc,
    Flag(Flag),
    Mem,
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Field::X(i) => write!(f, "x{i}"),
            Field::Sp => f.write_str("sp"),
            Field::Pc => f.write_str("pc"),
            Field::Flag(fl) => f.write_str(fl.name()),
            Field::Mem => f.write_str("mem"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum MBin {
    Add,
    Sub,
    And,
    Or,
    Xor,
    Eq,
    ULt,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum MExpr {
    Const(Word),
    Field(Field),
    Not(Box<MExpr>),
    Bin(MBin, Box<MExpr>, Box<MExpr>),
    Shl(Box<MExpr>, u32),
    LShr(Box<MExpr>, u32),
    AShr(Box<MExpr>, u32),
    Ror(Box<MExpr>, u32),
    Msb(Box<MExpr>),
    /// Carry out of `a + b`.
    CarryAdd(Box<MExpr>, Box<MExpr>),
    /// Carry flag of `a - b` (no borrow).
    CarrySub(Box<MExpr>, Box<MExpr>),
    OverflowAdd(Box<MExpr>, Box<MExpr>),
    OverflowSub(Box<MExpr>, Box<MExpr>),
    /// `a` is a multiple of `2^k`.
    Aligned(Box<MExpr>, u32),
    ZeroExt(Width, Box<MExpr>),
    Trunc(Width, Box<MExpr>),
    Read(Box<MExpr>, Box<MExpr>, Width),
    Write(Box<MExpr>, Box<MExpr>, Box<MExpr>, Width),
    /// Has no BIR counterpart; exercises the translator's rejection path.
    UDiv(Box<MExpr>, Box<MExpr>),
}

fn bx(e: MExpr) -> Box<MExpr> {
    Box::new(e)
}

impl MExpr {
    pub fn x(i: u8) -> MExpr {
        MExpr::Field(Field::X(i))
    }

    pub fn c64(v: u64) -> MExpr {
        MExpr::Const(Word::new(Width::W64, v))
    }

    pub fn bool(b: bool) -> MExpr {
        MExpr::Const(Word::from_bool(b))
    }

    pub fn flag(f: Flag) -> MExpr {
        MExpr::Field(Field::Flag(f))
    }

    pub fn bin(op: MBin, a: MExpr, b: MExpr) -> MExpr {
        MExpr::Bin(op, bx(a), bx(b))
    }

    pub fn add(a: MExpr, b: MExpr) -> MExpr {
        MExpr::bin(MBin::Add, a, b)
    }

    pub fn and(a: MExpr, b: MExpr) -> MExpr {
        MExpr::bin(MBin::And, a, b)
    }

    pub fn or(a: MExpr, b: MExpr) -> MExpr {
        MExpr::bin(MBin::Or, a, b)
    }

    pub fn eq(a: MExpr, b: MExpr) -> MExpr {
        MExpr::bin(MBin::Eq, a, b)
    }

    pub fn not(a: MExpr) -> MExpr {
        MExpr::Not(bx(a))
    }

    pub fn aligned(a: MExpr, k: u32) -> MExpr {
        MExpr::Aligned(bx(a), k)
    }

    pub fn pc_plus(off: i64) -> MExpr {
        MExpr::add(MExpr::Field(Field::Pc), MExpr::c64(off as u64))
    }

    /// Static width of a word-valued expression; `None` for memories.
    pub fn width(&self) -> Option<Width> {
        Some(match self {
            MExpr::Const(w) => w.width(),
            MExpr::Field(Field::Flag(_)) => Width::W1,
            MExpr::Field(Field::Mem) | MExpr::Write(..) => return None,
            MExpr::Field(_) => Width::W64,
            MExpr::Not(a)
            | MExpr::Shl(a, _)
            | MExpr::LShr(a, _)
            | MExpr::AShr(a, _)
            | MExpr::Ror(a, _)
            | MExpr::UDiv(a, _) => return a.width(),
            MExpr::Bin(MBin::Eq | MBin::ULt, ..) => Width::W1,
            MExpr::Bin(_, a, _) => return a.width(),
            MExpr::Msb(_)
            | MExpr::CarryAdd(..)
            | MExpr::CarrySub(..)
            | MExpr::OverflowAdd(..)
            | MExpr::OverflowSub(..)
            | MExpr::Aligned(..) => Width::W1,
            MExpr::ZeroExt(w, _) | MExpr::Trunc(w, _) | MExpr::Read(_, _, w) => *w,
        })
    }

    /// Evaluates a word-valued expression in `s`.
    pub fn eval_word(&self, s: &MachState) -> Word {
        let w = |e: &MExpr| e.eval_word(s);
        match self {
            MExpr::Const(c) => *c,
            MExpr::Field(Field::X(i)) => Word::new(Width::W64, s.r[usize::from(*i)]),
            MExpr::Field(Field::Sp) => Word::new(Width::W64, s.sp),
            MExpr::Field(Field::Pc) => Word::new(Width::W64, s.pc),
            MExpr::Field(Field::Flag(f)) => Word::from_bool(s.flag(*f)),
            MExpr::Field(Field::Mem) | MExpr::Write(..) => panic!("memory used as a word"),
            MExpr::Not(a) => {
                let a = w(a);
                Word::new(a.width(), !a.bits())
            }
            MExpr::Bin(op, a, b) => {
                let (a, b) = (w(a), w(b));
                let r = |v: u64| Word::new(a.width(), v);
                match op {
                    MBin::Add => r(a.bits().wrapping_add(b.bits())),
                    MBin::Sub => r(a.bits().wrapping_sub(b.bits())),
                    MBin::And => r(a.bits() & b.bits()),
                    MBin::Or => r(a.bits() | b.bits()),
                    MBin::Xor => r(a.bits() ^ b.bits()),
                    MBin::Eq => Word::from_bool(a == b),
                    MBin::ULt => Word::from_bool(a.bits() < b.bits()),
                }
            }
            MExpr::Shl(a, k) => {
                let a = w(a);
                Word::new(a.width(), a.bits().checked_shl(*k).unwrap_or(0))
            }
            MExpr::LShr(a, k) => {
                let a = w(a);
                Word::new(a.width(), a.bits().checked_shr(*k).unwrap_or(0))
            }
            MExpr::AShr(a, k) => {
                let a = w(a);
                Word::new(a.width(), (a.signed() >> (*k).min(63)) as u64)
            }
            MExpr::Ror(a, k) => {
                let a = w(a);
                let n = a.width().bits();
                let k = k % n;
                if k == 0 {
                    a
                } else {
                    Word::new(a.width(), (a.bits() >> k) | (a.bits() << (n - k)))
                }
            }
            MExpr::Msb(a) => Word::from_bool(w(a).msb()),
            MExpr::CarryAdd(a, b) => {
                let (a, b) = (w(a), w(b));
                let sum = u128::from(a.bits()) + u128::from(b.bits());
                Word::from_bool(sum >> a.width().bits() != 0)
            }
            MExpr::CarrySub(a, b) => {
                let (a, b) = (w(a), w(b));
                // a + NOT(b) + 1 carries out exactly when a >= b.
                let n = a.width().bits();
                let sum = u128::from(a.bits()) + u128::from(!b.bits() & b.width().mask()) + 1;
                Word::from_bool(sum >> n != 0)
            }
            MExpr::OverflowAdd(a, b) => {
                let (a, b) = (w(a), w(b));
                Word::from_bool(out_of_range(i128::from(a.signed()) + i128::from(b.signed()), a.width()))
            }
            MExpr::OverflowSub(a, b) => {
                let (a, b) = (w(a), w(b));
                Word::from_bool(out_of_range(i128::from(a.signed()) - i128::from(b.signed()), a.width()))
            }
            MExpr::Aligned(a, k) => Word::from_bool(w(a).bits() % (1u64 << k) == 0),
            MExpr::ZeroExt(to, a) | MExpr::Trunc(to, a) => Word::new(*to, w(a).bits()),
            MExpr::Read(m, a, width) => {
                let m = m.eval_mem(s);
                m.load(w(a).bits(), *width).expect("readable width")
            }
            MExpr::UDiv(a, b) => {
                let (a, b) = (w(a), w(b));
                Word::new(a.width(), a.bits().checked_div(b.bits()).unwrap_or(0))
            }
        }
    }

    pub fn eval_bool(&self, s: &MachState) -> bool {
        self.eval_word(s).is_true()
    }

    /// Evaluates a memory-valued expression in `s`.
    pub fn eval_mem<'s>(&self, s: &'s MachState) -> Cow<'s, Memory> {
        match self {
            MExpr::Field(Field::Mem) => Cow::Borrowed(&s.mem),
            MExpr::Write(m, a, v, width) => {
                let mut m = m.eval_mem(s).into_owned();
                let v = Word::new(*width, v.eval_word(s).bits());
                m.store_in_place(a.eval_word(s).bits(), v).expect("writable width");
                Cow::Owned(m)
            }
            _ => panic!("word used as a memory"),
        }
    }

    /// Fields read by this expression.
    pub fn reads(&self, out: &mut alloc::collections::BTreeSet<Field>) {
        match self {
            MExpr::Const(_) => {}
            MExpr::Field(f) => {
                out.insert(*f);
            }
            MExpr::Not(a)
            | MExpr::Shl(a, _)
            | MExpr::LShr(a, _)
            | MExpr::AShr(a, _)
            | MExpr::Ror(a, _)
            | MExpr::Msb(a)
            | MExpr::Aligned(a, _)
            | MExpr::ZeroExt(_, a)
            | MExpr::Trunc(_, a) => a.reads(out),
            MExpr::Bin(_, a, b)
            | MExpr::CarryAdd(a, b)
            | MExpr::CarrySub(a, b)
            | MExpr::OverflowAdd(a, b)
            | MExpr::OverflowSub(a, b)
            | MExpr::Read(a, b, _)
            | MExpr::UDiv(a, b) => {
                a.reads(out);
                b.reads(out);
            }
            MExpr::Write(a, b, c, _) => {
                a.reads(out);
                b.reads(out);
                c.reads(out);
            }
        }
    }

    /// Address operands of memory writes inside this expression, with widths.
    pub fn written_addresses(&self) -> alloc::vec::Vec<(&MExpr, Width)> {
        let mut out = alloc::vec::Vec::new();
        let mut e = self;
        while let MExpr::Write(m, a, _, w) = e {
            out.push((&**a, *w));
            e = m;
        }
        out
    }

    /// Constant value, if this is a closed expression over constants only.
    pub fn as_const(&self) -> Option<u64> {
        let mut fields = alloc::collections::BTreeSet::new();
        self.reads(&mut fields);
        if fields.is_empty() && self.width().is_some() {
            Some(self.eval_word(&MachState::default()).bits())
        } else {
            None
        }
    }
}

fn out_of_range(v: i128, w: Width) -> bool {
    let n = w.bits();
    let lo = -(1i128 << (n - 1));
    let hi = (1i128 << (n - 1)) - 1;
    v < lo || v > hi
}

impl fmt::Display for MExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MExpr::Const(c) if c.width() == Width::W1 => write!(f, "{}", c.is_true()),
            MExpr::Const(c) => write!(f, "{:#x}", c.bits()),
            MExpr::Field(x) => write!(f, "{x}"),
            MExpr::Not(a) => write!(f, "~{a}"),
            MExpr::Bin(op, a, b) => {
                let s = match op {
                    MBin::Add => "+",
                    MBin::Sub => "-",
                    MBin::And => "&",
                    MBin::Or => "|",
                    MBin::Xor => "^",
                    MBin::Eq => "==",
                    MBin::ULt => "<u",
                };
                write!(f, "({a} {s} {b})")
            }
            MExpr::Shl(a, k) => write!(f, "({a} << {k})"),
            MExpr::LShr(a, k) => write!(f, "({a} >> {k})"),
            MExpr::AShr(a, k) => write!(f, "({a} >>s {k})"),
            MExpr::Ror(a, k) => write!(f, "ror({a}, {k})"),
            MExpr::Msb(a) => write!(f, "msb({a})"),
            MExpr::CarryAdd(a, b) => write!(f, "carry({a} + {b})"),
            MExpr::CarrySub(a, b) => write!(f, "carry({a} - {b})"),
            MExpr::OverflowAdd(a, b) => write!(f, "overflow({a} + {b})"),
            MExpr::OverflowSub(a, b) => write!(f, "overflow({a} - {b})"),
            MExpr::Aligned(a, k) => write!(f, "aligned{}({a})", 1u64 << k),
            MExpr::ZeroExt(w, a) => write!(f, "zext{w}({a})"),
            MExpr::Trunc(w, a) => write!(f, "trunc{w}({a})"),
            MExpr::Read(m, a, w) => write!(f, "read{w}({m}, {a})"),
            MExpr::Write(m, a, v, w) => write!(f, "write{w}({m}, {a}, {v})"),
            MExpr::UDiv(a, b) => write!(f, "({a} /u {b})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st() -> MachState {
        let mut s = MachState::default();
        s.r[0] = u64::MAX;
        s.r[1] = 1;
        s.r[2] = 0x8000_0000_0000_0000;
        s
    }

    #[test]
    fn carries_and_overflows() {
        let s = st();
        let b = |e: MExpr| e.eval_bool(&s);
        assert!(b(MExpr::CarryAdd(bx(MExpr::x(0)), bx(MExpr::x(1)))));
        assert!(!b(MExpr::CarryAdd(bx(MExpr::x(1)), bx(MExpr::x(1)))));
        assert!(b(MExpr::CarrySub(bx(MExpr::x(1)), bx(MExpr::x(1)))));
        assert!(!b(MExpr::CarrySub(bx(MExpr::x(1)), bx(MExpr::x(0)))));
        assert!(b(MExpr::OverflowSub(bx(MExpr::x(2)), bx(MExpr::x(1)))));
        assert!(b(MExpr::OverflowAdd(bx(MExpr::x(2)), bx(MExpr::x(2)))));
        assert!(!b(MExpr::OverflowAdd(bx(MExpr::x(0)), bx(MExpr::x(1)))));
    }

    #[test]
    fn rotate_and_shifts() {
        let s = st();
        assert_eq!(MExpr::Ror(bx(MExpr::x(1)), 1).eval_word(&s).bits(), 0x8000_0000_0000_0000);
        assert_eq!(MExpr::AShr(bx(MExpr::x(2)), 63).eval_word(&s).bits(), u64::MAX);
        assert_eq!(MExpr::LShr(bx(MExpr::x(2)), 63).eval_word(&s).bits(), 1);
    }

    #[test]
    fn write_then_read() {
        let s = st();
        let m = MExpr::Write(bx(MExpr::Field(Field::Mem)), bx(MExpr::c64(8)), bx(MExpr::x(0)), Width::W64);
        let back = MExpr::Read(bx(m.clone()), bx(MExpr::c64(12)), Width::W32);
        assert_eq!(back.eval_word(&s).bits(), 0xffff_ffff);
        assert_eq!(m.written_addresses().len(), 1);
        assert_eq!(MExpr::pc_plus(-4).as_const(), None);
        assert_eq!(MExpr::add(MExpr::c64(1), MExpr::c64(2)).as_const(), Some(3));
    }
}
