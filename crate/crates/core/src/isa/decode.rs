use core::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ShiftKind {
    Lsl,
    Lsr,
    Asr,
    Ror,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum LogicOp {
    And,
    Orr,
    Eor,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum MoveKind {
    /// MOVN: inverted immediate.
    Not,
    /// MOVZ.
    Zero,
    /// MOVK: replace one halfword.
    Keep,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Cond {
    Eq,
    Ne,
    Cs,
    Cc,
    Mi,
    Pl,
    Vs,
    Vc,
    Hi,
    Ls,
    Ge,
    Lt,
    Gt,
    Le,
    Al,
    Nv,
}

impl Cond {
    pub const ALL: [Cond; 16] = [
        Cond::Eq,
        Cond::Ne,
        Cond::Cs,
        Cond::Cc,
        Cond::Mi,
        Cond::Pl,
        Cond::Vs,
        Cond::Vc,
        Cond::Hi,
        Cond::Ls,
        Cond::Ge,
        Cond::Lt,
        Cond::Gt,
        Cond::Le,
        Cond::Al,
        Cond::Nv,
    ];

    pub fn from_bits(b: u32) -> Cond {
        Cond::ALL[(b & 15) as usize]
    }

    pub fn bits(self) -> u32 {
        Cond::ALL.iter().position(|&c| c == self).unwrap() as u32
    }

    /// Direct evaluation on flag values, independent of the symbolic guards.
    pub fn holds(self, n: bool, z: bool, c: bool, v: bool) -> bool {
        let base = match self {
            Cond::Eq | Cond::Ne => z,
            Cond::Cs | Cond::Cc => c,
            Cond::Mi | Cond::Pl => n,
            Cond::Vs | Cond::Vc => v,
            Cond::Hi | Cond::Ls => c && !z,
            Cond::Ge | Cond::Lt => n == v,
            Cond::Gt | Cond::Le => !z && n == v,
            Cond::Al | Cond::Nv => true,
        };
        let odd = self.bits() & 1 == 1 && !matches!(self, Cond::Nv);
        base != odd
    }

    pub fn mnemonic(self) -> &'static str {
        ["eq", "ne", "cs", "cc", "mi", "pl", "vs", "vc", "hi", "ls", "ge", "lt", "gt", "le", "al", "nv"]
            [self.bits() as usize]
    }
}

/// A decoded instruction. Register number 31 means SP or XZR according to
/// the form, as documented per variant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Instr {
    /// `rd`, `rn` of 31 are SP, except `rd` with `setflags` which is XZR.
    AddSubImm {
        rd: u8,
        rn: u8,
        imm12: u16,
        shift12: bool,
        sub: bool,
        setflags: bool,
    },
    /// Register 31 is XZR; `shift` is never `Ror`.
    AddSubReg {
        rd: u8,
        rn: u8,
        rm: u8,
        shift: ShiftKind,
        amount: u8,
        sub: bool,
        setflags: bool,
    },
    LogicReg {
        op: LogicOp,
        rd: u8,
        rn: u8,
        rm: u8,
        shift: ShiftKind,
        amount: u8,
    },
    MovWide {
        kind: MoveKind,
        rd: u8,
        imm16: u16,
        hw: u8,
    },
    /// `rn` of 31 is SP, `rt` of 31 is XZR. `offset` is in bytes.
    LdrStr {
        load: bool,
        size64: bool,
        rt: u8,
        rn: u8,
        offset: u16,
    },
    /// Byte offset from the instruction address.
    B {
        offset: i64,
    },
    BCond {
        cond: Cond,
        offset: i64,
    },
    Cbz {
        nonzero: bool,
        rt: u8,
        offset: i64,
    },
    Ret {
        rn: u8,
    },
    Nop,
}

/// The raw word of an instruction outside the supported subset.
#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
#[error("unsupported instruction {0:#010x}")]
pub struct Unsupported(pub u32);

fn bits(w: u32, hi: u32, lo: u32) -> u32 {
    (w >> lo) & ((1 << (hi - lo + 1)) - 1)
}

fn sext(v: u32, width: u32) -> i64 {
    let shift = 64 - width;
    (i64::from(v) << shift) >> shift
}

fn shift_kind(b: u32) -> ShiftKind {
    [ShiftKind::Lsl, ShiftKind::Lsr, ShiftKind::Asr, ShiftKind::Ror][b as usize]
}

pub fn decode(w: u32) -> Result<Instr, Unsupported> {
    let err = Err(Unsupported(w));
    let rd = bits(w, 4, 0) as u8;
    let rn = bits(w, 9, 5) as u8;
    let rm = bits(w, 20, 16) as u8;
    let sf = bits(w, 31, 31) == 1;

    if w == 0xD503_201F {
        return Ok(Instr::Nop);
    }
    if w & 0xFFFF_FC1F == 0xD65F_0000 {
        return Ok(Instr::Ret { rn });
    }
    if w & 0xFC00_0000 == 0x1400_0000 {
        return Ok(Instr::B { offset: sext(bits(w, 25, 0), 26) * 4 });
    }
    if w & 0xFF00_0010 == 0x5400_0000 {
        return Ok(Instr::BCond { cond: Cond::from_bits(bits(w, 3, 0)), offset: sext(bits(w, 23, 5), 19) * 4 });
    }
    if w & 0xFE00_0000 == 0xB400_0000 {
        return Ok(Instr::Cbz { nonzero: bits(w, 24, 24) == 1, rt: rd, offset: sext(bits(w, 23, 5), 19) * 4 });
    }
    if bits(w, 28, 23) == 0b100010 {
        if !sf {
            return err;
        }
        return Ok(Instr::AddSubImm {
            rd,
            rn,
            imm12: bits(w, 21, 10) as u16,
            shift12: bits(w, 22, 22) == 1,
            sub: bits(w, 30, 30) == 1,
            setflags: bits(w, 29, 29) == 1,
        });
    }
    if bits(w, 28, 24) == 0b01011 && bits(w, 21, 21) == 0 {
        let shift = shift_kind(bits(w, 23, 22));
        if !sf || shift == ShiftKind::Ror {
            return err;
        }
        return Ok(Instr::AddSubReg {
            rd,
            rn,
            rm,
            shift,
            amount: bits(w, 15, 10) as u8,
            sub: bits(w, 30, 30) == 1,
            setflags: bits(w, 29, 29) == 1,
        });
    }
    if bits(w, 28, 24) == 0b01010 && bits(w, 21, 21) == 0 {
        let op = match bits(w, 30, 29) {
            0 => LogicOp::And,
            1 => LogicOp::Orr,
            2 => LogicOp::Eor,
            _ => return err,
        };
        if !sf {
            return err;
        }
        return Ok(Instr::LogicReg {
            op,
            rd,
            rn,
            rm,
            shift: shift_kind(bits(w, 23, 22)),
            amount: bits(w, 15, 10) as u8,
        });
    }
    if bits(w, 28, 23) == 0b100101 {
        let kind = match bits(w, 30, 29) {
            0 => MoveKind::Not,
            2 => MoveKind::Zero,
            3 => MoveKind::Keep,
            _ => return err,
        };
        if !sf {
            return err;
        }
        return Ok(Instr::MovWide { kind, rd, imm16: bits(w, 20, 5) as u16, hw: bits(w, 22, 21) as u8 });
    }
    if bits(w, 29, 27) == 0b111 && bits(w, 26, 26) == 0 && bits(w, 25, 24) == 0b01 {
        let size = bits(w, 31, 30);
        let load = match bits(w, 23, 22) {
            0 => false,
            1 => true,
            _ => return err,
        };
        if size < 2 {
            return err;
        }
        return Ok(Instr::LdrStr { load, size64: size == 3, rt: rd, rn, offset: (bits(w, 21, 10) << size) as u16 });
    }
    err
}

struct X(u8, bool);

impl fmt::Display for X {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.0, self.1) {
            (31, true) => f.write_str("sp"),
            (31, false) => f.write_str("xzr"),
            (r, _) => write!(f, "x{r}"),
        }
    }
}

fn shift_suffix(f: &mut fmt::Formatter<'_>, shift: ShiftKind, amount: u8) -> fmt::Result {
    if amount == 0 && shift == ShiftKind::Lsl {
        return Ok(());
    }
    let s = match shift {
        ShiftKind::Lsl => "lsl",
        ShiftKind::Lsr => "lsr",
        ShiftKind::Asr => "asr",
        ShiftKind::Ror => "ror",
    };
    write!(f, ", {s} #{amount}")
}

fn rel(f: &mut fmt::Formatter<'_>, offset: i64) -> fmt::Result {
    if offset < 0 {
        write!(f, ".-{:#x}", -offset)
    } else {
        write!(f, ".+{offset:#x}")
    }
}

/// Assembler-style rendering.
impl fmt::Display for Instr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Instr::AddSubImm { rd, rn, imm12, shift12, sub, setflags } => {
                let m = match (sub, setflags) {
                    (false, false) => "add",
                    (false, true) => "adds",
                    (true, false) => "sub",
                    (true, true) => "subs",
                };
                write!(f, "{m} {}, {}, #{imm12:#x}", X(rd, !setflags), X(rn, true))?;
                if shift12 {
                    f.write_str(", lsl #12")?;
                }
                Ok(())
            }
            Instr::AddSubReg { rd, rn, rm, shift, amount, sub, setflags } => {
                let m = match (sub, setflags) {
                    (false, false) => "add",
                    (false, true) => "adds",
                    (true, false) => "sub",
                    (true, true) => "subs",
                };
                write!(f, "{m} {}, {}, {}", X(rd, false), X(rn, false), X(rm, false))?;
                shift_suffix(f, shift, amount)
            }
            Instr::LogicReg { op, rd, rn, rm, shift, amount } => {
                let m = match op {
                    LogicOp::And => "and",
                    LogicOp::Orr => "orr",
                    LogicOp::Eor => "eor",
                };
                write!(f, "{m} {}, {}, {}", X(rd, false), X(rn, false), X(rm, false))?;
                shift_suffix(f, shift, amount)
            }
            Instr::MovWide { kind, rd, imm16, hw } => {
                let m = match kind {
                    MoveKind::Not => "movn",
                    MoveKind::Zero => "movz",
                    MoveKind::Keep => "movk",
                };
                write!(f, "{m} {}, #{imm16:#x}", X(rd, false))?;
                if hw != 0 {
                    write!(f, ", lsl #{}", 16 * u32::from(hw))?;
                }
                Ok(())
            }
            Instr::LdrStr { load, size64, rt, rn, offset } => {
                let m = if load { "ldr" } else { "str" };
                if size64 {
                    write!(f, "{m} {}, [{}, #{offset}]", X(rt, false), X(rn, true))
                } else if rt == 31 {
                    write!(f, "{m} wzr, [{}, #{offset}]", X(rn, true))
                } else {
                    write!(f, "{m} w{rt}, [{}, #{offset}]", X(rn, true))
                }
            }
            Instr::B { offset } => {
                f.write_str("b ")?;
                rel(f, offset)
            }
            Instr::BCond { cond, offset } => {
                write!(f, "b.{} ", cond.mnemonic())?;
                rel(f, offset)
            }
            Instr::Cbz { nonzero, rt, offset } => {
                write!(f, "{} {}, ", if nonzero { "cbnz" } else { "cbz" }, X(rt, false))?;
                rel(f, offset)
            }
            Instr::Ret { rn: 30 } => f.write_str("ret"),
            Instr::Ret { rn } => write!(f, "ret {}", X(rn, false)),
            Instr::Nop => f.write_str("nop"),
        }
    }
}
