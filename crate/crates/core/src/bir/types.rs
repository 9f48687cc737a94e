use core::fmt;

/// Bit width of a BIR word.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Width {
    W1,
    W8,
    W16,
    W32,
    W64,
}

impl Width {
    pub const ALL: [Width; 5] = [Width::W1, Width::W8, Width::W16, Width::W32, Width::W64];

    pub fn from_bits(bits: u32) -> Option<Width> {
        match bits {
            1 => Some(Width::W1),
            8 => Some(Width::W8),
            16 => Some(Width::W16),
            32 => Some(Width::W32),
            64 => Some(Width::W64),
            _ => None,
        }
    }

    pub const fn bits(self) -> u32 {
        match self {
            Width::W1 => 1,
            Width::W8 => 8,
            Width::W16 => 16,
            Width::W32 => 32,
            Width::W64 => 64,
        }
    }

    pub const fn mask(self) -> u64 {
        match self {
            Width::W64 => u64::MAX,
            w => (1u64 << w.bits()) - 1,
        }
    }

    /// Number of bytes moved by a load or store of this width; `None` for `W1`.
    pub const fn bytes(self) -> Option<u32> {
        match self {
            Width::W1 => None,
            w => Some(w.bits() / 8),
        }
    }
}

impl fmt::Display for Width {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.bits())
    }
}

/// Address width of a BIR memory.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum AddrWidth {
    A32,
    A64,
}

impl AddrWidth {
    pub fn from_bits(bits: u32) -> Option<AddrWidth> {
        match bits {
            32 => Some(AddrWidth::A32),
            64 => Some(AddrWidth::A64),
            _ => None,
        }
    }

    pub const fn bits(self) -> u32 {
        match self {
            AddrWidth::A32 => 32,
            AddrWidth::A64 => 64,
        }
    }

    pub const fn word(self) -> Width {
        match self {
            AddrWidth::A32 => Width::W32,
            AddrWidth::A64 => Width::W64,
        }
    }

    pub const fn mask(self) -> u64 {
        self.word().mask()
    }
}

/// Static type of a BIR expression.
///
/// `Label` is the type of string-label constants; it is only usable as a
/// jump target (and through `ite`), never in arithmetic or comparisons.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum BType {
    Reg(Width),
    Mem(AddrWidth),
    Label,
}

impl BType {
    pub const BOOL: BType = BType::Reg(Width::W1);

    pub fn reg(bits: u32) -> Option<BType> {
        Width::from_bits(bits).map(BType::Reg)
    }

    pub fn mem(addr_bits: u32) -> Option<BType> {
        AddrWidth::from_bits(addr_bits).map(BType::Mem)
    }
}

impl fmt::Display for BType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BType::Reg(w) => write!(f, "(reg {w})"),
            BType::Mem(a) => write!(f, "(mem {})", a.bits()),
            BType::Label => f.write_str("label"),
        }
    }
}
