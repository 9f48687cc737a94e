use alloc::collections::BTreeMap;
use alloc::string::String;
use core::fmt;

use super::types::{AddrWidth, BType, Width};

/// A fixed-width bitvector. `bits` is always reduced modulo `2^width`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Word {
    width: Width,
    bits: u64,
}

impl Word {
    pub const TRUE: Word = Word { width: Width::W1, bits: 1 };
    pub const FALSE: Word = Word { width: Width::W1, bits: 0 };

    pub const fn new(width: Width, bits: u64) -> Word {
        Word { width, bits: bits & width.mask() }
    }

    pub const fn from_bool(b: bool) -> Word {
        if b {
            Word::TRUE
        } else {
            Word::FALSE
        }
    }

    pub const fn width(self) -> Width {
        self.width
    }

    pub const fn bits(self) -> u64 {
        self.bits
    }

    /// Two's complement interpretation.
    pub const fn signed(self) -> i64 {
        let shift = 64 - self.width.bits();
        ((self.bits << shift) as i64) >> shift
    }

    pub const fn msb(self) -> bool {
        (self.bits >> (self.width.bits() - 1)) & 1 == 1
    }

    /// True iff this is the `Reg1` value 1.
    pub fn is_true(self) -> bool {
        self == Word::TRUE
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{:#x}", self.width, self.bits)
    }
}

/// A byte-addressed memory; every address not explicitly stored reads as 0.
///
/// Zero bytes are never kept in the map, so structural equality coincides
/// with equality of the total maps.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Memory {
    addr: AddrWidth,
    bytes: BTreeMap<u64, u8>,
}

impl Memory {
    pub fn new(addr: AddrWidth) -> Memory {
        Memory { addr, bytes: BTreeMap::new() }
    }

    pub fn from_bytes(addr: AddrWidth, bytes: impl IntoIterator<Item = (u64, u8)>) -> Memory {
        let mut m = Memory::new(addr);
        for (a, b) in bytes {
            m.set_byte(a, b);
        }
        m
    }

    pub fn addr_width(&self) -> AddrWidth {
        self.addr
    }

    pub fn byte(&self, addr: u64) -> u8 {
        self.bytes.get(&(addr & self.addr.mask())).copied().unwrap_or(0)
    }

    pub fn set_byte(&mut self, addr: u64, value: u8) {
        let addr = addr & self.addr.mask();
        if value == 0 {
            self.bytes.remove(&addr);
        } else {
            self.bytes.insert(addr, value);
        }
    }

    /// Non-zero bytes in address order.
    pub fn nonzero_bytes(&self) -> impl Iterator<Item = (u64, u8)> + '_ {
        self.bytes.iter().map(|(a, b)| (*a, *b))
    }

    /// Little-endian read of `width` bytes. `W1` is not addressable.
    pub fn load(&self, addr: u64, width: Width) -> Option<Word> {
        let n = width.bytes()?;
        let mut bits = 0u64;
        for i in (0..n).rev() {
            bits = (bits << 8) | u64::from(self.byte(addr.wrapping_add(u64::from(i))));
        }
        Some(Word::new(width, bits))
    }

    /// Little-endian write, returning the updated memory.
    pub fn store(&self, addr: u64, value: Word) -> Option<Memory> {
        let mut out = self.clone();
        out.store_in_place(addr, value)?;
        Some(out)
    }

    pub fn store_in_place(&mut self, addr: u64, value: Word) -> Option<()> {
        let n = value.width().bytes()?;
        for i in 0..n {
            self.set_byte(addr.wrapping_add(u64::from(i)), (value.bits() >> (8 * i)) as u8);
        }
        Some(())
    }
}

/// A jump target: an instruction address or a named internal block.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Label {
    Addr(u64),
    Name(String),
}

impl Label {
    pub fn name(s: impl Into<String>) -> Label {
        Label::Name(s.into())
    }

    pub fn as_addr(&self) -> Option<u64> {
        match self {
            Label::Addr(a) => Some(*a),
            Label::Name(_) => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Addr(a) => write!(f, "{a:#x}"),
            Label::Name(n) => write!(f, "{n:?}"),
        }
    }
}

impl From<u64> for Label {
    fn from(a: u64) -> Label {
        Label::Addr(a)
    }
}

impl From<&str> for Label {
    fn from(s: &str) -> Label {
        Label::Name(s.into())
    }
}

/// Runtime value of a BIR expression.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum BValue {
    Word(Word),
    Mem(Memory),
    Label(Label),
}

impl BValue {
    pub fn ty(&self) -> BType {
        match self {
            BValue::Word(w) => BType::Reg(w.width()),
            BValue::Mem(m) => BType::Mem(m.addr_width()),
            BValue::Label(_) => BType::Label,
        }
    }

    pub fn word(width: Width, bits: u64) -> BValue {
        BValue::Word(Word::new(width, bits))
    }

    pub fn as_word(&self) -> Option<Word> {
        match self {
            BValue::Word(w) => Some(*w),
            _ => None,
        }
    }

    pub fn as_mem(&self) -> Option<&Memory> {
        match self {
            BValue::Mem(m) => Some(m),
            _ => None,
        }
    }

    /// Default (all-zero) value of a storable type.
    pub fn zero(ty: BType) -> Option<BValue> {
        match ty {
            BType::Reg(w) => Some(BValue::word(w, 0)),
            BType::Mem(a) => Some(BValue::Mem(Memory::new(a))),
            BType::Label => None,
        }
    }
}

impl From<Word> for BValue {
    fn from(w: Word) -> BValue {
        BValue::Word(w)
    }
}

impl From<Memory> for BValue {
    fn from(m: Memory) -> BValue {
        BValue::Mem(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn words_are_canonical() {
        let w = Word::new(Width::W8, 0x1ff);
        assert_eq!(w.bits(), 0xff);
        assert_eq!(w.signed(), -1);
        assert_eq!(Word::new(Width::W64, u64::MAX).signed(), -1);
        assert!(Word::new(Width::W1, 3).is_true());
    }

    #[test]
    fn little_endian_roundtrip() {
        let m = Memory::new(AddrWidth::A32);
        let m = m.store(0x100, Word::new(Width::W32, 0xdeadbeef)).unwrap();
        assert_eq!(m.byte(0x100), 0xef);
        assert_eq!(m.byte(0x103), 0xde);
        assert_eq!(m.load(0x100, Width::W32).unwrap().bits(), 0xdeadbeef);
        assert_eq!(m.load(0x102, Width::W16).unwrap().bits(), 0xdead);
    }

    #[test]
    fn zero_bytes_are_not_stored() {
        let a = Memory::from_bytes(AddrWidth::A64, [(1, 0), (2, 5)]);
        let b = Memory::from_bytes(AddrWidth::A64, [(2, 5)]);
        assert_eq!(a, b);
        let c = b.store(2, Word::new(Width::W8, 0)).unwrap();
        assert_eq!(c, Memory::new(AddrWidth::A64));
    }

    #[test]
    fn addresses_wrap_at_address_width() {
        let m = Memory::new(AddrWidth::A32).store(0xffff_fffe, Word::new(Width::W32, 0x44332211)).unwrap();
        assert_eq!(m.byte(0), 0x33);
        assert_eq!(m.byte(1), 0x44);
        assert_eq!(m.load(0xffff_fffe, Width::W32).unwrap().bits(), 0x44332211);
    }
}
