//! Reference model of the supported ARMv8 A64 subset.

pub mod decode;
pub mod mexpr;
pub mod step;

use alloc::vec::Vec;

use crate::bir::{AddrWidth, Memory, Width, Word};

pub use decode::{decode, Cond, Instr, LogicOp, MoveKind, ShiftKind, Unsupported};
pub use mexpr::{Field, Flag, MBin, MExpr};
pub use step::{mach_step, step_cases, GuardedEffect, Stuck};

/// Machine state: 31 general registers, SP, PC, NZCV and byte memory.
/// `r[30]` doubles as the link register.
#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MachState {
    pub r: [u64; 31],
    pub sp: u64,
    pub pc: u64,
    pub n: bool,
    pub z: bool,
    pub c: bool,
    pub v: bool,
    pub mem: Memory,
}

impl Default for MachState {
    fn default() -> MachState {
        MachState { r: [0; 31], sp: 0, pc: 0, n: false, z: false, c: false, v: false, mem: Memory::new(AddrWidth::A64) }
    }
}

impl MachState {
    pub fn flag(&self, f: Flag) -> bool {
        match f {
            Flag::N => self.n,
            Flag::Z => self.z,
            Flag::C => self.c,
            Flag::V => self.v,
        }
    }

    pub fn set_flag(&mut self, f: Flag, b: bool) {
        match f {
            Flag::N => self.n = b,
            Flag::Z => self.z = b,
            Flag::C => self.c = b,
            Flag::V => self.v = b,
        }
    }

    /// Sets NZCV from the low four bits of `nzcv` (N is bit 3).
    pub fn set_nzcv(&mut self, nzcv: u8) {
        self.n = nzcv & 8 != 0;
        self.z = nzcv & 4 != 0;
        self.c = nzcv & 2 != 0;
        self.v = nzcv & 1 != 0;
    }

    pub fn fetch(&self, addr: u64) -> u32 {
        self.mem.load(addr, Width::W32).map_or(0, |w| w.bits() as u32)
    }

    /// Writes instruction words little-endian at their addresses.
    pub fn install(&mut self, words: &[(u64, u32)]) {
        for &(a, w) in words {
            self.mem.store_in_place(a, Word::new(Width::W32, u64::from(w)));
        }
    }

    pub fn with_program(words: &[(u64, u32)], pc: u64) -> MachState {
        let mut s = MachState { pc, ..MachState::default() };
        s.install(words);
        s
    }
}

/// Decodes a flat little-endian image into `(address, word)` pairs.
/// Trailing bytes that do not fill a word are ignored.
pub fn words_from_bytes(bytes: &[u8], base: u64) -> Vec<(u64, u32)> {
    bytes
        .chunks_exact(4)
        .enumerate()
        .map(|(i, c)| (base.wrapping_add(4 * i as u64), u32::from_le_bytes([c[0], c[1], c[2], c[3]])))
        .collect()
}
