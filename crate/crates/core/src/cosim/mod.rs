//! Translation validation by co-simulation of the reference interpreter and
//! the lifted program. Passing is bounded evidence, not a proof.

pub mod mutation;

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bir::{BValue, Env, Label, Width, Word};
use crate::isa::{mach_step, Field, Flag, Instr, MachState, Stuck};
use crate::lifter::{var_name, LiftedProgram, MEM, SP};
use crate::sem::{run_to_next, Pc, State};

/// Block budget for running one instruction's fragment.
pub const FRAGMENT_FUEL: u64 = 64;

/// BIR state related to `s`: every mapped field copied, pc as an address label.
pub fn make_related(s: &MachState) -> State {
    let mut env = Env::new();
    for i in 0..31u8 {
        env.insert(var_name(Field::X(i)).unwrap(), Word::new(Width::W64, s.r[usize::from(i)]));
    }
    env.insert(SP, Word::new(Width::W64, s.sp));
    for f in Flag::ALL {
        env.insert(f.name(), Word::from_bool(s.flag(f)));
    }
    env.insert(MEM, s.mem.clone());
    State { env, pc: Pc::Label(Label::Addr(s.pc)) }
}

/// Inverse of [`make_related`]; `None` if a mapped variable is missing or
/// mistyped, or the pc is not an address.
pub fn mach_of(bs: &State) -> Option<MachState> {
    let word = |n: &str, w: Width| bs.env.get(n).and_then(BValue::as_word).filter(|x| x.width() == w);
    let mut s = MachState::default();
    for i in 0..31 {
        s.r[i] = word(&format!("R{i}"), Width::W64)?.bits();
    }
    s.sp = word(SP, Width::W64)?.bits();
    for f in Flag::ALL {
        s.set_flag(f, word(f.name(), Width::W1)?.is_true());
    }
    s.mem = bs.env.get(MEM)?.as_mem()?.clone();
    if s.mem.addr_width() != crate::bir::AddrWidth::A64 {
        return None;
    }
    s.pc = bs.pc.label()?.as_addr()?;
    Some(s)
}

/// First field where `bs` and `s` disagree, if any.
pub fn relation_mismatch(bs: &State, s: &MachState) -> Option<String> {
    let Some(t) = mach_of(bs) else {
        return Some(format!("BIR state at {} is not a machine state", bs.pc));
    };
    if t.pc != s.pc {
        return Some(format!("pc: bir={:#x} mach={:#x}", t.pc, s.pc));
    }
    for i in 0..31 {
        if t.r[i] != s.r[i] {
            return Some(format!("R{i}: bir={:#x} mach={:#x}", t.r[i], s.r[i]));
        }
    }
    if t.sp != s.sp {
        return Some(format!("SP: bir={:#x} mach={:#x}", t.sp, s.sp));
    }
    for f in Flag::ALL {
        if t.flag(f) != s.flag(f) {
            return Some(format!("{}: bir={} mach={}", f.name(), t.flag(f), s.flag(f)));
        }
    }
    if t.mem != s.mem {
        let diff = t
            .mem
            .nonzero_bytes()
            .chain(s.mem.nonzero_bytes())
            .map(|(a, _)| a)
            .find(|&a| t.mem.byte(a) != s.mem.byte(a))
            .unwrap_or(0);
        return Some(format!("MEM[{diff:#x}]: bir={:#x} mach={:#x}", t.mem.byte(diff), s.mem.byte(diff)));
    }
    None
}

/// Why a BIR failure was accepted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Acceptable {
    /// The machine step is undecodable or unpredictable.
    Stuck,
    /// The machine wrote into the protected region.
    SelfModification,
    /// An indirect jump left the known label set (BIR-first runs only).
    UnknownTarget,
}

#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Verdict {
    Related,
    Accepted(Acceptable),
    Mismatch(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Counterexample {
    pub trial: u64,
    pub state: MachState,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct InstrReport {
    pub addr: u64,
    pub word: u32,
    pub text: String,
    pub trials: u64,
    pub related: u64,
    pub accepted_stuck: u64,
    pub accepted_self_modification: u64,
    pub mismatches: u64,
    /// Trials in which each guarded case was the one taken.
    pub case_hits: Vec<u64>,
    /// The first few counterexamples, verbatim.
    pub counterexamples: Vec<Counterexample>,
}

impl InstrReport {
    pub fn passed(&self) -> bool {
        self.mismatches == 0
    }

    fn record(&mut self, trial: u64, state: &MachState, v: Verdict) {
        self.trials += 1;
        match v {
            Verdict::Related => self.related += 1,
            Verdict::Accepted(Acceptable::Stuck) => self.accepted_stuck += 1,
            Verdict::Accepted(_) => self.accepted_self_modification += 1,
            Verdict::Mismatch(reason) => {
                self.mismatches += 1;
                if self.counterexamples.len() < MAX_COUNTEREXAMPLES {
                    self.counterexamples.push(Counterexample { trial, state: state.clone(), reason });
                }
            }
        }
    }

    /// Combines reports of disjoint trial ranges of the same instruction.
    pub fn merge(&mut self, other: InstrReport) {
        self.trials += other.trials;
        self.related += other.related;
        self.accepted_stuck += other.accepted_stuck;
        self.accepted_self_modification += other.accepted_self_modification;
        self.mismatches += other.mismatches;
        if self.case_hits.len() < other.case_hits.len() {
            self.case_hits.resize(other.case_hits.len(), 0);
        }
        for (a, b) in self.case_hits.iter_mut().zip(other.case_hits) {
            *a += b;
        }
        for c in other.counterexamples {
            if self.counterexamples.len() < MAX_COUNTEREXAMPLES {
                self.counterexamples.push(c);
            }
        }
    }
}

const MAX_COUNTEREXAMPLES: usize = 5;

/// Per-trial generator, reproducible from `(seed, trial)`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

fn special(rng: &mut ChaCha8Rng) -> u64 {
    match rng.gen_range(0..12) {
        0 => 0,
        1 => 1,
        2 => u64::MAX,
        3 => 1 << 63,
        4 => (1 << 63) - 1,
        5 => u64::from(rng.gen::<u8>()),
        6 => u64::from(rng.gen::<u32>()),
        7 => u64::MAX - u64::from(rng.gen::<u8>()),
        8 => (1 << 63) + u64::from(rng.gen::<u8>()) - 128,
        _ => rng.gen(),
    }
}

/// A target address for an `n`-byte access, mixing alignment and region
/// edge cases.
fn pick_address(rng: &mut ChaCha8Rng, lp: &LiftedProgram, n: u64, trial: u64) -> u64 {
    let (lo, hi) = lp.memr.intervals()[rng.gen_range(0..lp.memr.intervals().len())];
    let jitter = |rng: &mut ChaCha8Rng| rng.gen_range(0..2 * n);
    match trial % 8 {
        0 | 1 => rng.gen::<u64>() & !(n - 1),
        2 => (rng.gen::<u64>() & !(n - 1)) + rng.gen_range(1..n),
        3 => lo.wrapping_sub(n).wrapping_add(jitter(rng)),
        4 => hi.wrapping_sub(n).wrapping_add(jitter(rng)),
        5 => u64::MAX - jitter(rng),
        6 => (lo & !(n - 1)).wrapping_sub(n * rng.gen_range(0..2)),
        _ => (hi + 1).wrapping_add(n - 1) & !(n - 1),
    }
}

fn scatter_bytes(rng: &mut ChaCha8Rng, s: &mut MachState, around: u64) {
    for i in 0..24u64 {
        if rng.gen_bool(0.7) {
            s.mem.set_byte(around.wrapping_sub(8).wrapping_add(i), rng.gen());
        }
    }
}

/// A guard-targeted random state for the instruction at `at`.
pub fn generate_state(lp: &LiftedProgram, at: u64, seed: u64, trial: u64) -> MachState {
    let mut rng = trial_rng(seed, trial);
    let mut s = MachState { pc: at, ..MachState::default() };
    for r in s.r.iter_mut() {
        *r = special(&mut rng);
    }
    s.sp = if rng.gen_bool(0.5) { rng.gen::<u64>() & !15 } else { special(&mut rng) };
    s.set_nzcv((trial % 16) as u8);
    let instr = lp.instr_at(at).and_then(|i| i.instr);
    match instr {
        Some(Instr::LdrStr { size64, rt, rn, offset, .. }) => {
            let n = if size64 { 8 } else { 4 };
            let addr = pick_address(&mut rng, lp, n, trial / 16 + trial);
            let base = addr.wrapping_sub(u64::from(offset));
            if rn == 31 {
                s.sp = base;
            } else {
                s.r[usize::from(rn)] = base;
            }
            if rt != 31 && rt != rn && rng.gen_bool(0.5) {
                s.r[usize::from(rt)] = rng.gen();
            }
            scatter_bytes(&mut rng, &mut s, addr);
        }
        Some(Instr::Ret { rn }) if rn != 31 => {
            let target = match trial % 4 {
                0 => lp.source[rng.gen_range(0..lp.source.len())].0,
                1 => rng.gen::<u64>() & !3,
                _ => rng.gen::<u64>(),
            };
            s.r[usize::from(rn)] = target;
        }
        Some(Instr::Cbz { rt, .. }) if rt != 31 && trial.is_multiple_of(2) => s.r[usize::from(rt)] = 0,
        _ => {}
    }
    s.install(&lp.source);
    s
}

/// True if the case taken in `s` writes a byte of the protected region.
fn writes_memr(lp: &LiftedProgram, at: u64, s: &MachState) -> bool {
    let Some(li) = lp.instr_at(at) else {
        return false;
    };
    let Some(case) = li.cases.iter().find(|c| c.guard.eval_bool(s)) else {
        return false;
    };
    case.update(Field::Mem).is_some_and(|m| {
        m.written_addresses()
            .into_iter()
            .any(|(a, w)| lp.memr.touches(a.eval_word(s).bits(), u64::from(w.bytes().unwrap_or(1))))
    })
}

fn memr_unchanged(lp: &LiftedProgram, before: &MachState, after: &State) -> bool {
    let Some(mem) = after.env.get(MEM).and_then(BValue::as_mem) else {
        return false;
    };
    lp.memr.intervals().iter().all(|&(lo, hi)| (lo..=hi).all(|a| mem.byte(a) == before.mem.byte(a)))
}

/// Compares one machine step from `s` with the lifted fragment at `s.pc`.
pub fn check_step(lp: &LiftedProgram, s: &MachState) -> (Verdict, Result<MachState, Stuck>) {
    let at = s.pc;
    let mach = mach_step(s);
    let mut ls = lp.stop_labels();
    if let Ok(t) = &mach {
        ls.insert(Label::Addr(t.pc));
    }
    let bir = run_to_next(&lp.program, make_related(s), &ls, FRAGMENT_FUEL);
    let verdict = match (&mach, bir) {
        (_, Err(_)) => Verdict::Mismatch("BIR fragment diverged".into()),
        (_, Ok(State { pc: Pc::TypeError, .. })) => Verdict::Mismatch("BIR type error".into()),
        (Err(_), Ok(State { pc: Pc::Failed, .. })) => Verdict::Accepted(Acceptable::Stuck),
        (Err(e), Ok(bs)) => Verdict::Mismatch(format!("machine {e} but BIR reached {}", bs.pc)),
        (Ok(_), Ok(bs)) if writes_memr(lp, at, s) => match bs.pc {
            Pc::Failed => Verdict::Accepted(Acceptable::SelfModification),
            pc => Verdict::Mismatch(format!("machine wrote the protected region but BIR reached {pc}")),
        },
        (Ok(_), Ok(State { pc: Pc::Failed, .. })) => Verdict::Mismatch("BIR failed on a valid step".into()),
        (Ok(t), Ok(bs)) => match relation_mismatch(&bs, t) {
            Some(r) => Verdict::Mismatch(r),
            None if !memr_unchanged(lp, s, &bs) => Verdict::Mismatch("protected region modified".into()),
            None => Verdict::Related,
        },
    };
    (verdict, mach)
}

fn case_taken(lp: &LiftedProgram, at: u64, s: &MachState) -> Option<usize> {
    lp.instr_at(at)?.cases.iter().position(|c| c.guard.eval_bool(s))
}

/// Runs trials `range` of [`check_instruction`].
pub fn check_instruction_range(lp: &LiftedProgram, at: u64, seed: u64, range: core::ops::Range<u64>) -> InstrReport {
    let li = lp.instr_at(at);
    let mut report = InstrReport {
        addr: at,
        word: li.map_or(0, |i| i.word),
        text: li.and_then(|i| i.instr).map_or_else(|| "<unsupported>".into(), |i| i.to_string()),
        case_hits: alloc::vec![0; li.map_or(0, |i| i.cases.len())],
        ..InstrReport::default()
    };
    for trial in range {
        let s = generate_state(lp, at, seed, trial);
        if let Some(j) = case_taken(lp, at, &s) {
            report.case_hits[j] += 1;
        }
        let (v, _) = check_step(lp, &s);
        report.record(trial, &s, v);
    }
    report
}

/// Validates the fragment of the instruction at `at` on `trials` states.
pub fn check_instruction(lp: &LiftedProgram, at: u64, trials: u64, seed: u64) -> InstrReport {
    check_instruction_range(lp, at, seed, 0..trials)
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProgramReport {
    pub trials: u64,
    pub steps_checked: u64,
    pub bir_first_steps: u64,
    pub accepted_stuck: u64,
    pub accepted_self_modification: u64,
    pub accepted_unknown_target: u64,
    /// Trials that left the program before the step budget.
    pub exited: u64,
    pub mismatches: u64,
    pub counterexamples: Vec<Counterexample>,
}

impl ProgramReport {
    pub fn passed(&self) -> bool {
        self.mismatches == 0
    }

    fn mismatch(&mut self, trial: u64, s: &MachState, reason: String) {
        self.mismatches += 1;
        if self.counterexamples.len() < MAX_COUNTEREXAMPLES {
            self.counterexamples.push(Counterexample { trial, state: s.clone(), reason });
        }
    }
}

/// Random initial state at the program entry.
pub fn generate_program_state(lp: &LiftedProgram, seed: u64, trial: u64) -> MachState {
    let mut rng = trial_rng(seed, trial);
    let mut s = MachState { pc: lp.entry, ..MachState::default() };
    for r in s.r.iter_mut() {
        *r = if rng.gen_bool(0.3) { special(&mut rng) } else { u64::from(rng.gen::<u16>()) };
    }
    s.sp = if rng.gen_bool(0.8) { 0x7fff_0000 + (u64::from(rng.gen::<u16>()) & !15) } else { special(&mut rng) };
    s.set_nzcv(rng.gen_range(0..16));
    let sp = s.sp;
    scatter_bytes(&mut rng, &mut s, sp);
    s.install(&lp.source);
    s
}

/// Lockstep co-simulation for up to `steps` instructions, in both
/// directions: machine first (checking every step), then BIR first
/// (replaying the machine from the inverse of each BIR state).
pub fn check_program(lp: &LiftedProgram, steps: u64, trials: u64, seed: u64) -> ProgramReport {
    let mut report = ProgramReport::default();
    let ls = lp.stop_labels();
    for trial in 0..trials {
        report.trials += 1;
        let start = generate_program_state(lp, seed, trial);

        // Machine first.
        let mut s = start.clone();
        for _ in 0..steps {
            if !lp.entry_labels.contains(&Label::Addr(s.pc)) {
                report.exited += 1;
                break;
            }
            let (v, next) = check_step(lp, &s);
            report.steps_checked += 1;
            match (v, next) {
                (Verdict::Related, Ok(t)) => s = t,
                (Verdict::Accepted(Acceptable::Stuck), _) => {
                    report.accepted_stuck += 1;
                    break;
                }
                (Verdict::Accepted(_), _) => {
                    report.accepted_self_modification += 1;
                    break;
                }
                (Verdict::Mismatch(r), _) => {
                    report.mismatch(trial, &s, r);
                    break;
                }
                (Verdict::Related, Err(_)) => break,
            }
        }

        // BIR first.
        let mut bs = make_related(&start);
        for _ in 0..steps {
            let Some(at) = bs.pc.label().and_then(Label::as_addr) else { break };
            if !lp.entry_labels.contains(&Label::Addr(at)) {
                break;
            }
            let Some(m) = mach_of(&bs) else {
                report.mismatch(trial, &start, "BIR state has no machine counterpart".into());
                break;
            };
            let next_bs = match run_to_next(&lp.program, bs.clone(), &ls, FRAGMENT_FUEL) {
                Ok(n) => n,
                Err(_) => {
                    report.mismatch(trial, &m, "BIR fragment diverged".into());
                    break;
                }
            };
            report.bir_first_steps += 1;
            let mach = mach_step(&m);
            match (&next_bs.pc, mach) {
                (Pc::TypeError, _) => {
                    report.mismatch(trial, &m, "BIR type error".into());
                    break;
                }
                (Pc::Failed, Err(_)) => {
                    report.accepted_stuck += 1;
                    break;
                }
                (Pc::Failed, Ok(t)) => {
                    if writes_memr(lp, at, &m) {
                        report.accepted_self_modification += 1;
                    } else if !ls.contains(&Label::Addr(t.pc)) {
                        report.accepted_unknown_target += 1;
                    } else {
                        report.mismatch(trial, &m, "BIR failed on a valid step".into());
                    }
                    break;
                }
                (Pc::Label(_), Err(e)) => {
                    report.mismatch(trial, &m, format!("BIR continued but machine {e}"));
                    break;
                }
                (Pc::Label(_), Ok(t)) => {
                    if let Some(r) = relation_mismatch(&next_bs, &t) {
                        report.mismatch(trial, &m, r);
                        break;
                    }
                    if writes_memr(lp, at, &m) {
                        report.mismatch(trial, &m, "machine wrote the protected region but BIR continued".into());
                        break;
                    }
                    bs = strip_temporaries(next_bs);
                }
            }
        }
    }
    report
}

/// Drops BIR-only variables so that the next step starts from a related state.
fn strip_temporaries(bs: State) -> State {
    let env =
        bs.env.iter().filter(|(k, _)| !k.starts_with("tmp_")).map(|(k, v)| (String::from(k), v.clone())).collect();
    State { env, pc: bs.pc }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lifter::lift_program;

    fn three() -> LiftedProgram {
        let words = [(0x1000_0004, 0x8b00_0020), (0x1000_0008, 0x54ff_fe8c), (0x1000_000c, 0xf900_07e0)];
        lift_program(&words, 0x1000_0004).unwrap()
    }

    #[test]
    fn related_roundtrip() {
        let mut s = MachState::default();
        s.r[0] = 5;
        s.n = true;
        s.pc = 0x1000_000c;
        let bs = make_related(&s);
        assert_eq!(bs.env.get("R0"), Some(&BValue::word(Width::W64, 5)));
        assert_eq!(bs.env.get("N"), Some(&BValue::Word(Word::TRUE)));
        assert_eq!(bs.env.get("V"), Some(&BValue::Word(Word::FALSE)));
        assert_eq!(bs.pc, Pc::Label(Label::Addr(0x1000_000c)));
        assert_eq!(mach_of(&bs), Some(s.clone()));
        assert_eq!(relation_mismatch(&bs, &s), None);
    }

    #[test]
    fn worked_instructions_validate() {
        let lp = three();
        for at in [0x1000_0004, 0x1000_0008, 0x1000_000c] {
            let r = check_instruction(&lp, at, 1000, 7);
            assert!(r.passed(), "{:?}", r.counterexamples);
            assert!(r.case_hits.iter().all(|&h| h > 0), "{at:#x} {:?}", r.case_hits);
        }
        let r = check_instruction(&lp, 0x1000_000c, 1000, 7);
        assert!(r.accepted_stuck > 0 && r.accepted_self_modification > 0 && r.related > 0);
    }

    #[test]
    fn lockstep_program() {
        let r = check_program(&three(), 3, 200, 1);
        assert!(r.passed(), "{:?}", r.counterexamples);
        assert!(r.steps_checked > 200);
    }

    #[test]
    fn self_modifying_store_is_accepted_by_failure() {
        // movz x1, #0x1000 ; str x0, [x1, #8] writes over its own code
        let words = [(0x1000, 0xd282_0001), (0x1004, 0xf900_0420), (0x1008, 0xd503_201f)];
        let lp = lift_program(&words, 0x1000).unwrap();
        let r = check_program(&lp, 3, 5, 0);
        assert!(r.passed(), "{:?}", r.counterexamples);
        assert_eq!(r.accepted_self_modification, 10);
    }
}
