//! Acceptance suite. Prints one `ACCEPT <n> PASS|FAIL|SKIP` line per
//! criterion and exits non-zero if any criterion fails.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use birlift::pipeline::{verify, VerifyOptions};
use birlift::report::Exit;
use birlift::solver::{prove_implication, Proof, Solver};
use birlift::text::{parse_contract, parse_program};
use birlift_core::bir::expr::{add, eq, mul, not, subst, tt, ult, var, word};
use birlift_core::bir::{eval_bool, expand_substs, AddrWidth, BType, BValue, Env, Label, Memory, Width, Word};
use birlift_core::cosim::{check_instruction, mutation};
use birlift_core::fuzz::{random_goal, random_loop_free, random_program, random_solver_case, SOLVER_MEMORY_BYTES};
use birlift_core::isa::words_from_bytes;
use birlift_core::lifter::lift_program;
use birlift_core::sem::{weak_exec, Pc, State};
use birlift_core::simplify::{equisatisfiable_oracle, simplify, TautologyGoal};
use birlift_core::typecheck::{check_env, check_program_with};
use birlift_core::wp::{check_triple_exhaustive, wp_fragment, EnvDomain, PredMap};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 0x5eed;

const BUDGET_SEMANTICS: Duration = Duration::from_secs(1);
const BUDGET_SOUNDNESS: Duration = Duration::from_secs(120);
const BUDGET_LIFTER: Duration = Duration::from_secs(300);
const BUDGET_CARRY: Duration = Duration::from_secs(10);
const BUDGET_WP: Duration = Duration::from_secs(300);
const BUDGET_SIMPLIFIER: Duration = Duration::from_secs(180);
const BUDGET_VERIFY: Duration = Duration::from_secs(60);

const SOUNDNESS_PROGRAMS: usize = 10_000;
const SOUNDNESS_MAX_BLOCKS: usize = 8;
const SOUNDNESS_FUEL: u64 = 10_000;
const LIFTER_TRIALS: u64 = 10_000;
const MUTANTS: usize = 50;
const MUTANT_TRIALS: u64 = 2_000;
const MIN_KILL_RATE: f64 = 0.95;
const CARRY_RANDOM_PAIRS: usize = 1_000_000;
const WP_PROGRAMS: usize = 1_000;
const WP_MAX_BLOCKS: usize = 6;
const WP_FUEL: u64 = 64;
const CHAIN_LENGTHS: [usize; 4] = [5, 10, 15, 20];
const CHAIN_NODES_PER_LINK: u128 = 50;
/// Least-squares slope of log2(expanded occurrences) against N.
const MIN_EXPANSION_SLOPE: f64 = 0.95;
/// Coefficient of determination of simplified size against N.
const MIN_LINEAR_FIT: f64 = 0.99;
const SIMPLIFIER_GOALS: usize = 1_000;
const SIMPLIFIER_MAX_SUBST: usize = 4;
const SOLVER_CASES: usize = 500;
const SOLVER_TIMEOUT: Duration = Duration::from_secs(30);
const VERIFY_TRIALS: u64 = 1_000;

type Criterion = (u32, &'static str, Option<Duration>, fn() -> Outcome);

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn read_fixture(name: &str) -> String {
    std::fs::read_to_string(fixture(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn pass_if(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

/// Pop then push through a 32-bit stack: exhaustive over 256 R1 values with fixed SP and
/// memory. The expected final state is built byte by byte.
fn semantics_oracle() -> Outcome {
    let pf = parse_program(&read_fixture("pop_push.bir")).expect("pop_push.bir parses");
    let sp = 0x100u64;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut mem = Memory::new(AddrWidth::A32);
    for a in 0xf0..0x118 {
        mem.set_byte(a, rng.gen());
    }
    let popped = u64::from_le_bytes([mem.byte(sp), mem.byte(sp + 1), mem.byte(sp + 2), mem.byte(sp + 3), 0, 0, 0, 0]);
    let mut expected_mem = mem.clone();
    for i in 0..4 {
        expected_mem.set_byte(sp + 4 + i, mem.byte(sp + i));
    }
    let stop: BTreeSet<Label> = [Label::Addr(0x400008)].into_iter().collect();
    let mut bad = Vec::new();
    for r1 in 0..256u64 {
        let env = Env::new()
            .with("R1", Word::new(Width::W32, r1))
            .with("SP", Word::new(Width::W32, sp))
            .with("MEM", mem.clone());
        let end = weak_exec(&pf.program, State::new(env, Label::Addr(0x400000)), &stop, 8);
        let ok = match &end {
            Ok(s) => {
                s.pc == Pc::Label(Label::Addr(0x400008))
                    && s.env.get("SP") == Some(&BValue::word(Width::W32, sp))
                    && s.env.get("R1") == Some(&BValue::word(Width::W32, popped))
                    && s.env.get("MEM") == Some(&BValue::Mem(expected_mem.clone()))
            }
            Err(_) => false,
        };
        if !ok {
            bad.push(r1);
        }
    }
    pass_if(bad.is_empty(), format!("256 R1 values, {} mismatches {:?}", bad.len(), &bad[..bad.len().min(4)]))
}

fn type_soundness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (mut failed, mut diverged, mut type_errors, mut rejected) = (0, 0, 0, 0);
    for _ in 0..SOUNDNESS_PROGRAMS {
        let rp = random_program(&mut rng, SOUNDNESS_MAX_BLOCKS);
        let Ok(ctx) = check_program_with(&rp.program, &rp.typing) else {
            rejected += 1;
            continue;
        };
        if !check_env(&rp.env, &ctx) {
            rejected += 1;
            continue;
        }
        match weak_exec(&rp.program, State::new(rp.env, rp.entry), &BTreeSet::new(), SOUNDNESS_FUEL) {
            Ok(s) if s.pc == Pc::TypeError => type_errors += 1,
            Ok(s) if s.pc == Pc::Failed => failed += 1,
            Ok(_) => {}
            Err(_) => diverged += 1,
        }
    }
    pass_if(
        type_errors == 0 && rejected == 0,
        format!(
            "{SOUNDNESS_PROGRAMS} programs, {type_errors} type errors, {rejected} rejected, {failed} failed, {diverged} out of fuel"
        ),
    )
}

/// The supported instruction forms, one encoding each.
fn forms() -> Vec<u32> {
    read_fixture("forms.s")
        .lines()
        .filter_map(|l| l.split_whitespace().next())
        .filter_map(|w| w.strip_prefix("0x"))
        .map(|w| u32::from_str_radix(w, 16).expect("hex encoding"))
        .collect()
}

fn forms_program() -> birlift_core::lifter::LiftedProgram {
    let words: Vec<(u64, u32)> = forms().into_iter().enumerate().map(|(i, w)| (0x1000 + 4 * i as u64, w)).collect();
    lift_program(&words, 0x1000).expect("every form lifts")
}

fn lifter_validation() -> Outcome {
    let fs = forms();
    let required = [0x8b00_0020, 0x54ff_fe8c, 0xf900_07e0];
    if let Some(w) = required.iter().find(|w| !fs.contains(w)) {
        return Outcome::Fail(format!("encoding {w:#010x} missing from forms.s"));
    }
    let lp = forms_program();
    let (mut mismatches, mut accepted, mut unhit) = (0, 0, Vec::new());
    for (i, w) in fs.iter().enumerate() {
        let at = 0x1000 + 4 * i as u64;
        let r = check_instruction(&lp, at, LIFTER_TRIALS, SEED);
        mismatches += r.mismatches;
        accepted += r.accepted_stuck + r.accepted_self_modification;
        if r.mismatches > 0 {
            eprintln!("  {w:#010x} {}: {:?}", r.text, r.counterexamples.first().map(|c| &c.reason));
        }
        if r.case_hits.contains(&0) {
            unhit.push(format!("{w:#010x} {:?}", r.case_hits));
        }
    }
    pass_if(
        mismatches == 0 && unhit.is_empty(),
        format!(
            "{} forms x {LIFTER_TRIALS} trials, {mismatches} mismatches, {accepted} accepted by failure, unexercised cases {unhit:?}",
            fs.len()
        ),
    )
}

fn mutation_resistance() -> Outcome {
    let lp = forms_program();
    let chosen = mutation::select(&lp, MUTANTS, SEED);
    if chosen.len() < MUTANTS {
        return Outcome::Fail(format!("only {} mutation sites", chosen.len()));
    }
    let mut survivors = Vec::new();
    for m in &chosen {
        let Some(mlp) = mutation::apply(&lp, m) else {
            survivors.push(format!("{m:?} (not applicable)"));
            continue;
        };
        if check_instruction(&mlp, m.addr, MUTANT_TRIALS, SEED).passed() {
            survivors.push(format!("{:#x}/{:?}/{}", m.addr, m.kind, m.site));
        }
    }
    let killed = chosen.len() - survivors.len();
    let rate = killed as f64 / chosen.len() as f64;
    pass_if(
        rate >= MIN_KILL_RATE,
        format!("{killed}/{} killed ({:.0}%), survivors {survivors:?}", chosen.len(), rate * 100.0),
    )
}

/// `x + y` carries out of `n` bits exactly when `~x <u y`. The left side
/// is computed in u128, the right side by evaluating the BIR expression.
fn carry_rule() -> Outcome {
    let rule = ult(not(var("x")), var("y"));
    let holds = |w: Width, x: u64, y: u64, env: &mut Env| -> bool {
        env.set("x", BValue::word(w, x));
        env.set("y", BValue::word(w, y));
        let carry = u128::from(x) + u128::from(y) >= 1u128 << w.bits();
        eval_bool(&rule, env) == Ok(carry)
    };
    let mut env = Env::new();
    let mut violations = 0u64;
    for x in 0..256 {
        for y in 0..256 {
            violations += u64::from(!holds(Width::W8, x, y, &mut env));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    for _ in 0..CARRY_RANDOM_PAIRS {
        let (x, y) = (rng.gen(), rng.gen());
        violations += u64::from(!holds(Width::W64, x, y, &mut env));
    }
    pass_if(violations == 0, format!("65536 + {CARRY_RANDOM_PAIRS} pairs, {violations} violations"))
}

fn wp_soundness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (mut starts, mut held) = (0u64, 0u64);
    for i in 0..WP_PROGRAMS {
        let c = random_loop_free(&mut rng, WP_MAX_BLOCKS);
        let targets = [c.entry.clone()].into_iter().collect();
        let h = match wp_fragment(&c.program, &c.post, &targets) {
            Ok(h) => h,
            Err(e) => return Outcome::Fail(format!("case {i}: {e}")),
        };
        let pre: PredMap = [(c.entry.clone(), h[&c.entry].clone())].into_iter().collect();
        match check_triple_exhaustive(&c.program, &pre, &c.post, &c.domain, WP_FUEL) {
            Ok(st) => {
                starts += st.starts;
                held += st.pre_held;
            }
            Err(f) => return Outcome::Fail(format!("case {i}: {f}")),
        }
    }
    Outcome::Pass(format!("{WP_PROGRAMS} programs, {starts} start states, precondition held in {held}"))
}

fn chain(n: usize) -> TautologyGoal {
    let mut c = eq(var(format!("Y{n}")), word(Width::W8, 0));
    for i in (1..=n).rev() {
        let prev = if i == 1 { "X".to_string() } else { format!("Y{}", i - 1) };
        c = subst(add(var(prev.clone()), var(prev)), format!("Y{i}"), c);
    }
    TautologyGoal::new(tt(), c)
}

fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, r2)
}

fn blowup() -> Outcome {
    let mut rows = Vec::new();
    for n in CHAIN_LENGTHS {
        let g = chain(n);
        let expanded = expand_substs(&g.conclusion).var_occurrences();
        let simplified = simplify(&g).conclusion.tree_size();
        rows.push((n, expanded, simplified));
    }
    let ns: Vec<f64> = rows.iter().map(|r| r.0 as f64).collect();
    let log_expanded: Vec<f64> = rows.iter().map(|r| (r.1 as f64).log2()).collect();
    let sizes: Vec<f64> = rows.iter().map(|r| r.2 as f64).collect();
    let (exp_slope, _) = least_squares(&ns, &log_expanded);
    let (lin_slope, lin_r2) = least_squares(&ns, &sizes);
    let last = rows.last().unwrap();
    let ok = last.1 >= 1 << 20
        && rows.iter().all(|&(n, _, s)| s <= CHAIN_NODES_PER_LINK * n as u128)
        && exp_slope >= MIN_EXPANSION_SLOPE
        && lin_r2 >= MIN_LINEAR_FIT;
    let curve: Vec<String> = rows.iter().map(|(n, e, s)| format!("N={n}: {e} vs {s}")).collect();
    pass_if(
        ok,
        format!(
            "expanded occurrences vs simplified nodes [{}], log2 slope {exp_slope:.3}, linear slope {lin_slope:.1} (r2 {lin_r2:.4})",
            curve.join(", ")
        ),
    )
}

fn simplifier_oracle() -> Outcome {
    let worked = TautologyGoal::new(
        tt(),
        subst(
            add(var("X"), var("X")),
            "Y",
            subst(add(var("Y"), var("Y")), "Z", eq(var("Z"), mul(var("X"), word(Width::W8, 4)))),
        ),
    );
    let typing = [("X".to_string(), BType::Reg(Width::W8))].into_iter().collect();
    let all8 = (0..256).map(|v| BValue::word(Width::W8, v)).collect();
    let domain = EnvDomain::new().with("X", all8);
    let s = simplify(&worked);
    match equisatisfiable_oracle(&worked, &s, &typing, &domain) {
        Ok(Ok(_)) => {}
        Ok(Err(f)) => return Outcome::Fail(format!("worked example differs at {:?}", f.env)),
        Err(e) => return Outcome::Fail(format!("worked example: {e}")),
    }
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut envs = 0;
    for i in 0..SIMPLIFIER_GOALS {
        let c = random_goal(&mut rng, SIMPLIFIER_MAX_SUBST);
        let s = simplify(&c.goal);
        match equisatisfiable_oracle(&c.goal, &s, &c.typing, &c.domain) {
            Ok(Ok(n)) => envs += n,
            Ok(Err(f)) => return Outcome::Fail(format!("goal {i} differs at {:?}: {}", f.env, c.goal.implication())),
            Err(e) => return Outcome::Fail(format!("goal {i}: {e}")),
        }
    }
    Outcome::Pass(format!("worked example over 256 values, {SIMPLIFIER_GOALS} random goals over {envs} environments"))
}

/// Brute force and solver must agree. When the domain covers only part of
/// the memory space, a solver model outside it is checked by replay.
fn smt_differential() -> Outcome {
    let solver = Solver::resolve(None, SOLVER_TIMEOUT);
    if !solver.available() {
        return Outcome::Skip(format!("no solver at {}", solver.path.display()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (mut valid, mut invalid) = (0, 0);
    for i in 0..SOLVER_CASES {
        let c = random_solver_case(&mut rng);
        let mut witness = None;
        c.domain.all_extensions(&mut Env::new(), &mut |env| {
            let p = eval_bool(&c.premise, env).expect("premise evaluates");
            let q = eval_bool(&c.conclusion, env).expect("conclusion evaluates");
            if p && !q {
                witness = Some(env.clone());
            }
            witness.is_none()
        });
        let proof = match prove_implication(&c.premise, &c.conclusion, &c.typing, &solver) {
            Ok((p, _)) => p,
            Err(e) => return Outcome::Fail(format!("case {i}: {e}")),
        };
        let disagreement = match (&proof, &witness) {
            (Proof::Unknown(r), _) => Some(format!("unknown ({r})")),
            (Proof::Proved, Some(w)) => Some(format!("solver proved it but {w:?} refutes it")),
            (Proof::Proved, None) => None,
            (Proof::Counterexample(m), found) => {
                let replay = m
                    .to_env_over(&c.typing, 0..SOLVER_MEMORY_BYTES)
                    .ok()
                    .and_then(|env| Some(eval_bool(&c.premise, &env).ok()? && !eval_bool(&c.conclusion, &env).ok()?));
                if replay != Some(true) {
                    Some(format!("model {m:?} does not replay"))
                } else if found.is_none() && c.exhaustive {
                    Some("solver refuted it but enumeration found nothing".into())
                } else {
                    None
                }
            }
        };
        if let Some(d) = disagreement {
            return Outcome::Fail(format!("case {i}: {d}: {} => {}", c.premise, c.conclusion));
        }
        if matches!(proof, Proof::Proved) {
            valid += 1;
        } else {
            invalid += 1;
        }
    }
    Outcome::Pass(format!("{SOLVER_CASES} goals agree ({valid} valid, {invalid} refuted)"))
}

fn end_to_end() -> Outcome {
    let solver = Solver::resolve(None, SOLVER_TIMEOUT);
    if !solver.available() {
        return Outcome::Skip(format!("no solver at {}", solver.path.display()));
    }
    let bytes = std::fs::read(fixture("stack.bin")).expect("stack.bin");
    let words = words_from_bytes(&bytes, 0x1000);
    if words.len() < 10 {
        return Outcome::Fail(format!("fixture has {} instructions", words.len()));
    }
    let opts = VerifyOptions { trials: VERIFY_TRIALS, seed: SEED, solver };
    let strong = parse_contract(&read_fixture("stack.contract")).expect("stack.contract");
    let r = verify(&words, 0x1000, &strong, &opts);
    if r.status != Exit::Ok {
        return Outcome::Fail(format!("strong contract: {}", r.to_text()));
    }
    let weak = parse_contract(&read_fixture("stack_weak.contract")).expect("stack_weak.contract");
    let r = verify(&words, 0x1000, &weak, &opts);
    let prove = r.stages.iter().find(|s| s.name == "prove");
    let cex = prove.and_then(|s| s.details.as_array()).and_then(|rs| {
        rs.iter().find(|g| g["result"] == "counterexample" && g["model"].is_object() && g["replayed"] == true)
    });
    match (r.status, cex) {
        (Exit::ContractFails, Some(g)) => Outcome::Pass(format!(
            "{} instructions proved; weakened contract refuted with model {}",
            words.len(),
            g["model"]
        )),
        _ => Outcome::Fail(format!("weak contract: {}", r.to_text())),
    }
}

fn main() {
    let criteria: [Criterion; 10] = [
        (1, "semantics oracle", Some(BUDGET_SEMANTICS), semantics_oracle),
        (2, "type soundness", Some(BUDGET_SOUNDNESS), type_soundness),
        (3, "lifter validation", Some(BUDGET_LIFTER), lifter_validation),
        (4, "mutation resistance", None, mutation_resistance),
        (5, "carry rule", Some(BUDGET_CARRY), carry_rule),
        (6, "wp soundness", Some(BUDGET_WP), wp_soundness),
        (7, "blowup shape", None, blowup),
        (8, "simplifier meaning", Some(BUDGET_SIMPLIFIER), simplifier_oracle),
        (9, "smt differential", None, smt_differential),
        (10, "end to end verify", Some(BUDGET_VERIFY), end_to_end),
    ];
    let only: Vec<u32> = std::env::var("ACCEPT_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|n| n.trim().parse().ok()).collect())
        .unwrap_or_default();
    let mut failures = 0;
    for (n, name, budget, run) in criteria {
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let outcome = run();
        let took = start.elapsed();
        let over = budget.filter(|b| took > *b);
        let (tag, detail) = match outcome {
            Outcome::Pass(d) if over.is_some() => ("FAIL", format!("{d}; over budget {:?}", over.unwrap())),
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => ("FAIL", d),
            Outcome::Skip(d) => ("SKIP", d),
        };
        failures += usize::from(tag == "FAIL");
        println!("ACCEPT {n:>2} {tag} {name} [{:.2}s] {detail}", took.as_secs_f64());
    }
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
