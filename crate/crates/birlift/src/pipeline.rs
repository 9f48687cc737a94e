//! End-to-end checks: co-simulation, typing, weakest preconditions and
//! solver proofs for `verify`; sampled traces for `cfg-integrity`.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use birlift_core::bir::{eval_bool, expand_substs, BExpr, BinOp, Label, Typing};
use birlift_core::cosim::{check_instruction, generate_program_state, make_related, FRAGMENT_FUEL};
use birlift_core::lifter::{lift_program, machine_typing, LiftedProgram};
use birlift_core::sem::{run_to_next, Pc, State};
use birlift_core::simplify::{simplify, TautologyGoal};
use birlift_core::typecheck::check_program_with;
use birlift_core::wp::{wp_fragment, PredMap};
use serde_json::{json, Value};

use crate::report::{Exit, Report};
use crate::solver::{prove_implication, Proof, Solver, SolverError};
use crate::text::Contract;

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    pub trials: u64,
    pub seed: u64,
    pub solver: Solver,
}

fn lift_stage(report: &mut Report, words: &[(u64, u32)], entry: u64) -> Option<LiftedProgram> {
    let lp = match lift_program(words, entry) {
        Ok(lp) => lp,
        Err(e) => {
            report.stage("lift", "the fragment decodes and translates", false, e.to_string(), Value::Null);
            report.fail(Exit::Lift);
            return None;
        }
    };
    let unsupported: Vec<String> = lp.unsupported.iter().map(|(a, w)| format!("{a:#x}: {w:#010x}")).collect();
    let ok = unsupported.is_empty();
    report.stage(
        "lift",
        "the fragment decodes and translates",
        ok,
        format!("{} instructions, {} blocks, memr {}", lp.instrs.len(), lp.program.blocks().len(), lp.memr),
        json!({
            "instructions": lp.instrs.len(),
            "blocks": lp.program.blocks().len(),
            "memr": lp.memr.intervals(),
            "exits": lp.exits.iter().map(|l| l.to_string()).collect::<Vec<_>>(),
            "unsupported": unsupported,
        }),
    );
    if !ok {
        report.fail(Exit::Lift);
        return None;
    }
    Some(lp)
}

/// Validates every instruction of `lp` by co-simulation.
pub fn cosim_stage(report: &mut Report, lp: &LiftedProgram, trials: u64, seed: u64) -> bool {
    let mut per = Vec::new();
    let mut ok = true;
    for i in lp.instrs.iter().filter(|i| i.instr.is_some()) {
        let r = check_instruction(lp, i.addr, trials, seed);
        ok &= r.passed();
        per.push(json!({
            "addr": format!("{:#x}", r.addr),
            "text": r.text,
            "trials": r.trials,
            "related": r.related,
            "accepted_stuck": r.accepted_stuck,
            "accepted_self_modification": r.accepted_self_modification,
            "mismatches": r.mismatches,
            "case_hits": r.case_hits,
            "counterexamples": r.counterexamples.iter().map(|c| json!({"trial": c.trial, "reason": c.reason})).collect::<Vec<_>>(),
        }));
    }
    report.stage(
        "cosim",
        "each instruction's blocks simulate the machine step on sampled states (bounded evidence of lifter soundness, not a proof)",
        ok,
        format!("{} instructions x {trials} trials", per.len()),
        Value::Array(per),
    );
    if !ok {
        report.fail(Exit::Lift);
    }
    ok
}

/// Lifts, validates, type-checks, propagates the postcondition, and proves
/// each `pre(l) ⇒ wp(l)`, plus the same with every postcondition `true`.
pub fn verify(words: &[(u64, u32)], entry: u64, contract: &Contract, opts: &VerifyOptions) -> Report {
    let mut report = Report::new("verify", Some(opts.seed));
    let Some(lp) = lift_stage(&mut report, words, entry) else { return report };
    if !cosim_stage(&mut report, &lp, opts.trials, opts.seed) {
        return report;
    }

    let mut declared = machine_typing();
    declared.extend(contract.declared.clone());
    let typing = match check_program_with(&lp.program, &declared) {
        Ok(ctx) => ctx.vars,
        Err(diags) => {
            let d: Vec<String> = diags.iter().map(|d| d.to_string()).collect();
            report.stage("typecheck", "the lifted program is well typed", false, d.join("; "), json!(d));
            report.fail(Exit::Typing);
            return report;
        }
    };
    let mut bad_preds = Vec::new();
    for (kind, m) in [("pre", &contract.pre), ("post", &contract.post)] {
        for (l, e) in m {
            if birlift_core::bir::type_of_expr(e, &typing) != Ok(birlift_core::bir::BType::BOOL) {
                bad_preds.push(format!("{kind} at {l} is not a Reg1 predicate"));
            }
        }
    }
    let ok = bad_preds.is_empty();
    report.stage(
        "typecheck",
        "the lifted program is well typed, so no run reaches a type error",
        ok,
        if ok { format!("{} variables", typing.len()) } else { bad_preds.join("; ") },
        Value::Null,
    );
    if !ok {
        report.fail(Exit::Typing);
        return report;
    }

    let targets: BTreeSet<Label> = contract.pre.keys().cloned().collect();
    let trivial: PredMap = contract.post.keys().map(|l| (l.clone(), Arc::new(birlift_core::bir::expr::tt()))).collect();
    let mut maps = Vec::new();
    for (name, q) in [("contract", &contract.post), ("error-freedom", &trivial)] {
        match wp_fragment(&lp.program, q, &targets) {
            Ok(h) => maps.push((name, h)),
            Err(e) => {
                report.stage(
                    "wp",
                    "weakest preconditions exist (loop-free, resolved jumps)",
                    false,
                    e.to_string(),
                    Value::Null,
                );
                report.fail(Exit::Structural);
                return report;
            }
        }
    }
    report.stage(
        "wp",
        "weakest preconditions exist (loop-free, resolved jumps)",
        true,
        format!("{} entry labels", targets.len()),
        Value::Null,
    );

    let mut goals = Vec::new();
    let mut sizes = Vec::new();
    for (name, h) in &maps {
        for (l, pre) in &contract.pre {
            let g = TautologyGoal { premise: pre.clone(), conclusion: h[l].clone() };
            let s = simplify(&g);
            sizes.push(json!({
                "goal": name,
                "label": l.to_string(),
                "expanded_size": expand_substs(&g.conclusion).tree_size().to_string(),
                "simplified_size": s.conclusion.tree_size().to_string(),
                "fresh": s.fresh.len(),
            }));
            goals.push((*name, l.clone(), g, s));
        }
    }
    report.stage(
        "simplify",
        "substitutions eliminated without blowup",
        true,
        format!("{} goals", goals.len()),
        json!(sizes),
    );

    let mut results = Vec::new();
    let mut worst: Option<Exit> = None;
    for (name, l, g, s) in &goals {
        let t = match s.typing(&typing) {
            Ok(t) => t,
            Err(e) => {
                report.stage("prove", "pre implies the weakest precondition", false, e.to_string(), Value::Null);
                report.fail(Exit::Typing);
                return report;
            }
        };
        match prove_implication(&g.premise, &s.conclusion, &t, &opts.solver) {
            Ok((Proof::Proved, _)) => results.push(json!({"goal": name, "label": l.to_string(), "result": "proved"})),
            Ok((Proof::Counterexample(m), _)) => {
                let replay = replay_counterexample(g, &s.conclusion, &m, &t);
                results.push(json!({
                    "goal": name,
                    "label": l.to_string(),
                    "result": "counterexample",
                    "model": m.values.iter().map(|(k, v)| (k.clone(), v.to_string())).collect::<BTreeMap<_, _>>(),
                    "replayed": replay,
                }));
                worst = Some(Exit::ContractFails);
            }
            Ok((Proof::Unknown(r), _)) => {
                results.push(json!({"goal": name, "label": l.to_string(), "result": "unknown", "reason": r}));
                worst = Some(Exit::ContractFails);
            }
            Err(e) => {
                let exit = match e {
                    SolverError::Encode(_) => Exit::Typing,
                    _ => Exit::Environment,
                };
                report.stage("prove", "pre implies the weakest precondition", false, e.to_string(), json!(results));
                report.fail(exit);
                return report;
            }
        }
    }
    let ok = worst.is_none();
    let proved = results.iter().filter(|r| r["result"] == "proved").count();
    report.stage(
        "prove",
        "pre implies the weakest precondition; the error-freedom goal rules out failed assertions",
        ok,
        format!("{proved}/{} goals proved", results.len()),
        json!(results),
    );
    if let Some(e) = worst {
        report.fail(e);
    }
    report
}

/// Whether the model makes the premise true and the simplified conclusion
/// false under evaluation. `None` if the model cannot be replayed.
fn replay_counterexample(
    g: &TautologyGoal,
    conclusion: &Arc<BExpr>,
    m: &birlift_core::smt::Model,
    typing: &Typing,
) -> Option<bool> {
    let env = m.to_env(typing).ok()?;
    let p = eval_bool(&g.premise, &env).ok()?;
    let c = eval_bool(conclusion, &env).ok()?;
    Some(p && !c)
}

#[derive(Clone, Debug)]
pub struct IntegrityOptions {
    pub trials: u64,
    pub seed: u64,
    /// Maximum instructions per trace.
    pub steps: u64,
}

/// Attempts per trial to sample a state satisfying the precondition.
const SAMPLE_ATTEMPTS: u64 = 64;

/// Pins `v = c` conjuncts of `pre` into the state before testing it.
fn pins(pre: &BExpr, out: &mut Vec<(String, BExpr)>) {
    match pre {
        BExpr::Bin(BinOp::BoolAnd, a, b) => {
            pins(a, out);
            pins(b, out);
        }
        BExpr::Bin(BinOp::Eq, a, b) => match (&**a, &**b) {
            (BExpr::Var(v), c @ BExpr::Const(_)) | (c @ BExpr::Const(_), BExpr::Var(v)) => {
                out.push((v.clone(), c.clone()))
            }
            _ => {}
        },
        _ => {}
    }
}

/// Samples traces from states satisfying `pre` and checks that every
/// instruction-to-instruction transition is an edge of `graph` and that
/// no run reaches an error state.
pub fn cfg_integrity(
    words: &[(u64, u32)],
    entry: u64,
    graph: &[(Label, Label)],
    pre: &PredMap,
    opts: &IntegrityOptions,
) -> Report {
    let mut report = Report::new("cfg-integrity", Some(opts.seed));
    let Some(lp) = lift_stage(&mut report, words, entry) else { return report };
    let allowed: BTreeSet<(Label, Label)> = graph.iter().cloned().collect();
    // Graph targets outside the fragment (return addresses) end a trace.
    let mut stops = lp.stop_labels();
    stops.extend(graph.iter().map(|(_, to)| to.clone()));
    let mut starts: PredMap = pre.clone();
    if starts.is_empty() {
        starts.insert(Label::Addr(entry), Arc::new(birlift_core::bir::expr::tt()));
    }
    let mut observed = BTreeSet::new();
    let mut violations = Vec::new();
    let mut rejected = 0u64;
    let mut traces = 0u64;
    for (l, p) in &starts {
        let mut pinned = Vec::new();
        pins(p, &mut pinned);
        'trial: for trial in 0..opts.trials {
            let mut env = None;
            for attempt in 0..SAMPLE_ATTEMPTS {
                let s = generate_program_state(&lp, opts.seed, trial * SAMPLE_ATTEMPTS + attempt);
                let mut e = make_related(&s).env;
                for (v, c) in &pinned {
                    if let Ok(val) = birlift_core::bir::eval(c, &e) {
                        e.insert(v.as_str(), val);
                    }
                }
                match eval_bool(p, &e) {
                    Ok(true) => {
                        env = Some(e);
                        break;
                    }
                    Ok(false) => rejected += 1,
                    Err(err) => {
                        report.stage("sample", "precondition is a Reg1 predicate", false, err.0, Value::Null);
                        report.fail(Exit::Typing);
                        return report;
                    }
                }
            }
            let Some(env) = env else { continue };
            traces += 1;
            let mut bs = State::new(env, l.clone());
            let mut trace = vec![l.to_string()];
            for _ in 0..opts.steps {
                let Pc::Label(cur) = bs.pc.clone() else { break };
                if lp.program.block(&cur).is_none() {
                    break;
                }
                let next = match run_to_next(&lp.program, bs, &stops, FRAGMENT_FUEL) {
                    Ok(n) => n,
                    Err(_) => {
                        violations
                            .push(json!({"trial": trial, "reason": "no instruction boundary reached", "trace": trace}));
                        continue 'trial;
                    }
                };
                let nl = match &next.pc {
                    Pc::Label(nl) => nl.clone(),
                    pc => {
                        violations.push(
                            json!({"trial": trial, "reason": format!("error state {pc} after {cur}"), "trace": trace}),
                        );
                        continue 'trial;
                    }
                };
                trace.push(nl.to_string());
                let edge = (cur.clone(), nl.clone());
                if !allowed.contains(&edge) {
                    violations.push(json!({"trial": trial, "reason": format!("edge {cur} -> {nl} not in the graph"), "trace": trace}));
                    continue 'trial;
                }
                observed.insert(edge);
                bs = next;
            }
        }
    }
    let total_violations = violations.len();
    violations.truncate(5);
    let ok = total_violations == 0 && traces > 0;
    let summary = if traces == 0 {
        "no sampled state satisfied the precondition".to_string()
    } else {
        format!("{traces} traces, {} edges observed, {total_violations} violations", observed.len())
    };
    report.stage(
        "integrity",
        "every reachable transition is an edge of the declared graph and no error state is reached",
        ok,
        summary,
        json!({
            "traces": traces,
            "rejected_samples": rejected,
            "observed_edges": observed.iter().map(|(a, b)| [a.to_string(), b.to_string()]).collect::<Vec<_>>(),
            "violations": violations,
        }),
    );
    if !ok {
        report.fail(Exit::ContractFails);
    }
    report
}
