use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use std::time::Duration;

use anyhow::Context;
use birlift::pipeline::{cfg_integrity, cosim_stage, verify, IntegrityOptions, VerifyOptions};
use birlift::report::{Exit, Report};
use birlift::solver::{prove_implication, Proof, Solver, SolverError};
use birlift::text;
use birlift_core::bir::{expand_substs, Label, Typing};
use birlift_core::cosim::check_program;
use birlift_core::isa::words_from_bytes;
use birlift_core::lifter::{lift_program, machine_typing};
use birlift_core::sem::{weak_exec, Pc, State, DEFAULT_FUEL};
use birlift_core::simplify::simplify;
use birlift_core::typecheck::check_program_with;
use birlift_core::wp::{build_cfg, wp_fragment};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

/// Lift A64 code to BIR, validate the lifting, and prove contracts.
#[derive(Parser)]
#[command(name = "birlift", version)]
struct Cli {
    /// Print the JSON report instead of text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct BinArgs {
    /// Flat little-endian code image.
    #[arg(long)]
    bin: PathBuf,
    /// Load address of the first byte.
    #[arg(long, value_parser = parse_addr, default_value = "0x0")]
    base: u64,
    /// Entry address (defaults to the base).
    #[arg(long, value_parser = parse_addr)]
    entry: Option<u64>,
}

#[derive(Args, Clone)]
struct SolverArgs {
    /// Solver executable (else $BIRLIFT_SOLVER, else /usr/local/bin/z3).
    #[arg(long)]
    solver: Option<PathBuf>,
    /// Per-query timeout in seconds.
    #[arg(long, default_value_t = 30)]
    timeout: u64,
}

impl SolverArgs {
    fn solver(&self) -> Solver {
        Solver::resolve(self.solver.as_deref(), Duration::from_secs(self.timeout))
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Lift a code image to BIR text, with a JSON sidecar.
    Lift {
        #[command(flatten)]
        bin: BinArgs,
        /// BIR output (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Sidecar path (default: OUT.json).
        #[arg(long)]
        meta: Option<PathBuf>,
    },
    /// Run a BIR program until a stop label, an error, or the fuel runs out.
    Run {
        #[arg(long)]
        program: PathBuf,
        #[arg(long)]
        env: PathBuf,
        #[arg(long, value_parser = parse_label)]
        entry: Label,
        #[arg(long, value_parser = parse_label)]
        stop: Vec<Label>,
        #[arg(long, default_value_t = DEFAULT_FUEL)]
        fuel: u64,
    },
    /// Infer and check variable types.
    Typecheck {
        #[arg(long)]
        program: PathBuf,
    },
    /// Print the control-flow graph over constant jump targets.
    Cfg {
        #[arg(long)]
        program: PathBuf,
    },
    /// Check sampled traces against an allowed edge list.
    CfgIntegrity {
        #[command(flatten)]
        bin: BinArgs,
        /// File of (edge FROM TO) forms.
        #[arg(long)]
        graph: PathBuf,
        /// Predicate map restricting start states.
        #[arg(long)]
        pre: Option<PathBuf>,
        #[arg(long, default_value_t = 200)]
        trials: u64,
        #[arg(long, default_value_t = 1000)]
        steps: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Validate the lifting of every instruction by co-simulation.
    Cosim {
        #[command(flatten)]
        bin: BinArgs,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also run whole-program lockstep traces of this many steps.
        #[arg(long)]
        program_steps: Option<u64>,
    },
    /// Weakest preconditions of a loop-free fragment.
    Wp {
        #[arg(long)]
        program: PathBuf,
        /// Predicate map of postconditions.
        #[arg(long)]
        post: PathBuf,
        /// Labels to compute (default: blocks without predecessors).
        #[arg(long, value_parser = parse_label)]
        target: Vec<Label>,
        /// Print expanded and shared sizes.
        #[arg(long)]
        stats: bool,
    },
    /// Eliminate substitutions from a goal.
    Simplify {
        #[arg(long)]
        goal: PathBuf,
        #[arg(long)]
        stats: bool,
    },
    /// Prove a Subst-free goal with the SMT solver.
    Prove {
        #[arg(long)]
        goal: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Lift, validate, and prove a contract for a code fragment.
    Verify {
        #[command(flatten)]
        bin: BinArgs,
        #[arg(long)]
        contract: PathBuf,
        #[arg(long, default_value_t = 1000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        solver: SolverArgs,
    },
}

fn parse_addr(s: &str) -> Result<u64, String> {
    text::parse_u64(s).ok_or_else(|| format!("not an address: {s}"))
}

fn parse_label(s: &str) -> Result<Label, String> {
    Ok(text::parse_u64(s).map_or_else(|| Label::Name(s.to_string()), Label::Addr))
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure(Exit::Environment, format!("{}: {e}", path.display())))
}

/// A failure before any report stage could run.
struct Failure(Exit, String);

impl From<text::TextError> for Failure {
    fn from(e: text::TextError) -> Failure {
        Failure(Exit::Structural, e.to_string())
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Failure {
        Failure(Exit::Environment, format!("{e:#}"))
    }
}

fn load_words(b: &BinArgs) -> Result<(Vec<(u64, u32)>, u64), Failure> {
    let bytes = std::fs::read(&b.bin).with_context(|| format!("reading {}", b.bin.display()))?;
    Ok((words_from_bytes(&bytes, b.base), b.entry.unwrap_or(b.base)))
}

/// Output of a command: a report and optional plain text for stdout.
struct Outcome {
    report: Report,
    text: Option<String>,
}

fn single(command: &'static str, name: &'static str, ok: bool, summary: String, details: Value, exit: Exit) -> Report {
    let mut r = Report::new(command, None);
    r.stage(name, "", ok, summary, details);
    if !ok {
        r.fail(exit);
    }
    r
}

fn run(cmd: Cmd) -> Result<Outcome, Failure> {
    Ok(match cmd {
        Cmd::Lift { bin, out, meta } => {
            let (words, entry) = load_words(&bin)?;
            let lp = lift_program(&words, entry).map_err(|e| Failure(Exit::Lift, e.to_string()))?;
            let bir = text::program_text(&lp.program, &machine_typing());
            let sidecar = json!({
                "schema": birlift::report::SCHEMA,
                "entry": format!("{:#x}", lp.entry),
                "entry_labels": lp.entry_labels.iter().map(|l| l.to_string()).collect::<Vec<_>>(),
                "exits": lp.exits.iter().map(|l| l.to_string()).collect::<Vec<_>>(),
                "memr": lp.memr.intervals().iter().map(|(a, b)| [format!("{a:#x}"), format!("{b:#x}")]).collect::<Vec<_>>(),
                "instructions": lp.instrs.iter().map(|i| json!({
                    "addr": format!("{:#x}", i.addr),
                    "word": format!("{:#010x}", i.word),
                    "text": i.instr.as_ref().map(|x| x.to_string()),
                })).collect::<Vec<_>>(),
                "unsupported": lp.unsupported.iter().map(|(a, w)| json!({"addr": format!("{a:#x}"), "word": format!("{w:#010x}")})).collect::<Vec<_>>(),
            });
            let sidecar_text = serde_json::to_string_pretty(&sidecar).expect("serializable");
            let meta = meta.or_else(|| out.as_ref().map(|o| PathBuf::from(format!("{}.json", o.display()))));
            let write = |p: &Path, s: &str| std::fs::write(p, s).with_context(|| format!("writing {}", p.display()));
            let mut stdout = None;
            match &out {
                Some(o) => write(o, &bir)?,
                None => stdout = Some(bir),
            }
            if let Some(m) = &meta {
                write(m, &sidecar_text)?;
            }
            let summary = format!("{} instructions, {} unsupported", lp.instrs.len(), lp.unsupported.len());
            Outcome { report: single("lift", "lift", true, summary, sidecar, Exit::Lift), text: stdout }
        }
        Cmd::Run { program, env, entry, stop, fuel } => {
            let p = text::parse_program(&read(&program)?)?.program;
            let env = text::parse_env(&read(&env)?)?;
            let stops: BTreeSet<Label> = stop.into_iter().collect();
            let (ok, exit, pc, env_text) = match weak_exec(&p, State::new(env, entry), &stops, fuel) {
                Ok(s) => {
                    let exit = match s.pc {
                        Pc::Label(_) => Exit::Ok,
                        Pc::Failed => Exit::ContractFails,
                        Pc::TypeError => Exit::Typing,
                    };
                    (exit == Exit::Ok, exit, s.pc.to_string(), text::env_text(&s.env))
                }
                Err(_) => (false, Exit::ContractFails, "diverged".to_string(), String::new()),
            };
            let report = single("run", "run", ok, format!("pc {pc}"), json!({"pc": pc, "env": env_text}), exit);
            Outcome { report, text: Some(format!("pc {pc}\n{env_text}")) }
        }
        Cmd::Typecheck { program } => {
            let f = text::parse_program(&read(&program)?)?;
            match check_program_with(&f.program, &f.declared) {
                Ok(ctx) => {
                    let t = text::typing_strings(&ctx.vars);
                    let mut s = String::new();
                    text::write_declarations(&mut s, &ctx.vars);
                    let report = single(
                        "typecheck",
                        "typecheck",
                        true,
                        format!("{} variables", t.len()),
                        json!(t),
                        Exit::Typing,
                    );
                    Outcome { report, text: Some(s) }
                }
                Err(d) => {
                    let d: Vec<String> = d.iter().map(|x| x.to_string()).collect();
                    let report = single("typecheck", "typecheck", false, d.join("; "), json!(d), Exit::Typing);
                    Outcome { report, text: Some(d.join("\n") + "\n") }
                }
            }
        }
        Cmd::Cfg { program } => {
            let f = text::parse_program(&read(&program)?)?;
            let g = build_cfg(&f.program);
            let names = |s: &BTreeSet<Label>| s.iter().map(|l| l.to_string()).collect::<Vec<_>>();
            let details = json!({
                "edges": g.edges.iter().map(|(a, b)| [a.to_string(), b.to_string()]).collect::<Vec<_>>(),
                "entries": names(&g.entries),
                "exits": names(&g.exits),
                "unresolved": names(&g.unresolved),
            });
            let mut s = String::new();
            for (a, b) in &g.edges {
                s.push_str(&format!("(edge {a} {b})\n"));
            }
            for (kw, set) in [("entry", &g.entries), ("exit", &g.exits), ("unresolved", &g.unresolved)] {
                for l in set {
                    s.push_str(&format!("; {kw} {l}\n"));
                }
            }
            let summary = format!("{} nodes, {} edges", g.nodes.len(), g.edges.len());
            Outcome { report: single("cfg", "cfg", true, summary, details, Exit::Structural), text: Some(s) }
        }
        Cmd::CfgIntegrity { bin, graph, pre, trials, steps, seed } => {
            let (words, entry) = load_words(&bin)?;
            let edges = text::parse_edges(&read(&graph)?)?;
            let pre = match pre {
                Some(p) => text::parse_predmap(&read(&p)?)?,
                None => Default::default(),
            };
            let report = cfg_integrity(&words, entry, &edges, &pre, &IntegrityOptions { trials, seed, steps });
            Outcome { report, text: None }
        }
        Cmd::Cosim { bin, trials, seed, program_steps } => {
            let (words, entry) = load_words(&bin)?;
            let lp = lift_program(&words, entry).map_err(|e| Failure(Exit::Lift, e.to_string()))?;
            let mut report = Report::new("cosim", Some(seed));
            if cosim_stage(&mut report, &lp, trials, seed) {
                if let Some(steps) = program_steps {
                    let r = check_program(&lp, steps, trials.min(1000), seed);
                    let ok = r.passed();
                    let summary =
                        format!("{} traces, {} steps, {} mismatches", r.trials, r.steps_checked, r.mismatches);
                    let details = serde_json::to_value(&r).expect("serializable");
                    report.stage("lockstep", "whole-program runs stay related", ok, summary, details);
                    if !ok {
                        report.fail(Exit::Lift);
                    }
                }
            }
            Outcome { report, text: None }
        }
        Cmd::Wp { program, post, target, stats } => {
            let f = text::parse_program(&read(&program)?)?;
            let q = text::parse_predmap(&read(&post)?)?;
            let targets: BTreeSet<Label> =
                if target.is_empty() { build_cfg(&f.program).entries } else { target.into_iter().collect() };
            let h = wp_fragment(&f.program, &q, &targets).map_err(|e| Failure(Exit::Structural, e.to_string()))?;
            let sizes: Vec<Value> = h
                .iter()
                .map(|(l, e)| {
                    json!({
                        "label": l.to_string(),
                        "substitutions": e.subst_count(),
                        "shared_size": e.dag_size(),
                        "expanded_size": expand_substs(e).tree_size().to_string(),
                    })
                })
                .collect();
            let mut s = text::predmap_text(&h);
            if stats {
                for v in &sizes {
                    s.push_str(&format!("; {v}\n"));
                }
            }
            let report = single("wp", "wp", true, format!("{} labels", h.len()), json!(sizes), Exit::Structural);
            Outcome { report, text: Some(s) }
        }
        Cmd::Simplify { goal, stats } => {
            let g = text::parse_goal(&read(&goal)?)?;
            g.goal.check(&g.declared).map_err(|e| Failure(Exit::Typing, format!("ill-typed goal: {}", e.0)))?;
            let s = simplify(&g.goal);
            let typing = s.typing(&g.declared).map_err(|e| Failure(Exit::Typing, e.0.to_string()))?;
            let out_goal = birlift_core::simplify::TautologyGoal {
                premise: g.goal.premise.clone(),
                conclusion: s.conclusion.clone(),
            };
            let mut t = text::goal_text(&out_goal, &typing);
            let before = expand_substs(&g.goal.conclusion).tree_size();
            let after = s.conclusion.tree_size();
            if stats {
                t.push_str(&format!("; expanded size {before}, simplified size {after}, {} fresh\n", s.fresh.len()));
            }
            let details = json!({
                "expanded_size": before.to_string(),
                "simplified_size": after.to_string(),
                "fresh": s.fresh.iter().map(|f| json!({"name": f.name, "origin": f.origin, "def": f.def.to_string()})).collect::<Vec<_>>(),
            });
            let report =
                single("simplify", "simplify", true, format!("size {before} -> {after}"), details, Exit::Typing);
            Outcome { report, text: Some(t) }
        }
        Cmd::Prove { goal, solver } => {
            let g = text::parse_goal(&read(&goal)?)?;
            let typing: Typing = g.declared.clone();
            let (proof, _) = match prove_implication(&g.goal.premise, &g.goal.conclusion, &typing, &solver.solver()) {
                Ok(r) => r,
                Err(SolverError::Encode(e)) => {
                    let exit = match e {
                        birlift_core::smt::SmtError::SubstPresent => Exit::Structural,
                        _ => Exit::Typing,
                    };
                    return Err(Failure(exit, e.to_string()));
                }
                Err(e) => return Err(Failure(Exit::Environment, e.to_string())),
            };
            let (ok, summary, details) = match &proof {
                Proof::Proved => (true, "proved".to_string(), Value::Null),
                Proof::Counterexample(m) => (
                    false,
                    format!("counterexample:\n{m}"),
                    json!(m
                        .values
                        .iter()
                        .map(|(k, v)| (k.clone(), v.to_string()))
                        .collect::<std::collections::BTreeMap<_, _>>()),
                ),
                Proof::Unknown(r) => (false, format!("unknown ({r})"), Value::Null),
            };
            let report = single("prove", "prove", ok, summary.clone(), details, Exit::ContractFails);
            Outcome { report, text: Some(summary + "\n") }
        }
        Cmd::Verify { bin, contract, trials, seed, solver } => {
            let (words, entry) = load_words(&bin)?;
            let c = text::parse_contract(&read(&contract)?)?;
            let report = verify(&words, entry, &c, &VerifyOptions { trials, seed, solver: solver.solver() });
            Outcome { report, text: None }
        }
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let json = cli.json;
    match run(cli.cmd) {
        Ok(Outcome { report, text }) => {
            if json {
                println!("{}", report.to_json());
            } else {
                match text {
                    Some(t) => print!("{t}"),
                    None => print!("{}", report.to_text()),
                }
                if !report.ok() {
                    if let Some(st) = report.stages.iter().find(|s| !s.ok) {
                        eprintln!("birlift: {}: {}", st.name, st.summary);
                    }
                }
            }
            ExitCode::from(report.exit_code as u8)
        }
        Err(Failure(exit, msg)) => {
            if json {
                let mut r = Report::new("error", None);
                r.stage("input", "", false, msg.clone(), Value::Null);
                r.fail(exit);
                println!("{}", r.to_json());
            }
            eprintln!("birlift: {msg}");
            ExitCode::from(exit.code() as u8)
        }
    }
}
