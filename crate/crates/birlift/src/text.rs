//! S-expression file formats for programs, environments, predicate maps,
//! contracts and goals. Expressions use the `Display` syntax of `BExpr`.

use std::collections::BTreeMap;
use std::fmt::Write;
use std::sync::Arc;

use birlift_core::bir::expr::{self as ex, BExpr};
use birlift_core::bir::{AddrWidth, BType, BValue, BinOp, Env, Label, Memory, Typing, UnOp, Width};
use birlift_core::sem::{Block, Cf, Program, Stmt};
use birlift_core::sexp::{parse_all, Sexp};
use birlift_core::simplify::TautologyGoal;
use birlift_core::wp::PredMap;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TextError {
    #[error(transparent)]
    Syntax(#[from] birlift_core::sexp::SexpError),
    #[error("{message}: {form}")]
    Form { message: &'static str, form: String },
}

type R<T> = Result<T, TextError>;

fn bad<T>(message: &'static str, form: &Sexp) -> R<T> {
    let mut form = form.to_string();
    if form.len() > 120 {
        form.truncate(117);
        form.push_str("...");
    }
    Err(TextError::Form { message, form })
}

pub fn parse_u64(s: &str) -> Option<u64> {
    match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(h) => u64::from_str_radix(&h.replace('_', ""), 16).ok(),
        None => s.replace('_', "").parse().ok(),
    }
}

fn width(s: &Sexp) -> R<Width> {
    s.atom().and_then(|a| a.parse().ok()).and_then(Width::from_bits).map_or_else(|| bad("expected a width", s), Ok)
}

fn number(s: &Sexp) -> R<u64> {
    s.atom().and_then(parse_u64).map_or_else(|| bad("expected a number", s), Ok)
}

fn name(s: &Sexp) -> R<String> {
    match s.atom() {
        Some(a) if !a.is_empty() && parse_u64(a).is_none() && !matches!(a, "true" | "false") => Ok(a.to_string()),
        _ => bad("expected a variable name", s),
    }
}

pub fn parse_label(s: &Sexp) -> R<Label> {
    match s {
        Sexp::Str(n) => Ok(Label::Name(n.clone())),
        Sexp::Atom(a) => parse_u64(a).map(Label::Addr).map_or_else(|| bad("expected a label", s), Ok),
        Sexp::List(_) => bad("expected a label", s),
    }
}

pub fn parse_type(s: &Sexp) -> R<BType> {
    if s.atom() == Some("label") {
        return Ok(BType::Label);
    }
    match s.head() {
        Some(("reg", [w])) => Ok(BType::Reg(width(w)?)),
        Some(("mem", [w])) => {
            let a = s.list().and_then(|l| l[1].atom()).and_then(|a| a.parse().ok()).and_then(AddrWidth::from_bits);
            a.map(BType::Mem).map_or_else(|| bad("memory address width must be 32 or 64", w), Ok)
        }
        _ => bad("expected a type", s),
    }
}

pub fn type_text(t: BType) -> String {
    match t {
        BType::Reg(w) => format!("(reg {w})"),
        BType::Mem(a) => format!("(mem {})", a.word().bits()),
        BType::Label => "label".into(),
    }
}

pub fn parse_expr(s: &Sexp) -> R<BExpr> {
    match s {
        Sexp::Atom(a) if a == "true" => return Ok(ex::tt()),
        Sexp::Atom(a) if a == "false" => return Ok(ex::ff()),
        Sexp::Atom(_) => return Ok(ex::var(name(s)?)),
        Sexp::Str(_) => return bad("bare string in an expression; use (label \"...\")", s),
        Sexp::List(_) => {}
    }
    let Some((head, args)) = s.head() else { return bad("expected an operator", s) };
    let e = |i: usize| parse_expr(&args[i]);
    Ok(match (head, args.len()) {
        ("const", 2) => ex::word(width(&args[0])?, number(&args[1])?),
        ("label", 1) => match &args[0] {
            Sexp::Str(n) => ex::label(n.clone()),
            _ => return bad("label names are strings", s),
        },
        ("not", 1) => ex::not(e(0)?),
        ("neg", 1) => ex::neg(e(0)?),
        ("zext", 2) => ex::un(UnOp::ZeroExt(width(&args[0])?), e(1)?),
        ("sext", 2) => ex::un(UnOp::SignExt(width(&args[0])?), e(1)?),
        ("trunc", 2) => ex::un(UnOp::Trunc(width(&args[0])?), e(1)?),
        ("ite", 3) => ex::ite(e(0)?, e(1)?, e(2)?),
        ("load", 3) => ex::load(e(0)?, e(1)?, width(&args[2])?),
        ("store", 4) => ex::store(e(0)?, e(1)?, e(2)?, width(&args[3])?),
        ("subst", 3) => ex::subst(e(0)?, name(&args[1])?, e(2)?),
        (op, 2) => match BinOp::from_keyword(op) {
            Some(op) => ex::bin(op, e(0)?, e(1)?),
            None => return bad("unknown operator", s),
        },
        _ => return bad("unknown operator or wrong arity", s),
    })
}

pub fn parse_expr_str(text: &str) -> R<BExpr> {
    match parse_all(text)?.as_slice() {
        [one] => parse_expr(one),
        _ => Err(TextError::Form { message: "expected exactly one expression", form: text.to_string() }),
    }
}

fn parse_stmt(s: &Sexp) -> R<Stmt> {
    match s.head() {
        Some(("assign", [v, e])) => Ok(Stmt::Assign(name(v)?, parse_expr(e)?)),
        Some(("assert", [e])) => Ok(Stmt::Assert(parse_expr(e)?)),
        _ => bad("expected (assign V E) or (assert E)", s),
    }
}

fn parse_cf(s: &Sexp) -> R<Option<Cf>> {
    Ok(match s.head() {
        Some(("jmp", [t])) => Some(Cf::Jmp(parse_expr(t)?)),
        Some(("cjmp", [c, t, e])) => Some(Cf::CJmp(parse_expr(c)?, parse_expr(t)?, parse_expr(e)?)),
        _ => None,
    })
}

/// A program with its declared variable types.
#[derive(Clone, Debug)]
pub struct ProgramFile {
    pub program: Program,
    pub declared: Typing,
}

fn declare(s: &Sexp, declared: &mut Typing) -> R<bool> {
    match s.head() {
        Some(("declare", [v, t])) => {
            declared.insert(name(v)?, parse_type(t)?);
            Ok(true)
        }
        _ => Ok(false),
    }
}

pub fn parse_program(text: &str) -> R<ProgramFile> {
    let mut declared = Typing::new();
    let mut blocks = Vec::new();
    for item in parse_all(text)? {
        if declare(&item, &mut declared)? {
            continue;
        }
        let Some(("block", [l, rest @ ..])) = item.head() else {
            return bad("expected (declare ...) or (block ...)", &item);
        };
        let Some((last, stmts)) = rest.split_last() else {
            return bad("block without a jump", &item);
        };
        let Some(cf) = parse_cf(last)? else {
            return bad("block must end with (jmp ...) or (cjmp ...)", &item);
        };
        let stmts = stmts.iter().map(parse_stmt).collect::<R<Vec<_>>>()?;
        blocks.push(Block::new(parse_label(l)?, stmts, cf));
    }
    Ok(ProgramFile { program: Program::new(blocks), declared })
}

pub fn write_declarations(out: &mut String, declared: &Typing) {
    for (v, t) in declared {
        let _ = writeln!(out, "(declare {v} {})", type_text(*t));
    }
}

pub fn program_text(p: &Program, declared: &Typing) -> String {
    let mut out = String::new();
    write_declarations(&mut out, declared);
    for b in p.blocks() {
        let _ = writeln!(out, "(block {}", b.label);
        for s in &b.stmts {
            match s {
                Stmt::Assign(v, e) => {
                    let _ = writeln!(out, "  (assign {v} {e})");
                }
                Stmt::Assert(e) => {
                    let _ = writeln!(out, "  (assert {e})");
                }
            }
        }
        let _ = match &b.cf {
            Cf::Jmp(t) => writeln!(out, "  (jmp {t}))"),
            Cf::CJmp(c, t, e) => writeln!(out, "  (cjmp {c} {t} {e}))"),
        };
    }
    out
}

fn parse_value(s: &Sexp) -> R<BValue> {
    match s.head() {
        Some(("word", [w, v])) => Ok(BValue::word(width(w)?, number(v)?)),
        Some(("label", [l])) => Ok(BValue::Label(parse_label(l)?)),
        Some(("mem", [a, bytes @ ..])) => {
            let aw = a.atom().and_then(|a| a.parse().ok()).and_then(AddrWidth::from_bits);
            let Some(aw) = aw else { return bad("memory address width must be 32 or 64", s) };
            let mut m = Memory::new(aw);
            for b in bytes {
                let [addr, v] = b.list().unwrap_or_default() else {
                    return bad("expected (ADDR BYTE)", b);
                };
                let v = number(v)?;
                if v > 0xff {
                    return bad("byte out of range", b);
                }
                m.set_byte(number(addr)?, v as u8);
            }
            Ok(BValue::Mem(m))
        }
        _ => bad("expected (word W V), (mem A (ADDR BYTE)...) or (label L)", s),
    }
}

pub fn value_text(v: &BValue) -> String {
    match v {
        BValue::Word(w) => format!("(word {} {:#x})", w.width(), w.bits()),
        BValue::Label(l) => format!("(label {l})"),
        BValue::Mem(m) => {
            let mut s = format!("(mem {}", m.addr_width().word().bits());
            for (a, b) in m.nonzero_bytes() {
                let _ = write!(s, " ({a:#x} {b:#04x})");
            }
            s.push(')');
            s
        }
    }
}

pub fn parse_env(text: &str) -> R<Env> {
    let mut env = Env::new();
    for item in parse_all(text)? {
        let [n, v] = item.list().unwrap_or_default() else { return bad("expected (NAME VALUE)", &item) };
        env.insert(name(n)?, parse_value(v)?);
    }
    Ok(env)
}

pub fn env_text(env: &Env) -> String {
    env.iter().map(|(n, v)| format!("({n} {})\n", value_text(v))).collect()
}

fn pred_entry(s: &Sexp) -> R<(Label, Arc<BExpr>)> {
    let [l, e] = s.list().unwrap_or_default() else { return bad("expected (LABEL EXPR)", s) };
    Ok((parse_label(l)?, Arc::new(parse_expr(e)?)))
}

pub fn parse_predmap(text: &str) -> R<PredMap> {
    parse_all(text)?.iter().map(pred_entry).collect()
}

pub fn predmap_text(h: &PredMap) -> String {
    h.iter().map(|(l, e)| format!("({l} {e})\n")).collect()
}

/// Pre- and postconditions of a fragment, plus extra declarations.
#[derive(Clone, Debug, Default)]
pub struct Contract {
    pub pre: PredMap,
    pub post: PredMap,
    pub declared: Typing,
}

pub fn parse_contract(text: &str) -> R<Contract> {
    let mut c = Contract::default();
    for item in parse_all(text)? {
        if declare(&item, &mut c.declared)? {
            continue;
        }
        let (map, rest) = match item.head() {
            Some(("pre", rest)) => (&mut c.pre, rest),
            Some(("post", rest)) => (&mut c.post, rest),
            _ => return bad("expected (pre L E), (post L E) or (declare V T)", &item),
        };
        let (l, e) = pred_entry(&Sexp::List(rest.to_vec()))?;
        if map.insert(l, e).is_some() {
            return bad("duplicate label", &item);
        }
    }
    Ok(c)
}

pub fn contract_text(c: &Contract) -> String {
    let mut out = String::new();
    write_declarations(&mut out, &c.declared);
    for (kw, m) in [("pre", &c.pre), ("post", &c.post)] {
        for (l, e) in m {
            let _ = writeln!(out, "({kw} {l} {e})");
        }
    }
    out
}

#[derive(Clone, Debug)]
pub struct GoalFile {
    pub goal: TautologyGoal,
    pub declared: Typing,
}

pub fn parse_goal(text: &str) -> R<GoalFile> {
    let mut declared = Typing::new();
    let mut goal = None;
    for item in parse_all(text)? {
        if declare(&item, &mut declared)? {
            continue;
        }
        match item.head() {
            Some(("goal", [p, c])) if goal.is_none() => {
                goal = Some(TautologyGoal::new(parse_expr(p)?, parse_expr(c)?));
            }
            _ => return bad("expected (declare V T) or a single (goal PREMISE CONCLUSION)", &item),
        }
    }
    match goal {
        Some(goal) => Ok(GoalFile { goal, declared }),
        None => Err(TextError::Form { message: "missing (goal ...)", form: String::new() }),
    }
}

pub fn goal_text(g: &TautologyGoal, declared: &Typing) -> String {
    let mut out = String::new();
    write_declarations(&mut out, declared);
    let _ = writeln!(out, "(goal {} {})", g.premise, g.conclusion);
    out
}

/// `(edge FROM TO)` lines.
pub fn parse_edges(text: &str) -> R<Vec<(Label, Label)>> {
    parse_all(text)?
        .iter()
        .map(|item| match item.head() {
            Some(("edge", [a, b])) => Ok((parse_label(a)?, parse_label(b)?)),
            _ => bad("expected (edge FROM TO)", item),
        })
        .collect()
}

/// Typing map rendered as `{name: "(reg 8)"}` for reports.
pub fn typing_strings(t: &Typing) -> BTreeMap<String, String> {
    t.iter().map(|(k, v)| (k.clone(), type_text(*v))).collect()
}
