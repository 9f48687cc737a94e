use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::bir::{BType, BValue, Env, Memory, Width, Word};
use crate::sexp::{parse_all, Sexp};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ModelValue {
    Word(Word),
    /// A byte array: `default` everywhere except `bytes`.
    Array {
        default: u8,
        bytes: BTreeMap<u64, u8>,
    },
    /// A value in a form we do not decode, as printed by the solver.
    Raw(String),
}

impl fmt::Display for ModelValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelValue::Word(w) => write!(f, "{:#x}:{}", w.bits(), w.width()),
            ModelValue::Array { default, bytes } => {
                write!(f, "[default {default:#04x}")?;
                for (a, b) in bytes {
                    write!(f, ", {a:#x}: {b:#04x}")?;
                }
                f.write_str("]")
            }
            ModelValue::Raw(s) => f.write_str(s),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Model {
    pub values: Vec<(String, ModelValue)>,
}

impl Model {
    pub fn get(&self, name: &str) -> Option<&ModelValue> {
        self.values.iter().find(|(n, _)| n == name).map(|(_, v)| v)
    }

    /// The model as a BIR environment. Arrays must default to zero; others
    /// are reported by name.
    pub fn to_env(&self, typing: &crate::bir::Typing) -> Result<Env, String> {
        self.to_env_over(typing, 0..0)
    }

    /// Like [`Model::to_env`], but a nonzero array default is written to
    /// every address of `span`. Faithful only for expressions that read
    /// memory inside `span`.
    pub fn to_env_over(&self, typing: &crate::bir::Typing, span: core::ops::Range<u64>) -> Result<Env, String> {
        let mut env = Env::new();
        for (n, v) in &self.values {
            let value = match (v, typing.get(n)) {
                (ModelValue::Word(w), _) => BValue::Word(*w),
                (ModelValue::Array { default, bytes }, Some(BType::Mem(a))) if *default == 0 || !span.is_empty() => {
                    let mut m = Memory::new(*a);
                    for addr in span.clone() {
                        m.set_byte(addr, *default);
                    }
                    for (k, b) in bytes {
                        m.set_byte(*k, *b);
                    }
                    BValue::Mem(m)
                }
                _ => return Err(n.clone()),
            };
            env.insert(n.as_str(), value);
        }
        Ok(env)
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (n, v)) in self.values.iter().enumerate() {
            if i > 0 {
                f.write_str("\n")?;
            }
            write!(f, "{n} = {v}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Answer {
    Unsat,
    Sat(Model),
    Unknown(String),
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("malformed solver output: {0}")]
pub struct MalformedOutput(pub String);

fn bad(msg: impl Into<String>) -> MalformedOutput {
    MalformedOutput(msg.into())
}

fn literal(s: &Sexp) -> Option<Word> {
    if let Some(a) = s.atom() {
        let (digits, radix, per) = if let Some(d) = a.strip_prefix("#b") {
            (d, 2, 1)
        } else if let Some(d) = a.strip_prefix("#x") {
            (d, 16, 4)
        } else {
            return None;
        };
        let w = Width::from_bits(u32::try_from(digits.len() * per).ok()?)?;
        return Some(Word::new(w, u64::from_str_radix(digits, radix).ok()?));
    }
    let l = s.list()?;
    match l {
        [u, bv, n] if u.atom() == Some("_") => {
            let v = bv.atom()?.strip_prefix("bv")?.parse::<u64>().ok()?;
            let w = Width::from_bits(n.atom()?.parse().ok()?)?;
            Some(Word::new(w, v))
        }
        _ => None,
    }
}

fn byte(s: &Sexp) -> Option<u8> {
    literal(s).filter(|w| w.width() == Width::W8).map(|w| w.bits() as u8)
}

/// Decodes constant arrays, store chains and the `lambda`/`ite` form.
fn array(s: &Sexp) -> Option<(u8, BTreeMap<u64, u8>)> {
    let l = s.list()?;
    if let [head, v] = l {
        if head.head().map(|(h, _)| h) == Some("as") {
            return Some((byte(v)?, BTreeMap::new()));
        }
    }
    match s.head()? {
        ("store", [a, i, v]) => {
            let (d, mut m) = array(a)?;
            m.insert(literal(i)?.bits(), byte(v)?);
            Some((d, m))
        }
        ("lambda", [params, body]) => {
            let x = params.list()?.first()?.list()?.first()?.atom()?;
            lambda_body(x, body, BTreeMap::new())
        }
        _ => None,
    }
}

fn lambda_body(x: &str, body: &Sexp, mut m: BTreeMap<u64, u8>) -> Option<(u8, BTreeMap<u64, u8>)> {
    if let Some(d) = byte(body) {
        return Some((d, m));
    }
    match body.head()? {
        ("ite", [c, v, rest]) => {
            let v = byte(v)?;
            for a in equalities(x, c)? {
                m.entry(a).or_insert(v);
            }
            lambda_body(x, rest, m)
        }
        _ => None,
    }
}

/// Addresses `a` with `c` equivalent to a disjunction of `x = a`.
fn equalities(x: &str, c: &Sexp) -> Option<Vec<u64>> {
    match c.head()? {
        ("=", [a, b]) => {
            let lit = if a.atom() == Some(x) {
                b
            } else if b.atom() == Some(x) {
                a
            } else {
                return None;
            };
            Some(alloc::vec![literal(lit)?.bits()])
        }
        ("or", parts) => {
            let mut out = Vec::new();
            for p in parts {
                out.extend(equalities(x, p)?);
            }
            Some(out)
        }
        _ => None,
    }
}

/// Inlines `(let ((x e) ...) body)` bindings, which solvers use to share
/// subterms of array values.
fn inline_lets(s: &Sexp, scope: &BTreeMap<String, Sexp>) -> Sexp {
    match s {
        Sexp::Atom(a) => scope.get(a).cloned().unwrap_or_else(|| s.clone()),
        Sexp::Str(_) => s.clone(),
        Sexp::List(items) => {
            if let Some(("let", [Sexp::List(binds), body])) = s.head() {
                let mut inner = scope.clone();
                for b in binds {
                    if let Some([Sexp::Atom(x), e]) = b.list() {
                        inner.insert(x.clone(), inline_lets(e, scope));
                    }
                }
                return inline_lets(body, &inner);
            }
            Sexp::List(items.iter().map(|x| inline_lets(x, scope)).collect())
        }
    }
}

fn value(s: &Sexp, ty: BType) -> Result<ModelValue, MalformedOutput> {
    let s = &inline_lets(s, &BTreeMap::new());
    match ty {
        BType::Reg(w) => match literal(s) {
            Some(v) if v.width() == w => Ok(ModelValue::Word(v)),
            _ => Err(bad(format!("expected a {}-bit value, got {s}", w.bits()))),
        },
        BType::Mem(_) => Ok(match array(s) {
            Some((default, bytes)) => ModelValue::Array { default, bytes },
            None => ModelValue::Raw(s.to_string()),
        }),
        BType::Label => Err(bad("label-typed variable in a model")),
    }
}

/// Reads the answer to a script built by `implication_query`.
pub fn parse_answer(text: &str, vars: &[(String, BType)]) -> Result<Answer, MalformedOutput> {
    let items = parse_all(text).map_err(|e| bad(e.to_string()))?;
    let mut it = items.iter();
    let first = it.next().ok_or_else(|| bad("empty output"))?;
    match first.atom() {
        Some("unsat") => return Ok(Answer::Unsat),
        Some("unknown") => return Ok(Answer::Unknown(String::from("unknown"))),
        Some("timeout") => return Ok(Answer::Unknown(String::from("timeout"))),
        Some("sat") => {}
        _ => return Err(bad(format!("unexpected first response {first}"))),
    }
    let mut model = Model::default();
    if vars.is_empty() {
        return Ok(Answer::Sat(model));
    }
    let pairs = it.next().and_then(Sexp::list).ok_or_else(|| bad("missing get-value response"))?;
    for p in pairs {
        let [name, v] = p.list().ok_or_else(|| bad(format!("bad model entry {p}")))? else {
            return Err(bad(format!("bad model entry {p}")));
        };
        let name = name.atom().ok_or_else(|| bad(format!("bad model entry {p}")))?;
        let ty = vars
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| *t)
            .ok_or_else(|| bad(format!("unexpected symbol {name}")))?;
        model.values.push((String::from(name), value(v, ty)?));
    }
    if model.values.len() != vars.len() {
        return Err(bad("model is missing values"));
    }
    Ok(Answer::Sat(model))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bir::AddrWidth;
    use alloc::vec;

    fn vars() -> Vec<(String, BType)> {
        vec![("X".into(), BType::Reg(Width::W8)), ("M".into(), BType::Mem(AddrWidth::A32))]
    }

    #[test]
    fn unsat_ignores_trailing_errors() {
        let out = "unsat\n(error \"line 7 column 10: model is not available\")\n";
        assert_eq!(parse_answer(out, &vars()), Ok(Answer::Unsat));
    }

    #[test]
    fn sat_with_lambda_memory() {
        let out = "sat\n((|X| #x05)\n (|M| (lambda ((x!1 (_ BitVec 32))) (ite (= x!1 #x00000002) #x07 (ite (or (= x!1 #x00000001) (= #x00000003 x!1)) #x09 #x00)))))\n";
        let Answer::Sat(m) = parse_answer(out, &vars()).unwrap() else { panic!() };
        assert_eq!(m.get("X"), Some(&ModelValue::Word(Word::new(Width::W8, 5))));
        let env = m.to_env(&vars().into_iter().collect()).unwrap();
        let mem = env.get("M").unwrap().as_mem().unwrap();
        assert_eq!((mem.byte(1), mem.byte(2), mem.byte(3), mem.byte(4)), (9, 7, 9, 0));
    }

    #[test]
    fn sat_with_store_chain() {
        let out =
            "sat ((X (_ bv200 8)) (M (store ((as const (Array (_ BitVec 32) (_ BitVec 8))) #x01) #x00000000 #xff)))";
        let Answer::Sat(m) = parse_answer(out, &vars()).unwrap() else { panic!() };
        assert_eq!(m.get("M"), Some(&ModelValue::Array { default: 1, bytes: [(0, 0xff)].into_iter().collect() }));
        assert_eq!(m.to_env(&vars().into_iter().collect()), Err("M".into()));
        assert!(m.to_string().contains("X = 0xc8:8"));
    }

    #[test]
    fn let_bound_arrays() {
        let out = "sat ((X #x00) (M (let ((a!1 (store ((as const (Array (_ BitVec 32) (_ BitVec 8))) #x00) #x00000001 #x05))) (store a!1 #x00000002 #x06))))";
        let Answer::Sat(m) = parse_answer(out, &vars()).unwrap() else { panic!() };
        assert_eq!(m.get("M"), Some(&ModelValue::Array { default: 0, bytes: [(1, 5), (2, 6)].into_iter().collect() }));
    }

    #[test]
    fn malformed_outputs() {
        assert!(parse_answer("", &vars()).is_err());
        assert!(parse_answer("(error \"x\")", &vars()).is_err());
        assert!(parse_answer("sat\n((|X| #b1))", &vars()).is_err());
        assert!(parse_answer("sat\n((|X| #x01)", &vars()).is_err());
        assert_eq!(parse_answer("unknown", &vars()), Ok(Answer::Unknown("unknown".into())));
    }
}
