use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use super::PredMap;
use crate::bir::{eval_bool, BValue, Env, Label};
use crate::sem::{weak_exec, Pc, Program, State};

/// Finite environment space: every combination of the listed values.
#[derive(Clone, Debug, Default)]
pub struct EnvDomain {
    vars: Vec<(String, Vec<BValue>)>,
}

impl EnvDomain {
    pub fn new() -> EnvDomain {
        EnvDomain::default()
    }

    pub fn with(mut self, name: impl Into<String>, values: Vec<BValue>) -> EnvDomain {
        self.vars.push((name.into(), values));
        self
    }

    pub fn size(&self) -> u128 {
        self.vars.iter().map(|(_, vs)| vs.len() as u128).product()
    }

    /// Visits every extension of `base` by this domain, overwriting the
    /// domain's variables in place. Stops early when `f` returns false.
    pub fn all_extensions(&self, base: &mut Env, f: &mut impl FnMut(&Env) -> bool) -> bool {
        self.extend_from(0, base, f)
    }

    fn extend_from(&self, k: usize, env: &mut Env, f: &mut impl FnMut(&Env) -> bool) -> bool {
        let Some((name, vs)) = self.vars.get(k) else {
            return f(env);
        };
        for v in vs {
            env.set(name, v.clone());
            if !self.extend_from(k + 1, env, f) {
                return false;
            }
        }
        true
    }

    pub fn iter(&self) -> impl Iterator<Item = Env> + '_ {
        let n = self.vars.len();
        let mut idx: Option<Vec<usize>> =
            if self.vars.iter().any(|(_, vs)| vs.is_empty()) { None } else { Some(alloc::vec![0; n]) };
        core::iter::from_fn(move || {
            let cur = idx.as_mut()?;
            let env: Env = self.vars.iter().zip(cur.iter()).map(|((k, vs), &i)| (k.clone(), vs[i].clone())).collect();
            let mut k = 0;
            loop {
                if k == n {
                    idx = None;
                    break;
                }
                cur[k] += 1;
                if cur[k] < self.vars[k].1.len() {
                    break;
                }
                cur[k] = 0;
                k += 1;
            }
            Some(env)
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FailureKind {
    /// The precondition does not evaluate to a `Reg1` value.
    PreUndefined,
    Halted(Pc),
    PostFalse(Label),
    PostUndefined(Label),
}

/// A start state satisfying the precondition whose run ends badly.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TripleFailure {
    pub env: Env,
    pub entry: Label,
    pub kind: FailureKind,
}

impl fmt::Display for TripleFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "from {} ", self.entry)?;
        match &self.kind {
            FailureKind::PreUndefined => f.write_str("the precondition is undefined")?,
            FailureKind::Halted(pc) => write!(f, "execution reaches {pc}")?,
            FailureKind::PostFalse(l) => write!(f, "the postcondition at {l} is false")?,
            FailureKind::PostUndefined(l) => write!(f, "the postcondition at {l} is undefined")?,
        }
        f.write_str(" in")?;
        for (k, v) in self.env.iter() {
            write!(f, " {k}={v:?}")?;
        }
        Ok(())
    }
}

/// Outcome counts of an exhaustive triple check.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TripleStats {
    pub starts: u64,
    pub pre_held: u64,
    pub diverged: u64,
}

/// Checks `{pre} p {post}` over every environment of `domain` and every
/// label of `pre`. Runs stop at labels of `post`; a diverging run counts
/// as satisfying the triple.
pub fn check_triple_exhaustive(
    p: &Program,
    pre: &PredMap,
    post: &PredMap,
    domain: &EnvDomain,
    fuel: u64,
) -> Result<TripleStats, TripleFailure> {
    let stops: BTreeSet<Label> = post.keys().cloned().collect();
    let mut stats = TripleStats::default();
    for env in domain.iter() {
        for (entry, pred) in pre {
            stats.starts += 1;
            let fail = |kind| TripleFailure { env: env.clone(), entry: entry.clone(), kind };
            match eval_bool(pred, &env) {
                Ok(true) => stats.pre_held += 1,
                Ok(false) => continue,
                Err(_) => return Err(fail(FailureKind::PreUndefined)),
            }
            let end = match weak_exec(p, State::new(env.clone(), entry.clone()), &stops, fuel) {
                Ok(s) => s,
                Err(_) => {
                    stats.diverged += 1;
                    continue;
                }
            };
            let l = match end.pc {
                Pc::Label(l) => l,
                pc => return Err(fail(FailureKind::Halted(pc))),
            };
            match eval_bool(&post[&l], &end.env) {
                Ok(true) => {}
                Ok(false) => return Err(fail(FailureKind::PostFalse(l))),
                Err(_) => return Err(fail(FailureKind::PostUndefined(l))),
            }
        }
    }
    Ok(stats)
}
