use alloc::vec::Vec;

use super::{Simplified, TautologyGoal};
use crate::bir::{eval_bool, BType, BValue, Env, TypeError, Typing};
use crate::wp::EnvDomain;

/// Fresh variables wider than this are not enumerated.
const MAX_FRESH_BITS: u32 = 8;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    #[error("fresh variable {0} has a type too large to enumerate")]
    Unenumerable(alloc::string::String),
    #[error("ill-typed: {0}")]
    Type(TypeError),
}

/// An environment where the original goal and the simplified one disagree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OracleFailure {
    pub env: Env,
    pub original: bool,
    pub simplified: bool,
}

fn values(ty: BType) -> Option<Vec<BValue>> {
    match ty {
        BType::Reg(w) if w.bits() <= MAX_FRESH_BITS => {
            Some((0..1u64 << w.bits()).map(|v| BValue::word(w, v)).collect())
        }
        _ => None,
    }
}

/// Brute-force check that for every environment of `domain`,
/// `P ⇒ P'` (substitutions evaluated as let-bindings) holds exactly when
/// `P ⇒ P''` holds for all values of the fresh variables. The pointwise
/// agreement implies agreement of the two validity questions.
pub fn equisatisfiable_oracle(
    goal: &TautologyGoal,
    simplified: &Simplified,
    typing: &Typing,
    domain: &EnvDomain,
) -> Result<Result<u64, OracleFailure>, OracleError> {
    let t = simplified.typing(typing).map_err(OracleError::Type)?;
    let mut fresh = EnvDomain::new();
    for f in &simplified.fresh {
        let vs = values(t[&f.name]).ok_or_else(|| OracleError::Unenumerable(f.name.clone()))?;
        fresh = fresh.with(f.name.clone(), vs);
    }
    let original = goal.implication();
    let after =
        TautologyGoal { premise: goal.premise.clone(), conclusion: simplified.conclusion.clone() }.implication();
    let mut checked = 0;
    for env in domain.iter() {
        let lhs = eval_bool(&original, &env).map_err(OracleError::Type)?;
        let mut err = None;
        let rhs = fresh.all_extensions(&mut env.clone(), &mut |e| match eval_bool(&after, e) {
            Ok(b) => b,
            Err(t) => {
                err = Some(t);
                false
            }
        });
        if let Some(t) = err {
            return Err(OracleError::Type(t));
        }
        if lhs != rhs {
            return Ok(Err(OracleFailure { env, original: lhs, simplified: rhs }));
        }
        checked += 1;
    }
    Ok(Ok(checked))
}

#[cfg(test)]
mod tests {
    use super::super::{simplify, tests::worked_example};
    use super::*;
    use crate::bir::expr::*;
    use crate::bir::Width;
    use alloc::sync::Arc;

    fn reg8_domain() -> EnvDomain {
        EnvDomain::new().with("X", (0..256).map(|v| BValue::word(Width::W8, v)).collect())
    }

    fn x8() -> Typing {
        [("X".into(), BType::Reg(Width::W8))].into_iter().collect()
    }

    #[test]
    fn worked_example_is_equivalent() {
        let g = worked_example();
        let s = simplify(&g);
        assert_eq!(equisatisfiable_oracle(&g, &s, &x8(), &reg8_domain()), Ok(Ok(256)));
    }

    #[test]
    fn detects_a_broken_simplification() {
        let g = worked_example();
        let mut s = simplify(&g);
        // Dropping the first equation leaves Y_1 unconstrained.
        if let crate::bir::BExpr::Bin(_, _, rest) = &*s.conclusion {
            s.conclusion = rest.clone();
        }
        let r = equisatisfiable_oracle(&g, &s, &x8(), &reg8_domain()).unwrap();
        assert!(r.is_err());
    }

    #[test]
    fn wide_fresh_variables_are_refused() {
        let g = TautologyGoal::new(tt(), Arc::new(subst(zext(Width::W32, var("X")), "W", eq(var("W"), var("W")))));
        let s = simplify(&g);
        assert!(matches!(equisatisfiable_oracle(&g, &s, &x8(), &reg8_domain()), Err(OracleError::Unenumerable(_))));
    }
}
