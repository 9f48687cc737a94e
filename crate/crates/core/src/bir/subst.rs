use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;

use super::expr::BExpr;

/// Free variables. In `Subst(r, v, body)`, `v` is bound in `body` only.
pub fn free_vars(e: &BExpr) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    collect_free(e, &mut out);
    out
}

fn collect_free(e: &BExpr, out: &mut BTreeSet<String>) {
    match e {
        BExpr::Var(v) => {
            out.insert(v.clone());
        }
        BExpr::Subst(r, v, body) => {
            collect_free(r, out);
            let mut inner = BTreeSet::new();
            collect_free(body, &mut inner);
            inner.remove(v);
            out.extend(inner);
        }
        _ => e.children().for_each(|c| collect_free(c, out)),
    }
}

pub fn is_free_in(v: &str, e: &BExpr) -> bool {
    match e {
        BExpr::Var(x) => x == v,
        BExpr::Subst(r, x, body) => is_free_in(v, r) || (x != v && is_free_in(v, body)),
        _ => e.children().any(|c| is_free_in(v, c)),
    }
}

/// Every variable name mentioned in `e`, free or bound.
pub fn all_names(e: &BExpr) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    collect_names(e, &mut out);
    out
}

pub(crate) fn collect_names(e: &BExpr, out: &mut BTreeSet<String>) {
    match e {
        BExpr::Var(v) => {
            out.insert(v.clone());
        }
        BExpr::Subst(_, v, _) => {
            out.insert(v.clone());
        }
        _ => {}
    }
    e.children().for_each(|c| collect_names(c, out));
}

/// First of `hint`, `hint_1`, `hint_2`, ... not in `avoid`.
pub fn fresh_name(avoid: &BTreeSet<String>, hint: &str) -> String {
    if !avoid.contains(hint) {
        return String::from(hint);
    }
    (1u64..).map(|i| format!("{hint}_{i}")).find(|n| !avoid.contains(n)).expect("name space exhausted")
}

/// Replaces every occurrence of `v` in the Subst-free expression `e` by
/// `replacement`. Shared sub-expressions are rewritten once and stay shared.
pub fn substitute(e: &Arc<BExpr>, v: &str, replacement: &Arc<BExpr>) -> Arc<BExpr> {
    let mut memo = BTreeMap::new();
    subst_memo(e, v, replacement, &mut memo)
}

fn subst_memo(e: &Arc<BExpr>, v: &str, r: &Arc<BExpr>, memo: &mut BTreeMap<usize, Arc<BExpr>>) -> Arc<BExpr> {
    let key = Arc::as_ptr(e) as usize;
    if let Some(done) = memo.get(&key) {
        return done.clone();
    }
    let mut go = |c: &Arc<BExpr>| subst_memo(c, v, r, memo);
    let out = match &**e {
        BExpr::Var(x) if x == v => r.clone(),
        BExpr::Const(_) | BExpr::Label(_) | BExpr::Var(_) => e.clone(),
        BExpr::Ite(a, b, c) => Arc::new(BExpr::Ite(go(a), go(b), go(c))),
        BExpr::Un(op, a) => Arc::new(BExpr::Un(*op, go(a))),
        BExpr::Bin(op, a, b) => Arc::new(BExpr::Bin(*op, go(a), go(b))),
        BExpr::Load(m, a, w) => Arc::new(BExpr::Load(go(m), go(a), *w)),
        BExpr::Store(m, a, x, w) => Arc::new(BExpr::Store(go(m), go(a), go(x), *w)),
        BExpr::Subst(..) => panic!("substitute called on an expression containing Subst"),
    };
    memo.insert(key, out.clone());
    out
}

/// Eagerly applies every explicit substitution (innermost first). The
/// result is Subst-free and shares repeated replacements; its tree size is
/// what a naive substitution-expanding generator would produce.
pub fn expand_substs(e: &Arc<BExpr>) -> Arc<BExpr> {
    let mut memo = BTreeMap::new();
    expand_memo(e, &mut memo)
}

fn expand_memo(e: &Arc<BExpr>, memo: &mut BTreeMap<usize, Arc<BExpr>>) -> Arc<BExpr> {
    let key = Arc::as_ptr(e) as usize;
    if let Some(done) = memo.get(&key) {
        return done.clone();
    }
    let mut go = |c: &Arc<BExpr>| expand_memo(c, memo);
    let out = match &**e {
        BExpr::Const(_) | BExpr::Label(_) | BExpr::Var(_) => e.clone(),
        BExpr::Ite(a, b, c) => Arc::new(BExpr::Ite(go(a), go(b), go(c))),
        BExpr::Un(op, a) => Arc::new(BExpr::Un(*op, go(a))),
        BExpr::Bin(op, a, b) => Arc::new(BExpr::Bin(*op, go(a), go(b))),
        BExpr::Load(m, a, w) => Arc::new(BExpr::Load(go(m), go(a), *w)),
        BExpr::Store(m, a, x, w) => Arc::new(BExpr::Store(go(m), go(a), go(x), *w)),
        BExpr::Subst(r, v, body) => {
            let r = go(r);
            let body = go(body);
            substitute(&body, v, &r)
        }
    };
    memo.insert(key, out.clone());
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bir::expr::*;

    fn set(names: &[&str]) -> BTreeSet<String> {
        names.iter().map(|s| String::from(*s)).collect()
    }

    #[test]
    fn free_vars_respect_binding() {
        // {X+X/Y}({Y+Y/Z}(Z + Y))
        let e = subst(add(var("X"), var("X")), "Y", subst(add(var("Y"), var("Y")), "Z", add(var("Z"), var("Y"))));
        assert_eq!(free_vars(&e), set(&["X"]));
        assert_eq!(free_vars(&var("X")), set(&["X"]));
        assert!(free_vars(&word(crate::bir::Width::W8, 0)).is_empty());
        assert_eq!(all_names(&e), set(&["X", "Y", "Z"]));
    }

    #[test]
    fn fresh_names_count_up() {
        assert_eq!(fresh_name(&set(&["y"]), "y"), "y_1");
        assert_eq!(fresh_name(&set(&[]), "y"), "y");
        assert_eq!(fresh_name(&set(&["y", "y_1"]), "y"), "y_2");
    }

    #[test]
    fn expansion_doubles_per_level() {
        let mut body = eq(var("Y4"), w64(0));
        for i in (1..=4).rev() {
            let prev = if i == 1 { String::from("X") } else { format!("Y{}", i - 1) };
            body = subst(add(var(prev.clone()), var(prev)), format!("Y{i}"), body);
        }
        let expanded = expand_substs(&Arc::new(body));
        assert!(!expanded.contains_subst());
        assert_eq!(expanded.var_occurrences(), 16);
        assert_eq!(free_vars(&expanded), set(&["X"]));
    }
}
