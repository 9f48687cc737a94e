use alloc::collections::BTreeMap;
use alloc::string::String;

use super::types::BType;
use super::value::BValue;

/// Variable environment. The type of a binding is the type of its value, so
/// the "declared type matches value" invariant holds by construction.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Env {
    vars: BTreeMap<String, BValue>,
}

impl Env {
    pub fn new() -> Env {
        Env::default()
    }

    pub fn get(&self, name: &str) -> Option<&BValue> {
        self.vars.get(name)
    }

    pub fn get_typed(&self, name: &str) -> Option<(BType, &BValue)> {
        self.vars.get(name).map(|v| (v.ty(), v))
    }

    pub fn insert(&mut self, name: impl Into<String>, value: impl Into<BValue>) -> Option<BValue> {
        self.vars.insert(name.into(), value.into())
    }

    /// Like `insert`, without allocating a key when `name` is bound.
    pub fn set(&mut self, name: &str, value: BValue) {
        match self.vars.get_mut(name) {
            Some(slot) => *slot = value,
            None => {
                self.vars.insert(String::from(name), value);
            }
        }
    }

    pub fn with(mut self, name: impl Into<String>, value: impl Into<BValue>) -> Env {
        self.insert(name, value);
        self
    }

    pub fn remove(&mut self, name: &str) -> Option<BValue> {
        self.vars.remove(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &BValue)> {
        self.vars.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }
}

impl<S: Into<String>, V: Into<BValue>> FromIterator<(S, V)> for Env {
    fn from_iter<I: IntoIterator<Item = (S, V)>>(iter: I) -> Env {
        let mut env = Env::new();
        for (k, v) in iter {
            env.insert(k, v);
        }
        env
    }
}
