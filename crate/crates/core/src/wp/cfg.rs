use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use crate::bir::Label;
use crate::sem::Program;

/// Control-flow graph over constant jump targets.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Cfg {
    /// Block labels.
    pub nodes: BTreeSet<Label>,
    pub edges: BTreeSet<(Label, Label)>,
    /// Blocks without predecessors.
    pub entries: BTreeSet<Label>,
    /// Jump targets that are not blocks.
    pub exits: BTreeSet<Label>,
    /// Blocks with at least one non-constant jump target.
    pub unresolved: BTreeSet<Label>,
}

impl Cfg {
    pub fn successors<'a>(&'a self, l: &'a Label) -> impl Iterator<Item = &'a Label> + 'a {
        self.edges.range((l.clone(), Label::Addr(0))..).take_while(move |(a, _)| a == l).map(|(_, b)| b)
    }

    pub fn predecessors(&self) -> BTreeMap<&Label, Vec<&Label>> {
        let mut m: BTreeMap<&Label, Vec<&Label>> = BTreeMap::new();
        for (a, b) in &self.edges {
            m.entry(b).or_default().push(a);
        }
        m
    }

    /// Some cycle through blocks reachable from `from`, as a label path
    /// whose last element repeats the first.
    pub fn find_cycle(&self, from: &BTreeSet<Label>) -> Option<Vec<Label>> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            Active,
            Done,
        }
        let mut marks: BTreeMap<Label, Mark> = BTreeMap::new();
        for root in from {
            if marks.contains_key(root) {
                continue;
            }
            // Iterative DFS keeping the current path.
            let mut path: Vec<Label> = alloc::vec![root.clone()];
            let mut iters: Vec<Vec<Label>> = alloc::vec![self.successors(root).cloned().collect()];
            marks.insert(root.clone(), Mark::Active);
            while let Some(top) = iters.last_mut() {
                match top.pop() {
                    Some(next) => match marks.get(&next) {
                        Some(Mark::Active) => {
                            let start = path.iter().position(|l| *l == next).unwrap();
                            let mut cyc: Vec<Label> = path[start..].to_vec();
                            cyc.push(next);
                            return Some(cyc);
                        }
                        Some(Mark::Done) => {}
                        None => {
                            marks.insert(next.clone(), Mark::Active);
                            iters.push(self.successors(&next).cloned().collect());
                            path.push(next);
                        }
                    },
                    None => {
                        iters.pop();
                        if let Some(l) = path.pop() {
                            marks.insert(l, Mark::Done);
                        }
                    }
                }
            }
        }
        None
    }
}

pub fn build_cfg(p: &Program) -> Cfg {
    let mut g = Cfg::default();
    for b in p.blocks() {
        g.nodes.insert(b.label.clone());
        for t in b.cf.targets() {
            match t.as_label() {
                Some(l) => {
                    g.edges.insert((b.label.clone(), l));
                }
                None => {
                    g.unresolved.insert(b.label.clone());
                }
            }
        }
    }
    let targets: BTreeSet<&Label> = g.edges.iter().map(|(_, b)| b).collect();
    g.exits = targets.iter().filter(|l| !g.nodes.contains(**l)).map(|l| (*l).clone()).collect();
    g.entries = g.nodes.iter().filter(|l| !targets.contains(l)).cloned().collect();
    g
}
