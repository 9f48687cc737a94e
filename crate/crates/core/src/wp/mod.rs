//! Weakest preconditions for loop-free BIR fragments.

pub mod cfg;
pub mod propagate;
pub mod triple;

use alloc::collections::BTreeMap;
use alloc::sync::Arc;

use crate::bir::{BExpr, Label};

pub use cfg::{build_cfg, Cfg};
pub use propagate::{wp_block, wp_cf, wp_fragment, wp_stmt, WpError, WpIter};
pub use triple::{check_triple_exhaustive, EnvDomain, FailureKind, TripleFailure, TripleStats};

/// Partial map from labels to `Reg1` predicates.
pub type PredMap = BTreeMap<Label, Arc<BExpr>>;
