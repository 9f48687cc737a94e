//! The typed intermediate language: expressions, values, environments.

pub mod env;
pub mod eval;
pub mod expr;
pub(crate) mod subst;
pub mod types;
pub mod value;

pub use env::Env;
pub use eval::{eval, eval_bool, type_of_expr, TypeError, Typing};
pub use expr::{BExpr, BinOp, UnOp};
pub use subst::{all_names, expand_substs, free_vars, fresh_name, is_free_in, substitute};
pub use types::{AddrWidth, BType, Width};
pub use value::{BValue, Label, Memory, Word};
