//! Generalised algebraic theories and their two-sortification.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, the corpus and
//! the command-line driver live in the `twosort` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod coreflect;
pub mod egraph;
pub mod initial;
pub mod error;
pub mod kernel;
pub mod models;
pub mod normalize;
pub mod parse;
pub mod sortify;
pub mod syntax;

pub use error::{KernelError, ModelError};
pub use kernel::{
    check_substitution, check_theory, compose_substitutions, conv_substitutions, conv_tm, conv_ty, infer_term,
    CheckedTheory, ConvBudget, DeclClass, Verdict,
};
pub use parse::{parse_subst_file, parse_term, parse_theory, parse_type, SubstFile};
pub use syntax::{alpha_eq_tm, alpha_eq_ty, Decl, Name, Substitution, Theory, Tm, Ty};
