use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::syntax::Name;

/// Errors raised by parsing, checking and the syntactic translations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum KernelError {
    Parse {
        line: usize,
        col: usize,
        msg: String,
    },
    /// An ill-typed declaration or assignment. `decl` names the offending
    /// declaration when there is one, `subterm` the failing piece.
    Type {
        decl: Option<Name>,
        subterm: String,
        msg: String,
    },
    /// Conversion ran out of fuel while deciding `lhs ≡ rhs`.
    Indeterminate {
        decl: Option<Name>,
        lhs: String,
        rhs: String,
    },
    /// Substitutions whose endpoints do not line up.
    Mismatch(String),
    Freshness(Name),
    /// Term enumeration asked for more than the configured cap.
    Budget(String),
}

impl KernelError {
    pub(crate) fn ty(subterm: impl fmt::Display, msg: impl Into<String>) -> KernelError {
        KernelError::Type {
            decl: None,
            subterm: alloc::format!("{subterm}"),
            msg: msg.into(),
        }
    }

    /// Attaches a declaration name if none is recorded yet.
    pub fn in_decl(self, name: &Name) -> KernelError {
        match self {
            KernelError::Type {
                decl: None,
                subterm,
                msg,
            } => KernelError::Type {
                decl: Some(name.clone()),
                subterm,
                msg,
            },
            KernelError::Indeterminate {
                decl: None,
                lhs,
                rhs,
            } => KernelError::Indeterminate {
                decl: Some(name.clone()),
                lhs,
                rhs,
            },
            other => other,
        }
    }

    pub fn is_indeterminate(&self) -> bool {
        matches!(self, KernelError::Indeterminate { .. })
    }
}

impl fmt::Display for KernelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelError::Parse { line, col, msg } => {
                write!(f, "parse error at {line}:{col}: {msg}")
            }
            KernelError::Type { decl, subterm, msg } => {
                f.write_str("type error")?;
                if let Some(d) = decl {
                    write!(f, " in declaration {d}")?;
                }
                write!(f, ": {msg} (at `{subterm}`)")
            }
            KernelError::Indeterminate { decl, lhs, rhs } => {
                f.write_str("indeterminate")?;
                if let Some(d) = decl {
                    write!(f, " in declaration {d}")?;
                }
                write!(f, ": conversion fuel exhausted comparing `{lhs}` and `{rhs}`")
            }
            KernelError::Mismatch(m) => write!(f, "mismatch: {m}"),
            KernelError::Freshness(n) => write!(f, "name {n} is not fresh for the theory"),
            KernelError::Budget(m) => write!(f, "budget exceeded: {m}"),
        }
    }
}

/// Errors of the finite semantics.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ModelError {
    /// A value does not have the shape its declaration's type demands.
    Shape { decl: Name, msg: String },
    /// A function table is not total over its domain.
    Totality { decl: Name, msg: String },
    /// An equation fails at the given binder assignment.
    Equation {
        decl: Name,
        counterexample: Vec<(Name, String)>,
    },
    /// Application of a table outside its domain.
    Domain(String),
    /// A morphism fails to commute with an operation at the given arguments.
    Hom { decl: Name, tuple: Vec<String> },
    SearchSpaceExceeded { candidates: u128, cap: u128 },
    NotSaturated,
    WellDefinedness(String),
    /// A comma object whose map is not cartesian or whose data disagree.
    Invariant(String),
    Kernel(KernelError),
}

impl From<KernelError> for ModelError {
    fn from(e: KernelError) -> Self {
        ModelError::Kernel(e)
    }
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelError::Shape { decl, msg } => write!(f, "shape error in {decl}: {msg}"),
            ModelError::Totality { decl, msg } => write!(f, "totality error in {decl}: {msg}"),
            ModelError::Equation {
                decl,
                counterexample,
            } => {
                write!(f, "equation {decl} fails")?;
                if !counterexample.is_empty() {
                    f.write_str(" at")?;
                    for (x, v) in counterexample {
                        write!(f, " {x}={v}")?;
                    }
                }
                Ok(())
            }
            ModelError::Domain(m) => write!(f, "domain error: {m}"),
            ModelError::Hom { decl, tuple } => {
                write!(f, "not a homomorphism: {decl} fails at ({})", tuple.join(","))
            }
            ModelError::SearchSpaceExceeded { candidates, cap } => {
                write!(f, "search space of {candidates} candidates exceeds cap {cap}")
            }
            ModelError::NotSaturated => f.write_str("initial model is not saturated"),
            ModelError::WellDefinedness(m) => write!(f, "ill-defined initial morphism: {m}"),
            ModelError::Invariant(m) => write!(f, "invariant violated: {m}"),
            ModelError::Kernel(e) => write!(f, "{e}"),
        }
    }
}
