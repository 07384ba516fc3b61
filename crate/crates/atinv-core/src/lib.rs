//! Numerical invariants for approximately transitive systems presented by
//! sequences of normalized nonnegative Laurent polynomials.
//!
//! A system is described by a finite rule generating terms `P_m` (module
//! [`families`]). Two kinds of isomorphism invariants are computed:
//!
//! * evaluation invariants — limits of `|P_l(w) ⋯ P_{l+d}(w)|` at circle
//!   points `w` of rational angle, with an infimum over the witness index and
//!   a limit over the start index (module [`engine`]);
//! * mass-loss invariants — limits of l¹ norms `‖p·P_l ⋯ P_{l+d}‖` for
//!   norm-one signed probes `p` (module [`massloss`]).
//!
//! Every reported number carries a rigorous lower/upper bracket derived from
//! monotone truncation plus second-moment or variance tail bounds. Module
//! [`verify`] re-derives the analytic inequalities behind those tail bounds
//! through independent code paths.

pub mod engine;
pub mod error;
pub mod families;
pub mod laurent;
pub mod massloss;
pub mod serialize;
pub mod verify;

pub use engine::{CertifiedValue, EngineOptions, WitnessRule};
pub use error::{Error, Result};
pub use families::{FamilySpec, GeneratorRule, ScaleRule};
pub use laurent::{ExactPoly, FloatPoly, LaurentPoly, RationalAngle};
