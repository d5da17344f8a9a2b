//! Exact computations on trinomial hypersurfaces `T0^l0 + T1^l1 + T2^l2 = 0`:
//! rigidity and flexibility types, locally nilpotent derivations and their
//! flows, vanishing-set strata, automorphism-orbit descriptors and finite-field
//! oracles.
//!
//! Every algorithm is generic over an exact [`Field`]; the aliases below fix
//! the two supported scalar types.

pub mod field;
pub mod harness;
pub mod lattice;
pub mod lnd;
pub mod model;
pub mod orbits;
pub mod poly;
pub mod strata;
pub mod wire;

pub use field::{Field, FieldCtx, FieldError, Fp, Rational};
pub use model::{HType, RigidityVerdict, TrinomialShape};
pub use poly::{Monomial, Poly, PolyError, VarId};

/// Polynomials with arbitrary-precision rational coefficients.
pub type QPoly = Poly<Rational>;
/// Polynomials over a prime field.
pub type FpPoly = Poly<Fp>;
/// Points with rational coordinates, in canonical variable order.
pub type QPoint = Vec<Rational>;
/// Points over a prime field, in canonical variable order.
pub type FpPoint = Vec<Fp>;
