//! Constructive solution operators for the ∂̄ equation on discs, products of
//! discs, and the Hartogs triangle, together with the measurement apparatus
//! (weighted Sobolev norms, Muckenhoupt-type weight constants, Hardy-type
//! inequalities) and the divergence experiments that certify optimality of
//! the regularity indices.
//!
//! The crate keeps two parallel evaluation routes everywhere: an exact
//! symbolic route on expanded polynomial normal forms (including branch
//! powers like `(z2-1)^0.6` carried as opaque factors), and a numeric
//! quadrature route for data outside the symbolic scope. Acceptance-grade
//! identities are asserted on the symbolic route; the numeric route is held
//! to quadrature-level tolerances.

pub mod battery;
pub mod cauchy;
pub mod domains;
pub mod error;
pub mod expr;
pub mod fit;
pub mod form;
pub mod hardy;
pub mod hartogs;
pub mod parse;
pub mod poly;
pub mod product;
pub mod transport;
pub mod weights;

pub use error::{Error, Result};
pub use expr::{CExpr, DKind, Point, Var};
pub use form::Form;
pub use parse::parse;
pub use poly::{normalize, Poly};
