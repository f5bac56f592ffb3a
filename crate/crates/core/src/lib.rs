//! # ncergo-core
//!
//! A numerical laboratory for noncommutative ergodic theory over finite-dimensional
//! matrix algebras.
//!
//! The crate models a noncommutative probability space `(A, φ)` as a block-diagonal
//! matrix algebra `A = M_{d_1} ⊕ … ⊕ M_{d_m}` carrying a faithful state given by a
//! density matrix, and builds on top of it:
//!
//! - [`space`]: states, the GNS inner product, the modular group and weighted L^p norms.
//! - [`maps`]: linear maps between spaces, complete positivity, stationarity, the two
//!   adjoints (state-adjoint and KMS adjoint), L^p contraction checks.
//! - [`subalgebra`]: unital *-subalgebras, fixed-point algebras of automorphism
//!   families and state-preserving conditional expectations.
//! - [`free`]: free-group sphere and Cesàro averages, both by brute-force word
//!   enumeration and through the Markov operator `P` on `A^I` whose powers encode them.
//! - [`dilation`]: the finite stages of the path-algebra dilation of `P` and the
//!   Markov-property equalities it satisfies.
//! - [`rota`]: the algebraic identities linking `P`, `P*` and the symmetry `U`, the
//!   alternating sequence `Pⁿ(P*)ⁿ` and limit identification for sphere averages.
//!
//! Every value is immutable after construction and all operations are pure, so values
//! can be shared freely between threads.

#![forbid(unsafe_code)]

pub mod dilation;
pub mod error;
pub mod fixtures;
pub mod free;
pub mod linalg;
pub mod maps;
pub mod report;
pub mod rota;
pub mod series;
pub mod space;
pub mod subalgebra;
pub mod tuple;

pub use error::{Error, Result};
pub use maps::{Check, CpMap, CpWitness, MapFlags, StationarityReport};
pub use report::CheckRecord;
pub use series::{ConvergenceSeries, SeriesPoint};
pub use space::{BlockStructure, Element, LpIndex, MatrixUnit, NcSpace};
pub use subalgebra::Subalgebra;
pub use tuple::Tuple;

/// Complex scalar used throughout the crate.
pub type C64 = num_complex::Complex64;

/// Relative Frobenius tolerance used by the algebraic identity suites.
pub const IDENTITY_TOL: f64 = 1e-10;

/// Relative tolerance used by the dilation suites.
pub const DILATION_TOL: f64 = 1e-9;
