//! Multilevel quasiseparable matrices.
//!
//! Quasiseparable matrices have every off-diagonal submatrix of low rank and
//! admit a generator representation with O(N) storage on which
//! matrix-vector products, addition, multiplication, LU factorization and
//! inversion all run in time linear in the dimension. This crate implements
//!
//! * the one-level generator representation and its linear-time arithmetic
//!   ([`QsMatrix`], [`arith`]),
//! * order reduction that restores minimal (or tolerance-truncated)
//!   generator widths after arithmetic inflates them ([`compress`]),
//! * two-level matrices whose generator entries are themselves
//!   quasiseparable, matching block discretizations of 2D elliptic operators
//!   ([`level2`]),
//! * Q1 finite element model problems on the unit square ([`fem`]), and
//! * structured direct and preconditioned-CG solvers for 2D Poisson problems
//!   and distributed optimal control saddle-point systems ([`saddle`]),
//!   plus a benchmark runner behind the `mlqs-bench` binary ([`bench`]).
//!
//! The `examples/` directory contains one runnable program per capability;
//! start with `cargo run --release --example quasiseparable_basics`.

pub mod arith;
pub mod bench;
pub mod compress;
pub mod construct;
pub mod error;
pub mod fem;
pub mod generators;
pub mod kernels;
pub mod level2;
pub mod matrix;
pub mod metrics;
pub mod partition;
pub mod rank;
pub mod saddle;

pub use error::{Error, Result};
pub use generators::QsGenerators;
pub use matrix::QsMatrix;
pub use partition::BlockPartition;
