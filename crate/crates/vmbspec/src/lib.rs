//! Numerical toolkit for the linearized Vlasov-Maxwell-Boltzmann system with
//! hard-sphere collisions.
//!
//! The crate discretizes velocity space with a tensor Gauss-Hermite rule,
//! assembles the linearized collision operators `L` and `L1`, builds the
//! generator of a single Fourier mode, and then studies it three ways:
//! dispersion relations solved by Newton continuation, dense eigensolves,
//! and mode-summed decay experiments.
//!
//! ```no_run
//! use vmbspec::{collision, dispersion, velocity};
//!
//! let grid = velocity::build_grid(12, 1.0).unwrap();
//! let cm = collision::assemble(&grid).unwrap();
//! let coeffs = dispersion::asymptotic_coefficients(&cm, &grid).unwrap();
//! assert!((coeffs.kappa3 * coeffs.a1_two - 1.0).abs() < 1e-6);
//! ```
//!
//! Internally every matrix acts on *symmetric coordinates* `y_a = sqrt(w_a) f(v_a)`,
//! in which the discrete inner product is Euclidean and self-adjoint
//! operators are symmetric. The public API takes and returns raw node values.

pub mod checks;
pub mod cli;
pub mod collision;
pub mod config;
pub mod dispersion;
pub mod error;
pub mod linalg;
pub mod modes;
pub mod parity;
pub mod semigroup;
pub mod spectra;
pub mod velocity;

pub use error::{Error, Result};
pub use faer::c64;
