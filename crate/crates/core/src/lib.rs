//! Numerical laboratory for linear cocycles over finite Markov shifts.
//!
//! The crate covers four layers that build on one another:
//!
//! * [`markov`]: stochastic matrices, stationary vectors, cylinder
//!   measures, chain sampling.
//! * [`cocycle`] and [`lyapunov`]: `GL(2)` matrix tuples acting on the
//!   projective line, extremal Lyapunov exponents, expanding invariant
//!   points.
//! * [`stationary`]: measure vectors on a uniform projective grid, the
//!   transfer operator and its fixed points.
//! * [`energy`]: the distance kernel, coupling energies, optimal
//!   couplings and the diagonal transfer operator on couplings.
//!
//! [`harness`] wires these into JSON-configured experiments with
//! deterministic CSV/JSON output.
//!
//! ```
//! use markov_cocycle::{lyapunov, CocycleMap, Mat2, StochasticMatrix};
//!
//! let p = StochasticMatrix::bernoulli(&[0.5, 0.5]).unwrap();
//! let a = CocycleMap::new(vec![Mat2::diag(2.0, 0.5); 2]).unwrap();
//! let est = lyapunov::lambda_plus_monte_carlo(&a, &p, 10_000, 4, 7).unwrap();
//! assert!((est.value - 2f64.ln()).abs() < 1e-3);
//! ```

pub mod cocycle;
pub mod energy;
pub mod error;
pub mod harness;
pub mod lyapunov;
pub mod markov;
pub mod matrix;
pub mod stationary;

pub use cocycle::{CocycleMap, InvariantPoints, ProjectivePoint};
pub use error::{Error, Result};
pub use markov::{StochasticMatrix, Word};
pub use matrix::Mat2;
pub use stationary::{GridMeasure, MeasureVector, ProjectiveGrid, TransferOperator};

// Code blocks in the guide are compiled and run as doc-tests.
#[cfg(doctest)]
pub mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/markov.md")]
    pub mod markov {}
    #[doc = include_str!("../../../book/src/cocycles.md")]
    pub mod cocycles {}
    #[doc = include_str!("../../../book/src/lyapunov.md")]
    pub mod lyapunov {}
    #[doc = include_str!("../../../book/src/stationary.md")]
    pub mod stationary {}
    #[doc = include_str!("../../../book/src/energy.md")]
    pub mod energy {}
    #[doc = include_str!("../../../book/src/harness.md")]
    pub mod harness {}
}
