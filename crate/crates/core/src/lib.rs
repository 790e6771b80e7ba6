//! Computational rough path analysis.
//!
//! The crate is organised bottom-up:
//!
//! * [`tensor`]: the truncated tensor algebra `T^(N)(R^d)`, words and shuffles.
//! * [`variation`]: sampled paths, p-variation by dynamic programming, controls.
//! * [`signature`]: exact signatures of piecewise-linear paths and Chen checks.
//! * [`rough`]: multiplicative functionals on grids, rough path metrics and
//!   the extension of a rough path to higher degree.
//! * [`lipschitz`]: Stein Lipschitz jets, remainders and norm estimates.
//! * [`integration`]: one-form integrals along rough paths and pushforwards.
//! * [`covers`]: compact covers of intervals and subdivisions drawn from them.
//! * [`manifold`]: charts, atlases and chart-local rough paths.
//!
//! Every norm in the crate is built on the `l1` norm of `R^d`; tensor levels
//! carry the `l1` norm of their coordinates.
//!
//! With the default `parallel` feature, independent per-cell and per-row work
//! runs on the rayon thread pool. Without it the same code runs sequentially.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod covers;
pub mod error;
pub mod integration;
pub mod io;
pub mod lipschitz;
pub mod manifold;
mod par;
pub mod rough;
pub mod signature;
pub mod tensor;
pub mod variation;

pub use error::{Error, Result};
pub use integration::{OneForm, SewOptions};
pub use lipschitz::LipJet;
pub use rough::{GridFunctional, RoughPath};
pub use tensor::{FormCombination, TruncTensor, Word};
pub use variation::{ControlGrid, SampledPath};

/// Default cap on the tensor degree.
pub const DEFAULT_MAX_DEGREE: usize = 6;
