//! Acceptance battery for `roughpath`: deterministic corpora, reference
//! oracles and one check per acceptance criterion.

pub mod corpus;
pub mod criteria;
pub mod oracles;

pub use criteria::{run, run_all, CriterionResult, NAMES};
