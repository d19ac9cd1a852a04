//! Central limit machinery for weighted sums and linear processes driven by
//! innovations with infinite variance in the domain of attraction of the
//! normal law.

pub mod conv;
pub mod error;
pub mod gof;
pub mod harness;
pub mod innovations;
pub mod normalizer;
pub mod quad;
pub mod root;
pub mod simulate;
pub mod sum;
pub mod tail;
pub mod weights;

pub use error::{Error, Result};
pub use tail::TailModel;
