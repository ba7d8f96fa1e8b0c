//! LDA topic modeling by collapsed Gibbs sampling, with two privacy tools
//! built in:
//!
//! * a **privacy monitor** that measures the differential-privacy guarantee
//!   the sampler's own randomness provides, per sampling step and composed
//!   over a whole training run ([`monitor`]);
//! * a **locally private pipeline** where contributors send randomized
//!   binary presence vectors and the server reconstructs a training corpus
//!   from unbiased count estimates ([`lp`]), plus a Laplace-noise baseline
//!   ([`laplace`]) and held-out perplexity evaluation ([`eval`]).

pub mod cgs;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod laplace;
pub mod lp;
pub mod model_io;
pub mod monitor;
pub mod seeds;
pub mod synth;

pub use error::{Error, Result};
