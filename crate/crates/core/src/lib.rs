//! Distilling syntactic structure into a small masked language model.
//!
//! Trees are converted into RNNG transition oracles, autoregressive teachers
//! are trained in both directions, their posteriors over a masked token are
//! computed exactly or approximated as a product of experts, and the
//! resulting soft targets train a bidirectional masked-LM student whose
//! encodings are then probed against a control task.

pub mod corpus;
pub mod distill;
pub mod error;
pub mod nn;
pub mod pipeline;
pub mod posterior;
pub mod probe;
pub mod rng;
pub mod student;
pub mod teachers;
pub mod transitions;

pub use error::{Error, Result};
