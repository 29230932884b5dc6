//! File formats, base-model handles and the `chilli` command line on top of
//! [`chilli_core`].

pub mod cli;
pub mod error;
pub mod io;
pub mod model;

pub use error::{Error, Result};
pub use model::{ExternalModel, ModelSpec, PredictorHandle};
