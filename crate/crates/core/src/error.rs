use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A schema entry violates its kind's invariants.
    InvalidSchema { feature: String, reason: String },
    /// An instance or dataset does not conform to its schema.
    InvalidData(String),
    /// A hyperparameter is out of its admissible range.
    InvalidParameter(String),
    /// The weighted normal equations (or kernel system) are singular.
    Singular(String),
    /// The base model failed on the batch starting at `batch_index`.
    Model { batch_index: usize, message: String },
    /// A per-instance pipeline failed inside an experiment.
    Instance {
        instance_id: usize,
        source: alloc::boxed::Box<Error>,
    },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidSchema { feature, reason } => {
                write!(f, "invalid schema for feature `{feature}`: {reason}")
            }
            Error::InvalidData(msg) => write!(f, "invalid data: {msg}"),
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::Singular(msg) => write!(f, "singular system: {msg}"),
            Error::Model {
                batch_index,
                message,
            } => {
                write!(f, "base model failed on batch {batch_index}: {message}")
            }
            Error::Instance {
                instance_id,
                source,
            } => {
                write!(f, "instance {instance_id}: {source}")
            }
        }
    }
}

impl core::error::Error for Error {}

impl Error {
    /// Short machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidSchema { .. } => "invalid_schema",
            Error::InvalidData(_) => "invalid_data",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::Singular(_) => "singular",
            Error::Model { .. } => "model",
            Error::Instance { source, .. } => source.kind(),
        }
    }
}
