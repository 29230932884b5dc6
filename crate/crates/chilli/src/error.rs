use std::path::PathBuf;

use serde::Serialize;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] chilli_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("{0}")]
    Usage(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl std::fmt::Display) -> Self {
        Error::Format {
            path: path.into(),
            message: message.to_string(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::Core(e) => e.kind(),
            Error::Io { .. } => "io",
            Error::Format { .. } => "format",
            Error::Usage(_) => "usage",
        }
    }

    /// Exit status used by the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 2,
            Error::Io { .. } | Error::Format { .. } => 3,
            Error::Core(chilli_core::Error::Model { .. }) => 5,
            Error::Core(chilli_core::Error::Instance { source, .. })
                if matches!(**source, chilli_core::Error::Model { .. }) =>
            {
                5
            }
            Error::Core(_) => 4,
        }
    }

    /// The machine-readable form printed on stderr.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Report<'a> {
            error: &'a str,
            message: String,
            #[serde(skip_serializing_if = "Option::is_none")]
            instance_id: Option<usize>,
            #[serde(skip_serializing_if = "Option::is_none")]
            batch_index: Option<usize>,
        }
        let (mut instance_id, mut batch_index) = (None, None);
        if let Error::Core(e) = self {
            let mut e = e;
            if let chilli_core::Error::Instance {
                instance_id: id,
                source,
            } = e
            {
                instance_id = Some(*id);
                e = source;
            }
            if let chilli_core::Error::Model { batch_index: b, .. } = e {
                batch_index = Some(*b);
            }
        }
        let report = Report {
            error: self.kind(),
            message: self.to_string(),
            instance_id,
            batch_index,
        };
        serde_json::to_string(&report).expect("error report serializes")
    }
}
