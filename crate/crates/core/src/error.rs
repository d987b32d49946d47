use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("degenerate geometry: {0}")]
    Geometry(String),

    #[error("mesh generation failed: {0}")]
    Generation(String),

    #[error("point ({x}, {y}) is not inside any element of the mesh")]
    Location { x: f64, y: f64 },

    #[error("transfer failed at target element {element}: {source}")]
    Transfer {
        element: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("element {element}: singular local system ({detail})")]
    SingularSystem { element: usize, detail: String },

    #[error("element index {index} out of range (mesh has {count} elements)")]
    ElementOutOfRange { index: usize, count: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
