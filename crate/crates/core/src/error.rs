//! Error taxonomy shared across the crate.

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Non-finite field values or a runaway sup-norm; the attached time is
    /// where the trajectory first left the admissible band.
    #[error("blow-up at t = {time}: {reason}")]
    Blowup { time: f64, reason: String },

    /// A configuration value violated its documented constraint.
    #[error("config error: {field}: violates {constraint}")]
    Config { field: String, constraint: String },

    /// Several configuration violations reported together.
    #[error("config errors:\n{}", messages.join("\n"))]
    ConfigList { messages: Vec<String> },

    /// Grid too coarse for the requested interface width (h > eps/4).
    #[error("resolution error: h = {h} exceeds eps/4 = {limit}")]
    Resolution { h: f64, limit: f64 },

    /// Shape margin / disjointness invariants failed.
    #[error("geometry error: {0}")]
    Geometry(String),

    /// The field has no sign change; there is no zero level set to measure.
    #[error("empty interface: field has no sign change")]
    EmptyInterface,

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed snapshot or CSV payload.
    #[error("format error in {path}: {reason}")]
    Format { path: PathBuf, reason: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Error {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
