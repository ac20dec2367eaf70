//! Error types shared across the crate.

use thiserror::Error;

/// Minimum listener-to-primitive distance in meters.
///
/// Below this the 2nd-order radial gain magnitude grows as `(r_ref/r)^3`
/// and dominates numerically, so callers asking for smaller radii get an
/// error instead of a silent clamp.
pub const R_MIN: f64 = 0.05;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("config violation: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("near-field violation: distance {dist} m below r_min {r_min} m{context}")]
    NearField {
        dist: f64,
        r_min: f64,
        context: String,
    },

    #[error("underdetermined system: {unknowns} unknowns but only {equations} equations")]
    Underdetermined { unknowns: usize, equations: usize },

    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },

    #[error("time {t} s outside clip range [0, {max}] s")]
    OutOfRange { t: f64, max: f64 },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn near_field(dist: f64, context: impl Into<String>) -> Self {
        let context = context.into();
        let context = if context.is_empty() {
            context
        } else {
            format!(" ({context})")
        };
        Error::NearField {
            dist,
            r_min: R_MIN,
            context,
        }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
