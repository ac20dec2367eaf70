//! Body soundfields as low-order spherical-harmonic acoustic primitives.
//!
//! The crate models the 3D sound emitted by a moving body as a set of
//! small harmonic sources attached to joints, renders the field at any
//! listener position through spherical wave functions, and inverts the
//! renderer to fit primitive coefficients, offsets, and weights from
//! microphone-array recordings.

pub mod cli;
pub mod error;
pub mod exterior;
pub mod fit;
pub mod grad;
pub mod loss;
pub mod lsq;
pub mod metrics;
pub mod obs;
pub mod plot;
pub mod quadrature;
pub mod render;
pub mod scene;
pub mod simulate;
pub mod spectral;
pub mod sphmath;
pub mod testkit;
pub mod wav;

pub use error::{Error, Result};
