//! Oriented-box multi-object tracking toolkit: rotated-box geometry, an
//! oriented Kalman filter, optimal assignment, four motion-only trackers,
//! camera-motion compensation, CLEAR/identity/HOTA metrics, data formats,
//! a synthetic scenario generator and a reference spectral 3D stem.

pub mod assignment;
pub mod cmc;
pub mod dataio;
pub mod error;
pub mod frames;
pub mod geometry;
pub mod kalman;
pub mod kvconfig;
pub mod metrics;
pub mod stem;
pub mod synth;
pub mod tracker;
pub mod transform;

pub use error::{Error, Result};
pub use frames::{FrameSet, Instance};
pub use geometry::{riou, Angle, OrientedBox, Point};
pub use tracker::{Algorithm, Detection, Tracker, TrackerConfig};
pub use transform::SimilarityTransform;
