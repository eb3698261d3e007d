pub mod analysis;
pub mod assignment;
pub mod association;
pub mod cli;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod io;
pub mod motion;
pub mod sim;
pub mod slicing;
pub mod trackset;

pub use association::{AssociationConfig, Detection, Tracker};
pub use error::{Error, Result};
pub use geometry::{BBox, SimilarityConfig};
pub use trackset::{TrackRecord, TrackSet};
