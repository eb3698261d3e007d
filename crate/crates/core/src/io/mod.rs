//! File formats and run configuration.

pub mod coco;
pub mod config;
pub mod mot;

pub use coco::{mot_to_coco, CocoAnnotation, CocoCategory, CocoDataset, CocoImage};
pub use config::{ConfigLayer, Paths, RunConfig};
pub use mot::{
    discover_gt, format_mot_dets, format_mot_tracks, parse_mot_dets, parse_mot_dets_str,
    parse_mot_tracks, parse_mot_tracks_str, write_mot_dets, write_mot_tracks, DetsByFrame,
    LineError, Parsed,
};
