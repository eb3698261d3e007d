//! Overlapping full-coverage tiling of large images with annotation remapping.

mod augment;
mod dataset;
mod grid;
mod remap;

pub use augment::{augment_tile, TileTransform, Transform};
pub use dataset::{
    slice_dataset, tile_file_name, FileError, SliceSummary, TILE_ANNOTATION_FILE, TILE_IMAGE_DIR,
};
pub use grid::{plan_grid, SliceParams, TileGrid, TileRect};
pub use remap::{remap_annotations, TileAnnotation, TileSpec};
