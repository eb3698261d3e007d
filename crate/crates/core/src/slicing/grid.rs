use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BBox;

/// Tiling parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SliceParams {
    /// Side of the square tile in pixels.
    pub tile: u32,
    /// Fraction of a tile shared with its neighbour, in `[0, 1)`.
    pub overlap: f64,
    /// Clipped boxes keeping less than this fraction of their area are dropped.
    pub min_visibility: f64,
}

impl Default for SliceParams {
    fn default() -> Self {
        SliceParams {
            tile: 1280,
            overlap: 0.2,
            min_visibility: 0.5,
        }
    }
}

impl SliceParams {
    pub fn validate(&self) -> Result<()> {
        stride(self.tile, self.overlap)?;
        if !(self.min_visibility > 0.0 && self.min_visibility <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "min_visibility must lie in (0, 1], got {}",
                self.min_visibility
            )));
        }
        Ok(())
    }
}

fn stride(tile: u32, overlap: f64) -> Result<u32> {
    if tile == 0 {
        return Err(Error::InvalidParameter("tile must be positive".into()));
    }
    if !(0.0..1.0).contains(&overlap) {
        return Err(Error::InvalidParameter(format!(
            "overlap must lie in [0, 1), got {overlap}"
        )));
    }
    let stride = (tile as f64 * (1.0 - overlap)).floor() as u32;
    if stride < 1 {
        return Err(Error::InvalidParameter(format!(
            "tile {tile} with overlap {overlap} gives a zero stride"
        )));
    }
    Ok(stride)
}

fn axis_offsets(dim: u32, tile: u32, stride: u32) -> Vec<u32> {
    if dim <= tile {
        return vec![0];
    }
    let mut offsets = Vec::new();
    let mut o = 0u32;
    while o + tile < dim {
        offsets.push(o);
        o += stride;
    }
    offsets.push(dim - tile);
    offsets
}

/// Overlapping tile layout of one image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TileGrid {
    pub image_w: u32,
    pub image_h: u32,
    pub tile: u32,
    pub stride: u32,
    pub offsets_x: Vec<u32>,
    pub offsets_y: Vec<u32>,
}

/// One tile's placement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TileRect {
    pub x_off: u32,
    pub y_off: u32,
    pub w: u32,
    pub h: u32,
}

impl TileRect {
    pub fn bbox(&self) -> BBox {
        BBox::new(
            self.x_off as f64,
            self.y_off as f64,
            self.w as f64,
            self.h as f64,
        )
    }
}

impl TileGrid {
    pub fn tile_w(&self) -> u32 {
        self.tile.min(self.image_w)
    }

    pub fn tile_h(&self) -> u32 {
        self.tile.min(self.image_h)
    }

    pub fn len(&self) -> usize {
        self.offsets_x.len() * self.offsets_y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Tiles in row-major order (top row first, left to right).
    pub fn tiles(&self) -> impl Iterator<Item = TileRect> + '_ {
        let (w, h) = (self.tile_w(), self.tile_h());
        self.offsets_y.iter().flat_map(move |&y_off| {
            self.offsets_x
                .iter()
                .map(move |&x_off| TileRect { x_off, y_off, w, h })
        })
    }
}

/// Plans a full-coverage grid: offsets advance by `floor(tile * (1 - overlap))`
/// and the last offset on each axis is pulled back to `dim - tile`. Axes no
/// longer than a tile get a single tile at 0.
pub fn plan_grid(image_w: u32, image_h: u32, tile: u32, overlap: f64) -> Result<TileGrid> {
    let stride = stride(tile, overlap)?;
    if image_w == 0 || image_h == 0 {
        return Err(Error::InvalidParameter(format!(
            "empty image {image_w}x{image_h}"
        )));
    }
    Ok(TileGrid {
        image_w,
        image_h,
        tile,
        stride,
        offsets_x: axis_offsets(image_w, tile, stride),
        offsets_y: axis_offsets(image_h, tile, stride),
    })
}
