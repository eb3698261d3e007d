use std::fmt;
use std::str::FromStr;

use image::DynamicImage;

use crate::error::{Error, Result};
use crate::geometry::BBox;

use super::remap::TileAnnotation;

/// A geometric tile transform applied consistently to pixels and boxes.
pub trait TileTransform: Sync {
    fn apply_image(&self, image: &DynamicImage) -> DynamicImage;
    fn apply_box(&self, bbox: &BBox, tile_w: f64, tile_h: f64) -> BBox;
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Transform {
    #[default]
    None,
    HorizontalFlip,
}

impl Transform {
    pub fn name(&self) -> &'static str {
        match self {
            Transform::None => "none",
            Transform::HorizontalFlip => "horizontal_flip",
        }
    }
}

impl fmt::Display for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Transform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Transform::None),
            "horizontal_flip" | "hflip" => Ok(Transform::HorizontalFlip),
            other => Err(Error::InvalidParameter(format!(
                "unsupported transform {other:?} (expected none or horizontal_flip)"
            ))),
        }
    }
}

impl TileTransform for Transform {
    fn apply_image(&self, image: &DynamicImage) -> DynamicImage {
        match self {
            Transform::None => image.clone(),
            Transform::HorizontalFlip => image.fliph(),
        }
    }

    fn apply_box(&self, b: &BBox, tile_w: f64, _tile_h: f64) -> BBox {
        match self {
            Transform::None => *b,
            Transform::HorizontalFlip => BBox::new(tile_w - b.x - b.w, b.y, b.w, b.h),
        }
    }
}

/// Transforms a tile's pixels and its boxes together.
pub fn augment_tile(
    image: &DynamicImage,
    boxes: &[TileAnnotation],
    transform: &dyn TileTransform,
) -> (DynamicImage, Vec<TileAnnotation>) {
    let (w, h) = (image.width() as f64, image.height() as f64);
    let boxes = boxes
        .iter()
        .map(|a| TileAnnotation {
            bbox: transform.apply_box(&a.bbox, w, h),
            ..*a
        })
        .collect();
    (transform.apply_image(image), boxes)
}
