use crate::geometry::BBox;

use super::grid::TileRect;

/// A source box as seen from inside one tile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TileAnnotation {
    /// Index into the list of boxes passed to [`remap_annotations`].
    pub source_index: usize,
    /// Tile-local, clipped to the tile.
    pub bbox: BBox,
    /// Clipped area over original area, in `(0, 1]`.
    pub visibility: f64,
}

/// One tile of a source image with its remapped boxes.
#[derive(Debug, Clone, PartialEq)]
pub struct TileSpec {
    pub source_image: u64,
    pub rect: TileRect,
    pub annotations: Vec<TileAnnotation>,
}

/// Clips each box to the tile, moves it into tile coordinates and keeps it
/// if at least `min_visibility` of its area survives.
pub fn remap_annotations(
    boxes: &[BBox],
    tile: &TileRect,
    min_visibility: f64,
) -> Vec<TileAnnotation> {
    let window = tile.bbox();
    boxes
        .iter()
        .enumerate()
        .filter_map(|(source_index, b)| {
            let area = b.area();
            if area <= 0.0 {
                return None;
            }
            let contained = b.x >= window.x
                && b.y >= window.y
                && b.right() <= window.right()
                && b.bottom() <= window.bottom();
            if contained {
                return Some(TileAnnotation {
                    source_index,
                    bbox: b.translate(-window.x, -window.y),
                    visibility: 1.0,
                });
            }
            let clipped = b.intersection(&window)?;
            let visibility = (clipped.area() / area).min(1.0);
            if visibility <= 0.0 || visibility < min_visibility {
                return None;
            }
            Some(TileAnnotation {
                source_index,
                bbox: clipped.translate(-window.x, -window.y),
                visibility,
            })
        })
        .collect()
}
