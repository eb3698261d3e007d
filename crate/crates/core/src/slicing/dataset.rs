use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use image::DynamicImage;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::io::coco::{CocoAnnotation, CocoDataset, CocoImage};

use super::augment::{augment_tile, TileTransform};
use super::grid::{plan_grid, SliceParams, TileRect};
use super::remap::{remap_annotations, TileAnnotation, TileSpec};

pub const TILE_IMAGE_DIR: &str = "images";
pub const TILE_ANNOTATION_FILE: &str = "annotations.json";

/// A source image that could not be sliced.
#[derive(Debug, Clone, PartialEq)]
pub struct FileError {
    pub path: PathBuf,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SliceSummary {
    pub dataset: CocoDataset,
    pub errors: Vec<FileError>,
}

/// `<stem>__x<off>_y<off>.<ext>`
pub fn tile_file_name(source_file: &str, rect: &TileRect) -> String {
    let path = Path::new(source_file);
    let stem = path.file_stem().unwrap_or_default().to_string_lossy();
    let ext = path
        .extension()
        .map(|e| e.to_string_lossy().into_owned())
        .unwrap_or_else(|| "png".into());
    format!("{stem}__x{}_y{}.{ext}", rect.x_off, rect.y_off)
}

struct SlicedImage {
    tiles: Vec<(String, TileSpec)>,
}

fn slice_one(
    image: &CocoImage,
    annotations: &[&CocoAnnotation],
    images_dir: &Path,
    tile_dir: &Path,
    params: &SliceParams,
    transform: &dyn TileTransform,
) -> Result<SlicedImage> {
    let src_path = images_dir.join(&image.file_name);
    let pixels = image::open(&src_path).map_err(|source| Error::Image {
        path: src_path.clone(),
        source,
    })?;
    if (pixels.width(), pixels.height()) != (image.width, image.height) {
        log::warn!(
            "{}: annotation says {}x{}, file is {}x{}; using file size",
            src_path.display(),
            image.width,
            image.height,
            pixels.width(),
            pixels.height()
        );
    }
    let grid = plan_grid(pixels.width(), pixels.height(), params.tile, params.overlap)?;
    let boxes: Vec<BBox> = annotations.iter().map(|a| a.bbox()).collect();
    let mut tiles = Vec::with_capacity(grid.len());
    for rect in grid.tiles() {
        let remapped = remap_annotations(&boxes, &rect, params.min_visibility);
        let crop: DynamicImage = pixels.crop_imm(rect.x_off, rect.y_off, rect.w, rect.h);
        let (crop, remapped) = augment_tile(&crop, &remapped, transform);
        let name = tile_file_name(&image.file_name, &rect);
        let out_path = tile_dir.join(&name);
        crop.save(&out_path).map_err(|source| Error::Image {
            path: out_path,
            source,
        })?;
        tiles.push((
            name,
            TileSpec {
                source_image: image.id,
                rect,
                annotations: remapped,
            },
        ));
    }
    Ok(SlicedImage { tiles })
}

/// Cuts every image of `coco` (files under `images_dir`) into tiles written to
/// `<out_dir>/images/` and writes the matching `<out_dir>/annotations.json`.
/// Images that fail to load or save are reported in the summary and skipped.
pub fn slice_dataset(
    images_dir: &Path,
    coco: &CocoDataset,
    params: &SliceParams,
    transform: &dyn TileTransform,
    out_dir: &Path,
) -> Result<SliceSummary> {
    params.validate()?;
    let tile_dir = out_dir.join(TILE_IMAGE_DIR);
    fs::create_dir_all(&tile_dir).map_err(|e| Error::io(&tile_dir, e))?;

    let mut by_image: BTreeMap<u64, Vec<&CocoAnnotation>> = BTreeMap::new();
    for a in &coco.annotations {
        by_image.entry(a.image_id).or_default().push(a);
    }
    let mut images: Vec<&CocoImage> = coco.images.iter().collect();
    images.sort_by_key(|i| i.id);
    for id in by_image.keys() {
        if images.binary_search_by_key(id, |i| i.id).is_err() {
            log::warn!("annotations reference unknown image id {id}; ignored");
        }
    }

    let results: Vec<Result<SlicedImage>> = images
        .par_iter()
        .map(|img| {
            let anns = by_image.get(&img.id).map(Vec::as_slice).unwrap_or(&[]);
            slice_one(img, anns, images_dir, &tile_dir, params, transform)
        })
        .collect();

    let mut dataset = CocoDataset {
        categories: coco.categories.clone(),
        ..Default::default()
    };
    let mut errors = Vec::new();
    for (img, result) in images.iter().zip(results) {
        let sliced = match result {
            Ok(s) => s,
            Err(e) => {
                log::error!("{e}");
                errors.push(FileError {
                    path: images_dir.join(&img.file_name),
                    message: e.to_string(),
                });
                continue;
            }
        };
        let anns = by_image.get(&img.id).map(Vec::as_slice).unwrap_or(&[]);
        for (name, spec) in sliced.tiles {
            let tile_id = dataset.images.len() as u64 + 1;
            dataset.images.push(CocoImage {
                id: tile_id,
                file_name: name,
                width: spec.rect.w,
                height: spec.rect.h,
                source_image_id: Some(img.id),
                x_offset: Some(spec.rect.x_off),
                y_offset: Some(spec.rect.y_off),
            });
            for TileAnnotation {
                source_index,
                bbox,
                visibility,
            } in spec.annotations
            {
                let src = anns[source_index];
                dataset.annotations.push(CocoAnnotation {
                    id: dataset.annotations.len() as u64 + 1,
                    image_id: tile_id,
                    category_id: src.category_id,
                    bbox: [bbox.x, bbox.y, bbox.w, bbox.h],
                    area: bbox.area(),
                    iscrowd: src.iscrowd,
                    track_id: src.track_id,
                    visibility: Some(visibility),
                });
            }
        }
    }
    dataset.write(&out_dir.join(TILE_ANNOTATION_FILE))?;
    Ok(SliceSummary { dataset, errors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::slicing::Transform;

    #[test]
    fn tile_names() {
        let r = TileRect {
            x_off: 1024,
            y_off: 880,
            w: 1280,
            h: 1280,
        };
        assert_eq!(
            tile_file_name("seq1/000001.jpg", &r),
            "000001__x1024_y880.jpg"
        );
        assert_eq!(tile_file_name("a.b.png", &r), "a.b__x1024_y880.png");
    }

    #[test]
    fn missing_image_recorded_and_run_continues() {
        let dir = tempfile::tempdir().unwrap();
        let img_dir = dir.path().join("in");
        fs::create_dir_all(&img_dir).unwrap();
        image::RgbImage::new(40, 30)
            .save(img_dir.join("ok.png"))
            .unwrap();
        let coco = CocoDataset {
            images: vec![
                CocoImage {
                    id: 1,
                    file_name: "missing.png".into(),
                    width: 40,
                    height: 30,
                    source_image_id: None,
                    x_offset: None,
                    y_offset: None,
                },
                CocoImage {
                    id: 2,
                    file_name: "ok.png".into(),
                    width: 40,
                    height: 30,
                    source_image_id: None,
                    x_offset: None,
                    y_offset: None,
                },
            ],
            ..Default::default()
        };
        let params = SliceParams {
            tile: 32,
            overlap: 0.25,
            min_visibility: 0.5,
        };
        let out = dir.path().join("out");
        let s = slice_dataset(&img_dir, &coco, &params, &Transform::None, &out).unwrap();
        assert_eq!(s.errors.len(), 1);
        assert!(s.errors[0].path.ends_with("missing.png"));
        // 40 wide: offsets 0, 8; 30 tall: single row.
        assert_eq!(s.dataset.images.len(), 2);
        assert!(out.join("images/ok__x8_y0.png").is_file());
        assert!(s.dataset.annotations.is_empty());
    }
}
