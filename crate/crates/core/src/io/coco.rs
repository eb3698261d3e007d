//! COCO-style detection annotations.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::trackset::TrackSet;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CocoDataset {
    #[serde(default)]
    pub images: Vec<CocoImage>,
    #[serde(default)]
    pub annotations: Vec<CocoAnnotation>,
    #[serde(default)]
    pub categories: Vec<CocoCategory>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoImage {
    pub id: u64,
    pub file_name: String,
    pub width: u32,
    pub height: u32,
    /// Set on tiles: id of the image the tile was cut from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_image_id: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_offset: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_offset: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoAnnotation {
    pub id: u64,
    pub image_id: u64,
    pub category_id: u64,
    /// `[x, y, w, h]` in pixels.
    pub bbox: [f64; 4],
    #[serde(default)]
    pub area: f64,
    #[serde(default)]
    pub iscrowd: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub track_id: Option<u32>,
    /// Fraction of the source box kept after clipping to a tile.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub visibility: Option<f64>,
}

impl CocoAnnotation {
    pub fn bbox(&self) -> BBox {
        let [x, y, w, h] = self.bbox;
        BBox::new(x, y, w, h)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoCategory {
    pub id: u64,
    pub name: String,
}

impl CocoDataset {
    pub fn from_json_str(text: &str, path: &Path) -> Result<Self> {
        serde_json::from_str(text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text, path)
    }

    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("COCO structures always serialize");
        s.push('\n');
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        super::mot::write_file(path, &self.to_json_string())
    }
}

/// Converts a MOT ground-truth sequence into COCO form. Frame `f` becomes
/// image id `f` named by `file_name(f)`; every box gets category 1 and keeps
/// its identity in `track_id`.
pub fn mot_to_coco(
    gt: &TrackSet,
    width: u32,
    height: u32,
    file_name: impl Fn(u32) -> String,
) -> CocoDataset {
    let mut ds = CocoDataset {
        categories: vec![CocoCategory {
            id: 1,
            name: "object".to_string(),
        }],
        ..Default::default()
    };
    for (&frame, boxes) in gt.frames() {
        ds.images.push(CocoImage {
            id: frame as u64,
            file_name: file_name(frame),
            width,
            height,
            source_image_id: None,
            x_offset: None,
            y_offset: None,
        });
        let mut boxes = boxes.clone();
        boxes.sort_by_key(|(id, _)| *id);
        for (id, b) in boxes {
            ds.annotations.push(CocoAnnotation {
                id: ds.annotations.len() as u64 + 1,
                image_id: frame as u64,
                category_id: 1,
                bbox: [b.x, b.y, b.w, b.h],
                area: b.area(),
                iscrowd: 0,
                track_id: Some(id),
                visibility: None,
            });
        }
    }
    ds
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    #[test]
    fn converts_and_round_trips() {
        let mut gt = TrackSet::new();
        gt.push(2, 7, BBox::new(1.0, 2.0, 3.0, 4.0));
        gt.push(1, 5, BBox::new(0.0, 0.0, 2.0, 2.0));
        gt.push(2, 5, BBox::new(1.0, 1.0, 2.0, 2.0));
        let ds = mot_to_coco(&gt, 100, 50, |f| format!("{f:06}.jpg"));
        assert_eq!(ds.images.len(), 2);
        assert_eq!(ds.images[1].file_name, "000002.jpg");
        assert_eq!(ds.annotations.len(), 3);
        assert_eq!(ds.annotations[2].track_id, Some(7));
        assert_eq!(ds.annotations[2].area, 12.0);
        let text = ds.to_json_string();
        assert!(!text.contains("x_offset"));
        let back = CocoDataset::from_json_str(&text, &PathBuf::from("a.json")).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn tolerates_extra_fields() {
        let text = r#"{"info": {"v": 1}, "images": [{"id": 1, "file_name": "a.png", "width": 4, "height": 4, "license": 3}],
            "annotations": [{"id": 1, "image_id": 1, "category_id": 1, "bbox": [0, 0, 2, 2], "segmentation": []}]}"#;
        let ds = CocoDataset::from_json_str(text, &PathBuf::from("a.json")).unwrap();
        assert_eq!(ds.annotations[0].bbox(), BBox::new(0.0, 0.0, 2.0, 2.0));
    }

    #[test]
    fn malformed_json_is_reported() {
        let err = CocoDataset::from_json_str("{", &PathBuf::from("a.json")).unwrap_err();
        assert!(matches!(err, Error::Json { .. }));
    }
}
