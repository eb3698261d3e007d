use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::geometry::BBox;

/// One row of a MOT track/gt file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackRecord {
    pub frame: u32,
    pub id: u32,
    pub bbox: BBox,
}

/// Identity-labelled boxes grouped by frame. Used for both ground truth and predictions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrackSet {
    frames: BTreeMap<u32, Vec<(u32, BBox)>>,
}

impl TrackSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_records(records: impl IntoIterator<Item = TrackRecord>) -> Self {
        let mut set = TrackSet::new();
        for r in records {
            set.push(r.frame, r.id, r.bbox);
        }
        set
    }

    pub fn push(&mut self, frame: u32, id: u32, bbox: BBox) {
        self.frames.entry(frame).or_default().push((id, bbox));
    }

    pub fn frames(&self) -> &BTreeMap<u32, Vec<(u32, BBox)>> {
        &self.frames
    }

    pub fn frame(&self, frame: u32) -> &[(u32, BBox)] {
        self.frames.get(&frame).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn is_empty(&self) -> bool {
        self.frames.values().all(Vec::is_empty)
    }

    pub fn num_boxes(&self) -> usize {
        self.frames.values().map(Vec::len).sum()
    }

    pub fn boxes(&self) -> impl Iterator<Item = &BBox> {
        self.frames.values().flatten().map(|(_, b)| b)
    }

    /// Rows sorted by `(frame, id)`.
    pub fn to_records(&self) -> Vec<TrackRecord> {
        let mut out: Vec<TrackRecord> = self
            .frames
            .iter()
            .flat_map(|(&frame, v)| {
                v.iter()
                    .map(move |&(id, bbox)| TrackRecord { frame, id, bbox })
            })
            .collect();
        out.sort_by_key(|r| (r.frame, r.id));
        out
    }

    /// Per-identity observations in frame order.
    pub fn trajectories(&self) -> BTreeMap<u32, Vec<(u32, BBox)>> {
        let mut out: BTreeMap<u32, Vec<(u32, BBox)>> = BTreeMap::new();
        for (&frame, v) in &self.frames {
            for &(id, bbox) in v {
                out.entry(id).or_default().push((frame, bbox));
            }
        }
        out
    }

    pub fn validate_unique_ids(&self) -> Result<()> {
        for (&frame, v) in &self.frames {
            let mut ids: Vec<u32> = v.iter().map(|(id, _)| *id).collect();
            ids.sort_unstable();
            if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
                return Err(Error::Validation(format!(
                    "id {} appears twice in frame {frame}",
                    w[0]
                )));
            }
        }
        Ok(())
    }

    pub fn map_ids(&self, mut f: impl FnMut(u32) -> u32) -> TrackSet {
        TrackSet {
            frames: self
                .frames
                .iter()
                .map(|(&frame, v)| (frame, v.iter().map(|&(id, b)| (f(id), b)).collect()))
                .collect(),
        }
    }

    pub fn map_boxes(&self, mut f: impl FnMut(&BBox) -> BBox) -> TrackSet {
        TrackSet {
            frames: self
                .frames
                .iter()
                .map(|(&frame, v)| (frame, v.iter().map(|(id, b)| (*id, f(b))).collect()))
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn records_come_out_sorted() {
        let b = BBox::new(0.0, 0.0, 1.0, 1.0);
        let set = TrackSet::from_records([
            TrackRecord {
                frame: 2,
                id: 5,
                bbox: b,
            },
            TrackRecord {
                frame: 1,
                id: 9,
                bbox: b,
            },
            TrackRecord {
                frame: 2,
                id: 1,
                bbox: b,
            },
        ]);
        let keys: Vec<_> = set.to_records().iter().map(|r| (r.frame, r.id)).collect();
        assert_eq!(keys, vec![(1, 9), (2, 1), (2, 5)]);
        assert_eq!(set.trajectories()[&9].len(), 1);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let b = BBox::new(0.0, 0.0, 1.0, 1.0);
        let mut set = TrackSet::new();
        set.push(3, 1, b);
        set.push(3, 1, b);
        assert!(matches!(
            set.validate_unique_ids(),
            Err(Error::Validation(_))
        ));
    }
}
