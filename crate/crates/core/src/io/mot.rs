//! MOTChallenge text files.
//!
//! Detections: `frame,-1,x,y,w,h,score,-1,-1,-1`
//! Tracks/gt:  `frame,id,x,y,w,h,conf,...` (a zero `conf` marks an ignored gt row)

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::association::Detection;
use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::trackset::{TrackRecord, TrackSet};

pub type DetsByFrame = BTreeMap<u32, Vec<Detection>>;

#[derive(Debug, Clone, PartialEq)]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

/// Parsed rows plus the rows that were rejected.
#[derive(Debug, Clone, PartialEq)]
pub struct Parsed<T> {
    pub value: T,
    pub rejected: Vec<LineError>,
}

struct Row {
    frame: u32,
    id: f64,
    bbox: BBox,
    score: Option<f64>,
}

fn parse_row(line: &str) -> std::result::Result<Row, String> {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() < 6 {
        return Err(format!(
            "expected at least 6 comma-separated fields, found {}",
            fields.len()
        ));
    }
    let num = |i: usize| -> std::result::Result<f64, String> {
        fields[i]
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| format!("field {} ({:?}) is not a number", i + 1, fields[i]))
    };
    let frame = num(0)?;
    if frame < 1.0 || frame.fract() != 0.0 || frame > u32::MAX as f64 {
        return Err(format!(
            "frame must be a positive integer, got {}",
            fields[0]
        ));
    }
    let (x, y, w, h) = (num(2)?, num(3)?, num(4)?, num(5)?);
    if w <= 0.0 || h <= 0.0 {
        return Err(format!(
            "width and height must be positive, got w={w} h={h}"
        ));
    }
    let score = if fields.len() > 6 {
        Some(num(6)?)
    } else {
        None
    };
    Ok(Row {
        frame: frame as u32,
        id: num(1)?,
        bbox: BBox::new(x, y, w, h),
        score,
    })
}

fn parse_lines<T>(
    text: &str,
    path: &Path,
    mut accept: impl FnMut(Row) -> std::result::Result<Option<T>, String>,
) -> Result<Parsed<Vec<T>>> {
    let mut value = Vec::new();
    let mut rejected = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        match parse_row(line).and_then(&mut accept) {
            Ok(Some(v)) => value.push(v),
            Ok(None) => {}
            Err(message) => {
                log::warn!("{}:{}: {message}", path.display(), idx + 1);
                rejected.push(LineError {
                    line: idx + 1,
                    message,
                });
            }
        }
    }
    if value.is_empty() {
        if let Some(first) = rejected.first() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: first.line,
                message: first.message.clone(),
            });
        }
        log::warn!("{}: no rows", path.display());
    }
    Ok(Parsed { value, rejected })
}

pub fn parse_mot_dets_str(text: &str, path: &Path) -> Result<Parsed<DetsByFrame>> {
    let parsed = parse_lines(text, path, |row| {
        let score = row.score.ok_or("detection rows need a score in field 7")?;
        if !(0.0..=1.0).contains(&score) {
            return Err(format!("score must lie in [0, 1], got {score}"));
        }
        Ok(Some(Detection::new(row.frame, row.bbox, score)))
    })?;
    let mut by_frame = DetsByFrame::new();
    for d in parsed.value {
        by_frame.entry(d.frame).or_default().push(d);
    }
    Ok(Parsed {
        value: by_frame,
        rejected: parsed.rejected,
    })
}

pub fn parse_mot_dets(path: &Path) -> Result<Parsed<DetsByFrame>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_mot_dets_str(&text, path)
}

pub fn parse_mot_tracks_str(text: &str, path: &Path) -> Result<Parsed<TrackSet>> {
    let parsed = parse_lines(text, path, |row| {
        if row.id < 0.0 || row.id.fract() != 0.0 || row.id > u32::MAX as f64 {
            return Err(format!(
                "track id must be a non-negative integer, got {}",
                row.id
            ));
        }
        if row.score == Some(0.0) {
            return Ok(None);
        }
        Ok(Some(TrackRecord {
            frame: row.frame,
            id: row.id as u32,
            bbox: row.bbox,
        }))
    })?;
    Ok(Parsed {
        value: TrackSet::from_records(parsed.value),
        rejected: parsed.rejected,
    })
}

pub fn parse_mot_tracks(path: &Path) -> Result<Parsed<TrackSet>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_mot_tracks_str(&text, path)
}

fn fixed2(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".to_string()
    } else {
        s
    }
}

/// Canonical track file contents, rows sorted by `(frame, id)`.
pub fn format_mot_tracks(records: &[TrackRecord]) -> String {
    let mut sorted = records.to_vec();
    sorted.sort_by_key(|r| (r.frame, r.id));
    let mut out = String::new();
    for r in &sorted {
        let b = &r.bbox;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},1,-1,-1,-1",
            r.frame,
            r.id,
            fixed2(b.x),
            fixed2(b.y),
            fixed2(b.w),
            fixed2(b.h)
        );
    }
    out
}

pub fn format_mot_dets(dets: &DetsByFrame) -> String {
    let mut out = String::new();
    for d in dets.values().flatten() {
        let b = &d.bbox;
        let _ = writeln!(
            out,
            "{},-1,{},{},{},{},{:.4},-1,-1,-1",
            d.frame,
            fixed2(b.x),
            fixed2(b.y),
            fixed2(b.w),
            fixed2(b.h),
            d.score
        );
    }
    out
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn write_mot_tracks(records: &[TrackRecord], path: &Path) -> Result<()> {
    write_file(path, &format_mot_tracks(records))
}

pub fn write_mot_dets(dets: &DetsByFrame, path: &Path) -> Result<()> {
    write_file(path, &format_mot_dets(dets))
}

/// Sequences under a MOTChallenge-style ground-truth root: either
/// `<root>/<seq>/gt/gt.txt` or flat `<root>/<seq>.txt` files. Sorted by name.
pub fn discover_gt(root: &Path) -> Result<Vec<(String, PathBuf)>> {
    let entries = fs::read_dir(root).map_err(|e| Error::io(root, e))?;
    let mut out = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(root, e))?;
        let path = entry.path();
        let name = entry.file_name().to_string_lossy().into_owned();
        if path.is_dir() {
            let gt = path.join("gt").join("gt.txt");
            if gt.is_file() {
                out.push((name, gt));
            }
        } else if path.extension().is_some_and(|e| e == "txt") {
            let stem = path
                .file_stem()
                .unwrap_or_default()
                .to_string_lossy()
                .into_owned();
            out.push((stem, path));
        }
    }
    out.sort();
    Ok(out)
}
