//! The comma-separated oriented-box MOT format.
//!
//! One record per line: `frame,id,cx,cy,w,h,theta,conf,class,truncated`.
//! Lines starting with `#` and blank lines are ignored.

use std::collections::HashSet;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::frames::{is_valid_class, FrameSet, Instance};
use crate::geometry::{OrientedBox, ANGLE_MAX};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObbMotRecord {
    pub frame: usize,
    pub instance: Instance,
}

fn field<T: std::str::FromStr>(raw: &str, name: &str, line: usize) -> Result<T> {
    raw.trim()
        .parse()
        .map_err(|_| Error::parse(line, format!("invalid {name} `{}`", raw.trim())))
}

fn parse_line(text: &str, line: usize) -> Result<ObbMotRecord> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 10 {
        return Err(Error::parse(line, format!("expected 10 fields, found {}", parts.len())));
    }
    let frame: usize = field(parts[0], "frame", line)?;
    if frame == 0 {
        return Err(Error::parse(line, "frame numbers start at 1"));
    }
    let track_id: i64 = field(parts[1], "track id", line)?;
    let mut nums = [0.0f64; 6];
    for (k, name) in ["cx", "cy", "w", "h", "theta", "confidence"].iter().enumerate() {
        nums[k] = field(parts[2 + k], name, line)?;
        if !nums[k].is_finite() {
            return Err(Error::parse(line, format!("{name} must be finite")));
        }
    }
    let class_id: u8 = field(parts[8], "class", line)?;
    if !is_valid_class(class_id) {
        return Err(Error::parse(line, format!("class {class_id} outside 1..8")));
    }
    let truncated = match parts[9].trim() {
        "0" => false,
        "1" => true,
        other => return Err(Error::parse(line, format!("truncated flag must be 0 or 1, got `{other}`"))),
    };
    let [cx, cy, w, h, theta, confidence] = nums;
    let bbox = OrientedBox::new(cx, cy, w, h, theta).map_err(|e| Error::parse(line, e.to_string()))?;
    Ok(ObbMotRecord {
        frame,
        instance: Instance {
            track_id,
            class_id,
            bbox,
            confidence,
            truncated,
        },
    })
}

/// Parses every record without checking identity uniqueness.
pub fn parse_records(text: &str) -> Result<Vec<ObbMotRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| {
            let t = l.trim();
            !t.is_empty() && !t.starts_with('#')
        })
        .map(|(i, l)| parse_line(l, i + 1))
        .collect()
}

/// Groups records by frame in input order.
pub fn group_records(records: &[ObbMotRecord]) -> FrameSet {
    let mut fs = FrameSet::default();
    for r in records {
        fs.push(r.frame, r.instance);
    }
    fs
}

/// Parses a file, rejecting a track id repeated within a frame (raw
/// detections with id −1 are exempt).
pub fn parse_obbmot(text: &str) -> Result<FrameSet> {
    let mut seen = HashSet::new();
    let mut fs = FrameSet::default();
    for (i, l) in text.lines().enumerate() {
        let t = l.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let r = parse_line(l, i + 1)?;
        let id = r.instance.track_id;
        if id != -1 && !seen.insert((r.frame, id)) {
            return Err(Error::parse(i + 1, format!("duplicate track id {id} in frame {}", r.frame)));
        }
        fs.push(r.frame, r.instance);
    }
    Ok(fs)
}

/// Angle text that parses back inside the canonical range.
fn theta_text(theta: f64) -> String {
    let s = format!("{theta:.6}");
    if s.parse::<f64>().is_ok_and(|v| v >= ANGLE_MAX) {
        format!("{:.6}", theta - std::f64::consts::PI)
    } else {
        s
    }
}

pub fn format_record(frame: usize, i: &Instance) -> String {
    let b = &i.bbox;
    format!(
        "{frame},{},{:.6},{:.6},{:.6},{:.6},{},{:.6},{},{}",
        i.track_id,
        b.cx(),
        b.cy(),
        b.w(),
        b.h(),
        theta_text(b.theta()),
        i.confidence,
        i.class_id,
        u8::from(i.truncated)
    )
}

/// Serializes ordered by frame, then track id (ties keep input order).
pub fn write_obbmot(frames: &FrameSet) -> String {
    let mut out = String::new();
    for (t, insts) in frames.iter() {
        let mut sorted: Vec<&Instance> = insts.iter().collect();
        sorted.sort_by_key(|i| i.track_id);
        for i in sorted {
            let _ = writeln!(out, "{}", format_record(t, i));
        }
    }
    out
}
