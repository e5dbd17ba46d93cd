//! Boundary post-processing and annotation consistency checks.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use crate::frames::{FrameSet, Instance};
use crate::geometry::{iof, Rect};

pub const MIN_IOF: f64 = 0.5;
pub const MAX_OVERFLOW_PX: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DiscardReason {
    CenterOutside,
    LowIof,
    Overflow,
}

impl fmt::Display for DiscardReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DiscardReason::CenterOutside => "center_outside",
            DiscardReason::LowIof => "low_iof",
            DiscardReason::Overflow => "overflow",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Discarded {
    pub frame: usize,
    pub instance: Instance,
    pub reason: DiscardReason,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PostprocessResult {
    pub kept: FrameSet,
    pub discarded: Vec<Discarded>,
}

/// Why `inst` would be discarded inside a `width × height` image, if at all.
pub fn discard_reason(inst: &Instance, width: f64, height: f64) -> Option<DiscardReason> {
    let b = &inst.bbox;
    if !(0.0..width).contains(&b.cx()) || !(0.0..height).contains(&b.cy()) {
        return Some(DiscardReason::CenterOutside);
    }
    if iof(b, &Rect::new(0.0, 0.0, width, height)) < MIN_IOF {
        return Some(DiscardReason::LowIof);
    }
    if overflow(inst, width, height) > MAX_OVERFLOW_PX {
        return Some(DiscardReason::Overflow);
    }
    None
}

/// Largest per-axis distance of any corner outside the image.
fn overflow(inst: &Instance, width: f64, height: f64) -> f64 {
    inst.bbox
        .corners()
        .iter()
        .map(|p| (-p.x).max(p.x - width).max(-p.y).max(p.y - height).max(0.0))
        .fold(0.0, f64::max)
}

/// Applies the three discard rules; survivors crossing the image border are
/// flagged truncated, all others cleared.
pub fn postprocess(frames: &FrameSet, width: f64, height: f64) -> PostprocessResult {
    let mut kept = FrameSet::with_frames(frames.len());
    let mut discarded = Vec::new();
    for (t, insts) in frames.iter() {
        for inst in insts {
            match discard_reason(inst, width, height) {
                Some(reason) => discarded.push(Discarded {
                    frame: t,
                    instance: *inst,
                    reason,
                }),
                None => kept.push(
                    t,
                    Instance {
                        truncated: overflow(inst, width, height) > 0.0,
                        ..*inst
                    },
                ),
            }
        }
    }
    PostprocessResult { kept, discarded }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FindingKind {
    DuplicateId,
    ClassMismatch,
    Disappeared,
    NewId,
}

impl FindingKind {
    pub fn severity(self) -> Severity {
        match self {
            FindingKind::DuplicateId | FindingKind::ClassMismatch => Severity::Error,
            FindingKind::Disappeared | FindingKind::NewId => Severity::Warning,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FindingKind::DuplicateId => "DUPLICATE_ID",
            FindingKind::ClassMismatch => "CLASS_MISMATCH",
            FindingKind::Disappeared => "DISAPPEARED",
            FindingKind::NewId => "NEW_ID",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Finding {
    pub severity: Severity,
    pub kind: FindingKind,
    pub frame: usize,
    pub track_id: i64,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "ERROR",
            Severity::Warning => "WARNING",
        };
        write!(f, "{sev} {} frame={} id={}", self.kind.name(), self.frame, self.track_id)
    }
}

/// Annotation QA. Raw detections (id −1) are ignored. Findings are ordered by
/// frame, kind and id.
pub fn validate(frames: &FrameSet) -> Vec<Finding> {
    let mut out = Vec::new();
    let mut push = |kind: FindingKind, frame: usize, track_id: i64| {
        out.push(Finding {
            severity: kind.severity(),
            kind,
            frame,
            track_id,
        })
    };
    let mut ever_seen: HashSet<i64> = HashSet::new();
    let mut prev: HashMap<i64, u8> = HashMap::new();
    for (t, insts) in frames.iter() {
        let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
        let mut cur: HashMap<i64, u8> = HashMap::new();
        for i in insts.iter().filter(|i| i.track_id != -1) {
            *counts.entry(i.track_id).or_default() += 1;
            cur.entry(i.track_id).or_insert(i.class_id);
        }
        for (&id, &n) in &counts {
            if n > 1 {
                push(FindingKind::DuplicateId, t, id);
            }
            if prev.get(&id).is_some_and(|&c| c != cur[&id]) {
                push(FindingKind::ClassMismatch, t, id);
            }
            if t > 1 && !ever_seen.contains(&id) {
                push(FindingKind::NewId, t, id);
            }
        }
        for &id in prev.keys() {
            if !cur.contains_key(&id) {
                push(FindingKind::Disappeared, t, id);
            }
        }
        ever_seen.extend(cur.keys());
        prev = cur;
    }
    out.sort_by_key(|f| (f.frame, f.kind, f.track_id));
    out
}
