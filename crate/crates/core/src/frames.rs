//! Per-frame collections of labelled oriented boxes.

use crate::geometry::OrientedBox;

pub const NUM_CLASSES: u8 = 8;

/// Class names indexed by `class_id - 1`.
pub const CLASS_NAMES: [&str; NUM_CLASSES as usize] = [
    "pedestrian",
    "car",
    "van",
    "truck",
    "bus",
    "tricycle",
    "bike",
    "awning-bike",
];

pub fn class_name(class_id: u8) -> &'static str {
    CLASS_NAMES
        .get(usize::from(class_id).wrapping_sub(1))
        .copied()
        .unwrap_or("unknown")
}

pub fn is_valid_class(class_id: u8) -> bool {
    (1..=NUM_CLASSES).contains(&class_id)
}

/// Coarse grouping of the eight classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Superclass {
    Human,
    Vehicle,
    Bicycle,
}

pub fn superclass(class_id: u8) -> Option<Superclass> {
    match class_id {
        1 => Some(Superclass::Human),
        2..=5 => Some(Superclass::Vehicle),
        6..=8 => Some(Superclass::Bicycle),
        _ => None,
    }
}

/// One labelled box in one frame. `track_id` is −1 for raw detections.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Instance {
    pub track_id: i64,
    pub class_id: u8,
    pub bbox: OrientedBox,
    pub confidence: f64,
    pub truncated: bool,
}

/// Frames `1..=len()`; empty frames are allowed.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrameSet {
    frames: Vec<Vec<Instance>>,
}

impl FrameSet {
    pub fn with_frames(n: usize) -> Self {
        Self {
            frames: vec![Vec::new(); n],
        }
    }

    pub fn from_frames(frames: Vec<Vec<Instance>>) -> Self {
        Self { frames }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Instances of 1-based frame `t`; empty for frames past the end.
    pub fn frame(&self, t: usize) -> &[Instance] {
        t.checked_sub(1)
            .and_then(|i| self.frames.get(i))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Appends to 1-based frame `t`, growing the set as needed.
    pub fn push(&mut self, t: usize, inst: Instance) {
        assert!(t >= 1, "frames are 1-based");
        if self.frames.len() < t {
            self.frames.resize(t, Vec::new());
        }
        self.frames[t - 1].push(inst);
    }

    /// Pads with empty frames up to `n`.
    pub fn extend_to(&mut self, n: usize) {
        if self.frames.len() < n {
            self.frames.resize(n, Vec::new());
        }
    }

    /// `(frame, instances)` pairs with 1-based frame numbers.
    pub fn iter(&self) -> impl Iterator<Item = (usize, &[Instance])> {
        self.frames.iter().enumerate().map(|(i, f)| (i + 1, f.as_slice()))
    }

    pub fn frames_mut(&mut self) -> &mut Vec<Vec<Instance>> {
        &mut self.frames
    }

    pub fn num_instances(&self) -> usize {
        self.frames.iter().map(Vec::len).sum()
    }

    /// Sorts each frame by track id (stable for equal ids).
    pub fn sort(&mut self) {
        for f in &mut self.frames {
            f.sort_by_key(|i| i.track_id);
        }
    }
}
