//! Motion-only tracking-by-detection over oriented boxes.
//!
//! All four algorithms share the oriented Kalman filter and rIoU-gated
//! optimal assignment; they differ in how detections are split, how the
//! association cost is formed and whether platform motion is compensated.
//! Association never crosses class ids.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use crate::assignment::{solve_lap, CostMatrix};
use crate::error::{Error, Result};
use crate::frames::{FrameSet, Instance};
use crate::geometry::{angle_residual, riou, OrientedBox, Point};
use crate::kalman::{self, FilterParams, MotionState, SizeParam};
use crate::kvconfig::{bool_value, unknown_key, value, KeyValueConfig};
use crate::transform::SimilarityTransform;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Sort,
    ByteTrack,
    OcSort,
    BotSort,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::Sort, Algorithm::ByteTrack, Algorithm::OcSort, Algorithm::BotSort];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Sort => "sort",
            Algorithm::ByteTrack => "bytetrack",
            Algorithm::OcSort => "ocsort",
            Algorithm::BotSort => "botsort",
        }
    }

    /// Size parameterization each algorithm's original filter uses.
    pub fn default_size_param(self) -> SizeParam {
        match self {
            Algorithm::Sort | Algorithm::OcSort => SizeParam::AreaAspect,
            Algorithm::ByteTrack | Algorithm::BotSort => SizeParam::WidthHeight,
        }
    }

    fn two_stage(self) -> bool {
        matches!(self, Algorithm::ByteTrack | Algorithm::BotSort)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sort" => Ok(Algorithm::Sort),
            "bytetrack" => Ok(Algorithm::ByteTrack),
            "ocsort" => Ok(Algorithm::OcSort),
            "botsort" => Ok(Algorithm::BotSort),
            other => Err(Error::Config(format!("unknown algorithm `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    pub algorithm: Algorithm,
    /// Detections below this confidence are discarded.
    pub det_threshold: f64,
    /// Two-stage split point (ByteTrack, BoT-SORT).
    pub high_threshold: f64,
    /// Minimum rIoU for a track/detection pair to be associable.
    pub riou_gate: f64,
    pub max_age: u32,
    pub min_hits: u32,
    /// Weight of the direction-consistency term (OC-SORT).
    pub ocm_weight: f64,
    /// Camera-motion compensation (BoT-SORT only).
    pub cmc_enabled: bool,
    pub size_param: SizeParam,
}

impl TrackerConfig {
    pub fn new(algorithm: Algorithm) -> Self {
        Self {
            algorithm,
            det_threshold: 0.1,
            high_threshold: 0.6,
            riou_gate: 0.3,
            max_age: 30,
            min_hits: 3,
            ocm_weight: 0.2,
            cmc_enabled: algorithm == Algorithm::BotSort,
            size_param: algorithm.default_size_param(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !(unit(self.det_threshold) && unit(self.high_threshold) && self.det_threshold <= self.high_threshold) {
            return Err(Error::Config(format!(
                "thresholds must satisfy 0 <= det_threshold ({}) <= high_threshold ({}) <= 1",
                self.det_threshold, self.high_threshold
            )));
        }
        if !unit(self.riou_gate) {
            return Err(Error::Config(format!("riou_gate must lie in [0, 1], got {}", self.riou_gate)));
        }
        if !(self.ocm_weight >= 0.0 && self.ocm_weight.is_finite()) {
            return Err(Error::Config("ocm_weight must be non-negative".into()));
        }
        Ok(())
    }

    fn compensates_motion(&self) -> bool {
        self.algorithm == Algorithm::BotSort && self.cmc_enabled
    }
}

impl KeyValueConfig for TrackerConfig {
    fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "det_threshold" => self.det_threshold = value(key, v)?,
            "high_threshold" => self.high_threshold = value(key, v)?,
            "riou_gate" => self.riou_gate = value(key, v)?,
            "max_age" => self.max_age = value(key, v)?,
            "min_hits" => self.min_hits = value(key, v)?,
            "ocm_weight" => self.ocm_weight = value(key, v)?,
            "cmc_enabled" => self.cmc_enabled = bool_value(key, v)?,
            "size_param" => {
                self.size_param = match v.to_ascii_lowercase().as_str() {
                    "area_aspect" => SizeParam::AreaAspect,
                    "width_height" => SizeParam::WidthHeight,
                    _ => return Err(Error::Config(format!("invalid value `{v}` for key `size_param`"))),
                }
            }
            _ => return Err(unknown_key(key)),
        }
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        TrackerConfig::validate(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub bbox: OrientedBox,
    pub confidence: f64,
    pub class_id: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TrackStatus {
    Tentative,
    Confirmed,
    Lost,
    Removed,
}

#[derive(Debug, Clone)]
pub struct Track {
    pub track_id: u64,
    pub state: MotionState,
    pub class_id: u8,
    pub hits: u32,
    pub age: u32,
    pub time_since_update: u32,
    pub status: TrackStatus,
    pub last_observation: Option<Detection>,
    pub velocity_direction: Option<Point>,
    /// Posterior right after the last real update (observation-centric re-update).
    last_update_state: Option<MotionState>,
    /// Recent observation centers with their frame numbers.
    history: VecDeque<(u32, Point)>,
}

/// Frames back used for the observation-centric velocity direction.
const DIRECTION_DELTA: u32 = 3;

impl Track {
    pub fn predicted_box(&self) -> Option<OrientedBox> {
        self.state.to_box().ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackOutput {
    pub frame: u32,
    pub track_id: u64,
    pub bbox: OrientedBox,
    pub confidence: f64,
    pub class_id: u8,
}

/// Splits detections into `(high, low)` confidence sets; anything below
/// `det_threshold` is dropped.
pub fn split_by_confidence(dets: &[Detection], config: &TrackerConfig) -> (Vec<Detection>, Vec<Detection>) {
    let high = dets.iter().filter(|d| d.confidence >= config.high_threshold).copied().collect();
    let low = dets
        .iter()
        .filter(|d| d.confidence >= config.det_threshold && d.confidence < config.high_threshold)
        .copied()
        .collect();
    (high, low)
}

/// A single-sequence tracker. Not shareable across threads mid-sequence;
/// run one per sequence.
#[derive(Debug, Clone)]
pub struct Tracker {
    config: TrackerConfig,
    params: FilterParams,
    tracks: Vec<Track>,
    next_id: u64,
    frame: u32,
}

impl Tracker {
    pub fn new(config: TrackerConfig) -> Result<Self> {
        config.validate()?;
        let params = FilterParams::for_size_param(config.size_param);
        Ok(Self {
            config,
            params,
            tracks: Vec::new(),
            next_id: 1,
            frame: 0,
        })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    pub fn frame(&self) -> u32 {
        self.frame
    }

    /// Confirmed tracks updated in the current frame.
    pub fn outputs(&self) -> Vec<TrackOutput> {
        let mut out: Vec<TrackOutput> = self
            .tracks
            .iter()
            .filter(|t| t.status == TrackStatus::Confirmed && t.time_since_update == 0)
            .filter_map(|t| {
                t.last_observation.map(|d| TrackOutput {
                    frame: self.frame,
                    track_id: t.track_id,
                    bbox: d.bbox,
                    confidence: d.confidence,
                    class_id: t.class_id,
                })
            })
            .collect();
        out.sort_by_key(|o| o.track_id);
        out
    }

    pub fn step(&mut self, detections: &[Detection]) -> Vec<TrackOutput> {
        self.step_with_motion(detections, None)
    }

    /// Advances one frame. `motion` maps the previous frame into this one and
    /// is used only by BoT-SORT with compensation enabled.
    pub fn step_with_motion(&mut self, detections: &[Detection], motion: Option<&SimilarityTransform>) -> Vec<TrackOutput> {
        self.frame += 1;
        let dets: Vec<Detection> = detections
            .iter()
            .filter(|d| d.confidence >= self.config.det_threshold)
            .copied()
            .collect();

        for t in &mut self.tracks {
            t.state = kalman::predict(&t.state, &self.params);
            t.age += 1;
            t.time_since_update += 1;
        }
        if let (true, Some(m)) = (self.config.compensates_motion(), motion) {
            for t in &mut self.tracks {
                t.state = t.state.warp(m);
            }
        }

        let classes: BTreeSet<u8> = self
            .tracks
            .iter()
            .map(|t| t.class_id)
            .chain(dets.iter().map(|d| d.class_id))
            .collect();
        let mut spawn = Vec::new();
        for class in classes {
            let track_idx: Vec<usize> = (0..self.tracks.len()).filter(|&i| self.tracks[i].class_id == class).collect();
            let class_dets: Vec<Detection> = dets.iter().filter(|d| d.class_id == class).copied().collect();
            spawn.extend(self.associate_class(&track_idx, &class_dets));
        }
        self.retire_unmatched();
        for d in spawn {
            self.spawn(d);
        }
        self.outputs()
    }

    /// Associates one class and applies the updates. Returns detections that
    /// should start new tracks.
    fn associate_class(&mut self, track_idx: &[usize], dets: &[Detection]) -> Vec<Detection> {
        if self.config.algorithm.two_stage() {
            let (high, low) = split_by_confidence(dets, &self.config);
            let (matches, remaining, unmatched_high) = self.match_round(track_idx, &high, false);
            self.apply_matches(&matches, &high);
            let (matches, _, _) = self.match_round(&remaining, &low, false);
            self.apply_matches(&matches, &low);
            unmatched_high.into_iter().map(|i| high[i]).collect()
        } else {
            let ocm = self.config.algorithm == Algorithm::OcSort;
            let (matches, _, unmatched) = self.match_round(track_idx, dets, ocm);
            self.apply_matches(&matches, dets);
            unmatched.into_iter().map(|i| dets[i]).collect()
        }
    }

    /// One gated assignment round. Returns `(track, det)` matches, the
    /// unmatched track indices and unmatched detection indices.
    fn match_round(
        &self,
        track_idx: &[usize],
        dets: &[Detection],
        ocm: bool,
    ) -> (Vec<(usize, usize)>, Vec<usize>, Vec<usize>) {
        let mut costs = CostMatrix::zeros(track_idx.len(), dets.len());
        for (r, &ti) in track_idx.iter().enumerate() {
            let track = &self.tracks[ti];
            let predicted = track.predicted_box();
            for (c, d) in dets.iter().enumerate() {
                let sim = predicted.as_ref().map_or(0.0, |p| riou(p, &d.bbox));
                let mut cost = 1.0 - sim;
                if ocm {
                    cost += self.config.ocm_weight * direction_inconsistency(track, d);
                }
                costs.set(r, c, cost);
                if predicted.is_none() || sim < self.config.riou_gate || sim <= 0.0 {
                    costs.forbid(r, c);
                }
            }
        }
        let a = solve_lap(&costs);
        let matches = a.matches.iter().map(|&(r, c)| (track_idx[r], c)).collect();
        let unmatched_tracks = a.unmatched_rows.iter().map(|&r| track_idx[r]).collect();
        (matches, unmatched_tracks, a.unmatched_cols)
    }

    fn apply_matches(&mut self, matches: &[(usize, usize)], dets: &[Detection]) {
        let oru = self.config.algorithm == Algorithm::OcSort;
        for &(ti, di) in matches {
            let frame = self.frame;
            let min_hits = self.config.min_hits;
            let params = self.params.clone();
            self.tracks[ti].observe(&dets[di], &params, frame, min_hits, oru);
        }
    }

    fn retire_unmatched(&mut self) {
        let max_age = self.config.max_age;
        for t in &mut self.tracks {
            if t.time_since_update == 0 {
                continue;
            }
            match t.status {
                TrackStatus::Tentative => t.status = TrackStatus::Removed,
                TrackStatus::Confirmed => t.status = TrackStatus::Lost,
                _ => {}
            }
            if t.status == TrackStatus::Lost && t.time_since_update > max_age {
                t.status = TrackStatus::Removed;
            }
        }
        self.tracks.retain(|t| t.status != TrackStatus::Removed);
    }

    fn spawn(&mut self, d: Detection) {
        let Ok(state) = kalman::init_state(&d.bbox, &self.params, self.config.size_param) else {
            return;
        };
        let status = if self.frame <= self.config.min_hits || self.config.min_hits <= 1 {
            TrackStatus::Confirmed
        } else {
            TrackStatus::Tentative
        };
        let mut history = VecDeque::new();
        history.push_back((self.frame, d.bbox.center()));
        self.tracks.push(Track {
            track_id: self.next_id,
            last_update_state: Some(state.clone()),
            state,
            class_id: d.class_id,
            hits: 1,
            age: 0,
            time_since_update: 0,
            status,
            last_observation: Some(d),
            velocity_direction: None,
            history,
        });
        self.next_id += 1;
    }
}

impl Track {
    fn observe(&mut self, d: &Detection, params: &FilterParams, frame: u32, min_hits: u32, oru: bool) {
        let gap = self.time_since_update;
        let updated = match (&self.last_update_state, &self.last_observation) {
            (Some(anchor), Some(last)) if oru && gap > 1 => reupdate_along_gap(anchor, &last.bbox, &d.bbox, gap, params),
            _ => kalman::update(&self.state, &d.bbox, params),
        };
        self.state = match updated {
            Ok(s) => s,
            Err(_) => kalman::init_state(&d.bbox, params, self.state.size_param).unwrap_or_else(|_| self.state.clone()),
        };
        self.last_update_state = Some(self.state.clone());

        let center = d.bbox.center();
        let reference = self
            .history
            .iter()
            .rev()
            .find(|(f, _)| frame.saturating_sub(*f) >= DIRECTION_DELTA)
            .or_else(|| self.history.front())
            .map(|(_, p)| *p);
        if let Some(dir) = reference.and_then(|r| unit(Point::new(center.x - r.x, center.y - r.y))) {
            self.velocity_direction = Some(dir);
        }
        self.history.push_back((frame, center));
        while self.history.len() > (DIRECTION_DELTA + 1) as usize {
            self.history.pop_front();
        }

        self.last_observation = Some(*d);
        self.hits += 1;
        self.time_since_update = 0;
        self.status = match self.status {
            TrackStatus::Tentative if self.hits >= min_hits || frame <= min_hits => TrackStatus::Confirmed,
            TrackStatus::Lost => TrackStatus::Confirmed,
            s => s,
        };
    }
}

/// Replays the missed frames with virtual observations interpolated between
/// the last real observation and the new one.
fn reupdate_along_gap(
    anchor: &MotionState,
    from: &OrientedBox,
    to: &OrientedBox,
    gap: u32,
    params: &FilterParams,
) -> Result<MotionState> {
    let mut state = anchor.clone();
    let dtheta = angle_residual(to.angle(), from.angle());
    for i in 1..=gap {
        let f = i as f64 / gap as f64;
        let lerp = |a: f64, b: f64| a + (b - a) * f;
        let virtual_box = if i == gap {
            *to
        } else {
            OrientedBox::new(
                lerp(from.cx(), to.cx()),
                lerp(from.cy(), to.cy()),
                lerp(from.w(), to.w()),
                lerp(from.h(), to.h()),
                from.theta() + dtheta * f,
            )?
        };
        state = kalman::predict(&state, params);
        state = kalman::update(&state, &virtual_box, params)?;
    }
    Ok(state)
}

fn unit(v: Point) -> Option<Point> {
    let n = v.x.hypot(v.y);
    (n > 1e-9).then(|| Point::new(v.x / n, v.y / n))
}

/// Angle between the track's motion direction and the direction from its
/// last observation to the candidate, normalized to `[0, 1]`.
fn direction_inconsistency(track: &Track, d: &Detection) -> f64 {
    let (Some(dir), Some(last)) = (track.velocity_direction, track.last_observation) else {
        return 0.0;
    };
    let c = d.bbox.center();
    let l = last.bbox.center();
    match unit(Point::new(c.x - l.x, c.y - l.y)) {
        Some(cand) => (dir.x * cand.x + dir.y * cand.y).clamp(-1.0, 1.0).acos() / std::f64::consts::PI,
        None => 0.0,
    }
}

/// Runs a whole sequence. `transforms[i]` maps frame `i - 1` into frame `i`
/// (0-based); the entry for the first frame is never used.
pub fn run_sequence(
    config: &TrackerConfig,
    frames: &[Vec<Detection>],
    transforms: Option<&[SimilarityTransform]>,
) -> Result<Vec<TrackOutput>> {
    let mut tracker = Tracker::new(config.clone())?;
    if config.compensates_motion() {
        match transforms {
            None => {
                return Err(Error::Config(
                    "BoT-SORT with camera-motion compensation requires per-frame transforms".into(),
                ))
            }
            Some(t) if t.len() < frames.len() => {
                return Err(Error::Config(format!(
                    "{} transforms supplied for {} frames",
                    t.len(),
                    frames.len()
                )))
            }
            _ => {}
        }
    }
    let mut out = Vec::new();
    for (i, dets) in frames.iter().enumerate() {
        let motion = transforms.and_then(|t| t.get(i));
        out.extend(tracker.step_with_motion(dets, motion));
    }
    Ok(out)
}

/// Per-frame detections from a frame set (ids ignored).
pub fn detections_from_frames(frames: &FrameSet) -> Vec<Vec<Detection>> {
    frames
        .iter()
        .map(|(_, insts)| {
            insts
                .iter()
                .map(|i| Detection {
                    bbox: i.bbox,
                    confidence: i.confidence,
                    class_id: i.class_id,
                })
                .collect()
        })
        .collect()
}

/// Collects tracker outputs into a frame set of `n_frames` frames.
pub fn outputs_to_frames(outputs: &[TrackOutput], n_frames: usize) -> FrameSet {
    let mut fs = FrameSet::with_frames(n_frames);
    for o in outputs {
        fs.push(
            o.frame as usize,
            Instance {
                track_id: o.track_id as i64,
                class_id: o.class_id,
                bbox: o.bbox,
                confidence: o.confidence,
                truncated: false,
            },
        );
    }
    fs.sort();
    fs
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(cx: f64, cy: f64, conf: f64) -> Detection {
        Detection {
            bbox: OrientedBox::new(cx, cy, 20.0, 10.0, 0.2).unwrap(),
            confidence: conf,
            class_id: 2,
        }
    }

    #[test]
    fn config_validation() {
        assert!(Tracker::new(TrackerConfig::new(Algorithm::Sort)).is_ok());
        let mut c = TrackerConfig::new(Algorithm::ByteTrack);
        c.det_threshold = 0.7;
        assert!(matches!(Tracker::new(c), Err(Error::Config(_))));
    }

    #[test]
    fn fresh_tracker_is_empty() {
        let t = Tracker::new(TrackerConfig::new(Algorithm::Sort)).unwrap();
        assert!(t.outputs().is_empty() && t.tracks().is_empty());
    }

    #[test]
    fn independent_id_counters() {
        let mut a = Tracker::new(TrackerConfig::new(Algorithm::Sort)).unwrap();
        let mut b = Tracker::new(TrackerConfig::new(Algorithm::Sort)).unwrap();
        a.step(&[det(10.0, 10.0, 0.9), det(100.0, 10.0, 0.9)]);
        let out = b.step(&[det(10.0, 10.0, 0.9)]);
        assert_eq!(out[0].track_id, 1);
    }

    #[test]
    fn bytetrack_confidence_split() {
        let c = TrackerConfig::new(Algorithm::ByteTrack);
        let dets = [det(0.0, 0.0, 0.9), det(50.0, 0.0, 0.4), det(100.0, 0.0, 0.05)];
        let (high, low) = split_by_confidence(&dets, &c);
        assert_eq!(high.iter().map(|d| d.confidence).collect::<Vec<_>>(), vec![0.9]);
        assert_eq!(low.iter().map(|d| d.confidence).collect::<Vec<_>>(), vec![0.4]);
    }

    #[test]
    fn bytetrack_low_detections_keep_tracks_but_do_not_spawn() {
        let mut t = Tracker::new(TrackerConfig::new(Algorithm::ByteTrack)).unwrap();
        t.step(&[det(10.0, 10.0, 0.9)]);
        // low-confidence detection continues the existing track
        let out = t.step(&[det(11.0, 10.0, 0.3)]);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].track_id, 1);
        // a lone low-confidence detection elsewhere never starts a track
        t.step(&[det(11.0, 10.0, 0.9), det(300.0, 300.0, 0.3)]);
        assert_eq!(t.tracks().len(), 1);
    }

    #[test]
    fn constant_velocity_single_id() {
        for algo in Algorithm::ALL {
            let mut cfg = TrackerConfig::new(algo);
            cfg.cmc_enabled = false;
            let mut t = Tracker::new(cfg).unwrap();
            let mut ids = BTreeSet::new();
            for k in 0..20 {
                for o in t.step(&[det(50.0 + 2.0 * k as f64, 40.0 + 1.0 * k as f64, 0.9)]) {
                    ids.insert(o.track_id);
                }
            }
            assert_eq!(ids.into_iter().collect::<Vec<_>>(), vec![1], "{algo}");
        }
    }

    #[test]
    fn short_gap_resumes_same_id() {
        let mut t = Tracker::new(TrackerConfig::new(Algorithm::Sort)).unwrap();
        let mut seen = Vec::new();
        for k in 0..15 {
            let dets = if (6..8).contains(&k) { vec![] } else { vec![det(50.0 + k as f64, 40.0, 0.9)] };
            seen.extend(t.step(&dets).into_iter().map(|o| o.track_id));
        }
        assert!(seen.iter().all(|&id| id == 1), "{seen:?}");
        assert_eq!(seen.len(), 13);
    }

    #[test]
    fn classes_never_mix() {
        let mut t = Tracker::new(TrackerConfig::new(Algorithm::Sort)).unwrap();
        t.step(&[det(10.0, 10.0, 0.9)]);
        let mut other = det(10.0, 10.0, 0.9);
        other.class_id = 3;
        let out = t.step(&[other]);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].track_id, 2);
        assert_eq!(out[0].class_id, 3);
    }

    #[test]
    fn tentative_tracks_wait_for_min_hits_after_cold_start() {
        let mut t = Tracker::new(TrackerConfig::new(Algorithm::Sort)).unwrap();
        for _ in 0..4 {
            t.step(&[]);
        }
        assert!(t.step(&[det(10.0, 10.0, 0.9)]).is_empty());
        assert!(t.step(&[det(11.0, 10.0, 0.9)]).is_empty());
        let out = t.step(&[det(12.0, 10.0, 0.9)]);
        assert_eq!(out.len(), 1);
    }

    #[test]
    fn lost_tracks_expire_after_max_age() {
        let mut cfg = TrackerConfig::new(Algorithm::Sort);
        cfg.max_age = 2;
        let mut t = Tracker::new(cfg).unwrap();
        t.step(&[det(10.0, 10.0, 0.9)]);
        t.step(&[]);
        assert_eq!(t.tracks()[0].status, TrackStatus::Lost);
        t.step(&[]);
        assert_eq!(t.tracks().len(), 1);
        t.step(&[]);
        assert!(t.tracks().is_empty());
    }

    #[test]
    fn botsort_requires_transforms() {
        let cfg = TrackerConfig::new(Algorithm::BotSort);
        assert!(matches!(run_sequence(&cfg, &[vec![]], None), Err(Error::Config(_))));
        assert!(run_sequence(&cfg, &[], Some(&[])).unwrap().is_empty());
    }

    #[test]
    fn ocsort_direction_tracks_motion() {
        let mut t = Tracker::new(TrackerConfig::new(Algorithm::OcSort)).unwrap();
        for k in 0..6 {
            t.step(&[det(50.0 + 3.0 * k as f64, 40.0, 0.9)]);
        }
        let dir = t.tracks()[0].velocity_direction.unwrap();
        assert!((dir.x - 1.0).abs() < 1e-12 && dir.y.abs() < 1e-12);
    }

    #[test]
    fn ocsort_reupdate_after_gap_recovers_velocity() {
        let mut t = Tracker::new(TrackerConfig::new(Algorithm::OcSort)).unwrap();
        for k in 0..20 {
            let dets = if (8..11).contains(&k) { vec![] } else { vec![det(50.0 + 2.0 * k as f64, 40.0, 0.9)] };
            t.step(&dets);
        }
        let tr = &t.tracks()[0];
        assert_eq!(tr.track_id, 1);
        assert!((tr.state.mean[5] - 2.0).abs() < 0.2, "{}", tr.state.mean[5]);
    }
}
