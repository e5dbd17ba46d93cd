//! Dataset statistics: density, inter-frame displacement and overlap,
//! class balance and trajectory lengths.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use crate::cmc::{decompose_displacement, DisplacementStats};
use crate::frames::{FrameSet, Instance, CLASS_NAMES};
use crate::transform::SimilarityTransform;

pub const NEIGHBOR_RADIUS: f64 = 300.0;
pub const RIOU_BINS: usize = 10;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StatsReport {
    pub sequences: usize,
    pub frames: usize,
    pub instances: usize,
    pub max_objects_per_frame: usize,
    /// Mean count of other same-frame objects within the radius.
    pub neighbors_within_radius: f64,
    /// Consecutive-frame pairs of one identity.
    pub displacement_pairs: usize,
    pub mean_displacement: DisplacementStats,
    /// Whether per-frame platform transforms were supplied.
    pub compensated: bool,
    /// Inter-frame rIoU of consecutive observations, ten equal bins on [0, 1].
    pub riou_histogram: [usize; RIOU_BINS],
    pub class_counts: [usize; 8],
    /// Trajectory length in frames → number of trajectories.
    pub trajectory_lengths: BTreeMap<usize, usize>,
}

/// `transforms[s][i]` maps frame `i` of sequence `s` (0-based) from the
/// previous frame's coordinates; without transforms the platform is assumed
/// static and the drone component is zero.
pub fn dataset_stats(sequences: &[FrameSet], transforms: Option<&[Vec<SimilarityTransform>]>) -> StatsReport {
    let mut r = StatsReport {
        sequences: sequences.len(),
        compensated: transforms.is_some(),
        ..Default::default()
    };
    let mut neighbor_sum = 0usize;
    let mut disp_sum = DisplacementStats::default();
    for (s, seq) in sequences.iter().enumerate() {
        r.frames += seq.len();
        let mut lengths: HashMap<i64, usize> = HashMap::new();
        let mut prev: HashMap<i64, &Instance> = HashMap::new();
        for (t, insts) in seq.iter() {
            r.instances += insts.len();
            r.max_objects_per_frame = r.max_objects_per_frame.max(insts.len());
            for (a, ia) in insts.iter().enumerate() {
                let ca = ia.bbox.center();
                neighbor_sum += insts
                    .iter()
                    .enumerate()
                    .filter(|&(b, ib)| b != a && ca.distance(&ib.bbox.center()) <= NEIGHBOR_RADIUS)
                    .count();
                if let Some(k) = usize::from(ia.class_id).checked_sub(1).filter(|&k| k < 8) {
                    r.class_counts[k] += 1;
                }
            }
            let platform = transforms
                .and_then(|tr| tr.get(s))
                .and_then(|v| v.get(t - 1))
                .copied()
                .unwrap_or_default();
            let mut cur = HashMap::new();
            for i in insts.iter().filter(|i| i.track_id != -1) {
                *lengths.entry(i.track_id).or_default() += 1;
                if let Some(p) = prev.get(&i.track_id) {
                    let d = decompose_displacement(&p.bbox, &i.bbox, &platform);
                    disp_sum.drone += d.drone;
                    disp_sum.object += d.object;
                    disp_sum.total += d.total;
                    disp_sum.iou_object += d.iou_object;
                    disp_sum.iou_total += d.iou_total;
                    r.displacement_pairs += 1;
                    let bin = ((d.iou_total * RIOU_BINS as f64) as usize).min(RIOU_BINS - 1);
                    r.riou_histogram[bin] += 1;
                }
                cur.insert(i.track_id, i);
            }
            prev = cur;
        }
        for n in lengths.into_values() {
            *r.trajectory_lengths.entry(n).or_default() += 1;
        }
    }
    if r.instances > 0 {
        r.neighbors_within_radius = neighbor_sum as f64 / r.instances as f64;
    }
    if r.displacement_pairs > 0 {
        let n = r.displacement_pairs as f64;
        r.mean_displacement = DisplacementStats {
            drone: disp_sum.drone / n,
            object: disp_sum.object / n,
            total: disp_sum.total / n,
            iou_object: disp_sum.iou_object / n,
            iou_total: disp_sum.iou_total / n,
        };
    }
    r
}

/// `key,value` CSV.
pub fn stats_csv(r: &StatsReport) -> String {
    let mut out = String::from("key,value\n");
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(out, "{k},{v}");
    };
    kv("sequences", r.sequences.to_string());
    kv("frames", r.frames.to_string());
    kv("instances", r.instances.to_string());
    kv("max_objects_per_frame", r.max_objects_per_frame.to_string());
    kv("objects_within_300px", format!("{:.6}", r.neighbors_within_radius));
    kv("displacement_pairs", r.displacement_pairs.to_string());
    kv("compensated", u8::from(r.compensated).to_string());
    let d = &r.mean_displacement;
    kv("mean_drone_px", format!("{:.6}", d.drone));
    kv("mean_object_px", format!("{:.6}", d.object));
    kv("mean_total_px", format!("{:.6}", d.total));
    kv("mean_iou_object", format!("{:.6}", d.iou_object));
    kv("mean_iou_total", format!("{:.6}", d.iou_total));
    for (b, n) in r.riou_histogram.iter().enumerate() {
        kv(&format!("riou_bin_{:.1}_{:.1}", b as f64 / 10.0, (b + 1) as f64 / 10.0), n.to_string());
    }
    for (k, n) in r.class_counts.iter().enumerate() {
        kv(&format!("class_{}", CLASS_NAMES[k]), n.to_string());
    }
    for (len, n) in &r.trajectory_lengths {
        kv(&format!("trajectory_length_{len}"), n.to_string());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::OrientedBox;

    fn inst(id: i64, cx: f64, cy: f64) -> Instance {
        Instance {
            track_id: id,
            class_id: 2,
            bbox: OrientedBox::new(cx, cy, 20.0, 10.0, 0.0).unwrap(),
            confidence: 1.0,
            truncated: false,
        }
    }

    #[test]
    fn lone_object_has_no_neighbors() {
        let fs = FrameSet::from_frames(vec![vec![inst(1, 0.0, 0.0)], vec![inst(1, 5.0, 0.0)]]);
        let r = dataset_stats(&[fs], None);
        assert_eq!(r.neighbors_within_radius, 0.0);
        assert_eq!(r.max_objects_per_frame, 1);
    }

    #[test]
    fn collinear_neighbors() {
        let fs = FrameSet::from_frames(vec![vec![inst(1, 0.0, 0.0), inst(2, 200.0, 0.0), inst(3, 400.0, 0.0)]]);
        let r = dataset_stats(&[fs], None);
        assert!((r.neighbors_within_radius - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn displacement_split() {
        let seq = FrameSet::from_frames((0..4).map(|t| vec![inst(1, 100.0 + 10.0 * t as f64, 50.0)]).collect());
        let tr = vec![SimilarityTransform::translation(8.0, 0.0); 4];
        let r = dataset_stats(std::slice::from_ref(&seq), Some(&[tr]));
        assert_eq!(r.displacement_pairs, 3);
        assert!((r.mean_displacement.drone - 8.0).abs() < 1e-12);
        assert!((r.mean_displacement.object - 2.0).abs() < 1e-12);
        assert!((r.mean_displacement.total - 10.0).abs() < 1e-12);
        let plain = dataset_stats(&[seq], None);
        assert_eq!(plain.mean_displacement.drone, 0.0);
    }

    #[test]
    fn trajectory_histogram_counts_identities() {
        let a = FrameSet::from_frames(vec![vec![inst(1, 0.0, 0.0), inst(2, 50.0, 0.0)], vec![inst(1, 1.0, 0.0)]]);
        let b = FrameSet::from_frames(vec![vec![inst(1, 0.0, 0.0)]]);
        let r = dataset_stats(&[a, b], None);
        assert_eq!(r.trajectory_lengths.values().sum::<usize>(), 3);
        assert_eq!(r.trajectory_lengths[&2], 1);
        assert!(stats_csv(&r).starts_with("key,value\n"));
    }
}
