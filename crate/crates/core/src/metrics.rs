//! CLEAR, identity and HOTA tracking metrics over oriented boxes.
//!
//! Every metric is computed per class: ground truth and predictions of a
//! class are compared only with each other, with rIoU as the similarity.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::assignment::solve_max_weight;
use crate::error::{Error, Result};
use crate::frames::{FrameSet, Instance};
use crate::geometry::riou_matrix;

/// Localization thresholds `0.05, 0.10, …, 0.95`.
pub const HOTA_ALPHAS: [f64; 19] = {
    let mut a = [0.0; 19];
    let mut k = 0;
    while k < 19 {
        a[k] = (k + 1) as f64 / 20.0;
        k += 1;
    }
    a
};

/// A pair counts as a localization match at threshold α only when its
/// similarity exceeds α by more than this margin.
pub const ALPHA_MARGIN: f64 = 1e-9;

const CONTINUITY_BONUS: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    /// Similarity threshold for CLEAR and identity matching.
    pub clear_alpha: f64,
    /// Drop truncated ground truth and the predictions matched to it.
    pub exclude_truncated: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            clear_alpha: 0.5,
            exclude_truncated: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ClearCounts {
    pub gt: usize,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub idsw: usize,
}

impl ClearCounts {
    pub fn mota(&self) -> f64 {
        (self.tp as f64 - self.fp as f64 - self.idsw as f64) / self.gt.max(1) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IdCounts {
    pub idtp: usize,
    pub idfp: usize,
    pub idfn: usize,
}

impl IdCounts {
    pub fn idf1(&self) -> f64 {
        let denom = 2 * self.idtp + self.idfp + self.idfn;
        if denom == 0 {
            0.0
        } else {
            2.0 * self.idtp as f64 / denom as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HotaResult {
    pub hota: f64,
    pub deta: f64,
    pub assa: f64,
    pub hota_alpha: [f64; 19],
    pub deta_alpha: [f64; 19],
    pub assa_alpha: [f64; 19],
    pub tp_alpha: [usize; 19],
    pub fp_alpha: [usize; 19],
    pub fn_alpha: [usize; 19],
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassMetrics {
    pub class_id: u8,
    pub gt_instances: usize,
    pub pred_instances: usize,
    pub hota: HotaResult,
    pub clear: ClearCounts,
    pub identity: IdCounts,
}

impl ClassMetrics {
    pub fn summary(&self) -> Summary {
        Summary {
            hota: self.hota.hota,
            mota: self.clear.mota(),
            idf1: self.identity.idf1(),
            deta: self.hota.deta,
            assa: self.hota.assa,
        }
    }
}

/// The five headline ratios.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Summary {
    pub hota: f64,
    pub mota: f64,
    pub idf1: f64,
    pub deta: f64,
    pub assa: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub classes: Vec<ClassMetrics>,
    pub class_averaged: Summary,
    pub detection_averaged: Summary,
}

impl MetricsReport {
    pub fn class(&self, class_id: u8) -> Option<&ClassMetrics> {
        self.classes.iter().find(|c| c.class_id == class_id)
    }

    pub fn totals(&self) -> ClearCounts {
        self.classes.iter().fold(ClearCounts::default(), |acc, c| ClearCounts {
            gt: acc.gt + c.clear.gt,
            tp: acc.tp + c.clear.tp,
            fp: acc.fp + c.clear.fp,
            fn_: acc.fn_ + c.clear.fn_,
            idsw: acc.idsw + c.clear.idsw,
        })
    }
}

/// One frame of a single-class comparison with dense identity indices.
#[derive(Debug, Clone)]
struct FrameData {
    gt: Vec<usize>,
    pred: Vec<usize>,
    sim: Vec<Vec<f64>>,
}

/// A single-class sequence prepared for evaluation.
#[derive(Debug, Clone)]
pub struct ClassSequence {
    frames: Vec<FrameData>,
    n_gt_ids: usize,
    n_pred_ids: usize,
}

fn dense_ids(insts: &[&Instance], map: &mut HashMap<i64, usize>) -> Vec<usize> {
    insts
        .iter()
        .map(|i| {
            let n = map.len();
            *map.entry(i.track_id).or_insert(n)
        })
        .collect()
}

impl ClassSequence {
    /// Extracts `class_id` from both sets. Frame ranges are padded to the
    /// longer of the two.
    pub fn new(gt: &FrameSet, pred: &FrameSet, class_id: u8, options: &EvalOptions) -> Self {
        let n = gt.len().max(pred.len());
        let mut gt_map = HashMap::new();
        let mut pred_map = HashMap::new();
        let mut frames = Vec::with_capacity(n);
        for t in 1..=n {
            let mut g: Vec<&Instance> = gt.frame(t).iter().filter(|i| i.class_id == class_id).collect();
            let mut p: Vec<&Instance> = pred.frame(t).iter().filter(|i| i.class_id == class_id).collect();
            if options.exclude_truncated {
                let (trunc, kept): (Vec<&Instance>, Vec<&Instance>) = g.into_iter().partition(|i| i.truncated);
                if !trunc.is_empty() && !p.is_empty() {
                    let tb: Vec<_> = trunc.iter().map(|i| i.bbox).collect();
                    let pb: Vec<_> = p.iter().map(|i| i.bbox).collect();
                    let sim = riou_matrix(&tb, &pb);
                    let a = solve_max_weight(&sim, pb.len(), |r, c| sim[r][c] >= options.clear_alpha);
                    let drop: BTreeSet<usize> = a.matches.iter().map(|&(_, c)| c).collect();
                    p = p.into_iter().enumerate().filter(|(k, _)| !drop.contains(k)).map(|(_, i)| i).collect();
                }
                g = kept;
            }
            let gb: Vec<_> = g.iter().map(|i| i.bbox).collect();
            let pb: Vec<_> = p.iter().map(|i| i.bbox).collect();
            frames.push(FrameData {
                gt: dense_ids(&g, &mut gt_map),
                pred: dense_ids(&p, &mut pred_map),
                sim: riou_matrix(&gb, &pb),
            });
        }
        Self {
            frames,
            n_gt_ids: gt_map.len(),
            n_pred_ids: pred_map.len(),
        }
    }

    pub fn gt_instances(&self) -> usize {
        self.frames.iter().map(|f| f.gt.len()).sum()
    }

    pub fn pred_instances(&self) -> usize {
        self.frames.iter().map(|f| f.pred.len()).sum()
    }

    pub fn clear(&self, alpha: f64) -> ClearCounts {
        let mut c = ClearCounts::default();
        // last tracker id each gt was matched to, and the match in the previous frame
        let mut last_match: Vec<Option<usize>> = vec![None; self.n_gt_ids];
        let mut prev_frame: Vec<Option<usize>> = vec![None; self.n_gt_ids];
        for f in &self.frames {
            c.gt += f.gt.len();
            if f.gt.is_empty() || f.pred.is_empty() {
                c.fp += f.pred.len();
                c.fn_ += f.gt.len();
                prev_frame.iter_mut().for_each(|p| *p = None);
                continue;
            }
            let score: Vec<Vec<f64>> = f
                .gt
                .iter()
                .enumerate()
                .map(|(r, &g)| {
                    f.pred
                        .iter()
                        .enumerate()
                        .map(|(k, &p)| {
                            let bonus = if prev_frame[g] == Some(p) { CONTINUITY_BONUS } else { 0.0 };
                            bonus + f.sim[r][k]
                        })
                        .collect()
                })
                .collect();
            let a = solve_max_weight(&score, f.pred.len(), |r, k| f.sim[r][k] >= alpha && f.sim[r][k] > 0.0);
            prev_frame.iter_mut().for_each(|p| *p = None);
            for &(r, k) in &a.matches {
                let (g, p) = (f.gt[r], f.pred[k]);
                if last_match[g].is_some_and(|q| q != p) {
                    c.idsw += 1;
                }
                last_match[g] = Some(p);
                prev_frame[g] = Some(p);
            }
            c.tp += a.matches.len();
            c.fn_ += f.gt.len() - a.matches.len();
            c.fp += f.pred.len() - a.matches.len();
        }
        c
    }

    pub fn identity(&self, alpha: f64) -> IdCounts {
        let mut potential = vec![vec![0.0; self.n_pred_ids]; self.n_gt_ids];
        for f in &self.frames {
            for (r, &g) in f.gt.iter().enumerate() {
                for (k, &p) in f.pred.iter().enumerate() {
                    if f.sim[r][k] >= alpha && f.sim[r][k] > 0.0 {
                        potential[g][p] += 1.0;
                    }
                }
            }
        }
        let a = solve_max_weight(&potential, self.n_pred_ids, |g, p| potential[g][p] > 0.0);
        let idtp = a.matches.iter().map(|&(g, p)| potential[g][p] as usize).sum::<usize>();
        IdCounts {
            idtp,
            idfp: self.pred_instances() - idtp,
            idfn: self.gt_instances() - idtp,
        }
    }

    pub fn hota(&self) -> HotaResult {
        let (ng, np) = (self.n_gt_ids, self.n_pred_ids);
        let mut gt_count = vec![0.0; ng];
        let mut pred_count = vec![0.0; np];
        let mut potential = vec![vec![0.0; np]; ng];
        for f in &self.frames {
            let row_sum: Vec<f64> = f.sim.iter().map(|r| r.iter().sum()).collect();
            let col_sum: Vec<f64> = (0..f.pred.len()).map(|k| f.sim.iter().map(|r| r[k]).sum()).collect();
            for (r, &g) in f.gt.iter().enumerate() {
                for (k, &p) in f.pred.iter().enumerate() {
                    let s = f.sim[r][k];
                    if s > 0.0 {
                        potential[g][p] += s / (row_sum[r] + col_sum[k] - s);
                    }
                }
            }
            f.gt.iter().for_each(|&g| gt_count[g] += 1.0);
            f.pred.iter().for_each(|&p| pred_count[p] += 1.0);
        }
        let global: Vec<Vec<f64>> = (0..ng)
            .map(|g| {
                (0..np)
                    .map(|p| potential[g][p] / (gt_count[g] + pred_count[p] - potential[g][p]))
                    .collect()
            })
            .collect();

        let mut tp = [0usize; 19];
        let mut fp = [0usize; 19];
        let mut fn_ = [0usize; 19];
        let mut matches: Vec<BTreeMap<(usize, usize), f64>> = vec![BTreeMap::new(); 19];
        for f in &self.frames {
            let score: Vec<Vec<f64>> = f
                .gt
                .iter()
                .enumerate()
                .map(|(r, &g)| f.pred.iter().enumerate().map(|(k, &p)| global[g][p] * f.sim[r][k]).collect())
                .collect();
            let a = solve_max_weight(&score, f.pred.len(), |r, k| score[r][k] > 0.0);
            for (ai, &alpha) in HOTA_ALPHAS.iter().enumerate() {
                let mut n = 0;
                for &(r, k) in &a.matches {
                    if f.sim[r][k] > alpha + ALPHA_MARGIN {
                        n += 1;
                        *matches[ai].entry((f.gt[r], f.pred[k])).or_insert(0.0) += 1.0;
                    }
                }
                tp[ai] += n;
                fn_[ai] += f.gt.len() - n;
                fp[ai] += f.pred.len() - n;
            }
        }

        let mut hota_alpha = [0.0; 19];
        let mut deta_alpha = [0.0; 19];
        let mut assa_alpha = [0.0; 19];
        for ai in 0..19 {
            let assoc: f64 = matches[ai]
                .iter()
                .map(|(&(g, p), &m)| m * m / (gt_count[g] + pred_count[p] - m))
                .sum();
            assa_alpha[ai] = assoc / tp[ai].max(1) as f64;
            deta_alpha[ai] = tp[ai] as f64 / (tp[ai] + fp[ai] + fn_[ai]).max(1) as f64;
            hota_alpha[ai] = (deta_alpha[ai] * assa_alpha[ai]).sqrt();
        }
        let mean = |v: &[f64; 19]| v.iter().sum::<f64>() / 19.0;
        HotaResult {
            hota: mean(&hota_alpha),
            deta: mean(&deta_alpha),
            assa: mean(&assa_alpha),
            hota_alpha,
            deta_alpha,
            assa_alpha,
            tp_alpha: tp,
            fp_alpha: fp,
            fn_alpha: fn_,
        }
    }
}

fn classes_of(sets: &[&FrameSet]) -> BTreeSet<u8> {
    sets.iter()
        .flat_map(|s| s.iter().flat_map(|(_, f)| f.iter().map(|i| i.class_id)))
        .collect()
}

/// Per-class CLEAR counts at similarity threshold `alpha`.
pub fn clear_metrics(gt: &FrameSet, pred: &FrameSet, alpha: f64) -> BTreeMap<u8, ClearCounts> {
    let opts = EvalOptions::default();
    classes_of(&[gt, pred])
        .into_iter()
        .map(|c| (c, ClassSequence::new(gt, pred, c, &opts).clear(alpha)))
        .collect()
}

/// Per-class identity counts at similarity threshold `alpha`.
pub fn idf1(gt: &FrameSet, pred: &FrameSet, alpha: f64) -> BTreeMap<u8, IdCounts> {
    let opts = EvalOptions::default();
    classes_of(&[gt, pred])
        .into_iter()
        .map(|c| (c, ClassSequence::new(gt, pred, c, &opts).identity(alpha)))
        .collect()
}

pub fn hota(gt: &FrameSet, pred: &FrameSet) -> BTreeMap<u8, HotaResult> {
    let opts = EvalOptions::default();
    classes_of(&[gt, pred])
        .into_iter()
        .map(|c| (c, ClassSequence::new(gt, pred, c, &opts).hota()))
        .collect()
}

/// `(class_averaged, detection_averaged)` over classes with ground truth.
/// The detection average weights each class by its gt instance count.
pub fn aggregate(per_class: &[(Summary, usize)]) -> Result<(Summary, Summary)> {
    let used: Vec<&(Summary, usize)> = per_class.iter().filter(|(_, n)| *n > 0).collect();
    let total: usize = used.iter().map(|(_, n)| n).sum();
    if total == 0 {
        return Err(Error::Domain("no ground-truth instances to aggregate".into()));
    }
    let combine = |weight: &dyn Fn(usize) -> f64| {
        let wsum: f64 = used.iter().map(|(_, n)| weight(*n)).sum();
        let avg = |get: fn(&Summary) -> f64| used.iter().map(|(s, n)| get(s) * weight(*n)).sum::<f64>() / wsum;
        Summary {
            hota: avg(|s| s.hota),
            mota: avg(|s| s.mota),
            idf1: avg(|s| s.idf1),
            deta: avg(|s| s.deta),
            assa: avg(|s| s.assa),
        }
    };
    Ok((combine(&|_| 1.0), combine(&|n| n as f64)))
}

/// Full evaluation: every class present in either set, plus both aggregates.
pub fn evaluate(gt: &FrameSet, pred: &FrameSet, options: &EvalOptions) -> Result<MetricsReport> {
    let classes: Vec<ClassMetrics> = classes_of(&[gt, pred])
        .into_iter()
        .map(|c| {
            let seq = ClassSequence::new(gt, pred, c, options);
            ClassMetrics {
                class_id: c,
                gt_instances: seq.gt_instances(),
                pred_instances: seq.pred_instances(),
                hota: seq.hota(),
                clear: seq.clear(options.clear_alpha),
                identity: seq.identity(options.clear_alpha),
            }
        })
        .collect();
    let pairs: Vec<(Summary, usize)> = classes.iter().map(|c| (c.summary(), c.gt_instances)).collect();
    let (class_averaged, detection_averaged) = aggregate(&pairs)?;
    Ok(MetricsReport {
        classes,
        class_averaged,
        detection_averaged,
    })
}

pub const REPORT_HEADER: &str = "class,HOTA,MOTA,IDF1,DetA,AssA,FP,FN,IDSW";

/// CSV with one row per class and the two aggregate rows. Aggregate rows
/// carry summed FP/FN/IDSW.
pub fn report_csv(report: &MetricsReport) -> String {
    let row = |name: &str, s: &Summary, c: &ClearCounts| {
        format!(
            "{name},{:.6},{:.6},{:.6},{:.6},{:.6},{},{},{}\n",
            s.hota, s.mota, s.idf1, s.deta, s.assa, c.fp, c.fn_, c.idsw
        )
    };
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for c in &report.classes {
        out += &row(crate::frames::class_name(c.class_id), &c.summary(), &c.clear);
    }
    let totals = report.totals();
    out += &row("class_averaged", &report.class_averaged, &totals);
    out += &row("detection_averaged", &report.detection_averaged, &totals);
    out
}

/// Human-readable report.
pub fn report_text(report: &MetricsReport) -> String {
    let mut out = format!(
        "{:<20}{:>8}{:>8}{:>8}{:>8}{:>8}{:>8}{:>8}{:>8}\n",
        "class", "HOTA", "MOTA", "IDF1", "DetA", "AssA", "FP", "FN", "IDSW"
    );
    let mut line = |name: &str, s: &Summary, c: Option<&ClearCounts>| {
        let counts = c.map_or_else(
            || format!("{:>8}{:>8}{:>8}", "", "", ""),
            |c| format!("{:>8}{:>8}{:>8}", c.fp, c.fn_, c.idsw),
        );
        out += &format!(
            "{:<20}{:>8.3}{:>8.3}{:>8.3}{:>8.3}{:>8.3}{}\n",
            name,
            s.hota * 100.0,
            s.mota * 100.0,
            s.idf1 * 100.0,
            s.deta * 100.0,
            s.assa * 100.0,
            counts
        );
    };
    for c in &report.classes {
        line(crate::frames::class_name(c.class_id), &c.summary(), Some(&c.clear));
    }
    line("class_averaged", &report.class_averaged, None);
    line("detection_averaged", &report.detection_averaged, None);
    out
}
