//! Camera-motion compensation.
//!
//! Platform motion between consecutive frames is estimated by tracking
//! Shi–Tomasi corners with pyramidal Lucas–Kanade and fitting a 4-DOF
//! similarity with RANSAC. The same transform splits apparent object motion
//! into a platform part and a ground-relative part.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::geometry::{riou, OrientedBox, Point};
pub use crate::transform::SimilarityTransform;

pub const PYRAMID_LEVELS: usize = 3;
pub const LK_WINDOW: usize = 21;
pub const LK_MAX_ITERATIONS: usize = 30;
pub const LK_EPSILON: f64 = 0.01;
pub const RANSAC_THRESHOLD: f64 = 3.0;
pub const RANSAC_ITERATIONS: usize = 200;
pub const MIN_TRACKED_PAIRS: usize = 10;

/// Row-major intensity image.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayFrame {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl GrayFrame {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::Shape(format!(
                "{} values for a {width}x{height} frame",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("frame values must be finite"));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            values,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    /// Bilinear sample with edge clamping.
    fn sample(&self, x: f64, y: f64) -> f64 {
        let xmax = (self.width - 1) as f64;
        let ymax = (self.height - 1) as f64;
        let x = x.clamp(0.0, xmax);
        let y = y.clamp(0.0, ymax);
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let top = self.at(x0, y0) * (1.0 - fx) + self.at(x1, y0) * fx;
        let bottom = self.at(x0, y1) * (1.0 - fx) + self.at(x1, y1) * fx;
        top * (1.0 - fy) + bottom * fy
    }

    /// 5-tap binomial blur followed by 2× decimation.
    fn pyr_down(&self) -> GrayFrame {
        const K: [f64; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];
        let (sw, sh) = (self.width, self.height);
        let (w, h) = (sw.div_ceil(2), sh.div_ceil(2));
        let taps = |c: usize, n: usize| -> [usize; 5] { std::array::from_fn(|i| (c + i).saturating_sub(2).min(n - 1)) };
        // horizontal pass only at the even columns that survive decimation
        let mut horiz = vec![0.0; w * sh];
        for x in 0..w {
            let xs = taps(2 * x, sw);
            for y in 0..sh {
                let row = &self.values[y * sw..(y + 1) * sw];
                horiz[y * w + x] = K.iter().zip(&xs).map(|(k, &xi)| k * row[xi]).sum();
            }
        }
        let mut values = vec![0.0; w * h];
        for y in 0..h {
            let ys = taps(2 * y, sh);
            for x in 0..w {
                values[y * w + x] = K.iter().zip(&ys).map(|(k, &yi)| k * horiz[yi * w + x]).sum();
            }
        }
        GrayFrame {
            width: w,
            height: h,
            values,
        }
    }

    fn intensity_range(&self) -> f64 {
        let (lo, hi) = self
            .values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
        hi - lo
    }
}

/// Shi–Tomasi corners, strongest first.
pub fn detect_corners(frame: &GrayFrame, max_count: usize, quality: f64, min_distance: f64) -> Vec<Point> {
    let (w, h) = (frame.width, frame.height);
    if w < 5 || h < 5 || max_count == 0 {
        return Vec::new();
    }
    let mut ixx = vec![0.0; w * h];
    let mut ixy = vec![0.0; w * h];
    let mut iyy = vec![0.0; w * h];
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let p = |dx: isize, dy: isize| frame.at((x as isize + dx) as usize, (y as isize + dy) as usize);
            let gx = (p(1, -1) + 2.0 * p(1, 0) + p(1, 1) - p(-1, -1) - 2.0 * p(-1, 0) - p(-1, 1)) / 8.0;
            let gy = (p(-1, 1) + 2.0 * p(0, 1) + p(1, 1) - p(-1, -1) - 2.0 * p(0, -1) - p(1, -1)) / 8.0;
            let i = y * w + x;
            ixx[i] = gx * gx;
            ixy[i] = gx * gy;
            iyy[i] = gy * gy;
        }
    }
    let mut response = vec![0.0; w * h];
    let mut max_response: f64 = 0.0;
    for y in 2..h - 2 {
        for x in 2..w - 2 {
            let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
            for yy in y - 1..=y + 1 {
                for xx in x - 1..=x + 1 {
                    let i = yy * w + xx;
                    a += ixx[i];
                    b += ixy[i];
                    c += iyy[i];
                }
            }
            let half_tr = (a + c) / 2.0;
            let r = half_tr - (((a - c) / 2.0).powi(2) + b * b).sqrt();
            response[y * w + x] = r;
            max_response = max_response.max(r);
        }
    }
    if max_response <= 0.0 {
        return Vec::new();
    }
    let threshold = quality * max_response;
    let mut candidates = Vec::new();
    for y in 2..h - 2 {
        for x in 2..w - 2 {
            let r = response[y * w + x];
            if r <= 0.0 || r < threshold {
                continue;
            }
            let is_max = (y - 1..=y + 1)
                .all(|yy| (x - 1..=x + 1).all(|xx| response[yy * w + xx] <= r));
            if is_max {
                candidates.push((r, x, y));
            }
        }
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.2, a.1).cmp(&(b.2, b.1))));

    let mut accepted: Vec<Point> = Vec::new();
    for (_, x, y) in candidates {
        let p = Point::new(x as f64, y as f64);
        if accepted.iter().all(|q| q.distance(&p) >= min_distance) {
            accepted.push(p);
            if accepted.len() == max_count {
                break;
            }
        }
    }
    accepted
}

struct PyramidLevel {
    image: GrayFrame,
    gx: GrayFrame,
    gy: GrayFrame,
}

/// Scharr derivatives normalized to intensity per pixel, edge-clamped.
fn scharr(img: &GrayFrame) -> (GrayFrame, GrayFrame) {
    let (w, h) = (img.width, img.height);
    let v = &img.values;
    let mut gx = vec![0.0; w * h];
    let mut gy = vec![0.0; w * h];
    for y in 0..h {
        let (up, down) = (y.saturating_sub(1) * w, (y + 1).min(h - 1) * w);
        let mid = y * w;
        for x in 0..w {
            let (l, r) = (x.saturating_sub(1), (x + 1).min(w - 1));
            gx[mid + x] = (3.0 * (v[up + r] - v[up + l]) + 10.0 * (v[mid + r] - v[mid + l]) + 3.0 * (v[down + r] - v[down + l])) / 32.0;
            gy[mid + x] = (3.0 * (v[down + l] - v[up + l]) + 10.0 * (v[down + x] - v[up + x]) + 3.0 * (v[down + r] - v[up + r])) / 32.0;
        }
    }
    let frame = |values| GrayFrame {
        width: w,
        height: h,
        values,
    };
    (frame(gx), frame(gy))
}

/// Image pyramid with derivatives. Building it dominates tracking cost, so
/// sequence estimation builds one per frame and reuses it for both pairs the
/// frame belongs to.
pub struct Pyramid {
    levels: Vec<PyramidLevel>,
    range: f64,
}

impl Pyramid {
    pub fn new(frame: &GrayFrame) -> Self {
        let mut levels = Vec::with_capacity(PYRAMID_LEVELS);
        let mut current = frame.clone();
        for level in 0..PYRAMID_LEVELS {
            let (gx, gy) = scharr(&current);
            let next = (level + 1 < PYRAMID_LEVELS).then(|| current.pyr_down());
            levels.push(PyramidLevel { image: current, gx, gy });
            match next {
                Some(n) => current = n,
                None => break,
            }
        }
        Self {
            levels,
            range: frame.intensity_range(),
        }
    }

    pub fn base(&self) -> &GrayFrame {
        &self.levels[0].image
    }
}

/// Pyramidal Lucas–Kanade. Each input point maps to `Some(new position)` or
/// `None` when the window is untrackable or the flow leaves the frame.
pub fn track_lk(prev: &GrayFrame, next: &GrayFrame, points: &[Point]) -> Result<Vec<(Point, Option<Point>)>> {
    check_sizes(prev, next)?;
    if prev.intensity_range() <= 0.0 {
        return Ok(points.iter().map(|p| (*p, None)).collect());
    }
    Ok(track_pyramids(&Pyramid::new(prev), &Pyramid::new(next), points))
}

fn check_sizes(prev: &GrayFrame, next: &GrayFrame) -> Result<()> {
    if prev.width != next.width || prev.height != next.height {
        return Err(Error::domain(format!(
            "frame sizes differ: {}x{} vs {}x{}",
            prev.width, prev.height, next.width, next.height
        )));
    }
    Ok(())
}

fn track_pyramids(prev: &Pyramid, next: &Pyramid, points: &[Point]) -> Vec<(Point, Option<Point>)> {
    if prev.range <= 0.0 {
        return points.iter().map(|p| (*p, None)).collect();
    }
    let min_eig = 1e-5 * prev.range * prev.range;
    points
        .iter()
        .map(|p| (*p, track_point(&prev.levels, &next.levels, *p, min_eig)))
        .collect()
}

fn track_point(prev: &[PyramidLevel], next: &[PyramidLevel], p: Point, min_eig: f64) -> Option<Point> {
    let half = (LK_WINDOW / 2) as isize;
    let n_px = (LK_WINDOW * LK_WINDOW) as f64;
    let (w0, h0) = (prev[0].image.width as f64, prev[0].image.height as f64);
    if !(p.x >= 0.0 && p.y >= 0.0 && p.x <= w0 - 1.0 && p.y <= h0 - 1.0) {
        return None;
    }
    let mut guess = (0.0, 0.0);
    for level in (0..prev.len()).rev() {
        let scale = (1u32 << level) as f64;
        let (px, py) = (p.x / scale, p.y / scale);
        let (pl, nl) = (&prev[level], &next[level]);

        let mut window = Vec::with_capacity(LK_WINDOW * LK_WINDOW);
        let (mut gxx, mut gxy, mut gyy) = (0.0, 0.0, 0.0);
        for dy in -half..=half {
            for dx in -half..=half {
                let x = px + dx as f64;
                let y = py + dy as f64;
                let ix = pl.gx.sample(x, y);
                let iy = pl.gy.sample(x, y);
                gxx += ix * ix;
                gxy += ix * iy;
                gyy += iy * iy;
                window.push((dx as f64, dy as f64, pl.image.sample(x, y), ix, iy));
            }
        }
        let half_tr = (gxx + gyy) / 2.0;
        let lambda_min = half_tr - (((gxx - gyy) / 2.0).powi(2) + gxy * gxy).sqrt();
        if lambda_min / n_px < min_eig {
            return None;
        }
        let det = gxx * gyy - gxy * gxy;

        let mut nu = (0.0, 0.0);
        for _ in 0..LK_MAX_ITERATIONS {
            let (mut bx, mut by) = (0.0, 0.0);
            for &(dx, dy, i, ix, iy) in &window {
                let j = nl.image.sample(px + dx + guess.0 + nu.0, py + dy + guess.1 + nu.1);
                let diff = i - j;
                bx += diff * ix;
                by += diff * iy;
            }
            let ex = (gyy * bx - gxy * by) / det;
            let ey = (gxx * by - gxy * bx) / det;
            nu.0 += ex;
            nu.1 += ey;
            if !(nu.0.is_finite() && nu.1.is_finite()) {
                return None;
            }
            if ex.hypot(ey) < LK_EPSILON {
                break;
            }
        }
        guess = if level > 0 {
            (2.0 * (guess.0 + nu.0), 2.0 * (guess.1 + nu.1))
        } else {
            (guess.0 + nu.0, guess.1 + nu.1)
        };
    }
    let q = Point::new(p.x + guess.0, p.y + guess.1);
    let inside = q.x >= 0.0 && q.y >= 0.0 && q.x <= w0 - 1.0 && q.y <= h0 - 1.0;
    inside.then_some(q)
}

/// Least-squares similarity over all pairs (closed form via complex ratios).
pub fn least_squares_similarity(pairs: &[(Point, Point)]) -> Result<SimilarityTransform> {
    if pairs.len() < 2 {
        return Err(Error::Estimation(format!(
            "need at least 2 point pairs, got {}",
            pairs.len()
        )));
    }
    let n = pairs.len() as f64;
    let (mut px, mut py, mut qx, mut qy) = (0.0, 0.0, 0.0, 0.0);
    for (p, q) in pairs {
        px += p.x;
        py += p.y;
        qx += q.x;
        qy += q.y;
    }
    let (px, py, qx, qy) = (px / n, py / n, qx / n, qy / n);
    let (mut re, mut im, mut norm) = (0.0, 0.0, 0.0);
    for (p, q) in pairs {
        let (ax, ay) = (p.x - px, p.y - py);
        let (bx, by) = (q.x - qx, q.y - qy);
        // (b) * conj(a)
        re += bx * ax + by * ay;
        im += by * ax - bx * ay;
        norm += ax * ax + ay * ay;
    }
    let spread = pairs.iter().map(|(p, _)| (p.x - px).abs().max((p.y - py).abs())).fold(0.0, f64::max);
    if norm <= 0.0 || spread < 1e-9 {
        return Err(Error::Estimation("source points are coincident".into()));
    }
    let (ar, ai) = (re / norm, im / norm);
    let scale = ar.hypot(ai);
    if scale <= 0.0 {
        return Err(Error::Estimation("degenerate similarity (zero scale)".into()));
    }
    let rotation = ai.atan2(ar);
    Ok(SimilarityTransform {
        scale,
        rotation,
        tx: qx - (ar * px - ai * py),
        ty: qy - (ai * px + ar * py),
    })
}

/// RANSAC (2-point samples) followed by a least-squares refit on the inliers.
pub fn fit_similarity(pairs: &[(Point, Point)]) -> Result<SimilarityTransform> {
    fit_similarity_seeded(pairs, 0)
}

pub fn fit_similarity_seeded(pairs: &[(Point, Point)], seed: u64) -> Result<SimilarityTransform> {
    if pairs.len() < 2 {
        return Err(Error::Estimation(format!(
            "need at least 2 point pairs, got {}",
            pairs.len()
        )));
    }
    let inliers_of = |t: &SimilarityTransform| -> Vec<usize> {
        pairs
            .iter()
            .enumerate()
            .filter(|(_, (p, q))| t.apply(*p).distance(q) <= RANSAC_THRESHOLD)
            .map(|(i, _)| i)
            .collect()
    };

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut best: Option<Vec<usize>> = None;
    for _ in 0..RANSAC_ITERATIONS {
        let i = rng.random_range(0..pairs.len());
        let mut j = rng.random_range(0..pairs.len() - 1);
        if j >= i {
            j += 1;
        }
        let Ok(model) = least_squares_similarity(&[pairs[i], pairs[j]]) else {
            continue;
        };
        let inliers = inliers_of(&model);
        if best.as_ref().is_none_or(|b| inliers.len() > b.len()) {
            let all = inliers.len() == pairs.len();
            best = Some(inliers);
            if all {
                break;
            }
        }
    }
    let best = best.ok_or_else(|| Error::Estimation("all sampled point pairs are degenerate".into()))?;
    let subset: Vec<_> = best.iter().map(|&i| pairs[i]).collect();
    let model = least_squares_similarity(&subset)?;
    // one refinement pass with the consensus model
    let refined: Vec<_> = inliers_of(&model).into_iter().map(|i| pairs[i]).collect();
    if refined.len() >= best.len() {
        least_squares_similarity(&refined).or(Ok(model))
    } else {
        Ok(model)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlatformMotion {
    pub transform: SimilarityTransform,
    /// Identity fallback because too few points could be tracked.
    pub degraded: bool,
    pub tracked_pairs: usize,
}

/// Corner detection, LK tracking and a robust similarity fit.
pub fn estimate_platform_motion(prev: &GrayFrame, next: &GrayFrame) -> Result<PlatformMotion> {
    check_sizes(prev, next)?;
    Ok(estimate_between(&Pyramid::new(prev), &Pyramid::new(next)))
}

fn estimate_between(prev: &Pyramid, next: &Pyramid) -> PlatformMotion {
    let corners = detect_corners(prev.base(), 400, 0.01, 7.0);
    let pairs: Vec<(Point, Point)> = track_pyramids(prev, next, &corners)
        .into_iter()
        .filter_map(|(p, q)| q.map(|q| (p, q)))
        .collect();
    let degraded = PlatformMotion {
        transform: SimilarityTransform::identity(),
        degraded: true,
        tracked_pairs: pairs.len(),
    };
    if pairs.len() < MIN_TRACKED_PAIRS {
        return degraded;
    }
    match fit_similarity(&pairs) {
        Ok(transform) => PlatformMotion {
            transform,
            degraded: false,
            tracked_pairs: pairs.len(),
        },
        Err(_) => degraded,
    }
}

/// Per-frame motion of a whole sequence: entry `t` maps frame `t - 1` into
/// frame `t`, and entry 0 is the identity.
pub fn estimate_sequence_motion(frames: &[GrayFrame]) -> Result<Vec<PlatformMotion>> {
    let mut out = Vec::with_capacity(frames.len());
    let Some(first) = frames.first() else {
        return Ok(out);
    };
    out.push(PlatformMotion {
        transform: SimilarityTransform::identity(),
        degraded: false,
        tracked_pairs: 0,
    });
    let mut prev = Pyramid::new(first);
    for pair in frames.windows(2) {
        check_sizes(&pair[0], &pair[1])?;
        let next = Pyramid::new(&pair[1]);
        out.push(estimate_between(&prev, &next));
        prev = next;
    }
    Ok(out)
}

/// Apparent displacement split into platform and ground-relative parts.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DisplacementStats {
    pub drone: f64,
    pub object: f64,
    pub total: f64,
    pub iou_object: f64,
    pub iou_total: f64,
}

pub fn decompose_displacement(
    prev_box: &OrientedBox,
    next_box: &OrientedBox,
    platform: &SimilarityTransform,
) -> DisplacementStats {
    let c = prev_box.center();
    let c_next = next_box.center();
    let carried = platform.apply(c);
    DisplacementStats {
        drone: carried.distance(&c),
        object: c_next.distance(&carried),
        total: c_next.distance(&c),
        iou_object: riou(&platform.apply_box(prev_box), next_box),
        iou_total: riou(prev_box, next_box),
    }
}
