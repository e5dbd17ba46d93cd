//! Synthetic scenarios with exact ground truth, and detection perturbation.
//!
//! Objects move on the ground plane with constant speed and constant turn
//! rate; the camera platform adds a per-frame similarity (drift, yaw and
//! jitter). Randomness comes from ChaCha20 with one stream per purpose, so
//! changing one knob does not reshuffle unrelated draws.

use std::f64::consts::{PI, TAU};

use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::cmc::GrayFrame;
use crate::dataio::SpectralCube;
use crate::error::{Error, Result};
use crate::frames::{FrameSet, Instance};
use crate::geometry::{OrientedBox, Point, ANGLE_MAX, ANGLE_MIN};
use crate::kvconfig::{bool_value, list_value, unknown_key, value, KeyValueConfig};
use crate::tracker::Detection;
use crate::transform::SimilarityTransform;

/// Per-band reflectances: background first, then classes 1..8.
const SIGNATURES_CSV: &str = include_str!("../fixtures/signatures.csv");

const STREAM_PLATFORM: u64 = 1;
const STREAM_OBJECTS: u64 = 2;
const STREAM_MISS_NOISE: u64 = 3;
const STREAM_FALSE_POSITIVES: u64 = 4;

const PLACEMENT_ATTEMPTS: usize = 2000;

fn rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut r = ChaCha20Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub n_objects: usize,
    pub frames: usize,
    pub image_width: f64,
    pub image_height: f64,
    /// Ground speed range in px/frame.
    pub speed_min: f64,
    pub speed_max: f64,
    /// Turn-rate magnitude range in rad/frame; the sign is random.
    pub turn_rate_min: f64,
    pub turn_rate_max: f64,
    /// Long-side length range in px.
    pub box_size_min: f64,
    pub box_size_max: f64,
    /// Long/short side ratio range.
    pub aspect_min: f64,
    pub aspect_max: f64,
    /// Apparent background translation per frame (px).
    pub platform_tx: f64,
    pub platform_ty: f64,
    /// Yaw per frame about the image center (rad).
    pub platform_rotation: f64,
    /// Std of an extra random translation per frame (px).
    pub platform_jitter: f64,
    pub class_weights: [f64; 8],
    /// Minimum center distance between any two objects in every frame.
    pub min_separation: f64,
    /// Objects stay this far inside the image in every frame.
    pub border_margin: f64,
    pub render_cubes: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_objects: 10,
            frames: 50,
            image_width: 1024.0,
            image_height: 768.0,
            speed_min: 1.0,
            speed_max: 3.0,
            turn_rate_min: 0.0,
            turn_rate_max: 0.02,
            box_size_min: 16.0,
            box_size_max: 48.0,
            aspect_min: 1.2,
            aspect_max: 3.0,
            platform_tx: 0.0,
            platform_ty: 0.0,
            platform_rotation: 0.0,
            platform_jitter: 0.0,
            class_weights: [0.125; 8],
            min_separation: 80.0,
            border_margin: 40.0,
            render_cubes: false,
        }
    }
}

impl ScenarioConfig {
    /// Strong drift with jitter on tiny square boxes.
    pub fn platform_stress(seed: u64) -> Self {
        Self {
            seed,
            n_objects: 12,
            frames: 40,
            speed_min: 1.0,
            speed_max: 2.0,
            box_size_min: 8.0,
            box_size_max: 8.0,
            aspect_min: 1.0,
            aspect_max: 1.0,
            platform_tx: 10.0,
            platform_jitter: 3.0,
            min_separation: 48.0,
            ..Self::default()
        }
    }

    pub fn check(&self) -> Result<()> {
        let pairs = [
            ("speed", self.speed_min, self.speed_max),
            ("turn_rate", self.turn_rate_min, self.turn_rate_max),
            ("box_size", self.box_size_min, self.box_size_max),
            ("aspect", self.aspect_min, self.aspect_max),
        ];
        for (name, lo, hi) in pairs {
            if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi) {
                return Err(Error::Config(format!("{name} range [{lo}, {hi}] must be non-negative and ordered")));
            }
        }
        if self.box_size_min <= 0.0 || self.aspect_min < 1.0 {
            return Err(Error::Config("box sizes must be positive and aspect at least 1".into()));
        }
        if !(self.image_width > 0.0 && self.image_height > 0.0) {
            return Err(Error::Config("image size must be positive".into()));
        }
        if !(self.platform_jitter >= 0.0 && self.min_separation >= 0.0 && self.border_margin >= 0.0) {
            return Err(Error::Config("jitter, separation and margin must be non-negative".into()));
        }
        if 2.0 * self.border_margin >= self.image_width.min(self.image_height) {
            return Err(Error::Config("border margin leaves no room for objects".into()));
        }
        let sum: f64 = self.class_weights.iter().sum();
        if self.class_weights.iter().any(|w| *w < 0.0) || (sum - 1.0).abs() > 1e-6 {
            return Err(Error::Config(format!("class weights must be non-negative and sum to 1 (sum {sum})")));
        }
        Ok(())
    }
}

impl KeyValueConfig for ScenarioConfig {
    fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "seed" => self.seed = value(key, v)?,
            "n_objects" => self.n_objects = value(key, v)?,
            "frames" => self.frames = value(key, v)?,
            "image_width" => self.image_width = value(key, v)?,
            "image_height" => self.image_height = value(key, v)?,
            "speed_min" => self.speed_min = value(key, v)?,
            "speed_max" => self.speed_max = value(key, v)?,
            "turn_rate_min" => self.turn_rate_min = value(key, v)?,
            "turn_rate_max" => self.turn_rate_max = value(key, v)?,
            "box_size_min" => self.box_size_min = value(key, v)?,
            "box_size_max" => self.box_size_max = value(key, v)?,
            "aspect_min" => self.aspect_min = value(key, v)?,
            "aspect_max" => self.aspect_max = value(key, v)?,
            "platform_tx" => self.platform_tx = value(key, v)?,
            "platform_ty" => self.platform_ty = value(key, v)?,
            "platform_rotation" => self.platform_rotation = value(key, v)?,
            "platform_jitter" => self.platform_jitter = value(key, v)?,
            "class_weights" => {
                let w = list_value(key, v)?;
                self.class_weights = w
                    .try_into()
                    .map_err(|_| Error::Config("class_weights needs exactly 8 values".into()))?;
            }
            "min_separation" => self.min_separation = value(key, v)?,
            "border_margin" => self.border_margin = value(key, v)?,
            "render_cubes" => self.render_cubes = bool_value(key, v)?,
            _ => return Err(unknown_key(key)),
        }
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        self.check()
    }
}

/// Smooth multi-octave value noise on an unbounded lattice, in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ValueNoise {
    seed: u64,
}

impl ValueNoise {
    const OCTAVES: [(f64, f64); 3] = [(24.0, 0.5), (11.0, 0.3), (5.0, 0.2)];

    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    fn lattice(&self, octave: u64, ix: i64, iy: i64) -> f64 {
        // splitmix64 finalizer over the packed coordinates
        let mut z = self
            .seed
            .wrapping_add(octave.wrapping_mul(0x9E37_79B9_7F4A_7C15))
            .wrapping_add((ix as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9))
            .wrapping_add((iy as u64).wrapping_mul(0x94D0_49BB_1331_11EB));
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
        (z >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let smooth = |t: f64| t * t * (3.0 - 2.0 * t);
        let mut acc = 0.0;
        for (o, &(period, amp)) in Self::OCTAVES.iter().enumerate() {
            let (gx, gy) = (x / period, y / period);
            let (fx, fy) = (gx.floor(), gy.floor());
            let (ix, iy) = (fx as i64, fy as i64);
            let (tx, ty) = (smooth(gx - fx), smooth(gy - fy));
            let o = o as u64;
            let top = self.lattice(o, ix, iy) * (1.0 - tx) + self.lattice(o, ix + 1, iy) * tx;
            let bottom = self.lattice(o, ix, iy + 1) * (1.0 - tx) + self.lattice(o, ix + 1, iy + 1) * tx;
            acc += amp * (top * (1.0 - ty) + bottom * ty);
        }
        acc
    }
}

/// `(background, per-class)` signatures from the shipped fixture.
pub fn spectral_signatures() -> ([f64; 8], [[f64; 8]; 8]) {
    let mut rows = SIGNATURES_CSV
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("id"))
        .map(|l| {
            let v: Vec<f64> = l.split(',').skip(1).map(|s| s.trim().parse().expect("fixture number")).collect();
            <[f64; 8]>::try_from(v).expect("eight bands per signature")
        });
    let background = rows.next().expect("background row");
    let classes: Vec<[f64; 8]> = rows.collect();
    (background, classes.try_into().expect("eight class rows"))
}

#[derive(Debug, Clone, PartialEq)]
struct ObjectPlan {
    class_id: u8,
    w: f64,
    h: f64,
    /// Ground position and heading per frame.
    ground: Vec<(Point, f64)>,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub gt: FrameSet,
    /// `transforms[i]` maps frame `i` (0-based) from the previous frame; the
    /// first entry is the identity.
    pub transforms: Vec<SimilarityTransform>,
    /// Ground (first-frame) coordinates into each frame.
    pub cumulative: Vec<SimilarityTransform>,
    pub cubes: Option<Vec<SpectralCube>>,
    texture: ValueNoise,
}

fn platform_chain(config: &ScenarioConfig) -> (Vec<SimilarityTransform>, Vec<SimilarityTransform>) {
    let mut r = rng(config.seed, STREAM_PLATFORM);
    let jitter = Normal::new(0.0, config.platform_jitter).expect("non-negative std");
    let center = Point::new(config.image_width / 2.0, config.image_height / 2.0);
    let mut per_frame = Vec::with_capacity(config.frames);
    let mut cumulative = Vec::with_capacity(config.frames);
    for t in 0..config.frames {
        let step = if t == 0 {
            SimilarityTransform::identity()
        } else {
            let (jx, jy) = if config.platform_jitter > 0.0 {
                (jitter.sample(&mut r), jitter.sample(&mut r))
            } else {
                (0.0, 0.0)
            };
            SimilarityTransform::about(
                center,
                1.0,
                config.platform_rotation,
                config.platform_tx + jx,
                config.platform_ty + jy,
            )
        };
        let prev = cumulative.last().copied().unwrap_or_default();
        cumulative.push(step.compose(&prev));
        per_frame.push(step);
    }
    (per_frame, cumulative)
}

/// Generates a scenario. Fails when the objects cannot be placed inside the
/// margin with the requested separation.
pub fn generate(config: &ScenarioConfig) -> Result<Scenario> {
    config.check()?;
    let (transforms, cumulative) = platform_chain(config);
    let mut r = rng(config.seed, STREAM_OBJECTS);
    let classes = WeightedIndex::new(config.class_weights).map_err(|e| Error::Config(e.to_string()))?;
    let m = config.border_margin;
    let inside = |p: Point| {
        p.x >= m && p.x <= config.image_width - m && p.y >= m && p.y <= config.image_height - m
    };

    let mut plans: Vec<ObjectPlan> = Vec::with_capacity(config.n_objects);
    let mut image_paths: Vec<Vec<Point>> = Vec::new();
    for i in 0..config.n_objects {
        let mut placed = false;
        for _ in 0..PLACEMENT_ATTEMPTS {
            let mut p = Point::new(
                r.random_range(m..=config.image_width - m),
                r.random_range(m..=config.image_height - m),
            );
            let mut heading = r.random_range(0.0..TAU);
            let speed = r.random_range(config.speed_min..=config.speed_max);
            let turn = r.random_range(config.turn_rate_min..=config.turn_rate_max) * if r.random_bool(0.5) { 1.0 } else { -1.0 };
            let w = r.random_range(config.box_size_min..=config.box_size_max);
            let h = w / r.random_range(config.aspect_min..=config.aspect_max);
            let class_id = classes.sample(&mut r) as u8 + 1;

            let mut ground = Vec::with_capacity(config.frames);
            let mut path = Vec::with_capacity(config.frames);
            let mut ok = true;
            for (t, c) in cumulative.iter().enumerate() {
                if t > 0 {
                    p = Point::new(p.x + speed * heading.cos(), p.y + speed * heading.sin());
                    heading += turn;
                }
                let q = c.apply(p);
                if !inside(q) || image_paths.iter().any(|other| other[t].distance(&q) < config.min_separation) {
                    ok = false;
                    break;
                }
                ground.push((p, heading));
                path.push(q);
            }
            if ok {
                plans.push(ObjectPlan { class_id, w, h, ground });
                image_paths.push(path);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::Config(format!(
                "could not place object {} of {} within the margin and separation constraints",
                i + 1,
                config.n_objects
            )));
        }
    }

    let mut gt = FrameSet::with_frames(config.frames);
    for (t, c) in cumulative.iter().enumerate() {
        for (i, plan) in plans.iter().enumerate() {
            let (p, heading) = plan.ground[t];
            let ground_box = OrientedBox::new(p.x, p.y, plan.w, plan.h, heading.rem_euclid(PI))?;
            gt.push(
                t + 1,
                Instance {
                    track_id: i as i64 + 1,
                    class_id: plan.class_id,
                    bbox: c.apply_box(&ground_box),
                    confidence: 1.0,
                    truncated: false,
                },
            );
        }
    }

    let mut scenario = Scenario {
        config: config.clone(),
        gt,
        transforms,
        cumulative,
        cubes: None,
        texture: ValueNoise::new(config.seed),
    };
    if config.render_cubes {
        scenario.cubes = Some((1..=config.frames).map(|t| scenario.render_cube(t)).collect());
    }
    Ok(scenario)
}

impl Scenario {
    pub fn width(&self) -> usize {
        self.config.image_width.round() as usize
    }

    pub fn height(&self) -> usize {
        self.config.image_height.round() as usize
    }

    /// Background noise value at an image pixel of 1-based frame `t`.
    fn background(&self, inv: &SimilarityTransform, x: usize, y: usize) -> f64 {
        let g = inv.apply(Point::new(x as f64, y as f64));
        self.texture.sample(g.x, g.y)
    }

    /// Calls `paint(x, y, class_id)` for every pixel covered by an object.
    fn for_object_pixels(&self, t: usize, mut paint: impl FnMut(usize, usize, u8)) {
        let (w, h) = (self.width(), self.height());
        for inst in self.gt.frame(t) {
            let corners = inst.bbox.corners();
            let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
            for c in corners {
                x0 = x0.min(c.x);
                x1 = x1.max(c.x);
                y0 = y0.min(c.y);
                y1 = y1.max(c.y);
            }
            let clamp = |v: f64, n: usize| v.max(0.0).min(n as f64 - 1.0) as usize;
            for y in clamp(y0.floor(), h)..=clamp(y1.ceil(), h) {
                for x in clamp(x0.floor(), w)..=clamp(x1.ceil(), w) {
                    if inst.bbox.contains(Point::new(x as f64, y as f64)) {
                        paint(x, y, inst.class_id);
                    }
                }
            }
        }
    }

    /// Grayscale rendering of 1-based frame `t` in `0..=255`.
    pub fn render_gray(&self, t: usize) -> GrayFrame {
        let inv = self.cumulative[t - 1].inverse();
        let (w, h) = (self.width(), self.height());
        let mut values: Vec<f64> = (0..w * h).map(|i| 255.0 * (0.1 + 0.8 * self.background(&inv, i % w, i / w))).collect();
        let (_, sigs) = spectral_signatures();
        self.for_object_pixels(t, |x, y, c| {
            let s = &sigs[usize::from(c) - 1];
            values[y * w + x] = 255.0 * s.iter().sum::<f64>() / 8.0;
        });
        GrayFrame::new(w, h, values).expect("finite rendering")
    }

    /// Eight-band rendering of 1-based frame `t`.
    pub fn render_cube(&self, t: usize) -> SpectralCube {
        let inv = self.cumulative[t - 1].inverse();
        let (w, h) = (self.width(), self.height());
        let (bg, sigs) = spectral_signatures();
        let noise: Vec<f64> = (0..w * h).map(|i| self.background(&inv, i % w, i / w)).collect();
        let mut values = vec![0.0f32; 8 * w * h];
        for b in 0..8 {
            for (i, n) in noise.iter().enumerate() {
                values[b * w * h + i] = (bg[b] * (0.5 + n)) as f32;
            }
        }
        self.for_object_pixels(t, |x, y, c| {
            let s = &sigs[usize::from(c) - 1];
            let n = noise[y * w + x];
            for b in 0..8 {
                values[b * w * h + y * w + x] = (s[b] * (0.9 + 0.2 * n)) as f32;
            }
        });
        SpectralCube::new(8, h, w, values).expect("finite rendering")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbConfig {
    pub miss_rate: f64,
    /// Expected false positives per frame.
    pub fp_rate: f64,
    pub center_noise_std: f64,
    /// Relative std of the side lengths.
    pub size_noise_std: f64,
    pub angle_noise_std: f64,
    pub matched_conf_mean: f64,
    pub matched_conf_std: f64,
    pub fp_conf_mean: f64,
    pub fp_conf_std: f64,
    pub fp_size_min: f64,
    pub fp_size_max: f64,
    pub image_width: f64,
    pub image_height: f64,
}

impl Default for PerturbConfig {
    fn default() -> Self {
        Self {
            miss_rate: 0.0,
            fp_rate: 0.0,
            center_noise_std: 0.0,
            size_noise_std: 0.0,
            angle_noise_std: 0.0,
            matched_conf_mean: 0.9,
            matched_conf_std: 0.05,
            fp_conf_mean: 0.3,
            fp_conf_std: 0.1,
            fp_size_min: 8.0,
            fp_size_max: 40.0,
            image_width: 1024.0,
            image_height: 768.0,
        }
    }
}

impl PerturbConfig {
    pub fn check(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.miss_rate) {
            return Err(Error::Config(format!("miss_rate {} outside [0, 1]", self.miss_rate)));
        }
        let nonneg = [
            self.fp_rate,
            self.center_noise_std,
            self.size_noise_std,
            self.angle_noise_std,
            self.matched_conf_std,
            self.fp_conf_std,
        ];
        if nonneg.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Config("rates and noise levels must be non-negative".into()));
        }
        if !(0.0 < self.fp_size_min && self.fp_size_min <= self.fp_size_max) {
            return Err(Error::Config("false-positive size range must be positive and ordered".into()));
        }
        if !(self.image_width > 0.0 && self.image_height > 0.0) {
            return Err(Error::Config("image size must be positive".into()));
        }
        Ok(())
    }
}

impl KeyValueConfig for PerturbConfig {
    fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "miss_rate" => self.miss_rate = value(key, v)?,
            "fp_rate" => self.fp_rate = value(key, v)?,
            "center_noise_std" => self.center_noise_std = value(key, v)?,
            "size_noise_std" => self.size_noise_std = value(key, v)?,
            "angle_noise_std" => self.angle_noise_std = value(key, v)?,
            "matched_conf_mean" => self.matched_conf_mean = value(key, v)?,
            "matched_conf_std" => self.matched_conf_std = value(key, v)?,
            "fp_conf_mean" => self.fp_conf_mean = value(key, v)?,
            "fp_conf_std" => self.fp_conf_std = value(key, v)?,
            "fp_size_min" => self.fp_size_min = value(key, v)?,
            "fp_size_max" => self.fp_size_max = value(key, v)?,
            "image_width" => self.image_width = value(key, v)?,
            "image_height" => self.image_height = value(key, v)?,
            _ => return Err(unknown_key(key)),
        }
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        self.check()
    }
}

fn normal(std: f64) -> Normal<f64> {
    Normal::new(0.0, std).expect("validated std")
}

/// Drops, jitters and pads ground truth into per-frame detections.
pub fn perturb(gt: &FrameSet, config: &PerturbConfig, seed: u64) -> Result<Vec<Vec<Detection>>> {
    config.check()?;
    let mut r = rng(seed, STREAM_MISS_NOISE);
    let mut fp_rng = rng(seed, STREAM_FALSE_POSITIVES);
    let (center, size, angle) = (
        normal(config.center_noise_std),
        normal(config.size_noise_std),
        normal(config.angle_noise_std),
    );
    let conf = Normal::new(config.matched_conf_mean, config.matched_conf_std).expect("validated std");
    let fp_conf = Normal::new(config.fp_conf_mean, config.fp_conf_std).expect("validated std");
    let fp_count = (config.fp_rate > 0.0).then(|| Poisson::new(config.fp_rate).expect("positive rate"));

    let mut out = Vec::with_capacity(gt.len());
    for (_, insts) in gt.iter() {
        let mut dets = Vec::new();
        for inst in insts {
            if r.random_bool(config.miss_rate) {
                continue;
            }
            let b = &inst.bbox;
            let scale = |r: &mut ChaCha20Rng| (1.0 + size.sample(r)).max(1e-3);
            let bbox = OrientedBox::new(
                b.cx() + center.sample(&mut r),
                b.cy() + center.sample(&mut r),
                b.w() * scale(&mut r),
                b.h() * scale(&mut r),
                b.theta() + angle.sample(&mut r),
            )?;
            dets.push(Detection {
                bbox,
                confidence: conf.sample(&mut r).clamp(0.0, 1.0),
                class_id: inst.class_id,
            });
        }
        if let Some(p) = &fp_count {
            let n = p.sample(&mut fp_rng) as usize;
            for _ in 0..n {
                let w = fp_rng.random_range(config.fp_size_min..=config.fp_size_max);
                let h = w / fp_rng.random_range(1.0..=3.0);
                let bbox = OrientedBox::new(
                    fp_rng.random_range(0.0..config.image_width),
                    fp_rng.random_range(0.0..config.image_height),
                    w,
                    h,
                    fp_rng.random_range(ANGLE_MIN..ANGLE_MAX),
                )?;
                dets.push(Detection {
                    bbox,
                    confidence: fp_conf.sample(&mut fp_rng).clamp(0.0, 1.0),
                    class_id: fp_rng.random_range(1..=8),
                });
            }
        }
        out.push(dets);
    }
    Ok(out)
}

/// Detections as raw records (track id −1).
pub fn detections_to_frames(dets: &[Vec<Detection>]) -> FrameSet {
    FrameSet::from_frames(
        dets.iter()
            .map(|f| {
                f.iter()
                    .map(|d| Instance {
                        track_id: -1,
                        class_id: d.class_id,
                        bbox: d.bbox,
                        confidence: d.confidence,
                        truncated: false,
                    })
                    .collect()
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{dataset_stats, validate, Severity};

    #[test]
    fn signatures_load() {
        let (bg, sigs) = spectral_signatures();
        assert_eq!(bg.len(), 8);
        // every class differs clearly from the background
        for s in sigs {
            let d: f64 = s.iter().zip(&bg).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            assert!(d > 0.2);
        }
    }

    #[test]
    fn empty_scenario() {
        let s = generate(&ScenarioConfig { n_objects: 0, frames: 5, ..Default::default() }).unwrap();
        assert_eq!(s.gt.len(), 5);
        assert_eq!(s.gt.num_instances(), 0);
        assert!(s.transforms.iter().all(|t| t.is_identity()));
    }

    #[test]
    fn deterministic() {
        let cfg = ScenarioConfig { seed: 4, platform_jitter: 1.0, ..Default::default() };
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        assert_eq!(a.gt, b.gt);
        assert_eq!(a.transforms, b.transforms);
    }

    #[test]
    fn platform_and_object_motion_recovered() {
        let cfg = ScenarioConfig {
            seed: 2,
            n_objects: 5,
            frames: 20,
            speed_min: 2.0,
            speed_max: 2.0,
            turn_rate_max: 0.0,
            platform_tx: 8.0,
            ..Default::default()
        };
        let s = generate(&cfg).unwrap();
        let r = dataset_stats(std::slice::from_ref(&s.gt), Some(std::slice::from_ref(&s.transforms)));
        assert!((r.mean_displacement.drone - 8.0).abs() < 1e-9);
        assert!((r.mean_displacement.object - 2.0).abs() < 1e-9);
    }

    #[test]
    fn objects_stay_inside_and_apart() {
        let s = generate(&ScenarioConfig { seed: 1, ..Default::default() }).unwrap();
        assert_eq!(s.gt.num_instances(), 500);
        for (_, f) in s.gt.iter() {
            for (i, a) in f.iter().enumerate() {
                assert!(a.bbox.cx() >= 40.0 && a.bbox.cx() <= 984.0);
                for b in &f[i + 1..] {
                    assert!(a.bbox.center().distance(&b.bbox.center()) >= 80.0);
                }
            }
        }
        assert!(validate(&s.gt).iter().all(|f| f.severity != Severity::Error));
    }

    #[test]
    fn box_heading_follows_motion() {
        let s = generate(&ScenarioConfig { seed: 3, n_objects: 3, frames: 10, turn_rate_max: 0.0, ..Default::default() }).unwrap();
        for id in 1..=3 {
            let a = s.gt.frame(1).iter().find(|i| i.track_id == id).unwrap().bbox;
            let b = s.gt.frame(2).iter().find(|i| i.track_id == id).unwrap().bbox;
            let motion = (b.cy() - a.cy()).atan2(b.cx() - a.cx());
            let diff = crate::geometry::angle_residual(
                crate::geometry::canonicalize_angle(motion).unwrap(),
                a.angle(),
            );
            assert!(diff.abs() < 1e-9);
        }
    }

    #[test]
    fn unplaceable_objects_are_reported() {
        let cfg = ScenarioConfig { n_objects: 200, min_separation: 300.0, ..Default::default() };
        assert!(matches!(generate(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn zero_noise_perturbation_is_identity() {
        let s = generate(&ScenarioConfig { seed: 1, frames: 5, ..Default::default() }).unwrap();
        let d = perturb(&s.gt, &PerturbConfig::default(), 7).unwrap();
        for (t, f) in d.iter().enumerate() {
            let g = s.gt.frame(t + 1);
            assert_eq!(f.len(), g.len());
            for (a, b) in f.iter().zip(g) {
                assert_eq!(a.bbox, b.bbox);
                assert!(a.confidence > 0.6);
            }
        }
    }

    #[test]
    fn miss_rate_statistics() {
        let mut gt = FrameSet::with_frames(100);
        let b = OrientedBox::new(50.0, 50.0, 10.0, 5.0, 0.0).unwrap();
        for t in 1..=100 {
            for id in 0..100 {
                gt.push(t, Instance { track_id: id, class_id: 2, bbox: b, confidence: 1.0, truncated: false });
            }
        }
        let cfg = PerturbConfig { miss_rate: 0.1, ..Default::default() };
        let kept: usize = perturb(&gt, &cfg, 11).unwrap().iter().map(Vec::len).sum();
        let rate = 1.0 - kept as f64 / 1e4;
        assert!((rate - 0.1).abs() < 0.01, "{rate}");
        let all_missed = PerturbConfig { miss_rate: 1.0, fp_rate: 2.0, ..Default::default() };
        let d = perturb(&gt, &all_missed, 11).unwrap();
        assert!(d.iter().flatten().all(|x| x.confidence < 0.9));
        assert!(d.iter().map(Vec::len).sum::<usize>() > 0);
    }

    #[test]
    fn rendering_shapes() {
        let cfg = ScenarioConfig {
            n_objects: 2,
            frames: 2,
            image_width: 128.0,
            image_height: 96.0,
            min_separation: 20.0,
            border_margin: 16.0,
            render_cubes: true,
            ..Default::default()
        };
        let s = generate(&cfg).unwrap();
        let cubes = s.cubes.as_ref().unwrap();
        assert_eq!((cubes[0].bands(), cubes[0].height(), cubes[0].width()), (8, 96, 128));
        let g = s.render_gray(1);
        assert_eq!((g.width(), g.height()), (128, 96));
    }

    #[test]
    fn config_file_keys() {
        let cfg = crate::kvconfig::load(ScenarioConfig::default(), "seed = 9\nframes = 7\nplatform_tx = 8\n").unwrap();
        assert_eq!((cfg.seed, cfg.frames, cfg.platform_tx), (9, 7, 8.0));
        let e = crate::kvconfig::load(ScenarioConfig::default(), "n_object = 3").unwrap_err();
        assert!(e.to_string().contains("n_object"));
        assert!(crate::kvconfig::load(ScenarioConfig::default(), "class_weights = 1,0,0,0,0,0,0,0").is_ok());
        assert!(crate::kvconfig::load(ScenarioConfig::default(), "class_weights = 0.5,0,0,0,0,0,0,0").is_err());
    }
}
