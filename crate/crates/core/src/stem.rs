//! Spectral 3D stem: a shared 3D convolution over (band, row, col), a
//! depthwise fold that collapses the band axis, and a 3×3 max-pool.
//!
//! Everything runs in `f64` so the finite-difference check is meaningful.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Uniform};

use crate::dataio::{Reader, SpectralCube};
use crate::error::{Error, Result};

pub const SPATIAL_STRIDE: usize = 2;
pub const SPECTRAL_STRIDE: usize = 1;
pub const WEIGHTS_MAGIC: &[u8; 4] = b"STW1";
pub const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StemConfig {
    pub bands: usize,
    pub spectral_kernel: usize,
    pub spatial_kernel: usize,
    pub out_channels: usize,
}

impl Default for StemConfig {
    fn default() -> Self {
        Self {
            bands: 8,
            spectral_kernel: 3,
            spatial_kernel: 7,
            out_channels: 64,
        }
    }
}

impl StemConfig {
    pub fn spatial_padding(&self) -> usize {
        (self.spatial_kernel - 1) / 2
    }

    pub fn spectral_padding(&self) -> usize {
        (self.spectral_kernel - 1) / 2
    }

    pub fn validate(&self) -> Result<()> {
        if self.spectral_kernel.is_multiple_of(2) || self.spatial_kernel.is_multiple_of(2) {
            return Err(Error::Shape(format!(
                "kernels must be odd, got spectral {} spatial {}",
                self.spectral_kernel, self.spatial_kernel
            )));
        }
        if self.bands == 0 || self.out_channels == 0 {
            return Err(Error::Shape("bands and out_channels must be positive".into()));
        }
        Ok(())
    }

    fn conv_len(&self) -> usize {
        self.spectral_kernel * self.spatial_kernel * self.spatial_kernel
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamCount {
    pub conv3d: usize,
    pub fold: usize,
    pub total: usize,
}

pub fn param_count(config: &StemConfig) -> ParamCount {
    let conv3d = config.out_channels * config.conv_len();
    let fold = config.bands * config.out_channels;
    ParamCount {
        conv3d,
        fold,
        total: conv3d + fold,
    }
}

/// Weights of a plain 2D stem convolution over `in_channels` inputs.
pub fn conv2d_param_count(in_channels: usize, out_channels: usize, kernel: usize) -> usize {
    in_channels * out_channels * kernel * kernel
}

/// Dense `channels × height × width` array.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl Volume {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    pub fn from_fn(channels: usize, height: usize, width: usize, f: impl Fn(usize, usize, usize) -> f64) -> Self {
        let mut v = Self::zeros(channels, height, width);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    v.data[(c * height + y) * width + x] = f(c, y, x);
                }
            }
        }
        v
    }

    pub fn from_cube(cube: &SpectralCube) -> Self {
        Self {
            channels: cube.bands(),
            height: cube.height(),
            width: cube.width(),
            data: cube.values().iter().map(|&v| f64::from(v)).collect(),
        }
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.channels, self.height, self.width]
    }

    #[inline]
    pub fn at(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    fn plane(&self, c: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn max_abs_diff(&self, other: &Volume) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StemWeights {
    /// `D × 1 × k_s × k × k`, row-major.
    pub conv3d: Vec<f64>,
    /// `D × bands`.
    pub fold: Vec<f64>,
}

impl StemWeights {
    pub fn zeros(config: &StemConfig) -> Self {
        let p = param_count(config);
        Self {
            conv3d: vec![0.0; p.conv3d],
            fold: vec![0.0; p.fold],
        }
    }

    /// Uniform `±1/sqrt(fan_in)` initialization from a ChaCha20 stream.
    pub fn random(config: &StemConfig, seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let bound = 1.0 / (config.conv_len() as f64).sqrt();
        let conv = Uniform::new_inclusive(-bound, bound).expect("finite bound");
        let fold = Uniform::new_inclusive(-1.0, 1.0).expect("finite bound");
        let p = param_count(config);
        Self {
            conv3d: (0..p.conv3d).map(|_| conv.sample(&mut rng)).collect(),
            fold: (0..p.fold).map(|_| fold.sample(&mut rng)).collect(),
        }
    }

    pub fn check(&self, config: &StemConfig) -> Result<()> {
        let p = param_count(config);
        if self.conv3d.len() != p.conv3d || self.fold.len() != p.fold {
            return Err(Error::Shape(format!(
                "weights have {}+{} values, config needs {}+{}",
                self.conv3d.len(),
                self.fold.len(),
                p.conv3d,
                p.fold
            )));
        }
        if self.conv3d.iter().chain(&self.fold).any(|v| !v.is_finite()) {
            return Err(Error::domain("weights must be finite"));
        }
        Ok(())
    }

    fn channel(&self, config: &StemConfig, d: usize) -> (&[f64], &[f64]) {
        let n = config.conv_len();
        (&self.conv3d[d * n..(d + 1) * n], &self.fold[d * config.bands..(d + 1) * config.bands])
    }
}

fn conv_out(n: usize, kernel: usize, pad: usize, stride: usize) -> usize {
    (n + 2 * pad - kernel) / stride + 1
}

fn pool_out(n: usize) -> usize {
    conv_out(n, 3, 1, 2)
}

/// Stage-1 response of one output channel: `bands × H/2 × W/2`.
fn conv3d_channel(input: &Volume, kernel: &[f64], config: &StemConfig) -> Volume {
    let (ks, k) = (config.spectral_kernel, config.spatial_kernel);
    let (sp, pp) = (config.spectral_padding() as isize, config.spatial_padding() as isize);
    let bands_out = conv_out(input.channels, ks, sp as usize, SPECTRAL_STRIDE);
    let (ho, wo) = (
        conv_out(input.height, k, pp as usize, SPATIAL_STRIDE),
        conv_out(input.width, k, pp as usize, SPATIAL_STRIDE),
    );
    let mut out = Volume::zeros(bands_out, ho, wo);
    for b in 0..bands_out {
        for j in 0..ks {
            let src = b as isize * SPECTRAL_STRIDE as isize + j as isize - sp;
            if src < 0 || src >= input.channels as isize {
                continue;
            }
            let plane = input.plane(src as usize);
            for u in 0..k {
                for v in 0..k {
                    let w = kernel[(j * k + u) * k + v];
                    if w == 0.0 {
                        continue;
                    }
                    accumulate_tap(&mut out, b, plane, input.height, input.width, u as isize - pp, v as isize - pp, w);
                }
            }
        }
    }
    out
}

/// Adds `w · plane[2y + dy, 2x + dx]` into band `b` of `out` (zero padding).
#[allow(clippy::too_many_arguments)]
#[inline]
fn accumulate_tap(out: &mut Volume, b: usize, plane: &[f64], h: usize, w_in: usize, dy: isize, dx: isize, w: f64) {
    let (ho, wo) = (out.height, out.width);
    let base = b * ho * wo;
    for y in 0..ho {
        let sy = (SPATIAL_STRIDE * y) as isize + dy;
        if sy < 0 || sy >= h as isize {
            continue;
        }
        let row = &plane[sy as usize * w_in..(sy as usize + 1) * w_in];
        let orow = &mut out.data[base + y * wo..base + (y + 1) * wo];
        for (x, o) in orow.iter_mut().enumerate() {
            let sx = (SPATIAL_STRIDE * x) as isize + dx;
            if sx >= 0 && sx < w_in as isize {
                *o += w * row[sx as usize];
            }
        }
    }
}

/// Depthwise spectral fold of one channel's stage-1 response.
fn fold_channel(stage1: &Volume, fold: &[f64]) -> Vec<f64> {
    let n = stage1.height * stage1.width;
    let mut out = vec![0.0; n];
    for (b, &f) in fold.iter().enumerate() {
        for (o, &z) in out.iter_mut().zip(stage1.plane(b)) {
            *o += f * z;
        }
    }
    out
}

/// 3×3 stride-2 pad-1 max-pool of an `h × w` plane; returns values and the
/// flat argmax of each window (first maximum wins).
fn maxpool_plane(plane: &[f64], h: usize, w: usize) -> (Vec<f64>, Vec<usize>) {
    let (ho, wo) = (pool_out(h), pool_out(w));
    let mut vals = Vec::with_capacity(ho * wo);
    let mut arg = Vec::with_capacity(ho * wo);
    for y in 0..ho {
        for x in 0..wo {
            let mut best = f64::NEG_INFINITY;
            let mut at = 0;
            for dy in 0..3 {
                let sy = (2 * y + dy) as isize - 1;
                if sy < 0 || sy >= h as isize {
                    continue;
                }
                for dx in 0..3 {
                    let sx = (2 * x + dx) as isize - 1;
                    if sx < 0 || sx >= w as isize {
                        continue;
                    }
                    let i = sy as usize * w + sx as usize;
                    if plane[i] > best {
                        best = plane[i];
                        at = i;
                    }
                }
            }
            vals.push(best);
            arg.push(at);
        }
    }
    (vals, arg)
}

pub fn maxpool(v: &Volume) -> Volume {
    let (ho, wo) = (pool_out(v.height), pool_out(v.width));
    let mut out = Volume::zeros(v.channels, ho, wo);
    for c in 0..v.channels {
        let (vals, _) = maxpool_plane(v.plane(c), v.height, v.width);
        out.data[c * ho * wo..(c + 1) * ho * wo].copy_from_slice(&vals);
    }
    out
}

fn check_input(input: &Volume, config: &StemConfig) -> Result<()> {
    config.validate()?;
    if input.channels != config.bands {
        return Err(Error::Shape(format!(
            "input has {} bands, stem expects {}",
            input.channels, config.bands
        )));
    }
    if !input.height.is_multiple_of(4) || !input.width.is_multiple_of(4) || input.height == 0 || input.width == 0 {
        return Err(Error::Shape(format!(
            "spatial size {}x{} must be a positive multiple of 4",
            input.height, input.width
        )));
    }
    Ok(())
}

/// Stage-1 output `D × bands × H/2 × W/2`, flattened channel-major.
pub fn forward_intermediate(input: &Volume, weights: &StemWeights, config: &StemConfig) -> Result<(Vec<usize>, Vec<f64>)> {
    check_input(input, config)?;
    weights.check(config)?;
    let mut data = Vec::new();
    let mut shape = vec![config.out_channels];
    for d in 0..config.out_channels {
        let z = conv3d_channel(input, weights.channel(config, d).0, config);
        if d == 0 {
            shape.extend(z.shape());
        }
        data.extend_from_slice(&z.data);
    }
    Ok((shape, data))
}

/// Stages 1 and 2: `D × H/2 × W/2`.
pub fn forward_stages12(input: &Volume, weights: &StemWeights, config: &StemConfig) -> Result<Volume> {
    check_input(input, config)?;
    weights.check(config)?;
    let mut out: Option<Volume> = None;
    for d in 0..config.out_channels {
        let (kernel, fold) = weights.channel(config, d);
        let z = conv3d_channel(input, kernel, config);
        let f = fold_channel(&z, fold);
        let o = out.get_or_insert_with(|| Volume::zeros(config.out_channels, z.height, z.width));
        let n = z.height * z.width;
        o.data[d * n..(d + 1) * n].copy_from_slice(&f);
    }
    Ok(out.expect("at least one output channel"))
}

/// Full stem: `D × H/4 × W/4`.
pub fn forward(input: &Volume, weights: &StemWeights, config: &StemConfig) -> Result<Volume> {
    Ok(maxpool(&forward_stages12(input, weights, config)?))
}

pub fn forward_cube(cube: &SpectralCube, weights: &StemWeights, config: &StemConfig) -> Result<Volume> {
    forward(&Volume::from_cube(cube), weights, config)
}

/// 2D stem reference: conv `D × C × k × k` stride 2, then the same max-pool.
pub fn conv2d_stem(image: &Volume, kernel: &[f64], out_channels: usize, k: usize) -> Result<Volume> {
    let c = image.channels;
    if kernel.len() != out_channels * c * k * k || k.is_multiple_of(2) {
        return Err(Error::Shape(format!(
            "2D kernel has {} values, expected {out_channels}x{c}x{k}x{k}",
            kernel.len()
        )));
    }
    let p = ((k - 1) / 2) as isize;
    let (ho, wo) = (
        conv_out(image.height, k, p as usize, SPATIAL_STRIDE),
        conv_out(image.width, k, p as usize, SPATIAL_STRIDE),
    );
    let mut out = Volume::zeros(out_channels, ho, wo);
    for d in 0..out_channels {
        let mut acc = Volume::zeros(1, ho, wo);
        for ci in 0..c {
            for u in 0..k {
                for v in 0..k {
                    let w = kernel[((d * c + ci) * k + u) * k + v];
                    accumulate_tap(&mut acc, 0, image.plane(ci), image.height, image.width, u as isize - p, v as isize - p, w);
                }
            }
        }
        out.data[d * ho * wo..(d + 1) * ho * wo].copy_from_slice(&acc.data);
    }
    Ok(maxpool(&out))
}

/// Lifts a `D × 3 × k × k` RGB stem kernel: input channel c becomes spectral
/// tap c. The fold is set to the uniform average `1/bands`.
pub fn import_rgb_weights(rgb2d: &[f64], config: &StemConfig) -> Result<StemWeights> {
    config.validate()?;
    if config.spectral_kernel != 3 {
        return Err(Error::Shape(format!(
            "RGB import needs spectral kernel 3, config has {}",
            config.spectral_kernel
        )));
    }
    let k = config.spatial_kernel;
    if rgb2d.len() != config.out_channels * 3 * k * k {
        return Err(Error::Shape(format!(
            "RGB kernel has {} values, expected {}x3x{k}x{k}",
            rgb2d.len(),
            config.out_channels
        )));
    }
    // D×3×k×k and D×1×3×k×k share one memory layout
    Ok(StemWeights {
        conv3d: rgb2d.to_vec(),
        fold: vec![1.0 / config.bands as f64; config.bands * config.out_channels],
    })
}

/// Sets every channel's fold to a one-hot vector at band `b`.
pub fn one_hot_fold(weights: &mut StemWeights, config: &StemConfig, b: usize) {
    for d in 0..config.out_channels {
        for j in 0..config.bands {
            weights.fold[d * config.bands + j] = if j == b { 1.0 } else { 0.0 };
        }
    }
}

/// Per-channel loss `Σ maxpool(fold(conv3d(x)))` and its analytic gradient.
fn channel_loss_grad(input: &Volume, kernel: &[f64], fold: &[f64], config: &StemConfig) -> (f64, Vec<f64>, Vec<f64>) {
    let z = conv3d_channel(input, kernel, config);
    let f = fold_channel(&z, fold);
    let (vals, arg) = maxpool_plane(&f, z.height, z.width);
    let loss = vals.iter().sum();

    let mut g = vec![0.0; f.len()];
    for &a in &arg {
        g[a] += 1.0;
    }
    let grad_fold: Vec<f64> = (0..z.channels)
        .map(|b| z.plane(b).iter().zip(&g).map(|(a, b)| a * b).sum())
        .collect();

    let (ks, k) = (config.spectral_kernel, config.spatial_kernel);
    let (sp, pp) = (config.spectral_padding() as isize, config.spatial_padding() as isize);
    let mut grad_kernel = vec![0.0; kernel.len()];
    for (b, &fb) in fold.iter().enumerate() {
        if fb == 0.0 {
            continue;
        }
        for j in 0..ks {
            let src = b as isize + j as isize - sp;
            if src < 0 || src >= input.channels as isize {
                continue;
            }
            let plane = input.plane(src as usize);
            for u in 0..k {
                for v in 0..k {
                    let mut s = 0.0;
                    for y in 0..z.height {
                        let sy = (2 * y) as isize + u as isize - pp;
                        if sy < 0 || sy >= input.height as isize {
                            continue;
                        }
                        for x in 0..z.width {
                            let sx = (2 * x) as isize + v as isize - pp;
                            if sx >= 0 && sx < input.width as isize {
                                s += g[y * z.width + x] * plane[sy as usize * input.width + sx as usize];
                            }
                        }
                    }
                    grad_kernel[(j * k + u) * k + v] += fb * s;
                }
            }
        }
    }
    (loss, grad_kernel, grad_fold)
}

/// Analytic gradient of `Σ forward(x)` with respect to all weights.
pub fn loss_gradient(input: &Volume, weights: &StemWeights, config: &StemConfig) -> Result<(f64, StemWeights)> {
    check_input(input, config)?;
    weights.check(config)?;
    let mut grad = StemWeights::zeros(config);
    let mut loss = 0.0;
    let (n, bands) = (config.conv_len(), config.bands);
    for d in 0..config.out_channels {
        let (kernel, fold) = weights.channel(config, d);
        let (l, gk, gf) = channel_loss_grad(input, kernel, fold, config);
        loss += l;
        grad.conv3d[d * n..(d + 1) * n].copy_from_slice(&gk);
        grad.fold[d * bands..(d + 1) * bands].copy_from_slice(&gf);
    }
    Ok((loss, grad))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub parameters: usize,
}

/// Compares the analytic gradient against central differences for every
/// weight. Each perturbation only affects its own output channel, so only
/// that channel is re-evaluated.
pub fn grad_check(input: &Volume, weights: &StemWeights, config: &StemConfig) -> Result<GradCheckReport> {
    let (_, analytic) = loss_gradient(input, weights, config)?;
    let (n, bands) = (config.conv_len(), config.bands);
    let rel = |a: f64, num: f64| (a - num).abs() / a.abs().max(num.abs()).max(1e-6);
    let mut worst = 0.0f64;
    for d in 0..config.out_channels {
        let (kernel, fold) = weights.channel(config, d);
        let mut k = kernel.to_vec();
        let mut f = fold.to_vec();
        let loss = |k: &[f64], f: &[f64]| {
            let z = conv3d_channel(input, k, config);
            let folded = fold_channel(&z, f);
            maxpool_plane(&folded, z.height, z.width).0.iter().sum::<f64>()
        };
        for i in 0..n {
            let orig = k[i];
            k[i] = orig + FD_STEP;
            let plus = loss(&k, &f);
            k[i] = orig - FD_STEP;
            let minus = loss(&k, &f);
            k[i] = orig;
            worst = worst.max(rel(analytic.conv3d[d * n + i], (plus - minus) / (2.0 * FD_STEP)));
        }
        // the stage-1 response does not depend on the fold
        let z = conv3d_channel(input, &k, config);
        for i in 0..bands {
            let orig = f[i];
            f[i] = orig + FD_STEP;
            let plus = maxpool_plane(&fold_channel(&z, &f), z.height, z.width).0.iter().sum::<f64>();
            f[i] = orig - FD_STEP;
            let minus = maxpool_plane(&fold_channel(&z, &f), z.height, z.width).0.iter().sum::<f64>();
            f[i] = orig;
            worst = worst.max(rel(analytic.fold[d * bands + i], (plus - minus) / (2.0 * FD_STEP)));
        }
    }
    Ok(GradCheckReport {
        max_relative_error: worst,
        parameters: param_count(config).total,
    })
}

/// Seeded random input in `[-1, 1]` of shape `bands × size × size`.
pub fn random_input(config: &StemConfig, size: usize, seed: u64) -> Volume {
    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0x5eed_1e55);
    let u = Uniform::new_inclusive(-1.0, 1.0).expect("finite bound");
    let mut v = Volume::zeros(config.bands, size, size);
    v.data.iter_mut().for_each(|x| *x = u.sample(&mut rng));
    v
}

/// Gradient check on a seeded random `bands × 16 × 16` input and weights.
pub fn grad_check_seeded(config: &StemConfig, seed: u64) -> Result<GradCheckReport> {
    grad_check(&random_input(config, 16, seed), &StemWeights::random(config, seed), config)
}

pub fn write_weights(config: &StemConfig, weights: &StemWeights) -> Vec<u8> {
    let mut out = Vec::with_capacity(20 + 4 * (weights.conv3d.len() + weights.fold.len()));
    out.extend_from_slice(WEIGHTS_MAGIC);
    for d in [config.out_channels, config.spectral_kernel, config.spatial_kernel, config.bands] {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for &v in weights.conv3d.iter().chain(&weights.fold) {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn read_weights(bytes: &[u8]) -> Result<(StemConfig, StemWeights)> {
    let mut r = Reader::new(bytes);
    r.magic(WEIGHTS_MAGIC)?;
    let config = StemConfig {
        out_channels: r.u32()?,
        spectral_kernel: r.u32()?,
        spatial_kernel: r.u32()?,
        bands: r.u32()?,
    };
    config.validate().map_err(|e| Error::Format(e.to_string()))?;
    let p = param_count(&config);
    let conv3d = r.f32s(p.conv3d)?.into_iter().map(f64::from).collect();
    let fold = r.f32s(p.fold)?.into_iter().map(f64::from).collect();
    r.finish()?;
    let w = StemWeights { conv3d, fold };
    w.check(&config)?;
    Ok((config, w))
}
