//! Orientation-aware constant-velocity Kalman filter.
//!
//! State layout: `[u, v, s1, s2, θ, u̇, v̇, ṡ1, ṡ2, θ̇]` with dt = 1 frame.
//! The angle innovation is wrapped modulo π so tracks rotating through the
//! le135 boundary never see a spurious half-turn jump.

use nalgebra::{SMatrix, SVector};

use crate::error::{Error, Result};
use crate::geometry::{angle_residual, canonicalize_angle, OrientedBox};
use crate::transform::SimilarityTransform;

pub type StateVector = SVector<f64, 10>;
pub type StateCovariance = SMatrix<f64, 10, 10>;
type MeasVector = SVector<f64, 5>;
type MeasCovariance = SMatrix<f64, 5, 5>;

pub const THETA: usize = 4;

/// Sizes are floored here after each predict.
pub const SIZE_FLOOR: f64 = 1e-3;

/// How the two size components of the state are defined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SizeParam {
    /// `s1 = w·h` (px²), `s2 = w/h`.
    AreaAspect,
    /// `s1 = w`, `s2 = h` (px).
    WidthHeight,
}

impl SizeParam {
    pub fn sizes(self, b: &OrientedBox) -> (f64, f64) {
        match self {
            SizeParam::AreaAspect => (b.w() * b.h(), b.w() / b.h()),
            SizeParam::WidthHeight => (b.w(), b.h()),
        }
    }

    /// Inverse of [`SizeParam::sizes`].
    pub fn width_height(self, s1: f64, s2: f64) -> Result<(f64, f64)> {
        if !(s1 > 0.0 && s2 > 0.0) {
            return Err(Error::DegenerateState(format!(
                "size components must be positive, got ({s1}, {s2})"
            )));
        }
        Ok(match self {
            SizeParam::AreaAspect => ((s1 * s2).sqrt(), (s1 / s2).sqrt()),
            SizeParam::WidthHeight => (s1, s2),
        })
    }
}

/// Noise model. Standard deviations are per frame.
///
/// With `size_relative` set, every position/size entry (process, measurement
/// and initial velocity) is multiplied by the current mean of `s1` and `s2`;
/// the angle entries are always absolute.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterParams {
    pub process_std: [f64; 10],
    pub measurement_std: [f64; 5],
    pub initial_velocity_variance: [f64; 5],
    pub size_relative: bool,
}

impl FilterParams {
    /// Defaults for the given size parameterization.
    pub fn for_size_param(size_param: SizeParam) -> Self {
        match size_param {
            SizeParam::WidthHeight => {
                let p = 1.0 / 20.0;
                let v = 1.0 / 160.0;
                let iv = (10.0 * v) * (10.0 * v);
                Self {
                    process_std: [p, p, p, p, 0.01, v, v, v, v, 0.001],
                    measurement_std: [p, p, p, p, 0.1],
                    initial_velocity_variance: [iv, iv, iv, iv, 0.01],
                    size_relative: true,
                }
            }
            SizeParam::AreaAspect => Self {
                process_std: [1.0, 1.0, 10.0, 0.01, 0.01, 0.1, 0.1, 1.0, 0.001, 0.001],
                measurement_std: [1.0, 1.0, 10.0, 0.01, 0.1],
                initial_velocity_variance: [100.0, 100.0, 1000.0, 0.01, 0.01],
                size_relative: false,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self
            .process_std
            .iter()
            .chain(&self.measurement_std)
            .chain(&self.initial_velocity_variance)
            .all(|v| *v > 0.0 && v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::Config("filter noise scales must be positive".into()))
        }
    }

    fn scale(&self, mean: &StateVector) -> f64 {
        if self.size_relative {
            (mean[2] + mean[3]) / 2.0
        } else {
            1.0
        }
    }

    fn process_cov(&self, mean: &StateVector) -> StateCovariance {
        let scale = self.scale(mean);
        let mut q = StateCovariance::zeros();
        for i in 0..10 {
            let s = if i % 5 == THETA { 1.0 } else { scale };
            let std = self.process_std[i] * s;
            q[(i, i)] = std * std;
        }
        q
    }

    fn measurement_cov(&self, mean: &StateVector) -> MeasCovariance {
        let scale = self.scale(mean);
        let mut r = MeasCovariance::zeros();
        for i in 0..5 {
            let s = if i == THETA { 1.0 } else { scale };
            let std = self.measurement_std[i] * s;
            r[(i, i)] = std * std;
        }
        r
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MotionState {
    pub mean: StateVector,
    pub covariance: StateCovariance,
    pub size_param: SizeParam,
}

fn transition() -> StateCovariance {
    let mut f = StateCovariance::identity();
    for i in 0..5 {
        f[(i, i + 5)] = 1.0;
    }
    f
}

fn observation() -> SMatrix<f64, 5, 10> {
    let mut h = SMatrix::<f64, 5, 10>::zeros();
    for i in 0..5 {
        h[(i, i)] = 1.0;
    }
    h
}

fn measure(b: &OrientedBox, size_param: SizeParam) -> MeasVector {
    let (s1, s2) = size_param.sizes(b);
    MeasVector::new(b.cx(), b.cy(), s1, s2, b.theta())
}

fn canonical_theta(t: f64) -> f64 {
    canonicalize_angle(t)
        .map(|a| a.radians())
        .unwrap_or(t)
}

/// Initial state at the box pose with zero velocities.
pub fn init_state(b: &OrientedBox, params: &FilterParams, size_param: SizeParam) -> Result<MotionState> {
    if !(b.w() > 0.0 && b.h() > 0.0) {
        return Err(Error::domain("box size must be positive"));
    }
    let z = measure(b, size_param);
    let mut mean = StateVector::zeros();
    mean.fixed_rows_mut::<5>(0).copy_from(&z);
    let r = params.measurement_cov(&mean);
    let scale = params.scale(&mean);
    let mut covariance = StateCovariance::zeros();
    for i in 0..5 {
        covariance[(i, i)] = 4.0 * r[(i, i)];
        let s = if i == THETA { 1.0 } else { scale * scale };
        covariance[(i + 5, i + 5)] = params.initial_velocity_variance[i] * s;
    }
    Ok(MotionState {
        mean,
        covariance,
        size_param,
    })
}

/// Constant-velocity prediction one frame ahead.
pub fn predict(state: &MotionState, params: &FilterParams) -> MotionState {
    let f = transition();
    let q = params.process_cov(&state.mean);
    let mut mean = f * state.mean;
    mean[THETA] = canonical_theta(mean[THETA]);
    mean[2] = mean[2].max(SIZE_FLOOR);
    mean[3] = mean[3].max(SIZE_FLOOR);
    let covariance = symmetrize(f * state.covariance * f.transpose() + q);
    MotionState {
        mean,
        covariance,
        size_param: state.size_param,
    }
}

/// Measurement update with a wrapped angle innovation.
pub fn update(state: &MotionState, measurement: &OrientedBox, params: &FilterParams) -> Result<MotionState> {
    let h = observation();
    let z = measure(measurement, state.size_param);
    let mut innovation = z - h * state.mean;
    let predicted_theta = canonicalize_angle(state.mean[THETA])?;
    innovation[THETA] = angle_residual(measurement.angle(), predicted_theta);

    let r = params.measurement_cov(&state.mean);
    let s = symmetrize(h * state.covariance * h.transpose() + r);
    let s_inv = s
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::Numeric("innovation covariance is not positive definite".into()))?;
    let gain = state.covariance * h.transpose() * s_inv;

    let mut mean = state.mean + gain * innovation;
    mean[THETA] = canonical_theta(mean[THETA]);
    // Joseph form keeps the posterior symmetric PSD under roundoff
    let i_kh = StateCovariance::identity() - gain * h;
    let covariance = symmetrize(i_kh * state.covariance * i_kh.transpose() + gain * r * gain.transpose());
    Ok(MotionState {
        mean,
        covariance,
        size_param: state.size_param,
    })
}

pub fn state_to_box(state: &MotionState) -> Result<OrientedBox> {
    let m = &state.mean;
    let (w, h) = state.size_param.width_height(m[2], m[3])?;
    OrientedBox::new(m[0], m[1], w, h, m[THETA])
}

impl MotionState {
    pub fn to_box(&self) -> Result<OrientedBox> {
        state_to_box(self)
    }

    /// Re-expresses the state in the coordinates of the next frame after
    /// platform motion `t`.
    pub fn warp(&self, t: &SimilarityTransform) -> MotionState {
        let lin = t.linear();
        let size_gain = match self.size_param {
            SizeParam::WidthHeight => [t.scale, t.scale],
            SizeParam::AreaAspect => [t.scale * t.scale, 1.0],
        };
        let mut a = StateCovariance::zeros();
        for base in [0, 5] {
            for r in 0..2 {
                for c in 0..2 {
                    a[(base + r, base + c)] = lin[r][c];
                }
            }
            a[(base + 2, base + 2)] = size_gain[0];
            a[(base + 3, base + 3)] = size_gain[1];
            a[(base + 4, base + 4)] = 1.0;
        }
        let mut mean = a * self.mean;
        mean[0] += t.tx;
        mean[1] += t.ty;
        mean[THETA] = canonical_theta(mean[THETA] + t.rotation);
        MotionState {
            mean,
            covariance: symmetrize(a * self.covariance * a.transpose()),
            size_param: self.size_param,
        }
    }
}

fn symmetrize<const N: usize>(m: SMatrix<f64, N, N>) -> SMatrix<f64, N, N> {
    (m + m.transpose()) * 0.5
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ANGLE_MAX, ANGLE_MIN};

    fn bx(cx: f64, cy: f64, w: f64, h: f64, t: f64) -> OrientedBox {
        OrientedBox::new(cx, cy, w, h, t).unwrap()
    }

    fn wh() -> FilterParams {
        FilterParams::for_size_param(SizeParam::WidthHeight)
    }

    #[test]
    fn init_examples() {
        let b = bx(5.0, 5.0, 4.0, 2.0, 0.0);
        let s = init_state(&b, &wh(), SizeParam::WidthHeight).unwrap();
        assert_eq!(s.mean.as_slice(), &[5.0, 5.0, 4.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let aa = FilterParams::for_size_param(SizeParam::AreaAspect);
        let s = init_state(&b, &aa, SizeParam::AreaAspect).unwrap();
        assert_eq!(s.mean.as_slice(), &[5.0, 5.0, 8.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(s.covariance, s.covariance.transpose());
        assert!(s.covariance.symmetric_eigenvalues().iter().all(|e| *e > 0.0));
    }

    #[test]
    fn predict_examples() {
        let p = wh();
        let mut s = init_state(&bx(0.0, 0.0, 4.0, 2.0, 0.0), &p, SizeParam::WidthHeight).unwrap();
        s.mean[5] = 1.0;
        assert_eq!(predict(&s, &p).mean[0], 1.0);

        let mut s = init_state(&bx(0.0, 0.0, 4.0, 2.0, ANGLE_MAX - 0.05), &p, SizeParam::WidthHeight).unwrap();
        s.mean[9] = 0.1;
        let t = predict(&s, &p).mean[THETA];
        assert!((t - (ANGLE_MIN + 0.05)).abs() < 1e-12, "{t}");

        let s = init_state(&bx(3.0, 4.0, 4.0, 2.0, 0.2), &p, SizeParam::WidthHeight).unwrap();
        let n = predict(&s, &p);
        assert_eq!(n.mean.fixed_rows::<5>(0), s.mean.fixed_rows::<5>(0));
        for i in 0..10 {
            assert!(n.covariance[(i, i)] > s.covariance[(i, i)]);
        }
    }

    #[test]
    fn predict_floors_sizes() {
        let p = wh();
        let mut s = init_state(&bx(0.0, 0.0, 4.0, 2.0, 0.0), &p, SizeParam::WidthHeight).unwrap();
        s.mean[8] = -10.0;
        assert_eq!(predict(&s, &p).mean[3], SIZE_FLOOR);
    }

    #[test]
    fn zero_innovation_keeps_mean() {
        let p = wh();
        let b = bx(10.0, 20.0, 8.0, 3.0, 1.0);
        let s = predict(&init_state(&b, &p, SizeParam::WidthHeight).unwrap(), &p);
        let u = update(&s, &b, &p).unwrap();
        assert!((u.mean - s.mean).norm() < 1e-12);
    }

    #[test]
    fn wrapped_angle_innovation() {
        let p = wh();
        let prior = init_state(&bx(0.0, 0.0, 8.0, 2.0, ANGLE_MAX - 0.1), &p, SizeParam::WidthHeight).unwrap();
        let meas = bx(0.0, 0.0, 8.0, 2.0, ANGLE_MIN + 0.1);
        let post = update(&prior, &meas, &p).unwrap();
        // posterior moves forward across the boundary, never back by ~π
        let moved = angle_residual(
            canonicalize_angle(post.mean[THETA]).unwrap(),
            canonicalize_angle(prior.mean[THETA]).unwrap(),
        );
        assert!(moved > 0.0 && moved <= 0.2 + 1e-12, "{moved}");
        assert!(post.mean[9] >= 0.0);
    }

    #[test]
    fn repeated_updates_converge() {
        let p = wh();
        // 5 px initial offset; the error shrinks geometrically (~0.88 per cycle)
        let target = bx(40.0, 30.0, 12.0, 6.0, 0.5);
        let mut s = init_state(&bx(37.0, 26.0, 11.0, 5.0, 0.4), &p, SizeParam::WidthHeight).unwrap();
        let mut errs = Vec::new();
        for _ in 0..80 {
            s = update(&predict(&s, &p), &target, &p).unwrap();
            errs.push((s.mean[0] - 40.0).hypot(s.mean[1] - 30.0));
        }
        assert!(errs[49] < 1e-3, "{}", errs[49]);
        assert!(errs[79] < errs[49] * 0.1);
    }

    #[test]
    fn box_roundtrip() {
        let b = bx(5.0, 5.0, 4.0, 2.0, 0.0);
        for sp in [SizeParam::WidthHeight, SizeParam::AreaAspect] {
            let s = init_state(&b, &FilterParams::for_size_param(sp), sp).unwrap();
            let back = state_to_box(&s).unwrap();
            assert!((back.w() - 4.0).abs() < 1e-12 && (back.h() - 2.0).abs() < 1e-12);
            assert_eq!((back.cx(), back.cy(), back.theta()), (5.0, 5.0, 0.0));
        }
    }

    #[test]
    fn degenerate_state_rejected() {
        let p = wh();
        let mut s = init_state(&bx(5.0, 5.0, 4.0, 2.0, 0.0), &p, SizeParam::WidthHeight).unwrap();
        s.mean[2] = 0.0;
        assert!(matches!(state_to_box(&s), Err(Error::DegenerateState(_))));
    }

    #[test]
    fn warp_moves_pose_and_velocity() {
        let p = wh();
        let mut s = init_state(&bx(10.0, 0.0, 4.0, 2.0, 0.0), &p, SizeParam::WidthHeight).unwrap();
        s.mean[5] = 1.0;
        let t = SimilarityTransform {
            scale: 2.0,
            rotation: std::f64::consts::FRAC_PI_2,
            tx: 1.0,
            ty: 0.0,
        };
        let w = s.warp(&t);
        assert!((w.mean[0] - 1.0).abs() < 1e-12 && (w.mean[1] - 20.0).abs() < 1e-12);
        assert!(w.mean[5].abs() < 1e-12 && (w.mean[6] - 2.0).abs() < 1e-12);
        assert_eq!((w.mean[2], w.mean[3]), (8.0, 4.0));
        assert!((w.mean[THETA] - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }
}
