use crate::geometry::{OrientedBox, Point};

/// 4-DOF similarity `p ↦ s·R(θ)·p + t`.
///
/// In per-frame sequences, the transform stored for frame `t` maps frame
/// `t - 1` image coordinates into frame `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityTransform {
    pub scale: f64,
    pub rotation: f64,
    pub tx: f64,
    pub ty: f64,
}

impl Default for SimilarityTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl SimilarityTransform {
    pub const fn identity() -> Self {
        Self {
            scale: 1.0,
            rotation: 0.0,
            tx: 0.0,
            ty: 0.0,
        }
    }

    pub const fn translation(tx: f64, ty: f64) -> Self {
        Self {
            scale: 1.0,
            rotation: 0.0,
            tx,
            ty,
        }
    }

    /// Rotation by `angle` (and scaling by `scale`) about `center`, followed by a translation.
    pub fn about(center: Point, scale: f64, angle: f64, tx: f64, ty: f64) -> Self {
        let (s, c) = angle.sin_cos();
        let rx = scale * (c * center.x - s * center.y);
        let ry = scale * (s * center.x + c * center.y);
        Self {
            scale,
            rotation: angle,
            tx: center.x - rx + tx,
            ty: center.y - ry + ty,
        }
    }

    /// Linear part as a row-major 2×2 matrix.
    pub fn linear(&self) -> [[f64; 2]; 2] {
        let (s, c) = self.rotation.sin_cos();
        [
            [self.scale * c, -self.scale * s],
            [self.scale * s, self.scale * c],
        ]
    }

    pub fn apply(&self, p: Point) -> Point {
        let m = self.linear();
        Point::new(
            m[0][0] * p.x + m[0][1] * p.y + self.tx,
            m[1][0] * p.x + m[1][1] * p.y + self.ty,
        )
    }

    /// Applies only the linear part (for velocities and offsets).
    pub fn apply_vector(&self, v: Point) -> Point {
        let m = self.linear();
        Point::new(m[0][0] * v.x + m[0][1] * v.y, m[1][0] * v.x + m[1][1] * v.y)
    }

    pub fn inverse(&self) -> Self {
        let inv_scale = 1.0 / self.scale;
        let (s, c) = (-self.rotation).sin_cos();
        let tx = -inv_scale * (c * self.tx - s * self.ty);
        let ty = -inv_scale * (s * self.tx + c * self.ty);
        Self {
            scale: inv_scale,
            rotation: -self.rotation,
            tx,
            ty,
        }
    }

    /// `self ∘ first`: apply `first`, then `self`.
    pub fn compose(&self, first: &SimilarityTransform) -> Self {
        let t = self.apply(Point::new(first.tx, first.ty));
        Self {
            scale: self.scale * first.scale,
            rotation: self.rotation + first.rotation,
            tx: t.x,
            ty: t.y,
        }
    }

    /// Moves the center, adds the rotation to the angle and scales both sides.
    pub fn apply_box(&self, b: &OrientedBox) -> OrientedBox {
        let c = self.apply(b.center());
        OrientedBox::new(
            c.x,
            c.y,
            b.w() * self.scale,
            b.h() * self.scale,
            b.theta() + self.rotation,
        )
        .expect("similarity with positive scale preserves box validity")
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::identity()
    }
}
