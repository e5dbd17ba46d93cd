//! Oriented bounding box geometry.
//!
//! Angles follow the le135 convention: a box angle is measured from the +x
//! axis to the box's long side and lives in `[-π/4, 3π/4)`. Rectangles have
//! period π, so every real angle has exactly one canonical representative.
//!
//! Intersections are computed by clipping one convex polygon against the
//! half-planes of the other; areas use the shoelace formula.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use crate::error::{Error, Result};

/// Upper (exclusive) bound of the canonical angle range.
pub const ANGLE_MAX: f64 = 3.0 * FRAC_PI_4;
/// Lower (inclusive) bound of the canonical angle range.
pub const ANGLE_MIN: f64 = -FRAC_PI_4;

/// Intersections smaller than this (px²) count as empty.
pub const AREA_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Canonical box angle in `[-π/4, 3π/4)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct Angle(f64);

impl Angle {
    /// Radians, always within the canonical range.
    pub fn radians(self) -> f64 {
        self.0
    }
}

/// Maps any finite angle to its le135 representative modulo π.
pub fn canonicalize_angle(theta: f64) -> Result<Angle> {
    if !theta.is_finite() {
        return Err(Error::domain(format!("angle must be finite, got {theta}")));
    }
    Ok(Angle(wrap_le135(theta)))
}

fn wrap_le135(theta: f64) -> f64 {
    if (ANGLE_MIN..ANGLE_MAX).contains(&theta) {
        return theta;
    }
    let mut r = theta - PI * ((theta - ANGLE_MIN) / PI).floor();
    // floor() can land one period off when theta sits within an ulp of a boundary
    if r >= ANGLE_MAX {
        r -= PI;
    }
    if r < ANGLE_MIN {
        r += PI;
    }
    if r >= ANGLE_MAX {
        // r was a hair below ANGLE_MIN and adding π rounded up onto the bound
        r = ANGLE_MIN;
    }
    r
}

/// Signed difference `measured - predicted` wrapped modulo π into `[-π/2, π/2)`.
pub fn angle_residual(measured: Angle, predicted: Angle) -> f64 {
    wrap_half_pi(measured.0 - predicted.0)
}

pub(crate) fn wrap_half_pi(d: f64) -> f64 {
    if (-FRAC_PI_2..FRAC_PI_2).contains(&d) {
        return d;
    }
    let mut r = d - PI * ((d + FRAC_PI_2) / PI).floor();
    if r >= FRAC_PI_2 {
        r -= PI;
    }
    if r < -FRAC_PI_2 {
        r += PI;
    }
    if r >= FRAC_PI_2 {
        r = -FRAC_PI_2;
    }
    r
}

/// Angle from a normalized head output `n ∈ [0, 1]`: `(n - 1/4)·π`, canonicalized.
pub fn decode_angle(normalized: f64) -> Result<Angle> {
    if !(0.0..=1.0).contains(&normalized) {
        return Err(Error::domain(format!(
            "normalized angle must lie in [0, 1], got {normalized}"
        )));
    }
    canonicalize_angle((normalized - 0.25) * PI)
}

/// Iterative refinement step: `(σ(σ⁻¹(prev) + delta) - 1/4)·π`, canonicalized.
pub fn refine_angle(prev_normalized: f64, delta: f64) -> Result<Angle> {
    if !(prev_normalized > 0.0 && prev_normalized < 1.0) {
        return Err(Error::domain(format!(
            "previous normalized angle must lie in (0, 1), got {prev_normalized}"
        )));
    }
    if !delta.is_finite() {
        return Err(Error::domain("refinement delta must be finite"));
    }
    let logit = (prev_normalized / (1.0 - prev_normalized)).ln();
    let s = sigmoid(logit + delta);
    canonicalize_angle((s - 0.25) * PI)
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// A rotated rectangle in canonical form (`w >= h > 0`, le135 angle).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedBox {
    cx: f64,
    cy: f64,
    w: f64,
    h: f64,
    angle: Angle,
}

impl OrientedBox {
    /// Builds a canonical box. When `h > w` the sides are swapped and the
    /// angle turned a quarter so the corner set is unchanged.
    pub fn new(cx: f64, cy: f64, w: f64, h: f64, theta: f64) -> Result<Self> {
        canonicalize_box(cx, cy, w, h, theta)
    }

    pub fn cx(&self) -> f64 {
        self.cx
    }

    pub fn cy(&self) -> f64 {
        self.cy
    }

    /// Long side.
    pub fn w(&self) -> f64 {
        self.w
    }

    /// Short side.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn angle(&self) -> Angle {
        self.angle
    }

    pub fn theta(&self) -> f64 {
        self.angle.0
    }

    pub fn center(&self) -> Point {
        Point::new(self.cx, self.cy)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn diagonal(&self) -> f64 {
        self.w.hypot(self.h)
    }

    /// Same box moved to a new center.
    pub fn with_center(&self, cx: f64, cy: f64) -> Self {
        Self { cx, cy, ..*self }
    }

    /// Corner points in counterclockwise order.
    pub fn corners(&self) -> [Point; 4] {
        corners(self)
    }

    pub fn polygon(&self) -> ConvexPolygon {
        ConvexPolygon {
            vertices: self.corners().to_vec(),
        }
    }

    /// True when `p` lies inside or on the boundary.
    pub fn contains(&self, p: Point) -> bool {
        let (s, c) = self.angle.0.sin_cos();
        let dx = p.x - self.cx;
        let dy = p.y - self.cy;
        let u = dx * c + dy * s;
        let v = -dx * s + dy * c;
        u.abs() <= self.w / 2.0 && v.abs() <= self.h / 2.0
    }

    fn key(&self) -> [f64; 5] {
        [self.cx, self.cy, self.w, self.h, self.angle.0]
    }
}

pub fn canonicalize_box(cx: f64, cy: f64, w: f64, h: f64, theta: f64) -> Result<OrientedBox> {
    if !(cx.is_finite() && cy.is_finite()) {
        return Err(Error::domain("box center must be finite"));
    }
    if !(w > 0.0 && h > 0.0 && w.is_finite() && h.is_finite()) {
        return Err(Error::domain(format!(
            "box size must be positive, got {w} x {h}"
        )));
    }
    let (w, h, theta) = if h > w {
        (h, w, theta + FRAC_PI_2)
    } else {
        (w, h, theta)
    };
    Ok(OrientedBox {
        cx,
        cy,
        w,
        h,
        angle: canonicalize_angle(theta)?,
    })
}

pub fn corners(b: &OrientedBox) -> [Point; 4] {
    let (s, c) = b.angle.0.sin_cos();
    let hw = b.w / 2.0;
    let hh = b.h / 2.0;
    let at = |u: f64, v: f64| Point::new(b.cx + u * c - v * s, b.cy + u * s + v * c);
    [at(-hw, -hh), at(hw, -hh), at(hw, hh), at(-hw, hh)]
}

/// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { x0, y0, x1, y1 }
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0).max(0.0) * (self.y1 - self.y0).max(0.0)
    }

    pub fn polygon(&self) -> ConvexPolygon {
        ConvexPolygon {
            vertices: vec![
                Point::new(self.x0, self.y0),
                Point::new(self.x1, self.y0),
                Point::new(self.x1, self.y1),
                Point::new(self.x0, self.y1),
            ],
        }
    }
}

/// Convex polygon with counterclockwise vertices. May be empty.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConvexPolygon {
    pub vertices: Vec<Point>,
}

impl ConvexPolygon {
    pub fn new(vertices: Vec<Point>) -> Self {
        Self { vertices }
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.len() < 3
    }

    /// Shoelace area.
    pub fn area(&self) -> f64 {
        let n = self.vertices.len();
        if n < 3 {
            return 0.0;
        }
        let mut twice = 0.0;
        for i in 0..n {
            let p = self.vertices[i];
            let q = self.vertices[(i + 1) % n];
            twice += p.x * q.y - q.x * p.y;
        }
        twice / 2.0
    }
}

/// Clips `a` against every edge half-plane of `b`.
pub fn intersect_convex(a: &ConvexPolygon, b: &ConvexPolygon) -> ConvexPolygon {
    if a.is_empty() || b.is_empty() {
        return ConvexPolygon::default();
    }
    let mut output = a.vertices.clone();
    let mut input = Vec::with_capacity(output.len() + 4);
    let m = b.vertices.len();
    for i in 0..m {
        if output.is_empty() {
            break;
        }
        let e0 = b.vertices[i];
        let e1 = b.vertices[(i + 1) % m];
        std::mem::swap(&mut input, &mut output);
        output.clear();
        // positive side of a counterclockwise edge is the interior
        let side = |p: &Point| (e1.x - e0.x) * (p.y - e0.y) - (e1.y - e0.y) * (p.x - e0.x);
        let n = input.len();
        for k in 0..n {
            let cur = input[k];
            let prev = input[(k + n - 1) % n];
            let dc = side(&cur);
            let dp = side(&prev);
            if dc >= 0.0 {
                if dp < 0.0 {
                    output.push(edge_crossing(prev, cur, dp, dc));
                }
                output.push(cur);
            } else if dp >= 0.0 {
                output.push(edge_crossing(prev, cur, dp, dc));
            }
        }
    }
    let poly = ConvexPolygon { vertices: output };
    if poly.area() < AREA_EPSILON {
        ConvexPolygon::default()
    } else {
        poly
    }
}

fn edge_crossing(p: Point, q: Point, dp: f64, dq: f64) -> Point {
    let t = dp / (dp - dq);
    Point::new(p.x + (q.x - p.x) * t, p.y + (q.y - p.y) * t)
}

/// Area of the intersection of two oriented boxes.
pub fn intersection_area(a: &OrientedBox, b: &OrientedBox) -> f64 {
    // order operands so the result does not depend on argument order
    let (first, second) = if a.key() <= b.key() { (a, b) } else { (b, a) };
    intersect_convex(&first.polygon(), &second.polygon()).area()
}

/// Rotated intersection-over-union.
pub fn riou(a: &OrientedBox, b: &OrientedBox) -> f64 {
    if a == b {
        return 1.0;
    }
    let inter = intersection_area(a, b);
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Intersection over the box's own area (intersection-over-foreground).
pub fn iof(b: &OrientedBox, region: &Rect) -> f64 {
    let inter = intersect_convex(&b.polygon(), &region.polygon()).area();
    (inter / b.area()).clamp(0.0, 1.0)
}

/// Pairwise rIoU, `rows.len()` × `cols.len()`, row-major.
pub fn riou_matrix(rows: &[OrientedBox], cols: &[OrientedBox]) -> Vec<Vec<f64>> {
    rows.iter()
        .map(|r| cols.iter().map(|c| riou(r, c)).collect())
        .collect()
}
