use std::f64::consts::PI;

use obbtrack_core::assignment::{solve_lap, CostMatrix};
use obbtrack_core::dataio::{parse_obbmot, postprocess, write_obbmot};
use obbtrack_core::geometry::{angle_residual, canonicalize_angle, riou, OrientedBox, Point, ANGLE_MAX, ANGLE_MIN};
use obbtrack_core::kalman::{init_state, predict, update, FilterParams, SizeParam};
use obbtrack_core::{FrameSet, Instance};
use proptest::prelude::*;

fn obb() -> impl Strategy<Value = OrientedBox> {
    (-50.0..50.0f64, -50.0..50.0f64, 1.0..40.0f64, 1.0..40.0f64, -4.0..4.0f64)
        .prop_map(|(cx, cy, w, h, t)| OrientedBox::new(cx, cy, w, h, t).unwrap())
}

/// Cell-center coverage fraction of `b` on a `n × n` grid over `[-100, 100]²`.
fn raster(a: &OrientedBox, b: &OrientedBox, n: usize) -> f64 {
    let cell = 200.0 / n as f64;
    let (mut inter, mut union) = (0usize, 0usize);
    for i in 0..n {
        for j in 0..n {
            let p = Point::new(-100.0 + (j as f64 + 0.5) * cell, -100.0 + (i as f64 + 0.5) * cell);
            let (ia, ib) = (a.contains(p), b.contains(p));
            inter += usize::from(ia && ib);
            union += usize::from(ia || ib);
        }
    }
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

fn corner_set(b: &OrientedBox) -> Vec<(i64, i64)> {
    let mut v: Vec<(i64, i64)> = b
        .corners()
        .iter()
        .map(|p| ((p.x * 1e6).round() as i64, (p.y * 1e6).round() as i64))
        .collect();
    v.sort();
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn riou_symmetric_and_bounded(a in obb(), b in obb()) {
        let (x, y) = (riou(&a, &b), riou(&b, &a));
        prop_assert_eq!(x, y);
        prop_assert!((0.0..=1.0).contains(&x));
        prop_assert_eq!(riou(&a, &a), 1.0);
    }

    #[test]
    fn riou_agrees_with_coarse_raster(a in obb(), b in obb()) {
        prop_assert!((riou(&a, &b) - raster(&a, &b, 400)).abs() < 0.06);
    }

    #[test]
    fn canonical_box_keeps_its_corners(cx in -10.0..10.0f64, cy in -10.0..10.0f64, w in 1.0..30.0f64, h in 1.0..30.0f64, t in -7.0..7.0f64) {
        let b = OrientedBox::new(cx, cy, w, h, t).unwrap();
        prop_assert!(b.w() >= b.h());
        prop_assert!(b.theta() >= ANGLE_MIN && b.theta() < ANGLE_MAX);
        // reference corners of the raw parameters
        let (s, c) = t.sin_cos();
        let mut raw: Vec<(i64, i64)> = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)]
            .iter()
            .map(|(sx, sy)| {
                let (dx, dy) = (sx * w / 2.0, sy * h / 2.0);
                (((cx + c * dx - s * dy) * 1e6).round() as i64, ((cy + s * dx + c * dy) * 1e6).round() as i64)
            })
            .collect();
        raw.sort();
        let got = corner_set(&b);
        for (p, q) in raw.iter().zip(&got) {
            prop_assert!((p.0 - q.0).abs() <= 2 && (p.1 - q.1).abs() <= 2);
        }
    }

    #[test]
    fn residual_inverts(m in -10.0..10.0f64, p in -10.0..10.0f64) {
        let (m, p) = (canonicalize_angle(m).unwrap(), canonicalize_angle(p).unwrap());
        let r = angle_residual(m, p);
        prop_assert!((-PI / 2.0..PI / 2.0).contains(&r));
        let back = canonicalize_angle(p.radians() + r).unwrap();
        let d = (back.radians() - m.radians()).abs();
        prop_assert!(d < 1e-9 || (d - PI).abs() < 1e-9);
    }

    #[test]
    fn lap_invariant_under_relabeling(
        values in prop::collection::vec(0.0..10.0f64, 30),
        shift in 0usize..5,
    ) {
        let (rows, cols) = (5, 6);
        let m = CostMatrix::from_rows(&values.chunks(cols).map(<[f64]>::to_vec).collect::<Vec<_>>(), cols);
        let rp: Vec<usize> = (0..rows).map(|r| (r + shift) % rows).collect();
        let cp: Vec<usize> = (0..cols).rev().collect();
        let mut p = CostMatrix::zeros(rows, cols);
        for (r, &pr) in rp.iter().enumerate() {
            for (c, &pc) in cp.iter().enumerate() {
                p.set(pr, pc, m.get(r, c));
            }
        }
        let a = solve_lap(&m);
        let b = solve_lap(&p);
        prop_assert_eq!(a.matches.len(), b.matches.len());
        prop_assert!((m.total(&a.matches) - p.total(&b.matches)).abs() < 1e-9);
    }

    #[test]
    fn kalman_translation_equivariant(b in obb(), dx in -100.0..100.0f64, dy in -100.0..100.0f64, steps in prop::collection::vec((-2.0..2.0f64, -2.0..2.0f64), 1..8)) {
        let params = FilterParams::for_size_param(SizeParam::WidthHeight);
        let mut a = init_state(&b, &params, SizeParam::WidthHeight).unwrap();
        let mut s = init_state(&b.with_center(b.cx() + dx, b.cy() + dy), &params, SizeParam::WidthHeight).unwrap();
        let mut cur = b;
        for (mx, my) in steps {
            cur = cur.with_center(cur.cx() + mx, cur.cy() + my);
            a = update(&predict(&a, &params), &cur, &params).unwrap();
            s = update(&predict(&s, &params), &cur.with_center(cur.cx() + dx, cur.cy() + dy), &params).unwrap();
        }
        prop_assert!((s.mean[0] - a.mean[0] - dx).abs() < 1e-8);
        prop_assert!((s.mean[1] - a.mean[1] - dy).abs() < 1e-8);
        for k in 2..10 {
            prop_assert!((s.mean[k] - a.mean[k]).abs() < 1e-8);
        }
    }

    #[test]
    fn postprocess_idempotent(boxes in prop::collection::vec((-150.0..1150.0f64, -150.0..650.0f64, 2.0..300.0f64, 2.0..300.0f64, -1.0..3.0f64), 0..12)) {
        let mut fs = FrameSet::with_frames(1);
        for (i, (cx, cy, w, h, t)) in boxes.into_iter().enumerate() {
            fs.push(1, Instance { track_id: i as i64, class_id: 2, bbox: OrientedBox::new(cx, cy, w, h, t).unwrap(), confidence: 1.0, truncated: false });
        }
        let once = postprocess(&fs, 1000.0, 500.0);
        let twice = postprocess(&once.kept, 1000.0, 500.0);
        prop_assert_eq!(&twice.kept, &once.kept);
        prop_assert!(twice.discarded.is_empty());
    }

    #[test]
    fn write_parse_round_trip(rows in prop::collection::vec((1usize..6, 0i64..50, 0i64..1_000_000_000, 0i64..1_000_000_000, 1i64..100_000_000, -785_398i64..2_356_194, 1u8..=8), 1..20)) {
        let mut text = String::new();
        let mut seen = std::collections::HashSet::new();
        for (f, id, cx, cy, w, t, c) in rows {
            if !seen.insert((f, id)) {
                continue;
            }
            let w = w as f64 / 1e6 + 1.0;
            text += &format!("{f},{id},{:.6},{:.6},{w:.6},1.000000,{:.6},0.500000,{c},0\n", cx as f64 / 1e6, cy as f64 / 1e6, t as f64 / 1e6);
        }
        let fs = parse_obbmot(&text).unwrap();
        let out = write_obbmot(&fs);
        prop_assert_eq!(write_obbmot(&parse_obbmot(&out).unwrap()), out.clone());
        let mut sorted: Vec<&str> = text.lines().collect();
        sorted.sort_by_key(|l| {
            let mut it = l.split(',');
            (it.next().unwrap().parse::<usize>().unwrap(), it.next().unwrap().parse::<i64>().unwrap())
        });
        prop_assert_eq!(out, sorted.join("\n") + "\n");
    }
}

#[test]
fn covariance_stays_psd_for_a_thousand_cycles() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    for sp in [SizeParam::WidthHeight, SizeParam::AreaAspect] {
        let params = FilterParams::for_size_param(sp);
        let mut b = OrientedBox::new(100.0, 100.0, 30.0, 12.0, 0.3).unwrap();
        let mut s = init_state(&b, &params, sp).unwrap();
        for k in 0..1000 {
            s = predict(&s, &params);
            if k % 7 != 3 {
                b = OrientedBox::new(
                    b.cx() + rng.random_range(-2.0..2.0),
                    b.cy() + rng.random_range(-2.0..2.0),
                    (b.w() + rng.random_range(-0.5..0.5)).max(5.0),
                    (b.h() + rng.random_range(-0.5..0.5)).max(2.0),
                    b.theta() + rng.random_range(-0.1..0.1),
                )
                .unwrap();
                s = update(&s, &b, &params).unwrap();
            }
            let eig = s.covariance.symmetric_eigen().eigenvalues;
            let max = eig.max();
            assert!(eig.min() >= -1e-9 * max.max(1.0), "{sp:?} cycle {k}: {}", eig.min());
            assert!(s.mean.iter().all(|v| v.is_finite()));
        }
    }
}
