use obbtrack_core::cmc::estimate_platform_motion;
use obbtrack_core::metrics::{evaluate, EvalOptions};
use obbtrack_core::synth::{detections_to_frames, generate, perturb, PerturbConfig, ScenarioConfig};
use obbtrack_core::tracker::{detections_from_frames, outputs_to_frames, run_sequence};
use obbtrack_core::{Algorithm, SimilarityTransform, TrackerConfig};

fn idsw(algo: Algorithm, cmc: bool, scenario: &ScenarioConfig, transforms: Option<&[SimilarityTransform]>) -> usize {
    let s = generate(scenario).unwrap();
    let dets = perturb(&s.gt, &PerturbConfig::default(), 1).unwrap();
    let mut cfg = TrackerConfig::new(algo);
    cfg.cmc_enabled = cmc;
    let out = run_sequence(&cfg, &dets, transforms.or(Some(&s.transforms))).unwrap();
    let pred = outputs_to_frames(&out, s.gt.len());
    let r = evaluate(&s.gt, &pred, &EvalOptions::default()).unwrap();
    r.totals().idsw
}

#[test]
fn clean_pipeline_is_perfect_for_every_tracker() {
    let s = generate(&ScenarioConfig { seed: 1, n_objects: 10, frames: 50, ..Default::default() }).unwrap();
    let dets = perturb(&s.gt, &PerturbConfig::default(), 1).unwrap();
    for algo in Algorithm::ALL {
        let out = run_sequence(&TrackerConfig::new(algo), &dets, Some(&s.transforms)).unwrap();
        let pred = outputs_to_frames(&out, s.gt.len());
        let r = evaluate(&s.gt, &pred, &EvalOptions::default()).unwrap();
        let t = r.totals();
        assert_eq!((t.fp, t.fn_, t.idsw), (0, 0, 0), "{algo}");
        assert!(r.detection_averaged.hota > 0.99, "{algo}");
    }
}

#[test]
fn detections_round_trip_through_frames() {
    let s = generate(&ScenarioConfig { seed: 5, frames: 4, ..Default::default() }).unwrap();
    let dets = perturb(&s.gt, &PerturbConfig { fp_rate: 1.0, ..Default::default() }, 2).unwrap();
    assert_eq!(detections_from_frames(&detections_to_frames(&dets)), dets);
}

#[test]
fn compensation_reduces_switches_under_platform_motion() {
    let mut with = 0;
    let mut without = 0;
    for seed in 0..3 {
        let sc = ScenarioConfig::platform_stress(seed);
        with += idsw(Algorithm::BotSort, true, &sc, None);
        without += idsw(Algorithm::Sort, false, &sc, None);
    }
    eprintln!("botsort+cmc {with} sort {without}");
    assert!(with < without);
}

#[test]
fn estimated_motion_matches_generator() {
    let sc = ScenarioConfig {
        seed: 3,
        n_objects: 4,
        frames: 3,
        image_width: 320.0,
        image_height: 240.0,
        min_separation: 40.0,
        platform_tx: 5.0,
        platform_jitter: 1.0,
        ..Default::default()
    };
    let s = generate(&sc).unwrap();
    for t in 2..=3 {
        let m = estimate_platform_motion(&s.render_gray(t - 1), &s.render_gray(t)).unwrap();
        let truth = s.transforms[t - 1];
        assert!(!m.degraded);
        assert!((m.transform.tx - truth.tx).abs() < 0.5 && (m.transform.ty - truth.ty).abs() < 0.5, "{m:?} {truth:?}");
    }
}
