use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use obbtrack_core::dataio::read_cube;

fn obbtrack(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_obbtrack")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

fn ok(args: &[&str]) -> String {
    let o = obbtrack(args);
    assert_eq!(o.status.code(), Some(0), "{args:?}: {}", stderr(&o));
    stdout(&o)
}

const GT: &str = "\
1,1,100.000000,100.000000,40.000000,20.000000,0.300000,1.000000,2,0
1,2,300.000000,200.000000,30.000000,12.000000,1.200000,1.000000,1,0
2,1,103.000000,101.000000,40.000000,20.000000,0.310000,1.000000,2,0
2,2,302.000000,203.000000,30.000000,12.000000,1.210000,1.000000,1,0
";

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let o = obbtrack(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).is_empty());
    assert!(stderr(&o).contains("Usage"), "{}", stderr(&o));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let o = obbtrack(&["eval", "--gt", "a", "--pred", "b", "--bogus"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--bogus"));
    let o = obbtrack(&["track", "--algo", "deepsort", "--dets", "x"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn help_and_version_go_to_stdout() {
    for flag in ["--help", "--version"] {
        let o = obbtrack(&[flag]);
        assert_eq!(o.status.code(), Some(0));
        assert!(!stdout(&o).is_empty() && stderr(&o).is_empty());
    }
}

#[test]
fn eval_of_ground_truth_against_itself_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let gt = path(dir.path(), "gt.csv");
    fs::write(&gt, GT).unwrap();
    let out = ok(&["eval", "--gt", &gt, "--pred", &gt]);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("class,HOTA,MOTA,IDF1,DetA,AssA,FP,FN,IDSW"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[0].starts_with("pedestrian,") && rows[1].starts_with("car,"));
    assert!(rows[2].starts_with("class_averaged,") && rows[3].starts_with("detection_averaged,"));
    for r in rows {
        let f: Vec<&str> = r.split(',').collect();
        assert_eq!(&f[1..4], ["1.000000"; 3], "{r}");
        assert_eq!(&f[6..], ["0"; 3], "{r}");
    }
    let text = ok(&["eval", "--gt", &gt, "--pred", &gt, "--format", "text"]);
    assert!(text.contains("detection_averaged"));
}

#[test]
fn stem_check_reports_parameter_totals() {
    let out = ok(&["stem-check"]);
    for n in ["total=9408", "total=25088", "total=9920", "output=64x16x16"] {
        assert!(out.contains(n), "{n} missing from\n{out}");
    }
    assert!(!out.contains("grad_check"));
}

#[test]
fn validate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let clean = path(dir.path(), "clean.csv");
    fs::write(&clean, GT).unwrap();
    assert_eq!(obbtrack(&["validate", "--input", &clean]).status.code(), Some(0));

    let dup = path(dir.path(), "dup.csv");
    fs::write(&dup, format!("{GT}2,1,150.0,150.0,40.0,20.0,0.3,1.0,2,0\n")).unwrap();
    let o = obbtrack(&["validate", "--input", &dup]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("ERROR DUPLICATE_ID frame=2 id=1"), "{}", stdout(&o));
}

#[test]
fn data_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = path(dir.path(), "missing.csv");
    let o = obbtrack(&["eval", "--gt", &missing, "--pred", &missing]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("missing.csv"));

    let bad = path(dir.path(), "bad.csv");
    fs::write(&bad, "1,1,nan,1,1,1,0,1,1,0\n").unwrap();
    assert_eq!(obbtrack(&["validate", "--input", &bad]).status.code(), Some(2));

    let cfg = path(dir.path(), "s.cfg");
    fs::write(&cfg, "seed = 1\nn_objcts = 4\n").unwrap();
    let o = obbtrack(&["synth", "--config", &cfg, "--out-dir", &path(dir.path(), "s")]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("n_objcts"), "{}", stderr(&o));
}

#[test]
fn botsort_needs_transforms() {
    let dir = tempfile::tempdir().unwrap();
    let dets = path(dir.path(), "dets.csv");
    fs::write(&dets, GT).unwrap();
    let o = obbtrack(&["track", "--algo", "botsort", "--dets", &dets]);
    assert_eq!(o.status.code(), Some(2));
    let cfg = path(dir.path(), "t.cfg");
    fs::write(&cfg, "cmc_enabled = false\n").unwrap();
    ok(&["track", "--algo", "botsort", "--config", &cfg, "--dets", &dets]);
}

fn pipeline(dir: &Path) -> (String, String) {
    let cfg = path(dir, "scenario.cfg");
    fs::write(&cfg, "seed = 4\nn_objects = 6\nframes = 20\nplatform_tx = 3\nplatform_jitter = 0.5\n").unwrap();
    let pcfg = path(dir, "perturb.cfg");
    fs::write(&pcfg, "miss_rate = 0.1\nfp_rate = 0.5\ncenter_noise_std = 1.0\nangle_noise_std = 0.02\n").unwrap();
    ok(&["synth", "--config", &cfg, "--out-dir", &path(dir, "seq")]);
    ok(&["perturb", "--gt", &path(dir, "seq/gt.csv"), "--config", &pcfg, "--seed", "9", "--out", &path(dir, "dets.csv")]);
    let tracks = path(dir, "tracks.csv");
    ok(&[
        "track",
        "--algo",
        "botsort",
        "--dets",
        &path(dir, "dets.csv"),
        "--transforms",
        &path(dir, "seq/transforms.csv"),
        "--out",
        &tracks,
    ]);
    let report = ok(&["eval", "--gt", &path(dir, "seq/gt.csv"), "--pred", &tracks]);
    (fs::read_to_string(&tracks).unwrap(), report)
}

#[test]
fn pipeline_is_byte_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (ta, ra) = pipeline(a.path());
    let (tb, rb) = pipeline(b.path());
    assert!(!ta.is_empty());
    assert_eq!(ta, tb);
    assert_eq!(ra, rb);
}

#[test]
fn stats_recover_platform_motion() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = path(dir.path(), "s.cfg");
    fs::write(&cfg, "seed = 2\nn_objects = 5\nframes = 10\nplatform_tx = 8\nspeed_min = 2\nspeed_max = 2\n").unwrap();
    ok(&["synth", "--config", &cfg, "--out-dir", &path(dir.path(), "seq")]);
    let out = ok(&[
        "stats",
        "--gt",
        &path(dir.path(), "seq/gt.csv"),
        "--transforms",
        &path(dir.path(), "seq/transforms.csv"),
    ]);
    let value = |key: &str| -> f64 {
        out.lines()
            .find_map(|l| l.strip_prefix(&format!("{key},")))
            .and_then(|v| v.parse().ok())
            .unwrap_or_else(|| panic!("{key} missing"))
    };
    assert!((value("mean_drone_px") - 8.0).abs() < 1e-6);
    assert!((value("mean_object_px") - 2.0).abs() < 1e-6);
    assert_eq!(value("instances"), 50.0);

    let o = obbtrack(&["stats", "--gt", &path(dir.path(), "seq/gt.csv"), "--transforms", "a", "--transforms", "b"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn postprocess_writes_kept_and_discarded() {
    let dir = tempfile::tempdir().unwrap();
    let input = path(dir.path(), "in.csv");
    fs::write(
        &input,
        "1,1,0.0,50.0,20.0,10.0,0.0,1.0,2,0\n1,2,-3.0,50.0,20.0,10.0,0.0,1.0,2,0\n1,3,500.0,250.0,40.0,10.0,0.2,1.0,2,1\n",
    )
    .unwrap();
    let (kept, disc) = (path(dir.path(), "kept.csv"), path(dir.path(), "disc.csv"));
    ok(&["postprocess", "--input", &input, "--width", "1000", "--height", "500", "--out", &kept, "--discarded", &disc]);
    let kept = fs::read_to_string(kept).unwrap();
    let rows: Vec<&str> = kept.lines().collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("1,1,") && rows[0].ends_with(",1"));
    assert!(rows[1].starts_with("1,3,") && rows[1].ends_with(",0"));
    let disc = fs::read_to_string(disc).unwrap();
    assert!(disc.lines().any(|l| l.starts_with("1,2,") && l.ends_with(",center_outside")));
    let o = obbtrack(&["postprocess", "--input", &input, "--width", "0", "--height", "500"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn synth_cubes_and_rgb_proxy() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = path(dir.path(), "s.cfg");
    fs::write(
        &cfg,
        "seed = 3\nn_objects = 2\nframes = 2\nimage_width = 96\nimage_height = 64\nmin_separation = 20\nborder_margin = 16\nbox_size_min = 8\nbox_size_max = 12\nrender_cubes = true\n",
    )
    .unwrap();
    ok(&["synth", "--config", &cfg, "--out-dir", &path(dir.path(), "seq")]);
    let cube = path(dir.path(), "seq/cubes/000001.msc");
    let full = read_cube(&fs::read(&cube).unwrap()).unwrap();
    assert_eq!((full.bands(), full.height(), full.width()), (8, 64, 96));
    let rgb = path(dir.path(), "rgb.msc");
    ok(&["rgbproxy", "--input", &cube, "--out", &rgb]);
    let proxy = read_cube(&fs::read(&rgb).unwrap()).unwrap();
    assert_eq!((proxy.bands(), proxy.height(), proxy.width()), (3, 64, 96));
    assert_eq!(proxy.at(0, 10, 20), full.at(4, 10, 20));
    assert_eq!(proxy.at(2, 10, 20), full.at(1, 10, 20));
}
