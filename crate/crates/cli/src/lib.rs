//! Command-line surface of the toolkit.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 when `validate`
//! finds an ERROR-level problem.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use obbtrack_core::dataio::{
    dataset_stats, parse_obbmot, parse_records, group_records, postprocess, read_cube, rgb_proxy, stats_csv, validate,
    write_cube, write_obbmot, Severity,
};
use obbtrack_core::kvconfig::load;
use obbtrack_core::metrics::{evaluate, report_csv, report_text, EvalOptions};
use obbtrack_core::stem::{
    self, conv2d_param_count, conv2d_stem, forward, forward_intermediate, grad_check_seeded, import_rgb_weights,
    one_hot_fold, param_count, random_input, StemConfig, StemWeights, Volume,
};
use obbtrack_core::synth::{detections_to_frames, generate, perturb, PerturbConfig, ScenarioConfig};
use obbtrack_core::tracker::{detections_from_frames, outputs_to_frames, run_sequence};
use obbtrack_core::{Algorithm, SimilarityTransform, TrackerConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;

pub const TRANSFORMS_HEADER: &str = "frame,scale,rotation,tx,ty";

#[derive(Debug, Parser)]
#[command(name = "obbtrack", version, about = "Oriented-box multi-object tracking toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AlgoArg {
    Sort,
    Bytetrack,
    Ocsort,
    Botsort,
}

impl From<AlgoArg> for Algorithm {
    fn from(a: AlgoArg) -> Self {
        match a {
            AlgoArg::Sort => Algorithm::Sort,
            AlgoArg::Bytetrack => Algorithm::ByteTrack,
            AlgoArg::Ocsort => Algorithm::OcSort,
            AlgoArg::Botsort => Algorithm::BotSort,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq)]
enum ReportFormat {
    Csv,
    Text,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic scenario: gt.csv, transforms.csv and optional cubes.
    Synth {
        /// Scenario config file (`key = value`).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the seed from the config file.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, visible_alias = "out")]
        out_dir: PathBuf,
    },
    /// Turn ground truth into noisy detections.
    Perturb {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a tracker over a detections file.
    Track {
        #[arg(long, value_enum)]
        algo: AlgoArg,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        dets: PathBuf,
        /// Per-frame platform transforms (required by botsort with compensation).
        #[arg(long)]
        transforms: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score predictions against ground truth.
    Eval {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        /// Similarity threshold for CLEAR and IDF1.
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long)]
        exclude_truncated: bool,
        #[arg(long, value_enum, default_value_t = ReportFormat::Csv)]
        format: ReportFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dataset statistics over one or more sequences.
    Stats {
        #[arg(long = "gt", required = true)]
        gt: Vec<PathBuf>,
        /// One transforms file per sequence, in the same order.
        #[arg(long = "transforms")]
        transforms: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Apply the image-boundary rules to annotations.
    Postprocess {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        width: f64,
        #[arg(long)]
        height: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Writes discarded records with their reasons.
        #[arg(long)]
        discarded: Option<PathBuf>,
    },
    /// Check annotation consistency.
    Validate {
        #[arg(long)]
        input: PathBuf,
    },
    /// Parameter accounting and shape contract of the spectral stem.
    StemCheck {
        /// Also run the gradient check and the RGB-equivalence check.
        #[arg(long)]
        full: bool,
        /// Load weights from an STW1 file for the shape check.
        #[arg(long)]
        weights: Option<PathBuf>,
    },
    /// Extract the RGB proxy bands from a cube.
    Rgbproxy {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Failure of a subcommand, with its exit code.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn data(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_DATA,
            message: message.into(),
        }
    }
}

impl From<obbtrack_core::Error> for Failure {
    fn from(e: obbtrack_core::Error) -> Self {
        Failure::data(e.to_string())
    }
}

type CmdResult = std::result::Result<i32, Failure>;

fn read_text(path: &Path) -> std::result::Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::data(format!("{}: {e}", path.display())))
}

fn read_bytes(path: &Path) -> std::result::Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|e| Failure::data(format!("{}: {e}", path.display())))
}

fn context<T>(path: &Path, r: obbtrack_core::Result<T>) -> std::result::Result<T, Failure> {
    r.map_err(|e| Failure::data(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, bytes: &[u8]) -> std::result::Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Failure::data(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, bytes).map_err(|e| Failure::data(format!("{}: {e}", path.display())))
}

fn emit(out: &mut dyn Write, path: Option<&Path>, text: &str) -> std::result::Result<(), Failure> {
    match path {
        Some(p) => write_file(p, text.as_bytes()),
        None => out
            .write_all(text.as_bytes())
            .map_err(|e| Failure::data(format!("stdout: {e}"))),
    }
}

pub fn transforms_csv(transforms: &[SimilarityTransform]) -> String {
    let mut s = format!("{TRANSFORMS_HEADER}\n");
    for (i, t) in transforms.iter().enumerate() {
        let _ = writeln!(s, "{},{:.12},{:.12},{:.12},{:.12}", i + 1, t.scale, t.rotation, t.tx, t.ty);
    }
    s
}

/// Parses a transforms file; frames without a row are the identity.
pub fn parse_transforms(text: &str) -> obbtrack_core::Result<Vec<SimilarityTransform>> {
    use obbtrack_core::Error;
    let mut out: Vec<SimilarityTransform> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let l = line.trim();
        if l.is_empty() || l.starts_with('#') || l == TRANSFORMS_HEADER {
            continue;
        }
        let bad = |m: &str| Error::Parse {
            line: i + 1,
            message: m.to_string(),
        };
        let f: Vec<&str> = l.split(',').collect();
        if f.len() != 5 {
            return Err(bad("expected frame,scale,rotation,tx,ty"));
        }
        let frame: usize = f[0].trim().parse().map_err(|_| bad("invalid frame"))?;
        let mut v = [0.0f64; 4];
        for k in 0..4 {
            v[k] = f[k + 1].trim().parse().map_err(|_| bad("invalid number"))?;
            if !v[k].is_finite() {
                return Err(bad("non-finite value"));
            }
        }
        if frame == 0 || v[0] <= 0.0 {
            return Err(bad("frames start at 1 and scale must be positive"));
        }
        if out.len() < frame {
            out.resize(frame, SimilarityTransform::identity());
        }
        out[frame - 1] = SimilarityTransform {
            scale: v[0],
            rotation: v[1],
            tx: v[2],
            ty: v[3],
        };
    }
    Ok(out)
}

fn config_text(path: Option<&PathBuf>) -> std::result::Result<String, Failure> {
    path.map(|p| read_text(p)).transpose().map(Option::unwrap_or_default)
}

fn synth(config: Option<&PathBuf>, seed: Option<u64>, out_dir: &Path, out: &mut dyn Write) -> CmdResult {
    let text = config_text(config)?;
    let mut cfg = load(ScenarioConfig::default(), &text)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let s = generate(&cfg)?;
    write_file(&out_dir.join("gt.csv"), write_obbmot(&s.gt).as_bytes())?;
    write_file(&out_dir.join("transforms.csv"), transforms_csv(&s.transforms).as_bytes())?;
    if let Some(cubes) = &s.cubes {
        for (i, c) in cubes.iter().enumerate() {
            write_file(&out_dir.join("cubes").join(format!("{:06}.msc", i + 1)), &write_cube(c))?;
        }
    }
    let _ = writeln!(
        out,
        "wrote {} frames, {} objects, {} instances to {}",
        s.gt.len(),
        cfg.n_objects,
        s.gt.num_instances(),
        out_dir.display()
    );
    Ok(EXIT_OK)
}

fn track(
    algo: Algorithm,
    config: Option<&PathBuf>,
    dets_path: &Path,
    transforms: Option<&PathBuf>,
    dest: Option<&Path>,
    out: &mut dyn Write,
) -> CmdResult {
    let cfg = load(TrackerConfig::new(algo), &config_text(config)?)?;
    let dets = context(dets_path, parse_obbmot(&read_text(dets_path)?))?;
    let frames = detections_from_frames(&dets);
    let transforms = match transforms {
        Some(p) => {
            let mut t = context(p, parse_transforms(&read_text(p)?))?;
            if t.len() < frames.len() {
                t.resize(frames.len(), SimilarityTransform::identity());
            }
            Some(t)
        }
        None => None,
    };
    let outputs = run_sequence(&cfg, &frames, transforms.as_deref())?;
    emit(out, dest, &write_obbmot(&outputs_to_frames(&outputs, frames.len())))?;
    Ok(EXIT_OK)
}

fn stem_check(full: bool, weights: Option<&PathBuf>, out: &mut dyn Write) -> CmdResult {
    let cfg = StemConfig::default();
    let p = param_count(&cfg);
    let mut s = String::new();
    let _ = writeln!(s, "spectral_3d_stem conv3d={} fold={} total={}", p.conv3d, p.fold, p.total);
    let _ = writeln!(s, "rgb_2d_stem total={}", conv2d_param_count(3, cfg.out_channels, cfg.spatial_kernel));
    let _ = writeln!(s, "msi_2d_stem total={}", conv2d_param_count(8, cfg.out_channels, cfg.spatial_kernel));

    let (cfg, w) = match weights {
        Some(path) => context(path, stem::read_weights(&read_bytes(path)?))?,
        None => (cfg, StemWeights::random(&cfg, 0)),
    };
    let x = random_input(&cfg, 64, 0);
    let (mid, _) = forward_intermediate(&x, &w, &cfg)?;
    let y = forward(&x, &w, &cfg)?;
    let dims = |d: &[usize]| d.iter().map(usize::to_string).collect::<Vec<_>>().join("x");
    let _ = writeln!(
        s,
        "shape input=1x{} intermediate={} output={}",
        dims(&x.shape()),
        dims(&mid),
        dims(&y.shape())
    );
    if full {
        let g = grad_check_seeded(&cfg, 0)?;
        let _ = writeln!(s, "grad_check parameters={} max_relative_error={:.3e}", g.parameters, g.max_relative_error);
        let rgb_cfg = StemConfig { bands: 3, ..cfg };
        let rgb = StemWeights::random(&rgb_cfg, 1).conv3d;
        let image = random_input(&rgb_cfg, 32, 1);
        let reference = conv2d_stem(&image, &rgb, cfg.out_channels, cfg.spatial_kernel)?;
        let mut worst = 0.0f64;
        for b in 1..cfg.bands - 1 {
            let mut sw = import_rgb_weights(&rgb, &cfg)?;
            one_hot_fold(&mut sw, &cfg, b);
            let cube = Volume::from_fn(cfg.bands, 32, 32, |c, yy, xx| {
                if c + 1 >= b && c <= b + 1 {
                    image.at(c + 1 - b, yy, xx)
                } else {
                    0.0
                }
            });
            worst = worst.max(forward(&cube, &sw, &cfg)?.max_abs_diff(&reference));
        }
        let _ = writeln!(s, "rgb_equivalence max_abs_diff={worst:.3e}");
    }
    emit(out, None, &s)?;
    Ok(EXIT_OK)
}

fn dispatch(cli: Cli, out: &mut dyn Write) -> CmdResult {
    match cli.command {
        Command::Synth { config, seed, out_dir } => synth(config.as_ref(), seed, &out_dir, out),
        Command::Perturb { gt, config, seed, out: dest } => {
            let cfg = load(PerturbConfig::default(), &config_text(config.as_ref())?)?;
            let frames = context(&gt, parse_obbmot(&read_text(&gt)?))?;
            let dets = perturb(&frames, &cfg, seed)?;
            emit(out, dest.as_deref(), &write_obbmot(&detections_to_frames(&dets)))?;
            Ok(EXIT_OK)
        }
        Command::Track {
            algo,
            config,
            dets,
            transforms,
            out: dest,
        } => track(algo.into(), config.as_ref(), &dets, transforms.as_ref(), dest.as_deref(), out),
        Command::Eval {
            gt,
            pred,
            alpha,
            exclude_truncated,
            format,
            out: dest,
        } => {
            if !(0.0..=1.0).contains(&alpha) {
                return Err(Failure {
                    code: EXIT_USAGE,
                    message: format!("--alpha must lie in [0, 1], got {alpha}"),
                });
            }
            let g = context(&gt, parse_obbmot(&read_text(&gt)?))?;
            let p = context(&pred, parse_obbmot(&read_text(&pred)?))?;
            let opts = EvalOptions {
                clear_alpha: alpha,
                exclude_truncated,
            };
            let report = evaluate(&g, &p, &opts)?;
            let text = match format {
                ReportFormat::Csv => report_csv(&report),
                ReportFormat::Text => report_text(&report),
            };
            emit(out, dest.as_deref(), &text)?;
            Ok(EXIT_OK)
        }
        Command::Stats { gt, transforms, out: dest } => {
            if !transforms.is_empty() && transforms.len() != gt.len() {
                return Err(Failure {
                    code: EXIT_USAGE,
                    message: "give one --transforms file per --gt file".into(),
                });
            }
            let seqs = gt
                .iter()
                .map(|p| context(p, parse_obbmot(&read_text(p)?)))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            let tr = transforms
                .iter()
                .map(|p| context(p, parse_transforms(&read_text(p)?)))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            let report = dataset_stats(&seqs, (!tr.is_empty()).then_some(tr.as_slice()));
            emit(out, dest.as_deref(), &stats_csv(&report))?;
            Ok(EXIT_OK)
        }
        Command::Postprocess {
            input,
            width,
            height,
            out: dest,
            discarded,
        } => {
            if !(width > 0.0 && height > 0.0) {
                return Err(Failure {
                    code: EXIT_USAGE,
                    message: "--width and --height must be positive".into(),
                });
            }
            let frames = context(&input, parse_obbmot(&read_text(&input)?))?;
            let r = postprocess(&frames, width, height);
            emit(out, dest.as_deref(), &write_obbmot(&r.kept))?;
            if let Some(path) = discarded {
                let mut s = String::from("# frame,id,cx,cy,w,h,theta,conf,class,truncated,reason\n");
                for d in &r.discarded {
                    let _ = writeln!(s, "{},{}", obbtrack_core::dataio::format_record(d.frame, &d.instance), d.reason);
                }
                write_file(&path, s.as_bytes())?;
            }
            Ok(EXIT_OK)
        }
        Command::Validate { input } => {
            let records = context(&input, parse_records(&read_text(&input)?))?;
            let findings = validate(&group_records(&records));
            let mut s = String::new();
            for f in &findings {
                let _ = writeln!(s, "{f}");
            }
            let errors = findings.iter().filter(|f| f.severity == Severity::Error).count();
            let _ = writeln!(s, "{} findings, {} errors", findings.len(), errors);
            emit(out, None, &s)?;
            Ok(if errors > 0 { EXIT_VALIDATION } else { EXIT_OK })
        }
        Command::StemCheck { full, weights } => stem_check(full, weights.as_ref(), out),
        Command::Rgbproxy { input, out: dest } => {
            let cube = context(&input, read_cube(&read_bytes(&input)?))?;
            write_file(&dest, &write_cube(&rgb_proxy(&cube)?))?;
            Ok(EXIT_OK)
        }
    }
}

/// Runs the CLI on `args` (including the program name) and returns the
/// process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{}", e.render());
                    EXIT_USAGE
                }
            };
        }
    };
    match dispatch(cli, out) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transforms_round_trip() {
        let t = vec![
            SimilarityTransform::identity(),
            SimilarityTransform { scale: 1.01, rotation: 0.02, tx: 3.5, ty: -1.25 },
        ];
        let back = parse_transforms(&transforms_csv(&t)).unwrap();
        for (a, b) in t.iter().zip(&back) {
            assert!((a.scale - b.scale).abs() < 1e-12 && (a.rotation - b.rotation).abs() < 1e-12);
            assert!((a.tx - b.tx).abs() < 1e-12 && (a.ty - b.ty).abs() < 1e-12);
        }
        assert!(parse_transforms("frame,scale,rotation,tx,ty\n0,1,0,0,0\n").is_err());
        assert_eq!(parse_transforms("3,1,0,2,0\n").unwrap().len(), 3);
    }

    #[test]
    fn usage_errors_exit_one() {
        let (mut o, mut e) = (Vec::new(), Vec::new());
        assert_eq!(run(["obbtrack", "frobnicate"], &mut o, &mut e), EXIT_USAGE);
        assert!(!e.is_empty());
        assert_eq!(run(["obbtrack", "--help"], &mut o, &mut e), EXIT_OK);
    }
}
