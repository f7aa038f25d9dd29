//! Command-line front end: `detect`, `eval`, `synth` and `sweep`.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::baselines::{grx_map, lrx_map};
use crate::error::{Error, Result};
use crate::eval::{auc, roc_curve, separability_stats, write_roc_csv, write_separability_csv};
use crate::io::{load_cube, load_map, load_mask, save_cube, save_map, save_mask, save_preview};
use crate::raster::{DetectionMap, HyperCube};
use crate::spatial::{spatial_map, SpatialParams};
use crate::spectral::{
    spectral_map, CovarianceMode, SaliencyInput, SpectralParams, TestVectorMode,
};
use crate::synth::{generate_scene, parse_anomaly, SceneSpec};
use crate::window::DualWindowSpec;
use crate::{ssfad, FusionStrategy};

#[derive(Debug, Parser)]
#[command(
    name = "ssfad",
    version,
    about = "Hyperspectral anomaly detection with spectral-spatial fusion"
)]
pub struct Cli {
    /// Worker threads for per-pixel detectors (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a detector on a cube and write its score map.
    Detect(DetectArgs),
    /// Compare a score map with a ground-truth mask.
    Eval(EvalArgs),
    /// Generate a synthetic scene.
    Synth(SynthArgs),
    /// Grid search over window sizes, reporting AUC for each pair.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Ssfad,
    SsfadSpectral,
    SsfadSpatial,
    Grx,
    Lrx,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FusionArg {
    Adaptive,
    Average,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TestVectorArg {
    Centered,
    Residual,
    Projection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SaliencyArg {
    Original,
    Projected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CovModeArg {
    Centered,
    SecondMoment,
}

/// Detector settings shared by `detect` and `sweep`.
#[derive(Debug, Clone, Args)]
pub struct DetectorOptions {
    #[arg(long, value_enum, default_value_t = Method::Ssfad)]
    pub method: Method,
    #[arg(long, value_enum, default_value_t = FusionArg::Adaptive)]
    pub fusion: FusionArg,
    /// Covariance diagonal loading, relative to trace / bands.
    #[arg(long, default_value_t = 1e-6)]
    pub ridge: f64,
    /// Saliency position constant.
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    /// Leave the LMML position parameter unclamped.
    #[arg(long)]
    pub no_clamp: bool,
    #[arg(long, value_enum, default_value_t = TestVectorArg::Centered)]
    pub test_vector: TestVectorArg,
    #[arg(long, value_enum, default_value_t = SaliencyArg::Original)]
    pub saliency_input: SaliencyArg,
    #[arg(long, value_enum, default_value_t = CovModeArg::Centered)]
    pub cov_mode: CovModeArg,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// Cube header file.
    #[arg(long)]
    pub cube: PathBuf,
    #[command(flatten)]
    pub detector: DetectorOptions,
    /// Outer window size.
    #[arg(long, default_value_t = 5)]
    pub wout: usize,
    /// Inner window size.
    #[arg(long, default_value_t = 3)]
    pub win: usize,
    /// Spatial patch size (default: the inner window size).
    #[arg(long)]
    pub omega: Option<usize>,
    /// Output map header path.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional 8-bit PGM preview of the normalized map.
    #[arg(long)]
    pub preview: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Score map header.
    #[arg(long)]
    pub map: PathBuf,
    /// Ground-truth mask (PGM or uint8 header).
    #[arg(long)]
    pub mask: PathBuf,
    #[arg(long)]
    pub roc_out: Option<PathBuf>,
    #[arg(long)]
    pub stats_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Scene description in key=value form; replaces the scene flags.
    #[arg(long, conflicts_with_all = ["seed", "height", "width", "bands", "classes", "noise_sigma", "anomaly"])]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 100)]
    pub height: usize,
    #[arg(long, default_value_t = 100)]
    pub width: usize,
    #[arg(long, default_value_t = 20)]
    pub bands: usize,
    #[arg(long, default_value_t = 3)]
    pub classes: usize,
    #[arg(long, default_value_t = 0.02)]
    pub noise_sigma: f64,
    /// Anomaly block `row,col,size,contrast`; repeatable.
    #[arg(long)]
    pub anomaly: Vec<String>,
    /// Writes `<prefix>.hdr`, `<prefix>.raw`, `<prefix>_mask.pgm` and `<prefix>.scene`.
    #[arg(long)]
    pub out_prefix: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub cube: PathBuf,
    #[arg(long)]
    pub mask: PathBuf,
    #[command(flatten)]
    pub detector: DetectorOptions,
    /// Outer window range `start:end:step` (inclusive).
    #[arg(long, default_value = "5:25:2")]
    pub wout: String,
    /// Inner window range `start:end:step` (inclusive).
    #[arg(long, default_value = "3:15:2")]
    pub win: String,
    /// Output CSV of `wout,win,auc`.
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses `start:end:step` (inclusive) or a single value.
pub fn parse_range(text: &str) -> Result<Vec<usize>> {
    let bad = || Error::InvalidParameter(format!("bad range {text:?}, expected start:end:step"));
    let parts: Vec<&str> = text.split(':').collect();
    let nums = parts
        .iter()
        .map(|p| p.trim().parse::<usize>().map_err(|_| bad()))
        .collect::<Result<Vec<usize>>>()?;
    let (start, end, step) = match nums.as_slice() {
        [v] => (*v, *v, 1),
        [a, b] => (*a, *b, 1),
        [a, b, s] => (*a, *b, *s),
        _ => return Err(bad()),
    };
    if step == 0 {
        return Err(bad());
    }
    Ok((start..=end).step_by(step).collect())
}

impl DetectorOptions {
    fn spectral_params(&self, window: DualWindowSpec) -> SpectralParams {
        SpectralParams {
            window,
            c: self.c,
            ridge: self.ridge,
            clamp_eta: !self.no_clamp,
            test_vector_mode: match self.test_vector {
                TestVectorArg::Centered => TestVectorMode::Centered,
                TestVectorArg::Residual => TestVectorMode::Residual,
                TestVectorArg::Projection => TestVectorMode::Projection,
            },
            saliency_input: match self.saliency_input {
                SaliencyArg::Original => SaliencyInput::Original,
                SaliencyArg::Projected => SaliencyInput::Projected,
            },
            covariance_mode: match self.cov_mode {
                CovModeArg::Centered => CovarianceMode::Centered,
                CovModeArg::SecondMoment => CovarianceMode::SecondMoment,
            },
        }
    }

    fn strategy(&self) -> FusionStrategy {
        match self.fusion {
            FusionArg::Adaptive => FusionStrategy::Adaptive,
            FusionArg::Average => FusionStrategy::Average,
        }
    }

    /// Runs the configured detector. Returns the map and, for full SSFAD,
    /// the fusion weights.
    fn run(
        &self,
        cube: &HyperCube,
        wout: usize,
        win: usize,
        omega: usize,
    ) -> Result<(DetectionMap, Option<(f64, f64)>)> {
        match self.method {
            Method::Grx => Ok((grx_map(cube, self.ridge)?, None)),
            Method::Lrx => Ok((
                lrx_map(cube, &DualWindowSpec::new(wout, win)?, self.ridge)?,
                None,
            )),
            Method::SsfadSpatial => Ok((spatial_map(cube, &SpatialParams::new(omega)?)?, None)),
            Method::SsfadSpectral => {
                let params = self.spectral_params(DualWindowSpec::new(wout, win)?);
                Ok((spectral_map(cube, &params)?, None))
            }
            Method::Ssfad => {
                let params = self.spectral_params(DualWindowSpec::new(wout, win)?);
                let out = ssfad(cube, &params, &SpatialParams::new(omega)?, self.strategy())?;
                Ok((out.fused, Some((out.weights.a, out.weights.b))))
            }
        }
    }
}

fn emit(out: &mut dyn Write, line: std::fmt::Arguments<'_>) -> Result<()> {
    out.write_fmt(line)
        .and_then(|_| out.write_all(b"\n"))
        .map_err(|e| Error::io("<stdout>", e))
}

fn cmd_detect(args: &DetectArgs, out: &mut dyn Write) -> Result<()> {
    let cube = load_cube(&args.cube)?;
    let omega = args.omega.unwrap_or(args.win);
    let (map, weights) = args.detector.run(&cube, args.wout, args.win, omega)?;
    save_map(&map, &args.out)?;
    if let Some(preview) = &args.preview {
        save_preview(&map, preview)?;
    }
    if let Some((a, b)) = weights {
        emit(out, format_args!("fusion weights: a={a:.6} b={b:.6}"))?;
    }
    emit(out, format_args!("wrote {}", args.out.display()))
}

fn cmd_eval(args: &EvalArgs, out: &mut dyn Write) -> Result<()> {
    let map = load_map(&args.map)?;
    let mask = load_mask(&args.mask, Some((map.height(), map.width())))?;
    let curve = roc_curve(&map, &mask)?;
    let stats = separability_stats(&map, &mask)?;
    if let Some(p) = &args.roc_out {
        write_roc_csv(&curve, p)?;
    }
    if let Some(p) = &args.stats_out {
        write_separability_csv(&stats, p)?;
    }
    emit(out, format_args!("AUC: {:.3}", 100.0 * auc(&curve)))?;
    emit(
        out,
        format_args!("separability interval: {}", stats.interval),
    )
}

fn scene_from_args(args: &SynthArgs) -> Result<SceneSpec> {
    if let Some(path) = &args.spec {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        return SceneSpec::from_kv_text(&text);
    }
    let seed = args.seed.ok_or_else(|| {
        Error::InvalidScene("--seed is required (there is no implicit seed)".into())
    })?;
    let spec = SceneSpec {
        seed,
        height: args.height,
        width: args.width,
        bands: args.bands,
        n_classes: args.classes,
        noise_sigma: args.noise_sigma,
        anomalies: args
            .anomaly
            .iter()
            .map(|a| parse_anomaly(a))
            .collect::<Result<_>>()?,
    };
    spec.validate()?;
    Ok(spec)
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn cmd_synth(args: &SynthArgs, out: &mut dyn Write) -> Result<()> {
    let spec = scene_from_args(args)?;
    let (cube, mask) = generate_scene(&spec)?;
    let header = with_suffix(&args.out_prefix, ".hdr");
    let mask_path = with_suffix(&args.out_prefix, "_mask.pgm");
    let scene_path = with_suffix(&args.out_prefix, ".scene");
    save_cube(&cube, &header)?;
    save_mask(&mask, &mask_path)?;
    std::fs::write(&scene_path, spec.to_kv_text()).map_err(|e| Error::io(&scene_path, e))?;
    emit(
        out,
        format_args!(
            "wrote {} and {} ({} anomaly pixels)",
            header.display(),
            mask_path.display(),
            mask.anomaly_count()
        ),
    )
}

/// One grid cell of a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub wout: usize,
    pub win: usize,
    pub auc: f64,
}

/// Window pairs from the two ranges that form a valid dual window.
pub fn valid_pairs(wouts: &[usize], wins: &[usize]) -> Vec<(usize, usize)> {
    wouts
        .iter()
        .flat_map(|&o| wins.iter().map(move |&i| (o, i)))
        .filter(|&(o, i)| DualWindowSpec::new(o, i).is_ok())
        .collect()
}

fn cmd_sweep(args: &SweepArgs, out: &mut dyn Write) -> Result<()> {
    let cube = load_cube(&args.cube)?;
    let mask = load_mask(&args.mask, Some((cube.height(), cube.width())))?;
    let pairs = valid_pairs(&parse_range(&args.wout)?, &parse_range(&args.win)?);
    if pairs.is_empty() {
        return Err(Error::InvalidParameter(
            "sweep ranges contain no valid (wout > win, both odd) pair".into(),
        ));
    }
    let mut rows = Vec::with_capacity(pairs.len());
    for (wout, win) in pairs {
        let (map, _) = args.detector.run(&cube, wout, win, win)?;
        rows.push(SweepRow {
            wout,
            win,
            auc: auc(&roc_curve(&map, &mask)?),
        });
    }
    let mut csv = String::from("wout,win,auc\n");
    for r in &rows {
        csv.push_str(&format!("{},{},{}\n", r.wout, r.win, r.auc));
    }
    std::fs::write(&args.out, csv).map_err(|e| Error::io(&args.out, e))?;

    let best = rows
        .iter()
        .fold(rows[0], |best, r| if r.auc > best.auc { *r } else { best });
    emit(
        out,
        format_args!(
            "best: wout={} win={} auc={:.3}",
            best.wout,
            best.win,
            100.0 * best.auc
        ),
    )
}

/// Runs a parsed command line, writing human-readable output to `out`.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::InvalidParameter(
                "--threads must be at least 1".into(),
            ));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    let mut buffer = Vec::new();
    let result = pool.install(|| {
        let sink: &mut dyn Write = &mut buffer;
        match &cli.command {
            Command::Detect(a) => cmd_detect(a, sink),
            Command::Eval(a) => cmd_eval(a, sink),
            Command::Synth(a) => cmd_synth(a, sink),
            Command::Sweep(a) => cmd_sweep(a, sink),
        }
    });
    out.write_all(&buffer)
        .map_err(|e| Error::io("<stdout>", e))?;
    result
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!(parse_range("5:9:2").unwrap(), vec![5, 7, 9]);
        assert_eq!(parse_range("3").unwrap(), vec![3]);
        assert_eq!(parse_range("3:4").unwrap(), vec![3, 4]);
        assert!(parse_range("3:9:0").is_err());
        assert!(parse_range("a:b").is_err());
        assert!(parse_range("9:3:2").unwrap().is_empty());
    }

    #[test]
    fn invalid_pairs_are_skipped() {
        let pairs = valid_pairs(&[5, 7], &[3, 5, 7]);
        assert_eq!(pairs, vec![(5, 3), (7, 3), (7, 5)]);
        assert!(valid_pairs(&[3], &[3, 5]).is_empty());
    }

    #[test]
    fn synth_requires_seed() {
        let cli = Cli::try_parse_from(["ssfad", "synth", "--out-prefix", "x"]).unwrap();
        let Command::Synth(args) = &cli.command else {
            unreachable!()
        };
        assert!(matches!(scene_from_args(args), Err(Error::InvalidScene(_))));
    }

    #[test]
    fn detect_defaults() {
        let cli =
            Cli::try_parse_from(["ssfad", "detect", "--cube", "c.hdr", "--out", "m.hdr"]).unwrap();
        let Command::Detect(args) = &cli.command else {
            unreachable!()
        };
        assert_eq!((args.wout, args.win, args.omega), (5, 3, None));
        assert_eq!(args.detector.method, Method::Ssfad);
        assert_eq!(args.detector.fusion, FusionArg::Adaptive);
        assert_eq!(
            args.detector
                .spectral_params(DualWindowSpec::new(5, 3).unwrap()),
            SpectralParams::default()
        );
    }
}
