//! The `sle` command line.
//!
//! Every setting can come from a flag or from a `key = value` file given with
//! `--config`; flags win. The output directory is taken from `--out`, then
//! from the `SLE_OUT_DIR` environment variable, then from the file. Each run
//! writes `manifest.txt`, the fully resolved settings, which can be passed
//! back through `--config` to redo the run.

use std::ffi::OsString;
use std::fmt::Display;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::experiments::{cover_experiment, dimension_experiment, natural_measure_experiment};
use crate::fractal::LadicGrid;
use crate::geometry::Rect;
use crate::io::config::{parse_complex, parse_kappa, parse_list, parse_value, KeyValues, Manifest, OUT_DIR_ENV};
use crate::io::{emit_report, write_trace, Plot, ReportOptions, Scale, Series, Table, TraceMeta};
use crate::loewner::{hcap_mc, HcapOptions};
use crate::observables::{dimension, green_hit_prob_mc_multi, GreenOptions};
use crate::sampler::{sample_chordal, SamplerConfig};
use crate::Complex;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "sle", version, about = "Chordal SLE experiments")]
struct Cli {
    /// Settings file of `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true)]
    workers: Option<String>,
    /// Leave the generation time out of SVG files.
    #[arg(long, global = true)]
    no_timestamp: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample chordal traces and write one trace file per replica.
    Sample(SampleArgs),
    /// Compare hitting probabilities with the Green's function.
    GreenVerify(GreenArgs),
    /// Box-counting dimension of sampled traces.
    Dimension(DimensionArgs),
    /// Mean natural mass per square against the integrated Green's function.
    NaturalMeasure(NaturalArgs),
    /// Mean cover weights Y1, Y2 per threshold.
    Cover(CoverArgs),
    /// Half-plane capacity of a sampled hull against a·t.
    HcapCheck(HcapArgs),
}

#[derive(Args, Debug)]
struct Base {
    /// SLE parameter, a number or a fraction such as 8/3.
    #[arg(long)]
    kappa: Option<String>,
    /// Base time step.
    #[arg(long)]
    dt: Option<String>,
    #[arg(long)]
    t_max: Option<String>,
    /// Master seed.
    #[arg(long)]
    seed: Option<String>,
}

#[derive(Args, Debug)]
struct SampleArgs {
    #[command(flatten)]
    base: Base,
    #[arg(long)]
    replicas: Option<String>,
}

#[derive(Args, Debug)]
struct GreenArgs {
    #[command(flatten)]
    base: Base,
    /// Interior point, e.g. 0+1i.
    #[arg(long)]
    z: Option<String>,
    /// Comma-separated thresholds on the conformal radius.
    #[arg(long)]
    eps: Option<String>,
    /// Replicas.
    #[arg(long)]
    n: Option<String>,
}

#[derive(Args, Debug)]
struct DimensionArgs {
    #[command(flatten)]
    base: Base,
    /// Cell sides are l^-k.
    #[arg(long)]
    l: Option<String>,
    #[arg(long)]
    k_min: Option<String>,
    #[arg(long)]
    k_max: Option<String>,
    /// Counting window as x0,y0,x1,y1.
    #[arg(long)]
    window: Option<String>,
    #[arg(long)]
    replicas: Option<String>,
    /// Stop a replica once |tip| exceeds this.
    #[arg(long)]
    far: Option<String>,
}

#[derive(Args, Debug)]
struct NaturalArgs {
    #[command(flatten)]
    base: Base,
    #[arg(long)]
    l: Option<String>,
    #[arg(long)]
    m: Option<String>,
    #[arg(long)]
    replicas: Option<String>,
    #[arg(long)]
    far: Option<String>,
}

#[derive(Args, Debug)]
struct CoverArgs {
    #[command(flatten)]
    base: Base,
    #[arg(long)]
    l: Option<String>,
    /// Coarsest level.
    #[arg(long)]
    m: Option<String>,
    /// Finest level.
    #[arg(long = "M", id = "big_m")]
    big_m: Option<String>,
    #[arg(long)]
    eps: Option<String>,
    #[arg(long)]
    replicas: Option<String>,
    #[arg(long)]
    far: Option<String>,
}

#[derive(Args, Debug)]
struct HcapArgs {
    #[command(flatten)]
    base: Base,
    /// Capacity time of the hull.
    #[arg(long)]
    t: Option<String>,
    #[arg(long)]
    walkers: Option<String>,
    #[arg(long)]
    replica: Option<String>,
}

/// Merges flags with the settings file and records every resolved value.
struct Resolver {
    file: KeyValues,
    manifest: Manifest,
}

impl Resolver {
    fn value<T: Clone>(
        &mut self,
        key: &str,
        flag: &Option<String>,
        default: Option<T>,
        parse: impl Fn(&str) -> Result<T>,
        show: impl Fn(&T) -> String,
    ) -> Result<T> {
        let v = match flag {
            Some(s) => Some(parse(s).map_err(|e| Error::Config(format!("--{}: {e}", key.replace('_', "-"))))?),
            None => self.file.get_with(key, &parse)?,
        };
        let v = match v.or(default) {
            Some(v) => v,
            None => return Err(Error::Config(format!("missing required setting `{key}`"))),
        };
        self.manifest.set(key, show(&v));
        Ok(v)
    }

    fn num<T: Clone + Display + std::str::FromStr>(
        &mut self,
        key: &str,
        flag: &Option<String>,
        default: Option<T>,
    ) -> Result<T> {
        self.value(key, flag, default, parse_value::<T>, |v| v.to_string())
    }

    fn sampler(&mut self, base: &Base, dt: f64, t_max: f64) -> Result<SamplerConfig> {
        let kappa = self.value("kappa", &base.kappa, None, parse_kappa, |v| v.to_string())?;
        let dt = self.num("dt", &base.dt, Some(dt))?;
        let t_max = self.num("t_max", &base.t_max, Some(t_max))?;
        let seed = self.num("seed", &base.seed, Some(0u64))?;
        SamplerConfig::new(kappa, dt, t_max, seed)
    }

    fn list(&mut self, key: &str, flag: &Option<String>, default: &[f64]) -> Result<Vec<f64>> {
        self.value(
            key,
            flag,
            Some(default.to_vec()),
            |s| parse_list(s, parse_value::<f64>),
            |v| join(v),
        )
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

fn show_complex(z: &Complex) -> String {
    format!("{}{:+}i", z.re, z.im)
}

const BASE_KEYS: &[&str] = &["kappa", "dt", "t_max", "seed", "out", "workers", "no_timestamp"];

fn allowed_keys(cmd: &Command) -> Vec<&'static str> {
    let extra: &[&str] = match cmd {
        Command::Sample(_) => &["replicas"],
        Command::GreenVerify(_) => &["z", "eps", "n"],
        Command::Dimension(_) => &["l", "k_min", "k_max", "window", "replicas", "far"],
        Command::NaturalMeasure(_) => &["l", "m", "replicas", "far"],
        Command::Cover(_) => &["l", "m", "M", "eps", "replicas", "far"],
        Command::HcapCheck(_) => &["t", "walkers", "replica"],
    };
    BASE_KEYS.iter().chain(extra).copied().collect()
}

fn command_name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Sample(_) => "sample",
        Command::GreenVerify(_) => "green-verify",
        Command::Dimension(_) => "dimension",
        Command::NaturalMeasure(_) => "natural-measure",
        Command::Cover(_) => "cover",
        Command::HcapCheck(_) => "hcap-check",
    }
}

/// Exit code for an error: 2 for bad settings, 3 for failures while running.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Param { .. } | Error::Domain(_) => EXIT_CONFIG,
        _ => EXIT_RUNTIME,
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Messages go to stderr.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(out) => {
            eprintln!("wrote {}", out.display());
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn run(cli: Cli) -> Result<PathBuf> {
    let file = match &cli.config {
        Some(p) => KeyValues::load(p)?,
        None => KeyValues::default(),
    };
    file.check_keys(&allowed_keys(&cli.command))?;
    let env_out = std::env::var_os(OUT_DIR_ENV).map(PathBuf::from);
    let out = match (&cli.out, env_out) {
        (Some(p), _) => p.clone(),
        (None, Some(p)) => p,
        (None, None) => file.get::<PathBuf>("out")?.unwrap_or_else(|| PathBuf::from("sle-out")),
    };
    let mut r = Resolver {
        file,
        manifest: Manifest::default(),
    };
    let workers = r.num("workers", &cli.workers, Some(0usize))?;
    let no_timestamp = cli.no_timestamp || r.file.get::<bool>("no_timestamp")?.unwrap_or(false);
    r.manifest.set("no_timestamp", no_timestamp);
    let opts = ReportOptions { no_timestamp };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("--workers: {e}")))?;
    let name = command_name(&cli.command);
    pool.install(|| match &cli.command {
        Command::Sample(a) => sample(a, &mut r, &out),
        Command::GreenVerify(a) => green(a, &mut r, &out, &opts),
        Command::Dimension(a) => dimension_cmd(a, &mut r, &out, &opts),
        Command::NaturalMeasure(a) => natural(a, &mut r, &out, &opts),
        Command::Cover(a) => cover(a, &mut r, &out, &opts),
        Command::HcapCheck(a) => hcap(a, &mut r, &out, &opts),
    })?;
    let mut text = format!("# sle {name}\n");
    text.push_str(&r.manifest.render());
    text.push_str(&format!("out = {}\n", out.display()));
    std::fs::write(out.join("manifest.txt"), text)?;
    Ok(out)
}

fn sample(a: &SampleArgs, r: &mut Resolver, out: &Path) -> Result<()> {
    let cfg = r.sampler(&a.base, 1e-3, 1.0)?;
    let replicas = r.num("replicas", &a.replicas, Some(1u64))?;
    std::fs::create_dir_all(out)?;
    for k in 0..replicas {
        let c = cfg.with_replica(k);
        let (_, trace) = sample_chordal(&c)?;
        let meta = TraceMeta {
            dt: c.dt,
            t_max: c.t_max,
            seed: c.seed,
            replica: k,
        };
        write_trace(&out.join(format!("trace-{k:04}.txt")), &meta, &trace)?;
    }
    Ok(())
}

fn green(a: &GreenArgs, r: &mut Resolver, out: &Path, opts: &ReportOptions) -> Result<()> {
    let cfg = r.sampler(&a.base, 0.05, 400.0)?;
    let z = r.value("z", &a.z, Some(Complex::new(0.0, 1.0)), parse_complex, show_complex)?;
    let eps = r.list("eps", &a.eps, &[0.2, 0.1, 0.05])?;
    let n = r.num("n", &a.n, Some(20_000usize))?;
    let est = green_hit_prob_mc_multi(z, &eps, n, &cfg, &GreenOptions::default())?;
    let mut table = Table::new(
        "green",
        &[
            ("z_re", "real part of the interior point"),
            ("z_im", "imaginary part of the interior point"),
            ("epsilon", "threshold on the conformal radius"),
            ("n", "replicas"),
            ("hits", "replicas whose conformal radius fell to epsilon"),
            ("p_hat", "hits / n"),
            ("theory", "c* epsilon^(2-d) G(z)"),
            ("ratio", "p_hat / theory"),
            ("stderr", "standard error of p_hat (Wilson)"),
        ],
    );
    for e in &est {
        table.push(&[
            e.z.re,
            e.z.im,
            e.epsilon,
            e.n as f64,
            e.hits as f64,
            e.p_hat,
            e.theory,
            e.ratio,
            e.stderr,
        ]);
    }
    let plot = Plot {
        title: format!("hitting probability over Green prediction, kappa = {}", cfg.kappa),
        x_label: "epsilon".into(),
        y_label: "p_hat / theory".into(),
        x_scale: Scale::Log,
        y_scale: Scale::Linear,
        series: vec![Series {
            label: format!("z = {}", show_complex(&z)),
            points: est.iter().map(|e| (e.epsilon, e.ratio)).collect(),
            errors: Some(est.iter().map(|e| e.stderr / e.theory).collect()),
            scatter: false,
        }],
        reference: Some(1.0),
        note: None,
    };
    emit_report(out, &table, Some(&plot), opts)?;
    Ok(())
}

fn parse_window(s: &str) -> Result<Rect> {
    let v = parse_list(s, parse_value::<f64>)?;
    match v[..] {
        [x0, y0, x1, y1] if x0 < x1 && y0 < y1 => Ok(Rect::new(x0, y0, x1, y1)),
        _ => Err(Error::Config(format!(
            "window needs x0,y0,x1,y1 with x0 < x1 and y0 < y1, got `{s}`"
        ))),
    }
}

fn dimension_cmd(a: &DimensionArgs, r: &mut Resolver, out: &Path, opts: &ReportOptions) -> Result<()> {
    let cfg = r.sampler(&a.base, 0.01, 400.0)?;
    let l = r.num("l", &a.l, Some(2u64))?;
    let k_min = r.num("k_min", &a.k_min, Some(2u32))?;
    let k_max = r.num("k_max", &a.k_max, Some(8u32))?;
    let window = r.value(
        "window",
        &a.window,
        Some(Rect::new(-0.5, 0.5, 0.5, 1.5)),
        parse_window,
        |w| join(&[w.x0, w.y0, w.x1, w.y1]),
    )?;
    let replicas = r.num("replicas", &a.replicas, Some(16usize))?;
    let far = r.num("far", &a.far, Some(10.0))?;
    let fit = dimension_experiment(&cfg, l, k_min..=k_max, &window, replicas, far)?;
    let mut table = Table::new(
        "dimension",
        &[
            ("level", "grid level k"),
            ("side", "cell side l^-k"),
            ("count", "occupied cells summed over replicas"),
        ],
    );
    for (i, k) in (k_min..=k_max).enumerate() {
        table.push(&[k as f64, fit.scales[i], fit.counts[i] as f64]);
    }
    let fitted = |s: f64| (fit.intercept + fit.slope * (1.0 / s).ln()).exp();
    let plot = Plot {
        title: format!("box counts, kappa = {}", cfg.kappa),
        x_label: "1 / side".into(),
        y_label: "occupied cells".into(),
        x_scale: Scale::Log,
        y_scale: Scale::Log,
        series: vec![
            Series {
                label: "counts".into(),
                points: fit
                    .scales
                    .iter()
                    .zip(&fit.counts)
                    .map(|(s, c)| (1.0 / s, *c as f64))
                    .collect(),
                errors: None,
                scatter: true,
            },
            Series {
                label: "fit".into(),
                points: fit.scales.iter().map(|s| (1.0 / s, fitted(*s))).collect(),
                errors: None,
                scatter: false,
            },
        ],
        reference: None,
        note: Some(format!(
            "slope {:.4}, r2 {:.5}, expected {:.4}",
            fit.slope,
            fit.r2,
            dimension(cfg.kappa)
        )),
    };
    emit_report(out, &table, Some(&plot), opts)?;
    Ok(())
}

fn natural(a: &NaturalArgs, r: &mut Resolver, out: &Path, opts: &ReportOptions) -> Result<()> {
    let cfg = r.sampler(&a.base, 0.02, 400.0)?;
    let l = r.num("l", &a.l, Some(2u64))?;
    let m = r.num("m", &a.m, Some(1u32))?;
    let replicas = r.num("replicas", &a.replicas, Some(400usize))?;
    let far = r.num("far", &a.far, Some(20.0))?;
    let grid = LadicGrid::standard(l)?;
    let rows = natural_measure_experiment(&cfg, &grid, m, replicas, far)?;
    let mut table = Table::new(
        "natural_measure",
        &[
            ("level", "grid level"),
            ("n1", "column index of the square"),
            ("n2", "row index of the square"),
            ("mass", "mean natural mass in the square"),
            ("mass_stderr", "standard error of the mean mass"),
            ("green_integral", "integral of G over the square"),
            ("ratio", "mass / green_integral"),
            ("ratio_stderr", "standard error of the ratio"),
        ],
    );
    for s in &rows {
        table.push(&[
            s.square.level as f64,
            s.square.n1 as f64,
            s.square.n2 as f64,
            s.mass.mean,
            s.mass.stderr,
            s.green_integral,
            s.ratio,
            s.ratio_stderr,
        ]);
    }
    let mean = rows.iter().map(|s| s.ratio).sum::<f64>() / rows.len().max(1) as f64;
    let plot = Plot {
        title: format!("natural mass over Green integral, kappa = {}", cfg.kappa),
        x_label: "square".into(),
        y_label: "ratio".into(),
        x_scale: Scale::Linear,
        y_scale: Scale::Linear,
        series: vec![Series {
            label: "ratio per square".into(),
            points: rows.iter().enumerate().map(|(i, s)| (i as f64, s.ratio)).collect(),
            errors: Some(rows.iter().map(|s| s.ratio_stderr).collect()),
            scatter: true,
        }],
        reference: Some(mean),
        note: None,
    };
    emit_report(out, &table, Some(&plot), opts)?;
    Ok(())
}

fn cover(a: &CoverArgs, r: &mut Resolver, out: &Path, opts: &ReportOptions) -> Result<()> {
    let cfg = r.sampler(&a.base, 0.01, 200.0)?;
    let l = r.num("l", &a.l, Some(16u64))?;
    let m = r.num("m", &a.m, Some(1u32))?;
    let big_m = r.num("M", &a.big_m, Some(3u32))?;
    let eps = r.list("eps", &a.eps, &[0.5, 0.1, 0.02])?;
    let replicas = r.num("replicas", &a.replicas, Some(50usize))?;
    let far = r.num("far", &a.far, Some(40.0))?;
    let grid = LadicGrid::standard(l)?;
    let rows = cover_experiment(&cfg, &grid, m, big_m, &eps, replicas, far)?;
    let mut table = Table::new(
        "cover",
        &[
            ("epsilon", "big-square threshold parameter"),
            ("y1", "mean weight of the maximal big squares"),
            ("y1_stderr", "standard error of y1"),
            ("y2", "mean weight of the residual finest squares"),
            ("y2_stderr", "standard error of y2"),
            ("total", "mean of y1 + y2"),
            ("total_stderr", "standard error of the total"),
            ("big_squares", "mean number of big squares"),
            ("residual_squares", "mean number of residual squares"),
        ],
    );
    for s in &rows {
        table.push(&[
            s.epsilon,
            s.y1.mean,
            s.y1.stderr,
            s.y2.mean,
            s.y2.stderr,
            s.total.mean,
            s.total.stderr,
            s.mean_big,
            s.mean_residual,
        ]);
    }
    let plot = Plot {
        title: format!("cover weight, kappa = {}, l = {l}, m = {m}, M = {big_m}", cfg.kappa),
        x_label: "epsilon".into(),
        y_label: "mean weight".into(),
        x_scale: Scale::Log,
        y_scale: Scale::Linear,
        series: vec![
            Series {
                label: "Y1 + Y2".into(),
                points: rows.iter().map(|s| (s.epsilon, s.total.mean)).collect(),
                errors: Some(rows.iter().map(|s| s.total.stderr).collect()),
                scatter: false,
            },
            Series {
                label: "Y1".into(),
                points: rows.iter().map(|s| (s.epsilon, s.y1.mean)).collect(),
                errors: None,
                scatter: false,
            },
            Series {
                label: "Y2".into(),
                points: rows.iter().map(|s| (s.epsilon, s.y2.mean)).collect(),
                errors: None,
                scatter: false,
            },
        ],
        reference: None,
        note: None,
    };
    emit_report(out, &table, Some(&plot), opts)?;
    Ok(())
}

fn hcap(a: &HcapArgs, r: &mut Resolver, out: &Path, opts: &ReportOptions) -> Result<()> {
    let cfg = r.sampler(&a.base, 0.01, 1.0)?;
    let t = r.num("t", &a.t, Some(cfg.t_max))?;
    let walkers = r.num("walkers", &a.walkers, Some(100_000usize))?;
    let replica = r.num("replica", &a.replica, Some(0u64))?;
    if t > cfg.t_max {
        return Err(Error::Config(format!("t = {t} exceeds t_max = {}", cfg.t_max)));
    }
    let (_, trace) = sample_chordal(&cfg.with_replica(replica))?;
    let est = hcap_mc(
        &trace,
        t,
        walkers,
        &HcapOptions {
            seed: cfg.seed,
            replica,
            ..Default::default()
        },
    )?;
    let expected = cfg.a() * t;
    let mut table = Table::new(
        "hcap",
        &[
            ("t", "capacity time of the hull"),
            ("expected", "a t"),
            ("estimate", "walker estimate of hcap"),
            ("stderr", "standard error of the estimate"),
            ("z_score", "(estimate - expected) / stderr"),
            ("walkers", "number of walkers"),
            ("y0", "start height of the walkers"),
        ],
    );
    table.push(&[
        t,
        expected,
        est.value,
        est.stderr,
        (est.value - expected) / est.stderr,
        walkers as f64,
        est.y0,
    ]);
    emit_report(out, &table, None, opts)?;
    Ok(())
}
