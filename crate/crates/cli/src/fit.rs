use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::ValueEnum;
use drwr::fitter::{Checkpoint, Fit};
use drwr::io::{write_gradients, write_ply};
use drwr::{evaluate, FitConfig, FitTrace, Init, LossReport, UnaryMode, View};

use crate::data::load_views;
use crate::manifest::{self, RunManifest};
use crate::svg::loss_plot;
use crate::Globals;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Unary {
    Smooth,
    Binary,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Directory with silhouettes and cameras.
    #[arg(required_unless_present = "manifest")]
    pub data_dir: Option<PathBuf>,
    /// Rerun exactly the configuration recorded in an earlier fit manifest.
    #[arg(long, conflicts_with = "resume")]
    pub manifest: Option<PathBuf>,
    /// Continue from a checkpoint for `--steps` more steps.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Unary::Smooth)]
    pub unary: Unary,
    #[arg(long, value_enum, default_value_t = Switch::On)]
    pub pairwise: Switch,
    /// Set every indicator weight to 1.
    #[arg(long)]
    pub no_indicator: bool,
    /// Set every boundary bias to 1.
    #[arg(long)]
    pub no_bias: bool,
    /// Let gradients flow through indicator weights and boundary biases.
    #[arg(long)]
    pub no_detach: bool,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub scales: Option<usize>,
    /// Ignore pairs farther apart than this many image widths.
    #[arg(long)]
    pub cutoff: Option<f64>,
    /// Use this many views.
    #[arg(long)]
    pub views: Option<usize>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long, default_value_t = 500)]
    pub points: usize,
    #[arg(long)]
    pub log_every: Option<usize>,
    /// Initialize from a Gaussian with this standard deviation.
    #[arg(long, conflicts_with = "init_file")]
    pub init_gaussian: Option<f64>,
    /// Initialize from a PLY or XYZ file.
    #[arg(long)]
    pub init_file: Option<PathBuf>,
    /// Also write the final per-point gradients as float32.
    #[arg(long)]
    pub export_grad: bool,
}

impl Args {
    fn config(&self, seed: u64) -> FitConfig {
        let mut cfg = FitConfig {
            seed,
            ..FitConfig::default()
        };
        let loss = &mut cfg.loss;
        loss.unary_mode = match self.unary {
            Unary::Smooth => UnaryMode::Smooth,
            Unary::Binary => UnaryMode::Binary,
            Unary::Off => UnaryMode::Off,
        };
        loss.pairwise_enabled = self.pairwise == Switch::On;
        loss.indicator_enabled = !self.no_indicator;
        loss.bias_enabled = !self.no_bias;
        loss.detach_weights = !self.no_detach;
        loss.pair_cutoff = self.cutoff;
        if let Some(b) = self.beta {
            loss.beta = b;
        }
        if let Some(s) = self.sigma {
            loss.sigma = s;
        }
        if let Some(r) = self.scales {
            loss.scales = r;
        }
        if let Some(s) = self.steps {
            cfg.steps = s;
        }
        if let Some(lr) = self.lr {
            cfg.learning_rate = lr;
        }
        if let Some(l) = self.log_every {
            cfg.log_every = l;
        }
        if let Some(sd) = self.init_gaussian {
            cfg.init = Init::Gaussian { stddev: sd };
        }
        if let Some(p) = &self.init_file {
            cfg.init = Init::FromFile { path: p.clone() };
        }
        cfg
    }
}

/// Writes a fit's artifacts into `out`.
pub fn write_outputs(out: &Path, fit: &Fit, report: &LossReport, grad: bool) -> anyhow::Result<()> {
    write_ply(out.join("fitted.ply"), &fit.cloud)?;
    write_trace(out, &fit.trace)?;
    fit.checkpoint.save(out.join("checkpoint.bin"))?;
    fs::write(out.join("report.json"), serde_json::to_string_pretty(report)?)?;
    if grad {
        let file = fs::File::create(out.join("grad.f32"))?;
        write_gradients(BufWriter::new(file), &report.per_point_grad)?;
    }
    Ok(())
}

pub fn write_trace(out: &Path, trace: &FitTrace) -> anyhow::Result<()> {
    fs::write(out.join("trace.csv"), trace.to_csv())?;
    fs::write(out.join("loss.svg"), loss_plot(trace))?;
    Ok(())
}

/// Runs a fit (or resume) and writes everything, including the manifest.
/// On a non-finite loss the partial trace is still written.
pub fn execute(
    views: &[View],
    points: usize,
    cfg: &FitConfig,
    resume_from: Option<&Checkpoint>,
    out: &Path,
    mut manifest: RunManifest,
    grad: bool,
) -> anyhow::Result<(Fit, LossReport)> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let result = match resume_from {
        Some(ck) => drwr::resume(views, ck, cfg.steps),
        None => drwr::fit(views, points, cfg),
    };
    let fit = match result {
        Ok(fit) => fit,
        Err(drwr::Error::NonFiniteLoss { step, trace }) => {
            write_trace(out, &trace)?;
            manifest.finish();
            manifest.write(out)?;
            return Err(drwr::Error::NonFiniteLoss { step, trace }.into());
        }
        Err(e) => return Err(e.into()),
    };
    let report = evaluate(&fit.cloud, views, &fit.checkpoint.config.loss)?;
    write_outputs(out, &fit, &report, grad)?;
    manifest.finish();
    manifest.write(out)?;
    Ok((fit, report))
}

pub fn run(g: &Globals, args: Args) -> anyhow::Result<()> {
    let out = g.out_or("fit");
    let (data_dir, points, views_count, cfg, checkpoint) = match &args.manifest {
        Some(path) => {
            let m = RunManifest::read(path)?;
            let cfg = m
                .fit_config
                .clone()
                .ok_or_else(|| drwr::Error::Invalid(format!("{} records no fit", path.display())))?;
            let dir = m
                .data_dir
                .clone()
                .ok_or_else(|| drwr::Error::Invalid(format!("{} has no data_dir", path.display())))?;
            let points = m.points.unwrap_or(args.points);
            (dir, points, m.views, cfg, None)
        }
        None => {
            let dir = args.data_dir.clone().expect("clap enforces data_dir");
            match &args.resume {
                Some(ck_path) => {
                    let ck = Checkpoint::load(ck_path)
                        .with_context(|| format!("reading {}", ck_path.display()))?;
                    let mut cfg = ck.config.clone();
                    cfg.steps = args.steps.unwrap_or(0);
                    (dir, ck.point_count(), args.views, cfg, Some(ck))
                }
                None => {
                    let cfg = args.config(g.seed.unwrap_or(0));
                    (dir, args.points, args.views, cfg, None)
                }
            }
        }
    };
    cfg.validate()?;
    if points == 0 {
        return Err(drwr::Error::EmptyCloud.into());
    }

    let mut manifest = RunManifest::new("fit", &out, cfg.seed);
    manifest.data_dir = Some(data_dir.clone());
    manifest.points = Some(points);
    manifest.views = views_count;
    manifest.fit_config = Some(cfg.clone());
    if g.dry_run {
        println!("{}", serde_json::to_string_pretty(&manifest)?);
        return Ok(());
    }
    let views = load_views(&data_dir, views_count)?;
    let (fit, report) = execute(
        &views,
        points,
        &cfg,
        checkpoint.as_ref(),
        &out,
        manifest,
        args.export_grad,
    )?;
    let last = fit.trace.records.last();
    println!(
        "fitted {} points over {} views: total {:.6}, fg_fraction {:.4}, wrote {}",
        fit.cloud.len(),
        views.len(),
        report.total,
        last.map_or(report.in_foreground_fraction, |r| r.fg_fraction),
        out.join(manifest::FILE_NAME).display()
    );
    Ok(())
}
