use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use drwr::io::read_ply;
use drwr::metrics::{chamfer, scale_unit_diagonal};
use drwr::{FitConfig, PointCloud, UnaryMode};
use rayon::prelude::*;
use serde::Serialize;

use crate::data::{self, load_views};
use crate::fit::execute;
use crate::manifest::RunManifest;
use crate::Globals;

/// Table rows in output order.
pub const ROWS: [&str; 9] = [
    "l1",
    "l2",
    "pixel+l2",
    "l1+no_w",
    "l1+no_delta",
    "full",
    "I2",
    "I3",
    "I4",
];

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Generated scene directory (from `gen`).
    pub data_dir: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
    #[arg(long, default_value_t = 3e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 500)]
    pub points: usize,
    /// Comma-separated subset of rows.
    #[arg(long, value_delimiter = ',')]
    pub rows: Option<Vec<String>>,
}

/// Loss settings and view count of one table row. `None` views means all
/// views of the data directory.
pub fn row_config(row: &str, base: &FitConfig) -> Option<(FitConfig, Option<usize>)> {
    let mut cfg = base.clone();
    let loss = &mut cfg.loss;
    let views = match row {
        "l1" => {
            loss.pairwise_enabled = false;
            None
        }
        "l2" => {
            loss.unary_mode = UnaryMode::Off;
            None
        }
        "pixel+l2" => {
            loss.unary_mode = UnaryMode::Binary;
            None
        }
        "l1+no_w" => {
            loss.indicator_enabled = false;
            None
        }
        "l1+no_delta" => {
            loss.bias_enabled = false;
            None
        }
        "full" => None,
        "I2" => Some(2),
        "I3" => Some(3),
        "I4" => Some(4),
        _ => return None,
    };
    Some((cfg, views))
}

#[derive(Debug, Clone, Serialize)]
pub struct RowResult {
    pub row: String,
    pub views: usize,
    pub cd_x100: Option<f64>,
    pub fg_fraction: Option<f64>,
    pub final_total: Option<f64>,
    pub status: String,
}

fn run_row(
    row: &str,
    base: &FitConfig,
    data_dir: &Path,
    gt: &PointCloud,
    points: usize,
    out: &Path,
) -> RowResult {
    let mut result = RowResult {
        row: row.into(),
        views: 0,
        cd_x100: None,
        fg_fraction: None,
        final_total: None,
        status: "ok".into(),
    };
    let attempt = || -> anyhow::Result<(usize, f64, f64, f64)> {
        let (cfg, views_count) = row_config(row, base).expect("rows validated up front");
        let views = load_views(data_dir, views_count)?;
        let dir = out.join(row);
        let mut manifest = RunManifest::new("fit", &dir, cfg.seed);
        manifest.data_dir = Some(data_dir.to_path_buf());
        manifest.points = Some(points);
        manifest.views = views_count;
        manifest.fit_config = Some(cfg.clone());
        let (fit, report) = execute(&views, points, &cfg, None, &dir, manifest, false)?;
        let cd = chamfer(&scale_unit_diagonal(&fit.cloud)?, &scale_unit_diagonal(gt)?)?;
        Ok((views.len(), cd * 100.0, report.in_foreground_fraction, report.total))
    };
    match attempt() {
        Ok((views, cd, fg, total)) => {
            result.views = views;
            result.cd_x100 = Some(cd);
            result.fg_fraction = Some(fg);
            result.final_total = Some(total);
        }
        Err(e) => result.status = format!("error: {e:#}").replace([',', '\n'], ";"),
    }
    result
}

pub fn to_csv(rows: &[RowResult]) -> String {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut csv = String::from("row,views,cd_x100,fg_fraction,final_total,status\n");
    for r in rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.row,
            r.views,
            opt(r.cd_x100),
            opt(r.fg_fraction),
            opt(r.final_total),
            r.status
        ));
    }
    csv
}

pub fn run(g: &Globals, args: Args) -> anyhow::Result<()> {
    let rows: Vec<String> = match &args.rows {
        Some(r) => r.iter().map(|s| s.trim().to_string()).collect(),
        None => ROWS.iter().map(|s| s.to_string()).collect(),
    };
    if let Some(bad) = rows.iter().find(|r| !ROWS.contains(&r.as_str())) {
        return Err(drwr::Error::Invalid(format!(
            "unknown row {bad:?}; expected one of {}",
            ROWS.join(", ")
        ))
        .into());
    }
    let base = FitConfig {
        steps: args.steps,
        learning_rate: args.lr,
        seed: g.seed.unwrap_or(0),
        ..FitConfig::default()
    };
    base.validate()?;
    let out = g.out_or("ablate");
    if g.dry_run {
        let plan: Vec<_> = rows
            .iter()
            .map(|r| {
                let (cfg, views) = row_config(r, &base).expect("validated");
                serde_json::json!({"row": r, "views": views, "fit_config": cfg})
            })
            .collect();
        println!("{}", serde_json::to_string_pretty(&plan)?);
        return Ok(());
    }
    let gt_path = args.data_dir.join(data::GROUND_TRUTH);
    let gt = read_ply(&gt_path).with_context(|| format!("reading {}", gt_path.display()))?;
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let mut manifest = RunManifest::new("ablate", &out, base.seed);
    manifest.data_dir = Some(args.data_dir.clone());
    manifest.points = Some(args.points);
    manifest.fit_config = Some(base.clone());

    let pool = rayon::ThreadPoolBuilder::new().num_threads(g.jobs).build()?;
    let results: Vec<RowResult> = pool.install(|| {
        rows.par_iter()
            .map(|r| run_row(r, &base, &args.data_dir, &gt, args.points, &out))
            .collect()
    });
    let csv = to_csv(&results);
    fs::write(out.join("ablation.csv"), &csv)?;
    manifest.finish();
    manifest.write(&out)?;
    print!("{csv}");
    Ok(())
}
