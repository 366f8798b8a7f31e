use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use drwr::io::read_cloud;
use drwr::metrics::{
    chamfer_with, projection_uniformity, scale_unit_diagonal, voxel_iou, ChamferMode,
    MetricsReport,
};
use drwr::{evaluate, LossConfig, PointCloud};

use crate::data::load_views;
use crate::Globals;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Fitted cloud (PLY or XYZ).
    #[arg(required_unless_present = "batch")]
    pub fitted: Option<PathBuf>,
    /// Ground-truth cloud.
    #[arg(required_unless_present = "batch")]
    pub gt: Option<PathBuf>,
    /// Also report voxel IoU on a grid of this size.
    #[arg(long)]
    pub iou: Option<usize>,
    /// Use unsquared nearest-neighbor distances.
    #[arg(long)]
    pub root: bool,
    /// Compare the clouds as given instead of rescaling both to a unit
    /// bounding-box diagonal.
    #[arg(long)]
    pub no_scale: bool,
    /// Data directory whose views give foreground fraction and uniformity.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Evaluate every subdirectory holding fitted.ply and gt.ply and print
    /// one CSV row each.
    #[arg(long, conflicts_with_all = ["fitted", "gt"])]
    pub batch: Option<PathBuf>,
}

fn load(path: &Path) -> anyhow::Result<PointCloud> {
    read_cloud(path).with_context(|| format!("reading {}", path.display()))
}

pub fn metrics(
    fitted: &PointCloud,
    gt: &PointCloud,
    args: &Args,
) -> anyhow::Result<MetricsReport> {
    let mode = if args.root {
        ChamferMode::Root
    } else {
        ChamferMode::Squared
    };
    let (a, b) = if args.no_scale {
        (fitted.clone(), gt.clone())
    } else {
        (scale_unit_diagonal(fitted)?, scale_unit_diagonal(gt)?)
    };
    let chamfer_x100 = chamfer_with(a.points(), b.points(), mode)? * 100.0;
    let iou_x100 = match args.iou {
        Some(grid) => Some(voxel_iou(&a, &b, grid)? * 100.0),
        None => None,
    };
    let (fg_fraction, uniformity) = match &args.data {
        Some(dir) => {
            let views = load_views(dir, None)?;
            let report = evaluate(fitted, &views, &LossConfig::default())?;
            (
                Some(report.in_foreground_fraction),
                Some(projection_uniformity(fitted, &views)),
            )
        }
        None => (None, None),
    };
    Ok(MetricsReport {
        chamfer_x100,
        iou_x100,
        fg_fraction,
        uniformity,
    })
}

pub fn run(g: &Globals, args: Args) -> anyhow::Result<()> {
    if g.dry_run {
        println!(
            "{{\"fitted\": {:?}, \"gt\": {:?}, \"batch\": {:?}, \"iou\": {:?}, \"root\": {}, \"scale\": {}}}",
            args.fitted, args.gt, args.batch, args.iou, args.root, !args.no_scale
        );
        return Ok(());
    }
    if let Some(dir) = &args.batch {
        return batch(g, dir, &args);
    }
    let fitted = load(args.fitted.as_deref().expect("clap enforces fitted"))?;
    let gt = load(args.gt.as_deref().expect("clap enforces gt"))?;
    let report = metrics(&fitted, &gt, &args)?;
    let json = serde_json::to_string_pretty(&report)?;
    println!("{json}");
    if let Some(out) = &g.out {
        fs::create_dir_all(out)?;
        fs::write(out.join("metrics.json"), json)?;
    }
    Ok(())
}

fn batch(g: &Globals, dir: &Path, args: &Args) -> anyhow::Result<()> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("fitted.ply").exists() && p.join("gt.ply").exists())
        .collect();
    entries.sort();
    let mut csv = String::from("name,chamfer_x100,iou_x100\n");
    for entry in entries {
        let name = entry
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let report = metrics(
            &load(&entry.join("fitted.ply"))?,
            &load(&entry.join("gt.ply"))?,
            args,
        )?;
        let iou = report.iou_x100.map(|v| v.to_string()).unwrap_or_default();
        csv.push_str(&format!("{name},{},{iou}\n", report.chamfer_x100));
    }
    print!("{csv}");
    if let Some(out) = &g.out {
        fs::create_dir_all(out)?;
        fs::write(out.join("metrics.csv"), csv)?;
    }
    Ok(())
}
