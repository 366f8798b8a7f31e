use std::fs;
use std::path::PathBuf;

use anyhow::Context;
use drwr::io::{write_cameras, write_mask_pgm, write_ply};
use drwr::scenegen::ShapeSpec;

use crate::data::{self, read_scene};
use crate::manifest::RunManifest;
use crate::Globals;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Scene description (JSON).
    pub scene: PathBuf,
}

pub fn run(g: &Globals, args: Args) -> anyhow::Result<()> {
    let mut scene = read_scene(&args.scene)?;
    if let Some(seed) = g.seed {
        scene.seed = seed;
    }
    let base = args
        .scene
        .parent()
        .map(PathBuf::from)
        .unwrap_or_default();
    // The stored copy must resolve its mesh without the original location.
    if let ShapeSpec::Mesh { obj } = &mut scene.shape {
        let full = base.join(&*obj);
        *obj = fs::canonicalize(&full).with_context(|| format!("mesh {}", full.display()))?;
    }
    let out = g.out_or("data");
    if g.dry_run {
        println!("{}", serde_json::to_string_pretty(&scene)?);
        return Ok(());
    }
    let generated = scene.generate(&base)?;

    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let mut manifest = RunManifest::new("gen", &out, scene.seed);
    manifest.scene = Some(args.scene.clone());
    for (i, sil) in generated.silhouettes.iter().enumerate() {
        write_mask_pgm(out.join(data::view_name(i)), sil)?;
    }
    write_cameras(out.join(data::CAMERAS), &generated.rig.cameras)?;
    write_ply(out.join(data::GROUND_TRUTH), &generated.ground_truth)?;
    fs::write(out.join(data::SCENE), serde_json::to_string_pretty(&scene)?)?;
    manifest.finish();
    manifest.write(&out)?;
    println!(
        "wrote {} views and {} ground-truth points to {}",
        generated.silhouettes.len(),
        generated.ground_truth.len(),
        out.display()
    );
    Ok(())
}
