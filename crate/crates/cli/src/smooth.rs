use std::fs;
use std::path::PathBuf;

use anyhow::Context;
use drwr::io::{read_mask, write_smooth_pgm16, write_smooth_raw};
use drwr::silhouette::smooth;

use crate::manifest::RunManifest;
use crate::Globals;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Binary mask (PGM or PNG, foreground >= 128).
    pub mask: PathBuf,
}

pub fn run(g: &Globals, args: Args) -> anyhow::Result<()> {
    let mask = read_mask(&args.mask).with_context(|| format!("reading {}", args.mask.display()))?;
    let field = smooth(&mask)?;
    let out = g.out_or("smooth");
    if g.dry_run {
        println!(
            "{{\"mask\": {:?}, \"width\": {}, \"height\": {}, \"out\": {:?}}}",
            args.mask,
            mask.width(),
            mask.height(),
            out
        );
        return Ok(());
    }
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let mut manifest = RunManifest::new("smooth", &out, g.seed.unwrap_or(0));
    manifest.scene = Some(args.mask.clone());
    write_smooth_pgm16(out.join("smooth.pgm"), &field)?;
    write_smooth_raw(out.join("smooth.f32"), &field)?;
    manifest.finish();
    manifest.write(&out)?;
    Ok(())
}
