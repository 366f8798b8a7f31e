//! Data directory layout shared by the commands:
//! `view_%03d.pgm` (or `.png`), `cameras.json`, `gt.ply` and a copy of the
//! scene as `scene.json`.

use std::path::{Path, PathBuf};

use anyhow::Context;
use drwr::io::{read_cameras, read_mask};
use drwr::scenegen::{rasterize_silhouette, Scene};
use drwr::View;

pub const CAMERAS: &str = "cameras.json";
pub const GROUND_TRUTH: &str = "gt.ply";
pub const SCENE: &str = "scene.json";

pub fn view_name(i: usize) -> String {
    format!("view_{i:03}.pgm")
}

fn mask_path(dir: &Path, i: usize) -> PathBuf {
    let pgm = dir.join(view_name(i));
    if pgm.exists() {
        return pgm;
    }
    dir.join(format!("view_{i:03}.png"))
}

pub fn read_scene(path: &Path) -> anyhow::Result<Scene> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text)
        .map_err(|e| drwr::Error::Parse(format!("{}: {e}", path.display())).into())
}

/// Scene copy stored in the data directory, if any.
pub fn stored_scene(dir: &Path) -> anyhow::Result<Option<Scene>> {
    let path = dir.join(SCENE);
    if path.exists() {
        read_scene(&path).map(Some)
    } else {
        Ok(None)
    }
}

/// Loads the views of a data directory. With `count`, a stored scene is
/// re-rendered on an evenly spaced rig of that many cameras; without a
/// stored scene the first `count` views are used.
pub fn load_views(dir: &Path, count: Option<usize>) -> anyhow::Result<Vec<View>> {
    if let Some(k) = count {
        if k == 0 {
            return Err(drwr::Error::Invalid("--views must be at least 1".into()).into());
        }
        if let Some(scene) = stored_scene(dir)? {
            if k != scene.rig.views {
                return render_views(&scene, dir, k);
            }
        }
    }
    let cams_path = dir.join(CAMERAS);
    let cameras =
        read_cameras(&cams_path).with_context(|| format!("reading {}", cams_path.display()))?;
    let take = count.unwrap_or(cameras.len());
    if take > cameras.len() {
        return Err(drwr::Error::Invalid(format!(
            "asked for {take} views but {} has {}",
            dir.display(),
            cameras.len()
        ))
        .into());
    }
    cameras
        .into_iter()
        .take(take)
        .enumerate()
        .map(|(i, cam)| {
            let path = mask_path(dir, i);
            let mask = read_mask(&path).with_context(|| format!("reading {}", path.display()))?;
            Ok(View::new(mask, cam)?)
        })
        .collect()
}

fn render_views(scene: &Scene, base: &Path, count: usize) -> anyhow::Result<Vec<View>> {
    let shape = scene.shape.build(base)?;
    let rig = scene.rig_with_views(count)?;
    rig.cameras
        .iter()
        .map(|cam| Ok(View::new(rasterize_silhouette(&shape, cam)?, cam.clone())?))
        .collect()
}
