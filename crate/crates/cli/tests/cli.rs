use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn drwr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_drwr"))
        .env("DRWR_THREADS", "1")
        .args(args)
        .output()
        .expect("run drwr")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn scene_file(dir: &Path, views: usize) -> PathBuf {
    let path = dir.join(format!("scene_{views}.json"));
    fs::write(
        &path,
        format!(
            r#"{{"shape": {{"kind": "sphere", "radius": 0.4}}, "rig": {{"views": {views}}}, "resolution": 32, "gt_points": 200}}"#
        ),
    )
    .unwrap();
    path
}

fn generate(dir: &Path, name: &str) -> PathBuf {
    let data = dir.join(name);
    let o = drwr(&["--out", s(&data), "gen", s(&scene_file(dir, 4))]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    data
}

/// Foreground pixel count of a binary P5 file written by `gen`.
fn pgm_foreground(path: &Path) -> usize {
    let bytes = fs::read(path).unwrap();
    let mut fields = 0;
    let mut i = 0;
    while fields < 4 {
        while bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        while !bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        fields += 1;
    }
    bytes[i + 1..].iter().filter(|&&b| b > 0).count()
}

#[test]
fn gen_writes_views_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = generate(dir.path(), "a");
    let b = generate(dir.path(), "b");
    for i in 0..4 {
        let name = format!("view_{i:03}.pgm");
        assert!(pgm_foreground(&a.join(&name)) > 0, "{name} is empty");
        assert_eq!(fs::read(a.join(&name)).unwrap(), fs::read(b.join(&name)).unwrap());
    }
    for f in ["cameras.json", "gt.ply", "scene.json", "manifest.json"] {
        assert!(a.join(f).exists(), "missing {f}");
    }
    assert_eq!(fs::read(a.join("gt.ply")).unwrap(), fs::read(b.join("gt.ply")).unwrap());
}

#[test]
fn zero_views_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = drwr(&["--out", s(&dir.path().join("d")), "gen", s(&scene_file(dir.path(), 0))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!String::from_utf8_lossy(&o.stderr).is_empty());
}

#[test]
fn missing_input_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.ply");
    let o = drwr(&["eval", s(&missing), s(&missing)]);
    assert_eq!(o.status.code(), Some(2));
    let o = drwr(&["fit", s(&dir.path().join("no_data"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn eval_of_identical_clouds() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(dir.path(), "d");
    let gt = data.join("gt.ply");
    let out = dir.path().join("m");
    let o = drwr(&["--out", s(&out), "eval", s(&gt), s(&gt), "--iou", "32"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m: serde_json::Value = serde_json::from_slice(&fs::read(out.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(m["chamfer_x100"].as_f64(), Some(0.0));
    assert_eq!(m["iou_x100"].as_f64(), Some(100.0));
}

#[test]
fn fit_writes_outputs_and_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(dir.path(), "d");
    let run = dir.path().join("run");
    let o = drwr(&[
        "--out", s(&run), "fit", s(&data), "--points", "50", "--steps", "20", "--lr", "0.003",
        "--log-every", "5", "--export-grad",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["fitted.ply", "trace.csv", "loss.svg", "checkpoint.bin", "report.json", "grad.f32", "manifest.json"] {
        assert!(run.join(f).exists(), "missing {f}");
    }
    assert_eq!(fs::metadata(run.join("grad.f32")).unwrap().len(), 50 * 3 * 4);
    let trace = fs::read_to_string(run.join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 1 + 5);

    let more = dir.path().join("more");
    let ck = run.join("checkpoint.bin");
    let o = drwr(&["--out", s(&more), "fit", s(&data), "--resume", s(&ck), "--steps", "10"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(more.join("fitted.ply").exists());
}

#[test]
fn non_finite_loss_exits_with_numeric_status() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(dir.path(), "d");
    let run = dir.path().join("run");
    let o = drwr(&[
        "--out", s(&run), "fit", s(&data), "--points", "30", "--steps", "5", "--beta", "1e308",
        "--log-every", "1",
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(run.join("trace.csv").exists());
}

#[test]
fn dry_run_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(dir.path(), "d");
    let scene = scene_file(dir.path(), 4);
    let view = data.join("view_000.pgm");
    let targets = [
        ("g", vec!["gen", s(&scene)]),
        ("f", vec!["fit", s(&data), "--steps", "5"]),
        ("a", vec!["ablate", s(&data), "--steps", "5"]),
        ("s", vec!["smooth", s(&view)]),
    ];
    for (name, args) in targets {
        let out = dir.path().join(name);
        let mut full = vec!["--dry-run", "--out", s(&out)];
        full.extend(args);
        let o = drwr(&full);
        assert!(o.status.success(), "{name}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(!out.exists(), "{name} wrote {}", out.display());
    }
}

#[test]
fn smooth_writes_field() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(dir.path(), "d");
    let out = dir.path().join("sm");
    let o = drwr(&["--out", s(&out), "smooth", s(&data.join("view_000.pgm"))]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::metadata(out.join("smooth.f32")).unwrap().len(), 16 + 32 * 32 * 4);
    assert!(out.join("smooth.pgm").exists());
}

#[test]
fn ablate_subset_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(dir.path(), "d");
    let out = dir.path().join("ab");
    let o = drwr(&[
        "--out", s(&out), "--jobs", "2", "ablate", s(&data), "--rows", "l1,I2", "--steps", "10",
        "--points", "40",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("ablation.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "row,views,cd_x100,fg_fraction,final_total,status");
    assert!(lines[1].starts_with("l1,4,") && lines[1].ends_with(",ok"), "{}", lines[1]);
    assert!(lines[2].starts_with("I2,2,") && lines[2].ends_with(",ok"), "{}", lines[2]);
    assert!(out.join("l1/fitted.ply").exists());

    let o = drwr(&["ablate", s(&data), "--rows", "bogus"]);
    assert_eq!(o.status.code(), Some(2));
}
