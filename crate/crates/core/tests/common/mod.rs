//! Independent reference implementations used as test oracles. Everything
//! here is written directly against plain arrays so it shares no code paths
//! with the library beyond the public data types.

#![allow(dead_code)]

use drwr::loss::UnaryMode;
use drwr::{Camera, LossConfig, SilhouetteImage, Vec3, View};
use rand::Rng;

/// Random union of discs and rectangles; never empty, never full.
pub fn random_mask<R: Rng>(rng: &mut R, w: usize, h: usize) -> SilhouetteImage {
    loop {
        let mut cells = vec![0u8; w * h];
        for _ in 0..rng.random_range(1..5) {
            let cx = rng.random_range(0.0..w as f64);
            let cy = rng.random_range(0.0..h as f64);
            let r = rng.random_range(1.0..(w.min(h) as f64 / 3.0).max(1.5));
            let disc = rng.random::<bool>();
            for y in 0..h {
                for x in 0..w {
                    let (dx, dy) = (x as f64 - cx, y as f64 - cy);
                    let inside = if disc {
                        dx * dx + dy * dy <= r * r
                    } else {
                        dx.abs() <= r && dy.abs() <= r * 0.6
                    };
                    if inside {
                        cells[y * w + x] = 1;
                    }
                }
            }
        }
        let fg = cells.iter().filter(|&&c| c == 1).count();
        if fg > 0 && fg < w * h {
            return SilhouetteImage::new(w, h, cells).unwrap();
        }
    }
}

fn cell(mask: &SilhouetteImage, x: i64, y: i64) -> f64 {
    if x < 0 || y < 0 || x >= mask.width() as i64 || y >= mask.height() as i64 {
        0.0
    } else {
        f64::from(u8::from(mask.is_foreground(x as usize, y as usize)))
    }
}

/// O(N^2) distance from every pixel to the nearest boundary pixel
/// (foreground pixel with a background 4-neighbor). Foreground maps to 0.
pub fn brute_edt(mask: &SilhouetteImage) -> Vec<f64> {
    let (w, h) = (mask.width() as i64, mask.height() as i64);
    let fg = |x: i64, y: i64| x >= 0 && y >= 0 && x < w && y < h && cell(mask, x, y) == 1.0;
    let mut boundary = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if fg(x, y) {
                let nb = [(x - 1, y), (x + 1, y), (x, y - 1), (x, y + 1)];
                if nb
                    .iter()
                    .any(|&(a, b)| a >= 0 && b >= 0 && a < w && b < h && !fg(a, b))
                {
                    boundary.push((x, y));
                }
            }
        }
    }
    let mut out = vec![0.0; (w * h) as usize];
    for y in 0..h {
        for x in 0..w {
            if fg(x, y) {
                continue;
            }
            let best = boundary
                .iter()
                .map(|&(bx, by)| ((bx - x).pow(2) + (by - y).pow(2)) as u64)
                .min()
                .unwrap();
            out[(y * w + x) as usize] = (best as f64).sqrt();
        }
    }
    out
}

/// Smooth field built from the brute-force distances.
pub fn ref_smooth(mask: &SilhouetteImage) -> Vec<f64> {
    let d = brute_edt(mask);
    let w = mask.width();
    let wf = w as f64;
    let bg: Vec<usize> = (0..d.len())
        .filter(|&i| !mask.is_foreground(i % w, i / w))
        .collect();
    let vals: Vec<f64> = bg.iter().map(|&i| 1.0 - d[i] / wf).collect();
    let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out = vec![1.0; d.len()];
    for (&i, &v) in bg.iter().zip(&vals) {
        out[i] = if hi > lo { (v - lo) / (hi - lo) } else { 0.0 };
    }
    out
}

pub fn brute_nn_sq(p: &Vec3, cloud: &[Vec3]) -> f64 {
    cloud
        .iter()
        .map(|q| {
            let (dx, dy, dz) = (p.x - q.x, p.y - q.y, p.z - q.z);
            dx * dx + dy * dy + dz * dz
        })
        .fold(f64::INFINITY, f64::min)
}

pub fn brute_chamfer(a: &[Vec3], b: &[Vec3]) -> f64 {
    let ab: f64 = a.iter().map(|p| brute_nn_sq(p, b)).sum::<f64>() / a.len() as f64;
    let ba: f64 = b.iter().map(|p| brute_nn_sq(p, a)).sum::<f64>() / b.len() as f64;
    ab + ba
}

fn lerp2(v00: f64, v10: f64, v01: f64, v11: f64, fx: f64, fy: f64) -> f64 {
    let top = v00 + (v10 - v00) * fx;
    let bottom = v01 + (v11 - v01) * fx;
    top + (bottom - top) * fy
}

/// Zero-padded bilinear mask sample.
pub fn ref_mask_sample(mask: &SilhouetteImage, x: f64, y: f64) -> f64 {
    let (x0, y0) = (x.floor(), y.floor());
    let (xi, yi) = (x0 as i64, y0 as i64);
    lerp2(
        cell(mask, xi, yi),
        cell(mask, xi + 1, yi),
        cell(mask, xi, yi + 1),
        cell(mask, xi + 1, yi + 1),
        x - x0,
        y - y0,
    )
}

/// Smooth-field sample with the linear off-image extension.
pub fn ref_smooth_sample(field: &[f64], w: usize, h: usize, x: f64, y: f64) -> f64 {
    let cx = x.clamp(0.0, (w - 1) as f64);
    let cy = y.clamp(0.0, (h - 1) as f64);
    let x0 = (cx.floor() as usize).min(w - 2);
    let y0 = (cy.floor() as usize).min(h - 2);
    let at = |i: usize, j: usize| field[j * w + i];
    let v = lerp2(
        at(x0, y0),
        at(x0 + 1, y0),
        at(x0, y0 + 1),
        at(x0 + 1, y0 + 1),
        cx - x0 as f64,
        cy - y0 as f64,
    );
    v - ((x - cx).powi(2) + (y - cy).powi(2)).sqrt() / w as f64
}

/// Boundary bias: at each integer node the mean over scales r of the
/// interpolation between mask samples at node-(r-1) and node+r with weight
/// t = (r-1)/(2r-1) toward the far side, then bilinear across nodes.
pub fn ref_bias(mask: &SilhouetteImage, x: f64, y: f64, scales: usize) -> f64 {
    let node = |kx: i64, ky: i64| {
        let mut sum = 0.0;
        for r in 1..=scales as i64 {
            let t = (r - 1) as f64 / (2 * r - 1) as f64;
            let a = cell(mask, kx - r + 1, ky - r + 1);
            let b = cell(mask, kx + r, ky - r + 1);
            let c = cell(mask, kx - r + 1, ky + r);
            let d = cell(mask, kx + r, ky + r);
            sum += lerp2(a, b, c, d, t, t);
        }
        sum / scales as f64
    };
    let (x0, y0) = (x.floor(), y.floor());
    let (xi, yi) = (x0 as i64, y0 as i64);
    lerp2(
        node(xi, yi),
        node(xi + 1, yi),
        node(xi, yi + 1),
        node(xi + 1, yi + 1),
        x - x0,
        y - y0,
    )
}

/// Pixel position and depth sign through the raw 3x4 matrix.
pub fn ref_project(cam: &Camera, n: &[f64; 3]) -> Option<(f64, f64)> {
    let m = cam.matrix();
    let row = |r: usize| m[(r, 0)] * n[0] + m[(r, 1)] * n[1] + m[(r, 2)] * n[2] + m[(r, 3)];
    let (u, v, z) = (row(0), row(1), row(2));
    (z > 1e-6).then(|| (u / z, v / z))
}

pub struct RefView {
    pub mask: SilhouetteImage,
    pub field: Vec<f64>,
    pub camera: Camera,
}

impl RefView {
    pub fn new(view: &View) -> Self {
        Self {
            mask: view.mask.clone(),
            field: ref_smooth(&view.mask),
            camera: view.camera.clone(),
        }
    }
}

/// Per view, per point indicator weight and boundary bias, used to freeze
/// the weights when checking the detached gradient.
pub type Frozen = Vec<Vec<(f64, f64)>>;

pub fn ref_weights(points: &[[f64; 3]], views: &[RefView], cfg: &LossConfig) -> Frozen {
    views
        .iter()
        .map(|v| {
            points
                .iter()
                .map(|n| match ref_project(&v.camera, n) {
                    Some((x, y)) => weights_at(v, x, y, cfg),
                    None => (0.0, 0.0),
                })
                .collect()
        })
        .collect()
}

fn weights_at(v: &RefView, x: f64, y: f64, cfg: &LossConfig) -> (f64, f64) {
    let omega = if cfg.indicator_enabled {
        ref_mask_sample(&v.mask, x, y)
    } else {
        1.0
    };
    let delta = if cfg.bias_enabled {
        ref_bias(&v.mask, x, y, cfg.scales)
    } else {
        1.0
    };
    (omega, delta)
}

/// Total objective computed from scratch. With `frozen`, indicator weights
/// and boundary biases are taken from it instead of the current positions.
pub fn ref_objective(
    points: &[[f64; 3]],
    views: &[RefView],
    cfg: &LossConfig,
    frozen: Option<&Frozen>,
) -> f64 {
    let mut total = 0.0;
    for (vi, v) in views.iter().enumerate() {
        let (w, h) = (v.mask.width(), v.mask.height());
        let proj: Vec<(usize, f64, f64)> = points
            .iter()
            .enumerate()
            .filter_map(|(j, n)| ref_project(&v.camera, n).map(|(x, y)| (j, x, y)))
            .collect();
        for &(_, x, y) in &proj {
            total += match cfg.unary_mode {
                UnaryMode::Smooth => 1.0 - ref_smooth_sample(&v.field, w, h, x, y),
                UnaryMode::Binary => 1.0 - ref_mask_sample(&v.mask, x, y),
                UnaryMode::Off => 0.0,
            };
        }
        if !cfg.pairwise_enabled {
            continue;
        }
        let weights: Vec<(f64, f64)> = proj
            .iter()
            .map(|&(j, x, y)| match frozen {
                Some(f) => f[vi][j],
                None => weights_at(v, x, y, cfg),
            })
            .collect();
        for (a, &(_, xa, ya)) in proj.iter().enumerate() {
            let mut sum = 0.0;
            for (b, &(_, xb, yb)) in proj.iter().enumerate() {
                if a == b && !cfg.include_self_pair {
                    continue;
                }
                let d = ((xa - xb).powi(2) + (ya - yb).powi(2)).sqrt() / w as f64;
                if cfg.pair_cutoff.is_some_and(|c| d > c) {
                    continue;
                }
                sum += weights[b].0 * (-d / cfg.sigma + weights[a].1).exp();
            }
            total += cfg.beta * weights[a].0 * sum;
        }
    }
    total / (views.len() * points.len()) as f64
}

/// Central finite-difference gradient of `f` with respect to every
/// coordinate of `points`.
pub fn fd_gradient(
    points: &[[f64; 3]],
    step: f64,
    f: impl Fn(&[[f64; 3]]) -> f64,
) -> Vec<[f64; 3]> {
    let mut work = points.to_vec();
    let mut out = vec![[0.0; 3]; points.len()];
    for j in 0..points.len() {
        for c in 0..3 {
            let orig = work[j][c];
            work[j][c] = orig + step;
            let plus = f(&work);
            work[j][c] = orig - step;
            let minus = f(&work);
            work[j][c] = orig;
            out[j][c] = (plus - minus) / (2.0 * step);
        }
    }
    out
}

/// Largest absolute component difference divided by the largest reference
/// component.
pub fn max_rel_error(analytic: &[Vec3], reference: &[[f64; 3]]) -> f64 {
    let scale = reference
        .iter()
        .flat_map(|g| g.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let diff = analytic
        .iter()
        .zip(reference)
        .flat_map(|(a, r)| (0..3).map(move |c| (a[c] - r[c]).abs()))
        .fold(0.0f64, f64::max);
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// Whether pixel position `(x, y)` keeps at least `margin` away from every
/// integer grid line and from the image frame, so nothing piecewise changes
/// within a finite-difference stencil.
pub fn clear_of_grid(x: f64, y: f64, w: usize, h: usize, margin: f64) -> bool {
    let off = |v: f64| (v - v.round()).abs() >= margin;
    let frame = |v: f64, n: usize| (v - 0.0).abs() >= margin && (v - (n - 1) as f64).abs() >= margin;
    off(x) && off(y) && frame(x, w) && frame(y, h)
}

/// Random gradient-check scene: 1 to 3 views with random masks of 16 to 64
/// pixels and up to 32 points whose projections keep clear of grid lines.
pub fn gradient_scene<R: Rng>(rng: &mut R) -> (Vec<View>, Vec<[f64; 3]>) {
    let res = rng.random_range(16..=64);
    let n_views = rng.random_range(1..=3);
    let views: Vec<View> = (0..n_views)
        .map(|_| {
            let az = rng.random_range(0.0..std::f64::consts::TAU);
            let el = rng.random_range(-0.8..0.8f64);
            let eye = Vec3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin()) * 3.0;
            let cam = Camera::look_at(eye, Vec3::zeros(), Vec3::z(), 1.5 * res as f64, res, res)
                .unwrap();
            View::new(random_mask(rng, res, res), cam).unwrap()
        })
        .collect();
    let count = rng.random_range(2..=32);
    let mut points = Vec::with_capacity(count);
    while points.len() < count {
        let n = [
            rng.random_range(-0.6..0.6),
            rng.random_range(-0.6..0.6),
            rng.random_range(-0.6..0.6),
        ];
        let clear = views.iter().all(|v| {
            ref_project(&v.camera, &n).is_some_and(|(x, y)| clear_of_grid(x, y, res, res, 5e-3))
        });
        if clear {
            points.push(n);
        }
    }
    (views, points)
}

/// Relative error between the analytic gradient of `evaluate` and central
/// differences of the reference objective. Detached configurations are
/// checked against the objective with weights frozen at the current points.
pub fn gradient_error(views: &[View], points: &[[f64; 3]], cfg: &LossConfig, step: f64) -> f64 {
    let cloud = drwr::PointCloud::new(
        points.iter().map(|n| Vec3::new(n[0], n[1], n[2])).collect(),
    )
    .unwrap();
    let report = drwr::evaluate(&cloud, views, cfg).unwrap();
    let refs: Vec<RefView> = views.iter().map(RefView::new).collect();
    let frozen = cfg.detach_weights.then(|| ref_weights(points, &refs, cfg));
    let fd = fd_gradient(points, step, |p| ref_objective(p, &refs, cfg, frozen.as_ref()));
    max_rel_error(&report.per_point_grad, &fd)
}
