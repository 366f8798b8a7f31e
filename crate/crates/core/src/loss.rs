//! The silhouette-coverage objective.
//!
//! Every point is projected into every view. A unary term pulls each
//! projection into the foreground and a structure-aware repulsion term pushes
//! in-foreground projections apart:
//!
//! ```text
//! l1_j = 1 - vG(p_j)
//! l2_j = w_j * sum_{j' != j} w_j' * exp(-d(p_j, p_j') / sigma + delta_j)
//! L    = 1/(I*J) * sum_i sum_j (l1_j + beta * l2_j)
//! ```
//!
//! `w` is the bilinear sample of the binary mask (indicator weight), `delta`
//! the multi-scale boundary bias and `d` the pixel distance divided by the
//! image width. All image-space gradients are chained through the projection
//! Jacobian into per-point 3D gradients.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::camera::{Camera, PointCloud};
use crate::silhouette::{bilinear, SilhouetteImage, SmoothSilhouette};
use crate::{Error, Result, Vec2, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnaryMode {
    /// `1 - vG(p)` on the smooth silhouette field.
    Smooth,
    /// `1 - v(p)` on the binary mask; flat away from the silhouette edge.
    Binary,
    /// No unary term.
    Off,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossConfig {
    /// Weight of the repulsion term.
    pub beta: f64,
    /// Repulsion decay length, in image widths.
    pub sigma: f64,
    /// Number of boundary-bias scales.
    pub scales: usize,
    pub unary_mode: UnaryMode,
    pub pairwise_enabled: bool,
    /// When off, every indicator weight is 1.
    pub indicator_enabled: bool,
    /// When off, every boundary bias is 1 (no reduction near the boundary).
    pub bias_enabled: bool,
    /// Stop gradients through indicator weights and boundary biases.
    pub detach_weights: bool,
    /// Ignore pairs farther apart than this (image widths).
    pub pair_cutoff: Option<f64>,
    /// Keep the `j' = j` term of the repulsion sum.
    pub include_self_pair: bool,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            beta: 3.0,
            sigma: 1.0,
            scales: 5,
            unary_mode: UnaryMode::Smooth,
            pairwise_enabled: true,
            indicator_enabled: true,
            bias_enabled: true,
            detach_weights: true,
            pair_cutoff: None,
            include_self_pair: false,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::invalid("beta must be a finite value >= 0"));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::invalid("sigma must be a finite value > 0"));
        }
        if self.scales < 1 {
            return Err(Error::invalid("boundary bias needs at least one scale"));
        }
        if let Some(c) = self.pair_cutoff {
            if !(c > 0.0) {
                return Err(Error::invalid("pair cutoff must be > 0"));
            }
        }
        Ok(())
    }
}

/// One view: binary mask, its smooth field and the camera.
#[derive(Debug, Clone)]
pub struct View {
    pub mask: SilhouetteImage,
    pub smooth: SmoothSilhouette,
    pub camera: Camera,
}

impl View {
    pub fn new(mask: SilhouetteImage, camera: Camera) -> Result<Self> {
        if mask.width() != camera.width() || mask.height() != camera.height() {
            return Err(Error::invalid(format!(
                "mask is {}x{} but camera expects {}x{}",
                mask.width(),
                mask.height(),
                camera.width(),
                camera.height()
            )));
        }
        let smooth = SmoothSilhouette::from_silhouette(&mask)?;
        Ok(Self {
            mask,
            smooth,
            camera,
        })
    }
}

/// Smooth silhouette loss at `p` and its image-space gradient.
#[inline]
pub fn unary_smooth(vg: &SmoothSilhouette, p: Vec2) -> (f64, Vec2) {
    let (v, g) = vg.sample(p);
    (1.0 - v, -g)
}

/// Binary pixel loss at `p`; zero gradient wherever the surrounding four
/// pixels agree.
#[inline]
pub fn unary_binary(v: &SilhouetteImage, p: Vec2) -> (f64, Vec2) {
    let (s, g) = v.sample(p);
    (1.0 - s, -g)
}

/// Degree to which `p` lies in the foreground: the bilinear mask sample.
#[inline]
pub fn indicator_weight(v: &SilhouetteImage, p: Vec2) -> f64 {
    v.sample(p).0
}

/// Multi-scale foreground score at `p`, averaged over `scales` scales.
pub fn boundary_bias(v: &SilhouetteImage, p: Vec2, scales: usize) -> f64 {
    boundary_bias_with_grad(v, p, scales).0
}

/// Boundary bias and its gradient.
///
/// At pixel node `k` and scale `r` the mask is read at the four corners of
/// the square spanning `k - (r-1) ..= k + r` on each axis and combined with
/// bilinear weights for the node's position inside that square. Scale 1 is
/// the plain mask value. The scale-averaged node values are then
/// interpolated bilinearly at `p`, so the bias is continuous and reduces to
/// the indicator weight when `scales == 1`.
pub fn boundary_bias_with_grad(v: &SilhouetteImage, p: Vec2, scales: usize) -> (f64, Vec2) {
    assert!(scales >= 1, "boundary bias needs at least one scale");
    let x0 = p.x.floor();
    let y0 = p.y.floor();
    let (xi, yi) = (x0 as i64, y0 as i64);
    let node = |kx: i64, ky: i64| -> f64 {
        let mut acc = 0.0;
        for r in 1..=scales as i64 {
            let t = (r - 1) as f64 / (2 * r - 1) as f64;
            let (lo_x, hi_x) = (kx - r + 1, kx + r);
            let (lo_y, hi_y) = (ky - r + 1, ky + r);
            acc += (1.0 - t) * (1.0 - t) * v.value_at(lo_x, lo_y)
                + t * (1.0 - t) * v.value_at(hi_x, lo_y)
                + (1.0 - t) * t * v.value_at(lo_x, hi_y)
                + t * t * v.value_at(hi_x, hi_y);
        }
        acc / scales as f64
    };
    bilinear(
        node(xi, yi),
        node(xi + 1, yi),
        node(xi, yi + 1),
        node(xi + 1, yi + 1),
        p.x - x0,
        p.y - y0,
    )
}

#[derive(Debug, Clone, Copy)]
struct Weights {
    omega: f64,
    omega_grad: Vec2,
    bias_exp: f64,
    bias_grad: Vec2,
}

fn point_weights(v: &SilhouetteImage, p: Vec2, cfg: &LossConfig) -> Weights {
    let (omega, omega_grad) = if cfg.indicator_enabled {
        v.sample(p)
    } else {
        (1.0, Vec2::zeros())
    };
    let (bias, bias_grad) = if cfg.bias_enabled {
        boundary_bias_with_grad(v, p, cfg.scales)
    } else {
        (1.0, Vec2::zeros())
    };
    Weights {
        omega,
        omega_grad,
        bias_exp: bias.exp(),
        bias_grad,
    }
}

/// Structure-aware repulsion for the projections of one view.
///
/// Returns the per-point losses `l2_j` and the gradient of `sum_j l2_j` with
/// respect to each projection. Gradients through the indicator weights and
/// boundary biases are included only when `cfg.detach_weights` is false.
pub fn pairwise(
    v: &SilhouetteImage,
    projections: &[Vec2],
    cfg: &LossConfig,
) -> (Vec<f64>, Vec<Vec2>) {
    let n = projections.len();
    let width = v.width() as f64;
    let weights: Vec<Weights> = projections
        .iter()
        .map(|&p| point_weights(v, p, cfg))
        .collect();

    // s[j] = sum w_j' k_jj', t[j] = sum w_j' e_j' k_jj' over j' != j.
    let mut s = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut grads = vec![Vec2::zeros(); n];

    let mut visit = |j: usize, k: usize| {
        let (wj, wk) = (&weights[j], &weights[k]);
        if wj.omega == 0.0 && wk.omega == 0.0 {
            return;
        }
        let delta = projections[j] - projections[k];
        let dist_px = delta.norm();
        let d = dist_px / width;
        if cfg.pair_cutoff.is_some_and(|c| d > c) {
            return;
        }
        let kern = (-d / cfg.sigma).exp();
        s[j] += wk.omega * kern;
        s[k] += wj.omega * kern;
        t[j] += wk.omega * wk.bias_exp * kern;
        t[k] += wj.omega * wj.bias_exp * kern;
        if dist_px > 0.0 {
            let coeff = wj.omega * wk.omega * (wj.bias_exp + wk.bias_exp) * kern
                / (cfg.sigma * width * dist_px);
            grads[j] -= delta * coeff;
            grads[k] += delta * coeff;
        }
    };

    match cfg.pair_cutoff {
        None => {
            for j in 0..n {
                for k in j + 1..n {
                    visit(j, k);
                }
            }
        }
        Some(cutoff) => {
            let cell = cutoff * width;
            let key = |p: Vec2| ((p.x / cell).floor() as i64, (p.y / cell).floor() as i64);
            let mut bins: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
            for (i, &p) in projections.iter().enumerate() {
                bins.entry(key(p)).or_default().push(i);
            }
            let mut near = Vec::new();
            for j in 0..n {
                let (cx, cy) = key(projections[j]);
                near.clear();
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        if let Some(ids) = bins.get(&(cx + dx, cy + dy)) {
                            near.extend(ids.iter().copied().filter(|&k| k > j));
                        }
                    }
                }
                near.sort_unstable();
                for &k in &near {
                    visit(j, k);
                }
            }
        }
    }

    let losses: Vec<f64> = (0..n)
        .map(|j| {
            let w = &weights[j];
            let self_term = if cfg.include_self_pair { w.omega } else { 0.0 };
            w.omega * w.bias_exp * (s[j] + self_term)
        })
        .collect();

    if !cfg.detach_weights {
        for j in 0..n {
            let w = &weights[j];
            let self_term = if cfg.include_self_pair {
                2.0 * w.omega * w.bias_exp
            } else {
                0.0
            };
            let d_omega = w.bias_exp * s[j] + t[j] + self_term;
            grads[j] += w.omega_grad * d_omega + w.bias_grad * losses[j];
        }
    }
    (losses, grads)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewLoss {
    pub view: usize,
    /// Mean unary loss over the view's valid projections.
    pub l1_mean: f64,
    /// Mean repulsion loss over the view's valid projections.
    pub l2_mean: f64,
    /// Projections at or behind the camera plane, skipped for this view.
    pub invalid: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    /// `unary_sum + beta * pairwise_sum`.
    pub total: f64,
    /// `1/(I*J) * sum l1`.
    pub unary_sum: f64,
    /// `1/(I*J) * sum l2`, before weighting by beta.
    pub pairwise_sum: f64,
    #[serde(skip)]
    pub per_point_grad: Vec<Vec3>,
    /// Mean over views of the share of points whose indicator weight is at
    /// least 0.5.
    pub in_foreground_fraction: f64,
    pub per_view: Vec<ViewLoss>,
}

struct ViewEval {
    l1: f64,
    l2: f64,
    valid: usize,
    fg: usize,
    grads: Vec<Vec3>,
}

fn evaluate_view(points: &[Vec3], view: &View, cfg: &LossConfig) -> ViewEval {
    let cam = &view.camera;
    let mut idx = Vec::with_capacity(points.len());
    let mut proj = Vec::with_capacity(points.len());
    for (j, n) in points.iter().enumerate() {
        let (p, valid) = cam.project(n);
        if valid {
            idx.push(j);
            proj.push(p);
        }
    }

    let mut image_grads = vec![Vec2::zeros(); proj.len()];
    let mut l1 = 0.0;
    let mut fg = 0;
    for (g, &p) in image_grads.iter_mut().zip(&proj) {
        let (loss, grad) = match cfg.unary_mode {
            UnaryMode::Smooth => unary_smooth(&view.smooth, p),
            UnaryMode::Binary => unary_binary(&view.mask, p),
            UnaryMode::Off => (0.0, Vec2::zeros()),
        };
        l1 += loss;
        *g = grad;
        if indicator_weight(&view.mask, p) >= 0.5 {
            fg += 1;
        }
    }

    let mut l2 = 0.0;
    if cfg.pairwise_enabled && !proj.is_empty() {
        let (losses, grads) = pairwise(&view.mask, &proj, cfg);
        l2 = losses.iter().sum();
        for (g, pg) in image_grads.iter_mut().zip(&grads) {
            *g += pg * cfg.beta;
        }
    }

    let mut grads = vec![Vec3::zeros(); points.len()];
    for (&j, &p_grad) in idx.iter().zip(&image_grads) {
        let jac = cam
            .project_jacobian(&points[j])
            .expect("projection validated above");
        grads[j] = jac.transpose() * p_grad;
    }
    ViewEval {
        l1,
        l2,
        valid: proj.len(),
        fg,
        grads,
    }
}

/// Evaluates the total objective and its gradient with respect to every point.
///
/// Views are evaluated in parallel; all reductions run in a fixed order so
/// the result does not depend on the thread count.
pub fn evaluate(cloud: &PointCloud, views: &[View], cfg: &LossConfig) -> Result<LossReport> {
    evaluate_points(cloud.points(), views, cfg)
}

pub(crate) fn evaluate_points(
    points: &[Vec3],
    views: &[View],
    cfg: &LossConfig,
) -> Result<LossReport> {
    if views.is_empty() {
        return Err(Error::EmptyViews);
    }
    if points.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let per: Vec<ViewEval> = views
        .par_iter()
        .map(|v| evaluate_view(points, v, cfg))
        .collect();

    let j = points.len();
    let norm = 1.0 / (views.len() * j) as f64;
    let mut unary = 0.0;
    let mut pair = 0.0;
    let mut fg_frac = 0.0;
    let mut grad = vec![Vec3::zeros(); j];
    let mut per_view = Vec::with_capacity(views.len());
    for (i, ve) in per.iter().enumerate() {
        unary += ve.l1;
        pair += ve.l2;
        fg_frac += ve.fg as f64 / j as f64;
        for (g, vg) in grad.iter_mut().zip(&ve.grads) {
            *g += vg;
        }
        let denom = ve.valid.max(1) as f64;
        per_view.push(ViewLoss {
            view: i,
            l1_mean: ve.l1 / denom,
            l2_mean: ve.l2 / denom,
            invalid: j - ve.valid,
        });
    }
    grad.iter_mut().for_each(|g| *g *= norm);
    let unary_sum = unary * norm;
    let pairwise_sum = pair * norm;
    Ok(LossReport {
        total: unary_sum + cfg.beta * pairwise_sum,
        unary_sum,
        pairwise_sum,
        per_point_grad: grad,
        in_foreground_fraction: fg_frac / views.len() as f64,
        per_view,
    })
}
