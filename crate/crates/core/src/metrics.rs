//! Reconstruction metrics: Chamfer distance, voxel IoU and projection
//! coverage statistics.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::camera::PointCloud;
use crate::kdtree::KdTree;
use crate::loss::{indicator_weight, View};
use crate::{Error, Result, Vec2, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChamferMode {
    /// Mean squared nearest-neighbor distance in each direction, summed.
    #[default]
    Squared,
    /// Same with unsquared distances.
    Root,
}

/// Symmetric Chamfer distance with squared distances and per-cloud means.
pub fn chamfer(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    chamfer_with(a.points(), b.points(), ChamferMode::Squared)
}

pub fn chamfer_with(a: &[Vec3], b: &[Vec3], mode: ChamferMode) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyCloud);
    }
    Ok(directed(a, b, mode) + directed(b, a, mode))
}

fn directed(from: &[Vec3], to: &[Vec3], mode: ChamferMode) -> f64 {
    let tree = KdTree::new(to);
    let mut sum = 0.0;
    for p in from {
        let d = tree.nearest_squared(p).expect("target cloud is non-empty");
        sum += match mode {
            ChamferMode::Squared => d,
            ChamferMode::Root => d.sqrt(),
        };
    }
    sum / from.len() as f64
}

fn bounds(points: &[Vec3]) -> (Vec3, Vec3) {
    let mut lo = Vec3::repeat(f64::INFINITY);
    let mut hi = Vec3::repeat(f64::NEG_INFINITY);
    for p in points {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    (lo, hi)
}

/// Uniformly rescales the cloud about its bounding-box center so the box
/// diagonal is 1.
pub fn scale_unit_diagonal(cloud: &PointCloud) -> Result<PointCloud> {
    let (lo, hi) = bounds(cloud.points());
    let diag = (hi - lo).norm();
    if !(diag > 0.0) {
        return Err(Error::DegenerateBox);
    }
    let center = (lo + hi) * 0.5;
    let s = 1.0 / diag;
    PointCloud::new(
        cloud
            .points()
            .iter()
            .map(|p| center + (p - center) * s)
            .collect(),
    )
}

fn occupancy(points: &[Vec3], lo: &Vec3, scale: f64, grid: usize) -> HashSet<[usize; 3]> {
    let cell = |v: f64| (((v * scale) * grid as f64).floor().max(0.0) as usize).min(grid - 1);
    points
        .iter()
        .map(|p| {
            let q = p - lo;
            [cell(q.x), cell(q.y), cell(q.z)]
        })
        .collect()
}

/// Intersection over union of the `grid^3` occupancy of both clouds after a
/// shared mapping of their joint bounding box into the unit cube.
pub fn voxel_iou(a: &PointCloud, b: &PointCloud, grid: usize) -> Result<f64> {
    if grid < 2 {
        return Err(Error::invalid("voxel grid must be at least 2"));
    }
    let all: Vec<Vec3> = a.points().iter().chain(b.points()).copied().collect();
    let (lo, hi) = bounds(&all);
    let extent = (hi - lo).max();
    let scale = if extent > 0.0 { 1.0 / extent } else { 0.0 };
    let occ_a = occupancy(a.points(), &lo, scale, grid);
    let occ_b = occupancy(b.points(), &lo, scale, grid);
    let inter = occ_a.intersection(&occ_b).count();
    let union = occ_a.union(&occ_b).count();
    Ok(inter as f64 / union as f64)
}

/// Mean nearest-neighbor distance between in-foreground projections, in
/// image widths, averaged over views that hold at least two such points.
pub fn projection_uniformity(cloud: &PointCloud, views: &[View]) -> f64 {
    let mut total = 0.0;
    let mut counted = 0;
    for view in views {
        let pts: Vec<Vec2> = cloud
            .points()
            .iter()
            .filter_map(|n| {
                let (p, valid) = view.camera.project(n);
                (valid && indicator_weight(&view.mask, p) >= 0.5).then_some(p)
            })
            .collect();
        if pts.len() < 2 {
            continue;
        }
        let mut sum = 0.0;
        for (i, p) in pts.iter().enumerate() {
            let nn = pts
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != i)
                .map(|(_, q)| (p - q).norm())
                .fold(f64::INFINITY, f64::min);
            sum += nn;
        }
        total += sum / pts.len() as f64 / view.mask.width() as f64;
        counted += 1;
    }
    if counted == 0 {
        0.0
    } else {
        total / counted as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub chamfer_x100: f64,
    pub iou_x100: Option<f64>,
    /// Only available when views are supplied.
    pub fg_fraction: Option<f64>,
    pub uniformity: Option<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud(pts: &[[f64; 3]]) -> PointCloud {
        PointCloud::new(pts.iter().map(|p| Vec3::new(p[0], p[1], p[2])).collect()).unwrap()
    }

    #[test]
    fn chamfer_examples() {
        let a = cloud(&[[0.0, 0.0, 0.0]]);
        let b = cloud(&[[1.0, 0.0, 0.0]]);
        assert_eq!(chamfer(&a, &b).unwrap(), 2.0);
        assert_eq!(chamfer(&a, &a).unwrap(), 0.0);
        assert_eq!(
            chamfer_with(a.points(), b.points(), ChamferMode::Root).unwrap(),
            2.0
        );
        let c = cloud(&[[2.0, 0.0, 0.0]]);
        assert_eq!(chamfer_with(a.points(), c.points(), ChamferMode::Root).unwrap(), 4.0);
        assert_eq!(chamfer(&a, &c).unwrap(), 8.0);
        assert!(matches!(chamfer_with(&[], b.points(), ChamferMode::Squared), Err(Error::EmptyCloud)));
    }

    #[test]
    fn unit_diagonal() {
        let corners: Vec<[f64; 3]> = (0..8)
            .map(|i| [(i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64])
            .collect();
        let c = cloud(&corners);
        let s = scale_unit_diagonal(&c).unwrap();
        let k = 1.0 / 3f64.sqrt();
        for (p, q) in c.points().iter().zip(s.points()) {
            let expect = Vec3::repeat(0.5) + (p - Vec3::repeat(0.5)) * k;
            assert!((q - expect).norm() < 1e-15);
        }
        let again = scale_unit_diagonal(&s).unwrap();
        for (p, q) in s.points().iter().zip(again.points()) {
            assert!((p - q).norm() < 1e-12);
        }
        let same = cloud(&[[1.0, 2.0, 3.0], [1.0, 2.0, 3.0]]);
        assert!(matches!(scale_unit_diagonal(&same), Err(Error::DegenerateBox)));
    }

    #[test]
    fn iou_identical_and_disjoint() {
        let a = cloud(&[[0.1, 0.1, 0.1], [0.2, 0.9, 0.4]]);
        assert_eq!(voxel_iou(&a, &a, 32).unwrap(), 1.0);
        let lo = cloud(&[[0.0, 0.0, 0.0], [0.1, 0.1, 0.1]]);
        let hi = cloud(&[[0.9, 0.9, 0.9], [1.0, 1.0, 1.0]]);
        assert_eq!(voxel_iou(&lo, &hi, 2).unwrap(), 0.0);
        assert!(voxel_iou(&a, &a, 1).is_err());
    }

    #[test]
    fn iou_one_voxel_shift() {
        // Hand enumeration on the 2x2x2 grid: joint box x in [0.25, 1.25],
        // y/z in [0.25, 0.75], scale 1. `a` occupies (0,0,0), (1,0,0),
        // (0,1,1); the shifted copy occupies (1,0,0), (1,1,1).
        let a = cloud(&[[0.25, 0.25, 0.25], [0.75, 0.25, 0.25], [0.25, 0.75, 0.75]]);
        let b = cloud(&[[0.75, 0.25, 0.25], [1.25, 0.25, 0.25], [0.75, 0.75, 0.75]]);
        assert_eq!(voxel_iou(&a, &b, 2).unwrap(), 0.25);
    }
}
