//! Synthetic ground truth: parametric shapes and meshes, camera rigs on a
//! view sphere, silhouette rasterization by per-pixel ray tests and uniform
//! surface sampling.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, UnitSphere};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::camera::{Camera, PointCloud};
use crate::io::{read_obj, TriMesh};
use crate::silhouette::SilhouetteImage;
use crate::{Error, Result, Vec2, Vec3};

/// Largest coordinate magnitude a shape may reach.
pub const HALF_CUBE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Sphere { radius: f64 },
    Box { half_extents: Vec3 },
    /// Ring around the z axis.
    Torus { major: f64, minor: f64 },
    Mesh(TriMesh),
}

impl Shape {
    pub fn sphere(radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius <= HALF_CUBE) {
            return Err(Error::invalid(format!("sphere radius {radius} outside (0, 0.5]")));
        }
        Ok(Shape::Sphere { radius })
    }

    pub fn cuboid(half_extents: Vec3) -> Result<Self> {
        if half_extents.iter().any(|&h| !(h > 0.0 && h <= HALF_CUBE)) {
            return Err(Error::invalid("box half extents must lie in (0, 0.5]"));
        }
        Ok(Shape::Box { half_extents })
    }

    pub fn torus(major: f64, minor: f64) -> Result<Self> {
        if !(minor > 0.0 && minor < major && major + minor <= HALF_CUBE) {
            return Err(Error::invalid(
                "torus needs 0 < minor < major and major + minor <= 0.5",
            ));
        }
        Ok(Shape::Torus { major, minor })
    }

    /// Centers the mesh's bounding box at the origin and scales it so its
    /// largest half extent is 0.5.
    pub fn mesh(mut mesh: TriMesh) -> Result<Self> {
        if mesh.vertices.is_empty() || mesh.triangles.is_empty() {
            return Err(Error::invalid("mesh is empty"));
        }
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for v in &mesh.vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        let half = (hi - lo).max() / 2.0;
        if !(half > 0.0) {
            return Err(Error::invalid("mesh is degenerate"));
        }
        let center = (lo + hi) / 2.0;
        let s = HALF_CUBE / half;
        for v in &mut mesh.vertices {
            *v = (*v - center) * s;
        }
        let area: f64 = mesh
            .triangles
            .iter()
            .map(|t| triangle_area(&mesh.vertices, t))
            .sum();
        if !(area > 0.0) {
            return Err(Error::invalid("mesh has zero surface area"));
        }
        Ok(Shape::Mesh(mesh))
    }

    /// Whether the ray `origin + t * dir`, `t > 0`, touches the shape.
    pub fn ray_hits(&self, origin: &Vec3, dir: &Vec3) -> bool {
        match self {
            Shape::Sphere { radius } => ray_sphere(origin, dir, *radius).is_some(),
            Shape::Box { half_extents } => ray_box(origin, dir, half_extents),
            Shape::Torus { major, minor } => ray_torus(origin, dir, *major, *minor),
            Shape::Mesh(mesh) => mesh
                .triangles
                .iter()
                .any(|t| ray_triangle(origin, dir, &mesh.vertices, t)),
        }
    }

    /// Unsigned distance from `p` to the surface (exact for parametric
    /// shapes, brute force over triangles for meshes).
    pub fn surface_distance(&self, p: &Vec3) -> f64 {
        match self {
            Shape::Sphere { radius } => (p.norm() - radius).abs(),
            Shape::Box { half_extents } => {
                let q = p.abs() - half_extents;
                let outside = q.sup(&Vec3::zeros()).norm();
                let inside = q.max().min(0.0);
                (outside + inside).abs()
            }
            Shape::Torus { major, minor } => torus_sdf(p, *major, *minor).abs(),
            Shape::Mesh(mesh) => mesh
                .triangles
                .iter()
                .map(|t| point_triangle_distance(p, &mesh.vertices, t))
                .fold(f64::INFINITY, f64::min),
        }
    }
}

fn ray_sphere(o: &Vec3, d: &Vec3, r: f64) -> Option<(f64, f64)> {
    let a = d.norm_squared();
    let b = 2.0 * o.dot(d);
    let c = o.norm_squared() - r * r;
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let t0 = (-b - sq) / (2.0 * a);
    let t1 = (-b + sq) / (2.0 * a);
    (t1 > 0.0).then_some((t0.max(0.0), t1))
}

fn ray_box(o: &Vec3, d: &Vec3, h: &Vec3) -> bool {
    let mut t_near = 0.0f64;
    let mut t_far = f64::INFINITY;
    for a in 0..3 {
        if d[a] == 0.0 {
            if o[a].abs() > h[a] {
                return false;
            }
            continue;
        }
        let inv = 1.0 / d[a];
        let (mut t0, mut t1) = ((-h[a] - o[a]) * inv, (h[a] - o[a]) * inv);
        if t0 > t1 {
            std::mem::swap(&mut t0, &mut t1);
        }
        t_near = t_near.max(t0);
        t_far = t_far.min(t1);
        if t_near > t_far {
            return false;
        }
    }
    true
}

fn torus_sdf(p: &Vec3, major: f64, minor: f64) -> f64 {
    let ring = (p.x * p.x + p.y * p.y).sqrt() - major;
    (ring * ring + p.z * p.z).sqrt() - minor
}

/// Sphere tracing against the exact torus distance function, restricted to
/// the bounding sphere.
fn ray_torus(o: &Vec3, d: &Vec3, major: f64, minor: f64) -> bool {
    let Some((t0, t1)) = ray_sphere(o, d, major + minor + 1e-9) else {
        return false;
    };
    let len = d.norm();
    let dir = d / len;
    let (mut t, end) = (t0 * len, t1 * len);
    for _ in 0..2000 {
        let dist = torus_sdf(&(o + dir * t), major, minor);
        if dist < 1e-9 {
            return true;
        }
        t += dist;
        if t > end {
            return false;
        }
    }
    false
}

fn ray_triangle(o: &Vec3, d: &Vec3, verts: &[Vec3], tri: &[usize; 3]) -> bool {
    let (a, b, c) = (verts[tri[0]], verts[tri[1]], verts[tri[2]]);
    let e1 = b - a;
    let e2 = c - a;
    let pvec = d.cross(&e2);
    let det = e1.dot(&pvec);
    if det.abs() < 1e-14 {
        return false;
    }
    let inv = 1.0 / det;
    let tvec = o - a;
    let u = tvec.dot(&pvec) * inv;
    if !(0.0..=1.0).contains(&u) {
        return false;
    }
    let qvec = tvec.cross(&e1);
    let v = d.dot(&qvec) * inv;
    if v < 0.0 || u + v > 1.0 {
        return false;
    }
    e2.dot(&qvec) * inv > 0.0
}

fn triangle_area(verts: &[Vec3], t: &[usize; 3]) -> f64 {
    let (a, b, c) = (verts[t[0]], verts[t[1]], verts[t[2]]);
    (b - a).cross(&(c - a)).norm() / 2.0
}

fn point_segment_distance(p: &Vec3, a: &Vec3, b: &Vec3) -> f64 {
    let ab = b - a;
    let t = ((p - a).dot(&ab) / ab.norm_squared().max(f64::MIN_POSITIVE)).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

fn point_triangle_distance(p: &Vec3, verts: &[Vec3], t: &[usize; 3]) -> f64 {
    let (a, b, c) = (verts[t[0]], verts[t[1]], verts[t[2]]);
    let n = (b - a).cross(&(c - a));
    let nn = n.norm_squared();
    if nn > 0.0 {
        let dist = (p - a).dot(&n) / nn;
        let q = p - n * dist;
        let inside = [(a, b), (b, c), (c, a)]
            .iter()
            .all(|(u, v)| (v - u).cross(&(q - u)).dot(&n) >= 0.0);
        if inside {
            return (p - q).norm();
        }
    }
    point_segment_distance(p, &a, &b)
        .min(point_segment_distance(p, &b, &c))
        .min(point_segment_distance(p, &c, &a))
}

/// Area-uniform surface samples, deterministic for a given seed.
pub fn sample_surface(shape: &Shape, count: usize, seed: u64) -> Result<PointCloud> {
    if count == 0 {
        return Err(Error::invalid("sample count must be >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<Vec3> = match shape {
        Shape::Sphere { radius } => (0..count)
            .map(|_| {
                let [x, y, z]: [f64; 3] = UnitSphere.sample(&mut rng);
                Vec3::new(x, y, z) * *radius
            })
            .collect(),
        Shape::Box { half_extents: h } => {
            // Face pairs normal to x, y, z.
            let areas = [h.y * h.z, h.x * h.z, h.x * h.y];
            let pick = WeightedIndex::new(areas).expect("positive face areas");
            (0..count)
                .map(|_| {
                    let axis = pick.sample(&mut rng);
                    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                    let mut p = Vec3::zeros();
                    for a in 0..3 {
                        p[a] = if a == axis {
                            sign * h[a]
                        } else {
                            rng.random_range(-h[a]..=h[a])
                        };
                    }
                    p
                })
                .collect()
        }
        Shape::Torus { major, minor } => (0..count)
            .map(|_| {
                let u = rng.random_range(0.0..2.0 * PI);
                // Area element is proportional to major + minor * cos(v).
                let v = loop {
                    let v = rng.random_range(0.0..2.0 * PI);
                    let accept = (major + minor * v.cos()) / (major + minor);
                    if rng.random::<f64>() < accept {
                        break v;
                    }
                };
                let ring = major + minor * v.cos();
                Vec3::new(ring * u.cos(), ring * u.sin(), minor * v.sin())
            })
            .collect(),
        Shape::Mesh(mesh) => {
            let areas: Vec<f64> = mesh
                .triangles
                .iter()
                .map(|t| triangle_area(&mesh.vertices, t))
                .collect();
            let pick = WeightedIndex::new(&areas)
                .map_err(|e| Error::invalid(format!("mesh areas: {e}")))?;
            (0..count)
                .map(|_| {
                    let t = &mesh.triangles[pick.sample(&mut rng)];
                    let s = rng.random::<f64>().sqrt();
                    let r = rng.random::<f64>();
                    let (a, b, c) = (mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]);
                    a * (1.0 - s) + b * (s * (1.0 - r)) + c * (s * r)
                })
                .collect()
        }
    };
    PointCloud::new(points)
}

/// Marks every pixel whose center ray hits the shape.
pub fn rasterize_silhouette(shape: &Shape, cam: &Camera) -> Result<SilhouetteImage> {
    let (w, h) = (cam.width(), cam.height());
    let rows: Vec<Vec<u8>> = (0..h)
        .into_par_iter()
        .map(|y| {
            (0..w)
                .map(|x| {
                    let (origin, dir) = cam.ray(Vec2::new(x as f64, y as f64));
                    u8::from(shape.ray_hits(&origin, &dir))
                })
                .collect()
        })
        .collect();
    let cells: Vec<u8> = rows.concat();
    if cells.iter().all(|&c| c == 0) {
        return Err(Error::DegenerateView);
    }
    SilhouetteImage::new(w, h, cells)
}

/// Cameras on a view sphere around the origin.
#[derive(Debug, Clone)]
pub struct CameraRig {
    pub cameras: Vec<Camera>,
    pub azimuths_deg: Vec<f64>,
    pub elevation_deg: f64,
    pub distance: f64,
    pub focal: f64,
    pub resolution: usize,
}

/// `views` cameras at equally spaced azimuths, all at the same elevation and
/// distance, looking at the origin with +z up.
pub fn make_rig(
    views: usize,
    elevation_deg: f64,
    distance: f64,
    focal: f64,
    resolution: usize,
) -> Result<CameraRig> {
    if views == 0 {
        return Err(Error::invalid("rig needs at least one view"));
    }
    // Corners of the unit cube must stay in front of every camera.
    if !(distance > 3f64.sqrt() * HALF_CUBE) {
        return Err(Error::invalid("camera distance must exceed the unit cube's half diagonal"));
    }
    if !(elevation_deg.abs() < 90.0) {
        return Err(Error::invalid("elevation must lie strictly between -90 and 90 degrees"));
    }
    if !(focal > 0.0) || resolution < 2 {
        return Err(Error::invalid("focal must be > 0 and resolution >= 2"));
    }
    let elev = elevation_deg.to_radians();
    let azimuths_deg: Vec<f64> = (0..views).map(|i| 360.0 * i as f64 / views as f64).collect();
    let cameras = azimuths_deg
        .iter()
        .map(|az| {
            let a = az.to_radians();
            let eye = Vec3::new(elev.cos() * a.cos(), elev.cos() * a.sin(), elev.sin()) * distance;
            Camera::look_at(eye, Vec3::zeros(), Vec3::z(), focal, resolution, resolution)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CameraRig {
        cameras,
        azimuths_deg,
        elevation_deg,
        distance,
        focal,
        resolution,
    })
}

/// Shape entry of a scene file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShapeSpec {
    Sphere { radius: f64 },
    Box { half_extents: [f64; 3] },
    Torus { major: f64, minor: f64 },
    /// Path relative to the scene file.
    Mesh { obj: PathBuf },
}

impl ShapeSpec {
    pub fn build(&self, base_dir: &Path) -> Result<Shape> {
        match self {
            ShapeSpec::Sphere { radius } => Shape::sphere(*radius),
            ShapeSpec::Box { half_extents: h } => Shape::cuboid(Vec3::new(h[0], h[1], h[2])),
            ShapeSpec::Torus { major, minor } => Shape::torus(*major, *minor),
            ShapeSpec::Mesh { obj } => Shape::mesh(read_obj(base_dir.join(obj))?),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RigSpec {
    pub views: usize,
    #[serde(default = "default_elevation")]
    pub elevation: f64,
    #[serde(default = "default_distance")]
    pub distance: f64,
    /// Defaults to 1.5 x resolution.
    #[serde(default)]
    pub focal: Option<f64>,
}

fn default_elevation() -> f64 {
    30.0
}

fn default_distance() -> f64 {
    3.0
}

fn default_gt_points() -> usize {
    500
}

/// Scene description file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub shape: ShapeSpec,
    pub rig: RigSpec,
    pub resolution: usize,
    #[serde(default)]
    pub seed: u64,
    /// Number of ground-truth surface samples.
    #[serde(default = "default_gt_points")]
    pub gt_points: usize,
}

/// Rendered scene data.
#[derive(Debug, Clone)]
pub struct GeneratedScene {
    pub shape: Shape,
    pub rig: CameraRig,
    pub silhouettes: Vec<SilhouetteImage>,
    pub ground_truth: PointCloud,
}

impl Scene {
    pub fn focal(&self) -> f64 {
        self.rig.focal.unwrap_or(1.5 * self.resolution as f64)
    }

    pub fn rig_with_views(&self, views: usize) -> Result<CameraRig> {
        make_rig(views, self.rig.elevation, self.rig.distance, self.focal(), self.resolution)
    }

    /// Builds shape and rig, rasterizes every view and samples ground truth.
    /// Mesh paths resolve against `base_dir`.
    pub fn generate(&self, base_dir: &Path) -> Result<GeneratedScene> {
        let shape = self.shape.build(base_dir)?;
        let rig = self.rig_with_views(self.rig.views)?;
        let silhouettes = rig
            .cameras
            .iter()
            .map(|c| rasterize_silhouette(&shape, c))
            .collect::<Result<Vec<_>>>()?;
        let ground_truth = sample_surface(&shape, self.gt_points, self.seed)?;
        Ok(GeneratedScene {
            shape,
            rig,
            silhouettes,
            ground_truth,
        })
    }
}
