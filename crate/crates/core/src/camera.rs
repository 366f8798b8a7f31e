//! Perspective cameras stored as composed 3x4 projection matrices.

use nalgebra::{Matrix2x3, Matrix3, Matrix3x4, Rotation3};
use serde::{Deserialize, Serialize};

use crate::{Error, Result, Vec2, Vec3};

/// Projections with homogeneous depth at or below this are invalid.
pub const DEPTH_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct Camera {
    matrix: Matrix3x4<f64>,
    width: usize,
    height: usize,
}

impl Camera {
    pub fn new(matrix: Matrix3x4<f64>, width: usize, height: usize) -> Result<Self> {
        let linear: Matrix3<f64> = matrix.fixed_view::<3, 3>(0, 0).into_owned();
        let det = linear.determinant();
        if !det.is_finite() || det.abs() < 1e-12 {
            return Err(Error::invalid("camera matrix has a singular 3x3 block"));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("camera matrix has non-finite entries"));
        }
        if width < 2 || height < 2 {
            return Err(Error::invalid("camera image must be at least 2x2"));
        }
        Ok(Self {
            matrix,
            width,
            height,
        })
    }

    /// `K [R | t]` with square pixels, `R` given as an axis-angle vector.
    pub fn from_parts(
        focal: f64,
        principal: Vec2,
        axis_angle: Vec3,
        translation: Vec3,
        width: usize,
        height: usize,
    ) -> Result<Self> {
        let rotation = Rotation3::from_scaled_axis(axis_angle).into_inner();
        Self::from_rotation(focal, principal, rotation, translation, width, height)
    }

    fn from_rotation(
        focal: f64,
        principal: Vec2,
        rotation: Matrix3<f64>,
        translation: Vec3,
        width: usize,
        height: usize,
    ) -> Result<Self> {
        let k = intrinsics(focal, principal);
        let mut rt = Matrix3x4::zeros();
        rt.fixed_view_mut::<3, 3>(0, 0).copy_from(&rotation);
        rt.set_column(3, &translation);
        Self::new(k * rt, width, height)
    }

    /// Camera at `eye` looking at `target`. Image x runs along the camera's
    /// right vector and image y along its down vector, so `up` maps upward
    /// in the image.
    pub fn look_at(
        eye: Vec3,
        target: Vec3,
        up: Vec3,
        focal: f64,
        width: usize,
        height: usize,
    ) -> Result<Self> {
        let forward = (target - eye)
            .try_normalize(1e-12)
            .ok_or_else(|| Error::invalid("eye coincides with target"))?;
        let right = forward
            .cross(&up)
            .try_normalize(1e-12)
            .ok_or_else(|| Error::invalid("up vector is parallel to the view direction"))?;
        let down = forward.cross(&right);
        let rotation = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
        let translation = -(rotation * eye);
        let principal = Vec2::new((width - 1) as f64 / 2.0, (height - 1) as f64 / 2.0);
        Self::from_rotation(focal, principal, rotation, translation, width, height)
    }

    pub fn matrix(&self) -> &Matrix3x4<f64> {
        &self.matrix
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    fn homogeneous(&self, n: &Vec3) -> Vec3 {
        let m = &self.matrix;
        Vec3::new(
            m[(0, 0)] * n.x + m[(0, 1)] * n.y + m[(0, 2)] * n.z + m[(0, 3)],
            m[(1, 0)] * n.x + m[(1, 1)] * n.y + m[(1, 2)] * n.z + m[(1, 3)],
            m[(2, 0)] * n.x + m[(2, 1)] * n.y + m[(2, 2)] * n.z + m[(2, 3)],
        )
    }

    /// Pixel position of `n` and whether it lies in front of the camera.
    #[inline]
    pub fn project(&self, n: &Vec3) -> (Vec2, bool) {
        let h = self.homogeneous(n);
        (Vec2::new(h.x / h.z, h.y / h.z), h.z > DEPTH_EPS)
    }

    /// Derivative of [`Camera::project`] with respect to the 3D point.
    pub fn project_jacobian(&self, n: &Vec3) -> Result<Matrix2x3<f64>> {
        let h = self.homogeneous(n);
        if h.z <= DEPTH_EPS {
            return Err(Error::InvalidProjection { depth: h.z });
        }
        let m = &self.matrix;
        let inv = 1.0 / (h.z * h.z);
        Ok(Matrix2x3::from_fn(|r, c| {
            let hr = if r == 0 { h.x } else { h.y };
            (m[(r, c)] * h.z - hr * m[(2, c)]) * inv
        }))
    }

    /// Camera center and the (unnormalized) ray direction through pixel
    /// position `p`.
    pub fn ray(&self, p: Vec2) -> (Vec3, Vec3) {
        let linear: Matrix3<f64> = self.matrix.fixed_view::<3, 3>(0, 0).into_owned();
        let inv = linear
            .try_inverse()
            .expect("camera 3x3 block is non-singular by construction");
        let center = -(inv * self.matrix.column(3));
        let dir = inv * Vec3::new(p.x, p.y, 1.0);
        (center, dir)
    }
}

fn intrinsics(focal: f64, principal: Vec2) -> Matrix3<f64> {
    Matrix3::new(focal, 0.0, principal.x, 0.0, focal, principal.y, 0.0, 0.0, 1.0)
}

/// Camera rig file entry.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CameraRecord {
    pub matrix: Vec<f64>,
    pub width: usize,
    pub height: usize,
}

impl From<&Camera> for CameraRecord {
    fn from(cam: &Camera) -> Self {
        let m = cam.matrix();
        Self {
            matrix: (0..3).flat_map(|r| (0..4).map(move |c| m[(r, c)])).collect(),
            width: cam.width(),
            height: cam.height(),
        }
    }
}

impl TryFrom<CameraRecord> for Camera {
    type Error = Error;

    fn try_from(rec: CameraRecord) -> Result<Self> {
        if rec.matrix.len() != 12 {
            return Err(Error::Parse(format!(
                "camera matrix needs 12 numbers, got {}",
                rec.matrix.len()
            )));
        }
        Camera::new(Matrix3x4::from_row_slice(&rec.matrix), rec.width, rec.height)
    }
}

/// Ordered, non-empty set of finite 3D points.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Vec3>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyCloud);
        }
        if points.iter().any(|p| !p.iter().all(|v| v.is_finite())) {
            return Err(Error::invalid("point cloud has non-finite coordinates"));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn into_points(self) -> Vec<Vec3> {
        self.points
    }

    /// Flattened `x0 y0 z0 x1 ...` coordinates.
    pub fn to_flat(&self) -> Vec<f64> {
        self.points.iter().flat_map(|p| [p.x, p.y, p.z]).collect()
    }

    pub fn from_flat(flat: &[f64]) -> Result<Self> {
        if flat.len() % 3 != 0 {
            return Err(Error::invalid("flat coordinate count is not a multiple of 3"));
        }
        Self::new(flat.chunks_exact(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn canonical() -> Camera {
        Camera::new(Matrix3x4::identity(), 8, 8).unwrap()
    }

    #[test]
    fn canonical_projection() {
        let cam = canonical();
        assert_eq!(cam.project(&Vec3::new(0.0, 0.0, 2.0)), (Vec2::zeros(), true));
        assert_eq!(cam.project(&Vec3::new(2.0, 0.0, 2.0)), (Vec2::new(1.0, 0.0), true));
        assert!(!cam.project(&Vec3::new(0.0, 0.0, -1.0)).1);
        assert!(!cam.project(&Vec3::new(1.0, 1.0, 0.0)).1);
    }

    #[test]
    fn canonical_jacobian() {
        let cam = canonical();
        let j = cam.project_jacobian(&Vec3::new(0.0, 0.0, 1.0)).unwrap();
        assert_eq!(j, Matrix2x3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0));
        let j = cam.project_jacobian(&Vec3::new(0.0, 0.0, 2.0)).unwrap();
        assert_eq!(j, Matrix2x3::new(0.5, 0.0, 0.0, 0.0, 0.5, 0.0));
        assert!(matches!(
            cam.project_jacobian(&Vec3::new(0.0, 0.0, -1.0)),
            Err(Error::InvalidProjection { .. })
        ));
    }

    #[test]
    fn singular_matrix_rejected() {
        let mut m = Matrix3x4::identity();
        m[(2, 2)] = 0.0;
        assert!(Camera::new(m, 8, 8).is_err());
    }

    #[test]
    fn look_at_maps_target_to_principal_point() {
        let cam = Camera::look_at(
            Vec3::new(3.0, 1.0, 2.0),
            Vec3::zeros(),
            Vec3::z(),
            50.0,
            64,
            48,
        )
        .unwrap();
        let (p, valid) = cam.project(&Vec3::zeros());
        assert!(valid);
        assert!((p - Vec2::new(31.5, 23.5)).norm() < 1e-12);
        // World up goes toward smaller image y.
        let (above, _) = cam.project(&Vec3::new(0.0, 0.0, 0.2));
        assert!(above.y < p.y);
    }

    #[test]
    fn ray_passes_through_projected_point() {
        let cam = Camera::look_at(Vec3::new(0.5, -3.0, 1.0), Vec3::zeros(), Vec3::z(), 40.0, 32, 32)
            .unwrap();
        let n = Vec3::new(0.1, 0.2, -0.3);
        let (p, _) = cam.project(&n);
        let (c, d) = cam.ray(p);
        let t = (n - c).dot(&d) / d.norm_squared();
        assert!((c + d * t - n).norm() < 1e-12);
    }

    #[test]
    fn record_round_trip() {
        let cam = Camera::look_at(Vec3::new(0.0, -3.0, 0.0), Vec3::zeros(), Vec3::z(), 40.0, 32, 16)
            .unwrap();
        let rec = CameraRecord::from(&cam);
        let back = Camera::try_from(rec).unwrap();
        assert_eq!(back, cam);
        let bad = CameraRecord {
            matrix: vec![1.0; 11],
            width: 4,
            height: 4,
        };
        assert!(Camera::try_from(bad).is_err());
    }

    #[test]
    fn cloud_validation() {
        assert!(matches!(PointCloud::new(vec![]), Err(Error::EmptyCloud)));
        assert!(PointCloud::new(vec![Vec3::new(f64::NAN, 0.0, 0.0)]).is_err());
        let c = PointCloud::from_flat(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.to_flat(), vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    }
}
