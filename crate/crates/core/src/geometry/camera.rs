use nalgebra::{Matrix3, Vector3};

use super::Homography;
use crate::error::{Error, Result};

/// Orthonormality tolerance of the rotation block.
pub const ROTATION_TOL: f64 = 1e-9;

/// Pinhole intrinsics plus world-to-camera extrinsics:
/// `p_cam = rotation · p_world + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PinholeCamera {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl PinholeCamera {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        if !(fx.is_finite() && fx > 0.0 && fy.is_finite() && fy > 0.0) {
            return Err(Error::Calibration(format!(
                "focal lengths must be positive, got fx={fx} fy={fy}"
            )));
        }
        if !(cx.is_finite() && cy.is_finite()) || translation.iter().any(|v| !v.is_finite()) {
            return Err(Error::Calibration("non-finite camera parameter".into()));
        }
        check_rotation(&rotation, ROTATION_TOL)?;
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            rotation,
            translation,
        })
    }

    /// Camera at `eye` looking at `target`, with `up` giving the world's
    /// vertical. Image x grows right, y grows down.
    pub fn look_at(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        eye: Vector3<f64>,
        target: Vector3<f64>,
        up: Vector3<f64>,
    ) -> Result<Self> {
        let forward = (target - eye).normalize();
        let right = forward.cross(&up);
        if right.norm() < 1e-9 {
            return Err(Error::Calibration("view direction parallel to up vector".into()));
        }
        let right = right.normalize();
        let down = forward.cross(&right);
        let rotation = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
        let translation = -(rotation * eye);
        Self::new(fx, fy, cx, cy, rotation, translation)
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation.transpose() * self.translation)
    }

    pub fn intrinsics(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    pub fn to_camera(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// Pixel coordinates and depth (camera z) of a world point; `None` when
    /// the point is not in front of the camera.
    pub fn project(&self, p: &Vector3<f64>) -> Option<((f64, f64), f64)> {
        let c = self.to_camera(p);
        if c.z <= 0.0 {
            return None;
        }
        Some(((self.fx * c.x / c.z + self.cx, self.fy * c.y / c.z + self.cy), c.z))
    }

    /// World-frame direction of the ray through a pixel (not normalized).
    pub fn ray_direction(&self, x: f64, y: f64) -> Vector3<f64> {
        let d = Vector3::new((x - self.cx) / self.fx, (y - self.cy) / self.fy, 1.0);
        self.rotation.transpose() * d
    }

    pub fn backproject(&self, x: f64, y: f64, depth: f64) -> Result<Vector3<f64>> {
        if !(depth.is_finite() && depth > 0.0) {
            return Err(Error::InvalidDepth(depth));
        }
        let p = Vector3::new((x - self.cx) / self.fx * depth, (y - self.cy) / self.fy * depth, depth);
        Ok(self.rotation.transpose() * (p - self.translation))
    }

    /// Homography from image pixels to the world plane `Z = 0`.
    pub fn ground_homography(&self) -> Result<Homography> {
        let r = &self.rotation;
        let to_image =
            self.intrinsics() * Matrix3::from_columns(&[r.column(0).into(), r.column(1).into(), self.translation]);
        let inv = to_image
            .try_inverse()
            .ok_or_else(|| Error::Degenerate("camera centre lies on the ground plane".into()))?;
        Homography::new(inv)
    }

    /// Same camera expressed in a world frame related by `p' = m · p`.
    pub fn reframed(&self, m: &Matrix3<f64>) -> Result<Self> {
        // p_cam = R p + t = R mᵀ p' + t
        Self::new(
            self.fx,
            self.fy,
            self.cx,
            self.cy,
            self.rotation * m.transpose(),
            self.translation,
        )
    }
}

pub(crate) fn check_rotation(r: &Matrix3<f64>, tol: f64) -> Result<()> {
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::Calibration("rotation has non-finite entries".into()));
    }
    let err = (r.transpose() * r - Matrix3::identity()).amax();
    if err > tol {
        return Err(Error::Calibration(format!(
            "rotation is not orthonormal (max |RᵀR - I| = {err:e})"
        )));
    }
    let det = r.determinant();
    if (det - 1.0).abs() > tol {
        return Err(Error::Calibration(format!(
            "rotation determinant is {det}, expected +1"
        )));
    }
    Ok(())
}

/// Nearest rotation in the Frobenius sense.
pub(crate) fn orthonormalize(r: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = r.svd(true, true);
    let (u, v_t) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));
    let mut out = u * v_t;
    if out.determinant() < 0.0 {
        let mut u = u;
        u.column_mut(2).neg_mut();
        out = u * v_t;
    }
    out
}

pub fn backproject_depth(cam: &PinholeCamera, pixel: (f64, f64), depth: f64) -> Result<Vector3<f64>> {
    cam.backproject(pixel.0, pixel.1, depth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn identity_cam(f: f64, c: f64) -> PinholeCamera {
        PinholeCamera::new(f, f, c, c, Matrix3::identity(), Vector3::zeros()).unwrap()
    }

    #[test]
    fn principal_point_ray() {
        let cam = identity_cam(100.0, 50.0);
        let p = backproject_depth(&cam, (50.0, 50.0), 3.0).unwrap();
        assert_eq!(p, Vector3::new(0.0, 0.0, 3.0));
    }

    #[test]
    fn forty_five_degree_ray() {
        let cam = identity_cam(100.0, 50.0);
        let p = backproject_depth(&cam, (150.0, 50.0), 2.0).unwrap();
        assert!((p - Vector3::new(2.0, 0.0, 2.0)).norm() < 1e-12);
    }

    #[test]
    fn invalid_depth() {
        let cam = identity_cam(100.0, 50.0);
        assert!(matches!(cam.backproject(1.0, 1.0, 0.0), Err(Error::InvalidDepth(_))));
        assert!(cam.backproject(1.0, 1.0, -2.0).is_err());
    }

    #[test]
    fn rejects_bad_rotation() {
        let r = Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0);
        assert!(PinholeCamera::new(1.0, 1.0, 0.0, 0.0, r, Vector3::zeros()).is_err());
        let r = Matrix3::identity() * 1.001;
        assert!(PinholeCamera::new(1.0, 1.0, 0.0, 0.0, r, Vector3::zeros()).is_err());
        assert!(PinholeCamera::new(0.0, 1.0, 0.0, 0.0, Matrix3::identity(), Vector3::zeros()).is_err());
    }

    #[test]
    fn ground_homography_agrees_with_projection() {
        let cam = PinholeCamera::look_at(
            300.0,
            300.0,
            160.0,
            120.0,
            Vector3::new(-2.0, -3.0, 6.0),
            Vector3::new(8.0, 5.0, 0.0),
            Vector3::z(),
        )
        .unwrap();
        let h = cam.ground_homography().unwrap();
        let inv = h.inverse();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let g = Vector3::new(rng.random_range(4.0..12.0), rng.random_range(2.0..9.0), 0.0);
            let (px, _) = cam.project(&g).unwrap();
            let (hx, hy) = inv.apply(g.x, g.y).unwrap();
            assert!((px.0 - hx).abs() < 1e-9 && (px.1 - hy).abs() < 1e-9);
            let (wx, wy) = h.apply(px.0, px.1).unwrap();
            assert!((wx - g.x).abs() < 1e-9 && (wy - g.y).abs() < 1e-9);
        }
    }

    #[test]
    fn orthonormalize_recovers_rotation() {
        let r = nalgebra::Rotation3::from_euler_angles(0.3, -0.2, 1.1).into_inner();
        let noisy = r + Matrix3::repeat(1e-7);
        let fixed = orthonormalize(&noisy);
        assert!(check_rotation(&fixed, 1e-12).is_ok());
        assert!((fixed - r).amax() < 1e-6);
    }
}
