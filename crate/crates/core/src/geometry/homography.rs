use nalgebra::{DMatrix, Matrix3, Vector3};

use crate::error::{Error, Result};

/// Denominators at or below this magnitude are treated as the horizon line.
pub const HORIZON_EPS: f64 = 1e-12;

/// Projective map from homogeneous image pixels `(x, y, 1)` to ground-plane
/// meters `(X, Y, w)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography {
    m: Matrix3<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomographyFit {
    pub homography: Homography,
    /// Root-mean-square reprojection error over the input pairs, in world
    /// units.
    pub rms: f64,
}

impl Homography {
    pub fn new(m: Matrix3<f64>) -> Result<Self> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::Degenerate("homography has non-finite entries".into()));
        }
        let m = if m[(2, 2)] != 0.0 { m / m[(2, 2)] } else { m };
        let det = m.determinant();
        if det.abs() <= 1e-12 {
            return Err(Error::Degenerate(format!("homography is singular (det = {det:e})")));
        }
        Ok(Self { m })
    }

    pub fn from_row_major(h: [f64; 9]) -> Result<Self> {
        Self::new(Matrix3::from_row_slice(&h))
    }

    pub fn identity() -> Self {
        Self { m: Matrix3::identity() }
    }

    pub fn translation(dx: f64, dy: f64) -> Self {
        Self {
            m: Matrix3::new(1.0, 0.0, dx, 0.0, 1.0, dy, 0.0, 0.0, 1.0),
        }
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.m
    }

    pub fn to_row_major(&self) -> [f64; 9] {
        let mut out = [0.0; 9];
        for r in 0..3 {
            for c in 0..3 {
                out[r * 3 + c] = self.m[(r, c)];
            }
        }
        out
    }

    /// `(X, Y, w)` before the perspective division.
    #[inline]
    pub fn apply_homogeneous(&self, x: f64, y: f64) -> (f64, f64, f64) {
        let p = self.m * Vector3::new(x, y, 1.0);
        (p.x, p.y, p.z)
    }

    pub fn apply(&self, x: f64, y: f64) -> Result<(f64, f64)> {
        let (px, py, w) = self.apply_homogeneous(x, y);
        if w.abs() <= HORIZON_EPS {
            return Err(Error::Horizon { x, y });
        }
        Ok((px / w, py / w))
    }

    pub fn inverse(&self) -> Homography {
        let inv = self.m.try_inverse().expect("constructor guarantees invertibility");
        Homography::new(inv).expect("inverse of an invertible matrix is invertible")
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Homography) -> Result<Homography> {
        Homography::new(self.m * other.m)
    }

    /// Largest absolute entry difference after scaling both to unit
    /// Frobenius norm with a common sign.
    pub fn max_normalized_difference(&self, other: &Homography) -> f64 {
        let a = normalize_sign(&self.m);
        let b = normalize_sign(&other.m);
        (a - b).amax()
    }
}

fn normalize_sign(m: &Matrix3<f64>) -> Matrix3<f64> {
    let n = m / m.norm();
    // fix the sign by the largest-magnitude entry
    let (idx, _) = n.iter().enumerate().fold(
        (0, 0.0f64),
        |best, (i, v)| if v.abs() > best.1 { (i, v.abs()) } else { best },
    );
    if n[idx] < 0.0 {
        -n
    } else {
        n
    }
}

pub fn apply_homography(h: &Homography, p: (f64, f64)) -> Result<(f64, f64)> {
    h.apply(p.0, p.1)
}

/// Translate to the centroid and scale so the RMS distance from it is √2.
fn normalizing_transform(points: impl Iterator<Item = (f64, f64)> + Clone) -> Result<Matrix3<f64>> {
    let n = points.clone().count() as f64;
    let (sx, sy) = points.clone().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let (cx, cy) = (sx / n, sy / n);
    let ms = points.map(|(x, y)| (x - cx).powi(2) + (y - cy).powi(2)).sum::<f64>() / n;
    if !(ms.is_finite() && ms > 0.0) {
        return Err(Error::Degenerate("all points coincide".into()));
    }
    let s = (2.0 / ms).sqrt();
    Ok(Matrix3::new(s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0))
}

/// An `(image, world)` point pair.
pub type Correspondence = ((f64, f64), (f64, f64));

/// Normalized direct linear transform over `(image, world)` pairs.
pub fn homography_from_points(pairs: &[Correspondence]) -> Result<HomographyFit> {
    if pairs.len() < 4 {
        return Err(Error::invalid(
            "pairs",
            format!("need at least 4 correspondences, got {}", pairs.len()),
        ));
    }
    if pairs
        .iter()
        .any(|(a, b)| !(a.0.is_finite() && a.1.is_finite() && b.0.is_finite() && b.1.is_finite()))
    {
        return Err(Error::invalid("pairs", "non-finite coordinate"));
    }
    let t_img = normalizing_transform(pairs.iter().map(|p| p.0))?;
    let t_world = normalizing_transform(pairs.iter().map(|p| p.1))?;

    let rows = (2 * pairs.len()).max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for (k, (img, world)) in pairs.iter().enumerate() {
        let p = t_img * Vector3::new(img.0, img.1, 1.0);
        let q = t_world * Vector3::new(world.0, world.1, 1.0);
        let (x, y) = (p.x / p.z, p.y / p.z);
        let (u, v) = (q.x / q.z, q.y / q.z);
        let r = 2 * k;
        let row0 = [-x, -y, -1.0, 0.0, 0.0, 0.0, u * x, u * y, u];
        let row1 = [0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v];
        for c in 0..9 {
            a[(r, c)] = row0[c];
            a[(r + 1, c)] = row1[c];
        }
    }

    let svd = a.svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::Degenerate("SVD did not converge".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let smax = svd.singular_values[order[order.len() - 1]];
    let second = svd.singular_values[order[1]];
    if second <= 1e-12 * smax.max(f64::MIN_POSITIVE) {
        return Err(Error::Degenerate(
            "correspondences do not determine a unique homography".into(),
        ));
    }
    let h = v_t.row(order[0]);
    let hn = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8]);
    let t_world_inv = t_world
        .try_inverse()
        .ok_or_else(|| Error::Degenerate("world normalization".into()))?;
    let homography = Homography::new(t_world_inv * hn * t_img)?;

    let mut sq = 0.0;
    for (img, world) in pairs {
        let (x, y) = homography.apply(img.0, img.1)?;
        sq += (x - world.0).powi(2) + (y - world.1).powi(2);
    }
    Ok(HomographyFit {
        homography,
        rms: (sq / pairs.len() as f64).sqrt(),
    })
}
