#[allow(unused_imports)] // inherent float methods need std
use num_traits::Float;
use nalgebra::{Matrix3, Vector3};

use super::{normalize_projective, GeometryError, HomogLine, Intrinsics, Pixel, Pose, PARALLEL_TOL};

/// Rank-2 fundamental matrix, unit Frobenius norm, largest entry positive.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FundamentalMatrix(Matrix3<f64>);

impl FundamentalMatrix {
    /// Normalizes `m` and enforces rank 2 by truncating the smallest
    /// singular value. A matrix that is already rank 2 is only normalized.
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self, GeometryError> {
        let m = normalize_projective(&m).ok_or(GeometryError::NotInvertible)?;
        let svd = m.svd(true, true);
        let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
        let mut s = svd.singular_values;
        let imin = s.imin();
        if s[imin] <= 1e-12 * s.max() {
            return Ok(Self(m));
        }
        s[imin] = 0.0;
        let m = u * Matrix3::from_diagonal(&s) * v_t;
        let m = normalize_projective(&m).ok_or(GeometryError::NotInvertible)?;
        Ok(Self(m))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    /// `F` for the swapped view pair.
    pub fn transpose(&self) -> Self {
        Self(normalize_projective(&self.0.transpose()).unwrap_or(self.0.transpose()))
    }

    /// Algebraic residual `x_bᵀ F x_a`.
    pub fn residual(&self, a: Pixel, b: Pixel) -> f64 {
        (b.homogeneous().0.transpose() * self.0 * a.homogeneous().0)[0]
    }
}

/// Epipolar line `F p̃` in the other view.
pub fn epipolar_line(f: &FundamentalMatrix, p: Pixel) -> Result<HomogLine, GeometryError> {
    let v = f.0 * p.homogeneous().0;
    let scale = p.x.abs().max(p.y.abs()).max(1.0);
    if v.x.hypot(v.y) <= PARALLEL_TOL * scale {
        return Err(GeometryError::DegenerateLine);
    }
    HomogLine::from_vector(v)
}

/// Intersection of two lines.
pub fn intersect_lines(l1: &HomogLine, l2: &HomogLine) -> Result<Pixel, GeometryError> {
    let v: Vector3<f64> = l1.coeffs().cross(&l2.coeffs());
    if v.z.abs() <= PARALLEL_TOL {
        return Err(GeometryError::ParallelLines);
    }
    Ok(Pixel::new(v.x / v.z, v.y / v.z))
}

/// `F` with a fixed sign, so that a match `(a, b)` of a point in front of
/// both cameras gives `(e × b̃)·(F ã) > 0`, `e` being the epipole in view b.
/// Reversing the sign means the point lies behind camera b and `b` is the
/// projection of its antipode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrientedFundamental {
    pub f: FundamentalMatrix,
    epipole: Vector3<f64>,
}

impl OrientedFundamental {
    /// Orients `f` by majority vote over `matches`, normally its inliers.
    /// `None` on a tied vote.
    pub fn orient(f: FundamentalMatrix, matches: &[(Pixel, Pixel)]) -> Option<Self> {
        let svd = f.0.transpose().svd(false, true);
        let e = svd.v_t?.row(svd.singular_values.imin()).transpose();
        let mut o = Self { f, epipole: e };
        let votes: i64 = matches.iter().map(|&(a, b)| sign(o.side(a, b))).sum();
        match votes {
            0 => None,
            v if v < 0 => {
                o.epipole = -e;
                Some(o)
            }
            _ => Some(o),
        }
    }

    pub fn epipole(&self) -> Vector3<f64> {
        self.epipole
    }

    /// Signed orientation of the match `(a, b)`; negative for a point
    /// behind camera b.
    pub fn side(&self, a: Pixel, b: Pixel) -> f64 {
        self.epipole.cross(&b.homogeneous().0).dot(&(self.f.0 * a.homogeneous().0))
    }
}

fn sign(x: f64) -> i64 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

fn skew(t: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -t.z, t.y, t.z, 0.0, -t.x, -t.y, t.x, 0.0)
}

/// Exact fundamental matrix between two calibrated cameras, with
/// `x₂ᵀ F x₁ = 0`.
pub fn fundamental_from_cameras(
    k1: &Intrinsics,
    pose1: &Pose,
    k2: &Intrinsics,
    pose2: &Pose,
) -> Result<FundamentalMatrix, GeometryError> {
    let baseline = pose1.center - pose2.center;
    if baseline.norm() <= 1e-9 {
        return Err(GeometryError::CoincidentCenters);
    }
    let r = pose2.rotation * pose1.rotation.transpose();
    let t = pose2.rotation * baseline;
    let e = skew(&t) * r;
    let f = k2.inverse().transpose() * e * k1.inverse();
    let f = normalize_projective(&f).ok_or(GeometryError::CoincidentCenters)?;
    Ok(FundamentalMatrix(f))
}
