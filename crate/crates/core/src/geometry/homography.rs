use nalgebra::Matrix3;

use super::{GeometryError, HomogLine, Intrinsics, Pixel, PARALLEL_TOL};

/// Invertible plane projective transform, scaled so `m[(2,2)] = 1` when that
/// entry is nonzero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Homography {
    m: Matrix3<f64>,
    inv_t: Matrix3<f64>,
}

impl Homography {
    pub fn new(m: Matrix3<f64>) -> Result<Self, GeometryError> {
        let scale = m.norm();
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(GeometryError::NotInvertible);
        }
        let m = if m[(2, 2)].abs() > 1e-12 * scale { m / m[(2, 2)] } else { m / scale };
        let inv = m.try_inverse().ok_or(GeometryError::NotInvertible)?;
        let cond = m.norm() * inv.norm();
        if !cond.is_finite() || cond > 1e14 {
            return Err(GeometryError::NotInvertible);
        }
        Ok(Self { m, inv_t: inv.transpose() })
    }

    pub fn identity() -> Self {
        Self { m: Matrix3::identity(), inv_t: Matrix3::identity() }
    }

    pub fn translation(tx: f64, ty: f64) -> Self {
        Self::new(Matrix3::new(1.0, 0.0, tx, 0.0, 1.0, ty, 0.0, 0.0, 1.0)).unwrap()
    }

    /// `K R K⁻¹`: maps pixels of a camera to pixels of the same camera after
    /// its world-to-camera rotation is premultiplied by `r_rel`.
    pub fn from_rotation(k: &Intrinsics, r_rel: &Matrix3<f64>) -> Self {
        Self::new(k.matrix() * r_rel * k.inverse()).expect("rotation homographies are invertible")
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.m
    }

    pub fn inverse(&self) -> Self {
        Self::new(self.inv_t.transpose()).expect("inverse of an invertible homography")
    }
}

/// `p̃' = H p̃`, dehomogenized.
pub fn transfer_point(h: &Homography, p: Pixel) -> Result<Pixel, GeometryError> {
    let v = h.m * p.homogeneous().0;
    let scale = v.x.abs().max(v.y.abs()).max(1.0);
    if v.z.abs() <= PARALLEL_TOL * scale {
        return Err(GeometryError::PointAtInfinity);
    }
    Ok(Pixel::new(v.x / v.z, v.y / v.z))
}

/// `ℓ' = H⁻ᵀ ℓ`, renormalized.
pub fn transfer_line(h: &Homography, l: &HomogLine) -> Result<HomogLine, GeometryError> {
    HomogLine::from_vector(h.inv_t * l.coeffs())
}

/// Composition mapping frame `i` to frame `k` given `i → j` and `j → k`.
pub fn compose_homographies(h_ij: &Homography, h_jk: &Homography) -> Homography {
    Homography::new(h_jk.m * h_ij.m).expect("product of invertible homographies")
}
