//! Homogeneous 2D geometry, epipolar constructions, robust point transfer,
//! homography transfer and rotation commands.
//!
//! Conventions: pixels are `(x, y)` with `y` pointing down. A pose maps world
//! points into the camera frame as `R (X - C)`; the camera looks along `+z`.
//! Fundamental matrices `F` relate a pair of views as `x_bᵀ F x_a = 0`, so
//! `F x_a` is the epipolar line of `x_a` in view `b`.

mod epipolar;
mod estimate;
mod homography;
mod rotation;
mod transfer;

pub use epipolar::{epipolar_line, fundamental_from_cameras, intersect_lines, FundamentalMatrix, OrientedFundamental};
pub use estimate::{estimate_fundamental, symmetric_epipolar_distance, RansacConfig};
pub use homography::{compose_homographies, transfer_line, transfer_point, Homography};
pub use rotation::{rotation_from_command, rotation_to_center, rotation_to_ray, RotationCommand};
pub use transfer::{epipolar_point_transfer, intersection_spread, least_squares_intersection, TransferResult};

#[allow(unused_imports)] // inherent float methods need std
use num_traits::Float;
use nalgebra::{Matrix3, Vector3};

/// Numerical tolerances shared by the geometry operations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    /// Point-line incidence.
    pub incidence: f64,
    /// Third homogeneous coordinate below which two lines are parallel or a
    /// point is at infinity.
    pub parallel: f64,
    /// Pixel round trips (rotation commands, reprojection).
    pub round_trip: f64,
}

pub const INCIDENCE_TOL: f64 = 1e-9;
pub const PARALLEL_TOL: f64 = 1e-12;
pub const ROUND_TRIP_TOL: f64 = 1e-6;

impl Default for Tolerances {
    fn default() -> Self {
        Self { incidence: INCIDENCE_TOL, parallel: PARALLEL_TOL, round_trip: ROUND_TRIP_TOL }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
pub enum GeometryError {
    #[error("epipolar line is degenerate (point maps to the null space)")]
    DegenerateLine,
    #[error("lines are parallel")]
    ParallelLines,
    #[error("no consensus among candidates")]
    NoConsensus,
    #[error("point maps to infinity")]
    PointAtInfinity,
    #[error("camera centers coincide")]
    CoincidentCenters,
    #[error("need at least {needed} matches, got {got}")]
    InsufficientMatches { needed: usize, got: usize },
    #[error("matrix is not invertible")]
    NotInvertible,
    #[error("need at least two lines")]
    TooFewLines,
}

/// An image position in pixels. May lie outside the image bounds.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Pixel {
    pub x: f64,
    pub y: f64,
}

impl Pixel {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn homogeneous(self) -> HomogPoint {
        HomogPoint(Vector3::new(self.x, self.y, 1.0))
    }

    pub fn distance(self, other: Pixel) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Projective point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HomogPoint(pub Vector3<f64>);

impl HomogPoint {
    pub fn to_pixel(self) -> Result<Pixel, GeometryError> {
        let v = self.0;
        let scale = v.x.abs().max(v.y.abs()).max(1.0);
        if v.z.abs() <= PARALLEL_TOL * scale {
            return Err(GeometryError::PointAtInfinity);
        }
        Ok(Pixel::new(v.x / v.z, v.y / v.z))
    }
}

/// Projective line `a x + b y + c = 0`, stored with `a² + b² = 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HomogLine(Vector3<f64>);

impl HomogLine {
    /// Normalizes `(a, b, c)` so that `a² + b² = 1`. Fails for the line at
    /// infinity and the zero vector.
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self, GeometryError> {
        Self::from_vector(Vector3::new(a, b, c))
    }

    pub fn from_vector(v: Vector3<f64>) -> Result<Self, GeometryError> {
        let ab = v.x.hypot(v.y);
        let scale = v.norm();
        if !(ab > PARALLEL_TOL * scale.max(PARALLEL_TOL)) || !ab.is_finite() {
            return Err(GeometryError::DegenerateLine);
        }
        Ok(Self(v / ab))
    }

    /// Line through two points.
    pub fn through(p: Pixel, q: Pixel) -> Result<Self, GeometryError> {
        Self::from_vector(p.homogeneous().0.cross(&q.homogeneous().0))
    }

    pub fn a(&self) -> f64 {
        self.0.x
    }
    pub fn b(&self) -> f64 {
        self.0.y
    }
    pub fn c(&self) -> f64 {
        self.0.z
    }

    pub fn coeffs(&self) -> Vector3<f64> {
        self.0
    }

    /// Signed distance of `p` to the line in pixels.
    pub fn signed_distance(&self, p: Pixel) -> f64 {
        self.0.x * p.x + self.0.y * p.y + self.0.z
    }

    pub fn distance(&self, p: Pixel) -> f64 {
        self.signed_distance(p).abs()
    }

    /// Orthogonal projection of `p` onto the line.
    pub fn closest_point(&self, p: Pixel) -> Pixel {
        let d = self.signed_distance(p);
        Pixel::new(p.x - d * self.0.x, p.y - d * self.0.y)
    }

    /// True when both lines describe the same set of points (up to sign).
    pub fn approx_eq(&self, other: &HomogLine, tol: f64) -> bool {
        (self.0 - other.0).norm() <= tol || (self.0 + other.0).norm() <= tol
    }

    /// Segment of the line inside the axis-aligned box `[0, w] x [0, h]`.
    pub fn clip_to_image(&self, width: f64, height: f64) -> Option<(Pixel, Pixel)> {
        let (a, b, c) = (self.0.x, self.0.y, self.0.z);
        let mut hits: [Pixel; 4] = [Pixel::default(); 4];
        let mut n = 0;
        let mut push = |p: Pixel, hits: &mut [Pixel; 4]| {
            if n < 4 && !hits[..n].iter().any(|q| q.distance(p) < 1e-9) {
                hits[n] = p;
                n += 1;
            }
        };
        let eps = 1e-9;
        if b.abs() > eps {
            for x in [0.0, width] {
                let y = -(a * x + c) / b;
                if (-eps..=height + eps).contains(&y) {
                    push(Pixel::new(x, y.clamp(0.0, height)), &mut hits);
                }
            }
        }
        if a.abs() > eps {
            for y in [0.0, height] {
                let x = -(b * y + c) / a;
                if (-eps..=width + eps).contains(&x) {
                    push(Pixel::new(x.clamp(0.0, width), y), &mut hits);
                }
            }
        }
        if n >= 2 {
            Some((hits[0], hits[1]))
        } else {
            None
        }
    }
}

/// Pinhole intrinsics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub skew: f64,
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Self {
        Self { fx, fy, cx, cy, skew: 0.0 }
    }

    /// Square-pixel intrinsics for an image of `width` x `height` with the
    /// given horizontal field of view.
    pub fn from_fov(width: u32, height: u32, hfov_rad: f64) -> Self {
        let f = (width as f64 / 2.0) / (hfov_rad / 2.0).tan();
        Self::new(f, f, width as f64 / 2.0, height as f64 / 2.0)
    }

    pub fn is_valid(&self) -> bool {
        self.fx > 0.0 && self.fy > 0.0 && self.cx.is_finite() && self.cy.is_finite() && self.skew.is_finite()
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, self.skew, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    pub fn inverse(&self) -> Matrix3<f64> {
        let (fx, fy, s, cx, cy) = (self.fx, self.fy, self.skew, self.cx, self.cy);
        Matrix3::new(
            1.0 / fx,
            -s / (fx * fy),
            (s * cy - cx * fy) / (fx * fy),
            0.0,
            1.0 / fy,
            -cy / fy,
            0.0,
            0.0,
            1.0,
        )
    }

    pub fn principal_point(&self) -> Pixel {
        Pixel::new(self.cx, self.cy)
    }

    /// Unit ray in the camera frame through pixel `p`.
    pub fn ray(&self, p: Pixel) -> Vector3<f64> {
        (self.inverse() * p.homogeneous().0).normalize()
    }

    /// Projects a camera-frame point. `None` when it is not in front.
    pub fn project(&self, x_cam: &Vector3<f64>) -> Option<Pixel> {
        if x_cam.z <= 1e-12 {
            return None;
        }
        let u = self.fx * x_cam.x / x_cam.z + self.skew * x_cam.y / x_cam.z + self.cx;
        let v = self.fy * x_cam.y / x_cam.z + self.cy;
        Some(Pixel::new(u, v))
    }
}

/// Camera pose: world-to-camera rotation and camera center in world frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub rotation: Matrix3<f64>,
    pub center: Vector3<f64>,
}

impl Pose {
    pub fn new(rotation: Matrix3<f64>, center: Vector3<f64>) -> Self {
        Self { rotation, center }
    }

    pub fn to_camera(&self, x_world: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * (x_world - self.center)
    }

    /// Upright pose at `center` whose optical axis points at `target`.
    /// Image `y` points towards world `+y` ("down"), so no roll is introduced.
    pub fn look_at(center: Vector3<f64>, target: Vector3<f64>) -> Self {
        let z = (target - center).normalize();
        let down = Vector3::new(0.0, 1.0, 0.0);
        let mut x = down.cross(&z);
        if x.norm() < 1e-9 {
            x = Vector3::new(1.0, 0.0, 0.0);
        }
        let x = x.normalize();
        let y = z.cross(&x);
        let rotation = Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]);
        Self { rotation, center }
    }
}

/// Scales a matrix to unit Frobenius norm with its largest-magnitude entry
/// positive. Returns `None` for a numerically zero matrix.
pub(crate) fn normalize_projective(m: &Matrix3<f64>) -> Option<Matrix3<f64>> {
    let n = m.norm();
    if !(n > 1e-300) || !n.is_finite() {
        return None;
    }
    let mut best = 0.0f64;
    for v in m.iter() {
        if v.abs() > best.abs() + 1e-15 {
            best = *v;
        }
    }
    let sign = if best < 0.0 { -1.0 } else { 1.0 };
    Some(m * (sign / n))
}

/// Distance between two projective 3x3 matrices after normalization.
pub fn projective_distance(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    match (normalize_projective(a), normalize_projective(b)) {
        (Some(a), Some(b)) => (a - b).norm().min((a + b).norm()),
        _ => f64::INFINITY,
    }
}
