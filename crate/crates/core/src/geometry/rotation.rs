#[allow(unused_imports)] // inherent float methods need std
use num_traits::Float;
use nalgebra::{Matrix3, Rotation3, Unit, Vector3};

use super::{Intrinsics, Pixel};

/// Camera-frame axis-angle rotation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RotationCommand {
    pub axis: Vector3<f64>,
    pub angle: f64,
}

impl RotationCommand {
    pub const DEFAULT_AXIS: Vector3<f64> = Vector3::new(0.0, 1.0, 0.0);

    pub fn identity() -> Self {
        Self { axis: Self::DEFAULT_AXIS, angle: 0.0 }
    }
}

/// Rotation that brings the ray through `p` onto the principal ray.
///
/// `θ = acos(d̂(0)·d̂(p))`, `â = d̂(0) × d̂(p)` normalized, with `d̂(q)` the unit
/// ray `K⁻¹q̃`. Near the image center the angle is zero and the axis is
/// `(0, 1, 0)`.
pub fn rotation_to_center(k: &Intrinsics, p: Pixel) -> RotationCommand {
    rotation_to_ray(k, &k.ray(p))
}

/// Rotation that brings the camera-frame direction `dp` onto the principal
/// ray, including directions behind the camera.
pub fn rotation_to_ray(k: &Intrinsics, dp: &Vector3<f64>) -> RotationCommand {
    let d0 = k.ray(k.principal_point());
    let dp = dp.normalize();
    let cross = d0.cross(&dp);
    let angle = cross.norm().atan2(d0.dot(&dp));
    if cross.norm() <= 1e-15 && d0.dot(&dp) < 0.0 {
        return RotationCommand { axis: RotationCommand::DEFAULT_AXIS, angle: core::f64::consts::PI };
    }
    if angle <= 1e-12 || cross.norm() <= 1e-15 {
        return RotationCommand::identity();
    }
    RotationCommand { axis: cross.normalize(), angle }
}

/// Body rotation (camera frame) described by the command. Applying it to a
/// camera with world-to-camera rotation `R` gives `Rotᵀ R`.
pub fn rotation_from_command(cmd: &RotationCommand) -> Matrix3<f64> {
    if cmd.angle == 0.0 {
        return Matrix3::identity();
    }
    Rotation3::from_axis_angle(&Unit::new_normalize(cmd.axis), cmd.angle).into_inner()
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::FRAC_PI_4;

    #[test]
    fn center_needs_no_rotation() {
        let k = Intrinsics::new(1100.0, 1100.0, 640.0, 360.0);
        let c = rotation_to_center(&k, Pixel::new(640.0, 360.0));
        assert_eq!(c.angle, 0.0);
        assert_eq!(c.axis, Vector3::new(0.0, 1.0, 0.0));
    }

    #[test]
    fn unit_camera_quarter_turn() {
        let k = Intrinsics::new(1.0, 1.0, 0.0, 0.0);
        let c = rotation_to_center(&k, Pixel::new(1.0, 0.0));
        assert!((c.angle - FRAC_PI_4).abs() < 1e-12);
        assert!((c.axis - Vector3::new(0.0, 1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn body_rotation_maps_ray_to_axis() {
        let k = Intrinsics::new(800.0, 820.0, 600.0, 340.0);
        let p = Pixel::new(-300.0, 1200.0);
        let cmd = rotation_to_center(&k, p);
        assert!((cmd.axis.norm() - 1.0).abs() < 1e-12);
        let rot = rotation_from_command(&cmd);
        let moved = rot.transpose() * k.ray(p);
        assert!((moved - Vector3::new(0.0, 0.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn ray_behind_camera() {
        let k = Intrinsics::new(800.0, 800.0, 640.0, 360.0);
        let d = Vector3::new(0.3, -0.1, -1.0);
        let cmd = rotation_to_ray(&k, &d);
        assert!(cmd.angle > core::f64::consts::FRAC_PI_2);
        let moved = rotation_from_command(&cmd).transpose() * d.normalize();
        assert!((moved - Vector3::new(0.0, 0.0, 1.0)).norm() < 1e-12);
    }
}
