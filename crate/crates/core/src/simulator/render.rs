use alloc::vec::Vec;
use nalgebra::Vector3;
#[allow(unused_imports)] // inherent float methods need std
use num_traits::Float;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::{mix_seed, ScenePoint, VirtualCamera};
use crate::correspondence::{Descriptor, Observation, ViewObservations};
use crate::geometry::{rotation_from_command, Pixel, Pose, RotationCommand};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseModel {
    /// Gaussian pixel noise, px.
    pub pixel_sigma: f64,
    /// Fraction of observations whose descriptors are swapped in pairs.
    pub confusion_rate: f64,
    pub dropout_rate: f64,
    /// Fraction of points that move between views.
    pub moving_fraction: f64,
    /// Per-view 3D displacement of moving points, meters.
    pub moving_jitter: f64,
    /// Rotation angle error of each applied command, radians.
    pub actuation_sigma: f64,
    /// Per-dimension descriptor noise.
    pub descriptor_sigma: f64,
    pub descriptor_dim: usize,
    pub seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            pixel_sigma: 1.0,
            confusion_rate: 0.05,
            dropout_rate: 0.1,
            moving_fraction: 0.02,
            moving_jitter: 0.5,
            actuation_sigma: 0.01,
            descriptor_sigma: 0.02,
            descriptor_dim: 16,
            seed: 0,
        }
    }
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        Self {
            pixel_sigma: 0.0,
            confusion_rate: 0.0,
            dropout_rate: 0.0,
            moving_fraction: 0.0,
            moving_jitter: 0.0,
            actuation_sigma: 0.0,
            descriptor_sigma: 0.0,
            ..Self::default()
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn is_valid(&self) -> bool {
        let rate = |r: f64| (0.0..=1.0).contains(&r);
        rate(self.confusion_rate)
            && rate(self.dropout_rate)
            && rate(self.moving_fraction)
            && self.pixel_sigma >= 0.0
            && self.actuation_sigma >= 0.0
            && self.descriptor_sigma >= 0.0
            && self.moving_jitter >= 0.0
            && self.descriptor_dim > 0
    }
}

impl ScenePoint {
    /// Random unit vector drawn from the point's descriptor seed.
    pub fn descriptor(&self, dim: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.descriptor_seed);
        let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= n);
        v
    }
}

/// Exact projection, also outside the image. `None` behind the camera.
pub fn oracle_projection(cam: &VirtualCamera, point: &ScenePoint) -> Option<Pixel> {
    cam.intrinsics.project(&cam.pose.to_camera(&point.position))
}

fn gaussian(sigma: f64) -> Normal<f64> {
    Normal::new(0.0, sigma).expect("finite non-negative sigma")
}

/// Renders the observations of `cam`. The outcome depends only on the
/// camera, the points and `(cam.id, noise.seed)`.
pub fn render_view(cam: &VirtualCamera, points: &[ScenePoint], noise: &NoiseModel) -> ViewObservations {
    let view_seed = mix_seed(noise.seed, cam.id.0 as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(view_seed);
    let px_noise = gaussian(noise.pixel_sigma);
    let desc_noise = gaussian(noise.descriptor_sigma);
    let mut observations = Vec::new();
    for p in points {
        let mut pos = p.position;
        // Whether a point moves is fixed per point; its offset varies per view.
        let mover = ChaCha8Rng::seed_from_u64(mix_seed(noise.seed, p.descriptor_seed)).random::<f64>();
        if mover < noise.moving_fraction {
            let mut jr = ChaCha8Rng::seed_from_u64(mix_seed(view_seed, p.descriptor_seed));
            let j = gaussian(noise.moving_jitter);
            pos += Vector3::new(j.sample(&mut jr), j.sample(&mut jr), j.sample(&mut jr));
        }
        let Some(px) = cam.intrinsics.project(&cam.pose.to_camera(&pos)) else {
            continue;
        };
        if !cam.in_bounds(px) {
            continue;
        }
        let px = Pixel::new(px.x + px_noise.sample(&mut rng), px.y + px_noise.sample(&mut rng));
        if rng.random::<f64>() < noise.dropout_rate {
            continue;
        }
        let mut d = p.descriptor(noise.descriptor_dim);
        d.iter_mut().for_each(|x| *x += desc_noise.sample(&mut rng));
        observations.push(Observation {
            view_id: cam.id,
            pixel: px,
            descriptor: Descriptor(d),
            truth_point_id: Some(p.id),
        });
    }
    let mut confused: Vec<usize> =
        (0..observations.len()).filter(|_| rng.random::<f64>() < noise.confusion_rate).collect();
    confused.shuffle(&mut rng);
    for pair in confused.chunks_exact(2) {
        let (a, b) = (pair[0], pair[1]);
        let da = core::mem::replace(&mut observations[a].descriptor, Descriptor(Vec::new()));
        observations[a].descriptor = core::mem::replace(&mut observations[b].descriptor, da);
    }
    ViewObservations { view_id: cam.id, observations }
}

/// Rotates the camera about its own center by `cmd`, with the angle
/// perturbed by the actuation noise.
pub fn apply_rotation<R: Rng + ?Sized>(
    cam: &VirtualCamera,
    cmd: &RotationCommand,
    noise: &NoiseModel,
    rng: &mut R,
) -> VirtualCamera {
    let mut angle = cmd.angle;
    if noise.actuation_sigma > 0.0 {
        angle += gaussian(noise.actuation_sigma).sample(rng);
    }
    let rot = rotation_from_command(&RotationCommand { axis: cmd.axis, angle });
    let mut out = cam.clone();
    out.pose = Pose::new(rot.transpose() * cam.pose.rotation, cam.pose.center);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{rotation_to_center, Intrinsics};
    use crate::{PointId, ViewId};
    use nalgebra::Matrix3;

    fn cam() -> VirtualCamera {
        VirtualCamera {
            id: ViewId(3),
            intrinsics: Intrinsics::from_fov(1280, 720, 60f64.to_radians()),
            pose: Pose::look_at(Vector3::new(1.0, 0.0, -10.0), Vector3::new(2.0, 0.5, 0.0)),
            width: 1280,
            height: 720,
        }
    }

    fn point(id: u32, x: Vector3<f64>) -> ScenePoint {
        ScenePoint { id: PointId(id), position: x, descriptor_seed: id as u64 }
    }

    #[test]
    fn axis_point_hits_principal_point() {
        let c = cam();
        for depth in [0.5, 3.0, 80.0] {
            let x = c.pose.center + c.axis() * depth;
            let v = render_view(&c, &[point(0, x)], &NoiseModel::noiseless());
            let p = v.observations[0].pixel;
            assert!((p.x - 640.0).abs() < 1e-9 && (p.y - 360.0).abs() < 1e-9);
        }
    }

    #[test]
    fn behind_camera_is_absent() {
        let c = cam();
        let x = c.pose.center - c.axis() * 5.0;
        assert!(render_view(&c, &[point(0, x)], &NoiseModel::noiseless()).observations.is_empty());
        assert!(oracle_projection(&c, &point(0, x)).is_none());
    }

    #[test]
    fn forty_five_degrees_off_axis() {
        let c = VirtualCamera {
            pose: Pose::new(Matrix3::identity(), Vector3::zeros()),
            intrinsics: Intrinsics::new(500.0, 500.0, 640.0, 360.0),
            ..cam()
        };
        let p = oracle_projection(&c, &point(0, Vector3::new(4.0, 0.0, 4.0))).unwrap();
        assert!((p.x - 640.0 - 500.0).abs() < 1e-9);
    }

    #[test]
    fn rendering_is_deterministic() {
        let c = cam();
        let pts: Vec<_> = (0..50).map(|i| point(i, Vector3::new(i as f64 * 0.1 - 2.5, 0.3, 0.0))).collect();
        let n = NoiseModel { confusion_rate: 0.3, moving_fraction: 0.3, ..NoiseModel::default() };
        assert_eq!(render_view(&c, &pts, &n), render_view(&c, &pts, &n));
        assert_ne!(render_view(&c, &pts, &n), render_view(&c, &pts, &n.with_seed(1)));
    }

    #[test]
    fn centering_rotation_round_trip() {
        let c = cam();
        let target = point(0, Vector3::new(4.0, -1.0, 0.5));
        let p = oracle_projection(&c, &target).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let rotated = apply_rotation(&c, &rotation_to_center(&c.intrinsics, p), &NoiseModel::noiseless(), &mut rng);
        let q = oracle_projection(&rotated, &target).unwrap();
        assert!((q.x - 640.0).abs() < 1e-6 && (q.y - 360.0).abs() < 1e-6);
        assert_eq!(rotated.pose.center, c.pose.center);
    }

    #[test]
    fn zero_rotation_is_identity() {
        let c = cam();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(apply_rotation(&c, &RotationCommand::identity(), &NoiseModel::noiseless(), &mut rng), c);
    }
}
