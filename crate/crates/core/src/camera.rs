//! Camera poses, perspective rays over the low-resolution grid, and depth
//! sampling along each ray.
//!
//! Conventions: the camera looks down its local -z axis with +x right and
//! +y up. A pose holds a world-from-camera rotation `R = Ry(yaw) Rx(pitch)
//! Rz(roll)` and a translation `t` expressed in the camera frame, so the
//! camera centre is `R t`. The canonical pose `(0, 0, 0, [0, 0, r])` sits on
//! the +z axis looking at the origin.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];

pub fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

pub fn mat_vec(a: &Mat3, v: &Vec3) -> Vec3 {
    [0, 1, 2].map(|i| a[i][0] * v[0] + a[i][1] * v[1] + a[i][2] * v[2])
}

pub fn transpose(a: &Mat3) -> Mat3 {
    [0, 1, 2].map(|i| [a[0][i], a[1][i], a[2][i]])
}

pub fn rot_x(a: f64) -> Mat3 {
    let (s, c) = a.sin_cos();
    [[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]]
}

pub fn rot_y(a: f64) -> Mat3 {
    let (s, c) = a.sin_cos();
    [[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]]
}

pub fn rot_z(a: f64) -> Mat3 {
    let (s, c) = a.sin_cos();
    [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]
}

/// `Ry(yaw) Rx(pitch) Rz(roll)`.
pub fn euler_to_matrix(yaw: f64, pitch: f64, roll: f64) -> Mat3 {
    mat_mul(&mat_mul(&rot_y(yaw), &rot_x(pitch)), &rot_z(roll))
}

/// Inverse of [`euler_to_matrix`] on the branch `|pitch| <= pi/2`.
pub fn matrix_to_euler(r: &Mat3) -> (f64, f64, f64) {
    let pitch = (-r[1][2]).clamp(-1.0, 1.0).asin();
    let roll = r[1][0].atan2(r[1][1]);
    let yaw = r[0][2].atan2(r[2][2]);
    (yaw, pitch, roll)
}

fn wrap_angle(a: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    let w = (a + std::f64::consts::PI).rem_euclid(tau) - std::f64::consts::PI;
    if w == -std::f64::consts::PI { std::f64::consts::PI } else { w }
}

fn normalize(v: Vec3) -> Vec3 {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    v.map(|x| x / n)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraPose {
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
    pub t: Vec3,
}

impl CameraPose {
    pub fn canonical(radius: f64) -> Self {
        Self { yaw: 0.0, pitch: 0.0, roll: 0.0, t: [0.0, 0.0, radius] }
    }

    /// Canonical camera orbited to the given angles.
    pub fn orbit(yaw: f64, pitch: f64, radius: f64) -> Self {
        Self { yaw, pitch, roll: 0.0, ..Self::canonical(radius) }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("yaw", self.yaw), ("pitch", self.pitch), ("roll", self.roll)] {
            if !v.is_finite() {
                return Err(Error::arg(format!("pose.{name}"), "must be finite"));
            }
        }
        if self.t.iter().any(|v| !v.is_finite()) {
            return Err(Error::arg("pose.t", "must be finite"));
        }
        Ok(())
    }

    /// Same pose with angles wrapped into `[-pi, pi]`.
    pub fn normalized(&self) -> Self {
        Self { yaw: wrap_angle(self.yaw), pitch: wrap_angle(self.pitch), roll: wrap_angle(self.roll), t: self.t }
    }

    pub fn rotation(&self) -> Mat3 {
        euler_to_matrix(self.yaw, self.pitch, self.roll)
    }

    pub fn center(&self) -> Vec3 {
        mat_vec(&self.rotation(), &self.t)
    }
}

/// World-from-camera rotation and the translation of `pose`.
pub fn pose_to_rotation(pose: &CameraPose) -> (Mat3, Vec3) {
    (pose.rotation(), pose.t)
}

/// Camera pose that views a canonical (frontal) head as if the head had
/// rotated by the given face angles: the camera applies the inverse rotation.
pub fn face_angles_to_camera_pose(face_yaw: f64, face_pitch: f64, face_roll: f64, radius: f64) -> CameraPose {
    let r_cam = transpose(&euler_to_matrix(face_yaw, face_pitch, face_roll));
    let (yaw, pitch, roll) = matrix_to_euler(&r_cam);
    CameraPose { yaw, pitch, roll, t: [0.0, 0.0, radius] }
}

/// Face angles implied by a camera pose; inverse of [`face_angles_to_camera_pose`].
pub fn camera_pose_to_face_angles(pose: &CameraPose) -> (f64, f64, f64) {
    matrix_to_euler(&transpose(&pose.rotation()))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraIntrinsics {
    /// Vertical field of view in radians.
    pub fov_y: f64,
    pub near: f64,
    pub far: f64,
    pub grid_res: usize,
}

impl Default for CameraIntrinsics {
    fn default() -> Self {
        Self { fov_y: 18f64.to_radians(), near: 2.0, far: 3.4, grid_res: 32 }
    }
}

impl CameraIntrinsics {
    pub fn validate(&self) -> Result<()> {
        if !(self.near > 0.0 && self.near < self.far) {
            return Err(Error::Config("camera: need 0 < near < far".into()));
        }
        if !(self.fov_y > 0.0 && self.fov_y < std::f64::consts::PI) {
            return Err(Error::Config("camera: fov_y must lie in (0, pi)".into()));
        }
        if self.grid_res == 0 {
            return Err(Error::Config("camera: grid_res must be positive".into()));
        }
        Ok(())
    }

    /// Unit ray direction in the camera frame through the centre of grid
    /// pixel `(row, col)` of a `res x res` image.
    pub fn camera_direction(&self, row: usize, col: usize, res: usize) -> Vec3 {
        self.direction_at(col as f64 + 0.5, row as f64 + 0.5, res)
    }

    /// Unit camera-frame direction through image point `(x, y)` in pixel
    /// units of a `res x res` image (origin at the top-left corner).
    pub fn direction_at(&self, x: f64, y: f64, res: usize) -> Vec3 {
        let half = (self.fov_y / 2.0).tan();
        let cx = (x / res as f64 * 2.0 - 1.0) * half;
        let cy = -(y / res as f64 * 2.0 - 1.0) * half;
        normalize([cx, cy, -1.0])
    }
}

/// Rays through every grid pixel (row-major) with their depth samples.
#[derive(Clone, Debug)]
pub struct RayBundle {
    pub origins: Vec<Vec3>,
    pub directions: Vec<Vec3>,
    /// Distances along each ray, `rays x n`.
    pub depths: Vec<f64>,
    /// Spacings between adjacent samples, `rays x (n - 1)`.
    pub deltas: Vec<f64>,
    pub n_samples: usize,
}

impl RayBundle {
    pub fn num_rays(&self) -> usize {
        self.origins.len()
    }

    /// Sample positions, `rays x n`, row-major.
    pub fn sample_points(&self) -> Vec<Vec3> {
        let n = self.n_samples;
        let mut out = Vec::with_capacity(self.depths.len());
        for (r, (o, d)) in self.origins.iter().zip(&self.directions).enumerate() {
            for &t in &self.depths[r * n..(r + 1) * n] {
                out.push([o[0] + t * d[0], o[1] + t * d[1], o[2] + t * d[2]]);
            }
        }
        out
    }
}

/// Generates the `grid_res^2` rays of `pose` with `n` depth samples in
/// `[near, far]`. Stratified sampling draws one jittered depth per uniform
/// bin from `seed`; otherwise bin midpoints are used.
pub fn generate_rays(
    pose: &CameraPose,
    intr: &CameraIntrinsics,
    n: usize,
    stratified: bool,
    seed: u64,
) -> Result<RayBundle> {
    if n < 2 {
        return Err(Error::arg("n_samples", "need at least 2 samples per ray"));
    }
    pose.validate()?;
    intr.validate().map_err(|e| Error::arg("intrinsics", e.to_string()))?;
    let g = intr.grid_res;
    let rot = pose.rotation();
    let origin = pose.center();
    let bin = (intr.far - intr.near) / n as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bundle = RayBundle {
        origins: Vec::with_capacity(g * g),
        directions: Vec::with_capacity(g * g),
        depths: Vec::with_capacity(g * g * n),
        deltas: Vec::with_capacity(g * g * (n - 1)),
        n_samples: n,
    };
    for row in 0..g {
        for col in 0..g {
            let d = normalize(mat_vec(&rot, &intr.camera_direction(row, col, g)));
            bundle.origins.push(origin);
            bundle.directions.push(d);
            let start = bundle.depths.len();
            for k in 0..n {
                let u: f64 = if stratified { rng.random::<f64>() } else { 0.5 };
                bundle.depths.push(intr.near + (k as f64 + u) * bin);
            }
            for k in 0..n - 1 {
                bundle.deltas.push(bundle.depths[start + k + 1] - bundle.depths[start + k]);
            }
        }
    }
    Ok(bundle)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn midpoints_for_two_samples() {
        let intr = CameraIntrinsics { near: 2.0, far: 3.0, grid_res: 1, ..Default::default() };
        let b = generate_rays(&CameraPose::canonical(2.7), &intr, 2, false, 0).unwrap();
        assert_eq!(b.depths, vec![2.25, 2.75]);
        assert_eq!(b.deltas, vec![0.5]);
    }

    #[test]
    fn rejects_single_sample() {
        let err = generate_rays(&CameraPose::canonical(2.7), &CameraIntrinsics::default(), 1, false, 0);
        assert!(matches!(err, Err(Error::Argument { .. })));
    }

    #[test]
    fn wrap_keeps_range() {
        let p = CameraPose { yaw: 7.0, pitch: -4.0, roll: std::f64::consts::PI, t: [0.0; 3] }.normalized();
        for a in [p.yaw, p.pitch, p.roll] {
            assert!(a.abs() <= std::f64::consts::PI);
        }
        assert!((p.yaw - (7.0 - std::f64::consts::TAU)).abs() < 1e-12);
    }
}
