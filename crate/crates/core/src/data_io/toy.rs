//! Procedural multi-view "blob head" dataset.
//!
//! Each identity is an ellipsoid head with a hair cap, ears and a nose,
//! textured with eyes, brows and a mouth arc, and lit by one directional
//! light. Images are ray traced analytically at exact camera poses, so the
//! generating parameters serve as exact per-group coefficient targets and the
//! head mask is exactly the set of pixels whose centre ray hits the geometry.

use std::path::Path;

use morpheus_tensor::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::camera::{mat_vec, CameraIntrinsics, CameraPose, Vec3};
use crate::codes::{CodeDims, Group, Groups, SemanticCode};
use crate::data_io::dataset::{write_index, IndexEntry};
use crate::data_io::image_io::{save_mask, save_rgb};
use crate::error::{Error, Result};

/// `(name, low, high)` ranges of the generator parameters per group.
pub const PARAM_RANGES: Groups<&[(&str, f64, f64)]> = Groups {
    id: &[
        ("radius_x", 0.26, 0.31),
        ("radius_y", 0.30, 0.35),
        ("radius_z", 0.27, 0.32),
        ("hair_line", 0.05, 0.45),
        ("eye_sep", 0.28, 0.40),
        ("eye_height", 0.08, 0.20),
        ("eye_radius", 0.09, 0.13),
        ("ear_radius", 0.055, 0.08),
        ("nose_radius", 0.04, 0.065),
        ("mouth_width", 0.25, 0.40),
        ("mouth_height", -0.45, -0.35),
    ],
    expr: &[
        ("mouth_curve", -0.8, 0.8),
        ("mouth_open", 0.03, 0.10),
        ("eye_open", 0.4, 1.0),
        ("brow_raise", 0.0, 0.08),
    ],
    tex: &[
        ("skin_r", 0.55, 0.95),
        ("skin_g", 0.40, 0.75),
        ("skin_b", 0.30, 0.65),
        ("hair_r", 0.05, 0.60),
        ("hair_g", 0.05, 0.50),
        ("hair_b", 0.05, 0.45),
        ("lip_r", 0.50, 0.90),
        ("lip_g", 0.10, 0.35),
        ("lip_b", 0.15, 0.40),
        ("eye_r", 0.05, 0.30),
        ("eye_g", 0.05, 0.30),
        ("eye_b", 0.05, 0.30),
    ],
    light: &[
        ("azimuth", -0.8, 0.8),
        ("elevation", -0.1, 0.6),
        ("intensity", 0.55, 0.85),
        ("ambient", 0.25, 0.45),
    ],
};

/// Generator parameters, each normalized to [-1, 1] over its range.
#[derive(Clone, Debug, PartialEq)]
pub struct ToyIdentity {
    pub params: Groups<Vec<f64>>,
}

struct Scene {
    radii: Vec3,
    hair_line: f64,
    eye_sep: f64,
    eye_height: f64,
    eye_radius: f64,
    ear_radius: f64,
    nose_radius: f64,
    mouth_width: f64,
    mouth_height: f64,
    mouth_curve: f64,
    mouth_open: f64,
    eye_open: f64,
    brow_raise: f64,
    skin: Vec3,
    hair: Vec3,
    lip: Vec3,
    eye: Vec3,
    light_dir: Vec3,
    intensity: f64,
    ambient: f64,
}

const HAIR_SCALE: f64 = 1.08;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Surface {
    Head,
    Hair,
    Ear,
    Nose,
}

/// Labelled facial parts for procedural part masks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ToyPart {
    Hair,
    /// Skin of head, ears and nose, excluding eyes, brows and lips.
    Skin,
    Lips,
}

impl std::str::FromStr for ToyPart {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hair" => Ok(ToyPart::Hair),
            "skin" => Ok(ToyPart::Skin),
            "lips" => Ok(ToyPart::Lips),
            other => Err(Error::arg("part", format!("unknown part {other:?} (hair|skin|lips)"))),
        }
    }
}

fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn normalize(v: Vec3) -> Vec3 {
    let n = dot(&v, &v).sqrt();
    v.map(|x| x / n)
}

/// Nearest positive hit of a ray with an axis-aligned ellipsoid.
fn hit_ellipsoid(o: &Vec3, d: &Vec3, center: &Vec3, radii: &Vec3) -> Option<f64> {
    let oo: Vec3 = [0, 1, 2].map(|i| (o[i] - center[i]) / radii[i]);
    let dd: Vec3 = [0, 1, 2].map(|i| d[i] / radii[i]);
    let a = dot(&dd, &dd);
    let b = 2.0 * dot(&oo, &dd);
    let c = dot(&oo, &oo) - 1.0;
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return None;
    }
    let s = disc.sqrt();
    [(-b - s) / (2.0 * a), (-b + s) / (2.0 * a)].into_iter().find(|&t| t > 1e-9)
}

impl ToyIdentity {
    pub fn sample(rng: &mut impl Rng) -> Self {
        Self { params: PARAM_RANGES.map(|_, specs| specs.iter().map(|_| rng.random_range(-1.0..=1.0)).collect()) }
    }

    /// Denormalized value of parameter `i` of group `g`.
    pub fn value(&self, g: Group, i: usize) -> f64 {
        let (_, lo, hi) = PARAM_RANGES.get(g)[i];
        lo + (self.params.get(g)[i] + 1.0) * 0.5 * (hi - lo)
    }

    /// Coefficient targets: the normalized parameters, zero-padded (or
    /// truncated) to the model's group dims.
    pub fn coeffs(&self, dims: &CodeDims) -> SemanticCode {
        self.params.map(|g, p| (0..*dims.get(g)).map(|i| p.get(i).copied().unwrap_or(0.0) as f32).collect())
    }

    fn scene(&self) -> Scene {
        let id = |i| self.value(Group::Id, i);
        let ex = |i| self.value(Group::Expr, i);
        let tx = |i| self.value(Group::Tex, i);
        let li = |i| self.value(Group::Light, i);
        let (az, el) = (li(0), li(1));
        Scene {
            radii: [id(0), id(1), id(2)],
            hair_line: id(3),
            eye_sep: id(4),
            eye_height: id(5),
            eye_radius: id(6),
            ear_radius: id(7),
            nose_radius: id(8),
            mouth_width: id(9),
            mouth_height: id(10),
            mouth_curve: ex(0),
            mouth_open: ex(1),
            eye_open: ex(2),
            brow_raise: ex(3),
            skin: [tx(0), tx(1), tx(2)],
            hair: [tx(3), tx(4), tx(5)],
            lip: [tx(6), tx(7), tx(8)],
            eye: [tx(9), tx(10), tx(11)],
            light_dir: normalize([az.sin() * el.cos(), el.sin(), az.cos() * el.cos()]),
            intensity: li(2),
            ambient: li(3),
        }
    }

    /// Renders one view: image `[res, res, 3]` in [-1, 1] over a flat
    /// `background` (RGB in [0, 1]) and the head mask `[res, res, 1]`.
    pub fn render(
        &self,
        pose: &CameraPose,
        intr: &CameraIntrinsics,
        res: usize,
        background: Vec3,
    ) -> (Tensor<f32>, Tensor<f32>) {
        let scene = self.scene();
        let rot = pose.rotation();
        let origin = pose.center();
        let mut image = Vec::with_capacity(res * res * 3);
        let mut mask = Vec::with_capacity(res * res);
        const SUB: [f64; 2] = [0.25, 0.75];
        for row in 0..res {
            for col in 0..res {
                let mut acc = [0.0; 3];
                for sy in SUB {
                    for sx in SUB {
                        let d = mat_vec(&rot, &intr.direction_at(col as f64 + sx, row as f64 + sy, res));
                        let c = scene.shade(&origin, &d).unwrap_or(background);
                        (0..3).for_each(|i| acc[i] += c[i] / 4.0);
                    }
                }
                let d = mat_vec(&rot, &intr.direction_at(col as f64 + 0.5, row as f64 + 0.5, res));
                mask.push(if scene.hit(&origin, &d).is_some() { 1.0 } else { 0.0 });
                image.extend(acc.map(|v| (v.clamp(0.0, 1.0) * 2.0 - 1.0) as f32));
            }
        }
        (Tensor::new(vec![res, res, 3], image), Tensor::new(vec![res, res, 1], mask))
    }

    /// Binary `[res, res, 1]` mask of the pixels whose centre ray lands on `part`.
    pub fn part_mask(&self, pose: &CameraPose, intr: &CameraIntrinsics, res: usize, part: ToyPart) -> Tensor<f32> {
        let scene = self.scene();
        let rot = pose.rotation();
        let origin = pose.center();
        let mut out = Vec::with_capacity(res * res);
        for row in 0..res {
            for col in 0..res {
                let d = mat_vec(&rot, &intr.direction_at(col as f64 + 0.5, row as f64 + 0.5, res));
                let hit = scene.hit(&origin, &d).is_some_and(|(t, surface)| {
                    let p = [0, 1, 2].map(|i| origin[i] + t * d[i]);
                    match (part, surface) {
                        (ToyPart::Hair, s) => s == Surface::Hair,
                        (ToyPart::Skin, Surface::Head) => scene.head_albedo(&p) == scene.skin,
                        (ToyPart::Skin, s) => s != Surface::Hair,
                        (ToyPart::Lips, Surface::Head) => scene.head_albedo(&p) == scene.lip,
                        (ToyPart::Lips, _) => false,
                    }
                });
                out.push(if hit { 1.0 } else { 0.0 });
            }
        }
        Tensor::new(vec![res, res, 1], out)
    }
}

impl Scene {
    fn ears(&self) -> [(Vec3, f64); 2] {
        [-1.0, 1.0].map(|s| ([s * self.radii[0] * 0.98, 0.0, -0.02], self.ear_radius))
    }

    fn nose(&self) -> (Vec3, f64) {
        ([0.0, -0.05 * self.radii[1], self.radii[2] * 0.97], self.nose_radius)
    }

    fn is_hair(&self, p: &Vec3) -> bool {
        let n: Vec3 = [0, 1, 2].map(|i| p[i] / (self.radii[i] * HAIR_SCALE));
        n[1] + 0.7 * (-n[2]).max(0.0) > self.hair_line
    }

    fn hit(&self, o: &Vec3, d: &Vec3) -> Option<(f64, Surface)> {
        let mut best: Option<(f64, Surface)> = None;
        let mut offer = |t: Option<f64>, s: Surface| {
            if let Some(t) = t {
                if best.as_ref().is_none_or(|(bt, _)| t < *bt) {
                    best = Some((t, s));
                }
            }
        };
        offer(hit_ellipsoid(o, d, &[0.0; 3], &self.radii), Surface::Head);
        let hair_radii = self.radii.map(|r| r * HAIR_SCALE);
        let hair_t = hit_ellipsoid(o, d, &[0.0; 3], &hair_radii).filter(|&t| {
            let p = [0, 1, 2].map(|i| o[i] + t * d[i]);
            // only entry points from outside count
            dot(&[0, 1, 2].map(|i| p[i] / (hair_radii[i] * hair_radii[i])), d) < 0.0 && self.is_hair(&p)
        });
        offer(hair_t, Surface::Hair);
        for (c, r) in self.ears() {
            offer(hit_ellipsoid(o, d, &c, &[r; 3]), Surface::Ear);
        }
        let (c, r) = self.nose();
        offer(hit_ellipsoid(o, d, &c, &[r; 3]), Surface::Nose);
        best
    }

    fn head_albedo(&self, p: &Vec3) -> Vec3 {
        let u = p[0] / self.radii[0];
        let v = p[1] / self.radii[1];
        let w = p[2] / self.radii[2];
        if w < 0.3 {
            return self.skin;
        }
        for s in [-1.0, 1.0] {
            let du = u - s * self.eye_sep;
            let dv = v - self.eye_height;
            let r = self.eye_radius;
            if (du / r).powi(2) + (dv / (r * self.eye_open)).powi(2) < 1.0 {
                return self.eye;
            }
            let brow = self.eye_height + 1.3 * r + self.brow_raise;
            if du.abs() < 1.1 * r && (v - brow).abs() < 0.025 {
                return self.hair;
            }
        }
        let centre = self.mouth_height + self.mouth_curve * u * u;
        if u.abs() < self.mouth_width && (v - centre).abs() < self.mouth_open / 2.0 {
            return self.lip;
        }
        self.skin
    }

    fn shade(&self, o: &Vec3, d: &Vec3) -> Option<Vec3> {
        let (t, surface) = self.hit(o, d)?;
        let p = [0, 1, 2].map(|i| o[i] + t * d[i]);
        let (normal, albedo) = match surface {
            Surface::Head => (normalize([0, 1, 2].map(|i| p[i] / (self.radii[i] * self.radii[i]))), self.head_albedo(&p)),
            Surface::Hair => {
                let r = self.radii.map(|r| r * HAIR_SCALE);
                (normalize([0, 1, 2].map(|i| p[i] / (r[i] * r[i]))), self.hair)
            }
            Surface::Ear => {
                let c = self.ears().into_iter().min_by(|a, b| {
                    let da: f64 = (0..3).map(|i| (p[i] - a.0[i]).powi(2)).sum();
                    let db: f64 = (0..3).map(|i| (p[i] - b.0[i]).powi(2)).sum();
                    da.total_cmp(&db)
                });
                let c = c.expect("two ears").0;
                (normalize([0, 1, 2].map(|i| p[i] - c[i])), self.skin.map(|v| v * 0.9))
            }
            Surface::Nose => {
                let (c, _) = self.nose();
                (normalize([0, 1, 2].map(|i| p[i] - c[i])), self.skin)
            }
        };
        let lambert = dot(&normal, &self.light_dir).max(0.0);
        let k = self.ambient + self.intensity * lambert;
        Some(albedo.map(|a| a * k))
    }
}

pub fn sample_identities(count: usize, seed: u64) -> Vec<ToyIdentity> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| ToyIdentity::sample(&mut rng)).collect()
}

/// Maximum |yaw| of the training view ring.
pub const RING_YAW: f64 = 0.6;

/// Training views: yaws evenly spaced over `[-RING_YAW, RING_YAW]` with a
/// small deterministic pitch wobble.
pub fn ring_poses(views: usize, radius: f64) -> Vec<CameraPose> {
    (0..views)
        .map(|k| {
            let f = if views > 1 { k as f64 / (views - 1) as f64 } else { 0.5 };
            let yaw = -RING_YAW + 2.0 * RING_YAW * f;
            let pitch = 0.12 * (2.4 * k as f64).sin();
            CameraPose::orbit(yaw, pitch, radius)
        })
        .collect()
}

/// Unseen views between consecutive ring yaws, at zero pitch.
pub fn heldout_poses(views: usize, radius: f64) -> Vec<CameraPose> {
    let ring = ring_poses(views, radius);
    ring.windows(2).map(|p| CameraPose::orbit(0.5 * (p[0].yaw + p[1].yaw), 0.0, radius)).collect()
}

/// Flat background color for view `view` of identity `id`.
pub fn background(seed: u64, id: usize, view: usize) -> Vec3 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6b67_5f62_6b67 ^ ((id as u64) << 20) ^ view as u64);
    let base: f64 = rng.random_range(0.15..0.85);
    [0, 1, 2].map(|_| (base + rng.random_range(-0.05..0.05)).clamp(0.0, 1.0))
}

pub fn check_resolution(res: usize) -> Result<()> {
    if res < 32 || !res.is_power_of_two() {
        return Err(Error::arg("res", format!("{res} is not a power of two >= 32")));
    }
    Ok(())
}

/// Writes `num_ids * views_per_id` records (images, masks, `index.json`)
/// under `out`. Returns the record count.
#[allow(clippy::too_many_arguments)]
pub fn generate_toy_dataset(
    out: &Path,
    num_ids: usize,
    views_per_id: usize,
    res: usize,
    seed: u64,
    dims: &CodeDims,
    intr: &CameraIntrinsics,
    radius: f64,
) -> Result<usize> {
    check_resolution(res)?;
    let identities = sample_identities(num_ids, seed);
    let poses = ring_poses(views_per_id, radius);
    let mut entries = Vec::with_capacity(num_ids * views_per_id);
    for (i, ident) in identities.iter().enumerate() {
        for (v, pose) in poses.iter().enumerate() {
            let id = format!("id{i:03}_v{v:02}");
            let (image, mask) = ident.render(pose, intr, res, background(seed, i, v));
            let image_rel = format!("images/{id}.png");
            let mask_rel = format!("masks/{id}.png");
            save_rgb(&out.join(&image_rel), &image)?;
            save_mask(&out.join(&mask_rel), &mask)?;
            entries.push(IndexEntry { id, image: image_rel, mask: mask_rel, pose: *pose, coeffs: ident.coeffs(dims) });
        }
    }
    write_index(out, &entries)?;
    Ok(entries.len())
}

/// A rendered view with its ground truth.
#[derive(Clone, Debug)]
pub struct ToyView {
    pub identity: usize,
    pub pose: CameraPose,
    pub image: Tensor<f32>,
    pub mask: Tensor<f32>,
}

/// Views of the training identities at the held-out poses between the
/// training ring yaws.
pub fn heldout_views(
    num_ids: usize,
    views_per_id: usize,
    res: usize,
    seed: u64,
    intr: &CameraIntrinsics,
    radius: f64,
) -> Result<Vec<ToyView>> {
    check_resolution(res)?;
    let poses = heldout_poses(views_per_id, radius);
    let mut out = Vec::with_capacity(num_ids * poses.len());
    for (i, ident) in sample_identities(num_ids, seed).iter().enumerate() {
        for (k, pose) in poses.iter().enumerate() {
            let (image, mask) = ident.render(pose, intr, res, background(seed, i, 1000 + k));
            out.push(ToyView { identity: i, pose: *pose, image, mask });
        }
    }
    Ok(out)
}
