mod common;

use std::f64::consts::{FRAC_PI_2, PI};

use common::{axis_angle, matmul3, rng};
use proptest::prelude::*;
use rand::Rng;
use stylemorpheus::camera::{
    camera_pose_to_face_angles, face_angles_to_camera_pose, generate_rays, pose_to_rotation, transpose,
    CameraIntrinsics,
};
use stylemorpheus::codes::{mix_codes, CodeDims};
use stylemorpheus::neural_field::positional_encode;
use stylemorpheus::{CameraPose, Group, Groups, Model, ModelConfig, SemanticCode, StyleCode};

fn full_dims() -> CodeDims {
    CodeDims { id: 100, expr: 79, tex: 100, light: 27 }
}

fn labelled(dims: &CodeDims, base: f32) -> SemanticCode {
    dims.map(|g, &d| (0..d).map(|i| base + (g as usize * 1000 + i) as f32).collect())
}

fn subsets() -> impl Iterator<Item = Vec<Group>> {
    (0u8..16).map(|m| Group::ALL.into_iter().enumerate().filter(|(i, _)| m >> i & 1 == 1).map(|(_, g)| g).collect())
}

#[test]
fn mapping_preserves_full_dims() {
    let mut cfg = ModelConfig::toy();
    cfg.codes = full_dims();
    let model = Model::new(cfg, 3).unwrap();
    let z = SemanticCode::zeros(&full_dims());
    let w = model.map_to_w(&z).unwrap();
    assert_eq!(w.0.dims(), full_dims());
    assert!(w.0.iter().all(|(_, v)| v.iter().all(|x| x.is_finite())));
    let again = model.map_to_w(&z).unwrap();
    assert_eq!(w, again);
}

#[test]
fn condition_lengths_at_full_dims() {
    let mut w = SemanticCode::zeros(&full_dims());
    w.expr[0] = 1.0;
    let w = StyleCode(w);
    let shape = w.shape_condition();
    assert_eq!(shape.len(), 179);
    assert_eq!(shape.iter().position(|&v| v == 1.0), Some(100));
    assert_eq!(shape.iter().filter(|&&v| v != 0.0).count(), 1);
    let app = w.appearance_condition();
    assert_eq!(app.len(), 127);
    assert!(app.iter().all(|&v| v == 0.0));
}

#[test]
fn mix_expr_takes_only_target_expr() {
    let dims = full_dims();
    let (src, tgt) = (labelled(&dims, 0.0), labelled(&dims, 0.5));
    let out = mix_codes(&src, &tgt, &[Group::Expr]).unwrap();
    assert_eq!(out, Groups { id: src.id.clone(), expr: tgt.expr.clone(), tex: src.tex.clone(), light: src.light.clone() });
    assert_eq!(mix_codes(&src, &tgt, &[]).unwrap(), src);
    assert_eq!(mix_codes(&src, &tgt, &Group::ALL).unwrap(), tgt);
}

#[test]
fn mix_all_sixteen_subsets_bitwise() {
    let dims = ModelConfig::toy().codes;
    let mut r = rng(11);
    let src: SemanticCode = dims.map(|_, &d| (0..d).map(|_| r.random_range(-3.0f32..3.0)).collect());
    let tgt: SemanticCode = dims.map(|_, &d| (0..d).map(|_| r.random_range(-3.0f32..3.0)).collect());
    let mut seen = 0;
    for groups in subsets() {
        let out = mix_codes(&src, &tgt, &groups).unwrap();
        for g in Group::ALL {
            let want = if groups.contains(&g) { tgt.get(g) } else { src.get(g) };
            let same = out.get(g).iter().zip(want).all(|(a, b)| a.to_bits() == b.to_bits());
            assert!(same, "group {g} with subset {groups:?}");
        }
        seen += 1;
    }
    assert_eq!(seen, 16);
}

#[test]
fn mix_rejects_mismatched_dims() {
    let a = SemanticCode::zeros(&ModelConfig::toy().codes);
    let b = SemanticCode::zeros(&full_dims());
    assert!(mix_codes(&a, &b, &[Group::Id]).is_err());
}

#[test]
fn offsets_from_zero_and_to_zero() {
    let dims = ModelConfig::toy().codes;
    let dz = labelled(&dims, 0.25);
    assert_eq!(SemanticCode::zeros(&dims).apply_offset(&dz).unwrap(), dz);
    assert_eq!(dz.apply_offset(&SemanticCode::zeros(&dims)).unwrap(), dz);
}

proptest! {
    #[test]
    fn offset_is_exactly_additive(seed in any::<u64>(), scale in 0.01f32..100.0) {
        let dims = ModelConfig::toy().codes;
        let mut r = rng(seed);
        let z: SemanticCode = dims.map(|_, &d| (0..d).map(|_| r.random_range(-scale..scale)).collect());
        let dz: SemanticCode = dims.map(|_, &d| (0..d).map(|_| r.random_range(-scale..scale)).collect());
        let out = z.apply_offset(&dz).unwrap();
        for g in Group::ALL {
            for ((o, a), b) in out.get(g).iter().zip(z.get(g)).zip(dz.get(g)) {
                prop_assert_eq!(o.to_bits(), (a + b).to_bits());
            }
        }
    }

    #[test]
    fn mapping_output_dims_match(id in 1usize..20, expr in 1usize..20, tex in 1usize..20, light in 1usize..20) {
        let mut cfg = common::tiny_config();
        cfg.codes = CodeDims { id, expr, tex, light };
        let model = Model::new(cfg.clone(), 0).unwrap();
        let w = model.map_to_w(&SemanticCode::zeros(&cfg.codes)).unwrap();
        prop_assert_eq!(w.0.dims(), cfg.codes);
    }

    #[test]
    fn rotations_are_orthonormal(yaw in -PI..PI, pitch in -PI..PI, roll in -PI..PI) {
        let pose = CameraPose { yaw, pitch, roll, t: [0.0, 0.0, 2.7] };
        let (r, _) = pose_to_rotation(&pose);
        let rtr = matmul3(&transpose(&r), &r);
        for (i, row) in rtr.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                prop_assert!((v - want).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn ray_invariants(yaw in -1.0f64..1.0, pitch in -0.5f64..0.5, n in 2usize..40, seed in any::<u64>(), strat in any::<bool>()) {
        let intr = CameraIntrinsics { grid_res: 4, ..CameraIntrinsics::default() };
        let pose = CameraPose::orbit(yaw, pitch, 2.7);
        let b = generate_rays(&pose, &intr, n, strat, seed).unwrap();
        prop_assert_eq!(b.num_rays(), 16);
        for d in &b.directions {
            let norm = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
            prop_assert!((norm - 1.0).abs() < 1e-6);
        }
        for r in 0..16 {
            let depths = &b.depths[r * n..(r + 1) * n];
            prop_assert!(depths.windows(2).all(|p| p[1] > p[0]));
            let deltas = &b.deltas[r * (n - 1)..(r + 1) * (n - 1)];
            prop_assert!(deltas.iter().all(|&d| d > 0.0));
            prop_assert!(deltas.iter().sum::<f64>() <= intr.far - intr.near + 1e-6);
        }
        let again = generate_rays(&pose, &intr, n, strat, seed).unwrap();
        prop_assert_eq!(b.depths, again.depths);
        prop_assert_eq!(b.directions, again.directions);
    }

    #[test]
    fn face_angles_round_trip(yaw in -1.5f64..1.5, pitch in -1.5f64..1.5, roll in -1.5f64..1.5) {
        let pose = face_angles_to_camera_pose(yaw, pitch, roll, 2.7);
        let (y, p, r) = camera_pose_to_face_angles(&pose);
        prop_assert!((y - yaw).abs() < 1e-6 && (p - pitch).abs() < 1e-6 && (r - roll).abs() < 1e-6);
    }
}

#[test]
fn identity_pose_has_identity_rotation() {
    let pose = CameraPose { yaw: 0.0, pitch: 0.0, roll: 0.0, t: [0.1, -0.2, 3.0] };
    let (r, t) = pose_to_rotation(&pose);
    assert_eq!(r, [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
    assert_eq!(t, [0.1, -0.2, 3.0]);
}

#[test]
fn yaw_quarter_turn_matches_axis_angle_oracle() {
    let (r, _) = pose_to_rotation(&CameraPose::orbit(FRAC_PI_2, 0.0, 2.7));
    let oracle = axis_angle([0.0, 1.0, 0.0], FRAC_PI_2);
    for i in 0..3 {
        for j in 0..3 {
            assert!((r[i][j] - oracle[i][j]).abs() < 1e-12);
        }
    }
    // +z turns into +x under a positive yaw.
    let z = [r[0][2], r[1][2], r[2][2]];
    assert!((z[0] - 1.0).abs() < 1e-12 && z[1].abs() < 1e-12 && z[2].abs() < 1e-12);
}

#[test]
fn composed_angles_match_axis_angle_oracle() {
    let mut r = rng(5);
    for _ in 0..50 {
        let (y, p, q) = (r.random_range(-PI..PI), r.random_range(-PI..PI), r.random_range(-PI..PI));
        let (got, _) = pose_to_rotation(&CameraPose { yaw: y, pitch: p, roll: q, t: [0.0; 3] });
        let want = matmul3(
            &matmul3(&axis_angle([0.0, 1.0, 0.0], y), &axis_angle([1.0, 0.0, 0.0], p)),
            &axis_angle([0.0, 0.0, 1.0], q),
        );
        for i in 0..3 {
            for j in 0..3 {
                assert!((got[i][j] - want[i][j]).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn ray_counts_at_full_grid() {
    let intr = CameraIntrinsics::default();
    let b = generate_rays(&CameraPose::canonical(2.7), &intr, 32, false, 0).unwrap();
    assert_eq!(b.num_rays(), 1024);
    assert_eq!(b.sample_points().len(), 1024 * 32);
}

#[test]
fn center_ray_is_optical_axis() {
    let intr = CameraIntrinsics { grid_res: 1, ..CameraIntrinsics::default() };
    let b = generate_rays(&CameraPose::canonical(2.7), &intr, 4, false, 0).unwrap();
    let d = b.directions[0];
    assert!(d[0].abs() < 1e-6 && d[1].abs() < 1e-6 && (d[2] + 1.0).abs() < 1e-6);
    assert_eq!(b.origins[0], [0.0, 0.0, 2.7]);
}

#[test]
fn midpoint_depths() {
    let intr = CameraIntrinsics { near: 2.0, far: 3.0, grid_res: 2, ..CameraIntrinsics::default() };
    let b = generate_rays(&CameraPose::canonical(2.7), &intr, 2, false, 0).unwrap();
    for r in 0..4 {
        assert_eq!(&b.depths[2 * r..2 * r + 2], &[2.25, 2.75]);
        assert_eq!(b.deltas[r], 0.5);
    }
}

#[test]
fn face_angles_move_the_camera_the_other_way() {
    let frontal = face_angles_to_camera_pose(0.0, 0.0, 0.0, 2.7);
    assert_eq!(frontal, CameraPose::canonical(2.7));
    for theta in [-0.7, -0.2, 0.3, 1.1] {
        let pose = face_angles_to_camera_pose(theta, 0.0, 0.0, 2.7);
        assert!((pose.yaw + theta).abs() < 1e-12 && pose.pitch.abs() < 1e-12 && pose.roll.abs() < 1e-12);
        // The camera seen from the head frame equals the head rotated by theta.
        let (r, _) = pose_to_rotation(&pose);
        let head = axis_angle([0.0, 1.0, 0.0], theta);
        let prod = matmul3(&head, &r);
        for i in 0..3 {
            for j in 0..3 {
                assert!((prod[i][j] - f64::from(u8::from(i == j))).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn positional_encoding_values() {
    let e = positional_encode::<f64>(&[[0.0, 0.0, 0.0]], 2, true);
    assert_eq!(e.shape(), &[1, 15]);
    for axis in 0..3 {
        let row = &e.data()[axis * 5..axis * 5 + 5];
        assert_eq!(row, &[0.0, 0.0, 1.0, 0.0, 1.0]);
    }
    let e = positional_encode::<f64>(&[[1.0, 0.0, 0.0]], 1, true);
    let x = &e.data()[0..3];
    assert_eq!(x[0], 1.0);
    assert!(x[1].abs() < 1e-12);
    assert!((x[2] + 1.0).abs() < 1e-12);
    assert_eq!(positional_encode::<f32>(&[[0.3, 0.1, -0.2]; 5], 4, true).shape(), &[5, 27]);
    assert_eq!(positional_encode::<f32>(&[[0.3, 0.1, -0.2]], 4, false).shape(), &[1, 24]);
}
