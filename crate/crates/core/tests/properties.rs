mod common;

use common::*;
use nalgebra::{Matrix3, Rotation3, Vector3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shellsplat::envmap::{render_cubemap, CubemapOptions};
use shellsplat::ingest::{decode_pfm, encode_pfm, SparsePointCloud};
use shellsplat::loss::{planarity_loss, planarity_term, shell_loss, total_loss};
use shellsplat::metrics::{psnr, split, ssim};
use shellsplat::model::{ply, rotation, FloatMap, GaussianCloud, Image, SceneShell, StageConfig};
use shellsplat::optim::Adam;
use shellsplat::render::render;
use shellsplat::segmentation::{align_scale, distance_map_from, segment, DepthConvention, DistanceMap};
use shellsplat::shell_init::{build_icosphere, radial_placement, PlacementMode};
use shellsplat::train::{densify, prune, GradStats};

fn quat() -> impl Strategy<Value = [f64; 4]> {
    prop::array::uniform4(-1.0f64..1.0)
        .prop_filter("non-degenerate", |q| q.iter().map(|v| v * v).sum::<f64>() > 1e-2)
        .prop_map(rotation::normalize)
}

fn vec3(lo: f64, hi: f64) -> impl Strategy<Value = Vector3<f64>> {
    prop::array::uniform3(lo..hi).prop_map(Vector3::from)
}

fn cloud_in_shell(n: usize, shell: SceneShell, seed: u64) -> GaussianCloud {
    let mut r = rng(seed);
    let mut c = GaussianCloud::empty(1);
    for _ in 0..n {
        let d = Vector3::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), r.random_range(-1.0..1.0))
            .normalize();
        let p = shell.center + d * r.random_range(0.5 * shell.r_inner..1.2 * shell.r_outer);
        let ls = Vector3::new(r.random_range(-2.0..0.5), r.random_range(-2.0..0.5), r.random_range(-3.0..-1.0));
        c.push(p, random_quat(&mut r), ls, r.random_range(0.1..0.9), [0.5; 3]);
    }
    c
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn covariance_parameterization_round_trips(q in quat(), s in prop::array::uniform3(0.05f64..3.0)) {
        let r = rotation::to_matrix(q);
        let cov = r * Matrix3::from_diagonal(&Vector3::from(s).map(|v| v * v)) * r.transpose();
        let mut c = GaussianCloud::empty(0);
        c.push_from_covariance(Vector3::zeros(), &cov, 0.5, [0.5; 3]);
        let back = c.activate(0).unwrap().covariance;
        prop_assert!((back - cov).norm() / cov.norm() < 1e-9);
    }

    #[test]
    fn shortest_axis_has_unit_norm(q in quat(), ls in vec3(-3.0, 2.0)) {
        let mut c = GaussianCloud::empty(0);
        c.push(Vector3::zeros(), q, ls, 0.5, [0.5; 3]);
        prop_assert!((c.shortest_axis_world(0).unwrap().norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn permuting_gaussians_permutes_outputs(seed in 0u64..1000, shift in 1usize..9) {
        let shell = SceneShell::new(Vector3::zeros(), 2.0, 5.0).unwrap();
        let cloud = cloud_in_shell(10, shell, seed);
        let perm: Vec<usize> = (0..10).map(|i| (i + shift) % 10).collect();
        let mut permuted = GaussianCloud::empty(1);
        for &i in &perm {
            permuted.params.push_from(&cloud.params, i);
            permuted.visibility_counts.push(0);
        }
        let (_, g) = shell_loss(&cloud, &shell).unwrap();
        let (_, gp) = shell_loss(&permuted, &shell).unwrap();
        let (_, pg) = planarity_loss(&cloud, &shell, 1e-8).unwrap();
        let (_, pgp) = planarity_loss(&permuted, &shell, 1e-8).unwrap();
        for (k, &i) in perm.iter().enumerate() {
            prop_assert_eq!(&gp[3 * k..3 * k + 3], &g[3 * i..3 * i + 3]);
            prop_assert_eq!(&pgp.rotations[4 * k..4 * k + 4], &pg.rotations[4 * i..4 * i + 4]);
            prop_assert_eq!(
                planarity_term(&permuted, &shell, k, 1e-8).unwrap(),
                planarity_term(&cloud, &shell, i, 1e-8).unwrap()
            );
            prop_assert_eq!(permuted.activate(k).unwrap().covariance, cloud.activate(i).unwrap().covariance);
        }
    }

    #[test]
    fn shell_loss_ignores_rotation_and_scale(seed in 0u64..1000, q in quat(), ls in vec3(-3.0, 1.0)) {
        let shell = SceneShell::new(Vector3::new(0.3, -0.2, 0.1), 2.0, 5.0).unwrap();
        let cloud = cloud_in_shell(10, shell, seed);
        let mut other = cloud.clone();
        for i in 0..other.len() {
            other.params.rotations[4 * i..4 * i + 4].copy_from_slice(&q);
            other.params.log_scales[3 * i..3 * i + 3].copy_from_slice(ls.as_slice());
        }
        prop_assert_eq!(shell_loss(&cloud, &shell).unwrap(), shell_loss(&other, &shell).unwrap());
    }

    #[test]
    fn geometric_losses_are_translation_invariant(seed in 0u64..1000, t in vec3(-50.0, 50.0)) {
        let shell = SceneShell::new(Vector3::zeros(), 2.0, 5.0).unwrap();
        let moved_shell = SceneShell::new(t, 2.0, 5.0).unwrap();
        let cloud = cloud_in_shell(10, shell, seed);
        let mut moved = cloud.clone();
        for i in 0..moved.len() {
            moved.set_position(i, cloud.position(i) + t);
        }
        let (a, _) = shell_loss(&cloud, &shell).unwrap();
        let (b, _) = shell_loss(&moved, &moved_shell).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
        let (a, _) = planarity_loss(&cloud, &shell, 1e-8).unwrap();
        let (b, _) = planarity_loss(&moved, &moved_shell, 1e-8).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
    }

    #[test]
    fn planarity_ignores_spin_about_shortest_axis(q in quat(), p in vec3(-5.0, 5.0), angle in -3.0f64..3.0) {
        prop_assume!(p.norm() > 0.1);
        let shell = SceneShell::new(Vector3::zeros(), 1.0, 10.0).unwrap();
        let ls = Vector3::new(0.4, -0.1, -1.5);
        let mut c = GaussianCloud::empty(0);
        c.push(p, q, ls, 0.5, [0.5; 3]);
        let axis = c.shortest_axis_world(0).unwrap();
        let spun = rotation::mul(rotation::from_axis_angle([axis.x, axis.y, axis.z], angle), q);
        let mut d = GaussianCloud::empty(0);
        d.push(p, spun, ls, 0.5, [0.5; 3]);
        let a = planarity_term(&c, &shell, 0, 1e-8).unwrap();
        let b = planarity_term(&d, &shell, 0, 1e-8).unwrap();
        prop_assert!((a - b).abs() < 1e-9 * (1.0 + a));
    }

    #[test]
    fn total_is_weighted_sum_of_nonnegative_terms(
        seed in 0u64..1000,
        ls in 0.0f64..5.0,
        lp in 0.0f64..1.0,
        ld in 0.0f64..1.0,
    ) {
        let shell = SceneShell::new(Vector3::zeros(), 2.0, 5.0).unwrap();
        let cloud = cloud_in_shell(8, shell, seed);
        let mut r = rng(seed);
        let mut a = Image::new(12, 12);
        let mut b = Image::new(12, 12);
        for v in a.data.iter_mut().chain(b.data.iter_mut()) {
            *v = r.random_range(0.0..1.0);
        }
        let config = StageConfig { lambda_shell: ls, lambda_planarity: lp, lambda_dssim: ld, ..StageConfig::default() };
        let e = total_loss(&a, &b, None, Some((&cloud, &shell)), &config).unwrap().breakdown;
        for v in [e.l1, e.dssim, e.shell, e.planarity] {
            prop_assert!(v >= 0.0);
        }
        let expected = (1.0 - ld) * e.l1 + ld * e.dssim + ls * e.shell + lp * e.planarity;
        prop_assert!((e.total - expected).abs() < 1e-12 * (1.0 + expected));
    }
}

fn render_cloud(seed: u64, n: usize) -> GaussianCloud {
    let mut r = rng(seed);
    random_cloud(&mut r, n, 1, 1.2, 0.3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn splitting_a_cloud_does_not_change_the_render(seed in 0u64..1000, cut in 0usize..12) {
        let cam = camera_at(Vector3::new(0.0, 0.0, -6.0), 32, 45.0);
        let cloud = render_cloud(seed, 12);
        let keep: Vec<bool> = (0..12).map(|i| i < cut).collect();
        let mut first = cloud.clone();
        first.retain(&keep);
        let mut second = cloud.clone();
        second.retain(&keep.iter().map(|k| !k).collect::<Vec<_>>());
        let joint = render(&[&first, &second], &cam, [0.2; 3]).unwrap();
        let single = render(&[&cloud], &cam, [0.2; 3]).unwrap();
        prop_assert_eq!(joint.image.data, single.image.data);
        prop_assert_eq!(joint.alpha, single.alpha);
    }

    #[test]
    fn storage_order_does_not_matter(seed in 0u64..1000) {
        let cam = camera_at(Vector3::new(0.0, 0.0, -6.0), 32, 45.0);
        let cloud = render_cloud(seed, 10);
        let mut reversed = GaussianCloud::empty(1);
        for i in (0..10).rev() {
            reversed.params.push_from(&cloud.params, i);
            reversed.visibility_counts.push(0);
        }
        let a = render(&[&cloud], &cam, [0.0; 3]).unwrap();
        let b = render(&[&reversed], &cam, [0.0; 3]).unwrap();
        prop_assert_eq!(a.image.data, b.image.data);
    }

    #[test]
    fn alpha_and_color_stay_in_range(seed in 0u64..1000) {
        let cam = camera_at(Vector3::new(0.0, 0.0, -5.0), 32, 50.0);
        let mut cloud = render_cloud(seed, 14);
        for v in &mut cloud.params.sh_dc {
            *v = v.clamp(-1.7, 1.7);
        }
        let out = render(&[&cloud], &cam, [1.0; 3]).unwrap();
        prop_assert!(out.alpha.iter().all(|&a| (0.0..=1.0).contains(&a)));
        prop_assert!(out.image.data.iter().all(|&c| (0.0..=1.0 + 1e-6).contains(&c)));
    }

    #[test]
    fn adding_an_opaque_gaussian_never_lowers_alpha(seed in 0u64..1000, p in vec3(-1.0, 1.0)) {
        let cam = camera_at(Vector3::new(0.0, 0.0, -6.0), 32, 45.0);
        let cloud = render_cloud(seed, 8);
        let mut more = cloud.clone();
        more.push(p, [1.0, 0.0, 0.0, 0.0], Vector3::repeat(0.4f64.ln()), 0.99, [1.0, 0.0, 0.0]);
        let a = render(&[&cloud], &cam, [0.0; 3]).unwrap();
        let b = render(&[&more], &cam, [0.0; 3]).unwrap();
        for (x, y) in a.alpha.iter().zip(&b.alpha) {
            prop_assert!(*y >= x - 1e-4);
        }
    }

    #[test]
    fn gaussians_behind_the_camera_are_never_visible(seed in 0u64..1000) {
        let cam = camera_at(Vector3::new(0.0, 0.0, -6.0), 32, 45.0);
        let mut cloud = render_cloud(seed, 6);
        for i in 0..cloud.len() {
            let p = cloud.position(i);
            cloud.set_position(i, Vector3::new(p.x, p.y, -9.0 + p.z));
        }
        for _ in 0..3 {
            let out = render(&[&cloud], &cam, [0.0; 3]).unwrap();
            cloud.record_visibility(&out.visible[0]);
        }
        prop_assert!(cloud.visibility_counts.iter().all(|&v| v == 0));
    }
}

fn distance_map(values: Vec<f64>, w: usize) -> DistanceMap {
    DistanceMap { width: w, height: values.len() / w, values, view: 0 }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn masks_partition_pixels(values in prop::collection::vec(0.0f64..30.0, 64), r in 1.0f64..20.0) {
        let shell = SceneShell::new(Vector3::zeros(), r, 40.0).unwrap();
        let res = segment(&[distance_map(values.clone(), 8)], &SparsePointCloud::default(), &shell).unwrap();
        let mask = &res.masks[0];
        let background = mask.count();
        let foreground = values.iter().filter(|&&d| d <= r).count();
        prop_assert_eq!(background + foreground, values.len());
        for (k, &d) in values.iter().enumerate() {
            prop_assert_eq!(mask.data[k], d > r);
        }
    }

    #[test]
    fn raising_the_threshold_never_drops_foreground_points(seed in 0u64..1000, r in 1.0f64..10.0, dr in 0.0f64..10.0) {
        let mut g = rng(seed);
        let mut pts = SparsePointCloud::default();
        for _ in 0..50 {
            pts.push(Vector3::new(g.random_range(-20.0..20.0), g.random_range(-20.0..20.0), g.random_range(-20.0..20.0)), [0.5; 3], vec![0]);
        }
        let small = segment(&[], &pts, &SceneShell::new(Vector3::zeros(), r, 40.0).unwrap()).unwrap();
        let large = segment(&[], &pts, &SceneShell::new(Vector3::zeros(), r + dr, 40.0).unwrap()).unwrap();
        for p in &small.foreground_points.points {
            prop_assert!(large.foreground_points.points.contains(p));
        }
        for p in &large.foreground_points.points {
            prop_assert!(p.norm() <= r + dr);
        }
    }

    #[test]
    fn distance_from_the_camera_center_is_the_ray_depth(q in quat(), c in vec3(-5.0, 5.0), seed in 0u64..1000) {
        let mut cam = camera_at(Vector3::new(0.0, 0.0, -1.0), 12, 60.0);
        let r = rotation::to_matrix(q);
        cam.pose = shellsplat::model::Pose::from_axes(
            c,
            r.column(0).into_owned(),
            r.column(1).into_owned(),
            r.column(2).into_owned(),
        );
        let mut g = rng(seed);
        let depth = FloatMap { width: 12, height: 12, data: (0..144).map(|_| g.random_range(0.5f32..50.0)).collect() };
        let m = distance_map_from(&cam, &depth, 0, &cam.center(), DepthConvention::RayDepth).unwrap();
        for (d, v) in depth.data.iter().zip(&m.values) {
            prop_assert!((*d as f64 - v).abs() <= 1e-12 * v);
        }
    }

    #[test]
    fn noiseless_scale_is_recovered(eighths in 1u32..64, seed in 0u64..1000) {
        let s = eighths as f64 / 8.0;
        let mut cam = camera_at(Vector3::new(0.0, 0.0, -1.0), 32, 60.0);
        cam.pose = shellsplat::model::Pose::identity();
        let mut g = rng(seed);
        let mut depth = FloatMap::filled(32, 32, 1.0);
        let mut pts = SparsePointCloud::default();
        for k in 0..30 {
            let (u, v) = ((k * 7) % 32, (k * 3 + k / 11) % 32);
            let z = g.random_range(1u32..64) as f64;
            let ray = cam.ray_camera(u as f64 + 0.5, v as f64 + 0.5);
            pts.push(ray / ray.z * z, [0.5; 3], vec![0]);
            depth.data[v * 32 + u] = (s * z) as f32;
        }
        let got = align_scale(&pts, &[cam], &[Some(depth)]).unwrap();
        prop_assert!((got - s).abs() <= 1e-9 * s);
    }

    #[test]
    fn split_manifest_partitions_views(n in 5usize..200, seed in any::<u64>()) {
        let m = split(n, seed).unwrap();
        prop_assert_eq!(m.test.len(), (0.2 * n as f64).round() as usize);
        let mut all: Vec<usize> = m.train.iter().chain(&m.test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn pfm_round_trip_is_bit_exact(w in 1usize..9, h in 1usize..9, seed in any::<u64>(), le in any::<bool>()) {
        let mut g = rng(seed);
        let map = FloatMap { width: w, height: h, data: (0..w * h).map(|_| g.random_range(1e-3f32..1e4)).collect() };
        let back = decode_pfm(&encode_pfm(&map, le)).unwrap();
        prop_assert_eq!(back.data.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), map.data.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn ply_round_trip_is_bit_exact(seed in any::<u64>(), n in 0usize..20, degree in 0usize..4) {
        let mut g = rng(seed);
        let mut cloud = random_cloud(&mut g, n, degree, 3.0, 0.5);
        for v in cloud.params.positions.iter_mut()
            .chain(&mut cloud.params.rotations)
            .chain(&mut cloud.params.log_scales)
            .chain(&mut cloud.params.opacity_logits)
            .chain(&mut cloud.params.sh_dc)
            .chain(&mut cloud.params.sh_rest)
        {
            *v = *v as f32 as f64;
        }
        let mut bytes = Vec::new();
        ply::write(&cloud, &mut bytes).unwrap();
        let back = ply::read(&bytes[..]).unwrap();
        prop_assert_eq!(back.params, cloud.params);
    }
}

#[test]
fn icosphere_directions_are_unit_and_distinct() {
    for level in 0..5 {
        let ico = build_icosphere(level).unwrap();
        assert_eq!(ico.len(), 10 * 4usize.pow(level) + 2);
        for (i, d) in ico.directions.iter().enumerate() {
            assert!((d.norm() - 1.0).abs() < 1e-9);
            for e in &ico.directions[..i] {
                assert!((d - e).norm() > 1e-6);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn placement_stays_in_shell_and_is_seeded(seed in any::<u64>(), r_i in 1.0f64..10.0, d in 0.0f64..60.0) {
        let shell = SceneShell::new(Vector3::zeros(), r_i, 40.0).unwrap();
        let ico = build_icosphere(2).unwrap();
        let cams: Vec<_> = [Vector3::x(), -Vector3::x(), Vector3::z()]
            .iter()
            .map(|dir| camera_at(-dir * 0.5, 24, 90.0))
            .collect();
        let maps: Vec<_> = (0..cams.len()).map(|k| DistanceMap { width: 24, height: 24, values: vec![d; 576], view: k }).collect();
        for mode in [PlacementMode::Random, PlacementMode::DistanceBased] {
            let a = radial_placement(&ico.directions, &maps, &cams, &shell, mode, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            let b = radial_placement(&ico.directions, &maps, &cams, &shell, mode, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            prop_assert_eq!(&a.positions, &b.positions);
            for (k, p) in a.positions.iter().enumerate() {
                let r = p.norm();
                prop_assert!(r >= r_i - 1e-9 && r <= 40.0 + 1e-9);
                if mode == PlacementMode::DistanceBased && a.observed[k].is_some() && d > r_i && d < 40.0 {
                    prop_assert!((r - d).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn prune_leaves_no_violator(seed in any::<u64>()) {
        let shell = SceneShell::new(Vector3::zeros(), 2.0, 5.0).unwrap();
        let mut cloud = cloud_in_shell(40, shell, seed);
        let mut g = rng(seed);
        for i in 0..cloud.len() {
            cloud.params.opacity_logits[i] = g.random_range(-8.0..2.0);
            cloud.visibility_counts[i] = g.random_range(0..3);
        }
        let before = cloud.clone();
        let mut adam = Adam::new(&cloud);
        let report = prune(&mut cloud, &mut adam, None, 0.005, true, Some(&shell));
        prop_assert_eq!(report.removed_by_size, 0);
        prop_assert_eq!(report.total(), before.len() - cloud.len());
        prop_assert_eq!(adam.len(), cloud.len());
        let survivors: Vec<usize> = (0..before.len())
            .filter(|&i| before.opacity(i) >= 0.005 && before.visibility_counts[i] > 0 && before.position(i).norm() <= 2.0)
            .collect();
        prop_assert_eq!(survivors.len(), cloud.len());
        for (k, &i) in survivors.iter().enumerate() {
            prop_assert_eq!(cloud.position(k), before.position(i));
        }
    }
}

#[test]
fn clamped_splits_stay_in_shell() {
    let shell = SceneShell::new(Vector3::zeros(), 4.0, 5.0).unwrap();
    let mut cloud = GaussianCloud::empty(1);
    let mut r = rng(3);
    for _ in 0..1000 {
        let d = Vector3::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)).normalize();
        cloud.push(d * r.random_range(4.0..5.0), random_quat(&mut r), Vector3::repeat(0.8f64.ln()), 0.5, [0.5; 3]);
    }
    let mut adam = Adam::new(&cloud);
    let mut stats = GradStats::new(cloud.len());
    for i in 0..cloud.len() {
        stats.accum[i] = 1.0;
        stats.count[i] = 1;
    }
    let config = StageConfig { spatial_scale: 5.0, ..StageConfig::default() };
    let report = densify(&mut cloud, &mut adam, &stats, &config, Some(&shell), &mut ChaCha8Rng::seed_from_u64(0));
    assert_eq!(report.split, 1000);
    assert_eq!(cloud.len(), 2000);
    assert!((0..cloud.len()).all(|i| shell.contains(&cloud.position(i), 1e-12)));
    assert!((0..cloud.len()).all(|i| (cloud.scales(i).x - 0.5).abs() < 1e-12));
}

#[test]
fn adam_limits() {
    let mut cloud = GaussianCloud::empty(0);
    cloud.push(Vector3::new(1.0, 2.0, 3.0), [1.0, 0.0, 0.0, 0.0], Vector3::zeros(), 0.5, [0.5; 3]);
    let before = cloud.clone();
    let mut adam = Adam::new(&cloud);
    let zero = shellsplat::model::Params::zeros(1, 0);
    adam.step(&mut cloud, &zero, |_| 0.1);
    assert_eq!(cloud.params, before.params);

    let mut g = zero.clone();
    g.positions = vec![3.0, -0.5, 1e-3];
    let mut adam = Adam::new(&cloud);
    let mut prev = cloud.position(0);
    for _ in 0..200 {
        adam.step(&mut cloud, &g, |_| 0.01);
        let step = cloud.position(0) - prev;
        prev = cloud.position(0);
        for ax in 0..3 {
            assert!((step[ax] + 0.01 * g.positions[ax].signum()).abs() < 1e-9);
        }
    }
}

#[test]
fn metric_monotonicity() {
    let mut r = rng(1);
    let mut base = Image::new(32, 32);
    for v in &mut base.data {
        *v = r.random_range(0.2..0.8);
    }
    let noise: Vec<f64> = (0..base.data.len()).map(|_| r.random_range(-1.0..1.0)).collect();
    let mut last = f64::INFINITY;
    for amp in [0.01, 0.02, 0.05, 0.1] {
        let mut noisy = base.clone();
        for (v, n) in noisy.data.iter_mut().zip(&noise) {
            *v += amp * n;
        }
        let p = psnr(&noisy, &base).unwrap();
        assert!(p < last);
        last = p;
        assert_eq!(ssim(&noisy, &base).unwrap(), ssim(&base, &noisy).unwrap());
    }
    let mut dark = base.clone();
    for v in &mut dark.data {
        *v = v.powf(2.2);
    }
    assert!(ssim(&dark, &base).unwrap() < 1.0);
}

#[test]
fn envmap_is_rotation_equivariant() {
    let shell = SceneShell::new(Vector3::zeros(), 2.0, 8.0).unwrap();
    let cloud = cloud_in_shell(300, shell, 5);
    let rot = Rotation3::from_euler_angles(0.3, -0.7, 1.1);
    let q = rotation::from_matrix(rot.matrix());
    let mut turned = cloud.clone();
    for i in 0..turned.len() {
        turned.set_position(i, rot * cloud.position(i));
        let qi = rotation::mul(q, cloud.quaternion(i));
        turned.params.rotations[4 * i..4 * i + 4].copy_from_slice(&qi);
    }
    let mut opts = CubemapOptions::new(Vector3::zeros(), 0.0);
    opts.face_res = 24;
    let a = render_cubemap(&cloud, &shell, &opts).unwrap();
    opts.orientation = rot;
    let b = render_cubemap(&turned, &shell, &opts).unwrap();
    for (fa, fb) in a.faces.iter().zip(&b.faces) {
        let worst = fa.data.iter().zip(&fb.data).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-6, "face differs by {worst}");
    }
}
