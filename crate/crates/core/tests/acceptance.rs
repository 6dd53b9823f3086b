//! Acceptance suite: one test per criterion, each printing a pass line and
//! holding its stated tolerance and time budget.

mod common;

use common::*;
use dtf_core::binning::{lid_continuous, lid_delta, lid_depth_of, lid_edges, lid_index};
use dtf_core::lifting::{
    collapse_to_bev, expand_from_bev, lift_features, occupancy_gate, sample_to_voxels,
    OccupancyField, SamplingOptions,
};
use dtf_core::occupancy::{
    box_labels, hit_voxel, point_cloud_labels, point_in_box, shrink_box, traverse_ray,
    union_labels, LabelState, OccupancyLabelGrid, PointCloud,
};
use dtf_core::repr::{
    encode_one_hot, extension_mask, normalize_distribution, thickness_focal_loss, DepthVolume,
    DistributionVolume, FocalParams, ThicknessField,
};
use dtf_core::types::{BinSpec, DepthMap, FeaturePlane, FrustumGrid, GridSpec};
use dtf_core::Tensor;
use rand::Rng;
use std::collections::HashSet;
use std::time::Instant;

fn report(criterion: u32, name: &str, start: Instant, budget_s: f64) {
    let elapsed = start.elapsed().as_secs_f64();
    assert!(
        elapsed < budget_s,
        "criterion {criterion} took {elapsed:.3}s, budget {budget_s}s"
    );
    println!("acceptance criterion {criterion} ({name}): PASS in {elapsed:.3}s");
}

#[test]
fn criterion_1_grid_geometry() {
    let spec = GridSpec::new([2.0, 46.8], [-30.08, 30.08], [-3.0, 1.0], 0.16).unwrap();
    let start = Instant::now();
    let dims = spec.dims().unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    assert_eq!(dims, [280, 376, 25]);
    assert!(elapsed < 1e-3, "grid_dims took {elapsed}s, budget 1ms");
    println!("acceptance criterion 1 (grid geometry): PASS in {elapsed:.6}s");
}

#[test]
fn criterion_2_lid_suite() {
    let start = Instant::now();
    let spec = BinSpec::new(2.0, 46.8, 80).unwrap();
    let delta = lid_delta(&spec);
    let edges = lid_edges(&spec);

    // Width growth: successive widths differ by exactly delta (1e-9).
    for i in 0..spec.num_bins - 1 {
        let growth = edges.width(i + 1) - edges.width(i);
        assert!((growth - delta).abs() <= 1e-9, "bin {i}: growth {growth}");
    }

    // Round trip within 1e-6 relative, and monotonicity with an ulp guard.
    let mut r = rng(2);
    let mut prev: Option<(f64, f64)> = None;
    for _ in 0..10_000 {
        let z = r.gen_range(spec.d_min..=spec.d_max);
        let c = lid_continuous(z, &spec);
        assert!(!c.out_of_range);
        let back = lid_depth_of(c.value, &spec).unwrap();
        assert!((back - z).abs() <= 1e-6 * z.abs(), "z = {z}, back = {back}");
        if let Some((pz, pc)) = prev {
            if (z - pz).abs() >= 1e-9 * (1.0 + pz.abs()) {
                assert_eq!(z > pz, c.value > pc, "monotonicity at {pz} vs {z}");
            }
        }
        prev = Some((z, c.value));
    }

    // 10^4 random samples agree with the accumulation + edge-scan oracle.
    let oracle_edges = oracle_lid_edges(&spec);
    for _ in 0..10_000 {
        let z = r.gen_range(spec.d_min..=spec.d_max);
        assert_eq!(
            lid_index(z, &spec).value,
            oracle_lid_index(z, &oracle_edges),
            "z = {z}"
        );
    }

    report(2, "LID suite", start, 1.0);
}

#[test]
fn criterion_3_representation_suite() {
    let start = Instant::now();
    let mut r = rng(3);
    let spec = BinSpec::new(2.0, 10.0, 12).unwrap();

    // One-hot exactness on random depth maps (with sentinel holes).
    for _ in 0..20 {
        let (w, h) = (r.gen_range(1..6), r.gen_range(1..6));
        let data: Vec<f32> = (0..w * h)
            .map(|_| {
                if r.gen_bool(0.3) {
                    0.0
                } else {
                    r.gen_range(2.0..10.0)
                }
            })
            .collect();
        let map = DepthMap::new(w, h, data).unwrap();
        let oh = encode_one_hot(&map, &spec).unwrap();
        for u in 0..w {
            for v in 0..h {
                let ray = oh.volume().ray(u, v);
                let ones = ray.iter().filter(|&&x| x == 1.0).count();
                let zeros = ray.iter().filter(|&&x| x == 0.0).count();
                assert_eq!(ones + zeros, ray.len(), "entries must be binary");
                assert_eq!(ones, if map.is_valid(u, v) { 1 } else { 0 });
            }
        }
    }

    // Distribution normalization within 1e-5.
    for _ in 0..20 {
        let d = r.gen_range(2..16);
        let logits: Vec<f32> = (0..2 * 2 * d).map(|_| r.gen_range(-8.0..8.0)).collect();
        let dist =
            normalize_distribution(&DepthVolume::new(2, 2, d, logits).unwrap()).unwrap();
        for u in 0..2 {
            for v in 0..2 {
                let sum: f64 = dist.volume().ray(u, v).iter().map(|&p| p as f64).sum();
                assert!((sum - 1.0).abs() < 1e-5);
                assert!(dist.volume().ray(u, v).iter().all(|&p| p >= 0.0));
            }
        }
    }

    // Capacity property, both directions: two saturated bins are a valid
    // thickness field but not a distribution.
    let mut volume = DepthVolume::zeros(1, 1, 8).unwrap();
    volume.set(0, 0, 3, 1.0);
    volume.set(0, 0, 4, 1.0);
    assert!(ThicknessField::from_volume(volume.clone()).is_ok());
    assert!(DistributionVolume::from_volume(volume).is_err());

    // Mask fixture: D = 7, bin 3, radius 1.
    let mut oh_vol = DepthVolume::zeros(1, 1, 7).unwrap();
    oh_vol.set(0, 0, 3, 1.0);
    let oh = dtf_core::repr::OneHotVolume::from_volume(oh_vol).unwrap();
    let mask = extension_mask(&oh, 1);
    assert_eq!(mask.volume().ray(0, 0), &[1.0, 1.0, 0.0, 1.0, 0.0, 1.0, 1.0]);

    report(3, "representation suite", start, 1.0);
}

#[test]
fn criterion_4_loss_gradient() {
    let start = Instant::now();
    let params = FocalParams::default();
    let mut r = rng(4);

    // 100 random (pred, target, mask) instances of shape 4x4x8.
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let inst = random_loss_instance(&mut r, 4, 4, 8);
        let rel = fd_max_rel_error(&inst.pred, &inst.target, &inst.mask, &params, 1e-4);
        worst = worst.max(rel);
    }
    assert!(worst < 1e-5, "max relative FD error {worst}");

    // Perfect prediction: loss exactly 0 (mask-0 band forced off target).
    let inst = random_loss_instance(&mut r, 4, 4, 8);
    let perfect = ThicknessField::from_volume(inst.target.clone()).unwrap();
    let out = thickness_focal_loss(&perfect, &inst.target, &inst.mask, &params).unwrap();
    assert_eq!(out.loss, 0.0);
    assert!(out.grad.data().iter().all(|&g| g == 0.0));

    // Mask-0 bins provably contribute nothing: perturbing them changes
    // neither the loss bits nor any mask-1 gradient bit.
    let inst = random_loss_instance(&mut r, 4, 4, 8);
    let base = thickness_focal_loss(&inst.pred, &inst.target, &inst.mask, &params).unwrap();
    let mut perturbed = inst.pred.volume().clone();
    let mut touched = 0;
    for i in 0..perturbed.data().len() {
        if inst.mask.volume().data()[i] == 0.0 {
            perturbed.data_mut()[i] = 0.987;
            touched += 1;
        }
    }
    assert!(touched > 0, "instance must contain mask-0 bins");
    let pert = thickness_focal_loss(
        &ThicknessField::from_volume(perturbed).unwrap(),
        &inst.target,
        &inst.mask,
        &params,
    )
    .unwrap();
    assert_eq!(base.loss.to_bits(), pert.loss.to_bits());
    for i in 0..base.grad.data().len() {
        if inst.mask.volume().data()[i] == 0.0 {
            assert_eq!(base.grad.data()[i], 0.0);
            assert_eq!(pert.grad.data()[i], 0.0);
        } else {
            assert_eq!(base.grad.data()[i].to_bits(), pert.grad.data()[i].to_bits());
        }
    }

    report(4, "loss/gradient", start, 10.0);
}

#[test]
fn criterion_5_lift_sample_gate_bev() {
    let start = Instant::now();
    let mut r = rng(5);
    let scene = small_scene();

    // Outer-product lifting matches a scalar triple loop exactly.
    let w_data: Vec<f32> = (0..4 * 3 * 6).map(|_| r.gen_range(0.0..1.0)).collect();
    let f_data: Vec<f32> = (0..4 * 3 * 5).map(|_| r.gen_range(-2.0..2.0)).collect();
    let weights = DepthVolume::new(4, 3, 6, w_data).unwrap();
    let features = FeaturePlane::new(4, 3, 5, f_data).unwrap();
    let lifted = lift_features(&weights, &features).unwrap();
    for u in 0..4 {
        for v in 0..3 {
            for d in 0..6 {
                for c in 0..5 {
                    assert_eq!(
                        lifted.at(u, v, d, c),
                        weights.at(u, v, d) * features.at(u, v, c),
                        "lift mismatch at ({u},{v},{d},{c})"
                    );
                }
            }
        }
    }

    // Grid sampling matches the brute-force per-voxel oracle on an 8x8
    // feature plane and a 20^3 grid, max abs diff < 1e-6.
    let channels = 3;
    let frustum_data: Vec<f32> = (0..scene.feat_w * scene.feat_h * scene.bins.num_bins * channels)
        .map(|_| r.gen_range(0.0..1.0))
        .collect();
    let frustum = FrustumGrid::new(
        scene.feat_w,
        scene.feat_h,
        scene.bins.num_bins,
        channels,
        frustum_data,
    )
    .unwrap();
    let voxels = sample_to_voxels(
        &frustum,
        &scene.calib,
        &scene.grid,
        &scene.bins,
        scene.stride,
        &SamplingOptions::default(),
    )
    .unwrap();
    let dims = voxels.dims();
    assert_eq!(dims, [20, 20, 20]);
    let mut max_diff = 0.0f64;
    let mut nonzero = 0usize;
    for i in 0..dims[0] {
        for j in 0..dims[1] {
            for k in 0..dims[2] {
                let want = oracle_sample_voxel(
                    &frustum,
                    &scene.calib,
                    &scene.grid,
                    &scene.bins,
                    scene.stride,
                    [i, j, k],
                );
                for (c, want_c) in want.iter().enumerate() {
                    let got = voxels.at(i, j, k, c) as f64;
                    max_diff = max_diff.max((got - want_c).abs());
                    if got != 0.0 {
                        nonzero += 1;
                    }
                }
            }
        }
    }
    assert!(max_diff < 1e-6, "sampling oracle max diff {max_diff}");
    assert!(nonzero > 1000, "scene should populate many voxels");

    // Gate identity and annihilation.
    let ones = OccupancyField::new(dims, vec![1.0; 8000]).unwrap();
    let zeros = OccupancyField::new(dims, vec![0.0; 8000]).unwrap();
    let gated_ones = occupancy_gate(&voxels, &ones).unwrap();
    assert_eq!(gated_ones.data(), voxels.data());
    let gated_zeros = occupancy_gate(&voxels, &zeros).unwrap();
    assert!(gated_zeros.data().iter().all(|&x| x == 0.0));

    // BEV collapse is a bit-exact bijection.
    let bev = collapse_to_bev(&voxels);
    assert_eq!(bev.channels(), dims[2] * channels);
    let back = expand_from_bev(&bev).unwrap();
    assert_eq!(back.data(), voxels.data());
    for i in 0..dims[0] {
        for j in 0..dims[1] {
            for k in 0..dims[2] {
                for c in 0..channels {
                    assert_eq!(
                        bev.at(i, j, k * channels + c).to_bits(),
                        voxels.at(i, j, k, c).to_bits()
                    );
                }
            }
        }
    }

    report(5, "lift/sample/gate/BEV", start, 30.0);
}

#[test]
fn criterion_6_occupancy_labels() {
    let start = Instant::now();
    let mut r = rng(6);
    let grid = GridSpec::new([2.0, 6.0], [-2.0, 2.0], [-2.0, 2.0], 0.2).unwrap();
    let step = grid.voxel_size / 20.0;

    // 6a: DDA vs dense sampling on 1000 random rays.
    for ray_i in 0..1000 {
        let origin = [
            r.gen_range(0.0..8.0),
            r.gen_range(-3.0..3.0),
            r.gen_range(-3.0..3.0),
        ];
        let endpoint = [
            r.gen_range(0.0..8.0),
            r.gen_range(-3.0..3.0),
            r.gen_range(-3.0..3.0),
        ];
        if origin == endpoint {
            continue;
        }
        let passed = traverse_ray(origin, endpoint, &grid).unwrap();
        let mut dda: HashSet<[usize; 3]> = passed.iter().copied().collect();
        if let Some(hit) = hit_voxel(endpoint, &grid) {
            dda.insert(hit);
        }
        let dense = dense_ray_cells(origin, endpoint, &grid, step);
        for cell in dense.difference(&dda) {
            let chord = chord_length(origin, endpoint, &grid, *cell);
            assert!(
                chord < 1e-9,
                "ray {ray_i}: oracle-only cell {cell:?} has chord {chord}"
            );
        }
        for cell in dda.difference(&dense) {
            let chord = chord_length(origin, endpoint, &grid, *cell);
            assert!(
                chord > 0.0 && chord < step + 1e-12,
                "ray {ray_i}: dda-only cell {cell:?} has chord {chord}"
            );
        }
    }

    // 6b: point-cloud labels vs brute-force labeling on a 500-point cloud.
    let origin = [0.0, 0.1, 0.3];
    let points: Vec<[f64; 3]> = (0..500)
        .map(|_| {
            if r.gen_bool(0.9) {
                [
                    r.gen_range(2.0..6.0),
                    r.gen_range(-2.0..2.0),
                    r.gen_range(-2.0..2.0),
                ]
            } else {
                [
                    r.gen_range(6.0..9.0),
                    r.gen_range(-3.0..3.0),
                    r.gen_range(-3.0..3.0),
                ]
            }
        })
        .collect();
    let cloud = PointCloud::new(points.clone());
    let labels = point_cloud_labels(&cloud, origin, &grid).unwrap();

    // Brute force: per-voxel point binning plus dense ray sampling.
    let dims = grid.dims().unwrap();
    let flat = |c: [usize; 3]| (c[0] * dims[1] + c[1]) * dims[2] + c[2];
    let mut occ = vec![false; dims[0] * dims[1] * dims[2]];
    for p in &points {
        if let Some(idx) = grid.voxel_index(*p) {
            occ[flat(idx)] = true;
        }
    }
    let mut free = vec![false; occ.len()];
    for p in &points {
        for cell in dense_ray_cells(origin, *p, &grid, step) {
            if Some(cell) != grid.voxel_index(*p) {
                free[flat(cell)] = true;
            }
        }
    }
    for i in 0..dims[0] {
        for j in 0..dims[1] {
            for k in 0..dims[2] {
                let cell = [i, j, k];
                let want = if occ[flat(cell)] {
                    LabelState::Occupied
                } else if free[flat(cell)] {
                    LabelState::Free
                } else {
                    LabelState::Unknown
                };
                let got = labels.at(cell);
                if got == want {
                    continue;
                }
                // Resolution mismatches: verify with exact chords.
                match (got, want) {
                    (LabelState::Free, LabelState::Unknown) => {
                        let found = points.iter().any(|p| {
                            let c = chord_length(origin, *p, &grid, cell);
                            c > 0.0 && c < step + 1e-12
                        });
                        assert!(found, "cell {cell:?}: impl FREE without a sub-step chord");
                    }
                    (LabelState::Unknown, LabelState::Free) => {
                        let max_chord = points
                            .iter()
                            .map(|p| chord_length(origin, *p, &grid, cell))
                            .fold(0.0f64, f64::max);
                        assert!(
                            max_chord < 1e-9,
                            "cell {cell:?}: oracle FREE with chord {max_chord}"
                        );
                    }
                    other => panic!("cell {cell:?}: {other:?} disagreement"),
                }
            }
        }
    }

    // 6c: box labels vs exhaustive per-center containment on 50 random boxes.
    let boxes: Vec<_> = (0..50).map(|_| random_box(&mut r, &grid)).collect();
    let scale = 0.8;
    let box_grid = box_labels(&boxes, scale, &grid).unwrap();
    let shrunk: Vec<_> = boxes.iter().map(|b| shrink_box(b, scale).unwrap()).collect();
    for i in 0..dims[0] {
        for j in 0..dims[1] {
            for k in 0..dims[2] {
                let center = grid.center_of([i, j, k]);
                let inside = shrunk.iter().any(|b| oracle_point_in_box(center, b));
                let want = if inside {
                    LabelState::Occupied
                } else {
                    LabelState::Unknown
                };
                assert_eq!(box_grid.at([i, j, k]), want, "voxel ({i},{j},{k})");
            }
        }
    }

    // 6d: union lattice laws and OCCUPIED monotonicity vs points-only.
    let union = union_labels(&labels, &box_grid).unwrap();
    let union_swapped = union_labels(&box_grid, &labels).unwrap();
    assert_eq!(union, union_swapped, "union must be commutative");
    let third = {
        let mut g = OccupancyLabelGrid::unknown(grid).unwrap();
        g.set([3, 3, 3], LabelState::Free);
        g.set([4, 4, 4], LabelState::Occupied);
        g
    };
    let assoc_l = union_labels(&union_labels(&labels, &box_grid).unwrap(), &third).unwrap();
    let assoc_r = union_labels(&labels, &union_labels(&box_grid, &third).unwrap()).unwrap();
    assert_eq!(assoc_l, assoc_r, "union must be associative");
    assert_eq!(
        union_labels(&labels, &labels).unwrap(),
        labels,
        "union must be idempotent"
    );
    let unknown = OccupancyLabelGrid::unknown(grid).unwrap();
    assert_eq!(union_labels(&labels, &unknown).unwrap(), labels);
    assert!(
        union.count(LabelState::Occupied) >= labels.count(LabelState::Occupied),
        "boxes must never decrease OCCUPIED"
    );

    report(6, "occupancy labels", start, 60.0);
}

#[test]
fn criterion_7_shrink_band() {
    let start = Instant::now();
    let grid = GridSpec::new([2.0, 6.0], [-2.0, 2.0], [-2.0, 2.0], 0.2).unwrap();
    let fixture =
        dtf_core::occupancy::OrientedBox3D::new([4.0, 0.0, 0.0], 1.4, 1.6, 3.5, 0.7).unwrap();

    let full = box_labels(&[fixture], 1.0, &grid).unwrap();
    let shrunk = box_labels(&[fixture], 0.8, &grid).unwrap();
    let small_box = shrink_box(&fixture, 0.8).unwrap();

    let dims = grid.dims().unwrap();
    let mut removed = 0;
    for i in 0..dims[0] {
        for j in 0..dims[1] {
            for k in 0..dims[2] {
                let cell = [i, j, k];
                let in_full = full.at(cell) == LabelState::Occupied;
                let in_shrunk = shrunk.at(cell) == LabelState::Occupied;
                // Strict subset direction.
                if in_shrunk {
                    assert!(in_full, "voxel {cell:?} occupied at s=0.8 but not s=1.0");
                }
                // Removed voxels lie exactly in the boundary band.
                if in_full && !in_shrunk {
                    removed += 1;
                    let center = grid.center_of(cell);
                    assert!(point_in_box(center, &fixture));
                    assert!(!point_in_box(center, &small_box));
                }
            }
        }
    }
    assert!(removed > 0, "shrink must strictly remove boundary voxels");

    report(7, "shrink band", start, 1.0);
}

#[test]
fn criterion_8_io() {
    use dtf_core::kitti::{
        format_calib, format_labels, parse_calib, parse_labels, read_depth_png, read_velodyne,
        write_depth_png, write_velodyne, world_box_to_label,
    };
    let start = Instant::now();
    let mut r = rng(8);
    let dir = tempfile::tempdir().unwrap();

    // Calibration: round trip + each rejection.
    let calib = realistic_camera();
    let parsed = parse_calib(&format_calib(&calib)).unwrap();
    for (a, b) in calib.intrinsics.iter().zip(parsed.intrinsics.iter()) {
        assert!((a - b).abs() < 1e-9);
    }
    assert!(matches!(
        parse_calib("R0_rect: 1 0 0 0 1 0 0 0 1\nTr_velo_to_cam: 1 0 0 0 0 1 0 0 0 0 1 0\n"),
        Err(dtf_core::Error::MissingKey { .. })
    ));
    assert!(matches!(
        parse_calib("P2: 1 2 3\nR0_rect: 1 0 0 0 1 0 0 0 1\nTr_velo_to_cam: 1 0 0 0 0 1 0 0 0 0 1 0\n"),
        Err(dtf_core::Error::WrongArity { .. })
    ));
    assert!(matches!(
        parse_calib("P2: a 0 0 0 0 1 0 0 0 0 1 0\nR0_rect: 1 0 0 0 1 0 0 0 1\nTr_velo_to_cam: 1 0 0 0 0 1 0 0 0 0 1 0\n"),
        Err(dtf_core::Error::MalformedNumber { .. })
    ));

    // Labels: fixture round trip + rejections.
    let b = dtf_core::occupancy::OrientedBox3D::new([14.0, -2.0, -0.7], 1.5, 1.7, 4.1, 0.4)
        .unwrap();
    let rec = world_box_to_label(&b, &calib, "Car").unwrap();
    let reparsed = parse_labels(&format_labels(std::slice::from_ref(&rec))).unwrap();
    assert_eq!(reparsed.len(), 1);
    assert_eq!(reparsed[0].category, "Car");
    assert!(matches!(
        parse_labels("Car 1 2 3\n"),
        Err(dtf_core::Error::WrongFieldCount { .. })
    ));
    assert!(matches!(
        parse_labels("Car x 0 -1.58 587 173 614 200 1.65 1.67 3.64 -0.65 1.71 46.7 -1.59\n"),
        Err(dtf_core::Error::MalformedNumber { .. })
    ));

    // Velodyne: bit-exact round trip + truncation.
    let cloud = PointCloud::new(
        (0..100)
            .map(|_| {
                [
                    // Values chosen representable in f32.
                    r.gen_range(-100i32..100) as f64 * 0.25,
                    r.gen_range(-100i32..100) as f64 * 0.25,
                    r.gen_range(-100i32..100) as f64 * 0.25,
                ]
            })
            .collect(),
    );
    let bytes = write_velodyne(&cloud);
    assert_eq!(read_velodyne(&bytes).unwrap(), cloud);
    assert!(matches!(
        read_velodyne(&bytes[..bytes.len() - 3]),
        Err(dtf_core::Error::TruncatedRecord { .. })
    ));

    // Depth PNG: convention values + rejections.
    let map = DepthMap::new(
        3,
        2,
        vec![1.0, 0.0, 65535.0 / 256.0, 2.5, 7.25, 46.75],
    )
    .unwrap();
    let png_path = dir.path().join("depth.png");
    write_depth_png(&map, &png_path).unwrap();
    let back = read_depth_png(&png_path).unwrap();
    assert_eq!(back.at(0, 0), 1.0); // raw 256 -> 1 m
    assert_eq!(back.at(0, 1), 0.0); // raw 0 -> sentinel
    assert_eq!(back.at(1, 0), 65535.0 / 256.0); // raw 65535 -> 255.996 m
    assert!(back.at(1, 0) > 200.0, "raw 65535 is far beyond any usable d_max");
    for u in 0..3 {
        for v in 0..2 {
            assert_eq!(back.at(u, v), map.at(u, v));
        }
    }

    let eight_bit = dir.path().join("gray8.png");
    {
        let file = std::fs::File::create(&eight_bit).unwrap();
        let mut enc = png::Encoder::new(std::io::BufWriter::new(file), 2, 2);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        enc.write_header()
            .unwrap()
            .write_image_data(&[0, 1, 2, 3])
            .unwrap();
    }
    assert!(matches!(
        read_depth_png(&eight_bit),
        Err(dtf_core::Error::WrongBitDepth { .. })
    ));

    let rgb16 = dir.path().join("rgb16.png");
    {
        let file = std::fs::File::create(&rgb16).unwrap();
        let mut enc = png::Encoder::new(std::io::BufWriter::new(file), 1, 1);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Sixteen);
        enc.write_header()
            .unwrap()
            .write_image_data(&[0, 1, 2, 3, 4, 5])
            .unwrap();
    }
    assert!(matches!(
        read_depth_png(&rgb16),
        Err(dtf_core::Error::WrongChannelCount { .. })
    ));

    // TensorBlob: bit-exact round trip on random tensors.
    for _ in 0..50 {
        let rank = r.gen_range(0..=4usize);
        let dims: Vec<u32> = (0..rank).map(|_| r.gen_range(1..6)).collect();
        let n: usize = dims.iter().product::<u32>() as usize;
        let data: Vec<f32> = (0..n.max(1)).map(|_| r.gen_range(-1e6..1e6)).collect();
        let t = Tensor::new(dims, data).unwrap();
        let path = dir.path().join("t.dtf");
        t.write_file(&path).unwrap();
        let back = Tensor::read_file(&path).unwrap();
        assert_eq!(back.dims(), t.dims());
        for (a, b) in t.data().iter().zip(back.data().iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    report(8, "KITTI + blob IO", start, 5.0);
}

#[test]
fn criterion_9_pipeline_determinism() {
    use dtf_core::kitti::format_calib;
    use std::process::Command;

    let start = Instant::now();
    let mut r = rng(9);
    let dir = tempfile::tempdir().unwrap();
    let scene = small_scene();

    // Synthetic scene on disk: depth (16x16 full res), features (8x8x3),
    // calibration, config.
    let depth_data: Vec<f32> = (0..16 * 16)
        .map(|i| {
            if i % 13 == 0 {
                0.0
            } else {
                r.gen_range(2.5..5.5)
            }
        })
        .collect();
    let depth_path = dir.path().join("depth.dtf");
    Tensor::new(vec![16, 16], depth_data)
        .unwrap()
        .write_file(&depth_path)
        .unwrap();

    let feat_data: Vec<f32> = (0..8 * 8 * 3).map(|_| r.gen_range(-1.0..1.0)).collect();
    let feat_path = dir.path().join("features.dtf");
    Tensor::new(vec![8, 8, 3], feat_data)
        .unwrap()
        .write_file(&feat_path)
        .unwrap();

    let calib_path = dir.path().join("calib.txt");
    std::fs::write(&calib_path, format_calib(&scene.calib)).unwrap();

    let config_path = dir.path().join("pipeline.cfg");
    std::fs::write(
        &config_path,
        "d_min=2\nd_max=6\nnum_bins=10\nx_min=2\nx_max=6\ny_min=-2\ny_max=2\nz_min=-2\nz_max=2\nvoxel_size=0.2\nfeature_stride=2\n",
    )
    .unwrap();

    let run = |tag: &str, threads: usize| -> (Vec<u8>, Vec<u8>) {
        let voxel = dir.path().join(format!("voxel_{tag}.dtf"));
        let bev = dir.path().join(format!("bev_{tag}.dtf"));
        let status = Command::new(env!("CARGO_BIN_EXE_dtf"))
            .args([
                "pipeline",
                "--depth",
                depth_path.to_str().unwrap(),
                "--features",
                feat_path.to_str().unwrap(),
                "--calib",
                calib_path.to_str().unwrap(),
                "--voxel-out",
                voxel.to_str().unwrap(),
                "--bev-out",
                bev.to_str().unwrap(),
                "--config",
                config_path.to_str().unwrap(),
                "--threads",
                &threads.to_string(),
            ])
            .status()
            .unwrap();
        assert!(status.success(), "pipeline run {tag} failed");
        (
            std::fs::read(&voxel).unwrap(),
            std::fs::read(&bev).unwrap(),
        )
    };

    let (v1a, b1a) = run("t1_a", 1);
    let (v1b, b1b) = run("t1_b", 1);
    let (v8a, b8a) = run("t8_a", 8);
    let (v8b, b8b) = run("t8_b", 8);

    assert_eq!(v1a, v1b, "voxel blobs differ across identical runs");
    assert_eq!(b1a, b1b, "bev blobs differ across identical runs");
    assert_eq!(v8a, v8b, "voxel blobs differ across identical 8-thread runs");
    assert_eq!(b8a, b8b, "bev blobs differ across identical 8-thread runs");
    assert_eq!(v1a, v8a, "voxel blobs differ between 1 and 8 threads");
    assert_eq!(b1a, b8a, "bev blobs differ between 1 and 8 threads");
    assert!(!v1a.is_empty() && !b1a.is_empty());

    report(9, "pipeline determinism", start, 30.0);
}
