//! Depth-scale alignment against independent oracles: a brute-force grid
//! scan of the L1 objective, the weighted-median closed form, and central
//! finite differences for the gradient.

use panosplat_core::geometry::{intrinsics_from_fov, Intrinsics};
use panosplat_core::pointcloud::{
    align_scale_gd, align_scale_median, alignment_loss, CoverageMask, DepthMap,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Ray length of pixel (x, y): the weight the alignment objective uses.
fn ray_len(k: &Intrinsics, x: usize, y: usize) -> f64 {
    let rx = (x as f64 + 0.5 - k.cx) / k.fx;
    let ry = (y as f64 + 0.5 - k.cy) / k.fy;
    (rx * rx + ry * ry + 1.0).sqrt()
}

/// Builds a 1-row instance realizing the given (ratio, weight) samples,
/// where weight means `ray_len * depth`.
fn instance_from_samples(samples: &[(f64, f64)]) -> (DepthMap, CoverageMask, Intrinsics) {
    let w = samples.len();
    let k = intrinsics_from_fov(60.0, w, 1).unwrap();
    let mut depth = vec![0.0; w];
    let mut refd = vec![0.0; w];
    for (x, &(ratio, weight)) in samples.iter().enumerate() {
        let rl = ray_len(&k, x, 0);
        depth[x] = weight / rl;
        refd[x] = ratio * depth[x];
    }
    (
        DepthMap::from_values(w, 1, depth),
        CoverageMask::from_parts(w, 1, vec![true; w], refd),
        k,
    )
}

/// Brute-force oracle: scan the objective over a dense scale grid.
fn grid_scan_minimizer(depth: &DepthMap, mask: &CoverageMask, k: &Intrinsics) -> f64 {
    let mut best = (f64::INFINITY, 0.0);
    let mut d = 0.1;
    while d <= 10.0 {
        let (loss, _) = alignment_loss(d, depth, mask, k).unwrap();
        if loss < best.0 {
            best = (loss, d);
        }
        d += 1e-4;
    }
    best.1
}

#[test]
fn median_matches_grid_scan_on_equal_weights() {
    let (depth, mask, k) = instance_from_samples(&[(1.0, 1.0), (2.0, 1.0), (3.0, 1.0)]);
    let grid = grid_scan_minimizer(&depth, &mask, &k);
    assert!((grid - 2.0).abs() < 2e-4, "grid scan minimizer {grid}");
    let r = align_scale_median(&depth, &mask, &k).unwrap();
    assert!((r.scale - 2.0).abs() < 1e-12);
}

#[test]
fn median_matches_grid_scan_on_weighted_instance() {
    let (depth, mask, k) = instance_from_samples(&[(1.0, 3.0), (4.0, 1.0)]);
    let grid = grid_scan_minimizer(&depth, &mask, &k);
    assert!((grid - 1.0).abs() < 2e-4, "grid scan minimizer {grid}");
    let r = align_scale_median(&depth, &mask, &k).unwrap();
    assert!((r.scale - 1.0).abs() < 1e-12);
}

#[test]
fn gd_converges_to_the_weighted_median() {
    let (depth, mask, k) = instance_from_samples(&[(1.0, 1.0), (2.0, 1.0), (3.0, 1.0)]);
    let r = align_scale_gd(&depth, &mask, &k, 0.05, 500, 1e-7).unwrap();
    assert!((r.scale - 2.0).abs() < 1e-3, "gd scale {}", r.scale);
}

fn random_instance(seed: u64, w: usize, h: usize) -> (DepthMap, CoverageMask, Intrinsics) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = intrinsics_from_fov(90.0, w, h).unwrap();
    let n = w * h;
    let mut depth = vec![0.0; n];
    let mut refd = vec![0.0; n];
    let mut covered = vec![false; n];
    for i in 0..n {
        depth[i] = rng.gen_range(0.5..3.0);
        if rng.gen_bool(0.7) {
            covered[i] = true;
            refd[i] = depth[i] * rng.gen_range(0.25..4.0);
        } else {
            refd[i] = 0.0;
        }
    }
    (
        DepthMap::from_values(w, h, depth),
        CoverageMask::from_parts(w, h, covered, refd),
        k,
    )
}

#[test]
fn gradient_matches_finite_differences() {
    // The objective is piecewise linear in the scale, so away from the
    // kinks a central difference is exact up to roundoff.
    let h = 1e-7;
    for seed in 0..5u64 {
        let (depth, mask, k) = random_instance(seed, 32, 32);
        for &d0 in &[0.6f64, 1.0, 1.37, 2.9] {
            // Nudge the probe away from any kink: each sample's kink sits
            // at d = ref/depth.
            let mut d = d0;
            let near_kink = |d: f64| {
                depth
                    .values()
                    .iter()
                    .zip(mask.covered())
                    .zip(mask.ref_depth())
                    .filter(|((_, &c), _)| c)
                    .any(|((&dp, _), &rp)| (rp / dp - d).abs() < 10.0 * h)
            };
            while near_kink(d) {
                d += 3e-4;
            }
            let (_, grad) = alignment_loss(d, &depth, &mask, &k).unwrap();
            let (lp, _) = alignment_loss(d + h, &depth, &mask, &k).unwrap();
            let (lm, _) = alignment_loss(d - h, &depth, &mask, &k).unwrap();
            let fd = (lp - lm) / (2.0 * h);
            let rel = (grad - fd).abs() / grad.abs().max(fd.abs()).max(1e-12);
            assert!(rel < 1e-6, "seed {seed} d {d}: analytic {grad} vs fd {fd} (rel {rel})");
        }
    }
}

#[test]
fn gd_agrees_with_median_on_random_instances() {
    for seed in 10..20u64 {
        let (depth, mask, k) = random_instance(seed, 16, 16);
        assert!(mask.n_covered() >= 100);
        let med = align_scale_median(&depth, &mask, &k).unwrap();
        let gd = align_scale_gd(&depth, &mask, &k, 0.05, 500, 1e-7).unwrap();
        assert!(
            (gd.scale - med.scale).abs() <= 1e-3,
            "seed {seed}: gd {} vs median {}",
            gd.scale,
            med.scale
        );
        assert!(gd.final_loss >= med.final_loss - 1e-9, "median is the minimizer");
    }
}

#[test]
fn loss_is_convex_in_the_scale() {
    for seed in 30..35u64 {
        let (depth, mask, k) = random_instance(seed, 16, 16);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xfeed);
        for _ in 0..50 {
            let mut ds = [
                rng.gen_range(0.05..8.0),
                rng.gen_range(0.05..8.0),
                rng.gen_range(0.05..8.0),
            ];
            ds.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
            let l1 = alignment_loss(ds[0], &depth, &mask, &k).unwrap().0;
            let l2 = alignment_loss(ds[1], &depth, &mask, &k).unwrap().0;
            let l3 = alignment_loss(ds[2], &depth, &mask, &k).unwrap().0;
            assert!(l2 <= l1.max(l3) + 1e-12, "midpoint above endpoints: {ds:?}");
        }
    }
}

#[test]
fn alignment_is_scale_equivariant() {
    for seed in 40..44u64 {
        let (depth, mask, k) = random_instance(seed, 16, 16);
        let base_med = align_scale_median(&depth, &mask, &k).unwrap().scale;
        let base_gd = align_scale_gd(&depth, &mask, &k, 0.05, 500, 1e-7).unwrap().scale;
        // Power-of-two scaling is exact in floating point.
        for &s in &[2.0f64, 0.5] {
            let scaled = depth.scaled(s);
            let med = align_scale_median(&scaled, &mask, &k).unwrap().scale;
            assert_eq!(med, base_med / s, "median equivariance at s {s}");
            let gd = align_scale_gd(&scaled, &mask, &k, 0.05, 500, 1e-7).unwrap().scale;
            assert!(
                (gd - base_gd / s).abs() < 1e-3,
                "gd equivariance at s {s}: {gd} vs {}",
                base_gd / s
            );
        }
    }
}
