//! RGBD lifting, cloud projection, coverage masking, depth-scale alignment,
//! and the cyclic multi-view fusion loop.
//!
//! Depth convention: all depth maps store z-depth (distance along the camera
//! +z axis), never ray length.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::geometry::{CameraPose, Intrinsics, PerspectiveView};
use crate::image::ImageRgb;
use crate::math::Vec3;

/// Per-view z-depths with a validity flag per pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
    valid: Vec<bool>,
}

impl DepthMap {
    /// Builds a depth map, marking non-finite or non-positive entries invalid.
    pub fn from_values(width: usize, height: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), width * height, "depth buffer size mismatch");
        let valid = values.iter().map(|&d| d.is_finite() && d > 0.0).collect();
        DepthMap { width, height, values, valid }
    }

    pub fn from_parts(width: usize, height: usize, values: Vec<f64>, valid: Vec<bool>) -> Self {
        assert_eq!(values.len(), width * height);
        assert_eq!(valid.len(), width * height);
        for (v, ok) in values.iter().zip(&valid) {
            if *ok {
                assert!(v.is_finite() && *v > 0.0, "valid depths must be finite and positive");
            }
        }
        DepthMap { width, height, values, valid }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    pub fn get(&self, x: usize, y: usize) -> Option<f64> {
        let i = y * self.width + x;
        self.valid[i].then(|| self.values[i])
    }

    /// Returns a copy with every valid depth multiplied by `scale`.
    pub fn scaled(&self, scale: f64) -> DepthMap {
        let values = self
            .values
            .iter()
            .zip(&self.valid)
            .map(|(&d, &ok)| if ok { d * scale } else { d })
            .collect();
        DepthMap { width: self.width, height: self.height, values, valid: self.valid.clone() }
    }

    pub fn n_valid(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }
}

/// World-space colored points tagged with the view that produced them.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub positions: Vec<Vec3>,
    pub colors: Vec<[f64; 3]>,
    pub view_ids: Vec<u32>,
}

impl PointCloud {
    pub fn new() -> Self {
        PointCloud::default()
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn push(&mut self, position: Vec3, color: [f64; 3], view_id: u32) {
        self.positions.push(position);
        self.colors.push(color);
        self.view_ids.push(view_id);
    }

    pub fn extend_from(&mut self, other: &PointCloud) {
        self.positions.extend_from_slice(&other.positions);
        self.colors.extend_from_slice(&other.colors);
        self.view_ids.extend_from_slice(&other.view_ids);
    }
}

/// Pixels of a view already explained by an existing cloud, with the
/// z-depth of the nearest projected point wherever covered.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageMask {
    width: usize,
    height: usize,
    covered: Vec<bool>,
    ref_depth: Vec<f64>,
}

impl CoverageMask {
    pub fn empty(width: usize, height: usize) -> Self {
        CoverageMask {
            width,
            height,
            covered: vec![false; width * height],
            ref_depth: vec![0.0; width * height],
        }
    }

    pub fn from_parts(width: usize, height: usize, covered: Vec<bool>, ref_depth: Vec<f64>) -> Self {
        assert_eq!(covered.len(), width * height);
        assert_eq!(ref_depth.len(), width * height);
        for (ok, d) in covered.iter().zip(&ref_depth) {
            if *ok {
                assert!(d.is_finite() && *d > 0.0, "covered pixels need a positive ref depth");
            }
        }
        CoverageMask { width, height, covered, ref_depth }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn covered(&self) -> &[bool] {
        &self.covered
    }

    pub fn ref_depth(&self) -> &[f64] {
        &self.ref_depth
    }

    pub fn is_covered(&self, x: usize, y: usize) -> bool {
        self.covered[y * self.width + x]
    }

    pub fn n_covered(&self) -> usize {
        self.covered.iter().filter(|&&c| c).count()
    }
}

/// Result of one depth-scale alignment solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignmentResult {
    /// The recovered depth scaling factor.
    pub scale: f64,
    /// Mean weighted L1 residual at the final scale, in world units.
    pub final_loss: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Back-projects every valid-depth pixel into a world point. Pixels covered
/// by `exclude` are skipped (the masked lift of the fusion loop).
pub fn lift_rgbd(
    image: &ImageRgb,
    depth: &DepthMap,
    intr: &Intrinsics,
    pose: &CameraPose,
    exclude: Option<&CoverageMask>,
    view_id: u32,
) -> Result<PointCloud> {
    if image.width() != intr.width
        || image.height() != intr.height
        || depth.width() != intr.width
        || depth.height() != intr.height
    {
        return Err(invalid("image, depth, and intrinsics dimensions must agree"));
    }
    if let Some(mask) = exclude {
        if mask.width() != intr.width || mask.height() != intr.height {
            return Err(invalid("exclusion mask dimensions must agree with the view"));
        }
    }
    let mut cloud = PointCloud::new();
    for y in 0..intr.height {
        for x in 0..intr.width {
            let Some(d) = depth.get(x, y) else { continue };
            if exclude.is_some_and(|m| m.is_covered(x, y)) {
                continue;
            }
            let p_cam = Vec3::new(
                d * (x as f64 + 0.5 - intr.cx) / intr.fx,
                d * (y as f64 + 0.5 - intr.cy) / intr.fy,
                d,
            );
            cloud.push(pose.cam_to_world(p_cam), image.get(x, y), view_id);
        }
    }
    Ok(cloud)
}

/// Cloud rasterized into a view: nearest-point color image, z-buffer, and
/// the coverage mask.
#[derive(Debug, Clone)]
pub struct Projection {
    pub image: ImageRgb,
    pub depth: DepthMap,
    pub mask: CoverageMask,
}

/// Z-buffer projection of a cloud. Points behind the camera (z <= 1e-6) are
/// skipped; each point claims the nearest pixel; depth ties keep the lowest
/// point index.
pub fn project_cloud(cloud: &PointCloud, intr: &Intrinsics, pose: &CameraPose) -> Projection {
    let (w, h) = (intr.width, intr.height);
    let mut image = ImageRgb::new(w, h);
    let mut zbuf = vec![f64::INFINITY; w * h];
    let mut covered = vec![false; w * h];
    for (idx, &p) in cloud.positions.iter().enumerate() {
        let c = pose.world_to_cam(p);
        if c.z <= 1e-6 {
            continue;
        }
        let u = intr.fx * c.x / c.z + intr.cx - 0.5;
        let v = intr.fy * c.y / c.z + intr.cy - 0.5;
        let xi = libm::floor(u + 0.5);
        let yi = libm::floor(v + 0.5);
        if xi < 0.0 || yi < 0.0 || xi >= w as f64 || yi >= h as f64 {
            continue;
        }
        let px = yi as usize * w + xi as usize;
        // Iterating in index order, a strict comparison keeps the lowest
        // index on exact ties.
        if c.z < zbuf[px] {
            zbuf[px] = c.z;
            covered[px] = true;
            image.set(xi as usize, yi as usize, cloud.colors[idx]);
        }
    }
    let ref_depth: Vec<f64> =
        zbuf.iter().map(|&z| if z.is_finite() { z } else { 0.0 }).collect();
    let depth = DepthMap::from_parts(w, h, ref_depth.clone(), covered.clone());
    let mask = CoverageMask::from_parts(w, h, covered, ref_depth);
    Projection { image, depth, mask }
}

/// Chebyshev dilation of the covered set. Newly covered pixels inherit the
/// depth of the nearest originally covered pixel (row-major scan order
/// breaks distance ties).
pub fn dilate_mask(mask: &CoverageMask, radius: usize) -> CoverageMask {
    if radius == 0 {
        return mask.clone();
    }
    let (w, h) = (mask.width, mask.height);
    let mut covered = mask.covered.clone();
    let mut ref_depth = mask.ref_depth.clone();
    let r = radius as i64;
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let px = y as usize * w + x as usize;
            if mask.covered[px] {
                continue;
            }
            'rings: for ring in 1..=r {
                for dy in -ring..=ring {
                    for dx in -ring..=ring {
                        if dx.abs().max(dy.abs()) != ring {
                            continue;
                        }
                        let (nx, ny) = (x + dx, y + dy);
                        if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                            continue;
                        }
                        let np = ny as usize * w + nx as usize;
                        if mask.covered[np] {
                            covered[px] = true;
                            ref_depth[px] = mask.ref_depth[np];
                            break 'rings;
                        }
                    }
                }
            }
        }
    }
    CoverageMask { width: w, height: h, covered, ref_depth }
}

/// One alignment sample: a pixel where the mask and the new view's depth
/// overlap. `ray_len` is the length of the unnormalized pixel ray
/// `((u+0.5-cx)/fx, (v+0.5-cy)/fy, 1)`, so `ray_len * |d*D - Dref|` is the
/// 3D distance between the two candidate points on the shared ray.
#[derive(Debug, Clone, Copy)]
struct AlignSample {
    depth: f64,
    ref_depth: f64,
    ray_len: f64,
}

fn gather_samples(depth: &DepthMap, mask: &CoverageMask, intr: &Intrinsics) -> Result<Vec<AlignSample>> {
    if depth.width() != intr.width
        || depth.height() != intr.height
        || mask.width() != intr.width
        || mask.height() != intr.height
    {
        return Err(invalid("depth, mask, and intrinsics dimensions must agree"));
    }
    let mut samples = Vec::new();
    for y in 0..intr.height {
        for x in 0..intr.width {
            if !mask.is_covered(x, y) {
                continue;
            }
            let Some(d) = depth.get(x, y) else { continue };
            let rx = (x as f64 + 0.5 - intr.cx) / intr.fx;
            let ry = (y as f64 + 0.5 - intr.cy) / intr.fy;
            let ray_len = libm::sqrt(rx * rx + ry * ry + 1.0);
            samples.push(AlignSample { depth: d, ref_depth: mask.ref_depth[y * intr.width + x], ray_len });
        }
    }
    if samples.is_empty() {
        return Err(Error::AlignmentImpossible { view: None });
    }
    Ok(samples)
}

fn loss_grad(samples: &[AlignSample], d: f64) -> (f64, f64) {
    let mut loss = 0.0;
    let mut grad = 0.0;
    for s in samples {
        let residual = d * s.depth - s.ref_depth;
        loss += s.ray_len * residual.abs();
        grad += s.ray_len * s.depth * sign(residual);
    }
    let n = samples.len() as f64;
    (loss / n, grad / n)
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Mean weighted L1 alignment objective and its derivative in the scale.
/// The per-pixel weight is the pixel ray length, making every summand the
/// 3D Euclidean distance between the scaled point and the reference point
/// on the shared ray.
pub fn alignment_loss(
    d: f64,
    depth: &DepthMap,
    mask: &CoverageMask,
    intr: &Intrinsics,
) -> Result<(f64, f64)> {
    if !(d > 0.0) {
        return Err(invalid("scale must be positive"));
    }
    let samples = gather_samples(depth, mask, intr)?;
    Ok(loss_grad(&samples, d))
}

/// Subgradient descent on the alignment objective, starting from scale 1.
/// The gradient is normalized by `mean(ray_len * depth)` so steps live in
/// ratio units; the step size halves whenever the descent direction flips,
/// which drives the oscillation around the L1 minimizer below `tol`.
pub fn align_scale_gd(
    depth: &DepthMap,
    mask: &CoverageMask,
    intr: &Intrinsics,
    alpha: f64,
    max_iters: usize,
    tol: f64,
) -> Result<AlignmentResult> {
    if !(alpha > 0.0) {
        return Err(invalid("step size must be positive"));
    }
    let samples = gather_samples(depth, mask, intr)?;
    let norm = samples.iter().map(|s| s.ray_len * s.depth).sum::<f64>() / samples.len() as f64;
    let mut d = 1.0f64;
    let mut step = alpha;
    let mut prev_dir = 0.0f64;
    let mut iterations = 0;
    let mut converged = false;
    let mut clamped = false;
    while iterations < max_iters {
        iterations += 1;
        let (_, grad) = loss_grad(&samples, d);
        let dir = sign(grad);
        if dir != 0.0 && prev_dir != 0.0 && dir != prev_dir {
            step *= 0.5;
        }
        if dir != 0.0 {
            prev_dir = dir;
        }
        let delta = step * grad / norm;
        d -= delta;
        if d <= 0.0 {
            d = 1e-6;
            clamped = true;
        }
        if delta.abs() < tol {
            converged = true;
            break;
        }
    }
    let (final_loss, _) = loss_grad(&samples, d);
    Ok(AlignmentResult { scale: d, final_loss, iterations, converged: converged && !clamped })
}

/// Closed-form minimizer of the alignment objective: the weighted lower
/// median of the per-pixel depth ratios `Dref / D` with weights
/// `ray_len * D`.
pub fn align_scale_median(
    depth: &DepthMap,
    mask: &CoverageMask,
    intr: &Intrinsics,
) -> Result<AlignmentResult> {
    let samples = gather_samples(depth, mask, intr)?;
    let mut pairs: Vec<(f64, f64)> = samples
        .iter()
        .map(|s| (s.ref_depth / s.depth, s.ray_len * s.depth))
        .collect();
    pairs.sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).expect("finite ratios"));
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    let mut acc = 0.0;
    let mut scale = pairs[pairs.len() - 1].0;
    for &(ratio, weight) in &pairs {
        acc += weight;
        if acc >= total * 0.5 {
            scale = ratio;
            break;
        }
    }
    let (final_loss, _) = loss_grad(&samples, scale);
    Ok(AlignmentResult { scale, final_loss, iterations: 0, converged: true })
}

/// Which solver the fusion loop uses for each view's depth scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlignSolver {
    GradientDescent { alpha: f64, max_iters: usize, tol: f64 },
    WeightedMedian,
    /// Ablation mode: every scale stays at 1.
    Off,
}

impl AlignSolver {
    pub fn default_gd() -> Self {
        AlignSolver::GradientDescent { alpha: 0.05, max_iters: 500, tol: 1e-7 }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FuseConfig {
    pub solver: AlignSolver,
    pub dilate_radius: usize,
    /// When false, duplicate suppression is skipped (every valid pixel of
    /// every view is lifted). Alignment still uses the projected masks.
    pub masking: bool,
}

impl Default for FuseConfig {
    fn default() -> Self {
        FuseConfig { solver: AlignSolver::WeightedMedian, dilate_radius: 1, masking: true }
    }
}

/// The cyclic fusion loop: view 0 is lifted unmasked at scale 1; every later
/// view is masked by the projection of the accumulated cloud, its depth
/// scale is aligned against the projected reference depths, and only the
/// uncovered pixels are lifted and merged.
pub fn fuse_views(
    views: &[(PerspectiveView, DepthMap)],
    intr: &Intrinsics,
    config: &FuseConfig,
) -> Result<(PointCloud, Vec<AlignmentResult>)> {
    if views.is_empty() {
        return Err(invalid("fusion needs at least one view"));
    }
    let (first_view, first_depth) = &views[0];
    let mut omega = lift_rgbd(&first_view.image, first_depth, intr, &first_view.pose, None, 0)?;
    let mut results = vec![AlignmentResult {
        scale: 1.0,
        final_loss: 0.0,
        iterations: 0,
        converged: true,
    }];
    for (i, (view, depth)) in views.iter().enumerate().skip(1) {
        let projection = project_cloud(&omega, intr, &view.pose);
        let mask = dilate_mask(&projection.mask, config.dilate_radius);
        let result = match config.solver {
            AlignSolver::GradientDescent { alpha, max_iters, tol } => {
                align_scale_gd(depth, &mask, intr, alpha, max_iters, tol)
            }
            AlignSolver::WeightedMedian => align_scale_median(depth, &mask, intr),
            AlignSolver::Off => Ok(AlignmentResult {
                scale: 1.0,
                final_loss: match alignment_loss(1.0, depth, &mask, intr) {
                    Ok((loss, _)) => loss,
                    Err(_) => 0.0,
                },
                iterations: 0,
                converged: true,
            }),
        }
        .map_err(|e| match e {
            Error::AlignmentImpossible { .. } => Error::AlignmentImpossible { view: Some(i) },
            other => other,
        })?;
        let scaled = depth.scaled(result.scale);
        let exclude = config.masking.then_some(&mask);
        let new_points = lift_rgbd(&view.image, &scaled, intr, &view.pose, exclude, i as u32)?;
        omega.extend_from(&new_points);
        results.push(result);
    }
    Ok((omega, results))
}
