//! Isotropic Gaussian cloud: initialization from a fused point cloud,
//! front-to-back alpha-composited splatting, analytic gradients for the
//! free parameters (color, opacity logit, log scale; positions stay fixed),
//! supervision augmentation, and a plain gradient-descent optimizer.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::geometry::{CameraPose, Intrinsics};
use crate::image::ImageRgb;
use crate::math::Vec3;
use crate::pointcloud::{project_cloud, PointCloud};

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    libm::log(p / (1.0 - p))
}

/// One isotropic Gaussian. The position is fixed; color, opacity logit, and
/// log scale are the free parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian {
    pub position: Vec3,
    pub color: [f64; 3],
    pub opacity_logit: f64,
    pub log_scale: f64,
}

impl Gaussian {
    pub fn opacity(&self) -> f64 {
        sigmoid(self.opacity_logit)
    }

    /// World-space standard deviation; positive by construction.
    pub fn sigma(&self) -> f64 {
        libm::exp(self.log_scale)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianCloud {
    pub gaussians: Vec<Gaussian>,
    pub background: [f64; 3],
}

/// One supervision target: an image, a per-pixel validity mask (pixels
/// excluded from the loss when false), and the camera it was seen from.
#[derive(Debug, Clone)]
pub struct SupervisionItem {
    pub image: ImageRgb,
    pub validity: Vec<bool>,
    pub pose: CameraPose,
    pub intrinsics: Intrinsics,
}

#[derive(Debug, Clone, Default)]
pub struct SupervisionSet {
    pub items: Vec<SupervisionItem>,
}

const INIT_OPACITY: f64 = 0.8;
const SIGMA_CLAMP_LO: f64 = 1e-4;
const SIGMA_CLAMP_HI: f64 = 0.1;

/// One Gaussian per cloud point: color copied, opacity 0.8, and the scale
/// set to the mean distance to the `knn` nearest neighbors, clamped to
/// `[1e-4, 0.1]` times the cloud bounding-box diagonal.
pub fn init_gaussians(omega: &PointCloud, knn: usize, background: [f64; 3]) -> Result<GaussianCloud> {
    if omega.is_empty() {
        return Err(invalid("cannot initialize Gaussians from an empty cloud"));
    }
    if knn == 0 {
        return Err(invalid("knn must be at least 1"));
    }
    let mut lo = omega.positions[0];
    let mut hi = omega.positions[0];
    for &p in &omega.positions {
        lo = Vec3::new(lo.x.min(p.x), lo.y.min(p.y), lo.z.min(p.z));
        hi = Vec3::new(hi.x.max(p.x), hi.y.max(p.y), hi.z.max(p.z));
    }
    let diag = (hi - lo).norm();
    let mean_dists = knn_mean_distances(&omega.positions, knn, lo, hi);
    let opacity_logit = logit(INIT_OPACITY);
    let gaussians = omega
        .positions
        .iter()
        .zip(&omega.colors)
        .zip(&mean_dists)
        .map(|((&position, &color), &dist)| {
            let sigma = if diag > 0.0 {
                dist.clamp(SIGMA_CLAMP_LO * diag, SIGMA_CLAMP_HI * diag)
            } else {
                // Fully degenerate cloud (all points coincide).
                1e-3
            };
            Gaussian { position, color, opacity_logit, log_scale: libm::log(sigma) }
        })
        .collect();
    Ok(GaussianCloud { gaussians, background })
}

/// Mean distance to the k nearest neighbors for every point, via a uniform
/// grid with ring-expansion queries.
fn knn_mean_distances(points: &[Vec3], knn: usize, lo: Vec3, hi: Vec3) -> Vec<f64> {
    let n = points.len();
    if n == 1 {
        return vec![0.0];
    }
    let extent = hi - lo;
    let max_extent = extent.x.max(extent.y).max(extent.z).max(1e-9);
    let volume = extent.x.max(1e-9) * extent.y.max(1e-9) * extent.z.max(1e-9);
    let mut cell = libm::cbrt(volume / n as f64);
    // Cap the grid resolution so sparse or near-planar clouds never produce
    // long empty ring scans.
    let axis_cap = (8.0 * libm::cbrt(n as f64)).min(512.0);
    cell = cell.max(max_extent / axis_cap);
    let dims = |e: f64| -> i64 { (libm::floor(e / cell) as i64 + 1).max(1) };
    let (nx, ny, nz) = (dims(extent.x), dims(extent.y), dims(extent.z));
    let cell_of = |p: Vec3| -> (i64, i64, i64) {
        (
            (libm::floor((p.x - lo.x) / cell) as i64).clamp(0, nx - 1),
            (libm::floor((p.y - lo.y) / cell) as i64).clamp(0, ny - 1),
            (libm::floor((p.z - lo.z) / cell) as i64).clamp(0, nz - 1),
        )
    };
    let key_of = |c: (i64, i64, i64)| -> u64 { ((c.2 * ny + c.1) * nx + c.0) as u64 };

    // Flat cell index: point ids sorted by cell key, plus a lookup table.
    let mut keyed: Vec<(u64, u32)> =
        points.iter().enumerate().map(|(i, &p)| (key_of(cell_of(p)), i as u32)).collect();
    keyed.sort_unstable();
    let keys: Vec<u64> = keyed.iter().map(|&(k, _)| k).collect();

    let scan_cell = |q: (i64, i64, i64), i: usize, p: Vec3, dists: &mut Vec<f64>| {
        if q.0 < 0 || q.1 < 0 || q.2 < 0 || q.0 >= nx || q.1 >= ny || q.2 >= nz {
            return;
        }
        let key = key_of(q);
        let start = keys.partition_point(|&k| k < key);
        let end = keys.partition_point(|&k| k <= key);
        for &(_, idx) in &keyed[start..end] {
            if idx as usize != i {
                dists.push((points[idx as usize] - p).norm());
            }
        }
    };

    let mut neighbor_dists: Vec<f64> = Vec::new();
    let mut out = vec![0.0; n];
    for (i, &p) in points.iter().enumerate() {
        let (cx, cy, cz) = cell_of(p);
        neighbor_dists.clear();
        let max_ring = nx.max(ny).max(nz);
        let mut ring = 0i64;
        loop {
            // Gather candidates on the Chebyshev shell at distance `ring`.
            for dz in -ring..=ring {
                for dy in -ring..=ring {
                    if dz.abs() == ring || dy.abs() == ring {
                        for dx in -ring..=ring {
                            scan_cell((cx + dx, cy + dy, cz + dz), i, p, &mut neighbor_dists);
                        }
                    } else {
                        scan_cell((cx - ring, cy + dy, cz + dz), i, p, &mut neighbor_dists);
                        scan_cell((cx + ring, cy + dy, cz + dz), i, p, &mut neighbor_dists);
                    }
                }
            }
            // Points outside ring r are farther than r*cell from p, so once
            // the k-th candidate is within that bound the answer is final.
            if neighbor_dists.len() >= knn {
                neighbor_dists
                    .sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite distances"));
                if neighbor_dists[knn - 1] <= ring as f64 * cell || ring >= max_ring {
                    break;
                }
            } else if ring >= max_ring {
                break;
            }
            ring += 1;
        }
        let k = knn.min(neighbor_dists.len());
        out[i] = if k == 0 {
            0.0
        } else {
            neighbor_dists[..k].iter().sum::<f64>() / k as f64
        };
    }
    out
}

const ALPHA_CAP: f64 = 0.999;
const T_STOP: f64 = 1e-4;
const CUTOFF_SIGMAS: f64 = 3.0;

struct SplatRecord {
    idx: u32,
    u: f64,
    v: f64,
    sigma_s: f64,
    opacity: f64,
    color: [f64; 3],
    x0: usize,
    x1: usize,
    y0: usize,
    y1: usize,
}

/// Project every Gaussian, cull the ones behind the camera or outside the
/// image, and return the records sorted by ascending camera z (ties keep
/// cloud order).
fn prepare_splats(cloud: &GaussianCloud, pose: &CameraPose, intr: &Intrinsics) -> Vec<SplatRecord> {
    let mut order: Vec<(f64, SplatRecord)> = Vec::new();
    for (idx, g) in cloud.gaussians.iter().enumerate() {
        let c = pose.world_to_cam(g.position);
        if c.z <= 1e-6 {
            continue;
        }
        let u = intr.fx * c.x / c.z + intr.cx - 0.5;
        let v = intr.fy * c.y / c.z + intr.cy - 0.5;
        let sigma_s = intr.fx * g.sigma() / c.z;
        let cut = CUTOFF_SIGMAS * sigma_s;
        let x0 = libm::ceil(u - cut).max(0.0);
        let x1 = libm::floor(u + cut).min(intr.width as f64 - 1.0);
        let y0 = libm::ceil(v - cut).max(0.0);
        let y1 = libm::floor(v + cut).min(intr.height as f64 - 1.0);
        if x0 > x1 || y0 > y1 {
            continue;
        }
        order.push((
            c.z,
            SplatRecord {
                idx: idx as u32,
                u,
                v,
                sigma_s,
                opacity: g.opacity(),
                color: g.color,
                x0: x0 as usize,
                x1: x1 as usize,
                y0: y0 as usize,
                y1: y1 as usize,
            },
        ));
    }
    order.sort_unstable_by(|a, b| (a.0, a.1.idx).partial_cmp(&(b.0, b.1.idx)).expect("finite z"));
    order.into_iter().map(|(_, r)| r).collect()
}

fn splat_alpha(rec: &SplatRecord, px: f64, py: f64) -> (f64, f64, f64) {
    let dx = px - rec.u;
    let dy = py - rec.v;
    let r2 = dx * dx + dy * dy;
    let g = libm::exp(-r2 / (2.0 * rec.sigma_s * rec.sigma_s));
    let alpha = (rec.opacity * g).min(ALPHA_CAP);
    (alpha, g, r2)
}

struct ForwardBuffers {
    image: Vec<f64>,
    transmittance: Vec<f64>,
    weight_sum: Vec<f64>,
    /// Per pixel: 1 + order index of the last composited splat (0 = none).
    last_contrib: Vec<u32>,
}

fn forward(splats: &[SplatRecord], cloud: &GaussianCloud, intr: &Intrinsics) -> ForwardBuffers {
    let n_px = intr.width * intr.height;
    let mut buf = ForwardBuffers {
        image: vec![0.0; n_px * 3],
        transmittance: vec![1.0; n_px],
        weight_sum: vec![0.0; n_px],
        last_contrib: vec![0; n_px],
    };
    for (order, rec) in splats.iter().enumerate() {
        for y in rec.y0..=rec.y1 {
            for x in rec.x0..=rec.x1 {
                let px = y * intr.width + x;
                let t = buf.transmittance[px];
                if t < T_STOP {
                    continue;
                }
                let (alpha, _, _) = splat_alpha(rec, x as f64, y as f64);
                let w = t * alpha;
                buf.image[px * 3] += w * rec.color[0];
                buf.image[px * 3 + 1] += w * rec.color[1];
                buf.image[px * 3 + 2] += w * rec.color[2];
                buf.weight_sum[px] += w;
                buf.transmittance[px] = t * (1.0 - alpha);
                buf.last_contrib[px] = order as u32 + 1;
            }
        }
    }
    for px in 0..n_px {
        let t = buf.transmittance[px];
        for ch in 0..3 {
            buf.image[px * 3 + ch] += t * cloud.background[ch];
        }
    }
    buf
}

/// Front-to-back composited render of the cloud for one camera.
pub fn render(cloud: &GaussianCloud, pose: &CameraPose, intr: &Intrinsics) -> ImageRgb {
    render_detailed(cloud, pose, intr).image
}

/// Render output plus the per-pixel compositing state, for diagnostics and
/// conservation checks.
pub struct RenderDetail {
    pub image: ImageRgb,
    /// Transmittance left after compositing (the background weight).
    pub transmittance: Vec<f64>,
    /// Sum of the per-splat compositing weights `T_k * alpha_k`.
    pub weight_sum: Vec<f64>,
}

pub fn render_detailed(cloud: &GaussianCloud, pose: &CameraPose, intr: &Intrinsics) -> RenderDetail {
    let splats = prepare_splats(cloud, pose, intr);
    let buf = forward(&splats, cloud, intr);
    RenderDetail {
        image: ImageRgb::from_data(intr.width, intr.height, buf.image),
        transmittance: buf.transmittance,
        weight_sum: buf.weight_sum,
    }
}

/// Gradients for the free parameter classes, one entry per Gaussian.
/// Positions are fixed and receive no gradient.
#[derive(Debug, Clone)]
pub struct SplatGrads {
    pub color: Vec<[f64; 3]>,
    pub opacity_logit: Vec<f64>,
    pub log_scale: Vec<f64>,
}

/// Masked L1 loss against a target image plus analytic gradients via the
/// compositing chain rule. The loss is the mean absolute difference over
/// valid pixels and channels.
pub fn render_with_grads(
    cloud: &GaussianCloud,
    pose: &CameraPose,
    intr: &Intrinsics,
    target: &ImageRgb,
    validity: Option<&[bool]>,
) -> Result<(f64, SplatGrads)> {
    if target.width() != intr.width || target.height() != intr.height {
        return Err(invalid("target dimensions must match intrinsics"));
    }
    let n_px = intr.width * intr.height;
    if let Some(v) = validity {
        if v.len() != n_px {
            return Err(invalid("validity mask must have one entry per pixel"));
        }
    }
    let n_valid = validity.map_or(n_px, |v| v.iter().filter(|&&ok| ok).count());
    if n_valid == 0 {
        return Err(invalid("loss needs at least one valid pixel"));
    }

    let splats = prepare_splats(cloud, pose, intr);
    let buf = forward(&splats, cloud, intr);

    // Loss and dL/dC.
    let inv_n = 1.0 / (3.0 * n_valid as f64);
    let mut loss = 0.0;
    let mut d_image = vec![0.0f64; n_px * 3];
    for px in 0..n_px {
        if validity.is_some_and(|v| !v[px]) {
            continue;
        }
        for ch in 0..3 {
            let diff = buf.image[px * 3 + ch] - target.data()[px * 3 + ch];
            loss += diff.abs() * inv_n;
            d_image[px * 3 + ch] = if diff > 0.0 {
                inv_n
            } else if diff < 0.0 {
                -inv_n
            } else {
                0.0
            };
        }
    }

    let n = cloud.gaussians.len();
    let mut grads = SplatGrads {
        color: vec![[0.0; 3]; n],
        opacity_logit: vec![0.0; n],
        log_scale: vec![0.0; n],
    };

    // Backward pass in reverse depth order. Per pixel we keep the running
    // transmittance (unwound by dividing out each alpha) and the color
    // composited behind the current splat, background included.
    let mut t_run = buf.transmittance.clone();
    let mut s_run = vec![0.0f64; n_px * 3];
    for px in 0..n_px {
        for ch in 0..3 {
            s_run[px * 3 + ch] = buf.transmittance[px] * cloud.background[ch];
        }
    }
    for (order, rec) in splats.iter().enumerate().rev() {
        let gi = rec.idx as usize;
        let op = rec.opacity;
        for y in rec.y0..=rec.y1 {
            for x in rec.x0..=rec.x1 {
                let px = y * intr.width + x;
                if buf.last_contrib[px] < order as u32 + 1 {
                    continue;
                }
                let (alpha, g, r2) = splat_alpha(rec, x as f64, y as f64);
                let t_k = t_run[px] / (1.0 - alpha);
                let d_c = &d_image[px * 3..px * 3 + 3];
                let mut d_alpha = 0.0;
                for ch in 0..3 {
                    grads.color[gi][ch] += d_c[ch] * t_k * alpha;
                    d_alpha += d_c[ch] * (t_k * rec.color[ch] - s_run[px * 3 + ch] / (1.0 - alpha));
                }
                // Clamped alpha has zero derivative in opacity and scale.
                if op * g < ALPHA_CAP {
                    grads.opacity_logit[gi] += d_alpha * g * op * (1.0 - op);
                    grads.log_scale[gi] += d_alpha * op * g * r2 / (rec.sigma_s * rec.sigma_s);
                }
                for ch in 0..3 {
                    s_run[px * 3 + ch] += t_k * alpha * rec.color[ch];
                }
                t_run[px] = t_k;
            }
        }
    }

    Ok((loss, grads))
}

/// Projects the fused cloud from each pose into a supervision item; the
/// projection's coverage mask becomes the validity mask.
pub fn augment_supervision(
    omega: &PointCloud,
    poses: &[CameraPose],
    intr: &Intrinsics,
) -> SupervisionSet {
    let items = poses
        .iter()
        .map(|pose| {
            let proj = project_cloud(omega, intr, pose);
            SupervisionItem {
                image: proj.image,
                validity: proj.mask.covered().to_vec(),
                pose: *pose,
                intrinsics: *intr,
            }
        })
        .collect();
    SupervisionSet { items }
}

/// Per-parameter-class learning rates for [`optimize`].
#[derive(Debug, Clone, Copy)]
pub struct LearningRates {
    pub color: f64,
    pub opacity: f64,
    pub scale: f64,
}

impl Default for LearningRates {
    fn default() -> Self {
        LearningRates { color: 0.05, opacity: 0.05, scale: 0.01 }
    }
}

/// Plain gradient descent over color, opacity logit, and log scale,
/// cycling the supervision items round-robin. Returns the per-iteration
/// loss history.
pub fn optimize(
    cloud: &mut GaussianCloud,
    supervision: &SupervisionSet,
    lrs: LearningRates,
    iters: usize,
) -> Result<Vec<f64>> {
    if supervision.items.is_empty() {
        return Err(invalid("optimize needs a non-empty supervision set"));
    }
    let mut history = Vec::with_capacity(iters);
    for it in 0..iters {
        let item = &supervision.items[it % supervision.items.len()];
        let (loss, grads) =
            render_with_grads(cloud, &item.pose, &item.intrinsics, &item.image, Some(&item.validity))?;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { iteration: it });
        }
        for (gi, g) in cloud.gaussians.iter_mut().enumerate() {
            for ch in 0..3 {
                g.color[ch] = (g.color[ch] - lrs.color * grads.color[gi][ch]).clamp(0.0, 1.0);
            }
            g.opacity_logit -= lrs.opacity * grads.opacity_logit[gi];
            g.log_scale -= lrs.scale * grads.log_scale[gi];
        }
        history.push(loss);
    }
    Ok(history)
}
