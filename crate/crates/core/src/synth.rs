//! Ground-truth oracle: an axis-aligned checkered box room viewed from its
//! center, rendered analytically to panoramas, perspective views, and exact
//! depth maps.
//!
//! The equirectangular render stores radial depth (ray length); the
//! perspective render stores z-depth. Keep the two conventions apart.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};
use crate::geometry::{equirect_pixel_dir, pixel_to_ray, CameraPose, EquirectImage, Intrinsics};
use crate::image::ImageRgb;
use crate::math::Vec3;
use crate::pointcloud::DepthMap;

/// Face order used throughout: +x, -x, +y (floor; +y points down),
/// -y (ceiling), +z, -z.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxScene {
    pub half_extents: Vec3,
    pub face_colors: [[f64; 3]; 6],
    /// Checkerboard squares along each face edge; 0 paints faces flat.
    pub checker_count: u32,
}

impl BoxScene {
    pub fn new(half_extents: Vec3, face_colors: [[f64; 3]; 6], checker_count: u32) -> Result<Self> {
        if !(half_extents.x > 0.0 && half_extents.y > 0.0 && half_extents.z > 0.0) {
            return Err(invalid("box half extents must be positive"));
        }
        Ok(BoxScene { half_extents, face_colors, checker_count })
    }

    /// Full space diagonal of the room.
    pub fn diagonal(&self) -> f64 {
        2.0 * self.half_extents.norm()
    }

    /// Distance from a point to the nearest face plane.
    pub fn surface_distance(&self, p: Vec3) -> f64 {
        let h = self.half_extents;
        let dx = (p.x.abs() - h.x).abs();
        let dy = (p.y.abs() - h.y).abs();
        let dz = (p.z.abs() - h.z).abs();
        dx.min(dy).min(dz)
    }

    /// Cast a ray from the room center; returns (hit distance along the
    /// unit direction, face index).
    pub fn raycast(&self, dir: Vec3) -> (f64, usize) {
        let h = self.half_extents;
        let mut best_t = f64::INFINITY;
        let mut face = 0usize;
        let axes = [(dir.x, h.x, 0usize), (dir.y, h.y, 2), (dir.z, h.z, 4)];
        for &(d, extent, base) in &axes {
            if d == 0.0 {
                continue;
            }
            let t = extent / d.abs();
            if t < best_t {
                best_t = t;
                face = if d > 0.0 { base } else { base + 1 };
            }
        }
        (best_t, face)
    }

    /// Color of the surface point `p` lying on `face`.
    pub fn face_color(&self, face: usize, p: Vec3) -> [f64; 3] {
        let base = self.face_colors[face];
        if self.checker_count == 0 {
            return base;
        }
        let h = self.half_extents;
        // Tangential coordinates of the face.
        let (a, ha, b, hb) = match face {
            0 | 1 => (p.y, h.y, p.z, h.z),
            2 | 3 => (p.x, h.x, p.z, h.z),
            _ => (p.x, h.x, p.y, h.y),
        };
        let n = self.checker_count as f64;
        let cell = |coord: f64, extent: f64| -> i64 {
            let t = ((coord + extent) / (2.0 * extent) * n).clamp(0.0, n - 1.0);
            libm::floor(t) as i64
        };
        if (cell(a, ha) + cell(b, hb)) % 2 == 0 {
            base
        } else {
            [base[0] * 0.55, base[1] * 0.55, base[2] * 0.55]
        }
    }

    fn shade(&self, dir: Vec3) -> ([f64; 3], f64) {
        let (t, face) = self.raycast(dir);
        (self.face_color(face, dir * t), t)
    }
}

impl Default for BoxScene {
    fn default() -> Self {
        BoxScene {
            half_extents: Vec3::new(2.0, 1.5, 2.5),
            face_colors: [
                [0.85, 0.35, 0.30], // +x wall
                [0.30, 0.55, 0.85], // -x wall
                [0.55, 0.45, 0.35], // floor (+y, camera y points down)
                [0.90, 0.88, 0.80], // ceiling (-y)
                [0.35, 0.75, 0.45], // +z wall
                [0.80, 0.70, 0.30], // -z wall
            ],
            checker_count: 4,
        }
    }
}

/// Panorama of the room plus the radial depth (ray length) per pixel.
pub fn render_scene_equirect(
    scene: &BoxScene,
    pano_w: usize,
    pano_h: usize,
) -> Result<(EquirectImage, Vec<f64>)> {
    if pano_w != 2 * pano_h || pano_h == 0 {
        return Err(invalid("panorama width must equal 2 x height"));
    }
    let mut image = ImageRgb::new(pano_w, pano_h);
    let mut radial = vec![0.0; pano_w * pano_h];
    for y in 0..pano_h {
        for x in 0..pano_w {
            let dir = equirect_pixel_dir(pano_w, pano_h, x, y);
            let (color, t) = scene.shade(dir);
            image.set(x, y, color);
            radial[y * pano_w + x] = t;
        }
    }
    Ok((EquirectImage::new(image)?, radial))
}

/// Fill rows `[y0, y1)` of a perspective oracle render: `(y1-y0)*w*3`
/// channel values and `(y1-y0)*w` z-depths.
pub fn render_scene_perspective_rows(
    scene: &BoxScene,
    pose: &CameraPose,
    intr: &Intrinsics,
    y0: usize,
    y1: usize,
    pixels: &mut [f64],
    depths: &mut [f64],
) {
    assert!(y1 >= y0 && y1 <= intr.height);
    assert_eq!(pixels.len(), (y1 - y0) * intr.width * 3);
    assert_eq!(depths.len(), (y1 - y0) * intr.width);
    for y in y0..y1 {
        for x in 0..intr.width {
            let ray_cam = pixel_to_ray(intr, x as f64, y as f64);
            let dir = pose.rotation.mul_vec(ray_cam);
            let (color, t) = scene.shade(dir);
            let i = (y - y0) * intr.width + x;
            pixels[i * 3..i * 3 + 3].copy_from_slice(&color);
            depths[i] = t * ray_cam.z;
        }
    }
}

/// Pinhole oracle render: image plus exact z-depth map.
pub fn render_scene_perspective(
    scene: &BoxScene,
    pose: &CameraPose,
    intr: &Intrinsics,
) -> (ImageRgb, DepthMap) {
    let mut pixels = vec![0.0; intr.width * intr.height * 3];
    let mut depths = vec![0.0; intr.width * intr.height];
    render_scene_perspective_rows(scene, pose, intr, 0, intr.height, &mut pixels, &mut depths);
    (
        ImageRgb::from_data(intr.width, intr.height, pixels),
        DepthMap::from_values(intr.width, intr.height, depths),
    )
}

/// Multiplies each view's valid depths by the matching scale.
pub fn perturb_depths(depths: &[DepthMap], scales: &[f64]) -> Result<Vec<DepthMap>> {
    if depths.len() != scales.len() {
        return Err(invalid("one scale per depth map is required"));
    }
    for &s in scales {
        if !(s > 0.0) || !s.is_finite() {
            return Err(invalid("scales must be positive and finite"));
        }
    }
    Ok(depths.iter().zip(scales).map(|(d, &s)| d.scaled(s)).collect())
}

/// Deterministic uniform scale draws in `[lo, hi)` for seeded benchmarks.
pub fn draw_scales(n: usize, seed: u64, lo: f64, hi: f64) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo) {
        return Err(invalid("scale range must satisfy 0 < lo < hi"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n).map(|_| rng.gen_range(lo..hi)).collect())
}
