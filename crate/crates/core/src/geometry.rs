//! Camera intrinsics, rotation-only poses, spherical mapping, and the
//! bidirectional equirectangular <-> perspective projection.
//!
//! Conventions (fixed across the whole crate):
//! - camera frame: +x right, +y down, +z forward;
//! - world frame: the camera frame of the first trajectory pose;
//! - pixel `(i, j)` has its center at continuous coordinate `(i+0.5, j+0.5)`;
//!   ray/projection functions work in index space (pixel `i` at `u = i`);
//! - longitude `atan2(x, z)`, latitude `asin(-y)` (positive latitude is up).

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Result};
use crate::image::ImageRgb;
use crate::math::{Mat3, Vec3, PI, TAU};

/// Pinhole intrinsics in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        if !(fx > 0.0 && fy > 0.0) {
            return Err(invalid("focal lengths must be positive"));
        }
        if !(cx > 0.0 && cx < width as f64 && cy > 0.0 && cy < height as f64) {
            return Err(invalid("principal point must lie inside the image"));
        }
        Ok(Intrinsics { fx, fy, cx, cy, width, height })
    }
}

/// Focal length from a horizontal field of view, principal point at the
/// exact image center.
pub fn intrinsics_from_fov(fov_deg: f64, width: usize, height: usize) -> Result<Intrinsics> {
    if !(fov_deg > 0.0 && fov_deg < 180.0) {
        return Err(invalid("field of view must be in (0, 180) degrees"));
    }
    if width == 0 || height == 0 {
        return Err(invalid("image dimensions must be at least 1x1"));
    }
    let half = fov_deg.to_radians() * 0.5;
    let f = (width as f64 * 0.5) / libm::tan(half);
    Intrinsics::new(f, f, width as f64 * 0.5, height as f64 * 0.5, width, height)
}

/// Camera-to-world rotation plus a world translation (always zero for
/// trajectory poses: every view shares the panorama center).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPose {
    pub rotation: Mat3,
    pub translation: Vec3,
}

impl CameraPose {
    pub fn identity() -> Self {
        CameraPose { rotation: Mat3::IDENTITY, translation: Vec3::ZERO }
    }

    pub fn from_parts(rotation: Mat3, translation: Vec3) -> Result<Self> {
        if rotation.orthonormality_defect() >= 1e-9 || rotation.determinant() <= 0.0 {
            return Err(invalid("rotation must be orthonormal with determinant +1"));
        }
        Ok(CameraPose { rotation, translation })
    }

    /// Camera-frame point to world frame.
    pub fn cam_to_world(&self, p: Vec3) -> Vec3 {
        self.rotation.mul_vec(p) + self.translation
    }

    /// World point to camera frame.
    pub fn world_to_cam(&self, p: Vec3) -> Vec3 {
        self.rotation.mul_vec_transposed(p - self.translation)
    }
}

/// Rotation-only pose: yaw about the world y axis composed with a pitch
/// about the camera x axis (applied first). Positive pitch looks up.
pub fn make_pose(yaw_rad: f64, pitch_rad: f64) -> Result<CameraPose> {
    if !(pitch_rad > -PI / 2.0 && pitch_rad < PI / 2.0) {
        return Err(invalid("pitch must lie strictly inside (-pi/2, pi/2)"));
    }
    let (cy, sy) = (libm::cos(yaw_rad), libm::sin(yaw_rad));
    let (cp, sp) = (libm::cos(pitch_rad), libm::sin(pitch_rad));
    let yaw = Mat3::from_rows([[cy, 0.0, sy], [0.0, 1.0, 0.0], [-sy, 0.0, cy]]);
    let pitch = Mat3::from_rows([[1.0, 0.0, 0.0], [0.0, cp, -sp], [0.0, sp, cp]]);
    Ok(CameraPose { rotation: yaw.mul_mat(&pitch), translation: Vec3::ZERO })
}

/// An RGB panorama on the sphere; width is exactly twice the height.
#[derive(Debug, Clone, PartialEq)]
pub struct EquirectImage {
    image: ImageRgb,
}

impl EquirectImage {
    pub fn new(image: ImageRgb) -> Result<Self> {
        if image.width() != 2 * image.height() || image.height() == 0 {
            return Err(invalid("panorama width must equal 2 x height"));
        }
        if !image.all_finite_unit() {
            return Err(invalid("panorama channels must be finite and in [0, 1]"));
        }
        Ok(EquirectImage { image })
    }

    pub fn image(&self) -> &ImageRgb {
        &self.image
    }

    pub fn width(&self) -> usize {
        self.image.width()
    }

    pub fn height(&self) -> usize {
        self.image.height()
    }
}

/// A pinhole view extracted from (or rendered for) a pose.
#[derive(Debug, Clone, PartialEq)]
pub struct PerspectiveView {
    pub image: ImageRgb,
    pub pose: CameraPose,
    pub intrinsics: Intrinsics,
}

impl PerspectiveView {
    pub fn new(image: ImageRgb, pose: CameraPose, intrinsics: Intrinsics) -> Result<Self> {
        if image.width() != intrinsics.width || image.height() != intrinsics.height {
            return Err(invalid("view dimensions must match intrinsics"));
        }
        Ok(PerspectiveView { image, pose, intrinsics })
    }
}

/// An ordered ring scan of rotation-only poses sharing one set of intrinsics.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub poses: Vec<CameraPose>,
    pub fov_deg: f64,
    pub view_size: (usize, usize),
}

impl Trajectory {
    pub fn intrinsics(&self) -> Intrinsics {
        // Validated at construction time.
        intrinsics_from_fov(self.fov_deg, self.view_size.0, self.view_size.1)
            .expect("trajectory holds validated parameters")
    }
}

/// Ring trajectory: middle ring (pitch 0) first, then the bottom rings
/// (negative pitch), then the top rings, `n_yaw` evenly spaced yaws each.
pub fn generate_trajectory(
    n_yaw: usize,
    pitches_deg: &[f64],
    fov_deg: f64,
    view_w: usize,
    view_h: usize,
) -> Result<Trajectory> {
    if n_yaw == 0 {
        return Err(invalid("n_yaw must be at least 1"));
    }
    if pitches_deg.is_empty() {
        return Err(invalid("pitch list must be non-empty"));
    }
    for &p in pitches_deg {
        if !(p > -90.0 && p < 90.0) {
            return Err(invalid("pitches must lie strictly inside (-90, 90) degrees"));
        }
    }
    // Consecutive poses in a ring must overlap for the fusion masks to chain.
    if n_yaw >= 2 && 360.0 / n_yaw as f64 >= fov_deg {
        return Err(invalid("yaw step must be smaller than the field of view"));
    }
    intrinsics_from_fov(fov_deg, view_w, view_h)?;

    let mut ordered: Vec<f64> = Vec::with_capacity(pitches_deg.len());
    ordered.extend(pitches_deg.iter().copied().filter(|&p| p == 0.0));
    ordered.extend(pitches_deg.iter().copied().filter(|&p| p < 0.0));
    ordered.extend(pitches_deg.iter().copied().filter(|&p| p > 0.0));

    let mut poses = Vec::with_capacity(ordered.len() * n_yaw);
    for &pitch in &ordered {
        for k in 0..n_yaw {
            let yaw = k as f64 * TAU / n_yaw as f64;
            poses.push(make_pose(yaw, pitch.to_radians())?);
        }
    }
    Ok(Trajectory { poses, fov_deg, view_size: (view_w, view_h) })
}

/// Unit ray through the center of pixel `(u, v)` (index space), camera frame.
pub fn pixel_to_ray(intr: &Intrinsics, u: f64, v: f64) -> Vec3 {
    Vec3::new((u + 0.5 - intr.cx) / intr.fx, (v + 0.5 - intr.cy) / intr.fy, 1.0).normalized()
}

/// World direction to continuous panorama pixel coordinates.
pub fn dir_to_equirect(dir: Vec3, pano_w: usize, pano_h: usize) -> Result<(f64, f64)> {
    let n = dir.norm();
    if !(n > 0.0) || !n.is_finite() {
        return Err(invalid("direction must be a finite non-zero vector"));
    }
    let lon = libm::atan2(dir.x / n, dir.z / n);
    let lat = libm::asin((-dir.y / n).clamp(-1.0, 1.0));
    let u = (lon / TAU + 0.5) * pano_w as f64;
    let v = (0.5 - lat / PI) * pano_h as f64;
    Ok((u, v))
}

/// Direction through the center of panorama pixel `(x, y)`.
pub fn equirect_pixel_dir(pano_w: usize, pano_h: usize, x: usize, y: usize) -> Vec3 {
    let lon = ((x as f64 + 0.5) / pano_w as f64 - 0.5) * TAU;
    let lat = (0.5 - (y as f64 + 0.5) / pano_h as f64) * PI;
    let (cl, sl) = (libm::cos(lat), libm::sin(lat));
    Vec3::new(libm::sin(lon) * cl, -sl, libm::cos(lon) * cl)
}

/// Bilinear panorama sample at continuous coordinates with horizontal
/// wraparound and vertical clamp.
pub fn sample_equirect(pano: &EquirectImage, u: f64, v: f64) -> [f64; 3] {
    let (w, h) = (pano.width(), pano.height());
    let x = u - 0.5;
    let y = v - 0.5;
    let x0 = libm::floor(x);
    let y0 = libm::floor(y);
    let fx = x - x0;
    let fy = y - y0;
    let wrap = |i: i64| -> usize { i.rem_euclid(w as i64) as usize };
    let clamp_row = |j: i64| -> usize { j.clamp(0, h as i64 - 1) as usize };
    let (x0, x1) = (wrap(x0 as i64), wrap(x0 as i64 + 1));
    let (y0, y1) = (clamp_row(y0 as i64), clamp_row(y0 as i64 + 1));
    let img = pano.image();
    let c00 = img.get(x0, y0);
    let c10 = img.get(x1, y0);
    let c01 = img.get(x0, y1);
    let c11 = img.get(x1, y1);
    let mut out = [0.0; 3];
    for ch in 0..3 {
        let top = c00[ch] * (1.0 - fx) + c10[ch] * fx;
        let bot = c01[ch] * (1.0 - fx) + c11[ch] * fx;
        out[ch] = top * (1.0 - fy) + bot * fy;
    }
    out
}

/// Fill rows `[y0, y1)` of a perspective extraction into `out`
/// (`(y1 - y0) * width * 3` channel values). Rows are independent, so
/// callers may split the image into bands and run them concurrently.
pub fn extract_perspective_rows(
    pano: &EquirectImage,
    pose: &CameraPose,
    intr: &Intrinsics,
    y0: usize,
    y1: usize,
    out: &mut [f64],
) {
    assert!(y1 >= y0 && y1 <= intr.height);
    assert_eq!(out.len(), (y1 - y0) * intr.width * 3);
    let (w, h) = (pano.width(), pano.height());
    for y in y0..y1 {
        for x in 0..intr.width {
            let ray = pixel_to_ray(intr, x as f64, y as f64);
            let dir = pose.rotation.mul_vec(ray);
            let (u, v) = dir_to_equirect(dir, w, h).expect("unit ray is non-zero");
            let c = sample_equirect(pano, u, v);
            let i = ((y - y0) * intr.width + x) * 3;
            out[i..i + 3].copy_from_slice(&c);
        }
    }
}

/// Resample a pinhole view out of the panorama: for every output pixel the
/// camera ray is rotated into the world and the panorama is sampled where
/// that direction lands.
pub fn extract_perspective(
    pano: &EquirectImage,
    pose: &CameraPose,
    intr: &Intrinsics,
) -> PerspectiveView {
    let mut data = vec![0.0; intr.width * intr.height * 3];
    extract_perspective_rows(pano, pose, intr, 0, intr.height, &mut data);
    let image = ImageRgb::from_data(intr.width, intr.height, data);
    PerspectiveView { image, pose: *pose, intrinsics: *intr }
}

/// Project a world direction into a view. Returns index-space coordinates
/// when the direction lies in front of the camera and inside the frustum
/// (boundary included, with a tiny tolerance for roundoff).
pub fn project_dir_into_view(intr: &Intrinsics, pose: &CameraPose, dir: Vec3) -> Option<(f64, f64)> {
    let d = pose.rotation.mul_vec_transposed(dir);
    if d.z <= 0.0 {
        return None;
    }
    let u = intr.fx * d.x / d.z + intr.cx - 0.5;
    let v = intr.fy * d.y / d.z + intr.cy - 0.5;
    const EPS: f64 = 1e-9;
    let inside = u + 0.5 >= -EPS
        && u + 0.5 <= intr.width as f64 + EPS
        && v + 0.5 >= -EPS
        && v + 0.5 <= intr.height as f64 + EPS;
    if inside {
        Some((u, v))
    } else {
        None
    }
}

/// Bilinear sample of a perspective image at index-space coordinates,
/// clamped at the borders.
fn sample_view_clamped(img: &ImageRgb, u: f64, v: f64) -> [f64; 3] {
    let clamp_x = |i: i64| -> usize { i.clamp(0, img.width() as i64 - 1) as usize };
    let clamp_y = |j: i64| -> usize { j.clamp(0, img.height() as i64 - 1) as usize };
    let x0f = libm::floor(u);
    let y0f = libm::floor(v);
    let fx = u - x0f;
    let fy = v - y0f;
    let (x0, x1) = (clamp_x(x0f as i64), clamp_x(x0f as i64 + 1));
    let (y0, y1) = (clamp_y(y0f as i64), clamp_y(y0f as i64 + 1));
    let c00 = img.get(x0, y0);
    let c10 = img.get(x1, y0);
    let c01 = img.get(x0, y1);
    let c11 = img.get(x1, y1);
    let mut out = [0.0; 3];
    for ch in 0..3 {
        let top = c00[ch] * (1.0 - fx) + c10[ch] * fx;
        let bot = c01[ch] * (1.0 - fx) + c11[ch] * fx;
        out[ch] = top * (1.0 - fy) + bot * fy;
    }
    out
}

/// Panorama rebuilt from perspective views, with a per-pixel coverage flag.
#[derive(Debug, Clone)]
pub struct RestitchResult {
    pub panorama: EquirectImage,
    pub covered: Vec<bool>,
    /// Fraction of panorama pixels covered by at least one view.
    pub coverage: f64,
}

/// Inverse of [`extract_perspective`]: every panorama pixel receives the
/// average of the bilinear samples from all views whose frustum contains
/// its direction. Uncovered pixels stay black and are flagged.
pub fn restitch_panorama(
    views: &[PerspectiveView],
    pano_w: usize,
    pano_h: usize,
) -> Result<RestitchResult> {
    if views.is_empty() {
        return Err(invalid("restitch needs at least one view"));
    }
    if pano_w != 2 * pano_h || pano_h == 0 {
        return Err(invalid("panorama width must equal 2 x height"));
    }
    let mut image = ImageRgb::new(pano_w, pano_h);
    let mut covered = vec![false; pano_w * pano_h];
    let mut n_covered = 0usize;
    for y in 0..pano_h {
        for x in 0..pano_w {
            let dir = equirect_pixel_dir(pano_w, pano_h, x, y);
            let mut acc = [0.0f64; 3];
            let mut hits = 0usize;
            for view in views {
                if let Some((u, v)) = project_dir_into_view(&view.intrinsics, &view.pose, dir) {
                    let c = sample_view_clamped(&view.image, u, v);
                    for ch in 0..3 {
                        acc[ch] += c[ch];
                    }
                    hits += 1;
                }
            }
            if hits > 0 {
                image.set(x, y, [acc[0] / hits as f64, acc[1] / hits as f64, acc[2] / hits as f64]);
                covered[y * pano_w + x] = true;
                n_covered += 1;
            }
        }
    }
    let coverage = n_covered as f64 / (pano_w * pano_h) as f64;
    Ok(RestitchResult { panorama: EquirectImage::new(image)?, covered, coverage })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn intrinsics_90_512_is_unit_tan() {
        let k = intrinsics_from_fov(90.0, 512, 512).unwrap();
        assert!((k.fx - 256.0).abs() < 1e-12);
        assert!((k.fy - 256.0).abs() < 1e-12);
        assert!((k.cx - 256.0).abs() < 1e-12);
        assert!((k.cy - 256.0).abs() < 1e-12);
    }

    #[test]
    fn intrinsics_60_512_matches_half_width_over_tan30() {
        let k = intrinsics_from_fov(60.0, 512, 512).unwrap();
        assert!((k.fx - 443.4050067376326).abs() < 1e-9);
        assert!((k.cx - 256.0).abs() < 1e-12);
    }

    #[test]
    fn intrinsics_rejects_degenerate_fov() {
        assert!(intrinsics_from_fov(180.0, 512, 512).is_err());
        assert!(intrinsics_from_fov(0.0, 512, 512).is_err());
        assert!(intrinsics_from_fov(-10.0, 512, 512).is_err());
        assert!(intrinsics_from_fov(90.0, 0, 512).is_err());
    }

    #[test]
    fn make_pose_identity() {
        let p = make_pose(0.0, 0.0).unwrap();
        assert_eq!(p.rotation, Mat3::IDENTITY);
        assert_eq!(p.translation, Vec3::ZERO);
    }

    #[test]
    fn make_pose_quarter_yaw() {
        let p = make_pose(PI / 2.0, 0.0).unwrap();
        let expect = [[0.0, 0.0, 1.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 0.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((p.rotation.rows[i][j] - expect[i][j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn make_pose_is_orthonormal() {
        let p = make_pose(PI / 4.0, PI / 6.0).unwrap();
        assert!(p.rotation.orthonormality_defect() < 1e-12);
        assert!((p.rotation.determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn make_pose_rejects_vertical_pitch() {
        assert!(make_pose(0.0, PI / 2.0).is_err());
        assert!(make_pose(0.0, -PI / 2.0).is_err());
    }

    #[test]
    fn trajectory_default_has_24_poses_middle_ring_first() {
        let t = generate_trajectory(8, &[-45.0, 0.0, 45.0], 90.0, 512, 512).unwrap();
        assert_eq!(t.poses.len(), 24);
        assert_eq!(t.poses[0].rotation, Mat3::IDENTITY);
        for pose in &t.poses {
            assert_eq!(pose.translation, Vec3::ZERO);
            assert!(pose.rotation.orthonormality_defect() < 1e-12);
        }
        // Ring order: pitch 0, then -45 (bottom), then +45 (top). The forward
        // direction of the first pose of each ring tells the pitch apart.
        let fwd = |i: usize| t.poses[i].rotation.mul_vec(Vec3::new(0.0, 0.0, 1.0));
        assert!(fwd(0).y.abs() < 1e-12);
        assert!(fwd(8).y > 0.5); // looking down: +y is down
        assert!(fwd(16).y < -0.5); // looking up
    }

    #[test]
    fn trajectory_single_pose() {
        let t = generate_trajectory(1, &[0.0], 90.0, 64, 64).unwrap();
        assert_eq!(t.poses.len(), 1);
        assert_eq!(t.poses[0].rotation, Mat3::IDENTITY);
    }

    #[test]
    fn trajectory_rejects_bad_input() {
        assert!(generate_trajectory(8, &[], 90.0, 512, 512).is_err());
        assert!(generate_trajectory(0, &[0.0], 90.0, 512, 512).is_err());
        assert!(generate_trajectory(8, &[90.0], 90.0, 512, 512).is_err());
        // 4 yaws at 90 degree steps do not overlap with a 90 degree fov.
        assert!(generate_trajectory(4, &[0.0], 90.0, 512, 512).is_err());
    }

    #[test]
    fn pixel_to_ray_principal_point_is_forward() {
        let k = intrinsics_from_fov(90.0, 512, 512).unwrap();
        let r = pixel_to_ray(&k, 255.5, 255.5);
        assert!((r - Vec3::new(0.0, 0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn pixel_to_ray_half_fov_edge() {
        let k = intrinsics_from_fov(90.0, 512, 512).unwrap();
        let r = pixel_to_ray(&k, 511.5, 255.5);
        assert!((r.x - 0.7071067811865475).abs() < 1e-12);
        assert!(r.y.abs() < 1e-12);
        assert!((r.z - 0.7071067811865475).abs() < 1e-12);
    }

    #[test]
    fn pixel_to_ray_is_unit() {
        let k = intrinsics_from_fov(70.0, 640, 480).unwrap();
        for &(u, v) in &[(0.0, 0.0), (12.25, 400.75), (639.0, 0.5), (320.0, 240.0)] {
            assert!((pixel_to_ray(&k, u, v).norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dir_to_equirect_cardinal_directions() {
        let (u, v) = dir_to_equirect(Vec3::new(0.0, 0.0, 1.0), 2048, 1024).unwrap();
        assert!((u - 1024.0).abs() < 1e-9 && (v - 512.0).abs() < 1e-9);
        let (u, v) = dir_to_equirect(Vec3::new(1.0, 0.0, 0.0), 2048, 1024).unwrap();
        assert!((u - 1536.0).abs() < 1e-9 && (v - 512.0).abs() < 1e-9);
        let (_, v) = dir_to_equirect(Vec3::new(0.0, -1.0, 0.0), 2048, 1024).unwrap();
        assert!(v.abs() < 1e-9);
        assert!(dir_to_equirect(Vec3::ZERO, 2048, 1024).is_err());
    }

    fn gradient_pano(w: usize, h: usize) -> EquirectImage {
        // Latitude gradient plus a longitude sinusoid: band-limited and
        // periodic, so bilinear sampling behaves the same across the seam.
        EquirectImage::new(ImageRgb::from_fn(w, h, |x, y| {
            [
                0.5 + 0.3 * libm::sin(TAU * (x as f64 + 0.5) / w as f64),
                0.1 + 0.8 * (y as f64 + 0.5) / h as f64,
                0.5,
            ]
        }))
        .unwrap()
    }

    #[test]
    fn sample_equirect_constant_and_center() {
        let pano =
            EquirectImage::new(ImageRgb::constant(64, 32, [0.25, 0.5, 0.75])).unwrap();
        assert_eq!(sample_equirect(&pano, 13.37, 7.5), [0.25, 0.5, 0.75]);
        let g = gradient_pano(64, 32);
        // Exactly at a pixel center, bilinear returns the stored color.
        let c = sample_equirect(&g, 10.5, 20.5);
        assert_eq!(c, g.image().get(10, 20));
    }

    #[test]
    fn sample_equirect_wraps_horizontally() {
        let g = gradient_pano(64, 32);
        let a = sample_equirect(&g, -0.25, 10.0);
        let b = sample_equirect(&g, 64.0 - 0.25, 10.0);
        for ch in 0..3 {
            assert!((a[ch] - b[ch]).abs() < 1e-12);
        }
    }

    #[test]
    fn extract_constant_pano_gives_constant_view() {
        let pano = EquirectImage::new(ImageRgb::constant(128, 64, [0.2, 0.4, 0.6])).unwrap();
        let k = intrinsics_from_fov(90.0, 32, 32).unwrap();
        let view = extract_perspective(&pano, &make_pose(0.4, -0.2).unwrap(), &k);
        for y in 0..32 {
            for x in 0..32 {
                assert_eq!(view.image.get(x, y), [0.2, 0.4, 0.6]);
            }
        }
    }

    #[test]
    fn extract_is_periodic_in_yaw() {
        let g = gradient_pano(128, 64);
        let k = intrinsics_from_fov(80.0, 24, 24).unwrap();
        let a = extract_perspective(&g, &make_pose(0.0, 0.1).unwrap(), &k);
        let b = extract_perspective(&g, &make_pose(TAU, 0.1).unwrap(), &k);
        for (pa, pb) in a.image.data().iter().zip(b.image.data()) {
            assert!((pa - pb).abs() < 1e-9);
        }
    }

    #[test]
    fn restitch_single_identity_view_covers_only_frustum() {
        let g = gradient_pano(128, 64);
        let k = intrinsics_from_fov(90.0, 48, 48).unwrap();
        let view = extract_perspective(&g, &CameraPose::identity(), &k);
        let r = restitch_panorama(&[view], 128, 64).unwrap();
        assert!(r.coverage > 0.05 && r.coverage < 0.5);
        for y in 0..64 {
            for x in 0..128 {
                let dir = equirect_pixel_dir(128, 64, x, y);
                let in_frustum = project_dir_into_view(&k, &CameraPose::identity(), dir).is_some();
                assert_eq!(r.covered[y * 128 + x], in_frustum);
            }
        }
    }
}
