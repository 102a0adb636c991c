//! Pinhole camera, ray–box casting, and synthetic depth/mask capture.
//!
//! Camera frame follows the usual vision convention: x right, y down,
//! z forward. Depth images store z-depth, i.e. the distance along the
//! optical axis, so `X_c = ((u − cx)·z/fx, (v − cy)·z/fy, z)`.

use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Box3;
use crate::pnm::{self, Pgm};

pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];

pub fn dot3(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn sub3(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn cross3(a: Vec3, b: Vec3) -> Vec3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub fn norm3(a: Vec3) -> f64 {
    dot3(a, a).sqrt()
}

pub fn dist3(a: Vec3, b: Vec3) -> f64 {
    norm3(sub3(a, b))
}

fn scale3(a: Vec3, k: f64) -> Vec3 {
    [a[0] * k, a[1] * k, a[2] * k]
}

/// Camera→world rigid transform: `p_w = R·p_c + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform {
    pub rotation: Mat3,
    pub translation: Vec3,
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self { rotation: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]], translation: [0.0; 3] }
    }

    pub fn apply(&self, p: Vec3) -> Vec3 {
        let r = &self.rotation;
        [
            dot3(r[0], p) + self.translation[0],
            dot3(r[1], p) + self.translation[1],
            dot3(r[2], p) + self.translation[2],
        ]
    }

    pub fn rotate(&self, v: Vec3) -> Vec3 {
        let r = &self.rotation;
        [dot3(r[0], v), dot3(r[1], v), dot3(r[2], v)]
    }

    /// Orthonormal with determinant +1, to `tol`.
    pub fn is_proper(&self, tol: f64) -> bool {
        let r = &self.rotation;
        let cols: [Vec3; 3] = [
            [r[0][0], r[1][0], r[2][0]],
            [r[0][1], r[1][1], r[2][1]],
            [r[0][2], r[1][2], r[2][2]],
        ];
        for a in 0..3 {
            for b in 0..3 {
                let want = if a == b { 1.0 } else { 0.0 };
                if (dot3(cols[a], cols[b]) - want).abs() > tol {
                    return false;
                }
            }
        }
        (dot3(cross3(cols[0], cols[1]), cols[2]) - 1.0).abs() <= tol
    }

    /// Camera at `eye` looking at `target` with world +z up.
    pub fn look_at(eye: Vec3, target: Vec3) -> Self {
        let fwd = sub3(target, eye);
        let z = scale3(fwd, 1.0 / norm3(fwd));
        let mut x = cross3(z, [0.0, 0.0, 1.0]);
        if norm3(x) < 1e-9 {
            x = [1.0, 0.0, 0.0];
        }
        let x = scale3(x, 1.0 / norm3(x));
        let y = cross3(z, x);
        Self {
            rotation: [[x[0], y[0], z[0]], [x[1], y[1], z[1]], [x[2], y[2], z[2]]],
            translation: eye,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    pub extrinsic: RigidTransform,
}

impl CameraModel {
    /// Camera-frame direction through pixel `(u, v)`, scaled so z = 1.
    pub fn pixel_ray(&self, u: f64, v: f64) -> Vec3 {
        [(u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0]
    }

    /// World point seen at pixel `(u, v)` with z-depth `z`.
    pub fn backproject(&self, u: f64, v: f64, z: f64) -> Vec3 {
        self.extrinsic.apply(scale3(self.pixel_ray(u, v), z))
    }

    pub fn with_extrinsic(&self, extrinsic: RigidTransform) -> Self {
        Self { extrinsic, ..*self }
    }
}

/// Ray parameter of the first hit of `o + t·d` (t ≥ 0) with an axis-aligned
/// box given by half extents around the origin.
pub fn ray_aabb(o: Vec3, d: Vec3, half: Vec3) -> Option<f64> {
    let mut t0 = 0.0f64;
    let mut t1 = f64::INFINITY;
    for a in 0..3 {
        if d[a] == 0.0 {
            if o[a] < -half[a] || o[a] > half[a] {
                return None;
            }
            continue;
        }
        let inv = 1.0 / d[a];
        let mut lo = (-half[a] - o[a]) * inv;
        let mut hi = (half[a] - o[a]) * inv;
        if lo > hi {
            std::mem::swap(&mut lo, &mut hi);
        }
        t0 = t0.max(lo);
        t1 = t1.min(hi);
        if t0 > t1 {
            return None;
        }
    }
    Some(t0)
}

/// First hit of a world ray with a yawed box.
pub fn ray_box(o: Vec3, d: Vec3, b: &Box3) -> Option<f64> {
    let (s, c) = (-b.yaw).sin_cos();
    let rel = sub3(o, b.center);
    let lo = [c * rel[0] - s * rel[1], s * rel[0] + c * rel[1], rel[2]];
    let ld = [c * d[0] - s * d[1], s * d[0] + c * d[1], d[2]];
    ray_aabb(lo, ld, scale3(b.extents, 0.5))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Capture {
    pub width: usize,
    pub height: usize,
    /// Z-depth in meters, `+∞` where nothing was hit.
    pub depth: Vec<f64>,
    pub mask: Vec<bool>,
}

impl Capture {
    pub fn masked_pixels(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }

    /// 16-bit PGM, millimeters rounded to nearest; 0 = no return, values
    /// beyond 65.534 m saturate at 65534.
    pub fn depth_pgm(&self) -> Pgm {
        let data = self
            .depth
            .iter()
            .map(|d| if d.is_finite() { (d * 1000.0).round().clamp(1.0, 65534.0) as u16 } else { 0 })
            .collect();
        Pgm { width: self.width, height: self.height, maxval: 65535, data }
    }

    pub fn mask_pgm(&self) -> Pgm {
        let data = self.mask.iter().map(|m| if *m { 255 } else { 0 }).collect();
        Pgm { width: self.width, height: self.height, maxval: 255, data }
    }

    pub fn save_debug(&self, dir: &Path, stem: &str) -> io::Result<()> {
        std::fs::create_dir_all(dir)?;
        pnm::write_pgm(std::fs::File::create(dir.join(format!("{stem}_depth.pgm")))?, &self.depth_pgm())?;
        pnm::write_pgm(std::fs::File::create(dir.join(format!("{stem}_mask.pgm")))?, &self.mask_pgm())
    }
}

/// Cast one ray per pixel centre against `boxes`; the mask marks pixels whose
/// nearest hit belongs to `boxes[target]`.
pub fn capture_boxes(camera: &CameraModel, boxes: &[Box3], target: usize) -> Capture {
    let n = camera.width * camera.height;
    let mut depth = vec![f64::INFINITY; n];
    let mut mask = vec![false; n];
    let o = camera.extrinsic.translation;
    for v in 0..camera.height {
        for u in 0..camera.width {
            let d = camera.extrinsic.rotate(camera.pixel_ray(u as f64, v as f64));
            let mut best = f64::INFINITY;
            let mut who = usize::MAX;
            for (k, b) in boxes.iter().enumerate() {
                if let Some(t) = ray_box(o, d, b) {
                    if t < best {
                        best = t;
                        who = k;
                    }
                }
            }
            let idx = v * camera.width + u;
            depth[idx] = best;
            mask[idx] = who == target;
        }
    }
    Capture { width: camera.width, height: camera.height, depth, mask }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cam(extrinsic: RigidTransform) -> CameraModel {
        CameraModel { fx: 100.0, fy: 100.0, cx: 32.0, cy: 24.0, width: 65, height: 49, extrinsic }
    }

    fn unit_box(center: Vec3) -> Box3 {
        Box3 { center, extents: [1.0, 1.0, 1.0], yaw: 0.0 }
    }

    #[test]
    fn on_axis_box_depth() {
        let c = cam(RigidTransform::identity());
        let cap = capture_boxes(&c, &[unit_box([0.0, 0.0, 2.0])], 0);
        let mid = 24 * 65 + 32;
        assert!((cap.depth[mid] - 1.5).abs() < 1e-12);
        assert!(cap.mask[mid]);
    }

    #[test]
    fn looking_down_negative_z() {
        let flip = RigidTransform {
            rotation: [[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]],
            translation: [0.0; 3],
        };
        assert!(flip.is_proper(1e-12));
        let cap = capture_boxes(&cam(flip), &[unit_box([0.0, 0.0, -2.0])], 0);
        assert!((cap.depth[24 * 65 + 32] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn miss_is_infinite_and_unmasked() {
        let small = Box3 { center: [0.0, 0.0, 2.0], extents: [0.4, 0.4, 0.4], yaw: 0.0 };
        let cap = capture_boxes(&cam(RigidTransform::identity()), &[small], 0);
        assert!(cap.depth[0].is_infinite());
        assert!(!cap.mask[0]);
    }

    #[test]
    fn nearer_box_occludes_target() {
        let c = cam(RigidTransform::identity());
        let boxes = [unit_box([0.0, 0.0, 4.0]), unit_box([0.0, 0.0, 2.0])];
        let cap = capture_boxes(&c, &boxes, 0);
        assert!(!cap.mask[24 * 65 + 32]);
    }

    #[test]
    fn look_at_is_proper_and_centres_target() {
        let t = RigidTransform::look_at([0.3, -1.0, 1.2], [1.0, 1.0, 0.4]);
        assert!(t.is_proper(1e-12));
        let c = cam(t);
        let p = c.backproject(c.cx, c.cy, dist3([0.3, -1.0, 1.2], [1.0, 1.0, 0.4]));
        assert!(dist3(p, [1.0, 1.0, 0.4]) < 1e-12);
        // image "down" has a negative world z component
        assert!(t.rotate([0.0, 1.0, 0.0])[2] < 0.0);
    }

    #[test]
    fn depth_dump_uses_millimetres() {
        let cap = Capture { width: 2, height: 1, depth: vec![1.2345, f64::INFINITY], mask: vec![true, false] };
        assert_eq!(cap.depth_pgm().data, vec![1235, 0]);
        assert_eq!(cap.mask_pgm().data, vec![255, 0]);
    }

    // Independent slab oracle: intersect with each of the six face planes and
    // keep the nearest hit whose point lies on the face.
    fn face_oracle(o: Vec3, d: Vec3, b: &Box3) -> Option<f64> {
        let (s, c) = b.yaw.sin_cos();
        let axes = [[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]];
        let half = [b.extents[0] / 2.0, b.extents[1] / 2.0, b.extents[2] / 2.0];
        let rel = sub3(o, b.center);
        let inside = (0..3).all(|a| dot3(rel, axes[a]).abs() <= half[a]);
        if inside {
            return Some(0.0);
        }
        let mut best: Option<f64> = None;
        for a in 0..3 {
            let dn = dot3(d, axes[a]);
            if dn == 0.0 {
                continue;
            }
            for sign in [-1.0, 1.0] {
                let t = (sign * half[a] - dot3(rel, axes[a])) / dn;
                if t < 0.0 {
                    continue;
                }
                let p = [rel[0] + t * d[0], rel[1] + t * d[1], rel[2] + t * d[2]];
                let on = (0..3).all(|k| k == a || dot3(p, axes[k]).abs() <= half[k] + 1e-12);
                if on && best.is_none_or(|b| t < b) {
                    best = Some(t);
                }
            }
        }
        best
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(500))]
        #[test]
        fn ray_box_matches_face_oracle(
            cx in -2.0f64..2.0, cy in -2.0f64..2.0, cz in 0.0f64..2.0,
            ex in 0.1f64..1.0, ey in 0.1f64..1.0, ez in 0.1f64..1.0, yaw in -3.1f64..3.1,
            ox in -4.0f64..4.0, oy in -4.0f64..4.0, oz in 1.0f64..3.0,
            px in -2.0f64..2.0, py in -2.0f64..2.0, pz in 0.0f64..2.0,
        ) {
            let b = Box3 { center: [cx, cy, cz], extents: [ex, ey, ez], yaw };
            let o = [ox, oy, oz];
            let d = sub3([px, py, pz], o);
            prop_assume!(norm3(d) > 1e-3);
            let got = ray_box(o, d, &b);
            let want = face_oracle(o, d, &b);
            match (got, want) {
                (Some(g), Some(w)) => prop_assert!((g - w).abs() * norm3(d) < 1e-9, "{} vs {}", g, w),
                (None, None) => {}
                // grazing rays may land on either side of an edge
                (g, w) => {
                    let t = g.or(w).unwrap();
                    let p = [o[0] + t * d[0] - cx, o[1] + t * d[1] - cy, o[2] + t * d[2] - cz];
                    let (s, c) = yaw.sin_cos();
                    let lx = (c * p[0] + s * p[1]).abs() - ex / 2.0;
                    let ly = (-s * p[0] + c * p[1]).abs() - ey / 2.0;
                    let lz = p[2].abs() - ez / 2.0;
                    let edge = [lx, ly, lz].iter().filter(|v| v.abs() < 1e-9).count();
                    prop_assert!(edge >= 2);
                }
            }
        }
    }
}
