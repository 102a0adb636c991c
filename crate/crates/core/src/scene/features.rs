//! Synthetic per-pixel feature vectors for masked object pixels.
//!
//! Each object gets a smooth random field over 3D surface points (a few
//! cosine waves seeded by the object id) plus one extra channel that lights
//! up near the ground-truth keypoint. Clustering then finds the keypoint
//! region as its own group without any learned backbone.

use rand::RngExt;

use super::camera::{dist3, CameraModel, Capture};
use super::SceneObject;
use crate::keypoints::FeatureGrid;
use crate::rng;

pub const FEATURE_DIM: usize = 8;
/// Spatial spread of the keypoint channel, meters.
pub const LOBE_SIGMA: f64 = 0.04;

struct Wave {
    k: [f64; 3],
    phase: f64,
}

fn waves(object: &SceneObject) -> Vec<Wave> {
    let mut r = rng::stream(rng::fnv1a(object.id.as_bytes()), "feature-field");
    (0..FEATURE_DIM - 1)
        .map(|_| {
            let az: f64 = r.random_range(0.0..std::f64::consts::TAU);
            let el: f64 = r.random_range(-1.0f64..1.0).asin();
            let wavelength: f64 = r.random_range(0.25..0.6);
            let m = std::f64::consts::TAU / wavelength;
            Wave { k: [m * el.cos() * az.cos(), m * el.cos() * az.sin(), m * el.sin()], phase: r.random_range(0.0..std::f64::consts::TAU) }
        })
        .collect()
}

fn feature_at(waves: &[Wave], keypoint: [f64; 3], p: [f64; 3]) -> Vec<f32> {
    let d = dist3(p, keypoint);
    let lobe = (-d * d / (2.0 * LOBE_SIGMA * LOBE_SIGMA)).exp();
    let mut f: Vec<f32> = waves
        .iter()
        .map(|w| {
            let s = (w.k[0] * p[0] + w.k[1] * p[1] + w.k[2] * p[2] + w.phase).cos();
            ((1.0 - lobe) * (0.6 + 0.4 * s)) as f32
        })
        .collect();
    f.push((3.0 * lobe) as f32);
    f
}

/// Feature grid for `object` as seen in `capture`.
pub fn synthesize(object: &SceneObject, capture: &Capture, camera: &CameraModel) -> FeatureGrid {
    let w = waves(object);
    let mut data = vec![0.0f32; capture.width * capture.height * FEATURE_DIM];
    let mut mask = capture.mask.clone();
    for v in 0..capture.height {
        for u in 0..capture.width {
            let idx = v * capture.width + u;
            if !mask[idx] {
                continue;
            }
            let z = capture.depth[idx];
            if !z.is_finite() {
                mask[idx] = false;
                continue;
            }
            let p = camera.backproject(u as f64, v as f64, z);
            data[idx * FEATURE_DIM..(idx + 1) * FEATURE_DIM].copy_from_slice(&feature_at(&w, object.gt_keypoint, p));
        }
    }
    FeatureGrid { width: capture.width, height: capture.height, dim: FEATURE_DIM, data, mask }
}
