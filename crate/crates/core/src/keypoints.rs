//! Affordance point proposals: cosine k-means over masked pixel features,
//! snapping to pixels, back-projection, and proximity pruning.

use std::io;
use std::path::Path;

use rand::RngExt;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Vec2;
use crate::oracle::{self, Attachment, Exchange, OptionItem, OracleError, OracleQuery, QueryKind, SemanticOracle};
use crate::rng;
use crate::scene::camera::{dist3, CameraModel, Capture, Vec3};
use crate::Point;

pub const DEFAULT_K: usize = 20;
pub const MAX_ITERS: usize = 100;
pub const PRUNE_DISTANCE: f64 = 0.08;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KeypointError {
    #[error("no masked pixels to cluster")]
    NoPixels,
    #[error("no keypoint proposals")]
    NoProposals,
    #[error("oracle: {0}")]
    Oracle(#[from] OracleError),
}

/// Per-pixel features over an image, with the object mask.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGrid {
    pub width: usize,
    pub height: usize,
    pub dim: usize,
    /// Row-major, `dim` values per pixel.
    pub data: Vec<f32>,
    pub mask: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureHeader {
    pub height: usize,
    pub width: usize,
    pub dim: usize,
}

impl FeatureGrid {
    pub fn feature(&self, pixel: usize) -> &[f32] {
        &self.data[pixel * self.dim..(pixel + 1) * self.dim]
    }

    pub fn masked(&self) -> Vec<usize> {
        (0..self.mask.len()).filter(|k| self.mask[*k]).collect()
    }

    /// Raw little-endian `f32` body plus a `{height, width, dim}` sidecar
    /// (`<stem>.json`) and the mask as a binary PGM (`<stem>.mask.pgm`).
    pub fn save(&self, path: &Path) -> io::Result<()> {
        let mut bytes = Vec::with_capacity(self.data.len() * 4);
        for v in &self.data {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        std::fs::write(path, bytes)?;
        let h = FeatureHeader { height: self.height, width: self.width, dim: self.dim };
        std::fs::write(path.with_extension("json"), serde_json::to_vec_pretty(&h).map_err(io::Error::other)?)?;
        let pgm = crate::pnm::Pgm { width: self.width, height: self.height, maxval: 255, data: self.mask.iter().map(|m| if *m { 255 } else { 0 }).collect() };
        crate::pnm::write_pgm(std::fs::File::create(path.with_extension("mask.pgm"))?, &pgm)
    }

    pub fn load(path: &Path) -> io::Result<Self> {
        let h: FeatureHeader = serde_json::from_slice(&std::fs::read(path.with_extension("json"))?).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
        let bytes = std::fs::read(path)?;
        if bytes.len() != h.height * h.width * h.dim * 4 {
            return Err(io::Error::new(io::ErrorKind::InvalidData, "feature body size disagrees with header"));
        }
        let data = bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
        let m = crate::pnm::read_pgm(std::fs::File::open(path.with_extension("mask.pgm"))?)?;
        Ok(Self { width: h.width, height: h.height, dim: h.dim, data, mask: m.data.iter().map(|v| *v > 0).collect() })
    }
}

fn unit(v: &[f32]) -> Vec<f64> {
    let n: f64 = v.iter().map(|x| f64::from(*x).powi(2)).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter().map(|x| f64::from(*x) / n).collect()
    } else {
        vec![0.0; v.len()]
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Cosine distance between unit vectors.
fn cdist(a: &[f64], b: &[f64]) -> f64 {
    1.0 - dot(a, b)
}

fn normalized_mean(points: &[Vec<f64>], members: impl Iterator<Item = usize>, dim: usize) -> Vec<f64> {
    let mut acc = vec![0.0; dim];
    for m in members {
        for (a, x) in acc.iter_mut().zip(&points[m]) {
            *a += x;
        }
    }
    let n = dot(&acc, &acc).sqrt();
    if n > 0.0 {
        acc.iter_mut().for_each(|a| *a /= n);
    }
    acc
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    pub requested_k: usize,
    pub k: usize,
    /// Masked pixel indices, in image order.
    pub pixels: Vec<usize>,
    pub assignment: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub iterations: usize,
    /// Σ (1 − cos) after each assignment step.
    pub cost_history: Vec<f64>,
}

/// Assignment cost for given unit points and centroids.
pub fn clustering_cost(points: &[Vec<f64>], assignment: &[usize], centroids: &[Vec<f64>]) -> f64 {
    points.iter().zip(assignment).map(|(p, a)| cdist(p, &centroids[*a])).sum()
}

fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut bd = f64::INFINITY;
    for (k, c) in centroids.iter().enumerate() {
        let d = cdist(p, c);
        if d < bd {
            bd = d;
            best = k;
        }
    }
    best
}

/// Spherical k-means with k-means++ seeding.
pub fn cluster_features(features: &FeatureGrid, k: usize, seed: u64) -> Result<Clustering, KeypointError> {
    let pixels = features.masked();
    if pixels.is_empty() {
        return Err(KeypointError::NoPixels);
    }
    let points: Vec<Vec<f64>> = pixels.iter().map(|p| unit(features.feature(*p))).collect();
    let requested_k = k.max(1);
    let k = requested_k.min(points.len());
    let n = points.len();
    let dim = features.dim;
    let mut r = rng::stream(seed, "kmeans");

    let mut centroids: Vec<Vec<f64>> = vec![points[r.random_range(0..n)].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| cdist(p, &centroids[0]).max(0.0).powi(2)).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut t = r.random_range(0.0..total);
            let mut idx = n - 1;
            for (i, w) in d2.iter().enumerate() {
                if t < *w {
                    idx = i;
                    break;
                }
                t -= w;
            }
            idx
        } else {
            r.random_range(0..n)
        };
        centroids.push(points[pick].clone());
        let c = centroids.last().expect("just pushed");
        for (d, p) in d2.iter_mut().zip(&points) {
            *d = d.min(cdist(p, c).max(0.0).powi(2));
        }
    }

    let mut assignment: Vec<usize> = points.iter().map(|p| nearest(p, &centroids)).collect();
    let mut cost_history = vec![clustering_cost(&points, &assignment, &centroids)];
    let mut iterations = 0;
    while iterations < MAX_ITERS {
        iterations += 1;
        for (j, c) in centroids.iter_mut().enumerate() {
            let members = (0..n).filter(|i| assignment[*i] == j);
            let mut any = members.clone().peekable();
            if any.peek().is_some() {
                *c = normalized_mean(&points, members, dim);
            }
        }
        #[allow(clippy::needless_range_loop)]
        for j in 0..k {
            if assignment.contains(&j) {
                continue;
            }
            // empty: take over the point farthest from this centroid
            let far = (0..n)
                .max_by(|a, b| cdist(&points[*a], &centroids[j]).total_cmp(&cdist(&points[*b], &centroids[j])).then(b.cmp(a)))
                .expect("non-empty");
            assignment[far] = j;
            centroids[j] = points[far].clone();
        }
        let next: Vec<usize> = points.iter().map(|p| nearest(p, &centroids)).collect();
        cost_history.push(clustering_cost(&points, &next, &centroids));
        if next == assignment {
            break;
        }
        assignment = next;
    }
    Ok(Clustering { requested_k, k, pixels, assignment, centroids, iterations, cost_history })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeypointProposal {
    pub pixel: (usize, usize),
    pub point3d: Vec3,
    pub cluster_id: usize,
}

impl KeypointProposal {
    pub fn xy(&self) -> Point {
        Vec2::new(self.point3d[0], self.point3d[1])
    }
}

/// Snap each cluster to its most similar masked pixel, back-project, prune.
pub fn propose_keypoints(clusters: &Clustering, features: &FeatureGrid, capture: &Capture, camera: &CameraModel) -> Vec<KeypointProposal> {
    let units: Vec<Vec<f64>> = clusters.pixels.iter().map(|p| unit(features.feature(*p))).collect();
    let mut raw = Vec::new();
    for (cid, c) in clusters.centroids.iter().enumerate() {
        let mut best: Option<(usize, f64)> = None;
        for (k, u) in units.iter().enumerate() {
            let px = clusters.pixels[k];
            if !capture.depth[px].is_finite() {
                continue;
            }
            let s = dot(u, c);
            if best.is_none_or(|(_, bs)| s > bs) {
                best = Some((px, s));
            }
        }
        if let Some((px, _)) = best {
            let (u, v) = (px % features.width, px / features.width);
            let point3d = camera.backproject(u as f64, v as f64, capture.depth[px]);
            raw.push(KeypointProposal { pixel: (u, v), point3d, cluster_id: cid });
        }
    }
    prune(raw, PRUNE_DISTANCE)
}

/// Greedy filter in the given order: drop anything closer than `min_dist`
/// to an already kept proposal.
pub fn prune(proposals: Vec<KeypointProposal>, min_dist: f64) -> Vec<KeypointProposal> {
    let mut kept: Vec<KeypointProposal> = Vec::new();
    for p in proposals {
        if kept.iter().all(|k| dist3(k.point3d, p.point3d) >= min_dist) {
            kept.push(p);
        }
    }
    kept
}

/// Let the oracle choose g among the proposals.
pub fn select_affordance_point(
    proposals: &[KeypointProposal],
    instruction: &str,
    oracle: &mut dyn SemanticOracle,
    attachments: Vec<Attachment>,
    log: &mut Vec<Exchange>,
) -> Result<(usize, Point), KeypointError> {
    match proposals.len() {
        0 => Err(KeypointError::NoProposals),
        1 => Ok((0, proposals[0].xy())),
        _ => {
            let q = OracleQuery {
                kind: QueryKind::Keypoint,
                instruction: instruction.to_string(),
                attachments,
                options: proposals.iter().enumerate().map(|(i, p)| OptionItem { index: i as i32, position: Some(p.xy()), bearing: None }).collect(),
                want: 1,
            };
            let r = oracle::ask(oracle, &q, log)?;
            let i = r.indices[0] as usize;
            Ok((i, proposals[i].xy()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{GroundTruth, OracleReply, ScriptedOracle, ScriptedOracleConfig};
    use proptest::prelude::*;

    fn grid_from(points: &[Vec<f32>]) -> FeatureGrid {
        let dim = points[0].len();
        FeatureGrid { width: points.len(), height: 1, dim, data: points.concat(), mask: vec![true; points.len()] }
    }

    fn random_grid(n: usize, dim: usize, seed: u64) -> FeatureGrid {
        let mut r = rng::stream(seed, "test-features");
        let pts: Vec<Vec<f32>> = (0..n).map(|_| (0..dim).map(|_| r.random_range(-1.0f32..1.0)).collect()).collect();
        grid_from(&pts)
    }

    #[test]
    fn single_cluster_is_normalised_mean() {
        let fg = grid_from(&[vec![1.0, 0.0], vec![0.0, 2.0], vec![3.0, 3.0]]);
        let c = cluster_features(&fg, 1, 0).unwrap();
        assert!(c.assignment.iter().all(|a| *a == 0));
        let s = 1.0 / 2f64.sqrt();
        let m = [1.0 + s, 1.0 + s];
        let n = (m[0] * m[0] + m[1] * m[1]).sqrt();
        assert!((c.centroids[0][0] - m[0] / n).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_groups_separate() {
        let mut pts = Vec::new();
        for k in 0..10 {
            pts.push(vec![1.0 + k as f32 * 0.01, 0.0, 0.0]);
            pts.push(vec![0.0, 0.0, 2.0 - k as f32 * 0.01]);
        }
        let fg = grid_from(&pts);
        for seed in 0..10 {
            let c = cluster_features(&fg, 2, seed).unwrap();
            for i in (0..20).step_by(2) {
                assert_eq!(c.assignment[i], c.assignment[0]);
                assert_eq!(c.assignment[i + 1], c.assignment[1]);
            }
            assert_ne!(c.assignment[0], c.assignment[1]);
        }
    }

    #[test]
    fn k_larger_than_pixels_is_reduced() {
        let fg = grid_from(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let c = cluster_features(&fg, 20, 0).unwrap();
        assert_eq!((c.requested_k, c.k), (20, 2));
    }

    #[test]
    fn result_is_fixed_point_and_beats_random() {
        let fg = random_grid(300, 6, 1);
        let c = cluster_features(&fg, 5, 7).unwrap();
        let pts: Vec<Vec<f64>> = c.pixels.iter().map(|p| unit(fg.feature(*p))).collect();
        let re: Vec<usize> = pts.iter().map(|p| nearest(p, &c.centroids)).collect();
        assert_eq!(re, c.assignment);
        let cost = clustering_cost(&pts, &c.assignment, &c.centroids);
        let mut r = rng::stream(3, "random-assign");
        for _ in 0..100 {
            let a: Vec<usize> = (0..pts.len()).map(|_| r.random_range(0..5)).collect();
            let cents: Vec<Vec<f64>> = (0..5).map(|j| normalized_mean(&pts, (0..pts.len()).filter(|i| a[*i] == j), 6)).collect();
            assert!(cost <= clustering_cost(&pts, &a, &cents));
        }
    }

    #[test]
    fn cost_never_increases() {
        for seed in 0..5 {
            let c = cluster_features(&random_grid(200, 4, seed), 8, seed).unwrap();
            for w in c.cost_history.windows(2) {
                assert!(w[1] <= w[0] + 1e-9, "{:?}", c.cost_history);
            }
        }
    }

    #[test]
    fn scaling_features_keeps_assignment() {
        let fg = random_grid(150, 5, 2);
        let mut scaled = fg.clone();
        scaled.data.iter_mut().for_each(|v| *v *= 4.0);
        assert_eq!(cluster_features(&fg, 6, 1).unwrap().assignment, cluster_features(&scaled, 6, 1).unwrap().assignment);
    }

    fn prop(x: f64, cid: usize) -> KeypointProposal {
        KeypointProposal { pixel: (0, 0), point3d: [x, 0.0, 0.0], cluster_id: cid }
    }

    #[test]
    fn prune_boundaries() {
        assert_eq!(prune(vec![prop(0.0, 0), prop(0.05, 1)], PRUNE_DISTANCE).len(), 1);
        let kept = prune(vec![prop(0.0, 0), prop(0.08, 1)], PRUNE_DISTANCE);
        assert_eq!(kept.len(), 2);
    }

    fn brute_greedy(ps: &[KeypointProposal]) -> Vec<usize> {
        let mut keep: Vec<usize> = vec![];
        for i in 0..ps.len() {
            let mut ok = true;
            for &j in &keep {
                let a: Vec3 = ps[i].point3d;
                let b: Vec3 = ps[j].point3d;
                let d = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt();
                if d < 0.08 {
                    ok = false;
                }
            }
            if ok {
                keep.push(i);
            }
        }
        keep
    }

    proptest! {
        #[test]
        fn prune_matches_brute_force(pts in proptest::collection::vec((0.0f64..0.3, 0.0f64..0.3, 0.0f64..0.3), 1..20)) {
            let ps: Vec<KeypointProposal> = pts.iter().enumerate().map(|(i, p)| KeypointProposal { pixel: (i, 0), point3d: [p.0, p.1, p.2], cluster_id: i }).collect();
            let kept = prune(ps.clone(), PRUNE_DISTANCE);
            let want: Vec<usize> = brute_greedy(&ps);
            prop_assert_eq!(kept.iter().map(|k| k.cluster_id).collect::<Vec<_>>(), want);
            for a in 0..kept.len() {
                for b in a + 1..kept.len() {
                    prop_assert!(dist3(kept[a].point3d, kept[b].point3d) >= PRUNE_DISTANCE);
                }
            }
        }
    }

    #[test]
    fn scripted_picks_nearest_to_truth() {
        let ps = vec![prop(0.0, 0), prop(0.3, 1), KeypointProposal { pixel: (0, 0), point3d: [0.52, 0.03, 0.1], cluster_id: 2 }];
        let truth = GroundTruth { object_center: Vec2::zero(), keypoint: Vec2::new(0.5, 0.0), direction: 0.0, half_angle: 1.0 };
        let mut o = ScriptedOracle::new(ScriptedOracleConfig { noise_epsilon: 0.0, ..Default::default() }, truth);
        let mut log = vec![];
        let (i, g) = select_affordance_point(&ps, "x", &mut o, vec![], &mut log).unwrap();
        assert_eq!(i, 2);
        assert!((g.x - 0.52).abs() < 1e-12);
    }

    struct Bad;
    impl SemanticOracle for Bad {
        fn answer(&mut self, _: &OracleQuery) -> Result<OracleReply, OracleError> {
            Ok(OracleReply { indices: vec![99], raw: String::new() })
        }
    }

    #[test]
    fn single_proposal_skips_oracle_and_bad_index_aborts() {
        let mut log = vec![];
        assert_eq!(select_affordance_point(&[prop(0.1, 0)], "x", &mut Bad, vec![], &mut log).unwrap().0, 0);
        assert!(log.is_empty());
        let five: Vec<_> = (0..5).map(|i| prop(i as f64, i)).collect();
        assert!(select_affordance_point(&five, "x", &mut Bad, vec![], &mut log).is_err());
        assert_eq!(log.len(), 2);
    }

    #[test]
    fn feature_file_round_trip() {
        let fg = FeatureGrid { width: 2, height: 2, dim: 3, data: (0..12).map(|v| v as f32 * 0.5 - 1.0).collect(), mask: vec![true, false, true, true] };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.bin");
        fg.save(&p).unwrap();
        assert_eq!(FeatureGrid::load(&p).unwrap(), fg);
        let raw = std::fs::read(&p).unwrap();
        assert_eq!(&raw[..4], &(-1.0f32).to_le_bytes());
    }
}
