//! Exact Euclidean distance transform (Felzenszwalb & Huttenlocher).
//!
//! Squared distances are computed in whole cells, so they are exact
//! integers held in `f64`; the metric value is `sqrt(d²)·resolution`.

use super::{CellState, OccupancyGrid};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMap<T: Real> {
    pub width: usize,
    pub height: usize,
    /// Meters to the nearest obstacle cell centre, `+∞` if there is none.
    pub values: Vec<T>,
}

impl<T: Real> DistanceMap<T> {
    pub fn at(&self, i: usize, j: usize) -> T {
        self.values[j * self.width + i]
    }
}

/// Distance to the nearest Occupied cell.
pub fn distance_transform<T: Real>(grid: &OccupancyGrid<T>) -> DistanceMap<T> {
    distance_transform_where(grid, |s| s == CellState::Occupied)
}

/// Distance to the nearest cell for which `obstacle` holds.
pub fn distance_transform_where<T: Real>(grid: &OccupancyGrid<T>, obstacle: impl Fn(CellState) -> bool) -> DistanceMap<T> {
    let (w, h) = (grid.width, grid.height);
    let mut d2: Vec<f64> = grid
        .cells
        .iter()
        .map(|s| if obstacle(*s) { 0.0 } else { f64::INFINITY })
        .collect();

    let n = w.max(h);
    let mut f = vec![0.0; n];
    let mut out = vec![0.0; n];
    let mut v = vec![0usize; n];
    let mut z = vec![0.0; n + 1];

    for j in 0..h {
        f[..w].copy_from_slice(&d2[j * w..(j + 1) * w]);
        edt_1d(&f[..w], &mut out[..w], &mut v, &mut z);
        d2[j * w..(j + 1) * w].copy_from_slice(&out[..w]);
    }
    for i in 0..w {
        for j in 0..h {
            f[j] = d2[j * w + i];
        }
        edt_1d(&f[..h], &mut out[..h], &mut v, &mut z);
        for j in 0..h {
            d2[j * w + i] = out[j];
        }
    }

    let res = grid.resolution;
    let values = d2
        .into_iter()
        .map(|x| if x.is_finite() { T::lit(x.sqrt()) * res } else { T::infinity() })
        .collect();
    DistanceMap { width: w, height: h, values }
}

/// Lower envelope of parabolas rooted at the finite samples of `f`.
fn edt_1d(f: &[f64], out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k: isize = -1;
    for q in 0..n {
        if !f[q].is_finite() {
            continue;
        }
        let qf = q as f64;
        loop {
            if k < 0 {
                k = 0;
                v[0] = q;
                z[0] = f64::NEG_INFINITY;
                z[1] = f64::INFINITY;
                break;
            }
            let p = v[k as usize];
            let pf = p as f64;
            let s = ((f[q] + qf * qf) - (f[p] + pf * pf)) / (2.0 * qf - 2.0 * pf);
            if s <= z[k as usize] {
                k -= 1;
                continue;
            }
            k += 1;
            v[k as usize] = q;
            z[k as usize] = s;
            z[k as usize + 1] = f64::INFINITY;
            break;
        }
    }
    if k < 0 {
        out.iter_mut().for_each(|o| *o = f64::INFINITY);
        return;
    }
    let mut k = 0usize;
    for (q, o) in out.iter_mut().enumerate() {
        let qf = q as f64;
        while z[k + 1] < qf {
            k += 1;
        }
        let p = v[k] as f64;
        *o = (qf - p) * (qf - p) + f[v[k]];
    }
}
