//! Kernel-density images of the candidate clouds, one per iteration.

use crate::gridmap::{CellState, Cell};
use crate::raster::{self, Rgb, RgbImage};
use crate::trace::PlanTrace;
use crate::{Grid, Point};

/// Gaussian kernel bandwidth, meters.
pub const KDE_BANDWIDTH: f64 = 0.08;
const SCALE: usize = 4;

/// Per-cell kernel density of `points` over `grid`, peak-normalized to 1.
/// Kernels are cut off at 3 bandwidths.
pub fn density_grid(grid: &Grid, points: &[Point], bandwidth: f64) -> Vec<f64> {
    let mut d = vec![0.0; grid.width * grid.height];
    let reach = (3.0 * bandwidth / grid.resolution).ceil() as i64;
    for p in points {
        let (ci, cj) = grid.world_to_grid_raw(*p);
        for j in cj - reach..=cj + reach {
            for i in ci - reach..=ci + reach {
                if !grid.in_bounds(i, j) {
                    continue;
                }
                let c = grid.grid_to_world(Cell::new(i as usize, j as usize));
                let r2 = c.dist(*p).powi(2);
                d[j as usize * grid.width + i as usize] += (-r2 / (2.0 * bandwidth * bandwidth)).exp();
            }
        }
    }
    let max = d.iter().cloned().fold(0.0, f64::max);
    if max > 0.0 {
        d.iter_mut().for_each(|v| *v /= max);
    }
    d
}

fn heat(v: f64) -> Rgb {
    // black → red → yellow → white
    let r = (3.0 * v).min(1.0);
    let g = (3.0 * v - 1.0).clamp(0.0, 1.0);
    let b = (3.0 * v - 2.0).clamp(0.0, 1.0);
    [(255.0 * r) as u8, (255.0 * g) as u8, (255.0 * b) as u8]
}

/// One image per optimizer iteration: the stored map crop with the
/// candidate density on top, g in magenta and the next semantic centre in
/// blue. Empty for traces without iterations.
pub fn render_heatmap(trace: &PlanTrace) -> Vec<RgbImage> {
    let Some(map) = &trace.map else {
        return Vec::new();
    };
    let grid = map.to_grid();
    let (w, h) = (grid.width * SCALE, grid.height * SCALE);
    let to_px = |p: Point| ((p.x - grid.origin.x) / grid.resolution * SCALE as f64, h as f64 - (p.y - grid.origin.y) / grid.resolution * SCALE as f64);
    let g = trace.context.as_ref().and_then(|c| c.keypoint);
    let mut out = Vec::new();
    for (k, it) in trace.iterations.iter().enumerate() {
        let d = density_grid(&grid, &it.positions, KDE_BANDWIDTH);
        let mut img = RgbImage::new(w, h, raster::WHITE);
        for c in grid.cells() {
            let base = match grid.get(c) {
                CellState::Free => raster::WHITE,
                CellState::Occupied => raster::BLACK,
                CellState::Unknown => raster::GREY,
            };
            let v = d[grid.index(c)];
            let (x0, y0) = (c.i * SCALE, (grid.height - 1 - c.j) * SCALE);
            for y in y0..y0 + SCALE {
                for x in x0..x0 + SCALE {
                    img.put(x as i64, y as i64, base);
                    if v > 0.0 {
                        img.blend(x as i64, y as i64, heat(v), v.sqrt().min(1.0) * 0.9);
                    }
                }
            }
        }
        if let Some(g) = g {
            let (x, y) = to_px(g);
            img.disc(x, y, 4.0, [255, 0, 255]);
        }
        if let Some(mu) = trace.iterations.get(k + 1).and_then(|n| n.mu) {
            let (x, y) = to_px(mu);
            img.disc(x, y, 4.0, [30, 60, 255]);
        }
        if k + 1 == trace.iterations.len() {
            if let Some(p) = trace.placement {
                let (x, y) = to_px(p.position());
                img.disc(x, y, 5.0, [0, 170, 0]);
            }
        }
        img.text(4, 4, &(k + 1).to_string(), 3, raster::BLACK);
        out.push(img);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_point_peaks_at_its_cell() {
        let g = Grid::new(40, 40, 0.05, Point::zero());
        let p = Point::new(1.03, 0.51);
        let d = density_grid(&g, &[p], KDE_BANDWIDTH);
        let best = (0..d.len()).max_by(|a, b| d[*a].total_cmp(&d[*b])).unwrap();
        assert_eq!(g.cell_of_index(best), g.world_to_grid(p).unwrap());
        assert_eq!(d[best], 1.0);
    }

    #[test]
    fn ring_density() {
        let g = Grid::new(80, 80, 0.05, Point::zero());
        let c = Point::new(2.0, 2.0);
        let pts: Vec<Point> = (0..360).map(|k| c + Point::from_angle((k as f64).to_radians()) * 0.7).collect();
        let d = density_grid(&g, &pts, KDE_BANDWIDTH);
        let at = |p: Point| d[g.index(g.world_to_grid(p).unwrap())];
        assert!(at(c + Point::new(0.7, 0.0)) > 0.9);
        assert!(at(c) < 0.01);
    }
}
