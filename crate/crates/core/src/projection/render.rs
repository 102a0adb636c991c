//! Top-down renderings: Obstacle Map+ (egocentric) and the affordance view
//! (object-centred, world aligned). Both go through one primitive list so
//! the PPM and SVG outputs share geometry.

use std::fmt::Write as _;

use super::AffordanceContext;
use crate::gridmap::{extract_local_egocentric, CellState, OccupancyGrid};
use crate::raster::{self, Rgb, RgbImage};
use crate::{Point, Pose};

/// Arrow colours; entry `k` belongs to direction `k + 1`.
pub const PALETTE: [Rgb; 12] = [
    [230, 25, 75],   // 1 red
    [0, 92, 230],    // 2 blue
    [60, 180, 75],   // 3 green
    [245, 130, 48],  // 4 orange
    [145, 30, 180],  // 5 purple
    [70, 240, 240],  // 6 cyan
    [240, 50, 230],  // 7 magenta
    [200, 200, 0],   // 8 olive yellow
    [128, 64, 0],    // 9 brown
    [250, 150, 190], // 10 pink
    [0, 128, 128],   // 11 teal
    [0, 0, 128],     // 12 navy
];

pub fn palette(index: i32) -> Rgb {
    PALETTE[((index - 1).rem_euclid(12)) as usize]
}

pub const OCCUPIED: Rgb = raster::BLACK;
pub const FREE: Rgb = raster::WHITE;
pub const UNKNOWN: Rgb = raster::GREY;
pub const FOOTPRINT: Rgb = [0, 170, 0];
pub const FAN_TINT: Rgb = [255, 165, 0];
pub const ROBOT: Rgb = [30, 60, 255];
pub const CANDIDATE: Rgb = [220, 0, 0];
pub const KEYPOINT: Rgb = [255, 0, 255];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Overlays {
    pub arrows: bool,
    pub fan: bool,
    pub label_a: bool,
}

impl Overlays {
    pub const ALL: Overlays = Overlays { arrows: true, fan: true, label_a: true };
    pub const NONE: Overlays = Overlays { arrows: false, fan: false, label_a: false };
}

#[derive(Debug, Clone, PartialEq)]
enum Prim {
    Arrow { a: (f64, f64), b: (f64, f64), hw: f64, c: Rgb },
    Disc { at: (f64, f64), r: f64, c: Rgb },
    Text { x: i64, y: i64, s: String, scale: i64, c: Rgb },
}

/// Cell layer plus vector overlays, in pixel coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Drawing {
    pub cols: usize,
    pub rows: usize,
    pub scale: usize,
    cells: Vec<Rgb>,
    prims: Vec<Prim>,
}

/// Maps world points into a grid that lives in the frame of `frame`.
struct View<'a> {
    frame: Pose,
    grid: &'a OccupancyGrid<f64>,
    scale: f64,
}

impl View<'_> {
    fn px(&self, world: Point) -> (f64, f64) {
        let l = self.frame.inverse_transform(world);
        let g = self.grid;
        let u = (l.x - g.origin.x) / g.resolution * self.scale;
        let v = (g.height as f64 - (l.y - g.origin.y) / g.resolution) * self.scale;
        (u, v)
    }
}

fn paint_cells(view: &View, global: &OccupancyGrid<f64>, ctx: Option<&AffordanceContext>, fan: bool) -> Vec<Rgb> {
    let g = view.grid;
    let footprint: std::collections::HashSet<_> = ctx.map(|c| c.footprint.iter().copied().collect()).unwrap_or_default();
    let fan_region = if fan { ctx.and_then(|c| c.fan) } else { None };
    let mut out = vec![UNKNOWN; g.len()];
    for row in 0..g.height {
        let j = g.height - 1 - row;
        for i in 0..g.width {
            let c = crate::gridmap::Cell::new(i, j);
            let world = view.frame.transform(g.grid_to_world(c));
            let mut col = match g.get(c) {
                CellState::Free => FREE,
                CellState::Occupied => OCCUPIED,
                CellState::Unknown => UNKNOWN,
            };
            if let Some(f) = fan_region {
                if g.get(c) == CellState::Free && f.contains(world) {
                    col = [255, 224, 170];
                }
            }
            if let Ok(gc) = global.world_to_grid(world) {
                if footprint.contains(&gc) {
                    col = FOOTPRINT;
                }
            }
            out[row * g.width + i] = col;
        }
    }
    out
}

fn overlays(view: &View, ctx: Option<&AffordanceContext>, robot: Option<Pose>, marks: &[(i32, Point)], mark_color: Rgb, ov: Overlays) -> Vec<Prim> {
    let s = view.scale;
    let mut prims = Vec::new();
    if let (Some(ctx), true) = (ctx, ov.arrows) {
        let a = view.px(ctx.centroid);
        for d in &ctx.directions {
            prims.push(Prim::Arrow { a, b: view.px(d.end), hw: 0.6 * s, c: palette(d.index) });
        }
        for d in &ctx.directions {
            let tip = view.px(d.end + d.unit * 0.12);
            let label = d.index.to_string();
            let w = raster::text_width(&label, 1) as f64;
            prims.push(Prim::Text { x: (tip.0 - w / 2.0).round() as i64, y: (tip.1 - 3.5).round() as i64, s: label, scale: 1, c: palette(d.index) });
        }
        if ov.label_a {
            if let Some(sel) = ctx.selected() {
                let p = view.px(ctx.centroid + sel.unit * (sel.length * 0.5).max(0.3) + sel.unit.rotate(std::f64::consts::FRAC_PI_2) * 0.15);
                prims.push(Prim::Text { x: (p.0 - 5.0).round() as i64, y: (p.1 - 7.0).round() as i64, s: "A".into(), scale: 2, c: palette(sel.index) });
            }
        }
    }
    if let Some(r) = robot {
        let c = view.px(r.position());
        prims.push(Prim::Disc { at: c, r: 2.5 * s, c: ROBOT });
        prims.push(Prim::Arrow { a: c, b: view.px(r.position() + r.heading() * 0.3), hw: 0.5 * s, c: ROBOT });
    }
    if let Some(g) = ctx.and_then(|c| c.keypoint) {
        prims.push(Prim::Disc { at: view.px(g), r: 1.5 * s, c: KEYPOINT });
    }
    for (idx, p) in marks {
        let c = view.px(*p);
        prims.push(Prim::Disc { at: c, r: 1.2 * s, c: mark_color });
        prims.push(Prim::Text { x: (c.0 + 2.0 * s).round() as i64, y: (c.1 - 3.0 * s).round() as i64, s: idx.to_string(), scale: 1, c: mark_color });
    }
    prims
}

/// Egocentric map around `robot` with footprint, fan, arrows, robot marker
/// and numbered candidates.
pub fn obstacle_map_plus(
    global: &OccupancyGrid<f64>,
    robot: Pose,
    ctx: Option<&AffordanceContext>,
    candidates: &[(i32, Point)],
    ov: Overlays,
    size: usize,
    scale: usize,
) -> Drawing {
    let local = extract_local_egocentric(global, robot, size);
    let view = View { frame: robot, grid: &local, scale: scale as f64 };
    let cells = paint_cells(&view, global, ctx, ov.fan);
    let prims = overlays(&view, ctx, Some(robot), candidates, CANDIDATE, ov);
    Drawing { cols: size, rows: size, scale, cells, prims }
}

/// World-aligned close-up of the object with arrows and numbered marks.
pub fn affordance_view(global: &OccupancyGrid<f64>, ctx: &AffordanceContext, marks: &[(i32, Point)], ov: Overlays, size: usize, scale: usize) -> Drawing {
    let frame = Pose::new(ctx.centroid.x, ctx.centroid.y, 0.0);
    let local = extract_local_egocentric(global, frame, size);
    let view = View { frame, grid: &local, scale: scale as f64 };
    let cells = paint_cells(&view, global, Some(ctx), ov.fan);
    let prims = overlays(&view, Some(ctx), None, marks, KEYPOINT, ov);
    Drawing { cols: size, rows: size, scale, cells, prims }
}

impl Drawing {
    pub fn width(&self) -> usize {
        self.cols * self.scale
    }

    pub fn height(&self) -> usize {
        self.rows * self.scale
    }

    pub fn raster(&self) -> RgbImage {
        let mut img = RgbImage::new(self.width(), self.height(), UNKNOWN);
        for r in 0..self.rows {
            for c in 0..self.cols {
                let col = self.cells[r * self.cols + c];
                for y in 0..self.scale {
                    for x in 0..self.scale {
                        img.put((c * self.scale + x) as i64, (r * self.scale + y) as i64, col);
                    }
                }
            }
        }
        self.draw_prims(&mut img);
        img
    }

    /// Raster with an additive density layer under the vector overlays.
    pub fn raster_with(&self, layer: impl Fn(&mut RgbImage)) -> RgbImage {
        let mut base = Drawing { prims: Vec::new(), ..self.clone() }.raster();
        layer(&mut base);
        self.draw_prims(&mut base);
        base
    }

    fn draw_prims(&self, img: &mut RgbImage) {
        for p in &self.prims {
            match p {
                Prim::Arrow { a, b, hw, c } => img.arrow(*a, *b, *hw, *c),
                Prim::Disc { at, r, c } => img.disc(at.0, at.1, *r, *c),
                Prim::Text { x, y, s, scale, c } => img.text(*x, *y, s, *scale, *c),
            }
        }
    }

    pub fn svg(&self) -> String {
        let hex = |c: &Rgb| format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2]);
        let s = self.scale;
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" shape-rendering="crispEdges">"#,
            w = self.width(),
            h = self.height()
        );
        for r in 0..self.rows {
            let row = &self.cells[r * self.cols..(r + 1) * self.cols];
            let mut c0 = 0;
            while c0 < self.cols {
                let mut c1 = c0 + 1;
                while c1 < self.cols && row[c1] == row[c0] {
                    c1 += 1;
                }
                let _ = writeln!(out, r#"<rect x="{}" y="{}" width="{}" height="{}" fill="{}"/>"#, c0 * s, r * s, (c1 - c0) * s, s, hex(&row[c0]));
                c0 = c1;
            }
        }
        for p in &self.prims {
            match p {
                Prim::Arrow { a, b, hw, c } => {
                    let _ = writeln!(
                        out,
                        r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{}" stroke-width="{:.2}" stroke-linecap="round"/>"#,
                        a.0, a.1, b.0, b.1, hex(c), 2.0 * hw
                    );
                }
                Prim::Disc { at, r, c } => {
                    let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="{:.2}" fill="{}"/>"#, at.0, at.1, r, hex(c));
                }
                Prim::Text { x, y, s: t, scale, c } => {
                    let _ = writeln!(
                        out,
                        r#"<text x="{}" y="{}" font-family="monospace" font-size="{}" fill="{}">{}</text>"#,
                        x,
                        y + 7 * scale,
                        9 * scale,
                        hex(c),
                        t
                    );
                }
            }
        }
        out.push_str("</svg>\n");
        out
    }
}

/// Pixel position of a world point in an Obstacle Map+ rendering.
pub fn map_pixel(robot: Pose, size: usize, resolution: f64, scale: usize, world: Point) -> (f64, f64) {
    let l = robot.inverse_transform(world);
    let half = size as f64 * resolution / 2.0;
    let u = (l.x + half) / resolution * scale as f64;
    let v = (size as f64 - (l.y + half) / resolution) * scale as f64;
    (u, v)
}
