//! Grid import/export as PGM plus a JSON sidecar.
//!
//! Pixel values: 0 Occupied, 128 Unknown, 255 Free. The top image row is the
//! highest `j`. On import, values below 64 read as Occupied and above 192 as
//! Free so hand-drawn maps load too.

use std::fs::File;
use std::io::{self, BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CellState, OccupancyGrid};
use crate::geom::Vec2;
use crate::pnm::{self, Pgm};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridHeader {
    pub resolution: f64,
    pub origin_x: f64,
    pub origin_y: f64,
}

pub fn state_to_gray(s: CellState) -> u16 {
    match s {
        CellState::Occupied => 0,
        CellState::Unknown => 128,
        CellState::Free => 255,
    }
}

pub fn gray_to_state(v: u16, maxval: u16) -> CellState {
    let v = u32::from(v) * 255 / u32::from(maxval);
    if v < 64 {
        CellState::Occupied
    } else if v > 192 {
        CellState::Free
    } else {
        CellState::Unknown
    }
}

pub fn to_pgm<T: Real>(grid: &OccupancyGrid<T>) -> (Pgm, GridHeader) {
    let mut data = Vec::with_capacity(grid.len());
    for row in (0..grid.height).rev() {
        for i in 0..grid.width {
            data.push(state_to_gray(grid.cells[row * grid.width + i]));
        }
    }
    let header = GridHeader {
        resolution: grid.resolution.to_f64_lossy(),
        origin_x: grid.origin.x.to_f64_lossy(),
        origin_y: grid.origin.y.to_f64_lossy(),
    };
    (Pgm { width: grid.width, height: grid.height, maxval: 255, data }, header)
}

pub fn from_pgm<T: Real>(img: &Pgm, header: &GridHeader) -> OccupancyGrid<T> {
    let mut grid = OccupancyGrid::new(
        img.width,
        img.height,
        T::lit(header.resolution),
        Vec2::new(T::lit(header.origin_x), T::lit(header.origin_y)),
    );
    for row in 0..img.height {
        let j = img.height - 1 - row;
        for i in 0..img.width {
            grid.cells[j * img.width + i] = gray_to_state(img.data[row * img.width + i], img.maxval);
        }
    }
    grid
}

/// Sidecar path: `map.pgm` → `map.json`.
pub fn sidecar_path(pgm: &Path) -> std::path::PathBuf {
    pgm.with_extension("json")
}

pub fn save<T: Real>(grid: &OccupancyGrid<T>, pgm_path: &Path) -> io::Result<()> {
    let (img, header) = to_pgm(grid);
    pnm::write_pgm(BufWriter::new(File::create(pgm_path)?), &img)?;
    let json = serde_json::to_string_pretty(&header).map_err(io::Error::other)?;
    std::fs::write(sidecar_path(pgm_path), json)
}

pub fn load<T: Real>(pgm_path: &Path) -> io::Result<OccupancyGrid<T>> {
    let img = pnm::read_pgm(BufReader::new(File::open(pgm_path)?))?;
    let header: GridHeader = serde_json::from_slice(&std::fs::read(sidecar_path(pgm_path))?)
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
    Ok(from_pgm(&img, &header))
}
