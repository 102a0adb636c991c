//! RGB raster with the few drawing primitives the map renderings need.

use std::io::{self, Write};

pub type Rgb = [u8; 3];

pub const BLACK: Rgb = [0, 0, 0];
pub const WHITE: Rgb = [255, 255, 255];
pub const GREY: Rgb = [160, 160, 160];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, fill: Rgb) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            data.extend_from_slice(&fill);
        }
        Self { width, height, data }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Rgb {
        let k = (y * self.width + x) * 3;
        [self.data[k], self.data[k + 1], self.data[k + 2]]
    }

    #[inline]
    pub fn put(&mut self, x: i64, y: i64, c: Rgb) {
        if x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height {
            let k = (y as usize * self.width + x as usize) * 3;
            self.data[k..k + 3].copy_from_slice(&c);
        }
    }

    /// Alpha-blend `c` over the pixel; `a` in [0, 1].
    pub fn blend(&mut self, x: i64, y: i64, c: Rgb, a: f64) {
        if x < 0 || y < 0 || x as usize >= self.width || y as usize >= self.height {
            return;
        }
        let old = self.get(x as usize, y as usize);
        let a = a.clamp(0.0, 1.0);
        let mix = |o: u8, n: u8| (f64::from(o) * (1.0 - a) + f64::from(n) * a).round() as u8;
        self.put(x, y, [mix(old[0], c[0]), mix(old[1], c[1]), mix(old[2], c[2])]);
    }

    pub fn disc(&mut self, cx: f64, cy: f64, r: f64, c: Rgb) {
        let (x0, x1) = ((cx - r).floor() as i64, (cx + r).ceil() as i64);
        let (y0, y1) = ((cy - r).floor() as i64, (cy + r).ceil() as i64);
        for y in y0..=y1 {
            for x in x0..=x1 {
                let dx = x as f64 - cx;
                let dy = y as f64 - cy;
                if dx * dx + dy * dy <= r * r {
                    self.put(x, y, c);
                }
            }
        }
    }

    /// Line of the given half-width, drawn as a run of discs.
    pub fn line(&mut self, a: (f64, f64), b: (f64, f64), half_width: f64, c: Rgb) {
        let len = ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt();
        let steps = (len * 2.0).ceil().max(1.0) as usize;
        for s in 0..=steps {
            let t = s as f64 / steps as f64;
            self.disc(a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1), half_width, c);
        }
    }

    pub fn arrow(&mut self, a: (f64, f64), b: (f64, f64), half_width: f64, c: Rgb) {
        self.line(a, b, half_width, c);
        let (dx, dy) = (b.0 - a.0, b.1 - a.1);
        let len = (dx * dx + dy * dy).sqrt();
        if len < 1e-9 {
            return;
        }
        let (ux, uy) = (dx / len, dy / len);
        let head = (4.0 * half_width).max(3.0).min(len);
        for side in [-1.0, 1.0] {
            let (px, py) = (-uy * side, ux * side);
            let tip = (b.0 - ux * head + px * head * 0.6, b.1 - uy * head + py * head * 0.6);
            self.line(b, tip, half_width, c);
        }
    }

    /// Draw `text` (digits and `A`) with its top-left at `(x, y)`.
    pub fn text(&mut self, x: i64, y: i64, text: &str, scale: i64, c: Rgb) {
        let mut cx = x;
        for ch in text.chars() {
            if let Some(rows) = glyph(ch) {
                for (r, bits) in rows.iter().enumerate() {
                    for col in 0..5 {
                        if bits & (0x10 >> col) != 0 {
                            for sy in 0..scale {
                                for sx in 0..scale {
                                    self.put(cx + col * scale + sx, y + r as i64 * scale + sy, c);
                                }
                            }
                        }
                    }
                }
            }
            cx += 6 * scale;
        }
    }

    pub fn write_ppm(&self, w: impl Write) -> io::Result<()> {
        crate::pnm::write_ppm(w, self.width, self.height, &self.data)
    }

    pub fn to_ppm(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_ppm(&mut buf).expect("in-memory write");
        buf
    }

    pub fn to_png(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut buf, self.width as u32, self.height as u32);
            enc.set_color(png::ColorType::Rgb);
            enc.set_depth(png::BitDepth::Eight);
            let mut w = enc.write_header().expect("png header");
            w.write_image_data(&self.data).expect("png body");
        }
        buf
    }
}

/// Width in pixels of `text` at `scale`.
pub fn text_width(text: &str, scale: i64) -> i64 {
    (text.chars().count() as i64 * 6 - 1).max(0) * scale
}

/// 5×7 bitmaps, one byte per row, high bit leftmost.
fn glyph(c: char) -> Option<[u8; 7]> {
    Some(match c {
        'A' => [0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11],
        '0' => [0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E],
        '1' => [0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E],
        '2' => [0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F],
        '3' => [0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E],
        '4' => [0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02],
        '5' => [0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E],
        '6' => [0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E],
        '7' => [0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08],
        '8' => [0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E],
        '9' => [0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C],
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blend_half() {
        let mut img = RgbImage::new(1, 1, BLACK);
        img.blend(0, 0, [200, 100, 0], 0.5);
        assert_eq!(img.get(0, 0), [100, 50, 0]);
    }

    #[test]
    fn out_of_bounds_writes_are_ignored() {
        let mut img = RgbImage::new(2, 2, WHITE);
        img.put(-1, 0, BLACK);
        img.put(2, 1, BLACK);
        assert!(img.data.iter().all(|v| *v == 255));
    }

    #[test]
    fn glyph_a_has_crossbar() {
        let mut img = RgbImage::new(5, 7, WHITE);
        img.text(0, 0, "A", 1, BLACK);
        for x in 0..5 {
            assert_eq!(img.get(x, 3), BLACK);
        }
        assert_eq!(img.get(0, 0), WHITE);
    }

    #[test]
    fn png_has_signature() {
        let png = RgbImage::new(3, 2, GREY).to_png();
        assert_eq!(&png[..8], &[137, 80, 78, 71, 13, 10, 26, 10]);
    }
}
