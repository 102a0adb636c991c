//! Binary PNM (P5 / P6) encode and decode.

use std::io::{self, Read, Write};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pgm {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    /// Row-major samples, first row is the top of the image.
    pub data: Vec<u16>,
}

pub fn write_pgm(mut w: impl Write, img: &Pgm) -> io::Result<()> {
    write!(w, "P5\n{} {}\n{}\n", img.width, img.height, img.maxval)?;
    if img.maxval < 256 {
        let bytes: Vec<u8> = img.data.iter().map(|v| *v as u8).collect();
        w.write_all(&bytes)
    } else {
        let mut bytes = Vec::with_capacity(img.data.len() * 2);
        for v in &img.data {
            bytes.extend_from_slice(&v.to_be_bytes());
        }
        w.write_all(&bytes)
    }
}

pub fn write_ppm(mut w: impl Write, width: usize, height: usize, rgb: &[u8]) -> io::Result<()> {
    assert_eq!(rgb.len(), width * height * 3);
    write!(w, "P6\n{width} {height}\n255\n")?;
    w.write_all(rgb)
}

fn bad(msg: &str) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.to_string())
}

struct Header {
    magic: [u8; 2],
    width: usize,
    height: usize,
    maxval: u16,
    offset: usize,
}

fn parse_header(buf: &[u8]) -> io::Result<Header> {
    if buf.len() < 2 {
        return Err(bad("truncated PNM header"));
    }
    let magic = [buf[0], buf[1]];
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for f in fields.iter_mut() {
        loop {
            match buf.get(pos) {
                Some(b'#') => {
                    while buf.get(pos).is_some_and(|c| *c != b'\n') {
                        pos += 1;
                    }
                }
                Some(c) if c.is_ascii_whitespace() => pos += 1,
                Some(_) => break,
                None => return Err(bad("truncated PNM header")),
            }
        }
        let start = pos;
        while buf.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        *f = std::str::from_utf8(&buf[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("bad PNM header number"))?;
    }
    if !buf.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(bad("missing whitespace after PNM header"));
    }
    let maxval = u16::try_from(fields[2]).map_err(|_| bad("PNM maxval too large"))?;
    if maxval == 0 {
        return Err(bad("PNM maxval is zero"));
    }
    Ok(Header { magic, width: fields[0], height: fields[1], maxval, offset: pos + 1 })
}

pub fn read_pgm(mut r: impl Read) -> io::Result<Pgm> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    let h = parse_header(&buf)?;
    if &h.magic != b"P5" {
        return Err(bad("not a binary PGM (P5)"));
    }
    let n = h.width * h.height;
    let body = &buf[h.offset..];
    let data = if h.maxval < 256 {
        if body.len() < n {
            return Err(bad("truncated PGM body"));
        }
        body[..n].iter().map(|v| u16::from(*v)).collect()
    } else {
        if body.len() < 2 * n {
            return Err(bad("truncated PGM body"));
        }
        body[..2 * n].chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect()
    };
    Ok(Pgm { width: h.width, height: h.height, maxval: h.maxval, data })
}

/// Returns `(width, height, rgb bytes)`.
pub fn read_ppm(mut r: impl Read) -> io::Result<(usize, usize, Vec<u8>)> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    let h = parse_header(&buf)?;
    if &h.magic != b"P6" || h.maxval != 255 {
        return Err(bad("expected 8-bit binary PPM (P6)"));
    }
    let n = h.width * h.height * 3;
    let body = &buf[h.offset..];
    if body.len() < n {
        return Err(bad("truncated PPM body"));
    }
    Ok((h.width, h.height, body[..n].to_vec()))
}
