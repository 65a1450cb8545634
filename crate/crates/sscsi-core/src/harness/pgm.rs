//! Minimal binary PGM (P5) reader/writer.
//!
//! Masks are stored 8-bit (open = 255), measurement frames 16-bit
//! big-endian per the format; both are plain P5 so any image viewer can
//! inspect them.

use std::io::{Read as _, Write as _};
use std::path::Path;

use crate::error::{Error, Result};

pub fn write_pgm8(path: &Path, width: u32, height: u32, data: &[u8]) -> Result<()> {
    if data.len() != width as usize * height as usize {
        return Err(Error::DimensionMismatch {
            expected: width as usize * height as usize,
            got: data.len(),
        });
    }
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(f, "P5\n{width} {height}\n255\n")?;
    f.write_all(data)?;
    f.flush()?;
    Ok(())
}

pub fn write_pgm16(path: &Path, width: u32, height: u32, data: &[u16]) -> Result<()> {
    if data.len() != width as usize * height as usize {
        return Err(Error::DimensionMismatch {
            expected: width as usize * height as usize,
            got: data.len(),
        });
    }
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(f, "P5\n{width} {height}\n65535\n")?;
    for &v in data {
        f.write_all(&v.to_be_bytes())?;
    }
    f.flush()?;
    Ok(())
}

pub fn read_pgm8(path: &Path) -> Result<(u32, u32, Vec<u8>)> {
    let (width, height, maxval, raster) = read_p5(path)?;
    if maxval != 255 {
        return Err(Error::Format(format!(
            "{}: expected 8-bit PGM, maxval is {maxval}",
            path.display()
        )));
    }
    if raster.len() != width as usize * height as usize {
        return Err(Error::Format(format!(
            "{}: raster has {} bytes, header promises {}",
            path.display(),
            raster.len(),
            width as usize * height as usize
        )));
    }
    Ok((width, height, raster))
}

pub fn read_pgm16(path: &Path) -> Result<(u32, u32, Vec<u16>)> {
    let (width, height, maxval, raster) = read_p5(path)?;
    if maxval != 65535 {
        return Err(Error::Format(format!(
            "{}: expected 16-bit PGM, maxval is {maxval}",
            path.display()
        )));
    }
    if raster.len() != 2 * width as usize * height as usize {
        return Err(Error::Format(format!(
            "{}: raster has {} bytes, header promises {}",
            path.display(),
            raster.len(),
            2 * width as usize * height as usize
        )));
    }
    let data = raster
        .chunks_exact(2)
        .map(|c| u16::from_be_bytes([c[0], c[1]]))
        .collect();
    Ok((width, height, data))
}

/// Parses a P5 header (magic, width, height, maxval separated by arbitrary
/// whitespace and `#` comments, one whitespace byte before the raster) and
/// returns the raw raster bytes.
fn read_p5(path: &Path) -> Result<(u32, u32, u32, Vec<u8>)> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(Error::Format(format!(
            "{}: not a binary PGM (missing P5 magic)",
            path.display()
        )));
    }
    let mut pos = 2;
    let mut fields = [0u32; 3];
    for field in &mut fields {
        // Skip whitespace and comment lines.
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                break;
            }
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Format(format!(
                "{}: malformed PGM header",
                path.display()
            )));
        }
        let text = std::str::from_utf8(&bytes[start..pos]).expect("digits are ascii");
        *field = text
            .parse()
            .map_err(|_| Error::Format(format!("{}: header value out of range", path.display())))?;
    }
    // Exactly one whitespace byte separates the header from the raster.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(Error::Format(format!(
            "{}: missing raster separator",
            path.display()
        )));
    }
    pos += 1;
    Ok((fields[0], fields[1], fields[2], bytes[pos..].to_vec()))
}
