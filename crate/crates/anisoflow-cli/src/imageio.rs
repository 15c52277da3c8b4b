//! Grayscale image I/O: PGM (P2 and P5) and 8-bit PNG.
//!
//! All internal math runs on f64 grids; 8-bit export uses an affine
//! scaling that the caller records in the run manifest.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use anisoflow::grid::ScalarGrid;
use anyhow::{bail, Context, Result};

/// Affine map used when quantizing to 8 bits: `byte = (v - offset) * scale`.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct AffineScale {
    pub offset: f64,
    pub scale: f64,
}

pub fn affine_for(grid: &ScalarGrid) -> AffineScale {
    let (lo, hi) = grid.min_max();
    let span = hi - lo;
    AffineScale {
        offset: lo,
        scale: if span > 0.0 { 255.0 / span } else { 1.0 },
    }
}

fn quantize(grid: &ScalarGrid, affine: AffineScale) -> Vec<u8> {
    grid.values()
        .iter()
        .map(|&v| ((v - affine.offset) * affine.scale).round().clamp(0.0, 255.0) as u8)
        .collect()
}

/// Write a binary (P5) PGM with the given affine scaling.
pub fn write_pgm(path: &Path, grid: &ScalarGrid, affine: AffineScale) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "P5\n{} {}\n255\n", grid.width(), grid.height())?;
    w.write_all(&quantize(grid, affine))?;
    Ok(())
}

/// Write an ASCII (P2) PGM with the given affine scaling.
pub fn write_pgm_ascii(path: &Path, grid: &ScalarGrid, affine: AffineScale) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "P2\n{} {}\n255\n", grid.width(), grid.height())?;
    for (i, byte) in quantize(grid, affine).iter().enumerate() {
        if i % grid.width() == 0 && i > 0 {
            writeln!(w)?;
        } else if i > 0 {
            write!(w, " ")?;
        }
        write!(w, "{byte}")?;
    }
    writeln!(w)?;
    Ok(())
}

/// Read a P2 or P5 PGM; sample values are divided by maxval so the grid
/// lands in [0, 1].
pub fn read_pgm(path: &Path) -> Result<ScalarGrid> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut header = Vec::new();
    // magic
    let magic = next_token(&mut reader)?;
    if magic != "P2" && magic != "P5" {
        bail!("not a PGM file: magic {magic}");
    }
    for _ in 0..3 {
        header.push(next_token(&mut reader)?);
    }
    let width: usize = header[0].parse().context("bad width")?;
    let height: usize = header[1].parse().context("bad height")?;
    let maxval: f64 = header[2].parse().context("bad maxval")?;
    if maxval <= 0.0 {
        bail!("bad maxval {maxval}");
    }
    let n = width * height;
    let mut values = Vec::with_capacity(n);
    if magic == "P5" {
        if maxval > 255.0 {
            let mut buf = vec![0u8; 2 * n];
            reader.read_exact(&mut buf)?;
            for i in 0..n {
                let v = u16::from_be_bytes([buf[2 * i], buf[2 * i + 1]]);
                values.push(v as f64 / maxval);
            }
        } else {
            let mut buf = vec![0u8; n];
            reader.read_exact(&mut buf)?;
            values.extend(buf.iter().map(|&b| b as f64 / maxval));
        }
    } else {
        for _ in 0..n {
            let tok = next_token(&mut reader)?;
            let v: f64 = tok.parse().context("bad sample")?;
            values.push(v / maxval);
        }
    }
    Ok(ScalarGrid::new(width, height, values)?)
}

/// One whitespace-delimited token, skipping `#` comments.
fn next_token(reader: &mut impl BufRead) -> Result<String> {
    let mut token = String::new();
    let mut byte = [0u8; 1];
    loop {
        if reader.read(&mut byte)? == 0 {
            if token.is_empty() {
                bail!("unexpected end of file");
            }
            return Ok(token);
        }
        let c = byte[0] as char;
        if c == '#' {
            let mut line = String::new();
            reader.read_line(&mut line)?;
            continue;
        }
        if c.is_whitespace() {
            if !token.is_empty() {
                return Ok(token);
            }
        } else {
            token.push(c);
        }
    }
}

/// Write an 8-bit grayscale PNG with the given affine scaling.
pub fn write_png(path: &Path, grid: &ScalarGrid, affine: AffineScale) -> Result<()> {
    let bytes = quantize(grid, affine);
    let img = image::GrayImage::from_raw(grid.width() as u32, grid.height() as u32, bytes)
        .context("image buffer size mismatch")?;
    img.save(path)?;
    Ok(())
}

/// Read a PNG; grayscale maps to [0, 1], RGB reduces by BT.601 luma
/// weights before scaling.
pub fn read_png(path: &Path) -> Result<ScalarGrid> {
    let img = image::open(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let rgb = img.to_rgb8();
    let mut values = Vec::with_capacity(w * h);
    for p in rgb.pixels() {
        let [r, g, b] = p.0;
        let luma = 0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64;
        values.push(luma / 255.0);
    }
    Ok(ScalarGrid::new(w, h, values)?)
}

/// Dispatch on extension: `.agrd` (scalar payload), `.pgm`, `.png`.
pub fn read_grid_auto(path: &Path) -> Result<ScalarGrid> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("agrd") => match anisoflow::agrd::read_agrd(path)? {
            anisoflow::agrd::GridPayload::Scalar(g) => Ok(g),
            _ => bail!("{} is not a scalar AGRD grid", path.display()),
        },
        Some("pgm") => read_pgm(path),
        Some("png") => read_png(path),
        _ => bail!("unsupported image extension: {}", path.display()),
    }
}
