//! AGRD raw grid format for intermediate artifacts.
//!
//! Little-endian layout: magic `AGRD`, u32 width, u32 height, u8 kind
//! (0 = scalar, 1 = vector, 2 = tensor), then f64 planes in row-major
//! order (vector: x then y; tensor: a11, a12, a22).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{AnisoError, Result};
use crate::grid::{ScalarGrid, TensorField, VectorField};

const MAGIC: &[u8; 4] = b"AGRD";

/// One stored grid of any of the three kinds.
#[derive(Debug, Clone)]
pub enum GridPayload {
    Scalar(ScalarGrid),
    Vector(VectorField),
    Tensor(TensorField),
}

impl GridPayload {
    pub fn kind(&self) -> u8 {
        match self {
            GridPayload::Scalar(_) => 0,
            GridPayload::Vector(_) => 1,
            GridPayload::Tensor(_) => 2,
        }
    }
}

pub fn write_agrd(path: &Path, payload: &GridPayload) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let (width, height, planes): (u32, u32, Vec<&[f64]>) = match payload {
        GridPayload::Scalar(g) => (g.width() as u32, g.height() as u32, vec![g.values()]),
        GridPayload::Vector(v) => (v.width() as u32, v.height() as u32, vec![&v.x, &v.y]),
        GridPayload::Tensor(t) => (
            t.width() as u32,
            t.height() as u32,
            vec![&t.a11, &t.a12, &t.a22],
        ),
    };
    w.write_all(MAGIC)?;
    w.write_all(&width.to_le_bytes())?;
    w.write_all(&height.to_le_bytes())?;
    w.write_all(&[payload.kind()])?;
    for plane in planes {
        for &v in plane {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_agrd(path: &Path) -> Result<GridPayload> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(AnisoError::Format("not an AGRD file".into()));
    }
    let mut buf4 = [0u8; 4];
    r.read_exact(&mut buf4)?;
    let width = u32::from_le_bytes(buf4) as usize;
    r.read_exact(&mut buf4)?;
    let height = u32::from_le_bytes(buf4) as usize;
    let mut kind = [0u8; 1];
    r.read_exact(&mut kind)?;
    let n = width
        .checked_mul(height)
        .ok_or_else(|| AnisoError::Format("dimensions overflow".into()))?;
    let plane_count = match kind[0] {
        0 => 1,
        1 => 2,
        2 => 3,
        k => return Err(AnisoError::Format(format!("unknown grid kind {k}"))),
    };
    let mut planes = Vec::with_capacity(plane_count);
    let mut buf8 = [0u8; 8];
    for _ in 0..plane_count {
        let mut plane = Vec::with_capacity(n);
        for _ in 0..n {
            r.read_exact(&mut buf8)?;
            plane.push(f64::from_le_bytes(buf8));
        }
        planes.push(plane);
    }
    match kind[0] {
        0 => Ok(GridPayload::Scalar(ScalarGrid::new(
            width,
            height,
            planes.pop().unwrap(),
        )?)),
        1 => {
            let y = planes.pop().unwrap();
            let x = planes.pop().unwrap();
            Ok(GridPayload::Vector(VectorField::from_components(
                width, height, x, y,
            )?))
        }
        _ => {
            let a22 = planes.pop().unwrap();
            let a12 = planes.pop().unwrap();
            let a11 = planes.pop().unwrap();
            Ok(GridPayload::Tensor(TensorField::from_planes(
                width, height, a11, a12, a22,
            )?))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn roundtrip_all_kinds() {
        let dir = std::env::temp_dir().join("agrd_roundtrip_test");
        std::fs::create_dir_all(&dir).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);

        let g = ScalarGrid::from_fn(5, 4, |_, _| rng.random_range(-2.0..2.0));
        let path = dir.join("s.agrd");
        write_agrd(&path, &GridPayload::Scalar(g.clone())).unwrap();
        match read_agrd(&path).unwrap() {
            GridPayload::Scalar(back) => assert_eq!(back.values(), g.values()),
            _ => panic!("wrong kind"),
        }

        let mut v = VectorField::zeros(6, 3);
        for i in 0..18 {
            v.x[i] = rng.random_range(-1.0..1.0);
            v.y[i] = rng.random_range(-1.0..1.0);
        }
        let path = dir.join("v.agrd");
        write_agrd(&path, &GridPayload::Vector(v.clone())).unwrap();
        match read_agrd(&path).unwrap() {
            GridPayload::Vector(back) => {
                assert_eq!(back.x, v.x);
                assert_eq!(back.y, v.y);
            }
            _ => panic!("wrong kind"),
        }

        let t = TensorField::identity(4, 4);
        let path = dir.join("t.agrd");
        write_agrd(&path, &GridPayload::Tensor(t.clone())).unwrap();
        match read_agrd(&path).unwrap() {
            GridPayload::Tensor(back) => {
                assert_eq!(back.a11, t.a11);
                assert_eq!(back.a12, t.a12);
                assert_eq!(back.a22, t.a22);
            }
            _ => panic!("wrong kind"),
        }
    }

    #[test]
    fn rejects_bad_magic() {
        let dir = std::env::temp_dir().join("agrd_badmagic_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.agrd");
        std::fs::write(&path, b"NOPE").unwrap();
        assert!(read_agrd(&path).is_err());
    }
}
