//! Binary field snapshots.
//!
//! Layout, all little-endian:
//!
//! | bytes | content                                   |
//! |-------|-------------------------------------------|
//! | 5     | magic `SSNS1`                             |
//! | 1     | kind: 0 = scalar, 1 = velocity            |
//! | 4     | `n` as u32                                |
//! | 8     | box length as f64                         |
//! | 8     | time as f64                               |
//! | 8·c·n³| f64 samples, component-major, x fastest   |
//!
//! `c` is 1 for scalars and 3 for velocities.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::fft::Fft3;
use crate::grid::{Grid, ScalarField};
use crate::spectral::SpectralVectorField;

pub const MAGIC: &[u8; 5] = b"SSNS1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnapshotKind {
    Scalar = 0,
    Velocity = 1,
}

impl SnapshotKind {
    fn components(self) -> usize {
        match self {
            SnapshotKind::Scalar => 1,
            SnapshotKind::Velocity => 3,
        }
    }
}

/// Physical-space field data read from or written to a snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotData {
    pub kind: SnapshotKind,
    pub grid: Grid,
    pub time: f64,
    pub components: Vec<ScalarField>,
}

impl SnapshotData {
    pub fn velocity(time: f64, u: &SpectralVectorField, fft: &Fft3) -> Self {
        Self {
            kind: SnapshotKind::Velocity,
            grid: *u.grid(),
            time,
            components: u.to_physical(fft).into(),
        }
    }

    pub fn scalar(time: f64, f: &ScalarField) -> Self {
        Self {
            kind: SnapshotKind::Scalar,
            grid: *f.grid(),
            time,
            components: vec![f.clone()],
        }
    }

    /// Spectral velocity of a velocity snapshot.
    pub fn to_velocity(&self, fft: &Fft3) -> Result<SpectralVectorField> {
        if self.kind != SnapshotKind::Velocity {
            return Err(Error::Format("snapshot holds a scalar, not a velocity".into()));
        }
        let c = &self.components;
        SpectralVectorField::from_physical(fft, [&c[0], &c[1], &c[2]])
    }
}

pub fn write_snapshot(mut w: impl Write, s: &SnapshotData) -> Result<()> {
    let n = u32::try_from(s.grid.n()).map_err(|_| Error::Format("grid too large".into()))?;
    w.write_all(MAGIC)?;
    w.write_all(&[s.kind as u8])?;
    w.write_all(&n.to_le_bytes())?;
    w.write_all(&s.grid.box_length().to_le_bytes())?;
    w.write_all(&s.time.to_le_bytes())?;
    let mut buf = Vec::with_capacity(8 * s.grid.len());
    for c in &s.components {
        buf.clear();
        for v in c.values() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

pub fn read_snapshot(mut r: impl Read) -> Result<SnapshotData> {
    let mut header = [0u8; 26];
    r.read_exact(&mut header)
        .map_err(|_| Error::Format("truncated header".into()))?;
    if &header[..5] != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let kind = match header[5] {
        0 => SnapshotKind::Scalar,
        1 => SnapshotKind::Velocity,
        k => return Err(Error::Format(format!("unknown kind {k}"))),
    };
    let n = u32::from_le_bytes(header[6..10].try_into().unwrap()) as usize;
    let l = f64::from_le_bytes(header[10..18].try_into().unwrap());
    let time = f64::from_le_bytes(header[18..26].try_into().unwrap());
    let grid = Grid::new(n, l)?;
    let mut components = Vec::with_capacity(kind.components());
    let mut bytes = vec![0u8; 8 * grid.len()];
    for _ in 0..kind.components() {
        r.read_exact(&mut bytes)
            .map_err(|_| Error::Format("truncated data".into()))?;
        let v = bytes
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        components.push(ScalarField::new(grid, v)?);
    }
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(Error::Format("trailing bytes".into()));
    }
    Ok(SnapshotData {
        kind,
        grid,
        time,
        components,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{make_velocity, FieldKind};

    #[test]
    fn velocity_roundtrip() {
        let g = Grid::periodic(8).unwrap();
        let fft = Fft3::new(&g);
        let u = make_velocity(&FieldKind::TaylorGreen, g, &fft).unwrap();
        let s = SnapshotData::velocity(0.25, &u, &fft);
        let mut bytes = Vec::new();
        write_snapshot(&mut bytes, &s).unwrap();
        assert_eq!(bytes.len(), 26 + 3 * 8 * g.len());
        assert_eq!(&bytes[..5], b"SSNS1");
        let back = read_snapshot(bytes.as_slice()).unwrap();
        assert_eq!(back, s);
        let v = back.to_velocity(&fft).unwrap();
        for a in 0..3 {
            for (x, y) in u.coeffs()[a].iter().zip(&v.coeffs()[a]) {
                assert!((x - y).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn rejects_corruption() {
        let g = Grid::periodic(8).unwrap();
        let s = SnapshotData::scalar(0.0, &ScalarField::zeros(g));
        let mut bytes = Vec::new();
        write_snapshot(&mut bytes, &s).unwrap();
        assert_eq!(read_snapshot(bytes.as_slice()).unwrap(), s);
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(read_snapshot(bad.as_slice()), Err(Error::Format(_))));
        assert!(read_snapshot(&bytes[..bytes.len() - 1]).is_err());
        let mut long = bytes.clone();
        long.push(0);
        assert!(read_snapshot(long.as_slice()).is_err());
        let mut kind = bytes;
        kind[5] = 9;
        assert!(read_snapshot(kind.as_slice()).is_err());
    }
}
