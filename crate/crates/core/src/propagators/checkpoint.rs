//! Binary wavefunction checkpoints.
//!
//! Layout, all little-endian:
//!
//! | bytes | content |
//! |-------|---------|
//! | 8     | magic `ESTAWF01` |
//! | 4     | `u32` number of axes `D` (0 for a two-level spinor) |
//! | 24·D  | per axis: `u64` point count, `f64` min, `f64` max |
//! | 8     | `f64` time stamp |
//! | 16·N  | amplitudes as `(re, im)` `f64` pairs, row-major, last axis fastest; `N = 2` for a spinor |

use nalgebra::Vector2;
use num_complex::Complex64;
use std::io::{Read, Write};
use std::path::Path;

use super::grid::{Axis, SpatialGrid, WaveFunction};
use crate::error::{EstaError, Result};

const MAGIC: &[u8; 8] = b"ESTAWF01";

pub fn encode(wf: &WaveFunction) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    match wf {
        WaveFunction::Spinor { .. } => out.extend_from_slice(&0u32.to_le_bytes()),
        WaveFunction::Grid { grid, .. } => {
            out.extend_from_slice(&(grid.axes.len() as u32).to_le_bytes());
            for a in &grid.axes {
                out.extend_from_slice(&(a.n as u64).to_le_bytes());
                out.extend_from_slice(&a.min.to_le_bytes());
                out.extend_from_slice(&a.max.to_le_bytes());
            }
        }
    }
    out.extend_from_slice(&wf.time().to_le_bytes());
    for z in wf.amplitudes() {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
    out
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let end = self.pos + N;
        let bytes = self.data.get(self.pos..end).ok_or_else(|| EstaError::domain("truncated checkpoint"))?;
        self.pos = end;
        Ok(bytes.try_into().expect("slice length"))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take::<8>()?))
    }
}

pub fn decode(data: &[u8]) -> Result<WaveFunction> {
    let mut c = Cursor { data, pos: 0 };
    if &c.take::<8>()? != MAGIC {
        return Err(EstaError::domain("not a wavefunction checkpoint"));
    }
    let ndim = u32::from_le_bytes(c.take::<4>()?) as usize;
    if ndim > 2 {
        return Err(EstaError::domain(format!("unsupported checkpoint dimension {ndim}")));
    }
    let mut axes = Vec::with_capacity(ndim);
    for _ in 0..ndim {
        let n = u64::from_le_bytes(c.take::<8>()?) as usize;
        let (min, max) = (c.f64()?, c.f64()?);
        axes.push(Axis::new(min, max, n)?);
    }
    let time = c.f64()?;
    let count = if ndim == 0 { 2 } else { axes.iter().map(|a| a.n).product() };
    let mut amps = Vec::with_capacity(count);
    for _ in 0..count {
        amps.push(Complex64::new(c.f64()?, c.f64()?));
    }
    if c.pos != data.len() {
        return Err(EstaError::domain("trailing bytes in checkpoint"));
    }
    Ok(if ndim == 0 {
        WaveFunction::Spinor { amps: Vector2::new(amps[0], amps[1]), time }
    } else {
        WaveFunction::Grid { grid: SpatialGrid { axes }, amps, time }
    })
}

pub fn write_checkpoint(path: &Path, wf: &WaveFunction) -> Result<()> {
    let io = |e: std::io::Error| EstaError::Io { path: path.display().to_string(), message: e.to_string() };
    let mut f = std::fs::File::create(path).map_err(io)?;
    f.write_all(&encode(wf)).map_err(io)
}

pub fn read_checkpoint(path: &Path) -> Result<WaveFunction> {
    let io = |e: std::io::Error| EstaError::Io { path: path.display().to_string(), message: e.to_string() };
    let mut buf = Vec::new();
    std::fs::File::open(path).map_err(io)?.read_to_end(&mut buf).map_err(io)?;
    decode(&buf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propagators::grid::gaussian_guess;

    #[test]
    fn round_trip_grid_and_spinor() {
        let g = SpatialGrid::two(Axis::new(-2.0, 2.0, 8).unwrap(), Axis::new(1.0, 3.0, 4).unwrap());
        let mut wf = gaussian_guess(&g, &[(0.0, 1.0), (2.0, 0.5)]).with_global_phase(0.4);
        wf.set_time(1.25);
        let bytes = encode(&wf);
        assert_eq!(bytes.len(), 8 + 4 + 2 * 24 + 8 + 32 * 16);
        assert_eq!(decode(&bytes).unwrap(), wf);

        let s = WaveFunction::spinor(Vector2::new(Complex64::new(0.6, 0.1), Complex64::new(0.0, -0.79)));
        assert_eq!(decode(&encode(&s)).unwrap(), s);
    }

    #[test]
    fn rejects_corrupt_input() {
        assert!(decode(b"NOTMAGIC").is_err());
        let s = WaveFunction::spinor(Vector2::new(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)));
        let mut bytes = encode(&s);
        bytes.pop();
        assert!(decode(&bytes).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("wf.bin");
        let g = SpatialGrid::one(Axis::new(-5.0, 5.0, 32).unwrap());
        let wf = gaussian_guess(&g, &[(0.5, 1.0)]);
        write_checkpoint(&p, &wf).unwrap();
        assert_eq!(read_checkpoint(&p).unwrap(), wf);
    }
}
