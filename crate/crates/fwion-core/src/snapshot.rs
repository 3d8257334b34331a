//! Binary snapshot files for checkpoint/resume and flux handoff.
//!
//! Layout (all little-endian):
//!   magic [8], version u32, nx u64, nz u64, dx f64, dz f64, time f64,
//!   toggles_hash u64, then the up and down arrays as (re, im) f64 pairs in
//!   row-major (x outer) order.
//!
//! The ledger file stores the (k_x, z) accumulator in the same array layout
//! plus the removed-probability counter and entry count. A flux spill file is
//! a plain concatenation of snapshot frames, one per absorber application.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::Array2;
use num_complex::Complex64;

use crate::grid::Grid2D;
use crate::photoelectron::FluxLedger;
use crate::spinor::{Representation, SpinorWavefunction};
use crate::{FwError, Result};

const SNAP_MAGIC: &[u8; 8] = b"FWIONSNP";
const LEDGER_MAGIC: &[u8; 8] = b"FWIONLDG";
const VERSION: u32 = 1;

fn write_field<W: Write>(w: &mut W, field: &Array2<Complex64>) -> Result<()> {
    for v in field.iter() {
        w.write_f64::<LittleEndian>(v.re)?;
        w.write_f64::<LittleEndian>(v.im)?;
    }
    Ok(())
}

fn read_field<R: Read>(r: &mut R, nx: usize, nz: usize) -> Result<Array2<Complex64>> {
    let mut field = Array2::default((nx, nz));
    for v in field.iter_mut() {
        let re = r.read_f64::<LittleEndian>()?;
        let im = r.read_f64::<LittleEndian>()?;
        *v = Complex64::new(re, im);
    }
    Ok(field)
}

fn write_header<W: Write>(
    w: &mut W,
    magic: &[u8; 8],
    grid: &Grid2D,
    time: f64,
    toggles_hash: u64,
) -> Result<()> {
    w.write_all(magic)?;
    w.write_u32::<LittleEndian>(VERSION)?;
    w.write_u64::<LittleEndian>(grid.nx as u64)?;
    w.write_u64::<LittleEndian>(grid.nz as u64)?;
    w.write_f64::<LittleEndian>(grid.dx)?;
    w.write_f64::<LittleEndian>(grid.dz)?;
    w.write_f64::<LittleEndian>(time)?;
    w.write_u64::<LittleEndian>(toggles_hash)?;
    Ok(())
}

struct Header {
    nx: usize,
    nz: usize,
    dx: f64,
    dz: f64,
    time: f64,
    toggles_hash: u64,
}

fn read_header<R: Read>(r: &mut R, magic: &[u8; 8]) -> Result<Header> {
    let mut got = [0u8; 8];
    r.read_exact(&mut got)?;
    if &got != magic {
        return Err(FwError::Integrity(format!(
            "bad magic: expected {:?}, found {:?}",
            String::from_utf8_lossy(magic),
            String::from_utf8_lossy(&got)
        )));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != VERSION {
        return Err(FwError::Integrity(format!("unsupported snapshot version {version}")));
    }
    Ok(Header {
        nx: r.read_u64::<LittleEndian>()? as usize,
        nz: r.read_u64::<LittleEndian>()? as usize,
        dx: r.read_f64::<LittleEndian>()?,
        dz: r.read_f64::<LittleEndian>()?,
        time: r.read_f64::<LittleEndian>()?,
        toggles_hash: r.read_u64::<LittleEndian>()?,
    })
}

fn check_grid(h: &Header, grid: &Grid2D) -> Result<()> {
    if h.nx != grid.nx || h.nz != grid.nz || h.dx != grid.dx || h.dz != grid.dz {
        return Err(FwError::Integrity(format!(
            "snapshot grid {}x{} ({}, {}) does not match run grid {}x{} ({}, {})",
            h.nx, h.nz, h.dx, h.dz, grid.nx, grid.nz, grid.dx, grid.dz
        )));
    }
    Ok(())
}

pub fn write_snapshot(path: &Path, psi: &SpinorWavefunction, toggles_hash: u64) -> Result<()> {
    assert_eq!(psi.rep, Representation::Position);
    let mut w = BufWriter::new(File::create(path)?);
    write_header(&mut w, SNAP_MAGIC, &psi.grid, psi.time, toggles_hash)?;
    write_field(&mut w, &psi.up)?;
    write_field(&mut w, &psi.down)?;
    w.flush()?;
    Ok(())
}

/// Reads a snapshot; when `expect_toggles_hash` is given the stored hash must
/// match.
pub fn read_snapshot(
    path: &Path,
    grid: &Arc<Grid2D>,
    expect_toggles_hash: Option<u64>,
) -> Result<SpinorWavefunction> {
    let mut r = BufReader::new(File::open(path)?);
    let h = read_header(&mut r, SNAP_MAGIC)?;
    check_grid(&h, grid)?;
    if let Some(expect) = expect_toggles_hash {
        if expect != h.toggles_hash {
            return Err(FwError::Integrity(format!(
                "snapshot toggles hash {:016x} does not match the run's {:016x}",
                h.toggles_hash, expect
            )));
        }
    }
    let up = read_field(&mut r, h.nx, h.nz)?;
    let down = read_field(&mut r, h.nx, h.nz)?;
    Ok(SpinorWavefunction {
        up,
        down,
        grid: grid.clone(),
        time: h.time,
        rep: Representation::Position,
    })
}

pub fn write_ledger(path: &Path, ledger: &FluxLedger, toggles_hash: u64) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_header(&mut w, LEDGER_MAGIC, &ledger.grid, 0.0, toggles_hash)?;
    w.write_f64::<LittleEndian>(ledger.removed_probability)?;
    w.write_u64::<LittleEndian>(ledger.entries as u64)?;
    write_field(&mut w, &ledger.acc_up)?;
    write_field(&mut w, &ledger.acc_down)?;
    w.flush()?;
    Ok(())
}

pub fn read_ledger(path: &Path, grid: &Arc<Grid2D>) -> Result<FluxLedger> {
    let mut r = BufReader::new(File::open(path)?);
    let h = read_header(&mut r, LEDGER_MAGIC)?;
    check_grid(&h, grid)?;
    let removed_probability = r.read_f64::<LittleEndian>()?;
    let entries = r.read_u64::<LittleEndian>()? as usize;
    let acc_up = read_field(&mut r, h.nx, h.nz)?;
    let acc_down = read_field(&mut r, h.nx, h.nz)?;
    Ok(FluxLedger {
        grid: grid.clone(),
        acc_up,
        acc_down,
        removed_probability,
        entries,
    })
}

/// Appends one flux frame (position representation) to a spill stream.
pub fn append_flux_frame<W: Write>(
    w: &mut W,
    flux: &SpinorWavefunction,
    toggles_hash: u64,
) -> Result<()> {
    write_header(w, SNAP_MAGIC, &flux.grid, flux.time, toggles_hash)?;
    write_field(w, &flux.up)?;
    write_field(w, &flux.down)?;
    Ok(())
}

/// Reads every flux frame of a spill file.
pub fn read_flux_frames(path: &Path, grid: &Arc<Grid2D>) -> Result<Vec<SpinorWavefunction>> {
    let mut r = BufReader::new(File::open(path)?);
    let mut frames = Vec::new();
    loop {
        let mut probe = [0u8; 8];
        match r.read_exact(&mut probe) {
            Ok(()) => {}
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => break,
            Err(e) => return Err(e.into()),
        }
        if &probe != SNAP_MAGIC {
            return Err(FwError::Integrity("corrupt flux spill frame".into()));
        }
        let version = r.read_u32::<LittleEndian>()?;
        if version != VERSION {
            return Err(FwError::Integrity(format!("unsupported spill version {version}")));
        }
        let h = Header {
            nx: r.read_u64::<LittleEndian>()? as usize,
            nz: r.read_u64::<LittleEndian>()? as usize,
            dx: r.read_f64::<LittleEndian>()?,
            dz: r.read_f64::<LittleEndian>()?,
            time: r.read_f64::<LittleEndian>()?,
            toggles_hash: r.read_u64::<LittleEndian>()?,
        };
        check_grid(&h, grid)?;
        let up = read_field(&mut r, h.nx, h.nz)?;
        let down = read_field(&mut r, h.nx, h.nz)?;
        frames.push(SpinorWavefunction {
            up,
            down,
            grid: grid.clone(),
            time: h.time,
            rep: Representation::Position,
        });
    }
    Ok(frames)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapshot_round_trip_is_bit_exact() {
        let dir = std::env::temp_dir().join("fwion_snapshot_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("state.snap");
        let grid = Arc::new(Grid2D::new(16, 8, 0.3, 0.4).unwrap());
        let mut psi = SpinorWavefunction::gaussian(grid.clone(), (0.1, -0.2), (0.8, 0.9), (0.3, 0.1));
        psi.time = 12.5;
        write_snapshot(&path, &psi, 0xDEADBEEF).unwrap();
        let back = read_snapshot(&path, &grid, Some(0xDEADBEEF)).unwrap();
        assert_eq!(back.time, psi.time);
        assert_eq!(back.up, psi.up);
        assert_eq!(back.down, psi.down);
        // Mismatched toggles hash is an integrity error.
        assert!(read_snapshot(&path, &grid, Some(0x1234)).is_err());
        // Mismatched grid too.
        let other = Arc::new(Grid2D::new(16, 8, 0.3, 0.5).unwrap());
        assert!(read_snapshot(&path, &other, None).is_err());
        std::fs::remove_dir_all(&dir).ok();
    }
}
