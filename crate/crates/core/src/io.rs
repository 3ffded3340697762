//! Binary and CSV serialization of spectra and fields.
//!
//! Binary layout, all little-endian: magic `NLS2`, format version `u32`,
//! `M: u32`, `L: f64`, `K: u32`, then `M*M` interleaved `(re, im)` f64 pairs
//! in row-major storage order.

use std::io::{Read, Write};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid2D, Spectrum};

pub const MAGIC: &[u8; 4] = b"NLS2";
pub const FORMAT_VERSION: u32 = 1;

fn write_header(out: &mut impl Write, grid: &Grid2D) -> Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&FORMAT_VERSION.to_le_bytes())?;
    out.write_all(&(grid.modes() as u32).to_le_bytes())?;
    out.write_all(&grid.length().to_le_bytes())?;
    out.write_all(&(grid.cutoff() as u32).to_le_bytes())?;
    Ok(())
}

fn write_values(out: &mut impl Write, values: &[Complex64]) -> Result<()> {
    let mut buf = Vec::with_capacity(values.len() * 16);
    for z in values {
        buf.extend_from_slice(&z.re.to_le_bytes());
        buf.extend_from_slice(&z.im.to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

fn read_u32(input: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    input.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64(input: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    input.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn read_container(input: &mut impl Read) -> Result<(Grid2D, Vec<Complex64>)> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic, expected NLS2".into()));
    }
    let version = read_u32(input)?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported format version {version}"
        )));
    }
    let modes = read_u32(input)? as usize;
    let length = read_f64(input)?;
    let cutoff = read_u32(input)? as usize;
    let grid = Grid2D::with_cutoff(modes, length, cutoff)?;
    let mut raw = vec![0u8; grid.len() * 16];
    input.read_exact(&mut raw)?;
    let values = raw
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().unwrap());
            let im = f64::from_le_bytes(c[8..].try_into().unwrap());
            Complex64::new(re, im)
        })
        .collect();
    Ok((grid, values))
}

pub fn write_spectrum(out: &mut impl Write, spec: &Spectrum) -> Result<()> {
    write_header(out, spec.grid())?;
    write_values(out, spec.coeffs())
}

pub fn read_spectrum(input: &mut impl Read) -> Result<Spectrum> {
    let (grid, values) = read_container(input)?;
    Spectrum::from_coeffs(grid, values)
}

pub fn write_field(out: &mut impl Write, field: &Field) -> Result<()> {
    write_header(out, field.grid())?;
    write_values(out, field.values())
}

pub fn read_field(input: &mut impl Read) -> Result<Field> {
    let (grid, values) = read_container(input)?;
    Field::new(grid, values)
}

pub fn save_spectrum(path: &std::path::Path, spec: &Spectrum) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_spectrum(&mut file, spec)?;
    file.flush()?;
    Ok(())
}

pub fn load_spectrum(path: &std::path::Path) -> Result<Spectrum> {
    let mut file = std::io::BufReader::new(std::fs::File::open(path)?);
    read_spectrum(&mut file)
}

/// Nonzero coefficients as `k1,k2,re,im` rows, ordered by `(k1, k2)`.
pub fn spectrum_to_csv(spec: &Spectrum) -> String {
    let mut rows: Vec<_> = spec
        .modes()
        .filter(|(_, c)| *c != Complex64::new(0.0, 0.0))
        .collect();
    rows.sort_by_key(|(k, _)| *k);
    let mut out = String::from("k1,k2,re,im\n");
    for (k, c) in rows {
        out.push_str(&format!("{},{},{:e},{:e}\n", k[0], k[1], c.re, c.im));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_roundtrip_is_exact() {
        let grid = Grid2D::new(8, 3.5).unwrap();
        let spec = Spectrum::from_active_fn(grid, |k| {
            Complex64::new(k[0] as f64 * 0.1, 1.0 / (1.0 + k[1].abs() as f64))
        });
        let mut buf = Vec::new();
        write_spectrum(&mut buf, &spec).unwrap();
        assert_eq!(buf.len(), 24 + 64 * 16);
        assert_eq!(&buf[..4], b"NLS2");
        let back = read_spectrum(&mut buf.as_slice()).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn rejects_bad_magic() {
        let buf = b"NOPE\x01\x00\x00\x00".to_vec();
        assert!(matches!(
            read_spectrum(&mut buf.as_slice()),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn csv_lists_nonzero_modes() {
        let grid = Grid2D::periodic(8).unwrap();
        let spec = Spectrum::from_modes(grid, [([1, -1], Complex64::new(0.5, 0.0))]).unwrap();
        assert_eq!(spectrum_to_csv(&spec), "k1,k2,re,im\n1,-1,5e-1,0e0\n");
    }
}
