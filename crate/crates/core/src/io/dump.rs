//! Field snapshots: a little-endian binary format for restarts and legacy VTK for viewing.
//!
//! Binary layout (all little endian):
//!
//! | offset | type     | content                                   |
//! |--------|----------|-------------------------------------------|
//! | 0      | [u8; 8]  | magic `LLGM3D\0\0`                        |
//! | 8      | u32      | format version (1)                        |
//! | 12     | u32      | flags (0)                                 |
//! | 16     | u64 x 3  | cell counts                               |
//! | 40     | f64 x 3  | dimensionless domain lengths              |
//! | 64     | f64 x 3  | cell spacing                              |
//! | 88     | f64      | dimensionless time                        |
//! | 96     | u32      | scheme code (0..3, `u32::MAX` if unknown) |
//! | 100    | u32      | reserved (0)                              |
//! | 104    | f64 x 3N | `m`, component major, `i` fastest         |

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{GridSpec, VectorField3};
use crate::harness::angle_field;
use crate::integrators::SchemeKind;

pub const MAGIC: [u8; 8] = *b"LLGM3D\0\0";
pub const FORMAT_VERSION: u32 = 1;
pub const HEADER_LEN: usize = 104;

/// A decoded binary snapshot.
#[derive(Clone, Debug, PartialEq)]
pub struct Dump {
    pub m: VectorField3,
    pub scheme: Option<SchemeKind>,
}

fn scheme_code(s: Option<SchemeKind>) -> u32 {
    s.and_then(|s| SchemeKind::ALL.iter().position(|&k| k == s))
        .map_or(u32::MAX, |p| p as u32)
}

pub fn encode_dump(m: &VectorField3, scheme: Option<SchemeKind>) -> Vec<u8> {
    let g = m.grid();
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * m.flat_len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    for n in g.counts() {
        out.extend_from_slice(&(n as u64).to_le_bytes());
    }
    for v in g.lengths().into_iter().chain(g.spacing()) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&m.time.to_le_bytes());
    out.extend_from_slice(&scheme_code(scheme).to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    for v in m.flat() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_dump(bytes: &[u8]) -> Result<Dump> {
    let bad = |msg: String| Error::Format(msg);
    if bytes.len() < HEADER_LEN {
        return Err(bad(format!("dump too short: {} bytes", bytes.len())));
    }
    if bytes[..8] != MAGIC {
        return Err(bad("bad magic, not a field dump".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let version = u32_at(8);
    if version != FORMAT_VERSION {
        return Err(bad(format!("unsupported dump version {version}")));
    }
    let mut counts = [0usize; 3];
    for (a, c) in counts.iter_mut().enumerate() {
        *c = usize::try_from(u64_at(16 + 8 * a)).map_err(|_| bad("cell count overflows".into()))?;
    }
    let lengths = [f64_at(40), f64_at(48), f64_at(56)];
    let grid = GridSpec::new(counts, lengths)?;
    let cells = counts.iter().try_fold(1usize, |a, &n| a.checked_mul(n));
    let expected = cells
        .and_then(|c| c.checked_mul(24))
        .and_then(|p| p.checked_add(HEADER_LEN))
        .ok_or_else(|| bad("payload size overflows".into()))?;
    if bytes.len() != expected {
        return Err(bad(format!("dump length {} does not match header ({expected})", bytes.len())));
    }
    let time = f64_at(88);
    let code = u32_at(96) as usize;
    let scheme = SchemeKind::ALL.get(code).copied();
    let flat: Vec<f64> = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let mut m = VectorField3::from_flat(grid, &flat);
    m.time = time;
    Ok(Dump { m, scheme })
}

pub fn write_dump(path: &Path, m: &VectorField3, scheme: Option<SchemeKind>) -> Result<()> {
    fs::write(path, encode_dump(m, scheme))?;
    Ok(())
}

pub fn read_dump(path: &Path) -> Result<Dump> {
    let bytes = fs::read(path)?;
    decode_dump(&bytes).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Legacy ASCII VTK structured points with the vector `m` and the in-plane angle.
pub fn write_vtk(path: &Path, m: &VectorField3, title: &str) -> Result<()> {
    let g = m.grid();
    let [nx, ny, nz] = g.counts();
    let h = g.spacing();
    let mut w = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "{}", title.replace('\n', " "))?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET STRUCTURED_POINTS")?;
    writeln!(w, "DIMENSIONS {nx} {ny} {nz}")?;
    writeln!(w, "ORIGIN {:e} {:e} {:e}", 0.5 * h[0], 0.5 * h[1], 0.5 * h[2])?;
    writeln!(w, "SPACING {:e} {:e} {:e}", h[0], h[1], h[2])?;
    writeln!(w, "POINT_DATA {}", g.cell_count())?;
    writeln!(w, "VECTORS m double")?;
    for l in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let v = m.get(i, j, l);
                writeln!(w, "{:.16e} {:.16e} {:.16e}", v[0], v[1], v[2])?;
            }
        }
    }
    writeln!(w, "SCALARS angle double 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for v in angle_field(m).values() {
        writeln!(w, "{v:.16e}")?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_offsets() {
        let g = GridSpec::new([4, 4, 1], [4.0, 2.0, 0.5]).unwrap();
        let mut m = VectorField3::uniform(g, [0.0, 0.0, 1.0]);
        m.time = 2.5;
        let b = encode_dump(&m, Some(SchemeKind::Bdf2Sipm));
        assert_eq!(b.len(), 104 + 16 * 24);
        assert_eq!(&b[..8], b"LLGM3D\0\0");
        assert_eq!(u64::from_le_bytes(b[24..32].try_into().unwrap()), 4);
        assert_eq!(f64::from_le_bytes(b[72..80].try_into().unwrap()), 0.5);
        assert_eq!(f64::from_le_bytes(b[88..96].try_into().unwrap()), 2.5);
        assert_eq!(u32::from_le_bytes(b[96..100].try_into().unwrap()), 1);
        // m3 of the first cell starts the third component block
        assert_eq!(f64::from_le_bytes(b[104 + 32 * 8..104 + 33 * 8].try_into().unwrap()), 1.0);
    }

    #[test]
    fn corrupt_dumps_rejected() {
        let g = GridSpec::line(4, 1.0).unwrap();
        let b = encode_dump(&VectorField3::uniform(g, [1.0, 0.0, 0.0]), None);
        assert!(decode_dump(&b[..b.len() - 1]).is_err());
        let mut bad = b.clone();
        bad[0] = b'X';
        assert!(decode_dump(&bad).is_err());
        let mut bad = b.clone();
        bad[8] = 9;
        assert!(decode_dump(&bad).is_err());
        assert_eq!(decode_dump(&b).unwrap().scheme, None);
    }
}
