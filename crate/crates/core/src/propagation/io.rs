//! Field snapshot output: CSV for inspection, a compact little-endian binary
//! format for bulk data.
//!
//! Binary layout: magic `DLFR`, `u32` version, `u64` snapshot count, `u64`
//! cell count, `f64` dz, then per snapshot `f64` t followed by the cells as
//! `(re, im)` pairs of `E1`, `E2` and `sigma_bc` in that order.

use std::io::{Read, Write};

use super::Snapshot;
use crate::error::{Error, Result};
use crate::scalar::{Cx, Real};

pub const MAGIC: &[u8; 4] = b"DLFR";
pub const VERSION: u32 = 1;

/// Writes `t,z,re_e1,im_e1,re_e2,im_e2,re_sbc,im_sbc` rows, one per cell per
/// snapshot.
pub fn write_csv<T: Real, W: Write>(out: &mut W, dz: T, snapshots: &[Snapshot<T>]) -> Result<()> {
    writeln!(out, "t,z,re_e1,im_e1,re_e2,im_e2,re_sbc,im_sbc")?;
    for s in snapshots {
        for i in 0..s.e1.len() {
            let z = dz * T::of_usize(i);
            writeln!(
                out,
                "{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e}",
                s.t.as_f64(),
                z.as_f64(),
                s.e1[i].re.as_f64(),
                s.e1[i].im.as_f64(),
                s.e2[i].re.as_f64(),
                s.e2[i].im.as_f64(),
                s.s_bc[i].re.as_f64(),
                s.s_bc[i].im.as_f64(),
            )?;
        }
    }
    Ok(())
}

pub fn write_binary<T: Real, W: Write>(out: &mut W, dz: T, snapshots: &[Snapshot<T>]) -> Result<()> {
    let cells = snapshots.first().map_or(0, |s| s.e1.len());
    if snapshots.iter().any(|s| s.e1.len() != cells || s.e2.len() != cells || s.s_bc.len() != cells) {
        return Err(Error::DimensionMismatch { left: cells, right: 0 });
    }
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&(snapshots.len() as u64).to_le_bytes())?;
    out.write_all(&(cells as u64).to_le_bytes())?;
    out.write_all(&dz.as_f64().to_le_bytes())?;
    for s in snapshots {
        out.write_all(&s.t.as_f64().to_le_bytes())?;
        for field in [&s.e1, &s.e2, &s.s_bc] {
            for z in field.iter() {
                out.write_all(&z.re.as_f64().to_le_bytes())?;
                out.write_all(&z.im.as_f64().to_le_bytes())?;
            }
        }
    }
    Ok(())
}

/// Reads a file produced by [`write_binary`]; returns `(dz, snapshots)`.
pub fn read_binary<R: Read>(input: &mut R) -> Result<(f64, Vec<Snapshot<f64>>)> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::param("file", "not a DLFR field file"));
    }
    let mut b4 = [0u8; 4];
    input.read_exact(&mut b4)?;
    if u32::from_le_bytes(b4) != VERSION {
        return Err(Error::param("file", "unsupported DLFR version"));
    }
    let mut b8 = [0u8; 8];
    let mut u64_ = |r: &mut R| -> Result<u64> {
        r.read_exact(&mut b8)?;
        Ok(u64::from_le_bytes(b8))
    };
    let count = u64_(input)? as usize;
    let cells = u64_(input)? as usize;
    let f = |r: &mut R| -> Result<f64> {
        let mut b = [0u8; 8];
        r.read_exact(&mut b)?;
        Ok(f64::from_le_bytes(b))
    };
    let dz = f(input)?;
    let mut snaps = Vec::with_capacity(count);
    for _ in 0..count {
        let t = f(input)?;
        let mut fields: [Vec<Cx<f64>>; 3] = Default::default();
        for field in fields.iter_mut() {
            field.reserve(cells);
            for _ in 0..cells {
                let re = f(input)?;
                let im = f(input)?;
                field.push(Cx::new(re, im));
            }
        }
        let [e1, e2, s_bc] = fields;
        snaps.push(Snapshot { t, e1, e2, s_bc });
    }
    Ok((dz, snaps))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_round_trip() {
        let s = Snapshot {
            t: 0.5,
            e1: vec![Cx::new(1.0, -2.0), Cx::new(0.25, 0.0)],
            e2: vec![Cx::new(3.0, 4.0), Cx::new(0.0, 1e-9)],
            s_bc: vec![Cx::new(-1.0, 0.5), Cx::new(7.0, 8.0)],
        };
        let mut buf = Vec::new();
        write_binary(&mut buf, 0.1, &[s.clone(), s.clone()]).unwrap();
        assert_eq!(&buf[..4], MAGIC);
        let (dz, back) = read_binary(&mut buf.as_slice()).unwrap();
        assert_eq!(dz, 0.1);
        assert_eq!(back, vec![s.clone(), s]);
    }

    #[test]
    fn csv_has_one_row_per_cell() {
        let s = Snapshot { t: 0.0, e1: vec![Cx::new(1.0, 0.0); 3], e2: vec![Cx::new(0.0, 0.0); 3], s_bc: vec![Cx::new(0.0, 0.0); 3] };
        let mut buf = Vec::new();
        write_csv(&mut buf, 0.5, &[s]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.lines().nth(2).unwrap().starts_with("0.000000000e0,5.000000000e-1"));
    }
}
