//! `OZ2M` binary matrix files.
//!
//! Layout: the magic `OZ2M`, rows and cols as little-endian u64, a one-byte
//! element code (0 = f32, 1 = f64, 2 = complex f32, 3 = complex f64), then the
//! column-major elements in little-endian order. Complex elements are stored
//! as interleaved (re, im) pairs.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::bench::AnyMatrix;
use crate::error::{EmuError, Result};
use crate::matrix::{ComplexMatrix, Matrix};

pub const MAGIC: &[u8; 4] = b"OZ2M";

fn dtype_code(m: &AnyMatrix) -> u8 {
    match m {
        AnyMatrix::F32(_) => 0,
        AnyMatrix::F64(_) => 1,
        AnyMatrix::C32(_) => 2,
        AnyMatrix::C64(_) => 3,
    }
}

/// Serializes `m` to any writer.
pub fn write_to<W: Write>(m: &AnyMatrix, mut w: W) -> std::io::Result<()> {
    let (rows, cols) = m.shape();
    w.write_all(MAGIC)?;
    w.write_all(&(rows as u64).to_le_bytes())?;
    w.write_all(&(cols as u64).to_le_bytes())?;
    w.write_all(&[dtype_code(m)])?;
    match m {
        AnyMatrix::F32(x) => x.as_slice().iter().try_for_each(|v| w.write_all(&v.to_le_bytes()))?,
        AnyMatrix::F64(x) => x.as_slice().iter().try_for_each(|v| w.write_all(&v.to_le_bytes()))?,
        AnyMatrix::C32(x) => x.re.as_slice().iter().zip(x.im.as_slice()).try_for_each(|(r, i)| {
            w.write_all(&r.to_le_bytes())?;
            w.write_all(&i.to_le_bytes())
        })?,
        AnyMatrix::C64(x) => x.re.as_slice().iter().zip(x.im.as_slice()).try_for_each(|(r, i)| {
            w.write_all(&r.to_le_bytes())?;
            w.write_all(&i.to_le_bytes())
        })?,
    }
    w.flush()
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf)
        .map_err(|e| EmuError::Format(format!("truncated {what}: {e}")))
}

fn read_values<R: Read, const W: usize, T>(r: &mut R, count: usize, conv: fn([u8; W]) -> T) -> Result<Vec<T>> {
    let want = count
        .checked_mul(W)
        .ok_or_else(|| EmuError::Format("size overflow".into()))?;
    // Grow with the data actually present, so a forged header cannot force a
    // huge allocation.
    let mut bytes = Vec::new();
    r.take(want as u64)
        .read_to_end(&mut bytes)
        .map_err(|e| EmuError::Format(format!("read error: {e}")))?;
    if bytes.len() != want {
        return Err(EmuError::Format(format!(
            "truncated element data: {} of {want} bytes",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(W)
        .map(|c| conv(c.try_into().expect("chunk width")))
        .collect())
}

/// Parses a matrix from any reader; trailing bytes are rejected.
pub fn read_from<R: Read>(mut r: R) -> Result<AnyMatrix> {
    let mut head = [0u8; 21];
    read_exact(&mut r, &mut head, "header")?;
    if &head[..4] != MAGIC {
        return Err(EmuError::Format("missing OZ2M magic".into()));
    }
    let dim = |b: &[u8]| {
        usize::try_from(u64::from_le_bytes(b.try_into().expect("8 bytes")))
            .map_err(|_| EmuError::Format("dimension does not fit in memory".into()))
    };
    let rows = dim(&head[4..12])?;
    let cols = dim(&head[12..20])?;
    let count = rows
        .checked_mul(cols)
        .ok_or_else(|| EmuError::Format("element count overflows".into()))?;
    let m = match head[20] {
        0 => AnyMatrix::F32(Matrix::from_col_major(
            rows,
            cols,
            read_values(&mut r, count, f32::from_le_bytes)?,
        )?),
        1 => AnyMatrix::F64(Matrix::from_col_major(
            rows,
            cols,
            read_values(&mut r, count, f64::from_le_bytes)?,
        )?),
        2 => {
            let (re, im) = deinterleave(read_values(&mut r, 2 * count, f32::from_le_bytes)?);
            AnyMatrix::C32(ComplexMatrix::new(
                Matrix::from_col_major(rows, cols, re)?,
                Matrix::from_col_major(rows, cols, im)?,
            )?)
        }
        3 => {
            let (re, im) = deinterleave(read_values(&mut r, 2 * count, f64::from_le_bytes)?);
            AnyMatrix::C64(ComplexMatrix::new(
                Matrix::from_col_major(rows, cols, re)?,
                Matrix::from_col_major(rows, cols, im)?,
            )?)
        }
        code => return Err(EmuError::Format(format!("unknown element code {code}"))),
    };
    let mut extra = [0u8; 1];
    match r.read(&mut extra) {
        Ok(0) => Ok(m),
        Ok(_) => Err(EmuError::Format("trailing bytes after matrix data".into())),
        Err(e) => Err(EmuError::Format(format!("read error: {e}"))),
    }
}

fn deinterleave<T: Copy>(v: Vec<T>) -> (Vec<T>, Vec<T>) {
    let re = v.iter().step_by(2).copied().collect();
    let im = v.iter().skip(1).step_by(2).copied().collect();
    (re, im)
}

pub fn read_matrix(path: &Path) -> Result<AnyMatrix> {
    let f = File::open(path).map_err(|source| EmuError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_from(BufReader::new(f)).map_err(|e| match e {
        EmuError::Format(msg) => EmuError::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn write_matrix(path: &Path, m: &AnyMatrix) -> Result<()> {
    let io_err = |source| EmuError::Io {
        path: path.to_path_buf(),
        source,
    };
    let f = File::create(path).map_err(io_err)?;
    write_to(m, BufWriter::new(f)).map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::gen_complex;

    #[test]
    fn round_trip_all_types() {
        let c64: ComplexMatrix<f64> = gen_complex(3, 4, 1.0, 9, 0);
        let c32: ComplexMatrix<f32> = gen_complex(2, 5, 1.0, 9, 0);
        let cases = [
            AnyMatrix::F32(c32.re.clone()),
            AnyMatrix::F64(c64.re.clone()),
            AnyMatrix::C32(c32),
            AnyMatrix::C64(c64),
            AnyMatrix::F64(Matrix::zeros(0, 3)),
        ];
        for m in cases {
            let mut buf = Vec::new();
            write_to(&m, &mut buf).unwrap();
            assert_eq!(read_from(&buf[..]).unwrap(), m);
        }
    }

    #[test]
    fn header_layout() {
        let m = AnyMatrix::F64(Matrix::from_rows(&[vec![1.0, 2.0]]).unwrap());
        let mut buf = Vec::new();
        write_to(&m, &mut buf).unwrap();
        assert_eq!(&buf[..4], b"OZ2M");
        assert_eq!(&buf[4..12], &1u64.to_le_bytes());
        assert_eq!(&buf[12..20], &2u64.to_le_bytes());
        assert_eq!(buf[20], 1);
        assert_eq!(&buf[21..29], &1.0f64.to_le_bytes());
        assert_eq!(buf.len(), 21 + 16);
    }

    #[test]
    fn rejects_malformed() {
        assert!(matches!(read_from(&b"NOPE"[..]), Err(EmuError::Format(_))));
        let mut buf = Vec::new();
        write_to(&AnyMatrix::F32(Matrix::zeros(2, 2)), &mut buf).unwrap();
        assert!(matches!(read_from(&buf[..buf.len() - 1]), Err(EmuError::Format(_))));
        let mut long = buf.clone();
        long.push(0);
        assert!(matches!(read_from(&long[..]), Err(EmuError::Format(_))));
        let mut bad = buf.clone();
        bad[20] = 9;
        assert!(matches!(read_from(&bad[..]), Err(EmuError::Format(_))));
    }
}
