//! Binary problem-instance files.
//!
//! Layout (all integers and floats little-endian):
//!
//! | bytes | field |
//! |-------|-------|
//! | 8     | magic `NUCPTINS` |
//! | 4     | format version (`1`) |
//! | 1     | matrix class: 0 = Mat, 1 = Sym |
//! | 1     | measurement: 0 = Gaussian, 1 = Rademacher |
//! | 2     | reserved, zero |
//! | 8 × 6 | rows `M`, cols `N`, rank `r`, measurements `n`, seed, trial |
//! | 8·MN  | `X0`, row-major |
//! | 8·n·MN| `A`, row-major (`n` rows acting on row-major `vec(X)`) |
//! | 8·n   | `y` |

use std::io::{self, Read, Write};

use nalgebra::{DMatrix, DVector};
use nucpt_core::ensembles::{EnsembleSpec, Measurement, ProblemInstance};
use nucpt_core::minimax::Ensemble;

pub const MAGIC: &[u8; 8] = b"NUCPTINS";
pub const VERSION: u32 = 1;

fn invalid(msg: impl Into<String>) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.into())
}

fn put_matrix_row_major<W: Write>(w: &mut W, m: &DMatrix<f64>) -> io::Result<()> {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            w.write_all(&m[(i, j)].to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn write<W: Write>(mut w: W, inst: &ProblemInstance) -> io::Result<()> {
    let s = &inst.spec;
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    let class = match s.class {
        Ensemble::Mat => 0u8,
        Ensemble::Sym => 1,
    };
    let meas = match s.measurement {
        Measurement::Gaussian => 0u8,
        Measurement::Rademacher => 1,
    };
    w.write_all(&[class, meas, 0, 0])?;
    for v in [s.rows, s.cols, s.rank, s.measurements] {
        w.write_all(&(v as u64).to_le_bytes())?;
    }
    w.write_all(&s.seed.to_le_bytes())?;
    w.write_all(&s.trial.to_le_bytes())?;
    put_matrix_row_major(&mut w, &inst.x0)?;
    put_matrix_row_major(&mut w, &inst.a)?;
    for v in inst.y.iter() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()
}

fn take<R: Read, const K: usize>(r: &mut R) -> io::Result<[u8; K]> {
    let mut buf = [0u8; K];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

fn take_u64<R: Read>(r: &mut R) -> io::Result<u64> {
    Ok(u64::from_le_bytes(take(r)?))
}

fn take_floats<R: Read>(r: &mut R, count: usize) -> io::Result<Vec<f64>> {
    let mut bytes = vec![0u8; count.checked_mul(8).ok_or_else(|| invalid("array too large"))?];
    r.read_exact(&mut bytes)?;
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect())
}

pub fn read<R: Read>(mut r: R) -> io::Result<ProblemInstance> {
    if &take::<_, 8>(&mut r)? != MAGIC {
        return Err(invalid("not an instance file (bad magic)"));
    }
    let version = u32::from_le_bytes(take(&mut r)?);
    if version != VERSION {
        return Err(invalid(format!("unsupported instance format version {version}")));
    }
    let [class, meas, _, _] = take::<_, 4>(&mut r)?;
    let class = match class {
        0 => Ensemble::Mat,
        1 => Ensemble::Sym,
        c => return Err(invalid(format!("unknown matrix class {c}"))),
    };
    let measurement = match meas {
        0 => Measurement::Gaussian,
        1 => Measurement::Rademacher,
        m => return Err(invalid(format!("unknown measurement kind {m}"))),
    };
    let mut dims = [0usize; 4];
    for d in &mut dims {
        *d = usize::try_from(take_u64(&mut r)?).map_err(|_| invalid("dimension overflow"))?;
    }
    let [rows, cols, rank, measurements] = dims;
    let seed = take_u64(&mut r)?;
    let trial = take_u64(&mut r)?;
    let spec = EnsembleSpec { class, measurement, rows, cols, rank, measurements, seed, trial };
    spec.validate().map_err(|e| invalid(e.to_string()))?;
    let p = rows * cols;
    let x0 = DMatrix::from_row_slice(rows, cols, &take_floats(&mut r, p)?);
    let a = DMatrix::from_row_slice(measurements, p, &take_floats(&mut r, measurements * p)?);
    let y = DVector::from_vec(take_floats(&mut r, measurements)?);
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(invalid("trailing bytes after instance data"));
    }
    Ok(ProblemInstance { x0, a, y, spec })
}
