//! Self-describing binary container for HT tensors.
//!
//! Layout (all integers and floats little-endian):
//!
//! | field       | type        | notes                                   |
//! |-------------|-------------|-----------------------------------------|
//! | magic       | 8 bytes     | `LRVPHT\0\0`                            |
//! | version     | u32         | currently 1                             |
//! | flags       | u32         | bit 0: orthogonal                       |
//! | dims        | 4 x u64     | `n1 n2 n3 n4`                           |
//! | ranks       | 6 x u64     | `r1 r2 r3 r4 r12 r34`                   |
//! | leaves      | f64 arrays  | `U1..U4`, column-major `n_mu x r_mu`    |
//! | B12, B34    | f64 arrays  | entry `(a, b, p)` at `a + r_l (b + r_r p)` |
//! | root        | f64 array   | column-major `r12 x r34`                |

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use super::{HTensor, Transfer};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"LRVPHT\0\0";
const VERSION: u32 = 1;

fn invalid(msg: impl Into<String>) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.into())
}

fn read_u32(r: &mut impl Read) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> io::Result<usize> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    usize::try_from(u64::from_le_bytes(b)).map_err(|_| invalid("size overflow"))
}

fn read_matrix(r: &mut impl Read, rows: usize, cols: usize) -> io::Result<DMatrix<f64>> {
    let len = rows
        .checked_mul(cols)
        .filter(|&n| n <= 1 << 32)
        .ok_or_else(|| invalid("array too large"))?;
    let mut data = Vec::with_capacity(len);
    let mut b = [0u8; 8];
    for _ in 0..len {
        r.read_exact(&mut b)?;
        data.push(f64::from_le_bytes(b));
    }
    Ok(DMatrix::from_vec(rows, cols, data))
}

fn write_matrix(w: &mut impl Write, m: &DMatrix<f64>) -> io::Result<()> {
    for x in m.as_slice() {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

impl HTensor {
    pub fn write_to(&self, w: &mut impl Write) -> io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&u32::from(self.orthogonal).to_le_bytes())?;
        for n in self.dims() {
            w.write_all(&(n as u64).to_le_bytes())?;
        }
        for r in self.ranks().as_array() {
            w.write_all(&(r as u64).to_le_bytes())?;
        }
        for leaf in &self.leaves {
            write_matrix(w, leaf)?;
        }
        write_matrix(w, &self.b12.mat)?;
        write_matrix(w, &self.b34.mat)?;
        write_matrix(w, &self.root)
    }

    pub fn read_from(r: &mut impl Read) -> io::Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(invalid("not an HT tensor file"));
        }
        let version = read_u32(r)?;
        if version != VERSION {
            return Err(invalid(format!("unsupported version {version}")));
        }
        let flags = read_u32(r)?;
        let mut dims = [0usize; 4];
        for d in dims.iter_mut() {
            *d = read_u64(r)?;
        }
        let mut ranks = [0usize; 6];
        for x in ranks.iter_mut() {
            *x = read_u64(r)?;
        }
        let [r1, r2, r3, r4, r12, r34] = ranks;
        let mut leaves = Vec::with_capacity(4);
        for (n, k) in dims.iter().zip([r1, r2, r3, r4]) {
            leaves.push(read_matrix(r, *n, k)?);
        }
        let b12 = Transfer {
            left: r1,
            right: r2,
            mat: read_matrix(r, r1 * r2, r12)?,
        };
        let b34 = Transfer {
            left: r3,
            right: r4,
            mat: read_matrix(r, r3 * r4, r34)?,
        };
        let root = read_matrix(r, r12, r34)?;
        let leaves: [DMatrix<f64>; 4] = leaves.try_into().expect("four leaves");
        let mut out = HTensor::new(leaves, b12, b34, root).map_err(|e| invalid(e.to_string()))?;
        out.orthogonal = flags & 1 == 1;
        Ok(out)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(&mut BufReader::new(file)).map_err(|e| Error::io(path, e))
    }
}
