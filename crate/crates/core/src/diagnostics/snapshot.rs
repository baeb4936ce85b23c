//! Dense CSV exports of solutions.
//!
//! A grid file has a header `label,c_0,c_1,...` holding the column
//! coordinates, then one row per row coordinate: `r_i,value_i0,value_i1,...`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use super::fmt_f64;
use crate::error::{check_len, Error, Result};
use crate::grid::AxisGrid;
use crate::htucker::HTensor;
use crate::lowrank::LowRankMatrix;

/// Largest full 2D2V tensor written to disk (`2^22` entries, i.e. a
/// `32^2 x 64^2` grid).
pub const FULL_EXPORT_LIMIT: usize = 1 << 22;

/// `snapshot_t<t>.csv` with `t` printed without trailing zeros.
pub fn snapshot_name(time: f64, suffix: &str) -> String {
    let t = format!("{time:.6}");
    let t = t.trim_end_matches('0').trim_end_matches('.');
    format!("snapshot_t{t}{suffix}.csv")
}

fn write_grid(
    label: &str,
    rows: &DVector<f64>,
    cols: &DVector<f64>,
    values: &DMatrix<f64>,
    path: &Path,
) -> Result<()> {
    check_len("snapshot rows", rows.len(), values.nrows())?;
    check_len("snapshot columns", cols.len(), values.ncols())?;
    let io = |e| Error::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    let mut header = vec![label.to_string()];
    header.extend(cols.iter().map(|&c| fmt_f64(c)));
    writeln!(w, "{}", header.join(",")).map_err(io)?;
    for (i, &r) in rows.iter().enumerate() {
        let mut line = vec![fmt_f64(r)];
        line.extend(values.row(i).iter().map(|&v| fmt_f64(v)));
        writeln!(w, "{}", line.join(",")).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// `f(x, v)` on the full grid.
pub fn write_snapshot_1d(f: &LowRankMatrix, x: &AxisGrid, v: &AxisGrid, path: &Path) -> Result<()> {
    write_grid("x\\v", x.points(), v.points(), &f.to_dense(), path)
}

/// The density `rho(x1, x2)` to `rho_path` and the velocity slice
/// `f(x1[i1], x2[i2], :, :)` to `slice_path`.
pub fn write_snapshot_2d(
    f: &HTensor,
    x: &[AxisGrid; 2],
    v: &[AxisGrid; 2],
    slice: (usize, usize),
    rho_path: &Path,
    slice_path: &Path,
) -> Result<()> {
    let rho = f.density(&v[0], &v[1])?.to_dense();
    write_grid("x1\\x2", x[0].points(), x[1].points(), &rho, rho_path)?;
    let s = f.v_slice(slice.0, slice.1)?;
    write_grid("v1\\v2", v[0].points(), v[1].points(), &s, slice_path)
}

/// Every entry of a 2D2V tensor as `x1,x2,v1,v2,f` lines, refused above
/// [`FULL_EXPORT_LIMIT`] entries.
pub fn write_full_tensor(
    f: &HTensor,
    x: &[AxisGrid; 2],
    v: &[AxisGrid; 2],
    path: &Path,
) -> Result<()> {
    let [n1, n2, n3, n4] = f.dims();
    let entries = n1 * n2 * n3 * n4;
    if entries > FULL_EXPORT_LIMIT {
        return Err(Error::DenseGuard {
            entries,
            limit: FULL_EXPORT_LIMIT,
        });
    }
    let dense = f.to_dense()?;
    let io = |e| Error::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    writeln!(w, "x1,x2,v1,v2,f").map_err(io)?;
    for i4 in 0..n4 {
        for i3 in 0..n3 {
            for i2 in 0..n2 {
                for i1 in 0..n1 {
                    writeln!(
                        w,
                        "{},{},{},{},{}",
                        fmt_f64(x[0].points()[i1]),
                        fmt_f64(x[1].points()[i2]),
                        fmt_f64(v[0].points()[i3]),
                        fmt_f64(v[1].points()[i4]),
                        fmt_f64(dense[(i1 + n1 * i2, i3 + n3 * i4)])
                    )
                    .map_err(io)?;
                }
            }
        }
    }
    w.flush().map_err(io)
}

/// Contents of a grid CSV file.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCsv {
    pub rows: DVector<f64>,
    pub cols: DVector<f64>,
    pub values: DMatrix<f64>,
}

pub fn read_grid_csv(path: &Path) -> Result<GridCsv> {
    let io = |e| Error::io(path, e);
    let bad =
        |line: usize, msg: String| Error::Format(format!("{}: line {line}: {msg}", path.display()));
    let parse = |line: usize, fields: &[&str]| -> Result<Vec<f64>> {
        fields
            .iter()
            .map(|s| s.parse::<f64>().map_err(|e| bad(line, e.to_string())))
            .collect()
    };
    let mut lines = BufReader::new(File::open(path).map_err(io)?).lines();
    let header = match lines.next() {
        Some(l) => l.map_err(io)?,
        None => return Err(bad(1, "empty file".into())),
    };
    let header: Vec<&str> = header.split(',').collect();
    let cols = parse(1, &header[1..])?;
    let mut rows = Vec::new();
    let mut values = Vec::new();
    for (k, line) in lines.enumerate() {
        let line = line.map_err(io)?;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols.len() + 1 {
            return Err(bad(k + 2, format!("expected {} fields", cols.len() + 1)));
        }
        let nums = parse(k + 2, &fields)?;
        rows.push(nums[0]);
        values.extend_from_slice(&nums[1..]);
    }
    Ok(GridCsv {
        values: DMatrix::from_row_slice(rows.len(), cols.len(), &values),
        rows: DVector::from_vec(rows),
        cols: DVector::from_vec(cols),
    })
}
