//! Plain CSV serialization of fields, angular fields, boundary data and mode stacks.
//!
//! Every writer takes a list of comment lines that are emitted first with a
//! leading `# `; readers skip all lines starting with `#`. Numbers are
//! written in Rust's shortest round-trip form, so files reproduce bit for bit.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{AngularField, ComplexField, DirectionGrid, PolarGrid, ScalarField};
use crate::transport::BoundaryData;

fn header(out: &mut String, comments: &[String]) {
    for c in comments {
        let _ = writeln!(out, "# {c}");
    }
}

/// `r,beta,re` rows in ring-major order.
pub fn scalar_field_csv(field: &ScalarField, comments: &[String]) -> String {
    let g = field.grid();
    let mut out = String::new();
    header(&mut out, comments);
    out.push_str("r,beta,re\n");
    for (idx, v) in field.values().iter().enumerate() {
        let (i, j) = g.ring_of(idx);
        let _ = writeln!(out, "{},{},{}", g.radius(i), g.beta(j), v);
    }
    out
}

/// `r,beta,re,im` rows in ring-major order.
pub fn complex_field_csv(field: &ComplexField, comments: &[String]) -> String {
    let g = field.grid();
    let mut out = String::new();
    header(&mut out, comments);
    out.push_str("r,beta,re,im\n");
    for (idx, v) in field.values().iter().enumerate() {
        let (i, j) = g.ring_of(idx);
        let _ = writeln!(out, "{},{},{},{}", g.radius(i), g.beta(j), v.re, v.im);
    }
    out
}

/// Stack of complex fields with a leading `mode` column holding `-p` for entry `p`.
pub fn mode_stack_csv(modes: &[ComplexField], comments: &[String]) -> String {
    let mut out = String::new();
    header(&mut out, comments);
    out.push_str("mode,r,beta,re,im\n");
    for (p, field) in modes.iter().enumerate() {
        let g = field.grid();
        for (idx, v) in field.values().iter().enumerate() {
            let (i, j) = g.ring_of(idx);
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                -(p as i64),
                g.radius(i),
                g.beta(j),
                v.re,
                v.im
            );
        }
    }
    out
}

/// `r,beta,theta,re` rows, node-major with the direction fastest.
pub fn angular_field_csv(field: &AngularField, comments: &[String]) -> String {
    let g = field.grid();
    let dirs = field.dirs();
    let mut out = String::new();
    header(&mut out, comments);
    out.push_str("r,beta,theta,re\n");
    for idx in 0..g.len() {
        let (i, j) = g.ring_of(idx);
        for m in 0..dirs.len() {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                g.radius(i),
                g.beta(j),
                dirs.angle(m),
                field.get(idx, m)
            );
        }
    }
    out
}

/// `beta,theta,value` rows, boundary-node-major with the direction fastest.
pub fn boundary_data_csv(g: &BoundaryData, comments: &[String]) -> String {
    let b = g.boundary();
    let dirs = g.dirs();
    let mut out = String::new();
    header(&mut out, comments);
    out.push_str("beta,theta,value\n");
    for j in 0..b.len() {
        let beta = 2.0 * std::f64::consts::PI * j as f64 / b.len() as f64;
        for m in 0..dirs.len() {
            let _ = writeln!(out, "{},{},{}", beta, dirs.angle(m), g.get(j, m));
        }
    }
    out
}

pub fn write_string(path: &std::path::Path, contents: &str) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(contents.as_bytes())?;
    Ok(())
}

struct Table {
    columns: Vec<String>,
    rows: Vec<Vec<f64>>,
}

fn read_table(reader: impl Read, expected: &[&str]) -> Result<Table> {
    let mut columns: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    for (lineno, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match &columns {
            None => {
                let cols: Vec<String> = line.split(',').map(|s| s.trim().to_string()).collect();
                if cols.len() < expected.len() || cols.iter().zip(expected).any(|(a, b)| a != b) {
                    return Err(Error::Parse(format!(
                        "line {}: expected header starting with `{}`, found `{line}`",
                        lineno + 1,
                        expected.join(",")
                    )));
                }
                columns = Some(cols);
            }
            Some(cols) => {
                let vals: std::result::Result<Vec<f64>, _> =
                    line.split(',').map(|s| s.trim().parse::<f64>()).collect();
                let vals = vals.map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
                if vals.len() != cols.len() {
                    return Err(Error::Parse(format!(
                        "line {}: {} values for {} columns",
                        lineno + 1,
                        vals.len(),
                        cols.len()
                    )));
                }
                rows.push(vals);
            }
        }
    }
    let columns = columns.ok_or_else(|| Error::Parse("missing CSV header".into()))?;
    Ok(Table { columns, rows })
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * (1.0 + b.abs())
}

/// Reads a scalar or complex field written for `grid` (the real part is kept
/// for scalar fields). Node coordinates are checked against the grid.
pub fn read_field(reader: impl Read, grid: PolarGrid) -> Result<ComplexField> {
    let t = read_table(reader, &["r", "beta", "re"])?;
    if t.rows.len() != grid.len() {
        return Err(Error::Parse(format!(
            "field has {} rows, grid has {} nodes",
            t.rows.len(),
            grid.len()
        )));
    }
    let has_im = t.columns.get(3).is_some_and(|c| c == "im");
    let mut values = Vec::with_capacity(grid.len());
    for (idx, row) in t.rows.iter().enumerate() {
        let (i, j) = grid.ring_of(idx);
        if !close(row[0], grid.radius(i)) || !close(row[1], grid.beta(j)) {
            return Err(Error::Parse(format!(
                "row {}: node ({}, {}) does not match the grid",
                idx + 1,
                row[0],
                row[1]
            )));
        }
        values.push(Complex64::new(row[2], if has_im { row[3] } else { 0.0 }));
    }
    ComplexField::from_values(grid, values)
}

pub fn read_scalar_field(reader: impl Read, grid: PolarGrid) -> Result<ScalarField> {
    Ok(read_field(reader, grid)?.re())
}

/// Reads boundary data; the boundary and direction counts are inferred from
/// the rows and checked against the uniform grids.
pub fn read_boundary_data(reader: impl Read) -> Result<BoundaryData> {
    let t = read_table(reader, &["beta", "theta", "value"])?;
    let Some(first) = t.rows.first() else {
        return Err(Error::Parse("boundary data file has no rows".into()));
    };
    let nt = t.rows.iter().take_while(|r| r[0] == first[0]).count();
    if nt == 0 || t.rows.len() % nt != 0 {
        return Err(Error::Parse(
            "boundary data rows do not form a node x direction table".into(),
        ));
    }
    let nb = t.rows.len() / nt;
    let dirs = DirectionGrid::new(nt).map_err(|e| Error::Parse(e.to_string()))?;
    let boundary = crate::grid::BoundaryGrid::new(nb);
    let mut values = vec![0.0; nb * nt];
    for (k, row) in t.rows.iter().enumerate() {
        let (j, m) = (k / nt, k % nt);
        let beta = 2.0 * std::f64::consts::PI * j as f64 / nb as f64;
        if !close(row[0], beta) || !close(row[1], dirs.angle(m)) {
            return Err(Error::Parse(format!(
                "row {}: ({}, {}) is off the uniform grid",
                k + 1,
                row[0],
                row[1]
            )));
        }
        values[m * nb + j] = row[2];
    }
    BoundaryData::from_values(boundary, dirs, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_are_exact() {
        let g = PolarGrid::new(4, 8).unwrap();
        let f = ComplexField::from_fn(g, |z| Complex64::new(z.re.exp() / 3.0, z.im * 0.1));
        let text = complex_field_csv(&f, &["manifest".into()]);
        assert!(text.starts_with("# manifest\nr,beta,re,im\n"));
        assert_eq!(read_field(text.as_bytes(), g).unwrap().values(), f.values());
        let s = f.re();
        assert_eq!(
            read_scalar_field(scalar_field_csv(&s, &[]).as_bytes(), g)
                .unwrap()
                .values(),
            s.values()
        );

        let dirs = DirectionGrid::new(6).unwrap();
        let data = BoundaryData::from_fn(g.boundary(), dirs, |j, m| (j * 10 + m) as f64 / 7.0);
        let back = read_boundary_data(boundary_data_csv(&data, &[]).as_bytes()).unwrap();
        assert_eq!(back.values(), data.values());
        assert_eq!(back.dirs(), dirs);
    }

    #[test]
    fn malformed_input_is_located() {
        let g = PolarGrid::new(4, 8).unwrap();
        let err = read_field("r,beta,re\n0.125,0,1\n0.125,x,2\n".as_bytes(), g).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        let err = read_field("a,b\n".as_bytes(), g).unwrap_err();
        assert!(err.to_string().contains("header"));
        let err = read_boundary_data("beta,theta,value\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("no rows"));
    }

    #[test]
    fn layouts() {
        let g = PolarGrid::new(4, 8).unwrap();
        let dirs = DirectionGrid::new(4).unwrap();
        let a = AngularField::from_fn(g, dirs, |_, t| t.re);
        let text = angular_field_csv(&a, &[]);
        assert_eq!(text.lines().count(), 1 + g.len() * dirs.len());
        let stack = mode_stack_csv(&[ComplexField::zeros(g), ComplexField::zeros(g)], &[]);
        assert!(stack.lines().nth(1 + g.len()).unwrap().starts_with("-1,"));
    }
}
