//! `MICROFIELD 1` text format.
//!
//! ```text
//! MICROFIELD 1
//! <nx> <ny> <bc>
//! <ny lines of nx values, row j = 0 (bottom) first>
//! ```
//!
//! Values are written with 17 significant digits so `f64` data round-trips
//! bit-exactly.

use std::io::{BufRead, Write};

use super::grid::{BoundaryCondition, GridField};
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const MAGIC: &str = "MICROFIELD";
pub const VERSION: u32 = 1;

/// Formats a float with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_field<T: Real, W: Write>(field: &GridField<T>, mut w: W) -> Result<()> {
    writeln!(w, "{MAGIC} {VERSION}")?;
    writeln!(w, "{} {} {}", field.nx(), field.ny(), field.bc())?;
    let mut line = String::new();
    for j in 0..field.ny() {
        line.clear();
        for i in 0..field.nx() {
            if i > 0 {
                line.push(' ');
            }
            line.push_str(&fmt17(field.get(i, j).to_f64_lossy()));
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

pub fn field_to_string<T: Real>(field: &GridField<T>) -> String {
    let mut buf = Vec::new();
    write_field(field, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("ascii output")
}

pub fn read_field<T: Real, R: BufRead>(r: R) -> Result<GridField<T>> {
    let mut lines = r.lines().enumerate();
    let mut next = |what: &str| -> Result<(usize, String)> {
        loop {
            match lines.next() {
                Some((n, line)) => {
                    let line = line?;
                    if !line.trim().is_empty() {
                        return Ok((n + 1, line));
                    }
                }
                None => {
                    return Err(Error::Parse {
                        line: 0,
                        msg: format!("unexpected end of input, expected {what}"),
                    })
                }
            }
        }
    };
    let (n, header) = next("header")?;
    let mut parts = header.split_whitespace();
    if parts.next() != Some(MAGIC) || parts.next() != Some("1") || parts.next().is_some() {
        return Err(Error::Parse {
            line: n,
            msg: format!("expected `{MAGIC} {VERSION}`"),
        });
    }
    let (n, dims) = next("dimensions")?;
    let parts: Vec<&str> = dims.split_whitespace().collect();
    if parts.len() != 3 {
        return Err(Error::Parse {
            line: n,
            msg: "expected `nx ny bc`".into(),
        });
    }
    let parse_dim = |s: &str| {
        s.parse::<usize>().map_err(|e| Error::Parse {
            line: n,
            msg: format!("bad dimension `{s}`: {e}"),
        })
    };
    let nx = parse_dim(parts[0])?;
    let ny = parse_dim(parts[1])?;
    let bc: BoundaryCondition = parts[2].parse().map_err(|e: Error| Error::Parse {
        line: n,
        msg: e.to_string(),
    })?;
    let mut values = Vec::with_capacity(nx * ny);
    for _ in 0..ny {
        let (n, row) = next("data row")?;
        let before = values.len();
        for tok in row.split_whitespace() {
            let v: f64 = tok.parse().map_err(|e| Error::Parse {
                line: n,
                msg: format!("bad value `{tok}`: {e}"),
            })?;
            values.push(T::lit(v));
        }
        if values.len() - before != nx {
            return Err(Error::Parse {
                line: n,
                msg: format!("expected {nx} values, found {}", values.len() - before),
            });
        }
    }
    GridField::new(nx, ny, values, bc)
}

pub fn field_from_str<T: Real>(s: &str) -> Result<GridField<T>> {
    read_field(s.as_bytes())
}
