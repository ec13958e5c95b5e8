//! Plain-text matrix files.
//!
//! ```text
//! dims 2 2
//! 5e-1+0e0j 0e0+0e0j 0e0+0e0j 5e-1+0e0j
//! ...
//! ```
//!
//! The first line lists the local dimensions; each following line is one
//! matrix row with one `re+imj` token per entry. Numbers are written in Rust's
//! shortest round-trip exponent form, so save/load is bit-exact.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;

use super::{check_dims, ComplexMatrix};
use crate::error::{Error, Result};

pub fn format_complex(z: Complex64) -> String {
    let sign = if z.im.is_sign_negative() { '-' } else { '+' };
    format!("{:e}{}{:e}j", z.re, sign, z.im.abs())
}

pub fn parse_complex(token: &str) -> Result<Complex64> {
    let bad = || Error::Parse(format!("malformed complex entry {token:?}"));
    let body = token.strip_suffix('j').ok_or_else(bad)?;
    let bytes = body.as_bytes();
    // The real/imaginary separator is the last sign not opening the string
    // and not part of an exponent.
    let split = (1..bytes.len())
        .rev()
        .find(|&i| {
            (bytes[i] == b'+' || bytes[i] == b'-') && !matches!(bytes[i - 1], b'e' | b'E')
        })
        .ok_or_else(bad)?;
    let re: f64 = body[..split].parse().map_err(|_| bad())?;
    let im_abs: f64 = body[split + 1..].parse().map_err(|_| bad())?;
    let im = if bytes[split] == b'-' { -im_abs } else { im_abs };
    Ok(Complex64::new(re, im))
}

pub fn format_matrix(m: &ComplexMatrix, dims: &[usize]) -> String {
    let mut out = String::from("dims");
    for d in dims {
        let _ = write!(out, " {d}");
    }
    out.push('\n');
    for i in 0..m.rows() {
        let row: Vec<String> = (0..m.cols()).map(|j| format_complex(m[(i, j)])).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn parse_matrix(text: &str) -> Result<(ComplexMatrix, Vec<usize>)> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
    let header = lines.next().ok_or_else(|| Error::Parse("empty matrix file".into()))?;
    let mut words = header.split_whitespace();
    if words.next() != Some("dims") {
        return Err(Error::Parse(format!("expected dims line, got {header:?}")));
    }
    let dims = words
        .map(|w| w.parse::<usize>().map_err(|_| Error::Parse(format!("bad dimension {w:?}"))))
        .collect::<Result<Vec<_>>>()?;
    let side: usize = dims.iter().product();
    check_dims(&dims, side)?;
    let mut data = Vec::with_capacity(side * side);
    let mut rows = 0;
    for line in lines {
        let before = data.len();
        for tok in line.split_whitespace() {
            data.push(parse_complex(tok)?);
        }
        if data.len() - before != side {
            return Err(Error::Parse(format!(
                "row {rows} has {} entries, expected {side}",
                data.len() - before
            )));
        }
        rows += 1;
    }
    if rows != side {
        return Err(Error::Parse(format!("found {rows} rows, expected {side}")));
    }
    Ok((ComplexMatrix::from_vec(side, side, data)?, dims))
}

pub fn write_matrix(path: impl AsRef<Path>, m: &ComplexMatrix, dims: &[usize]) -> Result<()> {
    std::fs::write(path, format_matrix(m, dims))?;
    Ok(())
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<(ComplexMatrix, Vec<usize>)> {
    parse_matrix(&std::fs::read_to_string(path)?)
}
