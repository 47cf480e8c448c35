//! Dense real-valued grid text format.
//!
//! ```text
//! width height
//! v00 v01 ... v0(w-1)
//! ...
//! ```
//!
//! The header line holds the dimensions; the remaining whitespace-separated
//! tokens are the values in row-major order, with `.` as the decimal
//! separator. Blank lines and lines starting with `#` are ignored. Writers
//! emit one row per line using the shortest representation that parses back
//! to the same `f64`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

pub fn parse_grid(text: &str, path: &Path) -> Result<Grid> {
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (header_line, header) = lines
        .next()
        .ok_or_else(|| err(1, "missing 'width height' header".into()))?;
    let dims: Vec<&str> = header.split_whitespace().collect();
    let [w, h] = dims[..] else {
        return Err(err(
            header_line,
            format!("expected 'width height', found '{header}'"),
        ));
    };
    let parse_dim = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| err(header_line, format!("invalid dimension '{s}'")))
    };
    let (width, height) = (parse_dim(w)?, parse_dim(h)?);
    let expected = width * height;

    let mut values = Vec::with_capacity(expected);
    let mut last_line = header_line;
    for (line_no, line) in lines {
        last_line = line_no;
        for (col, token) in line.split_whitespace().enumerate() {
            let v: f64 = token.parse().map_err(|_| {
                err(
                    line_no,
                    format!("token {} ('{token}') is not a number", col + 1),
                )
            })?;
            if !v.is_finite() {
                return Err(err(line_no, format!("non-finite value '{token}'")));
            }
            if values.len() == expected {
                return Err(err(
                    line_no,
                    format!("more than {expected} values for a {width}x{height} grid"),
                ));
            }
            values.push(v);
        }
    }
    if values.len() != expected {
        return Err(err(
            last_line,
            format!(
                "expected {expected} values for a {width}x{height} grid, found {}",
                values.len()
            ),
        ));
    }
    Ok(Grid {
        width,
        height,
        values,
    })
}

pub fn load_grid(path: &Path) -> Result<Grid> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_grid(&text, path)
}

pub fn format_grid(width: usize, height: usize, values: &[f64]) -> String {
    assert_eq!(values.len(), width * height);
    let mut out = format!("{width} {height}\n");
    for row in values.chunks(width.max(1)).take(height) {
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            write!(out, "{v:?}").expect("writing to a String");
        }
        out.push('\n');
    }
    out
}

pub fn save_grid(path: &Path, width: usize, height: usize, values: &[f64]) -> Result<()> {
    fs::write(path, format_grid(width, height, values)).map_err(|e| Error::io(path, e))
}
