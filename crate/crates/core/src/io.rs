//! Matrix interchange: headerless CSV, or a raw little-endian binary layout
//! (`u64 rows`, `u64 cols`, then row-major `f64`). Paths ending in `.bin` use
//! the binary layout; everything else is CSV.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::basis::{all_patterns, Family};
use crate::error::{Error, Result};
use crate::layout::GridLayout;
use crate::matrix::Matrix;
use crate::types::IntensityVector;

const HEADER_LEN: usize = 16;

pub fn is_binary_path(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("bin"))
}

pub fn read_matrix(path: &Path) -> Result<Matrix> {
    if is_binary_path(path) {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        decode_binary(&bytes).map_err(|msg| Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            msg,
        })
    } else {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        parse_csv(&text).map_err(|(line, msg)| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        })
    }
}

pub fn write_matrix(path: &Path, m: &Matrix) -> Result<()> {
    let bytes = if is_binary_path(path) {
        encode_binary(m)
    } else {
        format_csv(m).into_bytes()
    };
    write_atomic(path, &bytes)
}

/// Parses headerless CSV; on failure returns the 1-based line and a message.
pub fn parse_csv(text: &str) -> std::result::Result<Matrix, (usize, String)> {
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let start = data.len();
        for field in line.split(',') {
            let field = field.trim();
            let v: f64 = field
                .parse()
                .map_err(|_| (idx + 1, format!("not a number: `{field}`")))?;
            data.push(v);
        }
        let width = data.len() - start;
        match cols {
            None => cols = Some(width),
            Some(c) if c != width => {
                return Err((idx + 1, format!("expected {c} columns, found {width}")))
            }
            _ => {}
        }
        rows += 1;
    }
    let cols = cols.ok_or((1, "empty matrix".to_string()))?;
    Ok(Matrix::from_vec(rows, cols, data).expect("row widths checked"))
}

pub fn format_csv(m: &Matrix) -> String {
    let mut out = String::with_capacity(m.rows() * m.cols() * 8);
    for r in 0..m.rows() {
        let row: Vec<String> = m.row(r).iter().map(|v| format!("{v}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn encode_binary(m: &Matrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * m.as_slice().len());
    out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
    for v in m.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_binary(bytes: &[u8]) -> std::result::Result<Matrix, String> {
    if bytes.len() < HEADER_LEN {
        return Err(format!("truncated header ({} bytes)", bytes.len()));
    }
    let rows = u64::from_le_bytes(bytes[0..8].try_into().unwrap()) as usize;
    let cols = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let body = &bytes[HEADER_LEN..];
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| format!("header {rows}x{cols} overflows"))?;
    if body.len() != expected {
        return Err(format!(
            "header says {rows}x{cols} ({expected} bytes) but body has {} bytes",
            body.len()
        ));
    }
    let data = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(Matrix::from_vec(rows, cols, data).expect("length checked"))
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// `family,index,offset,intensity` rows in design-matrix column order, then
/// an optional `nae,,,<value>` trailer. `offset` is filled for diagonals only.
pub fn format_intensities(x: &IntensityVector, layout: &GridLayout, nae: Option<f64>) -> String {
    let mut out = String::from("family,index,offset,intensity\n");
    let flat = x.flatten();
    for (id, v) in all_patterns(layout).into_iter().zip(flat) {
        let offset = id.offset(layout).map(|o| o.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{},{offset},{v}\n", id.family.name(), id.index));
    }
    if let Some(e) = nae {
        out.push_str(&format!("nae,,,{e}\n"));
    }
    out
}

/// Inverse of [`format_intensities`]; errors give the 1-based line.
pub fn parse_intensities(
    text: &str,
) -> std::result::Result<(IntensityVector, Option<f64>), (usize, String)> {
    let mut x = IntensityVector {
        c: Vec::new(),
        d: Vec::new(),
        e: Vec::new(),
        step: 0,
    };
    let mut nae = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || (idx == 0 && line.starts_with("family")) {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err((idx + 1, format!("expected 4 fields, found {}", fields.len())));
        }
        let value: f64 = fields[3]
            .parse()
            .map_err(|_| (idx + 1, format!("not a number: `{}`", fields[3])))?;
        if fields[0] == "nae" {
            nae = Some(value);
            continue;
        }
        let family = Family::from_name(fields[0])
            .ok_or_else(|| (idx + 1, format!("unknown family `{}`", fields[0])))?;
        let index: usize = fields[1]
            .parse()
            .map_err(|_| (idx + 1, format!("bad index `{}`", fields[1])))?;
        let list = match family {
            Family::ParallelDiagonal => &mut x.c,
            Family::Vertical => &mut x.d,
            Family::BlockDiagonal => &mut x.e,
        };
        if index != list.len() {
            return Err((idx + 1, format!("expected {} index {}, found {index}", fields[0], list.len())));
        }
        list.push(value);
    }
    let n = x.d.len();
    if n == 0 || x.c.len() != 2 * n - 1 || x.e.is_empty() {
        return Err((1, format!(
            "incomplete intensity table ({} parallel, {} vertical, {} block)",
            x.c.len(),
            n,
            x.e.len()
        )));
    }
    Ok((x, nae))
}

pub fn read_intensities(path: &Path) -> Result<(IntensityVector, Option<f64>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_intensities(&text).map_err(|(line, msg)| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    })
}
