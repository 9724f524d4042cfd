//! Matrix CSV: a header of interval start dates, one row per locale, and
//! three blocks (values, raw counts, populations) separated by blank lines.
//!
//! The top-left cell carries the change type and the end of the last
//! interval, e.g. `deactivation;end=2021-11-25`.

use std::io::Write;
use std::path::Path;

use chrono::NaiveDate;
use nalgebra::DMatrix;

use super::{normalized_rate, Interval, ModificationMatrix};
use crate::error::{Error, Result};
use crate::vrf_io::{parse_date, ChangeType};

/// Formats `x` with `digits` significant digits, `%g` style.
pub fn format_sig(x: f64, digits: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -5 || exp >= digits as i32 {
        format!("{}e{}", trim_zeros(mantissa), exp)
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub(crate) fn parse_float(s: &str) -> std::result::Result<f64, String> {
    match s.trim() {
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        t => t.parse::<f64>().map_err(|e| format!("bad number '{t}': {e}")),
    }
}

pub(crate) fn corner_cell(change_type: ChangeType, intervals: &[Interval]) -> String {
    format!("{};end={}", change_type, intervals.last().map(|iv| iv.end.to_string()).unwrap_or_default())
}

pub(crate) fn parse_corner(cell: &str, line: u64) -> Result<(ChangeType, NaiveDate)> {
    let bad = || Error::Parse {
        line,
        message: format!("top-left cell must look like 'deactivation;end=YYYY-MM-DD', got '{cell}'"),
    };
    let (ct, end) = cell.split_once(";end=").ok_or_else(bad)?;
    let ct: ChangeType = ct.parse().map_err(|e: Error| Error::Parse {
        line,
        message: e.to_string(),
    })?;
    let end = parse_date(end).map_err(|_| bad())?;
    Ok((ct, end))
}

/// A labelled grid block as read back from text.
pub(crate) struct Block {
    pub first_line: u64,
    pub rows: Vec<(String, Vec<String>)>,
}

/// Splits `text` into header row plus blank-line separated blocks.
/// Lines starting with `#` before the header are returned separately.
pub(crate) fn split_blocks(text: &str) -> Result<(Vec<String>, Vec<String>, u64, Vec<Block>)> {
    let mut comments = Vec::new();
    let mut header: Option<(Vec<String>, u64)> = None;
    let mut blocks: Vec<Block> = Vec::new();
    let mut current: Option<Block> = None;
    for (k, raw) in text.lines().enumerate() {
        let line_no = k as u64 + 1;
        let line = raw.trim_end_matches('\r');
        if header.is_none() {
            if let Some(c) = line.strip_prefix('#') {
                comments.push(c.trim().to_string());
                continue;
            }
            if line.is_empty() {
                continue;
            }
            header = Some((split_line(line, line_no)?, line_no));
            continue;
        }
        if line.is_empty() {
            if let Some(b) = current.take() {
                blocks.push(b);
            }
            continue;
        }
        let mut cells = split_line(line, line_no)?;
        let label = cells.remove(0);
        current
            .get_or_insert_with(|| Block {
                first_line: line_no,
                rows: Vec::new(),
            })
            .rows
            .push((label, cells));
    }
    if let Some(b) = current.take() {
        blocks.push(b);
    }
    let (header, header_line) = header.ok_or_else(|| Error::Parse {
        line: 1,
        message: "missing header row".into(),
    })?;
    Ok((comments, header, header_line, blocks))
}

fn split_line(line: &str, line_no: u64) -> Result<Vec<String>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(line.as_bytes());
    match reader.records().next() {
        Some(Ok(rec)) => Ok(rec.iter().map(str::to_string).collect()),
        Some(Err(e)) => Err(Error::Parse {
            line: line_no,
            message: e.to_string(),
        }),
        None => Ok(vec![String::new()]),
    }
}

fn quote(field: &str) -> std::borrow::Cow<'_, str> {
    if field.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", field.replace('"', "\"\"")).into()
    } else {
        field.into()
    }
}

pub(crate) fn write_row<W: Write>(out: &mut W, label: &str, cells: impl Iterator<Item = String>) -> Result<()> {
    out.write_all(quote(label).as_bytes())?;
    for c in cells {
        out.write_all(b",")?;
        out.write_all(quote(&c).as_bytes())?;
    }
    out.write_all(b"\n")?;
    Ok(())
}

pub(crate) fn blank_line<W: Write>(out: &mut W) -> Result<()> {
    out.write_all(b"\n")?;
    Ok(())
}

pub(crate) fn write_header<W: Write>(out: &mut W, corner: &str, intervals: &[Interval]) -> Result<()> {
    write_row(out, corner, intervals.iter().map(|iv| iv.start.to_string()))
}

/// Parses a grid block into a matrix, checking labels against `locales`.
pub(crate) fn parse_grid<T: Copy + nalgebra::Scalar>(
    block: &Block,
    locales: &[String],
    cols: usize,
    zero: T,
    parse: impl Fn(&str) -> std::result::Result<T, String>,
) -> Result<DMatrix<T>> {
    if block.rows.len() != locales.len() {
        return Err(Error::Parse {
            line: block.first_line,
            message: format!(
                "block has {} rows but the first block has {}",
                block.rows.len(),
                locales.len()
            ),
        });
    }
    let mut grid = DMatrix::from_element(locales.len(), cols, zero);
    for (i, (label, cells)) in block.rows.iter().enumerate() {
        let line = block.first_line + i as u64;
        if label != &locales[i] {
            return Err(Error::Parse {
                line,
                message: format!("row label '{label}' does not match '{}'", locales[i]),
            });
        }
        if cells.len() != cols {
            return Err(Error::Parse {
                line,
                message: format!("row has {} cells, header has {cols} intervals", cells.len()),
            });
        }
        for (j, c) in cells.iter().enumerate() {
            grid[(i, j)] = parse(c).map_err(|message| Error::Parse { line, message })?;
        }
    }
    Ok(grid)
}

pub(crate) fn parse_intervals(header: &[String], end: NaiveDate, line: u64) -> Result<Vec<Interval>> {
    let starts = header[1..]
        .iter()
        .map(|s| parse_date(s))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
    Ok(starts
        .iter()
        .enumerate()
        .map(|(j, &start)| Interval {
            start,
            end: starts.get(j + 1).copied().unwrap_or(end),
        })
        .collect())
}

pub fn write_matrix<W: Write>(m: &ModificationMatrix, w: W) -> Result<()> {
    let mut out = w;
    write_header(&mut out, &corner_cell(m.change_type(), m.intervals()), m.intervals())?;
    let (rows, cols) = m.shape();
    for i in 0..rows {
        write_row(&mut out, &m.locales()[i], (0..cols).map(|j| format_sig(m.values()[(i, j)], 9)))?;
    }
    blank_line(&mut out)?;
    for i in 0..rows {
        write_row(&mut out, &m.locales()[i], (0..cols).map(|j| m.raw_counts()[(i, j)].to_string()))?;
    }
    blank_line(&mut out)?;
    for i in 0..rows {
        write_row(&mut out, &m.locales()[i], (0..cols).map(|j| m.populations()[(i, j)].to_string()))?;
    }
    out.flush()?;
    Ok(())
}

pub fn matrix_to_csv(m: &ModificationMatrix, path: impl AsRef<Path>) -> Result<()> {
    write_matrix(m, std::io::BufWriter::new(std::fs::File::create(path)?))
}

/// Parses matrix CSV text.
///
/// A value whose 9-digit text matches the rate recomputed from its raw count
/// and population is replaced by the exact recomputed rate, so matrices built
/// from counts round-trip bit-identically.
pub fn read_matrix(text: &str) -> Result<ModificationMatrix> {
    let (_, header, header_line, blocks) = split_blocks(text)?;
    let (change_type, end) = parse_corner(&header[0], header_line)?;
    let intervals = parse_intervals(&header, end, header_line)?;
    if blocks.is_empty() || intervals.is_empty() {
        return Err(Error::Validation("matrices must have ℓ ≥ 1 and d ≥ 1".into()));
    }
    if blocks.len() != 3 {
        return Err(Error::Parse {
            line: header_line,
            message: format!(
                "expected 3 blocks (values, raw_counts, populations), found {}",
                blocks.len()
            ),
        });
    }
    let locales: Vec<String> = blocks[0].rows.iter().map(|(l, _)| l.clone()).collect();
    let cols = intervals.len();
    let mut values = parse_grid(&blocks[0], &locales, cols, 0.0, parse_float)?;
    let raw = parse_grid(&blocks[1], &locales, cols, 0u64, |s| {
        s.parse::<u64>().map_err(|e| format!("bad count '{s}': {e}"))
    })?;
    let pops = parse_grid(&blocks[2], &locales, cols, 0u64, |s| {
        s.parse::<u64>().map_err(|e| format!("bad population '{s}': {e}"))
    })?;
    for i in 0..locales.len() {
        for j in 0..cols {
            let exact = normalized_rate(raw[(i, j)], intervals[j].days(), pops[(i, j)]);
            let v = values[(i, j)];
            if v != exact && parse_float(&format_sig(exact, 9)) == Ok(v) {
                values[(i, j)] = exact;
            }
        }
    }
    ModificationMatrix::from_parts(change_type, locales, intervals, values, raw, pops)
}

pub fn csv_to_matrix(path: impl AsRef<Path>) -> Result<ModificationMatrix> {
    read_matrix(&std::fs::read_to_string(path)?)
}
