//! Score CSV: a `# key=value;...` params line, then the matrix CSV layout
//! with two blocks (scores, source values).

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use super::{Method, ScoreMatrix};
use crate::error::{Error, Result};
use crate::modmatrix::csv_support::{
    blank_line, corner_cell, parse_corner, parse_float, parse_grid, parse_intervals, split_blocks, write_header,
    write_row,
};
use crate::modmatrix::format_sig;

pub fn write_scores<W: Write>(s: &ScoreMatrix, mut w: W) -> Result<()> {
    let mut params = vec![format!("method={}", s.method().id())];
    params.extend(
        s.params()
            .iter()
            .filter(|(k, _)| k.as_str() != "method")
            .map(|(k, v)| format!("{k}={v}")),
    );
    writeln!(w, "# {}", params.join(";"))?;
    write_header(&mut w, &corner_cell(s.change_type(), s.intervals()), s.intervals())?;
    let (rows, cols) = s.shape();
    for i in 0..rows {
        write_row(&mut w, &s.locales()[i], (0..cols).map(|j| format_sig(s.scores()[(i, j)], 9)))?;
    }
    blank_line(&mut w)?;
    for i in 0..rows {
        write_row(&mut w, &s.locales()[i], (0..cols).map(|j| format_sig(s.source_values()[(i, j)], 9)))?;
    }
    w.flush()?;
    Ok(())
}

pub fn scores_to_csv(s: &ScoreMatrix, path: impl AsRef<Path>) -> Result<()> {
    write_scores(s, std::io::BufWriter::new(std::fs::File::create(path)?))
}

pub fn read_scores(text: &str) -> Result<ScoreMatrix> {
    let (comments, header, header_line, blocks) = split_blocks(text)?;
    let line = comments.first().ok_or_else(|| Error::Parse {
        line: 1,
        message: "missing '# method=...' params line".into(),
    })?;
    let params: BTreeMap<String, String> = line
        .split(';')
        .filter(|p| !p.is_empty())
        .map(|p| {
            p.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| Error::Parse {
                    line: 1,
                    message: format!("param '{p}' is not key=value"),
                })
        })
        .collect::<Result<_>>()?;
    let parse_opt = |key: &str| -> Result<Option<f64>> {
        params
            .get(key)
            .map(|v| parse_float(v).map_err(|message| Error::Parse { line: 1, message }))
            .transpose()
    };
    let id = params.get("method").ok_or_else(|| Error::Parse {
        line: 1,
        message: "params line has no method".into(),
    })?;
    let k = parse_opt("k")?.map(|k| k as usize);
    let lambda = if id == "rpca" { parse_opt("lambda")? } else { None };
    let method = Method::parse(id, None, k, lambda)?;

    let (change_type, end) = parse_corner(&header[0], header_line)?;
    let intervals = parse_intervals(&header, end, header_line)?;
    if blocks.len() != 2 {
        return Err(Error::Parse {
            line: header_line,
            message: format!("expected 2 blocks (scores, source values), found {}", blocks.len()),
        });
    }
    let locales: Vec<String> = blocks[0].rows.iter().map(|(l, _)| l.clone()).collect();
    let cols = intervals.len();
    let scores = parse_grid(&blocks[0], &locales, cols, 0.0, parse_float)?;
    let values = parse_grid(&blocks[1], &locales, cols, 0.0, parse_float)?;
    Ok(ScoreMatrix::from_parts(method, params, change_type, locales, intervals, scores, values))
}

pub fn csv_to_scores(path: impl AsRef<Path>) -> Result<ScoreMatrix> {
    read_scores(&std::fs::read_to_string(path)?)
}
