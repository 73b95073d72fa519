//! Delimited numeric text files.
//!
//! The reader accepts comma- or tab-separated values with an optional
//! header row of column names. The delimiter is picked from the first
//! line: a tab anywhere selects tabs, otherwise commas. A first line with
//! any cell that does not parse as a number is taken to be the header.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// A parsed numeric table.
#[derive(Debug)]
pub struct Table {
    pub data: DMatrix<f64>,
    pub names: Vec<String>,
    pub had_header: bool,
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn split_line(line: &str, delim: char) -> Vec<&str> {
    line.split(delim).map(str::trim).collect()
}

/// Reads a delimited numeric matrix. Column names come from the header row
/// when one is present and default to X1..Xp otherwise. A file that is only
/// a header yields a matrix with zero rows.
pub fn load_matrix(path: &Path) -> Result<Table> {
    let text = read_to_string(path)?;
    let shown = path.display();
    let mut lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty())
        .collect();
    if lines.is_empty() {
        return Err(Error::Data(format!("{shown}: the file is empty")));
    }
    let delim = if lines[0].1.contains('\t') { '\t' } else { ',' };
    let first = split_line(lines[0].1, delim);
    let ncols = first.len();
    let header_like = first.iter().any(|c| c.parse::<f64>().is_err());
    let (names, had_header) = if header_like {
        let names = first.iter().map(|c| c.to_string()).collect();
        lines.remove(0);
        (names, true)
    } else {
        ((1..=ncols).map(|j| format!("X{j}")).collect(), false)
    };

    let nrows = lines.len();
    let mut data = DMatrix::zeros(nrows, ncols);
    for (row, &(lineno, line)) in lines.iter().enumerate() {
        let cells = split_line(line, delim);
        if cells.len() != ncols {
            return Err(Error::Data(format!(
                "{shown}: line {lineno}: expected {ncols} fields, found {}",
                cells.len()
            )));
        }
        for (col, cell) in cells.iter().enumerate() {
            data[(row, col)] = cell.parse::<f64>().map_err(|_| {
                Error::Data(format!(
                    "{shown}: line {lineno}, field {}: could not parse '{cell}' as a number",
                    col + 1
                ))
            })?;
        }
    }
    Ok(Table {
        data,
        names,
        had_header,
    })
}

/// Reads a single-column numeric file (the outcome).
pub fn load_vector(path: &Path) -> Result<DVector<f64>> {
    let table = load_matrix(path)?;
    if table.data.ncols() != 1 {
        return Err(Error::Data(format!(
            "{}: expected a single column, found {}",
            path.display(),
            table.data.ncols()
        )));
    }
    Ok(table.data.column(0).into_owned())
}

/// Writes text to a file, reporting the path on failure.
pub fn write_text(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}
