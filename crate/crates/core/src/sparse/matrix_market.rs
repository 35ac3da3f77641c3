//! Matrix Market coordinate files and plain vector files.
//!
//! Matrices are written in `coordinate real general` format with 1-based
//! indices and 17 significant digits, so a write/read round trip reproduces
//! every value bit for bit. Reading also accepts `symmetric` files, whose
//! strictly-triangular entries are mirrored on load.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

const BANNER: &str = "%%MatrixMarket";

pub fn write_matrix_market<W: Write>(a: &SparseMatrix, mut w: W) -> Result<()> {
    writeln!(w, "{BANNER} matrix coordinate real general")?;
    writeln!(w, "{} {} {}", a.nrows(), a.ncols(), a.nnz())?;
    for i in 0..a.nrows() {
        let (cols, vals) = a.row(i);
        for (j, v) in cols.iter().zip(vals) {
            writeln!(w, "{} {} {:.16e}", i + 1, j + 1, v)?;
        }
    }
    Ok(())
}

pub fn write_matrix_market_file<P: AsRef<Path>>(a: &SparseMatrix, path: P) -> Result<()> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    write_matrix_market(a, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn read_matrix_market<R: BufRead>(r: R) -> Result<SparseMatrix> {
    let mut lines = r.lines().enumerate();

    let (header_line_no, header) = loop {
        match lines.next() {
            Some((no, line)) => {
                let line = line?;
                if !line.trim().is_empty() {
                    break (no + 1, line);
                }
            }
            None => {
                return Err(Error::Parse {
                    line: 0,
                    message: "empty file".into(),
                })
            }
        }
    };
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.len() < 5 || !tokens[0].eq_ignore_ascii_case(BANNER) {
        return Err(Error::Parse {
            line: header_line_no,
            message: format!("malformed header: {header:?}"),
        });
    }
    let object = tokens[1].to_ascii_lowercase();
    let format = tokens[2].to_ascii_lowercase();
    let field = tokens[3].to_ascii_lowercase();
    let symmetry = tokens[4].to_ascii_lowercase();
    if object != "matrix" || format != "coordinate" {
        return Err(Error::Parse {
            line: header_line_no,
            message: format!("unsupported file type: {object} {format}"),
        });
    }
    if field != "real" && field != "integer" {
        return Err(Error::Parse {
            line: header_line_no,
            message: format!("unsupported value field: {field}"),
        });
    }
    let symmetric = match symmetry.as_str() {
        "general" => false,
        "symmetric" => true,
        other => {
            return Err(Error::Parse {
                line: header_line_no,
                message: format!("unsupported symmetry: {other}"),
            })
        }
    };

    let mut sizes: Option<(usize, usize, usize)> = None;
    let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
    let mut file_entries = 0usize;
    for (no, line) in lines {
        let line = line?;
        let line_no = no + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        let mut fields = trimmed.split_whitespace();
        match sizes {
            None => {
                let nrows = parse_usize(fields.next(), line_no)?;
                let ncols = parse_usize(fields.next(), line_no)?;
                let nnz = parse_usize(fields.next(), line_no)?;
                if fields.next().is_some() {
                    return Err(Error::Parse {
                        line: line_no,
                        message: "size line has extra fields".into(),
                    });
                }
                sizes = Some((nrows, ncols, nnz));
                triplets.reserve(if symmetric { 2 * nnz } else { nnz });
            }
            Some((nrows, ncols, _)) => {
                let i = parse_usize(fields.next(), line_no)?;
                let j = parse_usize(fields.next(), line_no)?;
                let v = parse_f64(fields.next(), line_no)?;
                if fields.next().is_some() {
                    return Err(Error::Parse {
                        line: line_no,
                        message: "entry line has extra fields".into(),
                    });
                }
                if i == 0 || i > nrows || j == 0 || j > ncols {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!("entry ({i}, {j}) outside a {nrows}x{ncols} matrix"),
                    });
                }
                file_entries += 1;
                triplets.push((i - 1, j - 1, v));
                if symmetric && i != j {
                    triplets.push((j - 1, i - 1, v));
                }
            }
        }
    }
    let (nrows, ncols, nnz) = sizes.ok_or(Error::Parse {
        line: header_line_no,
        message: "missing size line".into(),
    })?;
    if file_entries != nnz {
        return Err(Error::Parse {
            line: header_line_no + 1,
            message: format!("size line declares {nnz} entries, file has {file_entries}"),
        });
    }
    // Duplicate coordinates are rejected during assembly.
    SparseMatrix::from_triplets(nrows, ncols, &triplets)
}

pub fn read_matrix_market_file<P: AsRef<Path>>(path: P) -> Result<SparseMatrix> {
    read_matrix_market(BufReader::new(File::open(path)?))
}

/// Writes one value per line with 17 significant digits.
pub fn write_vector<W: Write>(x: &[f64], mut w: W) -> Result<()> {
    for v in x {
        writeln!(w, "{v:.16e}")?;
    }
    Ok(())
}

pub fn write_vector_file<P: AsRef<Path>>(x: &[f64], path: P) -> Result<()> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    write_vector(x, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Reads a plain vector file: one value per line, `%` comments and blank
/// lines skipped.
pub fn read_vector<R: BufRead>(r: R) -> Result<Vec<f64>> {
    let mut x = Vec::new();
    for (no, line) in r.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        x.push(parse_f64(Some(trimmed), no + 1)?);
    }
    Ok(x)
}

pub fn read_vector_file<P: AsRef<Path>>(path: P) -> Result<Vec<f64>> {
    read_vector(BufReader::new(File::open(path)?))
}

fn parse_usize(token: Option<&str>, line: usize) -> Result<usize> {
    let token = token.ok_or(Error::Parse {
        line,
        message: "missing field".into(),
    })?;
    token.parse().map_err(|_| Error::Parse {
        line,
        message: format!("expected an integer, found {token:?}"),
    })
}

fn parse_f64(token: Option<&str>, line: usize) -> Result<f64> {
    let token = token.ok_or(Error::Parse {
        line,
        message: "missing field".into(),
    })?;
    let v: f64 = token.parse().map_err(|_| Error::Parse {
        line,
        message: format!("expected a number, found {token:?}"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            line,
            message: format!("non-finite value {token:?}"),
        });
    }
    Ok(v)
}
