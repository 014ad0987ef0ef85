//! MatrixMarket coordinate files for cross-checking matrices with external
//! tools. Reads `real`, `integer` and `pattern` fields in `general` or
//! `symmetric` storage; writes `real symmetric` with the lower triangle.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::sparse::{Laplacian, SymCsr};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    Real,
    Integer,
    Pattern,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MmMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub field: Field,
    pub symmetric: bool,
    /// Zero-based `(row, col, value)` exactly as stored in the file.
    pub entries: Vec<(usize, usize, f64)>,
}

pub fn read_matrix_market<R: BufRead>(reader: R) -> Result<MmMatrix> {
    let mut lines = reader.lines().enumerate();
    let (_, banner) = lines.next().ok_or_else(|| Error::parse(1, "empty input"))?;
    let banner = banner?;
    let words: Vec<String> = banner.split_whitespace().map(|w| w.to_ascii_lowercase()).collect();
    if words.len() != 5 || words[0] != "%%matrixmarket" || words[1] != "matrix" {
        return Err(Error::parse(
            1,
            "expected '%%MatrixMarket matrix coordinate <field> <symmetry>'",
        ));
    }
    if words[2] != "coordinate" {
        return Err(Error::parse(1, format!("unsupported format '{}'", words[2])));
    }
    let field = match words[3].as_str() {
        "real" => Field::Real,
        "integer" => Field::Integer,
        "pattern" => Field::Pattern,
        f => return Err(Error::parse(1, format!("unsupported field '{f}'"))),
    };
    let symmetric = match words[4].as_str() {
        "general" => false,
        "symmetric" => true,
        s => return Err(Error::parse(1, format!("unsupported symmetry '{s}'"))),
    };

    let mut size: Option<(usize, usize, usize)> = None;
    let mut entries = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let tok: Vec<&str> = t.split_whitespace().collect();
        let Some((nrows, ncols, nnz)) = size else {
            if tok.len() != 3 {
                return Err(Error::parse(lineno, "size line needs 'rows cols entries'"));
            }
            let p = |s: &str| {
                s.parse::<usize>()
                    .map_err(|_| Error::parse(lineno, format!("bad size '{s}'")))
            };
            let s = (p(tok[0])?, p(tok[1])?, p(tok[2])?);
            if symmetric && s.0 != s.1 {
                return Err(Error::parse(lineno, "symmetric matrix must be square"));
            }
            size = Some(s);
            entries.reserve(s.2.min(1 << 20));
            continue;
        };
        if entries.len() == nnz {
            return Err(Error::parse(lineno, format!("more than the declared {nnz} entries")));
        }
        let want = if field == Field::Pattern { 2 } else { 3 };
        if tok.len() != want {
            return Err(Error::parse(
                lineno,
                format!("expected {want} fields, got {}", tok.len()),
            ));
        }
        let index = |s: &str, n: usize| -> Result<usize> {
            match s.parse::<usize>() {
                Ok(v) if v >= 1 && v <= n => Ok(v - 1),
                _ => Err(Error::parse(lineno, format!("index '{s}' outside 1..={n}"))),
            }
        };
        let i = index(tok[0], nrows)?;
        let j = index(tok[1], ncols)?;
        let v = match field {
            Field::Pattern => 1.0,
            Field::Integer => tok[2]
                .parse::<i64>()
                .map_err(|_| Error::parse(lineno, format!("bad integer '{}'", tok[2])))?
                as f64,
            Field::Real => {
                let v: f64 = tok[2]
                    .parse()
                    .map_err(|_| Error::parse(lineno, format!("bad value '{}'", tok[2])))?;
                if !v.is_finite() {
                    return Err(Error::parse(lineno, "non-finite value"));
                }
                v
            }
        };
        if symmetric && j > i {
            return Err(Error::parse(lineno, "symmetric storage expects the lower triangle"));
        }
        entries.push((i, j, v));
    }
    let (nrows, ncols, nnz) = size.ok_or_else(|| Error::parse(1, "missing size line"))?;
    if entries.len() != nnz {
        return Err(Error::parse(
            0,
            format!("declared {nnz} entries, found {}", entries.len()),
        ));
    }
    Ok(MmMatrix {
        nrows,
        ncols,
        field,
        symmetric,
        entries,
    })
}

impl MmMatrix {
    /// Square symmetric matrix; general storage must be numerically symmetric.
    pub fn to_sym(&self) -> Result<SymCsr> {
        if self.nrows != self.ncols {
            return Err(Error::DimensionMismatch {
                expected: self.nrows,
                got: self.ncols,
            });
        }
        let n = self.nrows;
        if self.symmetric {
            return SymCsr::from_triplets(n, self.entries.clone());
        }
        let upper = SymCsr::from_triplets(n, self.entries.iter().filter(|e| e.0 <= e.1).cloned().collect())?;
        let lower = SymCsr::from_triplets(n, self.entries.iter().filter(|e| e.0 > e.1).cloned().collect())?;
        for (i, j, v) in upper.upper().filter(|e| e.0 != e.1) {
            if lower.get(i, j) != v {
                return Err(Error::Config(format!(
                    "entry ({}, {}) has no symmetric partner",
                    i + 1,
                    j + 1
                )));
            }
        }
        for (i, j, v) in lower.upper() {
            if upper.get(i, j) != v {
                return Err(Error::Config(format!(
                    "entry ({}, {}) has no symmetric partner",
                    j + 1,
                    i + 1
                )));
            }
        }
        Ok(upper)
    }

    /// Off-diagonal entries as nonnegative edge weights.
    pub fn to_adjacency(&self) -> Result<Laplacian> {
        let s = self.to_sym()?;
        let mut edges = Vec::new();
        for (i, j, v) in s.upper().filter(|e| e.0 != e.1) {
            if v < 0.0 {
                return Err(Error::Config(format!("negative weight at ({}, {})", i + 1, j + 1)));
            }
            edges.push((i, j, v));
        }
        Laplacian::from_edges(s.n(), edges)
    }
}

fn write_lower<W: Write>(mut w: W, n: usize, comment: &str, entries: &[(usize, usize, f64)]) -> Result<()> {
    writeln!(w, "%%MatrixMarket matrix coordinate real symmetric")?;
    for line in comment.lines() {
        writeln!(w, "% {line}")?;
    }
    writeln!(w, "{n} {n} {}", entries.len())?;
    for &(i, j, v) in entries {
        // stored upper (i <= j); the file wants the lower triangle
        writeln!(w, "{} {} {:.16e}", j + 1, i + 1, v)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_symmetric<W: Write>(w: W, m: &SymCsr, comment: &str) -> Result<()> {
    let entries: Vec<_> = m.upper().collect();
    write_lower(w, m.n(), comment, &entries)
}

/// Writes the weight matrix of a graph (zero diagonal).
pub fn write_adjacency<W: Write>(w: W, g: &Laplacian, comment: &str) -> Result<()> {
    let entries: Vec<_> = g.edges().collect();
    write_lower(w, g.n(), comment, &entries)
}
