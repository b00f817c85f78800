//! Matrix Market reader and writer (real, general or symmetric; coordinate
//! or array layout).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::linalg::SparseOp;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Layout {
    Coordinate,
    Array,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
}

struct Parser<'p> {
    path: &'p Path,
}

impl Parser<'_> {
    fn err(&self, line: usize, msg: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.to_path_buf(),
            line,
            msg: msg.into(),
        }
    }

    fn header(&self, line: &str) -> Result<(Layout, Symmetry)> {
        let toks: Vec<String> = line.split_whitespace().map(str::to_ascii_lowercase).collect();
        if toks.len() != 5 || toks[0] != "%%matrixmarket" || toks[1] != "matrix" {
            return Err(self.err(1, "expected `%%MatrixMarket matrix <layout> real <symmetry>`"));
        }
        let layout = match toks[2].as_str() {
            "coordinate" => Layout::Coordinate,
            "array" => Layout::Array,
            other => return Err(self.err(1, format!("unsupported layout `{other}`"))),
        };
        if toks[3] != "real" {
            return Err(self.err(1, format!("unsupported field `{}`; only real is read", toks[3])));
        }
        let sym = match toks[4].as_str() {
            "general" => Symmetry::General,
            "symmetric" => Symmetry::Symmetric,
            other => return Err(self.err(1, format!("unsupported symmetry `{other}`"))),
        };
        Ok((layout, sym))
    }

    fn number<T: std::str::FromStr>(&self, tok: Option<&str>, line: usize, what: &str) -> Result<T> {
        let tok = tok.ok_or_else(|| self.err(line, format!("missing {what}")))?;
        tok.parse()
            .map_err(|_| self.err(line, format!("cannot parse {what} `{tok}`")))
    }

    fn value(&self, tok: Option<&str>, line: usize) -> Result<f64> {
        let v: f64 = self.number(tok, line, "value")?;
        if !v.is_finite() {
            return Err(self.err(line, "non-finite value"));
        }
        Ok(v)
    }

    fn parse<R: BufRead>(&self, reader: R) -> Result<SparseOp> {
        let mut lines = reader.lines().enumerate().map(|(i, l)| (i + 1, l));
        let io = |e| Error::Io {
            path: self.path.to_path_buf(),
            source: e,
        };

        let (layout, sym) = match lines.next() {
            Some((_, l)) => self.header(&l.map_err(io)?)?,
            None => return Err(self.err(1, "empty file")),
        };

        let mut body = lines.filter_map(|(n, l)| match l {
            Ok(s) => {
                let t = s.trim();
                (!t.is_empty() && !t.starts_with('%')).then(|| Ok((n, t.to_string())))
            }
            Err(e) => Some(Err(e)),
        });
        let mut last_line = 1;

        let (size_line, size) = match body.next() {
            Some(r) => r.map_err(io)?,
            None => return Err(self.err(last_line + 1, "missing size line")),
        };
        last_line = size_line;
        let mut t = size.split_whitespace();
        let rows: usize = self.number(t.next(), size_line, "row count")?;
        let cols: usize = self.number(t.next(), size_line, "column count")?;
        let expected = match layout {
            Layout::Coordinate => self.number(t.next(), size_line, "entry count")?,
            Layout::Array => match sym {
                Symmetry::General => rows * cols,
                Symmetry::Symmetric => rows * (rows + 1) / 2,
            },
        };
        if t.next().is_some() {
            return Err(self.err(size_line, "trailing tokens on size line"));
        }
        if rows == 0 || cols == 0 {
            return Err(self.err(size_line, "empty matrix"));
        }
        if sym == Symmetry::Symmetric && rows != cols {
            return Err(self.err(size_line, "symmetric matrix must be square"));
        }

        let mut triplets = Vec::with_capacity(match sym {
            Symmetry::General => expected,
            Symmetry::Symmetric => 2 * expected,
        });
        let mut count = 0usize;
        // array layout walks columns top to bottom (lower triangle if symmetric)
        let (mut ai, mut aj) = (0usize, 0usize);
        for r in body.by_ref() {
            let (n, l) = r.map_err(io)?;
            last_line = n;
            if count == expected {
                return Err(self.err(n, format!("more entries than the declared {expected}")));
            }
            let mut t = l.split_whitespace();
            let (i, j, v) = match layout {
                Layout::Coordinate => {
                    let i: usize = self.number(t.next(), n, "row index")?;
                    let j: usize = self.number(t.next(), n, "column index")?;
                    let v = self.value(t.next(), n)?;
                    if i == 0 || i > rows || j == 0 || j > cols {
                        return Err(self.err(n, format!("index ({i}, {j}) outside {rows}x{cols}")));
                    }
                    (i - 1, j - 1, v)
                }
                Layout::Array => {
                    let v = self.value(t.next(), n)?;
                    let here = (ai, aj);
                    ai += 1;
                    if ai == rows {
                        aj += 1;
                        ai = if sym == Symmetry::Symmetric { aj } else { 0 };
                    }
                    (here.0, here.1, v)
                }
            };
            if t.next().is_some() {
                return Err(self.err(n, "trailing tokens on entry line"));
            }
            if layout == Layout::Array && v == 0.0 {
                count += 1;
                continue;
            }
            triplets.push((i, j, v));
            if sym == Symmetry::Symmetric && i != j {
                triplets.push((j, i, v));
            }
            count += 1;
        }
        if count != expected {
            return Err(self.err(last_line, format!("found {count} entries, header declares {expected}")));
        }
        SparseOp::from_triplets(rows, cols, &triplets)
    }
}

/// Reads a Matrix Market file. Symmetric files are expanded to full storage;
/// duplicate coordinate entries are summed.
pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<SparseOp> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Parser { path }.parse(BufReader::new(file))
}

/// Parses Matrix Market text already in memory; `label` names it in errors.
pub fn parse_matrix_market(text: &str, label: impl Into<PathBuf>) -> Result<SparseOp> {
    let label = label.into();
    Parser { path: &label }.parse(text.as_bytes())
}

/// Writes `a` as `coordinate real general`, every stored entry included,
/// with shortest round-trip formatting so reading it back is exact.
pub fn write_matrix_market(path: impl AsRef<Path>, a: &SparseOp) -> Result<()> {
    let path = path.as_ref();
    let io = |e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    write_to(&mut w, a).map_err(io)?;
    w.flush().map_err(io)
}

fn write_to<W: Write>(w: &mut W, a: &SparseOp) -> std::io::Result<()> {
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", a.rows(), a.cols(), a.nnz())?;
    for (i, j, v) in a.triplets() {
        writeln!(w, "{} {} {:e}", i + 1, j + 1, v)?;
    }
    Ok(())
}
