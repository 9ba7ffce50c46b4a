//! Dense word/phrase embedding spaces and their text interchange format.
//!
//! The format is one line per token, `token c1 c2 ... cd`, space separated,
//! with an optional first header line `n d` (detected when the first line has
//! exactly two integer fields). Tokens that contain spaces, i.e. phrases,
//! are written with `_` in place of the spaces; in memory the keys keep their
//! original space-separated form.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use unicode_normalization::UnicodeNormalization;

use crate::numfmt::{parse_value, sig6};
use crate::{Error, Result};

/// An immutable vocabulary plus an `n x d` matrix of row vectors.
///
/// Row `i` is the vector of `vocab()[i]`. Lookup is exact string match,
/// case preserved. Construction validates that tokens are unique and every
/// row has exactly `dim` finite components; after that the space never
/// changes, so shared read-only access across threads is safe.
#[derive(Debug, Clone)]
pub struct EmbeddingSpace {
    dim: usize,
    vocab: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f64>,
}

impl EmbeddingSpace {
    /// Build a space from `(token, vector)` rows, keeping row order.
    pub fn from_rows(rows: Vec<(String, Vec<f64>)>) -> Result<Self> {
        let dim = match rows.first() {
            Some((_, v)) => v.len(),
            None => return Err(Error::EmptySpace("no rows".into())),
        };
        if dim == 0 {
            return Err(Error::Config("embedding dimension must be positive".into()));
        }
        let mut space = EmbeddingSpace {
            dim,
            vocab: Vec::with_capacity(rows.len()),
            index: HashMap::with_capacity(rows.len()),
            data: Vec::with_capacity(rows.len() * dim),
        };
        for (token, vector) in rows {
            space.push_row(token, &vector)?;
        }
        Ok(space)
    }

    fn push_row(&mut self, token: String, vector: &[f64]) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: vector.len(),
                context: format!("row for {token:?}"),
            });
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config(format!("non-finite component in row {token:?}")));
        }
        if self.index.contains_key(&token) {
            return Err(Error::DuplicateToken(token));
        }
        self.index.insert(token.clone(), self.vocab.len());
        self.vocab.push(token);
        self.data.extend_from_slice(vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    /// The vector of `token`, or `None` when absent.
    pub fn lookup(&self, token: &str) -> Option<&[f64]> {
        self.index.get(token).map(|&i| self.row(i))
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Rows in vocabulary order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.vocab
            .iter()
            .enumerate()
            .map(|(i, t)| (t.as_str(), self.row(i)))
    }

    /// Cosine similarity of two stored tokens.
    pub fn cosine(&self, a: &str, b: &str) -> Result<f64> {
        let va = self
            .lookup(a)
            .ok_or_else(|| Error::MissingToken(a.to_string()))?;
        let vb = self
            .lookup(b)
            .ok_or_else(|| Error::MissingToken(b.to_string()))?;
        cosine(va, vb).ok_or_else(|| {
            let zero = if norm(va) == 0.0 { a } else { b };
            Error::ZeroVector(zero.to_string())
        })
    }

    /// A copy with every row scaled to unit length. Zero rows are an error.
    pub fn l2_normalized(&self) -> Result<Self> {
        let mut out = self.clone();
        for i in 0..out.vocab.len() {
            let start = i * out.dim;
            let n = norm(&out.data[start..start + out.dim]);
            if n == 0.0 {
                return Err(Error::ZeroVector(out.vocab[i].clone()));
            }
            for v in &mut out.data[start..start + out.dim] {
                *v /= n;
            }
        }
        Ok(out)
    }

    /// Read the text format. A first line with exactly two integer fields is
    /// treated as an `n d` header and checked against the parsed rows.
    pub fn read_text<R: BufRead>(reader: R, expected_dim: Option<usize>) -> Result<Self> {
        Self::read_text_named(reader, expected_dim, "<embeddings>")
    }

    fn read_text_named<R: BufRead>(
        reader: R,
        expected_dim: Option<usize>,
        path: &str,
    ) -> Result<Self> {
        let parse_err = |line: usize, msg: String| Error::Parse {
            path: path.to_string(),
            line,
            msg,
        };
        let mut header: Option<(usize, usize)> = None;
        let mut space: Option<EmbeddingSpace> = None;
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim_end_matches(['\r', '\n']);
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let token = fields.next().expect("non-empty line has a first field");
            let rest: Vec<&str> = fields.collect();
            if space.is_none() && header.is_none() && rest.len() == 1 {
                if let (Ok(n), Ok(d)) = (token.parse::<usize>(), rest[0].parse::<usize>()) {
                    header = Some((n, d));
                    continue;
                }
            }
            let mut vector = Vec::with_capacity(rest.len());
            for f in &rest {
                match parse_value(f) {
                    Some(v) => vector.push(v),
                    None => {
                        return Err(parse_err(
                            lineno + 1,
                            format!("non-numeric component {f:?}"),
                        ))
                    }
                }
            }
            if vector.is_empty() {
                return Err(parse_err(lineno + 1, "row has no components".into()));
            }
            // NFC on load, no case folding.
            let token: String = unescape_token(token).nfc().collect();
            match &mut space {
                None => {
                    let dim = vector.len();
                    if let Some(ed) = expected_dim {
                        if dim != ed {
                            return Err(Error::DimensionMismatch {
                                expected: ed,
                                got: dim,
                                context: format!("{path}: first data row"),
                            });
                        }
                    }
                    if let Some((_, hd)) = header {
                        if dim != hd {
                            return Err(Error::DimensionMismatch {
                                expected: hd,
                                got: dim,
                                context: format!("{path}: header vs first data row"),
                            });
                        }
                    }
                    let mut s = EmbeddingSpace {
                        dim,
                        vocab: Vec::new(),
                        index: HashMap::new(),
                        data: Vec::new(),
                    };
                    s.push_row(token, &vector)?;
                    space = Some(s);
                }
                Some(s) => {
                    if vector.len() != s.dim {
                        return Err(Error::DimensionMismatch {
                            expected: s.dim,
                            got: vector.len(),
                            context: format!("{path}:{}", lineno + 1),
                        });
                    }
                    s.push_row(token, &vector)?;
                }
            }
        }
        let space = space.ok_or_else(|| Error::EmptySpace(path.to_string()))?;
        if let Some((hn, _)) = header {
            if hn != space.len() {
                return Err(Error::Parse {
                    path: path.to_string(),
                    line: 1,
                    msg: format!("header claims {hn} rows, file has {}", space.len()),
                });
            }
        }
        Ok(space)
    }

    pub fn load_text<P: AsRef<Path>>(path: P, expected_dim: Option<usize>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path)?;
        Self::read_text_named(
            BufReader::new(file),
            expected_dim,
            &path.display().to_string(),
        )
    }

    /// Write the text format, 6 significant digits per component.
    pub fn write_text<W: Write>(&self, mut writer: W, with_header: bool) -> Result<()> {
        if self.is_empty() {
            return Err(Error::EmptySpace("refusing to write empty space".into()));
        }
        if with_header {
            writeln!(writer, "{} {}", self.len(), self.dim)?;
        }
        for (token, row) in self.iter() {
            write!(writer, "{}", escape_token(token))?;
            for v in row {
                write!(writer, " {}", sig6(*v))?;
            }
            writeln!(writer)?;
        }
        Ok(())
    }

    pub fn save_text<P: AsRef<Path>>(&self, path: P, with_header: bool) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_text(&mut w, with_header)?;
        w.flush()?;
        Ok(())
    }
}

/// File-side token form: spaces become `_` so the format stays whitespace
/// delimited.
pub fn escape_token(token: &str) -> String {
    token.replace(' ', "_")
}

/// In-memory token form: `_` in a stored token reads back as a space.
pub fn unescape_token(token: &str) -> String {
    token.replace('_', " ")
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine similarity; `None` when either vector has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some(dot(a, b) / (na * nb))
}
