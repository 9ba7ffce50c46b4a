//! Context-based phrase induction.
//!
//! A square transform `A` is fit so that `A` applied to a word's average
//! context vector recovers that word's pretrained vector. Once learned, the
//! same transform embeds any new phrase from the average of the contexts it
//! occurs in: `v_q = A * avg(C_q)`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::corpus::{ContextBank, PhraseQuery};
use crate::embedding::EmbeddingSpace;
use crate::numfmt::{parse_value, sig6};
use crate::{Error, Result};

/// The learned `d x d` induction transform plus fit metadata.
#[derive(Debug, Clone)]
pub struct InductionTransform {
    dim: usize,
    matrix: Vec<f64>, // row-major d*d
    pub ridge_lambda: f64,
    pub n_training_words: usize,
    /// Mean over training words of the squared residual norm.
    pub residual: f64,
}

impl InductionTransform {
    pub fn new(dim: usize, matrix: Vec<f64>) -> Result<Self> {
        if matrix.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                got: matrix.len(),
                context: "transform matrix".into(),
            });
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("non-finite transform entry".into()));
        }
        Ok(InductionTransform {
            dim,
            matrix,
            ridge_lambda: 0.0,
            n_training_words: 0,
            residual: 0.0,
        })
    }

    pub fn identity(dim: usize) -> Self {
        let mut matrix = vec![0.0; dim * dim];
        for i in 0..dim {
            matrix[i * dim + i] = 1.0;
        }
        InductionTransform::new(dim, matrix).expect("square identity")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, row: usize, col: usize) -> f64 {
        self.matrix[row * self.dim + col]
    }

    /// `A * x`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
                context: "transform input".into(),
            });
        }
        let mut out = vec![0.0; self.dim];
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.matrix[i * self.dim..(i + 1) * self.dim];
            *o = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
        Ok(out)
    }

    /// `d` lines of `d` values, row-major, same numeric format as embeddings.
    pub fn write<W: Write>(&self, mut writer: W) -> Result<()> {
        for i in 0..self.dim {
            let row = &self.matrix[i * self.dim..(i + 1) * self.dim];
            let line: Vec<String> = row.iter().map(|v| sig6(*v)).collect();
            writeln!(writer, "{}", line.join(" "))?;
        }
        Ok(())
    }

    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut row = Vec::new();
            for f in line.split_whitespace() {
                row.push(parse_value(f).ok_or_else(|| Error::Parse {
                    path: "<transform>".into(),
                    line: lineno + 1,
                    msg: format!("non-numeric entry {f:?}"),
                })?);
            }
            rows.push(row);
        }
        let dim = rows.len();
        if dim == 0 {
            return Err(Error::EmptySpace("<transform>".into()));
        }
        let mut matrix = Vec::with_capacity(dim * dim);
        for row in &rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                    context: "transform must be square".into(),
                });
            }
            matrix.extend_from_slice(row);
        }
        InductionTransform::new(dim, matrix)
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self> {
        Self::read(BufReader::new(File::open(path)?))
    }
}

/// Mean over a query's contexts of the summed in-vocabulary token vectors.
///
/// Out-of-vocabulary window tokens are skipped; the divisor is the number of
/// contexts. Fails when the query has no contexts or no window token is in
/// the vocabulary.
pub fn context_average(
    bank: &ContextBank,
    query: &str,
    space: &EmbeddingSpace,
) -> Result<Vec<f64>> {
    let windows = bank
        .windows(query)
        .ok_or_else(|| Error::NoUsableContext(query.to_string()))?;
    if windows.is_empty() {
        return Err(Error::NoUsableContext(query.to_string()));
    }
    let mut sum = vec![0.0; space.dim()];
    let mut usable = 0usize;
    for window in windows {
        for token in window {
            if let Some(v) = space.lookup(token) {
                for (s, x) in sum.iter_mut().zip(v) {
                    *s += x;
                }
                usable += 1;
            }
        }
    }
    if usable == 0 {
        return Err(Error::NoUsableContext(query.to_string()));
    }
    let n = windows.len() as f64;
    for s in &mut sum {
        *s /= n;
    }
    Ok(sum)
}

/// Options for [`fit_transform`].
#[derive(Debug, Clone)]
pub struct FitConfig {
    /// Ridge strength; `None` picks `1e-2 * trace(XtX) / d`.
    pub lambda: Option<f64>,
    /// Words need at least this many contexts to be used for training.
    pub min_contexts: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            lambda: None,
            min_contexts: 5,
        }
    }
}

/// Fit `A` by ridge regression of word vectors onto their context averages:
/// minimize `sum_w ||v_w - A x_w||^2 + lambda ||A||_F^2`, solved through the
/// normal equations with a symmetric positive-definite factorization.
///
/// Training words are vocabulary entries whose bank count reaches
/// `min_contexts` and whose context average is computable. Accumulation runs
/// in vocabulary order, so the fit is deterministic for identical inputs.
pub fn fit_transform(
    space: &EmbeddingSpace,
    bank: &ContextBank,
    cfg: &FitConfig,
) -> Result<InductionTransform> {
    let d = space.dim();
    let mut xtx = DMatrix::<f64>::zeros(d, d);
    let mut vxt = DMatrix::<f64>::zeros(d, d);
    let mut training: Vec<(DVector<f64>, DVector<f64>)> = Vec::new();
    for (word, vector) in space.iter() {
        if bank.count(word) < cfg.min_contexts.max(1) {
            continue;
        }
        let Ok(avg) = context_average(bank, word, space) else {
            continue;
        };
        let x = DVector::from_vec(avg);
        let v = DVector::from_column_slice(vector);
        xtx.ger(1.0, &x, &x, 1.0);
        vxt.ger(1.0, &v, &x, 1.0);
        training.push((x, v));
    }
    let n_train = training.len();
    if n_train < d {
        return Err(Error::InsufficientTrainingWords {
            got: n_train,
            need: d,
        });
    }
    if n_train < 10 * d {
        log::warn!("fitting on {n_train} training words; {} recommended for d = {d}", 10 * d);
    }
    let lambda = match cfg.lambda {
        Some(l) if l >= 0.0 => l,
        Some(l) => return Err(Error::Config(format!("lambda must be nonnegative, got {l}"))),
        None => 1e-2 * xtx.trace() / d as f64,
    };
    let mut regularized = xtx;
    for i in 0..d {
        regularized[(i, i)] += lambda;
    }
    let chol = nalgebra::Cholesky::new(regularized).ok_or(Error::SingularSystem)?;
    // A (XtX + lambda I) = V Xt  =>  (XtX + lambda I) At = (V Xt)t.
    let a_t = chol.solve(&vxt.transpose());
    let a = a_t.transpose();

    let mut residual = 0.0;
    for (x, v) in &training {
        let r = v - &a * x;
        residual += r.norm_squared();
    }
    residual /= n_train as f64;

    let mut matrix = Vec::with_capacity(d * d);
    for i in 0..d {
        for j in 0..d {
            matrix.push(a[(i, j)]);
        }
    }
    let mut t = InductionTransform::new(d, matrix)?;
    t.ridge_lambda = lambda;
    t.n_training_words = n_train;
    t.residual = residual;
    Ok(t)
}

/// Result of inducing phrase vectors: the new space plus per-query failures.
#[derive(Debug)]
pub struct InductionOutcome {
    pub space: EmbeddingSpace,
    pub failures: Vec<(String, Error)>,
}

/// Embed each query as `A * avg(C_q)`. Queries whose contexts are unusable
/// are listed in `failures`, never silently dropped.
pub fn induce(
    transform: &InductionTransform,
    bank: &ContextBank,
    queries: &[PhraseQuery],
    space: &EmbeddingSpace,
) -> Result<InductionOutcome> {
    if transform.dim() != space.dim() {
        return Err(Error::DimensionMismatch {
            expected: space.dim(),
            got: transform.dim(),
            context: "transform vs embedding space".into(),
        });
    }
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for q in queries {
        let phrase = q.phrase();
        match context_average(bank, &phrase, space).and_then(|x| transform.apply(&x)) {
            Ok(v) => rows.push((phrase, v)),
            Err(e) => failures.push((phrase, e)),
        }
    }
    if rows.is_empty() {
        return Err(Error::NoUsableContext(
            "every query failed induction".into(),
        ));
    }
    Ok(InductionOutcome {
        space: EmbeddingSpace::from_rows(rows)?,
        failures,
    })
}
