//! Subword phrase composition.
//!
//! A lookup table of character n-gram vectors is trained by SGD so that the
//! mean of a word's substring vectors reconstructs its pretrained vector.
//! Composed vectors for unseen words and phrases are then the mean of
//! whatever substrings the table covers. Words are wrapped in `<` and `>`
//! before enumeration, so prefixes and suffixes get distinct entries; spaces
//! in phrases become the joiner character.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::PhraseQuery;
use crate::embedding::EmbeddingSpace;
use crate::numfmt::{parse_value, sig6};
use crate::{Error, Result};

#[derive(Debug, Clone, serde::Deserialize, serde::Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct BosConfig {
    pub min_n: usize,
    pub max_n: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub begin_marker: char,
    pub end_marker: char,
    pub joiner: char,
}

impl Default for BosConfig {
    fn default() -> Self {
        BosConfig {
            min_n: 3,
            max_n: 6,
            learning_rate: 0.1,
            epochs: 10,
            seed: 13,
            begin_marker: '<',
            end_marker: '>',
            joiner: '_',
        }
    }
}

impl BosConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_n == 0 || self.min_n > self.max_n {
            return Err(Error::Config(format!(
                "need 1 <= min_n <= max_n, got {}..{}",
                self.min_n, self.max_n
            )));
        }
        if self.learning_rate <= 0.0 {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        Ok(())
    }
}

/// All character n-grams of the marked form, lengths `min_n ..= max_n`,
/// duplicates collapsed.
pub fn substrings_of(word: &str, cfg: &BosConfig) -> BTreeSet<String> {
    let mut marked: Vec<char> = Vec::with_capacity(word.len() + 2);
    marked.push(cfg.begin_marker);
    marked.extend(word.chars().map(|c| if c == ' ' { cfg.joiner } else { c }));
    marked.push(cfg.end_marker);
    let mut set = BTreeSet::new();
    for n in cfg.min_n..=cfg.max_n {
        if n > marked.len() {
            break;
        }
        for w in marked.windows(n) {
            set.insert(w.iter().collect());
        }
    }
    set
}

/// Map from character n-gram to vector.
#[derive(Debug, Clone, Default)]
pub struct SubstringTable {
    dim: usize,
    map: HashMap<String, Vec<f64>>,
}

impl SubstringTable {
    pub fn new(dim: usize) -> Self {
        SubstringTable {
            dim,
            map: HashMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn get(&self, substring: &str) -> Option<&[f64]> {
        self.map.get(substring).map(Vec::as_slice)
    }

    pub fn insert(&mut self, substring: String, vector: Vec<f64>) -> Result<()> {
        if substring.is_empty() {
            return Err(Error::Config("empty substring key".into()));
        }
        if vector.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: vector.len(),
                context: format!("substring {substring:?}"),
            });
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config(format!("non-finite vector for {substring:?}")));
        }
        self.map.insert(substring, vector);
        Ok(())
    }

    /// `substring TAB v1 v2 ... vd` per line, keys sorted.
    pub fn write<W: Write>(&self, mut writer: W) -> Result<()> {
        let mut keys: Vec<&String> = self.map.keys().collect();
        keys.sort();
        for key in keys {
            let vals: Vec<String> = self.map[key].iter().map(|v| sig6(*v)).collect();
            writeln!(writer, "{key}\t{}", vals.join(" "))?;
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
        let mut table: Option<SubstringTable> = None;
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let (key, rest) = line.split_once('\t').ok_or_else(|| Error::Parse {
                path: "<table>".into(),
                line: lineno + 1,
                msg: "expected `substring TAB values`".into(),
            })?;
            let mut vector = Vec::new();
            for f in rest.split_whitespace() {
                vector.push(parse_value(f).ok_or_else(|| Error::Parse {
                    path: "<table>".into(),
                    line: lineno + 1,
                    msg: format!("non-numeric value {f:?}"),
                })?);
            }
            let t = table.get_or_insert_with(|| SubstringTable::new(vector.len()));
            t.insert(key.to_string(), vector)?;
        }
        table.ok_or_else(|| Error::EmptySpace("<table>".into()))
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self> {
        Self::read(BufReader::new(File::open(path)?))
    }
}

/// A composed vector plus the fraction of the word's substrings the table
/// covered.
#[derive(Debug, Clone)]
pub struct Composed {
    pub vector: Vec<f64>,
    pub coverage: f64,
}

/// Mean of the table vectors over the word's covered substrings.
pub fn compose(table: &SubstringTable, word: &str, cfg: &BosConfig) -> Result<Composed> {
    let subs = substrings_of(word, cfg);
    let mut sum = vec![0.0; table.dim()];
    let mut hit = 0usize;
    for s in &subs {
        if let Some(v) = table.get(s) {
            for (acc, x) in sum.iter_mut().zip(v) {
                *acc += x;
            }
            hit += 1;
        }
    }
    if hit == 0 {
        return Err(Error::UncoveredWord(word.to_string()));
    }
    for acc in &mut sum {
        *acc /= hit as f64;
    }
    Ok(Composed {
        vector: sum,
        coverage: hit as f64 / subs.len() as f64,
    })
}

/// Trained table plus the mean loss measured after each epoch.
#[derive(Debug)]
pub struct TrainOutcome {
    pub table: SubstringTable,
    pub epoch_loss: Vec<f64>,
}

/// Fit the table to reconstruct `targets` by plain SGD.
///
/// All substring vectors start at zero. Each epoch visits the words in a
/// seeded shuffle; the per-word loss is `0.5 ||compose(w) - u_w||^2` and its
/// gradient, `(compose(w) - u_w) / |S_w|`, is applied to every substring of
/// the word. Words whose marked form is shorter than `min_n` have no
/// substrings and are skipped. Deterministic for a fixed seed.
pub fn train(targets: &EmbeddingSpace, cfg: &BosConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if targets.is_empty() {
        return Err(Error::EmptySpace("no training targets".into()));
    }
    let dim = targets.dim();
    let words: Vec<(&str, Vec<String>)> = targets
        .vocab()
        .iter()
        .map(|w| {
            let subs: Vec<String> = substrings_of(w, cfg).into_iter().collect();
            (w.as_str(), subs)
        })
        .collect();

    let mut table = SubstringTable::new(dim);
    for (_, subs) in &words {
        for s in subs {
            if table.get(s).is_none() {
                table.map.insert(s.clone(), vec![0.0; dim]);
            }
        }
    }

    let trainable: Vec<usize> = (0..words.len())
        .filter(|&i| !words[i].1.is_empty())
        .collect();
    if trainable.len() < words.len() {
        log::warn!(
            "{} of {} words have no substrings in range {}..={} and are skipped",
            words.len() - trainable.len(),
            words.len(),
            cfg.min_n,
            cfg.max_n
        );
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order = trainable.clone();
    let mut epoch_loss = Vec::with_capacity(cfg.epochs);
    let mut residual = vec![0.0; dim];
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for &wi in &order {
            let (word, subs) = &words[wi];
            let target = targets.lookup(word).expect("vocab word");
            let k = subs.len() as f64;
            residual.iter_mut().for_each(|r| *r = 0.0);
            for s in subs {
                let v = table.map.get(s.as_str()).expect("initialized substring");
                for (r, x) in residual.iter_mut().zip(v) {
                    *r += x;
                }
            }
            for (i, r) in residual.iter_mut().enumerate() {
                *r = *r / k - target[i];
            }
            let step = cfg.learning_rate / k;
            for s in subs {
                let v = table.map.get_mut(s.as_str()).expect("initialized substring");
                for (x, r) in v.iter_mut().zip(&residual) {
                    *x -= step * r;
                }
            }
        }
        epoch_loss.push(mean_loss(&table, targets, cfg));
    }
    Ok(TrainOutcome { table, epoch_loss })
}

/// Mean over words of `0.5 ||compose(w) - u_w||^2`; uncovered words are
/// skipped, matching their treatment during training.
pub fn mean_loss(table: &SubstringTable, targets: &EmbeddingSpace, cfg: &BosConfig) -> f64 {
    let mut total = 0.0;
    let mut n = 0usize;
    for (word, target) in targets.iter() {
        let Ok(c) = compose(table, word, cfg) else {
            continue;
        };
        let sq: f64 = c
            .vector
            .iter()
            .zip(target)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        total += 0.5 * sq;
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        total / n as f64
    }
}

/// Per-query composition results: the induced space, per-query coverage, and
/// the queries that no table entry covers.
#[derive(Debug)]
pub struct BosInduction {
    pub space: EmbeddingSpace,
    pub coverage: Vec<(String, f64)>,
    pub failures: Vec<(String, Error)>,
}

/// Compose a vector for every query from the trained table.
pub fn induce(
    table: &SubstringTable,
    queries: &[PhraseQuery],
    cfg: &BosConfig,
) -> Result<BosInduction> {
    let mut rows = Vec::new();
    let mut coverage = Vec::new();
    let mut failures = Vec::new();
    for q in queries {
        let phrase = q.phrase();
        match compose(table, &phrase, cfg) {
            Ok(c) => {
                coverage.push((phrase.clone(), c.coverage));
                rows.push((phrase, c.vector));
            }
            Err(e) => failures.push((phrase, e)),
        }
    }
    if rows.is_empty() {
        return Err(Error::UncoveredWord("every query failed composition".into()));
    }
    Ok(BosInduction {
        space: EmbeddingSpace::from_rows(rows)?,
        coverage,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(min_n: usize, max_n: usize) -> BosConfig {
        BosConfig {
            min_n,
            max_n,
            ..BosConfig::default()
        }
    }

    #[test]
    fn substrings_hand_enumeration() {
        // "<hap>" has 3-grams <ha hap ap> and 4-grams <hap hap>.
        let subs = substrings_of("hap", &cfg(3, 4));
        let want: BTreeSet<String> = ["<ha", "hap", "ap>", "<hap", "hap>"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        assert_eq!(subs, want);
    }

    #[test]
    fn single_window_at_full_length() {
        let subs = substrings_of("hap", &cfg(5, 5));
        assert_eq!(subs.len(), 1);
        assert!(subs.contains("<hap>"));
    }

    #[test]
    fn phrases_use_the_joiner() {
        let subs = substrings_of("so sad", &cfg(3, 3));
        assert!(subs.contains("so_"));
        assert!(subs.contains("o_s"));
        assert!(subs.contains("_sa"));
        assert!(!subs.iter().any(|s| s.contains(' ')));
    }

    #[test]
    fn too_short_words_have_no_substrings() {
        assert!(substrings_of("a", &cfg(4, 6)).is_empty());
    }

    #[test]
    fn compose_single_substring() {
        let mut t = SubstringTable::new(2);
        t.insert("<hap>".into(), vec![2.0, 4.0]).unwrap();
        let c = compose(&t, "hap", &cfg(5, 5)).unwrap();
        assert_eq!(c.vector, vec![2.0, 4.0]);
        assert_eq!(c.coverage, 1.0);
    }

    #[test]
    fn compose_averages_and_reports_partial_coverage() {
        let mut t = SubstringTable::new(2);
        t.insert("<ha".into(), vec![0.0, 2.0]).unwrap();
        t.insert("ap>".into(), vec![2.0, 0.0]).unwrap();
        // "hap" at 3..3 has substrings {<ha, hap, ap>}; two are covered.
        let c = compose(&t, "hap", &cfg(3, 3)).unwrap();
        assert_eq!(c.vector, vec![1.0, 1.0]);
        assert!((c.coverage - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn compose_uncovered_word_fails() {
        let mut t = SubstringTable::new(2);
        t.insert("xyz".into(), vec![1.0, 1.0]).unwrap();
        assert!(matches!(
            compose(&t, "happy", &cfg(3, 3)),
            Err(Error::UncoveredWord(_))
        ));
    }

    #[test]
    fn one_substring_word_converges_in_one_step_at_lr_one() {
        // |S_w| = 1, zero init, lr = 1: v <- v - (v - u) = u after one update.
        let targets =
            EmbeddingSpace::from_rows(vec![("hap".into(), vec![1.0, 0.0])]).unwrap();
        let mut c = cfg(5, 5);
        c.learning_rate = 1.0;
        c.epochs = 1;
        let out = train(&targets, &c).unwrap();
        assert_eq!(out.table.get("<hap>").unwrap(), &[1.0, 0.0]);
        assert_eq!(out.epoch_loss, vec![0.0]);
    }

    #[test]
    fn zero_epochs_is_invalid() {
        let targets = EmbeddingSpace::from_rows(vec![("hap".into(), vec![1.0])]).unwrap();
        let mut c = cfg(3, 3);
        c.epochs = 0;
        assert!(train(&targets, &c).is_err());
    }

    #[test]
    fn words_without_substrings_leave_the_table_empty() {
        let targets = EmbeddingSpace::from_rows(vec![("a".into(), vec![1.0])]).unwrap();
        let mut c = cfg(4, 6);
        c.epochs = 1;
        let out = train(&targets, &c).unwrap();
        assert!(out.table.is_empty());
    }

    #[test]
    fn training_is_deterministic_for_a_fixed_seed() {
        let targets = EmbeddingSpace::from_rows(vec![
            ("happy".into(), vec![1.0, -0.5]),
            ("sad".into(), vec![-1.0, 0.25]),
            ("angry".into(), vec![0.5, 0.5]),
        ])
        .unwrap();
        let c = cfg(3, 4);
        let a = train(&targets, &c).unwrap();
        let b = train(&targets, &c).unwrap();
        let mut buf_a = Vec::new();
        let mut buf_b = Vec::new();
        a.table.write(&mut buf_a).unwrap();
        b.table.write(&mut buf_b).unwrap();
        assert_eq!(buf_a, buf_b);
        assert_eq!(a.epoch_loss, b.epoch_loss);
    }

    #[test]
    fn loss_is_non_increasing_at_small_learning_rate() {
        let mut rows = Vec::new();
        for i in 0..20 {
            rows.push((
                format!("word{i}x"),
                vec![(i as f64 * 0.37).sin(), (i as f64 * 0.61).cos()],
            ));
        }
        let targets = EmbeddingSpace::from_rows(rows).unwrap();
        let mut c = cfg(3, 4);
        c.learning_rate = 0.01;
        c.epochs = 8;
        let out = train(&targets, &c).unwrap();
        for pair in out.epoch_loss.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-12, "loss rose: {:?}", out.epoch_loss);
        }
    }

    #[test]
    fn prefixes_and_suffixes_are_distinct() {
        let targets = EmbeddingSpace::from_rows(vec![
            ("unhappy".into(), vec![1.0, 0.0]),
            ("happy".into(), vec![0.0, 1.0]),
        ])
        .unwrap();
        let c = cfg(3, 4);
        let out = train(&targets, &c).unwrap();
        assert!(out.table.get("<un").is_some());
        let forward = compose(&out.table, "unhappy", &c).unwrap().vector;
        let reversed = compose(&out.table, "happyun", &c).unwrap().vector;
        let dist: f64 = forward
            .iter()
            .zip(&reversed)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        assert!(dist > 1e-9);
    }

    #[test]
    fn compose_is_scale_equivariant() {
        let mut t = SubstringTable::new(2);
        t.insert("<ha".into(), vec![1.0, 3.0]).unwrap();
        t.insert("hap".into(), vec![-2.0, 0.5]).unwrap();
        let base = compose(&t, "hap", &cfg(3, 3)).unwrap().vector;
        let mut scaled = SubstringTable::new(2);
        scaled.insert("<ha".into(), vec![3.0, 9.0]).unwrap();
        scaled.insert("hap".into(), vec![-6.0, 1.5]).unwrap();
        let tripled = compose(&scaled, "hap", &cfg(3, 3)).unwrap().vector;
        for (a, b) in base.iter().zip(&tripled) {
            assert!((3.0 * a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn induce_reports_failures_and_coverage() {
        let targets = EmbeddingSpace::from_rows(vec![
            ("very".into(), vec![1.0, 0.0]),
            ("happy".into(), vec![0.0, 1.0]),
        ])
        .unwrap();
        let c = cfg(3, 4);
        let out = train(&targets, &c).unwrap();
        let queries = vec![
            PhraseQuery::from_phrase("verrry", None, None).unwrap(),
            PhraseQuery::from_phrase("qqqqq", None, None).unwrap(),
        ];
        let ind = induce(&out.table, &queries, &c).unwrap();
        // The misspelling shares n-grams with "very": nonzero vector,
        // partial coverage.
        let v = ind.space.lookup("verrry").unwrap();
        assert!(v.iter().any(|x| x.abs() > 0.0));
        let (_, cov) = ind.coverage.iter().find(|(q, _)| q == "verrry").unwrap();
        assert!(*cov < 1.0);
        assert_eq!(ind.failures.len(), 1);
        assert_eq!(ind.failures[0].0, "qqqqq");
    }

    #[test]
    fn table_file_round_trip() {
        let mut t = SubstringTable::new(2);
        t.insert("<ha".into(), vec![0.5, -1.25]).unwrap();
        t.insert("ap>".into(), vec![2.0, 0.0]).unwrap();
        let mut buf = Vec::new();
        t.write(&mut buf).unwrap();
        let back = SubstringTable::read(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back.get("<ha").unwrap(), t.get("<ha").unwrap());
    }
}
