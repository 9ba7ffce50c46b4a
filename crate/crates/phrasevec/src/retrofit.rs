//! Synonymy lexicon construction and retrofitting.
//!
//! Retrofitting pulls each vector toward its lexicon neighbors while an
//! anchor term holds it near its original position. The objective is
//!
//! ```text
//! psi = sum_i alpha_i ||v_i - w_i||^2  +  sum_{(i,j) in E} beta_ij ||w_i - w_j||^2
//! ```
//!
//! over inferred vectors `w`, with one term per undirected edge. Sweeping the
//! closed-form update `w_i <- (alpha_i v_i + sum_j beta_ij w_j) / (alpha_i +
//! sum_j beta_ij)` is exact coordinate descent on `psi`, so the objective
//! never increases across in-place sweeps.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::corpus::{Emotion, ModifierClass, ModifierInventory};
use crate::embedding::{escape_token, unescape_token, EmbeddingSpace};
use crate::{Error, Result};

/// One synonym group of adjectives expressing the same emotion.
#[derive(Debug, Clone)]
pub struct SynonymSet {
    pub emotion: Emotion,
    pub adjectives: Vec<String>,
}

/// Extra edges for negated phrases.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NegationRule {
    /// `"not X" ~ "<prefix>X"` when the prefixed form is known.
    Prefix(String),
    /// `"not X" ~ "not X at all"`.
    PostposedAtAll,
}

impl NegationRule {
    pub fn defaults() -> Vec<NegationRule> {
        vec![
            NegationRule::Prefix("un".into()),
            NegationRule::PostposedAtAll,
        ]
    }
}

/// How per-edge weights are assigned when none are stored.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeWeighting {
    /// `beta = (1/deg(i) + 1/deg(j)) / 2`: each node's neighborhood pulls
    /// with roughly unit total weight.
    DegreeNormalized,
    /// `beta = 1` on every edge.
    Uniform,
}

/// Undirected synonymy graph over phrase strings with per-node `alpha` and
/// per-edge `beta`.
#[derive(Debug, Clone, Default)]
pub struct SynonymyLexicon {
    nodes: Vec<String>,
    index: HashMap<String, usize>,
    adjacency: Vec<Vec<(usize, f64)>>,
    alpha: Vec<f64>,
}

impl SynonymyLexicon {
    pub fn new() -> Self {
        SynonymyLexicon::default()
    }

    pub fn add_node(&mut self, phrase: &str) -> usize {
        if let Some(&i) = self.index.get(phrase) {
            return i;
        }
        let i = self.nodes.len();
        self.nodes.push(phrase.to_string());
        self.index.insert(phrase.to_string(), i);
        self.adjacency.push(Vec::new());
        self.alpha.push(1.0);
        i
    }

    /// Insert an undirected edge; self-edges and duplicates are ignored.
    pub fn add_edge(&mut self, a: &str, b: &str, beta: f64) {
        if a == b {
            return;
        }
        let (i, j) = (self.add_node(a), self.add_node(b));
        if self.adjacency[i].iter().any(|(n, _)| *n == j) {
            return;
        }
        self.adjacency[i].push((j, beta));
        self.adjacency[j].push((i, beta));
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn contains(&self, phrase: &str) -> bool {
        self.index.contains_key(phrase)
    }

    pub fn degree(&self, phrase: &str) -> usize {
        self.index
            .get(phrase)
            .map_or(0, |&i| self.adjacency[i].len())
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn neighbors(&self, phrase: &str) -> Vec<(&str, f64)> {
        match self.index.get(phrase) {
            Some(&i) => self.adjacency[i]
                .iter()
                .map(|&(j, b)| (self.nodes[j].as_str(), b))
                .collect(),
            None => Vec::new(),
        }
    }

    pub fn alpha_of(&self, phrase: &str) -> f64 {
        self.index.get(phrase).map_or(1.0, |&i| self.alpha[i])
    }

    /// Set every node's anchor weight and recompute edge weights.
    pub fn set_weights(&mut self, alpha: f64, weighting: EdgeWeighting) {
        for a in &mut self.alpha {
            *a = alpha;
        }
        let degrees: Vec<usize> = self.adjacency.iter().map(Vec::len).collect();
        for i in 0..self.adjacency.len() {
            for k in 0..self.adjacency[i].len() {
                let j = self.adjacency[i][k].0;
                let beta = match weighting {
                    EdgeWeighting::Uniform => 1.0,
                    EdgeWeighting::DegreeNormalized => {
                        0.5 * (1.0 / degrees[i] as f64 + 1.0 / degrees[j] as f64)
                    }
                };
                self.adjacency[i][k].1 = beta;
            }
        }
    }

    /// `head TAB neighbor TAB ...` per line, phrases written with `_` for
    /// internal spaces. Each edge appears under both endpoints.
    pub fn write<W: Write>(&self, mut writer: W) -> Result<()> {
        let mut order: Vec<usize> = (0..self.nodes.len()).collect();
        order.sort_by(|&a, &b| self.nodes[a].cmp(&self.nodes[b]));
        for i in order {
            let mut line = escape_token(&self.nodes[i]);
            let mut neigh: Vec<&str> = self.adjacency[i]
                .iter()
                .map(|&(j, _)| self.nodes[j].as_str())
                .collect();
            neigh.sort_unstable();
            for n in neigh {
                line.push('\t');
                line.push_str(&escape_token(n));
            }
            writeln!(writer, "{line}")?;
        }
        Ok(())
    }

    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    /// Read the file format; weights are assigned afterwards via
    /// [`SynonymyLexicon::set_weights`] (the file stores structure only).
    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut lex = SynonymyLexicon::new();
        for line in reader.lines() {
            let line = line?;
            let line = line.trim_end_matches(['\r', '\n']);
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split('\t');
            let head = unescape_token(fields.next().expect("non-empty line"));
            lex.add_node(&head);
            for n in fields {
                if n.is_empty() {
                    continue;
                }
                lex.add_edge(&head, &unescape_token(n), 1.0);
            }
        }
        Ok(lex)
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self> {
        Self::read(BufReader::new(File::open(path)?))
    }
}

/// Build the synonymy lexicon from modifier classes and adjective synonym
/// sets.
///
/// Within one synonym set, bare adjectives are pairwise connected, and two
/// modified phrases are connected whenever their head modifiers share a
/// class (same modifier included) and their adjectives share the set.
/// Negation rules additionally connect `"not X"` to prefixed forms such as
/// `"unX"` (when `known_forms` is given, only forms it contains) and to
/// `"not X at all"`. Weights default to `alpha = 1` with degree-normalized
/// edges; adjust with [`SynonymyLexicon::set_weights`].
pub fn build_lexicon(
    inventory: &ModifierInventory,
    synonym_sets: &[SynonymSet],
    negation_rules: &[NegationRule],
    known_forms: Option<&HashSet<String>>,
) -> Result<SynonymyLexicon> {
    let mut seen = HashSet::new();
    for set in synonym_sets {
        for adj in &set.adjectives {
            if !seen.insert(adj.clone()) {
                return Err(Error::Config(format!(
                    "adjective {adj:?} appears in more than one synonym set"
                )));
            }
        }
    }
    if !negation_rules.is_empty() && inventory.class_of("not") != Some(ModifierClass::Negation) {
        return Err(Error::ModifierNotInInventory("not".into()));
    }

    let mut by_class: BTreeMap<ModifierClass, Vec<&str>> = BTreeMap::new();
    for (surface, class) in inventory.iter() {
        by_class.entry(class).or_default().push(surface);
    }

    let mut lex = SynonymyLexicon::new();
    for set in synonym_sets {
        let adjs = &set.adjectives;
        for (i, x) in adjs.iter().enumerate() {
            for y in &adjs[i + 1..] {
                lex.add_edge(x, y, 1.0);
            }
        }
        for mods in by_class.values() {
            let phrases: Vec<String> = mods
                .iter()
                .flat_map(|m| adjs.iter().map(move |a| format!("{m} {a}")))
                .collect();
            for (i, p) in phrases.iter().enumerate() {
                for q in &phrases[i + 1..] {
                    lex.add_edge(p, q, 1.0);
                }
            }
        }
    }

    if !negation_rules.is_empty() {
        for set in synonym_sets {
            for adj in &set.adjectives {
                let negated = format!("not {adj}");
                for rule in negation_rules {
                    match rule {
                        NegationRule::Prefix(prefix) => {
                            let form = format!("{prefix}{adj}");
                            if known_forms.map_or(true, |k| k.contains(&form)) {
                                lex.add_edge(&negated, &form, 1.0);
                            }
                        }
                        NegationRule::PostposedAtAll => {
                            lex.add_edge(&negated, &format!("not {adj} at all"), 1.0);
                        }
                    }
                }
            }
        }
    }

    lex.set_weights(1.0, EdgeWeighting::DegreeNormalized);
    Ok(lex)
}

/// Update scheduling for [`retrofit_space`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RetrofitMode {
    /// Gauss-Seidel sweeps in sorted node order; objective monotone.
    InPlace,
    /// Jacobi: every node updates from the previous sweep's vectors.
    Simultaneous,
}

/// Retrofit result: the adjusted space plus convergence diagnostics.
#[derive(Debug)]
pub struct RetrofitOutcome {
    pub space: EmbeddingSpace,
    /// Objective value after each sweep.
    pub psi_trace: Vec<f64>,
    /// Largest per-node update norm in the final sweep.
    pub final_max_update: f64,
    /// Lexicon nodes absent from the space, skipped together with their edges.
    pub skipped_nodes: Vec<String>,
}

/// Iterate the retrofitting update over every lexicon node present in the
/// space. Nodes without (usable) edges and all non-lexicon vocabulary come
/// back bit-identical.
pub fn retrofit_space(
    space: &EmbeddingSpace,
    lexicon: &SynonymyLexicon,
    iterations: usize,
    mode: RetrofitMode,
) -> Result<RetrofitOutcome> {
    let dim = space.dim();
    let mut skipped_nodes: Vec<String> = lexicon
        .nodes()
        .iter()
        .filter(|n| !space.contains(n))
        .cloned()
        .collect();
    skipped_nodes.sort_unstable();
    if !skipped_nodes.is_empty() {
        log::warn!(
            "{} lexicon nodes are not in the space and will be skipped",
            skipped_nodes.len()
        );
    }

    // Active nodes in deterministic sweep order.
    let mut active: Vec<&str> = lexicon
        .nodes()
        .iter()
        .map(String::as_str)
        .filter(|n| space.contains(n))
        .collect();
    active.sort_unstable();

    struct Node {
        original: Vec<f64>,
        alpha: f64,
        edges: Vec<(usize, f64)>, // indices into `active`
    }
    let pos: HashMap<&str, usize> = active.iter().enumerate().map(|(i, n)| (*n, i)).collect();
    let mut nodes: Vec<Node> = Vec::with_capacity(active.len());
    for name in &active {
        let edges: Vec<(usize, f64)> = lexicon
            .neighbors(name)
            .into_iter()
            .filter_map(|(n, b)| pos.get(n).map(|&j| (j, b)))
            .collect();
        let alpha = lexicon.alpha_of(name);
        if !edges.is_empty() {
            let total: f64 = alpha + edges.iter().map(|(_, b)| b).sum::<f64>();
            if total <= 0.0 {
                return Err(Error::IllPosedNode(name.to_string()));
            }
        }
        nodes.push(Node {
            original: space.lookup(name).expect("active node").to_vec(),
            alpha,
            edges,
        });
    }

    let mut current: Vec<Vec<f64>> = nodes.iter().map(|n| n.original.clone()).collect();
    let psi = |vectors: &[Vec<f64>]| -> f64 {
        let mut total = 0.0;
        for (i, node) in nodes.iter().enumerate() {
            total += node.alpha * sq_dist(&node.original, &vectors[i]);
            for &(j, beta) in &node.edges {
                if j > i {
                    total += beta * sq_dist(&vectors[i], &vectors[j]);
                }
            }
        }
        total
    };

    let mut psi_trace = Vec::with_capacity(iterations);
    let mut final_max_update = 0.0;
    for _ in 0..iterations {
        let snapshot = match mode {
            RetrofitMode::Simultaneous => Some(current.clone()),
            RetrofitMode::InPlace => None,
        };
        let mut max_update = 0.0f64;
        for i in 0..nodes.len() {
            let node = &nodes[i];
            if node.edges.is_empty() {
                continue;
            }
            let mut numer: Vec<f64> = node.original.iter().map(|v| node.alpha * v).collect();
            let mut denom = node.alpha;
            for &(j, beta) in &node.edges {
                let neighbor = match &snapshot {
                    Some(s) => &s[j],
                    None => &current[j],
                };
                for (acc, v) in numer.iter_mut().zip(neighbor) {
                    *acc += beta * v;
                }
                denom += beta;
            }
            let mut update_sq = 0.0;
            for k in 0..dim {
                let new = numer[k] / denom;
                let delta = new - current[i][k];
                update_sq += delta * delta;
                current[i][k] = new;
            }
            max_update = max_update.max(update_sq.sqrt());
        }
        psi_trace.push(psi(&current));
        final_max_update = max_update;
    }

    let rows: Vec<(String, Vec<f64>)> = space
        .iter()
        .map(|(token, row)| {
            let vector = match pos.get(token) {
                Some(&i) if !nodes[i].edges.is_empty() => current[i].clone(),
                _ => row.to_vec(),
            };
            (token.to_string(), vector)
        })
        .collect();
    Ok(RetrofitOutcome {
        space: EmbeddingSpace::from_rows(rows)?,
        psi_trace,
        final_max_update,
        skipped_nodes,
    })
}

/// Largest residual norm of the stationarity equations
/// `(alpha_i + sum beta) w_i - sum beta w_j - alpha_i v_i = 0`
/// over edged lexicon nodes; near zero at a converged fixed point.
pub fn stationarity_residual(
    original: &EmbeddingSpace,
    retrofitted: &EmbeddingSpace,
    lexicon: &SynonymyLexicon,
) -> f64 {
    let mut worst = 0.0f64;
    for name in lexicon.nodes() {
        let (Some(v), Some(w)) = (original.lookup(name), retrofitted.lookup(name)) else {
            continue;
        };
        let edges: Vec<(&str, f64)> = lexicon
            .neighbors(name)
            .into_iter()
            .filter(|(n, _)| retrofitted.contains(n))
            .collect();
        if edges.is_empty() {
            continue;
        }
        let alpha = lexicon.alpha_of(name);
        let beta_sum: f64 = edges.iter().map(|(_, b)| b).sum();
        let mut residual_sq = 0.0;
        for k in 0..original.dim() {
            let mut r = (alpha + beta_sum) * w[k] - alpha * v[k];
            for (n, b) in &edges {
                r -= b * retrofitted.lookup(n).expect("present neighbor")[k];
            }
            residual_sq += r * r;
        }
        worst = worst.max(residual_sq.sqrt());
    }
    worst
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::cosine;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn inventory() -> ModifierInventory {
        ModifierInventory::new(vec![
            ("completely".into(), ModifierClass::Maximizer),
            ("totally".into(), ModifierClass::Maximizer),
            ("slightly".into(), ModifierClass::Diminisher),
            ("not".into(), ModifierClass::Negation),
        ])
        .unwrap()
    }

    fn joy_set() -> SynonymSet {
        SynonymSet {
            emotion: Emotion::Joy,
            adjectives: vec!["cheerful".into(), "happy".into()],
        }
    }

    #[test]
    fn same_class_phrases_share_edges() {
        let lex = build_lexicon(&inventory(), &[joy_set()], &[], None).unwrap();
        let neigh: Vec<&str> = lex
            .neighbors("completely cheerful")
            .into_iter()
            .map(|(n, _)| n)
            .collect();
        for expected in ["totally cheerful", "totally happy", "completely happy"] {
            assert!(neigh.contains(&expected), "missing {expected}");
        }
        // Different class: never connected.
        assert!(!neigh.contains(&"slightly cheerful"));
        assert!(!neigh.contains(&"slightly happy"));
    }

    #[test]
    fn negation_rules_connect_prefixed_and_postposed_forms() {
        let lex = build_lexicon(
            &inventory(),
            &[joy_set()],
            &NegationRule::defaults(),
            None,
        )
        .unwrap();
        let neigh: Vec<&str> = lex
            .neighbors("not happy")
            .into_iter()
            .map(|(n, _)| n)
            .collect();
        assert!(neigh.contains(&"unhappy"));
        assert!(neigh.contains(&"not happy at all"));
    }

    #[test]
    fn unknown_prefixed_forms_are_left_out() {
        let known: HashSet<String> = ["unhappy".to_string()].into_iter().collect();
        let lex = build_lexicon(
            &inventory(),
            &[joy_set()],
            &NegationRule::defaults(),
            Some(&known),
        )
        .unwrap();
        assert!(lex.contains("unhappy"));
        assert!(!lex.contains("uncheerful"));
    }

    #[test]
    fn empty_synonym_sets_give_empty_edge_set() {
        let lex = build_lexicon(&inventory(), &[], &[], None).unwrap();
        assert_eq!(lex.edge_count(), 0);
    }

    #[test]
    fn negation_rules_require_not_in_inventory() {
        let inv = ModifierInventory::new(vec![("so".into(), ModifierClass::Booster)]).unwrap();
        let r = build_lexicon(&inv, &[joy_set()], &NegationRule::defaults(), None);
        assert!(matches!(r, Err(Error::ModifierNotInInventory(_))));
    }

    #[test]
    fn bare_adjectives_are_pairwise_connected() {
        let lex = build_lexicon(&inventory(), &[joy_set()], &[], None).unwrap();
        assert!(lex
            .neighbors("cheerful")
            .iter()
            .any(|(n, _)| *n == "happy"));
    }

    fn two_node_lexicon() -> SynonymyLexicon {
        let mut lex = SynonymyLexicon::new();
        lex.add_edge("a", "b", 1.0);
        lex
    }

    #[test]
    fn two_node_chain_reaches_hand_solved_fixed_point() {
        // alpha = beta = 1, originals 1 and 4: fixed point (2, 3).
        let space = EmbeddingSpace::from_rows(vec![
            ("a".into(), vec![1.0]),
            ("b".into(), vec![4.0]),
        ])
        .unwrap();
        let out = retrofit_space(&space, &two_node_lexicon(), 100, RetrofitMode::InPlace).unwrap();
        assert!((out.space.lookup("a").unwrap()[0] - 2.0).abs() <= 1e-8);
        assert!((out.space.lookup("b").unwrap()[0] - 3.0).abs() <= 1e-8);
        let res = stationarity_residual(&space, &out.space, &two_node_lexicon());
        assert!(res <= 1e-8, "stationarity residual {res}");
    }

    #[test]
    fn edge_free_nodes_are_bit_identical() {
        let mut lex = two_node_lexicon();
        lex.add_node("loner");
        let space = EmbeddingSpace::from_rows(vec![
            ("a".into(), vec![1.0]),
            ("b".into(), vec![4.0]),
            ("loner".into(), vec![0.123456789]),
            ("outside".into(), vec![0.987654321]),
        ])
        .unwrap();
        let out = retrofit_space(&space, &lex, 10, RetrofitMode::InPlace).unwrap();
        assert_eq!(out.space.lookup("loner").unwrap()[0], 0.123456789);
        assert_eq!(out.space.lookup("outside").unwrap()[0], 0.987654321);
    }

    #[test]
    fn huge_alpha_pins_vectors_to_originals() {
        let mut lex = two_node_lexicon();
        lex.set_weights(1e9, EdgeWeighting::Uniform);
        let space = EmbeddingSpace::from_rows(vec![
            ("a".into(), vec![1.0]),
            ("b".into(), vec![4.0]),
        ])
        .unwrap();
        let out = retrofit_space(&space, &lex, 50, RetrofitMode::InPlace).unwrap();
        assert!((out.space.lookup("a").unwrap()[0] - 1.0).abs() < 1e-6);
        assert!((out.space.lookup("b").unwrap()[0] - 4.0).abs() < 1e-6);
    }

    fn random_graph_fixture(n: usize, dim: usize, seed: u64) -> (EmbeddingSpace, SynonymyLexicon) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<(String, Vec<f64>)> = (0..n)
            .map(|i| {
                let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
                (format!("n{i:02}"), v)
            })
            .collect();
        let mut lex = SynonymyLexicon::new();
        for i in 0..n {
            // A ring plus random chords keeps the graph connected.
            lex.add_edge(&format!("n{i:02}"), &format!("n{:02}", (i + 1) % n), 1.0);
            let j = rng.gen_range(0..n);
            if j != i {
                lex.add_edge(&format!("n{i:02}"), &format!("n{j:02}"), 1.0);
            }
        }
        lex.set_weights(1.0, EdgeWeighting::DegreeNormalized);
        (EmbeddingSpace::from_rows(rows).unwrap(), lex)
    }

    #[test]
    fn objective_never_increases_across_sweeps() {
        let (space, lex) = random_graph_fixture(50, 4, 7);
        let out = retrofit_space(&space, &lex, 20, RetrofitMode::InPlace).unwrap();
        for pair in out.psi_trace.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-12, "psi rose: {:?}", out.psi_trace);
        }
    }

    #[test]
    fn connected_pairs_gain_cosine_similarity() {
        let (space, lex) = random_graph_fixture(30, 6, 11);
        let out = retrofit_space(&space, &lex, 10, RetrofitMode::InPlace).unwrap();
        for name in lex.nodes() {
            for (other, _) in lex.neighbors(name) {
                let before = cosine(space.lookup(name).unwrap(), space.lookup(other).unwrap());
                let after = cosine(
                    out.space.lookup(name).unwrap(),
                    out.space.lookup(other).unwrap(),
                );
                let (Some(before), Some(after)) = (before, after) else {
                    continue;
                };
                if (1.0 - before).abs() < 1e-12 {
                    continue;
                }
                assert!(
                    after > before,
                    "{name} ~ {other}: cosine {before} -> {after}"
                );
            }
        }
    }

    #[test]
    fn missing_nodes_are_skipped_and_reported() {
        let mut lex = two_node_lexicon();
        lex.add_edge("a", "ghost", 1.0);
        let space = EmbeddingSpace::from_rows(vec![
            ("a".into(), vec![1.0]),
            ("b".into(), vec![4.0]),
        ])
        .unwrap();
        let out = retrofit_space(&space, &lex, 10, RetrofitMode::InPlace).unwrap();
        assert_eq!(out.skipped_nodes, vec!["ghost".to_string()]);
    }

    #[test]
    fn lexicon_file_round_trip() {
        let lex = build_lexicon(
            &inventory(),
            &[joy_set()],
            &NegationRule::defaults(),
            None,
        )
        .unwrap();
        let mut buf = Vec::new();
        lex.write(&mut buf).unwrap();
        let mut back = SynonymyLexicon::read(buf.as_slice()).unwrap();
        back.set_weights(1.0, EdgeWeighting::DegreeNormalized);
        assert_eq!(back.len(), lex.len());
        assert_eq!(back.edge_count(), lex.edge_count());
        assert_eq!(
            back.degree("completely cheerful"),
            lex.degree("completely cheerful")
        );
    }
}
