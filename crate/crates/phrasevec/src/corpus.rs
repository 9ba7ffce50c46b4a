//! Tweet-style corpus filtering, focus-phrase matching, context extraction,
//! and modifier/emotion frequency statistics.
//!
//! A corpus is plain UTF-8 text, one tweet per line. [`filter_tweet`] decides
//! keep/reject and rewrites entities to the generic tokens `<hashtag>`,
//! `<url>`, `<user>`; the kept output is the space-joined token stream that
//! every downstream consumer reads.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use crate::{Error, Result};

pub const URL_TOKEN: &str = "<url>";
pub const HASHTAG_TOKEN: &str = "<hashtag>";
pub const USER_TOKEN: &str = "<user>";

/// The six basic emotions the adjective lexicon is organized around.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Emotion {
    Joy,
    Sadness,
    Anger,
    Fear,
    Surprise,
    Disgust,
}

impl Emotion {
    pub const ALL: [Emotion; 6] = [
        Emotion::Joy,
        Emotion::Sadness,
        Emotion::Anger,
        Emotion::Fear,
        Emotion::Surprise,
        Emotion::Disgust,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Emotion::Joy => "joy",
            Emotion::Sadness => "sadness",
            Emotion::Anger => "anger",
            Emotion::Fear => "fear",
            Emotion::Surprise => "surprise",
            Emotion::Disgust => "disgust",
        }
    }
}

impl fmt::Display for Emotion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Emotion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Emotion::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown emotion {s:?}")))
    }
}

/// Fine-grained degree-adverb classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ModifierClass {
    Maximizer,
    Booster,
    Approximator,
    Compromiser,
    Diminisher,
    Minimizer,
    Negation,
    FocusAdditive,
    FocusRestrictive,
}

/// Coarse grouping used for the corpus share statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CoarseClass {
    Amplifier,
    Downtoner,
    Negation,
    Focus,
}

impl ModifierClass {
    pub fn name(self) -> &'static str {
        match self {
            ModifierClass::Maximizer => "maximizer",
            ModifierClass::Booster => "booster",
            ModifierClass::Approximator => "approximator",
            ModifierClass::Compromiser => "compromiser",
            ModifierClass::Diminisher => "diminisher",
            ModifierClass::Minimizer => "minimizer",
            ModifierClass::Negation => "negation",
            ModifierClass::FocusAdditive => "focus-additive",
            ModifierClass::FocusRestrictive => "focus-restrictive",
        }
    }

    pub fn coarse(self) -> CoarseClass {
        match self {
            ModifierClass::Maximizer | ModifierClass::Booster => CoarseClass::Amplifier,
            ModifierClass::Approximator
            | ModifierClass::Compromiser
            | ModifierClass::Diminisher
            | ModifierClass::Minimizer => CoarseClass::Downtoner,
            ModifierClass::Negation => CoarseClass::Negation,
            ModifierClass::FocusAdditive | ModifierClass::FocusRestrictive => CoarseClass::Focus,
        }
    }

    const ALL: [ModifierClass; 9] = [
        ModifierClass::Maximizer,
        ModifierClass::Booster,
        ModifierClass::Approximator,
        ModifierClass::Compromiser,
        ModifierClass::Diminisher,
        ModifierClass::Minimizer,
        ModifierClass::Negation,
        ModifierClass::FocusAdditive,
        ModifierClass::FocusRestrictive,
    ];
}

impl fmt::Display for ModifierClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModifierClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModifierClass::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown modifier class {s:?}")))
    }
}

impl fmt::Display for CoarseClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CoarseClass::Amplifier => "amplifier",
            CoarseClass::Downtoner => "downtoner",
            CoarseClass::Negation => "negation",
            CoarseClass::Focus => "focus",
        })
    }
}

/// Degree-adverb surface forms with their class, e.g. `("kind of", Approximator)`.
///
/// Surface forms may span several tokens and must be unique.
#[derive(Debug, Clone, Default)]
pub struct ModifierInventory {
    entries: Vec<(String, ModifierClass)>,
    index: HashMap<String, ModifierClass>,
}

impl ModifierInventory {
    pub fn new(entries: Vec<(String, ModifierClass)>) -> Result<Self> {
        let mut inv = ModifierInventory::default();
        for (surface, class) in entries {
            inv.push(surface, class)?;
        }
        Ok(inv)
    }

    fn push(&mut self, surface: String, class: ModifierClass) -> Result<()> {
        if surface.trim().is_empty() {
            return Err(Error::Config("empty modifier surface form".into()));
        }
        if self.index.insert(surface.clone(), class).is_some() {
            return Err(Error::DuplicateToken(surface));
        }
        self.entries.push((surface, class));
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, ModifierClass)> {
        self.entries.iter().map(|(s, c)| (s.as_str(), *c))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn class_of(&self, surface: &str) -> Option<ModifierClass> {
        self.index.get(surface).copied()
    }

    /// Longest surface form matching a prefix of `tokens`, with its token length.
    pub fn match_prefix(&self, tokens: &[String]) -> Option<(usize, &str, ModifierClass)> {
        let mut best: Option<(usize, &str, ModifierClass)> = None;
        for (surface, class) in &self.entries {
            let parts: Vec<&str> = surface.split_whitespace().collect();
            if parts.len() > tokens.len() {
                continue;
            }
            if parts.iter().zip(tokens).all(|(p, t)| *p == t) {
                match best {
                    Some((len, _, _)) if len >= parts.len() => {}
                    _ => best = Some((parts.len(), surface.as_str(), *class)),
                }
            }
        }
        best
    }

    /// `surface TAB class` per line.
    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut inv = ModifierInventory::default();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (surface, class) = line.split_once('\t').ok_or_else(|| Error::Parse {
                path: "<modifiers>".into(),
                line: lineno + 1,
                msg: "expected `surface TAB class`".into(),
            })?;
            inv.push(surface.trim().to_string(), class.trim().parse()?)?;
        }
        Ok(inv)
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self> {
        Self::read(BufReader::new(File::open(path)?))
    }

    pub fn write<W: Write>(&self, mut writer: W) -> Result<()> {
        for (surface, class) in &self.entries {
            writeln!(writer, "{surface}\t{class}")?;
        }
        Ok(())
    }
}

/// `adjective TAB emotion` per line.
pub fn read_adjective_emotions<R: BufRead>(reader: R) -> Result<BTreeMap<String, Emotion>> {
    let mut map = BTreeMap::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (adj, emo) = line.split_once('\t').ok_or_else(|| Error::Parse {
            path: "<adjectives>".into(),
            line: lineno + 1,
            msg: "expected `adjective TAB emotion`".into(),
        })?;
        map.insert(adj.trim().to_string(), emo.trim().parse()?);
    }
    Ok(map)
}

pub fn load_adjective_emotions<P: AsRef<Path>>(path: P) -> Result<BTreeMap<String, Emotion>> {
    read_adjective_emotions(BufReader::new(File::open(path)?))
}

/// One focus phrase: a modifier sequence plus an emotion adjective.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhraseQuery {
    pub tokens: Vec<String>,
    pub adjective: String,
    /// Known when the query was built against an adjective->emotion map.
    pub emotion: Option<Emotion>,
    /// Class of the head (leftmost) modifier, when it is in the inventory.
    pub modifier_class: Option<ModifierClass>,
    /// Head modifier surface form, when recognized.
    pub head_modifier: Option<String>,
}

impl PhraseQuery {
    /// Parse one phrase. The adjective is the rightmost token found in
    /// `adjectives` when a map is given; otherwise the last token, except for
    /// post-posed negation (`... X at all`) where it is the token before `at`.
    pub fn from_phrase(
        phrase: &str,
        inventory: Option<&ModifierInventory>,
        adjectives: Option<&BTreeMap<String, Emotion>>,
    ) -> Result<Self> {
        let tokens: Vec<String> = phrase.split_whitespace().map(str::to_string).collect();
        if tokens.is_empty() {
            return Err(Error::Config("empty phrase query".into()));
        }
        let adj_idx = match adjectives {
            Some(map) => tokens.iter().rposition(|t| map.contains_key(t)),
            None => {
                let n = tokens.len();
                if n >= 3 && tokens[n - 2] == "at" && tokens[n - 1] == "all" {
                    Some(n - 3)
                } else {
                    Some(n - 1)
                }
            }
        };
        let adj_idx = adj_idx.ok_or_else(|| {
            Error::Config(format!("phrase {phrase:?} contains no known adjective"))
        })?;
        let adjective = tokens[adj_idx].clone();
        let emotion = adjectives.and_then(|m| m.get(&adjective).copied());
        let (head_modifier, modifier_class) = match inventory.and_then(|i| i.match_prefix(&tokens))
        {
            Some((_, surface, class)) => (Some(surface.to_string()), Some(class)),
            None => (None, None),
        };
        Ok(PhraseQuery {
            tokens,
            adjective,
            emotion,
            modifier_class,
            head_modifier,
        })
    }

    /// The space-joined surface form.
    pub fn phrase(&self) -> String {
        self.tokens.join(" ")
    }
}

/// One phrase per line; duplicates are an error.
pub fn read_queries<R: BufRead>(
    reader: R,
    inventory: Option<&ModifierInventory>,
    adjectives: Option<&BTreeMap<String, Emotion>>,
) -> Result<Vec<PhraseQuery>> {
    let mut queries = Vec::new();
    let mut seen = HashMap::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let phrase = line.trim();
        if phrase.is_empty() || phrase.starts_with('#') {
            continue;
        }
        let q = PhraseQuery::from_phrase(phrase, inventory, adjectives)?;
        if seen.insert(q.tokens.clone(), lineno).is_some() {
            return Err(Error::DuplicateToken(q.phrase()));
        }
        queries.push(q);
    }
    Ok(queries)
}

pub fn load_queries<P: AsRef<Path>>(
    path: P,
    inventory: Option<&ModifierInventory>,
    adjectives: Option<&BTreeMap<String, Emotion>>,
) -> Result<Vec<PhraseQuery>> {
    read_queries(BufReader::new(File::open(path)?), inventory, adjectives)
}

/// Corpus filter thresholds. Ratios are exclusive upper bounds.
#[derive(Debug, Clone, serde::Deserialize, serde::Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub max_chars: usize,
    pub min_tokens: usize,
    pub max_entity_ratio: f64,
    pub max_nonascii_ratio: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            max_chars: 140,
            min_tokens: 10,
            max_entity_ratio: 0.30,
            max_nonascii_ratio: 0.30,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_chars == 0 {
            return Err(Error::Config("max_chars must be positive".into()));
        }
        if self.min_tokens == 0 {
            return Err(Error::Config("min_tokens must be at least 1".into()));
        }
        for (name, r) in [
            ("max_entity_ratio", self.max_entity_ratio),
            ("max_nonascii_ratio", self.max_nonascii_ratio),
        ] {
            if !(r > 0.0 && r <= 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1]")));
            }
        }
        Ok(())
    }
}

/// Why a tweet was dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectReason {
    Retweet,
    TooLong,
    TooFewTokens,
    EntityRatio,
    NonAsciiRatio,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RejectReason::Retweet => "retweet",
            RejectReason::TooLong => "too_long",
            RejectReason::TooFewTokens => "too_few_tokens",
            RejectReason::EntityRatio => "entity_ratio",
            RejectReason::NonAsciiRatio => "nonascii_ratio",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FilterDecision {
    /// Tokens with entities rewritten to `<hashtag>`/`<url>`/`<user>`.
    Keep(Vec<String>),
    Reject(RejectReason),
}

/// Split into tokens: whitespace separated, trailing terminal punctuation
/// split into its own tokens, `#x` / `@x` kept whole, URLs collapsed to
/// [`URL_TOKEN`].
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for raw in text.split_whitespace() {
        let mut trailing: Vec<char> = Vec::new();
        let mut core = raw;
        while let Some(c) = core.chars().last() {
            if is_terminal_punct(c) && core.chars().count() > 1 {
                trailing.push(c);
                core = &core[..core.len() - c.len_utf8()];
            } else if is_terminal_punct(c) && core.chars().count() == 1 {
                trailing.push(c);
                core = "";
                break;
            } else {
                break;
            }
        }
        if is_url(core) {
            tokens.push(URL_TOKEN.to_string());
            // Trailing punctuation after a URL is usually part of it; drop it.
            continue;
        }
        if !core.is_empty() {
            tokens.push(core.to_string());
        }
        tokens.extend(trailing.into_iter().rev().map(String::from));
    }
    tokens
}

fn is_terminal_punct(c: char) -> bool {
    matches!(c, '.' | ',' | '!' | '?' | ';' | ':' | '"' | '\'')
}

fn is_url(token: &str) -> bool {
    token.starts_with("http://") || token.starts_with("https://") || token.starts_with("www.")
}

fn is_hashtag(token: &str) -> bool {
    token.len() > 1 && token.starts_with('#')
}

fn is_mention(token: &str) -> bool {
    token.len() > 1 && token.starts_with('@')
}

fn is_entity(token: &str) -> bool {
    token == URL_TOKEN || is_hashtag(token) || is_mention(token)
}

// A full quote is a tweet that is nothing but a quotation plus a link.
fn is_full_quote(text: &str) -> bool {
    let t = text.trim();
    let Some(rest) = t.strip_prefix('"') else {
        return false;
    };
    match rest.find('"') {
        Some(end) => {
            let tail = rest[end + 1..].trim();
            !tail.is_empty() && tail.split_whitespace().all(is_url)
        }
        None => false,
    }
}

/// Keep/reject one tweet. Total: malformed input is a reject, not an error.
///
/// Checks run in a fixed order: retweet/quote marker, length in characters,
/// token count, entity ratio, non-ASCII ratio.
pub fn filter_tweet(raw: &str, cfg: &FilterConfig) -> FilterDecision {
    let first = raw.split_whitespace().next();
    if first.is_some_and(|t| t.eq_ignore_ascii_case("rt")) || is_full_quote(raw) {
        return FilterDecision::Reject(RejectReason::Retweet);
    }
    let n_chars = raw.chars().count();
    if n_chars > cfg.max_chars {
        return FilterDecision::Reject(RejectReason::TooLong);
    }
    let tokens = tokenize(raw);
    if tokens.len() < cfg.min_tokens {
        return FilterDecision::Reject(RejectReason::TooFewTokens);
    }
    let n_entities = tokens.iter().filter(|t| is_entity(t)).count();
    if n_entities as f64 / tokens.len() as f64 > cfg.max_entity_ratio {
        return FilterDecision::Reject(RejectReason::EntityRatio);
    }
    let n_nonascii = raw.chars().filter(|c| !c.is_ascii()).count();
    if n_chars > 0 && n_nonascii as f64 / n_chars as f64 > cfg.max_nonascii_ratio {
        return FilterDecision::Reject(RejectReason::NonAsciiRatio);
    }
    let kept = tokens
        .into_iter()
        .map(|t| {
            if is_hashtag(&t) {
                HASHTAG_TOKEN.to_string()
            } else if is_mention(&t) {
                USER_TOKEN.to_string()
            } else {
                t
            }
        })
        .collect();
    FilterDecision::Keep(kept)
}

/// Left-to-right scan; at each position the longest matching query wins and
/// matches never overlap. Returns `(query index, start)` pairs.
pub fn match_queries(tokens: &[String], queries: &[PhraseQuery]) -> Vec<(usize, usize)> {
    let mut hits = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let mut best: Option<(usize, usize)> = None; // (len, query idx)
        for (qi, q) in queries.iter().enumerate() {
            let len = q.tokens.len();
            if len == 0 || i + len > tokens.len() {
                continue;
            }
            if q.tokens.iter().zip(&tokens[i..]).all(|(a, b)| a == b)
                && best.map_or(true, |(blen, _)| len > blen)
            {
                best = Some((len, qi));
            }
        }
        match best {
            Some((len, qi)) => {
                hits.push((qi, i));
                i += len;
            }
            None => i += 1,
        }
    }
    hits
}

/// Context windows per query, excluding the matched query tokens themselves.
#[derive(Debug, Clone)]
pub struct ContextBank {
    window_radius: usize,
    queries: Vec<String>,
    windows: Vec<Vec<Vec<String>>>,
    index: HashMap<String, usize>,
}

impl ContextBank {
    pub fn new(queries: impl IntoIterator<Item = String>, window_radius: usize) -> Self {
        let mut bank = ContextBank {
            window_radius,
            queries: Vec::new(),
            windows: Vec::new(),
            index: HashMap::new(),
        };
        for q in queries {
            bank.ensure_query(&q);
        }
        bank
    }

    pub fn window_radius(&self) -> usize {
        self.window_radius
    }

    fn ensure_query(&mut self, query: &str) -> usize {
        if let Some(&i) = self.index.get(query) {
            return i;
        }
        let i = self.queries.len();
        self.queries.push(query.to_string());
        self.windows.push(Vec::new());
        self.index.insert(query.to_string(), i);
        i
    }

    pub fn add_window(&mut self, query: &str, window: Vec<String>) {
        let i = self.ensure_query(query);
        self.windows[i].push(window);
    }

    /// Queries in insertion order with their window counts.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &[Vec<String>])> {
        self.queries
            .iter()
            .zip(&self.windows)
            .map(|(q, w)| (q.as_str(), w.as_slice()))
    }

    pub fn windows(&self, query: &str) -> Option<&[Vec<String>]> {
        self.index.get(query).map(|&i| self.windows[i].as_slice())
    }

    pub fn count(&self, query: &str) -> usize {
        self.windows(query).map_or(0, |w| w.len())
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    /// Queries that never occurred. They stay in the bank; this is the report.
    pub fn empty_queries(&self) -> Vec<&str> {
        self.iter()
            .filter(|(_, w)| w.is_empty())
            .map(|(q, _)| q)
            .collect()
    }

    /// Shard merge: counts add, window lists concatenate in argument order.
    pub fn merge(&mut self, other: ContextBank) {
        for (q, ws) in other.queries.into_iter().zip(other.windows) {
            let i = self.ensure_query(&q);
            self.windows[i].extend(ws);
        }
    }

    /// `query TAB space-joined-window` per window; a query with no windows is
    /// a bare `query` line.
    pub fn write<W: Write>(&self, mut writer: W) -> Result<()> {
        for (q, ws) in self.iter() {
            if ws.is_empty() {
                writeln!(writer, "{q}")?;
            }
            for w in ws {
                writeln!(writer, "{q}\t{}", w.join(" "))?;
            }
        }
        Ok(())
    }

    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut w = std::io::BufWriter::new(File::create(path)?);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn read<R: BufRead>(reader: R, window_radius: usize) -> Result<Self> {
        let mut bank = ContextBank::new([], window_radius);
        for line in reader.lines() {
            let line = line?;
            let line = line.trim_end_matches(['\r', '\n']);
            if line.is_empty() {
                continue;
            }
            match line.split_once('\t') {
                Some((q, rest)) => {
                    let window: Vec<String> =
                        rest.split_whitespace().map(str::to_string).collect();
                    bank.add_window(q, window);
                }
                None => {
                    bank.ensure_query(line);
                }
            }
        }
        Ok(bank)
    }

    pub fn load<P: AsRef<Path>>(path: P, window_radius: usize) -> Result<Self> {
        Self::read(BufReader::new(File::open(path)?), window_radius)
    }
}

/// Scan an already-filtered corpus and collect up to `window_radius` tokens
/// on each side of every query match. Queries with zero matches stay in the
/// bank so the report can name them.
pub fn extract_contexts<I>(lines: I, queries: &[PhraseQuery], window_radius: usize) -> ContextBank
where
    I: IntoIterator,
    I::Item: AsRef<str>,
{
    let mut bank = ContextBank::new(queries.iter().map(|q| q.phrase()), window_radius);
    for line in lines {
        let tokens: Vec<String> = line
            .as_ref()
            .split_whitespace()
            .map(str::to_string)
            .collect();
        for (qi, start) in match_queries(&tokens, queries) {
            let q = &queries[qi];
            let end = start + q.tokens.len();
            let left = start.saturating_sub(window_radius);
            let right = (end + window_radius).min(tokens.len());
            let mut window = Vec::with_capacity(window_radius * 2);
            window.extend_from_slice(&tokens[left..start]);
            window.extend_from_slice(&tokens[end..right]);
            bank.add_window(&q.phrase(), window);
        }
    }
    bank
}

/// Modifier-by-emotion co-occurrence counts over query matches.
#[derive(Debug, Clone)]
pub struct FrequencyMatrix {
    modifiers: Vec<String>,
    counts: Vec<[u64; 6]>,
    class_totals: BTreeMap<CoarseClass, u64>,
    total: u64,
}

impl FrequencyMatrix {
    pub fn modifiers(&self) -> &[String] {
        &self.modifiers
    }

    pub fn count(&self, modifier: &str, emotion: Emotion) -> u64 {
        self.modifiers
            .iter()
            .position(|m| m == modifier)
            .map_or(0, |i| self.counts[i][emotion_index(emotion)])
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Share of all matches per coarse class.
    pub fn class_share(&self, class: CoarseClass) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        *self.class_totals.get(&class).unwrap_or(&0) as f64 / self.total as f64
    }

    /// Row-normalized relative frequency.
    pub fn relative(&self, modifier: &str, emotion: Emotion) -> f64 {
        let Some(i) = self.modifiers.iter().position(|m| m == modifier) else {
            return 0.0;
        };
        let row_sum: u64 = self.counts[i].iter().sum();
        if row_sum == 0 {
            return 0.0;
        }
        self.counts[i][emotion_index(emotion)] as f64 / row_sum as f64
    }

    pub fn write_counts<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "modifier")?;
        for e in Emotion::ALL {
            write!(w, "\t{e}")?;
        }
        writeln!(w)?;
        for (m, row) in self.modifiers.iter().zip(&self.counts) {
            write!(w, "{m}")?;
            for c in row {
                write!(w, "\t{c}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn write_relative<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "modifier")?;
        for e in Emotion::ALL {
            write!(w, "\t{e}")?;
        }
        writeln!(w)?;
        for m in &self.modifiers {
            write!(w, "{m}")?;
            for e in Emotion::ALL {
                write!(w, "\t{}", crate::numfmt::sig6(self.relative(m, e)))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn write_class_shares<W: Write>(&self, mut w: W) -> Result<()> {
        for class in [
            CoarseClass::Amplifier,
            CoarseClass::Downtoner,
            CoarseClass::Negation,
            CoarseClass::Focus,
        ] {
            writeln!(w, "{class}\t{}", crate::numfmt::sig6(self.class_share(class)))?;
        }
        Ok(())
    }
}

fn emotion_index(e: Emotion) -> usize {
    Emotion::ALL.iter().position(|x| *x == e).expect("emotion in ALL")
}

/// Count `(modifier, emotion)` matches across a filtered corpus. Queries are
/// the full product of inventory surface forms with the known adjectives.
pub fn frequency_matrix<I>(
    lines: I,
    inventory: &ModifierInventory,
    adjectives: &BTreeMap<String, Emotion>,
) -> FrequencyMatrix
where
    I: IntoIterator,
    I::Item: AsRef<str>,
{
    let mut queries = Vec::new();
    let mut owner: Vec<(usize, Emotion)> = Vec::new(); // query -> (modifier row, emotion)
    for (mi, (surface, class)) in inventory.iter().enumerate() {
        for (adj, emotion) in adjectives {
            let mut tokens: Vec<String> =
                surface.split_whitespace().map(str::to_string).collect();
            tokens.push(adj.clone());
            queries.push(PhraseQuery {
                tokens,
                adjective: adj.clone(),
                emotion: Some(*emotion),
                modifier_class: Some(class),
                head_modifier: Some(surface.to_string()),
            });
            owner.push((mi, *emotion));
        }
    }

    let modifiers: Vec<String> = inventory.iter().map(|(s, _)| s.to_string()).collect();
    let mut counts = vec![[0u64; 6]; modifiers.len()];
    let mut class_totals: BTreeMap<CoarseClass, u64> = BTreeMap::new();
    let mut total = 0u64;
    for line in lines {
        let tokens: Vec<String> = line
            .as_ref()
            .split_whitespace()
            .map(str::to_string)
            .collect();
        for (qi, _) in match_queries(&tokens, &queries) {
            let (mi, emotion) = owner[qi];
            counts[mi][emotion_index(emotion)] += 1;
            let class = queries[qi].modifier_class.expect("built with class");
            *class_totals.entry(class.coarse()).or_insert(0) += 1;
            total += 1;
        }
    }
    FrequencyMatrix {
        modifiers,
        counts,
        class_totals,
        total,
    }
}
