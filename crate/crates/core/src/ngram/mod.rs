//! Interpolated modified Kneser-Ney n-gram language models.
//!
//! Training collects counts, derives adjusted (continuation) counts and
//! discounts, and then compiles every seen n-gram into backoff form: an
//! interpolated probability plus, for n-grams that occur as contexts, the
//! interpolation weight used when a continuation is unseen. Querying the
//! compiled tables with standard backoff reproduces the interpolated model
//! exactly.

mod baseline;
mod select;

pub use baseline::AddOneUnigram;
pub use select::{ml_score, partition_by_score, select_lowest, MlScore, Partition};

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::textkit::{Script, Sentence};

pub const UNK: &str = "<unk>";
pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
/// Stand-in for a space in character mode.
pub const SPACE_TOKEN: &str = "\u{2581}";

pub const MAX_ORDER: usize = 5;
pub const DEFAULT_ORDER: usize = 5;
pub const MIN_TRAINING_SENTENCES: usize = 50;

const UNK_ID: u32 = 0;
const BOS_ID: u32 = 1;
const EOS_ID: u32 = 2;
/// Discounts used when count-of-counts make the closed form degenerate.
const FALLBACK_DISCOUNTS: [f64; 3] = [0.5, 1.0, 1.5];
/// ARPA convention for log10(0).
const ARPA_LOG_ZERO: f64 = -99.0;

#[derive(Debug, Error)]
pub enum LmError {
    #[error("empty training corpus")]
    EmptyCorpus,
    #[error("training corpus has {0} sentences, need at least {MIN_TRAINING_SENTENCES}")]
    CorpusTooSmall(usize),
    #[error("order must be in [1, {MAX_ORDER}], got {0}")]
    OrderOutOfRange(usize),
    #[error("sentence has no tokens")]
    EmptySentence,
    #[error("tokenizer mode mismatch: {0} vs {1}")]
    TokenizerMismatch(TokenizerMode, TokenizerMode),
    #[error("k = {k} exceeds corpus size {n}")]
    KTooLarge { k: usize, n: usize },
    #[error("{0} scores for {1} items")]
    LengthMismatch(usize, usize),
    #[error("fraction must be in (0, 1/3], got {0}")]
    FractionOutOfRange(f64),
    #[error("line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenizerMode {
    Whitespace,
    Character,
}

impl TokenizerMode {
    /// Character tokens for unsegmented scripts, words otherwise.
    pub fn for_lang(lang: &str) -> Self {
        match Script::of(lang) {
            Script::Unsegmented => TokenizerMode::Character,
            Script::SpaceDelimited => TokenizerMode::Whitespace,
        }
    }

    pub fn tokenize(self, text: &str) -> Vec<String> {
        match self {
            TokenizerMode::Whitespace => text.split_whitespace().map(str::to_string).collect(),
            TokenizerMode::Character => {
                let mut out = Vec::new();
                let mut pending_space = false;
                for c in text.trim().chars() {
                    if c.is_whitespace() {
                        pending_space = true;
                        continue;
                    }
                    if pending_space {
                        out.push(SPACE_TOKEN.to_string());
                        pending_space = false;
                    }
                    out.push(c.to_string());
                }
                out
            }
        }
    }
}

impl fmt::Display for TokenizerMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TokenizerMode::Whitespace => "whitespace",
            TokenizerMode::Character => "character",
        })
    }
}

impl FromStr for TokenizerMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "whitespace" => Ok(TokenizerMode::Whitespace),
            "character" => Ok(TokenizerMode::Character),
            other => Err(format!("unknown tokenizer mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Entry {
    log_prob: f64,
    /// ln of the interpolation weight when this n-gram is used as a context.
    backoff: f64,
}

/// A compiled n-gram model. Immutable once trained or loaded.
#[derive(Debug, Clone)]
pub struct LmModel {
    order: usize,
    mode: TokenizerMode,
    vocab: Vec<String>,
    ids: HashMap<String, u32>,
    /// `tables[k - 1]` holds the k-grams.
    tables: Vec<HashMap<Vec<u32>, Entry>>,
}

#[derive(Debug, Default, Clone, Copy)]
struct ContextStats {
    total: u64,
    n1: u64,
    n2: u64,
    n3p: u64,
}

struct Counts {
    order: usize,
    vocab_size: usize,
    /// Adjusted counts per order.
    adjusted: Vec<HashMap<Vec<u32>, u64>>,
    contexts: Vec<HashMap<Vec<u32>, ContextStats>>,
    discounts: Vec<[f64; 3]>,
}

fn discounts_from(adjusted: &HashMap<Vec<u32>, u64>) -> [f64; 3] {
    let mut n = [0u64; 5];
    for &c in adjusted.values() {
        if (1..=4).contains(&c) {
            n[c as usize] += 1;
        }
    }
    let (n1, n2, n3, n4) = (n[1] as f64, n[2] as f64, n[3] as f64, n[4] as f64);
    let y = n1 / (n1 + 2.0 * n2);
    let closed = [
        1.0 - 2.0 * y * n2 / n1,
        2.0 - 3.0 * y * n3 / n2,
        3.0 - 4.0 * y * n4 / n3,
    ];
    let mut out = [0.0; 3];
    for i in 0..3 {
        let d = closed[i];
        out[i] = if d.is_finite() && d > 0.0 && d <= (i + 1) as f64 {
            d
        } else {
            FALLBACK_DISCOUNTS[i]
        };
    }
    out
}

impl Counts {
    fn discount(&self, k: usize, count: u64) -> f64 {
        match count {
            0 => 0.0,
            1 => self.discounts[k - 1][0],
            2 => self.discounts[k - 1][1],
            _ => self.discounts[k - 1][2],
        }
    }

    fn gamma(&self, k: usize, context: &[u32]) -> Option<f64> {
        let s = self.contexts[k - 1].get(context)?;
        let d = &self.discounts[k - 1];
        Some((d[0] * s.n1 as f64 + d[1] * s.n2 as f64 + d[2] * s.n3p as f64) / s.total as f64)
    }

    /// Interpolated probability of `gram`'s last token given the rest, at
    /// order `gram.len()`.
    fn interpolated(&self, gram: &[u32]) -> f64 {
        let k = gram.len();
        let context = &gram[..k - 1];
        let lower = if k == 1 {
            1.0 / self.vocab_size as f64
        } else {
            self.interpolated(&gram[1..])
        };
        let stats = match self.contexts[k - 1].get(context) {
            Some(s) => s,
            None => return lower,
        };
        let a = self.adjusted[k - 1].get(gram).copied().unwrap_or(0);
        let main = (a as f64 - self.discount(k, a)).max(0.0) / stats.total as f64;
        main + self.gamma(k, context).unwrap_or(0.0) * lower
    }
}

/// Trains an interpolated modified Kneser-Ney model.
pub fn train_lm(corpus: &[Sentence], order: usize, mode: TokenizerMode) -> Result<LmModel, LmError> {
    if !(1..=MAX_ORDER).contains(&order) {
        return Err(LmError::OrderOutOfRange(order));
    }
    if corpus.is_empty() {
        return Err(LmError::EmptyCorpus);
    }
    if corpus.len() < MIN_TRAINING_SENTENCES {
        return Err(LmError::CorpusTooSmall(corpus.len()));
    }

    let mut vocab: Vec<String> = vec![UNK.into(), BOS.into(), EOS.into()];
    let mut ids: HashMap<String, u32> = vocab
        .iter()
        .enumerate()
        .map(|(i, w)| (w.clone(), i as u32))
        .collect();
    let mut sequences = Vec::with_capacity(corpus.len());
    for s in corpus {
        let mut seq = vec![BOS_ID];
        for tok in mode.tokenize(&s.text) {
            let next = vocab.len() as u32;
            let id = *ids.entry(tok.clone()).or_insert_with(|| {
                vocab.push(tok);
                next
            });
            seq.push(id);
        }
        seq.push(EOS_ID);
        sequences.push(seq);
    }
    if sequences.iter().all(|s| s.len() == 2) {
        return Err(LmError::EmptyCorpus);
    }

    let mut raw: Vec<HashMap<Vec<u32>, u64>> = vec![HashMap::new(); order];
    for seq in &sequences {
        for end in 1..seq.len() {
            for k in 1..=order.min(end + 1) {
                *raw[k - 1].entry(seq[end + 1 - k..=end].to_vec()).or_insert(0) += 1;
            }
        }
    }

    let mut adjusted: Vec<HashMap<Vec<u32>, u64>> = Vec::with_capacity(order);
    for k in 1..=order {
        if k == order {
            adjusted.push(raw[k - 1].clone());
            continue;
        }
        let mut table: HashMap<Vec<u32>, u64> = HashMap::new();
        for gram in raw[k - 1].keys() {
            if gram[0] == BOS_ID {
                table.insert(gram.clone(), raw[k - 1][gram]);
            }
        }
        for longer in raw[k].keys() {
            let suffix = &longer[1..];
            if suffix[0] != BOS_ID {
                *table.entry(suffix.to_vec()).or_insert(0) += 1;
            }
        }
        adjusted.push(table);
    }

    let mut contexts: Vec<HashMap<Vec<u32>, ContextStats>> = vec![HashMap::new(); order];
    for k in 1..=order {
        for (gram, &a) in &adjusted[k - 1] {
            let s = contexts[k - 1].entry(gram[..k - 1].to_vec()).or_default();
            s.total += a;
            match a {
                1 => s.n1 += 1,
                2 => s.n2 += 1,
                _ => s.n3p += 1,
            }
        }
    }
    let discounts = adjusted.iter().map(discounts_from).collect();
    let counts = Counts {
        order,
        vocab_size: vocab.len() - 1,
        adjusted,
        contexts,
        discounts,
    };

    let mut tables: Vec<HashMap<Vec<u32>, Entry>> = vec![HashMap::new(); order];
    for id in 0..vocab.len() as u32 {
        let log_prob = if id == BOS_ID {
            f64::NEG_INFINITY
        } else {
            counts.interpolated(&[id]).ln()
        };
        tables[0].insert(
            vec![id],
            Entry {
                log_prob,
                backoff: 0.0,
            },
        );
    }
    for k in 2..=order {
        for gram in counts.adjusted[k - 1].keys() {
            tables[k - 1].insert(
                gram.clone(),
                Entry {
                    log_prob: counts.interpolated(gram).ln(),
                    backoff: 0.0,
                },
            );
        }
    }
    for k in 2..=counts.order {
        for context in counts.contexts[k - 1].keys() {
            if context.is_empty() {
                continue;
            }
            let gamma = counts.gamma(k, context).expect("context has stats");
            if let Some(e) = tables[context.len() - 1].get_mut(context) {
                e.backoff = gamma.ln();
            }
        }
    }

    Ok(LmModel {
        order,
        mode,
        vocab,
        ids,
        tables,
    })
}

impl LmModel {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn tokenizer_mode(&self) -> TokenizerMode {
        self.mode
    }

    /// Number of types, including the special symbols.
    pub fn vocab_len(&self) -> usize {
        self.vocab.len()
    }

    /// Tokens a model can predict: everything but the sentence-start symbol.
    pub fn predictable_ids(&self) -> impl Iterator<Item = u32> + '_ {
        (0..self.vocab.len() as u32).filter(|&id| id != BOS_ID)
    }

    pub fn token_id(&self, token: &str) -> u32 {
        self.ids.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: u32) -> &str {
        &self.vocab[id as usize]
    }

    /// Token ids for a sentence, framed by sentence-start and sentence-end.
    pub fn encode(&self, text: &str) -> Vec<u32> {
        let mut seq = vec![BOS_ID];
        seq.extend(self.mode.tokenize(text).iter().map(|t| self.token_id(t)));
        seq.push(EOS_ID);
        seq
    }

    /// ln P(word | context) by backoff over the compiled tables. Only the
    /// last `order - 1` context tokens are used.
    pub fn log_prob(&self, context: &[u32], word: u32) -> f64 {
        let keep = context.len().min(self.order - 1);
        let context = &context[context.len() - keep..];
        let mut acc = 0.0;
        let mut key = Vec::with_capacity(keep + 1);
        for s in 0..=keep {
            let h = &context[s..];
            key.clear();
            key.extend_from_slice(h);
            key.push(word);
            if let Some(e) = self.tables[key.len() - 1].get(&key) {
                return acc + e.log_prob;
            }
            if !h.is_empty() {
                if let Some(e) = self.tables[h.len() - 1].get(h) {
                    acc += e.backoff;
                }
            }
        }
        unreachable!("every token id has a unigram entry")
    }

    /// ln P of each predicted token of the sentence, end-of-sentence included.
    pub fn token_log_probs(&self, text: &str) -> Vec<f64> {
        let seq = self.encode(text);
        (1..seq.len()).map(|p| self.log_prob(&seq[..p], seq[p])).collect()
    }

    /// Per-token cross-entropy in nats, counting the end-of-sentence token.
    pub fn cross_entropy(&self, s: &Sentence) -> Result<f64, LmError> {
        if self.mode.tokenize(&s.text).is_empty() {
            return Err(LmError::EmptySentence);
        }
        let lps = self.token_log_probs(&s.text);
        Ok(-lps.iter().sum::<f64>() / lps.len() as f64)
    }

    /// Corpus perplexity, exp of the token-weighted mean negative log
    /// probability. Empty sentences are skipped.
    pub fn perplexity(&self, corpus: &[Sentence]) -> f64 {
        let (mut nll, mut n) = (0.0, 0usize);
        for s in corpus {
            if self.mode.tokenize(&s.text).is_empty() {
                continue;
            }
            let lps = self.token_log_probs(&s.text);
            nll -= lps.iter().sum::<f64>();
            n += lps.len();
        }
        (nll / n.max(1) as f64).exp()
    }

    /// Writes the model in an ARPA-like layout under a
    /// `NGLM v1 <order> <tokenizer_mode>` header. Columns are
    /// `log10 prob<TAB>tokens<TAB>log10 backoff`; the backoff column is
    /// omitted when the n-gram is never used as a context.
    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "NGLM v1 {} {}", self.order, self.mode)?;
        writeln!(w, "\\data\\")?;
        for (k, t) in self.tables.iter().enumerate() {
            writeln!(w, "ngram {}={}", k + 1, t.len())?;
        }
        for (k, table) in self.tables.iter().enumerate() {
            writeln!(w)?;
            writeln!(w, "\\{}-grams:", k + 1)?;
            let mut rows: Vec<(Vec<&str>, &Entry)> = table
                .iter()
                .map(|(g, e)| (g.iter().map(|&id| self.token(id)).collect(), e))
                .collect();
            rows.sort_by(|a, b| a.0.cmp(&b.0));
            for (tokens, e) in rows {
                let lp = if e.log_prob.is_finite() {
                    e.log_prob / std::f64::consts::LN_10
                } else {
                    ARPA_LOG_ZERO
                };
                if e.backoff != 0.0 {
                    writeln!(
                        w,
                        "{}\t{}\t{}",
                        lp,
                        tokens.join(" "),
                        e.backoff / std::f64::consts::LN_10
                    )?;
                } else {
                    writeln!(w, "{}\t{}", lp, tokens.join(" "))?;
                }
            }
        }
        writeln!(w)?;
        writeln!(w, "\\end\\")?;
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<LmModel, LmError> {
        let bad = |line: usize, msg: &str| LmError::Format {
            line,
            msg: msg.to_string(),
        };
        let lines: Vec<String> = r.lines().collect::<Result<_, _>>()?;
        let header: Vec<&str> = lines
            .first()
            .ok_or_else(|| bad(1, "missing header"))?
            .split_whitespace()
            .collect();
        if header.len() != 4 || header[0] != "NGLM" || header[1] != "v1" {
            return Err(bad(1, "header must be `NGLM v1 <order> <tokenizer_mode>`"));
        }
        let order: usize = header[2].parse().map_err(|_| bad(1, "bad order"))?;
        if !(1..=MAX_ORDER).contains(&order) {
            return Err(LmError::OrderOutOfRange(order));
        }
        let mode: TokenizerMode = header[3].parse().map_err(|e: String| bad(1, &e))?;

        let mut vocab: Vec<String> = vec![UNK.into(), BOS.into(), EOS.into()];
        let mut ids: HashMap<String, u32> = vocab
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as u32))
            .collect();
        let mut tables: Vec<HashMap<Vec<u32>, Entry>> = vec![HashMap::new(); order];
        let mut section: Option<usize> = None;
        for (n, line) in lines.iter().enumerate().skip(1) {
            let line_no = n + 1;
            if line.is_empty() || line == "\\data\\" || line.starts_with("ngram ") {
                continue;
            }
            if line == "\\end\\" {
                break;
            }
            if let Some(k) = line.strip_prefix('\\').and_then(|l| l.strip_suffix("-grams:")) {
                let k: usize = k.parse().map_err(|_| bad(line_no, "bad section"))?;
                if !(1..=order).contains(&k) {
                    return Err(bad(line_no, "section order out of range"));
                }
                section = Some(k);
                continue;
            }
            let k = section.ok_or_else(|| bad(line_no, "n-gram outside a section"))?;
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() < 2 || fields.len() > 3 {
                return Err(bad(line_no, "expected 2 or 3 tab-separated fields"));
            }
            let lp: f64 = fields[0].parse().map_err(|_| bad(line_no, "bad log probability"))?;
            let tokens: Vec<&str> = fields[1].split(' ').collect();
            if tokens.len() != k {
                return Err(bad(line_no, "n-gram length does not match section"));
            }
            let backoff = match fields.get(2) {
                Some(b) => b.parse::<f64>().map_err(|_| bad(line_no, "bad backoff"))? * std::f64::consts::LN_10,
                None => 0.0,
            };
            let mut key = Vec::with_capacity(k);
            for t in tokens {
                let id = match ids.get(t) {
                    Some(&id) => id,
                    None if k == 1 => {
                        let id = vocab.len() as u32;
                        vocab.push(t.to_string());
                        ids.insert(t.to_string(), id);
                        id
                    }
                    None => return Err(bad(line_no, "token missing from unigrams")),
                };
                key.push(id);
            }
            let log_prob = if lp <= ARPA_LOG_ZERO {
                f64::NEG_INFINITY
            } else {
                lp * std::f64::consts::LN_10
            };
            tables[k - 1].insert(key, Entry { log_prob, backoff });
        }
        for id in [UNK_ID, EOS_ID] {
            if !tables[0].contains_key(&vec![id]) {
                return Err(bad(0, "unigram section lacks <unk> or </s>"));
            }
        }
        Ok(LmModel {
            order,
            mode,
            vocab,
            ids,
            tables,
        })
    }
}
