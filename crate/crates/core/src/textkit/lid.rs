use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use thiserror::Error;

use super::Sentence;

/// Label returned when a sentence is too short to classify.
pub const UNKNOWN_LANG: &str = "unknown";

const SMOOTHING_ALPHA: f64 = 0.1;
const HEADER_MAGIC: &str = "LID v1";

#[derive(Debug, Error)]
pub enum LidError {
    #[error("language identification needs at least 2 languages, got {0}")]
    TooFewLanguages(usize),
    #[error("empty training corpus for language {0:?}")]
    EmptyCorpus(String),
    #[error("n-gram order must be at least 1")]
    InvalidOrder,
    #[error("line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Multinomial character n-gram model, one distribution per language.
///
/// Each language stores log probabilities only for the n-grams it has seen;
/// every other n-gram (including ones never seen by any language) receives
/// that language's smoothing log probability.
#[derive(Debug, Clone, PartialEq)]
pub struct LidModel {
    order: usize,
    languages: Vec<String>,
    log_probs: Vec<BTreeMap<String, f64>>,
    smoothing: Vec<f64>,
}

fn char_ngrams(text: &str, order: usize) -> Vec<String> {
    let mut padded: Vec<char> = vec![' '];
    let mut last_space = true;
    for c in text.chars().flat_map(char::to_lowercase) {
        if c.is_whitespace() {
            if !last_space {
                padded.push(' ');
            }
            last_space = true;
        } else {
            padded.push(c);
            last_space = false;
        }
    }
    if !last_space {
        padded.push(' ');
    }
    if padded.len() < order {
        return Vec::new();
    }
    padded.windows(order).map(|w| w.iter().collect()).collect()
}

/// Trains an add-0.1 smoothed character n-gram model per language.
pub fn train_lid(
    corpora: &BTreeMap<String, Vec<String>>,
    order: usize,
) -> Result<LidModel, LidError> {
    if order == 0 {
        return Err(LidError::InvalidOrder);
    }
    if corpora.len() < 2 {
        return Err(LidError::TooFewLanguages(corpora.len()));
    }
    let mut counts: Vec<BTreeMap<String, u64>> = Vec::with_capacity(corpora.len());
    for (lang, sentences) in corpora {
        let mut table = BTreeMap::new();
        for s in sentences {
            for g in char_ngrams(s, order) {
                *table.entry(g).or_insert(0) += 1;
            }
        }
        if table.is_empty() {
            return Err(LidError::EmptyCorpus(lang.clone()));
        }
        counts.push(table);
    }
    let vocab: BTreeSet<&String> = counts.iter().flat_map(|t| t.keys()).collect();
    let vocab_size = vocab.len() as f64;

    let mut log_probs = Vec::with_capacity(counts.len());
    let mut smoothing = Vec::with_capacity(counts.len());
    for table in &counts {
        let total: u64 = table.values().sum();
        let denom = total as f64 + SMOOTHING_ALPHA * (vocab_size + 1.0);
        smoothing.push((SMOOTHING_ALPHA / denom).ln());
        log_probs.push(
            table
                .iter()
                .map(|(g, &c)| (g.clone(), ((c as f64 + SMOOTHING_ALPHA) / denom).ln()))
                .collect(),
        );
    }
    Ok(LidModel {
        order,
        languages: corpora.keys().cloned().collect(),
        log_probs,
        smoothing,
    })
}

impl LidModel {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn languages(&self) -> &[String] {
        &self.languages
    }

    /// Number of distinct n-grams seen by any language.
    pub fn vocab_size(&self) -> usize {
        self.log_probs
            .iter()
            .flat_map(|t| t.keys())
            .collect::<BTreeSet<_>>()
            .len()
    }

    /// Total probability assigned by `lang` to its seen n-grams and to every
    /// other n-gram of the shared vocabulary plus one unseen bucket.
    pub fn total_mass(&self, lang: &str) -> Option<f64> {
        let idx = self.languages.iter().position(|l| l == lang)?;
        let seen: f64 = self.log_probs[idx].values().map(|lp| lp.exp()).sum();
        let others = (self.vocab_size() - self.log_probs[idx].len() + 1) as f64;
        Some(seen + others * self.smoothing[idx].exp())
    }

    /// Posterior over the model languages plus [`UNKNOWN_LANG`] under a
    /// uniform prior. Too-short sentences put all mass on unknown.
    pub fn posteriors(&self, s: &Sentence) -> Vec<(String, f64)> {
        let grams = if s.char_len < self.order {
            Vec::new()
        } else {
            char_ngrams(&s.text, self.order)
        };
        let mut out: Vec<(String, f64)> = Vec::with_capacity(self.languages.len() + 1);
        if grams.is_empty() {
            out.extend(self.languages.iter().map(|l| (l.clone(), 0.0)));
            out.push((UNKNOWN_LANG.to_string(), 1.0));
            return out;
        }
        let scores: Vec<f64> = (0..self.languages.len())
            .map(|i| {
                grams
                    .iter()
                    .map(|g| *self.log_probs[i].get(g).unwrap_or(&self.smoothing[i]))
                    .sum()
            })
            .collect();
        let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
        let z: f64 = weights.iter().sum();
        out.extend(
            self.languages
                .iter()
                .zip(&weights)
                .map(|(l, w)| (l.clone(), w / z)),
        );
        out.push((UNKNOWN_LANG.to_string(), 0.0));
        out
    }

    /// Most probable language and its posterior. Ties go to the language
    /// that sorts first.
    pub fn classify(&self, s: &Sentence) -> (String, f64) {
        let mut best: Option<(String, f64)> = None;
        for (lang, p) in self.posteriors(s) {
            if lang == UNKNOWN_LANG {
                if p > 0.0 {
                    return (UNKNOWN_LANG.to_string(), 0.0);
                }
                continue;
            }
            if best.as_ref().is_none_or(|(_, bp)| p > *bp) {
                best = Some((lang, p));
            }
        }
        best.unwrap_or_else(|| (UNKNOWN_LANG.to_string(), 0.0))
    }

    /// Writes the text form: a `LID v1 <order> <lang,lang,...>` header then
    /// `lang<TAB>ngram<TAB>logprob` lines. An empty n-gram field carries the
    /// language's smoothing log probability. Tabs, newlines and backslashes
    /// inside n-grams are backslash-escaped.
    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{} {} {}", HEADER_MAGIC, self.order, self.languages.join(","))?;
        for (i, lang) in self.languages.iter().enumerate() {
            writeln!(w, "{}\t\t{}", lang, self.smoothing[i])?;
            for (g, lp) in &self.log_probs[i] {
                writeln!(w, "{}\t{}\t{}", lang, escape(g), lp)?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<LidModel, LidError> {
        let mut lines = r.lines();
        let header = lines.next().ok_or(LidError::Format {
            line: 1,
            msg: "missing header".into(),
        })??;
        let rest = header.strip_prefix(HEADER_MAGIC).ok_or(LidError::Format {
            line: 1,
            msg: format!("expected {HEADER_MAGIC:?} header"),
        })?;
        let fields: Vec<&str> = rest.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(LidError::Format {
                line: 1,
                msg: "header must be `LID v1 <order> <languages>`".into(),
            });
        }
        let order: usize = fields[0].parse().map_err(|_| LidError::Format {
            line: 1,
            msg: format!("bad order {:?}", fields[0]),
        })?;
        if order == 0 {
            return Err(LidError::InvalidOrder);
        }
        let languages: Vec<String> = fields[1].split(',').map(str::to_string).collect();
        if languages.len() < 2 {
            return Err(LidError::TooFewLanguages(languages.len()));
        }
        let mut log_probs = vec![BTreeMap::new(); languages.len()];
        let mut smoothing: Vec<Option<f64>> = vec![None; languages.len()];
        for (n, line) in lines.enumerate() {
            let line_no = n + 2;
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let bad = |msg: String| LidError::Format { line: line_no, msg };
            let mut parts = line.splitn(3, '\t');
            let (lang, gram, lp) = match (parts.next(), parts.next(), parts.next()) {
                (Some(a), Some(b), Some(c)) => (a, b, c),
                _ => return Err(bad("expected 3 tab-separated fields".into())),
            };
            let idx = languages
                .iter()
                .position(|l| l == lang)
                .ok_or_else(|| bad(format!("language {lang:?} not in header")))?;
            let lp: f64 = lp.parse().map_err(|_| bad(format!("bad log probability {lp:?}")))?;
            if gram.is_empty() {
                smoothing[idx] = Some(lp);
            } else {
                log_probs[idx].insert(unescape(gram), lp);
            }
        }
        let smoothing = smoothing
            .into_iter()
            .zip(&languages)
            .map(|(s, l)| {
                s.ok_or_else(|| LidError::Format {
                    line: 0,
                    msg: format!("no smoothing entry for {l:?}"),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(LidModel {
            order,
            languages,
            log_probs,
            smoothing,
        })
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out
}

fn unescape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some(other) => out.push(other),
            None => out.push('\\'),
        }
    }
    out
}
