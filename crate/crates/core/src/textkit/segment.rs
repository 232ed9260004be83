use super::Sentence;

/// How a language delimits words, which decides the sentence-final marks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Script {
    SpaceDelimited,
    Unsegmented,
}

impl Script {
    pub fn of(lang: &str) -> Script {
        let base = lang.split(['-', '_']).next().unwrap_or(lang);
        match base.to_ascii_lowercase().as_str() {
            "ja" | "zh" | "th" | "lo" | "km" | "my" | "bo" => Script::Unsegmented,
            _ => Script::SpaceDelimited,
        }
    }

    fn is_terminal(self, c: char) -> bool {
        match self {
            Script::SpaceDelimited => matches!(c, '.' | '!' | '?'),
            // NFKC folds the fullwidth ！ and ？ to their ASCII forms.
            Script::Unsegmented => matches!(c, '。' | '！' | '？' | '!' | '?'),
        }
    }

    /// Joiner that reproduces the input from its segments.
    pub fn joiner(self) -> &'static str {
        match self {
            Script::SpaceDelimited => " ",
            Script::Unsegmented => "",
        }
    }
}

fn is_closer(c: char) -> bool {
    matches!(
        c,
        '"' | '\'' | ')' | ']' | '}' | '」' | '』' | '）' | '”' | '’' | '»' | '】'
    )
}

/// `chars[..dot]` ends with a lone capital letter, as in "J. Smith".
fn single_capital_before(chars: &[char], dot: usize) -> bool {
    if dot == 0 || !chars[dot - 1].is_uppercase() {
        return false;
    }
    dot == 1 || !chars[dot - 2].is_alphanumeric()
}

/// Splits normalized text into sentences at line breaks and after
/// sentence-final punctuation.
///
/// For space-delimited scripts a mark only ends a sentence when followed by
/// whitespace or the end of the line, and a period directly after a single
/// capital letter (an initial) never does. Abbreviations such as "Dr." are
/// not guarded.
pub fn segment_sentences(text: &str, lang: &str) -> Vec<Sentence> {
    let script = Script::of(lang);
    let mut pieces: Vec<String> = Vec::new();
    for line in text.split(['\n', '\r']) {
        let chars: Vec<char> = line.chars().collect();
        let mut start = 0;
        let mut i = 0;
        while i < chars.len() {
            if !script.is_terminal(chars[i]) {
                i += 1;
                continue;
            }
            let mark = i;
            let mut end = i + 1;
            while end < chars.len() && (script.is_terminal(chars[end]) || is_closer(chars[end])) {
                end += 1;
            }
            let split = match script {
                Script::Unsegmented => true,
                Script::SpaceDelimited => {
                    let boundary = end == chars.len() || chars[end].is_whitespace();
                    let initial = chars[mark] == '.' && end == mark + 1 && single_capital_before(&chars, mark);
                    boundary && !initial
                }
            };
            if split {
                pieces.push(chars[start..end].iter().collect());
                start = end;
            }
            i = end;
        }
        if start < chars.len() {
            pieces.push(chars[start..].iter().collect());
        }
    }
    pieces
        .iter()
        .map(|p| p.trim())
        .filter(|p| !p.is_empty())
        .enumerate()
        .map(|(i, p)| Sentence::new(p, i))
        .collect()
}
