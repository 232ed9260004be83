//! Tag-soup HTML to plain text.

const DROPPED: &[&str] = &["script", "style", "noscript", "template", "head", "svg"];

const BLOCKS: &[&str] = &[
    "address", "article", "aside", "blockquote", "body", "br", "caption", "dd", "div", "dl", "dt",
    "fieldset", "figcaption", "figure", "footer", "form", "h1", "h2", "h3", "h4", "h5", "h6",
    "header", "hr", "html", "li", "main", "nav", "ol", "option", "p", "pre", "section", "table",
    "tbody", "td", "tfoot", "th", "thead", "title", "tr", "ul",
];

fn starts_with_ci(hay: &[u8], needle: &str) -> bool {
    hay.len() >= needle.len() && hay[..needle.len()].eq_ignore_ascii_case(needle.as_bytes())
}

fn find_ci(hay: &[u8], needle: &str) -> Option<usize> {
    (0..hay.len()).find(|&i| starts_with_ci(&hay[i..], needle))
}

/// Extracts visible text.
///
/// Script, style and similar elements are dropped with their content, as
/// are comments. Block-level tags start a new line, inline tags vanish,
/// character references are decoded (except a `<` that would open a tag)
/// and runs of blank lines collapse.
/// Malformed markup is tolerated.
pub fn extract_text(html: &str) -> String {
    let bytes = html.as_bytes();
    let mut raw = String::with_capacity(html.len());
    let mut i = 0;
    let mut text_start = 0;
    while i < bytes.len() {
        if bytes[i] != b'<' {
            i += 1;
            continue;
        }
        let rest = &bytes[i + 1..];
        let is_comment = rest.starts_with(b"!--");
        let is_tag = is_comment
            || rest.first().is_some_and(|c| c.is_ascii_alphabetic() || *c == b'/' || *c == b'!' || *c == b'?');
        if !is_tag {
            i += 1;
            continue;
        }
        raw.push_str(&html[text_start..i]);
        if is_comment {
            i = match find_ci(&bytes[i + 4..], "-->") {
                Some(off) => i + 4 + off + 3,
                None => bytes.len(),
            };
            text_start = i;
            continue;
        }
        let close = match bytes[i..].iter().position(|&c| c == b'>') {
            Some(off) => i + off,
            None => {
                // unterminated tag: drop the remainder
                i = bytes.len();
                text_start = i;
                break;
            }
        };
        let inner = &html[i + 1..close];
        let closing = inner.starts_with('/');
        let name: String = inner
            .trim_start_matches('/')
            .chars()
            .take_while(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        i = close + 1;
        if !closing && DROPPED.contains(&name.as_str()) && !inner.trim_end().ends_with('/') {
            let end_tag = format!("</{name}");
            i = match find_ci(&bytes[i..], &end_tag) {
                Some(off) => {
                    let after = i + off;
                    match bytes[after..].iter().position(|&c| c == b'>') {
                        Some(o) => after + o + 1,
                        None => bytes.len(),
                    }
                }
                None => bytes.len(),
            };
        }
        if BLOCKS.contains(&name.as_str()) {
            raw.push('\n');
        }
        text_start = i;
    }
    if text_start < bytes.len() {
        raw.push_str(&html[text_start..]);
    }
    let decoded = html_escape::decode_html_entities(&raw);
    tidy(&reescape_tag_openers(&decoded))
}

/// A decoded `&lt;` directly before a letter would read as a tag; keep it
/// escaped.
fn reescape_tag_openers(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        if c == '<' && chars.peek().is_some_and(|n| n.is_alphabetic()) {
            out.push_str("&lt;");
        } else {
            out.push(c);
        }
    }
    out
}

/// Collapses horizontal whitespace within lines, trims lines and removes
/// blank lines.
fn tidy(text: &str) -> String {
    text.lines()
        .map(|l| l.split_whitespace().collect::<Vec<_>>().join(" "))
        .filter(|l| !l.is_empty())
        .collect::<Vec<_>>()
        .join("\n")
}
