//! Small text utilities shared by the structure, chunking and routing code:
//! word tokenization, year labels, and the unit lexicon.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

static WORD_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[A-Za-z0-9]+").unwrap());

static YEAR_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\b(?:(FY|CY)\s?)?(\d{4})\b").unwrap());

static UNIT_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)\b(?:usd|eur|gbp|jpy|cny|inr|chf|cad|aud|dollars?|euros?|pounds?|yen|thousands?|millions?|billions?|trillions?|percent|percentage|mn|bn)\b|[$€£¥%]",
    )
    .unwrap()
});

static PAREN_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\(([^()]*)\)").unwrap());

const UNIT_FILLER: &[&str] = &["in", "of", "per", "the", "gdp", "amounts", "figures", "values"];

const STOPWORDS: &[&str] = &[
    "a", "about", "above", "across", "all", "an", "and", "any", "are", "as", "at", "average",
    "avg", "be", "been", "below", "between", "by", "count", "describe", "did", "do", "does",
    "during", "each", "fewer", "for", "from", "give", "greater", "had", "has", "have",
    "higher", "highest", "how", "in", "into", "is", "it", "its", "larger", "least", "less",
    "list", "lower", "lowest", "many", "max", "maximum", "me", "mean", "min", "minimum",
    "more", "most", "much", "number", "of", "on", "or", "over", "per", "show", "smaller",
    "sum", "tell", "than", "that", "the", "their", "there", "these", "this", "those", "to",
    "total", "under", "was", "were", "what", "when", "where", "which", "who", "with",
];

/// A year label found in a header or cell, normalized to the bare year.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct YearLabel {
    pub year: u16,
    pub fiscal: bool,
}

/// Lowercased alphanumeric tokens.
pub fn words(text: &str) -> Vec<String> {
    WORD_RE
        .find_iter(text)
        .map(|m| m.as_str().to_ascii_lowercase())
        .collect()
}

/// Function words and query verbs that carry no retrieval signal.
pub fn is_stopword(word: &str) -> bool {
    STOPWORDS.contains(&word)
}

/// Tokens with stopwords and bare numbers removed.
pub fn content_words(text: &str) -> Vec<String> {
    words(text)
        .into_iter()
        .filter(|w| !is_stopword(w))
        .filter(|w| !w.chars().all(|c| c.is_ascii_digit()))
        .collect()
}

/// Crude plural folding so "countries" matches "country".
pub fn stem(word: &str) -> String {
    let w = word.to_ascii_lowercase();
    if w.len() > 4 && w.ends_with("ies") {
        format!("{}y", &w[..w.len() - 3])
    } else if w.len() > 3 && w.ends_with('s') && !w.ends_with("ss") {
        w[..w.len() - 1].to_string()
    } else {
        w
    }
}

/// All year labels in `text`, in order of appearance. Only years in
/// [1900, 2100] count; a year glued to a decimal or thousands group is skipped.
pub fn extract_years(text: &str) -> Vec<YearLabel> {
    let mut out = Vec::new();
    for caps in YEAR_RE.captures_iter(text) {
        let digits = caps.get(2).unwrap();
        let rest = &text[digits.end()..];
        let mut tail = rest.chars();
        if let (Some(sep), Some(next)) = (tail.next(), tail.next()) {
            if (sep == '.' || sep == ',') && next.is_ascii_digit() {
                continue;
            }
        }
        let head = &text[..caps.get(0).unwrap().start()];
        if head.ends_with(['.', ',']) && head[..head.len() - 1].ends_with(|c: char| c.is_ascii_digit()) {
            continue;
        }
        let year: u16 = digits.as_str().parse().unwrap();
        if (1900..=2100).contains(&year) {
            out.push(YearLabel { year, fiscal: caps.get(1).is_some() });
        }
    }
    out
}

/// `text` with every year token (including FY/CY prefixes) removed.
pub fn strip_years(text: &str) -> String {
    YEAR_RE.replace_all(text, "").into_owned()
}

/// First unit-lexicon hit in `text`, if any.
pub fn unit_hit(text: &str) -> Option<&str> {
    UNIT_RE.find(text).map(|m| m.as_str())
}

/// True when the whole cell reads as a unit annotation, e.g. "USD (millions)".
pub fn is_unit_text(text: &str) -> bool {
    let t = text.trim();
    if t.is_empty() || unit_hit(t).is_none() || t.chars().any(|c| c.is_ascii_digit()) {
        return false;
    }
    let ws = words(t);
    ws.len() <= 5
        && ws.iter().all(|w| UNIT_RE.is_match(w) || UNIT_FILLER.contains(&w.as_str()))
}

/// Unit string carried by a header cell: the whole cell for a unit line,
/// the parenthesized part for labels like "GDP Growth (%)", else the bare hit.
pub fn unit_of_label(text: &str) -> Option<String> {
    let t = text.trim();
    if is_unit_text(t) {
        return Some(t.to_string());
    }
    for caps in PAREN_RE.captures_iter(t) {
        let inner = caps.get(1).unwrap().as_str().trim();
        if unit_hit(inner).is_some() {
            return Some(inner.to_string());
        }
    }
    unit_hit(t).map(str::to_string)
}

/// Splits "Debt (% of GDP)" into ("Debt", Some("% of GDP")). Only a trailing
/// parenthesized group is treated as a unit suffix.
pub fn split_unit_suffix(label: &str) -> (&str, Option<&str>) {
    let t = label.trim();
    if let Some(open) = t.rfind('(') {
        if t.ends_with(')') && open > 0 {
            let inner = t[open + 1..t.len() - 1].trim();
            if !inner.is_empty() {
                return (t[..open].trim_end(), Some(inner));
            }
        }
    }
    (t, None)
}

/// Lexicon words that appear in a question, lowercased ("%" kept as-is).
pub fn unit_mentions(text: &str) -> Vec<String> {
    UNIT_RE
        .find_iter(text)
        .map(|m| m.as_str().to_ascii_lowercase())
        .collect()
}

/// Decimal parse accepting thousands separators and accounting negatives:
/// "1,234" → 1234, "(12.5)" → -12.5. Percent signs and currency symbols are not numbers.
pub fn parse_number(text: &str) -> Option<f64> {
    let t = text.trim();
    if t.is_empty() {
        return None;
    }
    let (neg_paren, body) = match t.strip_prefix('(').and_then(|s| s.strip_suffix(')')) {
        Some(inner) => (true, inner.trim()),
        None => (false, t),
    };
    let (sign, digits) = match body.as_bytes().first() {
        Some(b'-') => (-1.0, &body[1..]),
        Some(b'+') => (1.0, &body[1..]),
        _ => (1.0, body),
    };
    if neg_paren && sign < 0.0 {
        return None;
    }
    if digits.is_empty() || !digits.starts_with(|c: char| c.is_ascii_digit() || c == '.') {
        return None;
    }
    let plain = if digits.contains(',') {
        let (int_part, frac) = match digits.split_once('.') {
            Some((i, f)) => (i, Some(f)),
            None => (digits, None),
        };
        let groups: Vec<&str> = int_part.split(',').collect();
        let ok = !groups[0].is_empty()
            && groups[0].len() <= 3
            && groups.iter().all(|g| g.chars().all(|c| c.is_ascii_digit()))
            && groups[1..].iter().all(|g| g.len() == 3);
        if !ok {
            return None;
        }
        let mut s = groups.concat();
        if let Some(f) = frac {
            s.push('.');
            s.push_str(f);
        }
        s
    } else {
        digits.to_string()
    };
    if !plain
        .chars()
        .all(|c| c.is_ascii_digit() || matches!(c, '.' | 'e' | 'E' | '+' | '-'))
    {
        return None;
    }
    let v: f64 = plain.parse().ok()?;
    if !v.is_finite() {
        return None;
    }
    Some(if neg_paren { -v } else { sign * v })
}

/// Numeric tokens as they appear in running text ("1,234", "3.5", "-2").
pub fn numeric_tokens(text: &str) -> Vec<&str> {
    static NUM_RE: LazyLock<Regex> =
        LazyLock::new(|| Regex::new(r"-?\d+(?:,\d{3})*(?:\.\d+)?").unwrap());
    NUM_RE.find_iter(text).map(|m| m.as_str()).collect()
}
