//! Parsing generated completions into sets, and premise erasure.

use std::ops::Range;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::ThinkError;

fn inline_marker() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\s\d{1,3}[.)]\s").unwrap())
}

fn leading_marker() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^(?:\d{1,3}[.)]|[-*•])(?:\s+|$)").unwrap())
}

/// Ordered, duplicate-free items parsed out of a generation.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ParsedSet {
    pub items: Vec<String>,
    pub source: String,
}

impl ParsedSet {
    /// Builds a set from items, trimming, dropping empties and later duplicates.
    pub fn from_items<I, S>(items: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut out: Vec<String> = Vec::new();
        for item in items {
            let item = item.as_ref().trim();
            if !item.is_empty() && !out.iter().any(|x| x == item) {
                out.push(item.to_string());
            }
        }
        let source = render(&out);
        Self { items: out, source }
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    /// "1. a\n2. b\n..."
    pub fn render_enumerated(&self) -> String {
        render(&self.items)
    }
}

fn render(items: &[String]) -> String {
    items
        .iter()
        .enumerate()
        .map(|(i, item)| format!("{}. {item}", i + 1))
        .collect::<Vec<_>>()
        .join("\n")
}

fn clean_piece(piece: &str) -> (String, bool) {
    let piece = piece.trim();
    let (body, marked) = match leading_marker().find(piece) {
        Some(m) => (&piece[m.end()..], true),
        None => (piece, false),
    };
    let body = body.trim().trim_end_matches([',', ';']).trim();
    (body.to_string(), marked)
}

/// Splits a list-style generation into items on newlines and enumeration markers.
/// A bare comma-separated line is split on commas.
pub fn parse_list_output(text: &str) -> ParsedSet {
    let mut pieces = Vec::new();
    let mut any_marker = false;
    for line in text.lines() {
        let mut last = 0;
        for m in inline_marker().find_iter(line) {
            pieces.push(&line[last..m.start()]);
            last = m.start();
            any_marker = true;
        }
        pieces.push(&line[last..]);
    }
    let mut items = Vec::new();
    for piece in pieces {
        let (body, marked) = clean_piece(piece);
        any_marker |= marked;
        if !body.is_empty() {
            items.push(body);
        }
    }
    if !any_marker && items.len() == 1 && items[0].contains(',') {
        let line = items.pop().unwrap();
        items.extend(
            line.split(',')
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty()),
        );
    }
    let mut set = ParsedSet::from_items(items);
    set.source = text.to_string();
    set
}

/// Removes `span` (byte offsets) from `question` and repairs the whitespace at the seam.
pub fn erase_premise(question: &str, span: Range<usize>) -> Result<String, ThinkError> {
    let len = question.len();
    if span.start > span.end
        || span.end > len
        || !question.is_char_boundary(span.start)
        || !question.is_char_boundary(span.end)
    {
        return Err(ThinkError::SpanOutOfRange {
            start: span.start,
            end: span.end,
            len,
        });
    }
    if span.is_empty() {
        return Ok(question.to_string());
    }
    let left = question[..span.start].trim_end();
    let right = question[span.end..].trim_start();
    let joined = match (left.is_empty(), right.is_empty()) {
        (true, _) => right.to_string(),
        (_, true) => left.to_string(),
        _ => format!("{left} {right}"),
    };
    Ok(joined.trim().to_string())
}
