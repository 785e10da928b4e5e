//! Benchmark examples and the heuristics that pull structured fields out of their text.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use unicode_segmentation::UnicodeSegmentation;

/// One example. `choices` keeps the order of `target_scores` in the source file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TaskInstance {
    pub input: String,
    #[serde(default)]
    pub choices: Vec<String>,
    #[serde(default)]
    pub target_scores: Vec<(String, f64)>,
    /// Reference answers for generative tasks.
    #[serde(default)]
    pub targets: Vec<String>,
    #[serde(default)]
    pub metadata: Map<String, Value>,
}

impl TaskInstance {
    pub fn multiple_choice(input: &str, choices: &[&str], correct: usize) -> Self {
        Self {
            input: input.to_string(),
            choices: choices.iter().map(|c| c.to_string()).collect(),
            target_scores: choices
                .iter()
                .enumerate()
                .map(|(i, c)| (c.to_string(), if i == correct { 1.0 } else { 0.0 }))
                .collect(),
            targets: Vec::new(),
            metadata: Map::new(),
        }
    }

    pub fn with_meta(mut self, key: &str, value: Value) -> Self {
        self.metadata.insert(key.to_string(), value);
        self
    }

    /// Best-scoring choice (first on ties), else the first reference target.
    pub fn expected(&self) -> Option<String> {
        let mut best: Option<&(String, f64)> = None;
        for entry in &self.target_scores {
            if best.map_or(true, |b| entry.1 > b.1) {
                best = Some(entry);
            }
        }
        best.map(|b| b.0.clone())
            .or_else(|| self.targets.first().cloned())
    }

    pub fn meta_str(&self, key: &str) -> Option<String> {
        match self.metadata.get(key)? {
            Value::String(s) => Some(s.clone()),
            Value::Number(n) => Some(n.to_string()),
            _ => None,
        }
    }

    pub fn meta_strings(&self, key: &str) -> Option<Vec<String>> {
        match self.metadata.get(key)? {
            Value::Array(items) => items
                .iter()
                .map(|v| v.as_str().map(str::to_string))
                .collect(),
            Value::String(s) => Some(split_commas(s)),
            _ => None,
        }
    }

    pub fn meta_usize(&self, key: &str) -> Option<usize> {
        match self.metadata.get(key)? {
            Value::Number(n) => n.as_u64().map(|v| v as usize),
            Value::String(s) => s.trim().parse().ok(),
            _ => None,
        }
    }

    /// Index of the choice equal to `answer`, ignoring case and surrounding punctuation.
    pub fn choice_index(&self, answer: &str) -> Option<usize> {
        let key = comparable(answer);
        self.choices.iter().position(|c| comparable(c) == key)
    }
}

/// Answer form used for matching: trimmed, outer punctuation dropped, lowercased.
pub fn normalize_answer(s: &str) -> String {
    comparable(s)
}

pub(crate) fn comparable(s: &str) -> String {
    s.trim()
        .trim_matches(|c: char| c.is_ascii_punctuation() && c != '\'' && c != '"')
        .trim()
        .to_lowercase()
}

pub(crate) fn split_commas(s: &str) -> Vec<String> {
    s.split(',')
        .map(|x| x.trim().trim_end_matches('.').trim().to_string())
        .filter(|x| !x.is_empty())
        .collect()
}

fn re(cell: &'static OnceLock<Regex>, pattern: &str) -> &'static Regex {
    cell.get_or_init(|| Regex::new(pattern).unwrap())
}

/// Words after the last colon of the first line, e.g. "Pick the odd word out: a, b, c".
pub fn word_list_after_colon(input: &str) -> Option<Vec<String>> {
    let line = input.lines().find(|l| l.contains(':'))?;
    let (_, rest) = line.rsplit_once(':')?;
    let words = split_commas(rest);
    (words.len() >= 2).then_some(words)
}

/// "Input: X" line.
pub fn labelled_line(input: &str, label: &str) -> Option<String> {
    input.lines().find_map(|l| {
        l.trim()
            .strip_prefix(label)
            .map(|rest| rest.trim_start_matches(':').trim().to_string())
            .filter(|s| !s.is_empty())
    })
}

pub struct CodenamesFields {
    pub query: String,
    pub words: Vec<String>,
    pub k: usize,
}

pub fn codenames_fields(input: &str) -> Option<CodenamesFields> {
    static QUERY: OnceLock<Regex> = OnceLock::new();
    static K: OnceLock<Regex> = OnceLock::new();
    static LIST: OnceLock<Regex> = OnceLock::new();
    let query = re(&QUERY, r"(?i)with the word\s+([^\s:,.]+)").captures(input)?[1].to_string();
    let k = re(&K, r"(?i)identify the (\d+) words?")
        .captures(input)
        .and_then(|c| c[1].parse().ok())
        .unwrap_or(1);
    let list = re(&LIST, r"(?is)following list:\s*(.+?)\.(?:\s|$)").captures(input)?[1].to_string();
    Some(CodenamesFields {
        query,
        words: split_commas(&list),
        k,
    })
}

/// (nonce word, definition) pairs from "The word 'x' means ...".
pub fn nonce_definitions(input: &str) -> Vec<(String, String)> {
    static DEF: OnceLock<Regex> = OnceLock::new();
    static TAIL: OnceLock<Regex> = OnceLock::new();
    let head = re(
        &DEF,
        r#"(?i)the word\s+['‘’`"]([^'‘’`"]+)['‘’`"]\s+(?:means|is|are|refers to)\s+"#,
    );
    let tail = re(&TAIL, r"(?i),?\s+and\s*$");
    let heads: Vec<(String, usize, usize)> = head
        .captures_iter(input)
        .map(|c| {
            let m = c.get(0).unwrap();
            (c[1].trim().to_string(), m.start(), m.end())
        })
        .collect();
    heads
        .iter()
        .enumerate()
        .map(|(k, (word, _, body))| {
            let end = heads.get(k + 1).map_or(input.len(), |n| n.1);
            let mut def = &input[*body..end];
            if let Some(i) = def.find(". ") {
                def = &def[..i];
            }
            let def = tail.replace(def.trim(), "");
            (
                word.clone(),
                def.trim().trim_end_matches('.').trim().to_string(),
            )
        })
        .collect()
}

/// Items of "1) a 2) b 3) c".
pub fn numbered_items(input: &str) -> Vec<String> {
    static ITEM: OnceLock<Regex> = OnceLock::new();
    let marker = re(&ITEM, r"(?:^|\s)\d{1,2}\)\s*");
    let starts: Vec<(usize, usize)> = marker
        .find_iter(input)
        .map(|m| (m.start(), m.end()))
        .collect();
    let mut items = Vec::new();
    for (k, &(_, body_start)) in starts.iter().enumerate() {
        let end = starts.get(k + 1).map_or(input.len(), |n| n.0);
        let item = input[body_start..end].lines().next().unwrap_or("").trim();
        if !item.is_empty() {
            items.push(item.trim_end_matches(['.', ',', '?']).trim().to_string());
        }
    }
    items
}

/// Splits "Statement: Draymond Green threw a touchdown." into player and action.
/// The player is the leading run of capitalized words.
pub fn player_and_action(input: &str) -> Option<(String, String)> {
    let text = labelled_line(input, "Statement")
        .unwrap_or_else(|| input.lines().next().unwrap_or("").to_string());
    let sentence = text.split(['.', '?', '!']).next()?.trim();
    let words: Vec<&str> = sentence.split_whitespace().collect();
    let n = words
        .iter()
        .take_while(|w| w.chars().next().is_some_and(|c| c.is_uppercase()))
        .count();
    if n == 0 || n == words.len() {
        return None;
    }
    Some((words[..n].join(" "), words[n..].join(" ")))
}

/// First non-empty line that is not an option listing.
pub fn question_line(input: &str) -> String {
    input
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with("Option"))
        .unwrap_or("")
        .to_string()
}

/// Object names from "there are five books: a gray book, ..., and a black book."
pub fn deduction_objects(input: &str) -> Option<Vec<String>> {
    static OBJ: OnceLock<Regex> = OnceLock::new();
    let caps = re(&OBJ, r"(?i)there (?:are|were) \w+ [^:]*:\s*([^.]+)\.").captures(input)?;
    let list = caps[1].replace(", and ", ", ").replace(" and ", ", ");
    let names: Vec<String> = split_commas(&list)
        .into_iter()
        .map(|s| {
            let lower = s.to_lowercase();
            ["a ", "an ", "the "]
                .iter()
                .find_map(|a| lower.strip_prefix(a).map(|_| s[a.len()..].to_string()))
                .unwrap_or(s)
        })
        .collect();
    (names.len() >= 2).then_some(names)
}

fn is_pictographic(c: char) -> bool {
    matches!(c as u32,
        0x1F000..=0x1FAFF | 0x2600..=0x27BF | 0x2300..=0x23FF | 0x2B00..=0x2BFF | 0x3030 | 0x303D | 0x3297 | 0x3299)
}

/// Extended grapheme clusters that carry a pictographic code point.
pub fn emoji_clusters(text: &str) -> Vec<String> {
    text.graphemes(true)
        .filter(|g| g.chars().any(is_pictographic))
        .map(str::to_string)
        .collect()
}
