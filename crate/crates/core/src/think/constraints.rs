//! Ordering constraints of the form `name (<|>|=) (name|integer)`.

use std::fmt;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::ThinkError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Relation {
    Less,
    Greater,
    Equal,
}

impl Relation {
    pub fn symbol(self) -> char {
        match self {
            Relation::Less => '<',
            Relation::Greater => '>',
            Relation::Equal => '=',
        }
    }

    pub fn holds(self, left: i64, right: i64) -> bool {
        match self {
            Relation::Less => left < right,
            Relation::Greater => left > right,
            Relation::Equal => left == right,
        }
    }

    /// `<` and `>` swapped; `=` unchanged.
    pub fn reversed(self) -> Self {
        match self {
            Relation::Less => Relation::Greater,
            Relation::Greater => Relation::Less,
            Relation::Equal => Relation::Equal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Operand {
    Object(String),
    Position(i64),
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Object(name) => f.write_str(name),
            Operand::Position(p) => write!(f, "{p}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Comparison {
    pub left: Operand,
    pub relation: Relation,
    pub right: Operand,
}

impl Comparison {
    pub fn new(left: Operand, relation: Relation, right: Operand) -> Self {
        Self {
            left,
            relation,
            right,
        }
    }

    pub fn objects(&self) -> impl Iterator<Item = &str> {
        [&self.left, &self.right]
            .into_iter()
            .filter_map(|o| match o {
                Operand::Object(name) => Some(name.as_str()),
                Operand::Position(_) => None,
            })
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}{}", self.left, self.relation.symbol(), self.right)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintSet {
    pub constraints: Vec<Comparison>,
    pub object_names: Vec<String>,
}

impl ConstraintSet {
    pub fn n(&self) -> usize {
        self.object_names.len()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.object_names.iter().position(|o| o == name)
    }
}

impl fmt::Display for ConstraintSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.constraints.iter().enumerate() {
            if i > 0 {
                f.write_str("\n")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedConstraints {
    pub set: ConstraintSet,
    pub warnings: Vec<String>,
}

fn line_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"^(?:\(?[A-Za-z0-9]\)\s+|[-*•]\s+)?([^<>=]+?)\s*(==|<=|>=|!=|<|>|=)\s*([^<>=]+?)\s*[.;,]?$")
            .unwrap()
    })
}

fn normalize_name(text: &str) -> String {
    let lower = text.trim().to_lowercase();
    let mut words: Vec<&str> = lower.split_whitespace().collect();
    if words.len() > 1 && matches!(words[0], "the" | "a" | "an") {
        words.remove(0);
    }
    words.join(" ")
}

fn resolve(text: &str, object_names: &[String]) -> Result<Operand, String> {
    let trimmed = text.trim();
    if let Ok(r) = trimmed.parse::<i64>() {
        let n = object_names.len() as i64;
        return Ok(Operand::Position(if r < 0 { n + r + 1 } else { r }));
    }
    let key = normalize_name(trimmed);
    object_names
        .iter()
        .find(|o| normalize_name(o) == key)
        .map(|o| Operand::Object(o.clone()))
        .ok_or_else(|| format!("unknown object {trimmed:?}"))
}

/// Parses one comparison line. Negative integers `r` become `N + r + 1`.
pub fn parse_comparison(line: &str, object_names: &[String]) -> Result<Comparison, String> {
    let caps = line_regex()
        .captures(line.trim())
        .ok_or_else(|| format!("not a comparison: {:?}", line.trim()))?;
    let relation = match &caps[2] {
        "<" => Relation::Less,
        ">" => Relation::Greater,
        "=" | "==" => Relation::Equal,
        other => {
            return Err(format!(
                "unsupported relation {other:?} in {:?}",
                line.trim()
            ))
        }
    };
    let left = resolve(&caps[1], object_names)?;
    let right = resolve(&caps[3], object_names)?;
    if matches!(
        (&left, &right),
        (Operand::Position(_), Operand::Position(_))
    ) {
        return Err(format!("no object named in {:?}", line.trim()));
    }
    Ok(Comparison::new(left, relation, right))
}

/// Parses one constraint per line; lines outside the grammar become warnings.
pub fn parse_constraints(
    text: &str,
    object_names: &[String],
) -> Result<ParsedConstraints, ThinkError> {
    if object_names.len() < 2 {
        return Err(ThinkError::InvalidInput(format!(
            "need at least 2 objects, got {}",
            object_names.len()
        )));
    }
    let mut constraints = Vec::new();
    let mut warnings = Vec::new();
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
        match parse_comparison(line, object_names) {
            Ok(c) => constraints.push(c),
            Err(w) => warnings.push(w),
        }
    }
    if constraints.is_empty() {
        return Err(ThinkError::NoParseableLine { warnings });
    }
    Ok(ParsedConstraints {
        set: ConstraintSet {
            constraints,
            object_names: object_names.to_vec(),
        },
        warnings,
    })
}
