//! `{{name}}` slot templates and substitution with optional normalization.

use std::collections::HashSet;
use std::fmt;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::grammar::{agree_verb, article_for, capitalize, is_plural_phrase, pluralize};
use super::ThinkError;

fn slot_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"\{\{\s*([A-Za-z_][A-Za-z0-9_]*)\s*(?:\|\s*([A-Za-z_]+)\s*)?\}\}").unwrap()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Inflection {
    None,
    Plural,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment {
    Text(String),
    Slot {
        name: String,
        inflection: Inflection,
    },
}

/// Text with named `{{slot}}` markers; `{{slot|plural}}` pluralizes the bound value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotTemplate {
    raw: String,
    segments: Vec<Segment>,
    slots: Vec<String>,
}

impl SlotTemplate {
    pub fn parse(raw: &str) -> Result<Self, ThinkError> {
        let mut segments = Vec::new();
        let mut slots = Vec::new();
        let mut last = 0;
        for caps in slot_regex().captures_iter(raw) {
            let whole = caps.get(0).unwrap();
            if whole.start() > last {
                segments.push(Segment::Text(raw[last..whole.start()].to_string()));
            }
            let name = caps[1].to_string();
            let inflection = match caps.get(2).map(|m| m.as_str()) {
                None => Inflection::None,
                Some("plural") => Inflection::Plural,
                Some(other) => {
                    return Err(ThinkError::InvalidTemplate(format!(
                        "unknown filter {other:?} on slot {name:?}"
                    )))
                }
            };
            if !slots.contains(&name) {
                slots.push(name.clone());
            }
            segments.push(Segment::Slot { name, inflection });
            last = whole.end();
        }
        if last < raw.len() {
            segments.push(Segment::Text(raw[last..].to_string()));
        }
        for seg in &segments {
            if let Segment::Text(t) = seg {
                if t.contains("{{") || t.contains("}}") {
                    return Err(ThinkError::InvalidTemplate(format!(
                        "unbalanced or malformed slot marker in {raw:?}"
                    )));
                }
            }
        }
        Ok(Self {
            raw: raw.to_string(),
            segments,
            slots,
        })
    }

    pub fn raw(&self) -> &str {
        &self.raw
    }

    /// Distinct slot names in order of first appearance.
    pub fn slots(&self) -> &[String] {
        &self.slots
    }

    /// Number of slot occurrences (a name used twice counts twice).
    pub fn slot_occurrences(&self) -> usize {
        self.segments
            .iter()
            .filter(|s| matches!(s, Segment::Slot { .. }))
            .count()
    }

    pub fn render(&self, bindings: &[(&str, &str)], normalize: bool) -> Result<String, ThinkError> {
        let known: HashSet<&str> = self.slots.iter().map(String::as_str).collect();
        for (name, _) in bindings {
            if !known.contains(name) {
                tracing::warn!(slot = name, template = %self.raw, "binding for unknown slot ignored");
            }
        }
        let lookup = |name: &str| {
            bindings
                .iter()
                .find(|(n, _)| *n == name)
                .map(|(_, v)| *v)
                .ok_or_else(|| ThinkError::MissingBinding(name.to_string()))
        };

        let mut out = String::with_capacity(self.raw.len() + 16);
        // Number of the last slot value, pending agreement with the next text segment.
        let mut pending_plural: Option<bool> = None;
        for seg in &self.segments {
            match seg {
                Segment::Text(text) => match pending_plural.take() {
                    Some(plural) if normalize => out.push_str(&agree_leading_verb(text, plural)),
                    _ => out.push_str(text),
                },
                Segment::Slot { name, inflection } => {
                    let mut value = lookup(name)?.to_string();
                    if *inflection == Inflection::Plural {
                        value = pluralize(&value);
                    }
                    if normalize {
                        fix_preceding_article(&mut out, &value);
                        if at_sentence_start(&out) {
                            value = capitalize(&value);
                        } else {
                            value = lowercase_article(&value);
                        }
                        pending_plural = Some(is_plural_phrase(&value));
                    }
                    out.push_str(&value);
                }
            }
        }
        Ok(out)
    }
}

impl fmt::Display for SlotTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.raw)
    }
}

fn at_sentence_start(out: &str) -> bool {
    let trimmed = out.trim_end();
    trimmed.is_empty()
        || out.ends_with('\n')
        || (out.ends_with(char::is_whitespace) && trimmed.ends_with(['.', '!', '?']))
}

fn lowercase_article(value: &str) -> String {
    for art in ["A ", "An ", "The "] {
        if let Some(rest) = value.strip_prefix(art) {
            return format!("{}{}", art.to_lowercase(), rest);
        }
    }
    value.to_string()
}

/// Rewrites a trailing "a " / "an " in `out` to match the first letter of `value`.
fn fix_preceding_article(out: &mut String, value: &str) {
    let Some(body) = out.strip_suffix(' ') else {
        return;
    };
    let start = body
        .rfind(|c: char| !c.is_alphabetic())
        .map_or(0, |i| i + 1);
    let word = &body[start..];
    if !word.eq_ignore_ascii_case("a") && !word.eq_ignore_ascii_case("an") {
        return;
    }
    let fixed = article_for(word, value);
    out.replace_range(start..body.len(), &fixed);
}

/// Makes the first word of `text` agree in number with the preceding slot value.
fn agree_leading_verb(text: &str, plural: bool) -> String {
    let Some(rest) = text.strip_prefix(' ') else {
        return text.to_string();
    };
    let end = rest
        .find(|c: char| !(c.is_alphabetic() || c == '\''))
        .unwrap_or(rest.len());
    match agree_verb(&rest[..end], plural) {
        Some(verb) => format!(" {verb}{}", &rest[end..]),
        None => text.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn renders_figure_example() {
        let t = SlotTemplate::parse("A {{x}} bam is a place for {{y}}.").unwrap();
        assert_eq!(t.slots(), ["x", "y"]);
        let out = t.render(&[("x", "binne"), ("y", "animals")], true).unwrap();
        assert_eq!(out, "A binne bam is a place for animals.");
    }

    #[test]
    fn zero_slots_verbatim() {
        let t = SlotTemplate::parse("No slots here.").unwrap();
        assert!(t.slots().is_empty());
        assert_eq!(t.render(&[], true).unwrap(), "No slots here.");
    }

    #[test]
    fn agreement_and_capitalization() {
        let t = SlotTemplate::parse("{{w}} are large.").unwrap();
        assert_eq!(
            t.render(&[("w", "a cat")], true).unwrap(),
            "A cat is large."
        );
        assert_eq!(t.render(&[("w", "cats")], true).unwrap(), "Cats are large.");
        assert_eq!(
            t.render(&[("w", "a cat")], false).unwrap(),
            "a cat are large."
        );
    }

    #[test]
    fn article_correction() {
        let t = SlotTemplate::parse("It is a {{w}}.").unwrap();
        assert_eq!(t.render(&[("w", "owl")], true).unwrap(), "It is an owl.");
        let t = SlotTemplate::parse("It is an {{w}}.").unwrap();
        assert_eq!(t.render(&[("w", "cat")], true).unwrap(), "It is a cat.");
    }

    #[test]
    fn plural_filter() {
        let t = SlotTemplate::parse("{{w|plural}} are animals.").unwrap();
        assert_eq!(
            t.render(&[("w", "pony")], true).unwrap(),
            "Ponies are animals."
        );
    }

    #[test]
    fn missing_binding_errors() {
        let t = SlotTemplate::parse("{{a}} and {{b}}").unwrap();
        assert_eq!(
            t.render(&[("a", "x")], false),
            Err(ThinkError::MissingBinding("b".into()))
        );
    }

    #[test]
    fn unknown_binding_ignored() {
        let t = SlotTemplate::parse("{{a}}!").unwrap();
        assert_eq!(t.render(&[("a", "x"), ("zz", "y")], false).unwrap(), "x!");
    }

    #[test]
    fn malformed_markers_rejected() {
        assert!(SlotTemplate::parse("{{a").is_err());
        assert!(SlotTemplate::parse("{{a|shout}}").is_err());
    }

    #[test]
    fn repeated_slot_listed_once() {
        let t = SlotTemplate::parse("{{w}} or {{w}}").unwrap();
        assert_eq!(t.slots(), ["w"]);
        assert_eq!(t.slot_occurrences(), 2);
        assert_eq!(t.render(&[("w", "q")], false).unwrap(), "q or q");
    }

    proptest! {
        #[test]
        fn substitution_is_local(
            pre in "[a-zA-Z .,]{0,20}",
            mid in "[a-zA-Z .,]{0,20}",
            post in "[a-zA-Z .,]{0,20}",
            x in "[a-zA-Z ]{1,12}",
            y in "[a-zA-Z ]{1,12}",
        ) {
            let raw = format!("{pre}{{{{x}}}}{mid}{{{{y}}}}{post}");
            let t = SlotTemplate::parse(&raw).unwrap();
            let out = t.render(&[("x", &x), ("y", &y)], false).unwrap();
            prop_assert_eq!(out, format!("{pre}{x}{mid}{y}{post}"));
        }

        #[test]
        fn complete_binding_leaves_no_markers(names in proptest::collection::vec("[a-z]{1,5}", 1..5)) {
            let raw = names.iter().map(|n| format!("{{{{{n}}}}}")).collect::<Vec<_>>().join(" - ");
            let t = SlotTemplate::parse(&raw).unwrap();
            let bindings: Vec<(&str, &str)> = names.iter().map(|n| (n.as_str(), "v")).collect();
            let out = t.render(&bindings, true).unwrap();
            prop_assert!(!out.contains("{{") && !out.contains("}}"));
        }
    }
}
