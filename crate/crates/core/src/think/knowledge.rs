//! Turning generated facts into one-slot templates.

use std::sync::OnceLock;

use regex::Regex;

use super::parse::ParsedSet;
use super::template::SlotTemplate;

pub const KNOWLEDGE_SLOT: &str = "w";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnowledgeTemplate {
    /// The cleaned source sentence.
    pub sentence: String,
    /// The single object the sentence mentions.
    pub object: String,
    pub template: SlotTemplate,
}

/// Strips enumeration artifacts and collapses whitespace.
pub fn clean_statement(text: &str) -> String {
    let joined = text.split_whitespace().collect::<Vec<_>>().join(" ");
    static MARKER: OnceLock<Regex> = OnceLock::new();
    let marker = MARKER.get_or_init(|| Regex::new(r"^(?:\(?\d{1,3}[.):]|[-*•])\s*").unwrap());
    marker.replace(&joined, "").trim().to_string()
}

fn object_pattern(object: &str) -> Regex {
    let escaped = regex::escape(object.trim());
    let mut forms = vec![format!("{escaped}(?:s|es)?")];
    if let Some(stem) = object.trim().strip_suffix('y') {
        forms.push(format!("{}ies", regex::escape(stem)));
    }
    Regex::new(&format!(r"(?i)\b(?:{})\b", forms.join("|"))).unwrap()
}

/// Keeps sentences of at least 3 words mentioning exactly one of `objects`,
/// and replaces every mention of that object with `{{w}}`.
pub fn postprocess_knowledge(statements: &ParsedSet, objects: &[String]) -> Vec<KnowledgeTemplate> {
    let patterns: Vec<(usize, Regex)> = objects
        .iter()
        .enumerate()
        .filter(|(_, o)| !o.trim().is_empty())
        .map(|(i, o)| (i, object_pattern(o)))
        .collect();
    let mut out = Vec::new();
    for raw in &statements.items {
        let sentence = clean_statement(raw);
        if sentence.split_whitespace().count() < 3
            || sentence.contains('{')
            || sentence.contains('}')
        {
            continue;
        }
        let mut hits: Vec<(usize, usize, usize)> = Vec::new();
        for (idx, re) in &patterns {
            hits.extend(re.find_iter(&sentence).map(|m| (*idx, m.start(), m.end())));
        }
        // A mention nested inside a longer mention ("ice" in "ice cream") does not count.
        let kept: Vec<(usize, usize, usize)> = hits
            .iter()
            .copied()
            .filter(|&(i, s, e)| {
                !hits
                    .iter()
                    .any(|&(j, s2, e2)| j != i && s2 <= s && e <= e2 && (e2 - s2) > (e - s))
            })
            .collect();
        let mut mentioned: Vec<usize> = kept.iter().map(|h| h.0).collect();
        mentioned.sort_unstable();
        mentioned.dedup();
        if mentioned.len() != 1 {
            continue;
        }
        let object = mentioned[0];
        let mut spans: Vec<(usize, usize)> = kept.iter().map(|h| (h.1, h.2)).collect();
        spans.sort_unstable();
        let mut raw_template = String::with_capacity(sentence.len());
        let mut last = 0;
        for (s, e) in spans {
            if s < last {
                continue;
            }
            raw_template.push_str(&sentence[last..s]);
            raw_template.push_str("{{");
            raw_template.push_str(KNOWLEDGE_SLOT);
            raw_template.push_str("}}");
            last = e;
        }
        raw_template.push_str(&sentence[last..]);
        let Ok(template) = SlotTemplate::parse(&raw_template) else {
            continue;
        };
        out.push(KnowledgeTemplate {
            sentence,
            object: objects[object].clone(),
            template,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn objs(list: &[&str]) -> Vec<String> {
        list.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn keeps_single_object_sentences() {
        let set = ParsedSet::from_items(["Bananas are fruits.", "Blue and pink are colors."]);
        let out = postprocess_knowledge(&set, &objs(&["banana", "blue", "pink", "magenta"]));
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].object, "banana");
        assert_eq!(out[0].template.raw(), "{{w}} are fruits.");
    }

    #[test]
    fn short_sentences_dropped() {
        let set = ParsedSet::from_items(["Nice one.", "Banana."]);
        assert!(postprocess_knowledge(&set, &objs(&["banana"])).is_empty());
    }

    #[test]
    fn empty_input() {
        assert!(postprocess_knowledge(&ParsedSet::default(), &objs(&["x"])).is_empty());
    }

    #[test]
    fn cleaning_and_inflections() {
        let set = ParsedSet::from_items(["3.  Ponies   are small horses."]);
        let out = postprocess_knowledge(&set, &objs(&["pony", "cat"]));
        assert_eq!(out[0].sentence, "Ponies are small horses.");
        assert_eq!(out[0].template.raw(), "{{w}} are small horses.");
    }

    #[test]
    fn nested_mentions_resolved_to_longest() {
        let set = ParsedSet::from_items(["Ice cream is a cold dessert."]);
        let out = postprocess_knowledge(&set, &objs(&["ice", "ice cream", "soup"]));
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].object, "ice cream");
    }

    #[test]
    fn repeated_mentions_all_replaced() {
        let set = ParsedSet::from_items(["A head holds the head of state."]);
        let out = postprocess_knowledge(&set, &objs(&["head", "arm"]));
        assert_eq!(out[0].template.raw(), "A {{w}} holds the {{w}} of state.");
        assert_eq!(out[0].template.slots().len(), 1);
    }

    proptest! {
        #[test]
        fn templates_have_exactly_one_slot(
            sentences in proptest::collection::vec("[a-z ]{0,12}(cat|dog|owl)?[a-z ]{0,12}(cat|dog|owl)?[a-z .]{0,10}", 0..10)
        ) {
            let set = ParsedSet::from_items(&sentences);
            for t in postprocess_knowledge(&set, &objs(&["cat", "dog", "owl"])) {
                prop_assert_eq!(t.template.slots(), [KNOWLEDGE_SLOT.to_string()]);
            }
        }
    }
}
