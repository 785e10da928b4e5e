//! Invented words and novel concepts: substitute generated or given words into
//! each candidate statement and compare against the bare statement.

use regex::Regex;
use serde_json::json;

use super::instance::{nonce_definitions, numbered_items};
use super::{generate_text, Flag, Outcome, Session, TaskConfig, TaskError, TaskInstance};
use crate::sum::{log_mean_exp, product_aggregate};
use crate::think::{
    build_prompt, parse_list_output, ExampleSubject, PromptRecipe, SlotTemplate, KNOWLEDGE_SLOT,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MixtureKind {
    InventedWords,
    NovelConcepts,
}

fn article(word: &str) -> &'static str {
    match word.chars().next().map(|c| c.to_ascii_lowercase()) {
        Some('a' | 'e' | 'i' | 'o' | 'u') => "An",
        _ => "A",
    }
}

/// "A bam is a simple sort of dwelling".
pub(crate) fn definition_sentence(word: &str, definition: &str) -> String {
    format!(
        "{} {word} is {}",
        article(word),
        definition.trim().trim_end_matches('.')
    )
}

/// Replaces each nonce word (and inflected forms starting with it) by slot `x{k}`.
/// Longer tokens such as "bams" take the plural filter.
pub(crate) fn nonce_template(
    statement: &str,
    nonce: &[String],
) -> Result<(SlotTemplate, usize), TaskError> {
    let mut sorted: Vec<(usize, &String)> = nonce.iter().enumerate().collect();
    sorted.sort_by_key(|(_, w)| std::cmp::Reverse(w.len()));
    let alternation = sorted
        .iter()
        .map(|(_, w)| format!("({})", regex::escape(w)))
        .collect::<Vec<_>>()
        .join("|");
    let re = Regex::new(&format!(r"(?i)\b(?:{alternation})(\w*)")).expect("escaped alternation");
    let mut hits = 0;
    let raw = re.replace_all(statement, |c: &regex::Captures| {
        hits += 1;
        let slot = (1..=sorted.len())
            .find(|&g| c.get(g).is_some())
            .map(|g| sorted[g - 1].0)
            .expect("one alternative matched");
        let suffix = c.get(sorted.len() + 1).map_or("", |m| m.as_str());
        if suffix.is_empty() {
            format!("{{{{x{slot}}}}}")
        } else {
            format!("{{{{x{slot}|plural}}}}")
        }
    });
    Ok((SlotTemplate::parse(&raw)?, hits))
}

fn examples_for(
    s: &Session,
    word: &str,
    definition: &str,
    cfg: &TaskConfig,
) -> Result<Vec<String>, TaskError> {
    let prompt = build_prompt(&PromptRecipe::ExampleGeneration {
        subject: ExampleSubject::Definition(definition_sentence(word, definition)),
        count: cfg.invented_examples,
        demonstration: None,
    })?;
    let text = generate_text(s, &prompt, &cfg.seeded(&cfg.example_params))?;
    let mut items = parse_list_output(&text).items;
    items.retain(|i| !i.eq_ignore_ascii_case(word));
    items.truncate(cfg.invented_examples);
    Ok(items)
}

/// Every combination of one entry per set, first set varying slowest.
fn cartesian(sets: &[Vec<String>]) -> Vec<Vec<&str>> {
    let mut out: Vec<Vec<&str>> = vec![Vec::new()];
    for set in sets {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                set.iter().map(move |w| {
                    let mut next = prefix.clone();
                    next.push(w.as_str());
                    next
                })
            })
            .collect();
    }
    out
}

fn invented_words(
    s: &Session,
    inst: &TaskInstance,
    cfg: &TaskConfig,
) -> Result<Outcome, TaskError> {
    let defs = match inst.metadata.get("definitions").and_then(|v| v.as_object()) {
        Some(map) => map
            .iter()
            .filter_map(|(k, v)| v.as_str().map(|d| (k.clone(), d.to_string())))
            .collect(),
        None => nonce_definitions(&inst.input),
    };
    if defs.is_empty() || inst.choices.is_empty() {
        return Err(TaskError::InvalidInstance(
            "invented words needs definitions and statements".into(),
        ));
    }
    let mut flags = Vec::new();
    let mut sets = Vec::with_capacity(defs.len());
    for (word, def) in &defs {
        let examples = examples_for(s, word, def, cfg)?;
        if examples.is_empty() {
            let msg = format!("no examples generated for {word:?}; keeping the word itself");
            tracing::warn!("{msg}");
            flags.push(Flag::Warning(msg));
            sets.push(vec![word.clone()]);
        } else {
            sets.push(examples);
        }
    }
    let nonce: Vec<String> = defs.iter().map(|(w, _)| w.clone()).collect();
    let combos = cartesian(&sets);
    let slot_names: Vec<String> = (0..nonce.len()).map(|k| format!("x{k}")).collect();

    let mut texts = Vec::new();
    let mut spans = Vec::with_capacity(inst.choices.len());
    for statement in &inst.choices {
        let (template, hits) = nonce_template(statement, &nonce)?;
        if hits == 0 {
            flags.push(Flag::Warning(format!(
                "statement {statement:?} mentions no invented word"
            )));
        }
        let start = texts.len();
        texts.push(statement.clone());
        for combo in &combos {
            let bindings: Vec<(&str, &str)> = slot_names
                .iter()
                .map(String::as_str)
                .zip(combo.iter().copied())
                .collect();
            texts.push(template.render(&bindings, true)?);
        }
        spans.push(start..texts.len());
    }
    let logs: Vec<f64> = s
        .score_full_batch(&texts)?
        .iter()
        .map(|q| q.log_likelihood)
        .collect();
    let scores = spans
        .iter()
        .map(|r| Ok(log_mean_exp(&logs[r.start + 1..r.end])? - logs[r.start]))
        .collect::<Result<Vec<f64>, TaskError>>()?;
    let mut out = Outcome::pick(&inst.choices, &scores)?.with_details(json!({ "examples": sets }));
    out.flags.extend(flags);
    Ok(out)
}

fn concept_words(inst: &TaskInstance) -> Result<Vec<String>, TaskError> {
    if let Some(words) = inst.meta_strings("words") {
        return Ok(words);
    }
    let items = numbered_items(&inst.input);
    if items.is_empty() {
        return Err(TaskError::InvalidInstance("no concept words found".into()));
    }
    Ok(items)
}

/// "They all make noise." becomes "{{w}} make noise."
fn they_all_template(statement: &str) -> Result<(SlotTemplate, bool), TaskError> {
    let re = Regex::new(r"(?i)\bthey all\b").expect("static pattern");
    let found = re.is_match(statement);
    let raw = re.replace_all(statement, format!("{{{{{KNOWLEDGE_SLOT}}}}}").as_str());
    Ok((SlotTemplate::parse(&raw)?, found))
}

fn novel_concepts(s: &Session, inst: &TaskInstance) -> Result<Outcome, TaskError> {
    let words = concept_words(inst)?;
    if inst.choices.is_empty() {
        return Err(TaskError::InvalidInstance(
            "novel concepts needs statements".into(),
        ));
    }
    let mut flags = Vec::new();
    let mut texts = Vec::new();
    for statement in &inst.choices {
        let (template, found) = they_all_template(statement)?;
        if !found {
            flags.push(Flag::Warning(format!(
                "statement {statement:?} has no \"They all\" subject"
            )));
        }
        texts.push(statement.clone());
        for w in &words {
            texts.push(template.render(&[(KNOWLEDGE_SLOT, w.as_str())], true)?);
        }
    }
    let logs: Vec<f64> = s
        .score_full_batch(&texts)?
        .iter()
        .map(|q| q.log_likelihood)
        .collect();
    let stride = words.len() + 1;
    let scores = logs
        .chunks(stride)
        .map(|row| {
            let ratios: Vec<f64> = row[1..].iter().map(|l| l - row[0]).collect();
            Ok(product_aggregate(&ratios)?)
        })
        .collect::<Result<Vec<f64>, TaskError>>()?;
    let mut out = Outcome::pick(&inst.choices, &scores)?;
    out.flags.extend(flags);
    Ok(out)
}

pub fn solve_substitution_mixture(
    s: &Session,
    inst: &TaskInstance,
    cfg: &TaskConfig,
    kind: MixtureKind,
) -> Result<Outcome, TaskError> {
    match kind {
        MixtureKind::InventedWords => invented_words(s, inst, cfg),
        MixtureKind::NovelConcepts => novel_concepts(s, inst),
    }
}
