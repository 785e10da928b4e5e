//! Order inversion: score the stimulus given each candidate answer.

use serde_json::json;

use super::instance::{emoji_clusters, labelled_line};
use super::{generate_text, Flag, Outcome, Session, TaskConfig, TaskError, TaskInstance};
use crate::sum::product_aggregate;
use crate::think::{build_prompt, InversionFrame, PromptRecipe};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InversionKind {
    EmojiMovie,
    /// Each emoji is first translated to a word; the words are scored instead.
    EmojiMovieTranslated,
    LanguageId,
    CodeLine,
}

/// `log p(stimulus | frame(choice))` for every choice.
fn inverted_scores(
    s: &Session,
    frame: InversionFrame,
    stimulus: &str,
    choices: &[String],
) -> Result<Vec<f64>, TaskError> {
    let queries: Vec<(String, String)> = choices
        .iter()
        .map(|c| (frame.prompt(c.trim()), frame.stimulus(stimulus)))
        .collect();
    Ok(s.score_batch(&queries)?
        .iter()
        .map(|q| q.log_likelihood)
        .collect())
}

fn emoji_stimulus(inst: &TaskInstance) -> Result<Vec<String>, TaskError> {
    let text = inst.meta_str("emoji").unwrap_or_else(|| inst.input.clone());
    let clusters = emoji_clusters(&text);
    if clusters.is_empty() {
        return Err(TaskError::InvalidInstance("no emoji in the input".into()));
    }
    Ok(clusters)
}

fn emoji_movie(s: &Session, inst: &TaskInstance) -> Result<Outcome, TaskError> {
    let stimulus = emoji_stimulus(inst)?.concat();
    let scores = inverted_scores(s, InversionFrame::EmojiMovie, &stimulus, &inst.choices)?;
    Outcome::pick(&inst.choices, &scores)
}

fn first_word(text: &str) -> Option<String> {
    text.split(|c: char| c.is_whitespace() || c == ',' || c == '.')
        .find(|w| w.chars().any(char::is_alphanumeric))
        .map(|w| {
            w.trim_matches(|c: char| !c.is_alphanumeric() && c != '-' && c != '\'')
                .to_string()
        })
        .filter(|w| !w.is_empty())
}

fn emoji_movie_translated(
    s: &Session,
    inst: &TaskInstance,
    cfg: &TaskConfig,
) -> Result<Outcome, TaskError> {
    let clusters = emoji_stimulus(inst)?;
    let mut words = Vec::with_capacity(clusters.len());
    for e in &clusters {
        let prompt = build_prompt(&PromptRecipe::Translation {
            source: "Emoji".into(),
            target: cfg.working_language.clone(),
            text: e.clone(),
        })?;
        let text = generate_text(s, &prompt, &cfg.seeded(&cfg.translation_params))?;
        match first_word(&text) {
            Some(w) => words.push(w),
            None => {
                let reason = format!("no translation for emoji {e:?}");
                tracing::warn!(%reason, "scoring raw emoji");
                return Ok(emoji_movie(s, inst)?.flag(Flag::Fallback(reason)));
            }
        }
    }
    let stimulus = words.join(" ");
    let scores = inverted_scores(s, InversionFrame::WordsMovie, &stimulus, &inst.choices)?;
    Ok(Outcome::pick(&inst.choices, &scores)?.with_details(json!({ "words": words })))
}

/// The sentence to identify: a "Sentence:" line, else the longest line that is not
/// instructions or an option.
pub(crate) fn language_sentence(inst: &TaskInstance) -> Option<String> {
    inst.meta_str("sentence")
        .or_else(|| labelled_line(&inst.input, "Sentence"))
        .or_else(|| {
            inst.input
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with("Given") && !l.starts_with("Option"))
                .max_by_key(|l| l.chars().count())
                .map(str::to_string)
        })
}

fn language_id(s: &Session, inst: &TaskInstance) -> Result<Outcome, TaskError> {
    let sentence = language_sentence(inst)
        .ok_or_else(|| TaskError::InvalidInstance("no sentence found".into()))?;
    let scores = inverted_scores(s, InversionFrame::LanguageId, &sentence, &inst.choices)?;
    Outcome::pick(&inst.choices, &scores)
}

/// Code between ``` fences if present, else the input minus trailing prompt lines.
pub(crate) fn code_block(inst: &TaskInstance) -> String {
    if let Some(code) = inst.meta_str("code") {
        return code;
    }
    let parts: Vec<&str> = inst.input.split("```").collect();
    if parts.len() >= 3 {
        let body = parts[1];
        let body = body.strip_prefix("python").unwrap_or(body);
        return body.trim_matches('\n').to_string();
    }
    inst.input
        .lines()
        .filter(|l| !l.trim_start().starts_with("English language description"))
        .collect::<Vec<_>>()
        .join("\n")
        .trim_matches('\n')
        .to_string()
}

/// Rewrites leading indentation so that one nesting level is `width` spaces.
/// The source unit is the smallest non-zero indentation; tabs count as one level.
pub fn reindent(code: &str, width: usize) -> String {
    let lead = |l: &str| -> usize {
        l.chars()
            .take_while(|c| *c == ' ' || *c == '\t')
            .map(|c| if c == '\t' { 0 } else { 1 })
            .sum()
    };
    let tabs = |l: &str| {
        l.chars()
            .take_while(|c| *c == ' ' || *c == '\t')
            .filter(|c| *c == '\t')
            .count()
    };
    let unit = code
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(lead)
        .filter(|&n| n > 0)
        .min()
        .unwrap_or(1);
    code.lines()
        .map(|l| {
            if l.trim().is_empty() {
                return String::new();
            }
            let levels = tabs(l) + lead(l) / unit;
            format!("{}{}", " ".repeat(levels * width), l.trim_start())
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn code_line(s: &Session, inst: &TaskInstance, cfg: &TaskConfig) -> Result<Outcome, TaskError> {
    let code = code_block(inst);
    if code.trim().is_empty() {
        return Err(TaskError::InvalidInstance("no code found".into()));
    }
    let frame = InversionFrame::CodeComment;
    let mut queries = Vec::new();
    for c in &inst.choices {
        for &w in &cfg.indent_widths {
            queries.push((frame.prompt(c.trim()), frame.stimulus(&reindent(&code, w))));
        }
    }
    let logs: Vec<f64> = s
        .score_batch(&queries)?
        .iter()
        .map(|q| q.log_likelihood)
        .collect();
    let scores = logs
        .chunks(cfg.indent_widths.len())
        .map(|row| Ok(product_aggregate(row)?))
        .collect::<Result<Vec<f64>, TaskError>>()?;
    Outcome::pick(&inst.choices, &scores)
}

pub fn solve_order_inversion_choice(
    s: &Session,
    inst: &TaskInstance,
    cfg: &TaskConfig,
    kind: InversionKind,
) -> Result<Outcome, TaskError> {
    if inst.choices.is_empty() {
        return Err(TaskError::InvalidInstance(
            "order inversion needs choices".into(),
        ));
    }
    match kind {
        InversionKind::EmojiMovie => emoji_movie(s, inst),
        InversionKind::EmojiMovieTranslated => emoji_movie_translated(s, inst, cfg),
        InversionKind::LanguageId => language_id(s, inst),
        InversionKind::CodeLine => code_line(s, inst, cfg),
    }
}
