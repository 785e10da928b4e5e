//! Extractive QA through a working language: translate in, answer, translate back.

use serde_json::json;

use super::instance::labelled_line;
use super::{generate_text, Flag, Outcome, Session, TaskConfig, TaskError, TaskInstance};
use crate::think::{build_prompt, PromptRecipe};

/// Cuts a generated answer at the first period or line break.
pub fn truncate_answer(text: &str) -> &str {
    let cut = text.find(['.', '\n']).unwrap_or(text.len());
    text[..cut].trim()
}

fn passage_and_question(inst: &TaskInstance) -> Option<(String, String)> {
    if let (Some(p), Some(q)) = (inst.meta_str("passage"), inst.meta_str("question")) {
        return Some((p, q));
    }
    let lines: Vec<&str> = inst
        .input
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .collect();
    let question =
        labelled_line(&inst.input, "Question").or_else(|| lines.last().map(|l| l.to_string()))?;
    let passage = lines
        .iter()
        .filter(|l| !l.contains(question.as_str()))
        .map(|l| l.strip_prefix("Passage:").unwrap_or(l).trim())
        .collect::<Vec<_>>()
        .join("\n");
    (!passage.is_empty()).then_some((passage, question))
}

fn translate(
    s: &Session,
    cfg: &TaskConfig,
    source: &str,
    target: &str,
    text: &str,
) -> Result<String, TaskError> {
    let prompt = build_prompt(&PromptRecipe::Translation {
        source: source.to_string(),
        target: target.to_string(),
        text: text.to_string(),
    })?;
    Ok(
        generate_text(s, &prompt, &cfg.seeded(&cfg.translation_params))?
            .trim()
            .to_string(),
    )
}

fn empty(step: &str, details: serde_json::Value) -> Outcome {
    tracing::warn!(step, "empty generation; answering with the empty string");
    Outcome {
        chosen: String::new(),
        chosen_index: None,
        chosen_list: None,
        per_choice: Vec::new(),
        flags: vec![Flag::Warning(format!("empty {step}"))],
        details,
    }
}

pub fn solve_translation_qa(
    s: &Session,
    inst: &TaskInstance,
    cfg: &TaskConfig,
) -> Result<Outcome, TaskError> {
    let (passage, question) = passage_and_question(inst)
        .ok_or_else(|| TaskError::InvalidInstance("no passage and question found".into()))?;
    let (src, work) = (cfg.qa_language.as_str(), cfg.working_language.as_str());
    let passage_t = translate(s, cfg, src, work, &passage)?;
    if passage_t.is_empty() {
        return Ok(empty("passage translation", json!({})));
    }
    let question_t = translate(s, cfg, src, work, &question)?;
    if question_t.is_empty() {
        return Ok(empty(
            "question translation",
            json!({ "passage": passage_t }),
        ));
    }
    let mut params = cfg.seeded(&cfg.answer_params);
    params.stop_sequences = vec![".".into(), "\n".into()];
    let generated = generate_text(s, &format!("{passage_t}\n{question_t}"), &params)?;
    let answer = truncate_answer(&generated).to_string();
    let details = json!({ "passage": passage_t, "question": question_t, "answer": answer });
    if answer.is_empty() {
        return Ok(empty("answer", details));
    }
    let back = translate(s, cfg, work, src, &answer)?;
    let back = back.lines().next().unwrap_or("").trim().to_string();
    if back.is_empty() {
        return Ok(empty("back-translation", details));
    }
    Ok(Outcome {
        chosen: back,
        chosen_index: None,
        chosen_list: None,
        per_choice: Vec::new(),
        flags: Vec::new(),
        details,
    })
}
