//! Baselines: direct scoring, prepended generated knowledge, and chain of thought.

use serde_json::json;

use super::{
    direct_outcome, generate_text, Flag, Outcome, Session, TaskConfig, TaskError, TaskInstance,
};
use crate::think::{
    build_prompt, format_options_question, parse_list_output, postprocess_knowledge, CotTask,
    PromptRecipe,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineKind {
    Direct,
    AuxiliaryKnowledge,
    ChainOfThought,
}

fn auxiliary_knowledge(
    s: &Session,
    inst: &TaskInstance,
    cfg: &TaskConfig,
) -> Result<Outcome, TaskError> {
    let items = inst
        .meta_strings("words")
        .unwrap_or_else(|| inst.choices.clone());
    let prompt = build_prompt(&PromptRecipe::ListDifferences {
        items: items.clone(),
        count: cfg.differences,
    })?;
    let text = generate_text(s, &prompt, &cfg.seeded(&cfg.fact_params))?;
    let facts: Vec<String> = postprocess_knowledge(&parse_list_output(&text), &items)
        .into_iter()
        .map(|t| t.sentence)
        .collect();
    let prompt = build_prompt(&PromptRecipe::AuxiliaryKnowledge {
        facts: facts.clone(),
        question: inst.input.clone(),
    })?;
    let mut out = direct_outcome(s, &prompt, &inst.choices, cfg)?;
    if facts.is_empty() {
        out.flags
            .push(Flag::Warning("no usable generated facts".into()));
    }
    Ok(out.with_details(json!({ "facts": facts })))
}

fn cot_task(inst: &TaskInstance, cfg: &TaskConfig) -> Result<CotTask, TaskError> {
    match inst.metadata.get("cot_task") {
        Some(v) => serde_json::from_value(v.clone())
            .map_err(|e| TaskError::InvalidInstance(format!("cot_task: {e}"))),
        None => cfg
            .cot_task
            .ok_or_else(|| TaskError::InvalidInstance("chain of thought needs a cot_task".into())),
    }
}

/// The question laid out like the task's demonstration.
pub(crate) fn cot_question(task: CotTask, inst: &TaskInstance) -> String {
    match task {
        CotTask::OddOneOut => {
            let words = inst
                .meta_strings("words")
                .unwrap_or_else(|| inst.choices.clone());
            format!("Words: {}", words.join(", "))
        }
        _ => format_options_question(&inst.input, &inst.choices),
    }
}

fn chain_of_thought(
    s: &Session,
    inst: &TaskInstance,
    cfg: &TaskConfig,
) -> Result<Outcome, TaskError> {
    let task = cot_task(inst, cfg)?;
    let prompt = build_prompt(&PromptRecipe::ChainOfThought {
        task,
        question: cot_question(task, inst),
    })?;
    let prefix = task.answer_prefix();
    let rationale = generate_text(s, &format!("{prompt}\n"), &cfg.seeded(&cfg.answer_params))?;
    let kept = rationale
        .find(prefix)
        .map_or(rationale.as_str(), |i| &rationale[..i])
        .trim();
    let separator = if task == CotTask::OddOneOut {
        " "
    } else {
        "\n"
    };
    let context = if kept.is_empty() {
        format!("{prompt}\n{prefix}")
    } else {
        format!("{prompt}\n{kept}{separator}{prefix}")
    };
    let mut out = direct_outcome(s, &context, &inst.choices, cfg)?;
    if kept.is_empty() {
        out.flags.push(Flag::Warning("empty rationale".into()));
    }
    Ok(out.with_details(json!({ "rationale": kept })))
}

pub fn solve_baseline(
    s: &Session,
    inst: &TaskInstance,
    cfg: &TaskConfig,
    kind: BaselineKind,
) -> Result<Outcome, TaskError> {
    match kind {
        BaselineKind::Direct => direct_outcome(s, inst.input.trim(), &inst.choices, cfg),
        BaselineKind::AuxiliaryKnowledge => auxiliary_knowledge(s, inst, cfg),
        BaselineKind::ChainOfThought => chain_of_thought(s, inst, cfg),
    }
}
