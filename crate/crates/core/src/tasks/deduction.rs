//! Logical deduction: translate the puzzle to (in)equalities, then marginalize
//! candidate statements over object placements.

use std::sync::OnceLock;

use regex::Regex;
use serde_json::json;

use super::instance::deduction_objects;
use super::{
    fallback_direct, generate_text, EvaluatorChoice, Flag, Outcome, Session, TaskConfig, TaskError,
    TaskInstance,
};
use crate::sum::{
    deduction_candidate_posterior, BackendEvaluator, ComparisonEvaluator, ExternalEvaluator,
};
use crate::think::{
    build_prompt, parse_comparison, parse_constraints, Comparison, PromptRecipe, ThinkError,
    TRANSLATED_STATEMENTS_HEADER,
};

/// Candidate comparisons in choice order, from lines like "(B) ball=1".
/// Returns the index of the first choice without a parseable line on failure.
pub(crate) fn parse_candidates(
    text: &str,
    objects: &[String],
    n_choices: usize,
) -> Result<Vec<Comparison>, usize> {
    static LETTER: OnceLock<Regex> = OnceLock::new();
    let letter = LETTER.get_or_init(|| Regex::new(r"^\(?([A-Za-z])\)\s*(.+)$").unwrap());
    let mut slots: Vec<Option<Comparison>> = vec![None; n_choices];
    let mut next = 0;
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
        let (index, body) = match letter.captures(line) {
            Some(c) => {
                let ch = c[1].chars().next().unwrap().to_ascii_uppercase();
                ((ch as u8 - b'A') as usize, c[2].to_string())
            }
            None => (next, line.to_string()),
        };
        next = index + 1;
        if index < n_choices && slots[index].is_none() {
            if let Ok(cmp) = parse_comparison(&body, objects) {
                slots[index] = Some(cmp);
            }
        }
    }
    slots
        .into_iter()
        .enumerate()
        .map(|(i, s)| s.ok_or(i))
        .collect()
}

pub fn solve_logical_deduction(
    s: &Session,
    inst: &TaskInstance,
    cfg: &TaskConfig,
) -> Result<Outcome, TaskError> {
    let objects = inst
        .meta_strings("objects")
        .or_else(|| deduction_objects(&inst.input))
        .ok_or_else(|| TaskError::InvalidInstance("no object list found".into()))?;
    if inst.choices.is_empty() {
        return Err(TaskError::InvalidInstance(
            "logical deduction needs candidate statements".into(),
        ));
    }
    let prompt = build_prompt(&PromptRecipe::FormalTranslation {
        problem: inst.input.trim().to_string(),
        statements: inst.choices.clone(),
        object_count: objects.len(),
    })?;
    let text = generate_text(s, &prompt, &cfg.seeded(&cfg.formal_translation_params))?;
    let Some((constraint_text, candidate_text)) = text.split_once(TRANSLATED_STATEMENTS_HEADER)
    else {
        return fallback_direct(s, inst, cfg, "translation has no translated statements");
    };
    let parsed = match parse_constraints(constraint_text, &objects) {
        Ok(p) => p,
        Err(e @ (ThinkError::NoParseableLine { .. } | ThinkError::InvalidInput(_))) => {
            return fallback_direct(s, inst, cfg, e.to_string());
        }
        Err(e) => return Err(e.into()),
    };
    let candidates = match parse_candidates(candidate_text, &objects, inst.choices.len()) {
        Ok(c) => c,
        Err(i) => {
            return fallback_direct(
                s,
                inst,
                cfg,
                format!("no translated statement for choice {}", i + 1),
            );
        }
    };
    let external;
    let backend;
    let evaluator: &dyn ComparisonEvaluator = match cfg.evaluator {
        EvaluatorChoice::External { p_true, p_false } => {
            external = ExternalEvaluator { p_true, p_false };
            &external
        }
        EvaluatorChoice::Backend => {
            backend = BackendEvaluator::new(s);
            &backend
        }
    };
    let result = deduction_candidate_posterior(&parsed.set, &candidates, cfg.deduction, evaluator)?;
    let mut out = Outcome::pick(&inst.choices, &result.posterior.probabilities)?;
    if result.low_confidence {
        out.flags.push(Flag::LowConfidence);
    }
    out.flags.extend(
        parsed
            .warnings
            .iter()
            .chain(&result.warnings)
            .map(|w| Flag::Warning(w.clone())),
    );
    Ok(out.with_details(json!({
        "constraints": parsed.set.to_string(),
        "candidates": candidates.iter().map(|c| c.to_string()).collect::<Vec<_>>(),
        "log_masses": result.log_masses,
    })))
}

#[cfg(test)]
mod tests {
    use super::super::testkit::*;
    use super::super::{Flag, PipelineKind, TaskConfig, TaskInstance};
    use super::*;
    use crate::backend::MockTable;
    use crate::sum::DeductionOptions;

    const PLATES: &str = "On a table, there are five plates: a black plate, a white plate, a green plate, a blue plate, and a red plate. The white plate is bigger than the green plate. The red plate is the biggest. The black plate is bigger than the blue plate. The black plate is smaller than the green plate. Which plate is the smallest?";
    const SMALLEST: [&str; 5] = [
        "The red plate is the smallest.",
        "The black plate is the smallest.",
        "The white plate is the smallest.",
        "The green plate is the smallest.",
        "The blue plate is the smallest.",
    ];

    fn scripted(output: &str) -> MockTable {
        MockTable::new().with_script_rule("Translate the objects to the numbers 1 to", output)
    }

    #[test]
    fn blue_plate_is_smallest() {
        let inst = TaskInstance::multiple_choice(PLATES, &SMALLEST, 4);
        let table = scripted(
            "white plate>green plate\nred plate=5\nblack plate>blue plate\nblack plate<green plate\nTranslated statements:\n(A) red plate=1\n(B) black plate=1\n(C) white plate=1\n(D) green plate=1\n(E) blue plate=1",
        );
        let r = run(PipelineKind::LogicalDeduction, &inst, &cfg(), table);
        assert_eq!(r.outcome.chosen, "The blue plate is the smallest.");
        assert!(!r.outcome.flags.contains(&Flag::LowConfidence));
        match &r.trace[0] {
            super::super::TraceEntry::Generate { prompt, params, .. } => {
                assert!(prompt.ends_with("(E) The blue plate is the smallest.\nTranslate the objects to the numbers 1 to 5.\nConstraints:\n"));
                assert_eq!(params.max_tokens, 256);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn contradiction_is_low_confidence() {
        let inst = TaskInstance::multiple_choice(
            "On a shelf, there are three books: a red book, a green book, and a blue book. Which is leftmost?",
            &["The red book is the leftmost.", "The green book is the leftmost.", "The blue book is the leftmost."],
            0,
        );
        let table = scripted(
            "red book<green book\ngreen book<blue book\nblue book<red book\nTranslated statements:\n(A) red book=1\n(B) green book=1\n(C) blue book=1",
        );
        let r = run(PipelineKind::LogicalDeduction, &inst, &cfg(), table);
        assert!(r.outcome.flags.contains(&Flag::LowConfidence));
        for c in &inst.choices {
            assert!((score(&r, c) - 1.0 / 3.0).abs() < 1e-9);
        }
    }

    #[test]
    fn reversed_orientation_keeps_the_winner() {
        let choices = [
            "The blue plate is smaller than the red plate.",
            "The red plate is smaller than the blue plate.",
        ];
        let inst = TaskInstance::multiple_choice(
            "On a table, there are three plates: a blue plate, a green plate, and a red plate. The blue plate is smaller than the green plate. The green plate is smaller than the red plate.",
            &choices,
            0,
        );
        let reversal = TaskConfig {
            deduction: DeductionOptions {
                permutations_only: true,
                reversal: true,
            },
            ..cfg()
        };
        let consistent = scripted(
            "blue plate<green plate\ngreen plate<red plate\nTranslated statements:\n(A) blue plate<red plate\n(B) red plate<blue plate",
        );
        let reversed = scripted(
            "blue plate>green plate\ngreen plate>red plate\nTranslated statements:\n(A) blue plate>red plate\n(B) red plate>blue plate",
        );
        let a = run(PipelineKind::LogicalDeduction, &inst, &cfg(), consistent);
        let b = run(PipelineKind::LogicalDeduction, &inst, &reversal, reversed);
        assert_eq!(a.outcome.chosen, choices[0]);
        assert_eq!(b.outcome.chosen, choices[0]);
    }

    #[test]
    fn unparseable_translation_falls_back() {
        let inst = TaskInstance::multiple_choice(PLATES, &SMALLEST, 4);
        let r = run(
            PipelineKind::LogicalDeduction,
            &inst,
            &cfg(),
            scripted("the plates are nice\nTranslated statements:\n(A) red plate=1"),
        );
        assert!(r.outcome.is_fallback());
        let r = run(
            PipelineKind::LogicalDeduction,
            &inst,
            &cfg(),
            scripted("I cannot do that."),
        );
        assert!(r.outcome.is_fallback());
    }

    #[test]
    fn backend_evaluator_scores_through_the_session() {
        let inst = TaskInstance::multiple_choice(
            "On a shelf, there are two books: a red book and a blue book. The red book is left of the blue book.",
            &["The red book is the leftmost.", "The blue book is the leftmost."],
            0,
        );
        let table =
            scripted("red book<blue book\nTranslated statements:\n(A) red book=1\n(B) blue book=1")
                .with_rule(Some("1<2?"), Some("true"), 5.0)
                .with_rule(Some("2<1?"), Some("false"), 5.0)
                .with_rule(Some("1=1?"), Some("true"), 5.0)
                .with_rule(Some("2=1?"), Some("false"), 5.0);
        let cfg = TaskConfig {
            evaluator: super::super::EvaluatorChoice::Backend,
            ..cfg()
        };
        let r = run(PipelineKind::LogicalDeduction, &inst, &cfg, table);
        assert_eq!(r.outcome.chosen, "The red book is the leftmost.");
        assert!(r.trace.len() > 1);
    }

    #[test]
    fn candidate_lines_by_letter() {
        let names: Vec<String> = ["cup", "ball"].iter().map(|s| s.to_string()).collect();
        let c = parse_candidates("(B) ball=1\n(A) cup=1", &names, 2).unwrap();
        assert_eq!(c[0].to_string(), "cup=1");
        assert_eq!(c[1].to_string(), "ball=1");
        assert_eq!(parse_candidates("(A) cup=1", &names, 2).unwrap_err(), 1);
    }
}
