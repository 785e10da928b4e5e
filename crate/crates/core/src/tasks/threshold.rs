//! Sports understanding and known unknowns: generate alternatives, normalize over
//! them plus the given candidate, then threshold the candidate's posterior.

use serde_json::json;

use super::instance::{comparable, player_and_action, question_line};
use super::{
    fallback_direct, generate_text, Outcome, Session, TaskConfig, TaskError, TaskInstance,
};
use crate::sum::{posterior_normalize, threshold_decide, ThresholdMode};
use crate::think::{
    build_prompt, parse_list_output, ExampleSubject, PromptRecipe, SPORTS_DEMONSTRATION,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdKind {
    Sports,
    KnownUnknowns,
}

pub const PLAUSIBLE: &str = "plausible";
pub const IMPLAUSIBLE: &str = "implausible";
pub const UNKNOWN: &str = "Unknown";

/// Parsed alternatives minus the original candidate, capped at `n`.
fn alternatives(text: &str, original: &str, n: usize) -> Vec<String> {
    let key = comparable(original);
    let mut items = parse_list_output(text).items;
    items.retain(|i| comparable(i) != key && !comparable(i).is_empty());
    items.truncate(n);
    items
}

fn sports(s: &Session, inst: &TaskInstance, cfg: &TaskConfig) -> Result<Outcome, TaskError> {
    let (player, action) = match (inst.meta_str("player"), inst.meta_str("action")) {
        (Some(p), Some(a)) => (p, a),
        _ => player_and_action(&inst.input)
            .ok_or_else(|| TaskError::InvalidInstance("no player and action found".into()))?,
    };
    let action = action.trim().trim_end_matches('.').to_string();
    let prompt = build_prompt(&PromptRecipe::ExampleGeneration {
        subject: ExampleSubject::Description(format!("players who {action}")),
        count: cfg.alternatives,
        demonstration: Some(SPORTS_DEMONSTRATION.to_string()),
    })?;
    let text = generate_text(s, &prompt, &cfg.seeded(&cfg.sports_params))?;
    let mut labels = alternatives(&text, &player, cfg.alternatives);
    if labels.len() < 2 {
        return fallback_direct(
            s,
            inst,
            cfg,
            format!("only {} usable generated players", labels.len()),
        );
    }
    labels.push(player.clone());
    let texts: Vec<String> = labels.iter().map(|y| format!("{y} {action}")).collect();
    let logs: Vec<f64> = s
        .score_full_batch(&texts)?
        .iter()
        .map(|q| q.log_likelihood)
        .collect();
    let posterior = posterior_normalize(&logs, &labels)?;
    let decision = threshold_decide(
        &posterior,
        &player,
        cfg.sports_threshold,
        ThresholdMode::BelowRejects,
    )?;
    let chosen = if decision.accepted {
        PLAUSIBLE
    } else {
        IMPLAUSIBLE
    };
    Ok(Outcome {
        chosen: chosen.to_string(),
        chosen_index: None,
        chosen_list: None,
        per_choice: super::scored(&labels, &posterior.probabilities),
        flags: Vec::new(),
        details: json!({
            "target": player,
            "target_probability": decision.target_probability,
            "threshold": cfg.sports_threshold,
        }),
    })
}

fn known_unknowns(
    s: &Session,
    inst: &TaskInstance,
    cfg: &TaskConfig,
) -> Result<Outcome, TaskError> {
    let unknown = inst
        .choices
        .iter()
        .find(|c| comparable(c) == comparable(UNKNOWN))
        .cloned()
        .unwrap_or_else(|| UNKNOWN.to_string());
    let answer = inst
        .meta_str("answer")
        .or_else(|| inst.choices.iter().find(|c| **c != unknown).cloned())
        .ok_or_else(|| TaskError::InvalidInstance("no precise answer among the choices".into()))?;
    let raw_question = inst
        .meta_str("question")
        .unwrap_or_else(|| question_line(&inst.input));
    let question = raw_question
        .trim()
        .trim_start_matches("Q:")
        .trim()
        .trim_end_matches('?')
        .trim()
        .to_string();
    if question.is_empty() {
        return Err(TaskError::InvalidInstance("no question found".into()));
    }
    let question = format!("{question}?");
    let prompt = build_prompt(&PromptRecipe::ListExtension {
        question: question.clone(),
        answer: answer.clone(),
        count: cfg.alternatives,
    })?;
    let text = generate_text(s, &prompt, &cfg.seeded(&cfg.example_params))?;
    let others = alternatives(&text, &answer, cfg.alternatives);
    if others.len() < 2 {
        return fallback_direct(
            s,
            inst,
            cfg,
            format!("only {} usable generated answers", others.len()),
        );
    }
    let mut labels = vec![answer.clone()];
    labels.extend(others);
    // p("q? y") shares the factor p("q?") across candidates, so the conditional is enough.
    let queries: Vec<(String, String)> = labels
        .iter()
        .map(|y| (question.clone(), format!(" {}", y.trim())))
        .collect();
    let logs: Vec<f64> = s
        .score_batch(&queries)?
        .iter()
        .map(|q| q.log_likelihood)
        .collect();
    let posterior = posterior_normalize(&logs, &labels)?;
    let margin = cfg.known_margin();
    let decision = threshold_decide(&posterior, &answer, margin, ThresholdMode::Margin)?;
    Ok(Outcome {
        chosen: if decision.accepted {
            answer.clone()
        } else {
            unknown
        },
        chosen_index: None,
        chosen_list: None,
        per_choice: super::scored(&labels, &posterior.probabilities),
        flags: Vec::new(),
        details: json!({
            "target": answer,
            "target_probability": decision.target_probability,
            "margin": decision.margin,
            "threshold": margin,
        }),
    })
}

pub fn solve_posterior_threshold(
    s: &Session,
    inst: &TaskInstance,
    cfg: &TaskConfig,
    kind: ThresholdKind,
) -> Result<Outcome, TaskError> {
    match kind {
        ThresholdKind::Sports => sports(s, inst, cfg),
        ThresholdKind::KnownUnknowns => known_unknowns(s, inst, cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::super::testkit::*;
    use super::super::{PipelineKind, TaskConfig, TaskInstance};
    use super::*;
    use crate::backend::MockTable;

    const QUARTERBACKS: &str =
        " Tom Brady\n2. Patrick Mahomes\n3. Aaron Rodgers\n4. Peyton Manning";

    fn draymond() -> TaskInstance {
        TaskInstance::multiple_choice(
            "Statement: Draymond Green threw a touchdown. Plausible/implausible?",
            &["plausible", "implausible"],
            1,
        )
    }

    #[test]
    fn low_posterior_is_implausible() {
        let table = MockTable::new()
            .with_script_rule(
                "List 4 examples of players who threw a touchdown.\n1.",
                QUARTERBACKS,
            )
            .with_rule(None, Some("Draymond Green"), -10.0);
        let r = run(PipelineKind::Sports, &draymond(), &cfg(), table);
        assert_eq!(r.outcome.chosen, "implausible");
        let p = score(&r, "Draymond Green");
        let expected = (-10.0f64).exp() / (4.0 + (-10.0f64).exp());
        assert!((p - expected).abs() < 1e-12);
        assert!(scored_texts(&r).contains(&"Tom Brady threw a touchdown".to_string()));
    }

    #[test]
    fn sports_prompt_carries_demonstration() {
        let table = MockTable::new().with_script_rule("players who threw", QUARTERBACKS);
        let r = run(PipelineKind::Sports, &draymond(), &cfg(), table);
        match &r.trace[0] {
            super::super::TraceEntry::Generate { prompt, params, .. } => {
                assert_eq!(
                    prompt,
                    "List 4 examples of players who scored a rabona goal.\n1. Cristiano Ronaldo\n2. Erik Lamela\n3. Mario Balotelli\n4. Angel Di Maria\nList 4 examples of players who threw a touchdown.\n1."
                );
                assert_eq!(params.temperature, 0.5);
                assert_eq!(params.max_tokens, 100);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn equal_scores_are_plausible() {
        let table = MockTable::new().with_script_rule("players who threw", QUARTERBACKS);
        let r = run(PipelineKind::Sports, &draymond(), &cfg(), table);
        assert_eq!(r.outcome.chosen, "plausible");
        assert!((score(&r, "Draymond Green") - 0.2).abs() < 1e-12);
    }

    #[test]
    fn too_few_players_fall_back() {
        let table = MockTable::new().with_script_rule("players who threw", " Draymond Green");
        let r = run(PipelineKind::Sports, &draymond(), &cfg(), table);
        assert!(r.outcome.is_fallback());
    }

    fn lincoln() -> TaskInstance {
        TaskInstance::multiple_choice(
            "Q: How often did Abraham Lincoln cut his toenails?",
            &["Every Saturday night", "Unknown"],
            1,
        )
    }

    const OTHERS: &str = " Once a week\n3. Every day\n4. Once a month\n5. Never";

    #[test]
    fn list_extension_prompt() {
        let table = MockTable::new().with_script_rule("A possible answer is", OTHERS);
        let r = run(PipelineKind::KnownUnknowns, &lincoln(), &cfg(), table);
        match &r.trace[0] {
            super::super::TraceEntry::Generate { prompt, .. } => assert_eq!(
                prompt,
                "How often did Abraham Lincoln cut his toenails?\nA possible answer is:\n1. Every Saturday night\nList 4 other possible answers in the same format as the first:\n2."
            ),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dominant_answer_is_known() {
        let table = MockTable::new()
            .with_script_rule("A possible answer is", OTHERS)
            .with_rule(None, Some("Every Saturday night"), 3.0);
        let r = run(PipelineKind::KnownUnknowns, &lincoln(), &cfg(), table);
        // p(a) = e^3 / (e^3 + 4), best other = 1 / (e^3 + 4); margin ≈ 0.79 > 1/4.
        let e3 = 3.0f64.exp();
        assert!((score(&r, "Every Saturday night") - e3 / (e3 + 4.0)).abs() < 1e-12);
        assert_eq!(r.outcome.chosen, "Every Saturday night");
    }

    #[test]
    fn symmetric_answers_are_unknown() {
        let table = MockTable::new().with_script_rule("A possible answer is", OTHERS);
        let r = run(PipelineKind::KnownUnknowns, &lincoln(), &cfg(), table);
        assert_eq!(r.outcome.chosen, "Unknown");
    }

    #[test]
    fn margin_boundary() {
        // Margin of exactly 1/4 is accepted; slightly less is not.
        let cfg = TaskConfig {
            alternatives: 4,
            ..cfg()
        };
        assert_eq!(cfg.known_margin(), 0.25);
        let labels: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let post =
            crate::sum::posterior_normalize(&[0.5f64.ln(), 0.25f64.ln(), 0.25f64.ln()], &labels)
                .unwrap();
        assert!(
            threshold_decide(&post, "a", 0.25, ThresholdMode::Margin)
                .unwrap()
                .accepted
        );
        assert!(
            !threshold_decide(&post, "a", 0.2500001, ThresholdMode::Margin)
                .unwrap()
                .accepted
        );
    }
}
