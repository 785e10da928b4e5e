//! Misconceptions: decide which of two statements is the true one from the
//! posterior over the two joint hypotheses.

use serde_json::json;

use super::{generate_text, Flag, Outcome, Session, TaskConfig, TaskError, TaskInstance};
use crate::sum::{log_mean_exp, log_sum_exp, posterior_normalize};
use crate::think::{
    build_prompt, truth_prompt, PromptRecipe, FALSE_CONTINUATION, TRUE_CONTINUATION,
};

/// `(ln p(T|s), ln p(F|s))` for each statement, normalized over the two answers.
fn truth_logs(s: &Session, statements: &[String]) -> Result<Vec<(f64, f64)>, TaskError> {
    let mut queries = Vec::with_capacity(statements.len() * 2);
    for st in statements {
        let prompt = truth_prompt(st);
        queries.push((prompt.clone(), TRUE_CONTINUATION.to_string()));
        queries.push((prompt, FALSE_CONTINUATION.to_string()));
    }
    let logs: Vec<f64> = s
        .score_batch(&queries)?
        .iter()
        .map(|q| q.log_likelihood)
        .collect();
    Ok(logs
        .chunks(2)
        .map(|tf| {
            let z = log_sum_exp(tf);
            (tf[0] - z, tf[1] - z)
        })
        .collect())
}

fn translations(
    s: &Session,
    statement: &str,
    n: usize,
    cfg: &TaskConfig,
    flags: &mut Vec<Flag>,
) -> Result<Vec<String>, TaskError> {
    let prompt = build_prompt(&PromptRecipe::Translation {
        source: cfg.source_language.clone(),
        target: cfg.working_language.clone(),
        text: statement.to_string(),
    })?;
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let params = cfg
            .translation_params
            .clone()
            .with_seed(Some(cfg.seed.wrapping_add(k as u64)));
        let text = generate_text(s, &prompt, &params)?;
        let text = text.trim();
        if !text.is_empty() {
            out.push(text.to_string());
        }
    }
    if out.is_empty() {
        flags.push(Flag::Warning(format!(
            "no translation of {statement:?}; scoring the original"
        )));
        out.push(statement.to_string());
    }
    Ok(out)
}

/// Log-mixture over all pairs of `ln p(x|s_k) + ln p(y|t_l)`.
fn pair_mixture(a: &[f64], b: &[f64]) -> Result<f64, TaskError> {
    let terms: Vec<f64> = a
        .iter()
        .flat_map(|x| b.iter().map(move |y| x + y))
        .collect();
    Ok(log_mean_exp(&terms)?)
}

pub fn solve_truth_posterior(
    s: &Session,
    inst: &TaskInstance,
    cfg: &TaskConfig,
    translations_per_statement: usize,
) -> Result<Outcome, TaskError> {
    let pair = inst
        .meta_strings("statements")
        .unwrap_or_else(|| inst.choices.clone());
    if pair.len() != 2 {
        return Err(TaskError::InvalidInstance(format!(
            "misconceptions needs exactly 2 statements, got {}",
            pair.len()
        )));
    }
    let mut flags = Vec::new();
    let (first, second) = if translations_per_statement == 0 {
        (vec![pair[0].clone()], vec![pair[1].clone()])
    } else {
        (
            translations(s, &pair[0], translations_per_statement, cfg, &mut flags)?,
            translations(s, &pair[1], translations_per_statement, cfg, &mut flags)?,
        )
    };
    let lf = truth_logs(s, &first)?;
    let lt = truth_logs(s, &second)?;
    let t_s: Vec<f64> = lf.iter().map(|x| x.0).collect();
    let f_s: Vec<f64> = lf.iter().map(|x| x.1).collect();
    let t_t: Vec<f64> = lt.iter().map(|x| x.0).collect();
    let f_t: Vec<f64> = lt.iter().map(|x| x.1).collect();
    // H1: s true and t false. H2: s false and t true.
    let h1 = pair_mixture(&t_s, &f_t)?;
    let h2 = pair_mixture(&f_s, &t_t)?;
    let posterior = posterior_normalize(&[h1, h2], &pair)?;
    let mut out = Outcome::pick(&pair, &[h1, h2])?;
    out.per_choice = super::scored(&pair, &posterior.probabilities);
    out.flags.extend(flags);
    Ok(out.with_details(json!({
        "log_h1": h1,
        "log_h2": h2,
        "translations": [first, second],
    })))
}

#[cfg(test)]
mod tests {
    use super::super::testkit::*;
    use super::super::{Flag, PipelineKind, TaskConfig, TaskInstance};
    use crate::backend::MockTable;
    use crate::think::{truth_prompt, FALSE_CONTINUATION, TRUE_CONTINUATION};

    const S: &str = "Vaccines do not cause autism.";
    const T: &str = "Vaccines cause autism.";

    fn pair() -> TaskInstance {
        TaskInstance::multiple_choice("", &[S, T], 0)
    }

    fn table(ps: f64, pt: f64) -> MockTable {
        MockTable::new()
            .with_entry(&truth_prompt(S), TRUE_CONTINUATION, ps.ln())
            .with_entry(&truth_prompt(S), FALSE_CONTINUATION, (1.0 - ps).ln())
            .with_entry(&truth_prompt(T), TRUE_CONTINUATION, pt.ln())
            .with_entry(&truth_prompt(T), FALSE_CONTINUATION, (1.0 - pt).ln())
    }

    #[test]
    fn hand_products() {
        let r = run(
            PipelineKind::Misconceptions,
            &pair(),
            &cfg(),
            table(0.8, 0.3),
        );
        assert_eq!(r.outcome.chosen, S);
        // 0.8 * 0.7 = 0.56 against 0.2 * 0.3 = 0.06.
        assert!((score(&r, S) - 0.56 / 0.62).abs() < 1e-12);
        assert!((r.outcome.details["log_h1"].as_f64().unwrap() - 0.56f64.ln()).abs() < 1e-12);
        assert!((r.outcome.details["log_h2"].as_f64().unwrap() - 0.06f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn symmetric_tie_picks_first() {
        let r = run(
            PipelineKind::Misconceptions,
            &pair(),
            &cfg(),
            table(0.5, 0.5),
        );
        assert_eq!(r.outcome.chosen, S);
        assert!(r.outcome.flags.contains(&Flag::Tie));
    }

    #[test]
    fn identical_translations_keep_the_decision() {
        let cfg10 = TaskConfig {
            misconception_translations: 10,
            ..cfg()
        };
        let t = table(0.8, 0.3)
            .with_script_rule("Russian: Vaccines do not", " Vaccines do not cause autism.")
            .with_script_rule("Russian: Vaccines cause", " Vaccines cause autism.");
        let plain = run(PipelineKind::Misconceptions, &pair(), &cfg(), t.clone());
        let translated = run(PipelineKind::Misconceptions, &pair(), &cfg10, t);
        assert_eq!(plain.outcome.chosen, translated.outcome.chosen);
        assert!((score(&plain, S) - score(&translated, S)).abs() < 1e-12);
        let generations = translated
            .trace
            .iter()
            .filter(|e| matches!(e, super::super::TraceEntry::Generate { .. }))
            .count();
        assert_eq!(generations, 20);
    }
}
