//! Odd one out, phrase relatedness and Codenames.

use serde_json::json;

use super::instance::{codenames_fields, labelled_line, question_line, word_list_after_colon};
use super::{generate_text, Flag, Outcome, Session, TaskConfig, TaskError, TaskInstance};
use crate::sum::{em_fit, lvm_odd_log_scores, minority_vote, ScoreMatrix};
use crate::think::{
    build_prompt, parse_list_output, postprocess_knowledge, PromptRecipe, KNOWLEDGE_SLOT,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelatednessMode {
    /// Pairwise list-of-words matrix, lowest row average wins.
    ListOfWords,
    /// Generated differences as templates, minority vote over the substitution matrix.
    MinorityVote,
    /// Latent-class EM over the same substitution matrix.
    Lvm,
    /// Query likelihood after each option's list-of-words prefix.
    Phrase,
    /// Codenames: the k options that best predict the query, alphabetized.
    TopK,
}

pub(crate) fn list_prefix(word: &str) -> Result<String, TaskError> {
    Ok(build_prompt(&PromptRecipe::ListOfWordsPrefix {
        word: word.to_string(),
    })?)
}

fn odd_words(inst: &TaskInstance) -> Result<Vec<String>, TaskError> {
    if let Some(words) = inst.meta_strings("words") {
        return Ok(words);
    }
    if inst.choices.len() >= 3 {
        return Ok(inst.choices.clone());
    }
    word_list_after_colon(&inst.input)
        .ok_or_else(|| TaskError::InvalidInstance("no word set found".into()))
}

/// `log p(target | "List of words: {w}, ")` for every word.
fn prefix_scores(s: &Session, words: &[String], target: &str) -> Result<Vec<f64>, TaskError> {
    let queries = words
        .iter()
        .map(|w| Ok((list_prefix(w)?, target.trim().to_string())))
        .collect::<Result<Vec<_>, TaskError>>()?;
    Ok(s.score_batch(&queries)?
        .iter()
        .map(|q| q.log_likelihood)
        .collect())
}

/// Row averages of `log P_ij = log p(w_j | prefix(w_i))`, j ≠ i.
pub(crate) fn list_of_words_scores(s: &Session, words: &[String]) -> Result<Vec<f64>, TaskError> {
    if words.len() < 2 {
        return Err(TaskError::InvalidInstance("need at least 2 words".into()));
    }
    let mut queries = Vec::new();
    for (i, wi) in words.iter().enumerate() {
        let prefix = list_prefix(wi)?;
        for (j, wj) in words.iter().enumerate() {
            if i != j {
                queries.push((prefix.clone(), wj.trim().to_string()));
            }
        }
    }
    let scores = s.score_batch(&queries)?;
    let per_row = words.len() - 1;
    scores
        .chunks(per_row)
        .map(|row| {
            let logs: Vec<f64> = row.iter().map(|q| q.log_likelihood).collect();
            Ok(logs.iter().sum::<f64>() / per_row as f64)
        })
        .collect()
}

fn list_of_words(s: &Session, words: &[String]) -> Result<Outcome, TaskError> {
    let rows = list_of_words_scores(s, words)?;
    let negated: Vec<f64> = rows.iter().map(|r| -r).collect();
    let mut out = Outcome::pick(words, &negated)?;
    out.per_choice = super::scored(words, &rows);
    Ok(out)
}

/// Generated differences turned into templates and scored with every word substituted.
/// Rows are templates, columns are words.
pub(crate) fn fact_matrix(
    s: &Session,
    words: &[String],
    cfg: &TaskConfig,
) -> Result<Option<ScoreMatrix>, TaskError> {
    let prompt = build_prompt(&PromptRecipe::ListDifferences {
        items: words.to_vec(),
        count: cfg.differences,
    })?;
    let text = generate_text(s, &prompt, &cfg.seeded(&cfg.fact_params))?;
    let templates = postprocess_knowledge(&parse_list_output(&text), words);
    if templates.len() < 2 {
        return Ok(None);
    }
    let mut texts = Vec::with_capacity(templates.len() * words.len());
    for t in &templates {
        for w in words {
            texts.push(t.template.render(&[(KNOWLEDGE_SLOT, w.as_str())], true)?);
        }
    }
    let scores = s.score_full_batch(&texts)?;
    let values: Vec<Vec<f64>> = scores
        .chunks(words.len())
        .map(|row| row.iter().map(|q| q.log_likelihood).collect())
        .collect();
    let rows = templates
        .iter()
        .map(|t| t.template.raw().to_string())
        .collect();
    Ok(Some(ScoreMatrix::new(rows, words.to_vec(), values)?))
}

fn with_fallback(s: &Session, words: &[String], reason: &str) -> Result<Outcome, TaskError> {
    tracing::warn!(reason, "falling back to list-of-words scoring");
    Ok(list_of_words(s, words)?.flag(Flag::Fallback(reason.to_string())))
}

fn minority(s: &Session, words: &[String], cfg: &TaskConfig) -> Result<Outcome, TaskError> {
    let Some(matrix) = fact_matrix(s, words, cfg)? else {
        return with_fallback(s, words, "fewer than 2 usable generated facts");
    };
    let vote = minority_vote(&matrix)?;
    let counts: Vec<f64> = vote.counts.iter().map(|&c| c as f64).collect();
    let mut out = Outcome::pick(words, &counts)?;
    out.chosen = vote.label.clone();
    out.chosen_index = Some(vote.winner);
    Ok(out.with_details(json!({ "templates": matrix.rows() })))
}

fn lvm(s: &Session, words: &[String], cfg: &TaskConfig) -> Result<Outcome, TaskError> {
    let Some(matrix) = fact_matrix(s, words, cfg)? else {
        return with_fallback(s, words, "fewer than 2 usable generated facts");
    };
    let model = em_fit(&matrix.transpose(), cfg.em_iterations, cfg.seed)?;
    let scores = lvm_odd_log_scores(&model);
    let mut out = Outcome::pick(words, &scores)?.with_details(json!({
        "templates": matrix.rows(),
        "partition": model.item_partition(),
        "class_prior": model.class_prior,
    }));
    if model.degenerate {
        out = out.flag(Flag::Warning("constant substitution matrix".into()));
    }
    Ok(out)
}

fn phrase(s: &Session, inst: &TaskInstance) -> Result<Outcome, TaskError> {
    let query = inst
        .meta_str("query")
        .or_else(|| labelled_line(&inst.input, "Input"))
        .unwrap_or_else(|| question_line(&inst.input));
    if query.trim().is_empty() || inst.choices.is_empty() {
        return Err(TaskError::InvalidInstance(
            "phrase relatedness needs a query and options".into(),
        ));
    }
    let scores = prefix_scores(s, &inst.choices, &query)?;
    Outcome::pick(&inst.choices, &scores)
}

fn top_k(s: &Session, inst: &TaskInstance) -> Result<Outcome, TaskError> {
    let parsed = codenames_fields(&inst.input);
    let query = inst
        .meta_str("query")
        .or_else(|| parsed.as_ref().map(|f| f.query.clone()))
        .ok_or_else(|| TaskError::InvalidInstance("no query word".into()))?;
    let words = inst
        .meta_strings("words")
        .or_else(|| parsed.as_ref().map(|f| f.words.clone()))
        .ok_or_else(|| TaskError::InvalidInstance("no word list".into()))?;
    let k = inst
        .meta_usize("k")
        .or_else(|| parsed.as_ref().map(|f| f.k))
        .unwrap_or(1);
    if k == 0 || k > words.len() {
        return Err(TaskError::InvalidInstance(format!(
            "k={k} for {} words",
            words.len()
        )));
    }
    // Clue words are printed in capitals; the lowercase form reads like ordinary text.
    let query = if query.chars().any(char::is_lowercase) {
        query
    } else {
        query.to_lowercase()
    };
    let scores = prefix_scores(s, &words, &query)?;
    let mut order: Vec<usize> = (0..words.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut chosen: Vec<String> = order[..k].iter().map(|&i| words[i].clone()).collect();
    chosen.sort_by_key(|w| w.to_lowercase());
    Ok(Outcome {
        chosen: chosen.join(", "),
        chosen_index: None,
        chosen_list: Some(chosen),
        per_choice: super::scored(&words, &scores),
        flags: Vec::new(),
        details: json!({ "query": query, "k": k }),
    })
}

pub fn solve_relatedness(
    s: &Session,
    inst: &TaskInstance,
    cfg: &TaskConfig,
    mode: RelatednessMode,
) -> Result<Outcome, TaskError> {
    match mode {
        RelatednessMode::ListOfWords => list_of_words(s, &odd_words(inst)?),
        RelatednessMode::MinorityVote => minority(s, &odd_words(inst)?, cfg),
        RelatednessMode::Lvm => lvm(s, &odd_words(inst)?, cfg),
        RelatednessMode::Phrase => phrase(s, inst),
        RelatednessMode::TopK => top_k(s, inst),
    }
}

#[cfg(test)]
mod tests {
    use super::super::testkit::*;
    use super::super::{Flag, PipelineKind, TaskInstance};
    use crate::backend::MockTable;
    use crate::backend::DEFAULT_FALLBACK_LOGPROB as FB;

    fn colors() -> TaskInstance {
        TaskInstance::multiple_choice(
            "Pick the odd word out: blue, pink, magenta, banana",
            &["blue", "pink", "magenta", "banana"],
            3,
        )
    }

    fn banana_far() -> MockTable {
        MockTable::new()
            .with_rule(None, Some("banana"), -5.0)
            .with_rule(Some("banana"), None, -5.0)
    }

    #[test]
    fn banana_is_odd() {
        let r = run(PipelineKind::OddOneOut, &colors(), &cfg(), banana_far());
        assert_eq!(r.outcome.chosen, "banana");
        assert_eq!(r.outcome.chosen_index, Some(3));
        // Row means by hand: each color row has one banana entry, the banana row has three.
        assert!((score(&r, "blue") - (3.0 * FB - 5.0) / 3.0).abs() < 1e-12);
        assert!((score(&r, "banana") - (FB - 5.0)).abs() < 1e-12);
        assert_eq!(r.trace.len(), 12);
    }

    #[test]
    fn pair_prompts_use_list_of_words() {
        let r = run(PipelineKind::OddOneOut, &colors(), &cfg(), banana_far());
        match &r.trace[0] {
            super::super::TraceEntry::Score {
                prompt,
                continuation,
                ..
            } => {
                assert_eq!(prompt, "List of words: blue, ");
                assert_eq!(continuation, "pink");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dessert_is_related() {
        let inst = TaskInstance::multiple_choice(
            "For each word or phrase, identify the most related choice from the listed options.\nInput: Ice Cream",
            &["Antarctica", "Titanic", "Dessert", "Sour Cream"],
            2,
        );
        let table = MockTable::new()
            .with_entry("List of words: Dessert, ", "Ice Cream", 0.3f64.ln())
            .with_entry("List of words: Sour Cream, ", "Ice Cream", 0.1f64.ln());
        let r = run(PipelineKind::PhraseRelatedness, &inst, &cfg(), table);
        assert_eq!(r.outcome.chosen, "Dessert");
    }

    #[test]
    fn codenames_top_two_alphabetized() {
        let inst = TaskInstance {
            input: "Try to identify the 2 words best associated with the word WHITE from the following list: book, anchor, rainbow, shoulder, tunnel, sack, drum, pacific, page, mark, gear, glacier. Give your answer in alphabetical order.".into(),
            targets: vec!["glacier, rainbow".into()],
            ..TaskInstance::default()
        };
        let table = MockTable::new()
            .with_entry("List of words: rainbow, ", "white", -1.0)
            .with_entry("List of words: glacier, ", "white", -2.0)
            .with_entry("List of words: page, ", "white", -3.0);
        let r = run(PipelineKind::Codenames, &inst, &cfg(), table);
        assert_eq!(r.outcome.chosen, "glacier, rainbow");
        assert_eq!(
            r.outcome.chosen_list.as_deref().unwrap(),
            ["glacier", "rainbow"]
        );
    }

    fn differences() -> MockTable {
        banana_far()
            .with_script_rule(
                "List 5 differences",
                " Banana is a fruit.\n2. Blue is a color.\n3. Pink is a color.\n4. Magenta is a color.",
            )
            .with_rule(None, Some("Banana is a color"), -10.0)
            .with_rule(None, Some("Blue is a fruit"), -10.0)
            .with_rule(None, Some("Pink is a fruit"), -10.0)
            .with_rule(None, Some("Magenta is a fruit"), -5.0)
    }

    #[test]
    fn minority_vote_picks_banana() {
        let r = run(
            PipelineKind::OddOneOutMinorityVote,
            &colors(),
            &cfg(),
            differences(),
        );
        assert_eq!(r.outcome.chosen, "banana");
        assert_eq!(score(&r, "banana"), 3.0);
        assert_eq!(score(&r, "blue"), 1.0);
        assert!(!r.outcome.is_fallback());
    }

    #[test]
    fn lvm_runs_on_fact_matrix() {
        let r = run(PipelineKind::OddOneOutLvm, &colors(), &cfg(), differences());
        assert_eq!(r.outcome.chosen, "banana");
        let again = run(PipelineKind::OddOneOutLvm, &colors(), &cfg(), differences());
        assert_eq!(r, again);
    }

    #[test]
    fn no_facts_falls_back_to_list_of_words() {
        let table =
            banana_far().with_script_rule("List 5 differences", " The words are different.");
        let r = run(
            PipelineKind::OddOneOutMinorityVote,
            &colors(),
            &cfg(),
            table,
        );
        assert_eq!(r.outcome.chosen, "banana");
        assert!(matches!(r.outcome.flags[0], Flag::Fallback(_)));
    }

    #[test]
    fn more_differences_never_shrink_the_matrix() {
        let facts = [
            "Banana is a fruit.",
            "Blue is a color.",
            "Pink is a color.",
            "Magenta is a color.",
            "Banana is yellow.",
            "Blue is cold.",
        ];
        let mut last = 0;
        for n in 2..=facts.len() {
            let output = facts[..n]
                .iter()
                .enumerate()
                .map(|(i, f)| {
                    if i == 0 {
                        format!(" {f}")
                    } else {
                        format!("{}. {f}", i + 1)
                    }
                })
                .collect::<Vec<_>>()
                .join("\n");
            let cfg = super::super::TaskConfig {
                differences: n,
                ..cfg()
            };
            let table =
                MockTable::new().with_script_rule(&format!("List {n} differences"), &output);
            let mock = crate::backend::MockBackend::new(table).unwrap();
            let session = super::super::Session::new(&mock, 1);
            let words: Vec<String> = colors().choices;
            let rows = super::fact_matrix(&session, &words, &cfg)
                .unwrap()
                .unwrap()
                .n_rows();
            assert!(rows >= last);
            last = rows;
        }
        assert_eq!(last, facts.len());
    }
}
