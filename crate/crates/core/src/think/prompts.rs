//! Prompt recipes. Output bytes are pinned by golden tests.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::parse::erase_premise;
use super::ThinkError;

pub const SPORTS_DEMONSTRATION: &str = include_str!("../../prompts/sports_demonstration.txt");
pub const LIST_DIFFERENCES_DEMONSTRATION: &str =
    include_str!("../../prompts/list_differences_demonstration.txt");
pub const DEDUCTION_TRANSLATION_DEMONSTRATION: &str =
    include_str!("../../prompts/deduction_translation_demonstration.txt");

const COT_ODD_ONE_OUT: &str = include_str!("../../prompts/cot/odd_one_out.txt");
const COT_PHRASE_RELATEDNESS: &str = include_str!("../../prompts/cot/phrase_relatedness.txt");
const COT_KNOWN_UNKNOWNS: &str = include_str!("../../prompts/cot/known_unknowns.txt");
const COT_LOGICAL_DEDUCTION: &str = include_str!("../../prompts/cot/logical_deduction.txt");
const COT_INVENTED_WORDS: &str = include_str!("../../prompts/cot/invented_words.txt");

/// Header line separating constraints from translated statements in a formal translation.
pub const TRANSLATED_STATEMENTS_HEADER: &str = "Translated statements:";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecipeKind {
    ExampleGeneration,
    ListExtension,
    ListOfWordsPrefix,
    FactGeneration,
    ListDifferences,
    Translation,
    OrderInversion,
    PremiseErasure,
    AuxiliaryKnowledge,
    ChainOfThought,
}

impl RecipeKind {
    pub const ALL: [RecipeKind; 10] = [
        RecipeKind::ExampleGeneration,
        RecipeKind::ListExtension,
        RecipeKind::ListOfWordsPrefix,
        RecipeKind::FactGeneration,
        RecipeKind::ListDifferences,
        RecipeKind::Translation,
        RecipeKind::OrderInversion,
        RecipeKind::PremiseErasure,
        RecipeKind::AuxiliaryKnowledge,
        RecipeKind::ChainOfThought,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RecipeKind::ExampleGeneration => "example-generation",
            RecipeKind::ListExtension => "list-extension",
            RecipeKind::ListOfWordsPrefix => "list-of-words-prefix",
            RecipeKind::FactGeneration => "fact-generation",
            RecipeKind::ListDifferences => "list-differences",
            RecipeKind::Translation => "translation",
            RecipeKind::OrderInversion => "order-inversion",
            RecipeKind::PremiseErasure => "premise-erasure",
            RecipeKind::AuxiliaryKnowledge => "auxiliary-knowledge",
            RecipeKind::ChainOfThought => "chain-of-thought",
        }
    }
}

impl fmt::Display for RecipeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RecipeKind {
    type Err = ThinkError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RecipeKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| ThinkError::UnsupportedKind(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "type", content = "text")]
pub enum ExampleSubject {
    /// A defining sentence, e.g. "A bam is a simple dwelling".
    Definition(String),
    /// A noun phrase completing "List N examples of ...".
    Description(String),
    /// A word whose synonyms are requested as a comma list.
    Synonyms(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InversionFrame {
    EmojiMovie,
    WordsMovie,
    LanguageId,
    CodeComment,
}

impl InversionFrame {
    pub fn prompt(self, answer: &str) -> String {
        match self {
            InversionFrame::EmojiMovie => format!("Emoji describing the movie {answer}:"),
            InversionFrame::WordsMovie => format!("Words describing the movie {answer}:"),
            InversionFrame::LanguageId => format!("The following is a sentence in {answer}:"),
            InversionFrame::CodeComment => format!("# {answer}\n"),
        }
    }

    /// The continuation scored after [`InversionFrame::prompt`].
    pub fn stimulus(self, stimulus: &str) -> String {
        match self {
            InversionFrame::CodeComment => stimulus.to_string(),
            _ => format!(" {}", stimulus.trim()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CotTask {
    OddOneOut,
    PhraseRelatedness,
    KnownUnknowns,
    LogicalDeduction,
    InventedWords,
}

impl CotTask {
    pub fn demonstration(self) -> &'static str {
        match self {
            CotTask::OddOneOut => COT_ODD_ONE_OUT,
            CotTask::PhraseRelatedness => COT_PHRASE_RELATEDNESS,
            CotTask::KnownUnknowns => COT_KNOWN_UNKNOWNS,
            CotTask::LogicalDeduction => COT_LOGICAL_DEDUCTION,
            CotTask::InventedWords => COT_INVENTED_WORDS,
        }
    }

    /// Text after which the answer is scored once the rationale is generated.
    pub fn answer_prefix(self) -> &'static str {
        match self {
            CotTask::OddOneOut => "The odd one out is",
            _ => "Answer:",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum PromptRecipe {
    ExampleGeneration {
        subject: ExampleSubject,
        count: usize,
        #[serde(default)]
        demonstration: Option<String>,
    },
    ListExtension {
        question: String,
        answer: String,
        count: usize,
    },
    ListOfWordsPrefix {
        word: String,
    },
    FactGeneration {
        topic: String,
    },
    ListDifferences {
        items: Vec<String>,
        count: usize,
    },
    Translation {
        source: String,
        target: String,
        text: String,
    },
    /// Word problem to (in)equalities, with the shipped demonstration.
    FormalTranslation {
        problem: String,
        statements: Vec<String>,
        object_count: usize,
    },
    OrderInversion {
        frame: InversionFrame,
        answer: String,
    },
    PremiseErasure {
        question: String,
        start: usize,
        end: usize,
    },
    AuxiliaryKnowledge {
        facts: Vec<String>,
        question: String,
    },
    ChainOfThought {
        task: CotTask,
        question: String,
    },
}

impl PromptRecipe {
    pub fn kind(&self) -> RecipeKind {
        match self {
            PromptRecipe::ExampleGeneration { .. } => RecipeKind::ExampleGeneration,
            PromptRecipe::ListExtension { .. } => RecipeKind::ListExtension,
            PromptRecipe::ListOfWordsPrefix { .. } => RecipeKind::ListOfWordsPrefix,
            PromptRecipe::FactGeneration { .. } => RecipeKind::FactGeneration,
            PromptRecipe::ListDifferences { .. } => RecipeKind::ListDifferences,
            PromptRecipe::Translation { .. } | PromptRecipe::FormalTranslation { .. } => {
                RecipeKind::Translation
            }
            PromptRecipe::OrderInversion { .. } => RecipeKind::OrderInversion,
            PromptRecipe::PremiseErasure { .. } => RecipeKind::PremiseErasure,
            PromptRecipe::AuxiliaryKnowledge { .. } => RecipeKind::AuxiliaryKnowledge,
            PromptRecipe::ChainOfThought { .. } => RecipeKind::ChainOfThought,
        }
    }

    pub fn validate(&self) -> Result<(), ThinkError> {
        let err = |msg: &str| Err(ThinkError::InvalidRecipe(format!("{}: {msg}", self.kind())));
        let blank = |s: &str| s.trim().is_empty();
        match self {
            PromptRecipe::ExampleGeneration { subject, count, .. } => {
                let text = match subject {
                    ExampleSubject::Definition(t)
                    | ExampleSubject::Description(t)
                    | ExampleSubject::Synonyms(t) => t,
                };
                if blank(text) {
                    return err("empty subject");
                }
                if *count == 0 {
                    return err("count must be at least 1");
                }
            }
            PromptRecipe::ListExtension {
                question,
                answer,
                count,
            } => {
                if blank(question) || blank(answer) {
                    return err("question and answer required");
                }
                if *count == 0 {
                    return err("count must be at least 1");
                }
            }
            PromptRecipe::ListOfWordsPrefix { word } => {
                if blank(word) {
                    return err("empty word");
                }
            }
            PromptRecipe::FactGeneration { topic } => {
                if blank(topic) {
                    return err("empty topic");
                }
            }
            PromptRecipe::ListDifferences { items, count } => {
                if items.is_empty() || items.iter().any(|i| blank(i)) {
                    return err("items required");
                }
                if *count == 0 {
                    return err("count must be at least 1");
                }
            }
            PromptRecipe::Translation {
                source,
                target,
                text,
            } => {
                if blank(source) || blank(target) || blank(text) {
                    return err("source, target and text required");
                }
            }
            PromptRecipe::FormalTranslation {
                problem,
                statements,
                object_count,
            } => {
                if blank(problem) || statements.is_empty() {
                    return err("problem and statements required");
                }
                if *object_count < 2 {
                    return err("need at least 2 objects");
                }
            }
            PromptRecipe::OrderInversion { answer, .. } => {
                if blank(answer) {
                    return err("empty answer");
                }
            }
            PromptRecipe::PremiseErasure { question, .. } => {
                if question.is_empty() {
                    return err("empty question");
                }
            }
            PromptRecipe::AuxiliaryKnowledge { question, .. }
            | PromptRecipe::ChainOfThought { question, .. } => {
                if blank(question) {
                    return err("empty question");
                }
            }
        }
        Ok(())
    }
}

fn option_letter(i: usize) -> char {
    (b'A' + (i % 26) as u8) as char
}

fn with_demonstration(demo: &str, body: &str) -> String {
    format!("{}\n\n{body}", demo.trim_end())
}

pub fn build_prompt(recipe: &PromptRecipe) -> Result<String, ThinkError> {
    recipe.validate()?;
    let prompt = match recipe {
        PromptRecipe::ExampleGeneration {
            subject,
            count,
            demonstration,
        } => {
            let body = match subject {
                ExampleSubject::Definition(text) => {
                    format!("{}. Examples: 1.", text.trim().trim_end_matches('.'))
                }
                ExampleSubject::Description(desc) => {
                    format!("List {count} examples of {}.\n1.", desc.trim().trim_end_matches('.'))
                }
                ExampleSubject::Synonyms(word) => {
                    format!("List synonyms of {}, separate synonyms by comma:", word.trim())
                }
            };
            match demonstration {
                // The list demonstration runs straight into the request, one line apart.
                Some(demo) if !demo.trim().is_empty() => format!("{}\n{body}", demo.trim_end()),
                _ => body,
            }
        }
        PromptRecipe::ListExtension {
            question,
            answer,
            count,
        } => format!(
            "{}\nA possible answer is:\n1. {}\nList {count} other possible answers in the same format as the first:\n2.",
            question.trim(),
            answer.trim()
        ),
        PromptRecipe::ListOfWordsPrefix { word } => format!("List of words: {}, ", word.trim()),
        PromptRecipe::FactGeneration { topic } => format!("List facts about {}. 1.", topic.trim()),
        PromptRecipe::ListDifferences { items, count } => with_demonstration(
            LIST_DIFFERENCES_DEMONSTRATION,
            &format!(
                "Words: {}\nList {count} differences between the words:\n1.",
                items.iter().map(|s| s.trim()).collect::<Vec<_>>().join(", ")
            ),
        ),
        PromptRecipe::Translation {
            source,
            target,
            text,
        } => format!("{}: {} {}:", source.trim(), text.trim(), target.trim()),
        PromptRecipe::FormalTranslation {
            problem,
            statements,
            object_count,
        } => {
            let mut body = format!("Problem: {}\nStatements:\n", problem.trim());
            for (i, s) in statements.iter().enumerate() {
                body.push_str(&format!("({}) {}\n", option_letter(i), s.trim()));
            }
            body.push_str(&format!(
                "Translate the objects to the numbers 1 to {object_count}.\nConstraints:\n"
            ));
            with_demonstration(DEDUCTION_TRANSLATION_DEMONSTRATION, &body)
        }
        PromptRecipe::OrderInversion { frame, answer } => frame.prompt(answer.trim()),
        PromptRecipe::PremiseErasure {
            question,
            start,
            end,
        } => erase_premise(question, *start..*end)?,
        PromptRecipe::AuxiliaryKnowledge { facts, question } => {
            let facts: Vec<&str> = facts.iter().map(|f| f.trim()).filter(|f| !f.is_empty()).collect();
            if facts.is_empty() {
                question.trim().to_string()
            } else {
                format!("{}\n\n{}", facts.join("\n"), question.trim())
            }
        }
        PromptRecipe::ChainOfThought { task, question } => {
            with_demonstration(task.demonstration(), question.trim())
        }
    };
    Ok(prompt)
}

/// Multiple-choice question laid out like the shipped demonstrations.
pub fn format_options_question(question: &str, choices: &[String]) -> String {
    let mut out = question.trim().to_string();
    for c in choices {
        out.push_str("\nOption: ");
        out.push_str(c.trim());
    }
    out
}

/// Statement truth prompt; scored with [`TRUE_CONTINUATION`] / [`FALSE_CONTINUATION`].
pub fn truth_prompt(statement: &str) -> String {
    format!(
        "True or False? {}. Answer:",
        statement.trim().trim_end_matches('.')
    )
}

pub const TRUE_CONTINUATION: &str = " True";
pub const FALSE_CONTINUATION: &str = " False";

/// Arithmetic comparison check, e.g. "2<3"; scored with " true" / " false".
pub fn inequality_prompt(comparison: &str) -> String {
    format!("True or false: {comparison}? The answer is:")
}

pub const INEQUALITY_TRUE: &str = " true";
pub const INEQUALITY_FALSE: &str = " false";

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn definition_examples() {
        let r = PromptRecipe::ExampleGeneration {
            subject: ExampleSubject::Definition("A bam is a simple dwelling".into()),
            count: 5,
            demonstration: None,
        };
        assert_eq!(
            build_prompt(&r).unwrap(),
            "A bam is a simple dwelling. Examples: 1."
        );
        let r = PromptRecipe::ExampleGeneration {
            subject: ExampleSubject::Definition("A bam is a simple dwelling.".into()),
            count: 5,
            demonstration: None,
        };
        assert_eq!(
            build_prompt(&r).unwrap(),
            "A bam is a simple dwelling. Examples: 1."
        );
    }

    #[test]
    fn sports_prompt_ending() {
        let r = PromptRecipe::ExampleGeneration {
            subject: ExampleSubject::Description("players who threw a touchdown".into()),
            count: 4,
            demonstration: Some(SPORTS_DEMONSTRATION.into()),
        };
        let p = build_prompt(&r).unwrap();
        assert!(p.starts_with(SPORTS_DEMONSTRATION.trim_end()));
        assert!(p.ends_with("List 4 examples of players who threw a touchdown.\n1."));
    }

    #[test]
    fn list_of_words() {
        let r = PromptRecipe::ListOfWordsPrefix { word: "cat".into() };
        assert_eq!(build_prompt(&r).unwrap(), "List of words: cat, ");
    }

    #[test]
    fn simple_recipes() {
        let facts = PromptRecipe::FactGeneration {
            topic: "cats".into(),
        };
        assert_eq!(build_prompt(&facts).unwrap(), "List facts about cats. 1.");
        let tr = PromptRecipe::Translation {
            source: "French".into(),
            target: "English".into(),
            text: "J'adore les chats noirs.".into(),
        };
        assert_eq!(
            build_prompt(&tr).unwrap(),
            "French: J'adore les chats noirs. English:"
        );
        let inv = PromptRecipe::OrderInversion {
            frame: InversionFrame::LanguageId,
            answer: "Kara".into(),
        };
        assert_eq!(
            build_prompt(&inv).unwrap(),
            "The following is a sentence in Kara:"
        );
    }

    #[test]
    fn invalid_recipes_rejected() {
        let r = PromptRecipe::ListDifferences {
            items: vec!["a".into()],
            count: 0,
        };
        assert!(matches!(
            build_prompt(&r),
            Err(ThinkError::InvalidRecipe(_))
        ));
        let r = PromptRecipe::FactGeneration { topic: " ".into() };
        assert!(build_prompt(&r).is_err());
        assert!(matches!(
            "poetry".parse::<RecipeKind>(),
            Err(ThinkError::UnsupportedKind(_))
        ));
    }

    #[test]
    fn kind_names_round_trip() {
        for k in RecipeKind::ALL {
            assert_eq!(k.name().parse::<RecipeKind>().unwrap(), k);
        }
    }

    #[test]
    fn recipe_json_round_trip() {
        let r = PromptRecipe::ChainOfThought {
            task: CotTask::OddOneOut,
            question: "Words: a, b".into(),
        };
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"kind\":\"chain-of-thought\""));
        assert_eq!(serde_json::from_str::<PromptRecipe>(&json).unwrap(), r);
    }

    #[test]
    fn cot_prompt_starts_with_demo_bytes() {
        let r = PromptRecipe::ChainOfThought {
            task: CotTask::PhraseRelatedness,
            question: "Input: home town".into(),
        };
        let p = build_prompt(&r).unwrap();
        assert!(p.starts_with(COT_PHRASE_RELATEDNESS.trim_end()));
        assert!(p.ends_with("\n\nInput: home town"));
    }
}
