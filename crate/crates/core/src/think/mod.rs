//! String machinery for the Think stage: slot templates, prompt recipes,
//! parsing generated lists and constraints, and fact post-processing.

mod constraints;
mod grammar;
mod knowledge;
mod parse;
mod prompts;
mod template;

use thiserror::Error;

pub use constraints::{
    parse_comparison, parse_constraints, Comparison, ConstraintSet, Operand, ParsedConstraints,
    Relation,
};
pub use grammar::{is_plural_phrase, pluralize};
pub use knowledge::{clean_statement, postprocess_knowledge, KnowledgeTemplate, KNOWLEDGE_SLOT};
pub use parse::{erase_premise, parse_list_output, ParsedSet};
pub use prompts::{
    build_prompt, format_options_question, inequality_prompt, truth_prompt, CotTask,
    ExampleSubject, InversionFrame, PromptRecipe, RecipeKind, DEDUCTION_TRANSLATION_DEMONSTRATION,
    FALSE_CONTINUATION, INEQUALITY_FALSE, INEQUALITY_TRUE, LIST_DIFFERENCES_DEMONSTRATION,
    SPORTS_DEMONSTRATION, TRANSLATED_STATEMENTS_HEADER, TRUE_CONTINUATION,
};
pub use template::{Inflection, SlotTemplate};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ThinkError {
    #[error("no binding for slot {0:?}")]
    MissingBinding(String),
    #[error("invalid template: {0}")]
    InvalidTemplate(String),
    #[error("invalid prompt recipe: {0}")]
    InvalidRecipe(String),
    #[error("unsupported recipe kind {0:?}")]
    UnsupportedKind(String),
    #[error("no parseable constraint line ({} warnings)", warnings.len())]
    NoParseableLine { warnings: Vec<String> },
    #[error("span {start}..{end} out of range for text of length {len}")]
    SpanOutOfRange {
        start: usize,
        end: usize,
        len: usize,
    },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}
