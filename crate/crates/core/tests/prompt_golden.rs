//! Prompt bytes pinned against files in `tests/golden/prompts`.
//!
//! Set `THINKSUM_BLESS=1` to rewrite the files after an intended change.

use std::collections::BTreeSet;
use std::path::PathBuf;

use thinksum::think::{
    build_prompt, inequality_prompt, truth_prompt, CotTask, ExampleSubject, InversionFrame,
    PromptRecipe, RecipeKind, SPORTS_DEMONSTRATION,
};

fn s(x: &str) -> String {
    x.to_string()
}

fn cases() -> Vec<(&'static str, PromptRecipe)> {
    use PromptRecipe as R;
    vec![
        (
            "example_generation_definition",
            R::ExampleGeneration {
                subject: ExampleSubject::Definition(s("A binne is any animal that is furry and has four legs")),
                count: 5,
                demonstration: None,
            },
        ),
        (
            "example_generation_sports",
            R::ExampleGeneration {
                subject: ExampleSubject::Description(s("players who threw a touchdown")),
                count: 4,
                demonstration: Some(s(SPORTS_DEMONSTRATION)),
            },
        ),
        (
            "example_generation_synonyms",
            R::ExampleGeneration {
                subject: ExampleSubject::Synonyms(s("happy")),
                count: 5,
                demonstration: None,
            },
        ),
        (
            "list_extension",
            R::ListExtension {
                question: s("How often did Abraham Lincoln cut his toenails?"),
                answer: s("Every Saturday night"),
                count: 4,
            },
        ),
        ("list_of_words_prefix", R::ListOfWordsPrefix { word: s("Dessert") }),
        ("fact_generation", R::FactGeneration { topic: s("bananas") }),
        (
            "list_differences",
            R::ListDifferences {
                items: vec![s("glass"), s("head"), s("arm"), s("leg"), s("hand"), s("foot")],
                count: 5,
            },
        ),
        (
            "translation",
            R::Translation {
                source: s("Russian"),
                target: s("English"),
                text: s("Вакцины не вызывают аутизм."),
            },
        ),
        (
            "formal_translation",
            R::FormalTranslation {
                problem: s("On a shelf, there are three books: a black book, an orange book, and a yellow book. The yellow book is the leftmost. The orange book is to the right of the black book."),
                statements: vec![
                    s("The black book is the leftmost."),
                    s("The orange book is the leftmost."),
                    s("The yellow book is the leftmost."),
                ],
                object_count: 3,
            },
        ),
        (
            "order_inversion_emoji",
            R::OrderInversion {
                frame: InversionFrame::EmojiMovie,
                answer: s("pinocchio"),
            },
        ),
        (
            "order_inversion_words",
            R::OrderInversion {
                frame: InversionFrame::WordsMovie,
                answer: s("finding nemo"),
            },
        ),
        (
            "order_inversion_language",
            R::OrderInversion {
                frame: InversionFrame::LanguageId,
                answer: s("Kara"),
            },
        ),
        (
            "order_inversion_code",
            R::OrderInversion {
                frame: InversionFrame::CodeComment,
                answer: s("prints the numbers 0 to 2"),
            },
        ),
        (
            "premise_erasure",
            R::PremiseErasure {
                question: s("Mary has 3 apples. She buys 2 more. How many apples does she have?"),
                start: 0,
                end: 18,
            },
        ),
        (
            "auxiliary_knowledge",
            R::AuxiliaryKnowledge {
                facts: vec![s("Banana is a fruit."), s("Blue is a color.")],
                question: s("Pick the odd word out: blue, pink, magenta, banana"),
            },
        ),
        (
            "cot_odd_one_out",
            R::ChainOfThought {
                task: CotTask::OddOneOut,
                question: s("Words: glass, head, arm, leg, hand, foot"),
            },
        ),
        (
            "cot_phrase_relatedness",
            R::ChainOfThought {
                task: CotTask::PhraseRelatedness,
                question: s("Input: home town\nOption: city of birth\nOption: downtown"),
            },
        ),
        (
            "cot_known_unknowns",
            R::ChainOfThought {
                task: CotTask::KnownUnknowns,
                question: s("Q: What is the capital of France?\nOption: Paris\nOption: Unknown"),
            },
        ),
        (
            "cot_logical_deduction",
            R::ChainOfThought {
                task: CotTask::LogicalDeduction,
                question: s("On a shelf, there are two books: a red book and a blue book. The red book is the leftmost.\nOption: The red book is the rightmost.\nOption: The blue book is the rightmost."),
            },
        ),
        (
            "cot_invented_words",
            R::ChainOfThought {
                task: CotTask::InventedWords,
                question: s("The word 'plonk' means a large body of fresh water. Which sentence fits plonks?\nOption: Plonks are for sailing.\nOption: Plonks are for flying."),
            },
        ),
    ]
}

fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/prompts")
}

fn check(name: &str, actual: &str) {
    let path = golden_dir().join(format!("{name}.txt"));
    if std::env::var_os("THINKSUM_BLESS").is_some() {
        std::fs::create_dir_all(golden_dir()).unwrap();
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected =
        std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(actual, expected, "prompt bytes changed for {name}");
}

#[test]
fn every_recipe_matches_its_golden_file() {
    let mut kinds = BTreeSet::new();
    for (name, recipe) in cases() {
        kinds.insert(recipe.kind().name());
        check(name, &build_prompt(&recipe).unwrap());
    }
    let all: BTreeSet<&str> = RecipeKind::ALL.iter().map(|k| k.name()).collect();
    assert_eq!(kinds, all, "a recipe kind has no golden case");
}

#[test]
fn scoring_prompts_match_golden_files() {
    check("truth", &truth_prompt("Vaccines do not cause autism."));
    check("inequality", &inequality_prompt("2<3"));
}

#[test]
fn quoted_fragments_are_present() {
    let prompt = |r: PromptRecipe| build_prompt(&r).unwrap();
    assert!(prompt(PromptRecipe::ListOfWordsPrefix { word: s("a") }).starts_with("List of words: "));
    let definition = prompt(PromptRecipe::ExampleGeneration {
        subject: ExampleSubject::Definition(s("A bam is a simple sort of dwelling")),
        count: 5,
        demonstration: None,
    });
    assert!(definition.ends_with("Examples: 1."));
    assert!(prompt(PromptRecipe::OrderInversion {
        frame: InversionFrame::LanguageId,
        answer: s("Kara"),
    })
    .starts_with("The following is a sentence in"));
    assert_eq!(
        prompt(PromptRecipe::OrderInversion {
            frame: InversionFrame::EmojiMovie,
            answer: s("pinocchio"),
        }),
        "Emoji describing the movie pinocchio:"
    );
}
