//! Small rule table used for syntax normalization at slot boundaries.

const IRREGULAR_PLURALS: &[(&str, &str)] = &[
    ("man", "men"),
    ("woman", "women"),
    ("child", "children"),
    ("person", "people"),
    ("mouse", "mice"),
    ("foot", "feet"),
    ("tooth", "teeth"),
    ("goose", "geese"),
];

const PLURAL_WORDS: &[&str] = &[
    "they", "we", "people", "children", "men", "women", "mice", "feet", "teeth", "geese",
];

/// (plural-subject form, singular-subject form)
const VERB_FORMS: &[(&str, &str)] = &[
    ("are", "is"),
    ("were", "was"),
    ("have", "has"),
    ("do", "does"),
    ("don't", "doesn't"),
    ("go", "goes"),
    ("fly", "flies"),
    ("carry", "carries"),
    ("make", "makes"),
    ("live", "lives"),
    ("eat", "eats"),
    ("need", "needs"),
    ("like", "likes"),
    ("contain", "contains"),
    ("come", "comes"),
    ("grow", "grows"),
    ("move", "moves"),
    ("run", "runs"),
    ("use", "uses"),
    ("help", "helps"),
    ("look", "looks"),
    ("feel", "feels"),
    ("sound", "sounds"),
    ("taste", "tastes"),
    ("belong", "belongs"),
    ("play", "plays"),
    ("produce", "produces"),
    ("require", "requires"),
    ("share", "shares"),
    ("exist", "exists"),
    ("swim", "swims"),
    ("cause", "causes"),
    ("bite", "bites"),
    ("chew", "chews"),
    ("hold", "holds"),
    ("keep", "keeps"),
    ("mean", "means"),
    ("provide", "provides"),
    ("serve", "serves"),
    ("work", "works"),
    ("sit", "sits"),
    ("stand", "stands"),
    ("walk", "walks"),
    ("shine", "shines"),
    ("float", "floats"),
    ("weigh", "weighs"),
];

fn is_vowel(c: char) -> bool {
    matches!(c.to_ascii_lowercase(), 'a' | 'e' | 'i' | 'o' | 'u')
}

fn with_case_of(template: &str, word: &str) -> String {
    if template.chars().next().is_some_and(char::is_uppercase) {
        capitalize(word)
    } else {
        word.to_string()
    }
}

pub(crate) fn capitalize(text: &str) -> String {
    let mut chars = text.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// Naive plural of the last word of `phrase` (s / es / ies plus a few irregulars).
pub fn pluralize(phrase: &str) -> String {
    let split = phrase.rfind(' ').map_or(0, |i| i + 1);
    let (head, word) = phrase.split_at(split);
    let lower = word.to_lowercase();
    if let Some((_, plural)) = IRREGULAR_PLURALS.iter().find(|(s, _)| *s == lower) {
        return format!("{head}{}", with_case_of(word, plural));
    }
    let plural = if lower.ends_with('y')
        && lower.len() > 1
        && !is_vowel(lower.chars().nth(lower.len() - 2).unwrap_or('a'))
    {
        format!("{}ies", &word[..word.len() - 1])
    } else if ["s", "x", "z", "ch", "sh"]
        .iter()
        .any(|suf| lower.ends_with(suf))
    {
        format!("{word}es")
    } else {
        format!("{word}s")
    };
    format!("{head}{plural}")
}

/// Whether a noun phrase reads as grammatically plural.
pub fn is_plural_phrase(phrase: &str) -> bool {
    let lower = phrase.trim().to_lowercase();
    if ["a ", "an ", "one ", "this ", "that ", "each ", "every "]
        .iter()
        .any(|p| lower.starts_with(p))
    {
        return false;
    }
    let last = lower
        .rsplit(' ')
        .next()
        .unwrap_or("")
        .trim_matches(|c: char| !c.is_alphanumeric());
    if PLURAL_WORDS.contains(&last) {
        return true;
    }
    last.len() > 2
        && last.ends_with('s')
        && !["ss", "us", "is"].iter().any(|suf| last.ends_with(suf))
        && last.chars().all(char::is_alphabetic)
}

/// The form of `verb` agreeing with a plural or singular subject, if `verb` is in the table.
pub(crate) fn agree_verb(verb: &str, plural: bool) -> Option<String> {
    let lower = verb.to_lowercase();
    VERB_FORMS
        .iter()
        .find(|(p, s)| *p == lower || *s == lower)
        .map(|(p, s)| with_case_of(verb, if plural { p } else { s }))
}

/// "a" or "an" for the word that follows, keeping the article's case.
pub(crate) fn article_for(article: &str, next_word: &str) -> String {
    let an = next_word.chars().next().is_some_and(is_vowel);
    with_case_of(article, if an { "an" } else { "a" })
}
