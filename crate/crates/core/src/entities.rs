//! Entity transformations attached to documents.
//!
//! The synthesizer lifts annotated spans to entity-type predicates when an
//! entity covers them. Entities come either from the corpus file (external
//! NER output) or from a [`TransformationProvider`]; file entities win.

use std::collections::HashMap;

use regex::Regex;

use crate::corpus::{CorpusError, Document, EntitySpan};

pub trait TransformationProvider: Send + Sync {
    fn name(&self) -> &str;

    /// Every tag this provider may emit.
    fn tag_set(&self) -> Vec<String>;

    /// Raw spans for `doc`. They may overlap; [`annotate_entities`] resolves that.
    fn tag(&self, doc: &Document) -> Vec<EntitySpan>;
}

/// Merges provider output with the entities already on `doc`.
///
/// Entities already present on the document are kept verbatim. Provider spans
/// overlapping them are suppressed, and provider spans overlapping each other
/// are resolved leftmost-longest.
pub fn annotate_entities(
    doc: &Document,
    provider: &dyn TransformationProvider,
) -> Result<Vec<EntitySpan>, CorpusError> {
    let tags = provider.tag_set();
    let mut proposed = provider.tag(doc);
    for span in &proposed {
        if !tags.iter().any(|t| t == &span.entity_type) {
            return Err(CorpusError::UnregisteredTag {
                tag: span.entity_type.clone(),
                provider: provider.name().to_string(),
            });
        }
        if span.start_token >= span.end_token || span.end_token > doc.tokens.len() {
            return Err(CorpusError::InvalidEntitySpan {
                uid: doc.uid.clone(),
                start: span.start_token,
                end: span.end_token,
            });
        }
    }
    proposed.sort_by(|a, b| {
        a.start_token
            .cmp(&b.start_token)
            .then(b.end_token.cmp(&a.end_token))
            .then(a.entity_type.cmp(&b.entity_type))
    });
    let mut out = doc.entities.clone();
    for span in proposed {
        if out.iter().all(|kept| !kept.overlaps(&span)) {
            out.push(span);
        }
    }
    out.sort();
    Ok(out)
}

const PERSON_NAMES: &[&str] = &[
    "alice", "bob", "carol", "dave", "david", "emma", "eve", "frank", "grace", "henry", "isabella",
    "jack", "james", "jane", "john", "julia", "kate", "laura", "liam", "lucy", "maria", "mark",
    "mary", "michael", "mike", "noah", "olivia", "oliver", "paul", "peter", "robert", "sam",
    "sara", "sarah", "sophia", "steve", "susan", "taylor", "thomas", "tom", "william", "justin",
    "katy", "rihanna", "shakira", "eminem", "psy", "adele", "beyonce", "drake", "selena",
];

const LOCATIONS: &[&str] = &[
    "africa", "america", "amsterdam", "asia", "australia", "berlin", "boston", "brazil",
    "california", "canada", "chicago", "china", "england", "europe", "france", "germany", "india",
    "ireland", "italy", "japan", "korea", "london", "los angeles", "madrid", "mexico", "moscow",
    "new york", "paris", "rome", "russia", "san francisco", "seoul", "spain", "sydney", "texas",
    "tokyo", "toronto", "usa", "vienna", "washington",
];

const NUMBER_WORDS: &[&str] = &[
    "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "eleven",
    "twelve", "twenty", "thirty", "fifty", "hundred", "thousand", "million", "billion", "dozen",
];

/// Gazetteer plus regex tagger emitting PERSON, LOCATION, NUMBER, URL and EMAIL.
///
/// PERSON and LOCATION entries only fire on capitalized surfaces; NUMBER words
/// match in any case. URL and EMAIL regexes run over the raw text and are
/// snapped to the tokens they overlap.
pub struct GazetteerTagger {
    // first normalized token -> (phrase tokens, tag, needs capital)
    entries: HashMap<String, Vec<(Vec<String>, String, bool)>>,
    patterns: Vec<(String, Regex)>,
}

impl GazetteerTagger {
    pub const TAGS: [&'static str; 5] = ["PERSON", "LOCATION", "NUMBER", "URL", "EMAIL"];

    /// Tagger with no gazetteer entries and no patterns.
    pub fn empty() -> Self {
        GazetteerTagger { entries: HashMap::new(), patterns: Vec::new() }
    }

    /// Adds a gazetteer phrase. `tag` must be one of [`GazetteerTagger::TAGS`].
    pub fn with_entry(mut self, tag: &str, phrase: &str, needs_capital: bool) -> Self {
        let words: Vec<String> = phrase.split_whitespace().map(crate::corpus::normalize).collect();
        if let Some(first) = words.first().cloned() {
            let bucket = self.entries.entry(first).or_default();
            bucket.push((words, tag.to_string(), needs_capital));
            bucket.sort_by(|a, b| b.0.len().cmp(&a.0.len()));
        }
        self
    }

    pub fn with_pattern(mut self, tag: &str, pattern: &str) -> Result<Self, regex::Error> {
        self.patterns.push((tag.to_string(), Regex::new(pattern)?));
        Ok(self)
    }
}

impl Default for GazetteerTagger {
    fn default() -> Self {
        let mut tagger = GazetteerTagger::empty();
        for name in PERSON_NAMES {
            tagger = tagger.with_entry("PERSON", name, true);
        }
        for place in LOCATIONS {
            tagger = tagger.with_entry("LOCATION", place, true);
        }
        for word in NUMBER_WORDS {
            tagger = tagger.with_entry("NUMBER", word, false);
        }
        tagger
            .with_pattern("URL", r"(?i)\b(?:https?://|www\.)[^\s<>]+")
            .and_then(|t| t.with_pattern("EMAIL", r"\b[A-Za-z0-9._%+-]+@[A-Za-z0-9-]+(?:\.[A-Za-z0-9-]+)*\.[A-Za-z]{2,}\b"))
            .expect("built-in entity patterns compile")
    }
}

impl TransformationProvider for GazetteerTagger {
    fn name(&self) -> &str {
        "gazetteer"
    }

    fn tag_set(&self) -> Vec<String> {
        Self::TAGS.iter().map(|t| t.to_string()).collect()
    }

    fn tag(&self, doc: &Document) -> Vec<EntitySpan> {
        let mut spans = Vec::new();
        for (tag, re) in &self.patterns {
            for m in re.find_iter(&doc.text) {
                if let Some(range) = doc.snap_bytes(m.start(), m.end()) {
                    spans.push(EntitySpan {
                        start_token: range.start,
                        end_token: range.end,
                        entity_type: tag.clone(),
                    });
                }
            }
        }
        let toks = &doc.tokens;
        for (i, tok) in toks.iter().enumerate() {
            let Some(bucket) = self.entries.get(&tok.normalized) else { continue };
            let capitalized = tok.surface.chars().next().is_some_and(char::is_uppercase);
            let hit = bucket.iter().find(|(words, _, needs_capital)| {
                (!needs_capital || capitalized)
                    && i + words.len() <= toks.len()
                    && words.iter().zip(&toks[i..]).all(|(w, t)| *w == t.normalized)
            });
            if let Some((words, tag, _)) = hit {
                spans.push(EntitySpan {
                    start_token: i,
                    end_token: i + words.len(),
                    entity_type: tag.clone(),
                });
            }
        }
        spans
    }
}
