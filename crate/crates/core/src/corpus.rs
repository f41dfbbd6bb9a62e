//! Document ingestion: tokenization, sentence splitting and JSONL corpus loading.
//!
//! A token is a maximal run of alphabetic characters, optionally extended by
//! one interior apostrophe followed by more letters (`don't`, `o'clock`).
//! Digits, punctuation and whitespace never belong to a token; concept regexes
//! still see them because they run against the raw text.
//!
//! Offsets exposed through [`Token::start`]/[`Token::end`] count Unicode scalar
//! values, which is also the unit used by the `entities` field of corpus files.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::ops::Range;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::entities::{annotate_entities, GazetteerTagger, TransformationProvider};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: schema error: {message}")]
    Schema { line: usize, message: String },
    #[error("overlapping entities at uid={uid}")]
    OverlappingEntities { uid: String },
    #[error("duplicate uid {uid}")]
    DuplicateUid { uid: String },
    #[error("entity tag {tag:?} is not registered by provider {provider}")]
    UnregisteredTag { tag: String, provider: String },
    #[error("entity span {start}..{end} is invalid for uid={uid}")]
    InvalidEntitySpan { uid: String, start: usize, end: usize },
    #[error("unknown split {0:?}")]
    UnknownSplit(String),
}

/// Which role a corpus plays in a project.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Unlabeled,
    Dev,
    Test,
    Valid,
}

impl Split {
    pub const ALL: [Split; 4] = [Split::Unlabeled, Split::Dev, Split::Test, Split::Valid];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Unlabeled => "unlabeled",
            Split::Dev => "dev",
            Split::Test => "test",
            Split::Valid => "valid",
        }
    }

    /// Dev, test and valid documents must carry a gold label.
    pub fn requires_labels(self) -> bool {
        !matches!(self, Split::Unlabeled)
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "unlabeled" | "train" => Ok(Split::Unlabeled),
            "dev" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            "valid" => Ok(Split::Valid),
            other => Err(CorpusError::UnknownSplit(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub index: usize,
    /// Character offset of the first scalar value.
    pub start: usize,
    /// Character offset one past the last scalar value.
    pub end: usize,
    pub byte_start: usize,
    pub byte_end: usize,
    pub surface: String,
    pub normalized: String,
}

/// Case folding is the only normalization applied to tokens.
pub fn normalize(surface: &str) -> String {
    surface.to_lowercase()
}

/// Splits `text` into whole-word tokens.
pub fn tokenize(text: &str) -> Vec<Token> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let byte_at = |i: usize| chars.get(i).map_or(text.len(), |&(b, _)| b);
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if !chars[i].1.is_alphabetic() {
            i += 1;
            continue;
        }
        let start = i;
        while i < chars.len() && chars[i].1.is_alphabetic() {
            i += 1;
        }
        if i + 1 < chars.len() && chars[i].1 == '\'' && chars[i + 1].1.is_alphabetic() {
            i += 1;
            while i < chars.len() && chars[i].1.is_alphabetic() {
                i += 1;
            }
        }
        let (byte_start, byte_end) = (byte_at(start), byte_at(i));
        let surface = &text[byte_start..byte_end];
        tokens.push(Token {
            index: tokens.len(),
            start,
            end: i,
            byte_start,
            byte_end,
            surface: surface.to_string(),
            normalized: normalize(surface),
        });
    }
    tokens
}

/// Sentence boundaries fall after any token whose trailing text (up to the
/// next token) contains `.`, `!` or `?`. Returns a partition of the token
/// indices into half-open ranges.
pub fn split_sentences(text: &str, tokens: &[Token]) -> Vec<Range<usize>> {
    let mut ranges = Vec::new();
    let mut start = 0;
    for (i, window) in tokens.windows(2).enumerate() {
        let gap = &text[window[0].byte_end..window[1].byte_start];
        if gap.contains(['.', '!', '?']) {
            ranges.push(start..i + 1);
            start = i + 1;
        }
    }
    if start < tokens.len() {
        ranges.push(start..tokens.len());
    }
    ranges
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EntitySpan {
    pub start_token: usize,
    pub end_token: usize,
    pub entity_type: String,
}

impl EntitySpan {
    pub fn range(&self) -> Range<usize> {
        self.start_token..self.end_token
    }

    pub fn overlaps(&self, other: &EntitySpan) -> bool {
        self.start_token < other.end_token && other.start_token < self.end_token
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub uid: String,
    pub text: String,
    pub tokens: Vec<Token>,
    pub sentences: Vec<Range<usize>>,
    pub entities: Vec<EntitySpan>,
    pub gold_label: Option<usize>,
}

impl Document {
    /// Tokenizes and sentence-splits `text`. Entities start out empty.
    pub fn new(uid: impl Into<String>, text: impl Into<String>) -> Self {
        let text = text.into();
        let tokens = tokenize(&text);
        let sentences = split_sentences(&text, &tokens);
        Document {
            uid: uid.into(),
            text,
            tokens,
            sentences,
            entities: Vec::new(),
            gold_label: None,
        }
    }

    pub fn with_label(mut self, label: usize) -> Self {
        self.gold_label = Some(label);
        self
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Index of the sentence containing `token`.
    pub fn sentence_of(&self, token: usize) -> Option<usize> {
        let pos = self.sentences.partition_point(|r| r.end <= token);
        self.sentences
            .get(pos)
            .filter(|r| r.contains(&token))
            .map(|_| pos)
    }

    /// Normalized tokens of `range` joined by single spaces.
    pub fn phrase(&self, range: Range<usize>) -> String {
        let mut out = String::new();
        for tok in &self.tokens[range] {
            if !out.is_empty() {
                out.push(' ');
            }
            out.push_str(&tok.normalized);
        }
        out
    }

    /// Smallest token range overlapping the character range `[start, end)`.
    pub fn snap_chars(&self, start: usize, end: usize) -> Option<Range<usize>> {
        let first = self.tokens.partition_point(|t| t.end <= start);
        let last = self.tokens.partition_point(|t| t.start < end);
        (first < last).then_some(first..last)
    }

    /// Same as [`Document::snap_chars`] for byte offsets into `text`.
    pub fn snap_bytes(&self, start: usize, end: usize) -> Option<Range<usize>> {
        let first = self.tokens.partition_point(|t| t.byte_end <= start);
        let last = self.tokens.partition_point(|t| t.byte_start < end);
        (first < last).then_some(first..last)
    }

    /// Checks the structural invariants; used by tests and on load.
    pub fn check_invariants(&self) -> Result<(), String> {
        let n_chars = self.text.chars().count();
        let mut prev_end = 0;
        for (i, tok) in self.tokens.iter().enumerate() {
            if tok.index != i {
                return Err(format!("token {i} has index {}", tok.index));
            }
            if tok.start < prev_end || tok.start >= tok.end || tok.end > n_chars {
                return Err(format!("token {i} range {}..{} out of order", tok.start, tok.end));
            }
            if self.text.get(tok.byte_start..tok.byte_end) != Some(tok.surface.as_str()) {
                return Err(format!("token {i} surface mismatch"));
            }
            if tok.normalized != normalize(&tok.surface) {
                return Err(format!("token {i} normalization mismatch"));
            }
            prev_end = tok.end;
        }
        let mut next = 0;
        for r in &self.sentences {
            if r.start != next || r.end <= r.start {
                return Err(format!("sentence ranges do not partition tokens at {next}"));
            }
            next = r.end;
        }
        if next != self.tokens.len() {
            return Err("sentence ranges do not cover all tokens".into());
        }
        for e in &self.entities {
            if e.start_token >= e.end_token || e.end_token > self.tokens.len() {
                return Err(format!("entity {e:?} out of bounds"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub split: Split,
    pub documents: Vec<Document>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl Corpus {
    pub fn new(split: Split, documents: Vec<Document>) -> Result<Self, CorpusError> {
        let mut index = HashMap::with_capacity(documents.len());
        for (i, doc) in documents.iter().enumerate() {
            if index.insert(doc.uid.clone(), i).is_some() {
                return Err(CorpusError::DuplicateUid { uid: doc.uid.clone() });
            }
        }
        Ok(Corpus { split, documents, index })
    }

    pub fn empty(split: Split) -> Self {
        Corpus { split, documents: Vec::new(), index: HashMap::new() }
    }

    pub fn get(&self, uid: &str) -> Option<&Document> {
        self.index.get(uid).map(|&i| &self.documents[i])
    }

    pub fn position(&self, uid: &str) -> Option<usize> {
        self.index.get(uid).copied()
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    /// Gold labels in document order; `None` if any document lacks one.
    pub fn gold_labels(&self) -> Option<Vec<usize>> {
        self.documents.iter().map(|d| d.gold_label).collect()
    }
}

#[derive(Debug, Deserialize)]
struct RawRecord {
    uid: String,
    text: String,
    #[serde(default)]
    label: Option<i64>,
    #[serde(default)]
    entities: Option<Vec<RawEntity>>,
}

#[derive(Debug, Deserialize)]
struct RawEntity {
    start: usize,
    end: usize,
    #[serde(rename = "type")]
    entity_type: String,
}

/// Loads a JSONL corpus file, annotating entities with the bundled gazetteer.
pub fn load_corpus(path: impl AsRef<Path>, split: Split) -> Result<Corpus, CorpusError> {
    load_corpus_with(path, split, &GazetteerTagger::default())
}

pub fn load_corpus_with(
    path: impl AsRef<Path>,
    split: Split,
    provider: &dyn TransformationProvider,
) -> Result<Corpus, CorpusError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_corpus(BufReader::new(file), split, provider)
}

/// Parses JSONL records from any reader. Blank lines are skipped.
pub fn parse_corpus(
    reader: impl BufRead,
    split: Split,
    provider: &dyn TransformationProvider,
) -> Result<Corpus, CorpusError> {
    let mut documents = Vec::new();
    let mut seen = HashSet::new();
    let mut warned_labels = false;
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| CorpusError::Malformed { line: line_no, message: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: RawRecord = serde_json::from_str(&line)
            .map_err(|e| CorpusError::Malformed { line: line_no, message: e.to_string() })?;
        if !seen.insert(record.uid.clone()) {
            return Err(CorpusError::DuplicateUid { uid: record.uid });
        }
        let gold_label = match (split.requires_labels(), record.label) {
            (true, None) => {
                return Err(CorpusError::Schema {
                    line: line_no,
                    message: format!("{split} record uid={} is missing \"label\"", record.uid),
                })
            }
            (true, Some(l)) if l < 0 => {
                return Err(CorpusError::Schema {
                    line: line_no,
                    message: format!("negative label {l} at uid={}", record.uid),
                })
            }
            (true, Some(l)) => Some(l as usize),
            (false, Some(_)) => {
                if !warned_labels {
                    log::warn!("labels present in the {split} split are ignored (first at line {line_no})");
                    warned_labels = true;
                }
                None
            }
            (false, None) => None,
        };
        let mut doc = Document::new(record.uid, record.text);
        doc.gold_label = gold_label;
        doc.entities = precomputed_entities(&doc, record.entities.unwrap_or_default())?;
        doc.entities = annotate_entities(&doc, provider)?;
        documents.push(doc);
    }
    Corpus::new(split, documents)
}

fn precomputed_entities(doc: &Document, raw: Vec<RawEntity>) -> Result<Vec<EntitySpan>, CorpusError> {
    let mut by_chars: Vec<&RawEntity> = raw.iter().collect();
    by_chars.sort_by_key(|e| (e.start, e.end));
    for pair in by_chars.windows(2) {
        if pair[1].start < pair[0].end {
            return Err(CorpusError::OverlappingEntities { uid: doc.uid.clone() });
        }
    }
    let n_chars = doc.text.chars().count();
    let mut spans: Vec<EntitySpan> = Vec::with_capacity(raw.len());
    for e in by_chars {
        if e.start >= e.end || e.end > n_chars {
            return Err(CorpusError::InvalidEntitySpan { uid: doc.uid.clone(), start: e.start, end: e.end });
        }
        let Some(range) = doc.snap_chars(e.start, e.end) else {
            log::warn!("entity {}..{} at uid={} covers no token; dropped", e.start, e.end, doc.uid);
            continue;
        };
        let span = EntitySpan {
            start_token: range.start,
            end_token: range.end,
            entity_type: e.entity_type.clone(),
        };
        if spans.last().is_some_and(|prev| prev.overlaps(&span)) {
            return Err(CorpusError::OverlappingEntities { uid: doc.uid.clone() });
        }
        spans.push(span);
    }
    Ok(spans)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn surfaces(text: &str) -> Vec<String> {
        tokenize(text).into_iter().map(|t| t.surface).collect()
    }

    #[test]
    fn tokenizes_whole_words_with_offsets() {
        let toks = tokenize("This book was so great!");
        let got: Vec<_> = toks.iter().map(|t| (t.surface.as_str(), t.start, t.end)).collect();
        assert_eq!(
            got,
            vec![("This", 0, 4), ("book", 5, 9), ("was", 10, 13), ("so", 14, 16), ("great", 17, 22)]
        );
        assert_eq!(toks[0].normalized, "this");
    }

    #[test]
    fn empty_text_has_no_tokens() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("  123 ... !!").is_empty());
    }

    #[test]
    fn apostrophes_and_hyphens() {
        assert_eq!(surfaces("don't re-read"), vec!["don't", "re", "read"]);
        assert_eq!(surfaces("rock'n'roll 'quoted'"), vec!["rock'n", "roll", "quoted"]);
        assert_eq!(surfaces("abc123def"), vec!["abc", "def"]);
    }

    #[test]
    fn unicode_offsets_are_in_chars() {
        let toks = tokenize("héllo wörld");
        assert_eq!((toks[1].start, toks[1].end), (6, 11));
        assert_eq!(toks[1].byte_start, 7);
        assert_eq!(toks[1].surface, "wörld");
    }

    #[test]
    fn sentence_boundaries() {
        let doc = Document::new("a", "Great book. Buy it!");
        assert_eq!(doc.sentences, vec![0..2, 2..4]);
        let doc = Document::new("b", "no terminal punctuation here");
        assert_eq!(doc.sentences, vec![0..4]);
        let doc = Document::new("c", "");
        assert!(doc.sentences.is_empty());
        let doc = Document::new("d", "Really?! Yes... ok");
        assert_eq!(doc.sentences, vec![0..1, 1..2, 2..3]);
        assert_eq!(doc.sentence_of(1), Some(1));
        assert_eq!(doc.sentence_of(3), None);
    }

    #[test]
    fn snapping_chars_to_tokens() {
        let doc = Document::new("a", "so grrreat, 42 times");
        assert_eq!(doc.snap_chars(3, 10), Some(1..2));
        assert_eq!(doc.snap_chars(5, 6), Some(1..2));
        assert_eq!(doc.snap_chars(12, 14), None);
        assert_eq!(doc.snap_chars(0, 20), Some(0..3));
    }

    fn parse(input: &str, split: Split) -> Result<Corpus, CorpusError> {
        parse_corpus(Cursor::new(input), split, &GazetteerTagger::default())
    }

    #[test]
    fn loads_labeled_records() {
        let input = "{\"uid\":\"a\",\"text\":\"Great book.\",\"label\":1}\n{\"uid\":\"b\",\"text\":\"Awful.\",\"label\":0}\n";
        let corpus = parse(input, Split::Dev).unwrap();
        assert_eq!(corpus.len(), 2);
        assert_eq!(corpus.gold_labels(), Some(vec![1, 0]));
        assert_eq!(corpus.get("b").unwrap().tokens.len(), 1);

        let unlabeled = parse(input, Split::Unlabeled).unwrap();
        assert!(unlabeled.documents.iter().all(|d| d.gold_label.is_none()));
    }

    #[test]
    fn missing_label_is_a_schema_error() {
        let input = "{\"uid\":\"a\",\"text\":\"x\",\"label\":1}\n{\"uid\":\"b\",\"text\":\"y\"}\n";
        match parse(input, Split::Test) {
            Err(CorpusError::Schema { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let input = "{\"uid\":\"a\",\"text\":\"x\"}\n\n{oops\n";
        match parse(input, Split::Unlabeled) {
            Err(CorpusError::Malformed { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn overlapping_precomputed_entities_rejected() {
        let input = r#"{"uid":"u7","text":"Alice Smith went home","entities":[{"start":0,"end":11,"type":"PERSON"},{"start":6,"end":11,"type":"PERSON"}]}"#;
        let err = parse(input, Split::Unlabeled).unwrap_err();
        assert_eq!(err.to_string(), "overlapping entities at uid=u7");
    }

    #[test]
    fn duplicate_uids_rejected() {
        let input = "{\"uid\":\"a\",\"text\":\"x\"}\n{\"uid\":\"a\",\"text\":\"y\"}\n";
        assert!(matches!(parse(input, Split::Unlabeled), Err(CorpusError::DuplicateUid { .. })));
    }
}
