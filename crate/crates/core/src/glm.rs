//! Concepts, span annotations and relationships.
//!
//! An interaction is built with the operations of [`GlmOp`]: `select` and
//! `assign_concept` act on tokens, `create`/`add`/`delete` on concepts, and
//! `link`/`direct_to` on relationships between selected spans. Every
//! operation returns its inverse, so an editor can offer undo without
//! snapshotting state.
//!
//! Concept regexes use the syntax of the `regex` crate, compiled
//! case-insensitively. That engine runs in time linear in the input, never
//! backtracks, and has no look-around or back-references. A pattern that can
//! match the empty string is rejected.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;

use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{normalize, tokenize, Document};

/// Number of distinct concept colors the UI cycles through.
pub const PALETTE_SIZE: u8 = 12;

const REGEX_SIZE_LIMIT: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GlmError {
    #[error("span {start}..{end} overlaps an existing span")]
    Overlap { start: usize, end: usize },
    #[error("span {start}..{end} is empty or outside the document ({n_tokens} tokens)")]
    OutOfBounds { start: usize, end: usize, n_tokens: usize },
    #[error("unknown span id {0}")]
    UnknownSpan(u32),
    #[error("duplicate span id {0}")]
    DuplicateSpan(u32),
    #[error("unknown concept {0:?}")]
    UnknownConcept(String),
    #[error("concept {0:?} already exists")]
    DuplicateConcept(String),
    #[error("invalid concept name {0:?}")]
    InvalidConceptName(String),
    #[error("concept {concept:?} already contains {element}")]
    DuplicateElement { concept: String, element: String },
    #[error("concept {concept:?} has no element {element}")]
    UnknownElement { concept: String, element: String },
    #[error("invalid concept element {pattern:?}: {reason}")]
    InvalidElement { pattern: String, reason: String },
    #[error("a span cannot be linked to itself")]
    SelfLink,
    #[error("spans {0} and {1} are already linked")]
    DuplicateLink(u32, u32),
    #[error("spans {0} and {1} are not linked")]
    UnknownLink(u32, u32),
    #[error("direct_to requires span {0} to start before span {1}")]
    BadDirection(u32, u32),
    #[error("an interaction needs at least one span")]
    EmptyInteraction,
    #[error("label {label} outside 0..{n_classes}")]
    LabelOutOfRange { label: usize, n_classes: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementKind {
    Token,
    Regex,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ConceptElement {
    pub kind: ElementKind,
    pub pattern: String,
}

impl ConceptElement {
    /// A whole-token literal. Stored case-folded.
    pub fn token(pattern: &str) -> Self {
        ConceptElement { kind: ElementKind::Token, pattern: normalize(pattern) }
    }

    pub fn regex(pattern: &str) -> Self {
        ConceptElement { kind: ElementKind::Regex, pattern: pattern.to_string() }
    }

    fn compile(&self) -> Result<Option<Regex>, GlmError> {
        let invalid = |reason: String| GlmError::InvalidElement { pattern: self.pattern.clone(), reason };
        match self.kind {
            ElementKind::Token => {
                let toks = tokenize(&self.pattern);
                if toks.len() != 1 || toks[0].surface.len() != self.pattern.len() {
                    return Err(invalid("a token literal must be exactly one whole word".into()));
                }
                if toks[0].normalized != self.pattern {
                    return Err(invalid("token literals are stored case-folded".into()));
                }
                Ok(None)
            }
            ElementKind::Regex => {
                let re = RegexBuilder::new(&self.pattern)
                    .case_insensitive(true)
                    .size_limit(REGEX_SIZE_LIMIT)
                    .build()
                    .map_err(|e| invalid(e.to_string()))?;
                if re.is_match("") {
                    return Err(invalid("pattern matches the empty string".into()));
                }
                Ok(Some(re))
            }
        }
    }
}

impl fmt::Display for ConceptElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ElementKind::Token => write!(f, "{}", self.pattern),
            ElementKind::Regex => write!(f, "/{}/", self.pattern),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ConceptRepr {
    name: String,
    elements: Vec<ConceptElement>,
    color_hint: u8,
}

/// A named, ordered set of token literals and regexes.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "ConceptRepr", into = "ConceptRepr")]
pub struct Concept {
    name: String,
    elements: Vec<ConceptElement>,
    color_hint: u8,
    compiled: Vec<Option<Regex>>,
}

impl PartialEq for Concept {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.elements == other.elements && self.color_hint == other.color_hint
    }
}

impl TryFrom<ConceptRepr> for Concept {
    type Error = GlmError;

    fn try_from(repr: ConceptRepr) -> Result<Self, GlmError> {
        let mut concept = Concept::new(&repr.name, repr.color_hint)?;
        for element in repr.elements {
            concept.insert(element, None)?;
        }
        Ok(concept)
    }
}

impl From<Concept> for ConceptRepr {
    fn from(c: Concept) -> Self {
        ConceptRepr { name: c.name, elements: c.elements, color_hint: c.color_hint }
    }
}

impl Concept {
    pub fn new(name: &str, color_hint: u8) -> Result<Self, GlmError> {
        if name.is_empty() || name.chars().any(char::is_whitespace) {
            return Err(GlmError::InvalidConceptName(name.to_string()));
        }
        Ok(Concept { name: name.to_string(), elements: Vec::new(), color_hint, compiled: Vec::new() })
    }

    /// Builds a concept from token literals; handy in tests and fixtures.
    pub fn from_tokens(name: &str, words: &[&str]) -> Result<Self, GlmError> {
        let mut c = Concept::new(name, 0)?;
        for w in words {
            c.insert(ConceptElement::token(w), None)?;
        }
        Ok(c)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn elements(&self) -> &[ConceptElement] {
        &self.elements
    }

    pub fn color_hint(&self) -> u8 {
        self.color_hint
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn contains(&self, element: &ConceptElement) -> bool {
        self.elements.contains(element)
    }

    /// Inserts at `position` (clamped), or appends. Returns the final index.
    pub fn insert(&mut self, element: ConceptElement, position: Option<usize>) -> Result<usize, GlmError> {
        if self.contains(&element) {
            return Err(GlmError::DuplicateElement { concept: self.name.clone(), element: element.to_string() });
        }
        let compiled = element.compile()?;
        let at = position.unwrap_or(self.elements.len()).min(self.elements.len());
        self.elements.insert(at, element);
        self.compiled.insert(at, compiled);
        Ok(at)
    }

    /// Removes `element`, returning the index it occupied.
    pub fn remove(&mut self, element: &ConceptElement) -> Result<usize, GlmError> {
        let at = self.elements.iter().position(|e| e == element).ok_or_else(|| GlmError::UnknownElement {
            concept: self.name.clone(),
            element: element.to_string(),
        })?;
        self.elements.remove(at);
        self.compiled.remove(at);
        Ok(at)
    }

    /// True if the concept matches the whole of `phrase` (normalized tokens
    /// joined by single spaces).
    pub fn covers_phrase(&self, phrase: &str) -> bool {
        let doc = Document::new("", phrase);
        let full = 0..doc.tokens.len();
        !full.is_empty() && concept_matches(self, &doc).contains(&full)
    }
}

/// Token ranges of `doc` matched by `concept`, sorted and deduplicated.
///
/// Token literals match whole tokens case-insensitively. Regexes run over the
/// raw text and each match is snapped to the tokens it overlaps; matches that
/// touch no token are dropped.
pub fn concept_matches(concept: &Concept, doc: &Document) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    for (element, compiled) in concept.elements.iter().zip(&concept.compiled) {
        match compiled {
            None => out.extend(
                doc.tokens.iter().filter(|t| t.normalized == element.pattern).map(|t| t.index..t.index + 1),
            ),
            Some(re) => {
                out.extend(re.find_iter(&doc.text).filter_map(|m| doc.snap_bytes(m.start(), m.end())))
            }
        }
    }
    out.sort_by_key(|r| (r.start, r.end));
    out.dedup();
    out
}

/// Project-wide concepts, referenced by name from rules.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConceptStore {
    concepts: BTreeMap<String, Concept>,
}

impl ConceptStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, name: &str) -> Option<&Concept> {
        self.concepts.get(name)
    }

    pub fn require(&self, name: &str) -> Result<&Concept, GlmError> {
        self.get(name).ok_or_else(|| GlmError::UnknownConcept(name.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = &Concept> {
        self.concepts.values()
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    /// Lowest palette slot not used by an existing concept.
    fn free_color(&self) -> u8 {
        (0..PALETTE_SIZE)
            .find(|c| self.concepts.values().all(|k| k.color_hint != *c))
            .unwrap_or((self.concepts.len() % PALETTE_SIZE as usize) as u8)
    }

    pub fn create(&mut self, name: &str) -> Result<&Concept, GlmError> {
        if self.concepts.contains_key(name) {
            return Err(GlmError::DuplicateConcept(name.to_string()));
        }
        let concept = Concept::new(name, self.free_color())?;
        Ok(self.concepts.entry(name.to_string()).or_insert(concept))
    }

    /// Inserts a fully formed concept, e.g. when restoring a deleted one.
    pub fn insert(&mut self, concept: Concept) -> Result<(), GlmError> {
        if self.concepts.contains_key(concept.name()) {
            return Err(GlmError::DuplicateConcept(concept.name().to_string()));
        }
        self.concepts.insert(concept.name().to_string(), concept);
        Ok(())
    }

    pub fn delete(&mut self, name: &str) -> Result<Concept, GlmError> {
        self.concepts.remove(name).ok_or_else(|| GlmError::UnknownConcept(name.to_string()))
    }

    pub fn add_element(
        &mut self,
        name: &str,
        element: ConceptElement,
        position: Option<usize>,
    ) -> Result<usize, GlmError> {
        self.concepts
            .get_mut(name)
            .ok_or_else(|| GlmError::UnknownConcept(name.to_string()))?
            .insert(element, position)
    }

    pub fn delete_element(&mut self, name: &str, element: &ConceptElement) -> Result<usize, GlmError> {
        self.concepts
            .get_mut(name)
            .ok_or_else(|| GlmError::UnknownConcept(name.to_string()))?
            .remove(element)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanAnnotation {
    pub id: u32,
    pub start_token: usize,
    pub end_token: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub concept: Option<String>,
}

impl SpanAnnotation {
    pub fn range(&self) -> Range<usize> {
        self.start_token..self.end_token
    }

    fn overlaps(&self, start: usize, end: usize) -> bool {
        self.start_token < end && start < self.end_token
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LinkAnnotation {
    pub a: u32,
    pub b: u32,
    /// When set, span `a` precedes span `b`.
    pub directed: bool,
}

impl LinkAnnotation {
    fn joins(&self, x: u32, y: u32) -> bool {
        (self.a == x && self.b == y) || (self.a == y && self.b == x)
    }
}

/// One labeler demonstration on one document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interaction {
    pub doc_uid: String,
    pub spans: Vec<SpanAnnotation>,
    #[serde(default)]
    pub links: Vec<LinkAnnotation>,
    pub label: usize,
}

impl Interaction {
    /// Checks the interaction against the document it annotates.
    pub fn validate(&self, n_tokens: usize, n_classes: usize) -> Result<(), GlmError> {
        if self.label >= n_classes {
            return Err(GlmError::LabelOutOfRange { label: self.label, n_classes });
        }
        if self.spans.is_empty() {
            return Err(GlmError::EmptyInteraction);
        }
        for (i, s) in self.spans.iter().enumerate() {
            if s.start_token >= s.end_token || s.end_token > n_tokens {
                return Err(GlmError::OutOfBounds { start: s.start_token, end: s.end_token, n_tokens });
            }
            for other in &self.spans[..i] {
                if other.id == s.id {
                    return Err(GlmError::DuplicateSpan(s.id));
                }
                if other.overlaps(s.start_token, s.end_token) {
                    return Err(GlmError::Overlap { start: s.start_token, end: s.end_token });
                }
            }
        }
        let span = |id: u32| self.spans.iter().find(|s| s.id == id).ok_or(GlmError::UnknownSpan(id));
        for (i, link) in self.links.iter().enumerate() {
            if link.a == link.b {
                return Err(GlmError::SelfLink);
            }
            let (a, b) = (span(link.a)?, span(link.b)?);
            if link.directed && a.start_token >= b.start_token {
                return Err(GlmError::BadDirection(link.a, link.b));
            }
            if self.links[..i].iter().any(|l| l.joins(link.a, link.b)) {
                return Err(GlmError::DuplicateLink(link.a, link.b));
            }
        }
        Ok(())
    }
}

/// An interaction under construction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationDraft {
    pub doc_uid: String,
    pub n_tokens: usize,
    /// Sorted by id.
    pub spans: Vec<SpanAnnotation>,
    /// Sorted by `(a, b)`.
    pub links: Vec<LinkAnnotation>,
}

impl AnnotationDraft {
    pub fn new(doc: &Document) -> Self {
        AnnotationDraft { doc_uid: doc.uid.clone(), n_tokens: doc.tokens.len(), spans: Vec::new(), links: Vec::new() }
    }

    pub fn span(&self, id: u32) -> Result<&SpanAnnotation, GlmError> {
        self.spans.iter().find(|s| s.id == id).ok_or(GlmError::UnknownSpan(id))
    }

    /// Id the next `select` will receive.
    pub fn next_id(&self) -> u32 {
        self.spans.last().map_or(0, |s| s.id + 1)
    }

    pub fn finish(&self, label: usize, n_classes: usize) -> Result<Interaction, GlmError> {
        let ix = Interaction {
            doc_uid: self.doc_uid.clone(),
            spans: self.spans.clone(),
            links: self.links.clone(),
            label,
        };
        ix.validate(self.n_tokens, n_classes)?;
        Ok(ix)
    }

    fn add_link(&mut self, a: u32, b: u32, directed: bool) -> Result<(), GlmError> {
        if a == b {
            return Err(GlmError::SelfLink);
        }
        let (sa, sb) = (self.span(a)?, self.span(b)?);
        if directed && sa.start_token >= sb.start_token {
            return Err(GlmError::BadDirection(a, b));
        }
        if self.links.iter().any(|l| l.joins(a, b)) {
            return Err(GlmError::DuplicateLink(a, b));
        }
        self.links.push(LinkAnnotation { a, b, directed });
        self.links.sort();
        Ok(())
    }
}

/// The labeling-interface operations, plus the restore variants needed to
/// invert deletions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum GlmOp {
    Select { start: usize, end: usize },
    Deselect { id: u32 },
    RestoreSpan { span: SpanAnnotation, links: Vec<LinkAnnotation> },
    AssignConcept { span: u32, concept: Option<String> },
    CreateConcept { name: String },
    DeleteConcept { name: String },
    RestoreConcept { concept: Concept },
    AddElement { concept: String, element: ConceptElement, #[serde(default)] position: Option<usize> },
    DeleteElement { concept: String, element: ConceptElement },
    Link { a: u32, b: u32 },
    DirectTo { a: u32, b: u32 },
    Unlink { a: u32, b: u32 },
}

impl GlmOp {
    /// True for operations that only touch the concept store.
    pub fn is_concept_edit(&self) -> bool {
        matches!(
            self,
            GlmOp::CreateConcept { .. }
                | GlmOp::DeleteConcept { .. }
                | GlmOp::RestoreConcept { .. }
                | GlmOp::AddElement { .. }
                | GlmOp::DeleteElement { .. }
        )
    }
}

/// Applies `op` and returns the operation that undoes it. On error the state
/// is left untouched.
pub fn apply_operation(
    draft: &mut AnnotationDraft,
    store: &mut ConceptStore,
    op: GlmOp,
) -> Result<GlmOp, GlmError> {
    match op {
        GlmOp::Select { start, end } => {
            if start >= end || end > draft.n_tokens {
                return Err(GlmError::OutOfBounds { start, end, n_tokens: draft.n_tokens });
            }
            if draft.spans.iter().any(|s| s.overlaps(start, end)) {
                return Err(GlmError::Overlap { start, end });
            }
            let id = draft.next_id();
            draft.spans.push(SpanAnnotation { id, start_token: start, end_token: end, concept: None });
            Ok(GlmOp::Deselect { id })
        }
        GlmOp::Deselect { id } => {
            let pos = draft.spans.iter().position(|s| s.id == id).ok_or(GlmError::UnknownSpan(id))?;
            let span = draft.spans.remove(pos);
            let (links, kept): (Vec<_>, Vec<_>) = draft.links.iter().partition(|l| l.a == id || l.b == id);
            draft.links = kept;
            Ok(GlmOp::RestoreSpan { span, links })
        }
        GlmOp::RestoreSpan { span, links } => {
            if draft.spans.iter().any(|s| s.id == span.id) {
                return Err(GlmError::DuplicateSpan(span.id));
            }
            if span.start_token >= span.end_token || span.end_token > draft.n_tokens {
                return Err(GlmError::OutOfBounds {
                    start: span.start_token,
                    end: span.end_token,
                    n_tokens: draft.n_tokens,
                });
            }
            if draft.spans.iter().any(|s| s.overlaps(span.start_token, span.end_token)) {
                return Err(GlmError::Overlap { start: span.start_token, end: span.end_token });
            }
            let id = span.id;
            let mut next = draft.clone();
            let pos = next.spans.partition_point(|s| s.id < id);
            next.spans.insert(pos, span);
            for l in links {
                next.add_link(l.a, l.b, l.directed)?;
            }
            *draft = next;
            Ok(GlmOp::Deselect { id })
        }
        GlmOp::AssignConcept { span, concept } => {
            if let Some(name) = &concept {
                store.require(name)?;
            }
            let pos = draft.spans.iter().position(|s| s.id == span).ok_or(GlmError::UnknownSpan(span))?;
            let previous = std::mem::replace(&mut draft.spans[pos].concept, concept);
            Ok(GlmOp::AssignConcept { span, concept: previous })
        }
        GlmOp::CreateConcept { name } => {
            store.create(&name)?;
            Ok(GlmOp::DeleteConcept { name })
        }
        GlmOp::DeleteConcept { name } => {
            let concept = store.delete(&name)?;
            Ok(GlmOp::RestoreConcept { concept })
        }
        GlmOp::RestoreConcept { concept } => {
            let name = concept.name().to_string();
            store.insert(concept)?;
            Ok(GlmOp::DeleteConcept { name })
        }
        GlmOp::AddElement { concept, element, position } => {
            store.add_element(&concept, element.clone(), position)?;
            Ok(GlmOp::DeleteElement { concept, element })
        }
        GlmOp::DeleteElement { concept, element } => {
            let at = store.delete_element(&concept, &element)?;
            Ok(GlmOp::AddElement { concept, element, position: Some(at) })
        }
        GlmOp::Link { a, b } => {
            draft.add_link(a, b, false)?;
            Ok(GlmOp::Unlink { a, b })
        }
        GlmOp::DirectTo { a, b } => {
            draft.add_link(a, b, true)?;
            Ok(GlmOp::Unlink { a, b })
        }
        GlmOp::Unlink { a, b } => {
            let pos = draft.links.iter().position(|l| l.joins(a, b)).ok_or(GlmError::UnknownLink(a, b))?;
            let link = draft.links.remove(pos);
            Ok(if link.directed {
                GlmOp::DirectTo { a: link.a, b: link.b }
            } else {
                GlmOp::Link { a: link.a, b: link.b }
            })
        }
    }
}
