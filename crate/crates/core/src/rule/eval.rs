use std::collections::{BTreeSet, HashMap, HashSet};
use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Op, Predicate, Rhs, Rule, RuleError, RuleId, Transform, Var};
use crate::corpus::{Corpus, Document};
use crate::glm::{concept_matches, ConceptStore};

/// Cell value for a function that does not fire on a document.
pub const ABSTAIN: i32 = -1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelingFunction {
    pub rule: Rule,
    /// Acceptance sequence number; orders the matrix columns.
    pub accepted_at: u64,
    pub enabled: bool,
}

impl LabelingFunction {
    pub fn id(&self) -> &str {
        self.rule.id()
    }
}

fn phrase_of(doc: &Document, range: &Range<usize>, transform: Option<Transform>) -> String {
    match transform {
        Some(Transform::CaseFold) => doc.phrase(range.clone()),
        _ => doc.tokens[range.clone()].iter().map(|t| t.surface.as_str()).collect::<Vec<_>>().join(" "),
    }
}

fn literal_occurrences(doc: &Document, literal: &str, transform: Option<Transform>) -> Vec<Range<usize>> {
    let width = literal.split(' ').count();
    if width == 0 || width > doc.tokens.len() {
        return Vec::new();
    }
    (0..=doc.tokens.len() - width)
        .map(|i| i..i + width)
        .filter(|r| phrase_of(doc, r, transform) == literal)
        .collect()
}

fn entity_tokens(doc: &Document, tag: &str) -> Vec<Range<usize>> {
    let mut out: Vec<Range<usize>> = doc
        .entities
        .iter()
        .filter(|e| e.entity_type == tag)
        .flat_map(|e| e.range())
        .map(|i| i..i + 1)
        .collect();
    out.sort_by_key(|r| r.start);
    out.dedup();
    out
}

/// Ranges satisfying a positive unary predicate (`=` or `∈`).
fn positive_candidates(p: &Predicate, doc: &Document, store: &ConceptStore) -> Result<Vec<Range<usize>>, RuleError> {
    Ok(match (&p.op, &p.rhs) {
        (Op::Eq, Rhs::Literal(w)) => literal_occurrences(doc, w, p.transform),
        (Op::In, Rhs::Concept(c)) => {
            concept_matches(store.get(c).ok_or_else(|| RuleError::UnknownConcept(c.clone()))?, doc)
        }
        (Op::In, Rhs::Entity(tag)) => entity_tokens(doc, tag),
        _ => unreachable!("not a positive unary predicate"),
    })
}

/// `∉` guard: nothing in the document may match.
fn guard_holds(p: &Predicate, doc: &Document, store: &ConceptStore) -> Result<bool, RuleError> {
    Ok(match &p.rhs {
        Rhs::Concept(c) => {
            concept_matches(store.get(c).ok_or_else(|| RuleError::UnknownConcept(c.clone()))?, doc).is_empty()
        }
        Rhs::Entity(tag) => doc.entities.iter().all(|e| &e.entity_type != tag),
        _ => unreachable!("guards take a set"),
    })
}

/// Evaluates `rule` on one document: `Some(label)` if some assignment of
/// token ranges to the binding variables satisfies every condition.
///
/// Semantics:
/// * `t = w` binds `t` to a run of tokens whose phrase equals `w`;
/// * `t ∈ c` binds `t` to a concept match; `t ∈ <E>` to a single token
///   covered by an entity of type `E`;
/// * `t ≠ w` filters bindings; a variable with no `=`/`∈` ranges over
///   single tokens;
/// * `t ∉ c` / `t ∉ <E>` is a document-level absence guard and binds nothing;
/// * `idx(a) < idx(b)` compares the first token of each binding;
/// * a sentence scope requires both bindings to start in one sentence;
/// * two variables never bind the same token range.
pub fn evaluate_rule(rule: &Rule, doc: &Document, store: &ConceptStore) -> Result<Option<usize>, RuleError> {
    for name in rule.concepts() {
        if store.get(name).is_none() {
            return Err(RuleError::UnknownConcept(name.to_string()));
        }
    }
    for p in rule.conditions().iter().filter(|p| p.op == Op::NotIn) {
        if !guard_holds(p, doc, store)? {
            return Ok(None);
        }
    }

    let binding = rule.binding_variables();
    let mut candidates: Vec<(Var, Vec<Range<usize>>)> = Vec::with_capacity(binding.len());
    for &var in &binding {
        let unary: Vec<&Predicate> = rule
            .conditions()
            .iter()
            .filter(|p| p.lhs == var && matches!(p.op, Op::Eq | Op::Ne | Op::In))
            .collect();
        let mut ranges: Option<Vec<Range<usize>>> = None;
        for p in unary.iter().filter(|p| p.op != Op::Ne) {
            let found = positive_candidates(p, doc, store)?;
            ranges = Some(match ranges {
                None => found,
                Some(prev) => {
                    let keep: HashSet<(usize, usize)> = found.iter().map(|r| (r.start, r.end)).collect();
                    prev.into_iter().filter(|r| keep.contains(&(r.start, r.end))).collect()
                }
            });
        }
        let mut ranges = ranges.unwrap_or_else(|| (0..doc.tokens.len()).map(|i| i..i + 1).collect());
        for p in unary.iter().filter(|p| p.op == Op::Ne) {
            if let Rhs::Literal(w) = &p.rhs {
                ranges.retain(|r| &phrase_of(doc, r, p.transform) != w);
            }
        }
        if ranges.is_empty() {
            return Ok(None);
        }
        candidates.push((var, ranges));
    }
    candidates.sort_by_key(|(v, c)| (c.len(), *v));

    let positional: Vec<(Var, Var)> = rule
        .conditions()
        .iter()
        .filter_map(|p| match (&p.op, &p.rhs) {
            (Op::Before, Rhs::Var(b)) => Some((p.lhs, *b)),
            _ => None,
        })
        .collect();
    let mut assignment: Vec<Option<Range<usize>>> = vec![None; rule.variables().len()];
    let found = join(&candidates, 0, &mut assignment, rule, &positional, doc);
    Ok(found.then_some(rule.label()))
}

fn consistent(
    var: Var,
    range: &Range<usize>,
    assignment: &[Option<Range<usize>>],
    rule: &Rule,
    positional: &[(Var, Var)],
    doc: &Document,
) -> bool {
    for (i, other) in assignment.iter().enumerate() {
        let Some(other) = other else { continue };
        let other_var = Var(i as u8);
        if other == range {
            return false;
        }
        if rule.in_same_sentence(var, other_var) && doc.sentence_of(range.start) != doc.sentence_of(other.start) {
            return false;
        }
    }
    positional.iter().all(|&(a, b)| {
        let start = |v: Var| if v == var { Some(range.start) } else { assignment[v.0 as usize].as_ref().map(|r| r.start) };
        match (start(a), start(b)) {
            (Some(sa), Some(sb)) if a == var || b == var => sa < sb,
            _ => true,
        }
    })
}

fn join(
    candidates: &[(Var, Vec<Range<usize>>)],
    depth: usize,
    assignment: &mut Vec<Option<Range<usize>>>,
    rule: &Rule,
    positional: &[(Var, Var)],
    doc: &Document,
) -> bool {
    let Some((var, ranges)) = candidates.get(depth) else { return true };
    for range in ranges {
        if consistent(*var, range, assignment, rule, positional, doc) {
            assignment[var.0 as usize] = Some(range.clone());
            if join(candidates, depth + 1, assignment, rule, positional, doc) {
                assignment[var.0 as usize] = None;
                return true;
            }
            assignment[var.0 as usize] = None;
        }
    }
    false
}

/// Documents × functions grid of votes, stored by column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelMatrix {
    row_ids: Vec<String>,
    column_ids: Vec<RuleId>,
    columns: Vec<Vec<i32>>,
}

impl LabelMatrix {
    pub fn new(row_ids: Vec<String>, column_ids: Vec<RuleId>, columns: Vec<Vec<i32>>) -> Self {
        assert_eq!(column_ids.len(), columns.len(), "one id per column");
        assert!(columns.iter().all(|c| c.len() == row_ids.len()), "ragged label matrix");
        LabelMatrix { row_ids, column_ids, columns }
    }

    /// Builds a matrix from row-major votes; columns are named `c0, c1, ...`.
    pub fn from_rows(rows: &[Vec<i32>]) -> Self {
        let n_cols = rows.first().map_or(0, Vec::len);
        let columns = (0..n_cols).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
        LabelMatrix::new(
            (0..rows.len()).map(|i| format!("r{i}")).collect(),
            (0..n_cols).map(|j| format!("c{j}")).collect(),
            columns,
        )
    }

    pub fn n_rows(&self) -> usize {
        self.row_ids.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }

    pub fn column_ids(&self) -> &[RuleId] {
        &self.column_ids
    }

    pub fn get(&self, row: usize, col: usize) -> i32 {
        self.columns[col][row]
    }

    pub fn column(&self, col: usize) -> &[i32] {
        &self.columns[col]
    }

    pub fn row(&self, row: usize) -> Vec<i32> {
        self.columns.iter().map(|c| c[row]).collect()
    }

    /// Whether any function fires on `row`.
    pub fn is_covered(&self, row: usize) -> bool {
        self.columns.iter().any(|c| c[row] != ABSTAIN)
    }

    /// Keeps the given columns in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> LabelMatrix {
        LabelMatrix {
            row_ids: self.row_ids.clone(),
            column_ids: cols.iter().map(|&j| self.column_ids[j].clone()).collect(),
            columns: cols.iter().map(|&j| self.columns[j].clone()).collect(),
        }
    }

    /// Every cell is ABSTAIN or a class below `n_classes`.
    pub fn is_well_formed(&self, n_classes: usize) -> bool {
        self.columns.iter().flatten().all(|&v| v == ABSTAIN || (v >= 0 && (v as usize) < n_classes))
    }
}

/// A function whose column could not be computed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnFailure {
    pub rule_id: RuleId,
    pub error: RuleError,
}

fn evaluate_column(rule: &Rule, corpus: &Corpus, store: &ConceptStore) -> Result<Vec<i32>, RuleError> {
    corpus
        .documents
        .par_iter()
        .map(|doc| evaluate_rule(rule, doc, store).map(|v| v.map_or(ABSTAIN, |l| l as i32)))
        .collect()
}

fn enabled_in_order(functions: &[LabelingFunction]) -> Vec<&LabelingFunction> {
    let mut enabled: Vec<&LabelingFunction> = functions.iter().filter(|f| f.enabled).collect();
    enabled.sort_by_key(|f| f.accepted_at);
    enabled
}

/// Evaluates every enabled function over `corpus` from scratch.
pub fn evaluate_all(
    functions: &[LabelingFunction],
    corpus: &Corpus,
    store: &ConceptStore,
) -> Result<LabelMatrix, ColumnFailure> {
    let enabled = enabled_in_order(functions);
    let mut columns = Vec::with_capacity(enabled.len());
    for f in &enabled {
        let col = evaluate_column(&f.rule, corpus, store)
            .map_err(|error| ColumnFailure { rule_id: f.id().to_string(), error })?;
        columns.push(col);
    }
    Ok(LabelMatrix::new(
        corpus.documents.iter().map(|d| d.uid.clone()).collect(),
        enabled.iter().map(|f| f.id().to_string()).collect(),
        columns,
    ))
}

/// Per-corpus cache of computed columns keyed by rule id.
///
/// Adding or re-enabling a function computes only its column. Concept edits
/// must be reported through [`ColumnCache::invalidate_concept`] since rules
/// reference concepts by name.
#[derive(Debug, Default, Clone)]
pub struct ColumnCache {
    columns: HashMap<RuleId, (BTreeSet<String>, Vec<i32>)>,
    computed: usize,
}

impl ColumnCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of columns evaluated since creation.
    pub fn computed_columns(&self) -> usize {
        self.computed
    }

    pub fn invalidate_concept(&mut self, name: &str) {
        self.columns.retain(|_, (concepts, _)| !concepts.contains(name));
    }

    pub fn clear(&mut self) {
        self.columns.clear();
    }

    /// Matrix over the enabled functions. Functions whose evaluation fails are
    /// left out of the matrix and reported.
    pub fn matrix(
        &mut self,
        functions: &[LabelingFunction],
        corpus: &Corpus,
        store: &ConceptStore,
    ) -> (LabelMatrix, Vec<ColumnFailure>) {
        let mut ids = Vec::new();
        let mut columns = Vec::new();
        let mut failures = Vec::new();
        for f in enabled_in_order(functions) {
            if !self.columns.contains_key(f.id()) {
                match evaluate_column(&f.rule, corpus, store) {
                    Ok(col) => {
                        self.computed += 1;
                        let concepts = f.rule.concepts().into_iter().map(str::to_string).collect();
                        self.columns.insert(f.id().to_string(), (concepts, col));
                    }
                    Err(error) => {
                        failures.push(ColumnFailure { rule_id: f.id().to_string(), error });
                        continue;
                    }
                }
            }
            ids.push(f.id().to_string());
            columns.push(self.columns[f.id()].1.clone());
        }
        let rows = corpus.documents.iter().map(|d| d.uid.clone()).collect();
        (LabelMatrix::new(rows, ids, columns), failures)
    }
}
