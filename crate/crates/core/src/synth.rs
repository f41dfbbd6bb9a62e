//! Generalizing a seed rule into ranked candidate rules.

use std::collections::{BTreeSet, HashSet};
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::glm::ConceptStore;
use crate::rule::{CompiledSeed, Op, Predicate, Rhs, Rule, RuleError, Transform, Var};

/// Contribution of an entity-type predicate to the generalization score.
pub const ENTITY_CARDINALITY: u64 = 10;
pub const MAX_VARIABLES: usize = 3;
pub const MAX_CANDIDATES: usize = 256;
pub const DEFAULT_K: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub rule: Rule,
    pub score: u64,
    /// Fraction of the seed's variables the candidate keeps.
    pub interaction_coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub seed: Rule,
    pub candidates: Vec<Candidate>,
}

/// How tightly a pair of variables is tied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Level {
    Document,
    Sentence,
    /// `idx(a) < idx(b)`, optionally within one sentence.
    Ordered { sentence: bool },
}

struct PairOptions {
    a: Var,
    b: Var,
    levels: Vec<Level>,
}

/// Alternatives for the unary predicates of one variable.
fn variable_options(
    seed: &Rule,
    var: Var,
    span: Option<&Range<usize>>,
    doc: &Document,
    store: &ConceptStore,
) -> Vec<Vec<Predicate>> {
    let own: Vec<Predicate> =
        seed.conditions().iter().filter(|p| p.lhs == var && !p.is_positional()).cloned().collect();
    let mut out = vec![own.clone()];
    let literal = own.iter().position(|p| p.op == Op::Eq && p.transform == Some(Transform::CaseFold));
    let Some(at) = literal else { return out };
    let Rhs::Literal(word) = &own[at].rhs else { return out };

    let mut replace = |p: Predicate| {
        let mut preds = own.clone();
        preds[at] = p;
        out.push(preds);
    };
    for concept in store.iter().filter(|c| c.covers_phrase(word)) {
        replace(Predicate::in_concept(var, concept.name()));
    }
    if let Some(span) = span {
        let tags: BTreeSet<&str> = doc
            .entities
            .iter()
            .filter(|e| e.start_token <= span.start && span.end <= e.end_token)
            .map(|e| e.entity_type.as_str())
            .collect();
        for tag in tags {
            replace(Predicate::in_entity(var, tag));
        }
    }
    out
}

fn pair_options(seed: &Rule, spans: &[Range<usize>]) -> Vec<PairOptions> {
    let mut pairs: BTreeSet<(Var, Var)> = seed.same_sentence().iter().copied().collect();
    for p in seed.conditions() {
        if let Rhs::Var(b) = &p.rhs {
            pairs.insert((p.lhs.min(*b), p.lhs.max(*b)));
        }
    }
    pairs
        .into_iter()
        .map(|(x, y)| {
            let before = |a: Var, b: Var| {
                seed.conditions().iter().any(|p| p.op == Op::Before && p.lhs == a && p.rhs == Rhs::Var(b))
            };
            let sentence = seed.in_same_sentence(x, y);
            let (a, b, ordered) = if before(x, y) {
                (x, y, true)
            } else if before(y, x) {
                (y, x, true)
            } else {
                match (spans.get(x.0 as usize), spans.get(y.0 as usize)) {
                    (Some(sx), Some(sy)) if sy.start < sx.start => (y, x, false),
                    _ => (x, y, false),
                }
            };
            let mut levels = vec![Level::Document];
            if sentence {
                levels.push(Level::Sentence);
            }
            if ordered {
                levels.push(Level::Ordered { sentence });
            } else if sentence {
                // an undirected link may be tightened to the observed order
                let observed = matches!(
                    (spans.get(a.0 as usize), spans.get(b.0 as usize)),
                    (Some(sa), Some(sb)) if sa.start < sb.start
                );
                if observed {
                    levels.push(Level::Ordered { sentence: true });
                }
            }
            levels.reverse();
            PairOptions { a, b, levels }
        })
        .collect()
}

fn subsets(vars: &[Var], max: usize) -> Vec<Vec<Var>> {
    let mut out: Vec<Vec<Var>> = (1u32..(1 << vars.len()))
        .map(|mask| vars.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, v)| *v).collect())
        .filter(|s: &Vec<Var>| s.len() <= max)
        .collect();
    out.sort_by(|a, b| b.len().cmp(&a.len()).then(a.cmp(b)));
    out
}

/// Generalizations of a compiled seed.
///
/// Literal predicates may be replaced by any concept covering the literal or
/// by any entity tag covering the annotated span; linked pairs may be loosened
/// (ordered → same sentence → same document) and undirected links tightened to
/// the observed order; and the rule may be restricted to a non-empty subset of
/// at most three variables. The seed is always part of the result, which holds
/// at most [`MAX_CANDIDATES`] distinct rules.
pub fn expand(seed: &CompiledSeed, doc: &Document, store: &ConceptStore) -> Vec<Rule> {
    let rule = &seed.rule;
    let mut seen: HashSet<String> = HashSet::from([rule.id().to_string()]);
    let mut out = vec![rule.clone()];

    let var_opts: Vec<Vec<Vec<Predicate>>> = rule
        .variables()
        .iter()
        .map(|&v| variable_options(rule, v, seed.spans.get(v.0 as usize), doc, store))
        .collect();
    let pairs = pair_options(rule, &seed.spans);

    'subsets: for subset in subsets(rule.variables(), MAX_VARIABLES) {
        let in_subset = |v: Var| subset.contains(&v);
        if !subset.iter().any(|&v| var_opts[v.0 as usize][0].iter().any(|p| p.op != Op::NotIn)) {
            continue;
        }
        let local_pairs: Vec<&PairOptions> = pairs.iter().filter(|p| in_subset(p.a) && in_subset(p.b)).collect();
        let radices: Vec<usize> = subset
            .iter()
            .map(|v| var_opts[v.0 as usize].len())
            .chain(local_pairs.iter().map(|p| p.levels.len()))
            .collect();
        let mut digits = vec![0usize; radices.len()];
        loop {
            let mut conditions = Vec::new();
            for (i, v) in subset.iter().enumerate() {
                conditions.extend(var_opts[v.0 as usize][digits[i]].iter().cloned());
            }
            let mut scope = Vec::new();
            for (j, pair) in local_pairs.iter().enumerate() {
                match pair.levels[digits[subset.len() + j]] {
                    Level::Document => {}
                    Level::Sentence => scope.push((pair.a, pair.b)),
                    Level::Ordered { sentence } => {
                        conditions.push(Predicate::before(pair.a, pair.b));
                        if sentence {
                            scope.push((pair.a, pair.b));
                        }
                    }
                }
            }
            if let Ok(candidate) = Rule::new(conditions, scope, rule.label()) {
                if seen.insert(candidate.id().to_string()) {
                    out.push(candidate);
                    if out.len() == MAX_CANDIDATES {
                        break 'subsets;
                    }
                }
            }
            // odometer increment
            let mut i = 0;
            while i < digits.len() {
                digits[i] += 1;
                if digits[i] < radices[i] {
                    break;
                }
                digits[i] = 0;
                i += 1;
            }
            if i == digits.len() {
                break;
            }
        }
    }
    out
}

/// Data-independent generalization score: the product of the sizes of the
/// sets the rule's predicates range over.
///
/// Concept predicates contribute the concept's cardinality, entity predicates
/// [`ENTITY_CARDINALITY`], all others 1. Saturates at `u64::MAX`.
pub fn generalization_score(rule: &Rule, store: &ConceptStore) -> Result<u64, RuleError> {
    rule.conditions().iter().try_fold(1u64, |acc, p| {
        let factor = match &p.rhs {
            Rhs::Concept(c) => store.get(c).ok_or_else(|| RuleError::UnknownConcept(c.clone()))?.len() as u64,
            Rhs::Entity(_) => ENTITY_CARDINALITY,
            _ => 1,
        };
        Ok(acc.saturating_mul(factor))
    })
}

/// Orders candidates by coverage of the seed's variables (desc), score
/// (desc), condition count (asc) and rule id, keeping the first `k`.
pub fn rank(candidates: Vec<Rule>, seed: &Rule, store: &ConceptStore, k: usize) -> Result<CandidateSet, RuleError> {
    let seed_vars = seed.variables().len().max(1) as f64;
    let mut seen = HashSet::new();
    let mut scored = Vec::with_capacity(candidates.len());
    for rule in candidates {
        if !seen.insert(rule.id().to_string()) {
            continue;
        }
        let score = generalization_score(&rule, store)?;
        let interaction_coverage = (rule.variables().len() as f64 / seed_vars).min(1.0);
        scored.push(Candidate { rule, score, interaction_coverage });
    }
    scored.sort_by(|x, y| {
        y.interaction_coverage
            .total_cmp(&x.interaction_coverage)
            .then(y.score.cmp(&x.score))
            .then(x.rule.condition_count().cmp(&y.rule.condition_count()))
            .then(x.rule.id().cmp(y.rule.id()))
    });
    scored.truncate(k.max(1));
    Ok(CandidateSet { seed: seed.clone(), candidates: scored })
}

/// [`expand`] followed by [`rank`].
pub fn synthesize(
    seed: &CompiledSeed,
    doc: &Document,
    store: &ConceptStore,
    k: usize,
) -> Result<CandidateSet, RuleError> {
    rank(expand(seed, doc, store), &seed.rule, store, k)
}
