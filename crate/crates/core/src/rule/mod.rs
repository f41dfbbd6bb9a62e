//! The labeling-rule language.
//!
//! A rule reads `{t1, ..., tn | conditions} ⇒ label`: the token variables are
//! existentially quantified and `conditions` is a conjunction of predicates
//! `(transform, lhs, op, rhs)`. Variable pairs may additionally be scoped to
//! the same sentence; pairs without a sentence scope only need to co-occur in
//! the document.
//!
//! Rules are kept in canonical form. Predicates are sorted (unary ones by
//! variable first, positional ones last) and variables are renamed to the
//! permutation with the smallest sorted condition list, so two logically
//! identical rules always serialize to the same bytes. The rule id is the
//! lowercase hex of the 64-bit FNV-1a hash of that canonical JSON (see
//! [`Rule::canonical_json`]); it is part of the persistence format.

mod compile;
mod eval;

pub use compile::{compile_interaction, CompileOptions, CompiledSeed};
pub use eval::{
    evaluate_all, evaluate_rule, ColumnCache, ColumnFailure, LabelMatrix, LabelingFunction, ABSTAIN,
};

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::glm::GlmError;

/// Above this many variables canonicalization keeps the given variable order.
const MAX_PERMUTED_VARIABLES: usize = 7;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RuleError {
    #[error("malformed rule: {0}")]
    Malformed(String),
    #[error("rule references unknown concept {0:?}")]
    UnknownConcept(String),
    #[error("rule id {stored} does not match canonical id {computed}")]
    IdMismatch { stored: String, computed: String },
    #[error(transparent)]
    Interaction(#[from] GlmError),
}

/// A token variable; `Var(0)` renders as `t1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Var(pub u8);

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{}", self.0 as u32 + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    /// Compare the case-folded phrase.
    CaseFold,
    /// Lift the token to the entity types covering it.
    EntityType,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Op {
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = "!=")]
    Ne,
    #[serde(rename = "in")]
    In,
    #[serde(rename = "not_in")]
    NotIn,
    #[serde(rename = "idx<")]
    Before,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rhs {
    Literal(String),
    Concept(String),
    Entity(String),
    Var(Var),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Predicate {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transform: Option<Transform>,
    pub lhs: Var,
    pub op: Op,
    pub rhs: Rhs,
}

impl Predicate {
    /// `var = phrase`, compared case-folded.
    pub fn literal(var: Var, phrase: &str) -> Self {
        Predicate { transform: Some(Transform::CaseFold), lhs: var, op: Op::Eq, rhs: Rhs::Literal(phrase.to_lowercase()) }
    }

    pub fn not_literal(var: Var, phrase: &str) -> Self {
        Predicate { transform: Some(Transform::CaseFold), lhs: var, op: Op::Ne, rhs: Rhs::Literal(phrase.to_lowercase()) }
    }

    pub fn in_concept(var: Var, concept: &str) -> Self {
        Predicate { transform: None, lhs: var, op: Op::In, rhs: Rhs::Concept(concept.to_string()) }
    }

    pub fn not_in_concept(var: Var, concept: &str) -> Self {
        Predicate { transform: None, lhs: var, op: Op::NotIn, rhs: Rhs::Concept(concept.to_string()) }
    }

    pub fn in_entity(var: Var, tag: &str) -> Self {
        Predicate { transform: Some(Transform::EntityType), lhs: var, op: Op::In, rhs: Rhs::Entity(tag.to_string()) }
    }

    pub fn not_in_entity(var: Var, tag: &str) -> Self {
        Predicate {
            transform: Some(Transform::EntityType),
            lhs: var,
            op: Op::NotIn,
            rhs: Rhs::Entity(tag.to_string()),
        }
    }

    /// `idx(a) < idx(b)`.
    pub fn before(a: Var, b: Var) -> Self {
        Predicate { transform: None, lhs: a, op: Op::Before, rhs: Rhs::Var(b) }
    }

    pub fn is_positional(&self) -> bool {
        self.op == Op::Before
    }

    /// Name of the concept this predicate references, if any.
    pub fn concept(&self) -> Option<&str> {
        match &self.rhs {
            Rhs::Concept(c) => Some(c),
            _ => None,
        }
    }

    fn check(&self) -> Result<(), RuleError> {
        let ok = match (&self.op, &self.rhs) {
            (Op::Eq | Op::Ne, Rhs::Literal(w)) => {
                !w.is_empty() && matches!(self.transform, None | Some(Transform::CaseFold))
            }
            (Op::In | Op::NotIn, Rhs::Concept(c)) => !c.is_empty() && self.transform.is_none(),
            (Op::In | Op::NotIn, Rhs::Entity(t)) => !t.is_empty() && self.transform == Some(Transform::EntityType),
            (Op::Before, Rhs::Var(v)) => *v != self.lhs && self.transform.is_none(),
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(RuleError::Malformed(format!("ill-typed predicate {self}")))
        }
    }

    fn rename(&self, map: &[Var]) -> Predicate {
        let rhs = match &self.rhs {
            Rhs::Var(v) => Rhs::Var(map[v.0 as usize]),
            other => other.clone(),
        };
        Predicate { transform: self.transform, lhs: map[self.lhs.0 as usize], op: self.op, rhs }
    }

    fn sort_key(&self) -> (bool, Var, Op, &Rhs, Option<Transform>) {
        (self.is_positional(), self.lhs, self.op, &self.rhs, self.transform)
    }
}

impl Ord for Predicate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.sort_key().cmp(&other.sort_key())
    }
}

impl PartialOrd for Predicate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn render_literal(w: &str) -> String {
    if w.contains(' ') {
        format!("\"{w}\"")
    } else {
        w.to_string()
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lhs = match self.transform {
            None if matches!(self.rhs, Rhs::Literal(_)) => format!("raw({})", self.lhs),
            _ => self.lhs.to_string(),
        };
        match (&self.op, &self.rhs) {
            (Op::Eq, Rhs::Literal(w)) => write!(f, "{lhs} = {}", render_literal(w)),
            (Op::Ne, Rhs::Literal(w)) => write!(f, "{lhs} ≠ {}", render_literal(w)),
            (Op::In, Rhs::Concept(c)) => write!(f, "{lhs} ∈ {c}"),
            (Op::NotIn, Rhs::Concept(c)) => write!(f, "{lhs} ∉ {c}"),
            (Op::In, Rhs::Entity(t)) => write!(f, "{lhs} ∈ <{t}>"),
            (Op::NotIn, Rhs::Entity(t)) => write!(f, "{lhs} ∉ <{t}>"),
            (Op::Before, Rhs::Var(v)) => write!(f, "idx({lhs}) < idx({v})"),
            (op, rhs) => write!(f, "{lhs} {op:?} {rhs:?}"),
        }
    }
}

pub type RuleId = String;

#[derive(Serialize)]
struct CanonicalForm<'a> {
    variables: &'a [Var],
    conditions: &'a [Predicate],
    same_sentence: &'a [(Var, Var)],
    label: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RuleRepr {
    id: RuleId,
    variables: Vec<Var>,
    conditions: Vec<Predicate>,
    #[serde(default)]
    same_sentence: Vec<(Var, Var)>,
    label: usize,
}

/// A conjunctive labeling rule in canonical form.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RuleRepr", into = "RuleRepr")]
pub struct Rule {
    id: RuleId,
    variables: Vec<Var>,
    conditions: Vec<Predicate>,
    same_sentence: Vec<(Var, Var)>,
    label: usize,
}

impl TryFrom<RuleRepr> for Rule {
    type Error = RuleError;

    fn try_from(repr: RuleRepr) -> Result<Self, RuleError> {
        let rule = Rule::new(repr.conditions, repr.same_sentence, repr.label)?;
        if rule.id != repr.id {
            return Err(RuleError::IdMismatch { stored: repr.id, computed: rule.id });
        }
        Ok(rule)
    }
}

impl From<Rule> for RuleRepr {
    fn from(r: Rule) -> Self {
        RuleRepr { id: r.id, variables: r.variables, conditions: r.conditions, same_sentence: r.same_sentence, label: r.label }
    }
}

impl Rule {
    /// Validates and canonicalizes a rule.
    ///
    /// Variables are taken from the predicates; `same_sentence` pairs are
    /// unordered. Fails if a variable has no predicate, if a predicate is
    /// ill-typed, or if a guard variable (one constrained only by `∉`) takes
    /// part in a positional predicate or a sentence scope.
    pub fn new(conditions: Vec<Predicate>, same_sentence: Vec<(Var, Var)>, label: usize) -> Result<Rule, RuleError> {
        Ok(Self::canonicalize(conditions, same_sentence, label)?.0)
    }

    /// Like [`Rule::new`], also returning the renaming applied: entry `i` is
    /// the canonical variable of input variable `Var(i)`.
    pub fn canonicalize(
        conditions: Vec<Predicate>,
        same_sentence: Vec<(Var, Var)>,
        label: usize,
    ) -> Result<(Rule, Vec<Var>), RuleError> {
        if conditions.is_empty() {
            return Err(RuleError::Malformed("a rule needs at least one condition".into()));
        }
        let mut used = BTreeSet::new();
        for p in &conditions {
            p.check()?;
            used.insert(p.lhs);
            if let Rhs::Var(v) = &p.rhs {
                used.insert(*v);
            }
        }
        for &(a, b) in &same_sentence {
            if a == b {
                return Err(RuleError::Malformed(format!("sentence scope pairs {a} with itself")));
            }
            if !used.contains(&a) || !used.contains(&b) {
                return Err(RuleError::Malformed(format!("scoped variable without a predicate in ({a}, {b})")));
            }
        }
        // compact to Var(0..n) preserving order
        let max = used.iter().next_back().map_or(0, |v| v.0 as usize + 1);
        let mut compact = vec![Var(u8::MAX); max];
        for (i, v) in used.iter().enumerate() {
            compact[v.0 as usize] = Var(i as u8);
        }
        let n = used.len();
        let conditions: Vec<Predicate> = conditions.iter().map(|p| p.rename(&compact)).collect();
        let same_sentence: Vec<(Var, Var)> =
            same_sentence.iter().map(|&(a, b)| (compact[a.0 as usize], compact[b.0 as usize])).collect();

        let guards = guard_vars(&conditions, n);
        for p in &conditions {
            if let Rhs::Var(v) = &p.rhs {
                if guards[p.lhs.0 as usize] || guards[v.0 as usize] {
                    return Err(RuleError::Malformed("positional predicate on a guard variable".into()));
                }
            }
        }
        if same_sentence.iter().any(|&(a, b)| guards[a.0 as usize] || guards[b.0 as usize]) {
            return Err(RuleError::Malformed("sentence scope on a guard variable".into()));
        }

        let identity: Vec<Var> = (0..n as u8).map(Var).collect();
        let mut best: Option<(Vec<Predicate>, Vec<(Var, Var)>, Vec<Var>)> = None;
        let mut consider = |perm: &[Var]| {
            let (conds, scope) = apply_renaming(&conditions, &same_sentence, perm);
            let better = match &best {
                None => true,
                Some((bc, bs, _)) => (&conds, &scope) < (bc, bs),
            };
            if better {
                best = Some((conds, scope, perm.to_vec()));
            }
        };
        if n <= MAX_PERMUTED_VARIABLES {
            for_each_permutation(&identity, &mut consider);
        } else {
            consider(&identity);
        }
        let (conditions, same_sentence, perm) = best.expect("at least one permutation");
        let mut rule = Rule { id: String::new(), variables: identity, conditions, same_sentence, label };
        rule.id = format!("{:016x}", fnv1a64(rule.canonical_json().as_bytes()));
        let mapping = (0..max)
            .map(|old| {
                let c = compact[old];
                if c.0 == u8::MAX {
                    c
                } else {
                    perm[c.0 as usize]
                }
            })
            .collect();
        Ok((rule, mapping))
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn variables(&self) -> &[Var] {
        &self.variables
    }

    pub fn conditions(&self) -> &[Predicate] {
        &self.conditions
    }

    pub fn same_sentence(&self) -> &[(Var, Var)] {
        &self.same_sentence
    }

    pub fn label(&self) -> usize {
        self.label
    }

    pub fn in_same_sentence(&self, a: Var, b: Var) -> bool {
        let key = if a < b { (a, b) } else { (b, a) };
        self.same_sentence.binary_search(&key).is_ok()
    }

    /// Variables constrained only by `∉` predicates; they bind nothing.
    pub fn guard_variables(&self) -> Vec<Var> {
        let guards = guard_vars(&self.conditions, self.variables.len());
        self.variables.iter().copied().filter(|v| guards[v.0 as usize]).collect()
    }

    /// Variables that bind a token range.
    pub fn binding_variables(&self) -> Vec<Var> {
        let guards = guard_vars(&self.conditions, self.variables.len());
        self.variables.iter().copied().filter(|v| !guards[v.0 as usize]).collect()
    }

    /// Concept names referenced anywhere in the rule.
    pub fn concepts(&self) -> BTreeSet<&str> {
        self.conditions.iter().filter_map(Predicate::concept).collect()
    }

    /// Number of conjuncts, counting each sentence scope as one.
    pub fn condition_count(&self) -> usize {
        self.conditions.len() + self.same_sentence.len()
    }

    /// The serialization the rule id is computed from: compact JSON of
    /// `{variables, conditions, same_sentence, label}` in canonical order.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(&CanonicalForm {
            variables: &self.variables,
            conditions: &self.conditions,
            same_sentence: &self.same_sentence,
            label: self.label,
        })
        .expect("rule serialization is infallible")
    }

    /// Relational-calculus notation of the conditions, e.g.
    /// `{t1, t2 | t1 = book ∧ t2 ∈ padj ∧ idx(t1) < idx(t2)}`. Sentence
    /// scopes are not part of this notation; [`Rule::render`] shows them.
    pub fn formula(&self) -> String {
        let vars: Vec<String> = self.variables.iter().map(Var::to_string).collect();
        let conds: Vec<String> = self.conditions.iter().map(Predicate::to_string).collect();
        format!("{{{} | {}}}", vars.join(", "), conds.join(" ∧ "))
    }

    /// Human-readable rendering shown next to suggestions.
    ///
    /// Grammar: conditions joined by ` AND `, then a scope clause when the
    /// rule binds two or more variables (`, same sentence` when every pair is
    /// sentence-scoped, `, same document` when none is, otherwise
    /// `, same sentence (t1, t2), ...` listing the scoped pairs), then
    /// ` ⇒ LABEL` with the class name upper-cased.
    pub fn render(&self, class_names: &[String]) -> String {
        let conds: Vec<String> = self.conditions.iter().map(Predicate::to_string).collect();
        let mut out = conds.join(" AND ");
        let binding = self.binding_variables().len();
        if binding >= 2 {
            let pairs = binding * (binding - 1) / 2;
            if self.same_sentence.is_empty() {
                out.push_str(", same document");
            } else if self.same_sentence.len() == pairs {
                out.push_str(", same sentence");
            } else {
                let listed: Vec<String> = self.same_sentence.iter().map(|(a, b)| format!("({a}, {b})")).collect();
                let _ = write!(out, ", same sentence {}", listed.join(", "));
            }
        }
        let label = class_names.get(self.label).map_or_else(|| self.label.to_string(), |n| n.to_uppercase());
        let _ = write!(out, " ⇒ {label}");
        out
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.formula())?;
        for (a, b) in &self.same_sentence {
            write!(f, " [same sentence {a}, {b}]")?;
        }
        write!(f, " ⇒ {}", self.label)
    }
}

fn guard_vars(conditions: &[Predicate], n: usize) -> Vec<bool> {
    let mut absent = vec![false; n];
    let mut binds = vec![false; n];
    for p in conditions.iter().filter(|p| !p.is_positional()) {
        if p.op == Op::NotIn {
            absent[p.lhs.0 as usize] = true;
        } else {
            binds[p.lhs.0 as usize] = true;
        }
    }
    absent.iter().zip(&binds).map(|(&a, &b)| a && !b).collect()
}

fn apply_renaming(
    conditions: &[Predicate],
    same_sentence: &[(Var, Var)],
    perm: &[Var],
) -> (Vec<Predicate>, Vec<(Var, Var)>) {
    let mut conds: Vec<Predicate> = conditions.iter().map(|p| p.rename(perm)).collect();
    conds.sort();
    conds.dedup();
    let mut scope: Vec<(Var, Var)> = same_sentence
        .iter()
        .map(|&(a, b)| {
            let (a, b) = (perm[a.0 as usize], perm[b.0 as usize]);
            if a < b {
                (a, b)
            } else {
                (b, a)
            }
        })
        .collect();
    scope.sort();
    scope.dedup();
    (conds, scope)
}

fn for_each_permutation(items: &[Var], f: &mut impl FnMut(&[Var])) {
    fn go(items: &mut Vec<Var>, k: usize, f: &mut impl FnMut(&[Var])) {
        if k == items.len() {
            f(items);
            return;
        }
        for i in k..items.len() {
            items.swap(k, i);
            go(items, k + 1, f);
            items.swap(k, i);
        }
    }
    go(&mut items.to_vec(), 0, f);
}

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    bytes.iter().fold(OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(PRIME))
}
