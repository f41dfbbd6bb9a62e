//! Generators and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::ops::Range;

use labelforge::corpus::{Corpus, Document, EntitySpan, Split};
use labelforge::glm::{
    apply_operation, AnnotationDraft, Concept, ConceptElement, ConceptStore, GlmOp, Interaction,
};
use labelforge::project::{Corpora, EventPayload, Project, ProjectConfig};
use labelforge::rule::{LabelMatrix, Op, Predicate, Rhs, Rule, Var, ABSTAIN};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------------------
// documents and rules

pub const WORDS: &[&str] = &["a", "b", "c", "d", "e"];
pub const TAGS: &[&str] = &["PER", "LOC"];
pub const CONCEPTS: &[(&str, &[&str])] = &[("x", &["a", "b"]), ("y", &["c"]), ("z", &["a", "d", "e"]), ("w", &[])];

pub fn small_store() -> ConceptStore {
    let mut store = ConceptStore::new();
    for (name, words) in CONCEPTS {
        store.insert(Concept::from_tokens(name, words).unwrap()).unwrap();
    }
    store
}

/// A short document over [`WORDS`] with random case, sentence breaks and
/// non-overlapping entity spans.
pub fn random_document(rng: &mut impl Rng, uid: &str) -> Document {
    let n = rng.random_range(0..=9);
    let mut text = String::new();
    for i in 0..n {
        if i > 0 {
            text.push_str([" ", " ", " ", ". ", "! ", ", "][rng.random_range(0..6)]);
        }
        let w = WORDS[rng.random_range(0..WORDS.len())];
        text.push_str(&if rng.random_bool(0.3) { w.to_uppercase() } else { w.to_string() });
    }
    let mut doc = Document::new(uid, text);
    let mut i = 0;
    while i < doc.tokens.len() {
        if rng.random_bool(0.25) {
            let len = rng.random_range(1..=2).min(doc.tokens.len() - i);
            let tag = TAGS[rng.random_range(0..TAGS.len())];
            doc.entities.push(EntitySpan { start_token: i, end_token: i + len, entity_type: tag.into() });
            i += len;
        } else {
            i += 1;
        }
    }
    doc
}

fn random_phrase(rng: &mut impl Rng) -> String {
    let first = WORDS[rng.random_range(0..WORDS.len())];
    if rng.random_bool(0.2) {
        format!("{first} {}", WORDS[rng.random_range(0..WORDS.len())])
    } else {
        first.to_string()
    }
}

fn random_concept(rng: &mut impl Rng) -> &'static str {
    CONCEPTS[rng.random_range(0..CONCEPTS.len())].0
}

/// Conditions and sentence scopes of a random well-formed rule over at most
/// three variables, before canonicalization.
pub fn random_conditions(rng: &mut impl Rng) -> (Vec<Predicate>, Vec<(Var, Var)>) {
    let n = rng.random_range(1..=3u8);
    let mut conds = Vec::new();
    let mut binding = Vec::new();
    for v in (0..n).map(Var) {
        match rng.random_range(0..6) {
            0 => conds.push(Predicate::literal(v, &random_phrase(rng))),
            1 => conds.push(Predicate::in_concept(v, random_concept(rng))),
            2 => conds.push(Predicate::in_entity(v, TAGS[rng.random_range(0..TAGS.len())])),
            3 => conds.push(Predicate::not_literal(v, WORDS[rng.random_range(0..WORDS.len())])),
            4 => {
                conds.push(Predicate::not_in_concept(v, random_concept(rng)));
                continue;
            }
            _ => {
                conds.push(Predicate::not_in_entity(v, TAGS[rng.random_range(0..TAGS.len())]));
                continue;
            }
        }
        if rng.random_bool(0.25) {
            conds.push(Predicate::in_concept(v, random_concept(rng)));
        }
        if rng.random_bool(0.25) {
            conds.push(Predicate::not_literal(v, WORDS[rng.random_range(0..WORDS.len())]));
        }
        binding.push(v);
    }
    let mut scope = Vec::new();
    for (i, &a) in binding.iter().enumerate() {
        for &b in &binding[i + 1..] {
            match rng.random_range(0..4) {
                0 => conds.push(Predicate::before(a, b)),
                1 => conds.push(Predicate::before(b, a)),
                _ => {}
            }
            if rng.random_bool(0.4) {
                scope.push((a, b));
            }
        }
    }
    (conds, scope)
}

pub fn random_rule(rng: &mut impl Rng) -> Rule {
    let (conds, scope) = random_conditions(rng);
    Rule::new(conds, scope, rng.random_range(0..2)).expect("generator builds well-formed rules")
}

/// The same rule with its conditions shuffled and variables renamed.
pub fn permuted(rng: &mut impl Rng, rule: &Rule) -> Rule {
    let n = rule.variables().len();
    let mut perm: Vec<Var> = (0..n as u8).map(Var).collect();
    perm.shuffle(rng);
    let rename = |v: Var| perm[v.0 as usize];
    let mut conds: Vec<Predicate> = rule
        .conditions()
        .iter()
        .map(|p| {
            let rhs = match &p.rhs {
                Rhs::Var(v) => Rhs::Var(rename(*v)),
                other => other.clone(),
            };
            Predicate { transform: p.transform, lhs: rename(p.lhs), op: p.op, rhs }
        })
        .collect();
    conds.shuffle(rng);
    let mut scope: Vec<(Var, Var)> =
        rule.same_sentence().iter().map(|&(a, b)| if rng.random_bool(0.5) { (rename(b), rename(a)) } else { (rename(a), rename(b)) }).collect();
    scope.shuffle(rng);
    Rule::new(conds, scope, rule.label()).unwrap()
}

fn token_concept(store: &ConceptStore, name: &str) -> BTreeSet<String> {
    store.get(name).unwrap().elements().iter().map(|e| e.pattern.clone()).collect()
}

fn covered_by(doc: &Document, token: usize, tag: &str) -> bool {
    doc.entities.iter().any(|e| e.entity_type == tag && e.start_token <= token && token < e.end_token)
}

fn sentence(doc: &Document, token: usize) -> usize {
    doc.sentences.iter().position(|s| s.start <= token && token < s.end).unwrap()
}

fn phrase(doc: &Document, r: &Range<usize>) -> String {
    doc.tokens[r.clone()].iter().map(|t| t.surface.to_lowercase()).collect::<Vec<_>>().join(" ")
}

fn unary_holds(p: &Predicate, doc: &Document, r: &Range<usize>, store: &ConceptStore) -> bool {
    let single = r.len() == 1;
    match (&p.op, &p.rhs) {
        (Op::Eq, Rhs::Literal(w)) => &phrase(doc, r) == w,
        (Op::Ne, Rhs::Literal(w)) => &phrase(doc, r) != w,
        (Op::In, Rhs::Concept(c)) => single && token_concept(store, c).contains(&phrase(doc, r)),
        (Op::In, Rhs::Entity(t)) => single && covered_by(doc, r.start, t),
        _ => true,
    }
}

/// Evaluates a rule over token-literal concepts by trying every assignment
/// of ranges (up to two tokens) to every binding variable.
pub fn brute_force(rule: &Rule, doc: &Document, store: &ConceptStore) -> Option<usize> {
    for p in rule.conditions().iter().filter(|p| p.op == Op::NotIn) {
        let present = match &p.rhs {
            Rhs::Concept(c) => {
                let set = token_concept(store, c);
                doc.tokens.iter().any(|t| set.contains(&t.surface.to_lowercase()))
            }
            Rhs::Entity(t) => doc.entities.iter().any(|e| &e.entity_type == t),
            _ => unreachable!(),
        };
        if present {
            return None;
        }
    }
    let guards: BTreeSet<Var> = rule
        .variables()
        .iter()
        .copied()
        .filter(|&v| {
            let own: Vec<&Predicate> = rule.conditions().iter().filter(|p| p.lhs == v && !p.is_positional()).collect();
            !own.is_empty() && own.iter().all(|p| p.op == Op::NotIn)
        })
        .collect();
    let vars: Vec<Var> = rule.variables().iter().copied().filter(|v| !guards.contains(v)).collect();
    let n = doc.tokens.len();
    let ranges: Vec<Range<usize>> =
        (0..n).flat_map(|s| (s + 1..=(s + 2).min(n)).map(move |e| s..e)).collect();
    let mut domains = Vec::new();
    for &v in &vars {
        let own: Vec<&Predicate> = rule.conditions().iter().filter(|p| p.lhs == v && !p.is_positional()).collect();
        let has_positive = own.iter().any(|p| matches!(p.op, Op::Eq | Op::In));
        let dom: Vec<Range<usize>> = ranges
            .iter()
            .filter(|r| (has_positive || r.len() == 1) && own.iter().all(|p| unary_holds(p, doc, r, store)))
            .cloned()
            .collect();
        domains.push(dom);
    }
    let mut idx = vec![0usize; vars.len()];
    if domains.iter().any(Vec::is_empty) {
        return None;
    }
    loop {
        let pick: Vec<&Range<usize>> = idx.iter().zip(&domains).map(|(&i, d)| &d[i]).collect();
        let at = |v: Var| pick[vars.iter().position(|&x| x == v).unwrap()];
        let distinct = (0..pick.len()).all(|i| (i + 1..pick.len()).all(|j| pick[i] != pick[j]));
        let ordered = rule.conditions().iter().filter(|p| p.is_positional()).all(|p| match p.rhs {
            Rhs::Var(b) => at(p.lhs).start < at(b).start,
            _ => unreachable!(),
        });
        let scoped = rule.same_sentence().iter().all(|&(a, b)| sentence(doc, at(a).start) == sentence(doc, at(b).start));
        if distinct && ordered && scoped {
            return Some(rule.label());
        }
        let mut k = 0;
        loop {
            if k == idx.len() {
                return None;
            }
            idx[k] += 1;
            if idx[k] < domains[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

// ---------------------------------------------------------------------------
// label matrices

/// Samples a label matrix from the class-symmetric generative model: each
/// function fires with probability `beta` and, when it fires, votes the true
/// class with probability `alpha[j]` and a uniformly chosen wrong class
/// otherwise.
pub fn sample_matrix(
    rng: &mut impl Rng,
    n_docs: usize,
    alpha: &[f64],
    beta: f64,
    prior: &[f64],
) -> (LabelMatrix, Vec<usize>) {
    let k = prior.len();
    let mut truth = Vec::with_capacity(n_docs);
    let mut rows = Vec::with_capacity(n_docs);
    for _ in 0..n_docs {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let y = prior.iter().position(|p| {
            acc += p;
            u < acc
        });
        let y = y.unwrap_or(k - 1);
        let row: Vec<i32> = alpha
            .iter()
            .map(|&a| {
                if !rng.random_bool(beta) {
                    ABSTAIN
                } else if rng.random_bool(a) {
                    y as i32
                } else {
                    let wrong = rng.random_range(0..k - 1);
                    (if wrong >= y { wrong + 1 } else { wrong }) as i32
                }
            })
            .collect();
        truth.push(y);
        rows.push(row);
    }
    (LabelMatrix::from_rows(&rows), truth)
}

/// Plurality vote per row; ties and empty rows go to the lowest class.
pub fn majority_vote(matrix: &LabelMatrix, k: usize) -> Vec<usize> {
    (0..matrix.n_rows())
        .map(|i| {
            let mut counts = vec![0usize; k];
            for v in matrix.row(i) {
                if v != ABSTAIN {
                    counts[v as usize] += 1;
                }
            }
            let best = *counts.iter().max().unwrap();
            counts.iter().position(|&c| c == best).unwrap()
        })
        .collect()
}

pub fn accuracy(pred: &[usize], gold: &[usize]) -> f64 {
    pred.iter().zip(gold).filter(|(p, g)| p == g).count() as f64 / gold.len() as f64
}

pub fn argmax_low(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in p.iter().enumerate() {
        if x > p[best] {
            best = i;
        }
    }
    best
}

// ---------------------------------------------------------------------------
// numerics

/// Shannon entropy in nats.
pub fn entropy_nats(p: &[f64]) -> f64 {
    p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum()
}

/// Random probability vector, sometimes with exact zeros or exact ties.
pub fn random_distribution(rng: &mut impl Rng, k: usize) -> Vec<f64> {
    match rng.random_range(0..5) {
        0 => vec![1.0 / k as f64; k],
        1 => {
            let mut p = vec![0.0; k];
            p[rng.random_range(0..k)] = 1.0;
            p
        }
        _ => {
            let raw: Vec<f64> = (0..k).map(|_| rng.random::<f64>()).collect();
            let s: f64 = raw.iter().sum();
            raw.iter().map(|x| x / s).collect()
        }
    }
}

// ---------------------------------------------------------------------------
// the review walkthrough

pub const REVIEW: &str =
    "This book was so great! I loved and read it so many times that I will soon have to buy a new copy.";

/// Runs the labeling-interface operations of the review example: concepts
/// `item = {book, electronics}` and `padj = {wonderful}`, then `great` added
/// to `padj`, spans on `book` and `great`, and a directed link between them.
pub fn review_interaction() -> (Document, ConceptStore, Interaction) {
    let doc = Document::new("review", REVIEW);
    let mut store = ConceptStore::new();
    let mut draft = AnnotationDraft::new(&doc);
    let ops = vec![
        GlmOp::CreateConcept { name: "item".into() },
        GlmOp::AddElement { concept: "item".into(), element: ConceptElement::token("book"), position: None },
        GlmOp::AddElement { concept: "item".into(), element: ConceptElement::token("electronics"), position: None },
        GlmOp::CreateConcept { name: "padj".into() },
        GlmOp::AddElement { concept: "padj".into(), element: ConceptElement::token("wonderful"), position: None },
        GlmOp::Select { start: 1, end: 2 },
        GlmOp::Select { start: 4, end: 5 },
        GlmOp::AddElement { concept: "padj".into(), element: ConceptElement::token("great"), position: None },
        GlmOp::AssignConcept { span: 1, concept: Some("padj".into()) },
        GlmOp::DirectTo { a: 0, b: 1 },
    ];
    for op in ops {
        apply_operation(&mut draft, &mut store, op).unwrap();
    }
    let ix = draft.finish(1, 2).unwrap();
    (doc, store, ix)
}

// ---------------------------------------------------------------------------
// sessions

/// A tiny labeled project corpus built from [`WORDS`]-style sentences.
pub fn tiny_corpora() -> Corpora {
    let unlabeled = [
        "check out my channel please",
        "i love this song so much",
        "subscribe to my channel now. free gift!",
        "great song. love it",
        "visit my channel for free stuff",
        "this song is great",
        "free gift at my channel",
        "love the beat of this song",
    ];
    let dev = [
        ("subscribe to my channel", 1),
        ("love this song", 0),
        ("free gift here", 1),
        ("great beat", 0),
    ];
    let test = [
        ("check my channel", 1),
        ("song is great", 0),
        ("free stuff at my channel", 1),
        ("i love it", 0),
    ];
    let docs = |prefix: &str, items: &[(&str, usize)]| -> Vec<Document> {
        items.iter().enumerate().map(|(i, (t, l))| Document::new(format!("{prefix}{i}"), *t).with_label(*l)).collect()
    };
    Corpora::new(
        Corpus::new(
            Split::Unlabeled,
            unlabeled.iter().enumerate().map(|(i, t)| Document::new(format!("u{i}"), *t)).collect(),
        )
        .unwrap(),
        Corpus::new(Split::Dev, docs("d", &dev)).unwrap(),
        Corpus::new(Split::Test, docs("t", &test)).unwrap(),
    )
}

const SESSION_CONCEPTS: &[&str] = &["promo", "music", "adj"];
const SESSION_WORDS: &[&str] = &["channel", "subscribe", "free", "gift", "song", "love", "great", "beat", "check", "visit"];

/// Drives a project on [`tiny_corpora`] through `steps` random commands.
/// Commands that fail are dropped, as a client would see them rejected.
pub fn random_session(rng: &mut impl Rng, steps: usize) -> Project {
    let config = ProjectConfig { class_names: vec!["ham".into(), "spam".into()], ..ProjectConfig::default() };
    let mut project = Project::new("session", config, tiny_corpora()).unwrap();
    let mut clock = 1_000u64;
    let mut last_suggestion: Option<(String, Vec<String>)> = None;
    for _ in 0..steps {
        clock += rng.random_range(0..3);
        let concept = SESSION_CONCEPTS[rng.random_range(0..SESSION_CONCEPTS.len())].to_string();
        let word = SESSION_WORDS[rng.random_range(0..SESSION_WORDS.len())];
        let payload = match rng.random_range(0..10) {
            0 => EventPayload::ConceptEdit(GlmOp::CreateConcept { name: concept }),
            1 | 2 => EventPayload::ConceptEdit(GlmOp::AddElement {
                concept,
                element: ConceptElement::token(word),
                position: None,
            }),
            3 => EventPayload::ConceptEdit(GlmOp::DeleteElement { concept, element: ConceptElement::token(word) }),
            4 => EventPayload::Refit {},
            5 | 6 => {
                let docs = &project.corpora().unlabeled.documents;
                let doc = &docs[rng.random_range(0..docs.len())];
                let n = doc.tokens.len();
                let first = rng.random_range(0..n);
                let mut spans = vec![labelforge::glm::SpanAnnotation {
                    id: 0,
                    start_token: first,
                    end_token: first + 1,
                    concept: rng.random_bool(0.5).then(|| concept.clone()),
                }];
                let mut links = Vec::new();
                let second = rng.random_range(0..n);
                if second != first && rng.random_bool(0.6) {
                    spans.push(labelforge::glm::SpanAnnotation {
                        id: 1,
                        start_token: second,
                        end_token: second + 1,
                        concept: None,
                    });
                    if rng.random_bool(0.5) {
                        let directed = rng.random_bool(0.5);
                        let (a, b) = if directed && second < first { (1, 0) } else { (0, 1) };
                        links.push(labelforge::glm::LinkAnnotation { a, b, directed });
                    }
                }
                EventPayload::Interaction(Interaction {
                    doc_uid: doc.uid.clone(),
                    spans,
                    links,
                    label: rng.random_range(0..2),
                })
            }
            7 => match &last_suggestion {
                Some((token, ids)) if !ids.is_empty() => {
                    let chosen: Vec<String> = ids.iter().filter(|_| rng.random_bool(0.5)).cloned().collect();
                    EventPayload::AcceptFunction { suggestion_token: token.clone(), rule_ids: chosen }
                }
                _ => EventPayload::Refit {},
            },
            8 => match project.functions() {
                [] => EventPayload::Refit {},
                fs => EventPayload::RemoveFunction { rule_id: fs[rng.random_range(0..fs.len())].id().to_string() },
            },
            _ => EventPayload::Train {},
        };
        if let Ok(labelforge::project::Outcome::Suggested(s)) = project.execute(payload, clock) {
            last_suggestion = Some((s.suggestion_token, s.candidates.into_iter().map(|c| c.rule_id).collect()));
        }
    }
    project
}
