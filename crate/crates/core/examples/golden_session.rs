//! Scripts the bundled 20-interaction session on the mini spam corpus and
//! writes its event log.
//!
//!     cargo run -p labelforge --example golden_session -- [data/spam] [out.jsonl]

use std::collections::BTreeSet;
use std::error::Error;
use std::path::PathBuf;

use labelforge::corpus::Document;
use labelforge::glm::{ConceptElement, GlmOp, Interaction, LinkAnnotation, SpanAnnotation};
use labelforge::project::{load_corpus_dir, write_log, Project};

const HAM: usize = 0;
const SPAM: usize = 1;

enum Pick {
    Top(usize),
    Containing(&'static str),
}

struct Step {
    label: usize,
    /// (word, concept); the span covers the first occurrence of `word`, or
    /// the whole entity starting there for `<TAG>` words.
    spans: &'static [(&'static str, Option<&'static str>)],
    /// Directed link from the first span to the second.
    link: Option<bool>,
    pick: Pick,
}

const CONCEPTS: &[(&str, &[&str])] = &[
    ("channel", &["channel", "subscribe", "subscribers"]),
    ("promo", &["check", "visit", "follow", "click"]),
    ("prize", &["iphone", "ipad", "laptop", "xbox", "cash", "gift", "money"]),
    ("social", &["instagram", "twitter", "facebook", "snapchat"]),
    ("love", &["love", "loves"]),
    ("padj", &["amazing", "beautiful", "awesome", "great", "perfect", "incredible", "wonderful"]),
    ("music", &["song", "voice", "beat", "lyrics", "music", "dance"]),
    ("memory", &["memories", "remember", "listening"]),
];

const STEPS: &[Step] = &[
    Step { label: SPAM, spans: &[("channel", Some("channel"))], link: None, pick: Pick::Top(1) },
    Step {
        label: SPAM,
        spans: &[("check", Some("promo")), ("channel", Some("channel"))],
        link: Some(true),
        pick: Pick::Top(1),
    },
    Step { label: HAM, spans: &[("love", Some("love")), ("song", Some("music"))], link: Some(true), pick: Pick::Top(1) },
    Step { label: HAM, spans: &[("amazing", Some("padj"))], link: None, pick: Pick::Top(1) },
    Step { label: SPAM, spans: &[("free", None), ("iphone", Some("prize"))], link: Some(false), pick: Pick::Top(2) },
    Step {
        label: SPAM,
        spans: &[("follow", Some("promo")), ("instagram", Some("social"))],
        link: Some(true),
        pick: Pick::Top(1),
    },
    Step { label: HAM, spans: &[("beautiful", Some("padj")), ("voice", Some("music"))], link: Some(true), pick: Pick::Top(1) },
    Step { label: HAM, spans: &[("memories", Some("memory"))], link: None, pick: Pick::Top(1) },
    Step { label: SPAM, spans: &[("<URL>", None)], link: None, pick: Pick::Containing("<URL>") },
    Step { label: HAM, spans: &[("watching", None), ("<LOCATION>", None)], link: Some(true), pick: Pick::Containing("<LOCATION>") },
    Step { label: SPAM, spans: &[("subscribe", Some("channel")), ("back", None)], link: Some(true), pick: Pick::Top(1) },
    Step { label: HAM, spans: &[("listening", Some("memory"))], link: None, pick: Pick::Top(1) },
    Step { label: SPAM, spans: &[("money", Some("prize")), ("online", None)], link: Some(true), pick: Pick::Top(1) },
    Step { label: HAM, spans: &[("idol", None)], link: None, pick: Pick::Top(1) },
    Step { label: SPAM, spans: &[("giveaway", None)], link: None, pick: Pick::Top(1) },
    Step { label: HAM, spans: &[("views", None)], link: None, pick: Pick::Top(1) },
    Step { label: SPAM, spans: &[("profile", None)], link: None, pick: Pick::Top(1) },
    Step { label: HAM, spans: &[("favorite", None), ("song", Some("music"))], link: Some(true), pick: Pick::Top(1) },
    Step { label: SPAM, spans: &[("dollars", Some("prize"))], link: None, pick: Pick::Top(1) },
    Step { label: HAM, spans: &[("chills", None)], link: None, pick: Pick::Top(1) },
];

fn locate(doc: &Document, word: &str) -> Option<(usize, usize)> {
    if let Some(tag) = word.strip_prefix('<').and_then(|w| w.strip_suffix('>')) {
        return doc.entities.iter().find(|e| e.entity_type == tag).map(|e| (e.start_token, e.end_token));
    }
    doc.tokens.iter().position(|t| t.normalized == word).map(|i| (i, i + 1))
}

fn build(doc: &Document, step: &Step) -> Option<Interaction> {
    let ranges: Vec<(usize, usize)> = step.spans.iter().map(|(w, _)| locate(doc, w)).collect::<Option<_>>()?;
    if let (Some(directed), [a, b]) = (step.link, ranges.as_slice()) {
        let same_sentence = doc.sentence_of(a.0) == doc.sentence_of(b.0);
        let overlap = a.0 < b.1 && b.0 < a.1;
        if !same_sentence || overlap || (directed && a.0 >= b.0) {
            return None;
        }
    }
    let spans = ranges
        .iter()
        .zip(step.spans)
        .enumerate()
        .map(|(i, (&(start, end), (_, concept)))| SpanAnnotation {
            id: i as u32,
            start_token: start,
            end_token: end,
            concept: concept.map(str::to_string),
        })
        .collect();
    let links = step.link.map(|directed| LinkAnnotation { a: 0, b: 1, directed }).into_iter().collect();
    Some(Interaction { doc_uid: doc.uid.clone(), spans, links, label: step.label })
}

fn main() -> Result<(), Box<dyn Error>> {
    let mut args = std::env::args().skip(1);
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let dir = args.next().map_or_else(|| root.join("data/spam"), PathBuf::from);
    let out = args.next().map_or_else(|| dir.join("golden_log.jsonl"), PathBuf::from);

    let (config, corpora) = load_corpus_dir(&dir)?;
    let mut project = Project::new("spam", config, corpora)?;
    let mut clock = 1_600_000_000_000u64;
    let mut tick = || {
        clock += 1_000;
        clock
    };

    for (name, words) in CONCEPTS {
        project.edit_concepts(GlmOp::CreateConcept { name: name.to_string() }, tick())?;
        for w in *words {
            let op = GlmOp::AddElement { concept: name.to_string(), element: ConceptElement::token(w), position: None };
            project.edit_concepts(op, tick())?;
        }
    }
    project.refit(tick())?;

    let mut used = BTreeSet::new();
    for (n, step) in STEPS.iter().enumerate() {
        if n == 18 {
            let op = GlmOp::AddElement { concept: "prize".into(), element: ConceptElement::token("dollars"), position: None };
            project.edit_concepts(op, tick())?;
            project.refit(tick())?;
        }
        let ix = project
            .corpora()
            .unlabeled
            .documents
            .iter()
            .filter(|d| !used.contains(&d.uid))
            .find_map(|d| build(d, step))
            .ok_or_else(|| format!("step {}: no document fits", n + 1))?;
        used.insert(ix.doc_uid.clone());
        let suggestion = project.submit_interaction(ix, tick())?;
        let ids: Vec<String> = match step.pick {
            Pick::Top(k) => suggestion.candidates.iter().take(k).map(|c| c.rule_id.clone()).collect(),
            Pick::Containing(s) => suggestion
                .candidates
                .iter()
                .filter(|c| c.formula.contains(s))
                .take(1)
                .map(|c| c.rule_id.clone())
                .collect(),
        };
        if ids.is_empty() {
            return Err(format!("step {}: nothing to accept", n + 1).into());
        }
        let (added, stats) = project.accept_functions(&suggestion.suggestion_token, &ids, tick())?;
        let f1 = stats.model_stats.as_ref().map_or(0.0, |m| m.metrics.f1);
        eprintln!("step {:2}: +{added} -> {} functions, dev f1 {f1:.3}: {}", n + 1, stats.n_functions, suggestion.candidates[0].rendering);
    }
    let report = project.train(tick())?;
    write_log(&out, project.events())?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    eprintln!("wrote {} events to {}", project.events().len(), out.display());
    Ok(())
}
