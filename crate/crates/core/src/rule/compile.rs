use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::{Predicate, Rule, RuleError, Var};
use crate::corpus::Document;
use crate::glm::{ConceptStore, GlmError, Interaction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompileOptions {
    /// `direct_to` also scopes the pair to one sentence. When off, positional
    /// predicates hold anywhere in the document.
    pub positional_implies_sentence: bool,
}

impl Default for CompileOptions {
    fn default() -> Self {
        CompileOptions { positional_implies_sentence: true }
    }
}

/// A seed rule together with the span each canonical variable was compiled from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompiledSeed {
    pub rule: Rule,
    /// Indexed by canonical variable.
    pub spans: Vec<Range<usize>>,
}

/// Compiles one interaction into its seed rule.
///
/// Each span becomes a variable: `var ∈ c` when the span carries concept
/// `c`, otherwise `var = phrase` on the case-folded phrase. Directed links add
/// `idx(a) < idx(b)`; any link puts its pair in one sentence (directed links
/// only when `positional_implies_sentence`). Unlinked pairs co-occur at
/// document level.
pub fn compile_interaction(
    ix: &Interaction,
    doc: &Document,
    store: &ConceptStore,
    options: CompileOptions,
) -> Result<CompiledSeed, RuleError> {
    ix.validate(doc.tokens.len(), usize::MAX)?;
    let mut order: Vec<usize> = (0..ix.spans.len()).collect();
    order.sort_by_key(|&i| (ix.spans[i].start_token, ix.spans[i].end_token));
    let var_of = |id: u32| -> Result<Var, RuleError> {
        order
            .iter()
            .position(|&i| ix.spans[i].id == id)
            .map(|p| Var(p as u8))
            .ok_or(RuleError::Interaction(GlmError::UnknownSpan(id)))
    };
    if order.len() > u8::MAX as usize {
        return Err(RuleError::Malformed("too many spans in one interaction".into()));
    }

    let mut conditions = Vec::with_capacity(order.len() + ix.links.len());
    for (pos, &i) in order.iter().enumerate() {
        let span = &ix.spans[i];
        let var = Var(pos as u8);
        match &span.concept {
            Some(name) => {
                store.get(name).ok_or_else(|| RuleError::UnknownConcept(name.clone()))?;
                conditions.push(Predicate::in_concept(var, name));
            }
            None => conditions.push(Predicate::literal(var, &doc.phrase(span.range()))),
        }
    }
    let mut same_sentence = Vec::new();
    for link in &ix.links {
        let (a, b) = (var_of(link.a)?, var_of(link.b)?);
        if link.directed {
            conditions.push(Predicate::before(a, b));
            if options.positional_implies_sentence {
                same_sentence.push((a, b));
            }
        } else {
            same_sentence.push((a, b));
        }
    }
    let (rule, mapping) = Rule::canonicalize(conditions, same_sentence, ix.label)?;
    let mut spans = vec![0..0; rule.variables().len()];
    for (pos, &i) in order.iter().enumerate() {
        spans[mapping[pos].0 as usize] = ix.spans[i].range();
    }
    Ok(CompiledSeed { rule, spans })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glm::{ConceptElement, LinkAnnotation, SpanAnnotation};

    fn setup() -> (Document, ConceptStore) {
        let doc = Document::new(
            "amazon",
            "This book was so great! I loved and read it so many times that I will soon have to buy a new copy.",
        );
        let mut store = ConceptStore::new();
        store.create("item").unwrap();
        store.add_element("item", ConceptElement::token("book"), None).unwrap();
        store.add_element("item", ConceptElement::token("electronics"), None).unwrap();
        store.create("padj").unwrap();
        store.add_element("padj", ConceptElement::token("wonderful"), None).unwrap();
        store.add_element("padj", ConceptElement::token("great"), None).unwrap();
        (doc, store)
    }

    fn span(id: u32, start: usize, concept: Option<&str>) -> SpanAnnotation {
        SpanAnnotation { id, start_token: start, end_token: start + 1, concept: concept.map(str::to_string) }
    }

    #[test]
    fn compiles_the_review_example() {
        let (doc, store) = setup();
        let ix = Interaction {
            doc_uid: doc.uid.clone(),
            spans: vec![span(0, 1, None), span(1, 4, Some("padj"))],
            links: vec![LinkAnnotation { a: 0, b: 1, directed: true }],
            label: 1,
        };
        let seed = compile_interaction(&ix, &doc, &store, CompileOptions::default()).unwrap();
        assert_eq!(seed.rule.formula(), "{t1, t2 | t1 = book ∧ t2 ∈ padj ∧ idx(t1) < idx(t2)}");
        assert_eq!(seed.spans, vec![1..2, 4..5]);

        let reversed = Interaction {
            doc_uid: doc.uid.clone(),
            spans: vec![span(0, 4, Some("padj")), span(1, 1, None)],
            links: vec![LinkAnnotation { a: 1, b: 0, directed: true }],
            label: 1,
        };
        let again = compile_interaction(&reversed, &doc, &store, CompileOptions::default()).unwrap();
        assert_eq!(again.rule.id(), seed.rule.id());
    }

    #[test]
    fn single_span_rule() {
        let (doc, store) = setup();
        let ix = Interaction { doc_uid: doc.uid.clone(), spans: vec![span(0, 4, Some("padj"))], links: vec![], label: 1 };
        let seed = compile_interaction(&ix, &doc, &store, CompileOptions::default()).unwrap();
        assert_eq!(seed.rule.formula(), "{t1 | t1 ∈ padj}");
    }

    #[test]
    fn canonical_renaming_keeps_span_mapping() {
        let (doc, store) = setup();
        // "book" (item) precedes the literal "great"; the literal sorts first so
        // it becomes t1 even though it appears later.
        let ix = Interaction {
            doc_uid: doc.uid.clone(),
            spans: vec![span(0, 1, Some("item")), span(1, 4, None)],
            links: vec![LinkAnnotation { a: 0, b: 1, directed: false }],
            label: 1,
        };
        let seed = compile_interaction(&ix, &doc, &store, CompileOptions::default()).unwrap();
        assert_eq!(seed.rule.formula(), "{t1, t2 | t1 = great ∧ t2 ∈ item}");
        assert_eq!(seed.spans, vec![4..5, 1..2]);
    }

    #[test]
    fn multi_token_literal_and_document_scope() {
        let (doc, store) = setup();
        let ix = Interaction {
            doc_uid: doc.uid.clone(),
            spans: vec![
                SpanAnnotation { id: 0, start_token: 3, end_token: 5, concept: None },
                span(1, 1, Some("item")),
            ],
            links: vec![],
            label: 1,
        };
        let seed = compile_interaction(&ix, &doc, &store, CompileOptions::default()).unwrap();
        assert_eq!(seed.rule.formula(), "{t1, t2 | t1 = \"so great\" ∧ t2 ∈ item}");
        assert!(seed.rule.same_sentence().is_empty());
    }

    #[test]
    fn errors() {
        let (doc, store) = setup();
        let empty = Interaction { doc_uid: doc.uid.clone(), spans: vec![], links: vec![], label: 1 };
        assert!(matches!(
            compile_interaction(&empty, &doc, &store, CompileOptions::default()),
            Err(RuleError::Interaction(GlmError::EmptyInteraction))
        ));
        let unknown = Interaction { doc_uid: doc.uid.clone(), spans: vec![span(0, 1, Some("ghost"))], links: vec![], label: 0 };
        assert_eq!(
            compile_interaction(&unknown, &doc, &store, CompileOptions::default()),
            Err(RuleError::UnknownConcept("ghost".into()))
        );
    }

    #[test]
    fn positional_without_sentence_scope() {
        let (doc, store) = setup();
        let ix = Interaction {
            doc_uid: doc.uid.clone(),
            spans: vec![span(0, 1, None), span(1, 4, Some("padj"))],
            links: vec![LinkAnnotation { a: 0, b: 1, directed: true }],
            label: 1,
        };
        let opts = CompileOptions { positional_implies_sentence: false };
        let seed = compile_interaction(&ix, &doc, &store, opts).unwrap();
        assert!(seed.rule.same_sentence().is_empty());
    }
}
