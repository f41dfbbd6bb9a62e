mod common;

use labelforge::corpus::{tokenize, Document};
use labelforge::glm::{apply_operation, concept_matches, AnnotationDraft, Concept, ConceptElement, ConceptStore, GlmOp};
use proptest::prelude::*;
use regex::Regex;

fn text_strategy() -> impl Strategy<Value = String> {
    proptest::collection::vec(
        prop_oneof![
            "[a-zA-Z]{1,6}",
            Just("'".to_string()),
            Just("don't".to_string()),
            Just(". ".to_string()),
            Just("?!".to_string()),
            Just(" ".to_string()),
            Just("42".to_string()),
            Just("é".to_string()),
            Just("  ,".to_string()),
        ],
        0..20,
    )
    .prop_map(|parts| parts.concat())
}

proptest! {
    #[test]
    fn tokens_match_the_word_regex(text in text_strategy()) {
        let re = Regex::new(r"\p{Alphabetic}+(?:'\p{Alphabetic}+)?").unwrap();
        let expected: Vec<&str> = re.find_iter(&text).map(|m| m.as_str()).collect();
        let tokens = tokenize(&text);
        let got: Vec<&str> = tokens.iter().map(|t| t.surface.as_str()).collect();
        prop_assert_eq!(got, expected);
        for (i, t) in tokens.iter().enumerate() {
            prop_assert_eq!(t.index, i);
            prop_assert_eq!(&text[t.byte_start..t.byte_end], t.surface.as_str());
            prop_assert_eq!(t.normalized.clone(), t.surface.to_lowercase());
        }
    }

    #[test]
    fn sentences_partition_the_tokens(text in text_strategy()) {
        let doc = Document::new("d", text.clone());
        prop_assert!(doc.check_invariants().is_ok());
        let mut next = 0;
        for s in &doc.sentences {
            prop_assert_eq!(s.start, next);
            prop_assert!(s.end > s.start);
            next = s.end;
        }
        prop_assert_eq!(next, doc.tokens.len());
        // a boundary sits exactly where the gap between two tokens has terminal punctuation
        for w in doc.tokens.windows(2) {
            let gap = &text[w[0].byte_end..w[1].byte_start];
            let split = doc.sentence_of(w[0].index) != doc.sentence_of(w[1].index);
            prop_assert_eq!(split, gap.contains(['.', '!', '?']));
        }
    }

    #[test]
    fn adding_an_element_never_loses_matches(seed in any::<u64>(), word in "[a-e]") {
        let mut rng = common::rng(seed);
        let doc = common::random_document(&mut rng, "d");
        let store = common::small_store();
        for concept in store.iter() {
            let before = concept_matches(concept, &doc);
            let mut grown = concept.clone();
            if grown.insert(ConceptElement::token(&word), None).is_ok() {
                let after = concept_matches(&grown, &doc);
                prop_assert!(before.iter().all(|r| after.contains(r)));
                let fresh: Vec<usize> = doc.tokens.iter().filter(|t| t.normalized == word).map(|t| t.index).collect();
                for i in fresh {
                    prop_assert!(after.contains(&(i..i + 1)));
                }
            }
        }
    }

    #[test]
    fn operations_are_undone_by_their_inverse(ops in proptest::collection::vec(op_strategy(), 1..25)) {
        let doc = Document::new("d", "check out my channel. I love this song so much!");
        let mut draft = AnnotationDraft::new(&doc);
        let mut store = ConceptStore::new();
        store.insert(Concept::from_tokens("music", &["song"]).unwrap()).unwrap();
        for op in ops {
            let (draft0, store0) = (draft.clone(), store.clone());
            match apply_operation(&mut draft, &mut store, op) {
                Ok(inverse) => {
                    let (draft1, store1) = (draft.clone(), store.clone());
                    let redo = apply_operation(&mut draft, &mut store, inverse).unwrap();
                    prop_assert_eq!(&draft, &draft0);
                    prop_assert_eq!(&store, &store0);
                    apply_operation(&mut draft, &mut store, redo).unwrap();
                    prop_assert_eq!(&draft, &draft1);
                    prop_assert_eq!(&store, &store1);
                }
                Err(_) => {
                    prop_assert_eq!(&draft, &draft0);
                    prop_assert_eq!(&store, &store0);
                }
            }
        }
    }
}

fn op_strategy() -> impl Strategy<Value = GlmOp> {
    let name = prop_oneof![Just("music".to_string()), Just("promo".to_string())];
    let word = prop_oneof![Just("song"), Just("channel"), Just("love"), Just("check")];
    prop_oneof![
        (0usize..12, 1usize..3).prop_map(|(s, l)| GlmOp::Select { start: s, end: s + l }),
        (0u32..4).prop_map(|id| GlmOp::Deselect { id }),
        (0u32..4, proptest::option::of(name.clone())).prop_map(|(span, concept)| GlmOp::AssignConcept { span, concept }),
        name.clone().prop_map(|name| GlmOp::CreateConcept { name }),
        name.clone().prop_map(|name| GlmOp::DeleteConcept { name }),
        (name.clone(), word.clone()).prop_map(|(concept, w)| GlmOp::AddElement {
            concept,
            element: ConceptElement::token(w),
            position: None
        }),
        (name, word).prop_map(|(concept, w)| GlmOp::DeleteElement { concept, element: ConceptElement::token(w) }),
        (0u32..4, 0u32..4).prop_map(|(a, b)| GlmOp::Link { a, b }),
        (0u32..4, 0u32..4).prop_map(|(a, b)| GlmOp::DirectTo { a, b }),
        (0u32..4, 0u32..4).prop_map(|(a, b)| GlmOp::Unlink { a, b }),
    ]
}

#[test]
fn review_padj_matches_great() {
    let doc = Document::new("r", common::REVIEW);
    let padj = Concept::from_tokens("padj", &["wonderful", "great"]).unwrap();
    assert_eq!(concept_matches(&padj, &doc), vec![4..5]);
}
