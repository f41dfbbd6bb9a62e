mod common;

use labelforge::corpus::{Corpus, Split};
use labelforge::glm::{Concept, ConceptElement};
use labelforge::rule::{evaluate_all, evaluate_rule, ColumnCache, LabelingFunction, Predicate, Rule, Var};
use labelforge::synth::{generalization_score, ENTITY_CARDINALITY};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn evaluation_agrees_with_brute_force(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let store = common::small_store();
        let rule = common::random_rule(&mut rng);
        let doc = common::random_document(&mut rng, "d");
        let got = evaluate_rule(&rule, &doc, &store).unwrap();
        prop_assert_eq!(got, common::brute_force(&rule, &doc, &store), "{} on {:?}", rule, doc.text);
    }

    #[test]
    fn conjunct_order_and_variable_names_do_not_matter(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let store = common::small_store();
        let rule = common::random_rule(&mut rng);
        let other = common::permuted(&mut rng, &rule);
        prop_assert_eq!(other.id(), rule.id());
        prop_assert_eq!(other.canonical_json(), rule.canonical_json());
        let doc = common::random_document(&mut rng, "d");
        prop_assert_eq!(evaluate_rule(&other, &doc, &store).unwrap(), evaluate_rule(&rule, &doc, &store).unwrap());
    }

    #[test]
    fn rules_round_trip_through_json(seed in any::<u64>()) {
        let rule = common::random_rule(&mut common::rng(seed));
        let json = serde_json::to_string(&rule).unwrap();
        let back: Rule = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(back, rule);
    }

    #[test]
    fn score_multiplies_by_the_new_factor(seed in any::<u64>(), size in 0usize..6, entity in any::<bool>()) {
        let mut rng = common::rng(seed);
        let mut store = common::small_store();
        let words: Vec<String> = (0..size).map(|i| format!("fresh{}", (b'a' + i as u8) as char)).collect();
        let refs: Vec<&str> = words.iter().map(String::as_str).collect();
        store.insert(Concept::from_tokens("fresh", &refs).unwrap()).unwrap();
        let (mut conds, scope) = common::random_conditions(&mut rng);
        let base = Rule::new(conds.clone(), scope.clone(), 1).unwrap();
        let fresh_var = Var(3);
        let (extra, factor) = if entity {
            (Predicate::in_entity(fresh_var, "ORG"), ENTITY_CARDINALITY)
        } else {
            (Predicate::in_concept(fresh_var, "fresh"), size as u64)
        };
        conds.push(extra);
        let grown = Rule::new(conds, scope, 1).unwrap();
        let g = |r: &Rule| generalization_score(r, &store).unwrap();
        prop_assert_eq!(g(&grown), g(&base) * factor);
    }

    #[test]
    fn cached_columns_match_a_full_evaluation(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let mut store = common::small_store();
        let docs = (0..12).map(|i| common::random_document(&mut rng, &format!("d{i}"))).collect();
        let corpus = Corpus::new(Split::Unlabeled, docs).unwrap();
        let functions: Vec<LabelingFunction> = (0..5)
            .map(|i| LabelingFunction { rule: common::random_rule(&mut rng), accepted_at: i, enabled: true })
            .collect();
        let mut cache = ColumnCache::new();
        let mut active = functions.clone();
        for step in 0..6 {
            match step % 3 {
                0 => {
                    store.add_element("x", ConceptElement::token(common::WORDS[step % 5]), None).ok();
                    cache.invalidate_concept("x");
                }
                1 => {
                    active.pop();
                }
                _ => active.push(functions[step % functions.len()].clone()),
            }
            let mut seen = std::collections::HashSet::new();
            active.retain(|f| seen.insert(f.id().to_string()));
            let (cached, failures) = cache.matrix(&active, &corpus, &store);
            prop_assert!(failures.is_empty());
            let full = evaluate_all(&active, &corpus, &store).unwrap();
            prop_assert_eq!(cached, full);
        }
    }
}

#[test]
fn rule_scores_from_the_review_example() {
    let (_, store, _) = common::review_interaction();
    let (t1, t2) = (Var(0), Var(1));
    let rule1 = Rule::new(vec![Predicate::in_concept(t1, "item"), Predicate::in_concept(t2, "padj")], vec![], 1).unwrap();
    let rule5 = Rule::new(vec![Predicate::literal(t1, "book"), Predicate::in_concept(t2, "padj")], vec![], 1).unwrap();
    // |item| · |padj| = 2 · 2 and 1 · |padj| = 1 · 2
    assert_eq!(generalization_score(&rule1, &store).unwrap(), 2 * 2);
    assert_eq!(generalization_score(&rule5, &store).unwrap(), 2);
}
