use proptest::prelude::*;
use shopspec::abstraction::{
    program_to_route_sheet, split_sentences, synthesize_program, DocKind, MatchConfig,
    ProcedureDoc, RuleExtractor,
};
use shopspec::dsl::validate_program;
use shopspec::synth::{bundled_benchmarks, synthesize_scenario};

#[test]
fn every_corpus_document_compiles_to_its_gold_program() {
    for (b, seed) in bundled_benchmarks() {
        let s = synthesize_scenario(&b, seed);
        let extractor = RuleExtractor::from_dsl(&s.dsl);
        let mut kinds = Vec::new();
        for (doc, gold) in s.corpus.iter().zip(&s.gold.programs) {
            let p = synthesize_program(doc, &s.dsl, &extractor, &MatchConfig::default())
                .unwrap_or_else(|e| panic!("{}/{}: {e}", s.scenario_id(), doc.doc_id));
            assert_eq!(&p, gold, "{}/{}", s.scenario_id(), doc.doc_id);
            assert!(validate_program(&p, &s.dsl).is_empty());
            let sheet = program_to_route_sheet(&p, &s.dsl);
            assert!(s.gold.route_sheets.contains(&sheet));
            kinds.push(doc.kind);
        }
        assert!(
            kinds.contains(&DocKind::NaturalLanguage) && kinds.contains(&DocKind::SemiStructured)
        );
    }
}

#[test]
fn plain_text_compiles_like_the_sentence_list() {
    let (b, seed) = bundled_benchmarks().into_iter().next().unwrap();
    let s = synthesize_scenario(&b, seed);
    let extractor = RuleExtractor::from_dsl(&s.dsl);
    let doc = s
        .corpus
        .iter()
        .find(|d| d.kind == DocKind::NaturalLanguage)
        .unwrap();
    let text = doc.sentences.join("\n");
    let again = ProcedureDoc::from_text(&doc.doc_id, &text);
    assert_eq!(again.sentences, doc.sentences);
    let cfg = MatchConfig::default();
    assert_eq!(
        synthesize_program(&again, &s.dsl, &extractor, &cfg).unwrap(),
        synthesize_program(doc, &s.dsl, &extractor, &cfg).unwrap()
    );
}

#[test]
fn unrelated_text_does_not_compile() {
    let (b, seed) = bundled_benchmarks().into_iter().next().unwrap();
    let s = synthesize_scenario(&b, seed);
    let extractor = RuleExtractor::from_dsl(&s.dsl);
    let doc = ProcedureDoc::natural("J99", vec!["Polish the moon with a spoon.".into()]);
    assert!(synthesize_program(&doc, &s.dsl, &extractor, &MatchConfig::default()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn sentence_split_keeps_decimals(a in 0u32..1000, b in 0u32..100, words in "[a-z]{1,8}( [a-z]{1,8}){0,4}") {
        let text = format!("Set {a}.{b} mm. {words}.");
        let parts = split_sentences(&text);
        prop_assert_eq!(parts.len(), 2);
        prop_assert_eq!(parts[0].clone(), format!("Set {a}.{b} mm."));
    }
}
