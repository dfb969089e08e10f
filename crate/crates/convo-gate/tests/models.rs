mod common;

use std::path::PathBuf;
use std::sync::Arc;

use convo_gate::config::CounterKind;
use convo_gate::model::{ClassifierModel, Counter};
use convo_gate::GateError;
use convo_gate_core::filter::IntentScorer;
use convo_gate_core::{IntentDescriptor, IntentSchema};

fn bundle_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/bundle")
}

fn reversed_schema() -> IntentSchema {
    let mut intents: Vec<IntentDescriptor> = IntentSchema::default_schema().intents().to_vec();
    intents.reverse();
    IntentSchema::new(intents).unwrap()
}

#[test]
fn baseline_file_loads_back_with_identical_scores() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.cgbl");
    let artifact = common::keyword_artifact();
    artifact.save(&path).unwrap();
    let model = ClassifierModel::load_for(&path, &IntentSchema::default_schema()).unwrap();
    assert_eq!(model.kind(), "baseline");
    assert_eq!(model.metadata().trained_on, "hand");
    for text in ["please remind me", "what is it?", "", "ok [SEP] fine"] {
        assert_eq!(model.score(text).unwrap(), artifact.model.predict(text));
    }
    assert!(model.score("please remind me").unwrap().as_slice()[0] > 0.5);
    assert!(model.score("what is it?").unwrap().as_slice()[1] > 0.5);
}

#[test]
fn intent_order_must_match_the_schema() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.cgbl");
    common::keyword_artifact().save(&path).unwrap();
    assert!(matches!(ClassifierModel::load_for(&path, &reversed_schema()), Err(GateError::Core(_))));
}

#[test]
fn missing_and_corrupt_files() {
    let dir = tempfile::tempdir().unwrap();
    match ClassifierModel::load(dir.path().join("nope.cgbl")) {
        Err(GateError::Io { source, .. }) => assert_eq!(source.kind(), std::io::ErrorKind::NotFound),
        other => panic!("{other:?}"),
    }
    let path = dir.path().join("junk.cgbl");
    std::fs::write(&path, b"CGBL1 but not really").unwrap();
    assert!(matches!(ClassifierModel::load(&path), Err(GateError::Model { .. })));
}

#[test]
fn external_counter_needs_an_external_model() {
    let model = Arc::new(common::keyword_model());
    assert!(Counter::new(CounterKind::External, Some(&model)).is_err());
    assert!(Counter::new(CounterKind::External, None).is_err());
    assert!(Counter::new(CounterKind::Whitespace, None).is_ok());
}

#[cfg(feature = "onnx")]
mod external {
    use super::*;
    use convo_gate_core::tokens::TokenCounter;

    #[derive(serde::Deserialize)]
    struct Expected {
        texts: Vec<String>,
        scores: Vec<Vec<f64>>,
        token_counts: Vec<usize>,
    }

    fn expected() -> Expected {
        serde_json::from_str(&std::fs::read_to_string(bundle_dir().join("expected.json")).unwrap()).unwrap()
    }

    #[test]
    fn bundle_scores_match_the_reference_outputs() {
        let model = ClassifierModel::load_for(bundle_dir(), &IntentSchema::default_schema()).unwrap();
        assert_eq!(model.kind(), "external");
        assert_eq!(model.separator(), "[SEP]");
        assert_eq!(model.thresholds().as_slice(), &[0.5, 0.5]);
        let exp = expected();
        assert_eq!(exp.texts.len(), 32);
        for (text, want) in exp.texts.iter().zip(&exp.scores) {
            let got = model.score(text).unwrap();
            for (g, w) in got.as_slice().iter().zip(want) {
                assert!((g - w).abs() < 1e-3, "{text:?}: {g} vs {w}");
            }
        }
    }

    #[test]
    fn bundle_tokenizer_counts_tokens() {
        let model = Arc::new(ClassifierModel::load(bundle_dir()).unwrap());
        let counter = Counter::new(CounterKind::External, Some(&model)).unwrap();
        let exp = expected();
        for (text, &n) in exp.texts.iter().zip(&exp.token_counts) {
            assert_eq!(counter.count(text), n, "{text:?}");
        }
    }

    #[test]
    fn bundle_intent_order_is_checked() {
        assert!(matches!(ClassifierModel::load_for(bundle_dir(), &reversed_schema()), Err(GateError::Core(_))));
    }

    #[test]
    fn missing_bundle_is_an_io_error() {
        match ClassifierModel::load_external(bundle_dir().join("does-not-exist")) {
            Err(GateError::Io { source, .. }) => assert_eq!(source.kind(), std::io::ErrorKind::NotFound),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bundle_without_graph_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        for f in ["tokenizer.json", "metadata.json"] {
            std::fs::copy(bundle_dir().join(f), dir.path().join(f)).unwrap();
        }
        assert!(matches!(ClassifierModel::load(dir.path()), Err(GateError::Model { .. })));
    }
}
