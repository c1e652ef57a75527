mod common;

use common::{small_spec, synthetic};
use hsiselect::bandselect::{RedundancyMode, SelectionThresholds};
use hsiselect::datacube::{random_split, SyntheticSpec};
use hsiselect::error::Error;
use hsiselect::infotheory::DEFAULT_LEVELS;
use hsiselect::wrapper::{
    evaluate_thresholds, ClassifierKind, ClassifierSpec, EvaluationCache, WrapperEvaluator,
};

fn t(rel: f64, red: f64) -> SelectionThresholds {
    SelectionThresholds::new(rel, red).unwrap()
}

#[test]
fn cache_hit_skips_the_classifier() {
    let data = synthetic(small_spec(2, 1, 2), 4);
    let split = random_split(&data.gt, 0.5, 4, false).unwrap();
    let cache = EvaluationCache::in_memory();
    let ev = WrapperEvaluator::new(
        &data.cube,
        &data.gt,
        &split,
        ClassifierSpec::default(),
        DEFAULT_LEVELS,
        RedundancyMode::Pristine,
        &cache,
    )
    .unwrap();
    let first = ev.evaluate(t(0.0, 1.0)).unwrap();
    assert_eq!(ev.classifier_invocations(), 1);
    let second = ev.evaluate(t(0.0, 1.0)).unwrap();
    assert_eq!(first, second);
    assert_eq!(ev.classifier_invocations(), 1);
    assert_eq!(cache.len(), 1);

    // a fresh evaluator over the same cache does not classify either
    let again = WrapperEvaluator::new(
        &data.cube,
        &data.gt,
        &split,
        ClassifierSpec::default(),
        DEFAULT_LEVELS,
        RedundancyMode::Pristine,
        &cache,
    )
    .unwrap();
    assert_eq!(again.evaluate(t(0.0, 1.0)).unwrap(), first);
    assert_eq!(again.classifier_invocations(), 0);
}

#[test]
fn empty_selection_is_undefined() {
    let data = synthetic(small_spec(2, 1, 2), 4);
    let split = random_split(&data.gt, 0.5, 4, false).unwrap();
    let cache = EvaluationCache::in_memory();
    let spec = ClassifierSpec::default();
    let r = evaluate_thresholds(
        &data.cube,
        &data.gt,
        &split,
        t(50.0, 1.0),
        &spec,
        &cache,
        DEFAULT_LEVELS,
    )
    .unwrap();
    assert!(!r.defined());
    assert_eq!(r.n_bands(), 0);
    let r = evaluate_thresholds(
        &data.cube,
        &data.gt,
        &split,
        t(0.0, 0.0),
        &spec,
        &cache,
        DEFAULT_LEVELS,
    )
    .unwrap();
    assert!(!r.defined());
}

#[test]
fn separable_cube_is_classified_perfectly() {
    let spec = SyntheticSpec {
        width: 16,
        height: 16,
        n_classes: 3,
        relevant_bands: 2,
        redundant_copies_per_relevant: 0,
        noise_bands: 2,
        noise_amplitude: 0.1,
    };
    let data = synthetic(spec, 2);
    let split = random_split(&data.gt, 0.5, 2, false).unwrap();
    let cache = EvaluationCache::in_memory();
    for kind in [
        ClassifierKind::NearestCentroid,
        ClassifierKind::Knn { k: 1 },
        ClassifierKind::Knn { k: 3 },
    ] {
        let c = ClassifierSpec {
            kind,
            normalize: true,
        };
        let r = evaluate_thresholds(
            &data.cube,
            &data.gt,
            &split,
            t(0.5, 1.0),
            &c,
            &cache,
            DEFAULT_LEVELS,
        )
        .unwrap();
        assert!(r.bands.iter().all(|&b| b < 2), "{:?}", r.bands);
        assert_eq!(r.accuracy, Some(100.0), "{}", c.id());
    }
}

#[test]
fn constant_external_classifier_scores_class_frequency() {
    let data = synthetic(small_spec(2, 1, 2), 6);
    let split = random_split(&data.gt, 0.5, 6, false).unwrap();
    let cache = EvaluationCache::in_memory();
    let c = ClassifierSpec {
        kind: ClassifierKind::External {
            command: ["sh", "-c", "awk 'NR>1{print 1}' \"$2\"", "sh"]
                .map(String::from)
                .to_vec(),
        },
        normalize: true,
    };
    let r = evaluate_thresholds(
        &data.cube,
        &data.gt,
        &split,
        t(0.0, 1.0),
        &c,
        &cache,
        DEFAULT_LEVELS,
    )
    .unwrap();
    let ones = split
        .test_pixels
        .iter()
        .filter(|&&(r, c)| data.gt.label(r, c) == 1)
        .count();
    let expected = 100.0 * ones as f64 / split.test_pixels.len() as f64;
    assert_eq!(r.accuracy, Some(expected));
}

#[test]
fn misbehaving_external_classifier_names_the_couple() {
    let data = synthetic(small_spec(2, 1, 2), 6);
    let split = random_split(&data.gt, 0.5, 6, false).unwrap();
    let cache = EvaluationCache::in_memory();
    for script in ["exit 4", "echo 1", "awk 'NR>1{print 99}' \"$2\""] {
        let c = ClassifierSpec {
            kind: ClassifierKind::External {
                command: ["sh", "-c", script, "sh"].map(String::from).to_vec(),
            },
            normalize: false,
        };
        let err = evaluate_thresholds(
            &data.cube,
            &data.gt,
            &split,
            t(0.0, 1.0),
            &c,
            &cache,
            DEFAULT_LEVELS,
        )
        .unwrap_err();
        assert_eq!(err.exit_code(), 3, "{script}: {err}");
        match err {
            Error::AtCouple {
                th_redundancy,
                source,
                ..
            } => {
                assert_eq!(th_redundancy, 1.0);
                assert!(matches!(*source, Error::Classifier(_)));
            }
            other => panic!("{other:?}"),
        }
    }
    assert!(cache.is_empty());
}

#[test]
fn records_are_deterministic_and_survive_reload() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cache.csv");
    let data = synthetic(small_spec(2, 1, 2), 9);
    let split = random_split(&data.gt, 0.5, 9, true).unwrap();
    let spec = ClassifierSpec::default();
    let couples = [t(0.0, 1.0), t(0.2, 0.6), t(0.0, 0.3)];

    let cache = EvaluationCache::open(&path).unwrap();
    let first: Vec<_> = couples
        .iter()
        .map(|&c| {
            evaluate_thresholds(
                &data.cube,
                &data.gt,
                &split,
                c,
                &spec,
                &cache,
                DEFAULT_LEVELS,
            )
            .unwrap()
        })
        .collect();
    cache.save().unwrap();

    let fresh = EvaluationCache::in_memory();
    let recomputed: Vec<_> = couples
        .iter()
        .map(|&c| {
            evaluate_thresholds(
                &data.cube,
                &data.gt,
                &split,
                c,
                &spec,
                &fresh,
                DEFAULT_LEVELS,
            )
            .unwrap()
        })
        .collect();
    assert_eq!(first, recomputed);

    let reloaded = EvaluationCache::open(&path).unwrap();
    assert_eq!(reloaded.snapshot(), cache.snapshot());
    for r in &first {
        if let Some(a) = r.accuracy {
            assert!((0.0..=100.0).contains(&a));
            assert!(r.n_bands() >= 1);
        }
    }
}

#[test]
fn protocols_do_not_collide() {
    let data = synthetic(small_spec(2, 1, 2), 9);
    let split = random_split(&data.gt, 0.5, 9, false).unwrap();
    let cache = EvaluationCache::in_memory();
    let a = ClassifierSpec::default();
    let b = ClassifierSpec {
        kind: ClassifierKind::NearestCentroid,
        normalize: true,
    };
    evaluate_thresholds(
        &data.cube,
        &data.gt,
        &split,
        t(0.0, 1.0),
        &a,
        &cache,
        DEFAULT_LEVELS,
    )
    .unwrap();
    evaluate_thresholds(
        &data.cube,
        &data.gt,
        &split,
        t(0.0, 1.0),
        &b,
        &cache,
        DEFAULT_LEVELS,
    )
    .unwrap();
    evaluate_thresholds(&data.cube, &data.gt, &split, t(0.0, 1.0), &a, &cache, 64).unwrap();
    assert_eq!(cache.len(), 3);
}
