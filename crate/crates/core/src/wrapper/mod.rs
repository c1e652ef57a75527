//! Wrapper evaluation: select bands for a threshold couple, classify the test
//! split with them, and memoize the resulting accuracy.

mod cache;
mod classifier;

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

pub(crate) use cache::join_bands;
pub use cache::{CacheKey, EvaluationCache, CACHE_HEADER};
pub use classifier::{overall_accuracy, train_predict, ClassifierKind, ClassifierSpec};

use crate::bandselect::{BandSelector, BandSubset, RedundancyMode, SelectionThresholds};
use crate::datacube::{GroundTruthMap, HyperCube, LabeledSplit};
use crate::error::{Error, Result};

/// Outcome of one threshold couple. `accuracy` is `None` when no band was
/// selected, so nothing could be classified.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationRecord {
    pub thresholds: SelectionThresholds,
    pub bands: Vec<usize>,
    /// Overall test accuracy in percent.
    pub accuracy: Option<f64>,
}

impl EvaluationRecord {
    pub fn n_bands(&self) -> usize {
        self.bands.len()
    }

    pub fn defined(&self) -> bool {
        self.accuracy.is_some()
    }

    pub fn undefined(thresholds: SelectionThresholds) -> Self {
        EvaluationRecord {
            thresholds,
            bands: Vec::new(),
            accuracy: None,
        }
    }
}

/// Evaluates threshold couples on one dataset under one protocol (split,
/// classifier, quantization), consulting the cache first.
pub struct WrapperEvaluator<'a> {
    cube: &'a HyperCube,
    gt: &'a GroundTruthMap,
    split: &'a LabeledSplit,
    classifier: ClassifierSpec,
    classifier_id: String,
    n_levels: u32,
    selector: BandSelector,
    cache: &'a EvaluationCache,
    // Distinct couples often select the same subset.
    by_subset: Mutex<HashMap<Vec<usize>, f64>>,
    invocations: AtomicUsize,
}

impl<'a> WrapperEvaluator<'a> {
    pub fn new(
        cube: &'a HyperCube,
        gt: &'a GroundTruthMap,
        split: &'a LabeledSplit,
        classifier: ClassifierSpec,
        n_levels: u32,
        mode: RedundancyMode,
        cache: &'a EvaluationCache,
    ) -> Result<Self> {
        classifier.validate()?;
        let selector = BandSelector::new(cube, gt, n_levels, true, mode)?;
        let mut classifier_id = classifier.id();
        if mode == RedundancyMode::Literal {
            classifier_id.push_str("/literal");
        }
        Ok(WrapperEvaluator {
            cube,
            gt,
            split,
            classifier,
            classifier_id,
            n_levels,
            selector,
            cache,
            by_subset: Mutex::new(HashMap::new()),
            invocations: AtomicUsize::new(0),
        })
    }

    /// Appends a protocol tag (e.g. split fraction) to the cache identity.
    pub fn with_protocol_tag(mut self, tag: &str) -> Self {
        if !tag.is_empty() {
            self.classifier_id.push('/');
            self.classifier_id.push_str(tag);
        }
        self
    }

    pub fn classifier_id(&self) -> &str {
        &self.classifier_id
    }

    pub fn selector(&self) -> &BandSelector {
        &self.selector
    }

    pub fn key(&self, thresholds: SelectionThresholds) -> CacheKey {
        CacheKey::new(
            thresholds,
            self.split.seed,
            self.classifier_id.clone(),
            self.n_levels,
        )
    }

    pub fn selection(&self, thresholds: SelectionThresholds) -> BandSubset {
        self.selector.select(thresholds)
    }

    /// Number of times the classifier has actually been trained.
    pub fn classifier_invocations(&self) -> usize {
        self.invocations.load(Ordering::SeqCst)
    }

    pub fn evaluate(&self, thresholds: SelectionThresholds) -> Result<EvaluationRecord> {
        let key = self.key(thresholds);
        if let Some(hit) = self.cache.get(&key) {
            return Ok(hit);
        }
        let subset = self.selector.select(thresholds);
        let record = if subset.is_empty() {
            EvaluationRecord::undefined(thresholds)
        } else {
            let accuracy = self
                .accuracy_of(&subset.bands)
                .map_err(|e| Error::AtCouple {
                    th_relevance: thresholds.th_relevance,
                    th_redundancy: thresholds.th_redundancy,
                    source: Box::new(e),
                })?;
            EvaluationRecord {
                thresholds,
                bands: subset.bands,
                accuracy: Some(accuracy),
            }
        };
        Ok(self.cache.insert(key, record))
    }

    fn accuracy_of(&self, bands: &[usize]) -> Result<f64> {
        if let Some(&a) = self.by_subset.lock().unwrap().get(bands) {
            return Ok(a);
        }
        self.invocations.fetch_add(1, Ordering::SeqCst);
        let predicted = train_predict(&self.classifier, self.cube, self.gt, self.split, bands)?;
        let actual: Vec<u32> = self
            .split
            .test_pixels
            .iter()
            .map(|&(r, c)| self.gt.label(r, c))
            .collect();
        let accuracy = overall_accuracy(&predicted, &actual)?;
        self.by_subset
            .lock()
            .unwrap()
            .insert(bands.to_vec(), accuracy);
        Ok(accuracy)
    }
}

/// One-off evaluation of a single couple.
pub fn evaluate_thresholds(
    cube: &HyperCube,
    gt: &GroundTruthMap,
    split: &LabeledSplit,
    thresholds: SelectionThresholds,
    spec: &ClassifierSpec,
    cache: &EvaluationCache,
    n_levels: u32,
) -> Result<EvaluationRecord> {
    WrapperEvaluator::new(
        cube,
        gt,
        split,
        spec.clone(),
        n_levels,
        RedundancyMode::Pristine,
        cache,
    )?
    .evaluate(thresholds)
}
