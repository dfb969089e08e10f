//! Mini-batch training of the baseline with online window augmentation and
//! best-checkpoint selection on validation data.

use alloc::format;
use alloc::vec::Vec;

use crate::augment::{plan_batch_augmentation, split_to_context_budget, WindowConfig};
use crate::baseline::{BaselineModel, Sample};
use crate::conversation::{render_model_input, Conversation};
use crate::features::{FeatureHasher, DEFAULT_BUCKETS};
use crate::filter::{classify_conversation, IntentScorer, SegmentationConfig};
use crate::intent::{Labels, Thresholds};
use crate::metrics::{mean_f1, prf1, ConfusionCounts, Prf1};
use crate::rng::SplitMix64;
use crate::tokens::TokenCounter;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub l2: f64,
    pub eval_every: usize,
    pub window: WindowConfig,
    pub seed: u64,
    pub hash_seed: u64,
    pub buckets: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            batch_size: 24,
            epochs: 5,
            l2: 1e-2,
            eval_every: 500,
            window: WindowConfig::default(),
            seed: 0,
            hash_seed: 0x5eed,
            buckets: DEFAULT_BUCKETS,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(format!("train.{what} must be positive")));
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate");
        }
        if self.batch_size == 0 {
            return bad("batch_size");
        }
        if self.epochs == 0 {
            return bad("epochs");
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return bad("l2");
        }
        if self.eval_every == 0 {
            return bad("eval_every");
        }
        if self.buckets == 0 {
            return bad("buckets");
        }
        self.window.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StepRecord {
    pub step: u64,
    pub epoch: usize,
    pub base_samples: usize,
    pub augmented_samples: usize,
    /// Batch objective before the update.
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Snapshot {
    pub step: u64,
    pub per_intent: Vec<Prf1>,
    pub mean_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainingLog {
    pub steps: Vec<StepRecord>,
    /// Full training objective (no augmentation) before the first epoch and
    /// after each epoch.
    pub epoch_objective: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
    pub best_step: u64,
}

impl TrainingLog {
    pub fn best(&self) -> Option<&Snapshot> {
        self.snapshots.iter().find(|s| s.step == self.best_step)
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: BaselineModel,
    pub log: TrainingLog,
}

struct BaseSample {
    conv: usize,
    sample: Sample,
}

/// Predictions of `model` for every conversation, using the same chunking and
/// thresholding as serving.
pub fn predict_corpus<S: IntentScorer + ?Sized, C: TokenCounter + ?Sized>(
    model: &S,
    convs: &[Conversation],
    seg: &SegmentationConfig,
    counter: &C,
    thresholds: &Thresholds,
) -> Result<Vec<Labels>> {
    convs.iter().map(|c| classify_conversation(model, c, seg, counter, thresholds).map(|r| r.labels)).collect()
}

pub fn evaluate<S: IntentScorer + ?Sized, C: TokenCounter + ?Sized>(
    model: &S,
    convs: &[Conversation],
    seg: &SegmentationConfig,
    counter: &C,
    thresholds: &Thresholds,
) -> Result<ConfusionCounts> {
    let predictions = predict_corpus(model, convs, seg, counter, thresholds)?;
    let mut counts = ConfusionCounts::new(model.intent_count());
    for (p, c) in predictions.iter().zip(convs) {
        let reference = c.labels.as_ref().ok_or_else(|| Error::UnlabeledConversation(c.id.clone()))?;
        counts.record(p, reference)?;
    }
    Ok(counts)
}

/// Trains the baseline.
///
/// Every training conversation is split to the context budget; each chunk is
/// one base sample. Batches of `batch_size` base samples are drawn from a
/// per-epoch shuffle and extended by the window augmentation of the batch's
/// conversations. Every `eval_every` steps, and after the final step, the
/// model is scored on `val`; the snapshot with the highest mean per-intent F1
/// is returned (ties go to the later step).
pub fn train_baseline<C: TokenCounter + ?Sized>(
    train: &[Conversation],
    val: &[Conversation],
    intents: usize,
    cfg: &TrainConfig,
    seg: &SegmentationConfig,
    counter: &C,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyCorpus("training"));
    }
    if val.is_empty() {
        return Err(Error::EmptyCorpus("validation"));
    }
    for c in val {
        c.labels.as_ref().ok_or_else(|| Error::UnlabeledConversation(c.id.clone()))?.check_len(intents)?;
    }

    let mut model =
        BaselineModel::zeros(intents, FeatureHasher::new(cfg.hash_seed, cfg.buckets), seg.separator.as_str());
    let mut base = Vec::new();
    for (ci, conv) in train.iter().enumerate() {
        for chunk in split_to_context_budget(conv, seg.context_budget, counter, &seg.separator)? {
            let labels = conv.range_labels(chunk.range)?;
            labels.check_len(intents)?;
            let text = render_model_input(conv, chunk.range, &seg.separator)?;
            base.push(BaseSample { conv: ci, sample: Sample { features: model.featurize(&text), labels } });
        }
    }

    let thresholds = Thresholds::default_for(intents);
    let mut rng = SplitMix64::new(cfg.seed);
    let mut log = TrainingLog::default();
    let all_base: Vec<Sample> = base.iter().map(|b| b.sample.clone()).collect();
    log.epoch_objective.push(model.objective(&all_base, cfg.l2));

    let mut best: Option<(f64, BaselineModel)> = None;
    let mut snapshot = |model: &BaselineModel, step: u64, log: &mut TrainingLog| -> Result<()> {
        let counts = evaluate(model, val, seg, counter, &thresholds)?;
        let mean = mean_f1(&counts);
        log.snapshots.push(Snapshot { step, per_intent: counts.0.iter().map(prf1).collect(), mean_f1: mean });
        if best.as_ref().is_none_or(|(b, _)| mean >= *b) {
            best = Some((mean, model.clone()));
            log.best_step = step;
        }
        Ok(())
    };

    let mut step = 0u64;
    for epoch in 0..cfg.epochs {
        let order = rng.permutation(base.len());
        for batch_idx in order.chunks(cfg.batch_size) {
            let mut batch: Vec<Sample> = batch_idx.iter().map(|&i| base[i].sample.clone()).collect();
            let mut convs: Vec<usize> = Vec::with_capacity(batch_idx.len());
            for &i in batch_idx {
                if !convs.contains(&base[i].conv) {
                    convs.push(base[i].conv);
                }
            }
            let conv_refs: Vec<&Conversation> = convs.iter().map(|&ci| &train[ci]).collect();
            let augmented = plan_batch_augmentation(&conv_refs, &cfg.window, &mut rng)?;
            for seg_ in &augmented {
                let conv =
                    conv_refs.iter().find(|c| c.id == seg_.conversation_id).expect("segment comes from the batch");
                let text = render_model_input(conv, seg_.range, &seg.separator)?;
                batch.push(Sample { features: model.featurize(&text), labels: seg_.labels.clone() });
            }

            let loss = model.objective(&batch, cfg.l2);
            let grad = model.gradient(&batch, cfg.l2);
            model.apply(&grad, cfg.learning_rate);
            step += 1;
            log.steps.push(StepRecord {
                step,
                epoch,
                base_samples: batch_idx.len(),
                augmented_samples: augmented.len(),
                loss,
            });
            if step.is_multiple_of(cfg.eval_every as u64) {
                snapshot(&model, step, &mut log)?;
            }
        }
        log.epoch_objective.push(model.objective(&all_base, cfg.l2));
    }
    if log.snapshots.last().is_none_or(|s| s.step != step) {
        snapshot(&model, step, &mut log)?;
    }
    let (_, model) = best.expect("at least one snapshot");
    Ok(TrainOutcome { model, log })
}
