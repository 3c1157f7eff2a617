//! Per-sentence training with on-the-fly oracle supervision.
//!
//! The oracle fixes the transition path and targets for a sentence before
//! any scoring: under the standard oracle the path is static and targets
//! are one-hot; under the hybrid oracle the targets put uniform mass on
//! every correct transition, and with exploration enabled the applied
//! transition is drawn at random among them, so paths vary across epochs.
//! Each sentence is one optimizer step (mini-batch of one), losses summed
//! over its steps.
//!
//! All randomness flows from per-epoch ChaCha streams derived from the run
//! seed, so a (data, config, seed) triple reproduces losses and parameters
//! bit for bit, and training can resume from a checkpoint mid-run.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluator::{decode_gold_trees, score, PunctSet};
use crate::neural::{
    encode_traced_train, feature_slots, forward_backward, kind_index, Adam, ModelDims, ModelParams,
    Real, StepSupervision, TargetDistribution, Vocab,
};
use crate::oracle::{hybrid_correct_set, hybrid_oracle_with, standard_oracle, OracleError};
use crate::transition::{Configuration, Transition, TransitionError};
use crate::treebank::GoldTree;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleKind {
    Standard,
    Hybrid,
}

impl std::fmt::Display for OracleKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            OracleKind::Standard => write!(f, "standard"),
            OracleKind::Hybrid => write!(f, "hybrid"),
        }
    }
}

impl std::str::FromStr for OracleKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "standard" => Ok(OracleKind::Standard),
            "hybrid" => Ok(OracleKind::Hybrid),
            other => Err(format!(
                "unknown oracle `{other}` (expected standard or hybrid)"
            )),
        }
    }
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("training set has no projective sentences")]
    EmptyTrainingSet,
    #[error("non-projective sentence cannot be used for oracle training")]
    NonProjective,
    #[error("non-finite gradient in parameter block {block}")]
    NonFiniteGradient { block: &'static str },
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Transition(#[from] TransitionError),
}

/// Training hyperparameters. Defaults mirror the experimental setup:
/// 20 epochs, mini-batch of one sentence, dropout 0.5, tie-break
/// probability 0.5, best-dev-UAS epoch selection.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub oracle: OracleKind,
    /// Draw the applied transition at random from the correct set
    /// (hybrid oracle only); without it the static larc-first path is
    /// followed while targets stay soft.
    pub explore: bool,
    /// Probability of choosing shift at a two-way ambiguity.
    pub p_shift: f64,
    pub epochs: usize,
    pub seed: u64,
    pub dropout: f64,
    pub dims: ModelDims,
    pub punct: PunctSet,
    /// Worker count for dev-set decoding between epochs.
    pub threads: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            oracle: OracleKind::Standard,
            explore: false,
            p_shift: 0.5,
            epochs: 20,
            seed: 1,
            dropout: 0.5,
            dims: ModelDims::default(),
            punct: PunctSet::empty(),
            threads: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.explore && self.oracle != OracleKind::Hybrid {
            return Err(TrainError::InvalidConfig(
                "--explore requires the hybrid oracle".into(),
            ));
        }
        if self.epochs < 1 {
            return Err(TrainError::InvalidConfig(
                "epochs must be at least 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.p_shift) {
            return Err(TrainError::InvalidConfig(
                "p-shift must lie in [0, 1]".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(TrainError::InvalidConfig(
                "dropout must lie in [0, 1)".into(),
            ));
        }
        Ok(())
    }
}

/// One epoch's record, emitted as a JSON line by the CLI.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Mean per-sentence loss (each sentence's loss is summed over steps).
    pub train_loss: f64,
    pub dev_uas: f64,
    pub dev_las: f64,
    pub dev_uem: f64,
    pub wall_s: f64,
}

/// The oracle walk over one sentence: per-step supervision in parser
/// order, the applied transitions, and how many steps had a two-element
/// correct set.
pub struct OraclePath<F> {
    pub steps: Vec<StepSupervision<F>>,
    pub transitions: Vec<Transition>,
    pub multi_label_steps: usize,
}

/// Generate the training path and targets for one projective sentence.
pub fn oracle_path<F: Real, R: Rng>(
    tree: &GoldTree,
    vocab: &Vocab,
    config: &TrainConfig,
    rng: &mut R,
) -> Result<OraclePath<F>, TrainError> {
    if !tree.is_projective() {
        return Err(TrainError::NonProjective);
    }
    let mut c = Configuration::initial_for(tree);
    let mut steps = Vec::with_capacity(2 * (tree.len() + 1) - 1);
    let mut transitions = Vec::with_capacity(steps.capacity());
    let mut multi = 0usize;
    while !c.is_terminal() {
        let (chosen, correct_set) = match (config.oracle, config.explore) {
            (OracleKind::Standard, _) => {
                let t = standard_oracle(&c, tree)?;
                (t.clone(), vec![t])
            }
            (OracleKind::Hybrid, true) => {
                let out = hybrid_oracle_with(&c, tree, rng, config.p_shift)?;
                (out.chosen, out.correct_set)
            }
            (OracleKind::Hybrid, false) => {
                // Soft targets on the static larc-preferred path.
                let ct = hybrid_correct_set(&c, tree)?;
                let chosen = ct
                    .iter()
                    .find(|t| matches!(t, Transition::LeftArc(_)))
                    .unwrap_or(&ct[0])
                    .clone();
                (chosen, ct)
            }
        };
        if correct_set.len() > 1 {
            multi += 1;
        }
        let support: Vec<usize> = correct_set.iter().map(|t| kind_index(t.kind())).collect();
        let label_target = chosen.label().map(|l| {
            vocab
                .label_id(l)
                .expect("gold labels are in the vocabulary")
        });
        steps.push(StepSupervision {
            slots: feature_slots(&c),
            kind_target: TargetDistribution::uniform(&support, 3),
            label_target,
        });
        c = c.apply(&chosen)?;
        transitions.push(chosen);
    }
    debug_assert!(c
        .arcs()
        .iter()
        .all(|a| tree.head_of(a.dependent) == a.head && tree.label_of(a.dependent) == a.label));
    Ok(OraclePath {
        steps,
        transitions,
        multi_label_steps: multi,
    })
}

/// Loss and gradients of one sentence without updating parameters: the
/// oracle path is generated, the network run forward, and reverse-mode
/// gradients accumulated into a fresh buffer. Reseeding `rng` replays the
/// identical path, word dropout, and dropout masks.
pub fn sentence_gradients<F: Real, R: Rng>(
    tree: &GoldTree,
    vocab: &Vocab,
    params: &ModelParams<F>,
    config: &TrainConfig,
    rng: &mut R,
) -> Result<(F, ModelParams<F>), TrainError> {
    let word_ids = train_word_ids(tree, vocab, rng);
    let pos_ids: Vec<u32> = tree.tokens().iter().map(|t| vocab.pos_id(&t.pos)).collect();
    let path = oracle_path::<F, R>(tree, vocab, config, rng)?;
    let trace = encode_traced_train(&word_ids, &pos_ids, params, config.dropout, rng);
    let mut grads = params.zeros_like();
    let loss = forward_backward(&trace, &path.steps, params, &mut grads);
    Ok((loss, grads))
}

/// Outcome of one sentence's update.
pub struct SentenceRun {
    /// Loss summed over the sentence's steps.
    pub loss: f64,
    pub transitions: Vec<Transition>,
    pub multi_label_steps: usize,
}

/// Word ids with rare-word dropout: training-frequency-1 words are
/// replaced by the unknown id with probability 0.5 per occurrence.
fn train_word_ids<R: Rng>(tree: &GoldTree, vocab: &Vocab, rng: &mut R) -> Vec<u32> {
    tree.tokens()
        .iter()
        .map(|t| {
            let id = vocab.word_id(&t.form);
            if id != 0 && vocab.is_rare_word(id) && rng.random::<f64>() < 0.5 {
                0
            } else {
                id
            }
        })
        .collect()
}

/// Run one sentence: oracle path, forward, backward, one Adam step.
pub fn train_sentence<F: Real, R: Rng>(
    tree: &GoldTree,
    vocab: &Vocab,
    params: &mut ModelParams<F>,
    grads: &mut ModelParams<F>,
    adam: &mut Adam<F>,
    config: &TrainConfig,
    rng: &mut R,
) -> Result<SentenceRun, TrainError> {
    let word_ids = train_word_ids(tree, vocab, rng);
    let pos_ids: Vec<u32> = tree.tokens().iter().map(|t| vocab.pos_id(&t.pos)).collect();
    let path = oracle_path::<F, R>(tree, vocab, config, rng)?;
    let trace = encode_traced_train(&word_ids, &pos_ids, params, config.dropout, rng);
    grads.fill_zero();
    let loss = forward_backward(&trace, &path.steps, params, grads);
    if let Some(block) = grads.non_finite_block() {
        return Err(TrainError::NonFiniteGradient { block });
    }
    adam.step(params, grads);
    Ok(SentenceRun {
        loss: loss.into_f64(),
        transitions: path.transitions,
        multi_label_steps: path.multi_label_steps,
    })
}

/// A resumable training state, as stored in the model container.
pub struct Checkpoint<F> {
    pub params: ModelParams<F>,
    pub adam: Adam<F>,
    pub vocab: Vocab,
}

pub struct TrainOutput<F> {
    /// Parameters from the epoch with the best dev UAS (earliest on ties).
    pub params: ModelParams<F>,
    /// Parameters after the final epoch, with optimizer state, for resuming.
    pub last: Checkpoint<F>,
    pub vocab: Vocab,
    pub metrics: Vec<EpochMetrics>,
    pub best_epoch: usize,
    pub skipped_nonprojective: usize,
}

/// Per-epoch RNG stream: every epoch draws from an independent ChaCha
/// stream of the run seed, so resuming after epoch k replays epochs k+1..
/// exactly.
fn epoch_rng(seed: u64, epoch: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64);
    rng
}

pub fn train<F: Real>(
    train_trees: &[GoldTree],
    dev_trees: &[GoldTree],
    config: &TrainConfig,
) -> Result<TrainOutput<F>, TrainError> {
    train_from(train_trees, dev_trees, config, None, 0)
}

/// Train epochs `completed_epochs + 1 ..= config.epochs`, starting from a
/// checkpoint when given (its vocabulary wins over rebuilding).
pub fn train_from<F: Real>(
    train_trees: &[GoldTree],
    dev_trees: &[GoldTree],
    config: &TrainConfig,
    checkpoint: Option<Checkpoint<F>>,
    completed_epochs: usize,
) -> Result<TrainOutput<F>, TrainError> {
    config.validate()?;
    if completed_epochs >= config.epochs {
        return Err(TrainError::InvalidConfig(format!(
            "nothing to train: {completed_epochs} epochs already completed of {}",
            config.epochs
        )));
    }
    let projective: Vec<&GoldTree> = train_trees.iter().filter(|t| t.is_projective()).collect();
    let skipped = train_trees.len() - projective.len();
    if projective.is_empty() {
        return Err(TrainError::EmptyTrainingSet);
    }
    let (vocab, mut params, mut adam) = match checkpoint {
        Some(cp) => (cp.vocab, cp.params, cp.adam),
        None => {
            let vocab = Vocab::build(projective.iter().copied());
            let mut init_rng = epoch_rng(config.seed, 0);
            let params = ModelParams::init(
                vocab.word_count(),
                vocab.pos_count(),
                vocab.label_count(),
                config.dims,
                &mut init_rng,
            );
            let adam = Adam::new(&params);
            (vocab, params, adam)
        }
    };
    let mut grads = params.zeros_like();
    let mut metrics = Vec::new();
    let mut best: Option<(f64, usize, ModelParams<F>)> = None;
    for epoch in completed_epochs + 1..=config.epochs {
        let started = Instant::now();
        let mut rng = epoch_rng(config.seed, epoch);
        let mut order: Vec<usize> = (0..projective.len()).collect();
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0f64;
        for &idx in &order {
            let run = train_sentence(
                projective[idx],
                &vocab,
                &mut params,
                &mut grads,
                &mut adam,
                config,
                &mut rng,
            )?;
            loss_sum += run.loss;
        }
        let preds = decode_gold_trees(dev_trees, &params, &vocab, config.threads);
        let report = score(dev_trees, &preds, &config.punct).expect("decoded lengths match");
        let m = EpochMetrics {
            epoch,
            train_loss: loss_sum / projective.len() as f64,
            dev_uas: report.uas,
            dev_las: report.las,
            dev_uem: report.uem,
            wall_s: started.elapsed().as_secs_f64(),
        };
        if best.as_ref().is_none_or(|(uas, _, _)| m.dev_uas > *uas) {
            best = Some((m.dev_uas, epoch, params.clone()));
        }
        metrics.push(m);
    }
    let (_, best_epoch, best_params) = best.expect("at least one epoch ran");
    Ok(TrainOutput {
        params: best_params,
        last: Checkpoint {
            params,
            adam,
            vocab: vocab.clone(),
        },
        vocab,
        metrics,
        best_epoch,
        skipped_nonprojective: skipped,
    })
}
