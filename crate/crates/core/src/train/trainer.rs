use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{Adam, AdamConfig};
use super::batch::batch_gradients;
use super::TrainError;
use crate::augment::{attribute_mask, augment_view, substructure_substitute, AugmentConfig, AugmentedView};
use crate::encoder::{HeadOrder, ModelParams, NodeVocab};
use crate::formula_ir::OpgGraph;
use crate::scalar::Scalar;

/// Graphs need more than this many nodes to be used for training.
pub const MIN_TRAIN_NODES_EXCLUSIVE: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub dim: usize,
    pub layers: usize,
    pub min_frequency: usize,
    pub head_order: HeadOrder,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            dim: 400,
            layers: 2,
            min_frequency: NodeVocab::DEFAULT_MIN_FREQUENCY,
            head_order: HeadOrder::default(),
        }
    }
}

/// Which augmentations produce the two views.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugmentMode {
    /// Substructure substitution followed by attribute masking.
    #[default]
    SubstitutionAndMask,
    SubstitutionOnly,
    MaskOnly,
    /// Masking + node dropping + edge perturbation.
    #[cfg(feature = "ablation")]
    MaskNodeEdge,
}

/// Drop / perturb rate used by [`AugmentMode::MaskNodeEdge`].
#[cfg(feature = "ablation")]
pub const ABLATION_RATE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Formulas per batch; each contributes two views.
    pub batch_size: usize,
    pub learning_rate: f64,
    pub temperature: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    pub augment_mode: AugmentMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 25,
            batch_size: 2560,
            learning_rate: 1e-4,
            temperature: 0.2,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
            augment_mode: AugmentMode::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if !(self.temperature > 0.0) {
            return Err(TrainError::Config(format!("temperature must be > 0, got {}", self.temperature)));
        }
        if self.batch_size < 2 {
            return Err(TrainError::Config(format!("batch_size must be >= 2, got {}", self.batch_size)));
        }
        if !(self.learning_rate >= 0.0) {
            return Err(TrainError::Config("learning_rate must be >= 0".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.adam_eps > 0.0) {
            return Err(TrainError::Config("Adam betas must lie in [0, 1) and eps > 0".into()));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.adam_eps,
        }
    }
}

/// Per-batch summary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatchLossReport {
    pub loss: f64,
    pub pos_cos: f64,
    pub neg_cos: f64,
    pub grad_norm: f64,
}

/// Per-epoch summary: means over the epoch's batches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub epoch: usize,
    pub mean_loss: f64,
    pub pos_cos: f64,
    pub neg_cos: f64,
    #[serde(skip)]
    pub grad_norm: f64,
    pub wallclock_s: f64,
    #[serde(skip)]
    pub batches: Vec<BatchLossReport>,
}

impl EpochReport {
    /// One JSON-lines record: `{epoch, mean_loss, pos_cos, neg_cos, wallclock_s}`.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("plain struct serialises")
    }
}

/// Graphs eligible for training (more than two nodes).
pub fn training_view<'a, I>(graphs: I) -> Vec<OpgGraph>
where
    I: IntoIterator<Item = &'a OpgGraph>,
{
    graphs
        .into_iter()
        .filter(|g| g.node_count() > MIN_TRAIN_NODES_EXCLUSIVE)
        .cloned()
        .collect()
}

/// Contrastive trainer over a fixed corpus.
///
/// Determinism: parameter init and epoch shuffles are keyed by
/// `TrainConfig::seed`; the augmentation stream of formula `i` in epoch `e`
/// is keyed by `(AugmentConfig::rng_seed, e, i)`. Gradients are reduced in a
/// fixed order, so results do not depend on the rayon thread count.
pub struct Trainer<T: Scalar> {
    params: ModelParams<T>,
    adam: Adam<T>,
    cfg: TrainConfig,
    aug: AugmentConfig,
    corpus: Vec<OpgGraph>,
    epoch: usize,
}

impl<T: Scalar> Trainer<T> {
    /// Filters the corpus, builds the vocabulary over it and initialises
    /// parameters from `cfg.seed`.
    pub fn new(
        corpus: &[OpgGraph],
        model: &ModelConfig,
        aug: AugmentConfig,
        cfg: TrainConfig,
    ) -> Result<Self, TrainError> {
        let filtered = training_view(corpus);
        if filtered.is_empty() {
            return Err(TrainError::EmptyCorpus);
        }
        let vocab = NodeVocab::build(&filtered, model.min_frequency)?;
        let mut params = ModelParams::init(vocab, model.dim, model.layers, cfg.seed)?;
        params.head_order = model.head_order;
        Self::with_params(params, filtered, aug, cfg)
    }

    /// Continues from existing parameters; `corpus` is used as given.
    pub fn with_params(
        params: ModelParams<T>,
        corpus: Vec<OpgGraph>,
        aug: AugmentConfig,
        cfg: TrainConfig,
    ) -> Result<Self, TrainError> {
        cfg.validate()?;
        aug.validate().map_err(|e| TrainError::Config(e.to_string()))?;
        if corpus.is_empty() {
            return Err(TrainError::EmptyCorpus);
        }
        params.check_shapes()?;
        let adam = Adam::new(cfg.adam(), &params.weights);
        Ok(Trainer {
            params,
            adam,
            cfg,
            aug,
            corpus,
            epoch: 0,
        })
    }

    pub fn params(&self) -> &ModelParams<T> {
        &self.params
    }

    pub fn into_params(self) -> ModelParams<T> {
        self.params
    }

    pub fn corpus(&self) -> &[OpgGraph] {
        &self.corpus
    }

    pub fn epochs_done(&self) -> usize {
        self.epoch
    }

    fn view(&self, g: &OpgGraph, rng: &mut ChaCha8Rng) -> AugmentedView {
        match self.cfg.augment_mode {
            AugmentMode::SubstitutionAndMask => augment_view(g, &self.aug, rng),
            AugmentMode::SubstitutionOnly => substructure_substitute(g, &self.aug, rng),
            AugmentMode::MaskOnly => attribute_mask(g, self.aug.mask_rate, rng),
            #[cfg(feature = "ablation")]
            AugmentMode::MaskNodeEdge => {
                use crate::augment::ablation::{edge_perturb, node_drop};
                let a = attribute_mask(g, self.aug.mask_rate, rng);
                let b = node_drop(&a.graph, ABLATION_RATE, rng);
                edge_perturb(&b.graph, ABLATION_RATE, rng)
            }
        }
    }

    /// The two training views of corpus item `index` in epoch `epoch`.
    pub fn views_for(&self, epoch: usize, index: usize) -> (OpgGraph, OpgGraph) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.aug.rng_seed);
        rng.set_stream(((epoch as u64) << 32) | index as u64);
        let g = &self.corpus[index];
        let a = self.view(g, &mut rng).graph;
        let b = self.view(g, &mut rng).graph;
        (a, b)
    }

    fn epoch_order(&self, epoch: usize) -> Vec<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        rng.set_stream(epoch as u64 + 1);
        let mut order: Vec<usize> = (0..self.corpus.len()).collect();
        order.shuffle(&mut rng);
        order
    }

    /// One Adam step on the given corpus items.
    pub fn step(&mut self, items: &[usize]) -> Result<BatchLossReport, TrainError> {
        let epoch = self.epoch;
        let views: Vec<OpgGraph> = items
            .iter()
            .flat_map(|&i| {
                let (a, b) = self.views_for(epoch, i);
                [a, b]
            })
            .collect();
        let tau = T::of(self.cfg.temperature);
        let out = batch_gradients(&self.params, &views, tau)?;
        let grad_norm = out.grads.l2_norm().to_f64_lossy();
        self.adam.step(&mut self.params.weights, &out.grads);
        if !self.params.weights.all_finite() {
            return Err(TrainError::NonFinite(format!("parameters after step {}", self.adam.steps())));
        }
        Ok(BatchLossReport {
            loss: out.loss.loss.to_f64_lossy(),
            pos_cos: out.loss.pos_cos.to_f64_lossy(),
            neg_cos: out.loss.neg_cos.to_f64_lossy(),
            grad_norm,
        })
    }

    pub fn run_epoch(&mut self) -> Result<EpochReport, TrainError> {
        let start = Instant::now();
        let order = self.epoch_order(self.epoch);
        let mut batches = Vec::new();
        for items in order.chunks(self.cfg.batch_size) {
            // A single leftover formula has no negatives.
            if items.len() < 2 {
                continue;
            }
            batches.push(self.step(items)?);
        }
        self.epoch += 1;
        let mean = |f: fn(&BatchLossReport) -> f64| {
            if batches.is_empty() {
                f64::NAN
            } else {
                batches.iter().map(f).sum::<f64>() / batches.len() as f64
            }
        };
        Ok(EpochReport {
            epoch: self.epoch,
            mean_loss: mean(|b| b.loss),
            pos_cos: mean(|b| b.pos_cos),
            neg_cos: mean(|b| b.neg_cos),
            grad_norm: mean(|b| b.grad_norm),
            wallclock_s: start.elapsed().as_secs_f64(),
            batches,
        })
    }
}

pub struct TrainOutcome<T> {
    pub params: ModelParams<T>,
    pub log: Vec<EpochReport>,
}

/// Full training run. `on_epoch` sees every report and the parameters
/// after that epoch (checkpointing hook); an error from it stops training.
pub fn train<T, F>(
    corpus: &[OpgGraph],
    model: &ModelConfig,
    aug: AugmentConfig,
    cfg: TrainConfig,
    mut on_epoch: F,
) -> Result<TrainOutcome<T>, TrainError>
where
    T: Scalar,
    F: FnMut(&EpochReport, &ModelParams<T>) -> Result<(), TrainError>,
{
    let mut trainer = Trainer::new(corpus, model, aug, cfg)?;
    let mut log = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        let report = trainer.run_epoch()?;
        log::info!(
            "epoch {} loss {:.5} pos {:.4} neg {:.4} ({:.1}s)",
            report.epoch,
            report.mean_loss,
            report.pos_cos,
            report.neg_cos,
            report.wallclock_s
        );
        on_epoch(&report, trainer.params())?;
        log.push(report);
    }
    Ok(TrainOutcome {
        params: trainer.into_params(),
        log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula_ir::{opt_to_opg, parse_formula};
    use crate::synth::{SynthConfig, SynthCorpus};

    fn corpus(n: usize, seed: u64) -> Vec<OpgGraph> {
        SynthCorpus::generate(&SynthConfig {
            formulas: n,
            seed,
            ..Default::default()
        })
        .records
        .iter()
        .map(|r| opt_to_opg(&parse_formula(&r.source_text).unwrap()))
        .collect()
    }

    fn desk_model() -> ModelConfig {
        ModelConfig {
            dim: 32,
            layers: 2,
            min_frequency: 2,
            head_order: HeadOrder::default(),
        }
    }

    fn desk_train(epochs: usize) -> TrainConfig {
        TrainConfig {
            epochs,
            batch_size: 64,
            learning_rate: 1e-3,
            ..Default::default()
        }
    }

    #[test]
    fn loss_goes_down_on_a_small_corpus() {
        let out = train::<f32, _>(&corpus(200, 1), &desk_model(), AugmentConfig::default(), desk_train(10), |_, _| Ok(()))
            .unwrap();
        assert_eq!(out.log.len(), 10);
        let first = out.log[0].mean_loss;
        let last = out.log[9].mean_loss;
        assert!(last < first, "{first} -> {last}");
        assert!(out.log.iter().all(|r| r.mean_loss >= 0.0));
    }

    #[test]
    fn same_seed_same_parameters() {
        let c = corpus(120, 2);
        let run = || {
            train::<f32, _>(&c, &desk_model(), AugmentConfig::default(), desk_train(2), |_, _| Ok(()))
                .unwrap()
                .params
        };
        assert_eq!(run().weights, run().weights);
    }

    #[test]
    fn zero_learning_rate_leaves_parameters_alone() {
        let c = corpus(100, 3);
        let cfg = TrainConfig {
            learning_rate: 0.0,
            ..desk_train(3)
        };
        let mut t = Trainer::<f32>::new(&c, &desk_model(), AugmentConfig::default(), cfg).unwrap();
        let before = t.params().weights.clone();
        for _ in 0..3 {
            t.run_epoch().unwrap();
        }
        assert_eq!(t.params().weights, before);
    }

    #[test]
    fn tiny_graphs_are_filtered_out() {
        let small: Vec<OpgGraph> = ["x", "(neg x)", "(+ x x)"]
            .iter()
            .map(|s| opt_to_opg(&parse_formula(s).unwrap()))
            .collect();
        // `(+ x x)` shares its leaf, so it has two nodes as well.
        assert!(training_view(&small).is_empty());
        let err = Trainer::<f32>::new(&small, &desk_model(), AugmentConfig::default(), desk_train(1));
        assert!(matches!(err, Err(TrainError::EmptyCorpus)));
    }

    #[test]
    fn bad_configs_are_rejected() {
        let c = corpus(50, 4);
        for cfg in [
            TrainConfig { temperature: 0.0, ..desk_train(1) },
            TrainConfig { batch_size: 1, ..desk_train(1) },
        ] {
            assert!(matches!(
                Trainer::<f32>::new(&c, &desk_model(), AugmentConfig::default(), cfg),
                Err(TrainError::Config(_))
            ));
        }
    }

    #[test]
    fn epoch_log_line_has_the_documented_keys() {
        let r = EpochReport {
            epoch: 1,
            mean_loss: 2.5,
            pos_cos: 0.9,
            neg_cos: 0.1,
            grad_norm: 3.0,
            wallclock_s: 0.25,
            batches: Vec::new(),
        };
        let v: serde_json::Value = serde_json::from_str(&r.to_json_line()).unwrap();
        let mut keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
        keys.sort();
        assert_eq!(keys, ["epoch", "mean_loss", "neg_cos", "pos_cos", "wallclock_s"]);
    }
}
