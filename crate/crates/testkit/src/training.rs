use fsearch_core::augment::{augment_view, AugmentConfig};
use fsearch_core::encoder::{embed_corpus, encode, EncodeMode, ModelParams};
use fsearch_core::formula_ir::{opt_to_opg, parse_formula, FormulaRecord, OpgGraph};
use fsearch_core::retrieval::{stage1_topk, VectorIndex};
use fsearch_core::train::{batch_loss, train, ModelConfig, TrainConfig, Trainer};

use crate::rng;

pub fn desk_model() -> ModelConfig {
    ModelConfig {
        dim: 32,
        layers: 2,
        min_frequency: 2,
        ..ModelConfig::default()
    }
}

pub fn desk_train(seed: u64) -> TrainConfig {
    TrainConfig {
        epochs: 10,
        batch_size: 64,
        learning_rate: 3e-3,
        seed,
        ..TrainConfig::default()
    }
}

/// Outcome of one seeded desk training run with every fifth formula held out.
#[derive(Debug, Clone)]
pub struct DeskRun {
    pub seed: u64,
    /// Contrastive loss on held-out view batches before and after training.
    pub initial_loss: f64,
    pub final_loss: f64,
    /// Last epoch's mean training loss.
    pub last_epoch_loss: f64,
    /// Augmented held-out view retrieves its source formula (or an
    /// identical copy of it) at rank 1, structure only.
    pub recall_at_1: f64,
    /// Mean cosine of held-out view pairs minus mean cosine of distinct
    /// formulas, on pooled vectors.
    pub alignment_gap: f64,
    pub view_cos: f64,
    pub random_cos: f64,
}

fn unit(mut v: Vec<f32>) -> Vec<f32> {
    let n = v.iter().map(|x| x * x).sum::<f32>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    v
}

fn cos(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x * y) as f64).sum()
}

fn held_out_loss(params: &ModelParams<f32>, views: &[OpgGraph]) -> f64 {
    let batches: Vec<f64> = views
        .chunks(128)
        .filter(|c| c.len() >= 4)
        .map(|c| batch_loss(params, c, 0.2).expect("finite loss") as f64)
        .collect();
    batches.iter().sum::<f64>() / batches.len() as f64
}

pub fn desk_run(records: &[FormulaRecord], seed: u64) -> DeskRun {
    desk_run_with(records, desk_train(seed))
}

pub fn desk_run_with(records: &[FormulaRecord], cfg: TrainConfig) -> DeskRun {
    let seed = cfg.seed;
    let graphs: Vec<OpgGraph> = records
        .iter()
        .map(|r| opt_to_opg(&parse_formula(&r.source_text).expect("corpus parses")))
        .collect();
    let held: Vec<usize> = (0..graphs.len()).step_by(5).collect();
    let train_set: Vec<OpgGraph> = (0..graphs.len()).filter(|i| i % 5 != 0).map(|i| graphs[i].clone()).collect();

    // Views the model never trains on: held-out formulas, separate stream.
    let aug = AugmentConfig::default();
    let mut r = rng(0x5eed_0000 ^ seed);
    let pairs: Vec<(OpgGraph, OpgGraph)> = held
        .iter()
        .map(|&i| (augment_view(&graphs[i], &aug, &mut r).graph, augment_view(&graphs[i], &aug, &mut r).graph))
        .collect();
    let flat: Vec<OpgGraph> = pairs.iter().flat_map(|(a, b)| [a.clone(), b.clone()]).collect();

    let model = desk_model();
    let train_aug = AugmentConfig { rng_seed: seed, ..aug };
    // The trainer initialises from the same vocabulary and seed.
    let fresh = Trainer::<f32>::new(&train_set, &model, train_aug, cfg).expect("trainer");
    let initial_loss = held_out_loss(fresh.params(), &flat);
    let outcome = train::<f32, _>(&train_set, &model, train_aug, cfg, |_, _| Ok(())).expect("training succeeds");
    let params = outcome.params;
    let final_loss = held_out_loss(&params, &flat);

    let corpus: Vec<(String, OpgGraph)> = records.iter().map(|r| r.formula_id.clone()).zip(graphs.iter().cloned()).collect();
    let m = embed_corpus(&corpus, &params).expect("embedding");
    let posts = records.iter().map(|r| r.post_id.clone()).collect();
    let index = VectorIndex::from_embeddings(m, posts).expect("index");

    let h = |g: &OpgGraph| unit(encode(g, &params, EncodeMode::Inference).expect("encode").h);
    let mut hits = 0usize;
    let mut pos = 0.0;
    let mut neg = 0.0;
    for (k, (&i, (a, b))) in held.iter().zip(&pairs).enumerate() {
        let (ha, hb) = (h(a), h(b));
        let top = stage1_topk(&ha, &index, 1).expect("search")[0].0;
        if records[top].source_text == records[i].source_text {
            hits += 1;
        }
        pos += cos(&ha, &hb);
        let other = held[(k + held.len() / 2) % held.len()];
        neg += cos(index.row(i), index.row(other));
    }
    let n = held.len() as f64;
    DeskRun {
        seed,
        initial_loss,
        final_loss,
        last_epoch_loss: outcome.log.last().map_or(f64::NAN, |e| e.mean_loss),
        recall_at_1: hits as f64 / n,
        alignment_gap: pos / n - neg / n,
        view_cos: pos / n,
        random_cos: neg / n,
    }
}
