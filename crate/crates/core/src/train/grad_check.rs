//! Central finite differences against [`batch_gradients`].

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::batch::{batch_gradients, batch_loss};
use super::TrainError;
use crate::encoder::gin::forward;
use crate::encoder::{ModelParams, Weights};
use crate::formula_ir::OpgGraph;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckConfig {
    pub samples: usize,
    pub step: f64,
    pub tolerance: f64,
    /// Coordinates that put any ReLU input within this distance of zero
    /// (or flip one between `θ−h` and `θ+h`) are skipped.
    pub kink: f64,
    /// Lower bound on the relative-error denominator.
    pub floor: f64,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            samples: 200,
            step: 1e-5,
            tolerance: 1e-4,
            kink: 1e-7,
            floor: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoordCheck {
    pub tensor: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub checked: Vec<CoordCheck>,
    pub skipped_kinks: usize,
    pub max_rel_error: f64,
    pub passed: bool,
}

impl GradCheckReport {
    pub fn failures(&self, tolerance: f64) -> impl Iterator<Item = &CoordCheck> {
        self.checked.iter().filter(move |c| !(c.rel_error < tolerance))
    }
}

/// Checks the analytic gradient of `views` at `params`.
pub fn grad_check(
    params: &ModelParams<f64>,
    views: &[OpgGraph],
    tau: f64,
    cfg: &GradCheckConfig,
) -> Result<GradCheckReport, TrainError> {
    let analytic = batch_gradients(params, views, tau)?.grads;
    grad_check_against(params, views, tau, &analytic, cfg)
}

/// Same as [`grad_check`], but against caller-supplied gradients. Handing in
/// a corrupted copy is the negative control.
pub fn grad_check_against(
    params: &ModelParams<f64>,
    views: &[OpgGraph],
    tau: f64,
    analytic: &Weights<f64>,
    cfg: &GradCheckConfig,
) -> Result<GradCheckReport, TrainError> {
    let names = params.weights.tensor_names();
    let d = params.dim();
    let mut used_rows = vec![false; params.vocab.len()];
    for g in views {
        for l in g.labels() {
            used_rows[params.vocab.resolve(l)] = true;
        }
    }
    // Embedding rows outside the batch have an identically zero gradient,
    // so they would only pad the sample.
    let mut candidates: Vec<(usize, usize)> = Vec::new();
    for (t, tensor) in params.weights.tensors().iter().enumerate() {
        for i in 0..tensor.len() {
            if t == 0 && !used_rows[i / d] {
                continue;
            }
            candidates.push((t, i));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    candidates.shuffle(&mut rng);

    let analytic_t = analytic.tensors();
    let mut checked = Vec::new();
    let mut skipped = 0;
    let mut work = params.clone();
    for (t, i) in candidates {
        if checked.len() >= cfg.samples {
            break;
        }
        let base = params.weights.tensors()[t][i];
        work.weights.tensors_mut()[t][i] = base + cfg.step;
        let plus_pattern = relu_pattern(&work, views, cfg.kink);
        let lp = batch_loss(&work, views, tau)?;
        work.weights.tensors_mut()[t][i] = base - cfg.step;
        let minus_pattern = relu_pattern(&work, views, cfg.kink);
        let lm = batch_loss(&work, views, tau)?;
        work.weights.tensors_mut()[t][i] = base;
        let centre_pattern = relu_pattern(&work, views, cfg.kink);
        let near_kink = [&plus_pattern, &minus_pattern, &centre_pattern].iter().any(|p| p.1);
        if near_kink || plus_pattern.0 != minus_pattern.0 {
            skipped += 1;
            continue;
        }
        let numeric = (lp - lm) / (2.0 * cfg.step);
        let a = analytic_t[t][i];
        let denom = a.abs().max(numeric.abs()).max(cfg.floor);
        checked.push(CoordCheck {
            tensor: names[t].clone(),
            index: i,
            analytic: a,
            numeric,
            rel_error: (a - numeric).abs() / denom,
        });
    }
    let max_rel_error = checked.iter().map(|c| c.rel_error).fold(0.0, f64::max);
    let passed = checked.len() >= cfg.samples && checked.iter().all(|c| c.rel_error < cfg.tolerance);
    Ok(GradCheckReport {
        checked,
        skipped_kinks: skipped,
        max_rel_error,
        passed,
    })
}

/// Sign pattern of every ReLU input, plus whether any sits within `kink` of 0.
fn relu_pattern(params: &ModelParams<f64>, views: &[OpgGraph], kink: f64) -> (Vec<bool>, bool) {
    let mut signs = Vec::new();
    let mut near = false;
    for g in views {
        let tape = forward(g, params, true);
        for x in tape.relu_inputs() {
            near |= x.abs() < kink;
            signs.push(x > 0.0);
        }
    }
    (signs, near)
}
