use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::{gradients, loss_terms, LossWeights, TrainError, TrainingTriple};
use crate::corpus::Vocabulary;
use crate::model::{Model, ModelParams};
use crate::seed;

/// Largest relative error found, overall and per tensor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub worst_tensor: String,
    pub worst_index: usize,
    pub checked: usize,
    pub per_tensor: Vec<(String, usize, f64)>,
}

/// `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// How many scalars to sample from each tensor so that every tensor is
/// represented and the total reaches `min_total` (or everything).
fn quotas(sizes: &[usize], min_total: usize) -> Vec<usize> {
    let mut q: Vec<usize> = sizes.iter().map(|&s| s.min(1)).collect();
    let mut total: usize = q.iter().sum();
    while total < min_total {
        let mut grew = false;
        for (qi, &s) in q.iter_mut().zip(sizes) {
            if total >= min_total {
                break;
            }
            if *qi < s {
                *qi += 1;
                total += 1;
                grew = true;
            }
        }
        if !grew {
            break;
        }
    }
    q
}

/// Compares `analytic` against central differences of the objective on a
/// seeded sample of at least `min_scalars` parameters covering every tensor.
///
/// `loss` returns the objective as a list of terms. Differencing term by term
/// before summing keeps the cancellation error proportional to the terms
/// rather than to the whole objective.
pub fn check_gradients(
    params: &ModelParams<f64>,
    analytic: &ModelParams<f64>,
    loss: impl Fn(&ModelParams<f64>) -> Vec<f64>,
    epsilon: f64,
    min_scalars: usize,
    seed: u64,
) -> GradCheckReport {
    let sizes: Vec<usize> = params.tensors().iter().map(|(_, t)| t.len()).collect();
    let quota = quotas(&sizes, min_scalars);
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst_tensor: String::new(),
        worst_index: 0,
        checked: 0,
        per_tensor: Vec::new(),
    };
    let mut probe = params.clone();
    for (ti, (name, t)) in params.tensors().into_iter().enumerate() {
        let mut rng = seed::rng(seed, name, 0);
        let mut picks = sample(&mut rng, t.len(), quota[ti]).into_vec();
        picks.sort_unstable();
        let mut worst = 0.0f64;
        for &k in &picks {
            let orig = t.data()[k];
            probe.tensor_mut(name).expect("known tensor").data_mut()[k] = orig + epsilon;
            let up = loss(&probe);
            probe.tensor_mut(name).expect("known tensor").data_mut()[k] = orig - epsilon;
            let down = loss(&probe);
            probe.tensor_mut(name).expect("known tensor").data_mut()[k] = orig;
            let numeric = up.iter().zip(&down).map(|(u, d)| u - d).sum::<f64>() / (2.0 * epsilon);
            let a = analytic.tensor(name).expect("known tensor").data()[k];
            let err = relative_error(a, numeric);
            if err > report.max_relative_error || report.worst_tensor.is_empty() {
                report.max_relative_error = err;
                report.worst_tensor = name.to_string();
                report.worst_index = k;
            }
            worst = worst.max(err);
        }
        report.checked += picks.len();
        report.per_tensor.push((name.to_string(), picks.len(), worst));
    }
    report
}

/// Parameter scale used by [`gradcheck_model`].
pub const GRADCHECK_INIT_SCALE: f64 = 3.0;

/// A 64-bit model for gradient checking. The usual initialization is scaled
/// up so that attention and recurrent gradients stand well above the
/// roundoff of central differences.
pub fn gradcheck_model(vocab: Vocabulary, embed_dim: usize, hidden_dim: usize, seed: u64) -> Model<f64> {
    let mut m = Model::init(vocab, embed_dim, hidden_dim, seed);
    m.params.scale(GRADCHECK_INIT_SCALE);
    m
}

/// Gradient check of the full training objective on one triple.
pub fn gradient_check(
    model: &Model<f64>,
    triple: &TrainingTriple,
    weights: &LossWeights,
    epsilon: f64,
    min_scalars: usize,
    seed: u64,
) -> Result<GradCheckReport, TrainError> {
    let (_, analytic) = gradients(model, triple, weights)?;
    // the loss closure must be `Fn`; a RefCell holds the perturbed model
    let cell = std::cell::RefCell::new(model.clone());
    let loss = |p: &ModelParams<f64>| {
        let mut m = cell.borrow_mut();
        m.params.clone_from(p);
        loss_terms(&*m, triple, weights).unwrap_or_else(|_| vec![f64::NAN])
    };
    Ok(check_gradients(&model.params, &analytic, loss, epsilon, min_scalars, seed))
}
