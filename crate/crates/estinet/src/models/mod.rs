//! Concrete task models: extractor + estimator wiring for each experiment.
//! Every model implements [`crate::framework::EstiNetTask`]; the end-to-end
//! baselines reuse the same structures under the `EndToEnd` procedure.

pub mod image_addition;
pub mod image_lookup;
pub mod text_logic;
pub mod tll;

pub use image_addition::ImageAdditionModel;
pub use image_lookup::ImageLookupModel;
pub use text_logic::TextLogicModel;
pub use tll::{TllModel, TllModelConfig};

use crate::autodiff::graph::{Graph, Var};
use crate::autodiff::loss;
use crate::autodiff::AdError;

pub(crate) fn one_hot(index: usize, classes: usize) -> Vec<f32> {
    let mut v = vec![0.0; classes];
    v[index] = 1.0;
    v
}

pub(crate) fn argmax(row: &[f32]) -> usize {
    crate::blackbox::adapt_hard(row)
}

/// Inverse-CDF draw from a distribution given as probabilities.
pub(crate) fn sample_index(dist: &[f32], rng: &mut rand_chacha::ChaCha8Rng) -> usize {
    use rand::Rng;
    let total: f32 = dist.iter().sum();
    let mut u: f32 = rng.random_range(0.0..total.max(f32::EPSILON));
    for (i, &p) in dist.iter().enumerate() {
        u -= p;
        if u <= 0.0 {
            return i;
        }
    }
    dist.len() - 1
}

/// Mean squared error over rows where `mask` holds, `None` if none do.
pub(crate) fn masked_squared_error(
    g: &mut Graph<f32>,
    predictions: Var,
    targets: &[f32],
    mask: &[bool],
) -> Result<Option<Var>, AdError> {
    let count = mask.iter().filter(|&&m| m).count();
    if count == 0 {
        return Ok(None);
    }
    let t = g.constant(g.shape(predictions).to_vec(), targets.to_vec())?;
    let diff = g.sub(predictions, t)?;
    let sq = g.square(diff);
    let weights: Vec<f32> = mask.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect();
    let w = g.constant(vec![weights.len()], weights)?;
    let picked = g.mul(sq, w)?;
    let total = g.sum(picked);
    Ok(Some(g.mul_scalar(total, 1.0 / count as f32)))
}

/// Mean entropy of the softmax of logit rows, computed on values.
pub(crate) fn mean_row_entropy(logits: &[f32], width: usize) -> f64 {
    let rows = logits.len() / width;
    if rows == 0 {
        return 0.0;
    }
    let mut total = 0.0f64;
    for row in logits.chunks(width) {
        let mx = row.iter().cloned().fold(f32::MIN, f32::max);
        let exps: Vec<f64> = row.iter().map(|&v| ((v - mx) as f64).exp()).collect();
        let z: f64 = exps.iter().sum();
        for e in exps {
            let p = e / z;
            total -= p * (p + loss::LOG_EPS).ln();
        }
    }
    total / rows as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entropy_of_uniform_logit_rows_is_ln_width() {
        let h = mean_row_entropy(&[0.0; 20], 10);
        assert!((h - (10.0f64).ln()).abs() < 1e-6);
    }

    #[test]
    fn masked_squared_error_averages_selected_rows() {
        let mut g = Graph::<f32>::new();
        let p = g.constant(vec![3], vec![1.0, 2.0, 3.0]).unwrap();
        let t = [1.0f32, 0.0, 0.0];
        let err = masked_squared_error(&mut g, p, &t, &[false, true, true])
            .unwrap()
            .unwrap();
        assert!((g.values(err)[0] - (4.0 + 9.0) / 2.0).abs() < 1e-6);
        assert!(masked_squared_error(&mut g, p, &t, &[false; 3]).unwrap().is_none());
    }
}
