//! Loss builders. Each one composes primitive graph ops so gradients flow to
//! whatever produced the logits; targets enter as constants.

use super::graph::{Graph, Var};
use super::scalar::Scalar;
use super::AdError;

/// Guard added inside logs of probabilities so one-hot rows stay finite.
pub const LOG_EPS: f64 = 1e-12;

const NORMALIZATION_TOLERANCE: f64 = 1e-6;

fn check_rows_normalized<F: Scalar>(values: &[F], width: usize) -> Result<(), AdError> {
    for (row, chunk) in values.chunks(width).enumerate() {
        let sum: f64 = chunk.iter().map(|v| v.to_f64()).sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(AdError::NotNormalized { row, sum });
        }
    }
    Ok(())
}

/// Mean over rows of `-sum(target * log_softmax(logits))`. `targets` is a
/// per-row distribution laid out like `logits`.
pub fn cross_entropy<F: Scalar>(
    g: &mut Graph<F>,
    logits: Var,
    targets: &[F],
) -> Result<Var, AdError> {
    let rows = per_row_cross_entropy(g, logits, targets)?;
    Ok(g.mean(rows))
}

/// Per-row cross entropy, `[rows]`-shaped, for callers that mask or weight
/// rows before reducing.
pub fn per_row_cross_entropy<F: Scalar>(
    g: &mut Graph<F>,
    logits: Var,
    targets: &[F],
) -> Result<Var, AdError> {
    let shape = g.shape(logits).to_vec();
    let width = *shape.last().ok_or_else(|| AdError::BadShape("rank-0 logits".into()))?;
    if targets.len() != g.numel(logits) {
        return Err(AdError::BadShape(format!(
            "targets length {} vs logits {:?}",
            targets.len(),
            shape
        )));
    }
    check_rows_normalized(targets, width)?;
    let t = g.constant(shape, targets.to_vec())?;
    let ls = g.log_softmax(logits);
    let prod = g.mul(t, ls)?;
    let row_sums = g.sum_last(prod);
    Ok(g.neg(row_sums))
}

/// Cross entropy averaged over rows where `mask` is true. `None` when no row
/// is valid (the caller then drops the term).
pub fn masked_cross_entropy<F: Scalar>(
    g: &mut Graph<F>,
    logits: Var,
    targets: &[F],
    mask: &[bool],
) -> Result<Option<Var>, AdError> {
    let count = mask.iter().filter(|&&m| m).count();
    if count == 0 {
        return Ok(None);
    }
    let rows = per_row_cross_entropy(g, logits, targets)?;
    if mask.len() != g.numel(rows) {
        return Err(AdError::BadShape("mask length".into()));
    }
    let weights: Vec<F> = mask
        .iter()
        .map(|&m| if m { F::ONE } else { F::ZERO })
        .collect();
    let w = g.constant(vec![mask.len()], weights)?;
    let picked = g.mul(rows, w)?;
    let total = g.sum(picked);
    Ok(Some(g.mul_scalar(total, F::from_f64(1.0 / count as f64))))
}

/// Shannon entropy of one distribution: `-sum(p * log p)` with `0 log 0 = 0`.
pub fn entropy<F: Scalar>(g: &mut Graph<F>, probabilities: Var) -> Result<Var, AdError> {
    let rows = entropy_rows(g, probabilities)?;
    Ok(g.sum(rows))
}

/// Per-row entropies of a `[.., classes]` batch of distributions.
pub fn entropy_rows<F: Scalar>(g: &mut Graph<F>, probabilities: Var) -> Result<Var, AdError> {
    let width = *g
        .shape(probabilities)
        .last()
        .ok_or_else(|| AdError::BadShape("rank-0 probabilities".into()))?;
    if let Some(bad) = g.values(probabilities).iter().find(|v| **v < F::ZERO) {
        return Err(AdError::NegativeProbability(bad.to_f64()));
    }
    check_rows_normalized(g.values(probabilities), width)?;
    let shifted = g.add_scalar(probabilities, F::from_f64(LOG_EPS));
    let lg = g.log(shifted)?;
    let plogp = g.mul(probabilities, lg)?;
    let row_sums = g.sum_last(plogp);
    Ok(g.neg(row_sums))
}

/// Cross entropy against `(1 - epsilon) * gold + epsilon * prior`. A missing
/// prior means uniform.
pub fn label_smoothing_loss<F: Scalar>(
    g: &mut Graph<F>,
    logits: Var,
    gold: &[F],
    epsilon: f64,
    prior: Option<&[F]>,
) -> Result<Var, AdError> {
    let smoothed = smooth_targets(gold, g.shape(logits), epsilon, prior)?;
    cross_entropy(g, logits, &smoothed)
}

/// The smoothed target distribution used by [`label_smoothing_loss`].
pub fn smooth_targets<F: Scalar>(
    gold: &[F],
    logits_shape: &[usize],
    epsilon: f64,
    prior: Option<&[F]>,
) -> Result<Vec<F>, AdError> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(AdError::Invalid(format!(
            "label smoothing epsilon {epsilon} outside [0, 1]"
        )));
    }
    let width = *logits_shape.last().unwrap();
    if let Some(p) = prior {
        if p.len() != width {
            return Err(AdError::BadShape("prior width".into()));
        }
    }
    let uniform = F::from_f64(1.0 / width as f64);
    let smoothed = gold
        .iter()
        .enumerate()
        .map(|(i, &gv)| {
            let pv = prior.map_or(uniform, |p| p[i % width]);
            F::from_f64((1.0 - epsilon) * gv.to_f64() + epsilon * pv.to_f64())
        })
        .collect();
    Ok(smoothed)
}

/// The appendix-form confidence regularizer
/// `lambda * max(sum_arg H(p_arg) - gamma, 0)`, batch-averaged. Every
/// distribution tensor must share the same row count.
pub fn threshold_entropy_penalty<F: Scalar>(
    g: &mut Graph<F>,
    arg_distributions: &[Var],
    lambda: f64,
    gamma: f64,
) -> Result<Var, AdError> {
    if lambda < 0.0 || gamma < 0.0 {
        return Err(AdError::Invalid(format!(
            "threshold entropy penalty needs lambda >= 0 and gamma >= 0, got {lambda}, {gamma}"
        )));
    }
    if lambda == 0.0 || arg_distributions.is_empty() {
        return Ok(g.scalar(F::ZERO));
    }
    let mut total: Option<Var> = None;
    for &dist in arg_distributions {
        let h = entropy_rows(g, dist)?;
        total = Some(match total {
            Some(t) => g.add(t, h)?,
            None => h,
        });
    }
    let total = total.unwrap();
    let over = g.add_scalar(total, F::from_f64(-gamma));
    let clipped = g.relu(over);
    let mean = g.mean(clipped);
    Ok(g.mul_scalar(mean, F::from_f64(lambda)))
}

/// The negative-entropy form of the confidence regularizer: minimizing it
/// maximizes entropy. Weight is applied inside.
pub fn negative_entropy_loss<F: Scalar>(
    g: &mut Graph<F>,
    arg_distributions: &[Var],
    weight: f64,
) -> Result<Var, AdError> {
    if arg_distributions.is_empty() || weight == 0.0 {
        return Ok(g.scalar(F::ZERO));
    }
    let mut total: Option<Var> = None;
    for &dist in arg_distributions {
        let h = entropy_rows(g, dist)?;
        total = Some(match total {
            Some(t) => g.add(t, h)?,
            None => h,
        });
    }
    let mean = g.mean(total.unwrap());
    let neg = g.neg(mean);
    Ok(g.mul_scalar(neg, F::from_f64(weight)))
}

/// Mean squared error between predictions and constant targets.
pub fn squared_error<F: Scalar>(
    g: &mut Graph<F>,
    predictions: Var,
    targets: &[F],
) -> Result<Var, AdError> {
    if targets.len() != g.numel(predictions) {
        return Err(AdError::BadShape("squared error target length".into()));
    }
    let t = g.constant(g.shape(predictions).to_vec(), targets.to_vec())?;
    let diff = g.sub(predictions, t)?;
    let sq = g.square(diff);
    Ok(g.mean(sq))
}
