//! Finite-difference validation of every backward rule.
//!
//! The oracle is independent of the backward implementation: it re-runs the
//! forward computation at perturbed inputs and compares central differences
//! against the analytic gradients. Everything here runs in `f64`; the checks
//! are meaningless in single precision.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::graph::{Graph, Var};
use super::tensor::Tensor;
use super::AdError;

pub const STEP: f64 = 1e-5;
pub const MAX_RELATIVE_ERROR: f64 = 1e-4;

type BuildFn = Box<dyn Fn(&mut Graph<f64>, &[Var]) -> Result<Var, AdError> + Send + Sync>;
type GenFn = Box<dyn Fn(&mut ChaCha8Rng) -> Vec<Tensor<f64>> + Send + Sync>;

/// One differentiable computation to verify: an input generator plus a
/// builder applying the op under test.
pub struct Case {
    pub name: String,
    gen: GenFn,
    build: BuildFn,
}

impl Case {
    pub fn new(
        name: &str,
        gen: impl Fn(&mut ChaCha8Rng) -> Vec<Tensor<f64>> + Send + Sync + 'static,
        build: impl Fn(&mut Graph<f64>, &[Var]) -> Result<Var, AdError> + Send + Sync + 'static,
    ) -> Self {
        Case { name: name.to_string(), gen: Box::new(gen), build: Box::new(build) }
    }
}

#[derive(Debug, Clone)]
pub struct CaseReport {
    pub name: String,
    pub max_relative_error: f64,
    pub elements_checked: usize,
    pub passed: bool,
}

#[derive(Debug, Clone)]
pub struct Report {
    pub cases: Vec<CaseReport>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.cases.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&CaseReport> {
        self.cases.iter().filter(|c| !c.passed).collect()
    }
}

/// Scalar projection of the case output through fixed random weights, so
/// every output element influences the loss.
fn projected_loss(case: &Case, inputs: &[Tensor<f64>], weights: &[f64]) -> Result<f64, AdError> {
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.leaf(t)).collect();
    let out = (case.build)(&mut g, &vars)?;
    Ok(g
        .values(out)
        .iter()
        .zip(weights)
        .map(|(&v, &w)| v * w)
        .sum())
}

/// Check one case over `trials` random inputs. `flip_sign` negates the
/// analytic gradient before comparison (used to prove the suite catches an
/// injected sign error).
pub fn check_case(case: &Case, trials: usize, seed: u64, flip_sign: bool) -> Result<CaseReport, AdError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fnv1a(case.name.as_bytes()));
    let mut max_err = 0.0f64;
    let mut checked = 0usize;
    for _ in 0..trials {
        let mut inputs = (case.gen)(&mut rng);
        for t in &mut inputs {
            t.requires_grad = true;
        }
        let mut g = Graph::new();
        let vars: Vec<Var> = inputs.iter().map(|t| g.leaf(t)).collect();
        let out = (case.build)(&mut g, &vars)?;
        let weights: Vec<f64> = (0..g.numel(out)).map(|_| rng.random_range(-1.0..1.0)).collect();
        let w = g.constant(g.shape(out).to_vec(), weights.clone())?;
        let prod = g.mul(out, w)?;
        let loss = g.sum(prod);
        g.backward(loss)?;
        let analytic: Vec<Vec<f64>> = vars.iter().map(|&v| g.grad(v).to_vec()).collect();

        for (ti, tensor) in inputs.clone().iter().enumerate() {
            for ei in 0..tensor.numel() {
                let mut plus = inputs.clone();
                plus[ti].values[ei] += STEP;
                let mut minus = inputs.clone();
                minus[ti].values[ei] -= STEP;
                let f_plus = projected_loss(case, &plus, &weights)?;
                let f_minus = projected_loss(case, &minus, &weights)?;
                let numeric = (f_plus - f_minus) / (2.0 * STEP);
                let mut a = analytic[ti][ei];
                if flip_sign {
                    a = -a;
                }
                let scale = a.abs().max(numeric.abs()).max(1.0);
                let err = (a - numeric).abs() / scale;
                if err > max_err {
                    max_err = err;
                }
                checked += 1;
            }
        }
    }
    Ok(CaseReport {
        name: case.name.clone(),
        max_relative_error: max_err,
        elements_checked: checked,
        passed: max_err < MAX_RELATIVE_ERROR,
    })
}

/// Run a list of cases; `fault` names one case whose analytic gradient is
/// sign-flipped (mutation check).
pub fn run_suite(cases: &[Case], trials: usize, seed: u64, fault: Option<&str>) -> Result<Report, AdError> {
    let mut reports = Vec::new();
    for case in cases {
        let flip = fault == Some(case.name.as_str());
        reports.push(check_case(case, trials, seed, flip)?);
    }
    Ok(Report { cases: reports })
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

pub fn rand_tensor(rng: &mut ChaCha8Rng, shape: Vec<usize>, lo: f64, hi: f64) -> Tensor<f64> {
    let numel = shape.iter().product();
    let values = (0..numel).map(|_| rng.random_range(lo..hi)).collect();
    Tensor { shape, values, requires_grad: false, grad: None }
}

/// Keep elements away from a kink at zero so central differences stay valid.
pub fn rand_tensor_off_zero(rng: &mut ChaCha8Rng, shape: Vec<usize>) -> Tensor<f64> {
    let mut t = rand_tensor(rng, shape, -1.0, 1.0);
    for v in &mut t.values {
        if v.abs() < 0.05 {
            *v += if *v >= 0.0 { 0.1 } else { -0.1 };
        }
    }
    t
}

/// Every primitive op with a backward rule.
pub fn op_cases() -> Vec<Case> {
    let mut cases = Vec::new();
    cases.push(Case::new(
        "matmul",
        |r| vec![rand_tensor(r, vec![3, 4], -1.0, 1.0), rand_tensor(r, vec![4, 2], -1.0, 1.0)],
        |g, v| g.matmul(v[0], v[1]),
    ));
    cases.push(Case::new(
        "add",
        |r| vec![rand_tensor(r, vec![2, 3], -1.0, 1.0), rand_tensor(r, vec![2, 3], -1.0, 1.0)],
        |g, v| g.add(v[0], v[1]),
    ));
    cases.push(Case::new(
        "add_bias",
        |r| vec![rand_tensor(r, vec![3, 4], -1.0, 1.0), rand_tensor(r, vec![4], -1.0, 1.0)],
        |g, v| g.add(v[0], v[1]),
    ));
    cases.push(Case::new(
        "sub",
        |r| vec![rand_tensor(r, vec![2, 3], -1.0, 1.0), rand_tensor(r, vec![2, 3], -1.0, 1.0)],
        |g, v| g.sub(v[0], v[1]),
    ));
    cases.push(Case::new(
        "mul",
        |r| vec![rand_tensor(r, vec![2, 3], -1.0, 1.0), rand_tensor(r, vec![2, 3], -1.0, 1.0)],
        |g, v| g.mul(v[0], v[1]),
    ));
    cases.push(Case::new(
        "div",
        |r| {
            let mut denom = rand_tensor(r, vec![2, 3], 0.4, 1.5);
            for (i, v) in denom.values.iter_mut().enumerate() {
                if i % 2 == 0 {
                    *v = -*v;
                }
            }
            vec![rand_tensor(r, vec![2, 3], -1.0, 1.0), denom]
        },
        |g, v| g.div(v[0], v[1]),
    ));
    cases.push(Case::new(
        "neg",
        |r| vec![rand_tensor(r, vec![5], -1.0, 1.0)],
        |g, v| Ok(g.neg(v[0])),
    ));
    cases.push(Case::new(
        "exp",
        |r| vec![rand_tensor(r, vec![5], -1.0, 1.0)],
        |g, v| Ok(g.exp(v[0])),
    ));
    cases.push(Case::new(
        "log",
        |r| vec![rand_tensor(r, vec![5], 0.2, 2.0)],
        |g, v| g.log(v[0]),
    ));
    cases.push(Case::new(
        "abs",
        |r| vec![rand_tensor_off_zero(r, vec![6])],
        |g, v| Ok(g.abs(v[0])),
    ));
    cases.push(Case::new(
        "relu",
        |r| vec![rand_tensor_off_zero(r, vec![6])],
        |g, v| Ok(g.relu(v[0])),
    ));
    cases.push(Case::new(
        "elu",
        |r| vec![rand_tensor_off_zero(r, vec![6])],
        |g, v| Ok(g.elu(v[0], 1.0)),
    ));
    cases.push(Case::new(
        "tanh",
        |r| vec![rand_tensor(r, vec![5], -2.0, 2.0)],
        |g, v| Ok(g.tanh(v[0])),
    ));
    cases.push(Case::new(
        "sigmoid",
        |r| vec![rand_tensor(r, vec![5], -2.0, 2.0)],
        |g, v| Ok(g.sigmoid(v[0])),
    ));
    cases.push(Case::new(
        "square",
        |r| vec![rand_tensor(r, vec![5], -1.0, 1.0)],
        |g, v| Ok(g.square(v[0])),
    ));
    cases.push(Case::new(
        "add_scalar",
        |r| vec![rand_tensor(r, vec![4], -1.0, 1.0)],
        |g, v| Ok(g.add_scalar(v[0], 0.37)),
    ));
    cases.push(Case::new(
        "mul_scalar",
        |r| vec![rand_tensor(r, vec![4], -1.0, 1.0)],
        |g, v| Ok(g.mul_scalar(v[0], -1.7)),
    ));
    cases.push(Case::new(
        "softmax",
        |r| vec![rand_tensor(r, vec![2, 5], -2.0, 2.0)],
        |g, v| Ok(g.softmax(v[0])),
    ));
    cases.push(Case::new(
        "log_softmax",
        |r| vec![rand_tensor(r, vec![2, 5], -2.0, 2.0)],
        |g, v| Ok(g.log_softmax(v[0])),
    ));
    cases.push(Case::new(
        "transpose2d",
        |r| vec![rand_tensor(r, vec![3, 4], -1.0, 1.0)],
        |g, v| g.transpose2d(v[0]),
    ));
    cases.push(Case::new(
        "reshape",
        |r| vec![rand_tensor(r, vec![2, 6], -1.0, 1.0)],
        |g, v| g.reshape(v[0], vec![3, 4]),
    ));
    cases.push(Case::new(
        "slice",
        |r| vec![rand_tensor(r, vec![3, 5], -1.0, 1.0)],
        |g, v| g.slice(v[0], 1, 1, 3),
    ));
    cases.push(Case::new(
        "concat",
        |r| {
            vec![
                rand_tensor(r, vec![2, 3], -1.0, 1.0),
                rand_tensor(r, vec![2, 2], -1.0, 1.0),
            ]
        },
        |g, v| g.concat(v, 1),
    ));
    cases.push(Case::new(
        "sum",
        |r| vec![rand_tensor(r, vec![2, 3], -1.0, 1.0)],
        |g, v| Ok(g.sum(v[0])),
    ));
    cases.push(Case::new(
        "sum_last",
        |r| vec![rand_tensor(r, vec![3, 4], -1.0, 1.0)],
        |g, v| Ok(g.sum_last(v[0])),
    ));
    cases.push(Case::new(
        "mean",
        |r| vec![rand_tensor(r, vec![2, 3], -1.0, 1.0)],
        |g, v| Ok(g.mean(v[0])),
    ));
    cases.push(Case::new(
        "max_pool2d",
        |r| {
            // Jitter keeps window maxima strict so the argmax is stable
            // under the probe step.
            let mut t = rand_tensor(r, vec![1, 2, 4, 4], -1.0, 1.0);
            for (i, v) in t.values.iter_mut().enumerate() {
                *v += (i % 7) as f64 * 0.01;
            }
            t.values[5] += 0.5;
            vec![t]
        },
        |g, v| g.max_pool2d(v[0]),
    ));
    cases.push(Case::new(
        "conv2d",
        |r| {
            vec![
                rand_tensor(r, vec![2, 2, 5, 5], -1.0, 1.0),
                rand_tensor(r, vec![3, 2, 3, 3], -1.0, 1.0),
                rand_tensor(r, vec![3], -0.5, 0.5),
            ]
        },
        |g, v| g.conv2d(v[0], v[1], Some(v[2])),
    ));
    cases.push(Case::new(
        "layer_norm",
        |r| {
            vec![
                rand_tensor(r, vec![3, 6], -1.0, 1.0),
                rand_tensor(r, vec![6], 0.5, 1.5),
                rand_tensor(r, vec![6], -0.5, 0.5),
            ]
        },
        |g, v| g.layer_norm(v[0], v[1], v[2], 1e-5),
    ));
    cases.push(Case::new(
        "embed_mean",
        |r| vec![rand_tensor(r, vec![5, 4], -1.0, 1.0)],
        |g, v| g.embed_mean(v[0], vec![vec![0, 2, 2], vec![4], vec![1, 3]]),
    ));
    cases.push(Case::new(
        "gumbel_softmax_soft",
        |r| vec![rand_tensor(r, vec![2, 4], -2.0, 2.0)],
        |g, v| {
            let noise = vec![0.31, -0.22, 0.05, 0.4, -0.11, 0.09, -0.35, 0.18];
            g.gumbel_softmax(v[0], &noise, 0.7, false)
        },
    ));
    cases.push(Case::new(
        "entropy",
        // Probing raw probabilities would break row normalization, so the
        // case feeds logits through softmax first.
        |r| vec![rand_tensor(r, vec![2, 4], -1.5, 1.5)],
        |g, v| {
            let p = g.softmax(v[0]);
            super::loss::entropy_rows(g, p)
        },
    ));
    cases
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_op_passes_finite_difference_check() {
        let report = run_suite(&op_cases(), 2, 42, None).unwrap();
        for case in &report.cases {
            assert!(
                case.passed,
                "{} failed: max rel err {:.3e}",
                case.name, case.max_relative_error
            );
        }
    }

    #[test]
    fn injected_sign_error_is_caught_and_named() {
        let report = run_suite(&op_cases(), 1, 42, Some("tanh")).unwrap();
        assert!(!report.passed());
        let failures = report.failures();
        assert_eq!(failures.len(), 1);
        assert_eq!(failures[0].name, "tanh");
    }
}
