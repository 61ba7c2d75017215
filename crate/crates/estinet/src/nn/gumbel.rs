use rand::Rng;

use crate::autodiff::graph::{Graph, Var};
use crate::autodiff::scalar::Scalar;
use crate::autodiff::AdError;

/// Standard Gumbel draws, one per logit element.
pub fn sample_gumbel<F: Scalar, R: Rng>(rng: &mut R, n: usize) -> Vec<F> {
    (0..n)
        .map(|_| {
            // U in (0, 1); the offset keeps ln away from 0 and 1 exactly.
            let u: f64 = rng.random_range(f64::EPSILON..1.0);
            F::from_f64(-(-u.ln()).ln())
        })
        .collect()
}

/// Draw from the Gumbel-softmax relaxation of the categorical distribution
/// given by `logits`. Soft mode returns the relaxed sample; hard mode
/// returns its one-hot argmax with the soft sample's gradient.
pub fn gumbel_softmax_select<F: Scalar, R: Rng>(
    g: &mut Graph<F>,
    rng: &mut R,
    logits: Var,
    temperature: f64,
    hard: bool,
) -> Result<Var, AdError> {
    let noise = sample_gumbel::<F, R>(rng, g.numel(logits));
    g.gumbel_softmax(logits, &noise, F::from_f64(temperature), hard)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn hard_output_is_exactly_one_hot() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let mut g = Graph::<f32>::new();
            let l = g.constant(vec![5], vec![0.3, -0.5, 1.0, 0.0, 0.2]).unwrap();
            let y = gumbel_softmax_select(&mut g, &mut rng, l, 1.0, true).unwrap();
            let ones = g.values(y).iter().filter(|&&v| v == 1.0).count();
            let zeros = g.values(y).iter().filter(|&&v| v == 0.0).count();
            assert_eq!((ones, zeros), (1, 4));
        }
    }

    #[test]
    fn zero_noise_low_temperature_recovers_argmax() {
        let mut g = Graph::<f64>::new();
        let l = g.constant(vec![4], vec![0.3, 0.9, -0.5, 0.1]).unwrap();
        let y = g.gumbel_softmax(l, &[0.0; 4], 1e-4, false).unwrap();
        assert!(g.values(y)[1] > 0.999);
    }

    #[test]
    fn straight_through_gradient_matches_softmax_jacobian() {
        // 3-class toy: the hard sample's backward must equal the soft
        // sample's, i.e. (1/tau) * J_softmax^T f' at the perturbed logits.
        use crate::autodiff::Tensor;
        let logits = [0.4f64, -0.2, 0.9];
        let noise = [0.05f64, 0.3, -0.1];
        let tau = 0.8;
        let upstream = [1.0f64, -2.0, 0.5];

        let mut g = Graph::<f64>::new();
        let l = Tensor::new(vec![1, 3], logits.to_vec()).unwrap().with_grad();
        let l = g.leaf(&l);
        let hard = g.gumbel_softmax(l, &noise, tau, true).unwrap();
        assert_eq!(g.values(hard).iter().filter(|&&v| v == 1.0).count(), 1);
        let w = g.constant(vec![1, 3], upstream.to_vec()).unwrap();
        let prod = g.mul(hard, w).unwrap();
        let loss = g.sum(prod);
        g.backward(loss).unwrap();
        let got = g.grad(l).to_vec();

        // Hand-computed soft sample and its Jacobian.
        let z: Vec<f64> = logits
            .iter()
            .zip(noise)
            .map(|(l, n)| (l + n) / tau)
            .collect();
        let m = z.iter().cloned().fold(f64::MIN, f64::max);
        let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
        let s: f64 = e.iter().sum();
        let soft: Vec<f64> = e.iter().map(|v| v / s).collect();
        let dot: f64 = upstream.iter().zip(&soft).map(|(u, p)| u * p).sum();
        for i in 0..3 {
            let expected = soft[i] * (upstream[i] - dot) / tau;
            assert!(
                (got[i] - expected).abs() < 1e-12,
                "component {i}: {} vs {expected}",
                got[i]
            );
        }
    }

    #[test]
    fn sampling_frequencies_match_softmax_probabilities() {
        // 10,000 hard samples at tau = 1 against the analytic softmax.
        let logits = vec![0.5f64, -0.3, 1.2, 0.0, -1.0, 0.25, 0.8, -0.6, 0.1, 0.4];
        let max = logits.iter().cloned().fold(f64::MIN, f64::max);
        let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        let probs: Vec<f64> = exps.iter().map(|e| e / z).collect();

        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut counts = [0usize; 10];
        let trials = 10_000;
        for _ in 0..trials {
            let mut g = Graph::<f64>::new();
            let l = g.constant(vec![10], logits.clone()).unwrap();
            let y = gumbel_softmax_select(&mut g, &mut rng, l, 1.0, true).unwrap();
            let pick = g.values(y).iter().position(|&v| v == 1.0).unwrap();
            counts[pick] += 1;
        }
        for (i, &c) in counts.iter().enumerate() {
            let freq = c as f64 / trials as f64;
            assert!(
                (freq - probs[i]).abs() < 0.02,
                "class {i}: frequency {freq:.3} vs probability {:.3}",
                probs[i]
            );
        }
    }
}
