use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::blackbox::{ArgValue, BlackBoxFunction, OutputValue};

use super::EstiNetError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Offline,
    Online,
}

/// One black-box query: the hardened arguments the function consumed, the
/// label it returned, and (when the network input is not derivable from the
/// arguments, e.g. soft distributions) the raw inputs to train on.
#[derive(Debug, Clone)]
pub struct BbEntry {
    pub args: Vec<ArgValue>,
    pub label: OutputValue,
    pub soft_inputs: Option<Vec<Vec<f32>>>,
    pub provenance: Provenance,
}

/// Input-label pairs labeled by the black box itself, substituting for
/// intermediate labels.
#[derive(Debug, Clone, Default)]
pub struct BlackBoxDataset {
    pub entries: Vec<BbEntry>,
    /// Online queries dropped because the hardened arguments violated the
    /// declared domains.
    pub skipped: usize,
}

impl BlackBoxDataset {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Re-query the black box on a random subset and confirm every label.
    pub fn audit(
        &self,
        bbf: &BlackBoxFunction,
        rng: &mut ChaCha8Rng,
        sample_n: usize,
    ) -> Result<(), EstiNetError> {
        if self.entries.is_empty() {
            return Ok(());
        }
        for _ in 0..sample_n {
            let e = &self.entries[rng.random_range(0..self.entries.len())];
            let again = bbf.call(&e.args)?;
            if again != e.label {
                return Err(EstiNetError::Config(format!(
                    "black-box dataset entry label {:?} no longer matches re-query {:?}",
                    e.label, again
                )));
            }
        }
        Ok(())
    }

    /// Keep only the most recent `n` entries.
    pub fn truncate_front(&mut self, n: usize) {
        if self.entries.len() > n {
            self.entries.drain(..self.entries.len() - n);
        }
    }
}

/// Uniform draw from the probability simplex.
pub fn sample_simplex(rng: &mut ChaCha8Rng, classes: usize) -> Vec<f32> {
    let draws: Vec<f64> = (0..classes)
        .map(|_| -f64::ln(rng.random_range(f64::EPSILON..1.0)))
        .collect();
    let total: f64 = draws.iter().sum();
    draws.iter().map(|&d| (d / total) as f32).collect()
}

/// A-priori distribution for digit arguments: a uniformly sampled class as
/// its one-hot vector. Training the estimator on the vertices only leaves
/// its interpolation over soft inputs unconstrained and smooth, which is
/// what gives the extractor useful gradients; labeling interior points by
/// their argmax would instead teach a locally constant (zero-gradient)
/// function.
pub fn sample_digit_distribution(rng: &mut ChaCha8Rng, classes: usize) -> (usize, Vec<f32>) {
    let digit = rng.random_range(0..classes);
    let mut dist = vec![0.0f32; classes];
    dist[digit] = 1.0;
    (digit, dist)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn simplex_samples_are_distributions() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let p = sample_simplex(&mut rng, 10);
            assert_eq!(p.len(), 10);
            assert!(p.iter().all(|&v| v >= 0.0));
            let s: f32 = p.iter().sum();
            assert!((s - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn audit_catches_stale_labels() {
        let bbf = BlackBoxFunction::sum(2);
        let good = BbEntry {
            args: vec![ArgValue::Class(2), ArgValue::Class(3)],
            label: OutputValue::Scalar(5.0),
            soft_inputs: None,
            provenance: Provenance::Offline,
        };
        let bad = BbEntry {
            label: OutputValue::Scalar(6.0),
            ..good.clone()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ds = BlackBoxDataset { entries: vec![good], skipped: 0 };
        ds.audit(&bbf, &mut rng, 20).unwrap();
        let ds = BlackBoxDataset { entries: vec![bad], skipped: 0 };
        assert!(ds.audit(&bbf, &mut rng, 20).is_err());
    }
}
