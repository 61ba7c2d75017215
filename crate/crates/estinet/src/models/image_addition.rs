//! Image-Addition: classify each image of a sequence and sum the digits.
//! The estimator is an LSTM over the soft digit distributions followed by a
//! NALU cell and a linear readout producing one regression number. Under
//! the `EndToEnd` procedure the same structure is the plain NALU baseline.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::graph::{Graph, Var};
use crate::autodiff::loss::squared_error;
use crate::autodiff::params::Bound;
use crate::blackbox::{adapt_hard, ArgValue, BbError, BlackBoxFunction, OutputValue};
use crate::framework::dataset::{sample_digit_distribution, BbEntry, BlackBoxDataset, Provenance};
use crate::framework::{EstiNetError, EstiNetTask, ModelParams};
use crate::nn::{Activation, Dense, DigitExtractor, Lstm, Nalu};
use crate::tasks::image_seq::ImageSequenceSample;
use crate::tasks::mnist::{MnistData, IMAGE_PIXELS};

use super::{argmax, masked_squared_error};

pub struct ImageAdditionModel {
    pub k: usize,
    extractor: DigitExtractor,
    lstm: Lstm,
    nalu: Nalu,
    readout: Dense,
    bbf: BlackBoxFunction,
    corpus: Arc<MnistData>,
}

pub struct AdditionFwd {
    position_dists: Vec<Var>,
    entropy_rows: Var,
    /// `[batch]` regression output.
    prediction: Var,
    batch_len: usize,
}

impl ImageAdditionModel {
    pub fn build(corpus: Arc<MnistData>, k: usize, seed: u64) -> (Self, ModelParams) {
        let mut params = ModelParams::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let extractor = DigitExtractor::new(&mut params.extractor, &mut rng);
        let lstm = Lstm::new(&mut params.estimator, &mut rng, "est.lstm", 10, 50);
        let nalu = Nalu::new(&mut params.estimator, &mut rng, "est.nalu", 50, 100);
        let readout =
            Dense::new(&mut params.estimator, &mut rng, "est.readout", 100, 1, Activation::Linear);
        let model = ImageAdditionModel {
            k,
            extractor,
            lstm,
            nalu,
            readout,
            bbf: BlackBoxFunction::sum(k),
            corpus,
        };
        (model, params)
    }

    /// The estimator on a sequence of `[batch, 10]` distribution tensors.
    fn estimate_sum(
        &self,
        g: &mut Graph<f32>,
        est_bound: &Bound,
        steps: &[Var],
    ) -> Result<Var, EstiNetError> {
        let h = self.lstm.last_hidden(g, est_bound, steps)?;
        let a = self.nalu.forward(g, est_bound, h)?;
        let out = self.readout.forward(g, est_bound, a)?;
        let b = g.shape(out)[0];
        Ok(g.reshape(out, vec![b])?)
    }

    fn forward_distributions(
        &self,
        g: &mut Graph<f32>,
        arg_bound: &Bound,
        batch: &[ImageSequenceSample],
        k: usize,
    ) -> Result<Vec<Var>, EstiNetError> {
        let b = batch.len();
        let mut pixels = Vec::with_capacity(b * k * IMAGE_PIXELS);
        for pos in 0..k {
            for s in batch {
                pixels.extend_from_slice(self.corpus.image(s.image_indices[pos] as usize));
            }
        }
        let images = g.constant(vec![b * k, 1, 28, 28], pixels)?;
        let all = self.extractor.distributions(g, arg_bound, images)?;
        (0..k)
            .map(|pos| Ok(g.slice(all, 0, pos * b, b)?))
            .collect()
    }
}

impl EstiNetTask for ImageAdditionModel {
    type Sample = ImageSequenceSample;
    type Fwd = AdditionFwd;

    fn name(&self) -> &'static str {
        "image-addition"
    }

    fn blackbox(&self) -> &BlackBoxFunction {
        &self.bbf
    }

    fn is_regression(&self) -> bool {
        true
    }

    fn forward(
        &self,
        g: &mut Graph<f32>,
        arg_bound: &Bound,
        est_bound: &Bound,
        batch: &[Self::Sample],
        _selection_noise: Option<&mut ChaCha8Rng>,
    ) -> Result<Self::Fwd, EstiNetError> {
        // Sequence length comes from the data so a model trained at k = 10
        // evaluates at k = 100 unchanged.
        let k = batch[0].image_indices.len();
        let position_dists = self.forward_distributions(g, arg_bound, batch, k)?;
        let mut entropy_rows: Option<Var> = None;
        for &d in &position_dists {
            let h = crate::autodiff::loss::entropy_rows(g, d)?;
            entropy_rows = Some(match entropy_rows {
                Some(acc) => g.add(acc, h)?,
                None => h,
            });
        }
        let prediction = self.estimate_sum(g, est_bound, &position_dists)?;
        Ok(AdditionFwd {
            position_dists,
            entropy_rows: entropy_rows.unwrap(),
            prediction,
            batch_len: batch.len(),
        })
    }

    fn prediction(&self, fwd: &Self::Fwd) -> Var {
        fwd.prediction
    }

    fn arg_entropy_rows(&self, fwd: &Self::Fwd) -> Var {
        fwd.entropy_rows
    }

    fn target_loss(
        &self,
        g: &mut Graph<f32>,
        fwd: &Self::Fwd,
        batch: &[Self::Sample],
        _label_smoothing: f64,
    ) -> Result<Var, EstiNetError> {
        let gold: Vec<f32> = batch.iter().map(|s| s.label as f32).collect();
        Ok(squared_error(g, fwd.prediction, &gold)?)
    }

    fn harden_args(
        &self,
        g: &Graph<f32>,
        fwd: &Self::Fwd,
        batch: &[Self::Sample],
    ) -> Vec<Result<Vec<ArgValue>, BbError>> {
        (0..batch.len())
            .map(|i| {
                Ok(fwd
                    .position_dists
                    .iter()
                    .map(|&d| {
                        let row = &g.values(d)[i * 10..(i + 1) * 10];
                        ArgValue::Class(adapt_hard(row))
                    })
                    .collect())
            })
            .collect()
    }

    fn sample_args(
        &self,
        g: &Graph<f32>,
        fwd: &Self::Fwd,
        batch: &[Self::Sample],
        rng: &mut ChaCha8Rng,
    ) -> Vec<Result<Vec<ArgValue>, BbError>> {
        (0..batch.len())
            .map(|i| {
                Ok(fwd
                    .position_dists
                    .iter()
                    .map(|&d| {
                        let row = &g.values(d)[i * 10..(i + 1) * 10];
                        ArgValue::Class(super::sample_index(row, rng))
                    })
                    .collect())
            })
            .collect()
    }

    fn soft_inputs(&self, g: &Graph<f32>, fwd: &Self::Fwd) -> Vec<Option<Vec<Vec<f32>>>> {
        (0..fwd.batch_len)
            .map(|i| {
                Some(
                    fwd.position_dists
                        .iter()
                        .map(|&d| g.values(d)[i * 10..(i + 1) * 10].to_vec())
                        .collect(),
                )
            })
            .collect()
    }

    fn blackbox_loss(
        &self,
        g: &mut Graph<f32>,
        fwd: &Self::Fwd,
        labels: &[Option<OutputValue>],
        _label_smoothing: f64,
    ) -> Result<Option<Var>, EstiNetError> {
        let mut gold = Vec::with_capacity(labels.len());
        let mut mask = Vec::with_capacity(labels.len());
        for l in labels {
            match l {
                Some(OutputValue::Scalar(s)) => {
                    gold.push(*s as f32);
                    mask.push(true);
                }
                _ => {
                    gold.push(0.0);
                    mask.push(false);
                }
            }
        }
        Ok(masked_squared_error(g, fwd.prediction, &gold, &mask)?)
    }

    fn sample_offline(
        &self,
        n: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<BlackBoxDataset, EstiNetError> {
        if n == 0 {
            return Err(EstiNetError::Config("offline sample size must be positive".into()));
        }
        let mut ds = BlackBoxDataset::default();
        for _ in 0..n {
            let mut dists = Vec::with_capacity(self.k);
            let mut args = Vec::with_capacity(self.k);
            for _ in 0..self.k {
                let (digit, dist) = sample_digit_distribution(rng, 10);
                debug_assert_eq!(adapt_hard(&dist), digit);
                dists.push(dist);
                args.push(ArgValue::Class(digit));
            }
            let label = self.bbf.call(&args)?;
            ds.entries.push(BbEntry {
                args,
                label,
                soft_inputs: Some(dists),
                provenance: Provenance::Offline,
            });
        }
        Ok(ds)
    }

    fn estimator_forward(
        &self,
        g: &mut Graph<f32>,
        est_bound: &Bound,
        entries: &[BbEntry],
    ) -> Result<Var, EstiNetError> {
        let k = match entries.first().and_then(|e| e.soft_inputs.as_ref()) {
            Some(d) => d.len(),
            None => self.k,
        };
        let mut steps = Vec::with_capacity(k);
        for pos in 0..k {
            let mut rows = Vec::with_capacity(entries.len() * 10);
            for e in entries {
                let dists = e
                    .soft_inputs
                    .as_ref()
                    .ok_or_else(|| EstiNetError::Config("sum entry without inputs".into()))?;
                rows.extend_from_slice(&dists[pos]);
            }
            steps.push(g.constant(vec![entries.len(), 10], rows)?);
        }
        self.estimate_sum(g, est_bound, &steps)
    }

    fn estimator_loss(
        &self,
        g: &mut Graph<f32>,
        out: Var,
        entries: &[BbEntry],
        _label_smoothing: f64,
    ) -> Result<Var, EstiNetError> {
        let gold: Vec<f32> = entries
            .iter()
            .map(|e| match e.label {
                OutputValue::Scalar(s) => Ok(s as f32),
                _ => Err(EstiNetError::Config("sum label is not a scalar".into())),
            })
            .collect::<Result<_, _>>()?;
        Ok(squared_error(g, out, &gold)?)
    }

    fn estimator_output_matches(&self, row: &[f32], entry: &BbEntry) -> bool {
        matches!(entry.label, OutputValue::Scalar(s) if (row[0] as f64 - s).abs() < 0.5)
    }

    fn estimator_row_width(&self) -> usize {
        1
    }

    fn infer(
        &self,
        g: &mut Graph<f32>,
        arg_bound: &Bound,
        sample: &Self::Sample,
    ) -> Result<OutputValue, EstiNetError> {
        let k = sample.image_indices.len();
        let mut pixels = Vec::with_capacity(k * IMAGE_PIXELS);
        for &idx in &sample.image_indices {
            pixels.extend_from_slice(self.corpus.image(idx as usize));
        }
        let images = g.constant(vec![k, 1, 28, 28], pixels)?;
        let dists = self.extractor.distributions(g, arg_bound, images)?;
        let args: Vec<ArgValue> = (0..k)
            .map(|pos| {
                let row = &g.values(dists)[pos * 10..(pos + 1) * 10];
                ArgValue::Class(adapt_hard(row))
            })
            .collect();
        let bbf = BlackBoxFunction::sum(k);
        Ok(bbf.call(&args)?)
    }

    fn prediction_matches(&self, row: &[f32], sample: &Self::Sample) -> bool {
        (row[0] as f64 - sample.label).abs() < 0.5
    }

    fn prediction_error(&self, row: &[f32], sample: &Self::Sample) -> f64 {
        (row[0] as f64 - sample.label).abs()
    }

    fn output_matches(&self, out: &OutputValue, sample: &Self::Sample) -> bool {
        matches!(out, OutputValue::Scalar(s) if (s - sample.label).abs() < 0.5)
    }

    fn output_error(&self, out: &OutputValue, sample: &Self::Sample) -> f64 {
        match out {
            OutputValue::Scalar(s) => (s - sample.label).abs(),
            _ => sample.label.abs(),
        }
    }

    fn argument_accuracy(
        &self,
        g: &Graph<f32>,
        fwd: &Self::Fwd,
        batch: &[Self::Sample],
    ) -> Option<(usize, usize)> {
        let mut correct = 0;
        let mut total = 0;
        for (pos, &d) in fwd.position_dists.iter().enumerate() {
            let values = g.values(d);
            for (i, s) in batch.iter().enumerate() {
                if argmax(&values[i * 10..(i + 1) * 10]) == s.hidden_digits[pos] as usize {
                    correct += 1;
                }
                total += 1;
            }
        }
        Some((correct, total))
    }

    fn prediction_entropy(&self, _g: &Graph<f32>, _fwd: &Self::Fwd) -> Option<f64> {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::framework::training::sample_online;
    use crate::tasks::digits::generate_digit_corpus;
    use crate::tasks::image_seq::gen_image_addition;

    #[test]
    fn regression_forward_and_exact_inference_labels() {
        let corpus = Arc::new(generate_digit_corpus(60, 21));
        let ds = gen_image_addition(&corpus, 3, 10, 1).unwrap();
        let (model, params) = ImageAdditionModel::build(corpus, 3, 2);
        let mut g = Graph::new();
        let ab = params.extractor.bind(&mut g);
        let eb = params.estimator.bind(&mut g);
        let fwd = model.forward(&mut g, &ab, &eb, &ds.samples[..5], None).unwrap();
        assert_eq!(g.shape(model.prediction(&fwd)), &[5]);
        // Sum is total on digits: online sampling never skips.
        let online = sample_online(&model, &params, &ds.samples[..5]).unwrap();
        assert_eq!(online.skipped, 0);
        assert_eq!(online.len(), 5);
    }

    #[test]
    fn perfect_distributions_make_inference_equal_the_sum() {
        let corpus = Arc::new(generate_digit_corpus(60, 22));
        let ds = gen_image_addition(&corpus, 4, 5, 3).unwrap();
        let (model, _) = ImageAdditionModel::build(corpus, 4, 2);
        let bbf = model.blackbox();
        for s in &ds.samples {
            let args: Vec<ArgValue> = s
                .hidden_digits
                .iter()
                .map(|&d| ArgValue::Class(d as usize))
                .collect();
            let out = bbf.call(&args).unwrap();
            assert_eq!(out, OutputValue::Scalar(s.label));
        }
    }
}
