//! Image-Lookup: classify each image of a k-length sequence, look the digit
//! tuple up in an exact table. The extractor is the shared digit CNN; the
//! estimator is a fully-connected stack over the concatenated soft digit
//! distributions (dimensions `[10k, 300, 100, 10]`).

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::graph::{Graph, Var};
use crate::autodiff::loss::{label_smoothing_loss, masked_cross_entropy, smooth_targets};
use crate::autodiff::params::Bound;
use crate::blackbox::{adapt_hard, ArgValue, BbError, BlackBoxFunction, LookupTable, OutputValue};
use crate::framework::dataset::{sample_digit_distribution, BbEntry, BlackBoxDataset, Provenance};
use crate::framework::{EstiNetError, EstiNetTask, ModelParams};
use crate::nn::{Activation, Dense, DigitExtractor};
use crate::tasks::image_seq::ImageSequenceSample;
use crate::tasks::mnist::{MnistData, IMAGE_PIXELS};

use super::{argmax, mean_row_entropy, one_hot};

pub struct ImageLookupModel {
    pub k: usize,
    extractor: DigitExtractor,
    est_stack: Vec<Dense>,
    bbf: BlackBoxFunction,
    corpus: Arc<MnistData>,
}

pub struct LookupFwd {
    position_dists: Vec<Var>,
    entropy_rows: Var,
    logits: Var,
    batch_len: usize,
}

impl ImageLookupModel {
    pub fn build(
        corpus: Arc<MnistData>,
        table: LookupTable,
        seed: u64,
    ) -> (Self, ModelParams) {
        let k = table.dimension();
        let mut params = ModelParams::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let extractor = DigitExtractor::new(&mut params.extractor, &mut rng);
        let est_stack = vec![
            Dense::new(&mut params.estimator, &mut rng, "est.fc1", 10 * k, 300, Activation::Relu),
            Dense::new(&mut params.estimator, &mut rng, "est.fc2", 300, 100, Activation::Relu),
            Dense::new(&mut params.estimator, &mut rng, "est.fc3", 100, 10, Activation::Linear),
        ];
        let model = ImageLookupModel {
            k,
            extractor,
            est_stack,
            bbf: BlackBoxFunction::lookup(table),
            corpus,
        };
        (model, params)
    }

    /// Swap in a different table behind the same interface (the replacement
    /// experiment). Training state is untouched.
    pub fn replace_table(&mut self, table: LookupTable) {
        assert_eq!(table.dimension(), self.k);
        self.bbf = BlackBoxFunction::lookup(table);
    }

    /// Position-major pixel buffer: all first images, then all second ones.
    fn image_batch(&self, batch: &[ImageSequenceSample]) -> Vec<f32> {
        let mut pixels = Vec::with_capacity(batch.len() * self.k * IMAGE_PIXELS);
        for pos in 0..self.k {
            for s in batch {
                pixels.extend_from_slice(self.corpus.image(s.image_indices[pos] as usize));
            }
        }
        pixels
    }

    fn estimator_logits(
        &self,
        g: &mut Graph<f32>,
        est_bound: &Bound,
        dists: Var,
    ) -> Result<Var, EstiNetError> {
        let mut x = dists;
        for layer in &self.est_stack {
            x = layer.forward(g, est_bound, x)?;
        }
        Ok(x)
    }

    /// Hard digits -> table lookup; the inference path behind `infer`, also
    /// exercised directly by tests that plant synthetic distributions.
    pub fn infer_from_distributions(
        &self,
        dists: &[Vec<f32>],
    ) -> Result<OutputValue, EstiNetError> {
        let args: Vec<ArgValue> = dists.iter().map(|d| ArgValue::Class(adapt_hard(d))).collect();
        Ok(self.bbf.call(&args)?)
    }
}

impl EstiNetTask for ImageLookupModel {
    type Sample = ImageSequenceSample;
    type Fwd = LookupFwd;

    fn name(&self) -> &'static str {
        "image-lookup"
    }

    fn blackbox(&self) -> &BlackBoxFunction {
        &self.bbf
    }

    fn forward(
        &self,
        g: &mut Graph<f32>,
        arg_bound: &Bound,
        est_bound: &Bound,
        batch: &[Self::Sample],
        _selection_noise: Option<&mut ChaCha8Rng>,
    ) -> Result<Self::Fwd, EstiNetError> {
        let b = batch.len();
        let pixels = self.image_batch(batch);
        let images = g.constant(vec![b * self.k, 1, 28, 28], pixels)?;
        let all_dists = self.extractor.distributions(g, arg_bound, images)?;
        let mut position_dists = Vec::with_capacity(self.k);
        let mut entropy_rows: Option<Var> = None;
        for pos in 0..self.k {
            let d = g.slice(all_dists, 0, pos * b, b)?;
            let h = crate::autodiff::loss::entropy_rows(g, d)?;
            entropy_rows = Some(match entropy_rows {
                Some(acc) => g.add(acc, h)?,
                None => h,
            });
            position_dists.push(d);
        }
        let est_in = g.concat(&position_dists, 1)?;
        let logits = self.estimator_logits(g, est_bound, est_in)?;
        Ok(LookupFwd {
            position_dists,
            entropy_rows: entropy_rows.unwrap(),
            logits,
            batch_len: b,
        })
    }

    fn prediction(&self, fwd: &Self::Fwd) -> Var {
        fwd.logits
    }

    fn arg_entropy_rows(&self, fwd: &Self::Fwd) -> Var {
        fwd.entropy_rows
    }

    fn target_loss(
        &self,
        g: &mut Graph<f32>,
        fwd: &Self::Fwd,
        batch: &[Self::Sample],
        label_smoothing: f64,
    ) -> Result<Var, EstiNetError> {
        let mut gold = Vec::with_capacity(batch.len() * 10);
        for s in batch {
            gold.extend(one_hot(s.label as usize, 10));
        }
        Ok(label_smoothing_loss(g, fwd.logits, &gold, label_smoothing, None)?)
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
        label_smoothing: f64,
    ) -> Result<Option<Var>, EstiNetError> {
        let mut gold = Vec::with_capacity(labels.len() * 10);
        let mut mask = Vec::with_capacity(labels.len());
        for l in labels {
            match l {
                Some(OutputValue::Class(c)) => {
                    gold.extend(one_hot(*c, 10));
                    mask.push(true);
                }
                _ => {
                    gold.extend(vec![0.1f32; 10]);
                    mask.push(false);
                }
            }
        }
        let smoothed = smooth_targets(&gold, &[labels.len(), 10], label_smoothing, None)?;
        Ok(masked_cross_entropy(g, fwd.logits, &smoothed, &mask)?)
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
        let mut rows = Vec::with_capacity(entries.len() * 10 * self.k);
        for e in entries {
            let dists = e
                .soft_inputs
                .as_ref()
                .ok_or_else(|| EstiNetError::Config("lookup entry without inputs".into()))?;
            for d in dists {
                rows.extend_from_slice(d);
            }
        }
        let x = g.constant(vec![entries.len(), 10 * self.k], rows)?;
        self.estimator_logits(g, est_bound, x)
    }

    fn estimator_loss(
        &self,
        g: &mut Graph<f32>,
        out: Var,
        entries: &[BbEntry],
        label_smoothing: f64,
    ) -> Result<Var, EstiNetError> {
        let mut gold = Vec::with_capacity(entries.len() * 10);
        for e in entries {
            let OutputValue::Class(c) = e.label else {
                return Err(EstiNetError::Config("lookup label is not a class".into()));
            };
            gold.extend(one_hot(c, 10));
        }
        Ok(label_smoothing_loss(g, out, &gold, label_smoothing, None)?)
    }

    fn estimator_output_matches(&self, row: &[f32], entry: &BbEntry) -> bool {
        matches!(entry.label, OutputValue::Class(c) if argmax(row) == c)
    }

    fn estimator_row_width(&self) -> usize {
        10
    }

    fn infer(
        &self,
        g: &mut Graph<f32>,
        arg_bound: &Bound,
        sample: &Self::Sample,
    ) -> Result<OutputValue, EstiNetError> {
        let mut pixels = Vec::with_capacity(self.k * IMAGE_PIXELS);
        for &idx in &sample.image_indices {
            pixels.extend_from_slice(self.corpus.image(idx as usize));
        }
        let images = g.constant(vec![self.k, 1, 28, 28], pixels)?;
        let dists = self.extractor.distributions(g, arg_bound, images)?;
        let rows: Vec<Vec<f32>> = (0..self.k)
            .map(|pos| g.values(dists)[pos * 10..(pos + 1) * 10].to_vec())
            .collect();
        self.infer_from_distributions(&rows)
    }

    fn prediction_matches(&self, row: &[f32], sample: &Self::Sample) -> bool {
        argmax(row) == sample.label as usize
    }

    fn prediction_error(&self, row: &[f32], sample: &Self::Sample) -> f64 {
        if self.prediction_matches(row, sample) {
            0.0
        } else {
            1.0
        }
    }

    fn output_matches(&self, out: &OutputValue, sample: &Self::Sample) -> bool {
        matches!(out, OutputValue::Class(c) if *c == sample.label as usize)
    }

    fn output_error(&self, out: &OutputValue, sample: &Self::Sample) -> f64 {
        if self.output_matches(out, sample) {
            0.0
        } else {
            1.0
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
                let row = &values[i * 10..(i + 1) * 10];
                if argmax(row) == s.hidden_digits[pos] as usize {
                    correct += 1;
                }
                total += 1;
            }
        }
        Some((correct, total))
    }

    fn prediction_entropy(&self, g: &Graph<f32>, fwd: &Self::Fwd) -> Option<f64> {
        Some(mean_row_entropy(g.values(fwd.logits), 10))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::framework::training::{evaluate, sample_online};
    use crate::framework::Mode;
    use crate::tasks::digits::generate_digit_corpus;
    use crate::tasks::image_seq::gen_image_lookup;

    fn small_setup() -> (ImageLookupModel, ModelParams, Vec<ImageSequenceSample>, LookupTable) {
        let corpus = Arc::new(generate_digit_corpus(60, 11));
        let (ds, table) = gen_image_lookup(&corpus, 2, 12, 3, 4).unwrap();
        let (model, params) = ImageLookupModel::build(corpus, table.clone(), 5);
        (model, params, ds.samples, table)
    }

    #[test]
    fn forward_shapes_and_gradient_reach_the_extractor() {
        let (model, mut params, samples, _) = small_setup();
        let mut g = Graph::new();
        let ab = params.extractor.bind(&mut g);
        let eb = params.estimator.bind(&mut g);
        let fwd = model.forward(&mut g, &ab, &eb, &samples[..4], None).unwrap();
        assert_eq!(g.shape(fwd.logits), &[4, 10]);
        let loss = model.target_loss(&mut g, &fwd, &samples[..4], 0.0).unwrap();
        g.backward(loss).unwrap();
        let norm = params.extractor.take_grads(&g, &ab);
        assert!(norm > 0.0, "train-mode output must be differentiable end to end");
    }

    #[test]
    fn planted_perfect_extractor_makes_inference_exact() {
        let (model, _, samples, table) = small_setup();
        for s in &samples {
            let dists: Vec<Vec<f32>> = s
                .hidden_digits
                .iter()
                .map(|&d| one_hot(d as usize, 10))
                .collect();
            let out = model.infer_from_distributions(&dists).unwrap();
            let expected = table
                .get(&s.hidden_digits.iter().map(|&d| d as usize).collect::<Vec<_>>())
                .unwrap();
            assert_eq!(out, OutputValue::Class(expected));
            assert_eq!(expected as f64, s.label);
        }
    }

    #[test]
    fn untrained_online_sampling_yields_valid_entries() {
        let (model, params, samples, _) = small_setup();
        let ds = sample_online(&model, &params, &samples[..6]).unwrap();
        assert_eq!(ds.len(), 6);
        assert_eq!(ds.skipped, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        ds.audit(model.blackbox(), &mut rng, 20).unwrap();
    }

    #[test]
    fn offline_sampling_labels_spot_check() {
        let (model, _, _, table) = small_setup();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ds = model.sample_offline(100, &mut rng).unwrap();
        assert_eq!(ds.len(), 100);
        for e in &ds.entries {
            let args: Vec<usize> = e
                .args
                .iter()
                .map(|a| match a {
                    ArgValue::Class(c) => *c,
                    _ => unreachable!(),
                })
                .collect();
            assert_eq!(e.label, OutputValue::Class(table.get(&args).unwrap()));
        }
        assert!(model.sample_offline(0, &mut rng).is_err());
    }

    #[test]
    fn train_and_test_modes_agree_for_identical_parameters() {
        let (model, params, samples, _) = small_setup();
        let train = evaluate(&model, &params, &samples, Mode::Train, 6).unwrap();
        let test = evaluate(&model, &params, &samples, Mode::Test, 6).unwrap();
        assert_eq!(train.correct, test.correct);
        assert_eq!(train.argument_correct, test.argument_correct);
    }
}
