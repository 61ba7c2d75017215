//! Text-Logic: selectors pick the two float tokens out of the question and
//! a 2-way head picks the comparison. The train-time prediction enumerates
//! every candidate (first token, second token, operation) program, runs the
//! estimator on each, and mixes the outcome distributions by the selector
//! probabilities; that makes the selectors' gradients exact mixture
//! weights rather than a linearization around one selection. The real
//! comparison replaces the estimator at inference, fed by the decoded
//! argmax selections.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::graph::{Graph, Var};
use crate::autodiff::loss::{label_smoothing_loss, LOG_EPS};
use crate::autodiff::params::Bound;
use crate::blackbox::{adapt_hard, ArgValue, BbError, BlackBoxFunction, CompareOp, OutputValue};
use crate::framework::dataset::{BbEntry, BlackBoxDataset, Provenance};
use crate::framework::{EstiNetError, EstiNetTask, ModelParams};
use crate::nn::{Activation, Dense, EmbeddingTable, Lstm, SelectorHead};
use crate::tasks::number_encoding::{decode_number, encode_number, DEFAULT_REDUNDANCY, DEFAULT_WIDTH};
use crate::tasks::text_logic::{text_logic_vocab, TextLogicSample};
use crate::tasks::tokenizer::{tokenize, Vocab};

use super::{argmax, mean_row_entropy, one_hot, sample_index};

const EMBED_DIM: usize = DEFAULT_WIDTH;
const RNN_DIM: usize = 50;
/// Estimator input: two candidate vectors plus the operation one-hot.
const EST_IN: usize = 2 * EMBED_DIM + 2;
const EST_HIDDEN: usize = 64;

pub struct TextLogicModel {
    vocab: Vocab,
    embedding: EmbeddingTable,
    lstm: Lstm,
    select_first: SelectorHead,
    select_second: SelectorHead,
    op_head: Dense,
    est_hidden: Dense,
    est_out: Dense,
    bbf: BlackBoxFunction,
}

struct SampleFwd {
    first_dist: Var,
    second_dist: Var,
    op_dist: Var,
    /// Numeric value per token (None for words), for the hardening adapter.
    numerics: Vec<Option<f32>>,
    /// Token vectors as values; non-numeric selections decode these.
    token_values: Vec<Vec<f32>>,
}

pub struct TextLogicFwd {
    per_sample: Vec<SampleFwd>,
    /// `[batch, 2]` log-probabilities of the mixed prediction.
    prediction: Var,
    entropy_rows: Var,
}

impl TextLogicModel {
    pub fn build(seed: u64) -> (Self, ModelParams) {
        let mut params = ModelParams::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vocab = text_logic_vocab();
        let embedding =
            EmbeddingTable::new(&mut params.extractor, &mut rng, "embedding", vocab.size(), EMBED_DIM);
        let lstm = Lstm::new(&mut params.extractor, &mut rng, "encoder", EMBED_DIM, RNN_DIM);
        let select_first =
            SelectorHead::new(&mut params.extractor, &mut rng, "select_first", RNN_DIM, RNN_DIM);
        let select_second =
            SelectorHead::new(&mut params.extractor, &mut rng, "select_second", RNN_DIM, RNN_DIM);
        let op_head =
            Dense::new(&mut params.extractor, &mut rng, "op_head", RNN_DIM, 2, Activation::Linear);
        let est_hidden = Dense::new(
            &mut params.estimator,
            &mut rng,
            "est.hidden",
            EST_IN,
            EST_HIDDEN,
            Activation::Relu,
        );
        let est_out =
            Dense::new(&mut params.estimator, &mut rng, "est.out", EST_HIDDEN, 2, Activation::Linear);
        let model = TextLogicModel {
            vocab,
            embedding,
            lstm,
            select_first,
            select_second,
            op_head,
            est_hidden,
            est_out,
            bbf: BlackBoxFunction::comparison(),
        };
        (model, params)
    }

    /// Token rows: numeric tokens get the fixed bit encoding, words the
    /// learned piece-average embedding.
    fn token_rows(
        &self,
        g: &mut Graph<f32>,
        arg_bound: &Bound,
        question: &str,
    ) -> Result<(Vec<Var>, Vec<Option<f32>>), EstiNetError> {
        let tokens = tokenize(question);
        let word_groups: Vec<Vec<usize>> = tokens
            .iter()
            .filter(|t| t.numeric.is_none())
            .map(|t| self.vocab.pieces(&t.text))
            .collect();
        let word_matrix = if word_groups.is_empty() {
            None
        } else {
            Some(self.embedding.token_vectors(g, arg_bound, word_groups)?)
        };
        let mut rows = Vec::with_capacity(tokens.len());
        let mut numerics = Vec::with_capacity(tokens.len());
        let mut word_idx = 0usize;
        for t in &tokens {
            match t.numeric {
                Some(v) => {
                    let enc = encode_number(v, DEFAULT_REDUNDANCY, EMBED_DIM)?;
                    rows.push(g.constant(vec![1, EMBED_DIM], enc)?);
                    numerics.push(Some(v));
                }
                None => {
                    rows.push(g.slice(word_matrix.unwrap(), 0, word_idx, 1)?);
                    word_idx += 1;
                    numerics.push(None);
                }
            }
        }
        Ok((rows, numerics))
    }

    /// Selection scores come from the per-position LSTM states (so a
    /// selector can express roles like "the first number"), while the
    /// selected positions adapt to their token values.
    fn extract(
        &self,
        g: &mut Graph<f32>,
        arg_bound: &Bound,
        question: &str,
    ) -> Result<(Var, SampleExtraction), EstiNetError> {
        let (rows, numerics) = self.token_rows(g, arg_bound, question)?;
        let class_matrix = g.concat(&rows, 0)?;
        let (states, _) = self.lstm.all_hidden(g, arg_bound, &rows)?;
        let context_matrix = g.concat(&states, 0)?;
        let query = *states.last().unwrap();
        let first_dist = self.select_first.distribution(g, arg_bound, query, context_matrix)?;
        let second_dist = self.select_second.distribution(g, arg_bound, query, context_matrix)?;
        let op_logits = self.op_head.forward(g, arg_bound, query)?;
        let op_dist = g.softmax(op_logits);
        Ok((class_matrix, SampleExtraction { first_dist, second_dist, op_dist, numerics }))
    }

    /// Estimator logits over `[rows, EST_IN]` candidate inputs.
    fn estimator_logits(
        &self,
        g: &mut Graph<f32>,
        est_bound: &Bound,
        input: Var,
    ) -> Result<Var, EstiNetError> {
        let h = self.est_hidden.forward(g, est_bound, input)?;
        Ok(self.est_out.forward(g, est_bound, h)?)
    }

    /// Mixture prediction over all candidate programs of one question:
    /// log( sum_{o,i,j} op_o p1_i p2_j softmax(est(v_i, v_j, o)) ), where
    /// v_k is the number encoding of token k's adapted float (exactly what
    /// the black box would be queried with, and exactly what the estimator
    /// is trained on).
    fn enumerate_prediction(
        &self,
        g: &mut Graph<f32>,
        est_bound: &Bound,
        token_values: &[Vec<f32>],
        numerics: &[Option<f32>],
        ex: &SampleExtraction,
    ) -> Result<Var, EstiNetError> {
        let n = token_values.len();
        let mut encoded = Vec::with_capacity(n * EMBED_DIM);
        for (vals, numeric) in token_values.iter().zip(numerics) {
            let v = match numeric {
                Some(v) => *v,
                None => decode_number(vals, DEFAULT_REDUNDANCY, EMBED_DIM)
                    .ok()
                    .filter(|d| d.is_finite())
                    .unwrap_or(0.0),
            };
            encoded.extend(encode_number(v, DEFAULT_REDUNDANCY, EMBED_DIM)?);
        }
        let candidate_matrix = g.constant(vec![n, EMBED_DIM], encoded)?;
        // 0/1 selection matrices lift [n, d] candidate rows to the n^2 pair
        // grid: row i*n+j of `left` is v_i, of `right` is v_j.
        let mut lift_left = vec![0.0f32; n * n * n];
        let mut lift_right = vec![0.0f32; n * n * n];
        for i in 0..n {
            for j in 0..n {
                lift_left[(i * n + j) * n + i] = 1.0;
                lift_right[(i * n + j) * n + j] = 1.0;
            }
        }
        let lift_left = g.constant(vec![n * n, n], lift_left)?;
        let lift_right = g.constant(vec![n * n, n], lift_right)?;
        let left = g.matmul(lift_left, candidate_matrix)?;
        let right = g.matmul(lift_right, candidate_matrix)?;
        let mut op_blocks = Vec::with_capacity(2);
        for o in 0..2 {
            let mut op_cols = vec![0.0f32; n * n * 2];
            for r in 0..n * n {
                op_cols[r * 2 + o] = 1.0;
            }
            let op_cols = g.constant(vec![n * n, 2], op_cols)?;
            op_blocks.push(g.concat(&[left, right, op_cols], 1)?);
        }
        let candidates = g.concat(&op_blocks, 0)?;
        let logits = self.estimator_logits(g, est_bound, candidates)?;
        let probs = g.softmax(logits);

        let p1_col = g.transpose2d(ex.first_dist)?;
        let pair_grid = g.matmul(p1_col, ex.second_dist)?;
        let pair_row = g.reshape(pair_grid, vec![1, n * n])?;
        let mut weight_blocks = Vec::with_capacity(2);
        for o in 0..2 {
            let op_o = g.slice(ex.op_dist, 1, o, 1)?;
            weight_blocks.push(g.matmul(op_o, pair_row)?);
        }
        let weights = g.concat(&weight_blocks, 1)?;
        let mixed = g.matmul(weights, probs)?;
        let guarded = g.add_scalar(mixed, LOG_EPS as f32);
        Ok(g.log(guarded)?)
    }

    /// Adapt one selection index to a float: numeric tokens by their parsed
    /// value, any other token by decoding its vector. Non-finite decodes
    /// violate the comparison's domain.
    fn token_to_float(s: &SampleFwd, idx: usize) -> Result<f64, BbError> {
        let v = match s.numerics[idx] {
            Some(v) => v,
            None => decode_number(&s.token_values[idx], DEFAULT_REDUNDANCY, EMBED_DIM)
                .map_err(|e| BbError::Domain(e.to_string()))?,
        };
        if v.is_finite() {
            Ok(v as f64)
        } else {
            Err(BbError::Domain(format!("token {idx} decodes to non-finite value")))
        }
    }

    fn harden_one(
        &self,
        g: &Graph<f32>,
        s: &SampleFwd,
        rng: Option<&mut ChaCha8Rng>,
    ) -> Result<Vec<ArgValue>, BbError> {
        let mut select: Box<dyn FnMut(&[f32]) -> usize> = match rng {
            Some(r) => Box::new(move |d| sample_index(d, r)),
            None => Box::new(|d| adapt_hard(d)),
        };
        let x = Self::token_to_float(s, select(g.values(s.first_dist)))?;
        let y = Self::token_to_float(s, select(g.values(s.second_dist)))?;
        let op = select(g.values(s.op_dist));
        Ok(vec![ArgValue::Scalar(x), ArgValue::Scalar(y), ArgValue::Class(op)])
    }

    fn encode_entry_input(args: &[ArgValue]) -> Result<Vec<f32>, EstiNetError> {
        let (ArgValue::Scalar(x), ArgValue::Scalar(y), ArgValue::Class(op)) =
            (&args[0], &args[1], &args[2])
        else {
            return Err(EstiNetError::Config("bad comparison args".into()));
        };
        let mut row = encode_number(*x as f32, DEFAULT_REDUNDANCY, EMBED_DIM)?;
        row.extend(encode_number(*y as f32, DEFAULT_REDUNDANCY, EMBED_DIM)?);
        row.extend(one_hot(*op, 2));
        Ok(row)
    }
}

struct SampleExtraction {
    first_dist: Var,
    second_dist: Var,
    op_dist: Var,
    numerics: Vec<Option<f32>>,
}

impl EstiNetTask for TextLogicModel {
    type Sample = TextLogicSample;
    type Fwd = TextLogicFwd;

    fn name(&self) -> &'static str {
        "text-logic"
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
        let mut per_sample = Vec::with_capacity(batch.len());
        let mut pred_rows = Vec::with_capacity(batch.len());
        let mut entropy_cells = Vec::with_capacity(batch.len());
        for s in batch {
            let (class_matrix, ex) = self.extract(g, arg_bound, &s.question)?;
            let n_tokens = g.shape(class_matrix)[0];
            let token_values: Vec<Vec<f32>> = (0..n_tokens)
                .map(|t| g.values(class_matrix)[t * EMBED_DIM..(t + 1) * EMBED_DIM].to_vec())
                .collect();
            let log_probs =
                self.enumerate_prediction(g, est_bound, &token_values, &ex.numerics, &ex)?;
            pred_rows.push(log_probs);
            let h1 = crate::autodiff::loss::entropy_rows(g, ex.first_dist)?;
            let h2 = crate::autodiff::loss::entropy_rows(g, ex.second_dist)?;
            let h3 = crate::autodiff::loss::entropy_rows(g, ex.op_dist)?;
            let h12 = g.add(h1, h2)?;
            let h = g.add(h12, h3)?;
            entropy_cells.push(h);
            per_sample.push(SampleFwd {
                first_dist: ex.first_dist,
                second_dist: ex.second_dist,
                op_dist: ex.op_dist,
                numerics: ex.numerics,
                token_values,
            });
        }
        let prediction = g.concat(&pred_rows, 0)?;
        let entropy_rows = g.concat(&entropy_cells, 0)?;
        Ok(TextLogicFwd { per_sample, prediction, entropy_rows })
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
        label_smoothing: f64,
    ) -> Result<Var, EstiNetError> {
        let mut gold = Vec::with_capacity(batch.len() * 2);
        for s in batch {
            gold.extend(one_hot(s.label as usize, 2));
        }
        Ok(label_smoothing_loss(g, fwd.prediction, &gold, label_smoothing, None)?)
    }

    fn harden_args(
        &self,
        g: &Graph<f32>,
        fwd: &Self::Fwd,
        _batch: &[Self::Sample],
    ) -> Vec<Result<Vec<ArgValue>, BbError>> {
        fwd.per_sample.iter().map(|s| self.harden_one(g, s, None)).collect()
    }

    /// Online queries sample one candidate program from the selectors and
    /// record (hardened args, exact label); the estimator trains on the
    /// encoded arguments, covering exactly the vertices the mixture visits.
    fn sample_args(
        &self,
        g: &Graph<f32>,
        fwd: &Self::Fwd,
        _batch: &[Self::Sample],
        rng: &mut ChaCha8Rng,
    ) -> Vec<Result<Vec<ArgValue>, BbError>> {
        fwd.per_sample
            .iter()
            .map(|s| self.harden_one(g, s, Some(rng)))
            .collect()
    }

    fn blackbox_loss_on_entries(&self) -> bool {
        true
    }

    fn soft_inputs(&self, _g: &Graph<f32>, fwd: &Self::Fwd) -> Vec<Option<Vec<Vec<f32>>>> {
        fwd.per_sample.iter().map(|_| None).collect()
    }

    fn blackbox_loss(
        &self,
        _g: &mut Graph<f32>,
        _fwd: &Self::Fwd,
        _labels: &[Option<OutputValue>],
        _label_smoothing: f64,
    ) -> Result<Option<Var>, EstiNetError> {
        // The estimator trains on the recorded dataset entries only: its
        // vertex values then track the exact function instead of absorbing
        // whatever the mixture weights currently need.
        Ok(None)
    }

    fn sample_offline(
        &self,
        n: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<BlackBoxDataset, EstiNetError> {
        use rand::Rng;
        if n == 0 {
            return Err(EstiNetError::Config("offline sample size must be positive".into()));
        }
        let std = (1e10f64).sqrt();
        let mut ds = BlackBoxDataset::default();
        for _ in 0..n {
            let gauss = |rng: &mut ChaCha8Rng| {
                let u1: f64 = rng.random_range(f64::EPSILON..1.0);
                let u2: f64 = rng.random_range(0.0..1.0);
                (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos() * std
            };
            let x = gauss(rng) as f32;
            let y = gauss(rng) as f32;
            let op = rng.random_range(0..2usize);
            let args = vec![
                ArgValue::Scalar(x as f64),
                ArgValue::Scalar(y as f64),
                ArgValue::Class(op),
            ];
            let label = self.bbf.call(&args)?;
            ds.entries.push(BbEntry {
                args,
                label,
                soft_inputs: None,
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
        let mut rows = Vec::with_capacity(entries.len() * EST_IN);
        for e in entries {
            rows.extend(Self::encode_entry_input(&e.args)?);
        }
        let x = g.constant(vec![entries.len(), EST_IN], rows)?;
        self.estimator_logits(g, est_bound, x)
    }

    fn estimator_loss(
        &self,
        g: &mut Graph<f32>,
        out: Var,
        entries: &[BbEntry],
        label_smoothing: f64,
    ) -> Result<Var, EstiNetError> {
        let mut gold = Vec::with_capacity(entries.len() * 2);
        for e in entries {
            let OutputValue::Boolean(b) = e.label else {
                return Err(EstiNetError::Config("comparison label is not boolean".into()));
            };
            gold.extend(one_hot(b as usize, 2));
        }
        Ok(label_smoothing_loss(g, out, &gold, label_smoothing, None)?)
    }

    fn estimator_output_matches(&self, row: &[f32], entry: &BbEntry) -> bool {
        matches!(entry.label, OutputValue::Boolean(b) if argmax(row) == b as usize)
    }

    fn estimator_row_width(&self) -> usize {
        2
    }

    fn infer(
        &self,
        g: &mut Graph<f32>,
        arg_bound: &Bound,
        sample: &Self::Sample,
    ) -> Result<OutputValue, EstiNetError> {
        let (class_matrix, ex) = self.extract(g, arg_bound, &sample.question)?;
        let n_tokens = g.shape(class_matrix)[0];
        let token_values: Vec<Vec<f32>> = (0..n_tokens)
            .map(|t| g.values(class_matrix)[t * EMBED_DIM..(t + 1) * EMBED_DIM].to_vec())
            .collect();
        let shim = SampleFwd {
            first_dist: ex.first_dist,
            second_dist: ex.second_dist,
            op_dist: ex.op_dist,
            numerics: ex.numerics,
            token_values,
        };
        let args = self.harden_one(g, &shim, None)?;
        Ok(self.bbf.call(&args)?)
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
        matches!(out, OutputValue::Boolean(b) if *b == sample.label)
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
        for (s, f) in batch.iter().zip(&fwd.per_sample) {
            if adapt_hard(g.values(f.first_dist)) == s.x_token {
                correct += 1;
            }
            if adapt_hard(g.values(f.second_dist)) == s.y_token {
                correct += 1;
            }
            if adapt_hard(g.values(f.op_dist)) == s.op.index() {
                correct += 1;
            }
        }
        Some((correct, batch.len() * 3))
    }

    fn prediction_entropy(&self, g: &Graph<f32>, fwd: &Self::Fwd) -> Option<f64> {
        Some(mean_row_entropy(g.values(fwd.prediction), 2))
    }
}

/// The comparison operator corresponding to a hardened op class.
pub fn op_from_class(class: usize) -> Result<CompareOp, BbError> {
    CompareOp::from_index(class)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::framework::training::sample_online;
    use crate::tasks::text_logic::gen_text_logic;

    #[test]
    fn selector_produces_one_logit_per_token() {
        let (model, mut params) = TextLogicModel::build(1);
        let samples = gen_text_logic(4, 2, "t").unwrap();
        let mut g = Graph::new();
        let ab = params.extractor.bind(&mut g);
        let eb = params.estimator.bind(&mut g);
        let fwd = model.forward(&mut g, &ab, &eb, &samples, None).unwrap();
        for (s, f) in samples.iter().zip(&fwd.per_sample) {
            let n_tokens = tokenize(&s.question).len();
            assert_eq!(g.shape(f.first_dist), &[1, n_tokens]);
        }
        assert_eq!(g.shape(fwd.prediction), &[4, 2]);
        // Gradient reaches extractor parameters through the estimator.
        let loss = model.target_loss(&mut g, &fwd, &samples, 0.0).unwrap();
        g.backward(loss).unwrap();
        assert!(params.extractor.take_grads(&g, &ab) > 0.0);
    }

    #[test]
    fn mixed_prediction_rows_are_log_distributions() {
        let (model, mut params) = TextLogicModel::build(2);
        let samples = gen_text_logic(3, 9, "t").unwrap();
        let mut g = Graph::new();
        let ab = params.extractor.bind(&mut g);
        let eb = params.estimator.bind(&mut g);
        let fwd = model.forward(&mut g, &ab, &eb, &samples, None).unwrap();
        for row in g.values(fwd.prediction).chunks(2) {
            let total: f32 = row.iter().map(|lp| lp.exp()).sum();
            assert!((total - 1.0).abs() < 1e-4, "sums to {total}");
        }
    }

    #[test]
    fn online_entries_pair_selected_values_with_exact_labels() {
        let (model, params) = TextLogicModel::build(3);
        let samples = gen_text_logic(20, 4, "t").unwrap();
        let ds = sample_online(&model, &params, &samples).unwrap();
        // Word-token selections decode to whatever their embeddings hold;
        // all recorded labels are exact for the recorded arguments.
        assert_eq!(ds.len() + ds.skipped, 20);
        for e in &ds.entries {
            let (ArgValue::Scalar(x), ArgValue::Scalar(y), ArgValue::Class(op)) =
                (&e.args[0], &e.args[1], &e.args[2])
            else {
                panic!("bad args");
            };
            let expected = crate::blackbox::bb_compare(
                *x,
                *y,
                CompareOp::from_index(*op).unwrap(),
            )
            .unwrap();
            assert_eq!(e.label, OutputValue::Boolean(expected));
        }
    }

    #[test]
    fn planted_perfect_selection_infers_the_gold_label() {
        let (model, _) = TextLogicModel::build(5);
        let samples = gen_text_logic(50, 6, "t").unwrap();
        for s in &samples {
            let args = vec![
                ArgValue::Scalar(s.x as f64),
                ArgValue::Scalar(s.y as f64),
                ArgValue::Class(s.op.index()),
            ];
            let out = model.blackbox().call(&args).unwrap();
            assert_eq!(out, OutputValue::Boolean(s.label));
        }
    }
}
