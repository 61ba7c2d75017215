//! Text-Lookup-Logic: three selectors (operation, column, scalar argument)
//! drive a five-way row-logic function over one table column. The estimator
//! is a transformer encoder over the 25 rows, each row fed the soft column
//! mix, the soft scalar vector, and the operation distribution, emitting a
//! per-row two-way selection.

use rand::SeedableRng;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::graph::{Graph, Var};
use crate::autodiff::loss::{label_smoothing_loss, masked_cross_entropy, smooth_targets};
use crate::autodiff::params::Bound;
use crate::autodiff::params::glorot;
use crate::blackbox::{
    adapt_hard, ArgValue, BbError, BlackBoxFunction, OutputValue, TableOp, TABLE_OPS,
};
use crate::framework::dataset::{BbEntry, BlackBoxDataset, Provenance};
use crate::framework::{EstiNetError, EstiNetTask, ModelParams};
use crate::nn::{Activation, Dense, EmbeddingTable, Lstm, SelectorHead, TransformerEncoder};
use crate::tasks::number_encoding::{decode_number, encode_number, DEFAULT_REDUNDANCY, DEFAULT_WIDTH};
use crate::tasks::tll::{tll_vocab, TllSample, NUMERIC_COLUMNS, TABLE_ROWS};
use crate::tasks::tokenizer::{tokenize, Vocab};

use super::{argmax, mean_row_entropy, one_hot};

const EMBED_DIM: usize = DEFAULT_WIDTH;
const RNN_DIM: usize = 50;
const OP_CLASS_DIM: usize = 32;
const ROW_IN: usize = EMBED_DIM + EMBED_DIM + 5;

/// Estimator shape knobs; the appendix leaves layer and head counts open.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TllModelConfig {
    pub layers: usize,
    pub heads: usize,
    pub width: usize,
    pub ff_width: usize,
}

impl Default for TllModelConfig {
    fn default() -> Self {
        TllModelConfig { layers: 2, heads: 4, width: 64, ff_width: 128 }
    }
}

pub struct TllModel {
    vocab: Vocab,
    embedding: EmbeddingTable,
    lstm: Lstm,
    op_classes: usize,
    select_op: SelectorHead,
    select_column: SelectorHead,
    select_scalar: SelectorHead,
    input_proj: Dense,
    position: usize,
    encoder: TransformerEncoder,
    row_head: Dense,
    bbf: BlackBoxFunction,
}

struct SampleFwd {
    op_dist: Var,
    column_dist: Var,
    scalar_dist: Var,
    numerics: Vec<Option<f32>>,
    /// Token vectors as values; non-numeric scalar selections decode these.
    token_values: Vec<Vec<f32>>,
    columns: Vec<Vec<f64>>,
    /// Soft column mix (`[25, d]`) and soft scalar vector; online queries
    /// decode these.
    est_input: Var,
    scalar_vec: Var,
}

pub struct TllFwd {
    per_sample: Vec<SampleFwd>,
    /// `[batch * 25, 2]` row logits.
    prediction: Var,
    entropy_rows: Var,
}

impl TllModel {
    pub fn build(cfg: TllModelConfig, seed: u64) -> Result<(Self, ModelParams), EstiNetError> {
        let mut params = ModelParams::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vocab = tll_vocab();
        let embedding =
            EmbeddingTable::new(&mut params.extractor, &mut rng, "embedding", vocab.size(), EMBED_DIM);
        let lstm = Lstm::new(&mut params.extractor, &mut rng, "encoder", EMBED_DIM, RNN_DIM);
        let op_classes = params
            .extractor
            .register("op_classes", glorot(&mut rng, vec![5, OP_CLASS_DIM]));
        let select_op =
            SelectorHead::new(&mut params.extractor, &mut rng, "select_op", RNN_DIM, OP_CLASS_DIM);
        let select_column =
            SelectorHead::new(&mut params.extractor, &mut rng, "select_column", RNN_DIM, EMBED_DIM);
        let select_scalar =
            SelectorHead::new(&mut params.extractor, &mut rng, "select_scalar", RNN_DIM, EMBED_DIM);
        let input_proj = Dense::new(
            &mut params.estimator,
            &mut rng,
            "est.input_proj",
            ROW_IN,
            cfg.width,
            Activation::Linear,
        );
        let position = params
            .estimator
            .register("est.position", glorot(&mut rng, vec![TABLE_ROWS, cfg.width]));
        let encoder = TransformerEncoder::new(
            &mut params.estimator,
            &mut rng,
            "est.encoder",
            cfg.layers,
            cfg.width,
            cfg.heads,
            cfg.ff_width,
        )?;
        let row_head = Dense::new(
            &mut params.estimator,
            &mut rng,
            "est.row_head",
            cfg.width,
            2,
            Activation::Linear,
        );
        let model = TllModel {
            vocab,
            embedding,
            lstm,
            op_classes,
            select_op,
            select_column,
            select_scalar,
            input_proj,
            position,
            encoder,
            row_head,
            bbf: BlackBoxFunction::table_logic(),
        };
        Ok((model, params))
    }

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

    /// Cell encodings of the table, laid out so a `[1, 4]` column
    /// distribution times this `[4, 25 * d]` matrix mixes whole columns.
    fn cell_matrix(&self, g: &mut Graph<f32>, sample: &TllSample) -> Result<Var, EstiNetError> {
        let mut values = Vec::with_capacity(NUMERIC_COLUMNS * TABLE_ROWS * EMBED_DIM);
        for c in 0..NUMERIC_COLUMNS {
            for r in 0..TABLE_ROWS {
                values.extend(encode_number(
                    sample.table.cells[r * NUMERIC_COLUMNS + c] as f32,
                    DEFAULT_REDUNDANCY,
                    EMBED_DIM,
                )?);
            }
        }
        Ok(g.constant(vec![NUMERIC_COLUMNS, TABLE_ROWS * EMBED_DIM], values)?)
    }

    fn extract(
        &self,
        g: &mut Graph<f32>,
        arg_bound: &Bound,
        sample: &TllSample,
        mut noise: Option<&mut ChaCha8Rng>,
    ) -> Result<SampleExtraction, EstiNetError> {
        let (rows, numerics) = self.token_rows(g, arg_bound, &sample.question)?;
        let token_matrix = g.concat(&rows, 0)?;
        let n_tokens = g.shape(token_matrix)[0];
        let token_values: Vec<Vec<f32>> = (0..n_tokens)
            .map(|t| g.values(token_matrix)[t * EMBED_DIM..(t + 1) * EMBED_DIM].to_vec())
            .collect();
        let query = self.lstm.last_hidden(g, arg_bound, &rows)?;
        let select = |g: &mut Graph<f32>, logits: Var, rng: &mut Option<&mut ChaCha8Rng>| {
            match rng {
                Some(r) => crate::nn::gumbel_softmax_select(g, *r, logits, 1.0, false),
                None => Ok(g.softmax(logits)),
            }
        };
        let op_logits =
            self.select_op
                .logits(g, arg_bound, query, arg_bound.var(self.op_classes))?;
        let op_dist = select(g, op_logits, &mut noise)?;
        let header_groups: Vec<Vec<usize>> = sample
            .table
            .headers
            .iter()
            .map(|h| {
                h.split_whitespace()
                    .flat_map(|w| self.vocab.pieces(w))
                    .collect()
            })
            .collect();
        let header_matrix = self.embedding.token_vectors(g, arg_bound, header_groups)?;
        let column_logits = self.select_column.logits(g, arg_bound, query, header_matrix)?;
        let column_dist = select(g, column_logits, &mut noise)?;
        let scalar_logits = self.select_scalar.logits(g, arg_bound, query, token_matrix)?;
        let scalar_dist = select(g, scalar_logits, &mut noise)?;
        let scalar_vec = g.matmul(scalar_dist, token_matrix)?;
        Ok(SampleExtraction {
            op_dist,
            column_dist,
            scalar_dist,
            scalar_vec,
            numerics,
            token_values,
        })
    }

    /// Transformer estimator over one sample's 25 rows.
    fn estimator_rows(
        &self,
        g: &mut Graph<f32>,
        est_bound: &Bound,
        mixed_cells: Var,
        scalar_vec: Var,
        op_dist: Var,
    ) -> Result<Var, EstiNetError> {
        let ones = g.constant(vec![TABLE_ROWS, 1], vec![1.0; TABLE_ROWS])?;
        let scalar_rows = g.matmul(ones, scalar_vec)?;
        let op_rows = g.matmul(ones, op_dist)?;
        let rows_in = g.concat(&[mixed_cells, scalar_rows, op_rows], 1)?;
        let projected = self.input_proj.forward(g, est_bound, rows_in)?;
        let positioned = g.add(projected, est_bound.var(self.position))?;
        let encoded = self.encoder.forward(g, est_bound, positioned)?;
        Ok(self.row_head.forward(g, est_bound, encoded)?)
    }

    fn harden_one(
        &self,
        g: &Graph<f32>,
        s: &SampleFwd,
        rng: Option<&mut ChaCha8Rng>,
    ) -> Result<Vec<ArgValue>, BbError> {
        let mut select: Box<dyn FnMut(&[f32]) -> usize> = match rng {
            Some(r) => Box::new(move |d| super::sample_index(d, r)),
            None => Box::new(|d| adapt_hard(d)),
        };
        let op_class = select(g.values(s.op_dist));
        let op = TableOp::from_index(op_class)?;
        let col = select(g.values(s.column_dist));
        let column = s.columns[col].clone();
        let scalar = if op.needs_scalar() {
            let idx = select(g.values(s.scalar_dist));
            let v = match s.numerics[idx] {
                Some(v) => v,
                None => decode_number(&s.token_values[idx], DEFAULT_REDUNDANCY, EMBED_DIM)
                    .map_err(|e| BbError::Domain(e.to_string()))?,
            };
            if !v.is_finite() {
                return Err(BbError::Domain(format!(
                    "token {idx} decodes to non-finite value"
                )));
            }
            ArgValue::Scalar(v as f64)
        } else {
            ArgValue::None
        };
        Ok(vec![ArgValue::Class(op_class), ArgValue::Vector(column), scalar])
    }

    /// Row targets (`[25 * n, 2]` one-hots) from binary answers.
    fn row_targets(answers: &[Vec<bool>]) -> Vec<f32> {
        let mut gold = Vec::with_capacity(answers.len() * TABLE_ROWS * 2);
        for a in answers {
            for &sel in a {
                gold.extend(one_hot(sel as usize, 2));
            }
        }
        gold
    }

    fn rows_match(row_logits: &[f32], answer: &[bool]) -> bool {
        row_logits
            .chunks(2)
            .zip(answer)
            .all(|(pair, &sel)| argmax(pair) == sel as usize)
    }
}

struct SampleExtraction {
    op_dist: Var,
    column_dist: Var,
    scalar_dist: Var,
    scalar_vec: Var,
    numerics: Vec<Option<f32>>,
    token_values: Vec<Vec<f32>>,
}

impl EstiNetTask for TllModel {
    type Sample = TllSample;
    type Fwd = TllFwd;

    fn name(&self) -> &'static str {
        "text-lookup-logic"
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
        mut selection_noise: Option<&mut ChaCha8Rng>,
    ) -> Result<Self::Fwd, EstiNetError> {
        let mut per_sample = Vec::with_capacity(batch.len());
        let mut pred_rows = Vec::with_capacity(batch.len());
        let mut entropy_cells = Vec::with_capacity(batch.len());
        for s in batch {
            let ex = self.extract(g, arg_bound, s, selection_noise.as_deref_mut())?;
            let cells = self.cell_matrix(g, s)?;
            let mixed_flat = g.matmul(ex.column_dist, cells)?;
            let mixed_cells = g.reshape(mixed_flat, vec![TABLE_ROWS, EMBED_DIM])?;
            let logits =
                self.estimator_rows(g, est_bound, mixed_cells, ex.scalar_vec, ex.op_dist)?;
            pred_rows.push(logits);
            let h1 = crate::autodiff::loss::entropy_rows(g, ex.op_dist)?;
            let h2 = crate::autodiff::loss::entropy_rows(g, ex.column_dist)?;
            let h3 = crate::autodiff::loss::entropy_rows(g, ex.scalar_dist)?;
            let h12 = g.add(h1, h2)?;
            let h = g.add(h12, h3)?;
            entropy_cells.push(h);
            per_sample.push(SampleFwd {
                op_dist: ex.op_dist,
                column_dist: ex.column_dist,
                scalar_dist: ex.scalar_dist,
                numerics: ex.numerics,
                token_values: ex.token_values,
                columns: (0..NUMERIC_COLUMNS).map(|c| s.table.column(c)).collect(),
                est_input: mixed_cells,
                scalar_vec: ex.scalar_vec,
            });
        }
        let prediction = g.concat(&pred_rows, 0)?;
        let entropy_rows = g.concat(&entropy_cells, 0)?;
        Ok(TllFwd { per_sample, prediction, entropy_rows })
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
        let answers: Vec<Vec<bool>> = batch.iter().map(|s| s.answer.clone()).collect();
        let gold = Self::row_targets(&answers);
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

    /// Online adaptation decodes the soft column mix row by row and the soft
    /// scalar vector, so the black box answers for the program the estimator
    /// actually sees.
    fn sample_args(
        &self,
        g: &Graph<f32>,
        fwd: &Self::Fwd,
        _batch: &[Self::Sample],
        _rng: &mut ChaCha8Rng,
    ) -> Vec<Result<Vec<ArgValue>, BbError>> {
        fwd.per_sample
            .iter()
            .map(|s| {
                let op_class = adapt_hard(g.values(s.op_dist));
                let op = TableOp::from_index(op_class)?;
                let cells = g.values(s.est_input);
                let mut column = Vec::with_capacity(TABLE_ROWS);
                for r in 0..TABLE_ROWS {
                    let v = decode_number(
                        &cells[r * EMBED_DIM..(r + 1) * EMBED_DIM],
                        DEFAULT_REDUNDANCY,
                        EMBED_DIM,
                    )
                    .map_err(|e| BbError::Domain(e.to_string()))?;
                    if !v.is_finite() {
                        return Err(BbError::Domain(format!(
                            "row {r} decodes to non-finite value"
                        )));
                    }
                    column.push(v as f64);
                }
                let scalar = if op.needs_scalar() {
                    let v = decode_number(g.values(s.scalar_vec), DEFAULT_REDUNDANCY, EMBED_DIM)
                        .map_err(|e| BbError::Domain(e.to_string()))?;
                    if !v.is_finite() {
                        return Err(BbError::Domain(
                            "scalar selection decodes to non-finite value".into(),
                        ));
                    }
                    ArgValue::Scalar(v as f64)
                } else {
                    ArgValue::None
                };
                Ok(vec![ArgValue::Class(op_class), ArgValue::Vector(column), scalar])
            })
            .collect()
    }

    fn soft_inputs(&self, g: &Graph<f32>, fwd: &Self::Fwd) -> Vec<Option<Vec<Vec<f32>>>> {
        fwd.per_sample
            .iter()
            .map(|s| {
                Some(vec![
                    g.values(s.est_input).to_vec(),
                    g.values(s.scalar_vec).to_vec(),
                    g.values(s.op_dist).to_vec(),
                ])
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
        let mut gold = Vec::with_capacity(labels.len() * TABLE_ROWS * 2);
        let mut mask = Vec::with_capacity(labels.len() * TABLE_ROWS);
        for l in labels {
            match l {
                Some(OutputValue::BinaryVector(rows)) => {
                    for &sel in rows {
                        gold.extend(one_hot(sel as usize, 2));
                        mask.push(true);
                    }
                }
                _ => {
                    for _ in 0..TABLE_ROWS {
                        gold.extend([0.5f32, 0.5]);
                        mask.push(false);
                    }
                }
            }
        }
        let smoothed =
            smooth_targets(&gold, &[labels.len() * TABLE_ROWS, 2], label_smoothing, None)?;
        Ok(masked_cross_entropy(g, fwd.prediction, &smoothed, &mask)?)
    }

    fn sample_offline(
        &self,
        n: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<BlackBoxDataset, EstiNetError> {
        if n == 0 {
            return Err(EstiNetError::Config("offline sample size must be positive".into()));
        }
        // Uniform over the train-table generation ranges.
        let mut ds = BlackBoxDataset::default();
        for _ in 0..n {
            let column: Vec<f64> =
                (0..TABLE_ROWS).map(|_| rng.random_range(1..=100) as f64).collect();
            let op = TABLE_OPS[rng.random_range(0..TABLE_OPS.len())];
            let scalar = if op.needs_scalar() {
                ArgValue::Scalar(rng.random_range(1..=100) as f64)
            } else {
                ArgValue::None
            };
            let args = vec![ArgValue::Class(op.index()), ArgValue::Vector(column), scalar];
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
        let mut outputs = Vec::with_capacity(entries.len());
        for e in entries {
            let (mixed_cells, scalar_vec, op_dist) = match &e.soft_inputs {
                Some(inputs) => (
                    g.constant(vec![TABLE_ROWS, EMBED_DIM], inputs[0].clone())?,
                    g.constant(vec![1, EMBED_DIM], inputs[1].clone())?,
                    g.constant(vec![1, 5], inputs[2].clone())?,
                ),
                None => {
                    let ArgValue::Class(opc) = e.args[0] else {
                        return Err(EstiNetError::Config("bad table-logic op".into()));
                    };
                    let ArgValue::Vector(column) = &e.args[1] else {
                        return Err(EstiNetError::Config("bad table-logic column".into()));
                    };
                    let mut cells = Vec::with_capacity(TABLE_ROWS * EMBED_DIM);
                    for &v in column {
                        cells.extend(encode_number(v as f32, DEFAULT_REDUNDANCY, EMBED_DIM)?);
                    }
                    let scalar = match &e.args[2] {
                        ArgValue::Scalar(v) => {
                            encode_number(*v as f32, DEFAULT_REDUNDANCY, EMBED_DIM)?
                        }
                        _ => vec![0.0; EMBED_DIM],
                    };
                    (
                        g.constant(vec![TABLE_ROWS, EMBED_DIM], cells)?,
                        g.constant(vec![1, EMBED_DIM], scalar)?,
                        g.constant(vec![1, 5], one_hot(opc, 5))?,
                    )
                }
            };
            outputs.push(self.estimator_rows(g, est_bound, mixed_cells, scalar_vec, op_dist)?);
        }
        Ok(g.concat(&outputs, 0)?)
    }

    fn estimator_loss(
        &self,
        g: &mut Graph<f32>,
        out: Var,
        entries: &[BbEntry],
        label_smoothing: f64,
    ) -> Result<Var, EstiNetError> {
        let answers: Vec<Vec<bool>> = entries
            .iter()
            .map(|e| match &e.label {
                OutputValue::BinaryVector(v) => Ok(v.clone()),
                _ => Err(EstiNetError::Config("table-logic label is not binary rows".into())),
            })
            .collect::<Result<_, _>>()?;
        let gold = Self::row_targets(&answers);
        Ok(label_smoothing_loss(g, out, &gold, label_smoothing, None)?)
    }

    fn estimator_output_matches(&self, row: &[f32], entry: &BbEntry) -> bool {
        matches!(&entry.label, OutputValue::BinaryVector(answer) if Self::rows_match(row, answer))
    }

    fn estimator_row_width(&self) -> usize {
        TABLE_ROWS * 2
    }

    fn infer(
        &self,
        g: &mut Graph<f32>,
        arg_bound: &Bound,
        sample: &Self::Sample,
    ) -> Result<OutputValue, EstiNetError> {
        let ex = self.extract(g, arg_bound, sample, None)?;
        let shim = SampleFwd {
            op_dist: ex.op_dist,
            column_dist: ex.column_dist,
            scalar_dist: ex.scalar_dist,
            numerics: ex.numerics,
            token_values: ex.token_values,
            columns: (0..NUMERIC_COLUMNS).map(|c| sample.table.column(c)).collect(),
            // Unused by the hardening adapter.
            est_input: ex.op_dist,
            scalar_vec: ex.scalar_vec,
        };
        let args = self.harden_one(g, &shim, None)?;
        Ok(self.bbf.call(&args)?)
    }

    fn prediction_matches(&self, row: &[f32], sample: &Self::Sample) -> bool {
        Self::rows_match(row, &sample.answer)
    }

    fn prediction_error(&self, row: &[f32], sample: &Self::Sample) -> f64 {
        if self.prediction_matches(row, sample) {
            0.0
        } else {
            1.0
        }
    }

    fn output_matches(&self, out: &OutputValue, sample: &Self::Sample) -> bool {
        matches!(out, OutputValue::BinaryVector(rows) if rows == &sample.answer)
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
        for (s, f) in batch.iter().zip(&fwd.per_sample) {
            if adapt_hard(g.values(f.op_dist)) == s.gold_op.index() {
                correct += 1;
            }
            total += 1;
            if adapt_hard(g.values(f.column_dist)) == s.gold_column {
                correct += 1;
            }
            total += 1;
            if let Some(tok) = s.gold_scalar_token {
                if adapt_hard(g.values(f.scalar_dist)) == tok {
                    correct += 1;
                }
                total += 1;
            }
        }
        Some((correct, total))
    }

    fn prediction_entropy(&self, g: &Graph<f32>, fwd: &Self::Fwd) -> Option<f64> {
        Some(mean_row_entropy(g.values(fwd.prediction), 2))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::framework::training::sample_online;
    use crate::tasks::tll::gen_tll;

    fn tiny_cfg() -> TllModelConfig {
        TllModelConfig { layers: 1, heads: 2, width: 32, ff_width: 64 }
    }

    #[test]
    fn forward_emits_two_way_logits_for_every_row() {
        let ds = gen_tll(6, 1, 3).unwrap();
        let (model, mut params) = TllModel::build(tiny_cfg(), 1).unwrap();
        let mut g = Graph::new();
        let ab = params.extractor.bind(&mut g);
        let eb = params.estimator.bind(&mut g);
        let fwd = model.forward(&mut g, &ab, &eb, &ds.train[..3], None).unwrap();
        assert_eq!(g.shape(fwd.prediction), &[3 * TABLE_ROWS, 2]);
        let loss = model.target_loss(&mut g, &fwd, &ds.train[..3], 0.1).unwrap();
        g.backward(loss).unwrap();
        assert!(params.extractor.take_grads(&g, &ab) > 0.0);
    }

    #[test]
    fn online_entries_are_exactly_labeled() {
        let ds = gen_tll(12, 1, 5).unwrap();
        let (model, params) = TllModel::build(tiny_cfg(), 2).unwrap();
        let online = sample_online(&model, &params, &ds.train).unwrap();
        assert_eq!(online.len() + online.skipped, 12);
        for e in &online.entries {
            let again = model.blackbox().call(&e.args).unwrap();
            assert_eq!(again, e.label);
        }
    }

    #[test]
    fn planted_gold_program_reproduces_the_answer() {
        let ds = gen_tll(30, 5, 7).unwrap();
        let (model, _) = TllModel::build(tiny_cfg(), 3).unwrap();
        for s in ds.train.iter().chain(&ds.test) {
            let scalar = match s.gold_scalar {
                Some(v) => ArgValue::Scalar(v),
                None => ArgValue::None,
            };
            let args = vec![
                ArgValue::Class(s.gold_op.index()),
                ArgValue::Vector(s.table.column(s.gold_column)),
                scalar,
            ];
            let out = model.blackbox().call(&args).unwrap();
            assert_eq!(out, OutputValue::BinaryVector(s.answer.clone()));
        }
    }

    #[test]
    fn offline_estimator_pass_runs_on_pure_arguments() {
        let (model, params) = TllModel::build(tiny_cfg(), 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let ds = model.sample_offline(6, &mut rng).unwrap();
        let mut g = Graph::new();
        let eb = params.estimator.bind(&mut g);
        let out = model.estimator_forward(&mut g, &eb, &ds.entries).unwrap();
        assert_eq!(g.shape(out), &[6 * TABLE_ROWS, 2]);
    }
}
