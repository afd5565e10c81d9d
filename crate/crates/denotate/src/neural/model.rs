//! The neural identifier: trainable embeddings feed a bidirectional LSTM
//! whose per-position outputs are projected to scalars and softmaxed along
//! the sequence, giving each position a probability of being the denotation.
//!
//! Everything is plain `f64` vectors; the network is small enough (8 units)
//! that explicit loops keep the backward pass auditable against finite
//! differences.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kb::EntityId;

use super::adam::{AdamConfig, AdamState};
use super::encode::EncodedSequence;
use super::pretrained::PretrainedTable;
use super::vocab::{Token, Vocabulary};

/// Architecture switches and sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelConfig {
    pub embedding_dim: usize,
    pub hidden_size: usize,
    /// Width of the pretrained slot in the input vector; it is filled with
    /// zeros when pretrained vectors are disabled or missing.
    pub pretrained_dim: usize,
    pub use_positional: bool,
    pub use_pretrained: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            embedding_dim: 8,
            hidden_size: 8,
            pretrained_dim: 10,
            use_positional: true,
            use_pretrained: false,
        }
    }
}

const INIT_SCALE: f64 = 0.08;
const FORGET_BIAS: f64 = 1.0;
const PROB_FLOOR: f64 = 1e-12;

/// One LSTM direction's weights, gate rows ordered `[input, forget, cell,
/// output]`, matrices flattened row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmCell {
    pub w_x: Vec<f64>, // 4H x D
    pub w_h: Vec<f64>, // 4H x H
    pub b: Vec<f64>,   // 4H
}

impl LstmCell {
    fn init(hidden: usize, input_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut w_x = vec![0.0; 4 * hidden * input_dim];
        let mut w_h = vec![0.0; 4 * hidden * hidden];
        for w in w_x.iter_mut().chain(w_h.iter_mut()) {
            *w = rng.random_range(-INIT_SCALE..INIT_SCALE);
        }
        let mut b = vec![0.0; 4 * hidden];
        for r in hidden..2 * hidden {
            b[r] = FORGET_BIAS;
        }
        LstmCell { w_x, w_h, b }
    }

    fn zeros_like(other: &LstmCell) -> Self {
        LstmCell {
            w_x: vec![0.0; other.w_x.len()],
            w_h: vec![0.0; other.w_h.len()],
            b: vec![0.0; other.b.len()],
        }
    }
}

/// All trainable tensors. Gradients reuse this shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub embeddings: Vec<f64>, // vocab x E
    pub fwd: LstmCell,
    pub bwd: LstmCell,
    pub out_w: Vec<f64>, // 2H
    pub out_b: Vec<f64>, // 1
}

impl Params {
    pub fn zeros_like(&self) -> Params {
        Params {
            embeddings: vec![0.0; self.embeddings.len()],
            fwd: LstmCell::zeros_like(&self.fwd),
            bwd: LstmCell::zeros_like(&self.bwd),
            out_w: vec![0.0; self.out_w.len()],
            out_b: vec![0.0; 1],
        }
    }

    pub fn tensors(&self) -> Vec<(&'static str, &Vec<f64>)> {
        vec![
            ("embeddings", &self.embeddings),
            ("fwd_w_x", &self.fwd.w_x),
            ("fwd_w_h", &self.fwd.w_h),
            ("fwd_b", &self.fwd.b),
            ("bwd_w_x", &self.bwd.w_x),
            ("bwd_w_h", &self.bwd.w_h),
            ("bwd_b", &self.bwd.b),
            ("out_w", &self.out_w),
            ("out_b", &self.out_b),
        ]
    }

    pub fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Vec<f64>)> {
        vec![
            ("embeddings", &mut self.embeddings),
            ("fwd_w_x", &mut self.fwd.w_x),
            ("fwd_w_h", &mut self.fwd.w_h),
            ("fwd_b", &mut self.fwd.b),
            ("bwd_w_x", &mut self.bwd.w_x),
            ("bwd_w_h", &mut self.bwd.w_h),
            ("bwd_b", &mut self.bwd.b),
            ("out_w", &mut self.out_w),
            ("out_b", &mut self.out_b),
        ]
    }
}

/// The trained (or trainable) model: vocabulary, parameters, the fixed
/// pretrained table, and optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuralModel {
    vocab: Vocabulary,
    config: ModelConfig,
    params: Params,
    pretrained: Option<PretrainedTable>,
    opt: AdamState,
}

// per-direction forward intermediates, indexed by processing step
struct DirectionTrace {
    times: Vec<usize>,
    gate_i: Vec<Vec<f64>>,
    gate_f: Vec<Vec<f64>>,
    gate_g: Vec<Vec<f64>>,
    gate_o: Vec<Vec<f64>>,
    cell: Vec<Vec<f64>>,
    tanh_cell: Vec<Vec<f64>>,
    hidden: Vec<Vec<f64>>,
}

impl DirectionTrace {
    fn hidden_by_time(&self) -> Vec<&Vec<f64>> {
        let mut by_time: Vec<&Vec<f64>> = Vec::with_capacity(self.times.len());
        let mut slots: Vec<Option<&Vec<f64>>> = vec![None; self.times.len()];
        for (s, &t) in self.times.iter().enumerate() {
            slots[t] = Some(&self.hidden[s]);
        }
        for slot in slots {
            by_time.push(slot.expect("every time index visited"));
        }
        by_time
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl NeuralModel {
    /// Fresh model with seeded initialization. Requires the pretrained
    /// table's dimension to match `config.pretrained_dim` when enabled.
    pub fn new(
        vocab: Vocabulary,
        config: ModelConfig,
        pretrained: Option<PretrainedTable>,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::init_with_rng(vocab, config, pretrained, &mut rng)
    }

    pub fn init_with_rng(
        vocab: Vocabulary,
        config: ModelConfig,
        pretrained: Option<PretrainedTable>,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        if config.embedding_dim == 0 || config.hidden_size == 0 {
            return Err(Error::InvalidConfig("zero-sized model dimensions".into()));
        }
        if config.use_pretrained {
            match &pretrained {
                None => {
                    return Err(Error::InvalidConfig(
                        "use_pretrained set but no pretrained table given".into(),
                    ))
                }
                Some(t) if t.dim() != config.pretrained_dim => {
                    return Err(Error::InvalidConfig(format!(
                        "pretrained table dimension {} does not match configured {}",
                        t.dim(),
                        config.pretrained_dim
                    )));
                }
                _ => {}
            }
        }
        let input_dim = Self::input_dim_for(&config, &vocab);
        let mut embeddings = vec![0.0; vocab.size() * config.embedding_dim];
        for e in embeddings.iter_mut() {
            *e = rng.random_range(-INIT_SCALE..INIT_SCALE);
        }
        let fwd = LstmCell::init(config.hidden_size, input_dim, rng);
        let bwd = LstmCell::init(config.hidden_size, input_dim, rng);
        let mut out_w = vec![0.0; 2 * config.hidden_size];
        for w in out_w.iter_mut() {
            *w = rng.random_range(-INIT_SCALE..INIT_SCALE);
        }
        Ok(NeuralModel {
            vocab,
            config,
            params: Params {
                embeddings,
                fwd,
                bwd,
                out_w,
                out_b: vec![0.0],
            },
            pretrained,
            opt: AdamState::new(),
        })
    }

    fn input_dim_for(config: &ModelConfig, vocab: &Vocabulary) -> usize {
        config.embedding_dim
            + config.pretrained_dim
            + if config.use_positional {
                vocab.question_positions() + 2
            } else {
                0
            }
    }

    pub fn input_dim(&self) -> usize {
        Self::input_dim_for(&self.config, &self.vocab)
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut Params {
        &mut self.params
    }

    pub fn set_params(&mut self, params: Params) {
        self.params = params;
    }

    pub fn optimizer_steps(&self) -> u64 {
        self.opt.step_count()
    }

    // Input vector: trainable embedding ++ pretrained slot ++ positional
    // one-hot (when enabled). Entity tokens and out-of-table words leave the
    // pretrained slot zero.
    fn input_vector(&self, seq: &EncodedSequence, t: usize) -> Vec<f64> {
        let e = self.config.embedding_dim;
        let mut x = vec![0.0; self.input_dim()];
        let row = seq.token_indices[t];
        x[..e].copy_from_slice(&self.params.embeddings[row * e..(row + 1) * e]);
        if self.config.use_pretrained {
            if let Token::Word(word) = &seq.tokens[t] {
                if let Some(v) = self.pretrained.as_ref().and_then(|p| p.get(word)) {
                    x[e..e + self.config.pretrained_dim].copy_from_slice(v);
                }
            }
        }
        if self.config.use_positional {
            let p = self.vocab.question_positions();
            let idx = seq.positional[t].one_hot_index(p);
            x[e + self.config.pretrained_dim + idx] = 1.0;
        }
        x
    }

    fn run_direction(&self, cell: &LstmCell, xs: &[Vec<f64>], times: Vec<usize>) -> DirectionTrace {
        let h = self.config.hidden_size;
        let d = self.input_dim();
        let steps = times.len();
        let mut trace = DirectionTrace {
            times,
            gate_i: Vec::with_capacity(steps),
            gate_f: Vec::with_capacity(steps),
            gate_g: Vec::with_capacity(steps),
            gate_o: Vec::with_capacity(steps),
            cell: Vec::with_capacity(steps),
            tanh_cell: Vec::with_capacity(steps),
            hidden: Vec::with_capacity(steps),
        };
        let mut h_prev = vec![0.0; h];
        let mut c_prev = vec![0.0; h];
        for s in 0..steps {
            let t = trace.times[s];
            let x = &xs[t];
            let mut z = cell.b.clone();
            for (r, zr) in z.iter_mut().enumerate() {
                let mut acc = *zr;
                let wx_row = &cell.w_x[r * d..(r + 1) * d];
                for (c, xv) in x.iter().enumerate() {
                    acc += wx_row[c] * xv;
                }
                let wh_row = &cell.w_h[r * h..(r + 1) * h];
                for (j, hv) in h_prev.iter().enumerate() {
                    acc += wh_row[j] * hv;
                }
                *zr = acc;
            }
            let mut gi = vec![0.0; h];
            let mut gf = vec![0.0; h];
            let mut gg = vec![0.0; h];
            let mut go = vec![0.0; h];
            for j in 0..h {
                gi[j] = sigmoid(z[j]);
                gf[j] = sigmoid(z[h + j]);
                gg[j] = z[2 * h + j].tanh();
                go[j] = sigmoid(z[3 * h + j]);
            }
            let mut c = vec![0.0; h];
            let mut tc = vec![0.0; h];
            let mut hid = vec![0.0; h];
            for j in 0..h {
                c[j] = gf[j] * c_prev[j] + gi[j] * gg[j];
                tc[j] = c[j].tanh();
                hid[j] = go[j] * tc[j];
            }
            h_prev = hid.clone();
            c_prev = c.clone();
            trace.gate_i.push(gi);
            trace.gate_f.push(gf);
            trace.gate_g.push(gg);
            trace.gate_o.push(go);
            trace.cell.push(c);
            trace.tanh_cell.push(tc);
            trace.hidden.push(hid);
        }
        trace
    }

    fn forward_traced(
        &self,
        seq: &EncodedSequence,
    ) -> Result<(Vec<Vec<f64>>, DirectionTrace, DirectionTrace, Vec<f64>, Vec<f64>)> {
        if seq.is_empty() {
            return Err(Error::EmptyInput("cannot run the model on an empty sequence".into()));
        }
        let len = seq.len();
        let xs: Vec<Vec<f64>> = (0..len).map(|t| self.input_vector(seq, t)).collect();
        let fwd = self.run_direction(&self.params.fwd, &xs, (0..len).collect());
        let bwd = self.run_direction(&self.params.bwd, &xs, (0..len).rev().collect());
        let h = self.config.hidden_size;
        let fwd_h = fwd.hidden_by_time();
        let bwd_h = bwd.hidden_by_time();
        let mut logits = vec![self.params.out_b[0]; len];
        for t in 0..len {
            for j in 0..h {
                logits[t] += self.params.out_w[j] * fwd_h[t][j];
                logits[t] += self.params.out_w[h + j] * bwd_h[t][j];
            }
        }
        let probs = softmax(&logits);
        drop(fwd_h);
        drop(bwd_h);
        Ok((xs, fwd, bwd, logits, probs))
    }

    /// Per-position denotation probabilities (softmax over the sequence).
    pub fn forward(&self, seq: &EncodedSequence) -> Result<Vec<f64>> {
        self.forward_traced(seq).map(|(_, _, _, _, probs)| probs)
    }

    /// Argmax over positions with the answer-entity mask set, leftmost on
    /// ties. Errors when the sequence has no answer entities.
    pub fn predict(&self, seq: &EncodedSequence) -> Result<usize> {
        let probs = self.forward(seq)?;
        argmax_masked(&probs, &seq.answer_entity_mask).ok_or_else(|| {
            Error::InvalidArgument("sequence has no answer-entity positions to choose from".into())
        })
    }

    /// Like [`predict`](Self::predict) but resolves the entity id.
    pub fn predict_entity(&self, seq: &EncodedSequence) -> Result<EntityId> {
        let pos = self.predict(seq)?;
        seq.entity_at(pos)
            .cloned()
            .ok_or_else(|| Error::InvalidArgument("predicted position has no entity".into()))
    }

    /// Loss and exact gradients of the cross-entropy at `gold_position`
    /// w.r.t. every trainable tensor.
    pub fn backward(&self, seq: &EncodedSequence, gold_position: usize) -> Result<(f64, Params)> {
        let (xs, fwd, bwd, _logits, probs) = self.forward_traced(seq)?;
        let len = seq.len();
        if gold_position >= len {
            return Err(Error::InvalidArgument(format!(
                "gold position {gold_position} out of range for length {len}"
            )));
        }
        let loss = cross_entropy(&probs, gold_position);
        let h = self.config.hidden_size;

        // softmax + cross-entropy: dL/dlogit = p - onehot(gold)
        let mut dlogits = probs;
        dlogits[gold_position] -= 1.0;

        let mut grads = self.params.zeros_like();
        grads.out_b[0] = dlogits.iter().sum();
        let fwd_h = fwd.hidden_by_time();
        let bwd_h = bwd.hidden_by_time();
        for t in 0..len {
            for j in 0..h {
                grads.out_w[j] += dlogits[t] * fwd_h[t][j];
                grads.out_w[h + j] += dlogits[t] * bwd_h[t][j];
            }
        }
        let dh_fwd: Vec<Vec<f64>> = (0..len)
            .map(|t| (0..h).map(|j| dlogits[t] * self.params.out_w[j]).collect())
            .collect();
        let dh_bwd: Vec<Vec<f64>> = (0..len)
            .map(|t| (0..h).map(|j| dlogits[t] * self.params.out_w[h + j]).collect())
            .collect();
        drop(fwd_h);
        drop(bwd_h);

        let mut dxs = vec![vec![0.0; self.input_dim()]; len];
        self.bptt(&self.params.fwd, &fwd, &xs, &dh_fwd, &mut grads.fwd, &mut dxs);
        self.bptt(&self.params.bwd, &bwd, &xs, &dh_bwd, &mut grads.bwd, &mut dxs);

        // only the embedding slots of the input gradient are trainable
        let e = self.config.embedding_dim;
        for t in 0..len {
            let row = seq.token_indices[t];
            for k in 0..e {
                grads.embeddings[row * e + k] += dxs[t][k];
            }
        }
        Ok((loss, grads))
    }

    // backprop through one direction, accumulating cell gradients and
    // per-time input gradients
    fn bptt(
        &self,
        cell: &LstmCell,
        trace: &DirectionTrace,
        xs: &[Vec<f64>],
        dh_out: &[Vec<f64>],
        grads: &mut LstmCell,
        dxs: &mut [Vec<f64>],
    ) {
        let h = self.config.hidden_size;
        let d = self.input_dim();
        let steps = trace.times.len();
        let zeros = vec![0.0; h];
        let mut dh_carry = vec![0.0; h];
        let mut dc_carry = vec![0.0; h];
        for s in (0..steps).rev() {
            let t = trace.times[s];
            let h_prev = if s == 0 { &zeros } else { &trace.hidden[s - 1] };
            let c_prev = if s == 0 { &zeros } else { &trace.cell[s - 1] };
            let (gi, gf, gg, go) = (
                &trace.gate_i[s],
                &trace.gate_f[s],
                &trace.gate_g[s],
                &trace.gate_o[s],
            );
            let tc = &trace.tanh_cell[s];

            let mut dz = vec![0.0; 4 * h];
            let mut dc = vec![0.0; h];
            for j in 0..h {
                let dh = dh_out[t][j] + dh_carry[j];
                let do_ = dh * tc[j];
                dc[j] = dh * go[j] * (1.0 - tc[j] * tc[j]) + dc_carry[j];
                let di = dc[j] * gg[j];
                let df = dc[j] * c_prev[j];
                let dg = dc[j] * gi[j];
                dz[j] = di * gi[j] * (1.0 - gi[j]);
                dz[h + j] = df * gf[j] * (1.0 - gf[j]);
                dz[2 * h + j] = dg * (1.0 - gg[j] * gg[j]);
                dz[3 * h + j] = do_ * go[j] * (1.0 - go[j]);
            }

            let x = &xs[t];
            for r in 0..4 * h {
                grads.b[r] += dz[r];
                let wx_grad_row = &mut grads.w_x[r * d..(r + 1) * d];
                for (c, xv) in x.iter().enumerate() {
                    wx_grad_row[c] += dz[r] * xv;
                }
                let wh_grad_row = &mut grads.w_h[r * h..(r + 1) * h];
                for (j, hv) in h_prev.iter().enumerate() {
                    wh_grad_row[j] += dz[r] * hv;
                }
            }
            for c in 0..d {
                let mut acc = 0.0;
                for r in 0..4 * h {
                    acc += cell.w_x[r * d + c] * dz[r];
                }
                dxs[t][c] += acc;
            }
            for j in 0..h {
                let mut acc = 0.0;
                for r in 0..4 * h {
                    acc += cell.w_h[r * h + j] * dz[r];
                }
                dh_carry[j] = acc;
                dc_carry[j] = dc[j] * gf[j];
            }
        }
    }

    /// One Adam update from a gradient structure produced by
    /// [`backward`](Self::backward).
    pub fn adam_step(&mut self, grads: &Params, cfg: &AdamConfig) -> Result<()> {
        let params: Vec<&mut Vec<f64>> = self
            .params
            .tensors_mut()
            .into_iter()
            .map(|(_, t)| t)
            .collect();
        let grad_refs: Vec<&Vec<f64>> = grads.tensors().into_iter().map(|(_, t)| t).collect();
        self.opt.apply(params, grad_refs, cfg)
    }

    /// A copy of this model with the positional one-hot block removed from
    /// the input (shrinking it by `P + 2` slots). The ZERO symbol is active
    /// on every featureless position, so its column folds into the bias;
    /// on sequences whose features are all ZERO the two models compute
    /// identical outputs.
    pub fn without_positional_features(&self) -> NeuralModel {
        if !self.config.use_positional {
            return self.clone();
        }
        let keep = self.config.embedding_dim + self.config.pretrained_dim;
        let old_d = self.input_dim();
        let zero_col = old_d - 1;
        let trim = |cell: &LstmCell| -> LstmCell {
            let mut w_x = Vec::with_capacity(cell.b.len() * keep);
            let mut b = cell.b.clone();
            for r in 0..cell.b.len() {
                w_x.extend_from_slice(&cell.w_x[r * old_d..r * old_d + keep]);
                b[r] += cell.w_x[r * old_d + zero_col];
            }
            LstmCell {
                w_x,
                w_h: cell.w_h.clone(),
                b,
            }
        };
        NeuralModel {
            vocab: self.vocab.clone(),
            config: ModelConfig {
                use_positional: false,
                ..self.config
            },
            params: Params {
                embeddings: self.params.embeddings.clone(),
                fwd: trim(&self.params.fwd),
                bwd: trim(&self.params.bwd),
                out_w: self.params.out_w.clone(),
                out_b: self.params.out_b.clone(),
            },
            pretrained: self.pretrained.clone(),
            opt: AdamState::new(),
        }
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

/// `-ln(d[gold])` with the probability floored at 1e-12.
pub fn cross_entropy(probs: &[f64], gold: usize) -> f64 {
    -probs[gold].max(PROB_FLOOR).ln()
}

/// Index of the largest probability among masked positions, leftmost on
/// ties; `None` when the mask is empty.
pub fn argmax_masked(probs: &[f64], mask: &[bool]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, (p, m)) in probs.iter().zip(mask).enumerate() {
        if *m && best.map(|b| *p > probs[b]).unwrap_or(true) {
            best = Some(i);
        }
    }
    best
}

// ---------------------------------------------------------------------------
// checkpoint format: line-oriented text, f64s as hexadecimal bit patterns so
// save -> load -> forward is bit-identical
// ---------------------------------------------------------------------------

const CHECKPOINT_HEADER: &str = "denotate-checkpoint v1";

fn write_floats(out: &mut String, values: &[f64]) {
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(&format!("{:016x}", v.to_bits()));
    }
    out.push('\n');
}

fn parse_floats(line: &str, expect: usize) -> Result<Vec<f64>> {
    let values: Vec<f64> = line
        .split_whitespace()
        .map(|p| {
            u64::from_str_radix(p, 16)
                .map(f64::from_bits)
                .map_err(|_| Error::InvalidArgument(format!("bad float bits `{p}` in checkpoint")))
        })
        .collect::<Result<_>>()?;
    if values.len() != expect {
        return Err(Error::InvalidArgument(format!(
            "expected {expect} floats, found {}",
            values.len()
        )));
    }
    Ok(values)
}

impl NeuralModel {
    /// Serializes vocabulary, flags, `P`, the pretrained table, and all
    /// parameter tensors.
    pub fn to_checkpoint(&self) -> String {
        let mut out = String::new();
        out.push_str(CHECKPOINT_HEADER);
        out.push('\n');
        out.push_str(&format!("embedding_dim {}\n", self.config.embedding_dim));
        out.push_str(&format!("hidden_size {}\n", self.config.hidden_size));
        out.push_str(&format!("pretrained_dim {}\n", self.config.pretrained_dim));
        out.push_str(&format!("use_positional {}\n", self.config.use_positional));
        out.push_str(&format!("use_pretrained {}\n", self.config.use_pretrained));
        out.push_str(&format!(
            "question_positions {}\n",
            self.vocab.question_positions()
        ));

        let mut words: Vec<(&str, usize)> = self.vocab.words().collect();
        words.sort_by_key(|(_, i)| *i);
        out.push_str(&format!("vocab_words {}\n", words.len()));
        for (w, i) in words {
            out.push_str(&format!("{w}\t{i}\n"));
        }
        let mut entities: Vec<(&str, usize)> = self.vocab.entity_ids().collect();
        entities.sort_by_key(|(_, i)| *i);
        out.push_str(&format!("vocab_entities {}\n", entities.len()));
        for (e, i) in entities {
            out.push_str(&format!("{e}\t{i}\n"));
        }

        match &self.pretrained {
            None => out.push_str("pretrained 0 0\n"),
            Some(table) => {
                out.push_str(&format!("pretrained {} {}\n", table.len(), table.dim()));
                for (word, vector) in table.entries() {
                    out.push_str(word);
                    out.push('\t');
                    write_floats(&mut out, vector);
                }
            }
        }

        for (name, tensor) in self.params.tensors() {
            out.push_str(&format!("tensor {name} {}\n", tensor.len()));
            write_floats(&mut out, tensor);
        }
        out
    }

    /// Parses [`to_checkpoint`](Self::to_checkpoint) output. The optimizer
    /// state starts fresh.
    pub fn from_checkpoint(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let bad = |msg: &str| Error::InvalidArgument(format!("checkpoint: {msg}"));
        if lines.next() != Some(CHECKPOINT_HEADER) {
            return Err(bad("missing header"));
        }
        let scalar = |key: &str, lines: &mut std::str::Lines| -> Result<String> {
            let line = lines.next().ok_or_else(|| bad("truncated"))?;
            let (k, v) = line.split_once(' ').ok_or_else(|| bad("bad scalar line"))?;
            if k != key {
                return Err(bad(&format!("expected `{key}`, found `{k}`")));
            }
            Ok(v.to_owned())
        };
        let embedding_dim: usize = scalar("embedding_dim", &mut lines)?
            .parse()
            .map_err(|_| bad("bad embedding_dim"))?;
        let hidden_size: usize = scalar("hidden_size", &mut lines)?
            .parse()
            .map_err(|_| bad("bad hidden_size"))?;
        let pretrained_dim: usize = scalar("pretrained_dim", &mut lines)?
            .parse()
            .map_err(|_| bad("bad pretrained_dim"))?;
        let use_positional: bool = scalar("use_positional", &mut lines)?
            .parse()
            .map_err(|_| bad("bad use_positional"))?;
        let use_pretrained: bool = scalar("use_pretrained", &mut lines)?
            .parse()
            .map_err(|_| bad("bad use_pretrained"))?;
        let question_positions: usize = scalar("question_positions", &mut lines)?
            .parse()
            .map_err(|_| bad("bad question_positions"))?;

        let word_count: usize = scalar("vocab_words", &mut lines)?
            .parse()
            .map_err(|_| bad("bad vocab_words"))?;
        let mut words = Vec::with_capacity(word_count);
        for _ in 0..word_count {
            let line = lines.next().ok_or_else(|| bad("truncated vocab"))?;
            let (w, i) = line.split_once('\t').ok_or_else(|| bad("bad vocab line"))?;
            words.push((w.to_owned(), i.parse().map_err(|_| bad("bad vocab index"))?));
        }
        let entity_count: usize = scalar("vocab_entities", &mut lines)?
            .parse()
            .map_err(|_| bad("bad vocab_entities"))?;
        let mut entities = Vec::with_capacity(entity_count);
        for _ in 0..entity_count {
            let line = lines.next().ok_or_else(|| bad("truncated vocab"))?;
            let (e, i) = line.split_once('\t').ok_or_else(|| bad("bad vocab line"))?;
            entities.push((e.to_owned(), i.parse().map_err(|_| bad("bad vocab index"))?));
        }
        let vocab = Vocabulary::from_parts(words, entities, question_positions);

        let pretrained_line = lines.next().ok_or_else(|| bad("truncated"))?;
        let parts: Vec<&str> = pretrained_line.split(' ').collect();
        if parts.len() != 3 || parts[0] != "pretrained" {
            return Err(bad("bad pretrained line"));
        }
        let pre_count: usize = parts[1].parse().map_err(|_| bad("bad pretrained count"))?;
        let pre_dim: usize = parts[2].parse().map_err(|_| bad("bad pretrained dim"))?;
        let pretrained = if pre_count == 0 && pre_dim == 0 {
            None
        } else {
            let mut entries = Vec::with_capacity(pre_count);
            for _ in 0..pre_count {
                let line = lines.next().ok_or_else(|| bad("truncated pretrained"))?;
                let (word, rest) = line.split_once('\t').ok_or_else(|| bad("bad pretrained line"))?;
                entries.push((word.to_owned(), parse_floats(rest, pre_dim)?));
            }
            Some(PretrainedTable::from_entries(entries)?)
        };

        let config = ModelConfig {
            embedding_dim,
            hidden_size,
            pretrained_dim,
            use_positional,
            use_pretrained,
        };
        let input_dim = Self::input_dim_for(&config, &vocab);
        let h = hidden_size;
        let expected: Vec<(&str, usize)> = vec![
            ("embeddings", vocab.size() * embedding_dim),
            ("fwd_w_x", 4 * h * input_dim),
            ("fwd_w_h", 4 * h * h),
            ("fwd_b", 4 * h),
            ("bwd_w_x", 4 * h * input_dim),
            ("bwd_w_h", 4 * h * h),
            ("bwd_b", 4 * h),
            ("out_w", 2 * h),
            ("out_b", 1),
        ];
        let mut tensors: Vec<Vec<f64>> = Vec::with_capacity(expected.len());
        for (name, len) in &expected {
            let header = lines.next().ok_or_else(|| bad("truncated tensors"))?;
            let fields: Vec<&str> = header.split(' ').collect();
            if fields.len() != 3 || fields[0] != "tensor" || fields[1] != *name {
                return Err(bad(&format!("expected tensor `{name}`")));
            }
            let stored: usize = fields[2].parse().map_err(|_| bad("bad tensor length"))?;
            if stored != *len {
                return Err(bad(&format!(
                    "tensor `{name}` length {stored} does not match expected {len}"
                )));
            }
            let data = lines.next().ok_or_else(|| bad("truncated tensor data"))?;
            tensors.push(parse_floats(data, *len)?);
        }
        let mut it = tensors.into_iter();
        let params = Params {
            embeddings: it.next().unwrap(),
            fwd: LstmCell {
                w_x: it.next().unwrap(),
                w_h: it.next().unwrap(),
                b: it.next().unwrap(),
            },
            bwd: LstmCell {
                w_x: it.next().unwrap(),
                w_h: it.next().unwrap(),
                b: it.next().unwrap(),
            },
            out_w: it.next().unwrap(),
            out_b: it.next().unwrap(),
        };
        Ok(NeuralModel {
            vocab,
            config,
            params,
            pretrained,
            opt: AdamState::new(),
        })
    }
}
