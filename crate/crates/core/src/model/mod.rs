//! The sentence-pair entailment classifier: frozen embeddings, a shared
//! LSTM encoder, projected inner-product attention with linear
//! normalization, and a feed-forward classification head, trained with
//! cross-entropy plus three multiple-instance-learning regularizers on
//! the attention distributions.

pub mod checkpoint;
mod train;

pub use train::{train, EpochStats, TrainConfig, TrainLog};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{EmbeddingTable, Label, SentencePairInstance, Vocabulary};
use crate::numerics::{NodeId, NumericsError, Tape, Tensor};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("token id {id} out of range for vocabulary of {vocab} entries")]
    TokenIdOutOfRange { id: usize, vocab: usize },
    #[error("cannot encode an empty sentence")]
    EmptySentence,
    #[error("invalid regularizer weights: {0}")]
    InvalidWeights(String),
    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Diverged { epoch: usize, loss: f64 },
    #[error("empty batch")]
    EmptyBatch,
    #[error("checkpoint i/o on {path}: {source}")]
    CheckpointIo {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("checkpoint format: {0}")]
    CheckpointFormat(String),
    #[error("checkpoint vocabulary fingerprint {found:#x} does not match expected {expected:#x}")]
    VocabularyMismatch { expected: u64, found: u64 },
}

/// Threshold below which a predicted class probability is clamped before
/// the log in cross-entropy.
pub const PROB_FLOOR: f64 = 1e-12;
/// Entries at or below this are treated as zero by the smallest-nonzero
/// attention regularizer.
pub const R3_EPSILON: f64 = 1e-8;

/// How the classifier pools token encodings with attention weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    /// Attention-weighted sum over all tokens (default).
    WeightedSum,
    /// Final attention weight times the final hidden state.
    FinalToken,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub embed_dim: usize,
    /// LSTM cell and hidden dimension.
    pub hidden: usize,
    /// Output width of the attention projection.
    pub attend_dim: usize,
    /// Width of the two hidden classifier layers.
    pub cls_hidden: usize,
    pub pooling: Pooling,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            embed_dim: 300,
            hidden: 200,
            attend_dim: 200,
            cls_hidden: 200,
            pooling: Pooling::WeightedSum,
        }
    }
}

/// Loss weights for the three attention regularizers plus the selection
/// threshold used when attention is turned into explanations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularizerWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub tau: f64,
}

impl RegularizerWeights {
    pub fn new(alpha: f64, beta: f64, gamma: f64, tau: f64) -> Result<Self, ModelError> {
        if alpha < 0.0 || beta < 0.0 || gamma < 0.0 {
            return Err(ModelError::InvalidWeights(format!(
                "negative weight in ({alpha}, {beta}, {gamma})"
            )));
        }
        if !(0.0..1.0).contains(&tau) {
            return Err(ModelError::InvalidWeights(format!(
                "tau must lie in [0, 1), got {tau}"
            )));
        }
        Ok(RegularizerWeights {
            alpha,
            beta,
            gamma,
            tau,
        })
    }

    pub fn unregularized(tau: f64) -> Self {
        RegularizerWeights::new(0.0, 0.0, 0.0, tau).expect("zero weights are valid")
    }
}

impl Default for RegularizerWeights {
    fn default() -> Self {
        RegularizerWeights {
            alpha: 1.0,
            beta: 1.0,
            gamma: 1.0,
            tau: 0.1,
        }
    }
}

/// LSTM weights with gates stacked in [input, forget, cell, output] order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    /// [4H × d]
    pub w_x: Tensor,
    /// [4H × H]
    pub w_h: Tensor,
    /// [4H]
    pub bias: Tensor,
}

/// All trainable parameters plus the frozen embedding table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub embeddings: EmbeddingTable,
    pub lstm: LstmParams,
    /// [H × attend_dim]
    pub attend_w: Tensor,
    /// [attend_dim]
    pub attend_b: Tensor,
    /// [cls_hidden × 2H]
    pub cls_w1: Tensor,
    pub cls_b1: Tensor,
    /// [cls_hidden × cls_hidden]
    pub cls_w2: Tensor,
    pub cls_b2: Tensor,
    /// [3 × cls_hidden]
    pub cls_w3: Tensor,
    pub cls_b3: Tensor,
}

fn uniform_init(rng: &mut ChaCha8Rng, shape: &[usize], fan_in: usize) -> Tensor {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    let n: usize = shape.iter().product();
    let values = (0..n).map(|_| rng.gen_range(-bound..bound)).collect();
    Tensor::new(shape.to_vec(), values).unwrap()
}

impl ModelParams {
    /// Seeded initialization; embeddings are taken as-is and stay frozen.
    pub fn init(config: ModelConfig, embeddings: EmbeddingTable, seed: u64) -> Self {
        assert_eq!(
            embeddings.dim(),
            config.embed_dim,
            "embedding table dimension must match the config"
        );
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (d, h, p, c) = (
            config.embed_dim,
            config.hidden,
            config.attend_dim,
            config.cls_hidden,
        );
        ModelParams {
            config,
            embeddings,
            lstm: LstmParams {
                w_x: uniform_init(&mut rng, &[4 * h, d], d),
                w_h: uniform_init(&mut rng, &[4 * h, h], h),
                bias: Tensor::zeros(&[4 * h]),
            },
            attend_w: uniform_init(&mut rng, &[h, p], h),
            attend_b: uniform_init(&mut rng, &[p], h),
            cls_w1: uniform_init(&mut rng, &[c, 2 * h], 2 * h),
            cls_b1: Tensor::zeros(&[c]),
            cls_w2: uniform_init(&mut rng, &[c, c], c),
            cls_b2: Tensor::zeros(&[c]),
            cls_w3: uniform_init(&mut rng, &[3, c], c),
            cls_b3: Tensor::zeros(&[3]),
        }
    }

    /// Trainable tensors in a fixed, documented order. The embedding
    /// table is intentionally absent: it is frozen.
    pub fn param_entries(&self) -> Vec<(&'static str, &Tensor)> {
        vec![
            ("lstm.w_x", &self.lstm.w_x),
            ("lstm.w_h", &self.lstm.w_h),
            ("lstm.bias", &self.lstm.bias),
            ("attend_w", &self.attend_w),
            ("attend_b", &self.attend_b),
            ("cls_w1", &self.cls_w1),
            ("cls_b1", &self.cls_b1),
            ("cls_w2", &self.cls_w2),
            ("cls_b2", &self.cls_b2),
            ("cls_w3", &self.cls_w3),
            ("cls_b3", &self.cls_b3),
        ]
    }

    pub fn param_entries_mut(&mut self) -> Vec<(&'static str, &mut Tensor)> {
        vec![
            ("lstm.w_x", &mut self.lstm.w_x),
            ("lstm.w_h", &mut self.lstm.w_h),
            ("lstm.bias", &mut self.lstm.bias),
            ("attend_w", &mut self.attend_w),
            ("attend_b", &mut self.attend_b),
            ("cls_w1", &mut self.cls_w1),
            ("cls_b1", &mut self.cls_b1),
            ("cls_w2", &mut self.cls_w2),
            ("cls_b2", &mut self.cls_b2),
            ("cls_w3", &mut self.cls_w3),
            ("cls_b3", &mut self.cls_b3),
        ]
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.param_entries()
            .iter()
            .flat_map(|(_, t)| t.values().to_vec())
            .collect()
    }

    pub fn load_flat(&mut self, flat: &[f64]) {
        let mut offset = 0;
        for (_, t) in self.param_entries_mut() {
            let n = t.len();
            t.values_mut().copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        assert_eq!(offset, flat.len(), "flat parameter vector length mismatch");
    }
}

/// Tape ids of the bound trainable parameters for one forward pass.
#[derive(Debug, Clone, Copy)]
pub struct BoundParams {
    pub lstm_w_x: NodeId,
    pub lstm_w_h: NodeId,
    pub lstm_bias: NodeId,
    pub attend_w: NodeId,
    pub attend_b: NodeId,
    pub cls_w1: NodeId,
    pub cls_b1: NodeId,
    pub cls_w2: NodeId,
    pub cls_b2: NodeId,
    pub cls_w3: NodeId,
    pub cls_b3: NodeId,
}

impl BoundParams {
    pub fn bind(tape: &mut Tape, params: &ModelParams) -> Self {
        BoundParams {
            lstm_w_x: tape.leaf(params.lstm.w_x.clone()),
            lstm_w_h: tape.leaf(params.lstm.w_h.clone()),
            lstm_bias: tape.leaf(params.lstm.bias.clone()),
            attend_w: tape.leaf(params.attend_w.clone()),
            attend_b: tape.leaf(params.attend_b.clone()),
            cls_w1: tape.leaf(params.cls_w1.clone()),
            cls_b1: tape.leaf(params.cls_b1.clone()),
            cls_w2: tape.leaf(params.cls_w2.clone()),
            cls_b2: tape.leaf(params.cls_b2.clone()),
            cls_w3: tape.leaf(params.cls_w3.clone()),
            cls_b3: tape.leaf(params.cls_b3.clone()),
        }
    }

    /// Node ids in the same order as [`ModelParams::param_entries`].
    pub fn ids(&self) -> Vec<NodeId> {
        vec![
            self.lstm_w_x,
            self.lstm_w_h,
            self.lstm_bias,
            self.attend_w,
            self.attend_b,
            self.cls_w1,
            self.cls_b1,
            self.cls_w2,
            self.cls_b2,
            self.cls_w3,
            self.cls_b3,
        ]
    }
}

/// An instance with token ids resolved against a vocabulary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedInstance {
    pub premise_ids: Vec<usize>,
    pub hypothesis_ids: Vec<usize>,
    pub label: Label,
}

pub fn encode_corpus(
    vocab: &Vocabulary,
    instances: &[SentencePairInstance],
) -> Vec<EncodedInstance> {
    instances
        .iter()
        .map(|inst| EncodedInstance {
            premise_ids: vocab.encode(&inst.premise_tokens),
            hypothesis_ids: vocab.encode(&inst.hypothesis_tokens),
            label: inst.label,
        })
        .collect()
}

/// Run the shared LSTM over a token id sequence, producing the stacked
/// hidden states as a [len × H] node. Premise and hypothesis use the same
/// weights; embeddings enter as constants (frozen).
pub fn encode_sentence(
    tape: &mut Tape,
    bound: &BoundParams,
    params: &ModelParams,
    token_ids: &[usize],
) -> Result<NodeId, ModelError> {
    if token_ids.is_empty() {
        return Err(ModelError::EmptySentence);
    }
    let h_dim = params.config.hidden;
    let vocab = params.embeddings.vocab_size();

    let mut h_prev = tape.leaf(Tensor::zeros(&[h_dim]));
    let mut c_prev = tape.leaf(Tensor::zeros(&[h_dim]));
    let mut states = Vec::with_capacity(token_ids.len());
    for &id in token_ids {
        if id >= vocab {
            return Err(ModelError::TokenIdOutOfRange { id, vocab });
        }
        let x = tape.leaf(Tensor::vector(params.embeddings.row(id).to_vec()));
        let wx = tape.matvec(bound.lstm_w_x, x)?;
        let wh = tape.matvec(bound.lstm_w_h, h_prev)?;
        let pre = tape.add(wx, wh)?;
        let gates = tape.add(pre, bound.lstm_bias)?;
        let i_gate = tape.slice(gates, 0, h_dim)?;
        let f_gate = tape.slice(gates, h_dim, h_dim)?;
        let g_gate = tape.slice(gates, 2 * h_dim, h_dim)?;
        let o_gate = tape.slice(gates, 3 * h_dim, h_dim)?;
        let i_act = tape.sigmoid(i_gate);
        let f_act = tape.sigmoid(f_gate);
        let g_act = tape.tanh(g_gate);
        let o_act = tape.sigmoid(o_gate);
        let retain = tape.mul(f_act, c_prev)?;
        let write = tape.mul(i_act, g_act)?;
        let c_new = tape.add(retain, write)?;
        let c_tanh = tape.tanh(c_new);
        let h_new = tape.mul(o_act, c_tanh)?;
        states.push(h_new);
        h_prev = h_new;
        c_prev = c_new;
    }
    Ok(tape.stack_rows(&states)?)
}

/// Attention node bundle for one pair.
#[derive(Debug, Clone, Copy)]
pub struct AttentionNodes {
    /// Raw score matrix Ã (m × n), non-negative by construction.
    pub score_matrix: NodeId,
    /// Raw premise scores: the final column of Ã.
    pub premise_raw: NodeId,
    /// Raw hypothesis scores: the final row of Ã.
    pub hypothesis_raw: NodeId,
    /// Normalized distribution over premise tokens.
    pub premise_dist: NodeId,
    /// Normalized distribution over hypothesis tokens.
    pub hypothesis_dist: NodeId,
    /// True when the corresponding raw vector was all zero and the
    /// distribution fell back to uniform (constant, no gradient).
    pub premise_fallback: bool,
    pub hypothesis_fallback: bool,
}

/// Normalize a non-negative raw score vector into an attention
/// distribution, substituting the uniform distribution when every score
/// is zero.
fn normalize_or_uniform(tape: &mut Tape, raw: NodeId) -> Result<(NodeId, bool), ModelError> {
    match tape.l1_normalize(raw) {
        Ok(node) => Ok((node, false)),
        Err(NumericsError::DegenerateL1) => {
            let n = tape.value(raw).len();
            log::warn!("all-zero attention scores; falling back to uniform over {n} tokens");
            let uniform = tape.leaf(Tensor::vector(vec![1.0 / n as f64; n]));
            Ok((uniform, true))
        }
        Err(e) => Err(e.into()),
    }
}

/// Project both encodings through the shared feed-forward layer (ReLU,
/// which keeps every score non-negative), form the inner-product score
/// matrix, and derive the two attention distributions by linear
/// normalization of the final column and row.
pub fn attend(
    tape: &mut Tape,
    bound: &BoundParams,
    h_p: NodeId,
    h_h: NodeId,
) -> Result<AttentionNodes, ModelError> {
    let u_lin = tape.matmul(h_p, bound.attend_w)?;
    let u_aff = tape.add_bias(u_lin, bound.attend_b)?;
    let u = tape.relu(u_aff);
    let v_lin = tape.matmul(h_h, bound.attend_w)?;
    let v_aff = tape.add_bias(v_lin, bound.attend_b)?;
    let v = tape.relu(v_aff);
    let score_matrix = tape.matmul_tb(u, v)?;
    debug_assert!(tape.value(score_matrix).values().iter().all(|s| *s >= 0.0));
    attention_from_scores(tape, score_matrix)
}

/// Derive raw score vectors and normalized distributions from a
/// non-negative m × n score matrix: the premise side reads the final
/// column, the hypothesis side the final row.
pub(crate) fn attention_from_scores(
    tape: &mut Tape,
    score_matrix: NodeId,
) -> Result<AttentionNodes, ModelError> {
    let (m, n) = (
        tape.value(score_matrix).rows(),
        tape.value(score_matrix).cols(),
    );
    let premise_raw = tape.col(score_matrix, n - 1)?;
    let hypothesis_raw = tape.row(score_matrix, m - 1)?;
    let (premise_dist, premise_fallback) = normalize_or_uniform(tape, premise_raw)?;
    let (hypothesis_dist, hypothesis_fallback) = normalize_or_uniform(tape, hypothesis_raw)?;
    Ok(AttentionNodes {
        score_matrix,
        premise_raw,
        hypothesis_raw,
        premise_dist,
        hypothesis_dist,
        premise_fallback,
        hypothesis_fallback,
    })
}

/// Pool one side's hidden states with its attention distribution.
fn pool_side(
    tape: &mut Tape,
    h: NodeId,
    dist: NodeId,
    pooling: Pooling,
) -> Result<NodeId, ModelError> {
    match pooling {
        Pooling::WeightedSum => {
            let scaled = tape.scale_rows(h, dist)?;
            Ok(tape.sum_rows(scaled)?)
        }
        Pooling::FinalToken => {
            let last = tape.value(h).rows() - 1;
            let h_last = tape.row(h, last)?;
            let dist_len = tape.value(dist).len();
            let a_last = tape.pick(dist, dist_len - 1)?;
            Ok(tape.scale_by(h_last, a_last)?)
        }
    }
}

/// Classification head: pooled encodings are concatenated and passed
/// through two ReLU layers and a softmax output layer.
pub fn classify(
    tape: &mut Tape,
    bound: &BoundParams,
    attention: &AttentionNodes,
    h_p: NodeId,
    h_h: NodeId,
    pooling: Pooling,
) -> Result<NodeId, ModelError> {
    let c_p = pool_side(tape, h_p, attention.premise_dist, pooling)?;
    let c_h = pool_side(tape, h_h, attention.hypothesis_dist, pooling)?;
    let joint = tape.concat(&[c_p, c_h]);

    let z1 = tape.matvec(bound.cls_w1, joint)?;
    let z1 = tape.add(z1, bound.cls_b1)?;
    let a1 = tape.relu(z1);
    let z2 = tape.matvec(bound.cls_w2, a1)?;
    let z2 = tape.add(z2, bound.cls_b2)?;
    let a2 = tape.relu(z2);
    let logits = tape.matvec(bound.cls_w3, a2)?;
    let logits = tape.add(logits, bound.cls_b3)?;
    Ok(tape.softmax(logits)?)
}

/// Negative log-likelihood of the gold label under the predicted
/// distribution, with the probability clamped at [`PROB_FLOOR`].
pub fn cross_entropy(tape: &mut Tape, yhat: NodeId, gold: Label) -> Result<NodeId, ModelError> {
    let p = tape.pick(yhat, gold.index())?;
    if tape.value(p).scalar_value() < PROB_FLOOR {
        log::warn!(
            "predicted probability {} for gold class clamped to {PROB_FLOOR}",
            tape.value(p).scalar_value()
        );
    }
    let clamped = tape.clamp_min(p, PROB_FLOOR);
    let logp = tape.unary_apply(clamped, crate::numerics::UnaryFn::Log)?;
    Ok(tape.scale(logp, -1.0))
}

/// R1: summed Shannon entropy of the two attention distributions.
pub fn r1_entropy(tape: &mut Tape, a_p: NodeId, a_h: NodeId) -> Result<NodeId, ModelError> {
    let h_p = tape.entropy(a_p);
    let h_h = tape.entropy(a_h);
    Ok(tape.add(h_p, h_h)?)
}

/// R2: squared gap between each side's max attention weight and its
/// target — 1 for the hypothesis always, 1 for the premise unless the
/// gold label is neutral (then 0: no premise tokens should be selected).
pub fn r2_max(
    tape: &mut Tape,
    a_p: NodeId,
    a_h: NodeId,
    gold: Label,
) -> Result<NodeId, ModelError> {
    let premise_target = if gold == Label::Neutral { 0.0 } else { 1.0 };
    let max_p = tape.max_elem(a_p);
    let gap_p = tape.add_const(max_p, -premise_target);
    let sq_p = tape.mul(gap_p, gap_p)?;
    let max_h = tape.max_elem(a_h);
    let gap_h = tape.add_const(max_h, -1.0);
    let sq_h = tape.mul(gap_h, gap_h)?;
    Ok(tape.add(sq_p, sq_h)?)
}

/// R3: squared smallest non-zero attention weight on each side. A side
/// with no entry above [`R3_EPSILON`] contributes nothing.
pub fn r3_min(tape: &mut Tape, a_p: NodeId, a_h: NodeId) -> Result<NodeId, ModelError> {
    let min_p = tape.min_positive(a_p, R3_EPSILON);
    let sq_p = tape.mul(min_p, min_p)?;
    let min_h = tape.min_positive(a_h, R3_EPSILON);
    let sq_h = tape.mul(min_h, min_h)?;
    Ok(tape.add(sq_p, sq_h)?)
}

/// Full forward pass for one pair, leaving every intermediate on the tape.
pub struct PairForward {
    pub h_p: NodeId,
    pub h_h: NodeId,
    pub attention: AttentionNodes,
    pub yhat: NodeId,
}

pub fn forward_pair(
    tape: &mut Tape,
    bound: &BoundParams,
    params: &ModelParams,
    premise_ids: &[usize],
    hypothesis_ids: &[usize],
) -> Result<PairForward, ModelError> {
    let h_p = encode_sentence(tape, bound, params, premise_ids)?;
    let h_h = encode_sentence(tape, bound, params, hypothesis_ids)?;
    let attention = attend(tape, bound, h_p, h_h)?;
    let yhat = classify(tape, bound, &attention, h_p, h_h, params.config.pooling)?;
    Ok(PairForward {
        h_p,
        h_h,
        attention,
        yhat,
    })
}

/// Attention outputs extracted from a finished forward pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionOutputs {
    /// Raw score matrix Ã (m × n).
    pub score_matrix: Tensor,
    /// Normalized distribution over premise tokens.
    pub premise_dist: Vec<f64>,
    /// Normalized distribution over hypothesis tokens.
    pub hypothesis_dist: Vec<f64>,
}

impl AttentionOutputs {
    /// Raw premise scores: the final column of Ã.
    pub fn premise_raw(&self) -> Vec<f64> {
        let n = self.score_matrix.cols();
        (0..self.score_matrix.rows())
            .map(|i| self.score_matrix.get2(i, n - 1))
            .collect()
    }

    /// Raw hypothesis scores: the final row of Ã.
    pub fn hypothesis_raw(&self) -> Vec<f64> {
        let m = self.score_matrix.rows();
        (0..self.score_matrix.cols())
            .map(|j| self.score_matrix.get2(m - 1, j))
            .collect()
    }
}

/// A finished prediction: class distribution plus attention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub class_distribution: [f64; 3],
    pub attention: AttentionOutputs,
}

impl Prediction {
    pub fn predicted_label(&self) -> Label {
        let mut best = 0;
        for i in 1..3 {
            if self.class_distribution[i] > self.class_distribution[best] {
                best = i;
            }
        }
        Label::from_index(best)
    }
}

/// Inference entry point: run one pair and extract plain values.
pub fn predict(
    params: &ModelParams,
    premise_ids: &[usize],
    hypothesis_ids: &[usize],
) -> Result<Prediction, ModelError> {
    let mut tape = Tape::new();
    let bound = BoundParams::bind(&mut tape, params);
    let fwd = forward_pair(&mut tape, &bound, params, premise_ids, hypothesis_ids)?;
    let yhat = tape.value(fwd.yhat).values();
    let prediction = Prediction {
        class_distribution: [yhat[0], yhat[1], yhat[2]],
        attention: AttentionOutputs {
            score_matrix: tape.value(fwd.attention.score_matrix).clone(),
            premise_dist: tape.value(fwd.attention.premise_dist).values().to_vec(),
            hypothesis_dist: tape.value(fwd.attention.hypothesis_dist).values().to_vec(),
        },
    };
    debug_assert!(
        prediction.attention.score_matrix.is_finite()
            && prediction.class_distribution.iter().all(|p| p.is_finite()),
        "non-finite values after forward pass"
    );
    Ok(prediction)
}

/// Batch objective: Σ cross-entropy + α Σ R1 + β Σ R2 + γ Σ R3.
pub fn total_loss(
    tape: &mut Tape,
    bound: &BoundParams,
    params: &ModelParams,
    batch: &[EncodedInstance],
    weights: &RegularizerWeights,
) -> Result<NodeId, ModelError> {
    if batch.is_empty() {
        return Err(ModelError::EmptyBatch);
    }
    let mut terms = Vec::new();
    for inst in batch {
        let fwd = forward_pair(tape, bound, params, &inst.premise_ids, &inst.hypothesis_ids)?;
        terms.push(cross_entropy(tape, fwd.yhat, inst.label)?);
        let a = &fwd.attention;
        if weights.alpha != 0.0 {
            let r1 = r1_entropy(tape, a.premise_dist, a.hypothesis_dist)?;
            terms.push(tape.scale(r1, weights.alpha));
        }
        if weights.beta != 0.0 {
            let r2 = r2_max(tape, a.premise_dist, a.hypothesis_dist, inst.label)?;
            terms.push(tape.scale(r2, weights.beta));
        }
        if weights.gamma != 0.0 {
            let r3 = r3_min(tape, a.premise_dist, a.hypothesis_dist)?;
            terms.push(tape.scale(r3, weights.gamma));
        }
    }
    let stacked = tape.concat(&terms);
    Ok(tape.sum(stacked))
}

/// Objective value at the current parameters.
pub fn loss_value(
    params: &ModelParams,
    batch: &[EncodedInstance],
    weights: &RegularizerWeights,
) -> Result<f64, ModelError> {
    let mut tape = Tape::new();
    let bound = BoundParams::bind(&mut tape, params);
    let loss = total_loss(&mut tape, &bound, params, batch, weights)?;
    Ok(tape.value(loss).scalar_value())
}

/// Objective value and analytic gradients, ordered like
/// [`ModelParams::param_entries`].
pub fn loss_gradients(
    params: &ModelParams,
    batch: &[EncodedInstance],
    weights: &RegularizerWeights,
) -> Result<(f64, Vec<Tensor>), ModelError> {
    let mut tape = Tape::new();
    let bound = BoundParams::bind(&mut tape, params);
    let loss = total_loss(&mut tape, &bound, params, batch, weights)?;
    let grads = tape.backward(loss)?;
    let out = bound
        .ids()
        .into_iter()
        .map(|id| grads.for_node(id))
        .collect();
    Ok((tape.value(loss).scalar_value(), out))
}

/// Shannon entropy (natural log) of a probability vector.
pub fn shannon_entropy(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|v| **v > 0.0)
        .map(|v| v * v.ln())
        .sum::<f64>()
}

#[cfg(test)]
mod tests;
