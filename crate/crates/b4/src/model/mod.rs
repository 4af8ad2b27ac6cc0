//! The representation stack: marker-augmented tokenization, text
//! prototypes, price-to-concept cross attention, fusion, a small
//! trainable encoder, head extraction and bias attention maps.

mod params;
mod vocab;

pub use params::{init_params, param_names, BoundParams, Checkpoint, ParamSet};
pub use vocab::{split_words, tokenize_augment, TokenSequence, Vocabulary, CLS, DOWN, NUM_SPECIALS, PAD, UP};

use serde::{Deserialize, Serialize};

use crate::error::{DataError, TensorError};
use crate::ingest::PriceWindow;
use crate::tensor::{Tape, Tensor, Var};

const LN_EPS: f64 = 1e-5;

/// Model dimensions. Desk-scale defaults; everything is configurable.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct ModelConfig {
    /// Model width d.
    pub d: usize,
    /// Attention key width for P2C.
    pub d_k: usize,
    /// Number of text prototypes m.
    pub prototypes: usize,
    /// Encoder layers.
    pub layers: usize,
    /// Token sequence length L.
    pub seq_len: usize,
    /// Vocabulary size V (includes the 4 specials).
    pub vocab_size: usize,
    /// Seed of the hashing tokenizer.
    pub hash_seed: u64,
    /// Add positional embeddings to text tokens.
    #[serde(default = "default_true")]
    pub positional: bool,
}

fn default_true() -> bool {
    true
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            d: 32,
            d_k: 16,
            prototypes: 16,
            layers: 2,
            seq_len: 64,
            vocab_size: 4096,
            hash_seed: 17,
            positional: true,
        }
    }
}

impl ModelConfig {
    pub fn ff_hidden(&self) -> usize {
        4 * self.d
    }

    pub fn validate(&self) -> Result<(), DataError> {
        if self.d == 0 || self.d_k == 0 || self.prototypes == 0 {
            return Err(DataError::Config("model dims must be positive".into()));
        }
        if self.seq_len < NUM_SPECIALS {
            return Err(DataError::Config(format!(
                "seq_len must be at least {NUM_SPECIALS}"
            )));
        }
        if self.vocab_size <= NUM_SPECIALS {
            return Err(DataError::Config("vocab_size too small".into()));
        }
        if self.prototypes > self.vocab_size {
            return Err(DataError::Config(
                "prototype count cannot exceed vocabulary size".into(),
            ));
        }
        Ok(())
    }
}

/// Head vectors pulled out of the encoder output.
#[derive(Debug, Clone)]
pub struct MarketHeads {
    pub h_mar: Vec<f64>,
    pub h_bu: Vec<f64>,
    pub h_be: Vec<f64>,
}

impl MarketHeads {
    /// h_Comp row selected by the trend label (row 0 = UP, row 1 = DOWN).
    pub fn comp_star(&self, bullish: bool) -> &[f64] {
        if bullish {
            &self.h_bu
        } else {
            &self.h_be
        }
    }
}

/// Per-position attention from the bull and bear head vectors, and their
/// signed difference.
#[derive(Debug, Clone)]
pub struct AttentionMaps {
    pub a_bu: Vec<f64>,
    pub a_be: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Tape handles produced by one sample forward pass.
pub struct SampleForward {
    /// Encoder output h, (L+δ)×d.
    pub h: Var,
    /// Rows [CLS],[UP],[DOWN] of h as a 3×d block.
    pub heads: Var,
    /// Length of the fused sequence.
    pub fused_len: usize,
}

pub struct Model {
    pub cfg: ModelConfig,
    pub vocab: Vocabulary,
    pub params: ParamSet,
}

impl Model {
    pub fn init(cfg: ModelConfig, seed: u64) -> Result<Self, DataError> {
        cfg.validate()?;
        let vocab = Vocabulary::new(cfg.vocab_size, cfg.hash_seed)?;
        let params = init_params(&cfg, seed);
        Ok(Model { cfg, vocab, params })
    }

    pub fn from_params(cfg: ModelConfig, params: ParamSet) -> Result<Self, DataError> {
        cfg.validate()?;
        let vocab = Vocabulary::new(cfg.vocab_size, cfg.hash_seed)?;
        Ok(Model { cfg, vocab, params })
    }

    pub fn tokenize(&self, news: &[crate::ingest::NewsDoc]) -> Result<TokenSequence, DataError> {
        tokenize_augment(news, &self.vocab, self.cfg.seq_len)
    }

    /// H' = P·H — the learned projection of the embedding table onto m
    /// prototype rows. Shared by every sample on a tape.
    pub fn text_prototypes(&self, tape: &mut Tape, bound: &BoundParams) -> Result<Var, TensorError> {
        tape.matmul(bound.var("proto_proj"), bound.var("embed"))
    }

    /// Normalize a raw price window to returns relative to its first
    /// close. Raw price scales would swamp the attention softmax.
    pub fn normalize_window(window: &PriceWindow) -> Result<Tensor, TensorError> {
        let base = window.matrix[0][1];
        if !(base.is_finite() && base > 0.0) {
            return Err(TensorError::NonFinite { op: "normalize_window" });
        }
        let data: Vec<f64> = window
            .matrix
            .iter()
            .flat_map(|row| row.iter().map(|&p| p / base - 1.0))
            .collect();
        Tensor::new(vec![window.matrix.len(), 4], data)
    }

    /// E_price = softmax(Q·Kᵀ/√d_k)·H' with Q = window·W_q, K = H'·W_k.
    /// Every output row is a convex combination of prototype rows.
    pub fn price_to_concept(
        &self,
        tape: &mut Tape,
        bound: &BoundParams,
        h_prime: Var,
        window: &PriceWindow,
    ) -> Result<Var, TensorError> {
        let x = Self::normalize_window(window)?;
        let x = tape.constant(x);
        let q = tape.matmul(x, bound.var("p2c_wq"))?;
        let k = tape.matmul(h_prime, bound.var("p2c_wk"))?;
        tape.scaled_dot_attention(q, k, h_prime, (self.cfg.d_k as f64).sqrt())
    }

    /// Token embedding lookup plus (optionally) positional embeddings.
    pub fn embed_text(
        &self,
        tape: &mut Tape,
        bound: &BoundParams,
        tokens: &TokenSequence,
    ) -> Result<Var, TensorError> {
        for &id in &tokens.ids {
            if id >= self.cfg.vocab_size {
                return Err(TensorError::Dimension {
                    op: "embed_text",
                    detail: format!("token id {id} out of range {}", self.cfg.vocab_size),
                });
            }
        }
        let emb = tape.gather_rows(bound.var("embed"), &tokens.ids)?;
        if !self.cfg.positional {
            return Ok(emb);
        }
        let positions: Vec<usize> = (0..tokens.len()).collect();
        let pos = tape.gather_rows(bound.var("pos"), &positions)?;
        tape.add(emb, pos)
    }

    /// Row-wise concatenation, text rows first then price rows.
    pub fn fuse(&self, tape: &mut Tape, e_text: Var, e_price: Var) -> Result<Var, TensorError> {
        tape.concat_rows(e_text, e_price)
    }

    /// Pre-norm self-attention + feed-forward blocks with residuals.
    pub fn encode(&self, tape: &mut Tape, bound: &BoundParams, e: Var) -> Result<Var, TensorError> {
        let mut x = e;
        let scale = (self.cfg.d as f64).sqrt();
        for l in 0..self.cfg.layers {
            let p = |part: &str| bound.var(&format!("layer{l}.{part}"));
            let normed = tape.layer_norm_rows(x, p("ln1_gain"), p("ln1_bias"), LN_EPS)?;
            let q = tape.matmul(normed, p("attn_wq"))?;
            let k = tape.matmul(normed, p("attn_wk"))?;
            let v = tape.matmul(normed, p("attn_wv"))?;
            let attended = tape.scaled_dot_attention(q, k, v, scale)?;
            let projected = tape.matmul(attended, p("attn_wo"))?;
            x = tape.add(x, projected)?;

            let normed = tape.layer_norm_rows(x, p("ln2_gain"), p("ln2_bias"), LN_EPS)?;
            let hidden = tape.matmul(normed, p("ff_w1"))?;
            let hidden = tape.add_row(hidden, p("ff_b1"))?;
            let hidden = tape.tanh(hidden)?;
            let out = tape.matmul(hidden, p("ff_w2"))?;
            let out = tape.add_row(out, p("ff_b2"))?;
            x = tape.add(x, out)?;
        }
        Ok(x)
    }

    /// Pull the [CLS],[UP],[DOWN] rows out of h (in that order) using the
    /// positions stored on the token sequence.
    pub fn extract_heads(
        &self,
        tape: &mut Tape,
        h: Var,
        tokens: &TokenSequence,
    ) -> Result<Var, TensorError> {
        tape.gather_rows(h, &[tokens.cls_pos, tokens.up_pos, tokens.down_pos])
    }

    /// Full per-sample forward pass. `h_prime` comes from
    /// [`Model::text_prototypes`] and is shared across the batch.
    pub fn forward_sample(
        &self,
        tape: &mut Tape,
        bound: &BoundParams,
        h_prime: Var,
        tokens: &TokenSequence,
        window: &PriceWindow,
    ) -> Result<SampleForward, TensorError> {
        let e_text = self.embed_text(tape, bound, tokens)?;
        let e_price = self.price_to_concept(tape, bound, h_prime, window)?;
        let fused = self.fuse(tape, e_text, e_price)?;
        let h = self.encode(tape, bound, fused)?;
        let heads = self.extract_heads(tape, h, tokens)?;
        Ok(SampleForward {
            h,
            heads,
            fused_len: tokens.len() + window.delta(),
        })
    }

    /// Value-level head vectors for a finished forward pass.
    pub fn heads_value(&self, tape: &Tape, fwd: &SampleForward) -> MarketHeads {
        let t = tape.value(fwd.heads);
        let d = self.cfg.d;
        MarketHeads {
            h_mar: t.data[0..d].to_vec(),
            h_bu: t.data[d..2 * d].to_vec(),
            h_be: t.data[2 * d..3 * d].to_vec(),
        }
    }
}

/// A_BU = h_BU·hᵀ/√d, A_BE = h_BE·hᵀ/√d, bias = A_BU − A_BE.
pub fn bias_attention(heads: &MarketHeads, h: &Tensor) -> AttentionMaps {
    let d = heads.h_mar.len();
    let scale = 1.0 / (d as f64).sqrt();
    let rows = h.rows();
    let cols = h.cols();
    let project = |head: &[f64]| -> Vec<f64> {
        (0..rows)
            .map(|i| {
                let row = &h.data[i * cols..(i + 1) * cols];
                head.iter().zip(row).map(|(a, b)| a * b).sum::<f64>() * scale
            })
            .collect()
    };
    let a_bu = project(&heads.h_bu);
    let a_be = project(&heads.h_be);
    let bias = a_bu.iter().zip(&a_be).map(|(u, e)| u - e).collect();
    AttentionMaps { a_bu, a_be, bias }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::NewsDoc;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tiny_cfg() -> ModelConfig {
        ModelConfig {
            d: 8,
            d_k: 4,
            prototypes: 4,
            layers: 1,
            seq_len: 8,
            vocab_size: 64,
            ..Default::default()
        }
    }

    fn window(rows: usize) -> PriceWindow {
        PriceWindow {
            end_date: chrono::NaiveDate::from_ymd_opt(2020, 1, 10).unwrap(),
            matrix: (0..rows)
                .map(|i| {
                    let c = 100.0 + i as f64;
                    [c, c + 0.5, c - 1.0, c + 1.0]
                })
                .collect(),
        }
    }

    fn doc(text: &str) -> NewsDoc {
        NewsDoc {
            date: chrono::NaiveDate::from_ymd_opt(2020, 1, 10).unwrap(),
            stock: "X".into(),
            text: text.into(),
            topics: vec![],
        }
    }

    #[test]
    fn prototypes_with_selector_projection_pick_rows() {
        let mut model = Model::init(tiny_cfg(), 1).unwrap();
        let (v, m, d) = (64, 4, 8);
        // P = selector of the first m rows of H
        let proj = model.params.get_mut("proto_proj").unwrap();
        proj.data.fill(0.0);
        for i in 0..m {
            proj.data[i * v + i] = 1.0;
        }
        let mut tape = Tape::new();
        let bound = model.params.bind(&mut tape);
        let hp = model.text_prototypes(&mut tape, &bound).unwrap();
        let got = tape.value(hp).data.clone();
        let embed = model.params.get("embed").unwrap();
        assert_eq!(got, embed.data[..m * d].to_vec());
    }

    #[test]
    fn mean_projection_gives_column_mean() {
        let mut model = Model::init(tiny_cfg(), 2).unwrap();
        let cfg = tiny_cfg();
        let proj = model.params.get_mut("proto_proj").unwrap();
        proj.data.fill(0.0);
        for j in 0..cfg.vocab_size {
            proj.data[j] = 1.0 / cfg.vocab_size as f64; // first prototype = mean
        }
        let mut tape = Tape::new();
        let bound = model.params.bind(&mut tape);
        let hp = model.text_prototypes(&mut tape, &bound).unwrap();
        let got = &tape.value(hp).data[..cfg.d];
        let embed = model.params.get("embed").unwrap();
        for j in 0..cfg.d {
            let mean: f64 = (0..cfg.vocab_size)
                .map(|i| embed.data[i * cfg.d + j])
                .sum::<f64>()
                / cfg.vocab_size as f64;
            assert!((got[j] - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn price_rows_stay_within_prototype_bounds() {
        let model = Model::init(tiny_cfg(), 3).unwrap();
        let cfg = tiny_cfg();
        let mut tape = Tape::new();
        let bound = model.params.bind(&mut tape);
        let hp = model.text_prototypes(&mut tape, &bound).unwrap();
        let e_price = model
            .price_to_concept(&mut tape, &bound, hp, &window(5))
            .unwrap();
        let protos = tape.value(hp).data.clone();
        let got = tape.value(e_price).data.clone();
        assert_eq!(tape.value(e_price).shape, vec![5, cfg.d]);
        for j in 0..cfg.d {
            let col: Vec<f64> = (0..cfg.prototypes).map(|i| protos[i * cfg.d + j]).collect();
            let lo = col.iter().cloned().fold(f64::INFINITY, f64::min) - 1e-12;
            let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 1e-12;
            for i in 0..5 {
                let v = got[i * cfg.d + j];
                assert!(v >= lo && v <= hi, "entry ({i},{j}) = {v} outside [{lo},{hi}]");
            }
        }
    }

    #[test]
    fn single_prototype_dominates_every_price_row() {
        let mut cfg = tiny_cfg();
        cfg.prototypes = 1;
        let model = Model::init(cfg.clone(), 4).unwrap();
        let mut tape = Tape::new();
        let bound = model.params.bind(&mut tape);
        let hp = model.text_prototypes(&mut tape, &bound).unwrap();
        let e_price = model
            .price_to_concept(&mut tape, &bound, hp, &window(3))
            .unwrap();
        let proto = tape.value(hp).data.clone();
        let got = tape.value(e_price).data.clone();
        for i in 0..3 {
            for j in 0..cfg.d {
                assert!((got[i * cfg.d + j] - proto[j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_query_projection_gives_prototype_mean() {
        let mut model = Model::init(tiny_cfg(), 5).unwrap();
        let cfg = tiny_cfg();
        model.params.get_mut("p2c_wq").unwrap().data.fill(0.0);
        let mut tape = Tape::new();
        let bound = model.params.bind(&mut tape);
        let hp = model.text_prototypes(&mut tape, &bound).unwrap();
        let e_price = model
            .price_to_concept(&mut tape, &bound, hp, &window(4))
            .unwrap();
        let protos = tape.value(hp).data.clone();
        let got = tape.value(e_price).data.clone();
        for j in 0..cfg.d {
            let mean: f64 = (0..cfg.prototypes)
                .map(|i| protos[i * cfg.d + j])
                .sum::<f64>()
                / cfg.prototypes as f64;
            for i in 0..4 {
                assert!((got[i * cfg.d + j] - mean).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn text_embedding_matches_gather_oracle() {
        let model = Model::init(tiny_cfg(), 6).unwrap();
        let cfg = tiny_cfg();
        let tokens = model.tokenize(&[doc("market rallies strongly")]).unwrap();
        let mut tape = Tape::new();
        let bound = model.params.bind(&mut tape);
        let e = model.embed_text(&mut tape, &bound, &tokens).unwrap();
        let got = tape.value(e).data.clone();
        let embed = model.params.get("embed").unwrap();
        let pos = model.params.get("pos").unwrap();
        for (i, &id) in tokens.ids.iter().enumerate() {
            for j in 0..cfg.d {
                let want = embed.data[id * cfg.d + j] + pos.data[i * cfg.d + j];
                assert!((got[i * cfg.d + j] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn identical_tokens_differ_only_by_position() {
        let model = Model::init(tiny_cfg(), 6).unwrap();
        let cfg = tiny_cfg();
        let tokens = model.tokenize(&[doc("gold gold gold")]).unwrap();
        assert_eq!(tokens.ids[3], tokens.ids[4]);
        let mut tape = Tape::new();
        let bound = model.params.bind(&mut tape);
        let e = model.embed_text(&mut tape, &bound, &tokens).unwrap();
        let got = tape.value(e).data.clone();
        let pos = model.params.get("pos").unwrap();
        for j in 0..cfg.d {
            let diff = got[3 * cfg.d + j] - got[4 * cfg.d + j];
            let want = pos.data[3 * cfg.d + j] - pos.data[4 * cfg.d + j];
            assert!((diff - want).abs() < 1e-12);
        }
    }

    #[test]
    fn fusion_keeps_row_order_and_length() {
        let model = Model::init(tiny_cfg(), 7).unwrap();
        let cfg = tiny_cfg();
        let mut tape = Tape::new();
        let text = Tensor::new(vec![4, cfg.d], (0..4 * cfg.d).map(|i| i as f64).collect()).unwrap();
        let price =
            Tensor::new(vec![2, cfg.d], (0..2 * cfg.d).map(|i| -(i as f64)).collect()).unwrap();
        let vt = tape.constant(text.clone());
        let vp = tape.constant(price.clone());
        let fused = model.fuse(&mut tape, vt, vp).unwrap();
        assert_eq!(tape.value(fused).shape, vec![6, cfg.d]);
        let got = &tape.value(fused).data;
        assert_eq!(got[..4 * cfg.d], text.data[..]);
        assert_eq!(got[4 * cfg.d..], price.data[..]);
    }

    #[test]
    fn zero_layers_encode_is_identity() {
        let mut cfg = tiny_cfg();
        cfg.layers = 0;
        let model = Model::init(cfg.clone(), 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let e = Tensor::new(
            vec![5, cfg.d],
            (0..5 * cfg.d).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        let mut tape = Tape::new();
        let bound = model.params.bind(&mut tape);
        let ve = tape.constant(e.clone());
        let h = model.encode(&mut tape, &bound, ve).unwrap();
        assert_eq!(tape.value(h).data, e.data);
    }

    #[test]
    fn encode_is_permutation_equivariant() {
        let cfg = tiny_cfg();
        let model = Model::init(cfg.clone(), 9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let rows = 6;
        let mut data: Vec<f64> = (0..rows * cfg.d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let run = |data: &[f64]| {
            let mut tape = Tape::new();
            let bound = model.params.bind(&mut tape);
            let ve = tape.constant(Tensor::new(vec![rows, cfg.d], data.to_vec()).unwrap());
            let h = model.encode(&mut tape, &bound, ve).unwrap();
            tape.value(h).data.clone()
        };
        let base = run(&data);
        // swap rows 3 and 4 of the input
        for j in 0..cfg.d {
            data.swap(3 * cfg.d + j, 4 * cfg.d + j);
        }
        let swapped = run(&data);
        for j in 0..cfg.d {
            assert!((base[3 * cfg.d + j] - swapped[4 * cfg.d + j]).abs() < 1e-12);
            assert!((base[4 * cfg.d + j] - swapped[3 * cfg.d + j]).abs() < 1e-12);
            assert!((base[j] - swapped[j]).abs() < 1e-12); // untouched row
        }
    }

    /// Independent loop-level re-implementation of one pre-norm block.
    #[test]
    fn one_layer_encode_matches_hand_evaluation() {
        let mut cfg = tiny_cfg();
        cfg.d = 4;
        cfg.d_k = 4;
        let model = Model::init(cfg.clone(), 10).unwrap();
        let d = cfg.d;
        let rows = 3;
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let e: Vec<f64> = (0..rows * d).map(|_| rng.gen_range(-1.0..1.0)).collect();

        let mut tape = Tape::new();
        let bound = model.params.bind(&mut tape);
        let ve = tape.constant(Tensor::new(vec![rows, d], e.clone()).unwrap());
        let h = model.encode(&mut tape, &bound, ve).unwrap();
        let got = tape.value(h).data.clone();

        let p = |name: &str| model.params.get(&format!("layer0.{name}")).unwrap().data.clone();
        let ln = |x: &[f64], gain: &[f64], bias: &[f64]| -> Vec<f64> {
            let mut out = vec![0.0; x.len()];
            for i in 0..rows {
                let row = &x[i * d..(i + 1) * d];
                let mean = row.iter().sum::<f64>() / d as f64;
                let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / d as f64;
                let inv = 1.0 / (var + 1e-5).sqrt();
                for j in 0..d {
                    out[i * d + j] = gain[j] * (row[j] - mean) * inv + bias[j];
                }
            }
            out
        };
        let mm = |a: &[f64], b: &[f64], m: usize, k: usize, n: usize| -> Vec<f64> {
            let mut out = vec![0.0; m * n];
            for i in 0..m {
                for j in 0..n {
                    for t in 0..k {
                        out[i * n + j] += a[i * k + t] * b[t * n + j];
                    }
                }
            }
            out
        };
        let mut x = e.clone();
        let normed = ln(&x, &p("ln1_gain"), &p("ln1_bias"));
        let q = mm(&normed, &p("attn_wq"), rows, d, d);
        let k = mm(&normed, &p("attn_wk"), rows, d, d);
        let v = mm(&normed, &p("attn_wv"), rows, d, d);
        let scale = (d as f64).sqrt();
        let mut attended = vec![0.0; rows * d];
        for i in 0..rows {
            let logits: Vec<f64> = (0..rows)
                .map(|jj| {
                    (0..d).map(|t| q[i * d + t] * k[jj * d + t]).sum::<f64>() / scale
                })
                .collect();
            let mx = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = logits.iter().map(|l| (l - mx).exp()).collect();
            let s: f64 = exps.iter().sum();
            for jj in 0..rows {
                for t in 0..d {
                    attended[i * d + t] += exps[jj] / s * v[jj * d + t];
                }
            }
        }
        let projected = mm(&attended, &p("attn_wo"), rows, d, d);
        for i in 0..rows * d {
            x[i] += projected[i];
        }
        let normed = ln(&x, &p("ln2_gain"), &p("ln2_bias"));
        let hdim = cfg.ff_hidden();
        let mut hidden = mm(&normed, &p("ff_w1"), rows, d, hdim);
        let b1 = p("ff_b1");
        for i in 0..rows {
            for j in 0..hdim {
                hidden[i * hdim + j] = (hidden[i * hdim + j] + b1[j]).tanh();
            }
        }
        let mut out = mm(&hidden, &p("ff_w2"), rows, hdim, d);
        let b2 = p("ff_b2");
        for i in 0..rows {
            for j in 0..d {
                out[i * d + j] += b2[j];
                x[i * d + j] += out[i * d + j];
            }
        }
        for (a, b) in got.iter().zip(&x) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn head_extraction_follows_stored_positions() {
        let model = Model::init(tiny_cfg(), 11).unwrap();
        let cfg = tiny_cfg();
        let rows = 6;
        let h = Tensor::new(
            vec![rows, cfg.d],
            (0..rows * cfg.d).map(|i| (i / cfg.d) as f64).collect(),
        )
        .unwrap();
        let mut tape = Tape::new();
        let vh = tape.constant(h);
        // canonical layout
        let mut tokens = model.tokenize(&[]).unwrap();
        let heads = model.extract_heads(&mut tape, vh, &tokens).unwrap();
        let got = tape.value(heads).data.clone();
        assert_eq!(got[0], 0.0);
        assert_eq!(got[cfg.d], 1.0);
        assert_eq!(got[2 * cfg.d], 2.0);
        // alternate layout follows the stored indices, not constants
        tokens.cls_pos = 5;
        tokens.up_pos = 3;
        tokens.down_pos = 1;
        let heads = model.extract_heads(&mut tape, vh, &tokens).unwrap();
        let got = tape.value(heads).data.clone();
        assert_eq!(got[0], 5.0);
        assert_eq!(got[cfg.d], 3.0);
        assert_eq!(got[2 * cfg.d], 1.0);
    }

    #[test]
    fn bias_attention_symmetry_orthogonality_and_oracle() {
        let d = 4;
        let h = Tensor::new(
            vec![3, d],
            vec![
                1.0, 0.0, 0.0, 0.0, //
                0.0, 1.0, 0.0, 0.0, //
                0.0, 0.0, 1.0, 0.0,
            ],
        )
        .unwrap();
        // equal heads -> zero bias
        let equal = MarketHeads {
            h_mar: vec![0.3; d],
            h_bu: vec![0.7, -0.2, 0.1, 0.4],
            h_be: vec![0.7, -0.2, 0.1, 0.4],
        };
        let maps = bias_attention(&equal, &h);
        assert!(maps.bias.iter().all(|&b| b == 0.0));

        // h_BU = e_1 against orthonormal rows -> A_BU = e_1 / sqrt(d)
        let ortho = MarketHeads {
            h_mar: vec![0.0; d],
            h_bu: vec![0.0, 1.0, 0.0, 0.0],
            h_be: vec![0.0; d],
        };
        let maps = bias_attention(&ortho, &h);
        assert!((maps.a_bu[1] - 0.5).abs() < 1e-12);
        assert!(maps.a_bu[0].abs() < 1e-12 && maps.a_bu[2].abs() < 1e-12);

        // random oracle + antisymmetry under perspective swap
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let hr = Tensor::new(
            vec![5, d],
            (0..5 * d).map(|_| rng.gen_range(-2.0..2.0)).collect(),
        )
        .unwrap();
        let heads = MarketHeads {
            h_mar: (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect(),
            h_bu: (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect(),
            h_be: (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect(),
        };
        let maps = bias_attention(&heads, &hr);
        for i in 0..5 {
            let row = &hr.data[i * d..(i + 1) * d];
            let want: f64 = heads
                .h_bu
                .iter()
                .zip(row)
                .map(|(a, b)| a * b)
                .sum::<f64>()
                / (d as f64).sqrt();
            assert!((maps.a_bu[i] - want).abs() < 1e-12);
        }
        let swapped = MarketHeads {
            h_mar: heads.h_mar.clone(),
            h_bu: heads.h_be.clone(),
            h_be: heads.h_bu.clone(),
        };
        let smaps = bias_attention(&swapped, &hr);
        for (a, b) in maps.bias.iter().zip(&smaps.bias) {
            assert!((a + b).abs() < 1e-12);
        }
    }

    #[test]
    fn checkpoint_roundtrips_and_rejects_mismatched_config() {
        let cfg = tiny_cfg();
        let model = Model::init(cfg.clone(), 13).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.json");
        Checkpoint::from_model(&cfg, &model.params).save(&path).unwrap();
        let params = Checkpoint::load(&path).unwrap().into_params(&cfg).unwrap();
        for ((n1, t1), (n2, t2)) in model.params.iter().zip(params.iter()) {
            assert_eq!(n1, n2);
            assert_eq!(t1.data, t2.data);
        }
        let mut other = cfg;
        other.d = 16;
        assert!(Checkpoint::load(&path).unwrap().into_params(&other).is_err());
    }
}
