//! The dual-competition loss stack: paired contrastive losses aligning
//! competition and market vectors, a bull/bear cross-entropy, and their
//! α-weighted total.

use crate::error::TensorError;
use crate::ingest::TrendLabel;
use crate::model::MarketHeads;
use crate::pairing::PairSets;
use crate::tensor::{Tape, Tensor, Var};

/// Values of every loss part for one batch, plus the per-sample diagonal
/// logits.
#[derive(Debug, Clone)]
pub struct LossBreakdown {
    pub comp: f64,
    pub mar: f64,
    pub ce: f64,
    pub total: f64,
    pub h_cm: Vec<f64>,
    pub h_um: Vec<f64>,
    pub h_em: Vec<f64>,
}

/// Tape handles for the loss parts of one batch.
pub struct LossGraph {
    pub comp: Var,
    pub mar: Var,
    pub ce: Var,
    pub total: Var,
    pub h_um: Var,
    pub h_em: Var,
    pub h_cm: Var,
}

/// Pairwise competition/market logits: out[j,i] = h*_Comp,j · h_Mar,i.
pub fn pair_logits(tape: &mut Tape, hc_star: Var, h_mar: Var) -> Result<Var, TensorError> {
    let mar_t = tape.transpose(h_mar)?;
    tape.matmul(hc_star, mar_t)
}

/// Shared contrastive core. Row i of `logits_rows` holds, for anchor i,
/// the logit against every other sample j at column j. Anchors with no
/// positives contribute nothing and are excluded from the normalization.
fn contrastive_from_rows(
    tape: &mut Tape,
    logits_rows: Var,
    pairs: &PairSets,
    tau: f64,
) -> Result<Var, TensorError> {
    if tau <= 0.0 {
        return Err(TensorError::Config(format!(
            "temperature must be positive, got {tau}"
        )));
    }
    let n = pairs.len();
    let shape = tape.value(logits_rows).shape.clone();
    if shape != vec![n, n] {
        return Err(TensorError::Dimension {
            op: "contrastive_loss",
            detail: format!("logits shape {shape:?} for {n} anchors"),
        });
    }
    let contributing: Vec<usize> = (0..n).filter(|&i| !pairs.positives[i].is_empty()).collect();
    if contributing.is_empty() {
        return Ok(tape.constant(Tensor::scalar(0.0)));
    }
    let mut mask_all = vec![false; n * n];
    let mut pos_weight = vec![0.0; n * n];
    let mut contrib = vec![0.0; n];
    for i in 0..n {
        for &a in &pairs.positives[i] {
            mask_all[i * n + a] = true;
        }
        for &a in &pairs.negatives[i] {
            mask_all[i * n + a] = true;
        }
        if !pairs.positives[i].is_empty() {
            contrib[i] = 1.0;
            let w = 1.0 / pairs.positives[i].len() as f64;
            for &p in &pairs.positives[i] {
                pos_weight[i * n + p] = w;
            }
        }
    }
    let scaled = tape.scale(logits_rows, 1.0 / tau)?;
    let lse = tape.masked_lse_rows(scaled, &mask_all)?;
    let weights = tape.constant(Tensor {
        shape: vec![n, n],
        data: pos_weight,
    });
    let weighted = tape.mul(scaled, weights)?;
    let pos_mean = tape.row_sums(weighted)?;
    let per_anchor = tape.sub(lse, pos_mean)?;
    let gate = tape.constant(Tensor {
        shape: vec![n, 1],
        data: contrib,
    });
    let gated = tape.mul(per_anchor, gate)?;
    let summed = tape.sum_all(gated)?;
    tape.scale(summed, 1.0 / contributing.len() as f64)
}

/// L_Comp: anchor market vector against candidate competition vectors,
/// i.e. anchor i scores logits[·, i].
pub fn loss_comp_graph(
    tape: &mut Tape,
    logits: Var,
    pairs: &PairSets,
    tau: f64,
) -> Result<Var, TensorError> {
    let by_anchor = tape.transpose(logits)?;
    contrastive_from_rows(tape, by_anchor, pairs, tau)
}

/// L_Mar: anchor competition vector against candidate market vectors,
/// i.e. anchor i scores logits[i, ·].
pub fn loss_mar_graph(
    tape: &mut Tape,
    logits: Var,
    pairs: &PairSets,
    tau: f64,
) -> Result<Var, TensorError> {
    contrastive_from_rows(tape, logits, pairs, tau)
}

/// Two-class cross-entropy over the bull/bear diagonal logits. `h_um`
/// and `h_em` are [N,1]; the label picks which one is "correct".
pub fn loss_ce_graph(
    tape: &mut Tape,
    h_um: Var,
    h_em: Var,
    labels: &[TrendLabel],
) -> Result<Var, TensorError> {
    let n = labels.len();
    if tape.value(h_um).shape != vec![n, 1] || tape.value(h_em).shape != vec![n, 1] {
        return Err(TensorError::Dimension {
            op: "loss_ce",
            detail: format!(
                "expected [{n},1] logit columns, got {:?} and {:?}",
                tape.value(h_um).shape,
                tape.value(h_em).shape
            ),
        });
    }
    let both = tape.concat_cols(h_um, h_em)?;
    let mask = vec![true; 2 * n];
    let lse = tape.masked_lse_rows(both, &mask)?;
    let sel_up: Vec<f64> = labels.iter().map(|l| f64::from(l.is_bullish())).collect();
    let sel_dn: Vec<f64> = sel_up.iter().map(|v| 1.0 - v).collect();
    let su = tape.constant(Tensor {
        shape: vec![n, 1],
        data: sel_up,
    });
    let sd = tape.constant(Tensor {
        shape: vec![n, 1],
        data: sel_dn,
    });
    let um_part = tape.mul(h_um, su)?;
    let em_part = tape.mul(h_em, sd)?;
    let h_cm = tape.add(um_part, em_part)?;
    let per_sample = tape.sub(lse, h_cm)?;
    let summed = tape.sum_all(per_sample)?;
    tape.scale(summed, 1.0 / n as f64)
}

/// L_Total = α(L_Comp + L_Mar) + (1−α)·L_CE.
pub fn total_loss_graph(
    tape: &mut Tape,
    comp: Var,
    mar: Var,
    ce: Var,
    alpha: f64,
) -> Result<Var, TensorError> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(TensorError::Config(format!(
            "alpha must lie in [0,1], got {alpha}"
        )));
    }
    let contrastive = tape.add(comp, mar)?;
    let weighted = tape.scale(contrastive, alpha)?;
    let ce_weighted = tape.scale(ce, 1.0 - alpha)?;
    tape.add(weighted, ce_weighted)
}

/// Build the full loss stack from batch head matrices already on tape.
///
/// `hc_star` is [N,d] with row i the competition row selected by y_i,
/// `h_mar`/`h_bu`/`h_be` are [N,d].
pub fn build_losses(
    tape: &mut Tape,
    hc_star: Var,
    h_mar: Var,
    h_bu: Var,
    h_be: Var,
    labels: &[TrendLabel],
    pairs: &PairSets,
    alpha: f64,
    tau: f64,
) -> Result<LossGraph, TensorError> {
    let logits = pair_logits(tape, hc_star, h_mar)?;
    let comp = loss_comp_graph(tape, logits, pairs, tau)?;
    let mar = loss_mar_graph(tape, logits, pairs, tau)?;
    let h_um = tape.row_dot(h_bu, h_mar)?;
    let h_em = tape.row_dot(h_be, h_mar)?;
    let h_cm = tape.row_dot(hc_star, h_mar)?;
    let ce = loss_ce_graph(tape, h_um, h_em, labels)?;
    let total = total_loss_graph(tape, comp, mar, ce, alpha)?;
    Ok(LossGraph {
        comp,
        mar,
        ce,
        total,
        h_um,
        h_em,
        h_cm,
    })
}

impl LossGraph {
    pub fn breakdown(&self, tape: &Tape) -> LossBreakdown {
        LossBreakdown {
            comp: tape.scalar_value(self.comp),
            mar: tape.scalar_value(self.mar),
            ce: tape.scalar_value(self.ce),
            total: tape.scalar_value(self.total),
            h_cm: tape.value(self.h_cm).data.clone(),
            h_um: tape.value(self.h_um).data.clone(),
            h_em: tape.value(self.h_em).data.clone(),
        }
    }
}

/// Value-level evaluation of the whole stack from plain head vectors.
pub fn evaluate_losses(
    heads: &[MarketHeads],
    labels: &[TrendLabel],
    pairs: &PairSets,
    alpha: f64,
    tau: f64,
) -> Result<LossBreakdown, TensorError> {
    let n = heads.len();
    let d = heads.first().map(|h| h.h_mar.len()).unwrap_or(0);
    let mut tape = Tape::new();
    let flat = |f: &dyn Fn(&MarketHeads) -> Vec<f64>| -> Tensor {
        Tensor {
            shape: vec![n, d],
            data: heads.iter().flat_map(|h| f(h)).collect(),
        }
    };
    let hc_star = flat(&|h: &MarketHeads| h.h_bu.clone());
    let mut hc_star = hc_star;
    for (i, (h, l)) in heads.iter().zip(labels).enumerate() {
        let row = h.comp_star(l.is_bullish());
        hc_star.data[i * d..(i + 1) * d].copy_from_slice(row);
    }
    let hc_star = tape.constant(hc_star);
    let h_mar = tape.constant(flat(&|h| h.h_mar.clone()));
    let h_bu = tape.constant(flat(&|h| h.h_bu.clone()));
    let h_be = tape.constant(flat(&|h| h.h_be.clone()));
    let graph = build_losses(&mut tape, hc_star, h_mar, h_bu, h_be, labels, pairs, alpha, tau)?;
    Ok(graph.breakdown(&tape))
}
