//! Training loop, inference helpers and hyperparameter grid search.

use std::path::Path;

use chrono::NaiveDate;

use crate::backtest::{
    compute_metrics, predict_direction, run_backtest, MetricConvention, Signal, TradeMode,
};
use crate::error::{TensorError, TrainError};
use crate::ingest::{AlignedSample, PriceBar, TrendLabel};
use crate::loss::{build_losses, LossBreakdown};
use crate::model::{bias_attention, AttentionMaps, MarketHeads, Model, ModelConfig};
use crate::pairing::{inertial_pairs, MomentumSpan};
use crate::tensor::{AdamConfig, AdamState, Tape, Var};

#[derive(Debug, Clone, Copy)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub alpha: f64,
    pub tau: f64,
    pub span: MomentumSpan,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            batch_size: 32,
            lr: 1e-3,
            alpha: 0.5,
            tau: 0.1,
            span: MomentumSpan::Symmetric(1),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.batch_size == 0 {
            return Err(TrainError::Config("batch size must be >= 1".into()));
        }
        if !(self.lr >= 0.0) {
            return Err(TrainError::Config(format!(
                "learning rate must be non-negative, got {}",
                self.lr
            )));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(TrainError::Config(format!(
                "alpha must lie in [0,1], got {}",
                self.alpha
            )));
        }
        if !(self.tau > 0.0) {
            return Err(TrainError::Config(format!(
                "temperature must be positive, got {}",
                self.tau
            )));
        }
        Ok(())
    }
}

/// Loss values for one optimizer step.
#[derive(Debug, Clone)]
pub struct BatchRecord {
    pub epoch: usize,
    pub batch: usize,
    pub loss: LossBreakdown,
}

/// Owns the model and optimizer state so training can be resumed
/// epoch by epoch (e.g. to interleave evaluation).
pub struct Trainer {
    pub model: Model,
    pub cfg: TrainConfig,
    opt: AdamState,
    epochs_done: usize,
}

impl Trainer {
    pub fn new(model: Model, cfg: TrainConfig) -> Result<Self, TrainError> {
        cfg.validate()?;
        let opt = AdamState::new(AdamConfig::with_lr(cfg.lr), &model.params.sizes())?;
        Ok(Trainer {
            model,
            cfg,
            opt,
            epochs_done: 0,
        })
    }

    pub fn epochs_done(&self) -> usize {
        self.epochs_done
    }

    /// One pass over `samples` in contiguous temporal batches; pairing is
    /// batch-local. Returns per-batch losses.
    pub fn epoch(&mut self, samples: &[AlignedSample]) -> Result<Vec<BatchRecord>, TrainError> {
        if samples.is_empty() {
            return Err(TrainError::Config("training set is empty".into()));
        }
        let epoch = self.epochs_done;
        let mut records = Vec::new();
        for (batch_idx, batch) in samples.chunks(self.cfg.batch_size).enumerate() {
            let loss = self.step(batch).map_err(|e| match e {
                TrainError::Tensor(TensorError::NonFinite { .. }) => TrainError::Diverged {
                    epoch,
                    batch: batch_idx,
                },
                other => other,
            })?;
            if !loss.total.is_finite() {
                return Err(TrainError::Diverged {
                    epoch,
                    batch: batch_idx,
                });
            }
            records.push(BatchRecord {
                epoch,
                batch: batch_idx,
                loss,
            });
        }
        self.epochs_done += 1;
        Ok(records)
    }

    /// Run the configured number of epochs, returning the full batch
    /// trajectory.
    pub fn train(&mut self, samples: &[AlignedSample]) -> Result<Vec<BatchRecord>, TrainError> {
        let mut out = Vec::new();
        for _ in 0..self.cfg.epochs {
            out.extend(self.epoch(samples)?);
        }
        Ok(out)
    }

    fn step(&mut self, batch: &[AlignedSample]) -> Result<LossBreakdown, TrainError> {
        let (breakdown, grads) = evaluate_batch(&self.model, batch, &self.cfg)?;
        let grad_refs: Vec<Option<&[f64]>> = grads.iter().map(|g| g.as_deref()).collect();
        let mut data = self.model.params.data_mut();
        self.opt.step(&mut data, &grad_refs)?;
        Ok(breakdown)
    }
}

/// Builds the full batch loss graph, runs the reverse pass and returns
/// the loss values plus one gradient slot per parameter (in the
/// parameter set's iteration order). Does not touch optimizer state, so
/// it can be used for gradient inspection as well as by the trainer.
pub fn evaluate_batch(
    model: &Model,
    batch: &[AlignedSample],
    cfg: &TrainConfig,
) -> Result<(LossBreakdown, Vec<Option<Vec<f64>>>), TrainError> {
    if batch.is_empty() {
        return Err(TrainError::Config("empty batch".into()));
    }
    let mut tape = Tape::new();
    let bound = model.params.bind(&mut tape);
    let h_prime = model.text_prototypes(&mut tape, &bound)?;

    let labels: Vec<TrendLabel> = batch.iter().map(|s| s.label).collect();
    let mut head_blocks: Option<Var> = None;
    for sample in batch {
        let tokens = model.tokenize(&sample.news)?;
        let fwd = model.forward_sample(&mut tape, &bound, h_prime, &tokens, &sample.window)?;
        head_blocks = Some(match head_blocks {
            None => fwd.heads,
            Some(acc) => tape.concat_rows(acc, fwd.heads)?,
        });
    }
    let stacked = head_blocks.expect("non-empty batch");
    let n = batch.len();
    let gather = |tape: &mut Tape, offset: &dyn Fn(usize) -> usize| {
        let idx: Vec<usize> = (0..n).map(|i| 3 * i + offset(i)).collect();
        tape.gather_rows(stacked, &idx)
    };
    let h_mar = gather(&mut tape, &|_| 0)?;
    let h_bu = gather(&mut tape, &|_| 1)?;
    let h_be = gather(&mut tape, &|_| 2)?;
    let hc_star = gather(&mut tape, &|i| if labels[i].is_bullish() { 1 } else { 2 })?;

    let pairs = inertial_pairs(&labels, cfg.span);
    let graph = build_losses(
        &mut tape, hc_star, h_mar, h_bu, h_be, &labels, &pairs, cfg.alpha, cfg.tau,
    )?;
    let breakdown = graph.breakdown(&tape);
    tape.backward(graph.total)?;

    let grads: Vec<Option<Vec<f64>>> = bound
        .ordered()
        .iter()
        .map(|&v| tape.grad(v).map(<[f64]>::to_vec))
        .collect();
    Ok((breakdown, grads))
}

/// One inference result: head vectors plus the bias-attention maps over
/// fused positions and the topic attribution of each position.
#[derive(Debug, Clone)]
pub struct Inference {
    pub sample_index: usize,
    pub date: NaiveDate,
    pub label: TrendLabel,
    pub heads: MarketHeads,
    pub maps: AttentionMaps,
    pub position_topics: Vec<Vec<String>>,
}

impl Inference {
    pub fn predicted_bullish(&self) -> bool {
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        dot(&self.heads.h_bu, &self.heads.h_mar) > dot(&self.heads.h_be, &self.heads.h_mar)
    }
}

/// Forward passes without gradient bookkeeping, in chunks so tape memory
/// stays bounded.
pub fn infer(model: &Model, samples: &[AlignedSample]) -> Result<Vec<Inference>, TrainError> {
    let mut out = Vec::with_capacity(samples.len());
    for chunk in samples.chunks(32) {
        let mut tape = Tape::new();
        let bound = model.params.bind(&mut tape);
        let h_prime = model.text_prototypes(&mut tape, &bound)?;
        for sample in chunk {
            let tokens = model.tokenize(&sample.news)?;
            let fwd = model.forward_sample(&mut tape, &bound, h_prime, &tokens, &sample.window)?;
            let heads = model.heads_value(&tape, &fwd);
            let maps = bias_attention(&heads, tape.value(fwd.h));
            let mut position_topics: Vec<Vec<String>> = tokens
                .origins
                .iter()
                .map(|origin| {
                    origin.map_or_else(Vec::new, |doc| sample.news[doc].topics.clone())
                })
                .collect();
            position_topics.extend(std::iter::repeat_with(Vec::new).take(sample.window.delta()));
            out.push(Inference {
                sample_index: sample.index,
                date: sample.date,
                label: sample.label,
                heads,
                maps,
                position_topics,
            });
        }
    }
    Ok(out)
}

/// Fraction of samples whose predicted direction matches the label.
pub fn accuracy(inferences: &[Inference]) -> f64 {
    if inferences.is_empty() {
        return 0.0;
    }
    let hits = inferences
        .iter()
        .filter(|inf| inf.predicted_bullish() == inf.label.is_bullish())
        .count();
    hits as f64 / inferences.len() as f64
}

pub fn signals(inferences: &[Inference], mode: TradeMode) -> Vec<Signal> {
    inferences
        .iter()
        .map(|inf| predict_direction(&inf.heads, inf.date, mode))
        .collect()
}

/// One grid-search result row.
#[derive(Debug, Clone)]
pub struct GridRow {
    pub alpha: f64,
    pub span: MomentumSpan,
    pub cumulative_return: f64,
    pub annual_return: f64,
    pub max_drawdown: f64,
    pub calmar: Option<f64>,
    pub final_loss: f64,
    pub seed: u64,
}

/// Train each configuration from scratch, backtest on the validation
/// span, and rank by validation cumulative returns (descending).
pub fn run_grid(
    configs: &[TrainConfig],
    model_cfg: &ModelConfig,
    train: &[AlignedSample],
    validate: &[AlignedSample],
    bars: &[PriceBar],
    seed: u64,
) -> Result<Vec<GridRow>, TrainError> {
    if configs.is_empty() {
        return Err(TrainError::Config("empty hyperparameter grid".into()));
    }
    let mut rows = Vec::with_capacity(configs.len());
    for cfg in configs {
        let model = Model::init(model_cfg.clone(), seed)?;
        let mut trainer = Trainer::new(model, *cfg)?;
        let records = trainer.train(train)?;
        let final_loss = records.last().map(|r| r.loss.total).unwrap_or(f64::NAN);
        let inferences = infer(&trainer.model, validate)?;
        let sigs = signals(&inferences, TradeMode::LongFlat);
        let curve = run_backtest(&sigs, bars)?;
        let metrics = compute_metrics(&curve, MetricConvention::Standard)?;
        log::info!(
            "grid alpha={} span={} cum={:.4} loss={:.4}",
            cfg.alpha,
            cfg.span,
            metrics.cumulative_returns,
            final_loss
        );
        rows.push(GridRow {
            alpha: cfg.alpha,
            span: cfg.span,
            cumulative_return: metrics.cumulative_returns,
            annual_return: metrics.annual_return,
            max_drawdown: metrics.max_drawdown,
            calmar: metrics.calmar_ratio,
            final_loss,
            seed,
        });
    }
    rows.sort_by(|a, b| {
        b.cumulative_return
            .partial_cmp(&a.cumulative_return)
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(rows)
}

/// Cross product of `alphas` × `spans` over a base configuration.
pub fn grid_search(
    alphas: &[f64],
    spans: &[MomentumSpan],
    base: TrainConfig,
    model_cfg: &ModelConfig,
    train: &[AlignedSample],
    validate: &[AlignedSample],
    bars: &[PriceBar],
    seed: u64,
) -> Result<Vec<GridRow>, TrainError> {
    if alphas.is_empty() || spans.is_empty() {
        return Err(TrainError::Config("empty hyperparameter grid".into()));
    }
    let mut configs = Vec::with_capacity(alphas.len() * spans.len());
    for &alpha in alphas {
        for &span in spans {
            configs.push(TrainConfig {
                alpha,
                span,
                ..base
            });
        }
    }
    run_grid(&configs, model_cfg, train, validate, bars, seed)
}

pub fn default_alphas() -> Vec<f64> {
    vec![0.1, 0.3, 0.5, 0.7, 0.9]
}

/// Write grid results as CSV with a fixed column order.
pub fn write_grid_csv(rows: &[GridRow], path: &Path) -> Result<(), TrainError> {
    let mut out =
        String::from("alpha,span,cumulative_return,annual_return,max_drawdown,calmar,final_loss,seed\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.alpha,
            r.span,
            r.cumulative_return,
            r.annual_return,
            r.max_drawdown,
            r.calmar.map_or(String::new(), |c| c.to_string()),
            r.final_loss,
            r.seed
        ));
    }
    std::fs::write(path, out).map_err(|e| {
        TrainError::Config(format!("cannot write {}: {e}", path.display()))
    })
}
