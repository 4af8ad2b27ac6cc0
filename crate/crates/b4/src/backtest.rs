//! Daily signals from trained heads, equity-curve simulation, and the
//! four performance metrics.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::DataError;
use crate::ingest::PriceBar;
use crate::model::MarketHeads;

/// Daily position: long 1, flat 0, short −1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Signal {
    pub date: NaiveDate,
    pub position: i8,
}

/// Trading rule applied to a direction call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum TradeMode {
    /// Bearish calls go flat.
    #[default]
    LongFlat,
    /// Bearish calls go short.
    LongShort,
}

/// Which arithmetic to use for annualization and drawdown.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum MetricConvention {
    /// Geometric annualization over calendar days; drawdown relative to
    /// the running peak.
    #[default]
    Standard,
    /// The formulas as they appear verbatim in some published backtest
    /// tables: annual = (R/n)^(1/t) − 1 and mdd = max(peak/valley − 1).
    ReportedLiteral,
}

/// Portfolio value series starting at 1.0.
#[derive(Debug, Clone)]
pub struct EquityCurve {
    pub dates: Vec<NaiveDate>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Metrics {
    pub cumulative_returns: f64,
    pub annual_return: f64,
    pub max_drawdown: f64,
    /// Absent when there is no drawdown.
    pub calmar_ratio: Option<f64>,
    pub convention: MetricConvention,
}

/// Long iff the bull logit beats the bear logit; ties are flat.
pub fn predict_direction(heads: &MarketHeads, date: NaiveDate, mode: TradeMode) -> Signal {
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let um = dot(&heads.h_bu, &heads.h_mar);
    let em = dot(&heads.h_be, &heads.h_mar);
    let position = if um > em {
        1
    } else if um < em && mode == TradeMode::LongShort {
        -1
    } else {
        0
    };
    Signal { date, position }
}

/// Close-to-close simulation: the position decided at t applies to the
/// return from t to t+1. Frictionless. Signals dated on the last bar (or
/// outside the series) are ignored, there is no next close to realize.
pub fn run_backtest(signals: &[Signal], bars: &[PriceBar]) -> Result<EquityCurve, DataError> {
    if bars.len() < 2 {
        return Err(DataError::Insufficient(
            "need at least 2 bars to backtest".into(),
        ));
    }
    let first = bars[0].date;
    let last = bars[bars.len() - 1].date;
    for s in signals {
        if s.date < first || s.date > last {
            return Err(DataError::Invalid(format!(
                "signal dated {} outside price range {first}..{last}",
                s.date
            )));
        }
    }
    let mut dates = vec![bars[0].date];
    let mut values = vec![1.0];
    for t in 0..bars.len() - 1 {
        let position = signals
            .iter()
            .find(|s| s.date == bars[t].date)
            .map_or(0, |s| s.position);
        let ret = bars[t + 1].close / bars[t].close - 1.0;
        let v = values.last().unwrap() * (1.0 + f64::from(position) * ret);
        if v <= 0.0 {
            return Err(DataError::Invalid(format!(
                "portfolio value non-positive after {}",
                bars[t + 1].date
            )));
        }
        dates.push(bars[t + 1].date);
        values.push(v);
    }
    Ok(EquityCurve { dates, values })
}

/// Single-pass running-peak max drawdown, as a fraction of the peak.
pub fn max_drawdown_standard(values: &[f64]) -> f64 {
    let mut peak = f64::NEG_INFINITY;
    let mut mdd = 0.0f64;
    for &v in values {
        peak = peak.max(v);
        mdd = mdd.max((peak - v) / peak);
    }
    mdd
}

/// Peak/valley ratio form: max over peaks of peak/valley − 1.
pub fn max_drawdown_reported_literal(values: &[f64]) -> f64 {
    let mut peak = f64::NEG_INFINITY;
    let mut mdd = 0.0f64;
    for &v in values {
        peak = peak.max(v);
        mdd = mdd.max(peak / v - 1.0);
    }
    mdd
}

/// Calmar from already-computed annual return and drawdown.
pub fn calmar(annual_return: f64, max_drawdown: f64) -> Option<f64> {
    (max_drawdown > 0.0).then(|| annual_return / max_drawdown)
}

/// Explicit inputs of the printed annual-return formula, for
/// [`MetricConvention::ReportedLiteral`].
#[derive(Debug, Clone, Copy)]
pub struct ReportedAnnualInputs {
    /// Total return R over the period.
    pub total_return: f64,
    /// Number of sub-periods n.
    pub sub_periods: f64,
    /// Number of years t.
    pub years: f64,
}

pub fn annual_return_reported_literal(inputs: ReportedAnnualInputs) -> f64 {
    (inputs.total_return / inputs.sub_periods).powf(1.0 / inputs.years) - 1.0
}

/// Metrics from an equity curve. The standard convention annualizes by
/// calendar span; reported-literal plugs the curve's totals into the printed
/// formulas with n = t = span in years.
pub fn compute_metrics(
    curve: &EquityCurve,
    convention: MetricConvention,
) -> Result<Metrics, DataError> {
    if curve.values.len() < 2 {
        return Err(DataError::Insufficient(
            "need at least 2 curve points".into(),
        ));
    }
    let v0 = curve.values[0];
    let vt = *curve.values.last().unwrap();
    let cumulative = vt / v0 - 1.0;
    let span_days = (curve.dates[curve.dates.len() - 1] - curve.dates[0]).num_days() as f64;
    let years = (span_days / 365.0).max(1.0 / 365.0);
    let (annual, mdd) = match convention {
        MetricConvention::Standard => (
            (1.0 + cumulative).powf(1.0 / years) - 1.0,
            max_drawdown_standard(&curve.values),
        ),
        MetricConvention::ReportedLiteral => (
            annual_return_reported_literal(ReportedAnnualInputs {
                total_return: vt / v0,
                sub_periods: years,
                years,
            }),
            max_drawdown_reported_literal(&curve.values),
        ),
    };
    Ok(Metrics {
        cumulative_returns: cumulative,
        annual_return: annual,
        max_drawdown: mdd,
        calmar_ratio: calmar(annual, mdd),
        convention,
    })
}
