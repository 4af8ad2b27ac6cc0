//! Price/news loading, look-back windows, trend labels, chronological
//! alignment and splitting.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use chrono::NaiveDate;
use serde::Deserialize;

use crate::error::DataError;

/// One OHLC bar. Prices are positive and satisfy low ≤ open/close ≤ high.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceBar {
    pub date: NaiveDate,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub volume: Option<f64>,
}

impl PriceBar {
    pub fn validate(&self) -> Result<(), DataError> {
        let lo = self.open.min(self.close);
        let hi = self.open.max(self.close);
        if !(self.low <= lo && hi <= self.high) {
            return Err(DataError::Invalid(format!(
                "OHLC invariant violated on {}: low={} open={} close={} high={}",
                self.date, self.low, self.open, self.close, self.high
            )));
        }
        if [self.open, self.high, self.low, self.close]
            .iter()
            .any(|p| !(p.is_finite() && *p > 0.0))
        {
            return Err(DataError::Invalid(format!(
                "non-positive or non-finite price on {}",
                self.date
            )));
        }
        Ok(())
    }
}

/// δ-length look-back window ending at `end_date`. Rows are days
/// t−δ+1…t in increasing date order; columns are open, close, low, high.
#[derive(Debug, Clone)]
pub struct PriceWindow {
    pub end_date: NaiveDate,
    pub matrix: Vec<[f64; 4]>,
}

impl PriceWindow {
    pub fn delta(&self) -> usize {
        self.matrix.len()
    }
}

/// One news document tied to a stock and trading day.
#[derive(Debug, Clone, Deserialize, serde::Serialize)]
pub struct NewsDoc {
    pub date: NaiveDate,
    pub stock: String,
    pub text: String,
    pub topics: Vec<String>,
}

/// 1 = bullish (next close higher), 0 = bearish.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrendLabel(pub u8);

impl TrendLabel {
    pub fn is_bullish(self) -> bool {
        self.0 == 1
    }
}

/// How to label days whose next close equals the current close.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieMode {
    /// Flat days count as non-bullish (label 0).
    #[default]
    Zero,
    /// Flat days are dropped along with everything after them in the
    /// sample stream.
    Drop,
}

/// One trading day's aligned inputs: price window, same-day news, label.
#[derive(Debug, Clone)]
pub struct AlignedSample {
    pub index: usize,
    pub date: NaiveDate,
    pub window: PriceWindow,
    pub news: Vec<NewsDoc>,
    pub label: TrendLabel,
}

#[derive(Debug, Clone)]
pub struct DatasetSplit {
    pub train: Vec<AlignedSample>,
    pub test: Vec<AlignedSample>,
    pub ratio: f64,
}

/// Load OHLC bars from a CSV with header `date,open,high,low,close[,volume]`.
pub fn load_prices(path: &Path) -> Result<Vec<PriceBar>, DataError> {
    let pathstr = path.display().to_string();
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.kind() {
        csv::ErrorKind::Io(_) => DataError::Io {
            path: pathstr.clone(),
            source: std::io::Error::new(std::io::ErrorKind::Other, e.to_string()),
        },
        _ => DataError::Parse {
            path: pathstr.clone(),
            line: 0,
            detail: e.to_string(),
        },
    })?;
    let headers = reader
        .headers()
        .map_err(|e| DataError::Parse {
            path: pathstr.clone(),
            line: 1,
            detail: e.to_string(),
        })?
        .clone();
    let expected = ["date", "open", "high", "low", "close"];
    let got: Vec<&str> = headers.iter().collect();
    if got.len() < 5 || got[..5] != expected || got.len() > 6 || (got.len() == 6 && got[5] != "volume")
    {
        return Err(DataError::Parse {
            path: pathstr,
            line: 1,
            detail: format!("expected header date,open,high,low,close[,volume], got {got:?}"),
        });
    }
    let mut bars = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| DataError::Parse {
            path: pathstr.clone(),
            line,
            detail: e.to_string(),
        })?;
        let field = |idx: usize| -> Result<&str, DataError> {
            record.get(idx).ok_or_else(|| DataError::Parse {
                path: pathstr.clone(),
                line,
                detail: format!("missing field {idx}"),
            })
        };
        let date = NaiveDate::parse_from_str(field(0)?, "%Y-%m-%d").map_err(|e| {
            DataError::Parse {
                path: pathstr.clone(),
                line,
                detail: format!("bad date: {e}"),
            }
        })?;
        let num = |idx: usize| -> Result<f64, DataError> {
            field(idx)?.parse::<f64>().map_err(|e| DataError::Parse {
                path: pathstr.clone(),
                line,
                detail: format!("bad number in field {idx}: {e}"),
            })
        };
        let bar = PriceBar {
            date,
            open: num(1)?,
            high: num(2)?,
            low: num(3)?,
            close: num(4)?,
            volume: if record.len() > 5 { Some(num(5)?) } else { None },
        };
        bar.validate()?;
        bars.push(bar);
    }
    bars.sort_by_key(|b| b.date);
    for pair in bars.windows(2) {
        if pair[0].date == pair[1].date {
            return Err(DataError::Invalid(format!(
                "duplicate date {} in {}",
                pair[0].date, pathstr
            )));
        }
    }
    Ok(bars)
}

/// Load news from JSONL with keys `date`, `stock`, `text`, `topics`.
/// `topic_universe`, when given, rejects unknown topic ids.
pub fn load_news(
    path: &Path,
    topic_universe: Option<&BTreeSet<String>>,
) -> Result<Vec<NewsDoc>, DataError> {
    let pathstr = path.display().to_string();
    let content = std::fs::read_to_string(path).map_err(|e| DataError::Io {
        path: pathstr.clone(),
        source: e,
    })?;
    let mut docs = Vec::new();
    for (i, raw) in content.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let doc: NewsDoc = serde_json::from_str(raw).map_err(|e| DataError::Parse {
            path: pathstr.clone(),
            line,
            detail: e.to_string(),
        })?;
        if doc.text.is_empty() {
            return Err(DataError::Parse {
                path: pathstr.clone(),
                line,
                detail: "empty text".into(),
            });
        }
        if let Some(universe) = topic_universe {
            for t in &doc.topics {
                if !universe.contains(t) {
                    return Err(DataError::Invalid(format!(
                        "unknown topic id {t:?} at {pathstr}:{line}"
                    )));
                }
            }
        }
        docs.push(doc);
    }
    Ok(docs)
}

/// Industry → stocks map from a CSV with header `industry,stock`.
pub fn load_industry_map(path: &Path) -> Result<BTreeMap<String, BTreeSet<String>>, DataError> {
    let pathstr = path.display().to_string();
    let mut reader = csv::Reader::from_path(path).map_err(|e| DataError::Io {
        path: pathstr.clone(),
        source: std::io::Error::new(std::io::ErrorKind::Other, e.to_string()),
    })?;
    let mut map: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    let mut seen: BTreeMap<String, String> = BTreeMap::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| DataError::Parse {
            path: pathstr.clone(),
            line: i + 2,
            detail: e.to_string(),
        })?;
        let industry = record.get(0).unwrap_or("").to_string();
        let stock = record.get(1).unwrap_or("").to_string();
        if industry.is_empty() || stock.is_empty() {
            return Err(DataError::Parse {
                path: pathstr.clone(),
                line: i + 2,
                detail: "expected industry,stock".into(),
            });
        }
        if let Some(prev) = seen.get(&stock) {
            if prev != &industry {
                return Err(DataError::Invalid(format!(
                    "stock {stock} mapped to both {prev} and {industry}"
                )));
            }
        }
        seen.insert(stock.clone(), industry.clone());
        map.entry(industry).or_default().insert(stock);
    }
    Ok(map)
}

/// Trend labels from consecutive closes. The last bar has no label.
/// Equal closes label 0 under [`TieMode::Zero`].
pub fn label_trends(bars: &[PriceBar], tie: TieMode) -> Result<Vec<Option<TrendLabel>>, DataError> {
    if bars.len() < 2 {
        return Err(DataError::Insufficient(format!(
            "need at least 2 bars to label trends, got {}",
            bars.len()
        )));
    }
    let mut labels = Vec::with_capacity(bars.len() - 1);
    for pair in bars.windows(2) {
        let (cur, next) = (pair[0].close, pair[1].close);
        let label = if next > cur {
            Some(TrendLabel(1))
        } else if next < cur {
            Some(TrendLabel(0))
        } else {
            match tie {
                TieMode::Zero => Some(TrendLabel(0)),
                TieMode::Drop => None,
            }
        };
        labels.push(label);
    }
    Ok(labels)
}

/// Build one aligned sample for every labeled day with a full δ-day
/// look-back window. Days without news get an empty news list.
pub fn build_samples(
    bars: &[PriceBar],
    news: &[NewsDoc],
    delta: usize,
    tie: TieMode,
) -> Result<Vec<AlignedSample>, DataError> {
    if delta == 0 {
        return Err(DataError::Config("window length must be >= 1".into()));
    }
    if bars.len() < delta + 1 {
        return Err(DataError::Insufficient(format!(
            "need at least {} bars for window length {delta}, got {}",
            delta + 1,
            bars.len()
        )));
    }
    let labels = label_trends(bars, tie)?;
    let mut by_date: BTreeMap<NaiveDate, Vec<NewsDoc>> = BTreeMap::new();
    for doc in news {
        by_date.entry(doc.date).or_default().push(doc.clone());
    }
    let mut samples = Vec::new();
    for t in (delta - 1)..labels.len() {
        let Some(label) = labels[t] else { continue };
        let matrix = bars[t + 1 - delta..=t]
            .iter()
            .map(|b| [b.open, b.close, b.low, b.high])
            .collect();
        samples.push(AlignedSample {
            index: samples.len(),
            date: bars[t].date,
            window: PriceWindow {
                end_date: bars[t].date,
                matrix,
            },
            news: by_date.get(&bars[t].date).cloned().unwrap_or_default(),
            label,
        });
    }
    Ok(samples)
}

/// Chronological split at floor(ratio·N); no shuffling.
pub fn split_chronological(
    samples: Vec<AlignedSample>,
    ratio: f64,
) -> Result<DatasetSplit, DataError> {
    if !(0.0 < ratio && ratio < 1.0) {
        return Err(DataError::Config(format!(
            "split ratio must be in (0,1), got {ratio}"
        )));
    }
    let cut = (ratio * samples.len() as f64).floor() as usize;
    if cut == 0 || cut == samples.len() {
        return Err(DataError::Config(format!(
            "split at ratio {ratio} leaves an empty side for {} samples",
            samples.len()
        )));
    }
    let mut train = samples;
    let test = train.split_off(cut);
    Ok(DatasetSplit { train, test, ratio })
}
