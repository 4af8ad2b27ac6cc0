//! Synthetic planted-signal dataset: a random price walk whose news
//! carries a marker word correlated with the next day's direction.
//! Used as the end-to-end learnability fixture.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::DataError;
use crate::ingest::{NewsDoc, PriceBar};

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub stock: String,
    pub industry: String,
    pub days: usize,
    /// Probability that the day's marker word matches the realized
    /// next-day direction.
    pub marker_accuracy: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            stock: "SYNTH".into(),
            industry: "synthetic".into(),
            days: 600,
            marker_accuracy: 0.9,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthData {
    pub bars: Vec<PriceBar>,
    pub news: Vec<NewsDoc>,
    pub industry_rows: Vec<(String, String)>,
}

const BULL_MARKER: &str = "skyrocket";
const BEAR_MARKER: &str = "nosedive";
const FILLER: &[&str] = &[
    "markets", "traders", "session", "shares", "analysts", "report", "volume", "earnings",
    "quarter", "outlook",
];
const TOPICS: &[&str] = &["growth", "risk", "policy"];

pub fn bull_marker() -> &'static str {
    BULL_MARKER
}

pub fn bear_marker() -> &'static str {
    BEAR_MARKER
}

/// Generate the planted dataset. Directions are a fair coin; closes move
/// 0.2%–2% in the drawn direction; each day gets one news document whose
/// marker word matches the direction with `marker_accuracy`.
pub fn planted_dataset(cfg: &SynthConfig) -> Result<SynthData, DataError> {
    if cfg.days < 3 {
        return Err(DataError::Config(format!(
            "need at least 3 days, got {}",
            cfg.days
        )));
    }
    if !(0.0..=1.0).contains(&cfg.marker_accuracy) {
        return Err(DataError::Config(format!(
            "marker accuracy must lie in [0,1], got {}",
            cfg.marker_accuracy
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let start = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
    let mut closes: Vec<f64> = Vec::with_capacity(cfg.days);
    let mut up_moves = Vec::with_capacity(cfg.days);
    let mut close = 100.0;
    closes.push(close);
    for _ in 1..cfg.days {
        let up = rng.gen_bool(0.5);
        let magnitude = rng.gen_range(0.002..0.02);
        close *= if up { 1.0 + magnitude } else { 1.0 - magnitude };
        up_moves.push(up);
        closes.push(close);
    }

    let mut bars = Vec::with_capacity(cfg.days);
    let mut news = Vec::with_capacity(cfg.days);
    for t in 0..cfg.days {
        let date = start + chrono::Days::new(t as u64);
        let c = closes[t];
        let open = c * (1.0 + rng.gen_range(-0.005..0.005));
        let high = c.max(open) * (1.0 + rng.gen_range(0.0..0.01));
        let low = c.min(open) * (1.0 - rng.gen_range(0.0..0.01));
        let bar = PriceBar {
            date,
            open,
            high,
            low,
            close: c,
            volume: None,
        };
        bar.validate()?;
        bars.push(bar);

        // the last day has no realized next-day direction, hence no label
        // and its news is never paired with one; still emitted for realism
        let next_up = up_moves.get(t).copied().unwrap_or(false);
        let truthful = rng.gen_bool(cfg.marker_accuracy);
        let marker = if next_up == truthful {
            BULL_MARKER
        } else {
            BEAR_MARKER
        };
        let w1 = FILLER[rng.gen_range(0..FILLER.len())];
        let w2 = FILLER[rng.gen_range(0..FILLER.len())];
        news.push(NewsDoc {
            date,
            stock: cfg.stock.clone(),
            text: format!("{w1} {marker} {w2}"),
            topics: vec![TOPICS[t % TOPICS.len()].to_string()],
        });
    }
    Ok(SynthData {
        bars,
        news,
        industry_rows: vec![(cfg.industry.clone(), cfg.stock.clone())],
    })
}

/// Paths of the three on-disk fixture files.
#[derive(Debug, Clone)]
pub struct SynthPaths {
    pub prices: PathBuf,
    pub news: PathBuf,
    pub industries: PathBuf,
}

/// Write the dataset in the formats the loaders expect.
pub fn write_dataset(data: &SynthData, dir: &Path) -> Result<SynthPaths, DataError> {
    std::fs::create_dir_all(dir).map_err(|e| DataError::Io {
        path: dir.display().to_string(),
        source: e,
    })?;
    let write = |name: &str, content: String| -> Result<PathBuf, DataError> {
        let path = dir.join(name);
        std::fs::write(&path, content).map_err(|e| DataError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Ok(path)
    };

    let mut prices = String::from("date,open,high,low,close\n");
    for b in &data.bars {
        prices.push_str(&format!(
            "{},{},{},{},{}\n",
            b.date, b.open, b.high, b.low, b.close
        ));
    }

    let mut news = String::new();
    for doc in &data.news {
        news.push_str(&serde_json::to_string(doc).map_err(|e| DataError::Invalid(e.to_string()))?);
        news.push('\n');
    }

    let mut industries = String::from("industry,stock\n");
    for (industry, stock) in &data.industry_rows {
        industries.push_str(&format!("{industry},{stock}\n"));
    }

    Ok(SynthPaths {
        prices: write("prices.csv", prices)?,
        news: write("news.jsonl", news)?,
        industries: write("industries.csv", industries)?,
    })
}
