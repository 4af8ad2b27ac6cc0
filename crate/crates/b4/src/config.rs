//! Run configuration: a TOML file with flat sections, overridable by
//! command-line flags (flags win).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analytics::Aggregation;
use crate::backtest::{MetricConvention, TradeMode};
use crate::error::DataError;
use crate::ingest::TieMode;
use crate::model::ModelConfig;
use crate::pairing::MomentumSpan;
use crate::train::TrainConfig;

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct PathsSection {
    pub prices: PathBuf,
    pub news: PathBuf,
    pub industries: PathBuf,
    pub out: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct DataSection {
    /// Look-back window length δ in trading days.
    pub delta: usize,
    /// Chronological train fraction.
    pub split_ratio: f64,
    pub tie_mode: TieModeConfig,
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection {
            delta: 5,
            split_ratio: 0.7,
            tie_mode: TieModeConfig::Zero,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "kebab-case")]
pub enum TieModeConfig {
    #[default]
    Zero,
    Drop,
}

impl From<TieModeConfig> for TieMode {
    fn from(t: TieModeConfig) -> TieMode {
        match t {
            TieModeConfig::Zero => TieMode::Zero,
            TieModeConfig::Drop => TieMode::Drop,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingSection {
    pub alpha: f64,
    pub span: MomentumSpan,
    pub tau: f64,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: Option<u64>,
}

impl Default for TrainingSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainingSection {
            alpha: t.alpha,
            span: t.span,
            tau: t.tau,
            lr: t.lr,
            epochs: t.epochs,
            batch_size: t.batch_size,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct BacktestSection {
    pub mode: TradeMode,
    pub convention: MetricConvention,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalyticsSection {
    pub windows: usize,
    pub aggregation: Aggregation,
}

impl Default for AnalyticsSection {
    fn default() -> Self {
        AnalyticsSection {
            windows: 4,
            aggregation: Aggregation::Mean,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub stocks: Vec<String>,
    pub paths: PathsSection,
    pub data: DataSection,
    pub model: ModelConfig,
    pub training: TrainingSection,
    pub backtest: BacktestSection,
    pub analytics: AnalyticsSection,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub stock: Option<String>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, DataError> {
        let raw = std::fs::read_to_string(path).map_err(|e| DataError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        toml::from_str(&raw).map_err(|e| {
            DataError::Config(format!("bad config {}: {e}", path.display()))
        })
    }

    pub fn apply(&mut self, overrides: &Overrides) {
        if let Some(out) = &overrides.out {
            self.paths.out = out.clone();
        }
        if let Some(seed) = overrides.seed {
            self.training.seed = Some(seed);
        }
        if let Some(stock) = &overrides.stock {
            self.stocks = vec![stock.clone()];
        }
    }

    pub fn validate(&self) -> Result<(), DataError> {
        self.model.validate()?;
        if self.training.seed.is_none() {
            return Err(DataError::Config(
                "training.seed is mandatory (set it in the config or pass --seed)".into(),
            ));
        }
        self.train_config()
            .validate()
            .map_err(|e| DataError::Config(format!("training: {e}")))?;
        if self.data.delta == 0 {
            return Err(DataError::Config("data.delta must be >= 1".into()));
        }
        if !(0.0 < self.data.split_ratio && self.data.split_ratio < 1.0) {
            return Err(DataError::Config(format!(
                "data.split_ratio must be in (0,1), got {}",
                self.data.split_ratio
            )));
        }
        if self.analytics.windows == 0 {
            return Err(DataError::Config("analytics.windows must be >= 1".into()));
        }
        if self.stocks.is_empty() {
            return Err(DataError::Config("stocks list is empty".into()));
        }
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.training.seed.unwrap_or(0)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.training.epochs,
            batch_size: self.training.batch_size,
            lr: self.training.lr,
            alpha: self.training.alpha,
            tau: self.training.tau,
            span: self.training.span,
        }
    }

    /// Per-stock output directory, created on demand.
    pub fn stock_dir(&self, stock: &str) -> Result<PathBuf, DataError> {
        let dir = self.paths.out.join(stock);
        std::fs::create_dir_all(&dir).map_err(|e| DataError::Io {
            path: dir.display().to_string(),
            source: e,
        })?;
        Ok(dir)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn minimal_toml_parses_with_defaults() {
        let raw = r#"
            stocks = ["SYNTH"]

            [paths]
            prices = "p.csv"
            news = "n.jsonl"
            industries = "i.csv"
            out = "out"

            [training]
            seed = 7
        "#;
        let cfg: RunConfig = toml::from_str(raw).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.training.epochs, 200);
        assert_eq!(cfg.training.alpha, 0.5);
        assert_eq!(cfg.data.delta, 5);
        assert_eq!(cfg.model.d, 32);
        assert_eq!(cfg.analytics.windows, 4);
        assert_eq!(cfg.training.span, MomentumSpan::Symmetric(1));
    }

    #[test]
    fn span_parses_from_string_forms() {
        for (raw, want) in [
            ("\"-2\"", MomentumSpan::Backward(2)),
            ("\"0\"", MomentumSpan::None),
            ("\"2\"", MomentumSpan::Forward(2)),
            ("\"+-1\"", MomentumSpan::Symmetric(1)),
        ] {
            let cfg: RunConfig =
                toml::from_str(&format!("[training]\nseed = 1\nspan = {raw}")).unwrap();
            assert_eq!(cfg.training.span, want, "{raw}");
        }
    }

    #[test]
    fn missing_seed_is_rejected() {
        let cfg: RunConfig = toml::from_str("stocks = [\"X\"]").unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("mystery = 1").is_err());
    }

    #[test]
    fn overrides_take_precedence() {
        let mut cfg: RunConfig =
            toml::from_str("stocks = [\"A\", \"B\"]\n[training]\nseed = 1").unwrap();
        cfg.apply(&Overrides {
            out: Some(PathBuf::from("elsewhere")),
            seed: Some(99),
            stock: Some("B".into()),
        });
        assert_eq!(cfg.paths.out, PathBuf::from("elsewhere"));
        assert_eq!(cfg.training.seed, Some(99));
        assert_eq!(cfg.stocks, vec!["B".to_string()]);
    }

    #[test]
    fn load_reports_path_on_error() {
        let err = RunConfig::load(Path::new("/nonexistent/cfg.toml")).unwrap_err();
        assert!(err.to_string().contains("cfg.toml"));
    }

    #[test]
    fn roundtrips_through_toml() {
        let mut cfg = RunConfig::default();
        cfg.stocks = vec!["X".into()];
        cfg.training.seed = Some(3);
        cfg.training.span = MomentumSpan::Backward(2);
        let raw = toml::to_string(&cfg).unwrap();
        let back: RunConfig = toml::from_str(&raw).unwrap();
        assert_eq!(back.training.span, MomentumSpan::Backward(2));
        assert_eq!(back.training.seed, Some(3));
    }

    #[test]
    fn bad_range_values_fail_validation() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        write!(
            file,
            "stocks = [\"X\"]\n[training]\nseed = 1\nalpha = 2.0"
        )
        .unwrap();
        let cfg = RunConfig::load(file.path()).unwrap();
        assert!(cfg.validate().is_err());
    }
}
