use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use b4::analytics::{
    build_panel, consecutive_pairs, emit_reports, migration, SampleAttention, WindowPartition,
};
use b4::backtest::{compute_metrics, run_backtest, EquityCurve, Signal};
use b4::config::{Overrides, RunConfig};
use b4::ingest::{
    build_samples, load_industry_map, load_news, load_prices, split_chronological, AlignedSample,
    DatasetSplit, PriceBar,
};
use b4::manifest::RunManifest;
use b4::model::{Checkpoint, Model};
use b4::pairing::MomentumSpan;
use b4::train::{
    accuracy, default_alphas, grid_search, infer, signals, write_grid_csv, Trainer,
};

#[derive(Parser)]
#[command(name = "b4", about = "Bull-bear market dynamics pipeline", version)]
struct Cli {
    /// Configuration file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Random seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Restrict the run to one ticker.
    #[arg(long, global = true)]
    stock: Option<String>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train one model per configured stock.
    Train,
    /// Backtest trained checkpoints on the test split.
    Backtest {
        /// Force all-flat signals (null-strategy baseline).
        #[arg(long)]
        flat: bool,
    },
    /// Emit the attention/bias analytics CSVs.
    Analyze,
    /// Hyperparameter grid search ranked by validation returns.
    Grid,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("B4_LOG")).init();
    let cli = Cli::parse();
    let config_path = cli
        .config
        .clone()
        .unwrap_or_else(|| PathBuf::from("b4.toml"));
    let mut cfg = match RunConfig::load(&config_path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    cfg.apply(&Overrides {
        out: cli.out.clone(),
        seed: cli.seed,
        stock: cli.stock.clone(),
    });
    if let Err(e) = cfg.validate() {
        eprintln!("error: {e}");
        return ExitCode::FAILURE;
    }

    let command_name = match &cli.cmd {
        Cmd::Train => "train",
        Cmd::Backtest { .. } => "backtest",
        Cmd::Analyze => "analyze",
        Cmd::Grid => "grid",
    };
    let config_echo = serde_json::to_value(&cfg).unwrap_or(serde_json::Value::Null);
    let mut manifest = RunManifest::new(command_name, cfg.seed(), config_echo);

    for stock in cfg.stocks.clone() {
        let result = match &cli.cmd {
            Cmd::Train => cmd_train(&cfg, &stock, &mut manifest),
            Cmd::Backtest { flat } => cmd_backtest(&cfg, &stock, *flat, &mut manifest),
            Cmd::Analyze => cmd_analyze(&cfg, &stock, &mut manifest),
            Cmd::Grid => cmd_grid(&cfg, &stock, &mut manifest),
        };
        if let Err(e) = result {
            eprintln!("error [{stock}]: {e}");
            manifest.record_error(format!("{stock}: {e}"));
        }
    }

    let clean = manifest.is_clean();
    match manifest.write(&cfg.paths.out) {
        Ok(path) => log::info!("manifest written to {}", path.display()),
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    if clean {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

/// Per-stock prices file: `paths.prices` itself, or `<stock>.csv` inside
/// it when it is a directory.
fn prices_path(cfg: &RunConfig, stock: &str) -> PathBuf {
    if cfg.paths.prices.is_dir() {
        cfg.paths.prices.join(format!("{stock}.csv"))
    } else {
        cfg.paths.prices.clone()
    }
}

struct StockData {
    bars: Vec<PriceBar>,
    split: DatasetSplit,
    all_samples: Vec<AlignedSample>,
}

fn load_stock(cfg: &RunConfig, stock: &str) -> anyhow::Result<StockData> {
    let bars = load_prices(&prices_path(cfg, stock))?;
    let news: Vec<_> = load_news(&cfg.paths.news, None)?
        .into_iter()
        .filter(|d| d.stock == stock)
        .collect();
    let samples = build_samples(&bars, &news, cfg.data.delta, cfg.data.tie_mode.into())?;
    let split = split_chronological(samples.clone(), cfg.data.split_ratio)?;
    Ok(StockData {
        bars,
        split,
        all_samples: samples,
    })
}

fn checkpoint_path(dir: &Path) -> PathBuf {
    dir.join("checkpoint.json")
}

fn load_model(cfg: &RunConfig, dir: &Path) -> anyhow::Result<Model> {
    let params = Checkpoint::load(&checkpoint_path(dir))?.into_params(&cfg.model)?;
    Ok(Model::from_params(cfg.model.clone(), params)?)
}

fn cmd_train(cfg: &RunConfig, stock: &str, manifest: &mut RunManifest) -> anyhow::Result<()> {
    let data = load_stock(cfg, stock)?;
    let dir = cfg.stock_dir(stock)?;
    let model = Model::init(cfg.model.clone(), cfg.seed())?;
    let mut trainer = Trainer::new(model, cfg.train_config())?;
    let records = trainer.train(&data.split.train)?;

    let mut losses = String::from("epoch,batch,comp,mar,ce,total\n");
    for r in &records {
        losses.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.epoch, r.batch, r.loss.comp, r.loss.mar, r.loss.ce, r.loss.total
        ));
    }
    let losses_path = dir.join("losses.csv");
    std::fs::write(&losses_path, losses)?;
    let ckpt = checkpoint_path(&dir);
    Checkpoint::from_model(&cfg.model, &trainer.model.params).save(&ckpt)?;

    manifest.record_file(&losses_path, &cfg.paths.out)?;
    manifest.record_file(&ckpt, &cfg.paths.out)?;
    manifest.note(&format!("{stock}.batches"), &records.len());
    if let (Some(first), Some(last)) = (records.first(), records.last()) {
        manifest.note(&format!("{stock}.initial_loss"), &first.loss.total);
        manifest.note(&format!("{stock}.final_loss"), &last.loss.total);
    }
    let test_acc = accuracy(&infer(&trainer.model, &data.split.test)?);
    manifest.note(&format!("{stock}.test_accuracy"), &test_acc);
    log::info!("[{stock}] trained {} batches, test accuracy {test_acc:.3}", records.len());
    Ok(())
}

fn cmd_backtest(
    cfg: &RunConfig,
    stock: &str,
    flat: bool,
    manifest: &mut RunManifest,
) -> anyhow::Result<()> {
    let data = load_stock(cfg, stock)?;
    let dir = cfg.stock_dir(stock)?;
    let model = load_model(cfg, &dir)?;
    let inferences = infer(&model, &data.split.test)?;
    let sigs: Vec<Signal> = if flat {
        inferences
            .iter()
            .map(|i| Signal {
                date: i.date,
                position: 0,
            })
            .collect()
    } else {
        signals(&inferences, cfg.backtest.mode)
    };
    let curve = run_backtest(&sigs, &data.bars)?;
    let metrics = compute_metrics(&curve, cfg.backtest.convention)?;

    let report_path = dir.join("backtest.csv");
    std::fs::write(&report_path, backtest_report(&sigs, &curve, &data.bars))?;
    let metrics_path = dir.join("metrics.json");
    let mut metrics_json = serde_json::to_value(&metrics)?;
    metrics_json["mode"] = serde_json::to_value(cfg.backtest.mode)?;
    std::fs::write(&metrics_path, serde_json::to_string_pretty(&metrics_json)?)?;

    manifest.record_file(&report_path, &cfg.paths.out)?;
    manifest.record_file(&metrics_path, &cfg.paths.out)?;
    manifest.note(&format!("{stock}.metrics"), &metrics);
    log::info!(
        "[{stock}] cumulative {:.4}, annual {:.4}",
        metrics.cumulative_returns,
        metrics.annual_return
    );
    Ok(())
}

fn backtest_report(sigs: &[Signal], curve: &EquityCurve, bars: &[PriceBar]) -> String {
    let mut out = String::from("date,position,close,portfolio_value\n");
    for (date, value) in curve.dates.iter().zip(&curve.values) {
        let position = sigs
            .iter()
            .find(|s| s.date == *date)
            .map_or(0, |s| s.position);
        let close = bars
            .iter()
            .find(|b| b.date == *date)
            .map_or(f64::NAN, |b| b.close);
        out.push_str(&format!("{date},{position},{close},{value}\n"));
    }
    out
}

fn cmd_analyze(cfg: &RunConfig, stock: &str, manifest: &mut RunManifest) -> anyhow::Result<()> {
    let data = load_stock(cfg, stock)?;
    let dir = cfg.stock_dir(stock)?;
    let model = load_model(cfg, &dir)?;
    let industry_map = load_industry_map(&cfg.paths.industries)?;
    let inferences = infer(&model, &data.all_samples)?;
    let attention: Vec<SampleAttention> = inferences
        .into_iter()
        .map(|inf| SampleAttention {
            stock: stock.to_string(),
            sample_index: inf.sample_index,
            maps: inf.maps,
            position_topics: inf.position_topics,
        })
        .collect();
    let partition = WindowPartition::new(cfg.analytics.windows, attention.len())?;
    let panel = build_panel(&attention, partition, cfg.analytics.aggregation)?;
    let matrix = migration(&panel, &consecutive_pairs(cfg.analytics.windows));
    let files = emit_reports(&panel, &matrix, &industry_map, &dir)?;
    for f in &files {
        manifest.record_file(f, &cfg.paths.out)?;
    }
    manifest.note(&format!("{stock}.panel_cells"), &panel.entries.len());
    log::info!("[{stock}] analytics over {} panel cells", panel.entries.len());
    Ok(())
}

fn cmd_grid(cfg: &RunConfig, stock: &str, manifest: &mut RunManifest) -> anyhow::Result<()> {
    let data = load_stock(cfg, stock)?;
    let dir = cfg.stock_dir(stock)?;
    let rows = grid_search(
        &default_alphas(),
        &MomentumSpan::default_grid(),
        cfg.train_config(),
        &cfg.model,
        &data.split.train,
        &data.split.test,
        &data.bars,
        cfg.seed(),
    )?;
    let path = dir.join("grid.csv");
    write_grid_csv(&rows, &path)?;
    manifest.record_file(&path, &cfg.paths.out)?;
    if let Some(best) = rows.first() {
        manifest.note(
            &format!("{stock}.best"),
            &serde_json::json!({
                "alpha": best.alpha,
                "span": best.span.to_string(),
                "cumulative_return": best.cumulative_return,
            }),
        );
    }
    manifest.note(&format!("{stock}.grid_rows"), &rows.len());
    Ok(())
}
