//! Bull-bear market dynamics toolkit: bias-aware fusion of price windows
//! and sentiment-marked news, momentum-aware contrastive training, signal
//! backtesting, and attention/bias-migration analytics.

pub mod analytics;
pub mod backtest;
pub mod config;
pub mod error;
pub mod ingest;
pub mod loss;
pub mod manifest;
pub mod model;
pub mod pairing;
pub mod synth;
pub mod tensor;
pub mod train;
