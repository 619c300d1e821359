//! Experiment orchestration: configs, trial records, phase sweeps, the
//! UC-failure and margin-vacuity demos, CSV/JSON emission, file formats for
//! datasets and networks, and the acceptance suite.

pub mod acceptance;
pub mod config;
pub mod demos;
pub mod emit;
pub mod io;
pub mod record;
pub mod trial;

pub use config::{ExperimentConfig, Problem};
pub use record::TrialRecord;

use std::sync::OnceLock;

/// Shared worker pool; size taken from `MARGINLAB_WORKERS` when set.
pub fn thread_pool() -> &'static rayon::ThreadPool {
    static POOL: OnceLock<rayon::ThreadPool> = OnceLock::new();
    POOL.get_or_init(|| {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Ok(v) = std::env::var("MARGINLAB_WORKERS") {
            if let Ok(threads) = v.parse::<usize>() {
                builder = builder.num_threads(threads.max(1));
            }
        }
        builder.build().expect("worker pool")
    })
}
