//! Corpus synthesis, end-to-end restoration and the strategy benchmark.

pub mod bench;
pub mod config;
pub mod corpus;
pub mod restore;
pub mod scenes;
pub mod train;

pub use bench::{bench, run_bench, BenchReport, BenchRow};
pub use config::{parse_strategies, RunConfig, Strategy};
pub use corpus::{class_counts, generate_corpus, load_corpus, make_corpus, replay, CorpusItem, DegradationClass, Manifest};
pub use restore::{candidates, perceive, restore_one, Diagnostics, Perception};
pub use train::{train_from_corpus, training_sample, training_samples, type_f1};
