//! Orchestration: configuration, synthetic corpora, dataset preparation, the
//! end-to-end pipeline and learning curves.

pub mod config;
pub mod curve;
pub mod dataset;
pub mod pipeline;
pub mod synth;

pub use config::{PipelineConfig, TitleSource};
pub use curve::{curve_csv, run_learning_curve, CurveRow};
pub use dataset::{
    align, detector_samples, featurize, hierarchizer_samples, title_input, title_vocab, AnnotatedDoc,
};
pub use pipeline::{
    detect, detect_segmented, detected_titles, evaluate_detector, evaluate_hierarchizer, evaluate_pipeline, generate_toc, hierarchize,
    train_hierarchizer_on, train_pipeline, Detection, Models, TrainedPipeline,
};
pub use synth::{generate_corpus, read_corpus, write_corpus, Corpus, LevelStyle, SyntheticDoc, SyntheticSpec};
