//! Knowledge-graph embeddings with a PMI coherence regularizer.
//!
//! The library trains entity-model embeddings (one vector per entity, a
//! subject-side and an object-side vector per relation) with a pairwise
//! logistic ranking loss over closed-world corruptions, optionally
//! regularized so that entity-vector inner products track entity-pair PMI
//! scores extracted from text. Evaluation covers object link prediction
//! within relation categories, per-relation threshold triple classification,
//! dimension coherence, and automated/manual word-intrusion tests.
//!
//! The pipeline, end to end:
//!
//! 1. [`data`]: load TSV triple splits, build vocabularies and per-relation
//!    categories, extract entity co-occurrences from textual triples.
//! 2. [`pmi`]: turn co-occurrence counts into a sparse symmetric PMI matrix.
//! 3. [`train`]: gradient descent on the loss + coherence + L2 objective.
//! 4. [`eval`] / [`report`]: rank, classify, inspect, and aggregate across seeds.

pub mod data;
pub mod eval;
pub mod loss;
pub mod matrix;
pub mod model;
pub mod pmi;
pub mod report;
pub mod sample;
pub mod train;

pub use data::{
    extract_cooccurrences, extract_cooccurrences_from_path, load_dataset, load_triples,
    save_dataset, CooccurrenceRecord, CooccurrenceStats, DataError, Dataset, EntityId, RelationId,
    Triple, Vocab, VocabMode,
};
pub use eval::{
    accuracy_at, auto_word_intrusion, best_threshold, build_intrusion_tasks, coherence_at_k,
    link_prediction, parse_annotation_file, qualitative_report, rank_auc, rank_object,
    read_intrusion_tasks, score_manual_intrusion, top_k_dimension, triple_classification,
    write_intrusion_tasks, ClassificationResult, EvalError, IntrusionTask, IntrusionTaskSet,
    LoadedTasks, RankingResult,
};
pub use loss::{
    aggregate_loss, coherence_term, gradient, gradient_baseline, l2_term, objective,
    objective_baseline, pair_loss, CoherencePairs,
};
pub use matrix::Matrix;
pub use model::{
    export_entity_tsv, load_model, save_model, score, Model, ModelError, SavedModel,
};
pub use pmi::{compute_pmi, export_pmi_tsv, load_pmi, save_pmi, PmiError, PmiMatrix};
pub use report::{aggregate, evaluate_model, AggregateReport, EvalOptions, EvalReport};
pub use sample::{corrupt_object, corrupt_subject, sample_all_negatives, sample_negatives, NegativePair};
pub use train::{train, trace_to_string, write_trace, BatchSize, TrainConfig, TraceRow, TrainOutcome};
