//! End-to-end library pipeline on a toy graph, exercising every persisted
//! artifact: triple files -> dataset (+cache) -> co-occurrences -> PMI file
//! -> training -> model file -> evaluation report.

use std::fs;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use kge::{
    compute_pmi, evaluate_model, extract_cooccurrences, link_prediction, load_dataset, load_model,
    load_pmi, save_dataset, save_model, save_pmi, train, trace_to_string, BatchSize, Dataset,
    EvalOptions, TrainConfig, VocabMode,
};

#[test]
fn full_pipeline_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();

    // Triple files with names, loaded through the file interface.
    let write_triples = |name: &str, rows: &[(u32, u32, u32)]| {
        let text: String = rows
            .iter()
            .map(|&(s, r, o)| format!("n{s}\tr{r}\tn{o}\n"))
            .collect();
        fs::write(root.join(name), text).unwrap();
    };
    write_triples(
        "train.tsv",
        &[
            (0, 0, 1),
            (1, 0, 2),
            (2, 0, 3),
            (3, 1, 4),
            (4, 1, 5),
            (5, 1, 0),
            (0, 1, 3),
            (2, 1, 5),
            (4, 0, 1),
            (5, 0, 3),
        ],
    );
    write_triples("valid.tsv", &[(1, 1, 4), (3, 0, 2)]);
    write_triples("test.tsv", &[(2, 0, 1), (0, 1, 5)]);

    let data = Dataset::load(
        &root.join("train.tsv"),
        &root.join("valid.tsv"),
        &root.join("test.tsv"),
    )
    .unwrap();
    assert_eq!(data.n_entities(), 6);
    assert_eq!(data.n_relations(), 2);

    // The dataset cache round-trips.
    let cache = root.join("dataset.cache");
    save_dataset(&data, &cache).unwrap();
    let reloaded = load_dataset(&cache).unwrap();
    assert_eq!(reloaded.train, data.train);
    assert_eq!(reloaded.entities, data.entities);

    // Reloading a split under the frozen vocabulary is idempotent.
    let mut entities = data.entities.clone();
    let mut relations = data.relations.clone();
    let again = kge::load_triples(
        &root.join("train.tsv"),
        &mut entities,
        &mut relations,
        VocabMode::Frozen,
    )
    .unwrap();
    assert_eq!(again, data.train);

    // Textual co-occurrences -> PMI, persisted and reloaded.
    let textual = "n0\tseen with\tn1\nn1\tseen with\tn2\nn0\tnear\tn1\nn3\tnear\tn4\nn4\tnear\tn5\n";
    let stats = extract_cooccurrences(
        std::io::Cursor::new(textual),
        "textual",
        &data.entities,
        true,
    )
    .unwrap();
    let pmi = compute_pmi(&stats.records, data.n_entities(), 0.0, false).unwrap();
    let pmi_path = root.join("pairs.pmi");
    save_pmi(&pmi, &pmi_path).unwrap();
    let pmi = load_pmi(&pmi_path).unwrap();

    // Train, persist, reload, evaluate.
    let config = TrainConfig {
        dim: 4,
        learning_rate: 0.05,
        max_epochs: 60,
        seed: 3,
        batch_size: BatchSize::Full,
        ..TrainConfig::default()
    };
    let outcome = train(&data, &pmi, &config).unwrap();
    assert!(!outcome.trace.is_empty());
    let trace_text = trace_to_string(&outcome.trace);
    assert!(trace_text.lines().count() >= 2);

    let model_path = root.join("model.bin");
    save_model(&outcome.model, config.seed, &config.echo_string(), &model_path).unwrap();
    let saved = load_model(&model_path).unwrap();
    assert_eq!(saved.model, outcome.model);
    assert!(saved.config_echo.contains("dim=4"));

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let report = evaluate_model(&saved.model, &data, &pmi, &EvalOptions::default(), &mut rng).unwrap();
    for metric in ["mrr", "mr", "hits_at_10", "auc", "accuracy", "auto_wi_at_5", "coherence_at_5"] {
        assert!(report.get(metric).is_some(), "missing {metric}");
    }
    let mrr = report.get("mrr").unwrap();
    assert!(mrr > 0.0 && mrr <= 100.0);

    // The trained model beats the untrained one on its own training split.
    let fresh = kge::Model::random(
        data.n_entities(),
        data.n_relations(),
        config.dim,
        config.init_stddev,
        &mut ChaCha8Rng::seed_from_u64(config.seed),
    );
    let trained_rank = link_prediction(&outcome.model, &data, &data.train, false).unwrap();
    let fresh_rank = link_prediction(&fresh, &data, &data.train, false).unwrap();
    assert!(
        trained_rank.mrr >= fresh_rank.mrr,
        "training should not hurt fit on its own split: {} vs {}",
        trained_rank.mrr,
        fresh_rank.mrr
    );
}
