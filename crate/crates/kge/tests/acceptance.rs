//! Acceptance suite. Each test covers one criterion and prints a single
//! `acceptance N (<name>): PASS|FAIL` line (visible with `--nocapture`).
//!
//! Every oracle here is written independently of the library code it checks:
//! finite differences for gradients, dense quadratic loops for PMI and
//! coherence, and explicit sorts for rankings.

use std::collections::HashSet;

use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kge::{
    aggregate_loss, auto_word_intrusion, coherence_at_k, coherence_term, compute_pmi,
    evaluate_model, gradient, gradient_baseline, l2_term, objective, objective_baseline,
    rank_object, sample_all_negatives, top_k_dimension, train, BatchSize, CoherencePairs,
    CooccurrenceRecord, Dataset, EntityId, EvalOptions, Model, NegativePair, PmiMatrix, Triple,
    TrainConfig, Vocab,
};

fn verdict(number: usize, name: &str, result: Result<(), String>) {
    match &result {
        Ok(()) => println!("acceptance {number} ({name}): PASS"),
        Err(reason) => println!("acceptance {number} ({name}): FAIL — {reason}"),
    }
    if let Err(reason) = result {
        panic!("criterion {number} ({name}) failed: {reason}");
    }
}

fn vocabs(n: u32, m: u32) -> (Vocab, Vocab) {
    let mut e = Vocab::new();
    let mut r = Vocab::new();
    for i in 0..n {
        e.intern(&format!("c{i}"));
    }
    for i in 0..m {
        r.intern(&format!("rel{i}"));
    }
    (e, r)
}

fn random_records<R: Rng>(n: u32, density_in_3: u32, rng: &mut R) -> Vec<CooccurrenceRecord> {
    let mut records = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random_range(0..3) < density_in_3 {
                records.push(CooccurrenceRecord {
                    a: EntityId(i),
                    b: EntityId(j),
                    count: rng.random_range(1..9),
                });
            }
        }
    }
    records
}

// ===========================================================================
// Criterion 1: analytic gradient vs central finite differences
// ===========================================================================

fn fd_objective_gradient(
    model: &Model,
    triples: &[Triple],
    negatives: &[NegativePair],
    pairs: &CoherencePairs,
    lambda_c: f64,
    lambda_r: f64,
    h: f64,
) -> Model {
    let f = |m: &Model| objective(m, triples, negatives, pairs, lambda_c, lambda_r).unwrap();
    let mut grad = model.zeros_like();
    let mut probe = model.clone();
    for which in 0..3usize {
        let len = match which {
            0 => probe.entity.as_slice().len(),
            1 => probe.rel_subject.as_slice().len(),
            _ => probe.rel_object.as_slice().len(),
        };
        for idx in 0..len {
            let read = |m: &Model| match which {
                0 => m.entity.as_slice()[idx],
                1 => m.rel_subject.as_slice()[idx],
                _ => m.rel_object.as_slice()[idx],
            };
            let write = |m: &mut Model, v: f64| match which {
                0 => m.entity.as_mut_slice()[idx] = v,
                1 => m.rel_subject.as_mut_slice()[idx] = v,
                _ => m.rel_object.as_mut_slice()[idx] = v,
            };
            let orig = read(&probe);
            write(&mut probe, orig + h);
            let up = f(&probe);
            write(&mut probe, orig - h);
            let down = f(&probe);
            write(&mut probe, orig);
            write(&mut grad, (up - down) / (2.0 * h));
        }
    }
    grad
}

fn criterion_gradient_correctness() -> Result<(), String> {
    let lambdas = [0.0, 0.01, 1.0];
    for instance in 0..3u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + instance);
        let model = Model::random(6, 2, 4, 0.5, &mut rng);
        let mut triples = Vec::new();
        let mut seen = HashSet::new();
        while triples.len() < 4 {
            let t = Triple::new(
                rng.random_range(0..6),
                rng.random_range(0..2),
                rng.random_range(0..6),
            );
            if t.subject != t.object && seen.insert(t) {
                triples.push(t);
            }
        }
        let negatives: Vec<NegativePair> = triples
            .iter()
            .map(|t| {
                let other_s = EntityId((t.subject.0 + 1 + rng.random_range(0..5)) % 6);
                let other_o = EntityId((t.object.0 + 1 + rng.random_range(0..5)) % 6);
                NegativePair {
                    positive: *t,
                    corrupt_subject: Triple {
                        subject: other_s,
                        ..*t
                    },
                    corrupt_object: Triple {
                        object: other_o,
                        ..*t
                    },
                }
            })
            .collect();
        let pmi = compute_pmi(&random_records(6, 2, &mut rng), 6, 0.0, false)
            .map_err(|e| e.to_string())?;
        let pairs = CoherencePairs::dense(&pmi);

        for &lc in &lambdas {
            for &lr in &lambdas {
                let analytic =
                    gradient(&model, &triples, &negatives, &pairs, lc, lr).map_err(|e| e.to_string())?;
                let numeric =
                    fd_objective_gradient(&model, &triples, &negatives, &pairs, lc, lr, 1e-5);
                for (a, n) in [
                    (&analytic.entity, &numeric.entity),
                    (&analytic.rel_subject, &numeric.rel_subject),
                    (&analytic.rel_object, &numeric.rel_object),
                ] {
                    for (av, nv) in a.as_slice().iter().zip(n.as_slice()) {
                        let scale = av.abs().max(nv.abs()).max(1.0);
                        if (av - nv).abs() / scale > 1e-4 {
                            return Err(format!(
                                "instance {instance} lambda_c={lc} lambda_r={lr}: \
                                 analytic {av} vs finite-difference {nv}"
                            ));
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

#[test]
fn acceptance_1_gradient_correctness() {
    verdict(1, "gradient correctness", criterion_gradient_correctness());
}

// ===========================================================================
// Criterion 2: brute-force oracle equivalence on n <= 50 instances
// ===========================================================================

fn criterion_oracle_equivalence() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(200);
    let n = 50usize;
    let records = random_records(n as u32, 1, &mut rng);
    let pmi = compute_pmi(&records, n, 0.0, false).map_err(|e| e.to_string())?;

    // compute_pmi vs a dense quadratic recomputation.
    let mut counts = vec![vec![0.0f64; n]; n];
    for r in &records {
        counts[r.a.idx()][r.b.idx()] += r.count as f64;
        counts[r.b.idx()][r.a.idx()] += r.count as f64;
    }
    let mut marginal = vec![0.0f64; n];
    let mut total = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            marginal[i] += counts[i][j];
            marginal[j] += counts[i][j];
            total += counts[i][j];
        }
    }
    for i in 0..n {
        for j in 0..n {
            let expected = if i != j && counts[i][j] > 0.0 {
                (counts[i][j] * total / (marginal[i] * marginal[j])).ln()
            } else {
                0.0
            };
            let got = pmi.lookup(EntityId(i as u32), EntityId(j as u32));
            if (got - expected).abs() > 1e-10 {
                return Err(format!("pmi({i},{j}) = {got}, dense oracle {expected}"));
            }
        }
    }

    // coherence_term over the dense pair set vs a double loop.
    let model = Model::random(n, 3, 6, 0.4, &mut rng);
    let got = coherence_term(&model.entity, &CoherencePairs::dense(&pmi));
    let mut expected = 0.0;
    for i in 0..n {
        for j in 0..i {
            let mut dot = 0.0;
            for c in 0..6 {
                dot += model.entity.get(i, c) * model.entity.get(j, c);
            }
            let residual = dot - pmi.lookup(EntityId(i as u32), EntityId(j as u32));
            expected += residual * residual;
        }
    }
    if (got - expected).abs() > 1e-10 {
        return Err(format!("coherence_term {got} vs double-loop {expected}"));
    }

    // rank_object vs an explicit sort with the same pessimistic tie rule.
    let (e, r) = vocabs(n as u32, 1);
    let mut train_triples = Vec::new();
    for o in 0..(n as u32 - 1) {
        if o != 1 {
            train_triples.push(Triple::new(n as u32 - 1, 0, o));
        }
    }
    let test_triples = vec![Triple::new(n as u32 - 1, 0, 1)];
    let data = Dataset::build(e, r, train_triples, vec![], test_triples)
        .map_err(|e| e.to_string())?;
    for trial in 0..20 {
        let model = Model::random(n, 1, 4, 0.5, &mut rng);
        let t = data.test[0];
        let got = rank_object(&model, &t, &data, false);
        let truth = kge::score(&model, &t);
        let mut scored: Vec<(f64, bool)> = data
            .object_category(t.relation)
            .iter()
            .map(|&c| (kge::score(&model, &Triple { object: c, ..t }), c == t.object))
            .collect();
        scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        let expected = scored.iter().position(|&(_, is_truth)| is_truth).unwrap() + 1;
        if got != expected {
            return Err(format!(
                "trial {trial}: rank_object {got} vs sort oracle {expected} (truth score {truth})"
            ));
        }
    }

    // coherence_at_k vs an explicit triple loop.
    let theta = Model::random(n, 1, 8, 0.7, &mut rng).entity;
    let k = 5;
    let got = coherence_at_k(&theta, &pmi, k);
    let mut expected = 0.0;
    for l in 0..8 {
        let top = top_k_dimension(&theta, l, k);
        for i in 1..k {
            for j in 0..i {
                expected += pmi.lookup(top[i], top[j]);
            }
        }
    }
    expected /= 8.0;
    if (got - expected).abs() > 1e-10 {
        return Err(format!("coherence_at_k {got} vs triple loop {expected}"));
    }

    // auto_word_intrusion vs a brute-force reimplementation.
    let got = auto_word_intrusion(&theta, &pmi, k);
    let mut correct = 0usize;
    for l in 0..8 {
        let mut order: Vec<(f64, u32)> = (0..n).map(|i| (theta.get(i, l), i as u32)).collect();
        order.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        let mut members: Vec<u32> = order.iter().take(k).map(|&(_, i)| i).collect();
        let intruder = order.last().unwrap().1;
        members.push(intruder);
        let wi_score = |e: u32| -> f64 {
            members
                .iter()
                .filter(|&&o| o != e)
                .map(|&o| pmi.lookup(EntityId(e), EntityId(o)))
                .sum()
        };
        let min = members
            .iter()
            .map(|&e| wi_score(e))
            .fold(f64::INFINITY, f64::min);
        let argmins: Vec<u32> = members
            .iter()
            .copied()
            .filter(|&e| wi_score(e) == min)
            .collect();
        if argmins.len() == 1 && argmins[0] == intruder {
            correct += 1;
        }
    }
    let expected = 100.0 * correct as f64 / 8.0;
    if (got - expected).abs() > 1e-10 {
        return Err(format!("auto_word_intrusion {got} vs brute force {expected}"));
    }
    Ok(())
}

#[test]
fn acceptance_2_oracle_equivalence() {
    verdict(2, "oracle equivalence", criterion_oracle_equivalence());
}

// ===========================================================================
// Criterion 3: lambda_c = 0 reduces exactly to the baseline implementation
// ===========================================================================

fn criterion_baseline_reduction() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(300);
    let n = 12u32;
    let (e, r) = vocabs(n, 2);
    let mut triples = Vec::new();
    let mut seen = HashSet::new();
    while triples.len() < 20 {
        let t = Triple::new(
            rng.random_range(0..n),
            rng.random_range(0..2),
            rng.random_range(0..n),
        );
        if t.subject != t.object && seen.insert(t) {
            triples.push(t);
        }
    }
    let data = Dataset::build(e, r, triples.clone(), vec![], vec![]).map_err(|e| e.to_string())?;
    let negatives = sample_all_negatives(&triples, &data, &mut rng).map_err(|e| e.to_string())?;
    let pmi = compute_pmi(&random_records(n, 1, &mut rng), n as usize, 0.0, false)
        .map_err(|e| e.to_string())?;
    let pairs = CoherencePairs::dense(&pmi);

    for lr in [0.0, 0.01, 1.0] {
        let model = Model::random(n as usize, 2, 5, 0.3, &mut rng);
        let full = objective(&model, &triples, &negatives, &pairs, 0.0, lr)
            .map_err(|e| e.to_string())?;
        let base =
            objective_baseline(&model, &triples, &negatives, lr).map_err(|e| e.to_string())?;
        if full != base {
            return Err(format!(
                "objective mismatch at lambda_r={lr}: {full} vs baseline {base}"
            ));
        }
        let full_grad = gradient(&model, &triples, &negatives, &pairs, 0.0, lr)
            .map_err(|e| e.to_string())?;
        let base_grad =
            gradient_baseline(&model, &triples, &negatives, lr).map_err(|e| e.to_string())?;
        if full_grad != base_grad {
            return Err(format!("gradient mismatch at lambda_r={lr}"));
        }
    }
    Ok(())
}

#[test]
fn acceptance_3_baseline_reduction() {
    verdict(3, "baseline reduction", criterion_baseline_reduction());
}

// ===========================================================================
// Criterion 4: the coherence regularizer improves interpretability on a
// planted two-cluster instance
// ===========================================================================

/// 50 entities in two planted clusters, 5 relations, cluster-agnostic
/// triples, and co-occurrence only within clusters.
fn planted_instance() -> (Dataset, PmiMatrix) {
    let n = 50u32;
    let mut rng = ChaCha8Rng::seed_from_u64(4000);
    let (e, r) = vocabs(n, 5);
    let mut triples = Vec::new();
    let mut seen = HashSet::new();
    while triples.len() < 140 {
        let t = Triple::new(
            rng.random_range(0..n),
            rng.random_range(0..5),
            rng.random_range(0..n),
        );
        if t.subject != t.object && seen.insert(t) {
            triples.push(t);
        }
    }
    let test = triples.split_off(130);
    let valid = triples.split_off(120);
    let data = Dataset::build(e, r, triples, valid, test).expect("valid splits");

    let cluster = |i: u32| i < 25;
    let mut records = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if cluster(i) == cluster(j) && rng.random_range(0..100) < 35 {
                records.push(CooccurrenceRecord {
                    a: EntityId(i),
                    b: EntityId(j),
                    count: rng.random_range(2..7),
                });
            }
        }
    }
    let pmi = compute_pmi(&records, n as usize, 0.0, false).expect("non-empty records");
    (data, pmi)
}

fn planted_config(seed: u64, lambda_c: f64) -> TrainConfig {
    TrainConfig {
        dim: 16,
        lambda_c,
        lambda_r: 0.01,
        learning_rate: 0.05,
        max_epochs: 300,
        grad_tolerance: 5e-4,
        seed,
        init_stddev: 0.1,
        batch_size: BatchSize::Full,
        zero_pairs_per_entry: 1,
        resample_negatives: true,
    }
}

fn criterion_directional_effect() -> Result<(), String> {
    let started = std::time::Instant::now();
    let (data, pmi) = planted_instance();
    let mut wins = 0usize;
    let mut detail = String::new();
    for seed in 0..5u64 {
        let regularized = train(&data, &pmi, &planted_config(seed, 0.01))
            .map_err(|e| format!("seed {seed} regularized: {e}"))?;
        let baseline = train(&data, &pmi, &planted_config(seed, 0.0))
            .map_err(|e| format!("seed {seed} baseline: {e}"))?;
        let coh_reg = coherence_at_k(&regularized.model.entity, &pmi, 5);
        let coh_base = coherence_at_k(&baseline.model.entity, &pmi, 5);
        let wi_reg = auto_word_intrusion(&regularized.model.entity, &pmi, 5);
        let wi_base = auto_word_intrusion(&baseline.model.entity, &pmi, 5);
        let win = coh_reg > coh_base && wi_reg > wi_base;
        if win {
            wins += 1;
        }
        detail.push_str(&format!(
            "seed {seed}: coherence {coh_reg:.3} vs {coh_base:.3}, autowi {wi_reg:.1} vs {wi_base:.1}{}\n",
            if win { "" } else { "  <- no win" }
        ));
    }
    let elapsed = started.elapsed();
    eprint!("{detail}");
    eprintln!("elapsed: {elapsed:?}");
    if elapsed.as_secs() >= 120 {
        return Err(format!("runtime {elapsed:?} exceeds the 2-minute budget"));
    }
    if wins < 4 {
        return Err(format!(
            "regularization won on only {wins}/5 seeds\n{detail}"
        ));
    }
    Ok(())
}

#[test]
fn acceptance_4_directional_interpretability_effect() {
    verdict(
        4,
        "directional interpretability effect",
        criterion_directional_effect(),
    );
}

// ===========================================================================
// Criterion 5: bit-identical reruns
// ===========================================================================

fn criterion_determinism() -> Result<(), String> {
    let (data, pmi) = planted_instance();
    let config = planted_config(11, 0.01);
    let run = |tag: &str| -> Result<(Vec<u8>, String), String> {
        let outcome = train(&data, &pmi, &config).map_err(|e| format!("{tag}: {e}"))?;
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let path = dir.path().join("model.bin");
        kge::save_model(&outcome.model, config.seed, &config.echo_string(), &path)
            .map_err(|e| e.to_string())?;
        let bytes = std::fs::read(&path).map_err(|e| e.to_string())?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let report = evaluate_model(
            &outcome.model,
            &data,
            &pmi,
            &EvalOptions::default(),
            &mut rng,
        )
        .map_err(|e| e.to_string())?;
        Ok((bytes, report.to_machine_tsv()))
    };
    // Identical seeds must agree bit for bit; a different seed must not.
    let (bytes_a, report_a) = run("first")?;
    let (bytes_b, report_b) = run("second")?;
    if bytes_a != bytes_b {
        return Err("model files differ between identical runs".to_string());
    }
    if report_a != report_b {
        return Err("reports differ between identical runs".to_string());
    }
    let other = train(&data, &pmi, &planted_config(12, 0.01)).map_err(|e| e.to_string())?;
    let same = train(&data, &pmi, &config).map_err(|e| e.to_string())?;
    if other.model == same.model {
        return Err("different seeds produced identical parameters".to_string());
    }
    Ok(())
}

#[test]
fn acceptance_5_determinism() {
    verdict(5, "determinism", criterion_determinism());
}

// ===========================================================================
// Criterion 6: degenerate-case contracts
// ===========================================================================

fn criterion_degenerate_contracts() -> Result<(), String> {
    // All-tie scoring: rank equals the candidate-set size.
    let (data, _) = planted_instance();
    let zero = Model::zeros(data.n_entities(), data.n_relations(), 4);
    for t in data.train.iter().take(30) {
        let rank = rank_object(&zero, t, &data, false);
        let expected = data.object_category(t.relation).len();
        if rank != expected {
            return Err(format!(
                "all-tie rank {rank} but category has {expected} candidates"
            ));
        }
    }

    // AUC under label-score independence: 50 +/- 3 over 10k samples.
    let mut rng = ChaCha8Rng::seed_from_u64(600);
    let scored: Vec<(f64, bool)> = (0..10_000)
        .map(|_| (rng.random::<f64>(), rng.random::<f64>() < 0.5))
        .collect();
    let auc = 100.0 * kge::rank_auc(&scored).ok_or("degenerate sample")?;
    if (auc - 50.0).abs() > 3.0 {
        return Err(format!("independent-label AUC {auc} outside 50 +/- 3"));
    }

    // AutoWI under zero PMI: every dimension ties, so the score is exactly 0.
    let theta = Model::random(30, 1, 6, 1.0, &mut rng).entity;
    let empty = PmiMatrix::empty(30);
    let wi = auto_word_intrusion(&theta, &empty, 5);
    if wi != 0.0 {
        return Err(format!("zero-PMI AutoWI should be 0, got {wi}"));
    }

    // Mean-normalized loss on the zero model: exactly 2 ln 2 per triple pair.
    let negatives = {
        let mut rng = ChaCha8Rng::seed_from_u64(601);
        sample_all_negatives(&data.train, &data, &mut rng).map_err(|e| e.to_string())?
    };
    let zero_full = Model::zeros(data.n_entities(), data.n_relations(), 4);
    let loss = aggregate_loss(&zero_full, &data.train, &negatives).map_err(|e| e.to_string())?;
    if (loss - 2.0 * std::f64::consts::LN_2).abs() > 1e-12 {
        return Err(format!("zero-model aggregate loss {loss} != 2 ln 2"));
    }
    if l2_term(&zero_full) != 0.0 {
        return Err("zero-model L2 term must be 0".to_string());
    }
    Ok(())
}

#[test]
fn acceptance_6_degenerate_contracts() {
    verdict(6, "degenerate-case contracts", criterion_degenerate_contracts());
}

// ===========================================================================
// Criterion 7 (optional, env-gated): full-scale directional reproduction
// ===========================================================================

/// Full-scale run over FB15k-237 plus textual triples. Hours of compute;
/// enabled only when both environment variables point at the data:
///   KGE_FB15K237_DIR  — directory with train.txt / valid.txt / test.txt
///   KGE_TEXT_TRIPLES  — textual-triple TSV for PMI extraction
#[test]
#[ignore = "full-scale reproduction; set KGE_FB15K237_DIR and KGE_TEXT_TRIPLES"]
fn acceptance_7_full_scale_directional_reproduction() {
    let (Ok(kg_dir), Ok(text_path)) = (
        std::env::var("KGE_FB15K237_DIR"),
        std::env::var("KGE_TEXT_TRIPLES"),
    ) else {
        println!("acceptance 7 (full-scale reproduction): SKIP — data not configured");
        return;
    };
    let dir = std::path::PathBuf::from(kg_dir);
    let data = Dataset::load(
        &dir.join("train.txt"),
        &dir.join("valid.txt"),
        &dir.join("test.txt"),
    )
    .expect("load FB15k-237 splits");
    assert_eq!(data.train.len(), 272_115, "train split size");
    assert_eq!(data.valid.len(), 17_535, "valid split size");
    assert_eq!(data.test.len(), 20_466, "test split size");
    assert_eq!(data.n_entities(), 14_541, "entity count");
    assert_eq!(data.n_relations(), 237, "relation count");

    let stats = kge::extract_cooccurrences_from_path(
        std::path::Path::new(&text_path),
        &data.entities,
        true,
    )
    .expect("extract textual co-occurrences");
    let pmi = compute_pmi(&stats.records, data.n_entities(), 0.0, false).expect("compute PMI");

    let config = |seed: u64, lambda_c: f64| TrainConfig {
        dim: 100,
        lambda_c,
        lambda_r: 0.01,
        learning_rate: 0.05,
        max_epochs: 500,
        grad_tolerance: 5e-4,
        seed,
        init_stddev: 0.1,
        batch_size: BatchSize::Mini(512),
        zero_pairs_per_entry: 1,
        resample_negatives: true,
    };
    let proposed = train(&data, &pmi, &config(1, 0.01)).expect("train proposed");
    let baseline = train(&data, &pmi, &config(1, 0.0)).expect("train baseline");

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let opts = EvalOptions::default();
    let report_p = evaluate_model(&proposed.model, &data, &pmi, &opts, &mut rng).unwrap();
    let report_b = evaluate_model(&baseline.model, &data, &pmi, &opts, &mut rng).unwrap();
    let get = |r: &kge::EvalReport, k: &str| r.get(k).unwrap();

    println!("proposed:\n{}", report_p.to_text());
    println!("baseline:\n{}", report_b.to_text());

    // Directional deltas with the stated tolerances.
    let coh_p = get(&report_p, "coherence_at_5");
    let coh_b = get(&report_b, "coherence_at_5");
    assert!(
        (coh_p - (-12.5)).abs() <= 8.0 && (coh_b - (-47.4)).abs() <= 8.0,
        "coherence@5: proposed {coh_p} (target -12.5 +/- 8), baseline {coh_b} (target -47.4 +/- 8)"
    );
    let wi_p = get(&report_p, "auto_wi_at_5");
    let wi_b = get(&report_b, "auto_wi_at_5");
    assert!(
        (wi_p - 66.0).abs() <= 12.0 && (wi_b - 6.0).abs() <= 12.0,
        "autowi@5: proposed {wi_p} (target 66 +/- 12), baseline {wi_b} (target 6 +/- 12)"
    );
    let mrr_p = get(&report_p, "mrr");
    let mrr_b = get(&report_b, "mrr");
    assert!(
        (mrr_p - mrr_b).abs() <= 3.0,
        "mrr gap: proposed {mrr_p} vs baseline {mrr_b}"
    );
    let acc_p = get(&report_p, "accuracy");
    let acc_b = get(&report_b, "accuracy");
    assert!(
        acc_p > acc_b - 3.0,
        "accuracy: proposed {acc_p} should improve on baseline {acc_b} (tolerance 3)"
    );
    println!("acceptance 7 (full-scale reproduction): PASS");
}
