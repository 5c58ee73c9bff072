//! Gradient-descent training loop with per-epoch tracing.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{Dataset, Triple};
use crate::loss::{aggregate_loss, coherence_term, gradient, l2_term, CoherencePairs};
use crate::model::{Model, ModelError};
use crate::pmi::PmiMatrix;
use crate::sample::{sample_all_negatives, NegativePair};

/// Full-batch gradient descent or shuffled mini-batches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatchSize {
    Full,
    Mini(usize),
}

/// Training hyper-parameters. `lambda_c` weights the coherence term,
/// `lambda_r` the L2 term. Optimization stops when the gradient max-norm
/// drops below `grad_tolerance` or after `max_epochs`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub dim: usize,
    pub lambda_c: f64,
    pub lambda_r: f64,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub grad_tolerance: f64,
    pub seed: u64,
    pub init_stddev: f64,
    pub batch_size: BatchSize,
    /// Zero-PMI pairs sampled per stored PMI entry each step.
    pub zero_pairs_per_entry: usize,
    /// Resample corruptions every epoch; with `false` they are drawn once,
    /// which makes the full-batch objective deterministic across epochs.
    pub resample_negatives: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dim: 100,
            lambda_c: 0.01,
            lambda_r: 0.01,
            learning_rate: 0.05,
            max_epochs: 1000,
            grad_tolerance: 5e-4,
            seed: 0,
            init_stddev: 0.1,
            batch_size: BatchSize::Full,
            zero_pairs_per_entry: 1,
            resample_negatives: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        // NaN and infinities must fail the positivity checks.
        let positive = |v: f64| v.is_finite() && v > 0.0;
        let mut problems = Vec::new();
        if self.dim == 0 {
            problems.push("dim must be positive");
        }
        if self.lambda_c < 0.0 {
            problems.push("lambda_c must be non-negative");
        }
        if self.lambda_r < 0.0 {
            problems.push("lambda_r must be non-negative");
        }
        if !positive(self.learning_rate) {
            problems.push("learning_rate must be positive");
        }
        if self.max_epochs == 0 {
            problems.push("max_epochs must be positive");
        }
        if !positive(self.grad_tolerance) {
            problems.push("grad_tolerance must be positive");
        }
        if !positive(self.init_stddev) {
            problems.push("init_stddev must be positive");
        }
        if let BatchSize::Mini(0) = self.batch_size {
            problems.push("batch_size must be positive");
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(ModelError::InvalidConfig(problems.join("; ")))
        }
    }

    /// Stable one-line key=value rendering, embedded in model file headers.
    pub fn echo_string(&self) -> String {
        let batch = match self.batch_size {
            BatchSize::Full => "full".to_string(),
            BatchSize::Mini(b) => b.to_string(),
        };
        format!(
            "dim={} lambda_c={} lambda_r={} learning_rate={} max_epochs={} grad_tolerance={} seed={} init_stddev={} batch_size={} zero_pairs_per_entry={} resample_negatives={}",
            self.dim,
            self.lambda_c,
            self.lambda_r,
            self.learning_rate,
            self.max_epochs,
            self.grad_tolerance,
            self.seed,
            self.init_stddev,
            batch,
            self.zero_pairs_per_entry,
            self.resample_negatives,
        )
    }
}

/// One epoch of the training trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub epoch: usize,
    pub objective: f64,
    pub grad_norm: f64,
    pub loss: f64,
    pub coherence: f64,
    pub l2: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    pub trace: Vec<TraceRow>,
    /// True when the gradient tolerance was reached before `max_epochs`.
    pub converged: bool,
}

/// Train an entity model on the dataset's training split.
///
/// Parameters are initialized i.i.d. Gaussian(0, `init_stddev`^2) from the
/// seeded generator; everything downstream draws from the same stream, so a
/// fixed `(config, data, pmi)` reproduces the run bit for bit. A non-finite
/// objective or gradient aborts with a divergence error naming the epoch.
pub fn train(
    data: &Dataset,
    pmi: &PmiMatrix,
    config: &TrainConfig,
) -> Result<TrainOutcome, ModelError> {
    config.validate()?;
    if data.train.is_empty() {
        return Err(ModelError::EmptyTripleSet);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = Model::random(
        data.n_entities(),
        data.n_relations(),
        config.dim,
        config.init_stddev,
        &mut rng,
    );
    let fixed_negatives = if config.resample_negatives {
        None
    } else {
        Some(sample_all_negatives(&data.train, data, &mut rng)?)
    };

    let mut trace = Vec::new();
    let mut converged = false;
    for epoch in 0..config.max_epochs {
        let row = match config.batch_size {
            BatchSize::Full => full_batch_epoch(
                &mut model,
                data,
                pmi,
                config,
                fixed_negatives.as_deref(),
                epoch,
                &mut rng,
            )?,
            BatchSize::Mini(batch) => mini_batch_epoch(
                &mut model,
                data,
                pmi,
                config,
                fixed_negatives.as_deref(),
                epoch,
                batch,
                &mut rng,
            )?,
        };
        let grad_norm = row.grad_norm;
        trace.push(row);
        if grad_norm < config.grad_tolerance {
            converged = true;
            break;
        }
    }
    Ok(TrainOutcome {
        model,
        trace,
        converged,
    })
}

fn epoch_pairs(
    pmi: &PmiMatrix,
    config: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> CoherencePairs {
    if config.lambda_c != 0.0 {
        CoherencePairs::stored_with_zero_samples(pmi, config.zero_pairs_per_entry, rng)
    } else {
        CoherencePairs::empty()
    }
}

fn check_finite(value: f64, what: &'static str, epoch: usize) -> Result<(), ModelError> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(ModelError::Divergence { epoch, what })
    }
}

/// Evaluate, check, and step once over the whole training split. The
/// gradient is checked against the tolerance before the step is applied, so
/// a converged model is returned at its stationary point.
fn full_batch_epoch(
    model: &mut Model,
    data: &Dataset,
    pmi: &PmiMatrix,
    config: &TrainConfig,
    fixed_negatives: Option<&[NegativePair]>,
    epoch: usize,
    rng: &mut ChaCha8Rng,
) -> Result<TraceRow, ModelError> {
    let sampled;
    let negatives: &[NegativePair] = match fixed_negatives {
        Some(n) => n,
        None => {
            sampled = sample_all_negatives(&data.train, data, rng)?;
            &sampled
        }
    };
    let pairs = epoch_pairs(pmi, config, rng);

    let loss = aggregate_loss(model, &data.train, negatives)?;
    let coherence = coherence_term(&model.entity, &pairs);
    let l2 = l2_term(model);
    let objective = loss + config.lambda_c * coherence + config.lambda_r * l2;
    check_finite(objective, "objective", epoch)?;

    let grad = gradient(
        model,
        &data.train,
        negatives,
        &pairs,
        config.lambda_c,
        config.lambda_r,
    )?;
    if !grad.is_finite() {
        return Err(ModelError::Divergence {
            epoch,
            what: "gradient",
        });
    }
    let grad_norm = grad.max_abs();
    if grad_norm >= config.grad_tolerance {
        model.scaled_sub(&grad, config.learning_rate);
    }
    Ok(TraceRow {
        epoch,
        objective,
        grad_norm,
        loss,
        coherence,
        l2,
    })
}

/// Shuffled mini-batch pass. Trace values are means over the epoch's batches
/// except `grad_norm`, which is the largest batch-gradient max-norm.
#[allow(clippy::too_many_arguments)]
fn mini_batch_epoch(
    model: &mut Model,
    data: &Dataset,
    pmi: &PmiMatrix,
    config: &TrainConfig,
    fixed_negatives: Option<&[NegativePair]>,
    epoch: usize,
    batch: usize,
    rng: &mut ChaCha8Rng,
) -> Result<TraceRow, ModelError> {
    let n = data.train.len();
    let mut order: Vec<usize> = (0..n).collect();
    for i in 0..n {
        let j = rng.random_range(i..n);
        order.swap(i, j);
    }
    let sampled;
    let negatives: &[NegativePair] = match fixed_negatives {
        Some(neg) => neg,
        None => {
            sampled = sample_all_negatives(&data.train, data, rng)?;
            &sampled
        }
    };

    let mut sums = (0.0, 0.0, 0.0, 0.0); // objective, loss, coherence, l2
    let mut grad_norm_max = 0.0f64;
    let mut batches = 0usize;
    for chunk in order.chunks(batch) {
        let batch_triples: Vec<Triple> = chunk.iter().map(|&i| data.train[i]).collect();
        let batch_negs: Vec<NegativePair> = chunk.iter().map(|&i| negatives[i]).collect();
        let pairs = epoch_pairs(pmi, config, rng);

        let loss = aggregate_loss(model, &batch_triples, &batch_negs)?;
        let coherence = coherence_term(&model.entity, &pairs);
        let l2 = l2_term(model);
        let objective = loss + config.lambda_c * coherence + config.lambda_r * l2;
        check_finite(objective, "objective", epoch)?;

        let grad = gradient(
            model,
            &batch_triples,
            &batch_negs,
            &pairs,
            config.lambda_c,
            config.lambda_r,
        )?;
        if !grad.is_finite() {
            return Err(ModelError::Divergence {
                epoch,
                what: "gradient",
            });
        }
        grad_norm_max = grad_norm_max.max(grad.max_abs());
        model.scaled_sub(&grad, config.learning_rate);

        sums.0 += objective;
        sums.1 += loss;
        sums.2 += coherence;
        sums.3 += l2;
        batches += 1;
    }
    let b = batches as f64;
    Ok(TraceRow {
        epoch,
        objective: sums.0 / b,
        grad_norm: grad_norm_max,
        loss: sums.1 / b,
        coherence: sums.2 / b,
        l2: sums.3 / b,
    })
}

/// Render the trace in its file format:
/// `epoch<TAB>objective<TAB>grad_norm<TAB>loss<TAB>coherence<TAB>l2`.
pub fn trace_to_string(trace: &[TraceRow]) -> String {
    let mut out = String::from("# epoch\tobjective\tgrad_norm\tloss\tcoherence\tl2\n");
    for row in trace {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\n",
            row.epoch, row.objective, row.grad_norm, row.loss, row.coherence, row.l2
        ));
    }
    out
}

pub fn write_trace(trace: &[TraceRow], path: &Path) -> Result<(), ModelError> {
    let display = path.display().to_string();
    let io = |e: std::io::Error| ModelError::Io {
        path: display.clone(),
        source: e,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    w.write_all(trace_to_string(trace).as_bytes()).map_err(io)?;
    w.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{CooccurrenceRecord, EntityId, Vocab};
    use crate::pmi::compute_pmi;

    fn toy_dataset() -> Dataset {
        let mut e = Vocab::new();
        let mut r = Vocab::new();
        for i in 0..8 {
            e.intern(&format!("e{i}"));
        }
        r.intern("r0");
        r.intern("r1");
        let train = vec![
            Triple::new(0, 0, 1),
            Triple::new(1, 0, 2),
            Triple::new(2, 0, 3),
            Triple::new(3, 0, 4),
            Triple::new(4, 1, 5),
            Triple::new(5, 1, 6),
            Triple::new(6, 1, 7),
            Triple::new(7, 1, 0),
            Triple::new(0, 1, 4),
            Triple::new(2, 1, 6),
            Triple::new(5, 0, 1),
            Triple::new(6, 0, 3),
        ];
        Dataset::build(e, r, train, vec![], vec![]).unwrap()
    }

    fn toy_pmi(n: usize) -> crate::pmi::PmiMatrix {
        let records = vec![
            CooccurrenceRecord { a: EntityId(0), b: EntityId(1), count: 4 },
            CooccurrenceRecord { a: EntityId(2), b: EntityId(3), count: 4 },
            CooccurrenceRecord { a: EntityId(4), b: EntityId(5), count: 1 },
        ];
        compute_pmi(&records, n, 0.0, false).unwrap()
    }

    fn toy_config() -> TrainConfig {
        TrainConfig {
            dim: 4,
            learning_rate: 0.05,
            max_epochs: 50,
            seed: 7,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn identical_seeds_reproduce_the_trace_bitwise() {
        let data = toy_dataset();
        let pmi = toy_pmi(8);
        let config = toy_config();
        let a = train(&data, &pmi, &config).unwrap();
        let b = train(&data, &pmi, &config).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.model, b.model);
    }

    #[test]
    fn objective_non_increasing_with_fixed_data() {
        let data = toy_dataset();
        let pmi = toy_pmi(8);
        // Fixed negatives and no zero-pair resampling make the objective a
        // deterministic function of the parameters.
        let config = TrainConfig {
            resample_negatives: false,
            zero_pairs_per_entry: 0,
            learning_rate: 0.01,
            max_epochs: 80,
            ..toy_config()
        };
        let outcome = train(&data, &pmi, &config).unwrap();
        for w in outcome.trace.windows(2) {
            assert!(
                w[1].objective <= w[0].objective + 1e-12,
                "objective increased: {} -> {}",
                w[0].objective,
                w[1].objective
            );
        }
    }

    #[test]
    fn coherence_weight_lowers_final_coherence_term() {
        let data = toy_dataset();
        let pmi = toy_pmi(8);
        let with = TrainConfig {
            lambda_c: 0.01,
            max_epochs: 150,
            ..toy_config()
        };
        let without = TrainConfig {
            lambda_c: 0.0,
            ..with.clone()
        };
        let m_with = train(&data, &pmi, &with).unwrap().model;
        let m_without = train(&data, &pmi, &without).unwrap().model;
        let pairs = CoherencePairs::dense(&pmi);
        let c_with = coherence_term(&m_with.entity, &pairs);
        let c_without = coherence_term(&m_without.entity, &pairs);
        assert!(
            c_with < c_without,
            "coherence term should drop under regularization: {c_with} vs {c_without}"
        );
    }

    #[test]
    fn mini_batch_mode_trains_and_is_deterministic() {
        let data = toy_dataset();
        let pmi = toy_pmi(8);
        let config = TrainConfig {
            batch_size: BatchSize::Mini(4),
            max_epochs: 20,
            ..toy_config()
        };
        let a = train(&data, &pmi, &config).unwrap();
        let b = train(&data, &pmi, &config).unwrap();
        assert_eq!(a.model, b.model);
        assert!(a.trace.iter().all(|r| r.objective.is_finite()));
    }

    #[test]
    fn divergent_learning_rate_reports_epoch() {
        let data = toy_dataset();
        let pmi = toy_pmi(8);
        let config = TrainConfig {
            learning_rate: 1e12,
            lambda_r: 1.0,
            max_epochs: 500,
            ..toy_config()
        };
        match train(&data, &pmi, &config) {
            Err(ModelError::Divergence { .. }) => {}
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn invalid_config_is_rejected() {
        let config = TrainConfig {
            learning_rate: -1.0,
            ..TrainConfig::default()
        };
        assert!(matches!(
            config.validate(),
            Err(ModelError::InvalidConfig(_))
        ));
    }

    #[test]
    fn trace_format_has_six_columns() {
        let rows = vec![TraceRow {
            epoch: 0,
            objective: 1.5,
            grad_norm: 0.25,
            loss: 1.0,
            coherence: 2.0,
            l2: 3.0,
        }];
        let text = trace_to_string(&rows);
        let line = text.lines().nth(1).unwrap();
        assert_eq!(line.split('\t').count(), 6);
        assert_eq!(line, "0\t1.5\t0.25\t1\t2\t3");
    }
}
