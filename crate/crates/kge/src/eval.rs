//! Evaluation protocols: object link prediction within relation categories,
//! per-relation threshold triple classification, dimension coherence, and the
//! word-intrusion task (automated, plus export/scoring for human annotation).

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, RngExt};

use crate::data::{Dataset, EntityId, RelationId, Triple, Vocab};
use crate::matrix::Matrix;
use crate::model::{score, Model, ModelError};
use crate::pmi::PmiMatrix;
use crate::sample::corrupt_object;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("evaluation split is empty")]
    EmptySplit,
    #[error(transparent)]
    Sampling(#[from] ModelError),
    #[error("{path}:{line}: {reason}")]
    AnnotationFormat {
        path: String,
        line: usize,
        reason: String,
    },
    #[error("{path}:{line}: unknown task id {task_id}")]
    UnknownTask {
        path: String,
        line: usize,
        task_id: usize,
    },
    #[error("{path}:{line}: entity {entity:?} was not presented in task {task_id}")]
    UnknownEntity {
        path: String,
        line: usize,
        task_id: usize,
        entity: String,
    },
    #[error("task file {path}: {reason}")]
    TaskFile { path: String, reason: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &str, source: std::io::Error) -> EvalError {
    EvalError::Io {
        path: path.to_string(),
        source,
    }
}

// ---------------------------------------------------------------------------
// Link prediction
// ---------------------------------------------------------------------------

/// Ranking aggregates over one split. MRR and Hits@10 are scaled to [0, 100].
#[derive(Debug, Clone, PartialEq)]
pub struct RankingResult {
    pub mr: f64,
    pub mrr: f64,
    pub hits_at_10: f64,
    pub ranks: Vec<usize>,
}

/// Rank of the true object among the relation's object category.
///
/// Candidates scoring strictly higher than the truth and candidates tied
/// with it all count as ranked above (pessimistic ties), so an all-tie
/// category yields rank = |candidates|. With `filtered`, candidates that
/// form a known triple with the query are skipped.
pub fn rank_object(model: &Model, t: &Triple, data: &Dataset, filtered: bool) -> usize {
    let truth = score(model, t);
    let mut rank = 1usize;
    for &c in data.object_category(t.relation) {
        if c == t.object {
            continue;
        }
        let candidate = Triple { object: c, ..*t };
        if filtered && data.is_known(&candidate) {
            continue;
        }
        if score(model, &candidate) >= truth {
            rank += 1;
        }
    }
    rank
}

/// Object-prediction ranking over a split.
pub fn link_prediction(
    model: &Model,
    data: &Dataset,
    split: &[Triple],
    filtered: bool,
) -> Result<RankingResult, EvalError> {
    if split.is_empty() {
        return Err(EvalError::EmptySplit);
    }
    let ranks: Vec<usize> = split
        .iter()
        .map(|t| rank_object(model, t, data, filtered))
        .collect();
    Ok(ranking_from_ranks(ranks))
}

fn ranking_from_ranks(ranks: Vec<usize>) -> RankingResult {
    let n = ranks.len() as f64;
    let mr = ranks.iter().map(|&r| r as f64).sum::<f64>() / n;
    let mrr = 100.0 * ranks.iter().map(|&r| 1.0 / r as f64).sum::<f64>() / n;
    let hits_at_10 = 100.0 * ranks.iter().filter(|&&r| r <= 10).count() as f64 / n;
    RankingResult {
        mr,
        mrr,
        hits_at_10,
        ranks,
    }
}

// ---------------------------------------------------------------------------
// Triple classification
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct ClassificationResult {
    /// Mean per-relation AUC, in [0, 100].
    pub auc: f64,
    /// Mean per-relation thresholded accuracy, in [0, 100].
    pub accuracy: f64,
    /// Decision threshold chosen per evaluated relation.
    pub thresholds: Vec<(RelationId, f64)>,
    /// Relations skipped from the AUC mean for lacking a class.
    pub skipped_relations: usize,
}

/// Classify split triples against per-relation score thresholds.
///
/// Each validation and test triple is paired with one in-category object
/// corruption. Thresholds maximize validation accuracy per relation via an
/// exhaustive sweep; relations unseen in validation reuse the threshold
/// fitted on all validation scores pooled together.
pub fn triple_classification<R: Rng + ?Sized>(
    model: &Model,
    data: &Dataset,
    rng: &mut R,
) -> Result<ClassificationResult, EvalError> {
    if data.valid.is_empty() || data.test.is_empty() {
        return Err(EvalError::EmptySplit);
    }
    let scored = |triples: &[Triple], rng: &mut R| -> Result<Vec<(RelationId, f64, bool)>, EvalError> {
        let mut out = Vec::with_capacity(triples.len() * 2);
        for t in triples {
            let neg = corrupt_object(t, data, rng)?;
            out.push((t.relation, score(model, t), true));
            out.push((t.relation, score(model, &neg), false));
        }
        Ok(out)
    };
    let valid_scored = scored(&data.valid, rng)?;
    let test_scored = scored(&data.test, rng)?;

    let global_threshold = best_threshold(
        &valid_scored
            .iter()
            .map(|&(_, s, l)| (s, l))
            .collect::<Vec<_>>(),
    );
    let mut valid_by_rel: HashMap<RelationId, Vec<(f64, bool)>> = HashMap::new();
    for &(r, s, l) in &valid_scored {
        valid_by_rel.entry(r).or_default().push((s, l));
    }
    let mut test_by_rel: HashMap<RelationId, Vec<(f64, bool)>> = HashMap::new();
    for &(r, s, l) in &test_scored {
        test_by_rel.entry(r).or_default().push((s, l));
    }

    let mut relations: Vec<RelationId> = test_by_rel.keys().copied().collect();
    relations.sort_unstable();

    let mut thresholds = Vec::with_capacity(relations.len());
    let mut acc_sum = 0.0;
    let mut auc_sum = 0.0;
    let mut auc_count = 0usize;
    let mut skipped = 0usize;
    for &r in &relations {
        let threshold = valid_by_rel
            .get(&r)
            .map(|scores| best_threshold(scores))
            .unwrap_or(global_threshold);
        thresholds.push((r, threshold));
        let scores = &test_by_rel[&r];
        acc_sum += accuracy_at(scores, threshold);
        match rank_auc(scores) {
            Some(auc) => {
                auc_sum += auc;
                auc_count += 1;
            }
            None => skipped += 1,
        }
    }
    let n_rel = relations.len() as f64;
    Ok(ClassificationResult {
        auc: if auc_count > 0 {
            100.0 * auc_sum / auc_count as f64
        } else {
            0.0
        },
        accuracy: 100.0 * acc_sum / n_rel,
        thresholds,
        skipped_relations: skipped,
    })
}

/// Fraction of examples classified correctly by `score > threshold`.
pub fn accuracy_at(scored: &[(f64, bool)], threshold: f64) -> f64 {
    let correct = scored
        .iter()
        .filter(|&&(s, label)| (s > threshold) == label)
        .count();
    correct as f64 / scored.len() as f64
}

/// Threshold maximizing accuracy over the swept candidate set: midpoints of
/// consecutive distinct scores plus one candidate below and one above all
/// scores. Ties go to the smallest candidate.
pub fn best_threshold(scored: &[(f64, bool)]) -> f64 {
    assert!(!scored.is_empty(), "cannot fit a threshold to no scores");
    let mut values: Vec<f64> = scored.iter().map(|&(s, _)| s).collect();
    values.sort_unstable_by(|a, b| a.partial_cmp(b).expect("scores must not be NaN"));
    values.dedup();
    let mut candidates = Vec::with_capacity(values.len() + 1);
    candidates.push(values[0] - 1.0);
    for w in values.windows(2) {
        candidates.push(0.5 * (w[0] + w[1]));
    }
    candidates.push(values[values.len() - 1] + 1.0);

    let mut best = candidates[0];
    let mut best_acc = accuracy_at(scored, best);
    for &c in &candidates[1..] {
        let acc = accuracy_at(scored, c);
        if acc > best_acc {
            best = c;
            best_acc = acc;
        }
    }
    best
}

/// Tie-adjusted rank AUC (Mann-Whitney) in [0, 1]; `None` when a class is
/// missing.
pub fn rank_auc(scored: &[(f64, bool)]) -> Option<f64> {
    let n_pos = scored.iter().filter(|&&(_, l)| l).count();
    let n_neg = scored.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut indexed: Vec<(f64, bool)> = scored.to_vec();
    indexed.sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).expect("scores must not be NaN"));
    // Average ranks across tied groups.
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < indexed.len() {
        let mut j = i;
        while j < indexed.len() && indexed[j].0 == indexed[i].0 {
            j += 1;
        }
        let avg_rank = (i + 1 + j) as f64 / 2.0; // mean of ranks i+1 ..= j
        for item in &indexed[i..j] {
            if item.1 {
                rank_sum_pos += avg_rank;
            }
        }
        i = j;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Some(u / (n_pos as f64 * n_neg as f64))
}

// ---------------------------------------------------------------------------
// Dimension inspection and coherence
// ---------------------------------------------------------------------------

/// All entities ordered by their value on dimension `l`, descending, ties by
/// ascending id. The head of this order is "top", the final element is the
/// bottom-most entity.
fn dimension_order(theta: &Matrix, l: usize) -> Vec<EntityId> {
    let mut ids: Vec<EntityId> = (0..theta.rows() as u32).map(EntityId).collect();
    ids.sort_by(|a, b| {
        theta
            .get(b.idx(), l)
            .partial_cmp(&theta.get(a.idx(), l))
            .expect("embedding values must not be NaN")
            .then(a.cmp(b))
    });
    ids
}

/// The `k` entities with the highest value on dimension `l`.
pub fn top_k_dimension(theta: &Matrix, l: usize, k: usize) -> Vec<EntityId> {
    assert!(k <= theta.rows(), "k exceeds the entity count");
    let mut order = dimension_order(theta, l);
    order.truncate(k);
    order
}

/// Mean over dimensions of the summed PMI among each dimension's top-k
/// entities.
pub fn coherence_at_k(theta: &Matrix, pmi: &PmiMatrix, k: usize) -> f64 {
    assert!(k >= 2, "coherence needs at least one pair");
    let d = theta.cols();
    let mut total = 0.0;
    for l in 0..d {
        let top = top_k_dimension(theta, l, k);
        for i in 1..top.len() {
            for j in 0..i {
                total += pmi.lookup(top[i], top[j]);
            }
        }
    }
    total / d as f64
}

/// Automated word intrusion: per dimension, mix the top-k entities with the
/// bottom-most one, score every member by its summed PMI to the others, and
/// predict the minimum as the intruder. A tie for the minimum counts as a
/// miss. Returns the percentage of dimensions where the prediction is the
/// true intruder.
pub fn auto_word_intrusion(theta: &Matrix, pmi: &PmiMatrix, k: usize) -> f64 {
    assert!(k >= 2, "intrusion needs at least two top entities");
    assert!(k < theta.rows(), "need k+1 distinct entities");
    let d = theta.cols();
    let mut correct = 0usize;
    for l in 0..d {
        let order = dimension_order(theta, l);
        let mut members: Vec<EntityId> = order[..k].to_vec();
        let intruder = order[order.len() - 1];
        members.push(intruder);
        let scores: Vec<f64> = members
            .iter()
            .map(|&e| {
                members
                    .iter()
                    .filter(|&&other| other != e)
                    .map(|&other| pmi.lookup(e, other))
                    .sum()
            })
            .collect();
        let min = scores.iter().cloned().fold(f64::INFINITY, f64::min);
        let ties = scores.iter().filter(|&&s| s == min).count();
        if ties == 1 && members[scores.iter().position(|&s| s == min).unwrap()] == intruder {
            correct += 1;
        }
    }
    100.0 * correct as f64 / d as f64
}

// ---------------------------------------------------------------------------
// Word-intrusion task export and manual scoring
// ---------------------------------------------------------------------------

/// One annotation task: the top-k entities of a dimension mixed with its
/// bottom-most entity, in shuffled presentation order.
#[derive(Debug, Clone)]
pub struct IntrusionTask {
    pub task_id: usize,
    pub dimension: usize,
    pub presented: Vec<EntityId>,
    pub intruder: EntityId,
}

#[derive(Debug, Clone)]
pub struct IntrusionTaskSet {
    pub k: usize,
    pub tasks: Vec<IntrusionTask>,
}

/// Sample `num_dims` dimensions without replacement and build one task per
/// sampled dimension.
pub fn build_intrusion_tasks<R: Rng + ?Sized>(
    theta: &Matrix,
    k: usize,
    num_dims: usize,
    rng: &mut R,
) -> IntrusionTaskSet {
    assert!(num_dims <= theta.cols(), "cannot sample more dimensions than exist");
    assert!(k < theta.rows(), "need k+1 distinct entities");
    let d = theta.cols();
    let mut dims: Vec<usize> = (0..d).collect();
    for i in 0..num_dims {
        let j = rng.random_range(i..d);
        dims.swap(i, j);
    }
    dims.truncate(num_dims);

    let mut tasks = Vec::with_capacity(num_dims);
    for (task_id, &dimension) in dims.iter().enumerate() {
        let order = dimension_order(theta, dimension);
        let mut presented: Vec<EntityId> = order[..k].to_vec();
        let intruder = order[order.len() - 1];
        presented.push(intruder);
        for i in (1..presented.len()).rev() {
            let j = rng.random_range(0..=i);
            presented.swap(i, j);
        }
        tasks.push(IntrusionTask {
            task_id: task_id + 1,
            dimension,
            presented,
            intruder,
        });
    }
    IntrusionTaskSet { k, tasks }
}

/// Write the annotator-facing task file (`task_id` then k+1 entity names,
/// tab-separated; the dimension is withheld) and the answer key
/// (`task_id<TAB>intruder_name`).
pub fn write_intrusion_tasks(
    set: &IntrusionTaskSet,
    entities: &Vocab,
    tasks_path: &Path,
    key_path: &Path,
) -> Result<(), EvalError> {
    let tasks_display = tasks_path.display().to_string();
    let mut tw = BufWriter::new(File::create(tasks_path).map_err(|e| io_err(&tasks_display, e))?);
    for task in &set.tasks {
        write!(tw, "{}", task.task_id).map_err(|e| io_err(&tasks_display, e))?;
        for &e in &task.presented {
            write!(tw, "\t{}", entities.name(e.0)).map_err(|e| io_err(&tasks_display, e))?;
        }
        writeln!(tw).map_err(|e| io_err(&tasks_display, e))?;
    }
    tw.flush().map_err(|e| io_err(&tasks_display, e))?;

    let key_display = key_path.display().to_string();
    let mut kw = BufWriter::new(File::create(key_path).map_err(|e| io_err(&key_display, e))?);
    for task in &set.tasks {
        writeln!(kw, "{}\t{}", task.task_id, entities.name(task.intruder.0))
            .map_err(|e| io_err(&key_display, e))?;
    }
    kw.flush().map_err(|e| io_err(&key_display, e))
}

/// Tasks reloaded from the exported files, ready for scoring.
#[derive(Debug, Clone)]
pub struct LoadedTasks {
    /// task id -> (presented names, intruder name)
    pub tasks: HashMap<usize, (Vec<String>, String)>,
}

pub fn read_intrusion_tasks(tasks_path: &Path, key_path: &Path) -> Result<LoadedTasks, EvalError> {
    let tasks_display = tasks_path.display().to_string();
    let file = File::open(tasks_path).map_err(|e| io_err(&tasks_display, e))?;
    let mut tasks: HashMap<usize, (Vec<String>, String)> = HashMap::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_err(&tasks_display, e))?;
        let mut fields = line.split('\t');
        let id: usize = fields
            .next()
            .and_then(|f| f.parse().ok())
            .ok_or_else(|| EvalError::TaskFile {
                path: tasks_display.clone(),
                reason: format!("line {}: bad task id", lineno + 1),
            })?;
        let presented: Vec<String> = fields.map(|s| s.to_string()).collect();
        if presented.len() < 2 {
            return Err(EvalError::TaskFile {
                path: tasks_display.clone(),
                reason: format!("line {}: too few entities", lineno + 1),
            });
        }
        tasks.insert(id, (presented, String::new()));
    }

    let key_display = key_path.display().to_string();
    let file = File::open(key_path).map_err(|e| io_err(&key_display, e))?;
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_err(&key_display, e))?;
        let mut fields = line.split('\t');
        let (id, name) = match (fields.next(), fields.next(), fields.next()) {
            (Some(id), Some(name), None) => (id, name),
            _ => {
                return Err(EvalError::TaskFile {
                    path: key_display.clone(),
                    reason: format!("line {}: expected task_id<TAB>intruder", lineno + 1),
                })
            }
        };
        let id: usize = id.parse().map_err(|_| EvalError::TaskFile {
            path: key_display.clone(),
            reason: format!("line {}: bad task id", lineno + 1),
        })?;
        match tasks.get_mut(&id) {
            Some(entry) => entry.1 = name.to_string(),
            None => {
                return Err(EvalError::TaskFile {
                    path: key_display.clone(),
                    reason: format!("line {}: task {} not in task file", lineno + 1, id),
                })
            }
        }
    }
    if let Some((id, _)) = tasks.iter().find(|(_, (_, intruder))| intruder.is_empty()) {
        return Err(EvalError::TaskFile {
            path: key_display,
            reason: format!("task {} has no answer key entry", id),
        });
    }
    Ok(LoadedTasks { tasks })
}

/// Parse one annotation file `task_id<TAB>chosen_entity_name`, validating
/// every reference against the loaded tasks.
pub fn parse_annotation_file(
    path: &Path,
    tasks: &LoadedTasks,
) -> Result<HashMap<usize, String>, EvalError> {
    let display = path.display().to_string();
    let file = File::open(path).map_err(|e| io_err(&display, e))?;
    let mut choices = HashMap::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|e| io_err(&display, e))?;
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let (id, chosen) = match (fields.next(), fields.next(), fields.next()) {
            (Some(id), Some(chosen), None) => (id, chosen),
            _ => {
                return Err(EvalError::AnnotationFormat {
                    path: display,
                    line: lineno,
                    reason: "expected task_id<TAB>chosen_entity_name".to_string(),
                })
            }
        };
        let task_id: usize = id.parse().map_err(|_| EvalError::AnnotationFormat {
            path: display.clone(),
            line: lineno,
            reason: format!("bad task id {:?}", id),
        })?;
        let (presented, _) = tasks.tasks.get(&task_id).ok_or(EvalError::UnknownTask {
            path: display.clone(),
            line: lineno,
            task_id,
        })?;
        if !presented.iter().any(|p| p == chosen) {
            return Err(EvalError::UnknownEntity {
                path: display.clone(),
                line: lineno,
                task_id,
                entity: chosen.to_string(),
            });
        }
        if choices.insert(task_id, chosen.to_string()).is_some() {
            return Err(EvalError::AnnotationFormat {
                path: display,
                line: lineno,
                reason: format!("duplicate annotation for task {}", task_id),
            });
        }
    }
    Ok(choices)
}

/// Majority vote across annotators; a tie for the most-voted entity counts
/// the task as incorrect. Returns the percentage of tasks whose majority
/// choice is the true intruder.
pub fn score_manual_intrusion(
    tasks: &LoadedTasks,
    annotations: &[HashMap<usize, String>],
) -> f64 {
    assert!(!annotations.is_empty(), "need at least one annotation set");
    let mut task_ids: Vec<usize> = tasks.tasks.keys().copied().collect();
    task_ids.sort_unstable();
    let mut correct = 0usize;
    for id in &task_ids {
        let mut votes: HashMap<&str, usize> = HashMap::new();
        for ann in annotations {
            if let Some(choice) = ann.get(id) {
                *votes.entry(choice.as_str()).or_insert(0) += 1;
            }
        }
        let Some(max_votes) = votes.values().copied().max() else {
            continue;
        };
        let winners: Vec<&str> = votes
            .iter()
            .filter(|&(_, &v)| v == max_votes)
            .map(|(&name, _)| name)
            .collect();
        if winners.len() == 1 && winners[0] == tasks.tasks[id].1 {
            correct += 1;
        }
    }
    100.0 * correct as f64 / task_ids.len() as f64
}

/// Random-dimension inspection: one line per sampled dimension listing its
/// top-k entity names.
pub fn qualitative_report<R: Rng + ?Sized>(
    theta: &Matrix,
    entities: &Vocab,
    num_dims: usize,
    k: usize,
    rng: &mut R,
) -> String {
    assert!(num_dims <= theta.cols());
    let d = theta.cols();
    let mut dims: Vec<usize> = (0..d).collect();
    for i in 0..num_dims {
        let j = rng.random_range(i..d);
        dims.swap(i, j);
    }
    dims.truncate(num_dims);
    let mut out = String::new();
    for &l in &dims {
        let names: Vec<&str> = top_k_dimension(theta, l, k)
            .iter()
            .map(|e| entities.name(e.0))
            .collect();
        out.push_str(&format!("dim {}: {}\n", l, names.join(", ")));
    }
    out
}
