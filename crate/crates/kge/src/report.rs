//! Evaluation reports: per-model metric collection, text and machine
//! rendering, and mean / standard-deviation aggregation across seeds.

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::Rng;

use crate::data::Dataset;
use crate::eval::{
    auto_word_intrusion, coherence_at_k, link_prediction, triple_classification, EvalError,
};
use crate::model::Model;
use crate::pmi::PmiMatrix;

/// Evaluation knobs shared across models of one experiment.
#[derive(Debug, Clone)]
pub struct EvalOptions {
    /// k for Coherence@k and AutoWI@k.
    pub k: usize,
    /// Also compute filtered-ranking link prediction metrics.
    pub filtered_ranking: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            k: 5,
            filtered_ranking: false,
        }
    }
}

/// Ordered metric -> value map for one evaluated model.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub metrics: Vec<(String, f64)>,
}

impl EvalReport {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.metrics
            .iter()
            .find(|(n, _)| n == name)
            .map(|&(_, v)| v)
    }

    pub fn push(&mut self, name: impl Into<String>, value: f64) {
        self.metrics.push((name.into(), value));
    }

    /// `metric<TAB>value`, one line per metric.
    pub fn to_machine_tsv(&self) -> String {
        let mut out = String::new();
        for (name, value) in &self.metrics {
            let _ = writeln!(out, "{}\t{}", name, value);
        }
        out
    }

    pub fn parse_machine_tsv(text: &str) -> Result<EvalReport, EvalError> {
        let mut metrics = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split('\t');
            match (fields.next(), fields.next(), fields.next()) {
                (Some(name), Some(value), None) => {
                    let value: f64 =
                        value
                            .parse()
                            .map_err(|_| EvalError::AnnotationFormat {
                                path: "<report>".to_string(),
                                line: lineno + 1,
                                reason: format!("bad metric value {:?}", value),
                            })?;
                    metrics.push((name.to_string(), value));
                }
                _ => {
                    return Err(EvalError::AnnotationFormat {
                        path: "<report>".to_string(),
                        line: lineno + 1,
                        reason: "expected metric<TAB>value".to_string(),
                    })
                }
            }
        }
        Ok(EvalReport { metrics })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (name, value) in &self.metrics {
            let _ = writeln!(out, "{:<24} {:.4}", name, value);
        }
        out
    }
}

/// Run every evaluation on one model: test-split link prediction, triple
/// classification, Coherence@k, and AutoWI@k.
pub fn evaluate_model<R: Rng + ?Sized>(
    model: &Model,
    data: &Dataset,
    pmi: &PmiMatrix,
    opts: &EvalOptions,
    rng: &mut R,
) -> Result<EvalReport, EvalError> {
    let mut report = EvalReport {
        metrics: Vec::new(),
    };
    let ranking = link_prediction(model, data, &data.test, false)?;
    report.push("mrr", ranking.mrr);
    report.push("mr", ranking.mr);
    report.push("hits_at_10", ranking.hits_at_10);
    if opts.filtered_ranking {
        let filtered = link_prediction(model, data, &data.test, true)?;
        report.push("mrr_filtered", filtered.mrr);
        report.push("mr_filtered", filtered.mr);
        report.push("hits_at_10_filtered", filtered.hits_at_10);
    }
    let classification = triple_classification(model, data, rng)?;
    report.push("auc", classification.auc);
    report.push("accuracy", classification.accuracy);
    report.push(format!("auto_wi_at_{}", opts.k), auto_word_intrusion(&model.entity, pmi, opts.k));
    report.push(format!("coherence_at_{}", opts.k), coherence_at_k(&model.entity, pmi, opts.k));
    Ok(report)
}

/// Per-metric mean and standard deviation across seeds. The deviation is the
/// population form, so a single seed reports 0.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateReport {
    pub rows: Vec<(String, f64, f64)>,
    pub n_reports: usize,
}

pub fn aggregate(reports: &[EvalReport]) -> AggregateReport {
    assert!(!reports.is_empty(), "nothing to aggregate");
    let mut rows = Vec::new();
    let mut index: HashMap<&str, Vec<f64>> = HashMap::new();
    let mut order: Vec<&str> = Vec::new();
    for report in reports {
        for (name, value) in &report.metrics {
            let entry = index.entry(name.as_str()).or_insert_with(|| {
                order.push(name.as_str());
                Vec::new()
            });
            entry.push(*value);
        }
    }
    for name in order {
        let values = &index[name];
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        rows.push((name.to_string(), mean, var.sqrt()));
    }
    AggregateReport {
        rows,
        n_reports: reports.len(),
    }
}

impl AggregateReport {
    /// `metric<TAB>mean<TAB>std`, one line per metric.
    pub fn to_machine_tsv(&self) -> String {
        let mut out = String::new();
        for (name, mean, std) in &self.rows {
            let _ = writeln!(out, "{}\t{}\t{}", name, mean, std);
        }
        out
    }

    /// Human-readable `metric: mean +/- std` table.
    pub fn to_text(&self) -> String {
        let mut out = format!("aggregate over {} run(s)\n", self.n_reports);
        for (name, mean, std) in &self.rows {
            let _ = writeln!(out, "{:<24} {:.2} ± {:.2}", name, mean, std);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(pairs: &[(&str, f64)]) -> EvalReport {
        EvalReport {
            metrics: pairs.iter().map(|&(n, v)| (n.to_string(), v)).collect(),
        }
    }

    #[test]
    fn machine_tsv_round_trips() {
        let r = report(&[("mrr", 31.625), ("mr", 112.0)]);
        let parsed = EvalReport::parse_machine_tsv(&r.to_machine_tsv()).unwrap();
        assert_eq!(parsed, r);
    }

    #[test]
    fn single_report_aggregates_with_zero_std() {
        let agg = aggregate(&[report(&[("mrr", 30.0), ("mr", 100.0)])]);
        for (_, _, std) in &agg.rows {
            assert_eq!(*std, 0.0);
        }
    }

    #[test]
    fn aggregate_means_are_arithmetic() {
        let agg = aggregate(&[
            report(&[("mrr", 30.0)]),
            report(&[("mrr", 32.0)]),
            report(&[("mrr", 34.0)]),
        ]);
        assert_eq!(agg.rows[0].1, 32.0);
        let expected_std = (8.0f64 / 3.0).sqrt();
        assert!((agg.rows[0].2 - expected_std).abs() < 1e-12);
    }

    #[test]
    fn bad_report_line_is_rejected() {
        assert!(EvalReport::parse_machine_tsv("mrr\tnot_a_number\n").is_err());
        assert!(EvalReport::parse_machine_tsv("only_one_field\n").is_err());
    }
}
