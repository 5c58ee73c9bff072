//! Objective assembly and analytic gradients.
//!
//! The full objective is
//!   mean pairwise logistic loss over corrupted pairs
//!   + lambda_c * coherence term (entity dot products pulled toward PMI)
//!   + lambda_r * L2 term.
//!
//! When `lambda_c` is zero the coherence machinery is skipped entirely, and
//! a separately written baseline path ([`objective_baseline`],
//! [`gradient_baseline`]) exists so the reduction can be asserted exactly.

use rand::{Rng, RngExt};

use crate::data::{EntityId, Triple};
use crate::matrix::{dot, Matrix};
use crate::model::{score, Model, ModelError};
use crate::pmi::PmiMatrix;
use crate::sample::NegativePair;

/// Logistic sigmoid, stable on both tails.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Pairwise logistic ranking loss `-ln(sigma(f(t) - f(t_neg)))`.
pub fn pair_loss(model: &Model, t: &Triple, t_neg: &Triple) -> f64 {
    let margin = score(model, t) - score(model, t_neg);
    softplus(-margin)
}

/// Mean over triples of the two corruption losses.
pub fn aggregate_loss(
    model: &Model,
    triples: &[Triple],
    negatives: &[NegativePair],
) -> Result<f64, ModelError> {
    if triples.is_empty() {
        return Err(ModelError::EmptyTripleSet);
    }
    assert_eq!(triples.len(), negatives.len(), "one NegativePair per triple");
    let mut sum = 0.0;
    for (t, neg) in triples.iter().zip(negatives) {
        sum += pair_loss(model, t, &neg.corrupt_object) + pair_loss(model, t, &neg.corrupt_subject);
    }
    Ok(sum / triples.len() as f64)
}

/// Half the sum of squared entries over all parameter matrices.
pub fn l2_term(model: &Model) -> f64 {
    0.5 * (model.entity.squared_norm()
        + model.rel_subject.squared_norm()
        + model.rel_object.squared_norm())
}

// ---------------------------------------------------------------------------
// Coherence term
// ---------------------------------------------------------------------------

/// The entity-pair set a coherence evaluation runs over, with the PMI target
/// baked in per pair. Zero-PMI pairs carry a 0 target.
#[derive(Debug, Clone, Default)]
pub struct CoherencePairs {
    pairs: Vec<(EntityId, EntityId, f64)>,
}

impl CoherencePairs {
    pub fn empty() -> Self {
        CoherencePairs::default()
    }

    /// All stored PMI entries, in canonical pair order.
    pub fn stored(pmi: &PmiMatrix) -> Self {
        CoherencePairs {
            pairs: pmi
                .sorted_entries()
                .into_iter()
                .map(|(i, j, p)| (EntityId(i), EntityId(j), p))
                .collect(),
        }
    }

    /// Every unordered pair over `pmi.n()` entities. Quadratic; meant for
    /// small instances where the exact sum is wanted.
    pub fn dense(pmi: &PmiMatrix) -> Self {
        let n = pmi.n() as u32;
        let mut pairs = Vec::with_capacity((pmi.n() * pmi.n().saturating_sub(1)) / 2);
        for i in 0..n {
            for j in (i + 1)..n {
                pairs.push((EntityId(i), EntityId(j), pmi.lookup(EntityId(i), EntityId(j))));
            }
        }
        CoherencePairs { pairs }
    }

    /// Stored entries plus `per_entry` uniformly sampled unstored pairs per
    /// stored entry, each with target 0. Keeps the per-step cost proportional
    /// to the sparse support.
    pub fn stored_with_zero_samples<R: Rng + ?Sized>(
        pmi: &PmiMatrix,
        per_entry: usize,
        rng: &mut R,
    ) -> Self {
        let mut out = CoherencePairs::stored(pmi);
        let n = pmi.n() as u32;
        if n < 2 {
            return out;
        }
        let stored = out.pairs.len();
        let wanted = stored * per_entry;
        // Rejection is cheap while the stored support is sparse; cap the
        // attempts so a near-dense matrix cannot loop forever.
        let mut accepted = 0;
        let mut attempts = 0usize;
        let max_attempts = wanted.saturating_mul(20).max(64);
        while accepted < wanted && attempts < max_attempts {
            attempts += 1;
            let a = rng.random_range(0..n);
            let b = rng.random_range(0..n);
            if a == b {
                continue;
            }
            let (i, j) = (a.min(b), a.max(b));
            if pmi.lookup(EntityId(i), EntityId(j)) != 0.0 {
                continue;
            }
            out.pairs.push((EntityId(i), EntityId(j), 0.0));
            accepted += 1;
        }
        out
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &(EntityId, EntityId, f64)> {
        self.pairs.iter()
    }
}

/// Sum over the pair set of `(v(e_i) . v(e_j) - p_ij)^2`. Over the dense pair
/// set this is exactly the coherence penalty.
pub fn coherence_term(theta_e: &Matrix, pairs: &CoherencePairs) -> f64 {
    let mut sum = 0.0;
    for &(i, j, target) in pairs.iter() {
        let d = dot(theta_e.row(i.idx()), theta_e.row(j.idx())) - target;
        sum += d * d;
    }
    sum
}

// ---------------------------------------------------------------------------
// Full objective and gradient
// ---------------------------------------------------------------------------

/// `aggregate_loss + lambda_c * coherence + lambda_r * l2`.
pub fn objective(
    model: &Model,
    triples: &[Triple],
    negatives: &[NegativePair],
    pairs: &CoherencePairs,
    lambda_c: f64,
    lambda_r: f64,
) -> Result<f64, ModelError> {
    let mut value = aggregate_loss(model, triples, negatives)?;
    if lambda_c != 0.0 {
        value += lambda_c * coherence_term(&model.entity, pairs);
    }
    if lambda_r != 0.0 {
        value += lambda_r * l2_term(model);
    }
    Ok(value)
}

/// Accumulate the gradient of `pair_loss(t, t_neg)` scaled by `weight`.
fn accumulate_pair_loss_grad(
    grad: &mut Model,
    model: &Model,
    t: &Triple,
    t_neg: &Triple,
    weight: f64,
) {
    let margin = score(model, t) - score(model, t_neg);
    // d/dmargin of softplus(-margin) = -sigmoid(-margin)
    let g = -sigmoid(-margin) * weight;
    accumulate_score_grad(grad, model, t, g);
    accumulate_score_grad(grad, model, t_neg, -g);
}

/// Accumulate `coeff * d f(t) / d theta` into `grad`.
fn accumulate_score_grad(grad: &mut Model, model: &Model, t: &Triple, coeff: f64) {
    let d = model.dim();
    let s = t.subject.idx();
    let r = t.relation.idx();
    let o = t.object.idx();
    for c in 0..d {
        grad.entity.row_mut(s)[c] += coeff * model.rel_subject.get(r, c);
        grad.rel_subject.row_mut(r)[c] += coeff * model.entity.get(s, c);
        grad.entity.row_mut(o)[c] += coeff * model.rel_object.get(r, c);
        grad.rel_object.row_mut(r)[c] += coeff * model.entity.get(o, c);
    }
}

/// Analytic gradient of [`objective`] with respect to every parameter.
pub fn gradient(
    model: &Model,
    triples: &[Triple],
    negatives: &[NegativePair],
    pairs: &CoherencePairs,
    lambda_c: f64,
    lambda_r: f64,
) -> Result<Model, ModelError> {
    if triples.is_empty() {
        return Err(ModelError::EmptyTripleSet);
    }
    assert_eq!(triples.len(), negatives.len(), "one NegativePair per triple");
    let mut grad = model.zeros_like();
    let weight = 1.0 / triples.len() as f64;
    for (t, neg) in triples.iter().zip(negatives) {
        accumulate_pair_loss_grad(&mut grad, model, t, &neg.corrupt_object, weight);
        accumulate_pair_loss_grad(&mut grad, model, t, &neg.corrupt_subject, weight);
    }
    if lambda_c != 0.0 {
        let d = model.dim();
        for &(i, j, target) in pairs.iter() {
            let ii = i.idx();
            let jj = j.idx();
            let residual = dot(model.entity.row(ii), model.entity.row(jj)) - target;
            let coeff = 2.0 * lambda_c * residual;
            for c in 0..d {
                let vi = model.entity.get(ii, c);
                let vj = model.entity.get(jj, c);
                grad.entity.row_mut(ii)[c] += coeff * vj;
                grad.entity.row_mut(jj)[c] += coeff * vi;
            }
        }
    }
    if lambda_r != 0.0 {
        add_scaled_params(&mut grad, model, lambda_r);
    }
    Ok(grad)
}

fn add_scaled_params(grad: &mut Model, model: &Model, scale: f64) {
    for (g, m) in [
        (&mut grad.entity, &model.entity),
        (&mut grad.rel_subject, &model.rel_subject),
        (&mut grad.rel_object, &model.rel_object),
    ] {
        for (gv, mv) in g.as_mut_slice().iter_mut().zip(m.as_slice()) {
            *gv += scale * mv;
        }
    }
}

// ---------------------------------------------------------------------------
// Baseline path: the same model without any coherence machinery. Written out
// separately so the lambda_c = 0 reduction can be checked for exact equality.
// ---------------------------------------------------------------------------

pub fn objective_baseline(
    model: &Model,
    triples: &[Triple],
    negatives: &[NegativePair],
    lambda_r: f64,
) -> Result<f64, ModelError> {
    let mut value = aggregate_loss(model, triples, negatives)?;
    if lambda_r != 0.0 {
        value += lambda_r * l2_term(model);
    }
    Ok(value)
}

pub fn gradient_baseline(
    model: &Model,
    triples: &[Triple],
    negatives: &[NegativePair],
    lambda_r: f64,
) -> Result<Model, ModelError> {
    if triples.is_empty() {
        return Err(ModelError::EmptyTripleSet);
    }
    assert_eq!(triples.len(), negatives.len(), "one NegativePair per triple");
    let mut grad = model.zeros_like();
    let weight = 1.0 / triples.len() as f64;
    for (t, neg) in triples.iter().zip(negatives) {
        accumulate_pair_loss_grad(&mut grad, model, t, &neg.corrupt_object, weight);
        accumulate_pair_loss_grad(&mut grad, model, t, &neg.corrupt_subject, weight);
    }
    if lambda_r != 0.0 {
        add_scaled_params(&mut grad, model, lambda_r);
    }
    Ok(grad)
}
