//! Closed-world negative sampling.
//!
//! Each positive triple gets two corruptions: one replacing the subject, one
//! replacing the object. Replacements are drawn uniformly from the relation's
//! category for that slot and rejected while the corrupted triple is present
//! in any split; a relation whose category is exhausted falls back to the
//! full entity vocabulary.

use rand::{Rng, RngExt};

use crate::data::{Dataset, EntityId, Triple};
use crate::model::ModelError;

/// A positive triple with its two corruptions. Both corruptions differ from
/// the positive in exactly one slot and are absent from every split.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NegativePair {
    pub positive: Triple,
    pub corrupt_subject: Triple,
    pub corrupt_object: Triple,
}

const REJECTION_TRIES: usize = 64;

/// Uniform draw over the candidates whose corruption is unknown. Rejection
/// sampling first, exhaustive enumeration if that keeps missing; both phases
/// are uniform over the valid set, so the mixture is too.
fn draw_valid<R: Rng + ?Sized>(
    candidates: &[EntityId],
    make: impl Fn(EntityId) -> Triple,
    data: &Dataset,
    rng: &mut R,
) -> Option<Triple> {
    if candidates.is_empty() {
        return None;
    }
    for _ in 0..REJECTION_TRIES {
        let c = candidates[rng.random_range(0..candidates.len())];
        let t = make(c);
        if !data.is_known(&t) {
            return Some(t);
        }
    }
    let valid: Vec<Triple> = candidates
        .iter()
        .map(|&c| make(c))
        .filter(|t| !data.is_known(t))
        .collect();
    if valid.is_empty() {
        None
    } else {
        Some(valid[rng.random_range(0..valid.len())])
    }
}

fn corrupt_slot<R: Rng + ?Sized>(
    t: &Triple,
    slot: &'static str,
    category: &[EntityId],
    make: impl Fn(EntityId) -> Triple + Copy,
    data: &Dataset,
    rng: &mut R,
) -> Result<Triple, ModelError> {
    if let Some(found) = draw_valid(category, make, data, rng) {
        return Ok(found);
    }
    // Category exhausted: any entity in the vocabulary may stand in.
    let all: Vec<EntityId> = (0..data.n_entities() as u32).map(EntityId).collect();
    draw_valid(&all, make, data, rng).ok_or_else(|| ModelError::SamplingExhausted {
        slot,
        triple: t.to_string(),
    })
}

/// Corrupt only the object slot; used by triple classification.
pub fn corrupt_object<R: Rng + ?Sized>(
    t: &Triple,
    data: &Dataset,
    rng: &mut R,
) -> Result<Triple, ModelError> {
    corrupt_slot(
        t,
        "object",
        data.object_category(t.relation),
        |c| Triple {
            object: c,
            ..*t
        },
        data,
        rng,
    )
}

/// Corrupt only the subject slot.
pub fn corrupt_subject<R: Rng + ?Sized>(
    t: &Triple,
    data: &Dataset,
    rng: &mut R,
) -> Result<Triple, ModelError> {
    corrupt_slot(
        t,
        "subject",
        data.subject_category(t.relation),
        |c| Triple {
            subject: c,
            ..*t
        },
        data,
        rng,
    )
}

/// Sample both corruptions for one positive triple.
pub fn sample_negatives<R: Rng + ?Sized>(
    t: &Triple,
    data: &Dataset,
    rng: &mut R,
) -> Result<NegativePair, ModelError> {
    let corrupt_object = corrupt_object(t, data, rng)?;
    let corrupt_subject = corrupt_subject(t, data, rng)?;
    Ok(NegativePair {
        positive: *t,
        corrupt_subject,
        corrupt_object,
    })
}

/// One [`NegativePair`] per triple, in triple order.
pub fn sample_all_negatives<R: Rng + ?Sized>(
    triples: &[Triple],
    data: &Dataset,
    rng: &mut R,
) -> Result<Vec<NegativePair>, ModelError> {
    triples
        .iter()
        .map(|t| sample_negatives(t, data, rng))
        .collect()
}
