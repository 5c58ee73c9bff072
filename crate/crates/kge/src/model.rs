//! Entity-model parameters and scoring.
//!
//! Each entity has one vector `v(e)`; each relation has a subject-side vector
//! `v_s(r)` and an object-side vector `v_o(r)`. A triple scores as
//! `f(s, r, o) = v(s) . v_s(r) + v(o) . v_o(r)`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::data::Triple;
use crate::matrix::{dot, Matrix};

const MODEL_MAGIC: &[u8; 8] = b"KGEMODEL";
const MODEL_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("empty triple set")]
    EmptyTripleSet,
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("negative sampling exhausted for {slot} slot of triple {triple}")]
    SamplingExhausted { slot: &'static str, triple: String },
    #[error("training diverged at epoch {epoch}: non-finite {what}")]
    Divergence { epoch: usize, what: &'static str },
    #[error("model file {path}: {reason}")]
    Corrupt { path: String, reason: String },
    #[error("model file format version {found} unsupported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("model shape ({n} entities, {m} relations, dim {d}) incompatible: {reason}")]
    Incompatible {
        n: usize,
        m: usize,
        d: usize,
        reason: String,
    },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Embedding parameters. Also used as the gradient container, since the
/// gradient of the objective is model-shaped.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    /// n x d entity vectors, row per entity.
    pub entity: Matrix,
    /// m x d subject-side relation vectors.
    pub rel_subject: Matrix,
    /// m x d object-side relation vectors.
    pub rel_object: Matrix,
}

impl Model {
    pub fn zeros(n_entities: usize, n_relations: usize, dim: usize) -> Self {
        Model {
            entity: Matrix::zeros(n_entities, dim),
            rel_subject: Matrix::zeros(n_relations, dim),
            rel_object: Matrix::zeros(n_relations, dim),
        }
    }

    /// Parameters drawn i.i.d. from a zero-mean Gaussian.
    pub fn random<R: rand::Rng>(
        n_entities: usize,
        n_relations: usize,
        dim: usize,
        stddev: f64,
        rng: &mut R,
    ) -> Self {
        let normal = Normal::new(0.0, stddev).expect("stddev must be finite and positive");
        let mut model = Model::zeros(n_entities, n_relations, dim);
        for m in [&mut model.entity, &mut model.rel_subject, &mut model.rel_object] {
            for v in m.as_mut_slice() {
                *v = normal.sample(rng);
            }
        }
        model
    }

    pub fn zeros_like(&self) -> Self {
        Model::zeros(self.n_entities(), self.n_relations(), self.dim())
    }

    pub fn n_entities(&self) -> usize {
        self.entity.rows()
    }

    pub fn n_relations(&self) -> usize {
        self.rel_subject.rows()
    }

    pub fn dim(&self) -> usize {
        self.entity.cols()
    }

    pub fn is_finite(&self) -> bool {
        self.entity.is_finite() && self.rel_subject.is_finite() && self.rel_object.is_finite()
    }

    /// Largest absolute entry across all three matrices.
    pub fn max_abs(&self) -> f64 {
        self.entity
            .max_abs()
            .max(self.rel_subject.max_abs())
            .max(self.rel_object.max_abs())
    }

    /// `self -= scale * other` on all parameter matrices.
    pub fn scaled_sub(&mut self, other: &Model, scale: f64) {
        self.entity.scaled_sub(&other.entity, scale);
        self.rel_subject.scaled_sub(&other.rel_subject, scale);
        self.rel_object.scaled_sub(&other.rel_object, scale);
    }
}

/// Triple score `v(s) . v_s(r) + v(o) . v_o(r)`.
///
/// Panics if an id is out of range for the model.
pub fn score(model: &Model, t: &Triple) -> f64 {
    dot(
        model.entity.row(t.subject.idx()),
        model.rel_subject.row(t.relation.idx()),
    ) + dot(
        model.entity.row(t.object.idx()),
        model.rel_object.row(t.relation.idx()),
    )
}

// ---------------------------------------------------------------------------
// Persistence: fixed little-endian layout
//   magic(8) version(u32) n(u64) m(u64) d(u64) seed(u64)
//   echo_len(u32) echo(utf-8)
//   entity(n*d f64) rel_subject(m*d f64) rel_object(m*d f64), row-major
// ---------------------------------------------------------------------------

/// A model plus the provenance recorded in its file header.
#[derive(Debug, Clone)]
pub struct SavedModel {
    pub model: Model,
    pub seed: u64,
    pub config_echo: String,
}

pub fn save_model(model: &Model, seed: u64, config_echo: &str, path: &Path) -> Result<(), ModelError> {
    let display = path.display().to_string();
    let io = |e: std::io::Error| ModelError::Io {
        path: display.clone(),
        source: e,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    w.write_all(MODEL_MAGIC).map_err(io)?;
    w.write_all(&MODEL_VERSION.to_le_bytes()).map_err(io)?;
    w.write_all(&(model.n_entities() as u64).to_le_bytes()).map_err(io)?;
    w.write_all(&(model.n_relations() as u64).to_le_bytes()).map_err(io)?;
    w.write_all(&(model.dim() as u64).to_le_bytes()).map_err(io)?;
    w.write_all(&seed.to_le_bytes()).map_err(io)?;
    let echo = config_echo.as_bytes();
    w.write_all(&(echo.len() as u32).to_le_bytes()).map_err(io)?;
    w.write_all(echo).map_err(io)?;
    for m in [&model.entity, &model.rel_subject, &model.rel_object] {
        for v in m.as_slice() {
            w.write_all(&v.to_le_bytes()).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

pub fn load_model(path: &Path) -> Result<SavedModel, ModelError> {
    let display = path.display().to_string();
    let io = |e: std::io::Error| ModelError::Io {
        path: display.clone(),
        source: e,
    };
    let corrupt = |reason: &str| ModelError::Corrupt {
        path: display.clone(),
        reason: reason.to_string(),
    };
    let mut r = BufReader::new(File::open(path).map_err(io)?);

    let mut read = |buf: &mut [u8], what: &str| -> Result<(), ModelError> {
        r.read_exact(buf).map_err(|e| {
            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                ModelError::Corrupt {
                    path: display.clone(),
                    reason: format!("truncated {what}"),
                }
            } else {
                ModelError::Io {
                    path: display.clone(),
                    source: e,
                }
            }
        })
    };

    let mut magic = [0u8; 8];
    read(&mut magic, "header")?;
    if &magic != MODEL_MAGIC {
        return Err(corrupt("bad magic header"));
    }
    let mut u32buf = [0u8; 4];
    read(&mut u32buf, "header")?;
    let version = u32::from_le_bytes(u32buf);
    if version != MODEL_VERSION {
        return Err(ModelError::VersionMismatch {
            found: version,
            expected: MODEL_VERSION,
        });
    }
    let mut u64buf = [0u8; 8];
    let mut sizes = [0usize; 3];
    for s in sizes.iter_mut() {
        read(&mut u64buf, "header")?;
        *s = u64::from_le_bytes(u64buf) as usize;
    }
    let [n, m, d] = sizes;
    read(&mut u64buf, "header")?;
    let seed = u64::from_le_bytes(u64buf);
    read(&mut u32buf, "header")?;
    let echo_len = u32::from_le_bytes(u32buf) as usize;
    let mut echo_bytes = vec![0u8; echo_len];
    read(&mut echo_bytes, "config echo")?;
    let config_echo =
        String::from_utf8(echo_bytes).map_err(|_| corrupt("config echo is not utf-8"))?;

    let mut read_matrix = |rows: usize, what: &str| -> Result<Matrix, ModelError> {
        let mut data = Vec::with_capacity(rows * d);
        let mut f64buf = [0u8; 8];
        for _ in 0..rows * d {
            read(&mut f64buf, what)?;
            data.push(f64::from_le_bytes(f64buf));
        }
        Ok(Matrix::from_vec(rows, d, data))
    };
    let entity = read_matrix(n, "entity matrix")?;
    let rel_subject = read_matrix(m, "subject relation matrix")?;
    let rel_object = read_matrix(m, "object relation matrix")?;

    Ok(SavedModel {
        model: Model {
            entity,
            rel_subject,
            rel_object,
        },
        seed,
        config_echo,
    })
}

/// TSV export of the entity matrix: `entity<TAB>v_1<TAB>...<TAB>v_d`.
pub fn export_entity_tsv(
    model: &Model,
    entity_names: &[String],
    path: &Path,
) -> Result<(), ModelError> {
    let display = path.display().to_string();
    let io = |e: std::io::Error| ModelError::Io {
        path: display.clone(),
        source: e,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    for (i, name) in entity_names.iter().enumerate() {
        write!(w, "{}", name).map_err(io)?;
        for v in model.entity.row(i) {
            write!(w, "\t{}", v).map_err(io)?;
        }
        writeln!(w).map_err(io)?;
    }
    w.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn score_is_sum_of_slot_dot_products() {
        let mut model = Model::zeros(2, 1, 2);
        model.entity.row_mut(0).copy_from_slice(&[1.0, 0.0]); // v(e_s)
        model.rel_subject.row_mut(0).copy_from_slice(&[2.0, 0.0]); // v_s(r)
        model.entity.row_mut(1).copy_from_slice(&[0.0, 1.0]); // v(e_o)
        model.rel_object.row_mut(0).copy_from_slice(&[0.0, 3.0]); // v_o(r)
        assert_eq!(score(&model, &Triple::new(0, 0, 1)), 5.0);
    }

    #[test]
    fn zero_model_scores_zero() {
        let model = Model::zeros(3, 2, 4);
        for s in 0..3 {
            for r in 0..2 {
                for o in 0..3 {
                    assert_eq!(score(&model, &Triple::new(s, r, o)), 0.0);
                }
            }
        }
    }

    #[test]
    fn score_matches_scalar_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let model = Model::random(5, 2, 6, 0.5, &mut rng);
        let naive = |t: &Triple| {
            let mut acc = 0.0;
            for c in 0..model.dim() {
                acc += model.entity.get(t.subject.idx(), c)
                    * model.rel_subject.get(t.relation.idx(), c);
                acc += model.entity.get(t.object.idx(), c)
                    * model.rel_object.get(t.relation.idx(), c);
            }
            acc
        };
        for s in 0..5 {
            for r in 0..2 {
                for o in 0..5 {
                    let t = Triple::new(s, r, o);
                    assert!((score(&model, &t) - naive(&t)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    #[should_panic]
    fn score_out_of_range_panics() {
        let model = Model::zeros(2, 1, 2);
        score(&model, &Triple::new(0, 0, 5));
    }

    #[test]
    fn save_load_round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let model = Model::random(4, 3, 5, 0.1, &mut rng);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.kge");
        save_model(&model, 42, "d=5 lr=0.05", &path).unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(loaded.model, model);
        assert_eq!(loaded.seed, 42);
        assert_eq!(loaded.config_echo, "d=5 lr=0.05");
    }

    #[test]
    fn truncated_model_file_is_corrupt() {
        let model = Model::zeros(2, 1, 2);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.kge");
        save_model(&model, 0, "", &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(load_model(&path), Err(ModelError::Corrupt { .. })));
    }

    #[test]
    fn entity_tsv_uses_names() {
        let model = Model::zeros(2, 1, 2);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ent.tsv");
        export_entity_tsv(&model, &["alpha".into(), "beta".into()], &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "alpha\t0\t0\nbeta\t0\t0\n");
    }
}
