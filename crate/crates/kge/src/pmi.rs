//! Sparse entity-pair PMI matrix: construction from co-occurrence counts,
//! symmetric lookup with a zero default, and versioned persistence.
//!
//! PMI here is the standard corpus pointwise mutual information over pair
//! events, `p_ij = ln( P(i,j) / (P(i) P(j)) )` with `P(i,j) = c_ij / C` and
//! `P(i) = c_i / C`, where `c_ij` is the pair count, `c_i` the per-entity
//! co-occurrence mass, and `C` the total pair-count mass. Natural log.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::data::{CooccurrenceRecord, EntityId};

const PMI_MAGIC: &[u8; 8] = b"KGE.PMI\0";
const PMI_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum PmiError {
    #[error("no co-occurrence records; PMI matrix would be empty")]
    EmptyCooccurrences,
    #[error("smoothing must be non-negative, got {0}")]
    NegativeSmoothing(f64),
    #[error("pmi file {path}: {reason}")]
    Corrupt { path: String, reason: String },
    #[error("pmi file format version {found} unsupported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Sparse symmetric entity-pair PMI matrix. Only canonical pairs (i < j) are
/// stored; absent pairs and self-pairs look up as 0.
#[derive(Debug, Clone)]
pub struct PmiMatrix {
    n: usize,
    entries: HashMap<(u32, u32), f64>,
    total_pairs: f64,
    marginal: Vec<f64>,
}

impl PmiMatrix {
    /// Matrix with no stored pairs; every lookup is 0. Used for runs that
    /// carry no text signal.
    pub fn empty(n: usize) -> Self {
        PmiMatrix {
            n,
            entries: HashMap::new(),
            total_pairs: 0.0,
            marginal: vec![0.0; n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_pairs(&self) -> f64 {
        self.total_pairs
    }

    pub fn marginal(&self, e: EntityId) -> f64 {
        self.marginal[e.idx()]
    }

    /// Symmetric PMI lookup. Absent pairs and `i == j` return 0.
    ///
    /// Panics if an id is out of range.
    pub fn lookup(&self, i: EntityId, j: EntityId) -> f64 {
        assert!(
            i.idx() < self.n && j.idx() < self.n,
            "entity id out of range: ({}, {}) with n = {}",
            i.0,
            j.0,
            self.n
        );
        if i == j {
            return 0.0;
        }
        let key = (i.0.min(j.0), i.0.max(j.0));
        self.entries.get(&key).copied().unwrap_or(0.0)
    }

    /// Stored entries sorted by canonical pair, for deterministic iteration.
    pub fn sorted_entries(&self) -> Vec<(u32, u32, f64)> {
        let mut v: Vec<(u32, u32, f64)> = self
            .entries
            .iter()
            .map(|(&(i, j), &p)| (i, j, p))
            .collect();
        v.sort_unstable_by_key(|&(i, j, _)| (i, j));
        v
    }
}

/// Build the PMI matrix from aggregated co-occurrence records.
///
/// `smoothing` is added to each pair count before the log ratio; marginals
/// and the total mass stay raw. With `clip_negative`, entries below zero are
/// clamped to 0 at construction.
pub fn compute_pmi(
    records: &[CooccurrenceRecord],
    n: usize,
    smoothing: f64,
    clip_negative: bool,
) -> Result<PmiMatrix, PmiError> {
    if smoothing < 0.0 {
        return Err(PmiError::NegativeSmoothing(smoothing));
    }
    if records.iter().all(|r| r.count == 0) {
        return Err(PmiError::EmptyCooccurrences);
    }
    let mut marginal = vec![0.0f64; n];
    let mut total = 0.0f64;
    for r in records {
        let c = r.count as f64;
        marginal[r.a.idx()] += c;
        marginal[r.b.idx()] += c;
        total += c;
    }
    let mut entries = HashMap::with_capacity(records.len());
    for r in records {
        if r.count == 0 {
            continue;
        }
        let c_ij = r.count as f64 + smoothing;
        let mut p = (c_ij * total / (marginal[r.a.idx()] * marginal[r.b.idx()])).ln();
        if clip_negative && p < 0.0 {
            p = 0.0;
        }
        debug_assert!(p.is_finite());
        entries.insert((r.a.0, r.b.0), p);
    }
    Ok(PmiMatrix {
        n,
        entries,
        total_pairs: total,
        marginal,
    })
}

// ---------------------------------------------------------------------------
// Persistence: fixed little-endian layout
//   magic(8) version(u32) n(u64) entry_count(u64) total(f64)
//   marginal(n x f64)
//   entries sorted by (i, j): (i: u32, j: u32, p: f64)
// ---------------------------------------------------------------------------

pub fn save_pmi(pmi: &PmiMatrix, path: &Path) -> Result<(), PmiError> {
    let display = path.display().to_string();
    let io = |e: std::io::Error| PmiError::Io {
        path: display.clone(),
        source: e,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    w.write_all(PMI_MAGIC).map_err(io)?;
    w.write_all(&PMI_VERSION.to_le_bytes()).map_err(io)?;
    w.write_all(&(pmi.n as u64).to_le_bytes()).map_err(io)?;
    w.write_all(&(pmi.entries.len() as u64).to_le_bytes())
        .map_err(io)?;
    w.write_all(&pmi.total_pairs.to_le_bytes()).map_err(io)?;
    for m in &pmi.marginal {
        w.write_all(&m.to_le_bytes()).map_err(io)?;
    }
    for (i, j, p) in pmi.sorted_entries() {
        w.write_all(&i.to_le_bytes()).map_err(io)?;
        w.write_all(&j.to_le_bytes()).map_err(io)?;
        w.write_all(&p.to_le_bytes()).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn load_pmi(path: &Path) -> Result<PmiMatrix, PmiError> {
    let display = path.display().to_string();
    let io = |e: std::io::Error| PmiError::Io {
        path: display.clone(),
        source: e,
    };
    let corrupt = |reason: &str| PmiError::Corrupt {
        path: display.clone(),
        reason: reason.to_string(),
    };
    let mut r = BufReader::new(File::open(path).map_err(io)?);

    fn read_exact_or<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<bool, std::io::Error> {
        match r.read_exact(buf) {
            Ok(()) => Ok(true),
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => Ok(false),
            Err(e) => Err(e),
        }
    }

    let mut magic = [0u8; 8];
    if !read_exact_or(&mut r, &mut magic).map_err(io)? || &magic != PMI_MAGIC {
        return Err(corrupt("bad magic header"));
    }
    let mut u32buf = [0u8; 4];
    if !read_exact_or(&mut r, &mut u32buf).map_err(io)? {
        return Err(corrupt("truncated header"));
    }
    let version = u32::from_le_bytes(u32buf);
    if version != PMI_VERSION {
        return Err(PmiError::VersionMismatch {
            found: version,
            expected: PMI_VERSION,
        });
    }
    let mut u64buf = [0u8; 8];
    let mut read_u64 = |r: &mut BufReader<File>| -> Result<u64, PmiError> {
        if !read_exact_or(r, &mut u64buf).map_err(io)? {
            return Err(corrupt("truncated header"));
        }
        Ok(u64::from_le_bytes(u64buf))
    };
    let n = read_u64(&mut r)? as usize;
    let count = read_u64(&mut r)? as usize;
    let mut f64buf = [0u8; 8];
    if !read_exact_or(&mut r, &mut f64buf).map_err(io)? {
        return Err(corrupt("truncated header"));
    }
    let total_pairs = f64::from_le_bytes(f64buf);

    let mut marginal = Vec::with_capacity(n);
    for _ in 0..n {
        if !read_exact_or(&mut r, &mut f64buf).map_err(io)? {
            return Err(corrupt("truncated marginals"));
        }
        marginal.push(f64::from_le_bytes(f64buf));
    }
    let mut entries = HashMap::with_capacity(count);
    let mut entry_buf = [0u8; 16];
    for _ in 0..count {
        if !read_exact_or(&mut r, &mut entry_buf).map_err(io)? {
            return Err(corrupt("truncated entries"));
        }
        let i = u32::from_le_bytes(entry_buf[0..4].try_into().unwrap());
        let j = u32::from_le_bytes(entry_buf[4..8].try_into().unwrap());
        let p = f64::from_le_bytes(entry_buf[8..16].try_into().unwrap());
        if i as usize >= n || j <= i {
            return Err(corrupt("entry pair out of order or out of range"));
        }
        entries.insert((i, j), p);
    }
    let mut tail = [0u8; 1];
    if read_exact_or(&mut r, &mut tail).map_err(io)? {
        return Err(corrupt("trailing bytes after entries"));
    }
    Ok(PmiMatrix {
        n,
        entries,
        total_pairs,
        marginal,
    })
}

/// Plain TSV export `i<TAB>j<TAB>pmi`, one canonical pair per line.
pub fn export_pmi_tsv(pmi: &PmiMatrix, path: &Path) -> Result<(), PmiError> {
    let display = path.display().to_string();
    let io = |e: std::io::Error| PmiError::Io {
        path: display.clone(),
        source: e,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    for (i, j, p) in pmi.sorted_entries() {
        writeln!(w, "{}\t{}\t{}", i, j, p).map_err(io)?;
    }
    w.flush().map_err(io)
}
