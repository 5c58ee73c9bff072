//! Knowledge-graph ingestion: triple files, vocabularies, split indexing,
//! per-relation entity categories, and textual co-occurrence extraction.
//!
//! Triple files are UTF-8 TSV with exactly two tab separators per line:
//! `subject<TAB>relation<TAB>object`. Textual-triple files share the shape;
//! the middle column is opaque text.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

/// Dense index into the entity vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EntityId(pub u32);

impl EntityId {
    pub fn idx(self) -> usize {
        self.0 as usize
    }
}

/// Dense index into the relation vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RelationId(pub u32);

impl RelationId {
    pub fn idx(self) -> usize {
        self.0 as usize
    }
}

/// One knowledge-graph fact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub subject: EntityId,
    pub relation: RelationId,
    pub object: EntityId,
}

impl Triple {
    pub fn new(s: u32, r: u32, o: u32) -> Self {
        Triple {
            subject: EntityId(s),
            relation: RelationId(r),
            object: EntityId(o),
        }
    }
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}:{line}: malformed line: {reason}")]
    Parse {
        path: String,
        line: usize,
        reason: String,
    },
    #[error("{path}:{line}: unknown symbol {symbol:?} under frozen vocabulary")]
    UnknownSymbol {
        path: String,
        line: usize,
        symbol: String,
    },
    #[error("splits are not disjoint; {count} duplicate triple(s), first: {first}")]
    OverlappingSplits { count: usize, first: String },
    #[error("dataset cache {path}: {reason}")]
    Cache { path: String, reason: String },
    #[error("dataset cache format version {found} unsupported (expected {expected})")]
    CacheVersion { found: u32, expected: u32 },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &str, source: std::io::Error) -> DataError {
    DataError::Io {
        path: path.to_string(),
        source,
    }
}

/// Bijective string <-> dense-id mapping, ids assigned in first-appearance order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Vocab {
    names: Vec<String>,
    ids: HashMap<String, u32>,
}

impl Vocab {
    pub fn new() -> Self {
        Vocab::default()
    }

    /// Id for `name`, inserting it at the next index if absent.
    pub fn intern(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.ids.get(name) {
            return id;
        }
        let id = self.names.len() as u32;
        self.names.push(name.to_string());
        self.ids.insert(name.to_string(), id);
        id
    }

    pub fn id(&self, name: &str) -> Option<u32> {
        self.ids.get(name).copied()
    }

    pub fn name(&self, id: u32) -> &str {
        &self.names[id as usize]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// Whether a loader may extend the vocabulary or must find every symbol present.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VocabMode {
    Extend,
    Frozen,
}

/// Parse triples from a reader. Duplicated lines collapse to one triple
/// (first-occurrence order is kept).
pub fn parse_triples<R: BufRead>(
    reader: R,
    source: &str,
    entities: &mut Vocab,
    relations: &mut Vocab,
    mode: VocabMode,
) -> Result<Vec<Triple>, DataError> {
    let mut triples = Vec::new();
    let mut seen = HashSet::new();
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|e| io_err(source, e))?;
        let mut fields = line.split('\t');
        let (s, r, o) = match (fields.next(), fields.next(), fields.next(), fields.next()) {
            (Some(s), Some(r), Some(o), None) => (s, r, o),
            _ => {
                return Err(DataError::Parse {
                    path: source.to_string(),
                    line: lineno,
                    reason: format!(
                        "expected 3 tab-separated fields, found {}",
                        line.split('\t').count()
                    ),
                })
            }
        };
        let resolve_entity = |vocab: &mut Vocab, sym: &str| match mode {
            VocabMode::Extend => Ok(vocab.intern(sym)),
            VocabMode::Frozen => vocab.id(sym).ok_or_else(|| DataError::UnknownSymbol {
                path: source.to_string(),
                line: lineno,
                symbol: sym.to_string(),
            }),
        };
        let s_id = resolve_entity(entities, s)?;
        let r_id = match mode {
            VocabMode::Extend => relations.intern(r),
            VocabMode::Frozen => relations.id(r).ok_or_else(|| DataError::UnknownSymbol {
                path: source.to_string(),
                line: lineno,
                symbol: r.to_string(),
            })?,
        };
        let o_id = resolve_entity(entities, o)?;
        let t = Triple::new(s_id, r_id, o_id);
        if seen.insert(t) {
            triples.push(t);
        }
    }
    Ok(triples)
}

/// Load a triple file from disk. See [`parse_triples`].
pub fn load_triples(
    path: &Path,
    entities: &mut Vocab,
    relations: &mut Vocab,
    mode: VocabMode,
) -> Result<Vec<Triple>, DataError> {
    let display = path.display().to_string();
    let file = File::open(path).map_err(|e| io_err(&display, e))?;
    parse_triples(BufReader::new(file), &display, entities, relations, mode)
}

/// Immutable view of one ingested KG: vocabularies, splits, a membership
/// index over all splits, and per-relation argument categories.
///
/// A category is the set of entities observed in that argument slot of that
/// relation anywhere in train/valid/test. Categories drive both evaluation
/// candidate sets and negative-sampling corruption pools.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub entities: Vocab,
    pub relations: Vocab,
    pub train: Vec<Triple>,
    pub valid: Vec<Triple>,
    pub test: Vec<Triple>,
    known: HashSet<Triple>,
    object_category: Vec<Vec<EntityId>>,
    subject_category: Vec<Vec<EntityId>>,
}

impl Dataset {
    /// Assemble a dataset from parsed splits sharing a vocabulary.
    /// Fails if the splits overlap.
    pub fn build(
        entities: Vocab,
        relations: Vocab,
        train: Vec<Triple>,
        valid: Vec<Triple>,
        test: Vec<Triple>,
    ) -> Result<Self, DataError> {
        let mut known = HashSet::with_capacity(train.len() + valid.len() + test.len());
        let mut dups = Vec::new();
        for t in train.iter().chain(&valid).chain(&test) {
            if !known.insert(*t) {
                dups.push(*t);
            }
        }
        if !dups.is_empty() {
            let first = format_triple(&dups[0], &entities, &relations);
            return Err(DataError::OverlappingSplits {
                count: dups.len(),
                first,
            });
        }

        let m = relations.len();
        let mut object_sets: Vec<HashSet<EntityId>> = vec![HashSet::new(); m];
        let mut subject_sets: Vec<HashSet<EntityId>> = vec![HashSet::new(); m];
        for t in &known {
            object_sets[t.relation.idx()].insert(t.object);
            subject_sets[t.relation.idx()].insert(t.subject);
        }
        let sorted = |set: HashSet<EntityId>| {
            let mut v: Vec<EntityId> = set.into_iter().collect();
            v.sort_unstable();
            v
        };
        let object_category = object_sets.into_iter().map(sorted).collect();
        let subject_category = subject_sets.into_iter().map(sorted).collect();

        Ok(Dataset {
            entities,
            relations,
            train,
            valid,
            test,
            known,
            object_category,
            subject_category,
        })
    }

    /// Load the three split files, extending the vocabulary in file order
    /// (train, then valid, then test) for reproducible ids.
    pub fn load(train: &Path, valid: &Path, test: &Path) -> Result<Self, DataError> {
        let mut entities = Vocab::new();
        let mut relations = Vocab::new();
        let train = load_triples(train, &mut entities, &mut relations, VocabMode::Extend)?;
        let valid = load_triples(valid, &mut entities, &mut relations, VocabMode::Extend)?;
        let test = load_triples(test, &mut entities, &mut relations, VocabMode::Extend)?;
        Dataset::build(entities, relations, train, valid, test)
    }

    pub fn n_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn n_relations(&self) -> usize {
        self.relations.len()
    }

    /// True when the triple occurs in train, valid, or test.
    pub fn is_known(&self, t: &Triple) -> bool {
        self.known.contains(t)
    }

    pub fn object_category(&self, r: RelationId) -> &[EntityId] {
        &self.object_category[r.idx()]
    }

    pub fn subject_category(&self, r: RelationId) -> &[EntityId] {
        &self.subject_category[r.idx()]
    }
}

pub fn format_triple(t: &Triple, entities: &Vocab, relations: &Vocab) -> String {
    format!(
        "({}, {}, {})",
        entities.name(t.subject.0),
        relations.name(t.relation.0),
        entities.name(t.object.0)
    )
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.subject.0, self.relation.0, self.object.0)
    }
}

// ---------------------------------------------------------------------------
// Textual co-occurrences
// ---------------------------------------------------------------------------

/// Aggregated undirected co-occurrence count for one canonical entity pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CooccurrenceRecord {
    /// Smaller entity id of the pair.
    pub a: EntityId,
    /// Larger entity id of the pair.
    pub b: EntityId,
    pub count: u64,
}

/// Output of [`extract_cooccurrences`]: canonical pair counts plus skip counters.
#[derive(Debug, Clone, Default)]
pub struct CooccurrenceStats {
    /// Records sorted by (a, b).
    pub records: Vec<CooccurrenceRecord>,
    /// Lines dropped: unresolvable entity, self-pair, or malformed shape.
    pub skipped_lines: u64,
    pub total_lines: u64,
}

impl CooccurrenceStats {
    /// Number of distinct entities appearing in at least one record.
    pub fn entities_covered(&self) -> usize {
        let mut seen = HashSet::new();
        for r in &self.records {
            seen.insert(r.a);
            seen.insert(r.b);
        }
        seen.len()
    }
}

/// Stream textual triples `entity<TAB>text<TAB>entity` and aggregate undirected
/// entity-pair counts against a frozen entity vocabulary.
///
/// Direction is ignored, self-pairs are dropped, and lines whose endpoint
/// entities are not in the vocabulary are skipped and counted, not fatal.
/// With `multiplicity` false, each pair counts at most 1 regardless of how
/// many textual triples link it.
pub fn extract_cooccurrences<R: BufRead>(
    reader: R,
    source: &str,
    entities: &Vocab,
    multiplicity: bool,
) -> Result<CooccurrenceStats, DataError> {
    let mut counts: HashMap<(u32, u32), u64> = HashMap::new();
    let mut skipped = 0u64;
    let mut total = 0u64;
    for line in reader.lines() {
        let line = line.map_err(|e| io_err(source, e))?;
        total += 1;
        let mut fields = line.split('\t');
        let (a, _, b) = match (fields.next(), fields.next(), fields.next(), fields.next()) {
            (Some(a), Some(t), Some(b), None) => (a, t, b),
            _ => {
                skipped += 1;
                continue;
            }
        };
        let (a_id, b_id) = match (entities.id(a), entities.id(b)) {
            (Some(x), Some(y)) => (x, y),
            _ => {
                skipped += 1;
                continue;
            }
        };
        if a_id == b_id {
            skipped += 1;
            continue;
        }
        let key = (a_id.min(b_id), a_id.max(b_id));
        *counts.entry(key).or_insert(0) += 1;
    }
    let mut records: Vec<CooccurrenceRecord> = counts
        .into_iter()
        .map(|((a, b), count)| CooccurrenceRecord {
            a: EntityId(a),
            b: EntityId(b),
            count: if multiplicity { count } else { 1 },
        })
        .collect();
    records.sort_unstable_by_key(|r| (r.a, r.b));
    Ok(CooccurrenceStats {
        records,
        skipped_lines: skipped,
        total_lines: total,
    })
}

/// [`extract_cooccurrences`] over a file on disk.
pub fn extract_cooccurrences_from_path(
    path: &Path,
    entities: &Vocab,
    multiplicity: bool,
) -> Result<CooccurrenceStats, DataError> {
    let display = path.display().to_string();
    let file = File::open(path).map_err(|e| io_err(&display, e))?;
    extract_cooccurrences(BufReader::new(file), &display, entities, multiplicity)
}

// ---------------------------------------------------------------------------
// Dataset cache (self-describing text format, version-tagged)
// ---------------------------------------------------------------------------

const CACHE_MAGIC: &str = "kge.dataset";
const CACHE_VERSION: u32 = 1;

/// Write a dataset cache file. Categories and the known-triple index are
/// derived data and are rebuilt on load.
pub fn save_dataset(data: &Dataset, path: &Path) -> Result<(), DataError> {
    let display = path.display().to_string();
    let file = File::create(path).map_err(|e| io_err(&display, e))?;
    let mut w = BufWriter::new(file);
    let mut write = |s: String| w.write_all(s.as_bytes()).map_err(|e| io_err(&display, e));
    write(format!("{} {}\n", CACHE_MAGIC, CACHE_VERSION))?;
    write(format!("entities {}\n", data.entities.len()))?;
    for name in data.entities.names() {
        write(format!("{}\n", name))?;
    }
    write(format!("relations {}\n", data.relations.len()))?;
    for name in data.relations.names() {
        write(format!("{}\n", name))?;
    }
    for (label, split) in [
        ("train", &data.train),
        ("valid", &data.valid),
        ("test", &data.test),
    ] {
        write(format!("{} {}\n", label, split.len()))?;
        for t in split.iter() {
            write(format!("{}\t{}\t{}\n", t.subject.0, t.relation.0, t.object.0))?;
        }
    }
    w.flush().map_err(|e| io_err(&display, e))
}

/// Load a dataset cache written by [`save_dataset`].
pub fn load_dataset(path: &Path) -> Result<Dataset, DataError> {
    let display = path.display().to_string();
    let file = File::open(path).map_err(|e| io_err(&display, e))?;
    let mut lines = BufReader::new(file).lines();
    let cache_err = |reason: &str| DataError::Cache {
        path: display.clone(),
        reason: reason.to_string(),
    };
    let next_line = |lines: &mut std::io::Lines<BufReader<File>>| -> Result<String, DataError> {
        match lines.next() {
            Some(Ok(l)) => Ok(l),
            Some(Err(e)) => Err(io_err(&display, e)),
            None => Err(DataError::Cache {
                path: display.clone(),
                reason: "unexpected end of file".to_string(),
            }),
        }
    };

    let header = next_line(&mut lines)?;
    let mut parts = header.split(' ');
    if parts.next() != Some(CACHE_MAGIC) {
        return Err(cache_err("missing magic header"));
    }
    let version: u32 = parts
        .next()
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| cache_err("missing version field"))?;
    if version != CACHE_VERSION {
        return Err(DataError::CacheVersion {
            found: version,
            expected: CACHE_VERSION,
        });
    }

    let read_section = |lines: &mut std::io::Lines<BufReader<File>>,
                            expected: &str|
     -> Result<usize, DataError> {
        let line = next_line(lines)?;
        let mut parts = line.split(' ');
        if parts.next() != Some(expected) {
            return Err(DataError::Cache {
                path: display.clone(),
                reason: format!("expected section {:?}, got {:?}", expected, line),
            });
        }
        parts
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| DataError::Cache {
                path: display.clone(),
                reason: format!("bad count in section {:?}", expected),
            })
    };

    let n = read_section(&mut lines, "entities")?;
    let mut entities = Vocab::new();
    for _ in 0..n {
        entities.intern(&next_line(&mut lines)?);
    }
    if entities.len() != n {
        return Err(cache_err("duplicate entity names"));
    }
    let m = read_section(&mut lines, "relations")?;
    let mut relations = Vocab::new();
    for _ in 0..m {
        relations.intern(&next_line(&mut lines)?);
    }
    if relations.len() != m {
        return Err(cache_err("duplicate relation names"));
    }

    let read_split = |lines: &mut std::io::Lines<BufReader<File>>,
                          label: &str|
     -> Result<Vec<Triple>, DataError> {
        let count = read_section(lines, label)?;
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let line = next_line(lines)?;
            let ids: Vec<u32> = line
                .split('\t')
                .map(|f| f.parse::<u32>())
                .collect::<Result<_, _>>()
                .map_err(|_| DataError::Cache {
                    path: display.clone(),
                    reason: format!("bad triple line {:?}", line),
                })?;
            if ids.len() != 3 || ids[0] as usize >= n || ids[2] as usize >= n || ids[1] as usize >= m
            {
                return Err(DataError::Cache {
                    path: display.clone(),
                    reason: format!("triple out of range: {:?}", line),
                });
            }
            out.push(Triple::new(ids[0], ids[1], ids[2]));
        }
        Ok(out)
    };

    let train = read_split(&mut lines, "train")?;
    let valid = read_split(&mut lines, "valid")?;
    let test = read_split(&mut lines, "test")?;
    Dataset::build(entities, relations, train, valid, test)
}
