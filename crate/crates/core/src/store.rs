//! Embedding storage.
//!
//! Full levels are stored as dense [`EmbeddingMatrix`] files, lazily filled
//! levels as a [`SparseLevelCache`] backed by an append-only log.
//!
//! Matrix file layout (all integers little-endian):
//!
//! ```text
//! "CSC1" | version u16 | level_id u16 | dim u32 | count u64
//!        | count × u64 doc ids | count × dim f32 rows | crc32 u32
//! ```
//!
//! The CRC covers the ids and rows (everything between the header and the
//! checksum).
//!
//! Cache log layout: `"CSL1" | version u16 | level_id u16 | dim u32` followed
//! by records of `u64 id | dim × f32`.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::{DocId, NORM_TOLERANCE};

pub const MATRIX_MAGIC: [u8; 4] = *b"CSC1";
pub const CACHE_LOG_MAGIC: [u8; 4] = *b"CSL1";
pub const FORMAT_VERSION: u16 = 1;

const MATRIX_HEADER_LEN: u64 = 20;
const LOG_HEADER_LEN: u64 = 12;

/// L2 norm accumulated in double precision.
pub fn l2_norm(v: &[f32]) -> f64 {
    v.iter().map(|&x| f64::from(x) * f64::from(x)).sum::<f64>().sqrt()
}

/// Scales `v` to unit length in place and returns the original norm.
/// A zero vector is left untouched.
pub fn normalize_in_place(v: &mut [f32]) -> f64 {
    let norm = l2_norm(v);
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x = (f64::from(*x) / norm) as f32;
        }
    }
    norm
}

/// Checks that `v` has length `dim` and unit norm; `row` is used for error
/// reporting.
pub fn check_unit_vector(v: &[f32], dim: usize, row: usize) -> Result<()> {
    if v.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: v.len(),
        });
    }
    let norm = l2_norm(v);
    if !norm.is_finite() || (norm - 1.0).abs() > NORM_TOLERANCE {
        return Err(Error::UnnormalizedRow { row, norm });
    }
    Ok(())
}

fn bits_equal(a: &[f32], b: &[f32]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

/// Dense, immutable matrix of unit-norm rows keyed by document id.
#[derive(Debug, Clone)]
pub struct EmbeddingMatrix {
    level_id: u16,
    dim: usize,
    doc_ids: Vec<DocId>,
    data: Vec<f32>,
    positions: HashMap<DocId, usize>,
}

impl PartialEq for EmbeddingMatrix {
    /// Bitwise equality of the stored floats.
    fn eq(&self, other: &Self) -> bool {
        self.level_id == other.level_id
            && self.dim == other.dim
            && self.doc_ids == other.doc_ids
            && bits_equal(&self.data, &other.data)
    }
}

impl EmbeddingMatrix {
    /// Creates a matrix from row-major data, validating every invariant.
    pub fn new(level_id: u16, dim: usize, doc_ids: Vec<DocId>, data: Vec<f32>) -> Result<Self> {
        let matrix = Self::from_parts(level_id, dim, doc_ids, data)?;
        for (row, v) in matrix.data.chunks_exact(dim).enumerate() {
            check_unit_vector(v, dim, row)?;
        }
        Ok(matrix)
    }

    /// Like [`EmbeddingMatrix::new`] but rescales every row to unit length.
    /// Rows of zero norm are rejected.
    pub fn from_unnormalized(
        level_id: u16,
        dim: usize,
        doc_ids: Vec<DocId>,
        mut data: Vec<f32>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::config("matrix dim must be positive"));
        }
        for (row, v) in data.chunks_exact_mut(dim).enumerate() {
            let norm = normalize_in_place(v);
            if norm == 0.0 || !norm.is_finite() {
                return Err(Error::UnnormalizedRow { row, norm });
            }
        }
        Self::new(level_id, dim, doc_ids, data)
    }

    fn from_parts(level_id: u16, dim: usize, doc_ids: Vec<DocId>, data: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::config("matrix dim must be positive"));
        }
        if data.len() != doc_ids.len() * dim {
            return Err(Error::DimensionMismatch {
                expected: doc_ids.len() * dim,
                actual: data.len(),
            });
        }
        let mut positions = HashMap::with_capacity(doc_ids.len());
        for (i, &id) in doc_ids.iter().enumerate() {
            if positions.insert(id, i).is_some() {
                return Err(Error::DuplicateId(id));
            }
        }
        Ok(Self {
            level_id,
            dim,
            doc_ids,
            data,
            positions,
        })
    }

    pub fn level_id(&self) -> u16 {
        self.level_id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.doc_ids.is_empty()
    }

    pub fn doc_ids(&self) -> &[DocId] {
        &self.doc_ids
    }

    /// Row-major backing data.
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, index: usize) -> &[f32] {
        &self.data[index * self.dim..(index + 1) * self.dim]
    }

    pub fn position(&self, id: DocId) -> Option<usize> {
        self.positions.get(&id).copied()
    }

    pub fn get(&self, id: DocId) -> Option<&[f32]> {
        self.position(id).map(|i| self.row(i))
    }

    pub fn rows(&self) -> impl Iterator<Item = (DocId, &[f32])> {
        self.doc_ids.iter().copied().zip(self.data.chunks_exact(self.dim))
    }

    /// Serializes into the matrix file format.
    pub fn to_bytes(&self) -> Vec<u8> {
        let count = self.len();
        let mut out =
            Vec::with_capacity(MATRIX_HEADER_LEN as usize + count * (8 + 4 * self.dim) + 4);
        out.extend_from_slice(&MATRIX_MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&self.level_id.to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&(count as u64).to_le_bytes());
        for id in &self.doc_ids {
            out.extend_from_slice(&id.to_le_bytes());
        }
        for x in &self.data {
            out.extend_from_slice(&x.to_le_bytes());
        }
        let crc = crc32fast::hash(&out[MATRIX_HEADER_LEN as usize..]);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    /// Parses the matrix file format, validating length, checksum and row
    /// invariants.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let actual = bytes.len() as u64;
        if actual < 4 {
            return Err(Error::Truncated {
                expected: MATRIX_HEADER_LEN,
                actual,
            });
        }
        check_magic(&bytes[..4], MATRIX_MAGIC)?;
        if actual < MATRIX_HEADER_LEN {
            return Err(Error::Truncated {
                expected: MATRIX_HEADER_LEN,
                actual,
            });
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != FORMAT_VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let level_id = u16::from_le_bytes([bytes[6], bytes[7]]);
        let dim = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let count = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
        if dim == 0 {
            return Err(Error::parse("matrix header", "dim must be positive"));
        }

        let expected = u128::from(MATRIX_HEADER_LEN)
            + u128::from(count) * (8 + 4 * dim as u128)
            + 4;
        let expected = u64::try_from(expected).unwrap_or(u64::MAX);
        if actual < expected {
            return Err(Error::Truncated { expected, actual });
        }
        if actual > expected {
            return Err(Error::TrailingBytes { expected, actual });
        }

        let payload = &bytes[MATRIX_HEADER_LEN as usize..(expected - 4) as usize];
        let stored = u32::from_le_bytes(bytes[(expected - 4) as usize..].try_into().unwrap());
        let computed = crc32fast::hash(payload);
        if stored != computed {
            return Err(Error::ChecksumMismatch { stored, computed });
        }

        let count = count as usize;
        let (id_bytes, row_bytes) = payload.split_at(count * 8);
        let doc_ids = id_bytes
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let data = row_bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::new(level_id, dim, doc_ids, data)
    }
}

fn check_magic(found: &[u8], expected: [u8; 4]) -> Result<()> {
    let found: [u8; 4] = found.try_into().unwrap();
    if found != expected {
        return Err(Error::BadMagic { expected, found });
    }
    Ok(())
}

pub fn write_matrix(matrix: &EmbeddingMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, matrix.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<EmbeddingMatrix> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    EmbeddingMatrix::from_bytes(&bytes)
}

/// Lazily filled `doc id → vector` map for one cascade level.
///
/// Safe for concurrent use. `get_or_insert_with` is atomic per id: two
/// callers racing on the same missing id may both run their producer, but
/// only the first stored value is kept and both observe it.
#[derive(Debug)]
pub struct SparseLevelCache {
    level_id: u16,
    dim: usize,
    entries: RwLock<HashMap<DocId, Arc<[f32]>>>,
}

impl SparseLevelCache {
    pub fn new(level_id: u16, dim: usize) -> Self {
        Self {
            level_id,
            dim,
            entries: RwLock::new(HashMap::new()),
        }
    }

    pub fn level_id(&self) -> u16 {
        self.level_id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, id: DocId) -> bool {
        self.entries.read().unwrap().contains_key(&id)
    }

    pub fn get(&self, id: DocId) -> Option<Arc<[f32]>> {
        self.entries.read().unwrap().get(&id).cloned()
    }

    /// Stored ids in ascending order.
    pub fn ids(&self) -> Vec<DocId> {
        let mut ids: Vec<_> = self.entries.read().unwrap().keys().copied().collect();
        ids.sort_unstable();
        ids
    }

    /// Ordered copy of all entries.
    pub fn snapshot(&self) -> BTreeMap<DocId, Vec<f32>> {
        self.entries
            .read()
            .unwrap()
            .iter()
            .map(|(&id, v)| (id, v.to_vec()))
            .collect()
    }

    /// Inserts `vector` for `id`. Returns `false` when a bitwise identical
    /// vector is already stored and fails when a different one is.
    pub fn insert(&self, id: DocId, vector: Vec<f32>) -> Result<bool> {
        check_unit_vector(&vector, self.dim, 0)?;
        let mut entries = self.entries.write().unwrap();
        match entries.get(&id) {
            Some(existing) if bits_equal(existing, &vector) => Ok(false),
            Some(_) => Err(Error::ConflictingEntry(id)),
            None => {
                entries.insert(id, vector.into());
                Ok(true)
            }
        }
    }

    /// Returns the stored vector for `id`, running `producer` only on a miss.
    /// The flag is `true` iff this call's vector is the one that got stored.
    pub fn get_or_insert_with<F>(&self, id: DocId, producer: F) -> Result<(Arc<[f32]>, bool)>
    where
        F: FnOnce() -> Result<Vec<f32>>,
    {
        if let Some(v) = self.get(id) {
            return Ok((v, false));
        }
        let vector = producer()?;
        check_unit_vector(&vector, self.dim, 0)?;
        let mut entries = self.entries.write().unwrap();
        if let Some(existing) = entries.get(&id) {
            return Ok((existing.clone(), false));
        }
        let stored: Arc<[f32]> = vector.into();
        entries.insert(id, stored.clone());
        Ok((stored, true))
    }
}

/// Append handle for a cache log file.
#[derive(Debug)]
pub struct CacheLog {
    path: PathBuf,
    level_id: u16,
    dim: usize,
    out: BufWriter<File>,
}

impl CacheLog {
    /// Creates (or truncates) a log and writes its header.
    pub fn create(path: impl AsRef<Path>, level_id: u16, dim: usize) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut out = BufWriter::new(file);
        let mut header = Vec::with_capacity(LOG_HEADER_LEN as usize);
        header.extend_from_slice(&CACHE_LOG_MAGIC);
        header.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        header.extend_from_slice(&level_id.to_le_bytes());
        header.extend_from_slice(&(dim as u32).to_le_bytes());
        out.write_all(&header)
            .and_then(|_| out.flush())
            .map_err(|e| Error::io(&path, e))?;
        Ok(Self {
            path,
            level_id,
            dim,
            out,
        })
    }

    /// Opens an existing log for appending after validating its header.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut header = [0u8; LOG_HEADER_LEN as usize];
        let mut file = File::open(&path).map_err(|e| Error::io(&path, e))?;
        read_header(&mut file, &mut header, &path)?;
        let (level_id, dim) = parse_log_header(&header)?;
        let file = OpenOptions::new()
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        Ok(Self {
            path,
            level_id,
            dim,
            out: BufWriter::new(file),
        })
    }

    pub fn level_id(&self) -> u16 {
        self.level_id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Appends one record and flushes it to the file.
    pub fn append(&mut self, id: DocId, vector: &[f32]) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: vector.len(),
            });
        }
        let mut record = Vec::with_capacity(8 + 4 * self.dim);
        record.extend_from_slice(&id.to_le_bytes());
        for x in vector {
            record.extend_from_slice(&x.to_le_bytes());
        }
        self.out
            .write_all(&record)
            .and_then(|_| self.out.flush())
            .map_err(|e| Error::io(&self.path, e))
    }
}

fn read_header(file: &mut File, header: &mut [u8], path: &Path) -> Result<()> {
    let mut filled = 0;
    while filled < header.len() {
        match file.read(&mut header[filled..]) {
            Ok(0) => break,
            Ok(k) => filled += k,
            Err(e) => return Err(Error::io(path, e)),
        }
    }
    if filled >= 4 {
        check_magic(&header[..4], CACHE_LOG_MAGIC)?;
    }
    if filled < header.len() {
        return Err(Error::Truncated {
            expected: header.len() as u64,
            actual: filled as u64,
        });
    }
    Ok(())
}

fn parse_log_header(header: &[u8]) -> Result<(u16, usize)> {
    check_magic(&header[..4], CACHE_LOG_MAGIC)?;
    let version = u16::from_le_bytes([header[4], header[5]]);
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let level_id = u16::from_le_bytes([header[6], header[7]]);
    let dim = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    if dim == 0 {
        return Err(Error::parse("cache log header", "dim must be positive"));
    }
    Ok((level_id, dim))
}

/// Appends a single entry to the log at `path`.
pub fn append_cache_log(path: impl AsRef<Path>, id: DocId, vector: &[f32]) -> Result<()> {
    CacheLog::open(path)?.append(id, vector)
}

/// Rebuilds a cache from its log. Repeated identical records are tolerated;
/// a repeated id with a different vector is reported as corruption.
pub fn replay_cache_log(path: impl AsRef<Path>) -> Result<SparseLevelCache> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_cache_log(&bytes)
}

pub fn parse_cache_log(bytes: &[u8]) -> Result<SparseLevelCache> {
    let actual = bytes.len() as u64;
    if actual >= 4 {
        check_magic(&bytes[..4], CACHE_LOG_MAGIC)?;
    }
    if actual < LOG_HEADER_LEN {
        return Err(Error::Truncated {
            expected: LOG_HEADER_LEN,
            actual,
        });
    }
    let (level_id, dim) = parse_log_header(&bytes[..LOG_HEADER_LEN as usize])?;
    let record_len = 8 + 4 * dim;
    let body = &bytes[LOG_HEADER_LEN as usize..];
    if !body.len().is_multiple_of(record_len) {
        let records = body.len() / record_len + 1;
        return Err(Error::Truncated {
            expected: LOG_HEADER_LEN + (records * record_len) as u64,
            actual,
        });
    }
    let cache = SparseLevelCache::new(level_id, dim);
    for record in body.chunks_exact(record_len) {
        let id = u64::from_le_bytes(record[..8].try_into().unwrap());
        let vector = record[8..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        cache.insert(id, vector)?;
    }
    Ok(cache)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LevelKind {
    Full,
    Sparse,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelEntry {
    pub level_id: u16,
    pub kind: LevelKind,
    pub dim: usize,
    /// Relative to the directory holding the manifest.
    pub path: PathBuf,
}

/// Index of the files making up an engine's embedding state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreManifest {
    pub n: u64,
    pub levels: Vec<LevelEntry>,
    /// Hex SHA-256 of the collection's doc id list.
    pub fingerprint: String,
}

impl StoreManifest {
    pub fn validate(&self) -> Result<()> {
        if !self.levels.windows(2).all(|w| w[0].level_id < w[1].level_id) {
            return Err(Error::Inconsistent(
                "manifest level ids are not strictly increasing".into(),
            ));
        }
        match self.levels.first() {
            Some(l) if l.level_id == 0 && l.kind == LevelKind::Full => {}
            _ => {
                return Err(Error::Inconsistent(
                    "manifest lacks a full level 0".into(),
                ))
            }
        }
        let mut seen = HashSet::new();
        for level in &self.levels {
            if !seen.insert(&level.path) {
                return Err(Error::Inconsistent(format!(
                    "manifest reuses path {}",
                    level.path.display()
                )));
            }
        }
        Ok(())
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        self.validate()?;
        let path = path.as_ref();
        let json = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let manifest: Self =
            serde_json::from_str(&text).map_err(|e| Error::parse("manifest", e))?;
        manifest.validate()?;
        Ok(manifest)
    }
}

/// Hex SHA-256 over the little-endian encoding of `ids`, in order.
pub fn fingerprint(ids: &[DocId]) -> String {
    let mut hasher = Sha256::new();
    for id in ids {
        hasher.update(id.to_le_bytes());
    }
    hex::encode(hasher.finalize())
}
