//! The cascade engine.
//!
//! At build time the cheapest tier embeds the whole collection. A query
//! ranks all documents with that level, then for each later level `j`
//! takes the current top `m_j`, fills missing level-`j` embeddings from
//! tier `j` (once per document for the engine's lifetime) and reranks the
//! prefix with tier `j`'s text embedding.
//!
//! Every image encoding is recorded in a [`CostLedger`], so the realized
//! lifetime cost can be checked against the closed form in
//! [`crate::cost::lifetime_cost`].
//!
//! A persistent engine keeps its state in a directory:
//!
//! ```text
//! manifest.json   store manifest
//! level0.csc      full level-0 matrix
//! level{j}.csl    append log of the level-j cache, j = 1..=r
//! ledger.json     ledger snapshot
//! ```

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use num_bigint::BigInt;
use num_rational::BigRational;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::{self, CostParams};
use crate::error::{Error, Result};
use crate::rank::{self, RankedList};
use crate::store::{
    self, check_unit_vector, fingerprint, CacheLog, EmbeddingMatrix, LevelEntry, LevelKind,
    SparseLevelCache, StoreManifest,
};
use crate::tiers::Tier;
use crate::{CaptionKey, DocId};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const LEDGER_FILE: &str = "ledger.json";
const LEVEL0_FILE: &str = "level0.csc";

type LevelVectors = HashMap<DocId, Arc<[f32]>>;

fn cache_log_file(level: usize) -> String {
    format!("level{level}.csl")
}

/// Tiers `[I_s, I_1, …, I_r]` with candidate counts `[m_1, …, m_r]`.
#[derive(Debug, Clone)]
pub struct CascadeConfig {
    pub tiers: Vec<Arc<dyn Tier>>,
    pub m: Vec<usize>,
    /// Assumed lifetime return fraction, used for the model prediction.
    pub f_assumed: f64,
    pub output_k: usize,
}

impl CascadeConfig {
    pub fn new(
        tiers: Vec<Arc<dyn Tier>>,
        m: Vec<usize>,
        f_assumed: f64,
        output_k: usize,
    ) -> Result<Self> {
        let config = Self {
            tiers,
            m,
            f_assumed,
            output_k,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.tiers.is_empty() {
            return Err(Error::config("a cascade needs at least one tier"));
        }
        if self.m.len() != self.r() {
            return Err(Error::config(format!(
                "{} tiers need {} candidate counts, got {}",
                self.tiers.len(),
                self.r(),
                self.m.len()
            )));
        }
        if !self.m.is_empty() {
            cost::check_decreasing(&self.m)?;
        }
        if !(self.f_assumed > 0.0 && self.f_assumed <= 1.0) {
            return Err(Error::config(format!(
                "f_assumed {} outside (0, 1]",
                self.f_assumed
            )));
        }
        if self.output_k == 0 {
            return Err(Error::config("output_k must be positive"));
        }
        if let Some(&m_r) = self.m.last() {
            if self.output_k > m_r {
                return Err(Error::config(format!(
                    "output_k {} exceeds last candidate count {m_r}",
                    self.output_k
                )));
            }
        }
        let costs = self.costs();
        if costs[0] <= 0.0 || !costs.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::config(format!(
                "tier costs {costs:?} must be positive and strictly increasing"
            )));
        }
        Ok(())
    }

    /// Number of runtime levels.
    pub fn r(&self) -> usize {
        self.tiers.len() - 1
    }

    pub fn costs(&self) -> Vec<f64> {
        self.tiers.iter().map(|t| t.cost()).collect()
    }

    /// Size of the first prefix taken from the level-0 ranking.
    fn first_prefix(&self) -> usize {
        self.m.first().copied().unwrap_or(self.output_k)
    }
}

/// Set of collection positions, stored as a bitmap.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TouchedSetRepr", into = "TouchedSetRepr")]
pub struct TouchedSet {
    universe: usize,
    words: Vec<u64>,
    count: usize,
}

#[derive(Serialize, Deserialize)]
struct TouchedSetRepr {
    count: usize,
    universe: usize,
    /// Little-endian bytes, bit `i` = position `i`.
    bitmap: String,
}

impl TouchedSet {
    pub fn new(universe: usize) -> Self {
        Self {
            universe,
            words: vec![0; universe.div_ceil(64)],
            count: 0,
        }
    }

    pub fn insert(&mut self, pos: usize) -> bool {
        assert!(pos < self.universe, "position {pos} outside collection");
        let (w, b) = (pos / 64, pos % 64);
        let fresh = self.words[w] & (1 << b) == 0;
        if fresh {
            self.words[w] |= 1 << b;
            self.count += 1;
        }
        fresh
    }

    pub fn contains(&self, pos: usize) -> bool {
        pos < self.universe && self.words[pos / 64] & (1 << (pos % 64)) != 0
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn positions(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.universe).filter(|&p| self.contains(p))
    }
}

impl From<TouchedSet> for TouchedSetRepr {
    fn from(set: TouchedSet) -> Self {
        let bytes: Vec<u8> = set
            .words
            .iter()
            .flat_map(|w| w.to_le_bytes())
            .take(set.universe.div_ceil(8))
            .collect();
        Self {
            count: set.count,
            universe: set.universe,
            bitmap: hex::encode(bytes),
        }
    }
}

impl TryFrom<TouchedSetRepr> for TouchedSet {
    type Error = String;

    fn try_from(repr: TouchedSetRepr) -> std::result::Result<Self, String> {
        let bytes = hex::decode(&repr.bitmap).map_err(|e| e.to_string())?;
        if bytes.len() != repr.universe.div_ceil(8) {
            return Err(format!(
                "bitmap has {} bytes for {} positions",
                bytes.len(),
                repr.universe
            ));
        }
        let mut set = TouchedSet::new(repr.universe);
        for (i, byte) in bytes.iter().enumerate() {
            for bit in 0..8 {
                if byte & (1 << bit) != 0 {
                    let pos = i * 8 + bit;
                    if pos >= repr.universe {
                        return Err(format!("bit {pos} set beyond universe"));
                    }
                    set.insert(pos);
                }
            }
        }
        if set.count != repr.count {
            return Err(format!(
                "bitmap holds {} positions, count says {}",
                set.count, repr.count
            ));
        }
        Ok(set)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelLedger {
    pub level_id: u16,
    /// Image encodings charged at this level.
    pub invocations: u64,
    /// Documents ever reranked at this level.
    pub touched: TouchedSet,
}

/// Serializable state of a [`CostLedger`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerSnapshot {
    pub n: usize,
    pub q: u64,
    /// Level-0 encodings performed at build time.
    pub build_encodings: u64,
    /// Text encodings; tracked but not part of the lifetime image cost.
    pub text_encodings: u64,
    pub levels: Vec<LevelLedger>,
    /// Documents ever pushed into a query's candidate prefix.
    pub touched_union: TouchedSet,
}

impl LedgerSnapshot {
    fn new(n: usize, runtime_levels: usize) -> Self {
        Self {
            n,
            q: 0,
            build_encodings: 0,
            text_encodings: 0,
            levels: (1..=runtime_levels)
                .map(|j| LevelLedger {
                    level_id: j as u16,
                    invocations: 0,
                    touched: TouchedSet::new(n),
                })
                .collect(),
            touched_union: TouchedSet::new(n),
        }
    }

    /// `n·t_s + Σ_j invocations_j·t_j` in exact arithmetic.
    pub fn total_cost_exact(&self, costs: &[f64]) -> BigRational {
        let build = BigRational::from_integer(BigInt::from(self.build_encodings)) * cost::exact(costs[0]);
        self.levels.iter().zip(&costs[1..]).fold(build, |acc, (level, &t)| {
            acc + BigRational::from_integer(BigInt::from(level.invocations)) * cost::exact(t)
        })
    }
}

/// Running record of encoder invocations and touched documents. Safe to
/// update from concurrent queries.
#[derive(Debug)]
pub struct CostLedger {
    state: Mutex<LedgerSnapshot>,
}

impl CostLedger {
    pub fn new(n: usize, runtime_levels: usize) -> Self {
        Self {
            state: Mutex::new(LedgerSnapshot::new(n, runtime_levels)),
        }
    }

    pub fn from_snapshot(snapshot: LedgerSnapshot) -> Self {
        Self {
            state: Mutex::new(snapshot),
        }
    }

    pub fn snapshot(&self) -> LedgerSnapshot {
        self.state.lock().unwrap().clone()
    }

    pub fn n(&self) -> usize {
        self.state.lock().unwrap().n
    }

    pub fn q(&self) -> u64 {
        self.state.lock().unwrap().q
    }

    pub fn touched_union_len(&self) -> usize {
        self.state.lock().unwrap().touched_union.len()
    }

    /// Invocations charged at runtime level `level` (1-based).
    pub fn invocations(&self, level: usize) -> u64 {
        self.state.lock().unwrap().levels[level - 1].invocations
    }

    pub fn touched_len(&self, level: usize) -> usize {
        self.state.lock().unwrap().levels[level - 1].touched.len()
    }

    fn charge_build(&self, n: u64) {
        self.state.lock().unwrap().build_encodings += n;
    }

    fn record_level(&self, level: usize, positions: &[usize], new_encodings: u64) {
        let mut state = self.state.lock().unwrap();
        let entry = &mut state.levels[level - 1];
        entry.invocations += new_encodings;
        for &p in positions {
            entry.touched.insert(p);
        }
    }

    fn finish_query(&self, positions: &[usize], text_encodings: u64) {
        let mut state = self.state.lock().unwrap();
        state.q += 1;
        state.text_encodings += text_encodings;
        for &p in positions {
            state.touched_union.insert(p);
        }
    }
}

/// Whether a query may fill caches and charge the ledger.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueryMode {
    Record,
    /// Measurement only: cache misses are encoded on the fly and discarded,
    /// nothing is charged.
    ReadOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelCharge {
    pub level_id: u16,
    pub new_encodings: u64,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResult {
    pub results: RankedList,
    /// One entry per runtime level.
    pub cost_charged: Vec<LevelCharge>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    pub level_id: u16,
    pub invocations: u64,
    pub touched: usize,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifetimeReport {
    pub q: u64,
    pub n: usize,
    pub build_cost: f64,
    pub levels: Vec<LevelReport>,
    pub touched_union: usize,
    pub realized_f: f64,
    pub f_assumed: f64,
    /// `n·t_s + Σ_j invocations_j·t_j`.
    pub total_cost: f64,
    /// `n·t_s + f_assumed·n·Σ_j t_j`.
    pub predicted_cost: f64,
    pub text_encodings: u64,
}

#[derive(Debug)]
struct Persistence {
    dir: PathBuf,
    logs: Vec<Mutex<CacheLog>>,
}

/// A built cascade: level-0 matrix, lazily filled caches and a ledger.
#[derive(Debug)]
pub struct Cascade {
    config: CascadeConfig,
    level0: Arc<EmbeddingMatrix>,
    caches: Vec<SparseLevelCache>,
    ledger: CostLedger,
    persistence: Option<Persistence>,
}

fn encode_collection(tier: &dyn Tier, collection: &[DocId]) -> Result<EmbeddingMatrix> {
    let dim = tier.image_dim();
    let rows: Vec<Vec<f32>> = collection
        .par_iter()
        .map(|&id| {
            let v = tier.encode_image(id).map_err(|e| Error::Encode {
                level: 0,
                id,
                source: Box::new(e),
            })?;
            Ok(v)
        })
        .collect::<Result<_>>()?;
    let mut data = Vec::with_capacity(collection.len() * dim);
    for (row, v) in rows.iter().enumerate() {
        check_unit_vector(v, dim, row).map_err(|e| Error::Encode {
            level: 0,
            id: collection[row],
            source: Box::new(e),
        })?;
        data.extend_from_slice(v);
    }
    EmbeddingMatrix::new(0, dim, collection.to_vec(), data)
}

impl Cascade {
    /// Encodes `collection` with tier 0 and returns an in-memory engine.
    pub fn build(collection: &[DocId], config: CascadeConfig) -> Result<Self> {
        config.validate()?;
        let level0 = encode_collection(config.tiers[0].as_ref(), collection)?;
        let ledger = CostLedger::new(level0.len(), config.r());
        ledger.charge_build(level0.len() as u64);
        let caches = Self::empty_caches(&config);
        Ok(Self {
            config,
            level0: Arc::new(level0),
            caches,
            ledger,
            persistence: None,
        })
    }

    /// Like [`Cascade::build`], persisting the state under `dir`. Existing
    /// state files in `dir` are overwritten.
    pub fn build_persistent(
        collection: &[DocId],
        config: CascadeConfig,
        dir: impl AsRef<Path>,
    ) -> Result<Self> {
        let dir = dir.as_ref();
        let mut engine = Self::build(collection, config)?;
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        store::write_matrix(&engine.level0, dir.join(LEVEL0_FILE))?;
        let mut levels = vec![LevelEntry {
            level_id: 0,
            kind: LevelKind::Full,
            dim: engine.level0.dim(),
            path: LEVEL0_FILE.into(),
        }];
        let mut logs = Vec::with_capacity(engine.config.r());
        for (j, cache) in engine.caches.iter().enumerate() {
            let name = cache_log_file(j + 1);
            logs.push(Mutex::new(CacheLog::create(
                dir.join(&name),
                cache.level_id(),
                cache.dim(),
            )?));
            levels.push(LevelEntry {
                level_id: cache.level_id(),
                kind: LevelKind::Sparse,
                dim: cache.dim(),
                path: name.into(),
            });
        }
        StoreManifest {
            n: engine.level0.len() as u64,
            levels,
            fingerprint: fingerprint(engine.level0.doc_ids()),
        }
        .write(dir.join(MANIFEST_FILE))?;
        engine.persistence = Some(Persistence {
            dir: dir.to_path_buf(),
            logs,
        });
        engine.save_ledger()?;
        Ok(engine)
    }

    /// Reopens a persisted engine, replaying every cache log.
    pub fn open(config: CascadeConfig, dir: impl AsRef<Path>) -> Result<Self> {
        config.validate()?;
        let dir = dir.as_ref();
        let manifest = StoreManifest::read(dir.join(MANIFEST_FILE))?;
        if manifest.levels.len() != config.tiers.len() {
            return Err(Error::config(format!(
                "state has {} levels, config has {} tiers",
                manifest.levels.len(),
                config.tiers.len()
            )));
        }
        for (entry, tier) in manifest.levels.iter().zip(&config.tiers) {
            if entry.dim != tier.image_dim() {
                return Err(Error::config(format!(
                    "level {} stored with dim {}, tier has dim {}",
                    entry.level_id,
                    entry.dim,
                    tier.image_dim()
                )));
            }
        }

        let level0 = store::read_matrix(dir.join(&manifest.levels[0].path))?;
        if fingerprint(level0.doc_ids()) != manifest.fingerprint
            || level0.len() as u64 != manifest.n
        {
            return Err(Error::Inconsistent(
                "level-0 matrix does not match the manifest's collection".into(),
            ));
        }

        let mut caches = Vec::with_capacity(config.r());
        let mut logs = Vec::with_capacity(config.r());
        for (j, entry) in manifest.levels.iter().enumerate().skip(1) {
            let path = dir.join(&entry.path);
            let cache = store::replay_cache_log(&path)?;
            if usize::from(cache.level_id()) != j || cache.dim() != entry.dim {
                return Err(Error::Inconsistent(format!(
                    "cache log {} does not belong to level {j}",
                    path.display()
                )));
            }
            for id in cache.ids() {
                if level0.position(id).is_none() {
                    return Err(Error::Inconsistent(format!(
                        "cache log {} holds id {id} outside the collection",
                        path.display()
                    )));
                }
            }
            caches.push(cache);
            logs.push(Mutex::new(CacheLog::open(&path)?));
        }

        let ledger_path = dir.join(LEDGER_FILE);
        let text = fs::read_to_string(&ledger_path).map_err(|e| Error::io(&ledger_path, e))?;
        let snapshot: LedgerSnapshot =
            serde_json::from_str(&text).map_err(|e| Error::parse("ledger", e))?;
        if snapshot.n != level0.len() || snapshot.levels.len() != config.r() {
            return Err(Error::Inconsistent("ledger shape does not match state".into()));
        }
        for (level, cache) in snapshot.levels.iter().zip(&caches) {
            let stored: Vec<usize> = cache
                .ids()
                .into_iter()
                .map(|id| level0.position(id).unwrap())
                .collect();
            let consistent = level.invocations == cache.len() as u64
                && level.touched.len() == cache.len()
                && stored.iter().all(|&p| level.touched.contains(p));
            if !consistent {
                return Err(Error::Inconsistent(format!(
                    "ledger disagrees with the level-{} cache log",
                    level.level_id
                )));
            }
        }

        Ok(Self {
            config,
            level0: Arc::new(level0),
            caches,
            ledger: CostLedger::from_snapshot(snapshot),
            persistence: Some(Persistence {
                dir: dir.to_path_buf(),
                logs,
            }),
        })
    }

    fn empty_caches(config: &CascadeConfig) -> Vec<SparseLevelCache> {
        config.tiers[1..]
            .iter()
            .enumerate()
            .map(|(j, tier)| SparseLevelCache::new((j + 1) as u16, tier.image_dim()))
            .collect()
    }

    pub fn config(&self) -> &CascadeConfig {
        &self.config
    }

    pub fn collection(&self) -> &[DocId] {
        self.level0.doc_ids()
    }

    pub fn n(&self) -> usize {
        self.level0.len()
    }

    pub fn level0(&self) -> &EmbeddingMatrix {
        &self.level0
    }

    /// Cache of runtime level `level` (1-based).
    pub fn cache(&self, level: usize) -> &SparseLevelCache {
        &self.caches[level - 1]
    }

    pub fn ledger(&self) -> &CostLedger {
        &self.ledger
    }

    pub fn state_dir(&self) -> Option<&Path> {
        self.persistence.as_ref().map(|p| p.dir.as_path())
    }

    /// Writes the ledger snapshot, if the engine is persistent.
    pub fn save_ledger(&self) -> Result<()> {
        let Some(persistence) = &self.persistence else {
            return Ok(());
        };
        let path = persistence.dir.join(LEDGER_FILE);
        let tmp = persistence.dir.join(format!("{LEDGER_FILE}.tmp"));
        let json = serde_json::to_string(&self.ledger.snapshot()).expect("ledger serializes");
        fs::write(&tmp, json).map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))
    }

    /// Runs a recorded query returning the configured `output_k` results.
    pub fn query(&self, key: CaptionKey) -> Result<QueryResult> {
        self.query_with(key, self.config.output_k, QueryMode::Record)
    }

    /// Runs a query returning `k` results; `k` may not exceed the last
    /// candidate count.
    pub fn query_with(&self, key: CaptionKey, k: usize, mode: QueryMode) -> Result<QueryResult> {
        if k == 0 {
            return Err(Error::config("k must be positive"));
        }
        if let Some(&m_r) = self.config.m.last() {
            if k > m_r {
                return Err(Error::config(format!(
                    "k = {k} exceeds last candidate count {m_r}"
                )));
            }
        }

        let r = self.config.r();
        let first_prefix = if r == 0 { k } else { self.config.first_prefix() };
        let text0 = self.config.tiers[0].encode_text(key)?;
        let mut top = rank::rank_matrix(&self.level0, &text0.vector, first_prefix)?;
        let touched: Vec<usize> = top
            .items()
            .iter()
            .map(|s| self.level0.position(s.id).expect("ranked id is in the collection"))
            .collect();

        let mut charges = Vec::with_capacity(r);
        for j in 1..=r {
            let ids = top.top_m(self.config.m[j - 1]).ids();
            let tier = self.config.tiers[j].as_ref();
            let (vectors, new_encodings) = self.fill_level(j, &ids, mode)?;
            let text = tier.encode_text(key)?;
            top = rank::rank(&ids, &vectors, &text.vector)?;
            if mode == QueryMode::Record {
                let positions: Vec<usize> = ids
                    .iter()
                    .map(|&id| self.level0.position(id).expect("prefix id is in the collection"))
                    .collect();
                self.ledger.record_level(j, &positions, new_encodings);
            }
            charges.push(LevelCharge {
                level_id: j as u16,
                new_encodings,
                cost: new_encodings as f64 * tier.cost(),
            });
        }
        top.truncate(k);

        if mode == QueryMode::Record {
            self.ledger.finish_query(&touched, (r + 1) as u64);
            self.save_ledger()?;
        }
        Ok(QueryResult {
            results: top,
            cost_charged: charges,
        })
    }

    /// Level-`level` vectors for `ids`, with the number of fresh encodings
    /// stored by this call.
    fn fill_level(
        &self,
        level: usize,
        ids: &[DocId],
        mode: QueryMode,
    ) -> Result<(LevelVectors, u64)> {
        let tier = self.config.tiers[level].as_ref();
        let cache = &self.caches[level - 1];
        let mut vectors = HashMap::with_capacity(ids.len());
        let mut new_encodings = 0;
        for &id in ids {
            let encode = || {
                tier.encode_image(id).map_err(|e| Error::Encode {
                    level: level as u16,
                    id,
                    source: Box::new(e),
                })
            };
            let v = match mode {
                QueryMode::Record => {
                    let (v, inserted) = cache.get_or_insert_with(id, encode)?;
                    if inserted {
                        new_encodings += 1;
                        if let Some(p) = &self.persistence {
                            p.logs[level - 1].lock().unwrap().append(id, &v)?;
                        }
                    }
                    v
                }
                QueryMode::ReadOnly => match cache.get(id) {
                    Some(v) => v,
                    None => {
                        let v = encode()?;
                        check_unit_vector(&v, cache.dim(), 0)?;
                        Arc::from(v)
                    }
                },
            };
            vectors.insert(id, v);
        }
        Ok((vectors, new_encodings))
    }

    /// Documents a recorded query for `key` would add to the touched union,
    /// computed without side effects.
    pub fn candidate_prefix(&self, key: CaptionKey) -> Result<Vec<DocId>> {
        let text0 = self.config.tiers[0].encode_text(key)?;
        Ok(rank::rank_matrix(&self.level0, &text0.vector, self.config.first_prefix())?.ids())
    }

    pub fn lifetime_report(&self) -> Result<LifetimeReport> {
        let snapshot = self.ledger.snapshot();
        let costs = self.config.costs();
        let n = snapshot.n;
        let levels: Vec<LevelReport> = snapshot
            .levels
            .iter()
            .zip(&costs[1..])
            .map(|(level, &t)| LevelReport {
                level_id: level.level_id,
                invocations: level.invocations,
                touched: level.touched.len(),
                cost: level.invocations as f64 * t,
            })
            .collect();
        let build_cost = snapshot.build_encodings as f64 * costs[0];
        let total_cost = build_cost + levels.iter().map(|l| l.cost).sum::<f64>();
        let predicted_cost = cost::lifetime_cost(&CostParams {
            n: n as u64,
            f: self.config.f_assumed,
            t: costs,
            m: self.config.m.clone(),
        })?;
        let realized_f = if n == 0 {
            0.0
        } else {
            cost::estimate_f(&self.ledger)?
        };
        Ok(LifetimeReport {
            q: snapshot.q,
            n,
            build_cost,
            levels,
            touched_union: snapshot.touched_union.len(),
            realized_f,
            f_assumed: self.config.f_assumed,
            total_cost,
            predicted_cost,
            text_encodings: snapshot.text_encodings,
        })
    }
}
