//! Recall@k evaluation and workload generation.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Zipf};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost;
use crate::engine::{Cascade, CascadeConfig, LifetimeReport, QueryMode};
use crate::error::{Error, Result};
use crate::rank::RankedList;
use crate::{CaptionKey, DocId};

/// Caption → correct document pairs over a known collection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruthPairs {
    pairs: Vec<(CaptionKey, DocId)>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TsvRow {
    caption_key: CaptionKey,
    doc_id: DocId,
}

impl GroundTruthPairs {
    pub fn new(pairs: Vec<(CaptionKey, DocId)>, collection: &[DocId]) -> Result<Self> {
        let docs: HashSet<DocId> = collection.iter().copied().collect();
        let mut captions = HashSet::with_capacity(pairs.len());
        for &(caption, doc) in &pairs {
            if !captions.insert(caption) {
                return Err(Error::Inconsistent(format!("caption {caption} listed twice")));
            }
            if !docs.contains(&doc) {
                return Err(Error::Inconsistent(format!(
                    "caption {caption} points at doc {doc} outside the collection"
                )));
            }
        }
        Ok(Self { pairs })
    }

    pub fn pairs(&self) -> &[(CaptionKey, DocId)] {
        &self.pairs
    }

    pub fn captions(&self) -> impl Iterator<Item = CaptionKey> + '_ {
        self.pairs.iter().map(|p| p.0)
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Reads a `caption_key<TAB>doc_id` file with a header row.
    pub fn read_tsv(path: impl AsRef<Path>, collection: &[DocId]) -> Result<Self> {
        let path = path.as_ref();
        let mut reader = csv::ReaderBuilder::new()
            .delimiter(b'\t')
            .from_path(path)
            .map_err(|e| csv_error(path, e))?;
        let pairs = reader
            .deserialize::<TsvRow>()
            .map(|row| {
                row.map(|r| (r.caption_key, r.doc_id))
                    .map_err(|e| csv_error(path, e))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(pairs, collection)
    }

    pub fn write_tsv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut writer = csv::WriterBuilder::new()
            .delimiter(b'\t')
            .from_path(path)
            .map_err(|e| csv_error(path, e))?;
        for &(caption_key, doc_id) in &self.pairs {
            writer
                .serialize(TsvRow {
                    caption_key,
                    doc_id,
                })
                .map_err(|e| csv_error(path, e))?;
        }
        writer.flush().map_err(|e| Error::io(path, e))
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!(),
        }
    } else {
        Error::parse(format!("ground truth {}", path.display()), e)
    }
}

/// Echo of the cascade a report was produced with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub tier_dims: Vec<usize>,
    pub tier_costs: Vec<f64>,
    pub m: Vec<usize>,
    pub f_assumed: f64,
    pub output_k: usize,
}

impl From<&CascadeConfig> for ConfigEcho {
    fn from(config: &CascadeConfig) -> Self {
        Self {
            tier_dims: config.tiers.iter().map(|t| t.image_dim()).collect(),
            tier_costs: config.costs(),
            m: config.m.clone(),
            f_assumed: config.f_assumed,
            output_k: config.output_k,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecallReport {
    pub k_values: Vec<usize>,
    /// Fraction of captions whose document is within the first `k` results.
    pub recall: BTreeMap<usize, f64>,
    pub queries: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<ConfigEcho>,
}

impl RecallReport {
    pub fn at(&self, k: usize) -> Option<f64> {
        self.recall.get(&k).copied()
    }
}

fn normalize_ks(ks: &[usize]) -> Result<Vec<usize>> {
    if ks.is_empty() || ks.contains(&0) {
        return Err(Error::config(format!("invalid k list {ks:?}")));
    }
    let mut ks = ks.to_vec();
    ks.sort_unstable();
    ks.dedup();
    Ok(ks)
}

/// Recall@k for every `k` in `ks`. A result list may be shorter than `k`
/// only when it already holds the whole collection.
pub fn recall_at_k(
    results: &HashMap<CaptionKey, RankedList>,
    truth: &GroundTruthPairs,
    ks: &[usize],
    collection_size: usize,
) -> Result<RecallReport> {
    let ks = normalize_ks(ks)?;
    if truth.is_empty() {
        return Err(Error::config("no captions to evaluate"));
    }
    let mut hits = vec![0usize; ks.len()];
    for &(caption, doc) in truth.pairs() {
        let list = results.get(&caption).ok_or(Error::MissingResults(caption))?;
        if list.len() < ks[ks.len() - 1] && list.len() != collection_size {
            return Err(Error::config(format!(
                "caption {caption} has {} results, fewer than k = {}",
                list.len(),
                ks[ks.len() - 1]
            )));
        }
        if let Some(rank) = list.position(doc) {
            for (h, &k) in hits.iter_mut().zip(&ks) {
                if rank < k {
                    *h += 1;
                }
            }
        }
    }
    let total = truth.len() as f64;
    Ok(RecallReport {
        recall: ks.iter().zip(&hits).map(|(&k, &h)| (k, h as f64 / total)).collect(),
        k_values: ks,
        queries: truth.len(),
        config: None,
    })
}

/// Runs every caption through `engine` in read-only mode and scores recall.
/// The engine's caches and ledger are left untouched.
pub fn evaluate(engine: &Cascade, truth: &GroundTruthPairs, ks: &[usize]) -> Result<RecallReport> {
    let ks = normalize_ks(ks)?;
    let k = ks[ks.len() - 1];
    let results: HashMap<CaptionKey, RankedList> = truth
        .pairs()
        .par_iter()
        .map(|&(caption, _)| {
            engine
                .query_with(caption, k, QueryMode::ReadOnly)
                .map(|r| (caption, r.results))
        })
        .collect::<Result<_>>()?;
    let mut report = recall_at_k(&results, truth, &ks, engine.n())?;
    report.config = Some(ConfigEcho::from(engine.config()));
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadOptions {
    /// Total number of queries; defaults to ten per pool caption.
    pub length: Option<usize>,
    /// Zipf exponent of caption popularity within the pool.
    pub zipf_exponent: f64,
    /// Accepted relative deviation of the pilot return fraction.
    pub tolerance: f64,
}

impl Default for WorkloadOptions {
    fn default() -> Self {
        Self {
            length: None,
            zipf_exponent: 1.0,
            tolerance: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Workload {
    /// Query sequence, with repetitions.
    pub queries: Vec<CaptionKey>,
    /// Distinct captions the sequence draws from, most popular first.
    pub pool: Vec<CaptionKey>,
    /// Return fraction measured by the pilot run.
    pub pilot_f: f64,
    pub target_f: f64,
}

impl Workload {
    /// One caption key per line.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        for q in &self.queries {
            writeln!(out, "{q}").map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }
}

pub fn read_query_list(path: impl AsRef<Path>) -> Result<Vec<CaptionKey>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.parse()
                .map_err(|e| Error::parse(format!("query list {}", path.display()), e))
        })
        .collect()
}

/// Builds a seeded query sequence whose candidate prefixes cover about
/// `target_f · n` documents.
///
/// Captions are visited in a seeded random order; a caption joins the pool
/// when the pilot-measured union of candidate prefixes stays within the
/// upper tolerance, until the union reaches the target. The sequence then
/// contains every pool caption once plus Zipf-distributed repeats.
///
/// The pilot measures the workload in isolation: documents already touched
/// by earlier queries against `engine` are not accounted for.
pub fn generate_workload(
    engine: &Cascade,
    truth: &GroundTruthPairs,
    target_f: f64,
    seed: u64,
    options: &WorkloadOptions,
) -> Result<Workload> {
    if !(target_f > 0.0 && target_f <= 1.0) {
        return Err(Error::config(format!("target f {target_f} outside (0, 1]")));
    }
    let n = engine.n();
    if n == 0 || truth.is_empty() {
        return Err(Error::Infeasible("empty collection or caption set".into()));
    }
    let target = target_f * n as f64;
    let upper = target * (1.0 + options.tolerance);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<CaptionKey> = truth.captions().collect();
    order.shuffle(&mut rng);

    let mut union: HashSet<DocId> = HashSet::new();
    let mut pool = Vec::new();
    let mut smallest_prefix = usize::MAX;
    for caption in order {
        if union.len() as f64 >= target {
            break;
        }
        let prefix = engine.candidate_prefix(caption)?;
        smallest_prefix = smallest_prefix.min(prefix.len());
        let added = prefix.iter().filter(|id| !union.contains(id)).count();
        if (union.len() + added) as f64 <= upper {
            union.extend(prefix);
            pool.push(caption);
        }
    }

    let pilot_f = union.len() as f64 / n as f64;
    if pool.is_empty() {
        return Err(Error::Infeasible(format!(
            "a single query touches at least {smallest_prefix} of {n} documents, above target f = {target_f}"
        )));
    }
    if (pilot_f - target_f).abs() > options.tolerance * target_f {
        return Err(Error::Infeasible(format!(
            "pilot reached f = {pilot_f:.4}, outside ±{:.0}% of target {target_f}",
            options.tolerance * 100.0
        )));
    }

    let length = options.length.unwrap_or(10 * pool.len()).max(pool.len());
    let zipf = Zipf::new(pool.len() as f64, options.zipf_exponent)
        .map_err(|e| Error::config(format!("zipf exponent: {e}")))?;
    let mut queries = pool.clone();
    for _ in pool.len()..length {
        let rank = zipf.sample(&mut rng) as usize;
        queries.push(pool[rank.clamp(1, pool.len()) - 1]);
    }
    queries.shuffle(&mut rng);

    Ok(Workload {
        queries,
        pool,
        pilot_f,
        target_f,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub recall: RecallReport,
    pub lifetime: LifetimeReport,
    /// Uncascaded last-tier lifetime cost `n·t_r` over the model prediction.
    pub model_speedup: Option<f64>,
    /// Uncascaded last-tier lifetime cost over the ledger total.
    pub realized_speedup: Option<f64>,
    /// Per-query speedup over the two-level cascade `[I_s, I_r]`, for r ≥ 2.
    pub query_speedup: Option<f64>,
}

/// Executes `workload` (charging the ledger), then evaluates recall over all
/// captions in read-only mode.
pub fn run_experiment(
    engine: &Cascade,
    truth: &GroundTruthPairs,
    workload: &[CaptionKey],
    ks: &[usize],
) -> Result<ExperimentReport> {
    for &caption in workload {
        engine.query(caption)?;
    }
    let recall = evaluate(engine, truth, ks)?;
    let lifetime = engine.lifetime_report()?;
    let config = engine.config();
    let costs = config.costs();
    let baseline = lifetime.n as f64 * costs[costs.len() - 1];
    let ratio = |cost: f64| (cost > 0.0).then(|| baseline / cost);
    let query_speedup = if config.r() >= 2 {
        Some(cost::query_speedup(&config.m, &costs[1..])?)
    } else {
        None
    };
    Ok(ExperimentReport {
        model_speedup: ratio(lifetime.predicted_cost),
        realized_speedup: ratio(lifetime.total_cost),
        query_speedup,
        recall,
        lifetime,
    })
}

/// CSV header matching the result tables: dataset, method, R@1, R@5, R@10,
/// speedup.
pub const TABLE_HEADER: [&str; 6] = ["dataset", "method", "R@1", "R@5", "R@10", "speedup"];

/// One result-table row; recall in percent with one decimal.
pub fn table_row(dataset: &str, method: &str, recall: &RecallReport, speedup: f64) -> Result<String> {
    let pct = |k: usize| {
        recall
            .at(k)
            .map(|r| format!("{:.1}", 100.0 * r))
            .unwrap_or_default()
    };
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(vec![]);
    writer
        .write_record([
            dataset.to_string(),
            method.to_string(),
            pct(1),
            pct(5),
            pct(10),
            format!("{speedup:.1}x"),
        ])
        .map_err(|e| Error::parse("table row", e))?;
    let bytes = writer.into_inner().map_err(|e| Error::parse("table row", e))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
