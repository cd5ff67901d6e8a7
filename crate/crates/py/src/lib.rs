//! Python bindings: `import cascade_search`.
//!
//! Structured results (query results, reports) are returned as plain dicts
//! and lists. Errors map to `ValueError` (bad configuration), `OSError`
//! (storage) and `cascade_search.CascadeError` (corrupt or unknown data).

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyOSError, PyValueError};
use pyo3::prelude::*;

use cascade_core::config::EngineConfigFile;
use cascade_core::cost::{self, CostParams};
use cascade_core::eval::{self, GroundTruthPairs, WorkloadOptions};
use cascade_core::rank::{self, RankedList};
use cascade_core::store;
use cascade_core::synthetic::{NoiseShape, SyntheticParams};
use cascade_core::tiers::{make_truncation_family, Tier};
use cascade_core::{CaptionKey, DocId, ErrorKind, QueryMode};

create_exception!(cascade_search, CascadeError, PyException);

fn to_py_err(e: cascade_core::Error) -> PyErr {
    let msg = e.to_string();
    match e.kind() {
        ErrorKind::Config => PyValueError::new_err(msg),
        ErrorKind::Io => PyOSError::new_err(msg),
        ErrorKind::Data => CascadeError::new_err(msg),
    }
}

trait IntoPyResult<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPyResult<T> for cascade_core::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(to_py_err)
    }
}

/// Round-trips a serializable value through Python's `json` module.
fn to_python<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn ranked_pairs(list: &RankedList) -> Vec<(DocId, f64)> {
    list.items().iter().map(|s| (s.id, s.score)).collect()
}

/// Unit-normalized embedding rows keyed by document id.
#[pyclass(name = "EmbeddingMatrix", module = "cascade_search", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyEmbeddingMatrix {
    inner: Arc<store::EmbeddingMatrix>,
}

#[pymethods]
impl PyEmbeddingMatrix {
    /// `data` is row-major with `len(ids) * dim` values. With
    /// `normalize=True` rows are scaled to unit length first.
    #[new]
    #[pyo3(signature = (level_id, dim, ids, data, normalize = false))]
    fn new(level_id: u16, dim: usize, ids: Vec<DocId>, data: Vec<f32>, normalize: bool) -> PyResult<Self> {
        let inner = if normalize {
            store::EmbeddingMatrix::from_unnormalized(level_id, dim, ids, data)
        } else {
            store::EmbeddingMatrix::new(level_id, dim, ids, data)
        }
        .py()?;
        Ok(Self { inner: Arc::new(inner) })
    }

    #[staticmethod]
    fn read(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: Arc::new(store::read_matrix(path).py()?),
        })
    }

    fn write(&self, path: PathBuf) -> PyResult<()> {
        store::write_matrix(&self.inner, path).py()
    }

    #[getter]
    fn level_id(&self) -> u16 {
        self.inner.level_id()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn ids(&self) -> Vec<DocId> {
        self.inner.doc_ids().to_vec()
    }

    fn row(&self, id: DocId) -> PyResult<Vec<f32>> {
        self.inner
            .get(id)
            .map(<[f32]>::to_vec)
            .ok_or_else(|| to_py_err(cascade_core::Error::UnknownDoc(id)))
    }

    /// Best `m` rows for `query` as `(id, score)` pairs.
    #[pyo3(signature = (query, m = None))]
    fn rank(&self, py: Python<'_>, query: Vec<f32>, m: Option<usize>) -> PyResult<Vec<(DocId, f64)>> {
        let m = m.unwrap_or(self.inner.len());
        let inner = self.inner.clone();
        let ranked = py.detach(move || rank::rank_matrix(&inner, &query, m)).py()?;
        Ok(ranked_pairs(&ranked))
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "EmbeddingMatrix(level_id={}, dim={}, rows={})",
            self.inner.level_id(),
            self.inner.dim(),
            self.inner.len()
        )
    }
}

/// Seeded synthetic collection with paired noisy captions.
#[pyclass(name = "SyntheticDataset", module = "cascade_search", frozen)]
pub struct PySyntheticDataset {
    inner: cascade_core::synthetic::SyntheticDataset,
}

#[pymethods]
impl PySyntheticDataset {
    #[new]
    #[pyo3(signature = (n = 1000, dim = 64, queries = 100, noise = 1.5, decay = 1.0, seed = 0, shaped_noise = false))]
    fn new(
        n: usize,
        dim: usize,
        queries: usize,
        noise: f64,
        decay: f64,
        seed: u64,
        shaped_noise: bool,
    ) -> PyResult<Self> {
        let params = SyntheticParams {
            n,
            dim,
            queries,
            noise,
            decay,
            shape: if shaped_noise {
                NoiseShape::Shaped
            } else {
                NoiseShape::Isotropic
            },
            seed,
        };
        Ok(Self {
            inner: cascade_core::synthetic::SyntheticDataset::generate(&params).py()?,
        })
    }

    #[getter]
    fn images(&self) -> PyEmbeddingMatrix {
        PyEmbeddingMatrix {
            inner: self.inner.images.clone(),
        }
    }

    #[getter]
    fn queries(&self) -> PyEmbeddingMatrix {
        PyEmbeddingMatrix {
            inner: self.inner.queries.clone(),
        }
    }

    /// `(caption_key, doc_id)` pairs.
    #[getter]
    fn truth(&self) -> Vec<(CaptionKey, DocId)> {
        self.inner.truth.pairs().to_vec()
    }
}

/// A cascade engine with its caches and cost ledger.
#[pyclass(name = "Cascade", module = "cascade_search", frozen)]
pub struct PyCascade {
    engine: Arc<cascade_core::Cascade>,
    truth: Option<GroundTruthPairs>,
}

impl PyCascade {
    fn truth_or<'a>(&'a self, truth: Option<&'a GroundTruthPairs>) -> PyResult<&'a GroundTruthPairs> {
        truth
            .or(self.truth.as_ref())
            .ok_or_else(|| PyValueError::new_err("no ground truth attached; pass truth="))
    }

    fn parse_truth(&self, truth: Option<Vec<(CaptionKey, DocId)>>) -> PyResult<Option<GroundTruthPairs>> {
        truth
            .map(|pairs| GroundTruthPairs::new(pairs, self.engine.collection()).py())
            .transpose()
    }
}

#[pymethods]
impl PyCascade {
    /// Truncation-tier cascade over a synthetic dataset: tier `i` keeps the
    /// first `widths[i]` coordinates and costs `costs[i]`.
    #[staticmethod]
    #[allow(clippy::too_many_arguments)]
    #[pyo3(signature = (dataset, widths, costs, m, f_assumed = 0.1, output_k = 10, state_dir = None))]
    fn synthetic(
        py: Python<'_>,
        dataset: &PySyntheticDataset,
        widths: Vec<usize>,
        costs: Vec<f64>,
        m: Vec<usize>,
        f_assumed: f64,
        output_k: usize,
        state_dir: Option<PathBuf>,
    ) -> PyResult<Self> {
        let data = &dataset.inner;
        let tiers: Vec<Arc<dyn Tier>> =
            make_truncation_family(data.images.clone(), data.queries.clone(), &widths, &costs)
                .py()?
                .into_iter()
                .map(|t| Arc::new(t) as Arc<dyn Tier>)
                .collect();
        let config = cascade_core::CascadeConfig::new(tiers, m, f_assumed, output_k).py()?;
        let ids = data.images.doc_ids().to_vec();
        let engine = py
            .detach(move || match state_dir {
                Some(dir) => cascade_core::Cascade::build_persistent(&ids, config, dir),
                None => cascade_core::Cascade::build(&ids, config),
            })
            .py()?;
        Ok(Self {
            engine: Arc::new(engine),
            truth: Some(data.truth.clone()),
        })
    }

    /// Opens the persisted state named by a TOML engine config, building it
    /// first when `build=True`.
    #[staticmethod]
    #[pyo3(signature = (path, build = false))]
    fn from_config(py: Python<'_>, path: PathBuf, build: bool) -> PyResult<Self> {
        let engine = py
            .detach(move || {
                let file = EngineConfigFile::load(&path)?;
                file.check_inputs_exist()?;
                let config = file.cascade_config()?;
                if build {
                    let collection = file.read_collection()?;
                    cascade_core::Cascade::build_persistent(&collection, config, &file.state_dir)
                } else {
                    cascade_core::Cascade::open(config, &file.state_dir)
                }
            })
            .py()?;
        Ok(Self {
            engine: Arc::new(engine),
            truth: None,
        })
    }

    #[getter]
    fn n(&self) -> usize {
        self.engine.n()
    }

    /// Runs a query; `read_only=True` leaves caches and ledger untouched.
    /// Returns `{"results": [(id, score), ...], "cost_charged": [...]}`.
    #[pyo3(signature = (key, k = None, read_only = false))]
    fn query<'py>(
        &self,
        py: Python<'py>,
        key: CaptionKey,
        k: Option<usize>,
        read_only: bool,
    ) -> PyResult<Bound<'py, PyAny>> {
        let k = k.unwrap_or(self.engine.config().output_k);
        let mode = if read_only {
            QueryMode::ReadOnly
        } else {
            QueryMode::Record
        };
        let engine = self.engine.clone();
        let result = py.detach(move || engine.query_with(key, k, mode)).py()?;
        let out = to_python(py, &result)?;
        out.set_item("results", ranked_pairs(&result.results))?;
        Ok(out)
    }

    fn lifetime_report<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_python(py, &self.engine.lifetime_report().py()?)
    }

    /// Recall@k over every ground-truth caption, in read-only mode.
    #[pyo3(signature = (ks = vec![1, 5, 10], truth = None))]
    fn evaluate(
        &self,
        py: Python<'_>,
        ks: Vec<usize>,
        truth: Option<Vec<(CaptionKey, DocId)>>,
    ) -> PyResult<HashMap<usize, f64>> {
        let parsed = self.parse_truth(truth)?;
        let truth = self.truth_or(parsed.as_ref())?;
        let engine = self.engine.clone();
        let report = py.detach(|| eval::evaluate(&engine, truth, &ks)).py()?;
        Ok(report.recall.into_iter().collect())
    }

    /// Seeded query sequence whose candidate prefixes cover about
    /// `target_f · n` documents.
    #[pyo3(signature = (target_f, seed = 0, length = None, truth = None))]
    fn generate_workload<'py>(
        &self,
        py: Python<'py>,
        target_f: f64,
        seed: u64,
        length: Option<usize>,
        truth: Option<Vec<(CaptionKey, DocId)>>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let parsed = self.parse_truth(truth)?;
        let truth = self.truth_or(parsed.as_ref())?;
        let options = WorkloadOptions {
            length,
            ..WorkloadOptions::default()
        };
        let engine = self.engine.clone();
        let workload = py
            .detach(|| eval::generate_workload(&engine, truth, target_f, seed, &options))
            .py()?;
        to_python(py, &workload)
    }

    /// Executes `workload` (charging the ledger), then evaluates recall.
    #[pyo3(signature = (workload, ks = vec![1, 5, 10], truth = None))]
    fn run_experiment<'py>(
        &self,
        py: Python<'py>,
        workload: Vec<CaptionKey>,
        ks: Vec<usize>,
        truth: Option<Vec<(CaptionKey, DocId)>>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let parsed = self.parse_truth(truth)?;
        let truth = self.truth_or(parsed.as_ref())?;
        let engine = self.engine.clone();
        let report = py
            .detach(|| eval::run_experiment(&engine, truth, &workload, &ks))
            .py()?;
        to_python(py, &report)
    }
}

/// `n·t_s + f·n·Σ t_i` for costs `t = [t_s, t_1, ...]`.
#[pyfunction]
fn lifetime_cost(n: u64, f: f64, t: Vec<f64>) -> PyResult<f64> {
    cost::lifetime_cost(&CostParams { n, f, t, m: vec![] }).py()
}

/// `t_1 / (t_s + f·t_1)`.
#[pyfunction]
fn two_level_speedup(t_s: f64, t_1: f64, f: f64) -> PyResult<f64> {
    cost::two_level_speedup(t_s, t_1, f).py()
}

/// `m_1·t_r / Σ m_i·t_i` over runtime tiers.
#[pyfunction]
fn query_speedup(m: Vec<usize>, t: Vec<f64>) -> PyResult<f64> {
    cost::query_speedup(&m, &t).py()
}

#[pyfunction]
fn solve_intermediate_m(m_1: usize, target: f64, t_1: f64, t_2: f64) -> PyResult<usize> {
    cost::solve_intermediate_m(m_1, target, t_1, t_2).py()
}

#[pyfunction]
fn cascade_is_cheaper(t_s: f64, t_1: f64, f: f64) -> bool {
    cost::cascade_is_cheaper(&t_s, &t_1, &f)
}

/// Recall@k from ranked id lists keyed by caption.
#[pyfunction]
fn recall_at_k(
    results: HashMap<CaptionKey, Vec<DocId>>,
    truth: Vec<(CaptionKey, DocId)>,
    ks: Vec<usize>,
    collection: Vec<DocId>,
) -> PyResult<HashMap<usize, f64>> {
    let truth = GroundTruthPairs::new(truth, &collection).py()?;
    let ranked = results
        .into_iter()
        .map(|(caption, ids)| {
            // recall only looks at ids, so synthesize strictly decreasing scores
            let items = ids
                .iter()
                .enumerate()
                .map(|(i, &id)| rank::Scored {
                    id,
                    score: -(i as f64),
                })
                .collect();
            RankedList::from_ranked(items).map(|list| (caption, list))
        })
        .collect::<cascade_core::Result<HashMap<_, _>>>()
        .py()?;
    let report = eval::recall_at_k(&ranked, &truth, &ks, collection.len()).py()?;
    Ok(report.recall.into_iter().collect())
}

#[pymodule]
fn cascade_search(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("CascadeError", m.py().get_type::<CascadeError>())?;
    m.add_class::<PyEmbeddingMatrix>()?;
    m.add_class::<PySyntheticDataset>()?;
    m.add_class::<PyCascade>()?;
    m.add_function(wrap_pyfunction!(lifetime_cost, m)?)?;
    m.add_function(wrap_pyfunction!(two_level_speedup, m)?)?;
    m.add_function(wrap_pyfunction!(query_speedup, m)?)?;
    m.add_function(wrap_pyfunction!(solve_intermediate_m, m)?)?;
    m.add_function(wrap_pyfunction!(cascade_is_cheaper, m)?)?;
    m.add_function(wrap_pyfunction!(recall_at_k, m)?)?;
    Ok(())
}
