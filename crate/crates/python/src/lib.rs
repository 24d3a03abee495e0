//! Python bindings for the evaluation pipeline.
//!
//! Errors from the core library surface as `ValueError`.

use std::collections::BTreeMap;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use teval_core::ingest::{self, Completeness};
use teval_core::report::ValidationReport;
use teval_core::schema::{self, RevisionOp};
use teval_core::scoring::{self, ScoringOptions};
use teval_core::weights::{self, WeightSource, BUILTIN_TABLE};
use teval_core::{analytics, Convention, ItemId};

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn completeness(lenient: bool) -> Completeness {
    if lenient {
        Completeness::Lenient
    } else {
        Completeness::Strict
    }
}

fn convention(name: &str) -> PyResult<Convention> {
    match name {
        "sample" => Ok(Convention::Sample),
        "population" => Ok(Convention::Population),
        other => Err(value_error(format!(
            "convention must be 'sample' or 'population', not {other:?}"
        ))),
    }
}

fn findings<'py>(py: Python<'py>, report: &ValidationReport) -> PyResult<Bound<'py, PyList>> {
    let out = PyList::empty(py);
    for f in &report.findings {
        let d = PyDict::new(py);
        d.set_item("kind", format!("{:?}", f.kind))?;
        d.set_item("severity", format!("{:?}", f.severity).to_lowercase())?;
        d.set_item("location", &f.location)?;
        d.set_item("message", &f.message)?;
        out.append(d)?;
    }
    Ok(out)
}

/// A versioned questionnaire: factor groups of rated items.
#[pyclass(name = "Schema", module = "teval", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PySchema {
    inner: schema::QuestionnaireSchema,
}

#[pymethods]
impl PySchema {
    /// Parses and validates a schema JSON document.
    #[staticmethod]
    fn from_json(document: &str) -> PyResult<Self> {
        schema::parse_schema(document)
            .map(|inner| Self { inner })
            .map_err(value_error)
    }

    #[getter]
    fn version(&self) -> u32 {
        self.inner.version
    }

    #[getter]
    fn item_count(&self) -> usize {
        self.inner.item_count()
    }

    #[getter]
    fn group_count(&self) -> usize {
        self.inner.group_count()
    }

    /// `[(group_id, name, [item_id, ...]), ...]` in schema order.
    fn groups(&self) -> Vec<(u32, String, Vec<String>)> {
        self.inner
            .groups
            .iter()
            .map(|g| {
                let ids = g.items.iter().map(|i| i.item_id.to_string()).collect();
                (g.group_id, g.name.clone(), ids)
            })
            .collect()
    }

    fn item_label(&self, item_id: &str) -> PyResult<String> {
        let id: ItemId = item_id.parse().map_err(value_error)?;
        self.inner
            .item(id)
            .map(|i| i.label.clone())
            .ok_or_else(|| value_error(format!("unknown item {item_id}")))
    }

    /// List of finding dicts; empty when the schema is valid.
    fn validate<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyList>> {
        findings(py, &schema::validate_schema(&self.inner))
    }

    /// Applies a JSON list of revisions, returning the next version.
    fn revise(&self, revisions_json: &str) -> PyResult<Self> {
        let ops: Vec<RevisionOp> = serde_json::from_str(revisions_json).map_err(value_error)?;
        schema::apply_revisions(&self.inner, &ops)
            .map(|inner| Self { inner })
            .map_err(value_error)
    }

    /// Re-applies `revised`'s revision log on this schema.
    fn replay(&self, revised: &PySchema) -> PyResult<Self> {
        schema::replay_revisions(&self.inner, &revised.inner.revision_log)
            .map(|inner| Self { inner })
            .map_err(value_error)
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn __eq__(&self, other: &PySchema) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!(
            "Schema(version={}, groups={}, items={})",
            self.inner.version,
            self.inner.group_count(),
            self.inner.item_count()
        )
    }
}

/// Expert responses with optional profiles and distribution counts.
#[pyclass(name = "Dataset", module = "teval", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyDataset {
    inner: ingest::ResponseDataset,
}

#[pymethods]
impl PyDataset {
    /// Long-form CSV (`respondent_id,channel,mode,key,rating`).
    #[staticmethod]
    fn from_csv(document: &str, schema: &PySchema) -> PyResult<Self> {
        ingest::parse_responses(document, &schema.inner)
            .map(|inner| Self { inner })
            .map_err(value_error)
    }

    #[staticmethod]
    fn from_json(document: &str, schema: &PySchema) -> PyResult<Self> {
        ingest::parse_responses_json(document, &schema.inner)
            .map(|inner| Self { inner })
            .map_err(value_error)
    }

    fn __len__(&self) -> usize {
        self.inner.records.len()
    }

    fn respondent_ids(&self) -> Vec<String> {
        self.inner
            .records
            .iter()
            .map(|r| r.respondent_id.to_string())
            .collect()
    }

    /// Attaches profiles from CSV; returns the new dataset and parse warnings.
    fn with_profiles(&self, document: &str) -> PyResult<(Self, Vec<String>)> {
        let parsed = ingest::parse_profiles(document).map_err(value_error)?;
        let inner = self
            .inner
            .clone()
            .with_profiles(parsed.profiles)
            .map_err(value_error)?;
        Ok((Self { inner }, parsed.warnings))
    }

    /// Attaches per-channel sent counts from JSON, e.g. `{"post": 50}`.
    fn with_sent_counts(&self, document: &str) -> PyResult<Self> {
        let sent = ingest::parse_sent_counts(document).map_err(value_error)?;
        Ok(Self {
            inner: self.inner.clone().with_sent_counts(sent),
        })
    }

    #[pyo3(signature = (schema, lenient=false))]
    fn validate<'py>(
        &self,
        py: Python<'py>,
        schema: &PySchema,
        lenient: bool,
    ) -> PyResult<Bound<'py, PyList>> {
        findings(
            py,
            &ingest::validate_dataset(&self.inner, &schema.inner, completeness(lenient)),
        )
    }

    /// `[(medium, sent, received, rate_display), ...]` ending with the total.
    fn distribution(&self) -> PyResult<Vec<(String, u32, u32, String)>> {
        let summary = ingest::distribution_summary(&self.inner).map_err(value_error)?;
        Ok(summary
            .rows
            .iter()
            .chain(std::iter::once(&summary.total))
            .map(|r| {
                let medium = r.channel.map(|c| c.as_str()).unwrap_or("total");
                (medium.to_string(), r.sent, r.received, r.rate_display())
            })
            .collect())
    }

    /// Keeps records whose profile matches, e.g. `"gender=female"`.
    fn cohort(&self, filter: &str) -> PyResult<Self> {
        let f = analytics::CohortFilter::parse(filter).map_err(value_error)?;
        Ok(Self {
            inner: analytics::cohort_filter(&self.inner, &f),
        })
    }

    /// Per-group statistics as dicts.
    #[pyo3(signature = (schema, convention="sample", lenient=false, level="group"))]
    fn stats<'py>(
        &self,
        py: Python<'py>,
        schema: &PySchema,
        convention: &str,
        lenient: bool,
        level: &str,
    ) -> PyResult<Bound<'py, PyList>> {
        let conv = self::convention(convention)?;
        let summary = match level {
            "group" => {
                analytics::group_stats(&self.inner, &schema.inner, conv, completeness(lenient))
            }
            "item" => {
                analytics::item_stats(&self.inner, &schema.inner, conv, completeness(lenient))
            }
            other => {
                return Err(value_error(format!(
                    "level must be 'group' or 'item', not {other:?}"
                )))
            }
        }
        .map_err(value_error)?;
        let out = PyList::empty(py);
        for e in &summary.entries {
            let d = PyDict::new(py);
            d.set_item("key", e.key.to_string())?;
            d.set_item("label", &e.label)?;
            d.set_item("n", e.n)?;
            d.set_item("mean", e.mean)?;
            d.set_item("std_dev", e.std_dev)?;
            d.set_item("min", e.min)?;
            d.set_item("max", e.max)?;
            out.append(d)?;
        }
        Ok(out)
    }

    /// Mean-normalized group weights from this dataset's sample statistics.
    #[pyo3(signature = (schema, lenient=false))]
    fn derive_weights(&self, schema: &PySchema, lenient: bool) -> PyResult<PyWeights> {
        let stats = analytics::group_stats(
            &self.inner,
            &schema.inner,
            Convention::Sample,
            completeness(lenient),
        )
        .map_err(value_error)?;
        weights::derive_weights_mean(&stats)
            .map(|inner| PyWeights { inner })
            .map_err(value_error)
    }
}

/// Nonnegative group weights summing to one.
#[pyclass(name = "Weights", module = "teval", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyWeights {
    inner: weights::WeightVector,
}

#[pymethods]
impl PyWeights {
    /// A built-in table; `paper-table-4` is the only one.
    #[staticmethod]
    #[pyo3(signature = (schema, name=BUILTIN_TABLE))]
    fn builtin(schema: &PySchema, name: &str) -> PyResult<Self> {
        weights::load_weight_table(WeightSource::Builtin(name), &schema.inner)
            .map(|inner| Self { inner })
            .map_err(value_error)
    }

    #[staticmethod]
    fn uniform(schema: &PySchema) -> PyResult<Self> {
        weights::WeightVector::uniform(&schema.inner)
            .map(|inner| Self { inner })
            .map_err(value_error)
    }

    /// CSV with header `group_id,weight`.
    #[staticmethod]
    fn from_csv(document: &str, schema: &PySchema) -> PyResult<Self> {
        weights::load_weight_table(WeightSource::Csv(document), &schema.inner)
            .map(|inner| Self { inner })
            .map_err(value_error)
    }

    /// Normalizes positive group means, keyed 1..G.
    #[staticmethod]
    fn from_means(means: BTreeMap<u32, f64>) -> PyResult<Self> {
        weights::derive_weights_from_means(&means)
            .map(|inner| Self { inner })
            .map_err(value_error)
    }

    /// Published group means, mean-normalized.
    #[staticmethod]
    fn published_means() -> PyResult<Self> {
        Self::from_means(weights::published_means())
    }

    #[getter]
    fn strategy(&self) -> &'static str {
        self.inner.strategy().as_str()
    }

    fn as_dict(&self) -> BTreeMap<u32, f64> {
        self.inner.weights().clone()
    }

    fn raw_sum(&self) -> Option<f64> {
        self.inner.raw_sum()
    }

    fn sum(&self) -> f64 {
        self.inner.sum()
    }

    fn argmax(&self) -> Option<u32> {
        self.inner.argmax()
    }

    fn priority_order(&self) -> Vec<u32> {
        self.inner.priority_order()
    }

    /// Dict with `rows`, `rank_correlation`, `top_a`, `top_b`.
    fn compare<'py>(&self, py: Python<'py>, other: &PyWeights) -> PyResult<Bound<'py, PyDict>> {
        let cmp = weights::compare_weights(&self.inner, &other.inner).map_err(value_error)?;
        let rows = PyList::empty(py);
        for r in &cmp.rows {
            rows.append((r.group_id, r.a, r.b, r.difference, r.rank_a, r.rank_b))?;
        }
        let d = PyDict::new(py);
        d.set_item("rows", rows)?;
        d.set_item("rank_correlation", cmp.rank_correlation)?;
        d.set_item("top_a", cmp.top_a)?;
        d.set_item("top_b", cmp.top_b)?;
        d.set_item("text", cmp.to_text())?;
        Ok(d)
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }

    fn __repr__(&self) -> String {
        format!(
            "Weights(strategy={}, groups={})",
            self.inner.strategy().as_str(),
            self.inner.len()
        )
    }
}

fn to_records(
    ratings: BTreeMap<String, BTreeMap<String, f64>>,
) -> PyResult<Vec<scoring::EvaluateeRecord>> {
    ratings
        .into_iter()
        .map(|(id, items)| {
            let mut rec = scoring::EvaluateeRecord::new(id);
            for (item, r) in items {
                rec.ratings.insert(item.parse().map_err(value_error)?, r);
            }
            Ok(rec)
        })
        .collect()
}

fn card_dict<'py>(py: Python<'py>, c: &scoring::ScoreCard) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("evaluatee_id", &c.evaluatee_id)?;
    d.set_item("group_scores", c.group_scores.clone())?;
    d.set_item("overall", c.overall)?;
    d.set_item("normalized", c.normalized)?;
    d.set_item("rank", c.rank)?;
    Ok(d)
}

fn score_cards(
    ratings: BTreeMap<String, BTreeMap<String, f64>>,
    weights: &PyWeights,
    schema: &PySchema,
    lenient: bool,
) -> PyResult<Vec<scoring::ScoreCard>> {
    let records = to_records(ratings)?;
    let options = ScoringOptions {
        completeness: completeness(lenient),
        ..Default::default()
    };
    scoring::score_all(&records, &weights.inner, &schema.inner, &options).map_err(value_error)
}

/// Scores `{evaluatee_id: {item_id: rating}}`; returns scorecard dicts in
/// evaluatee-id order, unranked.
#[pyfunction]
#[pyo3(signature = (ratings, weights, schema, lenient=false))]
fn score<'py>(
    py: Python<'py>,
    ratings: BTreeMap<String, BTreeMap<String, f64>>,
    weights: &PyWeights,
    schema: &PySchema,
    lenient: bool,
) -> PyResult<Bound<'py, PyList>> {
    let out = PyList::empty(py);
    for c in score_cards(ratings, weights, schema, lenient)? {
        out.append(card_dict(py, &c)?)?;
    }
    Ok(out)
}

/// Like [`score`], ordered by rank with competition ranks assigned.
#[pyfunction]
#[pyo3(signature = (ratings, weights, schema, lenient=false))]
fn rank<'py>(
    py: Python<'py>,
    ratings: BTreeMap<String, BTreeMap<String, f64>>,
    weights: &PyWeights,
    schema: &PySchema,
    lenient: bool,
) -> PyResult<Bound<'py, PyList>> {
    let cards =
        scoring::rank(score_cards(ratings, weights, schema, lenient)?).map_err(value_error)?;
    let out = PyList::empty(py);
    for c in &cards {
        out.append(card_dict(py, c)?)?;
    }
    Ok(out)
}

/// Convex combination of one group's item ratings.
#[pyfunction]
#[pyo3(signature = (ratings, within_weights=None))]
fn score_group(ratings: Vec<f64>, within_weights: Option<Vec<f64>>) -> PyResult<f64> {
    scoring::score_group(&ratings, within_weights.as_deref()).map_err(value_error)
}

/// Spearman rank correlation; `None` when either side has no variance.
#[pyfunction]
fn spearman(x: Vec<f64>, y: Vec<f64>) -> Option<f64> {
    weights::spearman(&x, &y)
}

#[pyfunction]
fn canonical_schema() -> PySchema {
    PySchema {
        inner: schema::canonical_schema(),
    }
}

/// Runs the command-line interface in process; returns
/// `(exit_code, stdout, stderr)`.
#[pyfunction]
fn run_cli(args: Vec<String>) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("teval".to_string()).chain(args);
    let code = teval_core::cli::run(argv, &mut out, &mut err);
    (
        code,
        String::from_utf8_lossy(&out).into_owned(),
        String::from_utf8_lossy(&err).into_owned(),
    )
}

#[pymodule]
fn teval(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySchema>()?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyWeights>()?;
    m.add_function(wrap_pyfunction!(canonical_schema, m)?)?;
    m.add_function(wrap_pyfunction!(score, m)?)?;
    m.add_function(wrap_pyfunction!(rank, m)?)?;
    m.add_function(wrap_pyfunction!(score_group, m)?)?;
    m.add_function(wrap_pyfunction!(spearman, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    m.add("BUILTIN_WEIGHTS", BUILTIN_TABLE)?;
    Ok(())
}
