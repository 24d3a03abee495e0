//! Group weight vectors.
//!
//! Three strategies produce a [`WeightVector`]:
//!
//! * `manual`: a weight table loaded from CSV or the built-in `paper-table-4`
//!   (the expert-assigned priorities shipped with the instrument);
//! * `mean_normalized`: each group's mean rating divided by the sum of means;
//! * `uniform`: `1/G` everywhere, a neutral baseline.
//!
//! The manual table is not derivable from the mean ratings; the two rank the
//! groups differently. [`compare_weights`] reports that divergence.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytics::{StatsKey, StatsSummary};
use crate::schema::QuestionnaireSchema;

/// Name of the built-in expert weight table.
pub const BUILTIN_TABLE: &str = "paper-table-4";

/// Expert-assigned group weights as printed (4 decimals, listed by priority).
/// The printed column sums to 1.0004.
pub const PUBLISHED_WEIGHTS: [(u32, f64); 15] = [
    (7, 0.0753),  // Research Orientation
    (8, 0.0742),  // Publication
    (2, 0.0729),  // Teaching Learning Process
    (1, 0.0727),  // Personal Abilities
    (3, 0.0726),  // Responsibility & Punctuality
    (10, 0.0726), // Compensation & Rewards
    (6, 0.0720),  // Professional Ethics
    (12, 0.0706), // Job Security & Environment Factors
    (5, 0.0677),  // Supervision
    (4, 0.0674),  // Administrative Skills
    (9, 0.0605),  // Awards & Achievements
    (11, 0.0602), // Promotion Factors
    (13, 0.0577), // Organization Evaluation Policy
    (14, 0.0550), // Needs & Requirements
    (15, 0.0490), // Background Factors
];

/// Published per-group (mean, standard deviation) over N = 25 experts.
pub const PUBLISHED_GROUP_STATS: [(u32, f64, f64); 15] = [
    (1, 4.48, 0.653),
    (2, 4.36, 0.810),
    (3, 4.28, 0.936),
    (4, 4.28, 0.737),
    (5, 4.12, 1.053),
    (6, 4.16, 0.986),
    (7, 4.32, 1.029),
    (8, 4.00, 1.080),
    (9, 3.96, 0.934),
    (10, 4.28, 0.842),
    (11, 4.08, 0.862),
    (12, 4.28, 0.842),
    (13, 3.96, 1.059),
    (14, 3.88, 1.235),
    (15, 3.72, 1.275),
];

/// Raw weight sums within this distance of 1 are accepted on load.
pub const MANUAL_SUM_TOLERANCE: f64 = 1e-3;
/// Sum tolerance every constructed vector satisfies.
pub const SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightStrategy {
    MeanNormalized,
    Manual,
    Uniform,
}

impl WeightStrategy {
    pub fn as_str(self) -> &'static str {
        match self {
            WeightStrategy::MeanNormalized => "mean_normalized",
            WeightStrategy::Manual => "manual",
            WeightStrategy::Uniform => "uniform",
        }
    }
}

impl fmt::Display for WeightStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WeightError {
    #[error("weight vector is empty")]
    Empty,
    #[error("group {group_id}: weight {value} is negative")]
    Negative { group_id: u32, value: f64 },
    #[error("group {group_id}: weight {value} is not finite")]
    NonFinite { group_id: u32, value: f64 },
    #[error("all weights are zero")]
    AllZero,
    #[error("group {0} has no weight")]
    MissingGroup(u32),
    #[error("group {0} is not in the schema")]
    ExtraGroup(u32),
    #[error("group {0} is listed more than once")]
    DuplicateGroup(u32),
    #[error("raw weights sum to {sum}, outside 1 ± {tolerance}")]
    SumOutOfTolerance { sum: f64, tolerance: f64 },
    #[error("group {group_id}: mean {mean} is not positive")]
    NonPositiveMean { group_id: u32, mean: f64 },
    #[error("statistics entry {0} is not a group entry")]
    NotGroupEntry(String),
    #[error("unknown builtin weight table {0:?}")]
    UnknownBuiltin(String),
    #[error("weight file line {line}: {message}")]
    Csv { line: u64, message: String },
    #[error("weight vectors cover different groups")]
    GroupMismatch,
}

/// Nonnegative group weights that sum to one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightVector {
    weights: BTreeMap<u32, f64>,
    strategy: WeightStrategy,
    source_note: String,
    raw: Option<BTreeMap<u32, f64>>,
}

impl WeightVector {
    /// Normalizes `raw` to sum to one.
    pub fn new(
        raw: BTreeMap<u32, f64>,
        strategy: WeightStrategy,
        source_note: impl Into<String>,
    ) -> Result<Self, WeightError> {
        Ok(Self {
            weights: renormalize(&raw)?,
            strategy,
            source_note: source_note.into(),
            raw: None,
        })
    }

    pub fn uniform(schema: &QuestionnaireSchema) -> Result<Self, WeightError> {
        Self::new(
            schema.group_ids().map(|g| (g, 1.0)).collect(),
            WeightStrategy::Uniform,
            format!("uniform over {} groups", schema.group_count()),
        )
    }

    pub fn weights(&self) -> &BTreeMap<u32, f64> {
        &self.weights
    }

    pub fn get(&self, group_id: u32) -> Option<f64> {
        self.weights.get(&group_id).copied()
    }

    pub fn strategy(&self) -> WeightStrategy {
        self.strategy
    }

    pub fn source_note(&self) -> &str {
        &self.source_note
    }

    /// Values as loaded, before renormalization (manual tables only).
    pub fn raw_weights(&self) -> Option<&BTreeMap<u32, f64>> {
        self.raw.as_ref()
    }

    pub fn raw_sum(&self) -> Option<f64> {
        self.raw.as_ref().map(|r| r.values().sum())
    }

    pub fn sum(&self) -> f64 {
        self.weights.values().sum()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Every weight multiplied by `c`; the result is no longer normalized.
    pub fn scaled(&self, c: f64) -> BTreeMap<u32, f64> {
        self.weights.iter().map(|(&g, &w)| (g, w * c)).collect()
    }

    /// Heaviest group; ties go to the smaller group id.
    pub fn argmax(&self) -> Option<u32> {
        self.weights
            .iter()
            .fold(None, |best: Option<(u32, f64)>, (&g, &w)| match best {
                Some((_, bw)) if bw >= w => best,
                _ => Some((g, w)),
            })
            .map(|(g, _)| g)
    }

    /// Groups by descending weight, ties by ascending group id.
    pub fn priority_order(&self) -> Vec<u32> {
        let mut order: Vec<(u32, f64)> = self.weights.iter().map(|(&g, &w)| (g, w)).collect();
        order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        order.into_iter().map(|(g, _)| g).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("group_id,weight\n");
        for (g, w) in &self.weights {
            out.push_str(&format!("{g},{w}\n"));
        }
        out
    }

    pub fn to_text(&self, schema: Option<&QuestionnaireSchema>) -> String {
        let mut out = format!(
            "strategy: {}\nsource: {}\n",
            self.strategy, self.source_note
        );
        out.push_str(&format!("{:<6}{:<40}{:>8}\n", "Rank", "Group", "Weight"));
        for (i, g) in self.priority_order().into_iter().enumerate() {
            let name = schema
                .and_then(|s| s.group(g))
                .map(|grp| format!("{g} {}", grp.name))
                .unwrap_or_else(|| g.to_string());
            out.push_str(&format!(
                "{:<6}{:<40}{:>8.4}\n",
                i + 1,
                name,
                self.weights[&g]
            ));
        }
        out.push_str(&format!(
            "{:<6}{:<40}{:>8.4}\n",
            "",
            "Total weight:",
            self.sum()
        ));
        out
    }
}

/// Divides each weight by the total. Fails on negative, non-finite or
/// all-zero input.
pub fn renormalize(weights: &BTreeMap<u32, f64>) -> Result<BTreeMap<u32, f64>, WeightError> {
    if weights.is_empty() {
        return Err(WeightError::Empty);
    }
    for (&group_id, &value) in weights {
        if !value.is_finite() {
            return Err(WeightError::NonFinite { group_id, value });
        }
        if value < 0.0 {
            return Err(WeightError::Negative { group_id, value });
        }
    }
    let total: f64 = weights.values().sum();
    if total <= 0.0 {
        return Err(WeightError::AllZero);
    }
    Ok(weights.iter().map(|(&g, &w)| (g, w / total)).collect())
}

/// Mean-proportional weights: `w_g = mean_g / Σ mean_h`.
pub fn derive_weights_from_means(means: &BTreeMap<u32, f64>) -> Result<WeightVector, WeightError> {
    if means.is_empty() {
        return Err(WeightError::Empty);
    }
    for (expected, (&group_id, &mean)) in (1u32..).zip(means) {
        if group_id != expected {
            return Err(WeightError::MissingGroup(expected));
        }
        if mean.is_nan() || mean <= 0.0 {
            return Err(WeightError::NonPositiveMean { group_id, mean });
        }
    }
    let total: f64 = means.values().sum();
    WeightVector::new(
        means.clone(),
        WeightStrategy::MeanNormalized,
        format!("group means normalized by their sum {total}"),
    )
}

/// Mean-proportional weights from group statistics.
pub fn derive_weights_mean(stats: &StatsSummary) -> Result<WeightVector, WeightError> {
    let mut means = BTreeMap::new();
    for e in &stats.entries {
        match e.key {
            StatsKey::Group(g) => {
                if means.insert(g, e.mean).is_some() {
                    return Err(WeightError::DuplicateGroup(g));
                }
            }
            StatsKey::Item(i) => return Err(WeightError::NotGroupEntry(i.to_string())),
        }
    }
    derive_weights_from_means(&means)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightSource<'a> {
    /// A built-in table by name; currently only [`BUILTIN_TABLE`].
    Builtin(&'a str),
    /// CSV document with header `group_id,weight`.
    Csv(&'a str),
}

fn parse_weight_csv(document: &str) -> Result<Vec<(u32, f64)>, WeightError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(document.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| WeightError::Csv {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| WeightError::Csv {
                line: 1,
                message: format!("missing column {name:?}"),
            })
    };
    let (c_group, c_weight) = (col("group_id")?, col("weight")?);
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| WeightError::Csv {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let field = |c: usize| row.get(c).unwrap_or("");
        let group: u32 = field(c_group).parse().map_err(|_| WeightError::Csv {
            line,
            message: format!("invalid group_id {:?}", field(c_group)),
        })?;
        let weight: f64 = field(c_weight).parse().map_err(|_| WeightError::Csv {
            line,
            message: format!("invalid weight {:?}", field(c_weight)),
        })?;
        out.push((group, weight));
    }
    Ok(out)
}

/// Loads a manual weight table, one weight per schema group.
///
/// The raw values must be nonnegative and sum to 1 within
/// [`MANUAL_SUM_TOLERANCE`]; they are then renormalized exactly and kept in
/// [`WeightVector::raw_weights`].
pub fn load_weight_table(
    source: WeightSource<'_>,
    schema: &QuestionnaireSchema,
) -> Result<WeightVector, WeightError> {
    let (entries, origin) = match source {
        WeightSource::Builtin(name) if name == BUILTIN_TABLE => {
            (PUBLISHED_WEIGHTS.to_vec(), BUILTIN_TABLE.to_string())
        }
        WeightSource::Builtin(name) => return Err(WeightError::UnknownBuiltin(name.to_string())),
        WeightSource::Csv(doc) => (parse_weight_csv(doc)?, "weight file".to_string()),
    };

    let mut raw = BTreeMap::new();
    for (g, w) in entries {
        if schema.group(g).is_none() {
            return Err(WeightError::ExtraGroup(g));
        }
        if raw.insert(g, w).is_some() {
            return Err(WeightError::DuplicateGroup(g));
        }
    }
    if let Some(g) = schema.group_ids().find(|g| !raw.contains_key(g)) {
        return Err(WeightError::MissingGroup(g));
    }
    let weights = renormalize(&raw)?;
    let sum: f64 = raw.values().sum();
    if (sum - 1.0).abs() > MANUAL_SUM_TOLERANCE {
        return Err(WeightError::SumOutOfTolerance {
            sum,
            tolerance: MANUAL_SUM_TOLERANCE,
        });
    }

    let listed: Vec<String> = raw.iter().map(|(g, w)| format!("{g}={w}")).collect();
    Ok(WeightVector {
        weights,
        strategy: WeightStrategy::Manual,
        source_note: format!(
            "{origin}: raw sum {sum:.4} renormalized to 1; raw {}",
            listed.join(" ")
        ),
        raw: Some(raw),
    })
}

/// Average (fractional) ranks, 1 = largest value.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Competition ranks (1,2,2,4), 1 = largest value.
fn competition_ranks(values: &[f64]) -> Vec<usize> {
    values
        .iter()
        .map(|v| 1 + values.iter().filter(|w| *w > v).count())
        .collect()
}

/// Spearman rank correlation with average ranks for ties.
///
/// `None` when a side has no rank variance, unless both rank vectors are
/// identical (then 1).
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len(), "spearman inputs differ in length");
    if x.is_empty() {
        return None;
    }
    let (rx, ry) = (average_ranks(x), average_ranks(y));
    if rx == ry {
        return Some(1.0);
    }
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let mut cov = 0.0;
    let (mut vx, mut vy) = (0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        cov += (a - mx) * (b - my);
        vx += (a - mx) * (a - mx);
        vy += (b - my) * (b - my);
    }
    if vx == 0.0 || vy == 0.0 {
        return None;
    }
    Some((cov / (vx * vy).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub group_id: u32,
    pub a: f64,
    pub b: f64,
    /// `a - b`
    pub difference: f64,
    pub rank_a: usize,
    pub rank_b: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightComparison {
    pub strategy_a: WeightStrategy,
    pub strategy_b: WeightStrategy,
    /// Ordered by group id.
    pub rows: Vec<ComparisonRow>,
    pub rank_correlation: Option<f64>,
    pub top_a: u32,
    pub top_b: u32,
}

impl WeightComparison {
    pub fn same_top(&self) -> bool {
        self.top_a == self.top_b
    }

    pub fn max_abs_difference(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.difference.abs())
            .fold(0.0, f64::max)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "a: {}  b: {}\n{:<7}{:>9}{:>9}{:>10}{:>8}{:>8}\n",
            self.strategy_a, self.strategy_b, "Group", "a", "b", "a - b", "rank a", "rank b"
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{:<7}{:>9.4}{:>9.4}{:>10.4}{:>8}{:>8}\n",
                r.group_id, r.a, r.b, r.difference, r.rank_a, r.rank_b
            ));
        }
        let rho = self
            .rank_correlation
            .map(|r| format!("{r:.4}"))
            .unwrap_or_else(|| "undefined".into());
        out.push_str(&format!(
            "top group: a={} b={}\nSpearman rank correlation: {rho}\n",
            self.top_a, self.top_b
        ));
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("group_id,a,b,difference,rank_a,rank_b\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.group_id, r.a, r.b, r.difference, r.rank_a, r.rank_b
            ));
        }
        let rho = self
            .rank_correlation
            .map(|r| r.to_string())
            .unwrap_or_default();
        out.push_str(&format!("spearman,{rho},,,,\n"));
        out
    }
}

/// Per-group differences, rank positions and Spearman correlation.
pub fn compare_weights(
    a: &WeightVector,
    b: &WeightVector,
) -> Result<WeightComparison, WeightError> {
    if a.weights.keys().ne(b.weights.keys()) {
        return Err(WeightError::GroupMismatch);
    }
    let xa: Vec<f64> = a.weights.values().copied().collect();
    let xb: Vec<f64> = b.weights.values().copied().collect();
    let (ra, rb) = (competition_ranks(&xa), competition_ranks(&xb));
    let rows = a
        .weights
        .keys()
        .enumerate()
        .map(|(i, &g)| ComparisonRow {
            group_id: g,
            a: xa[i],
            b: xb[i],
            difference: xa[i] - xb[i],
            rank_a: ra[i],
            rank_b: rb[i],
        })
        .collect();
    Ok(WeightComparison {
        strategy_a: a.strategy,
        strategy_b: b.strategy,
        rows,
        rank_correlation: spearman(&xa, &xb),
        top_a: a.argmax().ok_or(WeightError::Empty)?,
        top_b: b.argmax().ok_or(WeightError::Empty)?,
    })
}

/// Published group means keyed by group id.
pub fn published_means() -> BTreeMap<u32, f64> {
    PUBLISHED_GROUP_STATS
        .iter()
        .map(|&(g, m, _)| (g, m))
        .collect()
}
