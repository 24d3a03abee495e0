//! Weighted-summation scoring and competition ranking of evaluatees.
//!
//! Scores are computed in two levels. Inside a group, item ratings are
//! combined with within-group weights (uniform unless configured). Across
//! groups, the group scores are combined with a [`WeightVector`]. Both weight
//! sets sum to one, so every score is a convex combination of ratings and
//! stays on the 1..5 rating scale.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::Serialize;
use thiserror::Error;

use crate::ingest::Completeness;
use crate::schema::{ItemId, QuestionnaireSchema, SCALE_MAX, SCALE_MIN};
use crate::weights::{WeightVector, SUM_TOLERANCE};

const LOW: f64 = SCALE_MIN as f64;
const HIGH: f64 = SCALE_MAX as f64;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluateeRecord {
    pub evaluatee_id: String,
    /// Integer Likert ratings or continuous composites in `[1, 5]`.
    pub ratings: BTreeMap<ItemId, f64>,
}

impl EvaluateeRecord {
    pub fn new(evaluatee_id: impl Into<String>) -> Self {
        Self {
            evaluatee_id: evaluatee_id.into(),
            ratings: BTreeMap::new(),
        }
    }

    /// Same rating on every schema item.
    pub fn constant(
        evaluatee_id: impl Into<String>,
        schema: &QuestionnaireSchema,
        rating: f64,
    ) -> Self {
        Self {
            evaluatee_id: evaluatee_id.into(),
            ratings: schema.items().map(|(_, i)| (i.item_id, rating)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreCard {
    pub evaluatee_id: String,
    pub group_scores: BTreeMap<u32, f64>,
    /// `Σ_g w_g · group_scores[g]`, in `[1, 5]`.
    pub overall: f64,
    /// `(overall - 1) / 4`, in `[0, 1]`.
    pub normalized: f64,
    /// Set by [`rank`].
    pub rank: Option<u32>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScoreError {
    #[error("no ratings to combine")]
    NoRatings,
    #[error("rating {value} is outside [1, 5]")]
    RatingOutOfRange { value: f64 },
    #[error("within-group weights: {0}")]
    MalformedWithinWeights(String),
    #[error("evaluatee {evaluatee}: item {item} is not rated")]
    MissingRating { evaluatee: String, item: ItemId },
    #[error("evaluatee {evaluatee}: group {group_id} has no rated items")]
    EmptyGroup { evaluatee: String, group_id: u32 },
    #[error("evaluatee {evaluatee}: item {item} is not in the schema")]
    UnknownItem { evaluatee: String, item: ItemId },
    #[error("evaluatee {evaluatee}: item {item} rating {value} is outside [1, 5]")]
    ItemOutOfRange {
        evaluatee: String,
        item: ItemId,
        value: f64,
    },
    #[error("weight vector groups do not match the schema groups")]
    GroupMismatch,
    #[error("duplicate evaluatee_id {0}")]
    DuplicateEvaluatee(String),
    #[error("ratings file line {line}: {message}")]
    Csv { line: u64, message: String },
}

fn in_scale(v: f64) -> bool {
    v.is_finite() && (LOW..=HIGH).contains(&v)
}

/// Convex combination of one group's item ratings.
///
/// `within_weights`, when given, must match `ratings` in length, be
/// nonnegative and sum to one; otherwise the ratings are averaged.
pub fn score_group(ratings: &[f64], within_weights: Option<&[f64]>) -> Result<f64, ScoreError> {
    if ratings.is_empty() {
        return Err(ScoreError::NoRatings);
    }
    if let Some(&value) = ratings.iter().find(|&&r| !in_scale(r)) {
        return Err(ScoreError::RatingOutOfRange { value });
    }
    let lo = ratings.iter().copied().fold(HIGH, f64::min);
    let hi = ratings.iter().copied().fold(LOW, f64::max);
    let raw = match within_weights {
        None => ratings.iter().sum::<f64>() / ratings.len() as f64,
        Some(w) => {
            if w.len() != ratings.len() {
                return Err(ScoreError::MalformedWithinWeights(format!(
                    "{} weights for {} ratings",
                    w.len(),
                    ratings.len()
                )));
            }
            if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
                return Err(ScoreError::MalformedWithinWeights(
                    "weights must be finite and nonnegative".into(),
                ));
            }
            let total: f64 = w.iter().sum();
            if (total - 1.0).abs() > SUM_TOLERANCE {
                return Err(ScoreError::MalformedWithinWeights(format!(
                    "weights sum to {total}, not 1"
                )));
            }
            w.iter().zip(ratings).map(|(w, r)| w * r).sum()
        }
    };
    // A convex combination lies within the rated range; clamp away rounding drift.
    Ok(raw.clamp(lo, hi))
}

/// Scoring configuration beyond the group weight vector.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoringOptions {
    /// Lenient mode scores groups over the items that are rated.
    pub completeness: Completeness,
    /// Per-item weights inside a group. A group listed here must give a
    /// weight to each of its items; unlisted groups use uniform weights.
    pub item_weights: BTreeMap<ItemId, f64>,
}

pub fn score_overall(
    record: &EvaluateeRecord,
    weights: &WeightVector,
    schema: &QuestionnaireSchema,
) -> Result<ScoreCard, ScoreError> {
    score_overall_with(record, weights, schema, &ScoringOptions::default())
}

pub fn score_overall_with(
    record: &EvaluateeRecord,
    weights: &WeightVector,
    schema: &QuestionnaireSchema,
    options: &ScoringOptions,
) -> Result<ScoreCard, ScoreError> {
    if !weights.weights().keys().copied().eq(schema.group_ids()) {
        return Err(ScoreError::GroupMismatch);
    }
    let evaluatee = || record.evaluatee_id.clone();
    for (&item, &value) in &record.ratings {
        if schema.item(item).is_none() {
            return Err(ScoreError::UnknownItem {
                evaluatee: evaluatee(),
                item,
            });
        }
        if !in_scale(value) {
            return Err(ScoreError::ItemOutOfRange {
                evaluatee: evaluatee(),
                item,
                value,
            });
        }
    }

    let mut group_scores = BTreeMap::new();
    for group in &schema.groups {
        let custom = group
            .items
            .iter()
            .any(|i| options.item_weights.contains_key(&i.item_id));
        let mut ratings = Vec::with_capacity(group.items.len());
        let mut within = Vec::with_capacity(group.items.len());
        for item in &group.items {
            let w = options.item_weights.get(&item.item_id).copied();
            if custom && w.is_none() {
                return Err(ScoreError::MalformedWithinWeights(format!(
                    "group {} has no weight for item {}",
                    group.group_id, item.item_id
                )));
            }
            match record.ratings.get(&item.item_id) {
                Some(&r) => {
                    ratings.push(r);
                    within.push(w.unwrap_or(0.0));
                }
                None if options.completeness == Completeness::Strict => {
                    return Err(ScoreError::MissingRating {
                        evaluatee: evaluatee(),
                        item: item.item_id,
                    })
                }
                None => {}
            }
        }
        if ratings.is_empty() {
            return Err(ScoreError::EmptyGroup {
                evaluatee: evaluatee(),
                group_id: group.group_id,
            });
        }
        let score = if custom {
            // Lenient mode may have dropped items; spread their weight proportionally.
            let total: f64 = within.iter().sum();
            if total <= 0.0 {
                return Err(ScoreError::MalformedWithinWeights(format!(
                    "rated items of group {} carry no weight",
                    group.group_id
                )));
            }
            if ratings.len() < group.items.len() {
                within.iter_mut().for_each(|w| *w /= total);
            }
            score_group(&ratings, Some(&within))?
        } else {
            score_group(&ratings, None)?
        };
        group_scores.insert(group.group_id, score);
    }

    let lo = group_scores.values().copied().fold(HIGH, f64::min);
    let hi = group_scores.values().copied().fold(LOW, f64::max);
    let overall = group_scores
        .iter()
        .map(|(g, s)| weights.weights()[g] * s)
        .sum::<f64>()
        .clamp(lo, hi);
    Ok(ScoreCard {
        evaluatee_id: record.evaluatee_id.clone(),
        group_scores,
        overall,
        normalized: (overall - LOW) / (HIGH - LOW),
        rank: None,
    })
}

/// Scores each record independently, in input order.
pub fn score_all(
    records: &[EvaluateeRecord],
    weights: &WeightVector,
    schema: &QuestionnaireSchema,
    options: &ScoringOptions,
) -> Result<Vec<ScoreCard>, ScoreError> {
    records
        .iter()
        .map(|r| score_overall_with(r, weights, schema, options))
        .collect()
}

/// Orders cards by descending overall score, ties by ascending id, and
/// assigns competition ranks (1, 2, 2, 4).
pub fn rank(mut cards: Vec<ScoreCard>) -> Result<Vec<ScoreCard>, ScoreError> {
    let mut seen = HashSet::new();
    for c in &cards {
        if !seen.insert(c.evaluatee_id.as_str()) {
            return Err(ScoreError::DuplicateEvaluatee(c.evaluatee_id.clone()));
        }
    }
    cards.sort_by(|a, b| {
        b.overall
            .total_cmp(&a.overall)
            .then_with(|| a.evaluatee_id.cmp(&b.evaluatee_id))
    });
    let mut prev: Option<(f64, u32)> = None;
    for (pos, card) in cards.iter_mut().enumerate() {
        let r = match prev {
            Some((score, r)) if score == card.overall => r,
            _ => pos as u32 + 1,
        };
        card.rank = Some(r);
        prev = Some((card.overall, r));
    }
    Ok(cards)
}

/// Parses long-form `evaluatee_id,item_id,rating` CSV; records keep the
/// order of each evaluatee's first row.
pub fn parse_evaluatee_ratings(document: &str) -> Result<Vec<EvaluateeRecord>, ScoreError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(document.as_bytes());
    let csv_err = |e: csv::Error| ScoreError::Csv {
        line: e.position().map(|p| p.line()).unwrap_or(0),
        message: e.to_string(),
    };
    let headers = rdr.headers().map_err(csv_err)?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| ScoreError::Csv {
                line: 1,
                message: format!("missing column {name:?}"),
            })
    };
    let (c_id, c_item, c_rating) = (col("evaluatee_id")?, col("item_id")?, col("rating")?);

    let mut records: Vec<EvaluateeRecord> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for row in rdr.records() {
        let row = row.map_err(csv_err)?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let bad = |message: String| ScoreError::Csv { line, message };
        let field = |c: usize| row.get(c).unwrap_or("");
        let id = field(c_id);
        if id.is_empty() {
            return Err(bad("missing evaluatee_id".into()));
        }
        let item: ItemId = field(c_item).parse().map_err(|e| bad(format!("{e}")))?;
        let rating: f64 = field(c_rating)
            .parse()
            .map_err(|_| bad(format!("invalid rating {:?}", field(c_rating))))?;
        if !in_scale(rating) {
            return Err(bad(format!(
                "rating {rating} for item {item} is outside [1, 5]"
            )));
        }
        let idx = *index.entry(id.to_string()).or_insert_with(|| {
            records.push(EvaluateeRecord::new(id));
            records.len() - 1
        });
        if records[idx].ratings.insert(item, rating).is_some() {
            return Err(bad(format!("{id} rates item {item} more than once")));
        }
    }
    Ok(records)
}

/// `evaluatee_id,group_1..group_G,overall,normalized,rank`
pub fn scorecards_csv(cards: &[ScoreCard], schema: &QuestionnaireSchema) -> String {
    let mut out = String::from("evaluatee_id");
    for g in schema.group_ids() {
        out.push_str(&format!(",group_{g}"));
    }
    out.push_str(",overall,normalized,rank\n");
    for c in cards {
        out.push_str(&c.evaluatee_id);
        for g in schema.group_ids() {
            out.push_str(&format!(
                ",{:.6}",
                c.group_scores.get(&g).copied().unwrap_or(f64::NAN)
            ));
        }
        let rank = c.rank.map(|r| r.to_string()).unwrap_or_default();
        out.push_str(&format!(",{:.6},{:.6},{rank}\n", c.overall, c.normalized));
    }
    out
}

pub fn leaderboard_text(cards: &[ScoreCard]) -> String {
    let width = cards
        .iter()
        .map(|c| c.evaluatee_id.chars().count())
        .chain(std::iter::once(9))
        .max()
        .unwrap_or(9);
    let mut out = format!(
        "{:<6}{:<width$}  {:>8}  {:>10}\n",
        "Rank", "Evaluatee", "Overall", "Normalized"
    );
    for c in cards {
        let rank = c.rank.map(|r| r.to_string()).unwrap_or_else(|| "-".into());
        out.push_str(&format!(
            "{:<6}{:<width$}  {:>8.4}  {:>10.4}\n",
            rank, c.evaluatee_id, c.overall, c.normalized
        ));
    }
    out
}
