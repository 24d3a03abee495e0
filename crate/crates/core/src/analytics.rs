//! Descriptive statistics over response datasets.
//!
//! Group statistics take group-level ratings as they are. An item-level
//! record is first collapsed to one value per group: the unweighted mean of
//! that respondent's item ratings in the group.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{
    AdminRole, Completeness, Designation, ExpertProfile, Gender, Qualification, Ratings, Region,
    ResponseDataset, Specialty,
};
use crate::report::fmt_half_up;
use crate::schema::{ItemId, QuestionnaireSchema};

/// Standard deviation divisor: `n - 1` (sample) or `n` (population).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    #[default]
    Sample,
    Population,
}

impl Convention {
    pub fn as_str(self) -> &'static str {
        match self {
            Convention::Sample => "sample",
            Convention::Population => "population",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum StatsKey {
    Group(u32),
    Item(ItemId),
}

impl fmt::Display for StatsKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StatsKey::Group(g) => write!(f, "{g}"),
            StatsKey::Item(i) => write!(f, "{i}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsEntry {
    pub key: StatsKey,
    /// Group name or item label from the schema.
    pub label: String,
    pub n: usize,
    pub mean: f64,
    pub std_dev: f64,
    /// Collapsed item means can be fractional, so extremes are reals.
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsSummary {
    /// Schema order.
    pub entries: Vec<StatsEntry>,
    pub convention: Convention,
    pub n_total: usize,
}

impl StatsSummary {
    pub fn entry(&self, key: StatsKey) -> Option<&StatsEntry> {
        self.entries.iter().find(|e| e.key == key)
    }

    pub fn group(&self, group_id: u32) -> Option<&StatsEntry> {
        self.entry(StatsKey::Group(group_id))
    }

    /// Aligned table: means at 2 decimals, standard deviations at 3.
    pub fn to_text(&self) -> String {
        let width = self
            .entries
            .iter()
            .map(|e| e.label.chars().count())
            .chain(std::iter::once(22))
            .max()
            .unwrap_or(22);
        let mut out = format!(
            "Total Responses N: {} ({} standard deviation)\n",
            self.n_total,
            self.convention.as_str()
        );
        out.push_str(&format!(
            "{:<width$}  {:>4}  {:>6}  {:>18}\n",
            "Main Groups of Factors", "n", "Mean", "Standard Deviation"
        ));
        for e in &self.entries {
            out.push_str(&format!(
                "{:<width$}  {:>4}  {:>6}  {:>18}\n",
                e.label,
                e.n,
                fmt_half_up(e.mean, 2),
                fmt_half_up(e.std_dev, 3)
            ));
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("key,n,mean,std_dev,min,max\n");
        for e in &self.entries {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                e.key, e.n, e.mean, e.std_dev, e.min, e.max
            ));
        }
        out
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AnalyticsError {
    #[error("dataset has no records")]
    EmptyDataset,
    #[error("respondent {respondent} has no rating for {key} (strict completeness)")]
    MissingRating { respondent: String, key: String },
    #[error("no ratings contribute to {key}")]
    NoRatings { key: String },
    #[error("dataset holds only group-level records; item statistics need item-level ratings")]
    GroupLevelOnly,
}

/// (mean, std_dev, min, max) of a nonempty sample.
pub(crate) fn describe(values: &[f64], convention: Convention) -> (f64, f64, f64, f64) {
    debug_assert!(!values.is_empty());
    let n = values.len() as f64;
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if min == max {
        return (min, 0.0, min, max);
    }
    let mean = (values.iter().sum::<f64>() / n).clamp(min, max);
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    let divisor = match convention {
        Convention::Sample => n - 1.0,
        Convention::Population => n,
    };
    (mean, (ss / divisor).sqrt(), min, max)
}

fn entry(
    key: StatsKey,
    label: &str,
    values: &[f64],
    convention: Convention,
) -> Result<StatsEntry, AnalyticsError> {
    if values.is_empty() {
        return Err(AnalyticsError::NoRatings {
            key: key.to_string(),
        });
    }
    let (mean, std_dev, min, max) = describe(values, convention);
    Ok(StatsEntry {
        key,
        label: label.to_string(),
        n: values.len(),
        mean,
        std_dev,
        min,
        max,
    })
}

/// One entry per schema group, in schema order.
pub fn group_stats(
    dataset: &ResponseDataset,
    schema: &QuestionnaireSchema,
    convention: Convention,
    completeness: Completeness,
) -> Result<StatsSummary, AnalyticsError> {
    if dataset.records.is_empty() {
        return Err(AnalyticsError::EmptyDataset);
    }
    let strict = completeness == Completeness::Strict;
    let mut entries = Vec::with_capacity(schema.group_count());
    for group in &schema.groups {
        let mut values = Vec::with_capacity(dataset.records.len());
        for rec in &dataset.records {
            match &rec.ratings {
                Ratings::Group(m) => match m.get(&group.group_id) {
                    Some(&r) => values.push(f64::from(r)),
                    None if strict => {
                        return Err(AnalyticsError::MissingRating {
                            respondent: rec.respondent_id.to_string(),
                            key: group.group_id.to_string(),
                        })
                    }
                    None => {}
                },
                Ratings::Item(m) => {
                    let mut sum = 0.0;
                    let mut count = 0usize;
                    for item in &group.items {
                        match m.get(&item.item_id) {
                            Some(&r) => {
                                sum += f64::from(r);
                                count += 1;
                            }
                            None if strict => {
                                return Err(AnalyticsError::MissingRating {
                                    respondent: rec.respondent_id.to_string(),
                                    key: item.item_id.to_string(),
                                })
                            }
                            None => {}
                        }
                    }
                    if count > 0 {
                        values.push(sum / count as f64);
                    }
                }
            }
        }
        entries.push(entry(
            StatsKey::Group(group.group_id),
            &group.name,
            &values,
            convention,
        )?);
    }
    Ok(StatsSummary {
        entries,
        convention,
        n_total: dataset.records.len(),
    })
}

/// One entry per schema item, over item-level records only.
pub fn item_stats(
    dataset: &ResponseDataset,
    schema: &QuestionnaireSchema,
    convention: Convention,
    completeness: Completeness,
) -> Result<StatsSummary, AnalyticsError> {
    if dataset.records.is_empty() {
        return Err(AnalyticsError::EmptyDataset);
    }
    let item_records: Vec<_> = dataset
        .records
        .iter()
        .filter_map(|r| match &r.ratings {
            Ratings::Item(m) => Some((r, m)),
            Ratings::Group(_) => None,
        })
        .collect();
    if item_records.is_empty() {
        return Err(AnalyticsError::GroupLevelOnly);
    }
    let mut entries = Vec::with_capacity(schema.item_count());
    for (_, item) in schema.items() {
        let mut values = Vec::with_capacity(item_records.len());
        for (rec, m) in &item_records {
            match m.get(&item.item_id) {
                Some(&r) => values.push(f64::from(r)),
                None if completeness == Completeness::Strict => {
                    return Err(AnalyticsError::MissingRating {
                        respondent: rec.respondent_id.to_string(),
                        key: item.item_id.to_string(),
                    })
                }
                None => {}
            }
        }
        entries.push(entry(
            StatsKey::Item(item.item_id),
            &item.label,
            &values,
            convention,
        )?);
    }
    Ok(StatsSummary {
        entries,
        convention,
        n_total: item_records.len(),
    })
}

/// Profile-attribute constraints; every set field must match.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CohortFilter {
    pub gender: Option<Gender>,
    pub designation: Option<Designation>,
    pub qualification: Option<Qualification>,
    /// Profile must list this administrative role.
    pub admin_experience: Option<AdminRole>,
    pub specialty: Option<Specialty>,
    pub region: Option<Region>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("invalid cohort constraint {0:?}")]
pub struct CohortParseError(pub String);

impl CohortFilter {
    pub fn is_empty(&self) -> bool {
        *self == CohortFilter::default()
    }

    pub fn matches(&self, p: &ExpertProfile) -> bool {
        self.gender.is_none_or(|v| p.gender == v)
            && self.designation.is_none_or(|v| p.designation == v)
            && self.qualification.is_none_or(|v| p.qualification == v)
            && self
                .admin_experience
                .is_none_or(|v| p.admin_experience.contains(&v))
            && self.specialty.is_none_or(|v| p.specialty == v)
            && self.region.is_none_or(|v| p.region == v)
    }

    /// Parses `attr=value` pairs separated by commas, e.g.
    /// `specialty=education,region=sindh`.
    pub fn parse(spec: &str) -> Result<Self, CohortParseError> {
        let mut f = CohortFilter::default();
        for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let bad = || CohortParseError(part.to_string());
            let (attr, value) = part.split_once('=').ok_or_else(bad)?;
            match attr.trim() {
                "gender" => f.gender = Some(Gender::from_token(value).ok_or_else(bad)?),
                "designation" => {
                    f.designation = Some(Designation::from_token(value).ok_or_else(bad)?)
                }
                "qualification" => {
                    f.qualification = Some(Qualification::from_token(value).ok_or_else(bad)?)
                }
                "admin_experience" => {
                    f.admin_experience = Some(AdminRole::from_token(value).ok_or_else(bad)?)
                }
                "specialty" => f.specialty = Some(Specialty::from_token(value).ok_or_else(bad)?),
                "region" => f.region = Some(Region::from_token(value).ok_or_else(bad)?),
                _ => return Err(bad()),
            }
        }
        Ok(f)
    }
}

impl fmt::Display for CohortFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if let Some(v) = self.gender {
            parts.push(format!("gender={v}"));
        }
        if let Some(v) = self.designation {
            parts.push(format!("designation={v}"));
        }
        if let Some(v) = self.qualification {
            parts.push(format!("qualification={v}"));
        }
        if let Some(v) = self.admin_experience {
            parts.push(format!("admin_experience={v}"));
        }
        if let Some(v) = self.specialty {
            parts.push(format!("specialty={v}"));
        }
        if let Some(v) = self.region {
            parts.push(format!("region={v}"));
        }
        f.write_str(&parts.join(","))
    }
}

/// Keeps exactly the records whose profile satisfies `filter`.
///
/// Records without a profile never match a nonempty filter. Sent counts are
/// carried over unchanged and a note records that they describe the
/// unfiltered distribution.
pub fn cohort_filter(dataset: &ResponseDataset, filter: &CohortFilter) -> ResponseDataset {
    if filter.is_empty() {
        return dataset.clone();
    }
    let records = dataset
        .records
        .iter()
        .filter(|r| {
            dataset
                .profiles
                .get(&r.respondent_id)
                .is_some_and(|p| filter.matches(p))
        })
        .cloned()
        .collect();
    let profiles = dataset
        .profiles
        .iter()
        .filter(|(_, p)| filter.matches(p))
        .map(|(k, p)| (k.clone(), p.clone()))
        .collect();
    let mut notes = dataset.notes.clone();
    notes.push(format!(
        "cohort {filter}: sent counts describe the unfiltered distribution"
    ));
    ResponseDataset {
        schema_version: dataset.schema_version,
        records,
        profiles,
        sent_counts: dataset.sent_counts.clone(),
        notes,
    }
}
