//! Teacher-performance evaluation pipeline built around an expert-validated
//! questionnaire.
//!
//! The stages follow the order in which the instrument was produced and is
//! later used:
//!
//! 1. [`schema`]: the versioned instrument (15 factor groups, 99 rated items)
//!    and its revision audit trail.
//! 2. [`ingest`]: expert profiles, expert ratings and distribution metadata.
//! 3. [`analytics`]: per-group and per-item mean / standard deviation.
//! 4. [`weights`]: group weight vectors (manual table, mean-normalized, uniform).
//! 5. [`scoring`]: two-level weighted summation and competition ranking.
//!
//! [`cli`] wires the stages into the `teval` command.

pub mod analytics;
pub mod cli;
pub mod ingest;
pub mod report;
pub mod schema;
pub mod scoring;
pub mod weights;

pub use analytics::{
    cohort_filter, group_stats, item_stats, CohortFilter, Convention, StatsEntry, StatsSummary,
};
pub use ingest::{
    distribution_summary, parse_profiles, parse_responses, parse_responses_json, parse_sent_counts,
    validate_dataset, Channel, Completeness, DistributionSummary, ExpertProfile, ResponseDataset,
    ResponseRecord,
};
pub use schema::{
    apply_revisions, canonical_schema, parse_schema, replay_revisions, validate_schema,
    FactorGroup, FuzzyScale, Item, ItemId, QuestionnaireSchema, RevisionOp,
};
pub use scoring::{rank, score_group, score_overall, EvaluateeRecord, ScoreCard};
pub use weights::{
    compare_weights, derive_weights_mean, load_weight_table, renormalize, WeightComparison,
    WeightSource, WeightStrategy, WeightVector,
};
