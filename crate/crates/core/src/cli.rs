//! The `teval` command line.
//!
//! Exit codes: 0 success, 1 data or validation failure (including I/O),
//! 2 usage error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::analytics::{cohort_filter, group_stats, item_stats, CohortFilter, Convention};
use crate::ingest::{
    distribution_summary, parse_profiles, parse_responses, parse_responses_json, parse_sent_counts,
    validate_dataset, Completeness, ResponseDataset,
};
use crate::report::ValidationReport;
use crate::schema::{
    apply_revisions, canonical_schema, parse_schema, parse_schema_unchecked, validate_schema,
    QuestionnaireSchema, RevisionOp,
};
use crate::scoring::{
    leaderboard_text, parse_evaluatee_ratings, rank, score_all, scorecards_csv, ScoringOptions,
};
use crate::weights::{
    compare_weights, derive_weights_mean, load_weight_table, WeightSource, WeightVector,
    BUILTIN_TABLE,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DATA: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "teval",
    version,
    about = "Questionnaire-based teacher evaluation pipeline"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ConventionArg {
    Sample,
    Population,
}

impl From<ConventionArg> for Convention {
    fn from(c: ConventionArg) -> Self {
        match c {
            ConventionArg::Sample => Convention::Sample,
            ConventionArg::Population => Convention::Population,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Level {
    Group,
    Item,
}

#[derive(Debug, Args)]
struct Common {
    /// Schema file, or `builtin` for the canonical instrument
    #[arg(long, default_value = "builtin")]
    schema: String,
    /// Treat missing ratings as warnings instead of failures
    #[arg(long)]
    lenient: bool,
    /// Write the report here instead of standard output
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

impl Common {
    fn completeness(&self) -> Completeness {
        if self.lenient {
            Completeness::Lenient
        } else {
            Completeness::Strict
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a schema against every schema invariant
    SchemaValidate {
        #[command(flatten)]
        common: Common,
    },
    /// Apply a JSON list of revisions and emit the next schema version
    SchemaRevise {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        revisions: PathBuf,
    },
    /// Parse and validate responses, profiles and sent counts
    IngestCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        responses: PathBuf,
        #[arg(long)]
        profiles: Option<PathBuf>,
        #[arg(long)]
        sent: Option<PathBuf>,
    },
    /// Per-group or per-item mean and standard deviation
    Stats {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        responses: PathBuf,
        #[arg(long)]
        profiles: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = ConventionArg::Sample)]
        convention: ConventionArg,
        #[arg(long, value_enum, default_value_t = Level::Group)]
        level: Level,
        /// Profile constraints, e.g. `specialty=education,region=sindh`
        #[arg(long)]
        cohort: Option<String>,
    },
    /// Questionnaire distribution and response rates
    Distribution {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        responses: PathBuf,
        #[arg(long)]
        sent: PathBuf,
    },
    /// Build a group weight vector
    WeightsDerive {
        #[command(flatten)]
        common: Common,
        /// `paper-table-4`, `uniform`, `mean` (needs --responses) or a CSV path
        #[arg(long)]
        weights: String,
        #[arg(long)]
        responses: Option<PathBuf>,
    },
    /// Compare two weight vectors
    WeightsCompare {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        weights: String,
        #[arg(long)]
        against: String,
        #[arg(long)]
        responses: Option<PathBuf>,
    },
    /// Score evaluatees (unranked scorecards)
    Score {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        weights: String,
        #[arg(long)]
        ratings: PathBuf,
        #[arg(long)]
        responses: Option<PathBuf>,
    },
    /// Score and rank evaluatees
    RankReport {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        weights: String,
        #[arg(long)]
        ratings: PathBuf,
        #[arg(long)]
        responses: Option<PathBuf>,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::SchemaValidate { common }
            | Command::SchemaRevise { common, .. }
            | Command::IngestCheck { common, .. }
            | Command::Stats { common, .. }
            | Command::Distribution { common, .. }
            | Command::WeightsDerive { common, .. }
            | Command::WeightsCompare { common, .. }
            | Command::Score { common, .. }
            | Command::RankReport { common, .. } => common,
        }
    }
}

struct Outcome {
    report: String,
    /// Diagnostics for standard error.
    notes: Vec<String>,
    passed: bool,
}

impl Outcome {
    fn ok(report: String) -> Self {
        Self {
            report,
            notes: Vec::new(),
            passed: true,
        }
    }
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn load_schema(spec: &str) -> anyhow::Result<QuestionnaireSchema> {
    if spec == "builtin" {
        return Ok(canonical_schema());
    }
    let text = read(Path::new(spec))?;
    parse_schema(&text).with_context(|| format!("invalid schema {spec}"))
}

fn load_responses(path: &Path, schema: &QuestionnaireSchema) -> anyhow::Result<ResponseDataset> {
    let text = read(path)?;
    let is_json = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let parsed = if is_json {
        parse_responses_json(&text, schema)
    } else {
        parse_responses(&text, schema)
    };
    parsed.with_context(|| format!("invalid responses {}", path.display()))
}

fn attach_profiles(
    dataset: ResponseDataset,
    path: Option<&Path>,
    notes: &mut Vec<String>,
) -> anyhow::Result<ResponseDataset> {
    let Some(path) = path else {
        return Ok(dataset);
    };
    let parsed = parse_profiles(&read(path)?)
        .with_context(|| format!("invalid profiles {}", path.display()))?;
    notes.extend(parsed.warnings.into_iter().map(|w| format!("warning: {w}")));
    Ok(dataset.with_profiles(parsed.profiles)?)
}

fn resolve_weights(
    spec: &str,
    schema: &QuestionnaireSchema,
    responses: Option<&Path>,
    completeness: Completeness,
) -> anyhow::Result<WeightVector> {
    match spec {
        BUILTIN_TABLE => Ok(load_weight_table(WeightSource::Builtin(spec), schema)?),
        "uniform" => Ok(WeightVector::uniform(schema)?),
        "mean" => {
            let path = responses.ok_or_else(|| anyhow!("--weights mean needs --responses"))?;
            let dataset = load_responses(path, schema)?;
            let stats = group_stats(&dataset, schema, Convention::Sample, completeness)?;
            Ok(derive_weights_mean(&stats)?)
        }
        path => {
            let text = read(Path::new(path))?;
            load_weight_table(WeightSource::Csv(&text), schema)
                .with_context(|| format!("invalid weight table {path}"))
        }
    }
}

fn findings_csv(report: &ValidationReport) -> String {
    let mut out = String::from("kind,severity,location,message\n");
    for f in &report.findings {
        let kind = serde_json::to_value(f.kind).unwrap_or_default();
        let severity = serde_json::to_value(f.severity).unwrap_or_default();
        out.push_str(&format!(
            "{},{},\"{}\",\"{}\"\n",
            kind.as_str().unwrap_or_default(),
            severity.as_str().unwrap_or_default(),
            f.location.replace('"', "\"\""),
            f.message.replace('"', "\"\"")
        ));
    }
    out
}

fn render_findings(report: &ValidationReport, format: Format) -> String {
    match format {
        Format::Text => report.to_text(),
        Format::Csv => findings_csv(report),
    }
}

fn execute(command: &Command) -> anyhow::Result<Outcome> {
    let common = command.common();
    let format = common.format;
    let completeness = common.completeness();

    match command {
        Command::SchemaValidate { .. } => {
            let schema = if common.schema == "builtin" {
                canonical_schema()
            } else {
                let path = Path::new(&common.schema);
                parse_schema_unchecked(&read(path)?)
                    .with_context(|| format!("unreadable schema {}", path.display()))?
            };
            let report = validate_schema(&schema);
            let mut text = render_findings(&report, format);
            if format == Format::Text {
                text = format!(
                    "schema version {}: {} groups, {} items\n{text}",
                    schema.version,
                    schema.group_count(),
                    schema.item_count()
                );
            }
            Ok(Outcome {
                passed: report.passes(),
                report: text,
                notes: Vec::new(),
            })
        }
        Command::SchemaRevise { revisions, .. } => {
            let schema = load_schema(&common.schema)?;
            let ops: Vec<RevisionOp> = serde_json::from_str(&read(revisions)?)
                .with_context(|| format!("invalid revision list {}", revisions.display()))?;
            let next = apply_revisions(&schema, &ops)?;
            Ok(Outcome::ok(next.to_json()))
        }
        Command::IngestCheck {
            responses,
            profiles,
            sent,
            ..
        } => {
            let schema = load_schema(&common.schema)?;
            let mut notes = Vec::new();
            let mut dataset = load_responses(responses, &schema)?;
            dataset = attach_profiles(dataset, profiles.as_deref(), &mut notes)?;
            if let Some(sent) = sent {
                dataset = dataset.with_sent_counts(parse_sent_counts(&read(sent)?)?);
            }
            let report = validate_dataset(&dataset, &schema, completeness);
            let mut text = render_findings(&report, format);
            if format == Format::Text {
                text = format!(
                    "{} records, {} profiles\n{text}",
                    dataset.records.len(),
                    dataset.profiles.len()
                );
            }
            Ok(Outcome {
                report: text,
                notes,
                passed: report.passes(),
            })
        }
        Command::Stats {
            responses,
            profiles,
            convention,
            level,
            cohort,
            ..
        } => {
            let schema = load_schema(&common.schema)?;
            let mut notes = Vec::new();
            let mut dataset = load_responses(responses, &schema)?;
            dataset = attach_profiles(dataset, profiles.as_deref(), &mut notes)?;
            if let Some(spec) = cohort {
                if profiles.is_none() {
                    bail!("--cohort needs --profiles");
                }
                dataset = cohort_filter(&dataset, &CohortFilter::parse(spec)?);
                notes.extend(dataset.notes.iter().map(|n| format!("note: {n}")));
            }
            let convention = Convention::from(*convention);
            let stats = match level {
                Level::Group => group_stats(&dataset, &schema, convention, completeness)?,
                Level::Item => item_stats(&dataset, &schema, convention, completeness)?,
            };
            Ok(Outcome {
                report: match format {
                    Format::Text => stats.to_text(),
                    Format::Csv => stats.to_csv(),
                },
                notes,
                passed: true,
            })
        }
        Command::Distribution {
            responses, sent, ..
        } => {
            let schema = load_schema(&common.schema)?;
            let dataset = load_responses(responses, &schema)?
                .with_sent_counts(parse_sent_counts(&read(sent)?)?);
            let summary = distribution_summary(&dataset)?;
            Ok(Outcome::ok(match format {
                Format::Text => summary.to_text(),
                Format::Csv => summary.to_csv(),
            }))
        }
        Command::WeightsDerive {
            weights, responses, ..
        } => {
            let schema = load_schema(&common.schema)?;
            let w = resolve_weights(weights, &schema, responses.as_deref(), completeness)?;
            Ok(Outcome::ok(match format {
                Format::Text => w.to_text(Some(&schema)),
                Format::Csv => w.to_csv(),
            }))
        }
        Command::WeightsCompare {
            weights,
            against,
            responses,
            ..
        } => {
            let schema = load_schema(&common.schema)?;
            let a = resolve_weights(weights, &schema, responses.as_deref(), completeness)?;
            let b = resolve_weights(against, &schema, responses.as_deref(), completeness)?;
            let cmp = compare_weights(&a, &b)?;
            Ok(Outcome::ok(match format {
                Format::Text => cmp.to_text(),
                Format::Csv => cmp.to_csv(),
            }))
        }
        Command::Score {
            weights,
            ratings,
            responses,
            ..
        }
        | Command::RankReport {
            weights,
            ratings,
            responses,
            ..
        } => {
            let schema = load_schema(&common.schema)?;
            let w = resolve_weights(weights, &schema, responses.as_deref(), completeness)?;
            let records = parse_evaluatee_ratings(&read(ratings)?)
                .with_context(|| format!("invalid ratings {}", ratings.display()))?;
            let options = ScoringOptions {
                completeness,
                ..Default::default()
            };
            let mut cards = score_all(&records, &w, &schema, &options)?;
            if matches!(command, Command::RankReport { .. }) {
                cards = rank(cards)?;
            }
            Ok(Outcome::ok(match format {
                Format::Text => leaderboard_text(&cards),
                Format::Csv => scorecards_csv(&cards, &schema),
            }))
        }
    }
}

/// Runs one invocation and returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{e}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(stderr, "{e}");
                    EXIT_USAGE
                }
            };
        }
    };

    let outcome = match execute(&cli.command) {
        Ok(o) => o,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e:#}");
            return EXIT_DATA;
        }
    };
    for note in &outcome.notes {
        let _ = writeln!(stderr, "{note}");
    }
    match &cli.command.common().out {
        Some(path) => {
            if let Err(e) = fs::write(path, &outcome.report) {
                let _ = writeln!(stderr, "error: cannot write {}: {e}", path.display());
                return EXIT_DATA;
            }
        }
        None => {
            if let Err(e) = stdout.write_all(outcome.report.as_bytes()) {
                let _ = writeln!(stderr, "error: cannot write report: {e}");
                return EXIT_DATA;
            }
        }
    }
    if outcome.passed {
        EXIT_OK
    } else {
        let _ = writeln!(stderr, "error: validation findings present, see report");
        EXIT_DATA
    }
}
