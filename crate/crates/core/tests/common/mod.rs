//! Shared fixtures, generators and independent oracles for the integration
//! suites. The oracles deliberately avoid the engine's code paths.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore};
use teval_core::ingest::{Ratings, RespondentId};
use teval_core::schema::RevisionOp;
use teval_core::{
    canonical_schema, Channel, EvaluateeRecord, FactorGroup, Item, ItemId, QuestionnaireSchema,
    ResponseDataset, ResponseRecord,
};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn read_fixture(name: &str) -> String {
    std::fs::read_to_string(fixture(name)).unwrap()
}

/// Extra items of the synthetic 107-item draft, one per listed group.
pub const DRAFT_EXTRA: [(u32, &str); 8] = [
    (1, "Draft: Sense of humour"),
    (2, "Draft: Use of multimedia"),
    (3, "Draft: Office hours kept"),
    (4, "Draft: Delegation"),
    (7, "Draft: Citation count"),
    (8, "Draft: Conference proceedings"),
    (12, "Draft: Transport facility"),
    (14, "Draft: Recreation needs"),
];

/// Canonical instrument plus eight extra items (107 in total), standing in
/// for the unpublished pre-validation draft. Mirrors
/// `fixtures/draft_schema.json`.
pub fn synthetic_draft() -> QuestionnaireSchema {
    let mut draft = canonical_schema();
    for (g, label) in DRAFT_EXTRA {
        let group = draft.groups.iter_mut().find(|fg| fg.group_id == g).unwrap();
        let ordinal = group.items.len() as u32 + 1;
        group.items.push(Item::new(ItemId::new(g, ordinal), label));
    }
    draft
}

/// Deletions that bring [`synthetic_draft`] back to 99 items.
pub fn draft_deletions(draft: &QuestionnaireSchema) -> Vec<RevisionOp> {
    DRAFT_EXTRA
        .iter()
        .map(|(g, _)| {
            let group = draft.group(*g).unwrap();
            RevisionOp::DeleteItem {
                target: group.items.last().unwrap().item_id,
            }
        })
        .collect()
}

/// Group-level integer dataset of `n` respondents over every schema group.
pub fn random_group_dataset(
    rng: &mut impl RngCore,
    schema: &QuestionnaireSchema,
    n: usize,
) -> ResponseDataset {
    let channels = [Channel::Post, Channel::Email, Channel::ByHand];
    let records = (0..n)
        .map(|i| ResponseRecord {
            respondent_id: RespondentId::from(format!("R{i:03}").as_str()),
            channel: channels[rng.random_range(0..channels.len())],
            ratings: Ratings::Group(
                schema
                    .group_ids()
                    .map(|g| (g, rng.random_range(1..=5u8)))
                    .collect(),
            ),
        })
        .collect();
    ResponseDataset {
        schema_version: schema.version,
        records,
        ..ResponseDataset::default()
    }
}

pub fn shuffled(rng: &mut impl RngCore, ds: &ResponseDataset) -> ResponseDataset {
    let mut out = ds.clone();
    out.records.shuffle(rng);
    out
}

/// Per-group integer ratings in record order.
pub fn group_columns(ds: &ResponseDataset) -> BTreeMap<u32, Vec<i64>> {
    let mut cols: BTreeMap<u32, Vec<i64>> = BTreeMap::new();
    for rec in &ds.records {
        if let Ratings::Group(m) = &rec.ratings {
            for (g, r) in m {
                cols.entry(*g).or_default().push(i64::from(*r));
            }
        }
    }
    cols
}

/// Mean and (sample, population) std from exact integer sums:
/// variance numerator `n·Σx² − (Σx)²` is computed without rounding.
pub fn integer_stats_oracle(values: &[i64]) -> (f64, f64, f64) {
    let n = values.len() as i64;
    let s: i64 = values.iter().sum();
    let q: i64 = values.iter().map(|x| x * x).sum();
    let num = n * q - s * s;
    let mean = s as f64 / n as f64;
    let sample = if n > 1 {
        (num as f64 / (n * (n - 1)) as f64).sqrt()
    } else {
        0.0
    };
    let population = (num as f64 / (n * n) as f64).sqrt();
    (mean, sample, population)
}

/// Plain two-pass mean and std over reals.
pub fn two_pass_oracle(values: &[f64]) -> (f64, f64, f64) {
    let n = values.len() as f64;
    let mut total = 0.0;
    for v in values {
        total += v;
    }
    let mean = total / n;
    let mut ss = 0.0;
    for v in values {
        ss += (v - mean) * (v - mean);
    }
    let sample = if values.len() > 1 {
        (ss / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, sample, (ss / n).sqrt())
}

/// Small schema with `sizes[k]` items in group `k + 1`.
pub fn small_schema(sizes: &[usize]) -> QuestionnaireSchema {
    let base = canonical_schema();
    QuestionnaireSchema {
        version: 1,
        scale: base.scale.clone(),
        groups: sizes
            .iter()
            .enumerate()
            .map(|(k, &size)| {
                let g = k as u32 + 1;
                FactorGroup {
                    group_id: g,
                    name: format!("Group {g}"),
                    items: (1..=size as u32)
                        .map(|o| Item::new(ItemId::new(g, o), format!("Item {g}.{o}")))
                        .collect(),
                }
            })
            .collect(),
        revision_log: Vec::new(),
    }
}

/// Small random scoring instance: schema, raw (unnormalized) positive group
/// weights and `count` evaluatees with continuous ratings in [1, 5].
pub struct Instance {
    pub schema: QuestionnaireSchema,
    pub raw_weights: BTreeMap<u32, f64>,
    pub records: Vec<EvaluateeRecord>,
}

pub fn random_instance(rng: &mut impl RngCore, count: usize) -> Instance {
    let groups = rng.random_range(1..=5usize);
    let sizes: Vec<usize> = (0..groups).map(|_| rng.random_range(1..=6usize)).collect();
    let schema = small_schema(&sizes);
    let raw_weights = schema
        .group_ids()
        .map(|g| (g, rng.random_range(0.01..1.0)))
        .collect();
    let records = (0..count)
        .map(|e| {
            let mut rec = EvaluateeRecord::new(format!("T{e:02}"));
            for (_, item) in schema.items() {
                let r = if rng.random_bool(0.5) {
                    f64::from(rng.random_range(1..=5u8))
                } else {
                    rng.random_range(1.0..=5.0)
                };
                rec.ratings.insert(item.item_id, r);
            }
            rec
        })
        .collect();
    Instance {
        schema,
        raw_weights,
        records,
    }
}

/// Naive double loop: Σ_g (w_g / Σw) · Σ_i r_i / n_g.
pub fn scoring_oracle(
    schema: &QuestionnaireSchema,
    raw_weights: &BTreeMap<u32, f64>,
    record: &EvaluateeRecord,
) -> f64 {
    let mut wsum = 0.0;
    for w in raw_weights.values() {
        wsum += w;
    }
    let mut overall = 0.0;
    for group in &schema.groups {
        let mut inner = 0.0;
        for item in &group.items {
            inner += record.ratings[&item.item_id] / group.items.len() as f64;
        }
        overall += raw_weights[&group.group_id] / wsum * inner;
    }
    overall
}

pub fn seeded(seed: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}

/// Runs the CLI in process; returns (exit code, stdout, stderr).
pub fn run_cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("teval").chain(args.iter().copied());
    let code = teval_core::cli::run(argv, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

pub fn fx(name: &str) -> String {
    fixture(name).to_string_lossy().into_owned()
}

/// One invocation per subcommand over the fixture corpus, all expected to
/// exit 0.
pub fn subcommand_invocations() -> Vec<Vec<String>> {
    let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    let (resp, prof, sent, ratings) = (
        fx("responses.csv"),
        fx("profiles.csv"),
        fx("sent.json"),
        fx("ratings.csv"),
    );
    let (draft, dels, revs, wcsv) = (
        fx("draft_schema.json"),
        fx("draft_deletions.json"),
        fx("revisions.json"),
        fx("weights.csv"),
    );
    vec![
        s(&["schema-validate"]),
        s(&["schema-validate", "--schema", &draft, "--format", "csv"]),
        s(&["schema-revise", "--schema", &draft, "--revisions", &dels]),
        s(&["schema-revise", "--revisions", &revs]),
        s(&[
            "ingest-check",
            "--responses",
            &resp,
            "--profiles",
            &prof,
            "--sent",
            &sent,
        ]),
        s(&[
            "stats",
            "--responses",
            &resp,
            "--schema",
            "builtin",
            "--convention",
            "sample",
        ]),
        s(&[
            "stats",
            "--responses",
            &resp,
            "--convention",
            "population",
            "--format",
            "csv",
        ]),
        s(&[
            "stats",
            "--responses",
            &resp,
            "--profiles",
            &prof,
            "--cohort",
            "gender=female",
        ]),
        s(&["distribution", "--responses", &resp, "--sent", &sent]),
        s(&[
            "distribution",
            "--responses",
            &resp,
            "--sent",
            &sent,
            "--format",
            "csv",
        ]),
        s(&["weights-derive", "--weights", "paper-table-4"]),
        s(&[
            "weights-derive",
            "--weights",
            "mean",
            "--responses",
            &resp,
            "--format",
            "csv",
        ]),
        s(&["weights-derive", "--weights", &wcsv]),
        s(&[
            "weights-compare",
            "--weights",
            "mean",
            "--against",
            "paper-table-4",
            "--responses",
            &resp,
        ]),
        s(&[
            "weights-compare",
            "--weights",
            "uniform",
            "--against",
            "paper-table-4",
            "--format",
            "csv",
        ]),
        s(&["score", "--weights", "paper-table-4", "--ratings", &ratings]),
        s(&[
            "score",
            "--weights",
            "uniform",
            "--ratings",
            &ratings,
            "--format",
            "csv",
        ]),
        s(&[
            "rank-report",
            "--weights",
            "paper-table-4",
            "--ratings",
            &ratings,
        ]),
        s(&[
            "rank-report",
            "--weights",
            &wcsv,
            "--ratings",
            &ratings,
            "--format",
            "csv",
        ]),
    ]
}

/// (label, args, expected exit code) for the three error classes.
pub fn error_invocations() -> Vec<(&'static str, Vec<String>, i32)> {
    let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    vec![
        ("unknown subcommand", s(&["frobnicate"]), 2),
        (
            "unknown flag",
            s(&["stats", "--responses", &fx("responses.csv"), "--bogus"]),
            2,
        ),
        (
            "bad flag value",
            s(&[
                "stats",
                "--responses",
                &fx("responses.csv"),
                "--convention",
                "median",
            ]),
            2,
        ),
        (
            "missing required flag",
            s(&["distribution", "--responses", &fx("responses.csv")]),
            2,
        ),
        (
            "rating out of range",
            s(&["stats", "--responses", &fx("bad_rating.csv")]),
            1,
        ),
        (
            "strict completeness",
            s(&[
                "ingest-check",
                "--responses",
                &fx("incomplete_responses.csv"),
            ]),
            1,
        ),
        (
            "missing input file",
            s(&["stats", "--responses", "/nonexistent/responses.csv"]),
            1,
        ),
        (
            "weight sum out of tolerance",
            s(&["weights-derive", "--weights", &fx("bad_weights.csv")]),
            1,
        ),
        (
            "schema findings",
            s(&["schema-validate", "--schema", &fx("bad_schema.json")]),
            1,
        ),
    ]
}
