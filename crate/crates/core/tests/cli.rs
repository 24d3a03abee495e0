mod common;

use common::{fx, read_fixture, run_cli};
use teval_core::cli::{EXIT_DATA, EXIT_OK, EXIT_USAGE};
use teval_core::{
    canonical_schema, group_stats, parse_responses, parse_schema, Completeness, Convention,
};

#[test]
fn stats_report_agrees_with_library() {
    let (code, out, _) = run_cli(&[
        "stats",
        "--responses",
        &fx("responses.csv"),
        "--schema",
        "builtin",
        "--convention",
        "sample",
    ]);
    assert_eq!(code, EXIT_OK);
    let schema = canonical_schema();
    let ds = parse_responses(&read_fixture("responses.csv"), &schema).unwrap();
    let stats = group_stats(&ds, &schema, Convention::Sample, Completeness::Strict).unwrap();
    assert_eq!(out, stats.to_text());
    assert!(out.starts_with("Total Responses N: 25"));
    assert!(out.contains("PERSONAL ABILITIES") && out.contains("4.48") && out.contains("0.653"));
}

#[test]
fn stats_csv_rows_match_oracle() {
    let (code, out, _) = run_cli(&[
        "stats",
        "--responses",
        &fx("responses.csv"),
        "--convention",
        "population",
        "--format",
        "csv",
    ]);
    assert_eq!(code, EXIT_OK);
    let schema = canonical_schema();
    let ds = parse_responses(&read_fixture("responses.csv"), &schema).unwrap();
    let cols = common::group_columns(&ds);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("key,n,mean,std_dev,min,max"));
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        let g: u32 = f[0].parse().unwrap();
        let (mean, _, pop) = common::integer_stats_oracle(&cols[&g]);
        assert!((f[2].parse::<f64>().unwrap() - mean).abs() <= 1e-12);
        assert!((f[3].parse::<f64>().unwrap() - pop).abs() <= 1e-12);
    }
}

#[test]
fn distribution_reproduces_published_rates() {
    let (code, out, _) = run_cli(&[
        "distribution",
        "--responses",
        &fx("responses.csv"),
        "--sent",
        &fx("sent.json"),
    ]);
    assert_eq!(code, EXIT_OK);
    for rate in ["20.00", "28.57", "56.25", "28.73"] {
        assert!(out.contains(rate), "{rate} missing from\n{out}");
    }
}

#[test]
fn all_fives_score_five() {
    let (code, out, _) = run_cli(&[
        "score",
        "--weights",
        "paper-table-4",
        "--ratings",
        &fx("all_fives.csv"),
        "--format",
        "csv",
    ]);
    assert_eq!(code, EXIT_OK);
    let lines: Vec<&str> = out.lines().skip(1).collect();
    assert_eq!(lines.len(), 3);
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        let n = f.len();
        assert_eq!(f[n - 3], "5.000000");
        assert_eq!(f[n - 2], "1.000000");
        assert_eq!(f[n - 1], "");
    }
}

#[test]
fn rank_report_assigns_ranks() {
    let (code, out, _) = run_cli(&[
        "rank-report",
        "--weights",
        "paper-table-4",
        "--ratings",
        &fx("all_fives.csv"),
    ]);
    assert_eq!(code, EXIT_OK);
    let ranks: Vec<&str> = out
        .lines()
        .skip(1)
        .map(|l| l.split_whitespace().next().unwrap())
        .collect();
    assert_eq!(ranks, ["1", "1", "1"]);
}

#[test]
fn schema_revise_reduces_draft_to_99_items() {
    let (code, out, _) = run_cli(&[
        "schema-revise",
        "--schema",
        &fx("draft_schema.json"),
        "--revisions",
        &fx("draft_deletions.json"),
    ]);
    assert_eq!(code, EXIT_OK);
    let schema = parse_schema(&out).unwrap();
    assert_eq!((schema.version, schema.item_count()), (2, 99));
    assert_eq!(schema.revision_log.len(), 8);
}

#[test]
fn weights_compare_reports_divergent_tops() {
    let (code, out, _) = run_cli(&[
        "weights-compare",
        "--weights",
        "uniform",
        "--against",
        "paper-table-4",
    ]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("top group: a=1 b=7"));
}

#[test]
fn cohort_without_profiles_is_a_data_error() {
    let (code, _, err) = run_cli(&[
        "stats",
        "--responses",
        &fx("responses.csv"),
        "--cohort",
        "gender=female",
    ]);
    assert_eq!(code, EXIT_DATA);
    assert!(err.contains("--profiles"));
}

#[test]
fn lenient_downgrades_missing_ratings() {
    let args = [
        "ingest-check",
        "--responses",
        &fx("incomplete_responses.csv"),
    ];
    assert_eq!(run_cli(&args).0, EXIT_DATA);
    let (code, out, _) = run_cli(&[&args[..], &["--lenient"]].concat());
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("warning"));
}

#[test]
fn out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("weights.csv");
    let (code, out, _) = run_cli(&[
        "weights-derive",
        "--weights",
        "paper-table-4",
        "--format",
        "csv",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK);
    assert!(out.is_empty());
    assert!(std::fs::read_to_string(&path)
        .unwrap()
        .starts_with("group_id,weight\n"));
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(run_cli(&["--help"]).0, EXIT_OK);
    assert_eq!(run_cli(&["--version"]).0, EXIT_OK);
    assert_eq!(run_cli(&[]).0, EXIT_USAGE);
}

#[test]
fn error_classes_map_to_exit_codes() {
    for (label, args, want) in common::error_invocations() {
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        let (code, _, err) = run_cli(&refs);
        assert_eq!(code, want, "{label}: {err}");
        assert!(!err.is_empty(), "{label}: no diagnostic");
    }
}

#[test]
fn every_subcommand_succeeds_on_fixtures() {
    for args in common::subcommand_invocations() {
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        let (code, out, err) = run_cli(&refs);
        assert_eq!(code, EXIT_OK, "{args:?}: {err}");
        assert!(!out.is_empty(), "{args:?}");
    }
}

#[test]
fn binary_matches_in_process_run() {
    let args = [
        "distribution",
        "--responses",
        &fx("responses.csv"),
        "--sent",
        &fx("sent.json"),
    ];
    let output = std::process::Command::new(env!("CARGO_BIN_EXE_teval"))
        .args(args)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(EXIT_OK));
    assert_eq!(String::from_utf8(output.stdout).unwrap(), run_cli(&args).1);
    let bad = std::process::Command::new(env!("CARGO_BIN_EXE_teval"))
        .arg("nope")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(EXIT_USAGE));
}
