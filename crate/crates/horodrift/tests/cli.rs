//! End-to-end checks of the command-line surface: reproducibility across
//! worker counts, report round-trips, exit codes, and the input file
//! formats.

use horodrift::runner::{parse_args, run};
use std::path::Path;

fn run_tokens(tokens: &[String]) -> horodrift::runner::RunOutcome {
    run(&parse_args(tokens.iter().cloned()).unwrap()).unwrap()
}

fn tokens(cmd: &str, pairs: &[(&str, &str)]) -> Vec<String> {
    std::iter::once(cmd.to_string())
        .chain(pairs.iter().map(|(k, v)| format!("{k}={v}")))
        .collect()
}

#[test]
fn reports_are_byte_identical_across_runs_and_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for (label, workers) in [("a", "1"), ("b", "3"), ("c", "1")] {
        let out = dir.path().join(label).display().to_string();
        let toks = tokens(
            "tiling-speed",
            &[
                ("P", "3"),
                ("Q", "10"),
                ("n", "2000"),
                ("trials", "30"),
                ("seed", "9"),
                ("workers", workers),
                ("out", &out),
            ],
        );
        let outcome = run_tokens(&toks);
        assert_eq!(outcome.exit_code, 0);
        let mut report = std::fs::read(&outcome.report_path).unwrap();
        let csv = std::fs::read(&outcome.csv_path).unwrap();
        // the config echo contains out= and workers=, which differ by
        // design; strip those lines before comparing
        let text = String::from_utf8(report.clone()).unwrap();
        let filtered: String = text
            .lines()
            .filter(|l| !l.contains("\"out\"") && !l.contains("\"workers\""))
            .collect::<Vec<_>>()
            .join("\n");
        report = filtered.into_bytes();
        outputs.push((report, csv));
    }
    assert_eq!(outputs[0].0, outputs[1].0, "reports differ across worker counts");
    assert_eq!(outputs[0].1, outputs[1].1, "checkpoints differ across worker counts");
    assert_eq!(outputs[0].0, outputs[2].0, "reports differ across repeated runs");
    assert_eq!(outputs[0].1, outputs[2].1);
}

#[test]
fn report_flags_round_trip_from_their_own_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("perc").display().to_string();
    let toks = tokens(
        "perc-speed",
        &[
            ("P", "3"),
            ("Q", "10"),
            ("p", "0.9,1.0"),
            ("n", "1000"),
            ("trials", "30"),
            ("minradius", "5"),
            ("seed", "3"),
            ("out", &out),
        ],
    );
    let outcome = run_tokens(&toks);
    let value: serde_json::Value =
        serde_json::from_slice(&std::fs::read(&outcome.report_path).unwrap()).unwrap();
    let rows = value["table"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    for row in rows {
        let speed = row["speed_estimate"].as_f64().unwrap();
        let se = row["std_error"].as_f64().unwrap();
        let bound = row["lower_bound"].as_f64().unwrap();
        let recomputed = speed >= bound - 3.0 * se;
        assert_eq!(row["passed"].as_bool().unwrap(), recomputed);
    }
    // the envelope's flag is the conjunction of the row flags
    let all = rows
        .iter()
        .all(|r| r["passed"].as_bool().unwrap_or(false));
    assert_eq!(value["passed"].as_bool().unwrap(), all);
}

#[test]
fn exit_codes_distinguish_failure_kinds() {
    let dir = tempfile::tempdir().unwrap();

    // config errors
    assert_eq!(
        horodrift::runner::run_cli(["nonsense".to_string()]),
        1,
        "unknown subcommand"
    );
    assert_eq!(
        horodrift::runner::run_cli(
            tokens("tiling-speed", &[("P", "3"), ("Q", "6")]).into_iter()
        ),
        1,
        "invalid tiling must be rejected"
    );

    // healthy run
    let out = dir.path().join("h").display().to_string();
    assert_eq!(
        horodrift::runner::run_cli(
            tokens("hyperbolicity-check", &[("P", "3"), ("Q", "10"), ("out", &out)]).into_iter()
        ),
        0
    );

    // Monte Carlo starvation: percolation far below the survival threshold
    let out = dir.path().join("mc").display().to_string();
    let code = horodrift::runner::run_cli(
        tokens(
            "perc-speed",
            &[
                ("P", "3"),
                ("Q", "10"),
                ("p", "0.02"),
                ("n", "1000"),
                ("trials", "20"),
                ("minradius", "30"),
                ("out", &out),
            ],
        )
        .into_iter(),
    );
    assert_eq!(code, 3, "insufficient survivors must exit 3");
}

#[test]
fn tree_and_law_files_load_through_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    let tree_path = dir.path().join("tree.txt");
    std::fs::write(&tree_path, "root a 1.0\nroot b 1.0\na c 2.0\na d 2.0\n").unwrap();
    let out = dir.path().join("tree").display().to_string();
    let toks = tokens(
        "tree-speed",
        &[
            ("tree", &tree_path.display().to_string()),
            ("n", "2000"),
            ("trials", "5"),
            ("out", &out),
        ],
    );
    let outcome = run_tokens(&toks);
    assert_eq!(outcome.exit_code, 0);
    let value: serde_json::Value =
        serde_json::from_slice(&std::fs::read(&outcome.report_path).unwrap()).unwrap();
    // a finite tree is positive recurrent: displacement per step tends to 0
    assert!(value["speed"].as_f64().unwrap() < 0.05);

    let law_path = dir.path().join("law.txt");
    std::fs::write(&law_path, "0.5 2 0 0 0.5\n0.5 1 1 0 1\n").unwrap();
    let out = dir.path().join("law").display().to_string();
    let toks = tokens(
        "lyapunov",
        &[
            ("law", &law_path.display().to_string()),
            ("n", "2000"),
            ("trials", "20"),
            ("samples", "4000"),
            ("out", &out),
        ],
    );
    let outcome = run_tokens(&toks);
    assert_eq!(outcome.exit_code, 0);

    // malformed files surface as config-style failures
    std::fs::write(&law_path, "0.5 2 0 0\n").unwrap();
    let code = horodrift::runner::run_cli(
        tokens("lyapunov", &[("law", &law_path.display().to_string())]).into_iter(),
    );
    assert_eq!(code, 1);
}

#[test]
fn csv_headers_match_the_declared_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cases: &[(&str, &[(&str, &str)], &str)] = &[
        (
            "tiling-speed",
            &[("P", "3"), ("Q", "10"), ("n", "1000"), ("trials", "5")],
            "trial,step,distance",
        ),
        (
            "canopy",
            &[("lambda", "1.5"), ("n", "2000"), ("trials", "2")],
            "trial,step,distance,level",
        ),
        (
            "theorem-a",
            &[
                ("target", "tiling"),
                ("P", "3"),
                ("Q", "10"),
                ("n", "1000"),
                ("trials", "30"),
            ],
            "trial,step,distance,xi",
        ),
    ];
    for (i, (cmd, pairs, header)) in cases.iter().enumerate() {
        let out = dir.path().join(format!("case{i}")).display().to_string();
        let mut all: Vec<(&str, &str)> = pairs.to_vec();
        all.push(("out", &out));
        let outcome = run_tokens(&tokens(cmd, &all));
        let csv = std::fs::read_to_string(&outcome.csv_path).unwrap();
        assert!(
            csv.starts_with(header),
            "{cmd}: header {:?}",
            csv.lines().next()
        );
        assert!(csv.lines().count() > 1, "{cmd}: no data rows");
    }
}

#[test]
fn series_files_survive_a_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("series.csv");
    let values = vec![1.5, -0.25, 0.0, 42.0];
    horodrift::drift::save_series(Path::new(&path), &values).unwrap();
    assert_eq!(horodrift::drift::load_series(Path::new(&path)).unwrap(), values);
}
