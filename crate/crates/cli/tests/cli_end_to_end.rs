use std::fs;
use std::path::Path;

use asyncbo_cli::analyze::{analyze, AnalyzeOptions, TABLE_FORMAT_LINE};
use asyncbo_cli::batch::{execute, Manifest, RunState};
use asyncbo_cli::spec::{ConfigFile, ExperimentSpec};

fn spec(out: &Path, extra: &str) -> ExperimentSpec {
    let text = format!(
        r#"
        objectives = ["branin-2"]
        rules = ["ucb", "random"]
        workers = [2]
        seeds = 2
        budget_evals = 6
        jobs = 2
        out = "{}"
        {extra}
        "#,
        out.display()
    );
    ExperimentSpec::from_config(ConfigFile::parse(&text).unwrap()).unwrap()
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn table(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(TABLE_FORMAT_LINE));
    let body = lines.collect::<Vec<_>>().join("\n");
    let mut rdr = csv::Reader::from_reader(body.as_bytes());
    let header = rdr.headers().unwrap().iter().map(String::from).collect();
    let rows = rdr.records().map(|r| r.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

#[test]
fn rerun_is_byte_identical_and_parallelism_does_not_matter() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let m = execute(&spec(a.path(), "")).unwrap();
    assert_eq!(m.runs.len(), 4);
    assert!(m.runs.iter().all(|r| r.state == RunState::Complete));
    execute(&spec(b.path(), "")).unwrap();
    let (fa, fb) = (read_dir_sorted(a.path()), read_dir_sorted(b.path()));
    // The manifest records the output path, so compare everything else.
    let traces = |f: &[(String, Vec<u8>)]| f.iter().filter(|(n, _)| n != "manifest.json").cloned().collect::<Vec<_>>();
    assert_eq!(traces(&fa), traces(&fb));
    assert_eq!(fa.len(), 9);

    let serial = tempfile::tempdir().unwrap();
    execute(&ExperimentSpec { jobs: 1, ..spec(serial.path(), "") }).unwrap();
    assert_eq!(traces(&read_dir_sorted(serial.path())), traces(&fa));
}

#[test]
fn empty_grid_writes_empty_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let spec = ExperimentSpec { out: dir.path().to_path_buf(), ..ExperimentSpec::from_config(ConfigFile::default()).unwrap() };
    let m = execute(&spec).unwrap();
    assert!(m.runs.is_empty());
    let loaded = Manifest::load(dir.path()).unwrap();
    assert_eq!(loaded, m);
    assert_eq!(loaded.spec_hash, spec.hash());
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
}

#[test]
fn analysis_tables_have_expected_shape() {
    let dir = tempfile::tempdir().unwrap();
    execute(&spec(dir.path(), "")).unwrap();
    let out = dir.path().join("tables");
    analyze(dir.path(), &out, &AnalyzeOptions::default()).unwrap();

    let (header, rows) = table(&out.join("regret_curves.csv"));
    assert_eq!(header, ["objective", "workers", "mode", "rule", "time", "median", "q1", "q3", "seeds"]);
    assert_eq!(rows.len(), 2 * 200);
    let (_, wins) = table(&out.join("win_rate.csv"));
    let (mheader, mwu) = table(&out.join("mwu.csv"));
    assert_eq!(&mheader[4..], ["ucb", "random"]);
    for (i, (w, p)) in wins.iter().zip(&mwu).enumerate() {
        assert_eq!(w[4 + i], "0.5");
        assert_eq!(p[4 + i], "1");
    }
    let w01: f64 = wins[0][5].parse().unwrap();
    let w10: f64 = wins[1][4].parse().unwrap();
    assert_eq!(w01 + w10, 1.0);
}

#[test]
fn single_seed_band_collapses_to_median() {
    let dir = tempfile::tempdir().unwrap();
    execute(&ExperimentSpec { seeds: 1, ..spec(dir.path(), "") }).unwrap();
    analyze(dir.path(), dir.path(), &AnalyzeOptions::default()).unwrap();
    let (_, rows) = table(&dir.path().join("regret_curves.csv"));
    for r in rows {
        assert_eq!(r[5], r[6]);
        assert_eq!(r[5], r[7]);
    }
}

#[test]
fn missing_rule_is_skipped() {
    let dir = tempfile::tempdir().unwrap();
    execute(&spec(dir.path(), "")).unwrap();
    let opts = AnalyzeOptions { rules: Some(vec!["ucb".parse().unwrap(), "aegis".parse().unwrap()]), at: Some(1.0) };
    analyze(dir.path(), dir.path(), &opts).unwrap();
    let (header, rows) = table(&dir.path().join("win_rate.csv"));
    assert_eq!(&header[4..], ["ucb"]);
    assert_eq!(rows.len(), 1);
    let (_, dist) = table(&dir.path().join("distance_series.csv"));
    assert!(dist.iter().all(|r| r[3] == "ucb"));
}
