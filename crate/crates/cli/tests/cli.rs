use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn sheetqa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sheetqa")).args(args).output().expect("spawn sheetqa")
}

fn write_gdp(dir: &Path, name: &str, delim: char) -> String {
    let rows = [
        ["country", "year", "gdp (USD bn)"],
        ["Country X", "2021", "120"],
        ["Country X", "2022", "130"],
        ["Country Y", "2021", "80"],
        ["Country Y", "2022", "95"],
    ];
    let text: String = rows.iter().map(|r| r.join(&delim.to_string()) + "\n").collect();
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("bad json ({e}): {}", String::from_utf8_lossy(&out.stdout)))
}

#[test]
fn profile_prints_one_entry_per_sheet() {
    let dir = tempfile::tempdir().unwrap();
    let file = write_gdp(dir.path(), "gdp.csv", ',');
    let out = sheetqa(&["profile", "--file", &file]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert_eq!(v[0]["sheet"], "gdp");
    assert_eq!(v[0]["profile"]["sheet_class"], "Flat");
    assert_eq!(v[0]["profile"]["header_depth"], 1);
}

#[test]
fn sql_reports_capped_text_and_rows() {
    let dir = tempfile::tempdir().unwrap();
    let file = write_gdp(dir.path(), "gdp.csv", ',');
    let out = sheetqa(&["sql", "--file", &file, "--query", "SELECT country FROM t WHERE gdp > 100"]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert_eq!(v["sql"], "SELECT country FROM t WHERE gdp > 100 LIMIT 200");
    assert_eq!(v["result"]["rows"], serde_json::json!([["Country X"], ["Country X"]]));

    let bad = sheetqa(&["sql", "--file", &file, "--query", "DELETE FROM t"]);
    assert!(!bad.status.success());
}

#[test]
fn query_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let file = write_gdp(dir.path(), "gdp.csv", ',');
    let out = sheetqa(&["query", "--file", &file, "--question", "What was the gdp of Country Y in 2022?", "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["status"], "answered");
    assert_eq!(v["answer"], "95");
    assert!(v["budget"]["answer"].as_u64().unwrap() >= 1);

    let out = sheetqa(&["query", "--file", &file, "--question", "Who is the president of Mars?"]);
    assert_eq!(out.status.code(), Some(3));

    let out = sheetqa(&["query", "--file", &file, "--sheet", "nope", "--question", "x"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn delimiter_flag_reads_semicolon_files() {
    let dir = tempfile::tempdir().unwrap();
    let file = write_gdp(dir.path(), "gdp.csv", ';');
    let out = sheetqa(&["--delimiter", ";", "sql", "--file", &file, "--query", "SELECT COUNT(*) FROM t"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stdout_json(&out)["result"]["rows"], serde_json::json!([[4]]));
}

#[test]
fn index_persists_chunks_and_table() {
    let dir = tempfile::tempdir().unwrap();
    write_gdp(dir.path(), "gdp.csv", ',');
    let out_dir = dir.path().join("idx");
    let out = sheetqa(&["index", "--dir", dir.path().to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let chunks = fs::read_to_string(out_dir.join("gdp/gdp.chunks.jsonl")).unwrap();
    assert!(chunks.lines().count() >= 1);
    assert!(out_dir.join("gdp/gdp.table.json").is_file());
}

#[test]
fn eval_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    write_gdp(dir.path(), "gdp.csv", ',');
    let ds = dir.path().join("ds.jsonl");
    fs::write(
        &ds,
        concat!(
            r#"{"id":"q1","question":"What was the gdp of Country Y in 2022?","gold_answer":"95","tier":"easy","sheet_ref":{"file":"gdp.csv","sheet":"gdp"}}"#,
            "\n",
            r#"{"id":"q2","question":"What was the average gdp between 2021 and 2022?","gold_answer":"106.25","tier":"medium","sheet_ref":{"file":"gdp.csv","sheet":"gdp"}}"#,
            "\n"
        ),
    )
    .unwrap();
    let report = dir.path().join("report.json");
    let out = sheetqa(&["eval", "--dataset", ds.to_str().unwrap(), "--ablation", "all", "--out", report.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(report).unwrap()).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 4);
    assert_eq!(v[0]["ablation"], "full");
    assert_eq!(v[0]["n_total"], 2);
    assert_eq!(v[0]["exact_match_accuracy"], 1.0);
}
