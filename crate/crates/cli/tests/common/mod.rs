#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn liqnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_liqnet"))
        .args(args)
        .output()
        .expect("binary runs")
}

/// Runs the binary and fails the test with its stderr on a non-zero exit.
pub fn ok(args: &[&str]) -> Output {
    let out = liqnet(args);
    assert!(
        out.status.success(),
        "liqnet {} failed ({:?}):\n{}",
        args.join(" "),
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn code(args: &[&str]) -> i32 {
    liqnet(args).status.code().expect("exit code")
}

pub fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 path")
}

pub fn read(path: &Path) -> String {
    fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

pub fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&read(path)).expect("valid json")
}

/// Small synthetic data set: 15 banks in 3 countries over two years.
pub fn small_data(root: &Path) -> PathBuf {
    let d = root.join("data");
    ok(&["synth", "--banks", "15", "--countries", "3", "--first-year", "2010", "--last-year", "2011", "--seed", "5", "--out", p(&d)]);
    d
}

pub fn small_ensemble(root: &Path, data: &Path, members: usize) -> PathBuf {
    let n = root.join("nets");
    ok(&["reconstruct", "--data", p(data), "--ensemble", &members.to_string(), "--seed", "3", "--out", p(&n)]);
    n
}

/// Every file of `dir` except the manifest, as (name, bytes), sorted.
pub fn data_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|f| f.is_file() && f.file_name().unwrap() != "manifest.json")
        .map(|f| (f.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&f).unwrap()))
        .collect();
    out.sort();
    out
}

/// Eight banks in two countries with identical balance-sheet ratios and
/// identical spreads, so both node terms vanish.
pub fn flat_indicator_data(root: &Path, diagonal_only: bool) -> PathBuf {
    let d = root.join("flat");
    fs::create_dir_all(&d).unwrap();
    let mut banks = String::from("bank_id,country,year,total_assets,interbank_assets,interbank_liabilities,liquid_funding\n");
    for k in 1..=8 {
        let c = if k % 2 == 0 { "AT" } else { "DE" };
        let s = k as f64;
        let a = if k % 3 == 0 { 12.0 * s } else { 8.0 * s };
        banks.push_str(&format!("b{k},{c},2010,{},{a},{},{}\n", 100.0 * s, 10.0 * s, 50.0 * s));
    }
    fs::write(d.join("banks.csv"), banks).unwrap();
    fs::write(
        d.join("spreads.csv"),
        "country,year,bid_price,ask_price\nAT,2010,101.5,101.0\nDE,2010,101.5,101.0\n",
    )
    .unwrap();
    let off = if diagonal_only { 0 } else { 3 };
    fs::write(d.join("bis.csv"), format!("lender\\borrower,AT,DE\nAT,6,{off}\nDE,{off},7\n")).unwrap();
    d
}

/// Column `name` of a CSV table as strings.
pub fn column(table: &str, name: &str) -> Vec<String> {
    let mut lines = table.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let k = header.iter().position(|h| *h == name).unwrap_or_else(|| panic!("no column {name}"));
    lines.map(|l| l.split(',').nth(k).unwrap().to_string()).collect()
}

/// Drops the first `n` columns of every line.
pub fn strip_columns(table: &str, n: usize) -> String {
    table
        .lines()
        .map(|l| l.splitn(n + 1, ',').nth(n).unwrap_or(""))
        .collect::<Vec<_>>()
        .join("\n")
}
