//! Input tables and per-bank risk indicators.
//!
//! Banks carry the balance-sheet aggregates used both as fitnesses for the
//! reconstruction (interbank assets `A` and liabilities `L`) and as inputs of
//! the node terms that modulate the contagion (`γ`) and default (`ν`) rates.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::median;

/// Country code reserved for the synthetic ground bank.
pub const GROUND_COUNTRY: &str = "REST";

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("line {line}: {field} {message}")]
    Constraint {
        line: u64,
        field: &'static str,
        message: String,
    },
    #[error("line {line}: duplicate bank_id {bank_id} in year {year}")]
    DuplicateBank {
        line: u64,
        bank_id: String,
        year: i32,
    },
    #[error("duplicate spread for country {country} in year {year}")]
    DuplicateSpread { country: String, year: i32 },
    #[error("bank {bank_id}: country {country} is not in the BIS country set")]
    UnknownCountry { bank_id: String, country: String },
    #[error("no spread for country {country} in year {year}")]
    MissingSpread { country: String, year: i32 },
    #[error("BIS entry {lender} -> {borrower} is missing and was not imputed")]
    MissingBisEntry { lender: String, borrower: String },
    #[error("BIS {axis} sum of country {country} is zero")]
    ZeroMarginal { country: String, axis: &'static str },
    #[error("empty input")]
    EmptyInput,
    #[error("median transform undefined at index {index}: x = {value} equals minus the median {median}")]
    SingularTransform { index: usize, value: f64, median: f64 },
}

pub type Result<T> = std::result::Result<T, IngestError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankRecord {
    pub bank_id: String,
    pub country: String,
    pub year: i32,
    /// Total assets `T` (mil USD).
    pub total_assets: f64,
    /// Interbank assets `A`: out-strength target in the reconstruction.
    pub interbank_assets: f64,
    /// Interbank liabilities `L`: in-strength target in the reconstruction.
    pub interbank_liabilities: f64,
    /// Liquid funding `F` (deposits, money market and short-term funding).
    pub liquid_funding: f64,
}

impl BankRecord {
    /// Checks the sign constraints; `line` is reported in the error.
    pub fn validate(&self, line: u64) -> Result<()> {
        let err = |field: &'static str, message: &str| IngestError::Constraint {
            line,
            field,
            message: message.to_string(),
        };
        if self.bank_id.trim().is_empty() {
            return Err(err("bank_id", "must not be empty"));
        }
        if self.country.trim().is_empty() {
            return Err(err("country", "must not be empty"));
        }
        if self.country == GROUND_COUNTRY {
            return Err(err("country", "uses the reserved ground-bank code"));
        }
        if !(self.total_assets.is_finite() && self.total_assets > 0.0) {
            return Err(err("total_assets", "must be positive"));
        }
        if !(self.liquid_funding.is_finite() && self.liquid_funding > 0.0) {
            return Err(err("liquid_funding", "must be positive"));
        }
        if !(self.interbank_assets.is_finite() && self.interbank_assets >= 0.0) {
            return Err(err("interbank_assets", "must be non-negative"));
        }
        if !(self.interbank_liabilities.is_finite() && self.interbank_liabilities >= 0.0) {
            return Err(err("interbank_liabilities", "must be non-negative"));
        }
        Ok(())
    }
}

/// End-of-year bid and ask prices of a country's 10-year government bond.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountrySpread {
    pub country: String,
    pub year: i32,
    pub bid_price: f64,
    pub ask_price: f64,
    /// `bid_price - ask_price`, sign convention kept as defined.
    pub spread: f64,
}

impl CountrySpread {
    pub fn new(country: impl Into<String>, year: i32, bid_price: f64, ask_price: f64) -> Self {
        Self {
            country: country.into(),
            year,
            bid_price,
            ask_price,
            spread: bid_price - ask_price,
        }
    }
}

/// Country-by-country lending volumes; `exp[u][v]` is lent by sector `u` to `v`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BisExposureMatrix {
    pub countries: Vec<String>,
    pub exp: Vec<Vec<f64>>,
}

impl BisExposureMatrix {
    pub fn new(countries: Vec<String>, exp: Vec<Vec<f64>>) -> Self {
        assert_eq!(countries.len(), exp.len(), "BIS matrix must be square");
        assert!(exp.iter().all(|r| r.len() == countries.len()), "BIS matrix must be square");
        Self { countries, exp }
    }

    pub fn len(&self) -> usize {
        self.countries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.countries.is_empty()
    }

    pub fn index_of(&self, country: &str) -> Option<usize> {
        self.countries.iter().position(|c| c == country)
    }

    pub fn row_sum(&self, u: usize) -> f64 {
        self.exp[u].iter().sum()
    }

    pub fn col_sum(&self, v: usize) -> f64 {
        self.exp.iter().map(|r| r[v]).sum()
    }

    pub fn total(&self) -> f64 {
        self.exp.iter().flatten().sum()
    }

    /// Overwrites entries with imputed values; unknown countries are rejected.
    pub fn impute(&mut self, entries: &[BisImputation]) -> Result<()> {
        for e in entries {
            let u = self.index_of(&e.lender).ok_or_else(|| IngestError::UnknownCountry {
                bank_id: "<bis_impute>".into(),
                country: e.lender.clone(),
            })?;
            let v = self.index_of(&e.borrower).ok_or_else(|| IngestError::UnknownCountry {
                bank_id: "<bis_impute>".into(),
                country: e.borrower.clone(),
            })?;
            self.exp[u][v] = e.value;
        }
        Ok(())
    }

    fn check_complete(&self) -> Result<()> {
        for (u, row) in self.exp.iter().enumerate() {
            for (v, x) in row.iter().enumerate() {
                if x.is_nan() {
                    return Err(IngestError::MissingBisEntry {
                        lender: self.countries[u].clone(),
                        borrower: self.countries[v].clone(),
                    });
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BisImputation {
    pub lender: String,
    pub borrower: String,
    pub value: f64,
}

/// Scope of the median used by the node-term transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pooling {
    /// One median over every loaded year, so indicator dynamics survive.
    #[default]
    AllYears,
    PerYear,
}

impl std::str::FromStr for Pooling {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "all-years" | "all" | "pooled" => Ok(Pooling::AllYears),
            "per-year" | "year" => Ok(Pooling::PerYear),
            other => Err(format!("unknown pooling '{other}' (expected all-years | per-year)")),
        }
    }
}

/// Per-bank indicators, aligned with the bank slice they were computed from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndicatorTable {
    pub bank_ids: Vec<String>,
    pub years: Vec<i32>,
    pub liquidity: Vec<f64>,
    pub gamma: Vec<f64>,
    pub nu: Vec<f64>,
    pub spreads: BTreeMap<(String, i32), f64>,
}

impl IndicatorTable {
    /// Computes `Liq`, `γ` and `ν`. Without spreads, `γ` is left at zero.
    pub fn build(
        banks: &[BankRecord],
        spreads: Option<&[CountrySpread]>,
        pooling: Pooling,
    ) -> Result<Self> {
        let gamma = match spreads {
            Some(s) => node_term_gamma(banks, s, pooling)?,
            None => vec![0.0; banks.len()],
        };
        let nu = resilience_nu(banks, pooling)?;
        let spread_map = spreads
            .map(|s| {
                s.iter()
                    .map(|cs| ((cs.country.clone(), cs.year), cs.spread))
                    .collect()
            })
            .unwrap_or_default();
        Ok(Self {
            bank_ids: banks.iter().map(|b| b.bank_id.clone()).collect(),
            years: banks.iter().map(|b| b.year).collect(),
            liquidity: banks.iter().map(liquidity_indicator).collect(),
            gamma,
            nu,
            spreads: spread_map,
        })
    }

    /// `(γ, ν)` of `bank_id` in `year`.
    pub fn lookup(&self, bank_id: &str, year: i32) -> Option<(f64, f64)> {
        self.bank_ids
            .iter()
            .zip(&self.years)
            .position(|(b, y)| b == bank_id && *y == year)
            .map(|k| (self.gamma[k], self.nu[k]))
    }
}

/// `f(x) = (x - m) / (x + m)` with `m` the median of `values`.
pub fn median_transform(values: &[f64]) -> Result<Vec<f64>> {
    let m = median(values).ok_or(IngestError::EmptyInput)?;
    values
        .iter()
        .enumerate()
        .map(|(index, &x)| {
            let den = x + m;
            if den == 0.0 {
                Err(IngestError::SingularTransform { index, value: x, median: m })
            } else {
                Ok((x - m) / den)
            }
        })
        .collect()
}

/// `Liq = T / F`.
pub fn liquidity_indicator(bank: &BankRecord) -> f64 {
    bank.total_assets / bank.liquid_funding
}

fn pooled_transform(banks: &[BankRecord], values: Vec<f64>, pooling: Pooling) -> Result<Vec<f64>> {
    match pooling {
        Pooling::AllYears => median_transform(&values),
        Pooling::PerYear => {
            let mut by_year: BTreeMap<i32, Vec<usize>> = BTreeMap::new();
            for (k, b) in banks.iter().enumerate() {
                by_year.entry(b.year).or_default().push(k);
            }
            let mut out = vec![0.0; values.len()];
            for idx in by_year.values() {
                let sub: Vec<f64> = idx.iter().map(|&k| values[k]).collect();
                let t = median_transform(&sub).map_err(|e| match e {
                    IngestError::SingularTransform { index, value, median } => {
                        IngestError::SingularTransform { index: idx[index], value, median }
                    }
                    other => other,
                })?;
                for (&k, v) in idx.iter().zip(t) {
                    out[k] = v;
                }
            }
            Ok(out)
        }
    }
}

/// Bank-and-country liquidity node term `γ_i = f(Liq_i · δ_P)`.
pub fn node_term_gamma(
    banks: &[BankRecord],
    spreads: &[CountrySpread],
    pooling: Pooling,
) -> Result<Vec<f64>> {
    let lookup: HashMap<(&str, i32), f64> = spreads
        .iter()
        .map(|s| ((s.country.as_str(), s.year), s.spread))
        .collect();
    let products = banks
        .iter()
        .map(|b| {
            lookup
                .get(&(b.country.as_str(), b.year))
                .map(|d| liquidity_indicator(b) * d)
                .ok_or_else(|| IngestError::MissingSpread {
                    country: b.country.clone(),
                    year: b.year,
                })
        })
        .collect::<Result<Vec<_>>>()?;
    pooled_transform(banks, products, pooling)
}

/// Liquidity resilience `ν_i = f(L_i / F_i)`.
pub fn resilience_nu(banks: &[BankRecord], pooling: Pooling) -> Result<Vec<f64>> {
    let ratios = banks
        .iter()
        .map(|b| b.interbank_liabilities / b.liquid_funding)
        .collect();
    pooled_transform(banks, ratios, pooling)
}

/// `VOL_UV = exp_UV² / (Σ_V exp_UV · Σ_U exp_UV)`.
pub fn rescale_bis(bis: &BisExposureMatrix) -> Result<Vec<Vec<f64>>> {
    let n = bis.len();
    let rows: Vec<f64> = (0..n).map(|u| bis.row_sum(u)).collect();
    let cols: Vec<f64> = (0..n).map(|v| bis.col_sum(v)).collect();
    for u in 0..n {
        if rows[u] <= 0.0 {
            return Err(IngestError::ZeroMarginal { country: bis.countries[u].clone(), axis: "row" });
        }
        if cols[u] <= 0.0 {
            return Err(IngestError::ZeroMarginal {
                country: bis.countries[u].clone(),
                axis: "column",
            });
        }
    }
    Ok((0..n)
        .map(|u| (0..n).map(|v| bis.exp[u][v] * bis.exp[u][v] / (rows[u] * cols[v])).collect())
        .collect())
}

// ---------------------------------------------------------------------------
// Loading
// ---------------------------------------------------------------------------

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|source| IngestError::Io { path: path.to_path_buf(), source })
}

fn csv_reader(path: &Path) -> Result<csv::Reader<File>> {
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(open(path)?))
}

fn parse_err(path: &Path, err: csv::Error) -> IngestError {
    let line = err.position().map(|p| p.line()).unwrap_or(0);
    IngestError::Parse { path: path.to_path_buf(), line, message: err.to_string() }
}

fn check_header(path: &Path, rdr: &mut csv::Reader<File>, expected: &[&str]) -> Result<()> {
    let headers = rdr.headers().map_err(|e| parse_err(path, e))?;
    let got: Vec<&str> = headers.iter().collect();
    if got != expected {
        return Err(IngestError::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("expected header `{}`, found `{}`", expected.join(","), got.join(",")),
        });
    }
    Ok(())
}

pub const BANKS_HEADER: [&str; 7] = [
    "bank_id",
    "country",
    "year",
    "total_assets",
    "interbank_assets",
    "interbank_liabilities",
    "liquid_funding",
];
pub const SPREADS_HEADER: [&str; 4] = ["country", "year", "bid_price", "ask_price"];
pub const IMPUTE_HEADER: [&str; 3] = ["lender", "borrower", "value"];

/// Reads and validates `banks.csv`, optionally keeping a single year.
pub fn load_banks(path: &Path, year: Option<i32>) -> Result<Vec<BankRecord>> {
    let mut rdr = csv_reader(path)?;
    check_header(path, &mut rdr, &BANKS_HEADER)?;
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (k, row) in rdr.deserialize::<BankRecord>().enumerate() {
        let bank = row.map_err(|e| parse_err(path, e))?;
        // header is line 1
        let line = k as u64 + 2;
        bank.validate(line)?;
        if !seen.insert((bank.bank_id.clone(), bank.year)) {
            return Err(IngestError::DuplicateBank { line, bank_id: bank.bank_id, year: bank.year });
        }
        if year.map_or(true, |y| y == bank.year) {
            out.push(bank);
        }
    }
    Ok(out)
}

#[derive(Deserialize)]
struct SpreadRow {
    country: String,
    year: i32,
    bid_price: f64,
    ask_price: f64,
}

pub fn load_spreads(path: &Path) -> Result<Vec<CountrySpread>> {
    let mut rdr = csv_reader(path)?;
    check_header(path, &mut rdr, &SPREADS_HEADER)?;
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for row in rdr.deserialize::<SpreadRow>() {
        let r = row.map_err(|e| parse_err(path, e))?;
        if !seen.insert((r.country.clone(), r.year)) {
            return Err(IngestError::DuplicateSpread { country: r.country, year: r.year });
        }
        out.push(CountrySpread::new(r.country, r.year, r.bid_price, r.ask_price));
    }
    Ok(out)
}

/// Reads `bis.csv` (header row and first column carry the country codes).
/// Empty or `NA` cells are missing and must be covered by `impute`.
pub fn load_bis(path: &Path, impute: Option<&Path>) -> Result<BisExposureMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(open(path)?);
    let mut records = rdr.records();
    let header = match records.next() {
        Some(r) => r.map_err(|e| parse_err(path, e))?,
        None => return Err(IngestError::EmptyInput),
    };
    let countries: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    if countries.is_empty() {
        return Err(IngestError::EmptyInput);
    }
    let mut exp = Vec::with_capacity(countries.len());
    for (k, rec) in records.enumerate() {
        let line = k as u64 + 2;
        let rec = rec.map_err(|e| parse_err(path, e))?;
        let perr = |message: String| IngestError::Parse { path: path.to_path_buf(), line, message };
        let label = rec.get(0).unwrap_or_default();
        if countries.get(k).map(String::as_str) != Some(label) {
            return Err(perr(format!(
                "row label `{label}` does not match column order (expected `{}`)",
                countries.get(k).map(String::as_str).unwrap_or("<none>")
            )));
        }
        if rec.len() != countries.len() + 1 {
            return Err(perr(format!("expected {} cells, found {}", countries.len() + 1, rec.len())));
        }
        let row = rec
            .iter()
            .skip(1)
            .map(|cell| {
                if cell.is_empty() || cell.eq_ignore_ascii_case("na") {
                    Ok(f64::NAN)
                } else {
                    match cell.parse::<f64>() {
                        Ok(x) if x >= 0.0 && x.is_finite() => Ok(x),
                        Ok(x) => Err(perr(format!("exposure {x} must be finite and non-negative"))),
                        Err(e) => Err(perr(format!("bad number `{cell}`: {e}"))),
                    }
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        exp.push(row);
    }
    if exp.len() != countries.len() {
        return Err(IngestError::Parse {
            path: path.to_path_buf(),
            line: exp.len() as u64 + 2,
            message: format!("expected {} matrix rows, found {}", countries.len(), exp.len()),
        });
    }
    let mut bis = BisExposureMatrix::new(countries, exp);
    if let Some(p) = impute {
        bis.impute(&load_imputations(p)?)?;
    }
    bis.check_complete()?;
    Ok(bis)
}

pub fn load_imputations(path: &Path) -> Result<Vec<BisImputation>> {
    let mut rdr = csv_reader(path)?;
    check_header(path, &mut rdr, &IMPUTE_HEADER)?;
    rdr.deserialize::<BisImputation>()
        .map(|r| r.map_err(|e| parse_err(path, e)))
        .collect()
}

/// Every bank country must be a BIS country.
pub fn check_countries(banks: &[BankRecord], bis: &BisExposureMatrix) -> Result<()> {
    for b in banks {
        if bis.index_of(&b.country).is_none() {
            return Err(IngestError::UnknownCountry {
                bank_id: b.bank_id.clone(),
                country: b.country.clone(),
            });
        }
    }
    Ok(())
}
