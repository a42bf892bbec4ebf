//! Synthetic stand-in for the bank balance sheets, bond spreads and BIS
//! exposures.
//!
//! Bank sizes are lognormal with a heavy right tail. Country exposures are
//! gravity-like with a strong home bias. Interbank assets of each country's
//! banks add up to a common multiple of its BIS lending, and liabilities to
//! a slightly larger multiple of its BIS borrowing, so every year carries a
//! liability surplus that the ground bank absorbs.

use std::fs;
use std::io;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, LogNormal};
use thiserror::Error;

use crate::ingest::{BankRecord, BisExposureMatrix, CountrySpread, BANKS_HEADER, SPREADS_HEADER};
use crate::rng::{kind, stream};

const COUNTRY_CODES: [&str; 12] = ["AT", "BE", "DE", "ES", "FR", "GB", "IT", "NL", "SE", "DK", "IE", "PT"];

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synthetic parameters: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub banks: usize,
    pub countries: usize,
    pub first_year: i32,
    pub last_year: i32,
    pub seed: u64,
    /// Liability surplus over assets, as a fraction of total interbank lending.
    pub surplus: f64,
    /// Year with widened bond spreads (sovereign stress).
    pub stress_year: Option<i32>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            banks: 97,
            countries: 9,
            first_year: 2006,
            last_year: 2013,
            seed: 0,
            surplus: 0.05,
            stress_year: Some(2011),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.countries == 0 || self.banks == 0 {
            return Err(SynthError::Invalid("bank and country counts must be at least 1".into()));
        }
        if self.banks < self.countries {
            return Err(SynthError::Invalid(format!(
                "{} banks cannot cover {} countries",
                self.banks, self.countries
            )));
        }
        if self.last_year < self.first_year {
            return Err(SynthError::Invalid("last year precedes first year".into()));
        }
        if !(self.surplus >= 0.0 && self.surplus.is_finite()) {
            return Err(SynthError::Invalid("surplus must be non-negative".into()));
        }
        Ok(())
    }

    pub fn years(&self) -> impl Iterator<Item = i32> {
        self.first_year..=self.last_year
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    pub banks: Vec<BankRecord>,
    pub spreads: Vec<CountrySpread>,
    pub bis: BisExposureMatrix,
}

pub fn country_codes(n: usize) -> Vec<String> {
    (0..n)
        .map(|k| COUNTRY_CODES.get(k).map(|c| c.to_string()).unwrap_or_else(|| format!("C{:02}", k + 1)))
        .collect()
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthData, SynthError> {
    cfg.validate()?;
    let mut rng = stream(cfg.seed, &[kind::SYNTH]);
    let nc = cfg.countries;
    let countries = country_codes(nc);

    // country sizes and exposures: exp_uv ∝ size_u·size_v, home bias on the diagonal
    let size_dist = LogNormal::new(0.0, 0.8).unwrap();
    let noise = LogNormal::new(0.0, 0.4).unwrap();
    let size: Vec<f64> = (0..nc).map(|_| size_dist.sample(&mut rng)).collect();
    let exp: Vec<Vec<f64>> = (0..nc)
        .map(|u| {
            (0..nc)
                .map(|v| {
                    let home = if u == v { 6.0 } else { 1.0 };
                    (1000.0 * home * size[u] * size[v] * noise.sample(&mut rng)).round().max(1.0)
                })
                .collect()
        })
        .collect();
    let bis = BisExposureMatrix::new(countries.clone(), exp);

    // every country gets one bank, the rest follow country size
    let total_size: f64 = size.iter().sum();
    let mut home = Vec::with_capacity(cfg.banks);
    for k in 0..cfg.banks {
        if k < nc {
            home.push(k);
        } else {
            let mut x = rng.random::<f64>() * total_size;
            let mut u = 0;
            while u + 1 < nc && x >= size[u] {
                x -= size[u];
                u += 1;
            }
            home.push(u);
        }
    }
    let width = cfg.banks.to_string().len().max(3);
    let ids: Vec<String> = (0..cfg.banks).map(|k| format!("B{:0width$}", k + 1)).collect();

    // persistent bank traits
    let heavy = LogNormal::new(0.0, 1.2).unwrap();
    let base_size: Vec<f64> = (0..cfg.banks).map(|_| heavy.sample(&mut rng)).collect();
    let lend_bias: Vec<f64> = (0..cfg.banks).map(|_| rng.random_range(0.5..1.5)).collect();
    let interbank_share: Vec<f64> = (0..cfg.banks).map(|_| rng.random_range(0.04..0.25)).collect();
    let funding_share: Vec<f64> = (0..cfg.banks).map(|_| rng.random_range(0.25..0.85)).collect();
    let drift = LogNormal::new(0.0, 0.1).unwrap();

    let mut banks = Vec::with_capacity(cfg.banks * (cfg.last_year - cfg.first_year + 1) as usize);
    let mut spreads = Vec::new();
    for (y, year) in cfg.years().enumerate() {
        let scale = 1.0 + 0.04 * y as f64;
        let w: Vec<f64> = base_size.iter().map(|&b| b * drift.sample(&mut rng)).collect();
        let wa: Vec<f64> = (0..cfg.banks).map(|i| w[i] * lend_bias[i]).collect();
        let wl: Vec<f64> = (0..cfg.banks).map(|i| w[i] / lend_bias[i]).collect();
        let mut sum_a = vec![0.0; nc];
        let mut sum_l = vec![0.0; nc];
        for i in 0..cfg.banks {
            sum_a[home[i]] += wa[i];
            sum_l[home[i]] += wl[i];
        }
        for i in 0..cfg.banks {
            let u = home[i];
            let a = scale * bis.row_sum(u) * wa[i] / sum_a[u];
            let l = scale * (1.0 + cfg.surplus) * bis.col_sum(u) * wl[i] / sum_l[u];
            let t = (a.max(l) / interbank_share[i] * drift.sample(&mut rng)).max(a.max(l) * 1.5);
            let f = t * funding_share[i] * drift.sample(&mut rng);
            banks.push(BankRecord {
                bank_id: ids[i].clone(),
                country: countries[u].clone(),
                year,
                total_assets: round6(t),
                interbank_assets: round6(a),
                interbank_liabilities: round6(l),
                liquid_funding: round6(f),
            });
        }
        for (u, c) in countries.iter().enumerate() {
            let stress = if cfg.stress_year == Some(year) { 3.0 } else { 1.0 };
            let base = 0.02 + 0.3 * (u as f64 / nc as f64);
            let spread = base * stress * rng.random_range(0.7..1.3);
            let ask = 95.0 + rng.random_range(0.0..10.0);
            spreads.push(CountrySpread::new(c.clone(), year, round6(ask + spread), round6(ask)));
        }
    }
    Ok(SynthData { banks, spreads, bis })
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

/// Writes `banks.csv`, `spreads.csv` and `bis.csv` into `dir`.
pub fn write(dir: &Path, data: &SynthData) -> Result<(), SynthError> {
    fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join("banks.csv"))?;
    w.write_record(BANKS_HEADER)?;
    for b in &data.banks {
        w.write_record([
            b.bank_id.clone(),
            b.country.clone(),
            b.year.to_string(),
            b.total_assets.to_string(),
            b.interbank_assets.to_string(),
            b.interbank_liabilities.to_string(),
            b.liquid_funding.to_string(),
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("spreads.csv"))?;
    w.write_record(SPREADS_HEADER)?;
    for s in &data.spreads {
        w.write_record([s.country.clone(), s.year.to_string(), s.bid_price.to_string(), s.ask_price.to_string()])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("bis.csv"))?;
    let mut header = vec!["lender\\borrower".to_string()];
    header.extend(data.bis.countries.iter().cloned());
    w.write_record(&header)?;
    for (u, row) in data.bis.exp.iter().enumerate() {
        let mut rec = vec![data.bis.countries[u].clone()];
        rec.extend(row.iter().map(|x| x.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
