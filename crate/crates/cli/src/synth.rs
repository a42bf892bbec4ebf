use std::path::PathBuf;

use clap::Args;
use liqnet::synth::{self, SynthConfig};
use serde_json::json;

use crate::config::ConfigFile;
use crate::error::{CliError, Result};
use crate::manifest::ManifestBuilder;

#[derive(Args)]
pub struct SynthArgs {
    /// Number of banks [default: 97]
    #[arg(long)]
    banks: Option<usize>,
    /// Number of countries [default: 9]
    #[arg(long)]
    countries: Option<usize>,
    /// [default: 2006]
    #[arg(long)]
    first_year: Option<i32>,
    /// [default: 2013]
    #[arg(long)]
    last_year: Option<i32>,
    /// Master seed [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Interbank liabilities in excess of assets, as a fraction [default: 0.05]
    #[arg(long)]
    surplus: Option<f64>,
    /// Year with widened bond spreads, or `none` [default: 2011]
    #[arg(long)]
    stress_year: Option<String>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_stress(s: &str) -> Result<Option<i32>> {
    if s.eq_ignore_ascii_case("none") {
        return Ok(None);
    }
    s.parse()
        .map(Some)
        .map_err(|e| CliError::Validation(format!("stress-year `{s}`: {e}")))
}

pub fn run(args: SynthArgs, file: &ConfigFile) -> Result<()> {
    let d = SynthConfig::default();
    let stress = match file.get_opt::<String>("stress-year", args.stress_year)? {
        Some(s) => parse_stress(&s)?,
        None => d.stress_year,
    };
    let cfg = SynthConfig {
        banks: file.get("banks", args.banks, d.banks)?,
        countries: file.get("countries", args.countries, d.countries)?,
        first_year: file.get("first-year", args.first_year, d.first_year)?,
        last_year: file.get("last-year", args.last_year, d.last_year)?,
        seed: file.get("seed", args.seed, d.seed)?,
        surplus: file.get("surplus", args.surplus, d.surplus)?,
        stress_year: stress,
    };
    let out = file.require_path("out", args.out)?;
    let manifest = ManifestBuilder::new(
        "synth",
        cfg.seed,
        json!({
            "banks": cfg.banks,
            "countries": cfg.countries,
            "first_year": cfg.first_year,
            "last_year": cfg.last_year,
            "surplus": cfg.surplus,
            "stress_year": cfg.stress_year,
        }),
    );
    let data = synth::generate(&cfg)?;
    synth::write(&out, &data)?;
    manifest.finish(&out)?;
    eprintln!(
        "wrote {} bank-years across {} countries to {}",
        data.banks.len(),
        data.bis.len(),
        out.display()
    );
    Ok(())
}
