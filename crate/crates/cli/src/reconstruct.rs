use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use clap::Args;
use liqnet::ingest::{self, BankRecord};
use liqnet::io;
use liqnet::reconstruct::{EnsemblePlan, IpfConfig, ReconstructionConfig, ZMode};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::config::ConfigFile;
use crate::error::{CliError, Result};
use crate::manifest::ManifestBuilder;

#[derive(Args)]
pub struct ReconstructArgs {
    /// Directory holding banks.csv and bis.csv
    #[arg(long)]
    data: Option<PathBuf>,
    /// CSV `lender,borrower,value` filling missing BIS cells
    #[arg(long)]
    bis_impute: Option<PathBuf>,
    /// Years to reconstruct, comma-separated [default: every year in banks.csv]
    #[arg(long, value_delimiter = ',')]
    years: Vec<i32>,
    /// Target density of the real-bank network [default: 0.3]
    #[arg(long)]
    density: Option<f64>,
    /// Ensemble members per year [default: 100]
    #[arg(long)]
    ensemble: Option<usize>,
    /// Master seed [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// `global` or `per-block` [default: global]
    #[arg(long)]
    z_mode: Option<ZMode>,
    /// Ignore the country blocks (plain fitness model)
    #[arg(long)]
    no_blocks: bool,
    /// Keep the raw fitness-model weights
    #[arg(long)]
    no_ipf: bool,
    /// Relative marginal tolerance of the rebalancing [default: 1e-9]
    #[arg(long)]
    ipf_tolerance: Option<f64>,
    /// [default: 10000]
    #[arg(long)]
    ipf_max_iter: Option<usize>,
    /// Leave pairs touching the ground bank out of the density
    #[arg(long)]
    no_ground_in_density: bool,
    /// Draws allowed per member before giving up [default: 1000]
    #[arg(long)]
    retry_cap: Option<usize>,
    /// Output directory; networks go to <out>/<year>/network_NNN.{csv,json}
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct YearSummary {
    year: i32,
    banks: usize,
    z: liqnet::ZSolution,
    expected_density: f64,
    mean_density: f64,
    mean_attempts: f64,
    max_attempts: usize,
    max_ipf_iterations: Option<usize>,
}

pub fn resolve_config(args: &ReconstructArgs, file: &ConfigFile) -> Result<ReconstructionConfig> {
    let d = ReconstructionConfig::default();
    let cfg = ReconstructionConfig {
        density: file.get("density", args.density, d.density)?,
        ensemble_size: file.get("ensemble", args.ensemble, d.ensemble_size)?,
        z_mode: file.get("z-mode", args.z_mode, d.z_mode)?,
        blocks: file.switch("blocks", args.no_blocks, d.blocks)?,
        ipf: IpfConfig {
            enabled: file.switch("ipf", args.no_ipf, d.ipf.enabled)?,
            tolerance: file.get("ipf-tolerance", args.ipf_tolerance, d.ipf.tolerance)?,
            max_iter: file.get("ipf-max-iter", args.ipf_max_iter, d.ipf.max_iter)?,
        },
        ground_in_density: file.switch("ground-in-density", args.no_ground_in_density, d.ground_in_density)?,
        retry_cap: file.get("retry-cap", args.retry_cap, d.retry_cap)?,
        seed: file.get("seed", args.seed, d.seed)?,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn input(dir: &Path, name: &str) -> Result<PathBuf> {
    let p = dir.join(name);
    if !p.is_file() {
        return Err(CliError::Io(format!("{}: no such file", p.display())));
    }
    Ok(p)
}

pub fn run(args: ReconstructArgs, file: &ConfigFile) -> Result<()> {
    let cfg = resolve_config(&args, file)?;
    let data = file.require_path("data", args.data.clone())?;
    let impute = file.path("bis-impute", args.bis_impute.clone())?;
    let out = file.require_path("out", args.out.clone())?;
    let wanted = file.get_list("years", args.years.clone(), Vec::new())?;

    let banks_path = input(&data, "banks.csv")?;
    let bis_path = input(&data, "bis.csv")?;
    let banks = ingest::load_banks(&banks_path, None)?;
    let bis = ingest::load_bis(&bis_path, impute.as_deref())?;
    ingest::check_countries(&banks, &bis)?;

    let present: BTreeSet<i32> = banks.iter().map(|b| b.year).collect();
    let years: Vec<i32> = if wanted.is_empty() {
        present.iter().copied().collect()
    } else {
        if let Some(y) = wanted.iter().find(|y| !present.contains(y)) {
            return Err(CliError::Validation(format!("year {y} has no bank records")));
        }
        wanted.iter().copied().collect::<BTreeSet<_>>().into_iter().collect()
    };
    if years.is_empty() {
        return Err(CliError::Validation("no bank records".into()));
    }

    let mut manifest = ManifestBuilder::new(
        "reconstruct",
        cfg.seed,
        json!({ "reconstruction": cfg, "years": years }),
    );
    manifest.input_file("banks", &banks_path)?;
    manifest.input_file("bis", &bis_path)?;
    if let Some(p) = &impute {
        manifest.input_file("bis-impute", p)?;
    }

    let mut summaries = Vec::new();
    for &year in &years {
        let yb: Vec<BankRecord> = banks.iter().filter(|b| b.year == year).cloned().collect();
        let plan = EnsemblePlan::new(&yb, &bis, &cfg)?;
        let nets = (0..cfg.ensemble_size)
            .into_par_iter()
            .map(|m| plan.member(m))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let dir = out.join(year.to_string());
        for net in &nets {
            io::write_network(&dir, net)?;
        }
        let k = nets.len() as f64;
        let s = YearSummary {
            year,
            banks: yb.len(),
            z: plan.z.clone(),
            expected_density: plan.expected_density(),
            mean_density: nets.iter().map(|n| n.density).sum::<f64>() / k,
            mean_attempts: nets.iter().map(|n| n.attempts as f64).sum::<f64>() / k,
            max_attempts: nets.iter().map(|n| n.attempts).max().unwrap_or(0),
            max_ipf_iterations: nets.iter().filter_map(|n| n.ipf.map(|r| r.iterations)).max(),
        };
        eprintln!(
            "{year}: {} networks, expected density {:.6}, mean realized {:.6}",
            nets.len(),
            s.expected_density,
            s.mean_density
        );
        summaries.push(s);
    }
    io::write_json(&out.join("summary.json"), &summaries)?;
    manifest.finish(&out)?;
    Ok(())
}
