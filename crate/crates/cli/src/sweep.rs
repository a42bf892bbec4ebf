use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;
use liqnet::ingest::Pooling;
use liqnet::io::{self as lio, MetricTables};
use liqnet::{ContagionConfig, Variant};
use serde_json::json;

use crate::config::ConfigFile;
use crate::error::{CliError, Result};
use crate::manifest::ManifestBuilder;
use crate::simulate::{critical_summary, ensemble_years, load_indicators, load_year, resolve_common, simulate_year};

pub const SWEEP_HEADER: &str = "year,variant,beta_star,phi,statistic,value,lower,upper";

#[derive(Args)]
pub struct SweepArgs {
    /// Ensemble directory written by `reconstruct`
    #[arg(long)]
    networks: Option<PathBuf>,
    /// Directory holding banks.csv and spreads.csv (needed by every variant but BM)
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    years: Vec<i32>,
    /// Variants to run, comma-separated [default: BM]
    #[arg(long, value_delimiter = ',')]
    variant: Vec<Variant>,
    /// β* values, comma-separated [default: 0.5]
    #[arg(long, value_delimiter = ',')]
    beta_star: Vec<f64>,
    /// φ values, comma-separated [default: 1]
    #[arg(long, value_delimiter = ',')]
    phi: Vec<f64>,
    /// [default: 1]
    #[arg(long)]
    epsilon: Option<f64>,
    /// [default: 50]
    #[arg(long)]
    max_steps: Option<usize>,
    /// Master seed, shared by every grid point [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// all-years or per-year [default: all-years]
    #[arg(long)]
    pooling: Option<Pooling>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn run(args: SweepArgs, file: &ConfigFile) -> Result<()> {
    let d = ContagionConfig::default();
    let variants = file.get_list("variant", args.variant, vec![d.variant])?;
    let betas = file.get_list("beta-star", args.beta_star, vec![d.beta_star])?;
    let phis = file.get_list("phi", args.phi, vec![d.phi])?;
    let c = resolve_common(
        file,
        args.networks,
        args.data,
        args.years,
        args.pooling,
        args.epsilon,
        args.max_steps,
        args.seed,
        args.out,
    )?;
    let mut grid = Vec::new();
    for &variant in &variants {
        for &beta_star in &betas {
            for &phi in &phis {
                let cfg = ContagionConfig {
                    variant,
                    epsilon: c.epsilon,
                    beta_star,
                    phi,
                    max_steps: c.max_steps,
                    seed: c.seed,
                    theta_override: None,
                };
                cfg.validate()?;
                grid.push(cfg);
            }
        }
    }
    if grid.is_empty() {
        return Err(CliError::Validation("empty parameter grid".into()));
    }

    let years = ensemble_years(&c.networks, &c.years)?;
    let indicators = load_indicators(c.data.as_deref(), &variants, c.pooling)?;
    let mut manifest = ManifestBuilder::new(
        "sweep",
        c.seed,
        json!({
            "variants": variants,
            "beta_star": betas,
            "phi": phis,
            "epsilon": c.epsilon,
            "max_steps": c.max_steps,
            "pooling": c.pooling,
            "years": years.iter().map(|(y, _)| *y).collect::<Vec<_>>(),
        }),
    );
    for (y, dir) in &years {
        manifest.input_dir(&format!("networks/{y}"), dir)?;
    }
    if indicators.is_some() {
        let data = c.data.as_deref().expect("indicators come from --data");
        manifest.input_file("banks", &data.join("banks.csv"))?;
        manifest.input_file("spreads", &data.join("spreads.csv"))?;
    }

    let labels_of = |cfg: &ContagionConfig| {
        [
            ("variant", cfg.variant.to_string()),
            ("beta_star", cfg.beta_star.to_string()),
            ("phi", cfg.phi.to_string()),
        ]
    };
    let mut tables = MetricTables::new(&labels_of(&grid[0]));
    let mut long = format!("{SWEEP_HEADER}\n");
    for (year, dir) in &years {
        let input = load_year(*year, dir, indicators.as_ref())?;
        for cfg in &grid {
            let runs = simulate_year(&input, cfg)?;
            let r = &runs.result;
            tables.append(&labels_of(cfg), r, &runs.keys, &input.nodes);
            let head = format!("{year},{},{},{}", cfg.variant, cfg.beta_star, cfg.phi);
            for (name, m) in [("bankruptcy_count", &r.bankruptcy_count), ("bankruptcy_assets", &r.bankruptcy_assets)] {
                let _ = writeln!(long, "{head},{name},{},{},{}", m.mean, m.lower, m.upper);
            }
            let (reached, ct) = critical_summary(r);
            let _ = writeln!(
                long,
                "{head},critical_time,{},{},{}",
                opt(ct.map(|m| m.mean)),
                opt(ct.map(|m| m.lower)),
                opt(ct.map(|m| m.upper))
            );
            let n = r.runs as f64;
            let _ = writeln!(long, "{head},critical_reached_share,{},,", reached as f64 / n);
            let _ = writeln!(long, "{head},censored_share,{},,", r.censored as f64 / n);
            eprintln!(
                "{year} {} β*={} φ={}: bankruptcy ratio {:.4}",
                cfg.variant, cfg.beta_star, cfg.phi, r.bankruptcy_count.mean
            );
        }
    }
    tables.write(&c.out)?;
    let p = c.out.join("sweep.csv");
    std::fs::write(&p, long).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
    lio::write_json(&c.out.join("grid.json"), &grid)?;
    manifest.finish(&c.out)?;
    Ok(())
}
