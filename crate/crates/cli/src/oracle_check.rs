use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;
use liqnet::oracle::{run_suite, SuiteConfig};
use liqnet::{ContagionConfig, Variant};
use serde_json::json;

use crate::config::ConfigFile;
use crate::error::{CliError, Result};
use crate::manifest::ManifestBuilder;

#[derive(Args)]
pub struct OracleCheckArgs {
    /// Random instances to draw [default: 20]
    #[arg(long)]
    instances: Option<usize>,
    /// Bank counts, cycled over the instances [default: 3,4,5]
    #[arg(long, value_delimiter = ',')]
    sizes: Vec<usize>,
    /// Variants checked on every instance [default: all four]
    #[arg(long, value_delimiter = ',')]
    variant: Vec<Variant>,
    /// Simulated runs per instance and variant [default: 100000]
    #[arg(long)]
    runs: Option<usize>,
    /// Smallest exact probability of a checked absorbing state [default: 0.001]
    #[arg(long)]
    min_prob: Option<f64>,
    /// Accepted deviation in binomial standard deviations [default: 3]
    #[arg(long)]
    sigma: Option<f64>,
    /// Probability of each directed link [default: 0.6]
    #[arg(long)]
    link_prob: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    beta_star: Option<f64>,
    #[arg(long)]
    phi: Option<f64>,
    #[arg(long)]
    max_steps: Option<usize>,
    /// Master seed [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for oracle_check.csv and the manifest
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run(args: OracleCheckArgs, file: &ConfigFile) -> Result<()> {
    let d = SuiteConfig::default();
    let cd = ContagionConfig::default();
    let contagion = ContagionConfig {
        epsilon: file.get("epsilon", args.epsilon, cd.epsilon)?,
        beta_star: file.get("beta-star", args.beta_star, cd.beta_star)?,
        phi: file.get("phi", args.phi, cd.phi)?,
        max_steps: file.get("max-steps", args.max_steps, cd.max_steps)?,
        ..cd
    };
    contagion.validate()?;
    let cfg = SuiteConfig {
        seed: file.get("seed", args.seed, d.seed)?,
        instances: file.get("instances", args.instances, d.instances)?,
        sizes: file.get_list("sizes", args.sizes, d.sizes.clone())?,
        variants: file.get_list("variant", args.variant, d.variants.clone())?,
        runs: file.get("runs", args.runs, d.runs)?,
        min_prob: file.get("min-prob", args.min_prob, d.min_prob)?,
        link_prob: file.get("link-prob", args.link_prob, d.link_prob)?,
        contagion,
    };
    let sigma = file.get("sigma", args.sigma, 3.0)?;
    if !(0.0..=1.0).contains(&cfg.link_prob) || !(cfg.min_prob >= 0.0) || !(sigma > 0.0) {
        return Err(CliError::Validation("link-prob must lie in [0, 1], min-prob ≥ 0, sigma > 0".into()));
    }
    let out = file.path("out", args.out)?;
    let manifest = ManifestBuilder::new(
        "oracle-check",
        cfg.seed,
        json!({
            "instances": cfg.instances,
            "sizes": cfg.sizes,
            "variants": cfg.variants,
            "runs": cfg.runs,
            "min_prob": cfg.min_prob,
            "link_prob": cfg.link_prob,
            "sigma": sigma,
            "contagion": cfg.contagion,
        }),
    );

    let entries = run_suite(&cfg)?;
    let mut csv = String::from("instance,n,variant,state,exact,observed,frequency,z\n");
    let mut failed = 0;
    for e in &entries {
        let c = &e.comparison;
        let ok = c.within(sigma);
        if !ok {
            failed += 1;
        }
        println!(
            "{} instance {:2} n={} {:<13} states {:2} censored {:5} max|z| {:.2}",
            if ok { "ok  " } else { "FAIL" },
            e.instance,
            e.n,
            e.variant.to_string(),
            c.checks.len(),
            c.censored,
            c.max_abs_z()
        );
        for s in &c.checks {
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{},{},{}",
                e.instance, e.n, e.variant, s.state, s.exact, s.observed, s.frequency, s.z
            );
        }
    }
    if let Some(dir) = &out {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        let p = dir.join("oracle_check.csv");
        std::fs::write(&p, csv).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
        manifest.finish(dir)?;
    }
    if failed > 0 {
        return Err(CliError::CheckFailed(format!(
            "{failed} of {} comparisons outside {sigma} sigma",
            entries.len()
        )));
    }
    println!("all {} comparisons within {sigma} sigma", entries.len());
    Ok(())
}
