use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::Args;
use liqnet::contagion::{run_all_seeds, RunKey, SimulationInput};
use liqnet::ingest::{self, IndicatorTable, Pooling};
use liqnet::io::{self as lio, MetricTables, EVENTS_HEADER, TRAJECTORY_HEADER};
use liqnet::metrics::{EnsembleResult, MeanCi};
use liqnet::reconstruct::Node;
use liqnet::{ContagionConfig, ContagionGraph, NodeTerms, Trajectory, Variant};
use serde::Serialize;
use serde_json::json;

use crate::config::ConfigFile;
use crate::error::{CliError, Result};
use crate::manifest::ManifestBuilder;

#[derive(Args)]
pub struct SimulateArgs {
    /// Ensemble directory written by `reconstruct`
    #[arg(long)]
    networks: Option<PathBuf>,
    /// Directory holding banks.csv and spreads.csv (needed by every variant but BM)
    #[arg(long)]
    data: Option<PathBuf>,
    /// Years to simulate, comma-separated [default: every year of the ensemble]
    #[arg(long, value_delimiter = ',')]
    years: Vec<i32>,
    /// BM, NT, NT+RES or NT+RES+THETA [default: BM]
    #[arg(long)]
    variant: Option<Variant>,
    /// Contagion scale of distressed lenders [default: 1]
    #[arg(long)]
    epsilon: Option<f64>,
    /// Weight of the systemic multiplier [default: 0.5]
    #[arg(long)]
    beta_star: Option<f64>,
    /// Non-linearity of the multiplier [default: 1]
    #[arg(long)]
    phi: Option<f64>,
    /// Step cap per run [default: 50]
    #[arg(long)]
    max_steps: Option<usize>,
    /// Master seed [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Median scope of the node terms: all-years or per-year [default: all-years]
    #[arg(long)]
    pooling: Option<Pooling>,
    /// Skip trajectories.csv and events.csv
    #[arg(long)]
    no_trajectories: bool,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Contagion parameters shared by `simulate` and `sweep`, minus the swept ones.
pub struct Common {
    pub networks: PathBuf,
    pub data: Option<PathBuf>,
    pub years: Vec<i32>,
    pub pooling: Pooling,
    pub epsilon: f64,
    pub max_steps: usize,
    pub seed: u64,
    pub out: PathBuf,
}

/// Resolves the options every simulation command has in common.
#[allow(clippy::too_many_arguments)]
pub fn resolve_common(
    file: &ConfigFile,
    networks: Option<PathBuf>,
    data: Option<PathBuf>,
    years: Vec<i32>,
    pooling: Option<Pooling>,
    epsilon: Option<f64>,
    max_steps: Option<usize>,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> Result<Common> {
    let d = ContagionConfig::default();
    Ok(Common {
        networks: file.require_path("networks", networks)?,
        data: file.path("data", data)?,
        years: file.get_list("years", years, Vec::new())?,
        pooling: file.get("pooling", pooling, Pooling::default())?,
        epsilon: file.get("epsilon", epsilon, d.epsilon)?,
        max_steps: file.get("max-steps", max_steps, d.max_steps)?,
        seed: file.get("seed", seed, d.seed)?,
        out: file.require_path("out", out)?,
    })
}

/// One year of an ensemble, ready to simulate.
pub struct YearInput {
    pub year: i32,
    pub nodes: Vec<Node>,
    pub graphs: Vec<(usize, ContagionGraph)>,
    pub terms: Vec<NodeTerms>,
}

impl YearInput {
    pub fn inputs(&self) -> Vec<SimulationInput<'_>> {
        self.graphs
            .iter()
            .zip(&self.terms)
            .map(|((network, graph), terms)| SimulationInput { network: *network, graph, terms })
            .collect()
    }
}

/// Years of the ensemble directory, filtered by `wanted` when non-empty.
pub fn ensemble_years(dir: &Path, wanted: &[i32]) -> Result<Vec<(i32, PathBuf)>> {
    if !dir.is_dir() {
        return Err(CliError::Io(format!("{}: no such directory", dir.display())));
    }
    let all = lio::list_years(dir)?;
    if all.is_empty() {
        return Err(CliError::Validation(format!("{}: no year directories", dir.display())));
    }
    if wanted.is_empty() {
        return Ok(all);
    }
    let want: BTreeSet<i32> = wanted.iter().copied().collect();
    if let Some(y) = want.iter().find(|y| !all.iter().any(|(a, _)| a == *y)) {
        return Err(CliError::Validation(format!("year {y} is not in the ensemble")));
    }
    Ok(all.into_iter().filter(|(y, _)| want.contains(y)).collect())
}

/// Node terms for every bank-year, or `None` when no variant needs them.
pub fn load_indicators(data: Option<&Path>, variants: &[Variant], pooling: Pooling) -> Result<Option<IndicatorTable>> {
    let Some(v) = variants.iter().find(|v| v.uses_node_term() || v.uses_resilience()) else {
        return Ok(None);
    };
    let data = data.ok_or_else(|| {
        CliError::Validation(format!(
            "variant {v} needs bank indicators: pass --data with banks.csv and spreads.csv"
        ))
    })?;
    let banks = ingest::load_banks(&data.join("banks.csv"), None)?;
    let spreads = ingest::load_spreads(&data.join("spreads.csv"))?;
    Ok(Some(IndicatorTable::build(&banks, Some(&spreads), pooling)?))
}

pub fn load_year(year: i32, dir: &Path, indicators: Option<&IndicatorTable>) -> Result<YearInput> {
    let files = lio::list_networks(dir)?;
    if files.is_empty() {
        return Err(CliError::Validation(format!("{}: no networks", dir.display())));
    }
    let mut nodes: Option<Vec<Node>> = None;
    let mut graphs = Vec::with_capacity(files.len());
    let mut terms = Vec::with_capacity(files.len());
    for f in files {
        let net = lio::read_network(&f)?;
        if net.year != year {
            return Err(CliError::Validation(format!("{}: network of year {} in directory {year}", f.display(), net.year)));
        }
        match &nodes {
            None => nodes = Some(net.nodes.clone()),
            Some(n) if *n != net.nodes => {
                return Err(CliError::Validation(format!("{}: node table differs from the first member", f.display())));
            }
            Some(_) => {}
        }
        let g = ContagionGraph::from_network(&net);
        let t = match indicators {
            Some(tab) => NodeTerms::from_indicators(&g, tab, year)?,
            None => NodeTerms::zeros(g.n()),
        };
        graphs.push((net.member, g));
        terms.push(t);
    }
    Ok(YearInput { year, nodes: nodes.unwrap_or_default(), graphs, terms })
}

/// Every run of one year, in (network, seed bank) order, and its metrics.
pub struct YearRuns {
    pub keys: Vec<RunKey>,
    pub trajectories: Vec<Trajectory>,
    pub result: EnsembleResult,
}

pub fn simulate_year(input: &YearInput, cfg: &ContagionConfig) -> Result<YearRuns> {
    let (keys, trajectories): (Vec<_>, Vec<_>) = run_all_seeds(input.year, &input.inputs(), cfg)?.into_iter().unzip();
    let result = EnsembleResult::from_trajectories(input.year, &trajectories, &input.nodes, cfg)?;
    Ok(YearRuns { keys, trajectories, result })
}

/// Mean critical time over the runs that reached it.
pub fn critical_summary(r: &EnsembleResult) -> (usize, Option<MeanCi>) {
    let ts: Vec<f64> = r.critical_times.iter().flatten().map(|&t| t as f64).collect();
    (ts.len(), MeanCi::from_samples(&ts).ok())
}

#[derive(Serialize)]
struct YearSummary {
    year: i32,
    networks: usize,
    runs: usize,
    censored: usize,
    bankruptcy_count: MeanCi,
    bankruptcy_assets: MeanCi,
    critical_reached: usize,
    critical_time: Option<MeanCi>,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn write_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

pub fn run(args: SimulateArgs, file: &ConfigFile) -> Result<()> {
    let d = ContagionConfig::default();
    let variant = file.get("variant", args.variant, d.variant)?;
    let beta_star = file.get("beta-star", args.beta_star, d.beta_star)?;
    let phi = file.get("phi", args.phi, d.phi)?;
    let trajectories = file.switch("trajectories", args.no_trajectories, true)?;
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

    let years = ensemble_years(&c.networks, &c.years)?;
    let indicators = load_indicators(c.data.as_deref(), &[variant], c.pooling)?;
    let mut manifest = ManifestBuilder::new(
        "simulate",
        cfg.seed,
        json!({
            "contagion": cfg,
            "pooling": c.pooling,
            "years": years.iter().map(|(y, _)| *y).collect::<Vec<_>>(),
            "trajectories": trajectories,
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

    std::fs::create_dir_all(&c.out).map_err(write_err(&c.out))?;
    let tpath = c.out.join("trajectories.csv");
    let epath = c.out.join("events.csv");
    let mut tw = None;
    let mut ew = None;
    if trajectories {
        let mut t = create(&tpath)?;
        let mut e = create(&epath)?;
        writeln!(t, "{TRAJECTORY_HEADER}").map_err(write_err(&tpath))?;
        writeln!(e, "{EVENTS_HEADER}").map_err(write_err(&epath))?;
        tw = Some(t);
        ew = Some(e);
    }

    let mut tables = MetricTables::new(&[]);
    let mut summaries = Vec::new();
    for (year, dir) in &years {
        let input = load_year(*year, dir, indicators.as_ref())?;
        let YearRuns { keys, trajectories: trajs, result } = simulate_year(&input, &cfg)?;
        if let (Some(t), Some(e)) = (tw.as_mut(), ew.as_mut()) {
            for (key, tr) in keys.iter().zip(&trajs) {
                lio::write_trajectory_rows(t, *key, &input.nodes, tr).map_err(write_err(&tpath))?;
                lio::write_event_rows(e, *key, &input.nodes, tr).map_err(write_err(&epath))?;
            }
        }
        tables.append(&[], &result, &keys, &input.nodes);
        let (reached, ct) = critical_summary(&result);
        eprintln!(
            "{year}: {} runs on {} networks, bankruptcy ratio {:.4} (assets {:.4})",
            result.runs,
            input.graphs.len(),
            result.bankruptcy_count.mean,
            result.bankruptcy_assets.mean
        );
        summaries.push(YearSummary {
            year: *year,
            networks: input.graphs.len(),
            runs: result.runs,
            censored: result.censored,
            bankruptcy_count: result.bankruptcy_count,
            bankruptcy_assets: result.bankruptcy_assets,
            critical_reached: reached,
            critical_time: ct,
        });
    }
    if let (Some(mut t), Some(mut e)) = (tw, ew) {
        t.flush().map_err(write_err(&tpath))?;
        e.flush().map_err(write_err(&epath))?;
    }
    tables.write(&c.out)?;
    lio::write_json(&c.out.join("summary.json"), &json!({ "contagion": cfg, "years": summaries }))?;
    manifest.finish(&c.out)?;
    Ok(())
}
