//! File formats for ensembles, trajectories and metric tables.
//!
//! A network is an edge list `lender_id,borrower_id,weight` next to a JSON
//! sidecar holding the node table and the calibration. Floats are written in
//! Rust's shortest round-trip form, so reading a file back gives the same
//! bits and reruns give the same bytes.

use std::collections::HashMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crate::contagion::RunKey;
use crate::contagion::Trajectory;
use crate::metrics::{EnsembleResult, Weighting};
use crate::reconstruct::{IpfReport, Node, ReconstructedNetwork, WeightMatrix, ZSolution};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

pub type Result<T> = std::result::Result<T, IoError>;

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> IoError + '_ {
    move |source| IoError::Io { path: path.to_path_buf(), source }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> IoError + '_ {
    move |source| IoError::Csv { path: path.to_path_buf(), source }
}

pub const NETWORK_HEADER: &str = "lender_id,borrower_id,weight";
pub const TRAJECTORY_HEADER: &str = "year,network_id,seed_bank,t,s,i1,i2,s_w,i1_w,i2_w,theta";
pub const EVENTS_HEADER: &str = "run_id,bank_id,infected_at,defaulted_at";

/// JSON sidecar of one ensemble member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkMeta {
    pub year: i32,
    pub member: usize,
    pub seed: u64,
    pub z: ZSolution,
    pub density: f64,
    pub attempts: usize,
    pub ipf: Option<IpfReport>,
    pub edges: usize,
    pub nodes: Vec<Node>,
}

pub fn network_stem(member: usize) -> String {
    format!("network_{member:03}")
}

/// Writes `<dir>/network_NNN.csv` and its `.json` sidecar.
pub fn write_network(dir: &Path, net: &ReconstructedNetwork) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let csv_path = dir.join(format!("{}.csv", network_stem(net.member)));
    let mut out = String::with_capacity(net.weights.edge_count() * 32 + 32);
    out.push_str(NETWORK_HEADER);
    out.push('\n');
    for (i, j, w) in net.weights.edges() {
        out.push_str(&format!("{},{},{}\n", net.nodes[i].bank_id, net.nodes[j].bank_id, w));
    }
    fs::write(&csv_path, out).map_err(io_err(&csv_path))?;

    let meta = NetworkMeta {
        year: net.year,
        member: net.member,
        seed: net.seed,
        z: net.z.clone(),
        density: net.density,
        attempts: net.attempts,
        ipf: net.ipf,
        edges: net.weights.edge_count(),
        nodes: net.nodes.clone(),
    };
    let json_path = csv_path.with_extension("json");
    write_json(&json_path, &meta)?;
    Ok(csv_path)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(|source| IoError::Json { path: path.to_path_buf(), source })?;
    s.push('\n');
    fs::write(path, s).map_err(io_err(path))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let s = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&s).map_err(|source| IoError::Json { path: path.to_path_buf(), source })
}

/// Reads a network written by [`write_network`] from its CSV path.
pub fn read_network(csv_path: &Path) -> Result<ReconstructedNetwork> {
    let meta: NetworkMeta = read_json(&csv_path.with_extension("json"))?;
    let index: HashMap<&str, usize> = meta.nodes.iter().enumerate().map(|(k, n)| (n.bank_id.as_str(), k)).collect();
    let fmt = |message: String| IoError::Format { path: csv_path.to_path_buf(), message };
    let mut rdr = csv::Reader::from_path(csv_path).map_err(csv_err(csv_path))?;
    let header = rdr.headers().map_err(csv_err(csv_path))?.iter().collect::<Vec<_>>().join(",");
    if header != NETWORK_HEADER {
        return Err(fmt(format!("expected header `{NETWORK_HEADER}`, found `{header}`")));
    }
    let mut w = WeightMatrix::zeros(meta.nodes.len());
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err(csv_path))?;
        let find = |k: usize| {
            index
                .get(&rec[k])
                .copied()
                .ok_or_else(|| fmt(format!("unknown bank `{}`", &rec[k])))
        };
        let (i, j) = (find(0)?, find(1)?);
        let x: f64 = rec[2].parse().map_err(|e| fmt(format!("bad weight `{}`: {e}", &rec[2])))?;
        if !(x > 0.0 && x.is_finite()) || i == j {
            return Err(fmt(format!("invalid edge {} -> {} ({x})", &rec[0], &rec[1])));
        }
        w.set(i, j, x);
    }
    Ok(ReconstructedNetwork {
        year: meta.year,
        member: meta.member,
        seed: meta.seed,
        nodes: meta.nodes,
        weights: w,
        z: meta.z,
        density: meta.density,
        attempts: meta.attempts,
        ipf: meta.ipf,
    })
}

/// Network CSV files of `dir`, in member order.
pub fn list_networks(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().is_some_and(|e| e == "csv")
                && p.file_stem().and_then(|s| s.to_str()).is_some_and(|s| s.starts_with("network_"))
        })
        .collect();
    out.sort();
    Ok(out)
}

/// Year subdirectories of an ensemble directory, ascending.
pub fn list_years(dir: &Path) -> Result<Vec<(i32, PathBuf)>> {
    let mut out: Vec<(i32, PathBuf)> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .filter_map(|p| p.file_name()?.to_str()?.parse::<i32>().ok().map(|y| (y, p.clone())))
        .collect();
    out.sort();
    Ok(out)
}

pub fn write_trajectory_rows<W: Write>(out: &mut W, key: RunKey, nodes: &[Node], tr: &Trajectory) -> io::Result<()> {
    let seed = &nodes[tr.seed_bank].bank_id;
    for r in &tr.steps {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            key.year, key.network, seed, r.t, r.s, r.i1, r.i2, r.s_w, r.i1_w, r.i2_w, r.theta
        )?;
    }
    Ok(())
}

/// Event rows for every bank that left the exposed compartment.
pub fn write_event_rows<W: Write>(out: &mut W, key: RunKey, nodes: &[Node], tr: &Trajectory) -> io::Result<()> {
    let id = key.run_id();
    let opt = |x: Option<u32>| x.map(|v| v.to_string()).unwrap_or_default();
    for (k, node) in nodes.iter().enumerate() {
        if tr.infected_at[k].is_some() {
            writeln!(out, "{id},{},{},{}", node.bank_id, opt(tr.infected_at[k]), opt(tr.defaulted_at[k]))?;
        }
    }
    Ok(())
}

/// Labels prepended to every metric row (e.g. variant and parameters in a sweep).
pub type Labels<'a> = &'a [(&'a str, String)];

fn label_header(labels: Labels) -> String {
    labels.iter().map(|(k, _)| format!("{k},")).collect()
}

fn label_values(labels: Labels) -> String {
    labels.iter().map(|(_, v)| format!("{v},")).collect()
}

/// Writers for the metric tables; each call appends the rows of one year.
pub struct MetricTables {
    pub prevalence: Vec<u8>,
    pub bankruptcy: Vec<u8>,
    pub countries: Vec<u8>,
    pub mu: Vec<u8>,
    pub critical: Vec<u8>,
}

impl MetricTables {
    pub const FILES: [&'static str; 5] = [
        "prevalence.csv",
        "bankruptcy_ratio.csv",
        "country_decomposition.csv",
        "mu_dynamics.csv",
        "critical_times.csv",
    ];

    pub fn new(labels: Labels) -> Self {
        let l = label_header(labels);
        let line = |s: &str| format!("{l}{s}\n").into_bytes();
        Self {
            prevalence: line("year,weighting,t,compartment,mean,lower,upper"),
            bankruptcy: line("year,weighting,mean,stderr,lower,upper,runs,censored"),
            countries: line("year,weighting,country,mean,lower,upper"),
            mu: line("year,t,count,mean,min,q1,median,q3,max"),
            critical: line("year,network_id,seed_bank,t_star"),
        }
    }

    /// Appends one year's result; `runs` gives the (network, seed bank) of
    /// each critical time in order.
    pub fn append(&mut self, labels: Labels, r: &EnsembleResult, runs: &[RunKey], nodes: &[Node]) {
        let l = label_values(labels);
        let y = r.year;
        for w in Weighting::BOTH {
            let c = r.prevalence(w);
            for t in 0..c.len() {
                for (name, m) in [("s", &c.s[t]), ("i1", &c.i1[t]), ("i2", &c.i2[t])] {
                    let _ = writeln!(self.prevalence, "{l}{y},{},{t},{name},{},{},{}", w.as_str(), m.mean, m.lower, m.upper);
                }
            }
            let b = r.bankruptcy(w);
            let _ = writeln!(
                self.bankruptcy,
                "{l}{y},{},{},{},{},{},{},{}",
                w.as_str(),
                b.mean,
                b.stderr,
                b.lower,
                b.upper,
                r.runs,
                r.censored
            );
            for (country, m) in r.countries(w) {
                let _ = writeln!(self.countries, "{l}{y},{},{country},{},{},{}", w.as_str(), m.mean, m.lower, m.upper);
            }
        }
        for m in &r.mu {
            let _ = writeln!(
                self.mu,
                "{l}{y},{},{},{},{},{},{},{},{}",
                m.t, m.count, m.mean, m.min, m.q1, m.median, m.q3, m.max
            );
        }
        for (key, t) in runs.iter().zip(&r.critical_times) {
            let t = t.map(|v| v.to_string()).unwrap_or_default();
            let _ = writeln!(self.critical, "{l}{y},{},{},{t}", key.network, nodes[key.seed_bank].bank_id);
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        for (name, data) in Self::FILES.iter().zip(self.tables()) {
            let p = dir.join(name);
            fs::write(&p, data).map_err(io_err(&p))?;
        }
        Ok(())
    }

    pub fn tables(&self) -> [&[u8]; 5] {
        [&self.prevalence, &self.bankruptcy, &self.countries, &self.mu, &self.critical]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{BankRecord, BisExposureMatrix};
    use crate::reconstruct::{generate_ensemble, ReconstructionConfig};

    fn small_network() -> ReconstructedNetwork {
        let banks: Vec<BankRecord> = [("a", "AT", 5.0, 4.0), ("b", "AT", 3.0, 2.0), ("c", "DE", 2.0, 4.0), ("d", "DE", 4.0, 4.0)]
            .iter()
            .map(|&(id, c, a, l)| BankRecord {
                bank_id: id.into(),
                country: c.into(),
                year: 2010,
                total_assets: 50.0,
                interbank_assets: a,
                interbank_liabilities: l,
                liquid_funding: 10.0,
            })
            .collect();
        let bis = BisExposureMatrix::new(vec!["AT".into(), "DE".into()], vec![vec![6.0, 2.0], vec![2.0, 5.0]]);
        let cfg = ReconstructionConfig { density: 0.8, ensemble_size: 1, seed: 3, ..Default::default() };
        generate_ensemble(&banks, &bis, &cfg).unwrap().remove(0)
    }

    #[test]
    fn network_roundtrip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let net = small_network();
        let path = write_network(dir.path(), &net).unwrap();
        assert_eq!(path.file_name().unwrap(), "network_000.csv");
        let back = read_network(&path).unwrap();
        assert_eq!(back, net);
        assert_eq!(list_networks(dir.path()).unwrap(), vec![path]);
    }

    #[test]
    fn rejects_unknown_bank() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_network(dir.path(), &small_network()).unwrap();
        fs::write(&path, format!("{NETWORK_HEADER}\nzz,a,1.0\n")).unwrap();
        assert!(matches!(read_network(&path), Err(IoError::Format { .. })));
    }
}
