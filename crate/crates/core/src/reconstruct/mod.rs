//! Ensemble reconstruction of weighted directed interbank networks.
//!
//! Each member is drawn from a block-constrained fitness model: bank assets
//! and liabilities are split across country blocks following the BIS
//! exposures, one free parameter `z` is calibrated on the target density, a
//! binary topology is sampled link by link, gravity weights are attached and
//! IPF finally restores the balance-sheet strengths lost to the excluded
//! self-loops.

mod fitness;
mod ipf;
mod sample;

pub use fitness::{
    add_ground_bank, augment_bis, block_fitnesses, expected_block_density, expected_density,
    link_probability, pair_probability, solve_density, solve_z, BlockFitnesses, DensityScope,
    ZMode, ZSolution, GROUND_BANK_ID,
};
pub use ipf::{ipf_rebalance, marginal_residual, IpfReport};
pub use sample::{assign_weights, pattern_can_carry, sample_adjacency, supports_strengths, Adjacency};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{BankRecord, BisExposureMatrix, IngestError};
use crate::rng::{self, kind};

#[derive(Debug, Error)]
pub enum ReconstructError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("invalid reconstruction config: {0}")]
    InvalidConfig(String),
    #[error("banks span several years ({0:?}); reconstruct one year at a time")]
    MixedYears(Vec<i32>),
    #[error("no bank records")]
    NoBanks,
    #[error("no admissible pair has a positive fitness product")]
    NoSupport,
    #[error(
        "density target {target} unattainable{}: attainable range is (0, {max})",
        block.as_ref().map(|(u, v)| format!(" in block {u}->{v}")).unwrap_or_default()
    )]
    Unattainable {
        target: f64,
        max: f64,
        block: Option<(String, String)>,
    },
    #[error("no acceptable network after {attempts} draws")]
    RetryCapExceeded { attempts: usize },
    #[error("IPF did not converge in {iterations} iterations (residual {residual:e})")]
    IpfNotConverged { iterations: usize, residual: f64 },
    #[error("IPF infeasible: node {node} has a positive target but no {axis}-links")]
    InfeasiblePattern { node: String, axis: &'static str },
    #[error("IPF targets disagree: row total {rows}, column total {cols}")]
    InconsistentTargets { rows: f64, cols: f64 },
    #[error("network carries no weight")]
    EmptyNetwork,
}

pub type Result<T> = std::result::Result<T, ReconstructError>;

/// Dense `n × n` matrix; `get(i, j)` is the volume lent by `i` to `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    n: usize,
    data: Vec<f64>,
}

impl WeightMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, w: f64) {
        self.data[i * self.n + j] = w;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.row(i).iter().sum()
    }

    pub fn col_sum(&self, j: usize) -> f64 {
        (0..self.n).map(|i| self.get(i, j)).sum()
    }

    pub fn edge_count(&self) -> usize {
        self.data.iter().filter(|&&w| w > 0.0).count()
    }

    /// Non-zero entries in row-major order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > 0.0)
            .map(move |(k, &w)| (k / self.n, k % self.n, w))
    }
}

/// A network node: a bank or the ground bank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub bank_id: String,
    pub country: String,
    pub is_ground: bool,
    /// Total assets `T`, used for asset-weighted statistics (0 for ground).
    pub total_assets: f64,
    /// Out-strength target `A`.
    pub assets: f64,
    /// In-strength target `L`.
    pub liabilities: f64,
}

impl From<&BankRecord> for Node {
    fn from(b: &BankRecord) -> Self {
        Self {
            bank_id: b.bank_id.clone(),
            country: b.country.clone(),
            is_ground: false,
            total_assets: b.total_assets,
            assets: b.interbank_assets,
            liabilities: b.interbank_liabilities,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IpfConfig {
    pub enabled: bool,
    pub tolerance: f64,
    pub max_iter: usize,
}

impl Default for IpfConfig {
    fn default() -> Self {
        Self { enabled: true, tolerance: 1e-9, max_iter: 10_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionConfig {
    /// Target density `ρ_real` in (0, 1).
    pub density: f64,
    pub ensemble_size: usize,
    pub z_mode: ZMode,
    /// Split fitnesses into BIS country blocks; off gives the plain fitness model.
    pub blocks: bool,
    pub ipf: IpfConfig,
    /// Count pairs touching the ground bank in the density.
    pub ground_in_density: bool,
    /// Redraws allowed before giving up on a weakly connected topology.
    pub retry_cap: usize,
    pub seed: u64,
}

impl Default for ReconstructionConfig {
    fn default() -> Self {
        Self {
            density: 0.3,
            ensemble_size: 100,
            z_mode: ZMode::Global,
            blocks: true,
            ipf: IpfConfig::default(),
            ground_in_density: true,
            retry_cap: 1000,
            seed: 0,
        }
    }
}

impl ReconstructionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.density > 0.0 && self.density < 1.0) {
            return Err(ReconstructError::InvalidConfig(format!(
                "density {} must lie in (0, 1)",
                self.density
            )));
        }
        if self.ensemble_size == 0 {
            return Err(ReconstructError::InvalidConfig("ensemble size must be positive".into()));
        }
        if self.retry_cap == 0 {
            return Err(ReconstructError::InvalidConfig("retry cap must be positive".into()));
        }
        if self.ipf.enabled && !(self.ipf.tolerance > 0.0) {
            return Err(ReconstructError::InvalidConfig("IPF tolerance must be positive".into()));
        }
        Ok(())
    }

    pub fn scope(&self) -> DensityScope {
        DensityScope { include_ground: self.ground_in_density }
    }
}

/// One sampled ensemble member.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructedNetwork {
    pub year: i32,
    pub member: usize,
    /// Seed of the member's own random stream.
    pub seed: u64,
    pub nodes: Vec<Node>,
    pub weights: WeightMatrix,
    pub z: ZSolution,
    /// Realised density over the configured pair scope.
    pub density: f64,
    /// Topology draws needed to obtain a weakly connected network.
    pub attempts: usize,
    pub ipf: Option<IpfReport>,
}

impl ReconstructedNetwork {
    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    pub fn out_strength(&self, i: usize) -> f64 {
        self.weights.row_sum(i)
    }

    pub fn in_strength(&self, j: usize) -> f64 {
        self.weights.col_sum(j)
    }
}

/// Realised density of an adjacency pattern under a pair scope.
pub fn realized_density(fit: &BlockFitnesses, w: &WeightMatrix, scope: DensityScope) -> f64 {
    let n = fit.n();
    let (mut links, mut pairs) = (0usize, 0usize);
    for i in 0..n {
        for j in 0..n {
            if scope.admits(fit, i, j) {
                pairs += 1;
                if w.get(i, j) > 0.0 {
                    links += 1;
                }
            }
        }
    }
    if pairs == 0 {
        0.0
    } else {
        links as f64 / pairs as f64
    }
}

/// Everything shared by the members of one year's ensemble.
#[derive(Debug, Clone)]
pub struct EnsemblePlan {
    pub year: i32,
    pub nodes: Vec<Node>,
    pub fitnesses: BlockFitnesses,
    pub z: ZSolution,
    pub config: ReconstructionConfig,
}

impl EnsemblePlan {
    /// Validates the inputs, adds the ground bank and calibrates `z`.
    pub fn new(banks: &[BankRecord], bis: &BisExposureMatrix, config: &ReconstructionConfig) -> Result<Self> {
        config.validate()?;
        let first = banks.first().ok_or(ReconstructError::NoBanks)?;
        let mut years: Vec<i32> = banks.iter().map(|b| b.year).collect();
        years.sort_unstable();
        years.dedup();
        if years.len() > 1 {
            return Err(ReconstructError::MixedYears(years));
        }
        crate::ingest::check_countries(banks, bis)?;
        let nodes = add_ground_bank(banks);
        let fitnesses = if config.blocks {
            block_fitnesses(&nodes, bis)?
        } else {
            BlockFitnesses::unblocked(&nodes)
        };
        let z = solve_z(&fitnesses, config.density, config.z_mode, config.scope())?;
        Ok(Self { year: first.year, nodes, fitnesses, z, config: config.clone() })
    }

    pub fn member_seed(&self, member: usize) -> u64 {
        rng::derive_seed(self.config.seed, &[kind::RECONSTRUCT, rng::year_tag(self.year), member as u64])
    }

    pub fn member(&self, member: usize) -> Result<ReconstructedNetwork> {
        self.member_with_raw(member).map(|(net, _)| net)
    }

    /// Draws one member and also returns its weights before IPF. With IPF on,
    /// topologies IPF cannot balance are redrawn like disconnected ones; the
    /// retry cap covers both.
    pub fn member_with_raw(&self, member: usize) -> Result<(ReconstructedNetwork, WeightMatrix)> {
        let mut r = rng::stream(self.config.seed, &[kind::RECONSTRUCT, rng::year_tag(self.year), member as u64]);
        let cap = self.config.retry_cap;
        let rows: Vec<f64> = self.nodes.iter().map(|n| n.assets).collect();
        let cols: Vec<f64> = self.nodes.iter().map(|n| n.liabilities).collect();
        let labels: Vec<String> = self.nodes.iter().map(|n| n.bank_id.clone()).collect();
        let mut attempts = 0;
        let mut last_err = None;
        while attempts < cap {
            let (adj, used) = match sample_adjacency(&self.fitnesses, &self.z, &mut r, cap - attempts) {
                Ok(x) => x,
                Err(ReconstructError::RetryCapExceeded { .. }) => break,
                Err(e) => return Err(e),
            };
            attempts += used;
            let raw = assign_weights(&self.fitnesses, &self.z, &adj);
            if !self.config.ipf.enabled {
                let net = self.finish(member, raw.clone(), attempts, None);
                return Ok((net, raw));
            }
            if !pattern_can_carry(&adj, &rows, &cols) {
                continue;
            }
            match ipf_rebalance(&raw, &rows, &cols, self.config.ipf.tolerance, self.config.ipf.max_iter, &labels) {
                Ok((w, rep)) => return Ok((self.finish(member, w, attempts, Some(rep)), raw)),
                Err(e @ (ReconstructError::IpfNotConverged { .. } | ReconstructError::InfeasiblePattern { .. })) => {
                    last_err = Some(e)
                }
                Err(e) => return Err(e),
            }
        }
        Err(last_err.unwrap_or(ReconstructError::RetryCapExceeded { attempts: cap }))
    }

    fn finish(&self, member: usize, weights: WeightMatrix, attempts: usize, ipf: Option<IpfReport>) -> ReconstructedNetwork {
        let density = realized_density(&self.fitnesses, &weights, self.config.scope());
        ReconstructedNetwork {
            year: self.year,
            member,
            seed: self.member_seed(member),
            nodes: self.nodes.clone(),
            weights,
            z: self.z.clone(),
            density,
            attempts,
            ipf,
        }
    }

    pub fn expected_density(&self) -> f64 {
        expected_density(&self.fitnesses, &self.z, self.config.scope())
    }
}

/// Generates `config.ensemble_size` members for one year of bank records.
/// Members use independent streams keyed by `(seed, year, member)`, so the
/// output does not depend on the thread count.
pub fn generate_ensemble(
    banks: &[BankRecord],
    bis: &BisExposureMatrix,
    config: &ReconstructionConfig,
) -> Result<Vec<ReconstructedNetwork>> {
    let plan = EnsemblePlan::new(banks, bis, config)?;
    (0..config.ensemble_size)
        .into_par_iter()
        .map(|m| plan.member(m))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn banks() -> Vec<BankRecord> {
        let spec = [
            ("a", "AT", 30.0, 20.0),
            ("b", "AT", 10.0, 15.0),
            ("c", "AT", 5.0, 8.0),
            ("d", "DE", 25.0, 30.0),
            ("e", "DE", 12.0, 10.0),
            ("f", "DE", 6.0, 9.0),
        ];
        spec.iter()
            .map(|&(id, c, a, l)| BankRecord {
                bank_id: id.into(),
                country: c.into(),
                year: 2010,
                total_assets: 10.0 * (a + l),
                interbank_assets: a,
                interbank_liabilities: l,
                liquid_funding: a + l,
            })
            .collect()
    }

    fn bis() -> BisExposureMatrix {
        BisExposureMatrix::new(vec!["AT".into(), "DE".into()], vec![vec![40.0, 10.0], vec![8.0, 50.0]])
    }

    #[test]
    fn ensemble_is_reproducible_and_balanced() {
        let cfg = ReconstructionConfig { density: 0.75, ensemble_size: 4, seed: 11, ..Default::default() };
        let a = generate_ensemble(&banks(), &bis(), &cfg).unwrap();
        let b = generate_ensemble(&banks(), &bis(), &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 4);
        let net = &a[0];
        // ground bank lends Σ L − Σ A = 92 − 88
        assert_eq!(net.n(), 7);
        assert!(net.nodes[6].is_ground);
        for (i, node) in net.nodes.iter().enumerate() {
            assert_eq!(net.weights.get(i, i), 0.0);
            if node.assets > 0.0 {
                assert!((net.out_strength(i) - node.assets).abs() <= 1e-6 * node.assets);
            }
            if node.liabilities > 0.0 {
                assert!((net.in_strength(i) - node.liabilities).abs() <= 1e-6 * node.liabilities);
            }
        }
        // members differ
        assert_ne!(a[0].weights, a[1].weights);
    }

    #[test]
    fn single_member_config() {
        let cfg = ReconstructionConfig { density: 0.5, ensemble_size: 1, seed: 7, ..Default::default() };
        let a = generate_ensemble(&banks(), &bis(), &cfg).unwrap();
        let b = generate_ensemble(&banks(), &bis(), &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn config_validation() {
        for bad in [0.0, 1.0, -0.1] {
            let cfg = ReconstructionConfig { density: bad, ..Default::default() };
            assert!(matches!(cfg.validate(), Err(ReconstructError::InvalidConfig(_))));
        }
        let cfg = ReconstructionConfig { ensemble_size: 0, ..Default::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn mixed_years_rejected() {
        let mut b = banks();
        b[0].year = 2011;
        let err = EnsemblePlan::new(&b, &bis(), &ReconstructionConfig::default()).unwrap_err();
        assert!(matches!(err, ReconstructError::MixedYears(_)));
    }

    #[test]
    fn infeasible_density_reports_range() {
        let cfg = ReconstructionConfig { density: 0.99, ..Default::default() };
        let err = EnsemblePlan::new(&banks(), &bis(), &cfg).unwrap_err();
        match err {
            ReconstructError::Unattainable { max, .. } => assert!(max < 0.99),
            e => panic!("{e}"),
        }
    }
}
