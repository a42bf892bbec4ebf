//! Exact Markov chain of the contagion process on tiny networks.
//!
//! Every one of the `3^n` compartment assignments is a state. Transition
//! probabilities are rebuilt from the dense weight matrix with the public
//! rate functions, independently of the simulator's compact graph, so the
//! two can be checked against each other.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::contagion::{
    lambda_base, lambda_plus, mu, mu_star, theta, theta_nonlinear, Compartment, CompartmentState, ContagionConfig,
    ContagionError, ContagionGraph, NodeTerms, Simulator, Variant,
};
use crate::reconstruct::{Node, WeightMatrix};
use crate::rng::{self, kind};

pub const MAX_BANKS: usize = 8;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("exact chain supports at most {MAX_BANKS} banks, got {0}")]
    TooLarge(usize),
    #[error("network must contain at least one real bank")]
    Empty,
    #[error(transparent)]
    Contagion(#[from] ContagionError),
}

#[derive(Debug, Clone)]
pub struct ExactChain {
    n: usize,
    is_ground: Vec<bool>,
    /// Sparse rows: `(next state, probability)`.
    rows: Vec<Vec<(u32, f64)>>,
}

fn digit(c: Compartment) -> usize {
    match c {
        Compartment::Exposed => 0,
        Compartment::Distressed => 1,
        Compartment::Bankrupted => 2,
    }
}

impl ExactChain {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn state_count(&self) -> usize {
        self.rows.len()
    }

    pub fn encode(&self, state: &[Compartment]) -> usize {
        assert_eq!(state.len(), self.n);
        state.iter().rev().fold(0, |acc, &c| acc * 3 + digit(c))
    }

    pub fn decode(&self, mut index: usize) -> Vec<Compartment> {
        (0..self.n)
            .map(|_| {
                let c = match index % 3 {
                    0 => Compartment::Exposed,
                    1 => Compartment::Distressed,
                    _ => Compartment::Bankrupted,
                };
                index /= 3;
                c
            })
            .collect()
    }

    /// No distressed bank: the process has stopped.
    pub fn is_absorbing(&self, index: usize) -> bool {
        !self.decode(index).contains(&Compartment::Distressed)
    }

    pub fn row(&self, index: usize) -> &[(u32, f64)] {
        &self.rows[index]
    }

    /// Valid states: the ground bank, if any, is exposed.
    pub fn is_valid(&self, index: usize) -> bool {
        let s = self.decode(index);
        (0..self.n).all(|i| !self.is_ground[i] || s[i] == Compartment::Exposed)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "from,to,probability")?;
        for (from, row) in self.rows.iter().enumerate() {
            for &(to, p) in row {
                writeln!(out, "{from},{to},{p:e}")?;
            }
        }
        Ok(())
    }
}

/// Builds the one-step transition matrix. States without distressed banks
/// loop on themselves, matching the simulator's stopping rule.
pub fn build_chain(
    w: &WeightMatrix,
    is_ground: &[bool],
    config: &ContagionConfig,
    terms: &NodeTerms,
) -> Result<ExactChain, OracleError> {
    let n = w.n();
    assert_eq!(is_ground.len(), n);
    if n > MAX_BANKS {
        return Err(OracleError::TooLarge(n));
    }
    let real = is_ground.iter().filter(|g| !**g).count();
    if real == 0 {
        return Err(OracleError::Empty);
    }
    let variant = config.variant;
    let states = 3usize.pow(n as u32);
    let mut chain = ExactChain { n, is_ground: is_ground.to_vec(), rows: Vec::with_capacity(states) };

    for index in 0..states {
        let state = chain.decode(index);
        if !state.contains(&Compartment::Distressed) {
            chain.rows.push(vec![(index as u32, 1.0)]);
            continue;
        }
        let exposed = (0..n).filter(|&i| !is_ground[i] && state[i] == Compartment::Exposed).count();
        let th = if !variant.uses_theta() {
            1.0
        } else if let Some(t) = config.theta_override {
            t
        } else {
            theta_nonlinear(theta(exposed as f64 / real as f64, config.beta_star), config.phi, config.theta_max())
        };

        // (bank, probability of moving, compartment it moves to)
        let mut moves: Vec<(usize, f64, Compartment)> = Vec::new();
        for j in 0..n {
            if is_ground[j] {
                continue;
            }
            match state[j] {
                Compartment::Exposed => {
                    let mut survive = 1.0;
                    for i in 0..n {
                        if w.get(i, j) <= 0.0 || !state[i].is_infectious() {
                            continue;
                        }
                        let gamma = if variant.uses_node_term() { terms.gamma[i] } else { 0.0 };
                        let rate = lambda_plus(lambda_base(w, i, j), gamma, th);
                        let scale = if state[i] == Compartment::Distressed { config.epsilon } else { 1.0 };
                        survive *= 1.0 - scale * rate;
                    }
                    moves.push((j, 1.0 - survive, Compartment::Distressed));
                }
                Compartment::Distressed => {
                    let m = mu(w, &state, j);
                    let p = if variant.uses_resilience() { mu_star(m, terms.nu[j]) } else { m };
                    moves.push((j, p, Compartment::Bankrupted));
                }
                Compartment::Bankrupted => {}
            }
        }

        let mut row = Vec::new();
        for mask in 0u32..(1 << moves.len()) {
            let mut p = 1.0;
            let mut next = state.clone();
            for (k, &(bank, q, to)) in moves.iter().enumerate() {
                if mask >> k & 1 == 1 {
                    p *= q;
                    next[bank] = to;
                } else {
                    p *= 1.0 - q;
                }
            }
            if p > 0.0 {
                row.push((chain.encode(&next) as u32, p));
            }
        }
        chain.rows.push(row);
    }
    Ok(chain)
}

/// Distribution over states after `horizon` steps from `initial`.
pub fn absorbing_distribution(chain: &ExactChain, initial: &[Compartment], horizon: usize) -> Vec<f64> {
    let mut dist = vec![0.0; chain.state_count()];
    dist[chain.encode(initial)] = 1.0;
    for _ in 0..horizon {
        let mut next = vec![0.0; dist.len()];
        for (from, &mass) in dist.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            for &(to, p) in chain.row(from) {
                next[to as usize] += mass * p;
            }
        }
        dist = next;
    }
    dist
}

/// A small random network with node terms and a seed bank.
#[derive(Debug, Clone)]
pub struct TinyInstance {
    pub weights: WeightMatrix,
    pub terms: NodeTerms,
    pub seed_bank: usize,
}

impl TinyInstance {
    pub fn n(&self) -> usize {
        self.weights.n()
    }

    pub fn graph(&self) -> ContagionGraph {
        let w = &self.weights;
        let nodes = (0..w.n())
            .map(|k| Node {
                bank_id: format!("t{k}"),
                country: "XX".into(),
                is_ground: false,
                total_assets: 1.0 + k as f64,
                assets: w.row_sum(k),
                liabilities: w.col_sum(k),
            })
            .collect();
        ContagionGraph::new(nodes, w)
    }
}

/// Each ordered pair linked with probability `link_prob`, weights uniform in
/// `[0.1, 2)`, node terms uniform in `(-1, 1)`.
pub fn random_instance<R: Rng + ?Sized>(rng: &mut R, n: usize, link_prob: f64) -> TinyInstance {
    let mut weights = WeightMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.random::<f64>() < link_prob {
                weights.set(i, j, rng.random_range(0.1..2.0));
            }
        }
    }
    let gamma = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let nu = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let seed_bank = rng.random_range(0..n);
    TinyInstance { weights, terms: NodeTerms { gamma, nu }, seed_bank }
}

/// Exact against simulated probability of one absorbing state.
#[derive(Debug, Clone, Serialize)]
pub struct StateCheck {
    pub state: usize,
    pub exact: f64,
    pub observed: usize,
    pub frequency: f64,
    /// `(frequency − exact) / sqrt(exact (1 − exact) / runs)`.
    pub z: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleComparison {
    pub runs: usize,
    pub censored: usize,
    pub checks: Vec<StateCheck>,
}

impl OracleComparison {
    pub fn max_abs_z(&self) -> f64 {
        self.checks.iter().map(|c| c.z.abs()).fold(0.0, f64::max)
    }

    /// Every checked state within `k` binomial standard deviations.
    pub fn within(&self, k: f64) -> bool {
        self.checks.iter().all(|c| c.z.abs() <= k)
    }
}

/// Runs the simulator `runs` times from the instance's seed bank and compares
/// the final-state frequencies with the exact absorption probabilities after
/// `config.max_steps` steps, for every absorbing state of probability at
/// least `min_prob`.
pub fn compare_with_simulator(
    inst: &TinyInstance,
    config: &ContagionConfig,
    runs: usize,
    min_prob: f64,
) -> Result<OracleComparison, OracleError> {
    let n = inst.n();
    let chain = build_chain(&inst.weights, &vec![false; n], config, &inst.terms)?;
    let start = CompartmentState::seeded(n, inst.seed_bank);
    let exact = absorbing_distribution(&chain, &start.compartments, config.max_steps);

    let graph = inst.graph();
    let sim = Simulator::new(&graph, config, &inst.terms)?;
    let finals: Vec<Option<usize>> = (0..runs)
        .into_par_iter()
        .map(|k| {
            let mut r = rng::stream(config.seed, &[kind::ORACLE, k as u64]);
            let tr = sim.run(inst.seed_bank, &mut r)?;
            Ok((!tr.censored).then(|| chain.encode(&tr.final_state)))
        })
        .collect::<Result<_, ContagionError>>()?;
    let mut counts = vec![0usize; chain.state_count()];
    let mut censored = 0;
    for f in finals {
        match f {
            Some(s) => counts[s] += 1,
            None => censored += 1,
        }
    }
    let checks = (0..chain.state_count())
        .filter(|&s| chain.is_absorbing(s) && exact[s] >= min_prob)
        .map(|s| {
            let p = exact[s];
            let frequency = counts[s] as f64 / runs as f64;
            let sd = (p * (1.0 - p) / runs as f64).sqrt();
            let z = if sd > 0.0 {
                (frequency - p) / sd
            } else if frequency == p {
                0.0
            } else {
                f64::INFINITY
            };
            StateCheck { state: s, exact: p, observed: counts[s], frequency, z }
        })
        .collect();
    Ok(OracleComparison { runs, censored, checks })
}

/// One instance checked under one variant.
#[derive(Debug, Clone, Serialize)]
pub struct SuiteEntry {
    pub instance: usize,
    pub n: usize,
    pub variant: Variant,
    pub comparison: OracleComparison,
}

/// Parameters of a batch of exact-versus-simulated comparisons.
#[derive(Debug, Clone)]
pub struct SuiteConfig {
    pub seed: u64,
    pub instances: usize,
    /// Instance `k` has `sizes[k % sizes.len()]` banks.
    pub sizes: Vec<usize>,
    pub variants: Vec<Variant>,
    pub runs: usize,
    pub min_prob: f64,
    pub link_prob: f64,
    /// Rate parameters shared by every comparison; variant and seed are overwritten.
    pub contagion: ContagionConfig,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            instances: 20,
            sizes: vec![3, 4, 5],
            variants: Variant::ALL.to_vec(),
            runs: 100_000,
            min_prob: 0.001,
            link_prob: 0.6,
            contagion: ContagionConfig::default(),
        }
    }
}

/// Instance `k` of a suite, drawn from its own stream.
pub fn suite_instance(cfg: &SuiteConfig, k: usize) -> TinyInstance {
    let n = cfg.sizes[k % cfg.sizes.len()];
    let mut r = rng::stream(cfg.seed, &[kind::ORACLE, u64::MAX, k as u64]);
    random_instance(&mut r, n, cfg.link_prob)
}

pub fn run_suite(cfg: &SuiteConfig) -> Result<Vec<SuiteEntry>, OracleError> {
    if cfg.sizes.is_empty() || cfg.variants.is_empty() || cfg.instances == 0 || cfg.runs == 0 {
        return Err(OracleError::Empty);
    }
    if let Some(&n) = cfg.sizes.iter().find(|&&n| n > MAX_BANKS) {
        return Err(OracleError::TooLarge(n));
    }
    let mut out = Vec::with_capacity(cfg.instances * cfg.variants.len());
    for k in 0..cfg.instances {
        let inst = suite_instance(cfg, k);
        for (v, &variant) in cfg.variants.iter().enumerate() {
            let contagion = ContagionConfig {
                variant,
                seed: rng::derive_seed(cfg.seed, &[kind::ORACLE, k as u64, v as u64]),
                ..cfg.contagion.clone()
            };
            let comparison = compare_with_simulator(&inst, &contagion, cfg.runs, cfg.min_prob)?;
            out.push(SuiteEntry { instance: k, n: inst.n(), variant, comparison });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contagion::Variant;
    use Compartment::*;

    fn matrix(rows: &[&[f64]]) -> WeightMatrix {
        let mut w = WeightMatrix::zeros(rows.len());
        for (i, r) in rows.iter().enumerate() {
            for (j, &x) in r.iter().enumerate() {
                w.set(i, j, x);
            }
        }
        w
    }

    fn prob(chain: &ExactChain, from: &[Compartment], to: &[Compartment]) -> f64 {
        let t = chain.encode(to) as u32;
        chain.row(chain.encode(from)).iter().filter(|e| e.0 == t).map(|e| e.1).sum()
    }

    #[test]
    fn rows_are_stochastic() {
        let w = matrix(&[&[0.0, 2.0, 1.0, 0.0], &[1.0, 0.0, 0.0, 3.0], &[0.5, 0.5, 0.0, 1.0], &[0.0, 1.0, 2.0, 0.0]]);
        for v in Variant::ALL {
            let cfg = ContagionConfig { variant: v, beta_star: 0.7, phi: 2.0, ..Default::default() };
            let terms = NodeTerms { gamma: vec![0.3, -0.5, 0.9, 0.0], nu: vec![-0.2, 0.4, 0.0, 0.8] };
            let chain = build_chain(&w, &[false; 4], &cfg, &terms).unwrap();
            assert_eq!(chain.state_count(), 81);
            for s in 0..81 {
                let total: f64 = chain.row(s).iter().map(|e| e.1).sum();
                assert!((total - 1.0).abs() < 1e-12, "{v}: row {s} sums to {total}");
            }
        }
    }

    #[test]
    fn absorbing_states_are_the_distress_free_ones() {
        let w = matrix(&[&[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0], &[1.0, 0.0, 0.0]]);
        let chain = build_chain(&w, &[false; 3], &ContagionConfig::default(), &NodeTerms::zeros(3)).unwrap();
        for s in 0..27 {
            let self_loop = chain.row(s) == [(s as u32, 1.0)];
            assert_eq!(self_loop, chain.is_absorbing(s), "state {s}");
        }
    }

    #[test]
    fn encode_decode_roundtrip() {
        let w = WeightMatrix::zeros(4);
        let chain = build_chain(&w, &[false; 4], &ContagionConfig::default(), &NodeTerms::zeros(4)).unwrap();
        for s in 0..81 {
            assert_eq!(chain.encode(&chain.decode(s)), s);
        }
    }

    #[test]
    fn too_large_rejected() {
        let w = WeightMatrix::zeros(9);
        let err = build_chain(&w, &[false; 9], &ContagionConfig::default(), &NodeTerms::zeros(9)).unwrap_err();
        assert_eq!(err, OracleError::TooLarge(9));
    }

    /// A lone bank has no lenders, so `μ = 0` and it stays distressed.
    #[test]
    fn single_bank_never_defaults() {
        let w = WeightMatrix::zeros(1);
        let chain = build_chain(&w, &[false], &ContagionConfig::default(), &NodeTerms::zeros(1)).unwrap();
        let d = absorbing_distribution(&chain, &[Distressed], 50);
        assert_eq!(d[chain.encode(&[Distressed])], 1.0);
    }

    #[test]
    fn zero_weight_network_is_frozen() {
        let w = WeightMatrix::zeros(3);
        let chain = build_chain(&w, &[false; 3], &ContagionConfig::default(), &NodeTerms::zeros(3)).unwrap();
        let start = [Exposed, Distressed, Exposed];
        assert_eq!(chain.row(chain.encode(&start)), [(chain.encode(&start) as u32, 1.0)]);
    }

    /// Line 0 → 1 → 2 with a return loan 2 → 0, weights chosen so the
    /// shares are easy: λ01 = 1, λ12 = 1, λ20 = 1; bank 1 borrows only from 0.
    #[test]
    fn line_graph_matches_hand_enumeration() {
        let w = matrix(&[&[0.0, 4.0, 0.0], &[0.0, 0.0, 2.0], &[1.0, 0.0, 0.0]]);
        let cfg = ContagionConfig { epsilon: 0.5, ..Default::default() };
        let chain = build_chain(&w, &[false; 3], &cfg, &NodeTerms::zeros(3)).unwrap();
        // from (I1, S, S): bank 1 hit with ε·1 = 0.5; bank 0's lender (2) is healthy so μ0 = 0
        let from = [Distressed, Exposed, Exposed];
        assert_eq!(prob(&chain, &from, &[Distressed, Distressed, Exposed]), 0.5);
        assert_eq!(prob(&chain, &from, &[Distressed, Exposed, Exposed]), 0.5);
        assert_eq!(chain.row(chain.encode(&from)).len(), 2);
        // from (I1, I1, S): bank 2 hit w.p. 0.5, bank 0 μ = 0, bank 1 μ = 1
        let from = [Distressed, Distressed, Exposed];
        assert_eq!(prob(&chain, &from, &[Distressed, Bankrupted, Distressed]), 0.5);
        assert_eq!(prob(&chain, &from, &[Distressed, Bankrupted, Exposed]), 0.5);
        // from (I1, I2, I1): bank 0 borrows only from 2 (I1) → μ0 = 1; bank 2 borrows from 1 (I2) → μ2 = 1
        let from = [Distressed, Bankrupted, Distressed];
        assert_eq!(prob(&chain, &from, &[Bankrupted, Bankrupted, Bankrupted]), 1.0);
    }

    #[test]
    fn ground_bank_stays_exposed() {
        // bank 2 is a ground lender to both real banks
        let w = matrix(&[&[0.0, 1.0, 0.0], &[1.0, 0.0, 0.0], &[1.0, 1.0, 0.0]]);
        let chain = build_chain(&w, &[false, false, true], &ContagionConfig::default(), &NodeTerms::zeros(3)).unwrap();
        let d = absorbing_distribution(&chain, &[Distressed, Exposed, Exposed], 50);
        for (s, &p) in d.iter().enumerate() {
            if p > 0.0 {
                assert!(chain.is_valid(s));
            }
        }
        assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn horizon_zero_is_point_mass() {
        let w = matrix(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let chain = build_chain(&w, &[false; 2], &ContagionConfig::default(), &NodeTerms::zeros(2)).unwrap();
        let d = absorbing_distribution(&chain, &[Distressed, Exposed], 0);
        assert_eq!(d[chain.encode(&[Distressed, Exposed])], 1.0);
        assert_eq!(d.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn deterministic_chain_follows_a_single_path() {
        // two banks lending only to each other: λ = 1, μ jumps to 1 once the other is infectious
        let w = matrix(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let chain = build_chain(&w, &[false; 2], &ContagionConfig::default(), &NodeTerms::zeros(2)).unwrap();
        let path = [
            [Distressed, Exposed],
            [Distressed, Distressed],
            [Bankrupted, Bankrupted],
            [Bankrupted, Bankrupted],
        ];
        for (h, expect) in path.iter().enumerate() {
            let d = absorbing_distribution(&chain, &[Distressed, Exposed], h);
            assert_eq!(d[chain.encode(expect)], 1.0, "horizon {h}");
        }
    }

    #[test]
    fn simulator_agrees_on_a_small_instance() {
        let mut r = rng::stream(3, &[]);
        let inst = random_instance(&mut r, 3, 0.7);
        for v in Variant::ALL {
            let cfg = ContagionConfig { variant: v, seed: 9, ..Default::default() };
            let cmp = compare_with_simulator(&inst, &cfg, 20_000, 0.001).unwrap();
            assert!(!cmp.checks.is_empty());
            let mass: f64 = cmp.checks.iter().map(|c| c.frequency).sum::<f64>() + cmp.censored as f64 / 20_000.0;
            assert!(mass <= 1.0 + 1e-12);
            assert!(cmp.within(4.5), "{v}: {:?}", cmp.checks);
        }
    }

    #[test]
    fn suite_covers_every_instance_and_variant() {
        let cfg = SuiteConfig { instances: 3, runs: 2000, ..Default::default() };
        let entries = run_suite(&cfg).unwrap();
        assert_eq!(entries.len(), 12);
        assert_eq!(entries.iter().map(|e| e.n).collect::<Vec<_>>()[..5], [3, 3, 3, 3, 4]);
        let bad = SuiteConfig { sizes: vec![9], ..cfg };
        assert_eq!(run_suite(&bad).unwrap_err(), OracleError::TooLarge(9));
    }

    #[test]
    fn csv_dump_has_one_line_per_entry() {
        let w = matrix(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let chain = build_chain(&w, &[false; 2], &ContagionConfig::default(), &NodeTerms::zeros(2)).unwrap();
        let mut buf = Vec::new();
        chain.write_csv(&mut buf).unwrap();
        let entries: usize = (0..chain.state_count()).map(|s| chain.row(s).len()).sum();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), entries + 1);
    }
}
