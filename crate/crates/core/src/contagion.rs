//! Exposed-Distressed-Bankrupted (EDB) liquidity contagion.
//!
//! Lenders that are distressed (`I1`) or bankrupted (`I2`) withdraw funding
//! from their borrowers: an exposed borrower `j` is hit by lender `i` with
//! probability `λ_ij`, its share of `i`'s interbank lending, possibly bent by
//! the lender's node term `γ_i` and the systemic multiplier `θ(t)`. A
//! distressed bank defaults with probability `μ_i(t)`, the share of its
//! funding that came from infectious lenders, optionally bent by its
//! resilience `ν_i`. There is no recovery.
//!
//! Updates are synchronous: every transition of step `t → t+1` is computed
//! from the state at `t`, and newly distressed banks become contagious at
//! `t+1`. Rates act as per-step Bernoulli probabilities.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::IndicatorTable;
use crate::reconstruct::{Node, ReconstructedNetwork, WeightMatrix};
use crate::rng::{self, kind, SimRng};

#[derive(Debug, Error, PartialEq)]
pub enum ContagionError {
    #[error("invalid contagion config: {0}")]
    InvalidConfig(String),
    #[error("seed bank {0} is not a real bank of the network")]
    InvalidSeed(usize),
    #[error("no indicators for bank {bank_id} in year {year}")]
    MissingIndicator { bank_id: String, year: i32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Compartment {
    /// Exposed (`S`): funded, but lenders may still withdraw.
    Exposed,
    /// Distressed (`I1`): contagious, may default.
    Distressed,
    /// Bankrupted (`I2`): contagious, absorbing.
    Bankrupted,
}

impl Compartment {
    #[inline]
    pub fn is_infectious(self) -> bool {
        !matches!(self, Compartment::Exposed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// Benchmark: `λ_ij` and `μ_i`.
    #[serde(rename = "BM")]
    Bm,
    /// Node term in the contagion rate: `λ*`.
    #[serde(rename = "NT")]
    Nt,
    /// `λ*` and resilience in the default rate: `μ*`.
    #[serde(rename = "NT+RES")]
    NtRes,
    /// `λ⁺` with the systemic multiplier, and `μ*`.
    #[serde(rename = "NT+RES+THETA")]
    NtResTheta,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Bm, Variant::Nt, Variant::NtRes, Variant::NtResTheta];

    pub fn uses_node_term(self) -> bool {
        !matches!(self, Variant::Bm)
    }

    pub fn uses_resilience(self) -> bool {
        matches!(self, Variant::NtRes | Variant::NtResTheta)
    }

    pub fn uses_theta(self) -> bool {
        matches!(self, Variant::NtResTheta)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Bm => "BM",
            Variant::Nt => "NT",
            Variant::NtRes => "NT+RES",
            Variant::NtResTheta => "NT+RES+THETA",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_uppercase().as_str() {
            "BM" => Ok(Variant::Bm),
            "NT" => Ok(Variant::Nt),
            "NT+RES" | "RES" => Ok(Variant::NtRes),
            "NT+RES+THETA" | "THETA" => Ok(Variant::NtResTheta),
            _ => Err(format!("unknown variant '{s}' (expected BM | NT | NT+RES | NT+RES+THETA)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContagionConfig {
    pub variant: Variant,
    /// Scale of the distressed lenders' contagion relative to bankrupted ones.
    pub epsilon: f64,
    /// Weight `β*` of the systemic multiplier `θ = (1+β*)s`.
    pub beta_star: f64,
    /// Speed `φ` of the non-linear multiplier `θ⁺ = θ^φ / θ_max^(φ−1)`.
    pub phi: f64,
    pub max_steps: usize,
    pub seed: u64,
    /// Pins the multiplier used by the THETA variant (diagnostics only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_override: Option<f64>,
}

impl Default for ContagionConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Bm,
            epsilon: 1.0,
            beta_star: 0.5,
            phi: 1.0,
            max_steps: 50,
            seed: 0,
            theta_override: None,
        }
    }
}

impl ContagionConfig {
    pub fn validate(&self) -> Result<(), ContagionError> {
        let bad = |m: String| Err(ContagionError::InvalidConfig(m));
        if !(0.0..=1.0).contains(&self.epsilon) {
            return bad(format!("epsilon {} must lie in [0, 1]", self.epsilon));
        }
        if !(self.beta_star >= 0.0 && self.beta_star.is_finite()) {
            return bad(format!("beta-star {} must be finite and non-negative", self.beta_star));
        }
        if !(self.phi >= 1.0 && self.phi.is_finite()) {
            return bad(format!("phi {} must be at least 1", self.phi));
        }
        if self.max_steps == 0 {
            return bad("max steps must be at least 1".into());
        }
        if let Some(t) = self.theta_override {
            if !(t >= 0.0 && t.is_finite()) {
                return bad(format!("theta override {t} must be finite and non-negative"));
            }
        }
        Ok(())
    }

    pub fn theta_max(&self) -> f64 {
        1.0 + self.beta_star
    }
}

// ---------------------------------------------------------------------------
// Rates
// ---------------------------------------------------------------------------

/// `base^exponent` for rates in `[0, 1]`, with `0^0 := 0`: no exposure, no
/// transmission.
#[inline]
pub fn power_rate(base: f64, exponent: f64) -> f64 {
    if base <= 0.0 {
        0.0
    } else {
        base.powf(exponent)
    }
}

/// `λ_ij = w_ij / Σ_k w_ik`; zero for a lender without loans.
pub fn lambda_base(w: &WeightMatrix, lender: usize, borrower: usize) -> f64 {
    let out = w.row_sum(lender);
    if out > 0.0 {
        w.get(lender, borrower) / out
    } else {
        0.0
    }
}

/// `λ* = λ^(1−γ)`.
#[inline]
pub fn lambda_star(lambda: f64, gamma: f64) -> f64 {
    power_rate(lambda, 1.0 - gamma)
}

/// Systemic risk multiplier `θ = (1+β*)·s`.
#[inline]
pub fn theta(s: f64, beta_star: f64) -> f64 {
    (1.0 + beta_star) * s
}

/// `θ⁺ = θ^φ / θ_max^(φ−1)`; keeps `[0, θ_max]` and is the identity at `φ = 1`.
#[inline]
pub fn theta_nonlinear(theta: f64, phi: f64, theta_max: f64) -> f64 {
    theta.powf(phi) / theta_max.powf(phi - 1.0)
}

/// `λ⁺ = λ^((1−γ)·θ)`.
#[inline]
pub fn lambda_plus(lambda: f64, gamma: f64, theta: f64) -> f64 {
    power_rate(lambda, (1.0 - gamma) * theta)
}

/// `μ_i = Σ_{j∈H} w_ji / Σ_j w_ji` with `H` the infectious lenders of `i`.
pub fn mu(w: &WeightMatrix, state: &[Compartment], borrower: usize) -> f64 {
    let n = w.n();
    let total: f64 = (0..n).map(|j| w.get(j, borrower)).sum();
    if total <= 0.0 {
        return 0.0;
    }
    let hit: f64 = (0..n)
        .filter(|&j| state[j].is_infectious())
        .map(|j| w.get(j, borrower))
        .sum();
    hit / total
}

/// `μ* = μ^(1−ν)`.
#[inline]
pub fn mu_star(mu: f64, nu: f64) -> f64 {
    power_rate(mu, 1.0 - nu)
}

// ---------------------------------------------------------------------------
// Graph and node terms
// ---------------------------------------------------------------------------

/// Network in the compact form the simulator walks: in-edges per borrower,
/// each carrying the lender, the weight and the lender's share `λ`.
#[derive(Debug, Clone)]
pub struct ContagionGraph {
    nodes: Vec<Node>,
    in_offsets: Vec<usize>,
    in_lender: Vec<u32>,
    in_weight: Vec<f64>,
    in_lambda: Vec<f64>,
    in_strength: Vec<f64>,
    real: usize,
    real_assets: f64,
}

impl ContagionGraph {
    pub fn new(nodes: Vec<Node>, w: &WeightMatrix) -> Self {
        let n = nodes.len();
        assert_eq!(w.n(), n, "weight matrix and node list disagree");
        let out: Vec<f64> = (0..n).map(|i| w.row_sum(i)).collect();
        let mut in_offsets = Vec::with_capacity(n + 1);
        let mut in_lender = Vec::new();
        let mut in_weight = Vec::new();
        let mut in_lambda = Vec::new();
        let mut in_strength = Vec::with_capacity(n);
        in_offsets.push(0);
        for j in 0..n {
            let mut s = 0.0;
            for i in 0..n {
                let x = w.get(i, j);
                if x > 0.0 {
                    in_lender.push(i as u32);
                    in_weight.push(x);
                    in_lambda.push(x / out[i]);
                    s += x;
                }
            }
            in_strength.push(s);
            in_offsets.push(in_lender.len());
        }
        let real = nodes.iter().filter(|n| !n.is_ground).count();
        let real_assets = nodes.iter().filter(|n| !n.is_ground).map(|n| n.total_assets).sum();
        Self { nodes, in_offsets, in_lender, in_weight, in_lambda, in_strength, real, real_assets }
    }

    pub fn from_network(net: &ReconstructedNetwork) -> Self {
        Self::new(net.nodes.clone(), &net.weights)
    }

    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// Banks that take part in the dynamics (ground bank excluded).
    pub fn real_count(&self) -> usize {
        self.real
    }

    pub fn is_ground(&self, i: usize) -> bool {
        self.nodes[i].is_ground
    }

    pub fn real_indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n()).filter(|&i| !self.nodes[i].is_ground)
    }

    pub fn edge_count(&self) -> usize {
        self.in_lender.len()
    }

    #[inline]
    fn in_range(&self, j: usize) -> std::ops::Range<usize> {
        self.in_offsets[j]..self.in_offsets[j + 1]
    }
}

/// Node terms aligned with a graph's node order; ground bank entries are 0.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeTerms {
    pub gamma: Vec<f64>,
    pub nu: Vec<f64>,
}

impl NodeTerms {
    pub fn zeros(n: usize) -> Self {
        Self { gamma: vec![0.0; n], nu: vec![0.0; n] }
    }

    pub fn from_indicators(
        graph: &ContagionGraph,
        table: &IndicatorTable,
        year: i32,
    ) -> Result<Self, ContagionError> {
        let mut t = Self::zeros(graph.n());
        for (k, node) in graph.nodes().iter().enumerate() {
            if node.is_ground {
                continue;
            }
            let (g, nu) = table.lookup(&node.bank_id, year).ok_or_else(|| ContagionError::MissingIndicator {
                bank_id: node.bank_id.clone(),
                year,
            })?;
            t.gamma[k] = g;
            t.nu[k] = nu;
        }
        Ok(t)
    }
}

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CompartmentState {
    pub compartments: Vec<Compartment>,
    pub t: usize,
}

impl CompartmentState {
    /// Seed distressed, everyone else exposed.
    pub fn seeded(n: usize, seed: usize) -> Self {
        let mut compartments = vec![Compartment::Exposed; n];
        compartments[seed] = Compartment::Distressed;
        Self { compartments, t: 0 }
    }

    pub fn count(&self, c: Compartment) -> usize {
        self.compartments.iter().filter(|&&x| x == c).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub s_count: usize,
    pub i1_count: usize,
    pub i2_count: usize,
    pub s: f64,
    pub i1: f64,
    pub i2: f64,
    pub s_w: f64,
    pub i1_w: f64,
    pub i2_w: f64,
    /// Linear multiplier `(1+β*)·s(t)`, recorded for every variant.
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub seed_bank: usize,
    /// States `t = 0..=T` where `T` is the absorption step or the cap.
    pub steps: Vec<StepRecord>,
    pub infected_at: Vec<Option<u32>>,
    pub defaulted_at: Vec<Option<u32>>,
    /// Default probability of every distressed bank during step `t → t+1`
    /// (`μ`, or `μ*` for resilience variants).
    pub mu: Vec<Vec<(u32, f64)>>,
    pub final_state: Vec<Compartment>,
    /// Stopped at the step cap with distressed banks left.
    pub censored: bool,
}

impl Trajectory {
    pub fn last(&self) -> &StepRecord {
        self.steps.last().expect("trajectory has at least the initial state")
    }
}

/// Per-step diagnostics of one synchronous update.
#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    pub theta: f64,
    pub mu: Vec<(u32, f64)>,
}

pub struct Simulator<'a> {
    graph: &'a ContagionGraph,
    config: &'a ContagionConfig,
    gamma: Vec<f64>,
    nu: Option<Vec<f64>>,
}

impl<'a> Simulator<'a> {
    pub fn new(
        graph: &'a ContagionGraph,
        config: &'a ContagionConfig,
        terms: &NodeTerms,
    ) -> Result<Self, ContagionError> {
        config.validate()?;
        assert_eq!(terms.gamma.len(), graph.n());
        assert_eq!(terms.nu.len(), graph.n());
        let gamma = if config.variant.uses_node_term() {
            terms.gamma.clone()
        } else {
            vec![0.0; graph.n()]
        };
        let nu = config.variant.uses_resilience().then(|| terms.nu.clone());
        Ok(Self { graph, config, gamma, nu })
    }

    pub fn graph(&self) -> &ContagionGraph {
        self.graph
    }

    /// Exposed fraction over real banks.
    pub fn exposed_fraction(&self, state: &[Compartment]) -> f64 {
        let s = self
            .graph
            .real_indices()
            .filter(|&i| state[i] == Compartment::Exposed)
            .count();
        s as f64 / self.graph.real_count() as f64
    }

    /// Multiplier applied in the exponent of the contagion rate.
    pub fn effective_theta(&self, state: &[Compartment]) -> f64 {
        if !self.config.variant.uses_theta() {
            return 1.0;
        }
        if let Some(t) = self.config.theta_override {
            return t;
        }
        let raw = theta(self.exposed_fraction(state), self.config.beta_star);
        theta_nonlinear(raw, self.config.phi, self.config.theta_max())
    }

    /// Probability that exposed bank `j` becomes distressed this step, or
    /// `None` when no lender of `j` is infectious.
    pub fn infection_probability(&self, state: &[Compartment], j: usize, theta_eff: f64) -> Option<f64> {
        let g = self.graph;
        let mut survival = 1.0;
        let mut exposed = false;
        for k in g.in_range(j) {
            let i = g.in_lender[k] as usize;
            let scale = match state[i] {
                Compartment::Exposed => continue,
                Compartment::Distressed => self.config.epsilon,
                Compartment::Bankrupted => 1.0,
            };
            exposed = true;
            let rate = lambda_plus(g.in_lambda[k], self.gamma[i], theta_eff);
            survival *= 1.0 - scale * rate;
        }
        exposed.then(|| 1.0 - survival)
    }

    /// Default probability of distressed bank `i` (`μ` or `μ*`).
    pub fn default_probability(&self, state: &[Compartment], i: usize) -> f64 {
        let g = self.graph;
        let total = g.in_strength[i];
        let m = if total > 0.0 {
            let mut hit = 0.0;
            for k in g.in_range(i) {
                if state[g.in_lender[k] as usize].is_infectious() {
                    hit += g.in_weight[k];
                }
            }
            hit / total
        } else {
            0.0
        };
        match &self.nu {
            Some(nu) => mu_star(m, nu[i]),
            None => m,
        }
    }

    fn advance<R: Rng + ?Sized>(&self, state: &CompartmentState, rng: &mut R) -> (CompartmentState, StepInfo) {
        let cur = &state.compartments;
        let theta_eff = self.effective_theta(cur);
        let mut next = cur.clone();
        let mut mus = Vec::new();
        for j in 0..self.graph.n() {
            if self.graph.is_ground(j) {
                continue;
            }
            match cur[j] {
                Compartment::Exposed => {
                    if let Some(p) = self.infection_probability(cur, j, theta_eff) {
                        if rng.random::<f64>() < p {
                            next[j] = Compartment::Distressed;
                        }
                    }
                }
                Compartment::Distressed => {
                    let m = self.default_probability(cur, j);
                    mus.push((j as u32, m));
                    if rng.random::<f64>() < m {
                        next[j] = Compartment::Bankrupted;
                    }
                }
                Compartment::Bankrupted => {}
            }
        }
        let raw_theta = theta(self.exposed_fraction(cur), self.config.beta_star);
        (
            CompartmentState { compartments: next, t: state.t + 1 },
            StepInfo { theta: raw_theta, mu: mus },
        )
    }

    /// One synchronous update `t → t+1`.
    pub fn step<R: Rng + ?Sized>(&self, state: &CompartmentState, rng: &mut R) -> CompartmentState {
        self.advance(state, rng).0
    }

    pub fn record(&self, state: &CompartmentState) -> StepRecord {
        let (mut sc, mut i1c, mut i2c) = (0, 0, 0);
        let (mut sw, mut i1w, mut i2w) = (0.0, 0.0, 0.0);
        for i in self.graph.real_indices() {
            let a = self.graph.nodes[i].total_assets;
            match state.compartments[i] {
                Compartment::Exposed => {
                    sc += 1;
                    sw += a;
                }
                Compartment::Distressed => {
                    i1c += 1;
                    i1w += a;
                }
                Compartment::Bankrupted => {
                    i2c += 1;
                    i2w += a;
                }
            }
        }
        let n = self.graph.real_count() as f64;
        let ta = self.graph.real_assets;
        let frac = |x: f64| if ta > 0.0 { x / ta } else { 0.0 };
        let s = sc as f64 / n;
        StepRecord {
            t: state.t,
            s_count: sc,
            i1_count: i1c,
            i2_count: i2c,
            s,
            i1: i1c as f64 / n,
            i2: i2c as f64 / n,
            s_w: frac(sw),
            i1_w: frac(i1w),
            i2_w: frac(i2w),
            theta: theta(s, self.config.beta_star),
        }
    }

    /// Runs from a single distressed seed until no bank is distressed or the
    /// step cap is reached.
    pub fn run<R: Rng + ?Sized>(&self, seed_bank: usize, rng: &mut R) -> Result<Trajectory, ContagionError> {
        let n = self.graph.n();
        if seed_bank >= n || self.graph.is_ground(seed_bank) {
            return Err(ContagionError::InvalidSeed(seed_bank));
        }
        let mut state = CompartmentState::seeded(n, seed_bank);
        let mut infected_at = vec![None; n];
        let mut defaulted_at = vec![None; n];
        infected_at[seed_bank] = Some(0);
        let mut steps = vec![self.record(&state)];
        let mut mu = Vec::new();
        while steps.last().unwrap().i1_count > 0 && state.t < self.config.max_steps {
            let (next, info) = self.advance(&state, rng);
            for i in 0..n {
                if state.compartments[i] != next.compartments[i] {
                    match next.compartments[i] {
                        Compartment::Distressed => infected_at[i] = Some(next.t as u32),
                        Compartment::Bankrupted => defaulted_at[i] = Some(next.t as u32),
                        Compartment::Exposed => unreachable!("no recovery"),
                    }
                }
            }
            mu.push(info.mu);
            state = next;
            steps.push(self.record(&state));
        }
        let censored = steps.last().unwrap().i1_count > 0;
        Ok(Trajectory {
            seed_bank,
            steps,
            infected_at,
            defaulted_at,
            mu,
            final_state: state.compartments,
            censored,
        })
    }
}

/// Identifies one run: a year, an ensemble member and the seed bank index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RunKey {
    pub year: i32,
    pub network: usize,
    pub seed_bank: usize,
}

impl RunKey {
    pub fn run_id(&self) -> String {
        format!("{}-{:03}-{:03}", self.year, self.network, self.seed_bank)
    }

    /// Random stream of this run under `master`.
    pub fn stream(&self, master: u64) -> SimRng {
        rng::stream(
            master,
            &[kind::CONTAGION, rng::year_tag(self.year), self.network as u64, self.seed_bank as u64],
        )
    }
}

/// One network of a year's ensemble, ready for simulation.
pub struct SimulationInput<'a> {
    pub network: usize,
    pub graph: &'a ContagionGraph,
    pub terms: &'a NodeTerms,
}

/// Seeds every real bank of every network once. Runs execute in parallel;
/// the output is ordered by (network, seed bank) and does not depend on the
/// thread count.
pub fn run_all_seeds(
    year: i32,
    inputs: &[SimulationInput<'_>],
    config: &ContagionConfig,
) -> Result<Vec<(RunKey, Trajectory)>, ContagionError> {
    let sims = inputs
        .iter()
        .map(|inp| Simulator::new(inp.graph, config, inp.terms))
        .collect::<Result<Vec<_>, _>>()?;
    let jobs: Vec<(usize, RunKey)> = inputs
        .iter()
        .enumerate()
        .flat_map(|(k, inp)| {
            inp.graph
                .real_indices()
                .map(move |b| (k, RunKey { year, network: inp.network, seed_bank: b }))
        })
        .collect();
    jobs.par_iter()
        .map(|&(k, key)| {
            let mut r = key.stream(config.seed);
            sims[k].run(key.seed_bank, &mut r).map(|t| (key, t))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Mean field
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanFieldPoint {
    pub t: f64,
    pub s: f64,
    pub i1: f64,
    pub i2: f64,
}

/// Fixed-step RK4 for
/// `s' = −λ(εi1+i2)s`, `i1' = λ(εi1+i2)s − μi1`, `i2' = μi1`.
/// Returns `steps + 1` points including the initial condition.
#[allow(clippy::too_many_arguments)]
pub fn integrate_mean_field(
    lambda: f64,
    mu: f64,
    epsilon: f64,
    s0: f64,
    i10: f64,
    i20: f64,
    dt: f64,
    steps: usize,
) -> Vec<MeanFieldPoint> {
    assert!(dt > 0.0, "dt must be positive");
    let f = |y: [f64; 3]| -> [f64; 3] {
        let force = lambda * (epsilon * y[1] + y[2]) * y[0];
        [-force, force - mu * y[1], mu * y[1]]
    };
    let mut y = [s0, i10, i20];
    let mut out = Vec::with_capacity(steps + 1);
    out.push(MeanFieldPoint { t: 0.0, s: y[0], i1: y[1], i2: y[2] });
    for k in 1..=steps {
        let k1 = f(y);
        let k2 = f([y[0] + 0.5 * dt * k1[0], y[1] + 0.5 * dt * k1[1], y[2] + 0.5 * dt * k1[2]]);
        let k3 = f([y[0] + 0.5 * dt * k2[0], y[1] + 0.5 * dt * k2[1], y[2] + 0.5 * dt * k2[2]]);
        let k4 = f([y[0] + dt * k3[0], y[1] + dt * k3[1], y[2] + dt * k3[2]]);
        for d in 0..3 {
            y[d] += dt / 6.0 * (k1[d] + 2.0 * k2[d] + 2.0 * k3[d] + k4[d]);
        }
        out.push(MeanFieldPoint { t: k as f64 * dt, s: y[0], i1: y[1], i2: y[2] });
    }
    out
}
