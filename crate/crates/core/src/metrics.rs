//! Ensemble statistics over contagion trajectories.
//!
//! Runs shorter than the step cap are extended with their final state, so
//! every curve lives on the grid `t = 0..=max_steps`. Intervals are normal
//! approximations, `mean ± 1.96·stderr`, with compensated sums so results do
//! not depend on reduction order.

use std::collections::BTreeMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contagion::{theta_nonlinear, Compartment, ContagionConfig, StepRecord, Trajectory};
use crate::numeric::{compensated_sum, quantile_sorted};
use crate::reconstruct::Node;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("no trajectories to aggregate")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    /// Fractions of banks.
    Count,
    /// Fractions of total assets.
    Assets,
}

impl Weighting {
    pub const BOTH: [Weighting; 2] = [Weighting::Count, Weighting::Assets];

    pub fn as_str(self) -> &'static str {
        match self {
            Weighting::Count => "count",
            Weighting::Assets => "assets",
        }
    }
}

impl FromStr for Weighting {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "count" | "none" => Ok(Weighting::Count),
            "assets" | "total-assets" => Ok(Weighting::Assets),
            _ => Err(format!("unknown weighting '{s}' (expected count | assets)")),
        }
    }
}

/// Sample mean with a 95% normal interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanCi {
    pub mean: f64,
    pub stderr: f64,
    pub lower: f64,
    pub upper: f64,
    pub n: usize,
}

impl MeanCi {
    pub const Z95: f64 = 1.96;

    pub fn from_samples(xs: &[f64]) -> Result<Self, MetricsError> {
        if xs.is_empty() {
            return Err(MetricsError::Empty);
        }
        let n = xs.len();
        let mean = compensated_sum(xs.iter().copied()) / n as f64;
        let stderr = if n > 1 {
            let ss = compensated_sum(xs.iter().map(|x| (x - mean) * (x - mean)));
            (ss / (n - 1) as f64 / n as f64).sqrt()
        } else {
            0.0
        };
        Ok(Self {
            mean,
            stderr,
            lower: mean - Self::Z95 * stderr,
            upper: mean + Self::Z95 * stderr,
            n,
        })
    }
}

fn fractions(r: &StepRecord, weighting: Weighting) -> [f64; 3] {
    match weighting {
        Weighting::Count => [r.s, r.i1, r.i2],
        Weighting::Assets => [r.s_w, r.i1_w, r.i2_w],
    }
}

/// Record at step `t`, holding the final state after absorption.
pub fn padded_step(traj: &Trajectory, t: usize) -> &StepRecord {
    traj.steps.get(t).unwrap_or_else(|| traj.last())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrevalenceCurve {
    pub weighting: Weighting,
    pub s: Vec<MeanCi>,
    pub i1: Vec<MeanCi>,
    pub i2: Vec<MeanCi>,
}

impl PrevalenceCurve {
    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }
}

/// Pointwise mean compartment fractions on `t = 0..=horizon`.
pub fn prevalence(trajs: &[Trajectory], weighting: Weighting, horizon: usize) -> Result<PrevalenceCurve, MetricsError> {
    if trajs.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut curve = PrevalenceCurve { weighting, s: Vec::new(), i1: Vec::new(), i2: Vec::new() };
    let mut cols: [Vec<f64>; 3] = Default::default();
    for t in 0..=horizon {
        for c in cols.iter_mut() {
            c.clear();
        }
        for tr in trajs {
            let f = fractions(padded_step(tr, t), weighting);
            for k in 0..3 {
                cols[k].push(f[k]);
            }
        }
        curve.s.push(MeanCi::from_samples(&cols[0])?);
        curve.i1.push(MeanCi::from_samples(&cols[1])?);
        curve.i2.push(MeanCi::from_samples(&cols[2])?);
    }
    Ok(curve)
}

/// Bankrupted fraction at the end of each run.
pub fn bankruptcy_ratio(trajs: &[Trajectory], weighting: Weighting) -> Result<MeanCi, MetricsError> {
    let xs: Vec<f64> = trajs.iter().map(|t| fractions(t.last(), weighting)[2]).collect();
    MeanCi::from_samples(&xs)
}

/// Contribution of each country to the bankruptcy ratio. Per run, a country
/// contributes its bankrupted banks (or their assets) over all real banks;
/// the contributions add up to the total ratio.
pub fn country_decomposition(
    trajs: &[Trajectory],
    nodes: &[Node],
    weighting: Weighting,
) -> Result<BTreeMap<String, MeanCi>, MetricsError> {
    if trajs.is_empty() {
        return Err(MetricsError::Empty);
    }
    let weight = |n: &Node| match weighting {
        Weighting::Count => 1.0,
        Weighting::Assets => n.total_assets,
    };
    let real: Vec<usize> = (0..nodes.len()).filter(|&i| !nodes[i].is_ground).collect();
    let total = compensated_sum(real.iter().map(|&i| weight(&nodes[i])));
    let mut samples: BTreeMap<&str, Vec<f64>> = real.iter().map(|&i| (nodes[i].country.as_str(), Vec::new())).collect();
    for tr in trajs {
        for (country, xs) in samples.iter_mut() {
            let hit = compensated_sum(
                real.iter()
                    .filter(|&&i| nodes[i].country == *country && tr.final_state[i] == Compartment::Bankrupted)
                    .map(|&i| weight(&nodes[i])),
            );
            xs.push(if total > 0.0 { hit / total } else { 0.0 });
        }
    }
    samples
        .into_iter()
        .map(|(c, xs)| Ok((c.to_string(), MeanCi::from_samples(&xs)?)))
        .collect()
}

/// Distribution of the default probabilities of distressed banks at one step,
/// pooled over runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MuSummary {
    pub t: usize,
    pub count: usize,
    pub mean: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Per-step summary of the logged `μ` values on `t = 0..horizon`. Steps with no
/// distressed bank report zeros.
pub fn mu_dynamics(trajs: &[Trajectory], horizon: usize) -> Vec<MuSummary> {
    (0..horizon)
        .map(|t| {
            let mut xs: Vec<f64> = trajs
                .iter()
                .filter_map(|tr| tr.mu.get(t))
                .flat_map(|v| v.iter().map(|&(_, m)| m))
                .collect();
            if xs.is_empty() {
                return MuSummary { t, count: 0, mean: 0.0, min: 0.0, q1: 0.0, median: 0.0, q3: 0.0, max: 0.0 };
            }
            xs.sort_by(f64::total_cmp);
            MuSummary {
                t,
                count: xs.len(),
                mean: compensated_sum(xs.iter().copied()) / xs.len() as f64,
                min: xs[0],
                q1: quantile_sorted(&xs, 0.25),
                median: quantile_sorted(&xs, 0.5),
                q3: quantile_sorted(&xs, 0.75),
                max: xs[xs.len() - 1],
            }
        })
        .collect()
}

/// First step whose multiplier `θ⁺` is at most 1. At `φ = 1` this is the
/// first step with `s ≤ 1/(1+β*)`, tested in that form: `(1+β*)·s ≤ 1`
/// rounds differently for a handful of boundary values.
pub fn critical_time(traj: &Trajectory, beta_star: f64, phi: f64) -> Option<usize> {
    if phi == 1.0 {
        let threshold = 1.0 / (1.0 + beta_star);
        return traj.steps.iter().position(|r| r.s <= threshold);
    }
    critical_time_of(traj.steps.iter().map(|r| r.theta), beta_star, phi)
}

/// Same scan over a bare sequence of linear multipliers `θ(t)`.
pub fn critical_time_of(thetas: impl IntoIterator<Item = f64>, beta_star: f64, phi: f64) -> Option<usize> {
    thetas
        .into_iter()
        .position(|th| theta_nonlinear(th, phi, 1.0 + beta_star) <= 1.0)
}

/// Everything reported for one year of one configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleResult {
    pub year: i32,
    pub runs: usize,
    pub censored: usize,
    pub prevalence_count: PrevalenceCurve,
    pub prevalence_assets: PrevalenceCurve,
    pub bankruptcy_count: MeanCi,
    pub bankruptcy_assets: MeanCi,
    pub countries_count: BTreeMap<String, MeanCi>,
    pub countries_assets: BTreeMap<String, MeanCi>,
    pub mu: Vec<MuSummary>,
    pub critical_times: Vec<Option<usize>>,
}

impl EnsembleResult {
    pub fn from_trajectories(
        year: i32,
        trajs: &[Trajectory],
        nodes: &[Node],
        config: &ContagionConfig,
    ) -> Result<Self, MetricsError> {
        let h = config.max_steps;
        Ok(Self {
            year,
            runs: trajs.len(),
            censored: trajs.iter().filter(|t| t.censored).count(),
            prevalence_count: prevalence(trajs, Weighting::Count, h)?,
            prevalence_assets: prevalence(trajs, Weighting::Assets, h)?,
            bankruptcy_count: bankruptcy_ratio(trajs, Weighting::Count)?,
            bankruptcy_assets: bankruptcy_ratio(trajs, Weighting::Assets)?,
            countries_count: country_decomposition(trajs, nodes, Weighting::Count)?,
            countries_assets: country_decomposition(trajs, nodes, Weighting::Assets)?,
            mu: mu_dynamics(trajs, h),
            critical_times: trajs.iter().map(|t| critical_time(t, config.beta_star, config.phi)).collect(),
        })
    }

    pub fn bankruptcy(&self, weighting: Weighting) -> &MeanCi {
        match weighting {
            Weighting::Count => &self.bankruptcy_count,
            Weighting::Assets => &self.bankruptcy_assets,
        }
    }

    pub fn countries(&self, weighting: Weighting) -> &BTreeMap<String, MeanCi> {
        match weighting {
            Weighting::Count => &self.countries_count,
            Weighting::Assets => &self.countries_assets,
        }
    }

    pub fn prevalence(&self, weighting: Weighting) -> &PrevalenceCurve {
        match weighting {
            Weighting::Count => &self.prevalence_count,
            Weighting::Assets => &self.prevalence_assets,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contagion::theta;

    /// Builds a trajectory over `countries.len()` banks with unit assets from
    /// per-step `(s, i1, i2)` counts; the last step fixes which banks end in I2
    /// (the first `i2` ones).
    fn traj(counts: &[(usize, usize, usize)], beta: f64) -> Trajectory {
        let n = counts[0].0 + counts[0].1 + counts[0].2;
        let steps = counts
            .iter()
            .enumerate()
            .map(|(t, &(s, i1, i2))| {
                let f = |x: usize| x as f64 / n as f64;
                StepRecord {
                    t,
                    s_count: s,
                    i1_count: i1,
                    i2_count: i2,
                    s: f(s),
                    i1: f(i1),
                    i2: f(i2),
                    s_w: f(s),
                    i1_w: f(i1),
                    i2_w: f(i2),
                    theta: theta(f(s), beta),
                }
            })
            .collect::<Vec<_>>();
        let (s, i1, i2) = *counts.last().unwrap();
        let mut final_state = vec![Compartment::Bankrupted; i2];
        final_state.extend(vec![Compartment::Distressed; i1]);
        final_state.extend(vec![Compartment::Exposed; s]);
        Trajectory {
            seed_bank: 0,
            mu: vec![Vec::new(); steps.len() - 1],
            steps,
            infected_at: vec![None; n],
            defaulted_at: vec![None; n],
            final_state,
            censored: i1 > 0,
        }
    }

    fn nodes(countries: &[&str], assets: &[f64]) -> Vec<Node> {
        countries
            .iter()
            .zip(assets)
            .enumerate()
            .map(|(k, (c, &a))| Node {
                bank_id: format!("b{k}"),
                country: c.to_string(),
                is_ground: false,
                total_assets: a,
                assets: 0.0,
                liabilities: 0.0,
            })
            .collect()
    }

    #[test]
    fn single_run_has_zero_width() {
        let tr = traj(&[(3, 1, 0), (2, 1, 1), (2, 0, 2)], 0.5);
        let c = prevalence(&[tr], Weighting::Count, 50).unwrap();
        assert_eq!(c.len(), 51);
        for m in c.s.iter().chain(&c.i1).chain(&c.i2) {
            assert_eq!(m.lower, m.upper);
        }
        assert_eq!(c.i2[50].mean, 0.5);
    }

    #[test]
    fn healthy_runs_stay_exposed() {
        let tr = traj(&[(4, 0, 0)], 0.5);
        let c = prevalence(&[tr.clone(), tr], Weighting::Assets, 10).unwrap();
        assert!(c.s.iter().all(|m| m.mean == 1.0));
        assert!(c.i1.iter().chain(&c.i2).all(|m| m.mean == 0.0));
    }

    #[test]
    fn averaging_two_runs() {
        let none = traj(&[(1, 1, 0), (1, 0, 1)], 0.5);
        let a = traj(&[(0, 2, 0), (0, 0, 2)], 0.5);
        // second run: every bank bankrupted
        let r = bankruptcy_ratio(&[none.clone(), a.clone()], Weighting::Count).unwrap();
        assert_eq!(r.mean, 0.75);
        let zero = traj(&[(2, 0, 0)], 0.5);
        let r = bankruptcy_ratio(&[zero, a], Weighting::Count).unwrap();
        assert_eq!(r.mean, 0.5);
        assert!(r.lower < 0.5 && r.upper > 0.5);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert_eq!(prevalence(&[], Weighting::Count, 5).unwrap_err(), MetricsError::Empty);
        assert_eq!(bankruptcy_ratio(&[], Weighting::Count).unwrap_err(), MetricsError::Empty);
    }

    #[test]
    fn bankruptcy_cases() {
        let none = traj(&[(4, 0, 0)], 0.5);
        assert_eq!(bankruptcy_ratio(&[none], Weighting::Count).unwrap().mean, 0.0);
        let all = traj(&[(3, 1, 0), (0, 0, 4)], 0.5);
        assert_eq!(bankruptcy_ratio(&[all], Weighting::Assets).unwrap().mean, 1.0);
        let half = traj(&[(3, 1, 0), (2, 0, 2)], 0.5);
        for w in Weighting::BOTH {
            assert_eq!(bankruptcy_ratio(&[half.clone()], w).unwrap().mean, 0.5);
        }
    }

    #[test]
    fn padding_does_not_change_the_ratio() {
        let mut tr = traj(&[(3, 1, 0), (2, 0, 2)], 0.5);
        let before = bankruptcy_ratio(&[tr.clone()], Weighting::Count).unwrap();
        let last = tr.last().clone();
        for t in 2..10 {
            tr.steps.push(StepRecord { t, ..last.clone() });
        }
        assert_eq!(bankruptcy_ratio(&[tr], Weighting::Count).unwrap(), before);
    }

    #[test]
    fn decomposition_cases() {
        let tr = traj(&[(3, 1, 0), (2, 0, 2)], 0.5);
        // single country: equals the total
        let one = country_decomposition(&[tr.clone()], &nodes(&["AT"; 4], &[1.0; 4]), Weighting::Count).unwrap();
        assert_eq!(one["AT"].mean, 0.5);
        // defaults (banks 0, 1) only in DE
        let two = country_decomposition(&[tr.clone()], &nodes(&["DE", "DE", "AT", "AT"], &[1.0; 4]), Weighting::Count)
            .unwrap();
        assert_eq!(two["DE"].mean, 0.5);
        assert_eq!(two["AT"].mean, 0.0);
        // symmetric toy: one default per country
        let sym = country_decomposition(&[tr], &nodes(&["DE", "AT", "DE", "AT"], &[2.0; 4]), Weighting::Assets).unwrap();
        assert_eq!(sym["DE"].mean, 0.25);
        assert_eq!(sym["AT"].mean, 0.25);
    }

    #[test]
    fn decomposition_adds_up() {
        let runs = vec![
            traj(&[(4, 1, 0), (1, 1, 3)], 0.5),
            traj(&[(4, 1, 0), (0, 0, 5)], 0.5),
            traj(&[(4, 1, 0), (3, 0, 2)], 0.5),
        ];
        let ns = nodes(&["AT", "DE", "AT", "FR", "DE"], &[5.0, 1.0, 2.5, 7.0, 0.3]);
        for w in Weighting::BOTH {
            let parts = country_decomposition(&runs, &ns, w).unwrap();
            let sum: f64 = parts.values().map(|m| m.mean).sum();
            let total = match w {
                Weighting::Count => bankruptcy_ratio(&runs, w).unwrap().mean,
                Weighting::Assets => {
                    // asset shares differ from the stored fractions in `traj`, recompute
                    let ta: f64 = ns.iter().map(|n| n.total_assets).sum();
                    runs.iter()
                        .map(|r| {
                            (0..5).filter(|&i| r.final_state[i] == Compartment::Bankrupted).map(|i| ns[i].total_assets).sum::<f64>()
                                / ta
                        })
                        .sum::<f64>()
                        / 3.0
                }
            };
            assert!((sum - total).abs() < 1e-9);
        }
    }

    #[test]
    fn mu_summary_cases() {
        let mut tr = traj(&[(3, 1, 0), (2, 2, 0), (2, 0, 2)], 0.5);
        tr.mu = vec![vec![(0, 0.0)], vec![(0, 1.0), (1, 1.0)]];
        let healthy = traj(&[(4, 0, 0)], 0.5);
        let m = mu_dynamics(&[tr, healthy.clone()], 5);
        assert_eq!(m.len(), 5);
        assert_eq!(m[0].mean, 0.0);
        assert_eq!(m[1].mean, 1.0);
        assert_eq!(m[1].count, 2);
        assert_eq!(m[3].count, 0);
        let h = mu_dynamics(&[healthy], 3);
        assert!(h.iter().all(|s| s.mean == 0.0 && s.max == 0.0));
    }

    #[test]
    fn critical_time_cases() {
        // β* = 0: θ(0) = 1 already counts as crossed
        let tr = traj(&[(3, 1, 0), (2, 1, 1)], 0.0);
        assert_eq!(critical_time(&tr, 0.0, 1.0), Some(0));
        // no spread, β* = 1: θ stays near 2
        let tr = traj(&[(9, 1, 0), (9, 0, 1)], 1.0);
        assert_eq!(critical_time(&tr, 1.0, 1.0), None);
        // s(t) held at 0.9 for four steps, then falling by 0.1: s* = 0.5 reached at t = 7
        let mut counts = vec![(9, 1, 0); 4];
        for k in 1..=5 {
            counts.push((9 - k, 1, k));
        }
        let tr = traj(&counts, 1.0);
        assert_eq!(tr.steps[7].s, 0.5);
        assert_eq!(critical_time(&tr, 1.0, 1.0), Some(7));
        assert_eq!(critical_time_of([2.0, 1.5, 1.0], 1.0, 1.0), Some(2));
    }

    #[test]
    fn linear_threshold_is_tested_on_s() {
        // s = 96/97 sits on the threshold; the two algebraic forms round apart
        let b = 97.0 / 96.0 - 1.0;
        let tr = traj(&[(96, 1, 0)], b);
        let s = tr.steps[0].s;
        assert_ne!((1.0 + b) * s <= 1.0, s <= 1.0 / (1.0 + b));
        assert_eq!(critical_time(&tr, b, 1.0).is_some(), s <= 1.0 / (1.0 + b));
    }
}
