//! Bernoulli sampling of the binary topology and gravity weights.

use rand::Rng;

use super::fitness::{pair_probability, BlockFitnesses, ZSolution};
use super::{ReconstructError, Result, WeightMatrix};

/// Dense boolean adjacency; `get(i, j)` means `i` lends to `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Adjacency {
    n: usize,
    links: Vec<bool>,
}

impl Adjacency {
    pub fn new(n: usize) -> Self {
        Self { n, links: vec![false; n * n] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.links[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, on: bool) {
        self.links[i * self.n + j] = on;
    }

    pub fn edge_count(&self) -> usize {
        self.links.iter().filter(|&&b| b).count()
    }

    pub fn out_degree(&self, i: usize) -> usize {
        (0..self.n).filter(|&j| self.get(i, j)).count()
    }

    pub fn in_degree(&self, j: usize) -> usize {
        (0..self.n).filter(|&i| self.get(i, j)).count()
    }

    /// A single weakly connected component (trivially true for `n ≤ 1`).
    pub fn is_weakly_connected(&self) -> bool {
        if self.n <= 1 {
            return true;
        }
        let mut parent: Vec<usize> = (0..self.n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        let mut components = self.n;
        for i in 0..self.n {
            for j in 0..self.n {
                if self.get(i, j) {
                    let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                    if ri != rj {
                        parent[ri] = rj;
                        components -= 1;
                    }
                }
            }
        }
        components == 1
    }
}

/// Draws one adjacency matrix with independent `a_ij ~ Bernoulli(p_ij)` and
/// no self-loops, redrawing the whole network until it is weakly connected
/// and every bank with positive assets (liabilities) has an out-link
/// (in-link) to carry them. Returns the accepted matrix and the number of
/// draws it took.
pub fn sample_adjacency<R: Rng + ?Sized>(
    fit: &BlockFitnesses,
    z: &ZSolution,
    rng: &mut R,
    retry_cap: usize,
) -> Result<(Adjacency, usize)> {
    let n = fit.n();
    let probs: Vec<f64> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| pair_probability(fit, z, i, j))
        .collect();
    for attempt in 1..=retry_cap {
        let mut adj = Adjacency::new(n);
        for (k, &p) in probs.iter().enumerate() {
            if p > 0.0 && rng.random::<f64>() < p {
                adj.links[k] = true;
            }
        }
        if supports_strengths(fit, &adj) && adj.is_weakly_connected() {
            return Ok((adj, attempt));
        }
    }
    Err(ReconstructError::RetryCapExceeded { attempts: retry_cap })
}

/// Every positive strength target has at least one link on its side.
pub fn supports_strengths(fit: &BlockFitnesses, adj: &Adjacency) -> bool {
    (0..fit.n()).all(|i| {
        let lends = fit.a_tilde[i].iter().any(|&a| a > 0.0);
        let borrows = fit.l_tilde[i].iter().any(|&l| l > 0.0);
        (!lends || adj.out_degree(i) > 0) && (!borrows || adj.in_degree(i) > 0)
    })
}

/// Necessary condition for IPF on the pattern: every lender's borrowers can
/// absorb its assets and every borrower's lenders can fund its liabilities.
pub fn pattern_can_carry(adj: &Adjacency, rows: &[f64], cols: &[f64]) -> bool {
    let n = adj.n();
    (0..n).all(|i| {
        let out: f64 = (0..n).filter(|&j| adj.get(i, j)).map(|j| cols[j]).sum();
        let inc: f64 = (0..n).filter(|&k| adj.get(k, i)).map(|k| rows[k]).sum();
        (rows[i] <= 0.0 || out > rows[i]) && (cols[i] <= 0.0 || inc > cols[i])
    })
}

/// Degree-corrected gravity weights `w_ij = Ã_i L̃_j / (W^{UV} p_ij) · a_ij`.
pub fn assign_weights(fit: &BlockFitnesses, z: &ZSolution, adj: &Adjacency) -> WeightMatrix {
    let n = fit.n();
    let mut w = WeightMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            if !adj.get(i, j) {
                continue;
            }
            let p = pair_probability(fit, z, i, j);
            assert!(p > 0.0, "link ({i}, {j}) sampled with zero probability");
            w.set(i, j, fit.product(i, j) / (fit.block_norm(i, j) * p));
        }
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reconstruct::fitness::link_probability;
    use crate::reconstruct::Node;
    use crate::rng::stream;

    fn nodes(spec: &[(f64, f64)]) -> Vec<Node> {
        spec.iter()
            .enumerate()
            .map(|(k, &(a, l))| Node {
                bank_id: format!("n{k}"),
                country: "AT".into(),
                is_ground: false,
                total_assets: 1.0,
                assets: a,
                liabilities: l,
            })
            .collect()
    }

    #[test]
    fn certain_links_give_complete_digraph() {
        let fit = BlockFitnesses::unblocked(&nodes(&[(1.0, 1.0); 4]));
        let z = ZSolution::Global(f64::INFINITY);
        let (adj, attempts) = sample_adjacency(&fit, &z, &mut stream(1, &[]), 10).unwrap();
        assert_eq!(attempts, 1);
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(adj.get(i, j), i != j);
            }
        }
    }

    #[test]
    fn impossible_links_exhaust_retries() {
        let fit = BlockFitnesses::unblocked(&nodes(&[(1.0, 1.0); 3]));
        let z = ZSolution::Global(0.0);
        let err = sample_adjacency(&fit, &z, &mut stream(1, &[]), 25).unwrap_err();
        assert!(matches!(err, ReconstructError::RetryCapExceeded { attempts: 25 }));
    }

    #[test]
    fn fixed_seed_is_deterministic() {
        let fit = BlockFitnesses::unblocked(&nodes(&[(1.0, 2.0), (3.0, 1.0), (2.0, 2.0), (0.5, 4.0)]));
        let z = ZSolution::Global(0.4);
        let a = sample_adjacency(&fit, &z, &mut stream(99, &[1]), 1000).unwrap();
        let b = sample_adjacency(&fit, &z, &mut stream(99, &[1]), 1000).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn weight_cases() {
        let fit = BlockFitnesses::unblocked(&nodes(&[(1.0, 2.0), (2.0, 1.0)]));
        // product (0,1) = 1 * 1 = 1; pick z = 1 so p = 0.5
        let z = ZSolution::Global(1.0);
        let mut adj = Adjacency::new(2);
        adj.set(0, 1, true);
        let w = assign_weights(&fit, &z, &adj);
        let big_w = (3.0f64 * 3.0).sqrt();
        assert!((w.get(0, 1) - 2.0 * 1.0 / big_w).abs() < 1e-15);
        assert_eq!(w.get(1, 0), 0.0);
        assert_eq!(w.get(0, 0), 0.0);
    }

    /// `ÃL̃/p = 1/z + ÃL̃`: the gravity form with `p` equals the `z⁻¹ + ÃL̃` form.
    #[test]
    fn weight_forms_agree() {
        for &(a, l, z) in &[(1.0, 2.0, 0.3), (1e3, 4e2, 1e-6), (0.01, 0.2, 50.0)] {
            let p = link_probability(a, l, z);
            let lhs = a * l / p;
            let rhs = 1.0 / z + a * l;
            assert!((lhs - rhs).abs() <= 1e-12 * rhs);
        }
    }

    /// Monte Carlo mean of `w_ij` equals `ÃL̃ / W`.
    #[test]
    fn mean_weight_matches_expectation() {
        let fit = BlockFitnesses::unblocked(&nodes(&[(2.0, 1.0), (1.0, 3.0), (4.0, 2.0)]));
        let z = ZSolution::Global(0.2);
        let mut rng = stream(5, &[]);
        let draws = 20_000;
        let mut sum = WeightMatrix::zeros(3);
        for _ in 0..draws {
            let mut adj = Adjacency::new(3);
            for i in 0..3 {
                for j in 0..3 {
                    let p = pair_probability(&fit, &z, i, j);
                    if p > 0.0 && rng.random::<f64>() < p {
                        adj.set(i, j, true);
                    }
                }
            }
            let w = assign_weights(&fit, &z, &adj);
            for i in 0..3 {
                for j in 0..3 {
                    sum.set(i, j, sum.get(i, j) + w.get(i, j));
                }
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                if i == j {
                    continue;
                }
                let p = pair_probability(&fit, &z, i, j);
                let mean = sum.get(i, j) / draws as f64;
                let expect = fit.product(i, j) / fit.block_norm(i, j);
                // per-draw sd is expect * sqrt((1-p)/p)
                let se = expect * ((1.0 - p) / p / draws as f64).sqrt();
                assert!((mean - expect).abs() < 4.0 * se, "({i},{j}) {mean} vs {expect}");
            }
        }
    }

    #[test]
    fn accepted_networks_carry_every_strength() {
        let fit = BlockFitnesses::unblocked(&nodes(&[(5.0, 0.1), (0.1, 5.0), (2.0, 2.0), (0.05, 0.0), (1.0, 1.0)]));
        let z = ZSolution::Global(0.3);
        let mut rng = stream(8, &[]);
        for _ in 0..50 {
            let (adj, _) = sample_adjacency(&fit, &z, &mut rng, 10_000).unwrap();
            assert!(supports_strengths(&fit, &adj));
            assert!(adj.out_degree(3) > 0);
            for i in [0, 1, 2, 4] {
                assert!(adj.out_degree(i) > 0 && adj.in_degree(i) > 0);
            }
        }
    }

    #[test]
    fn capacity_check() {
        let mut adj = Adjacency::new(3);
        adj.set(0, 1, true);
        adj.set(1, 2, true);
        adj.set(2, 0, true);
        // bank 1 must place 1 with a borrower owing only 1
        assert!(!pattern_can_carry(&adj, &[1.0, 1.0, 1.0], &[0.9, 1.1, 1.0]));
        adj.set(0, 2, true);
        adj.set(1, 0, true);
        assert!(pattern_can_carry(&adj, &[2.0, 1.0, 0.4], &[0.5, 1.0, 1.9]));
        // lender 0 reaches borrowers owing 1.4 in total but must place 2
        assert!(!pattern_can_carry(&adj, &[2.0, 1.0, 0.4], &[2.0, 1.0, 0.4]));
    }

    #[test]
    fn connectivity_check() {
        let mut adj = Adjacency::new(3);
        adj.set(0, 1, true);
        assert!(!adj.is_weakly_connected());
        adj.set(2, 1, true);
        assert!(adj.is_weakly_connected());
    }
}
