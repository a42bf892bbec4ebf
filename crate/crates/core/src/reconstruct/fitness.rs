//! Block-constrained fitnesses and the density calibration of `z`.

use serde::{Deserialize, Serialize};

use super::{Node, ReconstructError, Result};
use crate::ingest::{BankRecord, BisExposureMatrix, IngestError, GROUND_COUNTRY};
use crate::numeric::compensated_sum;

/// Identifier given to the synthetic ground bank.
pub const GROUND_BANK_ID: &str = "GROUND";

/// Converts bank records into reconstruction nodes and appends a ground bank
/// absorbing `Σ L − Σ A`. A positive gap makes it a pure lender, a negative
/// gap a pure borrower; balanced books add nothing.
pub fn add_ground_bank(banks: &[BankRecord]) -> Vec<Node> {
    let mut nodes: Vec<Node> = banks.iter().map(Node::from).collect();
    let sum_a = compensated_sum(banks.iter().map(|b| b.interbank_assets));
    let sum_l = compensated_sum(banks.iter().map(|b| b.interbank_liabilities));
    let gap = sum_l - sum_a;
    if gap.abs() <= 1e-12 * sum_a.max(sum_l) {
        return nodes;
    }
    let (assets, liabilities) = if gap > 0.0 { (gap, 0.0) } else { (0.0, -gap) };
    nodes.push(Node {
        bank_id: GROUND_BANK_ID.to_string(),
        country: GROUND_COUNTRY.to_string(),
        is_ground: true,
        total_assets: 0.0,
        assets,
        liabilities,
    });
    nodes
}

/// Adds the ground bank's `REST` sector to the BIS matrix when needed.
///
/// A lending ground bank gets a `REST` row proportional to the borrower column
/// sums, scaled by its share of real interbank assets; a borrowing ground bank
/// gets the mirrored column. The other side of `REST` stays empty.
pub fn augment_bis(bis: &BisExposureMatrix, nodes: &[Node]) -> BisExposureMatrix {
    let Some(ground) = nodes.iter().find(|n| n.is_ground) else {
        return bis.clone();
    };
    if bis.index_of(GROUND_COUNTRY).is_some() {
        return bis.clone();
    }
    let c = bis.len();
    let real_a = compensated_sum(nodes.iter().filter(|n| !n.is_ground).map(|n| n.assets));
    let real_l = compensated_sum(nodes.iter().filter(|n| !n.is_ground).map(|n| n.liabilities));
    let mut countries = bis.countries.clone();
    countries.push(GROUND_COUNTRY.to_string());
    let mut exp: Vec<Vec<f64>> = bis
        .exp
        .iter()
        .map(|r| {
            let mut r = r.clone();
            r.push(0.0);
            r
        })
        .collect();
    let mut rest_row = vec![0.0; c + 1];
    if ground.assets > 0.0 {
        let scale = if real_a > 0.0 { ground.assets / real_a } else { 1.0 };
        for (v, x) in rest_row.iter_mut().take(c).enumerate() {
            *x = bis.col_sum(v) * scale;
        }
    } else {
        let scale = if real_l > 0.0 { ground.liabilities / real_l } else { 1.0 };
        for (u, row) in exp.iter_mut().enumerate() {
            row[c] = bis.row_sum(u) * scale;
        }
    }
    exp.push(rest_row);
    BisExposureMatrix::new(countries, exp)
}

/// Local fitnesses of every node in every country block.
///
/// `a_tilde[i][v]` is `Ã_i^{UV}` for lender `i` in block `U = block(i)`;
/// `l_tilde[j][u]` is `L̃_j^{UV}` for borrower `j` in `V = block(j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockFitnesses {
    pub blocks: Vec<String>,
    pub node_block: Vec<usize>,
    pub a_tilde: Vec<Vec<f64>>,
    pub l_tilde: Vec<Vec<f64>>,
    /// `W^{UV} = sqrt(Σ_{i∈U} Ã_i^{UV} · Σ_{j∈V} L̃_j^{UV})`.
    pub norm: Vec<Vec<f64>>,
    pub is_ground: Vec<bool>,
}

impl BlockFitnesses {
    pub fn n(&self) -> usize {
        self.node_block.len()
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Fitness product `Ã_i^{UV} L̃_j^{UV}` of the ordered pair `(i, j)`.
    #[inline]
    pub fn product(&self, i: usize, j: usize) -> f64 {
        let (u, v) = (self.node_block[i], self.node_block[j]);
        self.a_tilde[i][v] * self.l_tilde[j][u]
    }

    #[inline]
    pub fn block_norm(&self, i: usize, j: usize) -> f64 {
        self.norm[self.node_block[i]][self.node_block[j]]
    }

    /// Plain fitness model: a single block with `Ã = A`, `L̃ = L`.
    pub fn unblocked(nodes: &[Node]) -> Self {
        let sum_a = compensated_sum(nodes.iter().map(|n| n.assets));
        let sum_l = compensated_sum(nodes.iter().map(|n| n.liabilities));
        Self {
            blocks: vec!["ALL".to_string()],
            node_block: vec![0; nodes.len()],
            a_tilde: nodes.iter().map(|n| vec![n.assets]).collect(),
            l_tilde: nodes.iter().map(|n| vec![n.liabilities]).collect(),
            norm: vec![vec![(sum_a * sum_l).sqrt()]],
            is_ground: nodes.iter().map(|n| n.is_ground).collect(),
        }
    }

    fn compute_norms(&mut self) {
        let c = self.n_blocks();
        let mut sa = vec![vec![0.0; c]; c];
        let mut sl = vec![vec![0.0; c]; c];
        for i in 0..self.n() {
            let b = self.node_block[i];
            for k in 0..c {
                sa[b][k] += self.a_tilde[i][k];
                sl[k][b] += self.l_tilde[i][k];
            }
        }
        self.norm = (0..c)
            .map(|u| (0..c).map(|v| (sa[u][v] * sl[u][v]).sqrt()).collect())
            .collect();
    }
}

/// Splits every node's `A` across lender blocks by BIS row shares and its `L`
/// across borrower blocks by BIS column shares.
pub fn block_fitnesses(nodes: &[Node], bis: &BisExposureMatrix) -> Result<BlockFitnesses> {
    let bis = augment_bis(bis, nodes);
    let c = bis.len();
    let rows: Vec<f64> = (0..c).map(|u| bis.row_sum(u)).collect();
    let cols: Vec<f64> = (0..c).map(|v| bis.col_sum(v)).collect();
    let mut node_block = Vec::with_capacity(nodes.len());
    let mut a_tilde = Vec::with_capacity(nodes.len());
    let mut l_tilde = Vec::with_capacity(nodes.len());
    for n in nodes {
        let b = bis.index_of(&n.country).ok_or_else(|| IngestError::UnknownCountry {
            bank_id: n.bank_id.clone(),
            country: n.country.clone(),
        })?;
        if n.assets > 0.0 && rows[b] <= 0.0 {
            return Err(IngestError::ZeroMarginal { country: n.country.clone(), axis: "row" }.into());
        }
        if n.liabilities > 0.0 && cols[b] <= 0.0 {
            return Err(
                IngestError::ZeroMarginal { country: n.country.clone(), axis: "column" }.into()
            );
        }
        node_block.push(b);
        a_tilde.push(
            (0..c)
                .map(|v| if n.assets > 0.0 { n.assets * (bis.exp[b][v] / rows[b]) } else { 0.0 })
                .collect(),
        );
        l_tilde.push(
            (0..c)
                .map(|u| {
                    if n.liabilities > 0.0 {
                        n.liabilities * (bis.exp[u][b] / cols[b])
                    } else {
                        0.0
                    }
                })
                .collect(),
        );
    }
    let mut fit = BlockFitnesses {
        blocks: bis.countries.clone(),
        node_block,
        a_tilde,
        l_tilde,
        norm: Vec::new(),
        is_ground: nodes.iter().map(|n| n.is_ground).collect(),
    };
    fit.compute_norms();
    Ok(fit)
}

/// `p = zÃL̃ / (1 + zÃL̃)`.
#[inline]
pub fn link_probability(a: f64, l: f64, z: f64) -> f64 {
    let x = z * a * l;
    if x == 0.0 {
        0.0
    } else if x.is_finite() {
        x / (1.0 + x)
    } else {
        1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZMode {
    /// One `z` for all blocks, calibrated on the overall density.
    #[default]
    Global,
    /// One `z_UV` per block, each calibrated on the block's own density.
    PerBlock,
}

impl std::str::FromStr for ZMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "global" => Ok(ZMode::Global),
            "per-block" => Ok(ZMode::PerBlock),
            other => Err(format!("unknown z-mode '{other}' (expected global | per-block)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZSolution {
    Global(f64),
    PerBlock(Vec<Vec<f64>>),
}

impl ZSolution {
    #[inline]
    pub fn get(&self, u: usize, v: usize) -> f64 {
        match self {
            ZSolution::Global(z) => *z,
            ZSolution::PerBlock(m) => m[u][v],
        }
    }
}

/// Which ordered pairs enter the density.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DensityScope {
    pub include_ground: bool,
}

impl DensityScope {
    #[inline]
    pub fn admits(&self, fit: &BlockFitnesses, i: usize, j: usize) -> bool {
        i != j && (self.include_ground || !(fit.is_ground[i] || fit.is_ground[j]))
    }
}

/// `p_ij` for a solved `z`; the diagonal is zero.
#[inline]
pub fn pair_probability(fit: &BlockFitnesses, z: &ZSolution, i: usize, j: usize) -> f64 {
    if i == j {
        return 0.0;
    }
    let (u, v) = (fit.node_block[i], fit.node_block[j]);
    link_probability(fit.a_tilde[i][v], fit.l_tilde[j][u], z.get(u, v))
}

/// Analytic expected density `Σ p / |admissible pairs|`.
pub fn expected_density(fit: &BlockFitnesses, z: &ZSolution, scope: DensityScope) -> f64 {
    let n = fit.n();
    let mut count = 0usize;
    let total = compensated_sum((0..n).flat_map(|i| (0..n).map(move |j| (i, j))).filter_map(|(i, j)| {
        scope.admits(fit, i, j).then(|| {
            count += 1;
            pair_probability(fit, z, i, j)
        })
    }));
    if count == 0 {
        0.0
    } else {
        total / count as f64
    }
}

/// Expected density of block `(u, v)` and its admissible pair count.
pub fn expected_block_density(
    fit: &BlockFitnesses,
    z: &ZSolution,
    scope: DensityScope,
    u: usize,
    v: usize,
) -> (f64, usize) {
    let pairs = block_pairs(fit, scope, u, v);
    let total = compensated_sum(pairs.iter().map(|&(i, j)| pair_probability(fit, z, i, j)));
    if pairs.is_empty() {
        (0.0, 0)
    } else {
        (total / pairs.len() as f64, pairs.len())
    }
}

fn block_pairs(fit: &BlockFitnesses, scope: DensityScope, u: usize, v: usize) -> Vec<(usize, usize)> {
    let n = fit.n();
    let mut out = Vec::new();
    for i in (0..n).filter(|&i| fit.node_block[i] == u) {
        for j in (0..n).filter(|&j| fit.node_block[j] == v) {
            if scope.admits(fit, i, j) {
                out.push((i, j));
            }
        }
    }
    out
}

/// Mean link probability over `count` pairs whose positive products are given.
fn mean_probability(products: &[f64], count: usize, z: f64) -> f64 {
    compensated_sum(products.iter().map(|&x| link_probability(x, 1.0, z))) / count as f64
}

const DENSITY_TOL: f64 = 1e-12;

/// Solves `mean_p(z) = target` by bisection on `[0, z_hi]`, doubling `z_hi`
/// until the root is bracketed. `products` holds the positive fitness
/// products; the remaining `count - products.len()` pairs have `p = 0`.
pub fn solve_density(products: &[f64], count: usize, target: f64) -> std::result::Result<f64, f64> {
    let max = if count == 0 { 0.0 } else { products.len() as f64 / count as f64 };
    if !(target > 0.0 && target < max) {
        return Err(max);
    }
    let f = |z: f64| mean_probability(products, count, z) - target;
    let mut sorted = products.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut hi = 1.0 / sorted[sorted.len() / 2];
    let mut lo = 0.0;
    let mut doublings = 0;
    while f(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > 2000 || !hi.is_finite() {
            return Err(max);
        }
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let r = f(mid);
        if r.abs() <= DENSITY_TOL * target.max(1.0) {
            return Ok(mid);
        }
        if r < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (rl, rh) = (f(lo).abs(), f(hi).abs());
    Ok(if rl < rh { lo } else { hi })
}

/// Calibrates `z` so the expected density equals `target`.
pub fn solve_z(
    fit: &BlockFitnesses,
    target: f64,
    mode: ZMode,
    scope: DensityScope,
) -> Result<ZSolution> {
    match mode {
        ZMode::Global => {
            let n = fit.n();
            let mut count = 0;
            let mut products = Vec::new();
            for i in 0..n {
                for j in 0..n {
                    if scope.admits(fit, i, j) {
                        count += 1;
                        let x = fit.product(i, j);
                        if x > 0.0 {
                            products.push(x);
                        }
                    }
                }
            }
            if products.is_empty() {
                return Err(ReconstructError::NoSupport);
            }
            solve_density(&products, count, target)
                .map(ZSolution::Global)
                .map_err(|max| ReconstructError::Unattainable { target, max, block: None })
        }
        ZMode::PerBlock => {
            let c = fit.n_blocks();
            let mut zs = vec![vec![0.0; c]; c];
            let mut any = false;
            for u in 0..c {
                for v in 0..c {
                    let pairs = block_pairs(fit, scope, u, v);
                    let products: Vec<f64> = pairs
                        .iter()
                        .map(|&(i, j)| fit.product(i, j))
                        .filter(|&x| x > 0.0)
                        .collect();
                    if products.is_empty() {
                        continue;
                    }
                    any = true;
                    zs[u][v] = solve_density(&products, pairs.len(), target).map_err(|max| {
                        ReconstructError::Unattainable {
                            target,
                            max,
                            block: Some((fit.blocks[u].clone(), fit.blocks[v].clone())),
                        }
                    })?;
                }
            }
            if !any {
                return Err(ReconstructError::NoSupport);
            }
            Ok(ZSolution::PerBlock(zs))
        }
    }
}
