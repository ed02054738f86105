//! Greedy cutoff-frequency maximization.
//!
//! On each similarity component the proxy matrix `A = L^k = U diag(λ^k) U^T`
//! is factored once as `A = M^T M` with `M = diag(λ^{k/2}) U^T`, and `R`
//! from the QR of `M` satisfies `R^T R = A`. Restricting `A` to the unsampled set is a column
//! deletion on `R`, restored to triangular form with Givens rotations, so
//! each greedy step costs `O(m^2)` plus a few inverse-iteration solves.
//!
//! While some similarity component has no sample the restricted matrix is
//! singular. The pick inside such a component maximizes the exact singleton
//! cutoff, found from the secular equation `sum_j U[v,j]^2 / (mu_j - x) = 0`.

use nalgebra::{DMatrix, DVector};

use super::{sorted_eigen, Eigenpairs, LaplacianModel, SpectralConfig};
use crate::error::{Error, Result};
use crate::graph::NodeId;

const NEGLIGIBLE_WEIGHT: f64 = 1e-24;
const MAX_INVERSE_ITERS: usize = 500;
const VECTOR_TOL: f64 = 1e-8;
const STAGNATION: usize = 10;
const SUBSPACE: usize = 8;
const THETA_RTOL: f64 = 1e-12;

/// Factor of one similarity component.
#[derive(Debug)]
struct Block {
    eig: Eigenpairs,
    /// Unsampled nodes, ascending; column `i` of `r` belongs to `nodes[i]`.
    nodes: Vec<NodeId>,
    r: DMatrix<f64>,
    sampled: bool,
    /// Subspace of the last inverse iteration.
    warm: Option<DMatrix<f64>>,
    /// Smallest eigenpair of the restricted block, when current.
    smallest: Option<(f64, DVector<f64>)>,
}

impl Block {
    fn new(model: &LaplacianModel, comp: &[NodeId], power: u32) -> Self {
        let eig = if model.components().len() == 1 {
            model.eigen().clone()
        } else {
            let l = model.matrix();
            sorted_eigen(DMatrix::from_fn(comp.len(), comp.len(), |a, b| {
                l[(comp[a], comp[b])]
            }))
        };
        let m = comp.len();
        let half = f64::from(power) / 2.0;
        let scale: Vec<f64> = eig.values.iter().map(|&l| l.max(0.0).powf(half)).collect();
        let factor = DMatrix::from_fn(m, m, |j, i| scale[j] * eig.vectors[(i, j)]);
        let r = factor.qr().r();
        Self {
            eig,
            nodes: comp.to_vec(),
            r,
            sampled: false,
            warm: None,
            smallest: None,
        }
    }

    /// Node maximizing the cutoff of the block with that node removed.
    fn secular_pick(&self, power: u32) -> NodeId {
        if self.nodes.len() == 1 {
            return self.nodes[0];
        }
        let m = self.nodes.len();
        let mut mu: Vec<f64> = self
            .eig
            .values
            .iter()
            .map(|&l| l.max(0.0).powi(power as i32))
            .collect();
        mu[0] = 0.0;
        let mut best = (self.nodes[0], f64::NEG_INFINITY);
        for (a, &v) in self.nodes.iter().enumerate() {
            let w: Vec<f64> = (0..m).map(|j| self.eig.vectors[(a, j)].powi(2)).collect();
            let score = singleton_cutoff(&mu, &w);
            if score > best.1 {
                best = (v, score);
            }
        }
        best.0
    }

    /// Subspace inverse iteration on `R^T R`. The Rayleigh-Ritz step runs on
    /// the inverse, whose dominant end is computed accurately even when the
    /// block is badly conditioned, and keeps clustered small eigenvalues from
    /// stalling convergence.
    fn smallest_eigenpair(&mut self, step: usize) -> Result<(f64, DVector<f64>)> {
        let fail = || Error::EigenFailure { step };
        let m = self.nodes.len();
        let p = SUBSPACE.min(m);
        let start = match self.warm.take() {
            Some(w) if w.ncols() == p => w,
            _ => DMatrix::from_fn(m, p, |i, j| {
                ((i as f64 + 0.5) * j as f64 * std::f64::consts::PI / m as f64).cos()
            }),
        };
        let x = start.qr().q();
        // Invariant: y = R^{-T} x.
        let mut y = self.r.tr_solve_upper_triangular(&x).ok_or_else(fail)?;
        let mut x = x;
        let mut prev: Option<(f64, DVector<f64>)> = None;
        // Rounding puts a floor under the per-iteration change; stop once
        // the change has not halved for a while.
        let (mut best_move, mut since_best) = (f64::INFINITY, 0);
        for _ in 0..MAX_INVERSE_ITERS {
            let z = self.r.solve_upper_triangular(&y).ok_or_else(fail)?;
            if !z.iter().all(|v| v.is_finite()) {
                return Err(fail());
            }
            let q = z.qr().q();
            let c = self.r.tr_solve_upper_triangular(&q).ok_or_else(fail)?;
            let ritz = sorted_eigen(c.tr_mul(&c));
            let order = DMatrix::from_fn(p, p, |i, j| ritz.vectors[(i, p - 1 - j)]);
            x = q * &order;
            y = c * &order;
            let top = ritz.values[p - 1];
            if !(top.is_finite() && top > 0.0) {
                return Err(fail());
            }
            let theta = 1.0 / top;
            let mut v: DVector<f64> = x.column(0).into_owned();
            let mut done = false;
            if let Some((t0, v0)) = &prev {
                if v.dot(v0) < 0.0 {
                    v.neg_mut();
                }
                let moved = (&v - v0).norm();
                if moved < 0.5 * best_move {
                    best_move = moved;
                    since_best = 0;
                } else {
                    since_best += 1;
                }
                done = moved < VECTOR_TOL
                    || (theta - t0).abs() <= THETA_RTOL * theta
                    || since_best >= STAGNATION;
            }
            prev = Some((theta, v));
            if done {
                break;
            }
        }
        self.warm = Some(x);
        Ok(prev.expect("at least one iteration ran"))
    }

    fn remove(&mut self, p: usize) {
        self.nodes.remove(p);
        let r = std::mem::replace(&mut self.r, DMatrix::zeros(0, 0)).remove_column(p);
        self.r = retriangularize(r, p);
        self.smallest = None;
        self.warm = self.warm.take().map(|w| {
            let w = w.remove_row(p);
            let keep = SUBSPACE.min(w.nrows());
            w.columns(0, keep).into_owned()
        });
        self.sampled = true;
    }
}

/// Lazily yields the greedy cutoff-maximization order. The sequence is
/// deterministic, so any prefix is the selection for that budget.
///
/// The proxy matrix is block diagonal over similarity components, so its
/// smallest restricted eigenpair is that of the block with the smallest
/// eigenvalue; ties go to the block with the smallest node.
#[derive(Debug)]
pub struct CutoffSelector {
    power: u32,
    blocks: Vec<Block>,
    block_of: Vec<usize>,
    remaining: usize,
    step: usize,
    failed: bool,
}

impl CutoffSelector {
    pub fn new(model: &LaplacianModel, cfg: &SpectralConfig) -> Result<Self> {
        cfg.validate()?;
        let n = model.node_count();
        let mut block_of = vec![0; n];
        let mut blocks = Vec::with_capacity(model.components().len());
        for (c, comp) in model.components().iter().enumerate() {
            for &v in comp {
                block_of[v] = c;
            }
            blocks.push(Block::new(model, comp, cfg.proxy_power));
        }
        Ok(Self {
            power: cfg.proxy_power,
            blocks,
            block_of,
            remaining: n,
            step: 0,
            failed: false,
        })
    }

    /// Number of nodes selected so far.
    pub fn step(&self) -> usize {
        self.step
    }

    fn pick(&mut self) -> Result<NodeId> {
        if let Some(b) = self.blocks.iter().find(|b| !b.sampled) {
            return Ok(b.secular_pick(self.power));
        }
        let mut best: Option<(usize, f64)> = None;
        for (i, b) in self.blocks.iter_mut().enumerate() {
            if b.nodes.is_empty() {
                continue;
            }
            if b.smallest.is_none() {
                b.smallest = Some(b.smallest_eigenpair(self.step)?);
            }
            let theta = b.smallest.as_ref().map(|s| s.0).unwrap_or(f64::INFINITY);
            if best.is_none_or(|(_, t)| theta < t) {
                best = Some((i, theta));
            }
        }
        let (i, _) = best.expect("an unsampled node remains");
        let block = &self.blocks[i];
        let psi = &block.smallest.as_ref().expect("computed above").1;
        let mut top = 0;
        for j in 1..psi.len() {
            if psi[j] * psi[j] > psi[top] * psi[top] {
                top = j;
            }
        }
        Ok(block.nodes[top])
    }

    fn remove(&mut self, node: NodeId) {
        let block = &mut self.blocks[self.block_of[node]];
        let p = block
            .nodes
            .binary_search(&node)
            .expect("selected node is unsampled");
        block.remove(p);
        self.remaining -= 1;
    }
}

impl Iterator for CutoffSelector {
    type Item = Result<NodeId>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed || self.remaining == 0 {
            return None;
        }
        match self.pick() {
            Ok(node) => {
                self.remove(node);
                self.step += 1;
                Some(Ok(node))
            }
            Err(e) => {
                self.failed = true;
                Some(Err(e))
            }
        }
    }
}

/// Restores an `m x (m-1)` upper-Hessenberg matrix, whose column `p` was
/// just deleted from a triangular factor, to an `(m-1) x (m-1)` triangle.
fn retriangularize(mut r: DMatrix<f64>, p: usize) -> DMatrix<f64> {
    let m = r.nrows();
    let cols = r.ncols();
    for k in p..cols {
        let a = r[(k, k)];
        let b = r[(k + 1, k)];
        if b == 0.0 {
            continue;
        }
        let h = a.hypot(b);
        let (c, s) = (a / h, b / h);
        for col in k..cols {
            let x = r[(k, col)];
            let y = r[(k + 1, col)];
            r[(k, col)] = c * x + s * y;
            r[(k + 1, col)] = c * y - s * x;
        }
        r[(k + 1, k)] = 0.0;
    }
    r.remove_row(m - 1)
}

/// Smallest eigenvalue of `U diag(mu) U^T` with one row and column
/// removed, given `mu` ascending with `mu[0] = 0` and the squared entries
/// `w` of that row of `U`.
fn singleton_cutoff(mu: &[f64], w: &[f64]) -> f64 {
    let first_free = if mu.len() > 1 { mu[1] } else { f64::INFINITY };
    let Some(up) = (1..mu.len()).find(|&j| w[j] > NEGLIGIBLE_WEIGHT) else {
        return first_free;
    };
    if w[0] <= NEGLIGIBLE_WEIGHT || mu[up] <= 0.0 {
        return first_free.min(mu[up].max(0.0));
    }
    let secular = |x: f64| -> f64 {
        let mut s = -w[0] / x;
        for j in up..mu.len() {
            if w[j] > NEGLIGIBLE_WEIGHT {
                s += w[j] / (mu[j] - x);
            }
        }
        s
    };
    let mut hi = mu[up].ln();
    let mut lo = hi - 200.0;
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if secular(mid.exp()) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let root = (0.5 * (lo + hi)).exp();
    if up > 1 {
        root.min(first_free)
    } else {
        root
    }
}

/// First `budget` nodes of the greedy order.
pub fn cutoff_greedy_select(
    model: &LaplacianModel,
    cfg: &SpectralConfig,
    budget: usize,
) -> Result<Vec<NodeId>> {
    let n = model.node_count();
    if budget > n {
        return Err(Error::InvalidBudget { budget, n });
    }
    CutoffSelector::new(model, cfg)?.take(budget).collect()
}

/// Estimated cutoff frequency `λ_min((L^k)_{S^c})^{1/k}` of a sample set;
/// infinite when every node is sampled.
pub fn estimated_cutoff(
    model: &LaplacianModel,
    proxy_power: u32,
    sampled: &[NodeId],
) -> Result<f64> {
    let n = model.node_count();
    let mut in_s = vec![false; n];
    for &v in sampled {
        if v >= n {
            return Err(Error::NodeOutOfRange { node: v, n });
        }
        in_s[v] = true;
    }
    let rest: Vec<NodeId> = (0..n).filter(|&v| !in_s[v]).collect();
    if rest.is_empty() {
        return Ok(f64::INFINITY);
    }
    let eig = model.eigen();
    let half = f64::from(proxy_power) / 2.0;
    let m = DMatrix::from_fn(n, rest.len(), |j, i| {
        eig.values[j].max(0.0).powf(half) * eig.vectors[(rest[i], j)]
    });
    let smin = m.singular_values().min();
    Ok((smin * smin).powf(1.0 / f64::from(proxy_power)))
}
