//! Markovianization of the path measure: block increments, the coupling
//! kernel `k`, the Nystrom-discretized transfer operator, its Perron
//! eigenpair, the tilted chain and the CLT variance.
//!
//! The time axis is split into blocks of length `L`; within-block
//! interactions tilt the single-block measure `pi`, adjacent blocks couple
//! through `k(xi, xi')`, and (for `rho` supported inside one block) nothing
//! else survives, so the trapezoid Hamiltonian factorizes exactly:
//! `beta H_T = sum_j diag(xi_j) + sum_j k(xi_{j-1}, xi_j)`. Block boundary
//! nodes carry half weights on each side, which makes the factorization an
//! identity at the discrete level (the compact-support entropy gap coming
//! out exactly zero is the regression test for this bookkeeping).
//!
//! The state space is discretized by Nystrom sampling: reference blocks
//! drawn from `pi` with importance weights. Every formula of the theory then
//! becomes a finite matrix identity.

use crate::error::Error;
use crate::gibbs::{GibbsChain, GibbsConfig, McmcParams, StartMode};
use crate::interactions::InteractionKernel;
use crate::linfit::{linear_fit, LinearFit};
use crate::par;
use crate::paths::{DiscretePath, PathGrid};
use crate::quad::trapezoid_weight;
use crate::stats;
use crate::Result;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Importance-sampling ESS floor, as a fraction of the ensemble size.
pub const ESS_FLOOR_FRACTION: f64 = 0.02;

// ---------------------------------------------------------------------------
// Block increments
// ---------------------------------------------------------------------------

/// Displacements of a path inside one block, anchored at the block start:
/// `disp[k] = omega(block_start + k dt) - omega(block_start)`.
#[derive(Debug, Clone)]
pub struct BlockIncrement {
    pub dt: f64,
    pub d: usize,
    disp: Vec<f64>, // (m+1) * d, disp[0..d] = 0
}

impl BlockIncrement {
    pub fn zero(n_inner: usize, dt: f64, d: usize) -> Self {
        Self { dt, d, disp: vec![0.0; (n_inner + 1) * d] }
    }

    pub fn from_displacements(dt: f64, d: usize, disp: Vec<f64>) -> Self {
        assert!(disp.len() % d == 0 && disp.len() >= 2 * d);
        assert!(disp[..d].iter().all(|&v| v == 0.0), "block must be anchored at 0");
        Self { dt, d, disp }
    }

    pub fn sample<R: Rng>(n_inner: usize, dt: f64, d: usize, rng: &mut R) -> Self {
        let sd = dt.sqrt();
        let mut disp = vec![0.0; (n_inner + 1) * d];
        for k in 0..n_inner {
            for c in 0..d {
                disp[(k + 1) * d + c] = disp[k * d + c] + sd * rng.sample::<f64, _>(StandardNormal);
            }
        }
        Self { dt, d, disp }
    }

    pub fn n_inner(&self) -> usize {
        self.disp.len() / self.d - 1
    }

    pub fn block_time(&self) -> f64 {
        self.n_inner() as f64 * self.dt
    }

    #[inline]
    pub fn disp(&self, k: usize) -> &[f64] {
        &self.disp[k * self.d..(k + 1) * self.d]
    }

    /// Block endpoint displacement (the CLT observable).
    pub fn endpoint(&self) -> &[f64] {
        self.disp(self.n_inner())
    }

    /// Negated block (used by symmetry checks).
    pub fn negated(&self) -> Self {
        Self { dt: self.dt, d: self.d, disp: self.disp.iter().map(|v| -v).collect() }
    }

    /// Levy midpoint refinement with `dt -> dt/2`, reusing this block's
    /// displacements (grid-coupled comparisons).
    pub fn refine_half<R: Rng>(&self, rng: &mut R) -> Self {
        let m = self.n_inner();
        let d = self.d;
        let sd = (self.dt / 4.0).sqrt();
        let mut disp = vec![0.0; (2 * m + 1) * d];
        for k in 0..m {
            for c in 0..d {
                let a = self.disp[k * d + c];
                let b = self.disp[(k + 1) * d + c];
                let mid = 0.5 * (a + b) + sd * rng.sample::<f64, _>(StandardNormal);
                disp[(2 * k + 1) * d + c] = mid;
                disp[(2 * k + 2) * d + c] = b;
            }
        }
        Self { dt: 0.5 * self.dt, d, disp }
    }
}

/// Within-block tilt exponent `beta int int_{I^2} rho V` (trapezoid over the
/// block's nodes; both orderings counted).
pub fn diag_exponent(block: &BlockIncrement, kernel: &InteractionKernel) -> f64 {
    let m = block.n_inner();
    let d = block.d;
    let dt = block.dt;
    let m_range = kernel
        .rho_compact_support()
        .map(|r| ((r / dt) + 1e-9).floor() as usize)
        .unwrap_or(m)
        .min(m);
    let mut acc = 0.0;
    for i in 0..=m {
        let wi = trapezoid_weight(i, m, dt);
        let adj = {
            let k = if i < m { i } else { m - 1 };
            let a = block.disp(k);
            let b = block.disp(k + 1);
            (0..d).map(|c| (b[c] - a[c]) * (b[c] - a[c])).sum::<f64>().sqrt()
        };
        acc += wi * wi * kernel.diagonal_value(dt, adj);
        let j_hi = m.min(i + m_range);
        for j in (i + 1)..=j_hi {
            let tau = (j - i) as f64 * dt;
            let pi = block.disp(i);
            let pj = block.disp(j);
            let r = (0..d).map(|c| (pj[c] - pi[c]) * (pj[c] - pi[c])).sum::<f64>().sqrt();
            acc += 2.0 * wi * trapezoid_weight(j, m, dt) * kernel.h_radial(tau, r);
        }
    }
    kernel.beta() * acc
}

/// Coupling exponent between consecutive blocks:
/// `k(xi, xi') = 2 beta int_{I_0} ds int_{I_1} dt rho(t-s)
/// V([omega(t)-omega(L)] + [omega(L)-omega(s)])`.
pub fn coupling_k(
    left: &BlockIncrement,
    right: &BlockIncrement,
    kernel: &InteractionKernel,
) -> Result<f64> {
    if left.n_inner() != right.n_inner() || left.dt != right.dt || left.d != right.d {
        return Err(Error::GridMismatch("coupled blocks must share (L, dt, d)".into()));
    }
    let m = left.n_inner();
    let d = left.d;
    let dt = left.dt;
    let max_sep_steps = kernel
        .rho_compact_support()
        .map(|r| ((r / dt) + 1e-9).floor() as isize)
        .unwrap_or(isize::MAX);
    let left_end = left.disp(m);
    let mut acc = 0.0;
    // s at node i of the left block, t at node j of the right block;
    // separation tau = (m - i + j) dt.
    for j in 0..=m {
        let wj = trapezoid_weight(j, m, dt);
        let fwd = right.disp(j);
        let i_lo = if max_sep_steps == isize::MAX {
            0
        } else {
            // need m - i + j <= max_sep_steps  =>  i >= m + j - max_sep_steps
            (m as isize + j as isize - max_sep_steps).max(0) as usize
        };
        if i_lo > m {
            continue;
        }
        for i in i_lo..=m {
            let tau = (m - i + j) as f64 * dt;
            let bwd_base = left.disp(i);
            let mut r2 = 0.0;
            for c in 0..d {
                let v = fwd[c] + (left_end[c] - bwd_base[c]);
                r2 += v * v;
            }
            let wi = trapezoid_weight(i, m, dt);
            acc += wi * wj * kernel.h_radial(tau, r2.sqrt());
        }
    }
    let k = 2.0 * kernel.beta() * acc;
    if !k.is_finite() {
        return Err(Error::NonFinite { context: "coupling_k quadrature" });
    }
    Ok(k)
}

// ---------------------------------------------------------------------------
// Ensemble sampling
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockSampling {
    /// Wiener blocks with self-normalized weights `exp(diag exponent)`.
    PriorImportance,
    /// Metropolis within the block targeting `pi`; unit weights.
    Mcmc { sweeps: usize, burn_in: usize },
}

/// Nystrom ensemble: reference blocks with normalized weights, plus the
/// single-block normalizer estimate.
#[derive(Debug, Clone)]
pub struct TransferEnsemble {
    pub blocks: Vec<BlockIncrement>,
    pub weights: Vec<f64>,
    pub z_hat: f64,
    pub z_hat_se: f64,
    pub ess: f64,
    pub seed: u64,
}

impl TransferEnsemble {
    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn d(&self) -> usize {
        self.blocks[0].d
    }

    pub fn block_time(&self) -> f64 {
        self.blocks[0].block_time()
    }

    /// Per-coordinate block endpoint observable at each node.
    pub fn endpoint_observable(&self) -> Vec<Vec<f64>> {
        let d = self.d();
        (0..d).map(|c| self.blocks.iter().map(|b| b.endpoint()[c]).collect()).collect()
    }

    /// Coupled refinement of every block (dt -> dt/2), deterministic in seed.
    pub fn refine_half(&self, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let blocks = self.blocks.iter().map(|b| b.refine_half(&mut rng)).collect();
        Self {
            blocks,
            weights: self.weights.clone(),
            z_hat: self.z_hat,
            z_hat_se: self.z_hat_se,
            ess: self.ess,
            seed,
        }
    }

    /// Recomputes the importance weights and normalizer from the current
    /// blocks (used after a coupled refinement, where the within-block tilt
    /// changes with the finer quadrature).
    pub fn reweight(&mut self, kernel: &InteractionKernel) -> Result<()> {
        let n = self.blocks.len();
        let exponents = par::map_indexed(n, |i| diag_exponent(&self.blocks[i], kernel));
        if exponents.iter().any(|e| !e.is_finite()) {
            return Err(Error::NonFinite { context: "block tilt exponent" });
        }
        let emax = exponents.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let raw: Vec<f64> = exponents.iter().map(|e| (e - emax).exp()).collect();
        let sum: f64 = raw.iter().sum();
        self.weights = raw.iter().map(|w| w / sum).collect();
        self.ess = stats::importance_ess(&raw);
        let unshifted: Vec<f64> = exponents.iter().map(|e| e.exp()).collect();
        let (z_hat, z_hat_se) = stats::mean_se(&unshifted);
        self.z_hat = z_hat;
        self.z_hat_se = z_hat_se;
        Ok(())
    }
}

/// Samples reference blocks from the single-block measure `pi`.
pub fn sample_block_measure(
    kernel: &InteractionKernel,
    block_time: f64,
    dt: f64,
    n_blocks: usize,
    seed: u64,
    mode: BlockSampling,
) -> Result<TransferEnsemble> {
    if n_blocks < 2 {
        return Err(Error::Config("ensemble needs at least 2 blocks".into()));
    }
    let steps = block_time / dt;
    let m = steps.round() as usize;
    if m == 0 || (steps - m as f64).abs() > 1e-9 {
        return Err(Error::GridMismatch(format!(
            "block time {block_time} is not an integer multiple of dt = {dt}"
        )));
    }
    let d = kernel.dim();
    match mode {
        BlockSampling::PriorImportance => {
            let blocks: Vec<BlockIncrement> = par::map_indexed(n_blocks, |i| {
                let mut rng = ChaCha8Rng::seed_from_u64(crate::replica_seed(seed, i as u64));
                BlockIncrement::sample(m, dt, d, &mut rng)
            });
            let exponents = par::map_indexed(n_blocks, |i| diag_exponent(&blocks[i], kernel));
            if exponents.iter().any(|e| !e.is_finite()) {
                return Err(Error::NonFinite { context: "block tilt exponent" });
            }
            let emax = exponents.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let raw: Vec<f64> = exponents.iter().map(|e| (e - emax).exp()).collect();
            let sum: f64 = raw.iter().sum();
            let weights: Vec<f64> = raw.iter().map(|w| w / sum).collect();
            let ess = stats::importance_ess(&raw);
            let floor = ESS_FLOOR_FRACTION * n_blocks as f64;
            if ess < floor {
                return Err(Error::WeightDegeneracy { ess, floor });
            }
            let unshifted: Vec<f64> = exponents.iter().map(|e| e.exp()).collect();
            let (z_hat, z_hat_se) = stats::mean_se(&unshifted);
            Ok(TransferEnsemble { blocks, weights, z_hat, z_hat_se, ess, seed })
        }
        BlockSampling::Mcmc { sweeps, burn_in } => {
            if sweeps <= burn_in {
                return Err(Error::Config("mcmc block sampling needs sweeps > burn_in".into()));
            }
            let grid = PathGrid::new(m, dt, d);
            let mcmc = McmcParams {
                block_len: (m / 2).max(1),
                proposals_per_sweep: (m / 4).max(2),
                sweeps,
                burn_in,
                thinning: 1,
            };
            let cfg = GibbsConfig {
                kernel: kernel.clone(),
                grid,
                mcmc,
                seed: crate::replica_seed(seed, 1),
            };
            let mut chain = GibbsChain::new(&cfg, StartMode::Prior)?;
            let record_every = ((sweeps - burn_in) / n_blocks).max(1);
            let mut blocks = Vec::with_capacity(n_blocks);
            let mut s = 0;
            while blocks.len() < n_blocks {
                chain.sweep();
                s += 1;
                if s > burn_in && s % record_every == 0 {
                    blocks.push(BlockIncrement::from_displacements(
                        dt,
                        d,
                        chain.positions().to_vec(),
                    ));
                }
            }
            // Normalizer from an independent prior-importance pass.
            let z: Vec<f64> = par::map_indexed(n_blocks, |i| {
                let mut rng =
                    ChaCha8Rng::seed_from_u64(crate::replica_seed(seed ^ 0x5eed, i as u64));
                let b = BlockIncrement::sample(m, dt, d, &mut rng);
                diag_exponent(&b, kernel).exp()
            });
            let (z_hat, z_hat_se) = stats::mean_se(&z);
            let weights = vec![1.0 / n_blocks as f64; n_blocks];
            Ok(TransferEnsemble { blocks, weights, z_hat, z_hat_se, ess: n_blocks as f64, seed })
        }
    }
}

// ---------------------------------------------------------------------------
// Transfer operator
// ---------------------------------------------------------------------------

/// Dense Nystrom transfer operator `K_ij = exp(k(xi_i, xi_j))` with
/// quadrature weights. Entries are kept in log space and rescaled by a
/// recorded `shift` so that `exp` never overflows.
pub struct TransferOperator {
    pub n: usize,
    pub d: usize,
    pub block_time: f64,
    pub log_k: Vec<f64>,
    pub shift: f64,
    pub k_scaled: Vec<f64>,
    pub weights: Vec<f64>,
}

impl TransferOperator {
    /// `(L u)_i = sum_j K_ij w_j u_j` in the rescaled convention
    /// (the true action is `exp(shift)` times this).
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let n = self.n;
        par::map_indexed(n, |i| {
            let row = &self.k_scaled[i * n..(i + 1) * n];
            let mut acc = 0.0;
            for j in 0..n {
                acc += row[j] * self.weights[j] * u[j];
            }
            acc
        })
    }

    /// Left action `v_j = sum_i u_i w_i K_ij` (rescaled convention).
    pub fn apply_left(&self, u: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n];
        for i in 0..n {
            let coeff = u[i] * self.weights[i];
            if coeff == 0.0 {
                continue;
            }
            let row = &self.k_scaled[i * n..(i + 1) * n];
            for j in 0..n {
                out[j] += coeff * row[j];
            }
        }
        out
    }

    /// `log` of the Hilbert-Schmidt estimate `sum_ij w_i w_j K_ij^2`.
    pub fn log_hs_sq(&self) -> f64 {
        let m2 = self.log_k.iter().cloned().fold(f64::NEG_INFINITY, f64::max) * 2.0;
        let mut acc = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                acc += self.weights[i]
                    * self.weights[j]
                    * (2.0 * self.log_k[i * self.n + j] - m2).exp();
            }
        }
        m2 + acc.ln()
    }

    /// Row masses `log sum_j K_ij w_j` (sup/inf diagnostics).
    pub fn log_row_masses(&self) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|i| {
                let row = &self.log_k[i * n..(i + 1) * n];
                let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let s: f64 = row.iter().zip(&self.weights).map(|(lk, w)| w * (lk - m).exp()).sum();
                m + s.ln()
            })
            .collect()
    }
}

/// Assembles the dense `K` matrix from an ensemble.
pub fn build_operator(
    ensemble: &TransferEnsemble,
    kernel: &InteractionKernel,
) -> Result<TransferOperator> {
    let n = ensemble.len();
    let blocks = &ensemble.blocks;
    let log_k = par::fill_rows(n, n, |i, row| {
        for (j, slot) in row.iter_mut().enumerate() {
            *slot = coupling_k(&blocks[i], &blocks[j], kernel).unwrap_or(f64::NAN);
        }
    });
    if log_k.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { context: "coupling matrix assembly" });
    }
    let max_lk = log_k.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let shift = if max_lk > 400.0 { max_lk - 400.0 } else { 0.0 };
    let k_scaled: Vec<f64> = log_k.iter().map(|lk| (lk - shift).exp()).collect();
    Ok(TransferOperator {
        n,
        d: ensemble.d(),
        block_time: ensemble.block_time(),
        log_k,
        shift,
        k_scaled,
        weights: ensemble.weights.clone(),
    })
}

// ---------------------------------------------------------------------------
// Perron eigenpair
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralResult {
    /// Perron eigenvalue (rescaled back; +inf only if the shift was huge).
    pub lambda0: f64,
    /// `log lambda0`, always finite.
    pub log_lambda0: f64,
    /// Recorded rescaling constant.
    pub log_lambda0_shift: f64,
    /// Positive eigenfunction at ensemble nodes, sup-normalized to 1.
    pub psi0: Vec<f64>,
    /// Doeblin constant `inf psi0 / sup psi0 = inf psi0`.
    pub delta: f64,
    /// Relative sup-norm eigen residual.
    pub residual: f64,
    /// Second-to-first eigenvalue magnitude ratio estimate.
    pub lambda1_ratio: f64,
    /// Spectral-gap estimate `1 - lambda1_ratio`.
    pub gap: f64,
    pub iterations: usize,
}

/// Power iteration from the constant vector; converges to the Perron pair of
/// a strictly positive matrix.
pub fn perron_eigenpair(op: &TransferOperator) -> Result<SpectralResult> {
    let n = op.n;
    let tol = 1e-13;
    let max_iter = 20_000;
    let mut v = vec![1.0; n];
    let mut lambda_scaled = 1.0;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    for it in 0..max_iter {
        let u = op.apply(&v);
        let sup = u.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !(sup > 0.0) {
            return Err(Error::NonConvergence("power iteration (non-positive iterate)"));
        }
        residual =
            u.iter().zip(&v).map(|(a, b)| (a - sup * b).abs()).fold(0.0_f64, f64::max) / sup;
        lambda_scaled = sup;
        for (vi, ui) in v.iter_mut().zip(&u) {
            *vi = ui / sup;
        }
        iterations = it + 1;
        if residual < tol && it >= 1 {
            break;
        }
    }
    if residual > 1e-8 {
        return Err(Error::NonConvergence("power iteration"));
    }
    let delta = v.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(delta > 0.0) {
        return Err(Error::NonConvergence("eigenfunction positivity"));
    }
    let log_lambda0 = lambda_scaled.ln() + op.shift;
    // Second eigenvalue estimate: deflate against the left eigenvector.
    let mut left = op.weights.clone();
    for _ in 0..200 {
        let u = op.apply_left(&left);
        let s: f64 = u.iter().sum();
        left = u.iter().map(|x| x / s).collect();
    }
    let inner = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(x, y)| x * y).sum() };
    let left_psi = inner(&left, &v);
    let mut rng = ChaCha8Rng::seed_from_u64(0xdef1);
    let mut y: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let c0 = inner(&left, &y) / left_psi;
    for (yi, vi) in y.iter_mut().zip(&v) {
        *yi -= c0 * vi;
    }
    let mut ratio = 0.0;
    for _ in 0..120 {
        let mut u = op.apply(&y);
        let c = inner(&left, &u) / left_psi;
        for (ui, vi) in u.iter_mut().zip(&v) {
            *ui -= c * vi;
        }
        let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            ratio = 0.0;
            break;
        }
        ratio = norm / lambda_scaled;
        for (yi, ui) in y.iter_mut().zip(&u) {
            *yi = ui / norm;
        }
    }
    Ok(SpectralResult {
        lambda0: log_lambda0.exp(),
        log_lambda0,
        log_lambda0_shift: op.shift,
        psi0: v,
        delta,
        residual,
        lambda1_ratio: ratio.min(1.0),
        gap: (1.0 - ratio).max(0.0),
        iterations,
    })
}

// ---------------------------------------------------------------------------
// Tilted chain
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct TiltedChain {
    pub n: usize,
    pub d: usize,
    pub block_time: f64,
    /// Row-major transition matrix `P_ij = K_ij psi_j w_j / (lambda0 psi_i)`.
    pub p: Vec<f64>,
    /// Stationary distribution over nodes.
    pub pi_star: Vec<f64>,
    /// Max row-sum deviation from 1 (equals the eigen residual algebraically).
    pub row_defect: f64,
    /// `sum_j |(pi P)_j - pi_j|` at the returned stationary vector.
    pub pi_residual: f64,
    /// `min_ij P_ij / w_j`, for the Doeblin floor check.
    pub min_p_over_w: f64,
    pub weights: Vec<f64>,
}

pub fn tilted_chain(spectral: &SpectralResult, op: &TransferOperator) -> Result<TiltedChain> {
    let n = op.n;
    let psi = &spectral.psi0;
    let lambda_scaled = (spectral.log_lambda0 - op.shift).exp();
    let p = par::fill_rows(n, n, |i, row| {
        let denom = lambda_scaled * psi[i];
        let krow = &op.k_scaled[i * n..(i + 1) * n];
        for j in 0..n {
            row[j] = krow[j] * psi[j] * op.weights[j] / denom;
        }
    });
    let mut row_defect = 0.0_f64;
    for i in 0..n {
        let s: f64 = p[i * n..(i + 1) * n].iter().sum();
        row_defect = row_defect.max((s - 1.0).abs());
    }
    if row_defect > 1e-6 {
        return Err(Error::NonConvergence("tilted chain row sums"));
    }
    let mut min_ratio = f64::INFINITY;
    for i in 0..n {
        for j in 0..n {
            min_ratio = min_ratio.min(p[i * n + j] / op.weights[j]);
        }
    }
    // Left power iteration for the stationary distribution.
    let mut pi = op.weights.clone();
    let mut pi_residual = f64::INFINITY;
    for _ in 0..50_000 {
        let mut next = vec![0.0; n];
        for i in 0..n {
            let c = pi[i];
            if c == 0.0 {
                continue;
            }
            let row = &p[i * n..(i + 1) * n];
            for j in 0..n {
                next[j] += c * row[j];
            }
        }
        let s: f64 = next.iter().sum();
        for x in &mut next {
            *x /= s;
        }
        pi_residual = pi.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        pi = next;
        if pi_residual < 1e-14 {
            break;
        }
    }
    Ok(TiltedChain {
        n,
        d: op.d,
        block_time: op.block_time,
        p,
        pi_star: pi,
        row_defect,
        pi_residual,
        min_p_over_w: min_ratio,
        weights: op.weights.clone(),
    })
}

impl TiltedChain {
    /// `(P g)_i`.
    pub fn apply(&self, g: &[f64]) -> Vec<f64> {
        let n = self.n;
        par::map_indexed(n, |i| {
            let row = &self.p[i * n..(i + 1) * n];
            row.iter().zip(g).map(|(p, x)| p * x).sum()
        })
    }

    pub fn expectation(&self, g: &[f64]) -> f64 {
        self.pi_star.iter().zip(g).map(|(p, x)| p * x).sum()
    }
}

// ---------------------------------------------------------------------------
// TV contraction
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct ContractionCurve {
    pub steps: Vec<usize>,
    /// `spread(n) = 1/2 sum_j (max_i - min_i) P^n_ij`, an upper bound on the
    /// worst-pair total variation; nonincreasing in `n`.
    pub spread: Vec<f64>,
    /// Fit of `ln spread` against `n` (geometric envelope); `None` when the
    /// spread hits zero (rank-one chain).
    pub fit: Option<LinearFit>,
}

fn mat_mul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    par::fill_rows(n, n, |i, out| {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == 0.0 {
                continue;
            }
            let brow = &b[k * n..(k + 1) * n];
            for j in 0..n {
                out[j] += aik * brow[j];
            }
        }
    })
}

fn spread_of(p: &[f64], n: usize) -> f64 {
    let mut acc = 0.0;
    for j in 0..n {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let v = p[i * n + j];
            lo = lo.min(v);
            hi = hi.max(v);
        }
        acc += hi - lo;
    }
    0.5 * acc
}

/// Row-spread decay of `P^n` over doubling steps `1, 2, 4, ... <= n_max`.
pub fn tv_contraction(chain: &TiltedChain, n_max: usize) -> ContractionCurve {
    let n = chain.n;
    let mut steps = Vec::new();
    let mut spread = Vec::new();
    let mut power = chain.p.clone();
    let mut k = 1;
    loop {
        steps.push(k);
        spread.push(spread_of(&power, n));
        if 2 * k > n_max {
            break;
        }
        power = mat_mul(&power, &power, n);
        k *= 2;
    }
    let usable: Vec<(f64, f64)> = steps
        .iter()
        .zip(&spread)
        .filter(|(_, s)| **s > 1e-300)
        .map(|(k, s)| (*k as f64, s.ln()))
        .collect();
    let fit = if usable.len() >= 3 {
        let xs: Vec<f64> = usable.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = usable.iter().map(|p| p.1).collect();
        Some(linear_fit(&xs, &ys))
    } else {
        None
    };
    ContractionCurve { steps, spread, fit }
}

// ---------------------------------------------------------------------------
// Chain marginal vs Gibbs block marginal
// ---------------------------------------------------------------------------

/// Binned TV between the chain's `n`-step block-endpoint marginal (worst over
/// a spread of start nodes) and a reference sample of Gibbs block
/// displacements.
pub fn marginal_vs_gibbs(
    chain: &TiltedChain,
    ensemble: &TransferEnsemble,
    n_steps: usize,
    gibbs_block_displacements: &[f64],
    bins: usize,
) -> f64 {
    let n = chain.n;
    let f: Vec<f64> = ensemble.blocks.iter().map(|b| b.endpoint()[0]).collect();
    let l = ensemble.block_time();
    let lo = -4.0 * l.sqrt();
    let hi = 4.0 * l.sqrt();
    let ref_hist = stats::histogram(gibbs_block_displacements, lo, hi, bins);
    // Start nodes at the f-quantiles: a spread of initial conditions.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| f[a].partial_cmp(&f[b]).unwrap());
    let starts: Vec<usize> = (0..8).map(|q| order[(q * (n - 1)) / 7]).collect();
    let w = (hi - lo) / bins as f64;
    let mut worst = 0.0_f64;
    for &s in &starts {
        let mut row = vec![0.0; n];
        row[s] = 1.0;
        for _ in 0..n_steps {
            let mut next = vec![0.0; n];
            for i in 0..n {
                let c = row[i];
                if c == 0.0 {
                    continue;
                }
                let prow = &chain.p[i * n..(i + 1) * n];
                for j in 0..n {
                    next[j] += c * prow[j];
                }
            }
            row = next;
        }
        let mut hist = vec![0.0; bins];
        for i in 0..n {
            let k = (((f[i] - lo) / w) as isize).clamp(0, bins as isize - 1) as usize;
            hist[k] += row[i];
        }
        let total: f64 = hist.iter().sum();
        for h in &mut hist {
            *h /= total;
        }
        worst = worst.max(stats::binned_tv(&hist, &ref_hist));
    }
    worst
}

// ---------------------------------------------------------------------------
// Poisson equation and variance routes
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct PoissonSolution {
    /// Per-coordinate centered observable.
    pub f_centered: Vec<Vec<f64>>,
    /// Per-coordinate solution by truncated Neumann series.
    pub u: Vec<Vec<f64>>,
    /// Per-coordinate solution by dense direct solve.
    pub u_direct: Vec<Vec<f64>>,
    /// Max residual `|(I-P)u - f_c|` over nodes and coordinates.
    pub residual: f64,
    /// Max deviation between the two solution routes.
    pub route_agreement: f64,
}

/// Solves `(I - P) u = f - <pi, f>` by a truncated Neumann series and by a
/// rank-one-corrected dense LU solve; the two routes are mutual oracles.
pub fn solve_poisson(chain: &TiltedChain, f_per_coord: &[Vec<f64>]) -> Result<PoissonSolution> {
    solve_poisson_routes(chain, f_per_coord, true)
}

/// As [`solve_poisson`], optionally skipping the dense direct route (large
/// stability sweeps reuse the Neumann series once the two routes have been
/// cross-checked at the base configuration).
pub fn solve_poisson_routes(
    chain: &TiltedChain,
    f_per_coord: &[Vec<f64>],
    with_direct: bool,
) -> Result<PoissonSolution> {
    let n = chain.n;
    let mut f_centered = Vec::new();
    let mut u_all = Vec::new();
    let mut u_direct_all = Vec::new();
    let mut residual = 0.0_f64;
    let mut agreement = 0.0_f64;
    for f in f_per_coord {
        assert_eq!(f.len(), n);
        let mean = chain.expectation(f);
        let fc: Vec<f64> = f.iter().map(|x| x - mean).collect();
        // Neumann series u = sum_k P^k fc, re-centered against drift.
        let mut u = fc.clone();
        let mut term = fc.clone();
        let scale = fc.iter().map(|x| x.abs()).fold(0.0_f64, f64::max).max(1e-300);
        let mut converged = false;
        for _ in 0..200_000 {
            term = chain.apply(&term);
            let drift = chain.expectation(&term);
            for t in &mut term {
                *t -= drift;
            }
            let tnorm = term.iter().map(|x| x.abs()).fold(0.0_f64, f64::max);
            for (ui, ti) in u.iter_mut().zip(&term) {
                *ui += ti;
            }
            if tnorm < 1e-14 * scale {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NonConvergence("Neumann series for the Poisson equation"));
        }
        // Direct route: (I - P + 1 pi^T) u = fc.
        let u_direct: Vec<f64> = if with_direct {
            let mut mat = nalgebra::DMatrix::<f64>::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    let mut v = -chain.p[i * n + j] + chain.pi_star[j];
                    if i == j {
                        v += 1.0;
                    }
                    mat[(i, j)] = v;
                }
            }
            let rhs = nalgebra::DVector::<f64>::from_column_slice(&fc);
            let lu = mat.lu();
            let sol =
                lu.solve(&rhs).ok_or(Error::NonConvergence("dense Poisson solve (singular)"))?;
            sol.iter().cloned().collect()
        } else {
            u.clone()
        };
        let pu = chain.apply(&u);
        for i in 0..n {
            residual = residual.max((u[i] - pu[i] - fc[i]).abs());
            agreement = agreement.max((u[i] - u_direct[i]).abs());
        }
        f_centered.push(fc);
        u_all.push(u);
        u_direct_all.push(u_direct);
    }
    Ok(PoissonSolution {
        f_centered,
        u: u_all,
        u_direct: u_direct_all,
        residual,
        route_agreement: agreement,
    })
}

/// CLT variance per coordinate per unit block time, by three routes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VarianceEstimate {
    /// `<(I-P)u, u>_{pi}` (the Dirichlet-form expression).
    pub sigma2_dirichlet: f64,
    /// `E[u^2] - E[(Pu)^2]` (classical asymptotic variance).
    pub sigma2_classical: f64,
    /// Truncated autocovariance sum `E[f^2] + 2 sum_k E[f P^k f]`.
    pub sigma2_autocov: f64,
    /// Indicative ensemble jitter for the classical route.
    pub jitter_se: f64,
    /// Poisson solver residual carried along.
    pub solver_residual: f64,
    /// Set when the three routes disagree beyond the documented tolerance.
    /// The Dirichlet form genuinely differs from the classical form for
    /// non-reversible chains, so this records rather than fails.
    pub routes_disagree: bool,
}

pub fn dirichlet_variance(chain: &TiltedChain, solution: &PoissonSolution) -> VarianceEstimate {
    let l = chain.block_time;
    let d = solution.u.len();
    let mut dir = 0.0;
    let mut cls = 0.0;
    let mut auto = 0.0;
    let mut jitter = 0.0;
    for c in 0..d {
        let u = &solution.u[c];
        let fc = &solution.f_centered[c];
        let pu = chain.apply(u);
        let e = |g: &dyn Fn(usize) -> f64| -> f64 {
            chain.pi_star.iter().enumerate().map(|(i, p)| p * g(i)).sum()
        };
        dir += e(&|i| (u[i] - pu[i]) * u[i]);
        cls += e(&|i| u[i] * u[i]) - e(&|i| pu[i] * pu[i]);
        // Autocovariance route, truncated when the terms fade.
        let mut acc = e(&|i| fc[i] * fc[i]);
        let scale = acc.abs().max(1e-300);
        let mut g = fc.clone();
        for _ in 0..100_000 {
            g = chain.apply(&g);
            let drift = chain.expectation(&g);
            for x in &mut g {
                *x -= drift;
            }
            let term = e(&|i| fc[i] * g[i]);
            acc += 2.0 * term;
            if term.abs() < 1e-14 * scale {
                break;
            }
        }
        auto += acc;
        let m2 = e(&|i| fc[i] * fc[i]);
        let var_f2 = e(&|i| (fc[i] * fc[i] - m2) * (fc[i] * fc[i] - m2));
        let ess: f64 = 1.0 / chain.pi_star.iter().map(|p| p * p).sum::<f64>();
        jitter += var_f2 / ess;
    }
    let norm = d as f64 * l;
    let sigma2_dirichlet = dir / norm;
    let sigma2_classical = cls / norm;
    let sigma2_autocov = auto / norm;
    let jitter_se = jitter.sqrt() / norm;
    let tol = 0.05 * sigma2_classical.abs().max(1e-12) + 3.0 * jitter_se;
    let routes_disagree = (sigma2_dirichlet - sigma2_classical).abs() > tol
        || (sigma2_autocov - sigma2_classical).abs() > tol;
    VarianceEstimate {
        sigma2_dirichlet,
        sigma2_classical,
        sigma2_autocov,
        jitter_se,
        solver_residual: solution.residual,
        routes_disagree,
    }
}

// ---------------------------------------------------------------------------
// Free energy vs Perron eigenvalue
// ---------------------------------------------------------------------------

/// `(1/n) log Zhat_n` where `Zhat_n = int e^{sum_1^n k} prod pi(d xi_j)`,
/// evaluated by exact contraction of the Nystrom matrix.
pub fn free_energy_curve(op: &TransferOperator, ns: &[usize]) -> Vec<(usize, f64)> {
    let n_nodes = op.n;
    let max_n = ns.iter().cloned().max().unwrap_or(0);
    let mut out = Vec::new();
    let mut v = op.apply(&vec![1.0; n_nodes]);
    let mut log_scale = op.shift;
    for step in 1..=max_n {
        if ns.contains(&step) {
            let z: f64 = op.weights.iter().zip(&v).map(|(w, x)| w * x).sum();
            out.push((step, (z.ln() + log_scale) / step as f64));
        }
        if step == max_n {
            break;
        }
        let sup = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let scaled: Vec<f64> = v.iter().map(|x| x / sup).collect();
        v = op.apply(&scaled);
        log_scale += sup.ln() + op.shift;
    }
    out
}

/// Monte Carlo sequential estimator of `Zhat_n` over i.i.d. node chains
/// drawn from the ensemble weights, with a standard error.
pub fn free_energy_sis(
    op: &TransferOperator,
    n_steps: usize,
    n_particles: usize,
    seed: u64,
) -> (f64, f64) {
    let n = op.n;
    let values = par::map_indexed(n_particles, |p| {
        let mut rng = ChaCha8Rng::seed_from_u64(crate::replica_seed(seed, p as u64));
        let draw = |rng: &mut ChaCha8Rng| -> usize {
            let x: f64 = rng.gen();
            let mut acc = 0.0;
            for (i, w) in op.weights.iter().enumerate() {
                acc += w;
                if x < acc {
                    return i;
                }
            }
            n - 1
        };
        let mut i = draw(&mut rng);
        let mut log_w = 0.0;
        for _ in 0..n_steps {
            let j = draw(&mut rng);
            log_w += op.log_k[i * n + j];
            i = j;
        }
        log_w.exp()
    });
    stats::mean_se(&values)
}

// ---------------------------------------------------------------------------
// Markov factorization and the block entropy gap
// ---------------------------------------------------------------------------

/// Slices a path into `n_blocks` equal blocks of anchored displacements.
pub fn path_blocks(path: &DiscretePath, n_blocks: usize) -> Result<Vec<BlockIncrement>> {
    let n = path.grid.n_steps;
    if n_blocks == 0 || n % n_blocks != 0 {
        return Err(Error::GridMismatch(format!("{n} steps do not split into {n_blocks} blocks")));
    }
    let m = n / n_blocks;
    let d = path.grid.d;
    let pos = path.positions();
    let mut blocks = Vec::with_capacity(n_blocks);
    for b in 0..n_blocks {
        let base: Vec<f64> = pos[b * m * d..(b * m + 1) * d].to_vec();
        let mut disp = vec![0.0; (m + 1) * d];
        for k in 0..=m {
            for c in 0..d {
                disp[k * d + c] = pos[(b * m + k) * d + c] - base[c];
            }
        }
        blocks.push(BlockIncrement::from_displacements(path.grid.dt, d, disp));
    }
    Ok(blocks)
}

/// Markovianized tilt exponent: within-block tilts plus nearest-neighbor
/// couplings. Equals `beta H_T` exactly when `rho` vanishes beyond one block.
pub fn markov_exponent(
    path: &DiscretePath,
    kernel: &InteractionKernel,
    n_blocks: usize,
) -> Result<f64> {
    let blocks = path_blocks(path, n_blocks)?;
    let mut acc = 0.0;
    for b in &blocks {
        acc += diag_exponent(b, kernel);
    }
    for w in blocks.windows(2) {
        acc += coupling_k(&w[0], &w[1], kernel)?;
    }
    Ok(acc)
}

/// Entropy-gap report for the block approximation: the MCMC estimate of the
/// neglected cross-block interaction (the relative-entropy upper bound), the
/// analytic `||V||_inf` envelope, and the Pinsker TV bound.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EntropyGapReport {
    pub t_horizon: f64,
    pub block_time: f64,
    pub n_blocks: usize,
    pub gap_estimate: f64,
    pub gap_se: f64,
    pub envelope: f64,
    pub tv_bound: f64,
}

pub fn block_entropy_gap(
    kernel: &InteractionKernel,
    grid: PathGrid,
    n_blocks: usize,
    mcmc: McmcParams,
    seed: u64,
) -> Result<EntropyGapReport> {
    use crate::interactions::AdmissibilityClass;
    if kernel.class() != AdmissibilityClass::LongRangeBounded
        && kernel.class() != AdmissibilityClass::MollifierProduct
    {
        return Err(Error::RejectedParameters(
            "block_entropy_gap requires a bounded spatial interaction".into(),
        ));
    }
    let sup_v =
        kernel.sup_v().ok_or_else(|| Error::RejectedParameters("bounded V required".into()))?;
    // Analytic envelope: the same neglected-pair quadrature with V replaced
    // by its sup, which is path-independent (evaluated on the zero path).
    let flat = {
        use crate::interactions::{BoundedForm, KernelForm, SpatialPotential};
        let rho = match kernel.form() {
            KernelForm::Product { rho, .. } => rho.clone(),
            _ => {
                return Err(Error::RejectedParameters(
                    "block_entropy_gap requires a product kernel".into(),
                ))
            }
        };
        InteractionKernel::new(
            KernelForm::Product {
                rho,
                v: SpatialPotential::Bounded {
                    form: BoundedForm::Constant { value: sup_v },
                    d: kernel.dim(),
                },
            },
            kernel.beta(),
            kernel.dim(),
        )?
    };
    let zero = DiscretePath::from_increments(grid, 0, vec![0.0; grid.n_steps * grid.d]);
    let full_flat = crate::paths::hamiltonian(&zero, &flat)? * flat.beta();
    let markov_flat = markov_exponent(&zero, &flat, n_blocks)?;
    let envelope = full_flat - markov_flat;
    // MCMC estimate of the neglected interaction under the Gibbs measure.
    let cfg = GibbsConfig { kernel: kernel.clone(), grid, mcmc, seed };
    let mut chain = GibbsChain::new(&cfg, StartMode::Prior)?;
    let mut values = Vec::new();
    for s in 0..mcmc.sweeps {
        chain.sweep();
        if s >= mcmc.burn_in && (s - mcmc.burn_in) % mcmc.thinning == 0 {
            let path = chain.to_path();
            let full = crate::paths::hamiltonian(&path, kernel)? * kernel.beta();
            let markov = markov_exponent(&path, kernel, n_blocks)?;
            values.push(full - markov);
        }
    }
    let n_batches = 10.min(values.len() / 4).max(2);
    let (gap_estimate, gap_se, _) = stats::batch_mean_se(&values, n_batches);
    Ok(EntropyGapReport {
        t_horizon: grid.horizon(),
        block_time: grid.horizon() / n_blocks as f64,
        n_blocks,
        gap_estimate,
        gap_se,
        envelope,
        tv_bound: (gap_estimate.max(0.0) / 2.0).sqrt(),
    })
}

// ---------------------------------------------------------------------------
// Serialized record (external interface)
// ---------------------------------------------------------------------------

/// JSON record for spectral and variance results.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralRecord {
    pub beta: f64,
    #[serde(rename = "L")]
    pub block_time: f64,
    pub dt: f64,
    #[serde(rename = "N")]
    pub n_nodes: usize,
    pub lambda0: f64,
    pub log_lambda0_shift: f64,
    pub delta: f64,
    pub gap: f64,
    pub sigma2_dirichlet: f64,
    pub sigma2_classical: f64,
    pub sigma2_autocov: f64,
    pub residual: f64,
    pub seed: u64,
}

pub fn spectral_record(
    kernel: &InteractionKernel,
    ensemble: &TransferEnsemble,
    spectral: &SpectralResult,
    variance: &VarianceEstimate,
) -> SpectralRecord {
    SpectralRecord {
        beta: kernel.beta(),
        block_time: ensemble.block_time(),
        dt: ensemble.blocks[0].dt,
        n_nodes: ensemble.len(),
        lambda0: spectral.lambda0,
        log_lambda0_shift: spectral.log_lambda0_shift,
        delta: spectral.delta,
        gap: spectral.gap,
        sigma2_dirichlet: variance.sigma2_dirichlet,
        sigma2_classical: variance.sigma2_classical,
        sigma2_autocov: variance.sigma2_autocov,
        residual: spectral.residual,
        seed: ensemble.seed,
    }
}

/// Convenience pipeline: ensemble -> operator -> eigenpair -> chain ->
/// Poisson solve on the endpoint observable -> variances.
pub struct SpectralPipeline {
    pub ensemble: TransferEnsemble,
    pub operator: TransferOperator,
    pub spectral: SpectralResult,
    pub chain: TiltedChain,
    pub poisson: PoissonSolution,
    pub variance: VarianceEstimate,
}

pub fn run_spectral_pipeline(
    kernel: &InteractionKernel,
    block_time: f64,
    dt: f64,
    n_blocks: usize,
    seed: u64,
    mode: BlockSampling,
) -> Result<SpectralPipeline> {
    let ensemble = sample_block_measure(kernel, block_time, dt, n_blocks, seed, mode)?;
    pipeline_from_ensemble(kernel, ensemble)
}

/// Runs the downstream pipeline on an already-sampled ensemble.
pub fn pipeline_from_ensemble(
    kernel: &InteractionKernel,
    ensemble: TransferEnsemble,
) -> Result<SpectralPipeline> {
    pipeline_from_ensemble_routes(kernel, ensemble, true)
}

/// As [`pipeline_from_ensemble`] with control over the dense Poisson route.
pub fn pipeline_from_ensemble_routes(
    kernel: &InteractionKernel,
    ensemble: TransferEnsemble,
    with_direct: bool,
) -> Result<SpectralPipeline> {
    let operator = build_operator(&ensemble, kernel)?;
    let spectral = perron_eigenpair(&operator)?;
    let chain = tilted_chain(&spectral, &operator)?;
    let f = ensemble.endpoint_observable();
    let poisson = solve_poisson_routes(&chain, &f, with_direct)?;
    let variance = dirichlet_variance(&chain, &poisson);
    Ok(SpectralPipeline { ensemble, operator, spectral, chain, poisson, variance })
}
