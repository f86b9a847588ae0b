//! Metropolis sampling of the finite-volume Gibbs measure
//! `dQ ~ exp(beta H_T) dP` on path space.
//!
//! Proposals regenerate the increments of a random sub-block from the Wiener
//! prior; the prior part of the density cancels, leaving acceptance
//! `min(1, exp(beta dH))`. Because the Hamiltonian depends on increments
//! only, a block regrow changes exactly the pairs whose time interval meets
//! the block, so `dH` costs O(block x interaction range) kernel evaluations
//! for compactly supported time correlations.
//!
//! Statistics depend only on increments; the anchor never enters, so uniform
//! spatial translation invariance is structural.

use crate::error::Error;
use crate::interactions::InteractionKernel;
use crate::paths::{hamiltonian, DiscretePath, PathGrid};
use crate::quad::trapezoid_weight;
use crate::stats;
use crate::Result;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Effective-sample floor below which endpoint estimates are flagged.
pub const N_EFF_FLOOR: f64 = 100.0;

#[derive(Debug, Clone, Copy)]
pub struct McmcParams {
    /// Proposal sub-block length in steps.
    pub block_len: usize,
    /// Metropolis proposals per sweep.
    pub proposals_per_sweep: usize,
    /// Total sweeps, including burn-in.
    pub sweeps: usize,
    /// Sweeps discarded before recording.
    pub burn_in: usize,
    /// Record every `thinning`-th sweep after burn-in.
    pub thinning: usize,
}

impl McmcParams {
    pub fn validate(&self, n_steps: usize) -> Result<()> {
        if self.block_len == 0 || self.block_len > n_steps {
            return Err(Error::Config(format!(
                "block_len must be in [1, n_steps = {n_steps}], got {}",
                self.block_len
            )));
        }
        if self.burn_in >= self.sweeps {
            return Err(Error::Config(format!(
                "burn_in ({}) must be < sweeps ({})",
                self.burn_in, self.sweeps
            )));
        }
        if self.thinning == 0 || self.proposals_per_sweep == 0 {
            return Err(Error::Config("thinning and proposals_per_sweep must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct GibbsConfig {
    pub kernel: InteractionKernel,
    pub grid: PathGrid,
    pub mcmc: McmcParams,
    pub seed: u64,
}

/// Initial state of a chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StartMode {
    /// Identically-zero path.
    Zero,
    /// A draw from the Wiener prior.
    Prior,
}

/// A running Metropolis chain over path increments.
pub struct GibbsChain {
    kernel: InteractionKernel,
    grid: PathGrid,
    increments: Vec<f64>,
    positions: Vec<f64>,
    rng: ChaCha8Rng,
    block_len: usize,
    proposals_per_sweep: usize,
    m_range: usize,
    singular_diag: bool,
    pub proposed: u64,
    pub accepted: u64,
    pub nonfinite_rejections: u64,
    // proposal scratch
    new_inc: Vec<f64>,
    new_inner_pos: Vec<f64>,
}

impl GibbsChain {
    pub fn new(config: &GibbsConfig, start: StartMode) -> Result<Self> {
        config.mcmc.validate(config.grid.n_steps)?;
        if config.kernel.dim() != config.grid.d {
            return Err(Error::DimensionMismatch {
                expected: config.kernel.dim(),
                got: config.grid.d,
            });
        }
        let n = config.grid.n_steps;
        let d = config.grid.d;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let increments = match start {
            StartMode::Zero => vec![0.0; n * d],
            StartMode::Prior => {
                let sd = config.grid.dt.sqrt();
                (0..n * d).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect()
            }
        };
        let m_range = config
            .kernel
            .rho_compact_support()
            .map(|r| ((r / config.grid.dt) + 1e-9).floor() as usize)
            .unwrap_or(n)
            .min(n);
        let singular_diag = config.kernel.form().singular_at_origin();
        let mut chain = Self {
            kernel: config.kernel.clone(),
            grid: config.grid,
            increments,
            positions: vec![0.0; (n + 1) * d],
            rng,
            block_len: config.mcmc.block_len,
            proposals_per_sweep: config.mcmc.proposals_per_sweep,
            m_range,
            singular_diag,
            proposed: 0,
            accepted: 0,
            nonfinite_rejections: 0,
            new_inc: vec![0.0; config.mcmc.block_len * d],
            new_inner_pos: vec![0.0; config.mcmc.block_len * d],
        };
        chain.rebuild_positions();
        Ok(chain)
    }

    fn rebuild_positions(&mut self) {
        let d = self.grid.d;
        for c in 0..d {
            self.positions[c] = 0.0;
        }
        for k in 0..self.grid.n_steps {
            for c in 0..d {
                self.positions[(k + 1) * d + c] =
                    self.positions[k * d + c] + self.increments[k * d + c];
            }
        }
    }

    /// Position of node `i` under the pending proposal `(a, l)`.
    #[inline]
    fn proposed_pos(&self, i: usize, a: usize, l: usize, delta: &[f64], c: usize) -> f64 {
        let d = self.grid.d;
        if i <= a {
            self.positions[i * d + c]
        } else if i <= a + l {
            self.new_inner_pos[(i - a - 1) * d + c]
        } else {
            self.positions[i * d + c] + delta[c]
        }
    }

    /// Energy change `H_new - H_old` (without beta) for regrowing the `l`
    /// increments starting at step `a` with `self.new_inc` (the caller must
    /// have filled `new_inner_pos`). Only pairs whose interval meets the
    /// block and lies within the interaction range are visited.
    fn delta_h(&self, a: usize, l: usize) -> f64 {
        let n = self.grid.n_steps;
        let d = self.grid.d;
        let dt = self.grid.dt;
        let mut delta_buf = [0.0_f64; 8];
        let delta = &mut delta_buf[..d];
        for c in 0..d {
            delta[c] = self.new_inner_pos[(l - 1) * d + c] - self.positions[(a + l) * d + c];
        }
        let mut dh = 0.0;
        let i_min = a.saturating_sub(self.m_range);
        let i_max = (a + l).min(n);
        for i in i_min..i_max {
            let wi = trapezoid_weight(i, n, dt);
            let j_lo = (i + 1).max(a + 1);
            let j_hi = n.min(i + self.m_range);
            for j in j_lo..=j_hi {
                let tau = (j - i) as f64 * dt;
                let mut r_old = 0.0;
                let mut r_new = 0.0;
                for c in 0..d {
                    let o = self.positions[j * d + c] - self.positions[i * d + c];
                    r_old += o * o;
                    let p = self.proposed_pos(j, a, l, delta, c)
                        - self.proposed_pos(i, a, l, delta, c);
                    r_new += p * p;
                }
                let w = 2.0 * wi * trapezoid_weight(j, n, dt);
                dh += w
                    * (self.kernel.h_radial(tau, r_new.sqrt())
                        - self.kernel.h_radial(tau, r_old.sqrt()));
            }
        }
        if self.singular_diag {
            // Diagonal cells referencing a regrown increment.
            let diag_term = |i: usize, inc_old: usize, inc_new: usize| {
                let wi = trapezoid_weight(i, n, dt);
                let mut old2 = 0.0;
                let mut new2 = 0.0;
                for c in 0..d {
                    let o = self.increments[inc_old * d + c];
                    old2 += o * o;
                    let v = self.new_inc[inc_new * d + c];
                    new2 += v * v;
                }
                wi * wi
                    * (self.kernel.diagonal_value(dt, new2.sqrt())
                        - self.kernel.diagonal_value(dt, old2.sqrt()))
            };
            for i in a..(a + l) {
                dh += diag_term(i, i, i - a);
            }
            if a + l == n {
                dh += diag_term(n, n - 1, l - 1);
            }
        }
        dh
    }

    fn propose(&mut self) {
        let n = self.grid.n_steps;
        let d = self.grid.d;
        let l = self.block_len;
        let a = self.rng.gen_range(0..=(n - l));
        let sd = self.grid.dt.sqrt();
        for k in 0..l * d {
            self.new_inc[k] = sd * self.rng.sample::<f64, _>(StandardNormal);
        }
        for c in 0..d {
            let mut acc = self.positions[a * d + c];
            for k in 0..l {
                acc += self.new_inc[k * d + c];
                self.new_inner_pos[k * d + c] = acc;
            }
        }
        self.proposed += 1;
        let beta = self.kernel.beta();
        // beta = 0: the prior part cancels and every proposal is accepted.
        let accept = if beta == 0.0 {
            true
        } else {
            let dh = self.delta_h(a, l);
            if !dh.is_finite() {
                self.nonfinite_rejections += 1;
                false
            } else if beta * dh >= 0.0 {
                true
            } else {
                self.rng.gen::<f64>().ln() < beta * dh
            }
        };
        if accept {
            self.accepted += 1;
            let mut delta_buf = [0.0_f64; 8];
            let delta = &mut delta_buf[..d];
            for c in 0..d {
                delta[c] = self.new_inner_pos[(l - 1) * d + c] - self.positions[(a + l) * d + c];
            }
            self.increments[a * d..(a + l) * d].copy_from_slice(&self.new_inc[..l * d]);
            self.positions[(a + 1) * d..(a + l + 1) * d]
                .copy_from_slice(&self.new_inner_pos[..l * d]);
            for j in (a + l + 1)..=n {
                for c in 0..d {
                    self.positions[j * d + c] += delta[c];
                }
            }
        }
    }

    /// One sweep of Metropolis block updates.
    pub fn sweep(&mut self) {
        for _ in 0..self.proposals_per_sweep {
            self.propose();
        }
    }

    /// Endpoint displacement `W(T) - W(0)`.
    pub fn endpoint(&self) -> Vec<f64> {
        let d = self.grid.d;
        let n = self.grid.n_steps;
        self.positions[n * d..(n + 1) * d].to_vec()
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn grid(&self) -> PathGrid {
        self.grid
    }

    pub fn to_path(&self) -> DiscretePath {
        DiscretePath::from_increments(self.grid, 0, self.increments.clone())
    }

    /// Full Hamiltonian of the current state (no beta).
    pub fn current_hamiltonian(&self) -> Result<f64> {
        hamiltonian(&self.to_path(), &self.kernel)
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            1.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    #[cfg(test)]
    pub(crate) fn delta_h_of_identity(&mut self) -> f64 {
        let a = 0;
        let l = self.block_len;
        let d = self.grid.d;
        for k in 0..l * d {
            self.new_inc[k] = self.increments[k];
        }
        for c in 0..d {
            let mut acc = self.positions[c];
            for k in 0..l {
                acc += self.new_inc[k * d + c];
                self.new_inner_pos[k * d + c] = acc;
            }
        }
        self.delta_h(a, l)
    }
}

/// Endpoint statistics of `(W(T) - W(0)) / sqrt(T)` under the Gibbs measure.
#[derive(Debug, Clone)]
pub struct EndpointStats {
    /// Per-coordinate thinned samples.
    pub samples: Vec<Vec<f64>>,
    /// Per-coordinate variance estimates.
    pub variance: Vec<f64>,
    /// Batch-mean standard errors of the variances.
    pub se: Vec<f64>,
    /// d x d sample covariance matrix, row-major.
    pub covariance: Vec<f64>,
    /// KS distance of the pooled coordinates against the fitted centered
    /// Gaussian, with the 5% verdict.
    pub ks_stat: f64,
    pub ks_pass: bool,
    pub n_eff: f64,
    pub flagged: bool,
    pub acceptance_rate: f64,
    pub nonfinite_rejections: u64,
}

impl EndpointStats {
    /// Pooled per-coordinate variance and combined standard error.
    pub fn pooled_variance(&self) -> (f64, f64) {
        let d = self.variance.len() as f64;
        let v = self.variance.iter().sum::<f64>() / d;
        let se = (self.se.iter().map(|s| s * s).sum::<f64>()).sqrt() / d;
        (v, se)
    }
}

/// Runs the chain and collects endpoint statistics.
pub fn estimate_endpoint(config: &GibbsConfig, start: StartMode) -> Result<EndpointStats> {
    let mut chain = GibbsChain::new(config, start)?;
    let d = config.grid.d;
    let sqrt_t = config.grid.horizon().sqrt();
    let mut samples: Vec<Vec<f64>> = vec![Vec::new(); d];
    for s in 0..config.mcmc.sweeps {
        chain.sweep();
        if s >= config.mcmc.burn_in && (s - config.mcmc.burn_in) % config.mcmc.thinning == 0 {
            let e = chain.endpoint();
            for c in 0..d {
                samples[c].push(e[c] / sqrt_t);
            }
        }
    }
    let k = samples[0].len();
    if k < 8 {
        return Err(Error::Config("too few thinned samples; increase sweeps".into()));
    }
    let n_batches = 20.min(k / 4).max(2);
    let mut variance = Vec::with_capacity(d);
    let mut se = Vec::with_capacity(d);
    let mut n_eff = f64::INFINITY;
    for c in 0..d {
        let sq: Vec<f64> = samples[c].iter().map(|x| x * x).collect();
        let (m2, s2, ne) = stats::batch_mean_se(&sq, n_batches);
        let m = stats::mean(&samples[c]);
        variance.push(m2 - m * m);
        se.push(s2);
        n_eff = n_eff.min(ne);
    }
    let mut covariance = vec![0.0; d * d];
    for a in 0..d {
        let ma = stats::mean(&samples[a]);
        for b in 0..d {
            let mb = stats::mean(&samples[b]);
            covariance[a * d + b] = samples[a]
                .iter()
                .zip(&samples[b])
                .map(|(x, y)| (x - ma) * (y - mb))
                .sum::<f64>()
                / (k - 1) as f64;
        }
    }
    let pooled: Vec<f64> = samples.iter().flatten().cloned().collect();
    let (ks_stat, ks_pass) = stats::ks_gaussian(&pooled);
    Ok(EndpointStats {
        samples,
        variance,
        se,
        covariance,
        ks_stat,
        ks_pass,
        n_eff,
        flagged: n_eff < N_EFF_FLOOR,
        acceptance_rate: chain.acceptance_rate(),
        nonfinite_rejections: chain.nonfinite_rejections,
    })
}

/// Log-partition curve from thermodynamic integration of
/// `d log Z / d beta = E_beta[H]` along an ascending beta grid starting at 0.
#[derive(Debug, Clone)]
pub struct LogPartitionCurve {
    pub betas: Vec<f64>,
    pub log_z: Vec<f64>,
    pub se: Vec<f64>,
    pub mean_energy: Vec<f64>,
}

pub fn log_partition(config: &GibbsConfig, beta_grid: &[f64]) -> Result<LogPartitionCurve> {
    if beta_grid.is_empty() || beta_grid[0] != 0.0 {
        return Err(Error::Config("beta grid must start at 0".into()));
    }
    if beta_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("beta grid must be strictly increasing".into()));
    }
    let mut mean_energy = Vec::with_capacity(beta_grid.len());
    let mut energy_se = Vec::with_capacity(beta_grid.len());
    for (i, &beta) in beta_grid.iter().enumerate() {
        let cfg = GibbsConfig {
            kernel: config.kernel.with_beta(beta),
            grid: config.grid,
            mcmc: config.mcmc,
            seed: crate::replica_seed(config.seed, i as u64),
        };
        let mut chain = GibbsChain::new(&cfg, StartMode::Prior)?;
        let mut values = Vec::new();
        for s in 0..cfg.mcmc.sweeps {
            chain.sweep();
            if s >= cfg.mcmc.burn_in && (s - cfg.mcmc.burn_in) % cfg.mcmc.thinning == 0 {
                values.push(chain.current_hamiltonian()?);
            }
        }
        let n_batches = 10.min(values.len() / 4).max(2);
        let (m, se, _) = stats::batch_mean_se(&values, n_batches);
        mean_energy.push(m);
        energy_se.push(se);
    }
    // Trapezoid in beta; propagated standard error.
    let mut log_z = vec![0.0];
    let mut se = vec![0.0];
    let mut var_acc = 0.0;
    for i in 1..beta_grid.len() {
        let h = beta_grid[i] - beta_grid[i - 1];
        log_z.push(log_z[i - 1] + 0.5 * h * (mean_energy[i] + mean_energy[i - 1]));
        var_acc += (0.5 * h * energy_se[i]).powi(2) + (0.5 * h * energy_se[i - 1]).powi(2);
        se.push(var_acc.sqrt());
    }
    Ok(LogPartitionCurve { betas: beta_grid.to_vec(), log_z, se, mean_energy })
}

/// KS distance to the centered Gaussian with the sample variance (5% gate).
pub fn ks_gaussian(samples: &[f64]) -> (f64, bool) {
    stats::ks_gaussian(samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interactions::{
        BoundedForm, KernelConfig, KernelForm, SpatialPotential, TimeCorrelation,
    };
    use crate::quad::gauss_hermite;
    use approx::assert_relative_eq;

    fn lorentz_kernel_1d(beta: f64, half_width: f64) -> InteractionKernel {
        InteractionKernel::new(
            KernelForm::Product {
                rho: TimeCorrelation::CompactBox { half_width, amplitude: 1.0 },
                v: SpatialPotential::Bounded { form: BoundedForm::Lorentzian { scale: 1.0 }, d: 1 },
            },
            beta,
            1,
        )
        .unwrap()
    }

    #[test]
    fn beta_zero_accepts_everything() {
        let cfg = GibbsConfig {
            kernel: lorentz_kernel_1d(0.0, 0.5),
            grid: PathGrid::new(32, 0.125, 1),
            mcmc: McmcParams {
                block_len: 8,
                proposals_per_sweep: 4,
                sweeps: 50,
                burn_in: 10,
                thinning: 1,
            },
            seed: 4,
        };
        let mut chain = GibbsChain::new(&cfg, StartMode::Zero).unwrap();
        for _ in 0..50 {
            chain.sweep();
        }
        assert_eq!(chain.accepted, chain.proposed);
    }

    #[test]
    fn identity_proposal_has_zero_energy_change() {
        let cfg = GibbsConfig {
            kernel: lorentz_kernel_1d(1.0, 0.5),
            grid: PathGrid::new(16, 0.125, 1),
            mcmc: McmcParams {
                block_len: 4,
                proposals_per_sweep: 2,
                sweeps: 20,
                burn_in: 5,
                thinning: 1,
            },
            seed: 9,
        };
        let mut chain = GibbsChain::new(&cfg, StartMode::Prior).unwrap();
        for _ in 0..10 {
            chain.sweep();
        }
        assert!(chain.delta_h_of_identity().abs() < 1e-12);
    }

    #[test]
    fn positions_stay_consistent_under_moves() {
        for kernel in [
            lorentz_kernel_1d(1.0, 0.5),
            KernelConfig::preset("poly_bounded", 1.0).build().unwrap(),
        ] {
            let d = kernel.dim();
            let grid = PathGrid::new(24, 0.125, d);
            let cfg = GibbsConfig {
                kernel,
                grid,
                mcmc: McmcParams {
                    block_len: 6,
                    proposals_per_sweep: 1,
                    sweeps: 10,
                    burn_in: 1,
                    thinning: 1,
                },
                seed: 77,
            };
            let mut chain = GibbsChain::new(&cfg, StartMode::Prior).unwrap();
            for _ in 0..30 {
                chain.propose();
            }
            let pos = chain.to_path().positions();
            for (a, b) in pos.iter().zip(chain.positions()) {
                assert_relative_eq!(a, b, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn rejected_moves_leave_energy_unchanged() {
        let kernel = KernelConfig::preset("poly_bounded", 0.9).build().unwrap();
        let grid = PathGrid::new(20, 0.1, 3);
        let cfg = GibbsConfig {
            kernel,
            grid,
            mcmc: McmcParams {
                block_len: 5,
                proposals_per_sweep: 1,
                sweeps: 10,
                burn_in: 1,
                thinning: 1,
            },
            seed: 5,
        };
        let mut chain = GibbsChain::new(&cfg, StartMode::Prior).unwrap();
        for _ in 0..30 {
            let h0 = chain.current_hamiltonian().unwrap();
            let acc_before = chain.accepted;
            chain.propose();
            let h1 = chain.current_hamiltonian().unwrap();
            if chain.accepted == acc_before {
                assert_relative_eq!(h0, h1, epsilon = 1e-12);
            }
            assert!(h1.is_finite());
        }
    }

    #[test]
    fn beta_zero_endpoint_variance_is_one() {
        let cfg = GibbsConfig {
            kernel: lorentz_kernel_1d(0.0, 0.5),
            grid: PathGrid::new(64, 0.25, 1),
            mcmc: McmcParams {
                block_len: 16,
                proposals_per_sweep: 8,
                sweeps: 4100,
                burn_in: 100,
                thinning: 2,
            },
            seed: 31,
        };
        let stats = estimate_endpoint(&cfg, StartMode::Zero).unwrap();
        let (v, se) = stats.pooled_variance();
        assert!((v - 1.0).abs() < 3.0 * se, "variance {v} +- {se}");
        assert!(stats.ks_pass);
        assert!(!stats.flagged);
    }

    #[test]
    fn attractive_interaction_contracts_variance() {
        // Small version of the strict CLT bound: beta > 0, bounded attractive
        // kernel, variance below 1 by 3 SE.
        let cfg = GibbsConfig {
            kernel: KernelConfig::preset("mollifier_product", 1.0).build().unwrap(),
            grid: PathGrid::new(128, 0.125, 3),
            mcmc: McmcParams {
                block_len: 8,
                proposals_per_sweep: 16,
                sweeps: 3300,
                burn_in: 300,
                thinning: 3,
            },
            seed: 11,
        };
        let stats = estimate_endpoint(&cfg, StartMode::Prior).unwrap();
        let (v, se) = stats.pooled_variance();
        assert!(v < 1.0 - 3.0 * se, "variance {v} +- {se} not below 1");
        assert!(v > 0.2, "variance {v} suspiciously small");
    }

    #[test]
    fn detailed_balance_flux_on_toy_chain() {
        // 2-step, d = 1, binned by increment signs: equilibrium flux between
        // any two bins must balance.
        let cfg = GibbsConfig {
            kernel: lorentz_kernel_1d(1.2, 0.75),
            grid: PathGrid::new(2, 0.5, 1),
            mcmc: McmcParams {
                block_len: 1,
                proposals_per_sweep: 2,
                sweeps: 1,
                burn_in: 0,
                thinning: 1,
            },
            seed: 3,
        };
        let mut chain = GibbsChain::new(&cfg, StartMode::Prior).unwrap();
        let state = |c: &GibbsChain| {
            ((c.increments[0] > 0.0) as usize) * 2 + ((c.increments[1] > 0.0) as usize)
        };
        let mut flux = [[0u64; 4]; 4];
        let mut prev = state(&chain);
        for _ in 0..200_000 {
            chain.sweep();
            let cur = state(&chain);
            flux[prev][cur] += 1;
            prev = cur;
        }
        for a in 0..4 {
            for b in (a + 1)..4 {
                let ab = flux[a][b] as f64;
                let ba = flux[b][a] as f64;
                assert!(
                    (ab - ba).abs() <= 3.0 * (ab + ba).sqrt(),
                    "flux imbalance {a}->{b}: {ab} vs {ba}"
                );
            }
        }
    }

    #[test]
    fn log_partition_toy_oracle_and_monotonicity() {
        // 2-step toy: thermodynamic integration against direct Gauss-Hermite
        // quadrature of E[e^{beta H}].
        let grid = PathGrid::new(2, 0.5, 1);
        let kernel = lorentz_kernel_1d(1.0, 0.75);
        let mcmc = McmcParams {
            block_len: 1,
            proposals_per_sweep: 4,
            sweeps: 21_000,
            burn_in: 1000,
            thinning: 2,
        };
        let cfg = GibbsConfig { kernel: kernel.clone(), grid, mcmc, seed: 15 };
        let betas: Vec<f64> = (0..=8).map(|i| i as f64 / 8.0).collect();
        let curve = log_partition(&cfg, &betas).unwrap();
        assert_eq!(curve.log_z[0], 0.0);
        for i in 1..curve.log_z.len() {
            assert!(curve.log_z[i] >= curve.log_z[i - 1] - 3.0 * curve.se[i]);
        }
        // Gauss-Hermite oracle over the two increments ~ N(0, dt).
        let (nodes, weights) = gauss_hermite(60);
        let sd = grid.dt.sqrt();
        let mut z = 0.0;
        for (&x1, &w1) in nodes.iter().zip(&weights) {
            for (&x2, &w2) in nodes.iter().zip(&weights) {
                let incs =
                    vec![std::f64::consts::SQRT_2 * sd * x1, std::f64::consts::SQRT_2 * sd * x2];
                let path = DiscretePath::from_increments(grid, 0, incs);
                let h = hamiltonian(&path, &kernel).unwrap();
                z += w1 * w2 * h.exp();
            }
        }
        let oracle = (z / std::f64::consts::PI).ln();
        let ti = *curve.log_z.last().unwrap();
        assert!((ti - oracle).abs() / oracle.abs() < 0.01, "TI {ti} vs oracle {oracle}");
    }

    #[test]
    fn seed_determinism() {
        let cfg = GibbsConfig {
            kernel: lorentz_kernel_1d(0.7, 0.5),
            grid: PathGrid::new(32, 0.125, 1),
            mcmc: McmcParams {
                block_len: 8,
                proposals_per_sweep: 4,
                sweeps: 300,
                burn_in: 50,
                thinning: 2,
            },
            seed: 123,
        };
        let a = estimate_endpoint(&cfg, StartMode::Zero).unwrap();
        let b = estimate_endpoint(&cfg, StartMode::Zero).unwrap();
        assert_eq!(a.variance[0].to_bits(), b.variance[0].to_bits());
        assert_eq!(a.ks_stat.to_bits(), b.ks_stat.to_bits());
    }
}
