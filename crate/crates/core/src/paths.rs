//! Time-discretized Brownian paths and Hamiltonian quadrature.
//!
//! Paths are stored as increments, anchored at the origin: the whole theory
//! lives on increments and translation invariance of every Hamiltonian
//! becomes structural. The double time integral of `H(t-s, W_t - W_s)` is a
//! trapezoid rule over grid nodes; coincident-time diagonal nodes evaluate
//! `H(0, 0)` when finite and otherwise the one-refinement cell average (see
//! [`InteractionKernel::diagonal_value`]).

use crate::error::Error;
use crate::interactions::{InteractionKernel, SpatialPotential};
use crate::par;
use crate::quad::trapezoid_weight;
use crate::Result;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::io::{BufRead, Write};

/// Uniform time grid: `n_steps` steps of size `dt`, horizon `T = n_steps dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathGrid {
    pub n_steps: usize,
    pub dt: f64,
    pub d: usize,
}

impl PathGrid {
    pub fn new(n_steps: usize, dt: f64, d: usize) -> Self {
        assert!(n_steps > 0 && dt > 0.0 && d > 0);
        Self { n_steps, dt, d }
    }

    /// Grid for horizon `T`, which must be an integer multiple of `dt`.
    pub fn from_horizon(horizon: f64, dt: f64, d: usize) -> Result<Self> {
        let steps = horizon / dt;
        let n = steps.round() as usize;
        if n == 0 || (steps - n as f64).abs() > 1e-9 {
            return Err(Error::GridMismatch(format!(
                "horizon {horizon} is not an integer multiple of dt = {dt}"
            )));
        }
        Ok(Self::new(n, dt, d))
    }

    pub fn horizon(&self) -> f64 {
        self.n_steps as f64 * self.dt
    }
}

/// A discrete path: `n_steps` increment vectors in `R^d`, anchored at 0.
#[derive(Debug, Clone)]
pub struct DiscretePath {
    pub grid: PathGrid,
    pub seed: u64,
    increments: Vec<f64>,
}

impl DiscretePath {
    pub fn from_increments(grid: PathGrid, seed: u64, increments: Vec<f64>) -> Self {
        assert_eq!(increments.len(), grid.n_steps * grid.d);
        Self { grid, seed, increments }
    }

    /// Samples Wiener increments: i.i.d. centered Gaussians with
    /// per-coordinate variance `dt`, a deterministic function of `seed`.
    pub fn sample(grid: PathGrid, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sd = grid.dt.sqrt();
        let increments = (0..grid.n_steps * grid.d)
            .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
            .collect();
        Self { grid, seed, increments }
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    /// Positions at the `n_steps + 1` grid nodes (cumulative sums), flat
    /// row-major `(n+1) x d`.
    pub fn positions(&self) -> Vec<f64> {
        let d = self.grid.d;
        let mut pos = vec![0.0; (self.grid.n_steps + 1) * d];
        for k in 0..self.grid.n_steps {
            for c in 0..d {
                pos[(k + 1) * d + c] = pos[k * d + c] + self.increments[k * d + c];
            }
        }
        pos
    }

    /// Endpoint displacement `W(T) - W(0)`.
    pub fn endpoint(&self) -> Vec<f64> {
        let d = self.grid.d;
        let mut e = vec![0.0; d];
        for k in 0..self.grid.n_steps {
            for c in 0..d {
                e[c] += self.increments[k * d + c];
            }
        }
        e
    }

    /// Time reversal: increments reversed and negated. Leaves every
    /// Hamiltonian invariant.
    pub fn time_reversed(&self) -> Self {
        let d = self.grid.d;
        let n = self.grid.n_steps;
        let mut inc = vec![0.0; n * d];
        for k in 0..n {
            for c in 0..d {
                inc[k * d + c] = -self.increments[(n - 1 - k) * d + c];
            }
        }
        Self { grid: self.grid, seed: self.seed, increments: inc }
    }

    /// The diffusively rescaled path `t -> eps W(t / eps^2)` on the grid with
    /// step `eps^2 dt`: increments scale by `eps`, node times by `eps^2`, so
    /// rescaled node `k` carries exactly `eps W(k dt)`.
    pub fn diffusive_rescale(&self, eps: f64) -> Result<Self> {
        if eps <= 0.0 {
            return Err(Error::GridMismatch(format!("rescale factor must be positive, got {eps}")));
        }
        let grid = PathGrid::new(self.grid.n_steps, eps * eps * self.grid.dt, self.grid.d);
        let increments = self.increments.iter().map(|v| eps * v).collect();
        Ok(Self { grid, seed: self.seed, increments })
    }

    /// Grid-coupled refinement: keeps this path's increments and inserts
    /// conditionally sampled midpoints (Levy construction), halving `dt`.
    /// Deterministic given `refine_seed`.
    pub fn refine_half(&self, refine_seed: u64) -> Self {
        let d = self.grid.d;
        let n = self.grid.n_steps;
        let mut rng = ChaCha8Rng::seed_from_u64(refine_seed);
        let sd = (self.grid.dt / 4.0).sqrt();
        let mut inc = vec![0.0; 2 * n * d];
        for k in 0..n {
            for c in 0..d {
                let half = 0.5 * self.increments[k * d + c];
                let bridge = sd * rng.sample::<f64, _>(StandardNormal);
                inc[2 * k * d + c] = half + bridge;
                inc[(2 * k + 1) * d + c] = half - bridge;
            }
        }
        Self {
            grid: PathGrid::new(2 * n, 0.5 * self.grid.dt, d),
            seed: self.seed,
            increments: inc,
        }
    }

    /// Writes the documented CSV layout: a header row `T,dt,d,seed`, its
    /// value row, then one row of `d` increment columns per step at full
    /// precision, so runs can be replayed and audited.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "T,dt,d,seed")?;
        writeln!(w, "{:.17e},{:.17e},{},{}", self.grid.horizon(), self.grid.dt, self.grid.d, self.seed)?;
        for k in 0..self.grid.n_steps {
            let row: Vec<String> = (0..self.grid.d)
                .map(|c| format!("{:.17e}", self.increments[k * self.grid.d + c]))
                .collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| Error::Config("empty path file".into()))??;
        if header.trim() != "T,dt,d,seed" {
            return Err(Error::Config(format!("unexpected path header `{header}`")));
        }
        let meta = lines.next().ok_or_else(|| Error::Config("missing path metadata".into()))??;
        let fields: Vec<&str> = meta.trim().split(',').collect();
        if fields.len() != 4 {
            return Err(Error::Config("path metadata needs 4 fields".into()));
        }
        let horizon: f64 = fields[0].parse().map_err(|e| Error::Config(format!("bad T: {e}")))?;
        let dt: f64 = fields[1].parse().map_err(|e| Error::Config(format!("bad dt: {e}")))?;
        let d: usize = fields[2].parse().map_err(|e| Error::Config(format!("bad d: {e}")))?;
        let seed: u64 = fields[3].parse().map_err(|e| Error::Config(format!("bad seed: {e}")))?;
        let grid = PathGrid::from_horizon(horizon, dt, d)?;
        let mut increments = Vec::with_capacity(grid.n_steps * d);
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            for f in line.trim().split(',') {
                increments
                    .push(f.parse().map_err(|e| Error::Config(format!("bad increment: {e}")))?);
            }
        }
        if increments.len() != grid.n_steps * d {
            return Err(Error::Config(format!(
                "expected {} increments, got {}",
                grid.n_steps * d,
                increments.len()
            )));
        }
        Ok(Self { grid, seed, increments })
    }
}

#[inline]
fn node_distance(pos: &[f64], i: usize, j: usize, d: usize) -> f64 {
    let mut s = 0.0;
    for c in 0..d {
        let diff = pos[i * d + c] - pos[j * d + c];
        s += diff * diff;
    }
    s.sqrt()
}

/// Norm of the increment adjacent to node `i` (the one after it, or before
/// it for the final node); feeds the diagonal refinement rule.
fn adjacent_increment_norm(path: &DiscretePath, i: usize) -> f64 {
    let d = self_dim(path);
    let n = path.grid.n_steps;
    let k = if i < n { i } else { n - 1 };
    let inc = &path.increments()[k * d..(k + 1) * d];
    inc.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn self_dim(path: &DiscretePath) -> usize {
    path.grid.d
}

/// Double trapezoid quadrature of `int_0^T int_0^T H(t-s, W_t - W_s) ds dt`
/// (the Hamiltonian without the beta coupling).
///
/// Kernels with compactly supported `rho` restrict the sum to the band
/// `|t - s| <= supp(rho)`. A non-finite result (possible only for
/// unregularized singular `V` at coincident positions) is reported as an
/// error, never clamped.
pub fn hamiltonian(path: &DiscretePath, kernel: &InteractionKernel) -> Result<f64> {
    if kernel.dim() != path.grid.d {
        return Err(Error::DimensionMismatch { expected: kernel.dim(), got: path.grid.d });
    }
    let n = path.grid.n_steps;
    let dt = path.grid.dt;
    let d = path.grid.d;
    let pos = path.positions();
    let m_range = kernel
        .rho_compact_support()
        .map(|r| ((r / dt) + 1e-9).floor() as usize)
        .unwrap_or(n)
        .min(n);
    let total = par::sum_indexed(n + 1, |i| {
        let wi = trapezoid_weight(i, n, dt);
        let mut acc = wi * wi * kernel.diagonal_value(dt, adjacent_increment_norm(path, i));
        let j_max = (i + m_range).min(n);
        for j in (i + 1)..=j_max {
            let tau = (j - i) as f64 * dt;
            let r = node_distance(&pos, i, j, d);
            acc += 2.0 * wi * trapezoid_weight(j, n, dt) * kernel.h_radial(tau, r);
        }
        acc
    });
    if !total.is_finite() {
        return Err(Error::NonFinite { context: "hamiltonian quadrature" });
    }
    Ok(total)
}

/// Occupation functional `Lambda(x) = int_0^1 V(W_s - x) ds` by single-time
/// trapezoid quadrature; requires a unit-horizon path.
pub fn lambda_field(path: &DiscretePath, v: &SpatialPotential, x: &[f64]) -> Result<f64> {
    if (path.grid.horizon() - 1.0).abs() > 1e-9 {
        return Err(Error::GridMismatch("lambda_field requires horizon T = 1".into()));
    }
    if v.dim() != path.grid.d || x.len() != path.grid.d {
        return Err(Error::DimensionMismatch { expected: v.dim(), got: x.len() });
    }
    let n = path.grid.n_steps;
    let d = path.grid.d;
    let pos = path.positions();
    let mut acc = 0.0;
    for i in 0..=n {
        let mut r2 = 0.0;
        for c in 0..d {
            let diff = pos[i * d + c] - x[c];
            r2 += diff * diff;
        }
        acc += trapezoid_weight(i, n, path.grid.dt) * v.eval_radial(r2.sqrt());
    }
    if !acc.is_finite() {
        return Err(Error::NonFinite { context: "lambda_field quadrature" });
    }
    Ok(acc)
}

/// Mollified local time `L_1(x)` of a one-dimensional unit-horizon path:
/// the occupation functional of a width-`kappa` delta approximation.
pub fn local_time(path: &DiscretePath, x: f64, kappa: f64) -> Result<f64> {
    if path.grid.d != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: path.grid.d });
    }
    if kappa <= 0.0 {
        return Err(Error::Config("local_time requires kappa > 0".into()));
    }
    lambda_field(path, &SpatialPotential::MollifiedDelta { kappa }, &[x])
}
