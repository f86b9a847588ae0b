//! Numerical verifiers for the supporting lemmas: each check evaluates both
//! sides of a lemma's final inequality at a stated tolerance and reports the
//! margin. Constants the statements leave implicit (the Coulomb-split `b`,
//! the sup/inf ratio cap, the modulus-lemma covering constant) are fitted
//! once on calibration sweeps and frozen here; the checks then assert
//! stability, not the unknown sharp constants.

use crate::error::Error;
use crate::interactions::{InteractionKernel, SpatialPotential};
use crate::par;
use crate::paths::{lambda_field, DiscretePath, PathGrid};
use crate::quad::trapezoid;
use crate::stats;
use crate::transfer::TransferEnsemble;
use crate::Result;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;
use std::collections::BTreeMap;
use std::sync::OnceLock;

/// Outcome of one lemma check: both sides of the final inequality, the
/// margin `rhs - lhs`, and a pass verdict (`lhs <= rhs`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LemmaReport {
    pub lemma: String,
    pub params: BTreeMap<String, f64>,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub pass: bool,
    pub seed: u64,
    pub notes: Vec<String>,
}

impl LemmaReport {
    fn new(lemma: &str, seed: u64) -> Self {
        Self {
            lemma: lemma.to_string(),
            params: BTreeMap::new(),
            lhs: f64::NAN,
            rhs: f64::NAN,
            margin: f64::NAN,
            pass: false,
            seed,
            notes: Vec::new(),
        }
    }

    fn finish(mut self, lhs: f64, rhs: f64) -> Self {
        self.lhs = lhs;
        self.rhs = rhs;
        self.margin = rhs - lhs;
        self.pass = lhs <= rhs;
        self
    }
}

/// `int_0^b f(t) dt` where `f(t) ~ C t^{-p}` near 0 with `p < 1`: graded by
/// the substitution `t = b v^{1/(1-p)}`.
pub fn graded_power_quadrature(b: f64, p: f64, n: usize, f: impl Fn(f64) -> f64) -> f64 {
    assert!(p < 1.0 && b > 0.0);
    let q = 1.0 / (1.0 - p);
    trapezoid(1e-14, 1.0, n, |v| {
        let t = b * v.powf(q);
        let jac = b * q * v.powf(q - 1.0);
        f(t) * jac
    })
}

// ---------------------------------------------------------------------------
// Khas'minskii
// ---------------------------------------------------------------------------

/// One-dimensional Gaussian density `p_s(y)`.
fn gauss_density(s: f64, y: f64) -> f64 {
    (2.0 * std::f64::consts::PI * s).sqrt().recip() * (-y * y / (2.0 * s)).exp()
}

/// `E|Z_3|^{-3/2}`: the radial transition-density integral at unit time,
/// computed once with the `u = w^2` substitution that removes the sqrt
/// singularity of the integrand's derivatives.
fn coulomb32_unit_mean() -> f64 {
    static A: OnceLock<f64> = OnceLock::new();
    *A.get_or_init(|| {
        let pref = 4.0 * std::f64::consts::PI * (2.0 * std::f64::consts::PI).powf(-1.5);
        pref * 2.0 * trapezoid(0.0, 4.5, 4000, |w| w * w * (-w.powi(4) / 2.0).exp())
    })
}

/// `E_x[|W_sigma|^{-3/2}]` in d = 3 via the radial heat-kernel reduction.
fn coulomb32_mean_at(sigma: f64, x_norm: f64) -> f64 {
    if x_norm < 1e-12 {
        return sigma.powf(-0.75) * coulomb32_unit_mean();
    }
    let pref = (2.0 * std::f64::consts::PI * sigma).sqrt().recip() / x_norm;
    let upper = x_norm + 8.0 * sigma.sqrt() + 1.0;
    graded_power_quadrature(upper, 0.5, 2000, |r| {
        pref * r.powf(-0.5)
            * ((-(r - x_norm) * (r - x_norm) / (2.0 * sigma)).exp()
                - (-(r + x_norm) * (r + x_norm) / (2.0 * sigma)).exp())
    })
}

/// Exponential-moment check for the scaled Coulomb-split remainder
/// `V(y) = c |y|^{-3/2}` in d = 3.
///
/// `gamma = sup_x E_x[int_0^1 V(W_s) ds]` is computed by the
/// transition-density double integral (the supremum sits at x = 0, which is
/// also verified on a grid of starting points), cross-checked against the
/// closed form `4 c E|Z|^{-3/2}`; the inner time integral `int_0^1
/// sigma^{-3/4} d sigma = 4` is the scaling factor. If `gamma < 1`, a Monte
/// Carlo estimate of `E_0[e^{int V}]` is checked against `1/(1-gamma)`.
///
/// The classical lemma bounds the exponential moment by `1/(1-gamma)`; that
/// form is used here (a `gamma/(1-gamma)` variant would sit below 1 for
/// gamma < 1/2, which no exponential moment of a nonnegative integrand can).
pub fn khasminskii_check(c: f64, n_paths: usize, seed: u64) -> Result<LemmaReport> {
    let mut report = LemmaReport::new("khasminskii", seed);
    report.params.insert("c".into(), c);
    report.params.insert("n_paths".into(), n_paths as f64);
    // Outer sigma integral graded as sigma = v^4 (the sigma^{-3/4} scaling).
    let gamma_quad = c * 4.0
        * trapezoid(1e-9, 1.0, 800, |v| {
            let sigma = v.powi(4);
            coulomb32_mean_at(sigma, 0.0) * sigma.powf(0.75)
        });
    let a_closed = 2.0_f64.powf(-0.75) * gamma(0.75) / gamma(1.5);
    let gamma_closed = 4.0 * c * a_closed;
    report.params.insert("gamma".into(), gamma_quad);
    report.params.insert("gamma_closed_form".into(), gamma_closed);
    if (gamma_quad - gamma_closed).abs() > 1e-6 * gamma_closed {
        report.notes.push(format!(
            "quadrature gamma {gamma_quad} disagrees with the closed form {gamma_closed}"
        ));
        return Ok(report.finish(f64::INFINITY, 0.0));
    }
    // The supremum over starting points sits at x = 0.
    for x in [0.25, 0.5, 1.0, 2.0] {
        let g_x = c * 4.0
            * trapezoid(1e-9, 1.0, 400, |v| {
                let sigma = v.powi(4);
                coulomb32_mean_at(sigma, x) * sigma.powf(0.75)
            });
        if g_x > gamma_quad * (1.0 + 1e-9) {
            report.notes.push(format!("expectation at |x| = {x} exceeds the x = 0 value"));
            return Ok(report.finish(f64::INFINITY, 0.0));
        }
    }
    if gamma_quad >= 1.0 {
        report.notes.push("gamma >= 1: the lemma's hypothesis fails at this scaling".into());
        report.lhs = gamma_quad;
        report.rhs = 1.0;
        report.margin = 1.0 - gamma_quad;
        report.pass = true; // not a violation; the bound is simply inapplicable
        return Ok(report);
    }
    // Monte Carlo of the exponential moment on a geometric time grid
    // (the integrand blows up like s^{-3/4} near 0).
    let m = 400;
    let s_min = 1e-12_f64;
    let times: Vec<f64> = (0..=m).map(|k| s_min.powf(1.0 - k as f64 / m as f64)).collect();
    let vals = par::map_indexed(n_paths, |p| {
        let mut rng = ChaCha8Rng::seed_from_u64(crate::replica_seed(seed, p as u64));
        let mut w = [0.0_f64; 3];
        let mut prev_t = 0.0;
        let mut prev_f = 0.0;
        let mut integral = 0.0;
        for (k, &t) in times.iter().enumerate() {
            let sd = (t - prev_t).sqrt();
            for wc in &mut w {
                *wc += sd * rng.sample::<f64, _>(StandardNormal);
            }
            let r = (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt();
            let f = c * r.powf(-1.5);
            if k > 0 {
                integral += 0.5 * (t - prev_t) * (f + prev_f);
            }
            prev_t = t;
            prev_f = f;
        }
        integral.exp()
    });
    let (mc_mean, mc_se) = stats::mean_se(&vals);
    let bound = 1.0 / (1.0 - gamma_quad);
    report.params.insert("mc_mean".into(), mc_mean);
    report.params.insert("mc_se".into(), mc_se);
    report.notes.push(format!(
        "stated-form value gamma/(1-gamma) = {:.6}; check uses 1/(1-gamma)",
        gamma_quad / (1.0 - gamma_quad)
    ));
    Ok(report.finish(mc_mean - 3.0 * mc_se, bound))
}

// ---------------------------------------------------------------------------
// GRR modulus bound
// ---------------------------------------------------------------------------

/// Frozen covering constant for the d = 3 modulus bound, a conservative
/// `(vol B_1)^2 / 4^{d+1}`; smaller values only enlarge the bound.
pub fn grr_gamma_3d() -> f64 {
    let v = 4.0 * std::f64::consts::PI / 3.0;
    v * v / 256.0
}

fn grr_bound_value(alpha: f64, rho_exp: f64, a: f64, d: usize, m_value: f64, dist: f64) -> f64 {
    let gamma_d = grr_gamma_3d();
    let psi_inv = |y: f64| -> f64 { ((1.0 + y).ln() / alpha).powf(1.0 / rho_exp) };
    let w_hi = (2.0 * dist).powf(a);
    // dq(u) with q(u) = u^a, substituted w = u^a and cubically graded at 0.
    8.0 * trapezoid(1e-12, 1.0, 800, |vv| {
        let w = w_hi * vv * vv * vv;
        let jac = 3.0 * w_hi * vv * vv;
        let u = w.powf(1.0 / a);
        psi_inv(m_value / (gamma_d * u.powf(2.0 * d as f64))) * jac
    })
}

fn ball_pairs(
    d: usize,
    region_radius: f64,
    delta: f64,
    n_pairs: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<(Vec<f64>, Vec<f64>, f64)> {
    let sample_point = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        loop {
            let x: Vec<f64> =
                (0..d).map(|_| region_radius * (2.0 * rng.gen::<f64>() - 1.0)).collect();
            if x.iter().map(|v| v * v).sum::<f64>() <= region_radius * region_radius {
                return x;
            }
        }
    };
    let mut pairs = Vec::with_capacity(n_pairs);
    while pairs.len() < n_pairs {
        let x1 = sample_point(rng);
        let x2 = sample_point(rng);
        let dist: f64 = x1.iter().zip(&x2).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
        if dist > 1e-6 && dist <= delta {
            pairs.push((x1, x2, dist));
        }
    }
    pairs
}

/// Modulus-of-continuity domination for occupation fields of a singular
/// potential: computes the integrated increment functional `M` by Monte
/// Carlo pairs (halving `alpha` until it is finite, recording the final
/// value), then asserts the implied modulus bound dominates the observed
/// `|Lambda(x1) - Lambda(x2)|` at every sampled pair.
#[allow(clippy::too_many_arguments)]
pub fn grr_bound_check(
    paths: &[DiscretePath],
    v: &SpatialPotential,
    region_radius: f64,
    delta: f64,
    epsilon: f64,
    alpha0: f64,
    n_pairs: usize,
    seed: u64,
) -> Result<LemmaReport> {
    let mut report = LemmaReport::new("grr_bound", seed);
    let d = paths[0].grid.d;
    let a = 1.0 - 2.0 * epsilon;
    let rho_exp = 1.0 / (1.0 - epsilon);
    report.params.insert("epsilon".into(), epsilon);
    report.params.insert("a".into(), a);
    report.params.insert("rho".into(), rho_exp);
    report.params.insert("delta".into(), delta);
    report.params.insert("n_paths".into(), paths.len() as f64);
    report.params.insert("gamma_d".into(), grr_gamma_3d());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs = ball_pairs(d, region_radius, delta, n_pairs, &mut rng);
    let ball_vol = 4.0 * std::f64::consts::PI / 3.0 * region_radius.powi(3);
    let mut total_checked = 0usize;
    let mut violations = 0usize;
    let mut worst_ratio = 0.0_f64;
    let mut final_alpha = alpha0;
    for path in paths {
        let lambdas: Vec<(f64, f64)> = pairs
            .iter()
            .map(|(x1, x2, _)| Ok((lambda_field(path, v, x1)?, lambda_field(path, v, x2)?)))
            .collect::<Result<Vec<_>>>()?;
        let mut alpha = alpha0;
        let m_value = loop {
            let mut acc = 0.0;
            let mut finite = true;
            for ((_, _, dist), (l1, l2)) in pairs.iter().zip(&lambdas) {
                let term = (alpha * ((l1 - l2).abs() / dist.powf(a)).powf(rho_exp)).exp() - 1.0;
                if !term.is_finite() {
                    finite = false;
                    break;
                }
                acc += term;
            }
            let m = ball_vol * ball_vol * acc / n_pairs as f64;
            if finite && m.is_finite() {
                break m;
            }
            alpha *= 0.5;
            if alpha < 1e-8 {
                return Err(Error::NonConvergence("GRR alpha halving"));
            }
        };
        final_alpha = alpha;
        for ((_, _, dist), (l1, l2)) in pairs.iter().zip(&lambdas) {
            let modulus = (l1 - l2).abs();
            let bound = grr_bound_value(alpha, rho_exp, a, d, m_value, *dist);
            total_checked += 1;
            if modulus > bound {
                violations += 1;
            }
            if bound > 0.0 {
                worst_ratio = worst_ratio.max(modulus / bound);
            }
        }
    }
    report.params.insert("alpha".into(), final_alpha);
    report.params.insert("pairs_checked".into(), total_checked as f64);
    report.params.insert("violations".into(), violations as f64);
    report.notes.push(format!("worst modulus/bound ratio {worst_ratio:.4}"));
    Ok(report.finish(violations as f64, 0.5))
}

/// GRR domination for a synthetic closed-form field on the unit ball, the
/// calibration case with a known modulus.
pub fn grr_synthetic_check(
    f: impl Fn(&[f64]) -> f64,
    epsilon: f64,
    alpha: f64,
    n_pairs: usize,
    seed: u64,
) -> LemmaReport {
    let mut report = LemmaReport::new("grr_synthetic", seed);
    let a = 1.0 - 2.0 * epsilon;
    let rho_exp = 1.0 / (1.0 - epsilon);
    let d = 3usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs = ball_pairs(d, 1.0, 0.5, n_pairs, &mut rng);
    let ball_vol = 4.0 * std::f64::consts::PI / 3.0;
    let mut acc = 0.0;
    for (x1, x2, dist) in &pairs {
        acc += (alpha * ((f(x1) - f(x2)).abs() / dist.powf(a)).powf(rho_exp)).exp() - 1.0;
    }
    let m_value = ball_vol * ball_vol * acc / pairs.len() as f64;
    let mut violations = 0usize;
    for (x1, x2, dist) in &pairs {
        let modulus = (f(x1) - f(x2)).abs();
        if modulus > grr_bound_value(alpha, rho_exp, a, d, m_value, *dist) {
            violations += 1;
        }
    }
    report.params.insert("m".into(), m_value);
    report.params.insert("pairs_checked".into(), pairs.len() as f64);
    report.finish(violations as f64, 0.5)
}

// ---------------------------------------------------------------------------
// Delta-interaction moments
// ---------------------------------------------------------------------------

/// Exact (kappa -> 0) second moment of the local-time difference,
/// `E[(L_1(x1) - L_1(x2))^2]`, by nested transition-density quadrature.
pub fn delta_second_moment_oracle(x1: f64, x2: f64) -> f64 {
    // E[L(a) L(b)] = int_0^1 ds [p_s(a) F(s, b-a) + p_s(b) F(s, a-b)],
    // F(s, c) = int_0^{1-s} p_tau(c) d tau
    //         = sqrt(2/pi) int_0^{sqrt(1-s)} e^{-c^2 / 2u^2} du.
    let f = |s: f64, cdiff: f64| -> f64 {
        let upper = (1.0 - s).max(0.0).sqrt();
        if upper == 0.0 {
            return 0.0;
        }
        (2.0 / std::f64::consts::PI).sqrt()
            * trapezoid(0.0, upper, 600, |u| {
                if u < 1e-12 {
                    if cdiff.abs() < 1e-12 {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    (-cdiff * cdiff / (2.0 * u * u)).exp()
                }
            })
    };
    // s = v^2 substitution: 2 v p_{v^2}(x) stays bounded even at x = 0.
    let graded_density = |v: f64, x: f64| -> f64 {
        if v < 1e-12 {
            if x.abs() < 1e-12 {
                2.0 / (2.0 * std::f64::consts::PI).sqrt()
            } else {
                0.0
            }
        } else {
            2.0 * v * gauss_density(v * v, x)
        }
    };
    let cross = |xa: f64, xb: f64| -> f64 {
        trapezoid(0.0, 1.0, 1200, |v| {
            let s = v * v;
            graded_density(v, xa) * f(s, xb - xa) + graded_density(v, xb) * f(s, xa - xb)
        })
    };
    cross(x1, x1) + cross(x2, x2) - 2.0 * cross(x1, x2)
}

/// Moment check for the mollified delta difference: MC estimate of
/// `E|int_0^1 (delta_k(W - x1) - delta_k(W - x2)) ds|^{2n}` against the
/// kappa -> 0 quadrature oracle (n = 1).
pub fn delta_moment_check(
    x1: f64,
    x2: f64,
    kappa: f64,
    n: usize,
    n_paths: usize,
    dt: f64,
    seed: u64,
) -> Result<LemmaReport> {
    if !(n == 1 || n == 2) {
        return Err(Error::Config("delta_moment_check supports n in {1, 2}".into()));
    }
    let mut report = LemmaReport::new("delta_moment", seed);
    let h = 0.5 * (x1 - x2).abs();
    report.params.insert("x1".into(), x1);
    report.params.insert("x2".into(), x2);
    report.params.insert("h".into(), h);
    report.params.insert("kappa".into(), kappa);
    report.params.insert("n".into(), n as f64);
    if h == 0.0 {
        report.notes.push("x1 = x2: the moment vanishes identically".into());
        return Ok(report.finish(0.0, 0.0));
    }
    if kappa > 0.5 * h {
        report.notes.push("kappa not small relative to h; estimate flagged".into());
    }
    let grid = PathGrid::from_horizon(1.0, dt, 1)?;
    let vals = par::map_indexed(n_paths, |p| {
        let path = DiscretePath::sample(grid, crate::replica_seed(seed, p as u64));
        let l1 = crate::paths::local_time(&path, x1, kappa).unwrap();
        let l2 = crate::paths::local_time(&path, x2, kappa).unwrap();
        (l1 - l2).abs().powi(2 * n as i32)
    });
    let (mc, se) = stats::mean_se(&vals);
    report.params.insert("mc".into(), mc);
    report.params.insert("mc_se".into(), se);
    if n == 1 {
        let oracle = delta_second_moment_oracle(x1, x2);
        report.params.insert("oracle".into(), oracle);
        // 3 SE plus a small mollification/discretization allowance.
        let tol = 3.0 * se + 0.06 * oracle * (kappa / h).min(1.0) + 0.03 * oracle * dt.sqrt();
        return Ok(report.finish((mc - oracle).abs(), tol));
    }
    // n = 2: finiteness and positivity are the checkable content here; the
    // h-scaling fit lives in delta_scaling_fit.
    Ok(report.finish(0.0, mc))
}

/// Fits the `h`-scaling exponent of the kappa -> 0 second-moment oracle over
/// pairs `(x0 - h, x0 + h)` and checks `slope >= 2a - 0.1`, `a = 1 - 2e`.
pub fn delta_scaling_fit(epsilon: f64, x0: f64, hs: &[f64]) -> LemmaReport {
    let mut report = LemmaReport::new("delta_scaling", 0);
    let a = 1.0 - 2.0 * epsilon;
    report.params.insert("epsilon".into(), epsilon);
    report.params.insert("a".into(), a);
    report.params.insert("x0".into(), x0);
    let xs: Vec<f64> = hs.iter().map(|h| (2.0 * h).ln()).collect();
    let ys: Vec<f64> =
        hs.iter().map(|h| delta_second_moment_oracle(x0 - h, x0 + h).ln()).collect();
    let fit = crate::linfit::linear_fit(&xs, &ys);
    report.params.insert("slope".into(), fit.slope);
    report.finish(2.0 * a - 0.1, fit.slope)
}

// ---------------------------------------------------------------------------
// Simplex identity
// ---------------------------------------------------------------------------

/// Ordered-simplex integral of `prod (s_{2j+2} - s_{2j})^{-a}` against the
/// Gamma-function formula `Gamma(1-a)^n / Gamma(1 + n(1-a))`, by brute-force
/// nested graded quadrature (n = 1 or 2), plus the Beta-type link integral.
pub fn simplex_identity_check(a: f64, n: usize) -> Result<LemmaReport> {
    if !(0.0 < a && a < 0.5) {
        return Err(Error::Config("simplex identity needs a in (0, 1/2)".into()));
    }
    if !(n == 1 || n == 2) {
        return Err(Error::Config("simplex identity implemented for n in {1, 2}".into()));
    }
    let mut report = LemmaReport::new("simplex_identity", 0);
    report.params.insert("a".into(), a);
    report.params.insert("n".into(), n as f64);
    let formula = gamma(1.0 - a).powi(n as i32) / gamma(1.0 + n as f64 * (1.0 - a));
    let quad = match n {
        1 => graded_power_quadrature(1.0, a, 4000, |s| s.powf(-a)),
        _ => {
            // int_0^1 x^{-a} [ int_0^{1-x} y^{-a} dy ] dx, nested graded rules.
            graded_power_quadrature(1.0, a, 1200, |x| {
                let rest = 1.0 - x;
                let inner = if rest <= 1e-14 {
                    0.0
                } else {
                    graded_power_quadrature(rest, a, 600, |y| y.powf(-a))
                };
                x.powf(-a) * inner
            })
        }
    };
    report.params.insert("formula".into(), formula);
    report.params.insert("quadrature".into(), quad);
    // Beta-type link integral:
    // int_0^1 [l^{-a} + (1-l)^{-a}] l^{-1/2} (1-l)^{-1/2} dl = 2 B(1/2-a, 1/2).
    // Substituting l = sin^2(theta) turns the half-power weights into 2 d
    // theta; by the l <-> 1-l symmetry both summands integrate equally.
    let beta_formula = 2.0 * gamma(0.5 - a) * gamma(0.5) / gamma(1.0 - a);
    let half = std::f64::consts::FRAC_PI_2;
    let beta_quad =
        4.0 * graded_power_quadrature(half, 2.0 * a, 3000, |th| th.sin().powf(-2.0 * a));
    report.params.insert("beta_formula".into(), beta_formula);
    report.params.insert("beta_quadrature".into(), beta_quad);
    if (beta_quad - beta_formula).abs() / beta_formula > 2e-4 {
        report.notes.push("beta-type link integral check failed".into());
        return Ok(report.finish(f64::INFINITY, 1e-4));
    }
    Ok(report.finish((quad - formula).abs() / formula, 1e-4))
}

// ---------------------------------------------------------------------------
// Sup/inf maximizer
// ---------------------------------------------------------------------------

/// Frozen cap for the sup/inf row-mass ratio (calibrated on the acceptance
/// kernels; the checks assert stability, not sharpness).
pub const SUPINF_RATIO_CAP: f64 = 8.0;

/// Row-mass maximizer check: `m(xi) = sum_j e^{k(xi, xi_j)} w_j` must be
/// maximized by the identically-zero block within Monte Carlo error, and the
/// sup/inf ratio of row masses stays below the frozen cap.
pub fn supinf_maximizer_check(
    kernel: &InteractionKernel,
    ensemble: &TransferEnsemble,
) -> Result<LemmaReport> {
    let mut report = LemmaReport::new("supinf_maximizer", ensemble.seed);
    let n = ensemble.len();
    report.params.insert("n_blocks".into(), n as f64);
    report.params.insert("beta".into(), kernel.beta());
    let m_inner = ensemble.blocks[0].n_inner();
    let zero =
        crate::transfer::BlockIncrement::zero(m_inner, ensemble.blocks[0].dt, ensemble.d());
    let row_mass = |left: &crate::transfer::BlockIncrement| -> Result<(f64, f64)> {
        let mut mean = 0.0;
        let mut raw = Vec::with_capacity(n);
        for (b, w) in ensemble.blocks.iter().zip(&ensemble.weights) {
            let kv = crate::transfer::coupling_k(left, b, kernel)?.exp();
            mean += w * kv;
            raw.push(kv);
        }
        let var: f64 = raw
            .iter()
            .zip(&ensemble.weights)
            .map(|(kv, w)| w * w * (kv - mean) * (kv - mean))
            .sum();
        Ok((mean, var.sqrt()))
    };
    let (m0, se0) = row_mass(&zero)?;
    report.params.insert("m_zero".into(), m0);
    let masses: Vec<(f64, f64)> = par::map_indexed(n, |i| row_mass(&ensemble.blocks[i]))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let mut worst_excess = f64::NEG_INFINITY;
    let mut sup = m0;
    let mut inf = m0;
    for (mi, sei) in &masses {
        worst_excess = worst_excess.max(mi - 3.0 * (se0 + sei) - m0);
        sup = sup.max(*mi);
        inf = inf.min(*mi);
    }
    let ratio = sup / inf;
    report.params.insert("ratio".into(), ratio);
    report.params.insert("ratio_cap".into(), SUPINF_RATIO_CAP);
    if ratio > SUPINF_RATIO_CAP {
        report.notes.push(format!("sup/inf ratio {ratio} above the frozen cap"));
        return Ok(report.finish(ratio, SUPINF_RATIO_CAP));
    }
    // Maximizer at zero: no sampled block may exceed m(0) beyond 3 SE.
    Ok(report.finish(worst_excess, 0.0))
}

// ---------------------------------------------------------------------------
// Pinsker
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PinskerReport {
    pub tv: f64,
    pub kl: f64,
    pub bound: f64,
    pub pass: bool,
    pub bins: usize,
}

/// Binned total variation and relative entropy between two sample sets, and
/// the Pinsker verdict `TV <= sqrt(KL / 2) + tolerance`. Empty bins of the
/// reference get the documented `1e-9` smoothing mass.
pub fn pinsker_tv(
    sample_a: &[f64],
    sample_b: &[f64],
    lo: f64,
    hi: f64,
    bins: usize,
) -> PinskerReport {
    let pa = stats::histogram(sample_a, lo, hi, bins);
    let pb = stats::histogram(sample_b, lo, hi, bins);
    let tv = stats::binned_tv(&pa, &pb);
    let kl = stats::binned_kl(&pa, &pb, 1e-9);
    let bound = (kl.max(0.0) / 2.0).sqrt() + 1e-6;
    PinskerReport { tv, kl, bound, pass: tv <= bound, bins }
}
