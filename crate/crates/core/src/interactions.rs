//! Pair interactions `H(t, x)`: time correlations, spatial potentials and
//! admissibility classes.
//!
//! An interaction kernel is either a product `rho(t) V(x)` or one of the two
//! named joint closed forms (massless field coupling, polaron). Spatial
//! potentials are rotationally symmetric, so the hot evaluation path is
//! radial. Singular potentials carry an explicit regularization parameter
//! (`eta` for Coulomb powers, `kappa` for the delta) so downstream estimators
//! can run refinement studies towards the singular limit.
//!
//! Admissibility is enforced at construction: the downstream theory only
//! holds in the stated classes, so a kernel that violates them is rejected
//! with the violated inequality before it can reach a sampler.

use crate::error::Error;
use crate::quad::trapezoid;
use crate::tabulated::Tabulated1d;
use crate::Result;
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

/// Smooth bump profile `e^{-1/(1-u^2)}` on (-1, 1), zero outside.
///
/// All derivatives vanish at the support boundary, so trapezoid quadrature of
/// anything built from it converges spectrally.
#[inline]
pub fn bump(u: f64) -> f64 {
    let u2 = u * u;
    if u2 >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - u2)).exp()
    }
}

/// `int_{-1}^{1} bump(u) du`.
pub fn bump_mass_1d() -> f64 {
    static M: OnceLock<f64> = OnceLock::new();
    *M.get_or_init(|| trapezoid(-1.0, 1.0, 4000, bump))
}

/// `int_{R^3} bump(|u|) du = 4 pi int_0^1 u^2 bump(u) du`.
pub fn bump_mass_3d() -> f64 {
    static M: OnceLock<f64> = OnceLock::new();
    *M.get_or_init(|| 4.0 * std::f64::consts::PI * trapezoid(0.0, 1.0, 4000, |u| u * u * bump(u)))
}

// ---------------------------------------------------------------------------
// Time correlations
// ---------------------------------------------------------------------------

/// Time correlation `rho(t)`: nonnegative, even in `t`.
#[derive(Debug, Clone)]
pub enum TimeCorrelation {
    /// `amplitude` on `[-half_width, half_width]`, zero outside.
    CompactBox { half_width: f64, amplitude: f64 },
    /// `amplitude (1+|t|)^{-theta}`.
    PolynomialDecay { theta: f64, amplitude: f64 },
    /// `amplitude e^{-omega0 |t|}`.
    Exponential { omega0: f64, amplitude: f64 },
    /// Tabulated self-convolution `psi * psi` on `[0, x_max]`, even in `t`;
    /// integrates over the line to `amplitude (int psi)^2`.
    SelfConvolved { table: Tabulated1d, amplitude: f64 },
}

impl TimeCorrelation {
    /// Evaluates `rho(|t|)`.
    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        let t = t.abs();
        match self {
            TimeCorrelation::CompactBox { half_width, amplitude } => {
                if t > *half_width {
                    0.0
                } else {
                    *amplitude
                }
            }
            TimeCorrelation::PolynomialDecay { theta, amplitude } => {
                amplitude * (1.0 + t).powf(-theta)
            }
            TimeCorrelation::Exponential { omega0, amplitude } => amplitude * (-omega0 * t).exp(),
            TimeCorrelation::SelfConvolved { table, amplitude } => amplitude * table.eval(t),
        }
    }

    /// Support radius when compact.
    pub fn compact_support(&self) -> Option<f64> {
        match self {
            TimeCorrelation::CompactBox { half_width, .. } => Some(*half_width),
            TimeCorrelation::SelfConvolved { table, .. } => Some(table.x_max()),
            _ => None,
        }
    }
}

// ---------------------------------------------------------------------------
// Spatial potentials
// ---------------------------------------------------------------------------

/// Closed forms with a finite supremum.
#[derive(Debug, Clone, Copy)]
pub enum BoundedForm {
    Constant { value: f64 },
    /// `1 / (1 + (r/scale)^2)`, supremum 1.
    Lorentzian { scale: f64 },
}

/// Spatial potential `V(x)`: nonnegative, rotationally symmetric.
#[derive(Debug, Clone)]
pub enum SpatialPotential {
    Bounded { form: BoundedForm, d: usize },
    /// `(r^2 + eta^2)^{-p/2}`; diverges only at the origin when `eta = 0`.
    CoulombPower { p: f64, eta: f64, d: usize },
    /// Normalized bump of width `kappa` (d = 1 only); integrates to 1 over R
    /// and vanishes for `|x| > kappa`.
    MollifiedDelta { kappa: f64 },
    /// Tabulated radial self-convolution `phi * phi`.
    SelfConvolved { table: Tabulated1d, d: usize },
}

impl SpatialPotential {
    pub fn dim(&self) -> usize {
        match self {
            SpatialPotential::Bounded { d, .. } => *d,
            SpatialPotential::CoulombPower { d, .. } => *d,
            SpatialPotential::MollifiedDelta { .. } => 1,
            SpatialPotential::SelfConvolved { d, .. } => *d,
        }
    }

    /// Evaluates `V` at radius `r = |x|`.
    #[inline]
    pub fn eval_radial(&self, r: f64) -> f64 {
        match self {
            SpatialPotential::Bounded { form, .. } => match form {
                BoundedForm::Constant { value } => *value,
                BoundedForm::Lorentzian { scale } => {
                    let u = r / scale;
                    1.0 / (1.0 + u * u)
                }
            },
            SpatialPotential::CoulombPower { p, eta, .. } => {
                let s2 = r * r + eta * eta;
                if s2 == 0.0 {
                    f64::INFINITY
                } else {
                    s2.powf(-0.5 * p)
                }
            }
            SpatialPotential::MollifiedDelta { kappa } => {
                bump(r / kappa) / (kappa * bump_mass_1d())
            }
            SpatialPotential::SelfConvolved { table, .. } => table.eval(r),
        }
    }

    /// Evaluates `V(x)`, checking the dimension of `x`.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        Ok(self.eval_radial(r))
    }

    /// Finite supremum, when one exists.
    pub fn sup(&self) -> Option<f64> {
        match self {
            SpatialPotential::Bounded { form, .. } => Some(match form {
                BoundedForm::Constant { value } => *value,
                BoundedForm::Lorentzian { .. } => 1.0,
            }),
            SpatialPotential::CoulombPower { p, eta, .. } => {
                if *eta > 0.0 {
                    Some(eta.powf(-p))
                } else {
                    None
                }
            }
            SpatialPotential::MollifiedDelta { kappa } => {
                Some(bump(0.0) / (kappa * bump_mass_1d()))
            }
            SpatialPotential::SelfConvolved { table, .. } => Some(table.max_value()),
        }
    }

    /// True when `V(0) = +inf` (unregularized Coulomb power).
    pub fn singular_at_origin(&self) -> bool {
        matches!(self, SpatialPotential::CoulombPower { eta, .. } if *eta == 0.0)
    }
}

// ---------------------------------------------------------------------------
// Coulomb split
// ---------------------------------------------------------------------------

/// Frozen constant `b` with `1/|x| - (|x|^2+eta^2)^{-1/2} <= b sqrt(eta) |x|^{-3/2}`.
///
/// The profile `r^{1/2} / (sqrt(1+r^2) (r + sqrt(1+r^2)))` peaks near
/// r = 0.40 at about 0.3976; fitted once on a calibration sweep and frozen.
pub const COULOMB_SPLIT_B: f64 = 0.40;

/// Splits `1/|x|` into a bounded part `(|x|^2 + eta^2)^{-1/2}` plus a
/// remainder controlled by [`COULOMB_SPLIT_B`]. Requires `d = 3`, `p = 1`.
pub fn coulomb_split(x: &[f64], eta: f64) -> Result<(f64, f64)> {
    let r2 = x.iter().map(|v| v * v).sum::<f64>();
    if r2 == 0.0 {
        return Err(Error::NonFinite { context: "coulomb_split at x = 0" });
    }
    let r = r2.sqrt();
    let regular = 1.0 / (r2 + eta * eta).sqrt();
    Ok((regular, 1.0 / r - regular))
}

// ---------------------------------------------------------------------------
// Kernels and admissibility
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AdmissibilityClass {
    /// `theta > 2` envelope in time, bounded `V`.
    LongRangeBounded,
    /// Compactly supported `rho`, `V = (r^2+eta^2)^{-p/2}`, `d >= 3`, `p < d/2`.
    CompactSingular,
    /// `d = 1` with a mollified delta potential and compact `rho`.
    Delta1D,
    /// Both factors are self-convolved mollifiers with compact support.
    MollifierProduct,
}

/// Functional form of the interaction, evaluable pointwise on any parameters;
/// admissibility is checked when an [`InteractionKernel`] is constructed.
#[derive(Debug, Clone)]
pub enum KernelForm {
    Product { rho: TimeCorrelation, v: SpatialPotential },
    /// `H(t, x) = 1 / (|x|^2 + (1+|t|)^theta)`; `theta = 2` is the massless
    /// field coupling, admissible only for `theta > 2`.
    MasslessNelson { theta: f64 },
    /// `H(t, x) = e^{-omega0 |t|} / (|x|^2 + eta^2)^{1/2}`; `eta = 0` is the
    /// polaron form, admissible only once regularized.
    Polaron { omega0: f64, eta: f64 },
}

impl KernelForm {
    /// Evaluates `H(t, x)` at time lag `t` and radius `r = |x|`.
    #[inline]
    pub fn eval(&self, t: f64, r: f64) -> f64 {
        match self {
            KernelForm::Product { rho, v } => {
                let rho_t = rho.eval(t);
                if rho_t == 0.0 {
                    0.0
                } else {
                    rho_t * v.eval_radial(r)
                }
            }
            KernelForm::MasslessNelson { theta } => 1.0 / (r * r + (1.0 + t.abs()).powf(*theta)),
            KernelForm::Polaron { omega0, eta } => {
                let s2 = r * r + eta * eta;
                if s2 == 0.0 {
                    f64::INFINITY
                } else {
                    (-omega0 * t.abs()).exp() / s2.sqrt()
                }
            }
        }
    }

    pub fn singular_at_origin(&self) -> bool {
        match self {
            KernelForm::Product { v, .. } => v.singular_at_origin(),
            KernelForm::MasslessNelson { .. } => false,
            KernelForm::Polaron { eta, .. } => *eta == 0.0,
        }
    }
}

/// Classifies a kernel form against the admissibility conditions; total on
/// the four kinds, rejecting with the violated inequality otherwise.
pub fn validate_admissibility(form: &KernelForm, d: usize) -> Result<AdmissibilityClass> {
    let long_range_ok = |rho: &TimeCorrelation| -> Result<()> {
        match rho {
            TimeCorrelation::PolynomialDecay { theta, .. } => {
                if *theta > 2.0 {
                    Ok(())
                } else {
                    Err(Error::RejectedParameters(format!(
                        "polynomial time decay requires theta > 2, got theta = {theta}"
                    )))
                }
            }
            TimeCorrelation::Exponential { omega0, .. } => {
                if *omega0 > 0.0 {
                    Ok(())
                } else {
                    Err(Error::RejectedParameters(format!(
                        "exponential time decay requires omega0 > 0, got omega0 = {omega0}"
                    )))
                }
            }
            // Compact support dominates any (1+|t|)^{-theta} envelope.
            TimeCorrelation::CompactBox { .. } | TimeCorrelation::SelfConvolved { .. } => Ok(()),
        }
    };
    match form {
        KernelForm::Product { rho, v } => {
            if v.dim() != d {
                return Err(Error::DimensionMismatch { expected: v.dim(), got: d });
            }
            match v {
                SpatialPotential::SelfConvolved { .. }
                    if matches!(rho, TimeCorrelation::SelfConvolved { .. }) =>
                {
                    Ok(AdmissibilityClass::MollifierProduct)
                }
                SpatialPotential::MollifiedDelta { kappa } => {
                    if d != 1 {
                        return Err(Error::RejectedParameters(format!(
                            "delta interaction requires d = 1, got d = {d}"
                        )));
                    }
                    if *kappa <= 0.0 {
                        return Err(Error::RejectedParameters(
                            "delta mollification width kappa must be positive".into(),
                        ));
                    }
                    if rho.compact_support().is_none() {
                        return Err(Error::RejectedParameters(
                            "delta interaction requires compactly supported rho".into(),
                        ));
                    }
                    Ok(AdmissibilityClass::Delta1D)
                }
                SpatialPotential::CoulombPower { p, eta, .. } => {
                    let compact = rho.compact_support().is_some();
                    if compact {
                        if d < 3 {
                            return Err(Error::RejectedParameters(format!(
                                "Coulomb power requires d >= 3, got d = {d}"
                            )));
                        }
                        if !(*p < d as f64 / 2.0) {
                            return Err(Error::RejectedParameters(format!(
                                "Coulomb power requires p < d/2, got p = {p}, d = {d}"
                            )));
                        }
                        Ok(AdmissibilityClass::CompactSingular)
                    } else if *eta > 0.0 {
                        // Regularized Coulomb is bounded; falls under the
                        // long-range class when the time envelope allows it.
                        long_range_ok(rho)?;
                        Ok(AdmissibilityClass::LongRangeBounded)
                    } else {
                        Err(Error::RejectedParameters(
                            "unregularized Coulomb requires compactly supported rho".into(),
                        ))
                    }
                }
                SpatialPotential::Bounded { .. } | SpatialPotential::SelfConvolved { .. } => {
                    long_range_ok(rho)?;
                    Ok(AdmissibilityClass::LongRangeBounded)
                }
            }
        }
        KernelForm::MasslessNelson { theta } => {
            if *theta > 2.0 {
                Ok(AdmissibilityClass::LongRangeBounded)
            } else {
                Err(Error::RejectedParameters(format!(
                    "massless coupling requires theta > 2, got theta = {theta}"
                )))
            }
        }
        KernelForm::Polaron { omega0, eta } => {
            if *omega0 <= 0.0 {
                return Err(Error::RejectedParameters(format!(
                    "polaron requires omega0 > 0, got omega0 = {omega0}"
                )));
            }
            if *eta > 0.0 {
                Ok(AdmissibilityClass::LongRangeBounded)
            } else {
                Err(Error::RejectedParameters(
                    "polaron with eta = 0 pairs a Coulomb singularity with non-compact rho"
                        .into(),
                ))
            }
        }
    }
}

/// Pair interaction with coupling `beta`, validated at construction.
#[derive(Debug, Clone)]
pub struct InteractionKernel {
    form: KernelForm,
    beta: f64,
    d: usize,
    class: AdmissibilityClass,
}

impl InteractionKernel {
    pub fn new(form: KernelForm, beta: f64, d: usize) -> Result<Self> {
        if beta < 0.0 {
            return Err(Error::RejectedParameters(format!("beta must be >= 0, got {beta}")));
        }
        if d == 0 {
            return Err(Error::RejectedParameters("dimension must be >= 1".into()));
        }
        let class = validate_admissibility(&form, d)?;
        Ok(Self { form, beta, d, class })
    }

    pub fn form(&self) -> &KernelForm {
        &self.form
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Same kernel with a different coupling (used by thermodynamic
    /// integration sweeps).
    pub fn with_beta(&self, beta: f64) -> Self {
        Self { form: self.form.clone(), beta, d: self.d, class: self.class }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn class(&self) -> AdmissibilityClass {
        self.class
    }

    /// `H(t, x)` at radius `r = |x|` (hot path).
    #[inline]
    pub fn h_radial(&self, t: f64, r: f64) -> f64 {
        self.form.eval(t, r)
    }

    /// `H(t, x)` with dimension checking.
    pub fn eval_h(&self, t: f64, x: &[f64]) -> Result<f64> {
        if x.len() != self.d {
            return Err(Error::DimensionMismatch { expected: self.d, got: x.len() });
        }
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        Ok(self.h_radial(t, r))
    }

    /// Quadrature value of a coincident-time diagonal node.
    ///
    /// `H(0, 0)` when finite; for unregularized singular `V` the diagonal
    /// cell is assigned the value from one local refinement,
    /// `H(dt/2, |adjacent increment|/2)`.
    #[inline]
    pub fn diagonal_value(&self, dt: f64, adjacent_increment_norm: f64) -> f64 {
        if self.form.singular_at_origin() {
            self.h_radial(0.5 * dt, 0.5 * adjacent_increment_norm)
        } else {
            self.h_radial(0.0, 0.0)
        }
    }

    /// Support radius of the time factor, when compact.
    pub fn rho_compact_support(&self) -> Option<f64> {
        match &self.form {
            KernelForm::Product { rho, .. } => rho.compact_support(),
            _ => None,
        }
    }

    /// Time factor of a product kernel.
    pub fn rho_eval(&self, t: f64) -> Option<f64> {
        match &self.form {
            KernelForm::Product { rho, .. } => Some(rho.eval(t)),
            _ => None,
        }
    }

    /// Supremum of the spatial factor, when finite.
    pub fn sup_v(&self) -> Option<f64> {
        match &self.form {
            KernelForm::Product { v, .. } => v.sup(),
            KernelForm::MasslessNelson { .. } => Some(1.0),
            KernelForm::Polaron { eta, .. } => {
                if *eta > 0.0 {
                    Some(1.0 / eta)
                } else {
                    None
                }
            }
        }
    }

    pub fn spatial(&self) -> Option<&SpatialPotential> {
        match &self.form {
            KernelForm::Product { v, .. } => Some(v),
            _ => None,
        }
    }
}

// ---------------------------------------------------------------------------
// Mollifier pairs and self-convolutions
// ---------------------------------------------------------------------------

/// Radial self-convolution `(f * f)(r)` in R^3 via the chord reduction
/// `(2 pi / r) int_0^b s f(s) [G(r+s) - G(|r-s|)] ds`, `G(u) = int_0^u t f(t) dt`.
fn radial_self_convolution_3d(
    profile: &dyn Fn(f64) -> f64,
    support: f64,
    table_n: usize,
    inner_n: usize,
) -> Tabulated1d {
    let gh = support / inner_n as f64;
    let mut g = vec![0.0; inner_n + 1];
    let mut prev = 0.0;
    for k in 1..=inner_n {
        let t = k as f64 * gh;
        let cur = t * profile(t);
        g[k] = g[k - 1] + 0.5 * gh * (prev + cur);
        prev = cur;
    }
    let g_eval = |u: f64| -> f64 {
        if u <= 0.0 {
            0.0
        } else if u >= support {
            g[inner_n]
        } else {
            let s = u / gh;
            let k = s as usize;
            let w = s - k as f64;
            g[k] * (1.0 - w) + g[k + 1] * w
        }
    };
    let two_pi = 2.0 * std::f64::consts::PI;
    let values: Vec<f64> = (0..=table_n)
        .map(|k| {
            let r = 2.0 * support * k as f64 / table_n as f64;
            if k == 0 {
                // (f*f)(0) = int f^2 = 4 pi int_0^b s^2 f(s)^2 ds.
                4.0 * std::f64::consts::PI
                    * trapezoid(0.0, support, inner_n, |s| {
                        let f = profile(s);
                        s * s * f * f
                    })
            } else {
                (two_pi / r)
                    * trapezoid(0.0, support, inner_n, |s| {
                        s * profile(s) * (g_eval(r + s) - g_eval((r - s).abs()))
                    })
            }
        })
        .collect();
    Tabulated1d::new(0.0, 2.0 * support / table_n as f64, values)
}

/// 1-D self-convolution of an even compactly supported profile, tabulated on
/// `[0, 2 support]`.
fn even_self_convolution_1d(
    profile: &dyn Fn(f64) -> f64,
    support: f64,
    table_n: usize,
    inner_n: usize,
) -> Tabulated1d {
    let values: Vec<f64> = (0..=table_n)
        .map(|k| {
            let tau = 2.0 * support * k as f64 / table_n as f64;
            let lo = tau - support;
            let hi = support;
            if lo >= hi {
                0.0
            } else {
                trapezoid(lo, hi, inner_n, |u| profile(u) * profile(tau - u))
            }
        })
        .collect();
    Tabulated1d::new(0.0, 2.0 * support / table_n as f64, values)
}

/// A normalized time mollifier `psi` and space mollifier `phi` together with
/// their cached self-convolutions `rho = psi * psi` and `V = phi * phi`.
#[derive(Debug, Clone)]
pub struct MollifierPair {
    pub psi_half_width: f64,
    pub phi_radius: f64,
    pub d: usize,
    rho_table: Tabulated1d,
    v_table: Tabulated1d,
    psi_norm: f64,
    phi_norm: f64,
}

impl MollifierPair {
    const TABLE_N: usize = 2048;
    const INNER_N: usize = 2048;

    /// Builds the pair; `d` must be 1 or 3 (the radial convolution reduction
    /// is implemented for those dimensions).
    pub fn new(psi_half_width: f64, phi_radius: f64, d: usize) -> Result<Self> {
        if psi_half_width <= 0.0 || phi_radius <= 0.0 {
            return Err(Error::RejectedParameters("mollifier supports must be positive".into()));
        }
        if d != 1 && d != 3 {
            return Err(Error::RejectedParameters(format!(
                "mollifier pairs support d in {{1, 3}}, got d = {d}"
            )));
        }
        let psi_norm = psi_half_width * bump_mass_1d();
        let phi_norm = match d {
            1 => phi_radius * bump_mass_1d(),
            _ => phi_radius.powi(3) * bump_mass_3d(),
        };
        let a = psi_half_width;
        let psi = move |t: f64| bump(t / a) / psi_norm;
        let rho_table = even_self_convolution_1d(&psi, a, Self::TABLE_N, Self::INNER_N);
        let b = phi_radius;
        let phi = move |r: f64| bump(r / b) / phi_norm;
        let v_table = match d {
            1 => even_self_convolution_1d(&phi, b, Self::TABLE_N, Self::INNER_N),
            _ => radial_self_convolution_3d(&phi, b, Self::TABLE_N, Self::INNER_N),
        };
        Ok(Self { psi_half_width, phi_radius, d, rho_table, v_table, psi_norm, phi_norm })
    }

    pub fn psi(&self, t: f64) -> f64 {
        bump(t / self.psi_half_width) / self.psi_norm
    }

    pub fn phi_radial(&self, r: f64) -> f64 {
        bump(r / self.phi_radius) / self.phi_norm
    }

    /// Cached `(psi * psi)(t)`.
    pub fn rho(&self, t: f64) -> f64 {
        self.rho_table.eval(t.abs())
    }

    /// Cached `(phi * phi)(r)`.
    pub fn v_radial(&self, r: f64) -> f64 {
        self.v_table.eval(r)
    }

    /// Fresh quadrature of `(psi * psi)(tau)`, independent of the cache.
    pub fn rho_direct(&self, tau: f64, n: usize) -> f64 {
        let a = self.psi_half_width;
        let tau = tau.abs();
        if tau >= 2.0 * a {
            return 0.0;
        }
        trapezoid(tau - a, a, n, |u| self.psi(u) * self.psi(tau - u))
    }

    /// Fresh quadrature of `(phi * phi)(0) = int phi^2`.
    pub fn v_zero_direct(&self, n: usize) -> f64 {
        match self.d {
            1 => trapezoid(-self.phi_radius, self.phi_radius, n, |x| {
                let p = self.phi_radial(x.abs());
                p * p
            }),
            _ => {
                4.0 * std::f64::consts::PI
                    * trapezoid(0.0, self.phi_radius, n, |r| {
                        let p = self.phi_radial(r);
                        r * r * p * p
                    })
            }
        }
    }

    /// Total mass `int rho` over the line (should be `(int psi)^2 = 1`).
    pub fn rho_mass(&self) -> f64 {
        2.0 * self.rho_table.integral()
    }

    /// Total mass `int V` over R^d (should be `(int phi)^2 = 1`).
    pub fn v_mass(&self) -> f64 {
        match self.d {
            1 => 2.0 * self.v_table.integral(),
            _ => {
                let b2 = 2.0 * self.phi_radius;
                4.0 * std::f64::consts::PI
                    * trapezoid(0.0, b2, 4096, |r| r * r * self.v_table.eval(r))
            }
        }
    }

    /// The product interaction kernel `rho(t) V(x)` with coupling `beta`
    /// (class `MollifierProduct`).
    pub fn product_kernel(&self, beta: f64) -> Result<InteractionKernel> {
        InteractionKernel::new(
            KernelForm::Product {
                rho: TimeCorrelation::SelfConvolved { table: self.rho_table.clone(), amplitude: 1.0 },
                v: SpatialPotential::SelfConvolved { table: self.v_table.clone(), d: self.d },
            },
            beta,
            self.d,
        )
    }
}

// ---------------------------------------------------------------------------
// Named presets
// ---------------------------------------------------------------------------

/// Kernel configuration as it appears in experiment config files.
///
/// Presets: `massless_nelson` (theta, default 2.5), `polaron` (omega0 = 1,
/// eta = 0.05), `poly_bounded` (theta = 2.5, Lorentzian V), `compact_coulomb`
/// (box rho half-width 0.5, p = 1, eta = 0.02), `delta_1d` (box rho, kappa =
/// 0.1), `mollifier_product` (psi half-width 0.2, phi radius 0.3).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub preset: String,
    pub beta: f64,
    #[serde(default)]
    pub d: Option<usize>,
    #[serde(default)]
    pub theta: Option<f64>,
    #[serde(default)]
    pub omega0: Option<f64>,
    #[serde(default)]
    pub eta: Option<f64>,
    #[serde(default)]
    pub p: Option<f64>,
    #[serde(default)]
    pub kappa: Option<f64>,
    #[serde(default)]
    pub amplitude: Option<f64>,
    #[serde(default)]
    pub half_width: Option<f64>,
    #[serde(default)]
    pub psi_half_width: Option<f64>,
    #[serde(default)]
    pub phi_radius: Option<f64>,
}

impl KernelConfig {
    pub fn preset(name: &str, beta: f64) -> Self {
        Self {
            preset: name.to_string(),
            beta,
            d: None,
            theta: None,
            omega0: None,
            eta: None,
            p: None,
            kappa: None,
            amplitude: None,
            half_width: None,
            psi_half_width: None,
            phi_radius: None,
        }
    }

    pub fn build(&self) -> Result<InteractionKernel> {
        let amp = self.amplitude.unwrap_or(1.0);
        match self.preset.as_str() {
            "massless_nelson" => {
                let d = self.d.unwrap_or(3);
                InteractionKernel::new(
                    KernelForm::MasslessNelson { theta: self.theta.unwrap_or(2.5) },
                    self.beta,
                    d,
                )
            }
            "polaron" => InteractionKernel::new(
                KernelForm::Polaron {
                    omega0: self.omega0.unwrap_or(1.0),
                    eta: self.eta.unwrap_or(0.05),
                },
                self.beta,
                self.d.unwrap_or(3),
            ),
            "poly_bounded" => {
                let d = self.d.unwrap_or(3);
                InteractionKernel::new(
                    KernelForm::Product {
                        rho: TimeCorrelation::PolynomialDecay {
                            theta: self.theta.unwrap_or(2.5),
                            amplitude: amp,
                        },
                        v: SpatialPotential::Bounded {
                            form: BoundedForm::Lorentzian { scale: 1.0 },
                            d,
                        },
                    },
                    self.beta,
                    d,
                )
            }
            "compact_coulomb" => {
                let d = self.d.unwrap_or(3);
                InteractionKernel::new(
                    KernelForm::Product {
                        rho: TimeCorrelation::CompactBox {
                            half_width: self.half_width.unwrap_or(0.5),
                            amplitude: amp,
                        },
                        v: SpatialPotential::CoulombPower {
                            p: self.p.unwrap_or(1.0),
                            eta: self.eta.unwrap_or(0.02),
                            d,
                        },
                    },
                    self.beta,
                    d,
                )
            }
            "delta_1d" => InteractionKernel::new(
                KernelForm::Product {
                    rho: TimeCorrelation::CompactBox {
                        half_width: self.half_width.unwrap_or(0.5),
                        amplitude: amp,
                    },
                    v: SpatialPotential::MollifiedDelta { kappa: self.kappa.unwrap_or(0.1) },
                },
                self.beta,
                self.d.unwrap_or(1),
            ),
            "mollifier_product" => {
                let d = self.d.unwrap_or(3);
                let pair =
                    MollifierPair::new(self.psi_half_width.unwrap_or(0.2), self.phi_radius.unwrap_or(0.3), d)?;
                pair.product_kernel(self.beta)
            }
            other => Err(Error::Config(format!("unknown kernel preset `{other}`"))),
        }
    }
}
