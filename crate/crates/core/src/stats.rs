//! Estimator plumbing: means, batch-mean standard errors, KS distance,
//! binned TV / relative entropy, effective sample sizes.

use statrs::distribution::{ContinuousCDF, Normal};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Mean and naive standard error (independent samples).
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let m = mean(xs);
    let se = (variance(xs) / xs.len() as f64).sqrt();
    (m, se)
}

/// Mean and standard error from non-overlapping batch means.
///
/// Robust to autocorrelation in MCMC output; also returns the implied
/// effective sample size `n * (naive SE / batch SE)^2`.
pub fn batch_mean_se(xs: &[f64], n_batches: usize) -> (f64, f64, f64) {
    let n = xs.len();
    assert!(n_batches >= 2 && n >= 2 * n_batches);
    let b = n / n_batches;
    let used = b * n_batches;
    let batch_means: Vec<f64> = (0..n_batches)
        .map(|k| xs[k * b..(k + 1) * b].iter().sum::<f64>() / b as f64)
        .collect();
    let m = mean(&xs[..used]);
    let se = (variance(&batch_means) / n_batches as f64).sqrt();
    let naive_var = variance(&xs[..used]);
    let n_eff = if se > 0.0 {
        (naive_var / (se * se)).min(used as f64)
    } else {
        used as f64
    };
    (m, se, n_eff)
}

/// Effective sample size of self-normalized importance weights,
/// `(sum w)^2 / sum w^2`.
pub fn importance_ess(weights: &[f64]) -> f64 {
    let s: f64 = weights.iter().sum();
    let s2: f64 = weights.iter().map(|w| w * w).sum();
    if s2 == 0.0 {
        0.0
    } else {
        s * s / s2
    }
}

pub fn normal_cdf(x: f64) -> f64 {
    Normal::new(0.0, 1.0).unwrap().cdf(x)
}

/// Kolmogorov-Smirnov distance between the sample and a centered Gaussian
/// with the sample's own variance, plus the 5% pass/fail verdict.
///
/// The critical value is the asymptotic 1.358/sqrt(n); the threshold is fixed
/// here so the diagnostic is reproducible.
pub fn ks_gaussian(samples: &[f64]) -> (f64, bool) {
    let n = samples.len();
    assert!(n >= 100, "ks_gaussian needs at least 100 samples");
    let sd = variance(samples).sqrt();
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if sd == 0.0 {
        return (1.0, false);
    }
    let mut d = 0.0_f64;
    for (i, x) in sorted.iter().enumerate() {
        let f = normal_cdf(x / sd);
        let lo = i as f64 / n as f64;
        let hi = (i + 1) as f64 / n as f64;
        d = d.max((f - lo).abs()).max((hi - f).abs());
    }
    let crit = 1.358 / (n as f64).sqrt();
    (d, d <= crit)
}

/// Histogram of `xs` on `bins` uniform bins over `[lo, hi]`; samples outside
/// the range land in the edge bins. Returns probabilities.
pub fn histogram(xs: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    let mut h = vec![0.0; bins];
    let w = (hi - lo) / bins as f64;
    for &x in xs {
        let k = (((x - lo) / w) as isize).clamp(0, bins as isize - 1) as usize;
        h[k] += 1.0;
    }
    let n = xs.len() as f64;
    for v in &mut h {
        *v /= n;
    }
    h
}

/// Total variation distance between two binned probability vectors.
pub fn binned_tv(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Binned relative entropy H(p|q) with additive smoothing `eps` on empty
/// bins of `q` (renormalized), so the estimate stays finite.
pub fn binned_kl(p: &[f64], q: &[f64], eps: f64) -> f64 {
    let qs: Vec<f64> = q.iter().map(|&b| b + eps).collect();
    let z: f64 = qs.iter().sum();
    p.iter()
        .zip(&qs)
        .filter(|(&a, _)| a > 0.0)
        .map(|(&a, &b)| a * (a / (b / z)).ln())
        .sum()
}
