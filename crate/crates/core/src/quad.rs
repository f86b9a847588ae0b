//! Quadrature primitives: trapezoid rules and Gauss-Hermite nodes.

/// Trapezoid weight of node `i` on a grid of `n+1` nodes with step `dt`.
#[inline]
pub fn trapezoid_weight(i: usize, n: usize, dt: f64) -> f64 {
    if i == 0 || i == n {
        0.5 * dt
    } else {
        dt
    }
}

/// Composite trapezoid of `f` over `[a, b]` with `n` intervals.
pub fn trapezoid(a: f64, b: f64, n: usize, f: impl Fn(f64) -> f64) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = 0.5 * (f(a) + f(b));
    for i in 1..n {
        s += f(a + i as f64 * h);
    }
    s * h
}

/// Gauss-Hermite nodes and weights for `int f(x) e^{-x^2} dx`.
///
/// Newton iteration on the Hermite recurrence; standard construction, good to
/// machine precision for the orders used here (<= 64).
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = (n + 1) / 2;
    let mut z = 0.0_f64;
    for i in 0..m {
        // Initial guesses (Numerical Recipes style).
        z = match i {
            0 => (2.0 * n as f64 + 1.0).sqrt() - 1.85575 * (2.0 * n as f64 + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * (n as f64).powf(0.426) / z,
            2 => 1.86 * z - 0.86 * nodes[0],
            3 => 1.91 * z - 0.91 * nodes[1],
            _ => 2.0 * z - nodes[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..200 {
            // Hermite recurrence for pi_j orthonormal w.r.t. e^{-x^2}.
            let mut p1 = std::f64::consts::PI.powf(-0.25);
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = z * (2.0 / (j as f64 + 1.0)).sqrt() * p2
                    - (j as f64 / (j as f64 + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * n as f64).sqrt() * p2;
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = z;
        nodes[n - 1 - i] = -z;
        weights[i] = 2.0 / (pp * pp);
        weights[n - 1 - i] = weights[i];
    }
    // Ascending order.
    nodes.reverse();
    weights.reverse();
    (nodes, weights)
}

/// Expectation of `f(Z)` for standard normal `Z` using `n` Gauss-Hermite nodes.
pub fn gauss_hermite_normal_expectation(n: usize, f: impl Fn(f64) -> f64) -> f64 {
    let (nodes, weights) = gauss_hermite(n);
    let sqrt2 = std::f64::consts::SQRT_2;
    let norm = std::f64::consts::PI.sqrt();
    nodes
        .iter()
        .zip(&weights)
        .map(|(&x, &w)| w * f(sqrt2 * x))
        .sum::<f64>()
        / norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn hermite_integrates_polynomials() {
        // E[Z^2] = 1, E[Z^4] = 3 for standard normal.
        assert_relative_eq!(gauss_hermite_normal_expectation(20, |z| z * z), 1.0, epsilon = 1e-12);
        assert_relative_eq!(
            gauss_hermite_normal_expectation(20, |z| z.powi(4)),
            3.0,
            epsilon = 1e-11
        );
    }

    #[test]
    fn hermite_weights_sum_to_sqrt_pi() {
        let (_, w) = gauss_hermite(32);
        assert_relative_eq!(w.iter().sum::<f64>(), std::f64::consts::PI.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn hermite_gaussian_mgf() {
        // E[e^{tZ}] = e^{t^2/2}.
        let got = gauss_hermite_normal_expectation(40, |z| (0.7 * z).exp());
        assert_relative_eq!(got, (0.7_f64 * 0.7 / 2.0).exp(), epsilon = 1e-12);
    }

    #[test]
    fn trapezoid_linear_exact() {
        assert_relative_eq!(trapezoid(0.0, 2.0, 7, |x| 3.0 * x), 6.0, epsilon = 1e-12);
    }
}
