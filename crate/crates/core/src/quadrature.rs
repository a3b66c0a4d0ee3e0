//! Gauss-Jacobi rules and closed-form Riemann-Liouville integrals of powers.
//!
//! The fractional kernels `(x - xi)^(gamma - 1)` become the Jacobi weights
//! `(1 - eta)^(gamma - 1)` (left) and `(1 + eta)^(gamma - 1)` (right) after the
//! affine map of `[lo, x]` onto `[-1, 1]`, so a Gauss-Jacobi rule with that
//! exponent integrates the polynomial factor exactly.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Gamma function (Lanczos approximation).
pub fn gamma(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}

/// Gauss quadrature for the weight `(1 - eta)^a (1 + eta)^b` on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobiRule {
    a: f64,
    b: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl JacobiRule {
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Exponents `(a, b)` of the weight.
    pub fn exponents(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    /// `sum_i w_i f(eta_i)`, i.e. the weighted integral of `f` over `[-1, 1]`.
    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Zeroth moment `int (1-x)^a (1+x)^b dx = 2^(a+b+1) B(a+1, b+1)`.
pub fn jacobi_weight_mass(a: f64, b: f64) -> f64 {
    use statrs::function::gamma::ln_gamma;
    ((a + b + 1.0) * std::f64::consts::LN_2 + ln_gamma(a + 1.0) + ln_gamma(b + 1.0)
        - ln_gamma(a + b + 2.0))
    .exp()
}

// Monic three-term recurrence p_{k+1} = (x - alpha_k) p_k - beta_k p_{k-1}.
fn recurrence(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let mut alpha = Vec::with_capacity(n);
    let mut beta = Vec::with_capacity(n);
    for k in 0..n {
        let kf = k as f64;
        let s = 2.0 * kf + a + b;
        alpha.push(if k == 0 {
            (b - a) / (a + b + 2.0)
        } else {
            (b * b - a * a) / (s * (s + 2.0))
        });
        beta.push(match k {
            0 => jacobi_weight_mass(a, b),
            1 => 4.0 * (1.0 + a) * (1.0 + b) / ((2.0 + a + b).powi(2) * (3.0 + a + b)),
            _ => {
                4.0 * kf * (kf + a) * (kf + b) * (kf + a + b)
                    / (s * s * (s + 1.0) * (s - 1.0))
            }
        });
    }
    (alpha, beta)
}

/// Orthonormal p_n(x), p_n'(x) and sum_{k<n} p_k(x)^2.
fn orthonormal_eval(x: f64, alpha: &[f64], beta: &[f64], n: usize) -> (f64, f64, f64) {
    let mut p_prev = 0.0;
    let mut dp_prev = 0.0;
    let mut p = 1.0 / beta[0].sqrt();
    let mut dp = 0.0;
    let mut christoffel = 0.0;
    for k in 0..n {
        christoffel += p * p;
        let sb_next = if k + 1 < n {
            beta[k + 1].sqrt()
        } else {
            // beta_n is only needed for scaling p_n; any positive value keeps the root.
            1.0
        };
        let sb = if k == 0 { 0.0 } else { beta[k].sqrt() };
        let p_next = ((x - alpha[k]) * p - sb * p_prev) / sb_next;
        let dp_next = (p + (x - alpha[k]) * dp - sb * dp_prev) / sb_next;
        p_prev = p;
        dp_prev = dp;
        p = p_next;
        dp = dp_next;
    }
    (p, dp, christoffel)
}

/// Golub-Welsch construction of the `n`-point Gauss-Jacobi rule, polished by
/// Newton iteration on the orthonormal recurrence.
pub fn gauss_jacobi(n: usize, a: f64, b: f64) -> Result<JacobiRule> {
    if n == 0 {
        return Err(Error::EmptyRule);
    }
    if !(a > -1.0 && b > -1.0) {
        return Err(Error::InvalidJacobiExponents(a, b));
    }
    let (alpha, beta) = recurrence(n, a, b);
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j {
            beta[j].sqrt()
        } else if j + 1 == i {
            beta[i].sqrt()
        } else {
            0.0
        }
    });
    let mut nodes: Vec<f64> = SymmetricEigen::new(jacobi).eigenvalues.iter().copied().collect();
    nodes.sort_by(|x, y| x.total_cmp(y));

    let mut weights = Vec::with_capacity(n);
    for x in nodes.iter_mut() {
        for _ in 0..3 {
            let (p, dp, _) = orthonormal_eval(*x, &alpha, &beta, n);
            if dp == 0.0 {
                break;
            }
            let step = p / dp;
            *x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let (_, _, christoffel) = orthonormal_eval(*x, &alpha, &beta, n);
        weights.push(1.0 / christoffel);
    }
    Ok(JacobiRule {
        a,
        b,
        nodes,
        weights,
    })
}

type RuleKey = (usize, u64, u64);

/// Shared cache of Gauss-Jacobi rules keyed by `(n, a, b)`.
pub fn cached_gauss_jacobi(n: usize, a: f64, b: f64) -> Result<Arc<JacobiRule>> {
    static CACHE: OnceLock<Mutex<HashMap<RuleKey, Arc<JacobiRule>>>> = OnceLock::new();
    let key = (n, a.to_bits(), b.to_bits());
    let cache = CACHE.get_or_init(Default::default);
    if let Some(rule) = cache.lock().unwrap().get(&key) {
        return Ok(Arc::clone(rule));
    }
    let rule = Arc::new(gauss_jacobi(n, a, b)?);
    cache.lock().unwrap().insert(key, Arc::clone(&rule));
    Ok(rule)
}

/// `Gamma(p+1) / Gamma(p+1+gamma)`, the Riemann-Liouville factor for `(x-a)^p`.
pub fn power_integral_factor(p: u32, gamma_order: f64) -> f64 {
    use statrs::function::gamma::ln_gamma;
    let p = f64::from(p);
    if gamma_order == 0.0 {
        return 1.0;
    }
    if p + 1.0 + gamma_order < 150.0 {
        gamma(p + 1.0) / gamma(p + 1.0 + gamma_order)
    } else {
        (ln_gamma(p + 1.0) - ln_gamma(p + 1.0 + gamma_order)).exp()
    }
}

/// Left Riemann-Liouville integral of order `gamma` of `(xi - a)^p`, evaluated at `x`:
/// `Gamma(p+1) / Gamma(p+1+gamma) * (x - a)^(p + gamma)`.
///
/// `gamma = 0` is accepted and returns `(x - a)^p` (the identity operator).
pub fn rl_integral_shifted_power(p: u32, gamma_order: f64, a: f64, x: f64) -> f64 {
    debug_assert!(gamma_order >= 0.0 && x >= a);
    let d = (x - a).max(0.0);
    power_integral_factor(p, gamma_order) * d.powf(f64::from(p) + gamma_order)
}

/// Right-sided mirror: the right integral of `(b - xi)^p` at `x`.
pub fn rl_integral_shifted_power_right(p: u32, gamma_order: f64, b: f64, x: f64) -> f64 {
    debug_assert!(gamma_order >= 0.0 && x <= b);
    let d = (b - x).max(0.0);
    power_integral_factor(p, gamma_order) * d.powf(f64::from(p) + gamma_order)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Re-expand `sum_k c_k x^k` as `sum_p d_p (x - a)^p`.
pub fn shift_to_left_powers(coeffs: &[f64], a: f64) -> Vec<f64> {
    let mut out = vec![0.0; coeffs.len()];
    for (k, &c) in coeffs.iter().enumerate() {
        for (p, d) in out.iter_mut().enumerate().take(k + 1) {
            *d += c * binomial(k, p) * a.powi((k - p) as i32);
        }
    }
    out
}

/// Re-expand `sum_k c_k x^k` as `sum_p d_p (b - x)^p`.
pub fn shift_to_right_powers(coeffs: &[f64], b: f64) -> Vec<f64> {
    let mut out = vec![0.0; coeffs.len()];
    for (k, &c) in coeffs.iter().enumerate() {
        for (p, d) in out.iter_mut().enumerate().take(k + 1) {
            let sign = if p % 2 == 0 { 1.0 } else { -1.0 };
            *d += c * binomial(k, p) * b.powi((k - p) as i32) * sign;
        }
    }
    out
}
