//! Closed-form spectral quantities for EGOE(1+k): ensemble-averaged moments,
//! Edgeworth-corrected Gaussian and semicircle densities, and the Gaussian /
//! Bessel survival-probability laws.
//!
//! All functions here are pure and cheap; the Monte Carlo cross-checks live in
//! the `ensemble`/`spectral` pipelines and in the test suites.

use crate::bessel::bessel_j1;
use crate::error::{EgoeError, Result};

/// Defining parameters of an EGOE(1+k) system: `m` spinless fermions in `n`
/// single-particle levels with a rank-`k` random interaction of strength
/// `lambda` (energies in units of the mean single-particle spacing).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    /// Number of single-particle levels N.
    pub levels: u32,
    /// Number of fermions m.
    pub fermions: u32,
    /// Rank of the interaction k.
    pub rank: u32,
    /// Quench strength lambda multiplying V(k).
    pub lambda: f64,
}

impl SystemParams {
    /// Validates 1 <= k <= m <= N and lambda >= 0.
    pub fn new(levels: u32, fermions: u32, rank: u32, lambda: f64) -> Result<Self> {
        if rank < 1 || rank > fermions || fermions > levels {
            return Err(EgoeError::InvalidParams(format!(
                "need 1 <= k <= m <= N, got N={levels}, m={fermions}, k={rank}"
            )));
        }
        if lambda.is_nan() || lambda < 0.0 {
            return Err(EgoeError::InvalidParams(format!(
                "lambda must be >= 0, got {lambda}"
            )));
        }
        Ok(Self {
            levels,
            fermions,
            rank,
            lambda,
        })
    }

    /// Many-body basis dimension d(N, m) = C(N, m).
    pub fn basis_dim(&self) -> usize {
        binom(self.levels as u64, self.fermions as i64) as usize
    }

    /// Dimension of the k-particle coefficient matrix, C(N, k).
    pub fn subset_dim(&self) -> usize {
        binom(self.levels as u64, self.rank as i64) as usize
    }
}

/// Ensemble-averaged trace moments of V(k) and the shape parameters built
/// from them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentSet {
    /// Ensemble-averaged variance <V^2>^m.
    pub m2: f64,
    /// Ensemble-averaged fourth moment <V^4>^m.
    pub m4: f64,
    /// Skewness (identically 0 for pure V(k); all odd moments vanish).
    pub gamma1: f64,
    /// Excess kurtosis m4/m2^2 - 3.
    pub gamma2: f64,
}

impl MomentSet {
    /// Evaluates the closed forms for the given parameters. Requires
    /// lambda > 0 so that the kurtosis ratio is defined.
    pub fn evaluate(p: &SystemParams) -> Result<Self> {
        Ok(Self {
            m2: variance_v(p),
            m4: fourth_moment_v(p),
            gamma1: 0.0,
            gamma2: gamma2_finite(p)?,
        })
    }
}

/// Binomial coefficient C(n, r) as a real number.
///
/// Out-of-range r (r < 0 or r > n) yields 0, so sums over shifted binomial
/// factors need no special-casing. Results are exact integers as long as the
/// multiplicative evaluation stays within u128; beyond that the value is
/// computed from log-factorials.
pub fn binom(n: u64, r: i64) -> f64 {
    if r < 0 || r as u64 > n {
        return 0.0;
    }
    let r = (r as u64).min(n - r as u64);
    match binom_u128(n, r) {
        Some(v) => v as f64,
        None => (ln_factorial(n) - ln_factorial(r) - ln_factorial(n - r)).exp(),
    }
}

/// Exact C(n, r) in u128, or None on overflow. Assumes r <= n - r.
fn binom_u128(n: u64, r: u64) -> Option<u128> {
    let mut acc: u128 = 1;
    for i in 1..=r {
        // acc * (n - r + i) / i stays integral at every step
        acc = acc.checked_mul((n - r + i) as u128)? / i as u128;
    }
    Some(acc)
}

/// Exact C(n, r) in u64 for the small arguments used by subset ranking.
/// Panics on overflow; fine for n <= 63.
pub(crate) fn binom_u64(n: u32, r: u32) -> u64 {
    if r > n {
        return 0;
    }
    let r = r.min(n - r);
    let mut acc: u64 = 1;
    for i in 1..=r as u64 {
        acc = acc * (n as u64 - r as u64 + i) / i;
    }
    acc
}

/// ln(n!) by direct summation; n stays modest (binomials up to ~C(170, k)).
fn ln_factorial(n: u64) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

/// Ensemble-averaged variance of V(k) in m-particle space:
/// lambda^2 C(m,k) [C(N-m+k,k) + 1].
pub fn variance_v(p: &SystemParams) -> f64 {
    let (n, m, k) = (p.levels as u64, p.fermions as u64, p.rank as i64);
    p.lambda * p.lambda * binom(m, k) * (binom(n - m + k as u64, k) + 1.0)
}

/// Ensemble-averaged fourth moment of V(k): the leading
/// 2 C(m,k)^2 {C(N-m+k,k)+1}^2 term plus the s = 0..k correction sum.
/// Terms with any out-of-range binomial vanish via `binom`'s 0 convention.
pub fn fourth_moment_v(p: &SystemParams) -> f64 {
    let (n, m, k) = (p.levels as i64, p.fermions as i64, p.rank as i64);
    let c = |a: i64, b: i64| -> f64 {
        if a < 0 {
            0.0
        } else {
            binom(a as u64, b)
        }
    };
    let lead = 2.0 * c(m, k).powi(2) * (c(n - m + k, k) + 1.0).powi(2);
    let mut sum = 0.0;
    for s in 0..=k {
        let denom = c(n - s, k) * c(k, s);
        if denom == 0.0 {
            continue;
        }
        let term = c(m - s, k - s).powi(2)
            * c(n - m + k - s, k)
            * c(m - s, k)
            * c(n - m, s)
            * c(m, s)
            * c(n + 1, s)
            * ((n - 2 * s + 1) as f64 / (n - s + 1) as f64)
            / denom;
        sum += term;
    }
    p.lambda.powi(4) * (lead + sum)
}

/// Finite-N excess kurtosis gamma_2 = m4/m2^2 - 3 of the V(k) eigenvalue
/// density. Independent of lambda (the lambda^4 cancels); equals -1 + 1/d^2
/// at k = m (semicircle/GOE limit) and approaches 0 for k << m at large m.
///
/// Errors if lambda = 0, where the ratio is 0/0.
pub fn gamma2_finite(p: &SystemParams) -> Result<f64> {
    if p.lambda == 0.0 {
        return Err(EgoeError::InvalidParams(
            "gamma2 is undefined at lambda = 0".into(),
        ));
    }
    let m2 = variance_v(p);
    let m4 = fourth_moment_v(p);
    Ok(m4 / (m2 * m2) - 3.0)
}

/// Dilute-limit asymptote of the excess kurtosis: -k^2/m.
pub fn gamma2_asymptotic(k: u32, m: u32) -> f64 {
    debug_assert!(m > 0);
    -((k as f64) * (k as f64)) / m as f64
}

/// Variance of the d(N,m) many-body energies of H0 = sum_i eps_i n_i over all
/// configurations: [m(N-m) / (N(N-1))] * sum_i (eps_i - mean)^2.
pub fn variance_h0(n: u32, m: u32, eps: &[f64]) -> f64 {
    assert_eq!(eps.len(), n as usize, "eps must have N entries");
    if n < 2 {
        return 0.0;
    }
    let mean = eps.iter().sum::<f64>() / n as f64;
    let ss: f64 = eps.iter().map(|&e| (e - mean) * (e - mean)).sum();
    let (n, m) = (n as f64, m as f64);
    m * (n - m) / (n * (n - 1.0)) * ss
}

/// Variance of the initial state for rank k (Eq. for the Gaussian decay law):
/// sigma_0^2 = sigma_V^2 / (sigma_H0^2 + sigma_V^2), in (0, 1].
///
/// Errors if the total variance vanishes (lambda = 0 with constant eps).
pub fn sigma0_sq(p: &SystemParams, eps: &[f64]) -> Result<f64> {
    let var_v = variance_v(p);
    let var_h = variance_h0(p.levels, p.fermions, eps) + var_v;
    if var_h == 0.0 {
        return Err(EgoeError::ZeroVariance);
    }
    Ok(var_v / var_h)
}

/// Probabilists' Hermite polynomials He_n for the orders used by the
/// Edgeworth correction: He_3, He_4, He_6.
pub fn hermite_he(n: u32, x: f64) -> Result<f64> {
    let x2 = x * x;
    match n {
        3 => Ok(x * (x2 - 3.0)),
        4 => Ok(x2 * (x2 - 6.0) + 3.0),
        6 => Ok(x2 * (x2 * (x2 - 15.0) + 45.0) - 15.0),
        other => Err(EgoeError::UnsupportedHermiteOrder(other)),
    }
}

/// Edgeworth-corrected Gaussian density at normalized energy E (zero
/// centroid, unit variance):
///
/// rho(E) = phi(E) { 1 + g1/6 He3(E) + g2/24 He4(E) + g1^2/72 He6(E) }.
///
/// The raw value is returned; it may dip slightly negative in the tails for
/// large corrections.
pub fn ed_gaussian_density(e: f64, gamma1: f64, gamma2: f64) -> f64 {
    let phi = (-0.5 * e * e).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let he = |n| hermite_he(n, e).expect("supported order");
    phi * (1.0
        + gamma1 / 6.0 * he(3)
        + gamma2 / 24.0 * he(4)
        + gamma1 * gamma1 / 72.0 * he(6))
}

/// Unit-variance semicircle density: sqrt(4 - E^2) / (2 pi) on |E| <= 2,
/// zero outside.
pub fn semicircle_density(e: f64) -> f64 {
    if e.abs() >= 2.0 {
        0.0
    } else {
        (4.0 - e * e).sqrt() / (2.0 * std::f64::consts::PI)
    }
}

/// Gaussian survival law F(t) = exp(-sigma_0^2 t^2).
pub fn gaussian_survival(t: f64, sigma0_sq: f64) -> f64 {
    (-sigma0_sq * t * t).exp()
}

/// Bessel survival law F(t) = [J1(2 sigma_0 t)]^2 / (sigma_0^2 t^2) for a
/// semicircular strength function.
///
/// The singularity at t = 0 is removable; below 2 sigma_0 t = 1e-4 the ratio
/// is evaluated from the J1 power series, giving F(0) = 1 exactly (and the
/// constant-one sigma_0 -> 0 limit).
pub fn bessel_survival(t: f64, sigma0_sq: f64) -> f64 {
    debug_assert!(sigma0_sq >= 0.0);
    let x = 2.0 * sigma0_sq.sqrt() * t;
    if x < 1e-4 {
        // J1(x)/(x/2) = 1 - x^2/8 + O(x^4); the x^4 term is below 1e-17 here
        let r = 1.0 - x * x / 8.0;
        r * r
    } else {
        let j = bessel_j1(x);
        4.0 * j * j / (x * x)
    }
}
