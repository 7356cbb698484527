//! Closed-form and quadrature-based quantities of the matching model.
//!
//! Noise arguments named `noise_variance_per_clone` are the per-coordinate
//! variance `σ²` of a single clone's error; the combined error
//! `Z = ε_{i0} − ε_{0i}` then has per-coordinate variance `2σ²`.

use crate::error::{Error, Result};
use crate::quadrature;
use crate::specfun::{ln_beta, ln_gamma, ln_reg_lower_inc_gamma, std_normal_cdf};

/// Two in-person values closer than this are treated as equal to the AI
/// bound when applying the integer tie rule.
pub const TIE_TOLERANCE: f64 = 1e-12;

fn check_k(op: &'static str, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::domain(op, "dimension k must be at least 1"));
    }
    Ok(())
}

fn check_positive(op: &'static str, name: &str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::domain(
            op,
            format!("{name} = {v} must be positive and finite"),
        ));
    }
    Ok(())
}

/// Expected norm of a single uniform draw from the `k`-ball, `k/(k+1)`,
/// evaluated as a plain ratio.
pub fn benchmark(k: usize) -> f64 {
    k as f64 / (k as f64 + 1.0)
}

/// Expected distance to the best of `m` in-person draws:
/// `(1/k)·B(1/k, m+1)`.
pub fn d_ip(k: usize, m: u64) -> Result<f64> {
    check_k("d_ip", k)?;
    if m == 0 {
        return Err(Error::domain("d_ip", "sample size m must be at least 1"));
    }
    let inv_k = 1.0 / k as f64;
    Ok(ln_beta(inv_k, m as f64 + 1.0)?.exp() * inv_k)
}

/// Best-of-two in-person distance written as the benchmark minus its gap,
/// `k/(k+1) − k/((2k+1)(k+1))`. Independent of the Beta route in [`d_ip`].
pub fn d_ip2_identity(k: usize) -> Result<f64> {
    check_k("d_ip2_identity", k)?;
    let kf = k as f64;
    Ok(kf / (kf + 1.0) - kf / ((2.0 * kf + 1.0) * (kf + 1.0)))
}

/// Expected true distance to a candidate whose clone exactly matches the
/// subject's clone, i.e. `E[‖Z‖ | ‖Z‖ ≤ 1]` for `Z ~ N(0, 2σ² I_k)`.
///
/// Evaluated through regularized incomplete gamma functions in log space:
/// `√(2ν)·Γ((k+1)/2)P((k+1)/2, x) / (Γ(k/2)P(k/2, x))`, `ν = 2σ²`, `x = 1/(2ν)`.
pub fn d_ai_infinity(k: usize, noise_variance_per_clone: f64) -> Result<f64> {
    check_k("d_ai_infinity", k)?;
    check_positive("d_ai_infinity", "noise variance", noise_variance_per_clone)?;
    let nu = 2.0 * noise_variance_per_clone;
    let x = 1.0 / (2.0 * nu);
    let a = 0.5 * k as f64;
    let ln_ratio = ln_gamma(a + 0.5)? - ln_gamma(a)? + ln_reg_lower_inc_gamma(a + 0.5, x)?
        - ln_reg_lower_inc_gamma(a, x)?;
    let value = (2.0 * nu).sqrt() * ln_ratio.exp();
    if !value.is_finite() {
        return Err(Error::non_convergence(
            "d_ai_infinity",
            format!("non-finite result at k = {k}, variance = {noise_variance_per_clone}"),
        ));
    }
    Ok(value)
}

fn ln_radial(power: f64, r: f64) -> f64 {
    if power == 0.0 {
        0.0
    } else {
        power * r.ln()
    }
}

/// The same quantity as [`d_ai_infinity`] by direct log-space quadrature of
/// `∫ r^k e^{−r²/(2ν)} / ∫ r^{k−1} e^{−r²/(2ν)}` over `[0, 1]`.
pub fn d_ai_infinity_quadrature(k: usize, noise_variance_per_clone: f64) -> Result<f64> {
    check_k("d_ai_infinity", k)?;
    check_positive("d_ai_infinity", "noise variance", noise_variance_per_clone)?;
    let two_nu = 4.0 * noise_variance_per_clone;
    let kf = k as f64;
    let num = quadrature::integrate_log(|r| ln_radial(kf, r) - r * r / two_nu, 0.0, 1.0)?;
    let den = quadrature::integrate_log(|r| ln_radial(kf - 1.0, r) - r * r / two_nu, 0.0, 1.0)?;
    Ok((num - den).exp())
}

/// One-dimensional infinite-pool distance written with the normal CDF:
/// `2∫₀¹ [Φ(−r/(√2σ)) − Φ(−1/(√2σ))] / [Φ(1/(√2σ)) − Φ(−1/(√2σ))] dr`.
pub fn phi_one_dim(sigma: f64) -> Result<f64> {
    check_positive("phi_one_dim", "sigma", sigma)?;
    let scale = std::f64::consts::SQRT_2 * sigma;
    let floor = std_normal_cdf(-1.0 / scale);
    let mass = 1.0 - 2.0 * floor;
    let integral = quadrature::integrate(
        |r| std_normal_cdf(-r / scale) - floor,
        0.0,
        1.0,
        1e-15,
        1e-13,
    )?;
    Ok(2.0 * integral / mass)
}

/// Smallest in-person sample size `m` with `d_ip(k, m) < d_ai_infinity(k, ·)`.
///
/// This certifies against the infinite-pool lower bound only. When
/// `d_ip(k, m)` ties the bound within [`TIE_TOLERANCE`] the answer is `m + 1`.
pub fn ai_equivalent_bound(k: usize, noise_variance_per_clone: f64) -> Result<u64> {
    let bound = d_ai_infinity(k, noise_variance_per_clone)?;
    ai_equivalent_bound_for(k, bound)
}

/// [`ai_equivalent_bound`] against an explicit bound value.
pub fn ai_equivalent_bound_for(k: usize, bound: f64) -> Result<u64> {
    const LIMIT: u64 = 1 << 53;
    let below = |m: u64| -> Result<bool> { Ok(d_ip(k, m)? <= bound + TIE_TOLERANCE) };
    let mut hi = 1u64;
    while !below(hi)? {
        if hi >= LIMIT {
            return Err(Error::non_convergence(
                "ai_equivalent_bound",
                format!("in-person sample size exceeds 2^53 at k = {k}, bound = {bound}"),
            ));
        }
        hi *= 2;
    }
    // invariant: below(hi); !below(lo) unless lo == 0
    let mut lo = hi / 2;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if below(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    if (d_ip(k, hi)? - bound).abs() <= TIE_TOLERANCE {
        Ok(hi + 1)
    } else {
        Ok(hi)
    }
}

/// Per-group clone noise in the data-rich / data-poor extension.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GroupSpec {
    pub sigma_r2: f64,
    pub sigma_p2: f64,
}

impl GroupSpec {
    /// Requires `0 < sigma_r2 < sigma_p2`.
    pub fn new(sigma_r2: f64, sigma_p2: f64) -> Result<Self> {
        let g = Self::unchecked(sigma_r2, sigma_p2)?;
        if !(sigma_r2 < sigma_p2) {
            return Err(Error::domain(
                "GroupSpec",
                format!(
                    "data-rich variance {sigma_r2} must be below data-poor variance {sigma_p2}"
                ),
            ));
        }
        Ok(g)
    }

    /// Positive variances without the ordering constraint (control runs).
    pub fn unchecked(sigma_r2: f64, sigma_p2: f64) -> Result<Self> {
        check_positive("GroupSpec", "sigma_r2", sigma_r2)?;
        check_positive("GroupSpec", "sigma_p2", sigma_p2)?;
        Ok(GroupSpec { sigma_r2, sigma_p2 })
    }

    /// Combined per-coordinate variance for a data-rich candidate.
    pub fn nu_r(&self) -> f64 {
        2.0 * self.sigma_r2
    }

    /// Combined per-coordinate variance for a data-poor candidate.
    pub fn nu_p(&self) -> f64 {
        self.sigma_r2 + self.sigma_p2
    }
}

/// `ln f_k(0)`, the log density of `X + Z` at the origin for
/// `Z ~ N(0, ν I_k)`: `ln[(k/(2π^{k/2}))·Γ(k/2)·P(k/2, 1/(2ν))]`.
pub fn ln_density_at_zero(k: usize, nu: f64) -> Result<f64> {
    check_k("density_at_zero", k)?;
    check_positive("density_at_zero", "nu", nu)?;
    let a = 0.5 * k as f64;
    Ok(
        (k as f64).ln() - std::f64::consts::LN_2 - a * std::f64::consts::PI.ln()
            + ln_gamma(a)?
            + ln_reg_lower_inc_gamma(a, 1.0 / (2.0 * nu))?,
    )
}

pub fn density_at_zero(k: usize, nu: f64) -> Result<f64> {
    ln_density_at_zero(k, nu).map(f64::exp)
}

/// Large-pool probability that the platform's match is data-rich,
/// `f_R(0) / (f_R(0) + f_P(0))`.
pub fn rich_win_probability(k: usize, group: &GroupSpec) -> Result<f64> {
    rich_win_probability_nu(k, group.nu_r(), group.nu_p())
}

/// [`rich_win_probability`] in terms of the combined variances.
pub fn rich_win_probability_nu(k: usize, nu_r: f64, nu_p: f64) -> Result<f64> {
    let diff = ln_density_at_zero(k, nu_p)? - ln_density_at_zero(k, nu_r)?;
    Ok(1.0 / (1.0 + diff.exp()))
}

/// `LB/(1+LB)` with `LB = e^{−1/(2ν_R)}·(ν_P/ν_R)^{k/2}`, a lower bound on
/// [`rich_win_probability`].
pub fn rich_win_lower_bound(k: usize, group: &GroupSpec) -> Result<f64> {
    check_k("rich_win_lower_bound", k)?;
    let (nu_r, nu_p) = (group.nu_r(), group.nu_p());
    let ln_lb = -1.0 / (2.0 * nu_r) + 0.5 * k as f64 * (nu_p / nu_r).ln();
    Ok(1.0 / (1.0 + (-ln_lb).exp()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn d_ip_one_dimension_is_harmonic() {
        for m in 1..=50u64 {
            assert_relative_eq!(
                d_ip(1, m).unwrap(),
                1.0 / (m as f64 + 1.0),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn d_ip_rejects_zero() {
        assert!(d_ip(0, 1).is_err());
        assert!(d_ip(1, 0).is_err());
        assert!(d_ip2_identity(0).is_err());
    }

    #[test]
    fn d_ip_best_of_two_values() {
        assert_relative_eq!(d_ip(5, 2).unwrap(), 50.0 / 66.0, max_relative = 1e-12);
        assert_relative_eq!(d_ip(50, 2).unwrap(), 5000.0 / 5151.0, max_relative = 1e-12);
        assert_relative_eq!(d_ip2_identity(1).unwrap(), 1.0 / 3.0, max_relative = 1e-15);
    }

    #[test]
    fn d_ai_infinity_one_dimension_matches_worked_example() {
        let v = d_ai_infinity(1, 0.05f64.powi(2)).unwrap();
        assert!((1.0 / 18.0..1.0 / 17.0).contains(&v), "{v}");
    }

    #[test]
    fn ai_equivalent_bound_tie_rule() {
        // bound exactly on d_ip(1, 4) = 1/5 bumps the answer by one
        assert_eq!(ai_equivalent_bound_for(1, 0.2).unwrap(), 5);
        assert_eq!(ai_equivalent_bound_for(1, 0.2 + 1e-9).unwrap(), 4);
        assert_eq!(ai_equivalent_bound_for(1, 0.6).unwrap(), 1);
    }

    #[test]
    fn group_spec_invariant() {
        assert!(GroupSpec::new(0.04, 0.01).is_err());
        assert!(GroupSpec::new(0.01, 0.01).is_err());
        assert!(GroupSpec::unchecked(0.01, 0.01).is_ok());
        let g = GroupSpec::new(0.01, 0.04).unwrap();
        assert_eq!(g.nu_r(), 0.02);
        assert_eq!(g.nu_p(), 0.05);
    }

    #[test]
    fn density_at_zero_two_dimensions_closed_form() {
        for &nu in &[0.01f64, 0.3, 2.0] {
            let expected = (1.0 - (-1.0 / (2.0 * nu)).exp()) / std::f64::consts::PI;
            assert_relative_eq!(
                density_at_zero(2, nu).unwrap(),
                expected,
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn equal_variance_control_is_a_coin_flip() {
        let g = GroupSpec::unchecked(0.03, 0.03).unwrap();
        assert_eq!(rich_win_probability(7, &g).unwrap(), 0.5);
    }
}
