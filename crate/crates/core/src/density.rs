//! Joint law of the true norm `R = ‖X‖` and the clone distance
//! `S = ‖X + Z‖`, `Z ~ N(0, ν I_k)`.
//!
//! All formulas take `ν`, the per-coordinate variance of the *combined*
//! noise. In the homogeneous model `ν = 2σ²`. Given `R = r`, `S/√ν` is
//! noncentral chi with `k` degrees of freedom and noncentrality `r/√ν`, so
//! the Bessel order is `k/2 − 1`.

use crate::error::{Error, Result};
use crate::quadrature;
use crate::specfun::log_bessel_i;

/// Tolerance on the log-form cross difference below which a grid quadruple
/// counts as satisfying the monotone likelihood ratio inequality.
pub const MLRP_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointDensityParams {
    k: usize,
    nu: f64,
}

impl JointDensityParams {
    pub fn new(k: usize, nu: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::domain(
                "JointDensityParams",
                "dimension k must be at least 1",
            ));
        }
        if !(nu > 0.0) || !nu.is_finite() {
            return Err(Error::domain(
                "JointDensityParams",
                format!("nu = {nu} must be positive"),
            ));
        }
        Ok(JointDensityParams { k, nu })
    }

    /// Homogeneous model with per-clone variance `σ²`.
    pub fn from_clone_variance(k: usize, sigma2: f64) -> Result<Self> {
        Self::new(k, 2.0 * sigma2)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    fn bessel_order(&self) -> f64 {
        0.5 * self.k as f64 - 1.0
    }
}

/// Density of `R`: `k r^{k−1}` on `[0, 1]`.
pub fn marginal_r_density(params: &JointDensityParams, r: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::domain(
            "marginal_r_density",
            format!("r = {r} outside [0, 1]"),
        ));
    }
    let k = params.k as f64;
    Ok(if params.k == 1 {
        1.0
    } else {
        k * r.powf(k - 1.0)
    })
}

fn check_rs(op: &'static str, r: f64, s: f64) -> Result<()> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(Error::domain(op, format!("r = {r} outside (0, 1]")));
    }
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::domain(
            op,
            format!("s = {s} must be positive and finite"),
        ));
    }
    Ok(())
}

/// `ln g_{S|R=r}(s) = (k/2)ln s − (k/2−1)ln r − ln ν − (r²+s²)/(2ν) + ln I_{k/2−1}(rs/ν)`.
pub fn conditional_s_log_density(params: &JointDensityParams, r: f64, s: f64) -> Result<f64> {
    check_rs("conditional_s_log_density", r, s)?;
    let half_k = 0.5 * params.k as f64;
    let nu = params.nu;
    Ok(
        half_k * s.ln() - params.bessel_order() * r.ln() - nu.ln() - (r * r + s * s) / (2.0 * nu)
            + log_bessel_i(params.bessel_order(), r * s / nu)?,
    )
}

/// `ln g_{R,S}(r, s)`, the sum of the marginal and conditional log densities.
pub fn joint_log_density(params: &JointDensityParams, r: f64, s: f64) -> Result<f64> {
    check_rs("joint_log_density", r, s)?;
    Ok(marginal_r_density(params, r)?.ln() + conditional_s_log_density(params, r, s)?)
}

/// `m(s) = E[R | S = s]` by log-space quadrature over `r ∈ [0, 1]`.
///
/// At `s = 0` the kernel reduces to `r^{k−1} e^{−r²/(2ν)}`, which makes
/// `m(0)` the infinite-pool distance.
pub fn conditional_mean_r_given_s(params: &JointDensityParams, s: f64) -> Result<f64> {
    if !(s >= 0.0) || !s.is_finite() {
        return Err(Error::domain(
            "conditional_mean_r_given_s",
            format!("s = {s} must be finite and >= 0"),
        ));
    }
    let nu = params.nu;
    let k = params.k as f64;
    let order = params.bessel_order();
    let kernel = move |r: f64| -> f64 {
        if s == 0.0 {
            let radial = if params.k == 1 {
                0.0
            } else {
                (k - 1.0) * r.ln()
            };
            radial - r * r / (2.0 * nu)
        } else if r <= 0.0 {
            f64::NEG_INFINITY
        } else {
            // the order is at least -1/2 and the argument nonnegative
            0.5 * k * r.ln() - r * r / (2.0 * nu)
                + log_bessel_i(order, r * s / nu).unwrap_or(f64::NAN)
        }
    };
    let den = quadrature::integrate_log(kernel, 0.0, 1.0)?;
    let num = quadrature::integrate_log(
        |r| {
            if r > 0.0 {
                r.ln() + kernel(r)
            } else {
                f64::NEG_INFINITY
            }
        },
        0.0,
        1.0,
    )?;
    Ok((num - den).exp())
}

/// Outcome of a monotone-likelihood-ratio scan.
#[derive(Debug, Clone, PartialEq)]
pub struct MlrpReport {
    /// `max(−[ln g(r,s) + ln g(r′,s′) − ln g(r,s′) − ln g(r′,s)])` over all
    /// `r > r′`, `s > s′` on the grid. Negative when every inequality holds
    /// strictly.
    pub max_violation: f64,
    /// Worst quadruple `(r, r′, s, s′)` when `max_violation` exceeds the tolerance.
    pub witness: Option<(f64, f64, f64, f64)>,
    pub quadruples: usize,
}

impl MlrpReport {
    pub fn passed(&self) -> bool {
        self.witness.is_none()
    }
}

fn check_grid(name: &str, grid: &[f64], lo_open: f64, hi: f64) -> Result<()> {
    if grid.len() < 2 {
        return Err(Error::domain(
            "mlrp_grid_check",
            format!("{name} grid needs at least two points"),
        ));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::domain(
            "mlrp_grid_check",
            format!("{name} grid must be strictly increasing"),
        ));
    }
    if !(grid[0] > lo_open) || !(grid[grid.len() - 1] <= hi) {
        return Err(Error::domain(
            "mlrp_grid_check",
            format!("{name} grid leaves the density's domain"),
        ));
    }
    Ok(())
}

/// Checks the log form of `g(r,s)g(r′,s′) ≥ g(r,s′)g(r′,s)` for every
/// ordered quadruple of the grids, for an arbitrary log density.
pub fn mlrp_check<F>(
    log_density: F,
    r_grid: &[f64],
    s_grid: &[f64],
    tolerance: f64,
) -> Result<MlrpReport>
where
    F: Fn(f64, f64) -> Result<f64>,
{
    check_grid("r", r_grid, 0.0, 1.0)?;
    check_grid("s", s_grid, 0.0, f64::INFINITY)?;
    let table: Vec<Vec<f64>> = r_grid
        .iter()
        .map(|&r| {
            s_grid
                .iter()
                .map(|&s| log_density(r, s))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let mut worst = f64::NEG_INFINITY;
    let mut worst_at = (0, 0, 0, 0);
    let mut count = 0;
    for hi_r in 1..r_grid.len() {
        for lo_r in 0..hi_r {
            for hi_s in 1..s_grid.len() {
                for lo_s in 0..hi_s {
                    let cross = table[hi_r][hi_s] + table[lo_r][lo_s]
                        - table[hi_r][lo_s]
                        - table[lo_r][hi_s];
                    count += 1;
                    // NaN means a broken density; surface it as a violation
                    let violation = if cross.is_nan() {
                        f64::INFINITY
                    } else {
                        -cross
                    };
                    if violation > worst {
                        worst = violation;
                        worst_at = (hi_r, lo_r, hi_s, lo_s);
                    }
                }
            }
        }
    }
    let (a, b, c, d) = worst_at;
    Ok(MlrpReport {
        max_violation: worst,
        witness: (worst > tolerance).then(|| (r_grid[a], r_grid[b], s_grid[c], s_grid[d])),
        quadruples: count,
    })
}

/// [`mlrp_check`] on the model's joint density at [`MLRP_TOLERANCE`].
pub fn mlrp_grid_check(
    params: &JointDensityParams,
    r_grid: &[f64],
    s_grid: &[f64],
) -> Result<MlrpReport> {
    mlrp_check(
        |r, s| joint_log_density(params, r, s),
        r_grid,
        s_grid,
        MLRP_TOLERANCE,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn marginal_values() {
        let p1 = JointDensityParams::new(1, 0.1).unwrap();
        assert_eq!(marginal_r_density(&p1, 0.3).unwrap(), 1.0);
        let p3 = JointDensityParams::new(3, 0.1).unwrap();
        assert_relative_eq!(
            marginal_r_density(&p3, 0.5).unwrap(),
            0.75,
            max_relative = 1e-15
        );
        assert!(marginal_r_density(&p3, 1.5).is_err());
        assert!(marginal_r_density(&p3, -0.1).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(JointDensityParams::new(0, 0.1).is_err());
        assert!(JointDensityParams::new(2, 0.0).is_err());
        assert_eq!(
            JointDensityParams::from_clone_variance(2, 0.05)
                .unwrap()
                .nu(),
            0.1
        );
    }

    #[test]
    fn joint_is_marginal_times_conditional() {
        let p = JointDensityParams::new(6, 0.03).unwrap();
        for &(r, s) in &[(0.2, 0.4), (0.9, 1.3), (1.0, 0.05)] {
            let joint = joint_log_density(&p, r, s).unwrap().exp();
            let split = marginal_r_density(&p, r).unwrap()
                * conditional_s_log_density(&p, r, s).unwrap().exp();
            assert_relative_eq!(joint, split, max_relative = 1e-12);
        }
    }

    #[test]
    fn domain_errors() {
        let p = JointDensityParams::new(2, 0.1).unwrap();
        assert!(conditional_s_log_density(&p, 0.0, 1.0).is_err());
        assert!(conditional_s_log_density(&p, 0.5, 0.0).is_err());
        assert!(conditional_mean_r_given_s(&p, -1.0).is_err());
        assert!(mlrp_grid_check(&p, &[0.5], &[0.1, 0.2]).is_err());
        assert!(mlrp_grid_check(&p, &[0.5, 0.4], &[0.1, 0.2]).is_err());
        assert!(mlrp_grid_check(&p, &[0.5, 1.2], &[0.1, 0.2]).is_err());
        assert!(mlrp_grid_check(&p, &[0.5, 0.9], &[0.0, 0.2]).is_err());
    }

    #[test]
    fn one_dimension_mean_at_zero_matches_worked_example() {
        let p = JointDensityParams::from_clone_variance(1, 0.05f64.powi(2)).unwrap();
        let m0 = conditional_mean_r_given_s(&p, 0.0).unwrap();
        assert!((1.0 / 18.0..1.0 / 17.0).contains(&m0), "{m0}");
    }
}
