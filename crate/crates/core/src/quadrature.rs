//! Globally adaptive Gauss–Legendre quadrature on finite intervals, plus a
//! log-space front end for integrands whose raw values under- or overflow.

use std::sync::OnceLock;

use crate::error::{Error, Result};

const GL_ORDER: usize = 20;
const INITIAL_PANELS: usize = 16;
const MAX_DEPTH: u32 = 64;
const MAX_SEGMENTS: usize = 20_000;

/// Absolute tolerance applied to integrals normalized to a unit peak.
pub const DEFAULT_ABS_TOL: f64 = 1e-12;
/// Relative tolerance, used when tighter than the absolute one.
pub const DEFAULT_REL_TOL: f64 = 1e-13;

fn gauss_legendre() -> &'static ([f64; GL_ORDER], [f64; GL_ORDER]) {
    static RULE: OnceLock<([f64; GL_ORDER], [f64; GL_ORDER])> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = GL_ORDER;
        let mut nodes = [0.0; GL_ORDER];
        let mut weights = [0.0; GL_ORDER];
        for i in 0..n {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for j in 2..=n {
                    let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            nodes[i] = x;
            weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        (nodes, weights)
    })
}

fn gl<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let (nodes, weights) = gauss_legendre();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    nodes
        .iter()
        .zip(weights.iter())
        .map(|(&x, &w)| w * f(mid + half * x))
        .sum::<f64>()
        * half
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
    depth: u32,
}

fn segment<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, depth: u32) -> Segment {
    let m = 0.5 * (a + b);
    let whole = gl(f, a, b);
    let value = gl(f, a, m) + gl(f, m, b);
    Segment {
        a,
        b,
        value,
        err: (whole - value).abs(),
        depth,
    }
}

/// `∫_a^b f` to within `max(abs_tol, rel_tol·|I|)`.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<f64> {
    if !(a.is_finite() && b.is_finite()) || b < a {
        return Err(Error::domain(
            "quadrature",
            format!("bad interval [{a}, {b}]"),
        ));
    }
    if a == b {
        return Ok(0.0);
    }
    let width = (b - a) / INITIAL_PANELS as f64;
    let mut segs: Vec<Segment> = (0..INITIAL_PANELS)
        .map(|i| {
            let lo = a + width * i as f64;
            let hi = if i + 1 == INITIAL_PANELS {
                b
            } else {
                lo + width
            };
            segment(&f, lo, hi, 0)
        })
        .collect();
    loop {
        let total: f64 = segs.iter().map(|s| s.value).sum();
        let total_err: f64 = segs.iter().map(|s| s.err).sum();
        let magnitude: f64 = segs.iter().map(|s| s.value.abs()).sum();
        if !total.is_finite() {
            return Err(Error::non_convergence(
                "quadrature",
                "integrand produced a non-finite value",
            ));
        }
        let tol = abs_tol.max(rel_tol * total.abs());
        if total_err <= tol || total_err <= 50.0 * f64::EPSILON * magnitude {
            return Ok(total);
        }
        let (worst, _) = segs
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.err.total_cmp(&y.1.err))
            .expect("at least one segment");
        let s = segs.swap_remove(worst);
        if s.depth >= MAX_DEPTH || segs.len() >= MAX_SEGMENTS {
            return Err(Error::non_convergence(
                "quadrature",
                format!(
                    "no convergence after {MAX_DEPTH} refinement levels on [{}, {}] (error {total_err:e}, tolerance {tol:e})",
                    s.a, s.b
                ),
            ));
        }
        let m = 0.5 * (s.a + s.b);
        segs.push(segment(&f, s.a, m, s.depth + 1));
        segs.push(segment(&f, m, s.b, s.depth + 1));
    }
}

/// `ln ∫_a^b exp(ln_f)`. The log-integrand is shifted by its maximum over a
/// scan grid before exponentiation, so peaked kernels with huge or tiny raw
/// values integrate without over- or underflow. Non-finite log values
/// (e.g. `-∞` at an endpoint) count as zero mass.
pub fn integrate_log<F: Fn(f64) -> f64>(ln_f: F, a: f64, b: f64) -> Result<f64> {
    const SCAN: usize = 512;
    let mut peak = f64::NEG_INFINITY;
    for i in 0..=SCAN {
        let x = a + (b - a) * i as f64 / SCAN as f64;
        let v = ln_f(x);
        if v.is_finite() && v > peak {
            peak = v;
        }
    }
    if !peak.is_finite() {
        return Err(Error::non_convergence(
            "quadrature",
            "log-integrand has no finite values on the interval",
        ));
    }
    let shifted = |x: f64| {
        let v = ln_f(x);
        if v.is_nan() || v == f64::NEG_INFINITY {
            0.0
        } else {
            (v - peak).exp()
        }
    };
    let value = integrate(shifted, a, b, DEFAULT_ABS_TOL, DEFAULT_REL_TOL)?;
    if !(value > 0.0) {
        return Err(Error::non_convergence(
            "quadrature",
            "log-integrand integrates to zero",
        ));
    }
    Ok(peak + value.ln())
}
