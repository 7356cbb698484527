//! Monte Carlo estimators for the in-person and AI regimes.
//!
//! Replications are independent work units. Replication `r` of an estimator
//! draws from the stream `seed / (label, k) / ("rep", r)`, runs on whatever
//! rayon pool is current, and the per-replication values are reduced
//! sequentially in replication order. Results are therefore bit-identical for
//! any worker count; use [`with_workers`] to pin the pool size.

use rayon::prelude::*;

use crate::analytic::GroupSpec;
use crate::error::{Error, Result};
use crate::sampler::{
    sample_gaussian_vector, sample_unit_ball_norm, CloneDraw, CloneMode, CloneSampler, Stream,
    StreamKey,
};

/// Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub reps: u64,
}

impl Estimate {
    /// Mean and `sd/√n` (sample standard deviation), summed left to right.
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        let n = samples.len();
        if n < 2 {
            return Err(Error::domain(
                "Estimate",
                "need at least two replications for a standard error",
            ));
        }
        let mean = samples.iter().sum::<f64>() / n as f64;
        let ss = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>();
        let sd = (ss / (n - 1) as f64).sqrt();
        Ok(Estimate {
            mean,
            std_error: sd / (n as f64).sqrt(),
            reps: n as u64,
        })
    }

    /// `|mean − target| ≤ z·SE`.
    pub fn within(&self, target: f64, z: f64) -> bool {
        (self.mean - target).abs() <= z * self.std_error
    }
}

/// Runs `f` on a dedicated pool with `workers` threads.
pub fn with_workers<R, F>(workers: usize, f: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("thread pool")
        .install(f)
}

fn replicate<T, F>(reps: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    (0..reps).into_par_iter().map(f).collect()
}

fn check_reps(op: &'static str, reps: u64) -> Result<()> {
    if reps < 2 {
        return Err(Error::domain(op, format!("reps = {reps}; need at least 2")));
    }
    Ok(())
}

fn check_count(op: &'static str, name: &str, v: u64) -> Result<()> {
    if v == 0 {
        return Err(Error::domain(op, format!("{name} must be at least 1")));
    }
    Ok(())
}

fn rep_key(seed: u64, label: &str, k: usize, rep: u64) -> StreamKey {
    StreamKey::new(seed)
        .child(label, k as u64)
        .child("rep", rep)
}

/// Mean of the smallest norm among `m` uniform ball draws.
pub fn estimate_d_ip(k: usize, m: u64, reps: u64, master_seed: u64) -> Result<Estimate> {
    check_count("estimate_d_ip", "k", k as u64)?;
    check_count("estimate_d_ip", "m", m)?;
    check_reps("estimate_d_ip", reps)?;
    let samples = replicate(reps, |rep| {
        let mut stream = rep_key(master_seed, "d_ip", k, rep).stream();
        Ok((0..m)
            .map(|_| sample_unit_ball_norm(k, &mut stream))
            .fold(f64::INFINITY, f64::min))
    })?;
    Estimate::from_samples(&samples)
}

/// Index of the smallest clone distance; the lowest index wins ties.
pub fn argmin_clone(draws: &[CloneDraw]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, d) in draws.iter().enumerate() {
        if best.map_or(true, |b| d.clone_dist < draws[b].clone_dist) {
            best = Some(i);
        }
    }
    best
}

/// Winner index after each prefix `1..=len` of `draws`.
pub fn prefix_winners(draws: &[CloneDraw]) -> Vec<usize> {
    let mut out = Vec::with_capacity(draws.len());
    let mut best = 0;
    for (i, d) in draws.iter().enumerate() {
        if i == 0 || d.clone_dist < draws[best].clone_dist {
            best = i;
        }
        out.push(best);
    }
    out
}

fn pool_sampler(
    k: usize,
    sigma_subject2: f64,
    sigma_other2: f64,
    mode: CloneMode,
    stream: &mut Stream,
) -> Result<CloneSampler> {
    match mode {
        CloneMode::PerInteraction => CloneSampler::per_interaction(k, sigma_subject2, sigma_other2),
        CloneMode::FixedSubjectClone => {
            let noise = sample_gaussian_vector(k, sigma_subject2, stream)?;
            CloneSampler::fixed_subject(k, sigma_other2, &noise)
        }
    }
}

/// True norm of the clone-distance minimizer among `n` candidates, averaged
/// over replications.
pub fn estimate_d_ai(
    k: usize,
    n: u64,
    noise_variance_per_clone: f64,
    reps: u64,
    clone_mode: CloneMode,
    master_seed: u64,
) -> Result<Estimate> {
    check_count("estimate_d_ai", "k", k as u64)?;
    check_count("estimate_d_ai", "n", n)?;
    check_reps("estimate_d_ai", reps)?;
    let var = noise_variance_per_clone;
    // validates the variance once up front
    CloneSampler::per_interaction(k, var, var)?;
    let samples = replicate(reps, |rep| {
        let mut stream = rep_key(master_seed, "d_ai", k, rep).stream();
        let sampler = pool_sampler(k, var, var, clone_mode, &mut stream)?;
        let mut best = f64::INFINITY;
        let mut winner = f64::NAN;
        for _ in 0..n {
            let d = sampler.draw(&mut stream);
            if d.clone_dist < best {
                best = d.clone_dist;
                winner = d.true_norm;
            }
        }
        Ok(winner)
    })?;
    Estimate::from_samples(&samples)
}

/// Coupled estimates of `d_AI(n)` for `n = 1..=n_max`: every replication
/// draws one pool of `n_max` candidates and scores each prefix, so all `n`
/// share a probability space. Element `n − 1` holds the estimate for `n`.
pub fn coupled_monotonicity_test(
    k: usize,
    noise_variance_per_clone: f64,
    n_max: u64,
    reps: u64,
    master_seed: u64,
) -> Result<Vec<Estimate>> {
    if n_max < 2 {
        return Err(Error::domain(
            "coupled_monotonicity_test",
            "n_max must be at least 2",
        ));
    }
    check_reps("coupled_monotonicity_test", reps)?;
    let var = noise_variance_per_clone;
    let sampler = CloneSampler::per_interaction(k, var, var)?;
    let paths = replicate(reps, |rep| {
        let mut stream = rep_key(master_seed, "monotone", k, rep).stream();
        let mut best = f64::INFINITY;
        let mut winner = f64::NAN;
        let mut out = Vec::with_capacity(n_max as usize);
        for _ in 0..n_max {
            let d = sampler.draw(&mut stream);
            if d.clone_dist < best {
                best = d.clone_dist;
                winner = d.true_norm;
            }
            out.push(winner);
        }
        Ok(out)
    })?;
    (0..n_max as usize)
        .map(|i| {
            let column: Vec<f64> = paths.iter().map(|p| p[i]).collect();
            Estimate::from_samples(&column)
        })
        .collect()
}

/// Frequency with which the global clone-distance minimizer over `n`
/// data-rich and `n` data-poor candidates is data-rich. Ties go to the
/// data-rich pool.
pub fn estimate_group_win_rate(
    k: usize,
    group: &GroupSpec,
    n: u64,
    reps: u64,
    master_seed: u64,
) -> Result<Estimate> {
    check_count("estimate_group_win_rate", "k", k as u64)?;
    check_count("estimate_group_win_rate", "n", n)?;
    check_reps("estimate_group_win_rate", reps)?;
    let rich = CloneSampler::per_interaction(k, group.sigma_r2, group.sigma_r2)?;
    let poor = CloneSampler::per_interaction(k, group.sigma_r2, group.sigma_p2)?;
    let samples = replicate(reps, |rep| {
        let mut stream = rep_key(master_seed, "groups", k, rep).stream();
        let min_r = (0..n)
            .map(|_| rich.draw(&mut stream).clone_dist)
            .fold(f64::INFINITY, f64::min);
        let min_p = (0..n)
            .map(|_| poor.draw(&mut stream).clone_dist)
            .fold(f64::INFINITY, f64::min);
        Ok(if min_r <= min_p { 1.0 } else { 0.0 })
    })?;
    Estimate::from_samples(&samples)
}

/// Which search the subject commits to at the start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    InPerson,
    AiPlatform,
}

/// Stopping rule families that can be searched over.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopRule {
    /// Stop after exactly `t` periods.
    FixedT(u64),
    /// Stop as soon as the best observation so far is `≤ theta` (the true
    /// norm in person, the clone distance on the platform), else at `cap`.
    Threshold { theta: f64, cap: u64 },
}

impl StopRule {
    fn cap(&self) -> u64 {
        match *self {
            StopRule::FixedT(t) => t,
            StopRule::Threshold { cap, .. } => cap,
        }
    }
}

/// Search cost as a function of the stopping time `τ ≥ 1`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cost {
    Affine {
        fixed: f64,
        per_step: f64,
    },
    /// `table[τ − 1]`.
    Table(Vec<f64>),
}

impl Cost {
    pub fn zero() -> Self {
        Cost::Affine {
            fixed: 0.0,
            per_step: 0.0,
        }
    }

    pub fn at(&self, tau: u64) -> f64 {
        match self {
            Cost::Affine { fixed, per_step } => fixed + per_step * tau as f64,
            Cost::Table(t) => t[(tau - 1) as usize],
        }
    }

    fn validate(&self, cap: u64) -> Result<()> {
        const OP: &str = "evaluate_seq_policy";
        match self {
            Cost::Affine { fixed, per_step } => {
                if !fixed.is_finite() || !(*per_step >= 0.0) || !per_step.is_finite() {
                    return Err(Error::domain(
                        OP,
                        "affine cost needs finite values and a nonnegative slope",
                    ));
                }
            }
            Cost::Table(t) => {
                if (t.len() as u64) < cap {
                    return Err(Error::domain(
                        OP,
                        format!("cost table has {} entries, cap is {cap}", t.len()),
                    ));
                }
                if t.iter().any(|c| !c.is_finite()) || t.windows(2).any(|w| w[1] < w[0]) {
                    return Err(Error::domain(
                        OP,
                        "cost table must be finite and nondecreasing",
                    ));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SeqSearchPolicy {
    pub regime: Regime,
    pub rule: StopRule,
    pub cost_ip: Cost,
    pub cost_ai: Cost,
    /// Platform entry fee.
    pub kappa: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SeqOutcome {
    /// Expected payoff (negative distance minus costs).
    pub payoff: Estimate,
    /// Replications where a threshold rule hit its cap without firing.
    pub truncated: u64,
}

/// Simulates a sequential search policy on i.i.d. period draws.
///
/// In person the payoff is `−min‖X_t‖ − c_IP(τ)`; on the platform it is
/// `−‖X_{i*}‖ − c_AI(τ) − κ` with `i*` the clone-distance minimizer so far.
/// Replication `r` uses the same stream for every policy at a given `k`.
pub fn evaluate_seq_policy(
    k: usize,
    noise_variance_per_clone: f64,
    policy: &SeqSearchPolicy,
    reps: u64,
    master_seed: u64,
) -> Result<SeqOutcome> {
    const OP: &str = "evaluate_seq_policy";
    check_count(OP, "k", k as u64)?;
    check_reps(OP, reps)?;
    let cap = policy.rule.cap();
    if cap == 0 {
        return Err(Error::domain(OP, "stopping horizon must be at least 1"));
    }
    if let StopRule::Threshold { theta, .. } = policy.rule {
        if theta.is_nan() {
            return Err(Error::domain(OP, "threshold is NaN"));
        }
    }
    if !(policy.kappa >= 0.0) || !policy.kappa.is_finite() {
        return Err(Error::domain(
            OP,
            "platform fee kappa must be finite and nonnegative",
        ));
    }
    policy.cost_ip.validate(cap)?;
    policy.cost_ai.validate(cap)?;
    let var = noise_variance_per_clone;
    let sampler = CloneSampler::per_interaction(k, var, var)?;
    let theta = match policy.rule {
        StopRule::FixedT(_) => f64::NEG_INFINITY,
        StopRule::Threshold { theta, .. } => theta,
    };
    let threshold_rule = matches!(policy.rule, StopRule::Threshold { .. });
    let runs = replicate(reps, |rep| {
        let mut stream = rep_key(master_seed, "seq", k, rep).stream();
        let mut tau = 0;
        let mut fired = false;
        let payoff = match policy.regime {
            Regime::InPerson => {
                let mut best = f64::INFINITY;
                while tau < cap {
                    tau += 1;
                    best = best.min(sample_unit_ball_norm(k, &mut stream));
                    if best <= theta {
                        fired = true;
                        break;
                    }
                }
                -best - policy.cost_ip.at(tau)
            }
            Regime::AiPlatform => {
                let mut best = f64::INFINITY;
                let mut winner = f64::NAN;
                while tau < cap {
                    tau += 1;
                    let d = sampler.draw(&mut stream);
                    if d.clone_dist < best {
                        best = d.clone_dist;
                        winner = d.true_norm;
                    }
                    if best <= theta {
                        fired = true;
                        break;
                    }
                }
                -winner - policy.cost_ai.at(tau) - policy.kappa
            }
        };
        Ok((payoff, threshold_rule && !fired))
    })?;
    let payoffs: Vec<f64> = runs.iter().map(|r| r.0).collect();
    Ok(SeqOutcome {
        payoff: Estimate::from_samples(&payoffs)?,
        truncated: runs.iter().filter(|r| r.1).count() as u64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn estimate_needs_two_samples() {
        assert!(Estimate::from_samples(&[1.0]).is_err());
        let e = Estimate::from_samples(&[1.0, 3.0]).unwrap();
        assert_eq!(e.mean, 2.0);
        assert!((e.std_error - 1.0).abs() < 1e-15);
    }

    #[test]
    fn argmin_prefers_lowest_index() {
        let d = |s| CloneDraw {
            true_norm: 0.5,
            clone_dist: s,
        };
        assert_eq!(argmin_clone(&[d(0.3), d(0.1), d(0.1)]), Some(1));
        assert_eq!(argmin_clone(&[]), None);
        assert_eq!(
            prefix_winners(&[d(0.3), d(0.3), d(0.2), d(0.25)]),
            vec![0, 0, 2, 2]
        );
    }

    #[test]
    fn rejects_degenerate_inputs() {
        assert!(estimate_d_ip(3, 0, 10, 1).is_err());
        assert!(estimate_d_ip(3, 2, 1, 1).is_err());
        assert!(estimate_d_ai(3, 0, 0.1, 10, CloneMode::PerInteraction, 1).is_err());
        assert!(estimate_d_ai(3, 5, -0.1, 10, CloneMode::PerInteraction, 1).is_err());
        assert!(coupled_monotonicity_test(3, 0.1, 1, 10, 1).is_err());
    }

    #[test]
    fn seq_policy_validation() {
        let mut p = SeqSearchPolicy {
            regime: Regime::InPerson,
            rule: StopRule::FixedT(3),
            cost_ip: Cost::Table(vec![0.0, 0.1]),
            cost_ai: Cost::zero(),
            kappa: 0.0,
        };
        assert!(evaluate_seq_policy(2, 0.01, &p, 10, 1).is_err());
        p.cost_ip = Cost::Table(vec![0.0, 0.2, 0.1]);
        assert!(evaluate_seq_policy(2, 0.01, &p, 10, 1).is_err());
        p.cost_ip = Cost::Table(vec![0.0, 0.1, 0.2]);
        assert!(evaluate_seq_policy(2, 0.01, &p, 10, 1).is_ok());
        p.kappa = -1.0;
        assert!(evaluate_seq_policy(2, 0.01, &p, 10, 1).is_err());
    }

    #[test]
    fn never_firing_threshold_is_flagged() {
        let p = SeqSearchPolicy {
            regime: Regime::AiPlatform,
            rule: StopRule::Threshold {
                theta: -1.0,
                cap: 5,
            },
            cost_ip: Cost::zero(),
            cost_ai: Cost::zero(),
            kappa: 0.0,
        };
        let out = evaluate_seq_policy(3, 0.01, &p, 20, 9).unwrap();
        assert_eq!(out.truncated, 20);
    }
}
