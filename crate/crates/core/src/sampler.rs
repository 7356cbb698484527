//! Reproducible random generation.
//!
//! Every random quantity is drawn from a [`Stream`] derived from a
//! [`StreamKey`]: a master seed plus a path of `(label, index)` pairs. The
//! key is hashed (SHA-256) into a ChaCha8 seed, so the stream seen by
//! replication `r` of experiment `e` depends only on `(seed, e, r)` and never
//! on scheduling or worker count.
//!
//! Normals come from `rand_distr`'s ziggurat `StandardNormal`; chi-square and
//! Beta variates from `rand_distr` as well. The versions are pinned in the
//! workspace manifest, which freezes the bit patterns used by golden tests.
//!
//! Clone distances are drawn through an exact low-dimensional reduction of
//! `‖X + Z‖` rather than by materializing `k`-vectors; see [`CloneSampler`].

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, ChiSquared, Distribution, StandardNormal};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Identity of a random stream: master seed plus a labelled path.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StreamKey {
    master_seed: u64,
    path: Vec<(String, u64)>,
}

impl StreamKey {
    pub fn new(master_seed: u64) -> Self {
        StreamKey {
            master_seed,
            path: Vec::new(),
        }
    }

    /// Extends the path by one `(label, index)` step.
    pub fn child(&self, label: &str, index: u64) -> StreamKey {
        let mut path = self.path.clone();
        path.push((label.to_owned(), index));
        StreamKey {
            master_seed: self.master_seed,
            path,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn path(&self) -> &[(String, u64)] {
        &self.path
    }

    fn seed_bytes(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(b"mirrormatch-stream-v1");
        h.update(self.master_seed.to_le_bytes());
        for (label, index) in &self.path {
            h.update((label.len() as u64).to_le_bytes());
            h.update(label.as_bytes());
            h.update(index.to_le_bytes());
        }
        h.finalize().into()
    }

    /// Opens a fresh generator positioned at the start of this stream.
    pub fn stream(&self) -> Stream {
        Stream {
            rng: ChaCha8Rng::from_seed(self.seed_bytes()),
        }
    }
}

/// A deterministic generator owned by a single worker.
#[derive(Debug, Clone)]
pub struct Stream {
    rng: ChaCha8Rng,
}

impl Stream {
    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }
}

impl RngCore for Stream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// A personality vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub coords: Vec<f64>,
}

impl Point {
    pub fn norm(&self) -> f64 {
        self.coords.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

fn check_dim(op: &'static str, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::domain(op, "dimension k must be at least 1"));
    }
    Ok(())
}

fn check_variance(op: &'static str, name: &str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::domain(
            op,
            format!("{name} = {v} must be positive and finite"),
        ));
    }
    Ok(())
}

/// Norm of a uniform draw from the `k`-ball: `U^{1/k}`.
pub fn sample_unit_ball_norm(k: usize, stream: &mut Stream) -> f64 {
    stream.uniform().powf(1.0 / k as f64)
}

/// Uniform point in the `k`-ball: normalized Gaussian direction scaled by
/// `U^{1/k}`.
pub fn sample_unit_ball(k: usize, stream: &mut Stream) -> Result<Point> {
    check_dim("sample_unit_ball", k)?;
    let mut coords: Vec<f64> = (0..k).map(|_| stream.standard_normal()).collect();
    let len = coords.iter().map(|c| c * c).sum::<f64>().sqrt();
    let radius = sample_unit_ball_norm(k, stream);
    // a zero Gaussian vector has probability zero; treat it as the origin
    let scale = if len > 0.0 { radius / len } else { 0.0 };
    coords.iter_mut().for_each(|c| *c *= scale);
    Ok(Point { coords })
}

/// Isotropic Gaussian vector with the given per-coordinate variance.
pub fn sample_gaussian_vector(k: usize, variance: f64, stream: &mut Stream) -> Result<Vec<f64>> {
    check_dim("sample_gaussian_vector", k)?;
    check_variance("sample_gaussian_vector", "variance", variance)?;
    let sd = variance.sqrt();
    Ok((0..k).map(|_| sd * stream.standard_normal()).collect())
}

/// How the subject's clone noise is generated.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, Default, serde::Serialize, serde::Deserialize,
)]
#[serde(rename_all = "kebab-case")]
pub enum CloneMode {
    /// Fresh subject noise for every interaction.
    #[default]
    PerInteraction,
    /// One subject noise vector shared by all interactions.
    FixedSubjectClone,
}

impl CloneMode {
    pub fn as_str(self) -> &'static str {
        match self {
            CloneMode::PerInteraction => "per-interaction",
            CloneMode::FixedSubjectClone => "fixed-subject-clone",
        }
    }
}

impl std::str::FromStr for CloneMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "per-interaction" => Ok(CloneMode::PerInteraction),
            "fixed-subject-clone" => Ok(CloneMode::FixedSubjectClone),
            other => Err(format!(
                "unknown clone mode '{other}' (expected per-interaction or fixed-subject-clone)"
            )),
        }
    }
}

/// One realization of (true distance, clone distance) for a candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CloneDraw {
    /// `‖X_i‖`
    pub true_norm: f64,
    /// `‖Y_{i0} − Y_{0i}‖`
    pub clone_dist: f64,
}

#[derive(Debug, Clone)]
enum Geometry {
    /// `S² = (R + z₁)² + ν·χ²_{k−1}` with `ν` the combined per-coordinate variance.
    PerInteraction {
        sd: f64,
        nu: f64,
        chi: Option<ChiSquared<f64>>,
    },
    /// Subject noise fixed at norm `offset`. Coordinates are taken along the
    /// subject noise (axis 1) and along the in-plane part of the candidate's
    /// direction (axis 2); the remaining `k − 2` are pure candidate noise.
    Fixed {
        offset: f64,
        sd: f64,
        var: f64,
        axis: Option<Beta<f64>>,
        chi: Option<ChiSquared<f64>>,
    },
}

/// Draws [`CloneDraw`]s for one pool with fixed parameters.
///
/// By rotational invariance only the component of the noise along `X` (and,
/// in fixed-subject mode, along the subject noise) matters, so each draw
/// costs O(1) regardless of `k` and has exactly the law of the `k`-vector
/// construction in [`draw_clone_interaction_full`].
#[derive(Debug, Clone)]
pub struct CloneSampler {
    k: usize,
    inv_k: f64,
    geometry: Geometry,
}

impl CloneSampler {
    /// Per-interaction sampler with subject and candidate noise variances.
    pub fn per_interaction(k: usize, sigma_subject2: f64, sigma_other2: f64) -> Result<Self> {
        const OP: &str = "draw_clone_interaction";
        check_dim(OP, k)?;
        check_variance(OP, "sigma_subject2", sigma_subject2)?;
        check_variance(OP, "sigma_other2", sigma_other2)?;
        let nu = sigma_subject2 + sigma_other2;
        Ok(CloneSampler {
            k,
            inv_k: 1.0 / k as f64,
            geometry: Geometry::PerInteraction {
                sd: nu.sqrt(),
                nu,
                chi: (k > 1).then(|| ChiSquared::new((k - 1) as f64).expect("df > 0")),
            },
        })
    }

    /// Sampler conditional on a realized subject noise vector.
    pub fn fixed_subject(k: usize, sigma_other2: f64, subject_noise: &[f64]) -> Result<Self> {
        const OP: &str = "draw_clone_interaction";
        check_dim(OP, k)?;
        check_variance(OP, "sigma_other2", sigma_other2)?;
        if subject_noise.len() != k {
            return Err(Error::domain(
                OP,
                format!(
                    "subject noise has dimension {} but k = {k}",
                    subject_noise.len()
                ),
            ));
        }
        let offset = subject_noise.iter().map(|c| c * c).sum::<f64>().sqrt();
        if !offset.is_finite() {
            return Err(Error::domain(OP, "subject noise must be finite"));
        }
        let half = 0.5 * (k as f64 - 1.0);
        Ok(CloneSampler {
            k,
            inv_k: 1.0 / k as f64,
            geometry: Geometry::Fixed {
                offset,
                sd: sigma_other2.sqrt(),
                var: sigma_other2,
                axis: (k > 1).then(|| Beta::new(half, half).expect("positive shape")),
                chi: (k > 2).then(|| ChiSquared::new((k - 2) as f64).expect("df > 0")),
            },
        })
    }

    pub fn dim(&self) -> usize {
        self.k
    }

    pub fn draw(&self, stream: &mut Stream) -> CloneDraw {
        let r = stream.uniform().powf(self.inv_k);
        let s2 = match &self.geometry {
            Geometry::PerInteraction { sd, nu, chi } => {
                let a = r + sd * stream.standard_normal();
                let rest = chi.as_ref().map_or(0.0, |c| nu * c.sample(stream));
                a * a + rest
            }
            Geometry::Fixed {
                offset,
                sd,
                var,
                axis,
                chi,
            } => {
                let (u1, u2) = match axis {
                    Some(b) => {
                        let u1 = 2.0 * b.sample(stream) - 1.0;
                        (u1, (1.0 - u1 * u1).max(0.0).sqrt())
                    }
                    None => (if stream.uniform() < 0.5 { -1.0 } else { 1.0 }, 0.0),
                };
                let w1 = r * u1 + sd * stream.standard_normal() - offset;
                let w2 = if self.k > 1 {
                    r * u2 + sd * stream.standard_normal()
                } else {
                    0.0
                };
                let rest = chi.as_ref().map_or(0.0, |c| var * c.sample(stream));
                w1 * w1 + w2 * w2 + rest
            }
        };
        CloneDraw {
            true_norm: r,
            clone_dist: s2.sqrt(),
        }
    }
}

fn check_mode(mode: CloneMode, subject_fixed_noise: Option<&[f64]>) -> Result<()> {
    match (mode, subject_fixed_noise) {
        (CloneMode::PerInteraction, None) | (CloneMode::FixedSubjectClone, Some(_)) => Ok(()),
        (CloneMode::PerInteraction, Some(_)) => Err(Error::domain(
            "draw_clone_interaction",
            "subject noise supplied in per-interaction mode",
        )),
        (CloneMode::FixedSubjectClone, None) => Err(Error::domain(
            "draw_clone_interaction",
            "fixed-subject-clone mode requires the subject noise vector",
        )),
    }
}

/// One candidate interaction: `(‖X_i‖, ‖X_i + ε_{i0} − ε_{0i}‖)`.
///
/// Builds a [`CloneSampler`] per call; hot loops should hold one instead.
pub fn draw_clone_interaction(
    k: usize,
    sigma_subject2: f64,
    sigma_other2: f64,
    mode: CloneMode,
    subject_fixed_noise: Option<&[f64]>,
    stream: &mut Stream,
) -> Result<CloneDraw> {
    check_mode(mode, subject_fixed_noise)?;
    let sampler = match subject_fixed_noise {
        None => CloneSampler::per_interaction(k, sigma_subject2, sigma_other2)?,
        Some(noise) => {
            check_variance("draw_clone_interaction", "sigma_subject2", sigma_subject2)?;
            CloneSampler::fixed_subject(k, sigma_other2, noise)?
        }
    };
    Ok(sampler.draw(stream))
}

/// Reference construction with explicit `k`-vectors. Slower, kept as the
/// ground truth for the reduced sampler.
pub fn draw_clone_interaction_full(
    k: usize,
    sigma_subject2: f64,
    sigma_other2: f64,
    mode: CloneMode,
    subject_fixed_noise: Option<&[f64]>,
    stream: &mut Stream,
) -> Result<CloneDraw> {
    check_mode(mode, subject_fixed_noise)?;
    check_variance("draw_clone_interaction", "sigma_subject2", sigma_subject2)?;
    let x = sample_unit_ball(k, stream)?;
    let other = sample_gaussian_vector(k, sigma_other2, stream)?;
    let subject = match subject_fixed_noise {
        Some(noise) => {
            if noise.len() != k {
                return Err(Error::domain(
                    "draw_clone_interaction",
                    "subject noise dimension mismatch",
                ));
            }
            noise.to_vec()
        }
        None => sample_gaussian_vector(k, sigma_subject2, stream)?,
    };
    let dist = x
        .coords
        .iter()
        .zip(&other)
        .zip(&subject)
        .map(|((xi, e_i0), e_0i)| {
            let d = xi + e_i0 - e_0i;
            d * d
        })
        .sum::<f64>()
        .sqrt();
    Ok(CloneDraw {
        true_norm: x.norm(),
        clone_dist: dist,
    })
}
