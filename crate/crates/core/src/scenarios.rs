//! Built-in initial-data families.
//!
//! `discrete_labels` realizes the N-species construction
//! `f_0 = ρ_0 ⊗ (1/N) Σ_i δ_{a_i − G_0(x)}` with `a_i = i/N`: every label
//! shares the same spatial quantile grid, so the disintegration recovers the
//! labels exactly with counting quadrature. `gaussian_box` draws a seeded
//! truncated-Gaussian cloud for generic tests.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::measures::{disintegrate_initial, KineticCloud, LabelGrid, ProfileState};
use crate::ot1d::DiscreteMeasure;

/// Initial spatial density of the discrete-labels family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rho0 {
    /// Uniform on `[0, 1]`.
    Uniform,
    /// `¾ (1 − x²)` on `[−1, 1]`.
    TruncatedQuadratic,
}

impl Rho0 {
    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Rho0::Uniform => x.clamp(0.0, 1.0),
            Rho0::TruncatedQuadratic => {
                let x = x.clamp(-1.0, 1.0);
                0.75 * (x - x * x * x / 3.0) + 0.5
            }
        }
    }

    /// Inverse CDF on `(0, 1)`, by bisection for the quadratic case.
    pub fn quantile(&self, u: f64) -> f64 {
        match self {
            Rho0::Uniform => u,
            Rho0::TruncatedQuadratic => {
                let (mut lo, mut hi) = (-1.0f64, 1.0f64);
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    if self.cdf(mid) < u {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            }
        }
    }

    /// Half-width of the support box.
    pub fn support_radius(&self) -> f64 {
        match self {
            Rho0::Uniform => 1.0,
            Rho0::TruncatedQuadratic => 1.0,
        }
    }
}

/// The discrete-labels phase-space cloud: `m` spatial quantile midpoints per
/// label, labels `a_i = i/N`, velocities `a_i − G_0(x)`.
pub fn discrete_labels_cloud(
    n_labels: usize,
    particles_per_label: usize,
    rho0: Rho0,
) -> Result<KineticCloud> {
    if n_labels == 0 || particles_per_label == 0 {
        return Err(Error::Invalid("need at least one label and one particle".into()));
    }
    let n = n_labels as f64;
    let m = particles_per_label;
    let w = 1.0 / (n * m as f64);
    let mut samples = Vec::with_capacity(n_labels * m);
    for i in 1..=n_labels {
        let a = i as f64 / n;
        for k in 0..m {
            let u = (k as f64 + 0.5) / m as f64;
            let x = rho0.quantile(u);
            samples.push((x, a - rho0.cdf(x), w));
        }
    }
    KineticCloud::new(samples)
}

/// Disintegrated form of [`discrete_labels_cloud`]: `N` counting labels with
/// `h_i = 1/N` and `m` equal-mass atoms each.
pub fn discrete_labels_state(
    n_labels: usize,
    particles_per_label: usize,
    rho0: Rho0,
) -> Result<ProfileState> {
    let cloud = discrete_labels_cloud(n_labels, particles_per_label, rho0)?;
    disintegrate_initial(&cloud, n_labels)
}

/// Seeded truncated-Gaussian cloud on `[−r_x, r_x] × [−r_v, r_v]` with equal
/// weights.
pub fn gaussian_box_cloud(r_x: f64, r_v: f64, samples: usize, seed: u64) -> Result<KineticCloud> {
    if samples == 0 {
        return Err(Error::EmptyCloud);
    }
    if !(r_x > 0.0 && r_v > 0.0) {
        return Err(Error::Invalid("support box must have positive half-widths".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = 1.0 / samples as f64;
    let mut out = Vec::with_capacity(samples);
    let draw = |half: f64, rng: &mut ChaCha8Rng| -> f64 {
        // rejection-sampled normal with σ = half/2, truncated to the box
        loop {
            let u1: f64 = rng.random::<f64>().max(1e-300);
            let u2: f64 = rng.random();
            let z = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
            let x = z * half / 2.0;
            if x.abs() <= half {
                return x;
            }
        }
    };
    for _ in 0..samples {
        let x = draw(r_x, &mut rng);
        let v = draw(r_v, &mut rng);
        out.push((x, v, w));
    }
    KineticCloud::new(out)
}

/// The counting-label grid `a_i = i/N`, `μ_i = 1`, `h_i = 1/N` the
/// discrete-labels family lives on.
pub fn counting_grid(n_labels: usize) -> Result<LabelGrid> {
    let n = n_labels as f64;
    LabelGrid::new(
        (1..=n_labels).map(|i| i as f64 / n).collect(),
        vec![1.0; n_labels],
        vec![1.0 / n; n_labels],
    )
}

/// A seeded random state on `grid`: each species gets `m_per_label`
/// equal-mass atoms uniform in `[−r_x, r_x]`.
pub fn random_profile_state(
    grid: &LabelGrid,
    m_per_label: usize,
    r_x: f64,
    rng: &mut ChaCha8Rng,
) -> Result<ProfileState> {
    let species = grid
        .masses()
        .iter()
        .map(|&h| {
            let w = h / m_per_label as f64;
            DiscreteMeasure::new(
                (0..m_per_label).map(|_| (rng.random_range(-r_x..r_x), w)),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    ProfileState::new(grid.clone(), species, r_x)
}
