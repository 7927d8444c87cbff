//! The convex energy driving the flow,
//!
//! ```text
//! J(𝛎) = ¼ ∫∫ |x − y| dρ̄(x) dρ̄(y)  +  Σ_i μ_i ∫ (½ − a_i) x dν^i(x)
//! ```
//!
//! with `ρ̄ = Σ_i μ_i ν^i`, together with the admissible velocity bracket
//! `v^a(x) ∈ [a − G(x), a − G⁻(x)]` and the midpoint selection used as the
//! flow velocity at atoms.

use crate::error::{Error, Result};
use crate::measures::{marginal_rho, ProfileState};
use crate::ot1d::{self, DiscreteMeasure};

/// The two parts of the energy. `total = j0/4 + j1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyReport {
    /// Interaction integral `∫∫ |x−y| dρ̄ dρ̄` (diagonal contributes 0).
    pub j0: f64,
    /// Linear part `Σ_i μ_i Σ_j (½ − a_i) w_ij x_ij`.
    pub j1: f64,
    pub total: f64,
}

/// One velocity per atom of each species, aligned with
/// `ProfileState::species`.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityField {
    pub per_label: Vec<Vec<f64>>,
}

impl VelocityField {
    pub fn sup_norm(&self) -> f64 {
        self.per_label
            .iter()
            .flat_map(|v| v.iter())
            .fold(0.0f64, |m, &v| m.max(v.abs()))
    }
}

/// Interaction integral of a weighted atom list in O(n log n) via sorting and
/// prefix sums: `ΣΣ m_p m_q |x_p − x_q| = 2 Σ_q m_q (x_q M_{<q} − S_{<q})`.
/// Sorts `atoms` in place.
pub fn interaction_integral(atoms: &mut [(f64, f64)]) -> f64 {
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut mass_before = 0.0;
    let mut moment_before = 0.0;
    let mut acc = 0.0;
    for &(x, m) in atoms.iter() {
        acc += m * (x * mass_before - moment_before);
        mass_before += m;
        moment_before += m * x;
    }
    2.0 * acc
}

/// O(n²) reference for the interaction integral, kept as an independent
/// check of the prefix-sum path.
pub fn j0_pairwise_reference(atoms: &[(f64, f64)]) -> f64 {
    let mut acc = 0.0;
    for &(x, mx) in atoms {
        for &(y, my) in atoms {
            acc += mx * my * (x - y).abs();
        }
    }
    acc
}

/// Evaluates the energy of a state.
pub fn energy(state: &ProfileState) -> EnergyReport {
    let mut atoms = state.flattened_atoms();
    let j0 = interaction_integral(&mut atoms);
    let mut j1 = 0.0;
    for (i, s) in state.species().iter().enumerate() {
        let mu = state.grid().quad_weights()[i];
        let a = state.grid().labels()[i];
        let lin: f64 = s.atoms().map(|(x, w)| w * x).sum();
        j1 += mu * (0.5 - a) * lin;
    }
    EnergyReport { j0, j1, total: 0.25 * j0 + j1 }
}

/// The admissible-velocity bracket `[a_i − G(x), a_i − G⁻(x)]` at atom `j`
/// of species `i`, with `G, G⁻` the CDFs of the given marginal.
pub fn velocity_bracket_at(
    rho: &DiscreteMeasure,
    label: f64,
    x: f64,
) -> (f64, f64) {
    let (g_minus, g) = rho.cdf_pair(x);
    (label - g, label - g_minus)
}

/// Bracket for a specific atom of the state (recomputes the marginal; batch
/// callers should use [`velocity_bracket_at`] with a cached marginal).
pub fn velocity_bracket(state: &ProfileState, label_index: usize, atom_index: usize) -> (f64, f64) {
    let rho = marginal_rho(state);
    let a = state.grid().labels()[label_index];
    let x = state.species()[label_index].positions()[atom_index];
    velocity_bracket_at(&rho, a, x)
}

/// Midpoint selection `v = a − (G(x) + G⁻(x))/2`, the symmetric admissible
/// velocity. This is the same `(G + G⁻)/2` term the Euler-Lagrange equation
/// of the implicit step produces, and it reduces to the classical velocity
/// `a − G(x)` wherever the marginal has no atom.
pub fn select_velocity(state: &ProfileState) -> VelocityField {
    let rho = marginal_rho(state);
    let per_label = state
        .species()
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let a = state.grid().labels()[i];
            s.positions().iter().map(|&x| a - rho.cdf_mid(x)).collect()
        })
        .collect();
    VelocityField { per_label }
}

/// The monotonicity form
/// `Σ_i μ_i ∫ (w1(y) − w2(z)) (y − z) dγ_i(y, z)` over the per-label
/// monotone couplings, with `w = −v`. Nonnegative (up to tolerance) whenever
/// both fields are admissible velocities.
pub fn monotonicity_gap(
    s1: &ProfileState,
    s2: &ProfileState,
    v1: &VelocityField,
    v2: &VelocityField,
) -> Result<f64> {
    if s1.grid() != s2.grid() {
        return Err(Error::GridMismatch);
    }
    let mut acc = 0.0;
    for (i, (a, b)) in s1.species().iter().zip(s2.species()).enumerate() {
        if a.is_empty() && b.is_empty() {
            continue;
        }
        let mu = s1.grid().quad_weights()[i];
        let plan = ot1d::monotone_coupling(a, b)?;
        for &(p, q, m) in &plan.pairs {
            let y = a.positions()[p];
            let z = b.positions()[q];
            let w1 = -v1.per_label[i][p];
            let w2 = -v2.per_label[i][q];
            acc += mu * m * (w1 - w2) * (y - z);
        }
    }
    Ok(acc)
}
