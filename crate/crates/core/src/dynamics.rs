//! Independent dynamical oracles used to cross-validate the gradient flow.
//!
//! None of these share code with the JKO path: the label ODE integrates
//! `ẋ = a − G_t(x)` directly, the second-order ODE integrates the original
//! kinetic characteristics with a kernel-estimated density, and the Burgers
//! system advects the per-label CDFs on a fixed grid. All three are explicit
//! first-order schemes intended for the pre-shock regime; shocks are
//! *detected* and reported, never repaired.

use crate::energy::{self, VelocityField};
use crate::error::{Error, Result};
use crate::jko::Trajectory;
use crate::measures::{product_distance, KineticCloud, LabelGrid, ProfileState};
use crate::ot1d::DiscreteMeasure;

/// Ordering tolerance of the shock detectors.
const SHOCK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy)]
pub struct CharacteristicsConfig {
    pub dt: f64,
    pub horizon: f64,
    /// Record a state every `save_every` steps (the final state is always
    /// recorded). Integration accuracy is unaffected.
    pub save_every: usize,
}

impl CharacteristicsConfig {
    pub fn new(dt: f64, horizon: f64) -> Self {
        Self { dt, horizon, save_every: 1 }
    }

    pub fn with_save_every(mut self, save_every: usize) -> Self {
        self.save_every = save_every.max(1);
        self
    }
}

/// Output of the label-ODE integrator: a trajectory of recorded states plus
/// the first time two same-label particles inverted their ordering.
#[derive(Debug, Clone)]
pub struct CharacteristicsRun {
    pub trajectory: Trajectory,
    pub shock_time: Option<f64>,
}

/// Midpoint CDF values at each particle of a weighted list:
/// `below + tie/2` per run of coincident positions.
fn midpoint_cdf_at(particles: &[(f64, f64)]) -> Vec<f64> {
    let n = particles.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| particles[a].0.total_cmp(&particles[b].0));
    let mut out = vec![0.0; n];
    let mut below = 0.0;
    let mut k = 0;
    while k < n {
        let x = particles[order[k]].0;
        let mut j = k;
        let mut tie = 0.0;
        while j < n && particles[order[j]].0 == x {
            tie += particles[order[j]].1;
            j += 1;
        }
        for &idx in &order[k..j] {
            out[idx] = below + 0.5 * tie;
        }
        below += tie;
        k = j;
    }
    out
}

/// Integrates the label-parametrized characteristics `ẋ = a − G_mid(x)` by
/// explicit Euler, with `G_mid` the midpoint CDF of the evolving marginal.
pub fn integrate_characteristics(
    s0: &ProfileState,
    cfg: &CharacteristicsConfig,
) -> Result<CharacteristicsRun> {
    if !(cfg.dt > 0.0) {
        return Err(Error::Invalid("dt must be positive".into()));
    }
    let grid = s0.grid().clone();
    let n_steps = (cfg.horizon / cfg.dt).ceil() as usize;

    // per-label particle lists (position, species weight), sorted
    let mut particles: Vec<Vec<(f64, f64)>> = s0
        .species()
        .iter()
        .map(|s| s.atoms().collect::<Vec<_>>())
        .collect();

    let mut times = vec![0.0];
    let mut states = vec![s0.clone()];
    let mut velocities: Vec<VelocityField> = Vec::new();
    let mut energies = vec![energy::energy(s0)];
    let mut step_distances = Vec::new();
    let mut shock_time = None;

    let record = |particles: &[Vec<(f64, f64)>],
                  t: f64,
                  times: &mut Vec<f64>,
                  states: &mut Vec<ProfileState>,
                  velocities: &mut Vec<VelocityField>,
                  energies: &mut Vec<crate::energy::EnergyReport>,
                  step_distances: &mut Vec<f64>|
     -> Result<()> {
        let species = particles
            .iter()
            .map(|ps| DiscreteMeasure::new(ps.iter().copied()))
            .collect::<Result<Vec<_>>>()?;
        let radius = species
            .iter()
            .map(DiscreteMeasure::support_radius)
            .fold(states[0].radius(), f64::max);
        let state = ProfileState::new(grid.clone(), species, radius)?;
        let v = energy::select_velocity(&state);
        let prev = states.last().expect("initial state recorded");
        step_distances.push(product_distance(&state, prev)?);
        energies.push(energy::energy(&state));
        velocities.push(v);
        states.push(state);
        times.push(t);
        Ok(())
    };

    for k in 0..n_steps {
        // marginal of the current configuration, μ-weighted
        let mut flat: Vec<(f64, f64)> = Vec::new();
        let mut spans = Vec::with_capacity(particles.len());
        for (i, ps) in particles.iter().enumerate() {
            let mu = grid.quad_weights()[i];
            let start = flat.len();
            flat.extend(ps.iter().map(|&(x, w)| (x, w * mu)));
            spans.push(start..flat.len());
        }
        let gmid = midpoint_cdf_at(&flat);

        let t = (k as f64 + 1.0) * cfg.dt;
        for (i, ps) in particles.iter_mut().enumerate() {
            let a = grid.labels()[i];
            let span = spans[i].clone();
            for (p, g_idx) in ps.iter_mut().zip(span) {
                p.0 += cfg.dt * (a - gmid[g_idx]);
            }
        }

        // same-label ordering inversion is the shock signal
        if shock_time.is_none() {
            'outer: for ps in &particles {
                for w in ps.windows(2) {
                    if w[1].0 < w[0].0 - SHOCK_TOL {
                        shock_time = Some(t);
                        break 'outer;
                    }
                }
            }
        }

        if (k + 1) % cfg.save_every == 0 || k + 1 == n_steps {
            record(
                &particles,
                t,
                &mut times,
                &mut states,
                &mut velocities,
                &mut energies,
                &mut step_distances,
            )?;
        }
    }

    Ok(CharacteristicsRun {
        trajectory: Trajectory { times, states, velocities, energies, step_distances },
        shock_time,
    })
}

/// First-integral residual of a label-ODE run:
/// `max |v + G_mid(x) − a|` over recorded states. Zero by construction up to
/// floating rounding, since the recorded velocities are `a − G_mid(x)`.
pub fn first_integral_residual_characteristics(run: &CharacteristicsRun) -> f64 {
    let mut worst = 0.0f64;
    for (state, field) in run.trajectory.states[1..]
        .iter()
        .zip(&run.trajectory.velocities)
    {
        let flat: Vec<(f64, f64)> = state.flattened_atoms();
        let gmid = midpoint_cdf_at(&flat);
        let mut idx = 0;
        for (i, s) in state.species().iter().enumerate() {
            let a = state.grid().labels()[i];
            for j in 0..s.len() {
                let v = field.per_label[i][j];
                worst = worst.max((v + gmid[idx] - a).abs());
                idx += 1;
            }
        }
    }
    worst
}

// ---------------------------------------------------------------------------
// second-order kinetic oracle
// ---------------------------------------------------------------------------

/// History of the second-order characteristics integration. `labels` stores
/// the conserved quantity `v_0 + Ĝ_0(x_0)` computed with the *smoothed* CDF,
/// which the kernel dynamics preserves exactly in continuous time.
#[derive(Debug, Clone)]
pub struct KineticHistory {
    pub times: Vec<f64>,
    pub positions: Vec<Vec<f64>>,
    pub velocities: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub labels: Vec<f64>,
    pub bandwidth: f64,
}

/// Triangular kernel `(1 − |u|/h)/h` on `[−h, h]`.
fn kernel(u: f64, h: f64) -> f64 {
    let t = 1.0 - (u / h).abs();
    if t > 0.0 {
        t / h
    } else {
        0.0
    }
}

/// CDF of the triangular kernel.
fn kernel_cdf(u: f64, h: f64) -> f64 {
    if u <= -h {
        0.0
    } else if u >= h {
        1.0
    } else if u < 0.0 {
        let s = (u + h) / h;
        0.5 * s * s
    } else {
        let s = (h - u) / h;
        1.0 - 0.5 * s * s
    }
}

/// Smoothed CDF `Ĝ(x) = Σ w_q Φ_h(x − x_q)` including every sample.
fn smoothed_cdf(x: f64, positions: &[f64], weights: &[f64], h: f64) -> f64 {
    positions
        .iter()
        .zip(weights)
        .map(|(&z, &w)| w * kernel_cdf(x - z, h))
        .sum()
}

/// Integrates the second-order characteristics
/// `ẋ = v, v̇ = −ρ̂(x) v + m̂(x)` with `ρ̂, m̂` estimated from the particle
/// cloud by a fixed-bandwidth triangular kernel (`2 R_x / √M`), excluding
/// each particle's self-interaction.
pub fn integrate_second_order(
    f0: &KineticCloud,
    dt: f64,
    horizon: f64,
    save_every: usize,
) -> Result<KineticHistory> {
    if !(dt > 0.0) {
        return Err(Error::Invalid("dt must be positive".into()));
    }
    if f0.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let save_every = save_every.max(1);
    let (r_x, _) = f0.support_box();
    let m = f0.len();
    let bandwidth = 2.0 * r_x.max(1e-9) / (m as f64).sqrt();

    let mut x: Vec<f64> = f0.samples().iter().map(|s| s.0).collect();
    let mut v: Vec<f64> = f0.samples().iter().map(|s| s.1).collect();
    let weights: Vec<f64> = f0.samples().iter().map(|s| s.2).collect();
    let labels: Vec<f64> = x
        .iter()
        .zip(&v)
        .map(|(&xi, &vi)| vi + smoothed_cdf(xi, &x, &weights, bandwidth))
        .collect();

    let n_steps = (horizon / dt).ceil() as usize;
    let mut times = vec![0.0];
    let mut positions = vec![x.clone()];
    let mut velocities = vec![v.clone()];

    for k in 0..n_steps {
        let mut ax = vec![0.0; m];
        for p in 0..m {
            let mut rho = 0.0;
            let mut mom = 0.0;
            for q in 0..m {
                if q == p {
                    continue;
                }
                let kq = kernel(x[p] - x[q], bandwidth) * weights[q];
                rho += kq;
                mom += kq * v[q];
            }
            ax[p] = -rho * v[p] + mom;
        }
        for p in 0..m {
            x[p] += dt * v[p];
            v[p] += dt * ax[p];
        }
        if (k + 1) % save_every == 0 || k + 1 == n_steps {
            times.push((k as f64 + 1.0) * dt);
            positions.push(x.clone());
            velocities.push(v.clone());
        }
    }

    Ok(KineticHistory { times, positions, velocities, weights, labels, bandwidth })
}

/// Genuine first-integral residual
/// `max_t max_p |V_t + Ĝ_t(X_t) − (v_0 + Ĝ_0(x_0))|` of a second-order
/// history, evaluated with the same smoothed CDF the dynamics used. O(dt)
/// for the explicit Euler scheme.
pub fn first_integral_residual(history: &KineticHistory) -> f64 {
    let mut worst = 0.0f64;
    for (xs, vs) in history.positions.iter().zip(&history.velocities) {
        for (p, (&x, &v)) in xs.iter().zip(vs).enumerate() {
            let g = smoothed_cdf(x, xs, &history.weights, history.bandwidth);
            worst = worst.max((v + g - history.labels[p]).abs());
        }
    }
    worst
}

impl KineticHistory {
    /// Bins the particles of recorded state `time_index` into the labels of
    /// `grid` (by nearest label) and assembles a `ProfileState`, for
    /// distance comparisons against other integrators.
    pub fn state_at(&self, time_index: usize, grid: &LabelGrid) -> Result<ProfileState> {
        let xs = self
            .positions
            .get(time_index)
            .ok_or_else(|| Error::Invalid(format!("no recorded state {time_index}")))?;
        let mut bins: Vec<Vec<(f64, f64)>> = vec![Vec::new(); grid.len()];
        for (p, &x) in xs.iter().enumerate() {
            let lab = self.labels[p];
            let i = grid
                .labels()
                .iter()
                .enumerate()
                .min_by(|(_, a), (_, b)| {
                    (lab - **a).abs().total_cmp(&(lab - **b).abs())
                })
                .map(|(i, _)| i)
                .expect("grid is nonempty");
            // species atoms carry w/μ so that Σ μ_i ν^i has unit mass
            bins[i].push((x, self.weights[p] / grid.quad_weights()[i]));
        }
        let species = bins
            .into_iter()
            .map(DiscreteMeasure::new)
            .collect::<Result<Vec<_>>>()?;
        let radius = species
            .iter()
            .map(DiscreteMeasure::support_radius)
            .fold(1.0, f64::max);
        ProfileState::new(grid.clone(), species, radius)
    }
}

// ---------------------------------------------------------------------------
// Burgers system for the per-label CDFs
// ---------------------------------------------------------------------------

/// Grid discretization of the system
/// `∂_t G^i + (a_i − Σ_j G^j) ∂_x G^i = 0`.
#[derive(Debug, Clone)]
pub struct BurgersState {
    labels: Vec<f64>,
    masses: Vec<f64>,
    grid: Vec<f64>,
    values: Vec<Vec<f64>>,
    time: f64,
    shock_time: Option<f64>,
}

impl BurgersState {
    /// `values[i][m] = G^i(x_m)`; each profile must be nondecreasing with
    /// range inside `[0, h_i]`, and `Σ_i G^i ≤ 1` nodewise.
    pub fn new(
        labels: Vec<f64>,
        masses: Vec<f64>,
        grid: Vec<f64>,
        values: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if labels.len() != masses.len() || labels.len() != values.len() {
            return Err(Error::Invalid("label/mass/value lengths differ".into()));
        }
        if grid.len() < 2 || grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Invalid("grid must be strictly increasing".into()));
        }
        for (i, g) in values.iter().enumerate() {
            if g.len() != grid.len() {
                return Err(Error::Invalid("value row length differs from grid".into()));
            }
            if g.windows(2).any(|w| w[1] < w[0] - SHOCK_TOL) {
                return Err(Error::Invalid(format!("G^{i} is not nondecreasing")));
            }
            if g.iter().any(|&v| v < -SHOCK_TOL || v > masses[i] + 1e-9) {
                return Err(Error::Invalid(format!("G^{i} leaves [0, h_{i}]")));
            }
        }
        for m in 0..grid.len() {
            let total: f64 = values.iter().map(|g| g[m]).sum();
            if total > 1.0 + 1e-9 {
                return Err(Error::Invalid(format!("Σ_i G^i = {total} > 1 at node {m}")));
            }
        }
        Ok(Self { labels, masses, grid, values, time: 0.0, shock_time: None })
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn shock_time(&self) -> Option<f64> {
        self.shock_time
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    /// Largest stable time step `Δx_min / max |a_i − Σ_j G^j|` at the
    /// current state.
    pub fn cfl_limit(&self) -> f64 {
        let dx_min = self
            .grid
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min);
        let mut max_speed = 0.0f64;
        for m in 0..self.grid.len() {
            let total: f64 = self.values.iter().map(|g| g[m]).sum();
            for &a in &self.labels {
                max_speed = max_speed.max((a - total).abs());
            }
        }
        dx_min / max_speed.max(1e-300)
    }

    /// Pseudo-inverse `H^i(y)`: first grid position where `G^i` reaches `y`,
    /// linearly interpolated.
    pub fn pseudo_inverse(&self, label_index: usize, y: f64) -> f64 {
        let g = &self.values[label_index];
        let n = g.len();
        if y <= g[0] {
            return self.grid[0];
        }
        for m in 1..n {
            if g[m] >= y {
                let span = g[m] - g[m - 1];
                if span <= 0.0 {
                    return self.grid[m];
                }
                let t = (y - g[m - 1]) / span;
                return self.grid[m - 1] + t * (self.grid[m] - self.grid[m - 1]);
            }
        }
        self.grid[n - 1]
    }
}

/// One upwind step of the Burgers system. Enforces the CFL condition
/// `dt ≤ Δx / max |a_i − Σ_j G^j|` and flags a shock the first time two
/// tracked quantiles of one label collapse to within a grid cell.
pub fn burgers_step(b: &BurgersState, dt: f64) -> Result<BurgersState> {
    if !(dt > 0.0) {
        return Err(Error::Invalid("dt must be positive".into()));
    }
    let n_nodes = b.grid.len();
    let n_labels = b.labels.len();
    let dx_min = b
        .grid
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);

    // total CDF and velocities per node
    let mut total = vec![0.0; n_nodes];
    for g in &b.values {
        for (t, &v) in total.iter_mut().zip(g) {
            *t += v;
        }
    }
    let mut max_speed = 0.0f64;
    let speeds: Vec<Vec<f64>> = (0..n_labels)
        .map(|i| {
            (0..n_nodes)
                .map(|m| {
                    let u = b.labels[i] - total[m];
                    max_speed = max_speed.max(u.abs());
                    u
                })
                .collect()
        })
        .collect();
    let limit = dx_min / max_speed.max(1e-300);
    if dt > limit {
        return Err(Error::CflViolation { dt, limit });
    }

    let mut next = b.clone();
    next.time += dt;
    for (i, g) in b.values.iter().enumerate() {
        let out = &mut next.values[i];
        for m in 0..n_nodes {
            let u = speeds[i][m];
            let grad = if u > 0.0 {
                if m == 0 {
                    0.0
                } else {
                    (g[m] - g[m - 1]) / (b.grid[m] - b.grid[m - 1])
                }
            } else if m + 1 == n_nodes {
                0.0
            } else {
                (g[m + 1] - g[m]) / (b.grid[m + 1] - b.grid[m])
            };
            out[m] = g[m] - dt * u * grad;
        }
    }

    // shock: adjacent tracked quantiles collapse to one cell
    if next.shock_time.is_none() {
        let levels = 16usize;
        'outer: for i in 0..n_labels {
            let h = next.masses[i];
            if h <= 0.0 {
                continue;
            }
            let mut prev = None;
            for q in 1..levels {
                let y = h * q as f64 / levels as f64;
                let pos = next.pseudo_inverse(i, y);
                if let Some(p) = prev {
                    if pos - p <= dx_min {
                        next.shock_time = Some(next.time);
                        break 'outer;
                    }
                }
                prev = Some(pos);
            }
        }
    }
    Ok(next)
}

/// The analytic shock-time estimate `(x₂ − x₁)/(y₂ − y₁)` with
/// `y_i = G₀(x_i)/N`; guaranteed `≤ N/ν` when the initial density is at
/// least `ν` on `[x₁, x₂]`.
pub fn shock_time_bound(
    x1: f64,
    x2: f64,
    nu_lower: f64,
    n_labels: usize,
    g0: impl Fn(f64) -> f64,
) -> Result<f64> {
    if !(x2 > x1) {
        return Err(Error::InvalidInterval(format!("need x1 < x2, got [{x1}, {x2}]")));
    }
    if !(nu_lower > 0.0) {
        return Err(Error::InvalidInterval("need a positive density lower bound".into()));
    }
    let n = n_labels as f64;
    let y1 = g0(x1) / n;
    let y2 = g0(x2) / n;
    if y2 - y1 < nu_lower * (x2 - x1) / n - 1e-12 {
        return Err(Error::InvalidInterval(format!(
            "G0 increases by {} on [{x1}, {x2}], below the declared lower bound",
            (y2 - y1) * n
        )));
    }
    Ok((x2 - x1) / (y2 - y1))
}
