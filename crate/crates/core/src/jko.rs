//! The implicit Euler (JKO) minimizing scheme over the product space:
//!
//! ```text
//! 𝛎_{k+1} ∈ argmin_{𝛎 ∈ X_R}  (1/2τ) d²(𝛎, 𝛎_k) + J(𝛎)
//! ```
//!
//! Each species is discretized by equal-mass particles whose positions are
//! the optimization variables. With both current and previous particle lists
//! sorted, the squared-distance term is the index-wise pairing, and the
//! objective restricted to any fixed global ordering of all particles is a
//! separable quadratic. Stationarity of particle `p` reads
//!
//! ```text
//! (x_p − x̄_p)/τ  =  a_p − (G(x_p) + G⁻(x_p))/2 ,
//! ```
//!
//! i.e. the discrete velocity equals the midpoint of the admissible bracket,
//! which doubles as a computable optimality certificate for every step.
//!
//! The inner solver runs a Barzilai-Borwein subgradient descent with a
//! monotone line search, then exact coordinate sweeps (one-dimensional
//! proximal solves per particle, plus joint moves of coincident clusters and
//! their sub-clusters) to drive the first-order gap below `solver_tol`. The
//! objective is convex, so a small first-order gap certifies near-global
//! optimality.

use crate::energy::{self, EnergyReport, VelocityField};
use crate::error::{Error, Result};
use crate::measures::{marginal_rho, product_distance, ProfileState};
use crate::ot1d::DiscreteMeasure;

#[derive(Debug, Clone, Copy)]
pub struct JkoConfig {
    /// Time step τ.
    pub tau: f64,
    /// Horizon T; the scheme takes `⌊T/τ⌋ + 1` steps.
    pub horizon: f64,
    /// Half-width of the initial spatial support box.
    pub r_x: f64,
    /// Half-width of the initial velocity support box.
    pub r_v: f64,
    /// First-order tolerance of the inner minimization, in velocity units.
    pub solver_tol: f64,
    /// Inner iteration budget per step (particle proximal solves count one
    /// each).
    pub max_inner_iters: usize,
}

impl JkoConfig {
    pub fn new(tau: f64, horizon: f64, r_x: f64, r_v: f64) -> Self {
        Self { tau, horizon, r_x, r_v, solver_tol: 1e-8, max_inner_iters: 10_000 }
    }

    /// The a-priori support bound `R = R_x + (T + τ)(R_v + 3/2)`.
    pub fn support_bound(&self) -> f64 {
        self.r_x + (self.horizon + self.tau) * (self.r_v + 1.5)
    }

    /// Number of steps `N + 1` with `N = ⌊T/τ⌋`.
    pub fn num_steps(&self) -> usize {
        (self.horizon / self.tau).floor() as usize + 1
    }

    /// Support radius allowed after step `k` (0-based):
    /// `R_x + (k+1) τ (R_v + 3/2)`, capped at the global bound.
    pub fn running_radius(&self, step_index: usize) -> f64 {
        let r = self.r_x + (step_index as f64 + 1.0) * self.tau * (self.r_v + 1.5);
        r.min(self.support_bound())
    }
}

/// A JKO trajectory with per-step diagnostics.
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// `t_k = k τ` for `k = 0..=N+1`.
    pub times: Vec<f64>,
    pub states: Vec<ProfileState>,
    /// Discrete velocities `v_{k+1} = (y − x̄)/τ`, one field per step,
    /// aligned with the atoms of `states[k+1]`.
    pub velocities: Vec<VelocityField>,
    pub energies: Vec<EnergyReport>,
    /// `d(𝛎_{k+1}, 𝛎_k)`, one per step.
    pub step_distances: Vec<f64>,
}

impl Trajectory {
    /// Piecewise-constant right-closed interpolation: `𝛎_τ(t) = 𝛎_k` for
    /// `t ∈ ((k−1)τ, kτ]`, and `𝛎_0` at `t = 0`.
    pub fn interpolate(&self, t: f64) -> Result<&ProfileState> {
        let horizon = *self.times.last().expect("trajectory is nonempty");
        if t < -1e-12 || t > horizon + 1e-12 {
            return Err(Error::TimeOutOfRange { t, horizon });
        }
        let guard = 1e-12 * t.abs().max(1.0);
        let k = self.times.partition_point(|&tk| tk < t - guard);
        Ok(&self.states[k.min(self.states.len() - 1)])
    }

    /// Largest discrete-velocity magnitude over the whole run.
    pub fn max_velocity(&self) -> f64 {
        self.velocities.iter().map(VelocityField::sup_norm).fold(0.0, f64::max)
    }
}

/// Clamps every atom position to `[−radius, radius]`, merging atoms that
/// land on the boundary together.
pub fn project_support(state: &ProfileState, radius: f64) -> Result<ProfileState> {
    let species = state
        .species()
        .iter()
        .map(|s| DiscreteMeasure::new(s.atoms().map(|(x, w)| (x.clamp(-radius, radius), w))))
        .collect::<Result<Vec<_>>>()?;
    ProfileState::new(state.grid().clone(), species, radius.max(state.radius()))
}

// ---------------------------------------------------------------------------
// inner solver
// ---------------------------------------------------------------------------

/// Equal-mass particle view of a state, the working representation of one
/// JKO step. Particles of label `i` occupy `offsets[i]..offsets[i+1]`; both
/// `anchor` and `pos` are kept sorted within each block, so the index-wise
/// pairing realizes the per-label monotone coupling.
struct Particles {
    offsets: Vec<usize>,
    label_value: Vec<f64>,
    mass: Vec<f64>,
    anchor: Vec<f64>,
    pos: Vec<f64>,
    tau: f64,
}

/// Scratch for one global position sort: indices ordered by position and the
/// cluster boundaries (runs of exactly equal positions).
struct SortedView {
    order: Vec<usize>,
    cluster_start: Vec<usize>,
}

impl Particles {
    fn from_state(state: &ProfileState, m_per_label: &[usize], tau: f64) -> Result<Self> {
        let grid = state.grid();
        let mut offsets = vec![0usize];
        let mut label_value = Vec::new();
        let mut mass = Vec::new();
        let mut anchor = Vec::new();
        for (i, s) in state.species().iter().enumerate() {
            let m = m_per_label[i];
            if m == 0 || s.is_empty() {
                offsets.push(anchor.len());
                continue;
            }
            let h = grid.masses()[i];
            let mu = grid.quad_weights()[i];
            let positions = s.equal_mass_quantization(m)?;
            let w = mu * h / m as f64;
            for x in positions {
                anchor.push(x);
                mass.push(w);
                label_value.push(grid.labels()[i]);
            }
            offsets.push(anchor.len());
        }
        let pos = anchor.clone();
        Ok(Self { offsets, label_value, mass, anchor, pos, tau })
    }

    fn len(&self) -> usize {
        self.pos.len()
    }

    fn sort_blocks(pos: &mut [f64], offsets: &[usize]) {
        for w in offsets.windows(2) {
            pos[w[0]..w[1]].sort_by(f64::total_cmp);
        }
    }

    fn sorted_view(&self, pos: &[f64]) -> SortedView {
        let mut order: Vec<usize> = (0..pos.len()).collect();
        order.sort_by(|&a, &b| pos[a].total_cmp(&pos[b]));
        let mut cluster_start = vec![0usize];
        for k in 1..order.len() {
            if pos[order[k]] != pos[order[k - 1]] {
                cluster_start.push(k);
            }
        }
        cluster_start.push(order.len());
        SortedView { order, cluster_start }
    }

    /// Objective `F(x) = Σ ω (x − x̄)²/(2τ) + J(x)`; expects block-sorted
    /// positions.
    fn objective(&self, pos: &[f64]) -> f64 {
        let mut quad = 0.0;
        for ((&x, &anchor), &mass) in pos.iter().zip(&self.anchor).zip(&self.mass) {
            let d = x - anchor;
            quad += mass * d * d;
        }
        let mut atoms: Vec<(f64, f64)> =
            pos.iter().copied().zip(self.mass.iter().copied()).collect();
        let j0 = energy::interaction_integral(&mut atoms);
        let j1: f64 = (0..self.len())
            .map(|p| self.mass[p] * (0.5 - self.label_value[p]) * pos[p])
            .sum();
        quad / (2.0 * self.tau) + 0.25 * j0 + j1
    }

    /// Mass-preconditioned (velocity-units) gradient with midpoint selection
    /// at ties: `g_p = (x_p − x̄_p)/τ − a_p + (G + G⁻)/2 (x_p)`.
    fn gradient(&self, pos: &[f64], view: &SortedView, g: &mut [f64]) {
        let mut below = 0.0;
        for c in view.cluster_start.windows(2) {
            let run = &view.order[c[0]..c[1]];
            let tie: f64 = run.iter().map(|&p| self.mass[p]).sum();
            let gmid = below + 0.5 * tie;
            for &p in run {
                g[p] = (pos[p] - self.anchor[p]) / self.tau - self.label_value[p] + gmid;
            }
            below += tie;
        }
    }

    /// First-order gap in velocity units: the largest rate of decrease over
    /// the move family (single particles, whole coincident clusters, and
    /// their extreme sub-clusters). Zero exactly at a discrete minimizer.
    fn gap(&self, view: &SortedView, g: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for c in view.cluster_start.windows(2) {
            let run = &view.order[c[0]..c[1]];
            let total: f64 = run.iter().map(|&p| self.mass[p]).sum();
            if run.len() == 1 {
                worst = worst.max(g[run[0]].abs());
                continue;
            }
            // singleton moves: |g_p| beyond half the co-located外 mass
            for &p in run {
                let slack = 0.5 * (total - self.mass[p]);
                worst = worst.max(g[p].abs() - slack);
            }
            // whole-cluster translation: the internal kinks cancel
            let sum_wg: f64 = run.iter().map(|&p| self.mass[p] * g[p]).sum();
            worst = worst.max(sum_wg.abs() / total);
            // extreme sub-clusters: prefixes in g-sorted order
            let mut by_g: Vec<usize> = run.to_vec();
            by_g.sort_by(|&a, &b| g[a].total_cmp(&g[b]));
            for ascending in [true, false] {
                let mut acc_wg = 0.0;
                let mut acc_w = 0.0;
                let iter: Box<dyn Iterator<Item = &usize>> = if ascending {
                    Box::new(by_g.iter())
                } else {
                    Box::new(by_g.iter().rev())
                };
                for &p in iter {
                    acc_wg += self.mass[p] * g[p];
                    acc_w += self.mass[p];
                    if acc_w >= total {
                        break;
                    }
                    // moving the sub-cluster activates |·| against the rest
                    let slack = 0.5 * acc_w * (total - acc_w);
                    worst = worst.max((acc_wg.abs() - slack) / acc_w);
                }
            }
        }
        worst.max(0.0)
    }
}

/// Exact minimizer of `(y − c)²/(2τ) + β y + ½ Σ m_k |y − z_k|` for sorted
/// `(z_k, m_k)`. The derivative is increasing piecewise linear with jumps at
/// the `z_k`; scan for its root.
fn prox_1d(c: f64, beta: f64, tau: f64, others: &[(f64, f64)]) -> f64 {
    let total: f64 = others.iter().map(|&(_, m)| m).sum();
    let mut prefix = 0.0;
    for &(z, m) in others {
        let lin = beta + prefix - 0.5 * total;
        let root = c - tau * lin;
        if root <= z {
            return root;
        }
        // derivative below zero entering the atom; atom interval is
        // [ψ(z⁻), ψ(z⁻) + m]
        let psi_minus = (z - c) / tau + lin;
        if psi_minus + m >= 0.0 {
            return z;
        }
        prefix += m;
    }
    c - tau * (beta + 0.5 * total)
}

struct SolveOutcome {
    gap: f64,
}

/// Minimizes the step objective in place.
fn minimize(parts: &mut Particles, tol: f64, budget: usize) -> SolveOutcome {
    let n = parts.len();
    if n == 0 {
        return SolveOutcome { gap: 0.0 };
    }
    let mut iters = 0usize;

    let mut pos = parts.pos.clone();
    Particles::sort_blocks(&mut pos, &parts.offsets);
    let mut g = vec![0.0; n];
    let mut view = parts.sorted_view(&pos);
    parts.gradient(&pos, &view, &mut g);
    let mut f_cur = parts.objective(&pos);

    // Phase A: Barzilai-Borwein steps with monotone backtracking. The
    // quadratic term makes τ the natural step scale. Capped hard: near
    // coincident particles the subgradient oscillates and the exact sweeps
    // below finish far more cheaply than more BB iterations would.
    let mut eta = parts.tau;
    let mut prev_pos: Option<(Vec<f64>, Vec<f64>)> = None;
    let bb_budget = (budget / 2).min(60);
    while iters < bb_budget {
        let gap = parts.gap(&view, &g);
        if gap <= tol {
            parts.pos = pos;
            return SolveOutcome { gap };
        }
        let gnorm2: f64 = (0..n).map(|p| parts.mass[p] * g[p] * g[p]).sum();
        let mut s = eta;
        let mut accepted = false;
        while s > 1e-13 * parts.tau {
            let mut cand: Vec<f64> = (0..n).map(|p| pos[p] - s * g[p]).collect();
            Particles::sort_blocks(&mut cand, &parts.offsets);
            let f_new = parts.objective(&cand);
            if f_new <= f_cur - 1e-4 * s * gnorm2 {
                prev_pos = Some((pos.clone(), g.clone()));
                pos = cand;
                f_cur = f_new;
                accepted = true;
                break;
            }
            s *= 0.5;
        }
        iters += 1;
        if !accepted {
            break; // nonsmooth stall: hand over to the exact sweeps
        }
        view = parts.sorted_view(&pos);
        let mut g_new = vec![0.0; n];
        parts.gradient(&pos, &view, &mut g_new);
        if let Some((old_pos, old_g)) = &prev_pos {
            let mut sy = 0.0;
            let mut ss = 0.0;
            for p in 0..n {
                let dx = pos[p] - old_pos[p];
                let dg = g_new[p] - old_g[p];
                ss += parts.mass[p] * dx * dx;
                sy += parts.mass[p] * dx * dg;
            }
            eta = if sy > 1e-300 { (ss / sy).clamp(1e-3 * parts.tau, 1e3 * parts.tau) } else { parts.tau };
        }
        g = g_new;
    }

    // Phase B: exact coordinate sweeps with cluster and sub-cluster moves.
    loop {
        view = parts.sorted_view(&pos);
        parts.gradient(&pos, &view, &mut g);
        let gap = parts.gap(&view, &g);
        if gap <= tol || iters >= budget {
            parts.pos = pos;
            return SolveOutcome { gap };
        }

        // per-particle exact proximal moves, maintaining the global sort
        // order incrementally; `scratch` is the (position, mass) view of
        // everyone but the moving particle
        let mut order = view.order.clone();
        let mut scratch: Vec<(f64, f64)> = Vec::with_capacity(n);
        for p in 0..n {
            let slot = order.iter().position(|&q| q == p).expect("order is a permutation");
            order.remove(slot);
            scratch.clear();
            scratch.extend(order.iter().map(|&q| (pos[q], parts.mass[q])));
            let y = prox_1d(
                parts.anchor[p],
                0.5 - parts.label_value[p],
                parts.tau,
                &scratch,
            );
            pos[p] = y;
            let at = order.partition_point(|&q| pos[q] < y);
            order.insert(at, p);
            iters += 1;
        }
        Particles::sort_blocks(&mut pos, &parts.offsets);

        // joint moves of coincident clusters and their g-extreme sub-clusters
        view = parts.sorted_view(&pos);
        parts.gradient(&pos, &view, &mut g);
        let mut ext2: Vec<(f64, f64)> = Vec::with_capacity(n);
        for c in view.cluster_start.windows(2) {
            if c[1] - c[0] < 2 {
                continue;
            }
            let run = &view.order[c[0]..c[1]];
            let x_c = pos[run[0]];
            scratch.clear();
            scratch.extend(
                view.order[..c[0]]
                    .iter()
                    .chain(&view.order[c[1]..])
                    .map(|&q| (pos[q], parts.mass[q])),
            );
            scratch.sort_by(|a, b| a.0.total_cmp(&b.0));

            let joint_prox = |members: &[usize],
                              extra: Option<(f64, f64)>,
                              ext2: &mut Vec<(f64, f64)>|
             -> f64 {
                let w: f64 = members.iter().map(|&p| parts.mass[p]).sum();
                let c = members.iter().map(|&p| parts.mass[p] * parts.anchor[p]).sum::<f64>() / w;
                let beta = members
                    .iter()
                    .map(|&p| parts.mass[p] * (0.5 - parts.label_value[p]))
                    .sum::<f64>()
                    / w;
                match extra {
                    None => prox_1d(c, beta, parts.tau, &scratch),
                    Some(e) => {
                        ext2.clear();
                        ext2.extend_from_slice(&scratch);
                        let idx = ext2.partition_point(|&(z, _)| z < e.0);
                        ext2.insert(idx, e);
                        prox_1d(c, beta, parts.tau, ext2)
                    }
                }
            };

            // whole cluster
            let y = joint_prox(run, None, &mut ext2);
            iters += 1;
            if y != x_c {
                for &p in run {
                    pos[p] = y;
                }
                continue;
            }
            // sub-clusters: prefixes in g-order, complement mass pinned at x_c
            let mut by_g = run.to_vec();
            by_g.sort_by(|&a, &b| g[a].total_cmp(&g[b]));
            let total: f64 = run.iter().map(|&p| parts.mass[p]).sum();
            'direction: for ascending in [true, false] {
                for take in 1..by_g.len() {
                    let subset: Vec<usize> = if ascending {
                        by_g[..take].to_vec()
                    } else {
                        by_g[by_g.len() - take..].to_vec()
                    };
                    let w: f64 = subset.iter().map(|&p| parts.mass[p]).sum();
                    let y = joint_prox(&subset, Some((x_c, total - w)), &mut ext2);
                    iters += 1;
                    if y != x_c {
                        for &p in &subset {
                            pos[p] = y;
                        }
                        break 'direction;
                    }
                }
            }
        }
        Particles::sort_blocks(&mut pos, &parts.offsets);
        let f_new = parts.objective(&pos);
        debug_assert!(f_new <= f_cur + 1e-9 * f_cur.abs().max(1.0));
        f_cur = f_new;
    }
}

/// One merged atom of the assembled next state.
struct AssembledAtom {
    position: f64,
    weight: f64,
    velocity: f64,
}

/// Merges coincident particles per label and computes the discrete velocity
/// `v = (y − mean anchor)/τ` per merged atom.
fn assemble(parts: &Particles, radius: f64) -> Vec<Vec<AssembledAtom>> {
    let n_labels = parts.offsets.len() - 1;
    let mut out = Vec::with_capacity(n_labels);
    for i in 0..n_labels {
        let block = parts.offsets[i]..parts.offsets[i + 1];
        let mut atoms: Vec<AssembledAtom> = Vec::new();
        let mut k = block.start;
        while k < block.end {
            let y = parts.pos[k].clamp(-radius, radius);
            let mut j = k;
            let mut anchor_sum = 0.0;
            let mut weight = 0.0;
            while j < block.end && parts.pos[j].clamp(-radius, radius) == y {
                anchor_sum += parts.anchor[j];
                weight += parts.mass[j];
                j += 1;
            }
            let count = (j - k) as f64;
            let velocity = (y - anchor_sum / count) / parts.tau;
            atoms.push(AssembledAtom { position: y, weight, velocity });
            k = j;
        }
        out.push(atoms);
    }
    out
}

fn build_state(
    prev: &ProfileState,
    parts: &Particles,
    radius: f64,
    state_radius: f64,
) -> Result<(ProfileState, VelocityField)> {
    let assembled = assemble(parts, radius);
    let mut species = Vec::with_capacity(assembled.len());
    let mut per_label = Vec::with_capacity(assembled.len());
    for (i, atoms) in assembled.iter().enumerate() {
        if atoms.is_empty() {
            species.push(prev.species()[i].clone());
            per_label.push(Vec::new());
            continue;
        }
        // undo the μ-weighting of particle masses: species atoms carry w
        let mu = prev.grid().quad_weights()[i];
        species.push(DiscreteMeasure::new(
            atoms.iter().map(|a| (a.position, a.weight / mu)),
        )?);
        per_label.push(atoms.iter().map(|a| a.velocity).collect());
    }
    let next = ProfileState::new(prev.grid().clone(), species, state_radius)?;
    Ok((next, VelocityField { per_label }))
}

/// Checks the Euler-Lagrange certificate: every discrete velocity lies in
/// the admissible bracket of the *next* state, within `slack`.
fn certificate_holds(next: &ProfileState, field: &VelocityField, slack: f64) -> bool {
    let rho = marginal_rho(next);
    for (i, s) in next.species().iter().enumerate() {
        let a = next.grid().labels()[i];
        for (j, &x) in s.positions().iter().enumerate() {
            let (lo, hi) = energy::velocity_bracket_at(&rho, a, x);
            let v = field.per_label[i][j];
            if v < lo - slack || v > hi + slack {
                return false;
            }
        }
    }
    true
}

/// One JKO step: minimizes `(1/2τ) d²(·, prev) + J` over particle positions
/// and certifies the minimizer through the velocity bracket. Atoms of `prev`
/// are taken as the particles (equal masses per label are required and are
/// re-established by quantile splitting when atoms have merged).
pub fn jko_step(
    prev: &ProfileState,
    cfg: &JkoConfig,
    step_index: usize,
) -> Result<(ProfileState, VelocityField)> {
    let m_per_label: Vec<usize> = prev.species().iter().map(DiscreteMeasure::len).collect();
    step_with_particles(prev, &m_per_label, cfg, step_index, cfg.support_bound())
}

fn step_with_particles(
    prev: &ProfileState,
    m_per_label: &[usize],
    cfg: &JkoConfig,
    step_index: usize,
    state_radius: f64,
) -> Result<(ProfileState, VelocityField)> {
    let radius = cfg.running_radius(step_index);
    let mut attempt_tol = cfg.solver_tol;
    for attempt in 0..3 {
        let mut parts = Particles::from_state(prev, m_per_label, cfg.tau)?;
        // warm start: advance anchors by the bracket-midpoint velocity
        let warm = energy::select_velocity(prev);
        {
            let mut k = 0;
            for (i, vs) in warm.per_label.iter().enumerate() {
                let block = parts.offsets[i]..parts.offsets[i + 1];
                // expand per-atom velocities to the quantized particles
                let s = &prev.species()[i];
                let mut per_particle = Vec::with_capacity(block.len());
                if s.len() == block.len() {
                    per_particle.extend(vs.iter().copied());
                } else {
                    // merged atoms were re-split: repeat each atom's velocity
                    // according to its share of the equal-mass particles
                    let m = block.len();
                    if m > 0 {
                        let unit = s.total_mass() / m as f64;
                        for (j, (_, w)) in s.atoms().enumerate() {
                            let count = (w / unit).round() as usize;
                            for _ in 0..count.max(1) {
                                if per_particle.len() < m {
                                    per_particle.push(vs[j]);
                                }
                            }
                        }
                        while per_particle.len() < m {
                            per_particle.push(*vs.last().expect("nonempty species"));
                        }
                    }
                }
                for v in per_particle {
                    parts.pos[k] = (parts.anchor[k] + cfg.tau * v).clamp(-radius, radius);
                    k += 1;
                }
            }
        }
        // keep the descent monotone from J(prev): start from the better of
        // the warm point and the anchors themselves
        {
            let mut warm_pos = parts.pos.clone();
            Particles::sort_blocks(&mut warm_pos, &parts.offsets);
            if parts.objective(&warm_pos) > parts.objective(&parts.anchor.clone()) {
                parts.pos = parts.anchor.clone();
            }
        }

        let outcome = minimize(&mut parts, attempt_tol, cfg.max_inner_iters);
        if outcome.gap > attempt_tol {
            return Err(Error::SolverDiverged {
                step: step_index,
                gap: outcome.gap,
                tol: attempt_tol,
            });
        }
        for x in parts.pos.iter_mut() {
            *x = x.clamp(-radius, radius);
        }
        let (next, field) = build_state(prev, &parts, radius, state_radius)?;
        if certificate_holds(&next, &field, 10.0 * cfg.solver_tol) {
            return Ok((next, field));
        }
        // certificate failure: restart with a tighter gap target
        attempt_tol /= 10.0;
        if attempt == 2 {
            return Err(Error::SolverDiverged {
                step: step_index,
                gap: outcome.gap,
                tol: attempt_tol,
            });
        }
    }
    unreachable!("loop returns on every path")
}

/// Runs the full scheme from `initial` over `⌊T/τ⌋ + 1` steps, recording
/// states, discrete velocities, energies and step distances. Species with
/// unequal atom weights are first replaced by their equal-mass quantile
/// discretization (the particle counts then stay fixed for the whole run).
pub fn run(initial: &ProfileState, cfg: &JkoConfig) -> Result<Trajectory> {
    if initial.realized_radius() > cfg.r_x + 1e-9 {
        return Err(Error::Invalid(format!(
            "initial support radius {} exceeds R_x = {}",
            initial.realized_radius(),
            cfg.r_x
        )));
    }
    if !initial.grid().labels_within(cfg.r_v) {
        return Err(Error::Invalid("labels outside [−R_v, R_v + 1]".into()));
    }

    // particle counts per label, fixed for the whole run
    let m_per_label: Vec<usize> = initial.species().iter().map(DiscreteMeasure::len).collect();
    let state_radius = cfg.support_bound();
    let start = equalize(initial, &m_per_label, state_radius)?;

    let n_steps = cfg.num_steps();
    let mut times = Vec::with_capacity(n_steps + 1);
    let mut states = Vec::with_capacity(n_steps + 1);
    let mut velocities = Vec::with_capacity(n_steps);
    let mut energies = Vec::with_capacity(n_steps + 1);
    let mut step_distances = Vec::with_capacity(n_steps);

    times.push(0.0);
    energies.push(energy::energy(&start));
    states.push(start);

    for k in 0..n_steps {
        let prev = states.last().expect("at least the initial state");
        let (next, field) = step_with_particles(prev, &m_per_label, cfg, k, state_radius)?;
        step_distances.push(product_distance(&next, prev)?);
        times.push((k as f64 + 1.0) * cfg.tau);
        energies.push(energy::energy(&next));
        velocities.push(field);
        states.push(next);
    }

    Ok(Trajectory { times, states, velocities, energies, step_distances })
}

/// Replaces every species by `m` equal-mass atoms at its quantile midpoints
/// (exact re-split for species that already consist of equal-mass particles).
fn equalize(state: &ProfileState, m_per_label: &[usize], radius: f64) -> Result<ProfileState> {
    let species = state
        .species()
        .iter()
        .zip(m_per_label)
        .map(|(s, &m)| {
            if s.is_empty() || m == 0 {
                return Ok(s.clone());
            }
            let w = s.total_mass() / m as f64;
            DiscreteMeasure::new(s.equal_mass_quantization(m)?.into_iter().map(|x| (x, w)))
        })
        .collect::<Result<Vec<_>>>()?;
    ProfileState::new(state.grid().clone(), species, radius.max(state.radius()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::LabelGrid;
    use approx::assert_abs_diff_eq;

    fn dirac_state(a: f64, x: f64, radius: f64) -> ProfileState {
        let grid = LabelGrid::new(vec![a], vec![1.0], vec![1.0]).unwrap();
        ProfileState::new(grid, vec![DiscreteMeasure::dirac(x, 1.0)], radius).unwrap()
    }

    #[test]
    fn project_support_examples() {
        let s = dirac_state(0.5, 5.0, 5.0);
        let p = project_support(&s, 1.0).unwrap();
        assert_eq!(p.species()[0].positions(), &[1.0]);

        let grid = LabelGrid::new(vec![0.0], vec![1.0], vec![1.0]).unwrap();
        let m = DiscreteMeasure::new([(-3.0, 0.25), (0.0, 0.5), (3.0, 0.25)]).unwrap();
        let s = ProfileState::new(grid, vec![m], 3.0).unwrap();
        let p = project_support(&s, 2.0).unwrap();
        assert_eq!(p.species()[0].positions(), &[-2.0, 0.0, 2.0]);

        let s = dirac_state(0.5, 0.5, 1.0);
        let p = project_support(&s, 1.0).unwrap();
        assert_eq!(p.species()[0].positions(), s.species()[0].positions());
    }

    #[test]
    fn stationary_dirac_step() {
        let cfg = JkoConfig::new(1e-2, 1.0, 1.0, 1.0);
        let s = dirac_state(0.5, 0.0, 1.0);
        let (next, v) = jko_step(&s, &cfg, 0).unwrap();
        assert_abs_diff_eq!(next.species()[0].positions()[0], 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(v.per_label[0][0], 0.0, epsilon = 1e-6);
    }

    #[test]
    fn translating_dirac_step() {
        // exact prox of x ↦ (½−1)x + x²/2τ is x = τ/2
        let tau = 1e-3;
        let cfg = JkoConfig::new(tau, 1.0, 1.0, 1.0);
        let s = dirac_state(1.0, 0.0, 1.0);
        let (next, v) = jko_step(&s, &cfg, 0).unwrap();
        assert_abs_diff_eq!(next.species()[0].positions()[0], tau / 2.0, epsilon = 1e-10);
        assert_abs_diff_eq!(v.per_label[0][0], 0.5, epsilon = 1e-6);
    }

    #[test]
    fn mirror_symmetry_preserved() {
        // labels symmetric about ½ with mirrored species keep x ↦ −x symmetry
        let grid = LabelGrid::new(vec![0.25, 0.75], vec![1.0, 1.0], vec![0.5, 0.5]).unwrap();
        let lo = DiscreteMeasure::new([(-0.6, 0.25), (-0.1, 0.25)]).unwrap();
        let hi = DiscreteMeasure::new([(0.1, 0.25), (0.6, 0.25)]).unwrap();
        let s = ProfileState::new(grid, vec![lo, hi], 1.0).unwrap();
        let cfg = JkoConfig::new(1e-2, 1.0, 1.0, 1.0);
        let (next, _) = jko_step(&s, &cfg, 0).unwrap();
        let a = next.species()[0].positions();
        let b = next.species()[1].positions();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b.iter().rev()) {
            assert_abs_diff_eq!(*x, -*y, epsilon = 1e-7);
        }
    }

    #[test]
    fn run_stationary() {
        let cfg = JkoConfig::new(1e-2, 0.2, 1.0, 1.0);
        let s = dirac_state(0.5, 0.0, 1.0);
        let traj = run(&s, &cfg).unwrap();
        let d = product_distance(traj.states.last().unwrap(), &traj.states[0]).unwrap();
        assert!(d <= 1e-9, "stationary Dirac drifted by {d}");
        for e in traj.energies.windows(2) {
            assert!(e[1].total <= e[0].total + 1e-9);
        }
    }

    #[test]
    fn run_translating_speed_half() {
        let tau = 1e-2;
        let cfg = JkoConfig::new(tau, 0.5, 1.0, 1.0);
        let s = dirac_state(1.0, 0.0, 1.0);
        let traj = run(&s, &cfg).unwrap();
        let t_end = *traj.times.last().unwrap();
        let x_end = traj.states.last().unwrap().species()[0].positions()[0];
        assert_abs_diff_eq!(x_end, t_end / 2.0, epsilon = 2.0 * tau);
    }

    #[test]
    fn interpolation_convention() {
        let cfg = JkoConfig::new(1e-1, 0.3, 1.0, 1.0);
        let s = dirac_state(1.0, 0.0, 1.0);
        let traj = run(&s, &cfg).unwrap();
        let x0 = traj.states[0].species()[0].positions()[0];
        let x1 = traj.states[1].species()[0].positions()[0];
        assert_eq!(traj.interpolate(0.0).unwrap().species()[0].positions()[0], x0);
        assert_eq!(traj.interpolate(0.05).unwrap().species()[0].positions()[0], x1);
        assert_eq!(traj.interpolate(0.1).unwrap().species()[0].positions()[0], x1);
        assert!(traj.interpolate(-1.0).is_err());
        assert!(traj.interpolate(9.0).is_err());
    }

    #[test]
    fn per_step_descent_inequality() {
        // (1/2τ) d² ≤ J(prev) − J(next) + tol on a two-label state
        let grid = LabelGrid::new(vec![0.0, 1.0], vec![1.0, 1.0], vec![0.5, 0.5]).unwrap();
        let m1 = DiscreteMeasure::new([(-0.5, 0.125), (-0.2, 0.125), (0.3, 0.25)]).unwrap();
        let m2 = DiscreteMeasure::new([(-0.4, 0.25), (0.1, 0.125), (0.7, 0.125)]).unwrap();
        let s = ProfileState::new(grid, vec![m1, m2], 1.0).unwrap();
        let cfg = JkoConfig::new(5e-3, 0.1, 1.0, 1.0);
        let traj = run(&s, &cfg).unwrap();
        for k in 0..traj.step_distances.len() {
            let lhs = traj.step_distances[k].powi(2) / (2.0 * cfg.tau);
            let rhs = traj.energies[k].total - traj.energies[k + 1].total;
            assert!(lhs <= rhs + 1e-6, "step {k}: {lhs} > {rhs}");
        }
        // velocity bound
        assert!(traj.max_velocity() <= cfg.r_v + 2.0 + 1e-6);
        // support bounds: the global R and the tighter per-step radius
        let r = cfg.support_bound();
        for (k, st) in traj.states.iter().enumerate() {
            assert!(st.realized_radius() <= r);
            if k > 0 {
                assert!(st.realized_radius() <= cfg.running_radius(k - 1));
            }
        }
    }

    #[test]
    fn prox_1d_cases() {
        // no others: pure quadratic + linear
        let y = prox_1d(1.0, 0.25, 0.1, &[]);
        assert_abs_diff_eq!(y, 1.0 - 0.1 * 0.25, epsilon = 1e-14);
        // lands exactly on an atom when the subgradient interval covers 0
        let y = prox_1d(0.0, 0.0, 1.0, &[(0.0, 1.0)]);
        assert_eq!(y, 0.0);
        // root before the first atom
        let y = prox_1d(-5.0, 0.0, 0.5, &[(0.0, 0.2)]);
        assert_abs_diff_eq!(y, -5.0 + 0.5 * 0.1, epsilon = 1e-14);
        // root after the last atom
        let y = prox_1d(5.0, 0.0, 0.5, &[(0.0, 0.2)]);
        assert_abs_diff_eq!(y, 5.0 - 0.5 * 0.1, epsilon = 1e-14);
    }
}
