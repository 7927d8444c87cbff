//! Validation suites.
//!
//! Every numbered criterion is implemented here once; the `acceptance`
//! integration test asserts them and the CLI `validate` subcommand prints
//! them. Criteria never panic: internal errors surface as failed results.

use std::time::Instant;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::dynamics::{
    integrate_characteristics, shock_time_bound, CharacteristicsConfig,
};
use crate::energy;
use crate::error::{Error, Result};
use crate::jko::{self, JkoConfig};
use crate::kinetic::weak_form_residual;
use crate::measures::{
    displacement_interpolate, product_distance, weak_distance, LabelGrid, ProfileState,
};
use crate::ot1d::{self, DiscreteMeasure};
use crate::scenarios::{counting_grid, discrete_labels_state, random_profile_state, Rho0};

pub const SUITES: &[&str] = &[
    "ot-oracle",
    "energy-convexity",
    "jko-descent",
    "contraction",
    "cross-validation",
    "shock-bound",
];

#[derive(Debug, Clone)]
pub struct CriterionResult {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub measured: String,
    pub threshold: String,
    pub runtime_ms: u128,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!(
            "criterion {:02} {:<28} [{}] {} (limit: {}) [{} ms]",
            self.id,
            self.name,
            if self.passed { "PASS" } else { "FAIL" },
            self.measured,
            self.threshold,
            self.runtime_ms
        )
    }
}

/// Runs one named suite.
pub fn run_suite(name: &str) -> Result<Vec<CriterionResult>> {
    match name {
        "ot-oracle" => Ok(vec![criterion_1_ot_oracle(), criterion_12_weak_le_product()]),
        "energy-convexity" => Ok(vec![criterion_11_convexity()]),
        "jko-descent" => Ok(jko_descent_family()),
        "contraction" => Ok(vec![criterion_5_contraction()]),
        "cross-validation" => {
            Ok(vec![criterion_9_cross_validation(), criterion_13_weak_residual()])
        }
        "shock-bound" => Ok(vec![criterion_10_shock_bound()]),
        other => Err(Error::Invalid(format!(
            "unknown suite '{other}'; available: {}",
            SUITES.join(", ")
        ))),
    }
}

/// All suites in numbered-criterion order.
pub fn run_all() -> Vec<CriterionResult> {
    let mut out = Vec::new();
    for name in SUITES {
        out.extend(run_suite(name).expect("built-in suite names are valid"));
    }
    out.sort_by_key(|c| c.id);
    out
}

fn random_measure(rng: &mut ChaCha8Rng, max_atoms: usize) -> DiscreteMeasure {
    let n = rng.random_range(1..=max_atoms);
    let m = DiscreteMeasure::new(
        (0..n).map(|_| (rng.random_range(-5.0..5.0), rng.random_range(0.05..1.0))),
    )
    .expect("finite atoms");
    m.scaled(1.0 / m.total_mass())
}

/// 1. Quantile W_p equals the LP oracle on 500 seeded random pairs.
pub fn criterion_1_ot_oracle() -> CriterionResult {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1001);
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let a = random_measure(&mut rng, 8);
        let b = random_measure(&mut rng, 8);
        for p in [1, 2] {
            match (ot1d::wasserstein_p(&a, &b, p), ot1d::brute_force_wasserstein(&a, &b, p)) {
                (Ok(fast), Ok(lp)) => worst = worst.max((fast - lp).abs()),
                _ => worst = f64::INFINITY,
            }
        }
    }
    let runtime_ms = start.elapsed().as_millis();
    CriterionResult {
        id: 1,
        name: "ot-oracle-equivalence",
        passed: worst <= 1e-9 && runtime_ms < 10_000,
        measured: format!("max |W_p − LP| = {worst:.3e}"),
        threshold: "1e-9, runtime < 10 s".into(),
        runtime_ms,
    }
}

/// 12. `d_w ≤ d` on 100 seeded state pairs.
pub fn criterion_12_weak_le_product() -> CriterionResult {
    let start = Instant::now();
    let run = || -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(1201);
        let grid = counting_grid(2)?;
        let mut worst = f64::NEG_INFINITY;
        for _ in 0..100 {
            let s1 = random_profile_state(&grid, 8, 1.0, &mut rng)?;
            let s2 = random_profile_state(&grid, 8, 1.0, &mut rng)?;
            let dw = weak_distance(&s1, &s2)?;
            let d = product_distance(&s1, &s2)?;
            worst = worst.max(dw - d);
        }
        Ok(worst)
    };
    finish(
        start,
        12,
        "weak-distance-dominated",
        run(),
        |worst| *worst <= 1e-9,
        |worst| format!("max (d_w − d) = {worst:.3e}"),
        "1e-9",
    )
}

/// 11. Convexity of the energy along coupled interpolations, 100 triples.
pub fn criterion_11_convexity() -> CriterionResult {
    let start = Instant::now();
    let run = || -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(1101);
        let grid = counting_grid(3)?;
        let mut worst = f64::NEG_INFINITY;
        for _ in 0..100 {
            let s1 = random_profile_state(&grid, 6, 2.0, &mut rng)?;
            let s2 = random_profile_state(&grid, 6, 2.0, &mut rng)?;
            let e1 = energy::energy(&s1).total;
            let e2 = energy::energy(&s2).total;
            for eps in [0.25, 0.5, 0.75] {
                let mid = displacement_interpolate(&s1, &s2, eps)?;
                let em = energy::energy(&mid).total;
                worst = worst.max(em - ((1.0 - eps) * e1 + eps * e2));
            }
        }
        Ok(worst)
    };
    finish(
        start,
        11,
        "energy-convexity",
        run(),
        |worst| *worst <= 1e-9,
        |worst| format!("max convexity excess = {worst:.3e}"),
        "1e-9",
    )
}

struct DescentStats {
    descent_excess: f64,
    max_velocity: f64,
    support_excess: f64,
    lipschitz_excess: f64,
    runtime_ms_runs: u128,
}

fn descent_scenarios() -> Result<DescentStats> {
    let mut stats = DescentStats {
        descent_excess: f64::NEG_INFINITY,
        max_velocity: 0.0,
        support_excess: f64::NEG_INFINITY,
        lipschitz_excess: f64::NEG_INFINITY,
        runtime_ms_runs: 0,
    };
    let combos = [(1usize, 16usize), (1, 64), (2, 16), (2, 64), (4, 16), (4, 64)];
    let cfg_template = |_n: usize| JkoConfig::new(1e-2, 1.0, 1.0, 1.0);
    let run_clock = Instant::now();
    for idx in 0..20 {
        let (n, m) = combos[idx % combos.len()];
        let mut rng = ChaCha8Rng::seed_from_u64(2000 + idx as u64);
        let grid = counting_grid(n)?;
        let initial = random_profile_state(&grid, m, 1.0, &mut rng)?;
        let cfg = cfg_template(n);
        let traj = jko::run(&initial, &cfg)?;

        for k in 0..traj.step_distances.len() {
            let lhs = traj.step_distances[k].powi(2) / (2.0 * cfg.tau);
            let rhs = traj.energies[k].total - traj.energies[k + 1].total;
            stats.descent_excess = stats.descent_excess.max(lhs - rhs);
        }
        stats.max_velocity = stats.max_velocity.max(traj.max_velocity());
        let r = cfg.support_bound();
        for st in &traj.states {
            stats.support_excess = stats.support_excess.max(st.realized_radius() - r);
        }
        // pairwise time-Lipschitz bound: velocity cap times elapsed time,
        // plus the interpolation allowance of one step each side
        let c = cfg.r_v + 2.0;
        for i in 0..traj.states.len() {
            for j in (i + 1)..traj.states.len() {
                let d = product_distance(&traj.states[i], &traj.states[j])?;
                let bound = c * (traj.times[j] - traj.times[i]) + 2.0 * c * cfg.tau;
                stats.lipschitz_excess = stats.lipschitz_excess.max(d - bound);
            }
        }
    }
    stats.runtime_ms_runs = run_clock.elapsed().as_millis();
    Ok(stats)
}

/// 2, 3, 4, 6, 7, 8: per-step descent, velocity bound, support bound,
/// time-Lipschitz bound, stationary Dirac, translating Dirac.
pub fn jko_descent_family() -> Vec<CriterionResult> {
    let start = Instant::now();
    let stats = descent_scenarios();
    let shared_ms = start.elapsed().as_millis();
    let mut out = Vec::new();
    match &stats {
        Ok(s) => {
            out.push(CriterionResult {
                id: 2,
                name: "jko-step-descent",
                passed: s.descent_excess <= 1e-6 && s.runtime_ms_runs < 120_000,
                measured: format!("max d²/2τ − ΔJ = {:.3e}", s.descent_excess),
                threshold: "1e-6, runtime < 2 min".into(),
                runtime_ms: shared_ms,
            });
            out.push(CriterionResult {
                id: 3,
                name: "velocity-bound",
                passed: s.max_velocity <= 1.0 + 2.0 + 1e-6,
                measured: format!("max |v| = {:.6}", s.max_velocity),
                threshold: "R_v + 2 + 1e-6 = 3 + 1e-6".into(),
                runtime_ms: 0,
            });
            out.push(CriterionResult {
                id: 4,
                name: "support-bound",
                passed: s.support_excess <= 0.0,
                measured: format!("max radius excess = {:.3e}", s.support_excess),
                threshold: "0 (exact)".into(),
                runtime_ms: 0,
            });
            out.push(CriterionResult {
                id: 6,
                name: "time-lipschitz",
                passed: s.lipschitz_excess <= 1e-9,
                measured: format!("max d − bound = {:.3e}", s.lipschitz_excess),
                threshold: "(R_v+2)|t−s| + 2(R_v+2)τ".into(),
                runtime_ms: 0,
            });
        }
        Err(e) => {
            for (id, name) in [
                (2, "jko-step-descent"),
                (3, "velocity-bound"),
                (4, "support-bound"),
                (6, "time-lipschitz"),
            ] {
                out.push(failed(id, name, format!("error: {e}")));
            }
        }
    }
    out.push(criterion_7_stationary());
    out.push(criterion_8_translating());
    out
}

/// 7. A single label `a = ½` Dirac stays fixed over `T = 1`.
pub fn criterion_7_stationary() -> CriterionResult {
    let start = Instant::now();
    let run = || -> Result<f64> {
        let grid = LabelGrid::new(vec![0.5], vec![1.0], vec![1.0])?;
        let s = ProfileState::new(grid, vec![DiscreteMeasure::dirac(0.0, 1.0)], 1.0)?;
        let cfg = JkoConfig::new(1e-2, 1.0, 1.0, 1.0);
        let traj = jko::run(&s, &cfg)?;
        product_distance(traj.states.last().expect("nonempty"), &traj.states[0])
    };
    finish(
        start,
        7,
        "stationary-dirac",
        run(),
        |d| *d <= 1e-6,
        |d| format!("final d = {d:.3e}"),
        "1e-6",
    )
}

/// 8. A single label `a = 1` Dirac translates at speed ½.
pub fn criterion_8_translating() -> CriterionResult {
    let start = Instant::now();
    let tau = 1e-3;
    let run = || -> Result<f64> {
        let grid = LabelGrid::new(vec![1.0], vec![1.0], vec![1.0])?;
        let s = ProfileState::new(grid, vec![DiscreteMeasure::dirac(0.0, 1.0)], 1.0)?;
        let cfg = JkoConfig { tau, ..JkoConfig::new(tau, 1.0, 1.0, 1.0) };
        let traj = jko::run(&s, &cfg)?;
        let at_t = traj.interpolate(1.0)?;
        Ok((at_t.species()[0].positions()[0] - 0.5).abs())
    };
    finish(
        start,
        8,
        "translating-dirac",
        run(),
        |err| *err <= 2.0 * tau,
        |err| format!("|x(T) − T/2| = {err:.3e}"),
        "2τ = 2e-3",
    )
}

/// 5. Contraction `max_t d(t) ≤ d(0)(1 + 5e-2)` on 10 seeded pairs, and
///    halving τ does not worsen the violation in ≥ 8/10 pairs.
pub fn criterion_5_contraction() -> CriterionResult {
    let start = Instant::now();
    let run = || -> Result<(f64, usize)> {
        let grid = counting_grid(2)?;
        let m = 64;
        let mut worst_ratio = 0.0f64;
        let mut improved = 0usize;
        for pair in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(5000 + pair);
            let s1 = random_profile_state(&grid, m, 1.0, &mut rng)?;
            let s2 = random_profile_state(&grid, m, 1.0, &mut rng)?;
            let mut excess = [0.0f64; 2];
            for (slot, tau) in [(0usize, 2e-3), (1, 1e-3)] {
                let cfg = JkoConfig::new(tau, 1.0, 1.0, 1.0);
                let ta = jko::run(&s1, &cfg)?;
                let tb = jko::run(&s2, &cfg)?;
                let d0 = product_distance(&ta.states[0], &tb.states[0])?;
                let mut max_d = 0.0f64;
                for (a, b) in ta.states.iter().zip(&tb.states) {
                    max_d = max_d.max(product_distance(a, b)?);
                }
                excess[slot] = (max_d - d0).max(0.0);
                if slot == 0 {
                    worst_ratio = worst_ratio.max(max_d / d0);
                }
            }
            if excess[1] <= excess[0] + 1e-12 {
                improved += 1;
            }
        }
        Ok((worst_ratio, improved))
    };
    let outcome = run();
    let runtime_ms = start.elapsed().as_millis();
    match outcome {
        Ok((ratio, improved)) => CriterionResult {
            id: 5,
            name: "contraction",
            passed: ratio <= 1.05 && improved >= 8 && runtime_ms < 300_000,
            measured: format!("max d(t)/d(0) = {ratio:.4}, improved {improved}/10"),
            threshold: "1.05, ≥ 8/10, runtime < 5 min".into(),
            runtime_ms,
        },
        Err(e) => {
            let mut r = failed(5, "contraction", format!("error: {e}"));
            r.runtime_ms = runtime_ms;
            r
        }
    }
}

/// 9. Pre-shock agreement between the JKO flow and the label-ODE oracle.
pub fn criterion_9_cross_validation() -> CriterionResult {
    let start = Instant::now();
    let run = || -> Result<f64> {
        let initial = discrete_labels_state(4, 64, Rho0::Uniform)?;
        let tau = 1e-3;
        let cfg = JkoConfig::new(tau, 0.5, 1.0, 1.0);
        let traj = jko::run(&initial, &cfg)?;
        let ode = integrate_characteristics(
            &initial,
            &CharacteristicsConfig::new(1e-4, 0.5).with_save_every(10),
        )?;
        let mut worst = 0.0f64;
        for (k, t) in ode.trajectory.times.iter().enumerate() {
            let jko_state = traj.interpolate(*t)?;
            worst = worst.max(product_distance(jko_state, &ode.trajectory.states[k])?);
        }
        Ok(worst)
    };
    let outcome = run();
    let runtime_ms = start.elapsed().as_millis();
    match outcome {
        Ok(worst) => CriterionResult {
            id: 9,
            name: "cross-validation-preshock",
            passed: worst <= 0.05 && runtime_ms < 180_000,
            measured: format!("max d(jko, ode) = {worst:.4}"),
            threshold: "0.05, runtime < 3 min".into(),
            runtime_ms,
        },
        Err(e) => {
            let mut r = failed(9, "cross-validation-preshock", format!("error: {e}"));
            r.runtime_ms = runtime_ms;
            r
        }
    }
}

/// 13. The weak-form kinetic residual halves (±30 %) when τ and 1/M halve.
pub fn criterion_13_weak_residual() -> CriterionResult {
    let start = Instant::now();
    let run = || -> Result<(f64, f64, f64)> {
        let horizon = 0.5;
        let residual = |tau: f64, m: usize| -> Result<f64> {
            let initial = discrete_labels_state(2, m, Rho0::Uniform)?;
            let cfg = JkoConfig::new(tau, horizon, 1.0, 1.0);
            let traj = jko::run(&initial, &cfg)?;
            weak_form_residual(&traj, 5)
        };
        let coarse = residual(0.0125, 16)?;
        let fine = residual(0.00625, 32)?;
        Ok((coarse, fine, fine / coarse))
    };
    finish(
        start,
        13,
        "weak-form-residual",
        run(),
        |(_, _, ratio)| *ratio >= 0.35 && *ratio <= 0.65,
        |(c, f, ratio)| format!("residual {c:.3e} → {f:.3e}, ratio {ratio:.3}"),
        "ratio in [0.35, 0.65]",
    )
}

/// 10. Shock detection fires by `N · 1.05` for `N ∈ {2,4,8}`, and the
///     analytic bound evaluates exactly on the three closed-form examples.
pub fn criterion_10_shock_bound() -> CriterionResult {
    let start = Instant::now();
    let run = || -> Result<(f64, f64)> {
        // symbolic part
        let uniform = |x: f64| x.clamp(0.0, 1.0);
        let steep = |x: f64| (2.0 * x).clamp(0.0, 1.0);
        let mut sym_err = 0.0f64;
        sym_err = sym_err.max((shock_time_bound(0.0, 1.0, 1.0, 2, uniform)? - 2.0).abs());
        sym_err = sym_err.max((shock_time_bound(0.0, 1.0, 1.0, 1, uniform)? - 1.0).abs());
        sym_err = sym_err.max((shock_time_bound(0.0, 0.5, 2.0, 4, steep)? - 2.0).abs());

        // dynamic part: detector fires within the slack
        let mut worst_rel = 0.0f64;
        for n in [2usize, 4, 8] {
            let initial = discrete_labels_state(n, 256, Rho0::Uniform)?;
            let bound = shock_time_bound(0.0, 1.0, 1.0, n, uniform)?;
            let cfg = CharacteristicsConfig::new(1e-3, bound * 1.05)
                .with_save_every(usize::MAX);
            let runr = integrate_characteristics(&initial, &cfg)?;
            match runr.shock_time {
                Some(t) => worst_rel = worst_rel.max(t / bound),
                None => worst_rel = f64::INFINITY,
            }
        }
        Ok((sym_err, worst_rel))
    };
    finish(
        start,
        10,
        "shock-time-bound",
        run(),
        |(sym, rel)| *sym == 0.0 && *rel <= 1.05,
        |(sym, rel)| format!("analytic err = {sym:.1e}, detect/bound = {rel:.4}"),
        "exact, ≤ 1.05",
    )
}

fn failed(id: usize, name: &'static str, measured: String) -> CriterionResult {
    CriterionResult { id, name, passed: false, measured, threshold: String::new(), runtime_ms: 0 }
}

fn finish<T>(
    start: Instant,
    id: usize,
    name: &'static str,
    outcome: Result<T>,
    check: impl Fn(&T) -> bool,
    describe: impl Fn(&T) -> String,
    threshold: &str,
) -> CriterionResult {
    let runtime_ms = start.elapsed().as_millis();
    match outcome {
        Ok(v) => CriterionResult {
            id,
            name,
            passed: check(&v),
            measured: describe(&v),
            threshold: threshold.into(),
            runtime_ms,
        },
        Err(e) => CriterionResult {
            id,
            name,
            passed: false,
            measured: format!("error: {e}"),
            threshold: threshold.into(),
            runtime_ms,
        },
    }
}
