//! Cross-validation between the independent integrators, and the a-priori
//! trajectory estimates on the JKO side.

use granuflow_core::dynamics::{
    burgers_step, integrate_characteristics, integrate_second_order, BurgersState,
    CharacteristicsConfig,
};
use granuflow_core::jko::{self, JkoConfig};
use granuflow_core::kinetic::reconstruct;
use granuflow_core::measures::product_distance;
use granuflow_core::scenarios::{counting_grid, discrete_labels_state, random_profile_state, Rho0};

/// Label ODE and second-order kinetic ODE agree pre-shock on the reference
/// scenario (4 labels, 64 particles each, uniform density, T = 0.5).
#[test]
fn label_ode_matches_second_order_preshock() {
    let initial = discrete_labels_state(4, 64, Rho0::Uniform).unwrap();
    let horizon = 0.5;

    let chars = integrate_characteristics(
        &initial,
        &CharacteristicsConfig::new(1e-3, horizon).with_save_every(100),
    )
    .unwrap();
    assert!(chars.shock_time.is_none(), "reference scenario must stay pre-shock");

    let cloud = reconstruct(&initial).unwrap();
    let hist = integrate_second_order(&cloud, 5e-4, horizon, 200).unwrap();

    // compare at the common recorded times (multiples of 0.1)
    for (k_char, &t) in chars.trajectory.times.iter().enumerate() {
        let k_hist = hist
            .times
            .iter()
            .position(|&s| (s - t).abs() <= 1e-9)
            .unwrap_or_else(|| panic!("no second-order record at t = {t}"));
        let s_char = &chars.trajectory.states[k_char];
        let s_hist = hist.state_at(k_hist, initial.grid()).unwrap();
        let d = product_distance(s_char, &s_hist).unwrap();
        assert!(d <= 0.05, "t = {t}: d(label-ODE, second-order) = {d}");
    }
}

/// Per-label quantile spacing of the Burgers system decays at least linearly,
/// `H(y₂) − H(y₁) ≤ (x₂ − x₁) − t (y₂ − y₁)`, up to grid smearing.
#[test]
fn burgers_quantile_spacing_decays() {
    let n_labels = 2usize;
    let nodes = 512usize;
    let span = 3.0;
    let grid: Vec<f64> = (0..nodes)
        .map(|m| -1.0 + span * m as f64 / (nodes - 1) as f64)
        .collect();
    // uniform ρ0 on [0, 1]: G^i_0 = G0 / N
    let g0 = |x: f64| x.clamp(0.0, 1.0);
    let values: Vec<Vec<f64>> = (0..n_labels)
        .map(|_| grid.iter().map(|&x| g0(x) / n_labels as f64).collect())
        .collect();
    let labels: Vec<f64> = (1..=n_labels).map(|i| i as f64 / n_labels as f64).collect();
    let masses = vec![1.0 / n_labels as f64; n_labels];
    let mut b = BurgersState::new(labels, masses, grid, values).unwrap();

    let h = 1.0 / n_labels as f64;
    let (y1, y2) = (0.2 * h, 0.8 * h);
    let x1 = b.pseudo_inverse(0, y1);
    let x2 = b.pseudo_inverse(0, y2);
    let dt = 2e-3;
    let t_end = 0.5;
    while b.time() < t_end - 1e-12 {
        b = burgers_step(&b, dt).unwrap();
    }
    for i in 0..n_labels {
        let spacing = b.pseudo_inverse(i, y2) - b.pseudo_inverse(i, y1);
        let bound = (x2 - x1) - t_end * (y2 - y1);
        assert!(
            spacing <= bound + 0.05,
            "label {i}: spacing {spacing} exceeds {bound} + smear allowance"
        );
    }
}

/// The telescoped square-distance estimate and the Hölder-in-time bound it
/// implies for the interpolated trajectory.
#[test]
fn jko_telescoped_estimates() {
    use rand::SeedableRng;
    let grid = counting_grid(2).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
    let initial = random_profile_state(&grid, 32, 1.0, &mut rng).unwrap();
    let cfg = JkoConfig::new(5e-3, 0.5, 1.0, 1.0);
    let traj = jko::run(&initial, &cfg).unwrap();

    let j0 = traj.energies.first().unwrap().total;
    let j_last = traj.energies.last().unwrap().total;
    let j_min = traj.energies.iter().map(|e| e.total).fold(f64::INFINITY, f64::min);
    let n_steps = traj.step_distances.len() as f64;

    let sum_sq: f64 = traj.step_distances.iter().map(|d| d * d).sum();
    assert!(
        sum_sq / (2.0 * cfg.tau) <= j0 - j_last + n_steps * cfg.solver_tol,
        "telescoped descent estimate violated"
    );

    // Hölder bound with the constant from the telescoping
    let c = (2.0 * (j0 - j_min)).sqrt();
    for i in 0..traj.states.len() {
        for j in (i + 1)..traj.states.len() {
            let d = product_distance(&traj.states[i], &traj.states[j]).unwrap();
            let dt = traj.times[j] - traj.times[i];
            assert!(
                d <= c * (dt + cfg.tau).sqrt() + 1e-9,
                "Hölder bound violated at |t−s| = {dt}: d = {d}"
            );
        }
    }
}
