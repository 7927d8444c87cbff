//! Subcommand implementations. All fallible paths map to the process exit
//! codes: 0 ok, 1 failed criterion/assertion, 2 usage or configuration
//! error.

use std::path::Path;

use granuflow_core::dynamics::{
    burgers_step, first_integral_residual, integrate_characteristics,
    integrate_second_order, BurgersState, CharacteristicsConfig,
};
use granuflow_core::jko::{self, Trajectory};
use granuflow_core::kinetic;
use granuflow_core::measures::{
    marginal_rho, product_distance, weak_distance, ProfileState, WEAK_DISTANCE_CAP,
};
use granuflow_core::suites;
use granuflow_core::Error as CoreError;

use crate::config::ScenarioConfig;
use crate::output;
use crate::svg;

/// Process outcome; `code` follows the CLI contract.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure { code: 2, message: message.into() }
    }

    pub fn criterion(message: impl Into<String>) -> Self {
        Failure { code: 1, message: message.into() }
    }
}

fn run_scenario(cfg: &ScenarioConfig) -> Result<(ProfileState, Trajectory), Failure> {
    let initial = cfg.build_initial().map_err(Failure::usage)?;
    let traj = jko::run(&initial, &cfg.jko.to_core())
        .map_err(|e| Failure::criterion(format!("solver failed: {e}")))?;
    Ok((initial, traj))
}

pub fn simulate(config_path: &Path) -> Result<(), Failure> {
    let cfg = ScenarioConfig::load(config_path).map_err(Failure::usage)?;
    let (initial, traj) = run_scenario(&cfg)?;
    let out_dir = &cfg.output_dir;

    let emit = |name: &str, content: &str| -> Result<(), Failure> {
        output::write_atomic(&out_dir.join(name), content)
            .map_err(|e| Failure::criterion(format!("writing {name}: {e}")))
    };

    emit("trajectory.csv", &output::trajectory_csv(&traj))?;
    emit("energy.csv", &output::energy_csv(&traj))?;
    emit(
        "final_cloud.csv",
        &output::final_cloud_csv(&traj).map_err(|e| Failure::criterion(e.to_string()))?,
    )?;

    // oracles
    let mut shock_detected_time: Option<f64> = None;
    let mut characteristics_max_distance: Option<f64> = None;
    if cfg.oracles.characteristics {
        let dt = cfg.jko.tau / 10.0;
        let ode_cfg = CharacteristicsConfig::new(dt, cfg.jko.horizon).with_save_every(10);
        let run = integrate_characteristics(&initial, &ode_cfg)
            .map_err(|e| Failure::criterion(format!("characteristics oracle: {e}")))?;
        shock_detected_time = run.shock_time;
        let mut worst = 0.0f64;
        for (k, t) in run.trajectory.times.iter().enumerate() {
            let s = traj
                .interpolate(*t)
                .map_err(|e| Failure::criterion(e.to_string()))?;
            let d = product_distance(s, &run.trajectory.states[k])
                .map_err(|e| Failure::criterion(e.to_string()))?;
            worst = worst.max(d);
        }
        characteristics_max_distance = Some(worst);
    }

    let mut second_order_residual: Option<f64> = None;
    if cfg.oracles.second_order {
        let cloud = kinetic::reconstruct(&initial)
            .map_err(|e| Failure::criterion(e.to_string()))?;
        let hist = integrate_second_order(&cloud, cfg.jko.tau / 10.0, cfg.jko.horizon, 10)
            .map_err(|e| Failure::criterion(format!("second-order oracle: {e}")))?;
        second_order_residual = Some(first_integral_residual(&hist));
    }

    let mut burgers_shock_time: Option<f64> = None;
    if cfg.oracles.burgers {
        burgers_shock_time = run_burgers_oracle(&initial, cfg.jko.horizon)
            .map_err(|e| Failure::criterion(format!("burgers oracle: {e}")))?;
    }

    // summary
    let final_state = traj.states.last().expect("nonempty trajectory");
    let e0 = traj.energies.first().expect("nonempty");
    let e1 = traj.energies.last().expect("nonempty");
    let summary = serde_json::json!({
        "schema": 1,
        "steps": traj.states.len() - 1,
        "final_time": traj.times.last(),
        "support_radius": final_state.realized_radius(),
        "support_bound": cfg.jko.to_core().support_bound(),
        "max_abs_velocity": traj.max_velocity(),
        "energy_initial": e0.total,
        "energy_final": e1.total,
        "shock_detected_time": shock_detected_time,
        "characteristics_max_distance": characteristics_max_distance,
        "second_order_first_integral_residual": second_order_residual,
        "burgers_shock_time": burgers_shock_time,
    });
    emit(
        "summary.json",
        &format!("{}\n", serde_json::to_string_pretty(&summary).expect("serializable")),
    )?;

    if cfg.plots {
        emit_plots(&traj, out_dir).map_err(|e| Failure::criterion(e.to_string()))?;
    }
    Ok(())
}

fn emit_plots(traj: &Trajectory, out_dir: &Path) -> std::io::Result<()> {
    let energy_series = svg::Series {
        label: "J(t)",
        color: "#b22",
        points: traj
            .times
            .iter()
            .zip(&traj.energies)
            .map(|(&t, e)| (t, e.total))
            .collect(),
    };
    output::write_atomic(
        &out_dir.join("energy_decay.svg"),
        &svg::line_chart("energy decay", &[energy_series]),
    )?;

    let final_state = traj.states.last().expect("nonempty");
    let rho = marginal_rho(final_state);
    let bars: Vec<(f64, f64, f64)> = {
        let lo = rho.positions().first().copied().unwrap_or(0.0);
        let hi = rho.positions().last().copied().unwrap_or(1.0);
        let nbins = 40usize;
        let width = ((hi - lo) / nbins as f64).max(1e-9);
        let mut heights = vec![0.0f64; nbins];
        for (x, w) in rho.atoms() {
            let b = (((x - lo) / width) as usize).min(nbins - 1);
            heights[b] += w / width;
        }
        (0..nbins)
            .map(|b| (lo + (b as f64 + 0.5) * width, width, heights[b]))
            .collect()
    };
    output::write_atomic(
        &out_dir.join("rho_final.svg"),
        &svg::bar_chart("final spatial density", &bars, "#36c"),
    )?;

    let cloud = kinetic::reconstruct(final_state)
        .map_err(|e| std::io::Error::other(e.to_string()))?;
    let pts: Vec<(f64, f64, f64)> = cloud.samples().to_vec();
    output::write_atomic(
        &out_dir.join("phase_space_final.svg"),
        &svg::scatter_chart("final phase space", &pts, "#283"),
    )?;
    Ok(())
}

/// Burgers oracle from a product state: the μ-weighted per-label CDFs
/// `μ_i G^i` (so the advecting total sums to at most 1) sampled on a uniform
/// grid spanning the support with margin, advanced at 90 % of the CFL limit.
fn run_burgers_oracle(initial: &ProfileState, horizon: f64) -> Result<Option<f64>, CoreError> {
    let nodes = 512usize;
    let r = initial.realized_radius().max(1e-6);
    let a_max = initial
        .grid()
        .labels()
        .iter()
        .fold(0.0f64, |m, &a| m.max(a.abs()));
    let span = r + (a_max + 1.0) * horizon;
    let grid: Vec<f64> = (0..nodes)
        .map(|m| -span + 2.0 * span * m as f64 / (nodes - 1) as f64)
        .collect();
    let values: Vec<Vec<f64>> = initial
        .species()
        .iter()
        .zip(initial.grid().quad_weights())
        .map(|(s, &mu)| grid.iter().map(|&x| mu * s.cdf_pair(x).1).collect())
        .collect();
    let masses: Vec<f64> = initial
        .grid()
        .masses()
        .iter()
        .zip(initial.grid().quad_weights())
        .map(|(&h, &mu)| h * mu)
        .collect();
    let mut b = BurgersState::new(initial.grid().labels().to_vec(), masses, grid, values)?;
    while b.time() < horizon {
        let dt = 0.9 * b.cfl_limit();
        b = burgers_step(&b, dt.min(horizon - b.time()).max(1e-12))?;
        if b.shock_time().is_some() {
            break;
        }
    }
    Ok(b.shock_time())
}

pub fn validate(suite: &str) -> Result<(), Failure> {
    let results = suites::run_suite(suite)
        .map_err(|e| Failure::usage(e.to_string()))?;
    let mut all_ok = true;
    for r in &results {
        println!("{}", r.line());
        all_ok &= r.passed;
    }
    if all_ok {
        Ok(())
    } else {
        Err(Failure::criterion(format!("suite '{suite}' failed")))
    }
}

/// Worker cap from `GRANUFLOW_THREADS` (default 2 for paired runs).
fn thread_cap() -> usize {
    std::env::var("GRANUFLOW_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or(2)
}

pub fn compare(path_a: &Path, path_b: &Path, slack: f64) -> Result<(), Failure> {
    let cfg_a = ScenarioConfig::load(path_a).map_err(Failure::usage)?;
    let cfg_b = ScenarioConfig::load(path_b).map_err(Failure::usage)?;
    let (ta, tb) = if thread_cap() >= 2 {
        std::thread::scope(|scope| {
            let ha = scope.spawn(|| run_scenario(&cfg_a));
            let hb = scope.spawn(|| run_scenario(&cfg_b));
            (ha.join().expect("run thread panicked"), hb.join().expect("run thread panicked"))
        })
    } else {
        (run_scenario(&cfg_a), run_scenario(&cfg_b))
    };
    let (_, ta) = ta?;
    let (_, tb) = tb?;

    if ta.states[0].grid() != tb.states[0].grid() {
        return Err(Failure::usage("the two scenarios live on different label grids"));
    }
    if ta.states.len() != tb.states.len() {
        return Err(Failure::usage("the two scenarios use different time grids; share the jko block"));
    }

    // d at every recorded time; d_w on a thinned schedule (it is an exact
    // 2D LP, far more expensive than d)
    let dw_stride = (ta.states.len() / 16).max(1);
    let mut rows = Vec::with_capacity(ta.states.len());
    for (k, (a, b)) in ta.states.iter().zip(&tb.states).enumerate() {
        let d = product_distance(a, b).map_err(|e| Failure::criterion(e.to_string()))?;
        let atoms: usize = a
            .species()
            .iter()
            .chain(b.species())
            .map(|s| s.len())
            .sum();
        let dw = if k % dw_stride == 0 && atoms <= WEAK_DISTANCE_CAP {
            Some(weak_distance(a, b).map_err(|e| Failure::criterion(e.to_string()))?)
        } else {
            None
        };
        rows.push((ta.times[k], d, dw));
    }

    let out_dir = &cfg_a.output_dir;
    output::write_atomic(&out_dir.join("distance.csv"), &output::distance_csv(&rows))
        .map_err(|e| Failure::criterion(e.to_string()))?;

    let d0 = rows[0].1;
    let max_d = rows.iter().map(|r| r.1).fold(0.0f64, f64::max);
    let contraction_ok = if d0 > 1e-15 { max_d <= d0 * (1.0 + slack) } else { max_d <= 1e-9 };
    let summary = serde_json::json!({
        "schema": 1,
        "d_initial": d0,
        "d_max": max_d,
        "ratio": if d0 > 1e-15 { max_d / d0 } else { 0.0 },
        "slack": slack,
        "contraction_holds": contraction_ok,
    });
    output::write_atomic(
        &out_dir.join("compare_summary.json"),
        &format!("{}\n", serde_json::to_string_pretty(&summary).expect("serializable")),
    )
    .map_err(|e| Failure::criterion(e.to_string()))?;

    if contraction_ok {
        Ok(())
    } else {
        Err(Failure::criterion(format!(
            "contraction violated: max_t d(t) = {max_d:.6e} > (1 + {slack}) · d(0) = {:.6e}",
            d0 * (1.0 + slack)
        )))
    }
}

/// Extracts the reconstructed cloud at time `t` from a `trajectory.csv`
/// (piecewise-constant right-closed in time, matching the interpolation
/// convention) and writes it as `x,v,weight` CSV.
pub fn reconstruct(trajectory_path: &Path, t: f64, output: Option<&Path>) -> Result<(), Failure> {
    let text = std::fs::read_to_string(trajectory_path)
        .map_err(|e| Failure::usage(format!("cannot read {}: {e}", trajectory_path.display())))?;
    let mut lines = text.lines();
    match lines.next() {
        Some("t,label_index,atom_index,x,v,weight") => {}
        _ => return Err(Failure::usage("not a trajectory.csv (header mismatch)")),
    }
    let mut rows: Vec<(f64, f64, f64, f64)> = Vec::new(); // (t, x, v, weight)
    for (ln, line) in lines.enumerate() {
        let mut it = line.split(',');
        let mut field = |name: &str| -> Result<f64, Failure> {
            it.next()
                .ok_or_else(|| Failure::usage(format!("row {}: missing {name}", ln + 2)))?
                .parse::<f64>()
                .map_err(|e| Failure::usage(format!("row {}: bad {name}: {e}", ln + 2)))
        };
        let time = field("t")?;
        let _label = field("label_index")?;
        let _atom = field("atom_index")?;
        let x = field("x")?;
        let v = field("v")?;
        let w = field("weight")?;
        rows.push((time, x, v, w));
    }
    if rows.is_empty() {
        return Err(Failure::usage("trajectory.csv has no data rows"));
    }
    let mut times: Vec<f64> = rows.iter().map(|r| r.0).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let horizon = *times.last().expect("nonempty");
    if t < -1e-12 || t > horizon + 1e-12 {
        return Err(Failure::usage(format!("time {t} outside recorded range [0, {horizon}]")));
    }
    let guard = 1e-12 * t.abs().max(1.0);
    let idx = times.partition_point(|&tk| tk < t - guard);
    let t_sel = times[idx.min(times.len() - 1)];

    let mut out = String::from("x,v,weight\n");
    for &(time, x, v, w) in &rows {
        if time == t_sel {
            out.push_str(&format!("{x:.16e},{v:.16e},{w:.16e}\n"));
        }
    }
    match output {
        Some(path) => output::write_atomic(path, &out)
            .map_err(|e| Failure::criterion(format!("writing {}: {e}", path.display()))),
        None => {
            print!("{out}");
            Ok(())
        }
    }
}
