//! Output emission: CSV and JSON files written atomically (temp file +
//! rename), floats at 17 significant digits so reruns are byte-identical.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use granuflow_core::jko::Trajectory;
use granuflow_core::kinetic;
use granuflow_core::measures::marginal_rho;

/// Writes `content` to `path` atomically.
pub fn write_atomic(path: &Path, content: &str) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    let tmp: PathBuf = dir.join(format!(
        ".{}.tmp",
        path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
    ));
    std::fs::write(&tmp, content)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

/// `trajectory.csv`: one row per atom per recorded time. The `v` column is
/// the reconstructed kinetic velocity `a − G_mid(x)` and `weight` the
/// phase-space mass `μ_i w`, so a time slice of this file *is* the
/// reconstructed cloud.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut out = String::from("t,label_index,atom_index,x,v,weight\n");
    for (k, state) in traj.states.iter().enumerate() {
        let t = traj.times[k];
        let rho = marginal_rho(state);
        for (i, s) in state.species().iter().enumerate() {
            let a = state.grid().labels()[i];
            let mu = state.grid().quad_weights()[i];
            for (j, (x, w)) in s.atoms().enumerate() {
                let v = a - rho.cdf_mid(x);
                let _ = writeln!(
                    out,
                    "{},{i},{j},{},{},{}",
                    fmt(t),
                    fmt(x),
                    fmt(v),
                    fmt(w * mu)
                );
            }
        }
    }
    out
}

/// `energy.csv`: per recorded time the split energy and the distance moved
/// in the step that produced the row (0 for the initial state).
pub fn energy_csv(traj: &Trajectory) -> String {
    let mut out = String::from("t,j0,j1,total,step_distance\n");
    for (k, e) in traj.energies.iter().enumerate() {
        let step = if k == 0 { 0.0 } else { traj.step_distances[k - 1] };
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            fmt(traj.times[k]),
            fmt(e.j0),
            fmt(e.j1),
            fmt(e.total),
            fmt(step)
        );
    }
    out
}

/// `distance.csv` for paired runs; `d_w` may be missing (empty field) at
/// times where the exact 2D LP was skipped or over its atom cap.
pub fn distance_csv(rows: &[(f64, f64, Option<f64>)]) -> String {
    let mut out = String::from("t,d,d_w\n");
    for &(t, d, dw) in rows {
        let dw_s = dw.map(fmt).unwrap_or_default();
        let _ = writeln!(out, "{},{},{dw_s}", fmt(t), fmt(d));
    }
    out
}

/// Reconstructed final cloud as CSV.
pub fn final_cloud_csv(traj: &Trajectory) -> Result<String, granuflow_core::Error> {
    let cloud = kinetic::reconstruct(traj.states.last().expect("nonempty trajectory"))?;
    let mut buf = Vec::new();
    kinetic::write_cloud_csv(&cloud, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is ascii"))
}
