//! Dense min-cost transport solver (successive shortest augmenting paths
//! with node potentials).
//!
//! Solves `min Σ γ_ij c_ij` subject to `Σ_j γ_ij = s_i`, `Σ_i γ_ij = d_j`,
//! `γ ≥ 0` on the complete bipartite graph. Costs must be nonnegative, which
//! lets every shortest-path computation run Dijkstra on reduced costs. The
//! solver is exact up to floating rounding and makes no use of any ordering
//! structure of the ground space, so it serves as an oracle for the 1D
//! quantile formulas.

use crate::error::{Error, Result};

const SUPPLY_EPS: f64 = 1e-15;

/// Returns the optimal transport cost between `supplies` and `demands`.
pub fn min_cost_transport(
    supplies: &[f64],
    demands: &[f64],
    cost: impl Fn(usize, usize) -> f64,
) -> Result<f64> {
    let n = supplies.len();
    let m = demands.len();
    if n == 0 || m == 0 {
        return Err(Error::EmptyMeasure);
    }
    let c: Vec<Vec<f64>> = (0..n).map(|i| (0..m).map(|j| cost(i, j)).collect()).collect();
    for row in &c {
        for &v in row {
            if !(v >= 0.0) {
                return Err(Error::Invalid(format!("negative or NaN transport cost {v}")));
            }
        }
    }

    let mut remaining: Vec<f64> = supplies.to_vec();
    let mut deficit: Vec<f64> = demands.to_vec();
    let mut flow = vec![vec![0.0f64; m]; n];
    // potentials: reduced cost of arc i→j is c[i][j] − u[i] − v[j] ≥ 0
    let mut pot_u = vec![0.0f64; n];
    let mut pot_v = vec![0.0f64; m];

    let total_demand: f64 = demands.iter().sum();
    let mut shipped = 0.0f64;
    // Augmentations typically saturate a source or a sink each; the slack
    // covers degenerate ones that only empty a backward arc.
    let max_augmentations = 32 * (n + m) + 256;

    for _ in 0..max_augmentations {
        if shipped >= total_demand - SUPPLY_EPS * total_demand.max(1.0) {
            break;
        }
        // Dijkstra over the residual graph from the super-source (all sources
        // with remaining supply) to any sink with remaining deficit.
        let inf = f64::INFINITY;
        let mut dist_u = vec![inf; n];
        let mut dist_v = vec![inf; m];
        let mut done_u = vec![false; n];
        let mut done_v = vec![false; m];
        // prev_v[j] = source that reaches sink j; prev_u[i] = sink whose
        // residual (backward) arc reaches source i
        let mut prev_v = vec![usize::MAX; m];
        let mut prev_u = vec![usize::MAX; n];
        for i in 0..n {
            if remaining[i] > SUPPLY_EPS {
                dist_u[i] = 0.0;
            }
        }
        loop {
            // pick the unsettled node with smallest distance (dense scan)
            let mut best = inf;
            let mut pick: Option<(bool, usize)> = None; // (is_source, index)
            for i in 0..n {
                if !done_u[i] && dist_u[i] < best {
                    best = dist_u[i];
                    pick = Some((true, i));
                }
            }
            for j in 0..m {
                if !done_v[j] && dist_v[j] < best {
                    best = dist_v[j];
                    pick = Some((false, j));
                }
            }
            let Some((is_source, idx)) = pick else { break };
            if is_source {
                done_u[idx] = true;
                for j in 0..m {
                    if done_v[j] {
                        continue;
                    }
                    let rc = (c[idx][j] - pot_u[idx] - pot_v[j]).max(0.0);
                    let nd = dist_u[idx] + rc;
                    if nd < dist_v[j] {
                        dist_v[j] = nd;
                        prev_v[j] = idx;
                    }
                }
            } else {
                done_v[idx] = true;
                for i in 0..n {
                    if done_u[i] || flow[i][idx] <= SUPPLY_EPS {
                        continue;
                    }
                    // backward arc j→i with reduced cost −(c − u − v) ≥ 0 on
                    // arcs carrying flow (complementary slackness keeps it 0)
                    let rc = (pot_u[i] + pot_v[idx] - c[i][idx]).max(0.0);
                    let nd = dist_v[idx] + rc;
                    if nd < dist_u[i] {
                        dist_u[i] = nd;
                        prev_u[i] = idx;
                    }
                }
            }
        }

        // closest reachable sink with deficit
        let mut target = None;
        let mut best = inf;
        for j in 0..m {
            if deficit[j] > SUPPLY_EPS && dist_v[j] < best {
                best = dist_v[j];
                target = Some(j);
            }
        }
        let Some(t) = target else {
            return Err(Error::Invalid(
                "transport network disconnected before demands were met".into(),
            ));
        };

        // Update potentials with the settled distances (capped at the target
        // distance) so reduced costs stay nonnegative and shortest-path arcs
        // become tight.
        let d_target = dist_v[t];
        for i in 0..n {
            if dist_u[i] < inf {
                pot_u[i] -= dist_u[i].min(d_target);
            }
        }
        for j in 0..m {
            if dist_v[j] < inf {
                pot_v[j] += dist_v[j].min(d_target);
            }
        }

        // Walk the path backward from t to a source that still has supply
        // (such a source is a Dijkstra root, so the walked path is shortest),
        // recording the bottleneck.
        let mut bottleneck = deficit[t];
        let mut j = t;
        loop {
            let i = prev_v[j];
            if remaining[i] > SUPPLY_EPS {
                bottleneck = bottleneck.min(remaining[i]);
                break;
            }
            let back = prev_u[i];
            bottleneck = bottleneck.min(flow[i][back]);
            j = back;
        }

        // apply the augmentation along the same walk
        let mut j = t;
        loop {
            let i = prev_v[j];
            flow[i][j] += bottleneck;
            if remaining[i] > SUPPLY_EPS {
                remaining[i] -= bottleneck;
                break;
            }
            let back = prev_u[i];
            flow[i][back] -= bottleneck;
            j = back;
        }
        deficit[t] -= bottleneck;
        shipped += bottleneck;
    }

    if shipped < total_demand * (1.0 - 1e-9) - 1e-12 {
        return Err(Error::Invalid(format!(
            "transport solver stalled: shipped {shipped} of {total_demand}"
        )));
    }

    let mut total = 0.0;
    for i in 0..n {
        for j in 0..m {
            total += flow[i][j] * c[i][j];
        }
    }
    Ok(total)
}
