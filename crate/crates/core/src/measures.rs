//! The labeled product-state model: a family of measures on the line indexed
//! by the conserved label `a = v + G_0(x)`, together with the quadrature
//! structure of the label space, the distances `d` and `d_w`, and the
//! disintegration of an initial phase-space cloud into that family.

use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::ot1d::{self, DiscreteMeasure};
use crate::transport_lp;

/// Combined atom cap for the exact 2D LP behind [`weak_distance`].
pub const WEAK_DISTANCE_CAP: usize = 1024;

/// Label values with their quadrature weights and per-label masses.
///
/// `labels` are strictly increasing; `quad_weights[i]` is the μ-measure of
/// label `i` (the bin width for Lebesgue labels, 1 for discrete labels);
/// `masses[i] = h(a_i)` is the total mass each species must carry. The
/// normalization `Σ h_i μ_i = 1` mirrors `∫ h dμ = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelGrid {
    labels: Vec<f64>,
    quad_weights: Vec<f64>,
    masses: Vec<f64>,
}

impl LabelGrid {
    pub fn new(labels: Vec<f64>, quad_weights: Vec<f64>, masses: Vec<f64>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Invalid("label grid must have at least one label".into()));
        }
        if labels.len() != quad_weights.len() || labels.len() != masses.len() {
            return Err(Error::Invalid("label grid field lengths differ".into()));
        }
        if labels.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Invalid("labels must be strictly increasing".into()));
        }
        if quad_weights.iter().any(|&m| !(m > 0.0)) {
            return Err(Error::Invalid("quadrature weights must be positive".into()));
        }
        if masses.iter().any(|&h| !(h >= 0.0)) {
            return Err(Error::Invalid("masses must be nonnegative".into()));
        }
        let total: f64 = quad_weights.iter().zip(&masses).map(|(m, h)| m * h).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Invalid(format!("Σ h_i μ_i = {total}, expected 1")));
        }
        Ok(Self { labels, quad_weights, masses })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn quad_weights(&self) -> &[f64] {
        &self.quad_weights
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    /// True when every label lies in `[−r_v, r_v + 1]`.
    pub fn labels_within(&self, r_v: f64) -> bool {
        self.labels.iter().all(|&a| a >= -r_v - 1e-12 && a <= r_v + 1.0 + 1e-12)
    }
}

/// One measure per label: the discrete stand-in for the product-space element.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileState {
    grid: LabelGrid,
    species: Vec<DiscreteMeasure>,
    radius: f64,
}

impl ProfileState {
    /// Validates per-label masses against the grid and support against
    /// `radius`.
    pub fn new(grid: LabelGrid, species: Vec<DiscreteMeasure>, radius: f64) -> Result<Self> {
        if species.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        for (i, s) in species.iter().enumerate() {
            let h = grid.masses[i];
            if (s.total_mass() - h).abs() > 1e-9 * h.max(1.0) {
                return Err(Error::Invalid(format!(
                    "species {i} carries mass {} but h = {h}",
                    s.total_mass()
                )));
            }
            if s.support_radius() > radius + 1e-12 {
                return Err(Error::Invalid(format!(
                    "species {i} has support radius {} > {radius}",
                    s.support_radius()
                )));
            }
        }
        Ok(Self { grid, species, radius })
    }

    pub fn grid(&self) -> &LabelGrid {
        &self.grid
    }

    pub fn species(&self) -> &[DiscreteMeasure] {
        &self.species
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Tightest support radius actually realized by the atoms.
    pub fn realized_radius(&self) -> f64 {
        self.species.iter().map(|s| s.support_radius()).fold(0.0, f64::max)
    }

    /// Replaces the species, keeping grid and radius (validates).
    pub fn with_species(&self, species: Vec<DiscreteMeasure>, radius: f64) -> Result<Self> {
        Self::new(self.grid.clone(), species, radius)
    }

    /// Flattens to `(position, μ_i · w)` pairs, the atom list of `𝛎 ⊗ μ`
    /// projected to the line. Total mass 1.
    pub fn flattened_atoms(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for (i, s) in self.species.iter().enumerate() {
            let mu = self.grid.quad_weights[i];
            for (x, w) in s.atoms() {
                out.push((x, w * mu));
            }
        }
        out
    }
}

/// Weighted phase-space samples, the discrete stand-in for `f_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct KineticCloud {
    samples: Vec<(f64, f64, f64)>, // (x, v, weight)
    r_x: f64,
    r_v: f64,
}

impl KineticCloud {
    /// Weights must be positive and sum to 1 (within 1e-9).
    pub fn new(samples: Vec<(f64, f64, f64)>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyCloud);
        }
        let mut total = 0.0;
        let (mut r_x, mut r_v) = (0.0f64, 0.0f64);
        for &(x, v, w) in &samples {
            if !x.is_finite() || !v.is_finite() || !w.is_finite() {
                return Err(Error::Invalid(format!("non-finite sample ({x}, {v}, {w})")));
            }
            if w <= 0.0 {
                return Err(Error::Invalid(format!("non-positive weight {w}")));
            }
            total += w;
            r_x = r_x.max(x.abs());
            r_v = r_v.max(v.abs());
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Invalid(format!("cloud weights sum to {total}, expected 1")));
        }
        Ok(Self { samples, r_x, r_v })
    }

    pub fn samples(&self) -> &[(f64, f64, f64)] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Support box half-widths recorded at construction.
    pub fn support_box(&self) -> (f64, f64) {
        (self.r_x, self.r_v)
    }

    /// Spatial marginal as a canonical discrete measure.
    pub fn spatial_marginal(&self) -> DiscreteMeasure {
        DiscreteMeasure::new(self.samples.iter().map(|&(x, _, w)| (x, w)))
            .expect("cloud atoms are finite")
    }

    /// Reads a cloud from CSV with header `x,v,weight`.
    pub fn from_csv_path(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(file)
    }

    pub fn from_csv_reader(reader: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        {
            let headers = rdr.headers()?;
            let expected = ["x", "v", "weight"];
            let got: Vec<&str> = headers.iter().map(|h| h.trim()).collect();
            if got != expected {
                return Err(Error::Invalid(format!(
                    "expected CSV header x,v,weight, found {}",
                    got.join(",")
                )));
            }
        }
        let mut samples = Vec::new();
        for record in rdr.records() {
            let record = record?;
            let parse = |idx: usize| -> Result<f64> {
                record
                    .get(idx)
                    .ok_or_else(|| Error::Invalid("short CSV record".into()))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Invalid(format!("bad float in CSV: {e}")))
            };
            samples.push((parse(0)?, parse(1)?, parse(2)?));
        }
        Self::new(samples)
    }
}

/// The common spatial marginal `ρ = Σ_i μ_i ν^i`, a probability measure.
pub fn marginal_rho(state: &ProfileState) -> DiscreteMeasure {
    DiscreteMeasure::new(state.flattened_atoms()).expect("state atoms are finite")
}

/// Disintegrates an initial cloud into a labeled product state.
///
/// Each sample receives the label `a = v + G_0(x)` where `G_0` is the
/// midpoint CDF of the spatial marginal. When the number of distinct label
/// values equals `label_count` the labels are kept as-is with counting
/// quadrature (`μ_i = 1`); otherwise the labels are binned into
/// `label_count` equal-width bins over the realized range, with `μ_i` the
/// bin width and bin centers as representatives.
pub fn disintegrate_initial(cloud: &KineticCloud, label_count: usize) -> Result<ProfileState> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    if label_count == 0 {
        return Err(Error::Invalid("label_count must be positive".into()));
    }
    let rho0 = cloud.spatial_marginal();
    let labeled: Vec<(f64, f64, f64)> = cloud
        .samples()
        .iter()
        .map(|&(x, v, w)| (v + rho0.cdf_mid(x), x, w))
        .collect();

    let mut sorted_labels: Vec<f64> = labeled.iter().map(|&(a, _, _)| a).collect();
    sorted_labels.sort_by(f64::total_cmp);
    let scale = sorted_labels
        .iter()
        .fold(1.0f64, |s, &a| s.max(a.abs()));
    let mut distinct: Vec<f64> = Vec::new();
    for &a in &sorted_labels {
        match distinct.last() {
            Some(&last) if (a - last).abs() <= 1e-12 * scale => {}
            _ => distinct.push(a),
        }
    }

    if distinct.len() == 1 && label_count > 1 {
        return Err(Error::DegenerateLabels { count: 1, requested: label_count });
    }

    let (labels, quad_weights, assign): (Vec<f64>, Vec<f64>, Vec<usize>) =
        if distinct.len() == label_count {
            // counting measure: one label per distinct value
            let assign = labeled
                .iter()
                .map(|&(a, _, _)| {
                    distinct
                        .iter()
                        .position(|&d| (a - d).abs() <= 1e-12 * scale)
                        .expect("label was collected above")
                })
                .collect();
            (distinct.clone(), vec![1.0; distinct.len()], assign)
        } else {
            // Lebesgue quadrature: equal-width bins over the realized range
            let lo = sorted_labels[0];
            let hi = *sorted_labels.last().unwrap();
            let width = (hi - lo) / label_count as f64;
            if !(width > 0.0) {
                return Err(Error::DegenerateLabels { count: distinct.len(), requested: label_count });
            }
            let centers = (0..label_count)
                .map(|i| lo + (i as f64 + 0.5) * width)
                .collect();
            let assign = labeled
                .iter()
                .map(|&(a, _, _)| (((a - lo) / width) as usize).min(label_count - 1))
                .collect();
            (centers, vec![width; label_count], assign)
        };

    let n = labels.len();
    let mut bins: Vec<Vec<(f64, f64)>> = vec![Vec::new(); n];
    for (&(_, x, w), &i) in labeled.iter().zip(&assign) {
        bins[i].push((x, w));
    }
    let mut masses = vec![0.0; n];
    let mut species = Vec::with_capacity(n);
    for (i, bin) in bins.into_iter().enumerate() {
        // ν^{a_i} carries h_i = (bin mass)/μ_i so that Σ_i μ_i ν^i has mass 1
        let m = DiscreteMeasure::new(bin)?.scaled(1.0 / quad_weights[i]);
        masses[i] = m.total_mass();
        species.push(m);
    }
    let grid = LabelGrid::new(labels, quad_weights, masses)?;
    let (r_x, _) = cloud.support_box();
    let radius = r_x.max(species.iter().map(|s| s.support_radius()).fold(0.0, f64::max));
    ProfileState::new(grid, species, radius)
}

/// The product distance `d = sqrt(Σ_i μ_i W2²(ν_i, θ_i))`, with each `W2²`
/// computed at the species' actual (equal) masses.
pub fn product_distance(s1: &ProfileState, s2: &ProfileState) -> Result<f64> {
    if s1.grid != s2.grid {
        return Err(Error::GridMismatch);
    }
    let mut acc = 0.0;
    for ((a, b), &mu) in s1.species.iter().zip(&s2.species).zip(s1.grid.quad_weights()) {
        if a.is_empty() && b.is_empty() {
            continue;
        }
        acc += mu * ot1d::wasserstein2_sq(a, b)?;
    }
    Ok(acc.sqrt())
}

/// The weak distance `d_w = W2(𝛎 ⊗ μ, 𝛉 ⊗ μ)` on the `(a, x)` plane,
/// solved as an exact 2D transport LP. A diagnostic, not an inner-loop
/// quantity, hence the combined atom cap.
pub fn weak_distance(s1: &ProfileState, s2: &ProfileState) -> Result<f64> {
    if s1.grid != s2.grid {
        return Err(Error::GridMismatch);
    }
    let points = |s: &ProfileState| -> Vec<(f64, f64, f64)> {
        let mut pts = Vec::new();
        for (i, sp) in s.species.iter().enumerate() {
            let a = s.grid.labels[i];
            let mu = s.grid.quad_weights[i];
            for (x, w) in sp.atoms() {
                pts.push((a, x, w * mu));
            }
        }
        pts
    };
    let p1 = points(s1);
    let p2 = points(s2);
    let size = p1.len() + p2.len();
    if size > WEAK_DISTANCE_CAP {
        return Err(Error::TooLarge { size, cap: WEAK_DISTANCE_CAP });
    }
    let w1: Vec<f64> = p1.iter().map(|&(_, _, w)| w).collect();
    let w2: Vec<f64> = p2.iter().map(|&(_, _, w)| w).collect();
    let cost = |i: usize, j: usize| {
        let (a1, x1, _) = p1[i];
        let (a2, x2, _) = p2[j];
        (a1 - a2).powi(2) + (x1 - x2).powi(2)
    };
    Ok(transport_lp::min_cost_transport(&w1, &w2, cost)?.sqrt())
}

/// Displacement interpolation `𝛎_ε` along the per-label monotone couplings:
/// atoms at `(1−ε)x + εy` carrying the coupled mass.
pub fn displacement_interpolate(
    s1: &ProfileState,
    s2: &ProfileState,
    eps: f64,
) -> Result<ProfileState> {
    if s1.grid != s2.grid {
        return Err(Error::GridMismatch);
    }
    let mut species = Vec::with_capacity(s1.species.len());
    for (a, b) in s1.species.iter().zip(&s2.species) {
        if a.is_empty() && b.is_empty() {
            species.push(a.clone());
            continue;
        }
        let plan = ot1d::monotone_coupling(a, b)?;
        let atoms = plan.pairs.iter().map(|&(i, j, m)| {
            ((1.0 - eps) * a.positions()[i] + eps * b.positions()[j], m)
        });
        species.push(DiscreteMeasure::new(atoms)?);
    }
    let radius = s1.radius.max(s2.radius);
    ProfileState::new(s1.grid.clone(), species, radius)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn dirac_state(a: f64, x: f64) -> ProfileState {
        let grid = LabelGrid::new(vec![a], vec![1.0], vec![1.0]).unwrap();
        ProfileState::new(grid, vec![DiscreteMeasure::dirac(x, 1.0)], x.abs().max(1.0)).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(LabelGrid::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![0.5, 0.5]).is_err());
        assert!(LabelGrid::new(vec![0.0, 1.0], vec![1.0, 1.0], vec![0.5, 0.6]).is_err());
        let g = LabelGrid::new(vec![0.0, 1.0], vec![1.0, 1.0], vec![0.5, 0.5]).unwrap();
        assert!(g.labels_within(1.0));
        assert!(!g.labels_within(-0.5));
    }

    #[test]
    fn marginal_rho_examples() {
        let s = dirac_state(0.5, 0.0);
        let rho = marginal_rho(&s);
        assert_eq!(rho.positions(), &[0.0]);
        assert_abs_diff_eq!(rho.total_mass(), 1.0, epsilon = 1e-12);

        let grid = LabelGrid::new(vec![0.0, 1.0], vec![1.0, 1.0], vec![0.5, 0.5]).unwrap();
        let s = ProfileState::new(
            grid,
            vec![DiscreteMeasure::dirac(0.0, 0.5), DiscreteMeasure::dirac(1.0, 0.5)],
            1.0,
        )
        .unwrap();
        let rho = marginal_rho(&s);
        assert_eq!(rho.positions(), &[0.0, 1.0]);
        assert_eq!(rho.weights(), &[0.5, 0.5]);

        // μ = {2, 2}, h = {¼, ¼}, both species ¼δ₀ → δ₀ after merging
        let grid = LabelGrid::new(vec![0.0, 1.0], vec![2.0, 2.0], vec![0.25, 0.25]).unwrap();
        let s = ProfileState::new(
            grid,
            vec![DiscreteMeasure::dirac(0.0, 0.25), DiscreteMeasure::dirac(0.0, 0.25)],
            1.0,
        )
        .unwrap();
        let rho = marginal_rho(&s);
        assert_eq!(rho.positions(), &[0.0]);
        assert_abs_diff_eq!(rho.total_mass(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn disintegrate_single_sample() {
        let cloud = KineticCloud::new(vec![(0.0, 0.3, 1.0)]).unwrap();
        let s = disintegrate_initial(&cloud, 1).unwrap();
        assert_eq!(s.grid().len(), 1);
        // midpoint CDF of a single atom is ½, so a = 0.3 + 0.5
        assert_abs_diff_eq!(s.grid().labels()[0], 0.8, epsilon = 1e-12);
        assert_eq!(s.grid().quad_weights(), &[1.0]);
        assert_abs_diff_eq!(s.grid().masses()[0], 1.0, epsilon = 1e-12);
        assert_eq!(s.species()[0].positions(), &[0.0]);
    }

    #[test]
    fn disintegrate_two_samples() {
        let cloud = KineticCloud::new(vec![(-1.0, 0.0, 0.5), (1.0, 0.0, 0.5)]).unwrap();
        let s = disintegrate_initial(&cloud, 2).unwrap();
        // midpoint CDF values ¼ and ¾ at the two atoms
        assert_abs_diff_eq!(s.grid().labels()[0], 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(s.grid().labels()[1], 0.75, epsilon = 1e-12);
        assert_eq!(s.grid().quad_weights(), &[1.0, 1.0]);
        assert_eq!(s.species()[0].positions(), &[-1.0]);
        assert_eq!(s.species()[1].positions(), &[1.0]);
        assert_abs_diff_eq!(s.species()[0].total_mass(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn disintegrate_degenerate_labels() {
        let cloud = KineticCloud::new(vec![(0.0, 0.1, 0.5), (0.0, 0.1, 0.5)]).unwrap();
        assert!(matches!(
            disintegrate_initial(&cloud, 3),
            Err(Error::DegenerateLabels { .. })
        ));
    }

    #[test]
    fn disintegrate_equal_width_bins() {
        // labels spread over a range, fewer bins than distinct values
        let n = 16;
        let w = 1.0 / n as f64;
        let samples: Vec<(f64, f64, f64)> =
            (0..n).map(|k| (k as f64 / n as f64, k as f64 * 0.1, w)).collect();
        let cloud = KineticCloud::new(samples).unwrap();
        let s = disintegrate_initial(&cloud, 4).unwrap();
        assert_eq!(s.grid().len(), 4);
        let total: f64 = s
            .grid()
            .masses()
            .iter()
            .zip(s.grid().quad_weights())
            .map(|(h, m)| h * m)
            .sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn product_distance_examples() {
        let s = dirac_state(0.5, 0.0);
        assert_eq!(product_distance(&s, &s).unwrap(), 0.0);

        let t = dirac_state(0.5, 1.0);
        assert_abs_diff_eq!(product_distance(&s, &t).unwrap(), 1.0, epsilon = 1e-12);

        // two labels, species pairs (½δ₀ vs ½δ₂) and (½δ₀ vs ½δ₀): sqrt(½·4)
        let grid = LabelGrid::new(vec![0.0, 1.0], vec![1.0, 1.0], vec![0.5, 0.5]).unwrap();
        let s1 = ProfileState::new(
            grid.clone(),
            vec![DiscreteMeasure::dirac(0.0, 0.5), DiscreteMeasure::dirac(0.0, 0.5)],
            2.0,
        )
        .unwrap();
        let s2 = ProfileState::new(
            grid,
            vec![DiscreteMeasure::dirac(2.0, 0.5), DiscreteMeasure::dirac(0.0, 0.5)],
            2.0,
        )
        .unwrap();
        assert_abs_diff_eq!(product_distance(&s1, &s2).unwrap(), 2f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn grid_mismatch_rejected() {
        let s = dirac_state(0.5, 0.0);
        let t = dirac_state(0.25, 0.0);
        assert!(matches!(product_distance(&s, &t), Err(Error::GridMismatch)));
        assert!(matches!(weak_distance(&s, &t), Err(Error::GridMismatch)));
    }

    #[test]
    fn weak_distance_examples() {
        let s = dirac_state(0.5, 0.0);
        assert_abs_diff_eq!(weak_distance(&s, &s).unwrap(), 0.0, epsilon = 1e-12);
        let t = dirac_state(0.5, 1.0);
        assert_abs_diff_eq!(weak_distance(&s, &t).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn csv_round_trip() {
        let csv_text = "x,v,weight\n0.0,1.0,0.5\n1.0,-1.0,0.5\n";
        let cloud = KineticCloud::from_csv_reader(csv_text.as_bytes()).unwrap();
        assert_eq!(cloud.len(), 2);
        assert_eq!(cloud.support_box(), (1.0, 1.0));
        let bad = "a,b,c\n0,0,1\n";
        assert!(KineticCloud::from_csv_reader(bad.as_bytes()).is_err());
        let bad_sum = "x,v,weight\n0.0,1.0,0.4\n";
        assert!(KineticCloud::from_csv_reader(bad_sum.as_bytes()).is_err());
    }
}
