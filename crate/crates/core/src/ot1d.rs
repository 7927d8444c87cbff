//! Exact 1D optimal transport between weighted discrete measures.
//!
//! In one dimension the optimal plan for every cost `|x−y|^p`, `p ≥ 1`, is
//! the monotone (quantile) coupling, so `W_p` reduces to a merge of the two
//! sorted weight sequences. Distances are computed with the actual total
//! masses, i.e. `W_p^p(ν, θ) = h · W_p^p(ν/h, θ/h)` when both measures carry
//! mass `h`; measures of unequal mass are rejected.
//!
//! [`brute_force_wasserstein`] solves the same transport problem as a linear
//! program and is deliberately independent of the quantile path; it exists to
//! test it.

use crate::error::{Error, Result};
use crate::transport_lp;

/// Relative tolerance for the equal-mass precondition of transport ops.
const MASS_TOL: f64 = 1e-9;

/// Atom-count cap for the LP oracle.
const BRUTE_FORCE_CAP: usize = 10;

/// A nonnegative measure on the line with finitely many atoms.
///
/// Canonical form: atoms sorted by position, equal positions merged,
/// zero-weight atoms removed. The total mass is cached, as are the cumulative
/// weights used by [`cdf_pair`](Self::cdf_pair) and
/// [`quantile`](Self::quantile).
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    positions: Vec<f64>,
    weights: Vec<f64>,
    /// cum[i] = weights[0] + … + weights[i]
    cum: Vec<f64>,
    total_mass: f64,
}

impl DiscreteMeasure {
    /// Builds a measure from `(position, weight)` pairs, canonicalizing.
    ///
    /// Zero-weight atoms are dropped; negative or non-finite entries are
    /// rejected. Atoms sharing a position are merged by summing weights.
    pub fn new(atoms: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let mut pairs: Vec<(f64, f64)> = Vec::new();
        for (x, w) in atoms {
            if !x.is_finite() || !w.is_finite() {
                return Err(Error::Invalid(format!("non-finite atom ({x}, {w})")));
            }
            if w < 0.0 {
                return Err(Error::Invalid(format!("negative weight {w} at {x}")));
            }
            if w > 0.0 {
                pairs.push((x, w));
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut positions: Vec<f64> = Vec::with_capacity(pairs.len());
        let mut weights: Vec<f64> = Vec::with_capacity(pairs.len());
        for (x, w) in pairs {
            match positions.last() {
                Some(&last) if last == x => *weights.last_mut().unwrap() += w,
                _ => {
                    positions.push(x);
                    weights.push(w);
                }
            }
        }
        let mut cum = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        for &w in &weights {
            acc += w;
            cum.push(acc);
        }
        Ok(Self { positions, weights, cum, total_mass: acc })
    }

    /// Point mass `mass · δ_x`.
    pub fn dirac(x: f64, mass: f64) -> Self {
        Self::new([(x, mass)]).expect("dirac atoms are finite")
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn atoms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.positions.iter().copied().zip(self.weights.iter().copied())
    }

    /// Right- and left-closed CDF values at `x`:
    /// `g = mass of (−∞, x]`, `g_minus = mass of (−∞, x)`.
    pub fn cdf_pair(&self, x: f64) -> (f64, f64) {
        let lt = self.positions.partition_point(|&p| p < x);
        let le = self.positions.partition_point(|&p| p <= x);
        let g_minus = if lt == 0 { 0.0 } else { self.cum[lt - 1] };
        let g = if le == 0 { 0.0 } else { self.cum[le - 1] };
        (g_minus, g)
    }

    /// Midpoint CDF `(G(x) + G⁻(x)) / 2`, the symmetric convention at atoms.
    pub fn cdf_mid(&self, x: f64) -> f64 {
        let (gm, g) = self.cdf_pair(x);
        0.5 * (gm + g)
    }

    /// Left-continuous generalized inverse of the CDF: the smallest position
    /// whose cumulative mass reaches `u`.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if self.is_empty() {
            return Err(Error::EmptyMeasure);
        }
        if !(u > 0.0 && u <= self.total_mass) {
            return Err(Error::OutOfRange { level: u, mass: self.total_mass });
        }
        let idx = self.cum.partition_point(|&c| c < u);
        Ok(self.positions[idx.min(self.positions.len() - 1)])
    }

    /// Largest absolute atom position (0 for the empty measure).
    pub fn support_radius(&self) -> f64 {
        self.positions.iter().fold(0.0, |r, &x| r.max(x.abs()))
    }

    /// Scales every weight by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            positions: self.positions.clone(),
            weights: self.weights.iter().map(|w| w * factor).collect(),
            cum: self.cum.iter().map(|c| c * factor).collect(),
            total_mass: self.total_mass * factor,
        }
    }

    /// W2-optimal approximation by `n` equal-mass atoms: positions at the
    /// quantile midpoints `(m − ½)/n` of the normalized measure. Exact (up to
    /// re-splitting of merged atoms) when the measure already consists of
    /// equal-mass atoms in groups of size dividing `n`.
    pub fn equal_mass_quantization(&self, n: usize) -> Result<Vec<f64>> {
        if self.is_empty() {
            return Err(Error::EmptyMeasure);
        }
        let h = self.total_mass;
        (0..n)
            .map(|m| self.quantile((m as f64 + 0.5) * h / n as f64))
            .collect()
    }
}

/// A transport plan between two discrete measures, stored as sparse
/// `(source_index, target_index, mass)` triples.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    pub pairs: Vec<(usize, usize, f64)>,
}

impl Coupling {
    /// Transport cost `Σ mass · |x_src − y_tgt|^p`.
    pub fn cost(&self, mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: u32) -> f64 {
        self.pairs
            .iter()
            .map(|&(i, j, m)| m * (mu.positions[i] - nu.positions[j]).abs().powi(p as i32))
            .sum()
    }

    /// Sum of transported mass into each target atom / out of each source atom.
    pub fn marginals(&self, n_source: usize, n_target: usize) -> (Vec<f64>, Vec<f64>) {
        let mut row = vec![0.0; n_source];
        let mut col = vec![0.0; n_target];
        for &(i, j, m) in &self.pairs {
            row[i] += m;
            col[j] += m;
        }
        (row, col)
    }
}

fn check_transport_inputs(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<()> {
    if mu.is_empty() || nu.is_empty() {
        return Err(Error::EmptyMeasure);
    }
    let diff = (mu.total_mass - nu.total_mass).abs();
    if diff > MASS_TOL * mu.total_mass.max(1.0) {
        return Err(Error::MassMismatch(mu.total_mass, nu.total_mass));
    }
    Ok(())
}

/// The co-monotone coupling between two equal-mass measures, obtained by
/// merging the two cumulative weight sequences. It is the optimal plan for
/// every cost `|x−y|^p` with `p ≥ 1`.
pub fn monotone_coupling(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<Coupling> {
    check_transport_inputs(mu, nu)?;
    let mut pairs = Vec::with_capacity(mu.len() + nu.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut ri = mu.weights[0];
    let mut rj = nu.weights[0];
    loop {
        let m = ri.min(rj);
        if m > 0.0 {
            pairs.push((i, j, m));
        }
        ri -= m;
        rj -= m;
        let i_done = ri <= 0.0;
        let j_done = rj <= 0.0;
        if i_done {
            i += 1;
            if i == mu.len() {
                break;
            }
            ri = mu.weights[i];
        }
        if j_done {
            j += 1;
            if j == nu.len() {
                // Mass drift from the tolerance in the precondition: dump the
                // remainder of the last source rows onto the last target.
                while i < mu.len() {
                    if ri > 0.0 {
                        pairs.push((i, nu.len() - 1, ri));
                    }
                    i += 1;
                    if i < mu.len() {
                        ri = mu.weights[i];
                    }
                }
                break;
            }
            rj = nu.weights[j];
        }
    }
    Ok(Coupling { pairs })
}

/// p-Wasserstein distance (`p ∈ {1, 2}`) via the monotone coupling.
pub fn wasserstein_p(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: u32) -> Result<f64> {
    assert!(p == 1 || p == 2, "only p = 1 and p = 2 are supported");
    let plan = monotone_coupling(mu, nu)?;
    let cost = plan.cost(mu, nu, p);
    Ok(if p == 1 { cost } else { cost.sqrt() })
}

/// Squared 2-Wasserstein distance, the quantity the JKO objective uses.
pub fn wasserstein2_sq(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    Ok(monotone_coupling(mu, nu)?.cost(mu, nu, 2))
}

/// Transport LP oracle for small instances.
///
/// Solves `min Σ γ_ij |x_i − y_j|^p` over all couplings with a dense
/// min-cost-flow routine that never looks at the 1D ordering, so it is an
/// independent check of [`wasserstein_p`].
pub fn brute_force_wasserstein(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    p: u32,
) -> Result<f64> {
    assert!(p == 1 || p == 2, "only p = 1 and p = 2 are supported");
    check_transport_inputs(mu, nu)?;
    let cap = BRUTE_FORCE_CAP;
    if mu.len() > cap || nu.len() > cap {
        return Err(Error::TooLarge { size: mu.len().max(nu.len()), cap });
    }
    let cost = |i: usize, j: usize| (mu.positions[i] - nu.positions[j]).abs().powi(p as i32);
    let total = transport_lp::min_cost_transport(mu.weights(), nu.weights(), cost)?;
    Ok(if p == 1 { total } else { total.sqrt() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn measure(atoms: &[(f64, f64)]) -> DiscreteMeasure {
        DiscreteMeasure::new(atoms.iter().copied()).unwrap()
    }

    fn random_measure(rng: &mut ChaCha8Rng, max_atoms: usize, normalize: bool) -> DiscreteMeasure {
        let n = rng.random_range(1..=max_atoms);
        let atoms: Vec<(f64, f64)> = (0..n)
            .map(|_| (rng.random_range(-5.0..5.0), rng.random_range(0.01..1.0)))
            .collect();
        let m = measure(&atoms);
        if normalize {
            m.scaled(1.0 / m.total_mass())
        } else {
            m
        }
    }

    #[test]
    fn canonicalize_merges_and_sorts() {
        let m = measure(&[(1.0, 0.25), (0.0, 0.5), (1.0, 0.25), (2.0, 0.0)]);
        assert_eq!(m.positions(), &[0.0, 1.0]);
        assert_eq!(m.weights(), &[0.5, 0.5]);
        assert_abs_diff_eq!(m.total_mass(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn rejects_bad_atoms() {
        assert!(DiscreteMeasure::new([(f64::NAN, 1.0)]).is_err());
        assert!(DiscreteMeasure::new([(0.0, -1.0)]).is_err());
    }

    #[test]
    fn cdf_pair_examples() {
        let m = measure(&[(0.0, 0.5), (1.0, 0.5)]);
        assert_eq!(m.cdf_pair(0.0), (0.0, 0.5));
        assert_eq!(m.cdf_pair(0.5), (0.5, 0.5));
        assert_eq!(m.cdf_pair(1.0), (0.5, 1.0));
    }

    #[test]
    fn quantile_examples() {
        let m = measure(&[(0.0, 0.5), (1.0, 0.5)]);
        assert_eq!(m.quantile(0.25).unwrap(), 0.0);
        assert_eq!(m.quantile(0.75).unwrap(), 1.0);
        let m3 = measure(&[(-1.0, 1.0 / 3.0), (0.0, 1.0 / 3.0), (2.0, 1.0 / 3.0)]);
        assert_eq!(m3.quantile(0.5).unwrap(), 0.0);
        assert!(m3.quantile(0.0).is_err());
        assert!(m3.quantile(1.5).is_err());
    }

    #[test]
    fn quantile_cdf_galois() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let m = random_measure(&mut rng, 6, false);
            let u = rng.random_range(0.0..1.0) * m.total_mass();
            let u = u.max(1e-12);
            let x = m.quantile(u).unwrap();
            let (_, g) = m.cdf_pair(x);
            assert!(g >= u - 1e-12);
            // smallest such position: any strictly smaller atom has g < u
            let x2 = rng.random_range(-6.0..6.0);
            let (_, g2) = m.cdf_pair(x2);
            if g2 >= u {
                assert!(m.quantile(u).unwrap() <= x2);
            }
        }
    }

    #[test]
    fn wasserstein_examples() {
        let d0 = DiscreteMeasure::dirac(0.0, 1.0);
        let d1 = DiscreteMeasure::dirac(1.0, 1.0);
        assert_abs_diff_eq!(wasserstein_p(&d0, &d1, 2).unwrap(), 1.0, epsilon = 1e-15);
        let m = measure(&[(0.0, 0.5), (1.0, 0.5)]);
        assert_eq!(wasserstein_p(&m, &m, 1).unwrap(), 0.0);
        assert_eq!(wasserstein_p(&m, &m, 2).unwrap(), 0.0);
        // monotone pairing 0→0, 1→3: cost ½·0 + ½·4 = 2
        let a = measure(&[(0.0, 0.5), (1.0, 0.5)]);
        let b = measure(&[(0.0, 0.5), (3.0, 0.5)]);
        assert_abs_diff_eq!(wasserstein_p(&a, &b, 2).unwrap(), 2f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn mass_mismatch_rejected() {
        let a = DiscreteMeasure::dirac(0.0, 1.0);
        let b = DiscreteMeasure::dirac(1.0, 0.5);
        assert!(matches!(wasserstein_p(&a, &b, 2), Err(Error::MassMismatch(_, _))));
        let e = DiscreteMeasure::new([]).unwrap();
        assert!(matches!(wasserstein_p(&a, &e, 2), Err(Error::EmptyMeasure)));
    }

    #[test]
    fn monotone_coupling_examples() {
        let plan = monotone_coupling(
            &DiscreteMeasure::dirac(0.0, 1.0),
            &DiscreteMeasure::dirac(1.0, 1.0),
        )
        .unwrap();
        assert_eq!(plan.pairs, vec![(0, 0, 1.0)]);

        let plan = monotone_coupling(
            &measure(&[(0.0, 0.5), (2.0, 0.5)]),
            &DiscreteMeasure::dirac(1.0, 1.0),
        )
        .unwrap();
        assert_eq!(plan.pairs, vec![(0, 0, 0.5), (1, 0, 0.5)]);

        let third = 1.0 / 3.0;
        let plan = monotone_coupling(
            &measure(&[(0.0, third), (1.0, 2.0 * third)]),
            &measure(&[(0.0, 2.0 * third), (2.0, third)]),
        )
        .unwrap();
        assert_eq!(plan.pairs.len(), 3);
        assert_eq!((plan.pairs[0].0, plan.pairs[0].1), (0, 0));
        assert_eq!((plan.pairs[1].0, plan.pairs[1].1), (1, 0));
        assert_eq!((plan.pairs[2].0, plan.pairs[2].1), (1, 1));
        for &(_, _, m) in &plan.pairs {
            assert_abs_diff_eq!(m, third, epsilon = 1e-12);
        }
    }

    #[test]
    fn coupling_marginals_reproduced() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let a = random_measure(&mut rng, 8, true);
            let b = random_measure(&mut rng, 8, true);
            let plan = monotone_coupling(&a, &b).unwrap();
            let (row, col) = plan.marginals(a.len(), b.len());
            for (r, w) in row.iter().zip(a.weights()) {
                assert_abs_diff_eq!(r, w, epsilon = 1e-12 * w.max(1.0));
            }
            for (c, w) in col.iter().zip(b.weights()) {
                assert_abs_diff_eq!(c, w, epsilon = 1e-12 * w.max(1.0));
            }
            // co-monotone: source indices and target indices both nondecreasing
            for w in plan.pairs.windows(2) {
                assert!(w[1].0 >= w[0].0 && w[1].1 >= w[0].1);
            }
        }
    }

    #[test]
    fn brute_force_examples() {
        let d0 = DiscreteMeasure::dirac(0.0, 1.0);
        let d1 = DiscreteMeasure::dirac(1.0, 1.0);
        assert_abs_diff_eq!(brute_force_wasserstein(&d0, &d1, 2).unwrap(), 1.0, epsilon = 1e-12);

        let a = measure(&[(0.0, 0.5), (1.0, 0.5)]);
        let b = measure(&[(0.0, 0.5), (3.0, 0.5)]);
        assert_abs_diff_eq!(
            brute_force_wasserstein(&a, &b, 2).unwrap(),
            2f64.sqrt(),
            epsilon = 1e-12
        );

        // ¼(0→1) + ½(2→1) + ¼(2→4): ¼·1 + ½·1 + ¼·2 = 1.25, and the same
        // value from ∫|F_μ − F_ν| = ¼·1 + ½·1 + ¼·2.
        let a = measure(&[(0.0, 0.25), (2.0, 0.75)]);
        let b = measure(&[(1.0, 0.75), (4.0, 0.25)]);
        assert_abs_diff_eq!(brute_force_wasserstein(&a, &b, 1).unwrap(), 1.25, epsilon = 1e-12);
        assert_abs_diff_eq!(wasserstein_p(&a, &b, 1).unwrap(), 1.25, epsilon = 1e-12);
    }

    #[test]
    fn brute_force_cap() {
        let atoms: Vec<(f64, f64)> = (0..11).map(|i| (i as f64, 1.0)).collect();
        let big = measure(&atoms);
        assert!(matches!(
            brute_force_wasserstein(&big, &big, 1),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn quantile_matches_lp_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..300 {
            let a = random_measure(&mut rng, 8, true);
            let b = random_measure(&mut rng, 8, true);
            for p in [1, 2] {
                let fast = wasserstein_p(&a, &b, p).unwrap();
                let lp = brute_force_wasserstein(&a, &b, p).unwrap();
                assert_abs_diff_eq!(fast, lp, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn w1_le_w2_on_probability_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..200 {
            let a = random_measure(&mut rng, 8, true);
            let b = random_measure(&mut rng, 8, true);
            let w1 = wasserstein_p(&a, &b, 1).unwrap();
            let w2 = wasserstein_p(&a, &b, 2).unwrap();
            assert!(w1 <= w2 + 1e-12, "w1 = {w1}, w2 = {w2}");
        }
    }

    #[test]
    fn kantorovich_duality_spot_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for _ in 0..100 {
            let a = random_measure(&mut rng, 8, true);
            let b = random_measure(&mut rng, 8, true);
            let w1 = wasserstein_p(&a, &b, 1).unwrap();
            // random 1-Lipschitz piecewise-linear f: f(x) = ∫_{-7}^x s(t) dt
            // with slopes in [−1, 1] switching at sorted knots
            let mut knots: Vec<f64> = (0..5).map(|_| rng.random_range(-6.0..6.0)).collect();
            knots.sort_by(f64::total_cmp);
            let slopes: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            let f = |x: f64| {
                let mut val = 0.0;
                let mut prev = -7.0;
                for (k, &kn) in knots.iter().enumerate() {
                    let hi = kn.min(x);
                    if hi > prev {
                        val += slopes[k] * (hi - prev);
                        prev = hi;
                    }
                }
                if x > prev {
                    val += slopes[5] * (x - prev);
                }
                val
            };
            let int_a: f64 = a.atoms().map(|(x, w)| f(x) * w).sum();
            let int_b: f64 = b.atoms().map(|(x, w)| f(x) * w).sum();
            assert!(int_a - int_b <= w1 + 1e-9);
        }
    }

    #[test]
    fn triangle_inequality() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..150 {
            let a = random_measure(&mut rng, 6, true);
            let b = random_measure(&mut rng, 6, true);
            let c = random_measure(&mut rng, 6, true);
            for p in [1, 2] {
                let ab = wasserstein_p(&a, &b, p).unwrap();
                let bc = wasserstein_p(&b, &c, p).unwrap();
                let ac = wasserstein_p(&a, &c, p).unwrap();
                assert!(ac <= ab + bc + 1e-10);
            }
        }
    }

    #[test]
    fn equal_mass_quantization_round_trip() {
        // merged cluster of 3 equal particles re-splits exactly
        let m = measure(&[(0.5, 0.375), (1.0, 0.125)]);
        let xs = m.equal_mass_quantization(4).unwrap();
        assert_eq!(xs, vec![0.5, 0.5, 0.5, 1.0]);
    }
}
