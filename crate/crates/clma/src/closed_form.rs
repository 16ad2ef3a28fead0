//! Closed-form optimal antenna positions for single-path users.
//!
//! With one channel path per user, the per-user power lower bound is tight
//! whenever the number of user pairs does not exceed the total number of
//! prime factors of `M` and `N`. The construction assigns each user pair to
//! one axis, derives an inter-group displacement that zeroes the steering
//! vector correlation of that pair on its axis, and expands the
//! displacements through a mixed-radix coefficient matrix into full antenna
//! position vectors. The result makes every pair of channel vectors exactly
//! orthogonal while keeping the minimum inter-antenna spacing.

use num_complex::Complex64;

use crate::channel::{ApvPair, ChannelMatrix, UserPathSet};
use crate::error::{Error, Result};

/// Mixed-radix expansion plan of a positive integer `n`:
/// non-decreasing prime factors, cumulative products
/// `[1, f_1, f_1 f_2, ...]`, and one coefficient column per value in
/// `1..=n` satisfying `coeffs(v) . cumprods + 1 = v`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactorizationPlan {
    n: usize,
    factors: Vec<usize>,
    cumprods: Vec<usize>,
    coeffs: Vec<Vec<usize>>,
}

impl FactorizationPlan {
    /// Builds the plan for `n >= 1`.
    pub fn new(n: usize) -> Result<Self> {
        let factors = prime_factorization(n)?;
        let count = factors.len();
        let mut cumprods = Vec::with_capacity(count);
        let mut acc = 1usize;
        for i in 0..count {
            cumprods.push(acc);
            acc *= factors[i];
        }
        // Coefficient column of value v: integer quotients of v-1 by the
        // cumulative products, taken from the largest place value down.
        let mut coeffs = Vec::with_capacity(n);
        for v in 1..=n {
            let mut rem = v - 1;
            let mut u = vec![0usize; count];
            for i in (0..count).rev() {
                u[i] = rem / cumprods[i];
                rem %= cumprods[i];
            }
            coeffs.push(u);
        }
        Ok(Self { n, factors, cumprods, coeffs })
    }

    /// The expanded integer.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Non-decreasing prime factors.
    pub fn factors(&self) -> &[usize] {
        &self.factors
    }

    /// Number of prime factors (with multiplicity).
    pub fn num_factors(&self) -> usize {
        self.factors.len()
    }

    /// Cumulative products `[1, f_1, f_1 f_2, ...]`.
    pub fn cumprods(&self) -> &[usize] {
        &self.cumprods
    }

    /// Coefficient column of value `v`, `1 <= v <= n`.
    pub fn coeff_column(&self, v: usize) -> &[usize] {
        &self.coeffs[v - 1]
    }

    /// Expands a displacement vector (one entry per factor) into the `n`
    /// coordinates `pos_v = coeffs(v) . d`.
    pub fn expand(&self, displacements: &[f64]) -> Vec<f64> {
        debug_assert_eq!(displacements.len(), self.num_factors());
        self.coeffs
            .iter()
            .map(|u| u.iter().zip(displacements).map(|(&c, &d)| c as f64 * d).sum())
            .collect()
    }
}

/// Prime factors of `n` in non-decreasing order; `n = 1` gives an empty
/// list.
pub fn prime_factorization(n: usize) -> Result<Vec<usize>> {
    if n == 0 {
        return Err(Error::InvalidInput("cannot factor 0".into()));
    }
    let mut rem = n;
    let mut factors = Vec::new();
    let mut p = 2usize;
    while p * p <= rem {
        while rem % p == 0 {
            factors.push(p);
            rem /= p;
        }
        p += 1;
    }
    if rem > 1 {
        factors.push(rem);
    }
    Ok(factors)
}

/// Whether the power lower bound is attainable for `k` single-path users on
/// an `m x n` array: `k(k-1)/2 <= I_M + I_N`.
pub fn tightness_check(k: usize, m: usize, n: usize) -> bool {
    if k == 0 || m == 0 || n == 0 {
        return false;
    }
    let pairs = k * (k - 1) / 2;
    let capacity = prime_factorization(m).map(|f| f.len()).unwrap_or(0)
        + prime_factorization(n).map(|f| f.len()).unwrap_or(0);
    pairs <= capacity
}

/// A split of all unordered user pairs between the horizontal axis (`p1`,
/// separated through the x coordinates) and the vertical axis (`p2`).
/// Pairs are 0-based `(k, q)` with `k < q`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairPartition {
    /// Pairs orthogonalized by the horizontal steering vectors.
    pub p1: Vec<(usize, usize)>,
    /// Pairs orthogonalized by the vertical steering vectors.
    pub p2: Vec<(usize, usize)>,
}

/// All unordered pairs of `0..k` in lexicographic order.
fn all_pairs(k: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::with_capacity(k * (k - 1) / 2);
    for a in 0..k {
        for b in (a + 1)..k {
            pairs.push((a, b));
        }
    }
    pairs
}

/// Splits the user pairs lexicographically: the first `min(i_m, total)`
/// pairs go to the horizontal set, the rest to the vertical set.
pub fn partition_pairs(k: usize, i_m: usize, i_n: usize) -> Result<PairPartition> {
    let pairs = all_pairs(k);
    if pairs.len() > i_m + i_n {
        return Err(Error::Infeasible(format!(
            "{} user pairs exceed the {} + {} prime factors available",
            pairs.len(),
            i_m,
            i_n
        )));
    }
    let cut = pairs.len().min(i_m);
    let (p1, p2) = pairs.split_at(cut);
    Ok(PairPartition { p1: p1.to_vec(), p2: p2.to_vec() })
}

/// Like [`partition_pairs`] but avoids assigning a pair to an axis on which
/// its virtual AoAs collide. Pairs colliding on one axis are forced to the
/// other; flexible pairs fill the horizontal set first.
fn partition_pairs_avoiding(
    aoa_h: &[f64],
    aoa_v: &[f64],
    i_m: usize,
    i_n: usize,
) -> Result<PairPartition> {
    let k = aoa_h.len();
    let pairs = all_pairs(k);
    if pairs.len() > i_m + i_n {
        return Err(Error::Infeasible(format!(
            "{} user pairs exceed the {} + {} prime factors available",
            pairs.len(),
            i_m,
            i_n
        )));
    }
    let mut forced1 = Vec::new();
    let mut forced2 = Vec::new();
    let mut flexible = Vec::new();
    for &(a, b) in &pairs {
        let h_ok = aoa_h[a] != aoa_h[b];
        let v_ok = aoa_v[a] != aoa_v[b];
        match (h_ok, v_ok) {
            (false, false) => {
                return Err(Error::DegenerateAngles(format!(
                    "users {a} and {b} share both virtual AoAs ({}, {})",
                    aoa_h[a], aoa_v[a]
                )))
            }
            (true, false) => forced1.push((a, b)),
            (false, true) => forced2.push((a, b)),
            (true, true) => flexible.push((a, b)),
        }
    }
    if forced1.len() > i_m {
        return Err(Error::Infeasible(format!(
            "{} pairs collide vertically but only {} horizontal prime factors exist",
            forced1.len(),
            i_m
        )));
    }
    if forced2.len() > i_n {
        return Err(Error::Infeasible(format!(
            "{} pairs collide horizontally but only {} vertical prime factors exist",
            forced2.len(),
            i_n
        )));
    }
    let mut p1 = forced1;
    let mut p2 = forced2;
    for pair in flexible {
        if p1.len() < i_m {
            p1.push(pair);
        } else if p2.len() < i_n {
            p2.push(pair);
        } else {
            return Err(Error::Infeasible("pair assignment exceeded axis capacities".into()));
        }
    }
    p1.sort_unstable();
    p2.sort_unstable();
    Ok(PairPartition { p1, p2 })
}

/// The constructed optimal positions together with the construction trace.
#[derive(Debug, Clone)]
pub struct ApvConstruction {
    /// The optimal antenna position vectors.
    pub apv: ApvPair,
    /// The pair-to-axis assignment used.
    pub partition: PairPartition,
    /// Inter-group displacements along x, one per prime factor of `M`.
    pub d_x: Vec<f64>,
    /// Inter-group displacements along y, one per prime factor of `N`.
    pub d_y: Vec<f64>,
    /// Periods chosen for the horizontal pair displacements.
    pub rho: Vec<usize>,
    /// Periods chosen for the vertical pair displacements.
    pub tau: Vec<usize>,
    /// Required region extent `(x, y)` in meters; the construction itself
    /// ignores region bounds, so callers can reject oversized results.
    pub region: (f64, f64),
}

/// One axis of the displacement construction. For an assigned pair the
/// displacement is the smallest `(p + 1/factor) * lambda / |delta_aoa|` that
/// clears the spacing floor accumulated so far; remaining entries are
/// spacing fills.
fn build_displacements(
    factors: &[usize],
    pair_deltas: &[f64],
    d_min: f64,
    wavelength: f64,
) -> Result<(Vec<f64>, Vec<usize>)> {
    let mut d = Vec::with_capacity(factors.len());
    let mut periods = Vec::with_capacity(pair_deltas.len());
    for (i, &factor) in factors.iter().enumerate() {
        let floor: f64 =
            d.iter().zip(factors).map(|(&dj, &fj): (&f64, &usize)| (fj - 1) as f64 * dj).sum::<f64>() + d_min;
        if i < pair_deltas.len() {
            let delta = pair_deltas[i];
            if delta == 0.0 {
                return Err(Error::DegenerateAngles(
                    "pair assigned to an axis with identical virtual AoAs".into(),
                ));
            }
            let base = wavelength / delta;
            // Smallest nonnegative integer p with (p + 1/factor) * base >= floor.
            let mut p = 0usize;
            while (p as f64 + 1.0 / factor as f64) * base < floor {
                p += 1;
            }
            periods.push(p);
            d.push((p as f64 + 1.0 / factor as f64) * base);
        } else {
            d.push(floor);
        }
    }
    Ok((d, periods))
}

/// Constructs optimal antenna position vectors for single-path users,
/// attaining the per-user power lower bound (channel vectors of all user
/// pairs exactly orthogonal, spacing at least `d_min` on both axes).
pub fn construct_optimal_apvs(
    users: &[UserPathSet],
    m: usize,
    n: usize,
    d_min_x: f64,
    d_min_y: f64,
    wavelength: f64,
) -> Result<ApvConstruction> {
    if users.is_empty() {
        return Err(Error::InvalidInput("need at least one user".into()));
    }
    if m == 0 || n == 0 {
        return Err(Error::InvalidInput("array dimensions must be positive".into()));
    }
    if !(wavelength.is_finite() && wavelength > 0.0) {
        return Err(Error::InvalidInput("wavelength must be positive".into()));
    }
    if !(d_min_x > 0.0 && d_min_y > 0.0) {
        return Err(Error::InvalidInput("minimum spacings must be positive".into()));
    }
    for (k, u) in users.iter().enumerate() {
        if u.num_paths() != 1 {
            return Err(Error::InvalidInput(format!(
                "user {k} has {} paths; the closed form needs exactly one",
                u.num_paths()
            )));
        }
    }
    let aoa_h: Vec<f64> = users.iter().map(|u| u.paths()[0].virtual_aoa_h).collect();
    let aoa_v: Vec<f64> = users.iter().map(|u| u.paths()[0].virtual_aoa_v).collect();

    let plan_m = FactorizationPlan::new(m)?;
    let plan_n = FactorizationPlan::new(n)?;
    let k = users.len();
    if !tightness_check(k, m, n) {
        return Err(Error::Infeasible(format!(
            "{} user pairs exceed the {} prime factors of {m} and {n}",
            k * (k - 1) / 2,
            plan_m.num_factors() + plan_n.num_factors()
        )));
    }
    let partition =
        partition_pairs_avoiding(&aoa_h, &aoa_v, plan_m.num_factors(), plan_n.num_factors())?;

    let deltas_x: Vec<f64> =
        partition.p1.iter().map(|&(a, b)| (aoa_h[a] - aoa_h[b]).abs()).collect();
    let deltas_y: Vec<f64> =
        partition.p2.iter().map(|&(a, b)| (aoa_v[a] - aoa_v[b]).abs()).collect();

    let (d_x, rho) = build_displacements(plan_m.factors(), &deltas_x, d_min_x, wavelength)?;
    let (d_y, tau) = build_displacements(plan_n.factors(), &deltas_y, d_min_y, wavelength)?;

    let x = plan_m.expand(&d_x);
    let y = plan_n.expand(&d_y);
    let region = (x.last().copied().unwrap_or(0.0), y.last().copied().unwrap_or(0.0));
    let apv = ApvPair::with_min_spacing(x, y, wavelength, d_min_x, d_min_y)?;
    Ok(ApvConstruction { apv, partition, d_x, d_y, rho, tau, region })
}

/// Maximum normalized cross-correlation over all user pairs:
/// `max |h_k^H h_q| / (||h_k|| ||h_q||)`. Zero iff the columns are fully
/// orthogonal.
pub fn verify_cvo(channel: &ChannelMatrix) -> Result<f64> {
    let h = channel.as_matrix();
    let k = h.ncols();
    if k < 2 {
        return Err(Error::InvalidInput("channel vector orthogonality needs at least two users".into()));
    }
    let mut worst = 0.0f64;
    for a in 0..k {
        for b in (a + 1)..k {
            let ca = h.column(a);
            let cb = h.column(b);
            let denom = ca.norm() * cb.norm();
            if denom == 0.0 {
                return Err(Error::InvalidInput(format!("user {a} or {b} has a zero channel")));
            }
            worst = worst.max(ca.dotc(&cb).norm() / denom);
        }
    }
    Ok(worst)
}

/// Sum `sum_{u=0}^{factor-1} exp(j 2 pi / lambda * u * d * delta)`; the
/// construction drives this to zero for every assigned pair (used by tests).
pub fn steering_orthogonality_sum(factor: usize, d: f64, delta_aoa: f64, wavelength: f64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for u in 0..factor {
        let p = std::f64::consts::TAU / wavelength * (u as f64) * d * delta_aoa;
        acc += Complex64::new(p.cos(), p.sin());
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{channel_matrix, PathComponent};
    use crate::receiver::{
        mrc_combiner, per_user_power_lower_bound, sinr, total_power_lower_bound, total_power_zf,
        RateWeightMatrix,
    };
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn single(aoa_h: f64, aoa_v: f64) -> UserPathSet {
        UserPathSet::single(aoa_h, aoa_v, Complex64::new(1.0, 0.0)).unwrap()
    }

    #[test]
    fn factorization_basics() {
        assert_eq!(prime_factorization(24).unwrap(), vec![2, 2, 2, 3]);
        assert_eq!(prime_factorization(1).unwrap(), Vec::<usize>::new());
        assert_eq!(prime_factorization(36).unwrap(), vec![2, 2, 3, 3]);
        assert_eq!(prime_factorization(97).unwrap(), vec![97]);
        assert!(prime_factorization(0).is_err());
    }

    #[test]
    fn plan_24_matches_worked_example() {
        let plan = FactorizationPlan::new(24).unwrap();
        assert_eq!(plan.cumprods(), &[1, 2, 4, 8]);
        assert_eq!(plan.coeff_column(8), &[1, 1, 1, 0]);
        assert_eq!(plan.coeff_column(23), &[0, 1, 1, 2]);
    }

    #[test]
    fn plan_small_cases() {
        let plan = FactorizationPlan::new(2).unwrap();
        assert_eq!(plan.cumprods(), &[1]);
        assert_eq!(plan.coeff_column(1), &[0]);
        assert_eq!(plan.coeff_column(2), &[1]);

        let plan4 = FactorizationPlan::new(4).unwrap();
        assert_eq!(plan4.cumprods(), &[1, 2]);
        assert_eq!(plan4.coeff_column(3), &[0, 1]);
        assert_eq!(plan4.coeff_column(4), &[1, 1]);

        let plan1 = FactorizationPlan::new(1).unwrap();
        assert_eq!(plan1.num_factors(), 0);
        assert_eq!(plan1.expand(&[]), vec![0.0]);
    }

    #[test]
    fn plan_reconstruction_identity() {
        for n in [1usize, 2, 4, 6, 8, 12, 24, 36, 60, 97] {
            let plan = FactorizationPlan::new(n).unwrap();
            for v in 1..=n {
                let u = plan.coeff_column(v);
                let rebuilt: usize =
                    u.iter().zip(plan.cumprods()).map(|(&c, &p)| c * p).sum::<usize>() + 1;
                assert_eq!(rebuilt, v, "reconstruction failed for {v} of {n}");
                for (i, &c) in u.iter().enumerate() {
                    assert!(c < plan.factors()[i]);
                }
            }
        }
    }

    #[test]
    fn tightness_examples() {
        assert!(tightness_check(3, 2, 4)); // 3 pairs <= 1 + 2
        assert!(!tightness_check(4, 2, 4)); // 6 pairs > 3
        assert!(tightness_check(1, 5, 7)); // no pairs
    }

    #[test]
    fn partition_examples() {
        let p = partition_pairs(3, 1, 2).unwrap();
        assert_eq!(p.p1, vec![(0, 1)]);
        assert_eq!(p.p2, vec![(0, 2), (1, 2)]);

        let p = partition_pairs(2, 1, 0).unwrap();
        assert_eq!(p.p1, vec![(0, 1)]);
        assert!(p.p2.is_empty());

        let p = partition_pairs(3, 3, 0).unwrap();
        assert_eq!(p.p1.len(), 3);
        assert!(p.p2.is_empty());

        assert!(partition_pairs(4, 1, 2).is_err());
    }

    #[test]
    fn worked_2x4_instance() {
        // M x N = 2 x 4, K = 3, d_min = lambda / 2 on both axes.
        let lambda = 1.0;
        let users = [single(0.1, -0.3), single(-0.4, 0.5), single(-0.2, 0.7)];
        let c = construct_optimal_apvs(&users, 2, 4, 0.5, 0.5, lambda).unwrap();

        assert_eq!(c.partition.p1, vec![(0, 1)]);
        assert_eq!(c.partition.p2, vec![(0, 2), (1, 2)]);
        assert_eq!(c.rho, vec![0]);
        assert_eq!(c.tau, vec![0, 0]);

        let x = c.apv.x();
        let y = c.apv.y();
        assert_relative_eq!(x[0], 0.0);
        assert_relative_eq!(x[1], 1.0, max_relative = 1e-12);
        assert_relative_eq!(y[0], 0.0);
        assert_relative_eq!(y[1], 0.5, max_relative = 1e-12);
        assert_relative_eq!(y[2], 2.5, max_relative = 1e-12);
        assert_relative_eq!(y[3], 3.0, max_relative = 1e-12);

        // Deterministic: a second construction is bit-identical.
        let c2 = construct_optimal_apvs(&users, 2, 4, 0.5, 0.5, lambda).unwrap();
        assert_eq!(c.apv, c2.apv);

        let h = channel_matrix(&c.apv, &users).unwrap();
        assert!(verify_cvo(&h).unwrap() < 1e-12);
    }

    #[test]
    fn single_user_gives_min_spacing_ladders() {
        let users = [single(0.2, 0.4)];
        let c = construct_optimal_apvs(&users, 4, 6, 0.5, 0.7, 1.0).unwrap();
        let x = c.apv.x();
        let y = c.apv.y();
        for i in 1..x.len() {
            assert_relative_eq!(x[i] - x[i - 1], 0.5, max_relative = 1e-12);
        }
        for i in 1..y.len() {
            assert_relative_eq!(y[i] - y[i - 1], 0.7, max_relative = 1e-12);
        }
    }

    #[test]
    fn random_instances_reach_orthogonality() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let lambda = 0.01;
        for _ in 0..50 {
            let users: Vec<UserPathSet> = (0..3)
                .map(|_| single(rng.gen_range(-0.95..0.95), rng.gen_range(-0.95..0.95)))
                .collect();
            let c = construct_optimal_apvs(&users, 2, 4, 0.5 * lambda, 0.5 * lambda, lambda).unwrap();
            let h = channel_matrix(&c.apv, &users).unwrap();
            assert!(verify_cvo(&h).unwrap() < 1e-9);

            // Spacing invariant.
            for v in [c.apv.x(), c.apv.y()] {
                for i in 1..v.len() {
                    assert!(v[i] - v[i - 1] >= 0.5 * lambda - 1e-12);
                }
            }
        }
    }

    #[test]
    fn svo_partial_sums_vanish() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let lambda = 0.01;
        for _ in 0..20 {
            let users: Vec<UserPathSet> = (0..3)
                .map(|_| single(rng.gen_range(-0.9..0.9), rng.gen_range(-0.9..0.9)))
                .collect();
            let aoa_h: Vec<f64> = users.iter().map(|u| u.paths()[0].virtual_aoa_h).collect();
            let aoa_v: Vec<f64> = users.iter().map(|u| u.paths()[0].virtual_aoa_v).collect();
            let c = construct_optimal_apvs(&users, 4, 4, 0.5 * lambda, 0.5 * lambda, lambda).unwrap();
            let plan = FactorizationPlan::new(4).unwrap();
            for (i, &(a, b)) in c.partition.p1.iter().enumerate() {
                let s = steering_orthogonality_sum(
                    plan.factors()[i],
                    c.d_x[i],
                    aoa_h[a] - aoa_h[b],
                    lambda,
                );
                assert!(s.norm() < 1e-10, "horizontal sum {s} not zero");
            }
            for (i, &(a, b)) in c.partition.p2.iter().enumerate() {
                let s = steering_orthogonality_sum(
                    plan.factors()[i],
                    c.d_y[i],
                    aoa_v[a] - aoa_v[b],
                    lambda,
                );
                assert!(s.norm() < 1e-10, "vertical sum {s} not zero");
            }
        }
    }

    #[test]
    fn bound_achieved_with_mrc() {
        // MRC at the bound power must reach the target rate on the
        // constructed geometry.
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        let lambda = 0.01;
        let noise = 1e-11;
        let rates = [2.0, 3.0, 1.5];
        for _ in 0..10 {
            let users: Vec<UserPathSet> = (0..3)
                .map(|_| {
                    UserPathSet::single(
                        rng.gen_range(-0.9..0.9),
                        rng.gen_range(-0.9..0.9),
                        Complex64::from_polar(rng.gen_range(1e-6..1e-4), rng.gen_range(0.0..6.28)),
                    )
                    .unwrap()
                })
                .collect();
            let c = construct_optimal_apvs(&users, 2, 4, 0.5 * lambda, 0.5 * lambda, lambda).unwrap();
            let h = channel_matrix(&c.apv, &users).unwrap();
            let w = mrc_combiner(h.as_matrix());
            let p: Vec<f64> = users
                .iter()
                .zip(&rates)
                .map(|(u, &r)| per_user_power_lower_bound(&u.coeffs(), 8, noise, r).unwrap())
                .collect();
            for k in 0..3 {
                let g = sinr(&w, h.as_matrix(), &p, noise, k).unwrap();
                let rate = (1.0 + g).log2();
                assert!(rate >= rates[k] - 1e-9, "user {k}: rate {rate} < {}", rates[k]);
            }

            // And total ZF power matches the summed bound on this geometry.
            let omega = RateWeightMatrix::new(noise, &rates).unwrap();
            let total = total_power_zf(h.as_matrix(), &omega).unwrap();
            let bound = total_power_lower_bound(&users, 8, &omega).unwrap();
            assert_relative_eq!(total, bound, max_relative = 1e-9);
        }
    }

    #[test]
    fn cvo_detects_correlation() {
        let lambda = 0.01;
        let apv = ApvPair::new(
            vec![0.0, 0.5 * lambda],
            vec![0.0, 0.5 * lambda],
            lambda,
        )
        .unwrap();
        // Identical columns.
        let users = [single(0.3, -0.2), single(0.3, -0.2)];
        let h = channel_matrix(&apv, &users).unwrap();
        assert_relative_eq!(verify_cvo(&h).unwrap(), 1.0, max_relative = 1e-12);

        // Near-collinear users on a small dense array stay correlated.
        let users2 = [single(0.30, -0.20), single(0.33, -0.22)];
        let h2 = channel_matrix(&apv, &users2).unwrap();
        assert!(verify_cvo(&h2).unwrap() > 0.5);

        // K < 2 is rejected.
        let h1 = channel_matrix(&apv, &users[..1]).unwrap();
        assert!(verify_cvo(&h1).is_err());
    }

    #[test]
    fn axis_collision_is_swapped_or_rejected() {
        let lambda = 1.0;
        // Users 0 and 1 share the horizontal AoA; the (0,1) pair must land
        // in the vertical set even though lexicographic fill would pick x.
        let users = [single(0.2, -0.3), single(0.2, 0.5), single(-0.4, 0.7)];
        let c = construct_optimal_apvs(&users, 2, 4, 0.5, 0.5, lambda).unwrap();
        assert!(!c.partition.p1.contains(&(0, 1)));
        assert!(c.partition.p2.contains(&(0, 1)));
        let h = channel_matrix(&c.apv, &users).unwrap();
        assert!(verify_cvo(&h).unwrap() < 1e-9);

        // Sharing both AoAs is hopeless.
        let dup = [single(0.2, -0.3), single(0.2, -0.3), single(-0.4, 0.7)];
        assert!(matches!(
            construct_optimal_apvs(&dup, 2, 4, 0.5, 0.5, lambda),
            Err(Error::DegenerateAngles(_))
        ));

        // Two vertical collisions but only one horizontal factor: the forced
        // set overflows.
        let forced = [single(0.1, 0.4), single(0.5, 0.4), single(0.9, 0.4)];
        assert!(matches!(
            construct_optimal_apvs(&forced, 2, 4, 0.5, 0.5, lambda),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn multipath_users_rejected() {
        let user = UserPathSet::new(vec![
            PathComponent { virtual_aoa_h: 0.1, virtual_aoa_v: 0.2, coeff: Complex64::new(1.0, 0.0) },
            PathComponent { virtual_aoa_h: -0.3, virtual_aoa_v: 0.4, coeff: Complex64::new(0.5, 0.0) },
        ])
        .unwrap();
        assert!(construct_optimal_apvs(&[user], 2, 2, 0.5, 0.5, 1.0).is_err());
    }
}
