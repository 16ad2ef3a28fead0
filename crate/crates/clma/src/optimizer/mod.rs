//! Discrete antenna position optimization on a candidate grid.
//!
//! The moving region is discretized into `M_bar x N_bar` candidate
//! coordinates; choosing `M` of the horizontal and `N` of the vertical
//! candidates induces the antenna position vectors. The greedy solver
//! initializes with every candidate selected (a virtual array covering the
//! whole grid, which keeps the user Gram matrix invertible), then
//! *sequentially eliminates* the row or column whose removal increases the
//! total transmit power least, and finally *successively refines* one
//! row/column at a time under the spacing constraints. All objective
//! evaluations are rank-block updates of the `K x K` Gram matrix.

mod engine;
mod exhaustive;

pub use engine::{optimize_positions, sequential_elimination, successive_refinement, OptimizeOutcome};
pub use exhaustive::{exhaustive_search, ExhaustiveOutcome};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::channel::{channel_matrix, flat_index, ApvPair, ChannelMatrix, UserPathSet, SPACING_TOL};
use crate::error::{Error, Result};
use crate::receiver::{weighted_trace_inverse, RateWeightMatrix};

/// Uniformly discretized candidate coordinates of the antenna moving region
/// `[0, x_max] x [0, y_max]`: cell centers `(i + 1/2) * extent / count`.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateGrid {
    x: Vec<f64>,
    y: Vec<f64>,
    x_max: f64,
    y_max: f64,
}

impl CandidateGrid {
    /// Horizontal candidate coordinates (length `M_bar`).
    pub fn x(&self) -> &[f64] {
        &self.x
    }

    /// Vertical candidate coordinates (length `N_bar`).
    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Number of horizontal candidates `M_bar`.
    pub fn m_bar(&self) -> usize {
        self.x.len()
    }

    /// Number of vertical candidates `N_bar`.
    pub fn n_bar(&self) -> usize {
        self.y.len()
    }

    /// Region extent `(x_max, y_max)` in meters.
    pub fn region(&self) -> (f64, f64) {
        (self.x_max, self.y_max)
    }

    /// Grid resolution `(x_max / M_bar, y_max / N_bar)` in meters.
    pub fn resolution(&self) -> (f64, f64) {
        (self.x_max / self.x.len() as f64, self.y_max / self.y.len() as f64)
    }
}

/// Builds the candidate grid with cell-centered coordinates.
pub fn make_candidate_grid(x_max: f64, y_max: f64, m_bar: usize, n_bar: usize) -> Result<CandidateGrid> {
    if !(x_max.is_finite() && x_max > 0.0 && y_max.is_finite() && y_max > 0.0) {
        return Err(Error::InvalidInput(format!("region extents must be positive, got ({x_max}, {y_max})")));
    }
    if m_bar == 0 || n_bar == 0 {
        return Err(Error::InvalidInput("candidate counts must be positive".into()));
    }
    let x = (0..m_bar).map(|i| (i as f64 + 0.5) * x_max / m_bar as f64).collect();
    let y = (0..n_bar).map(|i| (i as f64 + 0.5) * y_max / n_bar as f64).collect();
    Ok(CandidateGrid { x, y, x_max, y_max })
}

/// Binary selection of `M` horizontal and `N` vertical candidates, stored as
/// strictly increasing candidate indices so the induced positions stay
/// sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionPair {
    x_idx: Vec<usize>,
    y_idx: Vec<usize>,
}

impl SelectionPair {
    /// Builds a selection, validating strict monotonicity and bounds.
    pub fn new(x_idx: Vec<usize>, y_idx: Vec<usize>, m_bar: usize, n_bar: usize) -> Result<Self> {
        check_indices("x", &x_idx, m_bar)?;
        check_indices("y", &y_idx, n_bar)?;
        Ok(Self { x_idx, y_idx })
    }

    /// Selects every candidate on both axes.
    pub fn full(m_bar: usize, n_bar: usize) -> Self {
        Self { x_idx: (0..m_bar).collect(), y_idx: (0..n_bar).collect() }
    }

    /// Selected horizontal candidate indices, strictly increasing.
    pub fn x_indices(&self) -> &[usize] {
        &self.x_idx
    }

    /// Selected vertical candidate indices, strictly increasing.
    pub fn y_indices(&self) -> &[usize] {
        &self.y_idx
    }

    /// Number of selected rows `(M, N)`.
    pub fn dims(&self) -> (usize, usize) {
        (self.x_idx.len(), self.y_idx.len())
    }

    /// The antenna position vectors induced on a grid.
    pub fn induced_apv(&self, grid: &CandidateGrid, wavelength: f64) -> Result<ApvPair> {
        let x = self.x_idx.iter().map(|&i| grid.x[i]).collect();
        let y = self.y_idx.iter().map(|&i| grid.y[i]).collect();
        ApvPair::new(x, y, wavelength)
    }

    /// Whether the induced positions satisfy both spacing constraints.
    pub fn spacing_ok(&self, grid: &CandidateGrid, d_min_x: f64, d_min_y: f64) -> bool {
        let ok = |idx: &[usize], pos: &[f64], d_min: f64| {
            idx.windows(2).all(|w| pos[w[1]] - pos[w[0]] >= d_min - SPACING_TOL)
        };
        ok(&self.x_idx, &grid.x, d_min_x) && ok(&self.y_idx, &grid.y, d_min_y)
    }

    pub(crate) fn x_idx_mut(&mut self) -> &mut Vec<usize> {
        &mut self.x_idx
    }

    pub(crate) fn y_idx_mut(&mut self) -> &mut Vec<usize> {
        &mut self.y_idx
    }
}

fn check_indices(name: &str, idx: &[usize], limit: usize) -> Result<()> {
    if idx.is_empty() {
        return Err(Error::InvalidInput(format!("{name} selection is empty")));
    }
    for w in idx.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::InvalidInput(format!("{name} selection indices must be strictly increasing")));
        }
    }
    if *idx.last().unwrap() >= limit {
        return Err(Error::InvalidInput(format!(
            "{name} selection index {} out of range ({limit} candidates)",
            idx.last().unwrap()
        )));
    }
    Ok(())
}

/// Channel matrix of all `M_bar * N_bar` candidate positions; constant for a
/// given grid and user set. Row `m_bar_idx * N_bar + n_bar_idx` is the
/// response of the candidate crossing.
#[derive(Debug, Clone)]
pub struct CandidateChannel {
    matrix: DMatrix<Complex64>,
    m_bar: usize,
    n_bar: usize,
}

impl CandidateChannel {
    /// The raw `M_bar N_bar x K` matrix.
    pub fn as_matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    /// Number of horizontal candidates.
    pub fn m_bar(&self) -> usize {
        self.m_bar
    }

    /// Number of vertical candidates.
    pub fn n_bar(&self) -> usize {
        self.n_bar
    }

    /// Number of users `K`.
    pub fn num_users(&self) -> usize {
        self.matrix.ncols()
    }

    /// Row view of one candidate crossing.
    #[inline]
    pub(crate) fn row(&self, xi: usize, yi: usize) -> nalgebra::MatrixView1xX<'_, Complex64> {
        self.matrix.row(flat_index(xi, yi, self.n_bar))
    }
}

/// Evaluates the channel over the full candidate grid.
pub fn candidate_channel_matrix(
    grid: &CandidateGrid,
    users: &[UserPathSet],
    wavelength: f64,
) -> Result<CandidateChannel> {
    let apv = ApvPair::new(grid.x.clone(), grid.y.clone(), wavelength)?;
    let h = channel_matrix(&apv, users)?;
    Ok(CandidateChannel { matrix: h.into_matrix(), m_bar: grid.m_bar(), n_bar: grid.n_bar() })
}

/// Gathers the rows of the candidate channel picked by a selection,
/// producing the channel matrix of the induced array.
pub fn selected_channel(sel: &SelectionPair, candidates: &CandidateChannel) -> Result<ChannelMatrix> {
    let (m, n) = sel.dims();
    if *sel.x_idx.last().unwrap() >= candidates.m_bar || *sel.y_idx.last().unwrap() >= candidates.n_bar {
        return Err(Error::InvalidInput("selection indices exceed the candidate grid".into()));
    }
    let mut entries = DMatrix::<Complex64>::zeros(m * n, candidates.num_users());
    for (mi, &xi) in sel.x_idx.iter().enumerate() {
        for (ni, &yi) in sel.y_idx.iter().enumerate() {
            let src = flat_index(xi, yi, candidates.n_bar);
            let dst = flat_index(mi, ni, n);
            for k in 0..candidates.num_users() {
                entries[(dst, k)] = candidates.matrix[(src, k)];
            }
        }
    }
    ChannelMatrix::from_parts(entries, m, n)
}

/// Gram matrix of the selected virtual array, built directly from the
/// candidate rows.
pub(crate) fn selected_gram(sel: &SelectionPair, candidates: &CandidateChannel) -> DMatrix<Complex64> {
    let k = candidates.num_users();
    let mut z = DMatrix::<Complex64>::zeros(k, k);
    for &xi in &sel.x_idx {
        for &yi in &sel.y_idx {
            rank1_add(&mut z, candidates.row(xi, yi), 1.0);
        }
    }
    z
}

/// `z += sign * row^H row` for one candidate row.
#[inline]
pub(crate) fn rank1_add(z: &mut DMatrix<Complex64>, row: nalgebra::MatrixView1xX<'_, Complex64>, sign: f64) {
    let k = z.nrows();
    for i in 0..k {
        let ci = row[i].conj() * sign;
        for j in 0..k {
            z[(i, j)] += ci * row[j];
        }
    }
}

/// Total transmit power of a selection: `tr{(H^H H)^-1 Omega}` on the
/// selected virtual array.
pub fn objective(
    sel: &SelectionPair,
    candidates: &CandidateChannel,
    omega: &RateWeightMatrix,
) -> Result<f64> {
    if omega.num_users() != candidates.num_users() {
        return Err(Error::InvalidInput("rate weights do not match the user count".into()));
    }
    weighted_trace_inverse(selected_gram(sel, candidates), omega.weights())
}

/// Direction of an incremental Gram update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateSign {
    /// Rows enter the selection: `Z + G^H G`.
    Add,
    /// Rows leave the selection: `Z - G^H G`.
    Remove,
}

/// Objective after a rank-block update of a maintained Gram matrix:
/// `tr{(Z +/- G^H G)^-1 Omega}` where `G` holds the candidate rows being
/// added or removed. Matches a full recomputation without rebuilding the
/// `MN x K` channel.
pub fn incremental_objective(
    gram: &DMatrix<Complex64>,
    delta_rows: &DMatrix<Complex64>,
    sign: UpdateSign,
    omega: &RateWeightMatrix,
) -> Result<f64> {
    let k = gram.nrows();
    if gram.ncols() != k || delta_rows.ncols() != k || omega.num_users() != k {
        return Err(Error::InvalidInput("Gram, update rows, and rate weights disagree on K".into()));
    }
    let s = match sign {
        UpdateSign::Add => 1.0,
        UpdateSign::Remove => -1.0,
    };
    let mut z = gram.clone();
    for r in 0..delta_rows.nrows() {
        rank1_add(&mut z, delta_rows.row(r), s);
    }
    weighted_trace_inverse(z, omega.weights())
}

/// Stopping rule and spacing constraints of the greedy search.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    /// Refinement stops once a full sweep improves the objective by less
    /// than this (watts).
    pub epsilon: f64,
    /// Hard cap on refinement sweeps.
    pub max_sweeps: usize,
    /// Minimum horizontal spacing (meters).
    pub d_min_x: f64,
    /// Minimum vertical spacing (meters).
    pub d_min_y: f64,
}

impl OptimizerConfig {
    /// Default stopping rule (`epsilon = 1e-9` W, 50 sweeps) with the given
    /// spacings.
    pub fn new(d_min_x: f64, d_min_y: f64) -> Self {
        Self { epsilon: 1e-9, max_sweeps: 50, d_min_x, d_min_y }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidInput("epsilon must be positive".into()));
        }
        if self.max_sweeps == 0 {
            return Err(Error::InvalidInput("max_sweeps must be at least 1".into()));
        }
        if !(self.d_min_x > 0.0 && self.d_min_y > 0.0) {
            return Err(Error::InvalidInput("minimum spacings must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::UserPathSet;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    pub(super) fn random_users(rng: &mut ChaCha8Rng, k: usize, paths: usize) -> Vec<UserPathSet> {
        (0..k)
            .map(|_| {
                UserPathSet::new(
                    (0..paths)
                        .map(|_| crate::channel::PathComponent {
                            virtual_aoa_h: rng.gen_range(-0.95..0.95),
                            virtual_aoa_v: rng.gen_range(-0.95..0.95),
                            coeff: Complex64::from_polar(
                                rng.gen_range(0.2..1.0),
                                rng.gen_range(0.0..std::f64::consts::TAU),
                            ),
                        })
                        .collect(),
                )
                .unwrap()
            })
            .collect()
    }

    #[test]
    fn grid_formula() {
        let lambda = 1.0;
        let g = make_candidate_grid(4.0 * lambda, 2.0 * lambda, 4, 2).unwrap();
        assert_eq!(g.x(), &[0.5, 1.5, 2.5, 3.5]);
        assert_eq!(g.y(), &[0.5, 1.5]);

        let g1 = make_candidate_grid(3.0, 3.0, 1, 1).unwrap();
        assert_eq!(g1.x(), &[1.5]);

        // 20 lambda at lambda/4 resolution -> 80 candidates.
        let g80 = make_candidate_grid(20.0, 20.0, 80, 80).unwrap();
        assert_eq!(g80.m_bar(), 80);
        assert_relative_eq!(g80.resolution().0, 0.25, max_relative = 1e-15);

        assert!(make_candidate_grid(0.0, 1.0, 4, 4).is_err());
        assert!(make_candidate_grid(1.0, 1.0, 0, 4).is_err());
    }

    #[test]
    fn candidate_channel_matches_direct_evaluation() {
        let mut r = rng(5);
        let lambda = 0.01;
        let grid = make_candidate_grid(4.0 * lambda, 3.0 * lambda, 5, 4).unwrap();
        let users = random_users(&mut r, 3, 2);
        let cand = candidate_channel_matrix(&grid, &users, lambda).unwrap();
        let apv = ApvPair::new(grid.x().to_vec(), grid.y().to_vec(), lambda).unwrap();
        let direct = channel_matrix(&apv, &users).unwrap();
        assert_eq!(cand.as_matrix(), direct.as_matrix());

        // Full selection gives back the candidate matrix itself.
        let full = SelectionPair::full(5, 4);
        let sel = selected_channel(&full, &cand).unwrap();
        assert_eq!(sel.as_matrix(), cand.as_matrix());
    }

    #[test]
    fn selected_channel_equals_induced_apv_channel() {
        let mut r = rng(11);
        let lambda = 0.01;
        let grid = make_candidate_grid(6.0 * lambda, 6.0 * lambda, 8, 7).unwrap();
        let users = random_users(&mut r, 3, 2);
        let cand = candidate_channel_matrix(&grid, &users, lambda).unwrap();
        for _ in 0..20 {
            let mut xs: Vec<usize> = (0..8).collect();
            let mut ys: Vec<usize> = (0..7).collect();
            while xs.len() > 3 {
                let i = r.gen_range(0..xs.len());
                xs.remove(i);
            }
            while ys.len() > 2 {
                let i = r.gen_range(0..ys.len());
                ys.remove(i);
            }
            let sel = SelectionPair::new(xs, ys, 8, 7).unwrap();
            let gathered = selected_channel(&sel, &cand).unwrap();
            let direct = channel_matrix(&sel.induced_apv(&grid, lambda).unwrap(), &users).unwrap();
            let diff = (gathered.as_matrix() - direct.as_matrix()).norm();
            assert!(diff < 1e-13, "row gather mismatch {diff}");
        }
    }

    #[test]
    fn objective_matches_total_power() {
        let mut r = rng(17);
        let lambda = 0.01;
        let grid = make_candidate_grid(5.0 * lambda, 5.0 * lambda, 6, 6).unwrap();
        let users = random_users(&mut r, 2, 3);
        let cand = candidate_channel_matrix(&grid, &users, lambda).unwrap();
        let omega = RateWeightMatrix::uniform(1e-3, 2.0, 2).unwrap();
        let sel = SelectionPair::new(vec![0, 3, 5], vec![1, 4], 6, 6).unwrap();
        let via_obj = objective(&sel, &cand, &omega).unwrap();
        let via_total = crate::receiver::total_power_zf(
            selected_channel(&sel, &cand).unwrap().as_matrix(),
            &omega,
        )
        .unwrap();
        assert_relative_eq!(via_obj, via_total, max_relative = 1e-12);

        // Full grid is at least as good as any subset (Loewner order).
        let full_obj = objective(&SelectionPair::full(6, 6), &cand, &omega).unwrap();
        assert!(full_obj <= via_obj * (1.0 + 1e-12));
    }

    #[test]
    fn incremental_update_round_trip() {
        let mut r = rng(23);
        let lambda = 0.01;
        let grid = make_candidate_grid(8.0 * lambda, 8.0 * lambda, 10, 10).unwrap();
        let users = random_users(&mut r, 4, 2);
        let cand = candidate_channel_matrix(&grid, &users, lambda).unwrap();
        let omega = RateWeightMatrix::uniform(1e-3, 1.5, 4).unwrap();
        let sel = SelectionPair::new(vec![0, 2, 5, 9], vec![1, 4, 7], 10, 10).unwrap();
        let gram = selected_gram(&sel, &cand);
        let base = objective(&sel, &cand, &omega).unwrap();

        // The block of rows contributed by x-candidate 5 over selected y.
        let mut rows = DMatrix::<Complex64>::zeros(3, 4);
        for (ri, &yi) in sel.y_indices().iter().enumerate() {
            rows.set_row(ri, &cand.row(5, yi));
        }
        let removed = incremental_objective(&gram, &rows, UpdateSign::Remove, &omega).unwrap();
        // Removal strictly increases the objective.
        assert!(removed > base);
        // Full recomputation of the smaller selection agrees.
        let smaller = SelectionPair::new(vec![0, 2, 9], vec![1, 4, 7], 10, 10).unwrap();
        let direct = objective(&smaller, &cand, &omega).unwrap();
        assert_relative_eq!(removed, direct, max_relative = 1e-9);

        // Remove then re-add returns the original objective.
        let mut z = gram.clone();
        for ri in 0..3 {
            rank1_add(&mut z, rows.row(ri), -1.0);
        }
        let back = incremental_objective(&z, &rows, UpdateSign::Add, &omega).unwrap();
        assert_relative_eq!(back, base, max_relative = 1e-10);
    }

    #[test]
    fn selection_validation() {
        assert!(SelectionPair::new(vec![0, 0], vec![1], 4, 4).is_err());
        assert!(SelectionPair::new(vec![0, 5], vec![1], 4, 4).is_err());
        assert!(SelectionPair::new(vec![], vec![1], 4, 4).is_err());
        let grid = make_candidate_grid(2.0, 2.0, 4, 4).unwrap();
        let sel = SelectionPair::new(vec![0, 2], vec![1, 3], 4, 4).unwrap();
        assert!(sel.spacing_ok(&grid, 1.0, 1.0));
        assert!(!sel.spacing_ok(&grid, 1.1, 1.0));
    }
}
