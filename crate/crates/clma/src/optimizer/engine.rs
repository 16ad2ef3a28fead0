//! Greedy two-phase search over the candidate grid.
//!
//! The engine maintains, per channel realization, the `K x K` Gram matrix of
//! the currently selected virtual array plus per-candidate block Grams
//! (the contribution of one horizontal candidate over the selected vertical
//! candidates, and vice versa). Evaluating a removal or swap is then a
//! `K x K` matrix update and one Cholesky factorization. The objective is
//! the mean over realizations, so the same engine drives both the
//! instantaneous design (one realization) and the statistical design.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::channel::{ApvPair, UserPathSet, SPACING_TOL};
use crate::error::{Error, Result};
use crate::receiver::{GramCholesky, RateWeightMatrix};

use super::{
    candidate_channel_matrix, rank1_add, selected_gram, CandidateChannel, CandidateGrid,
    OptimizerConfig, SelectionPair,
};

/// Rebuild the maintained Gram state from scratch after this many committed
/// updates, bounding floating-point drift.
const REBUILD_INTERVAL: usize = 64;

/// Result of a full grid optimization run.
#[derive(Debug, Clone)]
pub struct OptimizeOutcome {
    /// The antenna position vectors induced by the final selection.
    pub apv: ApvPair,
    /// The final selection.
    pub selection: SelectionPair,
    /// Final objective value (watts; mean over realizations).
    pub objective: f64,
    /// Objective after each committed elimination, starting with the
    /// full-grid value.
    pub elimination_trajectory: Vec<f64>,
    /// Objective after each row visit during refinement.
    pub refinement_trajectory: Vec<f64>,
    /// Indices into the refinement trajectory marking the end of each sweep.
    pub sweep_ends: Vec<usize>,
    /// Number of refinement sweeps executed.
    pub sweeps: usize,
    /// Number of objective evaluations performed.
    pub evaluations: usize,
}

impl OptimizeOutcome {
    /// Elimination and refinement trajectories concatenated.
    pub fn full_trajectory(&self) -> Vec<f64> {
        let mut t = self.elimination_trajectory.clone();
        t.extend_from_slice(&self.refinement_trajectory);
        t
    }
}

struct RealizationState {
    /// Gram matrix of the selected virtual array.
    z: DMatrix<Complex64>,
    /// Block Gram of each horizontal candidate over the selected verticals.
    gx: Vec<DMatrix<Complex64>>,
    /// Block Gram of each vertical candidate over the selected horizontals.
    gy: Vec<DMatrix<Complex64>>,
}

pub(crate) struct GreedyEngine<'a> {
    channels: &'a [CandidateChannel],
    grid: &'a CandidateGrid,
    omega: &'a RateWeightMatrix,
    cfg: &'a OptimizerConfig,
    m: usize,
    n: usize,
    sel: SelectionPair,
    states: Vec<RealizationState>,
    commits: usize,
    pub evaluations: usize,
}

/// Sums in a fixed pairwise (tree) order, so the result does not depend on
/// evaluation order.
pub(crate) fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        n => {
            let (a, b) = values.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

impl<'a> GreedyEngine<'a> {
    pub(crate) fn new(
        channels: &'a [CandidateChannel],
        grid: &'a CandidateGrid,
        sel: SelectionPair,
        m: usize,
        n: usize,
        omega: &'a RateWeightMatrix,
        cfg: &'a OptimizerConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        if channels.is_empty() {
            return Err(Error::InvalidInput("need at least one channel realization".into()));
        }
        let (m_bar, n_bar) = (grid.m_bar(), grid.n_bar());
        if m == 0 || n == 0 {
            return Err(Error::InvalidInput("array dimensions must be positive".into()));
        }
        if m_bar < m || n_bar < n {
            return Err(Error::Infeasible(format!(
                "grid {m_bar} x {n_bar} cannot host an {m} x {n} selection"
            )));
        }
        for c in channels {
            if c.m_bar() != m_bar || c.n_bar() != n_bar {
                return Err(Error::InvalidInput("candidate channel does not match the grid".into()));
            }
            if c.num_users() != omega.num_users() {
                return Err(Error::InvalidInput("rate weights do not match the user count".into()));
            }
        }
        let mut engine =
            Self { channels, grid, omega, cfg, m, n, sel, states: Vec::new(), commits: 0, evaluations: 0 };
        engine.rebuild_states();
        Ok(engine)
    }

    pub(crate) fn selection(&self) -> &SelectionPair {
        &self.sel
    }

    fn rebuild_states(&mut self) {
        let k = self.omega.num_users();
        self.states = self
            .channels
            .iter()
            .map(|c| {
                let mut gx = vec![DMatrix::<Complex64>::zeros(k, k); c.m_bar()];
                for (xi, block) in gx.iter_mut().enumerate() {
                    for &yi in self.sel.y_indices() {
                        rank1_add(block, c.row(xi, yi), 1.0);
                    }
                }
                let mut gy = vec![DMatrix::<Complex64>::zeros(k, k); c.n_bar()];
                for (yi, block) in gy.iter_mut().enumerate() {
                    for &xi in self.sel.x_indices() {
                        rank1_add(block, c.row(xi, yi), 1.0);
                    }
                }
                let z = selected_gram(&self.sel, c);
                RealizationState { z, gx, gy }
            })
            .collect();
    }

    fn note_commit(&mut self) {
        self.commits += 1;
        if self.commits % REBUILD_INTERVAL == 0 {
            self.rebuild_states();
        }
    }

    /// Mean objective of per-realization Gram matrices produced by `f`.
    fn eval_with<F>(&mut self, f: F) -> Result<f64>
    where
        F: Fn(&RealizationState) -> DMatrix<Complex64>,
    {
        self.evaluations += 1;
        let mut terms = Vec::with_capacity(self.states.len());
        for (s, st) in self.states.iter().enumerate() {
            let value = GramCholesky::new(f(st))
                .map_err(|e| Error::SingularChannel(format!("realization {s}: {e}")))?
                .weighted_trace_inverse(self.omega.weights());
            terms.push(value);
        }
        Ok(pairwise_sum(&terms) / self.states.len() as f64)
    }

    pub(crate) fn objective_current(&mut self) -> Result<f64> {
        self.eval_with(|st| st.z.clone())
    }

    fn eval_x_removal(&mut self, a: usize) -> Result<f64> {
        self.eval_with(|st| &st.z - &st.gx[a])
    }

    fn eval_y_removal(&mut self, b: usize) -> Result<f64> {
        self.eval_with(|st| &st.z - &st.gy[b])
    }

    fn eval_x_swap(&mut self, a: usize, c: usize) -> Result<f64> {
        self.eval_with(|st| &st.z - &st.gx[a] + &st.gx[c])
    }

    fn eval_y_swap(&mut self, b: usize, c: usize) -> Result<f64> {
        self.eval_with(|st| &st.z - &st.gy[b] + &st.gy[c])
    }

    fn commit_x_removal(&mut self, pos: usize) {
        let a = self.sel.x_indices()[pos];
        for (st, c) in self.states.iter_mut().zip(self.channels) {
            let block = st.gx[a].clone();
            st.z -= &block;
            for yi in 0..c.n_bar() {
                rank1_add(&mut st.gy[yi], c.row(a, yi), -1.0);
            }
        }
        self.sel.x_idx_mut().remove(pos);
        self.note_commit();
    }

    fn commit_y_removal(&mut self, pos: usize) {
        let b = self.sel.y_indices()[pos];
        for (st, c) in self.states.iter_mut().zip(self.channels) {
            let block = st.gy[b].clone();
            st.z -= &block;
            for xi in 0..c.m_bar() {
                rank1_add(&mut st.gx[xi], c.row(xi, b), -1.0);
            }
        }
        self.sel.y_idx_mut().remove(pos);
        self.note_commit();
    }

    fn commit_x_swap(&mut self, row: usize, c_new: usize) {
        let a = self.sel.x_indices()[row];
        for (st, c) in self.states.iter_mut().zip(self.channels) {
            let delta = &st.gx[c_new] - &st.gx[a];
            st.z += &delta;
            for yi in 0..c.n_bar() {
                rank1_add(&mut st.gy[yi], c.row(a, yi), -1.0);
                rank1_add(&mut st.gy[yi], c.row(c_new, yi), 1.0);
            }
        }
        self.sel.x_idx_mut()[row] = c_new;
        self.note_commit();
    }

    fn commit_y_swap(&mut self, row: usize, c_new: usize) {
        let b = self.sel.y_indices()[row];
        for (st, c) in self.states.iter_mut().zip(self.channels) {
            let delta = &st.gy[c_new] - &st.gy[b];
            st.z += &delta;
            for xi in 0..c.m_bar() {
                rank1_add(&mut st.gx[xi], c.row(xi, b), -1.0);
                rank1_add(&mut st.gx[xi], c.row(xi, c_new), 1.0);
            }
        }
        self.sel.y_idx_mut()[row] = c_new;
        self.note_commit();
    }

    /// Scans candidate removals on one axis and commits the one with the
    /// smallest objective (strict comparison, earliest index wins ties).
    fn eliminate_one(&mut self, horizontal: bool) -> Result<f64> {
        let count = if horizontal { self.sel.x_indices().len() } else { self.sel.y_indices().len() };
        let mut best: Option<(f64, usize)> = None;
        let mut last_err = None;
        for pos in 0..count {
            let idx =
                if horizontal { self.sel.x_indices()[pos] } else { self.sel.y_indices()[pos] };
            let obj = if horizontal { self.eval_x_removal(idx) } else { self.eval_y_removal(idx) };
            match obj {
                Ok(v) => {
                    if best.map_or(true, |(b, _)| v < b) {
                        best = Some((v, pos));
                    }
                }
                Err(e) => last_err = Some(e),
            }
        }
        let (value, pos) = best.ok_or_else(|| {
            Error::SingularChannel(format!(
                "every candidate elimination left a singular channel ({})",
                last_err.map(|e| e.to_string()).unwrap_or_else(|| "no candidates".into())
            ))
        })?;
        if horizontal {
            self.commit_x_removal(pos);
        } else {
            self.commit_y_removal(pos);
        }
        Ok(value)
    }

    /// Phase one: remove candidates until exactly `M` horizontal and `N`
    /// vertical remain, recording the objective after each removal.
    pub(crate) fn run_elimination(&mut self) -> Result<Vec<f64>> {
        let mut trajectory = vec![self.objective_current()?];
        let x_steps = self.grid.m_bar() - self.m;
        let y_steps = self.grid.n_bar() - self.n;
        for i in 1..=x_steps.max(y_steps) {
            if i <= x_steps {
                trajectory.push(self.eliminate_one(true)?);
            }
            if i <= y_steps {
                trajectory.push(self.eliminate_one(false)?);
            }
        }
        Ok(trajectory)
    }

    /// Gate for moving one selected row to candidate `c`: the induced
    /// position must keep the minimum spacing to both current neighbors.
    fn gate(&self, horizontal: bool, row: usize, c: usize) -> bool {
        let (idx, pos, d_min): (&[usize], &[f64], f64) = if horizontal {
            (self.sel.x_indices(), self.grid.x(), self.cfg.d_min_x)
        } else {
            (self.sel.y_indices(), self.grid.y(), self.cfg.d_min_y)
        };
        let p = pos[c];
        if row > 0 && p - pos[idx[row - 1]] < d_min - SPACING_TOL {
            return false;
        }
        if row + 1 < idx.len() && pos[idx[row + 1]] - p < d_min - SPACING_TOL {
            return false;
        }
        true
    }

    /// Revisits one row, moving it to the best feasible candidate. Returns
    /// the objective after the visit, or `None` when no candidate passes the
    /// spacing gate.
    fn refine_row(&mut self, horizontal: bool, row: usize) -> Result<Option<(f64, bool)>> {
        let current =
            if horizontal { self.sel.x_indices()[row] } else { self.sel.y_indices()[row] };
        let count = if horizontal { self.grid.m_bar() } else { self.grid.n_bar() };
        let mut best: Option<(f64, usize)> = None;
        for c in 0..count {
            if !self.gate(horizontal, row, c) {
                continue;
            }
            // The same candidate index on the other row is excluded by the
            // spacing gate, so c is either `current` or unselected.
            let obj = if c == current {
                self.eval_with(|st| st.z.clone())
            } else if horizontal {
                self.eval_x_swap(current, c)
            } else {
                self.eval_y_swap(current, c)
            };
            if let Ok(v) = obj {
                if best.map_or(true, |(b, _)| v < b) {
                    best = Some((v, c));
                }
            }
        }
        match best {
            None => Ok(None),
            Some((v, c)) => {
                let moved = c != current;
                if moved {
                    if horizontal {
                        self.commit_x_swap(row, c);
                    } else {
                        self.commit_y_swap(row, c);
                    }
                }
                Ok(Some((v, moved)))
            }
        }
    }

    fn spacing_ok(&self) -> bool {
        self.sel.spacing_ok(self.grid, self.cfg.d_min_x, self.cfg.d_min_y)
    }

    /// Phase two: sweep the rows until a full sweep changes the objective by
    /// less than epsilon (and the spacing constraints hold) or the sweep cap
    /// is reached.
    pub(crate) fn run_refinement(&mut self) -> Result<(Vec<f64>, Vec<usize>, usize)> {
        let mut trajectory = Vec::new();
        let mut sweep_ends = Vec::new();
        let mut prev = self.objective_current()?;
        let mut prev_feasible = self.spacing_ok();
        let mut sweeps = 0;
        loop {
            sweeps += 1;
            let mut changed = false;
            let mut blocked_row = false;
            for i in 0..self.m.max(self.n) {
                if i < self.m {
                    match self.refine_row(true, i)? {
                        Some((v, moved)) => {
                            trajectory.push(v);
                            changed |= moved;
                        }
                        None => blocked_row = true,
                    }
                }
                if i < self.n {
                    match self.refine_row(false, i)? {
                        Some((v, moved)) => {
                            trajectory.push(v);
                            changed |= moved;
                        }
                        None => blocked_row = true,
                    }
                }
            }
            sweep_ends.push(trajectory.len());
            let cur = self.objective_current()?;
            let feasible = self.spacing_ok();
            if !feasible && !changed {
                return Err(Error::Infeasible(format!(
                    "refinement cannot satisfy the spacing constraints{} (grid too coarse for d_min?)",
                    if blocked_row { "; some rows have no feasible candidate" } else { "" }
                )));
            }
            if feasible && prev_feasible && (prev - cur).abs() < self.cfg.epsilon {
                break;
            }
            if sweeps >= self.cfg.max_sweeps {
                if !feasible {
                    return Err(Error::Infeasible(
                        "sweep cap reached without satisfying the spacing constraints".into(),
                    ));
                }
                break;
            }
            prev = cur;
            prev_feasible = feasible;
        }
        Ok((trajectory, sweep_ends, sweeps))
    }
}

/// Phase one of the greedy search on one candidate channel: start from the
/// full grid and repeatedly drop the horizontal or vertical candidate whose
/// removal costs the least transmit power, until `m x n` remain. The
/// returned trajectory starts with the full-grid objective; spacing is not
/// yet enforced.
pub fn sequential_elimination(
    candidates: &CandidateChannel,
    grid: &CandidateGrid,
    m: usize,
    n: usize,
    omega: &RateWeightMatrix,
    cfg: &OptimizerConfig,
) -> Result<(SelectionPair, Vec<f64>)> {
    let sel = SelectionPair::full(grid.m_bar(), grid.n_bar());
    let mut engine =
        GreedyEngine::new(std::slice::from_ref(candidates), grid, sel, m, n, omega, cfg)?;
    let trajectory = engine.run_elimination()?;
    Ok((engine.sel, trajectory))
}

/// Result of [`successive_refinement`].
#[derive(Debug, Clone)]
pub struct RefinementResult {
    /// The refined selection; satisfies the spacing constraints.
    pub selection: SelectionPair,
    /// Objective after each row visit.
    pub trajectory: Vec<f64>,
    /// Trajectory index reached at the end of each sweep.
    pub sweep_ends: Vec<usize>,
    /// Number of sweeps executed.
    pub sweeps: usize,
}

/// Phase two of the greedy search: revisit each selected row/column in turn
/// and move it to the candidate that minimizes the objective among those
/// keeping the minimum spacing to its neighbors.
pub fn successive_refinement(
    sel: &SelectionPair,
    candidates: &CandidateChannel,
    grid: &CandidateGrid,
    omega: &RateWeightMatrix,
    cfg: &OptimizerConfig,
) -> Result<RefinementResult> {
    let (m, n) = sel.dims();
    let mut engine =
        GreedyEngine::new(std::slice::from_ref(candidates), grid, sel.clone(), m, n, omega, cfg)?;
    let (trajectory, sweep_ends, sweeps) = engine.run_refinement()?;
    Ok(RefinementResult { selection: engine.sel, trajectory, sweep_ends, sweeps })
}

/// Full discrete position optimization for one channel realization:
/// candidate channel, sequential elimination, successive refinement.
pub fn optimize_positions(
    users: &[UserPathSet],
    grid: &CandidateGrid,
    m: usize,
    n: usize,
    omega: &RateWeightMatrix,
    cfg: &OptimizerConfig,
    wavelength: f64,
) -> Result<OptimizeOutcome> {
    let candidates = candidate_channel_matrix(grid, users, wavelength)?;
    optimize_on_channels(std::slice::from_ref(&candidates), grid, m, n, omega, cfg, wavelength)
}

/// Runs both greedy phases with the objective averaged over the given
/// channel realizations (one realization recovers the instantaneous
/// design).
pub(crate) fn optimize_on_channels(
    channels: &[CandidateChannel],
    grid: &CandidateGrid,
    m: usize,
    n: usize,
    omega: &RateWeightMatrix,
    cfg: &OptimizerConfig,
    wavelength: f64,
) -> Result<OptimizeOutcome> {
    let sel = SelectionPair::full(grid.m_bar(), grid.n_bar());
    let mut engine = GreedyEngine::new(channels, grid, sel, m, n, omega, cfg)?;
    let elimination_trajectory = engine.run_elimination()?;
    let (refinement_trajectory, sweep_ends, sweeps) = engine.run_refinement()?;
    let objective = engine.objective_current()?;
    let evaluations = engine.evaluations;
    let selection = engine.sel;
    let apv = selection.induced_apv(grid, wavelength)?;
    Ok(OptimizeOutcome {
        apv,
        selection,
        objective,
        elimination_trajectory,
        refinement_trajectory,
        sweep_ends,
        sweeps,
        evaluations,
    })
}
