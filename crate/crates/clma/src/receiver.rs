//! Receive combining, SINR evaluation, and minimum-power allocation.
//!
//! Zero-forcing combining reduces the rate-constrained power minimization to
//! a closed form: user `k` transmits `||W[:,k]||^2 * sigma^2 * (2^r_k - 1)`
//! and the total is `tr{(H^H H)^-1 Omega}`. Maximal-ratio combining is kept
//! for the achievability side of the per-user power lower bound.
//!
//! All inverses go through a Cholesky factorization of the `K x K` Gram
//! matrix; the `MN x MN` side is never formed. Ill-conditioned Gram matrices
//! are rejected, never regularized.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result, MAX_CONDITION};

/// Diagonal rate-weight matrix `Omega = diag(sigma^2 * (2^r_k - 1))`, stored
/// with the noise power and the per-user rate requirements that define it.
#[derive(Debug, Clone, PartialEq)]
pub struct RateWeightMatrix {
    omega: Vec<f64>,
    noise_power: f64,
    rates: Vec<f64>,
}

impl RateWeightMatrix {
    /// Builds the weights from a noise power (watts) and per-user minimum
    /// rates (bits/s/Hz).
    pub fn new(noise_power: f64, rates: &[f64]) -> Result<Self> {
        if !(noise_power.is_finite() && noise_power > 0.0) {
            return Err(Error::InvalidInput(format!("noise power must be positive, got {noise_power}")));
        }
        if rates.is_empty() {
            return Err(Error::InvalidInput("need at least one user rate".into()));
        }
        for &r in rates {
            if !r.is_finite() || r < 0.0 {
                return Err(Error::InvalidInput(format!("rate must be non-negative, got {r}")));
            }
        }
        let omega = rates.iter().map(|&r| noise_power * rate_to_snr(r)).collect();
        Ok(Self { omega, noise_power, rates: rates.to_vec() })
    }

    /// Same rate for every one of `k` users.
    pub fn uniform(noise_power: f64, rate: f64, k: usize) -> Result<Self> {
        Self::new(noise_power, &vec![rate; k])
    }

    /// Diagonal entries `sigma^2 * (2^r_k - 1)` in watts.
    pub fn weights(&self) -> &[f64] {
        &self.omega
    }

    /// Noise power in watts.
    pub fn noise_power(&self) -> f64 {
        self.noise_power
    }

    /// Per-user rate requirements in bits/s/Hz.
    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    /// Number of users.
    pub fn num_users(&self) -> usize {
        self.omega.len()
    }
}

/// SNR target implied by a rate requirement: `2^r - 1`.
#[inline]
pub fn rate_to_snr(rate: f64) -> f64 {
    2f64.powf(rate) - 1.0
}

/// Per-user and total minimum transmit power under a zero-forcing receiver.
#[derive(Debug, Clone)]
pub struct PowerReport {
    /// Minimum transmit power of each user, watts.
    pub per_user_power: Vec<f64>,
    /// Sum of the per-user powers, watts.
    pub total_power: f64,
    /// The combining matrix that achieves it (`MN x K`).
    pub combiner: DMatrix<Complex64>,
}

/// Received SINR of user `k` for an arbitrary combiner, transmit powers, and
/// noise power: desired power over interference plus combined noise.
pub fn sinr(
    combiner: &DMatrix<Complex64>,
    channel: &DMatrix<Complex64>,
    power: &[f64],
    noise_power: f64,
    k: usize,
) -> Result<f64> {
    let users = channel.ncols();
    if combiner.ncols() != users || combiner.nrows() != channel.nrows() {
        return Err(Error::InvalidInput(format!(
            "combiner {}x{} does not match channel {}x{}",
            combiner.nrows(),
            combiner.ncols(),
            channel.nrows(),
            channel.ncols()
        )));
    }
    if power.len() != users {
        return Err(Error::InvalidInput("power vector length must equal the user count".into()));
    }
    if k >= users {
        return Err(Error::InvalidInput(format!("user index {k} out of range for K={users}")));
    }
    if power.iter().any(|&p| !p.is_finite() || p < 0.0) {
        return Err(Error::InvalidInput("transmit powers must be non-negative".into()));
    }
    if !(noise_power.is_finite() && noise_power > 0.0) {
        return Err(Error::InvalidInput("noise power must be positive".into()));
    }
    let w_k = combiner.column(k);
    let w_norm_sq = w_k.norm_squared();
    if w_norm_sq == 0.0 {
        return Err(Error::InvalidInput(format!("combiner column {k} is zero")));
    }
    let desired = w_k.dotc(&channel.column(k)).norm_sqr() * power[k];
    let mut interference = 0.0;
    for q in 0..users {
        if q != k {
            interference += w_k.dotc(&channel.column(q)).norm_sqr() * power[q];
        }
    }
    Ok(desired / (interference + w_norm_sq * noise_power))
}

/// Hermitian Gram matrix `H^H H` of the user channels.
pub fn gram_matrix(channel: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    channel.adjoint() * channel
}

pub(crate) struct GramCholesky {
    chol: nalgebra::linalg::Cholesky<Complex64, nalgebra::Dyn>,
}

impl GramCholesky {
    /// Factors a Hermitian positive-definite Gram matrix, rejecting
    /// indefinite or ill-conditioned inputs (condition estimate from the
    /// squared ratio of the extreme Cholesky pivots).
    pub(crate) fn new(gram: DMatrix<Complex64>) -> Result<Self> {
        let k = gram.nrows();
        let chol = nalgebra::linalg::Cholesky::new(gram)
            .ok_or_else(|| Error::SingularChannel("Gram matrix is not positive definite".into()))?;
        let l = chol.l_dirty();
        let mut dmin = f64::INFINITY;
        let mut dmax = 0.0f64;
        for i in 0..k {
            let d = l[(i, i)].re;
            dmin = dmin.min(d);
            dmax = dmax.max(d);
        }
        if !(dmin > 0.0) || (dmax / dmin).powi(2) > MAX_CONDITION {
            return Err(Error::SingularChannel(format!(
                "Gram matrix condition estimate {:.3e} exceeds {MAX_CONDITION:e}",
                (dmax / dmin).powi(2)
            )));
        }
        Ok(Self { chol })
    }

    pub(crate) fn solve(&self, rhs: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        self.chol.solve(rhs)
    }

    /// `tr{Z^-1 Omega}` for the factored `Z` and diagonal weights.
    pub(crate) fn weighted_trace_inverse(&self, weights: &[f64]) -> f64 {
        let inv = self.chol.inverse();
        weights.iter().enumerate().map(|(i, &w)| w * inv[(i, i)].re).sum()
    }
}

/// Weighted trace of the inverse Gram matrix: `tr{Z^-1 Omega}`.
pub(crate) fn weighted_trace_inverse(gram: DMatrix<Complex64>, weights: &[f64]) -> Result<f64> {
    Ok(GramCholesky::new(gram)?.weighted_trace_inverse(weights))
}

/// Zero-forcing combining matrix `W = H (H^H H)^-1`, satisfying
/// `W^H H = I_K`.
///
/// Fails with [`Error::SingularChannel`] when the Gram matrix has a
/// condition number above [`MAX_CONDITION`] (exact, via its eigenvalues).
pub fn zf_combiner(channel: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    let gram = gram_matrix(channel);
    let eig = gram.clone().symmetric_eigen();
    let emax = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b));
    let emin = eig.eigenvalues.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    if !(emin > 0.0) || emax / emin > MAX_CONDITION {
        return Err(Error::SingularChannel(format!(
            "Gram matrix condition number {:.3e} exceeds {MAX_CONDITION:e}",
            emax / emin.max(f64::MIN_POSITIVE)
        )));
    }
    let chol = GramCholesky::new(gram)?;
    // W^H = Z^-1 H^H, so W = (solve(Z, H^H))^H.
    Ok(chol.solve(&channel.adjoint()).adjoint())
}

/// Maximal-ratio combining: the channel matrix itself, column-wise.
pub fn mrc_combiner(channel: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    channel.clone()
}

/// Minimum per-user transmit power under zero-forcing that meets each rate
/// requirement with equality: `||W[:,k]||^2 * sigma^2 * (2^r_k - 1)`.
pub fn min_power_per_user(channel: &DMatrix<Complex64>, omega: &RateWeightMatrix) -> Result<Vec<f64>> {
    if omega.num_users() != channel.ncols() {
        return Err(Error::InvalidInput(format!(
            "rate weights for {} users but channel has {}",
            omega.num_users(),
            channel.ncols()
        )));
    }
    let w = zf_combiner(channel)?;
    Ok(omega
        .weights()
        .iter()
        .enumerate()
        .map(|(k, &wk)| w.column(k).norm_squared() * wk)
        .collect())
}

/// Minimum total transmit power under zero-forcing:
/// `tr{(H^H H)^-1 Omega}`.
pub fn total_power_zf(channel: &DMatrix<Complex64>, omega: &RateWeightMatrix) -> Result<f64> {
    if omega.num_users() != channel.ncols() {
        return Err(Error::InvalidInput(format!(
            "rate weights for {} users but channel has {}",
            omega.num_users(),
            channel.ncols()
        )));
    }
    weighted_trace_inverse(gram_matrix(channel), omega.weights())
}

/// Per-user power report under zero-forcing.
pub fn power_report(channel: &DMatrix<Complex64>, omega: &RateWeightMatrix) -> Result<PowerReport> {
    let per_user_power = min_power_per_user(channel, omega)?;
    let total_power = per_user_power.iter().sum();
    Ok(PowerReport { per_user_power, total_power, combiner: zf_combiner(channel)? })
}

/// The per-user transmit power lower bound
/// `sigma^2 * (2^r - 1) / (MN * ||b||_1^2)`, valid for any antenna positions.
pub fn per_user_power_lower_bound(
    path_coeffs: &[Complex64],
    antenna_count: usize,
    noise_power: f64,
    rate: f64,
) -> Result<f64> {
    if antenna_count == 0 {
        return Err(Error::InvalidInput("antenna count must be at least 1".into()));
    }
    if !(noise_power.is_finite() && noise_power > 0.0) {
        return Err(Error::InvalidInput("noise power must be positive".into()));
    }
    if !rate.is_finite() || rate < 0.0 {
        return Err(Error::InvalidInput(format!("rate must be non-negative, got {rate}")));
    }
    let l1: f64 = path_coeffs.iter().map(|b| b.norm()).sum();
    if l1 == 0.0 {
        return Err(Error::InvalidInput("path coefficients have zero 1-norm".into()));
    }
    Ok(noise_power * rate_to_snr(rate) / (antenna_count as f64 * l1 * l1))
}

/// Convenience: the summed per-user lower bound for a set of users.
pub fn total_power_lower_bound(
    users: &[crate::channel::UserPathSet],
    antenna_count: usize,
    omega: &RateWeightMatrix,
) -> Result<f64> {
    if users.len() != omega.num_users() {
        return Err(Error::InvalidInput("user count does not match rate weights".into()));
    }
    let mut total = 0.0;
    for (user, &rate) in users.iter().zip(omega.rates()) {
        total += per_user_power_lower_bound(&user.coeffs(), antenna_count, omega.noise_power(), rate)?;
    }
    Ok(total)
}

/// Construct a `K x K` gram-style matrix directly from a diagonal (test and
/// reporting helper).
pub fn diagonal_matrix(diag: &[f64]) -> DMatrix<Complex64> {
    DMatrix::from_fn(diag.len(), diag.len(), |i, j| {
        if i == j { Complex64::new(diag[i], 0.0) } else { Complex64::new(0.0, 0.0) }
    })
}

#[allow(dead_code)]
pub(crate) fn column_vector(v: &[Complex64]) -> DVector<Complex64> {
    DVector::from_column_slice(v)
}
