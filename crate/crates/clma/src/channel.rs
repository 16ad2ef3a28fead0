//! Field-response channel model for a cross-linked movable antenna array.
//!
//! The array has `M` vertical tracks (horizontal coordinates `x`) and `N`
//! horizontal tracks (vertical coordinates `y`); an antenna sits on every
//! crossing, so the array holds `M * N` elements but only `M + N` coordinates
//! are free. The channel of a user is a superposition of plane-wave paths,
//! each described by a pair of virtual angles of arrival and a complex path
//! coefficient. Every function here is pure and deterministic.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::f64::consts::TAU;

use crate::error::{Error, Result};

/// Axis selector for field-response quantities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    /// Along the horizontal coordinate `x`; uses the horizontal virtual AoA.
    Horizontal,
    /// Along the vertical coordinate `y`; uses the vertical virtual AoA.
    Vertical,
}

/// One propagation path: virtual AoAs (direction cosines along the array
/// axes) and the complex gain observed at the array reference point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathComponent {
    /// Horizontal virtual AoA, `cos(elevation) * cos(azimuth)`, in [-1, 1].
    pub virtual_aoa_h: f64,
    /// Vertical virtual AoA, `sin(elevation)`, in [-1, 1].
    pub virtual_aoa_v: f64,
    /// Complex path coefficient (amplitude embeds the path loss).
    pub coeff: Complex64,
}

/// The multipath description of one user: at least one [`PathComponent`].
#[derive(Debug, Clone, PartialEq)]
pub struct UserPathSet {
    paths: Vec<PathComponent>,
}

impl UserPathSet {
    /// Builds a path set, validating that every virtual AoA lies in [-1, 1]
    /// and that all values are finite.
    pub fn new(paths: Vec<PathComponent>) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::InvalidInput("a user needs at least one path".into()));
        }
        for (i, p) in paths.iter().enumerate() {
            if !p.virtual_aoa_h.is_finite() || !p.virtual_aoa_v.is_finite() {
                return Err(Error::InvalidInput(format!("path {i}: non-finite virtual AoA")));
            }
            if p.virtual_aoa_h.abs() > 1.0 || p.virtual_aoa_v.abs() > 1.0 {
                return Err(Error::InvalidInput(format!(
                    "path {i}: virtual AoA ({}, {}) outside [-1, 1]",
                    p.virtual_aoa_h, p.virtual_aoa_v
                )));
            }
            if !p.coeff.re.is_finite() || !p.coeff.im.is_finite() {
                return Err(Error::InvalidInput(format!("path {i}: non-finite coefficient")));
            }
        }
        Ok(Self { paths })
    }

    /// Convenience constructor for a single-path user.
    pub fn single(virtual_aoa_h: f64, virtual_aoa_v: f64, coeff: Complex64) -> Result<Self> {
        Self::new(vec![PathComponent { virtual_aoa_h, virtual_aoa_v, coeff }])
    }

    /// Number of channel paths `L`.
    pub fn num_paths(&self) -> usize {
        self.paths.len()
    }

    /// The path components.
    pub fn paths(&self) -> &[PathComponent] {
        &self.paths
    }

    /// Virtual AoAs along one axis, in path order.
    pub fn virtual_aoas(&self, axis: Axis) -> Vec<f64> {
        self.paths
            .iter()
            .map(|p| match axis {
                Axis::Horizontal => p.virtual_aoa_h,
                Axis::Vertical => p.virtual_aoa_v,
            })
            .collect()
    }

    /// Path coefficients as a vector.
    pub fn coeffs(&self) -> Vec<Complex64> {
        self.paths.iter().map(|p| p.coeff).collect()
    }

    /// 1-norm of the path coefficient vector (enters the power lower bound).
    pub fn coeff_l1_norm(&self) -> f64 {
        self.paths.iter().map(|p| p.coeff.norm()).sum()
    }
}

/// Horizontal and vertical antenna position vectors of the array, in meters,
/// together with the carrier wavelength.
///
/// Coordinates are strictly increasing; `x` has length `M` and `y` length
/// `N`, so the array carries `M * N` antennas.
#[derive(Debug, Clone, PartialEq)]
pub struct ApvPair {
    x: Vec<f64>,
    y: Vec<f64>,
    wavelength: f64,
}

impl ApvPair {
    /// Builds an APV pair, validating sortedness and a positive wavelength.
    pub fn new(x: Vec<f64>, y: Vec<f64>, wavelength: f64) -> Result<Self> {
        if !(wavelength.is_finite() && wavelength > 0.0) {
            return Err(Error::InvalidInput(format!("wavelength must be positive, got {wavelength}")));
        }
        check_sorted("x", &x, None)?;
        check_sorted("y", &y, None)?;
        Ok(Self { x, y, wavelength })
    }

    /// Like [`ApvPair::new`] but additionally enforces minimum inter-antenna
    /// spacing on both axes (with a 1e-12 m slack for grid round-off).
    pub fn with_min_spacing(
        x: Vec<f64>,
        y: Vec<f64>,
        wavelength: f64,
        d_min_x: f64,
        d_min_y: f64,
    ) -> Result<Self> {
        if !(wavelength.is_finite() && wavelength > 0.0) {
            return Err(Error::InvalidInput(format!("wavelength must be positive, got {wavelength}")));
        }
        check_sorted("x", &x, Some(d_min_x))?;
        check_sorted("y", &y, Some(d_min_y))?;
        Ok(Self { x, y, wavelength })
    }

    /// Horizontal coordinates (length `M`).
    pub fn x(&self) -> &[f64] {
        &self.x
    }

    /// Vertical coordinates (length `N`).
    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Carrier wavelength in meters.
    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    /// Number of vertical tracks `M`.
    pub fn m(&self) -> usize {
        self.x.len()
    }

    /// Number of horizontal tracks `N`.
    pub fn n(&self) -> usize {
        self.y.len()
    }

    /// Total antenna count `M * N`.
    pub fn antenna_count(&self) -> usize {
        self.x.len() * self.y.len()
    }

    /// The 2D coordinates of all `M * N` antennas in flat-index order.
    pub fn grid_points(&self) -> Vec<(f64, f64)> {
        let mut pts = Vec::with_capacity(self.antenna_count());
        for &xm in &self.x {
            for &yn in &self.y {
                pts.push((xm, yn));
            }
        }
        pts
    }
}

/// Slack when validating spacing constraints: candidate grids are allowed to
/// undershoot `d_min` by floating-point round-off.
pub const SPACING_TOL: f64 = 1e-12;

fn check_sorted(name: &str, v: &[f64], d_min: Option<f64>) -> Result<()> {
    if v.is_empty() {
        return Err(Error::InvalidInput(format!("{name} must be non-empty")));
    }
    for (i, &p) in v.iter().enumerate() {
        if !p.is_finite() {
            return Err(Error::InvalidInput(format!("{name}[{i}] is not finite")));
        }
    }
    let gap_min = d_min.map(|d| d - SPACING_TOL).unwrap_or(0.0);
    for i in 1..v.len() {
        let gap = v[i] - v[i - 1];
        if gap <= 0.0 || gap < gap_min {
            return Err(Error::InvalidInput(format!(
                "{name} must be strictly increasing{}: positions {} and {} differ by {gap}",
                d_min.map(|d| format!(" with spacing >= {d}")).unwrap_or_default(),
                i - 1,
                i
            )));
        }
    }
    Ok(())
}

/// Complex channel matrix between the array and `K` users; column `k` is the
/// channel vector of user `k` in flat antenna order.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    entries: DMatrix<Complex64>,
    m: usize,
    n: usize,
}

impl ChannelMatrix {
    /// Wraps an `MN x K` matrix, checking the dimensions.
    pub fn from_parts(entries: DMatrix<Complex64>, m: usize, n: usize) -> Result<Self> {
        if entries.nrows() != m * n {
            return Err(Error::InvalidInput(format!(
                "channel matrix has {} rows, expected M*N = {}",
                entries.nrows(),
                m * n
            )));
        }
        if entries.ncols() == 0 {
            return Err(Error::InvalidInput("channel matrix needs at least one user".into()));
        }
        Ok(Self { entries, m, n })
    }

    /// The raw `MN x K` matrix.
    pub fn as_matrix(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    /// Consumes the wrapper, returning the raw matrix.
    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.entries
    }

    /// Number of vertical tracks `M`.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of horizontal tracks `N`.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of users `K`.
    pub fn num_users(&self) -> usize {
        self.entries.ncols()
    }
}

/// Flat index of the antenna on vertical track `m` (0-based, horizontal
/// coordinate) and horizontal track `n` (0-based, vertical coordinate).
///
/// The horizontal index is the outer dimension so that stacking matches the
/// Kronecker product `a_hor (x) a_ver` and the selection identity
/// `(B_x (x) B_y) h`. Every place that flattens the array goes through here.
#[inline]
pub fn flat_index(m: usize, n: usize, n_total: usize) -> usize {
    m * n_total + n
}

#[inline]
fn phase(pos: f64, aoa: f64, wavelength: f64) -> f64 {
    TAU / wavelength * pos * aoa
}

/// Field-response vector of a single coordinate: element `l` is
/// `exp(+j * 2 pi / lambda * pos * aoa_l)`, one entry per path.
pub fn field_response_vector(pos: f64, aoas: &[f64], wavelength: f64) -> Result<Vec<Complex64>> {
    if !pos.is_finite() {
        return Err(Error::InvalidInput(format!("position {pos} is not finite")));
    }
    if !(wavelength.is_finite() && wavelength > 0.0) {
        return Err(Error::InvalidInput(format!("wavelength must be positive, got {wavelength}")));
    }
    for &a in aoas {
        if !a.is_finite() || a.abs() > 1.0 {
            return Err(Error::InvalidInput(format!("virtual AoA {a} outside [-1, 1]")));
        }
    }
    Ok(aoas
        .iter()
        .map(|&a| {
            let p = phase(pos, a, wavelength);
            Complex64::new(p.cos(), p.sin())
        })
        .collect())
}

/// Field-response matrix of one axis: `L x len(positions)`, column `m` is the
/// field-response vector of `positions[m]`.
pub fn field_response_matrix(
    positions: &[f64],
    paths: &UserPathSet,
    wavelength: f64,
    axis: Axis,
) -> Result<DMatrix<Complex64>> {
    if positions.is_empty() {
        return Err(Error::InvalidInput("positions must be non-empty".into()));
    }
    let aoas = paths.virtual_aoas(axis);
    let l = aoas.len();
    let mut out = DMatrix::<Complex64>::zeros(l, positions.len());
    for (m, &pos) in positions.iter().enumerate() {
        let col = field_response_vector(pos, &aoas, wavelength)?;
        for (i, v) in col.into_iter().enumerate() {
            out[(i, m)] = v;
        }
    }
    Ok(out)
}

/// Instantaneous channel vector of one user: the column-wise Kronecker
/// product of the conjugated field-response matrices applied to the path
/// coefficients. Length `M * N`, flat order per [`flat_index`].
pub fn channel_vector(apv: &ApvPair, paths: &UserPathSet) -> Result<DVector<Complex64>> {
    let f_hor = field_response_matrix(apv.x(), paths, apv.wavelength(), Axis::Horizontal)?;
    let f_ver = field_response_matrix(apv.y(), paths, apv.wavelength(), Axis::Vertical)?;
    let b = paths.coeffs();
    if f_hor.nrows() != b.len() || f_ver.nrows() != b.len() {
        return Err(Error::InvalidInput("path count mismatch between FRMs and coefficients".into()));
    }
    let (m, n) = (apv.m(), apv.n());
    let mut h = DVector::<Complex64>::zeros(m * n);
    for im in 0..m {
        for inn in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for (l, &bl) in b.iter().enumerate() {
                // (F_hor^H (Khatri-Rao) F_ver^H) b, one flat entry at a time.
                acc += (f_hor[(l, im)].conj() * f_ver[(l, inn)].conj()) * bl;
            }
            h[flat_index(im, inn, n)] = acc;
        }
    }
    Ok(h)
}

/// Single-path channel vector via steering vectors: `b * a_hor (x) a_ver`
/// with `a` entries `exp(-j * 2 pi / lambda * pos * aoa)`.
///
/// Bit-for-bit equal to [`channel_vector`] with a one-path set; the
/// conjugation in the field-response form produces exactly the steering-vector
/// sign.
pub fn single_path_channel(
    apv: &ApvPair,
    aoa_h: f64,
    aoa_v: f64,
    b: Complex64,
) -> Result<DVector<Complex64>> {
    let a_hor = steering_vector(apv.x(), aoa_h, apv.wavelength())?;
    let a_ver = steering_vector(apv.y(), aoa_v, apv.wavelength())?;
    let n = apv.n();
    let mut h = DVector::<Complex64>::zeros(apv.antenna_count());
    for (im, &ah) in a_hor.iter().enumerate() {
        for (inn, &av) in a_ver.iter().enumerate() {
            h[flat_index(im, inn, n)] = (ah * av) * b;
        }
    }
    Ok(h)
}

/// Steering vector over a coordinate axis: `exp(-j * 2 pi / lambda * pos * aoa)`.
pub fn steering_vector(positions: &[f64], aoa: f64, wavelength: f64) -> Result<Vec<Complex64>> {
    if !aoa.is_finite() || aoa.abs() > 1.0 {
        return Err(Error::InvalidInput(format!("virtual AoA {aoa} outside [-1, 1]")));
    }
    if !(wavelength.is_finite() && wavelength > 0.0) {
        return Err(Error::InvalidInput(format!("wavelength must be positive, got {wavelength}")));
    }
    positions
        .iter()
        .map(|&pos| {
            if !pos.is_finite() {
                return Err(Error::InvalidInput(format!("position {pos} is not finite")));
            }
            let p = phase(pos, aoa, wavelength);
            Ok(Complex64::new(p.cos(), -p.sin()))
        })
        .collect()
}

/// Stacks [`channel_vector`] columns for a list of users.
pub fn channel_matrix(apv: &ApvPair, users: &[UserPathSet]) -> Result<ChannelMatrix> {
    if users.is_empty() {
        return Err(Error::InvalidInput("need at least one user".into()));
    }
    let mn = apv.antenna_count();
    let mut entries = DMatrix::<Complex64>::zeros(mn, users.len());
    for (k, user) in users.iter().enumerate() {
        let h = channel_vector(apv, user)?;
        entries.set_column(k, &h);
    }
    ChannelMatrix::from_parts(entries, apv.m(), apv.n())
}
