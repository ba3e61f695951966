//! Wigner functions of Fock-basis density matrices.
//!
//! With `beta = r e^{i theta}` and the convention `W_vacuum(0) = 2/pi`,
//!
//! ```text
//! W(r, theta) = 2/pi e^{-2r^2} [ sum_n rho_nn (-1)^n L_n(4r^2)
//!     + 2 Re sum_{m>n} rho_nm (-1)^n sqrt(n!/m!) e^{i theta (m-n)} (2r)^{m-n} L_n^{m-n}(4r^2) ]
//! ```
//!
//! The angular dependence enters only through `e^{i theta k}`, so the radial
//! coefficient of each band `k = m - n` is computed once per radius.
//! Factorial ratios and powers of `2r` are combined in log space.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_2_PI, PI, TAU};

use crate::error::{Error, Result};
use crate::fock::DensityMatrix;
use crate::special::ln_factorials;

/// Normalization miss that [`wigner_function`] treats as a too-coarse grid.
pub const GRID_NORMALIZATION_TOLERANCE: f64 = 1e-2;

/// Generalized Laguerre polynomial `L_n^k(x)` by the three-term recurrence.
pub fn generalized_laguerre(n: usize, k: usize, x: f64) -> f64 {
    let k = k as f64;
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 1.0 + k - x;
    for j in 1..n {
        let jf = j as f64;
        let next = ((2.0 * jf + 1.0 + k - x) * cur - (jf + k) * prev) / (jf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Fills `out[n] = L_n^k(x)` for `n = 0..out.len()`.
fn laguerre_sequence(k: usize, x: f64, out: &mut [f64]) {
    let kf = k as f64;
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = 1.0 + kf - x;
    }
    for j in 1..out.len().saturating_sub(1) {
        let jf = j as f64;
        out[j + 1] = ((2.0 * jf + 1.0 + kf - x) * out[j] - (jf + kf) * out[j - 1]) / (jf + 1.0);
    }
}

/// Sampling points of a Wigner grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum GridSpec {
    /// Rows follow `x = Re beta`, columns follow `y = Im beta`.
    Cartesian { x: Vec<f64>, y: Vec<f64> },
    /// Rows follow `r`, columns follow `theta`.
    Polar { r: Vec<f64>, theta: Vec<f64> },
}

fn check_axis(name: &str, axis: &[f64]) -> Result<()> {
    if axis.is_empty() {
        return Err(Error::InvalidGrid(format!("{name} axis is empty")));
    }
    if axis.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidGrid(format!("{name} axis has non-finite values")));
    }
    if axis.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidGrid(format!("{name} axis is not strictly increasing")));
    }
    Ok(())
}

fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![lo];
    }
    let step = (hi - lo) / (points - 1) as f64;
    (0..points).map(|i| lo + step * i as f64).collect()
}

impl GridSpec {
    pub fn cartesian(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        check_axis("x", &x)?;
        check_axis("y", &y)?;
        Ok(GridSpec::Cartesian { x, y })
    }

    /// Square grid over `[-extent, extent]^2` with `points` samples per axis.
    pub fn cartesian_square(extent: f64, points: usize) -> Result<Self> {
        if !(extent > 0.0) || points < 2 {
            return Err(Error::InvalidGrid(format!(
                "need extent > 0 and at least 2 points, got {extent} / {points}"
            )));
        }
        let axis = linspace(-extent, extent, points);
        Self::cartesian(axis.clone(), axis)
    }

    pub fn polar(r: Vec<f64>, theta: Vec<f64>) -> Result<Self> {
        check_axis("r", &r)?;
        check_axis("theta", &theta)?;
        if r[0] < 0.0 {
            return Err(Error::InvalidGrid("r must be non-negative".into()));
        }
        Ok(GridSpec::Polar { r, theta })
    }

    /// `nr` radii on `[r_min, r_max]` and `ntheta` angles uniformly covering `[0, 2 pi)`.
    pub fn polar_uniform(r_min: f64, r_max: f64, nr: usize, ntheta: usize) -> Result<Self> {
        if nr < 2 || ntheta < 3 || !(r_max > r_min) {
            return Err(Error::InvalidGrid("polar grid needs nr >= 2, ntheta >= 3, r_max > r_min".into()));
        }
        let theta = (0..ntheta).map(|j| TAU * j as f64 / ntheta as f64).collect();
        Self::polar(linspace(r_min, r_max, nr), theta)
    }

    /// 121 x 121 points over `[-4.5, 4.5]^2`.
    pub fn default_cartesian() -> Self {
        Self::cartesian_square(4.5, 121).expect("default grid is valid")
    }

    pub fn shape(&self) -> (usize, usize) {
        match self {
            GridSpec::Cartesian { x, y } => (x.len(), y.len()),
            GridSpec::Polar { r, theta } => (r.len(), theta.len()),
        }
    }

    /// `(lo, hi)` of the first and second axes.
    pub fn extent(&self) -> [(f64, f64); 2] {
        let (a, b) = match self {
            GridSpec::Cartesian { x, y } => (x, y),
            GridSpec::Polar { r, theta } => (r, theta),
        };
        [(a[0], a[a.len() - 1]), (b[0], b[b.len() - 1])]
    }
}

/// Sampled Wigner function (or the image of a generator under the Wigner map).
#[derive(Clone, Debug, PartialEq)]
pub struct WignerGrid {
    pub spec: GridSpec,
    /// `values[(i, j)]` at the `i`-th point of the first axis and `j`-th of the second.
    pub values: DMatrix<f64>,
    /// Digest of the source density matrix.
    pub source_digest: String,
    /// Quadrature of the sampled function over the grid.
    pub integral: f64,
    /// Largest imaginary part discarded from the diagonal sum.
    pub imag_residue: f64,
}

impl WignerGrid {
    /// `max - min` of the samples along the imaginary axis (`x` closest to 0).
    ///
    /// Only defined for Cartesian grids.
    pub fn fringe_visibility(&self) -> Option<f64> {
        let GridSpec::Cartesian { x, .. } = &self.spec else {
            return None;
        };
        let col = x
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))?
            .0;
        let row = self.values.row(col);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = row.iter().copied().fold(f64::INFINITY, f64::min);
        Some(max - min)
    }

    /// Iterates `(first, second, value)` in row-major order.
    pub fn points(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        let (a, b) = match &self.spec {
            GridSpec::Cartesian { x, y } => (x, y),
            GridSpec::Polar { r, theta } => (r, theta),
        };
        a.iter().enumerate().flat_map(move |(i, &u)| {
            b.iter().enumerate().map(move |(j, &v)| (u, v, self.values[(i, j)]))
        })
    }
}

fn trapezoid_weights(axis: &[f64]) -> Vec<f64> {
    let n = axis.len();
    if n == 1 {
        return vec![0.0];
    }
    (0..n)
        .map(|i| {
            let left = if i > 0 { axis[i] - axis[i - 1] } else { 0.0 };
            let right = if i + 1 < n { axis[i + 1] - axis[i] } else { 0.0 };
            0.5 * (left + right)
        })
        .collect()
}

fn angular_weights(theta: &[f64]) -> Vec<f64> {
    let n = theta.len();
    let step = if n > 1 { theta[1] - theta[0] } else { 0.0 };
    let uniform = theta.windows(2).all(|w| ((w[1] - w[0]) - step).abs() < 1e-9 * step.max(1.0));
    let closes = n > 2 && ((theta[n - 1] + step - theta[0]) - TAU).abs() < 1e-9;
    if uniform && closes {
        vec![step; n]
    } else {
        trapezoid_weights(theta)
    }
}

fn quadrature(spec: &GridSpec, values: &DMatrix<f64>) -> f64 {
    match spec {
        GridSpec::Cartesian { x, y } => {
            let (wx, wy) = (trapezoid_weights(x), trapezoid_weights(y));
            (0..x.len())
                .map(|i| wx[i] * (0..y.len()).map(|j| wy[j] * values[(i, j)]).sum::<f64>())
                .sum()
        }
        GridSpec::Polar { r, theta } => {
            let (wr, wt) = (trapezoid_weights(r), angular_weights(theta));
            (0..r.len())
                .map(|i| wr[i] * r[i] * (0..theta.len()).map(|j| wt[j] * values[(i, j)]).sum::<f64>())
                .sum()
        }
    }
}

/// Per-radius series coefficients of the Wigner expansion.
struct Radial<'a> {
    rho: &'a DMatrix<C64>,
    lnf: Vec<f64>,
    weight: Option<&'a (dyn Fn(usize, usize) -> f64 + Sync)>,
}

impl<'a> Radial<'a> {
    fn new(rho: &'a DMatrix<C64>, weight: Option<&'a (dyn Fn(usize, usize) -> f64 + Sync)>) -> Self {
        Self {
            rho,
            lnf: ln_factorials(rho.nrows() + 1),
            weight,
        }
    }

    /// Band coefficients `R_k(r)` for the plain series and, when a weight is
    /// set, for the weighted series.
    fn coefficients(&self, r: f64) -> (Vec<C64>, Vec<C64>) {
        let size = self.rho.nrows();
        let x = 4.0 * r * r;
        let ln_2r = (2.0 * r).ln();
        let mut lag = vec![0.0; size];
        let mut plain = vec![C64::new(0.0, 0.0); size];
        let mut weighted = vec![C64::new(0.0, 0.0); if self.weight.is_some() { size } else { 0 }];
        for k in 0..size {
            let len = size - k;
            laguerre_sequence(k, x, &mut lag[..len]);
            let power = if k == 0 { 0.0 } else { k as f64 * ln_2r };
            let mut acc = C64::new(0.0, 0.0);
            let mut acc_w = C64::new(0.0, 0.0);
            for n in 0..len {
                let l = lag[n];
                if l == 0.0 {
                    continue;
                }
                let ln_mag = 0.5 * (self.lnf[n] - self.lnf[n + k]) + power - 2.0 * r * r + l.abs().ln();
                let mut term = ln_mag.exp() * l.signum();
                if n % 2 == 1 {
                    term = -term;
                }
                if term == 0.0 {
                    continue;
                }
                let elem = self.rho[(n, n + k)] * term;
                acc += elem;
                if let Some(w) = self.weight {
                    acc_w += elem * w(n, n + k);
                }
            }
            plain[k] = acc;
            if self.weight.is_some() {
                weighted[k] = acc_w;
            }
        }
        (plain, weighted)
    }
}

/// `2/pi [Re R_0 + 2 Re sum_k R_k e^{i theta k}]`, plus `|Im R_0|`.
fn combine(coeffs: &[C64], theta: f64) -> (f64, f64) {
    let mut total = coeffs[0].re;
    let step = C64::from_polar(1.0, theta);
    let mut phase = C64::new(1.0, 0.0);
    for c in &coeffs[1..] {
        phase *= step;
        total += 2.0 * (c * phase).re;
    }
    (FRAC_2_PI * total, FRAC_2_PI * coeffs[0].im.abs())
}

struct Evaluated {
    plain: DMatrix<f64>,
    weighted: Option<DMatrix<f64>>,
    imag_residue: f64,
}

fn evaluate(
    rho: &DensityMatrix,
    spec: &GridSpec,
    weight: Option<&(dyn Fn(usize, usize) -> f64 + Sync)>,
) -> Evaluated {
    let radial = Radial::new(rho.elements(), weight);
    let (rows, cols) = spec.shape();
    type Row = (Vec<f64>, Vec<f64>, f64);
    let row_values: Vec<Row> = (0..rows)
        .into_par_iter()
        .map(|i| {
            let mut plain = Vec::with_capacity(cols);
            let mut weighted = Vec::with_capacity(cols);
            let mut residue = 0.0_f64;
            match spec {
                GridSpec::Polar { r, theta } => {
                    let (c, cw) = radial.coefficients(r[i]);
                    for &t in theta {
                        let (v, im) = combine(&c, t);
                        plain.push(v);
                        residue = residue.max(im);
                        if weight.is_some() {
                            weighted.push(combine(&cw, t).0);
                        }
                    }
                }
                GridSpec::Cartesian { x, y } => {
                    for &yj in y {
                        let (r, t) = (x[i].hypot(yj), yj.atan2(x[i]));
                        let (c, cw) = radial.coefficients(r);
                        let (v, im) = combine(&c, t);
                        plain.push(v);
                        residue = residue.max(im);
                        if weight.is_some() {
                            weighted.push(combine(&cw, t).0);
                        }
                    }
                }
            }
            (plain, weighted, residue)
        })
        .collect();
    let plain = DMatrix::from_fn(rows, cols, |i, j| row_values[i].0[j]);
    let weighted = weight.map(|_| DMatrix::from_fn(rows, cols, |i, j| row_values[i].1[j]));
    let imag_residue = row_values.iter().map(|r| r.2).fold(0.0, f64::max);
    Evaluated {
        plain,
        weighted,
        imag_residue,
    }
}

fn check_normalization(normalization: f64) -> Result<()> {
    if (normalization - 1.0).abs() > GRID_NORMALIZATION_TOLERANCE {
        return Err(Error::GridTooCoarse {
            normalization,
            expected: 1.0,
        });
    }
    Ok(())
}

/// Wigner function of `rho` at a single phase-space point `beta = x + i y`.
pub fn wigner_at(rho: &DensityMatrix, x: f64, y: f64) -> f64 {
    let radial = Radial::new(rho.elements(), None);
    let (c, _) = radial.coefficients(x.hypot(y));
    combine(&c, y.atan2(x)).0
}

/// Samples `W` on `spec`; fails if the grid does not capture the unit norm.
pub fn wigner_function(rho: &DensityMatrix, spec: &GridSpec) -> Result<WignerGrid> {
    let ev = evaluate(rho, spec, None);
    let integral = quadrature(spec, &ev.plain);
    check_normalization(integral)?;
    Ok(WignerGrid {
        spec: spec.clone(),
        values: ev.plain,
        source_digest: rho.digest(),
        integral,
        imag_residue: ev.imag_residue,
    })
}

fn generator_image(
    rho: &DensityMatrix,
    spec: &GridSpec,
    weight: &(dyn Fn(usize, usize) -> f64 + Sync),
) -> Result<WignerGrid> {
    let ev = evaluate(rho, spec, Some(weight));
    check_normalization(quadrature(spec, &ev.plain))?;
    let values = ev.weighted.expect("weighted series requested");
    Ok(WignerGrid {
        integral: quadrature(spec, &values),
        spec: spec.clone(),
        values,
        source_digest: rho.digest(),
        imag_residue: ev.imag_residue,
    })
}

/// Wigner image of `-[sqrt n, [sqrt n, rho]]`: each term weighted by `-(sqrt n - sqrt m)^2`.
pub fn sqrt_diffusion_generator_wigner(rho: &DensityMatrix, spec: &GridSpec) -> Result<WignerGrid> {
    generator_image(rho, spec, &|n, m| -((n as f64).sqrt() - (m as f64).sqrt()).powi(2))
}

/// Wigner image of `-[n, [n, rho]]`, which equals `d^2 W / d theta^2`.
pub fn phase_diffusion_generator_wigner(rho: &DensityMatrix, spec: &GridSpec) -> Result<WignerGrid> {
    generator_image(rho, spec, &|n, m| -((n as f64) - (m as f64)).powi(2))
}

/// `2/pi`, the vacuum value at the origin.
pub const VACUUM_ORIGIN: f64 = 2.0 / PI;
