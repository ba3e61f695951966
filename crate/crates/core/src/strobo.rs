//! Stroboscopic feedback for microwave cavities.
//!
//! Every interval `T` a dispersive probe atom measures the cavity parity.
//! A detection in `g` (even field) triggers a resonant feedback atom that
//! can deposit one photon and restore odd parity. Between probes the field
//! decays in a vacuum bath. One period is `Phi = Phi_diss . Phi_fb`.
//!
//! The map couples only elements with the same off-diagonal index `p`, so
//! each band evolves under its own real matrix `A_p`.

use nalgebra::{Cholesky, DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::fock::{DensityMatrix, FockDim, TAIL_TOLERANCE};
use crate::special::DampingWeights;

/// Eigenvalues closer than this to 1 count as fixed points of `A_0`.
pub const FIXED_POINT_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StroboParams {
    eta: f64,
    mu: f64,
    gamma_t: f64,
}

impl StroboParams {
    /// `eta`: probe detector efficiency, `mu = Omega tau`: feedback Rabi angle,
    /// `gamma_t`: decay rate times the probe interval.
    pub fn new(eta: f64, mu: f64, gamma_t: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::param("eta", format!("must lie in [0, 1], got {eta}")));
        }
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(Error::param("mu", format!("must be non-negative, got {mu}")));
        }
        if !(gamma_t >= 0.0 && gamma_t.is_finite()) {
            return Err(Error::param("gamma_T", format!("must be non-negative, got {gamma_t}")));
        }
        Ok(Self { eta, mu, gamma_t })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn gamma_t(&self) -> f64 {
        self.gamma_t
    }
}

/// Field conditioned on the probe outcome. `rho_e` and `rho_g` are the odd
/// and even projections, left unnormalized so that their traces are `p_e`
/// and `p_g`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionalSplit {
    pub rho_e: DensityMatrix,
    pub rho_g: DensityMatrix,
    pub p_e: f64,
    pub p_g: f64,
}

pub fn conditional_split(rho: &DensityMatrix) -> ConditionalSplit {
    let dim = rho.dim();
    let size = dim.size();
    let el = rho.elements();
    let project = |odd: usize| {
        DMatrix::from_fn(size, size, |n, m| {
            if n % 2 == odd && m % 2 == odd {
                el[(n, m)]
            } else {
                C64::new(0.0, 0.0)
            }
        })
    };
    let rho_e = DensityMatrix::from_parts(project(1), dim);
    let rho_g = DensityMatrix::from_parts(project(0), dim);
    let (p_e, p_g) = (rho_e.trace(), rho_g.trace());
    ConditionalSplit { rho_e, rho_g, p_e, p_g }
}

/// `cos(mu sqrt(aa^dagger))` on level `n`; the top level cannot emit and is left alone.
fn stay_amplitude(mu: f64, n: usize, n_max: usize) -> f64 {
    if n >= n_max {
        1.0
    } else {
        (mu * ((n + 1) as f64).sqrt()).cos()
    }
}

/// Amplitude for arriving in level `n` from `n - 1`.
fn arrive_amplitude(mu: f64, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        (mu * (n as f64).sqrt()).sin()
    }
}

fn check_top(rho: &DensityMatrix) -> Result<()> {
    let n = rho.dim().n_max();
    let top = rho.get(n, n).re;
    if top > TAIL_TOLERANCE {
        return Err(Error::Truncation(format!(
            "feedback atom would push population {top:e} out of |{n}>"
        )));
    }
    Ok(())
}

fn atom_map_unchecked(rho: &DensityMatrix, mu: f64) -> DensityMatrix {
    let dim = rho.dim();
    let n_max = dim.n_max();
    let el = rho.elements();
    let out = DMatrix::from_fn(dim.size(), dim.size(), |n, m| {
        let mut v = el[(n, m)] * (stay_amplitude(mu, n, n_max) * stay_amplitude(mu, m, n_max));
        if n > 0 && m > 0 {
            v += el[(n - 1, m - 1)] * (arrive_amplitude(mu, n) * arrive_amplitude(mu, m));
        }
        v
    });
    DensityMatrix::from_parts(out, dim)
}

/// Resonant passage of a ground-state feedback atom, traced over the atom:
/// `cos(mu sqrt(aa+)) rho cos(mu sqrt(aa+)) + a+ sin(..)/sqrt(aa+) rho sin(..)/sqrt(aa+) a`.
pub fn feedback_atom_map(rho: &DensityMatrix, mu: f64) -> Result<DensityMatrix> {
    check_top(rho)?;
    Ok(atom_map_unchecked(rho, mu))
}

/// Probe measurement followed by conditional feedback; undetected probes
/// (probability `1 - eta`) leave the parity-projected state without feedback.
pub fn feedback_superop(rho: &DensityMatrix, params: StroboParams) -> Result<DensityMatrix> {
    let split = conditional_split(rho);
    let fed = feedback_atom_map(&split.rho_g, params.mu)?;
    let eta = params.eta;
    let out = split.rho_e.elements() * C64::from(eta)
        + fed.elements() * C64::from(eta)
        + (split.rho_e.elements() + split.rho_g.elements()) * C64::from(1.0 - eta);
    Ok(DensityMatrix::from_parts(out, rho.dim()))
}

fn dissipate(rho: &DensityMatrix, weights: &DampingWeights) -> DensityMatrix {
    let dim = rho.dim();
    let size = dim.size();
    let el = rho.elements();
    let out = DMatrix::from_fn(size, size, |n, m| {
        let top = n.max(m);
        (0..size - top)
            .map(|k| el[(n + k, m + k)] * (weights.get(n, k) * weights.get(m, k)))
            .sum()
    });
    DensityMatrix::from_parts(out, dim)
}

/// Exact vacuum-bath decay over the interval: `sum_k A_k rho A_k^dagger`.
pub fn dissipation_map(rho: &DensityMatrix, gamma_t: f64) -> Result<DensityMatrix> {
    if !(gamma_t >= 0.0 && gamma_t.is_finite()) {
        return Err(Error::param("gamma_T", format!("must be non-negative, got {gamma_t}")));
    }
    Ok(dissipate(rho, &DampingWeights::new(gamma_t, rho.dim().n_max())))
}

/// One full period: feedback, then dissipation.
pub fn strobo_step(rho: &DensityMatrix, params: StroboParams) -> Result<DensityMatrix> {
    StroboMap::new(params, rho.dim()).step(rho)
}

/// One period with the damping weights cached for a fixed basis.
#[derive(Clone, Debug)]
pub struct StroboMap {
    params: StroboParams,
    dim: FockDim,
    weights: DampingWeights,
}

impl StroboMap {
    pub fn new(params: StroboParams, dim: FockDim) -> Self {
        Self {
            params,
            dim,
            weights: DampingWeights::new(params.gamma_t, dim.n_max()),
        }
    }

    pub fn params(&self) -> StroboParams {
        self.params
    }

    pub fn step(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        if rho.dim() != self.dim {
            return Err(Error::DimMismatch {
                left: rho.dim().size(),
                right: self.dim.size(),
            });
        }
        let fed = feedback_superop(rho, self.params)?;
        Ok(dissipate(&fed, &self.weights))
    }
}

/// Real matrix `A_p` acting on the band `V_p[n] = rho_{n, n+p}`.
#[derive(Clone, Debug, PartialEq)]
pub struct BandMatrix {
    p: usize,
    entries: DMatrix<f64>,
}

impl BandMatrix {
    pub fn p(&self) -> usize {
        self.p
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn apply(&self, band: &DVector<C64>) -> DVector<C64> {
        crate::expm::apply_real(&self.entries, band)
    }

    pub fn eigenvalues(&self) -> Vec<C64> {
        if self.entries.is_empty() {
            return Vec::new();
        }
        self.entries.complex_eigenvalues().iter().copied().collect()
    }

    pub fn spectral_radius(&self) -> f64 {
        self.eigenvalues().iter().map(|l| l.norm()).fold(0.0, f64::max)
    }
}

/// Assembles `A_p` from the element-wise form of one period.
///
/// Bands with odd `p` mix parities and are annihilated by the probe
/// measurement, so their matrix is zero.
pub fn build_band_matrix(p: usize, params: StroboParams, dim: FockDim) -> Result<BandMatrix> {
    let weights = DampingWeights::new(params.gamma_t, dim.n_max());
    band_matrix_with(p, params, dim, &weights)
}

fn band_matrix_with(
    p: usize,
    params: StroboParams,
    dim: FockDim,
    c: &DampingWeights,
) -> Result<BandMatrix> {
    let n_max = dim.n_max();
    if p > n_max {
        return Err(Error::Index { n: p, n_max });
    }
    let len = dim.size() - p;
    let mut a = DMatrix::<f64>::zeros(len, len);
    if p % 2 == 1 {
        return Ok(BandMatrix { p, entries: a });
    }
    let (eta, mu) = (params.eta, params.mu);
    for n in 0..len {
        for j in n..len {
            let k = j - n;
            let kept = if j % 2 == 1 {
                1.0
            } else {
                1.0 - eta
                    + eta * stay_amplitude(mu, j, n_max) * stay_amplitude(mu, j + p, n_max)
            };
            a[(n, j)] += c.get(n, k) * c.get(n + p, k) * kept;
        }
        // emission from an even source j into j + 1, then j + 1 - n losses
        for j in n.saturating_sub(1)..len.saturating_sub(1) {
            if j % 2 == 1 {
                continue;
            }
            let k = j + 1 - n;
            a[(n, j)] += eta
                * c.get(n, k)
                * c.get(n + p, k)
                * arrive_amplitude(mu, j + 1)
                * arrive_amplitude(mu, j + p + 1);
        }
    }
    Ok(BandMatrix { p, entries: a })
}

/// All band matrices `A_0 .. A_{n_max}`.
pub fn build_all_bands(params: StroboParams, dim: FockDim) -> Result<Vec<BandMatrix>> {
    let weights = DampingWeights::new(params.gamma_t, dim.n_max());
    (0..dim.size())
        .map(|p| band_matrix_with(p, params, dim, &weights))
        .collect()
}

/// Evolves `rho` by `steps` periods through the band matrices.
pub fn propagate_bands(
    rho: &DensityMatrix,
    bands: &[BandMatrix],
    steps: usize,
) -> Result<DensityMatrix> {
    let dim = rho.dim();
    let size = dim.size();
    if bands.len() != size {
        return Err(Error::DimMismatch { left: bands.len(), right: size });
    }
    let el = rho.elements();
    let mut out = DMatrix::<C64>::zeros(size, size);
    for band in bands {
        let p = band.p;
        let len = size - p;
        let mut upper = DVector::from_fn(len, |n, _| el[(n, n + p)]);
        let mut lower = DVector::from_fn(len, |n, _| el[(n + p, n)]);
        for _ in 0..steps {
            upper = band.apply(&upper);
            if p > 0 {
                lower = band.apply(&lower);
            }
        }
        for n in 0..len {
            out[(n, n + p)] = upper[n];
            out[(n + p, n)] = if p > 0 { lower[n] } else { upper[n] };
        }
    }
    Ok(DensityMatrix::from_parts(out, dim))
}

/// Fixed point of one period: the normalized eigenvector of `A_0` at eigenvalue 1.
pub fn stationary_state(params: StroboParams, dim: FockDim) -> Result<DensityMatrix> {
    if params.gamma_t <= 0.0 {
        return Err(Error::param("gamma_T", "must be positive for a unique stationary state"));
    }
    let a0 = build_band_matrix(0, params, dim)?;
    let count = a0
        .eigenvalues()
        .iter()
        .filter(|l| (*l - 1.0).norm() < FIXED_POINT_TOLERANCE)
        .count();
    if count != 1 {
        return Err(Error::NonUniqueFixedPoint { count, tol: FIXED_POINT_TOLERANCE });
    }
    let size = dim.size();
    let mut system = a0.entries - DMatrix::<f64>::identity(size, size);
    system.row_mut(size - 1).fill(1.0);
    let mut rhs = DVector::<f64>::zeros(size);
    rhs[size - 1] = 1.0;
    let pops = system
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Degenerate("fixed-point system is singular".into()))?;
    DensityMatrix::diagonal(pops.as_slice(), dim)
}

/// Closed-form one-photon weight of the stationary mixture of `|0>` and `|1>`.
pub fn stationary_population(params: StroboParams) -> f64 {
    let pump = params.eta * params.mu.sin().powi(2);
    let loss = params.gamma_t.exp_m1();
    if pump + loss == 0.0 {
        return 0.0;
    }
    pump / (loss + pump)
}

/// Probability of two successive `e` detections a time `T` apart without
/// feedback, starting from the odd cat prepared by the first detection.
pub fn p_ee_analytic(alpha2: f64, gamma_t_total: f64) -> Result<f64> {
    if !(alpha2 > 0.0) {
        return Err(Error::param("alpha2", format!("must be positive, got {alpha2}")));
    }
    if !(gamma_t_total >= 0.0) {
        return Err(Error::param("gamma_T", format!("must be non-negative, got {gamma_t_total}")));
    }
    let kept = (-gamma_t_total).exp();
    let lost = -(-gamma_t_total).exp_m1();
    let num = (-2.0 * alpha2 * kept).exp() - (-2.0 * alpha2 * lost).exp();
    let den = -(-2.0 * alpha2).exp_m1();
    Ok(0.5 * (1.0 - num / den))
}

/// Rabi angle that maximizes photon release at mean photon number `n_bar`:
/// `mu = pi (m + 1/2) / sqrt(n_bar)`.
pub fn resonance_angle(n_bar: f64, m: usize) -> Result<f64> {
    if !(n_bar > 0.0) {
        return Err(Error::param("n_bar", format!("must be positive, got {n_bar}")));
    }
    Ok(PI * (m as f64 + 0.5) / n_bar.sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceRecord {
    pub step: usize,
    pub p_e: f64,
    pub p_g: f64,
    pub rho_digest: String,
}

/// Probe statistics at `t = nT` for `n = 0..=steps`.
#[derive(Clone, Debug)]
pub struct SequenceTrace {
    pub records: Vec<SequenceRecord>,
    pub final_state: DensityMatrix,
}

fn record(step: usize, rho: &DensityMatrix) -> SequenceRecord {
    let split = conditional_split(rho);
    SequenceRecord {
        step,
        p_e: split.p_e,
        p_g: split.p_g,
        rho_digest: rho.digest(),
    }
}

pub fn run_sequence(rho0: &DensityMatrix, params: StroboParams, steps: usize) -> Result<SequenceTrace> {
    run_sequence_with(rho0, params, steps, |_, _| Ok(()))
}

/// Like [`run_sequence`], calling `visit(n, rho(nT))` on every recorded state.
pub fn run_sequence_with<F>(
    rho0: &DensityMatrix,
    params: StroboParams,
    steps: usize,
    mut visit: F,
) -> Result<SequenceTrace>
where
    F: FnMut(usize, &DensityMatrix) -> Result<()>,
{
    if steps == 0 {
        return Err(Error::param("steps", "must be at least 1"));
    }
    let map = StroboMap::new(params, rho0.dim());
    let mut records = Vec::with_capacity(steps + 1);
    let mut rho = rho0.clone();
    for step in 0..steps {
        visit(step, &rho)?;
        records.push(record(step, &rho));
        rho = map.step(&rho)?;
    }
    visit(steps, &rho)?;
    records.push(record(steps, &rho));
    Ok(SequenceTrace { records, final_state: rho })
}

/// Positive semidefinite up to `tol`, tested by a Cholesky factorization of `rho + tol I`.
pub fn is_positive_shifted(rho: &DensityMatrix, tol: f64) -> bool {
    let size = rho.dim().size();
    let shifted = rho.elements() + DMatrix::<C64>::identity(size, size) * C64::from(tol);
    Cholesky::new(shifted).is_some()
}
