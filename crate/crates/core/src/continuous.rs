//! Continuous photodetection feedback.
//!
//! Every detected photon (fraction `eta` of the losses) triggers an atom that
//! puts exactly one photon back, `Phi(rho) = a^+ (a a^+)^{-1/2} rho (a a^+)^{-1/2} a`.
//! Elementwise the master equation reads
//!
//! ```text
//! d rho_{n,m}/dt = (1-eta) gamma sqrt((n+1)(m+1)) rho_{n+1,m+1}
//!                + eta gamma sqrt(n m) rho_{n,m} - gamma/2 (n+m) rho_{n,m}
//! ```
//!
//! so each diagonal band `p = m - n` evolves on its own under an
//! upper-bidiagonal generator. [`ContinuousPropagator`] exponentiates those
//! generators exactly; the closed-form results below serve as oracles.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expm::{apply_real, Bidiagonal};
use crate::fock::{CatParity, DensityMatrix, FockDim};
use crate::special::{binomial, ln_factorial};

/// Largest top-level population accepted by [`evolve_continuous`].
pub const TOP_LEVEL_TOLERANCE: f64 = 1e-8;

/// Cavity decay rate and detector efficiency.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuousParams {
    gamma: f64,
    eta: f64,
}

impl ContinuousParams {
    pub fn new(gamma: f64, eta: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::param("gamma", format!("must be positive, got {gamma}")));
        }
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::param("eta", format!("must lie in [0, 1], got {eta}")));
        }
        Ok(Self { gamma, eta })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }
}

/// Elements `rho_{n, n+p}` sharing the off-diagonal index `p`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagonalBand {
    pub p: usize,
    pub values: Vec<C64>,
}

impl DiagonalBand {
    /// Upper band `p` of `rho` (length `N - p`).
    pub fn extract(rho: &DensityMatrix, p: usize) -> Self {
        let n = rho.dim().size();
        let values = (0..n.saturating_sub(p)).map(|k| rho.get(k, k + p)).collect();
        Self { p, values }
    }
}

/// Generator of band `p`: diagonal and superdiagonal coefficients.
pub fn band_generator(params: ContinuousParams, p: usize, dim: FockDim) -> Bidiagonal {
    let len = dim.size() - p;
    let (g, eta) = (params.gamma, params.eta);
    let diag = (0..len)
        .map(|n| {
            let (n, m) = (n as f64, (n + p) as f64);
            eta * g * (n * m).sqrt() - 0.5 * g * (n + m)
        })
        .collect();
    let sup = (0..len.saturating_sub(1))
        .map(|n| (1.0 - eta) * g * (((n + 1) * (n + p + 1)) as f64).sqrt())
        .collect();
    Bidiagonal::new(diag, sup)
}

/// Exact propagator over a fixed time step, one triangular block per band.
#[derive(Clone, Debug)]
pub struct ContinuousPropagator {
    dim: FockDim,
    blocks: Vec<DMatrix<f64>>,
}

impl ContinuousPropagator {
    pub fn new(params: ContinuousParams, dim: FockDim, t: f64) -> Result<Self> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::param("t", format!("must be non-negative, got {t}")));
        }
        let blocks = (0..dim.size())
            .into_par_iter()
            .map(|p| band_generator(params, p, dim).expm(t))
            .collect();
        Ok(Self { dim, blocks })
    }

    pub fn dim(&self) -> FockDim {
        self.dim
    }

    /// Applies the propagator to an arbitrary operator (not necessarily a state).
    pub fn apply_operator(&self, op: &DMatrix<C64>) -> DMatrix<C64> {
        let size = self.dim.size();
        let mut out = DMatrix::<C64>::zeros(size, size);
        for (p, block) in self.blocks.iter().enumerate() {
            let len = size - p;
            // the generator is symmetric in (n, m): bands +p and -p share it
            let upper = DVector::from_fn(len, |k, _| op[(k, k + p)]);
            let upper = apply_real(block, &upper);
            for k in 0..len {
                out[(k, k + p)] = upper[k];
            }
            if p > 0 {
                let lower = DVector::from_fn(len, |k, _| op[(k + p, k)]);
                let lower = apply_real(block, &lower);
                for k in 0..len {
                    out[(k + p, k)] = lower[k];
                }
            }
        }
        out
    }

    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        if rho.dim() != self.dim {
            return Err(Error::DimMismatch {
                left: rho.dim().size(),
                right: self.dim.size(),
            });
        }
        Ok(DensityMatrix::from_parts(
            self.apply_operator(rho.elements()),
            self.dim,
        ))
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::param("t", format!("must be non-negative, got {t}")));
    }
    Ok(())
}

pub(crate) fn check_top_level(rho: &DensityMatrix, tol: f64) -> Result<()> {
    let n = rho.dim().n_max();
    let top = rho.get(n, n).re;
    if top > tol {
        return Err(Error::Truncation(format!(
            "population {top:e} in |{n}> exceeds {tol:e}"
        )));
    }
    Ok(())
}

/// Evolves `rho0` for time `t` under the feedback master equation.
pub fn evolve_continuous(
    rho0: &DensityMatrix,
    params: ContinuousParams,
    t: f64,
) -> Result<DensityMatrix> {
    check_time(t)?;
    check_top_level(rho0, TOP_LEVEL_TOLERANCE)?;
    ContinuousPropagator::new(params, rho0.dim(), t)?.apply(rho0)
}

fn elementwise_decay(rho0: &DensityMatrix, rate: impl Fn(f64, f64) -> f64) -> DensityMatrix {
    let size = rho0.dim().size();
    let m = DMatrix::from_fn(size, size, |n, k| {
        rho0.get(n, k) * (-rate(n as f64, k as f64)).exp()
    });
    DensityMatrix::from_parts(m, rho0.dim())
}

/// Ideal-detection (`eta = 1`) solution:
/// `rho_nm(t) = exp{-(gamma t/2)(sqrt n - sqrt m)^2} rho_nm(0)`.
pub fn ideal_offdiagonal_decay(rho0: &DensityMatrix, gamma: f64, t: f64) -> Result<DensityMatrix> {
    check_time(t)?;
    let gt = gamma * t;
    Ok(elementwise_decay(rho0, |n, m| {
        0.5 * gt * (n.sqrt() - m.sqrt()).powi(2)
    }))
}

/// Ordinary phase diffusion: `rho_nm(t) = exp{-(gamma t/2)(n - m)^2} rho_nm(0)`.
pub fn standard_phase_diffusion(
    rho0: &DensityMatrix,
    gamma: f64,
    t: f64,
) -> Result<DensityMatrix> {
    check_time(t)?;
    let gt = gamma * t;
    Ok(elementwise_decay(rho0, |n, m| 0.5 * gt * (n - m).powi(2)))
}

/// Fidelity of an even/odd cat under plain vacuum damping (no feedback).
pub fn cat_fidelity_analytic(alpha2: f64, parity: CatParity, gamma: f64, t: f64) -> f64 {
    let gt = gamma * t;
    let s = parity.sign();
    let coherence = 0.5 * (1.0 + (-2.0 * alpha2 * (-(-gt).exp_m1())).exp());
    let shrink = (-alpha2 * (-(-gt / 2.0).exp_m1()).powi(2)).exp();
    let num = 1.0 + s * (-2.0 * alpha2 * (-gt / 2.0).exp()).exp();
    let den = match parity {
        CatParity::Even => 1.0 + (-2.0 * alpha2).exp(),
        CatParity::Odd => -(-2.0 * alpha2).exp_m1(),
    };
    coherence * shrink * (num / den).powi(2)
}

fn check_fock_pair(abs_alpha2: f64, abs_beta2: f64, n: usize, m: usize) -> Result<()> {
    if m <= n {
        return Err(Error::param("m", format!("must exceed n = {n}, got {m}")));
    }
    if (abs_alpha2 + abs_beta2 - 1.0).abs() > 1e-10 {
        return Err(Error::param(
            "abs_alpha2 + abs_beta2",
            format!("must equal 1, got {}", abs_alpha2 + abs_beta2),
        ));
    }
    Ok(())
}

fn fock_fidelity_with(
    abs_alpha2: f64,
    abs_beta2: f64,
    n: usize,
    m: usize,
    params: ContinuousParams,
    t: f64,
    repopulation: f64,
) -> f64 {
    let (g, eta) = (params.gamma, params.eta);
    let k = (1.0 - eta) * g * t;
    let (nf, mf) = (n as f64, m as f64);
    abs_alpha2.powi(2) * (-nf * k).exp()
        + abs_beta2.powi(2) * (-mf * k).exp()
        + 2.0 * abs_alpha2 * abs_beta2 * (-g * t * ((mf + nf) / 2.0 - eta * (nf * mf).sqrt())).exp()
        + abs_alpha2 * abs_beta2 * (-nf * k).exp() * (-(-k).exp_m1()).powi((m - n) as i32) * repopulation
}

/// Fidelity of `alpha|n> + beta|m>` (`m > n`) under the feedback master equation.
///
/// The repopulation of `|n>` from `|m>` follows amplitude damping at rate
/// `(1 - eta) gamma`, weighted by the binomial coefficient `C(m, n)`.
pub fn fock_fidelity_analytic(
    abs_alpha2: f64,
    abs_beta2: f64,
    n: usize,
    m: usize,
    params: ContinuousParams,
    t: f64,
) -> Result<f64> {
    check_fock_pair(abs_alpha2, abs_beta2, n, m)?;
    check_time(t)?;
    Ok(fock_fidelity_with(abs_alpha2, abs_beta2, n, m, params, t, binomial(m, n)))
}

/// Same expression with the repopulation factor `m! n! / (m - n)!`.
///
/// Kept for comparison only: this factor overestimates the repopulation term
/// by `(n!)^2` relative to the master equation and does not match numerical
/// evolution for `n >= 2`.
pub fn fock_fidelity_as_printed(
    abs_alpha2: f64,
    abs_beta2: f64,
    n: usize,
    m: usize,
    params: ContinuousParams,
    t: f64,
) -> Result<f64> {
    check_fock_pair(abs_alpha2, abs_beta2, n, m)?;
    check_time(t)?;
    let factor = (ln_factorial(m) + ln_factorial(n) - ln_factorial(m - n)).exp();
    Ok(fock_fidelity_with(abs_alpha2, abs_beta2, n, m, params, t, factor))
}

/// Exact `<a(t)>` for ideal feedback,
/// `sum_n sqrt(n+1) rho_{n+1,n}(0) exp{-(gamma t/2)(sqrt(n+1) - sqrt n)^2}`.
pub fn mean_amplitude_ideal(rho0: &DensityMatrix, gamma: f64, t: f64) -> Result<C64> {
    check_time(t)?;
    Ok((0..rho0.dim().n_max())
        .map(|n| {
            let (a, b) = (((n + 1) as f64).sqrt(), (n as f64).sqrt());
            rho0.get(n + 1, n) * a * (-0.5 * gamma * t * (a - b).powi(2)).exp()
        })
        .sum())
}

/// Large-photon-number estimate `e^{-gamma t / 8 nbar} <a(0)>`.
pub fn mean_amplitude_semiclassical(a0: C64, n_bar: f64, gamma: f64, t: f64) -> C64 {
    a0 * (-gamma * t / (8.0 * n_bar)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{cat_state, coherent_state, fidelity, mean_amplitude};
    use approx::assert_abs_diff_eq;

    fn odd_cat(alpha2: f64) -> DensityMatrix {
        cat_state(C64::new(alpha2.sqrt(), 0.0), CatParity::Odd, FockDim::DEFAULT)
            .unwrap()
            .to_density_matrix()
    }

    #[test]
    fn params_are_validated() {
        assert!(ContinuousParams::new(0.0, 0.5).is_err());
        assert!(ContinuousParams::new(1.0, 1.5).is_err());
        assert!(ContinuousParams::new(1.0, -0.1).is_err());
        assert!(ContinuousParams::new(1.0, 1.0).is_ok());
    }

    #[test]
    fn negative_time_is_rejected() {
        let p = ContinuousParams::new(1.0, 0.5).unwrap();
        let rho = DensityMatrix::vacuum(FockDim::DEFAULT);
        assert!(matches!(
            evolve_continuous(&rho, p, -0.1),
            Err(Error::InvalidParameter { name: "t", .. })
        ));
    }

    #[test]
    fn ideal_feedback_freezes_diagonal_states() {
        let p = ContinuousParams::new(1.0, 1.0).unwrap();
        let rho = DensityMatrix::diagonal(&[0.1, 0.2, 0.3, 0.4], FockDim::new(7).unwrap()).unwrap();
        let out = evolve_continuous(&rho, p, 5.0).unwrap();
        assert!(out.max_abs_diff(&rho).unwrap() < 1e-12);
    }

    #[test]
    fn no_feedback_single_photon_decays() {
        let p = ContinuousParams::new(1.0, 0.0).unwrap();
        let dim = FockDim::new(6).unwrap();
        for gt in [0.1, 0.7, 3.0] {
            let out = evolve_continuous(&DensityMatrix::fock(1, dim).unwrap(), p, gt).unwrap();
            let e = (-gt).exp();
            assert_abs_diff_eq!(out.get(1, 1).re, e, epsilon = 1e-13);
            assert_abs_diff_eq!(out.get(0, 0).re, 1.0 - e, epsilon = 1e-13);
            assert_abs_diff_eq!(out.trace(), 1.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn top_level_population_is_rejected() {
        let dim = FockDim::new(3).unwrap();
        let rho = DensityMatrix::fock(3, dim).unwrap();
        let p = ContinuousParams::new(1.0, 0.3).unwrap();
        assert!(matches!(evolve_continuous(&rho, p, 0.1), Err(Error::Truncation(_))));
    }

    #[test]
    fn decay_factor_examples() {
        let dim = FockDim::new(5).unwrap();
        let mut m = DMatrix::zeros(6, 6);
        m[(4, 1)] = C64::new(1.0, 0.0);
        m[(2, 2)] = C64::new(1.0, 0.0);
        let rho = DensityMatrix::from_parts(m, dim);
        let ideal = ideal_offdiagonal_decay(&rho, 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(ideal.get(4, 1).re, (-0.5f64).exp(), epsilon = 1e-15);
        assert_eq!(ideal.get(2, 2).re, 1.0);
        let standard = standard_phase_diffusion(&rho, 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(standard.get(4, 1).re, (-4.5f64).exp(), epsilon = 1e-15);
        assert_eq!(ideal_offdiagonal_decay(&rho, 2.0, 0.0).unwrap(), rho);
    }

    #[test]
    fn cat_fidelity_limits() {
        for parity in [CatParity::Even, CatParity::Odd] {
            assert_abs_diff_eq!(cat_fidelity_analytic(5.0, parity, 1.0, 0.0), 1.0, epsilon = 1e-15);
        }
        assert!(cat_fidelity_analytic(5.0, CatParity::Odd, 1.0, 50.0).abs() < 1e-10);
    }

    #[test]
    fn cat_fidelity_matches_master_equation() {
        let rho0 = odd_cat(5.0);
        let p = ContinuousParams::new(1.0, 0.0).unwrap();
        let rho = evolve_continuous(&rho0, p, 0.2).unwrap();
        let num = fidelity(&rho0, &rho).unwrap();
        assert_abs_diff_eq!(num, cat_fidelity_analytic(5.0, CatParity::Odd, 1.0, 0.2), epsilon = 1e-6);
    }

    #[test]
    fn ideal_cat_evolution_matches_elementwise_oracle() {
        let rho0 = odd_cat(5.0);
        let p = ContinuousParams::new(1.0, 1.0).unwrap();
        let rho = evolve_continuous(&rho0, p, 0.2).unwrap();
        let oracle = ideal_offdiagonal_decay(&rho0, 1.0, 0.2).unwrap();
        assert!(rho.max_abs_diff(&oracle).unwrap() < 1e-9);
        // independent sum over |c_n|^2 |c_m|^2 e^{-(gt/2)(sqrt n - sqrt m)^2}
        assert_abs_diff_eq!(fidelity(&rho0, &rho).unwrap(), 0.949_524_047_601_776, epsilon = 1e-9);
    }

    #[test]
    fn fock_fidelity_at_zero_time_is_one() {
        let p = ContinuousParams::new(1.0, 0.4).unwrap();
        let f = fock_fidelity_analytic(1.0 / 3.0, 2.0 / 3.0, 2, 4, p, 0.0).unwrap();
        assert_abs_diff_eq!(f, 1.0, epsilon = 1e-15);
        assert!(fock_fidelity_analytic(0.5, 0.5, 3, 3, p, 0.1).is_err());
        assert!(fock_fidelity_analytic(0.5, 0.6, 1, 3, p, 0.1).is_err());
    }

    #[test]
    fn fock_fidelity_slowest_cross_term() {
        // eta = 1: only the coherence decays, with exponent gamma t (3 - sqrt 8)
        let p = ContinuousParams::new(1.0, 1.0).unwrap();
        let (a2, b2) = (1.0 / 3.0, 2.0 / 3.0);
        for gt in [0.5, 2.0] {
            let f = fock_fidelity_analytic(a2, b2, 2, 4, p, gt).unwrap();
            let expected = a2 * a2 + b2 * b2 + 2.0 * a2 * b2 * (-gt * (3.0 - 8f64.sqrt())).exp();
            assert_abs_diff_eq!(f, expected, epsilon = 1e-15);
        }
    }

    #[test]
    fn printed_repopulation_factor_disagrees_with_evolution() {
        let dim = FockDim::DEFAULT;
        let psi = crate::fock::fock_superposition(
            &[(2, C64::new((1.0f64 / 3.0).sqrt(), 0.0)), (4, C64::new((2.0f64 / 3.0).sqrt(), 0.0))],
            dim,
        )
        .unwrap();
        let rho0 = psi.to_density_matrix();
        let p = ContinuousParams::new(1.0, 0.0).unwrap();
        let numeric = fidelity(&rho0, &evolve_continuous(&rho0, p, 1.0).unwrap()).unwrap();
        let binom = fock_fidelity_analytic(1.0 / 3.0, 2.0 / 3.0, 2, 4, p, 1.0).unwrap();
        let printed = fock_fidelity_as_printed(1.0 / 3.0, 2.0 / 3.0, 2, 4, p, 1.0).unwrap();
        assert_abs_diff_eq!(numeric, binom, epsilon = 1e-12);
        assert!((numeric - printed).abs() > 0.1);
    }

    #[test]
    fn mean_amplitude_examples() {
        let dim = FockDim::DEFAULT;
        let alpha = C64::new(1.5, 0.5);
        let coh = coherent_state(alpha, dim).unwrap().to_density_matrix();
        let a0 = mean_amplitude_ideal(&coh, 1.0, 0.0).unwrap();
        assert!((a0 - mean_amplitude(&coh)).norm() < 1e-15);
        assert!((a0 - alpha).norm() < 1e-8);
        let one = DensityMatrix::fock(1, dim).unwrap();
        for t in [0.0, 1.0, 10.0] {
            assert_eq!(mean_amplitude_ideal(&one, 1.0, t).unwrap(), C64::new(0.0, 0.0));
        }
        // exact sum equals the amplitude of the evolved state
        let p = ContinuousParams::new(1.0, 1.0).unwrap();
        let evolved = evolve_continuous(&coh, p, 0.8).unwrap();
        let direct = mean_amplitude(&evolved);
        assert!((direct - mean_amplitude_ideal(&coh, 1.0, 0.8).unwrap()).norm() < 1e-12);
    }

    #[test]
    fn band_extraction() {
        let rho = odd_cat(3.3);
        let band = DiagonalBand::extract(&rho, 2);
        assert_eq!(band.values.len(), 62);
        assert_eq!(band.values[1], rho.get(1, 3));
    }
}
