//! Truncated Fock-space states of a single cavity mode and the scalar
//! diagnostics (parity, fidelity, mean amplitude) used throughout the crate.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::special::ln_factorials;

/// Largest untruncated tail mass a state constructor accepts.
pub const TAIL_TOLERANCE: f64 = 1e-10;
/// Hermiticity tolerance for validated density matrices.
pub const HERMITIAN_TOLERANCE: f64 = 1e-12;
/// Trace tolerance for validated density matrices.
pub const TRACE_TOLERANCE: f64 = 1e-10;
/// Smallest admissible eigenvalue for validated density matrices.
pub const POSITIVITY_TOLERANCE: f64 = 1e-10;

/// Size of the truncated basis `{|0>, ..., |n_max>}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FockDim {
    n_max: usize,
}

impl FockDim {
    /// Default truncation, adequate for `|alpha|^2 <= 10`.
    pub const DEFAULT: FockDim = FockDim { n_max: 63 };

    pub fn new(n_max: usize) -> Result<Self> {
        if n_max < 1 {
            return Err(Error::param("n_max", "must be at least 1"));
        }
        Ok(Self { n_max })
    }

    #[inline]
    pub fn n_max(self) -> usize {
        self.n_max
    }

    /// Number of basis states, `n_max + 1`.
    #[inline]
    pub fn size(self) -> usize {
        self.n_max + 1
    }

    fn check_index(self, n: usize) -> Result<()> {
        if n > self.n_max {
            Err(Error::Index { n, n_max: self.n_max })
        } else {
            Ok(())
        }
    }
}

impl Default for FockDim {
    fn default() -> Self {
        Self::DEFAULT
    }
}

/// Photon-number parity of a cat state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CatParity {
    Even,
    Odd,
}

impl CatParity {
    /// `+1` for even, `-1` for odd.
    pub fn sign(self) -> f64 {
        match self {
            CatParity::Even => 1.0,
            CatParity::Odd => -1.0,
        }
    }

    /// Squared normalization `N_pm^2 = 1 / (2 (1 +- e^{-2|alpha|^2}))`.
    pub fn norm_sqr(self, alpha2: f64) -> f64 {
        let overlap = (-2.0 * alpha2).exp();
        match self {
            CatParity::Even => 1.0 / (2.0 * (1.0 + overlap)),
            // 1 - e^{-x} loses digits for small x
            CatParity::Odd => 1.0 / (2.0 * -(-2.0 * alpha2).exp_m1()),
        }
    }
}

/// Normalized pure state on the truncated basis.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amplitudes: DVector<C64>,
    dim: FockDim,
}

impl StateVector {
    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    pub fn dim(&self) -> FockDim {
        self.dim
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn mean_photon_number(&self) -> f64 {
        self.amplitudes
            .iter()
            .enumerate()
            .map(|(n, c)| n as f64 * c.norm_sqr())
            .sum()
    }

    pub fn to_density_matrix(&self) -> DensityMatrix {
        let psi = &self.amplitudes;
        DensityMatrix {
            elements: psi * psi.adjoint(),
            dim: self.dim,
        }
    }

    fn from_raw(mut amplitudes: DVector<C64>, dim: FockDim) -> Self {
        let norm = amplitudes.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        amplitudes /= C64::new(norm, 0.0);
        Self { amplitudes, dim }
    }
}

/// Density matrix of one cavity mode on the truncated Fock basis.
///
/// Constructors that accept external data validate Hermiticity, unit trace and
/// positivity. Maps inside the crate produce their outputs directly; their
/// invariants are covered by the tests.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    elements: DMatrix<C64>,
    dim: FockDim,
}

impl DensityMatrix {
    /// Validates and wraps a square matrix.
    pub fn from_matrix(elements: DMatrix<C64>) -> Result<Self> {
        let rho = Self::from_matrix_unchecked(elements)?;
        let herm = rho.hermiticity_residual();
        if herm > HERMITIAN_TOLERANCE {
            return Err(Error::InvalidState(format!(
                "not Hermitian (residual {herm:e})"
            )));
        }
        let tr = rho.trace();
        if (tr - 1.0).abs() > TRACE_TOLERANCE {
            return Err(Error::InvalidState(format!("trace {tr} != 1")));
        }
        let min_eig = rho.min_eigenvalue();
        if min_eig < -POSITIVITY_TOLERANCE {
            return Err(Error::InvalidState(format!(
                "negative eigenvalue {min_eig:e}"
            )));
        }
        Ok(rho)
    }

    /// Wraps a square matrix without checking the density-matrix invariants.
    pub fn from_matrix_unchecked(elements: DMatrix<C64>) -> Result<Self> {
        if elements.nrows() != elements.ncols() {
            return Err(Error::DimMismatch {
                left: elements.nrows(),
                right: elements.ncols(),
            });
        }
        let dim = FockDim::new(elements.nrows().saturating_sub(1))?;
        Ok(Self { elements, dim })
    }

    pub(crate) fn from_parts(elements: DMatrix<C64>, dim: FockDim) -> Self {
        debug_assert_eq!(elements.nrows(), dim.size());
        Self { elements, dim }
    }

    /// `|n><n|`.
    pub fn fock(n: usize, dim: FockDim) -> Result<Self> {
        dim.check_index(n)?;
        let mut m = DMatrix::zeros(dim.size(), dim.size());
        m[(n, n)] = C64::new(1.0, 0.0);
        Ok(Self::from_parts(m, dim))
    }

    pub fn vacuum(dim: FockDim) -> Self {
        Self::fock(0, dim).expect("vacuum is always in the basis")
    }

    /// Diagonal mixture `sum_n p_n |n><n|`.
    pub fn diagonal(populations: &[f64], dim: FockDim) -> Result<Self> {
        if populations.len() > dim.size() {
            return Err(Error::Index {
                n: populations.len() - 1,
                n_max: dim.n_max(),
            });
        }
        let mut m = DMatrix::zeros(dim.size(), dim.size());
        for (n, &p) in populations.iter().enumerate() {
            m[(n, n)] = C64::new(p, 0.0);
        }
        Self::from_matrix(m)
    }

    pub fn dim(&self) -> FockDim {
        self.dim
    }

    pub fn elements(&self) -> &DMatrix<C64> {
        &self.elements
    }

    pub fn into_elements(self) -> DMatrix<C64> {
        self.elements
    }

    #[inline]
    pub fn get(&self, n: usize, m: usize) -> C64 {
        self.elements[(n, m)]
    }

    pub fn trace(&self) -> f64 {
        self.elements.diagonal().iter().map(|c| c.re).sum()
    }

    pub fn populations(&self) -> Vec<f64> {
        self.elements.diagonal().iter().map(|c| c.re).collect()
    }

    pub fn mean_photon_number(&self) -> f64 {
        self.populations()
            .iter()
            .enumerate()
            .map(|(n, p)| n as f64 * p)
            .sum()
    }

    /// `max |rho - rho^dagger|` over elements.
    pub fn hermiticity_residual(&self) -> f64 {
        let n = self.elements.nrows();
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in i..n {
                let d = (self.elements[(i, j)] - self.elements[(j, i)].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev = hermitian_eigenvalues(&self.elements);
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    /// Cheap positivity test: `rho + tol * 1` admits a Cholesky factorization.
    pub fn is_positive_within(&self, tol: f64) -> bool {
        let n = self.elements.nrows();
        let shifted = (&self.elements + self.elements.adjoint()) * C64::new(0.5, 0.0)
            + DMatrix::<C64>::identity(n, n) * C64::new(tol, 0.0);
        Cholesky::new(shifted).is_some()
    }

    /// Trace distance `1/2 ||a - b||_1`.
    pub fn trace_distance(&self, other: &DensityMatrix) -> Result<f64> {
        check_same_dim(self, other)?;
        let diff = &self.elements - &other.elements;
        Ok(0.5 * hermitian_eigenvalues(&diff).iter().map(|x| x.abs()).sum::<f64>())
    }

    /// Largest elementwise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &DensityMatrix) -> Result<f64> {
        check_same_dim(self, other)?;
        Ok(self
            .elements
            .iter()
            .zip(other.elements.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// Phase rotation `e^{i phi n} rho e^{-i phi n}`.
    pub fn rotated(&self, phi: f64) -> DensityMatrix {
        let size = self.dim.size();
        let m = DMatrix::from_fn(size, size, |n, k| {
            self.elements[(n, k)] * C64::from_polar(1.0, phi * (n as f64 - k as f64))
        });
        Self::from_parts(m, self.dim)
    }

    /// Short hex digest of the matrix elements; used to tag outputs.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.dim.size() as u64).to_le_bytes());
        for c in self.elements.iter() {
            h.update(c.re.to_le_bytes());
            h.update(c.im.to_le_bytes());
        }
        h.finalize()
            .iter()
            .take(8)
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// Eigenvalues of the Hermitian part of `m`.
///
/// Entries far below the largest one are flushed to zero first, since
/// eigenvalues near the underflow range make the QR iteration return NaN.
fn hermitian_eigenvalues(m: &DMatrix<C64>) -> Vec<f64> {
    let mut herm = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let floor = herm.iter().map(|c| c.norm()).fold(0.0, f64::max) * 1e-60;
    herm.iter_mut().filter(|c| c.norm() < floor).for_each(|c| *c = C64::new(0.0, 0.0));
    SymmetricEigen::new(herm).eigenvalues.iter().copied().collect()
}

fn check_same_dim(a: &DensityMatrix, b: &DensityMatrix) -> Result<()> {
    if a.dim != b.dim {
        return Err(Error::DimMismatch {
            left: a.dim.size(),
            right: b.dim.size(),
        });
    }
    Ok(())
}

/// Untruncated coherent-state amplitudes `e^{-|a|^2/2} a^n / sqrt(n!)` for
/// `n <= n_max`, plus the Poisson tail mass beyond `n_max`.
fn coherent_amplitudes(alpha: C64, n_max: usize) -> (Vec<C64>, f64) {
    let alpha2 = alpha.norm_sqr();
    if alpha2 == 0.0 {
        let mut v = vec![C64::new(0.0, 0.0); n_max + 1];
        v[0] = C64::new(1.0, 0.0);
        return (v, 0.0);
    }
    let ln_abs = alpha.norm().ln();
    let phase = alpha.arg();
    // tail terms beyond n_max are needed for the truncation check
    let tail_len = n_max + 1 + 64 + (4.0 * alpha2) as usize;
    let lnf = ln_factorials(tail_len + 1);
    let ln_weight = |n: usize| -alpha2 + 2.0 * n as f64 * ln_abs - lnf[n];
    let amps = (0..=n_max)
        .map(|n| C64::from_polar((0.5 * ln_weight(n)).exp(), phase * n as f64))
        .collect();
    let tail = (n_max + 1..=tail_len).map(|n| ln_weight(n).exp()).sum();
    (amps, tail)
}

fn check_truncation(alpha2: f64, tail: f64, dim: FockDim) -> Result<()> {
    if alpha2 > dim.n_max() as f64 / 4.0 {
        return Err(Error::Truncation(format!(
            "|alpha|^2 = {alpha2} exceeds n_max/4 = {}",
            dim.n_max() as f64 / 4.0
        )));
    }
    if tail > TAIL_TOLERANCE {
        return Err(Error::Truncation(format!(
            "tail mass {tail:e} beyond n_max = {}",
            dim.n_max()
        )));
    }
    Ok(())
}

/// Coherent state `|alpha>`, renormalized over the truncated basis.
pub fn coherent_state(alpha: C64, dim: FockDim) -> Result<StateVector> {
    let (amps, tail) = coherent_amplitudes(alpha, dim.n_max());
    check_truncation(alpha.norm_sqr(), tail, dim)?;
    Ok(StateVector::from_raw(DVector::from_vec(amps), dim))
}

/// Schrödinger cat `N_pm (|alpha> +- |-alpha>)`.
///
/// Amplitudes of the suppressed parity are exactly zero.
pub fn cat_state(alpha: C64, parity: CatParity, dim: FockDim) -> Result<StateVector> {
    if parity == CatParity::Odd && alpha.norm() < 1e-8 {
        return Err(Error::DegenerateCat(alpha.norm()));
    }
    let (amps, tail) = coherent_amplitudes(alpha, dim.n_max());
    check_truncation(alpha.norm_sqr(), tail, dim)?;
    let norm = parity.norm_sqr(alpha.norm_sqr()).sqrt();
    let keep_even = parity == CatParity::Even;
    let v = amps
        .into_iter()
        .enumerate()
        .map(|(n, c)| {
            if (n % 2 == 0) == keep_even {
                c * (2.0 * norm)
            } else {
                C64::new(0.0, 0.0)
            }
        })
        .collect();
    Ok(StateVector::from_raw(DVector::from_vec(v), dim))
}

/// Sparse superposition `sum_j c_j |n_j>`; repeated indices add.
pub fn fock_superposition(terms: &[(usize, C64)], dim: FockDim) -> Result<StateVector> {
    let mut v = DVector::from_element(dim.size(), C64::new(0.0, 0.0));
    for &(n, c) in terms {
        dim.check_index(n)?;
        v[n] += c;
    }
    let norm: f64 = v.iter().map(|c| c.norm_sqr()).sum();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidState(format!(
            "superposition weights sum to {norm}, not 1"
        )));
    }
    Ok(StateVector { amplitudes: v, dim })
}

/// `<P> = sum_n (-1)^n rho_nn`.
pub fn parity_expectation(rho: &DensityMatrix) -> f64 {
    rho.elements
        .diagonal()
        .iter()
        .enumerate()
        .map(|(n, c)| if n % 2 == 0 { c.re } else { -c.re })
        .sum()
}

/// `Tr{rho0 rho_t} = sum_{n,m} conj(rho0_nm) rho_t_nm`.
pub fn fidelity(rho0: &DensityMatrix, rho_t: &DensityMatrix) -> Result<f64> {
    check_same_dim(rho0, rho_t)?;
    Ok(overlap(&rho0.elements, &rho_t.elements).re)
}

/// `sum conj(a_nm) b_nm` for raw operators.
pub(crate) fn overlap(a: &DMatrix<C64>, b: &DMatrix<C64>) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// `<a> = sum_n sqrt(n+1) rho_{n+1,n}`.
pub fn mean_amplitude(rho: &DensityMatrix) -> C64 {
    (0..rho.dim.n_max())
        .map(|n| rho.elements[(n + 1, n)] * ((n + 1) as f64).sqrt())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn dim(n: usize) -> FockDim {
        FockDim::new(n).unwrap()
    }

    #[test]
    fn fock_dim_rejects_zero() {
        assert!(FockDim::new(0).is_err());
        assert_eq!(FockDim::new(1).unwrap().size(), 2);
    }

    #[test]
    fn coherent_zero_is_vacuum() {
        let s = coherent_state(C64::new(0.0, 0.0), FockDim::DEFAULT).unwrap();
        assert_eq!(s.amplitudes()[0], C64::new(1.0, 0.0));
        assert!(s.amplitudes().iter().skip(1).all(|c| *c == C64::new(0.0, 0.0)));
    }

    #[test]
    fn coherent_mean_photon_number() {
        let s = coherent_state(C64::new(5f64.sqrt(), 0.0), FockDim::DEFAULT).unwrap();
        // direct summation over the amplitudes
        let mean: f64 = s
            .amplitudes()
            .iter()
            .enumerate()
            .map(|(n, c)| n as f64 * c.norm_sqr())
            .sum();
        assert_abs_diff_eq!(mean, 5.0, epsilon = 1e-8);
        let s = coherent_state(C64::new(3.3f64.sqrt(), 0.0), FockDim::DEFAULT).unwrap();
        assert_abs_diff_eq!(s.norm_sqr(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn coherent_truncation_fails_loudly() {
        let err = coherent_state(C64::new(3.0, 0.0), dim(20)).unwrap_err();
        assert!(matches!(err, Error::Truncation(_)));
        // within n_max/4 but tail too heavy for a tiny basis
        let err = coherent_state(C64::new(1.0, 0.0), dim(4)).unwrap_err();
        assert!(matches!(err, Error::Truncation(_)));
    }

    #[test]
    fn odd_cat_has_only_odd_amplitudes() {
        let s = cat_state(C64::new(5f64.sqrt(), 0.0), CatParity::Odd, FockDim::DEFAULT).unwrap();
        for (n, c) in s.amplitudes().iter().enumerate() {
            if n % 2 == 0 {
                assert_eq!(*c, C64::new(0.0, 0.0));
            }
        }
        let rho = s.to_density_matrix();
        assert_abs_diff_eq!(parity_expectation(&rho), -1.0, epsilon = 1e-12);
    }

    #[test]
    fn even_cat_mean_photon_number_matches_direct_sum() {
        let a2: f64 = 3.3;
        let s = cat_state(C64::new(a2.sqrt(), 0.0), CatParity::Even, FockDim::DEFAULT).unwrap();
        // brute-force: c_n ∝ a^n/sqrt(n!) on even n, weights summed independently
        let mut num = 0.0;
        let mut den = 0.0;
        let mut w = (-a2).exp();
        for n in 0..200usize {
            if n > 0 {
                w *= a2 / n as f64;
            }
            if n % 2 == 0 {
                num += n as f64 * w;
                den += w;
            }
        }
        assert_abs_diff_eq!(s.mean_photon_number(), num / den, epsilon = 1e-10);
        assert_abs_diff_eq!(s.mean_photon_number(), a2 * a2.tanh(), epsilon = 1e-10);
    }

    #[test]
    fn cat_normalization_constant_is_exact() {
        for a2 in [0.5, 3.3, 5.0, 10.0] {
            for parity in [CatParity::Even, CatParity::Odd] {
                let (amps, _) = coherent_amplitudes(C64::new(f64::sqrt(a2), 0.0), 63);
                let nsq = parity.norm_sqr(a2);
                let norm: f64 = amps
                    .iter()
                    .enumerate()
                    .map(|(n, c)| {
                        let f = 1.0 + parity.sign() * if n % 2 == 0 { 1.0 } else { -1.0 };
                        nsq * f * f * c.norm_sqr()
                    })
                    .sum();
                assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn degenerate_odd_cat_is_rejected() {
        let err = cat_state(C64::new(1e-9, 0.0), CatParity::Odd, FockDim::DEFAULT).unwrap_err();
        assert!(matches!(err, Error::DegenerateCat(_)));
        let even = cat_state(C64::new(0.0, 0.0), CatParity::Even, FockDim::DEFAULT).unwrap();
        assert_abs_diff_eq!(even.amplitudes()[0].re, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn fock_superpositions() {
        let s = fock_superposition(
            &[(2, C64::new(1.0 / 3f64.sqrt(), 0.0)), (4, C64::new((2.0f64 / 3.0).sqrt(), 0.0))],
            FockDim::DEFAULT,
        )
        .unwrap();
        assert_abs_diff_eq!(s.mean_photon_number(), 2.0 / 3.0 + 8.0 / 3.0, epsilon = 1e-14);

        let s = fock_superposition(
            &[(1, C64::new(0.5f64.sqrt(), 0.0)), (3, C64::new(0.0, 0.5f64.sqrt()))],
            FockDim::DEFAULT,
        )
        .unwrap();
        assert_abs_diff_eq!(s.norm_sqr(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s.mean_photon_number(), 2.0, epsilon = 1e-14);

        let vac = fock_superposition(&[(0, C64::new(1.0, 0.0))], dim(3)).unwrap();
        assert_eq!(vac.to_density_matrix(), DensityMatrix::vacuum(dim(3)));

        let err = fock_superposition(&[(9, C64::new(1.0, 0.0))], dim(3)).unwrap_err();
        assert_eq!(err, Error::Index { n: 9, n_max: 3 });
        assert!(fock_superposition(&[(1, C64::new(0.5, 0.0))], dim(3)).is_err());
    }

    #[test]
    fn parity_examples() {
        let d = dim(5);
        assert_eq!(parity_expectation(&DensityMatrix::vacuum(d)), 1.0);
        let mix = DensityMatrix::diagonal(&[0.5, 0.5], d).unwrap();
        assert_eq!(parity_expectation(&mix), 0.0);
    }

    #[test]
    fn fidelity_examples() {
        let d = FockDim::DEFAULT;
        let cat = cat_state(C64::new(5f64.sqrt(), 0.0), CatParity::Odd, d)
            .unwrap()
            .to_density_matrix();
        assert_abs_diff_eq!(fidelity(&cat, &cat).unwrap(), 1.0, epsilon = 1e-12);
        assert_eq!(fidelity(&cat, &DensityMatrix::vacuum(d)).unwrap(), 0.0);
        let one = DensityMatrix::fock(1, d).unwrap();
        assert_eq!(fidelity(&DensityMatrix::vacuum(d), &one).unwrap(), 0.0);
        let err = fidelity(&cat, &DensityMatrix::vacuum(dim(4))).unwrap_err();
        assert!(matches!(err, Error::DimMismatch { .. }));
    }

    #[test]
    fn mean_amplitude_examples() {
        let d = FockDim::DEFAULT;
        let alpha = C64::new(1.2, -0.7);
        let coh = coherent_state(alpha, d).unwrap().to_density_matrix();
        assert!((mean_amplitude(&coh) - alpha).norm() < 1e-8);
        let cat = cat_state(alpha, CatParity::Even, d).unwrap().to_density_matrix();
        assert!(mean_amplitude(&cat).norm() < 1e-15);
        assert_eq!(mean_amplitude(&DensityMatrix::fock(1, d).unwrap()), C64::new(0.0, 0.0));
    }

    #[test]
    fn eigenvalues_survive_tiny_entries() {
        let mut m = DMatrix::<C64>::zeros(6, 6);
        m[(1, 1)] = C64::new(0.6, 0.0);
        m[(3, 3)] = C64::new(0.4, 0.0);
        m[(1, 3)] = C64::new(0.2, 1e-180);
        m[(3, 1)] = C64::new(0.2, -1e-180);
        m[(5, 5)] = C64::new(2e-152, 0.0);
        m[(4, 4)] = C64::new(5e-152, 0.0);
        m[(2, 4)] = C64::new(1e-140, 0.0);
        m[(4, 2)] = C64::new(1e-140, 0.0);
        m[(3, 5)] = C64::new(3e-179, 0.0);
        m[(5, 3)] = C64::new(3e-179, 0.0);
        let rho = DensityMatrix::from_matrix_unchecked(m).unwrap();
        let ev = rho.eigenvalues();
        assert!(ev.iter().all(|x| x.is_finite()));
        assert!(rho.min_eigenvalue() > -1e-15);
    }

    #[test]
    fn validation_rejects_bad_matrices() {
        let mut m = DMatrix::from_element(2, 2, C64::new(0.0, 0.0));
        m[(0, 0)] = C64::new(0.7, 0.0);
        assert!(DensityMatrix::from_matrix(m.clone()).is_err());
        m[(1, 1)] = C64::new(0.3, 0.0);
        assert!(DensityMatrix::from_matrix(m.clone()).is_ok());
        m[(0, 1)] = C64::new(0.6, 0.0);
        assert!(DensityMatrix::from_matrix(m.clone()).is_err());
        m[(1, 0)] = C64::new(0.6, 0.0);
        // Hermitian, trace one, but 0.7*0.3 < 0.36
        assert!(matches!(DensityMatrix::from_matrix(m), Err(Error::InvalidState(_))));
    }

    fn random_state(seed: u64, n: usize) -> DensityMatrix {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let g = DMatrix::<C64>::from_fn(n, n, |_, _| {
            C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let m = &g * g.adjoint();
        let tr = m.trace();
        DensityMatrix::from_matrix(m / tr).unwrap()
    }

    proptest! {
        #[test]
        fn parity_equals_projector_difference(seed in any::<u64>(), n in 2usize..32) {
            let rho = random_state(seed, n);
            let even: f64 = (0..n).step_by(2).map(|k| rho.get(k, k).re).sum();
            let odd: f64 = (1..n).step_by(2).map(|k| rho.get(k, k).re).sum();
            prop_assert!((parity_expectation(&rho) - (even - odd)).abs() < 1e-14);
        }

        #[test]
        fn fidelity_is_symmetric_and_bounded(a in any::<u64>(), b in any::<u64>(), n in 2usize..24) {
            let r1 = random_state(a, n);
            let r2 = random_state(b, n);
            let f12 = fidelity(&r1, &r2).unwrap();
            let f21 = fidelity(&r2, &r1).unwrap();
            prop_assert!((f12 - f21).abs() < 1e-12);
            prop_assert!(f12 > -1e-10 && f12 < 1.0 + 1e-10);
            prop_assert!(overlap(r1.elements(), r2.elements()).im.abs() < 1e-12);
        }
    }
}
