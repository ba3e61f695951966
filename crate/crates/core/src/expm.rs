//! Matrix exponential of upper-bidiagonal generators.
//!
//! Every off-diagonal band of the feedback master equation evolves under a
//! generator with a diagonal (local decay/diffusion) and a single
//! superdiagonal (population fed down from the level above). The propagator is
//! upper triangular, so scaling-and-squaring stays inside that structure and
//! each Taylor term costs one bidiagonal product.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

/// Scaled norm bound before the Taylor series is applied.
const SCALED_NORM: f64 = 0.5;
const MAX_TAYLOR_TERMS: usize = 40;

/// Real upper-bidiagonal matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Bidiagonal {
    diag: Vec<f64>,
    sup: Vec<f64>,
}

impl Bidiagonal {
    /// `sup[i]` sits at `(i, i + 1)`; it must have one entry fewer than `diag`
    /// (or be empty when `diag` is empty).
    pub fn new(diag: Vec<f64>, sup: Vec<f64>) -> Self {
        assert_eq!(
            sup.len(),
            diag.len().saturating_sub(1),
            "superdiagonal length must be one less than the diagonal"
        );
        Self { diag, sup }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn sup(&self) -> &[f64] {
        &self.sup
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.len();
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                self.diag[i]
            } else if j == i + 1 {
                self.sup[i]
            } else {
                0.0
            }
        })
    }

    fn norm1(&self) -> f64 {
        (0..self.len())
            .map(|j| self.diag[j].abs() + if j > 0 { self.sup[j - 1].abs() } else { 0.0 })
            .fold(0.0, f64::max)
    }

    /// `exp(t * self)`, dense upper triangular.
    pub fn expm(&self, t: f64) -> DMatrix<f64> {
        let n = self.len();
        let norm = self.norm1() * t.abs();
        let squarings = if norm > SCALED_NORM {
            (norm / SCALED_NORM).log2().ceil() as u32
        } else {
            0
        };
        let scale = t / 2f64.powi(squarings as i32);
        let diag: Vec<f64> = self.diag.iter().map(|d| d * scale).collect();
        let sup: Vec<f64> = self.sup.iter().map(|u| u * scale).collect();

        let mut result = DMatrix::<f64>::identity(n, n);
        let mut term = DMatrix::<f64>::identity(n, n);
        for k in 1..=MAX_TAYLOR_TERMS {
            term = times_bidiagonal(&term, &diag, &sup) / k as f64;
            result += &term;
            if term.amax() <= f64::EPSILON * 1e-2 * result.amax() {
                break;
            }
        }
        for _ in 0..squarings {
            result = upper_square(&result);
        }
        result
    }
}

/// `T * B` for upper-triangular `T` and bidiagonal `B`.
fn times_bidiagonal(t: &DMatrix<f64>, diag: &[f64], sup: &[f64]) -> DMatrix<f64> {
    let n = diag.len();
    DMatrix::from_fn(n, n, |i, j| {
        if i > j {
            return 0.0;
        }
        let mut v = t[(i, j)] * diag[j];
        if j > i {
            v += t[(i, j - 1)] * sup[j - 1];
        }
        v
    })
}

fn upper_square(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let mut out = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        for k in 0..=j {
            let akj = a[(k, j)];
            if akj == 0.0 {
                continue;
            }
            for i in 0..=k {
                out[(i, j)] += a[(i, k)] * akj;
            }
        }
    }
    out
}

/// `m * v` for a real matrix acting on a complex vector.
pub(crate) fn apply_real(m: &DMatrix<f64>, v: &DVector<C64>) -> DVector<C64> {
    let n = m.nrows();
    DVector::from_fn(n, |i, _| {
        (0..m.ncols()).map(|j| v[j] * m[(i, j)]).sum()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_generator_gives_identity() {
        let b = Bidiagonal::new(vec![0.0; 5], vec![0.0; 4]);
        assert_eq!(b.expm(3.0), DMatrix::identity(5, 5));
    }

    #[test]
    fn diagonal_generator_is_elementwise_exp() {
        let d = vec![-0.1, -2.0, -37.5, 0.3];
        let b = Bidiagonal::new(d.clone(), vec![0.0; 3]);
        let e = b.expm(1.7);
        for (i, di) in d.iter().enumerate() {
            let exact = (di * 1.7).exp();
            assert!((e[(i, i)] - exact).abs() <= 1e-13 * exact.max(1.0));
        }
    }

    #[test]
    fn two_level_closed_form() {
        // [[a, u], [0, b]] -> off-diagonal u (e^{a t} - e^{b t}) / (a - b)
        let (a, b, u, t) = (-0.4, -3.1, 2.2, 0.9);
        let e = Bidiagonal::new(vec![a, b], vec![u]).expm(t);
        let off = u * ((a * t).exp() - (b * t).exp()) / (a - b);
        assert!((e[(0, 1)] - off).abs() < 1e-14);
        assert_eq!(e[(1, 0)], 0.0);
    }

    #[test]
    fn matches_dense_pade_exponential() {
        // independent route: nalgebra's Padé scaling-and-squaring on the dense matrix
        let n = 24;
        let diag: Vec<f64> = (0..n).map(|i| -(i as f64) * 0.8 + 0.05 * (i % 3) as f64).collect();
        let sup: Vec<f64> = (0..n - 1).map(|i| 0.6 * ((i + 1) as f64).sqrt()).collect();
        let b = Bidiagonal::new(diag, sup);
        for t in [0.01, 0.3, 2.0] {
            let ours = b.expm(t);
            let dense = (b.to_dense() * t).exp();
            let err = (&ours - &dense).amax();
            assert!(err < 1e-12, "t = {t}: {err:e}");
        }
    }
}
