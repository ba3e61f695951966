//! Protection of polarization-coded qubits `alpha|n,m> + beta|m,n>`, one
//! feedback loop per polarized mode.
//!
//! The worst case over input states is attained by equal-weight
//! superpositions, which gives `F_min(t)` in closed form. Optimizing the
//! short-time loss over `(n, m)` selects `m = n + 1` and a photon number
//! `n_opt(eta)` that stays at zero until `eta = 2(sqrt 2 - 1) ~ 0.83`.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::continuous::{ContinuousParams, ContinuousPropagator};
use crate::error::{Error, Result};
use crate::fock::FockDim;

/// Efficiency above which `n_opt` leaves zero: `2 / (1 + sqrt 2)`.
pub const THRESHOLD_ETA: f64 = 0.828_427_124_746_190_1;

/// Photon numbers `(n, m)` of the two polarized modes in `alpha|n,m> + beta|m,n>`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QubitSpec {
    n: usize,
    m: usize,
}

impl QubitSpec {
    pub fn new(n: usize, m: usize) -> Result<Self> {
        if n == m {
            return Err(Error::param("m", "must differ from n"));
        }
        Ok(Self { n, m })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtectionReport {
    pub eta: f64,
    pub n_opt: usize,
    /// `(gamma t, F_min)` for the optimal qubit `(n_opt, n_opt + 1)`.
    pub f_min_curve: Vec<(f64, f64)>,
    pub threshold_eta: f64,
}

fn check_eta(eta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::param("eta", format!("must lie in [0, 1], got {eta}")));
    }
    Ok(())
}

/// `F_min = 1/2 (e^{-(1-eta) gt (n+m)} + e^{-gt (n + m - 2 eta sqrt(nm))})`.
pub fn min_fidelity(spec: QubitSpec, eta: f64, gamma_t: f64) -> Result<f64> {
    check_eta(eta)?;
    if !(gamma_t >= 0.0) {
        return Err(Error::param("gamma_t", format!("must be non-negative, got {gamma_t}")));
    }
    let (n, m) = (spec.n as f64, spec.m as f64);
    Ok(0.5
        * ((-(1.0 - eta) * gamma_t * (n + m)).exp()
            + (-gamma_t * (n + m - 2.0 * eta * (n * m).sqrt())).exp()))
}

/// `s(n) = (sqrt(n+1) + sqrt n)^2`.
pub fn photon_spread(n: f64) -> f64 {
    ((n + 1.0).sqrt() + n.sqrt()).powi(2)
}

/// Short-time loss rate of the qubit `(n, n+1)` up to a factor: `1/s + (1-eta) s`.
pub fn loss_objective(n: usize, eta: f64) -> f64 {
    let s = photon_spread(n as f64);
    1.0 / s + (1.0 - eta) * s
}

/// Short-time loss `(sqrt m - sqrt n)^2 + (1-eta)(sqrt m + sqrt n)^2` of a general pair.
pub fn pair_objective(n: usize, m: usize, eta: f64) -> f64 {
    let (a, b) = ((n as f64).sqrt(), (m as f64).sqrt());
    (b - a).powi(2) + (1.0 - eta) * (b + a).powi(2)
}

/// Integer minimizer of [`loss_objective`]; ties go to the smaller `n`.
pub fn optimal_n(eta: f64) -> Result<usize> {
    check_eta(eta)?;
    if eta == 1.0 {
        return Err(Error::Unbounded(
            "with ideal detection the loss keeps decreasing with n".into(),
        ));
    }
    // the objective is convex in s(n) and s(n) is increasing
    let mut n = 0;
    while loss_objective(n + 1, eta) < loss_objective(n, eta) {
        n += 1;
    }
    Ok(n)
}

/// Real root of `s(n) = (1 - eta)^{-1/2}`: `n = (s - 2 + 1/s) / 4`.
pub fn approx_n_opt(eta: f64) -> Result<f64> {
    check_eta(eta)?;
    if eta == 1.0 {
        return Err(Error::Unbounded("s(n) diverges at eta = 1".into()));
    }
    let s = (1.0 - eta).powf(-0.5);
    Ok((s - 2.0 + 1.0 / s) / 4.0)
}

/// Bisection for the efficiency at which `optimal_n` first leaves zero.
pub fn locate_threshold(tol: f64) -> f64 {
    let (mut lo, mut hi) = (0.0_f64, 0.99_f64);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        match optimal_n(mid) {
            Ok(0) => lo = mid,
            _ => hi = mid,
        }
    }
    0.5 * (lo + hi)
}

pub fn protection_report(eta: f64, gamma_ts: &[f64]) -> Result<ProtectionReport> {
    let n_opt = optimal_n(eta)?;
    let spec = QubitSpec::new(n_opt, n_opt + 1)?;
    let f_min_curve = gamma_ts
        .iter()
        .map(|&gt| min_fidelity(spec, eta, gt).map(|f| (gt, f)))
        .collect::<Result<_>>()?;
    Ok(ProtectionReport {
        eta,
        n_opt,
        f_min_curve,
        threshold_eta: THRESHOLD_ETA,
    })
}

/// Bloch-sphere sampling: azimuthal and polar counts.
pub const BLOCH_AZIMUTHAL: usize = 32;
pub const BLOCH_POLAR: usize = 17;

/// Single-mode evolution of `|a><b|` for the four operators the two-mode
/// fidelity needs, as `(a, b) -> E(|a><b|)`.
struct ModeMaps {
    maps: [[DMatrix<C64>; 2]; 2],
}

impl ModeMaps {
    fn new(levels: [usize; 2], prop: &ContinuousPropagator) -> Self {
        let size = prop.dim().size();
        let evolve = |a: usize, b: usize| {
            let mut op = DMatrix::zeros(size, size);
            op[(a, b)] = C64::new(1.0, 0.0);
            prop.apply_operator(&op)
        };
        let maps = [
            [evolve(levels[0], levels[0]), evolve(levels[0], levels[1])],
            [evolve(levels[1], levels[0]), evolve(levels[1], levels[1])],
        ];
        Self { maps }
    }
}

/// Worst-case fidelity over a Bloch-sphere grid of inputs, from two
/// independent single-mode evolutions.
///
/// Returns `(F_min, |alpha|^2 at the minimum)`.
pub fn numeric_two_mode_check(
    spec: QubitSpec,
    eta: f64,
    gamma_t: f64,
    dim: FockDim,
) -> Result<(f64, f64)> {
    check_eta(eta)?;
    for k in [spec.n, spec.m] {
        if k >= dim.n_max() {
            return Err(Error::Index { n: k, n_max: dim.n_max() });
        }
    }
    let params = ContinuousParams::new(1.0, eta)?;
    let prop = ContinuousPropagator::new(params, dim, gamma_t)?;
    let levels = [spec.n, spec.m];
    let maps = ModeMaps::new(levels, &prop);
    // basis kets: A = |n, m>, B = |m, n>; mode 1 holds levels[i], mode 2 levels[1-i]
    // <X'|(E x E)(|X><Y|)|Y'> = E1(|x1><y1|)[x1',y1'] * E2(|x2><y2|)[x2',y2']
    let element = |xp: usize, yp: usize, x: usize, y: usize| -> C64 {
        let first = maps.maps[x][y][(levels[xp], levels[yp])];
        let second = maps.maps[1 - x][1 - y][(levels[1 - xp], levels[1 - yp])];
        first * second
    };
    let mut worst = (f64::INFINITY, 0.0);
    for ip in 0..BLOCH_POLAR {
        let polar = PI * ip as f64 / (BLOCH_POLAR - 1) as f64;
        for ia in 0..BLOCH_AZIMUTHAL {
            let azimuth = 2.0 * PI * ia as f64 / BLOCH_AZIMUTHAL as f64;
            let c = [
                C64::new((polar / 2.0).cos(), 0.0),
                C64::from_polar((polar / 2.0).sin(), azimuth),
            ];
            let mut f = C64::new(0.0, 0.0);
            for xp in 0..2 {
                for yp in 0..2 {
                    for x in 0..2 {
                        for y in 0..2 {
                            f += c[xp].conj() * c[yp] * c[x] * c[y].conj() * element(xp, yp, x, y);
                        }
                    }
                }
            }
            if f.re < worst.0 {
                worst = (f.re, c[0].norm_sqr());
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn spec_rejects_equal_numbers() {
        assert!(QubitSpec::new(2, 2).is_err());
    }

    #[test]
    fn min_fidelity_examples() {
        let q01 = QubitSpec::new(0, 1).unwrap();
        assert_abs_diff_eq!(min_fidelity(q01, 0.3, 0.0).unwrap(), 1.0);
        // no feedback, small times: 1 - gt + O(gt^2)
        let gt = 1e-4;
        let f = min_fidelity(q01, 0.0, gt).unwrap();
        assert!((f - (1.0 - gt)).abs() < gt * gt);
        for gt in [0.1, 1.0] {
            assert_abs_diff_eq!(
                min_fidelity(q01, 1.0, gt).unwrap(),
                0.5 * (1.0 + (-gt).exp()),
                epsilon = 1e-15
            );
        }
    }

    #[test]
    fn optimal_n_examples() {
        assert_eq!(optimal_n(0.5).unwrap(), 0);
        assert_eq!(optimal_n(0.0).unwrap(), 0);
        assert!(matches!(optimal_n(1.0), Err(Error::Unbounded(_))));
        assert!(optimal_n(1.2).is_err());
    }

    #[test]
    fn optimal_n_matches_brute_force() {
        for eta in [0.9, 0.96, 0.99, 0.999] {
            let brute = (0..10_000usize)
                .min_by(|&a, &b| loss_objective(a, eta).total_cmp(&loss_objective(b, eta)))
                .unwrap();
            assert_eq!(optimal_n(eta).unwrap(), brute, "eta = {eta}");
        }
        assert_eq!(optimal_n(0.9).unwrap(), 1);
    }

    #[test]
    fn threshold_closed_form() {
        // objective(0) = objective(1) solved by hand: 1 - eta = (sqrt 2 - 1)^2
        let star = 1.0 - (2f64.sqrt() - 1.0).powi(2);
        assert_abs_diff_eq!(star, 2.0 * (2f64.sqrt() - 1.0), epsilon = 1e-15);
        assert_abs_diff_eq!(star, THRESHOLD_ETA, epsilon = 1e-15);
        assert_abs_diff_eq!(loss_objective(0, star), loss_objective(1, star), epsilon = 1e-14);
        assert_abs_diff_eq!(locate_threshold(1e-12), star, epsilon = 1e-10);
    }

    fn bisect_spread(target: f64) -> f64 {
        let (mut lo, mut hi) = (0.0, 1e6);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if photon_spread(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn approx_n_opt_inverts_spread() {
        assert_abs_diff_eq!(approx_n_opt(0.0).unwrap(), 0.0, epsilon = 1e-15);
        for eta in [0.5, 0.9, 0.99] {
            let s = (1.0f64 - eta).powf(-0.5);
            assert_abs_diff_eq!(approx_n_opt(eta).unwrap(), bisect_spread(s), epsilon = 1e-9);
        }
        for eta in [0.9, 0.96, 0.99] {
            let approx = approx_n_opt(eta).unwrap().round() as i64;
            assert!((approx - optimal_n(eta).unwrap() as i64).abs() <= 1);
        }
    }

    #[test]
    fn unit_spacing_is_optimal() {
        // the p = m - n = 1 reduction, re-checked over p in 1..=5
        for eta in [0.0, 0.5, 0.85, 0.95, 0.99] {
            for n in 0..50 {
                let best_p = (1..=5)
                    .min_by(|&a, &b| pair_objective(n, n + a, eta).total_cmp(&pair_objective(n, n + b, eta)))
                    .unwrap();
                assert_eq!(best_p, 1, "eta = {eta}, n = {n}");
            }
        }
    }

    #[test]
    fn optimal_n_is_monotone() {
        let mut last = 0;
        for i in 0..100 {
            let n = optimal_n(i as f64 * 0.01).unwrap();
            assert!(n >= last);
            last = n;
        }
    }

    /// Short-time loss rate of the optimal qubit relative to `sqrt(1 - eta)`.
    fn small_time_ratio(eta: f64) -> f64 {
        let n = optimal_n(eta).unwrap();
        let spec = QubitSpec::new(n, n + 1).unwrap();
        let gt = 1e-7;
        (1.0 - min_fidelity(spec, eta, gt).unwrap()) / (gt * (1.0 - eta).sqrt())
    }

    #[test]
    fn small_time_rate_is_half_objective() {
        // 1 - F_min ~ gt (1/s + (1 - eta) s) / 2 at the optimal n
        for eta in [0.5, 0.85, 0.9, 0.95, 0.99] {
            let n = optimal_n(eta).unwrap();
            let spec = QubitSpec::new(n, n + 1).unwrap();
            let gt = 1e-7;
            let rate = (1.0 - min_fidelity(spec, eta, gt).unwrap()) / gt;
            assert_abs_diff_eq!(rate, 0.5 * loss_objective(n, eta), epsilon = 1e-6);
            assert!(rate >= (1.0 - eta).sqrt() * (1.0 - 1e-6));
        }
    }

    #[test]
    fn small_time_law_close_to_unit_efficiency() {
        for eta in [0.93, 0.95, 0.97, 0.99, 0.999] {
            let n = optimal_n(eta).unwrap();
            let spec = QubitSpec::new(n, n + 1).unwrap();
            for gt in [1e-4, 1e-3, 1e-2] {
                let loss = 1.0 - min_fidelity(spec, eta, gt).unwrap();
                assert!(loss <= gt * (1.0 - eta).sqrt() * 1.1, "eta {eta} gt {gt}: {loss}");
            }
        }
    }

    #[test]
    fn small_time_law_is_loose_just_above_threshold() {
        // n_opt = 1 has s = 3 + 2 sqrt 2, far from (1 - eta)^{-1/2} here
        let x = photon_spread(1.0) * 0.15f64.sqrt();
        assert_abs_diff_eq!(small_time_ratio(0.85), 0.5 * (x + 1.0 / x), epsilon = 1e-5);
        assert!(small_time_ratio(0.85) > 1.3);
        assert!(small_time_ratio(0.9) > 1.1);
    }

    #[test]
    fn large_n_ideal_detection() {
        for n in [5usize, 10, 20] {
            let spec = QubitSpec::new(n, n + 1).unwrap();
            for gt in [0.1, 1.0, 5.0] {
                let f = min_fidelity(spec, 1.0, gt).unwrap();
                let nf = n as f64;
                let exact = 0.5 * (1.0 + (-gt * (2.0 * nf + 1.0 - 2.0 * (nf * (nf + 1.0)).sqrt())).exp());
                assert_abs_diff_eq!(f, exact, epsilon = 1e-15);
                assert!(f >= 0.5 * (1.0 + (-gt / (4.0 * nf)).exp()) - 1e-15);
            }
        }
    }

    #[test]
    fn two_mode_check_examples() {
        let dim = FockDim::new(12).unwrap();
        let (f, _) = numeric_two_mode_check(QubitSpec::new(0, 1).unwrap(), 0.0, 0.1, dim).unwrap();
        assert_abs_diff_eq!(f, (-0.1f64).exp(), epsilon = 1e-6);

        let spec = QubitSpec::new(1, 2).unwrap();
        let (f, a2) = numeric_two_mode_check(spec, 0.75, 0.05, dim).unwrap();
        assert_abs_diff_eq!(f, min_fidelity(spec, 0.75, 0.05).unwrap(), epsilon = 1e-5);
        assert_abs_diff_eq!(a2, 0.5, epsilon = 1e-12);

        for (n, m) in [(0, 1), (2, 5)] {
            let (f, _) = numeric_two_mode_check(QubitSpec::new(n, m).unwrap(), 0.4, 0.0, dim).unwrap();
            assert_abs_diff_eq!(f, 1.0, epsilon = 1e-14);
        }
    }
}
