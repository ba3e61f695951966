//! Adiabatic photon deposition by a three-level Lambda atom.
//!
//! The atom enters in `|g1>` and meets the cavity coupling `g(t)` before the
//! classical pump `Omega(t)`. Each photon sector `{|g1,n>, |e,n>, |g2,n+1>}`
//! then follows its dark state, which leaves the atom in `|g2>` and the field
//! shifted up by one photon without touching the excited level.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{DensityMatrix, FockDim};

/// Largest change of the transfer fidelity tolerated when the step is halved.
pub const STEP_HALVING_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_MUCH_GREATER: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PulseShape {
    /// `exp(-((t - center) / width)^2)`.
    Gaussian { width: f64 },
}

/// Cavity and pump envelopes seen by the atom during one crossing of `[0, t_cross]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulsePair {
    g_max: f64,
    omega_max: f64,
    t_cross: f64,
    delay: f64,
    shape: PulseShape,
}

impl PulsePair {
    pub fn new(g_max: f64, omega_max: f64, t_cross: f64, delay: f64, shape: PulseShape) -> Result<Self> {
        for (name, v) in [("g_max", g_max), ("omega_max", omega_max), ("t_cross", t_cross)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("must be positive, got {v}")));
            }
        }
        if !(delay > 0.0 && delay < t_cross) {
            return Err(Error::param(
                "delay",
                format!("pump must follow the cavity coupling within the crossing, got {delay}"),
            ));
        }
        let PulseShape::Gaussian { width } = shape;
        if !(width > 0.0 && width.is_finite()) {
            return Err(Error::param("width", format!("must be positive, got {width}")));
        }
        Ok(Self { g_max, omega_max, t_cross, delay, shape })
    }

    /// Gaussians of width `t_cross / 6`, pump delayed by `t_cross / 4`.
    pub fn counterintuitive(g_max: f64, omega_max: f64, t_cross: f64) -> Result<Self> {
        Self::new(
            g_max,
            omega_max,
            t_cross,
            t_cross / 4.0,
            PulseShape::Gaussian { width: t_cross / 6.0 },
        )
    }

    pub fn g_max(&self) -> f64 {
        self.g_max
    }

    pub fn omega_max(&self) -> f64 {
        self.omega_max
    }

    pub fn t_cross(&self) -> f64 {
        self.t_cross
    }

    pub fn delay(&self) -> f64 {
        self.delay
    }

    pub fn shape(&self) -> PulseShape {
        self.shape
    }

    fn envelope(&self, t: f64, center: f64) -> f64 {
        let PulseShape::Gaussian { width } = self.shape;
        (-((t - center) / width).powi(2)).exp()
    }

    pub fn g(&self, t: f64) -> f64 {
        self.g_max * self.envelope(t, 0.5 * (self.t_cross - self.delay))
    }

    pub fn omega(&self, t: f64) -> f64 {
        self.omega_max * self.envelope(t, 0.5 * (self.t_cross + self.delay))
    }
}

/// Amplitudes on `(|g1,n>, |e,n>, |g2,n+1>)`.
pub type Sector = [C64; 3];

/// Zero-energy eigenvector `(g sqrt(n+1) |g1,n> + Omega |g2,n+1>) / norm`.
pub fn dark_state(n: usize, g: f64, omega: f64) -> Result<Sector> {
    let a = g * ((n + 1) as f64).sqrt();
    let norm = a.hypot(omega);
    if norm == 0.0 {
        return Err(Error::Degenerate("dark state needs a nonzero coupling".into()));
    }
    Ok([C64::from(a / norm), C64::from(0.0), C64::from(omega / norm)])
}

/// `d psi / dt = -i H psi` with `<e|H|g2> = -i g sqrt(n+1)`, `<e|H|g1> = i Omega`.
fn derivative(psi: &Sector, g_eff: f64, omega: f64) -> Sector {
    let [g1, e, g2] = *psi;
    // -i H psi, H Hermitian with the entries above
    let h_g1 = C64::new(0.0, -omega) * e;
    let h_e = C64::new(0.0, omega) * g1 + C64::new(0.0, -g_eff) * g2;
    let h_g2 = C64::new(0.0, g_eff) * e;
    let mi = C64::new(0.0, -1.0);
    [mi * h_g1, mi * h_e, mi * h_g2]
}

fn axpy(a: &Sector, h: f64, k: &Sector) -> Sector {
    [a[0] + k[0] * h, a[1] + k[1] * h, a[2] + k[2] * h]
}

/// Fixed-step fourth-order Runge-Kutta over `[0, t_cross]` from `|g1,n>`,
/// calling `visit(t, psi)` at every grid time including both ends.
pub fn evolve_sector_with<F>(n: usize, pulses: &PulsePair, steps: usize, mut visit: F) -> Sector
where
    F: FnMut(f64, &Sector),
{
    let root = ((n + 1) as f64).sqrt();
    let h = pulses.t_cross / steps as f64;
    let f = |t: f64, psi: &Sector| derivative(psi, pulses.g(t) * root, pulses.omega(t));
    let mut psi: Sector = [C64::from(1.0), C64::from(0.0), C64::from(0.0)];
    visit(0.0, &psi);
    for i in 0..steps {
        let t = i as f64 * h;
        let k1 = f(t, &psi);
        let k2 = f(t + 0.5 * h, &axpy(&psi, 0.5 * h, &k1));
        let k3 = f(t + 0.5 * h, &axpy(&psi, 0.5 * h, &k2));
        let k4 = f(t + h, &axpy(&psi, h, &k3));
        for j in 0..3 {
            psi[j] += (k1[j] + k2[j] * 2.0 + k3[j] * 2.0 + k4[j]) * (h / 6.0);
        }
        visit((i + 1) as f64 * h, &psi);
    }
    psi
}

pub fn sector_norm(psi: &Sector) -> f64 {
    psi.iter().map(|c| c.norm_sqr()).sum()
}

#[derive(Clone, Debug, PartialEq)]
pub struct CrossingResult {
    /// Field after tracing out the atom, on a basis one level larger than the input.
    pub final_field: DensityMatrix,
    /// `Tr[rho_joint (|g2><g2| x a+ (aa+)^{-1/2} rho (aa+)^{-1/2} a)]`; the fidelity for pure inputs.
    pub transfer_fidelity: f64,
    pub max_excited_population: f64,
    /// Largest per-sector deviation of the norm from 1 at the end of the crossing.
    pub norm_drift: f64,
    /// Step count actually used (the finer of the two halving runs).
    pub steps: usize,
}

struct SectorRun {
    finals: Vec<Sector>,
    excited: Vec<Vec<f64>>,
}

fn run_sectors(size: usize, pulses: &PulsePair, steps: usize) -> SectorRun {
    let out: Vec<(Sector, Vec<f64>)> = (0..size)
        .into_par_iter()
        .map(|n| {
            let mut excited = Vec::with_capacity(steps + 1);
            let fin = evolve_sector_with(n, pulses, steps, |_, psi| excited.push(psi[1].norm_sqr()));
            (fin, excited)
        })
        .collect();
    let (finals, excited) = out.into_iter().unzip();
    SectorRun { finals, excited }
}

fn transfer_overlap(rho: &DMatrix<C64>, finals: &[Sector]) -> f64 {
    // sum_{nm} rho_nm psi_n[g2] psi_m[g2]^* rho_mn
    let size = rho.nrows();
    let mut f = C64::from(0.0);
    for n in 0..size {
        for m in 0..size {
            f += rho[(n, m)] * finals[n][2] * finals[m][2].conj() * rho[(m, n)];
        }
    }
    f.re
}

/// Integrates one crossing of an atom prepared in `|g1>` through the cavity
/// holding `field_rho`.
pub fn integrate_crossing(
    field_rho: &DensityMatrix,
    pulses: &PulsePair,
    steps: usize,
) -> Result<CrossingResult> {
    if steps == 0 {
        return Err(Error::param("steps", "must be at least 1"));
    }
    let size = field_rho.dim().size();
    let rho = field_rho.elements();
    let coarse = run_sectors(size, pulses, steps);
    let fine = run_sectors(size, pulses, 2 * steps);
    let f_coarse = transfer_overlap(rho, &coarse.finals);
    let f_fine = transfer_overlap(rho, &fine.finals);
    let delta = (f_fine - f_coarse).abs();
    if delta > STEP_HALVING_TOLERANCE {
        return Err(Error::StepTooCoarse { delta });
    }

    let out_dim = FockDim::new(field_rho.dim().n_max() + 1)?;
    let mut field = DMatrix::<C64>::zeros(size + 1, size + 1);
    for n in 0..size {
        for m in 0..size {
            let r = rho[(n, m)];
            if r == C64::from(0.0) {
                continue;
            }
            let (a, b) = (&fine.finals[n], &fine.finals[m]);
            field[(n, m)] += r * (a[0] * b[0].conj() + a[1] * b[1].conj());
            field[(n + 1, m + 1)] += r * a[2] * b[2].conj();
        }
    }
    let max_excited_population = (0..=2 * steps)
        .map(|i| {
            (0..size)
                .map(|n| rho[(n, n)].re * fine.excited[n][i])
                .sum::<f64>()
        })
        .fold(0.0, f64::max);
    let norm_drift = fine
        .finals
        .iter()
        .map(|psi| (sector_norm(psi) - 1.0).abs())
        .fold(0.0, f64::max);
    Ok(CrossingResult {
        final_field: DensityMatrix::from_parts(field, out_dim),
        transfer_fidelity: f_fine,
        max_excited_population,
        norm_drift,
        steps: 2 * steps,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Marginal,
    Fail,
}

/// One link `big >> small` of the adiabaticity chain, as `ratio = big / small`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Inequality {
    pub label: String,
    pub ratio: f64,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdiabaticityReport {
    pub factor: f64,
    /// `Omega_max, g_max >> 1/T_cross`.
    pub couplings: Vec<Inequality>,
    /// `1/T_cross >> n_bar gamma, gamma_e`.
    pub losses: Vec<Inequality>,
}

impl AdiabaticityReport {
    pub fn left(&self) -> Verdict {
        worst(&self.couplings)
    }

    pub fn right(&self) -> Verdict {
        worst(&self.losses)
    }

    pub fn passes(&self) -> bool {
        self.left() == Verdict::Pass && self.right() == Verdict::Pass
    }
}

fn worst(items: &[Inequality]) -> Verdict {
    if items.iter().any(|i| i.verdict == Verdict::Fail) {
        Verdict::Fail
    } else if items.iter().any(|i| i.verdict == Verdict::Marginal) {
        Verdict::Marginal
    } else {
        Verdict::Pass
    }
}

fn judge(label: &str, ratio: f64, factor: f64) -> Inequality {
    let verdict = if (ratio - factor).abs() <= 1e-12 * factor {
        Verdict::Marginal
    } else if ratio > factor {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Inequality { label: label.into(), ratio, verdict }
}

pub fn adiabaticity_report(
    pulses: &PulsePair,
    n_bar: f64,
    gamma: f64,
    gamma_e: f64,
) -> Result<AdiabaticityReport> {
    adiabaticity_report_with(pulses, n_bar, gamma, gamma_e, DEFAULT_MUCH_GREATER)
}

/// Evaluates the chain with `a >> b` read as `a / b > factor`.
pub fn adiabaticity_report_with(
    pulses: &PulsePair,
    n_bar: f64,
    gamma: f64,
    gamma_e: f64,
    factor: f64,
) -> Result<AdiabaticityReport> {
    for (name, v) in [("n_bar", n_bar), ("gamma", gamma), ("gamma_e", gamma_e), ("factor", factor)] {
        if !(v > 0.0) {
            return Err(Error::param(name, format!("must be positive, got {v}")));
        }
    }
    let t = pulses.t_cross;
    Ok(AdiabaticityReport {
        factor,
        couplings: vec![
            judge("omega_max * t_cross", pulses.omega_max * t, factor),
            judge("g_max * t_cross", pulses.g_max * t, factor),
        ],
        losses: vec![
            judge("1 / (n_bar * gamma * t_cross)", 1.0 / (n_bar * gamma * t), factor),
            judge("1 / (gamma_e * t_cross)", 1.0 / (gamma_e * t), factor),
        ],
    })
}
