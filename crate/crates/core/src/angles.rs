//! Variational angle search at fixed direction phase, and one-dimensional
//! angle sweeps around the optimum.
//!
//! The search is a deterministic two-stage scheme: a 32 x 32 grid over
//! `gamma in (0, 4 / scale]` and `theta in (0, pi)`, followed by Nelder–Mead
//! refinement from the best grid point. `scale` is the typical local energy
//! scale `sigma sqrt(2M/n)` of the instance.

use std::f64::consts::{FRAC_PI_2, PI};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::optim::{nelder_mead, NelderMeadOptions};
use crate::problem::IsingProblem;
use crate::sim::{
    analytic_expectation, ground_state_enhancement, mean_energy, prepare_from_spectrum, probabilities, CircuitParams,
};
use crate::spectrum::Spectrum;
use crate::thermo::fit_instance;

pub const GRID_POINTS: usize = 32;
pub const DEFAULT_LAMBDA: f64 = -FRAC_PI_2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptResult {
    pub gamma_opt: f64,
    pub theta_opt: f64,
    pub lambda: f64,
    /// `<E>` at the returned angles.
    pub energy_opt: f64,
    /// Number of energy evaluations spent.
    pub evaluations: usize,
    pub converged: bool,
}

impl OptResult {
    pub fn params(&self) -> CircuitParams {
        CircuitParams::new(self.gamma_opt, self.theta_opt, self.lambda)
    }
}

/// Energies on the coarse search grid, row-major in `gamma`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridScan {
    pub gammas: Vec<f64>,
    pub thetas: Vec<f64>,
    pub energies: Vec<f64>,
    pub evaluations: usize,
}

impl GridScan {
    pub fn energy(&self, gamma_idx: usize, theta_idx: usize) -> f64 {
        self.energies[gamma_idx * self.thetas.len() + theta_idx]
    }
}

/// `+1` minimizes the energy (`lambda <= 0`), `-1` maximizes it. The sign of
/// `lambda` decides whether the circuit amplifies low or high energies.
fn direction(lambda: f64) -> f64 {
    if lambda > 0.0 {
        -1.0
    } else {
        1.0
    }
}

fn gamma_upper_bound(problem: &IsingProblem) -> Result<f64> {
    let scale = problem.coupling_scale();
    if scale <= 0.0 || !scale.is_finite() {
        return Err(invalid("problem has no couplings or fields to optimize against"));
    }
    Ok(4.0 / scale)
}

/// Coarse grid scan with `<E>` from the closed form.
pub fn scan_grid(problem: &IsingProblem, spectrum: &Spectrum, lambda: f64) -> Result<GridScan> {
    check(problem, spectrum)?;
    let gamma_max = gamma_upper_bound(problem)?;
    let gammas: Vec<f64> = (1..=GRID_POINTS)
        .map(|k| gamma_max * k as f64 / GRID_POINTS as f64)
        .collect();
    let thetas: Vec<f64> = (1..=GRID_POINTS)
        .map(|k| PI * k as f64 / (GRID_POINTS + 1) as f64)
        .collect();
    let mut energies = Vec::with_capacity(GRID_POINTS * GRID_POINTS);
    for &gamma in &gammas {
        for &theta in &thetas {
            energies.push(analytic_expectation(problem, CircuitParams::new(gamma, theta, lambda)));
        }
    }
    Ok(GridScan {
        gammas,
        thetas,
        energies,
        evaluations: GRID_POINTS * GRID_POINTS,
    })
}

/// Finds `(gamma, theta)` optimizing `<E>` at fixed `lambda`: minimized for
/// `lambda <= 0`, maximized for `lambda > 0`.
pub fn optimize_angles(problem: &IsingProblem, spectrum: &Spectrum, lambda: f64) -> Result<OptResult> {
    let grid = scan_grid(problem, spectrum, lambda)?;
    let sign = direction(lambda);
    let (mut best_g, mut best_t, mut best_obj) = (0, 0, f64::INFINITY);
    for gi in 0..grid.gammas.len() {
        for ti in 0..grid.thetas.len() {
            let obj = sign * grid.energy(gi, ti);
            if obj < best_obj {
                best_obj = obj;
                best_g = gi;
                best_t = ti;
            }
        }
    }
    let start = [grid.gammas[best_g], grid.thetas[best_t]];
    let steps = [grid.gammas[0], grid.thetas[0]];
    let objective = |p: &[f64]| {
        if p[0] <= 0.0 || p[1] <= 0.0 || p[1] >= PI {
            return f64::INFINITY;
        }
        sign * analytic_expectation(problem, CircuitParams::new(p[0], p[1], lambda))
    };
    let nm = nelder_mead(objective, &start, &steps, NelderMeadOptions::default());
    let evaluations = grid.evaluations + nm.evals;
    let (gamma_opt, theta_opt, obj) = if nm.value <= best_obj {
        (nm.x[0], nm.x[1], nm.value)
    } else {
        (start[0], start[1], best_obj)
    };
    Ok(OptResult {
        gamma_opt,
        theta_opt,
        lambda,
        energy_opt: sign * obj,
        evaluations,
        converged: nm.converged,
    })
}

/// Which angle stays at its optimum during a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeldAngle {
    /// Hold `theta`, vary `gamma`.
    Theta,
    /// Hold `gamma`, vary `theta`.
    Gamma,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub angle: f64,
    pub energy: f64,
    pub beta: f64,
    pub beta_stderr: f64,
    pub fit_r2: f64,
    pub xi: f64,
}

/// Evaluates energy, fitted `beta` and ground-state enhancement along a
/// one-dimensional cut through the optimum. The Boltzmann fit always uses
/// every configuration, however poor the fit is.
pub fn sweep(
    problem: &IsingProblem,
    spectrum: &Spectrum,
    opt: &OptResult,
    held: HeldAngle,
    values: &[f64],
) -> Result<Vec<SweepPoint>> {
    check(problem, spectrum)?;
    values
        .iter()
        .map(|&angle| {
            let params = match held {
                HeldAngle::Theta => CircuitParams::new(angle, opt.theta_opt, opt.lambda),
                HeldAngle::Gamma => CircuitParams::new(opt.gamma_opt, angle, opt.lambda),
            };
            let state = prepare_from_spectrum(spectrum, params);
            let probs = probabilities(&state);
            let fit = fit_instance(&probs, spectrum)?;
            Ok(SweepPoint {
                angle,
                energy: mean_energy(state.amplitudes(), spectrum.energies()),
                beta: fit.beta,
                beta_stderr: fit.beta_stderr,
                fit_r2: fit.r2,
                xi: ground_state_enhancement(&state, spectrum)?.xi,
            })
        })
        .collect()
}

/// Default sweep abscissae: `gamma` over `(0, 4 gamma_opt]` or `theta` over
/// `(0, pi)`, `count` evenly spaced points.
pub fn default_sweep_values(opt: &OptResult, held: HeldAngle, count: usize) -> Vec<f64> {
    match held {
        HeldAngle::Theta => (1..=count)
            .map(|k| 4.0 * opt.gamma_opt * k as f64 / count as f64)
            .collect(),
        HeldAngle::Gamma => (1..=count).map(|k| PI * k as f64 / (count + 1) as f64).collect(),
    }
}

pub fn write_sweep_csv<W: Write>(mut out: W, points: &[SweepPoint]) -> Result<()> {
    writeln!(out, "angle,energy,beta,beta_stderr,fit_r2,xi")?;
    for p in points {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            p.angle, p.energy, p.beta, p.beta_stderr, p.fit_r2, p.xi
        )?;
    }
    Ok(())
}

fn check(problem: &IsingProblem, spectrum: &Spectrum) -> Result<()> {
    if problem.n() != spectrum.n() {
        return Err(Error::SizeMismatch {
            expected: problem.n(),
            actual: spectrum.n(),
        });
    }
    Ok(())
}
