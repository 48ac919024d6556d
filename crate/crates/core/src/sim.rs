//! Dense statevector simulation of the extended single-layer QAOA circuit
//!
//! ```text
//! |psi(gamma, theta, lambda)> = Ry(theta)^N U1(lambda)^N exp(-i gamma E) H^N |0...0>
//! ```
//!
//! with `Ry(theta) = exp(-i theta sigma_y / 2)` and
//! `U1(lambda) = exp(-i lambda sigma_z / 2)`. The Pauli operators act in the
//! same basis as the energy, so bit value 1 (spin up) is the `sigma_z = +1`
//! eigenstate. The Hadamard layer, the energy phases and every `U1` factor are
//! diagonal and fused into a single pass; only `Ry` mixes amplitudes.

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::IsingProblem;
use crate::spectrum::Spectrum;

/// Circuit angles: phase evolution `gamma`, mixing rotation `theta` and the
/// direction phase `lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircuitParams {
    pub gamma: f64,
    pub theta: f64,
    pub lambda: f64,
}

impl CircuitParams {
    pub fn new(gamma: f64, theta: f64, lambda: f64) -> Self {
        Self { gamma, theta, lambda }
    }

    pub fn is_finite(&self) -> bool {
        self.gamma.is_finite() && self.theta.is_finite() && self.lambda.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    n: usize,
    amplitudes: Vec<Complex64>,
}

impl QuantumState {
    pub fn from_amplitudes(n: usize, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != 1usize << n {
            return Err(Error::SizeMismatch {
                expected: 1usize << n,
                actual: amplitudes.len(),
            });
        }
        Ok(Self { n, amplitudes })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }
}

/// Applies the full circuit to `|0...0>` for the problem whose energies are
/// tabulated in `spectrum`.
pub fn prepare_state(problem: &IsingProblem, spectrum: &Spectrum, params: CircuitParams) -> Result<QuantumState> {
    if problem.n() != spectrum.n() {
        return Err(Error::SizeMismatch {
            expected: problem.n(),
            actual: spectrum.n(),
        });
    }
    Ok(prepare_from_spectrum(spectrum, params))
}

/// Same as [`prepare_state`] when only the energy table is at hand.
pub fn prepare_from_spectrum(spectrum: &Spectrum, params: CircuitParams) -> QuantumState {
    let mut amplitudes = diagonal_layer(spectrum, params.gamma, params.lambda);
    apply_ry_layer(&mut amplitudes, spectrum.n(), params.theta);
    QuantumState {
        n: spectrum.n(),
        amplitudes,
    }
}

/// `U1(lambda)^N exp(-i gamma E) H^N |0>`: amplitude
/// `2^{-n/2} exp(-i (gamma E_x + lambda/2 * sum_i s_i))`.
pub(crate) fn diagonal_layer(spectrum: &Spectrum, gamma: f64, lambda: f64) -> Vec<Complex64> {
    let n = spectrum.n();
    let norm = (0.5f64).powf(n as f64 / 2.0);
    let half_lambda = 0.5 * lambda;
    spectrum
        .energies()
        .iter()
        .enumerate()
        .map(|(x, &e)| {
            let magnetization = 2.0 * (x as u64).count_ones() as f64 - n as f64;
            let (s, c) = (-(gamma * e + half_lambda * magnetization)).sin_cos();
            Complex64::new(norm * c, norm * s)
        })
        .collect()
}

/// `Ry(theta)` on every qubit. In the spin-up-is-bit-1 basis the rotation
/// acts on a pair `(a0, a1)` (bit clear, bit set) as
/// `a0' = c a0 + s a1`, `a1' = -s a0 + c a1` with `c, s = cos, sin(theta/2)`.
pub(crate) fn apply_ry_layer(amps: &mut [Complex64], n: usize, theta: f64) {
    let (s, c) = (0.5 * theta).sin_cos();
    for q in 0..n {
        apply_ry(amps, q, c, s);
    }
}

#[inline]
fn apply_ry(amps: &mut [Complex64], qubit: usize, c: f64, s: f64) {
    let stride = 1usize << qubit;
    for block in amps.chunks_exact_mut(2 * stride) {
        let (lo, hi) = block.split_at_mut(stride);
        for (a0, a1) in lo.iter_mut().zip(hi.iter_mut()) {
            let x0 = *a0;
            let x1 = *a1;
            *a0 = Complex64::new(c * x0.re + s * x1.re, c * x0.im + s * x1.im);
            *a1 = Complex64::new(c * x1.re - s * x0.re, c * x1.im - s * x0.im);
        }
    }
}

/// `<E>` of the prepared state without building it, in `O(M N)`.
///
/// Before the mixing layer every `Z_i` and `Z_i Z_j` averages to zero and
/// `Ry(theta)^dagger Z Ry(theta) = cos(theta) Z - sin(theta) X`, so only
/// `<X_i>`, `<Z_i X_j>` and `<X_i X_j>` of the phased state are needed. With
/// `a_i = 2 gamma h_i + lambda` and `c_ik = cos(2 gamma J_ik)` these are
/// `cos(a_i) prod_k c_ik`,
/// `-sin(a_j) sin(2 gamma J_ij) prod_{k != i} c_jk` and
/// `[cos(a_i + a_j) prod_k cos(2 gamma (J_ik + J_jk))
///   + cos(a_i - a_j) prod_k cos(2 gamma (J_ik - J_jk))] / 2`.
pub fn analytic_expectation(problem: &IsingProblem, params: CircuitParams) -> f64 {
    let n = problem.n();
    let j = problem.j_dense();
    let g2 = 2.0 * params.gamma;
    let (sin_t, cos_t) = params.theta.sin_cos();
    let a: Vec<f64> = problem.h().iter().map(|&h| g2 * h + params.lambda).collect();
    let cos_j: Vec<f64> = j.iter().map(|&w| (g2 * w).cos()).collect();
    // prod over k outside {i, skip} of cos(2 gamma J_ik)
    let row_product = |i: usize, skip: usize| -> f64 {
        (0..n)
            .filter(|&k| k != i && k != skip)
            .map(|k| cos_j[i * n + k])
            .product()
    };
    let mut energy = 0.0;
    for (i, &h) in problem.h().iter().enumerate() {
        if h != 0.0 {
            let x_i = a[i].cos() * row_product(i, i);
            energy -= h * sin_t * x_i;
        }
    }
    for &(i, k, w) in problem.couplings() {
        let sin_w = (g2 * w).sin();
        let z_i_x_k = -a[k].sin() * sin_w * row_product(k, i);
        let x_i_z_k = -a[i].sin() * sin_w * row_product(i, k);
        let (mut plus, mut minus) = (1.0, 1.0);
        for m in 0..n {
            if m != i && m != k {
                let (ji, jk) = (j[i * n + m], j[k * n + m]);
                if ji != 0.0 || jk != 0.0 {
                    plus *= (g2 * (ji + jk)).cos();
                    minus *= (g2 * (ji - jk)).cos();
                }
            }
        }
        let x_i_x_k = 0.5 * ((a[i] + a[k]).cos() * plus + (a[i] - a[k]).cos() * minus);
        energy += w * (sin_t * sin_t * x_i_x_k - sin_t * cos_t * (z_i_x_k + x_i_z_k));
    }
    energy
}

pub fn probabilities(state: &QuantumState) -> Vec<f64> {
    state.amplitudes.iter().map(|a| a.norm_sqr()).collect()
}

/// `<psi|E|psi>`.
pub fn expectation_energy(state: &QuantumState, spectrum: &Spectrum) -> Result<f64> {
    check_dims(state, spectrum)?;
    Ok(mean_energy(&state.amplitudes, spectrum.energies()))
}

pub(crate) fn mean_energy(amps: &[Complex64], energies: &[f64]) -> f64 {
    amps.iter().zip(energies).map(|(a, &e)| a.norm_sqr() * e).sum()
}

/// Ground-state probability relative to uniform sampling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Enhancement {
    /// `p[ground_index] * 2^n`.
    pub xi: f64,
    /// Same, summed over every configuration within `1e-9` of `e_min`.
    pub xi_degenerate: f64,
}

pub fn ground_state_enhancement(state: &QuantumState, spectrum: &Spectrum) -> Result<Enhancement> {
    check_dims(state, spectrum)?;
    let dim = spectrum.dim() as f64;
    let xi = state.amplitudes[spectrum.ground_index()].norm_sqr() * dim;
    let xi_degenerate = spectrum
        .ground_set(1e-9)
        .into_iter()
        .map(|x| state.amplitudes[x].norm_sqr())
        .sum::<f64>()
        * dim;
    Ok(Enhancement { xi, xi_degenerate })
}

fn check_dims(state: &QuantumState, spectrum: &Spectrum) -> Result<()> {
    if state.n != spectrum.n() {
        return Err(Error::SizeMismatch {
            expected: spectrum.n(),
            actual: state.n,
        });
    }
    Ok(())
}

/// JSON header accompanying a binary amplitude dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateDumpHeader {
    pub n: usize,
    pub params: CircuitParams,
    pub problem_seed: u64,
}

/// Writes `<stem>.bin` (little-endian `re, im` pairs) and `<stem>.json`.
pub fn write_state_dump(stem: &Path, state: &QuantumState, header: &StateDumpHeader) -> Result<()> {
    let mut bytes = Vec::with_capacity(state.amplitudes.len() * 16);
    for a in &state.amplitudes {
        bytes.extend_from_slice(&a.re.to_le_bytes());
        bytes.extend_from_slice(&a.im.to_le_bytes());
    }
    std::fs::File::create(stem.with_extension("bin"))?.write_all(&bytes)?;
    std::fs::write(stem.with_extension("json"), serde_json::to_string_pretty(header)?)?;
    Ok(())
}

pub fn read_state_dump(stem: &Path) -> Result<(StateDumpHeader, QuantumState)> {
    let header: StateDumpHeader = serde_json::from_str(&std::fs::read_to_string(stem.with_extension("json"))?)?;
    let mut bytes = Vec::new();
    std::fs::File::open(stem.with_extension("bin"))?.read_to_end(&mut bytes)?;
    let amplitudes = bytes
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().unwrap());
            let im = f64::from_le_bytes(c[8..].try_into().unwrap());
            Complex64::new(re, im)
        })
        .collect();
    let state = QuantumState::from_amplitudes(header.n, amplitudes)?;
    Ok((header, state))
}
