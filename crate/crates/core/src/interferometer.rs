//! The single-layer circuit read as an interferometer in energy space.
//!
//! The output amplitude of configuration `x` is a sum over every `x'`
//! weighted by `cos(theta/2)^(N-H) (e^{-i lambda} sin(theta/2))^H` with
//! `H = H(x, x')` the Hamming distance, and phase `e^{-i gamma E_x'}`.
//! Treating the pairs `(H(x, x'), E_x')` as samples of a joint distribution
//! `p(H, E; x)` and approximating it by one Gaussian (or two mirrored
//! Gaussians when `E(s) = E(-s)`) yields closed forms for `ln |F(x)|^2` whose
//! only significant `x` dependence is `-2 gamma lambda sigma_EH(x)`, the
//! covariance between Hamming distance and energy seen from `x`.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::sim::CircuitParams;
use crate::spectrum::Spectrum;
use crate::stats::{linear_fit, LinearFit};

/// Largest `N` for the `O(2^N)`-per-configuration exact routines.
pub const EXACT_SUM_MAX_QUBITS: usize = 16;
/// Largest `N` for [`covariance_all`].
pub const COVARIANCE_MAX_QUBITS: usize = 20;

/// `theta` rewritten as the log-weight `r = -ln tan(theta/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReparamAngles {
    pub r: f64,
    pub lambda: f64,
    pub gamma: f64,
}

impl ReparamAngles {
    pub fn from_params(params: CircuitParams) -> Result<Self> {
        let theta = params.theta;
        if !(theta > 0.0 && theta < std::f64::consts::PI) {
            return Err(invalid(format!("theta = {theta} is outside (0, pi)")));
        }
        Ok(Self {
            r: -(0.5 * theta).tan().ln(),
            lambda: params.lambda,
            gamma: params.gamma,
        })
    }
}

fn check_cap(n: usize, cap: usize, what: &str) -> Result<()> {
    if n > cap {
        return Err(Error::Resource(format!("{what} is limited to {cap} spins, got {n}")));
    }
    Ok(())
}

/// Hamming-shell weights `cos^(N-H) (e^{-i lambda} sin)^H` for `H = 0..=N`.
fn shell_weights(n: usize, params: CircuitParams) -> Vec<Complex64> {
    let (s, c) = (0.5 * params.theta).sin_cos();
    let flip = Complex64::from_polar(s, -params.lambda);
    (0..=n).map(|h| flip.powu(h as u32) * c.powi((n - h) as i32)).collect()
}

/// The interference sum for `F(x)` evaluated term by term.
///
/// The sum attaches the same phase `e^{-i lambda}` to every flipped bit. The
/// circuit attaches `e^{-i lambda}` to flips in one direction and
/// `-e^{+i lambda}` to the other, so the two agree (up to a phase per `x`)
/// exactly when `lambda` is an odd multiple of `pi/2`, which covers the
/// QAOA directions `lambda = +-pi/2`.
pub fn exact_amplitude(x: usize, spectrum: &Spectrum, params: CircuitParams) -> Result<Complex64> {
    let n = spectrum.n();
    check_cap(n, EXACT_SUM_MAX_QUBITS, "exact interference sum")?;
    let weights = shell_weights(n, params);
    Ok(sum_for(x, spectrum, &weights, params.gamma))
}

fn sum_for(x: usize, spectrum: &Spectrum, weights: &[Complex64], gamma: f64) -> Complex64 {
    let norm = (0.5f64).powf(spectrum.n() as f64 / 2.0);
    let total: Complex64 = spectrum
        .energies()
        .iter()
        .enumerate()
        .map(|(xp, &e)| weights[(x ^ xp).count_ones() as usize] * Complex64::from_polar(1.0, -gamma * e))
        .sum();
    total * norm
}

/// `|F(x)|^2` from the interference sum for every configuration (`O(4^N)`).
pub fn exact_probabilities(spectrum: &Spectrum, params: CircuitParams) -> Result<Vec<f64>> {
    let n = spectrum.n();
    check_cap(n, EXACT_SUM_MAX_QUBITS, "exact interference sum")?;
    let weights = shell_weights(n, params);
    let phases: Vec<Complex64> = spectrum
        .energies()
        .iter()
        .map(|&e| Complex64::from_polar(1.0, -params.gamma * e))
        .collect();
    let norm = (0.5f64).powf(n as f64);
    Ok((0..spectrum.dim())
        .map(|x| {
            let f: Complex64 = phases
                .iter()
                .enumerate()
                .map(|(xp, ph)| weights[(x ^ xp).count_ones() as usize] * ph)
                .sum();
            f.norm_sqr() * norm
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointPoint {
    pub h: u32,
    pub e: f64,
    pub weight: f64,
}

/// `p(H, E; x) = 2^{-N} sum_{x'} delta(H - H(x, x')) delta(E - E_x')`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    pub n: usize,
    pub points: Vec<JointPoint>,
}

impl JointDistribution {
    /// Total weight per Hamming distance `0..=N`.
    pub fn marginal_h(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.n + 1];
        for p in &self.points {
            m[p.h as usize] += p.weight;
        }
        m
    }

    pub fn total_mass(&self) -> f64 {
        self.points.iter().map(|p| p.weight).sum()
    }
}

pub fn joint_distribution(x: usize, spectrum: &Spectrum) -> Result<JointDistribution> {
    let n = spectrum.n();
    check_cap(n, EXACT_SUM_MAX_QUBITS, "joint distribution")?;
    let w = 1.0 / spectrum.dim() as f64;
    let points = spectrum
        .energies()
        .iter()
        .enumerate()
        .map(|(xp, &e)| JointPoint {
            h: (x ^ xp).count_ones(),
            e,
            weight: w,
        })
        .collect();
    Ok(JointDistribution { n, points })
}

/// Which part of `p(H, E; x)` a set of moments describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Hierarchy {
    /// The whole distribution.
    Single,
    /// Configurations with `H <= N/2` (ties included).
    Plus,
    /// Configurations with `H > N/2`.
    Minus,
}

impl Hierarchy {
    fn contains(self, h: u32, n: usize) -> bool {
        match self {
            Hierarchy::Single => true,
            Hierarchy::Plus => 2 * h as usize <= n,
            Hierarchy::Minus => 2 * h as usize > n,
        }
    }
}

/// Moments of `p(H, E; x)` (or of one hierarchy, normalized to unit mass).
/// Energies are centred at the spectrum mean before anything is computed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointMoments {
    pub mu_e: f64,
    pub sigma_e: f64,
    pub mu_h: f64,
    pub sigma_h: f64,
    pub sigma_eh: f64,
    pub rho: f64,
    pub hierarchy: Hierarchy,
    /// `N/2 - mu_H(Plus)`; zero for [`Hierarchy::Single`].
    pub h0: f64,
    /// Fraction of configurations in this hierarchy.
    pub mass: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MomentsResult {
    Single(JointMoments),
    Split { plus: JointMoments, minus: JointMoments },
}

#[derive(Default)]
struct Sums {
    count: f64,
    h: f64,
    hh: f64,
    e: f64,
    ee: f64,
    he: f64,
}

impl Sums {
    fn push(&mut self, h: f64, e: f64) {
        self.count += 1.0;
        self.h += h;
        self.hh += h * h;
        self.e += e;
        self.ee += e * e;
        self.he += h * e;
    }

    fn moments(&self, hierarchy: Hierarchy, total: f64) -> JointMoments {
        let k = self.count.max(1.0);
        let mu_h = self.h / k;
        let mu_e = self.e / k;
        let var_h = (self.hh / k - mu_h * mu_h).max(0.0);
        let var_e = (self.ee / k - mu_e * mu_e).max(0.0);
        let sigma_eh = self.he / k - mu_h * mu_e;
        let denom = (var_h * var_e).sqrt();
        JointMoments {
            mu_e,
            sigma_e: var_e.sqrt(),
            mu_h,
            sigma_h: var_h.sqrt(),
            sigma_eh,
            rho: if denom > 0.0 {
                (sigma_eh / denom).clamp(-1.0, 1.0)
            } else {
                0.0
            },
            hierarchy,
            h0: 0.0,
            mass: self.count / total,
        }
    }
}

/// Exact moments by direct enumeration over `x'`. With `degenerate` set,
/// the samples are split at `H = N/2` into the Plus and Minus hierarchies.
pub fn moments(x: usize, spectrum: &Spectrum, degenerate: bool) -> Result<MomentsResult> {
    let n = spectrum.n();
    check_cap(n, COVARIANCE_MAX_QUBITS, "moment enumeration")?;
    let mean = spectrum.mean();
    let total = spectrum.dim() as f64;
    if !degenerate {
        let mut s = Sums::default();
        for (xp, &e) in spectrum.energies().iter().enumerate() {
            s.push((x ^ xp).count_ones() as f64, e - mean);
        }
        return Ok(MomentsResult::Single(s.moments(Hierarchy::Single, total)));
    }
    let mut plus = Sums::default();
    let mut minus = Sums::default();
    for (xp, &e) in spectrum.energies().iter().enumerate() {
        let h = (x ^ xp).count_ones();
        if Hierarchy::Plus.contains(h, n) {
            plus.push(h as f64, e - mean);
        } else {
            minus.push(h as f64, e - mean);
        }
    }
    let mut p = plus.moments(Hierarchy::Plus, total);
    let mut m = minus.moments(Hierarchy::Minus, total);
    let h0 = 0.5 * n as f64 - p.mu_h;
    p.h0 = h0;
    m.h0 = h0;
    Ok(MomentsResult::Split { plus: p, minus: m })
}

/// `sigma_EH(x)` for every configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceProfile {
    pub degenerate: bool,
    /// Full-distribution covariance, or the Plus-hierarchy covariance for
    /// degenerate problems.
    pub sigma_eh: Vec<f64>,
    pub sigma_eh_minus: Option<Vec<f64>>,
    pub h0: Option<f64>,
}

/// `sigma_EH(x)` for all `x` in `O(N 2^N)`.
///
/// Non-degenerate: with centred energies, `sum_x' H(x,x') E_x'` equals
/// `sum_i [x_i (S - S_i) + (1 - x_i) S_i]`, where `S_i` sums the energies of
/// configurations with bit `i` set.
///
/// Degenerate: each hierarchy sum is an XOR convolution
/// `sum_d k(d) f(x ^ d)` with a kernel `k` depending only on `popcount(d)`,
/// evaluated with fast Walsh–Hadamard transforms. [`covariance_direct`] is the
/// `O(4^N)` reference.
pub fn covariance_all(spectrum: &Spectrum, degenerate: bool) -> Result<CovarianceProfile> {
    let n = spectrum.n();
    check_cap(n, COVARIANCE_MAX_QUBITS, "covariance profile")?;
    let dim = spectrum.dim();
    let mean = spectrum.mean();
    let centred: Vec<f64> = spectrum.energies().iter().map(|e| e - mean).collect();
    if !degenerate {
        let total: f64 = centred.iter().sum();
        let mut bit_sums = vec![0.0; n];
        for (x, &e) in centred.iter().enumerate() {
            for (i, s) in bit_sums.iter_mut().enumerate() {
                if (x >> i) & 1 == 1 {
                    *s += e;
                }
            }
        }
        let mu_e = total / dim as f64;
        let mu_h = 0.5 * n as f64;
        let sigma_eh = (0..dim)
            .map(|x| {
                let he: f64 = (0..n)
                    .map(|i| {
                        if (x >> i) & 1 == 1 {
                            total - bit_sums[i]
                        } else {
                            bit_sums[i]
                        }
                    })
                    .sum();
                he / dim as f64 - mu_h * mu_e
            })
            .collect();
        return Ok(CovarianceProfile {
            degenerate,
            sigma_eh,
            sigma_eh_minus: None,
            h0: None,
        });
    }

    let plus_kernel: Vec<f64> = (0..dim)
        .map(|d| {
            if Hierarchy::Plus.contains((d as u64).count_ones(), n) {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    let pc = |d: usize| (d as u64).count_ones() as f64;
    let plus_count: f64 = plus_kernel.iter().sum();
    let minus_count = dim as f64 - plus_count;
    let plus_h: f64 = (0..dim).map(|d| plus_kernel[d] * pc(d)).sum();
    let all_h = 0.5 * n as f64 * dim as f64;
    let mu_h_plus = plus_h / plus_count;
    let mu_h_minus = (all_h - plus_h) / minus_count;

    let mut e_hat = centred.clone();
    fwht(&mut e_hat);
    let mut k_plus = plus_kernel.clone();
    fwht(&mut k_plus);
    let mut kh_plus: Vec<f64> = (0..dim).map(|d| plus_kernel[d] * pc(d)).collect();
    fwht(&mut kh_plus);
    let mut kh_all: Vec<f64> = (0..dim).map(pc).collect();
    fwht(&mut kh_all);
    let e_total: f64 = centred.iter().sum();

    let convolve = |kernel_hat: &[f64]| -> Vec<f64> {
        let mut v: Vec<f64> = kernel_hat.iter().zip(&e_hat).map(|(a, b)| a * b).collect();
        fwht(&mut v);
        let scale = 1.0 / dim as f64;
        v.iter_mut().for_each(|a| *a *= scale);
        v
    };
    let e_plus = convolve(&k_plus);
    let he_plus = convolve(&kh_plus);
    let he_all = convolve(&kh_all);

    let mut sigma_plus = Vec::with_capacity(dim);
    let mut sigma_minus = Vec::with_capacity(dim);
    for x in 0..dim {
        let mu_e_plus = e_plus[x] / plus_count;
        let mu_e_minus = (e_total - e_plus[x]) / minus_count;
        sigma_plus.push(he_plus[x] / plus_count - mu_h_plus * mu_e_plus);
        sigma_minus.push((he_all[x] - he_plus[x]) / minus_count - mu_h_minus * mu_e_minus);
    }
    Ok(CovarianceProfile {
        degenerate,
        sigma_eh: sigma_plus,
        sigma_eh_minus: Some(sigma_minus),
        h0: Some(0.5 * n as f64 - mu_h_plus),
    })
}

/// Reference covariance profile by explicit enumeration of every pair.
pub fn covariance_direct(spectrum: &Spectrum, degenerate: bool) -> Result<CovarianceProfile> {
    check_cap(spectrum.n(), EXACT_SUM_MAX_QUBITS, "direct covariance")?;
    let mut sigma_eh = Vec::with_capacity(spectrum.dim());
    let mut minus = Vec::new();
    let mut h0 = None;
    for x in 0..spectrum.dim() {
        match moments(x, spectrum, degenerate)? {
            MomentsResult::Single(m) => sigma_eh.push(m.sigma_eh),
            MomentsResult::Split { plus, minus: m } => {
                sigma_eh.push(plus.sigma_eh);
                minus.push(m.sigma_eh);
                h0 = Some(plus.h0);
            }
        }
    }
    Ok(CovarianceProfile {
        degenerate,
        sigma_eh,
        sigma_eh_minus: degenerate.then_some(minus),
        h0,
    })
}

/// In-place unnormalized fast Walsh–Hadamard transform.
fn fwht(v: &mut [f64]) {
    let len = v.len();
    let mut h = 1;
    while h < len {
        for block in v.chunks_exact_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        h *= 2;
    }
}

/// Linear law `sigma_EH(x) = -c E_x + omega` and the inverse temperature it
/// implies, `beta = -2 c gamma lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceLaw {
    pub c: f64,
    pub intercept: f64,
    /// Standard deviation of the residuals `omega`.
    pub omega_std: f64,
    pub fit_r2: f64,
    pub correlation: f64,
    pub beta_predicted: f64,
}

/// Least squares of `sigma_EH(x)` against the raw energies `E_x`.
pub fn fit_covariance_law(sigma_eh: &[f64], spectrum: &Spectrum, params: CircuitParams) -> Result<CovarianceLaw> {
    if sigma_eh.len() != spectrum.dim() {
        return Err(Error::SizeMismatch {
            expected: spectrum.dim(),
            actual: sigma_eh.len(),
        });
    }
    if sigma_eh.len() < 4 {
        return Err(Error::InsufficientData("covariance law needs at least 4 points".into()));
    }
    let lf = linear_fit(spectrum.energies(), sigma_eh)?;
    let c = -lf.slope;
    Ok(CovarianceLaw {
        c,
        intercept: lf.intercept,
        omega_std: lf.residual_std,
        fit_r2: lf.r2,
        correlation: lf.correlation,
        beta_predicted: -2.0 * c * params.gamma * params.lambda,
    })
}

/// Replica aggregation of covariance profiles on the rescaled energy axis:
/// `sigma_EH` is recomputed in rescaled units (it is linear in `E`, so this
/// is a division by the span) and averaged per energy bin.
#[derive(Debug, Clone)]
pub struct CovarianceBins {
    sum: Vec<f64>,
    count: Vec<u64>,
}

impl CovarianceBins {
    pub fn new(bins: usize) -> Self {
        assert!(bins > 0);
        Self {
            sum: vec![0.0; bins],
            count: vec![0; bins],
        }
    }

    pub fn add(&mut self, profile: &CovarianceProfile, spectrum: &Spectrum) -> Result<()> {
        if profile.sigma_eh.len() != spectrum.dim() {
            return Err(Error::SizeMismatch {
                expected: spectrum.dim(),
                actual: profile.sigma_eh.len(),
            });
        }
        let span = spectrum.span();
        if span <= 0.0 {
            return Err(Error::DegenerateRegression("flat spectrum".into()));
        }
        let bins = self.sum.len();
        for (&e, &s) in spectrum.energies().iter().zip(&profile.sigma_eh) {
            let t = (e - spectrum.e_min()) / span;
            let k = ((t * bins as f64) as usize).min(bins - 1);
            self.sum[k] += s / span;
            self.count[k] += 1;
        }
        Ok(())
    }

    /// `(bin centre, mean rescaled sigma_EH)` for every non-empty bin.
    pub fn points(&self) -> Vec<(f64, f64)> {
        let bins = self.sum.len();
        (0..bins)
            .filter(|&k| self.count[k] > 0)
            .map(|k| ((k as f64 + 0.5) / bins as f64, self.sum[k] / self.count[k] as f64))
            .collect()
    }

    pub fn fit(&self) -> Result<LinearFit> {
        let (x, y): (Vec<f64>, Vec<f64>) = self.points().into_iter().unzip();
        linear_fit(&x, &y)
    }
}

/// `Y = -gamma^2 sigma_E^2 + (r^2 - lambda^2) sigma_H^2 - 2 r mu_H
///      - 2 gamma lambda rho sigma_E sigma_H`,
/// the Gaussian estimate of `ln |F(x)|^2` up to an `x`-independent constant.
pub fn predict_logprob_nondegenerate(m: &JointMoments, a: &ReparamAngles) -> Result<f64> {
    if m.hierarchy != Hierarchy::Single {
        return Err(invalid("non-degenerate predictor needs single-hierarchy moments"));
    }
    Ok(
        -a.gamma * a.gamma * m.sigma_e * m.sigma_e + (a.r * a.r - a.lambda * a.lambda) * m.sigma_h * m.sigma_h
            - 2.0 * a.r * m.mu_h
            - 2.0 * a.gamma * a.lambda * m.rho * m.sigma_e * m.sigma_h,
    )
}

/// Two-Gaussian estimates of `ln |F(x)|^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegeneratePrediction {
    /// `Y' + ln(cos A + cosh B)`.
    pub full: f64,
    /// `cosh B` replaced by its dominant exponential and `cos A` dropped:
    /// `Y' + |B| - ln 2`.
    pub dominant: f64,
    /// Constant-free form `Y' + beta' (rho_+ + rho_-)`, which carries the
    /// `-2 gamma lambda sigma_EH+` dependence.
    pub reduced: f64,
}

/// Degenerate (Z2-symmetric) predictor with
/// `A = 2 h0 lambda + r gamma (rho_+ + rho_-) sigma_E sigma_H`,
/// `B = 2 h0 r - gamma lambda (rho_+ + rho_-) sigma_E sigma_H` and
/// `Y' = -gamma^2 sigma_E^2 + (r^2 - lambda^2) sigma_H^2 - 2 r mu_H
///       + gamma lambda (rho_- - rho_+) sigma_E sigma_H`.
/// `sigma_E`, `sigma_H` are the Plus-hierarchy widths and
/// `mu_H = mu_H(Plus) + h0 = N/2`.
pub fn predict_logprob_degenerate(
    plus: &JointMoments,
    minus: &JointMoments,
    a: &ReparamAngles,
) -> Result<DegeneratePrediction> {
    if plus.hierarchy != Hierarchy::Plus || minus.hierarchy != Hierarchy::Minus {
        return Err(invalid("degenerate predictor needs Plus and Minus moments"));
    }
    let (se, sh) = (plus.sigma_e, plus.sigma_h);
    let mu_h = plus.mu_h + plus.h0;
    let h0 = plus.h0;
    let rho_sum = plus.rho + minus.rho;
    let y_prime = -a.gamma * a.gamma * se * se + (a.r * a.r - a.lambda * a.lambda) * sh * sh - 2.0 * a.r * mu_h
        + a.gamma * a.lambda * (minus.rho - plus.rho) * se * sh;
    let big_a = 2.0 * h0 * a.lambda + a.r * a.gamma * rho_sum * se * sh;
    let big_b = 2.0 * h0 * a.r - a.gamma * a.lambda * rho_sum * se * sh;
    let interference = big_a.cos() + big_b.cosh();
    let full = if interference > 0.0 {
        y_prime + interference.ln()
    } else {
        f64::NEG_INFINITY
    };
    let beta_prime = -a.gamma * a.lambda * se * sh;
    Ok(DegeneratePrediction {
        full,
        dominant: y_prime + big_b.abs() - std::f64::consts::LN_2,
        reduced: y_prime + beta_prime * rho_sum,
    })
}

/// Writes `x,E_x,E_rescaled,sigma_EH[,sigma_EH_plus,sigma_EH_minus,h0]`.
pub fn write_covariance_csv<W: Write>(mut out: W, spectrum: &Spectrum, profile: &CovarianceProfile) -> Result<()> {
    let rescaled = spectrum.rescaled();
    if profile.degenerate {
        writeln!(out, "x,E_x,E_rescaled,sigma_EH,sigma_EH_plus,sigma_EH_minus,h0")?;
    } else {
        writeln!(out, "x,E_x,E_rescaled,sigma_EH")?;
    }
    for x in 0..spectrum.dim() {
        let e = spectrum.energies()[x];
        let s = profile.sigma_eh[x];
        match (&profile.sigma_eh_minus, profile.h0) {
            (Some(minus), Some(h0)) if profile.degenerate => {
                writeln!(out, "{x},{e},{},{s},{s},{},{h0}", rescaled[x], minus[x])?
            }
            _ => writeln!(out, "{x},{e},{},{s}", rescaled[x])?,
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::gen_gnm_graph;
    use crate::problem::{build_problem, Family, GraphMeta};
    use crate::sim::{prepare_from_spectrum, probabilities};
    use crate::spectrum::full_spectrum;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn spectrum(n: usize, family: Family, seed: u64) -> Spectrum {
        let g = gen_gnm_graph(n, 0.9, seed).unwrap();
        let p = build_problem(family, &g, GraphMeta::Gnm { density: 0.9 }, 1.0, seed + 100).unwrap();
        full_spectrum(&p).unwrap()
    }

    fn binomial(n: usize, k: usize) -> f64 {
        (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
    }

    #[test]
    fn reparam_angles() {
        let a = ReparamAngles::from_params(CircuitParams::new(0.3, FRAC_PI_2, -FRAC_PI_2)).unwrap();
        assert!(a.r.abs() < 1e-15);
        assert!(ReparamAngles::from_params(CircuitParams::new(0.3, 0.0, 0.0)).is_err());
        assert!(ReparamAngles::from_params(CircuitParams::new(0.3, PI, 0.0)).is_err());
    }

    #[test]
    fn single_qubit_sum_matches_closed_form() {
        let delta = 0.9;
        let s = Spectrum::from_energies(1, vec![-delta / 2.0, delta / 2.0]).unwrap();
        for lambda in [FRAC_PI_2, -FRAC_PI_2] {
            for k in 0..20 {
                let (gamma, theta) = (0.2 * k as f64, 0.1 + 0.15 * k as f64);
                let params = CircuitParams::new(gamma, theta, lambda);
                for (x, spin) in [(0usize, -1.0), (1, 1.0)] {
                    let p = exact_amplitude(x, &s, params).unwrap().norm_sqr();
                    let closed = 0.5 * (1.0 - spin * theta.sin() * (gamma * delta + lambda).cos());
                    assert!((p - closed).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn sum_and_statevector_disagree_off_the_qaoa_directions() {
        let s = spectrum(4, Family::Qubo, 1);
        let params = CircuitParams::new(0.4, 1.0, 0.3);
        let sv = probabilities(&prepare_from_spectrum(&s, params));
        let ex = exact_probabilities(&s, params).unwrap();
        let gap = sv.iter().zip(&ex).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(gap > 1e-3);
    }

    #[test]
    fn zero_gamma_gives_the_uniform_state() {
        // |F(x)|^2 = 2^{-N} |cos + i sin|^{2N} = 2^{-N}
        let s = spectrum(6, Family::Qubo, 2);
        let params = CircuitParams::new(0.0, 1.1, -FRAC_PI_2);
        let ex = exact_probabilities(&s, params).unwrap();
        let sv = probabilities(&prepare_from_spectrum(&s, params));
        for (a, b) in sv.iter().zip(&ex) {
            assert!((a - 1.0 / 64.0).abs() < 1e-14);
            assert!((b - 1.0 / 64.0).abs() < 1e-14);
        }
    }

    #[test]
    fn joint_distribution_basics() {
        let n = 8;
        let s = spectrum(n, Family::MaxCut, 3);
        let x = 37;
        let jd = joint_distribution(x, &s).unwrap();
        assert!((jd.total_mass() - 1.0).abs() < 1e-12);
        let w = 1.0 / 256.0;
        assert!(jd
            .points
            .iter()
            .any(|p| p.h == 0 && p.e == s.energies()[x] && p.weight == w));
        // complement at full distance with the same energy
        assert!(jd
            .points
            .iter()
            .any(|p| p.h == n as u32 && (p.e - s.energies()[x]).abs() < 1e-12));
        for (h, m) in jd.marginal_h().into_iter().enumerate() {
            assert_eq!(m, binomial(n, h) / 256.0);
        }
    }

    #[test]
    fn full_distribution_hamming_moments() {
        let n = 10;
        let s = spectrum(n, Family::Qubo, 4);
        for x in [0, 17, 1023] {
            let MomentsResult::Single(m) = moments(x, &s, false).unwrap() else {
                panic!("expected single hierarchy");
            };
            assert!((m.mu_h - n as f64 / 2.0).abs() < 1e-12);
            assert!((m.sigma_h - (n as f64).sqrt() / 2.0).abs() < 1e-12);
            assert!(m.mu_e.abs() < 1e-9);
            assert!(m.rho.abs() <= 1.0);
        }
    }

    #[test]
    fn covariance_signs_at_extremes() {
        let s = spectrum(10, Family::Qubo, 5);
        let prof = covariance_all(&s, false).unwrap();
        assert!(prof.sigma_eh[s.ground_index()] > 0.0);
        assert!(prof.sigma_eh[s.top_index()] < 0.0);
    }

    #[test]
    fn fast_paths_match_direct_enumeration() {
        for (n, family, degenerate) in [
            (7, Family::Qubo, false),
            (8, Family::RandomIsing, false),
            (8, Family::MaxCut, true),
            (9, Family::Qubo, true),
        ] {
            let s = spectrum(n, family, n as u64);
            let fast = covariance_all(&s, degenerate).unwrap();
            let slow = covariance_direct(&s, degenerate).unwrap();
            for (a, b) in fast.sigma_eh.iter().zip(&slow.sigma_eh) {
                assert!((a - b).abs() < 1e-9);
            }
            if degenerate {
                let (fm, sm) = (fast.sigma_eh_minus.unwrap(), slow.sigma_eh_minus.unwrap());
                for (a, b) in fm.iter().zip(&sm) {
                    assert!((a - b).abs() < 1e-9);
                }
                assert!((fast.h0.unwrap() - slow.h0.unwrap()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn constant_spectrum_has_no_covariance() {
        let s = Spectrum::from_energies(5, vec![2.5; 32]).unwrap();
        for deg in [false, true] {
            assert!(covariance_all(&s, deg)
                .unwrap()
                .sigma_eh
                .iter()
                .all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn z2_symmetric_problems_have_zero_unsplit_covariance() {
        let s = spectrum(10, Family::MaxCut, 6);
        let prof = covariance_all(&s, false).unwrap();
        assert!(prof.sigma_eh.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn exact_linear_law() {
        let s = spectrum(6, Family::Qubo, 7);
        let sig: Vec<f64> = s.energies().iter().map(|e| -0.1 * e).collect();
        let law = fit_covariance_law(&sig, &s, CircuitParams::new(0.2, 1.0, -FRAC_PI_2)).unwrap();
        assert!((law.c - 0.1).abs() < 1e-12);
        assert!(law.omega_std < 1e-12);
        assert!((law.beta_predicted - 0.02 * PI).abs() < 1e-12);
        assert!(matches!(
            fit_covariance_law(
                &vec![0.0; 64],
                &Spectrum::from_energies(6, vec![1.0; 64]).unwrap(),
                CircuitParams::new(0.1, 1.0, -1.0)
            ),
            Err(Error::DegenerateRegression(_))
        ));
    }

    fn single(rho: f64) -> JointMoments {
        JointMoments {
            mu_e: 0.0,
            sigma_e: 3.0,
            mu_h: 5.0,
            sigma_h: 10f64.sqrt() / 2.0,
            sigma_eh: rho * 3.0 * 10f64.sqrt() / 2.0,
            rho,
            hierarchy: Hierarchy::Single,
            h0: 0.0,
            mass: 1.0,
        }
    }

    #[test]
    fn nondegenerate_predictor_algebra() {
        let a = ReparamAngles {
            r: 0.4,
            lambda: -FRAC_PI_2,
            gamma: 0.3,
        };
        let y1 = predict_logprob_nondegenerate(&single(0.1), &a).unwrap();
        let y2 = predict_logprob_nondegenerate(&single(0.25), &a).unwrap();
        let delta = single(0.25).sigma_eh - single(0.1).sigma_eh;
        assert!(((y2 - y1) - (-2.0 * a.gamma * a.lambda * delta)).abs() < 1e-12);

        let a0 = ReparamAngles { r: 0.0, ..a };
        let m = single(0.2);
        let expected = -a.gamma.powi(2) * 9.0
            - a.lambda.powi(2) * m.sigma_h.powi(2)
            - 2.0 * a.gamma * a.lambda * 0.2 * 3.0 * m.sigma_h;
        assert!((predict_logprob_nondegenerate(&m, &a0).unwrap() - expected).abs() < 1e-12);

        let mut plus = m;
        plus.hierarchy = Hierarchy::Plus;
        assert!(predict_logprob_nondegenerate(&plus, &a).is_err());
    }

    #[test]
    fn degenerate_predictor_reduces_at_zero_correlation() {
        let a = ReparamAngles {
            r: 0.3,
            lambda: -FRAC_PI_2,
            gamma: 0.2,
        };
        let mut plus = single(0.0);
        plus.hierarchy = Hierarchy::Plus;
        let mut minus = plus;
        minus.hierarchy = Hierarchy::Minus;
        let pred = predict_logprob_degenerate(&plus, &minus, &a).unwrap();
        let y = predict_logprob_nondegenerate(&single(0.0), &a).unwrap();
        assert!((pred.full - (y + std::f64::consts::LN_2)).abs() < 1e-12);
    }

    #[test]
    fn shuffled_energies_lose_the_covariance_structure() {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let s = spectrum(10, Family::Qubo, 8);
        let mut e = s.energies().to_vec();
        e.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(1));
        let shuffled = Spectrum::from_energies(10, e).unwrap();
        let prof = covariance_all(&shuffled, false).unwrap();
        let m = crate::stats::mean(&prof.sigma_eh);
        let se = crate::stats::std_dev(&prof.sigma_eh) / (prof.sigma_eh.len() as f64).sqrt();
        assert!(m.abs() < 5.0 * se.max(1e-12));
    }

    #[test]
    fn covariance_csv_layout() {
        let s = Spectrum::from_energies(1, vec![-1.0, 1.0]).unwrap();
        let prof = covariance_all(&s, true).unwrap();
        let mut buf = Vec::new();
        write_covariance_csv(&mut buf, &s, &prof).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("x,E_x,E_rescaled,sigma_EH,sigma_EH_plus,sigma_EH_minus,h0\n"));
        assert_eq!(text.lines().count(), 3);
    }
}
