//! Single-site Metropolis sampling of the Ising Boltzmann distribution and
//! the rapid-mixing comparison `beta_QAOA * ||J||`.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{operator_norm, IsingProblem};

/// Recorded configurations, one per sweep after burn-in.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub n: usize,
    pub beta: f64,
    pub samples: Vec<u64>,
    pub energies: Vec<f64>,
    pub accepted: u64,
    pub proposed: u64,
}

impl SampleSet {
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    /// Normalized histogram over all `2^n` configurations.
    pub fn histogram(&self) -> Vec<f64> {
        let mut h = vec![0.0; 1usize << self.n];
        for &x in &self.samples {
            h[x as usize] += 1.0;
        }
        let total = self.samples.len().max(1) as f64;
        h.iter_mut().for_each(|v| *v /= total);
        h
    }

    /// Integrated autocorrelation time of the energy series, summed until
    /// the autocorrelation first drops below zero.
    pub fn energy_autocorrelation_time(&self) -> f64 {
        let e = &self.energies;
        let m = e.len();
        if m < 2 {
            return 1.0;
        }
        let mean = e.iter().sum::<f64>() / m as f64;
        let var = e.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / m as f64;
        if var == 0.0 {
            return 1.0;
        }
        let mut tau = 1.0;
        for lag in 1..m / 2 {
            let c = (0..m - lag).map(|t| (e[t] - mean) * (e[t + lag] - mean)).sum::<f64>() / ((m - lag) as f64 * var);
            if c <= 0.0 {
                break;
            }
            tau += 2.0 * c;
        }
        tau
    }
}

/// Metropolis acceptance `min(1, e^{-beta dE})`.
pub fn acceptance_probability(beta: f64, delta_e: f64) -> f64 {
    if delta_e <= 0.0 {
        1.0
    } else {
        (-beta * delta_e).exp()
    }
}

/// One-step transition probability of a random-site sweep move
/// `x -> x ^ (1 << i)`: the site is chosen with probability `1/n`.
pub fn transition_probability(problem: &IsingProblem, beta: f64, x: u64, i: usize) -> f64 {
    let de = flip_delta(problem, x, i);
    acceptance_probability(beta, de) / problem.n() as f64
}

/// `E(x ^ (1 << i)) - E(x)`.
pub fn flip_delta(problem: &IsingProblem, x: u64, i: usize) -> f64 {
    let s = if (x >> i) & 1 == 1 { 1.0 } else { -1.0 };
    -2.0 * s * problem.local_field(x, i)
}

struct Neighbours {
    start: Vec<usize>,
    list: Vec<(usize, f64)>,
}

impl Neighbours {
    fn new(problem: &IsingProblem) -> Self {
        let n = problem.n();
        let mut adj = vec![Vec::new(); n];
        for &(i, j, w) in problem.couplings() {
            adj[i].push((j, w));
            adj[j].push((i, w));
        }
        let mut start = Vec::with_capacity(n + 1);
        let mut list = Vec::new();
        for a in adj {
            start.push(list.len());
            list.extend(a);
        }
        start.push(list.len());
        Self { start, list }
    }

    fn of(&self, i: usize) -> &[(usize, f64)] {
        &self.list[self.start[i]..self.start[i + 1]]
    }
}

/// Random-order single-site Metropolis. Local fields are kept up to date so
/// each proposal costs `O(degree)`. The chain starts from a uniformly random
/// configuration and records one sample per sweep after `burn_in` sweeps.
pub fn metropolis_sample(problem: &IsingProblem, beta: f64, n_sweeps: usize, burn_in: usize, seed: u64) -> SampleSet {
    assert!(beta >= 0.0, "beta must be non-negative");
    assert!(n_sweeps >= 1, "at least one sweep");
    let n = problem.n();
    let nb = Neighbours::new(problem);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: u64 = if n == 0 {
        0
    } else {
        rng.random::<u64>() & (u64::MAX >> (64 - n))
    };
    let mut field: Vec<f64> = (0..n).map(|i| problem.local_field(x, i)).collect();
    let mut energy = problem.energy(x);
    let mut order: Vec<usize> = (0..n).collect();
    let mut out = SampleSet {
        n,
        beta,
        samples: Vec::with_capacity(n_sweeps),
        energies: Vec::with_capacity(n_sweeps),
        accepted: 0,
        proposed: 0,
    };
    for sweep in 0..burn_in + n_sweeps {
        order.shuffle(&mut rng);
        for &i in &order {
            let s = if (x >> i) & 1 == 1 { 1.0 } else { -1.0 };
            let de = -2.0 * s * field[i];
            out.proposed += 1;
            if de <= 0.0 || rng.random::<f64>() < (-beta * de).exp() {
                out.accepted += 1;
                x ^= 1 << i;
                energy += de;
                // s_i went from s to -s
                for &(j, w) in nb.of(i) {
                    field[j] -= 2.0 * w * s;
                }
            }
        }
        if sweep >= burn_in {
            out.samples.push(x);
            out.energies.push(energy);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixingComparison {
    pub norm_j: f64,
    pub beta_mcmc_threshold: f64,
    pub beta_qaoa: f64,
    pub product: f64,
    /// `beta_QAOA ||J|| > 1`: outside the regime where fast mixing is
    /// guaranteed. This is not a hardness statement.
    pub above_threshold: bool,
}

pub fn compare(problem: &IsingProblem, beta_qaoa: f64) -> Result<MixingComparison> {
    let norm_j = operator_norm(problem);
    if norm_j <= 0.0 {
        return Err(Error::InvalidArgument("operator norm of J is zero".into()));
    }
    let product = beta_qaoa * norm_j;
    Ok(MixingComparison {
        norm_j,
        beta_mcmc_threshold: 1.0 / norm_j,
        beta_qaoa,
        product,
        above_threshold: product > 1.0,
    })
}

/// One comparison row of the CSV export.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub seed: u64,
    pub n: usize,
    pub comparison: MixingComparison,
}

pub fn write_comparison_csv<W: Write>(mut out: W, rows: &[ComparisonRow]) -> Result<()> {
    writeln!(out, "seed,N,norm_J,beta_qaoa,product,threshold")?;
    for r in rows {
        let c = &r.comparison;
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.seed, r.n, c.norm_j, c.beta_qaoa, c.product, c.beta_mcmc_threshold
        )?;
    }
    Ok(())
}
