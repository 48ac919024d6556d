//! Effective temperatures of QAOA output states.
//!
//! Per-instance fits regress `ln p(x)` on `E_x`. Ensemble fits follow the
//! rescale-bin-average protocol: every replica's energies are mapped to
//! `[0, 1]`, probabilities are accumulated into fixed bins, and the log of
//! the mean eigenstate probability per bin is regressed on the bin centre.
//! The slope is converted back to energy units with the mean span
//! `<E_max - E_min>`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{Family, GraphMeta};
use crate::spectrum::Spectrum;
use crate::stats::{ci99_of_mean, linear_fit, mean, Z99};

/// Probabilities at or below this value are left out of log fits.
pub const PROBABILITY_FLOOR: f64 = 1e-18;
pub const DEFAULT_BINS: usize = 100;
/// Bins may be empty in at most this fraction before a binned fit is refused.
pub const MAX_EMPTY_BIN_FRACTION: f64 = 0.5;

/// Straight-line fit of `ln p` against energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoltzmannFit {
    pub beta: f64,
    pub log_intercept: f64,
    pub r2: f64,
    pub beta_stderr: f64,
    /// 99% confidence half-width on `beta` (normal quantile 2.576).
    pub ci99_halfwidth: f64,
    pub n_points: usize,
}

impl BoltzmannFit {
    /// True when `|beta|` lies inside its own 99% interval around zero.
    pub fn consistent_with_zero(&self) -> bool {
        self.beta.abs() <= self.ci99_halfwidth
    }
}

fn fit_log_linear(x: &[f64], p: &[f64]) -> Result<BoltzmannFit> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = x
        .iter()
        .zip(p)
        .filter(|(_, &q)| q > PROBABILITY_FLOOR)
        .map(|(&e, &q)| (e, q.ln()))
        .unzip();
    if xs.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "only {} probabilities above the {PROBABILITY_FLOOR:e} floor",
            xs.len()
        )));
    }
    let lf = linear_fit(&xs, &ys)?;
    Ok(BoltzmannFit {
        beta: -lf.slope,
        log_intercept: lf.intercept,
        r2: lf.r2,
        beta_stderr: lf.slope_stderr,
        ci99_halfwidth: Z99 * lf.slope_stderr,
        n_points: lf.n,
    })
}

/// Unweighted least squares of `ln p[x]` on `E_x` over every `p[x]` above
/// [`PROBABILITY_FLOOR`]; `beta` is minus the slope.
pub fn fit_instance(probabilities: &[f64], spectrum: &Spectrum) -> Result<BoltzmannFit> {
    if probabilities.len() != spectrum.dim() {
        return Err(Error::SizeMismatch {
            expected: spectrum.dim(),
            actual: probabilities.len(),
        });
    }
    fit_log_linear(spectrum.energies(), probabilities)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinRow {
    pub center: f64,
    /// Probability mass summed over replicas.
    pub mass: f64,
    /// Number of eigenstates (over all replicas) that fell in the bin.
    pub count: u64,
    /// `mass / count`.
    pub mean_probability: f64,
}

/// Streaming accumulator for the replica-binned fit.
#[derive(Debug, Clone)]
pub struct BinAccumulator {
    mass: Vec<f64>,
    count: Vec<u64>,
    spans: Vec<f64>,
    n: Option<usize>,
}

impl BinAccumulator {
    pub fn new(bins: usize) -> Self {
        assert!(bins > 0, "need at least one bin");
        Self {
            mass: vec![0.0; bins],
            count: vec![0; bins],
            spans: Vec::new(),
            n: None,
        }
    }

    pub fn bins(&self) -> usize {
        self.mass.len()
    }

    pub fn replicas(&self) -> usize {
        self.spans.len()
    }

    /// Total accumulated mass; equals the number of replicas for normalized
    /// inputs.
    pub fn total_mass(&self) -> f64 {
        self.mass.iter().sum()
    }

    pub fn add(&mut self, probabilities: &[f64], spectrum: &Spectrum) -> Result<()> {
        if probabilities.len() != spectrum.dim() {
            return Err(Error::SizeMismatch {
                expected: spectrum.dim(),
                actual: probabilities.len(),
            });
        }
        match self.n {
            None => self.n = Some(spectrum.n()),
            Some(n) if n != spectrum.n() => {
                return Err(Error::SizeMismatch {
                    expected: n,
                    actual: spectrum.n(),
                })
            }
            _ => {}
        }
        let span = spectrum.span();
        if span <= 0.0 {
            return Err(Error::DegenerateRegression("flat spectrum cannot be rescaled".into()));
        }
        let bins = self.bins();
        let mut local = vec![0.0; bins];
        for (&e, &p) in spectrum.energies().iter().zip(probabilities) {
            let k = bin_index((e - spectrum.e_min()) / span, bins);
            local[k] += p;
            self.count[k] += 1;
        }
        for (m, l) in self.mass.iter_mut().zip(local) {
            *m += l;
        }
        self.spans.push(span);
        Ok(())
    }

    /// Folds `other` into `self`. Merging single-replica accumulators in
    /// replica order gives exactly the same sums as calling [`Self::add`]
    /// sequentially, whatever thread produced each one.
    pub fn merge(&mut self, other: &BinAccumulator) -> Result<()> {
        if other.bins() != self.bins() {
            return Err(Error::SizeMismatch {
                expected: self.bins(),
                actual: other.bins(),
            });
        }
        match (self.n, other.n) {
            (Some(a), Some(b)) if a != b => return Err(Error::SizeMismatch { expected: a, actual: b }),
            (None, b) => self.n = b,
            _ => {}
        }
        for k in 0..self.bins() {
            self.mass[k] += other.mass[k];
            self.count[k] += other.count[k];
        }
        self.spans.extend_from_slice(&other.spans);
        Ok(())
    }

    pub fn rows(&self) -> Vec<BinRow> {
        let bins = self.bins();
        (0..bins)
            .map(|k| BinRow {
                center: (k as f64 + 0.5) / bins as f64,
                mass: self.mass[k],
                count: self.count[k],
                mean_probability: if self.count[k] > 0 {
                    self.mass[k] / self.count[k] as f64
                } else {
                    0.0
                },
            })
            .collect()
    }

    pub fn finish(&self) -> Result<ReplicaFit> {
        if self.replicas() == 0 {
            return Err(Error::InsufficientData("no replicas accumulated".into()));
        }
        let rows = self.rows();
        let empty = rows.iter().filter(|r| r.count == 0).count();
        let empty_fraction = empty as f64 / rows.len() as f64;
        if empty_fraction > MAX_EMPTY_BIN_FRACTION {
            return Err(Error::InsufficientData(format!(
                "{empty} of {} bins are empty ({:.0}% > {:.0}%)",
                rows.len(),
                100.0 * empty_fraction,
                100.0 * MAX_EMPTY_BIN_FRACTION
            )));
        }
        let (centers, means): (Vec<f64>, Vec<f64>) = rows
            .iter()
            .filter(|r| r.count > 0)
            .map(|r| (r.center, r.mean_probability))
            .unzip();
        let rescaled = fit_log_linear(&centers, &means)?;
        let mean_span = mean(&self.spans);
        let fit = BoltzmannFit {
            beta: rescaled.beta / mean_span,
            log_intercept: rescaled.log_intercept,
            r2: rescaled.r2,
            beta_stderr: rescaled.beta_stderr / mean_span,
            ci99_halfwidth: rescaled.ci99_halfwidth / mean_span,
            n_points: rescaled.n_points,
        };
        Ok(ReplicaFit {
            fit,
            rescaled_slope: -rescaled.beta,
            mean_span,
            empty_fraction,
            replicas: self.replicas(),
            bins: rows,
        })
    }
}

fn bin_index(rescaled: f64, bins: usize) -> usize {
    ((rescaled * bins as f64).floor().max(0.0) as usize).min(bins - 1)
}

/// Replica-binned Boltzmann fit. `fit.beta` is in inverse energy units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaFit {
    pub fit: BoltzmannFit,
    /// Slope of `ln <P>` on the rescaled energy axis.
    pub rescaled_slope: f64,
    pub mean_span: f64,
    pub empty_fraction: f64,
    pub replicas: usize,
    pub bins: Vec<BinRow>,
}

/// Convenience wrapper around [`BinAccumulator`].
pub fn fit_replicas(instances: &[(&[f64], &Spectrum)], bins: usize) -> Result<ReplicaFit> {
    if instances.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "replica fit needs at least 2 instances, got {}",
            instances.len()
        )));
    }
    let mut acc = BinAccumulator::new(bins);
    for (p, s) in instances {
        acc.add(p, s)?;
    }
    acc.finish()
}

/// Per-instance results, one row of the instance table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub seed: u64,
    pub beta: f64,
    pub ci99: f64,
    pub r2: f64,
    pub xi: f64,
    pub gamma_opt: f64,
    pub theta_opt: f64,
    pub e_min: f64,
    pub e_max: f64,
    pub norm_j: f64,
}

/// Ensemble statistics for one `(family, graph, n)` point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaSummary {
    pub family: Family,
    pub graph_meta: GraphMeta,
    pub n: usize,
    pub sigma2: f64,
    pub replicas: usize,
    /// Mean of per-instance `beta` with its 99% half-width.
    pub beta_mean: f64,
    pub beta_ci99: f64,
    pub beta_median: f64,
    pub binned_beta: Option<f64>,
    pub binned_beta_ci99: Option<f64>,
    pub binned_r2: Option<f64>,
    pub xi_geometric_mean: f64,
    pub xi_arithmetic_mean: f64,
    /// 99% half-width of the mean of `ln xi`.
    pub xi_ci99: f64,
    pub theta_opt_mean: f64,
    pub gamma_opt_mean: f64,
    pub mean_span: f64,
    pub probability_floor: f64,
    pub weighting: String,
}

impl ReplicaSummary {
    pub fn from_records(
        family: Family,
        graph_meta: GraphMeta,
        n: usize,
        sigma2: f64,
        records: &[InstanceRecord],
        binned: Option<&ReplicaFit>,
    ) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::InsufficientData("summary needs at least one replica".into()));
        }
        let col = |f: fn(&InstanceRecord) -> f64| records.iter().map(f).collect::<Vec<_>>();
        let betas = col(|r| r.beta);
        let xis = col(|r| r.xi);
        let log_xi: Vec<f64> = xis.iter().map(|x| x.ln()).collect();
        Ok(Self {
            family,
            graph_meta,
            n,
            sigma2,
            replicas: records.len(),
            beta_mean: mean(&betas),
            beta_ci99: ci99_of_mean(&betas),
            beta_median: crate::stats::median(&betas),
            binned_beta: binned.map(|b| b.fit.beta),
            binned_beta_ci99: binned.map(|b| b.fit.ci99_halfwidth),
            binned_r2: binned.map(|b| b.fit.r2),
            xi_geometric_mean: mean(&log_xi).exp(),
            xi_arithmetic_mean: mean(&xis),
            xi_ci99: ci99_of_mean(&log_xi),
            theta_opt_mean: mean(&col(|r| r.theta_opt)),
            gamma_opt_mean: mean(&col(|r| r.gamma_opt)),
            mean_span: mean(&col(|r| r.e_max - r.e_min)),
            probability_floor: PROBABILITY_FLOOR,
            weighting: "unweighted least squares on ln p".into(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScalingTarget {
    GammaOpt,
    Beta,
    Xi,
}

/// Predictor variable of a scaling law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScalingPredictor {
    /// Power law in `(n - 1) rho` (G(n, M) graphs).
    InvSqrtNrho,
    /// Power law in the degree `Z` (regular graphs).
    InvSqrtZ,
    /// Exponential in `n`: fits `log2 y = exponent * n + log2 prefactor`.
    SqrtTwoToN,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub exponent: f64,
    /// For the power laws this is `chi` in `y = chi x^exponent / sigma`.
    pub prefactor: f64,
    pub r2: f64,
    pub predictor: ScalingPredictor,
}

/// Log-log (or log2-linear for [`ScalingPredictor::SqrtTwoToN`]) least
/// squares over ensemble summaries.
pub fn fit_scaling(
    summaries: &[ReplicaSummary],
    target: ScalingTarget,
    predictor: ScalingPredictor,
) -> Result<ScalingFit> {
    if summaries.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "scaling fit needs at least 4 ensembles, got {}",
            summaries.len()
        )));
    }
    let mut xs = Vec::with_capacity(summaries.len());
    let mut ys = Vec::with_capacity(summaries.len());
    let mut sigmas = Vec::with_capacity(summaries.len());
    for s in summaries {
        let y = match target {
            ScalingTarget::GammaOpt => s.gamma_opt_mean,
            ScalingTarget::Beta => s.beta_mean,
            ScalingTarget::Xi => s.xi_geometric_mean,
        };
        if y.is_nan() || y <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "scaling target must be positive, got {y} at n = {}",
                s.n
            )));
        }
        let x = match (predictor, s.graph_meta) {
            (ScalingPredictor::InvSqrtNrho, GraphMeta::Gnm { density }) => ((s.n as f64 - 1.0) * density).ln(),
            (ScalingPredictor::InvSqrtZ, GraphMeta::Regular { degree }) => (degree as f64).ln(),
            (ScalingPredictor::SqrtTwoToN, _) => s.n as f64,
            (p, g) => {
                return Err(Error::InvalidArgument(format!(
                    "predictor {p:?} does not apply to graph {g}"
                )))
            }
        };
        xs.push(x);
        ys.push(match predictor {
            ScalingPredictor::SqrtTwoToN => y.log2(),
            _ => y.ln(),
        });
        sigmas.push(s.sigma2.sqrt());
    }
    let lf = linear_fit(&xs, &ys)?;
    let prefactor = match predictor {
        ScalingPredictor::SqrtTwoToN => lf.intercept.exp2(),
        _ => lf.intercept.exp() * mean(&sigmas),
    };
    Ok(ScalingFit {
        exponent: lf.slope,
        prefactor,
        r2: lf.r2,
        predictor,
    })
}
