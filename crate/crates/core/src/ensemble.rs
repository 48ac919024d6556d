//! Per-replica building blocks shared by ensemble drivers.

use serde::{Deserialize, Serialize};

use crate::angles::{optimize_angles, OptResult};
use crate::error::Result;
use crate::graph::{gen_gnm_graph, gen_regular_graph};
use crate::interferometer::{covariance_all, fit_covariance_law, CovarianceLaw, CovarianceProfile};
use crate::mcmc::{compare, MixingComparison};
use crate::problem::{build_problem, operator_norm, Family, GraphMeta, IsingProblem};
use crate::seed::{replica_seed, stage_seed};
use crate::sim::{ground_state_enhancement, prepare_from_spectrum, probabilities, Enhancement};
use crate::spectrum::{full_spectrum, Spectrum};
use crate::thermo::{fit_instance, BoltzmannFit, InstanceRecord};

/// Problem for replica `replica` of the `(family, graph, n)` ensemble. The
/// graph and the couplings draw from separate sub-streams of the replica seed.
pub fn replica_problem(
    family: Family,
    graph: GraphMeta,
    n: usize,
    sigma2: f64,
    master_seed: u64,
    replica: usize,
) -> Result<IsingProblem> {
    let seed = replica_seed(master_seed, family, n, replica);
    let g = match graph {
        GraphMeta::Gnm { density } => gen_gnm_graph(n, density, stage_seed(seed, "graph"))?,
        GraphMeta::Regular { degree } => gen_regular_graph(n, degree, stage_seed(seed, "graph"))?,
    };
    build_problem(family, &g, graph, sigma2, stage_seed(seed, "couplings"))
}

/// Everything computed for one instance at its optimal angles.
#[derive(Debug, Clone)]
pub struct InstanceAnalysis {
    pub spectrum: Spectrum,
    pub opt: OptResult,
    pub probabilities: Vec<f64>,
    pub fit: BoltzmannFit,
    pub enhancement: Enhancement,
    pub norm_j: f64,
    /// Present when requested and the problem fits the covariance cap.
    pub covariance: Option<(CovarianceProfile, CovarianceLaw)>,
    /// Absent when `J` vanishes.
    pub mixing: Option<MixingComparison>,
}

impl InstanceAnalysis {
    pub fn record(&self, seed: u64) -> InstanceRecord {
        InstanceRecord {
            seed,
            beta: self.fit.beta,
            ci99: self.fit.ci99_halfwidth,
            r2: self.fit.r2,
            xi: self.enhancement.xi,
            gamma_opt: self.opt.gamma_opt,
            theta_opt: self.opt.theta_opt,
            e_min: self.spectrum.e_min(),
            e_max: self.spectrum.e_max(),
            norm_j: self.norm_j,
        }
    }
}

/// Spectrum, angle optimization, state, Boltzmann fit, enhancement and
/// mixing comparison; the covariance law on request.
pub fn analyze_instance(problem: &IsingProblem, lambda: f64, with_covariance: bool) -> Result<InstanceAnalysis> {
    let spectrum = full_spectrum(problem)?;
    let opt = optimize_angles(problem, &spectrum, lambda)?;
    analyze_at(problem, spectrum, opt, with_covariance)
}

/// Same as [`analyze_instance`] at given angles.
pub fn analyze_at(
    problem: &IsingProblem,
    spectrum: Spectrum,
    opt: OptResult,
    with_covariance: bool,
) -> Result<InstanceAnalysis> {
    let state = prepare_from_spectrum(&spectrum, opt.params());
    let probs = probabilities(&state);
    let fit = fit_instance(&probs, &spectrum)?;
    let enhancement = ground_state_enhancement(&state, &spectrum)?;
    let covariance = if with_covariance && spectrum.n() <= crate::interferometer::COVARIANCE_MAX_QUBITS {
        let profile = covariance_all(&spectrum, problem.is_z2_symmetric())?;
        let law = fit_covariance_law(&profile.sigma_eh, &spectrum, opt.params())?;
        Some((profile, law))
    } else {
        None
    };
    let norm_j = operator_norm(problem);
    let mixing = if norm_j > 0.0 {
        Some(compare(problem, fit.beta)?)
    } else {
        None
    };
    Ok(InstanceAnalysis {
        spectrum,
        opt,
        probabilities: probs,
        fit,
        enhancement,
        norm_j,
        covariance,
        mixing,
    })
}

/// Compact per-instance covariance summary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceRecord {
    pub seed: u64,
    pub c: f64,
    pub correlation: f64,
    pub fit_r2: f64,
    pub beta_predicted: f64,
    pub beta_fitted: f64,
}
