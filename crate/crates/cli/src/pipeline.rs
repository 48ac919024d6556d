//! Ensemble driver: replicas run in parallel, results are reduced in replica
//! order so every output is independent of the worker count.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use log::{info, warn};
use pbqaoa_core::ensemble::CovarianceRecord;
use pbqaoa_core::seed::replica_seed;
use pbqaoa_core::stats::{mean, median};
use pbqaoa_core::thermo::{ScalingFit, ScalingPredictor, ScalingTarget};
use pbqaoa_core::*;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::output::{write_atomic, write_json, EnsembleEntry, EnsembleStatus, Failure, Manifest};
use crate::tables;

/// Fraction of failed replicas above which an ensemble is aborted.
pub const MAX_FAILURE_FRACTION: f64 = 0.1;

pub fn problem_stem(family: Family, n: usize, replica: usize) -> String {
    format!("{family}_n{n:02}_r{replica:04}")
}

/// File names inside an output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn problem(&self, family: Family, n: usize, r: usize) -> PathBuf {
        self.root
            .join("problems")
            .join(format!("{}.json", problem_stem(family, n, r)))
    }

    pub fn angles(&self, family: Family, n: usize, r: usize) -> PathBuf {
        self.root
            .join("angles")
            .join(format!("{}.json", problem_stem(family, n, r)))
    }

    fn per_size(&self, kind: &str, n: usize, ext: &str) -> PathBuf {
        self.root.join(format!("{kind}_n{n:02}.{ext}"))
    }

    pub fn instances(&self, n: usize) -> PathBuf {
        self.per_size("instances", n, "csv")
    }

    pub fn bins(&self, n: usize) -> PathBuf {
        self.per_size("bins", n, "csv")
    }

    pub fn covariance(&self, n: usize) -> PathBuf {
        self.per_size("covariance", n, "csv")
    }

    pub fn comparison(&self, n: usize) -> PathBuf {
        self.per_size("comparison", n, "csv")
    }

    pub fn summary(&self, n: usize) -> PathBuf {
        self.per_size("summary", n, "json")
    }

    pub fn scaling(&self) -> PathBuf {
        self.root.join("scaling.json")
    }

    fn derived(&self, n: usize) -> [PathBuf; 5] {
        [
            self.instances(n),
            self.bins(n),
            self.covariance(n),
            self.comparison(n),
            self.summary(n),
        ]
    }

    fn relative(&self, path: &Path) -> String {
        path.strip_prefix(&self.root)
            .unwrap_or(path)
            .to_string_lossy()
            .replace('\\', "/")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceSummary {
    pub instances: usize,
    pub median_relative_error: f64,
    pub mean_correlation: f64,
    pub mean_c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixingSummary {
    pub instances: usize,
    pub median_product: f64,
    pub fraction_above_threshold: f64,
    pub median_threshold: f64,
}

/// Contents of `summary_nXX.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleReport {
    pub summary: ReplicaSummary,
    /// Why the binned fit is missing, when it is.
    pub binned_note: Option<String>,
    pub covariance: Option<CovarianceSummary>,
    pub mixing: Option<MixingSummary>,
    pub failed_replicas: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingEntry {
    pub fit: Option<ScalingFit>,
    pub error: Option<String>,
}

impl From<pbqaoa_core::Result<ScalingFit>> for ScalingEntry {
    fn from(r: pbqaoa_core::Result<ScalingFit>) -> Self {
        match r {
            Ok(fit) => Self {
                fit: Some(fit),
                error: None,
            },
            Err(e) => Self {
                fit: None,
                error: Some(e.to_string()),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub sizes: Vec<usize>,
    pub gamma_opt: ScalingEntry,
    pub beta: ScalingEntry,
    pub xi: ScalingEntry,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum RunStatus {
    Success,
    /// Some replicas failed but every ensemble stayed under the threshold.
    Partial,
    /// At least one ensemble exceeded the failure threshold.
    Aborted,
}

impl RunStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Success => 0,
            RunStatus::Partial => 2,
            RunStatus::Aborted => 3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub status: RunStatus,
    pub manifest: Manifest,
}

/// Where replica inputs come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Source {
    /// Generate problems and optimize angles, writing both.
    Fresh,
    /// Read problems and angles written by an earlier run.
    Stored,
}

struct ReplicaOutput {
    record: InstanceRecord,
    covariance: Option<CovarianceRecord>,
    comparison: Option<ComparisonRow>,
    /// `None` for a flat spectrum, which cannot be placed on the rescaled axis.
    bins: Option<BinAccumulator>,
}

fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(threads).build()?)
}

fn status_of(failed: usize, requested: usize) -> EnsembleStatus {
    if failed as f64 > MAX_FAILURE_FRACTION * requested as f64 {
        EnsembleStatus::Aborted
    } else if failed > 0 {
        EnsembleStatus::Partial
    } else {
        EnsembleStatus::Complete
    }
}

fn overall(entries: &[EnsembleEntry]) -> RunStatus {
    entries
        .iter()
        .map(|e| match e.status {
            EnsembleStatus::Complete => RunStatus::Success,
            EnsembleStatus::Partial => RunStatus::Partial,
            EnsembleStatus::Aborted => RunStatus::Aborted,
        })
        .max()
        .unwrap_or(RunStatus::Success)
}

/// Runs `job` for every replica of size `n` and splits the outcomes.
fn for_each_replica<T: Send>(
    cfg: &ExperimentConfig,
    n: usize,
    job: impl Fn(usize) -> Result<T> + Sync,
) -> (Vec<(usize, T)>, Vec<Failure>) {
    let outcomes: Vec<(usize, Result<T>)> = (0..cfg.replicas).into_par_iter().map(|r| (r, job(r))).collect();
    let mut ok = Vec::new();
    let mut failures = Vec::new();
    for (r, outcome) in outcomes {
        match outcome {
            Ok(v) => ok.push((r, v)),
            Err(e) => {
                let seed = replica_seed(cfg.master_seed, cfg.family, n, r);
                warn!("n = {n}, replica {r}: {e:#}");
                failures.push(Failure {
                    n,
                    replica: r,
                    seed,
                    error: format!("{e:#}"),
                });
            }
        }
    }
    (ok, failures)
}

fn write_problem(layout: &Layout, cfg: &ExperimentConfig, n: usize, r: usize) -> Result<IsingProblem> {
    let p = replica_problem(cfg.family, cfg.graph, n, cfg.sigma2, cfg.master_seed, r)?;
    write_atomic(&layout.problem(cfg.family, n, r), p.to_json()?.as_bytes())?;
    Ok(p)
}

fn read_problem(layout: &Layout, cfg: &ExperimentConfig, n: usize, r: usize) -> Result<IsingProblem> {
    let path = layout.problem(cfg.family, n, r);
    let p = IsingProblem::read_json(&path).with_context(|| format!("reading {}", path.display()))?;
    if p.n() != n {
        return Err(anyhow!("{} holds {} spins, expected {n}", path.display(), p.n()));
    }
    Ok(p)
}

fn evaluate(
    problem: &IsingProblem,
    spectrum: Spectrum,
    opt: OptResult,
    seed: u64,
    bins: usize,
) -> Result<ReplicaOutput> {
    let a = analyze_at(problem, spectrum, opt, true)?;
    let record = a.record(seed);
    let covariance = a.covariance.as_ref().map(|(_, law)| CovarianceRecord {
        seed,
        c: law.c,
        correlation: law.correlation,
        fit_r2: law.fit_r2,
        beta_predicted: law.beta_predicted,
        beta_fitted: a.fit.beta,
    });
    let comparison = a.mixing.map(|comparison| ComparisonRow {
        seed,
        n: problem.n(),
        comparison,
    });
    let mut acc = BinAccumulator::new(bins);
    let bins = acc.add(&a.probabilities, &a.spectrum).ok().map(|_| acc);
    Ok(ReplicaOutput {
        record,
        covariance,
        comparison,
        bins,
    })
}

fn replica(layout: &Layout, cfg: &ExperimentConfig, n: usize, r: usize, source: Source) -> Result<ReplicaOutput> {
    let seed = replica_seed(cfg.master_seed, cfg.family, n, r);
    let (problem, spectrum, opt) = match source {
        Source::Fresh => {
            let p = write_problem(layout, cfg, n, r)?;
            let s = full_spectrum(&p)?;
            let opt = optimize_angles(&p, &s, cfg.lambda)?;
            write_json(&layout.angles(cfg.family, n, r), &opt)?;
            (p, s, opt)
        }
        Source::Stored => {
            let p = read_problem(layout, cfg, n, r)?;
            let s = full_spectrum(&p)?;
            let opt: OptResult = crate::output::read_json(&layout.angles(cfg.family, n, r))?;
            (p, s, opt)
        }
    };
    evaluate(&problem, spectrum, opt, seed, cfg.bins)
}

fn summarize(
    cfg: &ExperimentConfig,
    n: usize,
    outputs: &[(usize, ReplicaOutput)],
    acc: &BinAccumulator,
    failed: usize,
) -> Result<EnsembleReport> {
    let records: Vec<InstanceRecord> = outputs.iter().map(|(_, o)| o.record).collect();
    let (binned, binned_note) = match acc.finish() {
        Ok(fit) => (Some(fit), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let summary = ReplicaSummary::from_records(cfg.family, cfg.graph, n, cfg.sigma2, &records, binned.as_ref())?;

    let cov: Vec<&CovarianceRecord> = outputs.iter().filter_map(|(_, o)| o.covariance.as_ref()).collect();
    let covariance = (!cov.is_empty()).then(|| {
        let rel: Vec<f64> = cov
            .iter()
            .map(|c| ((c.beta_predicted - c.beta_fitted) / c.beta_fitted).abs())
            .collect();
        CovarianceSummary {
            instances: cov.len(),
            median_relative_error: median(&rel),
            mean_correlation: mean(&cov.iter().map(|c| c.correlation).collect::<Vec<_>>()),
            mean_c: mean(&cov.iter().map(|c| c.c).collect::<Vec<_>>()),
        }
    });

    let mix: Vec<&MixingComparison> = outputs
        .iter()
        .filter_map(|(_, o)| o.comparison.as_ref().map(|c| &c.comparison))
        .collect();
    let mixing = (!mix.is_empty()).then(|| MixingSummary {
        instances: mix.len(),
        median_product: median(&mix.iter().map(|m| m.product).collect::<Vec<_>>()),
        fraction_above_threshold: mix.iter().filter(|m| m.above_threshold).count() as f64 / mix.len() as f64,
        median_threshold: median(&mix.iter().map(|m| m.beta_mcmc_threshold).collect::<Vec<_>>()),
    });

    Ok(EnsembleReport {
        summary,
        binned_note,
        covariance,
        mixing,
        failed_replicas: failed,
    })
}

fn write_ensemble(
    layout: &Layout,
    cfg: &ExperimentConfig,
    n: usize,
    outputs: &[(usize, ReplicaOutput)],
    failed: usize,
) -> Result<EnsembleReport> {
    let records: Vec<InstanceRecord> = outputs.iter().map(|(_, o)| o.record).collect();
    let cov: Vec<CovarianceRecord> = outputs.iter().filter_map(|(_, o)| o.covariance).collect();
    let cmp: Vec<ComparisonRow> = outputs.iter().filter_map(|(_, o)| o.comparison).collect();
    let mut acc = BinAccumulator::new(cfg.bins);
    for (_, o) in outputs {
        if let Some(b) = &o.bins {
            acc.merge(b)?;
        }
    }
    let report = summarize(cfg, n, outputs, &acc, failed)?;

    write_atomic(&layout.instances(n), &tables::instances_csv(&records)?)?;
    write_atomic(&layout.bins(n), &tables::bins_csv(&acc.rows())?)?;
    write_atomic(&layout.covariance(n), &tables::covariance_csv(&cov)?)?;
    let mut buf = Vec::new();
    pbqaoa_core::mcmc::write_comparison_csv(&mut buf, &cmp)?;
    write_atomic(&layout.comparison(n), &buf)?;
    write_json(&layout.summary(n), &report)?;
    Ok(report)
}

fn scaling(cfg: &ExperimentConfig, summaries: &[ReplicaSummary]) -> ScalingReport {
    let predictor = match cfg.graph {
        GraphMeta::Gnm { .. } => ScalingPredictor::InvSqrtNrho,
        GraphMeta::Regular { .. } => ScalingPredictor::InvSqrtZ,
    };
    ScalingReport {
        sizes: summaries.iter().map(|s| s.n).collect(),
        gamma_opt: fit_scaling(summaries, ScalingTarget::GammaOpt, predictor).into(),
        beta: fit_scaling(summaries, ScalingTarget::Beta, predictor).into(),
        xi: fit_scaling(summaries, ScalingTarget::Xi, ScalingPredictor::SqrtTwoToN).into(),
    }
}

fn remove_if_present(path: &Path) -> Result<()> {
    match fs::remove_file(path) {
        Err(e) if e.kind() != std::io::ErrorKind::NotFound => Err(e.into()),
        _ => Ok(()),
    }
}

fn run(cfg: &ExperimentConfig, source: Source, command: &str) -> Result<RunReport> {
    cfg.validate()?;
    let layout = Layout::new(&cfg.out);
    fs::create_dir_all(&layout.root).with_context(|| format!("creating {}", layout.root.display()))?;
    let mut manifest = Manifest::new(command, Some(cfg.clone()));
    let mut summaries = Vec::new();
    pool(cfg.threads)?.install(|| -> Result<()> {
        for &n in &cfg.n_list {
            info!("n = {n}: {} replicas", cfg.replicas);
            let (outputs, failures) = for_each_replica(cfg, n, |r| replica(&layout, cfg, n, r, source));
            let status = status_of(failures.len(), cfg.replicas);
            let mut entry = EnsembleEntry {
                n,
                requested: cfg.replicas,
                completed: outputs.len(),
                status,
                instances: None,
                summary: None,
            };
            if status == EnsembleStatus::Aborted {
                warn!(
                    "n = {n}: {} of {} replicas failed, ensemble aborted",
                    failures.len(),
                    cfg.replicas
                );
                for path in layout.derived(n) {
                    remove_if_present(&path)?;
                }
            } else {
                let report = write_ensemble(&layout, cfg, n, &outputs, failures.len())?;
                summaries.push(report.summary);
                entry.instances = Some(layout.relative(&layout.instances(n)));
                entry.summary = Some(layout.relative(&layout.summary(n)));
            }
            manifest.ensembles.push(entry);
            manifest.failures.extend(failures);
        }
        Ok(())
    })?;
    if summaries.len() >= 4 {
        write_json(&layout.scaling(), &scaling(cfg, &summaries))?;
    } else {
        remove_if_present(&layout.scaling())?;
    }
    let status = overall(&manifest.ensembles);
    let manifest = manifest.finish(&layout.root)?;
    Ok(RunReport { status, manifest })
}

/// Full pipeline: problems, optimal angles, per-instance fits, covariance
/// law, mixing comparison, ensemble summaries and scaling fits.
pub fn run_pipeline(cfg: &ExperimentConfig) -> Result<RunReport> {
    run(cfg, Source::Fresh, "replicate")
}

/// Recomputes every derived output of `dir` from its stored problems and
/// angles. `threads` overrides the recorded worker count.
pub fn analyze_dir(dir: &Path, threads: Option<usize>) -> Result<RunReport> {
    let mut cfg = stored_config(dir)?;
    if let Some(t) = threads {
        cfg.threads = t;
    }
    run(&cfg, Source::Stored, "analyze")
}

fn stored_config(dir: &Path) -> Result<ExperimentConfig> {
    let mut cfg = Manifest::load(dir)?
        .config
        .ok_or_else(|| anyhow!("{} has no experiment config", dir.display()))?;
    cfg.out = dir.to_path_buf();
    Ok(cfg)
}

/// Writes only the problem files of an ensemble.
pub fn generate(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let layout = Layout::new(&cfg.out);
    let mut manifest = Manifest::new("generate", Some(cfg.clone()));
    pool(cfg.threads)?.install(|| {
        for &n in &cfg.n_list {
            let (ok, failures) = for_each_replica(cfg, n, |r| write_problem(&layout, cfg, n, r).map(|_| ()));
            manifest.ensembles.push(EnsembleEntry {
                n,
                requested: cfg.replicas,
                completed: ok.len(),
                status: status_of(failures.len(), cfg.replicas),
                instances: None,
                summary: None,
            });
            manifest.failures.extend(failures);
        }
    });
    fs::create_dir_all(&layout.root)?;
    let status = overall(&manifest.ensembles);
    let manifest = manifest.finish(&layout.root)?;
    Ok(RunReport { status, manifest })
}

/// Optimizes angles for every stored problem of `dir`.
pub fn optimize_dir(dir: &Path, lambda: Option<f64>, threads: Option<usize>) -> Result<RunReport> {
    let mut cfg = stored_config(dir)?;
    if let Some(l) = lambda {
        cfg.lambda = l;
    }
    if let Some(t) = threads {
        cfg.threads = t;
    }
    cfg.validate()?;
    let layout = Layout::new(dir);
    let mut manifest = Manifest::new("optimize", Some(cfg.clone()));
    pool(cfg.threads)?.install(|| {
        for &n in &cfg.n_list {
            let (ok, failures) = for_each_replica(&cfg, n, |r| {
                let p = read_problem(&layout, &cfg, n, r)?;
                let s = full_spectrum(&p)?;
                let opt = optimize_angles(&p, &s, cfg.lambda)?;
                write_json(&layout.angles(cfg.family, n, r), &opt)
            });
            manifest.ensembles.push(EnsembleEntry {
                n,
                requested: cfg.replicas,
                completed: ok.len(),
                status: status_of(failures.len(), cfg.replicas),
                instances: None,
                summary: None,
            });
            manifest.failures.extend(failures);
        }
    });
    let status = overall(&manifest.ensembles);
    let manifest = manifest.finish(&layout.root)?;
    Ok(RunReport { status, manifest })
}
