//! Random QUBO, MaxCut and Ising instances in the common Ising form
//! `E(s) = sum_{i<j} J_ij s_i s_j + sum_i h_i s_i`.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::graph::Graph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    #[serde(rename = "qubo")]
    Qubo,
    #[serde(rename = "maxcut")]
    MaxCut,
    #[serde(rename = "random_ising")]
    RandomIsing,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Qubo => "qubo",
            Family::MaxCut => "maxcut",
            Family::RandomIsing => "random_ising",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "qubo" => Ok(Family::Qubo),
            "maxcut" | "max-cut" | "sk" => Ok(Family::MaxCut),
            "random_ising" | "random-ising" | "ising" => Ok(Family::RandomIsing),
            other => Err(invalid(format!("unknown family '{other}'"))),
        }
    }
}

/// How the coupling graph was drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum GraphMeta {
    Gnm { density: f64 },
    Regular { degree: usize },
}

impl fmt::Display for GraphMeta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphMeta::Gnm { density } => write!(f, "gnm:{density}"),
            GraphMeta::Regular { degree } => write!(f, "regular:{degree}"),
        }
    }
}

impl FromStr for GraphMeta {
    type Err = Error;

    /// Parses `gnm:<density>` or `regular:<degree>`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, value) = s
            .split_once(':')
            .ok_or_else(|| invalid(format!("graph '{s}' must look like gnm:0.9 or regular:4")))?;
        match kind.to_ascii_lowercase().as_str() {
            "gnm" => value
                .parse()
                .map(|density| GraphMeta::Gnm { density })
                .map_err(|_| invalid(format!("bad density '{value}'"))),
            "regular" => value
                .parse()
                .map(|degree| GraphMeta::Regular { degree })
                .map_err(|_| invalid(format!("bad degree '{value}'"))),
            other => Err(invalid(format!("unknown graph type '{other}'"))),
        }
    }
}

/// Ising instance. `J` is kept both as a dense symmetric matrix (zero
/// diagonal) and as the list of nonzero couplings on graph edges.
#[derive(Debug, Clone, PartialEq)]
pub struct IsingProblem {
    n: usize,
    j: Vec<f64>,
    couplings: Vec<(usize, usize, f64)>,
    h: Vec<f64>,
    family: Family,
    sigma2: f64,
    seed: u64,
    graph_meta: GraphMeta,
}

/// Draws one `Normal(0, sigma2)` coefficient per edge (assigned to both
/// `Q_ij` and `Q_ji`) and maps the result onto the Ising form. QUBO gets
/// `h_i = sum_j Q_ij`, MaxCut gets `h = 0`, and random Ising draws every
/// `h_i` independently after the couplings.
pub fn build_problem(
    family: Family,
    graph: &Graph,
    graph_meta: GraphMeta,
    sigma2: f64,
    seed: u64,
) -> Result<IsingProblem> {
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(invalid(format!("sigma2 must be positive, got {sigma2}")));
    }
    let n = graph.n();
    let sigma = sigma2.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || -> f64 { sigma * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng) };

    let couplings: Vec<_> = graph.edges().iter().map(|&(i, j)| (i, j, draw())).collect();
    let h = match family {
        Family::Qubo => {
            let mut h = vec![0.0; n];
            for &(i, j, q) in &couplings {
                h[i] += q;
                h[j] += q;
            }
            h
        }
        Family::MaxCut => vec![0.0; n],
        Family::RandomIsing => (0..n).map(|_| draw()).collect(),
    };
    let mut problem = IsingProblem::from_parts(n, couplings, h)?;
    problem.family = family;
    problem.sigma2 = sigma2;
    problem.seed = seed;
    problem.graph_meta = graph_meta;
    Ok(problem)
}

impl IsingProblem {
    /// Builds a problem from explicit couplings and fields. Metadata defaults
    /// to a random-Ising family with the realized graph density.
    pub fn from_parts(n: usize, couplings: Vec<(usize, usize, f64)>, h: Vec<f64>) -> Result<Self> {
        if h.len() != n {
            return Err(Error::SizeMismatch {
                expected: n,
                actual: h.len(),
            });
        }
        let graph = Graph::new(n, couplings.iter().map(|&(i, j, _)| (i, j)))?;
        let mut j = vec![0.0; n * n];
        let mut normalized = Vec::with_capacity(couplings.len());
        for (a, b, w) in couplings {
            if !w.is_finite() {
                return Err(invalid(format!("non-finite coupling on ({a}, {b})")));
            }
            let (i, k) = if a < b { (a, b) } else { (b, a) };
            j[i * n + k] = w;
            j[k * n + i] = w;
            normalized.push((i, k, w));
        }
        normalized.sort_by_key(|&(i, j, _)| (i, j));
        if h.iter().any(|v| !v.is_finite()) {
            return Err(invalid("non-finite field"));
        }
        Ok(Self {
            n,
            j,
            couplings: normalized,
            h,
            family: Family::RandomIsing,
            sigma2: 0.0,
            seed: 0,
            graph_meta: GraphMeta::Gnm {
                density: graph.density(),
            },
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn graph_meta(&self) -> GraphMeta {
        self.graph_meta
    }

    pub fn with_meta(mut self, family: Family, graph_meta: GraphMeta, sigma2: f64, seed: u64) -> Self {
        self.family = family;
        self.graph_meta = graph_meta;
        self.sigma2 = sigma2;
        self.seed = seed;
        self
    }

    /// `J[i][j]`.
    pub fn coupling(&self, i: usize, j: usize) -> f64 {
        self.j[i * self.n + j]
    }

    /// Row-major dense `J`.
    pub fn j_dense(&self) -> &[f64] {
        &self.j
    }

    /// Nonzero couplings `(i, j, J_ij)` with `i < j`.
    pub fn couplings(&self) -> &[(usize, usize, f64)] {
        &self.couplings
    }

    pub fn h(&self) -> &[f64] {
        &self.h
    }

    pub fn edge_count(&self) -> usize {
        self.couplings.len()
    }

    /// True when all fields vanish, so `E(s) == E(-s)`.
    pub fn is_z2_symmetric(&self) -> bool {
        self.h.iter().all(|&v| v == 0.0)
    }

    /// Energy of configuration `x` by direct evaluation.
    pub fn energy(&self, x: u64) -> f64 {
        let spin = |i: usize| if (x >> i) & 1 == 1 { 1.0 } else { -1.0 };
        let pair: f64 = self.couplings.iter().map(|&(i, j, w)| w * spin(i) * spin(j)).sum();
        let field: f64 = self.h.iter().enumerate().map(|(i, &v)| v * spin(i)).sum();
        pair + field
    }

    /// Local field `sum_j J_ij s_j + h_i` felt by spin `i` in configuration `x`.
    pub fn local_field(&self, x: u64, i: usize) -> f64 {
        let row = &self.j[i * self.n..(i + 1) * self.n];
        let mut f = self.h[i];
        for (k, &w) in row.iter().enumerate() {
            if w != 0.0 {
                f += if (x >> k) & 1 == 1 { w } else { -w };
            }
        }
        f
    }

    /// Problem with `E -> -E`.
    pub fn negated(&self) -> Self {
        let mut out = self.clone();
        out.j.iter_mut().for_each(|v| *v = -*v);
        out.couplings.iter_mut().for_each(|c| c.2 = -c.2);
        out.h.iter_mut().for_each(|v| *v = -*v);
        out
    }

    /// Typical local energy scale `sqrt(2 sum_{i<j} J_ij^2 / n)`, which for
    /// Gaussian couplings is `sigma sqrt(2M/n)`. Falls back to the rms field
    /// when there are no couplings.
    pub fn coupling_scale(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        let jj: f64 = self.couplings.iter().map(|c| c.2 * c.2).sum();
        if jj > 0.0 {
            (2.0 * jj / self.n as f64).sqrt()
        } else {
            (self.h.iter().map(|v| v * v).sum::<f64>() / self.n as f64).sqrt()
        }
    }

    pub fn to_file(&self) -> ProblemFile {
        ProblemFile {
            n: self.n,
            family: self.family,
            graph: self.graph_meta,
            sigma2: self.sigma2,
            seed: self.seed,
            edges: self.couplings.iter().map(|&(i, j, w)| (i, j, w)).collect(),
            h: self.h.clone(),
        }
    }

    pub fn from_file(file: ProblemFile) -> Result<Self> {
        let p = Self::from_parts(file.n, file.edges, file.h)?;
        Ok(p.with_meta(file.family, file.graph, file.sigma2, file.seed))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_file())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_file(serde_json::from_str(s)?)
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// On-disk problem schema. Floats are written in shortest round-trip form,
/// so a write/read cycle is lossless.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemFile {
    pub n: usize,
    pub family: Family,
    pub graph: GraphMeta,
    pub sigma2: f64,
    pub seed: u64,
    pub edges: Vec<(usize, usize, f64)>,
    pub h: Vec<f64>,
}

/// Spectral norm of `J` (largest absolute eigenvalue of the symmetric matrix).
pub fn operator_norm(problem: &IsingProblem) -> f64 {
    let n = problem.n();
    if n == 0 || problem.couplings().is_empty() {
        return 0.0;
    }
    let m = DMatrix::from_row_slice(n, n, problem.j_dense());
    m.symmetric_eigenvalues()
        .iter()
        .fold(0.0_f64, |acc, v| acc.max(v.abs()))
}
