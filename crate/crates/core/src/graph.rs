//! Random graph ensembles used to place couplings: uniform `G(n, M)` graphs
//! and random regular graphs.

use std::collections::BTreeSet;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Rejection budget for the pairing model before giving up.
pub const REGULAR_RETRY_CAP: usize = 1000;

/// Simple undirected graph. Edges are stored as `(i, j)` with `i < j`,
/// sorted lexicographically.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
}

impl Graph {
    /// Builds a graph from an arbitrary edge list, normalizing each pair to
    /// `i < j` and rejecting self-loops, repeats and out-of-range vertices.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for (a, b) in edges {
            if a == b {
                return Err(invalid(format!("self-loop at vertex {a}")));
            }
            let (i, j) = if a < b { (a, b) } else { (b, a) };
            if j >= n {
                return Err(invalid(format!("edge ({i}, {j}) out of range for n = {n}")));
            }
            if !seen.insert((i, j)) {
                return Err(invalid(format!("duplicate edge ({i}, {j})")));
            }
        }
        Ok(Self {
            n,
            edges: seen.into_iter().collect(),
        })
    }

    pub fn complete(n: usize) -> Self {
        let edges = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect();
        Self { n, edges }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n];
        for &(i, j) in &self.edges {
            deg[i] += 1;
            deg[j] += 1;
        }
        deg
    }

    /// Edge density `2M / (n^2 - n)`.
    pub fn density(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        2.0 * self.edges.len() as f64 / (self.n * (self.n - 1)) as f64
    }

    fn complement(&self) -> Self {
        let present: BTreeSet<_> = self.edges.iter().copied().collect();
        let edges = (0..self.n)
            .flat_map(|i| ((i + 1)..self.n).map(move |j| (i, j)))
            .filter(|e| !present.contains(e))
            .collect();
        Self { n: self.n, edges }
    }
}

/// Number of edges a `G(n, M)` graph of the given density receives:
/// `ceil(density * n (n - 1) / 2)`.
pub fn gnm_edge_count(n: usize, density: f64) -> usize {
    let pairs = (n * n.saturating_sub(1) / 2) as f64;
    // 2/3 * 21 evaluates to 13.999999999999998; absorb that rounding.
    let m = (density * pairs - 1e-9).ceil().max(0.0) as usize;
    m.min(pairs as usize)
}

/// Uniform draw among all graphs on `n` vertices with
/// `M = ceil(density * n (n - 1) / 2)` edges.
pub fn gen_gnm_graph(n: usize, density: f64, seed: u64) -> Result<Graph> {
    if n < 2 {
        return Err(invalid(format!("G(n, M) needs n >= 2, got {n}")));
    }
    if !(0.0..=1.0).contains(&density) {
        return Err(invalid(format!("density must lie in [0, 1], got {density}")));
    }
    let total = n * (n - 1) / 2;
    let m = gnm_edge_count(n, density);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picks: Vec<usize> = index::sample(&mut rng, total, m).into_vec();
    picks.sort_unstable();
    let edges = picks.into_iter().map(|k| pair_from_index(n, k)).collect();
    Ok(Graph { n, edges })
}

/// Maps `k` in `0..n(n-1)/2` to the k-th pair `(i, j)`, `i < j`, in
/// lexicographic order.
fn pair_from_index(n: usize, mut k: usize) -> (usize, usize) {
    let mut i = 0;
    loop {
        let row = n - 1 - i;
        if k < row {
            return (i, i + 1 + k);
        }
        k -= row;
        i += 1;
    }
}

/// Random `degree`-regular graph from the pairing (configuration) model with
/// rejection of self-loops and multi-edges. Degrees above `(n - 1) / 2` are
/// drawn as the complement of a `(n - 1 - degree)`-regular graph, which has
/// the same distribution and a much higher acceptance rate.
pub fn gen_regular_graph(n: usize, degree: usize, seed: u64) -> Result<Graph> {
    if degree == 0 || degree >= n {
        return Err(invalid(format!(
            "regular graph needs 0 < degree < n, got degree {degree} with n {n}"
        )));
    }
    if !(n * degree).is_multiple_of(2) {
        return Err(invalid(format!("r * n must be even, got r = {degree}, n = {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let complement_degree = n - 1 - degree;
    if complement_degree < degree {
        if complement_degree == 0 {
            return Ok(Graph::complete(n));
        }
        return pairing_model(n, complement_degree, &mut rng).map(|g| g.complement());
    }
    pairing_model(n, degree, &mut rng)
}

fn pairing_model(n: usize, degree: usize, rng: &mut ChaCha8Rng) -> Result<Graph> {
    let mut stubs: Vec<usize> = (0..n).flat_map(|v| std::iter::repeat_n(v, degree)).collect();
    'attempt: for _ in 0..REGULAR_RETRY_CAP {
        stubs.shuffle(rng);
        let mut edges = BTreeSet::new();
        for pair in stubs.chunks_exact(2) {
            let (a, b) = (pair[0], pair[1]);
            if a == b {
                continue 'attempt;
            }
            let e = if a < b { (a, b) } else { (b, a) };
            if !edges.insert(e) {
                continue 'attempt;
            }
        }
        return Ok(Graph {
            n,
            edges: edges.into_iter().collect(),
        });
    }
    Err(Error::Resource(format!(
        "pairing model found no simple {degree}-regular graph on {n} vertices in {REGULAR_RETRY_CAP} attempts"
    )))
}
