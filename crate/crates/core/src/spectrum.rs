use crate::error::{Error, Result};
use crate::problem::IsingProblem;

/// Largest spin count for which the full spectrum is materialized
/// (`2^26` doubles is 512 MiB).
pub const MAX_SPECTRUM_QUBITS: usize = 26;

/// Energies of all `2^n` configurations, indexed by configuration integer.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    n: usize,
    energies: Vec<f64>,
    e_min: f64,
    e_max: f64,
    ground_index: usize,
    top_index: usize,
}

impl Spectrum {
    /// Wraps an arbitrary energy table of length `2^n`.
    pub fn from_energies(n: usize, energies: Vec<f64>) -> Result<Self> {
        if n > MAX_SPECTRUM_QUBITS {
            return Err(Error::Resource(format!(
                "spectrum of {n} spins exceeds the {MAX_SPECTRUM_QUBITS}-spin cap"
            )));
        }
        let dim = 1usize << n;
        if energies.len() != dim {
            return Err(Error::SizeMismatch {
                expected: dim,
                actual: energies.len(),
            });
        }
        let mut ground_index = 0;
        let mut top_index = 0;
        for (x, &e) in energies.iter().enumerate() {
            // strict comparisons keep the smallest index on ties
            if e < energies[ground_index] {
                ground_index = x;
            }
            if e > energies[top_index] {
                top_index = x;
            }
        }
        Ok(Self {
            n,
            e_min: energies[ground_index],
            e_max: energies[top_index],
            energies,
            ground_index,
            top_index,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn e_min(&self) -> f64 {
        self.e_min
    }

    pub fn e_max(&self) -> f64 {
        self.e_max
    }

    pub fn span(&self) -> f64 {
        self.e_max - self.e_min
    }

    /// Lowest-energy configuration, smallest integer on ties.
    pub fn ground_index(&self) -> usize {
        self.ground_index
    }

    /// Highest-energy configuration, smallest integer on ties.
    pub fn top_index(&self) -> usize {
        self.top_index
    }

    pub fn mean(&self) -> f64 {
        self.energies.iter().sum::<f64>() / self.dim() as f64
    }

    /// All configurations whose energy is within `tol` of the minimum.
    pub fn ground_set(&self, tol: f64) -> Vec<usize> {
        self.energies
            .iter()
            .enumerate()
            .filter(|(_, &e)| e - self.e_min <= tol)
            .map(|(x, _)| x)
            .collect()
    }

    /// Energies mapped affinely onto `[0, 1]`.
    pub fn rescaled(&self) -> Vec<f64> {
        let span = self.span();
        if span == 0.0 {
            return vec![0.0; self.dim()];
        }
        self.energies.iter().map(|e| (e - self.e_min) / span).collect()
    }

    /// Spectrum with every energy transformed by `f`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_energies(self.n, self.energies.iter().map(|&e| f(e)).collect()).expect("same length")
    }
}

/// Enumerates every configuration in Gray-code order, updating the energy
/// by single-spin flips with incrementally maintained local fields. For
/// problems without fields only the half with the top spin down is walked
/// and the other half is copied from the complements, so `E(x) == E(!x)`
/// holds bit for bit.
pub fn full_spectrum(problem: &IsingProblem) -> Result<Spectrum> {
    let n = problem.n();
    if n > MAX_SPECTRUM_QUBITS {
        return Err(Error::Resource(format!(
            "spectrum of {n} spins exceeds the {MAX_SPECTRUM_QUBITS}-spin cap"
        )));
    }
    let mut neighbors: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for &(i, j, w) in problem.couplings() {
        neighbors[i].push((j, w));
        neighbors[j].push((i, w));
    }

    let dim = 1usize << n;
    let mut energies = vec![0.0; dim];
    // all spins down at x = 0
    let mut spins = vec![-1.0_f64; n];
    let mut field: Vec<f64> = (0..n)
        .map(|i| problem.h()[i] - neighbors[i].iter().map(|&(_, w)| w).sum::<f64>())
        .collect();
    let mut energy = problem.energy(0);
    let mut gray = 0usize;
    energies[0] = energy;
    let mirrored = n > 0 && problem.is_z2_symmetric();
    let walked = if mirrored { dim / 2 } else { dim };
    for k in 1..walked {
        let i = k.trailing_zeros() as usize;
        energy -= 2.0 * spins[i] * field[i];
        spins[i] = -spins[i];
        let delta = 2.0 * spins[i];
        for &(j, w) in &neighbors[i] {
            field[j] += delta * w;
        }
        gray ^= 1 << i;
        energies[gray] = energy;
    }
    if mirrored {
        let (low, high) = energies.split_at_mut(walked);
        for (x, &e) in low.iter().enumerate() {
            high[(dim - 1 - x) - walked] = e;
        }
    }
    Spectrum::from_energies(n, energies)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::gen_gnm_graph;
    use crate::problem::{build_problem, Family, GraphMeta};

    #[test]
    fn single_spin_levels() {
        let delta = 1.3;
        let p = IsingProblem::from_parts(1, vec![], vec![delta / 2.0]).unwrap();
        let s = full_spectrum(&p).unwrap();
        assert_eq!(s.energies(), &[-delta / 2.0, delta / 2.0]);
        assert_eq!(s.ground_index(), 0);
    }

    #[test]
    fn two_spin_coupling_by_hand() {
        let p = IsingProblem::from_parts(2, vec![(0, 1, 1.0)], vec![0.0, 0.0]).unwrap();
        let s = full_spectrum(&p).unwrap();
        assert_eq!(s.energies(), &[1.0, -1.0, -1.0, 1.0]);
        // tie between 1 and 2 resolves to the smaller index
        assert_eq!(s.ground_index(), 1);
        assert_eq!(s.ground_set(1e-9), vec![1, 2]);
    }

    #[test]
    fn gray_code_matches_direct_evaluation() {
        for (n, fam) in [(5, Family::Qubo), (9, Family::RandomIsing), (12, Family::MaxCut)] {
            let g = gen_gnm_graph(n, 0.7, n as u64).unwrap();
            let p = build_problem(fam, &g, GraphMeta::Gnm { density: 0.7 }, 1.0, 3).unwrap();
            let s = full_spectrum(&p).unwrap();
            for x in 0..s.dim() {
                assert!((s.energies()[x] - p.energy(x as u64)).abs() < 1e-9);
            }
            assert!(s.energies().iter().all(|&e| s.e_min() <= e && e <= s.e_max()));
            assert_eq!(s.energies()[s.ground_index()], s.e_min());
        }
    }

    #[test]
    fn maxcut_spectrum_is_complement_symmetric() {
        let g = gen_gnm_graph(10, 0.5, 2).unwrap();
        let p = build_problem(Family::MaxCut, &g, GraphMeta::Gnm { density: 0.5 }, 1.0, 9).unwrap();
        let s = full_spectrum(&p).unwrap();
        let mask = s.dim() - 1;
        for x in 0..s.dim() {
            assert!((s.energies()[x] - s.energies()[x ^ mask]).abs() < 1e-12);
        }
    }

    #[test]
    fn cap_and_length_checks() {
        assert!(matches!(
            Spectrum::from_energies(MAX_SPECTRUM_QUBITS + 1, vec![]),
            Err(Error::Resource(_))
        ));
        assert!(matches!(
            Spectrum::from_energies(2, vec![0.0; 3]),
            Err(Error::SizeMismatch { .. })
        ));
    }
}
