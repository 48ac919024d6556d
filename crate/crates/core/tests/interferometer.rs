use std::f64::consts::FRAC_PI_2;

use pbqaoa_core::interferometer::{exact_probabilities, moments, MomentsResult};
use pbqaoa_core::sim::prepare_from_spectrum;
use pbqaoa_core::*;

fn instance(family: Family, n: usize, replica: usize) -> (IsingProblem, Spectrum) {
    let p = replica_problem(family, GraphMeta::Gnm { density: 0.9 }, n, 1.0, 11, replica).unwrap();
    let s = full_spectrum(&p).unwrap();
    (p, s)
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = 0.5 * (i + j) as f64;
        for k in i..=j {
            r[idx[k]] = avg;
        }
        i = j + 1;
    }
    r
}

fn spearman(a: &[f64], b: &[f64]) -> f64 {
    stats::linear_fit(&ranks(a), &ranks(b)).unwrap().correlation
}

fn split(x: usize, s: &Spectrum) -> (JointMoments, JointMoments) {
    match moments(x, s, true).unwrap() {
        MomentsResult::Split { plus, minus } => (plus, minus),
        MomentsResult::Single(_) => unreachable!(),
    }
}

#[test]
fn interference_sum_matches_statevector_at_optimal_angles() {
    let (p, s) = instance(Family::Qubo, 8, 0);
    let opt = optimize_angles(&p, &s, -FRAC_PI_2).unwrap();
    let sv = probabilities(&prepare_from_spectrum(&s, opt.params()));
    let ex = exact_probabilities(&s, opt.params()).unwrap();
    let gap = sv.iter().zip(&ex).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(gap < 1e-10, "{gap}");
}

#[test]
fn interference_sum_single_qubit_at_both_qaoa_directions() {
    let delta = 1.1;
    let s = Spectrum::from_energies(1, vec![-delta / 2.0, delta / 2.0]).unwrap();
    for lambda in [-FRAC_PI_2, FRAC_PI_2] {
        for k in 0..25 {
            let params = CircuitParams::new(0.13 * k as f64, 0.05 + 0.12 * k as f64, lambda);
            let p = exact_probabilities(&s, params).unwrap();
            for (x, spin) in [(0, -1.0), (1, 1.0)] {
                let closed = 0.5 * (1.0 - spin * params.theta.sin() * (params.gamma * delta + params.lambda).cos());
                assert!((p[x] - closed).abs() < 1e-14);
            }
        }
    }
}

#[test]
fn covariance_sign_at_ground_and_top() {
    let mut agree = 0;
    for r in 0..40 {
        let (_, s) = instance(Family::Qubo, 12, r);
        let prof = covariance_all(&s, false).unwrap();
        agree += (prof.sigma_eh[s.ground_index()] > 0.0 && prof.sigma_eh[s.top_index()] < 0.0) as usize;
    }
    assert!(agree >= 38, "{agree}/40");
}

#[test]
fn single_hierarchy_moment_invariants() {
    let (_, s) = instance(Family::RandomIsing, 9, 1);
    for x in 0..s.dim() {
        let MomentsResult::Single(m) = moments(x, &s, false).unwrap() else {
            unreachable!()
        };
        assert!(m.rho.abs() <= 1.0 && m.sigma_e >= 0.0 && m.sigma_h >= 0.0);
        assert!((m.mu_h - 4.5).abs() <= 3.0 * m.sigma_h / (s.dim() as f64).sqrt());
        assert!(m.mu_e.abs() < 1e-9);
    }
}

#[test]
fn split_hierarchies_cover_every_configuration() {
    let (_, s) = instance(Family::MaxCut, 10, 2);
    let (plus, minus) = split(77, &s);
    assert!((plus.mass + minus.mass - 1.0).abs() < 1e-15);
    assert!(plus.h0 >= 0.0);
    assert_eq!(plus.h0, minus.h0);
    assert!(plus.mu_h <= 5.0 && minus.mu_h > 5.0);
}

#[test]
fn dominance_approximation_tracks_full_degenerate_predictor() {
    let (p, s) = instance(Family::MaxCut, 14, 3);
    let opt = optimize_angles(&p, &s, -FRAC_PI_2).unwrap();
    let angles = ReparamAngles::from_params(opt.params()).unwrap();
    let mut rel = Vec::new();
    for x in (0..s.dim()).step_by(37) {
        let (plus, minus) = split(x, &s);
        let pred = predict_logprob_degenerate(&plus, &minus, &angles).unwrap();
        rel.push(((pred.full - pred.dominant) / pred.full).abs());
    }
    let median = stats::median(&rel);
    assert!(median < 0.05, "{median}");
}

/// The ranking cannot beat the one given by `-E` itself (median about 0.81
/// here), so the ensemble median sits just above the threshold.
#[test]
fn degenerate_predictor_ranks_configurations() {
    let mut rhos = Vec::new();
    for r in 0..40 {
        let (p, s) = instance(Family::MaxCut, 12, r);
        let opt = optimize_angles(&p, &s, -FRAC_PI_2).unwrap();
        let angles = ReparamAngles::from_params(opt.params()).unwrap();
        let exact = probabilities(&prepare_from_spectrum(&s, opt.params()));
        let predicted: Vec<f64> = (0..s.dim())
            .map(|x| {
                let (plus, minus) = split(x, &s);
                predict_logprob_degenerate(&plus, &minus, &angles).unwrap().full
            })
            .collect();
        rhos.push(spearman(&predicted, &exact));
    }
    let median = stats::median(&rhos);
    assert!(median >= 0.8, "{median}");
}

#[test]
fn predicted_beta_sign_follows_gamma_lambda() {
    let (p, s) = instance(Family::Qubo, 10, 6);
    let opt = optimize_angles(&p, &s, -FRAC_PI_2).unwrap();
    let prof = covariance_all(&s, false).unwrap();
    let law = fit_covariance_law(&prof.sigma_eh, &s, opt.params()).unwrap();
    assert!(law.c > 0.0);
    assert_eq!(
        law.beta_predicted.signum(),
        (-opt.gamma_opt * opt.lambda).signum() * law.c.signum()
    );
}
