use nalgebra::DVector;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sparse_pce::basis::{MultiIndexSet, PolyBasis, TruncationSpec};
use sparse_pce::design::{mc_design, mutual_coherence, CandidatePool, Sampler};
use sparse_pce::inputs::{InputModel, Marginal};
use sparse_pce::models::{ishigami_model, registry};
use sparse_pce::pce::SparsePceModel;
use sparse_pce::selection::relmse;
use sparse_pce::solvers::{
    solve_with_hyperparameters, sp_sweep, RegressionProblem, SelectionSpec, SolverId, SpCv,
};

fn legendre(d: usize, p: u32) -> (InputModel, PolyBasis) {
    let input = InputModel::iid(Marginal::uniform(-1.0, 1.0).unwrap(), d).unwrap();
    let set = MultiIndexSet::enumerate(d, TruncationSpec::total_degree(p)).unwrap();
    let basis = PolyBasis::new(input.families(), set).unwrap();
    (input, basis)
}

#[test]
fn ishigami_surrogate_converges_with_design_size() {
    let model = ishigami_model();
    let basis = model.basis(true).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let x_val = model.input().sample_iid(2000, &mut rng);
    let y_val = model.evaluate_batch(&x_val).unwrap();
    let mut errors = Vec::new();
    for n in [60, 200] {
        let design = Sampler::Lhs { n_tries: 5 }
            .sample(model.input(), &basis, n, &mut rng)
            .unwrap();
        let y = model.evaluate_batch(&design.physical).unwrap();
        let pce = SparsePceModel::fit(
            model.input(),
            &basis,
            &design,
            &y,
            SolverId::Omp,
            &SelectionSpec::default(),
        )
        .unwrap();
        let pred = pce.predict(&x_val).unwrap();
        errors.push(relmse(y_val.as_slice(), pred.as_slice()).unwrap());
    }
    assert!(errors[1] < errors[0] / 10.0, "{errors:?}");
    assert!(errors[1] < 1e-2, "{errors:?}");
}

#[test]
fn sp_loo_solver_matches_loo_sweep() {
    let (input, basis) = legendre(3, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let design = mc_design(&input, 40, &mut rng).unwrap();
    let y = DVector::from_iterator(
        40,
        design
            .physical
            .row_iter()
            .map(|r| (r[0] * 2.0).sin() + r[1] * r[2]),
    );
    let problem =
        RegressionProblem::unweighted(design.regression_matrix(&basis).unwrap(), y).unwrap();
    let a =
        solve_with_hyperparameters(SolverId::SpLoo, &problem, &SelectionSpec::default()).unwrap();
    let b = sp_sweep(&problem, SpCv::Loo).unwrap();
    assert_eq!(a.coefficients, b.coefficients);
    assert_eq!(a.cv_error, b.cv_error);
}

#[test]
fn weighted_sampler_weights_reach_the_solver() {
    let (input, basis) = legendre(2, 6);
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for sampler in [Sampler::Asymptotic, Sampler::CohOpt] {
        let design = sampler.sample(&input, &basis, 50, &mut rng).unwrap();
        let w = design.weights.clone().expect("weighted sampler");
        let psi = design.regression_matrix(&basis).unwrap();
        let wpsi = design.weighted_matrix(&basis).unwrap();
        for i in 0..design.len() {
            for j in 0..basis.len() {
                assert!(
                    (wpsi[(i, j)] - w[i] * psi[(i, j)]).abs() <= 1e-14 * psi[(i, j)].abs().max(1.0)
                );
            }
        }
    }
    assert!(!mc_design(&input, 5, &mut rng).unwrap().is_weighted());
}

#[test]
fn every_registered_model_fits_on_a_small_design() {
    for model in registry().iter().filter(|m| m.dim() <= 8) {
        let basis = PolyBasis::new(
            model.input().families(),
            MultiIndexSet::enumerate(model.dim(), TruncationSpec::total_degree(2)).unwrap(),
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let design = mc_design(model.input(), 3 * basis.len(), &mut rng).unwrap();
        let y = model.evaluate_batch(&design.physical).unwrap();
        let pce = SparsePceModel::fit(
            model.input(),
            &basis,
            &design,
            &y,
            SolverId::Lars,
            &SelectionSpec::default(),
        )
        .unwrap();
        let pred = pce.predict(&design.physical).unwrap();
        assert!(pred.iter().all(|v| v.is_finite()), "{}", model.name());
        assert!(pce.n_active() >= 1);
    }
}

#[test]
fn coherence_optimal_lowers_coherence_of_legendre_basis() {
    let (input, basis) = legendre(2, 6);
    let mut mc = Vec::new();
    let mut coh = Vec::new();
    for seed in 0..15 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        mc.push(mutual_coherence(
            &mc_design(&input, 100, &mut rng)
                .unwrap()
                .weighted_matrix(&basis)
                .unwrap(),
        ));
        let d = Sampler::CohOpt
            .sample(&input, &basis, 100, &mut rng)
            .unwrap();
        coh.push(mutual_coherence(&d.weighted_matrix(&basis).unwrap()));
    }
    mc.sort_by(f64::total_cmp);
    coh.sort_by(f64::total_cmp);
    assert!(coh[7] <= mc[7], "{} vs {}", coh[7], mc[7]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn subset_designs_come_from_the_pool(seed in 0u64..1000, n in 10usize..30, near in any::<bool>()) {
        let (input, basis) = legendre(2, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = Box::new(Sampler::CohOpt);
        let sampler = if near { Sampler::NearOpt { base } } else { Sampler::DOpt { base } };
        let pool = CandidatePool::build(sampler.pool_sampler(), &input, &basis, Some(60), &mut rng).unwrap();
        let candidates = pool.draw(&mut rng);
        prop_assert_eq!(candidates.len(), 60);
        let chosen = sampler.select(&candidates, &basis, n, &mut rng).unwrap();
        prop_assert_eq!(chosen.len(), n);
        let cw = candidates.weights.as_ref().unwrap();
        let w = chosen.weights.as_ref().unwrap();
        for i in 0..n {
            let row = chosen.standard.row(i);
            let k = (0..candidates.len()).find(|&k| candidates.standard.row(k) == row);
            prop_assert!(k.is_some());
            prop_assert_eq!(w[i], cw[k.unwrap()]);
            prop_assert!((0..pool.pool.len()).any(|k| pool.pool.standard.row(k) == row));
        }
    }

    #[test]
    fn physical_and_standard_coordinates_agree(seed in 0u64..1000, n in 1usize..40) {
        let input = InputModel::new(vec![
            Marginal::uniform(2.0, 5.0).unwrap(),
            Marginal::gaussian(1.0, 0.5).unwrap(),
            Marginal::lognormal(0.3, 0.2).unwrap(),
        ])
        .unwrap();
        let set = MultiIndexSet::enumerate(3, TruncationSpec::total_degree(3)).unwrap();
        let basis = PolyBasis::new(input.families(), set).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for sampler in [Sampler::Mc, Sampler::Lhs { n_tries: 3 }, Sampler::CohOpt] {
            let d = sampler.sample(&input, &basis, n, &mut rng).unwrap();
            let back = input.to_standard_matrix(&d.physical).unwrap();
            prop_assert!((back - &d.standard).amax() < 1e-9);
        }
    }
}
