use proptest::prelude::*;
use riskgrad::riskmeasure::{
    estimate_evar, estimate_evar_with_cache, estimate_general, evar_objective, evar_penalty,
    is_evar_feasible, maximize_over, AvarLevels, LevelCache,
};
use riskgrad::{
    estimate_avar, gaussian_sampler, ChainState, DiscreteRiskLevelMeasure, EvarConfig,
    GaussianSpec, ObjectiveConfig, PayoffModel, SampleSet, SgldConfig, StepSpec,
};

fn small_problem(samples: SampleSet) -> (SgldConfig, PayoffModel, ObjectiveConfig) {
    let sgld = SgldConfig::new(1e8, StepSpec::Size(1e-4), 2000, 8, 11);
    let objective = ObjectiveConfig::new(0.9, 1e-8, samples);
    (sgld, PayoffModel::identity(), objective)
}

fn gaussian_problem() -> (SgldConfig, PayoffModel, ObjectiveConfig) {
    let samples = gaussian_sampler(
        &[GaussianSpec::new(1.0, 2f64.sqrt()).unwrap()],
        None,
        400,
        3,
    )
    .unwrap();
    small_problem(samples)
}

fn small_search(u: f64) -> EvarConfig {
    let mut cfg = EvarConfig::new(u);
    cfg.atoms = 12;
    cfg.partitions = 10;
    cfg.level_grid = 40;
    cfg.seed = 5;
    cfg
}

#[test]
fn returned_value_dominates_every_candidate() {
    let (sgld, model, obj) = gaussian_problem();
    let cfg = small_search(0.9);
    let cache = LevelCache::new(cfg.level_grid);
    let report = estimate_evar_with_cache(&cfg, &sgld, &model, &obj, &cache).unwrap();
    assert_eq!(report.candidates, 10);
    assert_eq!(report.best_atoms.count, 12);
    for i in 0..cfg.partitions {
        let m = cfg.candidate(i);
        let avars: Vec<f64> = m
            .atoms()
            .iter()
            .map(|x| cache.get(cache.key(*x)).unwrap())
            .collect();
        let f = evar_objective(&m, &avars, &cfg).unwrap();
        assert!(report.value >= f, "candidate {i}: {f} > {}", report.value);
        if i == report.best_candidate {
            assert_eq!(report.value, f);
        }
    }
}

#[test]
fn constant_payoff_gives_the_constant() {
    let (sgld, model, obj) = small_problem(SampleSet::from_scalars(&[2.5; 20]).unwrap());
    // at small levels m drifts at speed v/(1-v), so start the chains close by
    let sgld = sgld.with_init_state(ChainState::new(2.4, vec![]));
    let report = estimate_evar(&small_search(0.9), &sgld, &model, &obj).unwrap();
    assert!((report.value - 2.5).abs() < 0.05, "{}", report.value);
}

#[test]
fn forced_single_atom_reduces_to_avar() {
    let (sgld, model, obj) = gaussian_problem();
    let mut cfg = small_search(0.9);
    cfg.atoms = 1;
    cfg.partitions = 1;
    cfg.level_grid = 1000;
    cfg.force_atom = Some(0.9);
    let evar = estimate_evar(&cfg, &sgld, &model, &obj).unwrap();
    let avar = estimate_avar(&sgld, &model, &obj.at_level(0.9)).unwrap();
    assert_eq!(evar.value, avar.avar);
    assert_eq!(evar.best_penalty, 0.0);
}

#[test]
fn generic_entry_with_evar_penalty_matches_estimate_evar() {
    let (sgld, model, obj) = gaussian_problem();
    let cfg = small_search(0.9);
    let direct = estimate_evar(&cfg, &sgld, &model, &obj).unwrap();
    let generic = estimate_general(
        |m| evar_penalty(m, &cfg).unwrap(),
        f64::INFINITY,
        &cfg,
        &sgld,
        &model,
        &obj,
    )
    .unwrap();
    assert_eq!(direct, generic);
}

#[test]
fn zero_penalty_single_atoms_reach_past_any_fixed_level() {
    let (sgld, model, obj) = gaussian_problem();
    let mut cfg = small_search(0.5);
    cfg.atoms = 1;
    cfg.partitions = 30;
    cfg.delta = 0.99;
    let report = estimate_general(|_| 0.0, f64::INFINITY, &cfg, &sgld, &model, &obj).unwrap();
    let at_u = estimate_avar(&sgld, &model, &obj.at_level(0.5))
        .unwrap()
        .avar;
    assert!(report.value > at_u, "{} <= {at_u}", report.value);
    assert!(report.best_atoms.max > 0.5);
}

#[test]
fn single_feasible_measure_is_returned() {
    let (sgld, model, obj) = gaussian_problem();
    let cfg = small_search(0.9);
    let grid = DiscreteRiskLevelMeasure::uniform_grid(12, cfg.delta).unwrap();
    let cache = LevelCache::new(cfg.level_grid);
    let levels = AvarLevels {
        sgld: &sgld,
        model: &model,
        objective: &obj,
        cache: &cache,
    };
    let make = |i: usize| {
        if i == 3 {
            grid.clone()
        } else {
            cfg.candidate(i)
        }
    };
    let penalty = |m: &DiscreteRiskLevelMeasure| Ok(if *m == grid { 0.0 } else { f64::INFINITY });
    let report = maximize_over(8, make, penalty, 1.0, &levels, "grid").unwrap();
    assert_eq!(report.best_candidate, 3);
    assert_eq!(report.feasible_candidates, 1);
    let expected = grid
        .atoms()
        .iter()
        .map(|x| cache.get(cache.key(*x)).unwrap())
        .sum::<f64>()
        / 12.0;
    assert_eq!(report.value, expected);
    assert_eq!(report.atom_distribution, "grid");
}

#[test]
fn no_feasible_candidate_is_an_error() {
    let (sgld, model, obj) = gaussian_problem();
    let cfg = small_search(0.9);
    let err = estimate_general(|_| 1.0, 0.5, &cfg, &sgld, &model, &obj).unwrap_err();
    assert!(matches!(err, riskgrad::Error::Infeasible(_)));
}

proptest! {
    #[test]
    fn single_atoms_are_feasible_iff_not_above_the_level(
        v in 0.0f64..0.975,
        count in 1usize..20,
        q in 1.00001f64..3.0,
    ) {
        let u = 0.95;
        prop_assume!((v - u).abs() > 1e-6);
        let mut cfg = EvarConfig::new(u);
        cfg.q_order = q;
        let m = DiscreteRiskLevelMeasure::new(vec![v; count], cfg.delta).unwrap();
        prop_assert_eq!(is_evar_feasible(&m, &cfg).unwrap(), v <= u);
    }
}
