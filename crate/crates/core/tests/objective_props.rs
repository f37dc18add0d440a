use std::sync::Arc;

use proptest::prelude::*;
use riskgrad::objective::{grad, loss};
use riskgrad::oracles::empirical_avar;
use riskgrad::{ChainState, ObjectiveConfig, PayoffModel, PenaltyMode, SampleSet};

fn model_for(kind: u8) -> PayoffModel {
    match kind {
        0 => PayoffModel::identity(),
        1 => PayoffModel::linear(3).unwrap(),
        _ => PayoffModel::softmax(3).unwrap(),
    }
}

fn samples_for(model: &PayoffModel, raw: &[f64]) -> Arc<SampleSet> {
    let d = model.dim();
    let n = raw.len() / d;
    Arc::new(SampleSet::from_flat(raw[..n * d].to_vec(), d).unwrap())
}

fn state(model: &PayoffModel, m: f64, r: &[f64]) -> ChainState {
    ChainState::new(m, r[..model.portfolio_dim()].to_vec())
}

fn is_kink_free(model: &PayoffModel, samples: &SampleSet, z: &ChainState, margin: f64) -> bool {
    samples
        .rows()
        .all(|s| (model.evaluate(&z.r, s).unwrap() - z.m).abs() > margin)
}

proptest! {
    #[test]
    fn gradient_matches_central_differences_away_from_kinks(
        kind in 0u8..3,
        raw in prop::collection::vec(-3.0f64..3.0, 30..60),
        m in -3.0f64..3.0,
        r in prop::collection::vec(-2.0f64..2.0, 3),
        u in 0.05f64..0.99,
        gamma in 0.0f64..2.0,
        full in any::<bool>(),
    ) {
        let model = model_for(kind);
        let samples = samples_for(&model, &raw);
        let z = state(&model, m, &r);
        prop_assume!(is_kink_free(&model, &samples, &z, 1e-3));
        let mode = if full { PenaltyMode::FullState } else { PenaltyMode::FirstCoordinate };
        let cfg = ObjectiveConfig::new(u, gamma, samples).with_penalty(mode);
        let g = grad(&cfg, &model, &z).unwrap();
        let base = z.to_vec();
        let h = 1e-5;
        for (i, gi) in g.iter().enumerate() {
            let mut up = base.clone();
            let mut down = base.clone();
            up[i] += h;
            down[i] -= h;
            let fd = (loss(&cfg, &model, &ChainState::from_slice(&up).unwrap()).unwrap()
                - loss(&cfg, &model, &ChainState::from_slice(&down).unwrap()).unwrap())
                / (2.0 * h);
            prop_assert!((gi - fd).abs() <= 1e-6 * (1.0 + gi.abs()), "coord {i}: {gi} vs {fd}");
        }
    }

    #[test]
    fn loss_strictly_increases_with_gamma(
        kind in 0u8..3,
        raw in prop::collection::vec(-3.0f64..3.0, 6..30),
        m in -3.0f64..3.0,
        r in prop::collection::vec(-2.0f64..2.0, 3),
        gamma in 0.0f64..5.0,
        bump in 0.01f64..5.0,
    ) {
        let model = model_for(kind);
        let samples = samples_for(&model, &raw);
        let z = state(&model, m, &r);
        let lo = ObjectiveConfig::new(0.9, gamma, samples.clone());
        let hi = ObjectiveConfig::new(0.9, gamma + bump, samples);
        prop_assume!(lo.penalty(&z) > 1e-6);
        prop_assert!(loss(&hi, &model, &z).unwrap() > loss(&lo, &model, &z).unwrap());
    }

    #[test]
    fn grid_minimum_over_m_is_the_empirical_avar(
        values in prop::collection::vec(-5.0f64..5.0, 1..15),
        u in 0.0f64..0.95,
    ) {
        // piecewise linear in m with slopes in [1 - 1/(1-u), 1]: a grid of
        // spacing d misses the minimum by at most d/(2(1-u))
        let cfg = ObjectiveConfig::new(u, 1e-300, SampleSet::from_scalars(&values).unwrap())
            .with_penalty(PenaltyMode::FirstCoordinate);
        let model = PayoffModel::identity();
        let spacing = 1e-3;
        let grid_min = (-5500..=5500)
            .map(|k| loss(&cfg, &model, &ChainState::new(k as f64 * spacing, vec![])).unwrap())
            .fold(f64::INFINITY, f64::min);
        let exact = empirical_avar(&values, u).unwrap();
        prop_assert!(grid_min >= exact - 1e-9);
        prop_assert!(grid_min - exact <= spacing / (2.0 * (1.0 - u)) + 1e-9);
    }

    #[test]
    fn loss_is_lipschitz_up_to_the_penalty(
        kind in 0u8..3,
        raw in prop::collection::vec(-3.0f64..3.0, 6..30),
        a in prop::collection::vec(-3.0f64..3.0, 4),
        b in prop::collection::vec(-3.0f64..3.0, 4),
        u in 0.05f64..0.99,
        gamma in 0.0f64..2.0,
    ) {
        let model = model_for(kind);
        let samples = samples_for(&model, &raw);
        let za = state(&model, a[0], &a[1..]);
        let zb = state(&model, b[0], &b[1..]);
        let cfg = ObjectiveConfig::new(u, gamma, samples);
        let dist = za
            .to_vec()
            .iter()
            .zip(zb.to_vec())
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt();
        // the payoff's own Lipschitz constant in r scales the r-distance
        let smax = raw.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
        let lip = 2.0 / (1.0 - u) * if kind == 0 { 1.0 } else { smax * 3.0 };
        let lhs = (loss(&cfg, &model, &za).unwrap() - loss(&cfg, &model, &zb).unwrap()).abs();
        let rhs = lip * dist + 0.5 * gamma * (cfg.penalty(&za) - cfg.penalty(&zb)).abs();
        prop_assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-12, "{lhs} > {rhs}");
    }
}
