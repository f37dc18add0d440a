use proptest::prelude::*;
use riskgrad::oracles::{empirical_avar, gaussian_avar};
use riskgrad::{gaussian_sampler, GaussianSpec};

fn close(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= 1e-12 * (1.0 + scale)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn translation_equivariant(
        xs in prop::collection::vec(-100.0f64..100.0, 1..40),
        u in 0.0f64..0.99,
        c in -50.0f64..50.0,
    ) {
        let base = empirical_avar(&xs, u).unwrap();
        let shifted: Vec<f64> = xs.iter().map(|x| x + c).collect();
        let got = empirical_avar(&shifted, u).unwrap();
        prop_assert!(close(got, base + c, base.abs() + c.abs()), "{got} vs {}", base + c);
    }

    #[test]
    fn positively_homogeneous(
        xs in prop::collection::vec(-100.0f64..100.0, 1..40),
        u in 0.0f64..0.99,
        a in 0.01f64..100.0,
    ) {
        let base = empirical_avar(&xs, u).unwrap();
        let scaled: Vec<f64> = xs.iter().map(|x| a * x).collect();
        let got = empirical_avar(&scaled, u).unwrap();
        prop_assert!(close(got, a * base, a * base.abs()), "{got} vs {}", a * base);
    }

    #[test]
    fn weakly_increasing_in_level(
        xs in prop::collection::vec(-100.0f64..100.0, 1..40),
        u in 0.0f64..0.99,
        v in 0.0f64..0.99,
    ) {
        let (lo, hi) = if u <= v { (u, v) } else { (v, u) };
        let a = empirical_avar(&xs, lo).unwrap();
        let b = empirical_avar(&xs, hi).unwrap();
        prop_assert!(b >= a - 1e-12 * (1.0 + a.abs()));
    }
}

#[test]
fn large_sample_tail_mean_matches_closed_form() {
    let spec = GaussianSpec::standard();
    let samples = gaussian_sampler(&[spec], None, 1_000_000, 2024).unwrap();
    let got = empirical_avar(&samples.column(0), 0.95).unwrap();
    let want = gaussian_avar(spec, 0.95).unwrap();
    assert!((got - want).abs() < 0.01, "{got} vs {want}");
}
