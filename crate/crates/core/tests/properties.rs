use mixrough::config::recipe_eps_max;
use mixrough::drivers::{rng_stream, sample_mixed_path, CmBasis};
use mixrough::integrator::{FlowBundle, SystemSpec};
use mixrough::rough::{chen_compose, dyadic_lift};
use mixrough::{CovarianceFactor, ParamSet};
use proptest::prelude::*;
use rand::Rng;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, failure_persistence: None, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn recipe_family_accepted_and_idempotent(h in 0.34f64..0.499, frac in 0.01f64..0.99) {
        let e = frac * recipe_eps_max(h, mixrough::config::default_p_prime(h));
        let p = ParamSet::from_recipe(h, e, 1, 1, 1, 6, 0);
        prop_assert!(p.is_ok(), "H={h} e={e}: {:?}", p.err());
        let p = p.unwrap();
        prop_assert_eq!(p.revalidate().unwrap(), p);
    }
}

proptest! {
    #![proptest_config(config(16))]

    #[test]
    fn chen_holds_on_random_lifts(seed in any::<u64>(), s in 0usize..64, a in 1usize..64, b in 1usize..64) {
        let params = ParamSet::from_recipe(0.4, 0.01, 1, 2, 1, 8, seed).unwrap();
        let factor = CovarianceFactor::new(&params).unwrap();
        let lift = dyadic_lift(&sample_mixed_path(&params, &factor, 0).unwrap());
        let (u, t) = (s + a, s + a + b);
        let composed = chen_compose(
            &lift.level2_between(s, u).unwrap(),
            &lift.level2_between(u, t).unwrap(),
            &lift.level1_between(s, u),
            &lift.level1_between(u, t),
        );
        let direct = lift.level2_between(s, t).unwrap();
        for (x, y) in composed.iter().zip(&direct) {
            prop_assert!((x - y).abs() <= 1e-12 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn chi_linear_and_psi_symmetric(seed in any::<u64>(), alpha in -2.0f64..2.0) {
        let vf = SystemSpec::scalar_poly_toy().into_field();
        let params = ParamSet::from_recipe(0.4, 0.01, 1, 1, 1, 7, 0).unwrap();
        let basis = CmBasis::new(&params, 3, params.level).unwrap();
        let mut rng = rng_stream(seed, 0);
        let mut draw = || -> Vec<f64> { (0..basis.len()).map(|_| rng.gen_range(-0.5..0.5)).collect() };
        let (c, x, y) = (draw(), draw(), draw());
        let flows = FlowBundle::new(vf.as_ref(), &basis.realize(&c)).unwrap();
        let (f, k) = (basis.realize(&x), basis.realize(&y));

        let combined = flows.chi(&f.axpy(alpha, &k).unwrap()).unwrap();
        let separate = flows.chi(&f).unwrap().axpy(alpha, &flows.chi(&k).unwrap()).unwrap();
        let scale = 1.0 + combined.sup_norm();
        prop_assert!(combined.sup_distance(&separate).unwrap() <= 1e-10 * scale);

        let fk = flows.second_variation(&f, &k).unwrap().total();
        let kf = flows.second_variation(&k, &f).unwrap().total();
        prop_assert!(fk.sup_distance(&kf).unwrap() <= 1e-10 * (1.0 + fk.sup_norm()));
    }
}
