use proptest::prelude::*;
use sbm_core::cumulants::{catalan_c, gen_function_f, gen_function_partial, v1_inverse_distance};
use sbm_core::kernels::{heat_radial, potential_radial};
use sbm_core::particles::{simulate, KernelRegistry, SimConfig};
use sbm_core::stats::{summarize, variance};
use sbm_core::{Horizon, KernelDescriptor, SpacePoint};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn potential_grows_in_time_and_falls_in_space(t in 0.01f64..5.0, dt in 0.01f64..2.0, r in 0.01f64..3.0, dr in 0.01f64..1.0) {
        for dim in [2, 3] {
            prop_assert!(potential_radial(dim, t + dt, r) >= potential_radial(dim, t, r));
            prop_assert!(potential_radial(dim, t, r + dr) <= potential_radial(dim, t, r));
            prop_assert!(heat_radial(dim, t, r) > 0.0);
        }
    }

    #[test]
    fn first_cumulant_of_inverse_distance_is_bounded(t in 0.01f64..4.0, rho in 0.0f64..3.0) {
        let v = v1_inverse_distance(t, rho);
        // largest at the pole, and never above t/ρ
        prop_assert!(v <= 2.0 * (2.0 * t / std::f64::consts::PI).sqrt() * (1.0 + 1e-12));
        if rho > 0.0 {
            prop_assert!(v <= t / rho * (1.0 + 1e-12));
        }
        prop_assert!(v >= 0.0);
    }

    #[test]
    fn generating_function_satisfies_its_quadratic(theta in 0.0f64..0.25) {
        let f = gen_function_f(theta).unwrap();
        prop_assert!((f - theta - f * f).abs() < 1e-12);
        prop_assert!(gen_function_partial(theta, 20) <= f + 1e-12);
    }

    #[test]
    fn summary_statistics_are_consistent(x in prop::collection::vec(-1e3f64..1e3, 2..200)) {
        let s = summarize(&x);
        let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(s.mean >= lo - 1e-9 && s.mean <= hi + 1e-9);
        prop_assert!(variance(&x) >= 0.0);
    }
}

#[test]
fn catalan_numbers_match_the_binomial_formula() {
    let mut binom = 1u64; // C(2m, m)/(m+1) built multiplicatively
    for n in 1..=20u32 {
        let m = (n - 1) as u64;
        if m > 0 {
            binom = binom * 2 * (2 * m - 1) / (m + 1);
        }
        assert_eq!(catalan_c(n).unwrap(), binom, "n = {n}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn simulated_paths_respect_pathwise_invariants(seed in any::<u64>(), rep in 0u64..1000, dim in 2usize..=3) {
        let mut cfg = SimConfig::new(dim, 30, 0.005, Horizon::Finite(0.5));
        cfg.seed = seed;
        cfg.snapshot_times = vec![0.0, 0.25, 0.5];
        let mut reg = KernelRegistry::new();
        let one = reg.register(KernelDescriptor::Const { a: 1.0 });
        let again = reg.register(KernelDescriptor::Const { a: 1.0 });
        prop_assert_eq!(one, again);
        let phi = reg.register(KernelDescriptor::Mollified { center: SpacePoint::on_axis(dim, 0.2), eps: 0.01 });

        let p = simulate(&cfg, &reg, rep).unwrap();
        prop_assert_eq!(&p, &simulate(&cfg, &reg, rep).unwrap());
        prop_assert!((p.occupation_integral(one).unwrap() - p.mass_occupation).abs() < 1e-12);
        let mut prev = 0.0;
        for s in &p.snapshots {
            prop_assert!(s.mass >= 0.0);
            prop_assert!(s.functionals.occupation[phi.0] >= prev);
            prev = s.functionals.occupation[phi.0];
        }
        // M(1) = X_t(1) − X_0(1)
        let t = p.end.time();
        prop_assert!((p.martingale_at(one, t).unwrap() - (p.value_at(one, t).unwrap() - 1.0)).abs() < 1e-12);
    }
}
