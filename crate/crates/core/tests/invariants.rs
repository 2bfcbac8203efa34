use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use ucml_core::dynamics::step;
use ucml_core::simulation::{run_trajectory, InitialCondition, RunOptions};
use ucml_core::stats::{fit_exponential_lifetimes_with, survival_function, LifetimeOffset, LifetimeSample};
use ucml_core::{LatticeState, ModelParams};

fn options(max_time: u64, initial_capacity: usize) -> RunOptions {
    RunOptions {
        max_time,
        record_edges: true,
        initial_capacity,
        ..RunOptions::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn trajectory_records_are_consistent(alpha in 0.0f64..3.0, h in 2.01f64..2.6, seed: u64, max_time in 1u64..3000) {
        let p = ModelParams::new(alpha, h, 0.1).unwrap();
        let ic = InitialCondition::single_site(seed);
        let r = run_trajectory(&p, &ic, &options(max_time, 128)).unwrap();
        prop_assert!(r.lifetime <= max_time);
        prop_assert_eq!(r.edges.len() as u64, r.lifetime);
        for e in &r.edges {
            prop_assert!(e.leading >= e.trailing);
            prop_assert!(e.active >= 1 && e.active as i64 <= e.leading - e.trailing + 1);
        }
        prop_assert_eq!(&r, &run_trajectory(&p, &ic, &options(max_time, 128)).unwrap());
    }

    #[test]
    fn allocated_lattice_size_is_unobservable(alpha in 0.5f64..3.0, h in 2.05f64..2.3, seed: u64) {
        let p = ModelParams::new(alpha, h, 0.1).unwrap();
        let ic = InitialCondition::single_site(seed);
        let small = run_trajectory(&p, &ic, &options(1500, 70)).unwrap();
        let large = run_trajectory(&p, &ic, &options(1500, 4000)).unwrap();
        prop_assert_eq!(small, large);
    }

    #[test]
    fn sites_depend_only_on_upstream_sites(
        sites in proptest::collection::vec(0.0f64..2.1, 4..30),
        at in 0usize..30,
        value in 0.0f64..2.1,
        alpha in 0.0f64..3.0,
        h in 1.5f64..3.0,
    ) {
        let p = ModelParams::new(alpha, h, 0.1).unwrap();
        let k = at % sites.len();
        let mut perturbed = sites.clone();
        perturbed[k] = value;
        let (mut a, mut b) = (LatticeState::new(sites), LatticeState::new(perturbed));
        for _ in 0..8 {
            a = step(&a, &p);
            b = step(&b, &p);
            prop_assert_eq!(&a.sites[..k], &b.sites[..k]);
        }
    }

    #[test]
    fn survival_function_is_monotone(seed: u64, rate in 0.001f64..1.0, censor_every in 2usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let exp = Exp::<f64>::new(rate).unwrap();
        let samples: Vec<LifetimeSample> = (0..300)
            .map(|k| LifetimeSample { lifetime: exp.sample(&mut rng) as u64 + 1, censored: k % censor_every == 0 })
            .collect();
        let s = survival_function(&samples);
        prop_assert!(s.iter().all(|p| (0.0..=1.0).contains(&p.survival)));
        prop_assert!(s.windows(2).all(|w| w[1].survival <= w[0].survival && w[1].t > w[0].t));
    }

    #[test]
    fn early_censoring_never_lifts_the_mean_past_its_interval(seed: u64, extra in 1usize..100) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let exp = Exp::<f64>::new(0.02).unwrap();
        let base: Vec<LifetimeSample> = (0..2000)
            .map(|_| LifetimeSample { lifetime: exp.sample(&mut rng).ceil() as u64, censored: false })
            .collect();
        let fit = fit_exponential_lifetimes_with(&base, LifetimeOffset::Fixed(0)).unwrap();
        let mut s = base;
        s.extend((0..extra).map(|k| LifetimeSample { lifetime: 1 + (k as u64 % 49), censored: true }));
        let g = fit_exponential_lifetimes_with(&s, LifetimeOffset::Fixed(0)).unwrap();
        prop_assert!(g.mean_lifetime <= fit.mean_ci.1);
    }
}
