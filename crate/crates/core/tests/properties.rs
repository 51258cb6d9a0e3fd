use std::collections::HashSet;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rap::analysis::{fit_asymptote, gamma_likelihood_from, radius_cdf, EnsembleSeries};
use rap::geometry::BoxDomain;
use rap::io::{read_packing_csv, write_packing_csv};
use rap::packer::{checkpoint_grid, probe_insertions, run, Packing, PackerConfig};
use rap::Order;

fn grow(d: usize, side: f64, n: usize, seed: u64) -> Packing {
    let mut p = Packing::new(BoxDomain::new(d, side).unwrap(), seed);
    for _ in 0..n {
        p.step().unwrap();
    }
    p
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn tree_matches_linear_scan_bitwise(d in 2usize..=4, n in 1usize..400, seed in any::<u64>(), probe in any::<u64>()) {
        let p = grow(d, 1.0, n, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(probe);
        for _ in 0..50 {
            let x: Vec<f64> = (0..d).map(|_| rng.gen::<f64>()).collect();
            let fast = p.tree().query_max_radius(&x, p.domain()).unwrap();
            let slow = p.tree().brute_force_max_radius(&x);
            prop_assert_eq!(fast.radius.to_bits(), slow.radius.to_bits());
        }
    }

    #[test]
    fn every_sphere_sits_in_exactly_one_node(d in 2usize..=4, n in 1usize..1500, seed in any::<u64>()) {
        let p = grow(d, 1.0, n, seed);
        let mut seen = HashSet::new();
        let mut total = 0;
        for node in p.tree().nodes() {
            for id in node.sphere_ids {
                prop_assert!(seen.insert(*id));
                total += 1;
            }
        }
        prop_assert_eq!(total, n);
    }

    #[test]
    fn growth_is_monotone_and_bounded(d in 2usize..=4, side in 0.1f64..10.0, seed in any::<u64>()) {
        let mut p = Packing::new(BoxDomain::new(d, side).unwrap(), seed);
        let orders = p.accumulator().orders().to_vec();
        let mut moments = vec![0.0; orders.len()];
        let mut pore = p.accumulator().pore_parts();
        for _ in 0..300 {
            let s = p.step().unwrap();
            prop_assert!(s.radius <= side / 2.0);
            for (m, o) in moments.iter_mut().zip(&orders) {
                let next = p.accumulator().moment(*o).unwrap();
                prop_assert!(next >= *m);
                if o.pow(s.radius) >= *m * f64::EPSILON {
                    prop_assert!(next > *m);
                }
                *m = next;
            }
            let next = p.accumulator().pore_parts();
            prop_assert!((next.0 - pore.0) + (next.1 - pore.1) < 0.0);
            prop_assert!(p.pore() > 0.0);
            pore = next;
        }
    }

    #[test]
    fn same_seed_same_bytes(d in 2usize..=4, n in 1u64..800, seed in any::<u64>()) {
        let write = || {
            let (p, _) = run(&PackerConfig::new(d, 1.0, n, seed)).unwrap();
            let mut buf = Vec::new();
            write_packing_csv(&p, &mut buf).unwrap();
            buf
        };
        prop_assert_eq!(write(), write());
    }

    #[test]
    fn packing_csv_round_trip(d in 2usize..=4, n in 0usize..300, side in 0.01f64..100.0, seed in any::<u64>()) {
        let p = grow(d, side, n, seed);
        let mut first = Vec::new();
        write_packing_csv(&p, &mut first).unwrap();
        let back = read_packing_csv(first.as_slice()).unwrap();
        let mut second = Vec::new();
        write_packing_csv(&back, &mut second).unwrap();
        prop_assert_eq!(first, second);
    }

    #[test]
    fn probe_attempts_add_up(n in 1usize..300, count in 1u64..5000, seed in any::<u64>()) {
        let p = grow(2, 1.0, n, seed);
        let probe = probe_insertions(&p, count, seed ^ 1);
        prop_assert_eq!(probe.attempts, count);
        prop_assert_eq!(probe.attempts, probe.inside_rejections + probe.accepted() as u64);
        prop_assert!(probe.radii.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn checkpoints_strictly_increase(n in 1u64..10_000_000, per_decade in 1u32..128) {
        let grid = checkpoint_grid(n, per_decade);
        prop_assert!(grid.windows(2).all(|w| w[0] < w[1]));
        prop_assert_eq!(*grid.last().unwrap(), n);
    }

    #[test]
    fn fit_reproduces_its_own_model(lambda in -0.5f64..0.8, b in -2.0f64..2.0, c in -3.0f64..-0.3) {
        prop_assume!(b.abs() > 0.05);
        let pts: Vec<(f64, f64)> = (0..90)
            .map(|k| 1e3 * 10f64.powf(k as f64 / 30.0))
            .map(|n| (n, lambda + b * n.ln().powf(c)))
            .collect();
        let fit = fit_asymptote(&pts, &vec![1e-3; pts.len()]).unwrap();
        prop_assert!((fit.lambda - lambda).abs() < 1e-8, "{:?}", fit);
    }

    #[test]
    fn likelihood_collapses_as_sigma_vanishes(lambda in -0.8f64..0.8, alpha in 1u32..=4) {
        let alpha = Order::int(alpha);
        let g = gamma_likelihood_from(lambda, 1e-9, alpha).unwrap();
        let point = 1.0 + alpha.value() / (1.0 - lambda);
        prop_assert!((g.mode - point).abs() < 1e-6 * point);
        prop_assert!(g.interval.0 <= point && point <= g.interval.1);
        prop_assert!(g.interval.1 - g.interval.0 < 1e-6 * point);
    }
}

#[test]
fn radius_cdf_starts_at_the_checkpoint_count() {
    let replicas = (0..3)
        .map(|seed| run(&PackerConfig::new(2, 1.0, 3000, seed)).unwrap().1)
        .collect();
    let ensemble = EnsembleSeries::from_replicas(replicas).unwrap();
    for n in [1000, 2999, 3000] {
        if let Ok(cdf) = radius_cdf(&ensemble, n) {
            assert_eq!(cdf[0], (0.0, n as f64));
            assert!(cdf.windows(2).all(|w| w[1].1 <= w[0].1));
        }
    }
    assert!(radius_cdf(&ensemble, 3000).is_ok());
}
