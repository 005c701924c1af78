use proptest::prelude::*;

use evogame::metrics::{norm_n, wasserstein1_empirical};
use evogame::payoff::{Axis, Grid, Payoff, PayoffModel};
use evogame::sim::{self, Ensemble};
use evogame::strategy::{self, StrategySpace};
use evogame::validation::{ntfr_1d_ansatz, ntfr_1d_config, origin_repulsion_1d};
use evogame::{Cloud, MixedStrategy};

fn density(k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..5.0, k).prop_map(|raw| {
        let m = strategy::mean(&raw);
        raw.into_iter().map(|v| v / m).collect()
    })
}

fn pair_of_densities() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2usize..7).prop_flat_map(|k| (density(k), density(k)))
}

fn payoff_vector() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-20.0f64..20.0, 2..7)
}

fn cloud(n: usize) -> impl Strategy<Value = Cloud> {
    prop::collection::vec(-3.0f64..3.0, n).prop_map(|v| Cloud::from_scalars(&v).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn drifts_conserve_mass((sigma, other) in pair_of_densities(), eps in 0.01f64..5.0, seed in any::<u64>()) {
        let k = sigma.len();
        let table: Vec<f64> = (0..k * k).map(|i| ((i as u64 ^ seed) % 97) as f64 / 9.7 - 5.0).collect();
        let g: Vec<f64> = table[..k].to_vec();
        let drifts = [
            strategy::replicator_drift_undisclosed(&sigma, &g).unwrap(),
            strategy::replicator_drift_full(&sigma, &other, &table).unwrap(),
            strategy::entropy_drift(&sigma, eps).unwrap(),
        ];
        for d in drifts {
            prop_assert!(strategy::mean(&d).abs() <= 1e-13);
        }
    }

    #[test]
    fn softmax_ignores_constant_shifts(g in payoff_vector(), c in -100.0f64..100.0, eps in 0.05f64..5.0) {
        let shifted: Vec<f64> = g.iter().map(|v| v + c).collect();
        let a = strategy::softmax_strategy(&g, eps).unwrap();
        let b = strategy::softmax_strategy(&shifted, eps).unwrap();
        for (x, y) in a.iter().zip(b.iter()) {
            prop_assert!((x - y).abs() <= 1e-12 * x.max(1.0));
        }
    }

    #[test]
    fn softmax_entries_stay_in_the_bounding_box(g in payoff_vector(), eps in 0.5f64..5.0) {
        let m = g.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        let s = strategy::softmax_strategy(&g, eps).unwrap();
        let (lo, hi) = ((-2.0 * m / eps).exp(), (2.0 * m / eps).exp());
        for &v in s.iter() {
            prop_assert!(v >= lo * (1.0 - 1e-12) && v <= hi * (1.0 + 1e-12));
        }
        prop_assert!((strategy::mean(&s) - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn softmax_is_lipschitz(g in payoff_vector(), seed in any::<u64>(), eps in 0.2f64..5.0) {
        let h: Vec<f64> = g.iter().enumerate().map(|(i, v)| v + ((seed >> (i % 60)) % 7) as f64 * 0.03 - 0.1).collect();
        let a = strategy::softmax_strategy(&g, eps).unwrap();
        let b = strategy::softmax_strategy(&h, eps).unwrap();
        let dg = g.iter().zip(&h).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        // densities are relative to η, so the constant 2/ε scales with the
        // largest entry along the segment
        for (x, y) in a.iter().zip(b.iter()) {
            let ceiling = x.max(*y) * (2.0 * dg / eps).exp();
            prop_assert!((x - y).abs() <= 1.01 * (2.0 / eps) * ceiling * dg + 1e-15);
        }
    }

    #[test]
    fn kl_is_nonnegative_and_dominates_pinsker((p, q) in pair_of_densities()) {
        let kl = strategy::kl_divergence(&p, &q).unwrap();
        let l1 = strategy::l1_eta(&p, &q);
        prop_assert!(kl >= 0.0);
        prop_assert!(kl + 1e-14 >= 0.5 * l1 * l1);
    }

    #[test]
    fn interpolation_is_bounded_by_cell_values(values in prop::collection::vec(-5.0f64..5.0, 30), q in -1.5f64..1.5) {
        let grid = Grid::with_values(vec![Axis::bounded(-1.0, 1.0, 15)], 2, values).unwrap();
        for s in 0..2 {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            let mut wsum = 0.0;
            let mut dot = 0.0;
            grid.for_each_corner(&[q], |node, w| {
                let v = grid.values()[node * 2 + s];
                if w > 0.0 {
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
                wsum += w;
                dot += w * v;
            });
            let e = grid.eval(&[q], s);
            prop_assert!((wsum - 1.0).abs() <= 1e-14);
            prop_assert!((dot - e).abs() <= 1e-14);
            prop_assert!(e >= lo - 1e-14 && e <= hi + 1e-14);
        }
    }

    #[test]
    fn split_payoff_weights_reproduce_evaluation(
        c in prop::collection::vec(-3.0f64..3.0, 178),
        x in -1.2f64..1.2,
        y in -1.2f64..1.2,
        k in 0usize..2,
    ) {
        let model = ntfr_1d_ansatz().with_coefficients(&c).unwrap();
        let w = model.coefficient_weights(&[x], k, &[y], 0);
        let total: f64 = w.iter().map(|(_, v)| v).sum();
        let dot: f64 = w.iter().map(|(i, v)| v * c[*i]).sum();
        prop_assert!((total - 2.0).abs() <= 1e-14);
        prop_assert!((dot - model.eval(&[x], k, &[y], 0)).abs() <= 1e-14);
    }

    #[test]
    fn split_payoff_is_lipschitz_in_position(
        c in prop::collection::vec(-3.0f64..3.0, 178),
        x in -1.0f64..1.0,
        dx in -0.2f64..0.2,
        y in -1.0f64..1.0,
    ) {
        let model = ntfr_1d_ansatz().with_coefficients(&c).unwrap();
        let slope = |g: &Grid| {
            let h = g.axes()[0].spacing();
            g.values().chunks_exact(2).zip(g.values().chunks_exact(2).skip(1))
                .flat_map(|(a, b)| [(a[0] - b[0]).abs() / h, (a[1] - b[1]).abs() / h])
                .fold(0.0f64, f64::max)
        };
        // J₁ moves with x, J₂ with y − x: both contribute
        let l = slope(&model.grids()[0]) + slope(&model.grids()[1]);
        for k in 0..2 {
            let a = model.eval(&[x], k, &[y], 0);
            let b = model.eval(&[x + dx], k, &[y], 0);
            prop_assert!((a - b).abs() <= l * dx.abs() * (1.0 + 1e-9) + 1e-12);
        }
    }

    #[test]
    fn w1_is_a_metric_below_norm_n(a in cloud(12), b in cloud(12), c in cloud(12)) {
        let ab = wasserstein1_empirical(&a, &b).unwrap();
        let ba = wasserstein1_empirical(&b, &a).unwrap();
        let ac = wasserstein1_empirical(&a, &c).unwrap();
        let cb = wasserstein1_empirical(&c, &b).unwrap();
        prop_assert!((ab - ba).abs() <= 1e-10);
        prop_assert!(ab <= ac + cb + 1e-10);
        prop_assert!(ab <= norm_n(&a, &b).unwrap() + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn fast_reaction_speeds_stay_below_e_max(seed in any::<u64>()) {
        let mut cfg = ntfr_1d_config(2, seed);
        cfg.steps = 30;
        let ds = sim::run_simulation(&cfg, Some(&origin_repulsion_1d())).unwrap();
        for s in &ds.snapshots {
            prop_assert!(s.v.as_slice().iter().all(|v| v.abs() <= 1.0 + 1e-15));
        }
    }

    #[test]
    fn undisclosed_steps_keep_strategies_normalized(x in prop::collection::vec(-1.0f64..1.0, 8), lambda in 0.5f64..20.0) {
        let payoff = origin_repulsion_1d();
        let mut ens = Ensemble::uniform(Cloud::from_scalars(&x).unwrap(), 2);
        for _ in 0..200 {
            let rep = sim::step_undisclosed(&mut ens, &payoff, lambda, 1.0, 0.02).unwrap();
            prop_assert!(rep.mass_defect <= 1e-12);
            for s in &ens.strategies {
                prop_assert!((strategy::mean(s) - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn nearby_starts_separate_at_most_exponentially(x in prop::collection::vec(-1.0f64..1.0, 8), d in 1e-4f64..1e-2) {
        let payoff = origin_repulsion_1d();
        let mut a = Cloud::from_scalars(&x).unwrap();
        let mut b = Cloud::from_scalars(&x.iter().map(|v| v + d).collect::<Vec<_>>()).unwrap();
        let d0 = norm_n(&a, &b).unwrap();
        // velocity map Lipschitz constant: payoff slope ≤ 6 and 2/ε from the softmax, times e_max
        let l = 2.0 * 6.0 * 2.0;
        for step in 1..=25 {
            sim::step_fast_reaction(&mut a, &payoff, 1.0, 0.02).unwrap();
            sim::step_fast_reaction(&mut b, &payoff, 1.0, 0.02).unwrap();
            let t = step as f64 * 0.02;
            prop_assert!(norm_n(&a, &b).unwrap() <= d0 * (l * t).exp());
        }
    }
}

#[test]
fn zero_payoff_on_symmetric_strategies_keeps_agents_still() {
    let model = PayoffModel::split(
        StrategySpace::scalar(&[-1.0, 0.0, 1.0]).unwrap(),
        vec![Axis::bounded(-1.0, 1.0, 5)],
        vec![Axis::bounded(-2.0, 2.0, 5)],
    )
    .unwrap();
    let x = Cloud::from_scalars(&[-0.5, 0.1, 0.7]).unwrap();
    let state = sim::fast_reaction_state(&x, &model, 1.0).unwrap();
    assert!(state.velocities.as_slice().iter().all(|v| v.abs() < 1e-15));
    assert!(state.strategies.iter().all(|s| *s == MixedStrategy::uniform(3)));
}
