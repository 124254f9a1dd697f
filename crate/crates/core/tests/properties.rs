use proptest::prelude::*;

use wavefront_core::cbm::{Increment, ParticleSystem};
use wavefront_core::experiments::StructureChecker;
use wavefront_core::export::{read_waves, write_waves};
use wavefront_core::representation::{coalescence_position, previous_positions, Coalescence, CountingFunction, GGraph};
use wavefront_core::stats::{fit_log_log, ks_one_sample, ks_two_sample, q_grid};
use wavefront_core::{QueueConfiguration, SeedTree, Simulation, SpacingDistribution, StoppingRule, Stream, WaveRecord};

fn dist_strategy() -> impl Strategy<Value = SpacingDistribution> {
    prop_oneof![
        (0.05f64..1.0, 0.1f64..2.0).prop_map(|(lo, w)| SpacingDistribution::uniform(lo, lo + w).unwrap()),
        (0.05f64..1.0, 0.1f64..2.0).prop_map(|(lo, w)| SpacingDistribution::two_point(lo, lo + w).unwrap()),
        (0.05f64..1.0, 0.1f64..2.0, 0.0f64..1.0)
            .prop_map(|(lo, w, m)| SpacingDistribution::triangular(lo, lo + m * w, lo + w).unwrap()),
    ]
}

fn rule_strategy() -> impl Strategy<Value = StoppingRule> {
    prop_oneof![Just(StoppingRule::OwnPosition), Just(StoppingRule::PredecessorPosition)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn own_rule_keeps_wave_structure(d in dist_strategy(), seed in any::<u64>()) {
        let (lo, hi) = (d.c_minus(), d.c_plus());
        let mut sim = Simulation::seeded(d, &SeedTree::new(seed), 0).with_horizon_cap(5_000);
        let mut checker = StructureChecker::new(u64::MAX, lo, hi).with_sweep_every(50);
        sim.run(400, &mut [&mut checker]);
        let rep = checker.into_report();
        prop_assert_eq!(rep.steps, 400);
        prop_assert!(rep.checks > 0);
        prop_assert_eq!(rep.total_violations(), 0, "{:?}", rep.violations);
    }

    #[test]
    fn positions_stay_ordered_under_either_rule(d in dist_strategy(), rule in rule_strategy(), seed in any::<u64>()) {
        let (lo, hi) = (d.c_minus(), d.c_plus());
        let mut sim = Simulation::seeded(d, &SeedTree::new(seed), 1).with_rule(rule).with_horizon_cap(5_000);
        for _ in 0..300 {
            let r = sim.step();
            prop_assert!(r.w >= 1);
            prop_assert!(r.l > 0.0);
            let cfg = sim.config_mut();
            cfg.ensure_rank(r.w as usize + 2);
            let p = cfg.positions();
            prop_assert_eq!(p[0], 0.0);
            for w in p.windows(2) {
                prop_assert!(w[1] > w[0]);
            }
            // Movers were placed by partial sums of law draws.
            for i in 1..r.w as usize {
                let s = p[i] - p[i - 1];
                prop_assert!(s >= lo - 1e-12 && s <= hi + 1e-12, "spacing {} = {}", i, s);
            }
        }
    }

    #[test]
    fn runs_are_reproducible(d in dist_strategy(), seed in any::<u64>(), rep in 0u64..100) {
        let a = Simulation::seeded(d.clone(), &SeedTree::new(seed), rep).run_collect(200);
        let b = Simulation::seeded(d, &SeedTree::new(seed), rep).run_collect(200);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn graphs_agree_from_the_coalescence_point(d in dist_strategy(), seed in any::<u64>(), steps in 1usize..200) {
        let mut sim = Simulation::seeded(d, &SeedTree::new(seed), 2).with_horizon_cap(100_000);
        for _ in 0..steps - 1 {
            sim.step();
        }
        sim.config_mut().enable_journal();
        let r = sim.step();
        let x_max = 2.0 * r.l + 16.0;
        let cfg = sim.config_mut();
        let prev = previous_positions(cfg, r.w, r.censored, x_max);
        prop_assume!(prev.is_some());
        let prev = GGraph::new(r.t - 1, CountingFunction::from_positions(prev.unwrap(), x_max));
        let curr = GGraph::new(r.t, CountingFunction::from_config(cfg, x_max));
        match coalescence_position(&prev, &curr) {
            Coalescence::At(x) => {
                // The graphs coincide from the end of the wave on.
                prop_assert!(x <= r.l + 1e-12, "x* {} beyond wave end {}", x, r.l);
                let n = 64;
                for k in 0..=n {
                    let y = (x + (x_max - x) * k as f64 / n as f64).min(x_max);
                    prop_assert_eq!(prev.eval(y), curr.eval(y), "at {}", y);
                }
            }
            Coalescence::BeyondWindow => prop_assert!(r.censored),
        }
    }

    #[test]
    fn particle_order_and_partition(n in 2usize..40, seed in any::<u64>(), gauss in any::<bool>()) {
        let inc = if gauss { Increment::Gaussian } else { Increment::Rademacher };
        let mut sys = ParticleSystem::grid(0.0, 0.1 * (n - 1) as f64, 0.1, 1e-3, inc);
        let mut rng = SeedTree::new(seed).rng(Stream::Particles, 0);
        let mut last = sys.cluster_count();
        for k in 1..=10 {
            sys.evolve(0.02 * k as f64, &mut rng).unwrap();
            let c = sys.clusters();
            prop_assert!(c.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(sys.cluster_count() <= last);
            last = sys.cluster_count();
            let roots: Vec<usize> = (0..n).map(|i| sys.cluster_of(i)).collect();
            // Clusters are runs of consecutive starts, labelled by their lowest member.
            prop_assert!(roots.windows(2).all(|w| w[0] <= w[1]));
            prop_assert!(roots.iter().enumerate().all(|(i, &r)| r <= i));
            let mut distinct = roots.clone();
            distinct.dedup();
            prop_assert_eq!(distinct.len(), sys.cluster_count());
        }
    }

    #[test]
    fn ks_distance_matches_brute_force(xs in prop::collection::vec(0.0f64..1.0, 1..60)) {
        let r = ks_one_sample(&xs, |x| x.clamp(0.0, 1.0));
        let mut s = xs.clone();
        s.sort_by(f64::total_cmp);
        let n = s.len() as f64;
        let brute = s
            .iter()
            .enumerate()
            .map(|(i, &x)| ((i + 1) as f64 / n - x).max(x - i as f64 / n))
            .fold(0.0, f64::max);
        prop_assert!((r.d - brute).abs() < 1e-12, "{} vs {}", r.d, brute);
        prop_assert!((0.0..=1.0).contains(&r.p_value));
    }

    #[test]
    fn two_sample_ks_is_symmetric(a in prop::collection::vec(-5.0f64..5.0, 1..40), b in prop::collection::vec(-5.0f64..5.0, 1..40)) {
        let ab = ks_two_sample(&a, &b);
        let ba = ks_two_sample(&b, &a);
        prop_assert!((ab.d - ba.d).abs() < 1e-12);
        prop_assert_eq!(ks_two_sample(&a, &a).d, 0.0);
        prop_assert!((0.0..=1.0).contains(&ab.d));
    }

    #[test]
    fn log_log_fit_recovers_power_laws(b in -3.0f64..3.0, a in -5.0f64..5.0) {
        let pts: Vec<(f64, f64)> = [2.0f64, 5.0, 11.0, 40.0, 300.0].iter().map(|&x| (x, (a + b * x.ln()).exp())).collect();
        let (slope, intercept, r2) = fit_log_log(&pts).unwrap();
        prop_assert!((slope - b).abs() < 1e-9);
        prop_assert!((intercept - a).abs() < 1e-9);
        prop_assert!(r2 > 1.0 - 1e-9);
    }

    #[test]
    fn q_grid_is_monotone(d in dist_strategy(), seed in any::<u64>()) {
        let js = [1u64, 4, 16];
        let ys = [-0.5, 0.0, 0.5, 2.0];
        let rows = q_grid(&js, &ys, &d, 500, &mut SeedTree::new(seed).rng(Stream::Walk, 0));
        let q = |j: u64, y: f64| rows.iter().find(|r| r.j == j && r.y == y).unwrap().q_hat;
        for w in js.windows(2) {
            for &y in &ys {
                prop_assert!(q(w[1], y) <= q(w[0], y));
            }
        }
        for &j in &js {
            for w in ys.windows(2) {
                prop_assert!(q(j, w[0]) <= q(j, w[1]));
            }
        }
    }

    #[test]
    fn waves_round_trip_exactly(recs in prop::collection::vec((1u64..1_000_000, any::<f64>(), any::<bool>()), 0..50)) {
        let records: Vec<WaveRecord> = recs
            .iter()
            .enumerate()
            .filter(|(_, r)| r.1.is_finite())
            .map(|(i, &(w, l, c))| WaveRecord { t: i as u64 + 1, w, l: l.abs(), censored: c })
            .collect();
        let mut buf = Vec::new();
        write_waves(&mut buf, &records).unwrap();
        let back = read_waves(buf.as_slice()).unwrap();
        prop_assert_eq!(back.len(), records.len());
        for (x, y) in back.iter().zip(&records) {
            prop_assert_eq!(x.l.to_bits(), y.l.to_bits());
            prop_assert_eq!((x.t, x.w, x.censored), (y.t, y.w, y.censored));
        }
    }
}

#[test]
fn lattice_head_step_is_exact() {
    let d = SpacingDistribution::uniform(0.5, 1.5).unwrap();
    let mut c = QueueConfiguration::lattice(1.0, d, SeedTree::new(0).rng(Stream::Tail, 0)).unwrap();
    // The first candidate is below 2 - c⁺, the second reaches 3 - c⁺ and stops the wave.
    let mut draws = [0.3, 1.4].into_iter();
    let r = c.advance(1, 10, StoppingRule::OwnPosition, || draws.next().unwrap());
    assert_eq!((r.w, r.l, r.censored), (2, 3.0, false));
    c.ensure_rank(3);
    assert_eq!(c.positions()[..4], [0.0, 0.3, 3.0, 4.0][..]);
}
