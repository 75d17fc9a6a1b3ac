use mqdd::experiment::{prepare, MqcConfig};
use mqdd::filter::{chi, filter_function_times};
use mqdd::linalg::unitarity_defect;
use mqdd::noise::NoiseModel;
use mqdd::propagate::Evolver;
use mqdd::sequence::{gen_dd, udd_instants, DDScheme, SchemeKind, SequenceEvent, Timing};
use mqdd::spin::{coherence_decompose, SpinSystem};
use proptest::prelude::*;

const US: f64 = 1e-6;

fn kind() -> impl Strategy<Value = SchemeKind> {
    prop::sample::select(SchemeKind::ALL.to_vec())
}

fn plain(kind: SchemeKind) -> SchemeKind {
    match kind {
        SchemeKind::CpmgP => SchemeKind::Cpmg,
        SchemeKind::UddP => SchemeKind::Udd,
        SchemeKind::RuddP => SchemeKind::Rudd,
        k => k,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn durations_sum_to_block_length(kind in kind(), n in 1usize..8, t_us in 40.0f64..200.0, cycles in 1usize..4) {
        let scheme = DDScheme::new(kind, n, Timing::Total(t_us * US), 4.3 * US).with_cycles(cycles);
        if let Ok(seq) = gen_dd(&scheme) {
            let sum: f64 = seq.events().iter().map(SequenceEvent::duration).sum();
            let expected = scheme.block_duration() * cycles as f64;
            prop_assert!((sum - expected).abs() <= 1e-12 * expected);
            prop_assert!(seq.events().iter().all(|e| e.duration() >= 0.0));
        }
    }

    #[test]
    fn udd_instants_are_symmetric(n in 1usize..40, t in 1e-6f64..1e-3) {
        let inst = udd_instants(n, t);
        for j in 0..n {
            prop_assert!((inst[j] + inst[n - 1 - j] - t).abs() <= 1e-15 * t);
        }
        prop_assert!(inst.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn alternation_changes_phases_only(kind in kind(), n in 1usize..8, t_us in 60.0f64..150.0) {
        prop_assume!(kind.alternating());
        let alt = gen_dd(&DDScheme::new(kind, n, Timing::Total(t_us * US), 4.3 * US));
        let base = gen_dd(&DDScheme::new(plain(kind), n, Timing::Total(t_us * US), 4.3 * US));
        prop_assert_eq!(alt.is_ok(), base.is_ok());
        if let (Ok(alt), Ok(base)) = (alt, base) {
            prop_assert_eq!(alt.len(), base.len());
            for (a, b) in alt.events().iter().zip(base.events()) {
                match (a, b) {
                    (SequenceEvent::Pulse(p), SequenceEvent::Pulse(q)) => {
                        prop_assert_eq!(p.duration, q.duration);
                        prop_assert_eq!(p.flip_angle, q.flip_angle);
                    }
                    (SequenceEvent::Delay { duration: x }, SequenceEvent::Delay { duration: y }) => {
                        prop_assert_eq!(x, y);
                    }
                    _ => prop_assert!(false, "event kinds differ"),
                }
            }
        }
    }

    #[test]
    fn filter_is_nonnegative_and_reversal_invariant(
        mut cuts in prop::collection::vec(0.0f64..1.0, 0..8),
        t in 1e-6f64..1e-3,
        omega_t in 0.0f64..200.0,
    ) {
        cuts.sort_by(f64::total_cmp);
        let mut times = vec![0.0];
        times.extend(cuts.iter().map(|c| c * t));
        times.push(t);
        let reversed: Vec<f64> = times.iter().rev().map(|x| t - x).collect();
        let omega = omega_t / t;
        let f = filter_function_times(&times, omega);
        let g = filter_function_times(&reversed, omega);
        prop_assert!(f >= 0.0);
        prop_assert!((f - g).abs() <= 1e-9 * (1.0 + f));
    }

    #[test]
    fn chi_scales_with_variance(n in 1usize..8, b in 1e3f64..1e5, scale in 0.1f64..10.0) {
        let seq = gen_dd(&DDScheme::new(SchemeKind::Cpmg, n, Timing::Total(58.1 * US), 4.3 * US)).unwrap();
        let one = chi(&seq, &NoiseModel::ornstein_uhlenbeck(b, 20.0 * US, 1)).unwrap().chi;
        let two = chi(&seq, &NoiseModel::ornstein_uhlenbeck(b * scale.sqrt(), 20.0 * US, 1)).unwrap().chi;
        prop_assert!((two - scale * one).abs() <= 1e-9 * two.abs().max(1e-300));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn propagators_are_unitary(kind in kind(), n in 1usize..6, m in 1usize..5, ideal in any::<bool>()) {
        let sys = SpinSystem::default_test(m).unwrap();
        let scheme = DDScheme::new(kind, n, Timing::Total(80.0 * US), 4.3 * US);
        prop_assume!(gen_dd(&scheme).is_ok());
        let seq = gen_dd(&scheme).unwrap();
        let u = Evolver::internal(&sys, true, ideal).unitary(&seq, 0.0, None);
        prop_assert!(unitarity_defect(&u) < 1e-12);
    }

    #[test]
    fn prepared_weight_is_conserved(spins in 2usize..6, cycles in 1usize..6) {
        let sys = SpinSystem::default_test(spins).unwrap();
        let cfg = MqcConfig { m: cycles, ..Default::default() };
        let rho = prepare(&sys, &cfg).unwrap();
        let total = coherence_decompose(&sys, &rho).unwrap().total();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }
}
