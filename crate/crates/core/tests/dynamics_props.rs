mod common;

use common::{n2, oracle, q_only, rel_close, t_rovib, toy_table};
use num_complex::Complex64;
use proptest::prelude::*;
use rovib::dynamics::{coherence_at, coherence_in_frame, signal_trace, DecayModel};

fn undecayed() -> DecayModel {
    DecayModel::None
}

#[test]
fn five_line_oracle_at_random_times() {
    use rand::{Rng, SeedableRng};
    let mut c = n2(-2.6e-5);
    c.beta_e = Some(1.55e-8);
    let amps = [
        Complex64::new(0.4, 0.1),
        Complex64::new(0.25, -0.05),
        Complex64::new(0.08, 0.02),
        Complex64::new(-0.03, 0.06),
        Complex64::new(0.05, 0.0),
    ];
    let table = toy_table(&c, &amps);
    let spec: Vec<(u32, u32, Complex64)> = table.lines.iter().map(|l| (l.j_lower, l.j_upper, l.amplitude)).collect();
    assert_eq!(
        spec.iter().map(|s| (s.0, s.1)).collect::<Vec<_>>(),
        [(0, 0), (2, 2), (0, 2), (1, 3), (2, 0)]
    );
    let norm: f64 = amps.iter().map(|a| a.norm()).sum();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
    for decay in [DecayModel::None, DecayModel::Collisional { tau_c_ps: 256.0 }] {
        for _ in 0..100 {
            let t: f64 = rng.gen_range(0.0..100.0);
            let got = coherence_at(&table, decay, t);
            let want = oracle(&c, &spec, decay.tau_c(), t);
            assert!((got - want).norm() <= 1e-12 * norm, "t={t}: {got} vs {want}");
        }
    }
}

#[test]
fn trace_samples_match_pointwise_evaluation() {
    let c = n2(-2.6e-5);
    let table = q_only(&c, 295.0);
    let decay = DecayModel::Collisional { tau_c_ps: 256.0 };
    let tr = signal_trace(&table, decay, 0.0, 1100.0, 0.5, None).unwrap();
    assert_eq!(tr.len(), 2201);
    for i in (0..tr.len()).step_by(97) {
        let direct = coherence_at(&table, decay, tr.times[i]);
        assert!((tr.rho[i] - direct).norm() <= 1e-12, "t={}", tr.times[i]);
        assert_eq!(tr.signal[i], tr.rho[i].norm_sqr());
    }
    assert!(tr.times.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn revival_restores_initial_value() {
    let c = n2(-2.6e-5);
    let table = q_only(&c, 295.0);
    let t = t_rovib(&c);
    let r0 = coherence_at(&table, undecayed(), 0.0);
    let rt = coherence_at(&table, undecayed(), t);
    assert!((rt - r0).norm() <= 1e-10 * r0.norm(), "{rt} vs {r0}");
}

#[test]
fn half_revival_is_parity_weighted_sum() {
    let c = n2(-2.6e-5);
    let table = q_only(&c, 295.0);
    let half = coherence_at(&table, undecayed(), t_rovib(&c) / 2.0);
    // exp(−iπJ(J+1)/2) = (−1)^{J(J+1)/2}.
    let brute: f64 = table
        .lines
        .iter()
        .map(|l| {
            let k = l.j_lower * (l.j_lower + 1) / 2;
            if k % 2 == 0 { l.population } else { -l.population }
        })
        .sum();
    assert!((half.norm() - brute.abs()).abs() < 1e-10, "{} vs {brute}", half.norm());
    assert!(half.norm() < 0.5);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn frame_shift_is_a_pure_phase(t in 0.0f64..1100.0, shift in -20.0f64..20.0) {
        let c = n2(-2.6e-5);
        let table = q_only(&c, 295.0);
        let decay = DecayModel::Collisional { tau_c_ps: 256.0 };
        let base = coherence_at(&table, decay, t);
        let moved = coherence_in_frame(&table, decay, t, shift);
        let phase = 2.0 * std::f64::consts::PI * 0.029_979_245_8 * shift * t;
        let expect = base * Complex64::from_polar(1.0, phase);
        prop_assert!((moved - expect).norm() <= 1e-12, "{moved} vs {expect}");
        prop_assert!(rel_close(moved.norm_sqr(), base.norm_sqr(), 1e-12));
    }

    #[test]
    fn undecayed_q_trace_is_periodic(t in 0.0f64..1000.0) {
        let c = n2(-2.6e-5);
        let table = q_only(&c, 295.0);
        let big_t = t_rovib(&c);
        let a = coherence_at(&table, undecayed(), t).norm_sqr();
        let b = coherence_at(&table, undecayed(), t + big_t).norm_sqr();
        prop_assert!(rel_close(a, b, 1e-9), "{a} vs {b}");
    }

    #[test]
    fn trace_is_symmetric_about_the_revival(s in 0.0f64..960.0) {
        let c = n2(-2.6e-5);
        let table = q_only(&c, 295.0);
        let big_t = t_rovib(&c);
        let a = coherence_at(&table, undecayed(), s).norm_sqr();
        let b = coherence_at(&table, undecayed(), big_t - s).norm_sqr();
        prop_assert!(rel_close(a, b, 1e-9), "{a} vs {b}");
    }

    #[test]
    fn decay_is_a_multiplicative_envelope(tau in 20.0f64..2000.0, t1 in 50.0f64..1100.0) {
        let c = n2(-2.6e-5);
        let table = q_only(&c, 295.0);
        let free = signal_trace(&table, DecayModel::None, 0.0, t1, 0.5, None).unwrap();
        let damped = signal_trace(&table, DecayModel::Collisional { tau_c_ps: tau }, 0.0, t1, 0.5, None).unwrap();
        for ((t, d), f) in damped.times.iter().zip(&damped.signal).zip(&free.signal) {
            let restored = d * (2.0 * t / tau).exp();
            prop_assert!(rel_close(restored, *f, 1e-12), "t={t}: {restored} vs {f}");
        }
    }
}
