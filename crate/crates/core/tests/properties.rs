use ndarray::{Array1, Array2};
use proptest::prelude::*;

use modetrain::diagnostics::{hidden_certainty, log_hidden_certainty, spin_distance};
use modetrain::rbm::{convert_convention, energy, NodeState};
use modetrain::solvers::{exhaustive_ground_state, gauge_transform, rbm_to_max2sat};
use modetrain::training::mode_probability;
use modetrain::{Convention, RbmParams};

/// Plain-loop energy, independent of the library's linear algebra.
fn oracle_energy(rbm: &RbmParams, v: &[f64], h: &[f64]) -> f64 {
    let mut e = 0.0;
    for (i, vi) in v.iter().enumerate() {
        e -= rbm.visible_bias[i] * vi;
        for (j, hj) in h.iter().enumerate() {
            e -= vi * rbm.weights[[i, j]] * hj;
        }
    }
    for (j, hj) in h.iter().enumerate() {
        e -= rbm.hidden_bias[j] * hj;
    }
    e
}

fn bits(x: u32, len: usize) -> Vec<bool> {
    (0..len).map(|i| (x >> i) & 1 == 1).collect()
}

fn model(convention: Convention, biased: bool) -> impl Strategy<Value = RbmParams> {
    (1usize..=4, 1usize..=4).prop_flat_map(move |(n, m)| {
        (
            prop::collection::vec(-2.0f64..2.0, n * m),
            prop::collection::vec(-2.0f64..2.0, n),
            prop::collection::vec(-2.0f64..2.0, m),
        )
            .prop_map(move |(w, a, b)| {
                let a = if biased { a } else { vec![0.0; n] };
                let b = if biased { b } else { vec![0.0; m] };
                RbmParams::new(
                    Array2::from_shape_vec((n, m), w).unwrap(),
                    Array1::from(a),
                    Array1::from(b),
                    convention,
                )
                .unwrap()
            })
    })
}

fn pm_state(n: usize, m: usize) -> impl Strategy<Value = NodeState> {
    (
        prop::collection::vec(any::<bool>(), n),
        prop::collection::vec(any::<bool>(), m),
    )
        .prop_map(|(v, h)| {
            let f = |b: &bool| if *b { 1.0 } else { -1.0 };
            NodeState::new(v.iter().map(f).collect(), h.iter().map(f).collect())
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn conversion_shifts_every_energy_by_the_same_offset(rbm in model(Convention::ZeroOne, true), x in any::<u32>()) {
        let (n, m) = (rbm.n_visible(), rbm.n_hidden());
        let (pm, offset) = convert_convention(&rbm, Convention::PlusMinus);
        let b = bits(x, n + m);
        let v01: Vec<f64> = b[..n].iter().map(|&t| f64::from(u8::from(t))).collect();
        let h01: Vec<f64> = b[n..].iter().map(|&t| f64::from(u8::from(t))).collect();
        let vpm: Vec<f64> = v01.iter().map(|x| 2.0 * x - 1.0).collect();
        let hpm: Vec<f64> = h01.iter().map(|x| 2.0 * x - 1.0).collect();
        let e01 = oracle_energy(&rbm, &v01, &h01);
        let epm = oracle_energy(&pm, &vpm, &hpm);
        prop_assert!((epm - (e01 + offset)).abs() < 1e-10);
        // Round trip back to 0/1 restores the parameters.
        let (back, back_offset) = convert_convention(&pm, Convention::ZeroOne);
        prop_assert!((back_offset + offset).abs() < 1e-10);
        for (x, y) in back.weights.iter().zip(rbm.weights.iter()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn library_energy_matches_loop_oracle(rbm in model(Convention::PlusMinus, true), x in any::<u32>()) {
        let (n, m) = (rbm.n_visible(), rbm.n_hidden());
        let b = bits(x, n + m);
        let s: Vec<f64> = b.iter().map(|&t| if t { 1.0 } else { -1.0 }).collect();
        let state = NodeState::new(Array1::from(s[..n].to_vec()), Array1::from(s[n..].to_vec()));
        prop_assert!((energy(&rbm, &state).unwrap() - oracle_energy(&rbm, &s[..n], &s[n..])).abs() < 1e-12);
    }

    #[test]
    fn max2sat_energy_plus_satisfied_weight_is_constant(rbm in model(Convention::PlusMinus, true), x in any::<u32>()) {
        let (n, m) = (rbm.n_visible(), rbm.n_hidden());
        let inst = rbm_to_max2sat(&rbm).unwrap();
        let assignment = bits(x, n + m);
        let s: Vec<f64> = assignment.iter().map(|&t| if t { 1.0 } else { -1.0 }).collect();
        let constant = 3.0 * rbm.weights.iter().map(|w| w.abs()).sum::<f64>()
            + rbm.visible_bias.iter().map(|a| a.abs()).sum::<f64>()
            + rbm.hidden_bias.iter().map(|b| b.abs()).sum::<f64>();
        let sat = inst.satisfied_weight(&assignment);
        prop_assert!((oracle_energy(&rbm, &s[..n], &s[n..]) + sat - constant).abs() < 1e-10);
    }

    #[test]
    fn gauge_preserves_the_energy_spectrum(rbm in model(Convention::PlusMinus, false)) {
        let (n, m) = (rbm.n_visible(), rbm.n_hidden());
        let gs = exhaustive_ground_state(&rbm).unwrap();
        let gauged = gauge_transform(&rbm, &gs).unwrap();
        let spectrum = |r: &RbmParams| {
            let mut es: Vec<f64> = (0..1u32 << (n + m))
                .map(|x| {
                    let s: Vec<f64> = bits(x, n + m).iter().map(|&t| if t { 1.0 } else { -1.0 }).collect();
                    oracle_energy(r, &s[..n], &s[n..])
                })
                .collect();
            es.sort_by(f64::total_cmp);
            es
        };
        for (a, b) in spectrum(&rbm).iter().zip(spectrum(&gauged)) {
            prop_assert!((a - b).abs() < 1e-10);
        }
        let ones = oracle_energy(&gauged, &vec![1.0; n], &vec![1.0; m]);
        prop_assert!((ones - gs.energy).abs() < 1e-10);
    }

    #[test]
    fn spin_distance_is_a_symmetric_pseudometric(
        (a, b, c) in (1usize..=4, 1usize..=4).prop_flat_map(|(n, m)| (pm_state(n, m), pm_state(n, m), pm_state(n, m)))
    ) {
        let d = |x: &NodeState, y: &NodeState| spin_distance(x, y).unwrap();
        prop_assert!((d(&a, &b) - d(&b, &a)).abs() < 1e-15);
        prop_assert!(d(&a, &a).abs() < 1e-15);
        prop_assert!(d(&a, &a.flipped(Convention::PlusMinus)).abs() < 1e-15);
        prop_assert!((0.0..=1.0).contains(&d(&a, &b)));
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-12);
    }

    #[test]
    fn mode_probability_is_monotone_and_bounded(
        p_max in 0.0f64..=1.0, alpha in 0.0f64..1.0, beta in -20.0f64..5.0, n in 0usize..100_000
    ) {
        let p = mode_probability(n, p_max, alpha, beta);
        let q = mode_probability(n + 1, p_max, alpha, beta);
        prop_assert!(p <= q);
        prop_assert!((0.0..=p_max).contains(&q));
    }

    #[test]
    fn hidden_certainty_lies_in_unit_interval(rbm in model(Convention::ZeroOne, true), x in any::<u32>()) {
        let n = rbm.n_visible();
        let v: Array1<f64> = bits(x, n).iter().map(|&t| f64::from(u8::from(t))).collect();
        let r = hidden_certainty(&rbm, &v).unwrap();
        prop_assert!(r > 0.0 && r <= 1.0);
        // Product of per-unit maxima, from an independent sigmoid.
        let mut want = 1.0;
        for j in 0..rbm.n_hidden() {
            let field = rbm.hidden_bias[j] + (0..n).map(|i| v[i] * rbm.weights[[i, j]]).sum::<f64>();
            let p = 1.0 / (1.0 + (-field).exp());
            want *= p.max(1.0 - p);
        }
        prop_assert!((r - want).abs() < 1e-12);
    }
}

#[test]
fn spin_distance_triangle_inequality_on_all_3x3_triples() {
    let states: Vec<NodeState> = (0..64u32)
        .map(|x| {
            let s: Vec<f64> = bits(x, 6).iter().map(|&t| if t { 1.0 } else { -1.0 }).collect();
            NodeState::new(Array1::from(s[..3].to_vec()), Array1::from(s[3..].to_vec()))
        })
        .collect();
    let d: Vec<Vec<f64>> = states
        .iter()
        .map(|a| states.iter().map(|b| spin_distance(a, b).unwrap()).collect())
        .collect();
    for i in 0..64 {
        for j in 0..64 {
            assert_eq!(d[i][j], d[j][i]);
            for k in 0..64 {
                assert!(d[i][k] <= d[i][j] + d[j][k] + 1e-12);
            }
        }
    }
}

#[test]
fn log_certainty_does_not_underflow_at_large_width() {
    let m = 1024;
    let rbm = RbmParams::zeros(4, m, Convention::ZeroOne);
    let v = Array1::zeros(4);
    let log_r = log_hidden_certainty(&rbm, &v).unwrap();
    assert!((log_r - m as f64 * 0.5f64.ln()).abs() < 1e-9);
    assert!(log_r.is_finite());
}
