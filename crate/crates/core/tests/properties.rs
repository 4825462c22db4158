//! Property tests for the structural invariants of every layer.

mod common;

use num_complex::Complex64 as C;
use otoc_quench::algebra::{
    apply_gate_layer, field_sum, ising_xx, pauli_on_site, reflection_operator, DenseOperator, GateLayer, PauliAxis,
    Side,
};
use otoc_quench::analysis::{
    fit_power_law_values, ipr_of_amplitudes, ipr_of_values, saturation_stats_values, FitPolicy, IprOptions,
    SaturationWindow,
};
use otoc_quench::config::{Angle, RunConfig};
use otoc_quench::evolution::{build_kick, cumulative_unitary, ChainParams, EvolutionState, HeisenbergConvention};
use otoc_quench::otoc::{make_observables, otoc_from_commutator, run_otoc, ObservableFamily, ObservableSpec};
use otoc_quench::schedules::{fields_at_kick, QuenchProtocol};
use otoc_quench::spectral::{
    palindrome_projector, project_unitary, score_nnsd, HistogramOptions, PalindromeProjector, Parity,
    SpacingEnsemble, Verdict,
};
use proptest::prelude::*;
use std::f64::consts::PI;

fn hermitian(n: usize, entries: &[(f64, f64)]) -> DenseOperator {
    let d = 1usize << n;
    let raw = DenseOperator::from_fn(n, |i, j| {
        let (re, im) = entries[(i * d + j) % entries.len()];
        C::new(re, im)
    })
    .unwrap();
    raw.add(&raw.adjoint()).unwrap()
}

fn protocol_strategy() -> impl Strategy<Value = QuenchProtocol> {
    prop_oneof![
        (-2.0..2.0f64, -4.0..4.0f64, 0.0..0.5f64).prop_map(|(hx, hz, g)| QuenchProtocol::linear(hx, hz, g)),
        (-4.0..4.0f64, -4.0..4.0f64, 1.0..60.0f64).prop_map(|(hx, hz, t)| QuenchProtocol::periodic(hx, hz, t)),
        (-2.0..2.0f64, -2.0..2.0f64).prop_map(|(hx, hz)| QuenchProtocol::constant(hx, hz)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn layers_match_dense_products_and_keep_the_norm(
        n in 2..=4usize,
        seed in proptest::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 7..40),
        kind in 0..3usize,
        site in 1..=4usize,
        angle in -PI..PI,
    ) {
        let w = hermitian(n, &seed);
        let site = site.min(n);
        let layer = match kind {
            0 => GateLayer::diagonal_z(site, angle),
            1 => GateLayer::x_field(site, angle),
            _ => GateLayer::x_bond(site.min(n - 1), angle),
        };
        let g = layer.dense(n).unwrap();
        let left = apply_gate_layer(&w, &layer, Side::Left).unwrap();
        prop_assert!(left.max_abs_diff(&g.matmul(&w).unwrap()).unwrap() < 1e-10);
        let right = apply_gate_layer(&w, &layer, Side::RightConjugate).unwrap();
        prop_assert!(right.max_abs_diff(&w.matmul(&g.adjoint()).unwrap()).unwrap() < 1e-10);
        let rel = (left.frobenius_norm() - w.frobenius_norm()).abs() / w.frobenius_norm();
        prop_assert!(rel < 1e-10);
    }

    #[test]
    fn kicks_are_unitary_and_reflection_symmetric(
        n in prop_oneof![Just(2usize), Just(4), Just(6)],
        tau in 0.05..1.5f64,
        j in -2.0..2.0f64,
        proto in protocol_strategy(),
        kicks in 1..12usize,
    ) {
        let params = ChainParams::new(n, j, tau);
        let u = cumulative_unitary(&params, &proto, kicks).unwrap();
        prop_assert!(u.unitarity_defect() < 1e-10);
        prop_assert!(u.reflection_commutator_norm() < 1e-9);
        let step = build_kick(&params, &proto, kicks).unwrap();
        prop_assert!(step.dense().unitarity_defect() < 1e-10);
    }

    #[test]
    fn heisenberg_evolution_keeps_hermiticity_and_norm(
        n in 2..=4usize,
        seed in proptest::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 5..30),
        proto in protocol_strategy(),
        conv in prop_oneof![Just(HeisenbergConvention::UWUdag), Just(HeisenbergConvention::UdagWU)],
    ) {
        let w = hermitian(n, &seed);
        let norm = w.frobenius_norm();
        let mut state = EvolutionState::new(ChainParams::new(n, 1.0, 0.4), proto, w, conv, true).unwrap();
        for _ in 0..20 {
            state.advance().unwrap();
        }
        prop_assert!(state.observable().hermiticity_defect() < 1e-10);
        prop_assert!((state.observable().frobenius_norm() - norm).abs() / norm < 1e-10);
        let u = common::engine::to_matrix(&state.unitary_sweep().unwrap().unitary());
        let expected = match conv {
            HeisenbergConvention::UWUdag => {
                &u * common::engine::to_matrix(&hermitian(n, &seed)) * u.adjoint()
            }
            HeisenbergConvention::UdagWU => return Ok(()),
        };
        prop_assert!(common::engine::max_diff(&common::engine::to_matrix(state.observable()), &expected) < 1e-9);
    }

    #[test]
    fn otoc_pieces_are_consistent(
        n in prop_oneof![Just(2usize), Just(4), Just(6)],
        family in proptest::sample::select(ObservableFamily::ALL.to_vec()),
        proto in protocol_strategy(),
        kicks in 1..6usize,
    ) {
        let spec = if family.is_block() { ObservableSpec::new(family) } else { ObservableSpec::local(family, 1, n) };
        let params = ChainParams::new(n, 1.0, PI / 4.0);
        let series = run_otoc(&params, &proto, &spec, kicks).unwrap();
        prop_assert_eq!(series.c[0], 0.0);
        for k in 0..=kicks {
            prop_assert!((series.c[k] - (series.c2[k] - series.c4[k])).abs() < 1e-12);
            if !family.is_block() {
                prop_assert!((series.c2[k] - 1.0).abs() < 1e-10);
            }
        }
        let (w, v) = make_observables(&spec, n).unwrap();
        let mut state = EvolutionState::new(params, proto, w, HeisenbergConvention::UWUdag, false).unwrap();
        for _ in 0..kicks {
            state.advance().unwrap();
        }
        let direct = otoc_from_commutator(state.observable(), &v).unwrap();
        prop_assert!((direct - series.c[kicks]).abs() < 1e-10);
    }

    #[test]
    fn constant_fields_do_not_depend_on_the_kick(hx in -3.0..3.0f64, hz in -3.0..3.0f64, tau in 0.01..2.0f64, n in 0..500usize) {
        let p = QuenchProtocol::linear(hx, hz, 0.0);
        prop_assert_eq!(fields_at_kick(&p, 1.0, tau, n).unwrap(), fields_at_kick(&p, 1.0, tau, 1).unwrap());
    }

    #[test]
    fn periodic_longitudinal_angles_telescope(hx in -4.0..4.0f64, den in prop_oneof![Just(4u32), Just(6), Just(16)], mult in 1..5u32) {
        let tau = PI / den as f64;
        let t_max = tau * (mult * den) as f64;
        let p = QuenchProtocol::periodic(hx, 1.0, t_max);
        let steps = p.kick_count(tau).unwrap();
        let sum: f64 = (0..steps).map(|n| fields_at_kick(&p, 1.0, tau, n).unwrap().theta_x).sum();
        let a = PI / (2.0 * t_max);
        prop_assert!((sum - hx / a * (1.0 - (a * t_max).cos())).abs() < 1e-12 * (1.0 + hx.abs() / a));
    }

    #[test]
    fn projectors_are_reflection_even_isometries(n in prop_oneof![Just(2usize), Just(4), Just(6)], odd in any::<bool>()) {
        let parity = if odd { Parity::Odd } else { Parity::Even };
        let p = PalindromeProjector::new(n, parity).unwrap();
        let iso = p.isometry();
        let d = 1usize << n;
        let sign = if odd { -1.0 } else { 1.0 };
        for a in 0..p.dim() {
            for b in 0..p.dim() {
                let dot: f64 = (0..d).map(|k| iso[a][k] * iso[b][k]).sum();
                let expected = if a == b { 1.0 } else { 0.0 };
                prop_assert!((dot - expected).abs() < 1e-12);
            }
            let r = reflection_operator(n).unwrap();
            for k in 0..d {
                let rp: f64 = (0..d).map(|m| r.get(k, m).re * iso[a][m]).sum();
                prop_assert!((rp - sign * iso[a][k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn spacings_have_unit_mean(phases in proptest::collection::vec(-10.0..10.0f64, 2..300)) {
        let e = SpacingEnsemble::from_phases(1, phases.iter().copied()).unwrap();
        prop_assert_eq!(e.len(), phases.len());
        prop_assert!(e.spacings.iter().all(|&s| s >= 0.0));
        prop_assert!((e.mean() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn histogram_is_a_density_and_verdict_follows_margin(
        spacings in proptest::collection::vec(0.0..3.9f64, 50..400),
        bins in 5..40usize,
        margin in 0.0..0.5f64,
    ) {
        let opts = HistogramOptions { bins, s_cut: 4.0, margin };
        let s = score_nnsd(&SpacingEnsemble::from_spacings(1, spacings), opts).unwrap();
        let area: f64 = s.edges.windows(2).zip(&s.density).map(|(e, h)| (e[1] - e[0]) * h).sum();
        prop_assert!((area - 1.0).abs() < 1e-6);
        let (dw, dp) = (s.distance_wd, s.distance_poisson);
        let expected = if dp < (1.0 - margin) * dw {
            Verdict::PoissonLike
        } else if dw < (1.0 - margin) * dp {
            Verdict::WignerDysonLike
        } else {
            Verdict::Inconclusive
        };
        prop_assert_eq!(s.verdict, expected);
    }

    #[test]
    fn power_laws_are_recovered(b in 0.3..12.0f64, a in 1e-9..1e-3f64) {
        let values: Vec<f64> = (0..60).map(|n| a * (n as f64).powf(b)).collect();
        let fit = fit_power_law_values(&values, FitPolicy::Explicit { n_lo: 1, n_hi: 59 }).unwrap();
        prop_assert!((fit.b - b).abs() < 1e-6);
    }

    #[test]
    fn ipr_bounds_and_invariances(raw in proptest::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 1..64), phase in -PI..PI, rot in 0..64usize) {
        let norm: f64 = raw.iter().map(|(a, b)| a * a + b * b).sum::<f64>().sqrt();
        prop_assume!(norm > 1e-3);
        let amps: Vec<C> = raw.iter().map(|&(a, b)| C::new(a, b) / norm).collect();
        let r = ipr_of_amplitudes(&amps).unwrap();
        prop_assert!(r.xi >= 1.0 - 1e-12 && r.xi <= amps.len() as f64 + 1e-9);
        let turned: Vec<C> = amps.iter().map(|z| z * C::from_polar(1.0, phase)).collect();
        prop_assert!((ipr_of_amplitudes(&turned).unwrap().xi - r.xi).abs() < 1e-9 * r.xi);
        let mut shuffled = amps.clone();
        shuffled.rotate_left(rot % amps.len());
        prop_assert!((ipr_of_amplitudes(&shuffled).unwrap().xi - r.xi).abs() < 1e-9 * r.xi);
    }

    #[test]
    fn fourier_ipr_ignores_scale_and_obeys_parseval(values in proptest::collection::vec(-2.0..2.0f64, 64..200), scale in 0.01..100.0f64) {
        let energy: f64 = values.iter().map(|v| v * v).sum();
        prop_assume!(energy > 1e-6);
        let opts = IprOptions::default();
        let a = ipr_of_values(&values, opts).unwrap();
        let scaled: Vec<f64> = values.iter().map(|v| v * scale).collect();
        prop_assert!((ipr_of_values(&scaled, opts).unwrap().xi - a.xi).abs() < 1e-9 * a.xi);
        let spectral: f64 = otoc_quench::analysis::dft(&values).iter().map(|f| f.norm_sqr()).sum();
        prop_assert!((spectral - values.len() as f64 * energy).abs() < 1e-9 * spectral);
        prop_assert!(a.xi >= 1.0 - 1e-12 && a.xi <= values.len() as f64 + 1e-9);
    }

    #[test]
    fn saturation_spread_is_nonnegative(values in proptest::collection::vec(0.1..2.0f64, 2..100), f in 0.05..1.0f64) {
        let s = saturation_stats_values(&values, SaturationWindow::LastFraction(f));
        if let Ok(s) = s {
            prop_assert!(s.std >= 0.0 && s.osc_ratio >= 0.0);
            prop_assert!(s.window.1 == values.len() - 1);
        }
    }

    #[test]
    fn angles_round_trip(num in -64i64..64, den in 1i64..64, x in -100.0..100.0f64) {
        for a in [Angle::pi_fraction(num, den), Angle::decimal(x)] {
            let back: Angle = a.to_string().parse().unwrap();
            prop_assert_eq!(back.to_string(), a.to_string());
            prop_assert!((back.value() - a.value()).abs() <= 1e-12 * a.value().abs().max(1.0));
        }
    }

    #[test]
    fn numbers_keep_twelve_significant_digits(x in prop_oneof![-1e6..1e6f64, -1e-7..1e-7f64, -1e20..1e20f64]) {
        let text = otoc_quench::output::fmt_num(x);
        let back: f64 = text.parse().unwrap();
        prop_assert!((back - x).abs() <= 5e-12 * x.abs());
        prop_assert!(!text.contains(','));
    }

    #[test]
    fn only_even_chains_validate(n in 1..17usize) {
        let c = RunConfig { n_sites: n, ..RunConfig::default() };
        let ok = c.validate().is_ok();
        prop_assert_eq!(ok, n % 2 == 0 && n >= 2);
        if n % 2 == 1 {
            prop_assert!(c.validate().unwrap_err().message.contains("N must be even"));
        }
    }
}

#[test]
fn paulis_square_to_one_and_fields_commute_with_reflection() {
    for n in [2, 4, 6] {
        let id = DenseOperator::identity(n).unwrap();
        for axis in [PauliAxis::X, PauliAxis::Y, PauliAxis::Z] {
            for site in 1..=n {
                let p = pauli_on_site(axis, site, n).unwrap();
                assert!(p.matmul(&p).unwrap().max_abs_diff(&id).unwrap() < 1e-12);
            }
        }
        let r = reflection_operator(n).unwrap();
        for h in [ising_xx(n).unwrap(), field_sum(PauliAxis::X, n).unwrap(), field_sum(PauliAxis::Z, n).unwrap()] {
            assert!(h.commutator(&r).unwrap().max_norm() < 1e-12);
        }
    }
}

#[test]
fn projection_preserves_unitarity() {
    let params = ChainParams::new(6, 1.0, PI / 4.0);
    let u = cumulative_unitary(&params, &QuenchProtocol::linear(1.0, 1.0, 0.1), 7).unwrap();
    let s = project_unitary(&u, &palindrome_projector(6).unwrap()).unwrap();
    assert_eq!(s.dim(), 36);
    assert!(s.unitarity_defect() < 1e-12);
}
