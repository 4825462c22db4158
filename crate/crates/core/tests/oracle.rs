mod common;

use common::engine::{self, otoc_error};
use common::*;
use otoc_quench::evolution::{build_kick, cumulative_unitary, ChainParams, HeisenbergConvention};
use otoc_quench::otoc::{ObservableFamily, ObservableSpec};
use otoc_quench::schedules::QuenchProtocol;
use std::f64::consts::PI;

#[test]
fn engine_matches_dense_reference_on_small_chains() {
    let worst = engine::small_chain_sweep();
    assert!(worst < 1e-9, "max abs error {worst:e}");
}

#[test]
fn block_x_four_sites_third_kick() {
    let e = otoc_error(4, engine::linear(), ObservableSpec::new(ObservableFamily::BlockX), HeisenbergConvention::UWUdag, 3);
    assert!(e < 1e-9, "{e:e}");
}

#[test]
fn six_sites_short_run() {
    for s in [engine::linear(), engine::periodic()] {
        let e = otoc_error(6, s, ObservableSpec::new(ObservableFamily::BlockZ), HeisenbergConvention::UWUdag, 6);
        assert!(e < 1e-9, "{e:e}");
        let e = otoc_error(6, s, ObservableSpec::local(ObservableFamily::LocalPauliX, 2, 5), HeisenbergConvention::UdagWU, 6);
        assert!(e < 1e-9, "{e:e}");
    }
}

#[test]
fn constant_protocol_is_a_power_of_one_kick() {
    let params = ChainParams::new(4, 1.0, 0.3);
    let proto = QuenchProtocol::constant(0.7, 1.3);
    let one = engine::to_matrix(build_kick(&params, &proto, 1).unwrap().dense());
    let mut power = one.clone();
    for n in 2..=20 {
        power = &one * &power;
        let u = engine::to_matrix(&cumulative_unitary(&params, &proto, n).unwrap());
        assert!(engine::max_diff(&u, &power) < 1e-9, "n = {n}");
    }
}

#[test]
fn kick_angles_agree_with_closed_forms() {
    use otoc_quench::schedules::fields_at_kick;
    for s in [engine::linear(), engine::periodic()] {
        for n in 0..40 {
            let f = fields_at_kick(&engine::protocol(s), 1.0, PI / 4.0, n).unwrap();
            let (tz, tx) = angles(s, PI / 4.0, n);
            assert!((f.theta_z - tz).abs() < 1e-13 && (f.theta_x - tx).abs() < 1e-13);
            assert!((f.theta_j - PI / 4.0).abs() < 1e-15);
        }
    }
}
