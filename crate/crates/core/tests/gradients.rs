mod common;

use common::*;

fn assert_all(checks: Vec<Check>) {
    for c in &checks {
        println!("{:<40} {:.3e}", c.name, c.max_rel_error);
    }
    let bad: Vec<&Check> = checks.iter().filter(|c| !(c.max_rel_error < GRAD_TOL)).collect();
    assert!(bad.is_empty(), "{bad:?}");
}

#[test]
fn every_layer_kind() {
    assert_all(layer_checks());
}

#[test]
fn every_loss() {
    assert_all(loss_checks());
}

#[test]
fn vargan_networks() {
    assert_all(vargan_network_checks());
}

#[test]
fn cbigan_networks() {
    assert_all(cbigan_network_checks());
}
