mod common;

use common::{fd_instances, fd_max_error, random_scorer};
use hoprank::objective::{hoprank_grad, hoprank_loss, ObjectiveConfig};
use hoprank::policy::Policy;

fn check(cfg: &ObjectiveConfig) {
    let insts = fd_instances();
    assert!(insts.len() >= 20);
    if let Err(msg) = fd_max_error(&insts, cfg) {
        panic!("{msg}");
    }
}

#[test]
fn gradient_matches_central_differences() {
    check(&ObjectiveConfig::default());
}

#[test]
fn gradient_matches_with_weights_and_sft_disabled() {
    check(&ObjectiveConfig {
        beta: 0.5,
        gamma: 0.0,
        use_dist_weight: false,
        use_rank_weight: false,
    });
}

#[test]
fn loss_and_grad_agree_on_breakdown() {
    let inst = &fd_instances()[0];
    let policy = random_scorer(1, 0.5);
    let reference = policy.snapshot();
    let cfg = ObjectiveConfig::default();
    let loss = hoprank_loss(inst, &policy, &reference, &cfg).unwrap();
    let (_, b) = hoprank_grad(inst, &policy, &reference, &cfg).unwrap();
    assert_eq!(loss, b);
    // θ = ref: every implicit reward is zero
    assert!(loss.psi.iter().all(|&p| p == 0.0));
}
