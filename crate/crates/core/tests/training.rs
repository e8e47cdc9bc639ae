use hoprank::error::Error;
use hoprank::graph::{generate_synthetic, SyntheticSpec};
use hoprank::objective::{hoprank_loss, ObjectiveConfig};
use hoprank::policy::{BilinearScorer, ModelConfig, Policy, PolicySnapshot};
use hoprank::sampler::{build_dataset, PreferenceInstance, SamplerConfig};
use hoprank::trainer::{train, train_split, Schedule, TrainConfig};

fn dataset() -> Vec<PreferenceInstance> {
    let spec = SyntheticSpec {
        nodes_per_class: 30,
        p_intra: 0.15,
        p_inter: 0.01,
        ..Default::default()
    };
    let g = generate_synthetic(&spec).unwrap();
    build_dataset(&g, &SamplerConfig::default()).unwrap().0
}

fn model() -> BilinearScorer {
    ModelConfig {
        dim: 16,
        ..Default::default()
    }
    .init()
}

fn config() -> TrainConfig {
    TrainConfig {
        learning_rate: 0.05,
        momentum: 0.9,
        batch_size: 16,
        epochs: 2,
        eval_every: 10,
        patience: 0,
        ..Default::default()
    }
}

/// The chosen text swapped with the first rejected text.
fn flipped(inst: &PreferenceInstance) -> PreferenceInstance {
    let mut out = inst.clone();
    let (a, b) = (out.candidates[0].text.clone(), out.candidates[1].text.clone());
    out.candidates[0].text = b;
    out.candidates[1].text = a;
    out
}

fn mean_loss(p: &BilinearScorer, reference: &PolicySnapshot, set: &[PreferenceInstance]) -> f64 {
    let cfg = ObjectiveConfig::default();
    set.iter().map(|i| hoprank_loss(i, p, reference, &cfg).unwrap().total).sum::<f64>() / set.len() as f64
}

#[test]
fn zero_learning_rate_leaves_parameters_unchanged() {
    let ds = dataset();
    let mut p = model();
    let init = p.clone();
    let r = train(&mut p, &ds, &ObjectiveConfig::default(), &TrainConfig { learning_rate: 0.0, ..config() }).unwrap();
    assert!(r.steps_taken() > 0);
    assert_eq!(p, init);
}

#[test]
fn zero_epochs_returns_the_initialization() {
    let ds = dataset();
    let mut p = model();
    let init = p.clone();
    let r = train(&mut p, &ds, &ObjectiveConfig::default(), &TrainConfig { epochs: 0, ..config() }).unwrap();
    assert_eq!(r.steps_taken(), 0);
    assert!(r.evals.is_empty());
    assert_eq!(p, init);
}

#[test]
fn steps_are_bounded_and_updates_clipped() {
    let ds = dataset();
    let mut p = model();
    let cfg = TrainConfig { grad_clip: 0.05, ..config() };
    let r = train(&mut p, &ds, &ObjectiveConfig::default(), &cfg).unwrap();
    let per_epoch = r.train_size.div_ceil(cfg.batch_size);
    assert_eq!(r.planned_steps, cfg.epochs * per_epoch);
    assert!(r.steps_taken() <= r.planned_steps);
    assert!(r.steps.iter().any(|s| s.grad_norm > cfg.grad_clip));
    for s in &r.steps {
        assert!(s.applied_norm <= cfg.grad_clip * (1.0 + 1e-12));
        if s.grad_norm <= cfg.grad_clip {
            assert_eq!(s.applied_norm, s.grad_norm);
        }
    }
}

#[test]
fn training_lowers_training_loss() {
    let ds = dataset();
    let mut p = model();
    let reference = p.snapshot();
    let before = mean_loss(&p, &reference, &ds);
    train(&mut p, &ds, &ObjectiveConfig::default(), &config()).unwrap();
    let after = mean_loss(&p, &reference, &ds);
    assert!(after < before, "{after} !< {before}");
}

#[test]
fn reference_snapshot_is_frozen() {
    let ds = dataset();
    let mut p = model();
    let snap = p.snapshot();
    let init: Vec<f64> = p.params().to_vec();
    train(&mut p, &ds, &ObjectiveConfig::default(), &config()).unwrap();
    assert_ne!(p.params(), init.as_slice());
    assert_eq!(snap.params(), init.as_slice());
    p.params_mut()[0] += 1.0;
    assert_eq!(snap.params(), init.as_slice());
}

#[test]
fn adversarial_holdout_stops_at_second_eval_and_restores_best() {
    let ds = dataset();
    let train_set: Vec<PreferenceInstance> = ds.iter().step_by(2).cloned().collect();
    let holdout: Vec<PreferenceInstance> = train_set.iter().take(60).map(flipped).collect();
    let mut p = model();
    let reference = p.snapshot();
    let cfg = TrainConfig {
        patience: 1,
        schedule: Schedule::Constant,
        ..config()
    };
    let r = train_split(&mut p, &train_set, &holdout, &ObjectiveConfig::default(), &cfg).unwrap();
    assert!(r.stopped_early);
    assert_eq!(r.evals.len(), 2);
    assert!(r.evals[1].loss > r.evals[0].loss);
    assert_eq!(r.steps_taken(), 2 * cfg.eval_every);
    assert_eq!(r.best_step, Some(cfg.eval_every));
    let restored = mean_loss(&p, &reference, &holdout);
    assert!((restored - r.best_loss.unwrap()).abs() < 1e-9, "{restored} vs {:?}", r.best_loss);
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let ds = dataset();
    let run = |threads| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let mut p = model();
            let r = train(&mut p, &ds, &ObjectiveConfig::default(), &config()).unwrap();
            (p, r)
        })
    };
    let (a, ra) = run(1);
    let (b, rb) = run(4);
    assert_eq!(a, b);
    assert_eq!(ra, rb);
}

#[test]
fn non_finite_parameters_name_the_instance() {
    let ds = dataset();
    let mut p = model();
    p.params_mut()[3] = f64::NAN;
    let holdout = &ds[..5];
    let err = train_split(&mut p, &ds[5..], holdout, &ObjectiveConfig::default(), &config());
    // the reference snapshot is NaN too, so the first instance already fails
    assert!(matches!(err, Err(Error::NonFiniteLoss { step: 0, .. })), "{err:?}");
}
