use robustkit::enhance::{self, EnhanceConfig, TrainableEmbedder};
use robustkit::{synthetic, Embedder, PerturbationKind, PerturbationSpec, ToyEmbedder};

fn setup() -> (Vec<(String, robustkit::Image)>, Vec<(String, robustkit::Image)>, PerturbationSpec) {
    let all = synthetic::corpus_with_contrast(40, 24, 24, 3, 0.1);
    let (train, probe) = all.split_at(30);
    (train.to_vec(), probe.to_vec(), PerturbationSpec::new(PerturbationKind::GaussianNoise))
}

#[test]
fn default_config_moves_towards_robustness() {
    let (train, probe, spec) = setup();
    let f = TrainableEmbedder::identity(ToyEmbedder::default());
    let cfg = EnhanceConfig::default();
    let (_, history) = enhance::finetune(&f, &f, &train, &probe, &spec, &cfg).unwrap();
    assert_eq!(history.len(), cfg.epochs + 1);
    assert!(history.last().unwrap().probe_rdr < history[0].probe_rdr);
}

#[test]
fn lambda_trades_robustness_for_utility() {
    let (train, probe, spec) = setup();
    let f = TrainableEmbedder::identity(ToyEmbedder::default());
    let run = |lambda: f64| {
        let cfg = EnhanceConfig {
            lambda,
            epochs: 10,
            learning_rate: 0.3,
            batch_size: 1,
            seed: 1,
        };
        *enhance::finetune(&f, &f, &train, &probe, &spec, &cfg).unwrap().1.last().unwrap()
    };
    let (free, tied) = (run(0.0), run(5.0));
    assert!(free.probe_cos <= tied.probe_cos);
    assert!(free.probe_rdr <= tied.probe_rdr);
}

#[test]
fn descent_with_step_halving_never_increases_the_objective() {
    let (train, _, spec) = setup();
    let f = TrainableEmbedder::identity(ToyEmbedder::new(2));
    let fprime = TrainableEmbedder::perturbed_identity(ToyEmbedder::new(2), 0.2, 5);
    let cfg = EnhanceConfig::default();
    let pairs = enhance::epoch_pairs(&fprime, &f, &train, &spec, &cfg, 0).unwrap();
    let mut w = fprime.weights().clone();
    let mut lr = 1.0;
    let mut prev = enhance::pair_loss(&w, &pairs, cfg.lambda).unwrap().total;
    for _ in 0..30 {
        let g = enhance::pair_grad(&w, &pairs, cfg.lambda).unwrap();
        loop {
            let candidate = &w - lr * &g;
            let total = enhance::pair_loss(&candidate, &pairs, cfg.lambda).unwrap().total;
            if total <= prev {
                w = candidate;
                prev = total;
                break;
            }
            assert!(lr > 1e-9, "no decrease even at the smallest step");
            lr = (lr / 2.0).max(1e-9);
        }
    }
}

#[test]
fn outputs_stay_unit_norm_through_training() {
    let (train, probe, spec) = setup();
    let f = TrainableEmbedder::identity(ToyEmbedder::default());
    let cfg = EnhanceConfig {
        epochs: 5,
        learning_rate: 1.0,
        batch_size: 4,
        ..Default::default()
    };
    let (trained, history) = enhance::finetune(&f, &f, &train, &probe, &spec, &cfg).unwrap();
    for h in &history {
        assert!((h.total - (h.l1 + cfg.lambda * h.l2)).abs() < 1e-15);
        assert!((-1.0..=1.0).contains(&h.l1) && (-1.0..=1.0).contains(&h.l2));
    }
    for (_, img) in train.iter().chain(&probe) {
        let e = trained.embed(img).unwrap();
        let norm: f64 = e.as_slice().iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-9);
    }
}

#[test]
fn training_is_reproducible() {
    let (train, probe, spec) = setup();
    let f = TrainableEmbedder::identity(ToyEmbedder::new(2));
    let cfg = EnhanceConfig {
        epochs: 3,
        learning_rate: 0.5,
        batch_size: 7,
        seed: 11,
        ..Default::default()
    };
    let a = enhance::finetune(&f, &f, &train, &probe, &spec, &cfg).unwrap();
    let b = enhance::finetune(&f, &f, &train, &probe, &spec, &cfg).unwrap();
    assert_eq!(a.0, b.0);
    assert_eq!(a.1, b.1);
}
