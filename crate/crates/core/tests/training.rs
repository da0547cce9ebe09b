use nbv_core::net::{predict, train, Architecture, EpochStats, NetworkParams, NetworkSpec, Tensor4, TrainConfig};
use nbv_core::oracle::Example;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn example(edge: usize, label: u8, grid: Vec<f32>) -> Example {
    Example { object_id: 0, run_id: 0, iteration: 0, label, edge, grid }
}

/// Grids whose occupied octant is the class; everything else is noisy unknown.
fn octant_set(n: usize, edge: usize, seed: u64) -> Vec<Example> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = edge / 2;
    (0..n)
        .map(|i| {
            let label = (i % 8) as u8;
            let mut g = vec![0.0f32; edge * edge * edge];
            for x in 0..edge {
                for y in 0..edge {
                    for z in 0..edge {
                        let oct = (x / h) * 4 + (y / h) * 2 + z / h;
                        let base = if oct == label as usize { 0.9 } else { 0.5 };
                        g[(x * edge + y) * edge + z] = (base + rng.random_range(-0.1..0.1f32)).clamp(0.0, 1.0);
                    }
                }
            }
            example(edge, label, g)
        })
        .collect()
}

#[test]
fn a_duplicated_example_is_memorized() {
    let ex = octant_set(1, 32, 9).remove(0);
    let data = vec![ex.clone(), ex.clone()];
    let cfg = TrainConfig { epochs: 50, batch_size: 2, seed: 3, ..TrainConfig::default() };
    let out = train(&data, 14, Architecture::NbvNet, &cfg, |_| {}).unwrap();
    assert_eq!(out.history.last().unwrap().train_acc, 1.0);
    let t = Tensor4::from_grid(32, &ex.grid).unwrap();
    assert_eq!(predict(&out.params, &t).unwrap().0, ex.label as usize);
}

#[test]
fn octant_classes_are_learned() {
    let data = octant_set(100, 16, 1);
    let cfg = TrainConfig { epochs: 100, batch_size: 16, seed: 5, ..TrainConfig::default() };
    let mut best = 0.0f64;
    let out = train(&data, 8, Architecture::NbvNet, &cfg, |s: &EpochStats| best = best.max(s.test_acc)).unwrap();
    assert!(best > 0.9, "best held-out accuracy {best}");
    assert_eq!(out.test_indices.len(), 20);
}

#[test]
fn training_is_reproducible() {
    let data = octant_set(24, 8, 2);
    let cfg = TrainConfig { epochs: 4, batch_size: 5, seed: 11, ..TrainConfig::default() };
    let a = train(&data, 8, Architecture::NbvNet, &cfg, |_| {}).unwrap();
    let b = train(&data, 8, Architecture::NbvNet, &cfg, |_| {}).unwrap();
    assert_eq!(a.history, b.history);
    assert_eq!(a.params, b.params);
    let c = train(&data, 8, Architecture::NbvNet, &TrainConfig { seed: 12, ..cfg }, |_| {}).unwrap();
    assert_ne!(a.params, c.params);
}

#[test]
fn zero_epochs_return_the_initialization() {
    let data = octant_set(10, 8, 4);
    let cfg = TrainConfig { epochs: 0, seed: 21, ..TrainConfig::default() };
    let out = train(&data, 8, Architecture::FcBaseline, &cfg, |_| panic!("no epochs")).unwrap();
    assert!(out.history.is_empty());
    assert_eq!(out.best_epoch, None);
    let init = NetworkParams::init(NetworkSpec::fc_baseline(8, 8, 0.7), 21).unwrap();
    assert_eq!(out.params, init);
}

#[test]
fn bad_inputs_are_rejected() {
    let data = octant_set(3, 8, 0);
    let cfg = TrainConfig { epochs: 1, ..TrainConfig::default() };
    assert!(train(&data[..1], 8, Architecture::NbvNet, &cfg, |_| {}).is_err());
    assert!(train(&data, 2, Architecture::NbvNet, &cfg, |_| {}).is_err());
    assert!(train(&data, 8, Architecture::Custom, &cfg, |_| {}).is_err());
    let mut mixed = data.clone();
    mixed.push(octant_set(1, 16, 0).remove(0));
    assert!(train(&mixed, 8, Architecture::NbvNet, &cfg, |_| {}).is_err());
}
