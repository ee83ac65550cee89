use std::collections::HashSet;

use nasforge::hwcost::models::lstm_sequence;
use nasforge::hwcost::{
    build_cost_dataset, evaluate_rmse, fit, profile_primitives, run_pipeline, CostModel, CostModelKind, DeviceSimulator,
    Normalizer, PrimitiveKey, ProfilingTable, TrainSettings,
};
use nasforge::rng::stream_rng;
use nasforge::space::{BlockFeature, BlockwiseSpace};

fn blocks(costs: &[f64]) -> Vec<BlockFeature> {
    costs
        .iter()
        .map(|&cost| BlockFeature {
            cost,
            in_shape: [16, 8, 8],
            out_shape: [16, 8, 8],
            kernel: 3,
            stride: 1,
        })
        .collect()
}

fn small_settings(epochs: usize) -> TrainSettings {
    TrainSettings {
        epochs,
        learning_rate: 0.005,
        batch_size: 32,
        mlp_hidden: vec![32],
        lstm_hidden: 16,
        ..TrainSettings::default()
    }
}

#[test]
fn noiseless_network_cost_examples() {
    let costs = [1.0, 2.0, 2.0];
    let gpu = DeviceSimulator::gpu_like(0).with_noise(0.0);
    let expected = 0.5 + 0.7 * 5.0 + 0.4 * 9.0f64.sqrt() + 0.02 * 3.0;
    assert!((gpu.network_true_cost(&blocks(&costs)).unwrap() - expected).abs() < 1e-12);

    let fpga = DeviceSimulator::fpga_like(0).with_noise(0.0);
    let expected = 1.0 + 0.6 * 5.0 + 0.8 * (0.85 * 5.0f64.ln()).exp();
    assert!((fpga.network_true_cost(&blocks(&costs)).unwrap() - expected).abs() < 1e-12);

    assert!(gpu.network_true_cost(&[]).is_err());
}

#[test]
fn noise_is_small_and_repeatable() {
    let noisy = DeviceSimulator::gpu_like(3);
    let clean = noisy.clone().with_noise(0.0);
    let b = blocks(&[1.5, 0.25, 3.0, 0.75]);
    let a = noisy.network_true_cost(&b).unwrap();
    assert_eq!(a.to_bits(), noisy.network_true_cost(&b).unwrap().to_bits());
    let ratio = a / clean.network_true_cost(&b).unwrap();
    assert!((ratio - 1.0).abs() < 0.06, "{ratio}");
    assert_ne!(ratio, 1.0);
}

#[test]
fn primitive_cost_tracks_macs() {
    let space = BlockwiseSpace::default();
    let dev = DeviceSimulator::gpu_like(1);
    for key in space.reachable_primitives() {
        let ratio = dev.primitive_cost(&key) / (key.macs() / 1e6);
        assert!((0.9..=1.1).contains(&ratio), "{key}: {ratio}");
        assert_eq!(key.to_string().parse::<PrimitiveKey>().unwrap(), key);
    }
    // 1×1 expand, 3×3 depthwise, 1×1 project on an 8×8×4 input.
    let key = PrimitiveKey {
        in_shape: [4, 8, 8],
        out_channels: 4,
        kernel: 3,
        stride: 1,
        expansion: 2,
    };
    assert_eq!(key.macs(), (64 * 4 * 8 + 64 * 8 * 9 + 64 * 8 * 4) as f64);
    assert!("ib_c4_h8".parse::<PrimitiveKey>().is_err());
}

#[test]
fn profiling_covers_every_reachable_primitive() {
    let space = BlockwiseSpace::default();
    let dev = DeviceSimulator::fpga_like(2);
    let table = profile_primitives(&space, &dev);
    let keys = space.reachable_primitives();
    assert_eq!(table.len(), keys.len());
    for k in &keys {
        assert_eq!(table.cost(k).unwrap(), dev.primitive_cost(k));
    }

    let mut buf = Vec::new();
    table.write_csv(&mut buf).unwrap();
    let back = ProfilingTable::read_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
    assert_eq!(back.len(), table.len());
    for (k, v) in table.iter() {
        assert_eq!(back.cost(k).unwrap(), *v);
    }
    assert!(ProfilingTable::read_csv("key,value\n").is_err());
}

#[test]
fn dataset_is_distinct_with_disjoint_splits() {
    let space = BlockwiseSpace::default();
    let dev = DeviceSimulator::gpu_like(4);
    let table = profile_primitives(&space, &dev);
    let mut rng = stream_rng(4, "data");
    let data = build_cost_dataset(&space, &dev, &table, 300, 100, &mut rng).unwrap();
    assert_eq!(data.samples.len(), 400);
    let distinct: HashSet<&Vec<usize>> = data.samples.iter().map(|s| &s.genotype).collect();
    assert_eq!(distinct.len(), 400);
    let train: HashSet<usize> = data.train.iter().copied().collect();
    assert!(data.test.iter().all(|i| !train.contains(i)));
    for s in &data.samples {
        assert!((10..=20).contains(&s.features.len()));
        assert!(s.cost > 0.0);
        assert_eq!(s.features, space.block_features(&s.genotype, &table).unwrap());
    }

    let tiny = BlockwiseSpace {
        depth_choices: vec![1],
        expansion_choices: vec![3],
        kernel_choices: vec![3, 5],
        ..BlockwiseSpace::with_stages(1)
    };
    let table = profile_primitives(&tiny, &dev);
    assert!(build_cost_dataset(&tiny, &dev, &table, 2, 1, &mut rng).is_err());
    assert!(build_cost_dataset(&space, &dev, &table, 0, 1, &mut rng).is_err());
}

#[test]
fn additive_device_makes_the_sum_exact() {
    let space = BlockwiseSpace::default();
    let dev = DeviceSimulator::gpu_like(5).with_coeffs(&[0.0, 1.0, 0.0, 0.0]).with_noise(0.0);
    let out = run_pipeline(&space, &dev, &[CostModelKind::Sum, CostModelKind::Linear1], 100, 50, &TrainSettings::default(), 5).unwrap();
    assert!(out.report.row("sum").unwrap().rmse < 1e-9);
    match &out.models[1] {
        CostModel::Linear1 { a, b } => {
            assert!((a - 1.0).abs() < 1e-9 && b.abs() < 1e-7, "{a} {b}");
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn linear_models_recover_their_generating_coefficients() {
    let space = BlockwiseSpace::default();
    let affine = DeviceSimulator::fpga_like(6).with_coeffs(&[2.0, 3.0, 0.0]).with_noise(0.0);
    let out = run_pipeline(&space, &affine, &[CostModelKind::Linear1], 100, 50, &TrainSettings::default(), 6).unwrap();
    assert!(out.report.rows[0].rmse < 1e-8);

    let counted = DeviceSimulator::gpu_like(6).with_coeffs(&[0.3, 0.9, 0.0, 0.05]).with_noise(0.0);
    let out = run_pipeline(&space, &counted, &[CostModelKind::Linear2], 100, 50, &TrainSettings::default(), 6).unwrap();
    match out.models[0] {
        CostModel::Linear2 { a, b, c } => {
            assert!((a - 0.9).abs() < 1e-8 && (b - 0.05).abs() < 1e-8 && (c - 0.3).abs() < 1e-7);
        }
        ref other => panic!("{other:?}"),
    }
}

#[test]
fn linear2_fits_at_least_as_well_as_linear1() {
    let space = BlockwiseSpace::default();
    for seed in 0..3 {
        let dev = DeviceSimulator::gpu_like(seed);
        let out = run_pipeline(&space, &dev, &[CostModelKind::Linear1, CostModelKind::Linear2], 300, 100, &TrainSettings::default(), seed).unwrap();
        assert!(out.fits[1].final_train_mse <= out.fits[0].final_train_mse + 1e-12);
    }
}

#[test]
fn learned_models_reduce_training_error() {
    let space = BlockwiseSpace::default();
    let dev = DeviceSimulator::fpga_like(7);
    let table = profile_primitives(&space, &dev);
    let mut rng = stream_rng(7, "data");
    let data = build_cost_dataset(&space, &dev, &table, 300, 100, &mut rng).unwrap();
    let train = data.train_samples();
    let settings = small_settings(30);
    let (sum, _) = fit(CostModelKind::Sum, &train, &settings).unwrap();
    let naive = evaluate_rmse(&sum, &data.test_samples()).unwrap();
    for kind in [CostModelKind::Mlp, CostModelKind::Lstm] {
        let (model, report) = fit(kind, &train, &settings).unwrap();
        assert!(report.final_train_mse < report.initial_train_mse, "{kind:?}");
        assert!(evaluate_rmse(&model, &data.test_samples()).unwrap() < naive, "{kind:?}");
        let (again, _) = fit(kind, &train, &settings).unwrap();
        assert_eq!(again, model);
    }
}

#[test]
fn lstm_prediction_depends_on_block_order() {
    let space = BlockwiseSpace::with_stages(2);
    let dev = DeviceSimulator::gpu_like(8);
    let table = profile_primitives(&space, &dev);
    let mut rng = stream_rng(8, "data");
    let data = build_cost_dataset(&space, &dev, &table, 100, 20, &mut rng).unwrap();
    let (model, _) = fit(CostModelKind::Lstm, &data.train_samples(), &small_settings(5)).unwrap();
    let (sum, _) = fit(CostModelKind::Sum, &data.train_samples(), &small_settings(5)).unwrap();
    let f = &data.samples[0].features;
    let mut rev = f.clone();
    rev.reverse();
    assert!((model.predict(f).unwrap() - model.predict(&rev).unwrap()).abs() > 1e-9);
    assert!((sum.predict(f).unwrap() - sum.predict(&rev).unwrap()).abs() < 1e-12);
    if let CostModel::Lstm(m) = &model {
        assert_eq!(lstm_sequence(f, &m.x_norm).len(), f.len());
    }
}

#[test]
fn mlp_rejects_networks_longer_than_its_padding() {
    let space = BlockwiseSpace::default();
    let dev = DeviceSimulator::gpu_like(9);
    let table = profile_primitives(&space, &dev);
    let mut rng = stream_rng(9, "data");
    let data = build_cost_dataset(&space, &dev, &table, 50, 10, &mut rng).unwrap();
    let settings = TrainSettings {
        mlp_pad_len: 5,
        ..small_settings(1)
    };
    assert!(fit(CostModelKind::Mlp, &data.train_samples(), &settings).is_err());
    assert!(fit(CostModelKind::Mlp, &[], &settings).is_err());
}

#[test]
fn normalizer_round_trips() {
    let rows = [vec![1.0, 5.0, 7.0], vec![3.0, 5.0, -1.0], vec![2.0, 5.0, 0.5]];
    let n = Normalizer::fit(rows.iter().map(Vec::as_slice), 3);
    assert_eq!(n.mean, vec![2.0, 5.0, 6.5 / 3.0]);
    assert_eq!(n.std[1], 1.0);
    for r in &rows {
        let z = n.normalize(r);
        for (a, b) in n.denormalize(&z).iter().zip(r) {
            assert!((a - b).abs() < 1e-12);
        }
    }
    let zs: Vec<f64> = rows.iter().map(|r| n.normalize(r)[0]).collect();
    assert!(zs.iter().sum::<f64>().abs() < 1e-12);
    assert!((zs.iter().map(|z| z * z).sum::<f64>() / 3.0 - 1.0).abs() < 1e-12);
}

#[test]
fn report_lists_improvement_over_naive_addition() {
    let space = BlockwiseSpace::with_stages(3);
    let dev = DeviceSimulator::gpu_like(10);
    let out = run_pipeline(&space, &dev, &CostModelKind::ALL, 200, 50, &small_settings(10), 10).unwrap();
    let sum = out.report.row("sum").unwrap();
    assert_eq!(sum.improvement_vs_sum, 1.0);
    for row in &out.report.rows {
        assert_eq!(row.scatter.len(), 50);
        assert!((row.improvement_vs_sum - sum.rmse / row.rmse).abs() < 1e-12);
    }
    let text = out.report.to_text();
    for kind in CostModelKind::ALL {
        assert!(text.contains(kind.name()));
    }
    let dir = tempfile::tempdir().unwrap();
    out.write_to(dir.path()).unwrap();
    let table = ProfilingTable::load(&dir.path().join("table.csv")).unwrap();
    assert_eq!(table.len(), out.table.len());
}
