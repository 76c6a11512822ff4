use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stegnet::cipher::{derive_key, encrypt};
use stegnet::imaging::{mse_per_pixel, synth_dataset, ImageBuffer, SynthKind};
use stegnet::net::{GradientSet, StegoModel};
use stegnet::optim::LossConfig;
use stegnet::pipeline::{pair_gradients, residual_attack, send, train, TrainConfig};
use stegnet::tensor::Tensor;

#[test]
fn every_encoder_parameter_receives_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut model = StegoModel::<f32>::new(3, 0.01).unwrap();
    model.init_glorot(&mut rng);
    let imgs = synth_dataset(4, 8, 8, SynthKind::Mixed).unwrap();
    let key = derive_key(1, 2).unwrap();
    let mut total = GradientSet::for_params(&model.params);
    for pair in imgs.chunks(2) {
        let secret = encrypt(&pair[1], &key).unwrap().to_tensor();
        let cover = pair[0].to_tensor();
        let seed = rng.random();
        let (_, g) = pair_gradients(&model, &secret, &cover, &LossConfig { beta: 1.0 }, &mut ChaCha8Rng::seed_from_u64(seed))
            .unwrap();
        total.merge(&g).unwrap();
    }
    for (i, (name, _)) in model.params.iter().enumerate() {
        let g = total.get(i).unwrap_or_else(|| panic!("{name} has no gradient"));
        if name.starts_with("encoder.") && name.ends_with(".weight") {
            assert!(g.iter().any(|&v| v != 0.0), "{name} gradient is all zero");
        }
    }
}

#[test]
fn secret_term_reaches_encoder_through_decoder() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut model = StegoModel::<f64>::new(3, 0.0).unwrap();
    model.init_glorot(&mut rng);
    let s = Tensor::from_fn([8, 8, 3], |_| rng.random::<f64>());
    let c = Tensor::from_fn([8, 8, 3], |_| rng.random::<f64>());
    let grads = |beta: f64| {
        pair_gradients(&model, &s, &c, &LossConfig { beta }, &mut ChaCha8Rng::seed_from_u64(0))
            .unwrap()
            .1
    };
    let (g0, g1) = (grads(0.0), grads(1.0));
    let i = model.params.index_of("encoder.conv_prep0_3x3.weight").unwrap();
    let diff: f64 = g0.get(i).unwrap().iter().zip(g1.get(i).unwrap()).map(|(a, b)| (a - b).abs()).sum();
    assert!(diff > 0.0);
    let d = model.params.index_of("decoder.output_S.weight").unwrap();
    assert!(g0.get(d).is_none_or(|g| g.iter().all(|&v| v == 0.0)));
}

#[test]
fn byte_metrics_track_float_metrics() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut model = StegoModel::<f32>::new(3, 0.01).unwrap();
    model.init_glorot(&mut rng);
    // shrink the output layer so the container stays inside [0, 1]
    model.params.get_mut("encoder.output_C.weight").unwrap().scale(0.05);
    let b = model.params.get_mut("encoder.output_C.bias").unwrap();
    b.data_mut().fill(0.5);
    let imgs = synth_dataset(5, 6, 16, SynthKind::Mixed).unwrap();
    for pair in imgs.chunks(2) {
        let key = derive_key(2, 4).unwrap();
        let container = send(&pair[1], &pair[0], &key, &model).unwrap();
        let float = model.hide(&encrypt(&pair[1], &key).unwrap().to_tensor(), &pair[0].to_tensor()).unwrap();
        assert!(float.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
        let cover = pair[0].to_tensor::<f32>();
        let errors: Vec<f64> = float.data().iter().zip(cover.data()).map(|(&a, &b)| (a - b) as f64 * 255.0).collect();
        let n = errors.len() as f64;
        let float_mse = errors.iter().map(|e| e * e).sum::<f64>() / n;
        let mean_abs = errors.iter().map(|e| e.abs()).sum::<f64>() / n;
        let byte_mse = mse_per_pixel(&pair[0], &container).unwrap();
        // (e + q)² − e² = 2eq + q² with |q| ≤ 0.5
        assert!((float_mse - byte_mse).abs() <= mean_abs + 0.25, "{float_mse} vs {byte_mse}");
    }
}

#[test]
fn residual_attack_is_deterministic() {
    let mut model = StegoModel::<f32>::new(3, 0.01).unwrap();
    model.init_glorot(&mut ChaCha8Rng::seed_from_u64(1));
    let imgs = synth_dataset(6, 2, 8, SynthKind::Shapes).unwrap();
    let key = derive_key(4, 2).unwrap();
    let a = residual_attack(&imgs[1], &imgs[0], Some(&key), &model).unwrap();
    let b = residual_attack(&imgs[1], &imgs[0], Some(&key), &model).unwrap();
    assert_eq!(a, b);
    let plain = residual_attack(&imgs[1], &imgs[0], None, &model).unwrap();
    assert!(plain.similarity.is_finite());
}

#[test]
fn short_runs_reduce_loss_and_are_reproducible() {
    let cfg = TrainConfig {
        epochs: 4,
        batch_size: 4,
        image_size: 8,
        grid_side: 2,
        dataset_pairs: 10,
        ..Default::default()
    };
    let a = train(&cfg).unwrap();
    let b = train(&cfg).unwrap();
    assert_eq!(a.checkpoint.to_bytes().unwrap(), b.checkpoint.to_bytes().unwrap());
    assert_eq!(a.records.len(), 4);
    assert!(a.records.iter().all(|r| r.cover_mse >= 0.0 && r.secret_mse >= 0.0));
    assert!(a.records[3].encode_loss < a.records[0].encode_loss);
    let flat = ImageBuffer::filled(8, 8, 3, 0).unwrap();
    assert!(a.model(0.01).unwrap().hide(&flat.to_tensor(), &flat.to_tensor()).is_ok());
}
