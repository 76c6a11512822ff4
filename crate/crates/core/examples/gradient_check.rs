//! Compares backpropagated gradients of the joint loss with central finite
//! differences on an 8x8 network in double precision.
//!
//! ```text
//! cargo run --release --example gradient_check -- [samples_per_tensor]
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stegnet::net::StegoModel;
use stegnet::optim::{joint_loss, LossConfig};
use stegnet::pipeline::pair_gradients;
use stegnet::tensor::{Mode, Tensor};

fn main() -> stegnet::Result<()> {
    let samples: usize = std::env::args().nth(1).map_or(2, |s| s.parse().expect("samples must be an integer"));
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut model = StegoModel::<f64>::new(3, 0.01)?;
    model.init_glorot(&mut rng);
    let secret = Tensor::from_fn([8, 8, 3], |_| rng.random::<f64>());
    let cover = Tensor::from_fn([8, 8, 3], |_| rng.random::<f64>());
    let loss_cfg = LossConfig::new(0.75)?;
    let noise_seed = 11;

    let loss = |m: &StegoModel<f64>| -> stegnet::Result<f64> {
        let container = m.hide(&secret, &cover)?;
        let revealed = m.reveal(&container, Mode::Train, &mut ChaCha8Rng::seed_from_u64(noise_seed))?;
        Ok(joint_loss(&cover, &container, &secret, &revealed, &loss_cfg)?.total)
    };
    let (_, grads) = pair_gradients(&model, &secret, &cover, &loss_cfg, &mut ChaCha8Rng::seed_from_u64(noise_seed))?;

    let h = 1e-6;
    let mut worst = 0.0f64;
    for p in 0..model.params.len() {
        for _ in 0..samples {
            let k = rng.random_range(0..model.params.tensor(p).len());
            let analytic = grads.get(p).map_or(0.0, |g| g[k]);
            let orig = model.params.tensor(p).data()[k];
            model.params.tensor_mut(p).data_mut()[k] = orig + h;
            let plus = loss(&model)?;
            model.params.tensor_mut(p).data_mut()[k] = orig - h;
            let minus = loss(&model)?;
            model.params.tensor_mut(p).data_mut()[k] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            let scale = analytic.abs().max(numeric.abs());
            let rel = if scale > 1e-4 { (analytic - numeric).abs() / scale } else { 0.0 };
            worst = worst.max(rel);
            println!("{:<40} {k:>6} {analytic:>14.6e} {numeric:>14.6e} {rel:>10.2e}", model.params.name(p));
        }
    }
    println!("worst relative error {worst:.3e}");
    Ok(())
}
