#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stegnet::net::{forward_decoder, StegoModel};
use stegnet::optim::{joint_loss, LossConfig};
use stegnet::pipeline::pair_gradients;
use stegnet::tensor::{Mode, Tensor};

/// One analytic-vs-numeric gradient comparison.
#[derive(Debug, Clone)]
pub struct FdCheck {
    pub param: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

impl FdCheck {
    pub fn rel_error(&self) -> f64 {
        let scale = self.analytic.abs().max(self.numeric.abs());
        if scale == 0.0 {
            0.0
        } else {
            (self.analytic - self.numeric).abs() / scale
        }
    }

    /// Relative error below `1e-3` for entries above `1e-4`; tiny entries
    /// only need to agree absolutely.
    pub fn passes(&self) -> bool {
        if self.analytic.abs().max(self.numeric.abs()) > 1e-4 {
            self.rel_error() < 1e-3
        } else {
            (self.analytic - self.numeric).abs() < 1e-7
        }
    }
}

/// Joint loss of the full network with a fixed noise draw.
fn network_loss(model: &StegoModel<f64>, secret: &Tensor<f64>, cover: &Tensor<f64>, beta: f64, noise_seed: u64) -> f64 {
    let container = model.hide(secret, cover).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
    let revealed = forward_decoder(&model.decoder, &model.params, &container, Mode::Train, &mut rng).unwrap();
    joint_loss(cover, &container, secret, &revealed, &LossConfig { beta })
        .unwrap()
        .total
}

/// Stage prefixes used to group sampled parameters.
pub fn stage_of(param: &str) -> String {
    let layer = param.split('.').nth(1).unwrap_or(param);
    match layer.rsplit_once('_') {
        Some((stage, k)) if k.contains('x') => format!("{}.{stage}", param.split('.').next().unwrap()),
        _ => format!("{}.{layer}", param.split('.').next().unwrap()),
    }
}

/// Central finite differences of the joint loss for `per_stage` randomly
/// chosen entries of every stage, on an `size`×`size` network in f64.
pub fn network_fd_checks(size: usize, per_stage: usize, seed: u64) -> Vec<FdCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = StegoModel::<f64>::new(3, 0.01).unwrap();
    model.init_glorot(&mut rng);
    let secret = Tensor::from_fn([size, size, 3], |_| rng.random::<f64>());
    let cover = Tensor::from_fn([size, size, 3], |_| rng.random::<f64>());
    let beta = 0.75;
    let noise_seed = 99;

    let (_, grads) = pair_gradients(
        &model,
        &secret,
        &cover,
        &LossConfig { beta },
        &mut ChaCha8Rng::seed_from_u64(noise_seed),
    )
    .unwrap();

    let mut stages: Vec<(String, Vec<usize>)> = Vec::new();
    for (i, (name, _)) in model.params.iter().enumerate() {
        let stage = stage_of(name);
        match stages.iter_mut().find(|(s, _)| *s == stage) {
            Some((_, v)) => v.push(i),
            None => stages.push((stage, vec![i])),
        }
    }

    let h = 1e-6;
    let mut checks = Vec::new();
    for (_, members) in &stages {
        let sizes: Vec<usize> = members.iter().map(|&i| model.params.tensor(i).len()).collect();
        let total: usize = sizes.iter().sum();
        for _ in 0..per_stage {
            let mut k = rng.random_range(0..total);
            let mut which = 0;
            while k >= sizes[which] {
                k -= sizes[which];
                which += 1;
            }
            let p = members[which];
            let analytic = grads.get(p).map_or(0.0, |g| g[k]);
            let orig = model.params.tensor(p).data()[k];
            model.params.tensor_mut(p).data_mut()[k] = orig + h;
            let plus = network_loss(&model, &secret, &cover, beta, noise_seed);
            model.params.tensor_mut(p).data_mut()[k] = orig - h;
            let minus = network_loss(&model, &secret, &cover, beta, noise_seed);
            model.params.tensor_mut(p).data_mut()[k] = orig;
            checks.push(FdCheck {
                param: model.params.name(p).to_string(),
                index: k,
                analytic,
                numeric: (plus - minus) / (2.0 * h),
            });
        }
    }
    checks
}

/// Adam written out directly from its update equations, sharing no code
/// with the library.
pub struct ReferenceAdam {
    pub lr: f64,
    pub b1: f64,
    pub b2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl ReferenceAdam {
    pub fn new(n: usize, lr: f64) -> Self {
        Self {
            lr,
            b1: 0.9,
            b2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, theta: &mut [f64], g: &[f64]) {
        self.t += 1;
        for i in 0..theta.len() {
            self.m[i] = self.b1 * self.m[i] + (1.0 - self.b1) * g[i];
            self.v[i] = self.b2 * self.v[i] + (1.0 - self.b2) * g[i] * g[i];
            let m_hat = self.m[i] / (1.0 - self.b1.powi(self.t));
            let v_hat = self.v[i] / (1.0 - self.b2.powi(self.t));
            theta[i] -= self.lr * m_hat / (v_hat + self.eps).sqrt();
        }
    }
}

/// Permutation for seed 42 and grid side 14, computed by a standalone
/// SplitMix64 + Fisher–Yates script.
pub const GOLDEN_PERM_42_14: [usize; 196] = [
    134, 13, 176, 100, 30, 187, 154, 112, 136, 99, 152, 33, 150, 78,
    6, 25, 189, 161, 155, 29, 122, 193, 8, 59, 195, 57, 64, 190,
    9, 89, 183, 43, 139, 105, 149, 140, 87, 86, 49, 164, 44, 180,
    46, 19, 146, 56, 55, 32, 172, 124, 0, 111, 40, 92, 173, 60,
    144, 159, 109, 160, 135, 116, 85, 147, 125, 50, 34, 90, 93, 72,
    191, 156, 141, 26, 62, 65, 163, 185, 69, 123, 194, 177, 108, 23,
    51, 119, 71, 110, 169, 179, 2, 192, 75, 73, 15, 68, 137, 188,
    148, 67, 175, 70, 52, 17, 170, 80, 76, 184, 79, 178, 143, 162,
    129, 28, 83, 1, 58, 37, 96, 11, 98, 97, 102, 20, 84, 113,
    117, 114, 39, 128, 133, 153, 5, 81, 130, 35, 4, 157, 77, 182,
    166, 3, 45, 22, 27, 53, 142, 74, 21, 171, 48, 101, 118, 167,
    24, 82, 14, 120, 42, 10, 61, 103, 127, 106, 138, 131, 186, 158,
    132, 126, 47, 174, 107, 104, 12, 168, 181, 16, 88, 18, 36, 121,
    95, 94, 91, 38, 115, 63, 151, 41, 165, 7, 66, 54, 31, 145,
];
