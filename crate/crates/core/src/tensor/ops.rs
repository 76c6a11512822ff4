use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{Scalar, Tensor};
use crate::error::{Error, Result};

/// Whether stochastic layers are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

pub fn relu<T: Scalar>(input: &Tensor<T>) -> Tensor<T> {
    input.map(|v| if v > T::zero() { v } else { T::zero() })
}

/// Passes `upstream` where the forward input (or, equivalently, output) was
/// strictly positive.
pub fn relu_backward<T: Scalar>(forward: &Tensor<T>, upstream: &Tensor<T>) -> Result<Tensor<T>> {
    forward.check_same_shape("relu_backward", upstream)?;
    let data = forward
        .data()
        .iter()
        .zip(upstream.data())
        .map(|(&x, &g)| if x > T::zero() { g } else { T::zero() })
        .collect();
    Tensor::new(forward.shape().to_vec(), data)
}

/// Concatenates `[H, W, Ci]` tensors along the channel axis in argument order.
pub fn concat_channels<T: Scalar>(parts: &[&Tensor<T>]) -> Result<Tensor<T>> {
    let Some(first) = parts.first() else {
        return Err(Error::invalid("parts", "concat_channels needs at least one tensor"));
    };
    let (h, w, _) = first.hwc()?;
    let mut widths = Vec::with_capacity(parts.len());
    for (i, p) in parts.iter().enumerate() {
        let (ph, pw, pc) = p.hwc()?;
        if (ph, pw) != (h, w) {
            return Err(Error::shape(
                "concat_channels",
                format!("part {i} is {ph}x{pw}, expected {h}x{w}"),
            ));
        }
        widths.push(pc);
    }
    let total: usize = widths.iter().sum();
    let mut data = Vec::with_capacity(h * w * total);
    for px in 0..h * w {
        for (p, &c) in parts.iter().zip(&widths) {
            data.extend_from_slice(&p.data()[px * c..(px + 1) * c]);
        }
    }
    Tensor::new([h, w, total], data)
}

/// Inverse of [`concat_channels`]: slices `[H, W, ΣCi]` back into parts.
pub fn split_channels<T: Scalar>(whole: &Tensor<T>, widths: &[usize]) -> Result<Vec<Tensor<T>>> {
    let (h, w, c) = whole.hwc()?;
    if widths.iter().sum::<usize>() != c {
        return Err(Error::shape(
            "split_channels",
            format!("widths {widths:?} do not sum to {c}"),
        ));
    }
    let mut parts: Vec<Vec<T>> = widths.iter().map(|&k| Vec::with_capacity(h * w * k)).collect();
    for px in 0..h * w {
        let mut off = px * c;
        for (buf, &k) in parts.iter_mut().zip(widths) {
            buf.extend_from_slice(&whole.data()[off..off + k]);
            off += k;
        }
    }
    parts
        .into_iter()
        .zip(widths)
        .map(|(d, &k)| Tensor::new([h, w, k], d))
        .collect()
}

/// Adds i.i.d. `N(0, stddev²)` noise in training mode; identity otherwise.
/// The backward rule is the identity in both modes.
pub fn gaussian_noise<T: Scalar, R: Rng + ?Sized>(
    input: &Tensor<T>,
    stddev: f64,
    mode: Mode,
    rng: &mut R,
) -> Result<Tensor<T>> {
    if !stddev.is_finite() || stddev < 0.0 {
        return Err(Error::invalid("stddev", format!("{stddev} must be finite and >= 0")));
    }
    if mode == Mode::Eval || stddev == 0.0 {
        return Ok(input.clone());
    }
    let normal = Normal::new(0.0, stddev).map_err(|e| Error::invalid("stddev", e.to_string()))?;
    Ok(input.map(|v| v + T::from_f64_lossy(normal.sample(rng))))
}

/// Mean squared error and its gradient with respect to `pred`.
pub fn mse_and_grad<T: Scalar>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<(f64, Tensor<T>)> {
    pred.check_same_shape("mse", target)?;
    let n = pred.len().max(1) as f64;
    let mut sum = 0.0f64;
    let scale = T::from_f64_lossy(2.0 / n);
    let grad = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&p, &t)| {
            let d = p - t;
            sum += d.as_f64() * d.as_f64();
            d * scale
        })
        .collect();
    Ok((sum / n, Tensor::new(pred.shape().to_vec(), grad)?))
}
