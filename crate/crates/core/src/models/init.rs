use rand::Rng as _;

use crate::engine::Tensor;
use crate::rng::Rng;

/// Uniform on `(-b, b)` with `b = 1 / sqrt(fan_in)`.
pub fn uniform_fan_in(shape: &[usize], fan_in: usize, rng: &mut Rng) -> Tensor {
    let b = 1.0 / (fan_in as f64).sqrt();
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| loop {
            let v = rng.random_range(-b..b);
            // random_range is half-open; keep the interval open on both ends.
            if v != -b {
                break v;
            }
        })
        .collect();
    Tensor::new(shape, data).expect("shape and data agree")
}
