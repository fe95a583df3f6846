//! Decoder regression loss: MSE reporting, independent-output sample counts,
//! and the clipped-logistic error transform with its analytic gradient.
//!
//! The reported loss always uses full residuals; only the per-output
//! backpropagation errors are clipped. That keeps the printed loss an honest
//! progress measure while stopping large objects (long border vectors) from
//! dominating the gradient.

use crate::error::{Error, Result};
use crate::types::VectorField;

/// Configuration for the error clip. `amplitude` is the `A` parameter; the
/// transform saturates at `A/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    pub amplitude: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig { amplitude: 4.0 }
    }
}

impl LossConfig {
    pub fn new(amplitude: f64) -> Result<Self> {
        if amplitude.is_nan() || amplitude <= 0.0 {
            return Err(Error::validation(format!(
                "clip amplitude must be positive, got {amplitude}"
            )));
        }
        Ok(LossConfig { amplitude })
    }
}

/// Batch geometry: image count and decoder spatial dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchShape {
    pub n_images: usize,
    pub rows: usize,
    pub cols: usize,
}

impl BatchShape {
    pub fn new(n_images: usize, rows: usize, cols: usize) -> Result<Self> {
        if n_images == 0 || rows == 0 || cols == 0 {
            return Err(Error::validation(format!(
                "batch shape components must be >= 1, got ({n_images}, {rows}, {cols})"
            )));
        }
        Ok(BatchShape {
            n_images,
            rows,
            cols,
        })
    }
}

/// Number of independent outputs in a batch: two displacement channels per
/// pixel, `2 * n * r * c`.
pub fn sample_count(shape: BatchShape) -> Result<u64> {
    (shape.n_images as u64)
        .checked_mul(shape.rows as u64)
        .and_then(|v| v.checked_mul(shape.cols as u64))
        .and_then(|v| v.checked_mul(2))
        .ok_or_else(|| {
            Error::validation(format!(
                "sample count overflows for shape ({}, {}, {})",
                shape.n_images, shape.rows, shape.cols
            ))
        })
}

/// Mean squared error with the conventional 1/2 factor: `(1/2N) * sum((Y - Yhat)^2)`.
pub fn mse(targets: &[f64], predictions: &[f64]) -> Result<f64> {
    if targets.len() != predictions.len() {
        return Err(Error::validation(format!(
            "mse needs equal lengths, got {} targets and {} predictions",
            targets.len(),
            predictions.len()
        )));
    }
    if targets.is_empty() {
        return Err(Error::validation("mse of empty sequences is undefined"));
    }
    let sum: f64 = targets
        .iter()
        .zip(predictions)
        .map(|(y, yhat)| {
            let d = y - yhat;
            d * d
        })
        .sum();
    Ok(sum / (2.0 * targets.len() as f64))
}

/// Translated logistic error clip: `A * (1/(1 + e^-x) - 0.5)`, evaluated in
/// the algebraically identical and numerically stable form `(A/2) * tanh(x/2)`.
/// Odd, strictly increasing, linear near zero, saturating at +-A/2.
pub fn clip_error(x: f64, cfg: &LossConfig) -> f64 {
    0.5 * cfg.amplitude * (0.5 * x).tanh()
}

/// Analytic derivative of [`clip_error`]: `A * e^-x / (1 + e^-x)^2`,
/// evaluated as `A / (2 + e^x + e^-x)` so both tails underflow to zero
/// instead of overflowing. Even in `x`, maximal at the origin (`A/4`).
pub fn clip_error_grad(x: f64, cfg: &LossConfig) -> f64 {
    let s = x.exp() + (-x).exp();
    cfg.amplitude / (2.0 + s)
}

/// Loss evaluation over a batch: the reported full-residual MSE and the
/// clipped per-output gradient.
///
/// Gradient elements are ordered image by image, each image contributing its
/// dx channel then its dy channel, both row-major. Element `i` is
/// `clip_error(e_i) / N` for residual `e_i = Yhat_i - Y_i`, so every output
/// is updated with its own clipped error rather than a shared mean.
#[derive(Debug, Clone, PartialEq)]
pub struct LossResult {
    pub reported_loss: f64,
    pub gradient: Vec<f64>,
}

pub fn decoder_loss(
    targets: &[VectorField],
    predictions: &[VectorField],
    cfg: &LossConfig,
) -> Result<LossResult> {
    if targets.is_empty() {
        return Err(Error::validation("decoder loss needs at least one image"));
    }
    if targets.len() != predictions.len() {
        return Err(Error::validation(format!(
            "batch size mismatch: {} targets vs {} predictions",
            targets.len(),
            predictions.len()
        )));
    }
    let dims = targets[0].dims();
    for f in targets.iter().chain(predictions) {
        if f.dims() != dims {
            return Err(Error::validation(format!(
                "all fields in a batch must share dims {}x{}, found {}x{}",
                dims.rows,
                dims.cols,
                f.dims().rows,
                f.dims().cols
            )));
        }
    }
    let shape = BatchShape::new(targets.len(), dims.rows, dims.cols)?;
    let n = sample_count(shape)? as f64;

    let mut sum_sq = 0.0;
    let mut gradient = Vec::with_capacity(targets.len() * 2 * dims.len());
    for (t, p) in targets.iter().zip(predictions) {
        for (tc, pc) in [(t.dx(), p.dx()), (t.dy(), p.dy())] {
            for (y, yhat) in tc.iter().zip(pc) {
                let e = *yhat as f64 - *y as f64;
                sum_sq += e * e;
                gradient.push(clip_error(e, cfg) / n);
            }
        }
    }
    Ok(LossResult {
        reported_loss: sum_sq / (2.0 * n),
        gradient,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Dims;

    use rand::{Rng, SeedableRng};

    fn field(dims: Dims, dx: Vec<f32>, dy: Vec<f32>) -> VectorField {
        VectorField::new(dims, dx, dy).unwrap()
    }

    /// Central difference quotient of the clip transform, evaluated through
    /// the identity tanh(u) - tanh(v) = sinh(u - v) / (cosh(u) cosh(v)) so
    /// the subtraction never cancels. Independent of the production code
    /// path, which never forms this expression.
    fn clip_central_difference(x: f64, h: f64, amplitude: f64) -> f64 {
        let u = 0.5 * (x + h);
        let v = 0.5 * (x - h);
        0.5 * amplitude * (u - v).sinh() / ((2.0 * h) * u.cosh() * v.cosh())
    }

    #[test]
    fn sample_count_examples() {
        let n = |a, b, c| sample_count(BatchShape::new(a, b, c).unwrap()).unwrap();
        assert_eq!(n(1, 1, 1), 2);
        assert_eq!(n(6, 128, 256), 393_216);
        assert_eq!(n(3, 4, 5), 120);
    }

    #[test]
    fn sample_count_overflow_is_reported() {
        let shape = BatchShape::new(usize::MAX, usize::MAX, 2).unwrap();
        assert!(sample_count(shape).is_err());
    }

    #[test]
    fn mse_examples() {
        assert_eq!(mse(&[3.0, -1.0], &[3.0, -1.0]).unwrap(), 0.0);
        assert_eq!(mse(&[1.0, 3.0], &[0.0, 1.0]).unwrap(), 1.25);
        assert_eq!(mse(&[2.0], &[0.0]).unwrap(), 2.0);
        assert!(mse(&[1.0], &[1.0, 2.0]).is_err());
        assert!(mse(&[], &[]).is_err());
    }

    #[test]
    fn clip_error_matches_direct_logistic_form() {
        // The two published forms of the transform must agree; the direct
        // logistic expression is the independent route here.
        let cfg = LossConfig::default();
        for i in -200..=200 {
            let x = i as f64 * 0.1;
            let direct = cfg.amplitude * (1.0 / (1.0 + (-x).exp()) - 0.5);
            assert!(
                (clip_error(x, &cfg) - direct).abs() < 1e-12,
                "forms disagree at x={x}"
            );
        }
    }

    #[test]
    fn clip_error_examples() {
        let cfg = LossConfig::default();
        assert_eq!(clip_error(0.0, &cfg), 0.0);
        assert!((clip_error(50.0, &cfg) - 2.0).abs() < 1e-9);
        assert!((clip_error(-50.0, &cfg) + 2.0).abs() < 1e-9);
        assert!((clip_error(1.0, &cfg) - 0.9242343145200196).abs() < 1e-12);
    }

    #[test]
    fn clip_error_grad_examples() {
        let cfg = LossConfig::default();
        assert_eq!(clip_error_grad(0.0, &cfg), 1.0); // A/4
        assert!(clip_error_grad(50.0, &cfg) < 1e-9);
        assert!(clip_error_grad(-50.0, &cfg) < 1e-9);
        for i in 0..100 {
            let x = i as f64 * 0.37;
            assert_eq!(clip_error_grad(x, &cfg), clip_error_grad(-x, &cfg));
        }
    }

    #[test]
    fn clip_error_is_odd_and_bounded() {
        let cfg = LossConfig::new(4.0).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10_000 {
            // Beyond |x| ~ 37 the true value and A/2 are identical in f64,
            // so the strict bound is checked where it is representable.
            let x: f64 = rng.gen_range(-30.0..30.0);
            let v = clip_error(x, &cfg);
            assert_eq!(clip_error(-x, &cfg), -v);
            assert!(v.abs() < 0.5 * cfg.amplitude);
        }
    }

    #[test]
    fn clip_error_linear_near_origin() {
        for amplitude in [0.5, 2.0, 4.0, 8.0] {
            let cfg = LossConfig::new(amplitude).unwrap();
            for i in -100..=100 {
                let x = i as f64 * 1e-4;
                assert!((clip_error(x, &cfg) - 0.25 * amplitude * x).abs() <= 1e-4);
            }
        }
    }

    #[test]
    fn clip_error_strictly_increasing() {
        let cfg = LossConfig::default();
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=1000 {
            let x = -25.0 + i as f64 * 0.05;
            let v = clip_error(x, &cfg);
            assert!(v > prev, "not increasing at x={x}");
            prev = v;
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let cfg = LossConfig::default();
        let h = 1e-5;
        for i in 0..1000 {
            let x = -20.0 + 40.0 * i as f64 / 999.0;
            let numeric = clip_central_difference(x, h, cfg.amplitude);
            let analytic = clip_error_grad(x, &cfg);
            let rel = (analytic - numeric).abs() / numeric.abs();
            assert!(rel < 1e-6, "x={x}: analytic={analytic}, numeric={numeric}");
        }
    }

    #[test]
    fn decoder_loss_zero_for_equal_batches() {
        let dims = Dims::new(2, 3).unwrap();
        let t = vec![field(dims, vec![1.0; 6], vec![-2.0; 6])];
        let r = decoder_loss(&t, &t, &LossConfig::default()).unwrap();
        assert_eq!(r.reported_loss, 0.0);
        assert!(r.gradient.iter().all(|g| *g == 0.0));
    }

    #[test]
    fn decoder_loss_single_element_worked_example() {
        let dims = Dims::new(1, 1).unwrap();
        let target = vec![field(dims, vec![0.0], vec![0.0])];
        let pred = vec![field(dims, vec![10.0], vec![0.0])];
        let cfg = LossConfig::default();
        let r = decoder_loss(&target, &pred, &cfg).unwrap();
        // N = 2, full residuals (10, 0): loss = (100 + 0) / (2 * 2) = 25.
        assert_eq!(r.reported_loss, 25.0);
        assert_eq!(r.gradient.len(), 2);
        assert!((r.gradient[0] - clip_error(10.0, &cfg) / 2.0).abs() < 1e-15);
        assert!((r.gradient[0] - 0.9999092042625951).abs() < 1e-12);
        assert_eq!(r.gradient[1], 0.0);
        // Gradient magnitude stays under (A/2)/N.
        assert!(r.gradient[0].abs() < 0.5 * cfg.amplitude / 2.0);
    }

    #[test]
    fn saturated_residuals_move_loss_but_not_gradient() {
        let dims = Dims::new(2, 2).unwrap();
        let cfg = LossConfig::default();
        let target = vec![field(dims, vec![0.0; 4], vec![0.0; 4])];
        let once = vec![field(dims, vec![20.0; 4], vec![20.0; 4])];
        let twice = vec![field(dims, vec![40.0; 4], vec![40.0; 4])];
        let a = decoder_loss(&target, &once, &cfg).unwrap();
        let b = decoder_loss(&target, &twice, &cfg).unwrap();
        assert_eq!(b.reported_loss, 4.0 * a.reported_loss);
        for (ga, gb) in a.gradient.iter().zip(&b.gradient) {
            assert!((ga - gb).abs() < 1e-7);
        }
    }

    #[test]
    fn gradient_elements_are_independent() {
        let dims = Dims::new(1, 3).unwrap();
        let cfg = LossConfig::default();
        let target = vec![field(dims, vec![0.0; 3], vec![0.0; 3])];
        let base = vec![field(dims, vec![1.0, 2.0, 3.0], vec![0.5, 0.5, 0.5])];
        let bumped = vec![field(dims, vec![1.0, 7.0, 3.0], vec![0.5, 0.5, 0.5])];
        let a = decoder_loss(&target, &base, &cfg).unwrap();
        let b = decoder_loss(&target, &bumped, &cfg).unwrap();
        for i in 0..a.gradient.len() {
            if i == 1 {
                assert_ne!(a.gradient[i], b.gradient[i]);
            } else {
                assert_eq!(a.gradient[i], b.gradient[i]);
            }
        }
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let a = field(Dims::new(1, 2).unwrap(), vec![0.0; 2], vec![0.0; 2]);
        let b = field(Dims::new(2, 1).unwrap(), vec![0.0; 2], vec![0.0; 2]);
        assert!(decoder_loss(&[a.clone()], &[b], &LossConfig::default()).is_err());
        assert!(decoder_loss(&[a.clone(), a.clone()], &[a], &LossConfig::default()).is_err());
        assert!(decoder_loss(&[], &[], &LossConfig::default()).is_err());
    }

    #[test]
    fn rng_sweep_of_bound_and_gradient_bound() {
        let cfg = LossConfig::new(7.0).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10_000 {
            let x: f64 = rng.gen_range(-25.0..25.0);
            assert!(clip_error(x, &cfg).abs() < 3.5);
            assert!(clip_error_grad(x, &cfg) <= 1.75 + 1e-15);
        }
    }
}
