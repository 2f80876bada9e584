//! Scalar kernels shared by the taped forward pass and the tape-free
//! scoring path, so both produce bit-identical values.

/// Predictions are clamped to [BCE_EPS, 1 - BCE_EPS] before the log loss.
pub const BCE_EPS: f64 = 1e-12;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

/// Logistic function, stable for |x| up to and beyond 700.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Scales the raw scores by `beta` and normalizes them to a simplex
/// vector in place, subtracting the maximum before exponentiating.
pub fn softmax_scaled(scores: &mut [f64], beta: f64) {
    let mut max = f64::NEG_INFINITY;
    for s in scores.iter_mut() {
        *s *= beta;
        if *s > max {
            max = *s;
        }
    }
    let mut sum = 0.0;
    for s in scores.iter_mut() {
        *s = (*s - max).exp();
        sum += *s;
    }
    for s in scores.iter_mut() {
        *s /= sum;
    }
}

pub fn clamp_prob(p: f64) -> f64 {
    p.clamp(BCE_EPS, 1.0 - BCE_EPS)
}

/// Binary cross-entropy of a clamped prediction against a 0/1 label.
pub fn bce(pred: f64, label: f64) -> f64 {
    let p = clamp_prob(pred);
    -(label * p.ln() + (1.0 - label) * (1.0 - p).ln())
}
