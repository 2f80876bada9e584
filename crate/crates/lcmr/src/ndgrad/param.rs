//! Dense parameters with gradient buffers and Adam moment state.

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Index of a parameter inside a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) u32);

impl ParamId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// A named dense array with value and gradient buffers plus Adam moment state.
///
/// Shapes of `value`, `grad`, `adam_m`, and `adam_v` are always identical.
#[derive(Debug, Clone)]
pub struct Parameter {
    pub name: String,
    pub shape: Vec<usize>,
    pub value: Vec<f64>,
    pub grad: Vec<f64>,
    pub adam_m: Vec<f64>,
    pub adam_v: Vec<f64>,
    pub step_count: u64,
}

impl Parameter {
    /// All-zero parameter (used for loading checkpoints and tests).
    pub fn zeros(name: impl Into<String>, shape: &[usize]) -> Result<Self> {
        let len = checked_len(shape)?;
        Ok(Parameter {
            name: name.into(),
            shape: shape.to_vec(),
            value: vec![0.0; len],
            grad: vec![0.0; len],
            adam_m: vec![0.0; len],
            adam_v: vec![0.0; len],
            step_count: 0,
        })
    }

    /// Entries drawn i.i.d. from Normal(0, sigma^2); grad and Adam state zeroed.
    pub fn init_gaussian(
        name: impl Into<String>,
        shape: &[usize],
        sigma: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "init_gaussian: sigma must be > 0, got {sigma}"
            )));
        }
        let mut p = Self::zeros(name, shape)?;
        let normal = Normal::new(0.0, sigma)
            .map_err(|e| Error::InvalidArgument(format!("init_gaussian: {e}")))?;
        for v in &mut p.value {
            *v = normal.sample(rng);
        }
        Ok(p)
    }

    pub fn from_values(name: impl Into<String>, shape: &[usize], values: Vec<f64>) -> Result<Self> {
        let len = checked_len(shape)?;
        if values.len() != len {
            return Err(Error::InvalidArgument(format!(
                "parameter values length {} does not match shape {:?}",
                values.len(),
                shape
            )));
        }
        let mut p = Self::zeros(name, shape)?;
        p.value = values;
        Ok(p)
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    /// Number of rows when viewed as a matrix (first shape dim).
    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    /// Row width when viewed as a matrix (product of trailing dims).
    pub fn row_len(&self) -> usize {
        self.shape[1..].iter().product::<usize>().max(1)
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let w = self.row_len();
        &self.value[r * w..(r + 1) * w]
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }
}

fn checked_len(shape: &[usize]) -> Result<usize> {
    if shape.is_empty() || shape.iter().any(|&d| d == 0) {
        return Err(Error::InvalidArgument(format!(
            "zero-sized parameter shape {shape:?}"
        )));
    }
    Ok(shape.iter().product())
}

/// Adam hyper-parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "adam: lr must be > 0, got {}",
                self.lr
            )));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::InvalidArgument(format!(
                    "adam: {name} must be in [0, 1), got {b}"
                )));
            }
        }
        if !(self.eps > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "adam: eps must be > 0, got {}",
                self.eps
            )));
        }
        Ok(())
    }
}

/// Owns all trainable parameters of a model.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    params: Vec<Parameter>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, p: Parameter) -> ParamId {
        let id = ParamId(self.params.len() as u32);
        self.params.push(p);
        id
    }

    pub fn get(&self, id: ParamId) -> &Parameter {
        &self.params[id.index()]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter {
        &mut self.params[id.index()]
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Parameter)> {
        self.params
            .iter()
            .enumerate()
            .map(|(i, p)| (ParamId(i as u32), p))
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.zero_grad();
        }
    }

    /// Standard bias-corrected Adam update on every parameter, followed by
    /// a gradient reset. A NaN gradient aborts naming the parameter.
    pub fn adam_step(&mut self, cfg: &AdamConfig) -> Result<()> {
        cfg.validate()?;
        for p in &mut self.params {
            if p.grad.iter().any(|g| g.is_nan()) {
                return Err(Error::State(format!(
                    "NaN gradient in parameter '{}' (shape {:?})",
                    p.name, p.shape
                )));
            }
            p.step_count += 1;
            let t = p.step_count as i32;
            let bc1 = 1.0 - cfg.beta1.powi(t);
            let bc2 = 1.0 - cfg.beta2.powi(t);
            for k in 0..p.value.len() {
                let g = p.grad[k];
                let m = cfg.beta1 * p.adam_m[k] + (1.0 - cfg.beta1) * g;
                let v = cfg.beta2 * p.adam_v[k] + (1.0 - cfg.beta2) * g * g;
                p.adam_m[k] = m;
                p.adam_v[k] = v;
                let m_hat = m / bc1;
                let v_hat = v / bc2;
                p.value[k] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
            }
            p.zero_grad();
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn gaussian_sample_mean_near_zero() {
        let mut r = rng(7);
        let p = Parameter::init_gaussian("p", &[100, 100], 0.01, &mut r).unwrap();
        let mean = p.value.iter().sum::<f64>() / p.value.len() as f64;
        assert!(mean.abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn gaussian_sample_variance_matches_sigma() {
        let mut r = rng(11);
        let p = Parameter::init_gaussian("p", &[100_000], 0.01, &mut r).unwrap();
        let n = p.value.len() as f64;
        let mean = p.value.iter().sum::<f64>() / n;
        let var = p.value.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        // sigma^2 = 1e-4 within 5%
        assert!((var - 1e-4).abs() < 5e-6, "var {var}");
    }

    #[test]
    fn gaussian_rejects_zero_sigma() {
        let mut r = rng(1);
        assert!(Parameter::init_gaussian("p", &[2, 2], 0.0, &mut r).is_err());
    }

    #[test]
    fn zero_sized_shape_rejected() {
        let mut r = rng(1);
        assert!(Parameter::init_gaussian("p", &[0, 3], 0.01, &mut r).is_err());
        assert!(Parameter::init_gaussian("p", &[], 0.01, &mut r).is_err());
    }

    #[test]
    fn gaussian_init_zeroes_grad_and_adam_state() {
        let mut r = rng(3);
        let p = Parameter::init_gaussian("p", &[4, 2], 0.5, &mut r).unwrap();
        assert!(p.grad.iter().all(|&g| g == 0.0));
        assert!(p.adam_m.iter().all(|&m| m == 0.0));
        assert!(p.adam_v.iter().all(|&v| v == 0.0));
        assert_eq!(p.step_count, 0);
    }

    #[test]
    fn adam_first_step_magnitude_is_lr() {
        // With fresh moments, bias-corrected m/sqrt(v) = sign(g), so the
        // first update moves each coordinate by ~lr.
        let mut store = ParamStore::new();
        let id = store.add(Parameter::from_values("p", &[3], vec![1.0, 2.0, 3.0]).unwrap());
        store.get_mut(id).grad = vec![0.5, -2.0, 10.0];
        let cfg = AdamConfig::default();
        store.adam_step(&cfg).unwrap();
        let p = store.get(id);
        let expected = [1.0 - cfg.lr, 2.0 + cfg.lr, 3.0 - cfg.lr];
        for (v, e) in p.value.iter().zip(expected) {
            assert!((v - e).abs() < cfg.lr * 1e-2, "{v} vs {e}");
        }
        assert_eq!(p.step_count, 1);
        assert!(p.grad.iter().all(|&g| g == 0.0), "grads zeroed after step");
    }

    #[test]
    fn adam_zero_grad_leaves_value_unchanged() {
        let mut store = ParamStore::new();
        let id = store.add(Parameter::from_values("p", &[2], vec![0.3, -0.7]).unwrap());
        store.adam_step(&AdamConfig::default()).unwrap();
        assert_eq!(store.get(id).value, vec![0.3, -0.7]);
    }

    #[test]
    fn adam_minimizes_quadratic() {
        // 200 steps on (p - 1)^2 from p = 0 with lr 0.1.
        let mut store = ParamStore::new();
        let id = store.add(Parameter::from_values("p", &[1], vec![0.0]).unwrap());
        let cfg = AdamConfig {
            lr: 0.1,
            ..AdamConfig::default()
        };
        for _ in 0..200 {
            let p = store.get_mut(id);
            p.grad[0] = 2.0 * (p.value[0] - 1.0);
            store.adam_step(&cfg).unwrap();
        }
        let p = store.get(id);
        assert!((p.value[0] - 1.0).abs() < 0.05, "p = {}", p.value[0]);
    }

    #[test]
    fn adam_nan_gradient_aborts_with_name() {
        let mut store = ParamStore::new();
        let id = store.add(Parameter::from_values("weights", &[1], vec![0.0]).unwrap());
        store.get_mut(id).grad[0] = f64::NAN;
        let err = store.adam_step(&AdamConfig::default()).unwrap_err();
        assert!(err.to_string().contains("weights"), "{err}");
    }
}
