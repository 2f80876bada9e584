//! Finite-difference verification of analytic gradients.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::ndgrad::param::{ParamId, ParamStore};

/// Compares analytic gradients against central finite differences.
///
/// `loss_and_grad` must be a deterministic function of the parameter
/// values that returns the loss and leaves `d loss / d param` in the
/// gradient buffers (typically a taped forward + backward). The checker
/// runs it once to capture the analytic gradients, then perturbs up to
/// `max_coords_per_param` sampled coordinates of each listed parameter by
/// ±`step` and returns the maximum relative error
/// `|analytic - central| / max(1e-8, |central|)` over all sampled
/// coordinates. Gradient buffers are zeroed on exit.
pub fn finite_diff_check(
    store: &mut ParamStore,
    params: &[ParamId],
    step: f64,
    max_coords_per_param: usize,
    rng: &mut ChaCha8Rng,
    mut loss_and_grad: impl FnMut(&mut ParamStore) -> Result<f64>,
) -> Result<f64> {
    if !(step > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "finite_diff_check: step must be > 0, got {step}"
        )));
    }
    store.zero_grads();
    let base = loss_and_grad(store)?;
    if !base.is_finite() {
        return Err(Error::State(format!(
            "finite_diff_check: non-finite loss {base}"
        )));
    }
    let analytic: Vec<Vec<f64>> = params
        .iter()
        .map(|&id| store.get(id).grad.clone())
        .collect();
    store.zero_grads();

    let mut max_rel = 0.0f64;
    for (pi, &id) in params.iter().enumerate() {
        let len = store.get(id).len();
        let coords: Vec<usize> = if len <= max_coords_per_param {
            (0..len).collect()
        } else {
            (0..max_coords_per_param)
                .map(|_| rng.random_range(0..len))
                .collect()
        };
        for k in coords {
            let orig = store.get(id).value[k];
            store.get_mut(id).value[k] = orig + step;
            let plus = loss_and_grad(store)?;
            store.get_mut(id).value[k] = orig - step;
            let minus = loss_and_grad(store)?;
            store.get_mut(id).value[k] = orig;
            store.zero_grads();
            if !plus.is_finite() || !minus.is_finite() {
                return Err(Error::State(
                    "finite_diff_check: non-finite loss under perturbation".into(),
                ));
            }
            let central = (plus - minus) / (2.0 * step);
            let rel = (analytic[pi][k] - central).abs() / central.abs().max(1e-8);
            if rel > max_rel {
                max_rel = rel;
            }
        }
    }
    Ok(max_rel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ndgrad::param::Parameter;
    use rand::SeedableRng;

    #[test]
    fn quadratic_loss_is_exact_to_roundoff() {
        // loss = sum (p_i - c_i)^2 with hand-written analytic gradient.
        let mut store = ParamStore::new();
        let id = store.add(Parameter::from_values("p", &[3], vec![0.4, -1.2, 2.0]).unwrap());
        let c = [1.0, 0.5, -0.25];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = finite_diff_check(&mut store, &[id], 1e-5, 16, &mut rng, |s| {
            let p = s.get_mut(id);
            let mut loss = 0.0;
            for i in 0..3 {
                let d = p.value[i] - c[i];
                loss += d * d;
                p.grad[i] += 2.0 * d;
            }
            Ok(loss)
        })
        .unwrap();
        assert!(err <= 1e-9, "relative error {err}");
    }

    #[test]
    fn zero_step_rejected() {
        let mut store = ParamStore::new();
        let id = store.add(Parameter::from_values("p", &[1], vec![0.0]).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = finite_diff_check(&mut store, &[id], 0.0, 4, &mut rng, |_| Ok(0.0));
        assert!(r.is_err());
    }

    #[test]
    fn non_finite_loss_rejected() {
        let mut store = ParamStore::new();
        let id = store.add(Parameter::from_values("p", &[1], vec![0.0]).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = finite_diff_check(&mut store, &[id], 1e-5, 4, &mut rng, |_| Ok(f64::NAN));
        assert!(r.is_err());
    }

    #[test]
    fn detects_wrong_gradient() {
        let mut store = ParamStore::new();
        let id = store.add(Parameter::from_values("p", &[1], vec![2.0]).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = finite_diff_check(&mut store, &[id], 1e-5, 4, &mut rng, |s| {
            let p = s.get_mut(id);
            let loss = p.value[0] * p.value[0];
            p.grad[0] += 3.0 * p.value[0]; // deliberately wrong (should be 2p)
            Ok(loss)
        })
        .unwrap();
        assert!(err > 0.1, "should flag the wrong gradient, got {err}");
    }
}
