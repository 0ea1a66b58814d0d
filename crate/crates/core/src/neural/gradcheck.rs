//! Central-difference gradient verification.

use crate::error::Result;
use crate::scalar::Real;

use super::Mlp;

/// Mean squared error over all batch entries and outputs, and `dL/dy`.
pub fn mse_loss<T: Real>(y: &[T], target: &[T]) -> (T, Vec<T>) {
    let n = T::from_usize(y.len()).unwrap();
    let two = T::lit(2.0);
    let mut loss = T::zero();
    let mut dy = Vec::with_capacity(y.len());
    for (&a, &b) in y.iter().zip(target) {
        let e = a - b;
        loss += e * e;
        dy.push(two * e / n);
    }
    (loss / n, dy)
}

/// Central differences of `f` with respect to each entry of `params`.
pub fn numeric_gradient<T: Real>(params: &[T], mut f: impl FnMut(&[T]) -> T, h: T) -> Vec<T> {
    let mut p = params.to_vec();
    let two_h = h + h;
    (0..p.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + h;
            let plus = f(&p);
            p[i] = orig - h;
            let minus = f(&p);
            p[i] = orig;
            (plus - minus) / two_h
        })
        .collect()
}

/// `max_i |a_i - n_i| / max(1, |a_i| + |n_i|)`.
pub fn max_relative_error<T: Real>(analytic: &[T], numeric: &[T]) -> T {
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| (a - n).abs() / T::one().max(a.abs() + n.abs()))
        .fold(T::zero(), T::max)
}

/// Compares the reverse-mode MSE gradient of `mlp` on a batch against central
/// differences with step `h`.
pub fn grad_check<T: Real>(mlp: &Mlp<T>, inputs: &[T], targets: &[T], h: T) -> Result<T> {
    let batch = inputs.len() / mlp.input_dim();
    let (y, cache) = mlp.forward_batch(inputs, batch)?;
    let (_, dy) = mse_loss(&y, targets);
    let analytic = mlp.backward(&cache, &dy)?.params;
    let mut probe = mlp.clone();
    let numeric = numeric_gradient(
        mlp.params(),
        |p| {
            probe.params_mut().copy_from_slice(p);
            let (y, _) = probe.forward_batch(inputs, batch).expect("shapes checked above");
            mse_loss(&y, targets).0
        },
        h,
    );
    Ok(max_relative_error(&analytic, &numeric))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::Activation;
    use crate::rng;
    use rand::Rng;

    fn random_batch(r: &mut impl Rng, n_in: usize, n_out: usize, batch: usize) -> (Vec<f64>, Vec<f64>) {
        (
            (0..n_in * batch).map(|_| r.random_range(-2.0..2.0)).collect(),
            (0..n_out * batch).map(|_| r.random_range(-1.0..1.0)).collect(),
        )
    }

    #[test]
    fn quadratic_loss_is_exact_for_linear_net() {
        let mut r = rng::stream(10, "gc");
        let m = Mlp::<f64>::init(&[4, 2], Activation::LeakyRelu, 0.1, &mut r).unwrap();
        let (x, t) = random_batch(&mut r, 4, 2, 6);
        assert!(grad_check(&m, &x, &t, 1e-4).unwrap() < 1e-9);
    }

    #[test]
    fn leaky_relu_net_passes() {
        let mut r = rng::stream(11, "gc");
        let m = Mlp::<f64>::init(&[5, 16, 16, 1], Activation::LeakyRelu, 0.1, &mut r).unwrap();
        let (x, t) = random_batch(&mut r, 5, 1, 8);
        let err = grad_check(&m, &x, &t, 1e-5).unwrap();
        assert!(err < 1e-5, "{err}");
    }

    #[test]
    fn corrupted_gradient_is_detected() {
        let mut r = rng::stream(12, "gc");
        let m = Mlp::<f64>::init(&[5, 8, 1], Activation::LeakyRelu, 0.1, &mut r).unwrap();
        let (x, t) = random_batch(&mut r, 5, 1, 8);
        let (y, cache) = m.forward_batch(&x, 8).unwrap();
        let (_, dy) = mse_loss(&y, &t);
        let mut analytic = m.backward(&cache, &dy).unwrap().params;
        let numeric = numeric_gradient(
            m.params(),
            |p| {
                let mut q = m.clone();
                q.params_mut().copy_from_slice(p);
                mse_loss(&q.forward_batch(&x, 8).unwrap().0, &t).0
            },
            1e-5,
        );
        assert!(max_relative_error(&analytic, &numeric) < 1e-5);
        let (idx, _) = analytic
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .unwrap();
        analytic[idx] *= 1.1;
        assert!(max_relative_error(&analytic, &numeric) > 1e-2);
    }
}
