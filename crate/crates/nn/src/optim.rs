use ndarray::Array2;

use crate::params::Params;
use crate::NnError;

#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
}

impl Adam {
    pub fn new(params: &Params, lr: f64) -> Self {
        let zeros: Vec<Array2<f64>> = (0..params.len()).map(|i| Array2::zeros(params.value(i).dim())).collect();
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// One update. A non-finite gradient aborts before any parameter changes.
    pub fn step(&mut self, params: &mut Params, grads: &[Array2<f64>]) -> Result<(), NnError> {
        for (i, g) in grads.iter().enumerate() {
            if g.iter().any(|v| !v.is_finite()) {
                return Err(NnError::NonFinite(format!("gradient of {}", params.name(i))));
            }
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (i, g) in grads.iter().enumerate() {
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            m.zip_mut_with(g, |m, g| *m = self.beta1 * *m + (1.0 - self.beta1) * g);
            v.zip_mut_with(g, |v, g| *v = self.beta2 * *v + (1.0 - self.beta2) * g * g);
            let (lr, eps) = (self.lr, self.eps);
            let p = params.value_mut(i);
            ndarray::Zip::from(p).and(&*m).and(&*v).for_each(|p, m, v| {
                *p -= lr * (m / bc1) / ((v / bc2).sqrt() + eps);
            });
        }
        Ok(())
    }
}
