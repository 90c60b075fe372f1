use super::model::Model;
use super::scalar::Scalar;
use crate::error::{Error, Result};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// One bias-corrected Adam update of every parameter.
pub fn adam_step<T: Scalar>(model: &mut Model<T>, gradients: &[T], learning_rate: f64) -> Result<()> {
    if gradients.len() != model.param_count() {
        return Err(Error::Shape(format!(
            "{} gradients for {} parameters",
            gradients.len(),
            model.param_count()
        )));
    }
    model.adam.step += 1;
    let t = model.adam.step as i32;
    let (b1, b2) = (T::of(BETA1), T::of(BETA2));
    let c1 = T::one() / (T::one() - b1.powi(t));
    let c2 = T::one() / (T::one() - b2.powi(t));
    let lr = T::of(learning_rate);
    let eps = T::of(EPSILON);
    let mut adam = std::mem::replace(&mut model.adam, super::model::AdamState::new(0));
    for (i, p) in model.params_mut().iter_mut().enumerate() {
        let g = gradients[i];
        let m = b1 * adam.m[i] + (T::one() - b1) * g;
        let v = b2 * adam.v[i] + (T::one() - b2) * g * g;
        adam.m[i] = m;
        adam.v[i] = v;
        *p = *p - lr * (m * c1) / ((v * c2).sqrt() + eps);
    }
    model.adam = adam;
    Ok(())
}
