use serde::{Deserialize, Serialize};

use super::scalar::Scalar;

/// Predictions are clamped to `[ε, 1 − ε]` before taking logarithms.
pub const BCE_EPS: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    /// Binary cross-entropy on a single probability.
    Bce,
    /// Sum of `ln cosh` of the component errors.
    LogCosh,
}

pub fn loss_bce(prediction: f64, target: f64) -> f64 {
    let p = prediction.clamp(BCE_EPS, 1.0 - BCE_EPS);
    -(target * p.ln() + (1.0 - target) * (1.0 - p).ln())
}

/// `ln cosh x` without overflow: `|x| + ln((1 + e^{−2|x|}) / 2)`.
pub fn log_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

pub fn loss_logcosh(prediction: &[f64], target: &[f64]) -> f64 {
    prediction.iter().zip(target).map(|(p, t)| log_cosh(p - t)).sum()
}

impl Loss {
    pub(crate) fn value<T: Scalar>(self, pred: &[T], target: &[T]) -> T {
        match self {
            Loss::Bce => {
                let eps = T::of(BCE_EPS);
                pred.iter().zip(target).fold(T::zero(), |acc, (&p, &t)| {
                    let p = p.max(eps).min(T::one() - eps);
                    acc - (t * p.ln() + (T::one() - t) * (T::one() - p).ln())
                })
            }
            Loss::LogCosh => pred.iter().zip(target).fold(T::zero(), |acc, (&p, &t)| {
                let a = (p - t).abs();
                acc + a + (T::of(-2.0) * a).exp().ln_1p() - T::of(std::f64::consts::LN_2)
            }),
        }
    }

    /// Derivative of the per-sample loss with respect to each prediction.
    pub(crate) fn grad<T: Scalar>(self, pred: &[T], target: &[T], out: &mut [T]) {
        match self {
            Loss::Bce => {
                let eps = T::of(BCE_EPS);
                for ((g, &p), &t) in out.iter_mut().zip(pred).zip(target) {
                    let p = p.max(eps).min(T::one() - eps);
                    *g = (p - t) / (p * (T::one() - p));
                }
            }
            Loss::LogCosh => {
                for ((g, &p), &t) in out.iter_mut().zip(pred).zip(target) {
                    *g = (p - t).tanh();
                }
            }
        }
    }
}
