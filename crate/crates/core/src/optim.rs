//! Adam with best-iterate tracking and plateau-triggered step decay.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy)]
pub(crate) struct AdamOptions {
    pub max_iters: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Required improvement of the best value within `window` iterations.
    pub tol: f64,
    pub window: usize,
    /// Step halvings before a plateau ends the run.
    pub max_decays: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct AdamOutcome<T: Real> {
    pub x: DMatrix<T>,
    pub value: T,
    /// Steps taken; equals `max_iters` when the budget ran out.
    pub iterations: usize,
}

/// Minimize from `x0`. `eval` returns the value at a point and the
/// direction to descend along; `retract` maps each trial point back onto
/// the feasible set. The best evaluated point is returned.
pub(crate) fn adam_minimize<T, F, P>(x0: DMatrix<T>, opts: &AdamOptions, mut eval: F, mut retract: P) -> Result<AdamOutcome<T>>
where
    T: Real,
    F: FnMut(&DMatrix<T>) -> Result<(T, DMatrix<T>)>,
    P: FnMut(DMatrix<T>) -> Result<DMatrix<T>>,
{
    let b1 = T::cast(opts.beta1);
    let b2 = T::cast(opts.beta2);
    let eps = T::cast(opts.eps);
    let tol = T::cast(opts.tol);
    let one = T::one();
    let (rows, cols) = x0.shape();

    let mut lr = T::cast(opts.lr);
    let mut x = x0;
    let mut best_x = x.clone();
    let mut best: Option<T> = None;
    let mut reference: Option<T> = None;
    let mut last_progress = 0;
    let mut decays = 0;
    let mut m = DMatrix::<T>::zeros(rows, cols);
    let mut s = DMatrix::<T>::zeros(rows, cols);
    let mut t = 0i32;

    for it in 0..=opts.max_iters {
        let (value, grad) = eval(&x)?;
        if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NumericalFailure(format!("non-finite objective or gradient at step {it}")));
        }
        if best.is_none_or(|b| value < b) {
            best = Some(value);
            best_x.copy_from(&x);
        }
        let b = best.expect("set above");
        if reference.is_none_or(|r| b < r - tol) {
            reference = Some(b);
            last_progress = it;
        } else if it - last_progress >= opts.window {
            if decays == opts.max_decays {
                return Ok(AdamOutcome {
                    x: best_x,
                    value: b,
                    iterations: it,
                });
            }
            decays += 1;
            lr /= T::cast(2.0);
            x.copy_from(&best_x);
            m.fill(T::zero());
            s.fill(T::zero());
            t = 0;
            reference = Some(b);
            last_progress = it;
            continue;
        }
        if it == opts.max_iters {
            break;
        }
        t += 1;
        let c1 = one - b1.powi(t);
        let c2 = one - b2.powi(t);
        m.zip_apply(&grad, |mi, g| *mi = b1 * *mi + (one - b1) * g);
        s.zip_apply(&grad, |si, g| *si = b2 * *si + (one - b2) * g * g);
        let step = m.zip_map(&s, |mi, si| (mi / c1) / ((si / c2).sqrt() + eps));
        let trial = &x - step * lr;
        if trial.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure(format!("non-finite iterate at step {it}")));
        }
        x = retract(trial)?;
    }
    Ok(AdamOutcome {
        x: best_x,
        value: best.expect("at least one evaluation"),
        iterations: opts.max_iters,
    })
}
