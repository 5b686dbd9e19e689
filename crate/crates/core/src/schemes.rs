//! Euler-Maruyama schemes: the discrete recursion, its time-continuous
//! extension evaluated on the fine grid, the piecewise-linear interpolant of
//! the discrete nodes, the transformed-equation comparator, and the
//! sign-change occupation statistic.

use crate::error::Error;
use crate::randomness::BrownianPath;
use crate::real::{rn, Real};
use crate::sde_model::Coefficients;
use crate::transform::TransformedProblem;

/// Discrete Euler-Maruyama values `X^_{n,i/n}`, `i = 0..=n`.
#[derive(Clone, Debug, PartialEq)]
pub struct EmPath<R: Real> {
    values: Vec<R>,
}

impl<R: Real> EmPath<R> {
    pub fn n(&self) -> usize {
        self.values.len() - 1
    }

    pub fn values(&self) -> &[R] {
        &self.values
    }

    pub fn terminal(&self) -> R {
        *self.values.last().expect("n+1 values")
    }
}

/// The discrete recursion
/// `X_{i+1} = X_i + mu(X_i)/n + sigma(X_i) * dW_i`, left to right.
///
/// The step count is `increments.len()`.
pub fn em_discrete<R: Real, C: Coefficients<R>>(model: &C, increments: &[R]) -> EmPath<R> {
    let n = increments.len();
    assert!(n >= 1, "need at least one increment");
    let dt = rn::<R>(n).recip();
    let mut values = Vec::with_capacity(n + 1);
    let mut x = model.initial_value();
    values.push(x);
    for &dw in increments {
        x = x + model.drift(x) * dt + model.diffusion(x) * dw;
        values.push(x);
    }
    EmPath { values }
}

/// Time-continuous Euler-Maruyama scheme with step `1/n`, evaluated at every
/// fine grid time `j/n_fine`.
#[derive(Clone, Debug)]
pub struct ContinuousEmEval<R: Real> {
    n: usize,
    values: Vec<R>,
}

impl<R: Real> ContinuousEmEval<R> {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_fine(&self) -> usize {
        self.values.len() - 1
    }

    pub fn values(&self) -> &[R] {
        &self.values
    }
}

/// Evaluate the time-continuous scheme on the fine grid:
/// `X_t = X_i + mu(X_i)(t - i/n) + sigma(X_i)(W_t - W_{i/n})` for
/// `t` in step `i`. Coarse-node values are computed once by [`em_discrete`]
/// on the coarsened increments and reused bit-exactly.
///
/// Panics unless `n >= 1` divides `path.n_fine()`.
#[allow(clippy::needless_range_loop)] // j indexes both the output and the path
pub fn em_continuous_on_fine<R: Real, C: Coefficients<R>>(
    model: &C,
    path: &BrownianPath<R>,
    n: usize,
) -> ContinuousEmEval<R> {
    let n_fine = path.n_fine();
    assert!(
        n >= 1 && n_fine.is_multiple_of(n),
        "step count {n} must divide n_fine {n_fine}"
    );
    let stride = n_fine / n;
    let nodes = em_discrete(model, &path.coarsen(n));

    let n_r = rn::<R>(n);
    let n_fine_r = rn::<R>(n_fine);
    let mut values = vec![R::zero(); n_fine + 1];
    for i in 0..n {
        let x_i = nodes.values()[i];
        let mu_i = model.drift(x_i);
        let sigma_i = model.diffusion(x_i);
        let t_i = rn::<R>(i) / n_r;
        let w_i = path.value_at(i * stride);
        values[i * stride] = x_i;
        for j in (i * stride + 1)..((i + 1) * stride) {
            let t = rn::<R>(j) / n_fine_r;
            values[j] = x_i + mu_i * (t - t_i) + sigma_i * (path.value_at(j) - w_i);
        }
    }
    values[n_fine] = nodes.terminal();
    ContinuousEmEval { n, values }
}

/// The piecewise-linear interpolant
/// `(n t - i) X_{i+1} + (i + 1 - n t) X_i` with `i = floor(n t)`
/// (`i = n - 1` at `t = 1`).
///
/// Panics if `t` is outside `[0, 1]`.
pub fn linear_interpolant_eval<R: Real>(empath: &EmPath<R>, t: R) -> R {
    assert!(
        t >= R::zero() && t <= R::one(),
        "interpolation time must lie in [0, 1]"
    );
    let n = empath.n();
    let s = rn::<R>(n) * t;
    let i = (s.floor().to_usize().unwrap_or(0)).min(n - 1);
    let i_r = rn::<R>(i);
    let values = empath.values();
    (s - i_r) * values[i + 1] + (i_r + R::one() - s) * values[i]
}

/// The interpolant sampled at every fine grid time `j/n_fine`.
pub fn interpolant_on_fine_grid<R: Real>(empath: &EmPath<R>, n_fine: usize) -> Vec<R> {
    assert!(n_fine.is_multiple_of(empath.n()), "n must divide n_fine");
    let n_fine_r = rn::<R>(n_fine);
    (0..=n_fine)
        .map(|j| linear_interpolant_eval(empath, rn::<R>(j) / n_fine_r))
        .collect()
}

/// Euler-Maruyama on the transformed equation, mapped back to `X`
/// coordinates node by node through `G^-1`.
pub fn transformed_em<R: Real>(
    tp: &TransformedProblem<'_, R>,
    increments: &[R],
) -> Result<EmPath<R>, Error> {
    let z_nodes = em_discrete(tp, increments);
    let values = z_nodes
        .values()
        .iter()
        .map(|&z| tp.transform().g_inverse(z, tp.inverse_tol()))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(EmPath { values })
}

/// Fine-grid Riemann approximation of the Lebesgue measure of times where
/// `X_t - xi` changes sign relative to `X_{lower grid point} - xi`:
/// `(1/n_fine) * sum_{j=1}^{n_fine} 1{(v_j - xi)(v_{floor(j)} - xi) <= 0}`.
///
/// Ties at exactly zero count as sign changes. The result lies in `[0, 1]`.
pub fn sign_change_occupation<R: Real>(cont: &ContinuousEmEval<R>, xi: R) -> R {
    let n_fine = cont.n_fine();
    let stride = n_fine / cont.n();
    let values = cont.values();
    let mut count = 0usize;
    for j in 1..=n_fine {
        let anchor = values[(j / stride) * stride];
        if (values[j] - xi) * (anchor - xi) <= R::zero() {
            count += 1;
        }
    }
    rn::<R>(count) / rn::<R>(n_fine)
}
