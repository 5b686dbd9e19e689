//! The coefficient transformation `G` that removes drift discontinuities.
//!
//! `G` bends the state space around each breakpoint `xi_i` with a compactly
//! supported bump so that `Z = G(X)` solves an SDE with Lipschitz
//! coefficients. `G` is the identity outside the bump supports, strictly
//! increasing everywhere, and `C^1` with a piecewise-Lipschitz second
//! derivative. The transformed drift and diffusion are
//!
//! ```text
//! mu~    = (G' * mu + G'' * sigma^2 / 2) o G^-1
//! sigma~ = (G' * sigma) o G^-1
//! ```

use crate::error::Error;
use crate::real::{rf, rn, Real};
use crate::sde_model::{Coefficients, SdeProblem};

/// Bump kernel `phi(u) = (1 - u^2)^3` on `[-1, 1]`, zero outside.
pub fn bump<R: Real>(u: R) -> R {
    if u.abs() <= R::one() {
        (R::one() - u * u).powi(3)
    } else {
        R::zero()
    }
}

/// `phi'(u) = -6u (1 - u^2)^2` on `[-1, 1]`, zero outside.
pub fn bump_d1<R: Real>(u: R) -> R {
    if u.abs() <= R::one() {
        let w = R::one() - u * u;
        -rf::<R>(6.0) * u * w * w
    } else {
        R::zero()
    }
}

/// `phi''(u) = (1 - u^2)(30u^2 - 6)` on `[-1, 1]`, zero outside.
pub fn bump_d2<R: Real>(u: R) -> R {
    if u.abs() <= R::one() {
        (R::one() - u * u) * (rf::<R>(30.0) * u * u - rf::<R>(6.0))
    } else {
        R::zero()
    }
}

/// Points per bump support when scanning for the derivative bounds.
const GPRIME_SCAN_POINTS: usize = 4096;

/// Default relative tolerance for [`GTransform::g_inverse`].
pub const DEFAULT_INVERSE_TOL: f64 = 1e-12;

const MAX_NEWTON_ITERATIONS: usize = 100;
const MAX_BISECTION_ITERATIONS: usize = 200;

/// The transformation `G(x) = x + sum_i alpha_i (x - xi_i)|x - xi_i|
/// phi((x - xi_i)/nu)` with its cached derivative bounds.
#[derive(Clone, Debug)]
pub struct GTransform<R: Real> {
    xi: Vec<R>,
    alpha: Vec<R>,
    nu: R,
    rho: R,
    gprime_min: R,
    gprime_max: R,
    /// `G''(xi_i)` per the extension formula; the plain sum formula is not
    /// defined at the breakpoints.
    breakpoint_gsecond: Vec<R>,
}

impl<R: Real> GTransform<R> {
    /// The identity transform (no breakpoints).
    pub fn identity() -> Self {
        GTransform {
            xi: Vec::new(),
            alpha: Vec::new(),
            nu: R::one(),
            rho: R::infinity(),
            gprime_min: R::one(),
            gprime_max: R::one(),
            breakpoint_gsecond: Vec::new(),
        }
    }

    /// Build the transform for an admissible problem.
    ///
    /// `alpha_i = (mu(xi_i-) - mu(xi_i+)) / (2 sigma^2(xi_i))`; the bump
    /// radius is `nu = nu_fraction * rho` where `rho` caps both the bump
    /// strength (`1/(6|alpha_i|)`, infinity for vanishing `alpha_i`) and,
    /// for two or more breakpoints, half the minimal spacing. When every
    /// `alpha_i` is zero, `rho` is infinite and `nu = 1`.
    pub fn build(problem: &SdeProblem<R>, nu_fraction: R) -> Result<Self, Error> {
        if nu_fraction.is_nan() || nu_fraction <= R::zero() || nu_fraction >= R::one() {
            return Err(Error::InvalidConfig(format!(
                "nu_fraction must lie in (0, 1), got {nu_fraction}"
            )));
        }
        let report = problem.validate_default();
        if !report.admissible() {
            let failure = report
                .first_failure()
                .expect("inadmissible report has a failure");
            return Err(Error::InadmissibleProblem {
                reason: format!("{}: {}", failure.name, failure.detail),
            });
        }
        let drift = problem.drift();
        let k = drift.breakpoint_count();
        if k == 0 {
            return Ok(Self::identity());
        }

        let xi = drift.breakpoints().to_vec();
        let two = rf::<R>(2.0);
        let alpha: Vec<R> = (0..k)
            .map(|i| {
                let (left, right) = drift.one_sided_limits(i).expect("index in range");
                let sigma_xi = problem.diffusion().eval(xi[i]);
                (left - right) / (two * sigma_xi * sigma_xi)
            })
            .collect();

        let six = rf::<R>(6.0);
        let mut rho = alpha
            .iter()
            .map(|&a| {
                if a.is_zero() {
                    R::infinity()
                } else {
                    (six * a.abs()).recip()
                }
            })
            .fold(R::infinity(), R::min);
        for pair in xi.windows(2) {
            rho = rho.min((pair[1] - pair[0]) / two);
        }
        let nu = if rho.is_infinite() {
            R::one()
        } else {
            nu_fraction * rho
        };

        let mut transform = GTransform {
            xi,
            alpha,
            nu,
            rho,
            gprime_min: R::one(),
            gprime_max: R::one(),
            breakpoint_gsecond: Vec::new(),
        };

        // G' = 1 outside the supports; scan each support densely.
        let mut lo = R::one();
        let mut hi = R::one();
        for &center in &transform.xi {
            for j in 0..=GPRIME_SCAN_POINTS {
                let frac = rn::<R>(j) / rn::<R>(GPRIME_SCAN_POINTS);
                let x = center - nu + two * nu * frac;
                let gp = transform.g_prime(x);
                lo = lo.min(gp);
                hi = hi.max(gp);
            }
        }
        if lo.is_nan() || lo <= R::zero() {
            return Err(Error::InadmissibleProblem {
                reason: format!("transform slope bound {lo} is not positive"),
            });
        }
        transform.gprime_min = lo;
        transform.gprime_max = hi;

        transform.breakpoint_gsecond = (0..k)
            .map(|i| {
                let xi_i = transform.xi[i];
                let (_, right) = drift.one_sided_limits(i).expect("index in range");
                let declared = drift.eval(xi_i);
                let sigma_xi = problem.diffusion().eval(xi_i);
                // Right limit of the open-interval G'' formula is 2 alpha_i;
                // the extension adds the jump correction.
                two * transform.alpha[i]
                    + two * transform.g_prime(xi_i) * (right - declared) / (sigma_xi * sigma_xi)
            })
            .collect();

        Ok(transform)
    }

    pub fn breakpoints(&self) -> &[R] {
        &self.xi
    }

    pub fn alphas(&self) -> &[R] {
        &self.alpha
    }

    pub fn nu(&self) -> R {
        self.nu
    }

    pub fn rho(&self) -> R {
        self.rho
    }

    /// Cached bounds `0 < min G' <= max G' < inf` from the dense scan.
    pub fn gprime_bounds(&self) -> (R, R) {
        (self.gprime_min, self.gprime_max)
    }

    /// `G(x)`; equal to `x` whenever `min_i |x - xi_i| >= nu`.
    pub fn g(&self, x: R) -> R {
        let mut acc = x;
        for (&center, &a) in self.xi.iter().zip(&self.alpha) {
            let d = x - center;
            if d.abs() < self.nu {
                acc += a * d * d.abs() * bump(d / self.nu);
            }
        }
        acc
    }

    /// `G'(x)`.
    pub fn g_prime(&self, x: R) -> R {
        let two = rf::<R>(2.0);
        let mut acc = R::one();
        for (&center, &a) in self.xi.iter().zip(&self.alpha) {
            let d = x - center;
            if d.abs() < self.nu {
                let u = d / self.nu;
                acc += a * (two * d.abs() * bump(u) + d * d.abs() * bump_d1(u) / self.nu);
            }
        }
        acc
    }

    /// `G''(x)`; at a breakpoint this is the extension value
    /// `2 alpha_i + 2 G'(xi_i)(mu(xi_i+) - mu(xi_i)) / sigma^2(xi_i)`.
    pub fn g_second(&self, x: R) -> R {
        if let Some(i) = self.xi.iter().position(|&c| c == x) {
            return self.breakpoint_gsecond[i];
        }
        let two = rf::<R>(2.0);
        let four = rf::<R>(4.0);
        let mut acc = R::zero();
        for (&center, &a) in self.xi.iter().zip(&self.alpha) {
            let d = x - center;
            if d.abs() < self.nu {
                let u = d / self.nu;
                let sign = d.signum();
                acc += a
                    * (two * sign * bump(u)
                        + four * d.abs() * bump_d1(u) / self.nu
                        + d * d.abs() * bump_d2(u) / (self.nu * self.nu));
            }
        }
        acc
    }

    /// Solve `G(x) = y` to `|G(x) - y| <= tol * max(1, |y|)`.
    ///
    /// Newton from `x = y`, safeguarded by a bracket derived from the
    /// Lipschitz bound `1/min G'` of the inverse, with bisection fallback.
    pub fn g_inverse(&self, y: R, tol: R) -> Result<R, Error> {
        assert!(tol > R::zero(), "tolerance must be positive");
        if self.alpha.is_empty() {
            return Ok(y);
        }
        let target = tol * R::one().max(y.abs());
        let mut x = y;
        let mut fx = self.g(x) - y;
        if fx.abs() <= target {
            return Ok(x);
        }

        let slack = fx.abs() / self.gprime_min + R::one();
        let mut lo = y - slack;
        let mut hi = y + slack;
        let mut step = slack;
        while self.g(lo) > y {
            lo -= step;
            step += step;
        }
        step = slack;
        while self.g(hi) < y {
            hi += step;
            step += step;
        }

        let half = rf::<R>(0.5);
        for _ in 0..MAX_NEWTON_ITERATIONS {
            let mut next = x - fx / self.g_prime(x);
            if !next.is_finite() || next <= lo || next >= hi {
                next = (lo + hi) * half;
            }
            x = next;
            fx = self.g(x) - y;
            if fx.abs() <= target {
                return Ok(x);
            }
            if fx > R::zero() {
                hi = x;
            } else {
                lo = x;
            }
        }
        for _ in 0..MAX_BISECTION_ITERATIONS {
            let mid = (lo + hi) * half;
            if mid <= lo || mid >= hi {
                break;
            }
            x = mid;
            fx = self.g(x) - y;
            if fx.abs() <= target {
                return Ok(x);
            }
            if fx > R::zero() {
                hi = x;
            } else {
                lo = x;
            }
        }
        Err(Error::InverseNoConvergence {
            iterations: MAX_NEWTON_ITERATIONS + MAX_BISECTION_ITERATIONS,
            residual: fx.abs().to_f64().unwrap_or(f64::NAN),
        })
    }

    /// Shorthand with the default relative tolerance.
    pub fn invert(&self, y: R) -> Result<R, Error> {
        self.g_inverse(y, rf(DEFAULT_INVERSE_TOL))
    }
}

/// The transformed SDE `dZ = mu~(Z) dt + sigma~(Z) dW`, `Z_0 = G(x0)`.
#[derive(Clone, Debug)]
pub struct TransformedProblem<'a, R: Real> {
    transform: &'a GTransform<R>,
    problem: &'a SdeProblem<R>,
    z0: R,
    inverse_tol: R,
    lipschitz_mu: R,
    lipschitz_sigma: R,
}

impl<'a, R: Real> TransformedProblem<'a, R> {
    pub fn new(transform: &'a GTransform<R>, problem: &'a SdeProblem<R>) -> Result<Self, Error> {
        let mut tp = TransformedProblem {
            transform,
            problem,
            z0: transform.g(problem.x0()),
            inverse_tol: rf(DEFAULT_INVERSE_TOL),
            lipschitz_mu: R::zero(),
            lipschitz_sigma: R::zero(),
        };
        let (lip_mu, lip_sigma) = tp.sampled_lipschitz(4096)?;
        tp.lipschitz_mu = lip_mu;
        tp.lipschitz_sigma = lip_sigma;
        Ok(tp)
    }

    pub fn transform(&self) -> &GTransform<R> {
        self.transform
    }

    pub fn z0(&self) -> R {
        self.z0
    }

    pub fn inverse_tol(&self) -> R {
        self.inverse_tol
    }

    /// Sampled Lipschitz estimates `(mu~, sigma~)` from construction.
    pub fn lipschitz_estimates(&self) -> (R, R) {
        (self.lipschitz_mu, self.lipschitz_sigma)
    }

    pub fn try_mu_tilde(&self, z: R) -> Result<R, Error> {
        let x = self.transform.g_inverse(z, self.inverse_tol)?;
        let sigma = self.problem.diffusion().eval(x);
        Ok(self.transform.g_prime(x) * self.problem.drift().eval(x)
            + rf::<R>(0.5) * self.transform.g_second(x) * sigma * sigma)
    }

    pub fn try_sigma_tilde(&self, z: R) -> Result<R, Error> {
        let x = self.transform.g_inverse(z, self.inverse_tol)?;
        Ok(self.transform.g_prime(x) * self.problem.diffusion().eval(x))
    }

    pub fn mu_tilde(&self, z: R) -> R {
        self.try_mu_tilde(z)
            .expect("inverse transform failed on a validated transform")
    }

    pub fn sigma_tilde(&self, z: R) -> R {
        self.try_sigma_tilde(z)
            .expect("inverse transform failed on a validated transform")
    }

    /// Maximal difference quotients of `mu~` and `sigma~` over a dense grid.
    ///
    /// Samples the compositions `mu~(G(x))`, `sigma~(G(x))` directly in
    /// `x`-space against `z`-spacing, on a global grid covering the initial
    /// value and all breakpoints plus a dedicated grid per bump support (the
    /// only place the coefficients curve, and possibly much narrower than
    /// the global range).
    pub fn sampled_lipschitz(&self, points: usize) -> Result<(R, R), Error> {
        let (x_lo, x_hi) = self.scan_range();
        let n = rn::<R>(points);
        let mut xs: Vec<R> = Vec::with_capacity((self.transform.xi.len() + 1) * (points + 1));
        for j in 0..=points {
            xs.push(x_lo + (x_hi - x_lo) * rn::<R>(j) / n);
        }
        let nu = self.transform.nu();
        let two = rf::<R>(2.0);
        for &center in &self.transform.xi {
            for j in 0..=points {
                xs.push(center - nu + two * nu * rn::<R>(j) / n);
            }
        }
        xs.sort_by(|a, b| a.partial_cmp(b).expect("finite grid"));
        xs.dedup();

        let half = rf::<R>(0.5);
        let eval = |x: R| {
            let gp = self.transform.g_prime(x);
            let sigma = self.problem.diffusion().eval(x);
            (
                self.transform.g(x),
                gp * self.problem.drift().eval(x)
                    + half * self.transform.g_second(x) * sigma * sigma,
                gp * sigma,
            )
        };
        let mut lip_mu = R::zero();
        let mut lip_sigma = R::zero();
        let (mut prev_z, mut prev_mu, mut prev_sigma) = eval(xs[0]);
        for &x in &xs[1..] {
            let (z, mu, sigma) = eval(x);
            let dz = z - prev_z;
            if dz > R::zero() {
                lip_mu = lip_mu.max(((mu - prev_mu) / dz).abs());
                lip_sigma = lip_sigma.max(((sigma - prev_sigma) / dz).abs());
            }
            prev_z = z;
            prev_mu = mu;
            prev_sigma = sigma;
        }
        Ok((lip_mu, lip_sigma))
    }

    fn scan_range(&self) -> (R, R) {
        let x0 = self.problem.x0();
        let pad = R::one() + self.transform.nu();
        match (self.transform.xi.first(), self.transform.xi.last()) {
            (Some(&first), Some(&last)) => (x0.min(first) - pad, x0.max(last) + pad),
            _ => (x0 - pad, x0 + pad),
        }
    }
}

impl<R: Real> Coefficients<R> for TransformedProblem<'_, R> {
    fn initial_value(&self) -> R {
        self.z0
    }

    fn drift(&self, z: R) -> R {
        self.mu_tilde(z)
    }

    fn diffusion(&self, z: R) -> R {
        self.sigma_tilde(z)
    }
}
