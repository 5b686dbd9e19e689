//! Monte Carlo error estimation against coupled references, rate regression,
//! and occupation-time studies.
//!
//! Every study drives the coarse scheme and its reference with the same
//! Brownian path (strong-error coupling) and reduces per-path results in
//! path-index order, so estimates are bit-identical for any worker count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::randomness::{BrownianPath, SeedSpec};
use crate::real::{rf, rn, Real};
use crate::schemes::{
    em_continuous_on_fine, em_discrete, interpolant_on_fine_grid, sign_change_occupation,
    transformed_em, EmPath,
};
use crate::sde_model::SdeProblem;
use crate::transform::{GTransform, TransformedProblem};

/// Which approximation of `X` a study measures.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Em,
    TransformedEm,
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scheme::Em => "em",
            Scheme::TransformedEm => "transformed_em",
        })
    }
}

/// Which fine-grid reference stands in for the unknown solution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceMode {
    /// Euler-Maruyama on the transformed equation at `n_fine`, mapped back.
    /// Carries the rate-1/2 guarantee, so its bias is dominated by choosing
    /// `n_fine` well above `max(n_list)`. The default.
    TransformedFine,
    /// Euler-Maruyama on the original equation at `n_fine`; cross-check mode.
    DirectFine,
    /// Exact geometric Brownian motion values; only for GBM problems.
    ClosedFormGbm,
}

impl std::fmt::Display for ReferenceMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ReferenceMode::TransformedFine => "transformed_fine",
            ReferenceMode::DirectFine => "direct_fine",
            ReferenceMode::ClosedFormGbm => "closed_form_gbm",
        })
    }
}

/// Path norm `q` of the interpolant study: a finite order or `"inf"`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PathNorm<R> {
    Lq(R),
    LInfinity,
}

impl<R: Real> Serialize for PathNorm<R> {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            PathNorm::Lq(q) => q.serialize(serializer),
            PathNorm::LInfinity => serializer.serialize_str("inf"),
        }
    }
}

impl<R: Real> std::fmt::Display for PathNorm<R> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PathNorm::Lq(q) => write!(f, "{q}"),
            PathNorm::LInfinity => f.write_str("inf"),
        }
    }
}

impl<'de, R: Real> Deserialize<'de> for PathNorm<R> {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(bound = "")]
        #[serde(untagged)]
        enum Repr<R: Real> {
            Number(R),
            Name(String),
        }
        match Repr::<R>::deserialize(deserializer)? {
            Repr::Number(q) => Ok(PathNorm::Lq(q)),
            Repr::Name(s) if s == "inf" || s == "infinity" => Ok(PathNorm::LInfinity),
            Repr::Name(s) => Err(serde::de::Error::custom(format!(
                "path norm must be a number or \"inf\", got {s:?}"
            ))),
        }
    }
}

/// Parameters of a convergence or occupation study.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct StudyConfig<R: Real> {
    /// Coarse step counts, increasing, each dividing `n_fine`.
    pub n_list: Vec<usize>,
    /// Fine grid resolution; also the reference resolution.
    pub n_fine: usize,
    /// Monte Carlo path count.
    pub m: usize,
    /// Error moment `p >= 1`.
    pub p: R,
    /// Path norm for the interpolant study.
    pub q: PathNorm<R>,
    pub scheme: Scheme,
    pub reference: ReferenceMode,
    /// Bump radius as a fraction of the admissible `rho`.
    pub nu_fraction: R,
}

impl<R: Real> StudyConfig<R> {
    /// Desk-scale defaults: `n = 2^4..2^10`, `n_fine = 2^14`, `M = 2000`,
    /// `p = 2`, `q = inf`, direct scheme, transformed reference.
    pub fn defaults() -> Self {
        StudyConfig {
            n_list: (4..=10).map(|e| 1usize << e).collect(),
            n_fine: 1 << 14,
            m: 2000,
            p: rf(2.0),
            q: PathNorm::LInfinity,
            scheme: Scheme::Em,
            reference: ReferenceMode::TransformedFine,
            nu_fraction: rf(0.5),
        }
    }

    pub fn validate(&self, problem: &SdeProblem<R>) -> Result<(), Error> {
        if self.n_fine == 0 {
            return Err(Error::InvalidConfig("n_fine must be at least 1".into()));
        }
        if self.n_list.is_empty() {
            return Err(Error::InvalidConfig("n_list is empty".into()));
        }
        if !self.n_list.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidConfig("n_list must be increasing".into()));
        }
        for &n in &self.n_list {
            if n == 0 || !self.n_fine.is_multiple_of(n) {
                return Err(Error::InvalidConfig(format!(
                    "n = {n} does not divide n_fine = {}",
                    self.n_fine
                )));
            }
        }
        if self.m < 2 {
            return Err(Error::InvalidConfig(format!(
                "M must be >= 2, got {}",
                self.m
            )));
        }
        if self.p.is_nan() || self.p < R::one() {
            return Err(Error::InvalidConfig(format!(
                "p must be >= 1, got {}",
                self.p
            )));
        }
        if let PathNorm::Lq(q) = self.q {
            if q.is_nan() || q < R::one() {
                return Err(Error::InvalidConfig(format!("q must be >= 1, got {q}")));
            }
        }
        if self.nu_fraction.is_nan()
            || self.nu_fraction <= R::zero()
            || self.nu_fraction >= R::one()
        {
            return Err(Error::InvalidConfig(format!(
                "nu_fraction must lie in (0, 1), got {}",
                self.nu_fraction
            )));
        }
        if self.reference == ReferenceMode::ClosedFormGbm && problem.gbm_parameters().is_none() {
            return Err(Error::NotGbm);
        }
        Ok(())
    }
}

/// One row of a convergence table.
#[derive(Clone, Debug, Serialize)]
#[serde(bound = "")]
pub struct ErrorRow<R: Real> {
    pub n: usize,
    pub error: R,
    pub std_error: R,
    pub m: usize,
}

/// Monte Carlo estimates of `E[err^p]^{1/p}` per coarse step count.
#[derive(Clone, Debug, Serialize)]
#[serde(bound = "")]
pub struct ErrorTable<R: Real> {
    pub rows: Vec<ErrorRow<R>>,
}

/// Least-squares fit of `log(error)` on `log(n)`.
#[derive(Clone, Copy, Debug, Serialize)]
#[serde(bound = "")]
pub struct RateFit<R: Real> {
    pub slope: R,
    pub intercept: R,
    pub r_squared: R,
}

/// Fit the log-log slope; rows with non-positive error are excluded, and
/// fewer than 3 usable rows is an error. A degenerate spread (all errors
/// equal) fits exactly with slope 0 and `r_squared = 1`.
pub fn fit_rate<R: Real>(table: &ErrorTable<R>) -> Result<RateFit<R>, Error> {
    let points: Vec<(R, R)> = table
        .rows
        .iter()
        .filter(|row| row.error > R::zero())
        .map(|row| (rn::<R>(row.n).ln(), row.error.ln()))
        .collect();
    if points.len() < 3 {
        return Err(Error::TooFewRatePoints {
            usable: points.len(),
        });
    }
    let count = rn::<R>(points.len());
    let mean_x = points.iter().map(|p| p.0).sum::<R>() / count;
    let mean_y = points.iter().map(|p| p.1).sum::<R>() / count;
    let sxx = points
        .iter()
        .map(|p| (p.0 - mean_x) * (p.0 - mean_x))
        .sum::<R>();
    let sxy = points
        .iter()
        .map(|p| (p.0 - mean_x) * (p.1 - mean_y))
        .sum::<R>();
    let syy = points
        .iter()
        .map(|p| (p.1 - mean_y) * (p.1 - mean_y))
        .sum::<R>();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let r_squared = if syy.is_zero() {
        R::one()
    } else {
        (sxy * sxy) / (sxx * syy)
    };
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
    })
}

/// Fine-grid reference values for one path.
///
/// The same `path` must drive the reference and every coarse scheme so that
/// their difference measures strong error.
pub fn reference_path<R: Real>(
    problem: &SdeProblem<R>,
    tp: &TransformedProblem<'_, R>,
    path: &BrownianPath<R>,
    mode: ReferenceMode,
) -> Result<Vec<R>, Error> {
    match mode {
        ReferenceMode::TransformedFine => {
            Ok(transformed_em(tp, path.increments())?.values().to_vec())
        }
        ReferenceMode::DirectFine => Ok(em_discrete(problem, path.increments()).values().to_vec()),
        ReferenceMode::ClosedFormGbm => {
            let (b, c) = problem.gbm_parameters().ok_or(Error::NotGbm)?;
            let x0 = problem.x0();
            let half = rf::<R>(0.5);
            let drift_term = b - half * c * c;
            let n_fine = rn::<R>(path.n_fine());
            Ok((0..=path.n_fine())
                .map(|j| {
                    let t = rn::<R>(j) / n_fine;
                    x0 * (drift_term * t + c * path.value_at(j)).exp()
                })
                .collect())
        }
    }
}

/// `L_q` distance of two functions sampled on the same fine grid:
/// the grid maximum for `q = inf`, left-rectangle quadrature of `|a - b|^q`
/// otherwise (exact for piecewise-constant differences on the fine cells).
pub fn path_norm_distance<R: Real>(a: &[R], b: &[R], q: PathNorm<R>) -> R {
    assert_eq!(a.len(), b.len(), "grids must match");
    match q {
        PathNorm::LInfinity => a
            .iter()
            .zip(b)
            .map(|(&x, &y)| (x - y).abs())
            .fold(R::zero(), R::max),
        PathNorm::Lq(q) => {
            let cells = a.len() - 1;
            let sum = (0..cells)
                .map(|j| (a[j] - b[j]).abs().powf(q))
                .fold(R::zero(), |acc, v| acc + v);
            (sum / rn::<R>(cells)).powf(q.recip())
        }
    }
}

#[derive(Clone, Copy)]
struct MetricSelect {
    final_time: bool,
    supnorm: bool,
    path_lq: bool,
}

/// Per-path error samples of a convergence study, in path-index order.
#[derive(Clone, Debug)]
pub struct ConvergenceMetrics<R: Real> {
    pub n_list: Vec<usize>,
    /// `[n_index][path]` endpoint errors `|ref_1 - X^_{n,1}|`.
    pub final_abs: Vec<Vec<R>>,
    /// `[n_index][path]` fine-grid maxima against the continuous scheme.
    pub sup_abs: Vec<Vec<R>>,
    /// `[n_index][path]` interpolant path-norm errors.
    pub lq: Vec<Vec<R>>,
}

struct PathOut<R> {
    final_abs: Vec<R>,
    sup_abs: Vec<R>,
    lq: Vec<R>,
}

fn path_metrics<R: Real>(
    config: &StudyConfig<R>,
    problem: &SdeProblem<R>,
    tp: &TransformedProblem<'_, R>,
    seed: &SeedSpec,
    index: u64,
    select: MetricSelect,
) -> Result<PathOut<R>, Error> {
    let path = BrownianPath::generate(seed, index, config.n_fine);
    let reference = reference_path(problem, tp, &path, config.reference)?;
    let n_fine = config.n_fine;
    let mut out = PathOut {
        final_abs: Vec::new(),
        sup_abs: Vec::new(),
        lq: Vec::new(),
    };
    for &n in &config.n_list {
        let coarse = path.coarsen(n);
        let nodes: EmPath<R>;
        let mut cont: Option<Vec<R>> = None;
        match config.scheme {
            Scheme::Em => {
                nodes = em_discrete(problem, &coarse);
                if select.supnorm {
                    cont = Some(em_continuous_on_fine(problem, &path, n).values().to_vec());
                }
            }
            Scheme::TransformedEm => {
                nodes = transformed_em(tp, &coarse)?;
                if select.supnorm {
                    let z_cont = em_continuous_on_fine(tp, &path, n);
                    cont = Some(
                        z_cont
                            .values()
                            .iter()
                            .map(|&z| tp.transform().g_inverse(z, tp.inverse_tol()))
                            .collect::<Result<Vec<_>, _>>()?,
                    );
                }
            }
        }
        if select.final_time {
            out.final_abs
                .push((reference[n_fine] - nodes.terminal()).abs());
        }
        if let Some(cont) = cont {
            let sup = reference
                .iter()
                .zip(&cont)
                .map(|(&r, &c)| (r - c).abs())
                .fold(R::zero(), R::max);
            out.sup_abs.push(sup);
        }
        if select.path_lq {
            let interp = interpolant_on_fine_grid(&nodes, n_fine);
            out.lq
                .push(path_norm_distance(&reference, &interp, config.q));
        }
    }
    Ok(out)
}

fn convergence_metrics_select<R: Real>(
    config: &StudyConfig<R>,
    problem: &SdeProblem<R>,
    seed: &SeedSpec,
    select: MetricSelect,
) -> Result<ConvergenceMetrics<R>, Error> {
    config.validate(problem)?;
    let transform = GTransform::build(problem, config.nu_fraction)?;
    let tp = TransformedProblem::new(&transform, problem)?;
    // Map phase: one independent stream per path index; results land in
    // path-index order regardless of scheduling.
    let per_path: Vec<Result<PathOut<R>, Error>> = (0..config.m as u64)
        .into_par_iter()
        .map(|index| path_metrics(config, problem, &tp, seed, index, select))
        .collect();

    let mut metrics = ConvergenceMetrics {
        n_list: config.n_list.clone(),
        final_abs: vec![Vec::with_capacity(config.m); config.n_list.len()],
        sup_abs: vec![Vec::with_capacity(config.m); config.n_list.len()],
        lq: vec![Vec::with_capacity(config.m); config.n_list.len()],
    };
    for result in per_path {
        let out = result?;
        for (i, _) in config.n_list.iter().enumerate() {
            if select.final_time {
                metrics.final_abs[i].push(out.final_abs[i]);
            }
            if select.supnorm {
                metrics.sup_abs[i].push(out.sup_abs[i]);
            }
            if select.path_lq {
                metrics.lq[i].push(out.lq[i]);
            }
        }
    }
    Ok(metrics)
}

/// Run the full study once, collecting all three error metrics per path.
pub fn convergence_metrics<R: Real>(
    config: &StudyConfig<R>,
    problem: &SdeProblem<R>,
    seed: &SeedSpec,
) -> Result<ConvergenceMetrics<R>, Error> {
    convergence_metrics_select(
        config,
        problem,
        seed,
        MetricSelect {
            final_time: true,
            supnorm: true,
            path_lq: true,
        },
    )
}

/// Reduce per-path samples to `E[err^p]^{1/p}` rows with delta-method
/// standard errors, summing in path-index order.
pub fn reduce_error_table<R: Real>(
    n_list: &[usize],
    samples_per_n: &[Vec<R>],
    p: R,
) -> ErrorTable<R> {
    let rows = n_list
        .iter()
        .zip(samples_per_n)
        .map(|(&n, samples)| {
            let m = samples.len();
            let m_r = rn::<R>(m);
            let powered: Vec<R> = samples.iter().map(|&v| pow_p(v, p)).collect();
            let mean = powered.iter().fold(R::zero(), |acc, &v| acc + v) / m_r;
            let var = powered
                .iter()
                .map(|&v| (v - mean) * (v - mean))
                .fold(R::zero(), |acc, v| acc + v)
                / (m_r - R::one());
            let (error, std_error) = if mean > R::zero() {
                let error = mean.powf(p.recip());
                // Delta method through the 1/p root.
                let d = mean.powf(p.recip() - R::one()) / p;
                (error, d * var.sqrt() / m_r.sqrt())
            } else {
                (R::zero(), R::zero())
            };
            ErrorRow {
                n,
                error,
                std_error,
                m,
            }
        })
        .collect();
    ErrorTable { rows }
}

fn pow_p<R: Real>(v: R, p: R) -> R {
    if p == R::one() {
        v
    } else if p == rf(2.0) {
        v * v
    } else {
        v.powf(p)
    }
}

/// `E[|X_1 - X^_{n,1}|^p]^{1/p}` per `n`, against the configured reference.
pub fn final_time_error<R: Real>(
    config: &StudyConfig<R>,
    problem: &SdeProblem<R>,
    seed: &SeedSpec,
) -> Result<ErrorTable<R>, Error> {
    let metrics = convergence_metrics_select(
        config,
        problem,
        seed,
        MetricSelect {
            final_time: true,
            supnorm: false,
            path_lq: false,
        },
    )?;
    Ok(reduce_error_table(
        &metrics.n_list,
        &metrics.final_abs,
        config.p,
    ))
}

/// Supremum-norm error of the time-continuous scheme over the fine grid.
pub fn supnorm_error<R: Real>(
    config: &StudyConfig<R>,
    problem: &SdeProblem<R>,
    seed: &SeedSpec,
) -> Result<ErrorTable<R>, Error> {
    let metrics = convergence_metrics_select(
        config,
        problem,
        seed,
        MetricSelect {
            final_time: false,
            supnorm: true,
            path_lq: false,
        },
    )?;
    Ok(reduce_error_table(
        &metrics.n_list,
        &metrics.sup_abs,
        config.p,
    ))
}

/// `L_q` path error of the piecewise-linear interpolant (fine-grid max for
/// `q = inf`, left-rectangle quadrature otherwise).
pub fn path_lq_error<R: Real>(
    config: &StudyConfig<R>,
    problem: &SdeProblem<R>,
    seed: &SeedSpec,
) -> Result<ErrorTable<R>, Error> {
    let metrics = convergence_metrics_select(
        config,
        problem,
        seed,
        MetricSelect {
            final_time: false,
            supnorm: false,
            path_lq: true,
        },
    )?;
    Ok(reduce_error_table(&metrics.n_list, &metrics.lq, config.p))
}

/// One row of an occupation-time table: moments of the sign-change measure
/// at breakpoint `xi` for step count `n`.
#[derive(Clone, Debug, Serialize)]
#[serde(bound = "")]
pub struct OccupationRow<R: Real> {
    pub n: usize,
    pub xi: R,
    pub mean: R,
    pub pmean: R,
    pub std_error: R,
    pub m: usize,
}

/// Monte Carlo moments of [`sign_change_occupation`] for every `n` and every
/// drift breakpoint. The statistic is a property of the direct
/// Euler-Maruyama scheme, so the configured scheme is not consulted.
pub fn occupation_study<R: Real>(
    config: &StudyConfig<R>,
    problem: &SdeProblem<R>,
    seed: &SeedSpec,
) -> Result<Vec<OccupationRow<R>>, Error> {
    let breakpoints = problem.drift().breakpoints().to_vec();
    if breakpoints.is_empty() {
        return Err(Error::NoBreakpoints);
    }
    config.validate(problem)?;

    // [path][n_index][xi_index]
    let per_path: Vec<Vec<Vec<R>>> = (0..config.m as u64)
        .into_par_iter()
        .map(|index| {
            let path = BrownianPath::generate(seed, index, config.n_fine);
            config
                .n_list
                .iter()
                .map(|&n| {
                    let cont = em_continuous_on_fine(problem, &path, n);
                    breakpoints
                        .iter()
                        .map(|&xi| sign_change_occupation(&cont, xi))
                        .collect()
                })
                .collect()
        })
        .collect();

    let m_r = rn::<R>(config.m);
    let mut rows = Vec::new();
    for (ni, &n) in config.n_list.iter().enumerate() {
        for (bi, &xi) in breakpoints.iter().enumerate() {
            let samples: Vec<R> = per_path.iter().map(|path| path[ni][bi]).collect();
            let mean = samples.iter().fold(R::zero(), |acc, &v| acc + v) / m_r;
            let var = samples
                .iter()
                .map(|&v| (v - mean) * (v - mean))
                .fold(R::zero(), |acc, v| acc + v)
                / (m_r - R::one());
            let pmean = reduce_error_table(&[n], &[samples], config.p).rows[0].error;
            rows.push(OccupationRow {
                n,
                xi,
                mean,
                pmean,
                std_error: var.sqrt() / m_r.sqrt(),
                m: config.m,
            });
        }
    }
    Ok(rows)
}

/// Run `f` on a dedicated pool of `threads` workers (`None`: global pool).
/// Results never depend on the worker count.
pub fn with_worker_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match threads {
        None => f(),
        Some(count) => rayon::ThreadPoolBuilder::new()
            .num_threads(count)
            .build()
            .expect("failed to build worker pool")
            .install(f),
    }
}
