//! Scalar SDE problems `dX = mu(X) dt + sigma(X) dW` with piecewise-Lipschitz
//! drift and Lipschitz diffusion.
//!
//! The drift may jump at finitely many breakpoints `xi_1 < ... < xi_k`; the
//! diffusion is a single global piece and must be non-zero at every drift
//! breakpoint. [`SdeProblem::validate`] checks these admissibility conditions
//! and derives the linear-growth constant `K` with
//! `|mu(x)| + |sigma(x)| <= K * (1 + |x|)`.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::real::{rf, Real};

/// A constant or affine coefficient piece; `Affine { a, b }` means `a + b*x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
#[serde(try_from = "FunctionSpecRepr<R>", into = "FunctionSpecRepr<R>")]
pub enum FunctionSpec<R: Real> {
    Constant(R),
    Affine { a: R, b: R },
}

impl<R: Real> FunctionSpec<R> {
    pub fn eval(&self, x: R) -> R {
        match *self {
            FunctionSpec::Constant(c) => c,
            FunctionSpec::Affine { a, b } => a + b * x,
        }
    }

    /// Exact Lipschitz constant of the piece.
    pub fn lipschitz(&self) -> R {
        match *self {
            FunctionSpec::Constant(_) => R::zero(),
            FunctionSpec::Affine { b, .. } => b.abs(),
        }
    }

    /// `|a| + |b|`, a coefficient `c` with `|f(x)| <= c * (1 + |x|)`.
    pub fn growth_bound(&self) -> R {
        match *self {
            FunctionSpec::Constant(c) => c.abs(),
            FunctionSpec::Affine { a, b } => a.abs() + b.abs(),
        }
    }

    fn params_finite(&self) -> bool {
        match *self {
            FunctionSpec::Constant(c) => c.is_finite(),
            FunctionSpec::Affine { a, b } => a.is_finite() && b.is_finite(),
        }
    }
}

/// Wire format: `{"form": "constant"|"affine", "params": [..]}`.
#[derive(Serialize, Deserialize)]
#[serde(bound = "")]
#[serde(deny_unknown_fields)]
struct FunctionSpecRepr<R: Real> {
    form: FormKind,
    params: Vec<R>,
}

#[derive(Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum FormKind {
    Constant,
    Affine,
}

impl<R: Real> TryFrom<FunctionSpecRepr<R>> for FunctionSpec<R> {
    type Error = String;

    fn try_from(repr: FunctionSpecRepr<R>) -> Result<Self, String> {
        match (repr.form, repr.params.as_slice()) {
            (FormKind::Constant, &[c]) => Ok(FunctionSpec::Constant(c)),
            (FormKind::Affine, &[a, b]) => Ok(FunctionSpec::Affine { a, b }),
            (FormKind::Constant, p) => Err(format!("constant takes 1 parameter, got {}", p.len())),
            (FormKind::Affine, p) => Err(format!("affine takes 2 parameters, got {}", p.len())),
        }
    }
}

impl<R: Real> From<FunctionSpec<R>> for FunctionSpecRepr<R> {
    fn from(spec: FunctionSpec<R>) -> Self {
        match spec {
            FunctionSpec::Constant(c) => FunctionSpecRepr {
                form: FormKind::Constant,
                params: vec![c],
            },
            FunctionSpec::Affine { a, b } => FunctionSpecRepr {
                form: FormKind::Affine,
                params: vec![a, b],
            },
        }
    }
}

/// Drift made of `k+1` pieces separated by `k` breakpoints; piece `i` lives
/// on the open interval `(xi_{i-1}, xi_i)`, and the value at each breakpoint
/// is declared explicitly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
#[serde(try_from = "PiecewiseDriftRepr<R>", into = "PiecewiseDriftRepr<R>")]
pub struct PiecewiseDrift<R: Real> {
    breakpoints: Vec<R>,
    pieces: Vec<FunctionSpec<R>>,
    breakpoint_values: Vec<R>,
}

impl<R: Real> PiecewiseDrift<R> {
    /// `breakpoint_values[i]` declares `mu(xi_i)`; `None` defaults every
    /// breakpoint to its right limit.
    pub fn new(
        breakpoints: Vec<R>,
        pieces: Vec<FunctionSpec<R>>,
        breakpoint_values: Option<Vec<R>>,
    ) -> Result<Self, Error> {
        if pieces.len() != breakpoints.len() + 1 {
            return Err(Error::PieceCountMismatch {
                breakpoints: breakpoints.len(),
                pieces: pieces.len(),
            });
        }
        let breakpoint_values = match breakpoint_values {
            Some(values) => {
                if values.len() != breakpoints.len() {
                    return Err(Error::BreakpointValueCountMismatch {
                        breakpoints: breakpoints.len(),
                        values: values.len(),
                    });
                }
                values
            }
            None => breakpoints
                .iter()
                .enumerate()
                .map(|(i, &xi)| pieces[i + 1].eval(xi))
                .collect(),
        };
        Ok(PiecewiseDrift {
            breakpoints,
            pieces,
            breakpoint_values,
        })
    }

    /// Lipschitz drift without breakpoints.
    pub fn single(piece: FunctionSpec<R>) -> Self {
        PiecewiseDrift {
            breakpoints: Vec::new(),
            pieces: vec![piece],
            breakpoint_values: Vec::new(),
        }
    }

    pub fn breakpoint_count(&self) -> usize {
        self.breakpoints.len()
    }

    pub fn breakpoints(&self) -> &[R] {
        &self.breakpoints
    }

    pub fn pieces(&self) -> &[FunctionSpec<R>] {
        &self.pieces
    }

    pub fn breakpoint_values(&self) -> &[R] {
        &self.breakpoint_values
    }

    /// Evaluate the drift; an exact breakpoint hit returns the declared value.
    pub fn eval(&self, x: R) -> R {
        let idx = self.breakpoints.partition_point(|&b| b < x);
        if idx < self.breakpoints.len() && self.breakpoints[idx] == x {
            return self.breakpoint_values[idx];
        }
        self.pieces[idx].eval(x)
    }

    /// One-sided limits `(mu(xi_i-), mu(xi_i+))` at breakpoint `i` (0-based).
    ///
    /// Exact for the parametric pieces: the adjacent pieces are evaluated at
    /// the breakpoint itself.
    pub fn one_sided_limits(&self, i: usize) -> Result<(R, R), Error> {
        if i >= self.breakpoints.len() {
            return Err(Error::BreakpointIndexOutOfRange {
                index: i,
                k: self.breakpoints.len(),
            });
        }
        let xi = self.breakpoints[i];
        Ok((self.pieces[i].eval(xi), self.pieces[i + 1].eval(xi)))
    }

    /// Growth coefficient `c` with `|mu(x)| <= c * (1 + |x|)` everywhere,
    /// including the declared breakpoint values.
    fn growth_bound(&self) -> R {
        let piece_bound = self
            .pieces
            .iter()
            .map(FunctionSpec::growth_bound)
            .fold(R::zero(), R::max);
        self.breakpoints
            .iter()
            .zip(&self.breakpoint_values)
            .map(|(&xi, &v)| v.abs() / (R::one() + xi.abs()))
            .fold(piece_bound, R::max)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "")]
#[serde(deny_unknown_fields)]
struct PiecewiseDriftRepr<R: Real> {
    #[serde(default = "Vec::new")]
    breakpoints: Vec<R>,
    pieces: Vec<FunctionSpec<R>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    breakpoint_values: Option<Vec<R>>,
}

impl<R: Real> TryFrom<PiecewiseDriftRepr<R>> for PiecewiseDrift<R> {
    type Error = String;

    fn try_from(repr: PiecewiseDriftRepr<R>) -> Result<Self, String> {
        PiecewiseDrift::new(repr.breakpoints, repr.pieces, repr.breakpoint_values)
            .map_err(|e| e.to_string())
    }
}

impl<R: Real> From<PiecewiseDrift<R>> for PiecewiseDriftRepr<R> {
    fn from(drift: PiecewiseDrift<R>) -> Self {
        PiecewiseDriftRepr {
            breakpoints: drift.breakpoints,
            pieces: drift.pieces,
            breakpoint_values: Some(drift.breakpoint_values),
        }
    }
}

/// Diffusion coefficient: a single global piece.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
#[serde(transparent)]
pub struct Diffusion<R: Real> {
    pub spec: FunctionSpec<R>,
}

impl<R: Real> Diffusion<R> {
    pub fn new(spec: FunctionSpec<R>) -> Self {
        Diffusion { spec }
    }

    pub fn eval(&self, x: R) -> R {
        self.spec.eval(x)
    }
}

/// An SDE problem together with its derived linear-growth constant.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "")]
#[serde(try_from = "SdeProblemRepr<R>", into = "SdeProblemRepr<R>")]
pub struct SdeProblem<R: Real> {
    x0: R,
    drift: PiecewiseDrift<R>,
    diffusion: Diffusion<R>,
    growth_constant: R,
}

impl<R: Real> SdeProblem<R> {
    pub fn new(x0: R, drift: PiecewiseDrift<R>, diffusion: Diffusion<R>) -> Self {
        let growth_constant = drift.growth_bound() + diffusion.spec.growth_bound();
        SdeProblem {
            x0,
            drift,
            diffusion,
            growth_constant,
        }
    }

    pub fn x0(&self) -> R {
        self.x0
    }

    pub fn drift(&self) -> &PiecewiseDrift<R> {
        &self.drift
    }

    pub fn diffusion(&self) -> &Diffusion<R> {
        &self.diffusion
    }

    /// Derived `K` with `|mu(x)| + |sigma(x)| <= K * (1 + |x|)`.
    pub fn growth_constant(&self) -> R {
        self.growth_constant
    }

    /// The GBM parameters `(b, c)` if the problem is `dX = b X dt + c X dW`
    /// without breakpoints.
    pub fn gbm_parameters(&self) -> Option<(R, R)> {
        if self.drift.breakpoint_count() != 0 {
            return None;
        }
        match (self.drift.pieces[0], self.diffusion.spec) {
            (FunctionSpec::Affine { a, b }, FunctionSpec::Affine { a: c, b: d })
                if a.is_zero() && c.is_zero() =>
            {
                Some((b, d))
            }
            _ => None,
        }
    }

    /// Check the admissibility assumptions and report every check.
    ///
    /// `zero_tol` (> 0) is the numerical threshold standing in for
    /// `sigma(xi) != 0`.
    pub fn validate(&self, zero_tol: R) -> ValidationReport<R> {
        assert!(zero_tol > R::zero(), "zero_tol must be positive");
        let mut checks = Vec::new();

        let ordered = self.drift.breakpoints.windows(2).all(|w| w[0] < w[1]);
        checks.push(ValidationCheck {
            name: "breakpoint-ordering".into(),
            passed: ordered,
            detail: if ordered {
                "breakpoints strictly increasing".into()
            } else {
                "breakpoints not strictly increasing".into()
            },
        });

        let finite = self.x0.is_finite()
            && self.drift.pieces.iter().all(FunctionSpec::params_finite)
            && self.drift.breakpoints.iter().all(|b| b.is_finite())
            && self.drift.breakpoint_values.iter().all(|v| v.is_finite())
            && self.diffusion.spec.params_finite();
        checks.push(ValidationCheck {
            name: "finite-coefficients".into(),
            passed: finite,
            detail: "all parameters, breakpoints and x0 finite".into(),
        });

        let lip_drift = self
            .drift
            .pieces
            .iter()
            .map(FunctionSpec::lipschitz)
            .fold(R::zero(), R::max);
        let lip_sigma = self.diffusion.spec.lipschitz();
        let lip_ok = lip_drift.is_finite() && lip_sigma.is_finite();
        checks.push(ValidationCheck {
            name: "lipschitz-constants".into(),
            passed: lip_ok,
            detail: format!("max drift piece {lip_drift}, diffusion {lip_sigma}"),
        });

        for (i, &xi) in self.drift.breakpoints.iter().enumerate() {
            let sigma_xi = self.diffusion.eval(xi);
            let passed = sigma_xi.abs() > zero_tol;
            checks.push(ValidationCheck {
                name: format!("diffusion-nonzero[{i}]"),
                passed,
                detail: format!("A2: |sigma({xi})| = {} vs tol {zero_tol}", sigma_xi.abs()),
            });
        }

        let growth_ok = self.growth_constant.is_finite();
        checks.push(ValidationCheck {
            name: "linear-growth".into(),
            passed: growth_ok,
            detail: format!("K = {}", self.growth_constant),
        });

        ValidationReport {
            checks,
            growth_constant: self.growth_constant,
        }
    }

    /// Shorthand with the default `zero_tol` of 1e-12.
    pub fn validate_default(&self) -> ValidationReport<R> {
        self.validate(rf(DEFAULT_ZERO_TOL))
    }
}

/// Default numerical threshold for the `sigma(xi) != 0` check.
pub const DEFAULT_ZERO_TOL: f64 = 1e-12;

#[derive(Serialize, Deserialize)]
#[serde(bound = "")]
#[serde(deny_unknown_fields)]
struct SdeProblemRepr<R: Real> {
    x0: R,
    drift: PiecewiseDrift<R>,
    diffusion: Diffusion<R>,
}

impl<R: Real> TryFrom<SdeProblemRepr<R>> for SdeProblem<R> {
    type Error = String;

    fn try_from(repr: SdeProblemRepr<R>) -> Result<Self, String> {
        Ok(SdeProblem::new(repr.x0, repr.drift, repr.diffusion))
    }
}

impl<R: Real> From<SdeProblem<R>> for SdeProblemRepr<R> {
    fn from(p: SdeProblem<R>) -> Self {
        SdeProblemRepr {
            x0: p.x0,
            drift: p.drift,
            diffusion: p.diffusion,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Outcome of [`SdeProblem::validate`]; admissible iff every check passed.
#[derive(Clone, Debug, Serialize)]
#[serde(bound = "")]
pub struct ValidationReport<R: Real> {
    pub checks: Vec<ValidationCheck>,
    pub growth_constant: R,
}

impl<R: Real> ValidationReport<R> {
    pub fn admissible(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn first_failure(&self) -> Option<&ValidationCheck> {
        self.checks.iter().find(|c| !c.passed)
    }
}

/// Anything the schemes can integrate: an initial value plus drift and
/// diffusion evaluators.
pub trait Coefficients<R: Real>: Sync {
    fn initial_value(&self) -> R;
    fn drift(&self, x: R) -> R;
    fn diffusion(&self, x: R) -> R;
}

impl<R: Real> Coefficients<R> for SdeProblem<R> {
    fn initial_value(&self) -> R {
        self.x0
    }

    fn drift(&self, x: R) -> R {
        self.drift.eval(x)
    }

    fn diffusion(&self, x: R) -> R {
        self.diffusion.eval(x)
    }
}
