//! The Stein operator `T_p f = (f p)′/p`, score differences, Stein-equation
//! solutions, test-class membership probes and the exact identities
//! connecting them.

mod identities;
mod membership;
mod solution;

use std::fmt;
use std::sync::Arc;

use crate::densities::DensityModel;
use crate::error::{Error, Result};
use crate::numdiff;

pub use identities::{
    characterization_residual, fundamental_identity_residual, stein_identity_residual, Characterization,
    FundamentalIdentity, SteinIdentity,
};
pub use membership::{check_membership_f, MembershipReport, MEMBERSHIP_THRESHOLD};
pub use solution::{
    bounded_solution_zero_mean, solve_halfline_indicator, solve_stein_equation, RhsKind, SteinSolution,
};

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A real function with an optional exact derivative. Also used for the
/// right-hand sides `l` and `h` of Stein equations.
#[derive(Clone)]
pub struct TestFunction {
    pub name: String,
    eval: RealFn,
    deriv: Option<RealFn>,
    /// Asserted limits of `f·p` at `a⁺` and `b⁻`, checked by the membership probe.
    pub boundary_claims: Option<(f64, f64)>,
    /// Points where the function or its derivative jumps.
    pub breakpoints: Vec<f64>,
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestFunction")
            .field("name", &self.name)
            .field("has_deriv", &self.deriv.is_some())
            .field("breakpoints", &self.breakpoints)
            .finish()
    }
}

impl TestFunction {
    pub fn new<F>(name: impl Into<String>, eval: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            eval: Arc::new(eval),
            deriv: None,
            boundary_claims: None,
            breakpoints: Vec::new(),
        }
    }

    pub fn with_deriv<F>(mut self, deriv: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        self.deriv = Some(Arc::new(deriv));
        self
    }

    pub fn without_deriv(mut self) -> Self {
        self.deriv = None;
        self
    }

    pub fn with_breakpoints(mut self, pts: impl IntoIterator<Item = f64>) -> Self {
        self.breakpoints.extend(pts);
        self.breakpoints.sort_by(f64::total_cmp);
        self.breakpoints.dedup();
        self
    }

    pub fn with_boundary_claims(mut self, lower: f64, upper: f64) -> Self {
        self.boundary_claims = Some((lower, upper));
        self
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (self.eval)(x)
    }

    #[inline]
    pub fn deriv(&self, x: f64) -> Option<f64> {
        self.deriv.as_ref().map(|d| d(x))
    }

    pub fn has_deriv(&self) -> bool {
        self.deriv.is_some()
    }

    pub fn constant(c: f64) -> Self {
        Self::new(format!("const({c})"), move |_| c).with_deriv(|_| 0.0)
    }

    pub fn identity() -> Self {
        Self::new("x", |x| x).with_deriv(|_| 1.0)
    }

    pub fn square() -> Self {
        Self::new("x2", |x| x * x).with_deriv(|x| 2.0 * x)
    }

    pub fn sin() -> Self {
        Self::new("sin", f64::sin).with_deriv(f64::cos)
    }

    pub fn tanh() -> Self {
        Self::new("tanh", f64::tanh).with_deriv(|x| 1.0 - x.tanh().powi(2))
    }

    /// `sign(x)`, with `sign(0) = 0`.
    pub fn sign() -> Self {
        Self::new("sign", |x| if x > 0.0 { 1.0 } else if x < 0.0 { -1.0 } else { 0.0 })
            .with_deriv(|_| 0.0)
            .with_breakpoints([0.0])
    }

    /// `𝟙_{(−∞, z]}`.
    pub fn indicator_lower(z: f64) -> Self {
        Self::new(format!("indicator_le({z})"), move |x| if x <= z { 1.0 } else { 0.0 })
            .with_deriv(|_| 0.0)
            .with_breakpoints([z])
    }

    /// `x(1 − x)` on `[0, 1]`, zero elsewhere.
    pub fn unit_bump() -> Self {
        Self::new("bump01", |x| if (0.0..=1.0).contains(&x) { x * (1.0 - x) } else { 0.0 })
            .with_deriv(|x| if (0.0..=1.0).contains(&x) { 1.0 - 2.0 * x } else { 0.0 })
            .with_breakpoints([0.0, 1.0])
    }

    /// Looks up a named function: `one`, `x`, `x2`, `sin`, `tanh`, `sign`,
    /// `bump01`, `indicator_le:<z>`.
    pub fn from_name(name: &str) -> Result<Self> {
        if let Some(z) = name.strip_prefix("indicator_le:") {
            let z: f64 = z.trim().parse().map_err(|_| Error::UnknownClass(name.into()))?;
            return Ok(Self::indicator_lower(z));
        }
        Ok(match name {
            "one" => Self::constant(1.0),
            "x" => Self::identity(),
            "x2" => Self::square(),
            "sin" => Self::sin(),
            "tanh" => Self::tanh(),
            "sign" => Self::sign(),
            "bump01" => Self::unit_bump(),
            _ => return Err(Error::UnknownClass(name.into())),
        })
    }

    /// Names accepted by [`TestFunction::from_name`].
    pub const CATALOG: &'static [&'static str] =
        &["one", "x", "x2", "sin", "tanh", "sign", "bump01", "indicator_le:<z>"];
}

/// How an operator value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorPath {
    /// `f′ + score·f` with the supplied derivative.
    ProductRule,
    /// Finite difference of `f·p`, divided by `p`.
    DerivativeOfProduct,
    /// `x ∉ S_p`; the value is 0 by convention.
    OffSupport,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorValue {
    pub value: f64,
    pub path: OperatorPath,
}

/// `T_p f(x) = (f′(x) + score(x) f(x))·𝟙_{S_p}(x)`, using the supplied
/// derivative when there is one.
pub fn apply_operator(p: &DensityModel, f: &TestFunction, x: f64) -> Result<OperatorValue> {
    if !p.support().contains(x) {
        return Ok(OperatorValue {
            value: 0.0,
            path: OperatorPath::OffSupport,
        });
    }
    match f.deriv(x) {
        Some(d) => {
            let value = d + p.score(x) * f.eval(x);
            if !value.is_finite() {
                return Err(Error::NonFiniteEvaluation { x });
            }
            Ok(OperatorValue {
                value,
                path: OperatorPath::ProductRule,
            })
        }
        None => apply_operator_fd(p, f, x),
    }
}

/// `T_p f(x)` by differentiating `f(y)·p(y)/p(x)` numerically at `y = x`,
/// ignoring any supplied derivative. The stencil stays clear of kinks of
/// `p`, breakpoints of `f` and the ends of the support.
pub fn apply_operator_fd(p: &DensityModel, f: &TestFunction, x: f64) -> Result<OperatorValue> {
    if !p.support().contains(x) {
        return Ok(OperatorValue {
            value: 0.0,
            path: OperatorPath::OffSupport,
        });
    }
    let lpx = p.log_pdf(x);
    let scale = p.scale();
    let s = p.score(x).abs();
    let h = 1e-3 * scale / (1.0 + s * scale);
    let mut obstacles: Vec<f64> = p.kink_points().to_vec();
    obstacles.extend(f.breakpoints.iter().copied());
    obstacles.retain(|k| *k != x);
    let (mut left, right) = numdiff::room(x, p.support().lower(), p.support().upper(), &obstacles);
    if p.kink_points().contains(&x) || f.breakpoints.contains(&x) {
        // right-limit convention at a kink
        left = 0.0;
    }
    let g = |y: f64| {
        let w = (p.log_pdf(y) - lpx).exp();
        if w == 0.0 {
            0.0
        } else {
            f.eval(y) * w
        }
    };
    let value = numdiff::derivative(&g, x, h, left, right);
    if !value.is_finite() {
        return Err(Error::NonFiniteEvaluation { x });
    }
    Ok(OperatorValue {
        value,
        path: OperatorPath::DerivativeOfProduct,
    })
}

pub(crate) fn require_nested(p: &DensityModel, q: &DensityModel) -> Result<()> {
    if q.support().is_subset_of(p.support()) {
        Ok(())
    } else {
        Err(Error::SupportMismatch {
            p_support: p.support().to_string(),
            q_support: q.support().to_string(),
        })
    }
}

/// `r(p, q)(x) = p′/p − q′/q` on `S_p ∩ S_q`, 0 elsewhere. Requires `S_q ⊆ S_p`.
pub fn score_difference(p: &DensityModel, q: &DensityModel, x: f64) -> Result<f64> {
    require_nested(p, q)?;
    Ok(score_difference_unchecked(p, q, x))
}

pub(crate) fn score_difference_unchecked(p: &DensityModel, q: &DensityModel, x: f64) -> f64 {
    if p.support().contains(x) && q.support().contains(x) {
        p.score(x) - q.score(x)
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn operator_examples() {
        let g = DensityModel::standard_gaussian();
        assert_eq!(apply_operator(&g, &TestFunction::constant(1.0), 2.0).unwrap().value, -2.0);
        let e = DensityModel::exponential(1.0).unwrap();
        assert_eq!(apply_operator(&e, &TestFunction::identity(), 3.0).unwrap().value, -2.0);
        let b = DensityModel::beta(2.0, 3.0).unwrap();
        let f = TestFunction::new("x(1-x)", |x| x * (1.0 - x)).with_deriv(|x| 1.0 - 2.0 * x);
        assert!((apply_operator(&b, &f, 0.5).unwrap().value + 0.5).abs() < 1e-15);
    }

    #[test]
    fn both_operator_paths_agree() {
        let cases = [
            (DensityModel::standard_gaussian(), TestFunction::sin(), [-2.0, 0.3, 1.7]),
            (DensityModel::beta(2.0, 3.0).unwrap(), TestFunction::square(), [0.05, 0.4, 0.97]),
            (DensityModel::laplace(1.0, 0.0).unwrap(), TestFunction::tanh(), [-1.0, 0.0, 2.5]),
            (DensityModel::exponential(2.0).unwrap(), TestFunction::identity(), [0.0, 0.5, 9.0]),
        ];
        for (p, f, xs) in &cases {
            for &x in xs {
                let a = apply_operator(p, f, x).unwrap();
                let b = apply_operator_fd(p, f, x).unwrap();
                assert_eq!(a.path, OperatorPath::ProductRule);
                assert_eq!(b.path, OperatorPath::DerivativeOfProduct);
                assert!((a.value - b.value).abs() < 1e-6, "{} {} {x}: {} vs {}", p.label(), f.name, a.value, b.value);
            }
        }
    }

    #[test]
    fn off_support_is_zero() {
        let e = DensityModel::exponential(1.0).unwrap();
        let v = apply_operator(&e, &TestFunction::constant(1.0), -1.0).unwrap();
        assert_eq!(v.value, 0.0);
        assert_eq!(v.path, OperatorPath::OffSupport);
    }

    #[test]
    fn score_difference_examples() {
        let g = DensityModel::standard_gaussian();
        let g1 = DensityModel::gaussian(1.0, 1.0).unwrap();
        assert_eq!(score_difference(&g, &g, 0.7).unwrap(), 0.0);
        assert!((score_difference(&g, &g1, 0.3).unwrap() + 1.0).abs() < 1e-15);
        let e = DensityModel::exponential(1.0).unwrap();
        assert_eq!(score_difference(&g, &e, -1.0).unwrap(), 0.0);
        assert_eq!(score_difference(&g, &e, 2.0).unwrap(), -1.0);
        assert!(matches!(score_difference(&e, &g, 1.0), Err(Error::SupportMismatch { .. })));
    }

    #[test]
    fn catalog_lookup() {
        for name in ["one", "x", "x2", "sin", "tanh", "sign", "bump01", "indicator_le:0.5"] {
            assert!(TestFunction::from_name(name).is_ok(), "{name}");
        }
        assert!(matches!(TestFunction::from_name("nope"), Err(Error::UnknownClass(_))));
    }
}
