//! Residuals of the exact integration-by-parts identities.

use serde::Serialize;

use super::membership::check_membership_f;
use super::{
    apply_operator, apply_operator_fd, require_nested, score_difference_unchecked, solve_halfline_indicator,
    solve_stein_equation, TestFunction,
};
use crate::densities::DensityModel;
use crate::error::{Error, Result};
use crate::quadrature::{expectation_with, Tolerances};

#[derive(Debug, Clone, Serialize)]
pub struct SteinIdentity {
    /// `E_q[T_p f]`.
    pub lhs: f64,
    /// `E_q[f·r(p, q)]`.
    pub rhs: f64,
    pub residual: f64,
    /// Set when `f ∉ F(p) ∩ F(q)` by the membership probe.
    pub membership_warning: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FundamentalIdentity {
    /// `E_q[l] − E_p[l]`.
    pub lhs: f64,
    /// `E_q[f_l·r(p, q)]`.
    pub rhs: f64,
    pub residual: f64,
    pub membership_warning: Option<String>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Characterization {
    pub z: f64,
    /// `E_q[T_p f_z]` with `T_p f_z` from finite differences of `f_z·p`.
    pub measured: f64,
    /// `Q(z) − P(z)·Q(b)`, with `Q` the mass of `q` from `a`.
    pub predicted: f64,
    pub residual: f64,
}

fn breakpoints(p: &DensityModel, extra: &[f64]) -> Vec<f64> {
    p.kink_points().iter().chain(extra).copied().collect()
}

/// Identity integrands often cancel to zero, so the absolute tolerance sits
/// just above the roundoff floor of an O(1) integrand.
const IDENTITY_TOL: Tolerances = Tolerances {
    abs_tol: 1e-12,
    rel_tol: 1e-12,
    max_panels: 4096,
};

fn eq(q: &DensityModel, g: impl Fn(f64) -> f64, bps: &[f64]) -> Result<f64> {
    Ok(expectation_with(q, g, bps, &IDENTITY_TOL)?.require_converged()?.value)
}

fn membership_warning(p: &DensityModel, q: &DensityModel, f: &TestFunction) -> Option<String> {
    let mp = check_membership_f(p, f);
    let mq = check_membership_f(q, f);
    let bad: Vec<String> = [(&mp, "p"), (&mq, "q")]
        .iter()
        .filter(|(m, _)| !m.member)
        .map(|(m, who)| {
            format!(
                "{} not in F({who}): |f·{who}| ≈ ({:.3e}, {:.3e}) at the support ends",
                f.name, m.lower_limit, m.upper_limit
            )
        })
        .collect();
    (!bad.is_empty()).then(|| bad.join("; "))
}

/// `|E_q[T_p f] − E_q[f·r(p, q)]|`. The identity needs `S_q ⊆ S_p` and
/// `f ∈ F(p) ∩ F(q)`; a failed membership probe is reported, not fatal.
pub fn stein_identity_residual(p: &DensityModel, q: &DensityModel, f: &TestFunction) -> Result<SteinIdentity> {
    require_nested(p, q)?;
    let bps = breakpoints(p, &f.breakpoints);
    let lhs = eq(
        q,
        |x| apply_operator(p, f, x).map(|v| v.value).unwrap_or(f64::NAN),
        &bps,
    )?;
    let rhs = eq(q, |x| f.eval(x) * score_difference_unchecked(p, q, x), &bps)?;
    Ok(SteinIdentity {
        lhs,
        rhs,
        residual: (lhs - rhs).abs(),
        membership_warning: membership_warning(p, q, f),
    })
}

/// `|E_q[l] − E_p[l] − E_q[f_l·r(p, q)]|` with `f_l` the Stein solution for
/// `l` under `p`.
pub fn fundamental_identity_residual(
    p: &DensityModel,
    q: &DensityModel,
    l: &TestFunction,
) -> Result<FundamentalIdentity> {
    require_nested(p, q)?;
    let sol = solve_stein_equation(p, l)?;
    let f = sol.as_test_function();
    let bps = breakpoints(p, &l.breakpoints);
    let eq_l = eq(q, |x| l.eval(x), &bps)?;
    let lhs = eq_l - sol.rhs_mean();
    let rhs = eq(q, |x| sol.eval(x) * score_difference_unchecked(p, q, x), &bps)?;
    Ok(FundamentalIdentity {
        lhs,
        rhs,
        residual: (lhs - rhs).abs(),
        membership_warning: membership_warning(p, q, &f),
    })
}

/// Measured `E_q[T_p f_z]` against `Q(z) − P(z)·Q(b)` for the half-line
/// indicator solution `f_z`.
pub fn characterization_residual(p: &DensityModel, q: &DensityModel, z: f64) -> Result<Characterization> {
    let sol = solve_halfline_indicator(p, z)?;
    if !q.support().is_subset_of(p.support()) {
        return Err(Error::SupportMismatch {
            p_support: p.support().to_string(),
            q_support: q.support().to_string(),
        });
    }
    let f = sol.as_test_function().without_deriv();
    let bps = breakpoints(p, &[z]);
    let measured = eq(
        q,
        |x| apply_operator_fd(p, &f, x).map(|v| v.value).unwrap_or(f64::NAN),
        &bps,
    )?;
    let (a, b) = (p.support().lower(), p.support().upper());
    let q_from_a = |x: f64| q.cdf(x) - q.cdf(a);
    let predicted = q_from_a(z) - p.cdf(z) * q_from_a(b);
    Ok(Characterization {
        z,
        measured,
        predicted,
        residual: (measured - predicted).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use libm::erfc;

    fn phi(x: f64) -> f64 {
        0.5 * erfc(-x / std::f64::consts::SQRT_2)
    }

    #[test]
    fn stein_identity_examples() {
        let g = DensityModel::standard_gaussian();
        let g1 = DensityModel::gaussian(1.0, 1.0).unwrap();
        let one = TestFunction::constant(1.0);
        assert!(stein_identity_residual(&g, &g, &one).unwrap().residual < 1e-9);
        let r = stein_identity_residual(&g, &g1, &one).unwrap();
        assert!((r.lhs + 1.0).abs() < 1e-9 && (r.rhs + 1.0).abs() < 1e-9);
        assert!(r.residual < 1e-7);
        let b = DensityModel::beta(2.0, 3.0).unwrap();
        let r = stein_identity_residual(&g, &b, &TestFunction::unit_bump()).unwrap();
        assert!(r.residual < 1e-7, "{r:?}");
        assert!(r.membership_warning.is_none(), "{r:?}");
    }

    #[test]
    fn stein_identity_rejects_wider_q() {
        let e = DensityModel::exponential(1.0).unwrap();
        let g = DensityModel::standard_gaussian();
        assert!(matches!(
            stein_identity_residual(&e, &g, &TestFunction::constant(1.0)),
            Err(Error::SupportMismatch { .. })
        ));
    }

    #[test]
    fn fundamental_identity_examples() {
        let g = DensityModel::standard_gaussian();
        let g1 = DensityModel::gaussian(1.0, 1.0).unwrap();
        let r = fundamental_identity_residual(&g, &g1, &TestFunction::identity()).unwrap();
        assert!((r.lhs - 1.0).abs() < 1e-9 && r.residual < 1e-8, "{r:?}");
        let r = fundamental_identity_residual(&g, &g1, &TestFunction::indicator_lower(0.0)).unwrap();
        assert!((r.lhs - (phi(-1.0) - 0.5)).abs() < 1e-9);
        assert!((r.lhs + 0.341_344_746_068_542_9).abs() < 1e-9);
        assert!(r.residual < 1e-7, "{r:?}");
        let r = fundamental_identity_residual(&g1, &g1, &TestFunction::sin()).unwrap();
        assert!(r.residual < 1e-9);
    }

    #[test]
    fn characterization_examples() {
        let g = DensityModel::standard_gaussian();
        let c = characterization_residual(&g, &g, 1.0).unwrap();
        assert!(c.predicted.abs() < 1e-15 && c.residual < 1e-7, "{c:?}");
        let g1 = DensityModel::gaussian(1.0, 1.0).unwrap();
        let c = characterization_residual(&g, &g1, 0.0).unwrap();
        assert!((c.predicted + 0.341_344_746_068_542_9).abs() < 1e-12, "{c:?}");
        assert!(c.residual < 1e-7, "{c:?}");
        let e = DensityModel::exponential(1.0).unwrap();
        let c = characterization_residual(&g, &e, 1.0).unwrap();
        assert!((c.predicted - (1.0 - (-1.0f64).exp() - phi(1.0))).abs() < 1e-14);
        assert!((c.predicted + 0.209_224_187_2).abs() < 1e-9);
        assert!(c.residual < 1e-7, "{c:?}");
    }
}
