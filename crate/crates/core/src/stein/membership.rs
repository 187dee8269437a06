//! Numerical probe of `f ∈ F(p)`: `f·p` must vanish at both ends of `S_p`.

use serde::Serialize;

use super::TestFunction;
use crate::densities::DensityModel;
use crate::numdiff;

/// Default limit threshold for `|f·p|` at the support ends.
pub const MEMBERSHIP_THRESHOLD: f64 = 1e-8;
const PROBES: usize = 40;
const GRID: usize = 64;

#[derive(Debug, Clone, Serialize)]
pub struct MembershipReport {
    pub member: bool,
    pub threshold: f64,
    /// Estimated `f·p` at `a⁺` and `b⁻` (the value at the innermost probe).
    pub lower_limit: f64,
    pub upper_limit: f64,
    /// `(x, f(x)p(x))` along each approach.
    pub lower_probes: Vec<(f64, f64)>,
    pub upper_probes: Vec<(f64, f64)>,
    /// Largest gap between the supplied derivative and finite differences of
    /// `f` on an interior grid; `None` without a supplied derivative.
    pub max_derivative_mismatch: Option<f64>,
    /// Whether `f·p` evaluated finitely with finite difference quotients on
    /// the interior grid.
    pub differentiable: bool,
    /// Claims that disagree with the probes, if any.
    pub claim_mismatch: Option<String>,
}

fn approach(p: &DensityModel, f: &TestFunction, upper: bool) -> Vec<(f64, f64)> {
    let sup = p.support();
    let (wa, wb) = p.window();
    let end = if upper { sup.upper() } else { sup.lower() };
    let dir = if upper { 1.0 } else { -1.0 };
    let xs: Vec<f64> = if end.is_finite() {
        let span = (sup.upper().min(wb) - sup.lower().max(wa)).min(p.scale()).max(f64::MIN_POSITIVE);
        (1..=PROBES)
            .map(|k| end - dir * 0.5 * span * 0.5f64.powi(k as i32 - 1))
            .filter(|x| *x != end)
            .collect()
    } else {
        let edge = if upper { wb } else { wa };
        let m = p.median();
        (0..=PROBES)
            .map(|k| m + 2.0 * (edge - m) * k as f64 / PROBES as f64)
            .collect()
    };
    xs.into_iter().map(|x| (x, f.eval(x) * p.pdf(x))).collect()
}

/// Probes `f·p` toward each end of `S_p`: geometrically toward finite ends,
/// and out to twice the distance from the median to the density window edge
/// for infinite ones.
pub fn check_membership_f(p: &DensityModel, f: &TestFunction) -> MembershipReport {
    check_membership_f_with(p, f, MEMBERSHIP_THRESHOLD)
}

pub fn check_membership_f_with(p: &DensityModel, f: &TestFunction, threshold: f64) -> MembershipReport {
    let lower_probes = approach(p, f, false);
    let upper_probes = approach(p, f, true);
    let limit = |v: &[(f64, f64)]| v.last().map(|(_, y)| y.abs()).unwrap_or(0.0);
    let lower_limit = limit(&lower_probes);
    let upper_limit = limit(&upper_probes);

    let sup = p.support();
    let (wa, wb) = p.window();
    let lo = sup.lower().max(wa);
    let hi = sup.upper().min(wb);
    let scale = p.scale();
    let mut obstacles: Vec<f64> = p.kink_points().to_vec();
    obstacles.extend(f.breakpoints.iter().copied());
    let mut mismatch: Option<f64> = None;
    let mut differentiable = true;
    for i in 0..GRID {
        let x = lo + (hi - lo) * (i as f64 + 0.5) / GRID as f64;
        if !sup.contains_interior(x) || obstacles.iter().any(|k| (k - x).abs() < 1e-3 * scale) {
            continue;
        }
        let (l, r) = numdiff::room(x, sup.lower(), sup.upper(), &obstacles);
        let h = 1e-4 * scale;
        let fp = numdiff::derivative(&|y| f.eval(y) * p.pdf(y), x, h, l, r);
        if !fp.is_finite() {
            differentiable = false;
        }
        if let Some(d) = f.deriv(x) {
            let fd = numdiff::derivative(&|y| f.eval(y), x, h, l, r);
            let gap = (d - fd).abs() / (1.0 + d.abs());
            let m = mismatch.get_or_insert(0.0);
            *m = m.max(gap);
        }
    }
    if mismatch.is_some_and(|m| !(m <= 1e-5)) {
        differentiable = false;
    }

    let claim_mismatch = f.boundary_claims.and_then(|(ca, cb)| {
        let bad_a = (ca - lower_limit).abs() > threshold;
        let bad_b = (cb - upper_limit).abs() > threshold;
        (bad_a || bad_b).then(|| {
            format!("claimed ({ca}, {cb}), probed ({lower_limit:.3e}, {upper_limit:.3e})")
        })
    });

    MembershipReport {
        member: lower_limit <= threshold && upper_limit <= threshold,
        threshold,
        lower_limit,
        upper_limit,
        lower_probes,
        upper_probes,
        max_derivative_mismatch: mismatch,
        differentiable,
        claim_mismatch,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn membership_examples() {
        let g = DensityModel::standard_gaussian();
        assert!(check_membership_f(&g, &TestFunction::constant(1.0)).member);
        let e = DensityModel::exponential(1.0).unwrap();
        let r = check_membership_f(&e, &TestFunction::constant(1.0));
        assert!(!r.member);
        assert!((r.lower_limit - 1.0).abs() < 1e-6);
        assert!(check_membership_f(&e, &TestFunction::identity()).member);
    }

    #[test]
    fn growth_beyond_the_density_fails() {
        let g = DensityModel::standard_gaussian();
        let f = TestFunction::new("exp(x^2)", |x| (x * x).exp()).with_deriv(|x| 2.0 * x * (x * x).exp());
        assert!(!check_membership_f(&g, &f).member);
    }

    #[test]
    fn wrong_derivative_is_reported() {
        let g = DensityModel::standard_gaussian();
        let f = TestFunction::new("sin", f64::sin).with_deriv(f64::sin);
        let r = check_membership_f(&g, &f);
        assert!(!r.differentiable);
        assert!(r.max_derivative_mismatch.unwrap() > 0.1);
    }

    #[test]
    fn false_boundary_claim_is_reported() {
        let e = DensityModel::exponential(1.0).unwrap();
        let f = TestFunction::constant(1.0).with_boundary_claims(0.0, 0.0);
        assert!(check_membership_f(&e, &f).claim_mismatch.is_some());
    }
}
