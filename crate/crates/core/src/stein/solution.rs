//! Solutions `f` of `T_p f = rhs` that vanish at the support ends in the
//! sense `f·p → 0`.
//!
//! The integral representation `(1/p(x))∫_a^x rhs·p` multiplies a huge
//! `1/p(x)` by a tiny integral in the tails. Both factors are combined in
//! log space as `∫ rhs(u)·exp(ln p(u) − ln p(x)) du`, using the left
//! integral below the split point and the equivalent `−∫_x^b` form above it.
//! Beyond the density window the tail-side form is used on both sides of the
//! split; the asymptote `rhs(x)/score(x)` only covers points where it fails.

use std::sync::Arc;

use super::{apply_operator_fd, TestFunction};
use crate::densities::DensityModel;
use crate::error::{Error, Result};
use crate::quadrature::{expectation_with, integrate_with, IntegrationOptions, Interval, Tolerances};

/// Which right-hand side a solution was built for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RhsKind {
    /// `l − E_p[l]`.
    CenteredFunction,
    /// `𝟙_{(a,z]} − P(z)`.
    HalflineIndicator,
    /// `h` with `E_p[h] = 0`, split at 0.
    ZeroMeanH,
}

#[derive(Debug, Clone)]
enum Repr {
    Quadrature { rhs: TestFunction, mean: f64 },
    Halfline { z: f64, pz: f64 },
}

/// An evaluable solution; immutable and cheap to clone.
#[derive(Debug, Clone)]
pub struct SteinSolution {
    target: Arc<DensityModel>,
    kind: RhsKind,
    split_point: f64,
    repr: Repr,
    breakpoints: Vec<f64>,
    tol: Tolerances,
}

const SOLUTION_TOL: Tolerances = Tolerances {
    abs_tol: 1e-14,
    rel_tol: 1e-12,
    max_panels: 4096,
};

fn centered_mean(p: &DensityModel, l: &TestFunction) -> Result<f64> {
    let r = expectation_with(p, |x| l.eval(x), &l.breakpoints, &Tolerances::tight())
        .map_err(|e| Error::NonIntegrable(e.to_string()))?;
    if !r.converged || !r.value.is_finite() {
        return Err(Error::NonIntegrable(format!(
            "E_p[{}] did not converge (value {}, error {})",
            l.name, r.value, r.abs_error_estimate
        )));
    }
    Ok(r.value)
}

fn breakpoints_for(p: &DensityModel, extra: &[f64]) -> Vec<f64> {
    let mut b: Vec<f64> = p.kink_points().iter().chain(extra).copied().collect();
    b.sort_by(f64::total_cmp);
    b.dedup();
    b
}

/// Solves `T_p f = l − E_p[l]`, switching between the two integral forms at
/// the median of `p`.
pub fn solve_stein_equation(p: &DensityModel, l: &TestFunction) -> Result<SteinSolution> {
    let mean = centered_mean(p, l)?;
    Ok(SteinSolution {
        target: Arc::new(p.clone()),
        kind: RhsKind::CenteredFunction,
        split_point: p.median(),
        breakpoints: breakpoints_for(p, &l.breakpoints),
        repr: Repr::Quadrature { rhs: l.clone(), mean },
        tol: SOLUTION_TOL,
    })
}

/// Closed-form solution for `l_z = 𝟙_{(a,z]} − P(z)`:
/// `P(x)(1 − P(z))/p(x)` for `x ≤ z` and `P(z)(1 − P(x))/p(x)` above.
pub fn solve_halfline_indicator(p: &DensityModel, z: f64) -> Result<SteinSolution> {
    if !p.support().contains_interior(z) {
        return Err(Error::OffSupport {
            x: z,
            support: p.support().to_string(),
        });
    }
    Ok(SteinSolution {
        target: Arc::new(p.clone()),
        kind: RhsKind::HalflineIndicator,
        split_point: z,
        breakpoints: breakpoints_for(p, &[z]),
        repr: Repr::Halfline { z, pz: p.cdf(z) },
        tol: SOLUTION_TOL,
    })
}

/// The bounded solution for a centered `h` and a power-exponential target
/// `c·exp(−d|x|^α)`: left form for `x ≤ 0`, right form above. A numerical
/// mean up to 1e-6 is subtracted; anything larger is rejected.
pub fn bounded_solution_zero_mean(p: &DensityModel, h: &TestFunction) -> Result<SteinSolution> {
    let pe = p.centered_power_exponential().ok_or(Error::NotPowerExponential)?;
    let p = &pe;
    let m = centered_mean(p, h)?;
    let mean = if m.abs() <= 1e-9 {
        0.0
    } else if m.abs() <= 1e-6 {
        m
    } else {
        return Err(Error::NotCentered { mean: m });
    };
    Ok(SteinSolution {
        target: Arc::new(p.clone()),
        kind: RhsKind::ZeroMeanH,
        split_point: 0.0,
        breakpoints: breakpoints_for(p, &h.breakpoints),
        repr: Repr::Quadrature { rhs: h.clone(), mean },
        tol: SOLUTION_TOL,
    })
}

impl SteinSolution {
    pub fn target(&self) -> &DensityModel {
        &self.target
    }

    pub fn kind(&self) -> RhsKind {
        self.kind
    }

    pub fn split_point(&self) -> f64 {
        self.split_point
    }

    /// Points where the solution's derivative may jump.
    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// The constant subtracted from the right-hand side.
    pub fn rhs_mean(&self) -> f64 {
        match &self.repr {
            Repr::Quadrature { mean, .. } => *mean,
            Repr::Halfline { pz, .. } => *pz,
        }
    }

    /// The right-hand side the solution was built for, 0 off `S_p`.
    pub fn rhs(&self, x: f64) -> f64 {
        if !self.target.support().contains(x) {
            return 0.0;
        }
        match &self.repr {
            Repr::Quadrature { rhs, mean } => rhs.eval(x) - mean,
            Repr::Halfline { z, pz } => {
                if x <= *z {
                    1.0 - pz
                } else {
                    -pz
                }
            }
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.try_eval(x).unwrap_or(f64::NAN)
    }

    pub fn try_eval(&self, x: f64) -> Result<f64> {
        let p = &*self.target;
        if !p.support().contains(x) {
            return Ok(0.0);
        }
        match &self.repr {
            Repr::Halfline { z, pz } => Ok(if x <= *z {
                p.cdf_over_pdf(x) * (1.0 - pz)
            } else {
                pz * p.sf_over_pdf(x)
            }),
            Repr::Quadrature { .. } => {
                // Beyond the window only the tail-side form is free of
                // cancellation; the asymptote is a last resort.
                let (wa, wb) = p.window();
                let left = if x < wa {
                    true
                } else if x > wb {
                    false
                } else {
                    return self.integral_form(x, x <= self.split_point);
                };
                match self.integral_form(x, left) {
                    Ok(v) if v.is_finite() && p.log_pdf(x).is_finite() => Ok(v),
                    _ => Ok(self.tail_asymptote(x)),
                }
            }
        }
    }

    fn tail_asymptote(&self, x: f64) -> f64 {
        let s = self.target.score(x);
        if s == 0.0 {
            0.0
        } else {
            self.rhs(x) / s
        }
    }

    /// `(1/p(x))∫_a^x rhs·p` when `left`, else `−(1/p(x))∫_x^b rhs·p`.
    fn integral_form(&self, x: f64, left: bool) -> Result<f64> {
        let p = &*self.target;
        let sup = p.support();
        let domain = if left {
            if x <= sup.lower() {
                return Ok(0.0);
            }
            Interval::new(sup.lower(), x, sup.lower_open(), false)?
        } else {
            if x >= sup.upper() {
                return Ok(0.0);
            }
            Interval::new(x, sup.upper(), false, sup.upper_open())?
        };
        let lpx = p.log_pdf(x);
        let s = p.score(x).abs();
        let tail = if s > 0.0 { p.scale().min(1.0 / s) } else { p.scale() };
        let (sl, su) = p.endpoint_singular();
        let opts = IntegrationOptions::default()
            .with_breakpoints(self.breakpoints.iter().copied())
            .with_tail_scale(tail)
            .with_singular_ends(left && sl, !left && su);
        let r = integrate_with(
            |u| {
                let w = (p.log_pdf(u) - lpx).exp();
                if w == 0.0 {
                    0.0
                } else {
                    self.rhs(u) * w
                }
            },
            &domain,
            &opts,
            &self.tol,
        )?;
        Ok(if left { r.value } else { -r.value })
    }

    /// `|left form − right form|` at the split point; zero up to quadrature
    /// error because the right-hand side is centered.
    pub fn branch_gap(&self) -> Result<f64> {
        let x = self.split_point;
        match &self.repr {
            Repr::Halfline { z, pz } => {
                let p = &*self.target;
                let left = p.cdf_over_pdf(*z) * (1.0 - pz);
                let right = pz * p.sf_over_pdf(*z);
                Ok((left - right).abs())
            }
            Repr::Quadrature { .. } => Ok((self.integral_form(x, true)? - self.integral_form(x, false)?).abs()),
        }
    }

    /// The solution as a test function whose derivative `rhs − score·f`
    /// is exact.
    pub fn as_test_function(&self) -> TestFunction {
        let me = Arc::new(self.clone());
        let me2 = Arc::clone(&me);
        let name = format!("stein_solution({:?})", self.kind);
        TestFunction::new(name, move |x| me.eval(x))
            .with_deriv(move |x| {
                if me2.target.support().contains(x) {
                    me2.rhs(x) - me2.target.score(x) * me2.eval(x)
                } else {
                    0.0
                }
            })
            .with_breakpoints(self.breakpoints.iter().copied())
    }

    /// Largest `|T_p f − rhs|` over `n` interior probes at `p`-quantiles,
    /// with `T_p f` from finite differences of `f·p`. Probes within
    /// `1e-3·scale` of a breakpoint are skipped.
    pub fn operator_residual(&self, n: usize) -> Result<f64> {
        let p = &*self.target;
        let f = self.as_test_function().without_deriv();
        let gap = 1e-3 * p.scale();
        let mut worst: f64 = 0.0;
        for x in p.quantile_grid(n) {
            if !p.support().contains_interior(x) || self.breakpoints.iter().any(|b| (b - x).abs() < gap) {
                continue;
            }
            let lhs = apply_operator_fd(p, &f, x)?.value;
            worst = worst.max((lhs - self.rhs(x)).abs());
        }
        Ok(worst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densities::SupportKind;

    #[test]
    fn gaussian_identity_rhs_gives_minus_one() {
        let g = DensityModel::standard_gaussian();
        let s = solve_stein_equation(&g, &TestFunction::identity()).unwrap();
        for x in [-40.0, -6.0, -1.0, 0.0, 0.5, 3.0, 7.5, 50.0] {
            assert!((s.eval(x) + 1.0).abs() < 1e-9, "{x}: {}", s.eval(x));
        }
    }

    #[test]
    fn exponential_identity_rhs_gives_minus_x() {
        let e = DensityModel::exponential(1.0).unwrap();
        let s = solve_stein_equation(&e, &TestFunction::identity()).unwrap();
        for x in [0.0, 0.1, 1.0, 5.0, 20.0, 35.0] {
            assert!((s.eval(x) + x).abs() < 1e-9 * (1.0 + x), "{x}: {}", s.eval(x));
        }
        assert_eq!(s.eval(-1.0), 0.0);
    }

    #[test]
    fn gaussian_lower_indicator_at_zero() {
        let g = DensityModel::standard_gaussian();
        let want = (2.0 * std::f64::consts::PI).sqrt() / 4.0;
        let s = solve_stein_equation(&g, &TestFunction::indicator_lower(0.0)).unwrap();
        assert!((s.eval(0.0) - want).abs() < 1e-10);
        let h = solve_halfline_indicator(&g, 0.0).unwrap();
        assert!((h.eval(0.0) - want).abs() < 1e-15);
        for x in [-3.0, -0.4, 0.8, 4.0] {
            assert!((s.eval(x) - h.eval(x)).abs() < 1e-9, "{x}");
        }
    }

    #[test]
    fn halfline_solution_boundary_and_branches() {
        let e = DensityModel::exponential(1.0).unwrap();
        let s = solve_halfline_indicator(&e, std::f64::consts::LN_2).unwrap();
        assert!(s.eval(1e-12).abs() < 1e-11);
        assert_eq!(s.eval(0.0), 0.0);
        let b = DensityModel::beta(2.0, 3.0).unwrap();
        let s = solve_halfline_indicator(&b, 0.5).unwrap();
        assert!(s.branch_gap().unwrap() < 1e-10);
        assert!(matches!(solve_halfline_indicator(&b, 1.5), Err(Error::OffSupport { .. })));
    }

    #[test]
    fn bounded_solution_examples() {
        let lap = DensityModel::laplace(1.0, 0.0).unwrap();
        let s = bounded_solution_zero_mean(&lap, &TestFunction::sign()).unwrap();
        for x in [-30.0, -2.0, -0.1, 0.0, 0.1, 1.0, 30.0] {
            assert!((s.eval(x) + 1.0).abs() < 1e-9, "{x}: {}", s.eval(x));
        }
        let g = DensityModel::power_exponential(2.0, 0.5, SupportKind::FullLine).unwrap();
        let s = bounded_solution_zero_mean(&g, &TestFunction::sign()).unwrap();
        assert!((s.eval(0.0) + (2.0 * std::f64::consts::PI).sqrt() / 2.0).abs() < 1e-9);
        let e = DensityModel::power_exponential(1.0, 1.0, SupportKind::PositiveHalf).unwrap();
        let h = TestFunction::new("x-1", |x| x - 1.0).with_deriv(|_| 1.0);
        let s = bounded_solution_zero_mean(&e, &h).unwrap();
        for x in [0.0, 0.5, 3.0, 12.0] {
            assert!((s.eval(x) + x).abs() < 1e-9 * (1.0 + x), "{x}: {}", s.eval(x));
        }
    }

    #[test]
    fn bounded_solution_rejects_bad_inputs() {
        let g = DensityModel::gaussian(1.0, 1.0).unwrap();
        assert!(matches!(
            bounded_solution_zero_mean(&g, &TestFunction::sign()),
            Err(Error::NotPowerExponential)
        ));
        let lap = DensityModel::laplace(1.0, 0.0).unwrap();
        assert!(matches!(
            bounded_solution_zero_mean(&lap, &TestFunction::constant(1.0)),
            Err(Error::NotCentered { .. })
        ));
        let shifted = DensityModel::laplace(1.0, 0.5).unwrap();
        assert!(matches!(
            bounded_solution_zero_mean(&shifted, &TestFunction::sign()),
            Err(Error::NotPowerExponential)
        ));
    }

    #[test]
    fn solutions_reproduce_their_right_hand_side() {
        let cases: Vec<(DensityModel, TestFunction)> = vec![
            (DensityModel::standard_gaussian(), TestFunction::sin()),
            (DensityModel::beta(2.0, 3.0).unwrap(), TestFunction::square()),
            (DensityModel::exponential(1.0).unwrap(), TestFunction::tanh()),
            (DensityModel::laplace(1.0, 0.0).unwrap(), TestFunction::indicator_lower(0.7)),
            (
                DensityModel::power_exponential(3.0, 1.0, SupportKind::FullLine).unwrap(),
                TestFunction::identity(),
            ),
        ];
        for (p, l) in &cases {
            let s = solve_stein_equation(p, l).unwrap();
            let r = s.operator_residual(50).unwrap();
            assert!(r <= 1e-6, "{} {}: {r}", p.label(), l.name);
            assert!(s.branch_gap().unwrap() < 1e-8, "{} {}", p.label(), l.name);
        }
    }
}
