//! Stein factors: the Gaussian tables, the power-exponential formula and
//! empirical RMS constants over finite families.

use serde::Serialize;

use crate::densities::DensityModel;
use crate::error::{Error, Result};
use crate::quadrature::{expectation_with, supremum_with, SearchOptions, Tolerances};
use crate::stein::{require_nested, solve_halfline_indicator, solve_stein_equation, SteinSolution, TestFunction};

/// `√(π/2)`.
pub const SQRT_PI_OVER_2: f64 = 1.253_314_137_315_500_3;
/// `√(2π)/4`.
pub const SQRT_2PI_OVER_4: f64 = 0.626_657_068_657_750_1;

/// Sup-norm Stein factors for the standard Gaussian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GaussianKappa {
    Constant(f64),
    /// `√(π/2)·min(‖l − E l‖∞, 2‖l′‖∞)`.
    MinRule,
}

impl GaussianKappa {
    /// The constant for a function with the given sup norms; the norms are
    /// ignored for tabulated constants.
    pub fn evaluate(self, centered_sup: f64, deriv_sup: f64) -> f64 {
        match self {
            GaussianKappa::Constant(c) => c,
            GaussianKappa::MinRule => SQRT_PI_OVER_2 * centered_sup.min(2.0 * deriv_sup),
        }
    }
}

/// `borel_01`, `halfline_indicators` or `abs_continuous`.
pub fn kappa_gaussian_lookup(class_id: &str) -> Result<GaussianKappa> {
    match class_id {
        "borel_01" => Ok(GaussianKappa::Constant(SQRT_PI_OVER_2)),
        "halfline_indicators" => Ok(GaussianKappa::Constant(SQRT_2PI_OVER_4)),
        "abs_continuous" => Ok(GaussianKappa::MinRule),
        other => Err(Error::UnknownClass(other.into())),
    }
}

/// `‖h‖∞·2^{−1/α}`.
pub fn kappa_power_exponential(alpha: f64, h_sup_norm: f64) -> f64 {
    h_sup_norm * (-1.0 / alpha).exp2()
}

/// The L1 constant `2^{1−1/α}`, from `l = 2·𝟙_{p ≥ q} − 1` with `‖l‖∞ ≤ 2`.
pub fn l1_kappa(alpha: f64) -> f64 {
    kappa_power_exponential(alpha, 2.0)
}

/// The constant in `∫|φ − q| ≤ √2·√J(φ, q)`.
pub fn eq25_constant() -> f64 {
    std::f64::consts::SQRT_2
}

#[derive(Debug, Clone, Serialize)]
pub struct EmpiricalKappa {
    pub kappa: f64,
    /// `(name, √E_q[f_l²])` per family member, in input order.
    pub per_function: Vec<(String, f64)>,
}

fn q_rms(q: &DensityModel, sol: &SteinSolution) -> Result<f64> {
    let r = expectation_with(q, |x| sol.eval(x).powi(2), sol.breakpoints(), &Tolerances::tight())?;
    Ok(r.require_converged()?.value.sqrt())
}

/// `max_l √E_q[(f_l^p)²]` over a finite family.
pub fn kappa_empirical(p: &DensityModel, q: &DensityModel, l_family: &[TestFunction]) -> Result<EmpiricalKappa> {
    require_nested(p, q)?;
    let mut per_function = Vec::with_capacity(l_family.len());
    for l in l_family {
        let sol = solve_stein_equation(p, l)?;
        per_function.push((l.name.clone(), q_rms(q, &sol)?));
    }
    Ok(EmpiricalKappa {
        kappa: per_function.iter().map(|(_, v)| *v).fold(0.0, f64::max),
        per_function,
    })
}

/// As [`kappa_empirical`] for the indicators `𝟙_{(a,z]}`, using the closed-form solutions.
pub fn kappa_empirical_halfline(p: &DensityModel, q: &DensityModel, zs: &[f64]) -> Result<EmpiricalKappa> {
    require_nested(p, q)?;
    let mut per_function = Vec::with_capacity(zs.len());
    for &z in zs {
        let sol = solve_halfline_indicator(p, z)?;
        per_function.push((format!("indicator_le({z})"), q_rms(q, &sol)?));
    }
    Ok(EmpiricalKappa {
        kappa: per_function.iter().map(|(_, v)| *v).fold(0.0, f64::max),
        per_function,
    })
}

/// `sup_x |f(x)|` over the support of the target.
pub fn solution_sup_norm(sol: &SteinSolution) -> Result<f64> {
    let p = sol.target();
    let mut extra = sol.breakpoints().to_vec();
    extra.push(sol.split_point());
    extra.extend(p.landmarks());
    let opts = SearchOptions {
        center: p.median(),
        scale: p.scale(),
        extra_points: extra,
        refine: 5,
    };
    Ok(supremum_with(|x| sol.eval(x).abs(), p.support(), 801, &opts)?.sup)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_table() {
        assert!(matches!(kappa_gaussian_lookup("borel_01").unwrap(), GaussianKappa::Constant(c) if (c - 1.253314).abs() < 1e-6));
        assert!(matches!(kappa_gaussian_lookup("halfline_indicators").unwrap(), GaussianKappa::Constant(c) if (c - 0.626657).abs() < 1e-6));
        let rule = kappa_gaussian_lookup("abs_continuous").unwrap();
        assert_eq!(rule.evaluate(1.0, 10.0), SQRT_PI_OVER_2);
        assert!(matches!(kappa_gaussian_lookup("lipschitz"), Err(Error::UnknownClass(_))));
        assert!((SQRT_PI_OVER_2 - (std::f64::consts::PI / 2.0).sqrt()).abs() < 1e-15);
        assert!((SQRT_2PI_OVER_4 - (2.0 * std::f64::consts::PI).sqrt() / 4.0).abs() < 1e-16);
    }

    #[test]
    fn power_exponential_constants() {
        assert!((kappa_power_exponential(2.0, 1.0) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-16);
        assert_eq!(kappa_power_exponential(1.0, 2.0), 1.0);
        let mut last = 0.0;
        for a in [1.0, 2.0, 10.0, 1e3, 1e9] {
            let k = kappa_power_exponential(a, 3.0);
            assert!(k > last && k < 3.0);
            last = k;
        }
        assert!((last - 3.0).abs() < 1e-8);
    }

    #[test]
    fn l1_constant_paths_agree_exactly() {
        assert_eq!(l1_kappa(2.0).to_bits(), eq25_constant().to_bits());
    }

    #[test]
    fn empirical_kappa_examples() {
        let g = DensityModel::standard_gaussian();
        let k = kappa_empirical(&g, &g, &[TestFunction::indicator_lower(0.0)]).unwrap();
        assert!((k.kappa - 0.416_277_3).abs() < 1e-7, "{k:?}");
        assert!(k.kappa <= SQRT_2PI_OVER_4);
        let narrow = DensityModel::gaussian(0.0, 0.01).unwrap();
        let k = kappa_empirical(&g, &narrow, &[TestFunction::sign()]).unwrap();
        assert!((k.kappa - 1.180_489_705_3).abs() < 1e-8, "{k:?}");
        let k = kappa_empirical(&g, &g, &[TestFunction::constant(3.0)]).unwrap();
        assert!(k.kappa < 1e-12);
    }

    #[test]
    fn halfline_sup_norm_is_the_magic_factor() {
        let g = DensityModel::standard_gaussian();
        let s = solution_sup_norm(&solve_halfline_indicator(&g, 0.0).unwrap()).unwrap();
        assert!((s - SQRT_2PI_OVER_4).abs() < 1e-12);
    }
}
