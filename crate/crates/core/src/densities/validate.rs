//! Numerical admission checks for candidate densities.

use serde::Serialize;

use super::DensityModel;
use crate::numdiff;
use crate::quadrature::{integrate_with, Tolerances};

const NORMALIZATION_TOL: f64 = 1e-9;
const SCORE_TOL: f64 = 1e-6;
const PROBES: usize = 200;

#[derive(Debug, Clone, Serialize)]
pub struct ClassGDiagnostics {
    /// `|∫ p − 1|`.
    pub normalization_defect: f64,
    /// `|P(b⁻) − P(a⁺) − 1|` from the model's own CDF.
    pub cdf_span_defect: f64,
    /// Probe points inside the window where `p ≤ 0`.
    pub positivity_violations: usize,
    /// Largest `|score·p − p′|` over non-kink probes, relative to the peak
    /// density when that is finite.
    pub max_score_mismatch: f64,
    pub kinks: Vec<f64>,
    pub piecewise: bool,
    pub probes: usize,
    pub passed: bool,
}

/// Checks normalization, positivity, and consistency of the score with the
/// derivative of the density away from kinks.
pub fn validate_class_g(p: &DensityModel) -> ClassGDiagnostics {
    let mass = integrate_with(|x| p.pdf(x), p.support(), &p.integration_options(), &Tolerances::tight())
        .map(|r| if r.converged { r.value } else { f64::NAN })
        .unwrap_or(f64::NAN);
    let normalization_defect = (mass - 1.0).abs();

    let (wa, wb) = p.window();
    let s = p.scale();
    let lo = if wa.is_finite() { wa } else { p.median() - 1e3 * s };
    let hi = if wb.is_finite() { wb } else { p.median() + 1e3 * s };
    let far_lo = if p.support().lower().is_finite() { p.support().lower() } else { lo - 50.0 * s };
    let far_hi = if p.support().upper().is_finite() { p.support().upper() } else { hi + 50.0 * s };
    let span = if p.support().upper().is_finite() { 1.0 } else { p.cdf(far_hi) }
        - if p.support().lower().is_finite() { 0.0 } else { p.cdf(far_lo) };
    let cdf_span_defect = (span - 1.0).abs();

    let support = *p.support();
    let kinks = p.kink_points().to_vec();
    let peak = p.log_peak().exp();
    let norm = if peak.is_finite() && peak > 0.0 { peak } else { 1.0 };
    let mut positivity_violations = 0;
    let mut max_score_mismatch: f64 = 0.0;
    for i in 0..PROBES {
        let x = lo + (hi - lo) * (i as f64 + 0.5) / PROBES as f64;
        if !support.contains_interior(x) {
            continue;
        }
        let px = p.pdf(x);
        if !(px > 0.0) {
            positivity_violations += 1;
            continue;
        }
        let sc = p.score(x);
        let h = 1e-4 * s / (1.0 + sc.abs() * s);
        let (l, r) = numdiff::room(x, support.lower(), support.upper(), &kinks);
        if l.min(r) < 1e-3 * s.min(1.0) && !(l >= h || r >= 4.5 * h) {
            continue;
        }
        if kinks.iter().any(|k| (k - x).abs() < 1e-3 * s) {
            continue;
        }
        let fd = numdiff::derivative(&|y| p.pdf(y), x, h, l, r);
        let mismatch = (sc * px - fd).abs() / norm;
        if mismatch.is_nan() {
            max_score_mismatch = f64::INFINITY;
        } else {
            max_score_mismatch = max_score_mismatch.max(mismatch);
        }
    }

    let passed = normalization_defect <= NORMALIZATION_TOL
        && positivity_violations == 0
        && max_score_mismatch <= SCORE_TOL;
    ClassGDiagnostics {
        normalization_defect,
        cdf_span_defect,
        positivity_violations,
        max_score_mismatch,
        piecewise: !kinks.is_empty(),
        kinks,
        probes: PROBES,
        passed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densities::{CustomDensity, SupportKind};
    use crate::quadrature::Interval;
    use std::sync::Arc;

    #[test]
    fn builtin_families_pass() {
        for p in [
            DensityModel::standard_gaussian(),
            DensityModel::exponential(1.0).unwrap(),
            DensityModel::beta(2.0, 3.0).unwrap(),
            DensityModel::power_exponential(1.0, 1.0, SupportKind::FullLine).unwrap(),
            DensityModel::power_exponential(3.0, 1.0, SupportKind::PositiveHalf).unwrap(),
            DensityModel::gaussian_scale_mixture(&[0.8, 1.3], &[0.3, 0.7]).unwrap(),
        ] {
            let d = validate_class_g(&p);
            assert!(d.passed, "{}: {d:?}", p.label());
            assert!(d.cdf_span_defect < 1e-9, "{}: {d:?}", p.label());
        }
    }

    #[test]
    fn laplace_is_admitted_as_piecewise() {
        let d = validate_class_g(&DensityModel::laplace(1.0, 0.0).unwrap());
        assert!(d.passed && d.piecewise);
        assert_eq!(d.kinks, vec![0.0]);
    }

    #[test]
    fn mis_normalized_custom_density_is_flagged() {
        let p = DensityModel::custom(CustomDensity {
            name: "half_gaussian_mass".into(),
            support: Interval::real_line(),
            pdf: Arc::new(|x: f64| 0.5 * (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()),
            score: Some(Arc::new(|x: f64| -x)),
            kinks: vec![],
            center: 0.0,
            scale: 1.0,
        });
        let d = validate_class_g(&p);
        assert!(!d.passed);
        assert!((d.normalization_defect - 0.5).abs() < 1e-9);
    }

    #[test]
    fn wrong_score_is_flagged() {
        let p = DensityModel::custom(CustomDensity {
            name: "gaussian_bad_score".into(),
            support: Interval::real_line(),
            pdf: Arc::new(|x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()),
            score: Some(Arc::new(|x: f64| -2.0 * x)),
            kinks: vec![],
            center: 0.0,
            scale: 1.0,
        });
        let d = validate_class_g(&p);
        assert!(!d.passed && d.max_score_mismatch > 1e-3);
    }
}
