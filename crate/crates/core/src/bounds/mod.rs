//! Stein-factor constants and the inequalities `d(p, q) ≤ κ·√J(p, q)` they
//! produce, assembled into [`BoundReport`]s.
//!
//! Reports never assert by themselves; they carry a verdict and flags. Items
//! whose proof goes through the power-exponential RMS bound are flagged
//! [`AUDITED_CLAIM`] so callers can keep them out of pass/fail accounting.

mod appendix;
mod constants;
mod reports;

use serde::Serialize;

pub use appendix::{appendix_objective, appendix_sup_constant, appendix_sup_constant_on, AppendixConstant};
pub use constants::{
    eq25_constant, kappa_empirical, kappa_empirical_halfline, kappa_gaussian_lookup, kappa_power_exponential,
    l1_kappa, solution_sup_norm, EmpiricalKappa, GaussianKappa, SQRT_2PI_OVER_4, SQRT_PI_OVER_2,
};
pub use reports::{
    eq17_audit, gaussian_section5_bounds, pinsker_report, scale_mixture_tv_bound, verify_corollary, Eq17Audit,
};

/// Flag for items measured and ledgered rather than asserted.
pub const AUDITED_CLAIM: &str = "AUDITED_CLAIM";
/// Slack below `−SLACK_TOL` is a violation.
pub const SLACK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KappaSource {
    /// Sup-norm Stein factor of the Gaussian tables.
    MagicFactorSup,
    /// `‖h‖∞·2^{−1/α}`.
    #[serde(rename = "power_exp_2^{-1/alpha}")]
    PowerExp,
    /// Largest `q`-RMS of Stein solutions over a finite family.
    Empirical,
    /// The unit constant of the sup-distance bound.
    AppendixUnit,
    /// `∫|φ − q| ≤ √2·√J` for the standard Gaussian.
    GaussianL1,
    /// `TV ≤ √(KL/2)`; the `sqrtJ` column then holds `√KL`.
    Pinsker,
    /// Gaussian-to-Gaussian comparison; `kappa` holds the right-hand side.
    Comparison,
}

impl KappaSource {
    pub fn id(self) -> &'static str {
        match self {
            KappaSource::MagicFactorSup => "magic_factor_sup",
            KappaSource::PowerExp => "power_exp_2^{-1/alpha}",
            KappaSource::Empirical => "empirical",
            KappaSource::AppendixUnit => "appendix_unit",
            KappaSource::GaussianL1 => "gaussian_l1",
            KappaSource::Pinsker => "pinsker",
            KappaSource::Comparison => "comparison",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Violated,
    NotFinite,
    NotApplicable,
    /// The computation itself failed.
    Error,
}

impl Verdict {
    pub fn id(self) -> &'static str {
        match self {
            Verdict::Holds => "holds",
            Verdict::Violated => "violated",
            Verdict::NotFinite => "not_finite",
            Verdict::NotApplicable => "not_applicable",
            Verdict::Error => "error",
        }
    }
}

/// One inequality instance `lhs ≤ kappa·sqrt_j`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub metric_id: String,
    pub lhs: f64,
    pub kappa: f64,
    pub kappa_source: KappaSource,
    #[serde(rename = "sqrtJ")]
    pub sqrt_j: f64,
    pub rhs: f64,
    pub slack: f64,
    pub verdict: Verdict,
    pub flags: Vec<String>,
}

impl BoundReport {
    pub fn new(metric_id: &str, lhs: f64, kappa: f64, kappa_source: KappaSource, sqrt_j: f64) -> Self {
        let rhs = kappa * sqrt_j;
        let slack = rhs - lhs;
        let verdict = if !kappa.is_finite() || !sqrt_j.is_finite() || !lhs.is_finite() {
            Verdict::NotFinite
        } else if slack >= -SLACK_TOL {
            Verdict::Holds
        } else {
            Verdict::Violated
        };
        Self {
            metric_id: metric_id.into(),
            lhs,
            kappa,
            kappa_source,
            sqrt_j,
            rhs,
            slack,
            verdict,
            flags: Vec::new(),
        }
    }

    /// A report for an item that does not apply to the pair.
    pub fn not_applicable(metric_id: &str, kappa_source: KappaSource, reason: &str) -> Self {
        let mut r = Self::new(metric_id, f64::NAN, f64::NAN, kappa_source, f64::NAN);
        r.verdict = Verdict::NotApplicable;
        r.flags.push(reason.into());
        r
    }

    pub fn with_flag(mut self, flag: impl Into<String>) -> Self {
        self.flags.push(flag.into());
        self
    }

    pub fn is_audited(&self) -> bool {
        self.flags.iter().any(|f| f == AUDITED_CLAIM)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_algebra() {
        let r = BoundReport::new("tv", 0.3, 0.5, KappaSource::PowerExp, 1.2);
        assert_eq!(r.rhs, 0.5 * 1.2);
        assert_eq!(r.slack, r.rhs - r.lhs);
        assert_eq!(r.verdict, Verdict::Holds);
        let r = BoundReport::new("tv", 0.7, 0.5, KappaSource::PowerExp, 1.2);
        assert_eq!(r.verdict, Verdict::Violated);
        let r = BoundReport::new("wass", 0.7, f64::INFINITY, KappaSource::PowerExp, 1.2);
        assert_eq!(r.verdict, Verdict::NotFinite);
        let r = BoundReport::new("tv", 0.6 + 5e-10, 0.5, KappaSource::PowerExp, 1.2);
        assert_eq!(r.verdict, Verdict::Holds);
    }
}
