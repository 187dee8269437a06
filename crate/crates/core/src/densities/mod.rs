//! Univariate density models: Gaussian, exponential, Beta, power-exponential
//! `c·exp(−d|x−μ|^α)` on a scale-invariant support, finite Gaussian scale
//! mixtures, and user-supplied densities.
//!
//! Every model carries its support, log-density, score `p′/p`, CDF and
//! survival function, plus a few numerical landmarks (median, scale, and the
//! window where the density exceeds `1e-16 ×` its peak) that the quadrature
//! and search routines use to place breakpoints.
//!
//! Conventions:
//! - off the support, `pdf = 0`, `log_pdf = −∞` and `score = 0`;
//! - at a kink (Laplace-type models) the score takes its right limit;
//! - closed-form CDFs are used where they exist (erfc, expm1, regularized
//!   incomplete beta and gamma); user densities integrate numerically.

mod validate;

use std::fmt;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};
use statrs::function::beta::{beta_reg, ln_beta};
use libm::erfc;
use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};

use crate::error::{Error, Result};
use crate::numdiff;
use crate::quadrature::{integrate_with, IntegrationOptions, Interval, Tolerances};

pub use validate::{validate_class_g, ClassGDiagnostics};

const LN_2PI: f64 = 1.837_877_066_409_345_5;
/// ln(1e16): the window keeps points where p ≥ 1e-16 · peak.
const WINDOW_LOG_DROP: f64 = 36.841_361_487_904_734;
/// Below this density the cdf/pdf ratio switches to its tail asymptote.
const RATIO_PDF_FLOOR: f64 = 1e-280;

/// Scale-invariant supports allowed for power-exponential densities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupportKind {
    FullLine,
    PositiveHalf,
    NegativeHalf,
}

impl SupportKind {
    fn interval(self) -> Interval {
        match self {
            SupportKind::FullLine => Interval::real_line(),
            SupportKind::PositiveHalf => Interval::new(0.0, f64::INFINITY, false, true).unwrap(),
            SupportKind::NegativeHalf => Interval::new(f64::NEG_INFINITY, 0.0, true, false).unwrap(),
        }
    }
}

fn default_support() -> SupportKind {
    SupportKind::FullLine
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussianParams {
    pub mean: f64,
    pub variance: f64,
}

impl GaussianParams {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        if !mean.is_finite() || !(variance > 0.0 && variance.is_finite()) {
            return Err(invalid("gaussian", format!("need finite mean and variance > 0, got ({mean}, {variance})")));
        }
        Ok(Self { mean, variance })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentialParams {
    pub rate: f64,
}

impl ExponentialParams {
    pub fn new(rate: f64) -> Result<Self> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(invalid("exponential", format!("need rate > 0, got {rate}")));
        }
        Ok(Self { rate })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BetaParams {
    pub alpha: f64,
    pub beta: f64,
}

impl BetaParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite()) {
            return Err(invalid("beta", format!("need alpha, beta > 0, got ({alpha}, {beta})")));
        }
        Ok(Self { alpha, beta })
    }
}

/// `p(x) = c·exp(−d|x − location|^α)` on a scale-invariant support.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerExponentialParams {
    pub alpha: f64,
    pub d: f64,
    pub support_kind: SupportKind,
    /// Normalizing constant.
    pub c: f64,
    /// Shift; non-zero only on the full line, and only for comparison laws q.
    pub location: f64,
}

impl PowerExponentialParams {
    pub fn new(alpha: f64, d: f64, support_kind: SupportKind) -> Result<Self> {
        if !(alpha >= 1.0 && alpha.is_finite()) {
            return Err(invalid("power_exponential", format!("need alpha >= 1, got {alpha}")));
        }
        if !(d > 0.0 && d.is_finite()) {
            return Err(invalid("power_exponential", format!("need d > 0, got {d}")));
        }
        let c = Self::closed_form_constant(alpha, d, support_kind);
        let numeric = Self::quadrature_constant(alpha, d, support_kind)?;
        if ((c - numeric) / c).abs() > 1e-10 {
            return Err(invalid(
                "power_exponential",
                format!("normalizing constant cross-check failed: closed form {c}, quadrature {numeric}"),
            ));
        }
        Ok(Self {
            alpha,
            d,
            support_kind,
            c,
            location: 0.0,
        })
    }

    /// Shifts a full-line model.
    pub fn with_location(mut self, location: f64) -> Result<Self> {
        if !location.is_finite() || (location != 0.0 && self.support_kind != SupportKind::FullLine) {
            return Err(invalid("power_exponential", "only full-line models may be shifted".into()));
        }
        self.location = location;
        Ok(self)
    }

    /// `α d^{1/α} / (2Γ(1/α))` on the line, twice that on a half line.
    pub fn closed_form_constant(alpha: f64, d: f64, support_kind: SupportKind) -> f64 {
        let half = (alpha.ln() + d.ln() / alpha - ln_gamma(1.0 / alpha)).exp();
        match support_kind {
            SupportKind::FullLine => 0.5 * half,
            _ => half,
        }
    }

    /// `1 / ∫_S exp(−d|x|^α) dx` by quadrature.
    pub fn quadrature_constant(alpha: f64, d: f64, support_kind: SupportKind) -> Result<f64> {
        let half_line = Interval::new(0.0, f64::INFINITY, false, true)?;
        let opts = IntegrationOptions::default().with_tail_scale(d.powf(-1.0 / alpha));
        let r = integrate_with(|x| (-d * x.powf(alpha)).exp(), &half_line, &opts, &Tolerances::tight())?
            .require_converged()?;
        Ok(match support_kind {
            SupportKind::FullLine => 0.5 / r.value,
            _ => 1.0 / r.value,
        })
    }

    /// Targets of the form used by the bounded-solution and constant audits.
    pub fn is_centered(&self) -> bool {
        self.location == 0.0
    }
}

/// Serializable family description; this is also the harness config schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilySpec {
    Gaussian {
        mean: f64,
        variance: f64,
    },
    Exponential {
        rate: f64,
    },
    Beta {
        alpha: f64,
        beta: f64,
    },
    PowerExponential {
        alpha: f64,
        d: f64,
        #[serde(default = "default_support")]
        support: SupportKind,
        #[serde(default)]
        location: f64,
    },
    GaussianScaleMixture {
        scales: Vec<f64>,
        weights: Vec<f64>,
    },
}

impl FamilySpec {
    pub fn family_id(&self) -> &'static str {
        match self {
            FamilySpec::Gaussian { .. } => "gaussian",
            FamilySpec::Exponential { .. } => "exponential",
            FamilySpec::Beta { .. } => "beta",
            FamilySpec::PowerExponential { .. } => "power_exponential",
            FamilySpec::GaussianScaleMixture { .. } => "gaussian_scale_mixture",
        }
    }
}

/// Family ids with their parameter names, as accepted in config files.
pub const FAMILIES: &[(&str, &str)] = &[
    ("gaussian", "mean, variance > 0"),
    ("exponential", "rate > 0"),
    ("beta", "alpha > 0, beta > 0"),
    (
        "power_exponential",
        "alpha >= 1, d > 0, support = full_line | positive_half | negative_half, location (full_line only)",
    ),
    ("gaussian_scale_mixture", "scales > 0, weights >= 0 summing to 1"),
];

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A density given by closures. Nothing about it is validated on
/// construction; [`validate_class_g`] reports what holds.
#[derive(Clone)]
pub struct CustomDensity {
    pub name: String,
    pub support: Interval,
    pub pdf: RealFn,
    /// `p′/p`; differentiated numerically from `ln p` when absent.
    pub score: Option<RealFn>,
    pub kinks: Vec<f64>,
    /// Location and scale hints used to place quadrature breakpoints.
    pub center: f64,
    pub scale: f64,
}

impl fmt::Debug for CustomDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomDensity")
            .field("name", &self.name)
            .field("support", &self.support)
            .field("kinks", &self.kinks)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
enum Kind {
    Gaussian { mean: f64, sd: f64 },
    Exponential { rate: f64 },
    Beta { a: f64, b: f64, ln_norm: f64 },
    PowerExp { params: PowerExponentialParams, ln_c: f64 },
    Mixture { scales: Vec<f64>, ln_weights: Vec<f64>, weights: Vec<f64> },
    Custom(Arc<CustomDensity>),
}

/// A validated density model; immutable apart from a write-once moment cache.
#[derive(Debug, Clone)]
pub struct DensityModel {
    kind: Kind,
    spec: Option<FamilySpec>,
    support: Interval,
    kinks: Vec<f64>,
    declared_mean: Option<f64>,
    declared_variance: Option<f64>,
    median: f64,
    scale: f64,
    window: (f64, f64),
    log_peak: f64,
    moments: OnceLock<(f64, f64)>,
}

fn invalid(family: &str, reason: String) -> Error {
    Error::InvalidParams {
        family: family.into(),
        reason,
    }
}

/// Builds a model from its serializable description.
pub fn make_density(spec: &FamilySpec) -> Result<DensityModel> {
    let model = match *spec {
        FamilySpec::Gaussian { mean, variance } => DensityModel::gaussian(mean, variance),
        FamilySpec::Exponential { rate } => DensityModel::exponential(rate),
        FamilySpec::Beta { alpha, beta } => DensityModel::beta(alpha, beta),
        FamilySpec::PowerExponential {
            alpha,
            d,
            support,
            location,
        } => PowerExponentialParams::new(alpha, d, support)
            .and_then(|p| p.with_location(location))
            .map(DensityModel::power_exponential_from),
        FamilySpec::GaussianScaleMixture {
            ref scales,
            ref weights,
        } => DensityModel::gaussian_scale_mixture(scales, weights),
    }?;
    Ok(model)
}

impl DensityModel {
    pub fn gaussian(mean: f64, variance: f64) -> Result<Self> {
        let g = GaussianParams::new(mean, variance)?;
        let sd = g.variance.sqrt();
        Ok(Self::finish(
            Kind::Gaussian { mean, sd },
            Some(FamilySpec::Gaussian { mean, variance }),
            Interval::real_line(),
            vec![],
            Some(mean),
            Some(variance),
            -sd.ln() - 0.5 * LN_2PI,
        ))
    }

    pub fn standard_gaussian() -> Self {
        Self::gaussian(0.0, 1.0).expect("valid parameters")
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        let e = ExponentialParams::new(rate)?;
        Ok(Self::finish(
            Kind::Exponential { rate: e.rate },
            Some(FamilySpec::Exponential { rate }),
            Interval::new(0.0, f64::INFINITY, false, true)?,
            vec![],
            Some(1.0 / rate),
            Some(1.0 / (rate * rate)),
            rate.ln(),
        ))
    }

    pub fn beta(alpha: f64, beta: f64) -> Result<Self> {
        let bp = BetaParams::new(alpha, beta)?;
        let (a, b) = (bp.alpha, bp.beta);
        let ln_norm = ln_beta(a, b);
        let s = a + b;
        let support = Interval::new(0.0, 1.0, a != 1.0, b != 1.0)?;
        let kind = Kind::Beta { a, b, ln_norm };
        let log_peak = if a >= 1.0 && b >= 1.0 {
            let mode = if a == 1.0 && b == 1.0 { 0.5 } else { (a - 1.0) / (s - 2.0) };
            beta_log_pdf(a, b, ln_norm, mode.clamp(0.0, 1.0))
        } else {
            f64::INFINITY
        };
        Ok(Self::finish(
            kind,
            Some(FamilySpec::Beta { alpha, beta }),
            support,
            vec![],
            Some(a / s),
            Some(a * b / (s * s * (s + 1.0))),
            log_peak,
        ))
    }

    pub fn power_exponential(alpha: f64, d: f64, support_kind: SupportKind) -> Result<Self> {
        Ok(Self::power_exponential_from(PowerExponentialParams::new(alpha, d, support_kind)?))
    }

    /// Full-line `(d/2)·exp(−d|x − location|)`.
    pub fn laplace(d: f64, location: f64) -> Result<Self> {
        let p = PowerExponentialParams::new(1.0, d, SupportKind::FullLine)?.with_location(location)?;
        Ok(Self::power_exponential_from(p))
    }

    pub fn power_exponential_from(params: PowerExponentialParams) -> Self {
        let PowerExponentialParams {
            alpha,
            d,
            support_kind,
            c,
            location,
        } = params;
        let g = |k: f64| ln_gamma(k / alpha);
        let second = (g(3.0) - g(1.0)).exp() * d.powf(-2.0 / alpha);
        let (mean, variance) = match support_kind {
            SupportKind::FullLine => (location, second),
            SupportKind::PositiveHalf | SupportKind::NegativeHalf => {
                let m = (g(2.0) - g(1.0)).exp() * d.powf(-1.0 / alpha);
                let m = if support_kind == SupportKind::PositiveHalf { m } else { -m };
                (m, second - m * m)
            }
        };
        let kinks = if alpha == 1.0 && support_kind == SupportKind::FullLine {
            vec![location]
        } else {
            vec![]
        };
        let ln_c = c.ln();
        Self::finish(
            Kind::PowerExp { params, ln_c },
            Some(FamilySpec::PowerExponential {
                alpha,
                d,
                support: support_kind,
                location,
            }),
            support_kind.interval(),
            kinks,
            Some(mean),
            Some(variance),
            ln_c,
        )
    }

    /// `Σ w_i φ(x / y_i) / y_i`: the law of `Y·Z` for discrete `Y > 0`
    /// independent of a standard Gaussian `Z`.
    pub fn gaussian_scale_mixture(scales: &[f64], weights: &[f64]) -> Result<Self> {
        if scales.is_empty() || scales.len() != weights.len() {
            return Err(invalid("gaussian_scale_mixture", "need matching non-empty scales and weights".into()));
        }
        if scales.iter().any(|y| !(*y > 0.0 && y.is_finite())) || weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(invalid("gaussian_scale_mixture", "need scales > 0 and weights >= 0".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(invalid("gaussian_scale_mixture", format!("weights sum to {total}, not 1")));
        }
        let variance: f64 = scales.iter().zip(weights).map(|(y, w)| w * y * y).sum();
        let kind = Kind::Mixture {
            scales: scales.to_vec(),
            ln_weights: weights.iter().map(|w| w.ln()).collect(),
            weights: weights.to_vec(),
        };
        let log_peak = mixture_log_pdf(scales, &weights.iter().map(|w| w.ln()).collect::<Vec<_>>(), 0.0);
        Ok(Self::finish(
            kind,
            Some(FamilySpec::GaussianScaleMixture {
                scales: scales.to_vec(),
                weights: weights.to_vec(),
            }),
            Interval::real_line(),
            vec![],
            Some(0.0),
            Some(variance),
            log_peak,
        ))
    }

    pub fn custom(density: CustomDensity) -> Self {
        let support = density.support;
        let kinks = density.kinks.clone();
        let center = density.center;
        let scale = density.scale;
        let d = Arc::new(density);
        let log_peak = (-200..=200)
            .map(|k| center + scale * k as f64 / 20.0)
            .filter(|x| support.contains_interior(*x))
            .map(|x| (d.pdf)(x).ln())
            .fold(f64::NEG_INFINITY, f64::max);
        let mut model = Self::finish_with_anchor(Kind::Custom(d), None, support, kinks, None, None, log_peak, center, scale);
        model.median = center;
        model
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        kind: Kind,
        spec: Option<FamilySpec>,
        support: Interval,
        kinks: Vec<f64>,
        mean: Option<f64>,
        variance: Option<f64>,
        log_peak: f64,
    ) -> Self {
        let anchor = mean.unwrap_or(0.0);
        let scale = variance.map(f64::sqrt).unwrap_or(1.0);
        Self::finish_with_anchor(kind, spec, support, kinks, mean, variance, log_peak, anchor, scale)
    }

    #[allow(clippy::too_many_arguments)]
    fn finish_with_anchor(
        kind: Kind,
        spec: Option<FamilySpec>,
        support: Interval,
        kinks: Vec<f64>,
        mean: Option<f64>,
        variance: Option<f64>,
        log_peak: f64,
        anchor: f64,
        scale: f64,
    ) -> Self {
        let mut model = Self {
            kind,
            spec,
            support,
            kinks,
            declared_mean: mean,
            declared_variance: variance,
            median: anchor,
            scale,
            window: (support.lower(), support.upper()),
            log_peak,
            moments: OnceLock::new(),
        };
        if !matches!(model.kind, Kind::Custom(_)) {
            model.median = model.closed_median().unwrap_or_else(|| model.quantile(0.5));
        }
        model.window = model.compute_window();
        model
    }

    fn closed_median(&self) -> Option<f64> {
        match &self.kind {
            Kind::Gaussian { mean, .. } => Some(*mean),
            Kind::Exponential { rate } => Some(std::f64::consts::LN_2 / rate),
            Kind::PowerExp { params, .. } if params.support_kind == SupportKind::FullLine => Some(params.location),
            Kind::Mixture { .. } => Some(0.0),
            _ => None,
        }
    }

    fn compute_window(&self) -> (f64, f64) {
        let (a, b) = (self.support.lower(), self.support.upper());
        if !self.log_peak.is_finite() {
            return (a, b);
        }
        let threshold = self.log_peak - WINDOW_LOG_DROP;
        let edge = |dir: f64, end: f64| -> f64 {
            if end.is_finite() {
                return end;
            }
            let mut inner = self.median;
            let mut step = self.scale;
            let mut outer = inner + dir * step;
            let mut guard = 0;
            while self.log_pdf(outer) >= threshold && guard < 2000 {
                inner = outer;
                step *= 2.0;
                outer = inner + dir * step;
                guard += 1;
            }
            for _ in 0..200 {
                let mid = 0.5 * (inner + outer);
                if mid == inner || mid == outer {
                    break;
                }
                if self.log_pdf(mid) >= threshold {
                    inner = mid;
                } else {
                    outer = mid;
                }
            }
            inner
        };
        (edge(-1.0, a), edge(1.0, b))
    }

    pub fn support(&self) -> &Interval {
        &self.support
    }

    /// The family description, `None` for user densities.
    pub fn spec(&self) -> Option<&FamilySpec> {
        self.spec.as_ref()
    }

    pub fn family_id(&self) -> &str {
        match &self.kind {
            Kind::Custom(c) => &c.name,
            _ => self.spec.as_ref().map(FamilySpec::family_id).unwrap_or("custom"),
        }
    }

    /// Interior points where the density is not differentiable.
    pub fn kink_points(&self) -> &[f64] {
        &self.kinks
    }

    /// True for models admitted with finitely many kinks.
    pub fn is_piecewise(&self) -> bool {
        !self.kinks.is_empty()
    }

    pub fn declared_mean(&self) -> Option<f64> {
        self.declared_mean
    }

    pub fn declared_variance(&self) -> Option<f64> {
        self.declared_variance
    }

    pub fn median(&self) -> f64 {
        self.median
    }

    /// A characteristic length: the standard deviation when known.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Region where `p ≥ 1e-16 · sup p`; finite support ends are kept as is.
    pub fn window(&self) -> (f64, f64) {
        self.window
    }

    pub fn log_peak(&self) -> f64 {
        self.log_peak
    }

    pub fn power_exponential_params(&self) -> Option<&PowerExponentialParams> {
        match &self.kind {
            Kind::PowerExp { params, .. } => Some(params),
            _ => None,
        }
    }

    /// The model as a centered power-exponential law: itself when it is one,
    /// `α = 2, d = 1/(2σ²)` for a centered Gaussian, otherwise `None`.
    pub fn centered_power_exponential(&self) -> Option<DensityModel> {
        match &self.kind {
            Kind::PowerExp { params, .. } if params.is_centered() => Some(self.clone()),
            Kind::Gaussian { mean, sd } if *mean == 0.0 => {
                DensityModel::power_exponential(2.0, 0.5 / (sd * sd), SupportKind::FullLine).ok()
            }
            _ => None,
        }
    }

    /// `(mean, variance)` when the model is Gaussian.
    pub fn gaussian_params(&self) -> Option<(f64, f64)> {
        match self.kind {
            Kind::Gaussian { mean, sd } => Some((mean, sd * sd)),
            _ => None,
        }
    }

    /// Integrable singularities of the density at finite ends.
    pub fn endpoint_singular(&self) -> (bool, bool) {
        match self.kind {
            Kind::Beta { a, b, .. } => (a < 1.0, b < 1.0),
            _ => (false, false),
        }
    }

    /// Breakpoints spreading quadrature panels over the bulk of the mass.
    pub fn landmarks(&self) -> Vec<f64> {
        let mut pts: Vec<f64> = [-8.0, -4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0, 8.0]
            .iter()
            .map(|k| self.median + k * self.scale)
            .chain(self.kinks.iter().copied())
            .filter(|x| self.support.contains_interior(*x))
            .collect();
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    pub fn integration_options(&self) -> IntegrationOptions {
        let (sl, su) = self.endpoint_singular();
        IntegrationOptions::default()
            .with_breakpoints(self.landmarks())
            .with_center(self.median)
            .with_tail_scale(self.scale)
            .with_singular_ends(sl, su)
    }

    pub fn log_pdf(&self, x: f64) -> f64 {
        if !self.support.contains(x) {
            return f64::NEG_INFINITY;
        }
        match &self.kind {
            Kind::Gaussian { mean, sd } => {
                let z = (x - mean) / sd;
                -0.5 * z * z - sd.ln() - 0.5 * LN_2PI
            }
            Kind::Exponential { rate } => rate.ln() - rate * x,
            Kind::Beta { a, b, ln_norm } => beta_log_pdf(*a, *b, *ln_norm, x),
            Kind::PowerExp { params, ln_c } => ln_c - params.d * (x - params.location).abs().powf(params.alpha),
            Kind::Mixture { scales, ln_weights, .. } => mixture_log_pdf(scales, ln_weights, x),
            Kind::Custom(c) => (c.pdf)(x).ln(),
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match &self.kind {
            Kind::Custom(c) => {
                if self.support.contains(x) {
                    (c.pdf)(x)
                } else {
                    0.0
                }
            }
            _ => self.log_pdf(x).exp(),
        }
    }

    /// `p′(x)/p(x)` on the support, 0 elsewhere.
    pub fn score(&self, x: f64) -> f64 {
        if !self.support.contains(x) {
            return 0.0;
        }
        match &self.kind {
            Kind::Gaussian { mean, sd } => -(x - mean) / (sd * sd),
            Kind::Exponential { rate } => -rate,
            Kind::Beta { a, b, .. } => (a - 1.0) / x - (b - 1.0) / (1.0 - x),
            Kind::PowerExp { params, .. } => {
                let t = x - params.location;
                let mag = params.d * params.alpha * t.abs().powf(params.alpha - 1.0);
                let right_branch = t > 0.0 || (t == 0.0 && params.support_kind != SupportKind::NegativeHalf);
                if right_branch {
                    -mag
                } else {
                    mag
                }
            }
            Kind::Mixture { scales, ln_weights, .. } => {
                let lps: Vec<f64> = scales
                    .iter()
                    .zip(ln_weights)
                    .map(|(y, lw)| lw - y.ln() - 0.5 * (x / y) * (x / y))
                    .collect();
                let m = lps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let (mut num, mut den) = (0.0, 0.0);
                for (lp, y) in lps.iter().zip(scales) {
                    let w = (lp - m).exp();
                    num += w / (y * y);
                    den += w;
                }
                -x * num / den
            }
            Kind::Custom(c) => match &c.score {
                Some(s) => s(x),
                None => {
                    let h = 1e-5 * c.scale;
                    let (l, r) = numdiff::room(x, c.support.lower(), c.support.upper(), &c.kinks);
                    let (l, r) = if c.kinks.contains(&x) { (0.0, r) } else { (l, r) };
                    numdiff::derivative(&|y| (c.pdf)(y).ln(), x, h, l, r)
                }
            },
        }
    }

    /// `P(z) = ∫_a^z p`, clamped to [0, 1] off the support.
    pub fn cdf(&self, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NAN;
        }
        if x <= self.support.lower() {
            return 0.0;
        }
        if x >= self.support.upper() {
            return 1.0;
        }
        match &self.kind {
            Kind::Gaussian { mean, sd } => 0.5 * erfc(-(x - mean) / (sd * std::f64::consts::SQRT_2)),
            Kind::Exponential { rate } => -(-rate * x).exp_m1(),
            Kind::Beta { a, b, .. } => beta_reg(*a, *b, x),
            Kind::PowerExp { params, .. } => power_exp_tails(params, x).0,
            Kind::Mixture { scales, weights, .. } => scales
                .iter()
                .zip(weights)
                .map(|(y, w)| w * 0.5 * erfc(-x / (y * std::f64::consts::SQRT_2)))
                .sum(),
            Kind::Custom(c) => custom_mass(c, self, c.support.lower(), x),
        }
    }

    /// `1 − P(z)`, computed without cancellation in the upper tail.
    pub fn sf(&self, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NAN;
        }
        if x <= self.support.lower() {
            return 1.0;
        }
        if x >= self.support.upper() {
            return 0.0;
        }
        match &self.kind {
            Kind::Gaussian { mean, sd } => 0.5 * erfc((x - mean) / (sd * std::f64::consts::SQRT_2)),
            Kind::Exponential { rate } => (-rate * x).exp(),
            Kind::Beta { a, b, .. } => beta_reg(*b, *a, 1.0 - x),
            Kind::PowerExp { params, .. } => power_exp_tails(params, x).1,
            Kind::Mixture { scales, weights, .. } => scales
                .iter()
                .zip(weights)
                .map(|(y, w)| w * 0.5 * erfc(x / (y * std::f64::consts::SQRT_2)))
                .sum(),
            Kind::Custom(c) => custom_mass(c, self, x, c.support.upper()),
        }
    }

    /// `P(x)/p(x)`; uses the tail asymptote `1/|score|` once `p` underflows.
    pub fn cdf_over_pdf(&self, x: f64) -> f64 {
        if !self.support.contains(x) {
            return 0.0;
        }
        let p = self.pdf(x);
        if p > RATIO_PDF_FLOOR {
            return self.cdf(x) / p;
        }
        let s = self.score(x);
        if s > 0.0 {
            1.0 / s
        } else {
            0.0
        }
    }

    /// `(1 − P(x))/p(x)` with the same tail treatment.
    pub fn sf_over_pdf(&self, x: f64) -> f64 {
        if !self.support.contains(x) {
            return 0.0;
        }
        let p = self.pdf(x);
        if p > RATIO_PDF_FLOOR {
            return self.sf(x) / p;
        }
        let s = self.score(x);
        if s < 0.0 {
            -1.0 / s
        } else {
            0.0
        }
    }

    /// Generalized inverse of the CDF by bisection.
    pub fn quantile(&self, u: f64) -> f64 {
        let (a, b) = (self.support.lower(), self.support.upper());
        if u <= 0.0 {
            return a;
        }
        if u >= 1.0 {
            return b;
        }
        let below = |x: f64| {
            if u <= 0.5 {
                self.cdf(x) < u
            } else {
                self.sf(x) > 1.0 - u
            }
        };
        let mut lo = if a.is_finite() { a } else { self.median - self.scale };
        while !a.is_finite() && !below(lo) {
            lo = self.median - 2.0 * (self.median - lo);
        }
        let mut hi = if b.is_finite() { b } else { self.median + self.scale };
        while !b.is_finite() && below(hi) {
            hi = self.median + 2.0 * (hi - self.median);
        }
        for _ in 0..300 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if below(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// `p`-quantiles at levels `k/(n+1)`, `k = 1..=n`.
    pub fn quantile_grid(&self, n: usize) -> Vec<f64> {
        (1..=n).map(|k| self.quantile(k as f64 / (n + 1) as f64)).collect()
    }

    fn moments(&self) -> (f64, f64) {
        *self.moments.get_or_init(|| {
            let tol = Tolerances::tight();
            let m = crate::quadrature::expectation(self, |x| x, &tol).map(|r| r.value).unwrap_or(f64::NAN);
            let v = crate::quadrature::expectation(self, |x| (x - m) * (x - m), &tol)
                .map(|r| if r.converged { r.value } else { f64::INFINITY })
                .unwrap_or(f64::NAN);
            (m, v)
        })
    }

    /// Mean: closed form when known, otherwise computed once and cached.
    pub fn mean(&self) -> f64 {
        self.declared_mean.unwrap_or_else(|| self.moments().0)
    }

    pub fn variance(&self) -> f64 {
        self.declared_variance.unwrap_or_else(|| self.moments().1)
    }

    /// Short human-readable description used in report flags and logs.
    pub fn label(&self) -> String {
        match &self.spec {
            Some(FamilySpec::Gaussian { mean, variance }) => format!("gaussian({mean},{variance})"),
            Some(FamilySpec::Exponential { rate }) => format!("exponential({rate})"),
            Some(FamilySpec::Beta { alpha, beta }) => format!("beta({alpha},{beta})"),
            Some(FamilySpec::PowerExponential {
                alpha,
                d,
                support,
                location,
            }) => format!("power_exponential({alpha},{d},{support:?},{location})"),
            Some(FamilySpec::GaussianScaleMixture { scales, weights }) => {
                format!("gaussian_scale_mixture({scales:?},{weights:?})")
            }
            None => self.family_id().to_string(),
        }
    }
}

fn beta_log_pdf(a: f64, b: f64, ln_norm: f64, x: f64) -> f64 {
    let left = if a == 1.0 { 0.0 } else { (a - 1.0) * x.ln() };
    let right = if b == 1.0 { 0.0 } else { (b - 1.0) * (-x).ln_1p() };
    left + right - ln_norm
}

fn mixture_log_pdf(scales: &[f64], ln_weights: &[f64], x: f64) -> f64 {
    let lps: Vec<f64> = scales
        .iter()
        .zip(ln_weights)
        .map(|(y, lw)| lw - y.ln() - 0.5 * (x / y) * (x / y) - 0.5 * LN_2PI)
        .collect();
    let m = lps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + lps.iter().map(|lp| (lp - m).exp()).sum::<f64>().ln()
}

/// Upper regularized gamma with Q(s, 0) = 1.
fn upper_gamma(s: f64, u: f64) -> f64 {
    if u <= 0.0 {
        1.0
    } else if u == f64::INFINITY {
        0.0
    } else if s == 0.5 {
        erfc(u.sqrt())
    } else if s == 1.0 {
        (-u).exp()
    } else {
        gamma_ur(s, u)
    }
}

fn lower_gamma(s: f64, u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else if u == f64::INFINITY {
        1.0
    } else if s == 0.5 {
        libm::erf(u.sqrt())
    } else if s == 1.0 {
        -(-u).exp_m1()
    } else {
        gamma_lr(s, u)
    }
}

/// (cdf, sf) of a power-exponential law through incomplete gamma functions.
fn power_exp_tails(p: &PowerExponentialParams, x: f64) -> (f64, f64) {
    let t = x - p.location;
    let s = 1.0 / p.alpha;
    let u = p.d * t.abs().powf(p.alpha);
    match p.support_kind {
        SupportKind::FullLine => {
            let tail = 0.5 * upper_gamma(s, u);
            if t < 0.0 {
                (tail, 1.0 - tail)
            } else {
                (1.0 - tail, tail)
            }
        }
        SupportKind::PositiveHalf => (lower_gamma(s, u), upper_gamma(s, u)),
        SupportKind::NegativeHalf => (upper_gamma(s, u), lower_gamma(s, u)),
    }
}

fn custom_mass(c: &CustomDensity, model: &DensityModel, lo: f64, hi: f64) -> f64 {
    let domain = match Interval::new(lo, hi, true, true) {
        Ok(d) => d,
        Err(_) => return 0.0,
    };
    let opts = IntegrationOptions::default()
        .with_breakpoints(model.landmarks())
        .with_center(c.center)
        .with_tail_scale(c.scale);
    integrate_with(|x| (c.pdf)(x), &domain, &opts, &Tolerances::tight())
        .map(|r| r.value)
        .unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate_with, Tolerances};

    fn mass(p: &DensityModel) -> f64 {
        integrate_with(|x| p.pdf(x), p.support(), &p.integration_options(), &Tolerances::tight())
            .unwrap()
            .value
    }

    #[test]
    fn power_exponential_recovers_standard_gaussian_constant() {
        let p = DensityModel::power_exponential(2.0, 0.5, SupportKind::FullLine).unwrap();
        let c = p.power_exponential_params().unwrap().c;
        // Γ(1/2) = √π gives c = 1/√(2π)
        assert!((c - 0.398_942_280_401_432_7).abs() < 1e-12);
        assert!(p.kink_points().is_empty());
    }

    #[test]
    fn power_exponential_half_line_is_standard_exponential() {
        let p = DensityModel::power_exponential(1.0, 1.0, SupportKind::PositiveHalf).unwrap();
        assert!((p.power_exponential_params().unwrap().c - 1.0).abs() < 1e-12);
        let e = DensityModel::exponential(1.0).unwrap();
        for x in [0.0, 0.3, 2.0, 10.0] {
            assert!((p.pdf(x) - e.pdf(x)).abs() < 1e-14);
            assert!((p.cdf(x) - e.cdf(x)).abs() < 1e-14);
        }
    }

    #[test]
    fn laplace_constant_and_kink() {
        let p = DensityModel::power_exponential(1.0, 1.0, SupportKind::FullLine).unwrap();
        assert!((p.power_exponential_params().unwrap().c - 0.5).abs() < 1e-12);
        assert_eq!(p.kink_points(), &[0.0]);
        assert!(p.is_piecewise());
        // right-limit convention at the kink
        assert_eq!(p.score(0.0), -1.0);
        assert_eq!(p.score(-0.5), 1.0);
    }

    #[test]
    fn score_examples() {
        let g = DensityModel::standard_gaussian();
        assert_eq!(g.score(1.5), -1.5);
        let b = DensityModel::beta(2.0, 3.0).unwrap();
        assert!((b.score(0.5) + 2.0).abs() < 1e-15);
        let e = DensityModel::exponential(1.0).unwrap();
        assert_eq!(e.score(-1.0), 0.0);
    }

    #[test]
    fn cdf_examples() {
        let g = DensityModel::standard_gaussian();
        assert_eq!(g.cdf(0.0), 0.5);
        let e = DensityModel::exponential(1.0).unwrap();
        assert!((e.cdf(std::f64::consts::LN_2) - 0.5).abs() < 1e-15);
        let b = DensityModel::beta(2.0, 3.0).unwrap();
        assert_eq!(b.cdf(1.0), 1.0);
        assert_eq!(b.cdf(-3.0), 0.0);
        assert_eq!(e.cdf(-1.0), 0.0);
    }

    #[test]
    fn gaussian_as_power_exponential_matches_pointwise() {
        for sigma2 in [0.25, 1.0, 3.0] {
            let pe = DensityModel::power_exponential(2.0, 1.0 / (2.0 * sigma2), SupportKind::FullLine).unwrap();
            let g = DensityModel::gaussian(0.0, sigma2).unwrap();
            for i in -40..=40 {
                let x = i as f64 * 0.2;
                assert!((pe.pdf(x) - g.pdf(x)).abs() < 1e-12, "{sigma2} {x}");
                assert!((pe.cdf(x) - g.cdf(x)).abs() < 1e-12, "{sigma2} {x} {} {}", pe.cdf(x), g.cdf(x));
            }
        }
    }

    #[test]
    fn every_builtin_family_is_normalized() {
        let models = [
            DensityModel::standard_gaussian(),
            DensityModel::gaussian(-2.0, 0.3).unwrap(),
            DensityModel::exponential(2.5).unwrap(),
            DensityModel::beta(2.0, 3.0).unwrap(),
            DensityModel::beta(0.5, 0.7).unwrap(),
            DensityModel::power_exponential(1.5, 1.0, SupportKind::FullLine).unwrap(),
            DensityModel::power_exponential(3.0, 0.7, SupportKind::NegativeHalf).unwrap(),
            DensityModel::laplace(2.0, 1.0).unwrap(),
            DensityModel::gaussian_scale_mixture(&[0.9, 1.1], &[0.5, 0.5]).unwrap(),
        ];
        for p in &models {
            assert!((mass(p) - 1.0).abs() <= 1e-9, "{}: {}", p.label(), mass(p));
            assert!((p.sf(p.median()) - 0.5).abs() < 1e-9, "{}", p.label());
        }
    }

    #[test]
    fn closed_form_moments_match_quadrature() {
        let p = DensityModel::power_exponential(3.0, 0.7, SupportKind::PositiveHalf).unwrap();
        let tol = Tolerances::tight();
        let m = crate::quadrature::expectation(&p, |x| x, &tol).unwrap().value;
        let v = crate::quadrature::expectation(&p, |x| (x - m).powi(2), &tol).unwrap().value;
        assert!((m - p.mean()).abs() < 1e-11);
        assert!((v - p.variance()).abs() < 1e-11);
    }

    #[test]
    fn window_edges_sit_at_the_relative_threshold() {
        let g = DensityModel::standard_gaussian();
        let (lo, hi) = g.window();
        let edge = (2.0 * WINDOW_LOG_DROP).sqrt();
        assert!((hi - edge).abs() < 1e-8 && (lo + edge).abs() < 1e-8);
        let e = DensityModel::exponential(1.0).unwrap();
        assert_eq!(e.window().0, 0.0);
        assert!((e.window().1 - WINDOW_LOG_DROP).abs() < 1e-8);
    }

    #[test]
    fn quantile_inverts_cdf() {
        let b = DensityModel::beta(2.0, 3.0).unwrap();
        for u in [0.01, 0.3, 0.5, 0.97] {
            assert!((b.cdf(b.quantile(u)) - u).abs() < 1e-13);
        }
        let pe = DensityModel::power_exponential(1.5, 1.0, SupportKind::FullLine).unwrap();
        assert!((pe.cdf(pe.quantile(0.001)) - 0.001).abs() < 1e-13);
    }

    #[test]
    fn tail_ratios_stay_finite_past_underflow() {
        let g = DensityModel::standard_gaussian();
        let r = g.cdf_over_pdf(-50.0);
        assert!((r - 1.0 / 50.0).abs() < 1e-5);
        let mid = g.cdf_over_pdf(-5.0);
        assert!((mid - g.cdf(-5.0) / g.pdf(-5.0)).abs() < 1e-15);
        assert!(g.sf_over_pdf(60.0) > 0.0);
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(matches!(DensityModel::gaussian(0.0, 0.0), Err(Error::InvalidParams { .. })));
        assert!(DensityModel::exponential(-1.0).is_err());
        assert!(DensityModel::beta(0.0, 1.0).is_err());
        assert!(DensityModel::power_exponential(0.5, 1.0, SupportKind::FullLine).is_err());
        assert!(DensityModel::gaussian_scale_mixture(&[1.0, 2.0], &[0.5, 0.6]).is_err());
        assert!(PowerExponentialParams::new(2.0, 1.0, SupportKind::PositiveHalf)
            .unwrap()
            .with_location(1.0)
            .is_err());
    }

    #[test]
    fn config_schema_round_trip() {
        let json = r#"{"family":"power_exponential","alpha":1.5,"d":1.0}"#;
        let spec: FamilySpec = serde_json::from_str(json).unwrap();
        let p = make_density(&spec).unwrap();
        assert_eq!(p.family_id(), "power_exponential");
        assert_eq!(p.power_exponential_params().unwrap().support_kind, SupportKind::FullLine);
    }
}
