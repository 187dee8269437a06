//! Classical distances between univariate laws, KL divergence, Fisher
//! information and the generalized Fisher distance `J(p, q) = E_q[r(p, q)²]`.

use serde::{Deserialize, Serialize};

use crate::densities::DensityModel;
use crate::error::{Error, Result};
use crate::quadrature::{expectation_with, integrate_with, supremum_with, IntegrationOptions, Interval, SearchOptions, Tolerances};

const METRIC_TOL: Tolerances = Tolerances {
    abs_tol: 1e-13,
    rel_tol: 1e-11,
    max_panels: 4096,
};
const SCAN_POINTS: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Tv,
    Kol,
    Wass,
    L1,
    Sup,
    Kl,
    FisherJ,
}

impl Metric {
    pub fn id(self) -> &'static str {
        match self {
            Metric::Tv => "tv",
            Metric::Kol => "kol",
            Metric::Wass => "wass",
            Metric::L1 => "l1",
            Metric::Sup => "sup",
            Metric::Kl => "kl",
            Metric::FisherJ => "fisher_J",
        }
    }

    pub fn from_id(id: &str) -> Option<Self> {
        Some(match id {
            "tv" => Metric::Tv,
            "kol" | "kolmogorov" => Metric::Kol,
            "wass" | "wasserstein" => Metric::Wass,
            "l1" => Metric::L1,
            "sup" => Metric::Sup,
            "kl" => Metric::Kl,
            "fisher_J" | "fisher_j" => Metric::FisherJ,
            _ => return None,
        })
    }
}

/// Points that should sit on any scan of the pair: quantiles of both laws,
/// finite support ends and kinks.
fn scan_grid(p: &DensityModel, q: &DensityModel) -> Vec<f64> {
    let hull = p.support().hull(q.support());
    let mut xs: Vec<f64> = p
        .quantile_grid(SCAN_POINTS)
        .into_iter()
        .chain(q.quantile_grid(SCAN_POINTS))
        .chain([p.window().0, p.window().1, q.window().0, q.window().1])
        .chain([p.support().lower(), p.support().upper(), q.support().lower(), q.support().upper()])
        .chain(p.kink_points().iter().copied())
        .chain(q.kink_points().iter().copied())
        .filter(|x| x.is_finite() && hull.contains(*x))
        .collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs
}

fn bisect_root<G: Fn(f64) -> f64>(g: &G, mut lo: f64, mut hi: f64) -> f64 {
    let glo = g(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let gm = g(mid);
        if gm == 0.0 {
            return mid;
        }
        if (gm > 0.0) == (glo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Sign changes of `g` on `grid`, located by bisection.
fn roots_on<G: Fn(f64) -> f64>(g: &G, grid: &[f64]) -> Vec<f64> {
    let vals: Vec<f64> = grid.iter().map(|&x| g(x)).collect();
    let mut out = Vec::new();
    for i in 0..grid.len() {
        if vals[i] == 0.0 {
            out.push(grid[i]);
            continue;
        }
        if i + 1 < grid.len() && vals[i + 1] != 0.0 && (vals[i] > 0.0) != (vals[i + 1] > 0.0) {
            out.push(bisect_root(g, grid[i], grid[i + 1]));
        }
    }
    out
}

/// Points where `p − q` changes sign (including jumps across support ends).
pub fn density_crossings(p: &DensityModel, q: &DensityModel) -> Vec<f64> {
    roots_on(&|x| p.pdf(x) - q.pdf(x), &scan_grid(p, q))
}

/// `P − Q`, computed from the upper tails right of the median of `p`.
fn cdf_gap(p: &DensityModel, q: &DensityModel, x: f64) -> f64 {
    if x <= p.median() {
        p.cdf(x) - q.cdf(x)
    } else {
        q.sf(x) - p.sf(x)
    }
}

fn pair_options(p: &DensityModel, q: &DensityModel, extra: &[f64]) -> IntegrationOptions {
    let inner_ends = [p.support().lower(), p.support().upper(), q.support().lower(), q.support().upper()];
    let hull = p.support().hull(q.support());
    let (psl, psu) = p.endpoint_singular();
    let (qsl, qsu) = q.endpoint_singular();
    let lower_singular = (psl && p.support().lower() == hull.lower()) || (qsl && q.support().lower() == hull.lower());
    let upper_singular = (psu && p.support().upper() == hull.upper()) || (qsu && q.support().upper() == hull.upper());
    IntegrationOptions::default()
        .with_breakpoints(p.landmarks())
        .with_breakpoints(q.landmarks())
        .with_breakpoints(inner_ends)
        .with_breakpoints(p.kink_points().iter().copied())
        .with_breakpoints(q.kink_points().iter().copied())
        .with_breakpoints(extra.iter().copied())
        .with_center(p.median())
        .with_tail_scale(p.scale().max(q.scale()))
        .with_singular_ends(lower_singular, upper_singular)
}

fn converged_value(r: crate::quadrature::QuadratureResult, metric: Metric) -> Result<f64> {
    if r.converged && r.value.is_finite() {
        Ok(r.value)
    } else {
        Err(Error::NonFiniteDistance {
            metric: metric.id().into(),
        })
    }
}

/// `∫|p − q|`, cut at the density crossings.
pub fn l1_distance(p: &DensityModel, q: &DensityModel) -> Result<f64> {
    let crossings = density_crossings(p, q);
    let hull = p.support().hull(q.support());
    let r = integrate_with(|x| (p.pdf(x) - q.pdf(x)).abs(), &hull, &pair_options(p, q, &crossings), &METRIC_TOL)?;
    converged_value(r, Metric::L1)
}

/// `sup_A |∫_A (p − q)| = ½∫|p − q|`.
pub fn tv_distance(p: &DensityModel, q: &DensityModel) -> Result<f64> {
    Ok(0.5 * l1_distance(p, q)?)
}

/// `sup_z |P(z) − Q(z)|` over the stationary points of `P − Q` (density
/// crossings), the finite support ends and the density windows.
pub fn kolmogorov_distance(p: &DensityModel, q: &DensityModel) -> Result<f64> {
    let mut candidates = density_crossings(p, q);
    candidates.extend([p.support().lower(), p.support().upper(), q.support().lower(), q.support().upper()]);
    candidates.extend([p.window().0, p.window().1, q.window().0, q.window().1]);
    Ok(candidates
        .into_iter()
        .filter(|x| x.is_finite())
        .map(|x| cdf_gap(p, q, x).abs())
        .fold(0.0, f64::max))
}

/// `∫|P − Q|`, equal to the Wasserstein-1 distance on the line.
pub fn wasserstein_distance(p: &DensityModel, q: &DensityModel) -> Result<f64> {
    if !p.mean().is_finite() || !q.mean().is_finite() {
        return Err(Error::NonFiniteDistance {
            metric: Metric::Wass.id().into(),
        });
    }
    let grid = scan_grid(p, q);
    let mut cuts = roots_on(&|x| cdf_gap(p, q, x), &grid);
    cuts.extend(density_crossings(p, q));
    let hull = p.support().hull(q.support());
    let opts = pair_options(p, q, &cuts).with_singular_ends(false, false);
    let r = integrate_with(|x| cdf_gap(p, q, x).abs(), &hull, &opts, &METRIC_TOL)?;
    converged_value(r, Metric::Wass)
}

/// `sup_x |p(x) − q(x)|`; infinite when either density is unbounded.
pub fn sup_distance(p: &DensityModel, q: &DensityModel) -> Result<f64> {
    if !p.log_peak().is_finite() || !q.log_peak().is_finite() {
        return Ok(f64::INFINITY);
    }
    let hull = p.support().hull(q.support());
    let mut extra = density_crossings(p, q);
    extra.extend(p.landmarks());
    extra.extend(q.landmarks());
    let opts = SearchOptions {
        center: p.median(),
        scale: p.scale().min(q.scale()),
        extra_points: extra,
        refine: 5,
    };
    let gap = |x: f64| (p.pdf(x) - q.pdf(x)).abs();
    let mut best = supremum_with(gap, &hull, 801, &opts)?.sup;
    // one-sided values at support ends, where either density may jump
    for e in [p.support().lower(), p.support().upper(), q.support().lower(), q.support().upper()] {
        if e.is_finite() {
            for x in [e, e.next_down(), e.next_up()] {
                let v = gap(x);
                if v.is_finite() {
                    best = best.max(v);
                }
            }
        }
    }
    Ok(best)
}

/// One of `tv`, `kol`, `wass`, `l1`, `sup`.
pub fn classical_distance(metric: Metric, p: &DensityModel, q: &DensityModel) -> Result<f64> {
    match metric {
        Metric::Tv => tv_distance(p, q),
        Metric::Kol => kolmogorov_distance(p, q),
        Metric::Wass => wasserstein_distance(p, q),
        Metric::L1 => l1_distance(p, q),
        Metric::Sup => sup_distance(p, q),
        Metric::Kl => kl_divergence(p, q),
        Metric::FisherJ => generalized_fisher_distance(p, q),
    }
}

/// `E_q[ln(q/p)]`; `+∞` unless `S_q ⊆ S_p`.
pub fn kl_divergence(p: &DensityModel, q: &DensityModel) -> Result<f64> {
    if !q.support().is_subset_of(p.support()) {
        return Ok(f64::INFINITY);
    }
    let bps: Vec<f64> = p.kink_points().iter().copied().chain(p.landmarks()).collect();
    let r = expectation_with(q, |x| q.log_pdf(x) - p.log_pdf(x), &bps, &METRIC_TOL)?;
    if r.converged && r.value.is_finite() {
        Ok(r.value.max(0.0))
    } else {
        Ok(f64::INFINITY)
    }
}

/// `E_q[g]` for `g ≥ 0`, retried with a four-times larger panel budget
/// before giving up. Overflow of `g` near a support end counts as divergence.
pub(crate) fn expectation_or_divergent(q: &DensityModel, g: impl Fn(f64) -> f64, bps: &[f64]) -> Result<Option<f64>> {
    let attempt = |tol: &Tolerances| match expectation_with(q, &g, bps, tol) {
        Ok(r) => Ok(r.converged.then_some(r.value)),
        Err(Error::NonFiniteEvaluation { .. }) => Ok(None),
        Err(e) => Err(e),
    };
    if let Some(v) = attempt(&METRIC_TOL)? {
        return Ok(Some(v));
    }
    attempt(&Tolerances {
        max_panels: 4 * METRIC_TOL.max_panels,
        ..METRIC_TOL
    })
}

/// `I(q) = E_q[score_q²]`. A divergent integral is reported as
/// `NonConvergence`.
pub fn fisher_information(q: &DensityModel) -> Result<f64> {
    let bps = q.kink_points().to_vec();
    match expectation_or_divergent(q, |x| q.score(x).powi(2), &bps)? {
        Some(v) => Ok(v),
        None => Err(Error::NonConvergence {
            value: f64::INFINITY,
            abs_error_estimate: f64::INFINITY,
            panels_used: 4 * METRIC_TOL.max_panels,
        }),
    }
}

/// `J(p, q) = E_q[r(p, q)²]`; `+∞` when the integral diverges.
pub fn generalized_fisher_distance(p: &DensityModel, q: &DensityModel) -> Result<f64> {
    crate::stein::require_nested(p, q)?;
    let mut bps = p.kink_points().to_vec();
    bps.extend(q.kink_points().iter().copied());
    bps.extend(p.landmarks());
    let r2 = |x: f64| {
        let d = p.score(x) - q.score(x);
        d * d
    };
    Ok(expectation_or_divergent(q, r2, &bps)?.map_or(f64::INFINITY, |v| v.max(0.0)))
}

/// `J` for two Gaussians: `σ₁²(1/σ₁² − 1/σ₀²)² + (μ₁ − μ₀)²/σ₀⁴`.
pub fn gaussian_j_closed_form(mu0: f64, var0: f64, mu1: f64, var1: f64) -> f64 {
    var1 * (1.0 / var1 - 1.0 / var0).powi(2) + (mu1 - mu0).powi(2) / (var0 * var0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FisherFunctionals {
    #[serde(rename = "J")]
    pub j: f64,
    #[serde(rename = "I")]
    pub i: f64,
    #[serde(rename = "Psi")]
    pub psi: f64,
    #[serde(rename = "Gamma")]
    pub gamma: f64,
}

/// `J`, `I`, `Ψ` and `Γ` for a Gaussian target `N(μ₀, σ₀²)`. `J` comes from
/// quadrature and `Γ + Ψ` from the moments and Fisher information of `q`;
/// the two must agree to 1e-8.
pub fn gaussian_decomposition(mu0: f64, var0: f64, q: &DensityModel) -> Result<FisherFunctionals> {
    let target = DensityModel::gaussian(mu0, var0)?;
    let (mu, var) = (q.mean(), q.variance());
    if !mu.is_finite() || !var.is_finite() {
        return Err(Error::NonFiniteMoments);
    }
    let i = fisher_information(q)?;
    let j = generalized_fisher_distance(&target, q)?;
    let gamma = i - 1.0 / var0;
    let psi = (mu - mu0).powi(2) / (var0 * var0) + (var / var0 - 1.0) / var0;
    if !((j - (gamma + psi)).abs() <= 1e-8) {
        return Err(Error::DecompositionMismatch {
            j,
            gamma_plus_psi: gamma + psi,
        });
    }
    Ok(FisherFunctionals { j, i, psi, gamma })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScaleMixtureFisher {
    /// `E[1/Y²]`.
    pub surrogate: f64,
    /// Fisher information of the mixture density itself.
    pub mixture_i: f64,
}

/// Fisher information of the law of `Y·Z` for discrete `Y > 0`, next to the
/// conditional surrogate `E[1/Y²]`, which dominates it by convexity.
pub fn scale_mixture_fisher(scales: &[f64], weights: &[f64]) -> Result<ScaleMixtureFisher> {
    let q = DensityModel::gaussian_scale_mixture(scales, weights).map_err(|e| match e {
        Error::InvalidParams { reason, .. } => Error::InvalidMixing(reason),
        other => other,
    })?;
    let surrogate = scales.iter().zip(weights).map(|(y, w)| w / (y * y)).sum();
    Ok(ScaleMixtureFisher {
        surrogate,
        mixture_i: fisher_information(&q)?,
    })
}

/// Hull of both supports, for callers scanning the pair.
pub fn pair_domain(p: &DensityModel, q: &DensityModel) -> Interval {
    p.support().hull(q.support())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densities::SupportKind;

    fn g(mu: f64, var: f64) -> DensityModel {
        DensityModel::gaussian(mu, var).unwrap()
    }

    #[test]
    fn unit_shift_distances() {
        let (p, q) = (g(0.0, 1.0), g(1.0, 1.0));
        let tv = tv_distance(&p, &q).unwrap();
        assert!((tv - 0.382_924_922_548_026_2).abs() < 1e-10);
        assert_eq!(l1_distance(&p, &q).unwrap(), 2.0 * tv);
        assert!((kolmogorov_distance(&p, &q).unwrap() - tv).abs() < 1e-10);
        assert!((wasserstein_distance(&p, &q).unwrap() - 1.0).abs() < 1e-9);
        assert!((sup_distance(&p, &q).unwrap() - 0.222_943_2).abs() < 1e-7);
        assert!((kl_divergence(&p, &q).unwrap() - 0.5).abs() < 1e-10);
        assert!((generalized_fisher_distance(&p, &q).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn identical_laws_are_at_distance_zero() {
        for p in [g(0.3, 2.0), DensityModel::beta(2.0, 3.0).unwrap(), DensityModel::laplace(1.0, 0.0).unwrap()] {
            for m in [Metric::Tv, Metric::Kol, Metric::Wass, Metric::L1, Metric::Sup, Metric::Kl, Metric::FisherJ] {
                let d = classical_distance(m, &p, &p).unwrap();
                assert!(d.abs() <= 1e-9, "{} {}: {d}", p.label(), m.id());
            }
        }
    }

    #[test]
    fn scale_change_tv_uses_both_crossings() {
        let tv = tv_distance(&g(0.0, 1.0), &g(0.0, 4.0)).unwrap();
        assert!((tv - 0.322_674_568_8).abs() < 1e-9);
        let c = density_crossings(&g(0.0, 1.0), &g(0.0, 4.0));
        assert_eq!(c.len(), 2);
        assert!((c[1] - 1.359_556_0).abs() < 1e-6);
    }

    #[test]
    fn kl_is_infinite_off_support() {
        let e = DensityModel::exponential(1.0).unwrap();
        assert_eq!(kl_divergence(&e, &g(0.0, 1.0)).unwrap(), f64::INFINITY);
    }

    #[test]
    fn fisher_information_examples() {
        assert!((fisher_information(&g(2.0, 0.25)).unwrap() - 4.0).abs() < 1e-10);
        let lap = DensityModel::laplace(1.0, 0.0).unwrap();
        assert!((fisher_information(&lap).unwrap() - 1.0).abs() < 1e-10);
        let b = DensityModel::beta(2.0, 3.0).unwrap();
        assert!(matches!(fisher_information(&b), Err(Error::NonConvergence { .. })));
    }

    #[test]
    fn shifted_laplace_j() {
        let p = DensityModel::laplace(1.0, 0.0).unwrap();
        let q = DensityModel::laplace(1.0, 1.0).unwrap();
        let j = generalized_fisher_distance(&p, &q).unwrap();
        assert!((j - 2.0 * (1.0 - (-1.0f64).exp())).abs() < 1e-10);
        assert!((tv_distance(&p, &q).unwrap() - (1.0 - (-0.5f64).exp())).abs() < 1e-10);
    }

    #[test]
    fn j_support_mismatch() {
        let e = DensityModel::exponential(1.0).unwrap();
        assert!(matches!(
            generalized_fisher_distance(&e, &g(0.0, 1.0)),
            Err(Error::SupportMismatch { .. })
        ));
    }

    #[test]
    fn decomposition_examples() {
        let f = gaussian_decomposition(0.0, 1.0, &g(0.0, 4.0)).unwrap();
        assert!((f.i - 0.25).abs() < 1e-10 && (f.gamma + 0.75).abs() < 1e-10);
        assert!((f.psi - 3.0).abs() < 1e-12 && (f.j - 2.25).abs() < 1e-9);
        let f = gaussian_decomposition(0.0, 1.0, &g(1.0, 1.0)).unwrap();
        assert!((f.j - 1.0).abs() < 1e-10 && (f.psi - 1.0).abs() < 1e-12 && f.gamma.abs() < 1e-10);
        let pe = DensityModel::power_exponential(4.0, 1.0, SupportKind::FullLine).unwrap();
        assert!(gaussian_decomposition(0.5, 2.0, &pe).is_ok());
    }

    #[test]
    fn mixture_fisher_examples() {
        let m = scale_mixture_fisher(&[1.0], &[1.0]).unwrap();
        assert!((m.surrogate - 1.0).abs() < 1e-15 && (m.mixture_i - 1.0).abs() < 1e-10);
        let m = scale_mixture_fisher(&[0.9, 1.1], &[0.5, 0.5]).unwrap();
        assert!((m.surrogate - 1.030_507_091_1).abs() < 1e-9);
        assert!((m.mixture_i - 0.992_120_450_9).abs() < 1e-9);
        let m = scale_mixture_fisher(&[2.0], &[1.0]).unwrap();
        assert!((m.surrogate - 0.25).abs() < 1e-15 && (m.mixture_i - 0.25).abs() < 1e-10);
        assert!(matches!(scale_mixture_fisher(&[1.0, -1.0], &[0.5, 0.5]), Err(Error::InvalidMixing(_))));
    }
}
