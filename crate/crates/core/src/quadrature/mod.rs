//! Adaptive integration and supremum search on finite, half-infinite and
//! doubly infinite intervals.
//!
//! Every integral in the toolkit goes through [`integrate_with`]: the domain
//! is cut at the supplied breakpoints, infinite end segments are mapped onto
//! `t ∈ [0, 1)` through `x = c ± L·t/(1−t)`, and a 10/21-point Gauss–Kronrod
//! pair is applied on each panel. The panel with the largest error estimate
//! is bisected until the summed estimate falls below
//! `max(abs_tol, rel_tol·|value|)` or the panel budget is spent.
//!
//! Integrable endpoint singularities (Beta densities with a shape parameter
//! below one) are removed with `x = a + w·sin²θ`.

mod kronrod;
mod search;

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::densities::DensityModel;
use crate::error::{Error, Result};

pub use search::{supremum, supremum_with, SearchOptions, Supremum};

/// A real interval with possibly infinite endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    lower: f64,
    upper: f64,
    lower_open: bool,
    upper_open: bool,
}

impl Interval {
    /// Builds an interval; infinite endpoints are forced open.
    pub fn new(lower: f64, upper: f64, lower_open: bool, upper_open: bool) -> Result<Self> {
        if lower.is_nan() || upper.is_nan() || lower >= upper {
            return Err(Error::InvalidParams {
                family: "interval".into(),
                reason: format!("need lower < upper, got [{lower}, {upper}]"),
            });
        }
        Ok(Self {
            lower,
            upper,
            lower_open: lower_open || lower.is_infinite(),
            upper_open: upper_open || upper.is_infinite(),
        })
    }

    pub fn closed(lower: f64, upper: f64) -> Result<Self> {
        Self::new(lower, upper, false, false)
    }

    pub fn open(lower: f64, upper: f64) -> Result<Self> {
        Self::new(lower, upper, true, true)
    }

    pub fn real_line() -> Self {
        Self {
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
            lower_open: true,
            upper_open: true,
        }
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn lower_open(&self) -> bool {
        self.lower_open
    }

    pub fn upper_open(&self) -> bool {
        self.upper_open
    }

    pub fn is_bounded(&self) -> bool {
        self.lower.is_finite() && self.upper.is_finite()
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, x: f64) -> bool {
        let above = if self.lower_open { x > self.lower } else { x >= self.lower };
        let below = if self.upper_open { x < self.upper } else { x <= self.upper };
        above && below
    }

    pub fn contains_interior(&self, x: f64) -> bool {
        x > self.lower && x < self.upper
    }

    /// Containment of closures; endpoints are a null set for every use here.
    pub fn is_subset_of(&self, other: &Interval) -> bool {
        self.lower >= other.lower && self.upper <= other.upper
    }

    pub fn same_closure(&self, other: &Interval) -> bool {
        self.lower == other.lower && self.upper == other.upper
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let (lower, lower_open) = match self.lower.partial_cmp(&other.lower) {
            Some(Ordering::Greater) => (self.lower, self.lower_open),
            Some(Ordering::Less) => (other.lower, other.lower_open),
            _ => (self.lower, self.lower_open || other.lower_open),
        };
        let (upper, upper_open) = match self.upper.partial_cmp(&other.upper) {
            Some(Ordering::Less) => (self.upper, self.upper_open),
            Some(Ordering::Greater) => (other.upper, other.upper_open),
            _ => (self.upper, self.upper_open || other.upper_open),
        };
        Interval::new(lower, upper, lower_open, upper_open).ok()
    }

    /// Smallest interval containing both.
    pub fn hull(&self, other: &Interval) -> Interval {
        let (lower, lower_open) = if self.lower <= other.lower {
            (self.lower, self.lower_open)
        } else {
            (other.lower, other.lower_open)
        };
        let (upper, upper_open) = if self.upper >= other.upper {
            (self.upper, self.upper_open)
        } else {
            (other.upper, other.upper_open)
        };
        Interval {
            lower,
            upper,
            lower_open,
            upper_open,
        }
    }

    /// Clamps `x` into the closure.
    pub fn clamp(&self, x: f64) -> f64 {
        x.max(self.lower).min(self.upper)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let l = if self.lower_open { '(' } else { '[' };
        let r = if self.upper_open { ')' } else { ']' };
        write!(f, "{l}{}, {}{r}", self.lower, self.upper)
    }
}

/// Accuracy request for adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_panels: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-8,
            max_panels: 4096,
        }
    }
}

impl Tolerances {
    pub fn new(abs_tol: f64, rel_tol: f64, max_panels: usize) -> Result<Self> {
        let tol = Self {
            abs_tol,
            rel_tol,
            max_panels,
        };
        tol.validate()?;
        Ok(tol)
    }

    /// Tolerances used by the identity and inequality audits, where the
    /// residuals being measured are themselves of order 1e-9.
    pub fn tight() -> Self {
        Self {
            abs_tol: 1e-13,
            rel_tol: 1e-12,
            max_panels: 4096,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0 && self.max_panels > 0) {
            return Err(Error::Config(format!(
                "tolerances must be positive, got abs {} rel {} panels {}",
                self.abs_tol, self.rel_tol, self.max_panels
            )));
        }
        Ok(())
    }

    pub fn target(&self, value: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * value.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureResult {
    pub value: f64,
    pub abs_error_estimate: f64,
    pub panels_used: usize,
    pub converged: bool,
}

impl QuadratureResult {
    /// Turns a budget-exhausted result into [`Error::NonConvergence`].
    pub fn require_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NonConvergence {
                value: self.value,
                abs_error_estimate: self.abs_error_estimate,
                panels_used: self.panels_used,
            })
        }
    }
}

/// Hints that shape the initial partition of the domain.
#[derive(Debug, Clone, Default)]
pub struct IntegrationOptions {
    /// Interior points where the integrand jumps, kinks, or concentrates.
    pub breakpoints: Vec<f64>,
    /// Split point for doubly infinite domains when no breakpoint is given.
    pub center: Option<f64>,
    /// Length scale `L` of the tail map; 1 when unset.
    pub tail_scale: Option<f64>,
    pub singular_lower: bool,
    pub singular_upper: bool,
}

impl IntegrationOptions {
    pub fn with_breakpoints<I: IntoIterator<Item = f64>>(mut self, pts: I) -> Self {
        self.breakpoints.extend(pts);
        self
    }

    pub fn with_center(mut self, c: f64) -> Self {
        self.center = Some(c);
        self
    }

    pub fn with_tail_scale(mut self, l: f64) -> Self {
        self.tail_scale = Some(l);
        self
    }

    pub fn with_singular_ends(mut self, lower: bool, upper: bool) -> Self {
        self.singular_lower = lower;
        self.singular_upper = upper;
        self
    }
}

/// Integrates `f` over `domain` with default partitioning.
pub fn integrate<F>(f: F, domain: &Interval, tol: &Tolerances) -> Result<QuadratureResult>
where
    F: Fn(f64) -> f64,
{
    integrate_with(f, domain, &IntegrationOptions::default(), tol)
}

#[derive(Debug, Clone, Copy)]
enum Map {
    Identity,
    /// x = c + L t / (1 - t)
    Upper { c: f64, l: f64 },
    /// x = c - L t / (1 - t)
    Lower { c: f64, l: f64 },
    /// x = a + w sin²θ, θ ∈ [0, π/2]
    SinSqFrom { a: f64, w: f64 },
    /// x = b - w sin²θ
    SinSqTo { b: f64, w: f64 },
}

impl Map {
    #[inline]
    fn apply(&self, t: f64) -> (f64, f64) {
        match *self {
            Map::Identity => (t, 1.0),
            Map::Upper { c, l } => {
                let s = 1.0 - t;
                (c + l * t / s, l / (s * s))
            }
            Map::Lower { c, l } => {
                let s = 1.0 - t;
                (c - l * t / s, l / (s * s))
            }
            Map::SinSqFrom { a, w } => {
                let s = t.sin();
                (a + w * s * s, w * (2.0 * t).sin())
            }
            Map::SinSqTo { b, w } => {
                let s = t.sin();
                (b - w * s * s, w * (2.0 * t).sin())
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    map: usize,
    t0: f64,
    t1: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.t0.total_cmp(&self.t0))
            .then_with(|| other.map.cmp(&self.map))
    }
}

/// Integrates `f` over `domain`, cutting at `opts.breakpoints`.
pub fn integrate_with<F>(
    f: F,
    domain: &Interval,
    opts: &IntegrationOptions,
    tol: &Tolerances,
) -> Result<QuadratureResult>
where
    F: Fn(f64) -> f64,
{
    tol.validate()?;
    let (lo, hi) = (domain.lower(), domain.upper());
    let l = opts.tail_scale.filter(|s| s.is_finite() && *s > 0.0).unwrap_or(1.0);

    let mut cuts: Vec<f64> = opts
        .breakpoints
        .iter()
        .copied()
        .filter(|x| x.is_finite() && *x > lo && *x < hi)
        .collect();
    if lo.is_infinite() && hi.is_infinite() && cuts.is_empty() {
        cuts.push(opts.center.filter(|c| c.is_finite()).unwrap_or(0.0));
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut nodes = Vec::with_capacity(cuts.len() + 2);
    nodes.push(lo);
    nodes.extend(cuts);
    nodes.push(hi);

    let last = nodes.len() - 2;
    let mut maps = Vec::with_capacity(nodes.len());
    let mut segments = Vec::with_capacity(nodes.len());
    for (i, w) in nodes.windows(2).enumerate() {
        let (a, b) = (w[0], w[1]);
        let (map, t0, t1) = if a.is_infinite() {
            (Map::Lower { c: b, l }, 0.0, 1.0)
        } else if b.is_infinite() {
            (Map::Upper { c: a, l }, 0.0, 1.0)
        } else if i == 0 && opts.singular_lower {
            (Map::SinSqFrom { a, w: b - a }, 0.0, std::f64::consts::FRAC_PI_2)
        } else if i == last && opts.singular_upper {
            (Map::SinSqTo { b, w: b - a }, 0.0, std::f64::consts::FRAC_PI_2)
        } else {
            (Map::Identity, a, b)
        };
        maps.push(map);
        segments.push((maps.len() - 1, t0, t1));
    }

    let eval = |m: usize, t: f64| -> std::result::Result<f64, f64> {
        let (x, jac) = maps[m].apply(t);
        if !x.is_finite() || jac == 0.0 {
            return Ok(0.0);
        }
        let y = f(x);
        if !y.is_finite() {
            return Err(x);
        }
        Ok(y * jac)
    };
    let estimate = |m: usize, t0: f64, t1: f64| -> Result<Panel> {
        let g = |t: f64| eval(m, t);
        let est = kronrod::gk21(&g, t0, t1).map_err(|x| Error::NonFiniteEvaluation { x })?;
        Ok(Panel {
            map: m,
            t0,
            t1,
            value: est.value,
            error: est.error,
        })
    };

    let mut heap = BinaryHeap::new();
    let mut frozen: Vec<Panel> = Vec::new();
    let mut total = 0.0;
    let mut total_err = 0.0;
    for &(m, t0, t1) in &segments {
        let p = estimate(m, t0, t1)?;
        total += p.value;
        total_err += p.error;
        heap.push(p);
    }

    let mut converged = false;
    loop {
        if total_err <= tol.target(total) {
            // re-sum to shed drift from the running totals
            let (v, e) = heap
                .iter()
                .chain(frozen.iter())
                .fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error));
            total = v;
            total_err = e;
            if total_err <= tol.target(total) {
                converged = true;
                break;
            }
        }
        if heap.len() + frozen.len() >= tol.max_panels {
            break;
        }
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.t0 + worst.t1);
        if !(mid > worst.t0 && mid < worst.t1) {
            frozen.push(worst);
            continue;
        }
        let left = estimate(worst.map, worst.t0, mid)?;
        let right = estimate(worst.map, mid, worst.t1)?;
        total += left.value + right.value - worst.value;
        total_err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }

    let (value, err) = heap
        .iter()
        .chain(frozen.iter())
        .fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error));
    Ok(QuadratureResult {
        value,
        abs_error_estimate: err,
        panels_used: heap.len() + frozen.len(),
        converged,
    })
}

/// `E_p[g(X)] = ∫_{S_p} g(x) p(x) dx`. `g` is only evaluated inside `S_p`.
pub fn expectation<G>(p: &DensityModel, g: G, tol: &Tolerances) -> Result<QuadratureResult>
where
    G: Fn(f64) -> f64,
{
    expectation_with(p, g, &[], tol)
}

/// As [`expectation`], with extra breakpoints where `g` is irregular.
pub fn expectation_with<G>(
    p: &DensityModel,
    g: G,
    breakpoints: &[f64],
    tol: &Tolerances,
) -> Result<QuadratureResult>
where
    G: Fn(f64) -> f64,
{
    let opts = p.integration_options().with_breakpoints(breakpoints.iter().copied());
    integrate_with(
        |x| {
            let w = p.pdf(x);
            if w == 0.0 {
                0.0
            } else {
                g(x) * w
            }
        },
        p.support(),
        &opts,
        tol,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn polynomial_on_unit_interval() {
        let r = integrate(|x| x * x, &Interval::closed(0.0, 1.0).unwrap(), &tol()).unwrap();
        assert!(r.converged);
        assert!((r.value - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn gaussian_normalization_on_real_line() {
        let r = integrate(
            |x| (-0.5 * x * x).exp() / (2.0 * PI).sqrt(),
            &Interval::real_line(),
            &tol(),
        )
        .unwrap();
        assert!(r.converged);
        assert!((r.value - 1.0).abs() < 1e-12, "{}", r.value);
    }

    #[test]
    fn exponential_tail_transform() {
        let half = Interval::new(0.0, f64::INFINITY, false, true).unwrap();
        let r = integrate(|x| (-x).exp(), &half, &tol()).unwrap();
        assert!(r.converged);
        assert!((r.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lower_half_line() {
        let half = Interval::new(f64::NEG_INFINITY, 1.0, true, false).unwrap();
        let r = integrate(|x| x.exp(), &half, &tol()).unwrap();
        assert!((r.value - 1f64.exp()).abs() < 1e-10);
    }

    #[test]
    fn sqrt_singularity_removed_by_substitution() {
        let unit = Interval::open(0.0, 1.0).unwrap();
        let opts = IntegrationOptions::default().with_singular_ends(true, true);
        let r = integrate_with(
            |x| 1.0 / (x * (1.0 - x)).sqrt(),
            &unit,
            &opts,
            &Tolerances::tight(),
        )
        .unwrap();
        assert!(r.converged);
        assert!((r.value - PI).abs() < 1e-11, "{}", r.value);
    }

    #[test]
    fn jump_handled_with_breakpoint() {
        let r = integrate_with(
            |x| if x <= 0.3 { 1.0 } else { 0.0 },
            &Interval::closed(0.0, 1.0).unwrap(),
            &IntegrationOptions::default().with_breakpoints([0.3]),
            &tol(),
        )
        .unwrap();
        assert!((r.value - 0.3).abs() < 1e-15);
    }

    #[test]
    fn non_finite_integrand_is_reported() {
        let err = integrate(|x| if x > 0.5 { f64::NAN } else { x }, &Interval::closed(0.0, 1.0).unwrap(), &tol())
            .unwrap_err();
        assert!(matches!(err, Error::NonFiniteEvaluation { .. }));
    }

    #[test]
    fn log_divergence_exhausts_budget() {
        let t = Tolerances::new(1e-10, 1e-8, 200).unwrap();
        let r = integrate(|x| 1.0 / x, &Interval::open(0.0, 1.0).unwrap(), &t).unwrap();
        assert!(!r.converged);
        assert!(r.panels_used <= 201);
        assert!(matches!(r.require_converged(), Err(Error::NonConvergence { .. })));
    }

    #[test]
    fn converged_result_respects_requested_tolerance() {
        let t = tol();
        let r = integrate(|x| x.sin().powi(2), &Interval::closed(0.0, 10.0).unwrap(), &t).unwrap();
        assert!(r.converged);
        assert!(r.abs_error_estimate <= t.target(r.value));
    }

    #[test]
    fn interval_set_operations() {
        let a = Interval::closed(0.0, 2.0).unwrap();
        let b = Interval::open(1.0, f64::INFINITY).unwrap();
        let i = a.intersect(&b).unwrap();
        assert_eq!((i.lower(), i.upper()), (1.0, 2.0));
        assert!(i.lower_open() && !i.upper_open());
        let h = a.hull(&b);
        assert_eq!(h.upper(), f64::INFINITY);
        assert!(Interval::open(0.0, 1.0).unwrap().is_subset_of(&a));
        assert!(!b.is_subset_of(&a));
        assert!(Interval::closed(1.0, 1.0).is_err());
        assert_eq!(format!("{}", b), "(1, inf)");
    }
}
