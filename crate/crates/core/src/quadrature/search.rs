//! Grid-plus-golden-section supremum search.

use super::Interval;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Supremum {
    pub argsup: f64,
    pub sup: f64,
}

#[derive(Debug, Clone)]
pub struct SearchOptions {
    /// Centre of the grid on doubly infinite domains.
    pub center: f64,
    /// Length scale of the `tan` grid on unbounded domains.
    pub scale: f64,
    /// Points that must be on the grid (crossings, kinks, known maximisers).
    pub extra_points: Vec<f64>,
    /// Number of best grid points refined by golden section.
    pub refine: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            center: 0.0,
            scale: 1.0,
            extra_points: Vec::new(),
            refine: 3,
        }
    }
}

/// Supremum of `f` over `domain` from a `grid_size`-point scan.
pub fn supremum<F>(f: F, domain: &Interval, grid_size: usize) -> Result<Supremum>
where
    F: Fn(f64) -> f64,
{
    supremum_with(f, domain, grid_size, &SearchOptions::default())
}

pub fn supremum_with<F>(
    f: F,
    domain: &Interval,
    grid_size: usize,
    opts: &SearchOptions,
) -> Result<Supremum>
where
    F: Fn(f64) -> f64,
{
    let n = grid_size.max(3);
    let (a, b) = (domain.lower(), domain.upper());
    let s = if opts.scale.is_finite() && opts.scale > 0.0 { opts.scale } else { 1.0 };
    let half_pi = std::f64::consts::FRAC_PI_2;

    let mut xs: Vec<f64> = (0..n)
        .map(|i| {
            let u = (i as f64 + 0.5) / n as f64;
            match (a.is_finite(), b.is_finite()) {
                (true, true) => a + (b - a) * u,
                (true, false) => a + s * (u * half_pi).tan(),
                (false, true) => b - s * ((1.0 - u) * half_pi).tan(),
                (false, false) => opts.center + s * ((2.0 * u - 1.0) * half_pi).tan(),
            }
        })
        .filter(|x| x.is_finite() && domain.contains_interior(*x))
        .collect();
    xs.extend(
        opts.extra_points
            .iter()
            .copied()
            .filter(|x| x.is_finite() && domain.contains_interior(*x)),
    );
    xs.sort_by(f64::total_cmp);
    xs.dedup();

    let checked = |x: f64| -> Result<f64> {
        let y = f(x);
        if y.is_nan() || y == f64::INFINITY {
            Err(Error::NonFiniteEvaluation { x })
        } else {
            Ok(y)
        }
    };

    let ys = xs.iter().map(|&x| checked(x)).collect::<Result<Vec<_>>>()?;
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&i, &j| ys[j].total_cmp(&ys[i]).then(i.cmp(&j)));

    let mut best = Supremum {
        argsup: xs[order[0]],
        sup: ys[order[0]],
    };
    for &i in order.iter().take(opts.refine.max(1)) {
        let lo = if i == 0 { a.max(xs[0] - s * 1e3) } else { xs[i - 1] };
        let hi = if i + 1 == xs.len() { b.min(xs[i] + s * 1e3) } else { xs[i + 1] };
        let cand = golden_max(&checked, lo, hi, xs[i], ys[i])?;
        if cand.sup > best.sup {
            best = cand;
        }
    }
    Ok(best)
}

fn golden_max<F>(f: &F, mut lo: f64, mut hi: f64, x0: f64, y0: f64) -> Result<Supremum>
where
    F: Fn(f64) -> Result<f64>,
{
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut best = Supremum { argsup: x0, sup: y0 };
    let mut c = hi - INV_PHI * (hi - lo);
    let mut d = lo + INV_PHI * (hi - lo);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    for _ in 0..200 {
        if (hi - lo).abs() <= 1e-13 * (1.0 + lo.abs().max(hi.abs())) {
            break;
        }
        if fc >= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - INV_PHI * (hi - lo);
            fc = f(c)?;
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + INV_PHI * (hi - lo);
            fd = f(d)?;
        }
        for (x, y) in [(c, fc), (d, fd)] {
            if y > best.sup {
                best = Supremum { argsup: x, sup: y };
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use libm::erfc;
    use std::f64::consts::{PI, SQRT_2};

    fn phi_cdf(x: f64) -> f64 {
        0.5 * erfc(-x / SQRT_2)
    }

    #[test]
    fn standard_normal_peak() {
        let s = supremum(|x| (-0.5 * x * x).exp() / (2.0 * PI).sqrt(), &Interval::real_line(), 401).unwrap();
        assert!(s.argsup.abs() < 1e-6);
        assert!((s.sup - 0.398_942_280_401_432_7).abs() < 1e-12);
    }

    #[test]
    fn vertex_of_parabola() {
        let s = supremum(|x| -x * x, &Interval::closed(-1.0, 1.0).unwrap(), 50).unwrap();
        assert!(s.argsup.abs() < 1e-6);
        assert!(s.sup.abs() < 1e-12);
    }

    #[test]
    fn cdf_gap_of_unit_shift() {
        // 2Φ(1/2) − 1, attained at the crossing of the two densities
        let s = supremum(|x| (phi_cdf(x) - phi_cdf(x - 1.0)).abs(), &Interval::real_line(), 801).unwrap();
        assert!((s.argsup - 0.5).abs() < 1e-5);
        assert!((s.sup - 0.382_924_922_548_026_2).abs() < 1e-10);
    }

    #[test]
    fn nan_objective_is_an_error() {
        let r = supremum(|x| if x > 0.0 { f64::NAN } else { x }, &Interval::closed(-1.0, 1.0).unwrap(), 10);
        assert!(matches!(r, Err(Error::NonFiniteEvaluation { .. })));
    }
}
