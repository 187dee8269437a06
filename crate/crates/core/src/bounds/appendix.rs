//! The unit constant of the sup-distance bound:
//! `sup_y p(y)·√E_q[(𝟙_{[y,b)}(X) − P(X))²/p(X)²] ≤ 1`.

use serde::Serialize;

use crate::densities::DensityModel;
use crate::error::{Error, Result};
use crate::metrics::expectation_or_divergent;

/// Quantile levels scanned before refinement.
pub const APPENDIX_GRID: usize = 201;
const GOLDEN_ITERS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AppendixConstant {
    pub value: f64,
    pub argsup: f64,
    pub evaluations: usize,
}

/// The objective at a single `y`. `+∞` when the `q`-expectation diverges.
pub fn appendix_objective(p: &DensityModel, q: &DensityModel, y: f64) -> Result<f64> {
    let py = p.pdf(y);
    if py == 0.0 {
        return Ok(0.0);
    }
    // (𝟙_{x ≥ y} − P(x))/p(x) is −P/p below y and (1 − P)/p from y on.
    let g = |x: f64| {
        let ratio = if x < y { p.cdf_over_pdf(x) } else { p.sf_over_pdf(x) };
        ratio * ratio
    };
    let mut bps = vec![y];
    bps.extend(p.kink_points().iter().copied());
    bps.extend(q.landmarks());
    bps.retain(|b| q.support().contains_interior(*b));
    Ok(match expectation_or_divergent(q, g, &bps)? {
        Some(e) => py * e.max(0.0).sqrt(),
        None => f64::INFINITY,
    })
}

fn check_pair(p: &DensityModel, q: &DensityModel) -> Result<()> {
    if p.centered_power_exponential().is_none() {
        return Err(Error::NotPowerExponential);
    }
    if !p.support().same_closure(q.support()) {
        return Err(Error::SupportMismatch {
            p_support: p.support().to_string(),
            q_support: q.support().to_string(),
        });
    }
    Ok(())
}

/// Maximum of the objective over the given `y` values, without refinement.
pub fn appendix_sup_constant_on(p: &DensityModel, q: &DensityModel, ys: &[f64]) -> Result<AppendixConstant> {
    check_pair(p, q)?;
    let mut best = AppendixConstant {
        value: f64::NEG_INFINITY,
        argsup: f64::NAN,
        evaluations: 0,
    };
    for &y in ys {
        let v = appendix_objective(p, q, y)?;
        best.evaluations += 1;
        if v > best.value {
            best.value = v;
            best.argsup = y;
        }
    }
    Ok(best)
}

/// Supremum over `y` from a scan of `p`-quantiles at levels `k/202`,
/// with golden-section refinement around the three best grid points.
pub fn appendix_sup_constant(p: &DensityModel, q: &DensityModel) -> Result<AppendixConstant> {
    check_pair(p, q)?;
    let ys = p.quantile_grid(APPENDIX_GRID);
    let vals = ys
        .iter()
        .map(|&y| appendix_objective(p, q, y))
        .collect::<Result<Vec<f64>>>()?;
    let mut best = AppendixConstant {
        value: f64::NEG_INFINITY,
        argsup: f64::NAN,
        evaluations: ys.len(),
    };
    for (&y, &v) in ys.iter().zip(&vals) {
        if v > best.value {
            best.value = v;
            best.argsup = y;
        }
    }
    if !best.value.is_finite() {
        return Ok(best);
    }

    let mut order: Vec<usize> = (0..ys.len()).collect();
    order.sort_by(|&i, &j| vals[j].total_cmp(&vals[i]));
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    for &i in order.iter().take(3) {
        let mut lo = if i > 0 { ys[i - 1] } else { ys[i] - (ys[1] - ys[0]) };
        let mut hi = if i + 1 < ys.len() { ys[i + 1] } else { ys[i] + (ys[i] - ys[i - 1]) };
        lo = lo.max(p.support().lower());
        hi = hi.min(p.support().upper());
        let eval = |y: f64, best: &mut AppendixConstant| -> Result<f64> {
            let v = appendix_objective(p, q, y)?;
            best.evaluations += 1;
            if v > best.value {
                best.value = v;
                best.argsup = y;
            }
            Ok(v)
        };
        let mut c = hi - inv_phi * (hi - lo);
        let mut d = lo + inv_phi * (hi - lo);
        let mut fc = eval(c, &mut best)?;
        let mut fd = eval(d, &mut best)?;
        for _ in 0..GOLDEN_ITERS {
            if hi - lo <= 1e-12 * (1.0 + lo.abs()) {
                break;
            }
            if fc >= fd {
                hi = d;
                d = c;
                fd = fc;
                c = hi - inv_phi * (hi - lo);
                fc = eval(c, &mut best)?;
            } else {
                lo = c;
                c = d;
                fc = fd;
                d = lo + inv_phi * (hi - lo);
                fd = eval(d, &mut best)?;
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn objective_matches_reference_values() {
        let g = DensityModel::standard_gaussian();
        let cases = [
            (DensityModel::standard_gaussian(), 0.0, 0.332_141_235_133_980_0),
            (DensityModel::gaussian(0.0, 4.0).unwrap(), 0.0, 0.266_192_008_683_425_2),
            (DensityModel::gaussian(0.0, 0.25).unwrap(), 1.0, 0.354_366_461_803_086_6),
        ];
        for (q, y, want) in cases {
            let v = appendix_objective(&g, &q, y).unwrap();
            assert!((v - want).abs() < 1e-10, "{v} vs {want}");
        }
    }

    #[test]
    fn constant_for_self_pair_is_below_one() {
        let p = DensityModel::laplace(1.0, 0.0).unwrap();
        let c = appendix_sup_constant(&p, &p).unwrap();
        assert!(c.value <= 1.0 + 1e-9, "{c:?}");
        let e = DensityModel::exponential(1.0).unwrap();
        assert!(matches!(appendix_sup_constant(&p, &e), Err(Error::SupportMismatch { .. })));
    }
}
