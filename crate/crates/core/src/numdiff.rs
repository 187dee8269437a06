//! Finite-difference derivatives that stay clear of kinks and support ends.

/// Fourth-order derivative of `g` at `x`. The stencil never reaches further
/// than `left_room` below or `right_room` above `x`; when a central stencil
/// of half-width `h` does not fit, a one-sided stencil pointing into the
/// larger gap is used instead.
pub(crate) fn derivative<G>(g: &G, x: f64, h: f64, left_room: f64, right_room: f64) -> f64
where
    G: Fn(f64) -> f64,
{
    if left_room >= h && right_room >= h {
        let d = |s: f64| (g(x + s) - g(x - s)) / (2.0 * s);
        let coarse = d(h);
        let fine = d(0.5 * h);
        return (4.0 * fine - coarse) / 3.0;
    }
    let (room, sign) = if right_room >= left_room {
        (right_room, 1.0)
    } else {
        (left_room, -1.0)
    };
    let s = sign * h.min(room / 4.5);
    let f0 = g(x);
    let f1 = g(x + s);
    let f2 = g(x + 2.0 * s);
    let f3 = g(x + 3.0 * s);
    let f4 = g(x + 4.0 * s);
    (-25.0 * f0 + 48.0 * f1 - 36.0 * f2 + 16.0 * f3 - 3.0 * f4) / (12.0 * s)
}

/// Distances from `x` to the nearest obstacle on each side.
pub(crate) fn room(x: f64, lower: f64, upper: f64, obstacles: &[f64]) -> (f64, f64) {
    let mut left = x - lower;
    let mut right = upper - x;
    for &k in obstacles {
        if k < x {
            left = left.min(x - k);
        } else if k > x {
            right = right.min(k - x);
        }
    }
    (left, right)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn central_and_one_sided_agree_on_smooth_function() {
        let g = |x: f64| x.sin() * x.exp();
        let exact = |x: f64| (x.cos() + x.sin()) * x.exp();
        let c = derivative(&g, 0.7, 1e-3, 1.0, 1.0);
        let fwd = derivative(&g, 0.7, 1e-3, 0.0, 1.0);
        let bwd = derivative(&g, 0.7, 1e-3, 1.0, 0.0);
        for d in [c, fwd, bwd] {
            assert!((d - exact(0.7)).abs() < 1e-9, "{d}");
        }
    }

    #[test]
    fn room_sees_nearest_obstacles() {
        let (l, r) = room(0.5, 0.0, 1.0, &[0.45, 0.9, 0.2]);
        assert!((l - 0.05).abs() < 1e-15);
        assert!((r - 0.4).abs() < 1e-15);
    }
}
