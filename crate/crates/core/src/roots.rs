//! Brent's method on a sign-change bracket, keeping the bracket.

/// A bracket with `g(outside) > 0` and `g(inside) <= 0`. The ends may be in
/// either order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Bracket {
    pub outside: f64,
    pub g_outside: f64,
    pub inside: f64,
    pub g_inside: f64,
}

#[cfg(test)]
impl Bracket {
    pub fn width(&self) -> f64 {
        (self.inside - self.outside).abs()
    }
}

/// Shrinks `b` with Brent's method until its width is at most `tol` (plus a
/// few ulps). The returned bracket still satisfies the sign convention.
pub(crate) fn brent<G: FnMut(f64) -> f64>(mut g: G, b: Bracket, tol: f64, max_iter: usize) -> Bracket {
    // `x` is the current best estimate and always the end of the bracket with
    // the smaller |g|; `c` is the opposite end.
    let (mut a, mut fa) = (b.outside, b.g_outside);
    let (mut x, mut fx) = (b.inside, b.g_inside);
    let (mut c, mut fc) = (a, fa);
    let mut d = x - a;
    let mut e = d;
    for _ in 0..max_iter {
        if (fx > 0.0) == (fc > 0.0) {
            c = a;
            fc = fa;
            d = x - a;
            e = d;
        }
        if fc.abs() < fx.abs() {
            a = x;
            fa = fx;
            x = c;
            fx = fc;
            c = a;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * x.abs() + 0.5 * tol;
        let half = 0.5 * (c - x);
        if half.abs() <= tol1 || fx == 0.0 {
            break;
        }
        if e.abs() >= tol1 && fa.abs() > fx.abs() {
            let s = fx / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * half * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fx / fc;
                p = s * (2.0 * half * qa * (qa - r) - (x - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * half * q - (tol1 * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = half;
                e = d;
            }
        } else {
            d = half;
            e = d;
        }
        a = x;
        fa = fx;
        x += if d.abs() > tol1 { d } else { tol1.copysign(half) };
        fx = g(x);
    }
    if fx <= 0.0 {
        Bracket {
            outside: c,
            g_outside: fc,
            inside: x,
            g_inside: fx,
        }
    } else {
        Bracket {
            outside: x,
            g_outside: fx,
            inside: c,
            g_inside: fc,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bracket<G: FnMut(f64) -> f64>(mut g: G, outside: f64, inside: f64) -> Bracket {
        Bracket {
            outside,
            g_outside: g(outside),
            inside,
            g_inside: g(inside),
        }
    }

    #[test]
    fn finds_cubic_root() {
        let g = |x: f64| x * x * x - 2.0;
        let b = brent(g, bracket(g, 3.0, 0.0), 1e-10, 100);
        let root = 2f64.cbrt();
        assert!((b.inside - root).abs() <= 1e-10);
        assert!(b.g_outside > 0.0 && b.g_inside <= 0.0);
        assert!(b.width() <= 1.1e-10);
    }

    #[test]
    fn keeps_sign_convention_for_decreasing_functions() {
        let g = |x: f64| 10.0 - x;
        let b = brent(g, bracket(g, 2.0, 64.0), 1e-6, 100);
        assert!(b.inside >= 10.0 && b.inside - 10.0 <= 1e-6);
        assert!(b.outside <= 10.0);
    }

    #[test]
    fn step_function_converges_to_jump() {
        let g = |x: f64| if x < 7.25 { 1.0 } else { -1.0 };
        let b = brent(g, bracket(g, 2.0, 100.0), 1e-6, 200);
        assert!(b.inside >= 7.25 && b.outside < 7.25);
        assert!(b.width() <= 1.1e-6);
    }
}
