//! Bracketing root finding (scan + Brent).

use crate::error::{Error, Result};

pub struct Bracket {
    pub a: f64,
    pub b: f64,
    pub fa: f64,
    pub fb: f64,
}

/// Scan `[lo, hi]` in `n` uniform cells for the first sign change of `f`.
/// A cell endpoint with |f| <= ftol counts as a root bracket of width zero.
pub fn scan_bracket<F>(f: &mut F, lo: f64, hi: f64, n: usize, ftol: f64) -> Result<Bracket>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut a = lo;
    let mut fa = f(a)?;
    if fa.abs() <= ftol {
        return Ok(Bracket { a, b: a, fa, fb: fa });
    }
    for i in 1..=n {
        let b = lo + (hi - lo) * (i as f64) / (n as f64);
        let fb = f(b)?;
        if fb.abs() <= ftol {
            return Ok(Bracket { a: b, b, fa: fb, fb });
        }
        if fa.signum() != fb.signum() {
            return Ok(Bracket { a, b, fa, fb });
        }
        a = b;
        fa = fb;
    }
    Err(Error::NoBracket)
}

/// Brent's method on a sign-changing bracket, iterating until
/// `|f| <= ftol` or the bracket collapses to machine width.
pub fn brent<F>(f: &mut F, bracket: Bracket, ftol: f64, max_iter: usize) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let Bracket {
        mut a,
        mut b,
        fa: mut fa_v,
        fb: mut fb_v,
    } = bracket;
    if fa_v.abs() <= ftol {
        return Ok(a);
    }
    if fb_v.abs() <= ftol {
        return Ok(b);
    }
    if fa_v.signum() == fb_v.signum() {
        return Err(Error::NoBracket);
    }

    let mut c = a;
    let mut fc = fa_v;
    let mut d = b - a;
    let mut e = b - a;

    for _ in 0..max_iter {
        if fb_v.signum() == fc.signum() {
            c = a;
            fc = fa_v;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb_v.abs() {
            a = b;
            b = c;
            c = a;
            fa_v = fb_v;
            fb_v = fc;
            fc = fa_v;
        }
        let xm = 0.5 * (c - b);
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 1e-300;
        if fb_v.abs() <= ftol || xm.abs() <= tol1 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa_v.abs() > fb_v.abs() {
            // inverse quadratic interpolation / secant
            let s = fb_v / fa_v;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa_v / fc;
                let r = fb_v / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            if 2.0 * p < (3.0 * xm * q - (tol1 * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa_v = fb_v;
        b += if d.abs() > tol1 {
            d
        } else {
            tol1 * xm.signum()
        };
        fb_v = f(b)?;
    }
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_cubic_root() {
        let mut f = |x: f64| Ok(x * x * x - 2.0);
        let bracket = scan_bracket(&mut f, 0.0, 2.0, 8, 0.0).unwrap();
        let root = brent(&mut f, bracket, 1e-14, 100).unwrap();
        assert!((root - 2f64.powf(1.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn steep_signed_profile() {
        // root of sign(x)|x|^(1/2) requires tiny |x| for small |f|
        let mut f = |x: f64| Ok(x.signum() * x.abs().sqrt());
        let bracket = scan_bracket(&mut f, -1.0, 1.0, 16, 0.0).unwrap();
        let root = brent(&mut f, bracket, 1e-12, 200).unwrap();
        assert!(f(root).unwrap().abs() <= 1e-12);
    }

    #[test]
    fn no_bracket_reported() {
        let mut f = |x: f64| Ok(x * x + 1.0);
        assert!(matches!(
            scan_bracket(&mut f, -1.0, 1.0, 16, 0.0),
            Err(Error::NoBracket)
        ));
    }
}
