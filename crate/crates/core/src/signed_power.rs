//! Sign function and signed powers t^[a] = eps(t)|t|^a.
//!
//! These scalar kernels are used by every other module: metric entries,
//! transversality probes, the singular integral engine and the chart
//! reparameterizations are all phrased in terms of `spow`.

use crate::error::{Error, Result};

/// Sign of `t`: +1, 0 or -1.
#[inline]
pub fn eps(t: f64) -> i32 {
    if t > 0.0 {
        1
    } else if t < 0.0 {
        -1
    } else {
        0
    }
}

/// Signed power eps(t)|t|^alpha, the odd extension of the power map.
///
/// `spow(t, 1)` returns `t` bitwise and `spow(±1, alpha) = ±1` exactly, so
/// the algebraic identities hold without rounding slack in those cases.
/// `alpha = 0` is rejected (the zeroth signed power is the sign function,
/// exposed as [`eps`]); `t = 0` with `alpha <= 0` is a hard error rather
/// than an infinity, so callers near the singular set must branch
/// explicitly.
pub fn spow(t: f64, alpha: f64) -> Result<f64> {
    if alpha == 0.0 {
        return Err(Error::SpowZeroExponent);
    }
    if t == 0.0 {
        if alpha > 0.0 {
            return Ok(0.0);
        }
        return Err(Error::SpowAtZero { alpha });
    }
    if alpha == 1.0 {
        return Ok(t);
    }
    let a = t.abs();
    if a == 1.0 {
        return Ok(t.signum());
    }
    Ok(t.signum() * a.powf(alpha))
}

/// Analytic derivative of `t -> spow(t, alpha)`.
///
/// Equals `alpha |t|^(alpha-1)` for `t != 0`; at `t = 0` the derivative is 0
/// when `alpha > 1` and does not exist otherwise.
pub fn spow_derivative(t: f64, alpha: f64) -> Result<f64> {
    if t == 0.0 {
        if alpha > 1.0 {
            return Ok(0.0);
        }
        return Err(Error::SpowDerivativeAtZero { alpha });
    }
    Ok(alpha * t.abs().powf(alpha - 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rel_close(a: f64, b: f64, tol: f64) -> bool {
        let scale = a.abs().max(b.abs()).max(1e-300);
        (a - b).abs() <= tol * scale
    }

    #[test]
    fn eps_signs() {
        assert_eq!(eps(3.25), 1);
        assert_eq!(eps(0.0), 0);
        assert_eq!(eps(-0.0), 0);
        assert_eq!(eps(-7.0), -1);
    }

    #[test]
    fn spow_examples() {
        assert_eq!(spow(-4.0, 0.5).unwrap(), -2.0);
        for &t in &[-3.75, -1.0, 0.0, 0.25, 17.0] {
            assert_eq!(spow(t, 1.0).unwrap(), t);
        }
        let inner = spow(2.0, 3.0).unwrap();
        assert_eq!(spow(inner, 2.0).unwrap(), 64.0);
        assert_eq!(spow(2.0, 6.0).unwrap(), 64.0);
    }

    #[test]
    fn spow_domain_errors() {
        assert!(matches!(spow(1.0, 0.0), Err(Error::SpowZeroExponent)));
        assert!(matches!(spow(0.0, -0.5), Err(Error::SpowAtZero { .. })));
        assert_eq!(spow(0.0, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn derivative_examples() {
        assert!(rel_close(spow_derivative(-4.0, 0.5).unwrap(), 0.25, 1e-15));
        assert_eq!(spow_derivative(0.0, 2.0).unwrap(), 0.0);
        assert_eq!(spow_derivative(3.0, 1.0).unwrap(), 1.0);
        assert!(matches!(
            spow_derivative(0.0, 1.0),
            Err(Error::SpowDerivativeAtZero { .. })
        ));
    }

    #[test]
    fn identities_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..10_000 {
            let t = nonzero(&mut rng);
            let s = nonzero(&mut rng);
            let a = rng.gen_range(0.1..4.0);
            let b = rng.gen_range(0.1..4.0);

            let comp = spow(spow(t, a).unwrap(), b).unwrap();
            assert!(rel_close(comp, spow(t, a * b).unwrap(), 1e-12));

            let prod = spow(s * t, a).unwrap();
            assert!(rel_close(prod, spow(s, a).unwrap() * spow(t, a).unwrap(), 1e-12));

            let inv = spow(t, -a).unwrap();
            assert!(rel_close(inv, 1.0 / spow(t, a).unwrap(), 1e-12));

            let sum = spow(t, a + b).unwrap();
            let rhs = eps(t) as f64 * spow(t, a).unwrap() * spow(t, b).unwrap();
            assert!(rel_close(sum, rhs, 1e-12));
        }
    }

    #[test]
    fn derivative_matches_central_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..500 {
            let t = nonzero(&mut rng);
            let a = rng.gen_range(0.5..3.0);
            let h = 1e-5 * t.abs().max(1.0);
            let fd = (spow(t + h, a).unwrap() - spow(t - h, a).unwrap()) / (2.0 * h);
            let exact = spow_derivative(t, a).unwrap();
            assert!(rel_close(fd, exact, 1e-6), "t={t} a={a} fd={fd} exact={exact}");
        }
    }

    fn nonzero(rng: &mut ChaCha8Rng) -> f64 {
        loop {
            let t: f64 = rng.gen_range(-10.0..10.0);
            if t.abs() > 1e-3 {
                return t;
            }
        }
    }
}
