//! The smooth-root integral transform F(lambda, t) =
//! eps(t) |int_0^t |x|^r psi(lambda, x) dx|^(1/(r+1)) and its
//! derivative-at-zero formula.
//!
//! The |x|^r endpoint singularity is removed by the substitution
//! u = |x|^(r+1), which maps the integrand to the bounded
//! psi(lambda, sgn(t) u^(1/(r+1))) / (r+1); the transformed integral is
//! then handled by adaptive Gauss-Kronrod. Only r > -1 is supported: the
//! integral diverges at 0 otherwise.

use crate::error::{Error, Result};
use crate::expr::Expression;
use crate::quadrature::adaptive_gk15;
use crate::signed_power::{eps, spow};

pub const DEFAULT_REL_TOL: f64 = 1e-13;
const MAX_SEGMENTS: usize = 60_000;

/// Parameters of the transform: exponent r > -1 and a positive-at-zero
/// profile psi(l1..ln, x) with x as the last declared variable.
#[derive(Debug, Clone)]
pub struct BaldomeroSpec {
    r: f64,
    psi: Expression,
    lambda_domain: Vec<[f64; 2]>,
}

impl BaldomeroSpec {
    /// Validates r > -1 and psi(lambda, 0) > 0 on a sample grid over
    /// `lambda_domain` (five points per lambda axis).
    pub fn new(r: f64, psi: Expression, lambda_domain: Vec<[f64; 2]>) -> Result<Self> {
        if r <= -1.0 {
            return Err(Error::BadExponent { r });
        }
        let n = psi.variables().len().saturating_sub(1);
        if lambda_domain.len() != n {
            return Err(Error::Dimension {
                expected: n,
                found: lambda_domain.len(),
            });
        }
        let spec = BaldomeroSpec {
            r,
            psi,
            lambda_domain,
        };
        spec.check_positivity()?;
        Ok(spec)
    }

    fn check_positivity(&self) -> Result<()> {
        let n = self.lambda_domain.len();
        let per_axis = 5usize;
        let total = per_axis.pow(n as u32);
        let mut lambda = vec![0.0; n];
        for flat in 0..total.max(1) {
            let mut rest = flat;
            for (i, range) in self.lambda_domain.iter().enumerate() {
                let k = rest % per_axis;
                rest /= per_axis;
                lambda[i] = range[0] + (range[1] - range[0]) * (k as f64) / ((per_axis - 1) as f64);
            }
            let value = self.psi_at(&lambda, 0.0)?;
            if value <= 0.0 {
                return Err(Error::Positivity { value });
            }
        }
        Ok(())
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn psi(&self) -> &Expression {
        &self.psi
    }

    pub fn psi_at(&self, lambda: &[f64], x: f64) -> Result<f64> {
        let mut env = Vec::with_capacity(lambda.len() + 1);
        env.extend_from_slice(lambda);
        env.push(x);
        self.psi.eval(&env)
    }
}

/// int_0^t |x|^r psi(x) dx for a plain callable psi, r > -1.
///
/// The result carries the sign of t because the integrand is nonnegative.
pub fn singular_integral_fn<F>(r: f64, psi: &mut F, t: f64, rel_tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    if r <= -1.0 {
        return Err(Error::BadExponent { r });
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let sign = eps(t) as f64;
    let upper = t.abs().powf(r + 1.0);
    let exponent = 1.0 / (r + 1.0);
    let mut integrand = |u: f64| {
        let x = sign * u.powf(exponent);
        Ok(psi(x)? / (r + 1.0))
    };
    let value = adaptive_gk15(&mut integrand, 0.0, upper, rel_tol, 1e-300, MAX_SEGMENTS)?;
    Ok(sign * value)
}

/// int_0^t |x|^r psi(lambda, x) dx for an expression profile.
pub fn singular_integral(
    r: f64,
    psi: &Expression,
    lambda: &[f64],
    t: f64,
    rel_tol: f64,
) -> Result<f64> {
    let mut env = Vec::with_capacity(lambda.len() + 1);
    env.extend_from_slice(lambda);
    env.push(0.0);
    let idx = env.len() - 1;
    let mut f = |x: f64| {
        env[idx] = x;
        psi.eval(&env)
    };
    singular_integral_fn(r, &mut f, t, rel_tol)
}

/// F(lambda, t) = eps(t) |int_0^t |x|^r psi dx|^(1/(r+1)); F(lambda, 0) = 0.
pub fn baldomero_f(spec: &BaldomeroSpec, lambda: &[f64], t: f64) -> Result<f64> {
    if t == 0.0 {
        return Ok(0.0);
    }
    let integral = singular_integral(spec.r, &spec.psi, lambda, t, DEFAULT_REL_TOL)?;
    let signed = eps(t) as f64 * integral.abs();
    spow(signed, 1.0 / (spec.r + 1.0))
}

/// Closed form of F'(lambda, 0): (r+1)^(-1/(r+1)) psi(lambda, 0)^(1/(r+1)).
pub fn f_prime_zero_formula(spec: &BaldomeroSpec, lambda: &[f64]) -> Result<f64> {
    let psi0 = spec.psi_at(lambda, 0.0)?;
    if psi0 <= 0.0 {
        return Err(Error::Positivity { value: psi0 });
    }
    let beta = 1.0 / (spec.r + 1.0);
    Ok((spec.r + 1.0).powf(-beta) * psi0.powf(beta))
}
