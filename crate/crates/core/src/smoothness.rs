//! Numerical smoothness probing.
//!
//! One-sided k-th derivatives are estimated from minimal forward/backward
//! difference stencils on a geometric step ladder, accelerated by a
//! Richardson table. A function is reported C^q-consistent at a point when
//! the left and right estimates exist (the ladder converges) and agree for
//! every order up to q.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre_01;

/// Geometric step schedule h_j = h0 * 2^-j, j = 0..steps.
#[derive(Debug, Clone, Copy)]
pub struct StepLadder {
    pub h0: f64,
    pub steps: usize,
}

impl Default for StepLadder {
    fn default() -> Self {
        StepLadder { h0: 0.2, steps: 9 }
    }
}

impl StepLadder {
    pub fn new(h0: f64, steps: usize) -> Self {
        StepLadder { h0, steps }
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.steps).map(|j| self.h0 * 0.5f64.powi(j as i32))
    }
}

/// Tolerances for existence (ladder convergence) and left/right agreement.
#[derive(Debug, Clone, Copy)]
pub struct ProbeConfig {
    pub agree_rel: f64,
    pub agree_abs: f64,
    pub exist_rel: f64,
    pub exist_abs: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            agree_rel: 1e-3,
            agree_abs: 1e-7,
            exist_rel: 1e-2,
            exist_abs: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// A one-sided derivative estimate with its Richardson error estimate.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DerivativeEstimate {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct OrderReport {
    pub order: usize,
    pub left: DerivativeEstimate,
    pub right: DerivativeEstimate,
    pub agree: bool,
}

/// Result of [`smoothness_probe`]: the verdict is the largest q such that
/// all orders <= q agree; 0 means continuous only.
#[derive(Debug, Clone, Serialize)]
pub struct SmoothnessReport {
    pub orders: Vec<OrderReport>,
    pub verdict: usize,
}

pub const MAX_PROBE_ORDER: usize = 4;

const BINOMIAL: [[f64; 5]; 5] = [
    [1.0, 0.0, 0.0, 0.0, 0.0],
    [1.0, 1.0, 0.0, 0.0, 0.0],
    [1.0, 2.0, 1.0, 0.0, 0.0],
    [1.0, 3.0, 3.0, 1.0, 0.0],
    [1.0, 4.0, 6.0, 4.0, 1.0],
];

/// Richardson extrapolation of a first-order sequence D(h_j) with step
/// ratio 2. Returns the table entry with the smallest variation estimate.
pub fn richardson(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    let mut prev_row: Vec<f64> = Vec::with_capacity(n);
    let mut best = samples[0];
    let mut best_err = f64::INFINITY;
    for (j, &d) in samples.iter().enumerate() {
        let mut row = Vec::with_capacity(j + 1);
        row.push(d);
        for m in 1..=j {
            let factor = 2f64.powi(m as i32);
            let cur = (factor * row[m - 1] - prev_row[m - 1]) / (factor - 1.0);
            let err = (cur - row[m - 1]).abs().max((cur - prev_row[m - 1]).abs());
            if err <= best_err {
                best = cur;
                best_err = err;
            }
            row.push(cur);
        }
        if j >= 3 && (row[j] - prev_row[j - 1]).abs() >= 4.0 * best_err && best_err.is_finite() {
            // noise floor reached: further rows only oscillate
            break;
        }
        prev_row = row;
    }
    if !best_err.is_finite() {
        // single sample: no variation information
        best_err = f64::MAX;
    }
    (best, best_err)
}

/// Estimate the k-th one-sided derivative of `f` at `t0` using minimal
/// forward/backward stencils over the ladder plus Richardson acceleration.
pub fn one_sided_derivative<F>(
    f: &mut F,
    t0: f64,
    order: usize,
    side: Side,
    ladder: StepLadder,
    cfg: &ProbeConfig,
) -> Result<DerivativeEstimate>
where
    F: FnMut(f64) -> Result<f64>,
{
    if order == 0 || order > MAX_PROBE_ORDER {
        return Err(Error::OrderTooHigh {
            order,
            max: MAX_PROBE_ORDER,
        });
    }
    let f0 = f(t0)?;
    let sign = match side {
        Side::Right => 1.0,
        Side::Left => -1.0,
    };
    let mut estimates = Vec::with_capacity(ladder.steps);
    for h in ladder.values() {
        let mut acc = 0.0;
        for j in 0..=order {
            let coeff = BINOMIAL[order][j] * if (order - j) % 2 == 0 { 1.0 } else { -1.0 };
            let sample = if j == 0 { f0 } else { f(t0 + sign * j as f64 * h)? };
            acc += coeff * sample;
        }
        // forward difference estimates f^(k); the backward stencil picks up
        // a (-1)^k from the reflected steps
        let est = acc / (sign * h).powi(order as i32);
        estimates.push(est);
    }
    let (value, error) = richardson(&estimates);
    let converged = error <= cfg.exist_abs.max(cfg.exist_rel * value.abs());
    Ok(DerivativeEstimate {
        value,
        error,
        converged,
    })
}

/// Probe one-sided smoothness of `f` around `t0` up to `max_order`.
pub fn smoothness_probe<F>(
    f: &mut F,
    t0: f64,
    max_order: usize,
    ladder: StepLadder,
    cfg: &ProbeConfig,
) -> Result<SmoothnessReport>
where
    F: FnMut(f64) -> Result<f64>,
{
    if max_order == 0 || max_order > MAX_PROBE_ORDER {
        return Err(Error::OrderTooHigh {
            order: max_order,
            max: MAX_PROBE_ORDER,
        });
    }
    let mut orders = Vec::with_capacity(max_order);
    let mut verdict = 0usize;
    let mut chain_alive = true;
    for order in 1..=max_order {
        let left = one_sided_derivative(f, t0, order, Side::Left, ladder, cfg)?;
        let right = one_sided_derivative(f, t0, order, Side::Right, ladder, cfg)?;
        let mean = 0.5 * (left.value + right.value);
        let agree = left.converged
            && right.converged
            && (left.value - right.value).abs() <= cfg.agree_abs.max(cfg.agree_rel * mean.abs());
        if agree && chain_alive {
            verdict = order;
        } else {
            chain_alive = false;
        }
        orders.push(OrderReport {
            order,
            left,
            right,
            agree,
        });
    }
    Ok(SmoothnessReport { orders, verdict })
}

/// The quotient g with f(t) = t g(t) for differentiable f with f(0) = 0,
/// computed as the unit-interval integral of f'(s t) with f' from a
/// five-point central rule.
pub fn hadamard_quotient<F>(f: &mut F, t: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (nodes, weights) = gauss_legendre_01();
    let mut acc = 0.0;
    for (s, w) in nodes.iter().zip(weights) {
        acc += w * central_derivative(f, s * t)?;
    }
    Ok(acc)
}

/// Five-point central first derivative (step pair h, h/2).
pub fn central_derivative<F>(f: &mut F, x: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let h = 1e-3 * x.abs().max(1.0);
    let r3 = 0.5 * (f(x + h)? - f(x - h)?);
    let r5 = (4.0 / 3.0) * (f(x + h / 2.0)? - f(x - h / 2.0)?) - (1.0 / 3.0) * r3;
    Ok(r5 / h)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn probe(f: impl Fn(f64) -> f64 + Copy, max_order: usize) -> SmoothnessReport {
        let mut g = move |t: f64| Ok(f(t));
        smoothness_probe(&mut g, 0.0, max_order, StepLadder::default(), &ProbeConfig::default())
            .unwrap()
    }

    #[test]
    fn t_abs_t_is_exactly_c1() {
        let report = probe(|t| t * t.abs(), 2);
        assert_eq!(report.verdict, 1);
        assert!(report.orders[0].agree);
        assert!(!report.orders[1].agree);
        assert!((report.orders[1].left.value - -2.0).abs() < 1e-9);
        assert!((report.orders[1].right.value - 2.0).abs() < 1e-9);
    }

    #[test]
    fn linear_map_is_c3() {
        let c = 0.5f64.sqrt();
        let report = probe(move |t| c * t, 3);
        assert_eq!(report.verdict, 3);
        assert!((report.orders[0].left.value - c).abs() < 1e-10);
        assert!((report.orders[0].right.value - c).abs() < 1e-10);
    }

    #[test]
    fn smooth_function_reports_c3() {
        let report = probe(|t| (t + 0.3 * t * t).exp() - 1.0, 3);
        assert_eq!(report.verdict, 3, "{report:?}");
    }

    #[test]
    fn cube_root_profile_is_c0_only() {
        // first derivative diverges like |t|^(-1/3): ladder must not converge
        let report = probe(|t| t.signum() * (t * t / 2.0).abs().powf(1.0 / 3.0), 2);
        assert_eq!(report.verdict, 0, "{report:?}");
        assert!(!report.orders[0].left.converged || !report.orders[0].right.converged);
    }

    #[test]
    fn hadamard_examples() {
        let mut f = |t: f64| Ok(t.sin());
        let g = hadamard_quotient(&mut f, 1.0).unwrap();
        assert!((g - 1f64.sin()).abs() < 1e-9);

        let g0 = hadamard_quotient(&mut f, 0.0).unwrap();
        assert!((g0 - 1.0).abs() < 1e-9);

        let mut sq = |t: f64| Ok(t * t);
        for t in [0.3, -1.2, 2.0] {
            let g = hadamard_quotient(&mut sq, t).unwrap();
            assert!((g - t).abs() < 1e-9);
        }
    }

    #[test]
    fn order_cap_enforced() {
        let mut f = |t: f64| Ok(t);
        assert!(matches!(
            smoothness_probe(&mut f, 0.0, 5, StepLadder::default(), &ProbeConfig::default()),
            Err(Error::OrderTooHigh { .. })
        ));
    }
}
