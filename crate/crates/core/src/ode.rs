//! Adaptive Dormand-Prince 5(4) integration with dense output.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_steps: usize,
    pub initial_step: Option<f64>,
    /// Treat step-size collapse as a halt at the last reached state
    /// instead of an error (used when integrating toward a singularity).
    pub stall_is_halt: bool,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_steps: 100_000,
            initial_step: None,
            stall_is_halt: false,
        }
    }
}

impl OdeOptions {
    pub fn with_tol(tol: f64) -> Self {
        OdeOptions {
            rel_tol: tol,
            abs_tol: tol * 1e-2,
            ..Default::default()
        }
    }
}

/// One accepted step with the dense-output polynomial coefficients.
#[derive(Debug, Clone)]
struct DenseStep {
    t0: f64,
    h: f64,
    rcont: [Vec<f64>; 5],
}

/// Dense solution of an initial value problem on [t_start, t_end]
/// (either orientation). `halted` is set when a caller-provided guard
/// stopped the integration early.
#[derive(Debug, Clone)]
pub struct OdeSolution {
    dim: usize,
    t_start: f64,
    t_end: f64,
    steps: Vec<DenseStep>,
    pub halted: Option<(f64, Vec<f64>)>,
}

impl OdeSolution {
    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    /// Final reached time (guard point if halted).
    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Dense-output evaluation; `t` is clamped into the covered span.
    pub fn eval(&self, t: f64) -> Vec<f64> {
        let step = self.find_step(t);
        let theta = if step.h == 0.0 {
            0.0
        } else {
            ((t - step.t0) / step.h).clamp(0.0, 1.0)
        };
        let mut y = vec![0.0; self.dim];
        let om = 1.0 - theta;
        for i in 0..self.dim {
            // contd5 nested form
            y[i] = step.rcont[0][i]
                + theta
                    * (step.rcont[1][i]
                        + om * (step.rcont[2][i]
                            + theta * (step.rcont[3][i] + om * step.rcont[4][i])));
        }
        y
    }

    /// Derivative of the dense interpolant at `t`.
    pub fn eval_derivative(&self, t: f64) -> Vec<f64> {
        let step = self.find_step(t);
        if step.h == 0.0 {
            return vec![0.0; self.dim];
        }
        let theta = ((t - step.t0) / step.h).clamp(0.0, 1.0);
        let om = 1.0 - theta;
        let mut dy = vec![0.0; self.dim];
        for i in 0..self.dim {
            let c1 = step.rcont[1][i];
            let c2 = step.rcont[2][i];
            let c3 = step.rcont[3][i];
            let c4 = step.rcont[4][i];
            // d/dtheta of c1 th + c2 th om + c3 th^2 om + c4 th^2 om^2
            let d = c1
                + c2 * (om - theta)
                + c3 * theta * (2.0 * om - theta)
                + c4 * theta * (2.0 * om * om - 2.0 * theta * om);
            dy[i] = d / step.h;
        }
        dy
    }

    // steps are kept sorted by interval start, so lookup is uniform in the
    // integration direction
    fn find_step(&self, t: f64) -> &DenseStep {
        let mut lo = 0usize;
        let mut hi = self.steps.len();
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if t < span_start(&self.steps[mid]) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        &self.steps[lo]
    }
}

fn span_start(step: &DenseStep) -> f64 {
    step.t0.min(step.t0 + step.h)
}

fn stall(mut sol: OdeSolution, t: f64, y: &[f64]) -> OdeSolution {
    if sol.steps.is_empty() {
        sol.steps.push(DenseStep {
            t0: sol.t_start,
            h: 0.0,
            rcont: [
                y.to_vec(),
                vec![0.0; y.len()],
                vec![0.0; y.len()],
                vec![0.0; y.len()],
                vec![0.0; y.len()],
            ],
        });
    }
    sort_steps(&mut sol.steps);
    sol.t_end = t;
    sol.halted = Some((t, y.to_vec()));
    sol
}

fn sort_steps(steps: &mut [DenseStep]) {
    steps.sort_by(|a, b| {
        span_start(a)
            .partial_cmp(&span_start(b))
            .expect("finite step anchors")
    });
}

/// Join a forward and a backward solution integrated from the same anchor
/// into one dense solution covering both spans.
pub fn splice_bidirectional(fwd: OdeSolution, bwd: OdeSolution) -> OdeSolution {
    let mut steps = bwd.steps;
    steps.extend(fwd.steps);
    sort_steps(&mut steps);
    OdeSolution {
        dim: fwd.dim,
        t_start: bwd.t_end,
        t_end: fwd.t_end,
        steps,
        halted: fwd.halted.or(bwd.halted),
    }
}

// Dormand-Prince coefficients.
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
// error = y5 - y4
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
// dense-output weights
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// Integrate dy/dt = f(t, y) from `t0` to `t_end` (either direction).
///
/// `guard` may veto states: when it returns true at the end of an accepted
/// step, the guard boundary is located by bisection on the dense output of
/// that step and the solution is marked halted there.
pub fn integrate<F, G>(
    f: &mut F,
    t0: f64,
    y0: &[f64],
    t_end: f64,
    opts: &OdeOptions,
    guard: Option<&G>,
) -> Result<OdeSolution>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
    G: Fn(f64, &[f64]) -> bool,
{
    let dim = y0.len();
    let direction = if t_end >= t0 { 1.0 } else { -1.0 };
    let span = (t_end - t0).abs();

    let mut sol = OdeSolution {
        dim,
        t_start: t0,
        t_end: t0,
        steps: Vec::new(),
        halted: None,
    };

    if let Some(g) = guard {
        if g(t0, y0) {
            sol.halted = Some((t0, y0.to_vec()));
            sol.steps.push(DenseStep {
                t0,
                h: 0.0,
                rcont: [
                    y0.to_vec(),
                    vec![0.0; dim],
                    vec![0.0; dim],
                    vec![0.0; dim],
                    vec![0.0; dim],
                ],
            });
            return Ok(sol);
        }
    }
    if span == 0.0 {
        sol.steps.push(DenseStep {
            t0,
            h: 0.0,
            rcont: [
                y0.to_vec(),
                vec![0.0; dim],
                vec![0.0; dim],
                vec![0.0; dim],
                vec![0.0; dim],
            ],
        });
        return Ok(sol);
    }

    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k1 = f(t, &y)?;
    let mut h = opts
        .initial_step
        .unwrap_or(span / 100.0)
        .min(span)
        .max(span * 1e-10)
        * direction;

    let mut steps_taken = 0usize;
    let mut rhs_retries = 0usize;
    while (t - t_end).abs() > 0.0 && direction * (t_end - t) > 0.0 {
        if steps_taken > opts.max_steps {
            return Err(Error::StepFailure { t });
        }
        steps_taken += 1;
        if direction * (t + h - t_end) > 0.0 {
            h = t_end - t;
        }

        // stages; a failing right-hand side at a trial point (for example a
        // near-singular guard) shrinks the step instead of aborting
        let mut k = vec![k1.clone()];
        let mut stage_error = None;
        for stage in 0..6 {
            let mut ys = y.clone();
            for (j, kj) in k.iter().enumerate() {
                let a = A[stage][j];
                if a != 0.0 {
                    for i in 0..dim {
                        ys[i] += h * a * kj[i];
                    }
                }
            }
            match f(t + C[stage] * h, &ys) {
                Ok(v) => k.push(v),
                Err(e) => {
                    stage_error = Some(e);
                    break;
                }
            }
        }
        if let Some(e) = stage_error {
            rhs_retries += 1;
            if rhs_retries > 60 || h.abs() * 0.5 < span * 1e-14 {
                if opts.stall_is_halt {
                    return Ok(stall(sol, t, &y));
                }
                return Err(e);
            }
            h *= 0.5;
            continue;
        }
        rhs_retries = 0;
        // 5th-order solution is the last stage state (FSAL)
        let mut y_new = y.clone();
        for (j, kj) in k.iter().enumerate().take(6) {
            let a = A[5][j];
            if a != 0.0 {
                for i in 0..dim {
                    y_new[i] += h * a * kj[i];
                }
            }
        }

        // error norm
        let mut err = 0.0f64;
        for i in 0..dim {
            let mut e = 0.0;
            for (j, kj) in k.iter().enumerate() {
                e += E[j] * kj[i];
            }
            e *= h;
            let scale = opts.abs_tol + opts.rel_tol * y[i].abs().max(y_new[i].abs());
            err += (e / scale) * (e / scale);
        }
        err = (err / dim as f64).sqrt();

        if err <= 1.0 {
            // accept; build dense coefficients
            let ydiff: Vec<f64> = (0..dim).map(|i| y_new[i] - y[i]).collect();
            let bspl: Vec<f64> = (0..dim).map(|i| h * k[0][i] - ydiff[i]).collect();
            let rcont4: Vec<f64> = (0..dim)
                .map(|i| ydiff[i] - h * k[6][i] - bspl[i])
                .collect();
            let mut rcont5 = vec![0.0; dim];
            for i in 0..dim {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate() {
                    acc += D[j] * kj[i];
                }
                rcont5[i] = acc * h;
            }
            let step = DenseStep {
                t0: t,
                h,
                rcont: [y.clone(), ydiff, bspl, rcont4, rcont5],
            };

            let t_new = t + h;
            if let Some(g) = guard {
                if g(t_new, &y_new) {
                    // bisect inside the dense step for the guard boundary
                    let mut lo = 0.0f64;
                    let mut hi = 1.0f64;
                    sol.steps.push(step);
                    sort_steps(&mut sol.steps);
                    for _ in 0..60 {
                        let mid = 0.5 * (lo + hi);
                        let tm = t + mid * h;
                        let ym = sol.eval(tm);
                        if g(tm, &ym) {
                            hi = mid;
                        } else {
                            lo = mid;
                        }
                    }
                    let t_halt = t + hi * h;
                    let y_halt = sol.eval(t_halt);
                    sol.t_end = t_halt;
                    sol.halted = Some((t_halt, y_halt));
                    return Ok(sol);
                }
            }

            sol.steps.push(step);
            t = t_new;
            y = y_new;
            k1 = k.pop().expect("seven stages");
            sol.t_end = t;
        }

        // step-size controller
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        h *= factor;
        if h.abs() < span * 1e-14 {
            if opts.stall_is_halt {
                return Ok(stall(sol, t, &y));
            }
            return Err(Error::StepFailure { t });
        }
    }

    if sol.steps.is_empty() {
        sol.steps.push(DenseStep {
            t0,
            h: 0.0,
            rcont: [
                y0.to_vec(),
                vec![0.0; dim],
                vec![0.0; dim],
                vec![0.0; dim],
                vec![0.0; dim],
            ],
        });
    }
    sort_steps(&mut sol.steps);
    Ok(sol)
}

/// Convenience wrapper without a guard.
pub fn integrate_plain<F>(
    f: &mut F,
    t0: f64,
    y0: &[f64],
    t_end: f64,
    opts: &OdeOptions,
) -> Result<OdeSolution>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
{
    integrate(f, t0, y0, t_end, opts, None::<&fn(f64, &[f64]) -> bool>)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_growth() {
        let mut f = |_t: f64, y: &[f64]| Ok(vec![y[0]]);
        let sol = integrate_plain(&mut f, 0.0, &[1.0], 1.0, &OdeOptions::default()).unwrap();
        let y = sol.eval(1.0);
        assert!((y[0] - 1f64.exp()).abs() < 1e-9);
        // dense output mid-span
        let y = sol.eval(0.5);
        assert!((y[0] - 0.5f64.exp()).abs() < 1e-9);
        let dy = sol.eval_derivative(0.5);
        assert!((dy[0] - 0.5f64.exp()).abs() < 1e-7);
    }

    #[test]
    fn harmonic_oscillator_backward() {
        let mut f = |_t: f64, y: &[f64]| Ok(vec![y[1], -y[0]]);
        let sol = integrate_plain(
            &mut f,
            0.0,
            &[1.0, 0.0],
            -std::f64::consts::PI,
            &OdeOptions::default(),
        )
        .unwrap();
        let y = sol.eval(-std::f64::consts::PI);
        assert!((y[0] + 1.0).abs() < 1e-9);
        assert!(y[1].abs() < 1e-9);
    }

    #[test]
    fn rotation_quarter_turn() {
        let mut f = |_t: f64, y: &[f64]| Ok(vec![-y[1], y[0]]);
        let sol = integrate_plain(
            &mut f,
            0.0,
            &[1.0, 0.0],
            std::f64::consts::FRAC_PI_2,
            &OdeOptions::default(),
        )
        .unwrap();
        let y = sol.eval(std::f64::consts::FRAC_PI_2);
        assert!(y[0].abs() < 1e-9);
        assert!((y[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn guard_halts_and_localizes() {
        let mut f = |_t: f64, y: &[f64]| Ok(vec![y[1], -y[0]]);
        let guard = |_t: f64, y: &[f64]| y[0] < 0.25;
        let sol = integrate(
            &mut f,
            0.0,
            &[1.0, 0.0],
            3.0,
            &OdeOptions::default(),
            Some(&guard),
        )
        .unwrap();
        let (t_halt, y_halt) = sol.halted.clone().expect("guard must trip");
        assert!((y_halt[0] - 0.25).abs() < 1e-6, "halt at {y_halt:?}");
        assert!((t_halt - 0.25f64.acos()).abs() < 1e-5);
    }
}
