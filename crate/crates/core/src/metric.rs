//! Degenerate metric fields: evaluation, singular-set location, radical
//! directions, transversality diagnostics, Christoffel symbols and the
//! normalized-gradient field of a simple equation.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::Expression;
use crate::linalg;
use crate::roots;
use crate::signed_power::spow;
use crate::smoothness::{richardson, StepLadder};

/// Default |det| floor (times the metric scale) under which inverse-metric
/// work is refused.
pub const DEFAULT_DET_FLOOR: f64 = 1e-8;

/// Names x1..xm used by every space definition.
pub fn coordinate_names(dim: usize) -> Vec<String> {
    (1..=dim).map(|i| format!("x{i}")).collect()
}

/// A symmetric field of expressions g_ab(x1..xm) over an axis-aligned box,
/// degenerate on the zero set of its determinant.
#[derive(Debug, Clone)]
pub struct MetricField {
    dim: usize,
    alpha: f64,
    entries: Vec<Expression>,   // m*m, row-major
    dentries: Vec<Expression>,  // m*m*m: [c][a][b] = d g_ab / d x_c
    domain: Vec<[f64; 2]>,
    sigma: Option<Expression>,
    det_floor: f64,
}

impl MetricField {
    pub fn new(
        alpha: f64,
        entries: Vec<Vec<Expression>>,
        domain: Vec<[f64; 2]>,
        sigma: Option<Expression>,
    ) -> Result<Self> {
        let dim = entries.len();
        if dim < 2 {
            return Err(Error::Dimension {
                expected: 2,
                found: dim,
            });
        }
        if domain.len() != dim {
            return Err(Error::Dimension {
                expected: dim,
                found: domain.len(),
            });
        }
        if alpha <= 0.0 {
            return Err(Error::BadParams {
                detail: format!("alpha must be positive, got {alpha}"),
            });
        }
        for (a, row) in entries.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    found: row.len(),
                });
            }
            for (b, e) in row.iter().enumerate() {
                if b < a && *e != entries[b][a] {
                    return Err(Error::NotSymmetric { row: a, col: b });
                }
            }
        }
        let names = coordinate_names(dim);
        let flat: Vec<Expression> = entries.into_iter().flatten().collect();
        let mut dentries = Vec::with_capacity(dim * dim * dim);
        for c in 0..dim {
            for e in &flat {
                dentries.push(e.differentiate(&names[c]));
            }
        }
        Ok(MetricField {
            dim,
            alpha,
            entries: flat,
            dentries,
            domain,
            sigma,
            det_floor: DEFAULT_DET_FLOOR,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn domain(&self) -> &[[f64; 2]] {
        &self.domain
    }

    pub fn sigma(&self) -> Option<&Expression> {
        self.sigma.as_ref()
    }

    pub fn entries(&self) -> &[Expression] {
        &self.entries
    }

    pub fn entry(&self, a: usize, b: usize) -> &Expression {
        &self.entries[a * self.dim + b]
    }

    pub fn det_floor(&self) -> f64 {
        self.det_floor
    }

    pub fn set_det_floor(&mut self, floor: f64) {
        self.det_floor = floor;
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(&self.domain)
            .all(|(v, [lo, hi])| *v >= *lo && *v <= *hi)
    }

    /// Entrywise evaluation of the metric matrix.
    pub fn eval(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let m = self.dim;
        let mut out = DMatrix::zeros(m, m);
        for a in 0..m {
            for b in a..m {
                let v = self.entry(a, b).eval(x)?;
                out[(a, b)] = v;
                out[(b, a)] = v;
            }
        }
        Ok(out)
    }

    /// det g(x): exact cofactor expansion for m <= 4, LU above.
    pub fn det_at(&self, x: &[f64]) -> Result<f64> {
        Ok(linalg::det(&self.eval(x)?))
    }

    /// Partial derivatives of the entries: d g_ab / d x_c at x.
    fn entry_derivatives(&self, x: &[f64]) -> Result<Vec<f64>> {
        let m = self.dim;
        let mut out = vec![0.0; m * m * m];
        for c in 0..m {
            for a in 0..m {
                for b in a..m {
                    let v = self.dentries[c * m * m + a * m + b].eval(x)?;
                    out[c * m * m + a * m + b] = v;
                    out[c * m * m + b * m + a] = v;
                }
            }
        }
        Ok(out)
    }

    /// Locate a point of the singular set along `seed + t * direction` by
    /// bracketing the sign change of spow(det, alpha) (Brent), down to a
    /// residual of 1e-12 * scale in the alpha power.
    ///
    /// The alpha power is the simple root: the raw determinant vanishes to
    /// order 1/alpha and cannot be driven below the corresponding power of
    /// machine resolution when alpha != 1.
    pub fn locate_sigma(&self, seed: &[f64], direction: &[f64]) -> Result<Vec<f64>> {
        // restrict t in [-1, 1] to the part of the segment inside the box
        let mut t_lo = -1.0f64;
        let mut t_hi = 1.0f64;
        for i in 0..self.dim {
            let d = direction[i];
            if d.abs() < 1e-300 {
                continue;
            }
            let a = (self.domain[i][0] - seed[i]) / d;
            let b = (self.domain[i][1] - seed[i]) / d;
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            t_lo = t_lo.max(lo);
            t_hi = t_hi.min(hi);
        }
        if t_lo >= t_hi {
            return Err(Error::NoBracket);
        }

        let point_at = |t: f64| -> Vec<f64> {
            seed.iter()
                .zip(direction)
                .map(|(s, d)| s + t * d)
                .collect()
        };
        let alpha = self.alpha;
        let mut f = |t: f64| spow(self.det_at(&point_at(t))?, alpha);

        // pre-scan for the |f| scale
        let mut scale = 1.0f64;
        for i in 0..=64 {
            let t = t_lo + (t_hi - t_lo) * (i as f64) / 64.0;
            scale = scale.max(f(t)?.abs());
        }
        let ftol = 1e-12 * scale;
        let bracket = roots::scan_bracket(&mut f, t_lo, t_hi, 64, ftol)?;
        let root = roots::brent(&mut f, bracket, ftol, 300)?;
        Ok(point_at(root))
    }

    /// Kernel direction of g at a singular point, Euclidean-normalized,
    /// sign fixed so the last nonzero component is positive.
    pub fn radical_direction(&self, p: &[f64]) -> Result<RadicalDirection> {
        let g = self.eval(p)?;
        let (values, vectors) = linalg::sym_eigen_sorted(&g);
        let smallest = values[0].abs();
        let second = values[1].abs();
        let scale = values.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if second < 1e3 * smallest || second <= 1e-12 * scale {
            return Err(Error::RankDeficit { smallest, second });
        }
        let mut dir: Vec<f64> = vectors[0].iter().copied().collect();
        // sign convention: last component of magnitude > 1e-12 positive
        if let Some(last) = dir.iter().rev().find(|c| c.abs() > 1e-12) {
            if *last < 0.0 {
                for c in &mut dir {
                    *c = -*c;
                }
            }
        }
        let transverse = self.probe_transverse(p, &dir)?;
        Ok(RadicalDirection {
            direction: dir,
            kernel_eigenvalue: values[0],
            transverse,
        })
    }

    /// Rough two-rung check that det^[alpha] has nonzero slope along `dir`.
    fn probe_transverse(&self, p: &[f64], dir: &[f64]) -> Result<bool> {
        let mut max_slope = 0.0f64;
        for &h in &[1e-2, 5e-3] {
            for sign in [1.0, -1.0] {
                let x: Vec<f64> = p
                    .iter()
                    .zip(dir)
                    .map(|(pi, di)| pi + sign * h * di)
                    .collect();
                let f = spow(self.det_at(&x)?, self.alpha).unwrap_or(0.0);
                max_slope = max_slope.max((f / (sign * h)).abs());
            }
        }
        Ok(max_slope > 1e-4)
    }

    /// Probe alpha-transversality at a singular point along the radical
    /// direction with the metric's declared exponent.
    pub fn transversality_report(&self, p: &[f64]) -> Result<TransversalityReport> {
        self.transversality_report_with(p, self.alpha, &TransversalityConfig::default())
    }

    /// As [`transversality_report`](Self::transversality_report) with an
    /// explicit probe exponent (used by wrong-exponent controls).
    pub fn transversality_report_with(
        &self,
        p: &[f64],
        alpha: f64,
        cfg: &TransversalityConfig,
    ) -> Result<TransversalityReport> {
        let det_value = self.det_at(p)?;
        let radical = self.radical_direction(p)?;
        let n = &radical.direction;

        // one-sided slope ladders of f(t) = spow(det(p + t n), alpha);
        // f(0) is forced to zero: p sits on the singular set to root-finder
        // tolerance, and the residual would poison the Richardson table
        let slope_samples = |side: f64| -> Result<Vec<f64>> {
            let ladder = StepLadder::new(cfg.h0, cfg.steps);
            let mut out = Vec::with_capacity(cfg.steps);
            for h in ladder.values() {
                let t = side * h;
                let x: Vec<f64> = p.iter().zip(n).map(|(pi, ni)| pi + t * ni).collect();
                let f = spow(self.det_at(&x)?, alpha)?;
                out.push(f / t);
            }
            Ok(out)
        };

        let (right, right_err) = richardson(&slope_samples(1.0)?);
        let (left, left_err) = richardson(&slope_samples(-1.0)?);

        let scale = {
            let mut s = 0.0f64;
            for v in slope_samples(1.0)?.iter().chain(slope_samples(-1.0)?.iter()) {
                s = s.max(v.abs());
            }
            s.max(1e-300)
        };

        let right_converged = right_err <= (cfg.agree_rel * right.abs()).max(1e-9 * scale);
        let left_converged = left_err <= (cfg.agree_rel * left.abs()).max(1e-9 * scale);
        let mean = 0.5 * (left + right);
        let extension_c1 = right_converged
            && left_converged
            && (left - right).abs() <= cfg.agree_rel * mean.abs().max(1e-300);
        let differential_nonzero = mean.abs() > cfg.nonzero_floor * scale;

        let verdict = if extension_c1 && differential_nonzero {
            Verdict::Pass
        } else if !extension_c1 {
            Verdict::Fail(if right_converged && left_converged {
                format!("extension not C1: one-sided derivatives {left:.6} and {right:.6}")
            } else {
                "extension not C1: one-sided derivative diverges".to_string()
            })
        } else {
            Verdict::Fail(format!(
                "differential vanishes: |mean slope| = {:.3e}",
                mean.abs()
            ))
        };

        Ok(TransversalityReport {
            point: p.to_vec(),
            det_value,
            probe_direction: n.clone(),
            left_derivative: left,
            right_derivative: right,
            left_converged,
            right_converged,
            extension_c1,
            differential_nonzero,
            verdict,
        })
    }

    /// Inverse metric, guarded by the determinant floor.
    pub fn inverse_at(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let g = self.eval(x)?;
        let det = linalg::det(&g);
        if det.abs() <= self.det_floor {
            return Err(Error::NearSingular {
                det,
                floor: self.det_floor,
            });
        }
        linalg::inverse(&g)
    }

    /// Levi-Civita Christoffel symbols at a non-singular point.
    pub fn christoffel(&self, x: &[f64]) -> Result<Christoffels> {
        let m = self.dim;
        let ginv = self.inverse_at(x)?;
        let dg = self.entry_derivatives(x)?;
        let idx = |c: usize, a: usize, b: usize| c * m * m + a * m + b;
        let mut data = vec![0.0; m * m * m];
        for a in 0..m {
            for b in 0..m {
                for c in b..m {
                    let mut acc = 0.0;
                    for d in 0..m {
                        acc += ginv[(a, d)] * (dg[idx(b, d, c)] + dg[idx(c, d, b)] - dg[idx(d, b, c)]);
                    }
                    let v = 0.5 * acc;
                    data[a * m * m + b * m + c] = v;
                    data[a * m * m + c * m + b] = v;
                }
            }
        }
        Ok(Christoffels { dim: m, data })
    }

    /// Metric inner product u^T g(x) v.
    pub fn inner(&self, x: &[f64], u: &[f64], v: &[f64]) -> Result<f64> {
        let g = self.eval(x)?;
        let mut acc = 0.0;
        for a in 0..self.dim {
            for b in 0..self.dim {
                acc += u[a] * g[(a, b)] * v[b];
            }
        }
        Ok(acc)
    }

    /// Signature at a non-singular point: (negative, positive) eigenvalue
    /// counts.
    pub fn signature_at(&self, x: &[f64]) -> Result<(usize, usize)> {
        let g = self.eval(x)?;
        let (values, _) = linalg::sym_eigen_sorted(&g);
        let neg = values.iter().filter(|v| **v < 0.0).count();
        Ok((neg, values.len() - neg))
    }

    /// The normalized gradient field of a simple equation sigma.
    pub fn grad_sigma_field<'a>(&'a self, sigma: &Expression) -> GradSigmaField<'a> {
        let names = coordinate_names(self.dim);
        let dsigma = names.iter().map(|n| sigma.differentiate(n)).collect();
        GradSigmaField {
            metric: self,
            dsigma,
        }
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub enum Verdict {
    Pass,
    Fail(String),
}

impl Verdict {
    pub fn passed(&self) -> bool {
        matches!(self, Verdict::Pass)
    }
}

#[derive(Debug, Clone)]
pub struct RadicalDirection {
    pub direction: Vec<f64>,
    pub kernel_eigenvalue: f64,
    pub transverse: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct TransversalityConfig {
    pub h0: f64,
    pub steps: usize,
    pub agree_rel: f64,
    pub nonzero_floor: f64,
}

impl Default for TransversalityConfig {
    fn default() -> Self {
        TransversalityConfig {
            h0: 1e-2,
            steps: 11,
            agree_rel: 1e-3,
            nonzero_floor: 1e-6,
        }
    }
}

/// Outcome of the alpha-transversality probe at one singular point.
#[derive(Debug, Clone, Serialize)]
pub struct TransversalityReport {
    pub point: Vec<f64>,
    pub det_value: f64,
    pub probe_direction: Vec<f64>,
    pub left_derivative: f64,
    pub right_derivative: f64,
    pub left_converged: bool,
    pub right_converged: bool,
    pub extension_c1: bool,
    pub differential_nonzero: bool,
    pub verdict: Verdict,
}

/// Christoffel symbols Gamma^a_bc, symmetric in (b, c).
#[derive(Debug, Clone)]
pub struct Christoffels {
    dim: usize,
    data: Vec<f64>,
}

impl Christoffels {
    pub fn get(&self, a: usize, b: usize, c: usize) -> f64 {
        self.data[a * self.dim * self.dim + b * self.dim + c]
    }

    /// Contraction Gamma^a_bc v^b w^c for each a.
    pub fn contract(&self, v: &[f64], w: &[f64]) -> Vec<f64> {
        let m = self.dim;
        let mut out = vec![0.0; m];
        for a in 0..m {
            let mut acc = 0.0;
            for b in 0..m {
                for c in 0..m {
                    acc += self.get(a, b, c) * v[b] * w[c];
                }
            }
            out[a] = acc;
        }
        out
    }
}

/// A vector field with expression components over x1..xm.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    components: Vec<Expression>,
    jacobian: Vec<Expression>, // m*m: [a][c] = d X^a / d x_c
}

impl VectorField {
    pub fn new(components: Vec<Expression>) -> Result<Self> {
        let m = components.len();
        if m == 0 {
            return Err(Error::Dimension {
                expected: 1,
                found: 0,
            });
        }
        let names = coordinate_names(m);
        let mut jacobian = Vec::with_capacity(m * m);
        for comp in &components {
            for name in &names {
                jacobian.push(comp.differentiate(name));
            }
        }
        Ok(VectorField {
            components,
            jacobian,
        })
    }

    /// Constant coordinate field e_k in dimension m.
    pub fn coordinate_axis(m: usize, k: usize) -> Self {
        let names: Vec<String> = coordinate_names(m);
        let name_refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
        let components = (0..m)
            .map(|i| Expression::constant(if i == k { 1.0 } else { 0.0 }, &name_refs))
            .collect();
        VectorField::new(components).expect("nonempty components")
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Expression] {
        &self.components
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.components.iter().map(|c| c.eval(x)).collect()
    }

    /// Jacobian matrix [dX^a/dx_c] at x.
    pub fn jacobian_at(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let m = self.dim();
        let mut out = DMatrix::zeros(m, m);
        for a in 0..m {
            for c in 0..m {
                out[(a, c)] = self.jacobian[a * m + c].eval(x)?;
            }
        }
        Ok(out)
    }
}

/// G^sigma = grad(sigma) / <grad(sigma), grad(sigma)>, defined away from
/// the singular set and extended across it by symmetric extrapolation.
pub struct GradSigmaField<'a> {
    metric: &'a MetricField,
    dsigma: Vec<Expression>,
}

impl<'a> GradSigmaField<'a> {
    /// Evaluate the field off the singular set.
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        let m = self.metric.dim;
        let ginv = self.metric.inverse_at(x)?;
        let ds: Vec<f64> = self
            .dsigma
            .iter()
            .map(|e| e.eval(x))
            .collect::<Result<_>>()?;
        let mut grad = vec![0.0; m];
        for a in 0..m {
            for b in 0..m {
                grad[a] += ginv[(a, b)] * ds[b];
            }
        }
        let norm2: f64 = grad.iter().zip(&ds).map(|(g, d)| g * d).sum();
        if norm2.abs() < 1e-14 {
            return Err(Error::ZeroGradient);
        }
        Ok(grad.iter().map(|g| g / norm2).collect())
    }

    /// Euclidean gradient direction of sigma, used as the transversal
    /// probe line for extension work.
    fn probe_direction(&self, x: &[f64]) -> Result<Vec<f64>> {
        let ds: Vec<f64> = self
            .dsigma
            .iter()
            .map(|e| e.eval(x))
            .collect::<Result<_>>()?;
        let n = linalg::norm(&ds);
        if n < 1e-12 {
            return Err(Error::ZeroGradient);
        }
        Ok(ds.iter().map(|d| d / n).collect())
    }

    /// Evaluate the field with symmetric extrapolation when x falls inside
    /// the near-singular band.
    pub fn eval_extended(&self, x: &[f64]) -> Result<Vec<f64>> {
        let det = self.metric.det_at(x)?;
        if det.abs() > self.metric.det_floor {
            return self.eval(x);
        }
        let u = self.probe_direction(x)?;
        let m = self.metric.dim;
        // symmetric means at shrinking offsets extrapolated to the surface
        let mut per_component: Vec<Vec<f64>> = vec![Vec::new(); m];
        for j in 0..5 {
            let s = 2e-2 * 0.5f64.powi(j);
            let xp: Vec<f64> = x.iter().zip(&u).map(|(xi, ui)| xi + s * ui).collect();
            let xm: Vec<f64> = x.iter().zip(&u).map(|(xi, ui)| xi - s * ui).collect();
            let dp = self.metric.det_at(&xp)?;
            let dm = self.metric.det_at(&xm)?;
            if dp.abs() <= self.metric.det_floor || dm.abs() <= self.metric.det_floor {
                continue;
            }
            let gp = self.eval(&xp)?;
            let gm = self.eval(&xm)?;
            for i in 0..m {
                per_component[i].push(0.5 * (gp[i] + gm[i]));
            }
        }
        if per_component[0].len() < 3 {
            return Err(Error::ExtensionFailed {
                detail: "not enough valid offsets outside the singular band".to_string(),
            });
        }
        let mut out = vec![0.0; m];
        for i in 0..m {
            let (value, _err) = richardson(&per_component[i]);
            out[i] = value;
        }
        Ok(out)
    }

    /// Check that both one-sided limits of the field exist and agree at a
    /// singular point.
    pub fn extension_check(&self, p: &[f64]) -> Result<ExtensionReport> {
        let u = self.probe_direction(p)?;
        let m = self.metric.dim;
        let mut sides = Vec::with_capacity(2);
        for sign in [-1.0, 1.0] {
            let mut per_component: Vec<Vec<f64>> = vec![Vec::new(); m];
            for j in 0..7 {
                let s = sign * 2e-2 * 0.5f64.powi(j);
                let x: Vec<f64> = p.iter().zip(&u).map(|(pi, ui)| pi + s * ui).collect();
                if self.metric.det_at(&x)?.abs() <= self.metric.det_floor {
                    continue;
                }
                let g = self.eval(&x)?;
                for i in 0..m {
                    per_component[i].push(g[i]);
                }
            }
            if per_component[0].len() < 3 {
                return Err(Error::ExtensionFailed {
                    detail: "probe ladder fell inside the singular band".to_string(),
                });
            }
            let mut limit = vec![0.0; m];
            let mut max_err = 0.0f64;
            for i in 0..m {
                let (value, err) = richardson(&per_component[i]);
                limit[i] = value;
                max_err = max_err.max(err);
            }
            sides.push((limit, max_err));
        }
        let (left, left_err) = sides.remove(0);
        let (right, right_err) = sides.remove(0);
        let scale = left
            .iter()
            .chain(&right)
            .fold(0.0f64, |acc, v| acc.max(v.abs()))
            .max(1e-300);
        let disagreement = left
            .iter()
            .zip(&right)
            .fold(0.0f64, |acc, (l, r)| acc.max((l - r).abs()));
        let converged = left_err <= 1e-3 * scale && right_err <= 1e-3 * scale;
        let agree = converged && disagreement <= 1e-3 * scale;
        Ok(ExtensionReport {
            left,
            right,
            disagreement,
            converged,
            agree,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExtensionReport {
    pub left: Vec<f64>,
    pub right: Vec<f64>,
    pub disagreement: f64,
    pub converged: bool,
    pub agree: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn metric(alpha: f64, rows: &[&[&str]], half_width: f64) -> MetricField {
        let dim = rows.len();
        let names = coordinate_names(dim);
        let name_refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
        let entries = rows
            .iter()
            .map(|row| {
                row.iter()
                    .map(|src| Expression::parse(src, &name_refs).unwrap())
                    .collect()
            })
            .collect();
        let domain = vec![[-half_width, half_width]; dim];
        MetricField::new(alpha, entries, domain, None).unwrap()
    }

    fn kossowski() -> MetricField {
        metric(1.0, &[&["1", "0"], &["0", "-x2"]], 1.0)
    }

    fn discussion1() -> MetricField {
        metric(
            1.0,
            &[
                &["1", "spow(x2, 0.5)"],
                &["spow(x2, 0.5)", "2*x2"],
            ],
            1.0,
        )
    }

    fn normal_form(alpha: f64) -> MetricField {
        let g22 = format!("spow(x2, {})", 1.0 / alpha);
        let g22: &str = &g22;
        metric(alpha, &[&["1", "0"], &["0", g22]], 1.0)
    }

    fn euclid() -> MetricField {
        metric(1.0, &[&["1", "0"], &["0", "1"]], 4.0)
    }

    #[test]
    fn eval_examples() {
        let g = kossowski().eval(&[0.5, 0.25]).unwrap();
        assert_eq!(g[(0, 0)], 1.0);
        assert_eq!(g[(0, 1)], 0.0);
        assert_eq!(g[(1, 1)], -0.25);

        let g = discussion1().eval(&[0.0, 1.0]).unwrap();
        assert_eq!(g[(0, 0)], 1.0);
        assert_eq!(g[(0, 1)], 1.0);
        assert_eq!(g[(1, 0)], 1.0);
        assert_eq!(g[(1, 1)], 2.0);

        let g = euclid().eval(&[0.3, -0.7]).unwrap();
        assert_eq!(g[(0, 0)], 1.0);
        assert_eq!(g[(1, 1)], 1.0);
    }

    #[test]
    fn asymmetric_entries_rejected() {
        let names = ["x1", "x2"];
        let entries = vec![
            vec![
                Expression::parse("1", &names).unwrap(),
                Expression::parse("x1", &names).unwrap(),
            ],
            vec![
                Expression::parse("x2", &names).unwrap(),
                Expression::parse("1", &names).unwrap(),
            ],
        ];
        let err = MetricField::new(1.0, entries, vec![[-1.0, 1.0]; 2], None).unwrap_err();
        assert!(matches!(err, Error::NotSymmetric { .. }));
    }

    #[test]
    fn det_examples() {
        assert!((kossowski().det_at(&[0.5, 0.25]).unwrap() + 0.25).abs() < 1e-15);
        // 2y - |y| at y = -1
        assert!((discussion1().det_at(&[0.0, -1.0]).unwrap() + 3.0).abs() < 1e-15);
        assert!((euclid().det_at(&[1.0, 1.0]).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn locate_sigma_examples() {
        let p = kossowski().locate_sigma(&[0.0, 0.5], &[0.0, 1.0]).unwrap();
        assert!(p[0].abs() < 1e-12 && p[1].abs() < 1e-12, "{p:?}");

        let p = discussion1()
            .locate_sigma(&[0.3, 0.5], &[0.0, 1.0])
            .unwrap();
        assert!((p[0] - 0.3).abs() < 1e-12 && p[1].abs() < 1e-12, "{p:?}");

        // seed already on the singular set
        let p = kossowski().locate_sigma(&[0.2, 0.0], &[0.0, 1.0]).unwrap();
        assert!((p[0] - 0.2).abs() < 1e-12 && p[1].abs() < 1e-12);

        let err = euclid().locate_sigma(&[0.0, 0.0], &[0.0, 1.0]).unwrap_err();
        assert!(matches!(err, Error::NoBracket));
    }

    #[test]
    fn radical_direction_examples() {
        let r = kossowski().radical_direction(&[0.0, 0.0]).unwrap();
        assert!(r.direction[0].abs() < 1e-12);
        assert!((r.direction[1] - 1.0).abs() < 1e-12);
        assert!(r.transverse);

        let r = discussion1().radical_direction(&[0.0, 0.0]).unwrap();
        assert!(r.direction[0].abs() < 1e-12);
        assert!((r.direction[1] - 1.0).abs() < 1e-12);

        // kernel residual |g v| stays tiny
        let m = normal_form(2.0);
        let p = m.locate_sigma(&[0.4, 0.5], &[0.0, 1.0]).unwrap();
        let r = m.radical_direction(&p).unwrap();
        let g = m.eval(&p).unwrap();
        for a in 0..2 {
            let mut acc = 0.0;
            for b in 0..2 {
                acc += g[(a, b)] * r.direction[b];
            }
            assert!(acc.abs() <= 1e-8, "residual {acc}");
        }
    }

    #[test]
    fn rank_deficit_detected() {
        // diag(x2, x2) has a two-dimensional kernel on x2 = 0
        let m = metric(1.0, &[&["x2", "0"], &["0", "x2"]], 1.0);
        assert!(matches!(
            m.radical_direction(&[0.0, 0.0]),
            Err(Error::RankDeficit { .. })
        ));
    }

    #[test]
    fn transversality_kossowski_passes() {
        let rep = kossowski().transversality_report(&[0.0, 0.0]).unwrap();
        assert!(rep.verdict.passed(), "{rep:?}");
        assert!((rep.left_derivative + 1.0).abs() < 1e-6);
        assert!((rep.right_derivative + 1.0).abs() < 1e-6);
    }

    #[test]
    fn transversality_discussion1_fails_with_onesided_slopes() {
        let rep = discussion1().transversality_report(&[0.0, 0.0]).unwrap();
        assert!(!rep.verdict.passed());
        assert!(!rep.extension_c1);
        assert!((rep.right_derivative - 1.0).abs() < 1e-3, "{rep:?}");
        assert!((rep.left_derivative - 3.0).abs() < 1e-3, "{rep:?}");
    }

    #[test]
    fn transversality_wrong_exponent_fails() {
        for alpha in [0.5, 1.0, 2.0] {
            let m = normal_form(alpha);
            let p = m.locate_sigma(&[0.0, 0.5], &[0.0, 1.0]).unwrap();
            let rep = m.transversality_report(&p).unwrap();
            assert!(rep.verdict.passed(), "alpha={alpha}: {rep:?}");

            let bad = m
                .transversality_report_with(&p, 2.0 * alpha, &TransversalityConfig::default())
                .unwrap();
            assert!(!bad.verdict.passed(), "alpha={alpha} doubled: {bad:?}");
        }
    }

    #[test]
    fn christoffel_examples() {
        let c = euclid().christoffel(&[0.7, -0.2]).unwrap();
        for a in 0..2 {
            for b in 0..2 {
                for d in 0..2 {
                    assert!(c.get(a, b, d).abs() < 1e-14);
                }
            }
        }

        // only nonzero symbol of the Lorentz-side model: 1/(2 x2)
        let x2 = 0.4;
        let c = kossowski().christoffel(&[0.0, x2]).unwrap();
        assert!((c.get(1, 1, 1) - 1.0 / (2.0 * x2)).abs() < 1e-12);
        assert!(c.get(0, 0, 0).abs() < 1e-13);
        assert!(c.get(0, 1, 1).abs() < 1e-13);
        assert!(c.get(1, 0, 1).abs() < 1e-13);

        // model form: 1/(2 alpha x2)
        for alpha in [0.5, 2.0] {
            let m = normal_form(alpha);
            let c = m.christoffel(&[0.0, x2]).unwrap();
            assert!(
                (c.get(1, 1, 1) - 1.0 / (2.0 * alpha * x2)).abs() < 1e-10,
                "alpha={alpha}"
            );
        }
    }

    #[test]
    fn christoffel_guard_near_singular() {
        assert!(matches!(
            kossowski().christoffel(&[0.0, 0.0]),
            Err(Error::NearSingular { .. })
        ));
    }

    #[test]
    fn inner_examples() {
        let m = normal_form(2.0);
        let s = 0.3;
        let v = m.inner(&[0.0, s], &[0.0, 1.0], &[0.0, 1.0]).unwrap();
        assert!((v - spow(s, 0.5).unwrap()).abs() < 1e-15);

        let v = m.inner(&[0.0, s], &[0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert_eq!(v, 0.0);

        let v = kossowski()
            .inner(&[0.0, 1.0], &[0.0, 1.0], &[0.0, 1.0])
            .unwrap();
        assert!((v + 1.0).abs() < 1e-15);
    }

    #[test]
    fn signature_partition() {
        let m = kossowski();
        // Lorentz side: det < 0
        let (neg, pos) = m.signature_at(&[0.0, 0.5]).unwrap();
        assert_eq!((neg, pos), (1, 1));
        assert!(m.det_at(&[0.0, 0.5]).unwrap() < 0.0);
        // Riemann side: det > 0
        let (neg, pos) = m.signature_at(&[0.0, -0.5]).unwrap();
        assert_eq!((neg, pos), (0, 2));
        assert!(m.det_at(&[0.0, -0.5]).unwrap() > 0.0);
    }

    #[test]
    fn grad_sigma_examples() {
        let names = ["x1", "x2"];
        let sigma = Expression::parse("x2", &names).unwrap();

        for alpha in [0.5, 1.0, 2.0] {
            let m = normal_form(alpha);
            let field = m.grad_sigma_field(&sigma);
            for x2 in [0.7, 0.2, -0.4] {
                let v = field.eval(&[0.1, x2]).unwrap();
                assert!(v[0].abs() < 1e-12, "alpha={alpha}");
                assert!((v[1] - 1.0).abs() < 1e-10, "alpha={alpha} x2={x2} got {v:?}");
            }
            let report = field.extension_check(&[0.0, 0.0]).unwrap();
            assert!(report.agree, "alpha={alpha}: {report:?}");
        }

        let m = euclid();
        let sigma1 = Expression::parse("x1", &names).unwrap();
        let field = m.grad_sigma_field(&sigma1);
        let v = field.eval(&[0.3, 0.8]).unwrap();
        assert!((v[0] - 1.0).abs() < 1e-12 && v[1].abs() < 1e-12);

        let m = kossowski();
        let field = m.grad_sigma_field(&sigma);
        let v = field.eval(&[0.2, 0.6]).unwrap();
        assert!(v[0].abs() < 1e-12 && (v[1] - 1.0).abs() < 1e-10, "{v:?}");
    }

    #[test]
    fn grad_sigma_cubed_does_not_extend() {
        let names = ["x1", "x2"];
        let sigma3 = Expression::parse("x2^3", &names).unwrap();
        let m = normal_form(1.0);
        let field = m.grad_sigma_field(&sigma3);
        match field.extension_check(&[0.0, 0.0]) {
            Ok(report) => assert!(!report.agree, "{report:?}"),
            Err(Error::ExtensionFailed { .. }) | Err(Error::ZeroGradient) => {}
            Err(other) => panic!("unexpected error {other:?}"),
        }
    }
}
