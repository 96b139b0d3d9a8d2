//! Construction and verification of normal coordinates around the
//! singular hypersurface.
//!
//! Given a radical geodesic field rho, the pipeline flows a chart from a
//! hypersurface patch, extracts the line profile psi from the speed
//! squared along each flow line, reparameterizes the lines by the signed
//! integral transform with r = 1/(2 alpha) and assembles the coordinate
//! map (u, t) -> (u, s). In the new coordinates the metric must become
//! diag(g_ij, spow(s, 1/alpha)); the verifier measures how closely it
//! does by pulling the metric back through exact line Jacobians (flowed
//! variational frames plus the analytic s-derivatives).

use serde::Serialize;

use crate::baldomero::singular_integral_fn;
use crate::error::{Error, Result};
use crate::expr::Expression;
use crate::geodesic::{
    flow_chart, integrate_flow, pregeodesic_residual, FlowChart, GeodesicTrace, LineFlow,
    SigmaPatch,
};
use crate::linalg;
use crate::metric::{coordinate_names, MetricField, VectorField, Verdict};
use crate::ode::{integrate, OdeOptions};
use crate::signed_power::{eps, spow};

#[derive(Debug, Clone)]
pub struct NormalChartConfig {
    /// Grid nodes per u axis.
    pub u_counts: Vec<usize>,
    /// Flow-time extent of the chart to each side of the hypersurface.
    pub t_extent: f64,
    /// Samples per line and side used for the psi ladder.
    pub psi_ladder: usize,
    /// Chart t samples per side.
    pub t_count: usize,
    pub ode_tol: f64,
    pub quad_rel: f64,
    /// Largest angle (radians) allowed between rho and the kernel
    /// direction on the hypersurface.
    pub radical_tol: f64,
    /// Largest pregeodesic residual allowed along rho lines.
    pub residual_tol: f64,
}

impl Default for NormalChartConfig {
    fn default() -> Self {
        NormalChartConfig {
            u_counts: vec![5],
            t_extent: 0.6,
            psi_ladder: 8,
            t_count: 8,
            ode_tol: 1e-11,
            quad_rel: 1e-11,
            radical_tol: 1e-6,
            residual_tol: 1e-6,
        }
    }
}

/// Extracted psi samples along one flow line.
#[derive(Debug, Clone, Serialize)]
pub struct PsiSamples {
    pub t: Vec<f64>,
    pub psi: Vec<f64>,
    pub psi0: f64,
}

/// Least-squares polynomial model of a smooth line profile on
/// [-extent, extent], fitted at Chebyshev nodes. It makes the singular
/// integrals int_0^t |tau|^r p(tau) dtau closed-form, which is what keeps
/// chart verification fast.
#[derive(Debug, Clone)]
pub struct ProfileFit {
    coeffs: Vec<f64>, // monomial coefficients in z = t / extent
    extent: f64,
    pub max_residual: f64,
}

impl ProfileFit {
    // an even node count keeps the nodes (and hence the profile samples)
    // away from t = 0 where the raw formula is 0/0
    const DEGREE: usize = 24;
    const NODES: usize = 40;

    fn fit(extent: f64, mut sample: impl FnMut(f64) -> Result<f64>) -> Result<ProfileFit> {
        let n = Self::NODES;
        let cols = Self::DEGREE + 1;
        let mut a = nalgebra::DMatrix::<f64>::zeros(n, cols);
        let mut b = nalgebra::DVector::<f64>::zeros(n);
        let mut nodes = Vec::with_capacity(n);
        for j in 0..n {
            let z = (std::f64::consts::PI * (2.0 * j as f64 + 1.0) / (2.0 * n as f64)).cos();
            nodes.push(z);
            let mut p = 1.0;
            for k in 0..cols {
                a[(j, k)] = p;
                p *= z;
            }
            b[j] = sample(z * extent)?;
        }
        let svd = a.svd(true, true);
        let coeffs = svd.solve(&b, 1e-14).map_err(|e| Error::BadParams {
            detail: format!("profile fit failed: {e}"),
        })?;
        let fit = ProfileFit {
            coeffs: coeffs.iter().copied().collect(),
            extent,
            max_residual: 0.0,
        };
        // residual probed between the fit nodes, away from the 0/0 point
        let mut max_residual = 0.0f64;
        for w in nodes.windows(2) {
            let z = 0.5 * (w[0] + w[1]);
            if z.abs() < 0.02 {
                continue;
            }
            let exact = sample(z * extent)?;
            max_residual = max_residual.max((fit.eval(z * extent) - exact).abs());
        }
        Ok(ProfileFit {
            max_residual,
            ..fit
        })
    }

    pub fn eval(&self, t: f64) -> f64 {
        let z = t / self.extent;
        let mut acc = 0.0;
        for c in self.coeffs.iter().rev() {
            acc = acc * z + c;
        }
        acc
    }

    /// int_0^t |tau|^r p(tau) dtau, exact for the polynomial model.
    pub fn singular_integral(&self, r: f64, t: f64) -> f64 {
        if t == 0.0 {
            return 0.0;
        }
        let z = t / self.extent;
        let za = z.abs();
        // per monomial: int_0^z |zeta|^r zeta^k dzeta
        //   = eps(z)^(k+1) |z|^(k+r+1) / (k+r+1)
        let sign = if z >= 0.0 { 1.0 } else { -1.0 };
        let mut acc = 0.0;
        let mut zpow = za.powf(r + 1.0);
        let mut alt = sign; // eps^(k+1) for k = 0
        for (k, c) in self.coeffs.iter().enumerate() {
            acc += c * alt * zpow / (k as f64 + r + 1.0);
            zpow *= za;
            alt *= sign;
        }
        self.extent.powf(r + 1.0) * acc
    }
}

/// One chart line: the dense flow with its variational frame, the psi
/// ladder, the fitted profiles and the sampled reparameterization s(t).
#[derive(Debug, Clone)]
pub struct ChartLine {
    pub u: Vec<f64>,
    pub base: Vec<f64>,
    pub psi: PsiSamples,
    /// (t, s, ds/dt) at the chart t grid.
    pub s_samples: Vec<(f64, f64, f64)>,
    pub(crate) flow: LineFlow,
    psi_fit: ProfileFit,
    dpsi_du_fits: Vec<ProfileFit>,
}

/// Fit residual above which the closed-form integral path is abandoned in
/// favor of adaptive quadrature on the exact profile.
const FIT_TRUST: f64 = 1e-8;

/// The assembled coordinate transform (u, t) -> (u, s).
#[derive(Debug)]
pub struct ChartTransform {
    pub alpha: f64,
    pub r: f64,
    pub base_chart: FlowChart,
    pub lines: Vec<ChartLine>,
    pub config: NormalChartConfig,
    field: VectorField,
    speed2_field: Expression,
    speed2_gradient: Vec<Expression>,
}

/// Serializable snapshot of a chart transform (grid data only).
#[derive(Debug, Clone, Serialize)]
pub struct ChartExport {
    pub alpha: f64,
    pub r: f64,
    pub t_grid: Vec<f64>,
    pub lines: Vec<ChartLineExport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChartLineExport {
    pub u: Vec<f64>,
    pub base: Vec<f64>,
    pub psi: PsiSamples,
    /// (t, s, ds/dt) samples of the reparameterization.
    pub s_of_t: Vec<(f64, f64, f64)>,
    pub points: Vec<Vec<f64>>,
}

/// Verification outcome on the (line, s) grid.
#[derive(Debug, Clone, Serialize)]
pub struct NormalChartReport {
    pub grid: Vec<(usize, f64)>,
    pub gmm_error: f64,
    pub gim_error: f64,
    pub gij_posdef: bool,
    pub verdict: Verdict,
}

/// Synchronization deviation report: max |sigma(flow_t(p)) - t|.
#[derive(Debug, Clone, Serialize)]
pub struct SyncReport {
    pub max_deviation: f64,
    pub samples: usize,
}

/// The scalar field <X, X> as one expression over x1..xm.
pub fn speed_squared_field(metric: &MetricField, field: &VectorField) -> Result<Expression> {
    let m = metric.dim();
    let mut total: Option<Expression> = None;
    for a in 0..m {
        for b in 0..m {
            let term = metric
                .entry(a, b)
                .checked_mul(&field.components()[a])?
                .checked_mul(&field.components()[b])?;
            total = Some(match total {
                Some(acc) => acc.checked_add(&term)?,
                None => term,
            });
        }
    }
    Ok(total.expect("dim >= 2"))
}

/// Cumulative metric arclength along a one-sided trace, anchored at the
/// trace start.
#[derive(Debug, Clone, Serialize)]
pub struct MonotoneMap {
    pub t: Vec<f64>,
    pub s: Vec<f64>,
}

impl MonotoneMap {
    /// Inverse lookup by monotone linear interpolation.
    pub fn invert(&self, s: f64) -> f64 {
        let n = self.s.len();
        if s <= self.s[0] {
            return self.t[0];
        }
        if s >= self.s[n - 1] {
            return self.t[n - 1];
        }
        let mut lo = 0;
        let mut hi = n - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.s[mid] <= s {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let w = (s - self.s[lo]) / (self.s[hi] - self.s[lo]);
        self.t[lo] + w * (self.t[hi] - self.t[lo])
    }
}

/// Reparameterize a one-sided trace by metric arclength:
/// s(t) = integral of sqrt(|<v, v>|) from the trace start.
pub fn arclength_reparam(metric: &MetricField, trace: &GeodesicTrace) -> Result<MonotoneMap> {
    let dense = trace.dense().ok_or(Error::BadParams {
        detail: "arclength reparameterization needs a dense trace".to_string(),
    })?;
    let m = metric.dim();
    // one-sided sign check on the sampled speeds
    let mut sign = 0.0f64;
    for (x, v) in trace.points.iter().zip(&trace.velocities) {
        let q = metric.inner(x, v, v)?;
        if q == 0.0 {
            continue;
        }
        if sign == 0.0 {
            sign = q.signum();
        } else if q.signum() != sign {
            return Err(Error::SignChange { t: 0.0 });
        }
    }
    let mut speed = |tau: f64| -> Result<f64> {
        let x = dense.eval(tau);
        let v = dense.eval_derivative(tau);
        Ok(metric.inner(&x[..m], &v[..m], &v[..m])?.abs().sqrt())
    };
    let mut s = Vec::with_capacity(trace.params.len());
    s.push(0.0);
    for w in trace.params.windows(2) {
        let inc = crate::quadrature::adaptive_gk15(&mut speed, w[0], w[1], 1e-11, 1e-14, 20_000)?;
        let prev = *s.last().expect("seeded");
        s.push(prev + inc);
    }
    Ok(MonotoneMap {
        t: trace.params.clone(),
        s,
    })
}

/// Extract psi(t) = sqrt(eps(t) q(t)) |t|^(-1/(2 alpha)) along a flow line,
/// with psi(0) filled by polynomial extrapolation from both sides.
///
/// Fails with `NotSimpleEquation` when spow(q, alpha) does not vanish to
/// first order at t = 0 (the field is not compatible with alpha), and with
/// `NonPositivePsi` when the profile is not positive.
pub fn extract_psi(
    speed2: impl Fn(f64) -> Result<f64>,
    alpha: f64,
    extent: f64,
    ladder: usize,
) -> Result<PsiSamples> {
    let r = 1.0 / (2.0 * alpha);
    let ladder = ladder.max(3);
    let mut t_values = Vec::with_capacity(2 * ladder);
    for j in (1..=ladder).rev() {
        t_values.push(-extent * (j as f64) / (ladder as f64));
    }
    for j in 1..=ladder {
        t_values.push(extent * (j as f64) / (ladder as f64));
    }

    // simple-equation check: kappa(t) = spow(q, alpha) / t must approach a
    // positive constant; a power-law drift means the exponent is off
    for side in [-1.0, 1.0] {
        let h1 = side * extent / (ladder as f64);
        let h2 = h1 / 2.0;
        let k1 = spow(speed2(h1)?, alpha)? / h1;
        let k2 = spow(speed2(h2)?, alpha)? / h2;
        if k1 <= 0.0 || k2 <= 0.0 {
            return Err(Error::NotSimpleEquation {
                detail: format!("spow(speed2, alpha)/t is not positive near 0 (side {side})"),
            });
        }
        let drift = (k1 / k2).log2();
        if drift.abs() > 0.15 {
            return Err(Error::NotSimpleEquation {
                detail: format!(
                    "spow(speed2, alpha)/t drifts like a power law (exponent {drift:.3})"
                ),
            });
        }
    }

    let mut psi = Vec::with_capacity(t_values.len());
    for &t in &t_values {
        let q = speed2(t)?;
        let signed = eps(t) as f64 * q;
        if signed <= 0.0 {
            return Err(Error::NonPositivePsi { t, value: signed });
        }
        let value = signed.sqrt() * t.abs().powf(-r);
        psi.push(value);
    }

    // degree-3 least-squares fit for the value at t = 0
    let psi0 = poly_fit_at_zero(&t_values, &psi, 3);
    if psi0 <= 0.0 {
        return Err(Error::NonPositivePsi {
            t: 0.0,
            value: psi0,
        });
    }
    Ok(PsiSamples {
        t: t_values,
        psi,
        psi0,
    })
}

fn poly_fit_at_zero(t: &[f64], y: &[f64], degree: usize) -> f64 {
    let cols = degree + 1;
    let mut ata = nalgebra::DMatrix::<f64>::zeros(cols, cols);
    let mut atb = nalgebra::DVector::<f64>::zeros(cols);
    for (ti, yi) in t.iter().zip(y) {
        let mut row = Vec::with_capacity(cols);
        let mut p = 1.0;
        for _ in 0..cols {
            row.push(p);
            p *= ti;
        }
        for i in 0..cols {
            for j in 0..cols {
                ata[(i, j)] += row[i] * row[j];
            }
            atb[i] += row[i] * yi;
        }
    }
    match ata.lu().solve(&atb) {
        Some(c) => c[0],
        None => y[0],
    }
}

/// The reparameterization s(t) = spow((1+r) eps(t) I(t), 1/(1+r)) with
/// I(t) the singular integral of psi against |tau|^r, r = 1/(2 alpha).
pub fn alpha_parameterize(
    psi: impl FnMut(f64) -> Result<f64>,
    alpha: f64,
    t: f64,
    quad_rel: f64,
) -> Result<f64> {
    let r = 1.0 / (2.0 * alpha);
    let mut psi = psi;
    if t == 0.0 {
        return Ok(0.0);
    }
    let integral = singular_integral_fn(r, &mut psi, t, quad_rel)?;
    // the integral carries the sign of t; s is its signed root
    let w = (1.0 + r) * integral.abs();
    Ok(eps(t) as f64 * w.powf(1.0 / (1.0 + r)))
}

impl ChartTransform {
    fn line(&self, idx: usize) -> &ChartLine {
        &self.lines[idx]
    }

    /// Grid snapshot for JSON export.
    pub fn export(&self) -> ChartExport {
        ChartExport {
            alpha: self.alpha,
            r: self.r,
            t_grid: self.base_chart.t_grid.clone(),
            lines: self
                .lines
                .iter()
                .enumerate()
                .map(|(idx, line)| ChartLineExport {
                    u: line.u.clone(),
                    base: line.base.clone(),
                    psi: line.psi.clone(),
                    s_of_t: line.s_samples.clone(),
                    points: self.base_chart.points[idx].clone(),
                })
                .collect(),
        }
    }

    fn q(&self, idx: usize, t: f64) -> Result<f64> {
        self.speed2_field.eval(&self.line(idx).flow.point(t))
    }

    /// psi(t) along one line, with the extrapolated value inside a tiny
    /// guard interval around 0.
    pub fn psi_eval(&self, idx: usize, t: f64) -> Result<f64> {
        let line = self.line(idx);
        if t.abs() < 1e-9 {
            return Ok(line.psi.psi0);
        }
        let q = self.q(idx, t)?;
        let signed = eps(t) as f64 * q;
        if signed <= 0.0 {
            return Err(Error::NonPositivePsi { t, value: signed });
        }
        Ok(signed.sqrt() * t.abs().powf(-self.r))
    }

    /// d psi / d u_dir along a line, from the transported frame and the
    /// exact gradient of the speed-squared field.
    fn dpsi_du_at(&self, idx: usize, dir: usize, tau: f64) -> Result<f64> {
        let r = self.r;
        let line = self.line(idx);
        let x = line.flow.point(tau);
        let a = &line.flow.tangents(tau)[dir];
        let mut dq = 0.0;
        for (c, dqc) in self.speed2_gradient.iter().enumerate() {
            dq += dqc.eval(&x)? * a[c];
        }
        let q = self.speed2_field.eval(&x)?;
        let signed = eps(tau) as f64 * q;
        if signed <= 0.0 {
            return Err(Error::NonPositivePsi {
                t: tau,
                value: signed,
            });
        }
        // d/du of sqrt(eps q) |tau|^-r
        Ok(eps(tau) as f64 * dq * tau.abs().powf(-r) / (2.0 * signed.sqrt()))
    }

    /// int_0^t |tau|^r psi dtau, from the fitted profile when trustworthy.
    fn psi_integral(&self, idx: usize, t: f64) -> Result<f64> {
        let line = self.line(idx);
        if line.psi_fit.max_residual <= FIT_TRUST {
            return Ok(line.psi_fit.singular_integral(self.r, t));
        }
        let mut psi = |tau: f64| self.psi_eval(idx, tau);
        singular_integral_fn(self.r, &mut psi, t, self.config.quad_rel)
    }

    fn dpsi_integral(&self, idx: usize, dir: usize, t: f64) -> Result<f64> {
        let line = self.line(idx);
        let fit = &line.dpsi_du_fits[dir];
        if fit.max_residual <= FIT_TRUST {
            return Ok(fit.singular_integral(self.r, t));
        }
        let mut dpsi = |tau: f64| self.dpsi_du_at(idx, dir, tau);
        singular_integral_fn(self.r, &mut dpsi, t, self.config.quad_rel)
    }

    /// s(u_idx, t).
    pub fn s_of_t(&self, idx: usize, t: f64) -> Result<f64> {
        if t == 0.0 {
            return Ok(0.0);
        }
        let r = self.r;
        let integral = self.psi_integral(idx, t)?;
        let w = (1.0 + r) * integral.abs();
        Ok(eps(t) as f64 * w.powf(1.0 / (1.0 + r)))
    }

    /// ds/dt(u_idx, t), analytic in terms of psi and the integral.
    pub fn ds_dt(&self, idx: usize, t: f64) -> Result<f64> {
        let r = self.r;
        let beta = 1.0 / (1.0 + r);
        if t == 0.0 {
            return Ok(self.line(idx).psi.psi0.powf(beta));
        }
        let integral = self.psi_integral(idx, t)?;
        let w = (1.0 + r) * integral.abs();
        Ok(w.powf(beta - 1.0) * t.abs().powf(r) * self.psi_eval(idx, t)?)
    }

    /// ds/du_i(u_idx, t) at fixed t, via the transported variational frame.
    fn ds_du(&self, idx: usize, dir: usize, t: f64) -> Result<f64> {
        let r = self.r;
        let beta = 1.0 / (1.0 + r);
        if t == 0.0 {
            return Ok(0.0);
        }
        let integral = self.psi_integral(idx, t)?;
        let w = (1.0 + r) * integral.abs();
        let di_du = self.dpsi_integral(idx, dir, t)?;
        Ok(w.powf(beta - 1.0) * di_du)
    }

    /// t(u_idx, s) by Newton from the sampled table, Brent as fallback.
    pub fn t_of_s(&self, idx: usize, s: f64) -> Result<f64> {
        let line = self.line(idx);
        let mut t = {
            let samples = &line.s_samples;
            let mut guess = samples[0].0;
            let mut best = f64::INFINITY;
            for w in samples.windows(2) {
                let (t0, s0, _) = w[0];
                let (t1, s1, _) = w[1];
                if (s >= s0 && s <= s1) || (s <= s0 && s >= s1) {
                    let frac = if s1 != s0 { (s - s0) / (s1 - s0) } else { 0.5 };
                    guess = t0 + frac * (t1 - t0);
                    break;
                }
                let d = (s - s1).abs();
                if d < best {
                    best = d;
                    guess = t1;
                }
            }
            guess
        };
        for _ in 0..8 {
            let f = self.s_of_t(idx, t)? - s;
            if f.abs() < 1e-12 {
                return Ok(t);
            }
            let d = self.ds_dt(idx, t)?;
            if d <= 0.0 {
                break;
            }
            t -= f / d;
            let cap = self.config.t_extent;
            t = t.clamp(-cap, cap);
        }
        // Brent fallback on the monotone profile
        let extent = self.config.t_extent;
        let mut f = |tau: f64| Ok(self.s_of_t(idx, tau)? - s);
        let bracket = crate::roots::scan_bracket(&mut f, -extent, extent, 32, 1e-13)?;
        crate::roots::brent(&mut f, bracket, 1e-13, 200)
    }

    /// Transformed metric matrix at (u_idx, s), pulled back through the
    /// exact Jacobian of the chart map. At s = 0 only the tangential block
    /// is defined (by continuity); the returned matrix carries it.
    pub fn transformed_metric(
        &self,
        metric: &MetricField,
        idx: usize,
        s: f64,
    ) -> Result<nalgebra::DMatrix<f64>> {
        let m = metric.dim();
        let line = self.line(idx);
        if s == 0.0 {
            let g = metric.eval(&line.base)?;
            let tangents = line.flow.tangents(0.0);
            let mut out = nalgebra::DMatrix::zeros(m, m);
            for i in 0..m - 1 {
                for j in 0..m - 1 {
                    let mut acc = 0.0;
                    for a in 0..m {
                        for b in 0..m {
                            acc += tangents[i][a] * g[(a, b)] * tangents[j][b];
                        }
                    }
                    out[(i, j)] = acc;
                }
            }
            return Ok(out);
        }
        let t = self.t_of_s(idx, s)?;
        let x = line.flow.point(t);
        let g = metric.eval(&x)?;
        let vel = self.field.eval(&x)?;
        let sp = self.ds_dt(idx, t)?;
        let tangents = line.flow.tangents(t);

        // columns of dx/d(new coordinates)
        let mut cols: Vec<Vec<f64>> = Vec::with_capacity(m);
        for i in 0..m - 1 {
            let shift = self.ds_du(idx, i, t)? / sp;
            let col: Vec<f64> = (0..m).map(|a| tangents[i][a] - vel[a] * shift).collect();
            cols.push(col);
        }
        cols.push(vel.iter().map(|v| v / sp).collect());

        let mut out = nalgebra::DMatrix::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                let mut acc = 0.0;
                for a in 0..m {
                    for b in 0..m {
                        acc += cols[i][a] * g[(a, b)] * cols[j][b];
                    }
                }
                out[(i, j)] = acc;
            }
        }
        Ok(out)
    }
}

/// Build the normal chart of a radical geodesic field over a patch.
///
/// The field orientation is normalized so that positive flow time enters
/// the side where eps(t) <v, v> is positive.
pub fn build_normal_chart(
    metric: &MetricField,
    rho: &VectorField,
    patch: &SigmaPatch,
    config: NormalChartConfig,
) -> Result<ChartTransform> {
    let m = metric.dim();
    let alpha = metric.alpha();
    let r = 1.0 / (2.0 * alpha);

    // precondition 1: rho is radical along the patch
    let probe_nodes = patch.grid(&vec![3; m - 1]);
    for u in &probe_nodes {
        let p = patch.point(u)?;
        let kernel = metric.radical_direction(&p)?;
        let v = rho.eval(&p)?;
        let vn = linalg::norm(&v);
        if vn < 1e-12 {
            return Err(Error::NotRadical {
                angle: std::f64::consts::FRAC_PI_2,
                tol: config.radical_tol,
            });
        }
        let cosine = linalg::dot(&v, &kernel.direction) / vn;
        let angle = (1.0 - cosine.abs().min(1.0)).sqrt() * std::f64::consts::SQRT_2;
        if angle > config.radical_tol {
            return Err(Error::NotRadical {
                angle,
                tol: config.radical_tol,
            });
        }
    }

    // orientation normalization
    let field = {
        let center: Vec<f64> = patch
            .u_box()
            .iter()
            .map(|[lo, hi]| 0.5 * (lo + hi))
            .collect();
        let base = patch.point(&center)?;
        let trace = integrate_flow(
            rho,
            &base,
            [0.0, 0.2 * config.t_extent],
            config.ode_tol,
            5,
            None,
        )?;
        let tip = trace.points.last().expect("sampled");
        let vel = rho.eval(tip)?;
        let q = metric.inner(tip, &vel, &vel)?;
        if q < 0.0 {
            let names = coordinate_names(m);
            let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
            let minus_one = Expression::parse("-1", &refs).expect("literal");
            let comps = rho
                .components()
                .iter()
                .map(|c| c.checked_mul(&minus_one))
                .collect::<Result<Vec<_>>>()?;
            VectorField::new(comps)?
        } else {
            rho.clone()
        }
    };

    // precondition 2: rho lines are pregeodesic off the singular band
    let base_chart = flow_chart(
        &field,
        patch,
        config.t_extent,
        &config.u_counts,
        config.t_count,
        config.ode_tol,
    )?;
    for line in &base_chart.lines {
        let n = 2 * config.t_count + 1;
        let params: Vec<f64> = (0..n)
            .map(|k| config.t_extent * (2.0 * (k as f64) / ((n - 1) as f64) - 1.0))
            .collect();
        let points: Vec<Vec<f64>> = params.iter().map(|&t| line.point(t)).collect();
        let velocities = points
            .iter()
            .map(|x| field.eval(x))
            .collect::<Result<Vec<_>>>()?;
        let trace = GeodesicTrace::from_samples(params, points, velocities);
        let residuals = pregeodesic_residual(metric, &trace)?;
        for res in residuals.iter().flatten() {
            if *res > config.residual_tol {
                return Err(Error::NotGeodesicField {
                    residual: *res,
                    tol: config.residual_tol,
                });
            }
        }
    }

    let speed2_field = speed_squared_field(metric, &field)?;
    let names = coordinate_names(m);
    let speed2_gradient: Vec<Expression> = names
        .iter()
        .map(|n| speed2_field.differentiate(n))
        .collect();

    // per line: psi ladder and fitted profiles
    let mut lines = Vec::with_capacity(base_chart.lines.len());
    for flow in &base_chart.lines {
        let q_along = |t: f64| speed2_field.eval(&flow.point(t));
        let psi = extract_psi(q_along, alpha, config.t_extent, config.psi_ladder)?;

        let psi_at = |t: f64| -> Result<f64> {
            if t.abs() < 1e-9 {
                return Ok(psi.psi0);
            }
            let q = speed2_field.eval(&flow.point(t))?;
            let signed = eps(t) as f64 * q;
            if signed <= 0.0 {
                return Err(Error::NonPositivePsi { t, value: signed });
            }
            Ok(signed.sqrt() * t.abs().powf(-r))
        };
        let psi_fit = ProfileFit::fit(config.t_extent, psi_at)?;

        let mut dpsi_du_fits = Vec::with_capacity(m - 1);
        for dir in 0..m - 1 {
            let dpsi_at = |tau: f64| -> Result<f64> {
                let x = flow.point(tau);
                let a = &flow.tangents(tau)[dir];
                let mut dq = 0.0;
                for (c, dqc) in speed2_gradient.iter().enumerate() {
                    dq += dqc.eval(&x)? * a[c];
                }
                let q = speed2_field.eval(&x)?;
                let signed = eps(tau) as f64 * q;
                if signed <= 0.0 {
                    return Err(Error::NonPositivePsi {
                        t: tau,
                        value: signed,
                    });
                }
                Ok(eps(tau) as f64 * dq * tau.abs().powf(-r) / (2.0 * signed.sqrt()))
            };
            dpsi_du_fits.push(ProfileFit::fit(config.t_extent, dpsi_at)?);
        }

        lines.push(ChartLine {
            u: flow.u.clone(),
            base: flow.base.clone(),
            psi,
            s_samples: Vec::new(),
            flow: flow.clone(),
            psi_fit,
            dpsi_du_fits,
        });
    }

    let mut chart = ChartTransform {
        alpha,
        r,
        base_chart,
        lines,
        config,
        field,
        speed2_field,
        speed2_gradient,
    };

    // fill the s(t) tables and check monotonicity per line
    for idx in 0..chart.lines.len() {
        let mut samples = Vec::new();
        let t_grid: Vec<f64> = chart.base_chart.t_grid.clone();
        for &t in &t_grid {
            let s = chart.s_of_t(idx, t)?;
            let d = chart.ds_dt(idx, t)?;
            samples.push((t, s, d));
        }
        for w in samples.windows(2) {
            if w[1].1 <= w[0].1 {
                return Err(Error::NotSimpleEquation {
                    detail: format!("s(t) is not strictly increasing at t = {}", w[1].0),
                });
            }
        }
        chart.lines[idx].s_samples = samples;
    }
    Ok(chart)
}

/// Verify that the transformed metric has the normal form on a grid of
/// (line, s) samples with |s| above the band floor. The mixed entries on
/// the hypersurface itself are checked by one-sided limits.
pub fn verify_normal_chart(
    chart: &ChartTransform,
    metric: &MetricField,
    samples_per_side: usize,
    band_floor_frac: f64,
    tol: f64,
) -> Result<NormalChartReport> {
    let m = metric.dim();
    let mut grid = Vec::new();
    let mut gmm_error = 0.0f64;
    let mut gim_error = 0.0f64;
    let mut gij_posdef = true;

    for (idx, line) in chart.lines.iter().enumerate() {
        let s_plus = line.s_samples.last().expect("sampled").1;
        let s_minus = line.s_samples.first().expect("sampled").1;

        // tangential block on the hypersurface must be positive definite
        let g_sigma = chart.transformed_metric(metric, idx, 0.0)?;
        let block = g_sigma.view((0, 0), (m - 1, m - 1)).into_owned();
        let eig = block.symmetric_eigen();
        if eig.eigenvalues.iter().any(|l| *l <= 0.0) {
            gij_posdef = false;
        }

        for side in [-1.0f64, 1.0] {
            let s_max = if side > 0.0 { s_plus } else { -s_minus };
            let band = band_floor_frac * s_max;
            let mut near_sigma: Vec<(f64, Vec<f64>)> = Vec::new();
            for k in 0..samples_per_side {
                let frac = (k as f64) / ((samples_per_side - 1).max(1) as f64);
                let s = side * (band + (0.9 * s_max - band) * frac);
                let g = chart.transformed_metric(metric, idx, s)?;
                let target = spow(s, 1.0 / chart.alpha)?;
                gmm_error = gmm_error.max((g[(m - 1, m - 1)] - target).abs());
                let mut offdiag = Vec::with_capacity(m - 1);
                for i in 0..m - 1 {
                    gim_error = gim_error.max(g[(i, m - 1)].abs());
                    offdiag.push(g[(i, m - 1)]);
                }
                if k < 2 {
                    near_sigma.push((s, offdiag));
                }
                grid.push((idx, s));
            }
            // one-sided limit of the mixed entries onto the hypersurface
            if near_sigma.len() >= 2 {
                for i in 0..m - 1 {
                    let (s0, v0) = (near_sigma[0].0, near_sigma[0].1[i]);
                    let (s1, v1) = (near_sigma[1].0, near_sigma[1].1[i]);
                    let slope = (v1 - v0) / (s1 - s0);
                    let limit = v0 - slope * s0;
                    gim_error = gim_error.max(limit.abs());
                }
            }
        }
    }

    let verdict = if gmm_error <= tol && gim_error <= tol && gij_posdef {
        Verdict::Pass
    } else {
        Verdict::Fail(format!(
            "gmm_error {gmm_error:.3e}, gim_error {gim_error:.3e}, gij_posdef {gij_posdef} (tol {tol:.1e})"
        ))
    };
    Ok(NormalChartReport {
        grid,
        gmm_error,
        gim_error,
        gij_posdef,
        verdict,
    })
}

/// Max |sigma(flow_t(p)) - t| over hypersurface samples, for the
/// normalized-gradient field of sigma extended across the singular set.
pub fn synchronization_check(
    metric: &MetricField,
    sigma: &Expression,
    patch: &SigmaPatch,
    t_extent: f64,
    n_samples: usize,
    ode_tol: f64,
) -> Result<SyncReport> {
    let m = metric.dim();
    let field = metric.grad_sigma_field(sigma);
    let nodes = patch.grid(&vec![n_samples; m - 1]);
    let mut max_dev = 0.0f64;
    for u in &nodes {
        let p = patch.point(u)?;
        let report = field.extension_check(&p)?;
        if !report.agree {
            return Err(Error::ExtensionFailed {
                detail: format!(
                    "one-sided limits disagree by {:.3e} at {:?}",
                    report.disagreement, p
                ),
            });
        }
        let mut rhs = |_t: f64, y: &[f64]| field.eval_extended(y);
        let opts = OdeOptions::with_tol(ode_tol);
        for side in [1.0, -1.0] {
            let sol = integrate(
                &mut rhs,
                0.0,
                &p,
                side * t_extent,
                &opts,
                None::<&fn(f64, &[f64]) -> bool>,
            )?;
            for k in 1..=10 {
                let t = side * t_extent * (k as f64) / 10.0;
                let x = sol.eval(t);
                let dev = (sigma.eval(&x)? - t).abs();
                max_dev = max_dev.max(dev);
            }
        }
    }
    Ok(SyncReport {
        max_deviation: max_dev,
        samples: nodes.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::builtin_space;
    use std::sync::Arc;

    fn space(name: &str, kv: &[(&str, &str)]) -> crate::catalog::SpaceDescriptor {
        let params = kv
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        builtin_space(name, &params).unwrap()
    }

    fn patch_for(metric: &MetricField) -> SigmaPatch {
        SigmaPatch::det_graph(
            Arc::new(metric.clone()),
            vec![[-0.5, 0.5]; metric.dim() - 1],
            [-0.8, 0.8],
        )
    }

    fn quick_config() -> NormalChartConfig {
        NormalChartConfig {
            u_counts: vec![3],
            t_count: 6,
            psi_ladder: 6,
            ..Default::default()
        }
    }

    #[test]
    fn arclength_examples() {
        // constant speed: s(t) = t
        let e = space("euclidean", &[]);
        let rho = VectorField::coordinate_axis(2, 1);
        let trace = integrate_flow(&rho, &[0.0, 0.0], [0.0, 1.0], 1e-11, 11, None).unwrap();
        let map = arclength_reparam(&e.metric, &trace).unwrap();
        for (t, s) in map.t.iter().zip(&map.s) {
            assert!((s - t).abs() < 1e-10);
        }

        // g_mm = x_m on the positive side: s(t) = (2/3) t^(3/2)
        let nf = space("normal_form", &[("alpha", "1")]);
        let trace = integrate_flow(&rho, &[0.0, 0.0], [0.0, 1.0], 1e-11, 11, None).unwrap();
        let map = arclength_reparam(&nf.metric, &trace).unwrap();
        for (t, s) in map.t.iter().zip(&map.s) {
            assert!(
                (s - (2.0 / 3.0) * t.powf(1.5)).abs() < 1e-9,
                "t={t} s={s}"
            );
        }

        // constant g_mm = 4: s(t) = 2t, via a scaled flat metric
        let names = ["x1", "x2"];
        let four = MetricField::new(
            1.0,
            vec![
                vec![
                    Expression::parse("1", &names).unwrap(),
                    Expression::parse("0", &names).unwrap(),
                ],
                vec![
                    Expression::parse("0", &names).unwrap(),
                    Expression::parse("4", &names).unwrap(),
                ],
            ],
            vec![[-2.0, 2.0]; 2],
            None,
        )
        .unwrap();
        let trace = integrate_flow(&rho, &[0.0, 0.0], [0.0, 1.0], 1e-11, 6, None).unwrap();
        let map = arclength_reparam(&four, &trace).unwrap();
        for (t, s) in map.t.iter().zip(&map.s) {
            assert!((s - 2.0 * t).abs() < 1e-10);
        }

        // mixed-sign speed rejected
        let k = space("kossowski", &[]);
        let trace = integrate_flow(&rho, &[0.0, -0.5], [0.0, 1.0], 1e-11, 21, None).unwrap();
        assert!(matches!(
            arclength_reparam(&k.metric, &trace),
            Err(Error::SignChange { .. })
        ));
    }

    #[test]
    fn extract_psi_examples() {
        // normal form: psi = 1 for every alpha
        for alpha in [0.5, 1.0, 2.0] {
            let q = move |t: f64| spow(t, 1.0 / alpha);
            let psi = extract_psi(q, alpha, 0.6, 8).unwrap();
            for v in &psi.psi {
                assert!((v - 1.0).abs() < 1e-12, "alpha={alpha}");
            }
            assert!((psi.psi0 - 1.0).abs() < 1e-10);
        }

        // constant conformal factor 4: psi = 2
        let alpha = 2.0;
        let q = move |t: f64| Ok(4.0 * spow(t, 1.0 / alpha)?);
        let psi = extract_psi(q, alpha, 0.6, 8).unwrap();
        for v in &psi.psi {
            assert!((v - 2.0).abs() < 1e-12);
        }

        // doubled field: x_m = 2t, q = 4 spow(2t, 1/alpha),
        // psi = 2 * 2^(1/(2 alpha))
        let q = move |t: f64| Ok(4.0 * spow(2.0 * t, 1.0 / alpha)?);
        let psi = extract_psi(q, alpha, 0.6, 8).unwrap();
        let expected = 2.0 * 2f64.powf(1.0 / (2.0 * alpha));
        for v in &psi.psi {
            assert!((v - expected).abs() < 1e-12);
        }

        // exponent mismatch: q = spow(t, 2) probed with alpha = 1 drifts
        let q = |t: f64| spow(t, 2.0);
        assert!(matches!(
            extract_psi(q, 1.0, 0.6, 8),
            Err(Error::NotSimpleEquation { .. })
        ));
    }

    #[test]
    fn alpha_parameterize_examples() {
        for alpha in [0.5, 1.0, 2.0] {
            // psi = 1: the curve is already in the target parameterization
            for t in [-0.5, -0.1, 0.3, 0.6] {
                let s = alpha_parameterize(|_| Ok(1.0), alpha, t, 1e-12).unwrap();
                assert!((s - t).abs() < 1e-11, "alpha={alpha} t={t} s={s}");
            }
            // psi = c: linear scaling by c^(1/(1+r))
            let c = 1.7;
            let r = 1.0 / (2.0 * alpha);
            for t in [-0.4, 0.25] {
                let s = alpha_parameterize(|_| Ok(c), alpha, t, 1e-12).unwrap();
                let expected = c.powf(1.0 / (1.0 + r)) * t;
                assert!((s - expected).abs() < 1e-11);
            }
            assert_eq!(alpha_parameterize(|_| Ok(1.0), alpha, 0.0, 1e-12).unwrap(), 0.0);
        }
    }

    #[test]
    fn identity_chart_on_normal_form() {
        for alpha in [0.5, 1.0, 2.0] {
            let s = space("normal_form", &[("alpha", &alpha.to_string())]);
            let patch = patch_for(&s.metric);
            let chart =
                build_normal_chart(&s.metric, &s.fields["rho"], &patch, quick_config()).unwrap();
            // s(t) = t and psi = 1
            for line in &chart.lines {
                assert!((line.psi.psi0 - 1.0).abs() < 1e-9);
                for (t, s_val, dsdt) in &line.s_samples {
                    assert!((s_val - t).abs() < 1e-10, "alpha={alpha}");
                    assert!((dsdt - 1.0).abs() < 1e-9);
                }
            }
            let report = verify_normal_chart(&chart, &s.metric, 6, 0.08, 1e-10).unwrap();
            assert!(report.verdict.passed(), "alpha={alpha}: {report:?}");
            assert!(report.gmm_error < 1e-11, "alpha={alpha}: {report:?}");
            assert!(report.gim_error < 1e-11, "alpha={alpha}: {report:?}");
        }
    }

    #[test]
    fn kossowski_orientation_flip() {
        let s = space("kossowski", &[]);
        let patch = patch_for(&s.metric);
        let chart =
            build_normal_chart(&s.metric, &s.fields["rho"], &patch, quick_config()).unwrap();
        let report = verify_normal_chart(&chart, &s.metric, 6, 0.08, 1e-9).unwrap();
        assert!(report.verdict.passed(), "{report:?}");
    }

    #[test]
    fn wrong_alpha_fails() {
        // declared exponent doubled: the speed profile is no longer a
        // simple equation for it
        let nf = space("normal_form", &[("alpha", "1")]);
        let mut doubled_rows = Vec::new();
        for a in 0..2 {
            let mut row = Vec::new();
            for b in 0..2 {
                row.push(nf.metric.entry(a, b).clone());
            }
            doubled_rows.push(row);
        }
        let doubled = MetricField::new(
            2.0,
            doubled_rows,
            nf.metric.domain().to_vec(),
            None,
        )
        .unwrap();
        let patch = patch_for(&doubled);
        let err = build_normal_chart(&doubled, &nf.fields["rho"], &patch, quick_config())
            .unwrap_err();
        assert!(
            matches!(err, Error::NotSimpleEquation { .. }),
            "got {err:?}"
        );

        // verification against a wrong target exponent fails on gmm
        let s = space("normal_form", &[("alpha", "1")]);
        let patch = patch_for(&s.metric);
        let mut chart =
            build_normal_chart(&s.metric, &s.fields["rho"], &patch, quick_config()).unwrap();
        chart.alpha = 2.0;
        let report = verify_normal_chart(&chart, &s.metric, 6, 0.08, 1e-4).unwrap();
        assert!(!report.verdict.passed());
        assert!(report.gmm_error > 1e-2);
    }

    #[test]
    fn distorted_round_trip_recovers_normal_form() {
        for (alpha, seed) in [("1", "2"), ("2", "7")] {
            let s = space("distorted_normal", &[("alpha", alpha), ("seed", seed)]);
            let patch = patch_for(&s.metric);
            let chart = build_normal_chart(&s.metric, &s.fields["rho"], &patch, quick_config())
                .unwrap_or_else(|e| panic!("alpha={alpha} seed={seed}: {e}"));
            let report = verify_normal_chart(&chart, &s.metric, 6, 0.08, 1e-4).unwrap();
            assert!(
                report.verdict.passed(),
                "alpha={alpha} seed={seed}: {report:?}"
            );
        }
    }

    #[test]
    fn rescaled_field_gives_same_verdict() {
        let s = space("distorted_normal", &[("alpha", "1"), ("seed", "4")]);
        let patch = patch_for(&s.metric);
        for field in ["rho", "rho_scaled"] {
            let chart = build_normal_chart(&s.metric, &s.fields[field], &patch, quick_config())
                .unwrap_or_else(|e| panic!("{field}: {e}"));
            let report = verify_normal_chart(&chart, &s.metric, 6, 0.08, 1e-4).unwrap();
            assert!(report.verdict.passed(), "{field}: {report:?}");
        }
    }

    #[test]
    fn mixed_entry_space_fails_verification() {
        // the catalog space with determinant 2*x2 - abs(x2): the axis lines
        // are pregeodesic, so the chart builds, but the mixed entries stay
        // an order-one obstruction
        let s = space("discussion1", &[]);
        let patch = patch_for(&s.metric);
        match build_normal_chart(&s.metric, &s.fields["rho"], &patch, quick_config()) {
            Ok(chart) => {
                let report = verify_normal_chart(&chart, &s.metric, 6, 0.08, 1e-4).unwrap();
                assert!(!report.verdict.passed(), "{report:?}");
                assert!(report.gim_error > 0.05, "{report:?}");
            }
            Err(
                Error::NotGeodesicField { .. }
                | Error::NotSimpleEquation { .. }
                | Error::NonPositivePsi { .. },
            ) => {}
            Err(other) => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn non_radical_field_rejected() {
        let s = space("normal_form", &[("alpha", "1")]);
        let patch = patch_for(&s.metric);
        let e1 = VectorField::coordinate_axis(2, 0);
        let err = build_normal_chart(&s.metric, &e1, &patch, quick_config()).unwrap_err();
        assert!(matches!(err, Error::NotRadical { .. }));
    }

    #[test]
    fn synchronization_examples() {
        let s = space("normal_form", &[("alpha", "1")]);
        let patch = patch_for(&s.metric);
        let sigma = s.sigma.as_ref().unwrap();
        let report =
            synchronization_check(&s.metric, sigma, &patch, 0.5, 5, 1e-11).unwrap();
        assert!(report.max_deviation <= 1e-6, "{report:?}");

        // flat space: exact to integrator tolerance
        let e = space("euclidean", &[]);
        let names = ["x1", "x2"];
        let sigma2 = Expression::parse("x2", &names).unwrap();
        let patch = SigmaPatch::hyperplane(2, vec![[-0.5, 0.5]], 0.0);
        let report = synchronization_check(&e.metric, &sigma2, &patch, 0.5, 5, 1e-11).unwrap();
        assert!(report.max_deviation <= 1e-9, "{report:?}");

        // cubed equation has vanishing differential: extension fails
        let sigma3 = Expression::parse("x2^3", &names).unwrap();
        let patch = patch_for(&s.metric);
        let err = synchronization_check(&s.metric, &sigma3, &patch, 0.5, 3, 1e-11).unwrap_err();
        assert!(
            matches!(err, Error::ExtensionFailed { .. } | Error::ZeroGradient),
            "got {err:?}"
        );
    }
}
