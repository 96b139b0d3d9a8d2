//! Vector-field flows, geodesics off the singular set, pregeodesic
//! residuals and flow-box charts over a hypersurface patch.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;
use crate::metric::{MetricField, VectorField};
use crate::ode::{integrate, integrate_plain, splice_bidirectional, OdeOptions, OdeSolution};

/// Why an integration stopped before the end of its span.
#[derive(Debug, Clone, PartialEq)]
pub enum HaltReason {
    NearSigma,
}

#[derive(Debug, Clone)]
pub struct HaltInfo {
    pub t: f64,
    pub point: Vec<f64>,
    pub reason: HaltReason,
}

/// A sampled curve with parameter, positions and velocities; speed^2 and
/// residual columns are filled in by the metric-aware annotators.
#[derive(Debug, Clone)]
pub struct GeodesicTrace {
    pub params: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    pub velocities: Vec<Vec<f64>>,
    pub speed2: Option<Vec<f64>>,
    pub residuals: Option<Vec<Option<f64>>>,
    pub halted: Option<HaltInfo>,
    pub(crate) dense: Option<OdeSolution>,
}

impl GeodesicTrace {
    /// Build a trace from explicit samples (for example a coordinate line).
    pub fn from_samples(
        params: Vec<f64>,
        points: Vec<Vec<f64>>,
        velocities: Vec<Vec<f64>>,
    ) -> Self {
        GeodesicTrace {
            params,
            points,
            velocities,
            speed2: None,
            residuals: None,
            halted: None,
            dense: None,
        }
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Annotate with metric speed^2 per sample.
    pub fn with_speed2(mut self, metric: &MetricField) -> Result<Self> {
        let mut out = Vec::with_capacity(self.len());
        for (x, v) in self.points.iter().zip(&self.velocities) {
            out.push(metric.inner(x, v, v)?);
        }
        self.speed2 = Some(out);
        Ok(self)
    }

    pub(crate) fn dense(&self) -> Option<&OdeSolution> {
        self.dense.as_ref()
    }
}

fn sample_times(a: f64, b: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    (0..n)
        .map(|i| a + (b - a) * (i as f64) / ((n - 1) as f64))
        .collect()
}

fn outside(domain: &[[f64; 2]], x: &[f64]) -> bool {
    x.iter()
        .zip(domain)
        .any(|(v, [lo, hi])| *v < *lo || *v > *hi)
}

/// Integrate the flow of `field` from `p0` over `t_span`, sampling
/// `n_samples` points from the dense output.
pub fn integrate_flow(
    field: &VectorField,
    p0: &[f64],
    t_span: [f64; 2],
    tol: f64,
    n_samples: usize,
    domain: Option<&[[f64; 2]]>,
) -> Result<GeodesicTrace> {
    let mut rhs = |_t: f64, y: &[f64]| field.eval(y);
    let opts = OdeOptions::with_tol(tol);
    let sol = integrate_plain(&mut rhs, t_span[0], p0, t_span[1], &opts)?;
    if let Some(domain) = domain {
        for &t in &sample_times(t_span[0], sol.t_end(), 64.max(n_samples)) {
            let x = sol.eval(t);
            if outside(domain, &x) {
                return Err(Error::DomainExit { t, point: x });
            }
        }
    }
    let params = sample_times(t_span[0], sol.t_end(), n_samples);
    let mut points = Vec::with_capacity(params.len());
    let mut velocities = Vec::with_capacity(params.len());
    for &t in &params {
        let x = sol.eval(t);
        velocities.push(field.eval(&x)?);
        points.push(x);
    }
    Ok(GeodesicTrace {
        params,
        points,
        velocities,
        speed2: None,
        residuals: None,
        halted: None,
        dense: Some(sol),
    })
}

/// Integrate the geodesic equation from `(x0, v0)` over `t_span`,
/// halting cleanly when |det| falls to the metric's determinant floor.
pub fn integrate_geodesic(
    metric: &MetricField,
    x0: &[f64],
    v0: &[f64],
    t_span: [f64; 2],
    tol: f64,
    n_samples: usize,
) -> Result<GeodesicTrace> {
    let m = metric.dim();
    if x0.len() != m || v0.len() != m {
        return Err(Error::Dimension {
            expected: m,
            found: x0.len().min(v0.len()),
        });
    }
    let mut state = Vec::with_capacity(2 * m);
    state.extend_from_slice(x0);
    state.extend_from_slice(v0);

    let mut rhs = |t: f64, y: &[f64]| -> Result<Vec<f64>> {
        let (x, v) = y.split_at(m);
        if outside(metric.domain(), x) {
            return Err(Error::DomainExit {
                t,
                point: x.to_vec(),
            });
        }
        let gamma = metric.christoffel(x)?;
        let acc = gamma.contract(v, v);
        let mut dy = Vec::with_capacity(2 * m);
        dy.extend_from_slice(v);
        dy.extend(acc.iter().map(|a| -a));
        Ok(dy)
    };
    let guard = |_t: f64, y: &[f64]| -> bool {
        let x = &y[..m];
        match metric.det_at(x) {
            Ok(det) => det.abs() <= metric.det_floor(),
            Err(_) => true,
        }
    };
    let mut opts = OdeOptions::with_tol(tol);
    opts.stall_is_halt = true;
    let sol = integrate(&mut rhs, t_span[0], &state, t_span[1], &opts, Some(&guard))?;

    // a stall far away from the singular set is a genuine failure, not a
    // clean halt
    if let Some((t, y)) = &sol.halted {
        let det = metric.det_at(&y[..m])?;
        if det.abs() > 1e6 * metric.det_floor() {
            return Err(Error::StepFailure { t: *t });
        }
    }
    let halted = sol.halted.as_ref().map(|(t, y)| HaltInfo {
        t: *t,
        point: y[..m].to_vec(),
        reason: HaltReason::NearSigma,
    });
    let params = sample_times(t_span[0], sol.t_end(), n_samples);
    let mut points = Vec::with_capacity(params.len());
    let mut velocities = Vec::with_capacity(params.len());
    for &t in &params {
        let y = sol.eval(t);
        points.push(y[..m].to_vec());
        velocities.push(y[m..].to_vec());
    }
    let trace = GeodesicTrace {
        params,
        points,
        velocities,
        speed2: None,
        residuals: None,
        halted,
        dense: Some(sol),
    };
    trace.with_speed2(metric)
}

/// Pregeodesic residual per sample: the Euclidean norm of
/// (acc + Gamma(v, v)) projected orthogonally to v. Zero exactly when the
/// image of the curve is a geodesic line under some reparameterization.
/// Samples inside the determinant floor are skipped (`None`).
pub fn pregeodesic_residual(
    metric: &MetricField,
    trace: &GeodesicTrace,
) -> Result<Vec<Option<f64>>> {
    let n = trace.len();
    let m = metric.dim();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let x = &trace.points[i];
        let det = metric.det_at(x)?;
        if det.abs() <= metric.det_floor() {
            out.push(None);
            continue;
        }
        let v = &trace.velocities[i];
        let acc: Vec<f64> = if n == 1 {
            vec![0.0; m]
        } else {
            let (j0, j1) = if i == 0 {
                (0, 1)
            } else if i == n - 1 {
                (n - 2, n - 1)
            } else {
                (i - 1, i + 1)
            };
            let dt = trace.params[j1] - trace.params[j0];
            (0..m)
                .map(|a| (trace.velocities[j1][a] - trace.velocities[j0][a]) / dt)
                .collect()
        };
        let gamma = metric.christoffel(x)?;
        let mut r = gamma.contract(v, v);
        for a in 0..m {
            r[a] += acc[a];
        }
        // remove the tangential part (Euclidean projection): geodesic
        // *lines* are parameterization-free
        let vv = linalg::dot(v, v);
        if vv > 1e-24 {
            let rv = linalg::dot(&r, v) / vv;
            for a in 0..m {
                r[a] -= rv * v[a];
            }
        }
        out.push(Some(linalg::norm(&r)));
    }
    Ok(out)
}

/// A parameterized patch of the singular hypersurface (or of a fixed
/// hyperplane) as a graph over a box in the first m-1 coordinates.
#[derive(Debug, Clone)]
pub enum SigmaPatch {
    /// The graph x_m = level over the u-box.
    Hyperplane {
        dim: usize,
        u_box: Vec<[f64; 2]>,
        level: f64,
    },
    /// The det = 0 locus of a metric, resolved along the last axis.
    DetGraph {
        metric: Arc<MetricField>,
        u_box: Vec<[f64; 2]>,
        xm_range: [f64; 2],
    },
}

impl SigmaPatch {
    pub fn hyperplane(dim: usize, u_box: Vec<[f64; 2]>, level: f64) -> Self {
        SigmaPatch::Hyperplane { dim, u_box, level }
    }

    pub fn det_graph(metric: Arc<MetricField>, u_box: Vec<[f64; 2]>, xm_range: [f64; 2]) -> Self {
        SigmaPatch::DetGraph {
            metric,
            u_box,
            xm_range,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            SigmaPatch::Hyperplane { dim, .. } => *dim,
            SigmaPatch::DetGraph { metric, .. } => metric.dim(),
        }
    }

    pub fn u_box(&self) -> &[[f64; 2]] {
        match self {
            SigmaPatch::Hyperplane { u_box, .. } => u_box,
            SigmaPatch::DetGraph { u_box, .. } => u_box,
        }
    }

    /// The patch point over u.
    pub fn point(&self, u: &[f64]) -> Result<Vec<f64>> {
        match self {
            SigmaPatch::Hyperplane { dim, level, .. } => {
                let mut p = Vec::with_capacity(*dim);
                p.extend_from_slice(u);
                p.push(*level);
                Ok(p)
            }
            SigmaPatch::DetGraph {
                metric, xm_range, ..
            } => {
                let m = metric.dim();
                let mut seed = Vec::with_capacity(m);
                seed.extend_from_slice(u);
                seed.push(0.5 * (xm_range[0] + xm_range[1]));
                let mut dir = vec![0.0; m];
                dir[m - 1] = 0.5 * (xm_range[1] - xm_range[0]);
                metric.locate_sigma(&seed, &dir)
            }
        }
    }

    /// Height of the graph over u (last coordinate of the patch point).
    fn height(&self, u: &[f64]) -> Result<f64> {
        Ok(*self.point(u)?.last().expect("dim >= 2"))
    }

    /// Tangent frame d(point)/du_i; exact in the first m-1 components,
    /// the graph slope from a five-point central rule.
    pub fn tangents(&self, u: &[f64]) -> Result<Vec<Vec<f64>>> {
        let m = self.dim();
        match self {
            SigmaPatch::Hyperplane { .. } => Ok((0..m - 1)
                .map(|i| {
                    let mut e = vec![0.0; m];
                    e[i] = 1.0;
                    e
                })
                .collect()),
            SigmaPatch::DetGraph { .. } => {
                let h = 1e-4;
                let mut out = Vec::with_capacity(m - 1);
                for i in 0..m - 1 {
                    let mut up = u.to_vec();
                    let mut um = u.to_vec();
                    up[i] = u[i] + h;
                    um[i] = u[i] - h;
                    let r3 = 0.5 * (self.height(&up)? - self.height(&um)?);
                    up[i] = u[i] + h / 2.0;
                    um[i] = u[i] - h / 2.0;
                    let r5 =
                        (4.0 / 3.0) * (self.height(&up)? - self.height(&um)?) - (1.0 / 3.0) * r3;
                    let slope = r5 / h;
                    let mut e = vec![0.0; m];
                    e[i] = 1.0;
                    e[m - 1] = slope;
                    out.push(e);
                }
                Ok(out)
            }
        }
    }

    /// Euclidean unit normal of the graph: (-grad h, 1) normalized.
    pub fn normal(&self, u: &[f64]) -> Result<Vec<f64>> {
        let m = self.dim();
        let tangents = self.tangents(u)?;
        let mut n = vec![0.0; m];
        n[m - 1] = 1.0;
        for (i, t) in tangents.iter().enumerate() {
            n[i] = -t[m - 1];
        }
        let len = linalg::norm(&n);
        Ok(n.iter().map(|c| c / len).collect())
    }

    /// Uniform grid nodes over the u-box, row-major.
    pub fn grid(&self, counts: &[usize]) -> Vec<Vec<f64>> {
        let ubox = self.u_box();
        let mut nodes = vec![Vec::new()];
        for (axis, count) in ubox.iter().zip(counts) {
            let count = (*count).max(1);
            let mut next = Vec::with_capacity(nodes.len() * count);
            for base in &nodes {
                for k in 0..count {
                    let frac = if count == 1 {
                        0.5
                    } else {
                        (k as f64) / ((count - 1) as f64)
                    };
                    let mut node = base.clone();
                    node.push(axis[0] + (axis[1] - axis[0]) * frac);
                    next.push(node);
                }
            }
            nodes = next;
        }
        nodes
    }
}

/// Dense flow along one line together with the variational frame
/// (patch tangents transported along the line).
#[derive(Debug, Clone)]
pub struct LineFlow {
    pub u: Vec<f64>,
    pub base: Vec<f64>,
    dim: usize,
    n_tangents: usize,
    sol: OdeSolution,
}

impl LineFlow {
    pub fn point(&self, t: f64) -> Vec<f64> {
        self.sol.eval(t)[..self.dim].to_vec()
    }

    /// Transported tangents A_i(t), i = 0..m-2.
    pub fn tangents(&self, t: f64) -> Vec<Vec<f64>> {
        let y = self.sol.eval(t);
        let m = self.dim;
        (0..self.n_tangents)
            .map(|i| y[m * (i + 1)..m * (i + 2)].to_vec())
            .collect()
    }

    pub fn extent(&self) -> f64 {
        self.sol.t_start().abs().max(self.sol.t_end().abs())
    }
}

/// Flow one line of `field` from `base` over [-extent, extent] carrying
/// the variational frame with initial columns `tangents`.
pub fn flow_line(
    field: &VectorField,
    u: &[f64],
    base: &[f64],
    tangents: &[Vec<f64>],
    extent: f64,
    tol: f64,
) -> Result<LineFlow> {
    let m = field.dim();
    let mut state = Vec::with_capacity(m * (1 + tangents.len()));
    state.extend_from_slice(base);
    for tan in tangents {
        state.extend_from_slice(tan);
    }
    let n_tangents = tangents.len();
    let mut rhs = |_t: f64, y: &[f64]| -> Result<Vec<f64>> {
        let x = &y[..m];
        let vel = field.eval(x)?;
        let jac = field.jacobian_at(x)?;
        let mut dy = Vec::with_capacity(y.len());
        dy.extend_from_slice(&vel);
        for col in 1..=n_tangents {
            let a = &y[m * col..m * (col + 1)];
            for row in 0..m {
                let mut acc = 0.0;
                for c in 0..m {
                    acc += jac[(row, c)] * a[c];
                }
                dy.push(acc);
            }
        }
        Ok(dy)
    };
    let opts = OdeOptions::with_tol(tol);
    let fwd = integrate_plain(&mut rhs, 0.0, &state, extent, &opts)?;
    let bwd = integrate_plain(&mut rhs, 0.0, &state, -extent, &opts)?;
    Ok(LineFlow {
        u: u.to_vec(),
        base: base.to_vec(),
        dim: m,
        n_tangents,
        sol: splice_bidirectional(fwd, bwd),
    })
}

/// Sampled flow-box chart Psi(u, t) of a field transverse to the patch.
#[derive(Debug, Clone)]
pub struct FlowChart {
    pub u_nodes: Vec<Vec<f64>>,
    pub t_grid: Vec<f64>,
    pub base_points: Vec<Vec<f64>>,
    /// points[u][t]
    pub points: Vec<Vec<Vec<f64>>>,
    /// jacobians[u][t] with columns [A_1 .. A_(m-1), X]
    pub jacobians: Vec<Vec<DMatrix<f64>>>,
    pub lines: Vec<LineFlow>,
    field: VectorField,
    patch: SigmaPatch,
    tol: f64,
}

/// Build the flow chart of `field` over `patch`: flow every grid node for
/// times in [-epsilon, epsilon] with 2*t_count+1 samples per line.
pub fn flow_chart(
    field: &VectorField,
    patch: &SigmaPatch,
    epsilon: f64,
    u_counts: &[usize],
    t_count: usize,
    tol: f64,
) -> Result<FlowChart> {
    let m = field.dim();
    if m != patch.dim() {
        return Err(Error::Dimension {
            expected: patch.dim(),
            found: m,
        });
    }
    let u_nodes = patch.grid(u_counts);
    let t_count = t_count.max(1);
    let t_grid: Vec<f64> = (-(t_count as i64)..=t_count as i64)
        .map(|k| epsilon * (k as f64) / (t_count as f64))
        .collect();

    let mut base_points = Vec::with_capacity(u_nodes.len());
    let mut points = Vec::with_capacity(u_nodes.len());
    let mut jacobians = Vec::with_capacity(u_nodes.len());
    let mut lines = Vec::with_capacity(u_nodes.len());

    for u in &u_nodes {
        let base = patch.point(u)?;
        let normal = patch.normal(u)?;
        let x_at_base = field.eval(&base)?;
        let speed = linalg::norm(&x_at_base);
        if speed < 1e-12 || linalg::dot(&x_at_base, &normal).abs() <= 1e-8 * speed {
            return Err(Error::NotTransverse { point: base });
        }
        let tangents = patch.tangents(u)?;
        let line = flow_line(field, u, &base, &tangents, epsilon, tol)?;

        let mut line_points = Vec::with_capacity(t_grid.len());
        let mut line_jacs = Vec::with_capacity(t_grid.len());
        for &t in &t_grid {
            let x = line.point(t);
            let cols = line.tangents(t);
            let vel = field.eval(&x)?;
            let mut jac = DMatrix::zeros(m, m);
            for (i, col) in cols.iter().enumerate() {
                for row in 0..m {
                    jac[(row, i)] = col[row];
                }
            }
            for row in 0..m {
                jac[(row, m - 1)] = vel[row];
            }
            line_points.push(x);
            line_jacs.push(jac);
        }
        base_points.push(base);
        points.push(line_points);
        jacobians.push(line_jacs);
        lines.push(line);
    }

    let chart = FlowChart {
        u_nodes,
        t_grid,
        base_points,
        points,
        jacobians,
        lines,
        field: field.clone(),
        patch: patch.clone(),
        tol,
    };
    chart.check_regularity()?;
    Ok(chart)
}

impl FlowChart {
    /// Orientation consistency and pairwise injectivity at grid resolution.
    fn check_regularity(&self) -> Result<()> {
        let mut reference = 0.0f64;
        for (ui, line) in self.jacobians.iter().enumerate() {
            for (ti, jac) in line.iter().enumerate() {
                let det = linalg::det(jac);
                if reference == 0.0 {
                    reference = det.signum();
                }
                if det == 0.0 || det.signum() != reference {
                    return Err(Error::FoldDetected {
                        detail: format!(
                            "jacobian determinant changes sign at node {ui}, t index {ti}"
                        ),
                    });
                }
            }
        }
        let flat: Vec<&Vec<f64>> = self.points.iter().flatten().collect();
        for i in 0..flat.len() {
            for j in (i + 1)..flat.len() {
                let d = linalg::norm(&linalg::sub(flat[i], flat[j]));
                if d < 1e-12 {
                    return Err(Error::FoldDetected {
                        detail: "two chart samples coincide".to_string(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Psi(u, 0) = u-point on the patch holds by construction; expose the
    /// map at arbitrary (u, t) by re-flowing from the patch.
    pub fn map(&self, u: &[f64], t: f64) -> Result<Vec<f64>> {
        let base = self.patch.point(u)?;
        if t == 0.0 {
            return Ok(base);
        }
        let mut rhs = |_s: f64, y: &[f64]| self.field.eval(y);
        let sol = integrate_plain(&mut rhs, 0.0, &base, t, &OdeOptions::with_tol(self.tol))?;
        Ok(sol.eval(t))
    }

    /// Inverse lookup x -> (u, t): nearest grid sample, then Newton
    /// refinement with the sampled Jacobian.
    pub fn invert(&self, x: &[f64]) -> Result<(Vec<f64>, f64)> {
        let m = x.len();
        let (mut best_u, mut best_t, mut best_d) = (0usize, 0usize, f64::INFINITY);
        for (ui, line) in self.points.iter().enumerate() {
            for (ti, p) in line.iter().enumerate() {
                let d = linalg::norm(&linalg::sub(p, x));
                if d < best_d {
                    best_d = d;
                    best_u = ui;
                    best_t = ti;
                }
            }
        }
        let mut u = self.u_nodes[best_u].clone();
        let mut t = self.t_grid[best_t];
        let jac_inv = linalg::inverse(&self.jacobians[best_u][best_t])?;
        for _ in 0..12 {
            let cur = self.map(&u, t)?;
            let r = linalg::sub(x, &cur);
            if linalg::norm(&r) < 1e-13 {
                break;
            }
            let mut delta = vec![0.0; m];
            for row in 0..m {
                let mut acc = 0.0;
                for c in 0..m {
                    acc += jac_inv[(row, c)] * r[c];
                }
                delta[row] = acc;
            }
            for i in 0..m - 1 {
                u[i] += delta[i];
            }
            t += delta[m - 1];
        }
        Ok((u, t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expression;
    use crate::metric::coordinate_names;

    fn field(comps: &[&str]) -> VectorField {
        let m = comps.len();
        let names = coordinate_names(m);
        let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
        VectorField::new(
            comps
                .iter()
                .map(|c| Expression::parse(c, &refs).unwrap())
                .collect(),
        )
        .unwrap()
    }

    fn metric2(alpha: f64, rows: &[&[&str]], half: f64) -> MetricField {
        let names = coordinate_names(rows.len());
        let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
        let entries = rows
            .iter()
            .map(|r| {
                r.iter()
                    .map(|s| Expression::parse(s, &refs).unwrap())
                    .collect()
            })
            .collect();
        MetricField::new(alpha, entries, vec![[-half, half]; rows.len()], None).unwrap()
    }

    #[test]
    fn constant_flow_is_straight() {
        let x = field(&["0", "1"]);
        let trace = integrate_flow(&x, &[0.0, 0.0], [0.0, 1.0], 1e-10, 11, None).unwrap();
        let last = trace.points.last().unwrap();
        assert!(last[0].abs() < 1e-12 && (last[1] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn rotation_flow_quarter_turn() {
        let x = field(&["-x2", "x1"]);
        let trace = integrate_flow(
            &x,
            &[1.0, 0.0],
            [0.0, std::f64::consts::FRAC_PI_2],
            1e-10,
            33,
            None,
        )
        .unwrap();
        let last = trace.points.last().unwrap();
        assert!(last[0].abs() < 1e-9 && (last[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn euclidean_geodesic_is_straight_with_zero_residual() {
        let m = metric2(1.0, &[&["1", "0"], &["0", "1"]], 4.0);
        let trace =
            integrate_geodesic(&m, &[0.0, 0.0], &[0.6, 0.8], [0.0, 2.0], 1e-10, 21).unwrap();
        assert!(trace.halted.is_none());
        let res = pregeodesic_residual(&m, &trace).unwrap();
        for r in res.iter().flatten() {
            assert!(*r <= 1e-12, "residual {r}");
        }
        // affine speed stays constant
        let speed2 = trace.speed2.as_ref().unwrap();
        for s in speed2 {
            assert!((s - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn lorentz_model_axis_geodesic_stays_on_axis() {
        let m = metric2(1.0, &[&["1", "0"], &["0", "-x2"]], 1.0);
        let trace =
            integrate_geodesic(&m, &[0.0, 0.5], &[0.0, 1.0], [0.0, 0.4], 1e-10, 21).unwrap();
        for p in &trace.points {
            assert!(p[0].abs() < 1e-10, "left the axis: {p:?}");
        }
        let res = pregeodesic_residual(&m, &trace).unwrap();
        for r in res.iter().flatten() {
            assert!(*r <= 1e-6, "residual {r}");
        }
    }

    #[test]
    fn geodesic_halts_near_singular_set() {
        let m = metric2(1.0, &[&["1", "0"], &["0", "-x2"]], 1.0);
        // start on the Lorentz side moving toward x2 = 0
        let trace =
            integrate_geodesic(&m, &[0.0, 0.5], &[0.0, -1.0], [0.0, 2.0], 1e-10, 21).unwrap();
        let halt = trace.halted.expect("must halt at the singular band");
        assert!(halt.point[1].abs() < 1e-3, "halted at {:?}", halt.point);
        assert_eq!(halt.reason, HaltReason::NearSigma);

        // starting inside the band halts immediately
        let trace =
            integrate_geodesic(&m, &[0.0, 0.0], &[0.0, 1.0], [0.0, 1.0], 1e-10, 5).unwrap();
        let halt = trace.halted.expect("immediate halt");
        assert_eq!(halt.t, 0.0);
    }

    #[test]
    fn affine_speed_conserved_in_fixed_signature_region() {
        let m = metric2(1.0, &[&["1", "0"], &["0", "-x2"]], 1.0);
        let tol = 1e-10;
        let trace =
            integrate_geodesic(&m, &[0.0, 0.8], &[0.3, -0.2], [0.0, 0.5], tol, 41).unwrap();
        assert!(trace.halted.is_none());
        let speed2 = trace.speed2.as_ref().unwrap();
        let first = speed2[0];
        for s in speed2 {
            assert!((s - first).abs() <= 10.0 * tol, "drift {}", (s - first).abs());
        }
    }

    #[test]
    fn residual_examples() {
        let m = metric2(1.0, &[&["1", "0"], &["0", "1"]], 8.0);
        let n = 201;
        // affinely parameterized straight line
        let params: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let points: Vec<Vec<f64>> = params.iter().map(|t| vec![*t, 2.0 * t]).collect();
        let velocities: Vec<Vec<f64>> = params.iter().map(|_| vec![1.0, 2.0]).collect();
        let trace = GeodesicTrace::from_samples(params.clone(), points, velocities);
        for r in pregeodesic_residual(&m, &trace).unwrap().iter().flatten() {
            assert!(*r < 1e-12);
        }

        // the same line reparameterized t -> t^3 (plus offset to keep the
        // velocity nonzero): still residual ~ 0
        let params2: Vec<f64> = (0..n).map(|i| 0.2 + i as f64 / (n - 1) as f64).collect();
        let points: Vec<Vec<f64>> = params2.iter().map(|t| vec![t.powi(3), 2.0 * t.powi(3)]).collect();
        let velocities: Vec<Vec<f64>> = params2
            .iter()
            .map(|t| vec![3.0 * t * t, 6.0 * t * t])
            .collect();
        let trace = GeodesicTrace::from_samples(params2, points, velocities);
        for r in pregeodesic_residual(&m, &trace).unwrap().iter().flatten() {
            assert!(*r < 1e-4, "reparameterized residual {r}");
        }

        // unit circle at unit speed: residual 1 everywhere
        let params3: Vec<f64> = (0..n)
            .map(|i| 2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64)
            .collect();
        let points: Vec<Vec<f64>> = params3.iter().map(|t| vec![t.cos(), t.sin()]).collect();
        let velocities: Vec<Vec<f64>> = params3.iter().map(|t| vec![-t.sin(), t.cos()]).collect();
        let trace = GeodesicTrace::from_samples(params3, points, velocities);
        for r in pregeodesic_residual(&m, &trace).unwrap().iter().flatten() {
            assert!((r - 1.0).abs() < 1e-2, "circle residual {r}");
        }
    }

    #[test]
    fn identity_flow_chart() {
        let x = field(&["0", "1"]);
        let patch = SigmaPatch::hyperplane(2, vec![[-1.0, 1.0]], 0.0);
        let chart = flow_chart(&x, &patch, 0.5, &[5], 4, 1e-10).unwrap();
        for (ui, u) in chart.u_nodes.iter().enumerate() {
            for (ti, t) in chart.t_grid.iter().enumerate() {
                let p = &chart.points[ui][ti];
                assert!((p[0] - u[0]).abs() < 1e-10);
                assert!((p[1] - t).abs() < 1e-10);
            }
            // Psi(u, 0) = base point
            assert!((chart.points[ui][4][1]).abs() < 1e-12);
        }
    }

    #[test]
    fn sheared_flow_chart_inverse_roundtrip() {
        let x = field(&["0.1", "1"]);
        let patch = SigmaPatch::hyperplane(2, vec![[-1.0, 1.0]], 0.0);
        let chart = flow_chart(&x, &patch, 0.5, &[5], 4, 1e-12).unwrap();
        // forward map is (u + 0.1 t, t)
        let p = chart.map(&[0.3], 0.25).unwrap();
        assert!((p[0] - (0.3 + 0.025)).abs() < 1e-10);
        assert!((p[1] - 0.25).abs() < 1e-10);
        // inverse for on-grid and off-grid points
        for (u0, t0) in [(0.5, 0.25), (0.12, -0.31), (-0.4, 0.0)] {
            let x_pt = chart.map(&[u0], t0).unwrap();
            let (u, t) = chart.invert(&x_pt).unwrap();
            assert!((u[0] - u0).abs() < 1e-8, "u {u:?} vs {u0}");
            assert!((t - t0).abs() < 1e-8, "t {t} vs {t0}");
        }
    }

    #[test]
    fn tangent_field_rejected() {
        // field tangent to the hyperplane at x1 = 0
        let x = field(&["1", "x1"]);
        let patch = SigmaPatch::hyperplane(2, vec![[-1.0, 1.0]], 0.0);
        let err = flow_chart(&x, &patch, 0.3, &[5], 3, 1e-10).unwrap_err();
        assert!(matches!(err, Error::NotTransverse { .. }));
    }

    #[test]
    fn det_graph_patch_locates_and_tilts() {
        // singular set along x2 = 0.3 x1: det of diag(1, x2 - 0.3 x1)
        let m = Arc::new(metric2(
            1.0,
            &[&["1", "0"], &["0", "x2 - 0.3*x1"]],
            2.0,
        ));
        let patch = SigmaPatch::det_graph(m, vec![[-0.5, 0.5]], [-1.0, 1.0]);
        let p = patch.point(&[0.4]).unwrap();
        assert!((p[1] - 0.12).abs() < 1e-10, "{p:?}");
        let t = patch.tangents(&[0.4]).unwrap();
        assert!((t[0][1] - 0.3).abs() < 1e-8, "{t:?}");
        let n = patch.normal(&[0.4]).unwrap();
        assert!((n[0] + 0.3 / (1.0f64 + 0.09).sqrt()).abs() < 1e-8);
    }
}
