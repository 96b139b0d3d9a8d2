//! Builtin example spaces used by tests, docs and the CLI.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::expr::{Expression, Node};
use crate::metric::{coordinate_names, MetricField, VectorField};

/// A named space: metric, distinguished vector fields, optional simple
/// equation and provenance notes.
#[derive(Debug, Clone)]
pub struct SpaceDescriptor {
    pub name: String,
    pub metric: MetricField,
    pub fields: BTreeMap<String, VectorField>,
    pub sigma: Option<Expression>,
    pub notes: String,
}

pub fn builtin_names() -> &'static [&'static str] {
    &[
        "euclidean",
        "kossowski",
        "esp",
        "normal_form",
        "discussion1",
        "distorted_normal",
    ]
}

/// Parameters accepted per space (all optional, documented defaults):
///
/// * `m` - dimension (default 2)
/// * `alpha` - transversality exponent (default 1)
/// * `hbar` - conformal factor expression for `esp` (default `2 + sin(x1)`)
/// * `amplitude`, `frequency`, `shear`, `shift`, `seed` - distortion shape
///   for `distorted_normal`
pub fn builtin_space(name: &str, params: &BTreeMap<String, String>) -> Result<SpaceDescriptor> {
    match name {
        "euclidean" => euclidean(params),
        "kossowski" => kossowski(params),
        "esp" => esp(params),
        "normal_form" => normal_form(params),
        "discussion1" => discussion1(params),
        "distorted_normal" => distorted_normal(params),
        _ => Err(Error::UnknownSpace {
            name: name.to_string(),
        }),
    }
}

fn get_f64(params: &BTreeMap<String, String>, key: &str, default: f64) -> Result<f64> {
    match params.get(key) {
        Some(raw) => raw.parse().map_err(|_| Error::BadParams {
            detail: format!("`{key}` must be a number, got `{raw}`"),
        }),
        None => Ok(default),
    }
}

fn get_usize(params: &BTreeMap<String, String>, key: &str, default: usize) -> Result<usize> {
    match params.get(key) {
        Some(raw) => raw.parse().map_err(|_| Error::BadParams {
            detail: format!("`{key}` must be an integer, got `{raw}`"),
        }),
        None => Ok(default),
    }
}

fn check_keys(params: &BTreeMap<String, String>, allowed: &[&str]) -> Result<()> {
    for key in params.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(Error::BadParams {
                detail: format!("unknown parameter `{key}` (allowed: {allowed:?})"),
            });
        }
    }
    Ok(())
}

fn parse_all(dim: usize, rows: Vec<Vec<String>>) -> Result<Vec<Vec<Expression>>> {
    let names = coordinate_names(dim);
    let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
    rows.into_iter()
        .map(|row| row.iter().map(|s| Expression::parse(s, &refs)).collect())
        .collect()
}

fn diag_rows(dim: usize, last: &str) -> Vec<Vec<String>> {
    (0..dim)
        .map(|a| {
            (0..dim)
                .map(|b| {
                    if a != b {
                        "0".to_string()
                    } else if a == dim - 1 {
                        last.to_string()
                    } else {
                        "1".to_string()
                    }
                })
                .collect()
        })
        .collect()
}

fn axis_field(dim: usize) -> VectorField {
    VectorField::coordinate_axis(dim, dim - 1)
}

fn sigma_xm(dim: usize) -> Expression {
    let names = coordinate_names(dim);
    let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
    Expression::parse(&format!("x{dim}"), &refs).expect("coordinate name")
}

fn euclidean(params: &BTreeMap<String, String>) -> Result<SpaceDescriptor> {
    check_keys(params, &["m"])?;
    let m = get_usize(params, "m", 2)?;
    let entries = parse_all(m, diag_rows(m, "1"))?;
    let metric = MetricField::new(1.0, entries, vec![[-4.0, 4.0]; m], None)?;
    Ok(SpaceDescriptor {
        name: "euclidean".to_string(),
        metric,
        fields: BTreeMap::new(),
        sigma: None,
        notes: format!("flat metric on R^{m}"),
    })
}

fn kossowski(params: &BTreeMap<String, String>) -> Result<SpaceDescriptor> {
    check_keys(params, &["m"])?;
    let m = get_usize(params, "m", 2)?;
    let sigma = sigma_xm(m);
    let entries = parse_all(m, diag_rows(m, &format!("-x{m}")))?;
    let metric = MetricField::new(1.0, entries, vec![[-1.0, 1.0]; m], Some(sigma.clone()))?;
    let mut fields = BTreeMap::new();
    fields.insert("rho".to_string(), axis_field(m));
    Ok(SpaceDescriptor {
        name: "kossowski".to_string(),
        metric,
        fields,
        sigma: Some(sigma),
        notes: "flat tangential block with g_mm = -x_m; alpha = 1".to_string(),
    })
}

fn esp(params: &BTreeMap<String, String>) -> Result<SpaceDescriptor> {
    check_keys(params, &["m", "alpha", "hbar"])?;
    let m = get_usize(params, "m", 2)?;
    let alpha = get_f64(params, "alpha", 1.0)?;
    if alpha <= 0.0 {
        return Err(Error::BadParams {
            detail: format!("alpha must be positive, got {alpha}"),
        });
    }
    let default_hbar = "2 + sin(x1)".to_string();
    let hbar = params.get("hbar").unwrap_or(&default_hbar);
    let gmm = format!("({hbar}) * spow(x{m}, {})", 1.0 / alpha);
    let sigma = sigma_xm(m);
    let entries = parse_all(m, diag_rows(m, &gmm))?;
    let metric = MetricField::new(alpha, entries, vec![[-1.0, 1.0]; m], Some(sigma.clone()))?;
    let mut fields = BTreeMap::new();
    fields.insert("rho".to_string(), axis_field(m));
    Ok(SpaceDescriptor {
        name: "esp".to_string(),
        metric,
        fields,
        sigma: Some(sigma),
        notes: format!("block metric with g_mm = hbar * spow(x_m, 1/alpha), hbar = {hbar}"),
    })
}

fn normal_form(params: &BTreeMap<String, String>) -> Result<SpaceDescriptor> {
    check_keys(params, &["m", "alpha"])?;
    let m = get_usize(params, "m", 2)?;
    let alpha = get_f64(params, "alpha", 1.0)?;
    if alpha <= 0.0 {
        return Err(Error::BadParams {
            detail: format!("alpha must be positive, got {alpha}"),
        });
    }
    let gmm = format!("spow(x{m}, {})", 1.0 / alpha);
    let sigma = sigma_xm(m);
    let entries = parse_all(m, diag_rows(m, &gmm))?;
    let metric = MetricField::new(alpha, entries, vec![[-1.0, 1.0]; m], Some(sigma.clone()))?;
    let mut fields = BTreeMap::new();
    fields.insert("rho".to_string(), axis_field(m));
    Ok(SpaceDescriptor {
        name: "normal_form".to_string(),
        metric,
        fields,
        sigma: Some(sigma),
        notes: format!("normal form with g_mm = spow(x_m, {})", 1.0 / alpha),
    })
}

fn discussion1(params: &BTreeMap<String, String>) -> Result<SpaceDescriptor> {
    check_keys(params, &[])?;
    let rows = vec![
        vec!["1".to_string(), "spow(x2, 0.5)".to_string()],
        vec!["spow(x2, 0.5)".to_string(), "2*x2".to_string()],
    ];
    let sigma = sigma_xm(2);
    let entries = parse_all(2, rows)?;
    let metric = MetricField::new(1.0, entries, vec![[-1.0, 1.0]; 2], Some(sigma.clone()))?;
    let mut fields = BTreeMap::new();
    fields.insert("rho".to_string(), axis_field(2));
    Ok(SpaceDescriptor {
        name: "discussion1".to_string(),
        metric,
        fields,
        sigma: Some(sigma),
        notes: "metric with mixed spow entries whose determinant is 2*x2 - abs(x2)".to_string(),
    })
}

/// The normal form pushed through a seeded two-step diffeomorphism with a
/// closed-form inverse: first the last coordinate is shifted and scaled by
/// smooth profiles of x1, then a constant shear mixes the coordinates.
fn distorted_normal(params: &BTreeMap<String, String>) -> Result<SpaceDescriptor> {
    check_keys(
        params,
        &["alpha", "amplitude", "frequency", "shear", "shift", "seed"],
    )?;
    let alpha = get_f64(params, "alpha", 1.0)?;
    if alpha <= 0.0 {
        return Err(Error::BadParams {
            detail: format!("alpha must be positive, got {alpha}"),
        });
    }
    let amplitude = get_f64(params, "amplitude", 0.2)?;
    if !(0.0..0.9).contains(&amplitude) {
        return Err(Error::BadParams {
            detail: format!("amplitude must be in [0, 0.9), got {amplitude}"),
        });
    }
    let frequency = get_f64(params, "frequency", 1.5)?;
    let seed = get_usize(params, "seed", 1)? as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phase_w: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let phase_v: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let freq_v: f64 = frequency * rng.gen_range(0.6..1.4);
    let default_shear = rng.gen_range(0.1..0.25) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    let shear = get_f64(params, "shear", default_shear)?;
    let shift = get_f64(params, "shift", 0.15)?;

    let names = coordinate_names(2);
    let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
    let parse = |src: &str| Expression::parse(src, &refs);

    // inverse map x = H(y) (the new coordinates are named x1, x2 again):
    //   z1 = x1 - shear*x2, x_old1 = z1,
    //   x_old2 = x2 / (1 + amplitude*w(z1)) - shift*v(z1)
    let z1 = format!("(x1 - {shear}*x2)");
    let w = format!("sin({frequency}*{z1} + {phase_w})");
    let v = format!("sin({freq_v}*{z1} + {phase_v})");
    let scale = format!("(1 + {amplitude}*{w})");
    let h1 = parse(&z1)?;
    let h2 = parse(&format!("x2/{scale} - {shift}*{v}"))?;

    // Jacobian of the inverse map
    let jh = [
        [h1.differentiate("x1"), h1.differentiate("x2")],
        [h2.differentiate("x1"), h2.differentiate("x2")],
    ];

    // pulled-back metric: old metric diag(1, spow(., 1/alpha)) composed
    // with H, contracted with the inverse Jacobian on both sides
    let g22_old = Expression::from_parts(
        names.clone(),
        Node::SPow(Box::new(h2.root().clone()), 1.0 / alpha),
    );
    let mut entries = Vec::new();
    for c in 0..2 {
        let mut row = Vec::new();
        for d in 0..2 {
            let term1 = jh[0][c].checked_mul(&jh[0][d])?;
            let term2 = g22_old.checked_mul(&jh[1][c])?.checked_mul(&jh[1][d])?;
            row.push(term1.checked_add(&term2)?);
        }
        entries.push(row);
    }
    // mirror the off-diagonal so the matrix is structurally symmetric
    entries[1][0] = entries[0][1].clone();

    // pushed radical field: columns of the forward Jacobian along the old
    // e_2 direction, composed with H. Forward map:
    //   y1 = x1 + shear*(x2 + shift*v(x1))*(1 + amplitude*w(x1))
    //   y2 = (x2 + shift*v(x1))*(1 + amplitude*w(x1))
    // so d(y)/d(x2) = (shear*scale, scale) evaluated at x1 = z1(y).
    let rho1 = parse(&format!("{shear}*{scale}"))?;
    let rho2 = parse(&scale)?;
    let rho = VectorField::new(vec![rho1.clone(), rho2.clone()])?;

    // the same lines with a smoothly rescaled parameterization
    let conformal = parse("exp(0.2*x1 - 0.1*x2)")?;
    let rho_scaled = VectorField::new(vec![
        rho1.checked_mul(&conformal)?,
        rho2.checked_mul(&conformal)?,
    ])?;

    let metric = MetricField::new(alpha, entries, vec![[-2.0, 2.0]; 2], Some(h2.clone()))?;
    let mut fields = BTreeMap::new();
    fields.insert("rho".to_string(), rho);
    fields.insert("rho_scaled".to_string(), rho_scaled);
    Ok(SpaceDescriptor {
        name: "distorted_normal".to_string(),
        metric,
        fields,
        sigma: Some(h2),
        notes: format!(
            "normal form pushed through a seeded diffeomorphism (amplitude {amplitude}, frequency {frequency}, shear {shear:.4}, shift {shift}, seed {seed})"
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signed_power::spow;

    fn space(name: &str) -> SpaceDescriptor {
        builtin_space(name, &BTreeMap::new()).unwrap()
    }

    fn space_with(name: &str, kv: &[(&str, &str)]) -> SpaceDescriptor {
        let params = kv
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        builtin_space(name, &params).unwrap()
    }

    #[test]
    fn catalog_examples() {
        let k = space("kossowski");
        let g = k.metric.eval(&[0.5, 0.25]).unwrap();
        assert_eq!(g[(0, 0)], 1.0);
        assert_eq!(g[(1, 1)], -0.25);

        let d1 = space("discussion1");
        let g = d1.metric.eval(&[0.0, 1.0]).unwrap();
        assert_eq!(g[(0, 1)], 1.0);
        assert_eq!(g[(1, 1)], 2.0);

        let nf = space_with("normal_form", &[("alpha", "2")]);
        let g = nf.metric.eval(&[0.0, 0.25]).unwrap();
        assert!((g[(1, 1)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn unknown_space_and_bad_params() {
        assert!(matches!(
            builtin_space("nope", &BTreeMap::new()),
            Err(Error::UnknownSpace { .. })
        ));
        let params: BTreeMap<String, String> =
            [("alpha".to_string(), "-1".to_string())].into();
        assert!(matches!(
            builtin_space("normal_form", &params),
            Err(Error::BadParams { .. })
        ));
        let params: BTreeMap<String, String> =
            [("bogus".to_string(), "1".to_string())].into();
        assert!(matches!(
            builtin_space("kossowski", &params),
            Err(Error::BadParams { .. })
        ));
    }

    #[test]
    fn signature_partitions_on_grid() {
        for name in ["kossowski", "esp", "normal_form", "discussion1"] {
            let s = space(name);
            let m = &s.metric;
            for i in 0..10 {
                for j in 0..10 {
                    let x = [
                        -0.9 + 1.8 * (i as f64) / 9.0,
                        -0.9 + 1.8 * (j as f64) / 9.0,
                    ];
                    let det = m.det_at(&x).unwrap();
                    if det.abs() < 1e-6 {
                        continue;
                    }
                    let (neg, _pos) = m.signature_at(&x).unwrap();
                    if det < 0.0 {
                        assert_eq!(neg, 1, "{name} at {x:?}");
                    } else {
                        assert_eq!(neg, 0, "{name} at {x:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn transversality_across_catalog() {
        for name in ["kossowski", "esp", "normal_form", "distorted_normal"] {
            let s = space(name);
            let p = s
                .metric
                .locate_sigma(&[0.2, 0.5], &[0.0, 1.0])
                .unwrap_or_else(|e| panic!("{name}: {e}"));
            let rep = s.metric.transversality_report(&p).unwrap();
            assert!(rep.verdict.passed(), "{name}: {rep:?}");
        }
        let s = space("discussion1");
        let rep = s.metric.transversality_report(&[0.0, 0.0]).unwrap();
        assert!(!rep.verdict.passed());
        assert!((rep.left_derivative - 3.0).abs() < 1e-3);
        assert!((rep.right_derivative - 1.0).abs() < 1e-3);
    }

    #[test]
    fn distorted_metric_matches_pushforward_determinant() {
        // the pulled-back determinant must equal det(old) * det(JH)^2 with
        // det(old) = spow(x2_old, 1/alpha)
        let s = space_with("distorted_normal", &[("alpha", "2"), ("seed", "3")]);
        let sigma = s.sigma.as_ref().unwrap();
        for y in [[0.3, 0.4], [-0.2, 0.1], [0.0, -0.3]] {
            let old_x2 = sigma.eval(&y).unwrap();
            let det = s.metric.det_at(&y).unwrap();
            assert_eq!(det.signum(), spow(old_x2, 0.5).unwrap().signum(), "{y:?}");
        }
    }

    #[test]
    fn distorted_rho_is_radical_on_sigma() {
        let s = space_with("distorted_normal", &[("seed", "5")]);
        let p = s.metric.locate_sigma(&[0.1, 0.5], &[0.0, 1.0]).unwrap();
        let g = s.metric.eval(&p).unwrap();
        let rho = s.fields["rho"].eval(&p).unwrap();
        for a in 0..2 {
            let mut acc = 0.0;
            for b in 0..2 {
                acc += g[(a, b)] * rho[b];
            }
            assert!(acc.abs() < 1e-9, "g*rho = {acc}");
        }
    }
}
