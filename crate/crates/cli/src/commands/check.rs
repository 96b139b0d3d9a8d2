use std::path::PathBuf;

use clap::Parser;
use serde::Serialize;
use sigchange_core::metric::TransversalityReport;

use crate::output::{exit_code_for, read_space, EXIT_FAIL, EXIT_PASS, EXIT_USAGE};

#[derive(Parser)]
pub struct Args {
    /// Space definition (JSON).
    pub space: PathBuf,
    /// Singular samples per tangential axis.
    #[arg(long, default_value_t = 5)]
    pub grid: usize,
    /// Determinant floor for inverse-metric guards.
    #[arg(long = "det-floor")]
    pub det_floor: Option<f64>,
    /// Emit the full report as JSON on stdout.
    #[arg(long)]
    pub json: bool,
}

#[derive(Serialize)]
struct CheckReport {
    space: String,
    samples: Vec<SampleReport>,
    all_pass: bool,
}

#[derive(Serialize)]
struct SampleReport {
    signature_ok: bool,
    radical_transverse: bool,
    transversality: TransversalityReport,
}

pub fn run(args: &Args) -> i32 {
    let mut descriptor = match read_space(&args.space) {
        Ok(d) => d,
        Err(code) => return code,
    };
    if let Some(floor) = args.det_floor {
        descriptor.metric.set_det_floor(floor);
    }
    let metric = &descriptor.metric;
    let m = metric.dim();
    let domain = metric.domain().to_vec();

    // seed lines over the tangential box, resolving the singular set
    // along the last axis
    let grid = args.grid.max(1);
    let mut seeds: Vec<Vec<f64>> = vec![vec![]];
    for axis in &domain[..m - 1] {
        let mut next = Vec::new();
        let span = axis[1] - axis[0];
        for base in &seeds {
            for k in 0..grid {
                let frac = if grid == 1 {
                    0.5
                } else {
                    0.1 + 0.8 * (k as f64) / ((grid - 1) as f64)
                };
                let mut s: Vec<f64> = base.clone();
                s.push(axis[0] + span * frac);
                next.push(s);
            }
        }
        seeds = next;
    }

    let xm = domain[m - 1];
    let mut reports = Vec::new();
    for seed in &seeds {
        let mut full = seed.clone();
        full.push(0.5 * (xm[0] + xm[1]));
        let mut dir = vec![0.0; m];
        dir[m - 1] = 0.5 * (xm[1] - xm[0]);
        let p = match metric.locate_sigma(&full, &dir) {
            Ok(p) => p,
            Err(sigchange_core::Error::NoBracket) => continue,
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_USAGE;
            }
        };
        // signature partition next to the singular point
        let signature_ok = match signature_consistent(metric, &p) {
            Ok(ok) => ok,
            Err(e) => {
                eprintln!("error: {e}");
                return exit_code_for(&e);
            }
        };
        let radical = match metric.radical_direction(&p) {
            Ok(r) => r,
            Err(e) => {
                eprintln!("verdict: FAIL at {p:?}: {e}");
                return EXIT_FAIL;
            }
        };
        let report = match metric.transversality_report(&p) {
            Ok(r) => r,
            Err(e) => {
                eprintln!("error: {e}");
                return exit_code_for(&e);
            }
        };
        reports.push(SampleReport {
            signature_ok,
            radical_transverse: radical.transverse,
            transversality: report,
        });
    }

    if reports.is_empty() {
        eprintln!("error: no singular points found along the probe lines");
        return EXIT_USAGE;
    }

    let all_pass = reports
        .iter()
        .all(|r| r.signature_ok && r.transversality.verdict.passed());

    if args.json {
        let out = CheckReport {
            space: descriptor.name.clone(),
            samples: reports,
            all_pass,
        };
        println!("{}", serde_json::to_string_pretty(&out).expect("serializable"));
    } else {
        for (k, r) in reports.iter().enumerate() {
            let t = &r.transversality;
            let verdict = if t.verdict.passed() && r.signature_ok {
                "PASS".to_string()
            } else {
                format!("FAIL ({:?})", t.verdict)
            };
            println!(
                "sample {k} at {:?}: {} (left {:.6}, right {:.6}, signature_ok {})",
                t.point, verdict, t.left_derivative, t.right_derivative, r.signature_ok
            );
        }
        println!(
            "checked {} singular samples: {}",
            reports.len(),
            if all_pass { "all pass" } else { "failures present" }
        );
    }
    if all_pass {
        EXIT_PASS
    } else {
        EXIT_FAIL
    }
}

/// Lorentz where det < 0, Riemannian where det > 0, probed on both sides
/// of the singular point along the last axis.
fn signature_consistent(
    metric: &sigchange_core::MetricField,
    p: &[f64],
) -> sigchange_core::Result<bool> {
    let m = metric.dim();
    for side in [1.0, -1.0] {
        let mut x = p.to_vec();
        x[m - 1] += side * 0.2;
        if !metric.contains(&x) {
            continue;
        }
        let det = metric.det_at(&x)?;
        if det.abs() < 1e-9 {
            continue;
        }
        let (neg, _) = metric.signature_at(&x)?;
        let expected = if det < 0.0 { 1 } else { 0 };
        if neg != expected {
            return Ok(false);
        }
    }
    Ok(true)
}
