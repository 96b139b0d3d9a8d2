use std::path::PathBuf;
use std::sync::Arc;

use clap::Parser;
use serde::Serialize;
use sigchange_core::geodesic::SigmaPatch;
use sigchange_core::normal_coords::{
    build_normal_chart, verify_normal_chart, NormalChartConfig, NormalChartReport,
};

use crate::output::{exit_code_for, read_space, write_or_fail, EXIT_FAIL, EXIT_PASS, EXIT_USAGE};

#[derive(Parser)]
pub struct Args {
    /// Space definition (JSON).
    pub space: PathBuf,
    /// Named vector field from the space file.
    #[arg(long, default_value = "rho")]
    pub field: String,
    /// Patch box per tangential axis, "lo:hi[,lo:hi...]".
    #[arg(long = "u-range", allow_hyphen_values = true)]
    pub u_range: Option<String>,
    /// Grid nodes per tangential axis.
    #[arg(long, default_value_t = 5)]
    pub grid: usize,
    /// Flow-time extent of the chart.
    #[arg(long = "t-extent", default_value_t = 0.6)]
    pub t_extent: f64,
    /// Fraction of the chart depth excluded around the singular set
    /// during verification.
    #[arg(long = "band-floor", default_value_t = 0.05)]
    pub band_floor: f64,
    /// Verification tolerance on the transformed metric entries.
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    /// Verification samples per side and line.
    #[arg(long, default_value_t = 8)]
    pub verify_samples: usize,
    /// Write the chart (JSON) here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Emit the verification report as JSON on stdout.
    #[arg(long)]
    pub json: bool,
}

#[derive(Serialize)]
struct Output {
    space: String,
    field: String,
    report: NormalChartReport,
}

pub fn run(args: &Args) -> i32 {
    let descriptor = match read_space(&args.space) {
        Ok(d) => d,
        Err(code) => return code,
    };
    let Some(field) = descriptor.fields.get(&args.field) else {
        eprintln!(
            "error: space `{}` has no field `{}` (available: {:?})",
            descriptor.name,
            args.field,
            descriptor.fields.keys().collect::<Vec<_>>()
        );
        return EXIT_USAGE;
    };
    let metric = &descriptor.metric;
    let m = metric.dim();

    let u_box: Vec<[f64; 2]> = match &args.u_range {
        Some(raw) => {
            let mut out = Vec::new();
            for part in raw.split(',') {
                let Some((lo, hi)) = part.split_once(':') else {
                    eprintln!("error: --u-range expects lo:hi pairs, got `{part}`");
                    return EXIT_USAGE;
                };
                match (lo.trim().parse(), hi.trim().parse()) {
                    (Ok(lo), Ok(hi)) => out.push([lo, hi]),
                    _ => {
                        eprintln!("error: --u-range expects numbers, got `{part}`");
                        return EXIT_USAGE;
                    }
                }
            }
            if out.len() != m - 1 {
                eprintln!("error: --u-range needs {} pairs", m - 1);
                return EXIT_USAGE;
            }
            out
        }
        None => metric.domain()[..m - 1]
            .iter()
            .map(|[lo, hi]| {
                let mid = 0.5 * (lo + hi);
                let half = 0.25 * (hi - lo);
                [mid - half, mid + half]
            })
            .collect(),
    };
    let xm = metric.domain()[m - 1];
    let patch = SigmaPatch::det_graph(
        Arc::new(metric.clone()),
        u_box,
        [0.8 * xm[0], 0.8 * xm[1]],
    );

    let config = NormalChartConfig {
        u_counts: vec![args.grid.max(2); m - 1],
        t_extent: args.t_extent,
        ..Default::default()
    };
    let chart = match build_normal_chart(metric, field, &patch, config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("verdict: FAIL (chart construction): {e}");
            return exit_code_for(&e);
        }
    };
    let report = match verify_normal_chart(&chart, metric, args.verify_samples, args.band_floor, args.tol)
    {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code_for(&e);
        }
    };

    if let Some(path) = &args.out {
        let export = chart.export();
        let json = serde_json::to_string_pretty(&export).expect("serializable");
        if let Err(code) = write_or_fail(path, &json) {
            return code;
        }
    }

    let passed = report.verdict.passed();
    if args.json {
        let output = Output {
            space: descriptor.name.clone(),
            field: args.field.clone(),
            report,
        };
        println!("{}", serde_json::to_string_pretty(&output).expect("serializable"));
    } else {
        println!(
            "gmm_error {:.3e}, gim_error {:.3e}, gij_posdef {}",
            report.gmm_error, report.gim_error, report.gij_posdef
        );
        println!("verdict: {}", if passed { "PASS" } else { "FAIL" });
    }
    if passed {
        EXIT_PASS
    } else {
        EXIT_FAIL
    }
}
