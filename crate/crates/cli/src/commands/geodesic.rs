use std::path::PathBuf;

use clap::Parser;
use serde::Serialize;
use sigchange_core::geodesic::{integrate_geodesic, pregeodesic_residual};

use crate::output::{
    exit_code_for, fmt_float, parse_vec, read_space, write_or_fail, EXIT_FAIL, EXIT_PASS,
    EXIT_USAGE,
};

#[derive(Parser)]
pub struct Args {
    /// Space definition (JSON).
    pub space: PathBuf,
    /// Start point, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    pub start: String,
    /// Start velocity, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    pub velocity: String,
    /// Parameter span "t0,t1".
    #[arg(long, allow_hyphen_values = true)]
    pub tspan: String,
    /// Integrator tolerance.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    /// Output samples.
    #[arg(long, default_value_t = 101)]
    pub samples: usize,
    /// Determinant floor for the singular guard.
    #[arg(long = "det-floor")]
    pub det_floor: Option<f64>,
    /// Write the trace CSV here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Emit the summary as JSON on stdout.
    #[arg(long)]
    pub json: bool,
}

#[derive(Serialize)]
struct Summary {
    space: String,
    samples: usize,
    max_residual: Option<f64>,
    halted: Option<(f64, Vec<f64>)>,
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
    let start = match parse_vec(&args.start) {
        Ok(v) => v,
        Err(code) => return code,
    };
    let velocity = match parse_vec(&args.velocity) {
        Ok(v) => v,
        Err(code) => return code,
    };
    let tspan = match parse_vec(&args.tspan) {
        Ok(v) if v.len() == 2 => [v[0], v[1]],
        Ok(_) => {
            eprintln!("error: --tspan expects two numbers");
            return EXIT_USAGE;
        }
        Err(code) => return code,
    };
    if start.len() != metric.dim() || velocity.len() != metric.dim() {
        eprintln!(
            "error: start and velocity must have {} components",
            metric.dim()
        );
        return EXIT_USAGE;
    }

    let trace = match integrate_geodesic(metric, &start, &velocity, tspan, args.tol, args.samples)
    {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code_for(&e);
        }
    };
    let residuals = match pregeodesic_residual(metric, &trace) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code_for(&e);
        }
    };
    let max_residual = residuals.iter().flatten().cloned().fold(None, |acc, r| {
        Some(match acc {
            None => r,
            Some(prev) if r > prev => r,
            Some(prev) => prev,
        })
    });

    if let Some(path) = &args.out {
        let m = metric.dim();
        let mut csv = String::new();
        csv.push_str("param");
        for i in 1..=m {
            csv.push_str(&format!(",x{i}"));
        }
        for i in 1..=m {
            csv.push_str(&format!(",v{i}"));
        }
        csv.push_str(",speed2,residual\n");
        let speed2 = trace.speed2.as_ref().expect("annotated by integrator");
        for k in 0..trace.len() {
            csv.push_str(&fmt_float(trace.params[k]));
            for v in &trace.points[k] {
                csv.push(',');
                csv.push_str(&fmt_float(*v));
            }
            for v in &trace.velocities[k] {
                csv.push(',');
                csv.push_str(&fmt_float(*v));
            }
            csv.push(',');
            csv.push_str(&fmt_float(speed2[k]));
            csv.push(',');
            if let Some(r) = residuals[k] {
                csv.push_str(&fmt_float(r));
            }
            csv.push('\n');
        }
        if let Err(code) = write_or_fail(path, &csv) {
            return code;
        }
    }

    let halted = trace.halted.as_ref().map(|h| (h.t, h.point.clone()));
    if args.json {
        let summary = Summary {
            space: descriptor.name.clone(),
            samples: trace.len(),
            max_residual,
            halted: halted.clone(),
        };
        println!("{}", serde_json::to_string_pretty(&summary).expect("serializable"));
    } else {
        match max_residual {
            Some(r) => println!("max pregeodesic residual: {r:.3e}"),
            None => println!("no residual samples outside the singular band"),
        }
        if let Some((t, p)) = &halted {
            println!("halted near the singular set at t = {t:.6}, point {p:?}");
        }
    }
    if halted.is_some() {
        EXIT_FAIL
    } else {
        EXIT_PASS
    }
}
