use std::path::PathBuf;

use clap::Parser;
use serde::Serialize;
use sigchange_core::baldomero::{baldomero_f, f_prime_zero_formula, BaldomeroSpec};
use sigchange_core::smoothness::{smoothness_probe, ProbeConfig, SmoothnessReport, StepLadder};
use sigchange_core::Expression;

use crate::output::{fmt_float, parse_vec, write_or_fail, EXIT_FAIL, EXIT_PASS, EXIT_USAGE};

#[derive(Parser)]
pub struct Args {
    /// Singular exponent r (must be > -1).
    #[arg(long, allow_hyphen_values = true)]
    pub r: f64,
    /// Profile expression psi(l1..ln, x) with x the integration variable.
    #[arg(long)]
    pub psi: String,
    /// Parameter values l1..ln, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: Option<String>,
    /// Highest derivative order probed (<= 4).
    #[arg(long, default_value_t = 3)]
    pub orders: usize,
    /// Base step of the probe ladder.
    #[arg(long, default_value_t = 0.2)]
    pub h0: f64,
    /// Number of ladder rungs.
    #[arg(long, default_value_t = 9)]
    pub steps: usize,
    /// Write (t, F, F', order-k left/right) CSV here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Emit the report as JSON on stdout.
    #[arg(long)]
    pub json: bool,
}

#[derive(Serialize)]
struct Report {
    r: f64,
    psi: String,
    lambda: Vec<f64>,
    f_prime_formula: f64,
    f_prime_estimate: f64,
    relative_difference: f64,
    smoothness: SmoothnessReport,
    pass: bool,
}

pub fn run(args: &Args) -> i32 {
    if args.r <= -1.0 {
        eprintln!("error: --r must be greater than -1, got {}", args.r);
        return EXIT_USAGE;
    }
    let lambda = match &args.lambda {
        Some(raw) => match parse_vec(raw) {
            Ok(v) => v,
            Err(code) => return code,
        },
        None => Vec::new(),
    };
    let mut names: Vec<String> = (1..=lambda.len()).map(|i| format!("l{i}")).collect();
    names.push("x".to_string());
    let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
    let psi = match Expression::parse(&args.psi, &refs) {
        Ok(e) => e,
        Err(e) => {
            eprintln!("error: --psi: {e}");
            return EXIT_USAGE;
        }
    };
    let domain = lambda.iter().map(|v| [*v, *v]).collect();
    let spec = match BaldomeroSpec::new(args.r, psi, domain) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };

    let formula = match f_prime_zero_formula(&spec, &lambda) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };

    let ladder = StepLadder::new(args.h0, args.steps);
    let cfg = ProbeConfig::default();
    let mut f = |t: f64| baldomero_f(&spec, &lambda, t);
    let smoothness = match smoothness_probe(&mut f, 0.0, args.orders, ladder, &cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let estimate = 0.5 * (smoothness.orders[0].left.value + smoothness.orders[0].right.value);
    let relative_difference = (estimate - formula).abs() / formula.abs();
    let pass = smoothness.verdict >= args.orders && relative_difference <= 1e-5;

    if let Some(path) = &args.out {
        let mut csv = String::new();
        csv.push_str("t,F,Fprime");
        for order in &smoothness.orders {
            csv.push_str(&format!(",order{}_left,order{}_right", order.order, order.order));
        }
        csv.push('\n');
        let span = args.h0 * 4.0;
        let n = 81;
        for i in 0..n {
            let t = -span + 2.0 * span * (i as f64) / ((n - 1) as f64);
            let fv = match baldomero_f(&spec, &lambda, t) {
                Ok(v) => v,
                Err(e) => {
                    eprintln!("error: {e}");
                    return EXIT_USAGE;
                }
            };
            let mut g = |x: f64| baldomero_f(&spec, &lambda, x);
            let fp = match sigchange_core::smoothness::central_derivative(&mut g, t) {
                Ok(v) => v,
                Err(e) => {
                    eprintln!("error: {e}");
                    return EXIT_USAGE;
                }
            };
            csv.push_str(&format!("{},{},{}", fmt_float(t), fmt_float(fv), fmt_float(fp)));
            for order in &smoothness.orders {
                csv.push_str(&format!(
                    ",{},{}",
                    fmt_float(order.left.value),
                    fmt_float(order.right.value)
                ));
            }
            csv.push('\n');
        }
        if let Err(code) = write_or_fail(path, &csv) {
            return code;
        }
    }

    if args.json {
        let report = Report {
            r: args.r,
            psi: args.psi.clone(),
            lambda,
            f_prime_formula: formula,
            f_prime_estimate: estimate,
            relative_difference,
            smoothness,
            pass,
        };
        println!("{}", serde_json::to_string_pretty(&report).expect("serializable"));
    } else {
        println!("F'(0) formula  = {formula:.9}");
        println!("F'(0) estimate = {estimate:.9} (rel diff {relative_difference:.3e})");
        for order in &smoothness.orders {
            println!(
                "order {}: left {:.9} right {:.9} agree {}",
                order.order, order.left.value, order.right.value, order.agree
            );
        }
        println!(
            "verdict: C^{} {}",
            smoothness.verdict,
            if pass { "(pass)" } else { "(fail)" }
        );
    }
    if pass {
        EXIT_PASS
    } else {
        EXIT_FAIL
    }
}
