//! Shared exit-code mapping and deterministic formatting.

use sigchange_core::Error;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Classify an error: analytic verdicts exit 1, plumbing exits 2.
pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::NotRadical { .. }
        | Error::NotGeodesicField { .. }
        | Error::NotSimpleEquation { .. }
        | Error::NonPositivePsi { .. }
        | Error::ExtensionFailed { .. }
        | Error::NotTransverse { .. }
        | Error::FoldDetected { .. }
        | Error::RankDeficit { .. } => EXIT_FAIL,
        _ => EXIT_USAGE,
    }
}

/// 17-significant-digit decimal float for reproducible CSV.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_or_fail(path: &std::path::Path, contents: &str) -> Result<(), i32> {
    std::fs::write(path, contents).map_err(|e| {
        eprintln!("error: cannot write {}: {e}", path.display());
        EXIT_USAGE
    })
}

pub fn read_space(path: &std::path::Path) -> Result<sigchange_core::catalog::SpaceDescriptor, i32> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", path.display());
        EXIT_USAGE
    })?;
    let file = sigchange_core::spacefile::SpaceFile::from_json(&text).map_err(|e| {
        eprintln!("error: {e}");
        EXIT_USAGE
    })?;
    file.to_descriptor().map_err(|e| {
        eprintln!("error: {e}");
        EXIT_USAGE
    })
}

/// Parse a comma-separated list of floats.
pub fn parse_vec(raw: &str) -> Result<Vec<f64>, i32> {
    raw.split(',')
        .map(|p| {
            p.trim().parse::<f64>().map_err(|_| {
                eprintln!("error: `{raw}` is not a comma-separated list of numbers");
                EXIT_USAGE
            })
        })
        .collect()
}
