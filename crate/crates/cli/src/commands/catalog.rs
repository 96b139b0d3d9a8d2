use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::Parser;
use sigchange_core::catalog::{builtin_names, builtin_space};
use sigchange_core::spacefile::SpaceFile;

use crate::output::{write_or_fail, EXIT_PASS, EXIT_USAGE};

#[derive(Parser)]
pub struct Args {
    /// Builtin space name; omit to list the catalog.
    pub name: Option<String>,
    /// Space parameter, repeatable: --param alpha=2 --param seed=3
    #[arg(long = "param", value_name = "KEY=VALUE")]
    pub params: Vec<String>,
    /// Write the space file here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(args: &Args) -> i32 {
    let Some(name) = &args.name else {
        for name in builtin_names() {
            println!("{name}");
        }
        return EXIT_PASS;
    };
    let mut params = BTreeMap::new();
    for raw in &args.params {
        match raw.split_once('=') {
            Some((k, v)) => {
                params.insert(k.trim().to_string(), v.trim().to_string());
            }
            None => {
                eprintln!("error: --param expects KEY=VALUE, got `{raw}`");
                return EXIT_USAGE;
            }
        }
    }
    let descriptor = match builtin_space(name, &params) {
        Ok(d) => d,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let json = SpaceFile::from_descriptor(&descriptor).to_json();
    match &args.out {
        Some(path) => {
            if let Err(code) = write_or_fail(path, &json) {
                return code;
            }
            println!("wrote {}", path.display());
        }
        None => println!("{json}"),
    }
    EXIT_PASS
}
