//! `bioeq`: sample size and power for bioequivalence studies with unequal
//! variances.

mod config;
mod run;

use clap::{Arg, ArgAction, ArgMatches, Command};
use config::{keys_for, read_config_file, Key, Values};
use std::collections::BTreeMap;
use std::path::Path;
use std::process::ExitCode;

const COMMANDS: [(&str, &str); 5] = [
    ("power", "Power of the Welch TOST at fixed sample sizes"),
    (
        "curve",
        "Power curve and recommended sample size for a target power",
    ),
    (
        "crossover",
        "Recommended subjects per sequence for a 2x2 crossover",
    ),
    (
        "diagnose",
        "Multiple-intersection scans over the built-in scenarios",
    ),
    ("bench", "Replicated power estimates over a grid of sample sizes"),
];

fn subcommand(name: &'static str, about: &'static str, keys: &'static [Key]) -> Command {
    let mut cmd = Command::new(name).about(about).arg(
        Arg::new("config")
            .long("config")
            .value_name("FILE")
            .help("Flat `key = value` file; flags override its values"),
    );
    for k in keys {
        let arg = Arg::new(k.name).long(k.name).help(k.help);
        cmd = cmd.arg(if k.switch {
            arg.action(ArgAction::SetTrue)
        } else {
            arg.value_name("VALUE").allow_hyphen_values(true)
        });
    }
    cmd.arg(
        Arg::new("threads")
            .long("threads")
            .value_name("N")
            .value_parser(clap::value_parser!(usize))
            .help("Worker threads, 0 for one per core; results do not depend on it [default: 0]"),
    )
}

fn cli() -> Command {
    let mut cmd = Command::new("bioeq")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Power analysis for bioequivalence designs with unequal variances")
        .subcommand_required(true)
        .arg_required_else_help(true);
    for (name, about) in COMMANDS {
        cmd = cmd.subcommand(subcommand(name, about, keys_for(name)));
    }
    cmd
}

/// Config file values first, then flags on top.
fn merged(name: &str, matches: &ArgMatches) -> Values {
    let keys = keys_for(name);
    let mut errors = Vec::new();
    let mut map = match matches.get_one::<String>("config") {
        Some(path) => read_config_file(Path::new(path), keys, &mut errors),
        None => BTreeMap::new(),
    };
    for k in keys {
        if k.switch {
            if matches.get_flag(k.name) {
                map.insert(k.name.to_string(), "true".into());
            }
        } else if let Some(v) = matches.get_one::<String>(k.name) {
            map.insert(k.name.to_string(), v.clone());
        }
    }
    Values::new(map, errors)
}

fn main() -> ExitCode {
    let matches = cli().get_matches();
    let Some((name, sub)) = matches.subcommand() else {
        return ExitCode::from(2);
    };
    let cfg = match config::build(name, merged(name, sub)) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let threads = sub.get_one::<usize>("threads").copied().unwrap_or(0);
    if let Err(e) = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
    {
        eprintln!("error: cannot start worker threads: {e}");
        return ExitCode::FAILURE;
    }
    match run::execute(&cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
