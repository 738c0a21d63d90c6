//! `ansyb`: run one experiment and write its report.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use ansyb_core::experiments::{self, ExperimentConfig};
use ansyb_core::report::Format;
use ansyb_core::Error;
use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "ansyb", version, about = "Numerical and symbolic checks, one experiment per invocation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Master seed for all randomness.
    #[arg(long)]
    seed: Option<u64>,
    /// Write the report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report format: json or csv.
    #[arg(long, alias = "emit")]
    format: Option<String>,
    /// Flat key=value file; flags given on the command line win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra parameter as key=value, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

/// Declares a leaf subcommand whose optional flags become experiment parameters.
macro_rules! leaf {
    ($name:ident { $($field:ident $(| $alias:literal)* => $key:literal),* $(,)? }) => {
        #[derive(Args, Debug, Clone)]
        struct $name {
            #[command(flatten)]
            common: Common,
            $(
                #[arg(long $(, visible_alias = $alias)*)]
                $field: Option<String>,
            )*
        }

        impl $name {
            fn params(&self) -> Vec<(&'static str, Option<String>)> {
                vec![$(($key, self.$field.clone())),*]
            }
        }
    };
}

leaf!(RepcombArgs { p => "p", n => "n", exclude_as => "exclude_as" });
leaf!(HaarFluctArgs { n => "n", p => "p", trials => "trials", l | "L" => "l" });
leaf!(HaarDetArgs { n => "n", l | "L" => "l", trials => "trials" });
leaf!(MixingArgs { n => "n", f => "f", draws => "draws" });
leaf!(DiracArgs {
    nx | "sites" => "nx",
    ell => "ell",
    mass => "mass",
    t => "t",
    dt => "dt",
    order => "order",
    bstrength => "bstrength",
    amps => "amps",
});
leaf!(FockArgs { sites => "sites", spinors => "spinors", n => "n", a => "a", lambda => "lambda" });
leaf!(WickArgs {
    n => "n",
    lambda => "lambda",
    in_lines => "in_lines",
    out_lines => "out_lines",
    ell => "ell",
    spec => "spec",
});
leaf!(ExchangeArgs { ell => "ell", mass => "mass", nu => "nu", dt => "dt", qmin => "qmin", qmax => "qmax", points => "points" });

#[derive(Subcommand, Debug)]
enum Command {
    /// Exact fluctuation sum over Young diagrams.
    Repcomb(RepcombArgs),
    #[command(subcommand)]
    Haar(HaarCommand),
    #[command(subcommand)]
    Mixing(MixingCommand),
    #[command(subcommand)]
    Dirac(DiracCommand),
    #[command(subcommand)]
    Fock(FockCommand),
    #[command(subcommand)]
    Wick(WickCommand),
    #[command(subcommand)]
    Exchange(ExchangeCommand),
}

#[derive(Subcommand, Debug)]
enum HaarCommand {
    /// Averaged tensor-power fluctuations for p < n.
    Fluct(HaarFluctArgs),
    /// Determinant and antisymmetric-subtracted terms at p = n.
    Det(HaarDetArgs),
}

#[derive(Subcommand, Debug)]
enum MixingCommand {
    /// Block-form identities and toy-projector rank.
    Verify(MixingArgs),
}

#[derive(Subcommand, Debug)]
enum DiracCommand {
    /// Glueing residuals and the equal-time delta.
    Glue(DiracArgs),
}

#[derive(Subcommand, Debug)]
enum FockCommand {
    /// Matrix identities in the finite Fock-Krein space.
    Verify(FockArgs),
}

#[derive(Subcommand, Debug)]
enum WickCommand {
    /// Commutator table, pairing permutations and loop coefficients; with
    /// `--spec FILE`, the vacuum expectation of the word in FILE instead.
    Vev(WickArgs),
}

#[derive(Subcommand, Debug)]
enum ExchangeCommand {
    /// Cutoff scan of the exchange amplitude and Compton suppression.
    Scan(ExchangeArgs),
}

fn dispatch(cmd: &Command) -> (&'static str, &Common, Vec<(&'static str, Option<String>)>) {
    match cmd {
        Command::Repcomb(a) => ("repcomb", &a.common, a.params()),
        Command::Haar(HaarCommand::Fluct(a)) => ("haar-fluct", &a.common, a.params()),
        Command::Haar(HaarCommand::Det(a)) => ("haar-det", &a.common, a.params()),
        Command::Mixing(MixingCommand::Verify(a)) => ("mixing-verify", &a.common, a.params()),
        Command::Dirac(DiracCommand::Glue(a)) => ("dirac-glue", &a.common, a.params()),
        Command::Fock(FockCommand::Verify(a)) => ("fock-verify", &a.common, a.params()),
        Command::Wick(WickCommand::Vev(a)) => ("wick-vev", &a.common, a.params()),
        Command::Exchange(ExchangeCommand::Scan(a)) => ("exchange-scan", &a.common, a.params()),
    }
}

fn build_config(cli: &Cli) -> Result<ExperimentConfig, Error> {
    let (name, common, flags) = dispatch(&cli.command);
    let mut params: BTreeMap<String, String> = match &common.config {
        Some(path) => experiments::parse_config(&std::fs::read_to_string(path)?)?,
        None => BTreeMap::new(),
    };
    // The file may carry the common settings too; flags override them.
    let mut seed = params.remove("seed");
    let mut format = params.remove("format");
    let mut out = params.remove("out").map(PathBuf::from);
    for kv in &common.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| Error::Usage(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        params.insert(k.trim().to_string(), v.trim().to_string());
    }
    for (k, v) in flags {
        if let Some(v) = v {
            params.insert(k.to_string(), v);
        }
    }
    if common.seed.is_some() {
        seed = common.seed.map(|s| s.to_string());
    }
    if common.format.is_some() {
        format = common.format.clone();
    }
    if common.out.is_some() {
        out = common.out.clone();
    }
    let seed = match seed {
        Some(s) => s.parse().map_err(|_| Error::Usage(format!("seed must be a 64-bit unsigned integer, got {s:?}")))?,
        None => 0,
    };
    let format = match format {
        Some(f) => f.parse()?,
        None => Format::Json,
    };
    Ok(ExperimentConfig { experiment: name.into(), params, seed, out, format })
}

fn init_logging() -> Result<(), Error> {
    let level = match std::env::var("ANSYB_LOG").as_deref() {
        Err(_) | Ok("quiet") => log::LevelFilter::Off,
        Ok("info") => log::LevelFilter::Info,
        Ok("debug") => log::LevelFilter::Debug,
        Ok(other) => return Err(Error::Usage(format!("ANSYB_LOG must be quiet, info or debug, got {other:?}"))),
    };
    env_logger::Builder::new().filter_level(level).init();
    Ok(())
}

fn exit_for(e: &Error) -> ExitCode {
    eprintln!("ansyb: {e}");
    match e {
        Error::Usage(_) => ExitCode::from(2),
        _ => ExitCode::from(1),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_logging() {
        return exit_for(&e);
    }
    let config = match build_config(&cli) {
        Ok(c) => c,
        Err(e) => return exit_for(&e),
    };
    let report = match experiments::run(&config) {
        Ok(r) => r,
        Err(e) => return exit_for(&e),
    };
    let written = match &config.out {
        Some(path) => report.emit(config.format, path),
        None => report.render(config.format).map(|s| print!("{s}")),
    };
    if let Err(e) = written {
        return exit_for(&e);
    }
    let failed = report.failed();
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        eprintln!("ansyb: failed verdicts: {}", failed.join(", "));
        ExitCode::from(1)
    }
}
