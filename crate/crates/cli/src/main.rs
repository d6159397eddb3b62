use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hodge_dtn::cylinder::oracle_identity_suite;
use hodge_dtn::dense::RankPolicy;
use hodge_dtn::generators::{generate_data, Generator, MeshData};
use hodge_dtn::io::{read_mesh, write_matrix, write_mesh};
use hodge_dtn::report::{analyze, export_matrix, AnalyzeOptions, Pipeline};
use hodge_dtn::Error;

/// Residual above which the oracle run counts as failed.
const ORACLE_TOLERANCE: f64 = 1e-10;

#[derive(Parser)]
#[command(name = "hodge-dtn", version, about = "Dirichlet-to-Neumann operators for forms on meshes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a built-in mesh.
    Gen {
        name: String,
        #[arg(long)]
        resolution: Option<usize>,
    },
    /// Run the full pipeline and print a JSON report.
    Analyze {
        /// Mesh file, or the name of a built-in generator.
        mesh: String,
        /// Resolution when `mesh` names a generator.
        #[arg(long)]
        resolution: Option<usize>,
        /// Include identity residuals.
        #[arg(long)]
        identities: bool,
        /// Keep identity residuals for degrees `a..b` (inclusive).
        #[arg(long, value_parser = parse_degrees)]
        degrees: Option<(usize, usize)>,
        /// Singular-value gap ratio below which a rank counts as ambiguous.
        #[arg(long, default_value_t = 1e3)]
        rank_threshold: f64,
        #[arg(long)]
        no_timings: bool,
    },
    /// Closed-form cylinder identities.
    Oracle {
        #[arg(default_value_t = 20)]
        m_max: usize,
        #[arg(default_value_t = 1.0)]
        length: f64,
    },
    /// Write one assembled matrix.
    Export {
        mesh: String,
        /// Operator label such as Phi0, Psi1, Lambda1, Theta0.
        which: String,
        #[arg(long)]
        resolution: Option<usize>,
    },
}

fn parse_degrees(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once("..").ok_or("expected `a..b`")?;
    let a: usize = a.trim().parse().map_err(|_| format!("bad degree `{a}`"))?;
    let b: usize = b.trim().parse().map_err(|_| format!("bad degree `{b}`"))?;
    if a > b {
        return Err(format!("empty range {a}..{b}"));
    }
    Ok((a, b))
}

enum Failure {
    Input(String),
    Threshold(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = format!("{}: {e}", e.module());
        if e.is_input_error() {
            Failure::Input(msg)
        } else {
            Failure::Threshold(msg)
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Input(format!("io: {e}"))
    }
}

/// Mesh from a file, or from a generator when the file does not exist.
fn load(mesh: &str, resolution: Option<usize>) -> Result<(String, MeshData), Failure> {
    let path = Path::new(mesh);
    if !path.exists() {
        if let Ok(g) = mesh.parse::<Generator>() {
            let r = resolution.unwrap_or(g.default_resolution());
            return Ok((format!("{g}-{r}"), generate_data(g, r)?));
        }
    }
    let name = path.file_stem().map_or(mesh.to_string(), |s| s.to_string_lossy().into_owned());
    Ok((name, read_mesh(path)?))
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Gen { name, resolution } => {
            let g: Generator = name.parse()?;
            let data = generate_data(g, resolution.unwrap_or(g.default_resolution()))?;
            data.build()?;
            emit(&cli.out, &write_mesh(&data))
        }
        Command::Analyze {
            mesh,
            resolution,
            identities,
            degrees,
            rank_threshold,
            no_timings,
        } => {
            let (name, data) = load(&mesh, resolution)?;
            let opts = AnalyzeOptions {
                identities,
                degrees,
                policy: RankPolicy {
                    threshold: rank_threshold,
                    ..RankPolicy::default()
                },
                timings: !no_timings,
                ..AnalyzeOptions::default()
            };
            let report = analyze(&name, &data, &opts)?;
            emit(&cli.out, &(report.to_json()? + "\n"))?;
            if !report.oracles.betti_matches {
                return Err(Failure::Threshold("topology: dim ker Φ differs from the simplicial Betti numbers".into()));
            }
            Ok(())
        }
        Command::Oracle { m_max, length } => {
            if !(length.is_finite() && length > 0.0) {
                return Err(Failure::Input(format!("cylinder length must be positive, got {length}")));
            }
            let report = oracle_identity_suite(length, m_max);
            let json = serde_json::to_string_pretty(&report).map_err(Error::from)?;
            emit(&cli.out, &(json + "\n"))?;
            if report.max_residual > ORACLE_TOLERANCE {
                return Err(Failure::Threshold(format!(
                    "cylinder: residual {:e} exceeds {ORACLE_TOLERANCE:e}",
                    report.max_residual
                )));
            }
            Ok(())
        }
        Command::Export { mesh, which, resolution } => {
            let (_, data) = load(&mesh, resolution)?;
            let mut p = Pipeline::build(&data, RankPolicy::default())?;
            let a = export_matrix(&mut p, &which)?;
            emit(&cli.out, &write_matrix(&a))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Threshold(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
