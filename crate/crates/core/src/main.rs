use std::fs;
use std::io::{self, Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use tds_psa::error::Error;
use tds_psa::grid::sample_grid;
use tds_psa::io::{float, ResultDocument, RootsDocument, SystemDocument};
use tds_psa::pipeline::{root_set, run_abscissa, AbscissaSettings, Stage, StageError};
use tds_psa::roots::characteristic_roots;

/// Pseudospectral abscissa, characteristic roots and pseudospectra of
/// retarded time-delay systems.
#[derive(Parser)]
#[command(name = "tds-psa", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the pseudospectral abscissa (JSON result document).
    Abscissa {
        /// System document, or `-` for stdin.
        input: String,
        /// Perturbation radius; overrides the document.
        #[arg(long)]
        epsilon: Option<f64>,
        /// Mesh half-size of the discretized operator.
        #[arg(long = "N", default_value_t = 6)]
        half: usize,
        /// Bisection tolerance.
        #[arg(long, default_value_t = 0.05)]
        tol: f64,
        /// Imaginary-axis tolerance (default scales with the operator norm).
        #[arg(long = "tol-im")]
        tol_im: Option<f64>,
        /// Fixed resolution for the root computation (default: adaptive).
        #[arg(long = "Na")]
        na: Option<usize>,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// List characteristic roots right of a cutoff (JSON).
    Roots {
        input: String,
        /// Real-part cutoff (default: rightmost estimate minus one).
        #[arg(long, allow_hyphen_values = true)]
        cutoff: Option<f64>,
        #[arg(long = "Na")]
        na: Option<usize>,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Sample log10 of the level-set function on a rectangular grid.
    Contour {
        input: String,
        /// `MIN,MAX` of the real axis.
        #[arg(long = "re-range", value_parser = parse_range, allow_hyphen_values = true)]
        re_range: (f64, f64),
        /// `MIN,MAX` of the imaginary axis.
        #[arg(long = "im-range", value_parser = parse_range, allow_hyphen_values = true)]
        im_range: (f64, f64),
        #[arg(long, default_value_t = 100)]
        nx: usize,
        #[arg(long, default_value_t = 100)]
        ny: usize,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        /// Recorded in the metadata only.
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected MIN,MAX, got {s:?}"))?;
    let parse = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
    Ok((parse(a)?, parse(b)?))
}

fn read_input(path: &str) -> Result<String, StageError> {
    let text = if path == "-" {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s).map(|_| s)
    } else {
        fs::read_to_string(path)
    };
    text.map_err(|e| StageError::new(Stage::Input, Error::InvalidArgument(format!("cannot read {path}: {e}"))))
}

fn write_output(path: Option<&PathBuf>, text: &str) -> Result<(), StageError> {
    let result = match path {
        Some(p) => fs::write(p, text),
        None => io::stdout().lock().write_all(text.as_bytes()),
    };
    result.map_err(|e| StageError::new(Stage::Input, Error::InvalidArgument(format!("cannot write output: {e}"))))
}

fn input(e: Error) -> StageError {
    StageError::new(Stage::Input, e)
}

fn configure_threads() -> Result<(), StageError> {
    faer::set_global_parallelism(faer::Par::Seq);
    let Ok(value) = std::env::var("TDS_PSA_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .map_err(|_| input(Error::InvalidArgument(format!("TDS_PSA_THREADS = {value:?} is not a count"))))?;
    // 0 leaves rayon's automatic choice in place.
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| input(Error::InvalidArgument(e.to_string())))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), StageError> {
    configure_threads()?;
    match cli.command {
        Command::Abscissa {
            input: path,
            epsilon,
            half,
            tol,
            tol_im,
            na,
            output,
        } => {
            let doc = SystemDocument::parse(&read_input(&path)?).map_err(input)?;
            let sys = doc.system().map_err(input)?;
            let spec = doc.perturbation(epsilon).map_err(input)?;
            let settings = AbscissaSettings { half, tol, tol_im, na };
            let run = run_abscissa(&sys, &spec, settings)?;
            write_output(output.as_ref(), &float::to_json(&ResultDocument::new(&run, &spec)))
        }
        Command::Roots {
            input: path,
            cutoff,
            na,
            output,
        } => {
            let doc = SystemDocument::parse(&read_input(&path)?).map_err(input)?;
            let sys = doc.system().map_err(input)?;
            let roots = |e| StageError::new(Stage::Roots, e);
            let mut set = root_set(&sys, na, 0).map_err(roots)?;
            if cutoff.is_some() {
                set = characteristic_roots(&sys, set.na, cutoff).map_err(roots)?;
            }
            write_output(output.as_ref(), &float::to_json(&RootsDocument::new(&set)))
        }
        Command::Contour {
            input: path,
            re_range,
            im_range,
            nx,
            ny,
            format,
            epsilon,
            output,
        } => {
            let doc = SystemDocument::parse(&read_input(&path)?).map_err(input)?;
            let sys = doc.system().map_err(input)?;
            let eps = epsilon.or(doc.epsilon);
            // f does not depend on epsilon; a placeholder keeps the weights.
            let spec = doc.perturbation(Some(eps.unwrap_or(1.0))).map_err(input)?;
            let mut grid = sample_grid(&sys, &spec, re_range, im_range, nx, ny).map_err(input)?;
            grid.metadata.epsilon = eps;
            let text = match format {
                Format::Csv => grid.to_csv(),
                Format::Json => grid.to_json(),
            };
            write_output(output.as_ref(), &text)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tds-psa: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
