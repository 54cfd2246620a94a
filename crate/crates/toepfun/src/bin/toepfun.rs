//! Experiment CLI: iteration tables, spectrum clouds, and the verification
//! suite. Thin argument-parsing shell over [`toepfun::harness`].

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use toepfun::genfn::SymbolSpec;
use toepfun::harness::{
    run_spectrum, run_table, run_verification_suite, ExperimentSpec, SolverCell, SpectrumVariant,
    DEFAULT_SEED,
};
use toepfun::matfun::FunctionKind;

#[derive(Parser)]
#[command(
    name = "toepfun",
    about = "Circulant-preconditioned Krylov solvers for matrix functions of Toeplitz matrices",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SymbolArg {
    /// Catalog name (ex1..ex5b) or inline JSON
    /// {"kind":"trigpoly","coeffs":[[k,re,im],...]}.
    #[arg(long)]
    symbol: String,
}

impl SymbolArg {
    fn parse(&self) -> Result<SymbolSpec, String> {
        if self.symbol.trim_start().starts_with('{') {
            serde_json::from_str(&self.symbol).map_err(|e| format!("bad inline symbol: {e}"))
        } else {
            Ok(SymbolSpec::Named(self.symbol.clone()))
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run an iteration-count table over sizes × (solver, preconditioner).
    Table {
        #[command(flatten)]
        symbol: SymbolArg,
        /// Matrix function: exp, sin, cos.
        #[arg(long)]
        g: FunctionKind,
        /// Comma-separated matrix sizes, e.g. 128,256,512,1024.
        #[arg(long, value_delimiter = ',')]
        sizes: Vec<usize>,
        /// Comma-separated solver columns, e.g. cg,cg+c,gmres+c,minres+absc.
        #[arg(long, value_delimiter = ',')]
        solvers: Vec<SolverCell>,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value_t = 1e-7)]
        tol: f64,
        #[arg(long, default_value_t = 100_000)]
        max_iter: usize,
        /// Write the full JSON report here (text table always goes to stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit the eigenvalue cloud of g(A), a preconditioned operator, or the
    /// normal-equations operator, as headerless "re,im" CSV.
    Spectrum {
        #[command(flatten)]
        symbol: SymbolArg,
        #[arg(long)]
        g: FunctionKind,
        #[arg(long)]
        n: usize,
        /// raw | preconditioned | normal_eq | abs_preconditioned.
        #[arg(long, default_value = "preconditioned")]
        variant: SpectrumVariant,
        /// CSV output path (stdout when omitted). A JSON cluster report goes
        /// to the same path with extension .json when --report is set.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the cluster report JSON next to the CSV.
        #[arg(long, default_value_t = false)]
        report: bool,
    },
    /// Run the cross-module verification suite; exits nonzero on failure.
    Verify {
        #[arg(long, value_delimiter = ',', default_value = "64,128,256")]
        sizes: Vec<usize>,
        /// Write the JSON summary here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn init_threads() {
    if let Ok(v) = std::env::var("TOEPFUN_THREADS") {
        if let Ok(k) = v.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(k.max(1)).build_global();
        }
    }
}

fn main() -> ExitCode {
    init_threads();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, String> {
    match cli.command {
        Command::Table { symbol, g, sizes, solvers, seed, tol, max_iter, out } => {
            let spec = ExperimentSpec {
                symbol: symbol.parse()?,
                g,
                sizes,
                cells: solvers,
                seed,
                tol,
                max_iter,
            };
            let table = run_table(&spec).map_err(|e| e.to_string())?;
            print!("{}", table.to_text());
            if let Some(path) = out {
                let json = serde_json::to_string_pretty(&table).map_err(|e| e.to_string())?;
                fs::write(&path, json).map_err(|e| format!("writing {}: {e}", path.display()))?;
                eprintln!("wrote {}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Spectrum { symbol, g, n, variant, out, report } => {
            let run = run_spectrum(&symbol.parse()?, g, n, variant).map_err(|e| e.to_string())?;
            let mut csv = Vec::new();
            toepfun::analysis::write_eigs_csv(run.eigenvalues(), &mut csv)
                .map_err(|e| e.to_string())?;
            match &out {
                Some(path) => {
                    fs::write(path, csv).map_err(|e| format!("writing {}: {e}", path.display()))?;
                    eprintln!(
                        "wrote {} ({} eigenvalues, {} outliers outside |λ−1| ≤ {})",
                        path.display(),
                        run.report.n,
                        run.report.outlier_count,
                        run.report.cluster_radius
                    );
                    if report {
                        let json_path = path.with_extension("json");
                        let json =
                            serde_json::to_string_pretty(&run).map_err(|e| e.to_string())?;
                        fs::write(&json_path, json)
                            .map_err(|e| format!("writing {}: {e}", json_path.display()))?;
                        eprintln!("wrote {}", json_path.display());
                    }
                }
                None => {
                    print!("{}", String::from_utf8_lossy(&csv));
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { sizes, out } => {
            let report = run_verification_suite(&sizes).map_err(|e| e.to_string())?;
            print!("{}", report.to_text());
            if let Some(path) = out {
                let json = serde_json::to_string_pretty(&report).map_err(|e| e.to_string())?;
                fs::write(&path, json).map_err(|e| format!("writing {}: {e}", path.display()))?;
                eprintln!("wrote {}", path.display());
            }
            Ok(if report.passed { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
    }
}
