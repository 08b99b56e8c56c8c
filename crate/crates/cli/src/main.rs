use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, ValueEnum};

use contactforge_cli::output::{to_json, to_text};
use contactforge_cli::{builtin, load_scenario, run, CliError, Command, RunOptions};

const USAGE_EXIT: u8 = 3;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CommandArg {
    CheckStructure,
    Recursion,
    Involution,
    Integrable,
    Symplectize,
    NogoReport,
    Flow,
    All,
}

impl From<CommandArg> for Command {
    fn from(c: CommandArg) -> Self {
        match c {
            CommandArg::CheckStructure => Command::CheckStructure,
            CommandArg::Recursion => Command::Recursion,
            CommandArg::Involution => Command::Involution,
            CommandArg::Integrable => Command::Integrable,
            CommandArg::Symplectize => Command::Symplectize,
            CommandArg::NogoReport => Command::NogoReport,
            CommandArg::Flow => Command::Flow,
            CommandArg::All => Command::All,
        }
    }
}

/// Verify contact, Jacobi, Poisson and bi-Hamiltonian structures declared in
/// a scenario file.
#[derive(Debug, Parser)]
#[command(name = "contactforge", version, after_help = builtin_help())]
struct Args {
    /// Group of tasks to run.
    #[arg(value_enum)]
    command: CommandArg,

    /// Scenario file, or the name of a builtin scenario.
    scenario: String,

    /// Sampling seed (default: the scenario's, else 42).
    #[arg(long)]
    seed: Option<u64>,

    /// Samples per check (tasks may fix their own count).
    #[arg(long)]
    samples: Option<usize>,

    /// Override a named tolerance, e.g. `--tol jacobi=1e-10`.
    #[arg(long = "tol", value_name = "NAME=V", value_parser = parse_tol)]
    tol: Vec<(String, f64)>,

    /// Write the JSON report to PATH.
    #[arg(long, value_name = "PATH")]
    json: Option<PathBuf>,

    /// Write flow trajectories as CSV to PATH.
    #[arg(long, value_name = "PATH")]
    csv: Option<PathBuf>,

    /// Print metrics and notes of passing checks too.
    #[arg(short, long)]
    verbose: bool,
}

fn builtin_help() -> String {
    let names: Vec<&str> = builtin::names().collect();
    format!(
        "Builtin scenarios: {}\nEnvironment: CONTACTFORGE_THREADS caps the worker threads.\n\
         Exit codes: 0 pass, 1 fail, 2 inconsistent, 3 usage or scenario error.",
        names.join(", ")
    )
}

fn parse_tol(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected NAME=V, got `{s}`"))?;
    let v: f64 = v.trim().parse().map_err(|_| format!("`{v}` is not a number"))?;
    Ok((k.trim().to_string(), v))
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("CONTACTFORGE_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("CONTACTFORGE_THREADS must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(e.to_string()))
}

fn csv_path(base: &Path, task: &str, many: bool) -> PathBuf {
    if !many {
        return base.to_path_buf();
    }
    let stem = base.file_stem().and_then(|s| s.to_str()).unwrap_or("trajectory");
    let ext = base.extension().and_then(|s| s.to_str()).unwrap_or("csv");
    base.with_file_name(format!("{stem}.{task}.{ext}"))
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<(), CliError> {
    let io = |source| CliError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    f(&mut w).map_err(io)?;
    std::io::Write::flush(&mut w).map_err(io)
}

fn execute(args: Args) -> Result<i32, CliError> {
    configure_threads()?;
    let command = Command::from(args.command);
    if args.csv.is_some() && !matches!(command, Command::Flow | Command::All) {
        return Err(CliError::Usage("--csv applies to the flow and all commands".into()));
    }
    let started = Instant::now();
    let scenario = load_scenario(&args.scenario)?;
    let opts = RunOptions {
        command,
        seed: args.seed,
        samples: args.samples,
        tolerances: args.tol,
    };
    let result = run(&scenario, &opts).map_err(CliError::Usage)?;
    print!("{}", to_text(&result, args.verbose));
    println!("elapsed {:.3} s", started.elapsed().as_secs_f64());
    if let Some(path) = &args.json {
        let json = to_json(&result);
        write_file(path, |w| std::io::Write::write_all(w, json.as_bytes()))?;
    }
    if let Some(base) = &args.csv {
        let many = result.trajectories.len() > 1;
        for (task, traj) in &result.trajectories {
            let path = csv_path(base, task, many);
            write_file(&path, |w| traj.write_csv(w))?;
        }
    }
    Ok(result.report.exit_code())
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { USAGE_EXIT } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(args) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error[{}]: {e}", e.class());
            ExitCode::from(USAGE_EXIT)
        }
    }
}
