//! Command-line front end.
//!
//! ```text
//! expode run heat1d --param N=50 --opt RelTol=1e-6 --out heat.csv
//! expode info exprb MinStep
//! expode convergence --problem semi1 --method krogstad --method expmssemi:kStep=2
//! ```
//!
//! Exit status is 0 on success, 2 for invalid input (options, parameters,
//! usage) and 3 when the integration itself fails.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand};

use crate::driver::integrate;
use crate::error::{ExpodeError, MatFunError};
use crate::model::{OdeProblem, Solution};
use crate::options::{self, parse_options_file, parse_value, OptionsSet};
use crate::problems::{self, PROBLEMS};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_FAILURE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "expode", version, about = "Exponential integrators for stiff ODEs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate a bundled problem and write the solution as CSV.
    Run(RunArgs),
    /// Print the options of an integrator, or the help text of one option.
    Info {
        integrator: String,
        option: Option<String>,
    },
    /// Error and work against the exact solution over a list of step sizes
    /// or tolerances.
    Convergence(ConvergenceArgs),
    /// List the bundled problems and their parameters.
    Problems,
}

#[derive(Debug, Args)]
struct ProblemArgs {
    /// Problem name, also accepted as the first positional argument.
    #[arg(long = "problem", value_name = "NAME")]
    problem: Option<String>,
    /// Problem parameters, `k=v[,k=v]`.
    #[arg(long, value_name = "K=V[,K=V]")]
    param: Vec<String>,
    /// Integration interval and optionally the number of output points.
    #[arg(long, value_name = "A,B[,N]")]
    tspan: Option<String>,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(value_name = "PROBLEM")]
    name: Option<String>,
    #[command(flatten)]
    problem: ProblemArgs,
    /// `Name=value`, applied after the options file.
    #[arg(long = "opt", value_name = "NAME=VALUE")]
    opt: Vec<String>,
    #[arg(long, value_name = "PATH")]
    options_file: Option<PathBuf>,
    /// Solution CSV path; stdout when absent.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ConvergenceArgs {
    #[arg(value_name = "PROBLEM")]
    name: Option<String>,
    #[command(flatten)]
    problem: ProblemArgs,
    /// `NAME[:Opt=value;Opt=value]`; NAME is an integrator or one of
    /// euler, exprk22, krogstad, exprb32, exprb43.
    #[arg(long = "method", value_name = "METHOD")]
    method: Vec<String>,
    /// Constant step sizes; fractions like `1/40` are accepted.
    #[arg(long, value_delimiter = ',', value_name = "H,...")]
    h: Vec<String>,
    /// Tolerances for adaptive runs (sets RelTol and AbsTol); replaces --h.
    #[arg(long, value_delimiter = ',', value_name = "TOL,...")]
    tol: Vec<String>,
    /// Options applied to every method.
    #[arg(long = "opt", value_name = "NAME=VALUE")]
    opt: Vec<String>,
    #[arg(long, value_name = "PATH")]
    options_file: Option<PathBuf>,
    /// Table path; a gnuplot data file is written next to it with extension `.dat`.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

const DEFAULT_METHODS: [&str; 6] = ["krogstad", "exprb32", "exprb43", "expmssemi:kStep=2", "expms:kStep=2", "exp4"];
const DEFAULT_H: [f64; 5] = [1.0 / 40.0, 1.0 / 80.0, 1.0 / 160.0, 1.0 / 320.0, 1.0 / 640.0];

#[derive(Debug)]
struct CliError {
    code: i32,
    message: String,
}

impl CliError {
    fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }
}

impl From<ExpodeError> for CliError {
    fn from(e: ExpodeError) -> Self {
        Self {
            code: exit_code(&e),
            message: e.to_string(),
        }
    }
}

impl From<options::OptionsError> for CliError {
    fn from(e: options::OptionsError) -> Self {
        CliError::input(e.to_string())
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        // a closed pipe on stdout is the reader's choice
        let code = if e.kind() == io::ErrorKind::BrokenPipe { EXIT_OK } else { EXIT_FAILURE };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

/// Exit status for a library error: 2 when the input was at fault, 3 when
/// the integration failed.
pub fn exit_code(e: &ExpodeError) -> i32 {
    use ExpodeError::*;
    match e {
        Options(_)
        | InvalidProblem(_)
        | Scheme(_)
        | OutOfRange { .. }
        | UnknownProblem(_)
        | NoExactSolution(_)
        | DenseUnavailable(_)
        | JacobianUnavailable
        | LinOpUnavailable
        | GUnavailable(_)
        | MatFun(MatFunError::Incompatible(_)) => EXIT_INPUT,
        _ => EXIT_FAILURE,
    }
}

/// Runs the command line `args` (program name first) and returns the exit
/// status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Info { integrator, option } => cmd_info(&integrator, option.as_deref()),
        Command::Convergence(a) => cmd_convergence(a),
        Command::Problems => cmd_problems(),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            if e.code != EXIT_OK {
                eprintln!("error: {}", e.message);
            }
            e.code
        }
    }
}

fn problem_name(positional: Option<String>, flag: Option<String>) -> Result<String, CliError> {
    match (positional, flag) {
        (Some(a), Some(b)) if !a.eq_ignore_ascii_case(&b) => {
            Err(CliError::input(format!("problem given twice: '{a}' and '{b}'")))
        }
        (Some(a), _) | (None, Some(a)) => Ok(a),
        (None, None) => Err(CliError::input("no problem given; see `expode problems`")),
    }
}

fn load_problem(name: &str, args: &ProblemArgs) -> Result<OdeProblem, CliError> {
    let mut params = Vec::new();
    for p in &args.param {
        params.extend(problems::parse_params(p)?);
    }
    let mut problem = problems::build(name, &params)?;
    if let Some(spec) = &args.tspan {
        let (a, b, n) = parse_tspan(spec)?;
        problem = problem.with_tspan(a, b)?;
        if let Some(n) = n {
            let times = (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect();
            problem = problem.with_output_times(times)?;
        }
    }
    Ok(problem)
}

fn parse_tspan(spec: &str) -> Result<(f64, f64, Option<usize>), CliError> {
    let bad = || CliError::input(format!("--tspan expects a,b[,n], got '{spec}'"));
    let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
    if !(2..=3).contains(&parts.len()) {
        return Err(bad());
    }
    let a: f64 = parts[0].parse().map_err(|_| bad())?;
    let b: f64 = parts[1].parse().map_err(|_| bad())?;
    let n = match parts.get(2) {
        Some(s) => {
            let n: usize = s.parse().map_err(|_| bad())?;
            if n < 2 {
                return Err(CliError::input("--tspan needs at least 2 output points"));
            }
            Some(n)
        }
        None => None,
    };
    Ok((a, b, n))
}

/// Problem defaults, then the options file, then `--opt` flags.
fn layered_options(base: &OptionsSet, file: Option<&Path>, opts: &[String]) -> Result<OptionsSet, CliError> {
    let mut set = base.clone();
    if let Some(path) = file {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("cannot read options file '{}': {e}", path.display())))?;
        for (name, value) in parse_options_file(&text)? {
            set.set_mut(&name, value)?;
        }
    }
    apply_opts(&mut set, opts.iter().map(String::as_str))?;
    Ok(set)
}

fn apply_opts<'a>(set: &mut OptionsSet, opts: impl IntoIterator<Item = &'a str>) -> Result<(), CliError> {
    for item in opts {
        let (name, value) = item
            .split_once('=')
            .ok_or_else(|| CliError::input(format!("expected Name=value, found '{item}'")))?;
        let value = parse_value(value).map_err(|m| CliError::input(format!("option {}: {m}", name.trim())))?;
        set.set_mut(name.trim(), value)?;
    }
    Ok(())
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(io::BufWriter::new(fs::File::create(p).map_err(|e| {
            CliError {
                code: EXIT_FAILURE,
                message: format!("cannot create '{}': {e}", p.display()),
            }
        })?)),
        None => Box::new(io::BufWriter::new(io::stdout().lock())),
    })
}

/// Writes `t,y1,...,yn` rows with 17 significant digits. `sel` holds
/// 1-based component indices; `None` writes every component.
pub fn write_solution_csv<W: Write>(w: &mut W, sol: &Solution, sel: Option<&[usize]>) -> io::Result<()> {
    let n = sol.y.first().map_or(0, |y| y.len());
    let cols: Vec<usize> = match sel {
        Some(s) => s.to_vec(),
        None => (1..=n).collect(),
    };
    write!(w, "t")?;
    for c in &cols {
        write!(w, ",y{c}")?;
    }
    writeln!(w)?;
    for (t, y) in sol.t.iter().zip(&sol.y) {
        write!(w, "{t:.16e}")?;
        for &c in &cols {
            write!(w, ",{:.16e}", y[c - 1])?;
        }
        writeln!(w)?;
    }
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<(), CliError> {
    let name = problem_name(args.name, args.problem.problem.clone())?;
    let problem = load_problem(&name, &args.problem)?;
    let opts = layered_options(problem.recommended_options(), args.options_file.as_deref(), &args.opt)?;
    let sel: Option<Vec<usize>> = opts
        .validate()?
        .num("OutputSel")
        .map(|a| a.data.iter().map(|&i| i as usize).collect());
    let sol = integrate(&problem, &opts)?;
    let mut w = output(args.out.as_deref())?;
    write_solution_csv(&mut w, &sol, sel.as_deref())?;
    w.flush()?;
    if sol.stopped {
        eprintln!("stopped by OutputFcn at t = {}", sol.last().0);
    }
    Ok(())
}

fn cmd_info(integrator: &str, option: Option<&str>) -> Result<(), CliError> {
    print!("{}", options::info(integrator, option)?);
    Ok(())
}

fn cmd_problems() -> Result<(), CliError> {
    for p in PROBLEMS {
        let params: Vec<String> = p.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
        println!("{:<8} {}", p.name, p.summary);
        if !params.is_empty() {
            println!("         parameters: {}", params.join(", "));
        }
    }
    Ok(())
}

/// A method of a convergence study: a label and its option settings.
#[derive(Debug, Clone)]
struct Method {
    label: String,
    settings: Vec<String>,
}

fn parse_method(spec: &str) -> Result<Method, CliError> {
    let (name, rest) = spec.split_once(':').unwrap_or((spec, ""));
    let name = name.trim();
    let mut settings: Vec<String> = match name.to_ascii_lowercase().as_str() {
        s @ ("euler" | "exprk22" | "krogstad") => vec!["Integrator=exprk".into(), format!("Scheme={s}")],
        "exprb32" => vec!["Integrator=exprb".into(), "Order=32".into()],
        "exprb43" => vec!["Integrator=exprb".into(), "Order=43".into()],
        _ => {
            options::catalog_by_name(name)?;
            vec![format!("Integrator={name}")]
        }
    };
    settings.extend(rest.split(';').map(str::trim).filter(|s| !s.is_empty()).map(String::from));
    Ok(Method {
        label: spec.trim().to_string(),
        settings,
    })
}

fn parse_number(s: &str) -> Result<f64, CliError> {
    let bad = || CliError::input(format!("'{s}' is not a positive number"));
    let x = match s.split_once('/') {
        Some((a, b)) => a.trim().parse::<f64>().map_err(|_| bad())? / b.trim().parse::<f64>().map_err(|_| bad())?,
        None => s.trim().parse::<f64>().map_err(|_| bad())?,
    };
    if x.is_finite() && x > 0.0 {
        Ok(x)
    } else {
        Err(bad())
    }
}

/// One cell of a convergence table.
#[derive(Debug, Clone)]
pub struct ConvergenceRow {
    pub integrator: String,
    pub h_or_tol: f64,
    pub error: f64,
    pub steps: usize,
    pub rhs_evals: usize,
    pub matfun_evals: usize,
}

/// Least-squares slope of `log(error)` against `log(h_or_tol)`.
pub fn fitted_order(rows: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|(x, e)| *x > 0.0 && *e > 0.0 && e.is_finite())
        .map(|(x, e)| (x.ln(), e.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

fn run_cell(problem: &OdeProblem, base: &OptionsSet, method: &Method, x: f64, adaptive: bool) -> Result<ConvergenceRow, CliError> {
    let mut opts = base.clone();
    apply_opts(&mut opts, method.settings.iter().map(String::as_str))?;
    if adaptive {
        opts.set_mut("RelTol", x)?;
        opts.set_mut("AbsTol", x)?;
    } else if opts.resolve_integrator()?.is_constant_step() {
        opts.set_mut("StepSize", x)?;
    } else {
        opts.set_mut("hConstant", true)?;
        opts.set_mut("InitialStep", x)?;
    }
    let sol = integrate(problem, &opts)?;
    let (t, y) = sol.last();
    let error = (y - problem.exact(t)?).amax();
    Ok(ConvergenceRow {
        integrator: method.label.clone(),
        h_or_tol: x,
        error,
        steps: sol.stats.n_steps,
        rhs_evals: sol.stats.n_rhs_evals + sol.stats.n_g_evals,
        matfun_evals: sol.stats.matfun.n_mfev,
    })
}

fn cmd_convergence(args: ConvergenceArgs) -> Result<(), CliError> {
    let name = problem_name(args.name, args.problem.problem.clone())?;
    let problem = load_problem(&name, &args.problem)?;
    if !problem.has_exact() {
        return Err(ExpodeError::NoExactSolution(problem.name().to_string()).into());
    }
    let base = layered_options(problem.recommended_options(), args.options_file.as_deref(), &args.opt)?;
    let methods: Vec<Method> = if args.method.is_empty() {
        DEFAULT_METHODS.iter().map(|m| parse_method(m)).collect::<Result<_, _>>()?
    } else {
        args.method.iter().map(|m| parse_method(m)).collect::<Result<_, _>>()?
    };
    let adaptive = !args.tol.is_empty();
    let xs: Vec<f64> = if adaptive {
        args.tol.iter().map(|s| parse_number(s)).collect::<Result<_, _>>()?
    } else if args.h.is_empty() {
        DEFAULT_H.to_vec()
    } else {
        args.h.iter().map(|s| parse_number(s)).collect::<Result<_, _>>()?
    };

    let cells: Vec<(usize, usize)> = (0..methods.len()).flat_map(|m| (0..xs.len()).map(move |i| (m, i))).collect();
    let results: Mutex<Vec<((usize, usize), Result<ConvergenceRow, CliError>)>> = Mutex::new(Vec::new());
    let next = AtomicUsize::new(0);
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(cells.len());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(m, j)) = cells.get(i) else { break };
                let r = run_cell(&problem, &base, &methods[m], xs[j], adaptive);
                results.lock().expect("results lock").push(((m, j), r));
            });
        }
    });
    let mut results = results.into_inner().expect("results lock");
    results.sort_by_key(|(k, _)| *k);
    let mut rows = Vec::with_capacity(results.len());
    for (_, r) in results {
        rows.push(r?);
    }

    let mut w = output(args.out.as_deref())?;
    writeln!(w, "integrator,h_or_tol,error,steps,rhs_evals,matfun_evals")?;
    for r in &rows {
        writeln!(
            w,
            "{},{:.16e},{:.16e},{},{},{}",
            r.integrator, r.h_or_tol, r.error, r.steps, r.rhs_evals, r.matfun_evals
        )?;
    }
    w.flush()?;
    drop(w);

    if let Some(out) = &args.out {
        let dat = out.with_extension("dat");
        let mut d = io::BufWriter::new(fs::File::create(&dat)?);
        for m in &methods {
            writeln!(d, "# {}", m.label)?;
            writeln!(d, "# h_or_tol error steps rhs_evals matfun_evals")?;
            for r in rows.iter().filter(|r| r.integrator == m.label) {
                writeln!(d, "{:.16e} {:.16e} {} {} {}", r.h_or_tol, r.error, r.steps, r.rhs_evals, r.matfun_evals)?;
            }
            writeln!(d)?;
            writeln!(d)?;
        }
        d.flush()?;
    }

    let what = if adaptive { "tolerance exponent" } else { "order" };
    for m in &methods {
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.integrator == m.label)
            .map(|r| (r.h_or_tol, r.error))
            .collect();
        let line = match fitted_order(&pts) {
            Some(p) => format!("{}: fitted {what} {p:.2}", m.label),
            None => format!("{}: fitted {what} unavailable", m.label),
        };
        if args.out.is_some() {
            println!("{line}");
        } else {
            eprintln!("{line}");
        }
    }
    Ok(())
}
