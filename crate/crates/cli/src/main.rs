use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use slaterkit::acceptance;
use slaterkit::certificates::{
    build_bad_functional, build_no_slater_certificate, refinement_study, BadProfile, RefinementModel,
    TemplateFamily,
};
use slaterkit::io::{self, ProblemFile};
use slaterkit::kkt::{recover_multipliers_linear, recover_multipliers_nonlinear, KktStatus};
use slaterkit::preprocess::build_mfcq_system;
use slaterkit::slater::{find_linearized_slater, find_slater};
use slaterkit::{Error, SimpleFunction};

const OK: u8 = 0;
const USAGE: u8 = 1;
const NUMERICAL: u8 = 2;
const NEGATIVE: u8 = 3;
const NOT_APPLICABLE: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "slaterkit", version, about = "Slater points, dual certificates and KKT multipliers for box-constrained problems")]
struct Cli {
    /// Absolute feasibility and relative activity tolerance.
    #[arg(long, global = true, env = "SLATERKIT_TOL", default_value_t = 1e-9)]
    tol: f64,

    /// Write the JSON report here instead of standard output.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check that a point satisfies all constraints.
    CheckFeasible {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        point: PathBuf,
    },
    /// Search for a point strictly inside the box satisfying the linear constraints.
    FindSlater {
        #[arg(long)]
        problem: PathBuf,
    },
    /// Slater search with the active nonlinear constraints linearized at a point.
    FindLinearizedSlater {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        point: PathBuf,
    },
    /// Replace the linear constraints by an equivalent system satisfying MFCQ.
    Preprocess {
        #[arg(long)]
        problem: PathBuf,
        /// Also write the reduced problem as a problem file.
        #[arg(long)]
        emit_problem: Option<PathBuf>,
    },
    /// Recover Lagrange multipliers at a point, or a descent direction.
    Kkt {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        point: PathBuf,
        /// Objective gradient; defaults to the one in the problem file.
        #[arg(long)]
        grad: Option<PathBuf>,
    },
    /// Build a dual certificate that no Slater point exists.
    Certify {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        point: PathBuf,
        #[arg(long, value_enum, default_value_t = ProfileArg::Log)]
        profile: ProfileArg,
    },
    /// Minimal multipliers along a mesh-refinement family.
    Refine {
        /// log-counterexample, bounded-control or template.
        #[arg(long)]
        model: String,
        /// Comma-separated numbers of atoms.
        #[arg(long, value_delimiter = ',', required = true)]
        levels: Vec<usize>,
        /// Family description for --model template.
        #[arg(long)]
        template: Option<PathBuf>,
        /// Also write the table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Run the bundled acceptance suite.
    Selftest {
        /// Directory holding the bundled fixtures.
        #[arg(long)]
        fixtures: Option<PathBuf>,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ProfileArg {
    Log,
    Constant,
}

/// A finished command: exit code, status word and payload.
struct Outcome {
    code: u8,
    status: String,
    payload: Value,
    summary: String,
}

impl Outcome {
    fn new(code: u8, status: &str, payload: Value, summary: impl Into<String>) -> Self {
        Self {
            code,
            status: status.into(),
            payload,
            summary: summary.into(),
        }
    }
}

enum Failure {
    Usage(String),
    Io(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) | Failure::Io(_) => USAGE,
            Failure::Core(e) => match e {
                Error::Infeasible(_)
                | Error::NotInBox { .. }
                | Error::EmptyPolyhedron
                | Error::InconsistentEqualities { .. } => NEGATIVE,
                Error::NumericalFailure(_)
                | Error::CertificateNotFound(_)
                | Error::GradientCheckFailed { .. }
                | Error::ConstructionFailed(_) => NUMERICAL,
                _ => USAGE,
            },
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Usage(m) | Failure::Io(m) => m.clone(),
            Failure::Core(e) => e.to_string(),
        }
    }

    fn kind(&self) -> String {
        match self {
            Failure::Usage(_) => "usage".into(),
            Failure::Io(_) => "io".into(),
            Failure::Core(e) => format!("{e:?}").split([' ', '(', '{']).next().unwrap_or("").to_string(),
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn load_problem(path: &Path) -> Result<ProblemFile, Failure> {
    io::parse_problem(&read(path)?).map_err(|e| match e {
        Error::Parse { field, message } => Failure::Usage(format!("{}: {field}: {message}", path.display())),
        other => Failure::Usage(format!("{}: {other}", path.display())),
    })
}

fn load_point(path: &Path, m: usize, what: &str) -> Result<SimpleFunction, Failure> {
    let x = io::parse_point(&read(path)?, what).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    if x.len() != m {
        return Err(Failure::Usage(format!(
            "{}: {what}: expected {m} entries, found {}",
            path.display(),
            x.len()
        )));
    }
    Ok(x)
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn run(cli: &Cli) -> Result<Outcome, Failure> {
    let tol = cli.tol;
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Failure::Usage(format!("--tol must be positive and finite, got {tol}")));
    }
    match &cli.command {
        Command::CheckFeasible { problem, point } => {
            let pf = load_problem(problem)?;
            let x = load_point(point, pf.problem.m(), "point")?;
            let rep = pf.problem.check_feasible(&x, tol)?;
            let (code, status) = if rep.feasible { (OK, "feasible") } else { (NEGATIVE, "infeasible") };
            let mut payload = io::to_value(&rep);
            payload["worst_residual"] = json!(rep.worst_residual());
            Ok(Outcome::new(code, status, payload, rep.summary()))
        }
        Command::FindSlater { problem } => {
            let pf = load_problem(problem)?;
            slater_outcome(find_slater(&pf.problem, tol)?)
        }
        Command::FindLinearizedSlater { problem, point } => {
            let pf = load_problem(problem)?;
            let x = load_point(point, pf.problem.m(), "point")?;
            slater_outcome(find_linearized_slater(&pf.problem, &x, tol)?)
        }
        Command::Preprocess { problem, emit_problem } => {
            let pf = load_problem(problem)?;
            let sys = build_mfcq_system(&pf.problem, tol)?;
            if let Some(path) = emit_problem {
                let tilde = sys.to_problem(&pf.problem)?;
                let v = io::problem_to_value(&tilde, pf.objective.as_ref())?;
                write(path, &io::to_json_string(&v))?;
            }
            let summary = format!(
                "{} inequalities and {} equalities after reduction (from {} and {})",
                sys.tilde_ineq.len(),
                sys.tilde_eq.len(),
                pf.problem.inequalities().len(),
                pf.problem.equalities().len()
            );
            let mut payload = io::to_value(&sys);
            payload["witness_margin"] = float(sys.witness_margin(&pf.problem));
            Ok(Outcome::new(OK, "reduced", payload, summary))
        }
        Command::Kkt { problem, point, grad } => {
            let pf = load_problem(problem)?;
            let m = pf.problem.m();
            let x = load_point(point, m, "point")?;
            let g = match (grad, &pf.objective) {
                (Some(path), _) => load_point(path, m, "gradient")?,
                (None, Some(obj)) => obj.gradient().clone(),
                (None, None) => {
                    return Err(Failure::Usage(
                        "no objective gradient: pass --grad or put objective_gradient/objective_linear in the problem file".into(),
                    ))
                }
            };
            let out = if pf.problem.nonlinear().is_empty() {
                recover_multipliers_linear(&pf.problem, &x, &g, tol)?
            } else {
                recover_multipliers_nonlinear(&pf.problem, &x, &g, tol)?
            };
            let (code, status, summary) = match out.status {
                KktStatus::MultipliersFound => (
                    OK,
                    "multipliers_found",
                    format!(
                        "multipliers found, size {:.6}",
                        out.multipliers.as_ref().map_or(0.0, |m| m.size())
                    ),
                ),
                KktStatus::NoMultipliers => (
                    NEGATIVE,
                    "no_multipliers",
                    format!("no multipliers; descent slope {:.6e}", out.descent_slope.unwrap_or(f64::NAN)),
                ),
                KktStatus::NotApplicable => (
                    NOT_APPLICABLE,
                    "not_applicable",
                    out.message.clone().unwrap_or_default(),
                ),
            };
            Ok(Outcome::new(code, status, io::to_value(&out), summary))
        }
        Command::Certify { problem, point, profile } => {
            let pf = load_problem(problem)?;
            let x = load_point(point, pf.problem.m(), "point")?;
            let slater = find_slater(&pf.problem, tol)?;
            if slater.found() {
                return Ok(Outcome::new(
                    NEGATIVE,
                    "slater_point_exists",
                    json!({ "slater": io::to_value(&slater) }),
                    "a Slater point exists, so no certificate can be built",
                ));
            }
            let cert = build_no_slater_certificate(&pf.problem, &x, tol)?;
            let profile = match profile {
                ProfileArg::Log => BadProfile::Log,
                ProfileArg::Constant => BadProfile::Constant,
            };
            let z = build_bad_functional(&pf.problem, &x, &cert, profile)?;
            let summary = format!(
                "certificate built ({:?} normalization), |ζ| maximal at atom {}",
                cert.normalization, cert.nonzero_atom
            );
            Ok(Outcome::new(
                OK,
                "certificate_built",
                json!({ "certificate": io::to_value(&cert), "bad_functional": io::to_value(&z) }),
                summary,
            ))
        }
        Command::Refine { model, levels, template, csv } => {
            let model = match (model.as_str(), template) {
                ("template", Some(path)) => {
                    let fam: TemplateFamily = serde_json::from_str(&read(path)?)
                        .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
                    RefinementModel::Template(fam)
                }
                ("template", None) => return Err(Failure::Usage("--model template needs --template FILE".into())),
                (id, _) => RefinementModel::from_id(id)?,
            };
            let rep = refinement_study(&model, levels, tol)?;
            if let Some(path) = csv {
                write(path, &rep.to_csv())?;
            }
            let summary = rep
                .growth
                .as_ref()
                .map_or_else(|| format!("{} levels", rep.rows.len()), |g| g.description.clone());
            Ok(Outcome::new(OK, "done", io::to_value(&rep), summary))
        }
        Command::Selftest { fixtures } => selftest(fixtures.as_deref(), tol),
    }
}

fn float(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else if x > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

fn slater_outcome(rep: slaterkit::slater::SlaterReport) -> Result<Outcome, Failure> {
    let (code, status, summary) = if rep.found() {
        let margin = rep.witness.as_ref().map_or(f64::NAN, |w| w.margin);
        (OK, "found", format!("Slater point found, margin {margin:.6e}"))
    } else {
        (NEGATIVE, "not_found", "no Slater point".to_string())
    };
    Ok(Outcome::new(code, status, io::to_value(&rep), summary))
}

fn default_fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn selftest(fixtures: Option<&Path>, tol: f64) -> Result<Outcome, Failure> {
    let dir = fixtures.map_or_else(default_fixtures, Path::to_path_buf);
    let problem = dir.join("counterexample_m4.json");
    let point = dir.join("zero_m4.json");
    if !problem.is_file() || !point.is_file() {
        return Ok(Outcome::new(
            NUMERICAL,
            "fixtures_missing",
            json!({ "fixtures": dir.display().to_string() }),
            format!("bundled fixtures not found in {}", dir.display()),
        ));
    }
    let mut lines = Vec::new();
    let mut results = Vec::new();
    let pf = load_problem(&problem)?;
    let x = load_point(&point, pf.problem.m(), "point")?;
    let feasible = pf.problem.check_feasible(&x, tol)?.feasible;
    let no_slater = !find_slater(&pf.problem, tol)?.found();
    let fixtures_ok = feasible && no_slater;
    let line = format!(
        "[{}] fixtures: zero point feasible = {feasible}, Slater point absent = {no_slater}",
        if fixtures_ok { "PASS" } else { "FAIL" }
    );
    lines.push(line);
    results.push(json!({"id": "fixtures", "passed": fixtures_ok}));

    let mut all = fixtures_ok;
    for r in acceptance::run_all(tol) {
        all &= r.passed;
        lines.push(r.to_string());
        results.push(json!({"id": r.id, "name": r.name, "passed": r.passed, "detail": r.detail}));
    }
    for l in &lines {
        eprintln!("{l}");
    }
    let (code, status) = if all { (OK, "all_passed") } else { (NEGATIVE, "failures") };
    let failed = results.iter().filter(|r| r["passed"] == json!(false)).count();
    Ok(Outcome::new(
        code,
        status,
        json!({ "criteria": results }),
        format!("{} checks, {failed} failed", results.len()),
    ))
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::CheckFeasible { .. } => "check-feasible",
        Command::FindSlater { .. } => "find-slater",
        Command::FindLinearizedSlater { .. } => "find-linearized-slater",
        Command::Preprocess { .. } => "preprocess",
        Command::Kkt { .. } => "kkt",
        Command::Certify { .. } => "certify",
        Command::Refine { .. } => "refine",
        Command::Selftest { .. } => "selftest",
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { USAGE } else { OK });
        }
    };
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let mut report = json!({
        "schema_version": 1,
        "command": { "name": command_name(&cli.command), "argv": argv },
        "tolerances": { "tol": cli.tol },
    });
    let summary;
    let code = match run(&cli) {
        Ok(out) => {
            report["status"] = json!(out.status);
            report["result"] = out.payload;
            summary = out.summary;
            out.code
        }
        Err(f) => {
            report["status"] = json!("error");
            report["error"] = json!({ "kind": f.kind(), "message": f.message() });
            summary = format!("error: {}", f.message());
            f.code()
        }
    };
    let text = io::to_json_string(&report);
    match &cli.output {
        Some(path) => {
            if let Err(e) = fs::write(path, &text) {
                eprintln!("error: {}: {e}", path.display());
                return ExitCode::from(USAGE);
            }
            println!("{summary}");
        }
        None => {
            print!("{text}");
            eprintln!("{summary}");
        }
    }
    ExitCode::from(code)
}
