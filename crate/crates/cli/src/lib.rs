//! Front end for building, solving and checking branched time structures.
//!
//! Every command resolves all of its inputs (spec file, expression, initial
//! conditions, output locations) into a [`RunManifest`] before computing
//! anything, and reports through a stable exit code:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | valid structure / well-posed problem |
//! | 1 | input error |
//! | 2 | consistency failure |
//! | 3 | blow-up |

pub mod output;
pub mod spec;

use branchtime_core::cauchy::{self, CauchyProblem, ProblemError, SolveError, SolverConfig, Status};
use branchtime_core::expr::ParseError;
use branchtime_core::order::{self, OrderError};
use branchtime_core::timeline::{validate, BuildError, Horizon, TemporalStructure, TimePoint};
use branchtime_core::{parse, Expr};
use spec::StructureSpec;
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    SpecSyntax { path: PathBuf, source: serde_json::Error },
    #[error("horizon: {0}")]
    Horizon(#[source] BuildError),
    #[error("events[{index}]: {source}")]
    Event { index: usize, source: BuildError },
    #[error("identifications[{index}]: {source}")]
    Identification { index: usize, source: BuildError },
    #[error("invalid structure: {0}")]
    Invalid(String),
    #[error("--f {text:?}: {source}")]
    Expr { text: String, source: ParseError },
    #[error("--ic {text:?}: {reason}")]
    InitialCondition { text: String, reason: String },
    #[error("--horizon {text:?}: expected lo,hi with lo < hi")]
    HorizonFlag { text: String },
    #[error("{0}")]
    Problem(#[from] ProblemError),
    #[error("{0}")]
    Order(#[from] OrderError),
    #[error("writing CSV: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        1
    }
}

pub fn parse_horizon(text: &str) -> Result<Horizon, CliError> {
    let fail = || CliError::HorizonFlag { text: text.into() };
    let (lo, hi) = text.split_once(',').ok_or_else(fail)?;
    let lo: f64 = lo.trim().parse().map_err(|_| fail())?;
    let hi: f64 = hi.trim().parse().map_err(|_| fail())?;
    Horizon::new(lo, hi).map_err(|_| fail())
}

/// One `--ic` argument, `path@t=value`, e.g. `[]@-1=1` or `[1,2]@0.5=3`.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialCondition {
    pub text: String,
    pub path: Vec<i32>,
    pub t: f64,
    pub x: f64,
}

impl std::str::FromStr for InitialCondition {
    type Err = CliError;

    fn from_str(text: &str) -> Result<Self, CliError> {
        let fail = |reason: &str| CliError::InitialCondition {
            text: text.into(),
            reason: reason.into(),
        };
        let (path, rest) = text.split_once('@').ok_or_else(|| fail("expected path@t=value"))?;
        let (t, x) = rest.split_once('=').ok_or_else(|| fail("expected path@t=value"))?;
        let path: Vec<i32> = serde_json::from_str(path.trim())
            .map_err(|_| fail("branch path must look like [] or [1,2]"))?;
        let t: f64 = t.trim().parse().map_err(|_| fail("t is not a number"))?;
        let x: f64 = x.trim().parse().map_err(|_| fail("value is not a number"))?;
        if !t.is_finite() || !x.is_finite() {
            return Err(fail("t and value must be finite"));
        }
        Ok(InitialCondition {
            text: text.into(),
            path,
            t,
            x,
        })
    }
}

/// Loads and builds the structure behind a spec path.
pub fn load_structure(path: &Path, horizon: Option<Horizon>) -> Result<TemporalStructure, CliError> {
    StructureSpec::read(path)?.build(horizon)
}

fn check_parent(path: &Path) -> Result<(), CliError> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() && !dir.is_dir() => Err(CliError::Io {
            path: path.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "parent directory does not exist"),
        }),
        _ => Ok(()),
    }
}

/// Unresolved inputs of a `solve` run, as given on the command line.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveRequest {
    pub spec: PathBuf,
    pub horizon: Option<Horizon>,
    pub f: String,
    pub conditions: Vec<InitialCondition>,
    pub config: SolverConfig,
    pub out: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

/// A `solve` run with every reference resolved.
#[derive(Debug, Clone)]
pub struct RunManifest {
    pub structure: TemporalStructure,
    pub f: Expr,
    pub problem: CauchyProblem,
    pub config: SolverConfig,
    pub out: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

impl RunManifest {
    pub fn resolve(req: &SolveRequest) -> Result<Self, CliError> {
        req.config.check()?;
        let structure = load_structure(&req.spec, req.horizon)?;
        let f = parse(&req.f).map_err(|source| CliError::Expr {
            text: req.f.clone(),
            source,
        })?;
        let mut points: Vec<(TimePoint, f64)> = Vec::with_capacity(req.conditions.len());
        for ic in &req.conditions {
            let p = structure.locate(&ic.path, ic.t).map_err(|e| CliError::InitialCondition {
                text: ic.text.clone(),
                reason: e.to_string(),
            })?;
            points.push((p, ic.x));
        }
        if points.is_empty() {
            return Err(ProblemError::NoConditions.into());
        }
        for p in [&req.out, &req.report].into_iter().flatten() {
            check_parent(p)?;
        }
        Ok(RunManifest {
            problem: CauchyProblem::new(f.clone(), points),
            structure,
            f,
            config: req.config,
            out: req.out.clone(),
            report: req.report.clone(),
        })
    }
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn emit<W: Write>(stdout: &mut W, text: &str) -> Result<(), CliError> {
    stdout.write_all(text.as_bytes()).map_err(|source| CliError::Io {
        path: PathBuf::from("<stdout>"),
        source,
    })
}

pub fn cmd_build<W: Write>(spec: &Path, horizon: Option<Horizon>, stdout: &mut W) -> Result<i32, CliError> {
    let s = load_structure(spec, horizon)?;
    let summary = output::build_summary(&s);
    emit(stdout, &summary)?;
    let report = validate(&s);
    if report.is_valid() {
        Ok(0)
    } else {
        let names: Vec<&str> = report.failures().map(|c| c.name).collect();
        Err(CliError::Invalid(names.join(", ")))
    }
}

pub fn exit_code_for(status: Status) -> i32 {
    match status {
        Status::WellPosed => 0,
        Status::Blowup => 3,
        Status::InconsistentInitialConditions
        | Status::StickingMismatch
        | Status::LoopInconsistent
        | Status::Unreached => 2,
    }
}

pub fn cmd_solve<W: Write>(req: &SolveRequest, stdout: &mut W) -> Result<i32, CliError> {
    let m = RunManifest::resolve(req)?;
    match cauchy::solve(&m.structure, &m.problem, &m.config) {
        Ok(sol) => {
            let mut csv = Vec::new();
            output::write_csv(&m.structure, &sol, &mut csv)?;
            match &m.out {
                Some(path) => write_file(path, &csv)?,
                None => stdout.write_all(&csv).map_err(|source| CliError::Io {
                    path: PathBuf::from("<stdout>"),
                    source,
                })?,
            }
            if let Some(path) = &m.report {
                let text = output::report_text(&m.structure, &cauchy::ConsistencyReport::WELL_POSED, &m.config);
                write_file(path, text.as_bytes())?;
            }
            Ok(0)
        }
        Err(SolveError::Problem(e)) => Err(e.into()),
        Err(SolveError::Report(r)) => {
            let text = output::report_text(&m.structure, &r, &m.config);
            match &m.report {
                Some(path) => write_file(path, text.as_bytes())?,
                None => emit(stdout, &text)?,
            }
            Ok(exit_code_for(r.status))
        }
    }
}

pub fn cmd_graph<W: Write>(
    spec: &Path,
    horizon: Option<Horizon>,
    dot_path: Option<&Path>,
    stdout: &mut W,
) -> Result<i32, CliError> {
    let s = load_structure(spec, horizon)?;
    if let Some(p) = dot_path {
        check_parent(p)?;
    }
    let text = output::dot(&s);
    match dot_path {
        Some(p) => write_file(p, text.as_bytes())?,
        None => emit(stdout, &text)?,
    }
    Ok(0)
}

/// With `mccabe`, diagnoses the quotient instead of the structure itself.
pub fn cmd_check<W: Write>(
    spec: &Path,
    horizon: Option<Horizon>,
    mccabe: bool,
    stdout: &mut W,
) -> Result<i32, CliError> {
    let s = load_structure(spec, horizon)?;
    let s = if mccabe { order::mccabe_quotient(&s)? } else { s };
    let quotient_verdict = order::mccabe_quotient(&s).ok().map(|q| order::is_hausdorff(&q));
    emit(stdout, &output::check_text(&s, quotient_verdict))?;
    Ok(0)
}
