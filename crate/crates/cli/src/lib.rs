//! Config-driven runner behind the `orbitfix` binary.

pub mod config;

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use orbitfix_core::certificates::{
    theorem1_certificates, CertificateKind, CertificateOptions, CertificateReport,
};
use orbitfix_core::engine::{Engine, RunTrace, StopReason};
use orbitfix_core::operators::{averagedness_certificate, SampleSpec};
use orbitfix_core::schedules::{chi_table, validate_weights, EtaSchedule, WeightSchedule};
use serde_json::{json, Value};

pub use config::{build, Built, RunConfig};

/// Process exit codes.
pub const EXIT_OK: u8 = 0;
pub const EXIT_IO: u8 = 1;
pub const EXIT_DIVERGED: u8 = 2;
pub const EXIT_CONFIG: u8 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] orbitfix_core::Error),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Core(e) if e.is_divergence() => EXIT_DIVERGED,
            CliError::Core(_) => EXIT_CONFIG,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// 17 significant digits.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub const TRACE_HEADER: &str = "n,residual,theta_n,lambda_n,phi_n,dist_to_ref,cert_i_slack,cert_ii_slack";

/// The trace as CSV; slack columns are empty where no certificate exists.
pub fn trace_csv(trace: &RunTrace, certs: &[CertificateReport]) -> String {
    let slack = |kind: CertificateKind, n: usize| {
        certs.iter().find(|c| c.kind == kind).and_then(|c| c.slack_at(n))
    };
    let mut out = String::with_capacity(96 * (trace.rows.len() + 1));
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for row in &trace.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            row.n,
            num(row.residual),
            num(row.theta),
            num(row.lambda),
            num(row.phi),
            opt(row.dist_to_ref),
            opt(slack(CertificateKind::I, row.n)),
            opt(slack(CertificateKind::Ii, row.n)),
        );
    }
    out
}

fn certificate_json(result: &Result<Vec<CertificateReport>, orbitfix_core::Error>) -> Value {
    match result {
        Ok(reports) => {
            let mut map = serde_json::Map::new();
            for r in reports {
                map.insert(
                    r.kind.name().into(),
                    json!({
                        "passed": r.passed(),
                        "min_slack": r.min_slack,
                        "first_violation": r.first_violation,
                        "tolerance": r.tolerance,
                    }),
                );
            }
            Value::Object(map)
        }
        Err(e) => json!({ "unavailable": e.to_string() }),
    }
}

fn point_json(p: &orbitfix_core::space::Point) -> Value {
    json!(p.as_slice())
}

/// Outcome of `run`, already written to disk.
pub struct RunOutcome {
    pub stop: StopReason,
    pub report: Value,
}

pub fn cmd_run(cfg: &RunConfig, out_dir: Option<&Path>, seed: Option<u64>) -> Result<RunOutcome, CliError> {
    let built = build(cfg)?;
    let config = &built.preset.config;
    let trace = Engine::new(config)?.finish()?;
    let certs = match &config.reference {
        Some(x) if trace.has_points() && !matches!(trace.stop, StopReason::Diverged { .. }) => theorem1_certificates(
            &trace,
            config,
            x,
            &CertificateOptions::only(&[CertificateKind::I, CertificateKind::Ii, CertificateKind::Iii]),
        ),
        Some(_) => Err(orbitfix_core::Error::CertificateUnavailable("the run diverged".into())),
        None => Err(orbitfix_core::Error::CertificateUnavailable("no reference point".into())),
    };
    let csv = trace_csv(&trace, certs.as_deref().unwrap_or(&[]));

    let solution = match &trace.stop {
        StopReason::Diverged { .. } => None,
        _ => built.preset.solution(&trace).ok(),
    };
    let solution_error = match (&solution, &built.solution) {
        (Some(s), Some(z)) => Some(s.dist(z)),
        _ => None,
    };
    let report = json!({
        "problem": built.problem.name,
        "solver": built.preset.name,
        "weights": config.weights.name(),
        "seed": seed.unwrap_or(cfg.seed),
        "stop_reason": trace.stop.as_str(),
        "diverged_at": match trace.stop { StopReason::Diverged { iteration } => Some(iteration), _ => None },
        "iterations": trace.iterations(),
        "final_residual": trace.final_residual(),
        "final_dist_to_ref": trace.rows.last().and_then(|r| r.dist_to_ref),
        "final_point": point_json(trace.final_point()),
        "solution": solution.as_ref().map(point_json),
        "solution_error": solution_error,
        "reference": config.reference.as_ref().map(point_json),
        "degenerate_subgradient_steps": trace.degenerate_subgradient,
        "certificates": certificate_json(&certs),
        "notes": built.preset.notes,
    });

    let (trace_path, report_path) = cfg.outputs.resolve(out_dir);
    write_file(&trace_path, csv.as_bytes())?;
    let mut text = serde_json::to_string_pretty(&report).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    write_file(&report_path, text.as_bytes())?;
    Ok(RunOutcome { stop: trace.stop, report })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    let mut f = std::fs::File::create(path).map_err(|e| io_err(path, e))?;
    f.write_all(bytes).map_err(|e| io_err(path, e))
}

/// Checks everything that does not need iterating. Fails on the first
/// violated condition; otherwise returns the validation report.
pub fn cmd_validate(cfg: &RunConfig, seed: Option<u64>) -> Result<Value, CliError> {
    let built = build(cfg)?;
    let config = &built.preset.config;
    let weights = validate_weights(&config.weights, cfg.horizon.max(1))?;
    if !weights.passed() {
        return Err(CliError::Config(format!(
            "weight schedule '{}' fails validation: condition (a) {}, decay {:?}, chi {}, toeplitz deviation {:.3e}",
            weights.schedule,
            weights.condition_a,
            weights.decay,
            weights.chi.describe(),
            weights.toeplitz_deviation
        )));
    }
    let lambdas = config.relaxation_sequence()?;
    let stack = config.stacks.stack(0)?;
    let seed = seed.unwrap_or(cfg.seed);
    let mut layers = Vec::new();
    for (i, op) in stack.layers().iter().enumerate() {
        let r = averagedness_certificate(op, SampleSpec::new(config.x0.dim(), 1000, seed))?;
        if !r.passed {
            return Err(CliError::Config(format!(
                "layer {} ({}) violates its declared alpha = {} by {:.3e}",
                i + 1,
                op.label(),
                r.alpha,
                r.max_violation
            )));
        }
        layers.push(json!({
            "layer": i + 1,
            "label": op.label(),
            "alpha": r.alpha,
            "pairs_checked": r.pairs_checked,
            "max_violation": r.max_violation,
        }));
    }
    let case_d = built.preset.case_d.as_ref().map(|r| {
        json!({
            "valid": r.valid(),
            "min_lambda_margin": r.lambda_margins.iter().cloned().fold(f64::INFINITY, f64::min),
            "min_third_margin": r.third_margins.iter().cloned().fold(f64::INFINITY, f64::min),
            "min_eta_margin": r.min_eta_margin,
        })
    });
    Ok(json!({
        "valid": true,
        "problem": built.problem.name,
        "solver": built.preset.name,
        "phi_0": stack.phi(),
        "case": stack.case().letter().to_string(),
        "horizon": cfg.horizon,
        "lambda_range": [
            lambdas.iter().cloned().fold(f64::INFINITY, f64::min),
            lambdas.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        ],
        "weights": {
            "schedule": weights.schedule,
            "max_abs_row_sum": weights.max_abs_row_sum,
            "max_row_sum_error": weights.max_row_sum_error,
            "decay": format!("{:?}", weights.decay),
            "chi": weights.chi.describe(),
            "toeplitz_deviation": weights.toeplitz_deviation,
            "notes": weights.notes,
        },
        "layers": layers,
        "case_d": case_d,
        "notes": built.preset.notes,
    }))
}

/// Parses `memoryless`, `cesaro`, `window:<w>`, `constant:<eta>` or
/// `nesterov:<tau>`.
pub fn parse_family(text: &str) -> Result<WeightSchedule, CliError> {
    let (name, arg) = match text.split_once(':') {
        Some((n, a)) => (n, Some(a)),
        None => (text, None),
    };
    let number = |what: &str| -> Result<f64, CliError> {
        arg.ok_or_else(|| CliError::Config(format!("family '{name}' needs ':<{what}>'")))?
            .parse::<f64>()
            .map_err(|e| CliError::Config(format!("bad {what} in '{text}': {e}")))
    };
    Ok(match name {
        "memoryless" => WeightSchedule::memoryless(),
        "cesaro" => WeightSchedule::cesaro(),
        "window" => {
            let w = number("w")?;
            if !(w >= 1.0 && w.fract() == 0.0) {
                return Err(CliError::Config(format!("window length {w} must be a positive integer")));
            }
            WeightSchedule::window(w as usize)
        }
        "constant" => WeightSchedule::inertial(EtaSchedule::Constant(number("eta")?))?,
        "nesterov" => WeightSchedule::inertial(EtaSchedule::NesterovLike { tau: number("tau")? })?,
        other => {
            return Err(CliError::Config(format!(
                "unknown family '{other}' (memoryless, cesaro, window:<w>, constant:<eta>, nesterov:<tau>)"
            )))
        }
    })
}

/// CSV `n,chi_n,analytic_bound` for `n = 0, …, N`.
pub fn cmd_chi(family: &str, horizon: usize, truncation: usize) -> Result<String, CliError> {
    let schedule = parse_family(family)?;
    let table = chi_table(&schedule, horizon, truncation)?;
    let mut out = String::from("n,chi_n,analytic_bound\n");
    for e in table {
        let _ = writeln!(out, "{},{},{}", e.n, num(e.value), opt(e.analytic_bound));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_carry_seventeen_digits() {
        assert_eq!(num(0.1), "1.0000000000000001e-1");
        assert_eq!(num(2.0), "2.0000000000000000e0");
        assert_eq!(opt(None), "");
    }

    #[test]
    fn families_parse() {
        assert_eq!(parse_family("window:3").unwrap().name(), "window(3)");
        assert!(parse_family("window:0").is_err());
        assert!(parse_family("nesterov").is_err());
        assert!(parse_family("constant:1.0").is_err());
        assert!(parse_family("bogus").is_err());
    }

    #[test]
    fn chi_table_has_bound_column() {
        let csv = cmd_chi("nesterov:2", 3, 200).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "n,chi_n,analytic_bound");
        assert_eq!(lines.len(), 5);
        assert!(lines[1].ends_with("3.5000000000000000e0"));
        let csv = cmd_chi("memoryless", 0, 200).unwrap();
        let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
        let value: f64 = row[1].parse().unwrap();
        assert!((value - 1.0 / (1.0 - (-1.0f64).exp())).abs() < 1e-12);
    }
}
