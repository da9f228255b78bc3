//! Executable forms of the convergence inequalities: per-iteration
//! Fejér-type certificates, the Grönwall envelope, summability monitors and
//! the parameter validator for inertial iterations with `η_n → η`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::engine::{IterationConfig, RunTrace};
use crate::space::Point;
use crate::{Error, Result};

/// Which inequality a certificate checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum CertificateKind {
    /// `‖x_{n+1} − x‖ ≤ Σ_j |μ_{n,j}| ‖x_j − x‖ + ϑ_n`.
    I,
    /// The squared-distance bound with the residual term
    /// `−λ_n(1/φ_n − λ_n)‖T_n x̄_n − x̄_n‖²`.
    Ii,
    /// The squared-distance bound with the layerwise term
    /// `−λ_n max_i ((1 − α_i)/α_i)‖(Id − T_i)T_{i+} x̄_n − (Id − T_i)T_{i+} x‖²`.
    Iii,
}

impl CertificateKind {
    pub fn name(self) -> &'static str {
        match self {
            CertificateKind::I => "i",
            CertificateKind::Ii => "ii",
            CertificateKind::Iii => "iii",
        }
    }
}

pub const DEFAULT_CERTIFICATE_TOLERANCE: f64 = 1e-9;
pub const DEFAULT_FIX_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct CertificateOptions {
    pub kinds: Vec<CertificateKind>,
    /// PASS iff every slack is `≥ −tolerance`.
    pub tolerance: f64,
    /// Evaluate certificate (iii) only at every `stride`-th iteration.
    pub stride_iii: usize,
    /// Tolerance of the fixed-point test applied to the reference.
    pub fix_tolerance: f64,
}

impl Default for CertificateOptions {
    fn default() -> Self {
        CertificateOptions {
            kinds: alloc::vec![CertificateKind::I, CertificateKind::Ii, CertificateKind::Iii],
            tolerance: DEFAULT_CERTIFICATE_TOLERANCE,
            stride_iii: 1,
            fix_tolerance: DEFAULT_FIX_TOLERANCE,
        }
    }
}

impl CertificateOptions {
    pub fn only(kinds: &[CertificateKind]) -> Self {
        CertificateOptions {
            kinds: kinds.to_vec(),
            ..Self::default()
        }
    }
}

/// Slack values (right-hand side minus left-hand side) of one inequality.
#[derive(Debug, Clone, PartialEq)]
pub struct CertificateReport {
    pub kind: CertificateKind,
    /// `(n, slack_n)` for every evaluated iteration.
    pub slacks: Vec<(usize, f64)>,
    pub min_slack: f64,
    pub first_violation: Option<usize>,
    pub tolerance: f64,
}

impl CertificateReport {
    fn from_slacks(kind: CertificateKind, slacks: Vec<(usize, f64)>, tolerance: f64) -> Self {
        let min_slack = slacks.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
        let first_violation = slacks.iter().find(|s| !(s.1 >= -tolerance)).map(|s| s.0);
        CertificateReport {
            kind,
            slacks,
            min_slack,
            first_violation,
            tolerance,
        }
    }

    pub fn passed(&self) -> bool {
        self.first_violation.is_none()
    }

    pub fn slack_at(&self, n: usize) -> Option<f64> {
        self.slacks
            .binary_search_by_key(&n, |s| s.0)
            .ok()
            .map(|k| self.slacks[k].1)
    }
}

/// Verifies that `x` is a fixed point of every stack used by the run.
pub fn check_reference(config: &IterationConfig, iterations: usize, x: &Point, tol: f64) -> Result<()> {
    x.check_dim(config.x0.dim())?;
    let count = match config.stacks {
        crate::engine::StackProvider::Fixed(_) => 1,
        crate::engine::StackProvider::PerIteration(_) => iterations.max(1),
    };
    for n in 0..count {
        let stack = config.stacks.stack(n)?;
        let ok = if stack.len() == 1 {
            stack.layers()[0].is_fixed(x, tol)
        } else {
            stack.eval(x).dist(x) <= tol * (1.0 + x.norm())
        };
        if !ok {
            return Err(Error::InvalidReference(format!(
                "point is not a fixed point of the stack at iteration {n} (residual {:e})",
                stack.eval(x).dist(x)
            )));
        }
    }
    Ok(())
}

/// `½ Σ_j Σ_k μ_j μ_k ‖x_j − x_k‖²`, via `Σ_j μ_j ‖x_j − x̄‖²` for long rows.
fn spread(entries: &[(usize, f64)], pts: &[&Point], xbar: &Point) -> f64 {
    if entries.len() <= 64 {
        let mut s = 0.0;
        for (a, &(_, ma)) in entries.iter().enumerate() {
            for (b, &(_, mb)) in entries.iter().enumerate() {
                s += ma * mb * pts[a].dist_sq(pts[b]);
            }
        }
        0.5 * s
    } else {
        entries
            .iter()
            .zip(pts)
            .map(|(&(_, m), p)| m * p.dist_sq(xbar))
            .sum()
    }
}

/// Per-iteration slacks of the requested inequalities along a recorded
/// run, against a reference `x ∈ S`.
pub fn theorem1_certificates(
    trace: &RunTrace,
    config: &IterationConfig,
    x_ref: &Point,
    options: &CertificateOptions,
) -> Result<Vec<CertificateReport>> {
    if !trace.has_points() {
        return Err(Error::InsufficientHistory(
            "the trace holds no iterates; enable point recording".into(),
        ));
    }
    check_reference(config, trace.iterations(), x_ref, options.fix_tolerance)?;
    let want = |k| options.kinds.contains(&k);
    let stride = options.stride_iii.max(1);
    let (mut s1, mut s2, mut s3) = (Vec::new(), Vec::new(), Vec::new());

    for row in &trace.rows {
        let n = row.n;
        let xbar = row.xbar.as_ref().expect("checked above");
        let next = row.next.as_ref().expect("checked above");
        let weights = config.weights.row(n);
        let entries = weights.entries();
        let pts: Vec<&Point> = entries
            .iter()
            .map(|&(j, _)| trace.point(j).ok_or(Error::MissingOrbitIndex(j)))
            .collect::<Result<_>>()?;
        let dists: Vec<f64> = pts.iter().map(|p| p.dist(x_ref)).collect();
        let theta = row.theta;
        let lhs = next.dist(x_ref);

        if want(CertificateKind::I) {
            let rhs: f64 = entries.iter().zip(&dists).map(|(e, d)| e.1.abs() * d).sum::<f64>() + theta;
            s1.push((n, rhs - lhs));
        }
        let need_iii = want(CertificateKind::Iii) && n % stride == 0;
        if want(CertificateKind::Ii) || need_iii {
            let stack = config.stacks.stack(n)?;
            let r2 = if row.residual_exact {
                row.residual * row.residual
            } else {
                stack.eval(xbar).dist_sq(xbar)
            };
            let nu = theta * (2.0 * xbar.dist(x_ref) + theta);
            let base = entries.iter().zip(&dists).map(|(e, d)| e.1 * d * d).sum::<f64>()
                - spread(entries, &pts, xbar);
            let lhs2 = next.dist_sq(x_ref);
            let (lambda, phi) = (row.lambda, row.phi);
            if want(CertificateKind::Ii) {
                let rhs = base - lambda * (1.0 / phi - lambda) * r2 + nu;
                s2.push((n, rhs - lhs2));
            }
            if need_iii {
                let tx = stack.tails(xbar);
                let tr = stack.tails(x_ref);
                let layerwise = stack
                    .layers()
                    .iter()
                    .enumerate()
                    .map(|(i, op)| {
                        let a = op.alpha();
                        let u = &tx[i] - &op.eval(&tx[i]);
                        let v = &tr[i] - &op.eval(&tr[i]);
                        (1.0 - a) / a * u.dist_sq(&v)
                    })
                    .fold(0.0, f64::max);
                let rhs = base + lambda * (lambda - 1.0) * r2 - lambda * layerwise + nu;
                s3.push((n, rhs - lhs2));
            }
        }
    }

    let mut out = Vec::new();
    for kind in [CertificateKind::I, CertificateKind::Ii, CertificateKind::Iii] {
        if want(kind) {
            let slacks = match kind {
                CertificateKind::I => core::mem::take(&mut s1),
                CertificateKind::Ii => core::mem::take(&mut s2),
                CertificateKind::Iii => core::mem::take(&mut s3),
            };
            out.push(CertificateReport::from_slacks(kind, slacks, options.tolerance));
        }
    }
    Ok(out)
}

/// Envelope `E_n` bounding `θ_{n+1}` whenever
/// `θ_{n+1} ≤ (1 + ν_n)θ_n + ε_n`:
/// `E_n = θ_0 exp(Σ_{k≤n} ν_k) + Σ_{j<n} ε_j exp(Σ_{k=j+1}^{n} ν_k) + ε_n`,
/// for `n = 0, …, N`.
pub fn gronwall_envelope(theta0: f64, nu: &[f64], eps: &[f64], horizon: usize) -> Result<Vec<f64>> {
    if !(theta0 >= 0.0) {
        return Err(Error::config(format!("theta_0 = {theta0} must be >= 0")));
    }
    if nu.len() <= horizon || eps.len() <= horizon {
        return Err(Error::config(format!(
            "nu and eps need at least N + 1 = {} terms",
            horizon + 1
        )));
    }
    if let Some(e) = eps[..=horizon].iter().find(|e| !(**e >= 0.0)) {
        return Err(Error::config(format!("eps term {e} must be >= 0")));
    }
    let mut out = Vec::with_capacity(horizon + 1);
    let mut prev = theta0;
    for n in 0..=horizon {
        // E_n = (E_{n−1} − ε_{n−1} + ε_{n−1}) e^{ν_n} + ε_n, with E_{−1} = θ_0
        let e = prev * libm::exp(nu[n]) + eps[n];
        out.push(e);
        prev = e;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GronwallCheck {
    pub envelope: Vec<f64>,
    /// `max_n (θ_{n+1} − E_n)`.
    pub max_excess: f64,
    /// Indices `n` where the input violates `θ_{n+1} ≤ (1 + ν_n)θ_n + ε_n`.
    pub hypothesis_violations: Vec<usize>,
    pub passed: bool,
}

/// Checks `θ_{n+1} ≤ E_n` for a sequence `θ_0, …, θ_{N+1}`.
pub fn gronwall_check(theta: &[f64], nu: &[f64], eps: &[f64]) -> Result<GronwallCheck> {
    if theta.len() < 2 {
        return Err(Error::config("need theta_0 and at least one successor"));
    }
    if let Some(t) = theta.iter().find(|t| !(**t >= 0.0)) {
        return Err(Error::config(format!("theta term {t} must be >= 0")));
    }
    let horizon = theta.len() - 2;
    let envelope = gronwall_envelope(theta[0], nu, eps, horizon)?;
    let mut max_excess = f64::NEG_INFINITY;
    let mut violations = Vec::new();
    let mut passed = true;
    for n in 0..=horizon {
        let excess = theta[n + 1] - envelope[n];
        max_excess = max_excess.max(excess);
        if excess > 1e-12 * envelope[n].abs().max(1.0) {
            passed = false;
        }
        if theta[n + 1] > (1.0 + nu[n]) * theta[n] + eps[n] {
            violations.push(n);
        }
    }
    Ok(GronwallCheck {
        envelope,
        max_excess,
        hypothesis_violations: violations,
        passed,
    })
}

/// Tuning constants of the inertial validator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaseDParams {
    /// Upper bound `η` on the inertia sequence.
    pub eta: f64,
    pub sigma: f64,
    /// The tuning constant `ϑ` (not the error budget `ϑ_n`).
    pub theta_tune: f64,
}

impl CaseDParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.eta) {
            return Err(Error::config(format!("eta = {} must lie in [0, 1)", self.eta)));
        }
        if !(self.sigma > 0.0) || !(self.theta_tune > 0.0) {
            return Err(Error::config("sigma and theta_tune must be > 0"));
        }
        Ok(())
    }

    /// Upper bound on `λ_n` given `φ_n` and `ω_{n+1} = 1/φ_{n+1} − λ_{n+1}`.
    pub fn lambda_cap(&self, phi: f64, omega_next: f64) -> f64 {
        let (e, s, t) = (self.eta, self.sigma, self.theta_tune);
        let inner = e * (1.0 + e) + e * t * omega_next + s;
        (t / phi - e * inner) / (t * (1.0 + inner))
    }

    /// `(1/φ_n − η² ω_{n+1}) − (η²(1 + η) + ησ)/ϑ`; must be positive.
    pub fn third_margin(&self, phi: f64, omega_next: f64) -> f64 {
        let (e, s, t) = (self.eta, self.sigma, self.theta_tune);
        (1.0 / phi - e * e * omega_next) - (e * e * (1.0 + e) + e * s) / t
    }
}

/// Conditions checked by [`case_d_validate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseDCondition {
    /// `η_n ≤ η_{n+1} ≤ η`.
    EtaMonotone,
    /// `λ_n` below the cap.
    LambdaCap,
    /// `(η²(1+η) + ησ)/ϑ < 1/φ_n − η²ω_{n+1}`.
    Third,
}

impl CaseDCondition {
    pub fn name(self) -> &'static str {
        match self {
            CaseDCondition::EtaMonotone => "eta_n <= eta_{n+1} <= eta",
            CaseDCondition::LambdaCap => "lambda_n <= lambda cap",
            CaseDCondition::Third => "(eta^2(1+eta)+eta*sigma)/theta < 1/phi_n - eta^2 omega_{n+1}",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseDReport {
    pub lambda_caps: Vec<f64>,
    /// `cap_n − λ_n`.
    pub lambda_margins: Vec<f64>,
    pub third_margins: Vec<f64>,
    pub min_eta_margin: f64,
    pub first_failure: Option<(usize, CaseDCondition)>,
    /// First failing index of each condition, in declaration order.
    pub first_by_condition: [Option<usize>; 3],
}

impl CaseDReport {
    pub fn valid(&self) -> bool {
        self.first_failure.is_none()
    }

    pub fn fails(&self, condition: CaseDCondition) -> bool {
        self.first_by_condition[condition as usize].is_some()
    }

    pub fn describe_failure(&self) -> Option<String> {
        self.first_failure
            .map(|(n, c)| format!("condition '{}' fails at n = {n}", c.name()))
    }
}

/// Checks the three parameter conditions for `n = 0, …, N`, using
/// `ω_{n+1} = 1/φ_{n+1} − λ_{n+1}`.
pub fn case_d_validate(
    params: &CaseDParams,
    phi: impl Fn(usize) -> f64,
    lambda: impl Fn(usize) -> f64,
    eta: impl Fn(usize) -> f64,
    horizon: usize,
) -> Result<CaseDReport> {
    params.validate()?;
    let mut report = CaseDReport {
        lambda_caps: Vec::with_capacity(horizon + 1),
        lambda_margins: Vec::with_capacity(horizon + 1),
        third_margins: Vec::with_capacity(horizon + 1),
        min_eta_margin: f64::INFINITY,
        first_failure: None,
        first_by_condition: [None; 3],
    };
    for n in 0..=horizon {
        let (p, l) = (phi(n), lambda(n));
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::config(format!("phi_{n} = {p} must lie in (0, 1]")));
        }
        let omega_next = 1.0 / phi(n + 1) - lambda(n + 1);
        let eta_margin = (eta(n + 1) - eta(n)).min(params.eta - eta(n + 1));
        report.min_eta_margin = report.min_eta_margin.min(eta_margin);
        let cap = params.lambda_cap(p, omega_next);
        let third = params.third_margin(p, omega_next);
        report.lambda_caps.push(cap);
        report.lambda_margins.push(cap - l);
        report.third_margins.push(third);
        let failing = [
            (CaseDCondition::EtaMonotone, eta_margin < 0.0),
            (CaseDCondition::LambdaCap, l > cap),
            (CaseDCondition::Third, third <= 0.0),
        ];
        for (cond, failed) in failing {
            if failed {
                report.first_failure.get_or_insert((n, cond));
                report.first_by_condition[cond as usize].get_or_insert(n);
            }
        }
    }
    Ok(report)
}

pub const DEFAULT_SUMMABILITY_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct SummabilityReport {
    /// `S_k = Σ_{n<k} χ_n a_n` for `k = 1, …, N`.
    pub partial_sums: Vec<f64>,
    /// `S_N − S_{⌊3N/4⌋}`.
    pub tail_increment: f64,
    pub tolerance: f64,
}

impl SummabilityReport {
    pub fn total(&self) -> f64 {
        self.partial_sums.last().copied().unwrap_or(0.0)
    }

    pub fn passed(&self) -> bool {
        self.tail_increment <= self.tolerance
    }
}

/// Partial sums of `χ_n a_n` over the first `N = a.len()` terms with a
/// Cauchy-tail diagnostic.
pub fn summability_monitor(a: &[f64], chi: Option<&[f64]>, tolerance: f64) -> Result<SummabilityReport> {
    if let Some(v) = a.iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::config(format!("summability term {v} must be >= 0")));
    }
    if let Some(c) = chi {
        if c.len() < a.len() {
            return Err(Error::config("chi weights shorter than the series"));
        }
    }
    let mut s = 0.0;
    let partial: Vec<f64> = a
        .iter()
        .enumerate()
        .map(|(n, v)| {
            s += v * chi.map_or(1.0, |c| c[n]);
            s
        })
        .collect();
    let total = partial.last().copied().unwrap_or(0.0);
    let q = 3 * a.len() / 4;
    let before = if q == 0 { 0.0 } else { partial[q - 1] };
    Ok(SummabilityReport {
        partial_sums: partial,
        tail_increment: total - before,
        tolerance,
    })
}

/// `a_n = n ‖x_n − x_{n−1}‖²` along a recorded orbit (`a_0 = 0`).
pub fn weighted_increments(trace: &RunTrace) -> Result<Vec<f64>> {
    if !trace.has_points() {
        return Err(Error::InsufficientHistory("the trace holds no iterates".into()));
    }
    let orbit = trace.orbit();
    let mut out = alloc::vec![0.0];
    out.extend(orbit.windows(2).enumerate().map(|(k, w)| (k + 1) as f64 * w[1].dist_sq(&w[0])));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::run;
    use crate::linalg::Matrix;
    use crate::operators::{AveragedOperator, LayerStack, OperatorClass};
    use crate::schedules::{EtaSchedule, RelaxationPolicy, WeightSchedule};
    use alloc::vec;
    use proptest::prelude::*;

    fn neg_id_config(x0: Point) -> IterationConfig {
        let t = AveragedOperator::linear(Matrix::scaled_identity(2, -1.0), OperatorClass::Nonexpansive, 1.0).unwrap();
        IterationConfig::new(LayerStack::single(t), x0)
            .with_weights(WeightSchedule::window(2))
            .with_max_iters(60)
            .with_stop_residual(0.0)
    }

    #[test]
    fn certificate_i_on_window_run() {
        let cfg = neg_id_config(Point::new(vec![1.0, 0.0]).unwrap());
        let t = run(&cfg).unwrap();
        let zero = Point::zeros(2);
        let reps = theorem1_certificates(&t, &cfg, &zero, &CertificateOptions::default()).unwrap();
        assert_eq!(reps.len(), 3);
        for r in &reps {
            assert!(r.passed(), "{:?} min {}", r.kind, r.min_slack);
        }
        assert!(reps[0].min_slack >= 0.0);
    }

    #[test]
    fn reference_start_gives_trivial_slacks() {
        let cfg = neg_id_config(Point::zeros(2)).with_max_iters(5);
        let t = run(&cfg).unwrap();
        let reps = theorem1_certificates(&t, &cfg, &Point::zeros(2), &CertificateOptions::default()).unwrap();
        for r in &reps {
            assert!(r.slacks.iter().all(|s| s.1 == 0.0));
        }
    }

    #[test]
    fn bad_reference_and_missing_history() {
        let cfg = neg_id_config(Point::new(vec![1.0, 0.0]).unwrap());
        let t = run(&cfg).unwrap();
        let bad = Point::new(vec![1.0, 1.0]).unwrap();
        assert!(matches!(
            theorem1_certificates(&t, &cfg, &bad, &CertificateOptions::default()),
            Err(Error::InvalidReference(_))
        ));
        let cfg = cfg.with_record_points(false);
        let t = run(&cfg).unwrap();
        assert!(matches!(
            theorem1_certificates(&t, &cfg, &Point::zeros(2), &CertificateOptions::default()),
            Err(Error::InsufficientHistory(_))
        ));
    }

    #[test]
    fn spread_identity_matches_double_sum() {
        let pts: Vec<Point> = (0..80).map(|k| Point::new(vec![k as f64 * 0.1, libm::sin(k as f64)]).unwrap()).collect();
        let w = 1.0 / 80.0;
        let entries: Vec<(usize, f64)> = (0..80).map(|j| (j, w)).collect();
        let refs: Vec<&Point> = pts.iter().collect();
        let xbar = crate::space::affine_combine(&crate::space::SparseRow::new(79, entries.clone()).unwrap(), &pts).unwrap();
        let mut direct = 0.0;
        for a in &pts {
            for b in &pts {
                direct += w * w * a.dist_sq(b);
            }
        }
        assert!((spread(&entries, &refs, &xbar) - 0.5 * direct).abs() < 1e-10);
    }

    #[test]
    fn gronwall_examples() {
        let e = gronwall_envelope(1.0, &[0.0; 6], &[0.0; 6], 5).unwrap();
        assert!(e.iter().all(|v| *v == 1.0));
        let ln2 = core::f64::consts::LN_2;
        let e = gronwall_envelope(1.0, &[ln2; 11], &[0.0; 11], 10).unwrap();
        for (n, v) in e.iter().enumerate() {
            let want = libm::pow(2.0, n as f64 + 1.0);
            assert!((v - want).abs() <= 1e-12 * want);
        }
        let c = 0.3;
        let e = gronwall_envelope(0.0, &[0.0; 8], &[c; 8], 7).unwrap();
        for (n, v) in e.iter().enumerate() {
            assert!((v - (n as f64 + 1.0) * c).abs() < 1e-14);
        }
        assert!(gronwall_envelope(-1.0, &[0.0], &[0.0], 0).is_err());
        assert!(gronwall_envelope(0.0, &[0.0], &[-1.0], 0).is_err());
    }

    #[test]
    fn gronwall_closed_form_oracle() {
        // direct evaluation of the displayed sum as an independent check
        let nu = [0.1, -0.2, 0.05, 0.3, 0.0];
        let eps = [0.5, 0.1, 0.0, 0.2, 0.4];
        let env = gronwall_envelope(2.0, &nu, &eps, 4).unwrap();
        for n in 0..5 {
            let mut v = 2.0 * libm::exp(nu[..=n].iter().sum());
            for j in 0..n {
                v += eps[j] * libm::exp(nu[j + 1..=n].iter().sum());
            }
            v += eps[n];
            assert!((env[n] - v).abs() < 1e-12);
        }
    }

    #[test]
    fn case_d_examples() {
        let p = CaseDParams { eta: 0.2, sigma: 0.2, theta_tune: 2.0 / 3.0 };
        let eta = EtaSchedule::Constant(0.2);
        let r = case_d_validate(&p, |_| 0.5, |_| 1.0, |n| eta.at(n), 50).unwrap();
        assert!(r.valid());
        assert!((r.lambda_caps[0] - 1.161_864_406_779_661).abs() < 1e-9);
        let lhs: f64 = (0.04 * 1.2 + 0.04) / (2.0 / 3.0);
        assert!((lhs - 0.132).abs() < 1e-12);
        assert!((r.third_margins[0] - (1.96 - 0.132)).abs() < 1e-12);

        let p = CaseDParams { eta: 0.0, sigma: 0.5, theta_tune: 1.0 };
        let r = case_d_validate(&p, |_| 1.0, |_| 0.1, |_| 0.0, 20).unwrap();
        assert!(r.valid());
        assert!((r.lambda_caps[0] - 1.0 / 1.5).abs() < 1e-15);

        let p = CaseDParams { eta: 0.9, sigma: 1.0, theta_tune: 0.1 };
        let r = case_d_validate(&p, |_| 1.0, |_| 0.5, |n| if n == 0 { 0.0 } else { 0.9 }, 10).unwrap();
        assert!(!r.valid());
        let lhs: f64 = (0.81 * 1.9 + 0.9) / 0.1;
        assert!((lhs - 24.39).abs() < 1e-12);
        // the λ cap is negative here, so the cap fails before the third condition
        assert!(r.third_margins.iter().all(|m| *m < 0.0));
        assert!(r.fails(CaseDCondition::Third));
        assert!(r.describe_failure().is_some());
    }

    #[test]
    fn case_d_monotonicity_fails_when_next_lambda_drops() {
        // Lowering λ_{n+1} raises ω_{n+1}, which lowers the cap on λ_n.
        let p = CaseDParams { eta: 0.2, sigma: 0.2, theta_tune: 2.0 / 3.0 };
        let eta = |n: usize| if n == 0 { 0.0 } else { 0.2 };
        let valid = case_d_validate(&p, |_| 0.5, |_| 1.16, eta, 5).unwrap();
        assert!(valid.valid());
        let lowered = case_d_validate(&p, |_| 0.5, |n| if n == 1 { 0.01 } else { 1.16 }, eta, 5).unwrap();
        assert!(!lowered.valid());
    }

    #[test]
    fn summability_examples() {
        let a: Vec<f64> = (0..60).map(|n| libm::pow(2.0, -(n as f64))).collect();
        let r = summability_monitor(&a, None, DEFAULT_SUMMABILITY_TOLERANCE).unwrap();
        assert!((r.total() - 2.0).abs() < 1e-12 && r.passed());

        let h: Vec<f64> = (0..100_000).map(|n| 1.0 / (n as f64 + 1.0)).collect();
        let r = summability_monitor(&h, None, DEFAULT_SUMMABILITY_TOLERANCE).unwrap();
        assert!((r.tail_increment - libm::log(4.0 / 3.0)).abs() < 1e-4);
        assert!(!r.passed());
        assert!(summability_monitor(&[1.0, -1.0], None, 1e-6).is_err());
    }

    #[test]
    fn inertial_relaxed_run_satisfies_certificates() {
        let rot = AveragedOperator::linear(Matrix::rotation(0.7), OperatorClass::Nonexpansive, 1.0).unwrap();
        let cfg = IterationConfig::new(LayerStack::single(rot), Point::new(vec![2.0, -1.0]).unwrap())
            .with_weights(WeightSchedule::inertial(EtaSchedule::Constant(0.2)).unwrap())
            .with_relaxation(RelaxationPolicy::Constant(0.5))
            .with_max_iters(200);
        let t = run(&cfg).unwrap();
        let reps = theorem1_certificates(&t, &cfg, &Point::zeros(2), &CertificateOptions::default()).unwrap();
        for r in reps {
            assert!(r.passed(), "{:?} {}", r.kind, r.min_slack);
        }
    }

    proptest! {
        #[test]
        fn envelope_dominates_equality_sequences(
            theta0 in 0.0f64..5.0,
            nu in proptest::collection::vec(-0.5f64..0.5, 30),
            eps in proptest::collection::vec(0.0f64..1.0, 30),
        ) {
            let mut theta = vec![theta0];
            for n in 0..29 {
                let next = ((1.0 + nu[n]) * theta[n] + eps[n]).max(0.0);
                theta.push(next);
            }
            let check = gronwall_check(&theta, &nu, &eps).unwrap();
            prop_assert!(check.passed, "excess {}", check.max_excess);
        }

        #[test]
        fn case_d_without_inertia_is_monotone_in_lambda(
            sigma in 0.01f64..2.0,
            tt in 0.05f64..3.0,
            lam in proptest::collection::vec(0.01f64..1.5, 12),
            shrink in proptest::collection::vec(0.0f64..1.0, 12),
        ) {
            let p = CaseDParams { eta: 0.0, sigma, theta_tune: tt };
            let before = case_d_validate(&p, |_| 0.75, |n| lam[n], |_| 0.0, 10).unwrap();
            let after = case_d_validate(&p, |_| 0.75, |n| lam[n] * (1.0 - 0.99 * shrink[n]), |_| 0.0, 10).unwrap();
            prop_assert!(!before.valid() || after.valid());
        }

        #[test]
        fn case_d_lowering_first_lambda_is_safe(
            eta in 0.0f64..0.33,
            sigma in 0.01f64..1.0,
            tt in 0.1f64..3.0,
            lam in 0.01f64..1.2,
            lam0 in 0.001f64..1.0,
        ) {
            let p = CaseDParams { eta, sigma, theta_tune: tt };
            let e = |n: usize| if n == 0 { 0.0 } else { eta };
            let before = case_d_validate(&p, |_| 0.5, |_| lam, e, 8).unwrap();
            let after = case_d_validate(&p, |_| 0.5, |n| if n == 0 { lam * lam0 } else { lam }, e, 8).unwrap();
            prop_assert!(!before.valid() || after.valid());
        }

        #[test]
        fn case_d_larger_sigma_never_helps(
            eta in 0.0f64..0.9,
            sigma in 0.01f64..1.0,
            extra in 0.0f64..1.0,
            tt in 0.1f64..3.0,
            lam in 0.01f64..1.5,
        ) {
            let e = |n: usize| if n == 0 { 0.0 } else { eta };
            let a = case_d_validate(&CaseDParams { eta, sigma, theta_tune: tt }, |_| 0.5, |_| lam, e, 6).unwrap();
            let b = case_d_validate(&CaseDParams { eta, sigma: sigma + extra, theta_tune: tt }, |_| 0.5, |_| lam, e, 6).unwrap();
            prop_assert!(a.valid() || !b.valid());
        }
    }
}
