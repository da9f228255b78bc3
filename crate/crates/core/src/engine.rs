//! The iteration driver: forms `x̄_n` from the orbit, applies the layer
//! stack with injected errors, relaxes, and records a trace.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::operators::{EvalFlags, LayerStack};
use crate::schedules::{chi, relaxation_at, ChiCertificate, RelaxationPolicy, WeightFamily, WeightSchedule, DEFAULT_CHI_TRUNCATION};
use crate::space::{affine_combine, Orbit, Point};
use crate::{Error, Result};

/// Builds the stack `T_{1,n} ∘ ⋯ ∘ T_{m,n}` used at iteration `n`.
pub type StackFn = Arc<dyn Fn(usize) -> Result<LayerStack> + Send + Sync>;

/// Source of the per-iteration layer stacks.
#[derive(Clone)]
pub enum StackProvider {
    Fixed(LayerStack),
    /// Rebuilt at every iteration (e.g. for varying step sizes).
    PerIteration(StackFn),
}

impl StackProvider {
    pub fn stack(&self, n: usize) -> Result<StackRef<'_>> {
        match self {
            StackProvider::Fixed(s) => Ok(StackRef::Borrowed(s)),
            StackProvider::PerIteration(f) => Ok(StackRef::Owned(f(n)?)),
        }
    }
}

impl fmt::Debug for StackProvider {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StackProvider::Fixed(s) => f.debug_tuple("Fixed").field(s).finish(),
            StackProvider::PerIteration(_) => f.write_str("PerIteration(..)"),
        }
    }
}

/// A stack either borrowed from a fixed provider or freshly built.
pub enum StackRef<'a> {
    Borrowed(&'a LayerStack),
    Owned(LayerStack),
}

impl core::ops::Deref for StackRef<'_> {
    type Target = LayerStack;
    fn deref(&self) -> &LayerStack {
        match self {
            StackRef::Borrowed(s) => s,
            StackRef::Owned(s) => s,
        }
    }
}

/// Error terms `e_{i,n}` of one layer.
#[derive(Clone)]
pub enum ErrorSequence {
    Zero,
    /// `e_n = rate^n · direction`.
    Geometric { rate: f64, direction: Point },
    /// Explicit terms; zero past the end.
    List(Vec<Point>),
    Custom(Arc<dyn Fn(usize) -> Point + Send + Sync>),
}

impl ErrorSequence {
    pub fn at(&self, n: usize, dim: usize) -> Point {
        match self {
            ErrorSequence::Zero => Point::zeros(dim),
            ErrorSequence::Geometric { rate, direction } => {
                direction.scale(libm::pow(*rate, n as f64))
            }
            ErrorSequence::List(v) => v.get(n).cloned().unwrap_or_else(|| Point::zeros(dim)),
            ErrorSequence::Custom(f) => f(n),
        }
    }

    pub fn norm_at(&self, n: usize, dim: usize) -> f64 {
        match self {
            ErrorSequence::Zero => 0.0,
            ErrorSequence::Geometric { rate, direction } => {
                libm::pow(rate.abs(), n as f64) * direction.norm()
            }
            _ => self.at(n, dim).norm(),
        }
    }

    /// `factor · e_n`.
    pub fn scaled(&self, factor: f64) -> ErrorSequence {
        match self {
            ErrorSequence::Zero => ErrorSequence::Zero,
            ErrorSequence::Geometric { rate, direction } => ErrorSequence::Geometric {
                rate: *rate,
                direction: direction.scale(factor),
            },
            ErrorSequence::List(v) => ErrorSequence::List(v.iter().map(|e| e.scale(factor)).collect()),
            ErrorSequence::Custom(f) => {
                let f = f.clone();
                ErrorSequence::Custom(Arc::new(move |n| f(n).scale(factor)))
            }
        }
    }

    /// `factor_n · e_n`.
    pub fn scaled_by(&self, factor: Arc<dyn Fn(usize) -> f64 + Send + Sync>) -> ErrorSequence {
        match self {
            ErrorSequence::Zero => ErrorSequence::Zero,
            ErrorSequence::List(v) => ErrorSequence::List(
                v.iter().enumerate().map(|(n, e)| e.scale(factor(n))).collect(),
            ),
            ErrorSequence::Geometric { rate, direction } => {
                let (rate, direction) = (*rate, direction.clone());
                ErrorSequence::Custom(Arc::new(move |n| {
                    direction.scale(libm::pow(rate, n as f64) * factor(n))
                }))
            }
            ErrorSequence::Custom(f) => {
                let f = f.clone();
                ErrorSequence::Custom(Arc::new(move |n| f(n).scale(factor(n))))
            }
        }
    }

    /// Whether `Σ_n ‖e_n‖ < ∞` is evident from the description.
    pub fn is_evidently_summable(&self) -> bool {
        match self {
            ErrorSequence::Zero | ErrorSequence::List(_) => true,
            ErrorSequence::Geometric { rate, direction } => {
                rate.abs() < 1.0 || direction.norm() == 0.0
            }
            ErrorSequence::Custom(_) => false,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            ErrorSequence::Zero => true,
            ErrorSequence::Geometric { rate, direction } => *rate == 0.0 || direction.norm() == 0.0,
            ErrorSequence::List(v) => v.iter().all(|e| e.norm() == 0.0),
            ErrorSequence::Custom(_) => false,
        }
    }
}

impl fmt::Debug for ErrorSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ErrorSequence::Zero => f.write_str("Zero"),
            ErrorSequence::Geometric { rate, direction } => f
                .debug_struct("Geometric")
                .field("rate", rate)
                .field("direction", direction)
                .finish(),
            ErrorSequence::List(v) => f.debug_tuple("List").field(&v.len()).finish(),
            ErrorSequence::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// Whether injected errors are synthetic test perturbations or model
/// genuine inexactness of the operator evaluations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorNature {
    /// The clean residual is obtained by an extra error-free evaluation.
    Synthetic,
    /// The residual falls back to the noisy value and is marked approximate.
    Genuine,
}

/// Per-layer error sequences; `layers[i]` perturbs `T_{i+1}`.
#[derive(Debug, Clone)]
pub struct ErrorModel {
    pub layers: Vec<ErrorSequence>,
    pub nature: ErrorNature,
}

impl ErrorModel {
    pub fn none() -> Self {
        ErrorModel {
            layers: Vec::new(),
            nature: ErrorNature::Synthetic,
        }
    }

    pub fn synthetic(layers: Vec<ErrorSequence>) -> Self {
        ErrorModel {
            layers,
            nature: ErrorNature::Synthetic,
        }
    }

    pub fn genuine(layers: Vec<ErrorSequence>) -> Self {
        ErrorModel {
            layers,
            nature: ErrorNature::Genuine,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.layers.iter().all(ErrorSequence::is_zero)
    }

    /// `Σ_i ‖e_{i,n}‖`.
    pub fn norm_sum(&self, n: usize, dim: usize) -> f64 {
        self.layers.iter().map(|e| e.norm_at(n, dim)).sum()
    }
}

impl Default for ErrorModel {
    fn default() -> Self {
        Self::none()
    }
}

pub const DEFAULT_STOP_RESIDUAL: f64 = 1e-10;
pub const DEFAULT_MAX_ITERS: usize = 1000;

/// Everything needed to run the iteration.
#[derive(Debug, Clone)]
pub struct IterationConfig {
    pub stacks: StackProvider,
    pub weights: WeightSchedule,
    pub relaxation: RelaxationPolicy,
    pub errors: ErrorModel,
    pub x0: Point,
    pub max_iters: usize,
    /// Stop once the residual is at or below this; negative disables the test.
    pub stop_residual: f64,
    /// A known point of `S`, used for `dist_to_ref`.
    pub reference: Option<Point>,
    /// Keep `x̄_n` and `x_{n+1}` in every trace row (needed by certificates).
    pub record_points: bool,
}

impl IterationConfig {
    /// Memoryless weights, `λ ≡ 1`, no errors, 1000 iterations, stop at
    /// residual `1e-10`.
    pub fn new(stack: LayerStack, x0: Point) -> Self {
        Self::with_provider(StackProvider::Fixed(stack), x0)
    }

    pub fn with_provider(stacks: StackProvider, x0: Point) -> Self {
        IterationConfig {
            stacks,
            weights: WeightSchedule::memoryless(),
            relaxation: RelaxationPolicy::Constant(1.0),
            errors: ErrorModel::none(),
            x0,
            max_iters: DEFAULT_MAX_ITERS,
            stop_residual: DEFAULT_STOP_RESIDUAL,
            reference: None,
            record_points: true,
        }
    }

    pub fn with_weights(mut self, weights: WeightSchedule) -> Self {
        self.weights = weights;
        self
    }

    pub fn with_relaxation(mut self, relaxation: RelaxationPolicy) -> Self {
        self.relaxation = relaxation;
        self
    }

    pub fn with_errors(mut self, errors: ErrorModel) -> Self {
        self.errors = errors;
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_stop_residual(mut self, stop_residual: f64) -> Self {
        self.stop_residual = stop_residual;
        self
    }

    pub fn with_reference(mut self, reference: Point) -> Self {
        self.reference = Some(reference);
        self
    }

    pub fn with_record_points(mut self, record: bool) -> Self {
        self.record_points = record;
        self
    }

    /// `λ_n` for `n < max_iters`, failing on the first violated bound.
    pub fn relaxation_sequence(&self) -> Result<Vec<f64>> {
        self.relaxation_sequence_through(self.max_iters.saturating_sub(1))
    }

    /// `λ_n` for `n ≤ last`.
    pub fn relaxation_sequence_through(&self, last: usize) -> Result<Vec<f64>> {
        (0..=last)
            .map(|n| relaxation_at(&self.relaxation, n, self.stacks.stack(n)?.phi()))
            .collect()
    }

    /// Checks everything that can be checked without iterating.
    pub fn validate(&self) -> Result<()> {
        if self.stop_residual.is_nan() {
            return Err(Error::config("stop_residual must not be NaN"));
        }
        if let Some(r) = &self.reference {
            r.check_dim(self.x0.dim())?;
        }
        if let Some(eta) = self.weights.eta() {
            eta.validate()?;
        }
        let m = self.stacks.stack(0)?.len();
        if !self.errors.layers.is_empty() && self.errors.layers.len() != m {
            return Err(Error::config(format!(
                "error model has {} layers but the stack has {m}",
                self.errors.layers.len()
            )));
        }
        self.relaxation_sequence()?;
        Ok(())
    }
}

/// Why a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Converged,
    MaxIters,
    Diverged { iteration: usize },
}

impl StopReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            StopReason::Converged => "converged",
            StopReason::MaxIters => "max_iters",
            StopReason::Diverged { .. } => "diverged",
        }
    }
}

/// One iteration of the trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub n: usize,
    /// `x̄_n` (absent when points are not recorded).
    pub xbar: Option<Point>,
    /// `x_{n+1}`.
    pub next: Option<Point>,
    pub lambda: f64,
    pub phi: f64,
    /// `‖T_n x̄_n − x̄_n‖`; the noisy value when `residual_exact` is false.
    pub residual: f64,
    pub residual_exact: bool,
    /// `Σ_i ‖e_{i,n}‖`.
    pub error_sum: f64,
    /// `ϑ_n = λ_n Σ_i ‖e_{i,n}‖`.
    pub theta: f64,
    /// `‖x_{n+1} − x*‖` when a reference is known.
    pub dist_to_ref: Option<f64>,
}

/// Record of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub x0: Point,
    pub rows: Vec<TraceRow>,
    pub stop: StopReason,
    final_point: Point,
    /// Subgradient-projector steps that met a zero subgradient above the level.
    pub degenerate_subgradient: usize,
    /// Largest number of orbit points held by the driver at once.
    pub peak_retained: usize,
}

impl RunTrace {
    /// The last iterate produced (`x_0` for an empty run).
    pub fn final_point(&self) -> &Point {
        &self.final_point
    }

    pub fn iterations(&self) -> usize {
        self.rows.len()
    }

    pub fn final_residual(&self) -> Option<f64> {
        self.rows.last().map(|r| r.residual)
    }

    pub fn has_points(&self) -> bool {
        self.rows.iter().all(|r| r.next.is_some() && r.xbar.is_some())
    }

    /// `x_j` from the recorded orbit.
    pub fn point(&self, j: usize) -> Option<&Point> {
        if j == 0 {
            Some(&self.x0)
        } else {
            self.rows.get(j - 1).and_then(|r| r.next.as_ref())
        }
    }

    /// All recorded iterates `x_0, …, x_N`.
    pub fn orbit(&self) -> Vec<Point> {
        let mut out = Vec::with_capacity(self.rows.len() + 1);
        out.push(self.x0.clone());
        out.extend(self.rows.iter().filter_map(|r| r.next.clone()));
        out
    }
}

impl Orbit for RunTrace {
    fn point(&self, j: usize) -> Option<&Point> {
        RunTrace::point(self, j)
    }
}

/// Bounded window of recent iterates, indexed by iteration number.
#[derive(Debug, Clone)]
struct RingOrbit {
    first: usize,
    points: VecDeque<Point>,
    capacity: usize,
    peak: usize,
}

impl RingOrbit {
    fn new(x0: Point, capacity: usize) -> Self {
        let mut points = VecDeque::with_capacity(capacity);
        points.push_back(x0);
        RingOrbit {
            first: 0,
            points,
            capacity,
            peak: 1,
        }
    }

    fn push(&mut self, x: Point) {
        if self.points.len() == self.capacity {
            self.points.pop_front();
            self.first += 1;
        }
        self.points.push_back(x);
        self.peak = self.peak.max(self.points.len());
    }

    fn latest(&self) -> &Point {
        self.points.back().expect("orbit is never empty")
    }
}

impl Orbit for RingOrbit {
    fn point(&self, j: usize) -> Option<&Point> {
        j.checked_sub(self.first).and_then(|k| self.points.get(k))
    }
}

/// Step-by-step driver for one run.
pub struct Engine<'a> {
    config: &'a IterationConfig,
    orbit: RingOrbit,
    /// Running mean `(x_0 + ⋯ + x_n)/(n + 1)` for Cesàro weights.
    mean: Option<Point>,
    n: usize,
    rows: Vec<TraceRow>,
    flags: EvalFlags,
    stop: Option<StopReason>,
}

impl<'a> Engine<'a> {
    pub fn new(config: &'a IterationConfig) -> Result<Self> {
        config.validate()?;
        let (capacity, mean) = match config.weights.support_bound() {
            Some(b) => (b + 1, None),
            None => match config.weights.family() {
                WeightFamily::Cesaro => (1, Some(config.x0.clone())),
                _ => {
                    return Err(Error::config(
                        "unbounded-support weights need an incremental update rule",
                    ))
                }
            },
        };
        Ok(Engine {
            config,
            orbit: RingOrbit::new(config.x0.clone(), capacity),
            mean,
            n: 0,
            rows: Vec::new(),
            flags: EvalFlags::default(),
            stop: None,
        })
    }

    pub fn iteration(&self) -> usize {
        self.n
    }

    pub fn current(&self) -> &Point {
        self.orbit.latest()
    }

    pub fn stopped(&self) -> Option<StopReason> {
        self.stop
    }

    /// Performs iteration `n`; returns the stop reason once the run ends.
    pub fn step(&mut self) -> Result<Option<StopReason>> {
        if let Some(stop) = self.stop {
            return Ok(Some(stop));
        }
        if self.n >= self.config.max_iters {
            self.stop = Some(StopReason::MaxIters);
            return Ok(self.stop);
        }
        let n = self.n;
        let cfg = self.config;
        let stack = cfg.stacks.stack(n)?;
        let xbar = match &self.mean {
            Some(mean) => mean.clone(),
            None => affine_combine(&cfg.weights.row(n), &self.orbit)?,
        };
        if !xbar.is_finite() {
            return self.diverge(n);
        }
        let phi = stack.phi();
        let lambda = relaxation_at(&cfg.relaxation, n, phi)?;
        let dim = xbar.dim();

        let (image, error_sum, residual, exact) = if cfg.errors.layers.is_empty() {
            let clean = stack.eval_flagged(&xbar, &mut self.flags);
            let r = clean.dist(&xbar);
            (clean, 0.0, r, true)
        } else {
            let errs: Vec<Point> = cfg.errors.layers.iter().map(|e| e.at(n, dim)).collect();
            let (noisy, bound) = stack.apply(&xbar, Some(&errs), &mut self.flags)?;
            match cfg.errors.nature {
                ErrorNature::Synthetic => {
                    let clean = if bound == 0.0 {
                        noisy.clone()
                    } else {
                        stack.eval(&xbar)
                    };
                    let r = clean.dist(&xbar);
                    (noisy, bound, r, true)
                }
                ErrorNature::Genuine => {
                    let r = noisy.dist(&xbar);
                    (noisy, bound, r, bound == 0.0)
                }
            }
        };
        let next = xbar.relax_toward(&image, lambda);
        if !next.is_finite() || !residual.is_finite() {
            return self.diverge(n);
        }
        let dist_to_ref = cfg.reference.as_ref().map(|r| next.dist(r));
        if let Some(mean) = &mut self.mean {
            // x̄_{n+1} = x̄_n + (x_{n+1} − x̄_n)/(n + 2)
            *mean = mean.relax_toward(&next, 1.0 / (n as f64 + 2.0));
        }
        let record = cfg.record_points;
        self.rows.push(TraceRow {
            n,
            xbar: record.then(|| xbar.clone()),
            next: record.then(|| next.clone()),
            lambda,
            phi,
            residual,
            residual_exact: exact,
            error_sum,
            theta: lambda * error_sum,
            dist_to_ref,
        });
        self.orbit.push(next);
        self.n += 1;
        if residual <= cfg.stop_residual {
            self.stop = Some(StopReason::Converged);
        } else if self.n >= cfg.max_iters {
            self.stop = Some(StopReason::MaxIters);
        }
        Ok(self.stop)
    }

    fn diverge(&mut self, n: usize) -> Result<Option<StopReason>> {
        self.stop = Some(StopReason::Diverged { iteration: n });
        Ok(self.stop)
    }

    /// Runs to the end. Divergence ends the trace with
    /// [`StopReason::Diverged`] instead of failing.
    pub fn finish(mut self) -> Result<RunTrace> {
        while self.step()?.is_none() {}
        Ok(self.into_trace())
    }

    /// The trace so far.
    pub fn into_trace(self) -> RunTrace {
        let final_point = self.orbit.latest().clone();
        RunTrace {
            x0: self.config.x0.clone(),
            rows: self.rows,
            stop: self.stop.unwrap_or(StopReason::MaxIters),
            final_point,
            degenerate_subgradient: self.flags.degenerate_subgradient,
            peak_retained: self.orbit.peak,
        }
    }
}

/// Runs the iteration; a non-finite iterate is reported as
/// [`Error::Divergence`].
pub fn run(config: &IterationConfig) -> Result<RunTrace> {
    let trace = Engine::new(config)?.finish()?;
    match trace.stop {
        StopReason::Diverged { iteration } => Err(Error::Divergence { iteration }),
        _ => Ok(trace),
    }
}

/// Diagnostic for the summability premise `Σ χ_n ϑ_n < ∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct BudgetReport {
    /// `Σ_{k ≤ n} χ_k λ_k Σ_i ‖e_{i,k}‖` for `n = 0, …, N − 1`.
    pub partial_sums: Vec<f64>,
    /// `S_N − S_{⌊3N/4⌋}`.
    pub tail_increment: f64,
    /// Errors are injected into inertial weights outside the supported
    /// regime (`λ ≡ 1` and a bounded-range first layer).
    pub unsupported_regime: bool,
    pub warnings: Vec<String>,
}

impl BudgetReport {
    pub fn total(&self) -> f64 {
        self.partial_sums.last().copied().unwrap_or(0.0)
    }
}

/// Partial sums of `χ_n ϑ_n` over `n < N` with a tail trend.
pub fn error_budget_check(config: &IterationConfig, horizon: usize) -> Result<BudgetReport> {
    let dim = config.x0.dim();
    let mut warnings = Vec::new();
    let chi_at = |n: usize| -> f64 {
        match config.weights.chi_certificate() {
            ChiCertificate::ConstantOne => 1.0,
            _ => chi(&config.weights, n, DEFAULT_CHI_TRUNCATION)
                .map(|c| c.value)
                .unwrap_or(f64::NAN),
        }
    };
    if !config.weights.chi_certificate().is_certified() {
        warnings.push("condition (e) is not certified for these weights; chi taken as NaN".into());
    }
    let mut partial = Vec::with_capacity(horizon);
    let mut s = 0.0;
    let mut lambda_is_one = true;
    let mut any_error = false;
    for n in 0..horizon {
        let stack = config.stacks.stack(n)?;
        let lambda = relaxation_at(&config.relaxation, n, stack.phi())?;
        lambda_is_one &= lambda == 1.0;
        let e = config.errors.norm_sum(n, dim);
        any_error |= e > 0.0;
        if e > 0.0 {
            s += chi_at(n) * lambda * e;
        }
        partial.push(s);
    }
    let inertial = config.weights.eta().is_some_and(|eta| eta.sup() > 0.0);
    let bounded_first = config
        .stacks
        .stack(0)?
        .layers()
        .first()
        .is_some_and(|op| op.has_bounded_range());
    let unsupported = inertial && any_error && !(lambda_is_one && bounded_first);
    if unsupported {
        warnings.push(
            "errors with inertial weights are only covered for lambda = 1 and a bounded-range first layer"
                .into(),
        );
    }
    let tail_increment = if horizon == 0 {
        0.0
    } else {
        let q = 3 * horizon / 4;
        let before = if q == 0 { 0.0 } else { partial[q - 1] };
        partial[horizon - 1] - before
    };
    Ok(BudgetReport {
        partial_sums: partial,
        tail_increment,
        unsupported_regime: unsupported,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::operators::{compose, AveragedOperator, ConvexSet, OperatorClass};
    use crate::schedules::EtaSchedule;
    use alloc::vec;

    fn neg_id(dim: usize) -> LayerStack {
        LayerStack::single(
            AveragedOperator::linear(Matrix::scaled_identity(dim, -1.0), OperatorClass::Nonexpansive, 1.0)
                .unwrap(),
        )
    }

    #[test]
    fn single_step_example() {
        let cfg = IterationConfig::new(neg_id(1), Point::scalar(2.0))
            .with_relaxation(RelaxationPolicy::Constant(0.5))
            .with_max_iters(1);
        let t = run(&cfg).unwrap();
        assert_eq!(t.final_point(), &Point::scalar(0.0));
    }

    #[test]
    fn inertial_step_example() {
        let eta = EtaSchedule::Custom(vec![0.0, 0.5]);
        let cfg = IterationConfig::new(neg_id(1), Point::scalar(1.0))
            .with_weights(WeightSchedule::inertial(eta).unwrap())
            .with_relaxation(RelaxationPolicy::Constant(0.5))
            .with_max_iters(2)
            .with_stop_residual(0.0);
        let t = run(&cfg).unwrap();
        assert_eq!(t.point(1), Some(&Point::scalar(0.0)));
        assert_eq!(t.rows[1].xbar, Some(Point::scalar(-0.5)));
        assert_eq!(t.point(2), Some(&Point::scalar(0.0)));
    }

    #[test]
    fn fixed_point_start_is_constant() {
        let p = AveragedOperator::projector(ConvexSet::NonnegOrthant).unwrap();
        let x0 = Point::new(vec![1.0, 2.0]).unwrap();
        let cfg = IterationConfig::new(LayerStack::single(p), x0.clone())
            .with_weights(WeightSchedule::window(3));
        let t = run(&cfg).unwrap();
        assert_eq!(t.stop, StopReason::Converged);
        assert_eq!(t.rows[0].residual, 0.0);
        assert_eq!(t.final_point(), &x0);
    }

    #[test]
    fn window_two_rescues_negation() {
        let cfg = IterationConfig::new(neg_id(2), Point::new(vec![1.0, 0.0]).unwrap())
            .with_weights(WeightSchedule::window(2))
            .with_max_iters(60)
            .with_stop_residual(0.0);
        let t = run(&cfg).unwrap();
        // x̄_1 = (x_1 + x_0)/2 = 0 exactly, so the run stops early
        assert_eq!(t.stop, StopReason::Converged);
        assert!(t.iterations() <= 60);
        assert!(t.final_point().norm() <= 1e-7);
        assert!(t.peak_retained <= 2);

        let base = IterationConfig::new(neg_id(2), Point::new(vec![1.0, 0.0]).unwrap())
            .with_max_iters(100);
        let t = run(&base).unwrap();
        assert_eq!(t.stop, StopReason::MaxIters);
        for row in &t.rows {
            assert_eq!(row.next.as_ref().unwrap().norm(), 1.0);
            assert_eq!(row.residual, 2.0);
        }
    }

    #[test]
    fn cesaro_uses_running_mean() {
        let half = AveragedOperator::linear(Matrix::scaled_identity(1, 0.5), OperatorClass::Nonexpansive, 0.5).unwrap();
        let cfg = IterationConfig::new(LayerStack::single(half), Point::scalar(8.0))
            .with_weights(WeightSchedule::cesaro())
            .with_max_iters(30)
            .with_stop_residual(0.0);
        let t = run(&cfg).unwrap();
        assert_eq!(t.peak_retained, 1);
        let orbit = t.orbit();
        for row in &t.rows {
            let direct = affine_combine(&WeightSchedule::cesaro().row(row.n), &orbit).unwrap();
            assert!(direct.dist(row.xbar.as_ref().unwrap()) <= 1e-12);
        }
    }

    #[test]
    fn divergence_is_reported_with_index() {
        let blow = AveragedOperator::custom(
            Arc::new(|x: &Point| x.scale(1e200)),
            OperatorClass::Nonexpansive,
            1.0,
        )
        .unwrap();
        let cfg = IterationConfig::new(LayerStack::single(blow), Point::scalar(1.0)).with_max_iters(10);
        assert_eq!(run(&cfg), Err(Error::Divergence { iteration: 1 }));
        let t = Engine::new(&cfg).unwrap().finish().unwrap();
        assert_eq!(t.stop, StopReason::Diverged { iteration: 1 });
    }

    #[test]
    fn relaxation_cap_is_checked_before_iterating() {
        let cfg = IterationConfig::new(neg_id(1), Point::scalar(1.0))
            .with_relaxation(RelaxationPolicy::Constant(1.5));
        let err = Engine::new(&cfg).err().unwrap();
        assert!(format!("{err}").contains("1/phi_n"));
    }

    #[test]
    fn synthetic_errors_keep_clean_residual() {
        let half = AveragedOperator::linear(Matrix::scaled_identity(1, 0.5), OperatorClass::Nonexpansive, 0.5).unwrap();
        let stack = compose(vec![half.clone(), half]).unwrap();
        let errs = ErrorModel::synthetic(vec![
            ErrorSequence::Geometric { rate: 0.5, direction: Point::scalar(1.0) },
            ErrorSequence::Zero,
        ]);
        let cfg = IterationConfig::new(stack.clone(), Point::scalar(3.0))
            .with_errors(errs.clone())
            .with_max_iters(5)
            .with_stop_residual(0.0);
        let t = run(&cfg).unwrap();
        for r in &t.rows {
            let xbar = r.xbar.as_ref().unwrap();
            assert!(r.residual_exact);
            assert_eq!(r.residual, stack.eval(xbar).dist(xbar));
        }
        assert_eq!(t.rows[1].theta, 0.5);

        let genuine = ErrorModel { nature: ErrorNature::Genuine, ..errs };
        let cfg = IterationConfig::new(stack, Point::scalar(3.0))
            .with_errors(genuine)
            .with_max_iters(5)
            .with_stop_residual(0.0);
        let t = run(&cfg).unwrap();
        assert!(!t.rows[0].residual_exact);
        // noisy image 0.75 + 1 versus x̄ = 3
        assert_eq!(t.rows[0].residual, 1.25);
    }

    #[test]
    fn budget_examples() {
        let id = AveragedOperator::identity(0.5).unwrap();
        let cfg = IterationConfig::new(LayerStack::single(id.clone()), Point::scalar(1.0));
        let r = error_budget_check(&cfg, 50).unwrap();
        assert_eq!(r.total(), 0.0);

        let geo = ErrorModel::synthetic(vec![ErrorSequence::Geometric { rate: 0.5, direction: Point::scalar(1.0) }]);
        let cfg = cfg.with_errors(geo.clone());
        let r = error_budget_check(&cfg, 60).unwrap();
        assert!((r.total() - 2.0).abs() < 1e-12);
        assert!(r.tail_increment < 1e-9);
        assert!(!r.unsupported_regime);

        let inertial = IterationConfig::new(LayerStack::single(id), Point::scalar(1.0))
            .with_weights(WeightSchedule::inertial(EtaSchedule::Constant(0.3)).unwrap())
            .with_relaxation(RelaxationPolicy::Constant(0.9))
            .with_errors(geo);
        let r = error_budget_check(&inertial, 40).unwrap();
        assert!(r.unsupported_regime);
        assert!(!r.warnings.is_empty());
    }

    #[test]
    fn error_layer_count_must_match() {
        let cfg = IterationConfig::new(neg_id(1), Point::scalar(1.0))
            .with_errors(ErrorModel::synthetic(vec![ErrorSequence::Zero, ErrorSequence::Zero]));
        assert!(Engine::new(&cfg).is_err());
    }
}
