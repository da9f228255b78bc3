//! Presets that express classical splitting methods as instances of the
//! layered mean-value iteration.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::certificates::{case_d_validate, CaseDParams, CaseDReport};
use crate::engine::{
    run, ErrorModel, ErrorSequence, IterationConfig, RunTrace, StackProvider, DEFAULT_MAX_ITERS,
    DEFAULT_STOP_RESIDUAL,
};
use crate::operators::{
    compose, AveragedOperator, ConvexFunction, ConvexSet, LayerStack, MonotoneOperator, VectorField,
};
use crate::schedules::{EtaSchedule, RelaxationPolicy, ScalarSequence, WeightSchedule};
use crate::space::{affine_combine, Point};
use crate::{Error, Result};

/// Starting point and stopping rule shared by every preset.
#[derive(Debug, Clone)]
pub struct RunControl {
    pub x0: Point,
    pub max_iters: usize,
    pub stop_residual: f64,
    pub reference: Option<Point>,
}

impl RunControl {
    pub fn new(x0: Point) -> Self {
        RunControl {
            x0,
            max_iters: DEFAULT_MAX_ITERS,
            stop_residual: DEFAULT_STOP_RESIDUAL,
            reference: None,
        }
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

    fn apply(&self, mut config: IterationConfig) -> IterationConfig {
        config.max_iters = self.max_iters;
        config.stop_residual = self.stop_residual;
        config.reference = self.reference.clone();
        config
    }
}

/// How the quantity of interest is read off the orbit.
#[derive(Debug, Clone)]
pub enum Extractor {
    /// The iterates themselves.
    Identity,
    /// `y_n = J_{γB} x̄_n + b_n`, which converges to a zero of `A + B`.
    PeacemanRachford {
        gamma: f64,
        b: MonotoneOperator,
        b_errors: ErrorSequence,
    },
}

/// A validated configuration plus the way to read the solution.
#[derive(Debug, Clone)]
pub struct SolverPreset {
    pub name: &'static str,
    pub config: IterationConfig,
    pub extractor: Extractor,
    /// Case-(d) parameter report, when that validation was requested.
    pub case_d: Option<CaseDReport>,
    pub notes: Vec<String>,
}

impl SolverPreset {
    pub fn run(&self) -> Result<RunTrace> {
        run(&self.config)
    }

    /// The extracted sequence, one entry per trace row.
    pub fn extract(&self, trace: &RunTrace) -> Result<Vec<Point>> {
        match &self.extractor {
            Extractor::Identity => (1..=trace.iterations())
                .map(|j| trace.point(j).cloned().ok_or(Error::MissingOrbitIndex(j)))
                .collect(),
            Extractor::PeacemanRachford { gamma, b, b_errors } => trace
                .rows
                .iter()
                .map(|row| {
                    let xbar = row.xbar.as_ref().ok_or_else(|| {
                        Error::InsufficientHistory("trace rows carry no points".into())
                    })?;
                    Ok(&b.resolvent(*gamma, xbar) + &b_errors.at(row.n, xbar.dim()))
                })
                .collect(),
        }
    }

    /// The last extracted value, falling back to the final iterate.
    pub fn solution(&self, trace: &RunTrace) -> Result<Point> {
        match self.extractor {
            Extractor::Identity => Ok(trace.final_point().clone()),
            _ => self
                .extract(trace)?
                .pop()
                .ok_or_else(|| Error::InsufficientHistory("empty trace".into())),
        }
    }
}

fn check_summable(errors: &ErrorSequence, what: &str, notes: &mut Vec<String>) {
    if !errors.is_evidently_summable() {
        notes.push(format!("summability of the {what} errors is assumed, not checked"));
    }
}

fn error_model(layers: Vec<ErrorSequence>) -> ErrorModel {
    if layers.iter().all(ErrorSequence::is_zero) {
        ErrorModel::none()
    } else {
        ErrorModel::synthetic(layers)
    }
}

/// Any stack, weights and relaxation, without preset-specific checks.
pub fn fixed_point(
    stack: LayerStack,
    weights: WeightSchedule,
    relaxation: RelaxationPolicy,
    errors: ErrorModel,
    control: &RunControl,
) -> Result<SolverPreset> {
    let config = control.apply(
        IterationConfig::new(stack, control.x0.clone())
            .with_weights(weights)
            .with_relaxation(relaxation)
            .with_errors(errors),
    );
    config.validate()?;
    Ok(SolverPreset {
        name: "fixed_point",
        config,
        extractor: Extractor::Identity,
        case_d: None,
        notes: Vec::new(),
    })
}

/// Peaceman–Rachford splitting for `0 ∈ Ax + Bx`.
#[derive(Debug, Clone)]
pub struct PeacemanRachford {
    pub a: MonotoneOperator,
    pub b: MonotoneOperator,
    pub gamma: f64,
    pub weights: WeightSchedule,
    pub a_errors: ErrorSequence,
    pub b_errors: ErrorSequence,
}

impl PeacemanRachford {
    pub fn new(a: MonotoneOperator, b: MonotoneOperator, gamma: f64) -> Self {
        PeacemanRachford {
            a,
            b,
            gamma,
            weights: WeightSchedule::window(2),
            a_errors: ErrorSequence::Zero,
            b_errors: ErrorSequence::Zero,
        }
    }
}

/// Layers `R_{γA}`, `R_{γB}` with errors `2a_n`, `2b_n` and `λ ≡ 1`, so that
/// `x_{n+1} = x̄_n + 2(z_n − y_n)`.
pub fn peaceman_rachford(params: &PeacemanRachford, control: &RunControl) -> Result<SolverPreset> {
    if !(params.gamma > 0.0) {
        return Err(Error::config(format!("gamma = {} must be > 0", params.gamma)));
    }
    if !params.weights.is_nonnegative() || !params.weights.mann_condition() {
        return Err(Error::config(format!(
            "weights '{}' violate inf_n mu_{{n+1,n}} mu_{{n+1,n+1}} > 0 (nonnegative weights required)",
            params.weights.name()
        )));
    }
    let mut notes = Vec::new();
    check_summable(&params.a_errors, "a_n", &mut notes);
    check_summable(&params.b_errors, "b_n", &mut notes);
    let stack = compose(vec![
        AveragedOperator::reflector(params.gamma, params.a.clone())?,
        AveragedOperator::reflector(params.gamma, params.b.clone())?,
    ])?;
    let errors = error_model(vec![params.a_errors.scaled(2.0), params.b_errors.scaled(2.0)]);
    let config = control.apply(
        IterationConfig::new(stack, control.x0.clone())
            .with_weights(params.weights.clone())
            .with_relaxation(RelaxationPolicy::Constant(1.0))
            .with_errors(errors),
    );
    config.validate()?;
    Ok(SolverPreset {
        name: "peaceman_rachford",
        config,
        extractor: Extractor::PeacemanRachford {
            gamma: params.gamma,
            b: params.b.clone(),
            b_errors: params.b_errors.clone(),
        },
        case_d: None,
        notes,
    })
}

/// Which parameter regime an inertial forward-backward run relies on.
#[derive(Debug, Clone, PartialEq)]
pub enum InertialRegime {
    /// Nesterov-like `η_n`; convergence hinges on `Σ n‖x_n − x_{n−1}‖² < ∞`,
    /// which is only monitored a posteriori.
    Nesterov,
    /// `sup η_n < 1`; the summability premise is again a posteriori.
    BoundedEta,
    /// Parameters certified in advance.
    CaseD(CaseDParams),
}

#[derive(Debug, Clone, PartialEq)]
pub enum FbVariant {
    Memoryless,
    Mean(WeightSchedule),
    Inertial { eta: EtaSchedule, regime: InertialRegime },
    /// `B = 0`: the single layer `J_{γA}`.
    ProximalPoint,
}

/// Forward-backward splitting for `0 ∈ Ax + Bx` with `B` β-cocoercive.
#[derive(Debug, Clone)]
pub struct ForwardBackward {
    pub a: MonotoneOperator,
    pub b: VectorField,
    pub beta: f64,
    pub gamma: ScalarSequence,
    pub epsilon: f64,
    pub lambda: f64,
    pub variant: FbVariant,
    pub a_errors: ErrorSequence,
    pub b_errors: ErrorSequence,
}

impl ForwardBackward {
    /// Memoryless, `λ ≡ 1`, `ε = 0.1`, no errors.
    pub fn new(a: MonotoneOperator, b: VectorField, beta: f64, gamma: f64) -> Self {
        ForwardBackward {
            a,
            b,
            beta,
            gamma: ScalarSequence::Constant(gamma),
            epsilon: 0.1,
            lambda: 1.0,
            variant: FbVariant::Memoryless,
            a_errors: ErrorSequence::Zero,
            b_errors: ErrorSequence::Zero,
        }
    }

    pub fn proximal_point(a: MonotoneOperator, gamma: f64) -> Self {
        ForwardBackward {
            variant: FbVariant::ProximalPoint,
            ..Self::new(a, VectorField::Zero, f64::INFINITY, gamma)
        }
    }

    pub fn with_variant(mut self, variant: FbVariant) -> Self {
        self.variant = variant;
        self
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_errors(mut self, a_errors: ErrorSequence, b_errors: ErrorSequence) -> Self {
        self.a_errors = a_errors;
        self.b_errors = b_errors;
        self
    }

    fn proximal(&self) -> bool {
        matches!(self.variant, FbVariant::ProximalPoint)
    }

    fn stack_at(&self, gamma: f64) -> Result<LayerStack> {
        let backward = AveragedOperator::resolvent(gamma, self.a.clone())?;
        if self.proximal() {
            return Ok(LayerStack::single(backward));
        }
        compose(vec![
            backward,
            AveragedOperator::gradient_step(gamma, self.beta, self.b.clone())?,
        ])
    }
}

pub fn forward_backward(params: &ForwardBackward, control: &RunControl) -> Result<SolverPreset> {
    let eps = params.epsilon;
    let proximal = params.proximal();
    if proximal && !matches!(params.b, VectorField::Zero) {
        return Err(Error::config("the proximal point variant requires B = 0"));
    }
    if !(params.beta > 0.0) {
        return Err(Error::config(format!("beta = {} must be > 0", params.beta)));
    }
    if !(eps > 0.0 && eps < 0.5 && eps < params.beta) {
        return Err(Error::config(format!(
            "epsilon = {eps} must lie in (0, min{{1/2, beta}})"
        )));
    }
    let gamma_cap = 2.0 * params.beta / (1.0 + eps);
    for n in 0..control.max_iters.max(1) {
        let g = params.gamma.at(n);
        if !(g >= eps && g <= gamma_cap) {
            return Err(Error::config(format!(
                "gamma_{n} = {g} outside [epsilon, 2 beta/(1+epsilon)] = [{eps}, {gamma_cap}]"
            )));
        }
    }
    params.a.validate()?;

    let mut notes = Vec::new();
    check_summable(&params.a_errors, "a_n", &mut notes);
    check_summable(&params.b_errors, "b_n", &mut notes);
    let weights = match &params.variant {
        FbVariant::Memoryless | FbVariant::ProximalPoint => WeightSchedule::memoryless(),
        FbVariant::Mean(w) => {
            if !w.is_nonnegative() {
                return Err(Error::config("mean-value weights must be nonnegative"));
            }
            w.clone()
        }
        FbVariant::Inertial { eta, regime } => {
            eta.validate()?;
            let has_errors = !(params.a_errors.is_zero() && params.b_errors.is_zero());
            if has_errors && !(params.lambda == 1.0 && params.a.has_bounded_domain()) {
                return Err(Error::config(
                    "inertial forward-backward admits errors only with lambda = 1 and dom A bounded",
                ));
            }
            match regime {
                InertialRegime::Nesterov if !matches!(eta, EtaSchedule::NesterovLike { .. }) => {
                    return Err(Error::config("the Nesterov regime needs a Nesterov-like eta"));
                }
                InertialRegime::BoundedEta if eta.sup() >= 1.0 => {
                    return Err(Error::config("the bounded regime needs sup eta_n < 1"));
                }
                InertialRegime::CaseD(_) => {}
                _ => notes.push("sum n ||x_n - x_{n-1}||^2 < inf is checked a posteriori".into()),
            }
            WeightSchedule::inertial(eta.clone())?
        }
    };

    let stacks = if params.gamma.is_constant() {
        StackProvider::Fixed(params.stack_at(params.gamma.at(0))?)
    } else {
        let p = params.clone();
        StackProvider::PerIteration(Arc::new(move |n| p.stack_at(p.gamma.at(n))))
    };
    let layers = if proximal {
        vec![params.a_errors.clone()]
    } else {
        let gamma = params.gamma.clone();
        vec![
            params.a_errors.clone(),
            params.b_errors.scaled_by(Arc::new(move |n| -gamma.at(n))),
        ]
    };
    let relaxation = RelaxationPolicy::FbBand {
        epsilon: eps,
        beta: params.beta,
        gamma: params.gamma.clone(),
        lambda: Some(params.lambda),
    };
    let config = control.apply(
        IterationConfig::with_provider(stacks, control.x0.clone())
            .with_weights(weights)
            .with_relaxation(relaxation)
            .with_errors(error_model(layers)),
    );
    config.validate()?;

    let mut case_d = None;
    if let FbVariant::Inertial {
        eta,
        regime: InertialRegime::CaseD(cd),
    } = &params.variant
    {
        let report = validate_case_d(&config, cd, eta)?;
        case_d = Some(report);
    }
    Ok(SolverPreset {
        name: if proximal { "proximal_point" } else { "forward_backward" },
        config,
        extractor: Extractor::Identity,
        case_d,
        notes,
    })
}

fn validate_case_d(config: &IterationConfig, params: &CaseDParams, eta: &EtaSchedule) -> Result<CaseDReport> {
    // one extra entry for ω_{N+1}
    let horizon = config.max_iters;
    let mut phis = Vec::with_capacity(horizon + 2);
    for n in 0..horizon + 2 {
        phis.push(config.stacks.stack(n)?.phi());
    }
    let lambdas = config.relaxation_sequence_through(horizon + 1)?;
    let report = case_d_validate(params, |n| phis[n], |n| lambdas[n], |n| eta.at(n), horizon)?;
    if let Some(msg) = report.describe_failure() {
        return Err(Error::config(msg));
    }
    Ok(report)
}

/// `B ↦ ‖B x̄_n − B z‖` along a recorded trace.
pub fn gradient_gap(field: &VectorField, trace: &RunTrace, z: &Point) -> Result<Vec<f64>> {
    let bz = field.eval(z);
    trace
        .rows
        .iter()
        .map(|row| {
            let xbar = row
                .xbar
                .as_ref()
                .ok_or_else(|| Error::InsufficientHistory("trace rows carry no points".into()))?;
            Ok(field.eval(xbar).dist(&bz))
        })
        .collect()
}

/// The Polyak subgradient method `x_{n+1} = x̄_n + λ_n(P_C(x̄_n + ξ_n(G x̄_n − x̄_n)) − x̄_n)`
/// for finding `x ∈ C` with `f(x) ≤ θ`.
#[derive(Debug, Clone)]
pub struct Polyak {
    pub function: ConvexFunction,
    pub theta: f64,
    pub set: ConvexSet,
    pub xi: ScalarSequence,
    pub lambda: ScalarSequence,
    pub eta: f64,
    pub epsilon: f64,
    pub weights: WeightSchedule,
}

impl Polyak {
    /// `ξ ≡ λ ≡ 1`, `η = 1/2`, `ε = 0.1`, memoryless.
    pub fn new(function: ConvexFunction, theta: f64, set: ConvexSet) -> Self {
        Polyak {
            function,
            theta,
            set,
            xi: ScalarSequence::Constant(1.0),
            lambda: ScalarSequence::Constant(1.0),
            eta: 0.5,
            epsilon: 0.1,
            weights: WeightSchedule::memoryless(),
        }
    }

    pub fn with_weights(mut self, weights: WeightSchedule) -> Self {
        self.weights = weights;
        self
    }

    fn stack_at(&self, xi: f64) -> Result<LayerStack> {
        let g = AveragedOperator::subgradient_projector(self.function.clone(), self.theta)?;
        compose(vec![
            AveragedOperator::projector(self.set.clone())?,
            AveragedOperator::relaxed(g, xi)?,
        ])
    }
}

pub fn polyak_subgradient(params: &Polyak, control: &RunControl) -> Result<SolverPreset> {
    let (eta, eps) = (params.eta, params.epsilon);
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::config(format!("eta = {eta} must lie in (0, 1)")));
    }
    if !(eps > 0.0 && eps < eta / (2.0 + eta)) {
        return Err(Error::config(format!(
            "epsilon = {eps} must lie in (0, eta/(2+eta)) = (0, {})",
            eta / (2.0 + eta)
        )));
    }
    if !params.weights.is_nonnegative() {
        return Err(Error::config("the subgradient method requires nonnegative weights"));
    }
    params.set.validate()?;
    for n in 0..control.max_iters.max(1) {
        let (xi, l) = (params.xi.at(n), params.lambda.at(n));
        if !(xi >= eta && xi <= 2.0 - eta) {
            return Err(Error::config(format!(
                "xi_{n} = {xi} outside [eta, 2-eta] = [{eta}, {}]",
                2.0 - eta
            )));
        }
        let cap = (1.0 - eps) * (2.0 - xi / 2.0);
        if !(l >= eps && l <= cap) {
            return Err(Error::config(format!(
                "lambda_{n} = {l} outside [epsilon, (1-epsilon)(2-xi_n/2)] = [{eps}, {cap}]"
            )));
        }
    }
    let stacks = if params.xi.is_constant() {
        StackProvider::Fixed(params.stack_at(params.xi.at(0))?)
    } else {
        let p = params.clone();
        StackProvider::PerIteration(Arc::new(move |n| p.stack_at(p.xi.at(n))))
    };
    let mut notes = Vec::new();
    let x0 = params.set.project(&control.x0);
    if x0 != control.x0 {
        notes.push("x0 projected onto C".into());
    }
    let mut config = control.apply(
        IterationConfig::with_provider(stacks, x0)
            .with_weights(params.weights.clone())
            .with_relaxation(RelaxationPolicy::Sequence(params.lambda.clone())),
    );
    config.x0.check_dim(control.x0.dim())?;
    config.validate()?;
    config.record_points = true;
    Ok(SolverPreset {
        name: "polyak_subgradient",
        config,
        extractor: Extractor::Identity,
        case_d: None,
        notes,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum KmVariant {
    /// Nonnegative weights with `inf μ_{n+1,n} μ_{n+1,n+1} > 0`, `λ ≡ 1`.
    Mean(WeightSchedule),
    /// `x̄_n = (1 + η_n)x_n − η_n x_{n−1}`, parameters certified in advance.
    Inertial {
        eta: EtaSchedule,
        lambda: ScalarSequence,
        params: CaseDParams,
    },
}

/// Krasnosel'skiĭ–Mann iteration of a single (quasi)nonexpansive map.
#[derive(Debug, Clone)]
pub struct KrasnoselskiiMann {
    pub operator: AveragedOperator,
    /// Whether `Id − T` is demiclosed at 0; without it no convergence is
    /// claimed.
    pub demiclosed: bool,
    pub variant: KmVariant,
    pub errors: ErrorSequence,
}

impl KrasnoselskiiMann {
    pub fn new(operator: AveragedOperator, variant: KmVariant) -> Self {
        KrasnoselskiiMann {
            operator,
            demiclosed: true,
            variant,
            errors: ErrorSequence::Zero,
        }
    }

    pub fn with_errors(mut self, errors: ErrorSequence) -> Self {
        self.errors = errors;
        self
    }
}

pub fn krasnoselskii_mann(params: &KrasnoselskiiMann, control: &RunControl) -> Result<SolverPreset> {
    let stack = LayerStack::single(params.operator.clone().into_plain());
    let mut notes = Vec::new();
    if !params.demiclosed {
        notes.push("Id - T not known to be demiclosed at 0; no convergence claimed".into());
    }
    check_summable(&params.errors, "e_n", &mut notes);
    let errors = error_model(vec![params.errors.clone()]);
    let base = IterationConfig::new(stack, control.x0.clone()).with_errors(errors);
    match &params.variant {
        KmVariant::Mean(weights) => {
            if !weights.is_nonnegative() || !weights.mann_condition() {
                return Err(Error::config(format!(
                    "weights '{}' violate inf_n mu_{{n+1,n}} mu_{{n+1,n+1}} > 0 (nonnegative weights required)",
                    weights.name()
                )));
            }
            let config = control.apply(
                base.with_weights(weights.clone())
                    .with_relaxation(RelaxationPolicy::Constant(1.0)),
            );
            config.validate()?;
            Ok(SolverPreset {
                name: "krasnoselskii_mann",
                config,
                extractor: Extractor::Identity,
                case_d: None,
                notes,
            })
        }
        KmVariant::Inertial { eta, lambda, params: cd } => {
            eta.validate()?;
            if eta.sup() >= 1.0 {
                return Err(Error::config("inertial Mann iteration needs sup eta_n < 1"));
            }
            if eta.sup() > cd.eta {
                return Err(Error::config(format!(
                    "sup eta_n = {} exceeds the bound eta = {}",
                    eta.sup(),
                    cd.eta
                )));
            }
            for n in 0..control.max_iters.max(1) {
                let l = lambda.at(n);
                if !(l > 0.0 && l < 1.0) {
                    return Err(Error::config(format!("lambda_{n} = {l} must lie in (0, 1)")));
                }
            }
            let config = control.apply(
                base.with_weights(WeightSchedule::inertial(eta.clone())?)
                    .with_relaxation(RelaxationPolicy::Sequence(lambda.clone())),
            );
            config.validate()?;
            let report = validate_case_d(&config, cd, eta)?;
            Ok(SolverPreset {
                name: "inertial_krasnoselskii_mann",
                config,
                extractor: Extractor::Identity,
                case_d: Some(report),
                notes,
            })
        }
    }
}

/// Largest admissible constant `λ` for the inertial Mann iteration:
/// `(ϑ − η(η(1+η) + ηϑ + σ)) / (ϑ(1 + η(1+η) + ηϑ + σ))`.
pub fn inertial_mann_lambda_cap(params: &CaseDParams) -> f64 {
    // ω_{n+1} = 1 − λ_{n+1} ≤ 1
    params.lambda_cap(1.0, 1.0)
}

/// Evaluates `x̄_n` for a recorded trace, independently of the engine's own
/// bookkeeping.
pub fn recompute_xbar(trace: &RunTrace, weights: &WeightSchedule, n: usize) -> Result<Point> {
    affine_combine(&weights.row(n), trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::StopReason;
    use crate::linalg::Matrix;
    use crate::operators::OperatorClass;

    fn p(v: &[f64]) -> Point {
        Point::from_slice(v).unwrap()
    }

    fn l1_quadratic_fb(gamma: f64) -> ForwardBackward {
        ForwardBackward::new(
            MonotoneOperator::SubdiffL1 { weight: 1.0 },
            VectorField::Affine {
                matrix: Matrix::identity(1),
                offset: p(&[-2.0]),
            },
            1.0,
            gamma,
        )
    }

    #[test]
    fn pr_indicator_pair_is_stationary() {
        let c = ConvexSet::Ball {
            center: p(&[0.0, 0.0]),
            radius: 1.0,
        };
        let params = PeacemanRachford::new(
            MonotoneOperator::NormalCone(c.clone()),
            MonotoneOperator::NormalCone(c),
            1.0,
        );
        let x0 = p(&[0.3, -0.4]);
        let preset = peaceman_rachford(&params, &RunControl::new(x0.clone()).with_max_iters(5)).unwrap();
        let trace = preset.run().unwrap();
        assert_eq!(trace.final_point(), &x0);
        assert_eq!(preset.solution(&trace).unwrap(), x0);
    }

    #[test]
    fn pr_rejects_cesaro_and_memoryless() {
        for w in [WeightSchedule::cesaro(), WeightSchedule::memoryless()] {
            let mut params = PeacemanRachford::new(MonotoneOperator::Zero, MonotoneOperator::Zero, 1.0);
            params.weights = w;
            let err = peaceman_rachford(&params, &RunControl::new(p(&[1.0]))).unwrap_err();
            assert!(format!("{err}").contains("mu_{n+1,n} mu_{n+1,n+1}"), "{err}");
        }
    }

    #[test]
    fn pr_solves_abs_plus_quadratic() {
        // A = ∂|·|, B = x − 1: the sum vanishes at 0, and y_n → 0
        let params = PeacemanRachford::new(
            MonotoneOperator::SubdiffL1 { weight: 1.0 },
            MonotoneOperator::Affine {
                matrix: Matrix::identity(1),
                offset: p(&[-1.0]),
            },
            1.0,
        );
        let preset = peaceman_rachford(
            &params,
            &RunControl::new(p(&[3.0])).with_max_iters(400).with_stop_residual(1e-13),
        )
        .unwrap();
        let trace = preset.run().unwrap();
        let y = preset.solution(&trace).unwrap();
        assert!(y.norm() < 1e-8, "{y:?}");
    }

    #[test]
    fn fb_l1_quadratic_converges() {
        let params = l1_quadratic_fb(1.0);
        let preset = forward_backward(&params, &RunControl::new(p(&[0.0])).with_stop_residual(1e-12)).unwrap();
        assert_eq!(preset.config.stacks.stack(0).unwrap().phi(), 2.0 / 3.0);
        let trace = preset.run().unwrap();
        assert_eq!(trace.stop, StopReason::Converged);
        assert!((trace.final_point()[0] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn fb_gamma_and_epsilon_bounds() {
        let err = forward_backward(&l1_quadratic_fb(1.95), &RunControl::new(p(&[0.0]))).unwrap_err();
        assert!(format!("{err}").contains("2 beta/(1+epsilon)"), "{err}");
        let err = forward_backward(&l1_quadratic_fb(1.0).with_epsilon(0.6), &RunControl::new(p(&[0.0])))
            .unwrap_err();
        assert!(format!("{err}").contains("min{1/2, beta}"), "{err}");
        let err = forward_backward(&l1_quadratic_fb(1.0).with_lambda(1.6), &RunControl::new(p(&[0.0])))
            .unwrap_err();
        assert!(format!("{err}").contains("1/phi_n"), "{err}");
    }

    #[test]
    fn fb_inertial_with_errors_needs_bounded_domain() {
        let params = l1_quadratic_fb(1.0)
            .with_variant(FbVariant::Inertial {
                eta: EtaSchedule::NesterovLike { tau: 2.0 },
                regime: InertialRegime::Nesterov,
            })
            .with_errors(
                ErrorSequence::Geometric {
                    rate: 0.5,
                    direction: p(&[1.0]),
                },
                ErrorSequence::Zero,
            );
        let err = forward_backward(&params, &RunControl::new(p(&[0.0]))).unwrap_err();
        assert!(format!("{err}").contains("dom A bounded"), "{err}");

        let mut bounded = params.clone();
        bounded.a = MonotoneOperator::NormalCone(ConvexSet::Box {
            lower: vec![-5.0],
            upper: vec![5.0],
        });
        assert!(forward_backward(&bounded, &RunControl::new(p(&[0.0]))).is_ok());
    }

    #[test]
    fn proximal_point_has_phi_one_half() {
        let params = ForwardBackward::proximal_point(MonotoneOperator::SubdiffL1 { weight: 1.0 }, 1.0)
            .with_lambda(1.8);
        let preset = forward_backward(&params, &RunControl::new(p(&[4.0]))).unwrap();
        assert_eq!(preset.config.stacks.stack(0).unwrap().phi(), 0.5);
        let trace = preset.run().unwrap();
        assert!(trace.final_point().norm() < 1e-9);
    }

    #[test]
    fn fb_varying_gamma_builds_per_iteration_stacks() {
        let mut params = l1_quadratic_fb(1.0);
        params.gamma = ScalarSequence::Values(vec![0.5, 1.0, 1.5]);
        let preset = forward_backward(&params, &RunControl::new(p(&[0.0])).with_max_iters(200)).unwrap();
        let trace = preset.run().unwrap();
        assert!((trace.final_point()[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn polyak_projects_x0_and_checks_bands() {
        let set = ConvexSet::Halfspace {
            normal: p(&[-1.0, 0.0]),
            offset: -1.0,
        };
        let params = Polyak::new(ConvexFunction::Norm, 1.0, set.clone());
        let preset = polyak_subgradient(&params, &RunControl::new(p(&[-2.0, 3.0]))).unwrap();
        assert!(set.contains(&preset.config.x0, 0.0));

        let mut bad = params.clone();
        bad.epsilon = 0.3;
        assert!(polyak_subgradient(&bad, &RunControl::new(p(&[1.0, 0.0]))).is_err());
        let mut bad = params.clone();
        bad.lambda = ScalarSequence::Constant(1.7);
        let err = polyak_subgradient(&bad, &RunControl::new(p(&[1.0, 0.0]))).unwrap_err();
        assert!(format!("{err}").contains("(1-epsilon)(2-xi_n/2)"), "{err}");
        let bad = params.with_weights(WeightSchedule::inertial(EtaSchedule::Constant(0.3)).unwrap());
        assert!(polyak_subgradient(&bad, &RunControl::new(p(&[1.0, 0.0]))).is_err());
    }

    #[test]
    fn inertial_mann_rotation() {
        let cd = CaseDParams {
            eta: 0.2,
            sigma: 0.2,
            theta_tune: 2.0 / 3.0,
        };
        let cap = inertial_mann_lambda_cap(&cd);
        assert!(cap > 0.5 && cap < 0.53, "{cap}");
        let rot = AveragedOperator::linear(
            Matrix::rotation(core::f64::consts::FRAC_PI_2),
            OperatorClass::Nonexpansive,
            1.0,
        )
        .unwrap();
        let params = KrasnoselskiiMann::new(
            rot,
            KmVariant::Inertial {
                eta: EtaSchedule::Constant(0.2),
                lambda: ScalarSequence::Constant(0.5),
                params: cd,
            },
        );
        let preset = krasnoselskii_mann(&params, &RunControl::new(p(&[1.0, 0.0])).with_max_iters(500)).unwrap();
        assert!(preset.case_d.as_ref().unwrap().valid());
        let trace = preset.run().unwrap();
        assert!(trace.final_point().norm() < 1e-9);

        let mut too_big = params.clone();
        too_big.variant = KmVariant::Inertial {
            eta: EtaSchedule::Constant(0.2),
            lambda: ScalarSequence::Constant(0.6),
            params: cd,
        };
        let err = krasnoselskii_mann(&too_big, &RunControl::new(p(&[1.0, 0.0]))).unwrap_err();
        assert!(format!("{err}").contains("lambda cap"), "{err}");
    }

    #[test]
    fn mean_mann_needs_window() {
        let op = AveragedOperator::identity(1.0).unwrap();
        let km = KrasnoselskiiMann::new(op.clone(), KmVariant::Mean(WeightSchedule::memoryless()));
        assert!(krasnoselskii_mann(&km, &RunControl::new(p(&[1.0]))).is_err());
        let km = KrasnoselskiiMann::new(op, KmVariant::Mean(WeightSchedule::window(3)));
        assert!(krasnoselskii_mann(&km, &RunControl::new(p(&[1.0]))).is_ok());
    }
}
