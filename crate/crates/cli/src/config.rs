//! The JSON run configuration and its translation into a validated preset.

use std::path::{Path, PathBuf};

use orbitfix_core::certificates::CaseDParams;
use orbitfix_core::engine::{ErrorModel, ErrorSequence, DEFAULT_MAX_ITERS, DEFAULT_STOP_RESIDUAL};
use orbitfix_core::operators::{LayerStack, MonotoneOperator, VectorField};
use orbitfix_core::problems::{catalog, ProblemParams, ProblemSpec};
use orbitfix_core::schedules::{EtaSchedule, RelaxationPolicy, ScalarSequence, WeightSchedule};
use orbitfix_core::solvers::{
    fixed_point, forward_backward, krasnoselskii_mann, peaceman_rachford, polyak_subgradient,
    FbVariant, ForwardBackward, InertialRegime, KmVariant, KrasnoselskiiMann, PeacemanRachford,
    Polyak, RunControl, SolverPreset,
};
use orbitfix_core::space::Point;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemSection,
    pub solver: SolverSection,
    #[serde(default)]
    pub weights: WeightsSection,
    /// Overrides the preset's relaxation where the preset allows it.
    #[serde(default)]
    pub relaxation: Option<RelaxationSection>,
    #[serde(default)]
    pub errors: ErrorsSection,
    /// Defaults to the problem's suggested starting point.
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_stop_residual")]
    pub stop_residual: f64,
    #[serde(default)]
    pub outputs: OutputsSection,
    #[serde(default)]
    pub seed: u64,
}

fn default_horizon() -> usize {
    DEFAULT_MAX_ITERS
}

fn default_stop_residual() -> f64 {
    DEFAULT_STOP_RESIDUAL
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub name: String,
    #[serde(default)]
    pub a: Option<Vec<f64>>,
    #[serde(default)]
    pub angle: Option<f64>,
    #[serde(default)]
    pub anchor: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    FixedPoint,
    ForwardBackward,
    PeacemanRachford,
    Polyak,
    KrasnoselskiiMann,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseDSection {
    pub eta: f64,
    pub sigma: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub preset: Preset,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub xi: Option<f64>,
    /// The Polyak parameter `η` bounding `ξ_n`.
    #[serde(default)]
    pub eta: Option<f64>,
    /// Inertial parameter certification; selects case (d).
    #[serde(default)]
    pub case_d: Option<CaseDSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EtaSection {
    Zero,
    Constant { value: f64 },
    Nesterov { tau: f64 },
    Custom { values: Vec<f64> },
}

impl EtaSection {
    pub fn schedule(&self) -> EtaSchedule {
        match self {
            EtaSection::Zero => EtaSchedule::Zero,
            EtaSection::Constant { value } => EtaSchedule::Constant(*value),
            EtaSection::Nesterov { tau } => EtaSchedule::NesterovLike { tau: *tau },
            EtaSection::Custom { values } => EtaSchedule::Custom(values.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightsSection {
    #[default]
    Memoryless,
    Window {
        w: usize,
    },
    Cesaro,
    Inertial {
        eta: EtaSection,
    },
}

impl WeightsSection {
    pub fn schedule(&self) -> Result<WeightSchedule, CliError> {
        Ok(match self {
            WeightsSection::Memoryless => WeightSchedule::memoryless(),
            WeightsSection::Window { w } => {
                if *w == 0 {
                    return Err(CliError::Config("window length must be >= 1".into()));
                }
                WeightSchedule::window(*w)
            }
            WeightsSection::Cesaro => WeightSchedule::cesaro(),
            WeightsSection::Inertial { eta } => WeightSchedule::inertial(eta.schedule())?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RelaxationSection {
    Constant { value: f64 },
    Sequence { values: Vec<f64> },
    FractionOfInversePhi { epsilon: f64, lambda: Option<f64> },
    Overrelaxed { epsilon: f64, lambda: Option<f64> },
}

impl RelaxationSection {
    pub fn policy(&self) -> RelaxationPolicy {
        match self {
            RelaxationSection::Constant { value } => RelaxationPolicy::Constant(*value),
            RelaxationSection::Sequence { values } => {
                RelaxationPolicy::Sequence(ScalarSequence::Values(values.clone()))
            }
            RelaxationSection::FractionOfInversePhi { epsilon, lambda } => {
                RelaxationPolicy::FractionOfInversePhi { epsilon: *epsilon, lambda: *lambda }
            }
            RelaxationSection::Overrelaxed { epsilon, lambda } => {
                RelaxationPolicy::Overrelaxed { epsilon: *epsilon, lambda: *lambda }
            }
        }
    }
}

/// Error terms on one layer (1-based, counted from the outermost operator).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ErrorsSection {
    #[default]
    None,
    Geometric {
        rate: f64,
        direction: Vec<f64>,
        #[serde(default = "first_layer")]
        layer: usize,
    },
    List {
        terms: Vec<Vec<f64>>,
        #[serde(default = "first_layer")]
        layer: usize,
    },
}

fn first_layer() -> usize {
    1
}

impl ErrorsSection {
    /// The error sequence and its layer index (0-based), if any.
    fn sequence(&self) -> Result<Option<(usize, ErrorSequence)>, CliError> {
        let (layer, seq) = match self {
            ErrorsSection::None => return Ok(None),
            ErrorsSection::Geometric { rate, direction, layer } => (
                *layer,
                ErrorSequence::Geometric { rate: *rate, direction: Point::from_slice(direction)? },
            ),
            ErrorsSection::List { terms, layer } => (
                *layer,
                ErrorSequence::List(
                    terms.iter().map(|t| Point::from_slice(t)).collect::<Result<_, _>>()?,
                ),
            ),
        };
        if layer == 0 {
            return Err(CliError::Config("error layers are numbered from 1".into()));
        }
        Ok(Some((layer - 1, seq)))
    }

    /// One sequence per layer, zero except on the designated layer.
    fn layers(&self, count: usize) -> Result<Vec<ErrorSequence>, CliError> {
        let mut out = vec![ErrorSequence::Zero; count];
        if let Some((i, seq)) = self.sequence()? {
            if i >= count {
                return Err(CliError::Config(format!(
                    "error layer {} out of range: the stack has {count} layers",
                    i + 1
                )));
            }
            out[i] = seq;
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputsSection {
    #[serde(default = "default_trace")]
    pub trace: PathBuf,
    #[serde(default = "default_report")]
    pub report: PathBuf,
}

fn default_trace() -> PathBuf {
    "trace.csv".into()
}

fn default_report() -> PathBuf {
    "report.json".into()
}

impl Default for OutputsSection {
    fn default() -> Self {
        OutputsSection { trace: default_trace(), report: default_report() }
    }
}

impl OutputsSection {
    pub fn resolve(&self, out_dir: Option<&Path>) -> (PathBuf, PathBuf) {
        let join = |p: &PathBuf| match out_dir {
            Some(dir) if p.is_relative() => dir.join(p),
            _ => p.clone(),
        };
        (join(&self.trace), join(&self.report))
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

/// A validated preset with the problem it solves.
pub struct Built {
    pub problem: ProblemSpec,
    pub preset: SolverPreset,
    /// The known solution the extracted sequence should approach, when it
    /// differs from the certificate reference.
    pub solution: Option<Point>,
}

fn need(value: Option<f64>, name: &str, preset: &str) -> Result<f64, CliError> {
    value.ok_or_else(|| CliError::Config(format!("solver.{name} is required by the {preset} preset")))
}

fn fb_parts(problem: &ProblemSpec, preset: &str) -> Result<(MonotoneOperator, VectorField, f64), CliError> {
    problem.fb_parts().ok_or_else(|| {
        CliError::Config(format!("problem '{}' has no splitting form for {preset}", problem.name))
    })
}

fn constant_relaxation(cfg: &RunConfig, preset: &str) -> Result<Option<f64>, CliError> {
    match &cfg.relaxation {
        None => Ok(None),
        Some(RelaxationSection::Constant { value }) => Ok(Some(*value)),
        Some(_) => Err(CliError::Config(format!("the {preset} preset takes a constant relaxation only"))),
    }
}

pub fn build(cfg: &RunConfig) -> Result<Built, CliError> {
    let problem = catalog(
        &cfg.problem.name,
        &ProblemParams {
            a: cfg.problem.a.clone(),
            angle: cfg.problem.angle,
            anchor: cfg.problem.anchor.clone(),
        },
    )?;
    let x0 = match &cfg.x0 {
        Some(v) => Point::from_slice(v)?,
        None => problem.default_x0(),
    };
    if x0.dim() != problem.dim {
        return Err(orbitfix_core::Error::DimensionMismatch { expected: problem.dim, found: x0.dim() }.into());
    }
    let control = RunControl::new(x0)
        .with_max_iters(cfg.horizon)
        .with_stop_residual(cfg.stop_residual)
        .with_reference(problem.reference.clone());
    let weights = cfg.weights.schedule()?;
    let s = &cfg.solver;
    let mut solution = None;

    let preset = match s.preset {
        Preset::FixedPoint => {
            let stack = problem.fixed_point_stack()?;
            let errors = ErrorModel::synthetic(cfg.errors.layers(stack.len())?);
            let relaxation = cfg
                .relaxation
                .as_ref()
                .map(RelaxationSection::policy)
                .unwrap_or(RelaxationPolicy::Constant(1.0));
            fixed_point(stack, weights, relaxation, errors, &control)?
        }
        Preset::ForwardBackward => {
            let (a, b, beta) = fb_parts(&problem, "forward_backward")?;
            let variant = match &cfg.weights {
                WeightsSection::Memoryless => FbVariant::Memoryless,
                WeightsSection::Window { .. } | WeightsSection::Cesaro => FbVariant::Mean(weights),
                WeightsSection::Inertial { eta } => {
                    let eta = eta.schedule();
                    let regime = match (&s.case_d, &eta) {
                        (Some(cd), _) => InertialRegime::CaseD(CaseDParams {
                            eta: cd.eta,
                            sigma: cd.sigma,
                            theta_tune: cd.theta,
                        }),
                        (None, EtaSchedule::NesterovLike { .. }) => InertialRegime::Nesterov,
                        (None, _) => InertialRegime::BoundedEta,
                    };
                    FbVariant::Inertial { eta, regime }
                }
            };
            let mut fb = ForwardBackward::new(a, b, beta, need(s.gamma, "gamma", "forward_backward")?)
                .with_variant(variant);
            if let Some(e) = s.epsilon {
                fb = fb.with_epsilon(e);
            }
            if let Some(l) = constant_relaxation(cfg, "forward_backward")?.or(s.lambda) {
                fb = fb.with_lambda(l);
            }
            let mut layers = cfg.errors.layers(2)?;
            fb.b_errors = layers.pop().expect("two layers");
            fb.a_errors = layers.pop().expect("two layers");
            forward_backward(&fb, &control)?
        }
        Preset::PeacemanRachford => {
            let (a, b, _) = fb_parts(&problem, "peaceman_rachford")?;
            let VectorField::Affine { matrix, offset } = b.clone() else {
                return Err(CliError::Config("peaceman_rachford needs an affine B".into()));
            };
            let gamma = need(s.gamma, "gamma", "peaceman_rachford")?;
            if constant_relaxation(cfg, "peaceman_rachford")?.is_some_and(|l| l != 1.0) {
                return Err(CliError::Config("peaceman_rachford runs with lambda = 1".into()));
            }
            let mut pr = PeacemanRachford::new(a, MonotoneOperator::Affine { matrix, offset }, gamma);
            pr.weights = weights;
            let mut layers = cfg.errors.layers(2)?;
            pr.b_errors = layers.pop().expect("two layers");
            pr.a_errors = layers.pop().expect("two layers");
            // the governed sequence converges to z + γBz, where z solves the problem
            let z = problem.reference.clone();
            let shadow = z.axpy(gamma, &b.eval(&z));
            let control = control.clone().with_reference(shadow);
            solution = Some(z);
            peaceman_rachford(&pr, &control)?
        }
        Preset::Polyak => {
            let (f, theta, set) = problem.polyak_parts().ok_or_else(|| {
                CliError::Config(format!("problem '{}' has no subgradient form", problem.name))
            })?;
            if !matches!(cfg.errors, ErrorsSection::None) {
                return Err(CliError::Config("the polyak preset takes no error model".into()));
            }
            let mut params = Polyak::new(f, theta, set).with_weights(weights);
            if let Some(xi) = s.xi {
                params.xi = ScalarSequence::Constant(xi);
            }
            if let Some(l) = constant_relaxation(cfg, "polyak")?.or(s.lambda) {
                params.lambda = ScalarSequence::Constant(l);
            }
            if let Some(eta) = s.eta {
                params.eta = eta;
            }
            if let Some(e) = s.epsilon {
                params.epsilon = e;
            }
            polyak_subgradient(&params, &control)?
        }
        Preset::KrasnoselskiiMann => {
            let stack = problem.fixed_point_stack()?;
            let op = single_layer(&stack, &problem)?;
            let variant = match &cfg.weights {
                WeightsSection::Inertial { eta } => {
                    let cd = s.case_d.ok_or_else(|| {
                        CliError::Config("inertial krasnoselskii_mann needs solver.case_d".into())
                    })?;
                    KmVariant::Inertial {
                        eta: eta.schedule(),
                        lambda: ScalarSequence::Constant(
                            constant_relaxation(cfg, "krasnoselskii_mann")?
                                .or(s.lambda)
                                .ok_or_else(|| CliError::Config("solver.lambda is required".into()))?,
                        ),
                        params: CaseDParams { eta: cd.eta, sigma: cd.sigma, theta_tune: cd.theta },
                    }
                }
                _ => KmVariant::Mean(weights),
            };
            let mut errors = cfg.errors.layers(1)?;
            let km = KrasnoselskiiMann::new(op, variant).with_errors(errors.pop().expect("one layer"));
            krasnoselskii_mann(&km, &control)?
        }
    };
    Ok(Built { problem, preset, solution })
}

fn single_layer(
    stack: &LayerStack,
    problem: &ProblemSpec,
) -> Result<orbitfix_core::operators::AveragedOperator, CliError> {
    match stack.layers() {
        [op] => Ok(op.clone()),
        _ => Err(CliError::Config(format!(
            "problem '{}' is not a single-operator fixed-point problem",
            problem.name
        ))),
    }
}
