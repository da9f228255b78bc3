//! Averaged (quasi)nonexpansive operators, their catalog, and layer stacks
//! `T_1 ∘ ⋯ ∘ T_m` with the composite averaging constant `φ`.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::Matrix;
use crate::space::Point;
use crate::{Error, Result};

/// Pointwise map used for user-supplied operators and oracles.
pub type PointMap = Arc<dyn Fn(&Point) -> Point + Send + Sync>;
/// Real-valued function oracle.
pub type ScalarMap = Arc<dyn Fn(&Point) -> f64 + Send + Sync>;
/// Fixed-point membership predicate.
pub type FixOracle = Arc<dyn Fn(&Point) -> bool + Send + Sync>;

/// Nonexpansiveness class of an operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorClass {
    /// `‖Tx − Ty‖ ≤ ‖x − y‖` for all `x, y` (after un-averaging).
    Nonexpansive,
    /// `‖Tx − y‖ ≤ ‖x − y‖` for fixed points `y` only (after un-averaging).
    Quasinonexpansive,
}

/// Closed convex sets with closed-form projectors.
#[derive(Debug, Clone, PartialEq)]
pub enum ConvexSet {
    /// The whole space.
    Whole,
    /// `{x : lower ≤ x ≤ upper}` coordinatewise.
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Ball { center: Point, radius: f64 },
    /// `{x : ⟨normal, x⟩ ≤ offset}`.
    Halfspace { normal: Point, offset: f64 },
    NonnegOrthant,
    /// `{x : ⟨normal, x⟩ = offset}`.
    Hyperplane { normal: Point, offset: f64 },
}

impl ConvexSet {
    pub fn validate(&self) -> Result<()> {
        match self {
            ConvexSet::Whole | ConvexSet::NonnegOrthant => Ok(()),
            ConvexSet::Box { lower, upper } => {
                if lower.is_empty() || lower.len() != upper.len() {
                    return Err(Error::config("box bounds must have equal, nonzero length"));
                }
                if lower.iter().zip(upper).any(|(l, u)| !(l <= u)) {
                    return Err(Error::config("box needs lower <= upper in every coordinate"));
                }
                Ok(())
            }
            ConvexSet::Ball { radius, .. } => {
                if radius.is_finite() && *radius >= 0.0 {
                    Ok(())
                } else {
                    Err(Error::config(format!("ball radius {radius} must be >= 0")))
                }
            }
            ConvexSet::Halfspace { normal, offset } | ConvexSet::Hyperplane { normal, offset } => {
                if normal.norm_sq() == 0.0 {
                    Err(Error::config("halfspace/hyperplane normal must be nonzero"))
                } else if !offset.is_finite() {
                    Err(Error::NonFinite("set offset"))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// Dimension fixed by the set's data, if any.
    pub fn dim(&self) -> Option<usize> {
        match self {
            ConvexSet::Whole | ConvexSet::NonnegOrthant => None,
            ConvexSet::Box { lower, .. } => Some(lower.len()),
            ConvexSet::Ball { center, .. } => Some(center.dim()),
            ConvexSet::Halfspace { normal, .. } | ConvexSet::Hyperplane { normal, .. } => {
                Some(normal.dim())
            }
        }
    }

    pub fn is_bounded(&self) -> bool {
        matches!(self, ConvexSet::Box { .. } | ConvexSet::Ball { .. })
    }

    pub fn project(&self, x: &Point) -> Point {
        match self {
            ConvexSet::Whole => x.clone(),
            ConvexSet::Box { lower, upper } => Point::raw(
                x.as_slice()
                    .iter()
                    .zip(lower.iter().zip(upper))
                    .map(|(v, (l, u))| v.max(*l).min(*u))
                    .collect(),
            ),
            ConvexSet::Ball { center, radius } => {
                let d = x.dist(center);
                if d <= *radius {
                    x.clone()
                } else {
                    center.relax_toward(x, radius / d)
                }
            }
            ConvexSet::Halfspace { normal, offset } => {
                let excess = normal.dot(x) - offset;
                if excess <= 0.0 {
                    x.clone()
                } else {
                    x.axpy(-excess / normal.norm_sq(), normal)
                }
            }
            ConvexSet::NonnegOrthant => {
                Point::raw(x.as_slice().iter().map(|v| v.max(0.0)).collect())
            }
            ConvexSet::Hyperplane { normal, offset } => {
                let excess = normal.dot(x) - offset;
                x.axpy(-excess / normal.norm_sq(), normal)
            }
        }
    }

    pub fn contains(&self, x: &Point, tol: f64) -> bool {
        match self {
            ConvexSet::Whole => true,
            ConvexSet::Halfspace { normal, offset } => {
                normal.dot(x) - offset <= tol * libm::sqrt(normal.norm_sq())
            }
            ConvexSet::Hyperplane { normal, offset } => {
                (normal.dot(x) - offset).abs() <= tol * libm::sqrt(normal.norm_sq())
            }
            _ => self.project(x).dist(x) <= tol,
        }
    }
}

/// Maximally monotone operators whose resolvents have closed forms.
#[derive(Debug, Clone, PartialEq)]
pub enum MonotoneOperator {
    Zero,
    /// `∂(weight · ‖·‖₁)`.
    SubdiffL1 { weight: f64 },
    /// Normal cone `∂ι_C` of a closed convex set.
    NormalCone(ConvexSet),
    /// `x ↦ Mx + offset` with `M` monotone.
    Affine { matrix: Matrix, offset: Point },
}

impl MonotoneOperator {
    pub fn validate(&self) -> Result<()> {
        match self {
            MonotoneOperator::Zero => Ok(()),
            MonotoneOperator::SubdiffL1 { weight } => {
                if weight.is_finite() && *weight >= 0.0 {
                    Ok(())
                } else {
                    Err(Error::config(format!("l1 weight {weight} must be >= 0")))
                }
            }
            MonotoneOperator::NormalCone(set) => set.validate(),
            MonotoneOperator::Affine { matrix, offset } => {
                offset.check_dim(matrix.dim())?;
                if matrix.is_monotone() {
                    Ok(())
                } else {
                    Err(Error::config("affine operator matrix is not monotone"))
                }
            }
        }
    }

    /// `J_{γA} x = (Id + γA)^{-1} x`.
    pub fn resolvent(&self, gamma: f64, x: &Point) -> Point {
        match self {
            MonotoneOperator::Zero => x.clone(),
            MonotoneOperator::SubdiffL1 { weight } => soft_threshold(x, gamma * weight),
            MonotoneOperator::NormalCone(set) => set.project(x),
            MonotoneOperator::Affine { matrix, offset } => matrix
                .shifted_identity(gamma)
                .solve(&x.axpy(-gamma, offset))
                .expect("I + γM is invertible for monotone M"),
        }
    }

    /// A point of `A x`, when one is cheaply available and unique enough to
    /// be useful in identity checks.
    pub fn selection(&self, x: &Point) -> Option<Point> {
        match self {
            MonotoneOperator::Zero => Some(Point::zeros(x.dim())),
            MonotoneOperator::Affine { matrix, offset } => Some(&matrix.mul_vec(x) + offset),
            MonotoneOperator::SubdiffL1 { weight } => {
                if x.as_slice().iter().any(|v| *v == 0.0) {
                    None
                } else {
                    Some(Point::raw(
                        x.as_slice().iter().map(|v| weight * v.signum()).collect(),
                    ))
                }
            }
            MonotoneOperator::NormalCone(ConvexSet::Whole) => Some(Point::zeros(x.dim())),
            MonotoneOperator::NormalCone(_) => None,
        }
    }

    pub fn has_bounded_domain(&self) -> bool {
        matches!(self, MonotoneOperator::NormalCone(set) if set.is_bounded())
    }
}

/// Single-valued cocoercive fields used in explicit (forward) steps.
#[derive(Clone)]
pub enum VectorField {
    Zero,
    /// `x ↦ Mx + offset`.
    Affine { matrix: Matrix, offset: Point },
    Custom(PointMap),
}

impl VectorField {
    pub fn eval(&self, x: &Point) -> Point {
        match self {
            VectorField::Zero => Point::zeros(x.dim()),
            VectorField::Affine { matrix, offset } => &matrix.mul_vec(x) + offset,
            VectorField::Custom(f) => f(x),
        }
    }
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VectorField::Zero => f.write_str("Zero"),
            VectorField::Affine { matrix, offset } => f
                .debug_struct("Affine")
                .field("matrix", matrix)
                .field("offset", offset)
                .finish(),
            VectorField::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// Continuous convex functions with a subgradient selection.
#[derive(Clone)]
pub enum ConvexFunction {
    /// Euclidean norm; selection `x/‖x‖`, and `0` at the origin.
    Norm,
    /// `‖·‖₁`; selection `sign(x)` with `sign(0) = 0`.
    L1Norm,
    Custom { value: ScalarMap, subgradient: PointMap },
}

impl ConvexFunction {
    pub fn value(&self, x: &Point) -> f64 {
        match self {
            ConvexFunction::Norm => x.norm(),
            ConvexFunction::L1Norm => x.as_slice().iter().map(|v| v.abs()).sum(),
            ConvexFunction::Custom { value, .. } => value(x),
        }
    }

    pub fn subgradient(&self, x: &Point) -> Point {
        match self {
            ConvexFunction::Norm => {
                let n = x.norm();
                if n == 0.0 {
                    Point::zeros(x.dim())
                } else {
                    x.scale(1.0 / n)
                }
            }
            ConvexFunction::L1Norm => Point::raw(
                x.as_slice()
                    .iter()
                    .map(|v| if *v == 0.0 { 0.0 } else { v.signum() })
                    .collect(),
            ),
            ConvexFunction::Custom { subgradient, .. } => subgradient(x),
        }
    }
}

impl fmt::Debug for ConvexFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConvexFunction::Norm => f.write_str("Norm"),
            ConvexFunction::L1Norm => f.write_str("L1Norm"),
            ConvexFunction::Custom { .. } => f.write_str("Custom(..)"),
        }
    }
}

/// Catalog descriptor accepted by [`make_operator`].
#[derive(Debug, Clone)]
pub enum OperatorSpec {
    /// The identity, declared with the given averaging constant.
    Identity { alpha: f64 },
    /// `prox_{γ‖·‖₁}` (soft thresholding).
    ProxL1 { gamma: f64 },
    Projector(ConvexSet),
    /// `Id − γ∇g` with `∇g` `β`-cocoercive; requires `γ ∈ (0, 2β)`.
    GradientStep {
        gamma: f64,
        beta: f64,
        gradient: VectorField,
    },
    Resolvent {
        gamma: f64,
        operator: MonotoneOperator,
    },
    /// `2J_{γA} − Id`.
    Reflector {
        gamma: f64,
        operator: MonotoneOperator,
    },
    /// Subgradient projector onto `{f ≤ θ}`.
    SubgradientProjector {
        function: ConvexFunction,
        theta: f64,
    },
    /// `Id + ξ(G − Id)` for a firmly quasinonexpansive `G`, `ξ ∈ (0, 2)`.
    Relaxed { base: Box<OperatorSpec>, xi: f64 },
    /// `x ↦ Mx` with a user-asserted class and averaging constant.
    Linear {
        matrix: Matrix,
        class: OperatorClass,
        alpha: f64,
    },
}

#[derive(Clone)]
enum Kind {
    Identity,
    ProxL1 { gamma: f64 },
    Project(ConvexSet),
    GradientStep { gamma: f64, gradient: VectorField },
    Resolvent { gamma: f64, operator: MonotoneOperator },
    Reflector { gamma: f64, operator: MonotoneOperator },
    SubgradientProjector { function: ConvexFunction, theta: f64 },
    Relaxed { base: Box<AveragedOperator>, xi: f64 },
    Linear(Matrix),
    Custom(PointMap),
}

/// Side information collected while evaluating operators.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EvalFlags {
    /// Number of subgradient-projector evaluations with `f(x) > θ` but a
    /// zero subgradient. The input is returned unchanged in that case.
    pub degenerate_subgradient: usize,
}

/// An `α`-averaged (quasi)nonexpansive operator.
#[derive(Clone)]
pub struct AveragedOperator {
    kind: Kind,
    alpha: f64,
    class: OperatorClass,
    cocoercivity: Option<f64>,
    bounded_range: bool,
    fixed_points: Vec<Point>,
    fix_oracle: Option<FixOracle>,
    label: String,
}

impl fmt::Debug for AveragedOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AveragedOperator")
            .field("label", &self.label)
            .field("alpha", &self.alpha)
            .field("class", &self.class)
            .finish_non_exhaustive()
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(Error::config(format!(
            "averaging constant {alpha} must lie in (0, 1]"
        )))
    }
}

fn check_positive(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::config(format!("{name} = {value} must be > 0")))
    }
}

impl AveragedOperator {
    fn from_kind(kind: Kind, alpha: f64, class: OperatorClass, label: String) -> Self {
        AveragedOperator {
            kind,
            alpha,
            class,
            cocoercivity: None,
            bounded_range: false,
            fixed_points: Vec::new(),
            fix_oracle: None,
            label,
        }
    }

    pub fn identity(alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(Self::from_kind(
            Kind::Identity,
            alpha,
            OperatorClass::Nonexpansive,
            "identity".into(),
        ))
    }

    pub fn prox_l1(gamma: f64) -> Result<Self> {
        make_operator(&OperatorSpec::ProxL1 { gamma })
    }

    pub fn projector(set: ConvexSet) -> Result<Self> {
        make_operator(&OperatorSpec::Projector(set))
    }

    pub fn resolvent(gamma: f64, operator: MonotoneOperator) -> Result<Self> {
        make_operator(&OperatorSpec::Resolvent { gamma, operator })
    }

    pub fn reflector(gamma: f64, operator: MonotoneOperator) -> Result<Self> {
        make_operator(&OperatorSpec::Reflector { gamma, operator })
    }

    pub fn gradient_step(gamma: f64, beta: f64, gradient: VectorField) -> Result<Self> {
        make_operator(&OperatorSpec::GradientStep {
            gamma,
            beta,
            gradient,
        })
    }

    pub fn subgradient_projector(function: ConvexFunction, theta: f64) -> Result<Self> {
        make_operator(&OperatorSpec::SubgradientProjector { function, theta })
    }

    pub fn linear(matrix: Matrix, class: OperatorClass, alpha: f64) -> Result<Self> {
        make_operator(&OperatorSpec::Linear {
            matrix,
            class,
            alpha,
        })
    }

    /// `Id + ξ(G − Id)` for an already built firmly quasinonexpansive `G`
    /// (averaging constant 1/2). The result is `ξ/2`-averaged
    /// quasinonexpansive.
    pub fn relaxed(base: AveragedOperator, xi: f64) -> Result<Self> {
        if !(xi > 0.0 && xi < 2.0) {
            return Err(Error::config(format!("relaxation xi = {xi} must lie in (0, 2)")));
        }
        if base.alpha != 0.5 {
            return Err(Error::config(format!(
                "relaxed(G, xi) needs a firmly quasinonexpansive G (alpha = 1/2), got alpha = {}",
                base.alpha
            )));
        }
        let label = format!("relaxed({}, {xi})", base.label);
        Ok(Self::from_kind(
            Kind::Relaxed {
                base: Box::new(base),
                xi,
            },
            xi / 2.0,
            OperatorClass::Quasinonexpansive,
            label,
        ))
    }

    /// Wraps an arbitrary map with a user-asserted class and constant.
    pub fn custom(map: PointMap, class: OperatorClass, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(Self::from_kind(Kind::Custom(map), alpha, class, "custom".into()))
    }

    /// The same map viewed as plain (quasi)nonexpansive, i.e. `α = 1`.
    pub fn into_plain(mut self) -> Self {
        self.alpha = 1.0;
        self
    }

    pub fn with_fixed_points(mut self, points: Vec<Point>) -> Self {
        self.fixed_points = points;
        self
    }

    pub fn with_fix_oracle(mut self, oracle: FixOracle) -> Self {
        self.fix_oracle = Some(oracle);
        self
    }

    pub fn with_bounded_range(mut self, bounded: bool) -> Self {
        self.bounded_range = bounded;
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn class(&self) -> OperatorClass {
        self.class
    }

    /// Cocoercivity constant `β` of the field behind a gradient step.
    pub fn cocoercivity(&self) -> Option<f64> {
        self.cocoercivity
    }

    pub fn has_bounded_range(&self) -> bool {
        self.bounded_range
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn known_fixed_points(&self) -> &[Point] {
        &self.fixed_points
    }

    pub fn eval(&self, x: &Point) -> Point {
        self.apply(x, &mut EvalFlags::default())
    }

    pub fn apply(&self, x: &Point, flags: &mut EvalFlags) -> Point {
        match &self.kind {
            Kind::Identity => x.clone(),
            Kind::ProxL1 { gamma } => soft_threshold(x, *gamma),
            Kind::Project(set) => set.project(x),
            Kind::GradientStep { gamma, gradient } => x.axpy(-gamma, &gradient.eval(x)),
            Kind::Resolvent { gamma, operator } => operator.resolvent(*gamma, x),
            Kind::Reflector { gamma, operator } => {
                let j = operator.resolvent(*gamma, x);
                x.relax_toward(&j, 2.0)
            }
            Kind::SubgradientProjector { function, theta } => {
                let fx = function.value(x);
                if fx <= *theta {
                    return x.clone();
                }
                let s = function.subgradient(x);
                let s2 = s.norm_sq();
                if s2 == 0.0 {
                    flags.degenerate_subgradient += 1;
                    return x.clone();
                }
                x.axpy((theta - fx) / s2, &s)
            }
            Kind::Relaxed { base, xi } => {
                let g = base.apply(x, flags);
                x.relax_toward(&g, *xi)
            }
            Kind::Linear(m) => m.mul_vec(x),
            Kind::Custom(f) => f(x),
        }
    }

    /// Whether `x` is a fixed point, using the most specific oracle known:
    /// a user oracle, the set or sublevel membership of catalog entries, or
    /// the residual `‖Tx − x‖ ≤ tol (1 + ‖x‖)`.
    pub fn is_fixed(&self, x: &Point, tol: f64) -> bool {
        if let Some(oracle) = &self.fix_oracle {
            return oracle(x);
        }
        match &self.kind {
            Kind::Project(set) => set.contains(x, tol),
            Kind::SubgradientProjector { function, theta } => function.value(x) <= theta + tol,
            Kind::Relaxed { base, .. } => base.is_fixed(x, tol),
            _ => self.eval(x).dist(x) <= tol * (1.0 + x.norm()),
        }
    }

    /// Maps a candidate to a fixed point when the fixed-point set has a
    /// usable description.
    fn fixed_point_from(&self, candidate: &Point) -> Option<Point> {
        match &self.kind {
            Kind::Project(set) => Some(set.project(candidate)),
            Kind::Resolvent {
                operator: MonotoneOperator::NormalCone(set),
                ..
            } => Some(set.project(candidate)),
            Kind::Relaxed { base, .. } => base.fixed_point_from(candidate),
            Kind::Identity => Some(candidate.clone()),
            _ => {
                if let Some(oracle) = &self.fix_oracle {
                    oracle(candidate).then(|| candidate.clone())
                } else if let Kind::SubgradientProjector { function, theta } = &self.kind {
                    (function.value(candidate) <= *theta).then(|| candidate.clone())
                } else {
                    None
                }
            }
        }
    }
}

/// `prox_{t‖·‖₁}`.
pub fn soft_threshold(x: &Point, t: f64) -> Point {
    Point::raw(
        x.as_slice()
            .iter()
            .map(|v| {
                let m = v.abs() - t;
                if m > 0.0 {
                    v.signum() * m
                } else {
                    0.0
                }
            })
            .collect(),
    )
}

/// Builds a catalog operator with its averaging constant and class.
pub fn make_operator(spec: &OperatorSpec) -> Result<AveragedOperator> {
    use OperatorClass::*;
    let op = match spec {
        OperatorSpec::Identity { alpha } => AveragedOperator::identity(*alpha)?,
        OperatorSpec::ProxL1 { gamma } => {
            check_positive("gamma", *gamma)?;
            AveragedOperator::from_kind(
                Kind::ProxL1 { gamma: *gamma },
                0.5,
                Nonexpansive,
                format!("prox_l1({gamma})"),
            )
            .with_fixed_points(Vec::new())
        }
        OperatorSpec::Projector(set) => {
            set.validate()?;
            let bounded = set.is_bounded();
            AveragedOperator::from_kind(
                Kind::Project(set.clone()),
                0.5,
                Nonexpansive,
                "projector".into(),
            )
            .with_bounded_range(bounded)
        }
        OperatorSpec::GradientStep {
            gamma,
            beta,
            gradient,
        } => {
            check_positive("beta", *beta)?;
            check_positive("gamma", *gamma)?;
            if *gamma >= 2.0 * beta {
                return Err(Error::config(format!(
                    "gradient step gamma = {gamma} must lie in (0, 2*beta) = (0, {})",
                    2.0 * beta
                )));
            }
            let mut op = AveragedOperator::from_kind(
                Kind::GradientStep {
                    gamma: *gamma,
                    gradient: gradient.clone(),
                },
                gamma / (2.0 * beta),
                Nonexpansive,
                format!("gradient_step({gamma})"),
            );
            op.cocoercivity = Some(*beta);
            op
        }
        OperatorSpec::Resolvent { gamma, operator } => {
            check_positive("gamma", *gamma)?;
            operator.validate()?;
            let bounded = operator.has_bounded_domain();
            AveragedOperator::from_kind(
                Kind::Resolvent {
                    gamma: *gamma,
                    operator: operator.clone(),
                },
                0.5,
                Nonexpansive,
                format!("resolvent({gamma})"),
            )
            .with_bounded_range(bounded)
        }
        OperatorSpec::Reflector { gamma, operator } => {
            check_positive("gamma", *gamma)?;
            operator.validate()?;
            AveragedOperator::from_kind(
                Kind::Reflector {
                    gamma: *gamma,
                    operator: operator.clone(),
                },
                1.0,
                Nonexpansive,
                format!("reflector({gamma})"),
            )
        }
        OperatorSpec::SubgradientProjector { function, theta } => {
            if !theta.is_finite() {
                return Err(Error::NonFinite("subgradient projector level"));
            }
            AveragedOperator::from_kind(
                Kind::SubgradientProjector {
                    function: function.clone(),
                    theta: *theta,
                },
                0.5,
                Quasinonexpansive,
                format!("subgradient_projector({theta})"),
            )
        }
        OperatorSpec::Relaxed { base, xi } => AveragedOperator::relaxed(make_operator(base)?, *xi)?,
        OperatorSpec::Linear {
            matrix,
            class,
            alpha,
        } => {
            check_alpha(*alpha)?;
            AveragedOperator::from_kind(Kind::Linear(matrix.clone()), *alpha, *class, "linear".into())
        }
    };
    Ok(op)
}

/// Which alternative of the layered fixed-point problem a stack falls under.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemCase {
    /// Every layer is averaged nonexpansive.
    LastNonexpansive,
    /// `m > 1`, the last layer is averaged quasinonexpansive with `α_m < 1`.
    LastQuasinonexpansive,
    /// A single layer.
    SingleLayer,
}

impl ProblemCase {
    pub fn letter(self) -> char {
        match self {
            ProblemCase::LastNonexpansive => 'a',
            ProblemCase::LastQuasinonexpansive => 'b',
            ProblemCase::SingleLayer => 'c',
        }
    }
}

/// Averaging constant of `T_1 ∘ ⋯ ∘ T_m` from the layer constants:
/// `(1 + (Σ α_i/(1 − α_i))^{-1})^{-1}` when every `α_i < 1`, else 1.
pub fn composite_averaging_constant(alphas: &[f64]) -> f64 {
    if alphas.iter().any(|a| *a >= 1.0) {
        return 1.0;
    }
    let s: f64 = alphas.iter().map(|a| a / (1.0 - a)).sum();
    1.0 / (1.0 + 1.0 / s)
}

/// An ordered composition `T_1 ∘ ⋯ ∘ T_m`; index 0 is the outermost layer.
#[derive(Debug, Clone)]
pub struct LayerStack {
    layers: Vec<AveragedOperator>,
    phi: f64,
    case: ProblemCase,
}

/// Checks layer classes and derives `φ` and the problem case.
pub fn compose(layers: Vec<AveragedOperator>) -> Result<LayerStack> {
    let m = layers.len();
    if m == 0 {
        return Err(Error::config("a layer stack needs at least one operator"));
    }
    for (i, op) in layers.iter().enumerate() {
        check_alpha(op.alpha)?;
        if i + 1 < m && op.class == OperatorClass::Quasinonexpansive {
            return Err(Error::config(format!(
                "layer {} ({}) is quasinonexpansive; only the last layer may be",
                i + 1,
                op.label
            )));
        }
    }
    let last = &layers[m - 1];
    let case = if m == 1 {
        ProblemCase::SingleLayer
    } else if last.class == OperatorClass::Nonexpansive {
        ProblemCase::LastNonexpansive
    } else if last.alpha < 1.0 {
        ProblemCase::LastQuasinonexpansive
    } else {
        return Err(Error::config(
            "a quasinonexpansive last layer in a multi-layer stack needs alpha < 1",
        ));
    };
    let alphas: Vec<f64> = layers.iter().map(|op| op.alpha).collect();
    Ok(LayerStack {
        phi: composite_averaging_constant(&alphas),
        layers,
        case,
    })
}

impl LayerStack {
    pub fn single(op: AveragedOperator) -> Self {
        compose(alloc::vec![op]).expect("single layers always compose")
    }

    pub fn layers(&self) -> &[AveragedOperator] {
        &self.layers
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn case(&self) -> ProblemCase {
        self.case
    }

    /// Error-free composite `T_1(T_2(⋯ T_m x))`.
    pub fn eval(&self, x: &Point) -> Point {
        self.eval_flagged(x, &mut EvalFlags::default())
    }

    pub fn eval_flagged(&self, x: &Point, flags: &mut EvalFlags) -> Point {
        let mut y = x.clone();
        for op in self.layers.iter().rev() {
            y = op.apply(&y, flags);
        }
        y
    }

    /// `T_1(T_2(⋯ T_m x + e_m ⋯) + e_2) + e_1` together with `Σ‖e_i‖`.
    /// `errors[i]` is the error of layer `i + 1`.
    pub fn apply(
        &self,
        x: &Point,
        errors: Option<&[Point]>,
        flags: &mut EvalFlags,
    ) -> Result<(Point, f64)> {
        let Some(errors) = errors else {
            return Ok((self.eval_flagged(x, flags), 0.0));
        };
        if errors.len() != self.layers.len() {
            return Err(Error::config(format!(
                "expected {} layer errors, got {}",
                self.layers.len(),
                errors.len()
            )));
        }
        let mut y = x.clone();
        let mut bound = 0.0;
        for (op, e) in self.layers.iter().zip(errors).rev() {
            e.check_dim(x.dim())?;
            y = &op.apply(&y, flags) + e;
            bound += e.norm();
        }
        Ok((y, bound))
    }

    /// `T_{i+} x = T_{i+1} ∘ ⋯ ∘ T_m x` for `i = 1, …, m`; entry `i − 1`
    /// holds `T_{i+} x` and the last entry is `x` itself.
    pub fn tails(&self, x: &Point) -> Vec<Point> {
        let m = self.layers.len();
        let mut out = alloc::vec![x.clone(); m];
        for i in (0..m - 1).rev() {
            out[i] = self.layers[i + 1].eval(&out[i + 1]);
        }
        out
    }
}

/// Sampling parameters for [`averagedness_certificate`].
#[derive(Debug, Clone, Copy)]
pub struct SampleSpec {
    pub dim: usize,
    pub count: usize,
    pub seed: u64,
    /// Samples are drawn uniformly from `[-radius, radius]^dim`.
    pub radius: f64,
}

impl SampleSpec {
    pub fn new(dim: usize, count: usize, seed: u64) -> Self {
        SampleSpec {
            dim,
            count,
            seed,
            radius: 10.0,
        }
    }
}

/// Result of a sampled averagedness check.
#[derive(Debug, Clone, PartialEq)]
pub struct AveragednessReport {
    pub alpha: f64,
    pub class: OperatorClass,
    pub pairs_checked: usize,
    /// Largest `LHS − RHS` of the defining inequality (positive = violated).
    pub max_violation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

pub const AVERAGEDNESS_TOLERANCE: f64 = 1e-9;

fn sample_point(rng: &mut ChaCha8Rng, dim: usize, radius: f64) -> Point {
    Point::raw((0..dim).map(|_| rng.random_range(-radius..radius)).collect())
}

/// Samples the defining inequality of an `α`-averaged operator.
///
/// Nonexpansive class: `‖Tx − Ty‖² ≤ ‖x − y‖² − ((1 − α)/α)‖(Id − T)x − (Id − T)y‖²`
/// over random pairs. Quasinonexpansive class:
/// `2(1 − α)⟨y − Tx, x − Tx⟩ ≤ (2α − 1)(‖x − y‖² − ‖Tx − y‖²)` over random
/// `x` and fixed points `y`, taken from the operator's known fixed points or
/// generated through its fixed-point oracle.
pub fn averagedness_certificate(
    op: &AveragedOperator,
    sample: SampleSpec,
) -> Result<AveragednessReport> {
    if sample.dim == 0 || sample.count == 0 {
        return Err(Error::config("sampling needs dim >= 1 and count >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(sample.seed);
    let alpha = op.alpha;
    let mut max_violation = f64::NEG_INFINITY;
    let mut checked = 0;
    match op.class {
        OperatorClass::Nonexpansive => {
            let k = (1.0 - alpha) / alpha;
            for _ in 0..sample.count {
                let x = sample_point(&mut rng, sample.dim, sample.radius);
                let y = sample_point(&mut rng, sample.dim, sample.radius);
                let (tx, ty) = (op.eval(&x), op.eval(&y));
                let rx = &x - &tx;
                let ry = &y - &ty;
                let lhs = tx.dist_sq(&ty);
                let rhs = x.dist_sq(&y) - k * rx.dist_sq(&ry);
                max_violation = max_violation.max(lhs - rhs);
                checked += 1;
            }
        }
        OperatorClass::Quasinonexpansive => {
            let mut fixed: Vec<Point> = op.fixed_points.clone();
            if fixed.is_empty() {
                let mut attempts = 0;
                while fixed.len() < 32 && attempts < 100 * sample.count.max(32) {
                    let c = sample_point(&mut rng, sample.dim, sample.radius);
                    if let Some(p) = op.fixed_point_from(&c) {
                        fixed.push(p);
                    }
                    attempts += 1;
                }
            }
            if fixed.is_empty() {
                return Err(Error::config(format!(
                    "no fixed points available to certify quasinonexpansive operator {}",
                    op.label
                )));
            }
            for s in 0..sample.count {
                let x = sample_point(&mut rng, sample.dim, sample.radius);
                let y = &fixed[s % fixed.len()];
                let tx = op.eval(&x);
                let y_tx = y - &tx;
                let x_tx = &x - &tx;
                let lhs = 2.0 * (1.0 - alpha) * y_tx.dot(&x_tx);
                let rhs = (2.0 * alpha - 1.0) * (x.dist_sq(y) - tx.dist_sq(y));
                max_violation = max_violation.max(lhs - rhs);
                checked += 1;
            }
        }
    }
    Ok(AveragednessReport {
        alpha,
        class: op.class,
        pairs_checked: checked,
        max_violation,
        tolerance: AVERAGEDNESS_TOLERANCE,
        passed: max_violation <= AVERAGEDNESS_TOLERANCE,
    })
}
