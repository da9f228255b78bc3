//! Small test problems with known solutions, and a grid oracle for
//! low-dimensional cases.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::Matrix;
use crate::operators::{
    compose, soft_threshold, AveragedOperator, ConvexFunction, ConvexSet, LayerStack,
    MonotoneOperator, OperatorClass, VectorField,
};
use crate::space::Point;
use crate::{Error, Result};

/// Where a reference solution comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    ClosedForm,
    GridOracle,
    BisectionOracle,
}

#[derive(Debug, Clone)]
pub enum ProblemKind {
    /// `min ‖x‖₁ + ½‖x − a‖²`: `A = ∂‖·‖₁`, `B = Id − a` with `β = 1`.
    L1Quadratic { a: Point },
    /// Fixed points of a plane rotation (`{0}` unless the angle is a
    /// multiple of `2π`).
    Rotation { angle: f64 },
    /// A point of `ball ∩ halfspace`, started from `anchor`.
    Feasibility {
        ball: ConvexSet,
        halfspace: ConvexSet,
        anchor: Point,
    },
    /// `x ∈ {x₁ ≥ 1}` with `‖x‖ ≤ 1` in the plane; the sets are tangent.
    PolyakNormOverHalfspace,
}

/// Optional knobs for [`catalog`].
#[derive(Debug, Clone, Default)]
pub struct ProblemParams {
    pub a: Option<Vec<f64>>,
    pub angle: Option<f64>,
    pub anchor: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub dim: usize,
    pub kind: ProblemKind,
    /// A point of the solution set (for feasibility, one particular point).
    pub reference: Point,
    pub provenance: Provenance,
}

pub const CATALOG: [&str; 4] = [
    "l1_quadratic",
    "rotation_fixed_point",
    "feasibility",
    "polyak_norm_over_halfspace",
];

pub fn catalog(name: &str, params: &ProblemParams) -> Result<ProblemSpec> {
    let spec = match name {
        "l1_quadratic" => {
            let a = Point::from_slice(params.a.as_deref().unwrap_or(&[2.0]))?;
            ProblemSpec {
                name: name.into(),
                dim: a.dim(),
                reference: soft_threshold(&a, 1.0),
                kind: ProblemKind::L1Quadratic { a },
                provenance: Provenance::ClosedForm,
            }
        }
        "rotation_fixed_point" => {
            let angle = params.angle.unwrap_or(core::f64::consts::FRAC_PI_2);
            // the identity rotation fixes every point
            if !angle.is_finite() || libm::cos(angle) >= 1.0 - 1e-15 {
                return Err(Error::config(format!(
                    "angle = {angle} must not be a multiple of 2 pi"
                )));
            }
            ProblemSpec {
                name: name.into(),
                dim: 2,
                kind: ProblemKind::Rotation { angle },
                reference: Point::zeros(2),
                provenance: Provenance::ClosedForm,
            }
        }
        "feasibility" => {
            let anchor = Point::from_slice(params.anchor.as_deref().unwrap_or(&[3.0, -1.0]))?;
            anchor.check_dim(2)?;
            ProblemSpec {
                name: name.into(),
                dim: 2,
                kind: ProblemKind::Feasibility {
                    ball: ConvexSet::Ball {
                        center: Point::zeros(2),
                        radius: 2.0,
                    },
                    // x₁ + x₂ ≥ 2
                    halfspace: ConvexSet::Halfspace {
                        normal: Point::from_slice(&[-1.0, -1.0])?,
                        offset: -2.0,
                    },
                    anchor,
                },
                reference: Point::from_slice(&[1.2, 1.2])?,
                provenance: Provenance::ClosedForm,
            }
        }
        "polyak_norm_over_halfspace" => ProblemSpec {
            name: name.into(),
            dim: 2,
            kind: ProblemKind::PolyakNormOverHalfspace,
            reference: Point::from_slice(&[1.0, 0.0])?,
            provenance: Provenance::ClosedForm,
        },
        other => {
            return Err(Error::config(format!(
                "unknown problem '{other}' (known: {})",
                CATALOG.join(", ")
            )))
        }
    };
    Ok(spec)
}

impl ProblemSpec {
    /// `(A, B, β)` for forward-backward problems.
    pub fn fb_parts(&self) -> Option<(MonotoneOperator, VectorField, f64)> {
        match &self.kind {
            ProblemKind::L1Quadratic { a } => Some((
                MonotoneOperator::SubdiffL1 { weight: 1.0 },
                VectorField::Affine {
                    matrix: Matrix::identity(a.dim()),
                    offset: -a,
                },
                1.0,
            )),
            _ => None,
        }
    }

    /// `(f, θ, C)` for the subgradient method.
    pub fn polyak_parts(&self) -> Option<(ConvexFunction, f64, ConvexSet)> {
        match self.kind {
            ProblemKind::PolyakNormOverHalfspace => Some((
                ConvexFunction::Norm,
                1.0,
                ConvexSet::Halfspace {
                    normal: Point::from_slice(&[-1.0, 0.0]).ok()?,
                    offset: -1.0,
                },
            )),
            _ => None,
        }
    }

    /// A plain fixed-point stack whose fixed points solve the problem.
    pub fn fixed_point_stack(&self) -> Result<LayerStack> {
        match &self.kind {
            ProblemKind::Rotation { angle } => Ok(LayerStack::single(AveragedOperator::linear(
                Matrix::rotation(*angle),
                OperatorClass::Nonexpansive,
                1.0,
            )?)),
            ProblemKind::Feasibility { ball, halfspace, .. } => compose(vec![
                AveragedOperator::projector(ball.clone())?,
                AveragedOperator::projector(halfspace.clone())?,
            ]),
            ProblemKind::L1Quadratic { .. } => {
                let (a, b, beta) = self.fb_parts().expect("forward-backward problem");
                compose(vec![
                    AveragedOperator::resolvent(1.0, a)?,
                    AveragedOperator::gradient_step(1.0, beta, b)?,
                ])
            }
            ProblemKind::PolyakNormOverHalfspace => {
                let (f, theta, c) = self.polyak_parts().expect("polyak problem");
                compose(vec![
                    AveragedOperator::projector(c)?,
                    AveragedOperator::subgradient_projector(f, theta)?,
                ])
            }
        }
    }

    /// The suggested starting point.
    pub fn default_x0(&self) -> Point {
        match &self.kind {
            ProblemKind::L1Quadratic { a } => Point::zeros(a.dim()),
            ProblemKind::Rotation { .. } => Point::from_slice(&[1.0, 0.0]).expect("finite"),
            ProblemKind::Feasibility { anchor, .. } => anchor.clone(),
            ProblemKind::PolyakNormOverHalfspace => Point::from_slice(&[3.0, 2.0]).expect("finite"),
        }
    }

    /// Value minimized by the oracle; `None` outside the constraint set.
    fn oracle_objective(&self, x: &Point) -> Option<f64> {
        match &self.kind {
            ProblemKind::L1Quadratic { a } => {
                let l1: f64 = x.as_slice().iter().map(|v| v.abs()).sum();
                Some(l1 + 0.5 * x.dist_sq(a))
            }
            ProblemKind::Rotation { angle } => {
                Some(Matrix::rotation(*angle).mul_vec(x).dist(x))
            }
            ProblemKind::Feasibility {
                ball,
                halfspace,
                anchor,
            } => (ball.contains(x, 0.0) && halfspace.contains(x, 0.0)).then(|| x.dist(anchor)),
            ProblemKind::PolyakNormOverHalfspace => (x[0] >= 1.0).then(|| x.norm()),
        }
    }

    fn oracle_box(&self) -> (Vec<f64>, Vec<f64>) {
        match &self.kind {
            ProblemKind::L1Quadratic { a } => {
                let r = a.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs())) + 1.0;
                (vec![-r; a.dim()], vec![r; a.dim()])
            }
            ProblemKind::Rotation { .. } => (vec![-4.0; 2], vec![4.0; 2]),
            ProblemKind::Feasibility { .. } => (vec![-2.0; 2], vec![2.0; 2]),
            ProblemKind::PolyakNormOverHalfspace => (vec![-5.0; 2], vec![5.0; 2]),
        }
    }
}

const GRID_POINTS: usize = 21;

/// Coarse-to-fine grid search for a minimizer of the problem's objective,
/// refined until the cell width drops below `resolution`. Only `dim ≤ 3`.
pub fn brute_oracle(spec: &ProblemSpec, resolution: f64) -> Result<Point> {
    if spec.dim > 3 {
        return Err(Error::Unsupported(format!(
            "grid oracle needs dim <= 3, got {}",
            spec.dim
        )));
    }
    if !(resolution > 0.0) {
        return Err(Error::config(format!("resolution = {resolution} must be > 0")));
    }
    if let ProblemKind::Feasibility { anchor, .. } = &spec.kind {
        if spec.oracle_objective(anchor).is_some() {
            return Ok(anchor.clone());
        }
    }
    let (mut lo, mut hi) = spec.oracle_box();
    let dim = spec.dim;
    let mut best: Option<(f64, Vec<f64>)> = None;
    loop {
        let width: Vec<f64> = (0..dim)
            .map(|i| (hi[i] - lo[i]) / (GRID_POINTS - 1) as f64)
            .collect();
        let total = GRID_POINTS.pow(dim as u32);
        let mut round_best: Option<(f64, Vec<f64>)> = None;
        let mut coords = vec![0.0; dim];
        for idx in 0..total {
            let mut k = idx;
            for i in 0..dim {
                coords[i] = lo[i] + (k % GRID_POINTS) as f64 * width[i];
                k /= GRID_POINTS;
            }
            let x = Point::from_slice(&coords)?;
            if let Some(v) = spec.oracle_objective(&x) {
                if round_best.as_ref().map_or(true, |(b, _)| v < *b) {
                    round_best = Some((v, coords.clone()));
                }
            }
        }
        let Some((v, c)) = round_best else {
            return Err(Error::Unsupported("grid oracle found no feasible point".into()));
        };
        if best.as_ref().map_or(true, |(b, _)| v <= *b) {
            best = Some((v, c.clone()));
        }
        let max_width = width.iter().cloned().fold(0.0, f64::max);
        if max_width <= resolution {
            break;
        }
        for i in 0..dim {
            lo[i] = c[i] - 2.0 * width[i];
            hi[i] = c[i] + 2.0 * width[i];
        }
    }
    let (_, c) = best.expect("at least one round");
    Point::new(c)
}
