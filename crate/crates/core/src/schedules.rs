//! Weight arrays `μ_{n,j}`, inertia sequences `η_n`, the summability
//! weights `χ_n`, and relaxation policies.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::space::SparseRow;
use crate::{Error, Result};

/// A real sequence given by a constant or by explicit values (the last
/// value repeats past the end).
#[derive(Debug, Clone, PartialEq)]
pub enum ScalarSequence {
    Constant(f64),
    Values(Vec<f64>),
}

impl ScalarSequence {
    pub fn at(&self, n: usize) -> f64 {
        match self {
            ScalarSequence::Constant(v) => *v,
            ScalarSequence::Values(v) => *v.get(n).or(v.last()).unwrap_or(&f64::NAN),
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            ScalarSequence::Constant(_) => true,
            ScalarSequence::Values(v) => v.windows(2).all(|w| w[0] == w[1]),
        }
    }

    fn values_through(&self, n: usize) -> impl Iterator<Item = f64> + '_ {
        (0..=n).map(move |k| self.at(k))
    }
}

/// Inertia parameters `η_n` with `η_0 = 0`.
#[derive(Debug, Clone, PartialEq)]
pub enum EtaSchedule {
    Zero,
    /// `η_n = η` for `n ≥ 1`, with `η ∈ [0, 1)`.
    Constant(f64),
    /// `η_n = (n − 1)/(n + τ)` for `n ≥ 1`, with `τ ≥ 2`.
    NesterovLike { tau: f64 },
    /// Explicit values starting at `η_0 = 0`; nondecreasing and below 1.
    /// The last value repeats.
    Custom(Vec<f64>),
}

impl EtaSchedule {
    pub fn validate(&self) -> Result<()> {
        match self {
            EtaSchedule::Zero => Ok(()),
            EtaSchedule::Constant(eta) => {
                if (0.0..1.0).contains(eta) {
                    Ok(())
                } else {
                    Err(Error::InvalidSchedule(format!("constant eta = {eta} must lie in [0, 1)")))
                }
            }
            EtaSchedule::NesterovLike { tau } => {
                if tau.is_finite() && *tau >= 2.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidSchedule(format!("nesterov-like tau = {tau} must be >= 2")))
                }
            }
            EtaSchedule::Custom(v) => {
                if v.first() != Some(&0.0) {
                    return Err(Error::InvalidSchedule("custom eta must start with eta_0 = 0".into()));
                }
                if let Some(e) = v.iter().find(|e| !(0.0..1.0).contains(*e)) {
                    return Err(Error::InvalidSchedule(format!("custom eta value {e} outside [0, 1)")));
                }
                if v.windows(2).any(|w| w[1] < w[0]) {
                    return Err(Error::InvalidSchedule("custom eta must be nondecreasing".into()));
                }
                Ok(())
            }
        }
    }

    pub fn at(&self, n: usize) -> f64 {
        if n == 0 {
            return 0.0;
        }
        match self {
            EtaSchedule::Zero => 0.0,
            EtaSchedule::Constant(eta) => *eta,
            EtaSchedule::NesterovLike { tau } => (n as f64 - 1.0) / (n as f64 + tau),
            EtaSchedule::Custom(v) => *v.get(n).or(v.last()).unwrap_or(&0.0),
        }
    }

    /// `sup_n η_n` (1 for the Nesterov-like family, where it is not attained).
    pub fn sup(&self) -> f64 {
        match self {
            EtaSchedule::Zero => 0.0,
            EtaSchedule::Constant(eta) => *eta,
            EtaSchedule::NesterovLike { .. } => 1.0,
            EtaSchedule::Custom(v) => v.iter().cloned().fold(0.0, f64::max),
        }
    }

    /// Closed-form upper bound on `χ_n`: `(n + 7)/2` for the Nesterov-like
    /// family, `e/(1 − η)` when `sup η = η < 1`.
    pub fn analytic_chi_bound(&self, n: usize) -> Option<f64> {
        match self {
            EtaSchedule::NesterovLike { .. } => Some((n as f64 + 7.0) / 2.0),
            _ => {
                let s = self.sup();
                (s < 1.0).then(|| core::f64::consts::E / (1.0 - s))
            }
        }
    }
}

/// Families of weight arrays.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightFamily {
    /// `μ_{n,j} = δ_{n,j}`.
    Memoryless,
    /// Equal weights on the last `w` iterates; head rows average what exists.
    Window(usize),
    /// `μ_{n,j} = 1/(n + 1)`.
    Cesaro,
    /// `μ_{n,n} = 1 + η_n`, `μ_{n,n−1} = −η_n`.
    Inertial(EtaSchedule),
    /// User rows for `n < rows.len()`; the Kronecker row afterwards.
    Explicit(Vec<SparseRow>),
}

/// How condition (e) on the weight array is certified.
#[derive(Debug, Clone, PartialEq)]
pub enum ChiCertificate {
    /// Nonnegative mean-value arrays, with `χ_n ≡ 1`.
    ConstantOne,
    /// Inertial arrays; `χ_0` computed by truncation plus tail bound.
    Computed { chi_0: f64, sup_eta: f64 },
    Unavailable(String),
}

impl ChiCertificate {
    pub fn is_certified(&self) -> bool {
        !matches!(self, ChiCertificate::Unavailable(_))
    }

    pub fn describe(&self) -> String {
        match self {
            ChiCertificate::ConstantOne => "constant chi=1".into(),
            ChiCertificate::Computed { chi_0, sup_eta } => {
                format!("computed chi_0={chi_0:.6} (sup eta={sup_eta})")
            }
            ChiCertificate::Unavailable(why) => format!("unavailable: {why}"),
        }
    }
}

/// Generator of the rows `μ_{n,·}`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSchedule {
    family: WeightFamily,
}

impl WeightSchedule {
    pub fn new(family: WeightFamily) -> Result<Self> {
        match &family {
            WeightFamily::Window(0) => {
                return Err(Error::InvalidSchedule("window length must be >= 1".into()))
            }
            WeightFamily::Inertial(eta) => eta.validate()?,
            WeightFamily::Explicit(rows) => {
                for (n, row) in rows.iter().enumerate() {
                    if row.row_index() != n {
                        return Err(Error::InvalidSchedule(format!(
                            "explicit row at position {n} declares index {}",
                            row.row_index()
                        )));
                    }
                    row.validate()?;
                }
            }
            _ => {}
        }
        Ok(WeightSchedule { family })
    }

    pub fn memoryless() -> Self {
        WeightSchedule {
            family: WeightFamily::Memoryless,
        }
    }

    /// Panics when `w = 0`.
    pub fn window(w: usize) -> Self {
        Self::new(WeightFamily::Window(w)).expect("window length must be >= 1")
    }

    pub fn cesaro() -> Self {
        WeightSchedule {
            family: WeightFamily::Cesaro,
        }
    }

    pub fn inertial(eta: EtaSchedule) -> Result<Self> {
        Self::new(WeightFamily::Inertial(eta))
    }

    pub fn family(&self) -> &WeightFamily {
        &self.family
    }

    pub fn name(&self) -> String {
        match &self.family {
            WeightFamily::Memoryless => "memoryless".into(),
            WeightFamily::Window(w) => format!("window({w})"),
            WeightFamily::Cesaro => "cesaro".into(),
            WeightFamily::Inertial(_) => "inertial".into(),
            WeightFamily::Explicit(_) => "explicit".into(),
        }
    }

    pub fn eta(&self) -> Option<&EtaSchedule> {
        match &self.family {
            WeightFamily::Inertial(eta) => Some(eta),
            _ => None,
        }
    }

    /// The row `μ_{n,·}`, newest index first.
    pub fn row(&self, n: usize) -> SparseRow {
        match &self.family {
            WeightFamily::Memoryless => SparseRow::kronecker(n),
            WeightFamily::Window(w) => {
                let len = (*w).min(n + 1);
                if len == 1 {
                    return SparseRow::kronecker(n);
                }
                let weight = 1.0 / len as f64;
                SparseRow::unchecked(n, (0..len).map(|d| (n - d, weight)).collect())
            }
            WeightFamily::Cesaro => {
                if n == 0 {
                    return SparseRow::kronecker(0);
                }
                let weight = 1.0 / (n + 1) as f64;
                SparseRow::unchecked(n, (0..=n).rev().map(|j| (j, weight)).collect())
            }
            WeightFamily::Inertial(eta) => {
                let e = eta.at(n);
                if n == 0 || e == 0.0 {
                    SparseRow::kronecker(n)
                } else {
                    SparseRow::unchecked(n, vec![(n, 1.0 + e), (n - 1, -e)])
                }
            }
            WeightFamily::Explicit(rows) => rows
                .get(n)
                .cloned()
                .unwrap_or_else(|| SparseRow::kronecker(n)),
        }
    }

    /// Largest `n − j` with `μ_{n,j} ≠ 0`; `None` for unbounded support.
    pub fn support_bound(&self) -> Option<usize> {
        match &self.family {
            WeightFamily::Memoryless => Some(0),
            WeightFamily::Window(w) => Some(w - 1),
            WeightFamily::Cesaro => None,
            WeightFamily::Inertial(_) => Some(1),
            WeightFamily::Explicit(rows) => Some(
                rows.iter()
                    .map(|r| r.row_index() - r.min_index())
                    .max()
                    .unwrap_or(0),
            ),
        }
    }

    pub fn is_nonnegative(&self) -> bool {
        match &self.family {
            WeightFamily::Inertial(eta) => eta.sup() == 0.0,
            WeightFamily::Explicit(rows) => rows.iter().all(SparseRow::is_nonnegative),
            _ => true,
        }
    }

    pub fn chi_certificate(&self) -> ChiCertificate {
        match &self.family {
            WeightFamily::Memoryless | WeightFamily::Window(_) | WeightFamily::Cesaro => {
                ChiCertificate::ConstantOne
            }
            WeightFamily::Inertial(eta) => match chi_of_eta(eta, 0, DEFAULT_CHI_TRUNCATION) {
                Ok(entry) => ChiCertificate::Computed {
                    chi_0: entry.value,
                    sup_eta: eta.sup(),
                },
                Err(e) => ChiCertificate::Unavailable(format!("{e}")),
            },
            WeightFamily::Explicit(_) => ChiCertificate::Unavailable(
                "no analytic certificate for explicit rows".into(),
            ),
        }
    }

    /// `inf_n μ_{n+1,n} μ_{n+1,n+1}`, which must be positive for
    /// mean-value Krasnosel'skiĭ–Mann and Peaceman–Rachford iterations.
    pub fn mann_infimum(&self) -> f64 {
        match &self.family {
            WeightFamily::Memoryless | WeightFamily::Cesaro => 0.0,
            WeightFamily::Window(w) => {
                if *w >= 2 {
                    1.0 / (*w as f64 * *w as f64)
                } else {
                    0.0
                }
            }
            WeightFamily::Inertial(eta) => {
                if eta.sup() == 0.0 {
                    0.0
                } else {
                    -eta.sup() * (1.0 + eta.sup())
                }
            }
            // the Kronecker tail contributes 0
            WeightFamily::Explicit(_) => 0.0,
        }
    }

    pub fn mann_condition(&self) -> bool {
        self.mann_infimum() > 0.0
    }
}

/// Default number of summed terms in [`chi`].
pub const DEFAULT_CHI_TRUNCATION: usize = 200;

/// One entry of a `χ` table.
#[derive(Debug, Clone, PartialEq)]
pub struct ChiEntry {
    pub n: usize,
    /// `Σ_{k=n}^{n+K} exp(ζ_{k,n})`.
    pub truncated_sum: f64,
    /// Upper bound on the omitted terms `k > n + K`.
    pub tail_bound: f64,
    /// `truncated_sum + tail_bound`, an upper estimate of `χ_n`.
    pub value: f64,
    pub truncation: usize,
    pub analytic_bound: Option<f64>,
}

/// `χ_n = Σ_{k ≥ n} exp(ζ_{k,n})` with `ζ_{k,n} = Σ_{j=n+1}^{k} (η_j − 1)`,
/// summed through `k = n + K` plus a tail bound.
///
/// Mean-value families are evaluated with `η ≡ 0`. The tail is geometric
/// with ratio `e^{η̄−1}` when `η̄ = sup η < 1`. For the Nesterov-like family
/// (`η̄ = 1`) the tail uses `ζ_{k,M} ≤ −(1 + τ) ln((k + τ + 1)/(M + τ + 1))`,
/// which sums to at most `exp(ζ_{M,n}) (M + τ + 1)/τ` with `M = n + K`.
pub fn chi(schedule: &WeightSchedule, n: usize, truncation: usize) -> Result<ChiEntry> {
    match schedule.family() {
        WeightFamily::Inertial(eta) => chi_of_eta(eta, n, truncation),
        WeightFamily::Explicit(_) => Err(Error::CertificateUnavailable(
            "chi is defined for inertial and mean-value families only".into(),
        )),
        _ => chi_of_eta(&EtaSchedule::Zero, n, truncation),
    }
}

pub fn chi_of_eta(eta: &EtaSchedule, n: usize, truncation: usize) -> Result<ChiEntry> {
    if truncation == 0 {
        return Err(Error::config("chi truncation K must be >= 1"));
    }
    eta.validate()?;
    let mut zeta = 0.0;
    let mut sum = 1.0;
    for k in n + 1..=n + truncation {
        zeta += eta.at(k) - 1.0;
        sum += libm::exp(zeta);
    }
    let last = libm::exp(zeta);
    let sup = eta.sup();
    let tail = match eta {
        EtaSchedule::NesterovLike { tau } => last * ((n + truncation) as f64 + tau + 1.0) / tau,
        _ if sup < 1.0 => {
            let q = libm::exp(sup - 1.0);
            last * q / (1.0 - q)
        }
        _ => {
            return Err(Error::CertificateUnavailable(format!(
                "sup eta = {sup} >= 1 and no tail bound applies"
            )))
        }
    };
    Ok(ChiEntry {
        n,
        truncated_sum: sum,
        tail_bound: tail,
        value: sum + tail,
        truncation,
        analytic_bound: eta.analytic_chi_bound(n),
    })
}

/// `χ_0, …, χ_N`.
pub fn chi_table(schedule: &WeightSchedule, horizon: usize, truncation: usize) -> Result<Vec<ChiEntry>> {
    (0..=horizon).map(|n| chi(schedule, n, truncation)).collect()
}

/// Outcome of the column-decay check `μ_{n,j} → 0`.
#[derive(Debug, Clone, PartialEq)]
pub enum DecayStatus {
    /// Every column is eventually exactly zero.
    ExactZero,
    /// `max_{j ≤ N/2} |μ_{N,j}|` compared against the threshold.
    Empirical { max_weight: f64, passed: bool },
    /// Closed-form decay, with the observed maximum for reference.
    Analytic { max_weight: f64, note: String },
}

impl DecayStatus {
    pub fn passed(&self) -> bool {
        match self {
            DecayStatus::Empirical { passed, .. } => *passed,
            _ => true,
        }
    }
}

pub const DECAY_THRESHOLD: f64 = 1e-6;
pub const TOEPLITZ_INDEX: usize = 10_000;
pub const TOEPLITZ_TOLERANCE: f64 = 1e-3;

/// Report of [`validate_weights`].
#[derive(Debug, Clone, PartialEq)]
pub struct WeightReport {
    pub schedule: String,
    pub horizon: usize,
    /// `max_{n ≤ N} Σ_j |μ_{n,j}|`.
    pub max_abs_row_sum: f64,
    pub condition_a: bool,
    /// `max_{n ≤ N} |Σ_j μ_{n,j} − 1|`.
    pub max_row_sum_error: f64,
    pub decay: DecayStatus,
    pub chi: ChiCertificate,
    /// `|Σ_j μ_{n,j} ξ_j − 1|` at `n = 10⁴` for `ξ_j = 1 + 1/(j + 1)`.
    pub toeplitz_deviation: f64,
    pub notes: Vec<String>,
}

impl WeightReport {
    pub fn toeplitz_passed(&self) -> bool {
        self.toeplitz_deviation <= TOEPLITZ_TOLERANCE
    }

    pub fn passed(&self) -> bool {
        self.condition_a && self.decay.passed() && self.chi.is_certified() && self.toeplitz_passed()
    }
}

/// `|Σ_j μ_{n,j} ξ_j − 1|` for `ξ_j = 1 + 1/(j + 1)`, a sequence tending to 1.
pub fn toeplitz_deviation(schedule: &WeightSchedule, n: usize) -> f64 {
    let row = schedule.row(n);
    let s: f64 = row
        .entries()
        .iter()
        .map(|&(j, w)| w * (1.0 + 1.0 / (j as f64 + 1.0)))
        .sum();
    (s - 1.0).abs()
}

/// Checks conditions (a)–(c) on rows `0..=N`, reports the analytic
/// certificate for condition (e), and runs the Toeplitz test.
pub fn validate_weights(schedule: &WeightSchedule, horizon: usize) -> Result<WeightReport> {
    if horizon == 0 {
        return Err(Error::config("validation horizon must be >= 1"));
    }
    let mut max_abs = 0.0f64;
    let mut max_err = 0.0f64;
    for n in 0..=horizon {
        let row = schedule.row(n);
        row.validate()?;
        max_abs = max_abs.max(row.abs_sum());
        max_err = max_err.max((row.sum() - 1.0).abs());
    }
    let mut notes = Vec::new();
    let condition_a = match schedule.family() {
        WeightFamily::Inertial(_) => max_abs <= 3.0 + 1e-12,
        _ => max_abs.is_finite(),
    };
    let last = schedule.row(horizon);
    let max_weight = last
        .entries()
        .iter()
        .filter(|(j, _)| *j <= horizon / 2)
        .map(|(_, w)| w.abs())
        .fold(0.0, f64::max);
    let decay = match schedule.family() {
        WeightFamily::Memoryless | WeightFamily::Window(_) | WeightFamily::Inertial(_) => {
            notes.push("column decay is exact zero beyond the support; empirical check skipped".into());
            DecayStatus::ExactZero
        }
        WeightFamily::Cesaro => {
            notes.push("cesaro: unbounded support, incremental mean update required".into());
            DecayStatus::Analytic {
                max_weight,
                note: "mu_{n,j} = 1/(n+1) -> 0".into(),
            }
        }
        WeightFamily::Explicit(_) => DecayStatus::Empirical {
            max_weight,
            passed: max_weight < DECAY_THRESHOLD,
        },
    };
    let chi = schedule.chi_certificate();
    Ok(WeightReport {
        schedule: schedule.name(),
        horizon,
        max_abs_row_sum: max_abs,
        condition_a,
        max_row_sum_error: max_err,
        decay,
        chi,
        toeplitz_deviation: toeplitz_deviation(schedule, TOEPLITZ_INDEX),
        notes,
    })
}

/// Relaxation parameter policies. Every policy is also capped by `1/φ_n`.
#[derive(Debug, Clone, PartialEq)]
pub enum RelaxationPolicy {
    Constant(f64),
    /// Per-iteration values.
    Sequence(ScalarSequence),
    /// `λ_n ≤ (1 − ε)/φ_n`; defaults to the cap.
    FractionOfInversePhi { epsilon: f64, lambda: Option<f64> },
    /// `λ_n ≤ ε + (1 − ε)/φ_n`; defaults to the cap.
    Overrelaxed { epsilon: f64, lambda: Option<f64> },
    /// `λ_n ∈ [ε, 1 + (1 − ε)(1 − γ_n/(2β))]`; defaults to the upper end.
    FbBand {
        epsilon: f64,
        beta: f64,
        gamma: ScalarSequence,
        lambda: Option<f64>,
    },
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon < 1.0 {
        Ok(())
    } else {
        Err(Error::config(format!("epsilon = {epsilon} must lie in (0, 1)")))
    }
}

/// `λ_n` for the policy, checked against `1/φ_n` first and then against
/// the policy band.
pub fn relaxation_at(policy: &RelaxationPolicy, n: usize, phi: f64) -> Result<f64> {
    if !(phi > 0.0 && phi <= 1.0) {
        return Err(Error::config(format!("phi_n = {phi} must lie in (0, 1]")));
    }
    let inv = 1.0 / phi;
    let mut consistency = None;
    let (lambda, lower, upper, band) = match policy {
        RelaxationPolicy::Constant(l) => (*l, 0.0, inv, "1/phi_n"),
        RelaxationPolicy::Sequence(seq) => (seq.at(n), 0.0, inv, "1/phi_n"),
        RelaxationPolicy::FractionOfInversePhi { epsilon, lambda } => {
            check_epsilon(*epsilon)?;
            let cap = (1.0 - epsilon) * inv;
            (lambda.unwrap_or(cap), 0.0, cap, "(1-epsilon)/phi_n")
        }
        RelaxationPolicy::Overrelaxed { epsilon, lambda } => {
            check_epsilon(*epsilon)?;
            let cap = epsilon + (1.0 - epsilon) * inv;
            (lambda.unwrap_or(cap), 0.0, cap, "epsilon+(1-epsilon)/phi_n")
        }
        RelaxationPolicy::FbBand {
            epsilon,
            beta,
            gamma,
            lambda,
        } => {
            check_epsilon(*epsilon)?;
            let g = gamma.at(n);
            let cap = 1.0 + (1.0 - epsilon) * (1.0 - g / (2.0 * beta));
            consistency = Some(epsilon + (1.0 - epsilon) * inv);
            (
                lambda.unwrap_or(cap),
                *epsilon,
                cap,
                "[epsilon, 1+(1-epsilon)(1-gamma_n/(2 beta))]",
            )
        }
    };
    if !lambda.is_finite() || lambda <= 0.0 {
        return Err(Error::config(format!("lambda_{n} = {lambda} must be > 0")));
    }
    if lambda > inv * (1.0 + 1e-12) {
        return Err(Error::config(format!(
            "lambda_{n} = {lambda} exceeds the cap 1/phi_n = {inv}"
        )));
    }
    if lambda < lower || lambda > upper * (1.0 + 1e-12) {
        return Err(Error::config(format!(
            "lambda_{n} = {lambda} outside the band {band} = [{lower}, {upper}]"
        )));
    }
    if let Some(c) = consistency {
        if lambda > c + 1e-12 {
            return Err(Error::config(format!(
                "lambda_{n} = {lambda} exceeds epsilon+(1-epsilon)/phi_n = {c}"
            )));
        }
    }
    Ok(lambda)
}

/// Checks `relaxation_at` for every `n ≤ N` with `φ_n` from `phi`.
pub fn validate_relaxation(
    policy: &RelaxationPolicy,
    phi: impl Fn(usize) -> f64,
    horizon: usize,
) -> Result<Vec<f64>> {
    (0..=horizon).map(|n| relaxation_at(policy, n, phi(n))).collect()
}

impl ScalarSequence {
    /// Largest value among the first `n + 1` terms.
    pub fn max_through(&self, n: usize) -> f64 {
        self.values_through(n).fold(f64::NEG_INFINITY, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn row_examples() {
        assert_eq!(WeightSchedule::memoryless().row(3), SparseRow::kronecker(3));
        let inertial = WeightSchedule::inertial(EtaSchedule::Constant(0.5)).unwrap();
        let r = inertial.row(5);
        assert_eq!(r.weight(5), 1.5);
        assert_eq!(r.weight(4), -0.5);
        assert_eq!(r.entries().len(), 2);
        assert_eq!(inertial.row(0), SparseRow::kronecker(0));
        let w = WeightSchedule::window(2);
        assert_eq!(w.row(0), SparseRow::kronecker(0));
        assert_eq!(w.row(7).weight(7), 0.5);
        assert_eq!(w.row(7).weight(6), 0.5);
        let w3 = WeightSchedule::window(3);
        assert_eq!(w3.row(1).weight(0), 0.5);
        assert_eq!(w3.row(1).weight(1), 0.5);
    }

    #[test]
    fn nesterov_values() {
        let eta = EtaSchedule::NesterovLike { tau: 2.0 };
        assert_eq!(eta.at(0), 0.0);
        assert_eq!(eta.at(1), 0.0);
        assert_eq!(eta.at(2), 0.25);
        assert!(EtaSchedule::NesterovLike { tau: 1.0 }.validate().is_err());
        assert!(EtaSchedule::Constant(1.0).validate().is_err());
        assert!(EtaSchedule::Custom(vec![0.0, 0.5, 0.4]).validate().is_err());
        assert!(EtaSchedule::Custom(vec![0.1]).validate().is_err());
    }

    fn geometric(q: f64) -> f64 {
        1.0 / (1.0 - q)
    }

    #[test]
    fn chi_examples() {
        let zero = chi(&WeightSchedule::memoryless(), 17, DEFAULT_CHI_TRUNCATION).unwrap();
        assert!((zero.value - geometric(libm::exp(-1.0))).abs() < 1e-12);
        assert!((zero.value - 1.581977).abs() < 1e-6);

        let half = WeightSchedule::inertial(EtaSchedule::Constant(0.5)).unwrap();
        for n in [0, 1, 50] {
            let c = chi(&half, n, DEFAULT_CHI_TRUNCATION).unwrap();
            // η_n = 0.5 for every k > n, so the series is exactly geometric
            assert!((c.value - geometric(libm::exp(-0.5))).abs() < 1e-12);
            assert!((c.value - 2.541494).abs() < 1e-6);
            assert!(c.value <= c.analytic_bound.unwrap());
        }

        let nest = WeightSchedule::inertial(EtaSchedule::NesterovLike { tau: 2.0 }).unwrap();
        for c in chi_table(&nest, 100, DEFAULT_CHI_TRUNCATION).unwrap() {
            assert!(c.value >= 1.0);
            assert!(c.value <= (c.n as f64 + 7.0) / 2.0, "n={} chi={}", c.n, c.value);
        }
    }

    #[test]
    fn nesterov_chi_matches_long_direct_sum() {
        // brute-force oracle: sum far past the truncation and compare
        let eta = EtaSchedule::NesterovLike { tau: 2.0 };
        for n in [0usize, 10, 60] {
            let mut zeta = 0.0;
            let mut direct = 1.0;
            for k in n + 1..n + 2_000_000 {
                zeta += eta.at(k) - 1.0;
                direct += libm::exp(zeta);
            }
            let c = chi_of_eta(&eta, n, DEFAULT_CHI_TRUNCATION).unwrap();
            assert!(c.value >= direct - 1e-9, "tail bound must dominate");
            assert!(c.value - direct < 0.05 * direct);
        }
    }

    #[test]
    fn chi_for_near_one_constant() {
        let s = WeightSchedule::inertial(EtaSchedule::Constant(0.99)).unwrap();
        let c = chi(&s, 0, DEFAULT_CHI_TRUNCATION).unwrap();
        assert!((c.value - geometric(libm::exp(-0.01))).abs() < 1e-9);
        assert!(chi(&s, 0, 0).is_err());
    }

    #[test]
    fn validate_examples() {
        let r = validate_weights(&WeightSchedule::memoryless(), 100).unwrap();
        assert!(r.passed());
        assert_eq!(r.chi, ChiCertificate::ConstantOne);
        assert_eq!(r.chi.describe(), "constant chi=1");

        let s = WeightSchedule::inertial(EtaSchedule::Constant(0.99)).unwrap();
        let r = validate_weights(&s, 100).unwrap();
        assert!(r.condition_a && r.passed());
        match r.chi {
            ChiCertificate::Computed { chi_0, .. } => {
                assert!((chi_0 - geometric(libm::exp(-0.01))).abs() < 1e-9)
            }
            other => panic!("unexpected {other:?}"),
        }

        let bad = SparseRow::unchecked(0, vec![(0, 0.9)]);
        assert!(matches!(
            WeightSchedule::new(WeightFamily::Explicit(vec![bad])),
            Err(Error::InvalidSchedule(_))
        ));
    }

    #[test]
    fn explicit_rows_decay_empirically() {
        let rows = vec![
            SparseRow::kronecker(0),
            SparseRow::new(1, vec![(1, 0.5), (0, 0.5)]).unwrap(),
        ];
        let s = WeightSchedule::new(WeightFamily::Explicit(rows)).unwrap();
        let r = validate_weights(&s, 50).unwrap();
        assert!(r.decay.passed());
        assert!(!r.chi.is_certified());
        assert_eq!(s.support_bound(), Some(1));
    }

    #[test]
    fn toeplitz_for_every_family() {
        let families = [
            WeightSchedule::memoryless(),
            WeightSchedule::window(2),
            WeightSchedule::window(5),
            WeightSchedule::cesaro(),
            WeightSchedule::inertial(EtaSchedule::Constant(0.5)).unwrap(),
            WeightSchedule::inertial(EtaSchedule::NesterovLike { tau: 2.0 }).unwrap(),
        ];
        for s in &families {
            assert!(toeplitz_deviation(s, TOEPLITZ_INDEX) <= TOEPLITZ_TOLERANCE, "{}", s.name());
        }
        // Cesàro: deviation is H_{n+1}/(n+1)
        let h: f64 = (1..=10_001).map(|k| 1.0 / k as f64).sum();
        let dev = toeplitz_deviation(&WeightSchedule::cesaro(), TOEPLITZ_INDEX);
        assert!((dev - h / 10_001.0).abs() < 1e-12);
    }

    #[test]
    fn mann_condition() {
        assert!(WeightSchedule::window(2).mann_condition());
        assert_eq!(WeightSchedule::window(2).mann_infimum(), 0.25);
        assert!(!WeightSchedule::cesaro().mann_condition());
        assert!(!WeightSchedule::memoryless().mann_condition());
    }

    #[test]
    fn relaxation_examples() {
        let fb = RelaxationPolicy::FbBand {
            epsilon: 0.1,
            beta: 1.0,
            gamma: ScalarSequence::Constant(1.0),
            lambda: None,
        };
        let l = relaxation_at(&fb, 0, 2.0 / 3.0).unwrap();
        assert!((l - 1.45).abs() < 1e-15);
        assert!((0.1 + 0.9 * 1.5 - 1.45f64).abs() < 1e-15);

        let frac = RelaxationPolicy::FractionOfInversePhi {
            epsilon: 0.1,
            lambda: None,
        };
        assert!((relaxation_at(&frac, 0, 1.0).unwrap() - 0.9).abs() < 1e-15);
        assert_eq!(relaxation_at(&RelaxationPolicy::Constant(1.0), 0, 0.5).unwrap(), 1.0);

        let err = relaxation_at(&RelaxationPolicy::Constant(5.0), 0, 2.0 / 3.0).unwrap_err();
        assert!(format!("{err}").contains("1/phi_n"));
        assert!(relaxation_at(&RelaxationPolicy::Constant(0.0), 0, 1.0).is_err());
        let low = RelaxationPolicy::FbBand {
            epsilon: 0.1,
            beta: 1.0,
            gamma: ScalarSequence::Constant(1.0),
            lambda: Some(0.05),
        };
        assert!(relaxation_at(&low, 0, 2.0 / 3.0).is_err());
    }

    proptest! {
        #[test]
        fn rows_sum_to_one(n in 0usize..400, w in 1usize..8, eta in 0.0f64..0.999, tau in 2.0f64..10.0) {
            let families = [
                WeightSchedule::memoryless(),
                WeightSchedule::window(w),
                WeightSchedule::cesaro(),
                WeightSchedule::inertial(EtaSchedule::Constant(eta)).unwrap(),
                WeightSchedule::inertial(EtaSchedule::NesterovLike { tau }).unwrap(),
            ];
            for s in &families {
                let row = s.row(n);
                prop_assert!(row.validate().is_ok());
                if let Some(b) = s.support_bound() {
                    prop_assert!(n - row.min_index() <= b);
                }
            }
        }

        #[test]
        fn inertial_abs_sum(n in 1usize..1000, eta in 0.0f64..0.999) {
            let s = WeightSchedule::inertial(EtaSchedule::Constant(eta)).unwrap();
            let row = s.row(n);
            prop_assert!((row.abs_sum() - (1.0 + 2.0 * eta)).abs() < 1e-12);
            prop_assert!(row.abs_sum() <= 3.0);
        }

        #[test]
        fn constant_eta_chi_is_shift_invariant(eta in 0.0f64..0.95, n in 0usize..300) {
            let s = WeightSchedule::inertial(EtaSchedule::Constant(eta)).unwrap();
            let a = chi(&s, 1, DEFAULT_CHI_TRUNCATION).unwrap().value;
            let b = chi(&s, n + 1, DEFAULT_CHI_TRUNCATION).unwrap().value;
            prop_assert_eq!(a, b);
            prop_assert!(a <= core::f64::consts::E / (1.0 - eta));
        }

        #[test]
        fn nesterov_chi_below_bound(tau in 2.0f64..20.0, n in 0usize..150) {
            let c = chi_of_eta(&EtaSchedule::NesterovLike { tau }, n, DEFAULT_CHI_TRUNCATION).unwrap();
            prop_assert!(c.value <= (n as f64 + 7.0) / 2.0);
        }
    }
}
