//! Triggering policies, hold registers, and the sampling-budget
//! arithmetic that turns stability certificates into per-node trigger
//! thresholds and dwell times.
//!
//! Policy kinds split in two groups. The generic group (periodic,
//! epsilon crossing, state dependent, mixed, relative state) compares
//! 1-norm deviations and serves as baseline policies. The node group
//! (relative actuator/sensor and the ideal diagnostic policy) compares
//! Euclidean deviations against relative thresholds derived from a
//! certificate, and carries a dwell time that excludes Zeno behavior.

mod certificate;

pub use certificate::{
    build_certificate, build_certificate_with, derive_certificate, CertificateOptions,
    IssCertificate, LyapunovPair,
};

use thiserror::Error;

use crate::num::{NumError, Vector};

#[derive(Debug, Error, PartialEq)]
pub enum TriggerError {
    #[error("constant {0} must be positive and finite")]
    NonPositiveConstant(&'static str),
    #[error("policy kind does not match the register or predicate")]
    PolicyMismatch,
    #[error("{0} is not Hurwitz")]
    NotHurwitz(&'static str),
    #[error("Lyapunov pair does not certify the declared decay rate")]
    LyapunovResidualTooLarge,
    #[error("{0} is not symmetric positive definite")]
    NotPositiveDefinite(&'static str),
    #[error("certificate chain degenerated to a non-positive constant")]
    CertificateDegenerate,
    #[error("kappa budget {total} exceeds sigma_prime {budget}")]
    BudgetExceeded { total: f64, budget: f64 },
    #[error(transparent)]
    Numeric(#[from] NumError),
}

/// When a node transmits. Scalar parameters must be positive and
/// finite; the exceptions are dwell times (zero allowed) and the ideal
/// policy's kappa (zero allowed for diagnostics).
#[derive(Clone, Debug, PartialEq)]
pub enum TriggerPolicy {
    /// Transmit every `delta` seconds, regardless of signals.
    Periodic { delta: f64 },
    /// Transmit when the 1-norm deviation from the held value exceeds
    /// a fixed threshold.
    EpsilonCrossing { epsilon: f64 },
    /// Deviation threshold grows with the current state magnitude.
    StateDependent { sigma: f64, epsilon: f64 },
    /// Epsilon crossing with an enforced minimum spacing.
    Mixed { epsilon: f64, delta_min: f64 },
    /// Purely relative deviation threshold.
    RelativeState { sigma: f64 },
    /// Actuator node: Euclidean deviation of the node control exceeds
    /// (kappa / l_gamma) times the magnitude of the unsampled control.
    NodeRelativeActuator { kappa: f64, l_gamma: f64, tau_min: f64 },
    /// Sensor node: deviation exceeds (kappa / (2 l_h)) times the
    /// current measurement magnitude.
    NodeRelativeSensor { kappa: f64, l_h: f64, tau_min: f64 },
    /// Diagnostic policy: deviation exceeds kappa times the true
    /// extended-state norm, which no implementable node can measure.
    IdealNode { kappa: f64, tau_min: f64 },
}

impl TriggerPolicy {
    pub fn validate(&self) -> Result<(), TriggerError> {
        let positive = |v: f64, name: &'static str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(TriggerError::NonPositiveConstant(name))
            }
        };
        let dwell = |v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(TriggerError::NonPositiveConstant("tau_min"))
            }
        };
        match *self {
            TriggerPolicy::Periodic { delta } => positive(delta, "delta"),
            TriggerPolicy::EpsilonCrossing { epsilon } => positive(epsilon, "epsilon"),
            TriggerPolicy::StateDependent { sigma, epsilon } => {
                positive(sigma, "sigma")?;
                positive(epsilon, "epsilon")
            }
            TriggerPolicy::Mixed { epsilon, delta_min } => {
                positive(epsilon, "epsilon")?;
                positive(delta_min, "delta_min")
            }
            TriggerPolicy::RelativeState { sigma } => positive(sigma, "sigma"),
            TriggerPolicy::NodeRelativeActuator { kappa, l_gamma, tau_min } => {
                positive(kappa, "kappa")?;
                positive(l_gamma, "l_gamma")?;
                dwell(tau_min)
            }
            TriggerPolicy::NodeRelativeSensor { kappa, l_h, tau_min } => {
                positive(kappa, "kappa")?;
                positive(l_h, "l_h")?;
                dwell(tau_min)
            }
            TriggerPolicy::IdealNode { kappa, tau_min } => {
                if kappa < 0.0 || !kappa.is_finite() {
                    return Err(TriggerError::NonPositiveConstant("kappa"));
                }
                dwell(tau_min)
            }
        }
    }

    /// Dwell time for policies that carry one, zero otherwise.
    pub fn tau_min(&self) -> f64 {
        match *self {
            TriggerPolicy::NodeRelativeActuator { tau_min, .. }
            | TriggerPolicy::NodeRelativeSensor { tau_min, .. }
            | TriggerPolicy::IdealNode { tau_min, .. } => tau_min,
            TriggerPolicy::Mixed { delta_min, .. } => delta_min,
            _ => 0.0,
        }
    }
}

/// Zero-order hold register of one node: the last transmitted value,
/// when it was transmitted, and the policy deciding the next time.
#[derive(Clone, Debug)]
pub struct NodeRegister {
    held_value: Vector,
    last_trigger_time: f64,
    anchor_time: f64,
    policy: TriggerPolicy,
    trigger_count: u64,
}

impl NodeRegister {
    /// Seeds the register with an initial transmission at `t0`, which
    /// counts: a fresh register has trigger_count 1.
    pub fn new(initial_value: Vector, t0: f64, policy: TriggerPolicy) -> Result<Self, TriggerError> {
        policy.validate()?;
        Ok(NodeRegister {
            held_value: initial_value,
            last_trigger_time: t0,
            anchor_time: t0,
            policy,
            trigger_count: 1,
        })
    }

    /// Commits a transmission: the node's fresh sample becomes the held
    /// value.
    pub fn accept(&mut self, t: f64, value: Vector) {
        assert!(t >= self.last_trigger_time, "trigger times must be non-decreasing");
        assert_eq!(value.dim(), self.held_value.dim(), "held value dimension is fixed");
        self.held_value = value;
        self.last_trigger_time = t;
        self.trigger_count += 1;
    }

    /// Replaces the value of the transmission that already happened at
    /// `t`: a state jump landing exactly on a transmission instant makes
    /// the right-continuous sample the one that is held.
    pub fn resample(&mut self, t: f64, value: Vector) {
        assert!(t == self.last_trigger_time, "resample only rewrites the latest transmission");
        assert_eq!(value.dim(), self.held_value.dim(), "held value dimension is fixed");
        self.held_value = value;
    }

    pub fn held(&self) -> &Vector {
        &self.held_value
    }

    pub fn last_trigger_time(&self) -> f64 {
        self.last_trigger_time
    }

    /// Seed time of the register; periodic schedules count from here.
    pub fn anchor_time(&self) -> f64 {
        self.anchor_time
    }

    pub fn trigger_count(&self) -> u64 {
        self.trigger_count
    }

    pub fn policy(&self) -> &TriggerPolicy {
        &self.policy
    }
}

/// Supremum of admissible sigma: the certificate chain tolerates any
/// sigma strictly inside (0, 1 / (L_a3_inv * L_b)).
pub fn sigma_bound(l_a3_inv: f64, l_b: f64) -> Result<f64, TriggerError> {
    if !(l_a3_inv > 0.0) || !l_a3_inv.is_finite() {
        return Err(TriggerError::NonPositiveConstant("L_a3_inv"));
    }
    if !(l_b > 0.0) || !l_b.is_finite() {
        return Err(TriggerError::NonPositiveConstant("L_b"));
    }
    Ok(1.0 / (l_a3_inv * l_b))
}

/// Converts a 1-norm budget into a Euclidean one: |E|_1 <= sqrt(dim) *
/// ||E||_2 and ||X||_2 <= |X|_1, so testing ||E|| < sigma' ||X|| with
/// sigma' = sigma / sqrt(dim_E) implies |E| < sigma |X|.
pub fn euclidean_margin(sigma: f64, dim_e: usize) -> f64 {
    assert!(sigma > 0.0 && sigma.is_finite(), "euclidean_margin: sigma must be positive");
    assert!(dim_e >= 1, "euclidean_margin: dimension must be positive");
    sigma / (dim_e as f64).sqrt()
}

/// Uniform split of the Euclidean budget across nodes. The last entry
/// absorbs rounding so the float sum equals sigma_prime exactly.
pub fn allocate_kappa(sigma_prime: f64, node_count: usize) -> Vec<f64> {
    assert!(node_count >= 1, "allocate_kappa: need at least one node");
    assert!(sigma_prime > 0.0 && sigma_prime.is_finite());
    let share = sigma_prime / node_count as f64;
    let mut kappa = vec![share; node_count];
    let partial: f64 = kappa[..node_count - 1].iter().sum();
    kappa[node_count - 1] = sigma_prime - partial;
    kappa
}

/// Guaranteed minimum spacing between transmissions of an actuator
/// node: ln(1 + kappa / l_gamma) / (l_g * (1 + sigma_prime)).
pub fn min_interevent_actuator(
    l_g: f64,
    sigma_prime: f64,
    kappa: f64,
    l_gamma: f64,
) -> Result<f64, TriggerError> {
    min_interevent(l_g, sigma_prime, kappa, l_gamma, "l_gamma")
}

/// Sensor variant of the spacing bound, with the node's output-map
/// Lipschitz constant in place of l_gamma.
pub fn min_interevent_sensor(
    l_g: f64,
    sigma_prime: f64,
    kappa: f64,
    l_h: f64,
) -> Result<f64, TriggerError> {
    min_interevent(l_g, sigma_prime, kappa, l_h, "l_h")
}

fn min_interevent(
    l_g: f64,
    sigma_prime: f64,
    kappa: f64,
    slope: f64,
    slope_name: &'static str,
) -> Result<f64, TriggerError> {
    if !(l_g > 0.0) || !l_g.is_finite() {
        return Err(TriggerError::NonPositiveConstant("L_G"));
    }
    if !(sigma_prime > 0.0) || !sigma_prime.is_finite() {
        return Err(TriggerError::NonPositiveConstant("sigma_prime"));
    }
    if !(slope > 0.0) || !slope.is_finite() {
        return Err(TriggerError::NonPositiveConstant(slope_name));
    }
    if kappa < 0.0 || !kappa.is_finite() {
        return Err(TriggerError::NonPositiveConstant("kappa"));
    }
    // kappa = 0 degenerates to a zero dwell time (ln 1 = 0); callers
    // surface it as a ZeroKappa warning rather than an error.
    Ok((1.0 + kappa / slope).ln() / (l_g * (1.0 + sigma_prime)))
}

/// Actuator-node predicate: past the dwell time and with the node's
/// Euclidean deviation above its relative threshold.
///
/// `reference_norm` is the threshold reference: the magnitude of the
/// unsampled node control for NodeRelativeActuator, the extended-state
/// norm ||(xhat, z)||_2 for IdealNode.
pub fn should_trigger_actuator(
    reg: &NodeRegister,
    t: f64,
    current: &Vector,
    reference_norm: f64,
) -> Result<bool, TriggerError> {
    let (factor, tau_min) = match *reg.policy() {
        TriggerPolicy::NodeRelativeActuator { kappa, l_gamma, tau_min } => {
            (kappa / l_gamma, tau_min)
        }
        TriggerPolicy::IdealNode { kappa, tau_min } => (kappa, tau_min),
        _ => return Err(TriggerError::PolicyMismatch),
    };
    if t < reg.last_trigger_time + tau_min {
        return Ok(false);
    }
    Ok((current - &reg.held_value).norm_two() > factor * reference_norm)
}

/// Sensor-node predicate; the relative factor is kappa / (2 l_h).
///
/// `reference_norm` is the current measurement magnitude ||y_j(t)||_2
/// for NodeRelativeSensor and the extended-state norm for IdealNode.
pub fn should_trigger_sensor(
    reg: &NodeRegister,
    t: f64,
    current: &Vector,
    reference_norm: f64,
) -> Result<bool, TriggerError> {
    let (factor, tau_min) = match *reg.policy() {
        TriggerPolicy::NodeRelativeSensor { kappa, l_h, tau_min } => (kappa / (2.0 * l_h), tau_min),
        TriggerPolicy::IdealNode { kappa, tau_min } => (kappa, tau_min),
        _ => return Err(TriggerError::PolicyMismatch),
    };
    if t < reg.last_trigger_time + tau_min {
        return Ok(false);
    }
    Ok((current - &reg.held_value).norm_two() > factor * reference_norm)
}

/// Baseline policies. Deviations use the 1-norm; `reference_magnitude`
/// is the 1-norm of the monitored state for the state-dependent and
/// relative policies (ignored by the others). Periodic fires on the
/// schedule anchor + count * delta, tolerant to grid rounding, so ties
/// at the exact schedule instant do fire.
pub fn should_trigger_generic(
    policy: &TriggerPolicy,
    reg: &NodeRegister,
    t: f64,
    current: &Vector,
    reference_magnitude: f64,
) -> Result<bool, TriggerError> {
    if policy != reg.policy() {
        return Err(TriggerError::PolicyMismatch);
    }
    match *policy {
        TriggerPolicy::Periodic { delta } => {
            let next = reg.anchor_time + reg.trigger_count as f64 * delta;
            Ok(t >= next - 1e-9 * t.abs().max(1.0))
        }
        TriggerPolicy::EpsilonCrossing { epsilon } => {
            Ok((current - &reg.held_value).norm_one() > epsilon)
        }
        TriggerPolicy::StateDependent { sigma, epsilon } => {
            Ok((current - &reg.held_value).norm_one() > sigma * reference_magnitude + epsilon)
        }
        TriggerPolicy::Mixed { epsilon, delta_min } => Ok(t
            >= reg.last_trigger_time + delta_min
            && (current - &reg.held_value).norm_one() > epsilon),
        TriggerPolicy::RelativeState { sigma } => {
            Ok((current - &reg.held_value).norm_one() > sigma * reference_magnitude)
        }
        _ => Err(TriggerError::PolicyMismatch),
    }
}
