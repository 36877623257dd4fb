//! Plant, observer, and controller definitions with sensor/actuator
//! node partitions.
//!
//! The plant class is Lipschitz-affine: dx/dt = A x + B u + phi(x, u)
//! with a declared Lipschitz bound rho on phi in x, uniform in u. The
//! observer is a Luenberger design that copies the plant model and adds
//! gain times output innovation; the controller is static state
//! feedback u = K xhat. Inputs and outputs are partitioned into nodes
//! that sample and transmit independently.

mod registry;

pub use registry::{builtin_model, builtin_model_names, ModelBundle};

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::num::{spectral_norm, LowDiscrepancy, Matrix, NumError, Vector};

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(&'static str),
    #[error("invalid node partition: {0}")]
    InvalidPartition(&'static str),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("declared Lipschitz bound {declared} violated: sampled slope {estimated}")]
    RhoViolated { estimated: f64, declared: f64 },
    #[error(transparent)]
    Numeric(#[from] NumError),
}

/// Disjoint, contiguous slices of a vector, one per node.
#[derive(Clone, Debug, PartialEq)]
pub struct NodePartition {
    spans: Vec<(usize, usize)>,
    total_dim: usize,
}

impl NodePartition {
    /// Spans are (offset, width) pairs; they must tile [0, total_dim)
    /// in order with no gaps and widths >= 1.
    pub fn new(spans: Vec<(usize, usize)>, total_dim: usize) -> Result<Self, ModelError> {
        if spans.is_empty() {
            return Err(ModelError::InvalidPartition("no nodes"));
        }
        let mut cursor = 0;
        for &(offset, width) in &spans {
            if width == 0 {
                return Err(ModelError::InvalidPartition("zero-width node"));
            }
            if offset != cursor {
                return Err(ModelError::InvalidPartition("spans must tile the vector in order"));
            }
            cursor = offset + width;
        }
        if cursor != total_dim {
            return Err(ModelError::InvalidPartition("spans do not cover the vector"));
        }
        Ok(NodePartition { spans, total_dim })
    }

    /// One node covering the whole vector.
    pub fn single(total_dim: usize) -> Self {
        Self::new(vec![(0, total_dim)], total_dim).expect("single span is always valid")
    }

    /// One node per component.
    pub fn scalar_nodes(total_dim: usize) -> Self {
        Self::new((0..total_dim).map(|i| (i, 1)).collect(), total_dim)
            .expect("scalar spans are always valid")
    }

    pub fn node_count(&self) -> usize {
        self.spans.len()
    }

    pub fn span(&self, node: usize) -> (usize, usize) {
        self.spans[node]
    }

    pub fn total_dim(&self) -> usize {
        self.total_dim
    }
}

/// State-dependent drift term phi(x, u) of the plant.
#[derive(Clone)]
pub enum Nonlinearity {
    Zero,
    /// Component `output` receives `gain * sin(x[input])`.
    SineChannel { input: usize, output: usize, gain: f64 },
    Custom(Arc<dyn Fn(&Vector, &Vector) -> Vector + Send + Sync>),
}

impl Nonlinearity {
    pub fn eval(&self, x: &Vector, u: &Vector) -> Vector {
        match self {
            Nonlinearity::Zero => Vector::zeros(x.dim()),
            Nonlinearity::SineChannel { input, output, gain } => {
                let mut out = Vector::zeros(x.dim());
                out[*output] = gain * x[*input].sin();
                out
            }
            Nonlinearity::Custom(f) => f(x, u),
        }
    }
}

impl fmt::Debug for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Nonlinearity::Zero => f.write_str("Zero"),
            Nonlinearity::SineChannel { input, output, gain } => f
                .debug_struct("SineChannel")
                .field("input", input)
                .field("output", output)
                .field("gain", gain)
                .finish(),
            Nonlinearity::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// dx/dt = A x + B u + phi(x, u), y = C x, with phi Lipschitz in x of
/// constant at most `rho`, uniformly in u.
#[derive(Clone, Debug)]
pub struct LipschitzAffinePlant {
    a: Matrix,
    b: Matrix,
    c: Matrix,
    phi: Nonlinearity,
    rho: f64,
    input_partition: NodePartition,
    output_partition: NodePartition,
}

impl LipschitzAffinePlant {
    pub fn new(
        a: Matrix,
        b: Matrix,
        c: Matrix,
        phi: Nonlinearity,
        rho: f64,
        input_partition: NodePartition,
        output_partition: NodePartition,
    ) -> Result<Self, ModelError> {
        if !a.is_square() {
            return Err(ModelError::DimensionMismatch("A must be square"));
        }
        let n = a.rows();
        if b.rows() != n {
            return Err(ModelError::DimensionMismatch("B row count must match A"));
        }
        if c.cols() != n {
            return Err(ModelError::DimensionMismatch("C column count must match A"));
        }
        if input_partition.total_dim() != b.cols() {
            return Err(ModelError::DimensionMismatch("input partition must cover B columns"));
        }
        if output_partition.total_dim() != c.rows() {
            return Err(ModelError::DimensionMismatch("output partition must cover C rows"));
        }
        if !rho.is_finite() || rho < 0.0 {
            return Err(ModelError::NonFinite("rho"));
        }
        Ok(LipschitzAffinePlant { a, b, c, phi, rho, input_partition, output_partition })
    }

    pub fn state_dim(&self) -> usize {
        self.a.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.c.rows()
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    pub fn c(&self) -> &Matrix {
        &self.c
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn phi(&self, x: &Vector, u: &Vector) -> Vector {
        self.phi.eval(x, u)
    }

    pub fn nonlinearity(&self) -> &Nonlinearity {
        &self.phi
    }

    pub fn output(&self, x: &Vector) -> Vector {
        self.c.mul_vec(x)
    }

    pub fn input_partition(&self) -> &NodePartition {
        &self.input_partition
    }

    pub fn output_partition(&self) -> &NodePartition {
        &self.output_partition
    }
}

/// Static state feedback u = K xhat, sliced per actuator node.
#[derive(Clone, Debug)]
pub struct LinearController {
    k: Matrix,
    partition: NodePartition,
    per_node_lipschitz: Vec<f64>,
}

impl LinearController {
    /// Per-node Lipschitz constants are the spectral norms of the row
    /// blocks of K, recomputed here so they can never drift from the gain.
    pub fn new(k: Matrix, partition: NodePartition) -> Result<Self, ModelError> {
        if partition.total_dim() != k.rows() {
            return Err(ModelError::DimensionMismatch("actuator partition must cover K rows"));
        }
        let mut per_node_lipschitz = Vec::with_capacity(partition.node_count());
        for node in 0..partition.node_count() {
            let (offset, width) = partition.span(node);
            per_node_lipschitz.push(spectral_norm(&k.row_block(offset, offset + width))?);
        }
        Ok(LinearController { k, partition, per_node_lipschitz })
    }

    pub fn gain(&self) -> &Matrix {
        &self.k
    }

    pub fn partition(&self) -> &NodePartition {
        &self.partition
    }

    pub fn node_count(&self) -> usize {
        self.partition.node_count()
    }

    /// L_gamma for one actuator node.
    pub fn node_lipschitz(&self, node: usize) -> f64 {
        self.per_node_lipschitz[node]
    }
}

/// Luenberger observer gain plus the output-map Lipschitz constants
/// used by the sensor trigger thresholds.
#[derive(Clone, Debug)]
pub struct LuenbergerObserver {
    lgain: Matrix,
    output_lipschitz: f64,
    per_node_output_lipschitz: Vec<f64>,
}

impl LuenbergerObserver {
    pub fn new(lgain: Matrix, plant: &LipschitzAffinePlant) -> Result<Self, ModelError> {
        if lgain.rows() != plant.state_dim() || lgain.cols() != plant.output_dim() {
            return Err(ModelError::DimensionMismatch("observer gain must be n x p"));
        }
        let c = plant.c();
        let output_lipschitz = spectral_norm(c)?;
        let partition = plant.output_partition();
        let mut per_node_output_lipschitz = Vec::with_capacity(partition.node_count());
        for node in 0..partition.node_count() {
            let (offset, width) = partition.span(node);
            per_node_output_lipschitz.push(spectral_norm(&c.row_block(offset, offset + width))?);
        }
        Ok(LuenbergerObserver { lgain, output_lipschitz, per_node_output_lipschitz })
    }

    pub fn gain(&self) -> &Matrix {
        &self.lgain
    }

    /// L_h: spectral norm of the full output map.
    pub fn output_lipschitz(&self) -> f64 {
        self.output_lipschitz
    }

    /// L_h for one sensor node's rows of the output map.
    pub fn node_output_lipschitz(&self, node: usize) -> f64 {
        self.per_node_output_lipschitz[node]
    }
}

/// dx/dt = A x + B u_held + phi(x, u_held).
pub fn plant_dynamics(
    plant: &LipschitzAffinePlant,
    x: &Vector,
    u_held: &Vector,
) -> Result<Vector, ModelError> {
    assert_eq!(x.dim(), plant.state_dim(), "plant_dynamics: state dimension");
    assert_eq!(u_held.dim(), plant.input_dim(), "plant_dynamics: input dimension");
    let dx = plant
        .a
        .mul_vec(x)
        .add_scaled(1.0, &plant.b.mul_vec(u_held))
        .add_scaled(1.0, &plant.phi.eval(x, u_held));
    if !dx.is_finite() {
        return Err(ModelError::NonFinite("plant dynamics"));
    }
    Ok(dx)
}

/// dxhat/dt = A xhat + B u_held + phi(xhat, u_held) + L (y_held - C xhat).
pub fn observer_dynamics(
    plant: &LipschitzAffinePlant,
    obs: &LuenbergerObserver,
    xhat: &Vector,
    u_held: &Vector,
    y_held: &Vector,
) -> Result<Vector, ModelError> {
    assert_eq!(y_held.dim(), plant.output_dim(), "observer_dynamics: output dimension");
    let innovation = y_held - &plant.c.mul_vec(xhat);
    let dxhat = plant_dynamics(plant, xhat, u_held)?
        .add_scaled(1.0, &obs.lgain.mul_vec(&innovation));
    if !dxhat.is_finite() {
        return Err(ModelError::NonFinite("observer dynamics"));
    }
    Ok(dxhat)
}

/// Full control K xhat.
pub fn controller_eval(ctrl: &LinearController, xhat: &Vector) -> Vector {
    ctrl.k.mul_vec(xhat)
}

/// Node i's slice of K xhat.
pub fn controller_eval_node(ctrl: &LinearController, node: usize, xhat: &Vector) -> Vector {
    let (offset, width) = ctrl.partition.span(node);
    ctrl.k.mul_vec(xhat).segment(offset, width)
}

/// Sampled lower bound on the Lipschitz constant of phi in x (at u = 0).
///
/// Pairs come from per-coordinate ladders of shrinking symmetric
/// offsets (catching slopes attained near the origin) plus consecutive
/// low-discrepancy points in the cube of the given radius. Errors with
/// RhoViolated when the sampled slope exceeds the declared bound.
pub fn phi_lipschitz_check(
    plant: &LipschitzAffinePlant,
    sample_count: usize,
    domain_radius: f64,
) -> Result<f64, ModelError> {
    assert!(sample_count >= 2, "phi_lipschitz_check: need at least 2 samples");
    assert!(domain_radius > 0.0, "phi_lipschitz_check: radius must be positive");
    let n = plant.state_dim();
    let u0 = Vector::zeros(plant.input_dim());
    let pair_budget = (sample_count / 2).max(1);
    let mut best = 0.0_f64;
    let mut rate = |p: &Vector, q: &Vector| {
        let gap = (p - q).norm_two();
        if gap > 1e-300 {
            let diff = (&plant.phi.eval(p, &u0) - &plant.phi.eval(q, &u0)).norm_two();
            best = best.max(diff / gap);
        }
    };

    let axis_budget = pair_budget.div_ceil(2);
    let mut used = 0;
    'ladder: for level in 0..LADDER_LEVELS {
        let s = domain_radius * 0.5_f64.powi(level);
        for j in 0..n {
            if used == axis_budget {
                break 'ladder;
            }
            let mut hi = Vector::zeros(n);
            hi[j] = s;
            let mut lo = Vector::zeros(n);
            lo[j] = -s;
            rate(&hi, &lo);
            used += 1;
        }
    }

    let mut seq = LowDiscrepancy::new(n);
    let point = |seq: &mut LowDiscrepancy| {
        Vector::from_raw(
            seq.next_point().iter().map(|v| domain_radius * (2.0 * v - 1.0)).collect(),
        )
    };
    let mut prev = point(&mut seq);
    while used < pair_budget {
        let cur = point(&mut seq);
        rate(&prev, &cur);
        prev = cur;
        used += 1;
    }

    if best > plant.rho * (1.0 + 1e-9) {
        return Err(ModelError::RhoViolated { estimated: best, declared: plant.rho });
    }
    Ok(best)
}

// Halving the ladder 60 times reaches offsets ~1e-18 * radius, well past
// the point where smooth slopes have converged, without denormal gaps.
const LADDER_LEVELS: i32 = 60;
