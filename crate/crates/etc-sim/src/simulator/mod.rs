//! Hybrid closed-loop simulation: continuous flow of plant and observer
//! between events, per-node trigger detection and localization, hold
//! register updates, and disturbance jumps.
//!
//! The loop integrates the stacked state (x, xhat) with fixed-step RK4
//! on the grid t_k = k dt, splitting steps at disturbance timestamps.
//! Trigger predicates are evaluated once per committed segment end; a
//! false-to-true transition is localized by bisection on the segment's
//! own trajectory, never earlier than the node's dwell floor. Detection
//! is therefore at most one step late, which bounds the per-sample
//! deviation slack by the field magnitude times dt.
//!
//! Policy cadence caveat: one trigger per node per integration step is
//! the detection limit, so periodic policies need delta >= dt.

use thiserror::Error;

use crate::models::{controller_eval, controller_eval_node, LipschitzAffinePlant, ModelBundle};
use crate::num::{locate_event, rk4_step, Matrix, NumError, Vector};
use crate::triggering::{
    should_trigger_actuator, should_trigger_generic, should_trigger_sensor, IssCertificate,
    NodeRegister, TriggerError, TriggerPolicy,
};

pub const DEFAULT_MAX_EVENTS_PER_NODE: u64 = 1_000_000;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("state diverged to a non-finite value near t = {t}")]
    NonFinite { t: f64 },
    #[error("node {node} exceeded {max} transmissions at t = {t}; suspecting Zeno behavior")]
    ZenoSuspect { node: String, max: u64, t: f64 },
    #[error("invalid scenario: {0}")]
    InvalidScenario(&'static str),
    #[error(transparent)]
    Trigger(#[from] TriggerError),
}

/// Instantaneous additive jump on the plant state.
#[derive(Clone, Debug, PartialEq)]
pub struct DisturbanceEvent {
    pub time: f64,
    pub state_jump: Vector,
}

/// Everything one run needs: the model, per-node policies (actuator
/// nodes first, then sensor nodes), initial conditions, horizon, step,
/// event localization tolerance, and disturbances.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub model: ModelBundle,
    pub policies: Vec<TriggerPolicy>,
    pub x0: Vector,
    pub xhat0: Vector,
    pub t_end: f64,
    pub dt: f64,
    pub event_tol: f64,
    pub disturbances: Vec<DisturbanceEvent>,
    pub max_events_per_node: u64,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), SimError> {
        let n = self.model.plant.state_dim();
        let q = self.model.plant.input_partition().node_count();
        let r = self.model.plant.output_partition().node_count();
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(SimError::InvalidScenario("dt must be positive"));
        }
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return Err(SimError::InvalidScenario("t_end must be positive"));
        }
        if !(self.event_tol > 0.0) || !self.event_tol.is_finite() {
            return Err(SimError::InvalidScenario("event_tol must be positive"));
        }
        if self.x0.dim() != n || self.xhat0.dim() != n {
            return Err(SimError::InvalidScenario("initial state dimension mismatch"));
        }
        if self.policies.len() != q + r {
            return Err(SimError::InvalidScenario("one policy per node is required"));
        }
        for policy in &self.policies {
            policy.validate()?;
        }
        for d in &self.disturbances {
            if !(d.time > 0.0 && d.time < self.t_end) {
                return Err(SimError::InvalidScenario(
                    "disturbance times must lie strictly inside (0, t_end)",
                ));
            }
            if d.state_jump.dim() != n {
                return Err(SimError::InvalidScenario("disturbance jump dimension mismatch"));
            }
        }
        if self.max_events_per_node == 0 {
            return Err(SimError::InvalidScenario("max_events_per_node must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeKind {
    Actuator,
    Sensor,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId {
    pub kind: NodeKind,
    pub index: usize,
}

impl NodeId {
    pub fn label(&self) -> String {
        match self.kind {
            NodeKind::Actuator => format!("u{}", self.index + 1),
            NodeKind::Sensor => format!("y{}", self.index + 1),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub x: Vector,
    pub xhat: Vector,
    pub ubar: Vector,
    pub ybar: Vector,
    pub norm_x: f64,
    pub norm_z: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TriggerRecord {
    pub t: f64,
    pub node: NodeId,
    pub value: Vector,
    /// True when the event time was refined strictly inside an
    /// integration segment, adding a trajectory row of its own.
    pub localized: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NodeSummary {
    pub node: NodeId,
    pub count: u64,
    pub min_gap: Option<f64>,
    pub mean_gap: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulationResult {
    pub trajectory: Vec<TrajectoryPoint>,
    pub trigger_log: Vec<TriggerRecord>,
    pub summary: Vec<NodeSummary>,
    /// Integration step of the run; post-processing needs it for
    /// exclusion windows around events.
    pub dt: f64,
    /// Timestamps of applied disturbance jumps, ascending.
    pub disturbance_times: Vec<f64>,
}

/// One logged instant where the sampling error exceeded its certified
/// share of the extended-state norm.
#[derive(Clone, Debug, PartialEq)]
pub struct BudgetViolation {
    pub t: f64,
    pub error_norm: f64,
    pub bound: f64,
}

#[derive(Clone, Debug)]
pub struct ValidationReport {
    pub violations: Vec<BudgetViolation>,
    pub checked_samples: usize,
    pub slack: f64,
    pub result: SimulationResult,
}

struct SimContext<'a> {
    plant: &'a LipschitzAffinePlant,
    ctrl: &'a crate::models::LinearController,
    lgain: &'a Matrix,
    lc: Matrix,
    n: usize,
    q: usize,
}

impl<'a> SimContext<'a> {
    fn node_id(&self, idx: usize) -> NodeId {
        if idx < self.q {
            NodeId { kind: NodeKind::Actuator, index: idx }
        } else {
            NodeId { kind: NodeKind::Sensor, index: idx - self.q }
        }
    }

    /// The continuous signal a node samples: its slice of the unsampled
    /// control for actuators, its slice of the measurement for sensors.
    fn node_signal(&self, idx: usize, x: &Vector, xhat: &Vector) -> Vector {
        if idx < self.q {
            controller_eval_node(self.ctrl, idx, xhat)
        } else {
            let (offset, width) = self.plant.output_partition().span(idx - self.q);
            self.plant.output(x).segment(offset, width)
        }
    }

    /// Right-hand side of the stacked flow under fixed held values.
    fn field(&self, ubar: Vector, ybar: Vector) -> impl Fn(f64, &Vector) -> Vector + '_ {
        let b_u = self.plant.b().mul_vec(&ubar);
        let l_y = self.lgain.mul_vec(&ybar);
        let n = self.n;
        move |_t, s| {
            let x = s.segment(0, n);
            let xh = s.segment(n, n);
            let dx = self
                .plant
                .a()
                .mul_vec(&x)
                .add_scaled(1.0, &b_u)
                .add_scaled(1.0, &self.plant.phi(&x, &ubar));
            let dxh = self
                .plant
                .a()
                .mul_vec(&xh)
                .add_scaled(1.0, &b_u)
                .add_scaled(1.0, &self.plant.phi(&xh, &ubar))
                .add_scaled(1.0, &l_y)
                .add_scaled(-1.0, &self.lc.mul_vec(&xh));
            dx.concat(&dxh)
        }
    }

    /// ||(xhat, x - xhat)||_2, the reference of the ideal policy.
    fn extended_norm(&self, x: &Vector, xhat: &Vector) -> f64 {
        let z = x - xhat;
        xhat.norm_two().hypot(z.norm_two())
    }

    fn fires(&self, reg: &NodeRegister, idx: usize, t: f64, s: &Vector) -> Result<bool, SimError> {
        let x = s.segment(0, self.n);
        let xhat = s.segment(self.n, self.n);
        let sig = self.node_signal(idx, &x, &xhat);
        let fired = match reg.policy() {
            TriggerPolicy::NodeRelativeActuator { .. } => {
                should_trigger_actuator(reg, t, &sig, sig.norm_two())?
            }
            TriggerPolicy::NodeRelativeSensor { .. } => {
                should_trigger_sensor(reg, t, &sig, sig.norm_two())?
            }
            TriggerPolicy::IdealNode { .. } => {
                let reference = self.extended_norm(&x, &xhat);
                if idx < self.q {
                    should_trigger_actuator(reg, t, &sig, reference)?
                } else {
                    should_trigger_sensor(reg, t, &sig, reference)?
                }
            }
            generic => should_trigger_generic(generic, reg, t, &sig, sig.norm_one())?,
        };
        Ok(fired)
    }

    /// Signed deviation-minus-threshold for localization; positive iff
    /// the deviation part of the predicate holds (dwell handled by the
    /// caller). Not defined for Periodic (schedule-driven) or IdealNode
    /// (never localized).
    fn margin(&self, reg: &NodeRegister, idx: usize, s: &Vector) -> f64 {
        let x = s.segment(0, self.n);
        let xhat = s.segment(self.n, self.n);
        let sig = self.node_signal(idx, &x, &xhat);
        match *reg.policy() {
            TriggerPolicy::NodeRelativeActuator { kappa, l_gamma, .. } => {
                (&sig - reg.held()).norm_two() - kappa / l_gamma * sig.norm_two()
            }
            TriggerPolicy::NodeRelativeSensor { kappa, l_h, .. } => {
                (&sig - reg.held()).norm_two() - kappa / (2.0 * l_h) * sig.norm_two()
            }
            TriggerPolicy::EpsilonCrossing { epsilon } => {
                (&sig - reg.held()).norm_one() - epsilon
            }
            TriggerPolicy::StateDependent { sigma, epsilon } => {
                (&sig - reg.held()).norm_one() - sigma * sig.norm_one() - epsilon
            }
            TriggerPolicy::Mixed { epsilon, .. } => (&sig - reg.held()).norm_one() - epsilon,
            TriggerPolicy::RelativeState { sigma } => {
                (&sig - reg.held()).norm_one() - sigma * sig.norm_one()
            }
            TriggerPolicy::Periodic { .. } | TriggerPolicy::IdealNode { .. } => {
                unreachable!("schedule-driven and ideal policies are not localized by margin")
            }
        }
    }
}

fn push_row(
    trajectory: &mut Vec<TrajectoryPoint>,
    ctx: &SimContext<'_>,
    regs: &[NodeRegister],
    t: f64,
    s: &Vector,
) {
    let x = s.segment(0, ctx.n);
    let xhat = s.segment(ctx.n, ctx.n);
    let (ubar, ybar) = held_values(ctx, regs);
    let norm_x = x.norm_two();
    let norm_z = (&x - &xhat).norm_two();
    let point = TrajectoryPoint { t, x, xhat, ubar, ybar, norm_x, norm_z };
    if let Some(last) = trajectory.last_mut() {
        if last.t == t {
            *last = point;
            return;
        }
        assert!(t > last.t, "trajectory times must be strictly increasing");
    }
    trajectory.push(point);
}

/// Runs the closed loop. Every node transmits at t = 0 (registers are
/// seeded from the initial conditions), so all sampling errors start at
/// zero.
pub fn simulate(scenario: &Scenario) -> Result<SimulationResult, SimError> {
    scenario.validate()?;
    let plant = &scenario.model.plant;
    let ctrl = &scenario.model.controller;
    let obs = &scenario.model.observer;
    let n = plant.state_dim();
    let q = plant.input_partition().node_count();
    let r = plant.output_partition().node_count();
    let ctx = SimContext {
        plant,
        ctrl,
        lgain: obs.gain(),
        lc: obs.gain().matmul(plant.c()),
        n,
        q,
    };

    let mut s = scenario.x0.concat(&scenario.xhat0);
    let mut regs: Vec<NodeRegister> = Vec::with_capacity(q + r);
    let mut log: Vec<TriggerRecord> = Vec::new();
    for idx in 0..q + r {
        let sig = ctx.node_signal(idx, &scenario.x0, &scenario.xhat0);
        regs.push(NodeRegister::new(sig.clone(), 0.0, scenario.policies[idx].clone())?);
        log.push(TriggerRecord { t: 0.0, node: ctx.node_id(idx), value: sig, localized: false });
    }

    let mut trajectory: Vec<TrajectoryPoint> = Vec::new();
    push_row(&mut trajectory, &ctx, &regs, 0.0, &s);

    let mut disturbances = scenario.disturbances.clone();
    disturbances.sort_by(|a, b| a.time.partial_cmp(&b.time).unwrap());
    let mut d_idx = 0;

    let steps = ((scenario.t_end / scenario.dt) - 1e-9).ceil().max(1.0) as usize;
    let mut t_cursor = 0.0_f64;
    for k in 0..steps {
        let b = if k + 1 == steps {
            scenario.t_end
        } else {
            ((k + 1) as f64 * scenario.dt).min(scenario.t_end)
        };
        while d_idx < disturbances.len() && disturbances[d_idx].time <= b {
            let d_time = disturbances[d_idx].time;
            s = advance_segment(
                &ctx, &mut regs, &mut log, &mut trajectory, scenario, t_cursor, &s, d_time,
            )?;
            // apply every jump that shares this timestamp
            while d_idx < disturbances.len() && disturbances[d_idx].time == d_time {
                let mut data = Vec::with_capacity(2 * n);
                for i in 0..n {
                    data.push(s[i] + disturbances[d_idx].state_jump[i]);
                }
                data.extend_from_slice(&s.as_slice()[n..]);
                s = Vector::from_raw(data);
                d_idx += 1;
            }
            if !s.is_finite() {
                return Err(SimError::NonFinite { t: d_time });
            }
            push_row(&mut trajectory, &ctx, &regs, d_time, &s);
            // a jump moves signals instantly; nodes past their dwell
            // floor respond at the jump instant itself
            for idx in 0..regs.len() {
                if regs[idx].last_trigger_time() == d_time {
                    // this node already transmitted at the jump instant;
                    // the right-continuous (post-jump) sample is the one
                    // its hold carries forward
                    let x = s.segment(0, ctx.n);
                    let xhat = s.segment(ctx.n, ctx.n);
                    let value = ctx.node_signal(idx, &x, &xhat);
                    regs[idx].resample(d_time, value.clone());
                    let node = ctx.node_id(idx);
                    let record = log
                        .iter_mut()
                        .rev()
                        .find(|r| r.node == node && r.t == d_time)
                        .expect("a transmission at this instant was logged");
                    record.value = value;
                } else if ctx.fires(&regs[idx], idx, d_time, &s)? {
                    accept_trigger(
                        &ctx, &mut regs, &mut log, idx, d_time, &s, false, scenario,
                    )?;
                }
            }
            push_row(&mut trajectory, &ctx, &regs, d_time, &s);
            t_cursor = d_time;
        }
        s = advance_segment(&ctx, &mut regs, &mut log, &mut trajectory, scenario, t_cursor, &s, b)?;
        t_cursor = b;
    }

    let summary = summarize(&log, q + r, &ctx);
    let mut disturbance_times: Vec<f64> = disturbances.iter().map(|d| d.time).collect();
    disturbance_times.dedup();
    Ok(SimulationResult {
        trajectory,
        trigger_log: log,
        summary,
        dt: scenario.dt,
        disturbance_times,
    })
}

/// Integrates [a, b] under the held values current at entry, detects
/// trigger predicate transitions at b, localizes and commits them in
/// time order, and returns the state at b.
#[allow(clippy::too_many_arguments)]
fn advance_segment(
    ctx: &SimContext<'_>,
    regs: &mut Vec<NodeRegister>,
    log: &mut Vec<TriggerRecord>,
    trajectory: &mut Vec<TrajectoryPoint>,
    scenario: &Scenario,
    a: f64,
    s_a: &Vector,
    b: f64,
) -> Result<Vector, SimError> {
    if b <= a {
        return Ok(s_a.clone());
    }
    let (ubar, ybar) = held_values(ctx, regs);
    let field = ctx.field(ubar, ybar);
    let s_b = rk4_step(&field, a, s_a, b - a).map_err(map_numeric)?;
    if !s_b.is_finite() {
        return Err(SimError::NonFinite { t: b });
    }

    let mut candidates: Vec<(f64, usize)> = Vec::new();
    for idx in 0..regs.len() {
        if !ctx.fires(&regs[idx], idx, b, &s_b)? {
            continue;
        }
        let reg = &regs[idx];
        let t_star = match reg.policy() {
            // the diagnostic policy resets at the detection sample
            TriggerPolicy::IdealNode { .. } => b,
            TriggerPolicy::Periodic { delta } => {
                // the schedule is anchored at the register's seed time
                let next = reg.anchor_time() + (reg.trigger_count() as f64) * delta;
                next.clamp(a, b)
            }
            _ => {
                let earliest = (reg.last_trigger_time() + reg.policy().tau_min()).max(a);
                if earliest >= b {
                    b
                } else {
                    let state_at = |t: f64| -> Option<Vector> {
                        if t == a {
                            Some(s_a.clone())
                        } else if t == b {
                            Some(s_b.clone())
                        } else {
                            rk4_step(&field, a, s_a, t - a).ok()
                        }
                    };
                    let g = |t: f64| {
                        state_at(t).map(|s| ctx.margin(reg, idx, &s)).unwrap_or(f64::NAN)
                    };
                    if g(earliest) > 0.0 {
                        earliest
                    } else {
                        let tol = (scenario.event_tol / 64.0).max(1e-15);
                        locate_event(&g, earliest, b, tol).map_err(map_numeric)?
                    }
                }
            }
        };
        candidates.push((t_star, idx));
    }

    if candidates.is_empty() {
        push_row(trajectory, ctx, regs, b, &s_b);
        return Ok(s_b);
    }

    // actuator indices precede sensor indices, so (time, index) order
    // breaks time ties actuators-first
    candidates.sort_by(|x, y| x.partial_cmp(y).unwrap());

    let mut cursor = a;
    let mut state = s_a.clone();
    for (t_star, idx) in candidates {
        if t_star > cursor {
            let (ubar, ybar) = held_values(ctx, regs);
            let field = ctx.field(ubar, ybar);
            state = rk4_step(&field, cursor, &state, t_star - cursor).map_err(map_numeric)?;
            if !state.is_finite() {
                return Err(SimError::NonFinite { t: t_star });
            }
            cursor = t_star;
        }
        let localized = t_star > a && t_star < b;
        accept_trigger(ctx, regs, log, idx, t_star, &state, localized, scenario)?;
        push_row(trajectory, ctx, regs, t_star, &state);
    }
    if b > cursor {
        let (ubar, ybar) = held_values(ctx, regs);
        let field = ctx.field(ubar, ybar);
        state = rk4_step(&field, cursor, &state, b - cursor).map_err(map_numeric)?;
        if !state.is_finite() {
            return Err(SimError::NonFinite { t: b });
        }
    }
    push_row(trajectory, ctx, regs, b, &state);
    Ok(state)
}

#[allow(clippy::too_many_arguments)]
fn accept_trigger(
    ctx: &SimContext<'_>,
    regs: &mut [NodeRegister],
    log: &mut Vec<TriggerRecord>,
    idx: usize,
    t: f64,
    s: &Vector,
    localized: bool,
    scenario: &Scenario,
) -> Result<(), SimError> {
    let x = s.segment(0, ctx.n);
    let xhat = s.segment(ctx.n, ctx.n);
    let value = ctx.node_signal(idx, &x, &xhat);
    regs[idx].accept(t, value.clone());
    let node = ctx.node_id(idx);
    if regs[idx].trigger_count() > scenario.max_events_per_node {
        return Err(SimError::ZenoSuspect {
            node: node.label(),
            max: scenario.max_events_per_node,
            t,
        });
    }
    log.push(TriggerRecord { t, node, value, localized });
    Ok(())
}

fn held_values(ctx: &SimContext<'_>, regs: &[NodeRegister]) -> (Vector, Vector) {
    let mut ubar = Vec::new();
    let mut ybar = Vec::new();
    for (idx, reg) in regs.iter().enumerate() {
        if idx < ctx.q {
            ubar.extend_from_slice(reg.held().as_slice());
        } else {
            ybar.extend_from_slice(reg.held().as_slice());
        }
    }
    (Vector::from_raw(ubar), Vector::from_raw(ybar))
}

fn map_numeric(err: NumError) -> SimError {
    match err {
        NumError::NonFiniteDerivative { t } => SimError::NonFinite { t },
        other => SimError::Trigger(TriggerError::Numeric(other)),
    }
}

fn summarize(log: &[TriggerRecord], node_count: usize, ctx: &SimContext<'_>) -> Vec<NodeSummary> {
    let mut summaries = Vec::with_capacity(node_count);
    for idx in 0..node_count {
        let node = ctx.node_id(idx);
        let times: Vec<f64> = log.iter().filter(|r| r.node == node).map(|r| r.t).collect();
        let gaps: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
        let min_gap = gaps.iter().copied().fold(None, |acc: Option<f64>, g| {
            Some(acc.map_or(g, |m| m.min(g)))
        });
        let mean_gap = if gaps.is_empty() {
            None
        } else {
            Some(gaps.iter().sum::<f64>() / gaps.len() as f64)
        };
        summaries.push(NodeSummary { node, count: times.len() as u64, min_gap, mean_gap });
    }
    summaries
}

/// Same loop with every node on a periodic schedule of the given
/// period; the baseline the event policies are compared against.
pub fn simulate_periodic_baseline(scenario: &Scenario, delta: f64) -> Result<SimulationResult, SimError> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(SimError::InvalidScenario("delta must be positive"));
    }
    let mut periodic = scenario.clone();
    periodic.policies =
        vec![TriggerPolicy::Periodic { delta }; scenario.policies.len()];
    simulate(&periodic)
}

/// Runs the scenario under the certificate's ideal diagnostic policies
/// and audits every logged sample against the certified budget
/// ||E||_2 <= sigma_prime ||X||_2, with slack 2 L_G event_tol for
/// event-localization error.
pub fn run_ideal_validation(
    scenario: &Scenario,
    certificate: &IssCertificate,
) -> Result<ValidationReport, SimError> {
    certificate.validate()?;
    let mut ideal = scenario.clone();
    ideal.policies = certificate.ideal_policies();
    let result = simulate(&ideal)?;

    let plant = &scenario.model.plant;
    let ctrl = &scenario.model.controller;
    let slack = 2.0 * certificate.l_g * scenario.event_tol;
    let mut violations = Vec::new();
    for point in &result.trajectory {
        let e_u = &controller_eval(ctrl, &point.xhat) - &point.ubar;
        let e_y = &plant.output(&point.x) - &point.ybar;
        let error_norm = e_u.norm_two().hypot(e_y.norm_two());
        let z = &point.x - &point.xhat;
        let extended = point.xhat.norm_two().hypot(z.norm_two());
        let bound = certificate.sigma_prime * extended + slack;
        if error_norm > bound {
            violations.push(BudgetViolation { t: point.t, error_norm, bound });
        }
    }
    let checked_samples = result.trajectory.len();
    Ok(ValidationReport { violations, checked_samples, slack, result })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{builtin_model, LinearController, NodePartition};
    use crate::triggering::{build_certificate, LyapunovPair};

    fn v(data: &[f64]) -> Vector {
        Vector::new(data.to_vec()).unwrap()
    }

    /// Benchmark with the practical relative thresholds: deviation
    /// beyond 20% of the signal magnitude, dwell 0.01 s.
    fn practical_policies(m: &ModelBundle, factor: f64, dwell: f64) -> Vec<TriggerPolicy> {
        let mut policies = Vec::new();
        for i in 0..m.controller.node_count() {
            let l_gamma = m.controller.node_lipschitz(i);
            policies.push(TriggerPolicy::NodeRelativeActuator {
                kappa: factor * l_gamma,
                l_gamma,
                tau_min: dwell,
            });
        }
        for _ in 0..m.plant.output_partition().node_count() {
            let l_h = m.observer.output_lipschitz();
            policies.push(TriggerPolicy::NodeRelativeSensor {
                kappa: factor * 2.0 * l_h,
                l_h,
                tau_min: dwell,
            });
        }
        policies
    }

    fn benchmark_scenario(t_end: f64) -> Scenario {
        let model = builtin_model("flexible-link").unwrap();
        let policies = practical_policies(&model, 0.2, 0.01);
        Scenario {
            model,
            policies,
            x0: v(&[1.0, 1.0, 1.0, 1.0]),
            xhat0: Vector::zeros(4),
            t_end,
            dt: 1e-3,
            event_tol: 1e-6,
            disturbances: vec![DisturbanceEvent { time: 2.0, state_jump: v(&[1.0, 1.0, 1.0, 1.0]) }],
            max_events_per_node: DEFAULT_MAX_EVENTS_PER_NODE,
        }
    }

    fn scalar_scenario(policies: Vec<TriggerPolicy>, x0: f64, t_end: f64) -> Scenario {
        let model = builtin_model("scalar-linear").unwrap();
        Scenario {
            model,
            policies,
            x0: v(&[x0]),
            xhat0: v(&[x0]),
            t_end,
            dt: 1e-3,
            event_tol: 1e-6,
            disturbances: vec![],
            max_events_per_node: DEFAULT_MAX_EVENTS_PER_NODE,
        }
    }

    #[test]
    fn equilibrium_stays_at_rest_and_silent() {
        let mut scenario = benchmark_scenario(1.0);
        scenario.x0 = Vector::zeros(4);
        scenario.disturbances.clear();
        let result = simulate(&scenario).unwrap();
        for point in &result.trajectory {
            assert_eq!(point.norm_x, 0.0);
            assert_eq!(point.norm_z, 0.0);
        }
        assert_eq!(result.trigger_log.len(), 3);
        assert!(result.trigger_log.iter().all(|r| r.t == 0.0));
        for s in &result.summary {
            assert_eq!(s.count, 1);
            assert_eq!(s.min_gap, None);
        }
    }

    #[test]
    fn uncontrolled_scalar_matches_exponential_decay() {
        // K = 0 decouples the input; x(t) = e^{-t} exactly.
        let model = builtin_model("scalar-linear").unwrap();
        let zero_gain =
            LinearController::new(Matrix::zeros(1, 1), NodePartition::single(1)).unwrap();
        let model = ModelBundle { controller: zero_gain, ..model };
        let scenario = Scenario {
            model,
            policies: vec![
                TriggerPolicy::Periodic { delta: 0.05 },
                TriggerPolicy::Periodic { delta: 0.05 },
            ],
            x0: v(&[1.0]),
            xhat0: v(&[0.0]),
            t_end: 1.0,
            dt: 1e-3,
            event_tol: 1e-6,
            disturbances: vec![],
            max_events_per_node: DEFAULT_MAX_EVENTS_PER_NODE,
        };
        let result = simulate(&scenario).unwrap();
        let last = result.trajectory.last().unwrap();
        assert_eq!(last.t, 1.0);
        assert!((last.x[0] - (-1.0_f64).exp()).abs() < 1e-6);
    }

    #[test]
    fn periodic_baseline_counts_are_exact() {
        let policies = vec![TriggerPolicy::Periodic { delta: 0.5 }; 2];
        let scenario = scalar_scenario(policies, 1.0, 1.0);
        let result = simulate_periodic_baseline(&scenario, 0.5).unwrap();
        // transmissions at t = 0, 0.5, 1.0
        for s in &result.summary {
            assert_eq!(s.count, 3, "node {:?}", s.node);
            assert!((s.min_gap.unwrap() - 0.5).abs() < 1e-9);
        }
        // time-driven: an equilibrium start changes nothing
        let rest = scalar_scenario(vec![TriggerPolicy::Periodic { delta: 0.5 }; 2], 0.0, 1.0);
        let result = simulate(&rest).unwrap();
        for s in &result.summary {
            assert_eq!(s.count, 3);
        }
    }

    #[test]
    fn epsilon_crossing_is_localized_to_the_analytic_instant() {
        // zero gain: x(t) = e^{-t} from 1; |x(t) - 1| crosses 0.3 at -ln(0.7)
        let model = builtin_model("scalar-linear").unwrap();
        let zero_gain =
            LinearController::new(Matrix::zeros(1, 1), NodePartition::single(1)).unwrap();
        let model = ModelBundle { controller: zero_gain, ..model };
        let policies = vec![
            TriggerPolicy::EpsilonCrossing { epsilon: 10.0 },
            TriggerPolicy::EpsilonCrossing { epsilon: 0.3 },
        ];
        let mut scenario = scalar_scenario(policies, 1.0, 1.0);
        scenario.model = model;
        scenario.dt = 0.05;
        let result = simulate(&scenario).unwrap();
        let crossing = result
            .trigger_log
            .iter()
            .find(|r| r.node.kind == NodeKind::Sensor && r.t > 0.0)
            .expect("sensor must fire");
        let want = -(0.7_f64.ln());
        assert!(
            (crossing.t - want).abs() < 1e-6,
            "localized at {}, want {want}",
            crossing.t
        );
        assert!(crossing.localized);
        // the refined instant gets its own trajectory row
        assert!(result.trajectory.iter().any(|p| p.t == crossing.t));
    }

    #[test]
    fn zoh_values_are_bitwise_constant_between_triggers() {
        let result = simulate(&benchmark_scenario(3.0)).unwrap();
        let actuator_times: Vec<f64> = result
            .trigger_log
            .iter()
            .filter(|r| r.node.kind == NodeKind::Actuator)
            .map(|r| r.t)
            .collect();
        assert!(actuator_times.len() > 2, "expected actuator activity");
        let mut current = 0;
        let mut held = result.trajectory[0].ubar[0];
        for point in &result.trajectory {
            if current + 1 < actuator_times.len() && point.t >= actuator_times[current + 1] {
                current += 1;
                held = point.ubar[0];
            }
            assert_eq!(point.ubar[0].to_bits(), held.to_bits(), "drift at t = {}", point.t);
        }
    }

    #[test]
    fn freshly_triggered_node_has_zero_deviation() {
        let result = simulate(&benchmark_scenario(2.5)).unwrap();
        let ctrl = &builtin_model("flexible-link").unwrap().controller;
        for record in &result.trigger_log {
            let row = result
                .trajectory
                .iter()
                .find(|p| p.t == record.t)
                .expect("every trigger has a row");
            let expected = match record.node.kind {
                NodeKind::Actuator => controller_eval_node(ctrl, record.node.index, &row.xhat),
                NodeKind::Sensor => {
                    let (offset, width) = (record.node.index, 1);
                    row.x.segment(offset, width)
                }
            };
            // same floating-point computation on both sides
            assert_eq!(expected.as_slice(), record.value.as_slice(), "at t = {}", record.t);
        }
    }

    #[test]
    fn dwell_time_floors_inter_event_gaps() {
        let scenario = benchmark_scenario(3.0);
        let result = simulate(&scenario).unwrap();
        for (idx, summary) in result.summary.iter().enumerate() {
            if let Some(min_gap) = summary.min_gap {
                let tau = scenario.policies[idx].tau_min();
                assert!(
                    min_gap >= tau - scenario.event_tol,
                    "node {:?}: gap {min_gap} < dwell {tau}",
                    summary.node
                );
            }
        }
    }

    #[test]
    fn disturbance_jump_lands_exactly_on_its_timestamp() {
        // no feedback: the state rests at 0, jumps to 1, then decays
        let model = builtin_model("scalar-linear").unwrap();
        let zero_gain =
            LinearController::new(Matrix::zeros(1, 1), NodePartition::single(1)).unwrap();
        let model = ModelBundle { controller: zero_gain, ..model };
        let scenario = Scenario {
            model,
            policies: vec![
                TriggerPolicy::Periodic { delta: 10.0 },
                TriggerPolicy::EpsilonCrossing { epsilon: 0.5 },
            ],
            x0: v(&[0.0]),
            xhat0: v(&[0.0]),
            t_end: 1.0,
            dt: 1e-3,
            event_tol: 1e-6,
            disturbances: vec![DisturbanceEvent { time: 0.5, state_jump: v(&[1.0]) }],
            max_events_per_node: DEFAULT_MAX_EVENTS_PER_NODE,
        };
        let result = simulate(&scenario).unwrap();
        let at_jump = result.trajectory.iter().find(|p| p.t == 0.5).unwrap();
        assert_eq!(at_jump.x[0], 1.0, "row at the jump shows the post-jump state");
        let before = result.trajectory.iter().filter(|p| p.t < 0.5).last().unwrap();
        assert_eq!(before.x[0], 0.0);
        // the sensor sees the jump immediately: deviation 1 > 0.5
        let sensor_fire = result
            .trigger_log
            .iter()
            .find(|r| r.node.kind == NodeKind::Sensor && r.t > 0.0)
            .unwrap();
        assert_eq!(sensor_fire.t, 0.5);
        assert_eq!(sensor_fire.value[0], 1.0);
        assert!(!sensor_fire.localized, "the jump row already exists");
    }

    #[test]
    fn runs_are_bitwise_deterministic() {
        let scenario = benchmark_scenario(2.5);
        let first = simulate(&scenario).unwrap();
        let second = simulate(&scenario).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn zeno_guard_reports_the_offending_node() {
        let policies = vec![TriggerPolicy::Periodic { delta: 0.01 }; 2];
        let mut scenario = scalar_scenario(policies, 1.0, 1.0);
        scenario.max_events_per_node = 5;
        match simulate(&scenario).unwrap_err() {
            SimError::ZenoSuspect { node, max, .. } => {
                assert_eq!(node, "u1");
                assert_eq!(max, 5);
            }
            other => panic!("expected ZenoSuspect, got {other}"),
        }
    }

    #[test]
    fn divergence_is_reported_as_non_finite() {
        // unstable plant, no control: x(t) = e^t overflows
        let plant = crate::models::LipschitzAffinePlant::new(
            Matrix::from_rows(&[vec![1.0]]).unwrap(),
            Matrix::from_rows(&[vec![1.0]]).unwrap(),
            Matrix::from_rows(&[vec![1.0]]).unwrap(),
            crate::models::Nonlinearity::Zero,
            0.0,
            NodePartition::single(1),
            NodePartition::single(1),
        )
        .unwrap();
        let controller =
            LinearController::new(Matrix::zeros(1, 1), NodePartition::single(1)).unwrap();
        let observer =
            crate::models::LuenbergerObserver::new(Matrix::from_rows(&[vec![1.0]]).unwrap(), &plant)
                .unwrap();
        let model = ModelBundle { name: "unstable", plant, controller, observer };
        let scenario = Scenario {
            model,
            policies: vec![
                TriggerPolicy::Periodic { delta: 10.0 },
                TriggerPolicy::Periodic { delta: 10.0 },
            ],
            x0: v(&[1.0]),
            xhat0: v(&[1.0]),
            t_end: 800.0,
            dt: 0.1,
            event_tol: 1e-6,
            disturbances: vec![],
            max_events_per_node: DEFAULT_MAX_EVENTS_PER_NODE,
        };
        match simulate(&scenario).unwrap_err() {
            SimError::NonFinite { t } => assert!(t > 100.0),
            other => panic!("expected NonFinite, got {other}"),
        }
    }

    #[test]
    fn ideal_validation_is_clean_at_equilibrium() {
        let model = builtin_model("scalar-linear").unwrap();
        let p = Matrix::from_rows(&[vec![0.5]]).unwrap();
        let lyap = LyapunovPair::new(p.clone(), 2.0, p, 2.0).unwrap();
        let cert = build_certificate(&model.plant, &model.controller, &model.observer, &lyap)
            .unwrap();
        let scenario = scalar_scenario(cert.ideal_policies(), 0.0, 1.0);
        let report = run_ideal_validation(&scenario, &cert).unwrap();
        assert!(report.violations.is_empty());
        assert_eq!(report.checked_samples, 1001);
    }

    #[test]
    fn ideal_validation_refuses_an_overdrawn_budget() {
        let model = builtin_model("scalar-linear").unwrap();
        let p = Matrix::from_rows(&[vec![0.5]]).unwrap();
        let lyap = LyapunovPair::new(p.clone(), 2.0, p, 2.0).unwrap();
        let mut cert = build_certificate(&model.plant, &model.controller, &model.observer, &lyap)
            .unwrap();
        for k in &mut cert.kappa {
            *k *= 2.0;
        }
        let scenario = scalar_scenario(cert.ideal_policies(), 1.0, 1.0);
        match run_ideal_validation(&scenario, &cert).unwrap_err() {
            SimError::Trigger(TriggerError::BudgetExceeded { .. }) => {}
            other => panic!("expected BudgetExceeded, got {other}"),
        }
    }

    #[test]
    fn ideal_validation_holds_on_a_transient_run() {
        let model = builtin_model("scalar-linear").unwrap();
        let p = Matrix::from_rows(&[vec![0.5]]).unwrap();
        let lyap = LyapunovPair::new(p.clone(), 2.0, p, 2.0).unwrap();
        let cert = build_certificate(&model.plant, &model.controller, &model.observer, &lyap)
            .unwrap();
        let mut scenario = scalar_scenario(cert.ideal_policies(), 1.0, 2.0);
        scenario.xhat0 = v(&[0.0]);
        let report = run_ideal_validation(&scenario, &cert).unwrap();
        assert_eq!(
            report.violations.len(),
            0,
            "first violation: {:?}",
            report.violations.first()
        );
        // ideal nodes reset at detection samples; no extra rows appear
        assert_eq!(report.checked_samples, 2001);
    }

    #[test]
    fn scenario_validation_rejects_bad_configs() {
        let mut s = benchmark_scenario(1.0);
        s.policies.pop();
        assert_eq!(
            simulate(&s).unwrap_err(),
            SimError::InvalidScenario("one policy per node is required")
        );

        let mut s = benchmark_scenario(1.0);
        s.dt = 0.0;
        assert!(matches!(simulate(&s).unwrap_err(), SimError::InvalidScenario(_)));

        let mut s = benchmark_scenario(1.0);
        s.disturbances = vec![DisturbanceEvent { time: 2.0, state_jump: v(&[1.0; 4]) }];
        assert!(matches!(simulate(&s).unwrap_err(), SimError::InvalidScenario(_)));
    }
}
