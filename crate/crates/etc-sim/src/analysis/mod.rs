//! Post-run metrics: communication statistics, convergence measures,
//! a sampled audit of the certified Lyapunov decrease, and empirical
//! Lipschitz estimation.

use thiserror::Error;

use crate::models::{controller_eval, ModelBundle};
use crate::num::{LowDiscrepancy, Vector};
use crate::simulator::{NodeId, NodeKind, SimulationResult};
use crate::triggering::{IssCertificate, LyapunovPair};

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("the trigger log is empty")]
    EmptyLog,
    #[error("at least 3 trajectory samples are required for central differences")]
    InsufficientSamples,
}

/// Inter-event statistics of one node. A node that only transmitted
/// its seed sample has no gaps; the statistics stay undefined.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeGapStats {
    pub node: NodeId,
    pub count: u64,
    pub min_gap: Option<f64>,
    pub mean_gap: Option<f64>,
    pub max_gap: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TriggerStats {
    pub per_node: Vec<NodeGapStats>,
    pub actuator_total: u64,
    pub sensor_total: u64,
}

impl TriggerStats {
    pub fn total(&self) -> u64 {
        self.actuator_total + self.sensor_total
    }
}

pub fn trigger_stats(result: &SimulationResult) -> Result<TriggerStats, AnalysisError> {
    if result.trigger_log.is_empty() {
        return Err(AnalysisError::EmptyLog);
    }
    let mut per_node = Vec::with_capacity(result.summary.len());
    let mut actuator_total = 0;
    let mut sensor_total = 0;
    for summary in &result.summary {
        let times: Vec<f64> = result
            .trigger_log
            .iter()
            .filter(|r| r.node == summary.node)
            .map(|r| r.t)
            .collect();
        let gaps: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
        let (min_gap, mean_gap, max_gap) = if gaps.is_empty() {
            (None, None, None)
        } else {
            let min = gaps.iter().copied().fold(f64::INFINITY, f64::min);
            let max = gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
            (Some(min), Some(mean), Some(max))
        };
        let count = times.len() as u64;
        match summary.node.kind {
            NodeKind::Actuator => actuator_total += count,
            NodeKind::Sensor => sensor_total += count,
        }
        per_node.push(NodeGapStats { node: summary.node, count, min_gap, mean_gap, max_gap });
    }
    Ok(TriggerStats { per_node, actuator_total, sensor_total })
}

/// Convergence measures over the window after the last disturbance.
/// `tail_sup_x` is bounded by `peak` by construction: the tail window
/// is a suffix of the post-disturbance window.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceReport {
    /// First sample time after the last disturbance from which the
    /// state norm stays at or below the threshold through the end.
    /// None when the final sample still exceeds it.
    pub settling_time: Option<f64>,
    pub threshold: f64,
    /// Largest state norm after the last disturbance.
    pub peak: f64,
    /// Largest state norm over the final tenth of the horizon.
    pub tail_sup_x: f64,
    /// Largest estimation-error norm over the final tenth.
    pub tail_sup_z: f64,
}

pub fn convergence_report(
    result: &SimulationResult,
    threshold: f64,
) -> Result<ConvergenceReport, AnalysisError> {
    if result.trajectory.is_empty() {
        return Err(AnalysisError::InsufficientSamples);
    }
    let t_first = result.trajectory.first().unwrap().t;
    let t_last = result.trajectory.last().unwrap().t;
    let post_start = result.disturbance_times.last().copied().unwrap_or(t_first);
    let tail_start = (t_last - 0.1 * (t_last - t_first)).max(post_start);

    let mut peak = 0.0_f64;
    let mut tail_sup_x = 0.0_f64;
    let mut tail_sup_z = 0.0_f64;
    let mut settle: Option<f64> = None;
    for point in result.trajectory.iter().filter(|p| p.t >= post_start) {
        peak = peak.max(point.norm_x);
        if point.t >= tail_start {
            tail_sup_x = tail_sup_x.max(point.norm_x);
            tail_sup_z = tail_sup_z.max(point.norm_z);
        }
        if point.norm_x > threshold {
            settle = None;
        } else if settle.is_none() {
            settle = Some(point.t);
        }
    }
    Ok(ConvergenceReport { settling_time: settle, threshold, peak, tail_sup_x, tail_sup_z })
}

/// One flagged sample of the decrease audit.
#[derive(Clone, Debug, PartialEq)]
pub struct LyapunovViolation {
    pub t: f64,
    pub dv_dt: f64,
    pub bound: f64,
}

/// Outcome of the sampled decrease audit. `checked` counts interior
/// samples actually tested; `excluded` counts those skipped for lying
/// within two steps of a trigger or disturbance, where the composite
/// function is not differentiable. A conclusion drawn from zero
/// checked samples is vacuous, so both counts are part of the result.
#[derive(Clone, Debug, PartialEq)]
pub struct LyapunovCheck {
    pub violations: Vec<LyapunovViolation>,
    pub checked: usize,
    pub excluded: usize,
}

fn quad_sqrt(p: &crate::num::Matrix, v: &Vector) -> f64 {
    // 2 sqrt(v' P v); the composite certificate uses the square-root form
    2.0 * p.mul_vec(v).dot(v).max(0.0).sqrt()
}

/// Audits the certified dissipation inequality along a run: at each
/// interior sample away from events, the central-difference slope of
/// V(X) = lambda_c 2 sqrt(V_c(xhat)) + 2 sqrt(V_o(z)) must not exceed
/// -|X|_1 / L_a3_inv + L_b |E|_1 plus a slack of 10 dt times the local
/// second-derivative estimate (discretization noise allowance).
pub fn check_lyapunov_decrease(
    result: &SimulationResult,
    model: &ModelBundle,
    lyap: &LyapunovPair,
    certificate: &IssCertificate,
) -> Result<LyapunovCheck, AnalysisError> {
    let rows = &result.trajectory;
    if rows.len() < 3 {
        return Err(AnalysisError::InsufficientSamples);
    }
    let mut event_times: Vec<f64> =
        result.trigger_log.iter().map(|r| r.t).collect();
    event_times.extend_from_slice(&result.disturbance_times);
    event_times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let window = 2.0 * result.dt;
    let near_event = |t: f64| -> bool {
        let idx = event_times.partition_point(|&e| e < t - window);
        idx < event_times.len() && event_times[idx] <= t + window
    };

    let v_of = |point: &crate::simulator::TrajectoryPoint| -> f64 {
        let z = &point.x - &point.xhat;
        certificate.lambda_c * quad_sqrt(lyap.p_c(), &point.xhat) + quad_sqrt(lyap.p_o(), &z)
    };

    let mut violations = Vec::new();
    let mut checked = 0;
    let mut excluded = 0;
    for i in 1..rows.len() - 1 {
        let t = rows[i].t;
        if near_event(t) {
            excluded += 1;
            continue;
        }
        let (prev, here, next) = (&rows[i - 1], &rows[i], &rows[i + 1]);
        let span = next.t - prev.t;
        if span <= 0.0 {
            excluded += 1;
            continue;
        }
        checked += 1;
        let (v_prev, v_here, v_next) = (v_of(prev), v_of(here), v_of(next));
        let dv_dt = (v_next - v_prev) / span;
        // second divided difference doubles as a curvature estimate
        let h1 = here.t - prev.t;
        let h2 = next.t - here.t;
        let curvature = if h1 > 0.0 && h2 > 0.0 {
            2.0 * ((v_next - v_here) / h2 - (v_here - v_prev) / h1).abs() / span
        } else {
            0.0
        };
        let tol_slack = 10.0 * result.dt * curvature;

        let x_one = here.xhat.norm_one() + (&here.x - &here.xhat).norm_one();
        let e_u = &controller_eval(&model.controller, &here.xhat) - &here.ubar;
        let e_y = &model.plant.output(&here.x) - &here.ybar;
        let e_one = e_u.norm_one() + e_y.norm_one();
        let bound = -x_one / certificate.l_a3_inv + certificate.l_b * e_one + tol_slack;
        if dv_dt > bound {
            violations.push(LyapunovViolation { t, dv_dt, bound });
        }
    }
    Ok(LyapunovCheck { violations, checked, excluded })
}

/// Largest sampled difference quotient of `f` around `center`: a
/// certified lower bound on the Lipschitz constant over the ball of
/// the given radius. Probes alternate between shrinking symmetric
/// axis pairs (sharp for maps whose slope peaks on an axis or at the
/// center) and radial low-discrepancy directions (coverage of skew
/// directions). Fully deterministic, and monotone in `samples`: the
/// probe sequence is fixed, more samples extend it.
pub fn estimate_lipschitz<F: Fn(&Vector) -> Vector>(
    f: F,
    center: &Vector,
    radius: f64,
    samples: usize,
) -> f64 {
    assert!(radius > 0.0 && radius.is_finite(), "radius must be positive");
    let n = center.dim();
    let f_center = f(center);
    let mut seq = LowDiscrepancy::new(n);
    let mut best = 0.0_f64;
    for probe in 0..samples.max(2) {
        let quotient = if probe % 2 == 0 {
            let pair = probe / 2;
            let axis = pair % n;
            let level = (pair / n) % 60;
            let step = radius * 0.5_f64.powi(level as i32);
            let mut hi = center.clone();
            let mut lo = center.clone();
            hi[axis] += step;
            lo[axis] -= step;
            (&f(&hi) - &f(&lo)).norm_two() / (2.0 * step)
        } else {
            let u = seq.next_point();
            let mut data = Vec::with_capacity(n);
            for (j, uj) in u.iter().enumerate() {
                data.push(center[j] + radius * (2.0 * uj - 1.0));
            }
            let p = Vector::from_raw(data);
            let dist = (&p - center).norm_two();
            if dist == 0.0 {
                continue;
            }
            (&f(&p) - &f_center).norm_two() / dist
        };
        if quotient.is_finite() {
            best = best.max(quotient);
        }
    }
    best
}
