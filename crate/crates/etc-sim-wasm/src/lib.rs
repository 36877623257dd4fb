//! Browser bindings for the simulation engine. Every exported
//! function takes a JSON string and returns a JSON string, so the demo
//! page needs no framework glue; failures come back as
//! `{"error": "..."}` instead of thrown exceptions.

use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

use etc_sim::analysis::convergence_report;
use etc_sim::models::{builtin_model, builtin_model_names, ModelBundle};
use etc_sim::num::Vector;
use etc_sim::simulator::{
    run_ideal_validation, simulate, simulate_periodic_baseline, DisturbanceEvent, Scenario,
    SimulationResult, DEFAULT_MAX_EVENTS_PER_NODE,
};
use etc_sim::triggering::{derive_certificate, TriggerPolicy};

/// Most points a single plotted series sends to the page.
const MAX_PLOT_POINTS: usize = 1200;

/// Hard ceiling on integration steps per request, to keep the browser
/// responsive.
const MAX_STEPS: f64 = 300_000.0;

fn err_json(message: impl std::fmt::Display) -> String {
    serde_json::json!({ "error": message.to_string() }).to_string()
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RunOptions {
    factor: f64,
    dwell: f64,
    t_end: f64,
    dt: f64,
    impulse_time: f64,
    impulse_scale: f64,
    compare: bool,
    baseline_delta: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            factor: 0.2,
            dwell: 0.01,
            t_end: 15.0,
            dt: 1e-3,
            impulse_time: 2.0,
            impulse_scale: 1.0,
            compare: true,
            baseline_delta: 0.05,
        }
    }
}

impl RunOptions {
    fn validate(&self) -> Result<(), String> {
        if !(self.factor > 0.0 && self.factor <= 10.0) {
            return Err("factor must be in (0, 10]".to_string());
        }
        if !(self.dwell > 0.0 && self.dwell <= 1.0) {
            return Err("dwell must be in (0, 1]".to_string());
        }
        if !(self.t_end > 0.0 && self.t_end <= 30.0) {
            return Err("t_end must be in (0, 30]".to_string());
        }
        if !(self.dt >= 1e-4 && self.dt <= 0.1) {
            return Err("dt must be in [1e-4, 0.1]".to_string());
        }
        if self.t_end / self.dt > MAX_STEPS {
            return Err("too many integration steps; raise dt or lower t_end".to_string());
        }
        if self.compare && !(self.baseline_delta > 0.0 && self.baseline_delta < self.t_end) {
            return Err("baseline_delta must be in (0, t_end)".to_string());
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct NodeEvents {
    label: String,
    count: u64,
    times: Vec<f64>,
}

#[derive(Serialize)]
struct RunSummary {
    t: Vec<f64>,
    norm_x: Vec<f64>,
    norm_z: Vec<f64>,
    u: Vec<f64>,
    events: Vec<NodeEvents>,
    final_norm_x: f64,
    final_norm_z: f64,
    settling_time: Option<f64>,
    rows: usize,
}

#[derive(Serialize)]
struct RunResponse {
    event: RunSummary,
    periodic: Option<RunSummary>,
    baseline_delta: f64,
    impulse_applied: bool,
}

fn practical_policies(model: &ModelBundle, factor: f64, dwell: f64) -> Vec<TriggerPolicy> {
    let q = model.plant.input_partition().node_count();
    let r = model.plant.output_partition().node_count();
    let mut policies = Vec::with_capacity(q + r);
    for i in 0..q {
        let l_gamma = model.controller.node_lipschitz(i);
        policies.push(TriggerPolicy::NodeRelativeActuator {
            kappa: factor * l_gamma,
            l_gamma,
            tau_min: dwell,
        });
    }
    let l_h = model.observer.output_lipschitz();
    for _ in 0..r {
        policies.push(TriggerPolicy::NodeRelativeSensor {
            kappa: factor * 2.0 * l_h,
            l_h,
            tau_min: dwell,
        });
    }
    policies
}

fn summarize(result: &SimulationResult, threshold: f64) -> RunSummary {
    let rows = result.trajectory.len();
    let stride = rows.div_ceil(MAX_PLOT_POINTS).max(1);
    let mut t = Vec::new();
    let mut norm_x = Vec::new();
    let mut norm_z = Vec::new();
    let mut u = Vec::new();
    for (idx, point) in result.trajectory.iter().enumerate() {
        if idx % stride == 0 || idx + 1 == rows {
            t.push(point.t);
            norm_x.push(point.norm_x);
            norm_z.push(point.norm_z);
            u.push(if point.ubar.dim() > 0 { point.ubar[0] } else { 0.0 });
        }
    }
    let events = result
        .summary
        .iter()
        .map(|node| NodeEvents {
            label: node.node.label(),
            count: node.count,
            times: result
                .trigger_log
                .iter()
                .filter(|r| r.node == node.node)
                .map(|r| r.t)
                .collect(),
        })
        .collect();
    let last = result.trajectory.last();
    let settling_time =
        convergence_report(result, threshold).ok().and_then(|r| r.settling_time);
    RunSummary {
        t,
        norm_x,
        norm_z,
        u,
        events,
        final_norm_x: last.map_or(f64::NAN, |p| p.norm_x),
        final_norm_z: last.map_or(f64::NAN, |p| p.norm_z),
        settling_time,
        rows,
    }
}

fn benchmark_scenario(opts: &RunOptions) -> Result<(Scenario, bool), String> {
    let model = builtin_model("flexible-link").expect("benchmark model");
    let n = model.plant.state_dim();
    let policies = practical_policies(&model, opts.factor, opts.dwell);
    let impulse_applied =
        opts.impulse_scale != 0.0 && opts.impulse_time > 0.0 && opts.impulse_time < opts.t_end;
    let disturbances = if impulse_applied {
        vec![DisturbanceEvent {
            time: opts.impulse_time,
            state_jump: Vector::new(vec![opts.impulse_scale; n]).map_err(|e| e.to_string())?,
        }]
    } else {
        Vec::new()
    };
    let scenario = Scenario {
        model,
        policies,
        x0: Vector::new(vec![1.0; n]).map_err(|e| e.to_string())?,
        xhat0: Vector::zeros(n),
        t_end: opts.t_end,
        dt: opts.dt,
        event_tol: 1e-6,
        disturbances,
        max_events_per_node: DEFAULT_MAX_EVENTS_PER_NODE,
    };
    scenario.validate().map_err(|e| e.to_string())?;
    Ok((scenario, impulse_applied))
}

/// Simulates the flexible-link benchmark under practical relative
/// triggers, optionally next to a periodic baseline. Options JSON (all
/// fields optional): factor, dwell, t_end, dt, impulse_time,
/// impulse_scale, compare, baseline_delta.
#[wasm_bindgen]
pub fn run_benchmark(options_json: &str) -> String {
    let opts: RunOptions = match serde_json::from_str(options_json) {
        Ok(opts) => opts,
        Err(e) => return err_json(format!("bad options: {e}")),
    };
    if let Err(e) = opts.validate() {
        return err_json(e);
    }
    let (scenario, impulse_applied) = match benchmark_scenario(&opts) {
        Ok(pair) => pair,
        Err(e) => return err_json(e),
    };
    let threshold = 0.05;
    let event = match simulate(&scenario) {
        Ok(result) => summarize(&result, threshold),
        Err(e) => return err_json(e),
    };
    let periodic = if opts.compare {
        match simulate_periodic_baseline(&scenario, opts.baseline_delta) {
            Ok(result) => Some(summarize(&result, threshold)),
            Err(e) => return err_json(e),
        }
    } else {
        None
    };
    let response = RunResponse {
        event,
        periodic,
        baseline_delta: opts.baseline_delta,
        impulse_applied,
    };
    serde_json::to_string(&response).unwrap_or_else(|e| err_json(e))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelRequest {
    model: String,
}

#[derive(Serialize)]
struct CertificateResponse {
    model: String,
    nodes: Vec<String>,
    l_a3_inv: f64,
    l_b: f64,
    l_g: f64,
    lambda_c: f64,
    l_beta_c: f64,
    l_beta_o: f64,
    l_alpha_c3: f64,
    l_alpha_o3_inv: f64,
    sigma: f64,
    sigma_prime: f64,
    kappa: Vec<f64>,
    tau_min: Vec<f64>,
    warnings: Vec<String>,
}

fn node_labels(model: &ModelBundle) -> Vec<String> {
    let q = model.plant.input_partition().node_count();
    let r = model.plant.output_partition().node_count();
    (0..q)
        .map(|i| format!("u{}", i + 1))
        .chain((0..r).map(|j| format!("y{}", j + 1)))
        .collect()
}

/// Derives the transmission-budget certificate for a builtin model.
/// Request JSON: {"model": "flexible-link" | "double-integrator" |
/// "scalar-linear"}.
#[wasm_bindgen]
pub fn certificate_chain(request_json: &str) -> String {
    let request: ModelRequest = match serde_json::from_str(request_json) {
        Ok(request) => request,
        Err(e) => return err_json(format!("bad request: {e}")),
    };
    let model = match builtin_model(&request.model) {
        Some(model) => model,
        None => {
            return err_json(format!(
                "unknown model '{}' (builtins: {})",
                request.model,
                builtin_model_names().join(", ")
            ))
        }
    };
    let (_, cert) = match derive_certificate(&model) {
        Ok(pair) => pair,
        Err(e) => return err_json(format!("cannot certify: {e}")),
    };
    let response = CertificateResponse {
        model: request.model,
        nodes: node_labels(&model),
        l_a3_inv: cert.l_a3_inv,
        l_b: cert.l_b,
        l_g: cert.l_g,
        lambda_c: cert.lambda_c,
        l_beta_c: cert.l_beta_c,
        l_beta_o: cert.l_beta_o,
        l_alpha_c3: cert.l_alpha_c3,
        l_alpha_o3_inv: cert.l_alpha_o3_inv,
        sigma: cert.sigma,
        sigma_prime: cert.sigma_prime,
        kappa: cert.kappa.clone(),
        tau_min: cert.tau_min.clone(),
        warnings: cert.warnings.clone(),
    };
    serde_json::to_string(&response).unwrap_or_else(|e| err_json(e))
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct AuditOptions {
    model: String,
    t_end: f64,
    dt: f64,
}

impl Default for AuditOptions {
    fn default() -> Self {
        AuditOptions { model: "scalar-linear".to_string(), t_end: 2.0, dt: 1e-3 }
    }
}

#[derive(Serialize)]
struct ViolationRow {
    t: f64,
    error_norm: f64,
    bound: f64,
}

#[derive(Serialize)]
struct AuditResponse {
    model: String,
    checked_samples: usize,
    violation_count: usize,
    violations: Vec<ViolationRow>,
    slack: f64,
    sigma_prime: f64,
    counts: Vec<NodeEvents>,
}

/// Runs a builtin model from a unit displacement under its certified
/// ideal policies and audits every sample against the
/// transmission-error budget. Request JSON (all fields optional):
/// model, t_end, dt.
#[wasm_bindgen]
pub fn audit_budget(options_json: &str) -> String {
    let opts: AuditOptions = match serde_json::from_str(options_json) {
        Ok(opts) => opts,
        Err(e) => return err_json(format!("bad options: {e}")),
    };
    if !(opts.t_end > 0.0 && opts.t_end <= 30.0) {
        return err_json("t_end must be in (0, 30]");
    }
    if !(opts.dt >= 1e-4 && opts.dt <= 0.1) {
        return err_json("dt must be in [1e-4, 0.1]");
    }
    if opts.t_end / opts.dt > MAX_STEPS {
        return err_json("too many integration steps; raise dt or lower t_end");
    }
    let model = match builtin_model(&opts.model) {
        Some(model) => model,
        None => {
            return err_json(format!(
                "unknown model '{}' (builtins: {})",
                opts.model,
                builtin_model_names().join(", ")
            ))
        }
    };
    let (_, cert) = match derive_certificate(&model) {
        Ok(pair) => pair,
        Err(e) => return err_json(format!("cannot certify: {e}")),
    };
    let n = model.plant.state_dim();
    let q = model.plant.input_partition().node_count();
    let r = model.plant.output_partition().node_count();
    let scenario = Scenario {
        model,
        policies: vec![TriggerPolicy::Periodic { delta: 1.0 }; q + r],
        x0: match Vector::new(vec![1.0; n]) {
            Ok(v) => v,
            Err(e) => return err_json(e),
        },
        xhat0: Vector::zeros(n),
        t_end: opts.t_end,
        dt: opts.dt,
        event_tol: 1e-6,
        disturbances: Vec::new(),
        max_events_per_node: DEFAULT_MAX_EVENTS_PER_NODE,
    };
    // run_ideal_validation swaps in the certified ideal policies; the
    // placeholders above only have to pass scenario validation
    let report = match run_ideal_validation(&scenario, &cert) {
        Ok(report) => report,
        Err(e) => return err_json(e),
    };
    let counts = report
        .result
        .summary
        .iter()
        .map(|node| NodeEvents {
            label: node.node.label(),
            count: node.count,
            times: Vec::new(),
        })
        .collect();
    let response = AuditResponse {
        model: opts.model,
        checked_samples: report.checked_samples,
        violation_count: report.violations.len(),
        violations: report
            .violations
            .iter()
            .take(20)
            .map(|v| ViolationRow { t: v.t, error_norm: v.error_norm, bound: v.bound })
            .collect(),
        slack: report.slack,
        sigma_prime: cert.sigma_prime,
        counts,
    };
    serde_json::to_string(&response).unwrap_or_else(|e| err_json(e))
}
