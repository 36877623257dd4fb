//! Scenario documents, result serialization, and plot emission.
//!
//! The scenario format is a line-oriented section/key syntax parsed
//! without any schema machinery so every diagnostic can carry its line
//! number. All emitters are pure string builders: identical inputs
//! produce identical bytes, and file writes go through a temp-file
//! rename so readers never observe a half-written document.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::analysis::{ConvergenceReport, TriggerStats};
use crate::models::{
    builtin_model, LinearController, LipschitzAffinePlant, LuenbergerObserver, ModelBundle,
    NodePartition, Nonlinearity,
};
use crate::num::{Matrix, Vector};
use crate::simulator::{
    DisturbanceEvent, NodeKind, Scenario, SimulationResult, ValidationReport,
    DEFAULT_MAX_EVENTS_PER_NODE,
};
use crate::triggering::{derive_certificate, IssCertificate, TriggerPolicy};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{0}")]
    Validation(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn parse_err(line: usize, message: impl Into<String>) -> IoError {
    IoError::Parse { line, message: message.into() }
}

/// Output file names requested by a scenario, relative to the output
/// directory chosen at invocation time.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct OutputPaths {
    pub csv: Option<String>,
    pub svg: Option<String>,
    pub report: Option<String>,
}

/// A parsed scenario document: the runnable scenario plus everything
/// the command layer needs (baseline period, output names, whether the
/// trigger budget was derived automatically).
#[derive(Clone, Debug)]
pub struct ParsedScenario {
    pub name: String,
    pub scenario: Scenario,
    pub baseline_delta: Option<f64>,
    pub auto_triggers: bool,
    pub outputs: OutputPaths,
    /// Set when the model came from the builtin registry by name.
    pub model_name: Option<String>,
}

const BUILTIN_SCENARIO: &str = "\
# flexible-link benchmark under event-triggered observer-based control
[model]
name = flexible-link

[initial]
x0 = 1 1 1 1
xhat0 = 0 0 0 0

[sim]
t_end = 15
dt = 0.001
event_tol = 1e-6
baseline_delta = 0.05

[triggers]
u1 = relative factor=0.2 dwell=0.01
y1 = relative factor=0.2 dwell=0.01
y2 = relative factor=0.2 dwell=0.01

[disturbances]
impulse: 2 1 1 1 1

[outputs]
csv = flexible-link-paper.csv
svg = flexible-link-paper.svg
report = flexible-link-paper-report.txt
";

/// Scenarios shipped with the binary, addressable by name instead of a
/// file path.
pub fn builtin_scenario(name: &str) -> Option<ParsedScenario> {
    match name {
        "flexible-link-paper" => {
            let mut parsed = parse_scenario(BUILTIN_SCENARIO)
                .expect("the embedded scenario must always parse");
            parsed.name = name.to_string();
            Some(parsed)
        }
        _ => None,
    }
}

pub fn builtin_scenario_names() -> &'static [&'static str] {
    &["flexible-link-paper"]
}

struct RawLine {
    no: usize,
    text: String,
}

struct Section {
    name: String,
    header_line: usize,
    lines: Vec<RawLine>,
}

fn split_sections(document: &str) -> Result<Vec<Section>, IoError> {
    let mut sections: Vec<Section> = Vec::new();
    let mut any_content = false;
    for (idx, raw) in document.lines().enumerate() {
        let no = idx + 1;
        let text = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let text = text.trim();
        if text.is_empty() {
            continue;
        }
        any_content = true;
        if let Some(name) = text.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| parse_err(no, "unterminated section header"))?;
            sections.push(Section {
                name: name.trim().to_string(),
                header_line: no,
                lines: Vec::new(),
            });
        } else {
            let section = sections
                .last_mut()
                .ok_or_else(|| parse_err(no, "expected a [section] header before this line"))?;
            section.lines.push(RawLine { no, text: text.to_string() });
        }
    }
    if !any_content {
        return Err(parse_err(1, "empty scenario document"));
    }
    Ok(sections)
}

fn split_kv(line: &RawLine) -> Result<(&str, &str), IoError> {
    let pos = line
        .text
        .find('=')
        .ok_or_else(|| parse_err(line.no, "expected key = value"))?;
    Ok((line.text[..pos].trim(), line.text[pos + 1..].trim()))
}

fn parse_f64(token: &str, line: usize) -> Result<f64, IoError> {
    token
        .parse::<f64>()
        .map_err(|_| parse_err(line, format!("not a number: '{token}'")))
        .and_then(|v| {
            if v.is_finite() {
                Ok(v)
            } else {
                Err(parse_err(line, format!("not finite: '{token}'")))
            }
        })
}

fn parse_numbers(value: &str, line: usize) -> Result<Vec<f64>, IoError> {
    let mut out = Vec::new();
    for token in value.split_whitespace() {
        out.push(parse_f64(token, line)?);
    }
    if out.is_empty() {
        return Err(parse_err(line, "expected at least one number"));
    }
    Ok(out)
}

fn parse_matrix(value: &str, line: usize) -> Result<Matrix, IoError> {
    let mut rows = Vec::new();
    for row in value.split(';') {
        rows.push(parse_numbers(row, line)?);
    }
    Matrix::from_rows(&rows).map_err(|e| parse_err(line, e.to_string()))
}

fn parse_usize_list(value: &str, line: usize) -> Result<Vec<usize>, IoError> {
    let mut out = Vec::new();
    for token in value.split_whitespace() {
        out.push(
            token
                .parse::<usize>()
                .map_err(|_| parse_err(line, format!("not a node width: '{token}'")))?,
        );
    }
    if out.is_empty() {
        return Err(parse_err(line, "expected at least one node width"));
    }
    Ok(out)
}

fn widths_to_partition(widths: &[usize], line: usize) -> Result<NodePartition, IoError> {
    let mut spans = Vec::with_capacity(widths.len());
    let mut offset = 0;
    for &w in widths {
        spans.push((offset, w));
        offset += w;
    }
    NodePartition::new(spans, offset).map_err(|e| parse_err(line, e.to_string()))
}

/// `key=value` arguments of a policy or nonlinearity spec.
fn parse_args(tokens: &[&str], line: usize) -> Result<Vec<(String, String)>, IoError> {
    let mut out = Vec::new();
    for token in tokens {
        let pos = token
            .find('=')
            .ok_or_else(|| parse_err(line, format!("expected key=value, got '{token}'")))?;
        out.push((token[..pos].to_string(), token[pos + 1..].to_string()));
    }
    Ok(out)
}

fn take_arg(
    args: &[(String, String)],
    keys: &[&str],
    name: &str,
    line: usize,
) -> Result<f64, IoError> {
    for key in keys {
        if let Some((_, v)) = args.iter().find(|(k, _)| k == key) {
            return parse_f64(v, line);
        }
    }
    Err(parse_err(line, format!("{name} requires {}=", keys[0])))
}

fn check_known_args(args: &[(String, String)], known: &[&str], line: usize) -> Result<(), IoError> {
    for (k, _) in args {
        if !known.contains(&k.as_str()) {
            return Err(parse_err(line, format!("unknown argument '{k}'")));
        }
    }
    Ok(())
}

fn parse_policy(
    spec: &str,
    line: usize,
    kind: NodeKind,
    node_index: usize,
    model: &ModelBundle,
) -> Result<TriggerPolicy, IoError> {
    let tokens: Vec<&str> = spec.split_whitespace().collect();
    if tokens.is_empty() {
        return Err(parse_err(line, "empty trigger policy"));
    }
    let args = parse_args(&tokens[1..], line)?;
    let policy = match tokens[0] {
        "periodic" => {
            check_known_args(&args, &["delta"], line)?;
            TriggerPolicy::Periodic { delta: take_arg(&args, &["delta"], "periodic", line)? }
        }
        "epsilon-crossing" => {
            check_known_args(&args, &["epsilon"], line)?;
            TriggerPolicy::EpsilonCrossing {
                epsilon: take_arg(&args, &["epsilon"], "epsilon-crossing", line)?,
            }
        }
        "state-dependent" => {
            check_known_args(&args, &["sigma", "epsilon"], line)?;
            TriggerPolicy::StateDependent {
                sigma: take_arg(&args, &["sigma"], "state-dependent", line)?,
                epsilon: take_arg(&args, &["epsilon"], "state-dependent", line)?,
            }
        }
        "mixed" => {
            check_known_args(&args, &["epsilon", "delta_min"], line)?;
            TriggerPolicy::Mixed {
                epsilon: take_arg(&args, &["epsilon"], "mixed", line)?,
                delta_min: take_arg(&args, &["delta_min"], "mixed", line)?,
            }
        }
        "relative-state" => {
            check_known_args(&args, &["sigma"], line)?;
            TriggerPolicy::RelativeState {
                sigma: take_arg(&args, &["sigma"], "relative-state", line)?,
            }
        }
        "relative" => {
            // practical threshold: deviation beyond factor * |signal|,
            // expressed through the node's own slope constant
            check_known_args(&args, &["factor", "dwell"], line)?;
            let factor = take_arg(&args, &["factor"], "relative", line)?;
            let dwell = take_arg(&args, &["dwell"], "relative", line)?;
            match kind {
                NodeKind::Actuator => {
                    let l_gamma = model.controller.node_lipschitz(node_index);
                    TriggerPolicy::NodeRelativeActuator {
                        kappa: factor * l_gamma,
                        l_gamma,
                        tau_min: dwell,
                    }
                }
                NodeKind::Sensor => {
                    let l_h = model.observer.output_lipschitz();
                    TriggerPolicy::NodeRelativeSensor {
                        kappa: factor * 2.0 * l_h,
                        l_h,
                        tau_min: dwell,
                    }
                }
            }
        }
        "node-relative" => {
            check_known_args(&args, &["kappa", "lipschitz", "dwell"], line)?;
            let kappa = take_arg(&args, &["kappa"], "node-relative", line)?;
            let slope = take_arg(&args, &["lipschitz"], "node-relative", line)?;
            let dwell = take_arg(&args, &["dwell"], "node-relative", line)?;
            match kind {
                NodeKind::Actuator => TriggerPolicy::NodeRelativeActuator {
                    kappa,
                    l_gamma: slope,
                    tau_min: dwell,
                },
                NodeKind::Sensor => {
                    TriggerPolicy::NodeRelativeSensor { kappa, l_h: slope, tau_min: dwell }
                }
            }
        }
        "ideal" => {
            check_known_args(&args, &["kappa", "dwell"], line)?;
            TriggerPolicy::IdealNode {
                kappa: take_arg(&args, &["kappa"], "ideal", line)?,
                tau_min: take_arg(&args, &["dwell"], "ideal", line)?,
            }
        }
        other => return Err(parse_err(line, format!("unknown trigger policy '{other}'"))),
    };
    Ok(policy)
}

fn parse_nonlinearity(
    value: &str,
    line: usize,
    state_dim: usize,
) -> Result<(Nonlinearity, Option<f64>), IoError> {
    let tokens: Vec<&str> = value.split_whitespace().collect();
    match tokens.first().copied() {
        Some("zero") => Ok((Nonlinearity::Zero, Some(0.0))),
        Some("sine") => {
            let args = parse_args(&tokens[1..], line)?;
            check_known_args(&args, &["input", "output", "gain"], line)?;
            let input = take_arg(&args, &["input"], "sine", line)? as usize;
            let output = take_arg(&args, &["output"], "sine", line)? as usize;
            let gain = take_arg(&args, &["gain"], "sine", line)?;
            if input == 0 || input > state_dim || output == 0 || output > state_dim {
                return Err(parse_err(line, "sine channel indices are 1-based state indices"));
            }
            Ok((
                Nonlinearity::SineChannel { input: input - 1, output: output - 1, gain },
                Some(gain.abs()),
            ))
        }
        _ => Err(parse_err(line, "nonlinearity must be 'zero' or 'sine input= output= gain='")),
    }
}

/// Parses a scenario document into a validated, runnable scenario.
pub fn parse_scenario(document: &str) -> Result<ParsedScenario, IoError> {
    let sections = split_sections(document)?;
    for section in &sections {
        match section.name.as_str() {
            "model" | "gains" | "initial" | "sim" | "triggers" | "disturbances" | "outputs" => {}
            other => {
                return Err(parse_err(section.header_line, format!("unknown section '{other}'")))
            }
        }
    }
    let find = |name: &str| sections.iter().find(|s| s.name == name);

    // model
    let model_section = find("model")
        .ok_or_else(|| parse_err(1, "missing [model] section"))?;
    let mut name: Option<(String, usize)> = None;
    let mut a: Option<(Matrix, usize)> = None;
    let mut b: Option<(Matrix, usize)> = None;
    let mut c: Option<(Matrix, usize)> = None;
    let mut rho: Option<f64> = None;
    let mut phi: Option<(Nonlinearity, Option<f64>)> = None;
    let mut input_nodes: Option<(Vec<usize>, usize)> = None;
    let mut output_nodes: Option<(Vec<usize>, usize)> = None;
    for line in &model_section.lines {
        let (key, value) = split_kv(line)?;
        match key {
            "name" => name = Some((value.to_string(), line.no)),
            "A" => a = Some((parse_matrix(value, line.no)?, line.no)),
            "B" => b = Some((parse_matrix(value, line.no)?, line.no)),
            "C" => c = Some((parse_matrix(value, line.no)?, line.no)),
            "rho" => rho = Some(parse_f64(value, line.no)?),
            "phi" => {
                let dim = a.as_ref().map(|(m, _)| m.rows()).unwrap_or(usize::MAX);
                phi = Some(parse_nonlinearity(value, line.no, dim)?);
            }
            "input_nodes" => input_nodes = Some((parse_usize_list(value, line.no)?, line.no)),
            "output_nodes" => output_nodes = Some((parse_usize_list(value, line.no)?, line.no)),
            other => return Err(parse_err(line.no, format!("unknown model key '{other}'"))),
        }
    }

    let (mut model, model_name) = if let Some((model_name, name_line)) = name {
        if a.is_some() || b.is_some() || c.is_some() {
            return Err(parse_err(name_line, "a named model cannot also define inline matrices"));
        }
        let bundle = builtin_model(&model_name).ok_or_else(|| {
            parse_err(name_line, format!("unknown builtin model '{model_name}'"))
        })?;
        (bundle, Some(model_name))
    } else {
        let (a, a_line) =
            a.ok_or_else(|| parse_err(model_section.header_line, "inline model requires A"))?;
        let (b, _) =
            b.ok_or_else(|| parse_err(model_section.header_line, "inline model requires B"))?;
        let (c, _) =
            c.ok_or_else(|| parse_err(model_section.header_line, "inline model requires C"))?;
        let (phi, phi_rho) = phi.unwrap_or((Nonlinearity::Zero, Some(0.0)));
        let rho = rho.or(phi_rho).unwrap_or(0.0);
        let input_partition = match &input_nodes {
            Some((widths, line)) => widths_to_partition(widths, *line)?,
            None => NodePartition::single(b.cols()),
        };
        let output_partition = match &output_nodes {
            Some((widths, line)) => widths_to_partition(widths, *line)?,
            None => NodePartition::single(c.rows()),
        };
        let plant = LipschitzAffinePlant::new(
            a,
            b,
            c,
            phi,
            rho,
            input_partition.clone(),
            output_partition.clone(),
        )
        .map_err(|e| IoError::Validation(e.to_string()))?;
        // inline models need explicit gains; placeholders are replaced
        // below and rejected if the section is missing
        let controller = LinearController::new(
            Matrix::zeros(plant.input_dim(), plant.state_dim()),
            input_partition,
        )
        .map_err(|e| IoError::Validation(e.to_string()))?;
        let observer = LuenbergerObserver::new(
            Matrix::zeros(plant.state_dim(), plant.output_dim()),
            &plant,
        )
        .map_err(|e| IoError::Validation(e.to_string()))?;
        let has_gains = find("gains").is_some();
        if !has_gains {
            return Err(parse_err(
                a_line,
                "inline models require a [gains] section with K and L",
            ));
        }
        (ModelBundle { name: "inline", plant, controller, observer }, None)
    };

    // gains (optional for named models: overrides)
    if let Some(section) = find("gains") {
        let mut k: Option<(Matrix, usize)> = None;
        let mut l: Option<(Matrix, usize)> = None;
        for line in &section.lines {
            let (key, value) = split_kv(line)?;
            match key {
                "K" => k = Some((parse_matrix(value, line.no)?, line.no)),
                "L" => l = Some((parse_matrix(value, line.no)?, line.no)),
                other => return Err(parse_err(line.no, format!("unknown gains key '{other}'"))),
            }
        }
        if let Some((k, _)) = k {
            let (m, n) = (model.plant.input_dim(), model.plant.state_dim());
            if k.rows() != m || k.cols() != n {
                return Err(IoError::Validation(format!(
                    "K must be {m} x {n} (inputs x states), got {} x {}",
                    k.rows(),
                    k.cols()
                )));
            }
            model.controller =
                LinearController::new(k, model.plant.input_partition().clone())
                    .map_err(|e| IoError::Validation(e.to_string()))?;
        } else if model_name.is_none() {
            return Err(parse_err(section.header_line, "inline models require K"));
        }
        if let Some((l, _)) = l {
            model.observer = LuenbergerObserver::new(l, &model.plant)
                .map_err(|e| IoError::Validation(e.to_string()))?;
        } else if model_name.is_none() {
            return Err(parse_err(section.header_line, "inline models require L"));
        }
    }

    let n = model.plant.state_dim();
    let q = model.plant.input_partition().node_count();
    let r = model.plant.output_partition().node_count();

    // initial
    let initial = find("initial")
        .ok_or_else(|| parse_err(1, "missing [initial] section"))?;
    let mut x0: Option<Vector> = None;
    let mut xhat0: Option<Vector> = None;
    for line in &initial.lines {
        let (key, value) = split_kv(line)?;
        let values = parse_numbers(value, line.no)?;
        if values.len() != n {
            return Err(parse_err(
                line.no,
                format!("{key} has {} entries, the model has {n} states", values.len()),
            ));
        }
        let vector = Vector::new(values).map_err(|e| parse_err(line.no, e.to_string()))?;
        match key {
            "x0" => x0 = Some(vector),
            "xhat0" => xhat0 = Some(vector),
            other => return Err(parse_err(line.no, format!("unknown initial key '{other}'"))),
        }
    }
    let x0 = x0.ok_or_else(|| parse_err(initial.header_line, "missing x0"))?;
    let xhat0 = xhat0.unwrap_or_else(|| Vector::zeros(n));

    // sim
    let sim = find("sim").ok_or_else(|| parse_err(1, "missing [sim] section"))?;
    let mut t_end: Option<f64> = None;
    let mut dt = 1e-3;
    let mut event_tol = 1e-6;
    let mut baseline_delta: Option<f64> = None;
    for line in &sim.lines {
        let (key, value) = split_kv(line)?;
        let v = parse_f64(value, line.no)?;
        match key {
            "t_end" => t_end = Some(v),
            "dt" => dt = v,
            "event_tol" => event_tol = v,
            "baseline_delta" => baseline_delta = Some(v),
            other => return Err(parse_err(line.no, format!("unknown sim key '{other}'"))),
        }
    }
    let t_end = t_end.ok_or_else(|| parse_err(sim.header_line, "missing t_end"))?;

    // triggers
    let triggers = find("triggers")
        .ok_or_else(|| parse_err(1, "missing [triggers] section"))?;
    let mut auto_triggers = false;
    let mut policies: Vec<Option<(TriggerPolicy, usize)>> = vec![None; q + r];
    let labels: Vec<String> = (0..q)
        .map(|i| format!("u{}", i + 1))
        .chain((0..r).map(|j| format!("y{}", j + 1)))
        .collect();
    for line in &triggers.lines {
        if line.text == "auto" {
            auto_triggers = true;
            continue;
        }
        let (key, value) = split_kv(line)?;
        let slot = labels.iter().position(|l| l == key).ok_or_else(|| {
            parse_err(line.no, format!("unknown node '{key}' (nodes: {})", labels.join(" ")))
        })?;
        if policies[slot].is_some() {
            return Err(parse_err(line.no, format!("node '{key}' already has a policy")));
        }
        let kind = if slot < q { NodeKind::Actuator } else { NodeKind::Sensor };
        let index = if slot < q { slot } else { slot - q };
        policies[slot] = Some((parse_policy(value, line.no, kind, index, &model)?, line.no));
    }
    let policies: Vec<TriggerPolicy> = if auto_triggers {
        if policies.iter().any(Option::is_some) {
            return Err(parse_err(
                triggers.header_line,
                "auto triggers cannot be mixed with per-node policies",
            ));
        }
        let (_, certificate) = derive_certificate(&model)
            .map_err(|e| IoError::Validation(format!("cannot derive trigger budget: {e}")))?;
        certificate.node_policies(&model.controller, &model.observer)
    } else {
        let mut out = Vec::with_capacity(q + r);
        for (slot, policy) in policies.into_iter().enumerate() {
            match policy {
                Some((policy, _)) => out.push(policy),
                None => {
                    return Err(parse_err(
                        triggers.header_line,
                        format!("node '{}' has no trigger policy", labels[slot]),
                    ))
                }
            }
        }
        out
    };

    // a fully budget-claiming policy set must fit the certified budget
    let budget_claims: Vec<f64> = policies
        .iter()
        .map(|p| match *p {
            TriggerPolicy::IdealNode { kappa, .. } => Some(kappa),
            _ => None,
        })
        .collect::<Option<Vec<f64>>>()
        .unwrap_or_default();
    if !auto_triggers && !budget_claims.is_empty() {
        if let Ok((_, certificate)) = derive_certificate(&model) {
            let total: f64 = budget_claims.iter().sum();
            if total > certificate.sigma_prime * (1.0 + 1e-12) {
                return Err(IoError::Validation(format!(
                    "ideal trigger budget overdrawn: sum of kappa = {total:e} exceeds sigma_prime = {:e}",
                    certificate.sigma_prime
                )));
            }
        }
    }

    // disturbances
    let mut disturbances = Vec::new();
    if let Some(section) = find("disturbances") {
        for line in &section.lines {
            let rest = line
                .text
                .strip_prefix("impulse:")
                .ok_or_else(|| parse_err(line.no, "expected 'impulse: TIME J1 J2 ...'"))?;
            let values = parse_numbers(rest, line.no)?;
            if values.len() != n + 1 {
                return Err(parse_err(
                    line.no,
                    format!("impulse needs a time and {n} jump entries"),
                ));
            }
            let time = values[0];
            let state_jump = Vector::new(values[1..].to_vec())
                .map_err(|e| parse_err(line.no, e.to_string()))?;
            disturbances.push(DisturbanceEvent { time, state_jump });
        }
    }

    // outputs
    let mut outputs = OutputPaths::default();
    if let Some(section) = find("outputs") {
        for line in &section.lines {
            let (key, value) = split_kv(line)?;
            match key {
                "csv" => outputs.csv = Some(value.to_string()),
                "svg" => outputs.svg = Some(value.to_string()),
                "report" => outputs.report = Some(value.to_string()),
                other => return Err(parse_err(line.no, format!("unknown output key '{other}'"))),
            }
        }
    }

    let display_name = model_name.clone().unwrap_or_else(|| "scenario".to_string());
    let scenario = Scenario {
        model,
        policies,
        x0,
        xhat0,
        t_end,
        dt,
        event_tol,
        disturbances,
        max_events_per_node: DEFAULT_MAX_EVENTS_PER_NODE,
    };
    scenario.validate().map_err(|e| IoError::Validation(e.to_string()))?;
    Ok(ParsedScenario {
        name: display_name,
        scenario,
        baseline_delta,
        auto_triggers,
        outputs,
        model_name,
    })
}

fn fmt_f(value: f64) -> String {
    format!("{value:e}")
}

fn fmt_row(values: &[f64]) -> String {
    values.iter().map(|v| fmt_f(*v)).collect::<Vec<_>>().join(" ")
}

fn serialize_matrix(m: &Matrix) -> String {
    (0..m.rows()).map(|i| fmt_row(m.row(i))).collect::<Vec<_>>().join(" ; ")
}

fn serialize_policy(policy: &TriggerPolicy) -> String {
    match *policy {
        TriggerPolicy::Periodic { delta } => format!("periodic delta={}", fmt_f(delta)),
        TriggerPolicy::EpsilonCrossing { epsilon } => {
            format!("epsilon-crossing epsilon={}", fmt_f(epsilon))
        }
        TriggerPolicy::StateDependent { sigma, epsilon } => {
            format!("state-dependent sigma={} epsilon={}", fmt_f(sigma), fmt_f(epsilon))
        }
        TriggerPolicy::Mixed { epsilon, delta_min } => {
            format!("mixed epsilon={} delta_min={}", fmt_f(epsilon), fmt_f(delta_min))
        }
        TriggerPolicy::RelativeState { sigma } => {
            format!("relative-state sigma={}", fmt_f(sigma))
        }
        TriggerPolicy::NodeRelativeActuator { kappa, l_gamma, tau_min } => format!(
            "node-relative kappa={} lipschitz={} dwell={}",
            fmt_f(kappa),
            fmt_f(l_gamma),
            fmt_f(tau_min)
        ),
        TriggerPolicy::NodeRelativeSensor { kappa, l_h, tau_min } => format!(
            "node-relative kappa={} lipschitz={} dwell={}",
            fmt_f(kappa),
            fmt_f(l_h),
            fmt_f(tau_min)
        ),
        TriggerPolicy::IdealNode { kappa, tau_min } => {
            format!("ideal kappa={} dwell={}", fmt_f(kappa), fmt_f(tau_min))
        }
    }
}

/// Serializes a parsed scenario back to document form. Exact decimal
/// round-tripping relies on shortest-representation float formatting,
/// so parse(serialize(s)) reproduces every number bitwise. Custom
/// nonlinearities have no textual form and are rejected.
pub fn serialize_scenario(parsed: &ParsedScenario) -> Result<String, IoError> {
    let scenario = &parsed.scenario;
    let plant = &scenario.model.plant;
    let mut out = String::new();
    out.push_str("[model]\n");
    if let Some(name) = &parsed.model_name {
        let _ = writeln!(out, "name = {name}");
    } else {
        let _ = writeln!(out, "A = {}", serialize_matrix(plant.a()));
        let _ = writeln!(out, "B = {}", serialize_matrix(plant.b()));
        let _ = writeln!(out, "C = {}", serialize_matrix(plant.c()));
        let _ = writeln!(out, "rho = {}", fmt_f(plant.rho()));
        match plant.nonlinearity() {
            Nonlinearity::Zero => out.push_str("phi = zero\n"),
            Nonlinearity::SineChannel { input, output, gain } => {
                let _ = writeln!(
                    out,
                    "phi = sine input={} output={} gain={}",
                    input + 1,
                    output + 1,
                    fmt_f(*gain)
                );
            }
            Nonlinearity::Custom(_) => {
                return Err(IoError::Validation(
                    "a custom nonlinearity cannot be serialized".to_string(),
                ))
            }
        }
        let widths: Vec<String> = (0..plant.input_partition().node_count())
            .map(|i| plant.input_partition().span(i).1.to_string())
            .collect();
        let _ = writeln!(out, "input_nodes = {}", widths.join(" "));
        let widths: Vec<String> = (0..plant.output_partition().node_count())
            .map(|i| plant.output_partition().span(i).1.to_string())
            .collect();
        let _ = writeln!(out, "output_nodes = {}", widths.join(" "));
    }
    out.push_str("\n[gains]\n");
    let _ = writeln!(out, "K = {}", serialize_matrix(scenario.model.controller.gain()));
    let _ = writeln!(out, "L = {}", serialize_matrix(scenario.model.observer.gain()));
    out.push_str("\n[initial]\n");
    let _ = writeln!(out, "x0 = {}", fmt_row(scenario.x0.as_slice()));
    let _ = writeln!(out, "xhat0 = {}", fmt_row(scenario.xhat0.as_slice()));
    out.push_str("\n[sim]\n");
    let _ = writeln!(out, "t_end = {}", fmt_f(scenario.t_end));
    let _ = writeln!(out, "dt = {}", fmt_f(scenario.dt));
    let _ = writeln!(out, "event_tol = {}", fmt_f(scenario.event_tol));
    if let Some(delta) = parsed.baseline_delta {
        let _ = writeln!(out, "baseline_delta = {}", fmt_f(delta));
    }
    out.push_str("\n[triggers]\n");
    let q = plant.input_partition().node_count();
    for (idx, policy) in scenario.policies.iter().enumerate() {
        let label = if idx < q {
            format!("u{}", idx + 1)
        } else {
            format!("y{}", idx - q + 1)
        };
        let _ = writeln!(out, "{label} = {}", serialize_policy(policy));
    }
    if !scenario.disturbances.is_empty() {
        out.push_str("\n[disturbances]\n");
        for d in &scenario.disturbances {
            let _ = writeln!(out, "impulse: {} {}", fmt_f(d.time), fmt_row(d.state_jump.as_slice()));
        }
    }
    if parsed.outputs != OutputPaths::default() {
        out.push_str("\n[outputs]\n");
        if let Some(p) = &parsed.outputs.csv {
            let _ = writeln!(out, "csv = {p}");
        }
        if let Some(p) = &parsed.outputs.svg {
            let _ = writeln!(out, "svg = {p}");
        }
        if let Some(p) = &parsed.outputs.report {
            let _ = writeln!(out, "report = {p}");
        }
    }
    Ok(out)
}

/// One row per trajectory sample: time, states, estimates, held
/// values, and the two norms, every number with nine significant
/// decimals.
pub fn write_csv(result: &SimulationResult) -> String {
    let mut out = String::new();
    let dims = result.trajectory.first().map(|p| {
        (p.x.dim(), p.xhat.dim(), p.ubar.dim(), p.ybar.dim())
    });
    out.push('t');
    if let Some((n, nh, m, p)) = dims {
        for i in 0..n {
            let _ = write!(out, ",x_{}", i + 1);
        }
        for i in 0..nh {
            let _ = write!(out, ",xhat_{}", i + 1);
        }
        for i in 0..m {
            let _ = write!(out, ",ubar_{}", i + 1);
        }
        for i in 0..p {
            let _ = write!(out, ",ybar_{}", i + 1);
        }
    }
    out.push_str(",norm_x,norm_z\n");
    for point in &result.trajectory {
        let _ = write!(out, "{:.9e}", point.t);
        for v in point.x.as_slice() {
            let _ = write!(out, ",{v:.9e}");
        }
        for v in point.xhat.as_slice() {
            let _ = write!(out, ",{v:.9e}");
        }
        for v in point.ubar.as_slice() {
            let _ = write!(out, ",{v:.9e}");
        }
        for v in point.ybar.as_slice() {
            let _ = write!(out, ",{v:.9e}");
        }
        let _ = write!(out, ",{:.9e},{:.9e}\n", point.norm_x, point.norm_z);
    }
    out
}

fn certificate_section(out: &mut String, cert: &IssCertificate) {
    out.push_str("[certificate]\n");
    let _ = writeln!(out, "L_a3_inv: {}", fmt_f(cert.l_a3_inv));
    let _ = writeln!(out, "L_b: {}", fmt_f(cert.l_b));
    let _ = writeln!(out, "L_G: {}", fmt_f(cert.l_g));
    let _ = writeln!(out, "lambda_c: {}", fmt_f(cert.lambda_c));
    let _ = writeln!(out, "L_beta_c: {}", fmt_f(cert.l_beta_c));
    let _ = writeln!(out, "L_beta_o: {}", fmt_f(cert.l_beta_o));
    let _ = writeln!(out, "L_alpha_c3: {}", fmt_f(cert.l_alpha_c3));
    let _ = writeln!(out, "L_alpha_o3_inv: {}", fmt_f(cert.l_alpha_o3_inv));
    let _ = writeln!(out, "sigma: {}", fmt_f(cert.sigma));
    let _ = writeln!(out, "sigma_prime: {}", fmt_f(cert.sigma_prime));
    let kappa: Vec<String> = cert.kappa.iter().map(|v| fmt_f(*v)).collect();
    let _ = writeln!(out, "kappa: {}", kappa.join(" "));
    let tau: Vec<String> = cert.tau_min.iter().map(|v| fmt_f(*v)).collect();
    let _ = writeln!(out, "tau_min: {}", tau.join(" "));
    for warning in &cert.warnings {
        let _ = writeln!(out, "warning: {warning}");
    }
}

fn trigger_section(out: &mut String, label: &str, stats: &TriggerStats) {
    let _ = writeln!(out, "[triggers {label}]");
    for node in &stats.per_node {
        let name = node.node.label();
        let _ = writeln!(out, "{name}.count: {}", node.count);
        let gap = |g: Option<f64>| g.map(fmt_f).unwrap_or_else(|| "none".to_string());
        let _ = writeln!(out, "{name}.min_gap: {}", gap(node.min_gap));
        let _ = writeln!(out, "{name}.mean_gap: {}", gap(node.mean_gap));
        let _ = writeln!(out, "{name}.max_gap: {}", gap(node.max_gap));
    }
    let _ = writeln!(out, "actuator_total: {}", stats.actuator_total);
    let _ = writeln!(out, "sensor_total: {}", stats.sensor_total);
}

fn convergence_section(out: &mut String, report: &ConvergenceReport) {
    out.push_str("[convergence]\n");
    let settle = report
        .settling_time
        .map(fmt_f)
        .unwrap_or_else(|| "never".to_string());
    let _ = writeln!(out, "settling_time: {settle}");
    let _ = writeln!(out, "threshold: {}", fmt_f(report.threshold));
    let _ = writeln!(out, "peak: {}", fmt_f(report.peak));
    let _ = writeln!(out, "tail_sup_x: {}", fmt_f(report.tail_sup_x));
    let _ = writeln!(out, "tail_sup_z: {}", fmt_f(report.tail_sup_z));
}

/// Certificate-only report, for deriving budgets without running.
pub fn write_certificate_report(certificate: &IssCertificate) -> String {
    let mut out = String::new();
    certificate_section(&mut out, certificate);
    out
}

/// Single-run report: certificate (when the gains admit one), trigger
/// statistics, and convergence measures as line-oriented key: value
/// text.
pub fn write_report(
    certificate: Option<&IssCertificate>,
    stats: &TriggerStats,
    convergence: &ConvergenceReport,
) -> String {
    let mut out = String::new();
    match certificate {
        Some(cert) => certificate_section(&mut out, cert),
        None => out.push_str("[certificate]\nstatus: unavailable\n"),
    }
    out.push('\n');
    trigger_section(&mut out, "event-triggered", stats);
    out.push('\n');
    convergence_section(&mut out, convergence);
    out
}

/// Combined report for the event-triggered versus periodic comparison.
pub fn write_compare_report(
    certificate: Option<&IssCertificate>,
    event: (&TriggerStats, &ConvergenceReport),
    periodic: (&TriggerStats, &ConvergenceReport),
) -> String {
    let mut out = String::new();
    match certificate {
        Some(cert) => certificate_section(&mut out, cert),
        None => out.push_str("[certificate]\nstatus: unavailable\n"),
    }
    out.push('\n');
    trigger_section(&mut out, "event-triggered", event.0);
    out.push('\n');
    convergence_section(&mut out, event.1);
    out.push('\n');
    trigger_section(&mut out, "periodic", periodic.0);
    out.push('\n');
    convergence_section(&mut out, periodic.1);
    out
}

/// Report of an ideal-policy budget audit.
pub fn write_validation_report(
    certificate: &IssCertificate,
    report: &ValidationReport,
) -> String {
    let mut out = String::new();
    certificate_section(&mut out, certificate);
    out.push_str("\n[validation]\n");
    let _ = writeln!(out, "checked_samples: {}", report.checked_samples);
    let _ = writeln!(out, "slack: {}", fmt_f(report.slack));
    let _ = writeln!(out, "violations: {}", report.violations.len());
    for (idx, v) in report.violations.iter().enumerate() {
        let _ = writeln!(
            out,
            "violation.{}: t={} error={} bound={}",
            idx + 1,
            fmt_f(v.t),
            fmt_f(v.error_norm),
            fmt_f(v.bound)
        );
    }
    out
}

const PALETTE: [&str; 8] =
    ["#1965b0", "#dc050c", "#4eb265", "#f7a600", "#882e72", "#7bafde", "#e8601c", "#777777"];

struct Panel {
    x0: f64,
    y0: f64,
    w: f64,
    h: f64,
}

impl Panel {
    fn map(&self, t: f64, v: f64, t_range: (f64, f64), v_range: (f64, f64)) -> (f64, f64) {
        let fx = (t - t_range.0) / (t_range.1 - t_range.0);
        let fy = (v - v_range.0) / (v_range.1 - v_range.0);
        (self.x0 + fx * self.w, self.y0 + self.h - fy * self.h)
    }
}

fn pad_range(lo: f64, hi: f64) -> (f64, f64) {
    if !(hi > lo) {
        return (lo - 1.0, hi + 1.0);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn polyline(out: &mut String, points: &[(f64, f64)], color: &str, dashed: bool) {
    if points.is_empty() {
        return;
    }
    let dash = if dashed { " stroke-dasharray=\"6 3\"" } else { "" };
    let _ = write!(
        out,
        "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.2\"{dash} points=\""
    );
    for (x, y) in points {
        let _ = write!(out, "{x:.2},{y:.2} ");
    }
    out.push_str("\"/>\n");
}

fn frame(out: &mut String, panel: &Panel, title: &str) {
    let _ = write!(
        out,
        "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"none\" stroke=\"#888888\" stroke-width=\"1\"/>\n",
        panel.x0, panel.y0, panel.w, panel.h
    );
    let _ = write!(
        out,
        "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"13\" fill=\"#333333\">{title}</text>\n",
        panel.x0,
        panel.y0 - 6.0
    );
}

/// Static plot of a run: state and estimate traces, norms with the
/// held input, and one cumulative-transmission staircase per node.
pub fn render_svg(result: &SimulationResult) -> String {
    let mut out = String::new();
    let width = 960.0;
    let height = 880.0;
    let _ = write!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">\n"
    );
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n");
    if result.trajectory.is_empty() {
        out.push_str("<text x=\"20\" y=\"40\" font-family=\"sans-serif\" font-size=\"14\">empty trajectory</text>\n</svg>\n");
        return out;
    }
    let rows = &result.trajectory;
    let t_range = (rows.first().unwrap().t, rows.last().unwrap().t);
    let t_range = if t_range.1 > t_range.0 { t_range } else { (t_range.0, t_range.0 + 1.0) };
    let stride = (rows.len() / 2000).max(1);
    let sampled: Vec<&crate::simulator::TrajectoryPoint> = rows
        .iter()
        .step_by(stride)
        .chain(std::iter::once(rows.last().unwrap()))
        .collect();
    let n = rows[0].x.dim();
    let m = rows[0].ubar.dim();

    // panel 1: states and estimates
    let p1 = Panel { x0: 60.0, y0: 30.0, w: 860.0, h: 230.0 };
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for point in &sampled {
        for v in point.x.as_slice().iter().chain(point.xhat.as_slice()) {
            lo = lo.min(*v);
            hi = hi.max(*v);
        }
    }
    let v_range = pad_range(lo, hi);
    frame(&mut out, &p1, "states x_i (solid) and estimates (dashed)");
    for i in 0..n {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<(f64, f64)> =
            sampled.iter().map(|p| p1.map(p.t, p.x[i], t_range, v_range)).collect();
        polyline(&mut out, &pts, color, false);
        let pts: Vec<(f64, f64)> =
            sampled.iter().map(|p| p1.map(p.t, p.xhat[i], t_range, v_range)).collect();
        polyline(&mut out, &pts, color, true);
    }

    // panel 2: norms and held input
    let p2 = Panel { x0: 60.0, y0: 320.0, w: 860.0, h: 230.0 };
    let mut lo = 0.0_f64;
    let mut hi = f64::NEG_INFINITY;
    for point in &sampled {
        hi = hi.max(point.norm_x).max(point.norm_z);
        for v in point.ubar.as_slice() {
            lo = lo.min(*v);
            hi = hi.max(*v);
        }
    }
    let v_range = pad_range(lo, hi);
    frame(&mut out, &p2, "norm of x (black), norm of x - xhat (gray), held input");
    let pts: Vec<(f64, f64)> =
        sampled.iter().map(|p| p2.map(p.t, p.norm_x, t_range, v_range)).collect();
    polyline(&mut out, &pts, "#000000", false);
    let pts: Vec<(f64, f64)> =
        sampled.iter().map(|p| p2.map(p.t, p.norm_z, t_range, v_range)).collect();
    polyline(&mut out, &pts, "#999999", true);
    for j in 0..m {
        let color = PALETTE[j % PALETTE.len()];
        let pts: Vec<(f64, f64)> =
            sampled.iter().map(|p| p2.map(p.t, p.ubar[j], t_range, v_range)).collect();
        polyline(&mut out, &pts, color, false);
    }

    // panel 3: cumulative transmissions per node
    let p3 = Panel { x0: 60.0, y0: 610.0, w: 860.0, h: 230.0 };
    let max_count = result
        .summary
        .iter()
        .map(|s| s.count)
        .max()
        .unwrap_or(1)
        .max(1) as f64;
    let v_range = (0.0, max_count * 1.05);
    frame(&mut out, &p3, "cumulative transmissions per node");
    for (idx, summary) in result.summary.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        let mut pts: Vec<(f64, f64)> = Vec::new();
        let mut count = 0.0;
        pts.push(p3.map(t_range.0, 0.0, t_range, v_range));
        for record in result.trigger_log.iter().filter(|r| r.node == summary.node) {
            pts.push(p3.map(record.t, count, t_range, v_range));
            count += 1.0;
            pts.push(p3.map(record.t, count, t_range, v_range));
        }
        pts.push(p3.map(t_range.1, count, t_range, v_range));
        polyline(&mut out, &pts, color, false);
        let _ = write!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"12\" fill=\"{color}\">{} ({})</text>\n",
            p3.x0 + 8.0 + 110.0 * idx as f64,
            p3.y0 + 16.0,
            summary.node.label(),
            summary.count
        );
    }
    let _ = write!(
        out,
        "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#333333\">t in [{:.3}, {:.3}]</text>\n",
        p3.x0,
        p3.y0 + p3.h + 20.0,
        t_range.0,
        t_range.1
    );
    out.push_str("</svg>\n");
    out
}

/// Writes through a sibling temp file and renames over the target, so
/// a crash never leaves a truncated document behind.
pub fn atomic_write(path: &Path, contents: &str) -> Result<(), IoError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let file_name = path
        .file_name()
        .ok_or_else(|| IoError::Validation(format!("not a file path: {}", path.display())))?;
    let mut tmp_name = file_name.to_os_string();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}
