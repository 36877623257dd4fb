//! Stability-certificate construction: from quadratic Lyapunov pairs
//! for the control and observation error loops to a full sampling
//! budget (sigma, per-node kappa, per-node dwell times).
//!
//! The chain works with the comparison functions of the composite
//! Lyapunov function V(X) = lambda_c 2 sqrt(V_c(xhat)) + 2 sqrt(V_o(z)).
//! All comparison functions are linear, so only their slopes appear.

use super::{
    allocate_kappa, euclidean_margin, min_interevent_actuator, min_interevent_sensor, sigma_bound,
    TriggerError, TriggerPolicy,
};
use crate::models::{LinearController, LipschitzAffinePlant, LuenbergerObserver, ModelBundle};
use crate::num::{is_hurwitz, solve_lyapunov, spectral_norm, sym_eig_bounds, Matrix};

/// Quadratic Lyapunov certificates V_c(x) = x' P_c x for the control
/// loop A + BK and V_o(z) = z' P_o z for the observation loop A - LC,
/// with declared decay rates: d/dt V <= -eta ||arg||^2 along the
/// respective loop.
#[derive(Clone, Debug)]
pub struct LyapunovPair {
    p_c: Matrix,
    eta_c: f64,
    p_o: Matrix,
    eta_o: f64,
}

impl LyapunovPair {
    pub fn new(p_c: Matrix, eta_c: f64, p_o: Matrix, eta_o: f64) -> Result<Self, TriggerError> {
        check_spd(&p_c, "P_c")?;
        check_spd(&p_o, "P_o")?;
        if !(eta_c > 0.0) || !eta_c.is_finite() {
            return Err(TriggerError::NonPositiveConstant("eta_c"));
        }
        if !(eta_o > 0.0) || !eta_o.is_finite() {
            return Err(TriggerError::NonPositiveConstant("eta_o"));
        }
        Ok(LyapunovPair { p_c, eta_c, p_o, eta_o })
    }

    pub fn p_c(&self) -> &Matrix {
        &self.p_c
    }

    pub fn eta_c(&self) -> f64 {
        self.eta_c
    }

    pub fn p_o(&self) -> &Matrix {
        &self.p_o
    }

    pub fn eta_o(&self) -> f64 {
        self.eta_o
    }
}

fn check_spd(p: &Matrix, name: &'static str) -> Result<(), TriggerError> {
    if !p.is_square() {
        return Err(TriggerError::NotPositiveDefinite(name));
    }
    let defect = (p - &p.transpose()).max_abs();
    if defect > 1e-9 * p.norm_inf().max(f64::MIN_POSITIVE) {
        return Err(TriggerError::NotPositiveDefinite(name));
    }
    let (lo, _) = sym_eig_bounds(p)?;
    if lo <= 0.0 {
        return Err(TriggerError::NotPositiveDefinite(name));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, Default)]
pub struct CertificateOptions {
    /// The inverse-slope assembly uses the term lambda_c / L_alpha_c3 as
    /// printed in its derivation. Setting this uses lambda_c *
    /// L_alpha_c3_inv instead; the two agree because the comparison
    /// functions are linear (the slopes are exact reciprocals), so this
    /// only reorders floating-point operations.
    pub scaled_alpha_term: bool,
}

/// Complete sampling budget. Per-node lists are ordered actuator nodes
/// first, then sensor nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct IssCertificate {
    pub l_a3_inv: f64,
    pub l_b: f64,
    pub l_g: f64,
    pub lambda_c: f64,
    pub l_beta_c: f64,
    pub l_beta_o: f64,
    pub l_alpha_c3: f64,
    pub l_alpha_o3_inv: f64,
    pub sigma: f64,
    pub sigma_prime: f64,
    pub kappa: Vec<f64>,
    pub tau_min: Vec<f64>,
    pub actuator_node_count: usize,
    pub scaled_alpha_term: bool,
    pub warnings: Vec<String>,
}

impl IssCertificate {
    /// Re-asserts the construction invariants on an arbitrary
    /// certificate value (e.g. one deserialized or edited by hand).
    pub fn validate(&self) -> Result<(), TriggerError> {
        for (value, name) in [
            (self.l_a3_inv, "L_a3_inv"),
            (self.l_b, "L_b"),
            (self.l_g, "L_G"),
            (self.lambda_c, "lambda_c"),
            (self.l_alpha_c3, "L_alpha_c3"),
            (self.l_alpha_o3_inv, "L_alpha_o3_inv"),
            (self.sigma, "sigma"),
            (self.sigma_prime, "sigma_prime"),
        ] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(TriggerError::NonPositiveConstant(name));
            }
        }
        if self.sigma >= sigma_bound(self.l_a3_inv, self.l_b)? {
            return Err(TriggerError::CertificateDegenerate);
        }
        if self.lambda_c * self.l_alpha_o3_inv * self.l_beta_c >= 1.0 {
            return Err(TriggerError::CertificateDegenerate);
        }
        if self.kappa.len() != self.tau_min.len() || self.actuator_node_count > self.kappa.len() {
            return Err(TriggerError::CertificateDegenerate);
        }
        let total: f64 = self.kappa.iter().sum();
        if total > self.sigma_prime * (1.0 + 1e-12) {
            return Err(TriggerError::BudgetExceeded { total, budget: self.sigma_prime });
        }
        for (kappa, tau) in self.kappa.iter().zip(&self.tau_min) {
            if *kappa > 0.0 && !(*tau > 0.0) {
                return Err(TriggerError::NonPositiveConstant("tau_min"));
            }
        }
        Ok(())
    }

    /// Implementable per-node policies: relative thresholds plus dwell
    /// times, actuators first.
    pub fn node_policies(
        &self,
        ctrl: &LinearController,
        obs: &LuenbergerObserver,
    ) -> Vec<TriggerPolicy> {
        let q = self.actuator_node_count;
        let mut policies = Vec::with_capacity(self.kappa.len());
        for i in 0..q {
            policies.push(TriggerPolicy::NodeRelativeActuator {
                kappa: self.kappa[i],
                l_gamma: ctrl.node_lipschitz(i),
                tau_min: self.tau_min[i],
            });
        }
        for j in q..self.kappa.len() {
            policies.push(TriggerPolicy::NodeRelativeSensor {
                kappa: self.kappa[j],
                l_h: obs.output_lipschitz(),
                tau_min: self.tau_min[j],
            });
        }
        policies
    }

    /// Diagnostic policies referencing the true extended-state norm.
    pub fn ideal_policies(&self) -> Vec<TriggerPolicy> {
        self.kappa
            .iter()
            .zip(&self.tau_min)
            .map(|(kappa, tau_min)| TriggerPolicy::IdealNode { kappa: *kappa, tau_min: *tau_min })
            .collect()
    }
}

pub fn build_certificate(
    plant: &LipschitzAffinePlant,
    ctrl: &LinearController,
    obs: &LuenbergerObserver,
    lyap: &LyapunovPair,
) -> Result<IssCertificate, TriggerError> {
    build_certificate_with(plant, ctrl, obs, lyap, CertificateOptions::default())
}

pub fn build_certificate_with(
    plant: &LipschitzAffinePlant,
    ctrl: &LinearController,
    obs: &LuenbergerObserver,
    lyap: &LyapunovPair,
    opts: CertificateOptions,
) -> Result<IssCertificate, TriggerError> {
    let a = plant.a();
    let bk = plant.b().matmul(ctrl.gain());
    let lc = obs.gain().matmul(plant.c());
    let control_loop = a + &bk;
    let observer_loop = a - &lc;
    if !is_hurwitz(&control_loop)? {
        return Err(TriggerError::NotHurwitz("A + BK"));
    }
    if !is_hurwitz(&observer_loop)? {
        return Err(TriggerError::NotHurwitz("A - LC"));
    }
    check_decay(&control_loop, lyap.p_c(), lyap.eta_c())?;
    check_decay(&observer_loop, lyap.p_o(), lyap.eta_o())?;

    let (lam_min_c, lam_max_c) = sym_eig_bounds(lyap.p_c())?;
    let (lam_min_o, lam_max_o) = sym_eig_bounds(lyap.p_o())?;
    let n_bk = spectral_norm(&bk)?;
    let n_lc = spectral_norm(&lc)?;
    let n_k = spectral_norm(ctrl.gain())?;

    let l_alpha_c3 = lyap.eta_c() / lam_max_c.sqrt();
    let l_alpha_c3_inv = lam_max_c.sqrt() / lyap.eta_c();
    let l_beta_c = (n_bk + 2.0 * n_lc) / lam_min_c.sqrt();
    let l_alpha_o3_inv = lam_max_o.sqrt() / lyap.eta_o();
    let l_beta_o = 2.0 * n_lc / lam_min_o.sqrt();

    // lambda_c weights the control half of the composite function; this
    // choice pins the assembly denominator 1 - lambda_c * L_alpha_o3_inv
    // * L_beta_c at exactly one half. A vanishing L_beta_c frees the
    // choice entirely; take 1.
    let lambda_c =
        if l_beta_c == 0.0 { 1.0 } else { 1.0 / (2.0 * l_alpha_o3_inv * l_beta_c) };
    let denom = 1.0 - lambda_c * l_alpha_o3_inv * l_beta_c;
    if !(denom > 0.0) {
        return Err(TriggerError::CertificateDegenerate);
    }
    let first_term = if opts.scaled_alpha_term {
        lambda_c * l_alpha_c3_inv
    } else {
        lambda_c / l_alpha_c3
    };
    let l_a3_inv = first_term.max(l_alpha_o3_inv / denom);
    let l_b = l_beta_c + l_beta_o;

    let block = Matrix::block_2x2(
        &control_loop,
        &lc,
        &Matrix::zeros(a.rows(), a.rows()),
        &observer_loop,
    );
    let l_g = spectral_norm(&block)? + plant.rho() * (1.0 + n_k) + n_bk + n_lc;

    let sigma = sigma_bound(l_a3_inv, l_b)? / 2.0;
    let dim_e = plant.input_dim() + plant.output_dim();
    let sigma_prime = euclidean_margin(sigma, dim_e);

    let q = ctrl.node_count();
    let r = plant.output_partition().node_count();
    let kappa = allocate_kappa(sigma_prime, q + r);
    let mut tau_min = Vec::with_capacity(q + r);
    let mut warnings = Vec::new();
    for i in 0..q {
        tau_min.push(min_interevent_actuator(l_g, sigma_prime, kappa[i], ctrl.node_lipschitz(i))?);
    }
    for j in 0..r {
        tau_min.push(min_interevent_sensor(
            l_g,
            sigma_prime,
            kappa[q + j],
            obs.node_output_lipschitz(j),
        )?);
    }
    for (node, (kappa, tau)) in kappa.iter().zip(&tau_min).enumerate() {
        if *kappa == 0.0 || *tau == 0.0 {
            warnings.push(format!("ZeroKappa: node {node} has a degenerate budget share"));
        }
    }

    let cert = IssCertificate {
        l_a3_inv,
        l_b,
        l_g,
        lambda_c,
        l_beta_c,
        l_beta_o,
        l_alpha_c3,
        l_alpha_o3_inv,
        sigma,
        sigma_prime,
        kappa,
        tau_min,
        actuator_node_count: q,
        scaled_alpha_term: opts.scaled_alpha_term,
        warnings,
    };
    cert.validate()?;
    Ok(cert)
}

/// Builds a certificate for a model with no externally supplied
/// Lyapunov data: both loop equations are solved against the identity,
/// so each quadratic form decays at unit rate by construction.
pub fn derive_certificate(
    bundle: &ModelBundle,
) -> Result<(LyapunovPair, IssCertificate), TriggerError> {
    let plant = &bundle.plant;
    let a = plant.a();
    let control_loop = a + &plant.b().matmul(bundle.controller.gain());
    let observer_loop = a - &bundle.observer.gain().matmul(plant.c());
    let eye = Matrix::identity(a.rows());
    let p_c = solve_lyapunov(&control_loop, &eye)?;
    let p_o = solve_lyapunov(&observer_loop, &eye)?;
    let lyap = LyapunovPair::new(p_c, 1.0, p_o, 1.0)?;
    let cert = build_certificate(plant, &bundle.controller, &bundle.observer, &lyap)?;
    Ok((lyap, cert))
}

/// Verifies the declared decay rate: Q = -(M' P + P M) must satisfy
/// lambda_min(Q) >= eta, i.e. d/dt (x' P x) <= -eta ||x||^2 along
/// dx/dt = M x.
fn check_decay(m: &Matrix, p: &Matrix, eta: f64) -> Result<(), TriggerError> {
    let mt_p = m.transpose().matmul(p);
    let q = (&mt_p + &p.matmul(m)).scale(-1.0);
    // symmetrize roundoff before the eigenvalue bound
    let q = (&q + &q.transpose()).scale(0.5);
    let (lam_min, _) = sym_eig_bounds(&q)?;
    if lam_min < eta * (1.0 - 1e-9) {
        return Err(TriggerError::LyapunovResidualTooLarge);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::builtin_model;
    use crate::num::solve_lyapunov;

    fn rel_close(got: f64, want: f64, tol: f64) -> bool {
        (got - want).abs() <= tol * want.abs().max(1e-300)
    }

    fn scalar_pair() -> (crate::models::ModelBundle, LyapunovPair) {
        let m = builtin_model("scalar-linear").unwrap();
        let p = Matrix::from_rows(&[vec![0.5]]).unwrap();
        let lyap = LyapunovPair::new(p.clone(), 2.0, p, 2.0).unwrap();
        (m, lyap)
    }

    #[test]
    fn scalar_chain_matches_hand_computation() {
        let (m, lyap) = scalar_pair();
        let cert = build_certificate(&m.plant, &m.controller, &m.observer, &lyap).unwrap();
        assert!(rel_close(cert.l_alpha_c3, 2.82842712474619, 1e-12));
        assert!(rel_close(cert.l_beta_c, 4.242640687119285, 1e-12));
        assert!(rel_close(cert.l_alpha_o3_inv, 0.3535533905932738, 1e-12));
        assert!(rel_close(cert.l_beta_o, 2.82842712474619, 1e-12));
        assert!(rel_close(cert.lambda_c, 1.0 / 3.0, 1e-12));
        assert!(rel_close(cert.l_a3_inv, 0.7071067811865476, 1e-12));
        assert!(rel_close(cert.l_b, 7.071067811865475, 1e-12));
        assert!(rel_close(cert.l_g, 4.561552812808831, 1e-12));
        assert!(rel_close(cert.sigma, 0.1, 1e-12));
        assert!(rel_close(cert.sigma_prime, 0.07071067811865475, 1e-12));
        assert_eq!(cert.kappa.len(), 2);
        assert!(rel_close(cert.kappa[0], 0.035355339059327376, 1e-12));
        assert!(rel_close(cert.tau_min[0], 0.007113832035295799, 1e-12));
        assert!(rel_close(cert.tau_min[1], 0.007113832035295799, 1e-12));
        assert!(cert.warnings.is_empty());
        cert.validate().unwrap();
    }

    #[test]
    fn benchmark_chain_matches_recorded_values() {
        let m = builtin_model("flexible-link").unwrap();
        let a = m.plant.a();
        let control_loop = a + &m.plant.b().matmul(m.controller.gain());
        let observer_loop = a - &m.observer.gain().matmul(m.plant.c());
        let p_c = solve_lyapunov(&control_loop, &Matrix::identity(4)).unwrap();
        let p_o = solve_lyapunov(&observer_loop, &Matrix::identity(4)).unwrap();
        let lyap = LyapunovPair::new(p_c, 1.0, p_o, 1.0).unwrap();
        let cert = build_certificate(&m.plant, &m.controller, &m.observer, &lyap).unwrap();

        let tol = 1e-8;
        assert!(rel_close(cert.l_alpha_c3, 0.31002887845343347, tol));
        assert!(rel_close(cert.l_beta_c, 2121.2609360887404, tol));
        assert!(rel_close(cert.l_alpha_o3_inv, 1.4140167668274666, tol));
        assert!(rel_close(cert.l_beta_o, 701.8720718326483, tol));
        assert!(rel_close(cert.lambda_c, 1.666945307440174e-4, tol));
        assert!(rel_close(cert.l_a3_inv, 2.8280335336549336, tol));
        assert!(rel_close(cert.l_b, 2823.1330079213885, tol));
        assert!(rel_close(cert.l_g, 557.6152544934617, tol));
        assert!(rel_close(cert.sigma, 6.26259186752376e-05, tol));
        assert!(rel_close(cert.sigma_prime, 3.615709100539604e-05, tol));
        assert_eq!(cert.kappa.len(), 3);
        assert_eq!(cert.actuator_node_count, 1);
        for k in &cert.kappa {
            assert!(rel_close(*k, 1.2052363668465348e-05, tol));
        }
        assert!(rel_close(cert.tau_min[0], 2.370973528353694e-09, tol));
        assert!(rel_close(cert.tau_min[1], 2.161320943449029e-08, tol));
        assert!(rel_close(cert.tau_min[2], 2.161320943449029e-08, tol));
        assert!(cert.tau_min.iter().all(|t| *t > 0.0));
        cert.validate().unwrap();
    }

    #[test]
    fn scaled_alpha_term_changes_nothing_numerically_material() {
        let (m, lyap) = scalar_pair();
        let printed = build_certificate(&m.plant, &m.controller, &m.observer, &lyap).unwrap();
        let scaled = build_certificate_with(
            &m.plant,
            &m.controller,
            &m.observer,
            &lyap,
            CertificateOptions { scaled_alpha_term: true },
        )
        .unwrap();
        assert!(rel_close(printed.l_a3_inv, scaled.l_a3_inv, 1e-14));
        assert!(printed.sigma > 0.0 && scaled.sigma > 0.0);
        assert!(!printed.scaled_alpha_term && scaled.scaled_alpha_term);
    }

    #[test]
    fn unstabilized_loop_is_rejected() {
        let m = builtin_model("flexible-link").unwrap();
        let zero_gain = LinearController::new(
            Matrix::zeros(1, 4),
            m.plant.input_partition().clone(),
        )
        .unwrap();
        let p = Matrix::identity(4);
        let lyap = LyapunovPair::new(p.clone(), 1.0, p, 1.0).unwrap();
        assert_eq!(
            build_certificate(&m.plant, &zero_gain, &m.observer, &lyap).unwrap_err(),
            TriggerError::NotHurwitz("A + BK")
        );
    }

    #[test]
    fn overstated_decay_rate_is_rejected() {
        let m = builtin_model("scalar-linear").unwrap();
        let p = Matrix::from_rows(&[vec![0.5]]).unwrap();
        // A + BK = -2 with P = 0.5 yields Q = 2; eta = 3 overstates it.
        let lyap = LyapunovPair::new(p.clone(), 3.0, p, 2.0).unwrap();
        assert_eq!(
            build_certificate(&m.plant, &m.controller, &m.observer, &lyap).unwrap_err(),
            TriggerError::LyapunovResidualTooLarge
        );
    }

    #[test]
    fn indefinite_pair_is_rejected_at_construction() {
        let p_bad = Matrix::from_rows(&[vec![-0.5]]).unwrap();
        let p_ok = Matrix::from_rows(&[vec![0.5]]).unwrap();
        assert_eq!(
            LyapunovPair::new(p_bad, 1.0, p_ok.clone(), 1.0).unwrap_err(),
            TriggerError::NotPositiveDefinite("P_c")
        );
        let asym = Matrix::from_rows(&[vec![1.0, 0.5], vec![-0.5, 1.0]]).unwrap();
        assert_eq!(
            LyapunovPair::new(asym, 1.0, Matrix::identity(2), 1.0).unwrap_err(),
            TriggerError::NotPositiveDefinite("P_c")
        );
        assert_eq!(
            LyapunovPair::new(p_ok.clone(), 0.0, p_ok, 1.0).unwrap_err(),
            TriggerError::NonPositiveConstant("eta_c")
        );
    }

    #[test]
    fn budget_is_conserved_and_policies_derive() {
        let (m, lyap) = scalar_pair();
        let cert = build_certificate(&m.plant, &m.controller, &m.observer, &lyap).unwrap();
        let total: f64 = cert.kappa.iter().sum();
        assert_eq!(total, cert.sigma_prime);

        let policies = cert.node_policies(&m.controller, &m.observer);
        assert_eq!(policies.len(), 2);
        assert!(matches!(policies[0], TriggerPolicy::NodeRelativeActuator { .. }));
        assert!(matches!(policies[1], TriggerPolicy::NodeRelativeSensor { .. }));

        let ideal = cert.ideal_policies();
        assert_eq!(ideal.len(), 2);
        assert!(ideal.iter().all(|p| matches!(p, TriggerPolicy::IdealNode { .. })));
    }

    #[test]
    fn validator_catches_budget_overruns() {
        let (m, lyap) = scalar_pair();
        let mut cert = build_certificate(&m.plant, &m.controller, &m.observer, &lyap).unwrap();
        for k in &mut cert.kappa {
            *k *= 2.0;
        }
        match cert.validate().unwrap_err() {
            TriggerError::BudgetExceeded { total, budget } => {
                assert!(total > budget);
            }
            other => panic!("expected BudgetExceeded, got {other}"),
        }
    }

    #[test]
    fn derived_certificate_reproduces_the_benchmark_chain() {
        let m = builtin_model("flexible-link").unwrap();
        let (lyap, cert) = derive_certificate(&m).unwrap();
        assert_eq!(lyap.eta_c(), 1.0);
        assert_eq!(lyap.eta_o(), 1.0);
        assert!(rel_close(cert.sigma_prime, 3.615709100539604e-5, 1e-12));
        assert!(rel_close(cert.l_g, 557.6152544934617, 1e-12));
        assert_eq!(cert.kappa.len(), 3);
        assert!(rel_close(cert.tau_min[0], 2.370973528353694e-9, 1e-10));

        // a model whose loops are not Hurwitz admits no certificate
        let mut open = builtin_model("double-integrator").unwrap();
        open.controller = LinearController::new(
            Matrix::zeros(1, 2),
            open.plant.input_partition().clone(),
        )
        .unwrap();
        assert!(derive_certificate(&open).is_err());
    }
}
