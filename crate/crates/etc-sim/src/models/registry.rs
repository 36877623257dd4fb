//! Built-in models addressable by name from scenario files.

use super::{
    LinearController, LipschitzAffinePlant, LuenbergerObserver, NodePartition, Nonlinearity,
};
use crate::num::Matrix;

/// A plant together with the gains designed for it.
#[derive(Clone, Debug)]
pub struct ModelBundle {
    pub name: &'static str,
    pub plant: LipschitzAffinePlant,
    pub controller: LinearController,
    pub observer: LuenbergerObserver,
}

pub fn builtin_model_names() -> &'static [&'static str] {
    &["flexible-link", "double-integrator", "scalar-linear"]
}

pub fn builtin_model(name: &str) -> Option<ModelBundle> {
    match name {
        "flexible-link" => Some(flexible_link()),
        "double-integrator" => Some(double_integrator()),
        "scalar-linear" => Some(scalar_linear()),
        _ => None,
    }
}

/// Flexible-link robot arm: motor angle/velocity and link angle/velocity,
/// with a gravity torque 3.3 sin(x3) on the link acceleration. One
/// actuator node (scalar torque input) and two sensor nodes (motor angle
/// and velocity measured separately).
fn flexible_link() -> ModelBundle {
    let a = Matrix::from_rows(&[
        vec![0.0, 1.0, 0.0, 0.0],
        vec![-48.6, -1.25, 48.6, 0.0],
        vec![0.0, 0.0, 0.0, 1.0],
        vec![19.5, 0.0, -19.5, 0.0],
    ])
    .unwrap();
    let b = Matrix::from_rows(&[vec![0.0], vec![21.6], vec![0.0], vec![0.0]]).unwrap();
    let c = Matrix::from_rows(&[vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 1.0, 0.0, 0.0]]).unwrap();
    let plant = LipschitzAffinePlant::new(
        a,
        b,
        c,
        Nonlinearity::SineChannel { input: 2, output: 3, gain: 3.3 },
        3.3,
        NodePartition::single(1),
        NodePartition::scalar_nodes(2),
    )
    .unwrap();
    // u = K xhat with the sign fixed so A + BK is Hurwitz
    // (spectrum near -9.60, -5.76 +/- 1.39i, -4.34); the same magnitudes
    // appear elsewhere under the u = -Kx convention.
    let k = Matrix::from_rows(&[vec![-7.8428, -1.1212, 4.3666, -1.1243]]).unwrap();
    let controller = LinearController::new(k, plant.input_partition().clone()).unwrap();
    let l = Matrix::from_rows(&[
        vec![9.3334, 1.0001],
        vec![-48.7804, 22.3665],
        vec![-0.0524, 3.3194],
        vec![19.4066, -0.3167],
    ])
    .unwrap();
    let observer = LuenbergerObserver::new(l, &plant).unwrap();
    ModelBundle { name: "flexible-link", plant, controller, observer }
}

/// Double integrator with position measurement; poles placed at -1, -2
/// for both the control and the observer error dynamics.
fn double_integrator() -> ModelBundle {
    let a = Matrix::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
    let b = Matrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
    let c = Matrix::from_rows(&[vec![1.0, 0.0]]).unwrap();
    let plant = LipschitzAffinePlant::new(
        a,
        b,
        c,
        Nonlinearity::Zero,
        0.0,
        NodePartition::single(1),
        NodePartition::single(1),
    )
    .unwrap();
    let k = Matrix::from_rows(&[vec![-2.0, -3.0]]).unwrap();
    let controller = LinearController::new(k, plant.input_partition().clone()).unwrap();
    let l = Matrix::from_rows(&[vec![3.0], vec![2.0]]).unwrap();
    let observer = LuenbergerObserver::new(l, &plant).unwrap();
    ModelBundle { name: "double-integrator", plant, controller, observer }
}

/// One-dimensional test plant; every constant is 1 in magnitude.
fn scalar_linear() -> ModelBundle {
    let plant = LipschitzAffinePlant::new(
        Matrix::from_rows(&[vec![-1.0]]).unwrap(),
        Matrix::from_rows(&[vec![1.0]]).unwrap(),
        Matrix::from_rows(&[vec![1.0]]).unwrap(),
        Nonlinearity::Zero,
        0.0,
        NodePartition::single(1),
        NodePartition::single(1),
    )
    .unwrap();
    let controller =
        LinearController::new(Matrix::from_rows(&[vec![-1.0]]).unwrap(), NodePartition::single(1))
            .unwrap();
    let observer =
        LuenbergerObserver::new(Matrix::from_rows(&[vec![1.0]]).unwrap(), &plant).unwrap();
    ModelBundle { name: "scalar-linear", plant, controller, observer }
}
