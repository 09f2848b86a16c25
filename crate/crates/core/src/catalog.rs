//! Small reference systems with known transfer functions.

use crate::interconnect::{ControllerTemplate, DelayTermSeries, PlantDims, PlantSpec};
use crate::linalg::{from_rows, zeros, RMat};
use crate::model::DdaeSystem;

fn m(rows: &[&[f64]]) -> RMat {
    from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>())
}

/// Two-state DDAE realizing
///
/// ```text
/// T(s) = (s - a + c) / ((s - a)(1 - k1 e^{-s t1} - k2 e^{-s t2}) + 1)
/// ```
///
/// whose asymptotic transfer function is `1 / (1 - k1 e^{-s t1} - k2 e^{-s t2})`.
pub fn two_delay_loop(a: f64, c: f64, k1: f64, k2: f64, tau1: f64, tau2: f64) -> DdaeSystem {
    DdaeSystem::new(
        m(&[&[1.0, 0.0], &[0.0, 0.0]]),
        vec![
            m(&[&[a, -1.0], &[1.0, -1.0]]),
            m(&[&[0.0, 0.0], &[0.0, k1]]),
            m(&[&[0.0, 0.0], &[0.0, k2]]),
        ],
        m(&[&[0.0], &[1.0]]),
        m(&[&[-c, 1.0]]),
        vec![tau1, tau2],
    )
    .expect("consistent dimensions")
}

/// `(s + 2.1) / ((s + 0.1)(1 - 0.25 e^{-s t1} + 0.5 e^{-s t2}) + 1)`.
pub fn eq10_system(tau1: f64, tau2: f64) -> DdaeSystem {
    two_delay_loop(-0.1, 2.0, 0.25, -0.5, tau1, tau2)
}

/// `(s + 2) / (s (1 - e^{-s t1}/16 + e^{-s t2}/2) + 1)`.
pub fn eq21_system(tau1: f64, tau2: f64) -> DdaeSystem {
    two_delay_loop(0.0, 2.0, 1.0 / 16.0, -0.5, tau1, tau2)
}

/// Descriptor plant of the two-gain static design example, with the
/// disturbance as its only input and no controller attached.
pub fn second_example_plant_system() -> DdaeSystem {
    DdaeSystem::new(
        m(&[&[1.0, 0.0], &[0.0, 0.0]]),
        vec![m(&[&[-0.1, -1.0], &[1.0, -1.0]])],
        m(&[&[0.0], &[1.0]]),
        m(&[&[2.0, -1.0]]),
        vec![],
    )
    .expect("consistent dimensions")
}

/// Descriptor plant with delayed measurements `y = [x2(t - t1); x2(t - t2)]`
/// and a static gain `u = K y` initialized at `K = (0.25, -0.5)`.
pub fn second_example_loop(tau1: f64, tau2: f64) -> (PlantSpec, ControllerTemplate) {
    let mut plant = PlantSpec::new(PlantDims {
        n_g: 2,
        n_w: 1,
        n_u: 1,
        n_y: 2,
        n_z: 1,
    });
    plant.e = Some(m(&[&[1.0, 0.0], &[0.0, 0.0]]));
    plant.a = DelayTermSeries::single(0.0, m(&[&[-0.1, -1.0], &[1.0, -1.0]]));
    plant.b1 = DelayTermSeries::single(0.0, m(&[&[0.0], &[1.0]]));
    plant.b2 = DelayTermSeries::single(0.0, m(&[&[0.0], &[1.0]]));
    plant.c1 = DelayTermSeries::single(0.0, m(&[&[2.0, -1.0]]));
    plant.c2 = DelayTermSeries::single(tau1, m(&[&[0.0, 1.0], &[0.0, 0.0]]))
        .with(tau2, m(&[&[0.0, 0.0], &[0.0, 1.0]]));
    (plant, ControllerTemplate::static_gain(m(&[&[0.25, -0.5]])))
}

/// Scalar plant `x' = -x - 0.5 x(t-1) + w + u(t-0.2)`, `z = x + u(t-0.2)`,
/// `y = x` under `u = K y`, giving
/// `T(s) = (1 + K e^{-0.2 s}) / (s + 1 - K e^{-0.2 s} + 0.5 e^{-s})`.
pub fn scalar_loop(k: f64) -> (PlantSpec, ControllerTemplate) {
    let mut plant = PlantSpec::new(PlantDims {
        n_g: 1,
        n_w: 1,
        n_u: 1,
        n_y: 1,
        n_z: 1,
    });
    plant.a = DelayTermSeries::single(0.0, m(&[&[-1.0]])).with(1.0, m(&[&[-0.5]]));
    plant.b1 = DelayTermSeries::single(0.0, m(&[&[1.0]]));
    plant.b2 = DelayTermSeries::single(0.2, m(&[&[1.0]]));
    plant.c1 = DelayTermSeries::single(0.0, m(&[&[1.0]]));
    plant.d12 = DelayTermSeries::single(0.2, m(&[&[1.0]]));
    plant.c2 = DelayTermSeries::single(0.0, m(&[&[1.0]]));
    (plant, ControllerTemplate::static_gain(m(&[&[k]])))
}

/// Retarded system with a delayed output feedthrough,
/// `x' = sum_{i>=2} M_i x(t - t_i) + B1 w`, `z = P x + w + N1 w(t - t1)`,
/// in slack form `X = [x; g_d; g_w]`. Only `t1` enters the asymptotic
/// transfer function `I + N1 e^{-j theta}`.
pub fn feedthrough_example(n1: f64, delays: &[f64]) -> DdaeSystem {
    assert!(delays.len() >= 2);
    let n = 3;
    let mut a0 = zeros(n, n);
    a0[(1, 1)] = -1.0;
    a0[(1, 2)] = 1.0;
    a0[(2, 2)] = -1.0;
    let mut a = vec![a0];
    let mut a1 = zeros(n, n);
    a1[(1, 2)] = n1;
    a.push(a1);
    for (i, _) in delays.iter().enumerate().skip(1) {
        let mut ai = zeros(n, n);
        ai[(0, 0)] = -0.5 / i as f64;
        a.push(ai);
    }
    let mut e = zeros(n, n);
    e[(0, 0)] = 1.0;
    let mut b = zeros(n, 1);
    b[(0, 0)] = 1.0;
    b[(2, 0)] = 1.0;
    let c = m(&[&[1.0, 1.0, 0.0]]);
    DdaeSystem::new(e, a, b, c, delays.to_vec()).expect("consistent dimensions")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::transfer;
    use faer::c64;

    #[test]
    fn two_delay_loop_matches_closed_form() {
        let sys = eq21_system(1.0, 2.0);
        for w in [0.1, 1.7721, 40.0] {
            let s = c64::new(0.0, w);
            let d = c64::new(1.0, 0.0) - (-s).exp() / 16.0 + (-s * 2.0).exp() * 0.5;
            let expected = (s + 2.0) / (s * d + 1.0);
            let t = transfer(&sys, s).unwrap()[(0, 0)];
            assert!((t - expected).norm() < 1e-13);
        }
    }

    #[test]
    fn feedthrough_example_high_frequency_limit() {
        let sys = feedthrough_example(0.6, &[0.7, 1.3, 2.9]);
        let s = c64::new(0.0, 1e7);
        let t = transfer(&sys, s).unwrap()[(0, 0)];
        let limit = c64::new(1.0, 0.0) + (-s * 0.7).exp() * 0.6;
        assert!((t - limit).norm() < 1e-5);
    }
}
