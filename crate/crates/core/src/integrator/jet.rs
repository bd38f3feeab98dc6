//! Second-order truncated Taylor arithmetic through the Heun scheme.
//!
//! Along the one-parameter family with driver increments `dh + tau dk` and
//! noise intensity `eps = tau s`, the discrete solution is
//! `y0 + tau y1 + tau^2 y2 + O(tau^3)`; the jets are exact coefficients of
//! the discrete map, not of a separate discretization.

use super::vector_field::VectorField;
use crate::drivers::GridPath;
use crate::error::{Error, Result};

/// Taylor coefficients of the discrete solution.
#[derive(Debug, Clone, PartialEq)]
pub struct JetSolution {
    pub base: GridPath,
    pub first: GridPath,
    pub second: GridPath,
}

struct Scratch {
    v: [Vec<f64>; 3],
    t: Vec<f64>,
    b: [Vec<f64>; 3],
    tb: Vec<f64>,
}

type Jet = [Vec<f64>; 3];

fn zero_jet(n: usize) -> Jet {
    [vec![0.0; n], vec![0.0; n], vec![0.0; n]]
}

/// Jet of `V(y) (zh + tau zk) + beta(tau s, y) dt`.
fn rate(vf: &dyn VectorField, y: &Jet, zh: &[f64], zk: &[f64], dt: f64, s: f64, w: &mut Scratch, out: &mut Jet) {
    let n = y[0].len();
    let d = zh.len();
    vf.diffusion(&y[0], &mut w.v[0]);
    vf.diffusion_d(&y[0], &y[1], &mut w.v[1]);
    vf.diffusion_d(&y[0], &y[2], &mut w.v[2]);
    vf.diffusion_dd(&y[0], &y[1], &y[1], &mut w.t);
    for (a, b) in w.v[2].iter_mut().zip(&w.t) {
        *a += 0.5 * b;
    }
    vf.drift(0.0, &y[0], &mut w.b[0]);
    vf.drift_dy(0.0, &y[0], &y[1], &mut w.b[1]);
    vf.drift_de(0.0, &y[0], &mut w.tb);
    for (a, b) in w.b[1].iter_mut().zip(&w.tb) {
        *a += s * b;
    }
    vf.drift_dy(0.0, &y[0], &y[2], &mut w.b[2]);
    vf.drift_dyy(0.0, &y[0], &y[1], &y[1], &mut w.tb);
    for (a, b) in w.b[2].iter_mut().zip(&w.tb) {
        *a += 0.5 * b;
    }
    if s != 0.0 {
        vf.drift_dye(0.0, &y[0], &y[1], &mut w.tb);
        for (a, b) in w.b[2].iter_mut().zip(&w.tb) {
            *a += s * b;
        }
        vf.drift_dee(0.0, &y[0], &mut w.tb);
        for (a, b) in w.b[2].iter_mut().zip(&w.tb) {
            *a += 0.5 * s * s * b;
        }
    }
    let dot = |m: &[f64], i: usize, z: &[f64]| m[i * d..(i + 1) * d].iter().zip(z).map(|(a, b)| a * b).sum::<f64>();
    for i in 0..n {
        out[0][i] = dot(&w.v[0], i, zh) + w.b[0][i] * dt;
        out[1][i] = dot(&w.v[0], i, zk) + dot(&w.v[1], i, zh) + w.b[1][i] * dt;
        out[2][i] = dot(&w.v[1], i, zk) + dot(&w.v[2], i, zh) + w.b[2][i] * dt;
    }
}

/// Jets of the Heun skeleton scheme driven by `h + tau k` with drift
/// `beta(tau s, .)`.
pub fn solve_jets(vf: &dyn VectorField, h: &GridPath, k: &GridPath, s: f64) -> Result<JetSolution> {
    let (n, d) = (vf.state_dim(), vf.driver_dim());
    if h.dim() != d || k.dim() != d {
        return Err(Error::DimensionMismatch("jet drivers must match the system's driver dim".into()));
    }
    if h.level() != k.level() {
        return Err(Error::LevelMismatch { expected: h.level(), found: k.level() });
    }
    let steps = h.steps();
    let dt = h.dt();
    let mut w = Scratch {
        v: [vec![0.0; n * d], vec![0.0; n * d], vec![0.0; n * d]],
        t: vec![0.0; n * d],
        b: [vec![0.0; n], vec![0.0; n], vec![0.0; n]],
        tb: vec![0.0; n],
    };
    let mut out: [Vec<f64>; 3] = [
        vec![0.0; (steps + 1) * n],
        vec![0.0; (steps + 1) * n],
        vec![0.0; (steps + 1) * n],
    ];
    let mut y = zero_jet(n);
    y[0] = vf.initial_state();
    out[0][..n].copy_from_slice(&y[0]);
    let (mut a0, mut a1, mut pred) = (zero_jet(n), zero_jet(n), zero_jet(n));
    let (mut zh, mut zk) = (vec![0.0; d], vec![0.0; d]);
    for step in 0..steps {
        for c in 0..d {
            zh[c] = h.increment(step, c);
            zk[c] = k.increment(step, c);
        }
        rate(vf, &y, &zh, &zk, dt, s, &mut w, &mut a0);
        for o in 0..3 {
            for i in 0..n {
                pred[o][i] = y[o][i] + a0[o][i];
            }
        }
        if !vf.in_box(&pred[0]) {
            return Err(Error::NonFiniteState { step: step + 1 });
        }
        rate(vf, &pred, &zh, &zk, dt, s, &mut w, &mut a1);
        for o in 0..3 {
            for i in 0..n {
                y[o][i] += 0.5 * (a0[o][i] + a1[o][i]);
            }
            out[o][(step + 1) * n..(step + 2) * n].copy_from_slice(&y[o]);
        }
        if !vf.in_box(&y[0]) || y[1].iter().chain(&y[2]).any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { step: step + 1 });
        }
    }
    let [base, first, second] = out;
    Ok(JetSolution {
        base: GridPath::from_state_values(n, h.level(), base)?,
        first: GridPath::from_values(n, h.level(), first)?,
        second: GridPath::from_values(n, h.level(), second)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrator::{solve_skeleton, ScalarPolySystem, SystemSpec};

    fn poly_with_eps() -> ScalarPolySystem {
        let SystemSpec::ScalarPoly(mut s) = SystemSpec::scalar_poly_toy() else { unreachable!() };
        s.beta_eps = vec![0.2, 0.3];
        s
    }

    #[test]
    fn jets_match_finite_differences_of_the_scheme() {
        let vf = poly_with_eps();
        let h = GridPath::from_fn(2, 6, |t, o| {
            o[0] = (2.0 * t).sin();
            o[1] = t * t;
        });
        let k = GridPath::from_fn(2, 6, |t, o| {
            o[0] = (5.0 * t).cos();
            o[1] = -t;
        });
        let jets = solve_jets(&vf, &h, &k, 1.0).unwrap();
        // solve with tau directly: driver h + tau k, beta(tau, .)
        let solve = |tau: f64| {
            let sys = ScalarPolySystem {
                beta: {
                    let n = vf.beta.len().max(vf.beta_eps.len());
                    (0..n)
                        .map(|i| vf.beta.get(i).copied().unwrap_or(0.0) + tau * vf.beta_eps.get(i).copied().unwrap_or(0.0))
                        .collect()
                },
                beta_eps: vec![],
                ..vf.clone()
            };
            solve_skeleton(&h.axpy(tau, &k).unwrap(), &sys).unwrap().terminal()[0]
        };
        let tau = 1e-3;
        let (p, m, z) = (solve(tau), solve(-tau), solve(0.0));
        let d1 = (p - m) / (2.0 * tau);
        let d2 = (p - 2.0 * z + m) / (2.0 * tau * tau);
        assert!((jets.base.terminal()[0] - z).abs() < 1e-14);
        assert!((jets.first.terminal()[0] - d1).abs() < 1e-6, "{} {d1}", jets.first.terminal()[0]);
        assert!((jets.second.terminal()[0] - d2).abs() < 1e-4, "{} {d2}", jets.second.terminal()[0]);
    }

    #[test]
    fn zero_direction_and_no_eps_gives_zero_jets() {
        let vf = SystemSpec::scalar_poly_toy().into_field();
        let h = GridPath::from_fn(2, 5, |t, o| {
            o[0] = t;
            o[1] = t.sin();
        });
        let jets = solve_jets(vf.as_ref(), &h, &GridPath::zeros(2, 5), 0.0).unwrap();
        assert_eq!(jets.first.sup_norm(), 0.0);
        assert_eq!(jets.second.sup_norm(), 0.0);
    }
}
