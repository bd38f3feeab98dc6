use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::drivers::{rng_stream, GridPath};
use crate::error::{Error, Result};

/// A functional of an `R^n`-valued solution path on the grid, with its
/// gradient as a per-point Riesz kernel and a Hessian that is block
/// diagonal in time (per-point `n x n` blocks).
pub trait PathFunctional: Send + Sync {
    fn value(&self, path: &GridPath) -> f64;
    /// `g` (points x n) with `dF<u> = sum_k g_k . u_k`.
    fn gradient(&self, path: &GridPath) -> Vec<f64>;
    /// `H` (points x n x n, row-major blocks) with
    /// `d2F<u, w> = sum_k u_k^T H_k w_k`.
    fn hessian_blocks(&self, path: &GridPath) -> Vec<f64>;
}

/// Trapezoid weights on `2^M + 1` points.
pub fn trapezoid_weights(level: u32) -> Vec<f64> {
    let steps = 1usize << level;
    let dt = 1.0 / steps as f64;
    (0..=steps).map(|k| if k == 0 || k == steps { 0.5 * dt } else { dt }).collect()
}

/// `1/2 (y_1 - m)^T Q (y_1 - m) + 1/2 int_0^1 y^T W y dt` (trapezoid rule).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticFunctional {
    /// `n x n`, rows.
    pub q: Vec<Vec<f64>>,
    #[serde(default)]
    pub w: Vec<Vec<f64>>,
    #[serde(default)]
    pub target: Vec<f64>,
}

/// `amplitude (1 - exp(-|y_1 - m|^2 / (2 width^2)))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerminalSmooth {
    pub amplitude: f64,
    pub width: f64,
    pub target: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantFunctional {
    pub value: f64,
}

fn mat(rows: &[Vec<f64>], i: usize, j: usize) -> f64 {
    rows.get(i).and_then(|r| r.get(j)).copied().unwrap_or(0.0)
}

impl QuadraticFunctional {
    fn n(&self) -> usize {
        self.q.len()
    }

    fn offset(&self, y: &[f64], i: usize) -> f64 {
        y[i] - self.target.get(i).copied().unwrap_or(0.0)
    }
}

impl PathFunctional for QuadraticFunctional {
    fn value(&self, path: &GridPath) -> f64 {
        let n = self.n();
        let y1 = path.terminal();
        let mut v = 0.0;
        for i in 0..n {
            for j in 0..n {
                v += 0.5 * self.offset(y1, i) * mat(&self.q, i, j) * self.offset(y1, j);
            }
        }
        if !self.w.is_empty() {
            for (k, wk) in trapezoid_weights(path.level()).iter().enumerate() {
                let y = path.point(k);
                for i in 0..n {
                    for j in 0..n {
                        v += 0.5 * wk * y[i] * mat(&self.w, i, j) * y[j];
                    }
                }
            }
        }
        v
    }

    fn gradient(&self, path: &GridPath) -> Vec<f64> {
        let n = self.n();
        let mut g = vec![0.0; (path.steps() + 1) * n];
        if !self.w.is_empty() {
            for (k, wk) in trapezoid_weights(path.level()).iter().enumerate() {
                let y = path.point(k);
                for i in 0..n {
                    g[k * n + i] = wk * (0..n).map(|j| mat(&self.w, i, j) * y[j]).sum::<f64>();
                }
            }
        }
        let last = path.steps();
        let y1 = path.terminal();
        for i in 0..n {
            g[last * n + i] += (0..n).map(|j| mat(&self.q, i, j) * self.offset(y1, j)).sum::<f64>();
        }
        g
    }

    fn hessian_blocks(&self, path: &GridPath) -> Vec<f64> {
        let n = self.n();
        let mut h = vec![0.0; (path.steps() + 1) * n * n];
        if !self.w.is_empty() {
            for (k, wk) in trapezoid_weights(path.level()).iter().enumerate() {
                for i in 0..n {
                    for j in 0..n {
                        h[k * n * n + i * n + j] = wk * mat(&self.w, i, j);
                    }
                }
            }
        }
        let last = path.steps();
        for i in 0..n {
            for j in 0..n {
                h[last * n * n + i * n + j] += mat(&self.q, i, j);
            }
        }
        h
    }
}

impl TerminalSmooth {
    fn parts(&self, path: &GridPath) -> (Vec<f64>, f64) {
        let r: Vec<f64> = path.terminal().iter().zip(&self.target).map(|(y, m)| y - m).collect();
        let s = r.iter().map(|v| v * v).sum::<f64>() / (2.0 * self.width * self.width);
        (r, (-s).exp())
    }
}

impl PathFunctional for TerminalSmooth {
    fn value(&self, path: &GridPath) -> f64 {
        self.amplitude * (1.0 - self.parts(path).1)
    }

    fn gradient(&self, path: &GridPath) -> Vec<f64> {
        let n = path.dim();
        let (r, e) = self.parts(path);
        let mut g = vec![0.0; (path.steps() + 1) * n];
        let w2 = self.width * self.width;
        for i in 0..n {
            g[path.steps() * n + i] = self.amplitude * e * r[i] / w2;
        }
        g
    }

    fn hessian_blocks(&self, path: &GridPath) -> Vec<f64> {
        let n = path.dim();
        let (r, e) = self.parts(path);
        let mut h = vec![0.0; (path.steps() + 1) * n * n];
        let w2 = self.width * self.width;
        let base = path.steps() * n * n;
        for i in 0..n {
            for j in 0..n {
                let delta = if i == j { 1.0 } else { 0.0 };
                h[base + i * n + j] = self.amplitude * e * (delta / w2 - r[i] * r[j] / (w2 * w2));
            }
        }
        h
    }
}

impl PathFunctional for ConstantFunctional {
    fn value(&self, _path: &GridPath) -> f64 {
        self.value
    }
    fn gradient(&self, path: &GridPath) -> Vec<f64> {
        vec![0.0; path.values().len()]
    }
    fn hessian_blocks(&self, path: &GridPath) -> Vec<f64> {
        vec![0.0; path.values().len() * path.dim()]
    }
}

/// JSON description of a built-in functional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FunctionalSpec {
    Quadratic(QuadraticFunctional),
    TerminalSmooth(TerminalSmooth),
    Constant(ConstantFunctional),
}

impl FunctionalSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Checks the functional against a state dimension.
    pub fn validate(&self, n: usize) -> Result<()> {
        let ok = match self {
            FunctionalSpec::Quadratic(f) => {
                f.q.len() == n
                    && f.q.iter().all(|r| r.len() == n)
                    && (f.w.is_empty() || (f.w.len() == n && f.w.iter().all(|r| r.len() == n)))
                    && (f.target.is_empty() || f.target.len() == n)
            }
            FunctionalSpec::TerminalSmooth(f) => f.target.len() == n && f.width > 0.0,
            FunctionalSpec::Constant(_) => true,
        };
        if !ok {
            return Err(Error::InvalidSpec(format!("functional does not fit state dimension {n}")));
        }
        Ok(())
    }

    /// Built-in functionals by name, sized for state dimension `n`.
    pub fn builtin(name: &str, n: usize) -> Result<Self> {
        let diag = |v: f64| (0..n).map(|i| (0..n).map(|j| if i == j { v } else { 0.0 }).collect()).collect();
        match name {
            "quadratic" => {
                let q = if n == 2 { vec![vec![2.0, 0.3], vec![0.3, 1.0]] } else { diag(2.0) };
                Ok(FunctionalSpec::Quadratic(QuadraticFunctional { q, w: diag(0.5), target: vec![] }))
            }
            "terminal-smooth" => Ok(FunctionalSpec::TerminalSmooth(TerminalSmooth {
                amplitude: 1.0,
                width: 0.5,
                target: vec![1.0; n],
            })),
            other => Err(Error::InvalidSpec(format!("unknown functional {other}"))),
        }
    }

    pub fn as_functional(&self) -> &dyn PathFunctional {
        match self {
            FunctionalSpec::Quadratic(f) => f,
            FunctionalSpec::TerminalSmooth(f) => f,
            FunctionalSpec::Constant(f) => f,
        }
    }
}

/// Worst relative error of the gradient and Hessian kernels against central
/// differences at random probe paths.
pub fn audit_functional(f: &dyn PathFunctional, n: usize, level: u32, probes: usize, seed: u64) -> (f64, f64) {
    let mut rng = rng_stream(seed, 0);
    let len = ((1usize << level) + 1) * n;
    let h = 1e-5;
    let (mut eg, mut eh) = (0.0f64, 0.0f64);
    for _ in 0..probes {
        let mut draw = || -> Vec<f64> { (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect() };
        let (y, u, w) = (draw(), draw(), draw());
        let at = |s: f64, t: f64| {
            let v = y.iter().zip(&u).zip(&w).map(|((a, b), c)| a + s * b + t * c).collect();
            GridPath::from_state_values(n, level, v).expect("finite")
        };
        let base = at(0.0, 0.0);
        let g = f.gradient(&base);
        let analytic: f64 = g.iter().zip(&u).map(|(a, b)| a * b).sum();
        let fd = (f.value(&at(h, 0.0)) - f.value(&at(-h, 0.0))) / (2.0 * h);
        eg = eg.max((analytic - fd).abs() / fd.abs().max(1e-8));
        let blocks = f.hessian_blocks(&base);
        let mut analytic2 = 0.0;
        for k in 0..len / n {
            for i in 0..n {
                for j in 0..n {
                    analytic2 += u[k * n + i] * blocks[k * n * n + i * n + j] * w[k * n + j];
                }
            }
        }
        let gp = f.gradient(&at(0.0, h));
        let gm = f.gradient(&at(0.0, -h));
        let fd2: f64 = gp.iter().zip(&gm).zip(&u).map(|((a, b), c)| (a - b) / (2.0 * h) * c).sum();
        eh = eh.max((analytic2 - fd2).abs() / fd2.abs().max(1e-8));
    }
    (eg, eh)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_pass_audit() {
        for (name, n) in [("quadratic", 2), ("quadratic", 1), ("terminal-smooth", 2)] {
            let spec = FunctionalSpec::builtin(name, n).unwrap();
            spec.validate(n).unwrap();
            let (eg, eh) = audit_functional(spec.as_functional(), n, 4, 5, 7);
            assert!(eg < 1e-5 && eh < 1e-5, "{name}: {eg} {eh}");
        }
    }

    #[test]
    fn quadratic_value_closed_form() {
        let f = QuadraticFunctional { q: vec![vec![2.0]], w: vec![vec![1.0]], target: vec![0.5] };
        let path = GridPath::from_fn(1, 10, |t, o| o[0] = t);
        // 1/2 * 2 * 0.25 + 1/2 * int t^2 (trapezoid, error dt^2/12 / 2)
        let v = f.value(&path);
        assert!((v - (0.25 + 1.0 / 6.0)).abs() < 1e-6);
    }

    #[test]
    fn json_and_validation() {
        let spec = FunctionalSpec::builtin("terminal-smooth", 2).unwrap();
        let text = serde_json::to_string(&spec).unwrap();
        assert!(text.contains("\"kind\":\"terminal-smooth\""));
        assert_eq!(FunctionalSpec::from_json(&text).unwrap(), spec);
        assert!(spec.validate(3).is_err());
        assert!(FunctionalSpec::builtin("cubic", 2).is_err());
    }
}
