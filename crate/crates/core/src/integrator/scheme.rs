use super::vector_field::VectorField;
use crate::drivers::GridPath;
use crate::error::{Error, Result};
use crate::rough::RoughPath;

/// `out = V(y) z + beta(eps, y) dt`, with `v` and `b` as scratch.
pub(crate) fn increment(
    vf: &dyn VectorField,
    eps: f64,
    y: &[f64],
    z: &[f64],
    dt: f64,
    v: &mut [f64],
    b: &mut [f64],
    out: &mut [f64],
) {
    let d = z.len();
    vf.diffusion(y, v);
    vf.drift(eps, y, b);
    for (i, o) in out.iter_mut().enumerate() {
        *o = v[i * d..(i + 1) * d].iter().zip(z).map(|(a, c)| a * c).sum::<f64>() + b[i] * dt;
    }
}

/// Heun predictor-corrector for `dy = V(y) dz + beta(eps, y) dt`, with an
/// optional Davie area correction `sum_{a,b} DV_a<V_b> Anti(L)^{ba}`.
pub(crate) struct Heun<'a> {
    vf: &'a dyn VectorField,
    v: Vec<f64>,
    b: Vec<f64>,
    a0: Vec<f64>,
    a1: Vec<f64>,
    pred: Vec<f64>,
    col: Vec<f64>,
    dv: Vec<f64>,
}

impl<'a> Heun<'a> {
    pub(crate) fn new(vf: &'a dyn VectorField) -> Self {
        let (n, d) = (vf.state_dim(), vf.driver_dim());
        Self {
            vf,
            v: vec![0.0; n * d],
            b: vec![0.0; n],
            a0: vec![0.0; n],
            a1: vec![0.0; n],
            pred: vec![0.0; n],
            col: vec![0.0; n],
            dv: vec![0.0; n * d],
        }
    }

    pub(crate) fn step(&mut self, eps: f64, y: &[f64], z: &[f64], dt: f64, area: Option<&[f64]>, out: &mut [f64]) {
        let vf = self.vf;
        increment(vf, eps, y, z, dt, &mut self.v, &mut self.b, &mut self.a0);
        for ((p, a), b) in self.pred.iter_mut().zip(&self.a0).zip(y) {
            *p = b + a;
        }
        increment(vf, eps, &self.pred, z, dt, &mut self.v, &mut self.b, &mut self.a1);
        for (i, o) in out.iter_mut().enumerate() {
            *o = y[i] + 0.5 * (self.a0[i] + self.a1[i]);
        }
        if let Some(anti) = area {
            let (n, d) = (y.len(), z.len());
            vf.diffusion(y, &mut self.v);
            for bcol in 0..d {
                for i in 0..n {
                    self.col[i] = self.v[i * d + bcol];
                }
                vf.diffusion_d(y, &self.col, &mut self.dv);
                for (i, o) in out.iter_mut().enumerate() {
                    *o += (0..d).map(|a| self.dv[i * d + a] * anti[bcol * d + a]).sum::<f64>();
                }
            }
        }
    }
}

/// Solves `y_{k+1} = Heun(y_k; z_k)` over per-step increments `z` (steps x d)
/// and optional per-step antisymmetric areas (steps x d x d).
fn integrate(vf: &dyn VectorField, eps: f64, level: u32, z: &[f64], areas: Option<&[f64]>) -> Result<GridPath> {
    let (n, d) = (vf.state_dim(), vf.driver_dim());
    let steps = 1usize << level;
    let dt = 1.0 / steps as f64;
    let mut values = vec![0.0; (steps + 1) * n];
    values[..n].copy_from_slice(&vf.initial_state());
    let mut heun = Heun::new(vf);
    for k in 0..steps {
        let (done, rest) = values.split_at_mut((k + 1) * n);
        let area = areas.map(|a| &a[k * d * d..(k + 1) * d * d]);
        heun.step(eps, &done[k * n..], &z[k * d..(k + 1) * d], dt, area, &mut rest[..n]);
        if !vf.in_box(&rest[..n]) {
            return Err(Error::NonFiniteState { step: k + 1 });
        }
    }
    GridPath::from_state_values(n, level, values)
}

fn check_driver_dim(vf: &dyn VectorField, path: &GridPath) -> Result<()> {
    if path.dim() != vf.driver_dim() {
        return Err(Error::DimensionMismatch(format!(
            "driver has dim {}, system expects {}",
            path.dim(),
            vf.driver_dim()
        )));
    }
    Ok(())
}

/// Skeleton `d phi = V(phi) d shift + beta(0, phi) dt` on the shift's grid.
pub fn solve_skeleton(shift: &GridPath, vf: &dyn VectorField) -> Result<GridPath> {
    check_driver_dim(vf, shift)?;
    integrate(vf, 0.0, shift.level(), &shift.increments(), None)
}

/// Solution of `dY = V(Y) d(eps X + shift) + beta(eps, Y) dt` driven by a
/// lifted path, stepping over dyadic intervals of `step_level` (default: the
/// driver's level). Coarse steps add the area correction from `eps^2 X^2`;
/// on finest steps that area is zero.
pub fn solve_rde(
    driver: &RoughPath,
    eps: f64,
    vf: &dyn VectorField,
    shift: Option<&GridPath>,
    step_level: Option<u32>,
) -> Result<GridPath> {
    check_driver_dim(vf, driver.base())?;
    let top = driver.level();
    let m = step_level.unwrap_or(top);
    if m > top {
        return Err(Error::LevelMismatch { expected: top, found: m });
    }
    let d = driver.dim();
    let lvl = driver.dyadic_level(m)?;
    let mut z: Vec<f64> = lvl.inc1.iter().map(|v| eps * v).collect();
    if let Some(h) = shift {
        check_driver_dim(vf, h)?;
        let coarse = match h.level() {
            l if l == m => h.clone(),
            l if l == top => h.subsample(m)?,
            l => return Err(Error::LevelMismatch { expected: top, found: l }),
        };
        for (a, b) in z.iter_mut().zip(coarse.increments()) {
            *a += b;
        }
    }
    let areas = (m < top && eps != 0.0).then(|| {
        let mut anti = vec![0.0; lvl.inc2.len()];
        for l in 0..lvl.intervals() {
            let t = lvl.second(l);
            for i in 0..d {
                for j in 0..d {
                    anti[l * d * d + i * d + j] = 0.5 * eps * eps * (t[i * d + j] - t[j * d + i]);
                }
            }
        }
        anti
    });
    integrate(vf, eps, m, &z, areas.as_deref())
}
