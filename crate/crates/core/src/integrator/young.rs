use crate::drivers::GridPath;
use crate::error::{Error, Result};

fn check(f: &GridPath, g: &GridPath) -> Result<()> {
    if f.level() != g.level() {
        return Err(Error::LevelMismatch { expected: f.level(), found: g.level() });
    }
    Ok(())
}

fn accumulate(f: &GridPath, g: &GridPath, weight: impl Fn(usize, usize) -> f64) -> Result<GridPath> {
    check(f, g)?;
    let (r, s) = (f.dim(), g.dim());
    let mut values = vec![0.0; (f.steps() + 1) * r * s];
    for k in 0..f.steps() {
        for i in 0..r {
            let fi = weight(k, i);
            for j in 0..s {
                let idx = i * s + j;
                values[(k + 1) * r * s + idx] = values[k * r * s + idx] + fi * g.increment(k, j);
            }
        }
    }
    GridPath::from_values(r * s, f.level(), values)
}

/// Left-point sums `int_0^t f^i dg^j`, flattened row-major (`dim f * dim g`).
/// `f` may be a state path with nonzero start.
pub fn young_integral(f: &GridPath, g: &GridPath) -> Result<GridPath> {
    accumulate(f, g, |k, i| f.point(k)[i])
}

/// Trapezoid-rule version of [`young_integral`] (second order for smooth
/// integrands).
pub fn young_integral_trapezoid(f: &GridPath, g: &GridPath) -> Result<GridPath> {
    accumulate(f, g, |k, i| 0.5 * (f.point(k)[i] + f.point(k + 1)[i]))
}
