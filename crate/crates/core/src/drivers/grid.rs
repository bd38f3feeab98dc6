use crate::error::{Error, Result};

/// Samples of an `R^dim`-valued path on the dyadic grid `t_k = k / 2^M`,
/// `k = 0..=2^M`, stored row-major. Driver paths start at zero; solution
/// paths (built with [`GridPath::from_state_values`]) start at the initial
/// state.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPath {
    dim: usize,
    level: u32,
    values: Vec<f64>,
}

impl GridPath {
    pub fn zeros(dim: usize, level: u32) -> Self {
        Self { dim, level, values: vec![0.0; ((1usize << level) + 1) * dim] }
    }

    /// Wraps raw row-major values; rejects wrong lengths and a nonzero start.
    pub fn from_values(dim: usize, level: u32, values: Vec<f64>) -> Result<Self> {
        let expect = ((1usize << level) + 1) * dim;
        if values.len() != expect {
            return Err(Error::DimensionMismatch(format!(
                "grid path of dim {dim} at level {level} needs {expect} values, got {}",
                values.len()
            )));
        }
        if values[..dim].iter().any(|v| *v != 0.0) {
            return Err(Error::InvalidSpec("grid path must start at 0".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput("grid path values".into()));
        }
        Ok(Self { dim, level, values })
    }

    /// Like [`GridPath::from_values`] but with an arbitrary finite start.
    pub fn from_state_values(dim: usize, level: u32, values: Vec<f64>) -> Result<Self> {
        let expect = ((1usize << level) + 1) * dim;
        if values.len() != expect {
            return Err(Error::DimensionMismatch(format!("state path needs {expect} values, got {}", values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput("state path values".into()));
        }
        Ok(Self { dim, level, values })
    }

    /// Cumulative sums of `2^M` row-major increments.
    pub fn from_increments(dim: usize, level: u32, increments: &[f64]) -> Self {
        let steps = 1usize << level;
        assert_eq!(increments.len(), steps * dim, "increment buffer length");
        let mut values = vec![0.0; (steps + 1) * dim];
        for k in 0..steps {
            for c in 0..dim {
                values[(k + 1) * dim + c] = values[k * dim + c] + increments[k * dim + c];
            }
        }
        Self { dim, level, values }
    }

    /// Samples `f(t) - f(0)` on the grid.
    pub fn from_fn(dim: usize, level: u32, f: impl Fn(f64, &mut [f64])) -> Self {
        let steps = 1usize << level;
        let mut origin = vec![0.0; dim];
        f(0.0, &mut origin);
        let mut values = vec![0.0; (steps + 1) * dim];
        let mut buf = vec![0.0; dim];
        for k in 1..=steps {
            f(k as f64 / steps as f64, &mut buf);
            for c in 0..dim {
                values[k * dim + c] = buf[c] - origin[c];
            }
        }
        Self { dim, level, values }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    /// Number of intervals `2^M`.
    pub fn steps(&self) -> usize {
        1usize << self.level
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.steps() as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 / self.steps() as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn point(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn point_mut(&mut self, k: usize) -> &mut [f64] {
        let d = self.dim;
        &mut self.values[k * d..(k + 1) * d]
    }

    pub fn terminal(&self) -> &[f64] {
        self.point(self.steps())
    }

    /// Increment `x_{t_{k+1}} - x_{t_k}` of coordinate `c`.
    pub fn increment(&self, k: usize, c: usize) -> f64 {
        self.values[(k + 1) * self.dim + c] - self.values[k * self.dim + c]
    }

    /// All increments, row-major `2^M x dim`.
    pub fn increments(&self) -> Vec<f64> {
        let d = self.dim;
        (0..self.steps())
            .flat_map(|k| (0..d).map(move |c| (k, c)))
            .map(|(k, c)| self.increment(k, c))
            .collect()
    }

    /// Values of one coordinate.
    pub fn component(&self, c: usize) -> Vec<f64> {
        (0..=self.steps()).map(|k| self.values[k * self.dim + c]).collect()
    }

    /// Restriction to the coarser grid of level `m <= M`.
    pub fn subsample(&self, m: u32) -> Result<Self> {
        if m > self.level {
            return Err(Error::LevelMismatch { expected: self.level, found: m });
        }
        let stride = 1usize << (self.level - m);
        let mut values = Vec::with_capacity(((1usize << m) + 1) * self.dim);
        for k in 0..=(1usize << m) {
            values.extend_from_slice(self.point(k * stride));
        }
        Ok(Self { dim: self.dim, level: m, values })
    }

    /// Piecewise-linear interpolation onto the finer grid of level `m >= M`.
    pub fn refine(&self, m: u32) -> Result<Self> {
        if m < self.level {
            return Err(Error::LevelMismatch { expected: self.level, found: m });
        }
        let stride = 1usize << (m - self.level);
        let mut out = Self::zeros(self.dim, m);
        for k in 0..self.steps() {
            for r in 0..stride {
                let w = r as f64 / stride as f64;
                for c in 0..self.dim {
                    let a = self.values[k * self.dim + c];
                    let b = self.values[(k + 1) * self.dim + c];
                    out.values[(k * stride + r) * self.dim + c] = a + w * (b - a);
                }
            }
        }
        let last = out.steps();
        out.point_mut(last).copy_from_slice(self.terminal());
        Ok(out)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { values: self.values.iter().map(|v| v * s).collect(), ..self.clone() }
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: f64, other: &GridPath) -> Result<Self> {
        self.check_same(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + s * b).collect();
        Ok(Self { values, ..self.clone() })
    }

    pub fn sup_distance(&self, other: &GridPath) -> Result<f64> {
        self.check_same(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs())))
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, a| m.max(a.abs()))
    }

    pub(crate) fn check_same(&self, other: &GridPath) -> Result<()> {
        if self.level != other.level {
            return Err(Error::LevelMismatch { expected: self.level, found: other.level });
        }
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch(format!("path dims {} vs {}", self.dim, other.dim)));
        }
        Ok(())
    }

    /// Stacks the coordinates of `a` and then `b` into one path.
    pub fn concat(a: &GridPath, b: &GridPath) -> Result<Self> {
        if a.level != b.level {
            return Err(Error::LevelMismatch { expected: a.level, found: b.level });
        }
        let dim = a.dim + b.dim;
        let mut values = Vec::with_capacity((a.steps() + 1) * dim);
        for k in 0..=a.steps() {
            values.extend_from_slice(a.point(k));
            values.extend_from_slice(b.point(k));
        }
        Ok(Self { dim, level: a.level, values })
    }

    /// Coordinates `range` as a separate path.
    pub fn select(&self, range: std::ops::Range<usize>) -> Self {
        let dim = range.len();
        let mut values = Vec::with_capacity((self.steps() + 1) * dim);
        for k in 0..=self.steps() {
            values.extend_from_slice(&self.point(k)[range.clone()]);
        }
        Self { dim, level: self.level, values }
    }
}
