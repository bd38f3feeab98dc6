use crate::drivers::GridPath;
use crate::error::{Error, Result};

/// Level-2 rough path over a dyadic grid: the first level is the base grid
/// path, the second level is stored per finest interval and composed by Chen
/// for anything coarser.
#[derive(Debug, Clone, PartialEq)]
pub struct RoughPath {
    base: GridPath,
    // steps x d x d, row-major per tensor
    level2: Vec<f64>,
}

/// `a + b + inc_a (x) inc_b` for `d x d` row-major tensors.
pub fn chen_compose(a: &[f64], b: &[f64], inc_a: &[f64], inc_b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len()];
    chen_compose_into(a, b, inc_a, inc_b, &mut out);
    out
}

pub(crate) fn chen_compose_into(a: &[f64], b: &[f64], inc_a: &[f64], inc_b: &[f64], out: &mut [f64]) {
    let d = inc_a.len();
    for i in 0..d {
        for j in 0..d {
            out[i * d + j] = a[i * d + j] + b[i * d + j] + inc_a[i] * inc_b[j];
        }
    }
}

/// Piecewise-linear lift: each finest segment contributes `1/2 D (x) D`.
pub fn dyadic_lift(x: &GridPath) -> RoughPath {
    let d = x.dim();
    let mut level2 = vec![0.0; x.steps() * d * d];
    let mut inc = vec![0.0; d];
    for k in 0..x.steps() {
        for (c, v) in inc.iter_mut().enumerate() {
            *v = x.increment(k, c);
        }
        let t = &mut level2[k * d * d..(k + 1) * d * d];
        for i in 0..d {
            for j in 0..d {
                t[i * d + j] = 0.5 * inc[i] * inc[j];
            }
        }
    }
    RoughPath { base: x.clone(), level2 }
}

/// First and second level increments over every dyadic interval of one
/// level `n`: `2^n` vectors of length `d` and `2^n` tensors of size `d x d`.
#[derive(Debug, Clone, PartialEq)]
pub struct DyadicLevel {
    pub level: u32,
    pub dim: usize,
    pub inc1: Vec<f64>,
    pub inc2: Vec<f64>,
}

impl DyadicLevel {
    pub fn intervals(&self) -> usize {
        1usize << self.level
    }

    pub fn first(&self, l: usize) -> &[f64] {
        &self.inc1[l * self.dim..(l + 1) * self.dim]
    }

    pub fn second(&self, l: usize) -> &[f64] {
        let dd = self.dim * self.dim;
        &self.inc2[l * dd..(l + 1) * dd]
    }

    /// Merges adjacent pairs into the next coarser level.
    fn coarsen(&self) -> DyadicLevel {
        let d = self.dim;
        let dd = d * d;
        let half = self.intervals() / 2;
        let mut inc1 = vec![0.0; half * d];
        let mut inc2 = vec![0.0; half * dd];
        for l in 0..half {
            let (a, b) = (2 * l, 2 * l + 1);
            for c in 0..d {
                inc1[l * d + c] = self.first(a)[c] + self.first(b)[c];
            }
            chen_compose_into(
                self.second(a),
                self.second(b),
                self.first(a),
                self.first(b),
                &mut inc2[l * dd..(l + 1) * dd],
            );
        }
        DyadicLevel { level: self.level - 1, dim: d, inc1, inc2 }
    }
}

impl RoughPath {
    /// Assembles a rough path from a base path and finest-level tensors
    /// (no consistency check beyond shapes).
    pub fn from_parts(base: GridPath, level2: Vec<f64>) -> Result<Self> {
        let d = base.dim();
        if level2.len() != base.steps() * d * d {
            return Err(Error::DimensionMismatch("level-2 buffer length".into()));
        }
        Ok(Self { base, level2 })
    }

    pub fn base(&self) -> &GridPath {
        &self.base
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn level(&self) -> u32 {
        self.base.level()
    }

    pub fn steps(&self) -> usize {
        self.base.steps()
    }

    /// Second level over finest interval `k`.
    pub fn finest_level2(&self, k: usize) -> &[f64] {
        let dd = self.dim() * self.dim();
        &self.level2[k * dd..(k + 1) * dd]
    }

    /// Same path scaled by `s` (level 2 scales by `s^2`).
    pub fn dilate(&self, s: f64) -> Self {
        Self { base: self.base.scaled(s), level2: self.level2.iter().map(|v| v * s * s).collect() }
    }

    /// Increments at the finest level.
    pub fn finest(&self) -> DyadicLevel {
        DyadicLevel {
            level: self.level(),
            dim: self.dim(),
            inc1: self.base.increments(),
            inc2: self.level2.clone(),
        }
    }

    /// Increments over all intervals of level `n <= M`.
    pub fn dyadic_level(&self, n: u32) -> Result<DyadicLevel> {
        if n > self.level() {
            return Err(Error::LevelMismatch { expected: self.level(), found: n });
        }
        let mut cur = self.finest();
        while cur.level > n {
            cur = cur.coarsen();
        }
        Ok(cur)
    }

    /// Every level `0..=M`, index = level.
    pub fn pyramid(&self) -> Vec<DyadicLevel> {
        let mut levels = vec![self.finest()];
        while levels.last().is_some_and(|l| l.level > 0) {
            let next = levels.last().expect("non-empty").coarsen();
            levels.push(next);
        }
        levels.reverse();
        levels
    }

    /// Level-2 increment between grid indices `s <= t`, folded left to right.
    pub fn level2_between(&self, s: usize, t: usize) -> Result<Vec<f64>> {
        if s > t || t > self.steps() {
            return Err(Error::IndexOutOfRange(format!("interval [{s}, {t}]")));
        }
        let d = self.dim();
        let mut acc = vec![0.0; d * d];
        let mut acc1 = vec![0.0; d];
        let mut inc = vec![0.0; d];
        let mut next = vec![0.0; d * d];
        for k in s..t {
            for (c, v) in inc.iter_mut().enumerate() {
                *v = self.base.increment(k, c);
            }
            chen_compose_into(&acc, self.finest_level2(k), &acc1, &inc, &mut next);
            std::mem::swap(&mut acc, &mut next);
            for c in 0..d {
                acc1[c] += inc[c];
            }
        }
        Ok(acc)
    }

    /// First level increment between grid indices.
    pub fn level1_between(&self, s: usize, t: usize) -> Vec<f64> {
        self.base.point(t).iter().zip(self.base.point(s)).map(|(a, b)| a - b).collect()
    }

    /// Finest-level tensors as CSV rows `l,x11,x12,...` (row-major).
    pub fn level2_csv(&self) -> String {
        let d = self.dim();
        let mut out = String::from("l");
        for i in 1..=d {
            for j in 1..=d {
                out.push_str(&format!(",x{i}{j}"));
            }
        }
        out.push('\n');
        for k in 0..self.steps() {
            out.push_str(&k.to_string());
            for v in self.finest_level2(k) {
                out.push(',');
                out.push_str(&crate::io::fmt_f64(*v));
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(v: &[f64], level: u32) -> GridPath {
        let v = v.to_vec();
        GridPath::from_fn(v.len(), level, move |t, out| {
            for (o, c) in out.iter_mut().zip(&v) {
                *o = c * t;
            }
        })
    }

    #[test]
    fn linear_path_total_area() {
        let v = [1.5, -0.5, 2.0];
        let x = dyadic_lift(&line(&v, 6));
        let top = x.dyadic_level(0).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((top.second(0)[i * 3 + j] - 0.5 * v[i] * v[j]).abs() < 1e-13);
            }
        }
        assert_eq!(x.level2_between(0, 64).unwrap().len(), 9);
    }

    #[test]
    fn compose_identity_and_halves() {
        let a = vec![1.0, 2.0, 3.0, 4.0];
        let got = chen_compose(&a, &[0.0; 4], &[1.0, 1.0], &[0.0, 0.0]);
        assert_eq!(got, a);
        // two halves of a line with increment D: D/2 each
        let d = [2.0, -1.0];
        let half: Vec<f64> = d.iter().map(|x| x / 2.0).collect();
        let l2: Vec<f64> = (0..4).map(|k| 0.5 * half[k / 2] * half[k % 2]).collect();
        let both = chen_compose(&l2, &l2, &half, &half);
        for k in 0..4 {
            assert!((both[k] - 0.5 * d[k / 2] * d[k % 2]).abs() < 1e-15);
        }
    }

    #[test]
    fn iterated_integral_of_parabola() {
        let x = GridPath::from_fn(2, 10, |t, o| {
            o[0] = t;
            o[1] = t * t;
        });
        let l2 = dyadic_lift(&x).level2_between(0, 1024).unwrap();
        // int_0^1 x^1 dx^2 = int t * 2t dt = 2/3
        assert!((l2[1] - 2.0 / 3.0).abs() < 1e-3, "{}", l2[1]);
    }

    #[test]
    fn pyramid_matches_fold() {
        let x = GridPath::from_fn(2, 5, |t, o| {
            o[0] = (7.0 * t).sin();
            o[1] = (3.0 * t).cos() * t;
        });
        let r = dyadic_lift(&x);
        let pyr = r.pyramid();
        assert_eq!(pyr.len(), 6);
        let lvl = &pyr[3];
        for l in 0..8 {
            let via_fold = r.level2_between(l * 4, (l + 1) * 4).unwrap();
            for (a, b) in via_fold.iter().zip(lvl.second(l)) {
                assert!((a - b).abs() < 1e-15);
            }
        }
    }
}
