//! Graphon kernels on `I × I` with `I = [0, 1]`.
//!
//! Two shapes are supported:
//!
//! - difference kernels `K(x, y) = P(x − y)` with an even, 1-periodic,
//!   piecewise-constant profile `P` (indicator mixtures such as the
//!   small-world kernels, or a sampled table);
//! - tabulated grids, constant on the cells of a uniform `M × M` partition.
//!
//! Because every profile is piecewise constant in `z = x − y`, integrals of
//! `F(P(x − y))` over axis-aligned rectangles reduce to one-dimensional
//! integrals against a piecewise-linear overlap weight and are evaluated
//! exactly.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{invalid_param, Error, Result};

/// Periodic distance to zero: `min{|x̃|, 1 − |x̃|}` with `x̃` the
/// representative of `x` in `(−1, 1)`. Values lie in `[0, 1/2]`.
pub fn pernorm(x: f64) -> f64 {
    let reduced = (x - x.trunc()).abs();
    reduced.min(1.0 - reduced)
}

/// `G_s(x) = 1` iff `pernorm(x) < s`.
pub fn indicator_profile(s: f64, x: f64) -> Result<f64> {
    check_width(s)?;
    Ok(indicator(s, x))
}

fn indicator(s: f64, x: f64) -> f64 {
    if pernorm(x) < s {
        1.0
    } else {
        0.0
    }
}

fn check_width(s: f64) -> Result<()> {
    if s > 0.0 && s <= 0.5 {
        Ok(())
    } else {
        Err(invalid_param(format!("indicator width must lie in (0, 1/2], got {s}")))
    }
}

/// `sin(2πx)` with the argument reduced modulo one first, so that the
/// quarter and half periods come out exact.
pub(crate) fn sin_2pi(x: f64) -> f64 {
    let y = x - x.round();
    if y == 0.0 || y.abs() == 0.5 {
        0.0
    } else if y.abs() == 0.25 {
        y.signum()
    } else {
        (2.0 * PI * y).sin()
    }
}

pub(crate) fn cos_2pi(x: f64) -> f64 {
    let y = x - x.round();
    if y == 0.0 {
        1.0
    } else if y.abs() == 0.5 {
        -1.0
    } else if y.abs() == 0.25 {
        0.0
    } else {
        (2.0 * PI * y).cos()
    }
}

/// One term `weight · G_width` of an indicator mixture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndicatorTerm {
    pub weight: f64,
    pub width: f64,
}

/// Even, 1-periodic, piecewise-constant profile of a difference kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case", deny_unknown_fields)]
pub enum DifferenceProfile {
    /// `constant + Σ weight · G_width`.
    Mixture {
        constant: f64,
        terms: Vec<IndicatorTerm>,
    },
    /// `P(z) = values[j]` for `z mod 1 ∈ [j/M, (j+1)/M)`.
    Table { values: Vec<f64> },
}

impl DifferenceProfile {
    pub fn eval(&self, z: f64) -> f64 {
        match self {
            Self::Mixture { constant, terms } => {
                let d = pernorm(z);
                constant
                    + terms
                        .iter()
                        .filter(|t| d < t.width)
                        .map(|t| t.weight)
                        .sum::<f64>()
            }
            Self::Table { values } => {
                let m = values.len();
                let y = z - z.floor();
                let j = ((y * m as f64).floor() as usize).min(m - 1);
                values[j]
            }
        }
    }

    /// Sorted discontinuity points of the profile in `[lo, hi]`, together
    /// with the interval ends.
    pub fn breakpoints(&self, lo: f64, hi: f64) -> Vec<f64> {
        let mut pts = vec![lo, hi];
        let (first, last) = (lo.floor() as i64 - 1, hi.ceil() as i64 + 1);
        match self {
            Self::Mixture { terms, .. } => {
                for t in terms {
                    for j in first..=last {
                        pts.push(j as f64 + t.width);
                        pts.push(j as f64 - t.width);
                    }
                }
            }
            Self::Table { values } => {
                let m = values.len() as i64;
                for i in first * m..=last * m {
                    pts.push(i as f64 / m as f64);
                }
            }
        }
        pts.retain(|p| *p >= lo && *p <= hi);
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    /// `∫_lo^hi F(P(z)) w(z) dz` for a weight `w` that is linear between
    /// consecutive entries of `extra_breaks` (and between profile breaks).
    fn weighted_integral(
        &self,
        lo: f64,
        hi: f64,
        extra_breaks: &[f64],
        f: impl Fn(f64) -> f64,
        w: impl Fn(f64) -> f64,
    ) -> f64 {
        if hi <= lo {
            return 0.0;
        }
        let mut pts = self.breakpoints(lo, hi);
        pts.extend(extra_breaks.iter().copied().filter(|p| *p > lo && *p < hi));
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts.windows(2)
            .map(|seg| {
                let (a, b) = (seg[0], seg[1]);
                let mid = 0.5 * (a + b);
                (b - a) * f(self.eval(mid)) * w(mid)
            })
            .sum()
    }

    /// Exact `∫∫_{[a,b]×[c,d]} F(P(x − y)) dx dy`.
    pub fn rect_integral(&self, a: f64, b: f64, c: f64, d: f64, f: impl Fn(f64) -> f64) -> f64 {
        // z = x − y has overlap weight |[a,b] ∩ [c+z, d+z]|
        let overlap = |z: f64| ((b.min(d + z)) - (a.max(c + z))).max(0.0);
        let kinks = [a - d, a - c, b - d, b - c];
        self.weighted_integral(a - d, b - c, &kinks, f, overlap)
    }

    /// Exact `∫_0^1 F(P(z)) dz`.
    pub fn period_integral(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.weighted_integral(0.0, 1.0, &[], f, |_| 1.0)
    }

    fn extremes(&self) -> (f64, f64) {
        let pts = self.breakpoints(0.0, 1.0);
        let mut samples: Vec<f64> = pts.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        samples.extend(pts);
        samples
            .into_iter()
            .map(|z| self.eval(z))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            })
    }

    fn validate(&self) -> Result<()> {
        match self {
            Self::Mixture { constant, terms } => {
                if !constant.is_finite() {
                    return Err(invalid_param("profile constant must be finite"));
                }
                for t in terms {
                    check_width(t.width)?;
                    if !t.weight.is_finite() {
                        return Err(invalid_param("indicator weight must be finite"));
                    }
                }
            }
            Self::Table { values } => {
                let m = values.len();
                if m == 0 {
                    return Err(invalid_param("profile table is empty"));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(invalid_param("profile table entries must be finite"));
                }
                if (0..m).any(|j| values[j] != values[m - 1 - j]) {
                    return Err(invalid_param("profile table must be even: values[j] = values[M-1-j]"));
                }
            }
        }
        Ok(())
    }

    /// `∫_I P(x) e^{2πimx} dx`.
    pub fn fourier_coefficient(&self, m: i64) -> Complex64 {
        match self {
            Self::Mixture { constant, terms } => {
                let re = if m == 0 {
                    constant + terms.iter().map(|t| t.weight * 2.0 * t.width).sum::<f64>()
                } else {
                    terms
                        .iter()
                        .map(|t| t.weight * sin_2pi(m as f64 * t.width) / (PI * m as f64))
                        .sum()
                };
                Complex64::new(re, 0.0)
            }
            Self::Table { values } => {
                let n = values.len() as f64;
                if m == 0 {
                    return Complex64::new(values.iter().sum::<f64>() / n, 0.0);
                }
                let mf = m as f64;
                let (mut re, mut im) = (0.0, 0.0);
                for (j, v) in values.iter().enumerate() {
                    let (a, b) = (mf * j as f64 / n, mf * (j + 1) as f64 / n);
                    re += v * (sin_2pi(b) - sin_2pi(a));
                    im += v * (cos_2pi(a) - cos_2pi(b));
                }
                let scale = 2.0 * PI * mf;
                Complex64::new(re / scale, im / scale)
            }
        }
    }

    /// `∫_I P(x)[cos(2πmx) − 1] dx`.
    fn spectral_difference(&self, m: i64) -> f64 {
        match self {
            Self::Mixture { terms, .. } => terms
                .iter()
                .map(|t| t.weight * (sin_2pi(m as f64 * t.width) / (PI * m as f64) - 2.0 * t.width))
                .sum(),
            Self::Table { .. } => self.fourier_coefficient(m).re - self.fourier_coefficient(0).re,
        }
    }
}

/// Tabulated kernel, constant on the cells `[i/M, (i+1)/M) × [j/M, (j+1)/M)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellGrid {
    pub n: usize,
    /// Row-major `n × n` values.
    pub values: Vec<f64>,
}

impl CellGrid {
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(invalid_param("grid needs at least one cell"));
        }
        if values.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: values.len(),
            });
        }
        Ok(Self { n, values })
    }

    pub fn cell(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    fn index_of(&self, x: f64) -> usize {
        ((x * self.n as f64).floor().max(0.0) as usize).min(self.n - 1)
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.cell(self.index_of(x), self.index_of(y))
    }

    /// Exact mean over `[x0, x1] × [y0, y1]`.
    pub fn rect_average(&self, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
        let h = 1.0 / self.n as f64;
        let spans = |lo: f64, hi: f64| -> Vec<(usize, f64)> {
            let (first, last) = (self.index_of(lo), self.index_of(hi - 0.5 * h * 1e-9));
            (first..=last)
                .map(|i| {
                    let a = (i as f64 * h).max(lo);
                    let b = ((i + 1) as f64 * h).min(hi);
                    (i, (b - a).max(0.0))
                })
                .collect()
        };
        let (xs, ys) = (spans(x0, x1), spans(y0, y1));
        let mut acc = 0.0;
        for &(i, wx) in &xs {
            for &(j, wy) in &ys {
                acc += self.cell(i, j) * wx * wy;
            }
        }
        acc / ((x1 - x0) * (y1 - y0))
    }
}

/// Shape of a graphon kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelShape {
    Difference(DifferenceProfile),
    Grid(CellGrid),
}

/// Non-negative, bounded, symmetric kernel on `I × I`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelShape", into = "KernelShape")]
pub struct GraphonKernel {
    shape: KernelShape,
    sup_norm: f64,
}

impl TryFrom<KernelShape> for GraphonKernel {
    type Error = Error;

    fn try_from(shape: KernelShape) -> Result<Self> {
        let (lo, hi) = match &shape {
            KernelShape::Difference(profile) => {
                profile.validate()?;
                profile.extremes()
            }
            KernelShape::Grid(grid) => {
                CellGrid::new(grid.n, grid.values.clone())?;
                if grid.values.iter().any(|v| !v.is_finite()) {
                    return Err(invalid_param("grid values must be finite"));
                }
                for i in 0..grid.n {
                    for j in 0..i {
                        if grid.cell(i, j) != grid.cell(j, i) {
                            return Err(invalid_param("tabulated kernel must be symmetric"));
                        }
                    }
                }
                grid.values
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)))
            }
        };
        if lo < 0.0 {
            return Err(invalid_param(format!("kernel takes the negative value {lo}")));
        }
        Ok(Self {
            shape,
            sup_norm: hi,
        })
    }
}

impl From<GraphonKernel> for KernelShape {
    fn from(kernel: GraphonKernel) -> Self {
        kernel.shape
    }
}

impl GraphonKernel {
    pub fn from_shape(shape: KernelShape) -> Result<Self> {
        Self::try_from(shape)
    }

    pub fn constant(c: f64) -> Result<Self> {
        Self::mixture(c, Vec::new())
    }

    pub fn mixture(constant: f64, terms: Vec<IndicatorTerm>) -> Result<Self> {
        Self::try_from(KernelShape::Difference(DifferenceProfile::Mixture { constant, terms }))
    }

    pub fn profile_table(values: Vec<f64>) -> Result<Self> {
        Self::try_from(KernelShape::Difference(DifferenceProfile::Table { values }))
    }

    pub fn grid(n: usize, values: Vec<f64>) -> Result<Self> {
        Self::try_from(KernelShape::Grid(CellGrid::new(n, values)?))
    }

    pub fn shape(&self) -> &KernelShape {
        &self.shape
    }

    pub fn profile(&self) -> Option<&DifferenceProfile> {
        match &self.shape {
            KernelShape::Difference(p) => Some(p),
            KernelShape::Grid(_) => None,
        }
    }

    /// Cached `‖K‖_∞`.
    pub fn sup_norm(&self) -> f64 {
        self.sup_norm
    }

    pub fn is_zero(&self) -> bool {
        self.sup_norm == 0.0
    }

    pub fn value(&self, x: f64, y: f64) -> f64 {
        match &self.shape {
            KernelShape::Difference(p) => p.eval(x - y),
            KernelShape::Grid(g) => g.eval(x, y),
        }
    }

    /// `K(k/n, ℓ/n)` for 1-based node indices. Difference kernels evaluate
    /// the profile at `(k − ℓ)/n` so the grid offset is formed exactly.
    pub fn value_at_grid(&self, k: usize, l: usize, n: usize) -> f64 {
        match &self.shape {
            KernelShape::Difference(p) => p.eval((k as f64 - l as f64) / n as f64),
            KernelShape::Grid(g) => g.eval(k as f64 / n as f64, l as f64 / n as f64),
        }
    }

    /// Mean of the kernel over the cell `(k, ℓ)` (0-based) of a uniform
    /// `n × n` partition; exact for every supported shape.
    pub fn cell_average(&self, k: usize, l: usize, n: usize) -> f64 {
        let h = 1.0 / n as f64;
        let (a, b, c, d) = (k as f64 * h, (k + 1) as f64 * h, l as f64 * h, (l + 1) as f64 * h);
        match &self.shape {
            KernelShape::Difference(p) => p.rect_integral(a, b, c, d, |v| v) / (h * h),
            KernelShape::Grid(g) if g.n == n => g.cell(k, l),
            KernelShape::Grid(g) => g.rect_average(a, b, c, d),
        }
    }

    /// Row-major matrix of [`cell_average`](Self::cell_average) values.
    /// Difference kernels yield circulant matrices, so only `2n − 1`
    /// integrals are evaluated.
    pub fn cell_average_matrix(&self, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n * n];
        match &self.shape {
            KernelShape::Difference(_) => {
                let by_offset: Vec<f64> = (0..2 * n - 1)
                    .map(|i| {
                        let (k, l) = if i < n { (i, 0) } else { (0, i - n + 1) };
                        self.cell_average(k, l, n)
                    })
                    .collect();
                for k in 0..n {
                    for l in 0..n {
                        let i = if k >= l { k - l } else { n - 1 + (l - k) };
                        out[k * n + l] = by_offset[i];
                    }
                }
            }
            KernelShape::Grid(_) => {
                for k in 0..n {
                    for l in 0..n {
                        out[k * n + l] = self.cell_average(k, l, n);
                    }
                }
            }
        }
        out
    }
}

/// Small-world construction the kernel is derived from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmallWorldVariant {
    /// Limit of the classical rewiring model.
    Rewire,
    /// Limit of the model that inserts long-range edges without removal.
    Insertion,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmallWorldParams {
    pub p: f64,
    pub r: f64,
    pub variant: SmallWorldVariant,
}

impl SmallWorldParams {
    pub fn new(p: f64, r: f64, variant: SmallWorldVariant) -> Result<Self> {
        let params = Self { p, r, variant };
        params.validate()?;
        Ok(params)
    }

    pub fn insertion(p: f64, r: f64) -> Result<Self> {
        Self::new(p, r, SmallWorldVariant::Insertion)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.p < 0.5) {
            return Err(invalid_param(format!("p must lie in (0, 1/2), got {}", self.p)));
        }
        if !(self.r > 0.0 && self.r < 0.5) {
            return Err(invalid_param(format!("r must lie in (0, 1/2), got {}", self.r)));
        }
        Ok(())
    }
}

/// `p G_{1/2} + (1 − 2p) G_r`.
///
/// Both variants share this profile: the rewire graphon
/// `(1 − p) W_r + p (1 − W_r)` equals it almost everywhere.
pub fn small_world_kernel(params: &SmallWorldParams) -> Result<GraphonKernel> {
    params.validate()?;
    GraphonKernel::mixture(
        0.0,
        vec![
            IndicatorTerm {
                weight: params.p,
                width: 0.5,
            },
            IndicatorTerm {
                weight: 1.0 - 2.0 * params.p,
                width: params.r,
            },
        ],
    )
}

/// `K̂(m) = ∫_I K_p(x) e^{2πimx} dx` of a difference kernel.
pub fn fourier_coefficient(kernel: &GraphonKernel, m: i64) -> Result<Complex64> {
    kernel
        .profile()
        .map(|p| p.fourier_coefficient(m))
        .ok_or_else(|| Error::InvalidArgument("Fourier coefficients need a difference kernel".into()))
}

/// `K̂(m) − K̂(0) = ∫_I K_p(x)[cos(2πmx) − 1] dx` for `m ≠ 0`.
pub fn spectral_difference(kernel: &GraphonKernel, m: i64) -> Result<f64> {
    if m == 0 {
        return Err(Error::InvalidArgument(
            "the zero mode has no spectral difference; use the zero-mode solution".into(),
        ));
    }
    kernel
        .profile()
        .map(|p| p.spectral_difference(m))
        .ok_or_else(|| Error::InvalidArgument("spectral difference needs a difference kernel".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn insertion(p: f64, r: f64) -> GraphonKernel {
        small_world_kernel(&SmallWorldParams::insertion(p, r).unwrap()).unwrap()
    }

    #[test]
    fn pernorm_examples() {
        assert_relative_eq!(pernorm(0.3), 0.3);
        assert_relative_eq!(pernorm(0.7), 0.3, epsilon = 1e-15);
        assert_relative_eq!(pernorm(-0.6), pernorm(0.4), epsilon = 1e-15);
        assert_eq!(pernorm(0.5), 0.5);
        assert_eq!(pernorm(1.0), 0.0);
    }

    #[test]
    fn indicator_examples() {
        assert_eq!(indicator_profile(0.25, 0.1).unwrap(), 1.0);
        assert_eq!(indicator_profile(0.25, 0.4).unwrap(), 0.0);
        assert_eq!(indicator_profile(0.25, 0.9).unwrap(), 1.0);
        assert!(indicator_profile(0.0, 0.1).is_err());
        assert!(indicator_profile(0.6, 0.1).is_err());
    }

    #[test]
    fn insertion_kernel_values() {
        let k = insertion(0.1, 0.25);
        assert_relative_eq!(k.value(0.1, 0.0), 0.9);
        assert_eq!(k.value(0.5, 0.0), 0.0);
        assert_relative_eq!(k.sup_norm(), 0.9);
        assert!(SmallWorldParams::insertion(0.5, 0.1).is_err());
        assert!(SmallWorldParams::insertion(0.1, 0.0).is_err());
    }

    #[test]
    fn fourier_examples() {
        let half = GraphonKernel::mixture(0.0, vec![IndicatorTerm { weight: 1.0, width: 0.5 }]).unwrap();
        assert_eq!(fourier_coefficient(&half, 1).unwrap(), Complex64::new(0.0, 0.0));
        let quarter =
            GraphonKernel::mixture(0.0, vec![IndicatorTerm { weight: 1.0, width: 0.25 }]).unwrap();
        assert_eq!(fourier_coefficient(&quarter, 0).unwrap().re, 0.5);
        assert_relative_eq!(
            fourier_coefficient(&quarter, 1).unwrap().re,
            std::f64::consts::FRAC_1_PI,
            epsilon = 1e-15
        );
    }

    #[test]
    fn spectral_difference_examples() {
        let k = insertion(0.1, 0.25);
        let sd = spectral_difference(&k, 1).unwrap();
        assert_relative_eq!(sd, -0.1 + 0.8 * (1.0 / PI - 0.5), epsilon = 1e-15);
        assert_relative_eq!(sd, -0.245_352_090_6, epsilon = 1e-9);
        assert!(spectral_difference(&k, 0).is_err());
        let zero = GraphonKernel::constant(0.0).unwrap();
        assert_eq!(spectral_difference(&zero, 3).unwrap(), 0.0);
    }

    #[test]
    fn table_profile_matches_mixture() {
        // G_{1/4} sampled on 8 cells is exact: cells 0,1 and 6,7
        let table = GraphonKernel::profile_table(vec![1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0]).unwrap();
        let mix = GraphonKernel::mixture(0.0, vec![IndicatorTerm { weight: 1.0, width: 0.25 }]).unwrap();
        for m in 0..10 {
            let a = fourier_coefficient(&table, m).unwrap();
            let b = fourier_coefficient(&mix, m).unwrap();
            assert!((a - b).norm() < 1e-14, "m={m}: {a} vs {b}");
        }
        assert!(GraphonKernel::profile_table(vec![1.0, 0.0, 0.5]).is_err());
    }

    #[test]
    fn grid_kernels_reject_fourier() {
        let grid = GraphonKernel::grid(2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        assert!(fourier_coefficient(&grid, 1).is_err());
        assert!(GraphonKernel::grid(2, vec![0.0, 1.0, 0.5, 0.0]).is_err());
        assert!(GraphonKernel::grid(2, vec![0.0, -1.0, -1.0, 0.0]).is_err());
    }

    #[test]
    fn cell_averages_of_indicator() {
        // G_{1/4} on 4 cells: diagonal cells fully inside, neighbours half
        let k = GraphonKernel::mixture(0.0, vec![IndicatorTerm { weight: 1.0, width: 0.25 }]).unwrap();
        let m = k.cell_average_matrix(4);
        assert_relative_eq!(m[0], 1.0, epsilon = 1e-15);
        assert_relative_eq!(m[1], 0.5, epsilon = 1e-15);
        assert_relative_eq!(m[2], 0.0, epsilon = 1e-15);
        assert_relative_eq!(m[3], 0.5, epsilon = 1e-15);
        for i in 0..4 {
            for j in 0..4 {
                assert_relative_eq!(m[i * 4 + j], m[j * 4 + i], epsilon = 1e-15);
                assert_relative_eq!(m[i * 4 + j], k.cell_average(i, j, 4), epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn kernel_serde_round_trip() {
        let k = insertion(0.2, 0.1);
        let json = serde_json::to_string(&k).unwrap();
        let back: GraphonKernel = serde_json::from_str(&json).unwrap();
        assert_eq!(back, k);
    }

    proptest! {
        #[test]
        fn pernorm_is_periodic(x in -1.0f64..0.0) {
            prop_assert!((pernorm(x + 1.0) - pernorm(x)).abs() < 1e-15);
        }

        #[test]
        fn small_world_is_even_and_bounded(p in 0.01f64..0.49, r in 0.01f64..0.49, x in -3.0f64..3.0) {
            let k = insertion(p, r);
            let v = k.value(x, 0.0);
            prop_assert_eq!(v, k.value(-x, 0.0));
            prop_assert!((0.0..=1.0).contains(&v));
        }

        #[test]
        fn even_profiles_have_real_coefficients(p in 0.01f64..0.49, r in 0.01f64..0.49, m in -64i64..64) {
            let c = fourier_coefficient(&insertion(p, r), m).unwrap();
            prop_assert!(c.im.abs() < 1e-14);
        }
    }
}
