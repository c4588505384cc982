//! Finite coupling graphs and their step-kernel embedding.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_param, Error, Result};
use crate::graphons::{DifferenceProfile, GraphonKernel, KernelShape};

/// Where the weights of a [`CouplingGraph`] came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Explicit,
    /// Kernel sampled at the grid points `(k/n, ℓ/n)`.
    FromGraphon,
    /// Kernel averaged over the cells of a uniform partition.
    CellAveraged,
    /// Bernoulli realisation drawn with the given seed.
    Sampled { seed: u64 },
}

/// Dense, symmetric, non-negative `n × n` weight matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingGraph {
    n: usize,
    weights: Vec<f64>,
    provenance: Provenance,
}

impl CouplingGraph {
    /// Validates a row-major weight matrix. The diagonal is reset to zero.
    pub fn from_weights(n: usize, mut weights: Vec<f64>, provenance: Provenance) -> Result<Self> {
        if n == 0 {
            return Err(invalid_param("a graph needs at least one node"));
        }
        if weights.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: weights.len(),
            });
        }
        for k in 0..n {
            weights[k * n + k] = 0.0;
            for l in 0..n {
                let w = weights[k * n + l];
                if !w.is_finite() || w < 0.0 {
                    return Err(invalid_param(format!("weight ({k}, {l}) = {w} is not a finite non-negative number")));
                }
                if w != weights[l * n + k] {
                    return Err(invalid_param(format!("weights ({k}, {l}) and ({l}, {k}) differ")));
                }
            }
        }
        Ok(Self {
            n,
            weights,
            provenance,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// Weight of the edge between 0-based nodes `k` and `l`.
    pub fn weight(&self, k: usize, l: usize) -> f64 {
        self.weights[k * self.n + l]
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.weights[k * self.n..(k + 1) * self.n]
    }

    /// Weighted degree of node `k`.
    pub fn degree(&self, k: usize) -> f64 {
        self.row(k).iter().sum()
    }

    /// Mean off-diagonal weight; zero for a single node.
    pub fn edge_density(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        self.weights.iter().sum::<f64>() / (self.n * (self.n - 1)) as f64
    }
}

/// `min{|k − ℓ|, n − |k − ℓ|}` for 1-based indices.
pub fn ring_distance(n: usize, k: usize, l: usize) -> Result<usize> {
    if k == 0 || l == 0 || k > n || l > n {
        return Err(Error::InvalidArgument(format!("node indices ({k}, {l}) outside 1..={n}")));
    }
    let d = k.abs_diff(l);
    Ok(d.min(n - d))
}

/// Ring lattice where every node is joined to its `m` nearest neighbours on
/// each side.
pub fn nearest_neighbour_graph(n: usize, m: usize) -> Result<CouplingGraph> {
    if 2 * m >= n {
        return Err(invalid_param(format!("need 2m < n, got m = {m}, n = {n}")));
    }
    let mut weights = vec![0.0; n * n];
    for k in 0..n {
        for l in 0..n {
            let d = k.abs_diff(l);
            let d = d.min(n - d);
            if d > 0 && d <= m {
                weights[k * n + l] = 1.0;
            }
        }
    }
    CouplingGraph::from_weights(n, weights, Provenance::Explicit)
}

fn grid_values(kernel: &GraphonKernel, n: usize) -> Vec<f64> {
    let mut weights = vec![0.0; n * n];
    weights.par_chunks_mut(n).enumerate().for_each(|(k, row)| {
        for (l, w) in row.iter_mut().enumerate() {
            if k != l {
                *w = kernel.value_at_grid(k + 1, l + 1, n);
            }
        }
    });
    weights
}

/// Weighted graph with `K_kℓ = 𝒦(k/n, ℓ/n)` (1-based `k`, `ℓ`).
pub fn graph_from_graphon(kernel: &GraphonKernel, n: usize) -> Result<CouplingGraph> {
    if n == 0 {
        return Err(invalid_param("a graph needs at least one node"));
    }
    CouplingGraph::from_weights(n, grid_values(kernel, n), Provenance::FromGraphon)
}

/// Expected coupling matrix of [`sample_k_random_graph`]; identical to
/// [`graph_from_graphon`].
pub fn averaged_graph(kernel: &GraphonKernel, n: usize) -> Result<CouplingGraph> {
    graph_from_graphon(kernel, n)
}

/// Weighted graph of cell averages of the kernel over a uniform partition.
pub fn cell_averaged_graph(kernel: &GraphonKernel, n: usize) -> Result<CouplingGraph> {
    if n == 0 {
        return Err(invalid_param("a graph needs at least one node"));
    }
    let mut weights = kernel.cell_average_matrix(n);
    // exact symmetry: circulant averages may differ in the last bit
    for k in 0..n {
        for l in 0..k {
            weights[l * n + k] = weights[k * n + l];
        }
    }
    CouplingGraph::from_weights(n, weights, Provenance::CellAveraged)
}

/// Uniform double in `[0, 1)` from the top 53 bits.
fn unit_interval(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Bernoulli graph with `P(K_kℓ = 1) = 𝒦(k/n, ℓ/n)` for `k < ℓ`.
///
/// Edge `(k, ℓ)` (0-based, `k < ℓ`) reads the 64-bit word at position
/// `k·n + ℓ` of the ChaCha8 stream `n` keyed by `seed`, so every edge is
/// reproducible independently of the order in which rows are generated.
pub fn sample_k_random_graph(kernel: &GraphonKernel, n: usize, seed: u64) -> Result<CouplingGraph> {
    if n == 0 {
        return Err(invalid_param("a graph needs at least one node"));
    }
    if kernel.sup_norm() > 1.0 {
        return Err(invalid_param(format!(
            "edge probabilities need a kernel bounded by 1, got sup {}",
            kernel.sup_norm()
        )));
    }
    let probs = grid_values(kernel, n);
    let mut base = ChaCha8Rng::seed_from_u64(seed);
    base.set_stream(n as u64);
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|k| {
            let mut rng = base.clone();
            rng.set_word_pos(2 * (k * n + k + 1) as u128);
            (k + 1..n)
                .map(|l| {
                    let u = unit_interval(rng.next_u64());
                    if u < probs[k * n + l] {
                        1.0
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    let mut weights = vec![0.0; n * n];
    for (k, row) in upper.iter().enumerate() {
        for (offset, w) in row.iter().enumerate() {
            let l = k + 1 + offset;
            weights[k * n + l] = *w;
            weights[l * n + k] = *w;
        }
    }
    CouplingGraph::from_weights(n, weights, Provenance::Sampled { seed })
}

/// Piecewise-constant kernel with value `K_kℓ` on the cell
/// `[(k−1)/n, k/n) × [(ℓ−1)/n, ℓ/n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepKernel {
    pub n: usize,
    pub values: Vec<f64>,
}

impl StepKernel {
    pub fn value(&self, x: f64, y: f64) -> f64 {
        let idx = |t: f64| ((t * self.n as f64).floor().max(0.0) as usize).min(self.n - 1);
        self.values[idx(x) * self.n + idx(y)]
    }
}

pub fn step_kernel(graph: &CouplingGraph) -> StepKernel {
    StepKernel {
        n: graph.n,
        values: graph.weights.clone(),
    }
}

/// Either kind of kernel accepted by [`l2_kernel_distance`].
#[derive(Debug, Clone, Copy)]
pub enum KernelRef<'a> {
    Step(&'a StepKernel),
    Graphon(&'a GraphonKernel),
}

impl<'a> From<&'a StepKernel> for KernelRef<'a> {
    fn from(k: &'a StepKernel) -> Self {
        Self::Step(k)
    }
}

impl<'a> From<&'a GraphonKernel> for KernelRef<'a> {
    fn from(k: &'a GraphonKernel) -> Self {
        Self::Graphon(k)
    }
}

enum View<'a> {
    Cells(usize, &'a [f64]),
    Profile(&'a DifferenceProfile),
}

impl<'a> KernelRef<'a> {
    fn view(self) -> View<'a> {
        match self {
            Self::Step(s) => View::Cells(s.n, &s.values),
            Self::Graphon(g) => match g.shape() {
                KernelShape::Grid(grid) => View::Cells(grid.n, &grid.values),
                KernelShape::Difference(p) => View::Profile(p),
            },
        }
    }
}

/// Common refinement of the uniform partitions with `n` and `m` cells as
/// `(length, cell in first, cell in second)`.
pub(crate) fn common_refinement(n: usize, m: usize) -> Vec<(f64, usize, usize)> {
    let mut out = Vec::with_capacity(n + m);
    let (mut i, mut j) = (0usize, 0usize);
    let mut start = 0.0;
    while i < n && j < m {
        // compare (i+1)/n with (j+1)/m exactly in integers
        let (lhs, rhs) = ((i + 1) * m, (j + 1) * n);
        let end = if lhs <= rhs {
            (i + 1) as f64 / n as f64
        } else {
            (j + 1) as f64 / m as f64
        };
        out.push((end - start, i, j));
        start = end;
        match lhs.cmp(&rhs) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out
}

fn cells_vs_cells(n: usize, a: &[f64], m: usize, b: &[f64]) -> f64 {
    let pieces = common_refinement(n, m);
    pieces
        .par_iter()
        .map(|&(lx, ia, ib)| {
            pieces
                .iter()
                .map(|&(ly, ja, jb)| {
                    let d = a[ia * n + ja] - b[ib * m + jb];
                    lx * ly * d * d
                })
                .sum::<f64>()
        })
        .sum()
}

fn cells_vs_profile(n: usize, a: &[f64], p: &DifferenceProfile) -> f64 {
    let h = 1.0 / n as f64;
    (0..n)
        .into_par_iter()
        .map(|k| {
            (0..n)
                .map(|l| {
                    let s = a[k * n + l];
                    let (x0, x1) = (k as f64 * h, (k + 1) as f64 * h);
                    let (y0, y1) = (l as f64 * h, (l + 1) as f64 * h);
                    p.rect_integral(x0, x1, y0, y1, |v| (s - v) * (s - v))
                })
                .sum::<f64>()
        })
        .sum()
}

fn profile_vs_profile(p: &DifferenceProfile, q: &DifferenceProfile) -> f64 {
    // ∫∫ g(x − y) dx dy = ∫_0^1 g(z) dz for 1-periodic g
    let mut pts = p.breakpoints(0.0, 1.0);
    pts.extend(q.breakpoints(0.0, 1.0));
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts.windows(2)
        .map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            let d = p.eval(mid) - q.eval(mid);
            (w[1] - w[0]) * d * d
        })
        .sum()
}

/// Exact `‖a − b‖_{L²(I×I)}` over the common refinement of both kernels'
/// discontinuity sets.
pub fn l2_kernel_distance<'a, 'b>(a: impl Into<KernelRef<'a>>, b: impl Into<KernelRef<'b>>) -> f64 {
    let squared = match (a.into().view(), b.into().view()) {
        (View::Cells(n, x), View::Cells(m, y)) => cells_vs_cells(n, x, m, y),
        (View::Cells(n, x), View::Profile(p)) | (View::Profile(p), View::Cells(n, x)) => {
            cells_vs_profile(n, x, p)
        }
        (View::Profile(p), View::Profile(q)) => profile_vs_profile(p, q),
    };
    squared.max(0.0).sqrt()
}
