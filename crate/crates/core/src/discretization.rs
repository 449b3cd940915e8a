//! Uniform box grids, node-based grid functions and the cell-centred
//! discrete operators (gradient, corner averaging, quadrature) that the
//! energies and norms are assembled from.
//!
//! Nodes are stored in lexicographic order: the first axis varies slowest,
//! the last axis fastest. Cells use the same ordering over `res - 1` cells
//! per axis.

use std::sync::Arc;

use crate::error::{Error, Result};

/// Maximum supported spatial dimension.
pub const MAX_DIM: usize = 3;

/// Uniform, axis-aligned box `[0, extent_1] x ... x [0, extent_N]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainGrid {
    dim: usize,
    extent: Vec<f64>,
    res: Vec<usize>,
    h: Vec<f64>,
    node_strides: Vec<usize>,
    cell_counts: Vec<usize>,
    /// Base (lowest) corner node of each cell.
    cell_base: Vec<usize>,
    /// Offsets from a cell's base node to its `2^dim` corners; bit `a` of
    /// the corner index selects the upper node along axis `a`.
    corner_offsets: Vec<usize>,
    boundary: Vec<bool>,
}

impl DomainGrid {
    /// Grid on the box with the given per-axis lengths and node counts.
    pub fn new(extent: &[f64], res: &[usize]) -> Result<Self> {
        let dim = res.len();
        if !(2..=MAX_DIM).contains(&dim) || extent.len() != dim {
            return Err(Error::InvalidGrid(format!(
                "dimension must be 2 or 3 with one extent per axis (got {} extents, {} resolutions)",
                extent.len(),
                res.len()
            )));
        }
        if let Some(&r) = res.iter().find(|&&r| r < 4) {
            return Err(Error::InvalidGrid(format!(
                "need at least 4 nodes per axis, got {r}"
            )));
        }
        if extent.iter().any(|&e| !(e.is_finite() && e > 0.0)) {
            return Err(Error::InvalidGrid(
                "extents must be finite and positive".into(),
            ));
        }
        let h: Vec<f64> = extent
            .iter()
            .zip(res)
            .map(|(&e, &r)| e / (r - 1) as f64)
            .collect();

        let mut node_strides = vec![1; dim];
        for a in (0..dim - 1).rev() {
            node_strides[a] = node_strides[a + 1] * res[a + 1];
        }
        let cell_counts: Vec<usize> = res.iter().map(|r| r - 1).collect();
        let n_cells: usize = cell_counts.iter().product();
        let n_nodes: usize = res.iter().product();

        let mut cell_base = Vec::with_capacity(n_cells);
        let mut idx = vec![0usize; dim];
        for _ in 0..n_cells {
            cell_base.push(idx.iter().zip(&node_strides).map(|(i, s)| i * s).sum());
            increment(&mut idx, &cell_counts);
        }

        let corner_offsets = (0..1usize << dim)
            .map(|bits| {
                (0..dim)
                    .filter(|a| bits >> a & 1 == 1)
                    .map(|a| node_strides[a])
                    .sum()
            })
            .collect();

        let mut boundary = Vec::with_capacity(n_nodes);
        let mut idx = vec![0usize; dim];
        for _ in 0..n_nodes {
            boundary.push(idx.iter().zip(res).any(|(&i, &r)| i == 0 || i == r - 1));
            increment(&mut idx, res);
        }

        Ok(Self {
            dim,
            extent: extent.to_vec(),
            res: res.to_vec(),
            h,
            node_strides,
            cell_counts,
            cell_base,
            corner_offsets,
            boundary,
        })
    }

    /// Unit box `[0,1]^dim` with `res` nodes per axis.
    pub fn unit(dim: usize, res: usize) -> Result<Self> {
        Self::new(&vec![1.0; dim], &vec![res; dim])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn extent(&self) -> &[f64] {
        &self.extent
    }

    pub fn res(&self) -> &[usize] {
        &self.res
    }

    pub fn spacing(&self) -> &[f64] {
        &self.h
    }

    pub fn node_count(&self) -> usize {
        self.boundary.len()
    }

    pub fn cell_count(&self) -> usize {
        self.cell_base.len()
    }

    /// Volume of a single cell, `prod h`.
    pub fn cell_volume(&self) -> f64 {
        self.h.iter().product()
    }

    /// `|Omega|`.
    pub fn volume(&self) -> f64 {
        self.extent.iter().product()
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.boundary[node]
    }

    pub fn boundary_mask(&self) -> &[bool] {
        &self.boundary
    }

    /// Multi-index of a node.
    pub fn node_index(&self, node: usize) -> Vec<usize> {
        let mut rem = node;
        self.node_strides
            .iter()
            .map(|&s| {
                let i = rem / s;
                rem %= s;
                i
            })
            .collect()
    }

    pub fn node_coords(&self, node: usize) -> Vec<f64> {
        self.node_index(node)
            .iter()
            .zip(&self.h)
            .map(|(&i, &h)| i as f64 * h)
            .collect()
    }

    pub fn cell_center(&self, cell: usize) -> Vec<f64> {
        let mut rem = cell;
        let mut strides = vec![1usize; self.dim];
        for a in (0..self.dim - 1).rev() {
            strides[a] = strides[a + 1] * self.cell_counts[a + 1];
        }
        strides
            .iter()
            .zip(&self.h)
            .map(|(&s, &h)| {
                let i = rem / s;
                rem %= s;
                (i as f64 + 0.5) * h
            })
            .collect()
    }

    /// Node indices of the corners of `cell`, in corner-bit order.
    pub fn cell_corners(&self, cell: usize) -> impl Iterator<Item = usize> + '_ {
        let base = self.cell_base[cell];
        self.corner_offsets.iter().map(move |o| base + o)
    }

    pub(crate) fn corner_offsets(&self) -> &[usize] {
        &self.corner_offsets
    }

    pub(crate) fn cell_bases(&self) -> &[usize] {
        &self.cell_base
    }

    pub(crate) fn node_stride(&self, axis: usize) -> usize {
        self.node_strides[axis]
    }
}

fn increment(idx: &mut [usize], bounds: &[usize]) {
    for a in (0..idx.len()).rev() {
        idx[a] += 1;
        if idx[a] < bounds[a] {
            return;
        }
        idx[a] = 0;
    }
}

/// Scalar field sampled on the grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Arc<DomainGrid>,
    values: Vec<f64>,
    bc_zero: bool,
}

impl GridFunction {
    /// Wraps raw nodal values. With `bc_zero` the boundary entries are
    /// projected to zero.
    pub fn new(grid: Arc<DomainGrid>, mut values: Vec<f64>, bc_zero: bool) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::ShapeMismatch {
                expected: grid.node_count(),
                found: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        if bc_zero {
            for (v, &b) in values.iter_mut().zip(grid.boundary_mask()) {
                if b {
                    *v = 0.0;
                }
            }
        }
        Ok(Self {
            grid,
            values,
            bc_zero,
        })
    }

    pub fn zeros(grid: Arc<DomainGrid>) -> Self {
        let n = grid.node_count();
        Self {
            grid,
            values: vec![0.0; n],
            bc_zero: true,
        }
    }

    /// Samples `f` at every node.
    pub fn from_fn(
        grid: Arc<DomainGrid>,
        bc_zero: bool,
        f: impl Fn(&[f64]) -> f64,
    ) -> Result<Self> {
        let values = (0..grid.node_count())
            .map(|n| f(&grid.node_coords(n)))
            .collect();
        Self::new(grid, values, bc_zero)
    }

    pub fn grid(&self) -> &Arc<DomainGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn bc_zero(&self) -> bool {
        self.bc_zero
    }

    /// True when every boundary entry is exactly zero.
    pub fn vanishes_on_boundary(&self) -> bool {
        self.values
            .iter()
            .zip(self.grid.boundary_mask())
            .all(|(&v, &b)| !b || v == 0.0)
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
            bc_zero: self.bc_zero,
        }
    }

    /// `self + c * other`.
    pub fn axpy(&self, c: f64, other: &Self) -> Self {
        debug_assert_eq!(self.values.len(), other.values.len());
        Self {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + c * b)
                .collect(),
            bc_zero: self.bc_zero && other.bc_zero,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.axpy(-1.0, other)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// One N-vector per cell, stored contiguously (`cell * dim + axis`).
#[derive(Debug, Clone, PartialEq)]
pub struct CellVectorField {
    dim: usize,
    data: Vec<f64>,
}

impl CellVectorField {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn cell(&self, c: usize) -> &[f64] {
        &self.data[c * self.dim..(c + 1) * self.dim]
    }

    /// Euclidean length of each cell vector.
    pub fn magnitudes(&self) -> Vec<f64> {
        self.data.chunks_exact(self.dim).map(norm).collect()
    }

    pub fn raw(&self) -> &[f64] {
        &self.data
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Per-cell gradient: along each axis, the mean of the forward differences
/// over the `2^(dim-1)` cell edges parallel to that axis.
pub fn discrete_gradient(u: &GridFunction) -> CellVectorField {
    let grid = u.grid();
    let dim = grid.dim();
    let mut data = Vec::with_capacity(grid.cell_count() * dim);
    let mut g = [0.0; MAX_DIM];
    for &base in grid.cell_bases() {
        cell_gradient(grid, u.values(), base, &mut g[..dim]);
        data.extend_from_slice(&g[..dim]);
    }
    CellVectorField { dim, data }
}

#[inline]
pub(crate) fn cell_gradient(grid: &DomainGrid, u: &[f64], base: usize, out: &mut [f64]) {
    let dim = grid.dim();
    let weight = 1.0 / (1usize << (dim - 1)) as f64;
    let offsets = grid.corner_offsets();
    for (a, g) in out.iter_mut().enumerate() {
        let stride = grid.node_stride(a);
        let mut acc = 0.0;
        for (bits, &off) in offsets.iter().enumerate() {
            if bits >> a & 1 == 0 {
                acc += u[base + off + stride] - u[base + off];
            }
        }
        *g = acc * weight / grid.spacing()[a];
    }
}

/// Arithmetic mean of each cell's corner values.
pub fn node_to_cell(u: &GridFunction) -> Vec<f64> {
    node_values_to_cell(u.grid(), u.values())
}

pub(crate) fn node_values_to_cell(grid: &DomainGrid, u: &[f64]) -> Vec<f64> {
    let offsets = grid.corner_offsets();
    let weight = 1.0 / offsets.len() as f64;
    grid.cell_bases()
        .iter()
        .map(|&b| offsets.iter().map(|o| u[b + o]).sum::<f64>() * weight)
        .collect()
}

/// `(prod h) * sum_cells w`.
pub fn cell_quadrature(grid: &DomainGrid, w: &[f64]) -> f64 {
    debug_assert_eq!(w.len(), grid.cell_count());
    grid.cell_volume() * w.iter().sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid2(res: usize) -> Arc<DomainGrid> {
        Arc::new(DomainGrid::unit(2, res).unwrap())
    }

    #[test]
    fn counts_and_spacing() {
        let g = DomainGrid::new(&[1.0, 2.0, 3.0], &[4, 5, 6]).unwrap();
        assert_eq!(g.node_count(), 120);
        assert_eq!(g.cell_count(), 3 * 4 * 5);
        assert_eq!(g.spacing(), &[1.0 / 3.0, 0.5, 0.6]);
        assert!((g.volume() - 6.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(DomainGrid::unit(2, 3).is_err());
        assert!(DomainGrid::unit(1, 8).is_err());
        assert!(DomainGrid::unit(4, 8).is_err());
        assert!(DomainGrid::new(&[1.0, -1.0], &[5, 5]).is_err());
    }

    #[test]
    fn boundary_marking() {
        let g = DomainGrid::unit(2, 5).unwrap();
        let interior = (0..g.node_count()).filter(|&n| !g.is_boundary(n)).count();
        assert_eq!(interior, 9);
        assert!(g.is_boundary(0));
        assert!(!g.is_boundary(6));
    }

    #[test]
    fn node_order_is_lexicographic() {
        let g = DomainGrid::unit(2, 4).unwrap();
        assert_eq!(g.node_index(1), vec![0, 1]);
        assert_eq!(g.node_index(4), vec![1, 0]);
        let c = g.node_coords(7);
        assert!((c[0] - 1.0 / 3.0).abs() < 1e-15 && (c[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gradient_of_zero_is_zero() {
        let g = grid2(6);
        let u = GridFunction::zeros(g);
        assert!(discrete_gradient(&u).raw().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn gradient_exact_on_affine() {
        let g = grid2(7);
        let u = GridFunction::from_fn(g.clone(), false, |x| x[0]).unwrap();
        let grad = discrete_gradient(&u);
        for c in 0..grad.len() {
            assert!((grad.cell(c)[0] - 1.0).abs() < 1e-12);
            assert!(grad.cell(c)[1].abs() < 1e-12);
        }
        let g3 = Arc::new(DomainGrid::new(&[1.0, 2.0, 0.5], &[5, 6, 4]).unwrap());
        let u = GridFunction::from_fn(g3, false, |x| 3.0 * x[0] - 2.0 * x[1] + 0.5 * x[2] + 1.0)
            .unwrap();
        let grad = discrete_gradient(&u);
        let max_err = (0..grad.len())
            .flat_map(|c| {
                let v = grad.cell(c);
                [(v[0] - 3.0).abs(), (v[1] + 2.0).abs(), (v[2] - 0.5).abs()]
            })
            .fold(0.0, f64::max);
        assert!(max_err <= 1e-12, "{max_err}");
    }

    #[test]
    fn node_to_cell_affine_matches_center() {
        let g = grid2(6);
        let u = GridFunction::from_fn(g.clone(), false, |x| x[0]).unwrap();
        let cells = node_to_cell(&u);
        for (c, v) in cells.iter().enumerate() {
            assert!((v - g.cell_center(c)[0]).abs() < 1e-15);
        }
        let three = GridFunction::from_fn(g, false, |_| 3.0).unwrap();
        assert!(node_to_cell(&three).iter().all(|&v| v == 3.0));
    }

    #[test]
    fn quadrature_constants() {
        let g = grid2(9);
        let ones = vec![1.0; g.cell_count()];
        assert!((cell_quadrature(&g, &ones) - 1.0).abs() < 1e-14);
        let c = vec![-2.5; g.cell_count()];
        assert!((cell_quadrature(&g, &c) + 2.5).abs() < 1e-14);
    }

    #[test]
    fn quadrature_of_affine_integrand() {
        // int_0^1 int_0^1 (2 + x1) = 2.5; midpoint rule is exact for affine data
        let g = grid2(11);
        let w: Vec<f64> = (0..g.cell_count())
            .map(|c| 2.0 + g.cell_center(c)[0])
            .collect();
        assert!((cell_quadrature(&g, &w) - 2.5).abs() < 1e-13);
    }

    #[test]
    fn quadrature_second_order() {
        // int over unit square of exp(x1) * sin(pi x2) = (e - 1) * 2 / pi
        let exact = (std::f64::consts::E - 1.0) * 2.0 / std::f64::consts::PI;
        let err = |res| {
            let g = grid2(res);
            let u = GridFunction::from_fn(g.clone(), false, |x| {
                x[0].exp() * (std::f64::consts::PI * x[1]).sin()
            })
            .unwrap();
            (cell_quadrature(&g, &node_to_cell(&u)) - exact).abs()
        };
        let coarse = err(9);
        let fine = err(17);
        assert!(coarse / fine >= 3.0, "ratio {}", coarse / fine);
    }

    #[test]
    fn bc_projection() {
        let g = grid2(5);
        let u = GridFunction::new(g.clone(), vec![1.0; 25], true).unwrap();
        assert!(u.vanishes_on_boundary());
        assert_eq!(u.values().iter().filter(|&&v| v == 1.0).count(), 9);
        assert!(GridFunction::new(g.clone(), vec![1.0; 24], true).is_err());
        assert!(GridFunction::new(g, vec![f64::NAN; 25], false).is_err());
    }
}
