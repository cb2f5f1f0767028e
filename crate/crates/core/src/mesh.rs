//! Partitions of the unit interval.
//!
//! Meshes are immutable and shared through [`Arc`]. Reference meshes used to
//! evaluate continuous-level quantities are always nested refinements of the
//! study meshes, so piecewise constants on a coarse mesh are represented
//! exactly on the fine one.

use std::sync::Arc;

use crate::error::{Error, Result};

const EDGE_TOL: f64 = 1e-12;

/// A partition `0 = x_0 < x_1 < ... < x_n = 1` of the unit interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh1D {
    edges: Vec<f64>,
    cell_sizes: Vec<f64>,
    h: f64,
    sigma: f64,
    uniform: bool,
}

impl Mesh1D {
    /// Uniform mesh with `n` equal cells.
    pub fn uniform(n: usize) -> Result<Arc<Mesh1D>> {
        if n == 0 {
            return Err(Error::InvalidMesh("a mesh needs at least one cell".into()));
        }
        let nf = n as f64;
        let edges: Vec<f64> = (0..=n).map(|i| i as f64 / nf).collect();
        let h = 1.0 / nf;
        Ok(Arc::new(Mesh1D {
            edges,
            cell_sizes: vec![h; n],
            h,
            sigma: 1.0,
            uniform: true,
        }))
    }

    /// Mesh from explicit edges. The edges must start at 0, end at 1 and be
    /// strictly increasing.
    pub fn from_edges(edges: Vec<f64>) -> Result<Arc<Mesh1D>> {
        if edges.len() < 2 {
            return Err(Error::InvalidMesh("need at least two edges".into()));
        }
        if edges[0] != 0.0 || edges[edges.len() - 1] != 1.0 {
            return Err(Error::InvalidMesh("edges must start at 0 and end at 1".into()));
        }
        if edges.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidMesh("edges must be strictly increasing".into()));
        }
        let cell_sizes: Vec<f64> = edges.windows(2).map(|w| w[1] - w[0]).collect();
        let h = cell_sizes.iter().cloned().fold(0.0, f64::max);
        let h_min = cell_sizes.iter().cloned().fold(f64::INFINITY, f64::min);
        let n = cell_sizes.len() as f64;
        let uniform = cell_sizes.iter().all(|&s| (s * n - 1.0).abs() < 1e-12);
        Ok(Arc::new(Mesh1D {
            edges,
            cell_sizes,
            h,
            sigma: h_min / h,
            uniform,
        }))
    }

    /// Splits every cell into `factor` equal subcells.
    pub fn refine_nested(&self, factor: usize) -> Result<Arc<Mesh1D>> {
        if factor == 0 {
            return Err(Error::InvalidMesh("refinement factor must be positive".into()));
        }
        if self.uniform {
            return Mesh1D::uniform(self.n_cells() * factor);
        }
        let mut edges = Vec::with_capacity(self.n_cells() * factor + 1);
        for w in self.edges.windows(2) {
            let step = (w[1] - w[0]) / factor as f64;
            for j in 0..factor {
                edges.push(w[0] + j as f64 * step);
            }
        }
        edges.push(1.0);
        Mesh1D::from_edges(edges)
    }

    pub fn n_cells(&self) -> usize {
        self.cell_sizes.len()
    }

    pub fn n_interior_nodes(&self) -> usize {
        self.n_cells() - 1
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    /// Cell diameters `h_K`.
    pub fn cell_sizes(&self) -> &[f64] {
        &self.cell_sizes
    }

    /// Maximal cell diameter.
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Quasi-uniformity constant: `h_K >= sigma * h` for every cell.
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    pub fn cell(&self, k: usize) -> (f64, f64) {
        (self.edges[k], self.edges[k + 1])
    }

    pub fn midpoint(&self, k: usize) -> f64 {
        0.5 * (self.edges[k] + self.edges[k + 1])
    }

    /// Index of the cell containing `x`; points on an interior edge belong to
    /// the cell on their right.
    pub fn locate(&self, x: f64) -> usize {
        let n = self.n_cells();
        if x <= 0.0 {
            return 0;
        }
        if x >= 1.0 {
            return n - 1;
        }
        if self.uniform {
            return ((x * n as f64) as usize).min(n - 1);
        }
        match self.edges.binary_search_by(|e| e.partial_cmp(&x).unwrap()) {
            Ok(i) => i.min(n - 1),
            Err(i) => i - 1,
        }
    }

    pub fn same_as(&self, other: &Mesh1D) -> bool {
        std::ptr::eq(self, other)
            || (self.n_cells() == other.n_cells()
                && self
                    .edges
                    .iter()
                    .zip(&other.edges)
                    .all(|(a, b)| (a - b).abs() <= EDGE_TOL))
    }

    /// For every cell of `fine`, the index of the cell of `self` containing
    /// it. Fails unless `fine` is a nested refinement of `self`.
    pub fn refinement_map(&self, fine: &Mesh1D) -> Result<Vec<usize>> {
        let (nc, nf) = (self.n_cells(), fine.n_cells());
        let err = || Error::NonNestedMeshes { coarse: nc, fine: nf };
        if nf < nc {
            return Err(err());
        }
        if self.uniform && fine.uniform {
            if nf % nc != 0 {
                return Err(err());
            }
            let factor = nf / nc;
            return Ok((0..nf).map(|i| i / factor).collect());
        }
        let mut map = Vec::with_capacity(nf);
        let mut k = 0;
        for i in 0..nf {
            let (a, b) = fine.cell(i);
            while k < nc && self.edges[k + 1] <= a + EDGE_TOL {
                k += 1;
            }
            if k >= nc || b > self.edges[k + 1] + EDGE_TOL {
                return Err(err());
            }
            map.push(k);
        }
        // every coarse edge must also be a fine edge
        for &e in &self.edges {
            let j = fine.locate(e);
            let hit = (fine.edges[j] - e).abs() <= EDGE_TOL
                || (fine.edges[j + 1] - e).abs() <= EDGE_TOL;
            if !hit {
                return Err(err());
            }
        }
        Ok(map)
    }

    pub fn is_refinement_of(&self, coarse: &Mesh1D) -> bool {
        coarse.refinement_map(self).is_ok()
    }
}
