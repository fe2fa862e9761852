//! Structured uniform grids, fields, finite-difference operators,
//! quadrature, and analytic interface shapes.
//!
//! Grids are node-centered (nodes include the domain boundary) in 1, 2,
//! or 3 dimensions, plus a radial mode: a 1D grid in `r` whose quadrature
//! carries the `4 pi r^2` measure, used for spherically symmetric 3D
//! problems. Quadrature is the composite trapezoid rule, which is
//! second-order in general and spectrally accurate for smooth integrands
//! that decay inside the domain.

mod field;
mod io;
mod ops;
mod shape;

pub use field::{ScalarField, TensorField, VectorField};
pub use io::{
    atomic_write, read_field_binary, write_field_binary, write_field_binary_tagged,
    write_field_csv,
};
pub use ops::{divergence, gradient, integrate, laplacian, tensor_divergence};
pub use shape::{gauss_legendre, gauss_legendre_cached4, gauss_legendre_on, InterfaceShape};

use crate::error::SolvateError;
use crate::Result;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// A uniform node-centered grid on a box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuredGrid {
    dim: usize,
    lo: [f64; 3],
    hi: [f64; 3],
    /// Nodes per active axis (1 on inactive axes).
    n: [usize; 3],
    h: [f64; 3],
    radial: bool,
}

impl StructuredGrid {
    /// Builds a grid; every active axis needs at least 8 cells.
    pub fn new(dim: usize, lo: &[f64], hi: &[f64], nodes: &[usize]) -> Result<Arc<Self>> {
        Self::build(dim, lo, hi, nodes, false)
    }

    /// 1D grid in `r` on `[lo, hi]` with the spherical-shell measure.
    pub fn radial(lo: f64, hi: f64, nodes: usize) -> Result<Arc<Self>> {
        if lo < 0.0 {
            return Err(SolvateError::Validation(
                "radial grid requires r >= 0".into(),
            ));
        }
        Self::build(1, &[lo], &[hi], &[nodes], true)
    }

    fn build(dim: usize, lo: &[f64], hi: &[f64], nodes: &[usize], radial: bool) -> Result<Arc<Self>> {
        if !(1..=3).contains(&dim) {
            return Err(SolvateError::Validation(format!(
                "grid dimension must be 1, 2, or 3; got {dim}"
            )));
        }
        if lo.len() != dim || hi.len() != dim || nodes.len() != dim {
            return Err(SolvateError::Validation(
                "grid extents/counts must match the dimension".into(),
            ));
        }
        let mut glo = [0.0; 3];
        let mut ghi = [1.0; 3];
        let mut gn = [1usize; 3];
        let mut gh = [1.0; 3];
        for d in 0..dim {
            if !(hi[d] > lo[d]) {
                return Err(SolvateError::Validation(format!(
                    "axis {d}: hi must exceed lo"
                )));
            }
            if nodes[d] < 9 {
                return Err(SolvateError::Validation(format!(
                    "axis {d}: at least 8 cells (9 nodes) required, got {} nodes",
                    nodes[d]
                )));
            }
            glo[d] = lo[d];
            ghi[d] = hi[d];
            gn[d] = nodes[d];
            gh[d] = (hi[d] - lo[d]) / (nodes[d] - 1) as f64;
        }
        Ok(Arc::new(Self {
            dim,
            lo: glo,
            hi: ghi,
            n: gn,
            h: gh,
            radial,
        }))
    }

    /// Grid covering the same box with the mesh refined by `factor`.
    pub fn refined(&self, factor: usize) -> Result<Arc<Self>> {
        let nodes: Vec<usize> = (0..self.dim).map(|d| (self.n[d] - 1) * factor + 1).collect();
        Self::build(
            self.dim,
            &self.lo[..self.dim],
            &self.hi[..self.dim],
            &nodes,
            self.radial,
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_radial(&self) -> bool {
        self.radial
    }

    pub fn lo(&self) -> [f64; 3] {
        self.lo
    }

    pub fn hi(&self) -> [f64; 3] {
        self.hi
    }

    pub fn nodes(&self) -> [usize; 3] {
        self.n
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.h
    }

    pub fn min_spacing(&self) -> f64 {
        (0..self.dim).map(|d| self.h[d]).fold(f64::INFINITY, f64::min)
    }

    pub fn node_count(&self) -> usize {
        self.n[0] * self.n[1] * self.n[2]
    }

    /// Linear index from per-axis indices.
    #[inline]
    pub fn idx(&self, c: [usize; 3]) -> usize {
        c[0] + self.n[0] * (c[1] + self.n[1] * c[2])
    }

    /// Per-axis indices from the linear index.
    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let i = idx % self.n[0];
        let j = (idx / self.n[0]) % self.n[1];
        let k = idx / (self.n[0] * self.n[1]);
        [i, j, k]
    }

    /// Physical position of a node.
    #[inline]
    pub fn position(&self, idx: usize) -> [f64; 3] {
        let c = self.coords(idx);
        let mut x = [0.0; 3];
        for d in 0..3 {
            x[d] = self.lo[d] + c[d] as f64 * self.h[d];
        }
        x
    }

    /// Trapezoid quadrature weight of a node; in radial mode this
    /// includes the `4 pi r^2` shell measure.
    pub fn weight(&self, idx: usize) -> f64 {
        let c = self.coords(idx);
        let mut w = 1.0;
        for d in 0..self.dim {
            let edge = c[d] == 0 || c[d] == self.n[d] - 1;
            w *= self.h[d] * if edge { 0.5 } else { 1.0 };
        }
        if self.radial {
            let r = self.lo[0] + c[0] as f64 * self.h[0];
            w *= 4.0 * std::f64::consts::PI * r * r;
        }
        w
    }

    /// True if the node lies on the boundary of the box.
    pub fn is_boundary(&self, idx: usize) -> bool {
        let c = self.coords(idx);
        (0..self.dim).any(|d| c[d] == 0 || c[d] == self.n[d] - 1)
    }

    /// True if the node is at least `collar` cells away from the boundary
    /// on every active axis.
    pub fn is_interior(&self, idx: usize, collar: usize) -> bool {
        let c = self.coords(idx);
        (0..self.dim).all(|d| c[d] >= collar && c[d] + collar <= self.n[d] - 1)
    }

    /// Total measure of the box (or of the radial shell).
    pub fn domain_measure(&self) -> f64 {
        if self.radial {
            let (a, b) = (self.lo[0], self.hi[0]);
            4.0 / 3.0 * std::f64::consts::PI * (b * b * b - a * a * a)
        } else {
            (0..self.dim).map(|d| self.hi[d] - self.lo[d]).product()
        }
    }

    /// Checks that two grids are identical.
    pub fn assert_same(&self, other: &Self, what: &str) -> Result<()> {
        if self != other {
            return Err(SolvateError::ShapeMismatch(format!(
                "{what}: fields live on different grids"
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_tiny_grids_and_bad_extents() {
        assert!(StructuredGrid::new(1, &[0.0], &[1.0], &[8]).is_err());
        assert!(StructuredGrid::new(1, &[0.0], &[-1.0], &[16]).is_err());
        assert!(StructuredGrid::new(4, &[0.0], &[1.0], &[16]).is_err());
        assert!(StructuredGrid::radial(-0.5, 1.0, 16).is_err());
    }

    #[test]
    fn indexing_round_trips() {
        let g = StructuredGrid::new(3, &[0.0, 0.0, 0.0], &[1.0, 2.0, 3.0], &[9, 11, 13]).unwrap();
        for idx in [0, 5, 100, g.node_count() - 1] {
            assert_eq!(g.idx(g.coords(idx)), idx);
        }
        let x = g.position(g.idx([8, 10, 12]));
        assert!((x[0] - 1.0).abs() < 1e-14);
        assert!((x[1] - 2.0).abs() < 1e-14);
        assert!((x[2] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn weights_sum_to_box_measure() {
        let g = StructuredGrid::new(2, &[0.0, -1.0], &[2.0, 1.0], &[17, 33]).unwrap();
        let total: f64 = (0..g.node_count()).map(|i| g.weight(i)).sum();
        assert!((total - 4.0).abs() < 1e-12);
    }
}
