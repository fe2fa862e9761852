//! Grid-sampled scalar, vector, and tensor fields.

use super::StructuredGrid;
use crate::error::SolvateError;
use crate::Result;
use std::sync::Arc;

/// Scalar field on the nodes of a grid.
///
/// Fields produced by lifting an analytic 1D profile across an analytic
/// interface carry their exact gradient and Laplacian alongside the node
/// values; energy assembly and stress evaluation prefer those companions
/// when present, which removes the finite-difference floor from the
/// convergence measurements. Fields produced by relaxation or by hand
/// have no companions and are differenced numerically.
#[derive(Debug, Clone)]
pub struct ScalarField {
    grid: Arc<StructuredGrid>,
    data: Vec<f64>,
    analytic_grad: Option<Vec<[f64; 3]>>,
    analytic_lap: Option<Vec<f64>>,
    under_resolved: bool,
}

impl ScalarField {
    pub fn zeros(grid: &Arc<StructuredGrid>) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: &Arc<StructuredGrid>, v: f64) -> Self {
        Self {
            grid: grid.clone(),
            data: vec![v; grid.node_count()],
            analytic_grad: None,
            analytic_lap: None,
            under_resolved: false,
        }
    }

    /// Samples a function of position at every node.
    pub fn from_fn(grid: &Arc<StructuredGrid>, f: impl Fn([f64; 3]) -> f64) -> Self {
        let data = (0..grid.node_count()).map(|i| f(grid.position(i))).collect();
        Self {
            grid: grid.clone(),
            data,
            analytic_grad: None,
            analytic_lap: None,
            under_resolved: false,
        }
    }

    pub fn from_values(grid: &Arc<StructuredGrid>, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.node_count() {
            return Err(SolvateError::ShapeMismatch(format!(
                "value array length {} != node count {}",
                data.len(),
                grid.node_count()
            )));
        }
        Ok(Self {
            grid: grid.clone(),
            data,
            analytic_grad: None,
            analytic_lap: None,
            under_resolved: false,
        })
    }

    pub fn grid(&self) -> &Arc<StructuredGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    /// Mutable node values; drops any analytic companions, which would
    /// otherwise go stale.
    pub fn values_mut(&mut self) -> &mut Vec<f64> {
        self.analytic_grad = None;
        self.analytic_lap = None;
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Attaches the exact gradient/Laplacian of the continuum field this
    /// sampling came from.
    pub fn set_analytic(&mut self, grad: Vec<[f64; 3]>, lap: Option<Vec<f64>>) {
        assert_eq!(grad.len(), self.data.len());
        if let Some(ref l) = lap {
            assert_eq!(l.len(), self.data.len());
        }
        self.analytic_grad = Some(grad);
        self.analytic_lap = lap;
    }

    pub fn analytic_grad(&self) -> Option<&[[f64; 3]]> {
        self.analytic_grad.as_deref()
    }

    pub fn analytic_lap(&self) -> Option<&[f64]> {
        self.analytic_lap.as_deref()
    }

    pub fn strip_analytic(&mut self) {
        self.analytic_grad = None;
        self.analytic_lap = None;
    }

    pub fn set_under_resolved(&mut self, flag: bool) {
        self.under_resolved = flag;
    }

    /// True when the grid does not resolve the transition this field was
    /// built with (h > xi/4 at lift time).
    pub fn under_resolved(&self) -> bool {
        self.under_resolved
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Multilinear interpolation at an arbitrary point (clamped to the
    /// box).
    pub fn sample(&self, x: [f64; 3]) -> f64 {
        let grid = &self.grid;
        let dim = grid.dim();
        let mut base = [0usize; 3];
        let mut frac = [0.0; 3];
        for d in 0..dim {
            let t = ((x[d] - grid.lo()[d]) / grid.spacing()[d])
                .clamp(0.0, (grid.nodes()[d] - 1) as f64);
            let i = (t.floor() as usize).min(grid.nodes()[d] - 2);
            base[d] = i;
            frac[d] = t - i as f64;
        }
        let mut acc = 0.0;
        let corners = 1usize << dim;
        for corner in 0..corners {
            let mut c = base;
            let mut w = 1.0;
            for d in 0..dim {
                if corner >> d & 1 == 1 {
                    c[d] += 1;
                    w *= frac[d];
                } else {
                    w *= 1.0 - frac[d];
                }
            }
            acc += w * self.data[self.grid.idx(c)];
        }
        acc
    }

    /// 64-bit content hash of the node values, used for staleness checks
    /// between a field and solutions computed from it.
    pub fn content_hash(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for v in &self.data {
            h ^= v.to_bits();
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h
    }
}

/// Vector field; inactive components on lower-dimensional grids stay 0.
#[derive(Debug, Clone)]
pub struct VectorField {
    grid: Arc<StructuredGrid>,
    data: Vec<[f64; 3]>,
}

impl VectorField {
    pub fn zeros(grid: &Arc<StructuredGrid>) -> Self {
        Self {
            grid: grid.clone(),
            data: vec![[0.0; 3]; grid.node_count()],
        }
    }

    pub fn from_fn(grid: &Arc<StructuredGrid>, f: impl Fn([f64; 3]) -> [f64; 3]) -> Self {
        let data = (0..grid.node_count()).map(|i| f(grid.position(i))).collect();
        Self {
            grid: grid.clone(),
            data,
        }
    }

    pub fn from_values(grid: &Arc<StructuredGrid>, data: Vec<[f64; 3]>) -> Result<Self> {
        if data.len() != grid.node_count() {
            return Err(SolvateError::ShapeMismatch(format!(
                "vector array length {} != node count {}",
                data.len(),
                grid.node_count()
            )));
        }
        Ok(Self {
            grid: grid.clone(),
            data,
        })
    }

    pub fn grid(&self) -> &Arc<StructuredGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[[f64; 3]] {
        &self.data
    }

    pub fn values_mut(&mut self) -> &mut Vec<[f64; 3]> {
        &mut self.data
    }
}

/// Symmetric-capable 3x3 tensor field (row-major `[i][j]`).
#[derive(Debug, Clone)]
pub struct TensorField {
    grid: Arc<StructuredGrid>,
    data: Vec<[[f64; 3]; 3]>,
}

impl TensorField {
    pub fn zeros(grid: &Arc<StructuredGrid>) -> Self {
        Self {
            grid: grid.clone(),
            data: vec![[[0.0; 3]; 3]; grid.node_count()],
        }
    }

    pub fn from_values(grid: &Arc<StructuredGrid>, data: Vec<[[f64; 3]; 3]>) -> Result<Self> {
        if data.len() != grid.node_count() {
            return Err(SolvateError::ShapeMismatch(format!(
                "tensor array length {} != node count {}",
                data.len(),
                grid.node_count()
            )));
        }
        Ok(Self {
            grid: grid.clone(),
            data,
        })
    }

    pub fn grid(&self) -> &Arc<StructuredGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[[[f64; 3]; 3]] {
        &self.data
    }

    pub fn values_mut(&mut self) -> &mut Vec<[[f64; 3]; 3]> {
        &mut self.data
    }
}

