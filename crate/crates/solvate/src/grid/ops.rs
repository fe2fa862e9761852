//! Finite-difference operators and quadrature.
//!
//! Second-order central differences in the interior, second-order
//! one-sided stencils on the boundary. The tensor divergence is row-wise,
//! `(div T)_i = d_j T_ij`.

use super::field::{ScalarField, TensorField, VectorField};
use super::StructuredGrid;

/// Per-axis derivative of raw node data.
fn axis_derivative(grid: &StructuredGrid, data: &[f64], idx: usize, d: usize) -> f64 {
    let c = grid.coords(idx);
    let n = grid.nodes()[d];
    let h = grid.spacing()[d];
    let mut cm = c;
    let mut cp = c;
    if c[d] == 0 {
        cp[d] = 1;
        let mut cpp = c;
        cpp[d] = 2;
        let f0 = data[idx];
        let f1 = data[grid.idx(cp)];
        let f2 = data[grid.idx(cpp)];
        (-3.0 * f0 + 4.0 * f1 - f2) / (2.0 * h)
    } else if c[d] == n - 1 {
        cm[d] = n - 2;
        let mut cmm = c;
        cmm[d] = n - 3;
        let f0 = data[idx];
        let f1 = data[grid.idx(cm)];
        let f2 = data[grid.idx(cmm)];
        (3.0 * f0 - 4.0 * f1 + f2) / (2.0 * h)
    } else {
        cm[d] -= 1;
        cp[d] += 1;
        (data[grid.idx(cp)] - data[grid.idx(cm)]) / (2.0 * h)
    }
}

/// Per-axis second derivative of raw node data.
fn axis_second_derivative(grid: &StructuredGrid, data: &[f64], idx: usize, d: usize) -> f64 {
    let c = grid.coords(idx);
    let n = grid.nodes()[d];
    let h = grid.spacing()[d];
    let at = |i: usize| {
        let mut cc = c;
        cc[d] = i;
        data[grid.idx(cc)]
    };
    if c[d] == 0 {
        (2.0 * at(0) - 5.0 * at(1) + 4.0 * at(2) - at(3)) / (h * h)
    } else if c[d] == n - 1 {
        (2.0 * at(n - 1) - 5.0 * at(n - 2) + 4.0 * at(n - 3) - at(n - 4)) / (h * h)
    } else {
        (at(c[d] + 1) - 2.0 * at(c[d]) + at(c[d] - 1)) / (h * h)
    }
}

/// Discrete gradient.
pub fn gradient(f: &ScalarField) -> VectorField {
    let grid = f.grid();
    let mut out = VectorField::zeros(grid);
    let data = f.values();
    for idx in 0..grid.node_count() {
        let mut g = [0.0; 3];
        for d in 0..grid.dim() {
            g[d] = axis_derivative(grid, data, idx, d);
        }
        out.values_mut()[idx] = g;
    }
    out
}

/// Discrete Laplacian; in radial mode this is the spherical Laplacian
/// `f'' + (2/r) f'` with the symmetry limit `3 f''` at `r = 0`.
pub fn laplacian(f: &ScalarField) -> ScalarField {
    let grid = f.grid();
    let mut out = ScalarField::zeros(grid);
    let data = f.values();
    for idx in 0..grid.node_count() {
        let mut lap = 0.0;
        for d in 0..grid.dim() {
            lap += axis_second_derivative(grid, data, idx, d);
        }
        if grid.is_radial() {
            let r = grid.position(idx)[0];
            if r > 0.0 {
                lap += 2.0 / r * axis_derivative(grid, data, idx, 0);
            } else {
                lap *= 3.0;
            }
        }
        out.values_mut()[idx] = lap;
    }
    out
}

/// Discrete divergence of a vector field.
pub fn divergence(v: &VectorField) -> ScalarField {
    let grid = v.grid();
    let mut out = ScalarField::zeros(grid);
    let n = grid.node_count();
    let mut component = vec![0.0; n];
    for d in 0..grid.dim() {
        for (idx, val) in component.iter_mut().enumerate() {
            *val = v.values()[idx][d];
        }
        for idx in 0..n {
            out.values_mut()[idx] += axis_derivative(grid, &component, idx, d);
        }
    }
    out
}

/// Row-wise tensor divergence `(div T)_i = d_j T_ij`.
pub fn tensor_divergence(t: &TensorField) -> VectorField {
    let grid = t.grid();
    let mut out = VectorField::zeros(grid);
    let n = grid.node_count();
    let mut component = vec![0.0; n];
    for i in 0..grid.dim() {
        for j in 0..grid.dim() {
            for (idx, val) in component.iter_mut().enumerate() {
                *val = t.values()[idx][i][j];
            }
            for idx in 0..n {
                out.values_mut()[idx][i] += axis_derivative(grid, &component, idx, j);
            }
        }
    }
    out
}

/// Composite trapezoid quadrature; radial grids integrate against
/// `4 pi r^2 dr`.
pub fn integrate(f: &ScalarField) -> f64 {
    let grid = f.grid();
    f.values()
        .iter()
        .enumerate()
        .map(|(i, v)| grid.weight(i) * v)
        .sum()
}
