//! Analytic sharp interfaces: plane, slab, and ball.
//!
//! The signed distance convention is positive inside the solute region
//! `G`; the unit normal points from `G` into the solvent. Perimeters,
//! enclosed volumes, curvatures, and surface quadratures are exact
//! analytic quantities, which is what makes these shapes usable as
//! sharp-interface targets in convergence studies.

use super::StructuredGrid;
use crate::error::SolvateError;
use crate::Result;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Analytic interface bounding the solute region `G`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum InterfaceShape {
    /// `G = {x_axis < offset}` when `inside_below`, else the complement.
    Plane {
        axis: usize,
        offset: f64,
        inside_below: bool,
    },
    /// `G = {lo < x_axis < hi}`.
    Slab { axis: usize, lo: f64, hi: f64 },
    /// `G = {|x - center| < radius}`.
    Ball { center: [f64; 3], radius: f64 },
}

impl InterfaceShape {
    pub fn ball(center: [f64; 3], radius: f64) -> Self {
        InterfaceShape::Ball { center, radius }
    }

    pub fn plane(axis: usize, offset: f64) -> Self {
        InterfaceShape::Plane {
            axis,
            offset,
            inside_below: true,
        }
    }

    /// Signed distance to the interface, positive inside `G`.
    pub fn signed_distance(&self, x: [f64; 3]) -> f64 {
        match *self {
            InterfaceShape::Plane {
                axis,
                offset,
                inside_below,
            } => {
                if inside_below {
                    offset - x[axis]
                } else {
                    x[axis] - offset
                }
            }
            InterfaceShape::Slab { axis, lo, hi } => (x[axis] - lo).min(hi - x[axis]),
            InterfaceShape::Ball { center, radius } => radius - dist(x, center),
        }
    }

    /// Unit normal pointing from `G` to the solvent, extended off the
    /// interface along distance rays.
    pub fn normal(&self, x: [f64; 3]) -> [f64; 3] {
        match *self {
            InterfaceShape::Plane {
                axis, inside_below, ..
            } => {
                let mut n = [0.0; 3];
                n[axis] = if inside_below { 1.0 } else { -1.0 };
                n
            }
            InterfaceShape::Slab { axis, lo, hi } => {
                let mut n = [0.0; 3];
                n[axis] = if x[axis] - lo < hi - x[axis] { -1.0 } else { 1.0 };
                n
            }
            InterfaceShape::Ball { center, radius: _ } => {
                let r = dist(x, center);
                if r == 0.0 {
                    // center is on the medial axis; any direction works
                    return [1.0, 0.0, 0.0];
                }
                [
                    (x[0] - center[0]) / r,
                    (x[1] - center[1]) / r,
                    (x[2] - center[2]) / r,
                ]
            }
        }
    }

    /// Mean curvature (average of principal curvatures), positive for a
    /// convex solute.
    pub fn mean_curvature(&self) -> f64 {
        match *self {
            InterfaceShape::Ball { radius, .. } => 1.0 / radius,
            _ => 0.0,
        }
    }

    /// Laplacian of the signed distance at `x` in the given dimension;
    /// diverges on the medial axis (ball center), where the caller's
    /// quadrature weight is expected to vanish or be masked.
    pub fn distance_laplacian(&self, x: [f64; 3], dim: usize) -> f64 {
        match *self {
            InterfaceShape::Ball { center, .. } => {
                let r = dist(x, center);
                if r == 0.0 {
                    0.0
                } else {
                    -((dim - 1) as f64) / r
                }
            }
            _ => 0.0,
        }
    }

    /// Perimeter of `G` inside the grid's box: surface area in 3D, curve
    /// length in 2D, interface-point count in 1D. Radial grids count as
    /// three-dimensional.
    pub fn perimeter(&self, grid: &StructuredGrid) -> f64 {
        let dim = effective_dim(grid);
        match *self {
            InterfaceShape::Plane { axis, .. } => cross_section(grid, axis, dim),
            InterfaceShape::Slab { axis, .. } => 2.0 * cross_section(grid, axis, dim),
            InterfaceShape::Ball { radius, .. } => match dim {
                3 => 4.0 * PI * radius * radius,
                2 => 2.0 * PI * radius,
                _ => 2.0,
            },
        }
    }

    /// Volume (measure) of `G` inside the grid's box.
    pub fn volume(&self, grid: &StructuredGrid) -> f64 {
        let dim = effective_dim(grid);
        match *self {
            InterfaceShape::Plane {
                axis,
                offset,
                inside_below,
            } => {
                let lo = grid.lo()[axis];
                let hi = grid.hi()[axis];
                let depth = if inside_below {
                    (offset - lo).clamp(0.0, hi - lo)
                } else {
                    (hi - offset).clamp(0.0, hi - lo)
                };
                depth * cross_section(grid, axis, dim)
            }
            InterfaceShape::Slab { axis, lo, hi } => (hi - lo) * cross_section(grid, axis, dim),
            InterfaceShape::Ball { radius, .. } => match dim {
                3 => 4.0 / 3.0 * PI * radius.powi(3),
                2 => PI * radius * radius,
                _ => 2.0 * radius,
            },
        }
    }

    /// Verifies the shape sits inside the grid box with margin; balls
    /// must be fully interior.
    pub fn validate_in(&self, grid: &StructuredGrid) -> Result<()> {
        match *self {
            InterfaceShape::Ball { center, radius } => {
                if !(radius > 0.0) {
                    return Err(SolvateError::Validation("ball radius must be positive".into()));
                }
                if grid.is_radial() {
                    if center != [0.0; 3] {
                        return Err(SolvateError::Validation(
                            "radial grids require origin-centered balls".into(),
                        ));
                    }
                    if radius <= grid.lo()[0] || radius >= grid.hi()[0] {
                        return Err(SolvateError::Validation(
                            "ball radius must lie inside the radial extent".into(),
                        ));
                    }
                    return Ok(());
                }
                for d in 0..grid.dim() {
                    if center[d] - radius < grid.lo()[d] || center[d] + radius > grid.hi()[d] {
                        return Err(SolvateError::Validation(
                            "ball must be fully interior to the domain".into(),
                        ));
                    }
                }
                Ok(())
            }
            InterfaceShape::Plane { axis, offset, .. } => {
                if axis >= grid.dim() {
                    return Err(SolvateError::Validation("plane axis outside grid dimension".into()));
                }
                if offset <= grid.lo()[axis] || offset >= grid.hi()[axis] {
                    return Err(SolvateError::Validation(
                        "plane offset must cross the domain".into(),
                    ));
                }
                Ok(())
            }
            InterfaceShape::Slab { axis, lo, hi } => {
                if axis >= grid.dim() {
                    return Err(SolvateError::Validation("slab axis outside grid dimension".into()));
                }
                if !(lo < hi) || lo <= grid.lo()[axis] || hi >= grid.hi()[axis] {
                    return Err(SolvateError::Validation(
                        "slab faces must lie strictly inside the domain".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    /// Surface quadrature `∫_{∂G} f(x, nu) dS` over the portion of the
    /// interface inside the grid box. Gauss-Legendre along flat
    /// directions and in the polar angle of spheres; trapezoid in
    /// periodic angles (spectrally accurate there).
    pub fn surface_integral(
        &self,
        grid: &StructuredGrid,
        npts: usize,
        f: &dyn Fn([f64; 3], [f64; 3]) -> f64,
    ) -> f64 {
        let dim = effective_dim(grid);
        match *self {
            InterfaceShape::Plane {
                axis,
                offset,
                inside_below,
            } => {
                let mut nu = [0.0; 3];
                nu[axis] = if inside_below { 1.0 } else { -1.0 };
                plane_integral(grid, axis, offset, nu, dim, npts, f)
            }
            InterfaceShape::Slab { axis, lo, hi } => {
                let mut nlo = [0.0; 3];
                nlo[axis] = -1.0;
                let mut nhi = [0.0; 3];
                nhi[axis] = 1.0;
                plane_integral(grid, axis, lo, nlo, dim, npts, f)
                    + plane_integral(grid, axis, hi, nhi, dim, npts, f)
            }
            InterfaceShape::Ball { center, radius } => match dim {
                3 => {
                    let (u, wu) = gauss_legendre(npts);
                    let nphi = 2 * npts;
                    let mut total = 0.0;
                    for (ui, wi) in u.iter().zip(&wu) {
                        let st = (1.0 - ui * ui).sqrt();
                        for p in 0..nphi {
                            let phi = 2.0 * PI * p as f64 / nphi as f64;
                            let nu = [st * phi.cos(), st * phi.sin(), *ui];
                            let x = [
                                center[0] + radius * nu[0],
                                center[1] + radius * nu[1],
                                center[2] + radius * nu[2],
                            ];
                            total += wi * (2.0 * PI / nphi as f64) * radius * radius * f(x, nu);
                        }
                    }
                    total
                }
                2 => {
                    let nth = 4 * npts;
                    let mut total = 0.0;
                    for p in 0..nth {
                        let th = 2.0 * PI * p as f64 / nth as f64;
                        let nu = [th.cos(), th.sin(), 0.0];
                        let x = [center[0] + radius * nu[0], center[1] + radius * nu[1], 0.0];
                        total += (2.0 * PI / nth as f64) * radius * f(x, nu);
                    }
                    total
                }
                _ => {
                    let xr = [center[0] + radius, 0.0, 0.0];
                    let xl = [center[0] - radius, 0.0, 0.0];
                    f(xr, [1.0, 0.0, 0.0]) + f(xl, [-1.0, 0.0, 0.0])
                }
            },
        }
    }
}

fn dist(x: [f64; 3], y: [f64; 3]) -> f64 {
    ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2) + (x[2] - y[2]).powi(2)).sqrt()
}

/// Radial grids describe spherically symmetric 3D problems.
fn effective_dim(grid: &StructuredGrid) -> usize {
    if grid.is_radial() {
        3
    } else {
        grid.dim()
    }
}

/// Box cross-section measure transverse to `axis`.
fn cross_section(grid: &StructuredGrid, axis: usize, dim: usize) -> f64 {
    let mut a = 1.0;
    for d in 0..dim {
        if d != axis {
            a *= grid.hi()[d] - grid.lo()[d];
        }
    }
    a
}

fn plane_integral(
    grid: &StructuredGrid,
    axis: usize,
    offset: f64,
    nu: [f64; 3],
    dim: usize,
    npts: usize,
    f: &dyn Fn([f64; 3], [f64; 3]) -> f64,
) -> f64 {
    let others: Vec<usize> = (0..dim).filter(|&d| d != axis).collect();
    match others.len() {
        0 => {
            let mut x = [0.0; 3];
            x[axis] = offset;
            f(x, nu)
        }
        1 => {
            let d = others[0];
            let (t, w) = gauss_legendre_on(npts, grid.lo()[d], grid.hi()[d]);
            let mut total = 0.0;
            for (ti, wi) in t.iter().zip(&w) {
                let mut x = [0.0; 3];
                x[axis] = offset;
                x[d] = *ti;
                total += wi * f(x, nu);
            }
            total
        }
        _ => {
            let (d1, d2) = (others[0], others[1]);
            let (t1, w1) = gauss_legendre_on(npts, grid.lo()[d1], grid.hi()[d1]);
            let (t2, w2) = gauss_legendre_on(npts, grid.lo()[d2], grid.hi()[d2]);
            let mut total = 0.0;
            for (a, wa) in t1.iter().zip(&w1) {
                for (b, wb) in t2.iter().zip(&w2) {
                    let mut x = [0.0; 3];
                    x[axis] = offset;
                    x[d1] = *a;
                    x[d2] = *b;
                    total += wa * wb * f(x, nu);
                }
            }
            total
        }
    }
}

/// Fixed 4-point Gauss-Legendre rule on [-1, 1].
pub fn gauss_legendre_cached4() -> ([f64; 4], [f64; 4]) {
    (
        [
            -0.8611363115940526,
            -0.3399810435848563,
            0.3399810435848563,
            0.8611363115940526,
        ],
        [
            0.3478548451374538,
            0.6521451548625461,
            0.6521451548625461,
            0.3478548451374538,
        ],
    )
}

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Chebyshev-like initial guess
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        nodes[n - 1 - i] = x;
        weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Gauss-Legendre on [a, b].
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    (
        x.iter().map(|t| mid + half * t).collect(),
        w.iter().map(|t| half * t).collect(),
    )
}

/// Legendre P_n and its derivative at x.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}
