//! Nonlinear Poisson-Boltzmann boundary-value solver.
//!
//! Solves the weak problem
//!
//! ```text
//! ∫ [ eps ∇psi . ∇eta + s B'(psi) eta ] = ∫ rho eta   for all eta in H_0^1
//! psi = psi_inf on the domain boundary
//! ```
//!
//! where the coefficient pair `(eps, s)` comes either from a phase field
//! (`eps = eps(phi)`, `s = (phi-1)^2`) or from a sharp interface
//! (`eps` piecewise constant, `s = chi_solvent`). The discretization is a
//! conservative finite-volume stencil (7-point in 3D, 5-point in 2D,
//! 3-point in 1D and radial) with harmonic-mean face permittivities, so
//! the discrete flux is single-valued across dielectric jumps. Faces that
//! straddle a sharp interface use a crossing-fraction harmonic mean; the
//! ionic indicator of a sharp solvent region is the solvent fraction of
//! each node's dual cell.
//!
//! The nonlinear system is the exact gradient of the discrete energy
//!
//! ```text
//! E[u] = Σ_faces  (A h) eps_f / 2 ((u_R - u_L)/h)^2
//!      + Σ_nodes V_i [ -rho_i u_i + s_i B(u_i) ]
//! ```
//!
//! which is strictly convex, so damped Newton iteration (residual-norm
//! backtracking with halving, at most 30 halvings) converges to the
//! unique minimizer. The electrostatic free energy is `F_ele = -E[psi]`.

use crate::error::SolvateError;
use crate::grid::{ScalarField, StructuredGrid};
use crate::model::{DielectricProfile, IonicModel};
use crate::Result;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Dirichlet boundary data; analytic and W^{2,inf}-smooth by
/// construction. The same formula, evaluated at interior nodes, serves
/// as the initial Newton iterate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum BoundaryData {
    Zero,
    /// `A exp(-kappa |x - c|) / |x - c|`, a screened-Coulomb far field.
    ScreenedCoulomb {
        center: [f64; 3],
        amplitude: f64,
        kappa: f64,
    },
}

impl BoundaryData {
    pub fn eval(&self, x: [f64; 3]) -> f64 {
        match *self {
            BoundaryData::Zero => 0.0,
            BoundaryData::ScreenedCoulomb {
                center,
                amplitude,
                kappa,
            } => {
                let r = ((x[0] - center[0]).powi(2)
                    + (x[1] - center[1]).powi(2)
                    + (x[2] - center[2]).powi(2))
                .sqrt()
                .max(1e-6);
                amplitude * (-kappa * r).exp() / r
            }
        }
    }
}

/// Dielectric environment of one solve.
#[derive(Debug, Clone)]
pub enum Medium {
    /// Coefficients from a phase field.
    Diffuse {
        phi: ScalarField,
        dielectric: DielectricProfile,
    },
    /// Piecewise-constant coefficients from an analytic interface.
    Sharp {
        shape: crate::grid::InterfaceShape,
        eps_p: f64,
        eps_w: f64,
    },
}

/// Solver knobs.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SolverOpts {
    /// Sup-norm residual target (per unit volume).
    pub tol: f64,
    pub max_iter: usize,
    /// A-priori cap on |psi| off the solute region; exceeding it is
    /// reported as a bound violation, not silently accepted.
    pub c_bound: f64,
}

impl Default for SolverOpts {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 60,
            c_bound: 50.0,
        }
    }
}

/// One Poisson-Boltzmann boundary-value problem.
pub struct PBProblem {
    pub grid: Arc<StructuredGrid>,
    pub medium: Medium,
    pub ionic: Option<IonicModel>,
    pub kbt: f64,
    pub rho: ScalarField,
    pub psi_inf: BoundaryData,
    pub opts: SolverOpts,
}

/// Common ingredients shared by a family of solves on one grid.
#[derive(Clone)]
pub struct PBSetup {
    pub grid: Arc<StructuredGrid>,
    pub dielectric: DielectricProfile,
    pub ionic: Option<IonicModel>,
    pub kbt: f64,
    pub rho: ScalarField,
    pub psi_inf: BoundaryData,
    pub opts: SolverOpts,
}

impl PBSetup {
    pub fn problem_for(&self, phi: &ScalarField) -> Result<PBProblem> {
        self.grid.assert_same(phi.grid(), "pb phase field")?;
        if !phi.all_finite() {
            return Err(SolvateError::Validation(
                "phase field must be finite everywhere (L^4 stand-in)".into(),
            ));
        }
        Ok(PBProblem {
            grid: self.grid.clone(),
            medium: Medium::Diffuse {
                phi: phi.clone(),
                dielectric: self.dielectric,
            },
            ionic: self.ionic.clone(),
            kbt: self.kbt,
            rho: self.rho.clone(),
            psi_inf: self.psi_inf.clone(),
            opts: self.opts,
        })
    }

    pub fn sharp_problem(&self, shape: &crate::grid::InterfaceShape) -> PBProblem {
        PBProblem {
            grid: self.grid.clone(),
            medium: Medium::Sharp {
                shape: shape.clone(),
                eps_p: self.dielectric.eps_p,
                eps_w: self.dielectric.eps_w,
            },
            ionic: self.ionic.clone(),
            kbt: self.kbt,
            rho: self.rho.clone(),
            psi_inf: self.psi_inf.clone(),
            opts: self.opts,
        }
    }
}

/// A converged solve: potential plus diagnostics.
pub struct PBSolution {
    pub psi: ScalarField,
    pub iterations: usize,
    pub residual: f64,
    pub residual_history: Vec<f64>,
    /// Minimum of the discrete energy functional, `E[psi]`.
    pub energy: f64,
    pub max_psi: f64,
    pub max_psi_off_solute: f64,
    /// Hash of the dielectric environment this was solved for.
    pub medium_hash: u64,
}

impl PBSolution {
    /// Electrostatic free energy `F_ele = -min E`.
    pub fn f_ele(&self) -> f64 {
        -self.energy
    }

    /// Diagnostics as a JSON record.
    pub fn diagnostics_json(&self) -> String {
        let hist: Vec<String> = self
            .residual_history
            .iter()
            .map(|r| format!("{r:.6e}"))
            .collect();
        format!(
            "{{\"iterations\":{},\"residual_history\":[{}],\"energy\":{:.12e},\"max_psi\":{:.12e},\"max_psi_off_solute\":{:.12e}}}",
            self.iterations,
            hist.join(","),
            self.energy,
            self.max_psi,
            self.max_psi_off_solute
        )
    }
}

/// Content hash of the medium, for staleness checks against fields.
pub fn medium_hash(p: &PBProblem) -> u64 {
    match &p.medium {
        Medium::Diffuse { phi, .. } => phi.content_hash(),
        Medium::Sharp { shape, eps_p, eps_w } => {
            let mut h: u64 = 0xcbf2_9ce4_8422_2325;
            let mut mix = |v: f64| {
                h ^= v.to_bits();
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            };
            mix(*eps_p);
            mix(*eps_w);
            for i in 0..p.grid.node_count() {
                mix(shape.signed_distance(p.grid.position(i)));
            }
            h
        }
    }
}

/// Assembled per-node and per-face coefficients of one problem.
pub(crate) struct Discretization {
    grid: Arc<StructuredGrid>,
    /// Ionic prefactor s_i ((phi-1)^2 or solvent dual-cell fraction).
    pub s: Vec<f64>,
    /// Nodal dielectric (diagnostic; fluxes use face values).
    #[allow(dead_code)]
    pub eps_node: Vec<f64>,
    /// Per-axis face conductances A_f eps_f / h, indexed by lower node.
    face_coef: Vec<Vec<f64>>,
    /// Dual-cell volumes.
    pub vol: Vec<f64>,
    rho: Vec<f64>,
    bc: Vec<f64>,
    boundary: Vec<bool>,
    /// Off-solute mask for the L-infinity bound diagnostic.
    off_solute: Vec<bool>,
}

impl Discretization {
    pub fn build(p: &PBProblem) -> Result<Self> {
        let grid = p.grid.clone();
        p.grid.assert_same(p.rho.grid(), "pb charge density")?;
        if !p.rho.all_finite() {
            return Err(SolvateError::Validation("rho must be finite".into()));
        }
        let n = grid.node_count();
        let dim = grid.dim();
        let hmin = grid.min_spacing();

        let mut s = vec![0.0; n];
        let mut eps_node = vec![0.0; n];
        let mut off_solute = vec![false; n];
        match &p.medium {
            Medium::Diffuse { phi, dielectric } => {
                for i in 0..n {
                    let v = phi.values()[i];
                    s[i] = (v - 1.0) * (v - 1.0);
                    eps_node[i] = dielectric.eval(v);
                    off_solute[i] = (v - 1.0).abs() > 1e-9;
                }
            }
            Medium::Sharp { shape, eps_p, eps_w } => {
                for i in 0..n {
                    let d = shape.signed_distance(grid.position(i));
                    // solvent fraction of the dual cell: second-order
                    // quadrature of chi_{G^c}
                    s[i] = (0.5 - d / hmin).clamp(0.0, 1.0);
                    eps_node[i] = if d > 0.0 { *eps_p } else { *eps_w };
                    off_solute[i] = d <= 0.0;
                }
            }
        }

        let mut vol = vec![0.0; n];
        for (i, v) in vol.iter_mut().enumerate() {
            let c = grid.coords(i);
            if grid.is_radial() {
                let r = grid.position(i)[0];
                let h = grid.spacing()[0];
                let rlo = (r - 0.5 * h).max(grid.lo()[0]);
                let rhi = (r + 0.5 * h).min(grid.hi()[0]);
                *v = 4.0 / 3.0 * std::f64::consts::PI * (rhi.powi(3) - rlo.powi(3));
            } else {
                let mut w = 1.0;
                for d in 0..dim {
                    let edge = c[d] == 0 || c[d] == grid.nodes()[d] - 1;
                    w *= grid.spacing()[d] * if edge { 0.5 } else { 1.0 };
                }
                *v = w;
            }
        }

        // face conductances per axis
        let mut face_coef = Vec::with_capacity(dim);
        for d in 0..dim {
            let mut coef = vec![0.0; n];
            let h = grid.spacing()[d];
            for i in 0..n {
                let c = grid.coords(i);
                if c[d] + 1 >= grid.nodes()[d] {
                    continue;
                }
                let mut cn = c;
                cn[d] += 1;
                let j = grid.idx(cn);
                let ef = match &p.medium {
                    Medium::Diffuse { .. } => harmonic(eps_node[i], eps_node[j], 0.5),
                    Medium::Sharp { shape, eps_p, eps_w } => {
                        let di = shape.signed_distance(grid.position(i));
                        let dj = shape.signed_distance(grid.position(j));
                        sharp_face_eps(di, dj, *eps_p, *eps_w)
                    }
                };
                let area = if grid.is_radial() {
                    let rm = grid.position(i)[0] + 0.5 * h;
                    4.0 * std::f64::consts::PI * rm * rm
                } else {
                    (0..dim)
                        .filter(|&dd| dd != d)
                        .map(|dd| grid.spacing()[dd])
                        .product()
                };
                coef[i] = area * ef / h;
            }
            face_coef.push(coef);
        }

        let boundary: Vec<bool> = (0..n)
            .map(|i| {
                if grid.is_radial() {
                    // only the outer radius carries Dirichlet data
                    grid.coords(i)[0] == grid.nodes()[0] - 1
                } else {
                    grid.is_boundary(i)
                }
            })
            .collect();
        let bc: Vec<f64> = (0..n).map(|i| p.psi_inf.eval(grid.position(i))).collect();

        Ok(Self {
            grid,
            s,
            eps_node,
            face_coef,
            vol,
            rho: p.rho.values().to_vec(),
            bc,
            boundary,
            off_solute,
        })
    }

    fn b_prime(&self, ionic: &Option<IonicModel>, kbt: f64, u: f64) -> f64 {
        ionic.as_ref().map_or(0.0, |m| m.eval_b_prime(u, kbt))
    }

    fn b_second(&self, ionic: &Option<IonicModel>, kbt: f64, u: f64) -> f64 {
        ionic.as_ref().map_or(0.0, |m| m.eval_b_second(u, kbt))
    }

    fn b(&self, ionic: &Option<IonicModel>, kbt: f64, u: f64) -> f64 {
        ionic.as_ref().map_or(0.0, |m| m.eval_b(u, kbt))
    }

    /// Volume-scaled residual; zero rows on Dirichlet nodes.
    fn residual(&self, ionic: &Option<IonicModel>, kbt: f64, psi: &[f64]) -> Vec<f64> {
        let n = self.grid.node_count();
        let mut out = vec![0.0; n];
        for (i, o) in out.iter_mut().enumerate() {
            if !self.boundary[i] {
                *o = self.vol[i] * (self.s[i] * self.b_prime(ionic, kbt, psi[i]) - self.rho[i]);
            }
        }
        for d in 0..self.grid.dim() {
            let coef = &self.face_coef[d];
            for i in 0..n {
                if coef[i] == 0.0 {
                    continue;
                }
                let mut cn = self.grid.coords(i);
                cn[d] += 1;
                let j = self.grid.idx(cn);
                let flux = coef[i] * (psi[i] - psi[j]);
                if !self.boundary[i] {
                    out[i] += flux;
                }
                if !self.boundary[j] {
                    out[j] -= flux;
                }
            }
        }
        out
    }

    /// Sup norm of the residual per unit volume.
    fn sup_per_volume(&self, res: &[f64]) -> f64 {
        res.iter()
            .enumerate()
            .map(|(i, r)| (r / self.vol[i]).abs())
            .fold(0.0, f64::max)
    }

    /// Jacobian-vector product on the homogeneous space (zero boundary).
    fn jacobian_apply(&self, diag_b2: &[f64], x: &[f64], out: &mut [f64]) {
        let n = self.grid.node_count();
        for i in 0..n {
            out[i] = if self.boundary[i] { x[i] } else { diag_b2[i] * x[i] };
        }
        for d in 0..self.grid.dim() {
            let coef = &self.face_coef[d];
            for i in 0..n {
                if coef[i] == 0.0 {
                    continue;
                }
                let mut cn = self.grid.coords(i);
                cn[d] += 1;
                let j = self.grid.idx(cn);
                let flux = coef[i] * (x[i] - x[j]);
                if !self.boundary[i] {
                    out[i] += flux;
                }
                if !self.boundary[j] {
                    out[j] -= flux;
                }
            }
        }
    }

    /// Discrete energy `E[u]`: face-based gradient part plus nodal
    /// charge and ionic parts. This is the exact objective whose
    /// stationarity condition is the residual above.
    pub fn energy(&self, ionic: &Option<IonicModel>, kbt: f64, psi: &[f64]) -> f64 {
        let n = self.grid.node_count();
        let mut e = 0.0;
        for d in 0..self.grid.dim() {
            let coef = &self.face_coef[d];
            for i in 0..n {
                if coef[i] == 0.0 {
                    continue;
                }
                let mut cn = self.grid.coords(i);
                cn[d] += 1;
                let j = self.grid.idx(cn);
                let dv = psi[j] - psi[i];
                // coef = A eps / h, so coef * dv^2 = (A h) eps (dv/h)^2
                e += 0.5 * coef[i] * dv * dv;
            }
        }
        for i in 0..n {
            e += self.vol[i] * (-self.rho[i] * psi[i] + self.s[i] * self.b(ionic, kbt, psi[i]));
        }
        e
    }

    /// Tridiagonal direct solve (1D and radial grids).
    fn solve_tridiag(&self, diag_b2: &[f64], rhs: &[f64]) -> Vec<f64> {
        let n = self.grid.node_count();
        let coef = &self.face_coef[0];
        let mut a = vec![0.0; n]; // sub
        let mut b = vec![0.0; n]; // main
        let mut c = vec![0.0; n]; // super
        let mut d = vec![0.0; n];
        for i in 0..n {
            if self.boundary[i] {
                b[i] = 1.0;
                d[i] = rhs[i];
                continue;
            }
            b[i] = diag_b2[i];
            if i > 0 {
                b[i] += coef[i - 1];
                if !self.boundary[i - 1] {
                    a[i] = -coef[i - 1];
                }
            }
            if i + 1 < n {
                b[i] += coef[i];
                if !self.boundary[i + 1] {
                    c[i] = -coef[i];
                }
            }
            d[i] = rhs[i];
        }
        for i in 1..n {
            let m = a[i] / b[i - 1];
            b[i] -= m * c[i - 1];
            d[i] -= m * d[i - 1];
        }
        let mut x = vec![0.0; n];
        x[n - 1] = d[n - 1] / b[n - 1];
        for i in (0..n - 1).rev() {
            x[i] = (d[i] - c[i] * x[i + 1]) / b[i];
        }
        x
    }

    /// Jacobi-preconditioned CG on the homogeneous space.
    fn solve_cg(&self, diag_b2: &[f64], rhs: &[f64]) -> Vec<f64> {
        let n = self.grid.node_count();
        let mut diag = diag_b2.to_vec();
        for d in 0..self.grid.dim() {
            let coef = &self.face_coef[d];
            for i in 0..n {
                if coef[i] == 0.0 {
                    continue;
                }
                let mut cn = self.grid.coords(i);
                cn[d] += 1;
                let j = self.grid.idx(cn);
                if !self.boundary[i] {
                    diag[i] += coef[i];
                }
                if !self.boundary[j] {
                    diag[j] += coef[i];
                }
            }
        }
        for (i, v) in diag.iter_mut().enumerate() {
            if self.boundary[i] {
                *v = 1.0;
            }
        }

        let mut x = vec![0.0; n];
        let mut r = rhs.to_vec();
        let mut z: Vec<f64> = r.iter().zip(&diag).map(|(ri, di)| ri / di).collect();
        let mut p = z.clone();
        let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let rhs_norm: f64 = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
        if rhs_norm == 0.0 {
            return x;
        }
        let mut ap = vec![0.0; n];
        let max_iters = 40 * (n as f64).sqrt() as usize + 200;
        for _ in 0..max_iters {
            self.jacobian_apply(diag_b2, &p, &mut ap);
            let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            let rn: f64 = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            if rn <= 1e-13 * rhs_norm {
                break;
            }
            for i in 0..n {
                z[i] = r[i] / diag[i];
            }
            let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        x
    }

    fn solve_linear(&self, diag_b2: &[f64], rhs: &[f64]) -> Vec<f64> {
        if self.grid.dim() == 1 {
            self.solve_tridiag(diag_b2, rhs)
        } else {
            self.solve_cg(diag_b2, rhs)
        }
    }
}

#[inline]
fn harmonic(e1: f64, e2: f64, theta: f64) -> f64 {
    1.0 / (theta / e1 + (1.0 - theta) / e2)
}

/// Face permittivity of a sharp interface between nodes with signed
/// distances `di`, `dj`: one-sided when both nodes share a region,
/// crossing-fraction harmonic mean when the face straddles the
/// interface. Shared by the solver and the boundary-force quadratures.
pub(crate) fn sharp_face_eps(di: f64, dj: f64, eps_p: f64, eps_w: f64) -> f64 {
    let ei = if di > 0.0 { eps_p } else { eps_w };
    let ej = if dj > 0.0 { eps_p } else { eps_w };
    if (di > 0.0) == (dj > 0.0) {
        ei
    } else {
        let theta = (di / (di - dj)).clamp(0.0, 1.0);
        harmonic(ei, ej, theta)
    }
}

/// Fraction of the segment from `di` to `dj` (linear in between) lying
/// in the solvent (`d < 0`).
pub(crate) fn solvent_fraction_on_segment(di: f64, dj: f64) -> f64 {
    match (di > 0.0, dj > 0.0) {
        (true, true) => 0.0,
        (false, false) => 1.0,
        (true, false) => 1.0 - (di / (di - dj)).clamp(0.0, 1.0),
        (false, true) => (di / (di - dj)).clamp(0.0, 1.0),
    }
}

/// Damped Newton solve of the Poisson-Boltzmann problem.
pub fn solve(problem: &PBProblem) -> Result<PBSolution> {
    let disc = Discretization::build(problem)?;
    let grid = &problem.grid;
    let n = grid.node_count();
    let ionic = &problem.ionic;
    let kbt = problem.kbt;

    // initial iterate: the analytic boundary formula evaluated everywhere
    let mut psi: Vec<f64> = disc.bc.clone();
    let mut res = disc.residual(ionic, kbt, &psi);
    let mut rnorm = disc.sup_per_volume(&res);
    let mut history = vec![rnorm];
    let mut iterations = 0;

    while rnorm > problem.opts.tol {
        if iterations >= problem.opts.max_iter {
            return Err(SolvateError::NonConvergence {
                iterations,
                residual: rnorm,
                history,
            });
        }
        let diag_b2: Vec<f64> = (0..n)
            .map(|i| {
                if disc.boundary[i] {
                    1.0
                } else {
                    disc.vol[i] * disc.s[i] * disc.b_second(ionic, kbt, psi[i])
                }
            })
            .collect();
        let neg_res: Vec<f64> = res.iter().map(|r| -r).collect();
        let dpsi = disc.solve_linear(&diag_b2, &neg_res);

        // residual-norm backtracking with halving, at most 30 halvings
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..=30 {
            let trial: Vec<f64> = psi
                .iter()
                .zip(&dpsi)
                .map(|(p, d)| p + lambda * d)
                .collect();
            let tres = disc.residual(ionic, kbt, &trial);
            let tnorm = disc.sup_per_volume(&tres);
            if tnorm <= (1.0 - 0.5 * lambda) * rnorm || tnorm <= problem.opts.tol {
                psi = trial;
                res = tres;
                rnorm = tnorm;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        iterations += 1;
        history.push(rnorm);
        if !accepted {
            return Err(SolvateError::NonConvergence {
                iterations,
                residual: rnorm,
                history,
            });
        }
    }

    let max_psi = psi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let max_off = psi
        .iter()
        .enumerate()
        .filter(|(i, _)| disc.off_solute[*i])
        .fold(0.0f64, |m, (_, v)| m.max(v.abs()));
    if max_off > problem.opts.c_bound {
        return Err(SolvateError::BoundViolation(format!(
            "|psi| = {max_off:.3e} off the solute exceeds the configured cap {:.3e}",
            problem.opts.c_bound
        )));
    }
    let energy = disc.energy(ionic, kbt, &psi);
    let psi_field = ScalarField::from_values(grid, psi)?;
    Ok(PBSolution {
        psi: psi_field,
        iterations,
        residual: rnorm,
        residual_history: history,
        energy,
        max_psi,
        max_psi_off_solute: max_off,
        medium_hash: medium_hash(problem),
    })
}

/// Sharp-interface solve (piecewise dielectric, ionic term active only
/// in the solvent).
pub fn solve_sharp(setup: &PBSetup, shape: &crate::grid::InterfaceShape) -> Result<PBSolution> {
    solve(&setup.sharp_problem(shape))
}

/// Evaluates the discrete energy `E[u]` of an admissible candidate
/// potential; errors if `u` deviates from the boundary data.
pub fn electrostatic_energy(problem: &PBProblem, u: &ScalarField) -> Result<f64> {
    problem.grid.assert_same(u.grid(), "pb energy candidate")?;
    let disc = Discretization::build(problem)?;
    let scale = 1.0 + u.max_abs();
    for i in 0..problem.grid.node_count() {
        if disc.boundary[i] && (u.values()[i] - disc.bc[i]).abs() > 1e-8 * scale {
            return Err(SolvateError::Admissibility(format!(
                "candidate deviates from psi_inf on the boundary by {:.3e}",
                (u.values()[i] - disc.bc[i]).abs()
            )));
        }
    }
    Ok(disc.energy(&problem.ionic, problem.kbt, u.values()))
}

/// Discrete H^1 norm of the difference of two fields on one grid
/// (face-based gradient part plus L^2 part).
pub fn h1_distance(a: &ScalarField, b: &ScalarField) -> Result<f64> {
    a.grid().assert_same(b.grid(), "h1 distance")?;
    let grid = a.grid();
    let n = grid.node_count();
    let mut l2 = 0.0;
    for i in 0..n {
        let d = a.values()[i] - b.values()[i];
        l2 += grid.weight(i) * d * d;
    }
    let mut h1 = 0.0;
    for d in 0..grid.dim() {
        let h = grid.spacing()[d];
        for i in 0..n {
            let c = grid.coords(i);
            if c[d] + 1 >= grid.nodes()[d] {
                continue;
            }
            let mut cn = c;
            cn[d] += 1;
            let j = grid.idx(cn);
            let da = a.values()[j] - a.values()[i];
            let db = b.values()[j] - b.values()[i];
            let g = (da - db) / h;
            let vol = if grid.is_radial() {
                let rm = grid.position(i)[0] + 0.5 * h;
                4.0 * std::f64::consts::PI * rm * rm * h
            } else {
                h * (0..grid.dim())
                    .filter(|&dd| dd != d)
                    .map(|dd| grid.spacing()[dd])
                    .product::<f64>()
            };
            h1 += vol * g * g;
        }
    }
    Ok((l2 + h1).sqrt())
}

/// One row of a dielectric-boundary continuity probe.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContinuityRow {
    pub l1_phi_delta: f64,
    pub h1_psi_delta: f64,
    pub energy_delta: f64,
}

/// Solves the sequence `phi_k` and the limit problem, reporting
/// `||psi_k - psi||_H1` and `|E_k - E|` per member: the discrete face of
/// the statement that potential and energy are continuous in the
/// dielectric boundary.
pub fn continuity_probe(
    setup: &PBSetup,
    sequence: &[ScalarField],
    limit: &PBProblem,
) -> Result<Vec<ContinuityRow>> {
    let limit_sol = solve(limit)?;
    let mut rows = Vec::with_capacity(sequence.len());
    for phi_k in sequence {
        let sol = solve(&setup.problem_for(phi_k)?)?;
        let l1 = match &limit.medium {
            Medium::Diffuse { phi, .. } => {
                let mut l1 = 0.0;
                for i in 0..setup.grid.node_count() {
                    l1 += setup.grid.weight(i) * (phi_k.values()[i] - phi.values()[i]).abs();
                }
                l1
            }
            Medium::Sharp { shape, .. } => {
                let mut l1 = 0.0;
                for i in 0..setup.grid.node_count() {
                    let chi = if shape.signed_distance(setup.grid.position(i)) > 0.0 {
                        1.0
                    } else {
                        0.0
                    };
                    l1 += setup.grid.weight(i) * (phi_k.values()[i] - chi).abs();
                }
                l1
            }
        };
        rows.push(ContinuityRow {
            l1_phi_delta: l1,
            h1_psi_delta: h1_distance(&sol.psi, &limit_sol.psi)?,
            energy_delta: (sol.energy - limit_sol.energy).abs(),
        });
    }
    Ok(rows)
}
