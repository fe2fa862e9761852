//! Gradient-flow relaxation `phi_t = -delta F_xi[phi]` toward
//! (near-)minimizers, with xi-continuation for sweep studies.
//!
//! The step is semi-implicit: the stiff surface Laplacian is treated
//! implicitly (one constant-coefficient solve per step), every other
//! term of the first variation explicitly:
//!
//! ```text
//! (I - dt gamma0 xi Δ) phi_new = phi - dt [ 2 P0 phi + gamma0 W'(phi)/xi
//!     + 2 rho0 (phi-1) U - eps'(phi)/2 |∇psi|^2 - 2 (phi-1) B(psi) ]
//! ```
//!
//! with natural (zero-flux) boundary conditions. A step is accepted only
//! if the energy decreases, else `dt` halves; `dt` underflow is a
//! stagnation error. Electrostatics refreshes every few steps (the
//! interface moves slowly relative to the potential); between refreshes
//! the flow descends the frozen-potential surrogate `-E_phi[psi_bar]`,
//! whose phi-gradient is exactly the electrostatic part of the first
//! variation, and the logged energies are re-baselined at each refresh.

use crate::energy::{self, EnergyBreakdown};
use crate::error::SolvateError;
use crate::grid::{ScalarField, StructuredGrid};
use crate::pb::{self, PBSetup, PBSolution};
use crate::Result;
use std::sync::Arc;

/// Flow controls.
#[derive(Debug, Clone, Copy)]
pub struct FlowOpts {
    /// Initial time step; `None` means `xi^2`.
    pub dt0: Option<f64>,
    /// Stagnation threshold for the halving cascade.
    pub dt_min: f64,
    /// Re-solve the Poisson-Boltzmann problem every this many steps.
    pub pb_refresh_every: usize,
    /// Step budget for [`FlowDriver::minimize`].
    pub max_steps: usize,
    /// Stop when the discrete L^2 norm of the first variation drops
    /// below this.
    pub grad_tol: f64,
    /// Allowed overshoot of `max(1, max|phi_0|)` before the flow aborts.
    pub bound_slack: f64,
}

impl Default for FlowOpts {
    fn default() -> Self {
        Self {
            dt0: None,
            dt_min: 1e-12,
            pb_refresh_every: 5,
            max_steps: 2000,
            grad_tol: 1e-4,
            bound_slack: 0.5,
        }
    }
}

/// One per-step log record; `F-total` and components refer to the
/// surrogate functional current at that step.
#[derive(Debug, Clone, Copy)]
pub struct StepRecord {
    pub step: usize,
    pub t: f64,
    pub dt: f64,
    pub breakdown: EnergyBreakdown,
    pub grad_norm: f64,
    pub refreshed: bool,
}

impl StepRecord {
    pub fn csv_header() -> &'static str {
        "step,t,dt,total,volume_term,surface_term,vdw_term,ele_term,grad_norm"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.9e},{:.6e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.6e}",
            self.step,
            self.t,
            self.dt,
            self.breakdown.total,
            self.breakdown.volume_term,
            self.breakdown.surface_term,
            self.breakdown.vdw_term,
            self.breakdown.ele_term,
            self.grad_norm
        )
    }
}

/// Evolving flow state.
pub struct FlowState {
    pub phi: ScalarField,
    pub t: f64,
    pub dt: f64,
    pub xi: f64,
    pub step: usize,
    /// Current surrogate energy (re-baselined at PB refreshes).
    pub energy: f64,
    pub grad_norm: f64,
    pub pb: Option<PBSolution>,
    pub log: Vec<StepRecord>,
    /// Budget ran out before reaching the gradient tolerance.
    pub partial: bool,
    bound_cap: f64,
}

/// Everything a flow needs besides the state.
pub struct FlowDriver<'a> {
    pub xi: f64,
    pub ctx: crate::forces::ModelCtx<'a>,
    /// Electrostatics; `None` drops the term entirely.
    pub electrostatics: Option<PBSetup>,
    pub opts: FlowOpts,
}

impl FlowDriver<'_> {
    fn dt0(&self) -> f64 {
        self.opts.dt0.unwrap_or(self.xi * self.xi)
    }

    /// Frozen-potential energy of a candidate field.
    fn surrogate_energy(&self, phi: &ScalarField, pb: Option<&PBSolution>) -> Result<f64> {
        let ele = match (&self.electrostatics, pb) {
            (Some(setup), Some(sol)) => {
                -pb::electrostatic_energy(&setup.problem_for(phi)?, &sol.psi)?
            }
            _ => 0.0,
        };
        Ok(energy::total_f_xi_frozen_ele(
            phi,
            self.xi,
            ele,
            self.ctx.params,
            self.ctx.atoms,
            self.ctx.u_max,
        )
        .total)
    }

    fn breakdown(&self, phi: &ScalarField, pb: Option<&PBSolution>) -> Result<EnergyBreakdown> {
        let ele = match (&self.electrostatics, pb) {
            (Some(setup), Some(sol)) => {
                -pb::electrostatic_energy(&setup.problem_for(phi)?, &sol.psi)?
            }
            _ => 0.0,
        };
        Ok(energy::total_f_xi_frozen_ele(
            phi,
            self.xi,
            ele,
            self.ctx.params,
            self.ctx.atoms,
            self.ctx.u_max,
        ))
    }

    /// Explicit part of the first variation (everything but the
    /// Laplacian term) and the full variation's L^2 norm.
    fn explicit_terms(
        &self,
        phi: &ScalarField,
        pb: Option<&PBSolution>,
    ) -> (Vec<f64>, f64) {
        let grid = phi.grid();
        let p = self.ctx.params;
        let psi_gsq: Option<Vec<f64>> = pb.map(|s| energy::grad_sq_nodal(&s.psi));
        let lap = crate::grid::laplacian(phi);
        let mut explicit = vec![0.0; grid.node_count()];
        let mut grad_norm2 = 0.0;
        for i in 0..grid.node_count() {
            let v = phi.values()[i];
            let u = crate::model::eval_u_capped(grid.position(i), self.ctx.atoms, self.ctx.u_max);
            let mut e = 2.0 * p.pressure * v
                + p.surface_tension * crate::model::eval_w_prime(v) / self.xi
                + 2.0 * p.solvent_density * (v - 1.0) * u;
            if let (Some(sol), Some(gsq)) = (pb, psi_gsq.as_ref()) {
                let psi = sol.psi.values()[i];
                e += -0.5 * self.ctx.dielectric.eval_prime(v) * gsq[i]
                    - 2.0
                        * (v - 1.0)
                        * self.ctx.ionic.map_or(0.0, |m| m.eval_b(psi, self.ctx.kbt));
            }
            explicit[i] = e;
            let full = e - p.surface_tension * self.xi * lap.values()[i];
            grad_norm2 += grid.weight(i) * full * full;
        }
        (explicit, grad_norm2.sqrt())
    }

    /// Prepares a state (initial PB solve, initial energy).
    pub fn init(&self, phi: ScalarField) -> Result<FlowState> {
        let mut phi = phi;
        phi.strip_analytic();
        let pb = match &self.electrostatics {
            Some(setup) => Some(pb::solve(&setup.problem_for(&phi)?)?),
            None => None,
        };
        let energy = self.surrogate_energy(&phi, pb.as_ref())?;
        let (_, grad_norm) = self.explicit_terms(&phi, pb.as_ref());
        let bound_cap = phi.max_abs().max(1.0) + self.opts.bound_slack;
        Ok(FlowState {
            phi,
            t: 0.0,
            dt: self.dt0(),
            xi: self.xi,
            step: 0,
            energy,
            grad_norm,
            pb,
            log: Vec::new(),
            partial: false,
            bound_cap,
        })
    }

    /// One accepted semi-implicit step (with internal dt halving).
    pub fn flow_step(&self, state: &mut FlowState) -> Result<()> {
        // refresh electrostatics per policy and re-baseline the energy
        let mut refreshed = false;
        if let Some(setup) = &self.electrostatics {
            if state.step % self.opts.pb_refresh_every == 0 {
                state.pb = Some(pb::solve(&setup.problem_for(&state.phi)?)?);
                state.energy = self.surrogate_energy(&state.phi, state.pb.as_ref())?;
                refreshed = true;
            }
        }
        let (explicit, _) = self.explicit_terms(&state.phi, state.pb.as_ref());
        let grid = state.phi.grid().clone();

        loop {
            let alpha = state.dt * self.ctx.params.surface_tension * self.xi;
            let mut rhs = vec![0.0; grid.node_count()];
            for i in 0..grid.node_count() {
                rhs[i] = state.phi.values()[i] - state.dt * explicit[i];
            }
            let new_values = helmholtz_solve(&grid, alpha, &rhs);
            let trial = ScalarField::from_values(&grid, new_values)?;
            let e_trial = self.surrogate_energy(&trial, state.pb.as_ref())?;
            if e_trial <= state.energy {
                if trial.max_abs() > state.bound_cap {
                    return Err(SolvateError::BoundViolation(format!(
                        "flow left the confinement region: max|phi| = {:.3e} > {:.3e}",
                        trial.max_abs(),
                        state.bound_cap
                    )));
                }
                state.phi = trial;
                state.t += state.dt;
                state.step += 1;
                state.energy = e_trial;
                let (_, gn) = self.explicit_terms(&state.phi, state.pb.as_ref());
                state.grad_norm = gn;
                let breakdown = self.breakdown(&state.phi, state.pb.as_ref())?;
                state.log.push(StepRecord {
                    step: state.step,
                    t: state.t,
                    dt: state.dt,
                    breakdown,
                    grad_norm: gn,
                    refreshed,
                });
                return Ok(());
            }
            state.dt *= 0.5;
            if state.dt < self.opts.dt_min {
                return Err(SolvateError::Stagnation {
                    time: state.t,
                    dt: state.dt,
                });
            }
        }
    }

    /// Runs the flow until `||delta F||_{L2}` drops below the tolerance
    /// or the budget runs out (partial result, not a failure).
    pub fn minimize(&self, phi: ScalarField) -> Result<FlowState> {
        let mut state = self.init(phi)?;
        if !self.opts.grad_tol.is_finite() {
            return Ok(state);
        }
        while state.grad_norm > self.opts.grad_tol {
            if state.step >= self.opts.max_steps {
                state.partial = true;
                return Ok(state);
            }
            self.flow_step(&mut state)?;
        }
        Ok(state)
    }
}

/// Solves `(I - alpha Δ) x = rhs` with natural boundary conditions:
/// direct tridiagonal elimination in 1D, conjugate gradients otherwise.
fn helmholtz_solve(grid: &Arc<StructuredGrid>, alpha: f64, rhs: &[f64]) -> Vec<f64> {
    let n = grid.node_count();
    if alpha == 0.0 {
        return rhs.to_vec();
    }
    let apply = |x: &[f64], out: &mut [f64]| {
        out.copy_from_slice(x);
        for d in 0..grid.dim() {
            let h = grid.spacing()[d];
            let c = alpha / (h * h);
            for i in 0..n {
                let cc = grid.coords(i);
                if cc[d] + 1 >= grid.nodes()[d] {
                    continue;
                }
                let mut cn = cc;
                cn[d] += 1;
                let j = grid.idx(cn);
                // radial mode: flux area weighting keeps the operator
                // symmetric against the shell measure
                let scale = if grid.is_radial() {
                    let rm = grid.position(i)[0] + 0.5 * h;
                    let wi = grid.weight(i).max(1e-300);
                    let wj = grid.weight(j).max(1e-300);
                    // symmetrize by sqrt of dual volumes
                    4.0 * std::f64::consts::PI * rm * rm * h / (wi * wj).sqrt()
                } else {
                    1.0
                };
                let flux = c * scale * (x[i] - x[j]);
                out[i] += flux;
                out[j] -= flux;
            }
        }
    };
    if grid.dim() == 1 && !grid.is_radial() {
        // assemble tridiagonal directly
        let h = grid.spacing()[0];
        let c = alpha / (h * h);
        let mut sub = vec![0.0; n];
        let mut main = vec![1.0; n];
        let mut sup = vec![0.0; n];
        for i in 0..n {
            if i > 0 {
                main[i] += c;
                sub[i] = -c;
            }
            if i + 1 < n {
                main[i] += c;
                sup[i] = -c;
            }
        }
        let mut b = main;
        let mut d = rhs.to_vec();
        for i in 1..n {
            let m = sub[i] / b[i - 1];
            b[i] -= m * sup[i - 1];
            d[i] -= m * d[i - 1];
        }
        let mut x = vec![0.0; n];
        x[n - 1] = d[n - 1] / b[n - 1];
        for i in (0..n - 1).rev() {
            x[i] = (d[i] - sup[i] * x[i + 1]) / b[i];
        }
        return x;
    }
    // CG (the operator is SPD: identity plus a graph Laplacian)
    let mut x = rhs.to_vec();
    let mut ax = vec![0.0; n];
    apply(&x, &mut ax);
    let mut r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let mut p = r.clone();
    let mut rr: f64 = r.iter().map(|v| v * v).sum();
    let rhs_norm: f64 = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
    if rhs_norm == 0.0 {
        return vec![0.0; n];
    }
    let mut ap = vec![0.0; n];
    for _ in 0..(20 * (n as f64).sqrt() as usize + 100) {
        apply(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        let beta_denom = rr;
        let a = rr / pap;
        for i in 0..n {
            x[i] += a * p[i];
            r[i] -= a * ap[i];
        }
        rr = r.iter().map(|v| v * v).sum();
        if rr.sqrt() <= 1e-13 * rhs_norm {
            break;
        }
        let beta = rr / beta_denom;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    x
}

/// Minimizes along a strictly decreasing xi schedule, warm-starting each
/// smaller width from the previous minimizer; the grid is refined (and
/// the field resampled) whenever `xi < 8 h`.
pub fn xi_continuation<'a>(
    schedule: &[f64],
    initial: ScalarField,
    make_driver: &dyn Fn(f64, &Arc<StructuredGrid>) -> Result<FlowDriver<'a>>,
) -> Result<Vec<FlowState>> {
    if schedule.is_empty() {
        return Ok(Vec::new());
    }
    for w in schedule.windows(2) {
        if !(w[1] < w[0]) {
            return Err(SolvateError::Validation(
                "xi schedule must be strictly decreasing".into(),
            ));
        }
    }
    for &xi in schedule {
        if !(xi > 0.0 && xi <= crate::XI_MAX) {
            return Err(SolvateError::Validation(format!(
                "schedule xi = {xi} outside (0, {}]",
                crate::XI_MAX
            )));
        }
    }
    let mut states = Vec::with_capacity(schedule.len());
    let mut phi = initial;
    for &xi in schedule {
        let mut grid = phi.grid().clone();
        if grid.min_spacing() > xi / 8.0 {
            let factor = (grid.min_spacing() / (xi / 8.0)).ceil() as usize;
            let fine = grid.refined(factor)?;
            let coarse = phi.clone();
            phi = ScalarField::from_fn(&fine, |x| coarse.sample(x));
            grid = fine;
        }
        let driver = make_driver(xi, &grid)?;
        let state = driver.minimize(phi)?;
        phi = state.phi.clone();
        states.push(state);
    }
    Ok(states)
}
