//! Physical parameters and pointwise constitutive functions.
//!
//! Everything here is a pure function of immutable parameter records:
//! the double well `W(phi) = 18 phi^2 (1-phi)^2`, the ionic response
//! `B(s) = kBT Σ_j c_j (exp(-q_j s / kBT) - 1)`, the dielectric
//! interpolation `eps(phi)`, the Lennard-Jones solute-solvent potential
//! `U`, and the smeared (Gaussian) solute charge density `rho`.
//!
//! Units are dimensionless: `kBT = 1` and unit length by default, so all
//! tolerances in the verification studies are absolute numbers.

use crate::error::SolvateError;
use crate::Result;
use serde::{Deserialize, Serialize};

/// Bulk physical constants of the solvation model.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SolvationParams {
    /// Hydrostatic pressure P0 (energy/volume).
    pub pressure: f64,
    /// Macroscopic surface tension gamma0 (energy/area).
    pub surface_tension: f64,
    /// Bulk solvent density rho0 (1/volume).
    pub solvent_density: f64,
    /// Solute relative permittivity.
    pub eps_p: f64,
    /// Solvent relative permittivity.
    pub eps_w: f64,
    /// Thermal energy, 1 in reduced units.
    pub kbt: f64,
}

impl SolvationParams {
    /// Reduced-unit defaults: unit pressure/tension/density, eps 1:80.
    pub fn reduced(pressure: f64, surface_tension: f64, solvent_density: f64) -> Self {
        Self {
            pressure,
            surface_tension,
            solvent_density,
            eps_p: 1.0,
            eps_w: 80.0,
            kbt: 1.0,
        }
    }

    /// Checks positivity of P0, gamma0, rho0 per (A1) and the dielectric
    /// constants per (A3).
    pub fn validate(&self) -> Result<()> {
        if !(self.pressure > 0.0 && self.surface_tension > 0.0 && self.solvent_density > 0.0) {
            return Err(SolvateError::Validation(format!(
                "(A1) P0, gamma0, rho0 must be positive numbers; got {}, {}, {}",
                self.pressure, self.surface_tension, self.solvent_density
            )));
        }
        if !(self.eps_p > 0.0 && self.eps_w > 0.0) {
            return Err(SolvateError::Validation(
                "(A3) eps_p and eps_w must be positive".into(),
            ));
        }
        if self.eps_p == self.eps_w {
            return Err(SolvateError::Validation(
                "(A3) eps_p and eps_w must be positive and distinct".into(),
            ));
        }
        if !(self.kbt > 0.0) {
            return Err(SolvateError::Validation("kBT must be positive".into()));
        }
        Ok(())
    }
}

/// Double well `W(phi) = 18 phi^2 (1 - phi)^2`.
///
/// The prefactor normalizes `∫_0^1 sqrt(2 W) = 1`, so the optimal profile
/// carries unit line energy.
#[inline]
pub fn eval_w(phi: f64) -> f64 {
    let q = phi * (1.0 - phi);
    18.0 * q * q
}

/// `W'(phi) = 36 phi (1 - phi)(1 - 2 phi)`.
#[inline]
pub fn eval_w_prime(phi: f64) -> f64 {
    36.0 * phi * (1.0 - phi) * (1.0 - 2.0 * phi)
}

/// `sqrt(2 W(phi))`, the integrand of the surface-energy normalization;
/// equals `6 |phi (1-phi)|`.
#[inline]
pub fn sqrt_2w(phi: f64) -> f64 {
    6.0 * (phi * (1.0 - phi)).abs()
}

/// One ionic species: bulk concentration and signed charge.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IonSpecies {
    pub conc: f64,
    pub charge: f64,
}

/// Mobile-ion model behind the Boltzmann response `B`.
///
/// `B(s) = kBT Σ_j c_j (exp(-q_j s/kBT) - 1)`; charge neutrality of the
/// species list forces `B(0) = 0 = min B` and `B'' > 0` (A4).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IonicModel {
    species: Vec<IonSpecies>,
}

impl IonicModel {
    /// Builds the model, enforcing positivity of concentrations and bulk
    /// charge neutrality. Neutrality is checked against a rounding-level
    /// tolerance relative to the total ionic charge magnitude.
    pub fn new(species: Vec<IonSpecies>) -> Result<Self> {
        if species.is_empty() {
            return Err(SolvateError::Validation(
                "ionic model needs at least one species".into(),
            ));
        }
        let mut net = 0.0;
        let mut scale = 0.0;
        for s in &species {
            if !(s.conc > 0.0) {
                return Err(SolvateError::Validation(format!(
                    "(A4) bulk concentrations must be positive; got {}",
                    s.conc
                )));
            }
            net += s.conc * s.charge;
            scale += (s.conc * s.charge).abs();
        }
        if scale == 0.0 {
            return Err(SolvateError::Validation(
                "(A4) all species are neutral; B would be identically zero, not strictly convex"
                    .into(),
            ));
        }
        if net.abs() > 1e-12 * scale {
            return Err(SolvateError::Validation(format!(
                "charge neutrality violated: sum q_j c_j = {net:.3e}"
            )));
        }
        Ok(Self { species })
    }

    /// Symmetric 1:1 salt with bulk concentration `c` and unit charges.
    pub fn symmetric(c: f64) -> Result<Self> {
        Self::new(vec![
            IonSpecies { conc: c, charge: 1.0 },
            IonSpecies {
                conc: c,
                charge: -1.0,
            },
        ])
    }

    pub fn species(&self) -> &[IonSpecies] {
        &self.species
    }

    /// `B(s)`.
    pub fn eval_b(&self, s: f64, kbt: f64) -> f64 {
        self.species
            .iter()
            .map(|sp| kbt * sp.conc * ((-sp.charge * s / kbt).exp() - 1.0))
            .sum()
    }

    /// `B'(s) = -Σ c_j q_j exp(-q_j s/kBT)`.
    pub fn eval_b_prime(&self, s: f64, kbt: f64) -> f64 {
        self.species
            .iter()
            .map(|sp| -sp.conc * sp.charge * (-sp.charge * s / kbt).exp())
            .sum()
    }

    /// `B''(s) = Σ c_j q_j^2 / kBT exp(-q_j s/kBT) > 0`.
    pub fn eval_b_second(&self, s: f64, kbt: f64) -> f64 {
        self.species
            .iter()
            .map(|sp| sp.conc * sp.charge * sp.charge / kbt * (-sp.charge * s / kbt).exp())
            .sum()
    }
}

/// One solute atom: position, partial charge, Lennard-Jones parameters,
/// and the width of its smeared (Gaussian) charge.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SoluteAtom {
    pub position: [f64; 3],
    pub partial_charge: f64,
    pub lj_energy: f64,
    pub lj_length: f64,
    pub smear_width: f64,
}

impl SoluteAtom {
    pub fn validate(&self) -> Result<()> {
        if !(self.lj_length > 0.0) {
            return Err(SolvateError::Validation(
                "atom lj_length (sigma) must be positive".into(),
            ));
        }
        if !(self.smear_width > 0.0) {
            return Err(SolvateError::Validation(
                "atom smear_width must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Functional form of the dielectric interpolation on (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DielectricKind {
    /// `6t^5 - 15t^4 + 10t^3`; C^2 with zero end slopes. Default.
    QuinticSmoothstep,
    /// `3t^2 - 2t^3`; C^1 with zero end slopes.
    CubicSmoothstep,
}

/// Dielectric coefficient as a function of the phase field.
///
/// `eps(phi) = eps_w` for `phi <= 0` (solvent), `eps_p` for `phi >= 1`
/// (solute), and a monotone C^1 interpolation in between with
/// `eps'(0) = eps'(1) = 0` (A3).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DielectricProfile {
    pub eps_p: f64,
    pub eps_w: f64,
    pub kind: DielectricKind,
}

impl DielectricProfile {
    pub fn new(eps_p: f64, eps_w: f64, kind: DielectricKind) -> Result<Self> {
        if !(eps_p > 0.0 && eps_w > 0.0) || eps_p == eps_w {
            return Err(SolvateError::Validation(
                "(A3) eps_p and eps_w must be positive and distinct".into(),
            ));
        }
        Ok(Self { eps_p, eps_w, kind })
    }

    pub fn quintic(eps_p: f64, eps_w: f64) -> Result<Self> {
        Self::new(eps_p, eps_w, DielectricKind::QuinticSmoothstep)
    }

    /// `eps(phi)`.
    pub fn eval(&self, phi: f64) -> f64 {
        if phi <= 0.0 {
            return self.eps_w;
        }
        if phi >= 1.0 {
            return self.eps_p;
        }
        let s = match self.kind {
            DielectricKind::QuinticSmoothstep => phi * phi * phi * (10.0 + phi * (-15.0 + 6.0 * phi)),
            DielectricKind::CubicSmoothstep => phi * phi * (3.0 - 2.0 * phi),
        };
        self.eps_w + (self.eps_p - self.eps_w) * s
    }

    /// `eps'(phi)`; identically zero outside (0, 1).
    pub fn eval_prime(&self, phi: f64) -> f64 {
        if phi <= 0.0 || phi >= 1.0 {
            return 0.0;
        }
        let sp = match self.kind {
            DielectricKind::QuinticSmoothstep => {
                let q = phi * (1.0 - phi);
                30.0 * q * q
            }
            DielectricKind::CubicSmoothstep => 6.0 * phi * (1.0 - phi),
        };
        (self.eps_p - self.eps_w) * sp
    }
}

/// Lennard-Jones interaction summed over atoms:
/// `U(x) = Σ_i 4 eps_i [ (sigma_i/r_i)^12 - (sigma_i/r_i)^6 ]`.
///
/// Returns `+inf` exactly at an atom center.
pub fn eval_u(x: [f64; 3], atoms: &[SoluteAtom]) -> f64 {
    let mut u = 0.0;
    for a in atoms {
        let r2 = dist2(x, a.position);
        if r2 == 0.0 {
            return f64::INFINITY;
        }
        let s2 = a.lj_length * a.lj_length / r2;
        let s6 = s2 * s2 * s2;
        u += 4.0 * a.lj_energy * (s6 * s6 - s6);
    }
    u
}

/// `U` clamped from above at `u_max` for field sampling near atom cores.
pub fn eval_u_capped(x: [f64; 3], atoms: &[SoluteAtom], u_max: f64) -> f64 {
    eval_u(x, atoms).min(u_max)
}

/// Analytic `∇U`; errors if `x` coincides with an atom center.
pub fn eval_u_gradient(x: [f64; 3], atoms: &[SoluteAtom]) -> Result<[f64; 3]> {
    let mut g = [0.0; 3];
    for a in atoms {
        let d = [
            x[0] - a.position[0],
            x[1] - a.position[1],
            x[2] - a.position[2],
        ];
        let r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
        if r2 == 0.0 {
            return Err(SolvateError::Singularity(format!(
                "LJ gradient requested at atom center {:?}",
                a.position
            )));
        }
        let s2 = a.lj_length * a.lj_length / r2;
        let s6 = s2 * s2 * s2;
        // dU/dr * 1/r = 4 eps (-12 s12 + 6 s6) / r^2
        let coef = 4.0 * a.lj_energy * (-12.0 * s6 * s6 + 6.0 * s6) / r2;
        g[0] += coef * d[0];
        g[1] += coef * d[1];
        g[2] += coef * d[2];
    }
    Ok(g)
}

/// Smeared solute charge density: a sum of normalized Gaussians,
/// `rho(x) = Σ_i Q_i (2 pi a_i^2)^(-dim/2) exp(-|x-x_i|^2 / (2 a_i^2))`,
/// normalized in the given space dimension so `∫ rho = Σ Q_i`.
pub fn smeared_charge_density(x: [f64; 3], atoms: &[SoluteAtom], dim: usize) -> f64 {
    let mut rho = 0.0;
    for a in atoms {
        let r2 = dist2(x, a.position);
        let a2 = a.smear_width * a.smear_width;
        let norm = (2.0 * std::f64::consts::PI * a2).powf(-(dim as f64) / 2.0);
        rho += a.partial_charge * norm * (-r2 / (2.0 * a2)).exp();
    }
    rho
}

#[inline]
fn dist2(x: [f64; 3], y: [f64; 3]) -> f64 {
    let d0 = x[0] - y[0];
    let d1 = x[1] - y[1];
    let d2 = x[2] - y[2];
    d0 * d0 + d1 * d1 + d2 * d2
}
