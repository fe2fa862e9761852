//! One-dimensional interface profiles and their lifts to grid fields.
//!
//! Three profile families connect the diffuse and sharp descriptions:
//!
//! - the canonical profile, the exact minimizer of the 1D surface energy,
//!   solving `xi g' = sqrt(2 W(g)) = 6 g (1-g)` with `g(0) = 1/2`; its
//!   closed form is the logistic `g(z) = 1 / (1 + exp(-6 z / xi))` and it
//!   carries unit line energy with pointwise equi-partition;
//! - the `g_k` family built from the scaled well `W_a = W / a`: the
//!   inverse of `q(t) = ∫_0^t xi / sqrt(2 [W_a + xi])`, supported on
//!   `[0, lambda]` with `lambda = q(1) < sqrt(xi/2)`. Lifting it across an
//!   interface produces fields that converge in L^1 to the sharp set
//!   while their surface energy converges to `(1+a)/(2 sqrt(a))` times
//!   the perimeter — the counterexample family;
//! - the clamped recovery profile: zero outside the solute, one past a
//!   collar of width `sqrt(xi)`, with a rescaled canonical transition in
//!   between. It realizes the limsup construction `0 <= phi <= chi_G`
//!   exactly.
//!
//! Lifted fields carry analytic gradient and Laplacian companions
//! (`grad phi = -g'(d) nu`, `lap phi = g''(d) + g'(d) lap d`), so energy
//! and stress measurements of lifts are limited by quadrature, not by
//! finite differencing.

use crate::error::SolvateError;
use crate::grid::{InterfaceShape, ScalarField, StructuredGrid};
use crate::model::{eval_w, eval_w_prime};
use crate::Result;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Which profile family a [`Profile`] belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProfileKind {
    Canonical,
    Gk,
    ClampedRecovery,
}

/// Parameters a profile was built from.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ProfileSpec {
    pub xi: f64,
    /// Well scale `a` in `W_a = W/a` (1 for canonical/recovery).
    pub well_scale: f64,
    pub kind: ProfileKind,
}

/// Number of tabulation intervals for the gk inversion.
const TABLE_CELLS: usize = 4096;

enum Evaluator {
    /// Closed-form logistic with width xi.
    Canonical { xi: f64 },
    /// Monotone cubic Hermite of the inverse of q, plus the q-table for
    /// round-trip checks. Knots are (s_i = q(t_i), t_i).
    Gk {
        xi: f64,
        a: f64,
        s_knots: Vec<f64>,
        t_knots: Vec<f64>,
        lambda: f64,
    },
    /// Canonical transition rescaled onto [0, collar].
    Clamped {
        xi: f64,
        collar: f64,
        center: f64,
        low: f64,
        scale: f64,
    },
}

/// A monotone interface profile `s -> g(s)`.
pub struct Profile {
    spec: ProfileSpec,
    eval: Evaluator,
}

impl Profile {
    pub fn spec(&self) -> ProfileSpec {
        self.spec
    }

    pub fn xi(&self) -> f64 {
        self.spec.xi
    }

    /// Transition width `lambda = q(1)` for the gk kind, the collar width
    /// for the recovery kind, none for the unbounded canonical profile.
    pub fn transition_width(&self) -> Option<f64> {
        match &self.eval {
            Evaluator::Canonical { .. } => None,
            Evaluator::Gk { lambda, .. } => Some(*lambda),
            Evaluator::Clamped { collar, .. } => Some(*collar),
        }
    }

    /// Profile value `g(s)`.
    pub fn g(&self, s: f64) -> f64 {
        match &self.eval {
            Evaluator::Canonical { xi } => logistic(s, *xi),
            Evaluator::Gk {
                s_knots,
                t_knots,
                lambda,
                xi,
                a,
            } => {
                if s <= 0.0 {
                    0.0
                } else if s >= *lambda {
                    1.0
                } else {
                    hermite_eval(s_knots, t_knots, |t| gk_slope(t, *xi, *a), s)
                }
            }
            Evaluator::Clamped {
                xi,
                collar,
                center,
                low,
                scale,
            } => {
                if s <= 0.0 {
                    0.0
                } else if s >= *collar {
                    1.0
                } else {
                    (logistic(s - center, *xi) - low) / scale
                }
            }
        }
    }

    /// `g'(s)`. For gk this is the exact ODE relation
    /// `g' = sqrt(2 [W_a(g) + xi]) / xi` evaluated at the interpolated g.
    pub fn g_prime(&self, s: f64) -> f64 {
        match &self.eval {
            Evaluator::Canonical { xi } => {
                let g = logistic(s, *xi);
                6.0 / xi * g * (1.0 - g)
            }
            Evaluator::Gk { xi, a, lambda, .. } => {
                if s <= 0.0 || s >= *lambda {
                    0.0
                } else {
                    gk_slope(self.g(s), *xi, *a)
                }
            }
            Evaluator::Clamped {
                xi,
                collar,
                center,
                scale,
                ..
            } => {
                if s <= 0.0 || s >= *collar {
                    0.0
                } else {
                    let g = logistic(s - center, *xi);
                    (6.0 / xi) * g * (1.0 - g) / scale
                }
            }
        }
    }

    /// `g''(s)`; for gk, `g'' = W_a'(g) / xi^2` from differentiating the
    /// profile ODE.
    pub fn g_second(&self, s: f64) -> f64 {
        match &self.eval {
            Evaluator::Canonical { xi } => {
                let g = logistic(s, *xi);
                (6.0 / xi) * (6.0 / xi) * g * (1.0 - g) * (1.0 - 2.0 * g)
            }
            Evaluator::Gk { xi, a, lambda, .. } => {
                if s <= 0.0 || s >= *lambda {
                    0.0
                } else {
                    eval_w_prime(self.g(s)) / (a * xi * xi)
                }
            }
            Evaluator::Clamped {
                xi,
                collar,
                center,
                scale,
                ..
            } => {
                if s <= 0.0 || s >= *collar {
                    0.0
                } else {
                    let g = logistic(s - center, *xi);
                    (6.0 / xi) * (6.0 / xi) * g * (1.0 - g) * (1.0 - 2.0 * g) / scale
                }
            }
        }
    }

    /// Forward map `q(t)` of the gk construction (inverse of `g`); only
    /// defined for the gk kind.
    pub fn q(&self, t: f64) -> Option<f64> {
        match &self.eval {
            Evaluator::Gk {
                s_knots, t_knots, ..
            } => {
                if t <= 0.0 {
                    Some(0.0)
                } else if t >= 1.0 {
                    Some(*s_knots.last().unwrap())
                } else {
                    Some(hermite_eval(t_knots, s_knots, |_| 0.0, t))
                }
            }
            _ => None,
        }
    }

    /// Two-column tabulation `(s, g(s))` for export.
    pub fn tabulate(&self, n: usize) -> Vec<(f64, f64)> {
        let (lo, hi) = match &self.eval {
            Evaluator::Canonical { xi } => (-3.0 * xi.sqrt(), 3.0 * xi.sqrt()),
            Evaluator::Gk { lambda, .. } => (-0.1 * lambda, 1.1 * lambda),
            Evaluator::Clamped { collar, .. } => (-0.1 * collar, 1.1 * collar),
        };
        (0..n)
            .map(|i| {
                let s = lo + (hi - lo) * i as f64 / (n - 1) as f64;
                (s, self.g(s))
            })
            .collect()
    }

    /// CSV body of [`Profile::tabulate`].
    pub fn to_csv(&self, n: usize) -> String {
        let mut out = String::from("s,g\n");
        for (s, g) in self.tabulate(n) {
            out.push_str(&format!("{s:.12e},{g:.12e}\n"));
        }
        out
    }
}

#[inline]
fn logistic(z: f64, xi: f64) -> f64 {
    0.5 * (1.0 + (3.0 * z / xi).tanh())
}

/// `g' = sqrt(2 [W(g)/a + xi]) / xi` of the gk ODE.
#[inline]
fn gk_slope(g: f64, xi: f64, a: f64) -> f64 {
    (2.0 * (eval_w(g) / a + xi)).sqrt() / xi
}

fn check_xi(xi: f64) -> Result<()> {
    if !(xi > 0.0 && xi <= crate::XI_MAX) {
        return Err(SolvateError::Validation(format!(
            "xi must lie in (0, {}]; got {xi}",
            crate::XI_MAX
        )));
    }
    Ok(())
}

/// The exact equi-partition profile of width `xi`.
pub fn canonical_profile(xi: f64) -> Result<Profile> {
    check_xi(xi)?;
    Ok(Profile {
        spec: ProfileSpec {
            xi,
            well_scale: 1.0,
            kind: ProfileKind::Canonical,
        },
        eval: Evaluator::Canonical { xi },
    })
}

/// The inverse-of-`q` profile with well scale `a`.
pub fn gk_profile(xi: f64, a: f64) -> Result<Profile> {
    check_xi(xi)?;
    if !(a > 0.0) {
        return Err(SolvateError::Validation(format!(
            "well scale a must be positive; got {a}"
        )));
    }
    // q(t) = int_0^t xi / sqrt(2 [W_a(tau) + xi]) dtau, 4-point
    // Gauss-Legendre per tabulation cell
    let (gl_x, gl_w) = crate::grid::gauss_legendre_cached4();
    let dt = 1.0 / TABLE_CELLS as f64;
    let mut t_knots = Vec::with_capacity(TABLE_CELLS + 1);
    let mut s_knots = Vec::with_capacity(TABLE_CELLS + 1);
    t_knots.push(0.0);
    s_knots.push(0.0);
    let mut acc = 0.0;
    for i in 0..TABLE_CELLS {
        let t0 = i as f64 * dt;
        let mut cell = 0.0;
        for (x, w) in gl_x.iter().zip(gl_w.iter()) {
            let tau = t0 + dt * 0.5 * (1.0 + x);
            cell += w * 0.5 * dt * xi / (2.0 * (eval_w(tau) / a + xi)).sqrt();
        }
        acc += cell;
        t_knots.push(t0 + dt);
        s_knots.push(acc);
    }
    for w in s_knots.windows(2) {
        if !(w[1] > w[0]) {
            return Err(SolvateError::ProfileConstruction(
                "q tabulation is not strictly increasing".into(),
            ));
        }
    }
    let lambda = *s_knots.last().unwrap();
    Ok(Profile {
        spec: ProfileSpec {
            xi,
            well_scale: a,
            kind: ProfileKind::Gk,
        },
        eval: Evaluator::Gk {
            xi,
            a,
            s_knots,
            t_knots,
            lambda,
        },
    })
}

/// Clamped-canonical recovery profile on the collar `[0, sqrt(xi)]`.
pub fn recovery_profile(xi: f64) -> Result<Profile> {
    check_xi(xi)?;
    let collar = xi.sqrt();
    let center = 0.5 * collar;
    let low = logistic(-center, xi);
    let high = logistic(collar - center, xi);
    Ok(Profile {
        spec: ProfileSpec {
            xi,
            well_scale: 1.0,
            kind: ProfileKind::ClampedRecovery,
        },
        eval: Evaluator::Clamped {
            xi,
            collar,
            center,
            low,
            scale: high - low,
        },
    })
}

/// Limit surface-energy multiplier of the gk family,
/// `beta(a) = (1 + a) / (2 sqrt(a))` (sigma = 1 for our well).
pub fn beta_limit(a: f64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(SolvateError::Validation(format!(
            "beta limit needs a > 0; got {a}"
        )));
    }
    Ok((1.0 + a) / (2.0 * a.sqrt()))
}

/// Lifts a profile across a shape: `phi(x) = g(d(x))`, with analytic
/// gradient/Laplacian companions attached. Flags the field (without
/// failing) when the grid spacing exceeds `xi / 4`.
pub fn lift_profile(
    profile: &Profile,
    shape: &InterfaceShape,
    grid: &Arc<StructuredGrid>,
) -> ScalarField {
    let n = grid.node_count();
    let dim = if grid.is_radial() { 3 } else { grid.dim() };
    let mut data = Vec::with_capacity(n);
    let mut grad = Vec::with_capacity(n);
    let mut lap = Vec::with_capacity(n);
    for idx in 0..n {
        let x = grid.position(idx);
        let d = shape.signed_distance(x);
        let nu = shape.normal(x);
        let gp = profile.g_prime(d);
        data.push(profile.g(d));
        grad.push([-gp * nu[0], -gp * nu[1], -gp * nu[2]]);
        lap.push(profile.g_second(d) + gp * shape.distance_laplacian(x, dim));
    }
    let mut field = ScalarField::from_values(grid, data).expect("sized by construction");
    field.set_analytic(grad, Some(lap));
    field.set_under_resolved(grid.min_spacing() > profile.xi() / 4.0);
    field
}

/// Step-1 recovery field: `0 <= phi <= chi_G`, `phi = 1` on the eroded
/// set `{d >= sqrt(xi)}`, `phi = 0` outside `G`, clamped-canonical
/// transition inside the collar.
pub fn recovery_phase_field(
    shape: &InterfaceShape,
    xi: f64,
    grid: &Arc<StructuredGrid>,
) -> Result<ScalarField> {
    if let InterfaceShape::Ball { radius, .. } = shape {
        if *radius < xi.sqrt() {
            return Err(SolvateError::ShapeTooSmall(format!(
                "ball radius {radius} is smaller than the recovery collar sqrt(xi) = {}",
                xi.sqrt()
            )));
        }
    }
    let profile = recovery_profile(xi)?;
    Ok(lift_profile(&profile, shape, grid))
}

/// Cubic Hermite interpolation on sorted knots with exact endpoint
/// slopes supplied through `slope_of_value` (used for the gk inverse,
/// whose derivative is known from the profile ODE).
fn hermite_eval(
    x_knots: &[f64],
    y_knots: &[f64],
    slope_of_value: impl Fn(f64) -> f64,
    x: f64,
) -> f64 {
    let j = match x_knots.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
        Ok(j) => return y_knots[j],
        Err(j) => j.clamp(1, x_knots.len() - 1) - 1,
    };
    let (x0, x1) = (x_knots[j], x_knots[j + 1]);
    let (y0, y1) = (y_knots[j], y_knots[j + 1]);
    let h = x1 - x0;
    // slopes dy/dx at the knots; zero marker means "use secant"
    let mut m0 = slope_of_value(y0);
    let mut m1 = slope_of_value(y1);
    let secant = (y1 - y0) / h;
    if m0 == 0.0 {
        m0 = secant;
    }
    if m1 == 0.0 {
        m1 = secant;
    }
    let t = (x - x0) / h;
    let t2 = t * t;
    let t3 = t2 * t;
    y0 * (2.0 * t3 - 3.0 * t2 + 1.0)
        + m0 * h * (t3 - 2.0 * t2 + t)
        + y1 * (-2.0 * t3 + 3.0 * t2)
        + m1 * h * (t3 - t2)
}
