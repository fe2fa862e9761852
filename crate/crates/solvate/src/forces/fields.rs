//! Compactly supported test fields for weak force pairings.
//!
//! Every field is an analytic base (constant direction, radial,
//! rotational, or a random quadratic polynomial) multiplied by a C^2
//! radial bump that is identically 1 on an inner core and vanishes
//! outside the support radius, together with its exact gradient. The
//! force-convergence statements quantify over all of `C_c^1`; this small
//! library samples a spanning family while keeping every pairing
//! quadrature-exactness limited rather than differencing limited.

use crate::error::SolvateError;
use crate::grid::StructuredGrid;
use crate::model::SoluteAtom;
use crate::Result;
use rand::Rng;

/// `V` and its analytic gradient, supported in a ball or an annulus.
pub struct TestField {
    pub id: String,
    center: [f64; 3],
    cutoff: Cutoff,
    base: Base,
}

#[derive(Clone, Copy)]
enum Cutoff {
    /// 1 inside `core * radius`, 0 outside `radius`.
    Ball { radius: f64, core: f64 },
    /// 0 outside `[r0, r1]`, 1 on the middle half of the band.
    Annulus { r0: f64, r1: f64 },
}

impl Cutoff {
    fn weight(&self, r: f64) -> f64 {
        match *self {
            Cutoff::Ball { radius, core } => bump(r / radius, core),
            Cutoff::Annulus { r0, r1 } => {
                let u = (r - r0) / (r1 - r0);
                if !(0.0..=1.0).contains(&u) {
                    0.0
                } else if u < 0.25 {
                    smoothstep(u / 0.25)
                } else if u > 0.75 {
                    smoothstep((1.0 - u) / 0.25)
                } else {
                    1.0
                }
            }
        }
    }

    fn weight_deriv(&self, r: f64) -> f64 {
        match *self {
            Cutoff::Ball { radius, core } => bump_deriv(r / radius, core) / radius,
            Cutoff::Annulus { r0, r1 } => {
                let w = r1 - r0;
                let u = (r - r0) / w;
                if !(0.0..=1.0).contains(&u) {
                    0.0
                } else if u < 0.25 {
                    smoothstep_deriv(u / 0.25) / (0.25 * w)
                } else if u > 0.75 {
                    -smoothstep_deriv((1.0 - u) / 0.25) / (0.25 * w)
                } else {
                    0.0
                }
            }
        }
    }

    fn outer(&self) -> f64 {
        match *self {
            Cutoff::Ball { radius, .. } => radius,
            Cutoff::Annulus { r1, .. } => r1,
        }
    }

    fn hole(&self) -> Option<f64> {
        match *self {
            Cutoff::Ball { .. } => None,
            Cutoff::Annulus { r0, .. } => Some(r0),
        }
    }
}

fn smoothstep(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u * u * u * (10.0 + u * (-15.0 + 6.0 * u))
}

fn smoothstep_deriv(u: f64) -> f64 {
    if !(0.0..=1.0).contains(&u) {
        0.0
    } else {
        30.0 * u * u * (1.0 - u) * (1.0 - u)
    }
}

enum Base {
    Constant([f64; 3]),
    Radial,
    Rotational,
    Poly {
        /// coeffs[i] = [c, cx, cy, cz] of component i (relative coords)
        coeffs: [[f64; 4]; 3],
    },
}

/// Tensor-valued compact test function `Psi` for stress pairings; the
/// identity and projector entries live in the leading `dim x dim` block
/// so contractions match the n-dimensional tensor formulas.
pub struct TensorTest {
    pub id: String,
    center: [f64; 3],
    radius: f64,
    core: f64,
    dim: usize,
    kind: TensorKind,
}

enum TensorKind {
    /// `w(x) I`
    Identity,
    /// `w(x) nu (x) nu` with `nu = (x-c)/|x-c|`
    RadialDyad,
    /// `w(x) (I - nu (x) nu)`
    Tangential,
}

/// C^2 bump: 1 for t <= core, 0 for t >= 1, quintic smoothstep between.
fn bump(t: f64, core: f64) -> f64 {
    if t <= core {
        1.0
    } else if t >= 1.0 {
        0.0
    } else {
        let u = (1.0 - t) / (1.0 - core);
        u * u * u * (10.0 + u * (-15.0 + 6.0 * u))
    }
}

fn bump_deriv(t: f64, core: f64) -> f64 {
    if t <= core || t >= 1.0 {
        0.0
    } else {
        let u = (1.0 - t) / (1.0 - core);
        let su = 30.0 * u * u * (1.0 - u) * (1.0 - u);
        -su / (1.0 - core)
    }
}

impl TestField {
    pub fn constant(id: &str, dir: [f64; 3], center: [f64; 3], radius: f64) -> Self {
        Self {
            id: id.into(),
            center,
            cutoff: Cutoff::Ball { radius, core: 0.5 },
            base: Base::Constant(dir),
        }
    }

    /// `V = (x - c) * bump`; on a radial grid this is `r zeta(r) e_r`.
    pub fn radial(id: &str, center: [f64; 3], radius: f64) -> Self {
        Self {
            id: id.into(),
            center,
            cutoff: Cutoff::Ball { radius, core: 0.5 },
            base: Base::Radial,
        }
    }

    /// Radial field supported on the annulus `[r0, r1]`: the vdW-safe
    /// choice when atoms sit at the shape center.
    pub fn annular_radial(id: &str, center: [f64; 3], r0: f64, r1: f64) -> Self {
        Self {
            id: id.into(),
            center,
            cutoff: Cutoff::Annulus { r0, r1 },
            base: Base::Radial,
        }
    }

    /// In-plane rotation `V = (-(y-cy), x-cx, 0) * bump`.
    pub fn rotational(id: &str, center: [f64; 3], radius: f64) -> Self {
        Self {
            id: id.into(),
            center,
            cutoff: Cutoff::Ball { radius, core: 0.5 },
            base: Base::Rotational,
        }
    }

    /// Random affine-quadratic components drawn from the given RNG.
    pub fn random_poly(id: &str, center: [f64; 3], radius: f64, rng: &mut impl Rng) -> Self {
        let mut coeffs = [[0.0; 4]; 3];
        for row in &mut coeffs {
            for c in row.iter_mut() {
                *c = rng.gen_range(-1.0..1.0);
            }
        }
        Self {
            id: id.into(),
            center,
            cutoff: Cutoff::Ball { radius, core: 0.5 },
            base: Base::Poly { coeffs },
        }
    }

    /// Widens/narrows the flat core of a ball cutoff (fraction of the
    /// radius); no effect on annular cutoffs.
    pub fn with_core(mut self, core: f64) -> Self {
        if let Cutoff::Ball { radius, .. } = self.cutoff {
            self.cutoff = Cutoff::Ball { radius, core };
        }
        self
    }

    pub fn support(&self) -> ([f64; 3], f64) {
        (self.center, self.cutoff.outer())
    }

    fn base_value(&self, rel: [f64; 3]) -> [f64; 3] {
        match &self.base {
            Base::Constant(d) => *d,
            Base::Radial => rel,
            Base::Rotational => [-rel[1], rel[0], 0.0],
            Base::Poly { coeffs } => {
                let mut v = [0.0; 3];
                for (i, row) in coeffs.iter().enumerate() {
                    v[i] = row[0] + row[1] * rel[0] + row[2] * rel[1] + row[3] * rel[2];
                }
                v
            }
        }
    }

    /// Gradient of the base, `(grad base)_ij = d_j base_i`.
    fn base_grad(&self, _rel: [f64; 3]) -> [[f64; 3]; 3] {
        match &self.base {
            Base::Constant(_) => [[0.0; 3]; 3],
            Base::Radial => [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            Base::Rotational => [[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]],
            Base::Poly { coeffs } => {
                let mut g = [[0.0; 3]; 3];
                for (i, row) in coeffs.iter().enumerate() {
                    g[i] = [row[1], row[2], row[3]];
                }
                g
            }
        }
    }

    pub fn eval(&self, x: [f64; 3]) -> [f64; 3] {
        let rel = [x[0] - self.center[0], x[1] - self.center[1], x[2] - self.center[2]];
        let r = (rel[0] * rel[0] + rel[1] * rel[1] + rel[2] * rel[2]).sqrt();
        let z = self.cutoff.weight(r);
        if z == 0.0 {
            return [0.0; 3];
        }
        let b = self.base_value(rel);
        [b[0] * z, b[1] * z, b[2] * z]
    }

    /// `(grad V)_ij = d_j V_i`, analytic.
    pub fn eval_grad(&self, x: [f64; 3]) -> [[f64; 3]; 3] {
        let rel = [x[0] - self.center[0], x[1] - self.center[1], x[2] - self.center[2]];
        let r = (rel[0] * rel[0] + rel[1] * rel[1] + rel[2] * rel[2]).sqrt();
        let z = self.cutoff.weight(r);
        if z == 0.0 {
            return [[0.0; 3]; 3];
        }
        let b = self.base_value(rel);
        let bg = self.base_grad(rel);
        let mut out = [[0.0; 3]; 3];
        // d_j zeta = zeta'(r) rel_j / r
        let dz = if r > 0.0 {
            let c = self.cutoff.weight_deriv(r) / r;
            [c * rel[0], c * rel[1], c * rel[2]]
        } else {
            [0.0; 3]
        };
        for i in 0..3 {
            for j in 0..3 {
                out[i][j] = bg[i][j] * z + b[i] * dz[j];
            }
        }
        out
    }

    /// Radial component `v(r) = V . e_r` and its derivative, valid for
    /// radially equivariant fields sampled on the positive x-axis.
    pub fn radial_component(&self, r: f64) -> (f64, f64) {
        let x = [self.center[0] + r, self.center[1], self.center[2]];
        let v = self.eval(x)[0];
        let dv = self.eval_grad(x)[0][0];
        (v, dv)
    }

    /// Support must sit a 2h collar inside the box (outer radius only on
    /// radial grids, whose inner endpoint is an interior point of the
    /// underlying 3D domain).
    pub fn validate_support(&self, grid: &StructuredGrid) -> Result<()> {
        let margin = 2.0 * grid.min_spacing();
        let outer = self.cutoff.outer();
        if grid.is_radial() {
            if self.center[0].abs() + outer > grid.hi()[0] - margin {
                return Err(SolvateError::SupportViolation(format!(
                    "test field {} reaches within 2h of the outer radius",
                    self.id
                )));
            }
            return Ok(());
        }
        for d in 0..grid.dim() {
            if self.center[d] - outer < grid.lo()[d] + margin
                || self.center[d] + outer > grid.hi()[d] - margin
            {
                return Err(SolvateError::SupportViolation(format!(
                    "test field {} support leaves the interior collar on axis {d}",
                    self.id
                )));
            }
        }
        Ok(())
    }

    /// Solute atoms must avoid the support for van der Waals pairings;
    /// the hole of an annular cutoff is allowed territory.
    pub fn validate_atoms_outside(&self, atoms: &[SoluteAtom]) -> Result<()> {
        for a in atoms {
            let d = (0..3)
                .map(|k| (a.position[k] - self.center[k]).powi(2))
                .sum::<f64>()
                .sqrt();
            let inside = match self.cutoff.hole() {
                Some(r0) => d >= r0 && d <= self.cutoff.outer(),
                None => d < self.cutoff.outer(),
            };
            if inside {
                return Err(SolvateError::SupportViolation(format!(
                    "atom at {:?} lies inside the support of test field {}",
                    a.position, self.id
                )));
            }
        }
        Ok(())
    }
}

impl TensorTest {
    pub fn identity(id: &str, center: [f64; 3], radius: f64, dim: usize) -> Self {
        Self {
            id: id.into(),
            center,
            radius,
            core: 0.5,
            dim,
            kind: TensorKind::Identity,
        }
    }

    pub fn radial_dyad(id: &str, center: [f64; 3], radius: f64, dim: usize) -> Self {
        Self {
            id: id.into(),
            center,
            radius,
            core: 0.5,
            dim,
            kind: TensorKind::RadialDyad,
        }
    }

    pub fn tangential(id: &str, center: [f64; 3], radius: f64, dim: usize) -> Self {
        Self {
            id: id.into(),
            center,
            radius,
            core: 0.5,
            dim,
            kind: TensorKind::Tangential,
        }
    }

    /// Widens the flat core of the bump (fraction of the radius).
    pub fn with_core(mut self, core: f64) -> Self {
        self.core = core;
        self
    }

    /// Scalar bump weight at `x`.
    pub fn weight(&self, x: [f64; 3]) -> f64 {
        let rel = [x[0] - self.center[0], x[1] - self.center[1], x[2] - self.center[2]];
        let r = (rel[0] * rel[0] + rel[1] * rel[1] + rel[2] * rel[2]).sqrt();
        bump(r / self.radius, self.core)
    }

    pub fn eval(&self, x: [f64; 3]) -> [[f64; 3]; 3] {
        let z = self.weight(x);
        if z == 0.0 {
            return [[0.0; 3]; 3];
        }
        let rel = [x[0] - self.center[0], x[1] - self.center[1], x[2] - self.center[2]];
        let r = (rel[0] * rel[0] + rel[1] * rel[1] + rel[2] * rel[2]).sqrt();
        let nu = if r > 0.0 {
            [rel[0] / r, rel[1] / r, rel[2] / r]
        } else {
            [0.0; 3]
        };
        let mut out = [[0.0; 3]; 3];
        match self.kind {
            TensorKind::Identity => {
                for i in 0..self.dim {
                    out[i][i] = z;
                }
            }
            TensorKind::RadialDyad => {
                for i in 0..self.dim {
                    for j in 0..self.dim {
                        out[i][j] = z * nu[i] * nu[j];
                    }
                }
            }
            TensorKind::Tangential => {
                for i in 0..self.dim {
                    for j in 0..self.dim {
                        out[i][j] = z * ((i == j) as u8 as f64 - nu[i] * nu[j]);
                    }
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let fields = vec![
            TestField::constant("c", [0.3, -1.0, 0.2], [0.0; 3], 0.8),
            TestField::radial("r", [0.1, 0.0, 0.0], 0.7),
            TestField::rotational("w", [0.0; 3], 0.9),
            TestField::random_poly("p", [0.0; 3], 0.6, &mut rng),
            TestField::annular_radial("ann", [0.0; 3], 0.2, 0.6),
        ];
        let h = 1e-6;
        for f in &fields {
            for &x in &[[0.2, 0.1, -0.3], [0.45, 0.3, 0.0], [0.05, 0.02, 0.01]] {
                let g = f.eval_grad(x);
                for j in 0..3 {
                    let mut xp = x;
                    let mut xm = x;
                    xp[j] += h;
                    xm[j] -= h;
                    let vp = f.eval(xp);
                    let vm = f.eval(xm);
                    for i in 0..3 {
                        let fd = (vp[i] - vm[i]) / (2.0 * h);
                        assert_abs_diff_eq!(fd, g[i][j], epsilon = 1e-6);
                    }
                }
            }
        }
    }

    #[test]
    fn vanishes_outside_support_and_flat_in_core() {
        let f = TestField::radial("r", [0.0; 3], 0.5);
        assert_eq!(f.eval([0.6, 0.0, 0.0]), [0.0; 3]);
        assert_eq!(f.eval_grad([0.9, 0.1, 0.0]), [[0.0; 3]; 3]);
        // flat core: gradient equals the base gradient (identity)
        let g = f.eval_grad([0.1, 0.05, 0.0]);
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(g[i][j], expect, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn support_validation() {
        let grid = crate::grid::StructuredGrid::new(2, &[0.0, 0.0], &[1.0, 1.0], &[33, 33])
            .unwrap();
        assert!(TestField::radial("ok", [0.5, 0.5, 0.0], 0.3)
            .validate_support(&grid)
            .is_ok());
        assert!(TestField::radial("big", [0.5, 0.5, 0.0], 0.49)
            .validate_support(&grid)
            .is_err());
        let atom = SoluteAtom {
            position: [0.5, 0.5, 0.0],
            partial_charge: 0.0,
            lj_energy: 1.0,
            lj_length: 1.0,
            smear_width: 0.1,
        };
        let f = TestField::radial("v", [0.5, 0.5, 0.0], 0.3);
        assert!(f.validate_atoms_outside(&[atom]).is_err());
        // the hole of an annulus is allowed territory
        let ann = TestField::annular_radial("a", [0.5, 0.5, 0.0], 0.1, 0.3);
        assert!(ann.validate_atoms_outside(&[atom]).is_ok());
        assert_eq!(ann.eval([0.5, 0.5, 0.0]), [0.0; 3]);
        // flat on the middle band of the annulus
        let g = ann.eval_grad([0.5 + 0.2, 0.5, 0.0]);
        assert_abs_diff_eq!(g[0][0], 1.0, epsilon = 1e-14);
    }
}
