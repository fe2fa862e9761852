//! Experiment configuration: a flat, diff-able key-value format with
//! strict validation.
//!
//! ```text
//! [model]
//! pressure = 1.0
//! surface_tension = 1.0
//! solvent_density = 1.0
//! eps_p = 1.0
//! eps_w = 80.0
//! kbt = 1.0
//! dielectric = quintic        # quintic | cubic
//! u_max = 1e4
//!
//! [ions]                      # optional
//! species = 0.1 1.0           # conc charge, repeatable
//! species = 0.1 -1.0
//!
//! [atoms]                     # optional
//! atom = 0 0 0 1.0 1.0 1.0 0.2   # x y z charge lj_eps lj_sigma smear
//!
//! [grid]
//! radial = true
//! lo = 0
//! hi = 4
//! nodes = 201                 # only for fixed-grid runs
//!
//! [shape]
//! kind = ball                 # ball | plane | slab
//! center = 0 0 0
//! radius = 1.0
//!
//! [schedule]
//! xi = 0.2 0.14 0.1 0.07 0.05
//! h_per_xi = 8
//!
//! [study]
//! sequence = canonical        # canonical | recovery | gk | relaxed
//! a = 4.0
//! pb_medium = sharp           # sharp | lift | uniform (pb-solve)
//!
//! [output]
//! dir = out
//!
//! [run]
//! seed = 0
//! ```
//!
//! Unknown sections or keys are rejected; model-assumption violations
//! are reported all at once, each tagged with the assumption it breaks.

use crate::converge::{SequenceKind, StudyModel, SweepSpec};
use crate::error::SolvateError;
use crate::grid::{InterfaceShape, StructuredGrid};
use crate::model::{
    DielectricKind, DielectricProfile, IonSpecies, IonicModel, SolvationParams, SoluteAtom,
};
use crate::pb::{BoundaryData, SolverOpts};
use crate::relax::FlowOpts;
use crate::Result;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

/// Parsed and validated experiment configuration.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub params: SolvationParams,
    pub dielectric: DielectricProfile,
    pub u_max: f64,
    pub ionic: Option<IonicModel>,
    pub atoms: Vec<SoluteAtom>,
    pub grid_dim: usize,
    pub grid_lo: Vec<f64>,
    pub grid_hi: Vec<f64>,
    pub grid_nodes: Option<Vec<usize>>,
    pub grid_radial: bool,
    pub shape: InterfaceShape,
    pub schedule: Vec<f64>,
    pub h_per_xi: f64,
    pub sequence: SequenceKind,
    pub well_scale: f64,
    pub pb_medium: PbMedium,
    pub psi_inf: BoundaryData,
    pub pb_opts: SolverOpts,
    pub flow_opts: FlowOpts,
    pub output_dir: String,
    pub seed: u64,
    hash: String,
}

/// Medium selector of a plain `pb-solve` run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PbMedium {
    Sharp,
    /// Canonical lift at the first schedule xi.
    Lift,
    /// Constant phase field (pure solvent at 0, pure solute at 1).
    Uniform,
}

struct Section {
    entries: Vec<(String, String)>,
    consumed: Vec<bool>,
}

impl Section {
    fn get(&mut self, key: &str) -> Option<String> {
        for (i, (k, v)) in self.entries.iter().enumerate() {
            if k == key && !self.consumed[i] {
                self.consumed[i] = true;
                return Some(v.clone());
            }
        }
        None
    }

    fn get_all(&mut self, key: &str) -> Vec<String> {
        let mut out = Vec::new();
        for (i, (k, v)) in self.entries.iter().enumerate() {
            if k == key {
                self.consumed[i] = true;
                out.push(v.clone());
            }
        }
        out
    }

    fn leftovers(&self) -> Vec<String> {
        self.entries
            .iter()
            .zip(&self.consumed)
            .filter(|(_, c)| !**c)
            .map(|((k, _), _)| k.clone())
            .collect()
    }
}

fn parse_sections(text: &str) -> Result<BTreeMap<String, Section>> {
    let mut sections: BTreeMap<String, Section> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('[') && line.ends_with(']') {
            let name = line[1..line.len() - 1].trim().to_string();
            sections.entry(name.clone()).or_insert_with(|| Section {
                entries: Vec::new(),
                consumed: Vec::new(),
            });
            current = Some(name);
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(SolvateError::Config(format!(
                "line {}: expected 'key = value', got '{line}'",
                lineno + 1
            )));
        };
        let Some(section) = current.as_ref() else {
            return Err(SolvateError::Config(format!(
                "line {}: key outside any [section]",
                lineno + 1
            )));
        };
        let s = sections.get_mut(section).unwrap();
        s.entries
            .push((key.trim().to_string(), value.trim().to_string()));
        s.consumed.push(false);
    }
    Ok(sections)
}

fn f64_of(sec: &str, key: &str, v: &str) -> Result<f64> {
    v.parse::<f64>()
        .map_err(|_| SolvateError::Config(format!("[{sec}] {key}: '{v}' is not a number")))
}

fn f64_list_of(sec: &str, key: &str, v: &str) -> Result<Vec<f64>> {
    v.split_whitespace().map(|t| f64_of(sec, key, t)).collect()
}

const KNOWN_SECTIONS: &[&str] = &[
    "model", "ions", "atoms", "grid", "shape", "schedule", "study", "pb", "relax", "output",
    "run",
];

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_str_strict(&text)
    }

    pub fn from_str_strict(text: &str) -> Result<Self> {
        let mut sections = parse_sections(text)?;
        for name in sections.keys() {
            if !KNOWN_SECTIONS.contains(&name.as_str()) {
                return Err(SolvateError::Config(format!("unknown section [{name}]")));
            }
        }
        let mut violations: Vec<String> = Vec::new();

        let mut take = |name: &str| {
            sections.remove(name).unwrap_or(Section {
                entries: Vec::new(),
                consumed: Vec::new(),
            })
        };

        // [model]
        let mut model = take("model");
        let pressure = model.get("pressure").map_or(Ok(1.0), |v| f64_of("model", "pressure", &v))?;
        let surface_tension = model
            .get("surface_tension")
            .map_or(Ok(1.0), |v| f64_of("model", "surface_tension", &v))?;
        let solvent_density = model
            .get("solvent_density")
            .map_or(Ok(1.0), |v| f64_of("model", "solvent_density", &v))?;
        let eps_p = model.get("eps_p").map_or(Ok(1.0), |v| f64_of("model", "eps_p", &v))?;
        let eps_w = model.get("eps_w").map_or(Ok(80.0), |v| f64_of("model", "eps_w", &v))?;
        let kbt = model.get("kbt").map_or(Ok(1.0), |v| f64_of("model", "kbt", &v))?;
        let u_max = model.get("u_max").map_or(Ok(crate::energy::DEFAULT_U_MAX), |v| {
            f64_of("model", "u_max", &v)
        })?;
        let dielectric_kind = match model.get("dielectric").as_deref() {
            None | Some("quintic") => DielectricKind::QuinticSmoothstep,
            Some("cubic") => DielectricKind::CubicSmoothstep,
            Some(other) => {
                return Err(SolvateError::Config(format!(
                    "[model] dielectric: unknown kind '{other}'"
                )))
            }
        };
        let params = SolvationParams {
            pressure,
            surface_tension,
            solvent_density,
            eps_p,
            eps_w,
            kbt,
        };
        if let Err(e) = params.validate() {
            violations.push(e.to_string());
        }

        // [ions]
        let mut ions = take("ions");
        let species_lines = ions.get_all("species");
        let ionic = if species_lines.is_empty() {
            None
        } else {
            let mut species = Vec::new();
            for line in &species_lines {
                let vals = f64_list_of("ions", "species", line)?;
                if vals.len() != 2 {
                    return Err(SolvateError::Config(
                        "[ions] species expects 'conc charge'".into(),
                    ));
                }
                species.push(IonSpecies {
                    conc: vals[0],
                    charge: vals[1],
                });
            }
            match IonicModel::new(species) {
                Ok(m) => Some(m),
                Err(e) => {
                    violations.push(format!("(A4) {e}"));
                    None
                }
            }
        };

        // [atoms]
        let mut atoms_sec = take("atoms");
        let mut atoms = Vec::new();
        for line in atoms_sec.get_all("atom") {
            let vals = f64_list_of("atoms", "atom", &line)?;
            if vals.len() != 7 {
                return Err(SolvateError::Config(
                    "[atoms] atom expects 'x y z charge lj_eps lj_sigma smear'".into(),
                ));
            }
            let atom = SoluteAtom {
                position: [vals[0], vals[1], vals[2]],
                partial_charge: vals[3],
                lj_energy: vals[4],
                lj_length: vals[5],
                smear_width: vals[6],
            };
            if let Err(e) = atom.validate() {
                violations.push(e.to_string());
            }
            atoms.push(atom);
        }

        // [grid]
        let mut grid = take("grid");
        let grid_radial = match grid.get("radial").as_deref() {
            None => false,
            Some("true") => true,
            Some("false") => false,
            Some(other) => {
                return Err(SolvateError::Config(format!(
                    "[grid] radial: expected true/false, got '{other}'"
                )))
            }
        };
        let grid_lo = grid
            .get("lo")
            .map(|v| f64_list_of("grid", "lo", &v))
            .transpose()?
            .unwrap_or_else(|| vec![0.0]);
        let grid_hi = grid
            .get("hi")
            .map(|v| f64_list_of("grid", "hi", &v))
            .transpose()?
            .unwrap_or_else(|| vec![1.0]);
        let grid_dim = match grid.get("dim") {
            Some(v) => v
                .parse::<usize>()
                .map_err(|_| SolvateError::Config("[grid] dim must be 1, 2, or 3".into()))?,
            None => grid_lo.len(),
        };
        if grid_lo.len() != grid_dim || grid_hi.len() != grid_dim {
            violations.push(format!(
                "(A1) grid extents must match dim = {grid_dim} (Omega must be a well-formed box)"
            ));
        }
        let grid_nodes = match grid.get("nodes") {
            Some(v) => Some(
                v.split_whitespace()
                    .map(|t| {
                        t.parse::<usize>().map_err(|_| {
                            SolvateError::Config("[grid] nodes must be integers".into())
                        })
                    })
                    .collect::<Result<Vec<usize>>>()?,
            ),
            None => None,
        };

        // [shape]
        let mut shape_sec = take("shape");
        let kind = shape_sec.get("kind").unwrap_or_else(|| "ball".into());
        let shape = match kind.as_str() {
            "ball" => {
                let center = shape_sec
                    .get("center")
                    .map(|v| f64_list_of("shape", "center", &v))
                    .transpose()?
                    .unwrap_or_else(|| vec![0.0, 0.0, 0.0]);
                let mut c = [0.0; 3];
                for (d, v) in center.iter().enumerate().take(3) {
                    c[d] = *v;
                }
                let radius = shape_sec
                    .get("radius")
                    .map_or(Ok(1.0), |v| f64_of("shape", "radius", &v))?;
                InterfaceShape::Ball { center: c, radius }
            }
            "plane" => {
                let axis = shape_sec
                    .get("axis")
                    .map_or(Ok(0.0), |v| f64_of("shape", "axis", &v))? as usize;
                let offset = shape_sec
                    .get("offset")
                    .map_or(Ok(0.5), |v| f64_of("shape", "offset", &v))?;
                InterfaceShape::Plane {
                    axis,
                    offset,
                    inside_below: true,
                }
            }
            "slab" => {
                let axis = shape_sec
                    .get("axis")
                    .map_or(Ok(0.0), |v| f64_of("shape", "axis", &v))? as usize;
                let lo = shape_sec
                    .get("slab_lo")
                    .map_or(Ok(0.25), |v| f64_of("shape", "slab_lo", &v))?;
                let hi = shape_sec
                    .get("slab_hi")
                    .map_or(Ok(0.75), |v| f64_of("shape", "slab_hi", &v))?;
                InterfaceShape::Slab { axis, lo, hi }
            }
            other => {
                return Err(SolvateError::Config(format!(
                    "[shape] kind: unknown shape '{other}'"
                )))
            }
        };

        // [schedule]
        let mut sched = take("schedule");
        let schedule = sched
            .get("xi")
            .map(|v| f64_list_of("schedule", "xi", &v))
            .transpose()?
            .unwrap_or_default();
        let h_per_xi = sched
            .get("h_per_xi")
            .map_or(Ok(8.0), |v| f64_of("schedule", "h_per_xi", &v))?;
        for w in schedule.windows(2) {
            if !(w[1] < w[0]) {
                violations.push("xi schedule must be strictly decreasing".into());
                break;
            }
        }
        for &xi in &schedule {
            if !(xi > 0.0 && xi <= crate::XI_MAX) {
                violations.push(format!(
                    "schedule xi = {xi} outside (0, {}] (xi_1 must lie in (0, xi_0])",
                    crate::XI_MAX
                ));
            }
        }

        // [study]
        let mut study = take("study");
        let well_scale = study.get("a").map_or(Ok(4.0), |v| f64_of("study", "a", &v))?;
        let sequence = match study.get("sequence").as_deref() {
            None | Some("canonical") => SequenceKind::CanonicalLift,
            Some("recovery") => SequenceKind::StepRecovery,
            Some("gk") => SequenceKind::Gk { a: well_scale },
            Some("relaxed") => SequenceKind::Relaxed,
            Some(other) => {
                return Err(SolvateError::Config(format!(
                    "[study] sequence: unknown kind '{other}'"
                )))
            }
        };
        let pb_medium = match study.get("pb_medium").as_deref() {
            None | Some("sharp") => PbMedium::Sharp,
            Some("lift") => PbMedium::Lift,
            Some("uniform") => PbMedium::Uniform,
            Some(other) => {
                return Err(SolvateError::Config(format!(
                    "[study] pb_medium: unknown medium '{other}'"
                )))
            }
        };
        let psi_inf = match study.get("psi_inf").as_deref() {
            None | Some("zero") => BoundaryData::Zero,
            Some("screened") => {
                let amplitude = study
                    .get("psi_inf_amplitude")
                    .map_or(Ok(1.0), |v| f64_of("study", "psi_inf_amplitude", &v))?;
                let kappa = study
                    .get("psi_inf_kappa")
                    .map_or(Ok(1.0), |v| f64_of("study", "psi_inf_kappa", &v))?;
                BoundaryData::ScreenedCoulomb {
                    center: [0.0; 3],
                    amplitude,
                    kappa,
                }
            }
            Some(other) => {
                return Err(SolvateError::Config(format!(
                    "[study] psi_inf: unknown boundary data '{other}'"
                )))
            }
        };

        // [pb]
        let mut pbs = take("pb");
        let pb_opts = SolverOpts {
            tol: pbs.get("tol").map_or(Ok(1e-10), |v| f64_of("pb", "tol", &v))?,
            max_iter: pbs
                .get("max_iter")
                .map_or(Ok(60.0), |v| f64_of("pb", "max_iter", &v))? as usize,
            c_bound: pbs
                .get("c_bound")
                .map_or(Ok(50.0), |v| f64_of("pb", "c_bound", &v))?,
        };

        // [relax]
        let mut relax = take("relax");
        let flow_opts = FlowOpts {
            dt0: relax
                .get("dt0")
                .map(|v| f64_of("relax", "dt0", &v))
                .transpose()?,
            dt_min: relax
                .get("dt_min")
                .map_or(Ok(1e-12), |v| f64_of("relax", "dt_min", &v))?,
            pb_refresh_every: relax
                .get("pb_refresh_every")
                .map_or(Ok(5.0), |v| f64_of("relax", "pb_refresh_every", &v))?
                as usize,
            max_steps: relax
                .get("max_steps")
                .map_or(Ok(2000.0), |v| f64_of("relax", "max_steps", &v))? as usize,
            grad_tol: relax
                .get("grad_tol")
                .map_or(Ok(1e-4), |v| f64_of("relax", "grad_tol", &v))?,
            bound_slack: relax
                .get("bound_slack")
                .map_or(Ok(0.5), |v| f64_of("relax", "bound_slack", &v))?,
        };

        // [output], [run]
        let mut output = take("output");
        let output_dir = output.get("dir").unwrap_or_else(|| "out".into());
        let mut run = take("run");
        let seed = run
            .get("seed")
            .map_or(Ok(0.0), |v| f64_of("run", "seed", &v))? as u64;

        // reject unknown keys
        for (name, sec) in [
            ("model", &model),
            ("ions", &ions),
            ("atoms", &atoms_sec),
            ("grid", &grid),
            ("shape", &shape_sec),
            ("schedule", &sched),
            ("study", &study),
            ("pb", &pbs),
            ("relax", &relax),
            ("output", &output),
            ("run", &run),
        ] {
            for key in sec.leftovers() {
                return Err(SolvateError::Config(format!(
                    "unknown key '{key}' in [{name}]"
                )));
            }
        }

        // cross checks against the domain
        if grid_lo.len() == grid_dim && grid_hi.len() == grid_dim {
            for a in &atoms {
                let mut inside = true;
                if grid_radial {
                    let r = (a.position[0].powi(2) + a.position[1].powi(2)
                        + a.position[2].powi(2))
                    .sqrt();
                    inside = r < grid_hi[0];
                } else {
                    for d in 0..grid_dim {
                        if a.position[d] <= grid_lo[d] || a.position[d] >= grid_hi[d] {
                            inside = false;
                        }
                    }
                }
                if !inside {
                    violations.push(format!(
                        "(A1) atom at {:?} must lie inside Omega",
                        a.position
                    ));
                }
            }
            // representative grid for shape validation
            let rep = if grid_radial {
                StructuredGrid::radial(grid_lo[0], grid_hi[0], 17)
            } else {
                StructuredGrid::new(grid_dim, &grid_lo, &grid_hi, &vec![17; grid_dim])
            };
            if let Ok(g) = rep {
                if let Err(e) = shape.validate_in(&g) {
                    violations.push(format!("(A1) {e}"));
                }
            }
        }

        if !violations.is_empty() {
            return Err(SolvateError::Validation(violations.join("; ")));
        }

        let dielectric = DielectricProfile::new(eps_p, eps_w, dielectric_kind)?;
        let mut hasher = Sha256::new();
        hasher.update(text.as_bytes());
        let hash = format!("{:x}", hasher.finalize());

        Ok(Self {
            params,
            dielectric,
            u_max,
            ionic,
            atoms,
            grid_dim,
            grid_lo,
            grid_hi,
            grid_nodes,
            grid_radial,
            shape,
            schedule,
            h_per_xi,
            sequence,
            well_scale,
            pb_medium,
            psi_inf,
            pb_opts,
            flow_opts,
            output_dir,
            seed,
            hash,
        })
    }

    /// SHA-256 of the raw config text; embedded in every output file.
    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn study_model(&self) -> StudyModel {
        StudyModel {
            params: self.params,
            atoms: self.atoms.clone(),
            dielectric: self.dielectric,
            ionic: self.ionic.clone(),
            kbt: self.params.kbt,
            u_max: self.u_max,
            psi_inf: self.psi_inf.clone(),
            pb_opts: self.pb_opts,
        }
    }

    pub fn sweep_spec(&self, tol_scale: f64) -> SweepSpec {
        SweepSpec {
            shape: self.shape.clone(),
            schedule: self.schedule.clone(),
            h_per_xi: self.h_per_xi,
            lo: self.grid_lo.clone(),
            hi: self.grid_hi.clone(),
            dim: self.grid_dim,
            radial: self.grid_radial,
            sequence: self.sequence,
            seed: self.seed,
            tol_scale,
        }
    }

    /// The fixed grid of non-sweep runs (pb-solve, relax).
    pub fn fixed_grid(&self) -> Result<Arc<StructuredGrid>> {
        let nodes = self.grid_nodes.clone().ok_or_else(|| {
            SolvateError::Config("[grid] nodes is required for fixed-grid runs".into())
        })?;
        if self.grid_radial {
            StructuredGrid::radial(self.grid_lo[0], self.grid_hi[0], nodes[0])
        } else {
            StructuredGrid::new(self.grid_dim, &self.grid_lo, &self.grid_hi, &nodes)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = "
[model]
pressure = 1.0
surface_tension = 1.0
solvent_density = 1.0
eps_p = 1.0
eps_w = 80.0

[ions]
species = 0.1 1.0
species = 0.1 -1.0

[atoms]
atom = 0 0 0 1.0 1.0 1.0 0.2

[grid]
radial = true
lo = 0
hi = 4
nodes = 201

[shape]
kind = ball
radius = 1.0

[schedule]
xi = 0.2 0.1 0.05

[run]
seed = 7
";

    #[test]
    fn parses_a_complete_config() {
        let cfg = ExperimentConfig::from_str_strict(GOOD).unwrap();
        assert_eq!(cfg.seed, 7);
        assert!(cfg.grid_radial);
        assert_eq!(cfg.schedule, vec![0.2, 0.1, 0.05]);
        assert!(cfg.ionic.is_some());
        assert_eq!(cfg.atoms.len(), 1);
        assert_eq!(cfg.hash().len(), 64);
        assert!(cfg.fixed_grid().is_ok());
    }

    #[test]
    fn rejects_unknown_keys_and_sections() {
        let bad = format!("{GOOD}\n[model]\nnot_a_key = 1\n");
        let err = ExperimentConfig::from_str_strict(&bad).unwrap_err();
        assert!(err.to_string().contains("not_a_key"), "{err}");
        let bad2 = format!("{GOOD}\n[wild]\nx = 1\n");
        assert!(ExperimentConfig::from_str_strict(&bad2).is_err());
    }

    #[test]
    fn equal_dielectrics_cite_a3() {
        let bad = GOOD.replace("eps_w = 80.0", "eps_w = 1.0");
        let err = ExperimentConfig::from_str_strict(&bad).unwrap_err();
        assert!(err.to_string().contains("(A3)"), "{err}");
    }

    #[test]
    fn violations_are_collected_together() {
        let bad = GOOD
            .replace("pressure = 1.0", "pressure = -1.0")
            .replace("atom = 0 0 0 1.0 1.0 1.0 0.2", "atom = 9 0 0 1.0 1.0 1.0 0.2");
        let err = ExperimentConfig::from_str_strict(&bad).unwrap_err().to_string();
        assert!(err.contains("(A1)"), "{err}");
        assert!(err.contains("positive numbers"), "{err}");
        assert!(err.contains("inside Omega"), "{err}");
    }

    #[test]
    fn bad_schedule_rejected() {
        let bad = GOOD.replace("xi = 0.2 0.1 0.05", "xi = 0.1 0.2");
        assert!(ExperimentConfig::from_str_strict(&bad).is_err());
        let bad2 = GOOD.replace("xi = 0.2 0.1 0.05", "xi = 0.95");
        assert!(ExperimentConfig::from_str_strict(&bad2).is_err());
    }

    #[test]
    fn non_neutral_ions_rejected() {
        let bad = GOOD.replace("species = 0.1 -1.0", "species = 0.2 -1.0");
        let err = ExperimentConfig::from_str_strict(&bad).unwrap_err();
        assert!(err.to_string().contains("neutrality"), "{err}");
    }
}
