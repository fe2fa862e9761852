//! `solvate`: configuration-driven runner for the phase-field solvation
//! laboratory.
//!
//! Every subcommand reads one experiment config, executes the named
//! study, prints the human table to stdout, and writes
//! `report.json`, `rows.csv`, `provenance.txt` (plus field dumps under
//! `fields/`) into the output directory. The process exits 0 exactly
//! when every tolerance in the study passed.

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use solvate::config::{ExperimentConfig, PbMedium};
use solvate::converge::{
    ch_force_study, counterexample_study, energy_component_study, equipartition_study,
    ConvergenceReport, EnergyTols, EquipartitionExpectation, SequenceKind, StudyStatus,
    SweepSpec,
};
use solvate::forces::{TensorTest, TestField};
use solvate::grid::{atomic_write, write_field_binary_tagged, write_field_csv, InterfaceShape};
use solvate::pb;
use solvate::profiles;
use solvate::relax::{xi_continuation, FlowDriver};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "solvate", version, about = "phase-field solvation laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment configuration file.
    #[arg(long, global = true, default_value = "experiment.cfg")]
    config: PathBuf,

    /// Output directory (overrides [output] dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads for sweep members (0 = all cores).
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,

    /// Multiplies every pass/fail tolerance.
    #[arg(long, global = true, default_value_t = 1.0)]
    tol_scale: f64,

    /// Overrides [run] seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// One Poisson-Boltzmann solve; dumps diagnostics and the potential.
    PbSolve,
    /// Component-wise energy convergence sweep.
    EnergyStudy,
    /// Equi-partition discrepancy sweep.
    Equipartition,
    /// Interface-stress force convergence sweep (with hypothesis gate).
    ChForce,
    /// All four weak pairings against sharp boundary forces.
    SolvationForce,
    /// Scaled-well counterexample sweep (surface limit beta * P).
    Counterexample,
    /// Gradient-flow relaxation along the xi schedule.
    Relax,
    /// Tabulates the configured 1D profile as CSV.
    ProfileDump,
}

fn main() {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(pass) => std::process::exit(if pass { 0 } else { 1 }),
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(2);
        }
    }
}

fn run(cli: &Cli) -> anyhow::Result<bool> {
    let mut config = ExperimentConfig::from_path(&cli.config)
        .with_context(|| format!("loading {}", cli.config.display()))?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let out_dir = cli
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&config.output_dir));
    std::fs::create_dir_all(&out_dir)?;

    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .ok();
    }

    let pass = match cli.command {
        Command::PbSolve => run_pb_solve(&config, &out_dir)?,
        Command::EnergyStudy => {
            let report = energy_component_study(
                &config.sweep_spec(cli.tol_scale),
                &config.study_model(),
                EnergyTols::default(),
            )?;
            emit_report(&config, report, &out_dir)?
        }
        Command::Equipartition => {
            let spec = config.sweep_spec(cli.tol_scale);
            let expect = EquipartitionExpectation::default_for(spec.sequence);
            let report = equipartition_study(&spec, &config.study_model(), expect)?;
            emit_report(&config, report, &out_dir)?
        }
        Command::ChForce => {
            let spec = config.sweep_spec(cli.tol_scale);
            let (tensors, vectors) = default_ch_tests(&config, &spec)?;
            let report =
                ch_force_study(&spec, &config.study_model(), &tensors, &vectors, 0.03)?;
            emit_report(&config, report, &out_dir)?
        }
        Command::SolvationForce => {
            let spec = config.sweep_spec(cli.tol_scale);
            let vectors = default_solvation_tests(&config, &spec)?;
            let report = solvate::converge::solvation_force_study(
                &spec,
                &config.study_model(),
                &vectors,
                0.03,
            )?;
            emit_report(&config, report, &out_dir)?
        }
        Command::Counterexample => {
            let spec = SweepSpec {
                sequence: SequenceKind::Gk {
                    a: config.well_scale,
                },
                ..config.sweep_spec(cli.tol_scale)
            };
            let report =
                counterexample_study(&spec, &config.study_model(), config.well_scale, 0.02)?;
            emit_report(&config, report, &out_dir)?
        }
        Command::Relax => run_relax(&config, &out_dir)?,
        Command::ProfileDump => run_profile_dump(&config, &out_dir)?,
    };
    Ok(pass)
}

fn hash_tag(config: &ExperimentConfig) -> [u8; 8] {
    let mut tag = [0u8; 8];
    for (i, b) in config.hash().as_bytes().iter().take(8).enumerate() {
        tag[i] = *b;
    }
    tag
}

fn write_provenance(
    config: &ExperimentConfig,
    out_dir: &Path,
    what: &str,
    extra: &[String],
) -> anyhow::Result<()> {
    let mut text = String::new();
    text.push_str(&format!("config_hash = {}\n", config.hash()));
    text.push_str(&format!("run = {what}\n"));
    text.push_str(&format!("seed = {}\n", config.seed));
    text.push_str(&format!("schedule = {:?}\n", config.schedule));
    text.push_str(&format!("h_per_xi = {}\n", config.h_per_xi));
    text.push_str(&format!("pb_tol = {:.3e}\n", config.pb_opts.tol));
    for line in extra {
        text.push_str(line);
        text.push('\n');
    }
    atomic_write(&out_dir.join("provenance.txt"), text.as_bytes())?;
    Ok(())
}

fn emit_report(
    config: &ExperimentConfig,
    mut report: ConvergenceReport,
    out_dir: &Path,
) -> anyhow::Result<bool> {
    report.provenance.config_hash = config.hash().to_string();
    let table = solvate::report::render_table(&report);
    print!("{table}");
    let csv = solvate::report::render_csv(&report);
    atomic_write(&out_dir.join("rows.csv"), csv.as_bytes())?;
    let json = serde_json::to_string_pretty(&report)?;
    atomic_write(&out_dir.join("report.json"), json.as_bytes())?;
    write_provenance(config, out_dir, &report.study, &report.notes)?;
    Ok(report.status != StudyStatus::Fail)
}

fn run_pb_solve(config: &ExperimentConfig, out_dir: &Path) -> anyhow::Result<bool> {
    let grid = config.fixed_grid()?;
    let model = config.study_model();
    let setup = pbsetup(&model, &grid);
    let solution = match config.pb_medium {
        PbMedium::Sharp => pb::solve_sharp(&setup, &config.shape)?,
        PbMedium::Lift => {
            let xi = config.schedule.first().copied().unwrap_or(0.1);
            let phi =
                profiles::lift_profile(&profiles::canonical_profile(xi)?, &config.shape, &grid);
            pb::solve(&setup.problem_for(&phi)?)?
        }
        PbMedium::Uniform => {
            let phi = solvate::grid::ScalarField::zeros(&grid);
            pb::solve(&setup.problem_for(&phi)?)?
        }
    };
    let diag = format!(
        "{{\"config_hash\":\"{}\",\"f_ele\":{:.12e},\"diagnostics\":{}}}\n",
        config.hash(),
        solution.f_ele(),
        solution.diagnostics_json()
    );
    print!("{diag}");
    atomic_write(&out_dir.join("report.json"), diag.as_bytes())?;
    let fields = out_dir.join("fields");
    std::fs::create_dir_all(&fields)?;
    write_field_binary_tagged(&solution.psi, &fields.join("psi.bin"), &hash_tag(config))?;
    write_field_csv(&solution.psi, &fields.join("psi.csv"))?;
    write_provenance(
        config,
        out_dir,
        "pb-solve",
        &[format!("iterations = {}", solution.iterations)],
    )?;
    Ok(true)
}

fn pbsetup(
    model: &solvate::converge::StudyModel,
    grid: &std::sync::Arc<solvate::grid::StructuredGrid>,
) -> pb::PBSetup {
    let atoms = model.atoms.clone();
    let dim = if grid.is_radial() { 3 } else { grid.dim() };
    pb::PBSetup {
        grid: grid.clone(),
        dielectric: model.dielectric,
        ionic: model.ionic.clone(),
        kbt: model.kbt,
        rho: solvate::grid::ScalarField::from_fn(grid, |x| {
            solvate::model::smeared_charge_density(x, &atoms, dim)
        }),
        psi_inf: model.psi_inf.clone(),
        opts: model.pb_opts,
    }
}

/// Test family for the CH force study: identity and radial-dyad tensor
/// cutoffs flat across the interface, plus a radial vector field.
fn default_ch_tests(
    config: &ExperimentConfig,
    spec: &SweepSpec,
) -> anyhow::Result<(Vec<TensorTest>, Vec<TestField>)> {
    let ndim = if spec.radial { 3 } else { spec.dim };
    match &config.shape {
        InterfaceShape::Ball { center, radius } => {
            let edge = if spec.radial {
                spec.hi[0]
            } else {
                (0..spec.dim)
                    .map(|d| (spec.hi[d] - center[d]).min(center[d] - spec.lo[d]))
                    .fold(f64::INFINITY, f64::min)
            };
            let outer = radius + 0.55 * (edge - radius);
            let core = (radius + 0.2 * (outer - radius)) / outer;
            Ok((
                vec![
                    TensorTest::identity("identity", *center, outer, ndim).with_core(core),
                    TensorTest::radial_dyad("radial-dyad", *center, outer, ndim).with_core(core),
                ],
                vec![TestField::radial("radial", *center, outer).with_core(core)],
            ))
        }
        _ => {
            // planar shapes: a ball cutoff centered on the interface
            let center = plane_center(config, spec);
            let outer = 0.5
                * (0..spec.dim)
                    .map(|d| spec.hi[d] - spec.lo[d])
                    .fold(f64::INFINITY, f64::min)
                - 3.0 * spec.schedule.first().copied().unwrap_or(0.1) / spec.h_per_xi;
            Ok((
                vec![TensorTest::identity("identity", center, outer, ndim)],
                vec![TestField::radial("radial", center, outer)],
            ))
        }
    }
}

fn plane_center(config: &ExperimentConfig, spec: &SweepSpec) -> [f64; 3] {
    let mut center = [0.0; 3];
    for d in 0..spec.dim {
        center[d] = 0.5 * (spec.lo[d] + spec.hi[d]);
    }
    if let InterfaceShape::Plane { axis, offset, .. } = &config.shape {
        center[*axis] = *offset;
    }
    center
}

/// Annular radial fields around the interface: valid for every pairing
/// including van der Waals (atoms sit in the hole).
fn default_solvation_tests(
    config: &ExperimentConfig,
    spec: &SweepSpec,
) -> anyhow::Result<Vec<TestField>> {
    match &config.shape {
        InterfaceShape::Ball { center, radius } => {
            let edge = if spec.radial {
                spec.hi[0]
            } else {
                (0..spec.dim)
                    .map(|d| (spec.hi[d] - center[d]).min(center[d] - spec.lo[d]))
                    .fold(f64::INFINITY, f64::min)
            };
            let r1 = radius + 0.55 * (edge - radius);
            let mut clearance: f64 = 0.0;
            for a in &config.atoms {
                let d = (0..3)
                    .map(|k| (a.position[k] - center[k]).powi(2))
                    .sum::<f64>()
                    .sqrt();
                clearance = clearance.max(d);
            }
            let r0 = (0.5 * radius).max(1.2 * clearance + 1e-6);
            if r0 >= *radius {
                bail!("atoms too close to the interface for an annular test field");
            }
            Ok(vec![TestField::annular_radial("annular", *center, r0, r1)])
        }
        _ => {
            let center = plane_center(config, spec);
            let outer = 0.4
                * (0..spec.dim)
                    .map(|d| spec.hi[d] - spec.lo[d])
                    .fold(f64::INFINITY, f64::min);
            Ok(vec![TestField::radial("radial", center, outer)])
        }
    }
}

fn run_relax(config: &ExperimentConfig, out_dir: &Path) -> anyhow::Result<bool> {
    if config.schedule.is_empty() {
        bail!("[schedule] xi is required for relax runs");
    }
    let grid = config.fixed_grid()?;
    let model = config.study_model();
    let xi0 = config.schedule[0];
    let initial =
        profiles::lift_profile(&profiles::canonical_profile(xi0)?, &config.shape, &grid);
    let has_electro = model.atoms.iter().any(|a| a.partial_charge != 0.0);
    let states = xi_continuation(&config.schedule, initial, &|xi, g| {
        Ok(FlowDriver {
            xi,
            ctx: solvate::forces::ModelCtx {
                params: &model.params,
                atoms: &model.atoms,
                dielectric: &model.dielectric,
                ionic: model.ionic.as_ref(),
                kbt: model.kbt,
                u_max: model.u_max,
            },
            electrostatics: if has_electro {
                Some(pbsetup(&model, g))
            } else {
                None
            },
            opts: config.flow_opts,
        })
    })?;

    let fields = out_dir.join("fields");
    std::fs::create_dir_all(&fields)?;
    let mut csv = format!(
        "# config_hash={}\n{}\n",
        config.hash(),
        solvate::relax::StepRecord::csv_header()
    );
    let mut notes = Vec::new();
    let mut all_converged = true;
    for (k, state) in states.iter().enumerate() {
        for rec in &state.log {
            csv.push_str(&format!("{}\n", rec.csv_row()));
        }
        notes.push(format!(
            "xi = {}: steps = {}, grad_norm = {:.3e}, F = {:.9e}, partial = {}",
            state.xi, state.step, state.grad_norm, state.energy, state.partial
        ));
        all_converged &= !state.partial;
        write_field_binary_tagged(
            &state.phi,
            &fields.join(format!("phi_{k:02}.bin")),
            &hash_tag(config),
        )?;
    }
    atomic_write(&out_dir.join("rows.csv"), csv.as_bytes())?;
    for n in &notes {
        println!("{n}");
    }
    write_provenance(config, out_dir, "relax", &notes)?;
    Ok(all_converged)
}

fn run_profile_dump(config: &ExperimentConfig, out_dir: &Path) -> anyhow::Result<bool> {
    let xi = config.schedule.first().copied().unwrap_or(0.1);
    let profile = match config.sequence {
        SequenceKind::Gk { a } => profiles::gk_profile(xi, a)?,
        SequenceKind::StepRecovery => profiles::recovery_profile(xi)?,
        _ => profiles::canonical_profile(xi)?,
    };
    let mut csv = format!("# config_hash={}\n", config.hash());
    csv.push_str(&profile.to_csv(2001));
    atomic_write(&out_dir.join("profile.csv"), csv.as_bytes())?;
    write_provenance(config, out_dir, "profile-dump", &[format!("xi = {xi}")])?;
    println!("profile tabulated at xi = {xi}");
    Ok(true)
}
