//! Acceptance suite: every numbered criterion of the verification plan
//! runs here at its pinned tolerance and prints one pass/fail line
//! (visible with `cargo test --test acceptance -- --nocapture`).
//!
//! Determinism of the CLI artifacts (criterion 12) is exercised in the
//! runner crate's integration tests, where the binary is available; a
//! library-level byte-identity check accompanies it here.

use solvate::converge::{
    ch_force_study, counterexample_study, energy_component_study, equipartition_study,
    richardson_fit, EnergyTols, EquipartitionExpectation, SequenceKind, StudyStatus, StudyModel,
    SweepSpec,
};
use solvate::energy;
use solvate::forces::{
    dielectric_force_identity_check, divergence_residual, force_densities, stress_set, ModelCtx,
    TensorTest, TestField,
};
use solvate::grid::{InterfaceShape, ScalarField, StructuredGrid};
use solvate::model::{
    eval_w, smeared_charge_density, sqrt_2w, DielectricProfile, IonicModel, SolvationParams,
    SoluteAtom,
};
use solvate::pb::{self, BoundaryData, PBSetup, SolverOpts};
use solvate::profiles::{canonical_profile, lift_profile};
use std::sync::Arc;

fn pass_line(n: u32, ok: bool, what: &str, detail: &str) {
    let tag = if ok { "PASS" } else { "FAIL" };
    println!("[{tag}] criterion {n}: {what} ({detail})");
    assert!(ok, "criterion {n} failed: {what} ({detail})");
}

/// Adaptive Simpson quadrature, the stated oracle for the well
/// normalization.
fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
    }
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let left = simpson(f, a, m);
        let right = simpson(f, m, b);
        if depth > 40 || (left + right - whole).abs() <= 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            recurse(f, a, m, left, 0.5 * tol, depth + 1)
                + recurse(f, m, b, right, 0.5 * tol, depth + 1)
        }
    }
    let whole = simpson(f, a, b);
    recurse(f, a, b, whole, tol, 0)
}

#[test]
fn criterion_01_well_normalization() {
    let integral = adaptive_simpson(&|t| sqrt_2w(t), 0.0, 1.0, 1e-13);
    let err = (integral - 1.0).abs();
    pass_line(
        1,
        err <= 1e-10,
        "int_0^1 sqrt(2 W) dt = 1",
        &format!("adaptive quadrature error {err:.2e}"),
    );
}

#[test]
fn criterion_02_canonical_profile() {
    let xi = 0.07;
    let p = canonical_profile(xi).unwrap();
    // equi-partition ODE residual of the closed form
    let mut worst: f64 = 0.0;
    for i in 0..=4000 {
        let z = -0.5 + i as f64 * 2.5e-4;
        let g = p.g(z);
        worst = worst.max((xi * p.g_prime(z) - 6.0 * g * (1.0 - g)).abs());
    }
    // line energy by composite Simpson over the saturated window
    let half = 6.0 * xi;
    let n = 20_000;
    let h = 2.0 * half / n as f64;
    let mut energy = 0.0;
    for i in 0..n {
        let z0 = -half + i as f64 * h;
        let dens = |z: f64| {
            let gp = p.g_prime(z);
            0.5 * xi * gp * gp + eval_w(p.g(z)) / xi
        };
        energy += h / 6.0 * (dens(z0) + 4.0 * dens(z0 + 0.5 * h) + dens(z0 + h));
    }
    let line_err = (energy - 1.0).abs();
    pass_line(
        2,
        worst <= 1e-12 && line_err <= 1e-8,
        "canonical profile: ODE residual and unit line energy",
        &format!("residual {worst:.2e}, line-energy error {line_err:.2e}"),
    );
}

fn geometric_model() -> StudyModel {
    StudyModel::geometric(SolvationParams::reduced(1.0, 1.0, 1.0))
}

fn plane_2d_spec(sequence: SequenceKind, schedule: Vec<f64>) -> SweepSpec {
    SweepSpec {
        shape: InterfaceShape::plane(0, 0.5),
        schedule,
        h_per_xi: 8.0,
        lo: vec![0.0, 0.0],
        hi: vec![1.0, 1.0],
        dim: 2,
        radial: false,
        sequence,
        seed: 0,
        tol_scale: 1.0,
    }
}

fn ball_radial_spec(sequence: SequenceKind, schedule: Vec<f64>) -> SweepSpec {
    SweepSpec {
        shape: InterfaceShape::ball([0.0; 3], 1.0),
        schedule,
        h_per_xi: 8.0,
        lo: vec![0.0],
        hi: vec![4.0],
        dim: 1,
        radial: true,
        sequence,
        seed: 0,
        tol_scale: 1.0,
    }
}

#[test]
fn criterion_03_gamma_limit_of_surface_energy() {
    let schedule = vec![0.2, 0.14, 0.1, 0.07, 0.05];
    let model = geometric_model();

    let check = |spec: &SweepSpec, label: &str| {
        let report = energy_component_study(spec, &model, EnergyTols::default()).unwrap();
        let sur = report.column("surface").unwrap();
        let final_err = sur.final_rel_error;
        let fit_limit = sur.fit.map(|f| f.limit).unwrap_or(*sur.values.last().unwrap());
        let fit_err = (fit_limit - sur.target).abs() / sur.target;
        pass_line(
            3,
            final_err <= 0.02 && fit_err <= 0.01,
            &format!("surface energy to gamma0 P(G), {label}"),
            &format!("final rel {final_err:.2e}, fitted rel {fit_err:.2e}"),
        );
    };
    check(
        &plane_2d_spec(SequenceKind::CanonicalLift, schedule.clone()),
        "plane in 2D",
    );
    check(
        &ball_radial_spec(SequenceKind::CanonicalLift, schedule.clone()),
        "ball in 3D radial",
    );
    // the limsup construction approaches from below target * (1 + o(1))
    let spec = plane_2d_spec(SequenceKind::StepRecovery, schedule);
    let report = energy_component_study(&spec, &model, EnergyTols::default()).unwrap();
    let sur = report.column("surface").unwrap();
    let bounded_above = sur
        .values
        .iter()
        .all(|v| *v <= sur.target * (1.0 + 0.02));
    pass_line(
        3,
        bounded_above && sur.final_rel_error <= 0.02,
        "recovery construction stays within the limsup bound",
        &format!("final rel {:.2e}", sur.final_rel_error),
    );
}

#[test]
fn criterion_04_counterexample_beta_limit() {
    let schedule = vec![0.05, 0.035, 0.025, 0.0175, 0.0125];
    let model = geometric_model();
    for (a, beta) in [(4.0, 1.25), (1.0, 1.0)] {
        let spec = SweepSpec {
            sequence: SequenceKind::Gk { a },
            ..plane_2d_spec(SequenceKind::Gk { a }, schedule.clone())
        };
        let report = counterexample_study(&spec, &model, a, 0.02).unwrap();
        let sur = report.column("surface_raw").unwrap();
        let fitted = sur.fit.map(|f| f.limit).unwrap_or(*sur.values.last().unwrap());
        let fit_err = (fitted - beta).abs() / beta;
        let l1 = report.column("l1_distance").unwrap();
        let l1_decreasing = l1.values.windows(2).all(|w| w[1] < w[0]);
        pass_line(
            4,
            report.passed() && fit_err <= 0.02 && l1_decreasing,
            &format!("gk(a={a}) surface limit = {beta} * gamma0 P(G)"),
            &format!("fitted {fitted:.5} (rel {fit_err:.2e}), L1 decreasing {l1_decreasing}"),
        );
    }
}

#[test]
fn criterion_05_equipartition_dichotomy() {
    let schedule = vec![0.2, 0.14, 0.1, 0.07, 0.05];
    let model = geometric_model();

    // recovery-type sequences of criterion 3: clamp defect decays fast
    let spec = plane_2d_spec(SequenceKind::StepRecovery, schedule.clone());
    let report = equipartition_study(
        &spec,
        &model,
        EquipartitionExpectation::Decreasing { final_frac: 0.1 },
    )
    .unwrap();
    let d = report.column("discrepancy_l1").unwrap();
    let ratio = d.values.last().unwrap() / d.values.first().unwrap();
    pass_line(
        5,
        report.passed(),
        "recovery sequence discrepancy decreases monotonically to <= 10% of start",
        &format!("final/first = {ratio:.2e}"),
    );

    // canonical lifts are pointwise-exact
    let spec = plane_2d_spec(SequenceKind::CanonicalLift, schedule.clone());
    let report = equipartition_study(
        &spec,
        &model,
        EquipartitionExpectation::VanishingExact { frac: 1e-6 },
    )
    .unwrap();
    pass_line(
        5,
        report.passed(),
        "canonical lifts keep discrepancy at quadrature noise",
        &format!(
            "max discrepancy {:.2e}",
            report
                .column("discrepancy_l1")
                .unwrap()
                .values
                .iter()
                .fold(0.0f64, |m, v| m.max(*v))
        ),
    );

    // gk(a=4) plateaus: the dichotomy
    let spec = plane_2d_spec(SequenceKind::Gk { a: 4.0 }, schedule);
    let report = equipartition_study(
        &spec,
        &model,
        EquipartitionExpectation::Plateau { min_frac: 0.1 },
    )
    .unwrap();
    let d = report.column("discrepancy_l1").unwrap();
    pass_line(
        5,
        report.passed(),
        "gk(a=4) discrepancy stays >= 0.1 P(G)",
        &format!("min discrepancy {:.3}", d.values.iter().fold(f64::INFINITY, |m, v| m.min(*v))),
    );
}

fn born_atom(q: f64) -> SoluteAtom {
    SoluteAtom {
        position: [0.0; 3],
        partial_charge: q,
        lj_energy: 1.0,
        lj_length: 1.0,
        smear_width: 0.2,
    }
}

fn radial_born_setup(nodes: usize, ionic: Option<IonicModel>, q: f64) -> PBSetup {
    let grid = StructuredGrid::radial(0.0, 4.0, nodes).unwrap();
    let atoms = [born_atom(q)];
    PBSetup {
        grid: grid.clone(),
        dielectric: DielectricProfile::quintic(1.0, 80.0).unwrap(),
        ionic,
        kbt: 1.0,
        rho: ScalarField::from_fn(&grid, |x| smeared_charge_density(x, &atoms, 3)),
        psi_inf: BoundaryData::Zero,
        opts: SolverOpts::default(),
    }
}

/// Independent radial finite-volume oracle (linear, no ions), assembled
/// and eliminated by hand; used only as a reference in this suite.
fn radial_oracle_f_ele(nodes: usize, rmax: f64, radius: f64, q: f64) -> f64 {
    let h = rmax / (nodes - 1) as f64;
    let pi4 = 4.0 * std::f64::consts::PI;
    let atoms = [born_atom(q)];
    let eps_of = |r: f64| if r < radius { 1.0 } else { 80.0 };
    let rho_of = |r: f64| smeared_charge_density([r, 0.0, 0.0], &atoms, 3);
    let mut sub = vec![0.0; nodes];
    let mut main = vec![0.0; nodes];
    let mut sup = vec![0.0; nodes];
    let mut rhs = vec![0.0; nodes];
    for i in 0..nodes - 1 {
        let rm = (i as f64 + 0.5) * h;
        let cond = pi4 * rm * rm * eps_of(rm) / h;
        main[i] += cond;
        if i + 1 < nodes - 1 {
            main[i + 1] += cond;
        }
        sup[i] = -cond;
        sub[i + 1] = -cond;
    }
    for i in 0..nodes - 1 {
        let r = i as f64 * h;
        let rlo = (r - 0.5 * h).max(0.0);
        let rhi = r + 0.5 * h;
        rhs[i] = pi4 / 3.0 * (rhi.powi(3) - rlo.powi(3)) * rho_of(r);
    }
    main[nodes - 1] = 1.0;
    let mut b = main;
    let mut d = rhs;
    for i in 1..nodes {
        let m = sub[i] / b[i - 1];
        b[i] -= m * sup[i - 1];
        d[i] -= m * d[i - 1];
    }
    let mut psi = vec![0.0; nodes];
    psi[nodes - 1] = d[nodes - 1] / b[nodes - 1];
    for i in (0..nodes - 1).rev() {
        psi[i] = (d[i] - sup[i] * psi[i + 1]) / b[i];
    }
    let mut e = 0.0;
    for i in 0..nodes - 1 {
        let rm = (i as f64 + 0.5) * h;
        let g = (psi[i + 1] - psi[i]) / h;
        e += 0.5 * pi4 * rm * rm * h * eps_of(rm) * g * g;
    }
    for i in 0..nodes {
        let r = i as f64 * h;
        let rlo = (r - 0.5 * h).max(0.0);
        let rhi = (r + 0.5 * h).min(rmax);
        e -= pi4 / 3.0 * (rhi.powi(3) - rlo.powi(3)) * rho_of(r) * psi[i];
    }
    -e
}

#[test]
fn criterion_06_pb_solver() {
    // zero data: psi = 0 immediately
    let setup = radial_born_setup(101, Some(IonicModel::symmetric(0.1).unwrap()), 0.0);
    let zero = pb::solve(&setup.problem_for(&ScalarField::zeros(&setup.grid)).unwrap()).unwrap();
    pass_line(
        6,
        zero.iterations <= 1 && zero.psi.max_abs() == 0.0,
        "zero-data solve returns psi = 0 in at most one iteration",
        &format!("iterations {}", zero.iterations),
    );

    // Born-like case vs 10x-finer independent radial oracle
    let ball = InterfaceShape::ball([0.0; 3], 1.0);
    let setup = radial_born_setup(201, None, 1.0);
    let f_ele = pb::solve_sharp(&setup, &ball).unwrap().f_ele();
    let f_oracle = radial_oracle_f_ele(2001, 4.0, 1.0, 1.0);
    let rel = ((f_ele - f_oracle) / f_oracle).abs();
    pass_line(
        6,
        rel <= 5e-3,
        "Born radial F_ele matches the 10x-finer oracle within 0.5%",
        &format!("rel {rel:.2e}"),
    );

    // Newton contraction on a strongly nonlinear case
    let grid = StructuredGrid::radial(0.0, 4.0, 301).unwrap();
    let atoms = [SoluteAtom {
        position: [0.0; 3],
        partial_charge: 30.0,
        lj_energy: 1.0,
        lj_length: 1.0,
        smear_width: 0.1,
    }];
    let setup = PBSetup {
        grid: grid.clone(),
        dielectric: DielectricProfile::quintic(1.0, 2.0).unwrap(),
        ionic: Some(IonicModel::symmetric(0.5).unwrap()),
        kbt: 1.0,
        rho: ScalarField::from_fn(&grid, |x| smeared_charge_density(x, &atoms, 3)),
        psi_inf: BoundaryData::Zero,
        opts: SolverOpts::default(),
    };
    let sol = pb::solve(&setup.problem_for(&ScalarField::zeros(&grid)).unwrap()).unwrap();
    let h = &sol.residual_history;
    let tail = &h[h.len() - 3..];
    let worst_ratio = tail.windows(2).map(|w| w[1] / w[0]).fold(0.0f64, f64::max);
    pass_line(
        6,
        h.len() >= 4 && worst_ratio <= 0.3,
        "Newton contraction ratio <= 0.3 over the final three iterations",
        &format!("worst ratio {worst_ratio:.3} over {} iterations", sol.iterations),
    );
}

#[test]
fn criterion_07_component_energy_convergence() {
    // ball + centered charge + symmetric salt, canonical-lift sequence
    let mut model = geometric_model();
    model.atoms = vec![born_atom(1.0)];
    model.ionic = Some(IonicModel::symmetric(0.1).unwrap());
    let spec = ball_radial_spec(
        SequenceKind::CanonicalLift,
        vec![0.2, 0.14, 0.1, 0.07, 0.05, 0.03, 0.02, 0.015],
    );
    let report = energy_component_study(&spec, &model, EnergyTols::default()).unwrap();
    for (name, tol) in [("volume", 0.01), ("surface", 0.02), ("vdw", 0.02), ("ele", 0.03)] {
        let c = report.column(name).unwrap();
        pass_line(
            7,
            c.final_rel_error <= tol,
            &format!("{name} converges to its sharp target within {:.0}%", tol * 100.0),
            &format!("final rel {:.2e}", c.final_rel_error),
        );
    }
    assert_eq!(report.component_errors_bound_total(), Some(true));
    assert_eq!(report.components_converge_given_total(0.08), Some(true));
}

#[test]
fn criterion_08_stress_divergence_orders() {
    let params = SolvationParams::reduced(1.0, 1.0, 1.0);
    let d = DielectricProfile::quintic(1.0, 80.0).unwrap();
    let ionic = IonicModel::symmetric(0.2).unwrap();
    let atoms = [SoluteAtom {
        position: [1.6, 0.5, 0.0],
        partial_charge: 0.0,
        lj_energy: 0.8,
        lj_length: 0.5,
        smear_width: 0.2,
    }];
    let charge = [SoluteAtom {
        position: [0.45, 0.55, 0.0],
        partial_charge: 2.0,
        lj_energy: 0.0,
        lj_length: 0.1,
        smear_width: 0.15,
    }];
    let run = |nodes: usize| {
        let grid = StructuredGrid::new(2, &[0.0, 0.0], &[1.0, 1.0], &[nodes, nodes]).unwrap();
        let phi = ScalarField::from_fn(&grid, |x| {
            0.5 + 0.5 * (std::f64::consts::PI * x[0]).sin() * (std::f64::consts::PI * x[1]).sin()
        });
        let rho = ScalarField::from_fn(&grid, |x| smeared_charge_density(x, &charge, 2));
        let setup = PBSetup {
            grid: grid.clone(),
            dielectric: d,
            ionic: Some(ionic.clone()),
            kbt: 1.0,
            rho: rho.clone(),
            psi_inf: BoundaryData::Zero,
            opts: SolverOpts::default(),
        };
        let sol = pb::solve(&setup.problem_for(&phi).unwrap()).unwrap();
        let ctx = ModelCtx {
            params: &params,
            atoms: &atoms,
            dielectric: &d,
            ionic: Some(&ionic),
            kbt: 1.0,
            u_max: 1e4,
        };
        let xi = 0.25;
        let set = stress_set(&phi, xi, &sol, &ctx).unwrap();
        let dens = force_densities(&phi, xi, &sol, &ctx).unwrap();
        divergence_residual(&set, &dens, &phi, &sol, &rho, &ctx, 3).unwrap()
    };
    let coarse = run(65);
    let fine = run(129);
    for (a, b, name) in [
        (coarse.vol, fine.vol, "vol"),
        (coarse.sur, fine.sur, "sur"),
        (coarse.vdw, fine.vdw, "vdw"),
        (coarse.ele, fine.ele, "ele"),
    ] {
        let order = (a.l2 / b.l2).log2();
        pass_line(
            8,
            order >= 1.9,
            &format!("divergence identity residual order for {name}"),
            &format!("order {order:.2} ({:.2e} -> {:.2e})", a.l2, b.l2),
        );
    }
}

#[test]
fn criterion_09_ch_force_convergence() {
    let model = geometric_model();
    let schedule = vec![0.2, 0.14, 0.1, 0.07, 0.05];
    let spec = SweepSpec {
        shape: InterfaceShape::ball([0.0; 3], 1.0),
        schedule: schedule.clone(),
        h_per_xi: 8.0,
        lo: vec![0.0],
        hi: vec![3.0],
        dim: 1,
        radial: true,
        sequence: SequenceKind::CanonicalLift,
        seed: 0,
        tol_scale: 1.0,
    };
    // cutoffs flat across the interface: targets reduce to multiples of
    // the sphere area
    let tensors = vec![
        TensorTest::identity("identity", [0.0; 3], 2.0, 3).with_core(0.6),
        TensorTest::radial_dyad("radial-dyad", [0.0; 3], 2.0, 3).with_core(0.6),
    ];
    let vectors = vec![TestField::radial("radial", [0.0; 3], 2.0).with_core(0.6)];
    let report = ch_force_study(&spec, &model, &tensors, &vectors, 0.03).unwrap();
    assert_eq!(report.status, StudyStatus::Pass);
    let area = 4.0 * std::f64::consts::PI;
    let ident = report.column("tensor:identity").unwrap();
    assert!((ident.target - 2.0 * area).abs() <= 1e-9 * area);
    for c in &report.columns {
        pass_line(
            9,
            c.final_rel_error <= 0.03,
            &format!("CH force pairing {} converges to its surface target", c.name),
            &format!("target {:.4e}, final rel {:.2e}", c.target, c.final_rel_error),
        );
    }
    let fvec = report.column("force:radial").unwrap();
    // -(n-1) gamma0 H oint nu . V dS = -(2/R) * R * 4 pi R^2
    assert!((fvec.target + 2.0 * area).abs() <= 1e-9 * area);

    // the defective family fails the hypothesis gate
    let gk_spec = SweepSpec {
        sequence: SequenceKind::Gk { a: 4.0 },
        ..spec
    };
    let report = ch_force_study(&gk_spec, &model, &tensors, &vectors, 0.03).unwrap();
    pass_line(
        9,
        report.status == StudyStatus::HypothesisUnmet,
        "gk(a=4) sequence reports 'hypothesis unmet'",
        &report.notes.first().cloned().unwrap_or_default(),
    );
}

#[test]
fn criterion_10_dielectric_force_identity() {
    let params = SolvationParams::reduced(1.0, 1.0, 1.0);
    let ionic = IonicModel::symmetric(0.1).unwrap();
    let ball = InterfaceShape::ball([0.0; 3], 1.0);
    let gap_at = |nodes: usize| -> f64 {
        let setup = radial_born_setup(nodes, Some(ionic.clone()), 1.0);
        let sol = pb::solve_sharp(&setup, &ball).unwrap();
        let d = setup.dielectric;
        let ctx = ModelCtx {
            params: &params,
            atoms: &[],
            dielectric: &d,
            ionic: Some(&ionic),
            kbt: 1.0,
            u_max: 1e4,
        };
        let v = TestField::radial("radial", [0.0; 3], 2.5);
        let (lhs, rhs) =
            dielectric_force_identity_check(&ball, &sol, &setup.rho, &v, &setup.grid, ctx)
                .unwrap();
        ((lhs - rhs) / rhs.abs()).abs()
    };
    // h = R/64 over [0, 4]: 257 nodes
    let g64 = gap_at(257);
    let g128 = gap_at(513);
    pass_line(
        10,
        g64 <= 0.02,
        "bulk and surface evaluations agree within 2% at h = R/64",
        &format!("gap {g64:.3e}"),
    );
    pass_line(
        10,
        g128 < g64,
        "identity gap shrinks under refinement",
        &format!("{g64:.3e} -> {g128:.3e}"),
    );
}

#[test]
fn criterion_11_variation_matches_finite_differences() {
    use rand::{Rng, SeedableRng};
    let params = SolvationParams::reduced(1.0, 1.0, 1.0);
    let d = DielectricProfile::quintic(1.0, 80.0).unwrap();
    let ionic = IonicModel::symmetric(0.2).unwrap();
    let atoms = [SoluteAtom {
        position: [1.5, 0.5, 0.0], // outside the box: smooth U inside
        partial_charge: 0.0,
        lj_energy: 0.6,
        lj_length: 0.5,
        smear_width: 0.2,
    }];
    let charge = [SoluteAtom {
        position: [0.5, 0.5, 0.0],
        partial_charge: 1.5,
        lj_energy: 0.0,
        lj_length: 0.1,
        smear_width: 0.15,
    }];
    let grid = StructuredGrid::new(2, &[0.0, 0.0], &[1.0, 1.0], &[65, 65]).unwrap();
    let phi0 = ScalarField::from_fn(&grid, |x| {
        0.5 + 0.45 * (std::f64::consts::PI * x[0]).sin() * (2.0 * std::f64::consts::PI * x[1]).cos()
    });
    let rho = ScalarField::from_fn(&grid, |x| smeared_charge_density(x, &charge, 2));
    let mut opts = SolverOpts::default();
    opts.tol = 1e-12;
    let setup = PBSetup {
        grid: grid.clone(),
        dielectric: d,
        ionic: Some(ionic.clone()),
        kbt: 1.0,
        rho,
        psi_inf: BoundaryData::Zero,
        opts,
    };
    let xi = 0.3;
    let u_max = 1e4;
    let f_of = |phi: &ScalarField| -> f64 {
        let sol = pb::solve(&setup.problem_for(phi).unwrap()).unwrap();
        energy::total_f_xi(phi, xi, &sol, &params, &atoms, u_max).unwrap().total
    };
    let base_sol = pb::solve(&setup.problem_for(&phi0).unwrap()).unwrap();
    let ctx = ModelCtx {
        params: &params,
        atoms: &atoms,
        dielectric: &d,
        ionic: Some(&ionic),
        kbt: 1.0,
        u_max,
    };
    let df = solvate::forces::variation_delta_f(&phi0, xi, &base_sol, &ctx).unwrap();

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let eps = 1e-4;
    let mut worst: f64 = 0.0;
    for trial in 0..10 {
        // random compact eta: a few bumps at random interior centers
        let centers: Vec<([f64; 3], f64, f64)> = (0..3)
            .map(|_| {
                (
                    [rng.gen_range(0.25..0.75), rng.gen_range(0.25..0.75), 0.0],
                    rng.gen_range(0.08..0.15),
                    rng.gen_range(-1.0..1.0f64),
                )
            })
            .collect();
        let eta = ScalarField::from_fn(&grid, |x| {
            let mut v = 0.0;
            for (c, r, amp) in &centers {
                let t = (((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2)).sqrt() / r).min(1.0);
                let u = 1.0 - t;
                v += amp * u * u * u * (10.0 + u * (-15.0 + 6.0 * u));
            }
            v
        });
        let mut plus = phi0.clone();
        let mut minus = phi0.clone();
        for i in 0..grid.node_count() {
            plus.values_mut()[i] += eps * eta.values()[i];
            minus.values_mut()[i] -= eps * eta.values()[i];
        }
        let fd = (f_of(&plus) - f_of(&minus)) / (2.0 * eps);
        let mut lin = 0.0;
        for i in 0..grid.node_count() {
            lin += grid.weight(i) * df.values()[i] * eta.values()[i];
        }
        let rel = ((fd - lin) / lin.abs()).abs();
        worst = worst.max(rel);
        assert!(
            rel <= 1e-3,
            "trial {trial}: directional derivative mismatch {rel:.2e} (fd {fd:.6e}, lin {lin:.6e})"
        );
    }
    pass_line(
        11,
        worst <= 1e-3,
        "int deltaF . eta matches central differences of F_xi for 10 random eta",
        &format!("worst rel {worst:.2e} at eps = {eps:.0e}"),
    );
}

#[test]
fn criterion_12_library_level_determinism() {
    // byte-identical study output from identical inputs and seed; the
    // process-level CSV check lives in the runner crate's tests
    let spec = plane_2d_spec(SequenceKind::CanonicalLift, vec![0.2, 0.14, 0.1]);
    let model = geometric_model();
    let a = energy_component_study(&spec, &model, EnergyTols::default()).unwrap();
    let b = energy_component_study(&spec, &model, EnergyTols::default()).unwrap();
    let ja = solvate::report::render_csv(&a);
    let jb = solvate::report::render_csv(&b);
    pass_line(
        12,
        ja == jb,
        "identical spec + seed reproduce byte-identical rows",
        &format!("{} bytes", ja.len()),
    );
}

#[test]
fn acceptance_support_richardson_and_grids() {
    // auxiliary sanity shared by the criteria: fit recovery and grid
    // reference targets
    let pts: Vec<(f64, f64)> = [0.1f64, 0.07, 0.05]
        .iter()
        .map(|&x| (x, 2.0 - 0.3 * x.powf(2.0)))
        .collect();
    let fit = richardson_fit(&pts).unwrap();
    assert!((fit.limit - 2.0).abs() < 1e-10);
    let g: Arc<StructuredGrid> = StructuredGrid::radial(0.0, 4.0, 65).unwrap();
    let ball = InterfaceShape::ball([0.0; 3], 1.0);
    assert!((ball.perimeter(&g) - 4.0 * std::f64::consts::PI).abs() < 1e-12);
    assert!((ball.volume(&g) - 4.0 / 3.0 * std::f64::consts::PI).abs() < 1e-12);
}
