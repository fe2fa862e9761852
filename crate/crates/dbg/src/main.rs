use solvate::forces::*;
use solvate::grid::*;
use solvate::model::*;
use solvate::pb::*;
use solvate::profiles::*;

fn main() {
    let nodes = 129usize;
    let grid = StructuredGrid::new(2, &[0.0, 0.0], &[1.0, 1.0], &[nodes, nodes]).unwrap();
    let xi = 0.25;
    let shape = InterfaceShape::plane(0, 0.5);
    let mut phi = lift_profile(&canonical_profile(xi).unwrap(), &shape, &grid);
    phi.strip_analytic();
    let p = SolvationParams::reduced(1.0, 1.0, 1.0);
    let d = DielectricProfile::quintic(1.0, 80.0).unwrap();
    let setup = PBSetup { grid: grid.clone(), dielectric: d, ionic: None, kbt: 1.0,
        rho: ScalarField::zeros(&grid), psi_inf: BoundaryData::Zero, opts: SolverOpts::default() };
    let pb = solve(&setup.problem_for(&phi).unwrap()).unwrap();
    let ctx = ModelCtx { params: &p, atoms: &[], dielectric: &d, ionic: None, kbt: 1.0, u_max: 1e4 };
    let set = stress_set(&phi, xi, &pb, &ctx).unwrap();
    let v = TestField::radial("v", [0.5, 0.5, 0.0], 0.35);
    let g = gradient(&phi);
    let (mut total_mismatch, mut count) = (0.0, 0);
    let mut worst = (0.0f64, 0usize);
    for i in 0..grid.node_count() {
        let x = grid.position(i);
        let w = grid.weight(i);
        let gv = v.eval_grad(x);
        let gp = g.values()[i];
        let gp2 = gp[0]*gp[0] + gp[1]*gp[1];
        let viso = 0.5*xi*gp2 + eval_w(phi.values()[i])/xi;
        let mut dy = 0.0;
        for a in 0..3 { for b in 0..3 { dy += xi*gp[a]*gp[b]*gv[a][b]; } }
        let divv = gv[0][0] + gv[1][1];
        let manual = viso*divv - dy;
        let mut tdot = 0.0;
        for a in 0..3 { for b in 0..3 { tdot += set.t_sur.values()[i][a][b]*gv[a][b]; } }
        let diff = tdot - manual;
        if diff.abs() > 1e-12 { count += 1; total_mismatch += w*diff;
            if diff.abs() > worst.0 { worst = (diff.abs(), i); } }
    }
    println!("mismatching nodes: {count}, weighted total {total_mismatch:.6e}, worst {:.3e} at {}", worst.0, worst.1);
    let i = worst.1;
    let c = grid.coords(i);
    println!("coords {:?} pos {:?}", c, grid.position(i));
    let gv = v.eval_grad(grid.position(i));
    println!("gv diag: {:.4e} {:.4e} {:.4e}", gv[0][0], gv[1][1], gv[2][2]);
    println!("t_sur row2: {:?}", set.t_sur.values()[i][2]);
    println!("t_sur[2][2] = {:.6e}", set.t_sur.values()[i][2][2]);
}
