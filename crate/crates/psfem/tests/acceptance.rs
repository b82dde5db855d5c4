//! Acceptance gate: six criteria, one test each, every test ending in a
//! single `criterion N: PASS/FAIL` line (run with `--nocapture` to see the
//! lines for passing tests).
//!
//! Criteria 1 and 2 compare the produced convergence tables against frozen
//! reference tables, cell by cell at 5 percent (plus a small absolute floor
//! absorbing the four-decimal print rounding of the references) and fitted
//! order by fitted order at +-0.10. Criterion 3 checks asymptotic exactness
//! of both estimators, criterion 4 the superconvergence orders across
//! Poisson ratios, criterion 5 a battery of element and recovery
//! properties, and criterion 6 robustness of the gradient error in the
//! incompressible limit.
//!
//! The six production ladders (two examples, three Poisson ratios, five
//! levels, 4x4 Gauss) are computed once and shared between the tests.

use std::sync::OnceLock;
use std::time::Instant;

use nalgebra::{DMatrix, Point2, SVector, Vector2};
use psfem::bench::{example_mesh, run_ladder, ConvergenceTable, ManufacturedProblem, TrigSolution};
use psfem::fields::{error_report, interp_u, project_sigma, ExactSolution};
use psfem::ps_element::{element_matrices, StressMode};
use psfem::quadrature::gauss_rule;
use psfem::recovery::{
    cell_geometric_moments, estimators, recover_gradient, recover_stress,
    recover_stress_from_cell_moments,
};
use psfem::solver::{solve, DirichletData};
use psfem::{ElementGeometry, Material};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const NUS: [f64; 3] = [0.3, 0.49, 0.4999];
const YOUNG: f64 = 1500.0;
const LEVELS: usize = 5;
const GAUSS_N: usize = 4;
const COLS: [&str; 6] = ["theta_u", "e_u", "eta_u", "theta_s", "e_s", "eta_s"];

/// One frozen reference table: `cells[c][l]` is column `COLS[c]` at level
/// `l`, `orders[c]` the reference convergence order of that column.
struct RefTable {
    nu: f64,
    cells: [[f64; 5]; 6],
    orders: [f64; 6],
}

/// Example 1 (unit square, trigonometric displacement), 8x8 to 128x128.
const TABLE_1: [RefTable; 3] = [
    RefTable {
        nu: 0.3,
        cells: [
            [0.0051, 0.0013, 0.0003, 0.0001, 0.0000],
            [0.1114, 0.0556, 0.0278, 0.0139, 0.0069],
            [0.1216, 0.0573, 0.0280, 0.0139, 0.0069],
            [0.0138, 0.0034, 0.0009, 0.0002, 0.0001],
            [0.0953, 0.0475, 0.0237, 0.0119, 0.0059],
            [0.1059, 0.0491, 0.0240, 0.0119, 0.0059],
        ],
        orders: [1.98, 1.00, 1.03, 2.00, 1.00, 1.04],
    },
    RefTable {
        nu: 0.49,
        cells: [
            [0.0054, 0.0014, 0.0004, 0.0001, 0.0000],
            [0.1143, 0.0569, 0.0284, 0.0142, 0.0071],
            [0.1240, 0.0586, 0.0287, 0.0142, 0.0071],
            [0.0153, 0.0038, 0.0010, 0.0002, 0.0001],
            [0.1182, 0.0593, 0.0297, 0.0148, 0.0074],
            [0.1294, 0.0609, 0.0299, 0.0149, 0.0074],
        ],
        orders: [1.98, 1.00, 1.03, 2.00, 1.00, 1.03],
    },
    RefTable {
        nu: 0.4999,
        cells: [
            [0.0057, 0.0014, 0.0004, 0.0001, 0.0000],
            [0.1144, 0.0570, 0.0285, 0.0142, 0.0071],
            [0.1241, 0.0587, 0.0287, 0.0143, 0.0071],
            [0.0155, 0.0039, 0.0010, 0.0002, 0.0001],
            [0.1203, 0.0604, 0.0302, 0.0151, 0.0076],
            [0.1315, 0.0620, 0.0304, 0.0151, 0.0076],
        ],
        orders: [1.99, 1.00, 1.03, 2.00, 1.00, 1.03],
    },
];

/// Example 2 (5x1 strip, trapezoidal initial mesh), 20x4 to 320x64.
const TABLE_2: [RefTable; 3] = [
    RefTable {
        nu: 0.3,
        cells: [
            [0.0478, 0.0132, 0.0037, 0.0009, 0.0002],
            [0.1712, 0.0889, 0.0448, 0.0224, 0.0112],
            [0.1760, 0.1267, 0.0607, 0.0287, 0.0140],
            [0.2848, 0.0692, 0.0168, 0.0042, 0.0010],
            [0.5451, 0.2741, 0.1362, 0.0680, 0.0340],
            [0.4972, 0.3447, 0.1548, 0.0710, 0.0345],
        ],
        orders: [1.92, 0.98, 0.91, 2.03, 1.00, 0.96],
    },
    RefTable {
        nu: 0.49,
        cells: [
            [0.1203, 0.0268, 0.0065, 0.0016, 0.0004],
            [0.2501, 0.1204, 0.0596, 0.0297, 0.0149],
            [0.2006, 0.1551, 0.0755, 0.0355, 0.0173],
            [0.4431, 0.1060, 0.0254, 0.0063, 0.0016],
            [0.6416, 0.3286, 0.1635, 0.0816, 0.0408],
            [0.5682, 0.3974, 0.1816, 0.0845, 0.0412],
        ],
        orders: [2.05, 1.02, 0.89, 2.04, 1.00, 0.95],
    },
    RefTable {
        nu: 0.4999,
        cells: [
            [0.1450, 0.0289, 0.0070, 0.0017, 0.0004],
            [0.2653, 0.1229, 0.0607, 0.0303, 0.0151],
            [0.2030, 0.1571, 0.0765, 0.0359, 0.0175],
            [0.4981, 0.1101, 0.0263, 0.0065, 0.0016],
            [0.6702, 0.3341, 0.1661, 0.0829, 0.0414],
            [0.5732, 0.4024, 0.1841, 0.0858, 0.0419],
        ],
        orders: [2.09, 1.03, 0.89, 2.07, 1.00, 0.95],
    },
];

struct Run {
    table: ConvergenceTable,
    secs: f64,
}

struct AllRuns {
    ex1: Vec<Run>,
    ex2: Vec<Run>,
}

/// The six production ladders, computed once for the whole binary.
fn runs() -> &'static AllRuns {
    static RUNS: OnceLock<AllRuns> = OnceLock::new();
    RUNS.get_or_init(|| {
        let rule = gauss_rule(GAUSS_N).expect("gauss rule");
        let run_one = |which: usize, nu: f64| -> Run {
            let material = Material::new(YOUNG, nu).expect("material");
            let problem = ManufacturedProblem::example(which, material).expect("problem");
            let start = Instant::now();
            let table = run_ladder(&problem, LEVELS, &rule).expect("ladder");
            Run {
                table,
                secs: start.elapsed().as_secs_f64(),
            }
        };
        AllRuns {
            ex1: NUS.iter().map(|&nu| run_one(1, nu)).collect(),
            ex2: NUS.iter().map(|&nu| run_one(2, nu)).collect(),
        }
    })
}

/// 5 percent of the reference plus a floor for its four-decimal rounding.
fn cell_tol(reference: f64) -> f64 {
    0.05 * reference + 5e-5
}

/// Order of the last three levels alone: slope of log2(value) per level.
fn last_three_order(values: &[f64; 5]) -> f64 {
    (values[2] / values[4]).log2() / 2.0
}

/// Compares one produced table against its reference; returns the list of
/// violations. `special_theta_s` switches the theta_s order check to a
/// last-three-level regression at +-0.15 (its coarse levels sit outside
/// the asymptotic range on the strip meshes).
fn check_table(label: &str, run: &Run, reference: &RefTable, special_theta_s: bool) -> Vec<String> {
    let mut fails = Vec::new();
    assert_eq!(
        run.table.rows.len(),
        5,
        "{label}: ladder must have 5 levels"
    );
    for (c, col) in COLS.iter().enumerate() {
        for l in 0..5 {
            let got = run.table.rows[l].columns()[c];
            let want = reference.cells[c][l];
            if (got - want).abs() > cell_tol(want) {
                let pct = if want > 0.0 {
                    100.0 * (got - want) / want
                } else {
                    f64::INFINITY
                };
                fails.push(format!(
                    "{label} {col} level {l} ({}): got {got:.4}, reference {want:.4} ({pct:+.1}%)",
                    run.table.rows[l].label
                ));
            }
        }
        let (got_order, want_order, tol, how) = if special_theta_s && c == 3 {
            let mut vals = [0.0; 5];
            for (val, row) in vals.iter_mut().zip(&run.table.rows) {
                *val = row.columns()[c];
            }
            (last_three_order(&vals), reference.orders[c], 0.15, "last-3")
        } else {
            (
                run.table.regression_order.as_array()[c],
                reference.orders[c],
                0.10,
                "fit",
            )
        };
        if (got_order - want_order).abs() > tol {
            fails.push(format!(
                "{label} {col} order ({how}): got {got_order:.2}, reference {want_order:.2} (tol {tol:.2})"
            ));
        }
    }
    fails
}

fn report(criterion: usize, what: &str, fails: &[String], extra: &str) {
    for f in fails {
        println!("  {f}");
    }
    let verdict = if fails.is_empty() { "PASS" } else { "FAIL" };
    println!("criterion {criterion}: {verdict}  {what}{extra}");
    assert!(
        fails.is_empty(),
        "criterion {criterion} FAIL  {what}: {} violation(s):\n{}",
        fails.len(),
        fails.join("\n")
    );
}

#[test]
fn criterion_1_example_1_reference_table() {
    let runs = runs();
    let mut fails = Vec::new();
    for (run, reference) in runs.ex1.iter().zip(&TABLE_1) {
        let label = format!("example 1 nu={}", reference.nu);
        fails.extend(check_table(&label, run, reference, false));
    }
    let secs: f64 = runs.ex1.iter().map(|r| r.secs).sum();
    if secs > 60.0 {
        fails.push(format!("example 1 ladders took {secs:.1} s, budget 60 s"));
    }
    report(
        1,
        "example 1 table reproduced (90 cells at 5%, 18 orders at +-0.10)",
        &fails,
        &format!(", ladders {secs:.1} s"),
    );
}

#[test]
fn criterion_2_example_2_reference_table() {
    let runs = runs();
    let mut fails = Vec::new();
    for (run, reference) in runs.ex2.iter().zip(&TABLE_2) {
        let label = format!("example 2 nu={}", reference.nu);
        fails.extend(check_table(&label, run, reference, true));
    }
    let secs: f64 = runs.ex2.iter().map(|r| r.secs).sum();
    if secs > 300.0 {
        fails.push(format!("example 2 ladders took {secs:.1} s, budget 300 s"));
    }
    report(
        2,
        "example 2 table reproduced (90 cells at 5%, 18 orders)",
        &fails,
        &format!(", ladders {secs:.1} s"),
    );
}

#[test]
fn criterion_3_estimators_asymptotically_exact_on_example_1() {
    let runs = runs();
    let mut fails = Vec::new();

    // Effectivity indices eta/e from the shared ladders: within 2 percent
    // of 1 on the finest level, and |eta/e - 1| shrinking level to level
    // past the first refinements.
    for run in &runs.ex1 {
        let nu = run.table.meta.nu;
        for (ce, ceta, name) in [(1usize, 2usize, "u"), (4, 5, "sigma")] {
            let gaps: Vec<f64> = run
                .table
                .rows
                .iter()
                .map(|r| (r.columns()[ceta] / r.columns()[ce] - 1.0).abs())
                .collect();
            let finest = *gaps.last().unwrap();
            if finest > 0.02 {
                fails.push(format!(
                    "example 1 nu={nu}: |eta_{name}/e_{name} - 1| = {finest:.4} on the finest level, limit 0.02"
                ));
            }
            for l in 2..gaps.len() {
                if gaps[l] >= gaps[l - 1] {
                    fails.push(format!(
                        "example 1 nu={nu}: |eta_{name}/e_{name} - 1| grew from {:.4} to {:.4} at level {l}",
                        gaps[l - 1],
                        gaps[l]
                    ));
                }
            }
        }
    }

    // Sandwich bound on one ladder: the recovered-gradient estimator can
    // miss the true error by at most the recovery error of the exact
    // gradient, |e_u - eta_u| <= ||grad u - G_h u_h||, level by level.
    let rule = gauss_rule(GAUSS_N).expect("gauss rule");
    let material = Material::new(YOUNG, 0.3).expect("material");
    let problem = ManufacturedProblem::example(1, material).expect("problem");
    let exact = &problem.exact;
    let body = |x: f64, y: f64| exact.body_force(x, y);
    let trace = DirichletData::new(|x: f64, y: f64| exact.u(x, y));
    let mut mesh = problem.initial_mesh.clone();
    for _ in 0..2 {
        mesh = mesh.refine_bisection().expect("bisection");
    }
    for level in 0..LEVELS {
        if level > 0 {
            mesh = mesh.refine_bisection().expect("bisection");
        }
        let sol = solve(&mesh, &problem.material, &body, &trace, &rule).expect("solve");
        let rep = error_report(&mesh, &sol, exact, &rule).expect("report");
        let grad = recover_gradient(&mesh, &sol.u).expect("gradient recovery");
        let stress = recover_stress(&mesh, &sol, &rule).expect("stress recovery");
        let (eta_u, _) = estimators(&mesh, &sol, &grad, &stress, &rule).expect("estimators");

        let mut gap_sq = 0.0;
        for k in 0..mesh.n_elements() {
            let geom = mesh.geometry(k);
            for (xi, eta, w) in rule.iter() {
                let jw = w * geom.jacobian_det(xi, eta);
                let p = geom.map_ref_to_phys(xi, eta);
                let g = exact.grad_u(p.x, p.y);
                let r = grad.eval(&mesh, k, xi, eta);
                let d = [
                    g[(0, 0)] - r[0],
                    g[(0, 1)] - r[1],
                    g[(1, 0)] - r[2],
                    g[(1, 1)] - r[3],
                ];
                gap_sq += jw * d.iter().map(|x| x * x).sum::<f64>();
            }
        }
        let gap = gap_sq.sqrt();
        let slack = 1e-9 * (rep.e_u + eta_u + gap);
        if (rep.e_u - eta_u).abs() > gap + slack {
            fails.push(format!(
                "example 1 nu=0.3 level {level}: |e_u - eta_u| = {:.3e} exceeds ||grad u - G_h u_h|| = {:.3e}",
                (rep.e_u - eta_u).abs(),
                gap
            ));
        }
    }

    report(
        3,
        "estimators asymptotically exact on example 1 (finest |eta/e - 1| <= 0.02, gaps shrinking, sandwich bound)",
        &fails,
        "",
    );
}

#[test]
fn criterion_4_superconvergence_orders_uniform_in_poisson_ratio() {
    let runs = runs();
    let mut fails = Vec::new();
    for (example, set) in [(1, &runs.ex1), (2, &runs.ex2)] {
        for c in [0usize, 3] {
            let orders: Vec<f64> = set
                .iter()
                .map(|r| r.table.regression_order.as_array()[c])
                .collect();
            for (i, &nu) in NUS.iter().enumerate() {
                if orders[i] < 1.9 {
                    fails.push(format!(
                        "example {example} {} nu={nu}: fitted order {:.2} below 1.9",
                        COLS[c], orders[i]
                    ));
                }
            }
            if orders[2] < orders[0] - 0.1 {
                fails.push(format!(
                    "example {example} {}: order degrades from {:.2} (nu=0.3) to {:.2} (nu=0.4999)",
                    COLS[c], orders[0], orders[2]
                ));
            }
        }
    }
    report(
        4,
        "interpolant-distance orders >= 1.9 for u and sigma, no degradation toward nu=0.4999",
        &fails,
        "",
    );
}

#[test]
fn criterion_5_element_and_recovery_properties() {
    let mut fails = Vec::new();
    let rule = gauss_rule(GAUSS_N).expect("gauss rule");
    let material = Material::new(YOUNG, 0.3).expect("material");

    // (a) Patch test: linear boundary data, zero body force; the discrete
    // solution reproduces the linear field at every vertex and both
    // estimators vanish.
    {
        let mesh = example_mesh(1)
            .and_then(|m| m.refine_bisection())
            .expect("patch mesh");
        let lin = |x: f64, y: f64| Vector2::new((x + 2.0 * y) / 10.0, (3.0 * x - y) / 10.0);
        let sol = solve(
            &mesh,
            &material,
            &|_, _| Vector2::zeros(),
            &DirichletData::new(lin),
            &rule,
        )
        .expect("patch solve");
        let mut dev: f64 = 0.0;
        for v in 0..mesh.n_vertices() {
            let p = mesh.vertex(v);
            dev = dev.max((sol.vertex_displacement(v) - lin(p.x, p.y)).amax());
        }
        if dev > 1e-9 {
            fails.push(format!("patch test: vertex deviation {dev:.3e} > 1e-9"));
        }
        let grad = recover_gradient(&mesh, &sol.u).expect("gradient recovery");
        let stress = recover_stress(&mesh, &sol, &rule).expect("stress recovery");
        let (eta_u, eta_s) = estimators(&mesh, &sol, &grad, &stress, &rule).expect("estimators");
        if eta_u > 1e-9 {
            fails.push(format!("patch test: eta_u = {eta_u:.3e} > 1e-9"));
        }
        if eta_s > 1e-9 * YOUNG {
            fails.push(format!("patch test: eta_s = {eta_s:.3e} > 1e-9 * E"));
        }
    }

    // Shared irregular mesh for the projection and recovery properties.
    let mesh = example_mesh(1)
        .and_then(|m| m.refine_bisection())
        .and_then(|m| m.refine_bisection())
        .expect("recovery mesh");
    let exact = TrigSolution::new(&material);

    // (b) The element stress projection preserves weighted cell averages:
    // int_K (sigma - sigma_I) = 0 component-wise on every element.
    {
        let beta =
            project_sigma(&mesh, &material, &|x, y| exact.sigma(x, y), &rule).expect("projection");
        let mut sig_max: f64 = 0.0;
        let mut worst: f64 = 0.0;
        let mut deviations = Vec::with_capacity(mesh.n_elements());
        for (k, bk) in beta.iter().enumerate() {
            let geom = mesh.geometry(k);
            let mode = StressMode::new(geom).expect("modes");
            let mut m = [0.0; 3];
            for (xi, eta, w) in rule.iter() {
                let jw = w * geom.jacobian_det(xi, eta);
                let p = geom.map_ref_to_phys(xi, eta);
                let s = exact.sigma(p.x, p.y);
                sig_max = sig_max.max(s.amax());
                let d = s.as_vector() - mode.eval(xi, eta) * bk;
                for (mc, dc) in m.iter_mut().zip(d.iter()) {
                    *mc += jw * dc;
                }
            }
            deviations.push((geom.area(), m));
        }
        for (area, m) in deviations {
            for mc in m {
                worst = worst.max(mc.abs() / (area * sig_max));
            }
        }
        if worst > 1e-9 {
            fails.push(format!(
                "projection: cell-average defect {worst:.3e} * |K| * max|sigma| > 1e-9"
            ));
        }
    }

    // (c) Stress recovery depends on the projected stress only through its
    // cell averages, so recovering from the exact field's moments and from
    // the projection's moments gives the same vertex values.
    {
        let beta =
            project_sigma(&mesh, &material, &|x, y| exact.sigma(x, y), &rule).expect("projection");
        let mut m_exact = vec![[0.0; 3]; mesh.n_elements()];
        let mut m_proj = vec![[0.0; 3]; mesh.n_elements()];
        for (k, bk) in beta.iter().enumerate() {
            let geom = mesh.geometry(k);
            let mode = StressMode::new(geom).expect("modes");
            for (xi, eta, w) in rule.iter() {
                let jw = w * geom.jacobian_det(xi, eta);
                let p = geom.map_ref_to_phys(xi, eta);
                let se = exact.sigma(p.x, p.y).as_vector();
                let sp = mode.eval(xi, eta) * bk;
                for c in 0..3 {
                    m_exact[k][c] += jw * se[c];
                    m_proj[k][c] += jw * sp[c];
                }
            }
        }
        let r_exact = recover_stress_from_cell_moments(&mesh, &m_exact).expect("recovery");
        let r_proj = recover_stress_from_cell_moments(&mesh, &m_proj).expect("recovery");
        let mut scale: f64 = 1.0;
        for v in 0..mesh.n_vertices() {
            for c in 0..3 {
                scale = scale.max(r_exact.vertex_value(v)[c].abs());
            }
        }
        let mut worst: f64 = 0.0;
        for v in 0..mesh.n_vertices() {
            for c in 0..3 {
                worst = worst.max((r_exact.vertex_value(v)[c] - r_proj.vertex_value(v)[c]).abs());
            }
        }
        if worst > 1e-10 * scale {
            fails.push(format!(
                "stress recovery: exact-moment and projected-moment fields differ by {worst:.3e} (scale {scale:.1})"
            ));
        }
    }

    // (d) 200 random convex quadrilaterals: the condensed stiffness has
    // rank exactly 5 and annihilates the three rigid body modes.
    {
        let mut rng = ChaCha8Rng::seed_from_u64(1945);
        for case in 0..200 {
            let geom = random_convex_quad(&mut rng);
            let em = element_matrices(&geom, &material, |_, _| Vector2::zeros(), &rule)
                .expect("element matrices");
            let ke = DMatrix::from_column_slice(8, 8, em.ke.as_slice());
            let sv = ke.singular_values();
            let smax = sv.iter().cloned().fold(0.0_f64, f64::max);
            let rank = sv.iter().filter(|&&s| s > 1e-10 * smax).count();
            if rank != 5 {
                fails.push(format!(
                    "random quad {case}: stiffness rank {rank}, expected 5"
                ));
                break;
            }
            let mut modes = [SVector::<f64, 8>::zeros(); 3];
            for i in 0..4 {
                let p = geom.map_ref_to_phys([-1.0, 1.0, 1.0, -1.0][i], [-1.0, -1.0, 1.0, 1.0][i]);
                modes[0][2 * i] = 1.0;
                modes[1][2 * i + 1] = 1.0;
                modes[2][2 * i] = -p.y;
                modes[2][2 * i + 1] = p.x;
            }
            let ke_scale = em.ke.amax();
            for (m, mode) in modes.iter().enumerate() {
                let r = (em.ke * mode).amax();
                if r > 1e-9 * ke_scale * mode.amax().max(1.0) {
                    fails.push(format!(
                        "random quad {case}: rigid mode {m} leaves residual {r:.3e}"
                    ));
                }
            }
        }
    }

    // (e) Polynomial preservation: gradient recovery reproduces quadratic
    // displacements exactly, stress recovery reproduces linear stress
    // fields exactly, at every vertex including the boundary.
    {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut quad_coeffs = [[0.0; 6]; 2];
        for comp in &mut quad_coeffs {
            for c in comp.iter_mut() {
                *c = rng.gen_range(-1.0..1.0);
            }
        }
        let q = |c: &[f64; 6], x: f64, y: f64| {
            c[0] + c[1] * x + c[2] * y + c[3] * x * x + c[4] * x * y + c[5] * y * y
        };
        let dq = |c: &[f64; 6], x: f64, y: f64| {
            (
                c[1] + 2.0 * c[3] * x + c[4] * y,
                c[2] + c[4] * x + 2.0 * c[5] * y,
            )
        };
        let u = interp_u(&mesh, &|x, y| {
            Vector2::new(q(&quad_coeffs[0], x, y), q(&quad_coeffs[1], x, y))
        });
        let grad = recover_gradient(&mesh, &u).expect("gradient recovery");
        let mut worst: f64 = 0.0;
        for v in 0..mesh.n_vertices() {
            let p = mesh.vertex(v);
            let g = grad.vertex_value(v);
            let (g1x, g1y) = dq(&quad_coeffs[0], p.x, p.y);
            let (g2x, g2y) = dq(&quad_coeffs[1], p.x, p.y);
            for (got, want) in g.iter().zip([g1x, g1y, g2x, g2y]) {
                worst = worst.max((got - want).abs());
            }
        }
        if worst > 1e-10 {
            fails.push(format!(
                "gradient recovery: quadratic field misfit {worst:.3e} > 1e-10"
            ));
        }

        let mut lin_coeffs = [[0.0; 3]; 3];
        for comp in &mut lin_coeffs {
            for c in comp.iter_mut() {
                *c = rng.gen_range(-1.0..1.0);
            }
        }
        let mut moments = vec![[0.0; 3]; mesh.n_elements()];
        for (k, m) in moments.iter_mut().enumerate() {
            let gm = cell_geometric_moments(mesh.geometry(k));
            for (mc, lc) in m.iter_mut().zip(&lin_coeffs) {
                *mc = lc[0] * gm[0] + lc[1] * gm[1] + lc[2] * gm[2];
            }
        }
        let rec = recover_stress_from_cell_moments(&mesh, &moments).expect("recovery");
        let mut worst: f64 = 0.0;
        for v in 0..mesh.n_vertices() {
            let p = mesh.vertex(v);
            for (c, lc) in lin_coeffs.iter().enumerate() {
                let want = lc[0] + lc[1] * p.x + lc[2] * p.y;
                worst = worst.max((rec.vertex_value(v)[c] - want).abs());
            }
        }
        if worst > 1e-10 {
            fails.push(format!(
                "stress recovery: linear field misfit {worst:.3e} > 1e-10"
            ));
        }
    }

    // (f) Tensor Gauss rules integrate xi^p eta^q exactly for p, q up to
    // 2n - 1 and miss degree 2n by a visible margin.
    {
        let exact_1d = |p: usize| {
            if p % 2 == 1 {
                0.0
            } else {
                2.0 / (p as f64 + 1.0)
            }
        };
        for n in 1..=5 {
            let rule = gauss_rule(n).expect("gauss rule");
            for p in 0..=(2 * n - 1) {
                for q in 0..=(2 * n - 1) {
                    let got: f64 = rule
                        .iter()
                        .map(|(xi, eta, w)| w * xi.powi(p as i32) * eta.powi(q as i32))
                        .sum();
                    let want = exact_1d(p) * exact_1d(q);
                    if (got - want).abs() > 1e-12 * (1.0 + want.abs()) {
                        fails.push(format!(
                            "gauss n={n}: xi^{p} eta^{q} integrates to {got:.3e}, want {want:.3e}"
                        ));
                    }
                }
            }
            let got: f64 = rule
                .iter()
                .map(|(xi, _, w)| w * xi.powi(2 * n as i32))
                .sum();
            let want = exact_1d(2 * n) * 2.0;
            if (got - want).abs() < 1e-6 {
                fails.push(format!(
                    "gauss n={n}: degree {p} is integrated exactly, rule claims too much",
                    p = 2 * n
                ));
            }
        }
    }

    report(
        5,
        "element and recovery properties (patch test, cell averages, moment identity, rank 5 + rigid modes on 200 quads, polynomial preservation, quadrature exactness)",
        &fails,
        "",
    );
}

#[test]
fn criterion_6_gradient_error_robust_in_the_incompressible_limit() {
    let runs = runs();
    let mut fails = Vec::new();
    let compressible = &runs.ex1[0].table.rows;
    let near_limit = &runs.ex1[2].table.rows;
    let mut worst: f64 = 0.0;
    for (a, b) in compressible.iter().zip(near_limit) {
        let ratio = b.e_u / a.e_u;
        worst = worst.max(ratio);
        if ratio > 1.1 {
            fails.push(format!(
                "example 1 level {} ({}): e_u grows by {ratio:.3} from nu=0.3 to nu=0.4999, limit 1.1",
                a.level, a.label
            ));
        }
    }
    report(
        6,
        "gradient error uniformly bounded in nu on example 1",
        &fails,
        &format!(" (worst ratio {worst:.3})"),
    );
}

/// Uniformly sampled strictly convex quadrilaterals admitting the stress
/// modes with a safe margin.
fn random_convex_quad(rng: &mut ChaCha8Rng) -> ElementGeometry {
    loop {
        let pts = [
            Point2::new(rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0)),
            Point2::new(rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0)),
            Point2::new(rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0)),
            Point2::new(rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0)),
        ];
        if let Ok(g) = ElementGeometry::new(&pts, 0) {
            if StressMode::new(&g).is_ok()
                && g.a()[1].abs() > 0.05 * g.h_k()
                && g.b()[2].abs() > 0.05 * g.h_k()
            {
                return g;
            }
        }
    }
}

/// The shared ladders do not depend on thread interleaving: running one
/// ladder twice yields byte-identical CSV.
#[test]
fn ladder_output_is_deterministic() {
    let rule = gauss_rule(GAUSS_N).expect("gauss rule");
    let material = Material::new(YOUNG, 0.49).expect("material");
    let problem = ManufacturedProblem::example(1, material).expect("problem");
    let a = run_ladder(&problem, 2, &rule).expect("ladder");
    let b = run_ladder(&problem, 2, &rule).expect("ladder");
    assert_eq!(a.to_csv(), b.to_csv());
}
