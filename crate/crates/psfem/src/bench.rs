//! Benchmark problems, refinement ladders and convergence tables.
//!
//! Two manufactured plane-strain problems share one trigonometric
//! displacement field: Example 1 on the unit square with a 2x2 irregular
//! initial mesh, Example 2 on the slender rectangle [0,10] x [-1,1] with a
//! 5x1 irregular strip mesh. A ladder bisects the initial mesh twice, then
//! once more per level, solving the problem and collecting relative errors,
//! superconvergent distances and recovery estimators into a table with
//! fitted convergence orders.

use nalgebra::{Matrix2, Point2, Vector2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::f64::consts::PI;
use std::fmt;

use crate::fields::{error_report, ExactSolution};
use crate::material::{Material, SymTensor2};
use crate::mesh::{ladder_alpha_fit, quality_report, MeshQualityReport, QuadMesh};
use crate::quadrature::GaussRule;
use crate::recovery::{estimators, recover_gradient, recover_stress};
use crate::solver::{solve, DirichletData};
use crate::{Error, Result};

/// The manufactured displacement shared by both examples:
///
/// ```text
/// u1 =  (1+nu) cos(pi x) sin(pi y) - 2 (1-nu^2) x y
/// u2 = -(1+nu) sin(pi x) cos(pi y) + (1-nu^2) x^2 + nu (1+nu) (y^2 - 1)
/// ```
///
/// Its plane-strain stress is `sigma = (E (-pi S - 2y), E pi S, 0)` with
/// `S = sin(pi x) sin(pi y)`, and the balancing body force is
/// `f = E pi^2 (cos(pi x) sin(pi y), -sin(pi x) cos(pi y))`.
#[derive(Debug, Clone, Copy)]
pub struct TrigSolution {
    e: f64,
    nu: f64,
}

impl TrigSolution {
    pub fn new(material: &Material) -> Self {
        Self {
            e: material.young(),
            nu: material.poisson(),
        }
    }
}

impl ExactSolution for TrigSolution {
    fn u(&self, x: f64, y: f64) -> Vector2<f64> {
        let nu = self.nu;
        let c1 = 1.0 + nu;
        let c2 = 1.0 - nu * nu;
        Vector2::new(
            c1 * (PI * x).cos() * (PI * y).sin() - 2.0 * c2 * x * y,
            -c1 * (PI * x).sin() * (PI * y).cos() + c2 * x * x + nu * c1 * (y * y - 1.0),
        )
    }

    fn grad_u(&self, x: f64, y: f64) -> Matrix2<f64> {
        let nu = self.nu;
        let c1 = 1.0 + nu;
        let c2 = 1.0 - nu * nu;
        let (sx, cx) = (PI * x).sin_cos();
        let (sy, cy) = (PI * y).sin_cos();
        Matrix2::new(
            -PI * c1 * sx * sy - 2.0 * c2 * y,
            PI * c1 * cx * cy - 2.0 * c2 * x,
            -PI * c1 * cx * cy + 2.0 * c2 * x,
            PI * c1 * sx * sy + 2.0 * nu * c1 * y,
        )
    }

    fn sigma(&self, x: f64, y: f64) -> SymTensor2 {
        let s = (PI * x).sin() * (PI * y).sin();
        SymTensor2::new(self.e * (-PI * s - 2.0 * y), self.e * PI * s, 0.0)
    }

    fn body_force(&self, x: f64, y: f64) -> Vector2<f64> {
        let k = self.e * PI * PI;
        Vector2::new(
            k * (PI * x).cos() * (PI * y).sin(),
            -k * (PI * x).sin() * (PI * y).cos(),
        )
    }
}

/// Initial mesh of one of the two examples.
///
/// Example 1: the unit square cut into a 2x2 irregular mesh (corner
/// vertices, one off-center node per edge, interior node at (0.5, 0.5)).
/// Example 2: [0,10] x [-1,1] cut into 5 skewed strips; bottom nodes at
/// x in {0,1,2,4,7,10}, top nodes at x in {0,2,4,5,6,10}.
pub fn example_mesh(which: usize) -> Result<QuadMesh> {
    match which {
        1 => QuadMesh::new(
            vec![
                Point2::new(0.0, 0.0),
                Point2::new(0.4, 0.0),
                Point2::new(1.0, 0.0),
                Point2::new(1.0, 0.6),
                Point2::new(1.0, 1.0),
                Point2::new(0.3, 1.0),
                Point2::new(0.0, 1.0),
                Point2::new(0.0, 0.3),
                Point2::new(0.5, 0.5),
            ],
            vec![[0, 1, 8, 7], [1, 2, 3, 8], [8, 3, 4, 5], [7, 8, 5, 6]],
        ),
        2 => {
            let bottom = [0.0, 1.0, 2.0, 4.0, 7.0, 10.0];
            let top = [0.0, 2.0, 4.0, 5.0, 6.0, 10.0];
            let mut vertices = Vec::with_capacity(12);
            vertices.extend(bottom.iter().map(|&x| Point2::new(x, -1.0)));
            vertices.extend(top.iter().map(|&x| Point2::new(x, 1.0)));
            let quads = (0..5).map(|j| [j, j + 1, 7 + j, 6 + j]).collect();
            QuadMesh::new(vertices, quads)
        }
        _ => Err(Error::InvalidArgument(format!(
            "example {which} does not exist (use 1 or 2)"
        ))),
    }
}

/// A manufactured boundary value problem on one of the example geometries.
pub struct ManufacturedProblem {
    /// Short name, e.g. "example-1".
    pub name: String,
    /// Axis-aligned domain rectangle (lower-left, upper-right).
    pub domain: (Point2<f64>, Point2<f64>),
    /// Cell counts of the initial mesh, used for the mesh labels.
    pub initial_cells: (usize, usize),
    pub initial_mesh: QuadMesh,
    pub material: Material,
    pub exact: TrigSolution,
}

impl ManufacturedProblem {
    /// Builds example `which` (1 or 2) for the given material.
    pub fn example(which: usize, material: Material) -> Result<Self> {
        let initial_mesh = example_mesh(which)?;
        let (domain, initial_cells) = match which {
            1 => ((Point2::new(0.0, 0.0), Point2::new(1.0, 1.0)), (2, 2)),
            _ => ((Point2::new(0.0, -1.0), Point2::new(10.0, 1.0)), (5, 1)),
        };
        Ok(Self {
            name: format!("example-{which}"),
            domain,
            initial_cells,
            initial_mesh,
            material,
            exact: TrigSolution::new(&material),
        })
    }

    /// Verifies the mutual consistency of the manufactured fields at
    /// `n_points` quasi-random interior points:
    /// the analytic gradient against central differences of `u`, the stress
    /// against the material law applied to the analytic strain, and the body
    /// force against central differences of the stress. All relative to the
    /// local field scale, within 1e-6.
    pub fn self_check(&self, n_points: usize) -> Result<()> {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let (lo, hi) = self.domain;
        let d = 1e-5;
        let tol = 1e-6;
        let ex = &self.exact;
        let mat = &self.material;
        for _ in 0..n_points {
            let x = rng.gen_range(lo.x + 10.0 * d..hi.x - 10.0 * d);
            let y = rng.gen_range(lo.y + 10.0 * d..hi.y - 10.0 * d);

            // Analytic gradient vs central differences of u.
            let g = ex.grad_u(x, y);
            let fd_x = (ex.u(x + d, y) - ex.u(x - d, y)) / (2.0 * d);
            let fd_y = (ex.u(x, y + d) - ex.u(x, y - d)) / (2.0 * d);
            let fd = Matrix2::new(fd_x.x, fd_y.x, fd_x.y, fd_y.y);
            let scale = g.amax().max(1.0);
            if (g - fd).amax() > tol * scale {
                return Err(Error::SelfCheck(format!(
                    "gradient mismatch {} at ({x:.4}, {y:.4})",
                    (g - fd).amax()
                )));
            }

            // Stress vs the material law on the analytic strain.
            let eps = SymTensor2::new(g[(0, 0)], g[(1, 1)], 0.5 * (g[(0, 1)] + g[(1, 0)]));
            let s_law = mat.stiffness_apply(eps);
            let s = ex.sigma(x, y);
            let s_scale = s.amax().max(mat.young());
            if (s - s_law).amax() > tol * s_scale {
                return Err(Error::SelfCheck(format!(
                    "stress mismatch {} at ({x:.4}, {y:.4})",
                    (s - s_law).amax()
                )));
            }

            // Body force vs -div sigma by central differences of sigma.
            let dsx = (ex.sigma(x + d, y) - ex.sigma(x - d, y)) * (1.0 / (2.0 * d));
            let dsy = (ex.sigma(x, y + d) - ex.sigma(x, y - d)) * (1.0 / (2.0 * d));
            let div = Vector2::new(dsx.xx + dsy.xy, dsx.xy + dsy.yy);
            let f = ex.body_force(x, y);
            let f_scale = f.amax().max(mat.young());
            if (f + div).amax() > tol * f_scale {
                return Err(Error::SelfCheck(format!(
                    "body force mismatch {} at ({x:.4}, {y:.4})",
                    (f + div).amax()
                )));
            }
        }
        Ok(())
    }
}

/// One ladder level: mesh label plus the six relative error quantities.
/// All values are normalized by the exact-solution norms (`|u|_1` for the
/// three gradient columns, `||sigma||` for the three stress columns).
/// `theta_s` and `e_s` are the discounted stress distances of
/// [`crate::fields::ErrorReport`] (deviatoric and mean-trace-free), which
/// keep those columns comparable across Poisson ratios; `eta_s` is the
/// plain norm of the recovery difference.
#[derive(Debug, Clone, Serialize)]
pub struct TableRow {
    pub level: usize,
    pub label: String,
    pub h_max: f64,
    pub theta_u: f64,
    pub e_u: f64,
    pub eta_u: f64,
    pub theta_s: f64,
    pub e_s: f64,
    pub eta_s: f64,
}

impl TableRow {
    /// The six error columns in CSV order.
    pub fn columns(&self) -> [f64; 6] {
        [
            self.theta_u,
            self.e_u,
            self.eta_u,
            self.theta_s,
            self.e_s,
            self.eta_s,
        ]
    }
}

/// Convergence orders of the six error columns.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ColumnOrders {
    pub theta_u: f64,
    pub e_u: f64,
    pub eta_u: f64,
    pub theta_s: f64,
    pub e_s: f64,
    pub eta_s: f64,
}

impl ColumnOrders {
    fn from_array(a: [f64; 6]) -> Self {
        Self {
            theta_u: a[0],
            e_u: a[1],
            eta_u: a[2],
            theta_s: a[3],
            e_s: a[4],
            eta_s: a[5],
        }
    }

    pub fn as_array(&self) -> [f64; 6] {
        [
            self.theta_u,
            self.e_u,
            self.eta_u,
            self.theta_s,
            self.e_s,
            self.eta_s,
        ]
    }
}

/// Run metadata carried into the JSON output.
#[derive(Debug, Clone, Serialize)]
pub struct TableMeta {
    pub problem: String,
    pub nu: f64,
    pub young: f64,
    pub gauss_n: usize,
    pub levels: usize,
}

/// A convergence study: rows ordered by decreasing `h_max`, plus two order
/// estimates per column and a mesh quality report per level. The quality
/// report's distortion decay rate is fitted over all meshes generated so
/// far, including the initial and pre-refinement meshes.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceTable {
    pub meta: TableMeta,
    pub rows: Vec<TableRow>,
    /// Least-squares slope of log(error) against log(1/h) over all levels.
    pub regression_order: ColumnOrders,
    /// log2 of the last two values' ratio.
    pub ratio_order: ColumnOrders,
    pub quality: Vec<MeshQualityReport>,
}

/// Runs a refinement ladder: two bisections ahead of the first row, one more
/// per level. Requires `levels >= 2`.
pub fn run_ladder(
    problem: &ManufacturedProblem,
    levels: usize,
    rule: &GaussRule,
) -> Result<ConvergenceTable> {
    if levels < 2 {
        return Err(Error::InvalidArgument(format!(
            "a ladder needs at least 2 levels, got {levels}"
        )));
    }
    let exact = &problem.exact;
    let body = |x: f64, y: f64| exact.body_force(x, y);
    let trace = DirichletData::new(|x: f64, y: f64| {
        let u = exact.u(x, y);
        Vector2::new(u.x, u.y)
    });

    let mut meshes = vec![problem.initial_mesh.clone()];
    for _ in 0..2 {
        let next = meshes.last().unwrap().refine_bisection()?;
        meshes.push(next);
    }

    let mut rows = Vec::with_capacity(levels);
    let mut quality = Vec::with_capacity(levels);
    for level in 0..levels {
        if level > 0 {
            let next = meshes.last().unwrap().refine_bisection()?;
            meshes.push(next);
        }
        let mesh = meshes.last().unwrap();

        let sol = solve(mesh, &problem.material, &body, &trace, rule)?;
        let report = error_report(mesh, &sol, exact, rule)?;
        let grad = recover_gradient(mesh, &sol.u)?;
        let stress = recover_stress(mesh, &sol, rule)?;
        let (eta_u, eta_s) = estimators(mesh, &sol, &grad, &stress, rule)?;

        let factor = 1 << (level + 2);
        rows.push(TableRow {
            level,
            label: format!(
                "{}x{}",
                problem.initial_cells.0 * factor,
                problem.initial_cells.1 * factor
            ),
            h_max: mesh.h_max(),
            theta_u: report.rel_theta_u,
            e_u: report.rel_e_u,
            eta_u: eta_u / report.norm_u,
            theta_s: report.rel_theta_sigma,
            e_s: report.rel_e_sigma,
            eta_s: eta_s / report.norm_sigma,
        });

        let mut q = quality_report(mesh);
        q.alpha_fit = ladder_alpha_fit(&meshes);
        quality.push(q);
    }

    let regression_order = ColumnOrders::from_array(regression_orders(&rows));
    let ratio_order = ColumnOrders::from_array(ratio_orders(&rows));
    Ok(ConvergenceTable {
        meta: TableMeta {
            problem: problem.name.clone(),
            nu: problem.material.poisson(),
            young: problem.material.young(),
            gauss_n: rule.order(),
            levels,
        },
        rows,
        regression_order,
        ratio_order,
        quality,
    })
}

/// Least-squares slope of `log2(value)` against the level index per
/// column. Each level nominally halves the mesh size, so the level index
/// is the abscissa; this matches the last-ratio order's `log2` convention
/// (bisection shrinks the worst element diameter slightly slower than 2x
/// on irregular meshes, so regressing on measured h_max would overstate
/// the order).
pub fn regression_orders(rows: &[TableRow]) -> [f64; 6] {
    let mut out = [f64::NAN; 6];
    for (c, order) in out.iter_mut().enumerate() {
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .enumerate()
            .filter(|(_, r)| r.columns()[c] > 0.0)
            .map(|(i, r)| (i as f64, r.columns()[c].log2()))
            .collect();
        *order = -regression_slope(&pts);
    }
    out
}

/// log2 ratio of the last two values per column.
pub fn ratio_orders(rows: &[TableRow]) -> [f64; 6] {
    let mut out = [f64::NAN; 6];
    if rows.len() < 2 {
        return out;
    }
    let a = rows[rows.len() - 2].columns();
    let b = rows[rows.len() - 1].columns();
    for c in 0..6 {
        out[c] = (a[c] / b[c]).log2();
    }
    out
}

/// Slope of the least-squares line through `(x, y)` points.
fn regression_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

impl ConvergenceTable {
    /// Deterministic CSV: one row per level with shortest round-trip
    /// numbers, then two order rows marked in the level column.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("level,label,h_max,theta_u,e_u,eta_u,theta_s,e_s,eta_s\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.level, r.label, r.h_max, r.theta_u, r.e_u, r.eta_u, r.theta_s, r.e_s, r.eta_s
            ));
        }
        for (marker, orders) in [
            ("order_regression", &self.regression_order),
            ("order_ratio", &self.ratio_order),
        ] {
            let o = orders.as_array();
            out.push_str(&format!(
                "{},,,{},{},{},{},{},{}\n",
                marker, o[0], o[1], o[2], o[3], o[4], o[5]
            ));
        }
        out
    }

    /// Full report as pretty JSON, mirroring the CSV plus metadata and the
    /// per-level mesh quality reports.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes") + "\n"
    }
}

impl fmt::Display for ConvergenceTable {
    /// Human-readable table with 4-decimal values.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{} (nu = {}, E = {}, gauss n = {})",
            self.meta.problem, self.meta.nu, self.meta.young, self.meta.gauss_n
        )?;
        writeln!(
            f,
            "{:>12} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9}",
            "mesh", "h_max", "theta_u", "e_u", "eta_u", "theta_s", "e_s", "eta_s"
        )?;
        for r in &self.rows {
            writeln!(
                f,
                "{:>12} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>9.4}",
                r.label, r.h_max, r.theta_u, r.e_u, r.eta_u, r.theta_s, r.e_s, r.eta_s
            )?;
        }
        for (marker, orders) in [
            ("order(fit)", &self.regression_order),
            ("order(ratio)", &self.ratio_order),
        ] {
            let o = orders.as_array();
            writeln!(
                f,
                "{:>12} {:>9} {:>9.2} {:>9.2} {:>9.2} {:>9.2} {:>9.2} {:>9.2}",
                marker, "", o[0], o[1], o[2], o[3], o[4], o[5]
            )?;
        }
        Ok(())
    }
}
