//! Polynomial-preserving recovery of gradients and stresses, and the
//! recovery-type a posteriori error estimators built from them.
//!
//! Both recovery operators produce a continuous bilinear field from vertex
//! values. Gradients are recovered by fitting one quadratic per displacement
//! component over the vertex patch in scaled local coordinates and taking its
//! gradient at the patch center. Stresses are recovered from cell averages: a
//! linear function is fitted per component so that its exact cell moments
//! match those of the discrete stress over the patch. Boundary vertices take
//! the average of the fits of their interior ring neighbors, evaluated at the
//! boundary vertex itself, so polynomial exactness extends to the boundary.
//!
//! The estimators integrate the distance between the recovered field and the
//! raw element field; gradients in the plain Frobenius norm, stresses in the
//! shear-doubled tensor norm.

use nalgebra::{DVector, Matrix3, Point2, SMatrix, SVector, Vector2, Vector3};

use crate::fields::{element_dofs, element_gradient};
use crate::material::SymTensor2;
use crate::mesh::{bilinear_shape, ElementGeometry, QuadMesh};
use crate::ps_element::StressMode;
use crate::quadrature::GaussRule;
use crate::solver::HybridSolution;
use crate::{Error, Result};

/// Largest admissible spectral condition number of a patch normal matrix.
const PATCH_COND_LIMIT: f64 = 1e12;

/// The one-ring vertex patch around a mesh vertex.
#[derive(Debug, Clone)]
pub struct VertexPatch {
    /// The patch center vertex.
    pub center: usize,
    /// Elements incident to the center, ascending.
    pub elements: Vec<usize>,
    /// All vertices of those elements, ascending and deduplicated.
    pub nodes: Vec<usize>,
    /// Longest element edge in the patch; the fit length scale.
    pub h: f64,
}

impl VertexPatch {
    /// One-ring patch of `vertex`.
    pub fn build(mesh: &QuadMesh, vertex: usize) -> VertexPatch {
        Self::from_elements(mesh, vertex, mesh.patch(vertex).to_vec())
    }

    /// Grows the patch by the one-rings of all its nodes.
    pub fn enlarged(&self, mesh: &QuadMesh) -> VertexPatch {
        let mut elements: Vec<usize> = self
            .nodes
            .iter()
            .flat_map(|&v| mesh.patch(v).iter().copied())
            .collect();
        elements.sort_unstable();
        elements.dedup();
        Self::from_elements(mesh, self.center, elements)
    }

    fn from_elements(mesh: &QuadMesh, center: usize, elements: Vec<usize>) -> VertexPatch {
        let mut nodes: Vec<usize> = elements
            .iter()
            .flat_map(|&k| mesh.quad(k).into_iter())
            .collect();
        nodes.sort_unstable();
        nodes.dedup();
        let mut h: f64 = 0.0;
        for &k in &elements {
            let q = mesh.quad(k);
            for i in 0..4 {
                let e = mesh.vertex(q[(i + 1) % 4]) - mesh.vertex(q[i]);
                h = h.max(e.norm());
            }
        }
        VertexPatch {
            center,
            elements,
            nodes,
            h,
        }
    }
}

/// A quadratic `c1 + c2 x^ + c3 y^ + c4 x^2 + c5 x^ y^ + c6 y^2` in local
/// coordinates `x^ = (x - xc) / h`, fitted over a vertex patch.
#[derive(Debug, Clone, Copy)]
pub struct QuadraticFit {
    center: Point2<f64>,
    h: f64,
    c: SVector<f64, 6>,
}

impl QuadraticFit {
    /// Physical gradient of the fitted quadratic at `p`.
    pub fn gradient_at(&self, p: Point2<f64>) -> Vector2<f64> {
        let xh = (p.x - self.center.x) / self.h;
        let yh = (p.y - self.center.y) / self.h;
        Vector2::new(
            (self.c[1] + 2.0 * self.c[3] * xh + self.c[4] * yh) / self.h,
            (self.c[2] + self.c[4] * xh + 2.0 * self.c[5] * yh) / self.h,
        )
    }
}

/// Least-squares quadratic fits over the patch nodes, one per scalar field.
/// All fields share the same normal matrix factorization.
fn fit_patch_quadratics(
    mesh: &QuadMesh,
    patch: &VertexPatch,
    fields: &[&dyn Fn(usize) -> f64],
) -> Result<Vec<QuadraticFit>> {
    let n = patch.nodes.len();
    if n < 6 {
        return Err(Error::DeficientPatch {
            vertex: patch.center,
            what: "patch nodes for a quadratic fit",
            got: n,
            need: 6,
        });
    }
    let center = mesh.vertex(patch.center);
    let h = patch.h;
    let row = |v: usize| -> SVector<f64, 6> {
        let p = mesh.vertex(v);
        let x = (p.x - center.x) / h;
        let y = (p.y - center.y) / h;
        SVector::<f64, 6>::from_column_slice(&[1.0, x, y, x * x, x * y, y * y])
    };

    let mut normal = SMatrix::<f64, 6, 6>::zeros();
    for &v in &patch.nodes {
        let r = row(v);
        normal += r * r.transpose();
    }
    check_patch_conditioning(patch.center, &normal)?;
    let chol = normal.cholesky().ok_or(Error::SingularPatchFit {
        vertex: patch.center,
        cond: f64::INFINITY,
    })?;

    let fits = fields
        .iter()
        .map(|field| {
            let mut rhs = SVector::<f64, 6>::zeros();
            for &v in &patch.nodes {
                rhs += row(v) * field(v);
            }
            QuadraticFit {
                center,
                h,
                c: chol.solve(&rhs),
            }
        })
        .collect();
    Ok(fits)
}

/// Rejects normal matrices whose spectral condition number exceeds the limit.
fn check_patch_conditioning<const N: usize>(
    vertex: usize,
    normal: &SMatrix<f64, N, N>,
) -> Result<()> {
    let eig =
        nalgebra::DMatrix::from_iterator(N, N, normal.iter().copied()).symmetric_eigenvalues();
    let max = eig.amax();
    let min = eig.min();
    if min <= 0.0 || max / min > PATCH_COND_LIMIT {
        return Err(Error::SingularPatchFit {
            vertex,
            cond: if min > 0.0 { max / min } else { f64::INFINITY },
        });
    }
    Ok(())
}

/// Fits with a one-ring enlargement retry when the patch is deficient or the
/// normal matrix is too ill-conditioned.
fn vertex_quadratic_fits(
    mesh: &QuadMesh,
    vertex: usize,
    fields: &[&dyn Fn(usize) -> f64],
) -> Result<Vec<QuadraticFit>> {
    let patch = VertexPatch::build(mesh, vertex);
    fit_patch_quadratics(mesh, &patch, fields)
        .or_else(|_| fit_patch_quadratics(mesh, &patch.enlarged(mesh), fields))
}

/// Gradient of one scalar nodal field at a patch center, with enlargement
/// fallback. `values` holds one value per mesh vertex.
pub fn ppr_vertex_gradient(
    mesh: &QuadMesh,
    patch: &VertexPatch,
    values: &[f64],
) -> Result<Vector2<f64>> {
    let field = |v: usize| values[v];
    let fits = fit_patch_quadratics(mesh, patch, &[&field])
        .or_else(|_| fit_patch_quadratics(mesh, &patch.enlarged(mesh), &[&field]))?;
    Ok(fits[0].gradient_at(mesh.vertex(patch.center)))
}

/// A continuous bilinear field with `K` components, defined by vertex values.
#[derive(Debug, Clone)]
pub struct RecoveredField<const K: usize> {
    values: Vec<[f64; K]>,
}

impl<const K: usize> RecoveredField<K> {
    pub fn vertex_value(&self, v: usize) -> [f64; K] {
        self.values[v]
    }

    /// Bilinear interpolation on element `k` at reference point (xi, eta).
    pub fn eval(&self, mesh: &QuadMesh, k: usize, xi: f64, eta: f64) -> [f64; K] {
        let shape = bilinear_shape(xi, eta);
        let quad = mesh.quad(k);
        let mut out = [0.0; K];
        for (i, &v) in quad.iter().enumerate() {
            for (o, val) in out.iter_mut().zip(self.values[v]) {
                *o += shape[i] * val;
            }
        }
        out
    }
}

/// Interior vertices sharing an element with `v`, ascending.
fn interior_ring_neighbors(mesh: &QuadMesh, v: usize) -> Vec<usize> {
    let mut out: Vec<usize> = mesh
        .patch(v)
        .iter()
        .flat_map(|&k| mesh.quad(k).into_iter())
        .filter(|&w| !mesh.is_boundary_vertex(w))
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Recovers the displacement gradient field (4 components: du1/dx, du1/dy,
/// du2/dx, du2/dy) from interleaved nodal displacements.
pub fn recover_gradient(mesh: &QuadMesh, u: &DVector<f64>) -> Result<RecoveredField<4>> {
    let n = mesh.n_vertices();
    let u1 = |v: usize| u[2 * v];
    let u2 = |v: usize| u[2 * v + 1];
    let fields: [&dyn Fn(usize) -> f64; 2] = [&u1, &u2];

    let mut fits: Vec<Option<[QuadraticFit; 2]>> = vec![None; n];
    let mut values = vec![[0.0; 4]; n];
    for v in mesh.interior_vertices() {
        let fs = vertex_quadratic_fits(mesh, v, &fields)?;
        let p = mesh.vertex(v);
        values[v] = gradient_pair(&fs[0], &fs[1], p);
        fits[v] = Some([fs[0], fs[1]]);
    }
    for v in mesh.boundary_vertices() {
        let ring = interior_ring_neighbors(mesh, v);
        if ring.is_empty() {
            return Err(Error::DeficientPatch {
                vertex: v,
                what: "interior neighbors for boundary recovery",
                got: 0,
                need: 1,
            });
        }
        let p = mesh.vertex(v);
        let mut acc = [0.0; 4];
        for &w in &ring {
            let [f1, f2] = fits[w].as_ref().expect("interior vertex was fitted");
            let g = gradient_pair(f1, f2, p);
            for c in 0..4 {
                acc[c] += g[c];
            }
        }
        for c in 0..4 {
            values[v][c] = acc[c] / ring.len() as f64;
        }
    }
    Ok(RecoveredField { values })
}

fn gradient_pair(f1: &QuadraticFit, f2: &QuadraticFit, p: Point2<f64>) -> [f64; 4] {
    let g1 = f1.gradient_at(p);
    let g2 = f2.gradient_at(p);
    [g1.x, g1.y, g2.x, g2.y]
}

/// A linear function `a1 + a2 (x - xc) + a3 (y - yc)` fitted so that its
/// exact cell integrals track prescribed cell moments over a patch.
#[derive(Debug, Clone, Copy)]
pub struct LinearFit {
    center: Point2<f64>,
    alpha: Vector3<f64>,
}

impl LinearFit {
    pub fn eval(&self, p: Point2<f64>) -> f64 {
        self.alpha[0]
            + self.alpha[1] * (p.x - self.center.x)
            + self.alpha[2] * (p.y - self.center.y)
    }

    pub fn gradient(&self) -> Vector2<f64> {
        Vector2::new(self.alpha[1], self.alpha[2])
    }
}

/// Exact integrals of 1, x, y over an element, from the bilinear geometry:
/// with `J = J0 + J1 xi + J2 eta`,
///
/// ```text
/// int 1 = 4 J0
/// int x = 4 (a0 J0 + (a1 J1 + a2 J2) / 3)
/// int y = 4 (b0 J0 + (b1 J1 + b2 J2) / 3)
/// ```
pub fn cell_geometric_moments(geom: &ElementGeometry) -> [f64; 3] {
    let a = geom.a();
    let b = geom.b();
    let j = geom.j_coeffs();
    [
        4.0 * j[0],
        4.0 * (a[0] * j[0] + (a[1] * j[1] + a[2] * j[2]) / 3.0),
        4.0 * (b[0] * j[0] + (b[1] * j[1] + b[2] * j[2]) / 3.0),
    ]
}

/// Weighted least-squares linear fits per component from per-element moments
/// `moments[j][c] = int_{K_j} psi_c`, sharing one normal matrix. The fit
/// minimizes the moment mismatch over the patch elements in centered
/// coordinates, which leaves the minimizer unchanged but keeps the normal
/// matrix well conditioned.
fn fit_patch_linears<const C: usize>(
    mesh: &QuadMesh,
    patch: &VertexPatch,
    moments: &dyn Fn(usize) -> [f64; C],
) -> Result<Vec<LinearFit>> {
    let n = patch.elements.len();
    if n < 3 {
        return Err(Error::DeficientPatch {
            vertex: patch.center,
            what: "patch elements for a linear moment fit",
            got: n,
            need: 3,
        });
    }
    let center = mesh.vertex(patch.center);
    let mut normal = Matrix3::<f64>::zeros();
    let mut rhs = SMatrix::<f64, 3, C>::zeros();
    for &k in &patch.elements {
        let m = cell_geometric_moments(mesh.geometry(k));
        let row = Vector3::new(m[0], m[1] - center.x * m[0], m[2] - center.y * m[0]);
        normal += row * row.transpose();
        let b = moments(k);
        for c in 0..C {
            for r in 0..3 {
                rhs[(r, c)] += row[r] * b[c];
            }
        }
    }
    check_patch_conditioning(patch.center, &normal)?;
    let chol = normal.cholesky().ok_or(Error::SingularPatchFit {
        vertex: patch.center,
        cond: f64::INFINITY,
    })?;
    let alpha = chol.solve(&rhs);
    Ok((0..C)
        .map(|c| LinearFit {
            center,
            alpha: alpha.column(c).into(),
        })
        .collect())
}

/// Linear moment fit of one scalar field over a patch; `cell_moments[j]`
/// holds the integral of the field over `patch.elements[j]`.
pub fn rh_vertex_fit(
    mesh: &QuadMesh,
    patch: &VertexPatch,
    cell_moments: &[f64],
) -> Result<LinearFit> {
    assert_eq!(
        cell_moments.len(),
        patch.elements.len(),
        "one moment per patch element"
    );
    let lookup = |k: usize| -> [f64; 1] {
        let j = patch.elements.iter().position(|&e| e == k).unwrap();
        [cell_moments[j]]
    };
    Ok(fit_patch_linears(mesh, patch, &lookup)?.remove(0))
}

/// Recovers a continuous stress field from per-element stress moments
/// `moments[k][c] = int_K sigma_c`.
pub fn recover_stress_from_cell_moments(
    mesh: &QuadMesh,
    moments: &[[f64; 3]],
) -> Result<RecoveredField<3>> {
    assert_eq!(moments.len(), mesh.n_elements(), "one moment per element");
    let n = mesh.n_vertices();
    let mut fits: Vec<Option<[LinearFit; 3]>> = vec![None; n];
    let mut values = vec![[0.0; 3]; n];
    let lookup = |k: usize| moments[k];
    for v in mesh.interior_vertices() {
        let patch = VertexPatch::build(mesh, v);
        let fs = fit_patch_linears(mesh, &patch, &lookup)?;
        for c in 0..3 {
            values[v][c] = fs[c].eval(mesh.vertex(v));
        }
        fits[v] = Some([fs[0], fs[1], fs[2]]);
    }
    for v in mesh.boundary_vertices() {
        let ring = interior_ring_neighbors(mesh, v);
        if ring.is_empty() {
            return Err(Error::DeficientPatch {
                vertex: v,
                what: "interior neighbors for boundary recovery",
                got: 0,
                need: 1,
            });
        }
        let p = mesh.vertex(v);
        for &w in &ring {
            let fs = fits[w].as_ref().expect("interior vertex was fitted");
            for (val, f) in values[v].iter_mut().zip(fs) {
                *val += f.eval(p);
            }
        }
        for val in &mut values[v] {
            *val /= ring.len() as f64;
        }
    }
    Ok(RecoveredField { values })
}

/// Recovers the stress field of a discrete solution from its element stress
/// moments, computed with `rule`.
pub fn recover_stress(
    mesh: &QuadMesh,
    solution: &HybridSolution,
    rule: &GaussRule,
) -> Result<RecoveredField<3>> {
    let moments = solution_stress_moments(mesh, solution, rule)?;
    recover_stress_from_cell_moments(mesh, &moments)
}

/// Per-element integrals of the three discrete stress components.
pub fn solution_stress_moments(
    mesh: &QuadMesh,
    solution: &HybridSolution,
    rule: &GaussRule,
) -> Result<Vec<[f64; 3]>> {
    (0..mesh.n_elements())
        .map(|k| {
            let geom = mesh.geometry(k);
            let mode = StressMode::new(geom)?;
            let mut m = [0.0; 3];
            for (xi, eta, w) in rule.iter() {
                let jw = w * geom.jacobian_det(xi, eta);
                let s = mode.eval(xi, eta) * solution.beta[k];
                for c in 0..3 {
                    m[c] += jw * s[c];
                }
            }
            Ok(m)
        })
        .collect()
}

/// Recovery-type error estimators: the integrated distance between the
/// recovered fields and the raw element fields,
/// `eta_u = ||G u_h - grad u_h||` and `eta_sigma = ||R sigma_h - sigma_h||`.
pub fn estimators(
    mesh: &QuadMesh,
    solution: &HybridSolution,
    gradient: &RecoveredField<4>,
    stress: &RecoveredField<3>,
    rule: &GaussRule,
) -> Result<(f64, f64)> {
    let mut eta_u = 0.0;
    let mut eta_s = 0.0;
    for k in 0..mesh.n_elements() {
        let geom = mesh.geometry(k);
        let mode = StressMode::new(geom)?;
        let ue = element_dofs(mesh, k, &solution.u);
        for (xi, eta, w) in rule.iter() {
            let jw = w * geom.jacobian_det(xi, eta);
            let g_rec = gradient.eval(mesh, k, xi, eta);
            let g_h = element_gradient(geom, &ue, xi, eta);
            eta_u += jw
                * ((g_rec[0] - g_h[(0, 0)]).powi(2)
                    + (g_rec[1] - g_h[(0, 1)]).powi(2)
                    + (g_rec[2] - g_h[(1, 0)]).powi(2)
                    + (g_rec[3] - g_h[(1, 1)]).powi(2));
            let s_rec = stress.eval(mesh, k, xi, eta);
            let s_h = mode.eval(xi, eta) * solution.beta[k];
            let d = SymTensor2::new(s_rec[0] - s_h[0], s_rec[1] - s_h[1], s_rec[2] - s_h[2]);
            eta_s += jw * d.norm_sq();
        }
    }
    Ok((eta_u.sqrt(), eta_s.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::interp_u;
    use crate::material::Material;
    use crate::mesh::tests::irregular_2x2_mesh;
    use crate::quadrature::{gauss_rule, integrate_on_element};
    use crate::solver::{solve, DirichletData};
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    #[test]
    fn one_ring_patch_of_the_interior_vertex_covers_the_mesh() {
        let mesh = irregular_2x2_mesh();
        let patch = VertexPatch::build(&mesh, 8);
        assert_eq!(patch.elements, vec![0, 1, 2, 3]);
        assert_eq!(patch.nodes, (0..9).collect::<Vec<_>>());
        // Longest element side in the patch: (1,1) to (0.3,1), length 0.7.
        assert_relative_eq!(patch.h, 0.7, epsilon = 1e-14);
    }

    #[test]
    fn enlargement_is_idempotent_when_the_ring_covers_everything() {
        let mesh = irregular_2x2_mesh();
        let patch = VertexPatch::build(&mesh, 8);
        let big = patch.enlarged(&mesh);
        assert_eq!(big.elements, patch.elements);
        assert_eq!(big.nodes, patch.nodes);
    }

    #[test]
    fn ppr_reproduces_linear_fields_exactly() {
        let mesh = irregular_2x2_mesh();
        let values: Vec<f64> = (0..mesh.n_vertices())
            .map(|v| {
                let p = mesh.vertex(v);
                3.0 * p.x - 2.0 * p.y + 0.5
            })
            .collect();
        let patch = VertexPatch::build(&mesh, 8);
        let g = ppr_vertex_gradient(&mesh, &patch, &values).unwrap();
        assert_relative_eq!(g, Vector2::new(3.0, -2.0), epsilon = 1e-12);
    }

    #[test]
    fn ppr_is_exact_for_quadratics_at_interior_vertices() {
        let mesh = irregular_2x2_mesh().refine_bisection().unwrap();
        let q = |x: f64, y: f64| x * x + x * y - y * y + 0.3 * x;
        let grad = |x: f64, y: f64| Vector2::new(2.0 * x + y + 0.3, x - 2.0 * y);
        let values: Vec<f64> = (0..mesh.n_vertices())
            .map(|v| {
                let p = mesh.vertex(v);
                q(p.x, p.y)
            })
            .collect();
        for v in mesh.interior_vertices() {
            let patch = VertexPatch::build(&mesh, v);
            let g = ppr_vertex_gradient(&mesh, &patch, &values).unwrap();
            let p = mesh.vertex(v);
            assert_relative_eq!(g, grad(p.x, p.y), epsilon = 1e-9);
        }
    }

    #[test]
    fn recovered_gradient_is_exact_for_quadratics_everywhere() {
        // Interior fits reproduce the global quadratic, so the boundary
        // averaging rule returns the exact gradient there as well.
        let mesh = irregular_2x2_mesh().refine_bisection().unwrap();
        let u = interp_u(&mesh, &|x, y| {
            Vector2::new(x * x - y * y + x, 2.0 * x * y - 3.0 * y)
        });
        let field = recover_gradient(&mesh, &u).unwrap();
        for v in 0..mesh.n_vertices() {
            let p = mesh.vertex(v);
            let got = field.vertex_value(v);
            let want = [2.0 * p.x + 1.0, -2.0 * p.y, 2.0 * p.y, 2.0 * p.x - 3.0];
            for c in 0..4 {
                assert_relative_eq!(got[c], want[c], epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn recovered_gradient_of_a_linear_field_is_constant() {
        let mesh = irregular_2x2_mesh();
        let u = interp_u(&mesh, &|x, y| Vector2::new(x + 2.0 * y, 3.0 * x - y));
        let field = recover_gradient(&mesh, &u).unwrap();
        for v in 0..mesh.n_vertices() {
            let got = field.vertex_value(v);
            for (c, want) in [1.0, 2.0, 3.0, -1.0].into_iter().enumerate() {
                assert_relative_eq!(got[c], want, epsilon = 1e-11);
            }
        }
    }

    #[test]
    fn bilinear_evaluation_interpolates_vertex_values() {
        let mesh = irregular_2x2_mesh();
        let u = interp_u(&mesh, &|x, y| Vector2::new(x * y, x - y));
        let field = recover_gradient(&mesh, &u).unwrap();
        // At a corner of the reference square the evaluation equals the
        // vertex value of that corner.
        let quad = mesh.quad(2);
        let refs = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)];
        for (i, &(xi, eta)) in refs.iter().enumerate() {
            let at = field.eval(&mesh, 2, xi, eta);
            let expect = field.vertex_value(quad[i]);
            for c in 0..4 {
                assert_relative_eq!(at[c], expect[c], epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn tiny_patches_fail_even_after_enlargement() {
        let mesh = QuadMesh::new(
            vec![
                Point2::new(0.0, 0.0),
                Point2::new(1.0, 0.0),
                Point2::new(1.0, 1.0),
                Point2::new(0.0, 1.0),
            ],
            vec![[0, 1, 2, 3]],
        )
        .unwrap();
        let patch = VertexPatch::build(&mesh, 0);
        let err = ppr_vertex_gradient(&mesh, &patch, &[0.0; 4]).unwrap_err();
        assert!(matches!(
            err,
            Error::DeficientPatch {
                got: 4,
                need: 6,
                ..
            }
        ));
    }

    #[test]
    fn doctored_patch_recovers_through_enlargement() {
        let mesh = irregular_2x2_mesh();
        let mut patch = VertexPatch::build(&mesh, 8);
        patch.nodes.truncate(5);
        let values: Vec<f64> = (0..mesh.n_vertices())
            .map(|v| {
                let p = mesh.vertex(v);
                p.x - 4.0 * p.y
            })
            .collect();
        let g = ppr_vertex_gradient(&mesh, &patch, &values).unwrap();
        assert_relative_eq!(g, Vector2::new(1.0, -4.0), epsilon = 1e-11);
    }

    #[test]
    fn geometric_moments_match_quadrature() {
        let mesh = irregular_2x2_mesh();
        let rule = gauss_rule(3).unwrap();
        for k in 0..mesh.n_elements() {
            let geom = mesh.geometry(k);
            let m = cell_geometric_moments(geom);
            let q0 = integrate_on_element(geom, |_, _, _, _| 1.0, &rule);
            let qx = integrate_on_element(geom, |x, _, _, _| x, &rule);
            let qy = integrate_on_element(geom, |_, y, _, _| y, &rule);
            assert_relative_eq!(m[0], q0, epsilon = 1e-13);
            assert_relative_eq!(m[1], qx, epsilon = 1e-13);
            assert_relative_eq!(m[2], qy, epsilon = 1e-13);
        }
    }

    #[test]
    fn moment_fit_reproduces_linear_fields() {
        let mesh = irregular_2x2_mesh();
        let psi = |x: f64, y: f64| 2.0 - x + 5.0 * y;
        let patch = VertexPatch::build(&mesh, 8);
        let moments: Vec<f64> = patch
            .elements
            .iter()
            .map(|&k| {
                let m = cell_geometric_moments(mesh.geometry(k));
                2.0 * m[0] - m[1] + 5.0 * m[2]
            })
            .collect();
        let fit = rh_vertex_fit(&mesh, &patch, &moments).unwrap();
        let p = mesh.vertex(8);
        assert_relative_eq!(fit.eval(p), psi(p.x, p.y), epsilon = 1e-12);
        assert_relative_eq!(fit.gradient(), Vector2::new(-1.0, 5.0), epsilon = 1e-11);
        let q = Point2::new(0.2, 0.9);
        assert_relative_eq!(fit.eval(q), psi(q.x, q.y), epsilon = 1e-11);
    }

    #[test]
    fn moment_fit_matches_a_dense_least_squares_oracle() {
        // psi = x^2 is outside the fit space; compare the normal-equation
        // solution against an SVD least-squares solve of the same system
        // with quadrature-computed moments.
        let mesh = irregular_2x2_mesh().refine_bisection().unwrap();
        let rule = gauss_rule(6).unwrap();
        for v in mesh.interior_vertices() {
            let patch = VertexPatch::build(&mesh, v);
            let n = patch.elements.len();
            let moments: Vec<f64> = patch
                .elements
                .iter()
                .map(|&k| integrate_on_element(mesh.geometry(k), |x, _, _, _| x * x, &rule))
                .collect();
            let fit = rh_vertex_fit(&mesh, &patch, &moments).unwrap();

            let mut a = DMatrix::zeros(n, 3);
            let mut b = DVector::zeros(n);
            for (j, &k) in patch.elements.iter().enumerate() {
                let geom = mesh.geometry(k);
                a[(j, 0)] = integrate_on_element(geom, |_, _, _, _| 1.0, &rule);
                a[(j, 1)] = integrate_on_element(geom, |x, _, _, _| x, &rule);
                a[(j, 2)] = integrate_on_element(geom, |_, y, _, _| y, &rule);
                b[j] = moments[j];
            }
            let svd = a.svd(true, true);
            let alpha = svd.solve(&b, 1e-14).unwrap();
            let probe = [mesh.vertex(v), Point2::new(0.31, 0.67)];
            for p in probe {
                let oracle = alpha[0] + alpha[1] * p.x + alpha[2] * p.y;
                assert_relative_eq!(fit.eval(p), oracle, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn stress_recovery_from_linear_moments_is_exact_everywhere() {
        let mesh = irregular_2x2_mesh().refine_bisection().unwrap();
        let psi = |x: f64, y: f64| [1.0 + 2.0 * x, 3.0 - y, x + y];
        let moments: Vec<[f64; 3]> = (0..mesh.n_elements())
            .map(|k| {
                let m = cell_geometric_moments(mesh.geometry(k));
                [m[0] + 2.0 * m[1], 3.0 * m[0] - m[2], m[1] + m[2]]
            })
            .collect();
        let field = recover_stress_from_cell_moments(&mesh, &moments).unwrap();
        for v in 0..mesh.n_vertices() {
            let p = mesh.vertex(v);
            let want = psi(p.x, p.y);
            let got = field.vertex_value(v);
            for c in 0..3 {
                assert_relative_eq!(got[c], want[c], epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn estimators_vanish_on_a_linear_patch_solution() {
        // A linear exact solution makes grad u_h and sigma_h constant; both
        // recovered fields then coincide with the raw ones.
        let mesh = irregular_2x2_mesh().refine_bisection().unwrap();
        let mat = Material::new(1500.0, 0.3).unwrap();
        let rule = gauss_rule(4).unwrap();
        let exact = |x: f64, y: f64| Vector2::new((x + 2.0 * y) / 10.0, (3.0 * x - y) / 10.0);
        let sol = solve(
            &mesh,
            &mat,
            &|_, _| Vector2::zeros(),
            &DirichletData::new(exact),
            &rule,
        )
        .unwrap();
        let g = recover_gradient(&mesh, &sol.u).unwrap();
        let r = recover_stress(&mesh, &sol, &rule).unwrap();
        let (eta_u, eta_s) = estimators(&mesh, &sol, &g, &r, &rule).unwrap();
        assert!(eta_u <= 1e-9, "eta_u = {eta_u}");
        assert!(eta_s <= 1e-6, "eta_s = {eta_s}");
    }
}
