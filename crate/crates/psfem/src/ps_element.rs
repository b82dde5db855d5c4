//! Pian-Sumihara hybrid stress element.
//!
//! Each element carries five stress parameters beta multiplying the mode
//! matrix A(xi, eta) (three constant modes plus two linear ones tied to the
//! element geometry) and eight nodal displacement dofs (bilinear, x/y
//! interleaved per node). The element matrices are
//!
//! ```text
//! H = int_K A^T W C^-1 A          (5x5 flexibility, SPD)
//! G = int_K A^T W B               (5x8 coupling, B = tensor strain of shape fns)
//! Ke = G^T H^-1 G                 (8x8 condensed stiffness, rank 5)
//! fe_j = int_K f . phi_j          (8-vector load)
//! ```
//!
//! with W = diag(1,1,2) carrying the tensor contraction convention of
//! [`crate::material`]. Stresses never enter the global system: they are
//! recovered per element as beta = H^-1 G u_e.

use nalgebra::{SMatrix, SVector, Vector2, Vector3};

use crate::material::{contraction_weight, Material};
use crate::mesh::{bilinear_shape, ElementGeometry};
use crate::quadrature::GaussRule;
use crate::{Error, Result};

/// The 3x5 stress mode matrix evaluator of one element.
///
/// Columns: identity modes (s11, s22, s12), then
/// col4 = (eta, (b1/a1)^2 eta, (b1/a1) eta) and
/// col5 = ((a2/b2)^2 xi, xi, (a2/b2) xi).
#[derive(Debug, Clone, Copy)]
pub struct StressMode {
    /// b1 / a1
    r1: f64,
    /// a2 / b2
    r2: f64,
}

impl StressMode {
    pub fn new(geom: &ElementGeometry) -> Result<Self> {
        let (a, b) = (geom.a(), geom.b());
        if a[1].abs() <= 1e-12 * geom.h_k() || b[2].abs() <= 1e-12 * geom.h_k() {
            return Err(Error::IllOrientedElement {
                elem: geom.elem(),
                a1: a[1],
                b2: b[2],
            });
        }
        Ok(StressMode {
            r1: b[1] / a[1],
            r2: a[2] / b[2],
        })
    }

    pub fn eval(&self, xi: f64, eta: f64) -> SMatrix<f64, 3, 5> {
        let (r1, r2) = (self.r1, self.r2);
        SMatrix::<f64, 3, 5>::from_columns(&[
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(0.0, 1.0, 0.0),
            Vector3::new(0.0, 0.0, 1.0),
            Vector3::new(eta, r1 * r1 * eta, r1 * eta),
            Vector3::new(r2 * r2 * xi, xi, r2 * xi),
        ])
    }
}

/// Evaluates the stress mode matrix of `geom` at one reference point.
pub fn stress_mode_eval(geom: &ElementGeometry, xi: f64, eta: f64) -> Result<SMatrix<f64, 3, 5>> {
    Ok(StressMode::new(geom)?.eval(xi, eta))
}

/// Condensed element matrices. The H factorization is kept for the stress
/// back-substitution.
#[derive(Debug, Clone)]
pub struct ElementMatrices {
    pub h: SMatrix<f64, 5, 5>,
    pub g: SMatrix<f64, 5, 8>,
    pub ke: SMatrix<f64, 8, 8>,
    pub fe: SVector<f64, 8>,
    h_chol: nalgebra::Cholesky<f64, nalgebra::Const<5>>,
}

/// Tensor strain rows of the eight displacement dofs at one point:
/// B[0][2i] = dN_i/dx, B[1][2i+1] = dN_i/dy,
/// B[2][2i] = dN_i/dy / 2, B[2][2i+1] = dN_i/dx / 2.
fn strain_matrix(geom: &ElementGeometry, xi: f64, eta: f64) -> SMatrix<f64, 3, 8> {
    let grads = geom.shape_phys_grads(xi, eta);
    let mut b = SMatrix::<f64, 3, 8>::zeros();
    for (i, g) in grads.iter().enumerate() {
        b[(0, 2 * i)] = g[0];
        b[(1, 2 * i + 1)] = g[1];
        b[(2, 2 * i)] = 0.5 * g[1];
        b[(2, 2 * i + 1)] = 0.5 * g[0];
    }
    b
}

/// Assembles H, G, Ke and the load vector for one element by quadrature.
/// `body_force` maps a physical point to the volumetric force density.
pub fn element_matrices<F>(
    geom: &ElementGeometry,
    material: &Material,
    body_force: F,
    rule: &GaussRule,
) -> Result<ElementMatrices>
where
    F: Fn(f64, f64) -> Vector2<f64>,
{
    let mode = StressMode::new(geom)?;
    let w = contraction_weight();
    let w_cinv = w * material.compliance_matrix();
    let mut h = SMatrix::<f64, 5, 5>::zeros();
    let mut g = SMatrix::<f64, 5, 8>::zeros();
    let mut fe = SVector::<f64, 8>::zeros();
    for (xi, eta, wq) in rule.iter() {
        let jw = wq * geom.jacobian_det(xi, eta);
        let a = mode.eval(xi, eta);
        h += jw * a.transpose() * w_cinv * a;
        g += jw * a.transpose() * w * strain_matrix(geom, xi, eta);
        let p = geom.map_ref_to_phys(xi, eta);
        let f = body_force(p.x, p.y);
        let n = bilinear_shape(xi, eta);
        for i in 0..4 {
            fe[2 * i] += jw * f.x * n[i];
            fe[2 * i + 1] += jw * f.y * n[i];
        }
    }
    h = 0.5 * (h + h.transpose());
    let h_chol = h
        .cholesky()
        .ok_or(Error::FlexibilityNotSpd { elem: geom.elem() })?;
    let hinv_g = h_chol.solve(&g);
    let mut ke = g.transpose() * hinv_g;
    ke = 0.5 * (ke + ke.transpose());
    Ok(ElementMatrices {
        h,
        g,
        ke,
        fe,
        h_chol,
    })
}

/// beta = H^-1 G u_e: the element stress parameters induced by nodal
/// displacements.
pub fn element_stress_from_displacement(
    em: &ElementMatrices,
    ue: &SVector<f64, 8>,
) -> SVector<f64, 5> {
    em.h_chol.solve(&(em.g * ue))
}
