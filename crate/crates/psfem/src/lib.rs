//! Plane-strain linear elasticity on general convex quadrilateral meshes,
//! discretized with the 4-node Pian–Sumihara hybrid stress element
//! (bilinear displacements, 5-parameter equilibrated stress modes,
//! stresses condensed out element by element).
//!
//! On top of the solver the crate provides two superconvergent recovery
//! operators and the a posteriori error estimators built from them:
//!
//! * polynomial-preserving gradient recovery (quadratic patch fits at
//!   vertices) for the displacement field, and
//! * a moment-based linear patch fit for the stress field,
//!
//! plus manufactured-solution convergence drivers that produce the full
//! error/estimator tables for two benchmark problems.
//!
//! Module map: [`mesh`] (geometry, quality metrics, bisection refinement,
//! mesh file I/O), [`quadrature`] (tensor Gauss-Legendre), [`material`]
//! (plane-strain constitutive law), [`ps_element`] (element matrices),
//! [`solver`] (assembly + sparse SPD solve), [`fields`] (interpolants,
//! stress projection, error norms), [`recovery`] (gradient/stress recovery
//! and estimators), [`bench`] (benchmark problems, ladders, tables).

pub mod bench;
pub mod fields;
pub mod material;
pub mod mesh;
pub mod ps_element;
pub mod quadrature;
pub mod recovery;
pub mod solver;

pub use material::{Material, SymTensor2};
pub use mesh::{ElementGeometry, MeshQualityReport, QuadMesh};
pub use quadrature::GaussRule;
pub use solver::HybridSolution;

/// Crate-wide error type. Variants name the offending entity (element or
/// vertex index) so mesh problems are reportable without a debugger.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("element {elem}: quadrilateral is not strictly convex or not counter-clockwise")]
    NonConvexElement { elem: usize },
    #[error("element {elem}: Jacobian not positive on the reference square (min {min_det:.3e})")]
    DegenerateElement { elem: usize, min_det: f64 },
    #[error(
        "element {elem}: stress modes need a1 != 0 and b2 != 0 (a1 = {a1:.3e}, b2 = {b2:.3e})"
    )]
    IllOrientedElement { elem: usize, a1: f64, b2: f64 },
    #[error("element {elem}: flexibility matrix H is not positive definite")]
    FlexibilityNotSpd { elem: usize },
    #[error(
        "vertex {vertex}: patch has {got} {what}, need at least {need} (after one enlargement)"
    )]
    DeficientPatch {
        vertex: usize,
        what: &'static str,
        got: usize,
        need: usize,
    },
    #[error("vertex {vertex}: patch fit is numerically singular (cond {cond:.3e})")]
    SingularPatchFit { vertex: usize, cond: f64 },
    #[error("mesh unsupported for recovery: {0}")]
    UnsupportedMesh(String),
    #[error("element {elem}: Newton inversion of the bilinear map diverged")]
    InverseMapDiverged { elem: usize },
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("mesh file: {0}")]
    MeshFormat(String),
    #[error("Gauss rule order {0} out of range 1..=10")]
    QuadratureOrder(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("manufactured solution self-check failed: {0}")]
    SelfCheck(String),
    #[error("global stiffness matrix is not positive definite")]
    StiffnessNotSpd,
    #[error("material: Poisson ratio {0} outside (0, 0.5)")]
    InvalidPoisson(f64),
    #[error("material: Young modulus {0} must be positive")]
    InvalidYoung(f64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
