//! Convex quadrilateral meshes and bilinear element geometry.
//!
//! Each element K with CCW vertices Z_1..Z_4 carries the bilinear map
//!
//! ```text
//! x(xi,eta) = a0 + a1 xi + a2 eta + a12 xi eta
//! y(xi,eta) = b0 + b1 xi + b2 eta + b12 xi eta
//! ```
//!
//! from the reference square [-1,1]^2, with coefficients (1/4) M [coords]
//! where M has rows (1,1,1,1), (-1,1,1,-1), (-1,-1,1,1), (1,-1,1,-1).
//! The Jacobian determinant is affine, J(xi,eta) = J0 + J1 xi + J2 eta, so
//! a strictly convex CCW quad has J > 0 on the whole square.
//!
//! The module also provides the distortion metric d_K (distance between
//! diagonal midpoints, zero iff K is a parallelogram), shape-regularity and
//! neighbor-agreement quality metrics, midpoint bisection refinement, and a
//! plain-text mesh format.

use std::collections::HashMap;

use nalgebra::{Matrix2, Point2, Vector2};
use serde::{Serialize, Serializer};

use crate::{Error, Result};

/// Bilinear map coefficients and derived quantities for one element.
#[derive(Debug, Clone)]
pub struct ElementGeometry {
    /// (a0, a1, a2, a12)
    a: [f64; 4],
    /// (b0, b1, b2, b12)
    b: [f64; 4],
    /// (J0, J1, J2) with J0 = a1 b2 - a2 b1, J1 = a1 b12 - a12 b1,
    /// J2 = a12 b2 - a2 b12.
    j: [f64; 3],
    /// Distance between the midpoints of the two diagonals:
    /// d_K = (1/2) sqrt(a12^2 + b12^2). Zero iff parallelogram.
    d_k: f64,
    /// Element diameter (max pairwise vertex distance).
    h_k: f64,
    /// Element id, carried for error reporting only.
    elem: usize,
}

impl ElementGeometry {
    /// Computes the bilinear map coefficients of a strictly convex CCW quad.
    /// `elem` names the element in errors.
    pub fn new(v: &[Point2<f64>; 4], elem: usize) -> Result<Self> {
        let mut h_k = 0.0f64;
        for i in 0..4 {
            for k in (i + 1)..4 {
                h_k = h_k.max((v[k] - v[i]).norm());
            }
        }
        if h_k == 0.0 {
            return Err(Error::NonConvexElement { elem });
        }
        // Strict convexity + CCW: all consecutive-edge cross products positive.
        for i in 0..4 {
            let e0 = v[(i + 1) % 4] - v[i];
            let e1 = v[(i + 2) % 4] - v[(i + 1) % 4];
            if e0.x * e1.y - e0.y * e1.x <= 1e-14 * h_k * h_k {
                return Err(Error::NonConvexElement { elem });
            }
        }
        let (x, y) = (
            [v[0].x, v[1].x, v[2].x, v[3].x],
            [v[0].y, v[1].y, v[2].y, v[3].y],
        );
        let comb = |c: &[f64; 4], s: &[f64; 4]| -> f64 {
            0.25 * (s[0] * c[0] + s[1] * c[1] + s[2] * c[2] + s[3] * c[3])
        };
        let signs: [[f64; 4]; 4] = [
            [1.0, 1.0, 1.0, 1.0],
            [-1.0, 1.0, 1.0, -1.0],
            [-1.0, -1.0, 1.0, 1.0],
            [1.0, -1.0, 1.0, -1.0],
        ];
        let a = [
            comb(&x, &signs[0]),
            comb(&x, &signs[1]),
            comb(&x, &signs[2]),
            comb(&x, &signs[3]),
        ];
        let b = [
            comb(&y, &signs[0]),
            comb(&y, &signs[1]),
            comb(&y, &signs[2]),
            comb(&y, &signs[3]),
        ];
        let j = [
            a[1] * b[2] - a[2] * b[1],
            a[1] * b[3] - a[3] * b[1],
            a[3] * b[2] - a[2] * b[3],
        ];
        // Equivalent to the corner cross-product check, kept as a guard.
        let min_det = j[0] - j[1].abs() - j[2].abs();
        if min_det <= 0.0 {
            return Err(Error::DegenerateElement { elem, min_det });
        }
        let d_k = 0.5 * (a[3] * a[3] + b[3] * b[3]).sqrt();
        Ok(ElementGeometry {
            a,
            b,
            j,
            d_k,
            h_k,
            elem,
        })
    }

    pub fn a(&self) -> [f64; 4] {
        self.a
    }

    pub fn b(&self) -> [f64; 4] {
        self.b
    }

    /// (J0, J1, J2).
    pub fn j_coeffs(&self) -> [f64; 3] {
        self.j
    }

    pub fn d_k(&self) -> f64 {
        self.d_k
    }

    pub fn h_k(&self) -> f64 {
        self.h_k
    }

    pub fn elem(&self) -> usize {
        self.elem
    }

    /// |K| = 4 J0 (the integral of J over the reference square).
    pub fn area(&self) -> f64 {
        4.0 * self.j[0]
    }

    /// F_K(0,0) = (a0, b0); the intersection of the two mid-lines.
    pub fn center(&self) -> Point2<f64> {
        Point2::new(self.a[0], self.b[0])
    }

    pub fn map_ref_to_phys(&self, xi: f64, eta: f64) -> Point2<f64> {
        Point2::new(
            self.a[0] + self.a[1] * xi + self.a[2] * eta + self.a[3] * xi * eta,
            self.b[0] + self.b[1] * xi + self.b[2] * eta + self.b[3] * xi * eta,
        )
    }

    /// DF_K(xi,eta) = [[a1 + a12 eta, a2 + a12 xi], [b1 + b12 eta, b2 + b12 xi]].
    pub fn jacobian(&self, xi: f64, eta: f64) -> Matrix2<f64> {
        Matrix2::new(
            self.a[1] + self.a[3] * eta,
            self.a[2] + self.a[3] * xi,
            self.b[1] + self.b[3] * eta,
            self.b[2] + self.b[3] * xi,
        )
    }

    pub fn jacobian_det(&self, xi: f64, eta: f64) -> f64 {
        self.j[0] + self.j[1] * xi + self.j[2] * eta
    }

    /// DF_K^-1 = (1/J) [[b2 + b12 xi, -a2 - a12 xi], [-b1 - b12 eta, a1 + a12 eta]].
    pub fn inverse_jacobian(&self, xi: f64, eta: f64) -> Result<Matrix2<f64>> {
        let det = self.jacobian_det(xi, eta);
        if det <= 0.0 {
            return Err(Error::DegenerateElement {
                elem: self.elem,
                min_det: det,
            });
        }
        Ok(Matrix2::new(
            self.b[2] + self.b[3] * xi,
            -self.a[2] - self.a[3] * xi,
            -self.b[1] - self.b[3] * eta,
            self.a[1] + self.a[3] * eta,
        ) / det)
    }

    /// Physical gradients (dN/dx, dN/dy) of the four bilinear shape functions.
    pub fn shape_phys_grads(&self, xi: f64, eta: f64) -> [[f64; 2]; 4] {
        // [dN/dx, dN/dy] = [dN/dxi, dN/deta] * DF^-1 (row-vector convention).
        let inv = self
            .inverse_jacobian(xi, eta)
            .expect("valid element has positive Jacobian on the reference square");
        let rg = bilinear_shape_ref_grad(xi, eta);
        let mut out = [[0.0; 2]; 4];
        for (i, g) in rg.iter().enumerate() {
            out[i][0] = g[0] * inv[(0, 0)] + g[1] * inv[(1, 0)];
            out[i][1] = g[0] * inv[(0, 1)] + g[1] * inv[(1, 1)];
        }
        out
    }

    /// Inverts the bilinear map by Newton iteration. Converges for any point
    /// in the (closed) element; used by tests and tooling, not by assembly.
    pub fn map_phys_to_ref(&self, p: Point2<f64>) -> Result<(f64, f64)> {
        let mut xi = 0.0;
        let mut eta = 0.0;
        for _ in 0..60 {
            let r = self.map_ref_to_phys(xi, eta) - p;
            if r.norm() <= 1e-14 * self.h_k {
                return Ok((xi, eta));
            }
            let inv = self.inverse_jacobian(xi, eta)?;
            let d = inv * Vector2::new(r.x, r.y);
            xi -= d.x;
            eta -= d.y;
            // Keep the iterate in the region where J stays positive.
            xi = xi.clamp(-1.5, 1.5);
            eta = eta.clamp(-1.5, 1.5);
        }
        Err(Error::InverseMapDiverged { elem: self.elem })
    }
}

/// Values of the four bilinear shape functions at (xi, eta), node order
/// (-1,-1), (1,-1), (1,1), (-1,1).
pub fn bilinear_shape(xi: f64, eta: f64) -> [f64; 4] {
    [
        0.25 * (1.0 - xi) * (1.0 - eta),
        0.25 * (1.0 + xi) * (1.0 - eta),
        0.25 * (1.0 + xi) * (1.0 + eta),
        0.25 * (1.0 - xi) * (1.0 + eta),
    ]
}

/// Reference gradients (dN/dxi, dN/deta) of the four shape functions.
pub fn bilinear_shape_ref_grad(xi: f64, eta: f64) -> [[f64; 2]; 4] {
    [
        [-0.25 * (1.0 - eta), -0.25 * (1.0 - xi)],
        [0.25 * (1.0 - eta), -0.25 * (1.0 + xi)],
        [0.25 * (1.0 + eta), 0.25 * (1.0 + xi)],
        [-0.25 * (1.0 + eta), 0.25 * (1.0 - xi)],
    ]
}

/// Undirected mesh edge. `left` traverses v[0] -> v[1] counter-clockwise;
/// `right` is the opposite-side element (None on the boundary).
#[derive(Debug, Clone, Copy)]
pub struct MeshEdge {
    pub v: [usize; 2],
    pub left: usize,
    pub right: Option<usize>,
}

/// Conforming mesh of strictly convex quadrilaterals.
#[derive(Debug, Clone)]
pub struct QuadMesh {
    vertices: Vec<Point2<f64>>,
    quads: Vec<[usize; 4]>,
    geoms: Vec<ElementGeometry>,
    edges: Vec<MeshEdge>,
    /// Edge index of each quad side i (from vertex i to vertex i+1 mod 4).
    quad_edges: Vec<[usize; 4]>,
    boundary: Vec<bool>,
    /// For each vertex, the ascending list of elements whose closure
    /// contains it (the patch omega_i).
    patches: Vec<Vec<usize>>,
}

impl QuadMesh {
    /// Validates connectivity and element geometry and derives edges,
    /// boundary flags and vertex patches.
    pub fn new(vertices: Vec<Point2<f64>>, quads: Vec<[usize; 4]>) -> Result<Self> {
        if vertices.is_empty() || quads.is_empty() {
            return Err(Error::InvalidMesh("empty vertex or element list".into()));
        }
        let nv = vertices.len();
        let mut geoms = Vec::with_capacity(quads.len());
        for (k, q) in quads.iter().enumerate() {
            if q.iter().any(|&i| i >= nv) {
                return Err(Error::InvalidMesh(format!(
                    "element {k} references vertex out of range"
                )));
            }
            for i in 0..4 {
                for l in (i + 1)..4 {
                    if q[i] == q[l] {
                        return Err(Error::InvalidMesh(format!(
                            "element {k} repeats vertex {}",
                            q[i]
                        )));
                    }
                }
            }
            geoms.push(ElementGeometry::new(
                &[
                    vertices[q[0]],
                    vertices[q[1]],
                    vertices[q[2]],
                    vertices[q[3]],
                ],
                k,
            )?);
        }

        // Edges in first-encounter order (element order, then side order),
        // so everything derived from them is deterministic.
        let mut edges: Vec<MeshEdge> = Vec::new();
        let mut quad_edges = vec![[usize::MAX; 4]; quads.len()];
        let mut index: HashMap<(usize, usize), usize> = HashMap::new();
        for (k, q) in quads.iter().enumerate() {
            for side in 0..4 {
                let (p, r) = (q[side], q[(side + 1) % 4]);
                let key = (p.min(r), p.max(r));
                match index.get(&key) {
                    None => {
                        index.insert(key, edges.len());
                        quad_edges[k][side] = edges.len();
                        edges.push(MeshEdge {
                            v: [p, r],
                            left: k,
                            right: None,
                        });
                    }
                    Some(&e) => {
                        if edges[e].right.is_some() {
                            return Err(Error::InvalidMesh(format!(
                                "edge ({p},{r}) shared by more than two elements"
                            )));
                        }
                        if edges[e].v == [p, r] {
                            return Err(Error::InvalidMesh(format!(
                                "edge ({p},{r}) traversed twice in the same direction \
                                 (inconsistent element orientation)"
                            )));
                        }
                        edges[e].right = Some(k);
                        quad_edges[k][side] = e;
                    }
                }
            }
        }

        let mut boundary = vec![false; nv];
        for e in &edges {
            if e.right.is_none() {
                boundary[e.v[0]] = true;
                boundary[e.v[1]] = true;
            }
        }

        let mut patches = vec![Vec::new(); nv];
        for (k, q) in quads.iter().enumerate() {
            for &i in q {
                patches[i].push(k);
            }
        }
        if let Some(i) = patches.iter().position(|p| p.is_empty()) {
            return Err(Error::InvalidMesh(format!(
                "vertex {i} belongs to no element"
            )));
        }

        Ok(QuadMesh {
            vertices,
            quads,
            geoms,
            edges,
            quad_edges,
            boundary,
            patches,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_elements(&self) -> usize {
        self.quads.len()
    }

    pub fn vertices(&self) -> &[Point2<f64>] {
        &self.vertices
    }

    pub fn vertex(&self, i: usize) -> Point2<f64> {
        self.vertices[i]
    }

    pub fn quads(&self) -> &[[usize; 4]] {
        &self.quads
    }

    pub fn quad(&self, k: usize) -> [usize; 4] {
        self.quads[k]
    }

    pub fn geometry(&self, k: usize) -> &ElementGeometry {
        &self.geoms[k]
    }

    pub fn edges(&self) -> &[MeshEdge] {
        &self.edges
    }

    pub fn is_boundary_vertex(&self, i: usize) -> bool {
        self.boundary[i]
    }

    /// Elements around vertex i, ascending.
    pub fn patch(&self, i: usize) -> &[usize] {
        &self.patches[i]
    }

    pub fn interior_vertices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_vertices()).filter(|&i| !self.boundary[i])
    }

    pub fn boundary_vertices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_vertices()).filter(|&i| self.boundary[i])
    }

    /// Max element diameter.
    pub fn h_max(&self) -> f64 {
        self.geoms.iter().map(|g| g.h_k).fold(0.0, f64::max)
    }

    /// Splits every quad into four at its edge midpoints and center
    /// F_K(0,0). Shared midpoints are deduplicated; new vertex count is
    /// V + E + Q. Children keep the parent's local orientation.
    pub fn refine_bisection(&self) -> Result<QuadMesh> {
        let nv = self.n_vertices();
        let ne = self.edges.len();
        let mut vertices = self.vertices.clone();
        vertices.reserve(ne + self.n_elements());
        for e in &self.edges {
            vertices.push(nalgebra::center(
                &self.vertices[e.v[0]],
                &self.vertices[e.v[1]],
            ));
        }
        for g in &self.geoms {
            vertices.push(g.center());
        }
        let mut quads = Vec::with_capacity(4 * self.n_elements());
        for (k, q) in self.quads.iter().enumerate() {
            let m = |side: usize| nv + self.quad_edges[k][side];
            let c = nv + ne + k;
            quads.push([q[0], m(0), c, m(3)]);
            quads.push([m(0), q[1], m(1), c]);
            quads.push([c, m(1), q[2], m(2)]);
            quads.push([m(3), c, m(2), q[3]]);
        }
        QuadMesh::new(vertices, quads)
    }

    /// Parses the plain-text format:
    ///
    /// ```text
    /// quadmesh 1
    /// V <count>
    /// x y          (count lines)
    /// Q <count>
    /// i1 i2 i3 i4  (count lines, 0-based, CCW)
    /// ```
    ///
    /// `#` starts a comment to end of line; tokens may be split by any
    /// whitespace.
    pub fn parse(text: &str) -> Result<Self> {
        let mut tokens = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or(""))
            .flat_map(|l| l.split_whitespace().map(str::to_owned).collect::<Vec<_>>());
        let mut next = |what: &str| -> Result<String> {
            tokens.next().ok_or_else(|| {
                Error::MeshFormat(format!("unexpected end of input, expected {what}"))
            })
        };
        let magic = next("header")?;
        let version = next("version")?;
        if magic != "quadmesh" || version != "1" {
            return Err(Error::MeshFormat(format!(
                "bad header '{magic} {version}', expected 'quadmesh 1'"
            )));
        }
        let v_tag = next("'V'")?;
        if v_tag != "V" {
            return Err(Error::MeshFormat(format!("expected 'V', got '{v_tag}'")));
        }
        let nv: usize = next("vertex count")?
            .parse()
            .map_err(|e| Error::MeshFormat(format!("bad vertex count: {e}")))?;
        let mut vertices = Vec::with_capacity(nv);
        for i in 0..nv {
            let x: f64 = next("x coordinate")?
                .parse()
                .map_err(|e| Error::MeshFormat(format!("vertex {i}: bad x: {e}")))?;
            let y: f64 = next("y coordinate")?
                .parse()
                .map_err(|e| Error::MeshFormat(format!("vertex {i}: bad y: {e}")))?;
            vertices.push(Point2::new(x, y));
        }
        let q_tag = next("'Q'")?;
        if q_tag != "Q" {
            return Err(Error::MeshFormat(format!("expected 'Q', got '{q_tag}'")));
        }
        let nq: usize = next("element count")?
            .parse()
            .map_err(|e| Error::MeshFormat(format!("bad element count: {e}")))?;
        let mut quads = Vec::with_capacity(nq);
        for k in 0..nq {
            let mut q = [0usize; 4];
            for slot in &mut q {
                *slot = next("vertex index")?
                    .parse()
                    .map_err(|e| Error::MeshFormat(format!("element {k}: bad index: {e}")))?;
            }
            quads.push(q);
        }
        if tokens.next().is_some() {
            return Err(Error::MeshFormat(
                "trailing tokens after element list".into(),
            ));
        }
        QuadMesh::new(vertices, quads)
    }

    /// Writes the canonical form of the text format. Coordinates use the
    /// shortest representation that round-trips the exact double.
    pub fn to_text(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        writeln!(out, "quadmesh 1").unwrap();
        writeln!(out, "V {}", self.n_vertices()).unwrap();
        for v in &self.vertices {
            writeln!(out, "{} {}", v.x, v.y).unwrap();
        }
        writeln!(out, "Q {}", self.n_elements()).unwrap();
        for q in &self.quads {
            writeln!(out, "{} {} {} {}", q[0], q[1], q[2], q[3]).unwrap();
        }
        out
    }
}

fn serialize_maybe_infinite<S: Serializer>(
    v: &Option<f64>,
    ser: S,
) -> std::result::Result<S::Ok, S::Error> {
    match v {
        None => ser.serialize_none(),
        Some(x) if x.is_finite() => ser.serialize_f64(*x),
        Some(x) => ser.serialize_str(if *x > 0.0 { "inf" } else { "-inf" }),
    }
}

/// Shape-regularity and distortion metrics of one mesh (optionally with the
/// distortion-decay exponent fitted across a refinement ladder).
#[derive(Debug, Clone, Serialize)]
pub struct MeshQualityReport {
    /// Per element: min over the four corner triangles of the incircle
    /// diameter.
    pub rho_k: Vec<f64>,
    /// Per element: diagonal-midpoint distance d_K.
    pub d_k: Vec<f64>,
    /// Per element: diameter h_K.
    pub h_k: Vec<f64>,
    /// max_K h_K / rho_K.
    pub varrho: f64,
    /// Always true for quads (a square already gives 2.41); recorded anyway.
    pub varrho_exceeds_two: bool,
    /// Max over interior edges and j in {1,2} of the relative disagreement
    /// of a_j, b_j between the two adjacent elements, divided by
    /// max(h_K1, h_K2) (i.e. normalized with exponent alpha = 1).
    pub mc2_max_deviation: f64,
    /// max_K h_K / (diameter of the largest circle inscribed in K).
    pub jamet_ratio: f64,
    /// Fitted exponent alpha of d_K = O(h_K^(1+alpha)); requires a ladder
    /// (see [`ladder_alpha_fit`]), None for a single mesh. +inf when every
    /// element is a parallelogram.
    #[serde(serialize_with = "serialize_maybe_infinite")]
    pub alpha_fit: Option<f64>,
}

/// Computes the per-mesh quality metrics. `alpha_fit` is left None; fill it
/// from [`ladder_alpha_fit`] when a refinement ladder is available.
pub fn quality_report(mesh: &QuadMesh) -> MeshQualityReport {
    let mut rho_k = Vec::with_capacity(mesh.n_elements());
    let mut d_k = Vec::with_capacity(mesh.n_elements());
    let mut h_k = Vec::with_capacity(mesh.n_elements());
    let mut varrho = 0.0f64;
    let mut jamet = 0.0f64;
    for k in 0..mesh.n_elements() {
        let g = mesh.geometry(k);
        let q = mesh.quad(k);
        let pts = [
            mesh.vertex(q[0]),
            mesh.vertex(q[1]),
            mesh.vertex(q[2]),
            mesh.vertex(q[3]),
        ];
        let mut rho = f64::INFINITY;
        for i in 0..4 {
            rho = rho.min(triangle_incircle_diameter(
                pts[(i + 3) % 4],
                pts[i],
                pts[(i + 1) % 4],
            ));
        }
        rho_k.push(rho);
        d_k.push(g.d_k());
        h_k.push(g.h_k());
        varrho = varrho.max(g.h_k() / rho);
        jamet = jamet.max(g.h_k() / chebyshev_diameter(&pts));
    }

    let mut mc2 = 0.0f64;
    for e in mesh.edges() {
        let Some(right) = e.right else { continue };
        let (g1, g2) = (mesh.geometry(e.left), mesh.geometry(right));
        let h = g1.h_k().max(g2.h_k());
        for j in 1..=2 {
            for (c1, c2) in [(g1.a()[j], g2.a()[j]), (g1.b()[j], g2.b()[j])] {
                let m = c1.abs().max(c2.abs());
                // Both coefficients ~0 (axis-aligned direction): agreement.
                if m > 1e-14 * h {
                    mc2 = mc2.max((c1 - c2).abs() / m / h);
                }
            }
        }
    }

    MeshQualityReport {
        rho_k,
        d_k,
        h_k,
        varrho,
        varrho_exceeds_two: varrho >= 2.0,
        mc2_max_deviation: mc2,
        jamet_ratio: jamet,
        alpha_fit: None,
    }
}

/// Fits alpha in d_K = O(h_K^(1+alpha)) across >= 2 ladder levels: the
/// least-squares slope of log d_K vs log h_K, minus 1, with each mesh
/// entering through the geometric mean of its elements' (h_K, d_K).
///
/// Per-mesh aggregation is what makes this estimate the refinement
/// exponent: element counts grow ~4x per level, so a fit pooled over raw
/// elements is dominated by the finest mesh's within-mesh shape scatter
/// and stays biased low no matter how many levels are added. Averaging
/// log h and log d per mesh first cancels the (level-independent) scatter
/// and leaves exactly the level-to-level decay.
///
/// Elements with d_K <= 1e-14 h_K are dropped; if every element of every
/// mesh is dropped the ladder is (asymptotically) parallelogram and
/// alpha = +inf.
pub fn ladder_alpha_fit(ladder: &[QuadMesh]) -> Option<f64> {
    if ladder.len() < 2 {
        return None;
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for mesh in ladder {
        let (mut sum_ln_h, mut sum_ln_d, mut n) = (0.0, 0.0, 0usize);
        for k in 0..mesh.n_elements() {
            let g = mesh.geometry(k);
            if g.d_k() > 1e-14 * g.h_k() {
                sum_ln_h += g.h_k().ln();
                sum_ln_d += g.d_k().ln();
                n += 1;
            }
        }
        if n > 0 {
            xs.push(sum_ln_h / n as f64);
            ys.push(sum_ln_d / n as f64);
        }
    }
    if xs.is_empty() {
        return Some(f64::INFINITY);
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx <= 1e-20 {
        return None;
    }
    Some(sxy / sxx - 1.0)
}

/// Incircle diameter 4 * area / perimeter of triangle (p, q, r).
fn triangle_incircle_diameter(p: Point2<f64>, q: Point2<f64>, r: Point2<f64>) -> f64 {
    let (e0, e1) = (q - p, r - p);
    let area = 0.5 * (e0.x * e1.y - e0.y * e1.x).abs();
    let perim = (q - p).norm() + (r - q).norm() + (p - r).norm();
    4.0 * area / perim
}

/// Diameter of the largest circle inscribed in a strictly convex CCW quad
/// (Chebyshev center): maximize r subject to n_i . p - r >= n_i . v_i for
/// the four inward edge normals. The optimum activates three constraints;
/// all C(4,3) triples are enumerated.
fn chebyshev_diameter(pts: &[Point2<f64>; 4]) -> f64 {
    let mut normals = [Vector2::zeros(); 4];
    let mut offsets = [0.0f64; 4];
    for i in 0..4 {
        let d = pts[(i + 1) % 4] - pts[i];
        let n = Vector2::new(-d.y, d.x).normalize();
        normals[i] = n;
        offsets[i] = n.dot(&pts[i].coords);
    }
    let scale = (pts[2] - pts[0]).norm().max((pts[3] - pts[1]).norm());
    let mut best = 0.0f64;
    for skip in 0..4 {
        let ids: Vec<usize> = (0..4).filter(|&i| i != skip).collect();
        let m = nalgebra::Matrix3::from_rows(&[
            nalgebra::RowVector3::new(normals[ids[0]].x, normals[ids[0]].y, -1.0),
            nalgebra::RowVector3::new(normals[ids[1]].x, normals[ids[1]].y, -1.0),
            nalgebra::RowVector3::new(normals[ids[2]].x, normals[ids[2]].y, -1.0),
        ]);
        let rhs = nalgebra::Vector3::new(offsets[ids[0]], offsets[ids[1]], offsets[ids[2]]);
        let Some(sol) = m.lu().solve(&rhs) else {
            continue;
        };
        let (p, r) = (Vector2::new(sol.x, sol.y), sol.z);
        if r <= 0.0 {
            continue;
        }
        let feasible = (0..4).all(|i| normals[i].dot(&p) - offsets[i] >= r - 1e-12 * scale);
        if feasible {
            best = best.max(r);
        }
    }
    2.0 * best
}
