//! Global assembly and solution of the hybrid stress system.
//!
//! Element stiffness blocks are scattered into a sparse symmetric matrix over
//! interleaved nodal displacement dofs (vertex `i` owns dofs `2i`, `2i + 1`).
//! Dirichlet data is imposed by lifting: boundary dofs are pinned to their
//! prescribed values and the condensed interior block, reordered by reverse
//! Cuthill-McKee to keep the factor envelope small, is solved with a sparse
//! Cholesky factorization. Element stress coefficients are recovered from the
//! converged displacements by back-substitution through each element's
//! flexibility factor.

use nalgebra::{DMatrix, DVector, Point2, SVector, Vector2};
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::CscMatrix;

use crate::material::Material;
use crate::mesh::QuadMesh;
use crate::ps_element::{element_matrices, element_stress_from_displacement, ElementMatrices};
use crate::quadrature::GaussRule;
use crate::{Error, Result};

/// Prescribed boundary displacement, evaluated at boundary vertices.
pub struct DirichletData<'a> {
    g: Box<dyn Fn(f64, f64) -> Vector2<f64> + 'a>,
}

impl<'a> DirichletData<'a> {
    pub fn new(g: impl Fn(f64, f64) -> Vector2<f64> + 'a) -> Self {
        Self { g: Box::new(g) }
    }

    /// Zero displacement on the whole boundary.
    pub fn homogeneous() -> Self {
        Self::new(|_, _| Vector2::zeros())
    }

    pub fn eval(&self, p: Point2<f64>) -> Vector2<f64> {
        (self.g)(p.x, p.y)
    }
}

/// Assembled global system prior to boundary-condition elimination.
pub struct AssembledSystem {
    /// Symmetric stiffness over all `2 * n_vertices` dofs.
    pub stiffness: CscMatrix<f64>,
    /// Consistent load vector over all dofs.
    pub load: DVector<f64>,
    /// Per-element matrices, kept for stress back-substitution.
    pub elements: Vec<ElementMatrices>,
    /// Material the system was assembled with.
    pub material: Material,
}

/// Discrete solution: nodal displacements plus per-element stress coefficients.
pub struct HybridSolution {
    /// Interleaved nodal displacements, `2 * n_vertices` entries.
    pub u: DVector<f64>,
    /// Stress coefficients `beta` for each element, in mesh element order.
    pub beta: Vec<SVector<f64, 5>>,
    /// Material the system was assembled with.
    pub material: Material,
    /// Relative residual of the condensed interior system.
    pub residual: f64,
}

impl HybridSolution {
    /// Displacement vector at vertex `v`.
    pub fn vertex_displacement(&self, v: usize) -> Vector2<f64> {
        Vector2::new(self.u[2 * v], self.u[2 * v + 1])
    }
}

/// Global dof index of component `comp` at vertex `v`.
#[inline]
pub fn dof(v: usize, comp: usize) -> usize {
    2 * v + comp
}

/// Assembles the global stiffness matrix and load vector.
pub fn assemble(
    mesh: &QuadMesh,
    material: &Material,
    body_force: &dyn Fn(f64, f64) -> Vector2<f64>,
    rule: &GaussRule,
) -> Result<AssembledSystem> {
    let n = 2 * mesh.n_vertices();
    let mut trips = Vec::with_capacity(64 * mesh.n_elements());
    let mut load = DVector::zeros(n);
    let mut elements = Vec::with_capacity(mesh.n_elements());

    for (k, quad) in mesh.quads().iter().enumerate() {
        let geom = mesh.geometry(k);
        let em = element_matrices(geom, material, body_force, rule)?;
        let dofs: Vec<usize> = quad.iter().flat_map(|&v| [dof(v, 0), dof(v, 1)]).collect();
        for (i, &gi) in dofs.iter().enumerate() {
            load[gi] += em.fe[i];
            for (j, &gj) in dofs.iter().enumerate() {
                trips.push((gj, gi, em.ke[(i, j)]));
            }
        }
        elements.push(em);
    }

    Ok(AssembledSystem {
        stiffness: csc_from_triplets(n, trips),
        load,
        elements,
        material: *material,
    })
}

/// Builds a CSC matrix from (col, row, value) triplets, summing duplicates.
///
/// The stable sort keeps duplicates of each cell in insertion order, so
/// mirror cells fed with bitwise-equal contributions in the same order (as
/// element scatter of symmetric blocks does) sum to bitwise-equal values and
/// the result is exactly symmetric.
fn csc_from_triplets(n: usize, mut trips: Vec<(usize, usize, f64)>) -> CscMatrix<f64> {
    trips.sort_by_key(|&(c, r, _)| (c, r));
    let mut offsets = Vec::with_capacity(n + 1);
    offsets.push(0);
    let mut rows = Vec::new();
    let mut vals = Vec::new();
    let mut i = 0;
    for col in 0..n {
        while i < trips.len() && trips[i].0 == col {
            let r = trips[i].1;
            let mut v = trips[i].2;
            i += 1;
            while i < trips.len() && trips[i].0 == col && trips[i].1 == r {
                v += trips[i].2;
                i += 1;
            }
            rows.push(r);
            vals.push(v);
        }
        offsets.push(rows.len());
    }
    CscMatrix::try_from_csc_data(n, n, offsets, rows, vals)
        .expect("sorted deduplicated triplets form valid CSC data")
}

/// Solves `K u = f` with Dirichlet data imposed on every boundary vertex,
/// then back-substitutes the element stress coefficients.
pub fn solve_dirichlet(
    mesh: &QuadMesh,
    system: &AssembledSystem,
    g: &DirichletData,
) -> Result<HybridSolution> {
    let n = 2 * mesh.n_vertices();
    assert_eq!(system.stiffness.nrows(), n, "system does not match mesh");

    // Lift the boundary data into a full-length vector.
    let mut u = DVector::zeros(n);
    let mut is_bc = vec![false; n];
    for v in 0..mesh.n_vertices() {
        if mesh.is_boundary_vertex(v) {
            let gval = g.eval(mesh.vertex(v));
            u[dof(v, 0)] = gval.x;
            u[dof(v, 1)] = gval.y;
            is_bc[dof(v, 0)] = true;
            is_bc[dof(v, 1)] = true;
        }
    }

    let free: Vec<usize> = (0..n).filter(|&i| !is_bc[i]).collect();
    let residual = if free.is_empty() {
        0.0
    } else {
        let mut new_of = vec![usize::MAX; n];
        for (new, &old) in free.iter().enumerate() {
            new_of[old] = new;
        }

        // Condensed right-hand side: f_i - K_ib u_b.
        let lifted = &system.load - &system.stiffness * &u;
        let mut rhs = DVector::zeros(free.len());
        for (new, &old) in free.iter().enumerate() {
            rhs[new] = lifted[old];
        }

        // Interior block in free-dof numbering.
        let mut trips = Vec::new();
        for (r, c, &v) in system.stiffness.triplet_iter() {
            if new_of[r] != usize::MAX && new_of[c] != usize::MAX {
                trips.push((new_of[c], new_of[r], v));
            }
        }
        let kii = csc_from_triplets(free.len(), trips);

        // Reverse Cuthill-McKee reordering to limit Cholesky fill.
        let order = reverse_cuthill_mckee(&csc_adjacency(&kii));
        let mut rank_of = vec![0usize; free.len()];
        for (rank, &old) in order.iter().enumerate() {
            rank_of[old] = rank;
        }
        let mut ptrips = Vec::with_capacity(kii.nnz());
        for (r, c, &v) in kii.triplet_iter() {
            ptrips.push((rank_of[c], rank_of[r], v));
        }
        let pk = csc_from_triplets(free.len(), ptrips);
        let mut prhs = DMatrix::zeros(free.len(), 1);
        for (rank, &old) in order.iter().enumerate() {
            prhs[(rank, 0)] = rhs[old];
        }

        let chol = CscCholesky::factor(&pk).map_err(|_| Error::StiffnessNotSpd)?;
        let px = chol.solve(&prhs);
        let mut x = DVector::zeros(free.len());
        for (rank, &old) in order.iter().enumerate() {
            x[old] = px[(rank, 0)];
        }

        let r = &kii * &x - &rhs;
        let rhs_norm = rhs.norm();
        for (new, &old) in free.iter().enumerate() {
            u[old] = x[new];
        }
        if rhs_norm > 0.0 {
            r.norm() / rhs_norm
        } else {
            r.norm()
        }
    };

    let beta = element_stresses(mesh, &system.elements, &u);
    Ok(HybridSolution {
        u,
        beta,
        material: system.material,
        residual,
    })
}

/// Back-substitutes `beta = H^-1 G u_e` on every element.
fn element_stresses(
    mesh: &QuadMesh,
    elements: &[ElementMatrices],
    u: &DVector<f64>,
) -> Vec<SVector<f64, 5>> {
    mesh.quads()
        .iter()
        .zip(elements)
        .map(|(quad, em)| {
            let mut ue = SVector::<f64, 8>::zeros();
            for (i, &v) in quad.iter().enumerate() {
                ue[2 * i] = u[dof(v, 0)];
                ue[2 * i + 1] = u[dof(v, 1)];
            }
            element_stress_from_displacement(em, &ue)
        })
        .collect()
}

/// Assembles and solves in one call.
pub fn solve(
    mesh: &QuadMesh,
    material: &Material,
    body_force: &dyn Fn(f64, f64) -> Vector2<f64>,
    g: &DirichletData,
    rule: &GaussRule,
) -> Result<HybridSolution> {
    let system = assemble(mesh, material, body_force, rule)?;
    solve_dirichlet(mesh, &system, g)
}

/// Undirected adjacency lists of the sparsity graph (diagonal dropped).
fn csc_adjacency(m: &CscMatrix<f64>) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); m.nrows()];
    for (r, c, _) in m.triplet_iter() {
        if r != c {
            adj[c].push(r);
        }
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }
    adj
}

/// Reverse Cuthill-McKee ordering; returns `order[rank] = vertex`.
///
/// Each connected component is swept breadth-first from a minimum-degree
/// vertex with neighbors visited in ascending degree, then the whole order is
/// reversed. Deterministic for a fixed graph.
fn reverse_cuthill_mckee(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut order = Vec::with_capacity(n);
    let mut visited = vec![false; n];
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&v| (adj[v].len(), v));

    for &seed in &by_degree {
        if visited[seed] {
            continue;
        }
        visited[seed] = true;
        let mut queue = std::collections::VecDeque::from([seed]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            next.sort_by_key(|&w| (adj[w].len(), w));
            for w in next {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}
