//! Saddle-point scheme for the quad-rot problem and convergence studies.

use std::f64::consts::PI;
use std::fmt::Write as _;

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Par};
use nalgebra::DVector;

use crate::error::{DdrError, Result};
use crate::linalg::{SparseMatrix, TripletBuilder};
use crate::mesh::{build_structured_mesh, Mesh, MeshFamily, Point};
use crate::operators::Discretization;
use crate::par::{map_indexed, Execution};
use crate::quadrature::element_rule;
use crate::spaces::{BoundaryCondition, SpaceKind, SpaceLayout, Variant};

/// Relative residual required from the linear solve.
pub const SOLVE_TOLERANCE: f64 = 1e-10;

/// Default degree of the rule used for the load term.
pub fn load_degree(k: usize) -> usize {
    (2 * k + 6).max(12)
}

/// Smooth solution of the quad-rot problem on the unit square with its data.
#[derive(Debug, Clone, Copy, Default)]
pub struct ManufacturedSolution;

impl ManufacturedSolution {
    pub fn u(&self, x: Point) -> [f64; 2] {
        let s = (PI * (x.x + x.y)).sin();
        [-s, s]
    }

    pub fn rot_u(&self, x: Point) -> f64 {
        2.0 * PI * (PI * (x.x + x.y)).cos()
    }

    pub fn p(&self, x: Point) -> f64 {
        (PI * x.x).sin() * (PI * x.y).sin()
    }

    pub fn grad_p(&self, x: Point) -> [f64; 2] {
        [
            PI * (PI * x.x).cos() * (PI * x.y).sin(),
            PI * (PI * x.x).sin() * (PI * x.y).cos(),
        ]
    }

    pub fn f(&self, x: Point) -> [f64; 2] {
        let s = 4.0 * PI.powi(4) * (PI * (x.x + x.y)).sin();
        let g = self.grad_p(x);
        [-s + g[0], s + g[1]]
    }
}

/// Linear system `[[A, B], [-Bᵀ, 0]] (u, p) = rhs` on the unknowns without
/// boundary blocks.
#[derive(Debug, Clone)]
pub struct SaddleSystem {
    pub matrix: SparseMatrix,
    pub rhs: DVector<f64>,
    /// Free Σ unknowns, as indices into the full Σ layout.
    pub sigma_free: Vec<usize>,
    /// Free V unknowns, as indices into the full V layout.
    pub v_free: Vec<usize>,
    /// Full Σ vector holding the prescribed boundary values (zero elsewhere).
    pub sigma_lifting: DVector<f64>,
    /// `B = (M_Σ G̲)` restricted to the free unknowns.
    pub b: SparseMatrix,
}

/// Load vector `∫ f · P_Σ v` for every Σ unknown.
pub fn load_vector(d: &Discretization, f: &(dyn Fn(Point) -> [f64; 2] + Sync), degree: usize) -> DVector<f64> {
    let mesh = &d.mesh;
    let locals = map_indexed(d.exec, mesh.num_elements(), |t| {
        let op = &d.elements[t];
        let rule = element_rule(mesh, &mesh.elements[t], degree);
        let tab = op.polys.tabulate_at(&op.bases.vector, &rule.points);
        let mut moments = DVector::zeros(op.bases.vector.dim());
        for (q, (&x, &w)) in rule.points.iter().zip(&rule.weights).enumerate() {
            let fx = f(x);
            for (c, fc) in fx.iter().enumerate() {
                moments.axpy(w * fc, &tab.val[c].row(q).transpose(), 1.0);
            }
        }
        op.potential_sigma.transpose() * moments
    });
    let mut out = DVector::zeros(d.sigma.ndofs());
    for (t, local) in locals.iter().enumerate() {
        for (i, g) in d.l2g(SpaceKind::Sigma, t).iter().enumerate() {
            out[g.unwrap()] += local[i];
        }
    }
    out
}

/// Assembles the scheme. `boundary` gives the full Σ vector whose boundary
/// unknowns are imposed (tangential traces and rotors); `None` imposes zero.
pub fn assemble(
    d: &Discretization,
    f: &(dyn Fn(Point) -> [f64; 2] + Sync),
    boundary: Option<&DVector<f64>>,
    load_quad_degree: usize,
) -> SaddleSystem {
    let mesh = &d.mesh;
    let free = |kind| SpaceLayout::new(mesh, kind, d.k, BoundaryCondition::Homogeneous, Variant::Full).full_indices(mesh);
    let sigma_free = free(SpaceKind::Sigma);
    let v_free = free(SpaceKind::V);
    let ns = d.sigma.ndofs();
    let mut is_free = vec![false; ns];
    for &i in &sigma_free {
        is_free[i] = true;
    }
    let sigma_fixed: Vec<usize> = (0..ns).filter(|&i| !is_free[i]).collect();
    let mut lifting = DVector::zeros(ns);
    if let Some(bv) = boundary {
        for &i in &sigma_fixed {
            lifting[i] = bv[i];
        }
    }

    let a_full = d.rotrot_matrix();
    let b_full = d.mixed_matrix();
    let a = a_full.select(&sigma_free, &sigma_free);
    let b = b_full.select(&sigma_free, &v_free);
    let (nsf, nvf) = (sigma_free.len(), v_free.len());

    let mut builder = TripletBuilder::new(nsf + nvf, nsf + nvf);
    for (i, j, v) in a.iter() {
        builder.push(i, j, v);
    }
    for (i, j, v) in b.iter() {
        builder.push(i, nsf + j, v);
        builder.push(nsf + j, i, -v);
    }
    let matrix = builder.build();

    let load = load_vector(d, f, load_quad_degree);
    let a_lift = a_full.mul_vec(&lifting);
    let b_lift = b_full.tr_mul_vec(&lifting);
    let mut rhs = DVector::zeros(nsf + nvf);
    for (r, &i) in sigma_free.iter().enumerate() {
        rhs[r] = load[i] - a_lift[i];
    }
    for (r, &j) in v_free.iter().enumerate() {
        rhs[nsf + r] = b_lift[j];
    }
    SaddleSystem {
        matrix,
        rhs,
        sigma_free,
        v_free,
        sigma_lifting: lifting,
        b,
    }
}

/// Sparse LU solve with a residual check and iterative refinement.
pub fn sparse_solve(m: &SparseMatrix, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let n = m.nrows();
    if n == 0 {
        return Ok(DVector::zeros(0));
    }
    let triplets: Vec<Triplet<usize, usize, f64>> = m.iter().map(|(i, j, v)| Triplet::new(i, j, v)).collect();
    let csc = SparseColMat::<usize, f64>::try_new_from_triplets(n, m.ncols(), &triplets)
        .map_err(|e| DdrError::Solver(format!("matrix construction: {e:?}")))?;
    // sequential factorisation keeps the result independent of the thread count
    faer::set_global_parallelism(Par::Seq);
    let lu = csc
        .sp_lu()
        .map_err(|e| DdrError::Solver(format!("sparse LU failed: {e:?}")))?;
    let solve = |b: &DVector<f64>| {
        let mut x = Mat::from_fn(n, 1, |i, _| b[i]);
        lu.solve_in_place(x.as_mut());
        DVector::from_fn(n, |i, _| x[(i, 0)])
    };
    let norm_b = rhs.norm();
    let mut x = solve(rhs);
    let mut residual = rhs - m.mul_vec(&x);
    for _ in 0..3 {
        if residual.norm() <= SOLVE_TOLERANCE * norm_b {
            break;
        }
        x += solve(&residual);
        residual = rhs - m.mul_vec(&x);
    }
    let rel = if norm_b > 0.0 { residual.norm() / norm_b } else { residual.norm() };
    if rel.is_nan() || rel > SOLVE_TOLERANCE {
        return Err(DdrError::Solver(format!("relative residual {rel:.3e} above {SOLVE_TOLERANCE:e}")));
    }
    Ok(x)
}

/// Discrete solution on the full layouts (boundary values included).
#[derive(Debug, Clone)]
pub struct Solution {
    pub u: DVector<f64>,
    pub p: DVector<f64>,
    /// `‖B u_h‖ / ‖u_h‖` on the free unknowns.
    pub divergence_defect: f64,
}

pub fn solve(d: &Discretization, sys: &SaddleSystem) -> Result<Solution> {
    let x = sparse_solve(&sys.matrix, &sys.rhs)?;
    let nsf = sys.sigma_free.len();
    let mut u = sys.sigma_lifting.clone();
    for (r, &i) in sys.sigma_free.iter().enumerate() {
        u[i] = x[r];
    }
    let mut p = DVector::zeros(d.v.ndofs());
    for (r, &j) in sys.v_free.iter().enumerate() {
        p[j] = x[nsf + r];
    }
    // full constraint including the lifted boundary values
    let bu = d.mixed_matrix().tr_mul_vec(&u);
    let bu_free = DVector::from_iterator(sys.v_free.len(), sys.v_free.iter().map(|&j| bu[j]));
    let divergence_defect = bu_free.norm() / u.norm().max(f64::MIN_POSITIVE);
    Ok(Solution {
        u,
        p,
        divergence_defect,
    })
}

/// Errors against the interpolates of the exact solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorRecord {
    pub mesh_size: f64,
    pub err_u_l2: f64,
    pub err_u_rotrot: f64,
    pub err_p_l2: f64,
    pub err_p_grad: f64,
}

impl ErrorRecord {
    pub fn values(&self) -> [f64; 4] {
        [self.err_u_l2, self.err_u_rotrot, self.err_p_l2, self.err_p_grad]
    }
}

fn quad_form(m: &SparseMatrix, x: &DVector<f64>) -> f64 {
    x.dot(&m.mul_vec(x)).max(0.0).sqrt()
}

pub fn error_report(d: &Discretization, u_h: &DVector<f64>, p_h: &DVector<f64>, exact_u: &DVector<f64>, exact_p: &DVector<f64>) -> ErrorRecord {
    let eu = u_h - exact_u;
    let ep = p_h - exact_p;
    let m = d.sigma_product();
    let gep = d.global_gradient().mul_vec(&ep);
    ErrorRecord {
        mesh_size: d.mesh.h,
        err_u_l2: quad_form(&m, &eu),
        err_u_rotrot: quad_form(&d.rotrot_matrix(), &eu),
        err_p_l2: quad_form(&d.v_product(), &ep),
        err_p_grad: quad_form(&m, &gep),
    }
}

/// Solves the manufactured problem on `mesh` and measures the errors.
pub fn solve_manufactured(mesh: Mesh, k: usize, exec: Execution, load_quad_degree: Option<usize>) -> Result<(ErrorRecord, Solution)> {
    let d = Discretization::new(mesh, k, exec)?;
    let m = ManufacturedSolution;
    let iu = d.interpolate_sigma(|x| m.u(x), |x| m.rot_u(x));
    let ip = d.interpolate_v(|x| m.p(x));
    let sys = assemble(&d, &|x| m.f(x), Some(&iu), load_quad_degree.unwrap_or(load_degree(k)));
    let sol = solve(&d, &sys)?;
    let rec = error_report(&d, &sol.u, &sol.p, &iu, &ip);
    Ok((rec, sol))
}

/// Errors of the manufactured problem on a sequence of structured meshes.
pub fn convergence_study(
    family: MeshFamily,
    k: usize,
    ns: &[usize],
    exec: Execution,
    load_quad_degree: Option<usize>,
) -> Result<Vec<ErrorRecord>> {
    ns.iter()
        .map(|&n| {
            let mesh = build_structured_mesh(family, n)?;
            let (rec, sol) = solve_manufactured(mesh, k, exec, load_quad_degree)?;
            log::info!(
                "{family} n={n} k={k}: h={:.4e} errors={:?} divergence={:.2e}",
                rec.mesh_size,
                rec.values(),
                sol.divergence_defect
            );
            Ok(rec)
        })
        .collect()
}

/// Observed rates between consecutive records.
pub fn rates(records: &[ErrorRecord]) -> Vec<[f64; 4]> {
    records
        .windows(2)
        .map(|w| {
            let dh = (w[0].mesh_size / w[1].mesh_size).ln();
            let (a, b) = (w[0].values(), w[1].values());
            std::array::from_fn(|i| (a[i] / b[i]).ln() / dh)
        })
        .collect()
}

pub const CSV_HEADER: &str = "MeshSize,ErrUL2,ErrURotRot,ErrPL2,ErrPGrad";

pub fn format_csv(records: &[ErrorRecord]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in records {
        let _ = writeln!(
            s,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.mesh_size, r.err_u_l2, r.err_u_rotrot, r.err_p_l2, r.err_p_grad
        );
    }
    s
}

pub fn format_rates(records: &[ErrorRecord]) -> String {
    let mut s = String::from("MeshSizeFrom,MeshSizeTo,RateUL2,RateURotRot,RatePL2,RatePGrad\n");
    for (w, r) in records.windows(2).zip(rates(records)) {
        let _ = writeln!(
            s,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            w[0].mesh_size, w[1].mesh_size, r[0], r[1], r[2], r[3]
        );
    }
    s
}
