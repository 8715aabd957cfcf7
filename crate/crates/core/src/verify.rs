//! Numerical certification of the structural properties of the complex:
//! exactness, commutation with the interpolators, polynomial consistency and
//! stability constants.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::error::{DdrError, Result};
use crate::linalg::{numerical_rank, RankInfo, SparseMatrix};
use crate::mesh::{Mesh, Point};
use crate::operators::Discretization;
use crate::par::Execution;
use crate::scheme::ManufacturedSolution;
use crate::spaces::{BoundaryCondition, SpaceKind, SpaceLayout, Variant};

/// Relative singular value threshold for numerical ranks.
pub const RANK_TOLERANCE: f64 = 1e-9;
/// Minimum ratio between retained and discarded singular values.
pub const MIN_RANK_GAP: f64 = 10.0;

/// Bivariate polynomial `Σ c x^a y^b` with exact derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    pub terms: Vec<(i32, i32, f64)>,
}

impl Polynomial {
    /// Polynomial of total degree `degree` with coefficients uniform in [-1, 1].
    pub fn random(degree: usize, rng: &mut impl Rng) -> Self {
        let degree = degree as i32;
        let terms = (0..=degree)
            .flat_map(|m| (0..=m).map(move |b| (m - b, b)))
            .map(|(a, b)| (a, b, rng.random_range(-1.0..=1.0)))
            .collect();
        Polynomial { terms }
    }

    pub fn eval(&self, x: Point) -> f64 {
        self.terms.iter().map(|&(a, b, c)| c * x.x.powi(a) * x.y.powi(b)).sum()
    }

    pub fn dx(&self) -> Polynomial {
        Polynomial {
            terms: self
                .terms
                .iter()
                .filter(|t| t.0 > 0)
                .map(|&(a, b, c)| (a - 1, b, c * a as f64))
                .collect(),
        }
    }

    pub fn dy(&self) -> Polynomial {
        Polynomial {
            terms: self
                .terms
                .iter()
                .filter(|t| t.1 > 0)
                .map(|&(a, b, c)| (a, b - 1, c * b as f64))
                .collect(),
        }
    }
}

fn dense_block(m: &SparseMatrix, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    m.select(rows, cols).to_dense()
}

#[derive(Debug, Clone)]
pub struct ExactnessReport {
    pub mesh: String,
    pub k: usize,
    pub bc: BoundaryCondition,
    pub dim_v: usize,
    pub dim_sigma: usize,
    pub dim_w: usize,
    /// Dimension of the space `R̲` must map onto. With boundary conditions the
    /// element components of `R̲ v` integrate to zero over the domain, so the
    /// target is the zero-mean subspace of the tail space.
    pub dim_w_target: usize,
    pub rank_g: RankInfo,
    pub rank_r: RankInfo,
    pub nullity_g: usize,
    pub nullity_r: usize,
    pub expected_nullity_g: usize,
    /// Largest `|∫_Ω (R̲ v)_T|` over the columns of `R̲` relative to `max |R̲|`
    /// (boundary conditions only, zero otherwise).
    pub mean_defect: f64,
}

impl ExactnessReport {
    pub fn kernel_ok(&self) -> bool {
        self.nullity_g == self.expected_nullity_g
    }

    pub fn image_ok(&self) -> bool {
        self.rank_g.rank == self.nullity_r
    }

    pub fn surjective(&self) -> bool {
        self.rank_r.rank == self.dim_w_target
    }

    pub fn conclusive(&self) -> bool {
        self.rank_g.gap >= MIN_RANK_GAP && self.rank_r.gap >= MIN_RANK_GAP
    }

    pub fn passed(&self) -> bool {
        self.kernel_ok() && self.image_ok() && self.surjective() && self.conclusive() && self.mean_defect < 1e-10
    }
}

fn gap_str(g: f64) -> String {
    if g.is_infinite() {
        "inf".to_string()
    } else {
        format!("{g:.3e}")
    }
}

impl fmt::Display for ExactnessReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let flag = |b: bool| if b { "pass" } else { "FAIL" };
        writeln!(f, "mesh={} k={} bc={}", self.mesh, self.k, self.bc)?;
        writeln!(f, "dim_V={} dim_Sigma={} dim_W={} dim_W_target={}", self.dim_v, self.dim_sigma, self.dim_w, self.dim_w_target)?;
        writeln!(
            f,
            "rank_G={} nullity_G={} (expected {}) gap_G={}",
            self.rank_g.rank,
            self.nullity_g,
            self.expected_nullity_g,
            gap_str(self.rank_g.gap)
        )?;
        writeln!(
            f,
            "rank_R={} nullity_R={} gap_R={} threshold={:e}",
            self.rank_r.rank,
            self.nullity_r,
            gap_str(self.rank_r.gap),
            RANK_TOLERANCE
        )?;
        writeln!(f, "mean_defect={:.3e}", self.mean_defect)?;
        writeln!(f, "kernel={}", flag(self.kernel_ok()))?;
        writeln!(f, "image_equals_kernel={}", flag(self.image_ok()))?;
        writeln!(f, "surjective={}", flag(self.surjective()))?;
        write!(f, "conclusive={}", flag(self.conclusive()))
    }
}

/// Ranks of the global gradient and rotor.
pub fn check_exactness(mesh: &Mesh, label: &str, k: usize, bc: BoundaryCondition, exec: Execution) -> Result<ExactnessReport> {
    let d = Discretization::new(mesh.clone(), k, exec)?;
    let sel = |kind| SpaceLayout::new(mesh, kind, k, bc, Variant::Full).full_indices(mesh);
    let (iv, is, iw) = (sel(SpaceKind::V), sel(SpaceKind::Sigma), sel(SpaceKind::W));
    let g = dense_block(&d.global_gradient(), &is, &iv);
    let r = dense_block(&d.global_rotor(), &iw, &is);
    let rank_g = numerical_rank(&g, RANK_TOLERANCE);
    let rank_r = numerical_rank(&r, RANK_TOLERANCE);
    let (dim_w_target, expected_nullity_g, mean_defect) = match bc {
        BoundaryCondition::None => (iw.len(), 1, 0.0),
        BoundaryCondition::Homogeneous => {
            // ∫_T of the orthonormal frame: only the constant member integrates to a nonzero value
            let mut mean = DVector::zeros(iw.len());
            for (t, el) in mesh.elements.iter().enumerate() {
                let row = d.w.element_offset(t);
                let pos = iw.binary_search(&row).expect("element unknowns are kept");
                mean[pos] = el.area.sqrt();
            }
            let defect = (r.transpose() * mean).amax() / r.amax().max(f64::MIN_POSITIVE);
            (iw.len() - 1, 0, defect)
        }
    };
    Ok(ExactnessReport {
        mesh: label.to_string(),
        k,
        bc,
        dim_v: iv.len(),
        dim_sigma: is.len(),
        dim_w: iw.len(),
        dim_w_target,
        nullity_g: iv.len() - rank_g.rank,
        nullity_r: is.len() - rank_r.rank,
        rank_g,
        rank_r,
        expected_nullity_g,
        mean_defect,
    })
}

/// Families of test fields for the commutation check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum FieldSuite {
    /// Random polynomials of degree `k + 1`.
    Polynomial,
    /// The smooth fields of the manufactured solution.
    Trigonometric,
}

#[derive(Debug, Clone)]
pub struct CommutationReport {
    pub field: String,
    /// `|||G̲ I_V q - I_Σ ∇q|||_Σ`
    pub gradient_residual: f64,
    /// `|||R̲ I_Σ v - I_W rot v|||_W`
    pub rotor_residual: f64,
}

impl fmt::Display for CommutationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "field={} gradient_residual={:.3e} rotor_residual={:.3e}",
            self.field, self.gradient_residual, self.rotor_residual
        )
    }
}

fn weighted_norm(x: &DVector<f64>, w: &DVector<f64>) -> f64 {
    x.iter().zip(w.iter()).map(|(a, b)| a * a * b).sum::<f64>().sqrt()
}

/// Commutation residuals of the interpolators with the discrete operators.
pub fn check_commutation(d: &Discretization, suite: FieldSuite, seed: u64) -> Vec<CommutationReport> {
    let g = d.global_gradient();
    let r = d.global_rotor();
    let ws = d.component_weights(SpaceKind::Sigma);
    let ww = d.component_weights(SpaceKind::W);
    let grad_res = |q: &(dyn Fn(Point) -> f64 + Sync), gq: &(dyn Fn(Point) -> [f64; 2] + Sync)| {
        let lhs = g.mul_vec(&d.interpolate_v(q));
        weighted_norm(&(lhs - d.interpolate_sigma(gq, |_| 0.0)), &ws)
    };
    let rot_res = |v: &(dyn Fn(Point) -> [f64; 2] + Sync), rv: &(dyn Fn(Point) -> f64 + Sync)| {
        let lhs = r.mul_vec(&d.interpolate_sigma(v, rv));
        weighted_norm(&(lhs - d.interpolate_w(rv)), &ww)
    };
    let mut out = Vec::new();
    match suite {
        FieldSuite::Polynomial => {
            let mut rng = StdRng::seed_from_u64(seed);
            for i in 0..3 {
                let q = Polynomial::random(d.k + 1, &mut rng);
                let (qx, qy) = (q.dx(), q.dy());
                let a = Polynomial::random(d.k + 1, &mut rng);
                let b = Polynomial::random(d.k + 1, &mut rng);
                let (ay, bx) = (a.dy(), b.dx());
                out.push(CommutationReport {
                    field: format!("polynomial-{i}"),
                    gradient_residual: grad_res(&|x| q.eval(x), &|x| [qx.eval(x), qy.eval(x)]),
                    rotor_residual: rot_res(&|x| [a.eval(x), b.eval(x)], &|x| bx.eval(x) - ay.eval(x)),
                });
            }
        }
        FieldSuite::Trigonometric => {
            let m = ManufacturedSolution;
            out.push(CommutationReport {
                field: "pressure/velocity".into(),
                gradient_residual: grad_res(&|x| m.p(x), &|x| m.grad_p(x)),
                rotor_residual: rot_res(&|x| m.u(x), &|x| m.rot_u(x)),
            });
            // a curl-free field: the rotor residual reduces to |||R̲ I_Σ ∇p|||
            out.push(CommutationReport {
                field: "gradient-field".into(),
                gradient_residual: grad_res(&|x| m.rot_u(x), &|x| {
                    let s = -2.0 * std::f64::consts::PI.powi(2) * (std::f64::consts::PI * (x.x + x.y)).sin();
                    [s, s]
                }),
                rotor_residual: rot_res(&|x| m.grad_p(x), &|_| 0.0),
            });
        }
    }
    out
}

/// Largest relative L² errors of the reconstructions applied to interpolates
/// of random polynomials of the degree they must reproduce.
#[derive(Debug, Clone, Default)]
pub struct ConsistencyReport {
    pub entries: Vec<(&'static str, f64)>,
}

impl ConsistencyReport {
    pub fn max_error(&self) -> f64 {
        self.entries.iter().map(|e| e.1).fold(0.0, f64::max)
    }
}

impl fmt::Display for ConsistencyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (name, e)) in self.entries.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{name:<16} {e:.3e}")?;
        }
        Ok(())
    }
}

fn rel(err2: f64, ref2: f64) -> f64 {
    (err2 / ref2.max(f64::MIN_POSITIVE)).sqrt()
}

/// Polynomial consistency of every reconstruction: gradients and rotors of
/// degree-`k+1` data, potentials of degree `k+1` (degree `k` for the vector
/// potential).
pub fn check_consistency(d: &Discretization, seed: u64) -> ConsistencyReport {
    let mut rng = StdRng::seed_from_u64(seed);
    let k = d.k;
    let q = Polynomial::random(k + 1, &mut rng);
    let (qx, qy) = (q.dx(), q.dy());
    let a = Polynomial::random(k + 1, &mut rng);
    let b = Polynomial::random(k + 1, &mut rng);
    let rot_ab = |x: Point| b.dx().eval(x) - a.dy().eval(x);
    let a0 = Polynomial::random(k, &mut rng);
    let b0 = Polynomial::random(k, &mut rng);
    let (a0y, b0x) = (a0.dy(), b0.dx());

    let iq = d.interpolate_v(|x| q.eval(x));
    let iw = d.interpolate_w(|x| q.eval(x));
    let iv = d.interpolate_sigma(|x| [a.eval(x), b.eval(x)], rot_ab);
    let iv0 = d.interpolate_sigma(|x| [a0.eval(x), b0.eval(x)], |x| b0x.eval(x) - a0y.eval(x));

    let names = ["G_T", "P_V,T", "R_T", "P_Sigma,T", "vector R_T", "P_W,T", "P_E", "G_E"];
    let mut worst = [0.0f64; 8];
    for op in &d.elements {
        let t = op.element;
        let w = &op.polys.rule.weights;
        let pts = &op.polys.rule.points;
        let tv = op.polys.tabulate(&op.bases.vector);
        let ts = op.polys.tabulate(&op.bases.scalar);
        let dk = op.rotor.nrows();
        let lv = d.v.gather(&d.mesh, t, &iq);
        let lw = d.w.gather(&d.mesh, t, &iw);
        let ls = d.sigma.gather(&d.mesh, t, &iv);
        let ls0 = d.sigma.gather(&d.mesh, t, &iv0);
        let l2 = |vals: &[DVector<f64>], exact: &dyn Fn(Point) -> [f64; 2]| {
            let (mut e2, mut r2) = (0.0, 0.0);
            for (i, (x, wi)) in pts.iter().zip(w).enumerate() {
                let ex = exact(*x);
                for (c, v) in vals.iter().enumerate() {
                    e2 += wi * (v[i] - ex[c]).powi(2);
                    r2 += wi * ex[c].powi(2);
                }
            }
            rel(e2, r2)
        };
        let vec_vals = |coef: DVector<f64>| [&tv.val[0] * &coef, &tv.val[1] * &coef];
        let errs = [
            l2(&vec_vals(&op.gradient * &lv), &|x| [qx.eval(x), qy.eval(x)]),
            l2(&[&ts.val[0] * (&op.potential_v * &lv)], &|x| [q.eval(x), 0.0]),
            l2(&[ts.val[0].columns(0, dk) * (&op.rotor * &ls)], &|x| [rot_ab(x), 0.0]),
            l2(&vec_vals(&op.potential_sigma * &ls0), &|x| [a0.eval(x), b0.eval(x)]),
            l2(&vec_vals(&op.vector_rotor * &lw), &|x| [qy.eval(x), -qx.eval(x)]),
            l2(&[&ts.val[0] * (&op.potential_w * &lw)], &|x| [q.eval(x), 0.0]),
        ];
        for (w, e) in worst.iter_mut().zip(errs) {
            *w = w.max(e);
        }
    }
    for (e, op) in d.edges.iter().enumerate() {
        let edge = &d.mesh.edges[e];
        let o = d.v.edge_offset(e).unwrap();
        let mut local: Vec<f64> = (o..o + k).map(|i| iq[i]).collect();
        local.extend(edge.vertices.iter().map(|&v| iq[d.v.vertex_offset(v).unwrap()]));
        let local = DVector::from_vec(local);
        let pts = &op.polys.rule.points;
        let w = &op.polys.rule.weights;
        let trace = op.potential_values() * &local;
        let deriv = op.polys.values.columns(0, k + 1) * (&op.gradient * &local);
        let t = edge.tangent;
        let (mut e2, mut r2, mut g2, mut gr2) = (0.0, 0.0, 0.0, 0.0);
        for (i, (x, wi)) in pts.iter().zip(w).enumerate() {
            let dq = qx.eval(*x) * t.x + qy.eval(*x) * t.y;
            e2 += wi * (trace[i] - q.eval(*x)).powi(2);
            r2 += wi * q.eval(*x).powi(2);
            g2 += wi * (deriv[i] - dq).powi(2);
            gr2 += wi * dq * dq;
        }
        worst[6] = worst[6].max(rel(e2, r2));
        if gr2 > 1e-20 {
            worst[7] = worst[7].max(rel(g2, gr2));
        }
    }
    ConsistencyReport {
        entries: names.into_iter().zip(worst).collect(),
    }
}

#[derive(Debug, Clone)]
pub struct StabilityReport {
    pub mesh: String,
    pub k: usize,
    /// Smallest eigenvalue of `|||G̲ q|||²_Σ / |||q|||²_V` on `V_{h,0}`, with
    /// the discrete L² product on Σ in the numerator.
    pub lambda_p: f64,
    /// Smallest singular value of the saddle-point matrix in the graph norm.
    pub gamma_h: f64,
    /// Range of `‖v‖_Σ / |||v|||_Σ` over random vectors.
    pub norm_ratio: (f64, f64),
}

impl fmt::Display for StabilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "mesh={} k={} lambda_P={:.6e} gamma_h={:.6e} norm_ratio=[{:.4}, {:.4}]",
            self.mesh, self.k, self.lambda_p, self.gamma_h, self.norm_ratio.0, self.norm_ratio.1
        )
    }
}

fn diag_scaled(m: &DMatrix<f64>, d: &DVector<f64>) -> DMatrix<f64> {
    let s = d.map(|x| 1.0 / x.sqrt());
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * s[i] * s[j])
}

/// Poincaré eigenvalue, inf-sup constant and norm-equivalence bracket.
pub fn estimate_stability(d: &Discretization, label: &str, seed: u64) -> Result<StabilityReport> {
    let mesh = &d.mesh;
    let k = d.k;
    let sel = |kind| SpaceLayout::new(mesh, kind, k, BoundaryCondition::Homogeneous, Variant::Full).full_indices(mesh);
    let (iv, is) = (sel(SpaceKind::V), sel(SpaceKind::Sigma));
    let g = dense_block(&d.global_gradient(), &is, &iv);
    let m = dense_block(&d.sigma_product(), &is, &is);
    let a = dense_block(&d.rotrot_matrix(), &is, &is);
    let dv_full = d.component_weights(SpaceKind::V);
    let ds_full = d.component_weights(SpaceKind::Sigma);
    let dv = DVector::from_iterator(iv.len(), iv.iter().map(|&i| dv_full[i]));
    let ds = DVector::from_iterator(is.len(), is.iter().map(|&i| ds_full[i]));

    let k_mat = g.transpose() * &m * &g;
    let eig = crate::linalg::symmetrize(&diag_scaled(&k_mat, &dv)).symmetric_eigenvalues();
    let lambda_p = eig.min();

    let (ns, nv) = (is.len(), iv.len());
    let b = &m * &g;
    let mut s = DMatrix::zeros(ns + nv, ns + nv);
    s.view_mut((0, 0), (ns, ns)).copy_from(&a);
    s.view_mut((0, ns), (ns, nv)).copy_from(&b);
    s.view_mut((ns, 0), (nv, ns)).copy_from(&(-b.transpose()));
    let mut n = DMatrix::zeros(ns + nv, ns + nv);
    n.view_mut((0, 0), (ns, ns)).copy_from(&(DMatrix::from_diagonal(&ds) + &a));
    n.view_mut((ns, ns), (nv, nv))
        .copy_from(&(DMatrix::from_diagonal(&dv) + g.transpose() * DMatrix::from_diagonal(&ds) * &g));
    let chol = crate::linalg::symmetrize(&n)
        .cholesky()
        .ok_or_else(|| DdrError::SingularGram("graph norm".into()))?;
    let l = chol.l();
    let x = l
        .solve_lower_triangular(&s)
        .ok_or_else(|| DdrError::SingularGram("graph norm".into()))?;
    let x = l
        .solve_lower_triangular(&x.transpose())
        .ok_or_else(|| DdrError::SingularGram("graph norm".into()))?
        .transpose();
    let sv = x
        .try_svd(false, false, 1e-14, 10_000)
        .ok_or_else(|| DdrError::Eigen("singular values of the saddle-point matrix".into()))?
        .singular_values;
    let gamma_h = sv.min();

    let msig = d.sigma_product();
    let mut rng = StdRng::seed_from_u64(seed);
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for _ in 0..200 {
        let v = DVector::from_fn(ds_full.len(), |_, _| rng.random_range(-1.0..=1.0));
        let ratio = (v.dot(&msig.mul_vec(&v)) / v.iter().zip(ds_full.iter()).map(|(x, w)| x * x * w).sum::<f64>()).sqrt();
        lo = lo.min(ratio);
        hi = hi.max(ratio);
    }
    Ok(StabilityReport {
        mesh: label.to_string(),
        k,
        lambda_p,
        gamma_h,
        norm_ratio: (lo, hi),
    })
}
