//! Numerical engine on flat tori 𝕋ⁿ, n ∈ {1,2,3}.
//!
//! Vector fields with smooth (possibly flat) coefficients are sampled on a
//! periodic grid with N nodes per axis (N a power of two, spacing
//! h = 2π/N). Each field X_j becomes a centered first-difference operator
//! D_j, and the sum-of-squares operator is assembled as
//!
//! ```text
//! P = Σ_j D_jᵀ R D_j,     R = diag(ρ(p)·hⁿ)
//! ```
//!
//! which is symmetric positive semidefinite entry-for-entry by
//! construction, and whose quadratic form is the discretized Dirichlet
//! energy E(f) = Σ_j ‖D_j f‖²_R. Eigenvalues are always reported for the
//! generalized pair (P, M) with mass matrix M = R, so they approximate the
//! continuum spectrum directly and are invariant under scaling the
//! density by a positive constant.
//!
//! The low spectrum is probed with shift-invert Lanczos (shift σ = −1,
//! inner solves by Jacobi-preconditioned conjugate gradients, full
//! reorthogonalization, restarts with deflation to resolve
//! multiplicities).

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::smooth::{SmoothExpr, SmoothVectorField};

/// Periodic grid on the torus of circumference 2π per axis.
#[derive(Debug, Clone)]
pub struct TorusGrid {
    /// dimension, 1–3
    pub n: usize,
    /// nodes per axis (power of two)
    pub n_axis: usize,
    /// spacing 2π/N
    pub h: f64,
    /// total node count Nⁿ
    pub total: usize,
}

impl TorusGrid {
    pub fn new(n: usize, n_axis: usize) -> Result<Self> {
        if !(1..=3).contains(&n) {
            return Err(Error::Config(format!("torus dimension must be 1-3, got {n}")));
        }
        if n_axis < 4 || !n_axis.is_power_of_two() {
            return Err(Error::Config(format!(
                "grid size must be a power of two >= 4, got {n_axis}"
            )));
        }
        let h = 2.0 * std::f64::consts::PI / n_axis as f64;
        Ok(TorusGrid {
            n,
            n_axis,
            h,
            total: n_axis.pow(n as u32),
        })
    }

    /// Lexicographic index -> per-axis indices.
    pub fn decompose(&self, idx: usize) -> [usize; 3] {
        let mut out = [0usize; 3];
        let mut rem = idx;
        for ax in (0..self.n).rev() {
            out[ax] = rem % self.n_axis;
            rem /= self.n_axis;
        }
        out
    }

    /// Per-axis indices -> lexicographic index.
    pub fn compose(&self, iv: &[usize]) -> usize {
        let mut idx = 0;
        for ax in 0..self.n {
            idx = idx * self.n_axis + (iv[ax] % self.n_axis);
        }
        idx
    }

    /// Coordinates of a node: x_i = h · index_i.
    pub fn coords(&self, idx: usize) -> Vec<f64> {
        let iv = self.decompose(idx);
        (0..self.n).map(|ax| self.h * iv[ax] as f64).collect()
    }

    /// Neighbor index with periodic wrap; `step` is ±1.
    pub fn shift(&self, idx: usize, axis: usize, step: i64) -> usize {
        let mut iv = self.decompose(idx);
        let m = self.n_axis as i64;
        iv[axis] = ((iv[axis] as i64 + step).rem_euclid(m)) as usize;
        self.compose(&iv[..self.n])
    }

    /// Wrap a coordinate into (−π, π] (signed distance from 0 on the circle).
    pub fn wrap(x: f64) -> f64 {
        let two_pi = 2.0 * std::f64::consts::PI;
        let mut y = x % two_pi;
        if y > std::f64::consts::PI {
            y -= two_pi;
        } else if y <= -std::f64::consts::PI {
            y += two_pi;
        }
        y
    }

    /// Flat-torus distance between two nodes.
    pub fn node_distance(&self, a: usize, b: usize) -> f64 {
        let pa = self.coords(a);
        let pb = self.coords(b);
        let mut s = 0.0;
        for i in 0..self.n {
            let d = Self::wrap(pa[i] - pb[i]);
            s += d * d;
        }
        s.sqrt()
    }
}

/// Sparse symmetric operator P = Σ_j D_jᵀ R D_j, plus the diagonal mass
/// matrix M = R and the individual difference operators (retained so the
/// quadratic-form identity can be checked independently).
#[derive(Debug, Clone)]
pub struct SparseSymOperator {
    pub dim: usize,
    /// CSR-like rows: sorted (column, value) pairs.
    pub rows: Vec<Vec<(usize, f64)>>,
    /// diagonal mass weights ρ(p)·hⁿ
    pub mass: Vec<f64>,
    /// per-field difference operators D_j as sparse rows
    pub d_ops: Vec<Vec<Vec<(usize, f64)>>>,
    pub assembled_as: String,
}

impl SparseSymOperator {
    /// Apply P in the factored form Σ_j D_jᵀ R (D_j f). This keeps
    /// constants in the kernel exactly: D_j annihilates them with exact
    /// floating-point cancellation, which the pre-multiplied entry table
    /// cannot guarantee.
    pub fn matvec(&self, f: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for d in &self.d_ops {
            for (p, row) in d.iter().enumerate() {
                let mut acc = 0.0;
                for &(j, v) in row {
                    acc += v * f[j];
                }
                let w = self.mass[p] * acc;
                if w != 0.0 {
                    for &(j, v) in row {
                        out[j] += v * w;
                    }
                }
            }
        }
    }

    /// Apply P through the assembled symmetric entry table (used by
    /// tests to confirm both applications agree).
    pub fn matvec_assembled(&self, f: &[f64], out: &mut [f64]) {
        for (i, row) in self.rows.iter().enumerate() {
            let mut acc = 0.0;
            for &(j, v) in row {
                acc += v * f[j];
            }
            out[i] = acc;
        }
    }

    /// fᵀ P f — the discrete Dirichlet energy E(f).
    pub fn quadratic_form(&self, f: &[f64]) -> f64 {
        let mut pf = vec![0.0; self.dim];
        self.matvec(f, &mut pf);
        dot(f, &pf)
    }

    /// Σ_j ‖D_j f‖²_R computed from the stored difference operators;
    /// equals `quadratic_form` up to rounding.
    pub fn sum_of_squares_form(&self, f: &[f64]) -> f64 {
        let mut total = 0.0;
        for d in &self.d_ops {
            for (p, row) in d.iter().enumerate() {
                let mut acc = 0.0;
                for &(j, v) in row {
                    acc += v * f[j];
                }
                total += self.mass[p] * acc * acc;
            }
        }
        total
    }

    /// Mass-weighted squared L² norm Σ_p m_p f_p².
    pub fn l2_norm_sq(&self, f: &[f64]) -> f64 {
        f.iter().zip(&self.mass).map(|(x, m)| m * x * x).sum()
    }

    /// Max row sum of absolute values.
    pub fn inf_norm(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.iter().map(|&(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Exact entrywise symmetry check (used by tests; assembly guarantees it).
    pub fn is_symmetric(&self) -> bool {
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                let vt = self.rows[j]
                    .iter()
                    .find(|&&(k, _)| k == i)
                    .map(|&(_, v)| v);
                if vt != Some(v) {
                    return false;
                }
            }
        }
        true
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Assemble the sum-of-squares operator for the given fields.
///
/// D_j f at node p is Σ_k b_{jk}(p)·(f(p+e_k) − f(p−e_k))/(2h) with
/// periodic wrap; the density defaults to 1 and must be positive.
pub fn assemble_operator(
    fields: &[SmoothVectorField],
    grid: &TorusGrid,
    density: Option<&SmoothExpr>,
) -> Result<SparseSymOperator> {
    let dim = grid.total;
    let hn = grid.h.powi(grid.n as i32);
    let mut mass = Vec::with_capacity(dim);
    for p in 0..dim {
        let x = grid.coords(p);
        let rho = match density {
            Some(d) => d.eval(&x)?,
            None => 1.0,
        };
        if rho <= 0.0 {
            return Err(Error::Eval(format!(
                "density must be positive, got {rho} at node {p}"
            )));
        }
        mass.push(rho * hn);
    }

    let inv2h = 1.0 / (2.0 * grid.h);
    let mut d_ops = Vec::with_capacity(fields.len());
    for field in fields {
        if field.coeffs.len() != grid.n {
            return Err(Error::ComponentCount {
                expected: grid.n,
                got: field.coeffs.len(),
            });
        }
        let mut rows = Vec::with_capacity(dim);
        for p in 0..dim {
            let x = grid.coords(p);
            let mut row: Vec<(usize, f64)> = Vec::with_capacity(2 * grid.n);
            for k in 0..grid.n {
                let b = field.coeffs[k].eval(&x)?;
                if b == 0.0 {
                    continue;
                }
                add_entry(&mut row, grid.shift(p, k, 1), b * inv2h);
                add_entry(&mut row, grid.shift(p, k, -1), -b * inv2h);
            }
            row.retain(|&(_, v)| v != 0.0);
            row.sort_by_key(|&(j, _)| j);
            rows.push(row);
        }
        d_ops.push(rows);
    }

    // P = Σ_j D_jᵀ R D_j, accumulated row-outer-product by row-outer-product
    // so symmetry holds exactly in floating point.
    let mut acc: Vec<std::collections::BTreeMap<usize, f64>> =
        vec![std::collections::BTreeMap::new(); dim];
    for d in &d_ops {
        for (p, row) in d.iter().enumerate() {
            let w = mass[p];
            for &(a, va) in row {
                for &(b, vb) in row {
                    *acc[a].entry(b).or_insert(0.0) += w * va * vb;
                }
            }
        }
    }
    let rows: Vec<Vec<(usize, f64)>> = acc
        .into_iter()
        .map(|m| m.into_iter().filter(|&(_, v)| v != 0.0).collect())
        .collect();

    Ok(SparseSymOperator {
        dim,
        rows,
        mass,
        d_ops,
        assembled_as: "sum_j D_j^T R D_j".to_string(),
    })
}

fn add_entry(row: &mut Vec<(usize, f64)>, j: usize, v: f64) {
    for e in row.iter_mut() {
        if e.0 == j {
            e.1 += v;
            return;
        }
    }
    row.push((j, v));
}

/// One resolution's worth of spectral data.
#[derive(Debug, Clone)]
pub struct SpectralEntry {
    pub resolution: usize,
    /// generalized (P, M) eigenvalues, ascending
    pub eigenvalues: Vec<f64>,
    /// M-orthonormal eigenvectors in nodal values
    pub eigenvectors: Vec<Vec<f64>>,
    /// achieved residuals ‖Bu − λu‖ in the symmetrized problem
    pub residuals: Vec<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct SpectralReport {
    pub entries: Vec<SpectralEntry>,
}

struct SymProblem<'a> {
    op: &'a SparseSymOperator,
    inv_sqrt_m: Vec<f64>,
    b_diag: Vec<f64>,
    b_inf: f64,
}

impl<'a> SymProblem<'a> {
    fn new(op: &'a SparseSymOperator) -> Self {
        let inv_sqrt_m: Vec<f64> = op.mass.iter().map(|&m| 1.0 / m.sqrt()).collect();
        let mut b_diag = vec![0.0; op.dim];
        let mut b_inf = 0.0f64;
        for (i, row) in op.rows.iter().enumerate() {
            let mut rs = 0.0;
            for &(j, v) in row {
                let b = v * inv_sqrt_m[i] * inv_sqrt_m[j];
                rs += b.abs();
                if j == i {
                    b_diag[i] = b;
                }
            }
            b_inf = b_inf.max(rs);
        }
        SymProblem {
            op,
            inv_sqrt_m,
            b_diag,
            b_inf,
        }
    }

    /// B u with B = M^{-1/2} P M^{-1/2}.
    fn bmatvec(&self, u: &[f64], out: &mut [f64]) {
        let scaled: Vec<f64> = u
            .iter()
            .zip(&self.inv_sqrt_m)
            .map(|(ui, s)| ui * s)
            .collect();
        self.op.matvec(&scaled, out);
        for (o, s) in out.iter_mut().zip(&self.inv_sqrt_m) {
            *o *= s;
        }
    }

    /// Solve (B + I) x = b by conjugate gradients with Jacobi
    /// preconditioning (B + I is SPD since B is PSD).
    fn cg_solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = b.len();
        let pinv: Vec<f64> = self.b_diag.iter().map(|&d| 1.0 / (d + 1.0)).collect();
        let mut x = vec![0.0; n];
        let mut r = b.to_vec();
        let mut z: Vec<f64> = r.iter().zip(&pinv).map(|(ri, pi)| ri * pi).collect();
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let bnorm = dot(b, b).sqrt().max(1e-300);
        let tol = 1e-13 * bnorm;
        let mut ap = vec![0.0; n];
        let max_it = 20 * n + 200;
        for _ in 0..max_it {
            let rnorm = dot(&r, &r).sqrt();
            if rnorm <= tol {
                return Ok(x);
            }
            self.bmatvec(&p, &mut ap);
            for i in 0..n {
                ap[i] += p[i];
            }
            let alpha = rz / dot(&p, &ap);
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            for i in 0..n {
                z[i] = r[i] * pinv[i];
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        let achieved = dot(&r, &r).sqrt() / bnorm;
        if achieved < 1e-9 {
            Ok(x)
        } else {
            Err(Error::CgNoConvergence(achieved))
        }
    }
}

fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for q in basis {
            let c = dot(v, q);
            for i in 0..v.len() {
                v[i] -= c * q[i];
            }
        }
    }
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        for x in v.iter_mut() {
            *x /= n;
        }
    }
    n
}

/// Compute the `m` smallest generalized (P, M) eigenpairs.
pub fn smallest_eigs(op: &SparseSymOperator, m: usize, seed: u64) -> Result<SpectralEntry> {
    if m == 0 || m > 50 {
        return Err(Error::Config(format!("eigenpair count must be 1-50, got {m}")));
    }
    if m > op.dim {
        return Err(Error::Config(format!(
            "requested {m} eigenpairs from a {}-dimensional operator",
            op.dim
        )));
    }
    let prob = SymProblem::new(op);
    let n = op.dim;
    let tol_res = 1e-7 * prob.b_inf.max(1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);

    // converged eigenpairs in the symmetrized space
    let mut evals: Vec<f64> = Vec::new();
    let mut evecs: Vec<Vec<f64>> = Vec::new();

    // deep Krylov spaces are needed when the coefficient fields vanish to
    // high order: the transformed spectrum then has clusters separated by
    // as little as ~1e-4 that shallow runs cannot split to the residual
    // tolerance
    let k_max = (6 * m + 140).min(n);
    let mut restarts = 0;
    while evals.len() < m {
        if restarts > 40 {
            return Err(Error::Eval(
                "eigensolver failed to converge to the requested count".into(),
            ));
        }
        restarts += 1;

        // fresh Lanczos start, deflated against everything found so far
        let mut q: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
        orthogonalize(&mut q, &evecs);
        if normalize(&mut q) < 1e-12 {
            continue;
        }
        let mut basis: Vec<Vec<f64>> = vec![q];
        let mut alphas: Vec<f64> = Vec::new();
        let mut betas: Vec<f64> = Vec::new();
        let mut breakdown = false;
        for k in 0..k_max {
            let qk = basis[k].clone();
            let mut w = prob.cg_solve(&qk)?;
            let alpha = dot(&w, &qk);
            alphas.push(alpha);
            orthogonalize(&mut w, &basis);
            orthogonalize(&mut w, &evecs);
            let beta = normalize(&mut w);
            if beta < 1e-10 {
                breakdown = true;
                break;
            }
            betas.push(beta);
            basis.push(w);
        }
        if !breakdown {
            betas.pop();
            basis.pop();
        }

        // Ritz pairs of the tridiagonal; largest θ of (B+I)^{-1} give the
        // smallest eigenvalues of B.
        let k = alphas.len();
        if k == 0 {
            continue;
        }
        let mut t = nalgebra::DMatrix::<f64>::zeros(k, k);
        for i in 0..k {
            t[(i, i)] = alphas[i];
            if i + 1 < k {
                t[(i, i + 1)] = betas[i];
                t[(i + 1, i)] = betas[i];
            }
        }
        let se = nalgebra::SymmetricEigen::new(t);
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| se.eigenvalues[b].partial_cmp(&se.eigenvalues[a]).unwrap());

        let mut bu = vec![0.0; n];
        for &idx in order.iter().take(m + 2) {
            if evals.len() >= m {
                break;
            }
            let theta = se.eigenvalues[idx];
            if theta <= 0.0 {
                continue;
            }
            let mut u = vec![0.0; n];
            for (j, col) in se.eigenvectors.column(idx).iter().enumerate() {
                for i in 0..n {
                    u[i] += col * basis[j][i];
                }
            }
            orthogonalize(&mut u, &evecs);
            if normalize(&mut u) < 1e-6 {
                continue;
            }
            prob.bmatvec(&u, &mut bu);
            let lambda = dot(&u, &bu);
            let res = (0..n)
                .map(|i| (bu[i] - lambda * u[i]).powi(2))
                .sum::<f64>()
                .sqrt();
            if res <= tol_res {
                evals.push(lambda);
                evecs.push(u);
            }
        }
    }

    // sort ascending and map back to nodal eigenvectors v = M^{-1/2} u
    let mut order: Vec<usize> = (0..evals.len()).collect();
    order.sort_by(|&a, &b| evals[a].partial_cmp(&evals[b]).unwrap());
    order.truncate(m);
    let mut eigenvalues = Vec::with_capacity(m);
    let mut eigenvectors = Vec::with_capacity(m);
    let mut residuals = Vec::with_capacity(m);
    let mut bu = vec![0.0; n];
    for &i in &order {
        let u = &evecs[i];
        prob.bmatvec(u, &mut bu);
        let res = (0..n)
            .map(|j| (bu[j] - evals[i] * u[j]).powi(2))
            .sum::<f64>()
            .sqrt();
        eigenvalues.push(evals[i]);
        residuals.push(res);
        eigenvectors.push(
            u.iter()
                .zip(&prob.inv_sqrt_m)
                .map(|(ui, s)| ui * s)
                .collect(),
        );
    }
    let resolution = (op.dim as f64).powf(1.0 / infer_dim(op.dim) as f64).round() as usize;
    Ok(SpectralEntry {
        resolution,
        eigenvalues,
        eigenvectors,
        residuals,
    })
}

fn infer_dim(total: usize) -> usize {
    for n in (1..=3).rev() {
        let root = (total as f64).powf(1.0 / n as f64).round() as usize;
        if root.pow(n as u32) == total {
            return n;
        }
    }
    1
}

/// Dilate a node mask by `steps` graph-distance steps (periodic).
pub fn dilate_mask(grid: &TorusGrid, mask: &[bool], steps: usize) -> Vec<bool> {
    let mut cur = mask.to_vec();
    for _ in 0..steps {
        let mut next = cur.clone();
        for p in 0..grid.total {
            if cur[p] {
                for ax in 0..grid.n {
                    next[grid.shift(p, ax, 1)] = true;
                    next[grid.shift(p, ax, -1)] = true;
                }
            }
        }
        cur = next;
    }
    cur
}

/// Mass fraction of each eigenfunction within graph distance ⌈δ/h⌉ of a
/// marked node set. Empty marked set gives fraction 0.
pub fn localization_fractions(
    grid: &TorusGrid,
    op: &SparseSymOperator,
    entry: &SpectralEntry,
    marked: &[bool],
    delta: f64,
) -> Vec<f64> {
    if !marked.iter().any(|&b| b) {
        return vec![0.0; entry.eigenvectors.len()];
    }
    let steps = (delta / grid.h).ceil() as usize;
    let ball = dilate_mask(grid, marked, steps);
    entry
        .eigenvectors
        .iter()
        .map(|v| {
            let mut inside = 0.0;
            let mut total = 0.0;
            for p in 0..grid.total {
                let m = op.mass[p] * v[p] * v[p];
                total += m;
                if ball[p] {
                    inside += m;
                }
            }
            if total > 0.0 {
                inside / total
            } else {
                0.0
            }
        })
        .collect()
}

/// Group a sorted eigenvalue list above `floor` into clusters whose
/// members agree to 5% relative, returning cluster means. Useful for
/// comparing degenerate discrete spectra against continuum values.
pub fn positive_clusters(eigs: &[f64], floor: f64) -> Vec<f64> {
    let mut clusters: Vec<(f64, usize)> = Vec::new();
    for &e in eigs.iter().filter(|&&e| e > floor) {
        if let Some(last) = clusters.last_mut() {
            let mean = last.0 / last.1 as f64;
            if (e - mean).abs() < 0.05 * e.max(1.0) {
                last.0 += e;
                last.1 += 1;
                continue;
            }
        }
        clusters.push((e, 1));
    }
    clusters.into_iter().map(|(s, c)| s / c as f64).collect()
}

/// One row of the Weierstrass scaling table.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ScalingRow {
    pub t: f64,
    pub l2_norm_sq: f64,
    pub energy: f64,
}

const BUMP_WIDTH: f64 = std::f64::consts::FRAC_PI_2;

fn bump(u: f64) -> f64 {
    if u.abs() < 1.0 {
        (-1.0 / (1.0 - u * u)).exp()
    } else {
        0.0
    }
}

/// The Weierstrass scaling experiment: build the product bump
/// η_t(x) = t^{s/2} Π_{i ∈ slice} φ(t·x̃_i/w) · Π_{i ∉ slice} ψ(x̃_i)
/// and tabulate ‖η_t‖² and E(η_t) by direct grid quadrature.
pub fn weierstrass_scaling_test(
    fields: &[SmoothVectorField],
    slice_axes: &[usize],
    grid: &TorusGrid,
    t_values: &[f64],
    density: Option<&SmoothExpr>,
) -> Result<Vec<ScalingRow>> {
    if slice_axes.is_empty() || slice_axes.len() >= grid.n + 1 {
        return Err(Error::Config(
            "slice must pin between 1 and n axes".into(),
        ));
    }
    for &ax in slice_axes {
        if ax >= grid.n {
            return Err(Error::Config(format!("slice axis {ax} out of range")));
        }
    }
    let s = slice_axes.len() as i32;
    let op = assemble_operator(fields, grid, density)?;
    let mut rows = Vec::with_capacity(t_values.len());
    for &t in t_values {
        if t < 1.0 {
            return Err(Error::Config(format!("scaling parameter t must be >= 1, got {t}")));
        }
        // support across a scaled axis is 2w/t; demand at least 8 nodes
        let support_nodes = (2.0 * BUMP_WIDTH / t) / grid.h;
        if support_nodes < 8.0 {
            return Err(Error::Config(format!(
                "bump under-resolved at t = {t}: {support_nodes:.1} nodes across support (need >= 8)"
            )));
        }
        let mut eta = Vec::with_capacity(grid.total);
        let amp = t.powf(s as f64 / 2.0);
        for p in 0..grid.total {
            let x = grid.coords(p);
            let mut v = amp;
            for ax in 0..grid.n {
                let xt = TorusGrid::wrap(x[ax]);
                if slice_axes.contains(&ax) {
                    v *= bump(t * xt / BUMP_WIDTH);
                } else {
                    v *= bump(xt / (0.9 * std::f64::consts::PI));
                }
            }
            eta.push(v);
        }
        rows.push(ScalingRow {
            t,
            l2_norm_sq: op.l2_norm_sq(&eta),
            energy: op.quadratic_form(&eta),
        });
    }
    Ok(rows)
}

/// One row of the concentration table.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ConcentrationRow {
    pub eps: f64,
    pub c_eps: f64,
}

/// Random band-limited field: Σ over |k|_∞ ≤ kmax of a_k cos(k·x) + b_k sin(k·x).
fn band_limited_field(grid: &TorusGrid, kmax: i64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut modes: Vec<(Vec<i64>, f64, f64)> = Vec::new();
    let mut k = vec![-kmax; grid.n];
    loop {
        modes.push((k.clone(), rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
        let mut ax = 0;
        loop {
            k[ax] += 1;
            if k[ax] <= kmax {
                break;
            }
            k[ax] = -kmax;
            ax += 1;
            if ax == grid.n {
                let mut f = vec![0.0; grid.total];
                for p in 0..grid.total {
                    let x = grid.coords(p);
                    for (kv, a, b) in &modes {
                        let phase: f64 = kv.iter().zip(&x).map(|(&ki, xi)| ki as f64 * xi).sum();
                        f[p] += a * phase.cos() + b * phase.sin();
                    }
                }
                return f;
            }
        }
    }
}

/// The §-style concentration experiment: estimate the best constant C(ε)
/// in ‖f‖²_{U_ε} ≤ ε·E(f) + C·‖f‖²_{V∖U_ε} over a family of probe
/// functions (lowest eigenfunctions plus seeded band-limited fields).
pub fn concentration_test(
    fields: &[SmoothVectorField],
    grid: &TorusGrid,
    a_mask: &[bool],
    v_mask: &[bool],
    eps_values: &[f64],
    probes: usize,
    seed: u64,
    density: Option<&SmoothExpr>,
) -> Result<Vec<ConcentrationRow>> {
    if probes < 20 {
        return Err(Error::Config(format!("need at least 20 probes, got {probes}")));
    }
    for p in 0..grid.total {
        if a_mask[p] && !v_mask[p] {
            return Err(Error::Config("A mask must be contained in V mask".into()));
        }
    }
    let op = assemble_operator(fields, grid, density)?;
    let n_eigs = 10.min(grid.total);
    let entry = smallest_eigs(&op, n_eigs, seed)?;
    let mut probe_fns: Vec<Vec<f64>> = entry.eigenvectors;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let kmax = (grid.n_axis / 8).max(1) as i64;
    while probe_fns.len() < probes {
        probe_fns.push(band_limited_field(grid, kmax, &mut rng));
    }

    let mut rows = Vec::with_capacity(eps_values.len());
    for &eps in eps_values {
        if eps <= 0.0 {
            return Err(Error::Config(format!("eps must be positive, got {eps}")));
        }
        let steps = (eps / grid.h).ceil() as usize;
        let u_mask = dilate_mask(grid, a_mask, steps);
        let denom_set_nonempty = (0..grid.total).any(|p| v_mask[p] && !u_mask[p]);
        if !denom_set_nonempty {
            return Err(Error::Config(format!(
                "denominator set V \\ U_eps is empty at eps = {eps}"
            )));
        }
        let mut c_eps = 0.0f64;
        for f in &probe_fns {
            let mut num = 0.0;
            let mut den = 0.0;
            let mut tot = 0.0;
            for p in 0..grid.total {
                let m = op.mass[p] * f[p] * f[p];
                tot += m;
                if u_mask[p] {
                    num += m;
                }
                if v_mask[p] && !u_mask[p] {
                    den += m;
                }
            }
            let energy = op.quadratic_form(f);
            let excess = (num - eps * energy).max(0.0);
            if excess == 0.0 {
                continue;
            }
            // a probe whose mass is (numerically) entirely inside U_eps
            // witnesses an enormous constant; floor the denominator so
            // the estimate saturates instead of dividing by zero
            c_eps = c_eps.max(excess / den.max(1e-9 * tot));
        }
        rows.push(ConcentrationRow { eps, c_eps });
    }
    Ok(rows)
}
