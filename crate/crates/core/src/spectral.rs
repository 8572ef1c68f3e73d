//! Schrödinger operator assembly, the generalized eigenproblem
//! `A e = λ M e`, and the spectral splitting `E = E⁻ ⊕ E⁰ ⊕ E⁺`.
//!
//! `A` is the stiffness matrix of the energy form (weighted graph Laplacian
//! plus `diag(c + m)`), `M = diag(m)` the mass matrix. Eigenvectors are
//! normalized in the `m`-inner product, so they are simultaneously
//! orthonormal in `l²_m` and orthogonal in `E` with `||e_n||_E² = λ_n`.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{GraphError, SpectralError};
use crate::function::GraphFunction;
use crate::graph::WeightedGraph;

/// Graph size up to which [`EigenMethod::Auto`] picks the dense solver.
pub const DENSE_LIMIT: usize = 512;

/// Compressed sparse row matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<f64>,
}

impl CsrMatrix {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    /// `(A v)` into `out`.
    pub fn mul_into(&self, v: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.indptr[i]..self.indptr[i + 1] {
                s += self.data[k] * v[self.indices[k]];
            }
            *o = s;
        }
    }

    pub fn mul(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.mul_into(v, &mut out);
        out
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let row = &self.indices[self.indptr[i]..self.indptr[i + 1]];
        match row.binary_search(&j) {
            Ok(k) => self.data[self.indptr[i] + k],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for k in self.indptr[i]..self.indptr[i + 1] {
                d[(i, self.indices[k])] = self.data[k];
            }
        }
        d
    }
}

/// Stiffness `A` and diagonal mass `M` of the energy form.
#[derive(Clone, Debug, PartialEq)]
pub struct FormMatrices {
    pub stiffness: CsrMatrix,
    pub mass: Vec<f64>,
}

/// Assembles `A` with `uᵀ A v = q(u, v)` and `M = diag(m)`.
///
/// The graph must pass every structural check; connectivity is not required.
pub fn assemble(g: &WeightedGraph) -> Result<FormMatrices, SpectralError> {
    let report = g.validate();
    let failed: Vec<String> = report
        .failures()
        .filter(|c| c.name != "connected")
        .map(|c| c.detail.clone())
        .collect();
    if !failed.is_empty() {
        return Err(GraphError::Invalid(failed.join("; ")).into());
    }
    let n = g.len();
    let mut indptr = Vec::with_capacity(n + 1);
    let mut indices = Vec::new();
    let mut data = Vec::new();
    indptr.push(0);
    for x in 0..n {
        let diag = g.degree(x) + g.killing()[x] + g.mass()[x];
        let mut diag_written = false;
        for &(y, b) in g.neighbors(x) {
            if !diag_written && y > x {
                indices.push(x);
                data.push(diag);
                diag_written = true;
            }
            indices.push(y);
            data.push(-b);
        }
        if !diag_written {
            indices.push(x);
            data.push(diag);
        }
        indptr.push(indices.len());
    }
    Ok(FormMatrices {
        stiffness: CsrMatrix {
            n,
            indptr,
            indices,
            data,
        },
        mass: g.mass().to_vec(),
    })
}

impl FormMatrices {
    pub fn dim(&self) -> usize {
        self.mass.len()
    }

    /// `uᵀ A v`.
    pub fn q(&self, u: &[f64], v: &[f64]) -> f64 {
        dot(&self.stiffness.mul(v), u)
    }

    /// `uᵀ M v`.
    pub fn mass_inner(&self, u: &[f64], v: &[f64]) -> f64 {
        self.mass.iter().zip(u.iter().zip(v)).map(|(m, (a, b))| m * a * b).sum()
    }

    /// `q_λ(u, v) = uᵀ A v - λ uᵀ M v`.
    pub fn q_lambda(&self, lambda: f64, u: &GraphFunction, v: &GraphFunction) -> f64 {
        self.q(u.values(), v.values()) - lambda * self.mass_inner(u.values(), v.values())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Which eigensolver backs [`eigensolve`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum EigenMethod {
    /// Dense for `n <= DENSE_LIMIT`, Lanczos otherwise.
    #[default]
    Auto,
    Dense,
    Lanczos,
}

#[derive(Clone, Copy, Debug)]
pub struct EigenOptions {
    pub method: EigenMethod,
    /// Relative residual tolerance `||A e - λ M e|| <= tol ||A e||`.
    pub tol: f64,
    /// Cap on matrix-vector products in the Lanczos path.
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            method: EigenMethod::Auto,
            tol: 1e-10,
            max_iters: 20_000,
            seed: 0,
        }
    }
}

/// The `k` smallest eigenpairs of `A e = λ M e`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralData {
    pub eigenvalues: Vec<f64>,
    /// `n × k`; column `j` is `e_{j+1}`, `m`-normalized.
    pub eigenvectors: DMatrix<f64>,
    pub residuals: Vec<f64>,
}

impl SpectralData {
    pub fn k(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn dim(&self) -> usize {
        self.eigenvectors.nrows()
    }

    /// Whether every eigenpair of the finite problem is present.
    pub fn is_complete(&self) -> bool {
        self.k() == self.dim()
    }

    pub fn eigenvector(&self, j: usize) -> GraphFunction {
        GraphFunction::new(self.eigenvectors.column(j).iter().copied().collect())
    }

    /// Largest `|e_iᵀ M e_j - δ_ij|`.
    pub fn orthonormality_defect(&self, fm: &FormMatrices) -> f64 {
        let k = self.k();
        let mut worst: f64 = 0.0;
        for i in 0..k {
            let ei: Vec<f64> = self.eigenvectors.column(i).iter().copied().collect();
            for j in 0..=i {
                let ej: Vec<f64> = self.eigenvectors.column(j).iter().copied().collect();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((fm.mass_inner(&ei, &ej) - target).abs());
            }
        }
        worst
    }

    /// Coefficients `e_nᵀ M u` for every computed `n`.
    pub fn coefficients(&self, mass: &[f64], u: &[f64]) -> Vec<f64> {
        let mu: Vec<f64> = mass.iter().zip(u).map(|(m, x)| m * x).collect();
        (0..self.k())
            .map(|j| dot(self.eigenvectors.column(j).as_slice(), &mu))
            .collect()
    }
}

fn relative_residuals(fm: &FormMatrices, values: &[f64], vectors: &DMatrix<f64>) -> Vec<f64> {
    values
        .iter()
        .enumerate()
        .map(|(j, &lam)| {
            let e = vectors.column(j);
            let ae = fm.stiffness.mul(e.as_slice());
            let r: Vec<f64> = ae
                .iter()
                .zip(fm.mass.iter().zip(e.iter()))
                .map(|(a, (m, x))| a - lam * m * x)
                .collect();
            norm2(&r) / norm2(&ae).max(f64::MIN_POSITIVE)
        })
        .collect()
}

/// Flips each column so its largest-magnitude entry (first on ties) is positive.
fn normalize_signs(vectors: &mut DMatrix<f64>) {
    for mut col in vectors.column_iter_mut() {
        let mut best = 0;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > col[best].abs() * (1.0 + 1e-12) {
                best = i;
            }
        }
        if col[best] < 0.0 {
            col.neg_mut();
        }
    }
}

/// Computes the `k` smallest eigenpairs of `A e = λ M e`.
pub fn eigensolve(fm: &FormMatrices, k: usize, opts: &EigenOptions) -> Result<SpectralData, SpectralError> {
    let n = fm.dim();
    if k > n || k == 0 {
        return Err(SpectralError::TooManyEigenpairs { k, n });
    }
    let use_dense = match opts.method {
        EigenMethod::Dense => true,
        EigenMethod::Lanczos => false,
        EigenMethod::Auto => n <= DENSE_LIMIT,
    };
    let (values, mut vectors) = if use_dense {
        dense_eigen(fm, k)
    } else {
        lanczos_eigen(fm, k, opts)?
    };
    normalize_signs(&mut vectors);
    let residuals = relative_residuals(fm, &values, &vectors);
    let worst = residuals.iter().cloned().fold(0.0, f64::max);
    if worst > opts.tol {
        return Err(SpectralError::NoConvergence {
            iterations: opts.max_iters,
            residual: worst,
        });
    }
    Ok(SpectralData {
        eigenvalues: values,
        eigenvectors: vectors,
        residuals,
    })
}

/// All eigenpairs via the `M^{-1/2} A M^{-1/2}` reduction (the Cholesky
/// reduction for a diagonal mass matrix).
fn dense_eigen(fm: &FormMatrices, k: usize) -> (Vec<f64>, DMatrix<f64>) {
    let n = fm.dim();
    let inv_sqrt: Vec<f64> = fm.mass.iter().map(|m| 1.0 / m.sqrt()).collect();
    let a = fm.stiffness.to_dense();
    let c = DMatrix::from_fn(n, n, |i, j| {
        // symmetrize exactly so rounding cannot break symmetry
        0.5 * (a[(i, j)] + a[(j, i)]) * inv_sqrt[i] * inv_sqrt[j]
    });
    let eig = SymmetricEigen::new(c);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values: Vec<f64> = order[..k].iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, k, |r, j| eig.eigenvectors[(r, order[j])] * inv_sqrt[r]);
    (values, vectors)
}

struct LanczosRun {
    values: Vec<f64>,
    vectors: Vec<Vec<f64>>,
    matvecs: usize,
}

/// `m`-inner-product Lanczos for `M⁻¹A` with full reorthogonalization,
/// restricted to the `M`-orthogonal complement of `locked`.
fn lanczos_run(
    fm: &FormMatrices,
    locked: &[Vec<f64>],
    want: usize,
    tol: f64,
    budget: usize,
    rng: &mut ChaCha8Rng,
) -> LanczosRun {
    let n = fm.dim();
    let max_dim = n - locked.len();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut matvecs = 0;

    let orthogonalize = |w: &mut Vec<f64>, basis: &[Vec<f64>]| {
        for _ in 0..2 {
            for q in locked.iter().chain(basis.iter()) {
                let c = fm.mass_inner(q, w);
                for (wi, qi) in w.iter_mut().zip(q) {
                    *wi -= c * qi;
                }
            }
        }
    };
    let fresh = |rng: &mut ChaCha8Rng, basis: &[Vec<f64>]| -> Option<Vec<f64>> {
        for _ in 0..8 {
            let mut v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
            orthogonalize(&mut v, basis);
            let nrm = fm.mass_inner(&v, &v).sqrt();
            if nrm > 1e-8 {
                v.iter_mut().for_each(|x| *x /= nrm);
                return Some(v);
            }
        }
        None
    };

    let mut q = match fresh(rng, &basis) {
        Some(q) => q,
        None => {
            return LanczosRun {
                values: vec![],
                vectors: vec![],
                matvecs,
            }
        }
    };
    let ritz: (Vec<f64>, DMatrix<f64>);
    loop {
        let aq = fm.stiffness.mul(&q);
        matvecs += 1;
        let mut w: Vec<f64> = aq.iter().zip(&fm.mass).map(|(a, m)| a / m).collect();
        let a_j = fm.mass_inner(&q, &w);
        basis.push(q);
        alpha.push(a_j);
        orthogonalize(&mut w, &basis);
        let b_j = fm.mass_inner(&w, &w).sqrt();
        let dim = basis.len();

        // Ritz values of the tridiagonal projection
        let t = DMatrix::from_fn(dim, dim, |i, j| {
            if i == j {
                alpha[i]
            } else if i + 1 == j {
                beta[i]
            } else if j + 1 == i {
                beta[j]
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(t);
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let vals: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vecs = DMatrix::from_fn(dim, dim, |r, c| eig.eigenvectors[(r, order[c])]);
        let scale = vals.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        let exhausted = dim >= max_dim;
        let breakdown = b_j <= 1e-12 * scale;
        let converged = dim >= want
            && (0..want.min(dim)).all(|i| b_j * vecs[(dim - 1, i)].abs() <= 0.1 * tol * vals[i].abs().max(1.0));
        if exhausted || converged || matvecs >= budget {
            ritz = (vals, vecs);
            break;
        }
        if breakdown {
            // invariant subspace found; continue in its complement
            beta.push(0.0);
            match fresh(rng, &basis) {
                Some(next) => q = next,
                None => {
                    ritz = (vals, vecs);
                    break;
                }
            }
        } else {
            beta.push(b_j);
            q = w.into_iter().map(|x| x / b_j).collect();
        }
    }
    let (vals, vecs) = ritz;
    let take = want.min(vals.len());
    let vectors = (0..take)
        .map(|i| {
            let mut x = vec![0.0; n];
            for (j, qj) in basis.iter().enumerate() {
                let s = vecs[(j, i)];
                for (xi, qi) in x.iter_mut().zip(qj) {
                    *xi += s * qi;
                }
            }
            let nrm = fm.mass_inner(&x, &x).sqrt();
            x.iter_mut().for_each(|v| *v /= nrm);
            x
        })
        .collect();
    LanczosRun {
        values: vals[..take].to_vec(),
        vectors,
        matvecs,
    }
}

fn lanczos_eigen(fm: &FormMatrices, k: usize, opts: &EigenOptions) -> Result<(Vec<f64>, DMatrix<f64>), SpectralError> {
    let n = fm.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let run = lanczos_run(fm, &[], k, opts.tol, opts.max_iters, &mut rng);
    let mut used = run.matvecs;
    let mut pairs: Vec<(f64, Vec<f64>)> = run.values.into_iter().zip(run.vectors).collect();
    // Single-vector Krylov spaces see one direction per eigenspace; probe the
    // complement of the found pairs for eigenvalues that were missed.
    while pairs.len() < n && used < opts.max_iters {
        let locked: Vec<Vec<f64>> = pairs.iter().map(|(_, v)| v.clone()).collect();
        let probe = lanczos_run(fm, &locked, 1, opts.tol, opts.max_iters - used, &mut rng);
        used += probe.matvecs;
        let Some(&theta) = probe.values.first() else {
            break;
        };
        let kth = pairs.get(k - 1).map_or(f64::INFINITY, |p| p.0);
        if pairs.len() >= k && theta >= kth - opts.tol * kth.abs().max(1.0) {
            break;
        }
        pairs.push((theta, probe.vectors[0].clone()));
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        pairs.truncate(k.max(pairs.len().min(k)));
    }
    if pairs.len() < k {
        return Err(SpectralError::NoConvergence {
            iterations: used,
            residual: f64::INFINITY,
        });
    }
    pairs.truncate(k);
    // Rayleigh-Ritz on the collected vectors restores exact M-orthogonality.
    let basis = DMatrix::from_fn(n, k, |r, c| pairs[c].1[r]);
    let a_dense_cols: Vec<Vec<f64>> = (0..k).map(|c| fm.stiffness.mul(basis.column(c).as_slice())).collect();
    let h = DMatrix::from_fn(k, k, |i, j| {
        0.5 * (dot(basis.column(i).as_slice(), &a_dense_cols[j]) + dot(basis.column(j).as_slice(), &a_dense_cols[i]))
    });
    let g = DMatrix::from_fn(k, k, |i, j| {
        fm.mass_inner(basis.column(i).as_slice(), basis.column(j).as_slice())
    });
    // g ≈ I; reduce with its Cholesky factor
    let chol = g.cholesky().ok_or(SpectralError::NoConvergence {
        iterations: used,
        residual: f64::INFINITY,
    })?;
    let l_inv = chol.l().try_inverse().ok_or(SpectralError::NoConvergence {
        iterations: used,
        residual: f64::INFINITY,
    })?;
    let reduced = &l_inv * &h * l_inv.transpose();
    let reduced = DMatrix::from_fn(k, k, |i, j| 0.5 * (reduced[(i, j)] + reduced[(j, i)]));
    let eig = SymmetricEigen::new(reduced);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let coeff = l_inv.transpose() * &eig.eigenvectors;
    let vectors = DMatrix::from_fn(n, k, |r, c| (0..k).map(|j| basis[(r, j)] * coeff[(j, order[c])]).sum());
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    Ok((values, vectors))
}

/// Computes a window of eigenpairs that reaches above `lambda`: starts at
/// `min(n, 32)` and doubles until `λ_k > λ` or the spectrum is complete.
pub fn spectral_window(fm: &FormMatrices, lambda: f64, opts: &EigenOptions) -> Result<SpectralData, SpectralError> {
    let n = fm.dim();
    let mut k = n.min(32);
    loop {
        let spec = eigensolve(fm, k, opts)?;
        if k == n || spec.eigenvalues[k - 1] > lambda {
            return Ok(spec);
        }
        k = (2 * k).min(n);
    }
}

/// Default tolerance for `λ_n = λ`.
pub fn default_split_tol(lambda: f64) -> f64 {
    1e-9 * (1.0 + lambda.abs())
}

/// Partition of the computed eigenpairs by comparison with `lambda`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Splitting {
    pub lambda: f64,
    pub tol: f64,
    /// 0-based eigenpair indices with `λ_n < λ`.
    pub minus: Vec<usize>,
    pub zero: Vec<usize>,
    pub plus: Vec<usize>,
    /// `δ(λ) = min_n |λ - λ_n|` over the computed eigenvalues.
    pub delta: f64,
}

/// Which spectral subspace to project onto.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Part {
    Minus,
    Zero,
    Plus,
}

/// Splits the computed spectrum at `lambda`. With an incomplete window some
/// eigenvalue must lie above `lambda`.
pub fn split(spec: &SpectralData, lambda: f64, tol: Option<f64>) -> Result<Splitting, SpectralError> {
    let tol = tol.unwrap_or_else(|| default_split_tol(lambda));
    let (mut minus, mut zero, mut plus) = (vec![], vec![], vec![]);
    for (j, &ev) in spec.eigenvalues.iter().enumerate() {
        if (ev - lambda).abs() <= tol {
            zero.push(j);
        } else if ev < lambda {
            minus.push(j);
        } else {
            plus.push(j);
        }
    }
    if plus.is_empty() && !spec.is_complete() {
        return Err(SpectralError::InsufficientWindow { lambda, k: spec.k() });
    }
    let delta = spec
        .eigenvalues
        .iter()
        .map(|ev| (ev - lambda).abs())
        .fold(f64::INFINITY, f64::min);
    Ok(Splitting {
        lambda,
        tol,
        minus,
        zero,
        plus,
        delta,
    })
}

impl Splitting {
    pub fn indices(&self, part: Part) -> &[usize] {
        match part {
            Part::Minus => &self.minus,
            Part::Zero => &self.zero,
            Part::Plus => &self.plus,
        }
    }

    /// 0-based index of the first eigenvalue above `λ` (the `k` with
    /// `λ ∈ (λ_{k-1}, λ_k)`), if computed.
    pub fn first_above(&self) -> Option<usize> {
        self.plus.first().copied()
    }
}

/// `P u = sum_{n in part} (e_nᵀ M u) e_n`.
pub fn project(spl: &Splitting, spec: &SpectralData, mass: &[f64], part: Part, u: &GraphFunction) -> GraphFunction {
    let idx = spl.indices(part);
    let mu: Vec<f64> = mass.iter().zip(u.values()).map(|(m, x)| m * x).collect();
    let mut out = vec![0.0; u.len()];
    for &j in idx {
        let e = spec.eigenvectors.column(j);
        let c = dot(e.as_slice(), &mu);
        for (o, ei) in out.iter_mut().zip(e.iter()) {
            *o += c * ei;
        }
    }
    GraphFunction::new(out)
}

/// One side of the form inequalities on `E±`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub ok: bool,
}

/// Report of `q_λ(u⁺) >= ((λ_k - λ)/λ_k) ||u⁺||_E²` and, for `k > 1`,
/// `q_λ(u⁻) <= ((λ_{k-1} - λ)/λ_{k-1}) ||u⁻||_E²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FormBounds {
    pub lower: Option<BoundCheck>,
    pub upper: Option<BoundCheck>,
}

impl FormBounds {
    pub fn ok(&self) -> bool {
        self.lower.is_none_or(|b| b.ok) && self.upper.is_none_or(|b| b.ok)
    }
}

/// Relative slack used by [`verify_form_bounds`].
pub const FORM_BOUND_SLACK: f64 = 1e-10;

pub fn verify_form_bounds(
    spl: &Splitting,
    spec: &SpectralData,
    fm: &FormMatrices,
    u: &GraphFunction,
) -> Result<FormBounds, SpectralError> {
    if !spl.zero.is_empty() || spl.delta <= spl.tol {
        return Err(SpectralError::InSpectrum {
            lambda: spl.lambda,
            delta: spl.delta,
        });
    }
    let lam = spl.lambda;
    let slack = |a: f64, b: f64| FORM_BOUND_SLACK * (a.abs() + b.abs()) + 1e-300;
    let lower = spl.first_above().map(|k| {
        let up = project(spl, spec, &fm.mass, Part::Plus, u);
        let lk = spec.eigenvalues[k];
        let lhs = fm.q_lambda(lam, &up, &up);
        let rhs = (lk - lam) / lk * fm.q(up.values(), up.values());
        BoundCheck {
            lhs,
            rhs,
            ok: lhs >= rhs - slack(lhs, rhs),
        }
    });
    let upper = spl.minus.last().map(|&k1| {
        let um = project(spl, spec, &fm.mass, Part::Minus, u);
        let lk1 = spec.eigenvalues[k1];
        let lhs = fm.q_lambda(lam, &um, &um);
        let rhs = (lk1 - lam) / lk1 * fm.q(um.values(), um.values());
        BoundCheck {
            lhs,
            rhs,
            ok: lhs <= rhs + slack(lhs, rhs),
        }
    });
    Ok(FormBounds { lower, upper })
}

/// Certified interval for `||P⁻||` on `l^p_m`: the lower end is the best
/// sampled ratio, the upper end the Hölder bound
/// `sum_j ||e_j||_{l^p_m} ||e_j||_{l^{p'}_m}`.
pub fn projector_lp_bound(
    spl: &Splitting,
    spec: &SpectralData,
    g: &WeightedGraph,
    p: f64,
    samples: usize,
    seed: u64,
) -> (f64, f64) {
    assert!(p >= 1.0, "p must be at least 1");
    if spl.minus.is_empty() {
        return (0.0, 0.0);
    }
    let p_conj = if p == 1.0 {
        f64::INFINITY
    } else if p.is_infinite() {
        1.0
    } else {
        p / (p - 1.0)
    };
    let upper: f64 = spl
        .minus
        .iter()
        .map(|&j| {
            let e = spec.eigenvector(j);
            e.norm_lp(g, p) * e.norm_lp(g, p_conj)
        })
        .sum();
    let n = g.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probes: Vec<GraphFunction> = (0..n)
        .map(|i| {
            let mut v = vec![0.0; n];
            v[i] = 1.0;
            GraphFunction::new(v)
        })
        .collect();
    probes.extend(spl.minus.iter().map(|&j| spec.eigenvector(j)));
    for _ in 0..samples {
        probes.push(GraphFunction::new(
            (0..n).map(|_| StandardNormal.sample(&mut rng)).collect(),
        ));
    }
    let lower = probes
        .iter()
        .map(|u| {
            let pu = project(spl, spec, g.mass(), Part::Minus, u);
            pu.norm_lp(g, p) / u.norm_lp(g, p)
        })
        .fold(0.0, f64::max);
    (lower, upper)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{path_graph, random_connected_graph, GraphBuilder};

    fn p3() -> WeightedGraph {
        path_graph(3, 1.0, 1.0, 0.0)
    }

    fn full(g: &WeightedGraph) -> (FormMatrices, SpectralData) {
        let fm = assemble(g).unwrap();
        let spec = eigensolve(&fm, g.len(), &EigenOptions::default()).unwrap();
        (fm, spec)
    }

    #[test]
    fn single_vertex_assembly() {
        let g = path_graph(1, 1.0, 1.0, 0.0);
        let fm = assemble(&g).unwrap();
        assert_eq!(fm.stiffness.to_dense(), DMatrix::from_element(1, 1, 1.0));
        assert_eq!(fm.mass, vec![1.0]);
    }

    #[test]
    fn p3_assembly_by_hand() {
        let fm = assemble(&p3()).unwrap();
        let expected = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, 0.0, -1.0, 3.0, -1.0, 0.0, -1.0, 2.0]);
        assert_eq!(fm.stiffness.to_dense(), expected);
    }

    #[test]
    fn assembly_rejects_invalid_graph() {
        let mut gb = GraphBuilder::new();
        gb.add_vertex(0, 1.0, -0.5).unwrap();
        let g = gb.build().unwrap();
        assert!(assemble(&g).is_err());
    }

    #[test]
    fn p3_spectrum() {
        let (_, spec) = full(&p3());
        for (got, want) in spec.eigenvalues.iter().zip([1.0, 2.0, 4.0]) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn single_vertex_with_killing_term() {
        let mut gb = GraphBuilder::new();
        gb.add_vertex(0, 1.0, 3.0).unwrap();
        let (_, spec) = full(&gb.build().unwrap());
        assert!((spec.eigenvalues[0] - 4.0).abs() < 1e-14);
    }

    #[test]
    fn too_many_eigenpairs() {
        let fm = assemble(&p3()).unwrap();
        assert!(matches!(
            eigensolve(&fm, 4, &EigenOptions::default()),
            Err(SpectralError::TooManyEigenpairs { k: 4, n: 3 })
        ));
    }

    #[test]
    fn lanczos_agrees_with_dense_on_random_graphs() {
        for seed in 0..6 {
            let g = random_connected_graph(40, 0.1, seed);
            let fm = assemble(&g).unwrap();
            let dense = eigensolve(
                &fm,
                10,
                &EigenOptions {
                    method: EigenMethod::Dense,
                    ..Default::default()
                },
            )
            .unwrap();
            let lanczos = eigensolve(
                &fm,
                10,
                &EigenOptions {
                    method: EigenMethod::Lanczos,
                    seed,
                    ..Default::default()
                },
            )
            .unwrap();
            for (a, b) in dense.eigenvalues.iter().zip(&lanczos.eigenvalues) {
                assert!((a - b).abs() < 1e-8 * a.abs().max(1.0), "seed {seed}: {a} vs {b}");
            }
            assert!(lanczos.orthonormality_defect(&fm) < 1e-10);
        }
    }

    #[test]
    fn lanczos_finds_repeated_eigenvalues() {
        // star graph: Laplacian eigenvalue 1 has multiplicity n - 2
        let mut gb = GraphBuilder::new();
        for i in 0..7 {
            gb.add_vertex(i, 1.0, 0.0).unwrap();
        }
        for i in 1..7 {
            gb.add_edge(0, i, 1.0).unwrap();
        }
        let fm = assemble(&gb.build().unwrap()).unwrap();
        let dense = eigensolve(
            &fm,
            7,
            &EigenOptions {
                method: EigenMethod::Dense,
                ..Default::default()
            },
        )
        .unwrap();
        let lanczos = eigensolve(
            &fm,
            5,
            &EigenOptions {
                method: EigenMethod::Lanczos,
                ..Default::default()
            },
        )
        .unwrap();
        for (a, b) in dense.eigenvalues.iter().zip(&lanczos.eigenvalues) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn split_examples() {
        let (_, spec) = full(&p3());
        let s = split(&spec, 1.5, None).unwrap();
        assert_eq!(
            (s.minus.clone(), s.zero.clone(), s.plus.clone()),
            (vec![0], vec![], vec![1, 2])
        );
        assert!((s.delta - 0.5).abs() < 1e-12);
        let s = split(&spec, spec.eigenvalues[0], None).unwrap();
        assert_eq!(s.zero, vec![0]);
        let s = split(&spec, 0.5, None).unwrap();
        assert!(s.minus.is_empty());
    }

    #[test]
    fn split_needs_window_above_lambda() {
        let g = random_connected_graph(10, 0.2, 3);
        let fm = assemble(&g).unwrap();
        let spec = eigensolve(&fm, 2, &EigenOptions::default()).unwrap();
        assert!(matches!(
            split(&spec, 1e6, None),
            Err(SpectralError::InsufficientWindow { .. })
        ));
        let spec = spectral_window(&fm, spec.eigenvalues[1] + 1e-3, &EigenOptions::default()).unwrap();
        assert!(split(&spec, spec.eigenvalues[1] - 1e-3, None).is_ok());
    }

    #[test]
    fn eigenvector_reproduced_by_plus_projector() {
        let (fm, spec) = full(&p3());
        let s = split(&spec, 1.5, None).unwrap();
        let e2 = spec.eigenvector(1);
        let pu = project(&s, &spec, &fm.mass, Part::Plus, &e2);
        for (a, b) in pu.values().iter().zip(e2.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn q_lambda_on_eigenvector() {
        let (fm, spec) = full(&p3());
        for j in 0..3 {
            let e = spec.eigenvector(j);
            let got = fm.q_lambda(0.7, &e, &e);
            assert!((got - (spec.eigenvalues[j] - 0.7)).abs() < 1e-12);
        }
    }

    #[test]
    fn form_bound_saturation_for_single_modes() {
        let (fm, spec) = full(&p3());
        let s = split(&spec, 1.5, None).unwrap();
        let b = verify_form_bounds(&s, &spec, &fm, &spec.eigenvector(0)).unwrap();
        let upper = b.upper.unwrap();
        assert!((upper.lhs + 0.5).abs() < 1e-12 && (upper.rhs + 0.5).abs() < 1e-12);
        assert!(upper.ok);
        let b = verify_form_bounds(&s, &spec, &fm, &spec.eigenvector(1).scaled(3.0)).unwrap();
        let lower = b.lower.unwrap();
        assert!((lower.lhs - lower.rhs).abs() <= 1e-10 * lower.lhs.abs());
    }

    #[test]
    fn form_bounds_refuse_lambda_in_spectrum() {
        let (fm, spec) = full(&p3());
        let s = split(&spec, 2.0, None).unwrap();
        assert!(matches!(
            verify_form_bounds(&s, &spec, &fm, &spec.eigenvector(0)),
            Err(SpectralError::InSpectrum { .. })
        ));
    }

    #[test]
    fn projector_bounds() {
        let g = p3();
        let (_, spec) = full(&g);
        let below = split(&spec, 0.5, None).unwrap();
        assert_eq!(projector_lp_bound(&below, &spec, &g, 4.0, 10, 0), (0.0, 0.0));
        let s = split(&spec, 1.5, None).unwrap();
        let (lo, _) = projector_lp_bound(&s, &spec, &g, 2.0, 200, 1);
        assert!(lo <= 1.0 + 1e-12);
        let (lo, hi) = projector_lp_bound(&s, &spec, &g, 4.0, 200, 2);
        assert!(lo <= hi, "{lo} > {hi}");
    }
}
