//! Energy functional `J_λ(u) = ½ q_λ(u) − κ Ψ(u)`, its gradient, and the
//! generalized Nehari minimax for ground states.
//!
//! Internally functions are written in E-orthonormal eigen-coordinates
//! `u = Σ_n y_n e_n / √λ_n`, in which
//! `κ J_λ = ½ Σ d_n y_n² − Ψ(u)` with `d_n = κ (1 − λ/λ_n)`.
//! `F` collects the coordinates with `d_n ≤ 0`; its complement carries the
//! positive part of the quadratic form.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::SolverError;
use crate::function::GraphFunction;
use crate::graph::WeightedGraph;
use crate::nonlinearity::{psi, Nonlinearity};
use crate::spectral::{assemble, split, FormMatrices, SpectralData, Splitting, DENSE_LIMIT};

/// Sign of the nonlinear term: `+1` self-focusing, `−1` defocusing.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "i64")]
pub enum Kappa {
    Focusing,
    Defocusing,
}

impl Kappa {
    pub fn sign(self) -> f64 {
        match self {
            Kappa::Focusing => 1.0,
            Kappa::Defocusing => -1.0,
        }
    }
}

impl TryFrom<i64> for Kappa {
    type Error = String;

    fn try_from(v: i64) -> Result<Self, String> {
        match v {
            1 => Ok(Kappa::Focusing),
            -1 => Ok(Kappa::Defocusing),
            _ => Err(format!("kappa must be 1 or -1, got {v}")),
        }
    }
}

impl From<Kappa> for i64 {
    fn from(k: Kappa) -> i64 {
        k.sign() as i64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub kappa: Kappa,
    pub lambda: f64,
    pub tol_grad: f64,
    pub tol_inner: f64,
    pub max_outer_iters: usize,
    pub max_inner_iters: usize,
    pub n_starts: usize,
    pub seed: u64,
}

impl SolverConfig {
    pub fn new(kappa: Kappa, lambda: f64) -> Self {
        Self {
            kappa,
            lambda,
            tol_grad: 1e-9,
            tol_inner: 1e-11,
            max_outer_iters: 500,
            max_inner_iters: 100,
            n_starts: 8,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |what: &str| Err(SolverError::Config(what.to_string()));
        if !self.lambda.is_finite() {
            return bad("lambda must be finite");
        }
        if !(self.tol_grad > 0.0 && self.tol_inner > 0.0) {
            return bad("tolerances must be positive");
        }
        if self.n_starts == 0 || self.max_outer_iters == 0 || self.max_inner_iters == 0 {
            return bad("iteration caps and n_starts must be positive");
        }
        Ok(())
    }
}

/// `J_λ(u) = ½ q_λ(u) − κ Ψ(u)`.
pub fn energy(g: &WeightedGraph, nl: &Nonlinearity, kappa: Kappa, lambda: f64, u: &GraphFunction) -> f64 {
    let q = u.energy_form(g) - lambda * u.inner_m(g, u);
    0.5 * q - kappa.sign() * psi(g, nl, u)
}

/// The vertex function `r = (1/m) A u − λ u − κ f(u)`, so that
/// `∇J_λ(u) v = Σ m r v`. It vanishes exactly at solutions.
pub fn energy_gradient(
    fm: &FormMatrices,
    nl: &Nonlinearity,
    kappa: Kappa,
    lambda: f64,
    u: &GraphFunction,
) -> GraphFunction {
    let au = fm.stiffness.mul(u.values());
    GraphFunction::new(
        au.iter()
            .zip(&fm.mass)
            .zip(u.values())
            .enumerate()
            .map(|(x, ((a, m), &s))| a / m - lambda * s - kappa.sign() * nl.f(x, s))
            .collect(),
    )
}

/// Norms reported with a solution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Norms {
    pub energy: f64,
    pub l2: f64,
    pub lp: f64,
    pub sup: f64,
}

impl Norms {
    pub fn of(g: &WeightedGraph, u: &GraphFunction, p: f64) -> Self {
        Self {
            energy: u.norm_energy(g),
            l2: u.norm_lp(g, 2.0),
            lp: u.norm_lp(g, p),
            sup: u.norm_sup(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    NoNontrivial,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StartStatus {
    Converged,
    Collapsed,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StartReport {
    pub index: usize,
    pub seed: u64,
    pub status: StartStatus,
    /// `κ J_λ` at the start's final point.
    pub level: f64,
    pub residual_grad: f64,
    pub outer_iters: usize,
    pub polished: bool,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GroundStateResult {
    pub status: Status,
    pub kappa: Kappa,
    pub lambda: f64,
    pub u: GraphFunction,
    /// `J_λ(u)`.
    pub energy: f64,
    /// Estimate of the ground level `c_λ = κ J_λ(u)`.
    pub level: f64,
    /// `||r||_{l²_m}` for the gradient representative `r`.
    pub residual_grad: f64,
    /// `(|∇J(u)u|, max over the F-basis |∇J(u)e_n|)`.
    pub nehari_residuals: (f64, f64),
    pub norms: Norms,
    pub second_order_ok: bool,
    pub starts: Vec<StartReport>,
}

/// Maximizer of `κ J_λ` over `Ê(w) = {t w + v : t ≥ 0, v ∈ F}`.
#[derive(Clone, Debug, PartialEq)]
pub struct InnerResult {
    pub u: GraphFunction,
    /// `κ J_λ(u)`.
    pub value: f64,
    pub t: f64,
    /// `‖∇(κJ)|_{Ê(w)}‖` at the returned point.
    pub stationarity: f64,
    /// Whether the restricted Hessian is negative definite there.
    pub second_order_ok: bool,
}

struct InnerState {
    /// Unit direction, full coordinates, supported off `F`.
    w: DVector<f64>,
    t: f64,
    y: DVector<f64>,
    value: f64,
    stationarity: f64,
    second_order_ok: bool,
}

/// A fixed `(graph, nonlinearity, κ, λ)` with its full eigenbasis.
pub struct Problem<'a> {
    g: &'a WeightedGraph,
    nl: &'a Nonlinearity,
    cfg: SolverConfig,
    fm: FormMatrices,
    spl: Splitting,
    eigenvectors: DMatrix<f64>,
    sqrt_ev: Vec<f64>,
    basis: DMatrix<f64>,
    d: Vec<f64>,
    f_idx: Vec<usize>,
    p_idx: Vec<usize>,
}

impl<'a> Problem<'a> {
    pub fn new(
        g: &'a WeightedGraph,
        nl: &'a Nonlinearity,
        cfg: &SolverConfig,
        spec: &SpectralData,
    ) -> Result<Self, SolverError> {
        cfg.validate()?;
        let n = g.len();
        if n > DENSE_LIMIT {
            return Err(SolverError::TooLarge { n, limit: DENSE_LIMIT });
        }
        if !spec.is_complete() || spec.dim() != n {
            return Err(SolverError::WindowInsufficient { k: spec.k(), n });
        }
        nl.check_shape(g).map_err(|e| SolverError::Config(e.to_string()))?;
        let fm = assemble(g)?;
        let spl = split(spec, cfg.lambda, None)?;
        let sqrt_ev: Vec<f64> = spec.eigenvalues.iter().map(|l| l.sqrt()).collect();
        let basis = DMatrix::from_fn(n, n, |r, c| spec.eigenvectors[(r, c)] / sqrt_ev[c]);
        let k = cfg.kappa.sign();
        let d: Vec<f64> = spec.eigenvalues.iter().map(|l| k * (1.0 - cfg.lambda / l)).collect();
        let (mut f_idx, p_idx) = match cfg.kappa {
            Kappa::Focusing => (spl.minus.clone(), spl.plus.clone()),
            Kappa::Defocusing => (spl.plus.clone(), spl.minus.clone()),
        };
        f_idx.extend(&spl.zero);
        f_idx.sort_unstable();
        let mut d = d;
        for &j in &spl.zero {
            d[j] = 0.0;
        }
        Ok(Self {
            g,
            nl,
            cfg: cfg.clone(),
            fm,
            spl,
            eigenvectors: spec.eigenvectors.clone(),
            sqrt_ev,
            basis,
            d,
            f_idx,
            p_idx,
        })
    }

    pub fn splitting(&self) -> &Splitting {
        &self.spl
    }

    pub fn form(&self) -> &FormMatrices {
        &self.fm
    }

    /// 0-based eigenpair indices spanning `F`.
    pub fn f_indices(&self) -> &[usize] {
        &self.f_idx
    }

    /// 0-based eigenpair indices spanning the complement of `F`.
    pub fn p_indices(&self) -> &[usize] {
        &self.p_idx
    }

    fn kappa(&self) -> f64 {
        self.cfg.kappa.sign()
    }

    fn to_coords(&self, u: &[f64]) -> DVector<f64> {
        let mu: Vec<f64> = self.fm.mass.iter().zip(u).map(|(m, x)| m * x).collect();
        let a = self.eigenvectors.tr_mul(&DVector::from_vec(mu));
        DVector::from_fn(a.len(), |j, _| a[j] * self.sqrt_ev[j])
    }

    fn to_function(&self, y: &DVector<f64>) -> GraphFunction {
        GraphFunction::new((&self.basis * y).as_slice().to_vec())
    }

    fn psi_vec(&self, u: &DVector<f64>) -> f64 {
        u.iter()
            .enumerate()
            .map(|(x, &s)| self.fm.mass[x] * self.nl.F(x, s))
            .sum()
    }

    fn mf(&self, u: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(u.len(), |x, _| self.fm.mass[x] * self.nl.f(x, u[x]))
    }

    fn mdf(&self, u: &DVector<f64>) -> Vec<f64> {
        u.iter()
            .enumerate()
            .map(|(x, &s)| self.fm.mass[x] * self.nl.df(x, s))
            .collect()
    }

    /// `κ J_λ` in coordinates.
    fn kj(&self, y: &DVector<f64>) -> f64 {
        let quad: f64 = y.iter().zip(&self.d).map(|(v, d)| d * v * v).sum();
        0.5 * quad - self.psi_vec(&(&self.basis * y))
    }

    fn kj_grad(&self, y: &DVector<f64>) -> DVector<f64> {
        let u = &self.basis * y;
        let mut g = -self.basis.tr_mul(&self.mf(&u));
        for (gi, (yi, di)) in g.iter_mut().zip(y.iter().zip(&self.d)) {
            *gi += di * yi;
        }
        g
    }

    /// `Qᵀ diag(m f'(u)) Q`.
    fn curvature(&self, q: &DMatrix<f64>, u: &DVector<f64>) -> DMatrix<f64> {
        let w = self.mdf(u);
        let mut scaled = q.clone();
        for (r, wr) in w.iter().enumerate() {
            scaled.row_mut(r).scale_mut(*wr);
        }
        q.tr_mul(&scaled)
    }

    fn unit_direction(&self, w: &GraphFunction) -> Result<DVector<f64>, SolverError> {
        if w.len() != self.g.len() {
            return Err(crate::error::GraphError::ShapeMismatch {
                expected: self.g.len(),
                got: w.len(),
            }
            .into());
        }
        let mut y = self.to_coords(w.values());
        let total = y.norm();
        for &j in &self.f_idx {
            y[j] = 0.0;
        }
        let nrm = y.norm();
        if self.p_idx.is_empty() || !(nrm > 1e-12 * total) || nrm == 0.0 {
            return Err(SolverError::DegenerateDirection);
        }
        Ok(y / nrm)
    }

    /// Maximizes `κ J_λ` over `Ê(w)`.
    pub fn inner_maximize(&self, w: &GraphFunction) -> Result<InnerResult, SolverError> {
        let w = self.unit_direction(w)?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        let st = self.inner(&w, &mut rng)?;
        Ok(InnerResult {
            u: self.to_function(&st.y),
            value: st.value,
            t: st.t,
            stationarity: st.stationarity,
            second_order_ok: st.second_order_ok,
        })
    }

    fn inner(&self, w: &DVector<f64>, rng: &mut ChaCha8Rng) -> Result<InnerState, SolverError> {
        let n = self.g.len();
        let nf = self.f_idx.len();
        let dim = nf + 1;
        // columns: the ray direction, then the F coordinates
        let q0 = &self.basis * w;
        let q = DMatrix::from_fn(n, dim, |r, c| {
            if c == 0 {
                q0[r]
            } else {
                self.basis[(r, self.f_idx[c - 1])]
            }
        });
        let dw: f64 = w.iter().zip(&self.d).map(|(v, d)| d * v * v).sum();
        let ds: Vec<f64> = std::iter::once(dw)
            .chain(self.f_idx.iter().map(|&j| self.d[j]))
            .collect();

        let value = |s: &DVector<f64>| -> f64 {
            let quad: f64 = s.iter().zip(&ds).map(|(v, d)| d * v * v).sum();
            0.5 * quad - self.psi_vec(&(&q * s))
        };
        let gradient = |s: &DVector<f64>| -> DVector<f64> {
            let mut gr = -q.tr_mul(&self.mf(&(&q * s)));
            for (gi, (si, di)) in gr.iter_mut().zip(s.iter().zip(&ds)) {
                *gi += di * si;
            }
            gr
        };
        let neg_hessian = |s: &DVector<f64>| -> DMatrix<f64> {
            let mut h = self.curvature(&q, &(&q * s));
            for (i, di) in ds.iter().enumerate() {
                h[(i, i)] -= di;
            }
            h
        };

        let t_ray = self.ray_maximum(&q0, dw)?;
        let mut s = DVector::zeros(dim);
        s[0] = t_ray;
        let mut result = self.newton_ascent(&mut s, &value, &gradient, &neg_hessian);
        if !result {
            // best of five random starts in (t, v)
            let scale = t_ray / (dim as f64).sqrt();
            let mut best: Option<(f64, DVector<f64>)> = None;
            for _ in 0..5 {
                let mut cand = DVector::from_fn(dim, |_, _| {
                    let z: f64 = StandardNormal.sample(rng);
                    0.3 * scale * z
                });
                cand[0] = t_ray * rng.random_range(0.2..2.0);
                let v = value(&cand);
                if best.as_ref().is_none_or(|(bv, _)| v > *bv) {
                    best = Some((v, cand));
                }
            }
            s = best.expect("five candidates").1;
            result = self.newton_ascent(&mut s, &value, &gradient, &neg_hessian);
        }
        let stationarity = gradient(&s).norm();
        if !result {
            return Err(SolverError::InnerNoConvergence { residual: stationarity });
        }
        let mut w = w.clone();
        if s[0] < 0.0 {
            w = -w;
            s[0] = -s[0];
        }
        let second_order_ok = neg_hessian(&s).cholesky().is_some();
        let mut y = &w * s[0];
        for (c, &j) in self.f_idx.iter().enumerate() {
            y[j] = s[c + 1];
        }
        Ok(InnerState {
            w,
            t: s[0],
            value: value(&s),
            y,
            stationarity,
            second_order_ok,
        })
    }

    /// Positive root of `φ'(t) = D t − q0ᵀ M f(t q0)`.
    fn ray_maximum(&self, q0: &DVector<f64>, dw: f64) -> Result<f64, SolverError> {
        let dphi = |t: f64| dw * t - q0.dot(&self.mf(&(q0 * t)));
        let ddphi = |t: f64| {
            let u = q0 * t;
            dw - q0.iter().zip(self.mdf(&u)).map(|(a, w)| a * a * w).sum::<f64>()
        };
        let fail = |t: f64| SolverError::InnerNoConvergence {
            residual: dphi(t).abs(),
        };
        let (mut lo, mut hi) = (1.0, 1.0);
        if dphi(1.0) > 0.0 {
            while dphi(hi) > 0.0 {
                lo = hi;
                hi *= 2.0;
                if hi > 1e150 {
                    return Err(fail(hi));
                }
            }
        } else {
            while dphi(lo) <= 0.0 {
                hi = lo;
                lo *= 0.5;
                if lo < 1e-150 {
                    return Err(fail(lo));
                }
            }
        }
        let mut t = 0.5 * (lo + hi);
        for _ in 0..200 {
            let v = dphi(t);
            if v > 0.0 {
                lo = t;
            } else {
                hi = t;
            }
            let slope = ddphi(t);
            let newton = t - v / slope;
            t = if slope < 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo <= 1e-15 * hi || v == 0.0 {
                break;
            }
        }
        Ok(t)
    }

    /// Safeguarded Newton ascent with a Levenberg shift and backtracking.
    fn newton_ascent(
        &self,
        s: &mut DVector<f64>,
        value: &dyn Fn(&DVector<f64>) -> f64,
        gradient: &dyn Fn(&DVector<f64>) -> DVector<f64>,
        neg_hessian: &dyn Fn(&DVector<f64>) -> DMatrix<f64>,
    ) -> bool {
        let tol = self.cfg.tol_inner;
        let mut h = value(s);
        let mut gr = gradient(s);
        for _ in 0..self.cfg.max_inner_iters {
            let gnorm = gr.norm();
            if gnorm <= tol * s.norm().max(1.0) {
                return true;
            }
            let nh = neg_hessian(s);
            let scale = nh.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
            let mut shift = 0.0;
            let step = loop {
                let mut m = nh.clone();
                for i in 0..m.nrows() {
                    m[(i, i)] += shift;
                }
                if let Some(ch) = m.cholesky() {
                    break ch.solve(&gr);
                }
                shift = if shift == 0.0 { 1e-8 * scale } else { shift * 10.0 };
            };
            let slope = gr.dot(&step);
            let mut alpha = 1.0;
            let mut accepted = false;
            for _ in 0..50 {
                let trial = &*s + &step * alpha;
                let ht = value(&trial);
                let gt = gradient(&trial);
                let armijo = ht >= h + 1e-4 * alpha * slope;
                let flat = ht >= h - 1e-13 * (1.0 + h.abs()) && gt.norm() < gnorm;
                if ht.is_finite() && (armijo || flat) {
                    *s = trial;
                    h = ht;
                    gr = gt;
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !accepted {
                return gnorm <= 1e3 * tol * s.norm().max(1.0);
            }
        }
        gr.norm() <= tol * s.norm().max(1.0)
    }

    /// Projected-gradient descent of `w ↦ max_{Ê(w)} κJ` on the unit sphere
    /// of the complement of `F`, followed by a Newton polish.
    fn run_start(&self, index: usize, start: DVector<f64>) -> (StartReport, Option<(GraphFunction, bool)>) {
        let seed = self.cfg.seed.wrapping_add(index as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut report = StartReport {
            index,
            seed,
            status: StartStatus::Failed,
            level: f64::NAN,
            residual_grad: f64::NAN,
            outer_iters: 0,
            polished: false,
            message: String::new(),
        };
        let mut st = match self.inner(&start, &mut rng) {
            Ok(st) => st,
            Err(e) => {
                report.message = e.to_string();
                return (report, None);
            }
        };
        let tangent = |st: &InnerState| -> DVector<f64> {
            let full = self.kj_grad(&st.y);
            let mut gp = DVector::zeros(full.len());
            for &j in &self.p_idx {
                gp[j] = st.t * full[j];
            }
            let along = gp.dot(&st.w);
            gp - &st.w * along
        };
        let mut grad = tangent(&st);
        let mut prev: Option<(DVector<f64>, DVector<f64>)> = None;
        let mut iters = 0;
        while iters < self.cfg.max_outer_iters {
            let gnorm = grad.norm();
            if gnorm <= 1e-9 * st.value.abs() || gnorm == 0.0 {
                break;
            }
            let mut alpha = match &prev {
                Some((w_old, g_old)) => {
                    let sk = &st.w - w_old;
                    let yk = &grad - g_old;
                    let sy = sk.dot(&yk);
                    if sy > 0.0 {
                        sk.norm_squared() / sy
                    } else {
                        0.1 / gnorm
                    }
                }
                None => 0.1 / gnorm,
            };
            alpha = alpha.min(0.5 / gnorm);
            let mut next = None;
            for _ in 0..30 {
                let moved = &st.w - &grad * alpha;
                let w_try = &moved / moved.norm();
                if let Ok(cand) = self.inner(&w_try, &mut rng) {
                    if cand.value <= st.value - 1e-4 * alpha * gnorm * gnorm {
                        next = Some(cand);
                        break;
                    }
                }
                alpha *= 0.5;
            }
            let Some(cand) = next else { break };
            prev = Some((st.w.clone(), grad.clone()));
            st = cand;
            grad = tangent(&st);
            iters += 1;
        }
        report.outer_iters = iters;

        let outer_value = st.value;
        let mut y = st.y.clone();
        let mut second_order_ok = st.second_order_ok;
        if let Some(pol) = self.polish(&st.y) {
            let residual = self.residual_of(&self.to_function(&pol));
            let value = self.kj(&pol);
            if residual <= self.cfg.tol_grad && value <= outer_value * (1.0 + 1e-6) + 1e-15 {
                y = pol;
                report.polished = true;
                // the polished point is a critical point near the inner maximizer
                second_order_ok = st.second_order_ok;
            }
        }
        let u = self.to_function(&y);
        report.level = self.kj(&y);
        report.residual_grad = self.residual_of(&u);
        if u.norm_energy(self.g) < 1e-6 {
            report.status = StartStatus::Collapsed;
        } else if report.residual_grad <= self.cfg.tol_grad && report.level > 0.0 {
            report.status = StartStatus::Converged;
        } else {
            report.message = format!(
                "residual {:e} with level {:e} after {} outer iterations",
                report.residual_grad, report.level, iters
            );
        }
        (report, Some((u, second_order_ok)))
    }

    /// Newton iteration on `∇(κJ) = 0` in coordinates.
    fn polish(&self, y0: &DVector<f64>) -> Option<DVector<f64>> {
        let mut y = y0.clone();
        let mut gnorm = self.kj_grad(&y).norm();
        for _ in 0..30 {
            if gnorm == 0.0 {
                break;
            }
            let g = self.kj_grad(&y);
            let u = &self.basis * &y;
            let mut h = -self.curvature(&self.basis, &u);
            for (i, di) in self.d.iter().enumerate() {
                h[(i, i)] += di;
            }
            let step = h.lu().solve(&(-&g))?;
            let next = &y + &step;
            let next_norm = self.kj_grad(&next).norm();
            if !(next_norm < gnorm) {
                break;
            }
            y = next;
            gnorm = next_norm;
            if step.norm() <= 1e-15 * y.norm() {
                break;
            }
        }
        Some(y)
    }

    fn residual_of(&self, u: &GraphFunction) -> f64 {
        energy_gradient(&self.fm, self.nl, self.cfg.kappa, self.cfg.lambda, u).norm_lp(self.g, 2.0)
    }

    /// `(|∇J(u)u|, max_{n ∈ F} |∇J(u)e_n|)`.
    pub fn nehari_residuals(&self, u: &GraphFunction) -> (f64, f64) {
        let r = energy_gradient(&self.fm, self.nl, self.cfg.kappa, self.cfg.lambda, u);
        let along = r.inner_m(self.g, u).abs();
        let mr: Vec<f64> = r.values().iter().zip(&self.fm.mass).map(|(a, m)| a * m).collect();
        let worst = self
            .f_idx
            .iter()
            .map(|&j| {
                self.eigenvectors
                    .column(j)
                    .iter()
                    .zip(&mr)
                    .map(|(e, v)| e * v)
                    .sum::<f64>()
                    .abs()
            })
            .fold(0.0, f64::max);
        (along, worst)
    }

    fn start_direction(&self, index: usize, warm: Option<&GraphFunction>) -> DVector<f64> {
        if index == 0 {
            if let Some(w) = warm.and_then(|w| self.unit_direction(w).ok()) {
                return w;
            }
            // the complement direction closest to the bifurcation point
            let j = *self
                .p_idx
                .iter()
                .min_by(|&&a, &&b| self.d[a].total_cmp(&self.d[b]))
                .expect("nonempty complement");
            let mut w = DVector::zeros(self.g.len());
            w[j] = 1.0;
            return w;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed.wrapping_add(index as u64) ^ 0x5eed);
        let mut w: DVector<f64> = DVector::zeros(self.g.len());
        for &j in &self.p_idx {
            w[j] = StandardNormal.sample(&mut rng);
        }
        let nrm = w.norm();
        w / nrm
    }

    /// Multi-start ground state search.
    pub fn ground_state(&self, warm: Option<&GraphFunction>) -> Result<GroundStateResult, SolverError> {
        let n = self.g.len();
        let p = self.nl.params().map_or(2.0, |pp| pp.p);
        let empty = |status: Status, starts: Vec<StartReport>| {
            let u = GraphFunction::zeros(n);
            GroundStateResult {
                status,
                kappa: self.cfg.kappa,
                lambda: self.cfg.lambda,
                energy: 0.0,
                level: 0.0,
                residual_grad: 0.0,
                nehari_residuals: (0.0, 0.0),
                norms: Norms::of(self.g, &u, p),
                second_order_ok: true,
                u,
                starts,
            }
        };
        if self.p_idx.is_empty() {
            return Ok(empty(Status::NoNontrivial, vec![]));
        }
        let outcomes: Vec<(StartReport, Option<(GraphFunction, bool)>)> = (0..self.cfg.n_starts)
            .into_par_iter()
            .map(|i| self.run_start(i, self.start_direction(i, warm)))
            .collect();
        let reports: Vec<StartReport> = outcomes.iter().map(|(r, _)| r.clone()).collect();
        let odd = self.nl.is_odd();
        let mut best: Option<(f64, GraphFunction, bool)> = None;
        for (report, sol) in &outcomes {
            let (StartStatus::Converged, Some((u, so))) = (report.status, sol) else {
                continue;
            };
            let u = if odd { sign_normalized(u) } else { u.clone() };
            let better = match &best {
                None => true,
                Some((lvl, bu, _)) => {
                    let tie = (report.level - lvl).abs() <= 1e-9 * (1.0 + lvl.abs());
                    if tie {
                        lexicographic_less(u.values(), bu.values())
                    } else {
                        report.level < *lvl
                    }
                }
            };
            if better {
                best = Some((report.level, u, *so));
            }
        }
        let Some((_, u, second_order_ok)) = best else {
            if reports.iter().all(|r| r.status == StartStatus::Collapsed) {
                return Ok(empty(Status::NoNontrivial, reports));
            }
            return Err(SolverError::AllStartsDiverged(self.cfg.n_starts));
        };
        let energy = energy(self.g, self.nl, self.cfg.kappa, self.cfg.lambda, &u);
        Ok(GroundStateResult {
            status: Status::Converged,
            kappa: self.cfg.kappa,
            lambda: self.cfg.lambda,
            energy,
            level: self.kappa() * energy,
            residual_grad: self.residual_of(&u),
            nehari_residuals: self.nehari_residuals(&u),
            norms: Norms::of(self.g, &u, p),
            second_order_ok,
            u,
            starts: reports,
        })
    }
}

/// Flips `u` so that its first coordinate with `|u| > 1e-12 max|u|` is positive.
pub fn sign_normalized(u: &GraphFunction) -> GraphFunction {
    let cut = 1e-12 * u.norm_sup();
    match u.values().iter().find(|v| v.abs() > cut) {
        Some(&v) if v < 0.0 => u.scaled(-1.0),
        _ => u.clone(),
    }
}

fn lexicographic_less(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if (x - y).abs() > 1e-12 * (1.0 + x.abs().max(y.abs())) {
            return x < y;
        }
    }
    false
}

/// Ground state of `κ J_λ`, optionally warm-started from `warm`.
pub fn ground_state(
    g: &WeightedGraph,
    nl: &Nonlinearity,
    cfg: &SolverConfig,
    spec: &SpectralData,
    warm: Option<&GraphFunction>,
) -> Result<GroundStateResult, SolverError> {
    Problem::new(g, nl, cfg, spec)?.ground_state(warm)
}

/// Outcome of one residual minimization from a random start.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResidualRun {
    pub seed: u64,
    pub norm_energy: f64,
    pub residual: f64,
    pub iterations: usize,
}

/// Levenberg–Marquardt on `R(u) = A u − λ M u − κ M f(u)` from `u0`.
pub fn minimize_residual(
    fm: &FormMatrices,
    nl: &Nonlinearity,
    kappa: Kappa,
    lambda: f64,
    u0: &[f64],
    max_iters: usize,
) -> (Vec<f64>, usize) {
    let n = fm.dim();
    let a = fm.stiffness.to_dense();
    let k = kappa.sign();
    let residual = |u: &DVector<f64>| -> DVector<f64> {
        let au = &a * u;
        DVector::from_fn(n, |x, _| {
            au[x] - lambda * fm.mass[x] * u[x] - k * fm.mass[x] * nl.f(x, u[x])
        })
    };
    let mut u = DVector::from_column_slice(u0);
    let mut r = residual(&u);
    let mut cost = r.norm_squared();
    let mut mu = 1e-3;
    let mut iters = 0;
    while iters < max_iters && cost > 0.0 {
        iters += 1;
        let mut jac = a.clone();
        for x in 0..n {
            jac[(x, x)] -= lambda * fm.mass[x] + k * fm.mass[x] * nl.df(x, u[x]);
        }
        // plain Newton first; the normal equations lose curvature below rounding
        if let Some(step) = jac.clone().lu().solve(&(-&r)) {
            let trial = &u + &step;
            let rt = residual(&trial);
            let ct = rt.norm_squared();
            if ct < cost {
                let small_step = step.norm() <= 1e-16 * trial.norm().max(1e-300);
                u = trial;
                r = rt;
                cost = ct;
                if small_step {
                    break;
                }
                continue;
            }
        }
        let jtj = jac.tr_mul(&jac);
        let jtr = jac.tr_mul(&r);
        let diag_scale = (0..n).map(|i| jtj[(i, i)]).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let mut improved = false;
        for _ in 0..40 {
            let mut m = jtj.clone();
            for i in 0..n {
                m[(i, i)] += mu * diag_scale;
            }
            let Some(step) = m.cholesky().map(|c| c.solve(&(-&jtr))) else {
                mu *= 10.0;
                continue;
            };
            let trial = &u + &step;
            let rt = residual(&trial);
            let ct = rt.norm_squared();
            if ct < cost {
                let small_step = step.norm() <= 1e-16 * trial.norm().max(1e-300);
                u = trial;
                r = rt;
                cost = ct;
                mu = (mu * 0.3).max(1e-30);
                improved = !small_step;
                break;
            }
            mu *= 10.0;
        }
        if !improved {
            break;
        }
    }
    (u.as_slice().to_vec(), iters)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NoSolutionReport {
    pub lambda: f64,
    pub lambda_1: f64,
    pub runs: Vec<ResidualRun>,
    pub all_collapsed: bool,
    pub samples: usize,
    /// Smallest sampled `∇J(u)u / ||u||²_{l²_m}`.
    pub min_pairing_ratio: f64,
    pub positivity_ok: bool,
}

impl NoSolutionReport {
    pub fn passed(&self) -> bool {
        self.all_collapsed && self.positivity_ok
    }
}

/// Certifies numerically that the defocusing problem with `λ ≤ λ₁` has only
/// the trivial solution.
pub fn verify_no_solution(
    g: &WeightedGraph,
    nl: &Nonlinearity,
    spec: &SpectralData,
    lambda: f64,
    n_starts: usize,
    seed: u64,
) -> Result<NoSolutionReport, SolverError> {
    let lambda_1 = spec.eigenvalues[0];
    if lambda > lambda_1 + crate::spectral::default_split_tol(lambda) {
        return Err(SolverError::Config(format!(
            "nonexistence needs lambda <= lambda_1 = {lambda_1}, got {lambda}"
        )));
    }
    let fm = assemble(g)?;
    let n = g.len();
    let kappa = Kappa::Defocusing;
    let runs: Vec<ResidualRun> = (0..n_starts)
        .into_par_iter()
        .map(|i| {
            let s = seed.wrapping_add(i as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let scale = 10f64.powf(rng.random_range(-1.0..0.5));
            let u0: Vec<f64> = (0..n)
                .map(|_| scale * Distribution::<f64>::sample(&StandardNormal, &mut rng))
                .collect();
            let (u, iterations) = minimize_residual(&fm, nl, kappa, lambda, &u0, 500);
            let u = GraphFunction::new(u);
            ResidualRun {
                seed: s,
                norm_energy: u.norm_energy(g),
                residual: energy_gradient(&fm, nl, kappa, lambda, &u).norm_lp(g, 2.0),
                iterations,
            }
        })
        .collect();
    if let Some(bad) = runs
        .iter()
        .find(|r| r.norm_energy >= 1e-6 && r.residual <= 1e-10 * r.norm_energy)
    {
        return Err(SolverError::UnexpectedSolution(format!(
            "start {} reached ||u||_E = {:e} with residual {:e}",
            bad.seed, bad.norm_energy, bad.residual
        )));
    }
    let all_collapsed = runs.iter().all(|r| r.norm_energy < 1e-6);

    let samples = 1000;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xfeed);
    let mut min_ratio = f64::INFINITY;
    for _ in 0..samples {
        let scale = 10f64.powf(rng.random_range(-3.0..1.0));
        let u = GraphFunction::new(
            (0..n)
                .map(|_| scale * Distribution::<f64>::sample(&StandardNormal, &mut rng))
                .collect(),
        );
        let r = energy_gradient(&fm, nl, kappa, lambda, &u);
        let pairing = r.inner_m(g, &u);
        min_ratio = min_ratio.min(pairing / u.inner_m(g, &u));
    }
    Ok(NoSolutionReport {
        lambda,
        lambda_1,
        runs,
        all_collapsed,
        samples,
        min_pairing_ratio: min_ratio,
        positivity_ok: min_ratio > 0.0,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriticalValueBounds {
    pub skipped: Option<String>,
    /// `||u||^p_{l^p_m}`.
    pub lp_power: f64,
    /// `C₁ = [q (½ − 1/q) a₀]⁻¹`.
    pub c1: f64,
    pub kappa_j: f64,
    pub lp_bound_ok: bool,
    pub delta: f64,
    pub energy_norm_sq: f64,
    /// `δ ||u||²_E / κJ`, the smallest admissible `C₂` for this solution.
    pub c2_empirical: f64,
}

/// Relative slack on the `l^p` bound; the single-vertex case attains equality.
pub const CRITICAL_BOUND_SLACK: f64 = 1e-9;

/// Checks `||u||^p_{l^p_m} ≤ C₁ κ J_λ(u)` and reports `δ ||u||²_E / κ J_λ(u)`.
pub fn check_critical_value_bounds(
    g: &WeightedGraph,
    result: &GroundStateResult,
    nl: &Nonlinearity,
    spl: &Splitting,
) -> Result<CriticalValueBounds, SolverError> {
    let pp = nl.params().ok_or(SolverError::MissingParams)?;
    let c1 = 1.0 / (pp.q * (0.5 - 1.0 / pp.q) * pp.a0);
    if result.u.is_zero() {
        return Ok(CriticalValueBounds {
            skipped: Some("u = 0: bounds are vacuous".into()),
            lp_power: 0.0,
            c1,
            kappa_j: 0.0,
            lp_bound_ok: true,
            delta: spl.delta,
            energy_norm_sq: 0.0,
            c2_empirical: 0.0,
        });
    }
    let lp_power = result.u.norm_lp(g, pp.p).powf(pp.p);
    let kappa_j = result.kappa.sign() * result.energy;
    let rhs = c1 * kappa_j;
    let lp_bound_ok = lp_power <= rhs + CRITICAL_BOUND_SLACK * rhs.abs();
    if !lp_bound_ok {
        return Err(SolverError::BoundViolated(format!(
            "||u||^p = {lp_power:e} exceeds C1 kJ = {rhs:e}"
        )));
    }
    let energy_norm_sq = result.u.energy_form(g);
    Ok(CriticalValueBounds {
        skipped: None,
        lp_power,
        c1,
        kappa_j,
        lp_bound_ok,
        delta: spl.delta,
        energy_norm_sq,
        c2_empirical: spl.delta * energy_norm_sq / kappa_j,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{path_graph, random_connected_graph, GraphBuilder};
    use crate::nonlinearity::power_nonlinearity;
    use crate::spectral::{eigensolve, EigenOptions};
    use proptest::prelude::*;

    fn full_spec(g: &WeightedGraph) -> SpectralData {
        let fm = assemble(g).unwrap();
        eigensolve(&fm, g.len(), &EigenOptions::default()).unwrap()
    }

    fn quartic(n: usize) -> Nonlinearity {
        power_nonlinearity(4.0, vec![1.0; n]).unwrap()
    }

    #[test]
    fn energy_examples() {
        let g = path_graph(1, 1.0, 1.0, 0.0);
        let nl = quartic(1);
        assert_eq!(energy(&g, &nl, Kappa::Focusing, 0.0, &GraphFunction::zeros(1)), 0.0);
        for a in [0.3, 1.0, 1.7] {
            let u = GraphFunction::new(vec![a]);
            let want = a * a / 2.0 - a.powi(4) / 4.0;
            assert!((energy(&g, &nl, Kappa::Focusing, 0.0, &u) - want).abs() < 1e-15);
        }
    }

    #[test]
    fn single_vertex_is_critical_at_one() {
        let g = path_graph(1, 1.0, 1.0, 0.0);
        let fm = assemble(&g).unwrap();
        let r = energy_gradient(&fm, &quartic(1), Kappa::Focusing, 0.0, &GraphFunction::new(vec![1.0]));
        assert_eq!(r.values(), &[0.0]);
    }

    #[test]
    fn single_vertex_ground_state() {
        let g = path_graph(1, 1.0, 1.0, 0.0);
        let nl = quartic(1);
        let spec = full_spec(&g);
        let res = ground_state(&g, &nl, &SolverConfig::new(Kappa::Focusing, 0.0), &spec, None).unwrap();
        assert_eq!(res.status, Status::Converged);
        assert!((res.u.values()[0].abs() - 1.0).abs() < 1e-12);
        assert!((res.energy - 0.25).abs() < 1e-12);
        assert!((res.level - 0.25).abs() < 1e-12);
        let spl = split(&spec, 0.0, None).unwrap();
        let b = check_critical_value_bounds(&g, &res, &nl, &spl).unwrap();
        assert!((b.lp_power - 1.0).abs() < 1e-12 && (b.c1 * b.kappa_j - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_vertex_ray_closed_form() {
        // u = √(V − λ), value (V − λ)²/4
        let mut gb = GraphBuilder::new();
        gb.add_vertex(0, 1.0, 2.0).unwrap();
        let g = gb.build().unwrap();
        let nl = quartic(1);
        let spec = full_spec(&g);
        let cfg = SolverConfig::new(Kappa::Focusing, 0.5);
        let prob = Problem::new(&g, &nl, &cfg, &spec).unwrap();
        let inner = prob.inner_maximize(&GraphFunction::new(vec![-3.0])).unwrap();
        assert!((inner.u.values()[0] + 2.5f64.sqrt()).abs() < 1e-12);
        // ||u||_E² = (c + m) u²
        assert!((inner.t - 7.5f64.sqrt()).abs() < 1e-12);
        assert!((inner.value - 2.5 * 2.5 / 4.0).abs() < 1e-12);
    }

    fn two_vertex() -> WeightedGraph {
        path_graph(2, 1.0, 1.0, 0.0)
    }

    #[test]
    fn two_vertex_symmetric_inner_maximum() {
        let g = two_vertex();
        let nl = quartic(2);
        let spec = full_spec(&g);
        let cfg = SolverConfig::new(Kappa::Focusing, 0.0);
        let prob = Problem::new(&g, &nl, &cfg, &spec).unwrap();
        let inner = prob.inner_maximize(&GraphFunction::new(vec![1.0, 1.0])).unwrap();
        for v in inner.u.values() {
            assert!((v - 1.0).abs() < 1e-12);
        }
        assert!((inner.value - 0.5).abs() < 1e-12);
        let (a, b) = prob.nehari_residuals(&inner.u);
        assert!(a <= 1e-9 && b <= 1e-9);
    }

    #[test]
    fn two_vertex_ground_state() {
        let g = two_vertex();
        let nl = quartic(2);
        let spec = full_spec(&g);
        let res = ground_state(&g, &nl, &SolverConfig::new(Kappa::Focusing, 0.0), &spec, None).unwrap();
        assert!((res.level - 0.5).abs() < 1e-10, "{}", res.level);
        for v in res.u.values() {
            assert!((v - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn defocusing_below_first_eigenvalue_is_trivial() {
        let g = path_graph(3, 1.0, 1.0, 0.0);
        let nl = quartic(3);
        let spec = full_spec(&g);
        let res = ground_state(&g, &nl, &SolverConfig::new(Kappa::Defocusing, 0.5), &spec, None).unwrap();
        assert_eq!(res.status, Status::NoNontrivial);
        assert!(res.u.is_zero());
        let report = verify_no_solution(&g, &nl, &spec, 0.5, 8, 0).unwrap();
        assert!(report.passed(), "{report:?}");
        let boundary = verify_no_solution(&g, &nl, &spec, spec.eigenvalues[0], 8, 1).unwrap();
        assert!(boundary.passed(), "{boundary:?}");
    }

    #[test]
    fn defocusing_in_first_gap() {
        let g = path_graph(3, 1.0, 1.0, 0.0);
        let nl = quartic(3);
        let spec = full_spec(&g);
        let cfg = SolverConfig::new(Kappa::Defocusing, 1.5);
        let res = ground_state(&g, &nl, &cfg, &spec, None).unwrap();
        assert_eq!(res.status, Status::Converged);
        assert!(res.level > 0.0);
        assert!(res.residual_grad <= 1e-9);
        assert!(res.nehari_residuals.0 <= 1e-9 && res.nehari_residuals.1 <= 1e-9);
    }

    #[test]
    fn config_validation() {
        let mut cfg = SolverConfig::new(Kappa::Focusing, 0.0);
        cfg.tol_grad = 0.0;
        assert!(cfg.validate().is_err());
        assert!(Kappa::try_from(0).is_err());
        assert_eq!(i64::from(Kappa::Defocusing), -1);
    }

    #[test]
    fn solver_refuses_partial_window() {
        let g = path_graph(4, 1.0, 1.0, 0.0);
        let nl = quartic(4);
        let fm = assemble(&g).unwrap();
        let spec = eigensolve(&fm, 2, &EigenOptions::default()).unwrap();
        assert!(matches!(
            ground_state(&g, &nl, &SolverConfig::new(Kappa::Focusing, 0.0), &spec, None),
            Err(SolverError::WindowInsufficient { k: 2, n: 4 })
        ));
    }

    #[test]
    fn direction_in_f_is_degenerate() {
        let g = path_graph(3, 1.0, 1.0, 0.0);
        let nl = quartic(3);
        let spec = full_spec(&g);
        let cfg = SolverConfig::new(Kappa::Focusing, 1.5);
        let prob = Problem::new(&g, &nl, &cfg, &spec).unwrap();
        assert!(matches!(
            prob.inner_maximize(&spec.eigenvector(0)),
            Err(SolverError::DegenerateDirection)
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn gradient_matches_differences(
            seed in 0u64..100,
            lambda in 0.0f64..4.0,
            focusing in any::<bool>(),
            vals in prop::collection::vec(-2.0f64..2.0, 5),
            dir in prop::collection::vec(-1.0f64..1.0, 5),
        ) {
            let g = random_connected_graph(5, 0.3, seed);
            let nl = power_nonlinearity(3.0, vec![1.0; 5]).unwrap();
            let kappa = if focusing { Kappa::Focusing } else { Kappa::Defocusing };
            let fm = assemble(&g).unwrap();
            let u = GraphFunction::new(vals);
            let h = GraphFunction::new(dir);
            let eps = 1e-5;
            let fd = (energy(&g, &nl, kappa, lambda, &u.axpy(eps, &h))
                - energy(&g, &nl, kappa, lambda, &u.axpy(-eps, &h))) / (2.0 * eps);
            let exact = energy_gradient(&fm, &nl, kappa, lambda, &u).inner_m(&g, &h);
            prop_assert!((fd - exact).abs() <= 1e-6 * exact.abs().max(1.0), "{} vs {}", fd, exact);
        }

        #[test]
        fn kappa_flip_and_sign_symmetry(seed in 0u64..100, lambda in 0.0f64..4.0, vals in prop::collection::vec(-2.0f64..2.0, 5)) {
            let g = random_connected_graph(5, 0.3, seed);
            let nl = quartic(5);
            let u = GraphFunction::new(vals);
            let plus = energy(&g, &nl, Kappa::Focusing, lambda, &u);
            let minus = energy(&g, &nl, Kappa::Defocusing, lambda, &u);
            prop_assert!(minus >= plus);
            let flipped = energy(&g, &nl, Kappa::Focusing, lambda, &u.scaled(-1.0));
            prop_assert!((flipped - plus).abs() <= 1e-12 * plus.abs().max(1.0));
        }
    }
}
