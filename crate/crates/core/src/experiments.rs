//! Bifurcation sweeps toward spectral points and inequality audits.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{ExperimentError, SolverError};
use crate::function::GraphFunction;
use crate::graph::WeightedGraph;
use crate::nonlinearity::Nonlinearity;
use crate::solver::{check_critical_value_bounds, GroundStateResult, Kappa, Problem, SolverConfig, Status};
use crate::spectral::{assemble, default_split_tol, split, verify_form_bounds, SpectralData, FORM_BOUND_SLACK};

/// Which side of the target eigenvalue `λ` approaches from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Below,
    Above,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub kappa: Kappa,
    /// 1-based index of the target eigenvalue.
    pub target_k: usize,
    pub side: Side,
    /// `δ(λ) / gap` for each row.
    pub fractions: Vec<f64>,
    pub warm_start: bool,
    /// Number of rows re-solved from cold starts.
    pub cold_checks: usize,
    /// Tolerances, iteration caps, starts and seed; `kappa` and `lambda` are
    /// overwritten per row.
    pub solver: SolverConfig,
}

/// `0.5 · 2^{-j}` for `j = 0..10`: ten halvings spanning about 2.7 decades.
pub fn default_fractions() -> Vec<f64> {
    (0..10).map(|j| 0.5 * 0.5f64.powi(j)).collect()
}

impl SweepConfig {
    pub fn new(kappa: Kappa, target_k: usize, side: Side) -> Self {
        Self {
            kappa,
            target_k,
            side,
            fractions: default_fractions(),
            warm_start: true,
            cold_checks: 3,
            solver: SolverConfig::new(kappa, 0.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub delta: f64,
    pub norm_e: f64,
    pub norm_lp: f64,
    pub energy: f64,
    pub resid: f64,
    pub nehari: (f64, f64),
    pub status: String,
    /// `||u||^p_{l^p_m} ≤ C₁ κJ` at this row; `None` when skipped.
    pub lp_bound_ok: Option<bool>,
    pub c2_empirical: Option<f64>,
    #[serde(skip)]
    pub u: Option<GraphFunction>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Fit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ColdCheck {
    pub row: usize,
    pub warm_level: f64,
    pub cold_level: f64,
    /// Whether the cold solve found a lower level and replaced the row.
    pub replaced: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepResult {
    pub kappa: Kappa,
    pub target_k: usize,
    pub target_lambda: f64,
    pub side: Side,
    pub gap: f64,
    pub p: f64,
    pub rows: Vec<SweepRow>,
    pub fit: Fit,
    pub expected_slope: f64,
    pub scaling_ok: bool,
    pub cold_checks: Vec<ColdCheck>,
}

/// Least squares fit of `log ||u||_E` against `log δ` over `(δ, ||u||_E)` pairs
/// with positive entries.
pub fn fit_scaling(points: &[(f64, f64)]) -> Result<Fit, ExperimentError> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(d, u)| *d > 0.0 && *u > 0.0 && d.is_finite() && u.is_finite())
        .map(|(d, u)| (d.ln(), u.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(ExperimentError::TooFewRows {
            got: pts.len(),
            need: 2,
        });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(ExperimentError::BadSweep("all rows share one delta".into()));
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(Fit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

/// Minimum number of converged rows for a sweep fit.
pub const MIN_SWEEP_ROWS: usize = 5;

/// Solves ground states at `λ = λ_k ∓ δ` for each configured `δ` and fits
/// the decay exponent of `||u_λ||_E`.
pub fn bifurcation_sweep(
    g: &WeightedGraph,
    nl: &Nonlinearity,
    spec: &SpectralData,
    cfg: &SweepConfig,
) -> Result<SweepResult, ExperimentError> {
    let bad = |msg: String| Err(ExperimentError::BadSweep(msg));
    match (cfg.kappa, cfg.side) {
        (Kappa::Focusing, Side::Below) | (Kappa::Defocusing, Side::Above) => {}
        (k, s) => return bad(format!("kappa = {} must approach from {:?}", i64::from(k), opposite(s))),
    }
    let pp = nl.params().ok_or(SolverError::MissingParams)?;
    if cfg.target_k == 0 || cfg.target_k > spec.k() {
        return bad(format!("target_k = {} outside 1..={}", cfg.target_k, spec.k()));
    }
    if cfg.fractions.is_empty() || cfg.fractions.iter().any(|f| !(*f > 0.0 && *f < 1.0)) {
        return bad("fractions must lie in (0, 1)".into());
    }
    let ev = &spec.eigenvalues;
    let target = ev[cfg.target_k - 1];
    let tol = default_split_tol(target);
    let gap = match cfg.side {
        Side::Below => match ev.iter().rev().find(|&&l| l < target - tol) {
            Some(prev) => target - prev,
            None => target,
        },
        Side::Above => match ev.iter().find(|&&l| l > target + tol) {
            Some(next) => next - target,
            None => return bad(format!("no eigenvalue above lambda_{}", cfg.target_k)),
        },
    };
    let mut fractions = cfg.fractions.clone();
    fractions.sort_by(|a, b| b.total_cmp(a));
    fractions.dedup();

    let solve_row = |lambda: f64, warm: Option<&GraphFunction>| -> Result<GroundStateResult, ExperimentError> {
        let mut sc = cfg.solver.clone();
        sc.kappa = cfg.kappa;
        sc.lambda = lambda;
        Ok(Problem::new(g, nl, &sc, spec)?.ground_state(warm)?)
    };
    let make_row =
        |lambda: f64, res: Result<GroundStateResult, ExperimentError>| -> Result<SweepRow, ExperimentError> {
            let delta = split(spec, lambda, None)?.delta;
            let mut row = SweepRow {
                lambda,
                delta,
                norm_e: f64::NAN,
                norm_lp: f64::NAN,
                energy: f64::NAN,
                resid: f64::NAN,
                nehari: (f64::NAN, f64::NAN),
                status: "failed".into(),
                lp_bound_ok: None,
                c2_empirical: None,
                u: None,
            };
            let res = match res {
                Ok(r) => r,
                Err(ExperimentError::Solver(SolverError::AllStartsDiverged(_))) => return Ok(row),
                Err(e) => return Err(e),
            };
            row.norm_e = res.norms.energy;
            row.norm_lp = res.norms.lp;
            row.energy = res.energy;
            row.resid = res.residual_grad;
            row.nehari = res.nehari_residuals;
            row.status = match res.status {
                Status::Converged => "converged",
                Status::NoNontrivial => "no_nontrivial",
            }
            .into();
            if res.status == Status::Converged {
                let spl = split(spec, lambda, None)?;
                let b = check_critical_value_bounds(g, &res, nl, &spl)?;
                row.lp_bound_ok = Some(b.lp_bound_ok);
                row.c2_empirical = Some(b.c2_empirical);
                row.u = Some(res.u);
            }
            Ok(row)
        };

    let lambda_of = |frac: f64| match cfg.side {
        Side::Below => target - frac * gap,
        Side::Above => target + frac * gap,
    };
    let mut rows: Vec<SweepRow> = Vec::with_capacity(fractions.len());
    for &frac in &fractions {
        let lambda = lambda_of(frac);
        let warm = if cfg.warm_start {
            rows.last().and_then(|r: &SweepRow| r.u.clone())
        } else {
            None
        };
        let res = solve_row(lambda, warm.as_ref());
        rows.push(make_row(lambda, res)?);
    }

    let mut cold_checks = Vec::new();
    if cfg.warm_start && cfg.cold_checks > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.solver.seed ^ 0xc01d);
        let mut picks: Vec<usize> = (0..rows.len()).collect();
        for i in 0..picks.len() {
            let j = rng.random_range(i..picks.len());
            picks.swap(i, j);
        }
        picks.truncate(cfg.cold_checks.min(rows.len()));
        picks.sort_unstable();
        for row in picks {
            let lambda = rows[row].lambda;
            let cold = make_row(lambda, solve_row(lambda, None))?;
            let level = |r: &SweepRow| cfg.kappa.sign() * r.energy;
            let warm_level = level(&rows[row]);
            let cold_level = level(&cold);
            let replaced = cold.status == "converged"
                && (rows[row].status != "converged" || cold_level < warm_level - 1e-9 * (1.0 + warm_level.abs()));
            cold_checks.push(ColdCheck {
                row,
                warm_level,
                cold_level,
                replaced,
            });
            if replaced {
                rows[row] = cold;
            }
        }
    }

    let converged: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.status == "converged")
        .map(|r| (r.delta, r.norm_e))
        .collect();
    if converged.len() < MIN_SWEEP_ROWS {
        return Err(ExperimentError::TooFewRows {
            got: converged.len(),
            need: MIN_SWEEP_ROWS,
        });
    }
    let fit = fit_scaling(&converged)?;
    let expected_slope = 1.0 / (pp.p - 2.0);
    Ok(SweepResult {
        kappa: cfg.kappa,
        target_k: cfg.target_k,
        target_lambda: target,
        side: cfg.side,
        gap,
        p: pp.p,
        rows,
        fit,
        expected_slope,
        scaling_ok: fit.slope >= expected_slope - 0.1,
        cold_checks,
    })
}

fn opposite(s: Side) -> Side {
    match s {
        Side::Below => Side::Above,
        Side::Above => Side::Below,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuditCount {
    pub name: &'static str,
    pub passed: usize,
    pub total: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuditReport {
    pub lambdas: Vec<f64>,
    pub n_random: usize,
    pub counts: Vec<AuditCount>,
    /// Largest relative gap `|lhs − rhs| / max(|lhs|, |rhs|)` over single
    /// eigenmodes adjacent to each `λ`; these cases attain equality.
    pub worst_saturation_gap: f64,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.counts.iter().all(|c| c.passed == c.total)
    }
}

fn random_function(rng: &mut ChaCha8Rng, n: usize) -> GraphFunction {
    let scale = 10f64.powf(rng.random_range(-2.0..2.0));
    let sparse = rng.random_bool(0.25);
    GraphFunction::new(
        (0..n)
            .map(|_| {
                if sparse && rng.random_bool(0.7) {
                    0.0
                } else {
                    let z: f64 = StandardNormal.sample(rng);
                    scale * z
                }
            })
            .collect(),
    )
}

struct Tally {
    counts: Vec<AuditCount>,
}

impl Tally {
    fn record(
        &mut self,
        name: &'static str,
        ok: bool,
        witness: impl FnOnce() -> String,
    ) -> Result<(), ExperimentError> {
        let slot = match self.counts.iter_mut().find(|c| c.name == name) {
            Some(c) => c,
            None => {
                self.counts.push(AuditCount {
                    name,
                    passed: 0,
                    total: 0,
                });
                self.counts.last_mut().expect("just pushed")
            }
        };
        slot.total += 1;
        if ok {
            slot.passed += 1;
            Ok(())
        } else {
            Err(ExperimentError::Violation(format!("{name}: {}", witness())))
        }
    }
}

/// Runs the spectral form bounds at each `λ` together with the embedding
/// bounds `||u||_{l^1_m} ≤ C(K) ||u||_E`, `sup_K u − inf_K u ≤ diam(K)^{1/2} q(u)^{1/2}`,
/// `||u||_{l^2_m} ≤ ||u||_E` and the interpolation bound
/// `||u||_{l^p_m} ≤ ||u||_{l^2_m}^{2/p} ||u||_∞^{1−2/p}` on `n_random` random
/// functions. `subset` defaults to all vertices. The first violation is an error.
pub fn audit_inequalities(
    g: &WeightedGraph,
    spec: &SpectralData,
    lambdas: &[f64],
    subset: Option<&[usize]>,
    p: f64,
    n_random: usize,
    seed: u64,
) -> Result<AuditReport, ExperimentError> {
    let fm = assemble(g)?;
    let n = g.len();
    let all: Vec<usize> = (0..n).collect();
    let subset = subset.unwrap_or(&all);
    let c_k = g.ell1_embedding_constant(subset)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tally = Tally { counts: Vec::new() };
    let mut worst_saturation_gap: f64 = 0.0;
    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE);

    for &lambda in lambdas {
        let spl = split(spec, lambda, None)?;
        if !spl.zero.is_empty() {
            return Err(ExperimentError::BadSweep(format!(
                "lambda = {lambda} lies in the spectrum"
            )));
        }
        let saturating = spl.first_above().into_iter().chain(spl.minus.last().copied());
        for j in saturating {
            let e = spec.eigenvector(j).scaled(rng.random_range(0.5..3.0));
            let b = verify_form_bounds(&spl, spec, &fm, &e)?;
            let side = if spl.minus.contains(&j) { b.upper } else { b.lower };
            if let Some(side) = side {
                worst_saturation_gap = worst_saturation_gap.max(rel(side.lhs, side.rhs));
            }
        }
        for _ in 0..n_random {
            let u = random_function(&mut rng, n);
            let b = verify_form_bounds(&spl, spec, &fm, &u)?;
            if let Some(lo) = b.lower {
                tally.record("form_lower_bound", lo.ok, || {
                    format!("lambda = {lambda}: q(u+) = {:e} < {:e}", lo.lhs, lo.rhs)
                })?;
            }
            if let Some(up) = b.upper {
                tally.record("form_upper_bound", up.ok, || {
                    format!("lambda = {lambda}: q(u-) = {:e} > {:e}", up.lhs, up.rhs)
                })?;
            }
        }
    }
    tally.record("form_bound_saturation", worst_saturation_gap <= 1e-10, || {
        format!("single-mode relative gap {worst_saturation_gap:e}")
    })?;

    let slack = |x: f64| FORM_BOUND_SLACK * x.abs();
    for _ in 0..n_random {
        let u = random_function(&mut rng, n);
        let e = u.norm_energy(g);
        let l1 = u.norm_lp(g, 1.0);
        tally.record("ell1_embedding", l1 <= c_k * e + slack(c_k * e), || {
            format!("||u||_1 = {l1:e} > C(K) ||u||_E = {:e}", c_k * e)
        })?;
        let pc = g.poincare_check(subset, &u)?;
        tally.record("poincare_oscillation", pc.ok, || {
            format!("osc = {:e} > {:e}", pc.lhs, pc.rhs)
        })?;
        let l2 = u.norm_lp(g, 2.0);
        tally.record("l2_embedding", l2 <= e + slack(e), || {
            format!("||u||_2 = {l2:e} > ||u||_E = {e:e}")
        })?;
        let lp = u.norm_lp(g, p);
        let interp = l2.powf(2.0 / p) * u.norm_sup().powf(1.0 - 2.0 / p);
        tally.record("lp_interpolation", lp <= interp + slack(interp), || {
            format!("||u||_p = {lp:e} > {interp:e}")
        })?;
    }
    Ok(AuditReport {
        lambdas: lambdas.to_vec(),
        n_random,
        counts: tally.counts,
        worst_saturation_gap,
    })
}
