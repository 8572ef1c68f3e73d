//! The nonlinearity `f(x, s)`, its primitive `F(x, s)`, the functional
//! `Ψ(u) = Σ m F(x, u)`, and grid validators for the structural assumptions.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::NonlinearityError;
use crate::function::GraphFunction;
use crate::graph::{Check, ValidationReport, WeightedGraph};

/// A pointwise evaluator `(vertex index, s) -> value`.
pub type ScalarFn = Arc<dyn Fn(usize, f64) -> f64 + Send + Sync>;

/// Structural constants `p, q > 2`, `a₀, a₁ > 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PowerParams {
    pub p: f64,
    pub q: f64,
    pub a0: f64,
    pub a1: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NonlinearityKind {
    Power,
    Custom,
}

#[derive(Clone)]
enum Eval {
    Power {
        p: f64,
        g: Vec<f64>,
    },
    Custom {
        f: ScalarFn,
        big_f: ScalarFn,
        df: Option<ScalarFn>,
        odd: bool,
    },
}

#[derive(Clone)]
pub struct Nonlinearity {
    eval: Eval,
    params: Option<PowerParams>,
}

impl fmt::Debug for Nonlinearity {
    fn fmt(&self, fmt: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.eval {
            Eval::Power { p, g } => fmt
                .debug_struct("Nonlinearity")
                .field("kind", &"power")
                .field("p", p)
                .field("g", g)
                .finish(),
            Eval::Custom { odd, .. } => fmt
                .debug_struct("Nonlinearity")
                .field("kind", &"custom")
                .field("odd", odd)
                .field("params", &self.params)
                .finish(),
        }
    }
}

/// `f(x, s) = g(x) |s|^{p-2} s`, `F(x, s) = g(x) |s|^p / p`.
pub fn power_nonlinearity(p: f64, g: Vec<f64>) -> Result<Nonlinearity, NonlinearityError> {
    if !(p > 2.0) || !p.is_finite() {
        return Err(NonlinearityError::ExponentTooSmall(p));
    }
    if let Some(&bad) = g.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
        return Err(NonlinearityError::BadWeight(bad));
    }
    let gmin = g.iter().cloned().fold(f64::INFINITY, f64::min);
    let gmax = g.iter().cloned().fold(0.0, f64::max);
    Ok(Nonlinearity {
        params: Some(PowerParams {
            p,
            q: p,
            a0: gmin / p,
            a1: gmax,
        }),
        eval: Eval::Power { p, g },
    })
}

/// A user-supplied nonlinearity. `big_f` must be the primitive of `f` with
/// `F(x, 0) = 0`. Without `df`, derivatives fall back to central differences.
pub fn custom_nonlinearity(
    f: ScalarFn,
    big_f: ScalarFn,
    df: Option<ScalarFn>,
    params: Option<PowerParams>,
    odd: bool,
) -> Nonlinearity {
    Nonlinearity {
        eval: Eval::Custom { f, big_f, df, odd },
        params,
    }
}

impl Nonlinearity {
    pub fn kind(&self) -> NonlinearityKind {
        match self.eval {
            Eval::Power { .. } => NonlinearityKind::Power,
            Eval::Custom { .. } => NonlinearityKind::Custom,
        }
    }

    pub fn params(&self) -> Option<PowerParams> {
        self.params
    }

    /// Whether `f(x, -s) = -f(x, s)` for all `x, s`.
    pub fn is_odd(&self) -> bool {
        match &self.eval {
            Eval::Power { .. } => true,
            Eval::Custom { odd, .. } => *odd,
        }
    }

    /// Vertex weights of a power nonlinearity.
    pub fn weights(&self) -> Option<&[f64]> {
        match &self.eval {
            Eval::Power { g, .. } => Some(g),
            Eval::Custom { .. } => None,
        }
    }

    /// Errors if the nonlinearity carries per-vertex data for another graph.
    pub fn check_shape(&self, g: &WeightedGraph) -> Result<(), NonlinearityError> {
        match &self.eval {
            Eval::Power { g: w, .. } if w.len() != g.len() => Err(NonlinearityError::ShapeMismatch {
                expected: g.len(),
                got: w.len(),
            }),
            _ => Ok(()),
        }
    }

    pub fn f(&self, x: usize, s: f64) -> f64 {
        match &self.eval {
            Eval::Power { p, g } => g[x] * s.abs().powf(p - 2.0) * s,
            Eval::Custom { f, .. } => f(x, s),
        }
    }

    #[allow(non_snake_case)]
    pub fn F(&self, x: usize, s: f64) -> f64 {
        match &self.eval {
            Eval::Power { p, g } => g[x] * s.abs().powf(*p) / p,
            Eval::Custom { big_f, .. } => big_f(x, s),
        }
    }

    /// `∂f/∂s (x, s)`.
    pub fn df(&self, x: usize, s: f64) -> f64 {
        match &self.eval {
            Eval::Power { p, g } => g[x] * (p - 1.0) * s.abs().powf(p - 2.0),
            Eval::Custom { df: Some(df), .. } => df(x, s),
            Eval::Custom { f, .. } => {
                let h = 1e-6 * s.abs().max(1.0);
                (f(x, s + h) - f(x, s - h)) / (2.0 * h)
            }
        }
    }
}

/// `Ψ(u) = Σ_x m(x) F(x, u(x))`.
pub fn psi(g: &WeightedGraph, nl: &Nonlinearity, u: &GraphFunction) -> f64 {
    g.mass()
        .iter()
        .zip(u.values())
        .enumerate()
        .map(|(x, (m, &s))| m * nl.F(x, s))
        .sum()
}

/// The vertex function `r(x) = f(x, u(x))`, so that `∇Ψ(u)h = Σ m r h`.
pub fn grad_psi(nl: &Nonlinearity, u: &GraphFunction) -> GraphFunction {
    GraphFunction::new(u.values().iter().enumerate().map(|(x, &s)| nl.f(x, s)).collect())
}

/// Symmetric log-spaced grid `±10^k`, `k ∈ [lo, hi]`, `per_decade` points per decade.
pub fn log_grid(lo: i32, hi: i32, per_decade: usize) -> Vec<f64> {
    let steps = (hi - lo) as usize * per_decade;
    let pos: Vec<f64> = (0..=steps)
        .map(|i| 10f64.powf(lo as f64 + i as f64 / per_decade as f64))
        .collect();
    let mut grid: Vec<f64> = pos.iter().rev().map(|s| -s).collect();
    grid.push(0.0);
    grid.extend(pos);
    grid
}

/// Grid from `1e-6` to `1e2` in both signs, ten points per decade.
pub fn default_grid() -> Vec<f64> {
    log_grid(-6, 2, 10)
}

const SLACK: f64 = 1e-12;

fn witness(x: usize, s: f64, what: String) -> String {
    format!("at vertex {x}, s = {s:e}: {what}")
}

/// Checks `f(x,0) = 0`, `f(x,s) = o(s)` at the origin, monotonicity of
/// `f(x,s)/|s|`, superquadratic growth of `F`, positivity of `F`, and when parameters are present
/// the AR condition and the power bounds `F >= a₀|s|^p`, `|f| <= a₁|s|^{p-1}`.
///
/// Passing means "passes on grid"; none of these limits or global
/// monotonicity statements can be certified by sampling.
pub fn validate_assumptions(nl: &Nonlinearity, grid: &[f64], vertices: &[usize]) -> ValidationReport {
    let mut grid: Vec<f64> = grid.iter().copied().filter(|s| s.is_finite()).collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let pos: Vec<f64> = grid.iter().copied().filter(|&s| s > 0.0).collect();
    let neg: Vec<f64> = grid.iter().rev().copied().filter(|&s| s < 0.0).collect();
    let mut checks = Vec::new();
    let first_failure =
        |mut probe: Box<dyn FnMut(usize) -> Option<String> + '_>| vertices.iter().find_map(|&x| probe(x));

    let f1 = first_failure(Box::new(|x| {
        let v = nl.f(x, 0.0);
        (v != 0.0).then(|| witness(x, 0.0, format!("f = {v:e}")))
    }));
    checks.push(Check::new("f1_zero_at_origin", f1));

    let f_pos = first_failure(Box::new(|x| {
        grid.iter().filter(|&&s| s != 0.0).find_map(|&s| {
            let v = nl.F(x, s);
            (!(v > 0.0)).then(|| witness(x, s, format!("F = {v:e} is not positive")))
        })
    }));
    checks.push(Check::new("F_positive", f_pos));

    // |f|/|s| must shrink towards 0 across the two innermost decades
    let f2 = first_failure(Box::new(|x| {
        for side in [&pos, &neg] {
            let Some(&s0) = side.first() else { continue };
            let inner: Vec<f64> = side
                .iter()
                .copied()
                .take_while(|s| s.abs() <= 100.0 * s0.abs())
                .collect();
            let ratio: Vec<f64> = inner.iter().map(|&s| nl.f(x, s).abs() / s.abs()).collect();
            for w in 0..ratio.len().saturating_sub(1) {
                if !(ratio[w] < ratio[w + 1]) {
                    return Some(witness(
                        x,
                        inner[w],
                        format!(
                            "|f|/|s| = {:e} does not shrink below {:e} at s = {:e}",
                            ratio[w],
                            ratio[w + 1],
                            inner[w + 1]
                        ),
                    ));
                }
            }
        }
        None
    }));
    checks.push(Check::new("f2_small_at_origin", f2));

    // f/|s| strictly increasing, extended by 0 at s = 0
    let f3 = first_failure(Box::new(|x| {
        let mut prev: Option<(f64, f64)> = None;
        for &s in &grid {
            let r = if s == 0.0 { 0.0 } else { nl.f(x, s) / s.abs() };
            if let Some((ps, pr)) = prev {
                if !(r > pr) {
                    return Some(witness(
                        x,
                        s,
                        format!("f/|s| = {r:e} is not above {pr:e} at s = {ps:e}"),
                    ));
                }
            }
            prev = Some((s, r));
        }
        None
    }));
    checks.push(Check::new("f3_monotone_ratio", f3));

    // F/s² increasing across the two outermost decades
    let f4 = first_failure(Box::new(|x| {
        for side in [&pos, &neg] {
            let Some(&s_max) = side.last() else { continue };
            let outer: Vec<f64> = side
                .iter()
                .copied()
                .filter(|s| s.abs() >= s_max.abs() / 100.0)
                .collect();
            let ratio: Vec<f64> = outer.iter().map(|&s| nl.F(x, s) / (s * s)).collect();
            for w in 1..ratio.len() {
                if !(ratio[w] > ratio[w - 1]) {
                    return Some(witness(
                        x,
                        outer[w],
                        format!("F/s^2 = {:e} does not grow past {:e}", ratio[w], ratio[w - 1]),
                    ));
                }
            }
        }
        None
    }));
    checks.push(Check::new("f4_superquadratic", f4));

    if let Some(pp) = nl.params() {
        let ar = first_failure(Box::new(|x| {
            grid.iter().filter(|&&s| s != 0.0).find_map(|&s| {
                let (lhs, rhs) = (pp.q * nl.F(x, s), nl.f(x, s) * s);
                (!(lhs > 0.0 && lhs <= rhs + SLACK * rhs.abs()))
                    .then(|| witness(x, s, format!("q F = {lhs:e}, f s = {rhs:e}")))
            })
        }));
        checks.push(Check::new("ambrosetti_rabinowitz", ar));
        let lower = first_failure(Box::new(|x| {
            grid.iter().find_map(|&s| {
                let (lhs, rhs) = (nl.F(x, s), pp.a0 * s.abs().powf(pp.p));
                (lhs < rhs - SLACK * rhs).then(|| witness(x, s, format!("F = {lhs:e} < a0 |s|^p = {rhs:e}")))
            })
        }));
        checks.push(Check::new("power_lower_bound", lower));
        let upper = first_failure(Box::new(|x| {
            grid.iter().find_map(|&s| {
                let (lhs, rhs) = (nl.f(x, s).abs(), pp.a1 * s.abs().powf(pp.p - 1.0));
                (lhs > rhs + SLACK * rhs).then(|| witness(x, s, format!("|f| = {lhs:e} > a1 |s|^(p-1) = {rhs:e}")))
            })
        }));
        checks.push(Check::new("power_upper_bound", upper));
    }
    ValidationReport { checks }
}
