//! Weighted graphs over a vertex measure and their geometric diagnostics.
//!
//! A graph is the tuple (V, b, c) over (V, m): vertex measure `m > 0`,
//! symmetric edge weights `b`, and a killing term `c >= 0`. The potential
//! `V = (c + m) / m` is derived, never stored.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, HashMap};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::GraphError;
use crate::function::GraphFunction;

/// Vertex identifier as it appears in input files.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VertexId {
    Int(i64),
    Name(String),
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VertexId::Int(i) => write!(f, "{i}"),
            VertexId::Name(s) => write!(f, "{s:?}"),
        }
    }
}

impl From<i64> for VertexId {
    fn from(i: i64) -> Self {
        VertexId::Int(i)
    }
}

impl From<&str> for VertexId {
    fn from(s: &str) -> Self {
        VertexId::Name(s.to_string())
    }
}

/// A finite weighted graph. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedGraph {
    ids: Vec<VertexId>,
    index: HashMap<VertexId, usize>,
    mass: Vec<f64>,
    killing: Vec<f64>,
    /// Directed weights `b(x, y)` per `x`, sorted by `y`.
    adj: Vec<Vec<(usize, f64)>>,
}

/// Incremental construction of a [`WeightedGraph`].
///
/// Edge entries are directed: `add_edge_entry(u, v, b)` fixes `b(u, v)` and,
/// unless `(v, u)` is given explicitly as well, also `b(v, u)`.
#[derive(Clone, Debug, Default)]
pub struct GraphBuilder {
    ids: Vec<VertexId>,
    index: HashMap<VertexId, usize>,
    mass: Vec<f64>,
    killing: Vec<f64>,
    entries: BTreeMap<(usize, usize), f64>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a vertex with measure `m` and killing term `c`.
    pub fn add_vertex(&mut self, id: impl Into<VertexId>, m: f64, c: f64) -> Result<usize, GraphError> {
        let id = id.into();
        if self.index.contains_key(&id) {
            return Err(GraphError::DuplicateVertex(id));
        }
        if !m.is_finite() || !c.is_finite() {
            return Err(GraphError::BadVertex {
                id,
                reason: format!("non-finite measure or killing term (m = {m}, c = {c})"),
            });
        }
        let i = self.ids.len();
        self.index.insert(id.clone(), i);
        self.ids.push(id);
        self.mass.push(m);
        self.killing.push(c);
        Ok(i)
    }

    /// Adds a vertex given its potential; stores `c = m (V - 1)`.
    pub fn add_vertex_with_potential(&mut self, id: impl Into<VertexId>, m: f64, v: f64) -> Result<usize, GraphError> {
        self.add_vertex(id, m, m * (v - 1.0))
    }

    fn lookup(&self, id: &VertexId) -> Result<usize, GraphError> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| GraphError::UnknownVertex(id.clone()))
    }

    /// Directed edge entry by vertex id.
    pub fn add_edge_entry(&mut self, u: impl Into<VertexId>, v: impl Into<VertexId>, b: f64) -> Result<(), GraphError> {
        let (u, v) = (u.into(), v.into());
        let (iu, iv) = (self.lookup(&u)?, self.lookup(&v)?);
        self.add_entry_index(iu, iv, b)
    }

    /// Directed edge entry by vertex index.
    pub fn add_entry_index(&mut self, u: usize, v: usize, b: f64) -> Result<(), GraphError> {
        let n = self.ids.len();
        for i in [u, v] {
            if i >= n {
                return Err(GraphError::IndexOutOfBounds { index: i, n });
            }
        }
        if !(b.is_finite() && b > 0.0) {
            return Err(GraphError::BadEdgeWeight {
                u: self.ids[u].clone(),
                v: self.ids[v].clone(),
                b,
            });
        }
        if self.entries.insert((u, v), b).is_some() {
            return Err(GraphError::DuplicateEdge(self.ids[u].clone(), self.ids[v].clone()));
        }
        Ok(())
    }

    /// Symmetric edge: sets both `b(u, v)` and `b(v, u)` explicitly.
    pub fn add_edge(&mut self, u: usize, v: usize, b: f64) -> Result<(), GraphError> {
        self.add_entry_index(u, v, b)?;
        if u != v {
            self.add_entry_index(v, u, b)?;
        }
        Ok(())
    }

    pub fn build(self) -> Result<WeightedGraph, GraphError> {
        let n = self.ids.len();
        if n == 0 {
            return Err(GraphError::Empty);
        }
        let mut weights: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (&(u, v), &b) in &self.entries {
            weights.insert((u, v), b);
            if !self.entries.contains_key(&(v, u)) {
                weights.insert((v, u), b);
            }
        }
        let mut adj = vec![Vec::new(); n];
        for ((u, v), b) in weights {
            adj[u].push((v, b));
        }
        Ok(WeightedGraph {
            ids: self.ids,
            index: self.index,
            mass: self.mass,
            killing: self.killing,
            adj,
        })
    }
}

/// One line of a [`ValidationReport`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    /// A check that passed, or failed with `failure` as its detail.
    pub fn new(name: &'static str, failure: Option<String>) -> Self {
        match failure {
            None => Self {
                name,
                passed: true,
                detail: "ok".into(),
            },
            Some(detail) => Self {
                name,
                passed: false,
                detail,
            },
        }
    }
}

/// Pass/fail table for the structural assumptions on a graph.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Result of the oscillation bound `sup u - inf u <= diam(K)^{1/2} q(u)^{1/2}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PoincareCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub ok: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct HeapEntry {
    dist: f64,
    vertex: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on distance, ties by vertex index
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl WeightedGraph {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[VertexId] {
        &self.ids
    }

    pub fn id(&self, i: usize) -> &VertexId {
        &self.ids[i]
    }

    pub fn index_of(&self, id: &VertexId) -> Result<usize, GraphError> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| GraphError::UnknownVertex(id.clone()))
    }

    pub fn indices_of(&self, ids: &[VertexId]) -> Result<Vec<usize>, GraphError> {
        ids.iter().map(|id| self.index_of(id)).collect()
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn killing(&self) -> &[f64] {
        &self.killing
    }

    /// `V(x) = (c(x) + m(x)) / m(x)`.
    pub fn potential(&self, x: usize) -> f64 {
        (self.killing[x] + self.mass[x]) / self.mass[x]
    }

    pub fn potentials(&self) -> Vec<f64> {
        (0..self.len()).map(|x| self.potential(x)).collect()
    }

    /// Directed neighbours `(y, b(x, y))` of `x`, sorted by `y`.
    pub fn neighbors(&self, x: usize) -> &[(usize, f64)] {
        &self.adj[x]
    }

    /// `b(x, y)`, zero when absent.
    pub fn weight(&self, x: usize, y: usize) -> f64 {
        match self.adj[x].binary_search_by_key(&y, |&(v, _)| v) {
            Ok(k) => self.adj[x][k].1,
            Err(_) => 0.0,
        }
    }

    pub fn degree(&self, x: usize) -> f64 {
        self.adj[x].iter().map(|&(_, b)| b).sum()
    }

    /// `m(A)`.
    pub fn measure_of(&self, subset: &[usize]) -> f64 {
        subset.iter().map(|&x| self.mass[x]).sum()
    }

    fn check_bounds(&self, subset: &[usize]) -> Result<(), GraphError> {
        let n = self.len();
        match subset.iter().find(|&&i| i >= n) {
            Some(&index) => Err(GraphError::IndexOutOfBounds { index, n }),
            None => Ok(()),
        }
    }

    /// Connected components in vertex order; each component sorted.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let all: Vec<usize> = (0..self.len()).collect();
        self.components_within(&all)
    }

    /// Components of the subgraph induced by `subset`.
    fn components_within(&self, subset: &[usize]) -> Vec<Vec<usize>> {
        let mut member = vec![false; self.len()];
        for &x in subset {
            member[x] = true;
        }
        let mut seen = vec![false; self.len()];
        let mut out = Vec::new();
        for &start in subset {
            if seen[start] {
                continue;
            }
            let mut comp = vec![start];
            seen[start] = true;
            let mut stack = vec![start];
            while let Some(x) = stack.pop() {
                for &(y, b) in &self.adj[x] {
                    if b > 0.0 && member[y] && !seen[y] {
                        seen[y] = true;
                        comp.push(y);
                        stack.push(y);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        self.components().len() == 1
    }

    /// Checks a zero diagonal, symmetry and finite degrees of `b`, `m > 0`, `c >= 0`, `V >= 1` and connectivity.
    pub fn validate(&self) -> ValidationReport {
        let n = self.len();
        let mut checks = Vec::new();

        let loops: Vec<usize> = (0..n).filter(|&x| self.weight(x, x) != 0.0).collect();
        checks.push(Check {
            name: "b0_zero_diagonal",
            passed: loops.is_empty(),
            detail: match loops.first() {
                None => "b(x,x) = 0 for all x".into(),
                Some(&x) => format!("b({0},{0}) = {1}", self.ids[x], self.weight(x, x)),
            },
        });

        let mut asym = None;
        'outer: for x in 0..n {
            for &(y, b) in &self.adj[x] {
                let back = self.weight(y, x);
                if back != b {
                    asym = Some((x, y, b, back));
                    break 'outer;
                }
            }
        }
        checks.push(Check {
            name: "b1_symmetry",
            passed: asym.is_none(),
            detail: match asym {
                None => "b(x,y) = b(y,x) for all pairs".into(),
                Some((x, y, b, back)) => format!(
                    "b({},{}) = {} but b({},{}) = {}",
                    self.ids[x], self.ids[y], b, self.ids[y], self.ids[x], back
                ),
            },
        });

        let bad_deg = (0..n).find(|&x| !self.degree(x).is_finite());
        checks.push(Check {
            name: "b2_summability",
            passed: bad_deg.is_none(),
            detail: match bad_deg {
                None => "finite weighted degree at every vertex".into(),
                Some(x) => format!("degree of {} is not finite", self.ids[x]),
            },
        });

        let bad_m = (0..n).find(|&x| !(self.mass[x] > 0.0));
        checks.push(Check {
            name: "measure_positive",
            passed: bad_m.is_none(),
            detail: match bad_m {
                None => "m(x) > 0 for all x".into(),
                Some(x) => format!("m({}) = {}", self.ids[x], self.mass[x]),
            },
        });

        let bad_c = (0..n).find(|&x| self.killing[x] < 0.0);
        checks.push(Check {
            name: "killing_nonnegative",
            passed: bad_c.is_none(),
            detail: match bad_c {
                None => "c(x) >= 0 for all x".into(),
                Some(x) => format!("c({}) = {}", self.ids[x], self.killing[x]),
            },
        });

        let bad_v = (0..n).find(|&x| !(self.potential(x) >= 1.0));
        checks.push(Check {
            name: "potential_at_least_one",
            passed: bad_v.is_none(),
            detail: match bad_v {
                None => "V(x) >= 1 for all x".into(),
                Some(x) => format!("V must be ≥ 1, but V({}) = {}", self.ids[x], self.potential(x)),
            },
        });

        let comps = self.components();
        checks.push(Check {
            name: "connected",
            passed: comps.len() == 1,
            detail: format!("{} connected component(s)", comps.len()),
        });

        ValidationReport { checks }
    }

    /// Shortest-path distances from `source` with edge length `1 / b(x, y)`.
    pub fn distances_from(&self, source: usize) -> Vec<f64> {
        let mut dist = vec![f64::INFINITY; self.len()];
        dist[source] = 0.0;
        let mut heap = BinaryHeap::new();
        heap.push(HeapEntry {
            dist: 0.0,
            vertex: source,
        });
        while let Some(HeapEntry { dist: d, vertex: x }) = heap.pop() {
            if d > dist[x] {
                continue;
            }
            for &(y, b) in &self.adj[x] {
                if b <= 0.0 || y == x {
                    continue;
                }
                let nd = d + 1.0 / b;
                if nd < dist[y] {
                    dist[y] = nd;
                    heap.push(HeapEntry { dist: nd, vertex: y });
                }
            }
        }
        dist
    }

    /// Path metric `d(x, y)`; infinite across components.
    pub fn path_metric(&self, x: &VertexId, y: &VertexId) -> Result<f64, GraphError> {
        let (ix, iy) = (self.index_of(x)?, self.index_of(y)?);
        Ok(self.distances_from(ix)[iy])
    }

    /// `sup_{x,y in K} d(x, y)`, with paths allowed to leave `K`.
    pub fn diameter(&self, subset: &[usize]) -> Result<f64, GraphError> {
        if subset.is_empty() {
            return Err(GraphError::EmptySubset);
        }
        self.check_bounds(subset)?;
        let mut diam: f64 = 0.0;
        for &x in subset {
            let dist = self.distances_from(x);
            for &y in subset {
                diam = diam.max(dist[y]);
            }
        }
        Ok(diam)
    }

    /// `sum_{x,y in K, b(x,y) > 0} 1 / b(x, y)` over ordered pairs.
    ///
    /// A finite value bounds `diam(K)` and certifies `K` as canonically
    /// compactifiable. The induced subgraph must be connected.
    pub fn summability(&self, subset: &[usize]) -> Result<f64, GraphError> {
        if subset.is_empty() {
            return Err(GraphError::EmptySubset);
        }
        self.check_bounds(subset)?;
        let comps = self.components_within(subset);
        if comps.len() > 1 {
            return Err(GraphError::DisconnectedSubset {
                component: comps[0].iter().map(|&x| self.ids[x].clone()).collect(),
            });
        }
        let mut member = vec![false; self.len()];
        for &x in subset {
            member[x] = true;
        }
        let mut sum = 0.0;
        for &x in subset {
            for &(y, b) in &self.adj[x] {
                if member[y] && b > 0.0 {
                    sum += 1.0 / b;
                }
            }
        }
        Ok(sum)
    }

    /// Oscillation of `u` over `K` against `diam(K)^{1/2} q(u)^{1/2}`.
    pub fn poincare_check(&self, subset: &[usize], u: &GraphFunction) -> Result<PoincareCheck, GraphError> {
        u.check_shape(self)?;
        let diam = self.diameter(subset)?;
        if !diam.is_finite() {
            return Err(GraphError::InfiniteDiameter);
        }
        let vals = u.values();
        let sup = subset.iter().map(|&x| vals[x]).fold(f64::NEG_INFINITY, f64::max);
        let inf = subset.iter().map(|&x| vals[x]).fold(f64::INFINITY, f64::min);
        let lhs = sup - inf;
        let rhs = diam.sqrt() * u.energy_form(self).sqrt();
        let ok = lhs <= rhs + 1e-12 * (1.0 + rhs);
        Ok(PoincareCheck { lhs, rhs, ok })
    }

    /// `C(K) = (sum_{x not in K} m^2 / (c + m))^{1/2} + m(K)^{1/2}`, so that
    /// `||u||_{l^1_m} <= C(K) ||u||_E`.
    pub fn ell1_embedding_constant(&self, subset: &[usize]) -> Result<f64, GraphError> {
        self.check_bounds(subset)?;
        let mut inside = vec![false; self.len()];
        for &x in subset {
            inside[x] = true;
        }
        let outer: f64 = (0..self.len())
            .filter(|&x| !inside[x])
            .map(|x| self.mass[x] * self.mass[x] / (self.killing[x] + self.mass[x]))
            .sum();
        let inner: f64 = (0..self.len()).filter(|&x| inside[x]).map(|x| self.mass[x]).sum();
        Ok(outer.sqrt() + inner.sqrt())
    }
}

/// How the line-graph example treats its potential on `i <= 0`, where the
/// literal values fall below 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum PotentialMode {
    /// `V(i) = max(V_literal(i), 1)`.
    #[default]
    Clamped,
    /// `V(i) = i` for `i >= 0` and `0` for `i < 0`; fails validation.
    Literal,
}

/// The line graph on `{-n_minus, ..., n_plus}` with `m(i) = 1/(i+1)`,
/// `b(i,i+1) = i+1` for `i >= 0` and `m(i) = 1/i^2`, `b(i,i+1) = i^2` for
/// `i < 0`, and potential `V(i) = i` on the positive half.
pub fn example_line_graph(n_minus: usize, n_plus: usize, mode: PotentialMode) -> WeightedGraph {
    assert!(n_minus >= 1 && n_plus >= 1, "line graph needs n_minus, n_plus >= 1");
    let mut gb = GraphBuilder::new();
    let lo = -(n_minus as i64);
    let hi = n_plus as i64;
    for i in lo..=hi {
        let fi = i as f64;
        let m = if i >= 0 { 1.0 / (fi + 1.0) } else { 1.0 / (fi * fi) };
        let v = match mode {
            PotentialMode::Clamped => {
                if i >= 1 {
                    fi
                } else {
                    1.0
                }
            }
            PotentialMode::Literal => {
                if i >= 0 {
                    fi
                } else {
                    0.0
                }
            }
        };
        gb.add_vertex_with_potential(i, m, v)
            .expect("line graph ids are unique");
    }
    for i in lo..hi {
        let fi = i as f64;
        let b = if i >= 0 { fi + 1.0 } else { fi * fi };
        let (u, v) = ((i - lo) as usize, (i - lo + 1) as usize);
        gb.add_edge(u, v, b).expect("line graph edges are valid");
    }
    gb.build().expect("line graph is nonempty")
}

/// Path graph `0 - 1 - ... - (n-1)` with constant weights.
pub fn path_graph(n: usize, m: f64, b: f64, c: f64) -> WeightedGraph {
    let mut gb = GraphBuilder::new();
    for i in 0..n {
        gb.add_vertex(i as i64, m, c).expect("unique ids");
    }
    for i in 1..n {
        gb.add_edge(i - 1, i, b).expect("valid edge");
    }
    gb.build().expect("path graph needs n >= 1")
}

/// Random connected graph: a random spanning tree plus extra edges with
/// probability `extra_p`; measures, weights and killing terms drawn from
/// modest positive ranges. Deterministic in `seed`.
pub fn random_connected_graph(n: usize, extra_p: f64, seed: u64) -> WeightedGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gb = GraphBuilder::new();
    for i in 0..n {
        let m = rng.random_range(0.2..2.0);
        let c = if rng.random_bool(0.5) {
            rng.random_range(0.0..3.0)
        } else {
            0.0
        };
        gb.add_vertex(i as i64, m, c).expect("unique ids");
    }
    let mut present = std::collections::HashSet::new();
    for i in 1..n {
        let j = rng.random_range(0..i);
        gb.add_edge(j, i, rng.random_range(0.2..3.0)).expect("valid edge");
        present.insert((j, i));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if !present.contains(&(i, j)) && rng.random_bool(extra_p) {
                gb.add_edge(i, j, rng.random_range(0.2..3.0)).expect("valid edge");
            }
        }
    }
    gb.build().expect("random graph needs n >= 1")
}

/// One row of [`TruncationFamily::potential_growth`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GrowthRow {
    pub t: usize,
    pub inf_potential_outside: f64,
    pub measure_inside: f64,
}

/// A finite truncation together with nested subsets `K_t`.
#[derive(Clone, Debug)]
pub struct TruncationFamily {
    graph: WeightedGraph,
    subsets: Vec<(usize, Vec<usize>)>,
}

impl TruncationFamily {
    /// `subsets` are `(t, K_t)` pairs with increasing `t` and `K_t` nested.
    pub fn new(graph: WeightedGraph, subsets: Vec<(usize, Vec<usize>)>) -> Result<Self, GraphError> {
        for (_, k) in &subsets {
            graph.check_bounds(k)?;
        }
        for w in subsets.windows(2) {
            let (t, ref prev) = w[0];
            let (_, ref next) = w[1];
            if prev.iter().any(|x| !next.contains(x)) {
                return Err(GraphError::NotNested { t });
            }
        }
        Ok(Self { graph, subsets })
    }

    /// Line-graph family with `K_t = {-n_minus..-1} ∪ {0..t}` for
    /// `t = 0..=t_max`; the truncation extends to `t_max + 1`.
    pub fn line_graph(n_minus: usize, t_max: usize, mode: PotentialMode) -> Self {
        let graph = example_line_graph(n_minus, t_max + 1, mode);
        let subsets = (0..=t_max).map(|t| (t, (0..=(n_minus + t)).collect())).collect();
        Self { graph, subsets }
    }

    /// Half-line `0..=n` with `m = b = 1`, potential `potential(i)` and
    /// `K_t = {0..t}` for `t < n`.
    pub fn half_line(n: usize, potential: impl Fn(usize) -> f64) -> Result<Self, GraphError> {
        let mut gb = GraphBuilder::new();
        for i in 0..=n {
            gb.add_vertex_with_potential(i as i64, 1.0, potential(i))?;
        }
        for i in 1..=n {
            gb.add_edge(i - 1, i, 1.0)?;
        }
        let graph = gb.build()?;
        let subsets = (0..n).map(|t| (t, (0..=t).collect())).collect();
        Self::new(graph, subsets)
    }

    pub fn graph(&self) -> &WeightedGraph {
        &self.graph
    }

    pub fn subsets(&self) -> &[(usize, Vec<usize>)] {
        &self.subsets
    }

    /// `(t, inf_{x not in K_t} V(x), m(K_t))` for every stored `t`.
    pub fn potential_growth(&self) -> Result<Vec<GrowthRow>, GraphError> {
        let g = &self.graph;
        self.subsets
            .iter()
            .map(|(t, k)| {
                let mut inside = vec![false; g.len()];
                for &x in k {
                    inside[x] = true;
                }
                let inf = (0..g.len())
                    .filter(|&x| !inside[x])
                    .map(|x| g.potential(x))
                    .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.min(v))))
                    .ok_or(GraphError::EmptyComplement { t: *t })?;
                Ok(GrowthRow {
                    t: *t,
                    inf_potential_outside: inf,
                    measure_inside: g.measure_of(k),
                })
            })
            .collect()
    }
}
