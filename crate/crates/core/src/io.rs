//! File formats: graph JSON, run and sweep configs, result files and run
//! manifests. Floats are written with 17 significant digits so every value
//! round-trips exactly.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::ser::Serialize;
use serde::Deserialize;
use serde_json::ser::{Formatter, PrettyFormatter};
use sha2::{Digest, Sha256};

use crate::error::IoError;
use crate::experiments::{default_fractions, Side, SweepConfig, SweepResult};
use crate::graph::{GraphBuilder, VertexId, WeightedGraph};
use crate::nonlinearity::{power_nonlinearity, Nonlinearity};
use crate::solver::{Kappa, SolverConfig};
use crate::spectral::SpectralData;

fn parse_error(path: &str, e: serde_json::Error) -> IoError {
    // serde_json appends the position to its message; it is reported separately.
    let full = e.to_string();
    let message = match full.rsplit_once(" at line ") {
        Some((head, _)) => head.to_string(),
        None => full,
    };
    IoError::Parse {
        path: path.to_string(),
        line: e.line(),
        column: e.column(),
        message,
    }
}

pub fn read_file(path: &Path) -> Result<Vec<u8>, IoError> {
    fs::read(path).map_err(|source| IoError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[derive(Debug, Deserialize, serde::Serialize)]
#[serde(deny_unknown_fields)]
struct VertexEntry {
    id: VertexId,
    m: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    c: Option<f64>,
    #[serde(default, rename = "V", skip_serializing_if = "Option::is_none")]
    v: Option<f64>,
}

#[derive(Debug, Deserialize, serde::Serialize)]
#[serde(deny_unknown_fields)]
struct EdgeEntry {
    u: VertexId,
    v: VertexId,
    b: f64,
}

#[derive(Debug, Deserialize, serde::Serialize)]
#[serde(deny_unknown_fields)]
struct GraphFile {
    vertices: Vec<VertexEntry>,
    edges: Vec<EdgeEntry>,
}

/// Parses graph JSON. `origin` names the source in error messages.
///
/// Each edge entry sets `b(u, v)`; `b(v, u)` takes the same value unless the
/// reverse entry is listed too. Repeating an entry is an error.
pub fn parse_graph(bytes: &[u8], origin: &str) -> Result<WeightedGraph, IoError> {
    let file: GraphFile = serde_json::from_slice(bytes).map_err(|e| parse_error(origin, e))?;
    let mut gb = GraphBuilder::new();
    for v in file.vertices {
        match (v.c, v.v) {
            (Some(_), Some(_)) => {
                return Err(IoError::Config(format!(
                    "{origin}: vertex {}: \"c\" and \"V\" are mutually exclusive",
                    v.id
                )))
            }
            (_, Some(pot)) => gb.add_vertex_with_potential(v.id, v.m, pot)?,
            (c, None) => gb.add_vertex(v.id, v.m, c.unwrap_or(0.0))?,
        };
    }
    for e in file.edges {
        gb.add_edge_entry(e.u, e.v, e.b)?;
    }
    Ok(gb.build()?)
}

pub fn load_graph(path: &Path) -> Result<WeightedGraph, IoError> {
    parse_graph(&read_file(path)?, &path.display().to_string())
}

/// Graph JSON with `c` per vertex; symmetric pairs become one entry.
pub fn graph_to_json(g: &WeightedGraph) -> String {
    let vertices = (0..g.len())
        .map(|x| VertexEntry {
            id: g.id(x).clone(),
            m: g.mass()[x],
            c: Some(g.killing()[x]),
            v: None,
        })
        .collect();
    let mut edges = Vec::new();
    for x in 0..g.len() {
        for &(y, b) in g.neighbors(x) {
            let symmetric = g.weight(y, x) == b;
            if x <= y || !symmetric {
                edges.push(EdgeEntry {
                    u: g.id(x).clone(),
                    v: g.id(y).clone(),
                    b,
                });
            }
        }
    }
    to_json(&GraphFile { vertices, edges })
}

/// Pretty JSON whose floats carry 17 significant digits; non-finite floats
/// become `null`.
pub struct ExactFloatFormatter<'a> {
    inner: PrettyFormatter<'a>,
}

impl Default for ExactFloatFormatter<'_> {
    fn default() -> Self {
        Self {
            inner: PrettyFormatter::new(),
        }
    }
}

impl Formatter for ExactFloatFormatter<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()> {
        self.write_f64(writer, value as f64)
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.inner.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.inner.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        self.inner.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.inner.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.inner.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.inner.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        self.inner.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.inner.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.inner.end_object_value(w)
    }
}

/// Serializes with [`ExactFloatFormatter`] and a trailing newline.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, ExactFloatFormatter::default());
    value.serialize(&mut ser).expect("serializing to memory cannot fail");
    buf.push(b'\n');
    String::from_utf8(buf).expect("serde_json writes UTF-8")
}

fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        String::new()
    }
}

/// Writes `bytes` to a temporary sibling and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let err = |source| IoError::Io {
        path: path.display().to_string(),
        source,
    };
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(err)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(err)?;
    tmp.write_all(bytes).map_err(err)?;
    tmp.as_file().sync_all().map_err(err)?;
    tmp.persist(path).map_err(|e| err(e.error))?;
    Ok(())
}

/// `g` in a run file: a single weight or a default with per-vertex overrides.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum WeightSpec {
    Uniform(f64),
    Table {
        default: f64,
        #[serde(default)]
        overrides: BTreeMap<String, f64>,
    },
}

impl Default for WeightSpec {
    fn default() -> Self {
        WeightSpec::Uniform(1.0)
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum NonlinearityConfig {
    Power {
        p: f64,
        #[serde(default)]
        g: WeightSpec,
    },
}

fn lookup_id(g: &WeightedGraph, key: &str) -> Option<usize> {
    g.index_of(&VertexId::Name(key.to_string()))
        .ok()
        .or_else(|| key.parse::<i64>().ok().and_then(|i| g.index_of(&VertexId::Int(i)).ok()))
}

impl NonlinearityConfig {
    pub fn build(&self, g: &WeightedGraph) -> Result<Nonlinearity, IoError> {
        match self {
            NonlinearityConfig::Power { p, g: spec } => {
                let weights = match spec {
                    WeightSpec::Uniform(w) => vec![*w; g.len()],
                    WeightSpec::Table { default, overrides } => {
                        let mut w = vec![*default; g.len()];
                        for (key, val) in overrides {
                            let x = lookup_id(g, key).ok_or_else(|| {
                                IoError::Config(format!("nonlinearity override for unknown vertex {key:?}"))
                            })?;
                            w[x] = *val;
                        }
                        w
                    }
                };
                Ok(power_nonlinearity(*p, weights)?)
            }
        }
    }
}

pub fn parse_nonlinearity_config(bytes: &[u8], origin: &str) -> Result<NonlinearityConfig, IoError> {
    serde_json::from_slice(bytes).map_err(|e| parse_error(origin, e))
}

/// Optional overrides of [`SolverConfig`] defaults.
#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub tol_grad: Option<f64>,
    pub tol_inner: Option<f64>,
    pub max_outer_iters: Option<usize>,
    pub max_inner_iters: Option<usize>,
    pub n_starts: Option<usize>,
    pub seed: Option<u64>,
}

impl SolverSection {
    pub fn apply(&self, cfg: &mut SolverConfig) {
        if let Some(v) = self.tol_grad {
            cfg.tol_grad = v;
        }
        if let Some(v) = self.tol_inner {
            cfg.tol_inner = v;
        }
        if let Some(v) = self.max_outer_iters {
            cfg.max_outer_iters = v;
        }
        if let Some(v) = self.max_inner_iters {
            cfg.max_inner_iters = v;
        }
        if let Some(v) = self.n_starts {
            cfg.n_starts = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Graph file, relative to the config file's directory.
    pub graph: PathBuf,
    pub nonlinearity: NonlinearityConfig,
    pub kappa: Kappa,
    pub lambda: f64,
    #[serde(default)]
    pub solver: SolverSection,
}

impl RunConfig {
    pub fn solver_config(&self) -> SolverConfig {
        let mut cfg = SolverConfig::new(self.kappa, self.lambda);
        self.solver.apply(&mut cfg);
        cfg
    }
}

pub fn parse_run_config(bytes: &[u8], origin: &str) -> Result<RunConfig, IoError> {
    serde_json::from_slice(bytes).map_err(|e| parse_error(origin, e))
}

/// Geometric `δ/gap` grid `start · ratio^j`, `j = 0..count`.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometricGrid {
    pub start: f64,
    pub ratio: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepFile {
    pub graph: PathBuf,
    pub nonlinearity: NonlinearityConfig,
    pub kappa: Kappa,
    /// 1-based target eigenvalue index.
    pub target_k: usize,
    pub side: Side,
    #[serde(default)]
    pub fractions: Option<Vec<f64>>,
    #[serde(default)]
    pub grid: Option<GeometricGrid>,
    #[serde(default)]
    pub warm_start: Option<bool>,
    #[serde(default)]
    pub cold_checks: Option<usize>,
    #[serde(default)]
    pub solver: SolverSection,
}

impl SweepFile {
    pub fn sweep_config(&self) -> Result<SweepConfig, IoError> {
        let bad = |m: &str| Err(IoError::Config(format!("sweep grid: {m}")));
        let fractions = match (&self.fractions, &self.grid) {
            (Some(_), Some(_)) => return bad("\"fractions\" and \"grid\" are mutually exclusive"),
            (Some(f), None) => f.clone(),
            (None, Some(gr)) => {
                if !(gr.start > 0.0 && gr.start < 1.0) || !(gr.ratio > 0.0 && gr.ratio < 1.0) || gr.count == 0 {
                    return bad("need 0 < start < 1, 0 < ratio < 1 and count >= 1");
                }
                (0..gr.count).map(|j| gr.start * gr.ratio.powi(j as i32)).collect()
            }
            (None, None) => default_fractions(),
        };
        if fractions.is_empty() || fractions.iter().any(|f| !(*f > 0.0 && *f < 1.0)) {
            return bad("fractions must be nonempty and lie in (0, 1)");
        }
        let mut cfg = SweepConfig::new(self.kappa, self.target_k, self.side);
        cfg.fractions = fractions;
        if let Some(w) = self.warm_start {
            cfg.warm_start = w;
        }
        if let Some(c) = self.cold_checks {
            cfg.cold_checks = c;
        }
        self.solver.apply(&mut cfg.solver);
        Ok(cfg)
    }
}

pub fn parse_sweep_config(bytes: &[u8], origin: &str) -> Result<SweepFile, IoError> {
    serde_json::from_slice(bytes).map_err(|e| parse_error(origin, e))
}

/// Resolves `p` against the directory holding `config`.
pub fn resolve_relative(config: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        config.parent().unwrap_or(Path::new("")).join(p)
    }
}

#[derive(serde::Serialize)]
struct SpectrumOut<'a> {
    eigenvalues: &'a [f64],
    residuals: &'a [f64],
    k: usize,
}

pub fn spectrum_to_json(spec: &SpectralData) -> String {
    to_json(&SpectrumOut {
        eigenvalues: &spec.eigenvalues,
        residuals: &spec.residuals,
        k: spec.k(),
    })
}

/// One row per vertex: `id, e_1(x), ..., e_k(x)`.
pub fn eigenvectors_to_csv(g: &WeightedGraph, spec: &SpectralData) -> String {
    let mut out = String::from("id");
    for j in 1..=spec.k() {
        out.push_str(&format!(",e{j}"));
    }
    out.push('\n');
    for x in 0..g.len() {
        out.push_str(&csv_field(&g.id(x).to_string()));
        for j in 0..spec.k() {
            out.push(',');
            out.push_str(&fmt_f64(spec.eigenvectors[(x, j)]));
        }
        out.push('\n');
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn sweep_to_csv(res: &SweepResult) -> String {
    let mut out = String::from("lambda,delta,norm_E,norm_lp,energy,resid,status\n");
    for r in &res.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            fmt_f64(r.lambda),
            fmt_f64(r.delta),
            fmt_f64(r.norm_e),
            fmt_f64(r.norm_lp),
            fmt_f64(r.energy),
            fmt_f64(r.resid),
            r.status
        ));
    }
    out
}

/// `(ln δ, ln ||u||_E)` for converged rows.
pub fn sweep_plot_data(res: &SweepResult) -> String {
    let mut out = String::from("log_delta,log_norm_E\n");
    for r in res.rows.iter().filter(|r| r.status == "converged" && r.norm_e > 0.0) {
        out.push_str(&format!("{},{}\n", fmt_f64(r.delta.ln()), fmt_f64(r.norm_e.ln())));
    }
    out
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: &Path, label: &str) -> Result<Self, IoError> {
        Ok(Self {
            path: label.to_string(),
            sha256: sha256_hex(&read_file(path)?),
        })
    }
}

/// Provenance of one CLI run. Output paths are relative to the manifest's
/// directory; input paths are stored as given.
#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub seed: u64,
    pub config_sha256: Option<String>,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

impl RunManifest {
    pub fn new(command: &str, seed: u64) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed,
            config_sha256: None,
            started_unix: unix_now(),
            finished_unix: 0,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<(), IoError> {
        self.inputs.push(FileDigest::of(path, &path.display().to_string())?);
        Ok(())
    }

    /// Writes the manifest to `dir/manifest.json`, digesting each output in `dir`.
    pub fn finish(mut self, dir: &Path, outputs: &[&str]) -> Result<PathBuf, IoError> {
        for name in outputs {
            self.outputs.push(FileDigest::of(&dir.join(name), name)?);
        }
        self.finished_unix = unix_now();
        let path = dir.join("manifest.json");
        write_atomic(&path, to_json(&self).as_bytes())?;
        Ok(path)
    }

    pub fn load(path: &Path) -> Result<Self, IoError> {
        serde_json::from_slice(&read_file(path)?).map_err(|e| parse_error(&path.display().to_string(), e))
    }

    /// Recomputes every digest; `dir` is the manifest's directory.
    pub fn verify(&self, dir: &Path) -> Result<(), IoError> {
        let inputs = self.inputs.iter().map(|d| (PathBuf::from(&d.path), d));
        let outputs = self.outputs.iter().map(|d| (dir.join(&d.path), d));
        for (path, digest) in inputs.chain(outputs) {
            let found = sha256_hex(&read_file(&path)?);
            if found != digest.sha256 {
                return Err(IoError::DigestMismatch {
                    path: digest.path.clone(),
                    recorded: digest.sha256.clone(),
                    found,
                });
            }
        }
        Ok(())
    }
}
