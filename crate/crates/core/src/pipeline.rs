//! End-to-end runs: configuration, fitting, labeling and the run file that
//! stores a fitted result.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use crate::data::{build_feature_matrix, load_features, load_matrix, load_terms, DataMatrix, LanguageModel, MatrixFormat, TermDataset};
use crate::error::{Error, Result};
use crate::eval::LabelMethod;
use crate::kernels::{
    add_jaccard_noise, build_kernel_matrix, jaccard_matrix, levenshtein, KernelInput, KernelKind, KernelMatrix,
    KernelParams, VectorKernel, JACCARD_NOISE,
};
use crate::labeling::{
    label_grid, label_knn_adjacency, label_mst_adjacency, ClusterAssignment, GridLabeling, LabelSpace,
    DEFAULT_SEGMENT_SAMPLES,
};
use crate::optimizer::{solve_dual, BallProblem, Method, SvcModel};
use crate::projection::{project, Projection2D, ProjectionSource};

const RUN_HEADER: &str = "gridsvc-run 1";

/// Every knob of a run. Column indices `cx`, `cy` are one-based; both 0
/// selects correspondence analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    /// feature dictionary for term input
    pub features: Option<PathBuf>,
    pub language: LanguageModel,
    pub kernel: KernelKind,
    pub optimizer: Method,
    pub labeling: LabelMethod,
    pub nu: f64,
    pub q: f64,
    pub k: usize,
    pub g: usize,
    pub cx: usize,
    pub cy: usize,
    pub seed: u64,
    /// segment samples of the adjacency labelers
    pub samples: usize,
    /// Jaccard+ noise bound
    pub noise: f64,
    pub output: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data: None,
            features: None,
            language: LanguageModel::TermRadical,
            kernel: KernelKind::Gaussian,
            optimizer: Method::Quadratic,
            labeling: LabelMethod::Grid,
            nu: 0.5,
            q: 40.0,
            k: 1,
            g: 5,
            cx: 0,
            cy: 0,
            seed: 42,
            samples: DEFAULT_SEGMENT_SAMPLES,
            noise: JACCARD_NOISE,
            output: PathBuf::from("."),
        }
    }
}

pub const PRESETS: [&str; 3] = ["example", "figure2", "terms"];

impl RunConfig {
    /// Named parameter sets: `example` (small demo run), `figure2` (the Iris
    /// precision study) and `terms` (radical features with the Jaccard+
    /// kernel).
    pub fn preset(name: &str) -> Result<Self> {
        let base = RunConfig::default();
        match name {
            "example" => Ok(base),
            "figure2" => Ok(RunConfig {
                nu: 0.7,
                q: 1200.0,
                g: 13,
                ..base
            }),
            "terms" => Ok(RunConfig {
                kernel: KernelKind::JrbPlus,
                nu: 1.0,
                q: 2000.0,
                g: 30,
                ..base
            }),
            _ => Err(Error::InvalidParameter(format!(
                "unknown preset {name:?} (expected one of {})",
                PRESETS.join(", ")
            ))),
        }
    }

    /// Set one `key=value` entry.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::InvalidParameter(format!("invalid {what} {value:?}"));
        let v = value.trim();
        match key.trim() {
            "data" => self.data = Some(PathBuf::from(v)),
            "features" => self.features = Some(PathBuf::from(v)),
            "language" => self.language = v.parse()?,
            "kernel" => self.kernel = v.parse()?,
            "optimizer" => self.optimizer = v.parse()?,
            "labeling" => self.labeling = v.parse()?,
            "nu" => self.nu = v.parse().map_err(|_| bad("nu"))?,
            "q" => self.q = v.parse().map_err(|_| bad("q"))?,
            "k" => self.k = v.parse().map_err(|_| bad("k"))?,
            "g" => self.g = v.parse().map_err(|_| bad("g"))?,
            "cx" => self.cx = v.parse().map_err(|_| bad("cx"))?,
            "cy" => self.cy = v.parse().map_err(|_| bad("cy"))?,
            "seed" => self.seed = v.parse().map_err(|_| bad("seed"))?,
            "samples" => self.samples = v.parse().map_err(|_| bad("samples"))?,
            "noise" => self.noise = v.parse().map_err(|_| bad("noise"))?,
            "output" => self.output = PathBuf::from(v),
            other => return Err(Error::InvalidParameter(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Apply a `key=value` file; blank lines and `#` comments are skipped.
    /// A `preset` key resets every field to that preset first.
    pub fn apply_file(&mut self, text: &str) -> Result<()> {
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Format {
                line: no + 1,
                message: "expected key=value".into(),
            })?;
            if k.trim() == "preset" {
                let keep = (self.data.clone(), self.features.clone(), self.output.clone());
                *self = RunConfig::preset(v.trim())?;
                (self.data, self.features, self.output) = keep;
            } else {
                self.set(k, v)?;
            }
        }
        Ok(())
    }

    /// Parameter sanity checks that need no data.
    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0 && self.nu <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "nu must lie in (0, 1] (C = 1/(N·nu)), got {}",
                self.nu
            )));
        }
        if self.kernel.is_radial() && !(self.q > 0.0 && self.q.is_finite()) {
            return Err(Error::InvalidParameter(format!("q must be > 0, got {}", self.q)));
        }
        if self.g < 2 {
            return Err(Error::InvalidParameter(format!("g must be at least 2, got {}", self.g)));
        }
        if self.k == 0 || (self.labeling == LabelMethod::Grid && self.k > 8) {
            return Err(Error::InvalidParameter(format!("k out of range: {}", self.k)));
        }
        if self.samples == 0 {
            return Err(Error::InvalidParameter("samples must be at least 1".into()));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::InvalidParameter(format!("noise must be >= 0, got {}", self.noise)));
        }
        Ok(())
    }

    /// All fields as ordered `key=value` pairs (paths only when set).
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        let mut v = Vec::new();
        if let Some(d) = &self.data {
            v.push(("data", d.display().to_string()));
        }
        if let Some(f) = &self.features {
            v.push(("features", f.display().to_string()));
        }
        v.extend([
            ("language", self.language.to_string()),
            ("kernel", self.kernel.to_string()),
            ("optimizer", self.optimizer.to_string()),
            ("labeling", self.labeling.to_string()),
            ("nu", format!("{:?}", self.nu)),
            ("q", format!("{:?}", self.q)),
            ("k", self.k.to_string()),
            ("g", self.g.to_string()),
            ("cx", self.cx.to_string()),
            ("cy", self.cy.to_string()),
            ("seed", self.seed.to_string()),
            ("samples", self.samples.to_string()),
            ("noise", format!("{:?}", self.noise)),
        ]);
        v
    }

    pub fn kernel_params(&self) -> KernelParams {
        KernelParams::new(self.kernel, self.q)
            .with_seed(self.seed)
            .with_noise(self.noise)
    }
}

/// Input of a run.
#[derive(Debug, Clone)]
pub enum DataSource {
    Matrix(DataMatrix),
    Terms(TermDataset),
}

impl DataSource {
    /// Numeric table for vector and precomputed kernels; a term list plus
    /// the feature dictionary for term kernels.
    pub fn load(cfg: &RunConfig) -> Result<Self> {
        let path = cfg
            .data
            .as_deref()
            .ok_or_else(|| Error::InvalidParameter("no data file given".into()))?;
        if cfg.kernel.is_term() {
            let terms = load_terms(path)?;
            let ds = match &cfg.features {
                Some(f) => TermDataset::new(terms, load_features(f)?, cfg.language)?,
                None => TermDataset::with_derived_features(terms, cfg.language)?,
            };
            Ok(DataSource::Terms(ds))
        } else {
            Ok(DataSource::Matrix(load_matrix(path, MatrixFormat::from_path(path))?))
        }
    }

    pub fn len(&self) -> usize {
        match self {
            DataSource::Matrix(m) => m.rows(),
            DataSource::Terms(t) => t.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn row_names(&self) -> Vec<String> {
        match self {
            DataSource::Matrix(m) => m.row_names().to_vec(),
            DataSource::Terms(t) => t.row_names(),
        }
    }

    pub fn tags(&self) -> Vec<Option<u32>> {
        match self {
            DataSource::Matrix(m) => m.class_tags().to_vec(),
            DataSource::Terms(t) => t.tags().to_vec(),
        }
    }

    /// Attribute table used for per-cluster means.
    pub fn attributes(&self) -> Result<DataMatrix> {
        match self {
            DataSource::Matrix(m) => Ok(m.clone()),
            DataSource::Terms(t) => build_feature_matrix(t),
        }
    }
}

/// Nonnegative N×N table whose correspondence analysis places terms in the
/// plane: Jaccard indices (with the Jaccard+ noise for that kernel) or
/// `1/(1 + D)` for Levenshtein distances, each with a unit diagonal; the
/// kernel values themselves for string kernels.
pub fn term_similarity_table(ds: &TermDataset, params: &KernelParams, kernel: &KernelMatrix) -> Result<DataMatrix> {
    let n = ds.len();
    let mut values = match params.kind {
        KernelKind::Jrb | KernelKind::Rbj | KernelKind::JrbPlus => {
            let mut j = jaccard_matrix(&ds.token_sets());
            if params.kind == KernelKind::JrbPlus {
                add_jaccard_noise(&mut j, n, params.noise, params.seed);
            }
            j
        }
        KernelKind::Lrb | KernelKind::Rbl => {
            let t = ds.terms();
            let mut v = vec![0.0; n * n];
            for i in 0..n {
                for j in i..n {
                    let s = 1.0 / (1.0 + levenshtein(&t[i], &t[j], params.weights));
                    v[i * n + j] = s;
                    v[j * n + i] = s;
                }
            }
            v
        }
        _ => kernel.values().to_vec(),
    };
    if params.kind != KernelKind::SkConstant && params.kind != KernelKind::SkSpectrum {
        for i in 0..n {
            values[i * n + i] = 1.0;
        }
    }
    let rows = values.chunks(n).map(<[f64]>::to_vec).collect();
    DataMatrix::from_rows(rows, Some(ds.row_names()))
}

/// Everything a fitted run produces.
#[derive(Debug, Clone)]
pub struct FittedRun {
    pub config: RunConfig,
    pub model: SvcModel,
    pub projection: Projection2D,
    pub grid: Option<GridLabeling>,
    pub assignment: ClusterAssignment,
    pub row_names: Vec<String>,
    pub tags: Vec<Option<u32>>,
}

/// Kernel, projection and ball for `source` under `cfg`.
pub fn fit_model(source: &DataSource, cfg: &RunConfig) -> Result<(SvcModel, Projection2D)> {
    cfg.validate()?;
    let params = cfg.kernel_params();
    let (kernel, projection) = match source {
        DataSource::Matrix(m) => {
            let projection = project(m, cfg.cx, cfg.cy)?;
            let kernel = if cfg.kernel == KernelKind::Precomputed {
                build_kernel_matrix(KernelInput::Matrix(m), &params)?
            } else if cfg.kernel.is_vector() {
                // the ball is fitted where it will be labeled
                let plane = projection.to_matrix(m.row_names())?;
                KernelMatrix::from_vectors(&plane, VectorKernel::new(cfg.kernel, cfg.q)?)
            } else {
                return Err(Error::InvalidParameter(format!(
                    "kernel {} needs term input",
                    cfg.kernel
                )));
            };
            (kernel, projection)
        }
        DataSource::Terms(ds) => {
            if !cfg.kernel.is_term() {
                return Err(Error::InvalidParameter(format!(
                    "kernel {} needs numeric input",
                    cfg.kernel
                )));
            }
            let kernel = build_kernel_matrix(KernelInput::Terms(ds), &params)?;
            let table = term_similarity_table(ds, &params, &kernel)?;
            (kernel, project(&table, cfg.cx, cfg.cy)?)
        }
    };
    let problem = BallProblem::new(&kernel, cfg.nu)?;
    let model = solve_dual(&problem, cfg.optimizer, cfg.seed)?;
    Ok((model, projection))
}

/// Label a fitted ball with the configured method.
pub fn label(
    model: &SvcModel,
    projection: &Projection2D,
    cfg: &RunConfig,
) -> Result<(Option<GridLabeling>, ClusterAssignment)> {
    let space = LabelSpace::new(model, projection)?;
    match cfg.labeling {
        LabelMethod::Grid => {
            let (g, a) = label_grid(&space, cfg.g, cfg.k)?;
            Ok((Some(g), a))
        }
        LabelMethod::KnnAdj => Ok((None, label_knn_adjacency(&space, cfg.k, cfg.samples)?)),
        LabelMethod::MstAdj => Ok((None, label_mst_adjacency(&space, cfg.k, cfg.samples)?)),
    }
}

pub fn fit(source: &DataSource, cfg: &RunConfig) -> Result<FittedRun> {
    let (model, projection) = fit_model(source, cfg)?;
    let (grid, assignment) = label(&model, &projection, cfg)?;
    Ok(FittedRun {
        config: cfg.clone(),
        model,
        projection,
        grid,
        assignment,
        row_names: source.row_names(),
        tags: source.tags(),
    })
}

fn clean_name(s: &str) -> String {
    s.replace(['\t', '\n', '\r'], " ")
}

impl FittedRun {
    /// Class tags if every point carries one.
    pub fn complete_tags(&self) -> Option<Vec<u32>> {
        self.tags.iter().copied().collect()
    }

    /// Relabel with new labeling parameters, keeping the fitted ball.
    pub fn relabel(&mut self, cfg: &RunConfig) -> Result<()> {
        cfg.validate()?;
        let (grid, assignment) = label(&self.model, &self.projection, cfg)?;
        self.grid = grid;
        self.assignment = assignment;
        self.config.labeling = cfg.labeling;
        self.config.g = cfg.g;
        self.config.k = cfg.k;
        self.config.samples = cfg.samples;
        Ok(())
    }

    /// Cluster count, sizes and per-cluster attribute means.
    pub fn summary(&self, attributes: Option<&DataMatrix>) -> String {
        let a = &self.assignment;
        let mut s = String::new();
        let _ = writeln!(s, "points {}", a.len());
        let _ = writeln!(s, "clusters {}", a.n_clusters());
        let _ = writeln!(s, "unclustered {}", a.unclustered());
        let _ = writeln!(
            s,
            "support vectors {} (bounded {})",
            self.model.sv_indices().len(),
            self.model.bsv_indices().len()
        );
        let _ = writeln!(s, "r_hat_sq {:.6}", self.model.r_hat_sq());
        let _ = writeln!(s, "seed {}", self.config.seed);
        if let Some(attr) = attributes {
            let _ = write!(s, "{:>8} {:>6}", "cluster", "size");
            for name in attr.col_names() {
                let _ = write!(s, " {:>12}", truncate(name, 12));
            }
            s.push('\n');
            let mut ids: Vec<u32> = a.sizes().keys().copied().collect();
            if a.unclustered() > 0 {
                ids.push(0);
            }
            for id in ids {
                let members = a.members(id);
                let _ = write!(s, "{:>8} {:>6}", id, members.len());
                for j in 0..attr.cols() {
                    let mean = members.iter().map(|&i| attr.get(i, j)).sum::<f64>() / members.len() as f64;
                    let _ = write!(s, " {mean:>12.4}");
                }
                s.push('\n');
            }
        } else {
            for (id, size) in a.sizes() {
                let _ = writeln!(s, "cluster {id} size {size}");
            }
        }
        s
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{RUN_HEADER}")?;
        writeln!(out, "[config]")?;
        for (k, v) in self.config.to_pairs() {
            writeln!(out, "{k}={v}")?;
        }
        writeln!(out, "[model]")?;
        self.model.write(&mut out)?;
        writeln!(out, "[points]")?;
        for i in 0..self.row_names.len() {
            let p = self.projection.point(i);
            writeln!(
                out,
                "{}\t{:?}\t{:?}\t{}",
                clean_name(&self.row_names[i]),
                p[0],
                p[1],
                self.assignment.label(i)
            )?;
        }
        writeln!(out, "[grid]")?;
        if let Some(g) = &self.grid {
            g.write_csv(&mut out)?;
        }
        writeln!(out, "[end]")?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::FileNotFound(path.to_path_buf()));
        }
        let f = std::fs::File::open(path)?;
        FittedRun::read(std::io::BufReader::new(f))
    }

    /// Parse a run file. The grid labeling is recomputed from the stored
    /// ball, which reproduces it exactly.
    pub fn read<R: BufRead>(input: R) -> Result<Self> {
        let corrupt = |m: String| Error::CorruptModel(m);
        let mut sections: BTreeMap<String, Vec<String>> = BTreeMap::new();
        let mut current: Option<String> = None;
        let mut lines = input.lines();
        match lines.next() {
            Some(Ok(h)) if h.trim() == RUN_HEADER => {}
            _ => return Err(corrupt("missing run header".into())),
        }
        let mut ended = false;
        for line in lines {
            let line = line?;
            let t = line.trim_end();
            if t.starts_with('[') && t.ends_with(']') {
                let name = t[1..t.len() - 1].to_string();
                if name == "end" {
                    ended = true;
                    break;
                }
                sections.insert(name.clone(), Vec::new());
                current = Some(name);
            } else if let Some(c) = &current {
                sections.get_mut(c).expect("section exists").push(line);
            } else {
                return Err(corrupt(format!("content before the first section: {line:?}")));
            }
        }
        if !ended {
            return Err(corrupt("truncated run file".into()));
        }
        let section = |name: &str| {
            sections
                .get(name)
                .ok_or_else(|| Error::CorruptModel(format!("missing [{name}] section")))
        };

        let mut config = RunConfig::default();
        config
            .apply_file(&section("config")?.join("\n"))
            .map_err(|e| corrupt(format!("bad config: {e}")))?;
        let model = SvcModel::read(section("model")?.join("\n").as_bytes())?;

        let mut row_names = Vec::new();
        let mut coords = Vec::new();
        let mut labels = Vec::new();
        for line in section("points")? {
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 4 {
                return Err(corrupt(format!("bad point line {line:?}")));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| Error::CorruptModel(format!("bad number {s:?}")));
            row_names.push(f[0].to_string());
            coords.push([num(f[1])?, num(f[2])?]);
            labels.push(f[3].parse::<u32>().map_err(|_| corrupt(format!("bad label {:?}", f[3])))?);
        }
        if row_names.len() != model.n() {
            return Err(corrupt(format!(
                "{} points for a model of {}",
                row_names.len(),
                model.n()
            )));
        }
        let source = if config.cx == 0 && config.cy == 0 {
            ProjectionSource::Coa
        } else {
            ProjectionSource::Columns(config.cx.saturating_sub(1), config.cy.saturating_sub(1))
        };
        let projection = Projection2D::from_coords(coords, source)?;
        let grid = if config.labeling == LabelMethod::Grid && !section("grid")?.is_empty() {
            let space = LabelSpace::new(&model, &projection)?;
            Some(label_grid(&space, config.g, config.k)?.0)
        } else {
            None
        };
        let tags = row_names
            .iter()
            .map(|n| crate::data::parse_class_tag(n).0)
            .collect();
        Ok(FittedRun {
            config,
            model,
            projection,
            grid,
            assignment: ClusterAssignment::new(labels),
            row_names,
            tags,
        })
    }

    /// One section per cluster id listing member names; section 0 holds the
    /// points no cluster took and is always present.
    pub fn export_clusters<W: Write>(&self, mut out: W) -> Result<()> {
        let a = &self.assignment;
        let mut ids: Vec<u32> = a.sizes().keys().copied().collect();
        ids.push(0);
        for id in ids {
            if id == 0 {
                writeln!(out, "# cluster 0 (unclustered): {} members", a.unclustered())?;
            } else {
                writeln!(out, "# cluster {id}: {} members", a.sizes()[&id])?;
            }
            for i in a.members(id) {
                writeln!(out, "{}", self.row_names[i])?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

fn truncate(s: &str, n: usize) -> String {
    s.chars().take(n).collect()
}
