//! On-disk formats. Region and sample ids are 1-based in every file.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use radiomap_core::matching::{RegionGraph, RouteMatch};
use radiomap_core::synth::{SynthSpec, TruthModel};
use radiomap_core::{ModelParams, Point, RssSequence, SensorLayout, SubspaceFeature};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

pub const MEASUREMENTS: &str = "measurements.csv";
pub const QUERIES: &str = "queries.csv";
pub const SENSORS: &str = "sensors.json";
pub const REGIONS: &str = "regions.json";
pub const GRAPH: &str = "graph.json";
pub const TRUTH: &str = "truth.json";
pub const SPEC: &str = "spec.json";

/// SHA-256 of the compact JSON encoding of `value`.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("config serializes");
    hex::encode(Sha256::digest(bytes))
}

/// `x` with 9 significant digits in positional notation.
pub fn sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (8 - magnitude).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.starts_with("-") && s[1..].chars().all(|c| c == '0' || c == '.') {
        return s[1..].to_string();
    }
    s
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::io(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::io(path, e))
}

/// Writes `t,s1,...,sD` rows; `t` is the 1-based sample index.
pub fn write_rss_csv<'a>(path: &Path, d: usize, rows: impl Iterator<Item = &'a [f64]>) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::io(path, e))?;
    let header: Vec<String> = std::iter::once("t".to_string()).chain((1..=d).map(|j| format!("s{j}"))).collect();
    w.write_record(&header).map_err(|e| CliError::io(path, e))?;
    for (i, row) in rows.enumerate() {
        let rec: Vec<String> = std::iter::once((i + 1).to_string()).chain(row.iter().map(|&v| sig9(v))).collect();
        w.write_record(&rec).map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Reads RSS rows from a CSV with an `s1..sD` header and an optional leading `t`
/// column. Cells that do not parse as numbers are reported as input errors; `NaN`
/// and infinities parse and are left to the caller.
pub fn read_rss_csv(path: &Path) -> CliResult<(usize, Vec<Vec<f64>>)> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    if text.trim().is_empty() {
        return Ok((0, Vec::new()));
    }
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| CliError::io(path, e))?.clone();
    let skip = usize::from(header.get(0) == Some("t"));
    let d = header.len() - skip;
    for (j, name) in header.iter().skip(skip).enumerate() {
        if name != format!("s{}", j + 1) {
            return Err(CliError::input(format!(
                "{}: expected column s{} in the header, found `{name}`",
                path.display(),
                j + 1
            )));
        }
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| CliError::io(path, e))?;
        if rec.len() != header.len() {
            return Err(CliError::input(format!(
                "{}: row {} has {} fields, expected {}",
                path.display(),
                i + 1,
                rec.len(),
                header.len()
            )));
        }
        let row = rec
            .iter()
            .skip(skip)
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| CliError::input(format!("{}: row {}: `{v}` is not a number", path.display(), i + 1)))
            })
            .collect::<CliResult<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((d, rows))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorsFile {
    pub schema_version: u32,
    pub config_hash: String,
    pub sensors: Vec<Point>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionEntry {
    pub id: usize,
    pub center: Point,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionsFile {
    pub schema_version: u32,
    pub config_hash: String,
    pub regions: Vec<RegionEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphFile {
    #[serde(default = "current_schema")]
    pub schema_version: u32,
    #[serde(default)]
    pub config_hash: String,
    #[serde(rename = "K")]
    pub k: usize,
    pub centers: Vec<Point>,
    pub edges: Vec<[usize; 2]>,
}

fn current_schema() -> u32 {
    SCHEMA_VERSION
}

impl GraphFile {
    pub fn from_graph(g: &RegionGraph, config_hash: &str) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            config_hash: config_hash.into(),
            k: g.k(),
            centers: g.centers().to_vec(),
            edges: g.edges().map(|(a, b)| [a + 1, b + 1]).collect(),
        }
    }

    pub fn to_graph(&self) -> CliResult<RegionGraph> {
        if self.centers.len() != self.k {
            return Err(CliError::input(format!(
                "graph: K = {} but {} centers are listed",
                self.k,
                self.centers.len()
            )));
        }
        let edges = self
            .edges
            .iter()
            .map(|&[a, b]| {
                if a == 0 || b == 0 {
                    Err(CliError::input("graph: region ids are 1-based"))
                } else {
                    Ok((a - 1, b - 1))
                }
            })
            .collect::<CliResult<Vec<_>>>()?;
        Ok(RegionGraph::new(self.centers.clone(), edges)?)
    }
}

/// A subspace feature in plain arrays; `basis` lists the columns of `U`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureRecord {
    pub mu: Vec<f64>,
    pub basis: Vec<Vec<f64>>,
    pub sigma2: Vec<f64>,
    pub noise_var: f64,
}

impl FeatureRecord {
    pub fn from_parts(mu: &DVector<f64>, basis: &DMatrix<f64>, sigma2: &DVector<f64>, noise_var: f64) -> Self {
        Self {
            mu: mu.iter().copied().collect(),
            basis: basis.column_iter().map(|c| c.iter().copied().collect()).collect(),
            sigma2: sigma2.iter().copied().collect(),
            noise_var,
        }
    }

    pub fn from_feature(f: &SubspaceFeature) -> Self {
        Self::from_parts(f.mu(), f.basis(), f.sigma2(), f.noise_var())
    }

    pub fn to_feature(&self) -> CliResult<SubspaceFeature> {
        let d = self.mu.len();
        if let Some(c) = self.basis.iter().find(|c| c.len() != d) {
            return Err(CliError::input(format!("basis column of length {} in a {d}-sensor feature", c.len())));
        }
        let basis = DMatrix::from_fn(d, self.basis.len(), |i, j| self.basis[j][i]);
        Ok(SubspaceFeature::new(
            DVector::from_vec(self.mu.clone()),
            basis,
            DVector::from_vec(self.sigma2.clone()),
            self.noise_var,
        )?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthFile {
    pub schema_version: u32,
    pub config_hash: String,
    pub samples: usize,
    /// `t_1..t_{K-1}`: segment `k` holds samples `t_{k-1} < i <= t_k`.
    pub boundaries: Vec<usize>,
    /// Per-sample region of the collection order.
    pub labels: Vec<usize>,
    /// Region visited by each segment.
    pub route: Vec<usize>,
    /// True region of each row of `queries.csv`.
    pub query_regions: Vec<usize>,
    /// Generative features by region.
    pub features: Vec<FeatureRecord>,
}

impl TruthFile {
    /// Generative features with the noise variance floored as for likelihood use.
    pub fn model_features(model: &TruthModel) -> CliResult<Vec<FeatureRecord>> {
        Ok(model.params()?.features.iter().map(FeatureRecord::from_feature).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecFile {
    pub schema_version: u32,
    pub config_hash: String,
    pub spec: SynthSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RouteRecord {
    pub pi: Option<Vec<usize>>,
    pub cost: Option<f64>,
    pub feasible: bool,
    pub reversal_ambiguous: bool,
}

impl RouteRecord {
    pub fn from_match(m: Option<&RouteMatch>) -> Self {
        match m {
            Some(m) => Self {
                pi: Some(m.pi.iter().map(|r| r + 1).collect()),
                cost: Some(m.cost),
                feasible: true,
                reversal_ambiguous: m.reversal_ambiguous,
            },
            None => Self { pi: None, cost: None, feasible: false, reversal_ambiguous: false },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterRecord {
    /// 1-based cluster position in collection order.
    pub cluster: usize,
    /// Matched region, when the route search succeeded.
    pub region: Option<usize>,
    pub samples: [usize; 2],
    pub centroid: Point,
    pub feature: FeatureRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadioMapFile {
    pub schema_version: u32,
    pub config_hash: String,
    pub seed: u64,
    pub samples: usize,
    pub sensors: usize,
    pub boundaries: Vec<usize>,
    pub region_ids: Option<Vec<usize>>,
    pub route: RouteRecord,
    pub clusters: Vec<ClusterRecord>,
    pub config: radiomap_core::pipeline::BuildConfig,
}

impl RadioMapFile {
    pub fn model(&self) -> CliResult<ModelParams> {
        let features = self.clusters.iter().map(|c| c.feature.to_feature()).collect::<CliResult<Vec<_>>>()?;
        Ok(ModelParams::new(features)?)
    }

    /// 0-based region per cluster.
    pub fn region_ids0(&self) -> CliResult<Option<Vec<usize>>> {
        self.region_ids
            .as_ref()
            .map(|ids| {
                ids.iter()
                    .map(|&r| r.checked_sub(1).ok_or_else(|| CliError::input("radio map: region ids are 1-based")))
                    .collect()
            })
            .transpose()
    }
}

/// The files of a dataset directory.
pub struct Dataset {
    pub dir: PathBuf,
    pub sequence: RssSequence,
    pub layout: SensorLayout,
    pub graph: RegionGraph,
    pub truth: Option<TruthFile>,
    pub spec: Option<SpecFile>,
}

impl Dataset {
    pub fn load(dir: &Path) -> CliResult<Self> {
        let (d, rows) = read_rss_csv(&dir.join(MEASUREMENTS))?;
        if rows.is_empty() {
            return Err(CliError::input(format!("{}: no samples", dir.join(MEASUREMENTS).display())));
        }
        let sequence = RssSequence::new(rows.concat(), rows.len(), d)
            .map_err(|e| CliError::from(e).context(dir.join(MEASUREMENTS).display()))?;
        let sensors: SensorsFile = read_json(&dir.join(SENSORS))?;
        let layout = SensorLayout::new(sensors.sensors)?;
        let graph = read_json::<GraphFile>(&dir.join(GRAPH))?.to_graph()?;
        let truth_path = dir.join(TRUTH);
        let truth = if truth_path.exists() { Some(read_json(&truth_path)?) } else { None };
        let spec_path = dir.join(SPEC);
        let spec = if spec_path.exists() { Some(read_json(&spec_path)?) } else { None };
        Ok(Self { dir: dir.to_path_buf(), sequence, layout, graph, truth, spec })
    }

    pub fn seed(&self) -> u64 {
        self.spec.as_ref().map_or(0, |s| s.spec.seed)
    }
}
