use std::path::Path;

use radiomap_core::localize::{assign_region, locators, region_loc_error, LocatorContext};
use radiomap_core::matching::matching_error;
use radiomap_core::metrics::{clustering_accuracy, nmi, pairwise_scores, subspace_similarity, NmiNorm};
use radiomap_core::segment::epsilon_error;
use radiomap_core::{RadioMap, Segmentation};
use serde::{Deserialize, Serialize};

use super::build::RADIOMAP;
use super::localize::load_map;
use super::print_json;
use crate::error::{CliError, CliResult, EXIT_OK};
use crate::formats::{config_hash, read_rss_csv, write_json, Dataset, TruthFile, QUERIES, SCHEMA_VERSION};
use crate::{Context, EvaluateArgs};

pub const REPORT: &str = "report.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluateConfig {
    /// Per-boundary slack of the segmentation error, as a fraction of N.
    pub epsilon: f64,
    pub nmi: NmiNorm,
    /// Weight exponent of the WCL baseline.
    pub wcl_alpha: f64,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        Self { epsilon: 0.003, nmi: NmiNorm::Geometric, wcl_alpha: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringScores {
    pub acc: f64,
    pub nmi: f64,
    pub f1: f64,
    pub ari: f64,
    pub precision: f64,
}

/// Mean distance between estimated and true region centers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationScores {
    pub queries: usize,
    pub proposed: Option<f64>,
    pub mr: f64,
    pub wcl: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub config_hash: String,
    pub map_config_hash: String,
    pub config: EvaluateConfig,
    pub clustering: Option<ClusteringScores>,
    pub segmentation_error: Option<f64>,
    pub matching_error: Option<f64>,
    pub subspace_similarity: Option<f64>,
    pub localization: Option<LocalizationScores>,
    pub notices: Vec<String>,
}

pub fn run(args: &EvaluateArgs, ctx: &Context) -> CliResult<u8> {
    let mut config = EvaluateConfig::default();
    if let Some(eps) = args.epsilon {
        if !(0.0..1.0).contains(&eps) {
            return Err(CliError::input(format!("--epsilon must lie in [0, 1), got {eps}")));
        }
        config.epsilon = eps;
    }
    if ctx.print_config {
        print_json(&config)?;
        return Ok(EXIT_OK);
    }
    let data = Dataset::load(&args.data)?;
    let map_path = args.map.clone().unwrap_or_else(|| args.data.join(RADIOMAP));
    let (file, map) = load_map(&map_path)?;
    if file.samples != data.sequence.len() || file.sensors != data.sequence.dim() {
        return Err(CliError::input(format!(
            "{} was built from {}x{} data, the dataset is {}x{}",
            map_path.display(),
            file.samples,
            file.sensors,
            data.sequence.len(),
            data.sequence.dim()
        )));
    }
    let segmentation = Segmentation::new(file.boundaries.clone(), file.samples)?;
    let report = evaluate(&data, &segmentation, &map, args.assignments.as_deref(), config, &file.config_hash)?;
    let out = args.out.clone().unwrap_or_else(|| args.data.join(REPORT));
    write_json(&out, &report)?;
    for n in &report.notices {
        eprintln!("notice: {n}");
    }
    println!("wrote {}", out.display());
    Ok(EXIT_OK)
}

fn zero_based(v: &[usize], what: &str) -> CliResult<Vec<usize>> {
    v.iter()
        .map(|&r| r.checked_sub(1).ok_or_else(|| CliError::input(format!("truth {what}: ids are 1-based"))))
        .collect()
}

pub fn evaluate(
    data: &Dataset,
    segmentation: &Segmentation,
    map: &RadioMap,
    assignments: Option<&Path>,
    config: EvaluateConfig,
    map_hash: &str,
) -> CliResult<Report> {
    let mut report = Report {
        schema_version: SCHEMA_VERSION,
        config_hash: config_hash(&config),
        map_config_hash: map_hash.to_string(),
        config,
        clustering: None,
        segmentation_error: None,
        matching_error: None,
        subspace_similarity: None,
        localization: None,
        notices: Vec::new(),
    };
    let Some(truth) = &data.truth else {
        report.notices.push(
            "dataset has no truth.json; clustering, segmentation, matching and localization metrics omitted".into(),
        );
        return Ok(report);
    };
    let config = &report.config;

    let pred = segmentation.labels();
    let labels = zero_based(&truth.labels, "labels")?;
    let pairs = pairwise_scores(&pred, &labels)?;
    report.clustering = Some(ClusteringScores {
        acc: clustering_accuracy(&pred, &labels)?,
        nmi: nmi(&pred, &labels, config.nmi)?,
        f1: pairs.f1,
        ari: pairs.ari,
        precision: pairs.precision,
    });

    let true_seg = Segmentation::new(truth.boundaries.clone(), truth.samples)?;
    let route = zero_based(&truth.route, "route")?;
    if true_seg.k() == segmentation.k() {
        report.segmentation_error = Some(epsilon_error(segmentation, &true_seg, config.epsilon)?);
        report.subspace_similarity = Some(mean_similarity(map, truth, &route)?);
        match &map.region_ids {
            Some(ids) => report.matching_error = Some(matching_error(ids, &route)?),
            None => report.notices.push("radio map has no region ids; matching error omitted".into()),
        }
    } else {
        report.notices.push(format!(
            "radio map has {} clusters but truth has {} segments; segmentation, matching and subspace metrics omitted",
            segmentation.k(),
            true_seg.k()
        ));
    }

    report.localization = localization(data, map, truth, assignments, config, &mut report.notices)?;
    Ok(report)
}

/// Mean similarity between each cluster's feature and the generative feature of the
/// region its true segment covers.
fn mean_similarity(map: &RadioMap, truth: &TruthFile, route: &[usize]) -> CliResult<f64> {
    let mut sum = 0.0;
    for (k, fit) in map.model.features.iter().enumerate() {
        let region = route[k];
        let record = truth
            .features
            .get(region)
            .ok_or_else(|| CliError::input(format!("truth has no feature for region {}", region + 1)))?;
        sum += subspace_similarity(fit, &record.to_feature()?)?;
    }
    Ok(sum / map.model.k() as f64)
}

fn localization(
    data: &Dataset,
    map: &RadioMap,
    truth: &TruthFile,
    assignments: Option<&Path>,
    config: &EvaluateConfig,
    notices: &mut Vec<String>,
) -> CliResult<Option<LocalizationScores>> {
    let path = data.dir.join(QUERIES);
    if !path.exists() {
        notices.push("dataset has no queries.csv; localization errors omitted".into());
        return Ok(None);
    }
    let (d, queries) = read_rss_csv(&path)?;
    if queries.len() != truth.query_regions.len() {
        return Err(CliError::input(format!(
            "{} has {} rows but truth lists {} query regions",
            path.display(),
            queries.len(),
            truth.query_regions.len()
        )));
    }
    if queries.is_empty() {
        notices.push("queries.csv is empty; localization errors omitted".into());
        return Ok(None);
    }
    if d != data.sequence.dim() {
        return Err(CliError::input(format!(
            "{}: {d} sensor columns, expected {}",
            path.display(),
            data.sequence.dim()
        )));
    }
    let truth_regions = zero_based(&truth.query_regions, "query regions")?;
    let centers = data.graph.centers();
    let ctx = LocatorContext { map, layout: &data.layout, centers, alpha: config.wcl_alpha };
    let registry = locators();
    let score = |name: &str| -> CliResult<f64> {
        let locator = registry.get(name)?;
        let pairs = queries
            .iter()
            .zip(&truth_regions)
            .map(|(x, &t)| Ok((locator.locate(x, &ctx)?, t)))
            .collect::<CliResult<Vec<_>>>()?;
        Ok(region_loc_error(&pairs, centers)?)
    };

    let proposed = if map.region_ids.is_none() {
        notices.push("radio map has no region ids; proposed localization error omitted".into());
        None
    } else if let Some(a) = assignments {
        let est = read_assignments(a, queries.len())?;
        let pairs: Vec<(usize, usize)> =
            est.iter().zip(&truth_regions).filter_map(|(e, &t)| e.map(|e| (e, t))).collect();
        let skipped = est.len() - pairs.len();
        if skipped > 0 {
            notices.push(format!("{skipped} flagged assignments excluded from the proposed localization error"));
        }
        if pairs.is_empty() {
            None
        } else {
            Some(region_loc_error(&pairs, centers)?)
        }
    } else {
        let pairs = queries
            .iter()
            .zip(&truth_regions)
            .map(|(x, &t)| Ok((assign_region(x, map)?, t)))
            .collect::<CliResult<Vec<_>>>()?;
        Some(region_loc_error(&pairs, centers)?)
    };

    Ok(Some(LocalizationScores { queries: queries.len(), proposed, mr: score("mr")?, wcl: score("wcl")? }))
}

/// 0-based region per row of an assignments file; `None` for flagged rows.
fn read_assignments(path: &Path, expected: usize) -> CliResult<Vec<Option<usize>>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::io(path, e))?;
    let header = r.headers().map_err(|e| CliError::io(path, e))?.clone();
    let col = header
        .iter()
        .position(|h| h == "region")
        .ok_or_else(|| CliError::input(format!("{}: no `region` column", path.display())))?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| CliError::io(path, e))?;
        let cell = rec.get(col).unwrap_or("").trim();
        out.push(if cell.is_empty() {
            None
        } else {
            let id: usize =
                cell.parse().map_err(|_| CliError::input(format!("{}: bad region id `{cell}`", path.display())))?;
            Some(
                id.checked_sub(1)
                    .ok_or_else(|| CliError::input(format!("{}: region ids are 1-based", path.display())))?,
            )
        });
    }
    if out.len() != expected {
        return Err(CliError::input(format!("{}: {} assignments for {expected} queries", path.display(), out.len())));
    }
    Ok(out)
}
