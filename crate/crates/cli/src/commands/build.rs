use std::fs;

use radiomap_core::model::WindowParams;
use radiomap_core::pipeline::{build, BuildConfig};
use radiomap_core::segment::{epsilon_error, Init};
use radiomap_core::{Error, Provenance, Segmentation};
use serde::Serialize;

use super::print_json;
use crate::error::{CliError, CliResult, EXIT_INFEASIBLE, EXIT_OK};
use crate::formats::{
    config_hash, read_json, sig9, write_json, ClusterRecord, Dataset, FeatureRecord, RadioMapFile, RouteRecord,
    SCHEMA_VERSION,
};
use crate::BuildArgs;
use crate::Context;

pub const RADIOMAP: &str = "radiomap.json";
pub const TRACE: &str = "trace.csv";

/// Segmentation slack used for the trace's error column.
const TRACE_EPSILON: f64 = 0.003;

/// Default < config file < flags.
pub fn resolve_config(args: &BuildArgs) -> CliResult<BuildConfig> {
    let mut config = match &args.config {
        Some(path) => read_json(path)?,
        None => BuildConfig::default(),
    };
    if args.d0 {
        config.segmenter = "merge-split".into();
    }
    if let Some(s) = &args.segmenter {
        config.segmenter = s.clone();
    }
    if let Some(m) = &args.matcher {
        config.matcher = m.clone();
    }
    if let Some(beta) = args.beta {
        config.window = WindowParams::smooth(beta);
    }
    if args.rectangle {
        config.window = WindowParams::rectangle();
    }
    if let Some(seed) = args.init_seed {
        config.init = Init::Random { seed };
    }
    if let Some(n) = args.max_iters {
        config.max_iters = n;
    }
    config.window.validate()?;
    Ok(config)
}

/// Everything that determines the build output besides the input files.
#[derive(Serialize)]
struct HashedBuild<'a> {
    config: &'a BuildConfig,
    seed: u64,
}

pub fn run(args: &BuildArgs, ctx: &Context) -> CliResult<u8> {
    let config = resolve_config(args)?;
    if ctx.print_config {
        print_json(&config)?;
        return Ok(EXIT_OK);
    }
    let data = Dataset::load(&args.data)?;
    let seed = ctx.seed_override.unwrap_or_else(|| data.seed());
    let hash = config_hash(&HashedBuild { config: &config, seed });
    let provenance = Provenance { config_hash: hash.clone(), seed };
    let out = build(&data.sequence, &data.layout, &data.graph, &config, provenance)?;

    let dir = args.out.clone().unwrap_or_else(|| args.data.clone());
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;

    let route = out.route.as_ref().ok();
    let clusters = (0..out.segmentation.k())
        .map(|k| {
            let rows = out.segmentation.segment(k + 1);
            ClusterRecord {
                cluster: k + 1,
                region: route.map(|r| r.pi[k] + 1),
                samples: [rows.start + 1, rows.end],
                centroid: out.centroids[k],
                feature: FeatureRecord::from_feature(&out.map.model.features[k]),
            }
        })
        .collect();
    let file = RadioMapFile {
        schema_version: SCHEMA_VERSION,
        config_hash: hash,
        seed,
        samples: data.sequence.len(),
        sensors: data.sequence.dim(),
        boundaries: out.segmentation.boundaries().to_vec(),
        region_ids: out.map.region_ids.as_ref().map(|ids| ids.iter().map(|r| r + 1).collect()),
        route: RouteRecord::from_match(route),
        clusters,
        config,
    };
    write_json(&dir.join(RADIOMAP), &file)?;

    let truth = match &data.truth {
        Some(t) => Some(Segmentation::new(t.boundaries.clone(), t.samples)?),
        None => None,
    };
    write_trace(&dir.join(TRACE), &out.trace, truth.as_ref())?;

    match &out.route {
        Ok(r) => {
            println!(
                "built {} clusters in {} iterations; route cost {}",
                out.segmentation.k(),
                out.trace.rows.len(),
                sig9(r.cost)
            );
            if r.reversal_ambiguous {
                eprintln!("warning: the reversed route is eligible and ties on cost");
            }
            Ok(EXIT_OK)
        }
        Err(Error::NoFeasibleRoute) => {
            eprintln!(
                "error: no eligible route through the region graph; wrote {} with region_ids null",
                dir.join(RADIOMAP).display()
            );
            Ok(EXIT_INFEASIBLE)
        }
        Err(e) => Err(e.clone().into()),
    }
}

/// Cost-versus-iteration table; the `e_eps` column appears when truth is known.
fn write_trace(
    path: &std::path::Path,
    trace: &radiomap_core::segment::SegmentationTrace,
    truth: Option<&Segmentation>,
) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::io(path, e))?;
    let mut header = vec!["iteration", "cost", "merge", "split", "boundaries"];
    if truth.is_some() {
        header.push("e_eps");
    }
    w.write_record(&header).map_err(|e| CliError::io(path, e))?;
    for row in &trace.rows {
        let (merge, split) = row.chosen.map_or((String::new(), String::new()), |(m, s)| (m.to_string(), s.to_string()));
        let tau = row.tau.iter().map(usize::to_string).collect::<Vec<_>>().join(" ");
        let mut rec = vec![row.iteration.to_string(), sig9(row.cost), merge, split, tau];
        if let Some(t) = truth {
            let seg = Segmentation::new(row.tau.clone(), t.n())?;
            rec.push(sig9(epsilon_error(&seg, t, TRACE_EPSILON)?));
        }
        w.write_record(&rec).map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}
