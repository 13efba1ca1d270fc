use std::fs;

use radiomap_core::synth::{generate, SynthSpec};

use super::print_json;
use crate::error::{CliError, CliResult, EXIT_OK};
use crate::formats::{
    config_hash, read_json, write_json, write_rss_csv, GraphFile, RegionEntry, RegionsFile, SensorsFile, SpecFile,
    TruthFile, GRAPH, MEASUREMENTS, QUERIES, REGIONS, SCHEMA_VERSION, SENSORS, SPEC, TRUTH,
};
use crate::{Context, GenerateArgs};

/// Reads the spec and applies the seed override.
pub fn resolve_spec(args: &GenerateArgs, ctx: &Context) -> CliResult<SynthSpec> {
    let mut spec: SynthSpec = read_json(&args.spec)?;
    if let Some(seed) = ctx.seed_override {
        spec.seed = seed;
    }
    spec.validate().map_err(|e| CliError::from(e).context(args.spec.display()))?;
    Ok(spec)
}

pub fn run(args: &GenerateArgs, ctx: &Context) -> CliResult<u8> {
    let spec = resolve_spec(args, ctx)?;
    if ctx.print_config {
        print_json(&spec)?;
        return Ok(EXIT_OK);
    }
    let bundle = generate(&spec).map_err(|e| CliError::from(e).context(args.spec.display()))?;
    let hash = config_hash(&spec);
    let out = &args.out;
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;

    let d = bundle.sequence.dim();
    write_rss_csv(&out.join(MEASUREMENTS), d, bundle.sequence.rows())?;
    if !bundle.queries.is_empty() {
        write_rss_csv(&out.join(QUERIES), d, bundle.queries.iter().map(Vec::as_slice))?;
    }
    write_json(
        &out.join(SENSORS),
        &SensorsFile {
            schema_version: SCHEMA_VERSION,
            config_hash: hash.clone(),
            sensors: bundle.layout.positions.clone(),
        },
    )?;
    write_json(
        &out.join(REGIONS),
        &RegionsFile {
            schema_version: SCHEMA_VERSION,
            config_hash: hash.clone(),
            regions: bundle
                .graph
                .centers()
                .iter()
                .enumerate()
                .map(|(k, &center)| RegionEntry { id: k + 1, center })
                .collect(),
        },
    )?;
    write_json(&out.join(GRAPH), &GraphFile::from_graph(&bundle.graph, &hash))?;
    let one_based = |v: &[usize]| v.iter().map(|r| r + 1).collect::<Vec<_>>();
    write_json(
        &out.join(TRUTH),
        &TruthFile {
            schema_version: SCHEMA_VERSION,
            config_hash: hash.clone(),
            samples: bundle.truth.n(),
            boundaries: bundle.truth.boundaries().to_vec(),
            labels: one_based(&bundle.truth.labels()),
            route: one_based(&bundle.route),
            query_regions: one_based(&bundle.query_regions),
            features: TruthFile::model_features(&bundle.model)?,
        },
    )?;
    write_json(&out.join(SPEC), &SpecFile { schema_version: SCHEMA_VERSION, config_hash: hash, spec })?;
    println!(
        "generated {} samples x {} sensors over {} regions ({} graph edges) in {}",
        bundle.sequence.len(),
        d,
        bundle.graph.k(),
        bundle.graph.edge_count(),
        out.display()
    );
    Ok(EXIT_OK)
}
