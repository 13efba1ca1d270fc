use radiomap_core::theory::{theory_checks, TheoryParams, TheoryReport};
use serde::Serialize;

use super::print_json;
use crate::error::{CliResult, EXIT_CHECK_FAILED, EXIT_OK};
use crate::formats::{config_hash, sig9, write_json, SCHEMA_VERSION};
use crate::{Context, TheoryArgs};

#[derive(Serialize)]
struct HashedCheck<'a> {
    check: &'a str,
    params: &'a TheoryParams,
}

#[derive(Serialize)]
struct TheoryFile<'a> {
    schema_version: u32,
    config_hash: String,
    #[serde(flatten)]
    report: &'a TheoryReport,
}

pub fn resolve_params(args: &TheoryArgs, ctx: &Context) -> TheoryParams {
    TheoryParams {
        seeds: args.seeds,
        seed: args.seed.or(ctx.seed_override),
        beta: args.beta,
        samples: args.samples,
        sensors: args.sensors,
        regions: args.regions,
        separation: args.separation,
        noise_var: args.noise_var,
    }
}

pub fn run(args: &TheoryArgs, ctx: &Context) -> CliResult<u8> {
    let registry = theory_checks();
    if args.list {
        for name in registry.names() {
            println!("{name:<16} {}", registry.get(name)?.description());
        }
        return Ok(EXIT_OK);
    }
    let name = args.check.as_deref().unwrap_or_default();
    let check = registry.get(name)?;
    let params = resolve_params(args, ctx);
    if ctx.print_config {
        print_json(&params)?;
        return Ok(EXIT_OK);
    }
    let report = check.run(&params)?;
    print_report(&report);
    if let Some(out) = &args.out {
        write_json(
            out,
            &TheoryFile {
                schema_version: SCHEMA_VERSION,
                config_hash: config_hash(&HashedCheck { check: name, params: &params }),
                report: &report,
            },
        )?;
    }
    Ok(if report.pass { EXIT_OK } else { EXIT_CHECK_FAILED })
}

fn print_report(report: &TheoryReport) {
    println!("check: {}", report.check);
    let params: Vec<String> = report.params.iter().map(|(k, v)| format!("{k}={}", sig9(*v))).collect();
    println!("params: {}", params.join(" "));
    let width = report.rows.iter().map(|r| r.case.len()).max().unwrap_or(4).max(4);
    println!("{:<width$}  {:>6}  {:>16}  result", "case", "seed", "value");
    for r in &report.rows {
        println!("{:<width$}  {:>6}  {:>16}  {}", r.case, r.seed, sig9(r.value), if r.pass { "pass" } else { "FAIL" });
    }
    for (k, v) in &report.summary {
        println!("{k}: {}", sig9(*v));
    }
    println!("verdict: {}", if report.pass { "PASS" } else { "FAIL" });
}
