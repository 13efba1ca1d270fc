use radiomap_core::localize::score_regions;
use radiomap_core::{Provenance, RadioMap};

use crate::error::{CliError, CliResult, EXIT_DATA_QUALITY, EXIT_OK};
use crate::formats::{read_json, read_rss_csv, sig9, RadioMapFile};
use crate::{Context, LocalizeArgs};

/// Number of ranked regions listed per query.
pub const TOP: usize = 3;

/// Loads a radio map file into the library type (0-based region ids).
pub fn load_map(path: &std::path::Path) -> CliResult<(RadioMapFile, RadioMap)> {
    let file: RadioMapFile = read_json(path)?;
    let model = file.model().map_err(|e| e.context(path.display()))?;
    let ids = file.region_ids0()?;
    let map = RadioMap::new(model, ids, Provenance { config_hash: file.config_hash.clone(), seed: file.seed })?;
    Ok((file, map))
}

pub fn run(args: &LocalizeArgs, ctx: &Context) -> CliResult<u8> {
    if ctx.print_config {
        println!("{{}}");
        return Ok(EXIT_OK);
    }
    let (_, map) = load_map(&args.map)?;
    let (d, rows) = read_rss_csv(&args.queries)?;
    let sensors = map.model.sensors();
    if d != 0 && d != sensors {
        return Err(CliError::input(format!(
            "{}: {d} sensor columns, but the radio map has {sensors}",
            args.queries.display()
        )));
    }

    let path = &args.out;
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::io(path, e))?;
    let mut header = vec!["q".to_string(), "region".into()];
    for i in 1..=TOP {
        header.push(format!("top{i}"));
        header.push(format!("ll{i}"));
    }
    header.push("flag".into());
    w.write_record(&header).map_err(|e| CliError::io(path, e))?;

    let mut flagged = 0usize;
    for (q, x) in rows.iter().enumerate() {
        let mut rec = vec![(q + 1).to_string()];
        if x.iter().any(|v| !v.is_finite()) {
            flagged += 1;
            rec.extend(std::iter::repeat_n(String::new(), 1 + 2 * TOP));
            rec.push("non_finite".into());
        } else {
            let mut scores = score_regions(x, &map)?;
            // Highest likelihood first; the stable sort keeps lower ids first on ties.
            scores.sort_by(|a, b| b.1.total_cmp(&a.1));
            rec.push((scores[0].0 + 1).to_string());
            for i in 0..TOP {
                match scores.get(i) {
                    Some(&(r, ll)) => {
                        rec.push((r + 1).to_string());
                        rec.push(sig9(ll));
                    }
                    None => rec.extend([String::new(), String::new()]),
                }
            }
            rec.push(String::new());
        }
        w.write_record(&rec).map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))?;

    if flagged > 0 {
        eprintln!(
            "error: {flagged} of {} queries contain non-finite values (flagged in {})",
            rows.len(),
            path.display()
        );
        return Ok(EXIT_DATA_QUALITY);
    }
    println!("localized {} queries", rows.len());
    Ok(EXIT_OK)
}
