//! Consolidation of run artifacts in a directory into one summary table.

use std::path::Path;

use anyhow::{bail, Context, Result};
use diamondlab::bounds::BoundReport;

pub struct Summary {
    pub csv: String,
    pub all_pass: bool,
    pub rows: usize,
}

fn is_channel_data(name: &str) -> bool {
    name == "ensemble.json"
        || name == "embedding.json"
        || name.ends_with(".manifest.json")
        || name == "run-config.toml"
}

/// Reads every report file in the directory (certification, moments,
/// weingarten, protocol CSVs and bound JSONs), producing one row per
/// recorded quantity. Channel data files are skipped; undecodable report
/// files are an error naming the offender.
pub fn summarize(dir: &Path) -> Result<Summary> {
    let mut names: Vec<String> = Vec::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let entry = entry?;
        if entry.file_type()?.is_file() {
            names.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    names.sort();

    let mut out = String::from("file,quantity,verdict,seed,formula\n");
    let mut rows = 0usize;
    let mut all_pass = true;
    for name in &names {
        if name == "summary.csv" || is_channel_data(name) {
            continue;
        }
        let path = dir.join(name);
        if name.ends_with(".csv") {
            let text = std::fs::read_to_string(&path)
                .with_context(|| format!("reading {}", path.display()))?;
            let (file_rows, file_pass) = summarize_csv(name, &text)
                .with_context(|| format!("decoding report {}", path.display()))?;
            for row in file_rows {
                out.push_str(&row);
                out.push('\n');
                rows += 1;
            }
            all_pass &= file_pass;
        } else if name.ends_with(".json") {
            let text = std::fs::read_to_string(&path)
                .with_context(|| format!("reading {}", path.display()))?;
            let value: serde_json::Value = serde_json::from_str(&text)
                .with_context(|| format!("corrupt JSON in {}", path.display()))?;
            if let Ok(report) = serde_json::from_value::<BoundReport>(value.clone()) {
                for (label, n) in [
                    ("n_general", report.n_general),
                    ("n_main_equal", report.n_main_equal),
                    ("n_main_tilted", report.n_main_tilted),
                    ("n_packing", report.n_packing),
                ] {
                    if let Some(n) = n {
                        out.push_str(&format!("{name},{label}={n},-,-,query-count lower bound\n"));
                        rows += 1;
                    }
                }
            }
            // Other valid JSON (matrix files and similar) is channel data.
        }
    }
    out.push_str(&format!(
        "overall,-,{},-,-\n",
        if all_pass { "PASS" } else { "FAIL" }
    ));
    Ok(Summary { csv: out, all_pass, rows })
}

fn summarize_csv(name: &str, text: &str) -> Result<(Vec<String>, bool)> {
    let mut seed_hint = String::from("-");
    let mut lines = text.lines().peekable();
    while let Some(line) = lines.peek() {
        if line.starts_with('#') {
            if let Some(pos) = line.find("seed=") {
                seed_hint = line[pos + 5..]
                    .split_whitespace()
                    .next()
                    .unwrap_or("-")
                    .to_string();
            }
            lines.next();
        } else {
            break;
        }
    }
    let header = match lines.next() {
        Some(h) => h,
        None => return Ok((Vec::new(), true)),
    };
    let columns: Vec<&str> = header.split(',').collect();

    // Protocol traces carry no verdict column; the envelope check is the
    // bound column itself.
    if columns == ["step", "gap", "bound"] {
        let mut max_gap = 0.0f64;
        let mut bound = 0.0f64;
        let mut count = 0;
        for line in lines {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                bail!("malformed protocol row '{line}' in {name}");
            }
            max_gap = max_gap.max(fields[1].parse::<f64>()?);
            bound = fields[2].parse::<f64>()?;
            count += 1;
        }
        let pass = max_gap <= bound + 1e-9;
        let verdict = if pass { "PASS" } else { "FAIL" };
        let row = format!(
            "{name},protocol_gap_max_over_{count}_steps,{verdict},{seed_hint},gap <= 2 eta"
        );
        return Ok((vec![row], pass));
    }

    let verdict_col = columns.iter().position(|c| *c == "verdict");
    let quantity_col = columns
        .iter()
        .position(|c| *c == "quantity" || *c == "case" || *c == "pair")
        .unwrap_or(0);
    let seed_col = columns.iter().position(|c| *c == "seed");
    let formula_col = columns.iter().position(|c| *c == "formula");
    let Some(verdict_col) = verdict_col else {
        bail!("report {name} has no verdict column");
    };

    let mut rows = Vec::new();
    let mut pass = true;
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() <= verdict_col {
            bail!("malformed row '{line}' in {name}");
        }
        let verdict = fields[verdict_col];
        if verdict != "PASS" && verdict != "FAIL" {
            bail!("unknown verdict '{verdict}' in {name}");
        }
        pass &= verdict == "PASS";
        let quantity = fields.get(quantity_col).copied().unwrap_or("-");
        let seed = seed_col
            .and_then(|c| fields.get(c).copied())
            .unwrap_or(&seed_hint);
        // The formula is the last column; rejoin in case it contains commas.
        let formula = formula_col
            .filter(|&c| c + 1 == columns.len() && fields.len() > c)
            .map(|c| fields[c..].join(","))
            .unwrap_or_else(|| "-".into());
        rows.push(format!("{name},{quantity},{verdict},{seed},{formula}"));
    }
    Ok((rows, pass))
}
