use std::path::PathBuf;

use flowplex_core::confbench::{confbench_score, win_rate, ConfBenchScore, ConformationLabel, ScoreLevel};
use flowplex_core::io::read_manifest;
use rayon::prelude::*;
use serde::Serialize;

use super::write_table;
use crate::args::ConfbenchArgs;
use crate::{required, CliError, CliResult, RunContext};

pub const THRESHOLDS: [f64; 2] = [0.0, 0.5];

#[derive(Serialize)]
struct Effective {
    manifest: PathBuf,
    thresholds: [f64; 2],
    levels: [ScoreLevel; 3],
}

#[derive(Serialize)]
struct LinkageResult {
    id: String,
    label: ConformationLabel,
    #[serde(skip_serializing_if = "Option::is_none")]
    score: Option<ConfBenchScore>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Serialize)]
struct WinRate {
    level: ScoreLevel,
    threshold: f64,
    linkages: usize,
    win_rate: f64,
}

fn level_name(l: ScoreLevel) -> &'static str {
    match l {
        ScoreLevel::Global => "global",
        ScoreLevel::Pocket => "pocket",
        ScoreLevel::PocketSidechain => "pocket_sidechain",
    }
}

pub fn run(a: ConfbenchArgs, ctx: &RunContext) -> CliResult<()> {
    let eff = Effective {
        manifest: required(a.manifest, "manifest")?,
        thresholds: THRESHOLDS,
        levels: ScoreLevel::ALL,
    };
    ctx.write_echo("confbench", &eff)?;
    let (manifest, base) = read_manifest(&eff.manifest)?;
    if manifest.linkages.is_empty() {
        return Err(CliError::Input("manifest lists no linkages".into()));
    }
    let outcomes: Vec<flowplex_core::Result<ConfBenchScore>> = manifest
        .linkages
        .par_iter()
        .map(|e| confbench_score(&e.load(&base)?))
        .collect();

    let mut results = Vec::new();
    let mut scores = Vec::new();
    let mut first_error = None;
    for (e, o) in manifest.linkages.iter().zip(outcomes) {
        match o {
            Ok(s) => {
                scores.push(s);
                results.push(LinkageResult { id: e.id.clone(), label: e.label, score: Some(s), error: None });
            }
            Err(err) => {
                log::warn!("linkage {}: {err}", e.id);
                results.push(LinkageResult { id: e.id.clone(), label: e.label, score: None, error: Some(err.to_string()) });
                first_error.get_or_insert(err);
            }
        }
    }
    if scores.is_empty() {
        return Err(first_error.expect("at least one linkage").into());
    }
    let mut rates = Vec::new();
    for level in ScoreLevel::ALL {
        for threshold in THRESHOLDS {
            rates.push(WinRate { level, threshold, linkages: scores.len(), win_rate: win_rate(&scores, level, threshold)? });
        }
    }
    flowplex_core::io::write_json(
        &ctx.output("confbench.json"),
        &serde_json::json!({ "linkages": results, "win_rates": rates }),
    )?;
    flowplex_core::io::write_csv(&ctx.output("confbench_summary.csv"), &rates)?;
    let header: Vec<String> = ["id", "label", "global", "pocket", "pocket_sidechain", "error"].map(String::from).to_vec();
    let rows: Vec<Vec<String>> = results
        .iter()
        .map(|r| {
            let mut row = vec![r.id.clone(), format!("{:?}", r.label).to_lowercase()];
            for l in ScoreLevel::ALL {
                row.push(r.score.map(|s| s.level(l).score.to_string()).unwrap_or_default());
            }
            row.push(r.error.clone().unwrap_or_default());
            row
        })
        .collect();
    write_table(&ctx.output("confbench.csv"), &header, &rows)?;
    log::info!(
        "{} of {} linkages scored; {} global win rate {:.3}",
        scores.len(),
        results.len(),
        level_name(ScoreLevel::Global),
        rates[0].win_rate
    );
    Ok(())
}
