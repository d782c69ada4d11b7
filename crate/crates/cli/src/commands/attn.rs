use std::time::Instant;

use flowplex_core::attention::{naive_biased_attention, tiled_biased_attention, BiasedAttentionProblem, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::args::{AttnBenchArgs, AttnMode};
use crate::{CliError, CliResult, RunContext};

/// Refuse naive runs whose logit tensor alone would exceed this.
const NAIVE_LIMIT_BYTES: usize = 4 << 30;

#[derive(Serialize)]
struct Effective {
    n: Vec<usize>,
    mode: AttnMode,
    tile: usize,
    groups: usize,
    dim: usize,
    csv: std::path::PathBuf,
}

#[derive(Serialize)]
struct Row {
    n: usize,
    mode: &'static str,
    groups: usize,
    dim: usize,
    tile: Option<usize>,
    peak_bytes: usize,
    allocations: usize,
    wall_ms: f64,
    /// Tiled output against naive, when both ran.
    max_abs_diff: Option<f32>,
}

fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> CliResult<Tensor> {
    let len = shape.iter().product();
    Ok(Tensor::from_vec(shape, (0..len).map(|_| rng.random_range(-1.0f32..1.0)).collect())?)
}

pub fn run(a: AttnBenchArgs, ctx: &RunContext) -> CliResult<()> {
    let eff = Effective {
        n: a.n.unwrap_or_else(|| vec![32, 64, 128]),
        mode: a.mode.unwrap_or(AttnMode::Both),
        tile: a.tile.unwrap_or(16),
        groups: a.groups.unwrap_or(1),
        dim: a.dim.unwrap_or(8),
        csv: a.csv.unwrap_or_else(|| ctx.output("attn_bench.csv")),
    };
    if eff.n.is_empty() || eff.n.contains(&0) || eff.tile == 0 || eff.groups == 0 || eff.dim == 0 {
        return Err(CliError::Usage("--n, --tile, --groups and --dim must be >= 1".into()));
    }
    let run_naive = eff.mode != AttnMode::Tiled;
    let run_tiled = eff.mode != AttnMode::Naive;
    if run_naive {
        if let Some(&n) = eff.n.iter().find(|&&n| eff.groups * n * n * n * 4 > NAIVE_LIMIT_BYTES) {
            return Err(CliError::Usage(format!("naive attention at N={n} needs more than 4 GiB; use --mode tiled")));
        }
    }
    ctx.write_echo("attn-bench", &eff)?;

    let mut rows = Vec::new();
    for &n in &eff.n {
        let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed ^ n as u64);
        let (g, d) = (eff.groups, eff.dim);
        let p = BiasedAttentionProblem::new(
            random_tensor(&mut rng, &[g, n, n, d])?,
            random_tensor(&mut rng, &[g, n, n, d])?,
            random_tensor(&mut rng, &[g, n, n, d])?,
            random_tensor(&mut rng, &[g, n, n])?,
        )?;
        let naive = run_naive.then(|| {
            let start = Instant::now();
            let out = naive_biased_attention(&p);
            (out, start.elapsed().as_secs_f64() * 1e3)
        });
        if let Some((out, ms)) = &naive {
            rows.push(Row {
                n,
                mode: "naive",
                groups: g,
                dim: d,
                tile: None,
                peak_bytes: out.memory.peak_bytes,
                allocations: out.memory.allocations,
                wall_ms: *ms,
                max_abs_diff: None,
            });
        }
        if run_tiled {
            let start = Instant::now();
            let out = tiled_biased_attention(&p, eff.tile)?;
            let ms = start.elapsed().as_secs_f64() * 1e3;
            rows.push(Row {
                n,
                mode: "tiled",
                groups: g,
                dim: d,
                tile: Some(eff.tile),
                peak_bytes: out.memory.peak_bytes,
                allocations: out.memory.allocations,
                wall_ms: ms,
                max_abs_diff: naive.as_ref().map(|(nv, _)| out.output.max_abs_diff(&nv.output)),
            });
        }
        log::info!("N={n} done");
    }
    flowplex_core::io::write_csv(&eff.csv, &rows)?;
    Ok(())
}
