use std::path::PathBuf;

use flowplex_core::io::{read_topology, write_pdb};
use flowplex_core::prior::{sample_prior, PriorParams};
use serde::Serialize;

use crate::args::PriorArgs;
use crate::{required, CliError, CliResult, RunContext};

#[derive(Serialize)]
struct Effective {
    topology: PathBuf,
    output: PathBuf,
    params: PriorParams,
    sphere_r_used: f64,
}

pub fn run(a: PriorArgs, ctx: &RunContext) -> CliResult<()> {
    let d = PriorParams::default();
    let params = PriorParams {
        dt: a.dt.unwrap_or(d.dt),
        steps: a.steps.unwrap_or(d.steps),
        sphere_r: a.sphere_r,
        noise_scale: a.noise_scale.unwrap_or(d.noise_scale),
        seed: ctx.seed,
        ..d
    };
    params.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let topology = required(a.topology, "topology")?;
    let system = read_topology(&topology)?;
    let eff = Effective {
        output: ctx.output(a.output.unwrap_or_else(|| "prior.pdb".into())),
        sphere_r_used: params.sphere_radius(&system),
        topology,
        params,
    };
    ctx.write_echo("prior", &eff)?;
    let x = sample_prior(&system, &eff.params)?;
    write_pdb(&system, &x, &eff.output)?;
    log::info!("wrote {}", eff.output.display());
    Ok(())
}
