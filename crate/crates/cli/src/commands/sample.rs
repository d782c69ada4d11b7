use std::path::PathBuf;

use flowplex_core::confidence::{
    load_confidence_head, rank_samples, Candidate, ConfidenceConfig, ConfidenceHead, RankedSample, RankingSubject,
};
use flowplex_core::flow::{load_checkpoint, sample_structure, FlowConfig, ToyDenoiser, ToyDenoiserConfig};
use flowplex_core::io::{read_topology, write_pdb};
use flowplex_core::topology::select_anchors;
use flowplex_core::{MolecularSystem, MoleculeClass};
use rayon::prelude::*;
use serde::Serialize;

use crate::args::SampleArgs;
use crate::{required, CliError, CliResult, RunContext};

#[derive(Serialize)]
struct Effective {
    topology: PathBuf,
    replicas: usize,
    replica_seeds: Vec<u64>,
    model: Option<PathBuf>,
    confidence: Option<PathBuf>,
    rank: String,
    anchors: usize,
    flow: FlowConfig,
    denoiser: ToyDenoiserConfig,
    confidence_head: ConfidenceConfig,
}

#[derive(Serialize)]
struct SampleReport {
    index: usize,
    seed: u64,
    file: Option<String>,
    mean_plddt: f64,
    plddt: Vec<f64>,
    anchors: Vec<usize>,
    /// Row-major predicted distance errors between anchors, Å.
    pde: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct Report {
    subject: String,
    top: usize,
    ranking: Vec<RankedSample>,
    samples: Vec<SampleReport>,
}

fn default_subject(system: &MolecularSystem) -> String {
    match system.chains().iter().find(|c| c.class == MoleculeClass::Ligand) {
        Some(c) => format!("ligand:{}", c.id),
        None => format!("chain:{}", system.chains()[0].id),
    }
}

pub fn run(a: SampleArgs, ctx: &RunContext) -> CliResult<()> {
    let topology = required(a.topology, "topology")?;
    let replicas = a.replicas.unwrap_or(1);
    if replicas == 0 {
        return Err(CliError::Usage("--replicas must be >= 1".into()));
    }
    let system = read_topology(&topology)?;
    let rank = a.rank.unwrap_or_else(|| default_subject(&system));
    let subject: RankingSubject = rank.parse().map_err(|e| CliError::Usage(format!("--rank: {e}")))?;
    match &subject {
        RankingSubject::Ligand(a) | RankingSubject::Chain(a) => super::chain_index(&system, a).map(drop)?,
        RankingSubject::ChainPair(a, b) => {
            super::chain_index(&system, a)?;
            super::chain_index(&system, b)?;
        }
    }

    let model = match &a.model {
        Some(p) => load_checkpoint(p)?.0,
        None => {
            log::warn!("no --model given; sampling with an untrained denoiser");
            ToyDenoiser::new(ToyDenoiserConfig { init_seed: ctx.seed, ..Default::default() })
        }
    };
    let head = match &a.confidence {
        Some(p) => load_confidence_head(p)?.0,
        None => {
            log::warn!("no --confidence given; confidence values come from an untrained head");
            ConfidenceHead::for_system(ConfidenceConfig { init_seed: ctx.seed, ..Default::default() }, &system)
        }
    };
    let flow = FlowConfig {
        steps: a.steps.unwrap_or(40),
        shift_exponent: a.shift_exponent.unwrap_or(flowplex_core::flow::DEFAULT_SHIFT_EXPONENT),
        seed: ctx.seed,
        ..Default::default()
    };
    flow.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let eff = Effective {
        topology,
        replicas,
        replica_seeds: (0..replicas as u64).map(|r| ctx.seed.wrapping_add(r)).collect(),
        model: a.model,
        confidence: a.confidence,
        rank,
        anchors: a.anchors.unwrap_or(32),
        flow,
        denoiser: model.config.clone(),
        confidence_head: head.config.clone(),
    };
    ctx.write_echo("sample", &eff)?;

    let anchors = select_anchors(&system, eff.anchors, ctx.seed)?.indices;
    let candidates = eff
        .replica_seeds
        .par_iter()
        .map(|&seed| {
            let out = sample_structure(&model, &system, &FlowConfig { seed, ..eff.flow.clone() })?;
            let confidence = head.predict(&system, &out.conformation, &anchors);
            Ok(Candidate { conformation: out.conformation, confidence })
        })
        .collect::<flowplex_core::Result<Vec<_>>>()?;
    let ranking = rank_samples(&candidates, &system, &subject)?;
    let top = ranking[0].index;
    write_pdb(&system, &candidates[top].conformation, &ctx.output("pred.pdb"))?;

    let mut samples = Vec::with_capacity(replicas);
    for (k, c) in candidates.iter().enumerate() {
        let file = if replicas > 1 {
            let name = format!("sample_{k}.pdb");
            write_pdb(&system, &c.conformation, &ctx.output(&name))?;
            Some(name)
        } else {
            None
        };
        let plddt = c.confidence.plddt();
        let na = c.confidence.anchors.len();
        samples.push(SampleReport {
            index: k,
            seed: eff.replica_seeds[k],
            file,
            mean_plddt: plddt.iter().sum::<f64>() / plddt.len() as f64,
            plddt,
            anchors: c.confidence.anchors.clone(),
            pde: (0..na).map(|i| (0..na).map(|j| c.confidence.pde_pair(i, j)).collect()).collect(),
        });
    }
    let report = Report { subject: eff.rank.clone(), top, ranking, samples };
    flowplex_core::io::write_json(&ctx.output("confidence.json"), &report)?;
    log::info!("top sample {top} written to pred.pdb");
    Ok(())
}
