use std::collections::BTreeMap;
use std::path::PathBuf;

use flowplex_core::confidence::{interface_pairs, load_confidence_head, pdockq, INTERFACE_CUTOFF};
use flowplex_core::geometry::{aligned_rmsd, fape, lddt, pocket_aligned_ligand_rmsd, FapeOptions, LddtOptions};
use flowplex_core::io::{read_pdb, read_topology};
use flowplex_core::symmetry::SymmetryIndex;
use flowplex_core::topology::select_anchors;
use flowplex_core::{AnchorSet, Error};
use serde::Serialize;

use super::{chain_index, write_table};
use crate::args::{Metric, ScoreArgs};
use crate::{required, CliError, CliResult, RunContext};

#[derive(Serialize)]
struct Effective {
    pred: PathBuf,
    reference: PathBuf,
    topology: PathBuf,
    metrics: Vec<Metric>,
    ligand: Option<String>,
    confidence: Option<PathBuf>,
    csv: Option<PathBuf>,
    anchors: usize,
    lddt: LddtOptions,
    fape: FapeOptions,
}

fn metric_name(m: Metric) -> &'static str {
    match m {
        Metric::Lddt => "lddt",
        Metric::Rmsd => "rmsd",
        Metric::SymRmsd => "sym-rmsd",
        Metric::PocketRmsd => "pocket-rmsd",
        Metric::Fape => "fape",
    }
}

pub fn run(a: ScoreArgs, ctx: &RunContext) -> CliResult<()> {
    let metrics = a.metrics.unwrap_or_else(|| {
        let mut m = vec![Metric::Lddt, Metric::Rmsd, Metric::SymRmsd, Metric::Fape];
        if a.ligand.is_some() {
            m.push(Metric::PocketRmsd);
        }
        m
    });
    if metrics.contains(&Metric::PocketRmsd) && a.ligand.is_none() {
        return Err(CliError::Usage("pocket-rmsd needs --ligand".into()));
    }
    let eff = Effective {
        pred: required(a.pred, "pred")?,
        reference: required(a.reference, "ref")?,
        topology: required(a.topology, "topology")?,
        metrics,
        ligand: a.ligand,
        confidence: a.confidence,
        csv: a.csv,
        anchors: a.anchors.unwrap_or(32),
        lddt: LddtOptions::default(),
        fape: FapeOptions::default(),
    };
    ctx.write_echo("score", &eff)?;
    let system = read_topology(&eff.topology)?;
    let pred = read_pdb(&eff.pred, &system)?;
    let reference = read_pdb(&eff.reference, &system)?;

    let mut values: BTreeMap<String, f64> = BTreeMap::new();
    for &m in &eff.metrics {
        let v = match m {
            Metric::Lddt => lddt(&pred, &reference, &system, &eff.lddt)?,
            Metric::Rmsd => aligned_rmsd(&pred, &reference)?,
            Metric::SymRmsd => SymmetryIndex::new(&system).aligned_rmsd(&pred, &reference)?,
            Metric::Fape => fape(&pred, &reference, &system, &AnchorSet::all(&system), &eff.fape)?,
            Metric::PocketRmsd => {
                let lig = chain_index(&system, eff.ligand.as_deref().unwrap_or_default())?;
                pocket_aligned_ligand_rmsd(&pred, &reference, &system, lig, None)?
            }
        };
        values.insert(metric_name(m).into(), v);
    }

    if let Some(path) = &eff.confidence {
        let (head, _) = load_confidence_head(path)?;
        let anchors = select_anchors(&system, eff.anchors, ctx.seed)?.indices;
        let out = head.predict(&system, &pred, &anchors);
        let plddt = out.plddt();
        values.insert("plddt_mean".into(), plddt.iter().sum::<f64>() / plddt.len() as f64);
        let na = anchors.len();
        if na > 1 {
            let total: f64 = (0..na)
                .flat_map(|i| (0..na).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| out.pde_pair(i, j))
                .sum();
            values.insert("pde_mean".into(), total / (na * (na - 1)) as f64);
        }
        let chains = system.chains();
        for ca in 0..chains.len() {
            for cb in ca + 1..chains.len() {
                let pairs = interface_pairs(&anchors, &pred, &system, ca, cb, INTERFACE_CUTOFF);
                let pde: Vec<f64> = pairs.iter().map(|&(p, q)| out.pde_pair(p, q)).collect();
                match pdockq(&pde) {
                    Ok(v) => {
                        values.insert(format!("pdockq_{}_{}", chains[ca].id, chains[cb].id), v);
                    }
                    Err(Error::NoInterface) => {}
                    Err(e) => return Err(e.into()),
                }
            }
        }
    }

    flowplex_core::io::write_json(&ctx.output("score.json"), &values)?;
    if let Some(csv) = &eff.csv {
        let header: Vec<String> = values.keys().cloned().collect();
        let row: Vec<String> = values.values().map(|v| v.to_string()).collect();
        write_table(csv, &header, &[row])?;
    }
    Ok(())
}
