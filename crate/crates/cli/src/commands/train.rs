use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use flowplex_core::confidence::{
    confidence_train_loop, save_confidence_head, ConfidenceConfig, ConfidenceHead, ConfidenceTrainConfig,
};
use flowplex_core::flow::{
    sample_structure, save_checkpoint, toy, train_round_robin, Adam, AdamConfig, FlowConfig, ToyDenoiser,
    ToyDenoiserConfig, TrainConfig, TrainingExample,
};
use flowplex_core::io::StructureRecord;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::args::TrainToyArgs;
use crate::{CliError, CliResult, RunContext};

#[derive(Serialize)]
struct Effective {
    data: Option<PathBuf>,
    systems: Vec<String>,
    steps: usize,
    model: ToyDenoiserConfig,
    train: TrainConfig,
    adam: AdamConfig,
    confidence: Option<ConfidenceTrainConfig>,
    confidence_head: Option<ConfidenceConfig>,
    evaluation_flow: FlowConfig,
}

#[derive(Serialize)]
struct LossRow {
    step: usize,
    system: String,
    t: f64,
    weight: f64,
    pseudo_huber: f64,
    smooth_lddt: Option<f64>,
    fape: Option<f64>,
    total: f64,
    grad_norm: f64,
}

#[derive(Serialize)]
struct ConfidenceRow {
    iteration: usize,
    plddt: f64,
    pde: f64,
    total: f64,
    rollout_total: Option<f64>,
}

#[derive(Serialize)]
struct SystemSummary {
    name: String,
    atoms: usize,
    /// Symmetry-corrected aligned RMSD of one T = 40 sample, Å.
    sample_rmsd: f64,
}

/// `<name>.json` topologies with a `<name>.pdb` beside them, sorted by name.
fn load_dir(dir: &Path) -> CliResult<Vec<(String, TrainingExample)>> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::Input(format!("cannot read {}: {e}", dir.display())))?;
    let mut tops: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    tops.sort();
    let mut out = Vec::new();
    for t in tops {
        let pdb = t.with_extension("pdb");
        if !pdb.exists() {
            log::warn!("skipping {}: no matching .pdb", t.display());
            continue;
        }
        let rec = StructureRecord::load(&t, &pdb)?;
        let name = t.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        out.push((name, TrainingExample::new(rec.system, rec.coords.coords)?));
    }
    if out.is_empty() {
        return Err(CliError::Input(format!("no topology/PDB pairs in {}", dir.display())));
    }
    Ok(out)
}

pub fn run(a: TrainToyArgs, ctx: &RunContext) -> CliResult<()> {
    let named: Vec<(String, TrainingExample)> = match &a.data {
        Some(dir) => load_dir(dir)?,
        None => toy::training_set()
            .into_iter()
            .map(|(n, s, x)| Ok((n, TrainingExample::new(s, x)?)))
            .collect::<flowplex_core::Result<_>>()?,
    };
    let (names, examples): (Vec<String>, Vec<TrainingExample>) = named.into_iter().unzip();
    let steps = a.steps.unwrap_or(3000);
    let d_model = a.d_model.unwrap_or(64);
    let model_cfg = ToyDenoiserConfig {
        d_model,
        n_heads: a.heads.unwrap_or(4),
        n_blocks: a.blocks.unwrap_or(4),
        mlp_hidden: 2 * d_model,
        init_seed: ctx.seed,
        ..Default::default()
    };
    if model_cfg.n_heads == 0 || d_model % model_cfg.n_heads != 0 {
        return Err(CliError::Usage("--d-model must be a positive multiple of --heads".into()));
    }
    let train = TrainConfig { replicas: a.replicas.unwrap_or(1), ..Default::default() };
    train.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let adam = AdamConfig {
        lr: a.lr.unwrap_or(1e-3),
        warmup_steps: a.warmup.unwrap_or(100),
        decay_steps: Some(steps),
        ..Default::default()
    };
    let conf_iters = a.confidence_iterations.unwrap_or(0);
    let confidence = (conf_iters > 0).then(|| ConfidenceTrainConfig { iterations: conf_iters, ..Default::default() });
    let eff = Effective {
        data: a.data,
        systems: names.clone(),
        steps,
        model: model_cfg,
        train,
        adam,
        confidence_head: confidence.as_ref().map(|_| ConfidenceConfig { init_seed: ctx.seed, ..Default::default() }),
        confidence,
        evaluation_flow: FlowConfig { steps: 40, seed: ctx.seed, ..Default::default() },
    };
    ctx.write_echo("train-toy", &eff)?;
    let echo = serde_json::to_value(&eff).map_err(|e| CliError::Input(e.to_string()))?;

    let mut model = ToyDenoiser::new(eff.model.clone());
    let mut opt = Adam::new(eff.adam.clone(), &model);
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let mut rows = Vec::with_capacity(steps);
    let start = Instant::now();
    train_round_robin(&mut model, &mut opt, &examples, &eff.train, steps, &mut rng, |k, r| {
        rows.push(LossRow {
            step: r.step,
            system: names[k].clone(),
            t: r.loss.t,
            weight: r.loss.weight,
            pseudo_huber: r.loss.pseudo_huber,
            smooth_lddt: r.loss.smooth_lddt,
            fape: r.loss.fape,
            total: r.loss.total,
            grad_norm: r.grad_norm,
        });
        if r.step % 500 == 0 {
            log::info!("step {} loss {:.4}", r.step, r.loss.total);
        }
    })?;
    let seconds = start.elapsed().as_secs_f64();
    flowplex_core::io::write_csv(&ctx.output("loss.csv"), &rows)?;
    save_checkpoint(&ctx.output("model.ckpt"), &model, &echo)?;

    if let (Some(cfg), Some(head_cfg)) = (&eff.confidence, &eff.confidence_head) {
        let mut head = ConfidenceHead::for_system(head_cfg.clone(), &examples[0].system);
        let mut head_opt = Adam::for_params(cfg.adam.clone(), head.params());
        let reports = confidence_train_loop(&mut model, None, &mut head, &mut head_opt, &examples, cfg, &mut rng)?;
        let rows: Vec<ConfidenceRow> = reports
            .iter()
            .map(|r| ConfidenceRow {
                iteration: r.iteration,
                plddt: r.one_step.plddt,
                pde: r.one_step.pde,
                total: r.one_step.total,
                rollout_total: r.rollout.map(|v| v.total),
            })
            .collect();
        flowplex_core::io::write_csv(&ctx.output("confidence_loss.csv"), &rows)?;
        save_confidence_head(&ctx.output("confidence.ckpt"), &head, &echo)?;
    }

    let mut systems = Vec::new();
    for (name, ex) in names.iter().zip(&examples) {
        let out = sample_structure(&model, &ex.system, &eff.evaluation_flow)?;
        systems.push(SystemSummary {
            name: name.clone(),
            atoms: ex.system.n_atoms(),
            sample_rmsd: ex.symmetry.aligned_rmsd(&out.conformation, &ex.reference)?,
        });
    }
    let summary = serde_json::json!({
        "steps": steps,
        "train_seconds": seconds,
        "final_loss": rows.last().map(|r| r.total),
        "systems": systems,
    });
    flowplex_core::io::write_json(&ctx.output("train_summary.json"), &summary)?;
    Ok(())
}
