use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use flowplex_core::confbench::{confbench_score, ConformationLabel};
use flowplex_core::flow::{sample_structure, FlowConfig, ToyDenoiser, ToyDenoiserConfig};
use flowplex_core::io::{read_pdb, read_topology, write_pdb, write_topology, LinkageEntry, LinkageManifest, StructurePaths};
use flowplex_core::prior::{sample_prior, PriorParams};
use flowplex_core::{flow::toy, MolecularSystem, Vec3};
use serde_json::Value;

fn examples() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/examples")
}

fn flowplex(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flowplex")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = flowplex(args);
    assert!(out.status.success(), "{args:?} failed:\n{}", String::from_utf8_lossy(&out.stderr));
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn max_dev(a: &[Vec3], b: &[Vec3]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).amax()).fold(0.0, f64::max)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn sample_writes_prediction_and_confidence() {
    let dir = tempfile::tempdir().unwrap();
    let topo = examples().join("toy/complex.json");
    ok(&["sample", "--topology", s(&topo), "--steps", "40", "--seed", "7", "--out-dir", s(dir.path())]);

    let report = read_json(&dir.path().join("confidence.json"));
    assert_eq!(report["subject"], "ligand:L");
    assert_eq!(report["samples"][0]["seed"], 7);
    let plddt = report["samples"][0]["plddt"].as_array().unwrap();
    assert_eq!(plddt.len(), 31);
    assert!(plddt.iter().all(|v| (0.0..=1.0).contains(&v.as_f64().unwrap())));

    // Same numbers as calling the library directly.
    let system = read_topology(&topo).unwrap();
    let model = ToyDenoiser::new(ToyDenoiserConfig { init_seed: 7, ..Default::default() });
    let flow = FlowConfig { steps: 40, seed: 7, ..Default::default() };
    let direct = sample_structure(&model, &system, &flow).unwrap();
    let written = read_pdb(&dir.path().join("pred.pdb"), &system).unwrap();
    assert!(max_dev(&written, &direct.conformation) < 6e-4);

    let echo = read_json(&dir.path().join("config_echo.json"));
    assert_eq!(echo["command"], "sample");
    assert_eq!(echo["global"]["seed"], 7);
    assert_eq!(echo["effective"]["flow"]["steps"], 40);
}

#[test]
fn replicas_are_ranked_and_written() {
    let dir = tempfile::tempdir().unwrap();
    let topo = examples().join("two_ligands.json");
    ok(&["sample", "--topology", s(&topo), "--steps", "8", "--replicas", "3", "--rank", "pair:A,M", "--out-dir", s(dir.path())]);
    let report = read_json(&dir.path().join("confidence.json"));
    assert_eq!(report["ranking"].as_array().unwrap().len(), 3);
    for k in 0..3 {
        assert!(dir.path().join(format!("sample_{k}.pdb")).exists());
    }
    let top = report["top"].as_u64().unwrap();
    assert_eq!(
        fs::read(dir.path().join("pred.pdb")).unwrap(),
        fs::read(dir.path().join(format!("sample_{top}.pdb"))).unwrap()
    );
}

#[test]
fn prior_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let topo = examples().join("two_ligands.json");
    ok(&["prior", "--topology", s(&topo), "--seed", "3", "--steps", "20", "--out-dir", s(dir.path())]);
    let system = read_topology(&topo).unwrap();
    assert_eq!(system.chains().len(), 3);
    let direct = sample_prior(&system, &PriorParams { seed: 3, steps: 20, ..Default::default() }).unwrap();
    let written = read_pdb(&dir.path().join("prior.pdb"), &system).unwrap();
    assert!(max_dev(&written, &direct) < 6e-4);
}

#[test]
fn train_then_sample_and_score() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let data = examples().join("toy");
    ok(&[
        "train-toy", "--data", s(&data), "--steps", "12", "--d-model", "16", "--heads", "2", "--blocks", "1",
        "--confidence-iterations", "3", "--out-dir", s(&d.join("t")),
    ]);
    let loss = fs::read_to_string(d.join("t/loss.csv")).unwrap();
    assert_eq!(loss.lines().count(), 13);
    assert!(loss.starts_with("step,system,"));
    let summary = read_json(&d.join("t/train_summary.json"));
    assert_eq!(summary["systems"].as_array().unwrap().len(), 3);

    let topo = data.join("complex.json");
    ok(&[
        "sample", "--topology", s(&topo), "--model", s(&d.join("t/model.ckpt")), "--confidence",
        s(&d.join("t/confidence.ckpt")), "--steps", "10", "--out-dir", s(&d.join("s")),
    ]);
    ok(&[
        "score", "--pred", s(&d.join("s/pred.pdb")), "--ref", s(&data.join("complex.pdb")), "--topology", s(&topo),
        "--ligand", "L", "--confidence", s(&d.join("t/confidence.ckpt")), "--csv", s(&d.join("score.csv")),
        "--out-dir", s(&d.join("sc")),
    ]);
    let score = read_json(&d.join("sc/score.json"));
    for key in ["lddt", "rmsd", "sym-rmsd", "fape", "pocket-rmsd", "plddt_mean", "pde_mean"] {
        assert!(score[key].as_f64().unwrap().is_finite(), "{key}");
    }
    assert!(score["sym-rmsd"].as_f64().unwrap() <= score["rmsd"].as_f64().unwrap() + 1e-9);
    let csv = fs::read_to_string(d.join("score.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn score_of_reference_against_itself() {
    let dir = tempfile::tempdir().unwrap();
    let data = examples().join("toy");
    let pdb = data.join("peptide.pdb");
    ok(&[
        "score", "--pred", s(&pdb), "--ref", s(&pdb), "--topology", s(&data.join("peptide.json")), "--metrics",
        "lddt,rmsd", "--out-dir", s(dir.path()),
    ]);
    let score = read_json(&dir.path().join("score.json"));
    assert_eq!(score.as_object().unwrap().len(), 2);
    assert_eq!(score["lddt"], 1.0);
    assert!(score["rmsd"].as_f64().unwrap() < 1e-6);
}

#[test]
fn attn_bench_reports_peak_memory() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["attn-bench", "--n", "64", "--mode", "tiled", "--out-dir", s(dir.path())]);
    let mut r = csv::Reader::from_path(dir.path().join("attn_bench.csv")).unwrap();
    let header = r.headers().unwrap().clone();
    let col = header.iter().position(|h| h == "peak_bytes").expect("peak_bytes column");
    let rows: Vec<_> = r.records().map(|x| x.unwrap()).collect();
    assert_eq!(rows.len(), 1);
    assert!(rows[0][col].parse::<usize>().unwrap() > 0);

    let both = dir.path().join("both.csv");
    ok(&["attn-bench", "--n", "24", "--tile", "5", "--csv", s(&both), "--out-dir", s(dir.path())]);
    let text = fs::read_to_string(&both).unwrap();
    let diff: f64 = text.lines().nth(2).unwrap().rsplit(',').next().unwrap().parse().unwrap();
    assert!(diff < 1e-5);
}

/// Holo is the toy complex; apo drops the ligand and moves the C-terminal
/// residues; the query is holo-like.
fn write_linkage(dir: &Path) -> (MolecularSystem, MolecularSystem) {
    let (holo, x) = toy::complex();
    let mut doc = holo.to_doc();
    doc.chains.truncate(1);
    doc.bonds.retain(|b| b.i < 25 && b.j < 25);
    let apo = MolecularSystem::from_doc(&doc).unwrap();
    let shifted = |k: f64| -> Vec<Vec3> {
        x[..25].iter().enumerate().map(|(i, p)| if i >= 15 { p + Vec3::new(k, 0.5 * k, 0.0) } else { *p }).collect()
    };
    write_topology(&dir.join("holo.json"), &holo).unwrap();
    write_topology(&dir.join("apo.json"), &apo).unwrap();
    write_pdb(&holo, &x, &dir.join("holo.pdb")).unwrap();
    write_pdb(&apo, &shifted(4.0), &dir.join("apo.pdb")).unwrap();
    write_pdb(&apo, &shifted(0.6), &dir.join("query.pdb")).unwrap();
    (holo, apo)
}

fn paths(t: &str, c: &str) -> StructurePaths {
    StructurePaths { topology: t.into(), coords: c.into() }
}

#[test]
fn confbench_matches_library_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_linkage(d);
    let entry = |id: &str, label| LinkageEntry {
        id: id.into(),
        apo: paths("apo.json", "apo.pdb"),
        holo: paths("holo.json", "holo.pdb"),
        query: paths("apo.json", "query.pdb"),
        ligand_chain: "L".into(),
        label,
    };
    let mut broken = entry("broken", ConformationLabel::Holo);
    broken.ligand_chain = "Z".into();
    let manifest = LinkageManifest {
        version: 1,
        linkages: vec![entry("h", ConformationLabel::Holo), entry("a", ConformationLabel::Apo), broken],
    };
    fs::write(d.join("m.json"), serde_json::to_string(&manifest).unwrap()).unwrap();
    ok(&["confbench", "--manifest", s(&d.join("m.json")), "--threads", "2", "--out-dir", s(&d.join("out"))]);

    let report = read_json(&d.join("out/confbench.json"));
    let rows = report["linkages"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    for (row, entry) in rows.iter().zip(&manifest.linkages).take(2) {
        let direct = confbench_score(&entry.load(d).unwrap()).unwrap();
        assert_eq!(row["score"], serde_json::to_value(direct).unwrap());
    }
    assert!(rows[2]["error"].as_str().unwrap().contains('Z'));
    let h = rows[0]["score"]["global"]["score"].as_f64().unwrap();
    let a = rows[1]["score"]["global"]["score"].as_f64().unwrap();
    assert!(h > 0.0);
    assert_eq!(h, -a);
    assert_eq!(report["win_rates"].as_array().unwrap().len(), 6);
    assert!(d.join("out/confbench.csv").exists());
    assert!(d.join("out/confbench_summary.csv").exists());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = s(dir.path());
    assert_eq!(flowplex(&["sample", "--out-dir", out]).status.code(), Some(2));
    assert_eq!(flowplex(&["sample", "--steps", "many"]).status.code(), Some(2));
    assert_eq!(flowplex(&["frobnicate"]).status.code(), Some(2));
    let missing = flowplex(&["sample", "--topology", "no/such/file.json", "--out-dir", out]);
    assert_eq!(missing.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("input error"));

    fs::write(dir.path().join("bad.json"), "{\"chains\": [}").unwrap();
    let bad = s(&dir.path().join("bad.json")).to_string();
    assert_eq!(flowplex(&["prior", "--topology", &bad, "--out-dir", out]).status.code(), Some(3));

    let topo = examples().join("toy/complex.json");
    let pdb = examples().join("toy/complex.pdb");
    let unknown_chain = flowplex(&[
        "score", "--pred", s(&pdb), "--ref", s(&pdb), "--topology", s(&topo), "--ligand", "Q", "--out-dir", out,
    ]);
    assert_eq!(unknown_chain.status.code(), Some(2));
    let no_ligand = flowplex(&[
        "score", "--pred", s(&pdb), "--ref", s(&pdb), "--topology", s(&topo), "--metrics", "pocket-rmsd", "--out-dir", out,
    ]);
    assert_eq!(no_ligand.status.code(), Some(2));
    assert_eq!(flowplex(&["sample", "--topology", s(&topo), "--steps", "0", "--out-dir", out]).status.code(), Some(2));
    assert_eq!(flowplex(&["sample", "--topology", s(&topo), "--rank", "chain:Z", "--out-dir", out]).status.code(), Some(2));
}

#[test]
fn config_file_fills_gaps_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let topo = examples().join("toy/ligand.json");
    let out = dir.path().join("run");
    let cfg = dir.path().join("c.toml");
    fs::write(
        &cfg,
        format!(
            "seed = 11\nout_dir = {:?}\n[sample]\ntopology = {:?}\nsteps = 5\nanchors = 4\n",
            s(&out),
            s(&topo)
        ),
    )
    .unwrap();
    ok(&["sample", "--config", s(&cfg), "--steps", "6"]);
    let echo = read_json(&out.join("config_echo.json"));
    assert_eq!(echo["global"]["seed"], 11);
    assert_eq!(echo["effective"]["flow"]["steps"], 6);
    assert_eq!(echo["effective"]["anchors"], 4);

    fs::write(&cfg, "[sample]\nstepz = 5\n").unwrap();
    assert_eq!(flowplex(&["sample", "--config", s(&cfg)]).status.code(), Some(3));
}

#[test]
fn in_process_run_matches_binary_exit_codes() {
    assert_eq!(flowplex_cli::run(["flowplex", "score"]), flowplex_cli::EXIT_USAGE);
    assert_eq!(flowplex_cli::run(["flowplex", "--help"]), flowplex_cli::EXIT_OK);
}

/// Long flags per subcommand from the clap tree, globals under "".
fn clap_flags() -> Vec<(String, BTreeSet<String>)> {
    let cmd = flowplex_cli::command();
    let longs = |c: &clap::Command, root: bool| -> BTreeSet<String> {
        c.get_arguments()
            .filter(|a| root || !a.is_global_set())
            .filter_map(|a| a.get_long().map(|l| format!("--{l}")))
            .filter(|l| l != "--help" && l != "--version")
            .collect()
    };
    let mut out = vec![(String::new(), longs(&cmd, true))];
    for sub in cmd.get_subcommands().filter(|c| c.get_name() != "help") {
        out.push((sub.get_name().to_string(), longs(sub, false)));
    }
    out
}

/// `--flag` tokens per `## flowplex <name>` section of docs/cli.md, with the
/// "## Global flags" section under "".
fn documented_flags() -> Vec<(String, BTreeSet<String>)> {
    let text = fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/cli.md")).unwrap();
    let mut out: Vec<(String, BTreeSet<String>)> = Vec::new();
    let mut current: Option<usize> = None;
    for line in text.lines() {
        if let Some(h) = line.strip_prefix("## ") {
            current = if h == "Global flags" {
                out.push((String::new(), BTreeSet::new()));
                Some(out.len() - 1)
            } else if let Some(name) = h.strip_prefix("flowplex ") {
                out.push((name.to_string(), BTreeSet::new()));
                Some(out.len() - 1)
            } else {
                None
            };
            continue;
        }
        let Some(i) = current else { continue };
        if !line.starts_with("| `--") {
            continue;
        }
        let flag = line.trim_start_matches("| `").split('`').next().unwrap();
        out[i].1.insert(flag.to_string());
    }
    out
}

#[test]
fn docs_list_every_flag_and_nothing_else() {
    let mut documented = documented_flags();
    let mut actual = clap_flags();
    documented.sort();
    actual.sort();
    assert_eq!(
        documented.iter().map(|(n, _)| n).collect::<Vec<_>>(),
        actual.iter().map(|(n, _)| n).collect::<Vec<_>>(),
        "subcommand sections"
    );
    for ((name, doc), (_, real)) in documented.iter().zip(&actual) {
        assert_eq!(doc, real, "flags of `{name}`");
    }
}
