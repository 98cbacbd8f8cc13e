//! Subcommand implementations. Every stage writes its manifest before
//! doing any work, then its outputs into `--out`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use mooc_embed::corpus::{
    generate_synthetic, load_corpus, load_prereqs, occurrence_index, save_corpus, save_prereqs,
    summarize, Corpus,
};
use mooc_embed::eval::{self, report_lines};
use mooc_embed::exchange::{read_embeddings, write_embeddings};
use mooc_embed::graph::build_explicit;
use mooc_embed::numerics::{grad_check as numeric_grad_check, Tensor};
use mooc_embed::objectives::{complexity_tsv, compute_complexity};
use mooc_embed::scalar::Scalar;
use mooc_embed::textenc::TextEncoder;
use mooc_embed::trainer::{
    batch_loss, checkpoint_load, checkpoint_peek_config, checkpoint_save, derive_seed,
    entity_embeddings, gradcheck_batch, run_epochs, train as train_model, Bindings, Model,
    Precision, TrainConfig, TrainContext, Trained,
};

use crate::config::Settings;
use crate::manifest::Manifest;
use crate::NumericFailure;

fn write_out(out: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    let path = out.join(name);
    std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

pub fn synth(settings: &Settings, out: &Path) -> Result<()> {
    Manifest {
        command: "synth",
        settings,
        seed: settings.train.seed,
        inputs: vec![],
        outputs: vec![
            ("corpus", PathBuf::from(".")),
            ("prereqs", PathBuf::from("prereqs.jsonl")),
        ],
    }
    .write(out)?;
    let (corpus, labels, _) = generate_synthetic(&settings.synth, settings.train.seed)?;
    save_corpus(&corpus, out)?;
    save_prereqs(&labels, &out.join("prereqs.jsonl"))?;
    println!(
        "synthesized {} concepts, {} lectures, {} courses, {} users, {} positive labels",
        corpus.concepts.len(),
        corpus.lectures.len(),
        corpus.courses.len(),
        corpus.interactions.len(),
        labels.len()
    );
    Ok(())
}

pub fn ingest(settings: &Settings, out: &Path, data: &Path) -> Result<()> {
    Manifest {
        command: "ingest",
        settings,
        seed: settings.train.seed,
        inputs: vec![("data", data.to_path_buf())],
        outputs: vec![
            ("stats", PathBuf::from("stats.tsv")),
            ("corpus", PathBuf::from(".")),
        ],
    }
    .write(out)?;
    let corpus = load_corpus(data)?;
    let prereq_path = data.join("prereqs.jsonl");
    let labels = if prereq_path.exists() {
        let labels = load_prereqs(&prereq_path)?;
        corpus.check_prereqs(&labels)?;
        Some(labels)
    } else {
        None
    };

    let stats = summarize(&corpus);
    let mut tsv = String::new();
    tsv.push_str(&format!("concepts\t{}\n", stats.concepts));
    tsv.push_str(&format!("courses\t{}\n", stats.courses));
    tsv.push_str(&format!("lectures\t{}\n", stats.lectures));
    tsv.push_str(&format!("lectures_per_course\t{}\n", stats.lectures_per_course));
    tsv.push_str(&format!("concepts_per_course\t{}\n", stats.concepts_per_course));
    tsv.push_str(&format!("concepts_per_lecture\t{}\n", stats.concepts_per_lecture));
    tsv.push_str(&format!("users\t{}\n", stats.users));
    match stats.interactions_per_user {
        Some(v) => tsv.push_str(&format!("interactions_per_user\t{v}\n")),
        None => tsv.push_str("interactions_per_user\tabsent\n"),
    }
    write_out(out, "stats.tsv", &tsv)?;
    save_corpus(&corpus, out)?;
    if let Some(labels) = labels {
        save_prereqs(&labels, &out.join("prereqs.jsonl"))?;
    }
    print!("{tsv}");
    Ok(())
}

pub fn build_graph(settings: &Settings, out: &Path, data: &Path) -> Result<()> {
    Manifest {
        command: "build-graph",
        settings,
        seed: settings.train.seed,
        inputs: vec![("data", data.to_path_buf())],
        outputs: vec![("edges", PathBuf::from("edges.tsv"))],
    }
    .write(out)?;
    let corpus = load_corpus(data)?;
    let graph = build_explicit(&corpus).induce_implicit(settings.train.implicit_threshold)?;
    write_out(out, "edges.tsv", &graph.export_edges())?;
    println!(
        "graph: {} vertices, {} edges",
        graph.vertex_count(),
        graph.edges().len()
    );
    Ok(())
}

pub fn complexity(settings: &Settings, out: &Path, data: &Path) -> Result<()> {
    Manifest {
        command: "complexity",
        settings,
        seed: settings.train.seed,
        inputs: vec![("data", data.to_path_buf())],
        outputs: vec![("complexity", PathBuf::from("complexity.tsv"))],
    }
    .write(out)?;
    let corpus = load_corpus(data)?;
    let idx = occurrence_index(&corpus);
    let records = compute_complexity(&idx, &corpus);
    let tsv = complexity_tsv(&records);
    write_out(out, "complexity.tsv", &tsv)?;
    print!("{tsv}");
    Ok(())
}

pub fn train(settings: &Settings, out: &Path, data: &Path, resume: Option<&Path>) -> Result<()> {
    Manifest {
        command: "train",
        settings,
        seed: settings.train.seed,
        inputs: vec![("data", data.to_path_buf())],
        outputs: vec![
            ("checkpoint", PathBuf::from("checkpoint.mrep")),
            ("embeddings", PathBuf::from("embeddings.tsv")),
            ("history", PathBuf::from("history.tsv")),
        ],
    }
    .write(out)?;
    match settings.train.precision {
        Precision::F64 => train_typed::<f64>(settings, out, data, resume),
        Precision::F32 => train_typed::<f32>(settings, out, data, resume),
    }
}

fn train_typed<S: Scalar>(
    settings: &Settings,
    out: &Path,
    data: &Path,
    resume: Option<&Path>,
) -> Result<()> {
    let cfg = &settings.train;
    let corpus = load_corpus(data)?;
    let graph = build_explicit(&corpus).induce_implicit(cfg.implicit_threshold)?;
    let enc = TextEncoder::<S>::fallback(cfg.text_dim);

    let state: Trained<S> = match resume {
        Some(ckpt) => {
            let mut state = checkpoint_load::<S>(ckpt, cfg)?;
            run_epochs(&mut state, &corpus, &graph, &enc, cfg.epochs)?;
            state
        }
        None => train_model(cfg, &corpus, &graph, &enc)?,
    };

    checkpoint_save(&state, &out.join("checkpoint.mrep"))?;
    let embeddings = entity_embeddings(&state.model, &corpus, &enc)?;
    write_embeddings(&embeddings, &out.join("embeddings.tsv"))?;

    let mut history = String::from("epoch\ttriplet\tmse\ttotal\n");
    for (i, ((t, m), total)) in state
        .history
        .triplet
        .iter()
        .zip(&state.history.mse)
        .zip(&state.history.total)
        .enumerate()
    {
        history.push_str(&format!("{i}\t{t}\t{m}\t{total}\n"));
    }
    write_out(out, "history.tsv", &history)?;
    if let Some(last) = state.history.total.last() {
        println!(
            "trained {} epochs; final loss {last:.6} (triplet {:.6}, mse {:.6})",
            state.epoch,
            state.history.triplet.last().unwrap(),
            state.history.mse.last().unwrap()
        );
    } else {
        println!("trained 0 epochs (initialization only)");
    }
    Ok(())
}

pub fn export(settings: &Settings, out: &Path, data: &Path, checkpoint: &Path) -> Result<()> {
    Manifest {
        command: "export",
        settings,
        seed: settings.train.seed,
        inputs: vec![
            ("data", data.to_path_buf()),
            ("checkpoint", checkpoint.to_path_buf()),
        ],
        outputs: vec![("embeddings", PathBuf::from("embeddings.tsv"))],
    }
    .write(out)?;
    let cfg = checkpoint_peek_config(checkpoint)?;
    let corpus = load_corpus(data)?;
    match cfg.precision {
        Precision::F64 => export_typed::<f64>(&cfg, out, &corpus, checkpoint),
        Precision::F32 => export_typed::<f32>(&cfg, out, &corpus, checkpoint),
    }
}

fn export_typed<S: Scalar>(
    cfg: &TrainConfig,
    out: &Path,
    corpus: &Corpus,
    checkpoint: &Path,
) -> Result<()> {
    let state = checkpoint_load::<S>(checkpoint, cfg)?;
    let enc = TextEncoder::<S>::fallback(cfg.text_dim);
    let embeddings = entity_embeddings(&state.model, corpus, &enc)?;
    write_embeddings(&embeddings, &out.join("embeddings.tsv"))?;
    println!(
        "exported {} embeddings of dim {}",
        embeddings.len(),
        embeddings.dim()
    );
    Ok(())
}

pub fn eval_prereq(
    settings: &Settings,
    out: &Path,
    embeddings: &Path,
    labels: &Path,
) -> Result<()> {
    Manifest {
        command: "eval-prereq",
        settings,
        seed: settings.eval.seed,
        inputs: vec![
            ("embeddings", embeddings.to_path_buf()),
            ("labels", labels.to_path_buf()),
        ],
        outputs: vec![("results", PathBuf::from("results.tsv"))],
    }
    .write(out)?;
    let set = read_embeddings::<f64>(embeddings)?;
    let labels = load_prereqs(labels)?;
    let report = eval::eval_prereq(&set, &labels, &settings.eval)?;
    let tsv = report_lines(
        "prereq",
        &[
            ("precision", report.precision),
            ("recall", report.recall),
            ("f1", report.f1),
        ],
        settings.eval.seed,
        &settings.hash(),
    );
    write_out(out, "results.tsv", &tsv)?;
    print!("{tsv}");
    Ok(())
}

pub fn eval_rec(settings: &Settings, out: &Path, embeddings: &Path, data: &Path) -> Result<()> {
    Manifest {
        command: "eval-rec",
        settings,
        seed: settings.eval.seed,
        inputs: vec![
            ("embeddings", embeddings.to_path_buf()),
            ("data", data.to_path_buf()),
        ],
        outputs: vec![("results", PathBuf::from("results.tsv"))],
    }
    .write(out)?;
    let set = read_embeddings::<f64>(embeddings)?;
    let corpus = load_corpus(data)?;
    let candidates: Vec<String> = corpus.lectures.iter().map(|l| l.id.clone()).collect();
    let report = eval::eval_rec(&set, &corpus.interactions, &candidates, &settings.eval)?;
    let k = settings.eval.k;
    let hr_name = format!("hr@{k}");
    let ndcg_name = format!("ndcg@{k}");
    let tsv = report_lines(
        "recommendation",
        &[
            (hr_name.as_str(), report.hr),
            (ndcg_name.as_str(), report.ndcg),
            ("mrr", report.mrr),
        ],
        settings.eval.seed,
        &settings.hash(),
    );
    write_out(out, "results.tsv", &tsv)?;
    print!("{tsv}");
    Ok(())
}

/// Desk-scale gradient verification of the full combined loss. Uses the
/// configured model dims when a config file shrank them; the built-in
/// default is an 8-wide, 2-layer model over a three-course corpus.
pub fn grad_check(settings: &Settings, out: &Path) -> Result<()> {
    Manifest {
        command: "grad-check",
        settings,
        seed: settings.train.seed,
        inputs: vec![],
        outputs: vec![("result", PathBuf::from("gradcheck.txt"))],
    }
    .write(out)?;
    let desk = TrainConfig {
        dim: 8,
        layers: 2,
        heads: 2,
        max_lectures: 8,
        max_modules: 4,
        text_dim: 16,
        negatives: 2,
        seed: settings.train.seed,
        precision: settings.train.precision,
        ..settings.train.clone()
    };
    let synth = mooc_embed::corpus::SyntheticConfig {
        concepts: 6,
        chain_len: 3,
        courses: 3,
        lectures_per_course: 6,
        users: 0,
        module_len: 2,
        noise: 0.0,
    };
    let (corpus, _, _) = generate_synthetic(&synth, derive_seed(desk.seed, "gradcheck-corpus"))?;
    let err = match desk.precision {
        Precision::F64 => grad_check_typed::<f64>(&desk, &corpus)?,
        Precision::F32 => grad_check_typed::<f32>(&desk, &corpus)?,
    };
    let tol = match desk.precision {
        Precision::F64 => 1e-5,
        Precision::F32 => 1e-2,
    };
    let line = format!("max relative error: {err:.3e} (tolerance {tol:.0e})\n");
    write_out(out, "gradcheck.txt", &line)?;
    print!("{line}");
    if err >= tol {
        return Err(NumericFailure(format!(
            "gradient check failed: {err:.3e} >= {tol:.0e}"
        ))
        .into());
    }
    Ok(())
}

fn grad_check_typed<S: Scalar>(cfg: &TrainConfig, corpus: &Corpus) -> Result<f64> {
    let enc = TextEncoder::<S>::fallback(cfg.text_dim);
    let graph = build_explicit(corpus).induce_implicit(cfg.implicit_threshold)?;
    let model = Model::init(cfg, corpus, &enc)?;
    let ctx = TrainContext::prepare(&model, corpus, &graph, &enc)?;
    let batch = gradcheck_batch(&graph, cfg.negatives, cfg.seed);

    let names = model.param_names();
    let tensors: Vec<Tensor<S>> = names.iter().map(|n| model.params[n].clone()).collect();
    let h = S::from_double(1e-6);
    let err = numeric_grad_check(&tensors, h, |tape, refs| {
        let by_name: BTreeMap<String, _> =
            names.iter().cloned().zip(refs.iter().copied()).collect();
        let bindings = Bindings::from_refs(&model.cfg.encoder(), tape, by_name)
            .map_err(|_| mooc_embed::numerics::NumericError::NonFinite { op: "bind" })?;
        let (loss, _, _) = batch_loss(tape, &model, &bindings, &ctx, &batch)
            .map_err(|_| mooc_embed::numerics::NumericError::NonFinite { op: "loss" })?;
        Ok(loss)
    })?;
    Ok(err.to_double())
}

pub fn report(settings: &Settings, out: &Path, results: &[PathBuf]) -> Result<()> {
    Manifest {
        command: "report",
        settings,
        seed: settings.eval.seed,
        inputs: results
            .iter()
            .map(|p| ("results", p.clone()))
            .collect(),
        outputs: vec![("report", PathBuf::from("report.tsv"))],
    }
    .write(out)?;
    let mut merged = String::from("task\tmetric\tvalue\tseed\tconfig_hash\n");
    for path in results {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?;
        for line in text.lines() {
            if line.trim().is_empty() || line.starts_with("task\t") {
                continue;
            }
            let fields = line.split('\t').count();
            anyhow::ensure!(
                fields == 5,
                "{}: expected 5 tab-separated fields, got {fields}: `{line}`",
                path.display()
            );
            merged.push_str(line);
            merged.push('\n');
        }
    }
    write_out(out, "report.tsv", &merged)?;
    print!("{merged}");
    Ok(())
}
