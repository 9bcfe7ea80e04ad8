use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use fsearch_core::encoder::{embed_corpus, read_checkpoint, write_checkpoint, ModelParams};
use fsearch_core::eval::{evaluate, read_qrels, read_run, read_visual_map, rrf_combine, write_run, VisualMap};
use fsearch_core::formula_ir::{opt_to_opg, parse_formula, read_corpus_tsv, write_corpus_tsv};
use fsearch_core::retrieval::{batch_search, record_context, QuerySemantics, VectorIndex};
use fsearch_core::semantic::{embed_text_fallback, import_vectors, read_vector_file, write_vector_file, SemanticVector};
use fsearch_core::synth::{SynthConfig, SynthCorpus};
use fsearch_core::train::{train, TrainError, MIN_TRAIN_NODES_EXCLUSIVE};
use serde_json::json;

use crate::config::{RunConfig, SemanticMode};
use crate::store::{read_store, write_store};
use crate::{Cli, CliError, Command, ConfigAction};

type Result<T> = std::result::Result<T, CliError>;

fn required(flag: &Option<PathBuf>, from_config: &Option<PathBuf>, what: &str) -> Result<PathBuf> {
    flag.clone()
        .or_else(|| from_config.clone())
        .ok_or_else(|| CliError::Usage(format!("missing --{what} (and no paths.{} in the config)", what.replace('-', "_"))))
}

fn open(path: &Path) -> anyhow::Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?))
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

pub fn run(cli: &Cli) -> Result<()> {
    if let Command::Synth(a) = &cli.command {
        return synth(a);
    }
    let cfg = RunConfig::resolve(cli.config.as_deref(), cli.profile, &cli.sets).map_err(CliError::Usage)?;
    match &cli.command {
        Command::Ingest(a) => ingest(a, &cfg),
        Command::Train(a) => train_cmd(a, &cfg),
        Command::Embed(a) => embed(a, &cfg),
        Command::Search(a) => search(a, &cfg),
        Command::Evaluate(a) => evaluate_cmd(a, &cfg),
        Command::Fuse(a) => fuse(a, &cfg),
        Command::Config { action } => config_cmd(action, &cfg),
        Command::Synth(_) => unreachable!("handled above"),
    }
}

fn ingest(a: &crate::IngestArgs, cfg: &RunConfig) -> Result<()> {
    let corpus = required(&a.corpus, &cfg.paths.corpus, "corpus")?;
    let out = required(&a.out, &cfg.paths.store, "out")?;
    let records = read_corpus_tsv(open(&corpus)?).with_context(|| corpus.display().to_string())?;
    if records.is_empty() {
        return Err(anyhow!("{} holds no formulas", corpus.display()).into());
    }
    let mut kept = Vec::with_capacity(records.len());
    let mut graphs = Vec::with_capacity(records.len());
    let mut failed = 0usize;
    for r in records.iter() {
        match parse_formula(&r.source_text) {
            Ok(t) => {
                graphs.push(opt_to_opg(&t));
                kept.push(r.clone());
            }
            Err(e) => {
                failed += 1;
                log::warn!("{}: {e}", r.formula_id);
            }
        }
    }
    if failed * 100 > records.len() {
        return Err(anyhow!("{failed} of {} formulas failed to parse (more than 1%)", records.len()).into());
    }
    write_store(&out, &kept, &graphs)?;
    let trainable = graphs.iter().filter(|g| g.node_count() > MIN_TRAIN_NODES_EXCLUSIVE).count();
    println!(
        "{}",
        json!({"formulas": records.len(), "stored": kept.len(), "failed": failed, "trainable": trainable})
    );
    Ok(())
}

fn write_checkpoint_atomically(path: &Path, params: &ModelParams<f32>) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    let mut w = BufWriter::new(File::create(&tmp)?);
    write_checkpoint(&mut w, params)?;
    w.into_inner().map_err(|e| e.into_error())?.sync_all()?;
    std::fs::rename(&tmp, path)
}

fn train_cmd(a: &crate::TrainArgs, cfg: &RunConfig) -> Result<()> {
    let store_path = required(&a.store, &cfg.paths.store, "store")?;
    let out = required(&a.out, &cfg.paths.model, "out")?;
    let log_path = a.log.clone().or_else(|| cfg.paths.train_log.clone());
    let store = read_store(&store_path)?;
    let mut log_file = log_path.as_deref().map(create).transpose()?;
    let outcome = train::<f32, _>(&store.graphs, &cfg.model, cfg.augment, cfg.train, |report, params| {
        write_checkpoint_atomically(&out, params)?;
        if let Some(w) = log_file.as_mut() {
            writeln!(w, "{}", report.to_json_line())?;
            w.flush()?;
        }
        Ok(())
    });
    let outcome = match outcome {
        Ok(o) => o,
        Err(TrainError::Config(m)) => return Err(CliError::Usage(m)),
        Err(e) => return Err(anyhow!(e).into()),
    };
    if outcome.log.is_empty() {
        write_checkpoint_atomically(&out, &outcome.params).context("writing checkpoint")?;
    }
    let last = outcome.log.last();
    println!(
        "{}",
        json!({
            "epochs": outcome.log.len(),
            "vocabulary": outcome.params.vocab.len(),
            "final_loss": last.map(|r| r.mean_loss),
            "checkpoint": out.display().to_string(),
        })
    );
    Ok(())
}

enum SemanticSource {
    None,
    Fallback,
    Import(PathBuf),
}

fn semantic_source(flag: Option<&str>, cfg: &RunConfig) -> Result<SemanticSource> {
    match flag {
        Some("none") => Ok(SemanticSource::None),
        Some("fallback") => Ok(SemanticSource::Fallback),
        Some(s) => match s.strip_prefix("import:") {
            Some(p) if !p.is_empty() => Ok(SemanticSource::Import(PathBuf::from(p))),
            _ => Err(CliError::Usage(format!("--semantic expects fallback, none or import:<file>, got {s:?}"))),
        },
        None => match cfg.semantic.mode {
            SemanticMode::None => Ok(SemanticSource::None),
            SemanticMode::Fallback => Ok(SemanticSource::Fallback),
            SemanticMode::Import => Err(CliError::Usage(
                "semantic.mode = \"import\" needs --semantic import:<file> to name the vectors".into(),
            )),
        },
    }
}

fn load_model(path: &Path) -> anyhow::Result<ModelParams<f32>> {
    read_checkpoint::<f32, _>(open(path)?).with_context(|| format!("reading checkpoint {}", path.display()))
}

fn embed(a: &crate::EmbedArgs, cfg: &RunConfig) -> Result<()> {
    let store_path = required(&a.store, &cfg.paths.store, "store")?;
    let model_path = required(&a.model, &cfg.paths.model, "model")?;
    let out = required(&a.out, &cfg.paths.structural, "out")?;
    let source = semantic_source(a.semantic.as_deref(), cfg)?;
    let sem_out = match source {
        SemanticSource::None => None,
        _ => Some(required(&a.semantic_out, &cfg.paths.semantic, "semantic-out")?),
    };
    let store = read_store(&store_path)?;
    let mut params = load_model(&model_path)?;
    params.head_order = cfg.model.head_order;
    let pairs: Vec<(String, _)> = store
        .records
        .iter()
        .zip(&store.graphs)
        .map(|(r, g)| (r.formula_id.clone(), g.clone()))
        .collect();
    let m = embed_corpus(&pairs, &params).map_err(|e| anyhow!(e))?;
    let mut w = create(&out)?;
    write_vector_file(&mut w, m.dim, m.ids.iter().enumerate().map(|(i, id)| (id.as_str(), m.row(i))))
        .and_then(|_| w.flush())
        .with_context(|| format!("writing {}", out.display()))?;

    let semantic: Option<Vec<SemanticVector>> = match &source {
        SemanticSource::None => None,
        SemanticSource::Fallback => {
            let ctx = cfg.semantic.context();
            let mut v = Vec::with_capacity(store.records.len());
            for r in &store.records {
                let text = record_context(r, &ctx).map_err(|e| anyhow!(e))?;
                v.push(embed_text_fallback(&r.formula_id, &text, cfg.semantic.dim));
            }
            Some(v)
        }
        SemanticSource::Import(p) => {
            let map = import_vectors(open(p)?, Some(cfg.semantic.dim)).with_context(|| p.display().to_string())?;
            let v: Vec<SemanticVector> = store.records.iter().filter_map(|r| map.get(&r.formula_id).cloned()).collect();
            if v.len() < store.records.len() {
                log::warn!("{} of {} formulas have no imported vector", store.records.len() - v.len(), store.records.len());
            }
            Some(v)
        }
    };
    if let (Some(vectors), Some(path)) = (&semantic, &sem_out) {
        let mut w = create(path)?;
        write_vector_file(&mut w, cfg.semantic.dim, vectors.iter().map(|s| (s.formula_id.as_str(), s.v.as_slice())))
            .and_then(|_| w.flush())
            .with_context(|| format!("writing {}", path.display()))?;
    }
    println!(
        "{}",
        json!({
            "formulas": m.len(),
            "structural_dim": m.dim,
            "semantic_vectors": semantic.as_ref().map(Vec::len),
        })
    );
    Ok(())
}

fn search(a: &crate::SearchArgs, cfg: &RunConfig) -> Result<()> {
    let store_path = required(&a.store, &cfg.paths.store, "store")?;
    let model_path = required(&a.model, &cfg.paths.model, "model")?;
    let structural = required(&a.structural, &cfg.paths.structural, "structural")?;
    let topics_path = required(&a.topics, &cfg.paths.topics, "topics")?;
    let out = required(&a.out, &cfg.paths.run, "out")?;
    let semantic_path = a.semantic_vectors.clone().or_else(|| cfg.paths.semantic.clone());

    let store = read_store(&store_path)?;
    let posts: std::collections::HashMap<&str, &str> = store
        .records
        .iter()
        .map(|r| (r.formula_id.as_str(), r.post_id.as_str()))
        .collect();
    let file = read_vector_file(open(&structural)?).with_context(|| structural.display().to_string())?;
    let mut ids = Vec::with_capacity(file.entries.len());
    let mut post_ids = Vec::with_capacity(file.entries.len());
    let mut rows = Vec::with_capacity(file.entries.len() * file.dim);
    for (id, v) in file.entries {
        let post = posts
            .get(id.as_str())
            .ok_or_else(|| anyhow!("structural vector {id:?} is not in the store"))?;
        post_ids.push(post.to_string());
        ids.push(id);
        rows.extend(v);
    }
    let mut index = VectorIndex::new(ids, post_ids, file.dim, rows).map_err(|e| anyhow!(e))?;

    let semantics = match cfg.semantic.mode {
        SemanticMode::None => QuerySemantics::None,
        SemanticMode::Fallback => QuerySemantics::Fallback {
            dim: cfg.semantic.dim,
            context: cfg.semantic.context(),
        },
        SemanticMode::Import => {
            let p = required(&a.query_vectors, &cfg.paths.query_semantic, "query-vectors")?;
            let map = import_vectors(open(&p)?, Some(cfg.semantic.dim)).with_context(|| p.display().to_string())?;
            QuerySemantics::Imported(map)
        }
    };
    if cfg.semantic.mode != SemanticMode::None {
        match &semantic_path {
            Some(p) => {
                let map = import_vectors(open(p)?, Some(cfg.semantic.dim)).with_context(|| p.display().to_string())?;
                index = index.with_semantic(map).map_err(|e| anyhow!(e))?;
            }
            None => log::warn!("no corpus semantic vectors given; semantic scores will be 0"),
        }
    }

    let params = load_model(&model_path)?;
    if params.dim() != index.dim() {
        return Err(anyhow!(
            "model width {} does not match structural vectors of width {}",
            params.dim(),
            index.dim()
        )
        .into());
    }
    let topics = read_corpus_tsv(open(&topics_path)?).with_context(|| topics_path.display().to_string())?;
    let outcome = batch_search(&topics, &params, &index, &cfg.search, &semantics, &a.tag);
    for (t, e) in &outcome.failures {
        log::warn!("topic {t}: {e}");
    }
    let mut w = create(&out)?;
    write_run(&mut w, &outcome.rows)
        .and_then(|_| w.flush())
        .with_context(|| format!("writing {}", out.display()))?;
    println!(
        "{}",
        json!({"topics": topics.len(), "rows": outcome.rows.len(), "failed_topics": outcome.failures.len()})
    );
    Ok(())
}

fn evaluate_cmd(a: &crate::EvaluateArgs, cfg: &RunConfig) -> Result<()> {
    let run_path = required(&a.run, &cfg.paths.run, "run")?;
    let qrels_path = required(&a.qrels, &cfg.paths.qrels, "qrels")?;
    let run = read_run(open(&run_path)?).with_context(|| run_path.display().to_string())?;
    let qrels = read_qrels(open(&qrels_path)?).with_context(|| qrels_path.display().to_string())?;
    let vmap = match a.visual_map.clone().or_else(|| cfg.paths.visual_map.clone()) {
        Some(p) => read_visual_map(open(&p)?).with_context(|| p.display().to_string())?,
        None => VisualMap::default(),
    };
    let report = evaluate(&run, &qrels, &vmap).with_context(|| run_path.display().to_string())?;
    if let Some(p) = a.json.clone().or_else(|| cfg.paths.report.clone()) {
        std::fs::write(&p, report.to_json()).with_context(|| format!("writing {}", p.display()))?;
    }
    if a.print_json {
        print!("{}", report.to_json());
    } else {
        print!("{}", report.to_table());
    }
    Ok(())
}

fn fuse(a: &crate::FuseArgs, cfg: &RunConfig) -> Result<()> {
    let mut runs = Vec::with_capacity(a.runs.len());
    for p in &a.runs {
        runs.push(read_run(open(p)?).with_context(|| p.display().to_string())?);
    }
    let k = a.k_rrf.unwrap_or(cfg.eval.k_rrf);
    if !(k >= 0.0) {
        return Err(CliError::Usage(format!("--k-rrf must be >= 0, got {k}")));
    }
    let depth = a.depth.unwrap_or(cfg.eval.depth);
    let fused = rrf_combine(&runs, k, depth, &a.tag).map_err(|e| anyhow!(e))?;
    let mut w = create(&a.out)?;
    write_run(&mut w, &fused)
        .and_then(|_| w.flush())
        .with_context(|| format!("writing {}", a.out.display()))?;
    println!("{}", json!({"runs": runs.len(), "rows": fused.len()}));
    Ok(())
}

fn config_cmd(action: &ConfigAction, cfg: &RunConfig) -> Result<()> {
    match action {
        ConfigAction::Validate => print!("{}", cfg.to_toml()),
        ConfigAction::DryRun => {
            let d = cfg.model.dim;
            let per_layer = 2 * d * d + 2 * d + 1;
            let dense = cfg.model.layers * per_layer + d * d + d;
            println!("profile      {:?}", cfg.profile);
            println!("ingest       keep every parsed formula; train on those with more than {MIN_TRAIN_NODES_EXCLUSIVE} nodes");
            println!(
                "augment      substitution p1={} p2={} p3={}, mask rate {}",
                cfg.augment.p1, cfg.augment.p2, cfg.augment.p3, cfg.augment.mask_rate
            );
            println!(
                "model        d={} layers={} min_frequency={} head={:?}; {} dense parameters + V x {} embedding",
                d, cfg.model.layers, cfg.model.min_frequency, cfg.model.head_order, dense, d
            );
            println!(
                "train        {} epochs, batch {} formulas ({} views), lr {}, tau {}, seed {}",
                cfg.train.epochs,
                cfg.train.batch_size,
                2 * cfg.train.batch_size,
                cfg.train.learning_rate,
                cfg.train.temperature,
                cfg.train.seed
            );
            println!(
                "semantic     {:?}, d_t={}, window {} {:?} ({:?})",
                cfg.semantic.mode, cfg.semantic.dim, cfg.semantic.max_len, cfg.semantic.unit, cfg.semantic.anchor
            );
            println!(
                "search       stage-1 top {} by structure, fuse with lambda {}, keep {}",
                cfg.search.stage1_k, cfg.search.lambda, cfg.search.final_n
            );
            println!("evaluate     P'@5, P'@10, nDCG'@10; rrf k={} depth {}", cfg.eval.k_rrf, cfg.eval.depth);
        }
    }
    Ok(())
}

fn synth(a: &crate::SynthArgs) -> Result<()> {
    let c = SynthCorpus::generate(&SynthConfig {
        formulas: a.formulas,
        topics: a.topics,
        seed: a.seed,
        ..SynthConfig::default()
    });
    std::fs::create_dir_all(&a.out_dir).with_context(|| a.out_dir.display().to_string())?;
    let write = |name: &str, f: &dyn Fn(&mut BufWriter<File>) -> std::io::Result<()>| -> anyhow::Result<()> {
        let p = a.out_dir.join(name);
        let mut w = create(&p)?;
        f(&mut w).and_then(|_| w.flush()).with_context(|| format!("writing {}", p.display()))
    };
    write("corpus.tsv", &|w| write_corpus_tsv(w, &c.records))?;
    write("topics.tsv", &|w| write_corpus_tsv(w, &c.topics))?;
    write("qrels.tsv", &|w| c.write_qrels(w))?;
    write("visual_map.tsv", &|w| c.write_visual_map(w))?;
    println!(
        "{}",
        json!({"formulas": c.records.len(), "topics": c.topics.len(), "judgements": c.qrels.len()})
    );
    Ok(())
}
