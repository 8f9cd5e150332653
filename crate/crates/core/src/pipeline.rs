//! End-to-end pipeline: split, precompute, generate or ingest candidates,
//! re-rank, and evaluate against the baseline.
//!
//! The traversal graph is the catalog graph plus the *training* interactions
//! injected as triples, so popularity scores and path enumeration can never
//! see held-out interactions. Any stage failure aborts the run with the
//! stage name; output files are written last and removed again if a write
//! fails partway.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::candidates::{
    baseline_relevance, enumerate_paths, read_paths_tsv, write_paths_tsv, CandidateSet,
};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::eval::{build_report, EvaluationReport, GroupSpec, RunMetadata};
use crate::kg::{InteractionLog, KnowledgeGraph};
use crate::props::{compute_lir_table, compute_sep_table, EtdContext};
use crate::rerank::{rerank_with_baseline, write_reranked_tsv, ExplainedList};
use crate::split::chronological_split;
use crate::tsv::write_atomic;

/// Run counters surfaced next to the reports.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PipelineStats {
    pub users_total: usize,
    pub users_without_candidates: usize,
    pub short_history_users: usize,
    pub truncated_lists: usize,
}

/// Everything a pipeline run produces.
#[derive(Debug)]
pub struct PipelineOutcome {
    pub report: EvaluationReport,
    pub baseline_report: EvaluationReport,
    pub files: Vec<PathBuf>,
    pub stats: PipelineStats,
}

struct OutputWriter {
    written: Vec<PathBuf>,
}

impl OutputWriter {
    fn new() -> Self {
        OutputWriter { written: Vec::new() }
    }

    fn write(&mut self, path: PathBuf, contents: &str) -> Result<()> {
        write_atomic(&path, contents)?;
        self.written.push(path);
        Ok(())
    }

    fn discard_all(&mut self) {
        for path in self.written.drain(..) {
            let _ = fs::remove_file(path);
        }
    }
}

fn hash_file(path: &std::path::Path) -> Result<String> {
    let bytes = fs::read(path)
        .map_err(|e| Error::Data(format!("cannot read {}: {e}", path.display())))?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

/// Execute the full pipeline for one re-ranking setting, producing the
/// setting's report plus a baseline report in which products follow the
/// upstream relevance order and paths are picked by highest score.
pub fn run_pipeline(cfg: &RunConfig) -> Result<PipelineOutcome> {
    cfg.validate().map_err(|e| e.in_stage("config"))?;
    let rerank_cfg = cfg.rerank_config();

    // load-graph
    let catalog = KnowledgeGraph::load_files(&cfg.entities, &cfg.kg)
        .map_err(|e| e.in_stage("load-graph"))?;
    let log = InteractionLog::load(&cfg.interactions, &catalog)
        .map_err(|e| e.in_stage("load-interactions"))?;
    let groups = match &cfg.groups {
        Some(path) => Some(
            GroupSpec::load(path, &catalog, &cfg.group_attribute)
                .map_err(|e| e.in_stage("load-groups"))?,
        ),
        None => None,
    };

    // split
    let split = chronological_split(&log, &cfg.split_spec()?).map_err(|e| e.in_stage("split"))?;

    // augment-graph: training interactions become triples
    let train_edges: Vec<_> = split
        .train
        .users()
        .flat_map(|user| {
            split
                .train
                .interactions(user)
                .iter()
                .map(move |i| (user, cfg.interaction_relation.clone(), i.product))
        })
        .collect();
    let graph = catalog
        .with_triples(train_edges)
        .map_err(|e| e.in_stage("augment-graph"))?;

    // precompute: recency from the train log, popularity from the augmented
    // graph; neither sees validation or test interactions
    let lir = compute_lir_table(&split.train, cfg.beta_lir).map_err(|e| e.in_stage("precompute"))?;
    let sep = compute_sep_table(&graph, cfg.beta_sep).map_err(|e| e.in_stage("precompute"))?;

    // candidates
    let generated = cfg.paths.is_none();
    let sets: Vec<CandidateSet> = match &cfg.paths {
        Some(file) => {
            read_paths_tsv(file, &graph, Some(&split.train)).map_err(|e| e.in_stage("candidates"))?
        }
        None => {
            let users: Vec<_> = split.train.users().collect();
            let enumeration = cfg.enumeration_config();
            let mut sets = users
                .par_iter()
                .map(|&user| {
                    let mut set = enumerate_paths(&graph, &split.train, user, &enumeration)?;
                    baseline_relevance(&mut set);
                    Ok(set)
                })
                .collect::<Result<Vec<_>>>()
                .map_err(|e: Error| e.in_stage("candidates"))?;
            sets.sort_by(|a, b| graph.entity_id(a.user).cmp(graph.entity_id(b.user)));
            sets
        }
    };
    let mut stats = PipelineStats {
        users_total: sets.len(),
        users_without_candidates: sets.iter().filter(|s| s.is_empty()).count(),
        short_history_users: split.short_history_users,
        truncated_lists: 0,
    };

    // context: the path-type universe over every candidate path of the run
    let all_types: std::collections::BTreeSet<_> = sets
        .iter()
        .flat_map(|set| {
            set.candidates
                .iter()
                .flat_map(|c| c.paths.iter().map(|p| p.path.path_type()))
        })
        .collect();
    let ctx = EtdContext::new(all_types, cfg.k).map_err(|e| e.in_stage("context"))?;

    // rerank every user with candidates, both with the setting and baseline
    let nonempty: Vec<&CandidateSet> = sets.iter().filter(|s| !s.is_empty()).collect();
    let pairs: Vec<(ExplainedList, ExplainedList)> = nonempty
        .par_iter()
        .map(|set| rerank_with_baseline(set, &rerank_cfg, &lir, &sep, &ctx, &graph))
        .collect::<Result<Vec<_>>>()
        .map_err(|e: Error| e.in_stage("rerank"))?;
    let (reranked_lists, baseline_lists): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
    stats.truncated_lists = reranked_lists.iter().filter(|l| l.truncated).count();

    // evaluate
    let mut hashes = BTreeMap::new();
    for (name, path) in [
        ("kg", Some(&cfg.kg)),
        ("entities", Some(&cfg.entities)),
        ("interactions", Some(&cfg.interactions)),
        ("groups", cfg.groups.as_ref()),
        ("paths", cfg.paths.as_ref()),
    ] {
        if let Some(path) = path {
            hashes.insert(name.to_string(), hash_file(path).map_err(|e| e.in_stage("evaluate"))?);
        }
    }
    let metadata_for = |variant: &str| {
        let mut config = cfg.echo();
        config.insert("report_variant".to_string(), variant.to_string());
        RunMetadata {
            config,
            dataset_hashes: hashes.clone(),
        }
    };
    let report = build_report(
        &reranked_lists,
        &split.test,
        groups.as_ref(),
        &ctx,
        cfg.k,
        metadata_for("reranked"),
        &graph,
    )
    .map_err(|e| e.in_stage("evaluate"))?;
    let baseline_report = build_report(
        &baseline_lists,
        &split.test,
        groups.as_ref(),
        &ctx,
        cfg.k,
        metadata_for("baseline"),
        &graph,
    )
    .map_err(|e| e.in_stage("evaluate"))?;

    // write-outputs, atomically and all-or-nothing
    fs::create_dir_all(&cfg.out).map_err(|e| Error::from(e).in_stage("write-outputs"))?;
    let mut writer = OutputWriter::new();
    let result = write_outputs(
        cfg,
        &mut writer,
        &graph,
        &split,
        &lir,
        &sep,
        &sets,
        generated,
        &reranked_lists,
        &baseline_lists,
        &report,
        &baseline_report,
    );
    if let Err(e) = result {
        writer.discard_all();
        return Err(e.in_stage("write-outputs"));
    }

    Ok(PipelineOutcome {
        report,
        baseline_report,
        files: writer.written,
        stats,
    })
}

#[allow(clippy::too_many_arguments)]
fn write_outputs(
    cfg: &RunConfig,
    writer: &mut OutputWriter,
    graph: &KnowledgeGraph,
    split: &crate::split::SplitResult,
    lir: &crate::props::LirTable,
    sep: &crate::props::SepTable,
    sets: &[CandidateSet],
    generated: bool,
    reranked_lists: &[ExplainedList],
    baseline_lists: &[ExplainedList],
    report: &EvaluationReport,
    baseline_report: &EvaluationReport,
) -> Result<()> {
    let out = &cfg.out;
    writer.write(out.join("train.tsv"), &split.train.to_tsv(graph))?;
    writer.write(out.join("validation.tsv"), &split.validation.to_tsv(graph))?;
    writer.write(out.join("test.tsv"), &split.test.to_tsv(graph))?;

    lir.dump(&out.join("lir.tsv"), graph)?;
    writer.written.push(out.join("lir.tsv"));
    sep.dump(&out.join("sep.tsv"), graph)?;
    writer.written.push(out.join("sep.tsv"));

    if generated {
        write_paths_tsv(&out.join("paths.tsv"), sets, graph)?;
        writer.written.push(out.join("paths.tsv"));
    }

    write_reranked_tsv(&out.join("reranked.tsv"), reranked_lists, graph)?;
    writer.written.push(out.join("reranked.tsv"));
    write_reranked_tsv(&out.join("baseline.tsv"), baseline_lists, graph)?;
    writer.written.push(out.join("baseline.tsv"));

    writer.write(out.join("report.json"), &report.to_json()?)?;
    writer.write(out.join("report.csv"), &report.to_csv())?;
    writer.write(out.join("baseline_report.json"), &baseline_report.to_json()?)?;
    writer.write(out.join("baseline_report.csv"), &baseline_report.to_csv())?;
    Ok(())
}
