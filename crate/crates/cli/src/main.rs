//! Command-line pipeline for explanation-aware re-ranking.
//!
//! Subcommands mirror the pipeline stages (`split`, `precompute`,
//! `generate`, `rerank`, `evaluate`) so each artifact can be produced and
//! inspected on its own, while `pipeline` runs everything end to end from a
//! config file. `fixtures` emits a synthetic dataset to try things out.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 internal
//! invariant violation.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use exprank_core::candidates::{
    baseline_relevance, enumerate_paths, read_paths_tsv, write_paths_tsv, EnumerationConfig,
};
use exprank_core::config::RunConfig;
use exprank_core::error::Result;
use exprank_core::eval::{build_report, GroupSpec, RunMetadata};
use exprank_core::fixtures;
use exprank_core::kg::{InteractionLog, KnowledgeGraph};
use exprank_core::pipeline::run_pipeline;
use exprank_core::props::{compute_lir_table, compute_sep_table, EtdContext, LirTable, SepTable};
use exprank_core::rerank::{
    baseline_list, read_reranked_tsv, rerank, write_reranked_tsv, Mode, Properties, RerankConfig,
};
use exprank_core::split::{chronological_split, SplitSpec};

#[derive(Parser)]
#[command(
    name = "exprank",
    version,
    about = "Re-rank recommendation lists and their knowledge-graph explanation paths \
             for recency, popularity, and diversity of explanations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GraphArgs {
    /// Catalog triples (`head <TAB> relation <TAB> tail`)
    #[arg(long)]
    kg: PathBuf,
    /// Entity types (`entity_id <TAB> entity_type`)
    #[arg(long)]
    entities: PathBuf,
    /// Training interactions (`user <TAB> product <TAB> timestamp`); injected
    /// into the graph as triples
    #[arg(long)]
    train: PathBuf,
    /// Relation label for injected training interactions
    #[arg(long, default_value = "interacted")]
    interaction_relation: String,
}

impl GraphArgs {
    fn load(&self) -> Result<(KnowledgeGraph, InteractionLog)> {
        let catalog = KnowledgeGraph::load_files(&self.entities, &self.kg)?;
        let train = InteractionLog::load(&self.train, &catalog)?;
        let edges: Vec<_> = train
            .users()
            .flat_map(|user| {
                train
                    .interactions(user)
                    .iter()
                    .map(move |i| (user, self.interaction_relation.clone(), i.product))
            })
            .collect();
        let graph = catalog.with_triples(edges)?;
        Ok((graph, train))
    }
}

#[derive(Subcommand)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// Generate a synthetic dataset plus a ready-to-run config file
    Fixtures {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 240)]
        users: usize,
        #[arg(long, default_value_t = 600)]
        products: usize,
    },
    /// Split interactions chronologically per user into train/validation/test
    Split {
        #[arg(long)]
        entities: PathBuf,
        #[arg(long)]
        interactions: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.7)]
        train: f64,
        #[arg(long, default_value_t = 0.1)]
        validation: f64,
        #[arg(long, default_value_t = 0.2)]
        test: f64,
    },
    /// Precompute the recency and popularity tables from training data
    Precompute {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.3)]
        beta_lir: f64,
        #[arg(long, default_value_t = 0.3)]
        beta_sep: f64,
    },
    /// Enumerate and score candidate paths into paths.tsv
    Generate {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 3)]
        max_edges: usize,
        #[arg(long, default_value_t = 25)]
        per_product_cap: usize,
        #[arg(long, default_value_t = 200)]
        candidate_cap: usize,
    },
    /// Re-rank candidate paths into reranked.tsv
    Rerank {
        #[command(flatten)]
        graph: GraphArgs,
        /// Candidate paths (user, product, relevance, path_score, path)
        #[arg(long)]
        paths: PathBuf,
        /// Precomputed recency table
        #[arg(long)]
        lir: PathBuf,
        /// Precomputed popularity table
        #[arg(long)]
        sep: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "weighted")]
        mode: String,
        /// Comma-separated subset of recency,popularity,diversity
        #[arg(long, default_value = "recency,popularity,diversity")]
        properties: String,
        #[arg(long, default_value_t = 0.1)]
        alpha: f64,
        #[arg(long, default_value_t = 10)]
        k: usize,
        /// Print per-step greedy candidate scores to stderr
        #[arg(long)]
        audit: bool,
        /// Emit the baseline selection (products by relevance, paths by
        /// score) instead of re-ranking
        #[arg(long)]
        baseline: bool,
    },
    /// Evaluate a re-ranked file against the test split
    Evaluate {
        #[command(flatten)]
        graph: GraphArgs,
        /// The candidate paths the lists were selected from; defines the
        /// path-type universe for diversity
        #[arg(long)]
        paths: PathBuf,
        #[arg(long)]
        reranked: PathBuf,
        /// Test interactions (`user <TAB> product <TAB> timestamp`)
        #[arg(long)]
        test: PathBuf,
        /// Optional users.tsv with a binary sensitive attribute
        #[arg(long)]
        groups: Option<PathBuf>,
        #[arg(long, default_value = "group")]
        group_attribute: String,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run split, precompute, candidate generation, re-ranking, and
    /// evaluation end to end
    Pipeline {
        /// Config file (key = value); flags below override its keys
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        kg: Option<String>,
        #[arg(long)]
        entities: Option<String>,
        #[arg(long)]
        interactions: Option<String>,
        #[arg(long)]
        groups: Option<String>,
        #[arg(long)]
        paths: Option<String>,
        #[arg(long)]
        out: Option<String>,
        #[arg(long)]
        k: Option<String>,
        #[arg(long)]
        alpha: Option<String>,
        #[arg(long)]
        mode: Option<String>,
        #[arg(long)]
        properties: Option<String>,
        #[arg(long)]
        beta_lir: Option<String>,
        #[arg(long)]
        beta_sep: Option<String>,
        #[arg(long)]
        seed: Option<String>,
        #[arg(long)]
        max_edges: Option<String>,
        #[arg(long)]
        per_product_cap: Option<String>,
        #[arg(long)]
        candidate_cap: Option<String>,
        #[arg(long)]
        interaction_relation: Option<String>,
        #[arg(long)]
        split_train: Option<String>,
        #[arg(long)]
        split_validation: Option<String>,
        #[arg(long)]
        split_test: Option<String>,
        #[arg(long)]
        group_attribute: Option<String>,
        #[arg(long)]
        audit: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Fixtures {
            out,
            seed,
            users,
            products,
        } => {
            let spec = fixtures::FixtureSpec {
                seed,
                users,
                products,
                ..fixtures::FixtureSpec::default()
            };
            let fixture = fixtures::generate(&spec);
            let files = fixtures::write_to_dir(&fixture, &out)?;
            println!("wrote {}", files.entities.display());
            println!("wrote {}", files.kg.display());
            println!("wrote {}", files.interactions.display());
            println!("wrote {}", files.groups.display());
            println!("wrote {}", files.config.display());
            Ok(())
        }
        Command::Split {
            entities,
            interactions,
            out,
            train,
            validation,
            test,
        } => {
            let catalog = KnowledgeGraph::load_entities_only(&entities)?;
            let log = InteractionLog::load(&interactions, &catalog)?;
            let spec = SplitSpec::new(train, validation, test)?;
            let result = chronological_split(&log, &spec)?;
            std::fs::create_dir_all(&out)?;
            exprank_core::tsv::write_atomic(&out.join("train.tsv"), &result.train.to_tsv(&catalog))?;
            exprank_core::tsv::write_atomic(
                &out.join("validation.tsv"),
                &result.validation.to_tsv(&catalog),
            )?;
            exprank_core::tsv::write_atomic(&out.join("test.tsv"), &result.test.to_tsv(&catalog))?;
            println!(
                "split {} events into {} train / {} validation / {} test ({} short histories)",
                log.num_events(),
                result.train.num_events(),
                result.validation.num_events(),
                result.test.num_events(),
                result.short_history_users
            );
            Ok(())
        }
        Command::Precompute {
            graph,
            out,
            beta_lir,
            beta_sep,
        } => {
            let (g, train) = graph.load()?;
            let lir = compute_lir_table(&train, beta_lir)?;
            let sep = compute_sep_table(&g, beta_sep)?;
            std::fs::create_dir_all(&out)?;
            lir.dump(&out.join("lir.tsv"), &g)?;
            sep.dump(&out.join("sep.tsv"), &g)?;
            println!(
                "precomputed {} recency pairs and {} popularity entries",
                lir.len(),
                sep.len()
            );
            Ok(())
        }
        Command::Generate {
            graph,
            out,
            max_edges,
            per_product_cap,
            candidate_cap,
        } => {
            let (g, train) = graph.load()?;
            let enumeration = EnumerationConfig {
                max_edges,
                per_product_cap,
                candidate_cap,
            };
            let users: Vec<_> = train.users().collect();
            let mut sets = Vec::with_capacity(users.len());
            for user in users {
                let mut set = enumerate_paths(&g, &train, user, &enumeration)?;
                baseline_relevance(&mut set);
                for warning in &set.warnings {
                    eprintln!("warning: {warning}");
                }
                sets.push(set);
            }
            std::fs::create_dir_all(&out)?;
            write_paths_tsv(&out.join("paths.tsv"), &sets, &g)?;
            let paths: usize = sets
                .iter()
                .map(|s| s.candidates.iter().map(|c| c.paths.len()).sum::<usize>())
                .sum();
            println!(
                "generated {} paths over {} users into {}",
                paths,
                sets.len(),
                out.join("paths.tsv").display()
            );
            Ok(())
        }
        Command::Rerank {
            graph,
            paths,
            lir,
            sep,
            out,
            mode,
            properties,
            alpha,
            k,
            audit,
            baseline,
        } => {
            let (g, train) = graph.load()?;
            let sets = read_paths_tsv(&paths, &g, Some(&train))?;
            let lir_table = LirTable::load(&lir, &g)?;
            let sep_table = SepTable::load(&sep, &g)?;
            let ctx = type_universe(&sets, k)?;
            let mut cfg = RerankConfig::new(alpha, Properties::parse(&properties)?, k, Mode::parse(&mode)?)?;
            cfg.audit = audit;
            let mut lists = Vec::new();
            for set in sets.iter().filter(|s| !s.is_empty()) {
                let list = if baseline {
                    baseline_list(set, k, &lir_table, &sep_table, &g)?
                } else {
                    rerank(set, &cfg, &lir_table, &sep_table, &ctx, &g)?
                };
                if let Some(steps) = &list.audit {
                    for step in steps {
                        let scores: Vec<String> = step
                            .scores
                            .iter()
                            .map(|(p, s)| format!("{}={s:.6}", g.entity_id(*p)))
                            .collect();
                        eprintln!(
                            "audit user={} position={} chosen={} [{}]",
                            g.entity_id(list.user),
                            step.position,
                            g.entity_id(step.chosen),
                            scores.join(" ")
                        );
                    }
                }
                lists.push(list);
            }
            std::fs::create_dir_all(&out)?;
            let file = out.join("reranked.tsv");
            write_reranked_tsv(&file, &lists, &g)?;
            println!("wrote {} lists to {}", lists.len(), file.display());
            Ok(())
        }
        Command::Evaluate {
            graph,
            paths,
            reranked,
            test,
            groups,
            group_attribute,
            k,
            out,
        } => {
            let (g, train) = graph.load()?;
            let sets = read_paths_tsv(&paths, &g, Some(&train))?;
            let ctx = type_universe(&sets, k)?;
            let lists = read_reranked_tsv(&reranked, &g)?;
            let test_log = InteractionLog::load(&test, &g)?;
            let group_spec = groups
                .as_ref()
                .map(|p| GroupSpec::load(p, &g, &group_attribute))
                .transpose()?;
            let mut metadata = RunMetadata::default();
            metadata.config.insert("k".to_string(), k.to_string());
            for (name, path) in [
                ("paths", Some(&paths)),
                ("reranked", Some(&reranked)),
                ("test", Some(&test)),
                ("groups", groups.as_ref()),
            ] {
                if let Some(path) = path {
                    metadata
                        .config
                        .insert(name.to_string(), path.display().to_string());
                }
            }
            let report = build_report(
                &lists,
                &test_log,
                group_spec.as_ref(),
                &ctx,
                k,
                metadata,
                &g,
            )?;
            std::fs::create_dir_all(&out)?;
            exprank_core::tsv::write_atomic(&out.join("report.json"), &report.to_json()?)?;
            exprank_core::tsv::write_atomic(&out.join("report.csv"), &report.to_csv())?;
            let m = report.global;
            println!(
                "evaluated {} users: ndcg={:.4} lir={:.4} sep={:.4} etd={:.4} eq={:.4}",
                report.counts.evaluated_users, m.ndcg, m.lir, m.sep, m.etd, m.eq
            );
            Ok(())
        }
        Command::Pipeline {
            config,
            kg,
            entities,
            interactions,
            groups,
            paths,
            out,
            k,
            alpha,
            mode,
            properties,
            beta_lir,
            beta_sep,
            seed,
            max_edges,
            per_product_cap,
            candidate_cap,
            interaction_relation,
            split_train,
            split_validation,
            split_test,
            group_attribute,
            audit,
        } => {
            let mut cfg = match config {
                Some(path) => RunConfig::from_file(&path)?,
                None => RunConfig::default(),
            };
            let overrides = [
                ("kg", kg),
                ("entities", entities),
                ("interactions", interactions),
                ("groups", groups),
                ("paths", paths),
                ("out", out),
                ("k", k),
                ("alpha", alpha),
                ("mode", mode),
                ("properties", properties),
                ("beta_lir", beta_lir),
                ("beta_sep", beta_sep),
                ("seed", seed),
                ("max_edges", max_edges),
                ("per_product_cap", per_product_cap),
                ("candidate_cap", candidate_cap),
                ("interaction_relation", interaction_relation),
                ("split_train", split_train),
                ("split_validation", split_validation),
                ("split_test", split_test),
                ("group_attribute", group_attribute),
            ];
            for (key, value) in overrides {
                if let Some(value) = value {
                    cfg.set(key, &value)?;
                }
            }
            if audit {
                cfg.set("audit", "true")?;
            }
            let outcome = run_pipeline(&cfg)?;
            let m = outcome.report.global;
            let b = outcome.baseline_report.global;
            println!(
                "reranked ({} {} alpha={}): ndcg={:.4} lir={:.4} sep={:.4} etd={:.4} eq={:.4}",
                cfg.mode.name(),
                cfg.properties.name(),
                cfg.alpha,
                m.ndcg,
                m.lir,
                m.sep,
                m.etd,
                m.eq
            );
            println!(
                "baseline: ndcg={:.4} lir={:.4} sep={:.4} etd={:.4} eq={:.4}",
                b.ndcg, b.lir, b.sep, b.etd, b.eq
            );
            println!(
                "evaluated {} users ({} without candidates, {} short histories, {} truncated lists)",
                outcome.report.counts.evaluated_users,
                outcome.stats.users_without_candidates,
                outcome.stats.short_history_users,
                outcome.stats.truncated_lists
            );
            for file in &outcome.files {
                println!("wrote {}", file.display());
            }
            Ok(())
        }
    }
}

/// The diversity context is the union of path types over all candidates.
fn type_universe(
    sets: &[exprank_core::candidates::CandidateSet],
    k: usize,
) -> Result<EtdContext> {
    let all_types: BTreeSet<_> = sets
        .iter()
        .flat_map(|set| {
            set.candidates
                .iter()
                .flat_map(|c| c.paths.iter().map(|p| p.path.path_type()))
        })
        .collect();
    EtdContext::new(all_types, k)
}

