//! Candidate generation: a desk-scale stand-in for an upstream
//! path-reasoning recommender.
//!
//! For each user it enumerates bounded-depth walks from the user's training
//! products through the graph into unseen products, scores each walk with a
//! non-backtracking random-walk likelihood, and derives a product relevance
//! from the per-product score mass. The resulting candidate sets have the
//! same shape as `paths.tsv` files ingested from a real upstream model.

use std::collections::{HashMap, HashSet};
use std::path::Path as FsPath;

use crate::error::{Error, Result};
use crate::kg::{EntityIdx, InteractionLog, KnowledgeGraph};
use crate::path::{decompose_path, Path, PathEdge};
use crate::tsv::{self, write_atomic};

/// A candidate explanation path with the likelihood the walker took it.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredPath {
    pub path: Path,
    pub score: f64,
}

/// One recommendable product with its predicted relevance and its paths,
/// sorted by descending score.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub product: EntityIdx,
    /// Predicted relevance in [0, 1]; `None` until filled by
    /// [`baseline_relevance`] or read from a paths file.
    pub relevance: Option<f64>,
    pub paths: Vec<ScoredPath>,
}

impl Candidate {
    pub fn relevance_or_err(&self) -> Result<f64> {
        self.relevance
            .ok_or_else(|| Error::Internal("candidate relevance not filled".to_string()))
    }
}

/// All candidates of one user.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub user: EntityIdx,
    pub candidates: Vec<Candidate>,
    pub warnings: Vec<String>,
}

impl CandidateSet {
    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }
}

/// Bounds for path enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnumerationConfig {
    /// Maximum number of edges per path (minimum useful value is 3).
    pub max_edges: usize,
    /// Paths kept per candidate product, highest score first.
    pub per_product_cap: usize,
    /// Candidate products kept per user, highest score mass first.
    pub candidate_cap: usize,
}

impl Default for EnumerationConfig {
    fn default() -> Self {
        EnumerationConfig {
            max_edges: 3,
            per_product_cap: 25,
            candidate_cap: 200,
        }
    }
}

impl EnumerationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_edges < 3 {
            return Err(Error::Config(format!(
                "max_edges must be at least 3 (interaction + chain + recommendation), got {}",
                self.max_edges
            )));
        }
        if self.per_product_cap == 0 || self.candidate_cap == 0 {
            return Err(Error::Config("path and candidate caps must be positive".to_string()));
        }
        Ok(())
    }
}

/// Likelihood that a non-backtracking random walker takes this exact path:
/// the product over hops of one over the number of moves available at the
/// hop's source. Moves traverse triples in either direction; after the first
/// hop the arrival edge is not a move.
pub fn score_path(path: &Path, graph: &KnowledgeGraph) -> f64 {
    let mut score = 1.0;
    for (i, &node) in path.nodes()[..path.len()].iter().enumerate() {
        let choices = if i == 0 {
            graph.degree(node)
        } else {
            graph.degree(node).saturating_sub(1)
        };
        score /= choices.max(1) as f64;
    }
    score
}

/// Enumerate candidate paths for one user over the graph.
///
/// Walks start with an actual training interaction edge, pass only through
/// non-product entities, never revisit a node, and end in a product the user
/// has not interacted with in training. Paths per product and products per
/// user are capped deterministically by (score, serialization).
pub fn enumerate_paths(
    graph: &KnowledgeGraph,
    train: &InteractionLog,
    user: EntityIdx,
    cfg: &EnumerationConfig,
) -> Result<CandidateSet> {
    cfg.validate()?;
    let seen = train.product_set(user);
    if seen.is_empty() {
        return Ok(CandidateSet {
            user,
            candidates: Vec::new(),
            warnings: vec![format!(
                "user '{}' has no training interactions; no candidates generated",
                graph.entity_id(user)
            )],
        });
    }

    let mut by_product: HashMap<EntityIdx, Vec<ScoredPath>> = HashMap::new();
    let mut nodes = vec![user];
    let mut edges: Vec<PathEdge> = Vec::new();
    let mut on_path: HashSet<EntityIdx> = HashSet::from([user]);
    walk(
        graph, &seen, cfg, &mut nodes, &mut edges, &mut on_path, &mut by_product,
    );

    // cap paths per product: highest score first, ties by serialization
    let mut candidates: Vec<Candidate> = by_product
        .into_iter()
        .map(|(product, paths)| {
            let mut keyed: Vec<(String, ScoredPath)> = paths
                .into_iter()
                .map(|p| (p.path.serialize(graph), p))
                .collect();
            keyed.sort_by(|a, b| b.1.score.total_cmp(&a.1.score).then_with(|| a.0.cmp(&b.0)));
            keyed.truncate(cfg.per_product_cap);
            Candidate {
                product,
                relevance: None,
                paths: keyed.into_iter().map(|(_, p)| p).collect(),
            }
        })
        .collect();

    // cap candidates per user: highest kept score mass first, ties by product id
    candidates.sort_by(|a, b| {
        score_mass(b)
            .total_cmp(&score_mass(a))
            .then_with(|| graph.entity_id(a.product).cmp(graph.entity_id(b.product)))
    });
    candidates.truncate(cfg.candidate_cap);

    Ok(CandidateSet {
        user,
        candidates,
        warnings: Vec::new(),
    })
}

fn score_mass(candidate: &Candidate) -> f64 {
    candidate.paths.iter().map(|p| p.score).sum()
}

fn walk(
    graph: &KnowledgeGraph,
    seen: &HashSet<EntityIdx>,
    cfg: &EnumerationConfig,
    nodes: &mut Vec<EntityIdx>,
    edges: &mut Vec<PathEdge>,
    on_path: &mut HashSet<EntityIdx>,
    out: &mut HashMap<EntityIdx, Vec<ScoredPath>>,
) {
    let current = *nodes.last().expect("walk starts with the user");
    let depth = edges.len();
    if depth == cfg.max_edges {
        return;
    }
    let forward = graph.neighbors_out(current).iter().map(|&(r, e)| (r, e, true));
    let backward = graph.neighbors_in(current).iter().map(|&(r, e)| (r, e, false));
    for (relation, next, is_forward) in forward.chain(backward) {
        if on_path.contains(&next) {
            continue;
        }
        if graph.is_product(next) {
            if depth == 0 {
                // first hop: must be a training interaction
                if seen.contains(&next) {
                    descend(graph, seen, cfg, nodes, edges, on_path, out, relation, next, is_forward);
                }
            } else if depth >= 2 && !seen.contains(&next) {
                // reached an unseen product: emit and stop, products never
                // appear inside the chain
                nodes.push(next);
                edges.push(PathEdge { relation, forward: is_forward });
                let path = Path::new(nodes.clone(), edges.clone()).expect("alternation holds");
                let score = score_path(&path, graph);
                out.entry(next).or_default().push(ScoredPath { path, score });
                nodes.pop();
                edges.pop();
            }
        } else if depth >= 1 {
            // non-product entity inside the chain
            descend(graph, seen, cfg, nodes, edges, on_path, out, relation, next, is_forward);
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn descend(
    graph: &KnowledgeGraph,
    seen: &HashSet<EntityIdx>,
    cfg: &EnumerationConfig,
    nodes: &mut Vec<EntityIdx>,
    edges: &mut Vec<PathEdge>,
    on_path: &mut HashSet<EntityIdx>,
    out: &mut HashMap<EntityIdx, Vec<ScoredPath>>,
    relation: crate::kg::RelIdx,
    next: EntityIdx,
    forward: bool,
) {
    nodes.push(next);
    edges.push(PathEdge { relation, forward });
    on_path.insert(next);
    walk(graph, seen, cfg, nodes, edges, on_path, out);
    on_path.remove(&next);
    nodes.pop();
    edges.pop();
}

/// Fill predicted relevances: per product, sum its path scores, then min-max
/// normalize over the user's candidates. A single candidate (or all-equal
/// sums) scores 1.0.
pub fn baseline_relevance(set: &mut CandidateSet) {
    let sums: Vec<f64> = set.candidates.iter().map(score_mass).collect();
    let normalized = crate::props::min_max_normalize(&sums);
    for (candidate, relevance) in set.candidates.iter_mut().zip(normalized) {
        candidate.relevance = Some(relevance);
    }
}

/// Write candidate sets in the `paths.tsv` interchange format:
/// `user <TAB> product <TAB> relevance <TAB> path_score <TAB> serialized_path`.
///
/// Floats use the shortest round-trip representation so that reading the
/// file back reproduces the exact values.
pub fn write_paths_tsv(
    path: &FsPath,
    sets: &[CandidateSet],
    graph: &KnowledgeGraph,
) -> Result<()> {
    let mut out = String::new();
    for set in sets {
        for candidate in &set.candidates {
            let relevance = candidate.relevance_or_err()?;
            for scored in &candidate.paths {
                out.push_str(&format!(
                    "{}\t{}\t{}\t{}\t{}\n",
                    graph.entity_id(set.user),
                    graph.entity_id(candidate.product),
                    relevance,
                    scored.score,
                    scored.path.serialize(graph),
                ));
            }
        }
    }
    write_atomic(path, &out)
}

/// Read a `paths.tsv` file into per-user candidate sets, sorted by user id.
///
/// Every path must parse against the graph, validate against its triples,
/// decompose structurally, start at the line's user and end at the line's
/// product. A product's relevance must be identical on all of its lines.
/// When a training log is given, candidates seen in training are rejected.
pub fn read_paths_tsv(
    file: &FsPath,
    graph: &KnowledgeGraph,
    train: Option<&InteractionLog>,
) -> Result<Vec<CandidateSet>> {
    struct ProductAcc {
        relevance: f64,
        paths: Vec<ScoredPath>,
        serials: HashSet<String>,
    }
    let mut users: Vec<EntityIdx> = Vec::new();
    let mut acc: HashMap<EntityIdx, Vec<(EntityIdx, ProductAcc)>> = HashMap::new();

    for rec in tsv::read_records(file, 5)? {
        let fail = |msg: String| tsv::ingest_error(file, rec.line_no, msg);
        let user = graph
            .entity(&rec.fields[0])
            .ok_or_else(|| fail(format!("unknown user '{}'", rec.fields[0])))?;
        let product = graph
            .entity(&rec.fields[1])
            .ok_or_else(|| fail(format!("unknown product '{}'", rec.fields[1])))?;
        let relevance: f64 = rec.fields[2]
            .parse()
            .map_err(|_| fail(format!("bad relevance '{}'", rec.fields[2])))?;
        if !(0.0..=1.0).contains(&relevance) {
            return Err(fail(format!("relevance {relevance} outside [0, 1]")));
        }
        let score: f64 = rec.fields[3]
            .parse()
            .map_err(|_| fail(format!("bad path score '{}'", rec.fields[3])))?;
        if score.is_nan() || score <= 0.0 || score > 1.0 {
            return Err(fail(format!("path score {score} outside (0, 1]")));
        }
        let path = Path::parse(&rec.fields[4], graph).map_err(|e| fail(e.to_string()))?;
        path.validate(graph).map_err(|e| fail(e.to_string()))?;
        let decomposition = decompose_path(&path, graph).map_err(|e| fail(e.to_string()))?;
        if decomposition.user != user {
            return Err(fail(format!(
                "path starts at '{}' but the line names user '{}'",
                graph.entity_id(decomposition.user),
                rec.fields[0]
            )));
        }
        if decomposition.recommended_product != product {
            return Err(fail(format!(
                "path ends at '{}' but the line names product '{}'",
                graph.entity_id(decomposition.recommended_product),
                rec.fields[1]
            )));
        }
        if let Some(train) = train {
            if train.contains_pair(user, product) {
                return Err(fail(format!(
                    "product '{}' is in user '{}'s training interactions and cannot be a candidate",
                    rec.fields[1], rec.fields[0]
                )));
            }
        }

        let products = acc.entry(user).or_insert_with(|| {
            users.push(user);
            Vec::new()
        });
        let serial = rec.fields[4].clone();
        match products.iter_mut().find(|(p, _)| *p == product) {
            Some((_, product_acc)) => {
                if product_acc.relevance != relevance {
                    return Err(fail(format!(
                        "inconsistent relevance for product '{}': {} vs {}",
                        rec.fields[1], product_acc.relevance, relevance
                    )));
                }
                if !product_acc.serials.insert(serial) {
                    return Err(fail(format!("duplicate path line '{}'", rec.fields[4])));
                }
                product_acc.paths.push(ScoredPath { path, score });
            }
            None => {
                products.push((
                    product,
                    ProductAcc {
                        relevance,
                        paths: vec![ScoredPath { path, score }],
                        serials: HashSet::from([serial]),
                    },
                ));
            }
        }
    }

    users.sort_by(|a, b| graph.entity_id(*a).cmp(graph.entity_id(*b)));
    let mut sets = Vec::with_capacity(users.len());
    for user in users {
        let products = acc.remove(&user).expect("user was recorded");
        let mut candidates: Vec<Candidate> = products
            .into_iter()
            .map(|(product, product_acc)| {
                let mut keyed: Vec<(String, ScoredPath)> = product_acc
                    .paths
                    .into_iter()
                    .map(|p| (p.path.serialize(graph), p))
                    .collect();
                keyed.sort_by(|a, b| b.1.score.total_cmp(&a.1.score).then_with(|| a.0.cmp(&b.0)));
                Candidate {
                    product,
                    relevance: Some(product_acc.relevance),
                    paths: keyed.into_iter().map(|(_, p)| p).collect(),
                }
            })
            .collect();
        candidates.sort_by(|a, b| graph.entity_id(a.product).cmp(graph.entity_id(b.product)));
        sets.push(CandidateSet {
            user,
            candidates,
            warnings: Vec::new(),
        });
    }
    Ok(sets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::GraphBuilder;

    fn chain_graph() -> (KnowledgeGraph, InteractionLog) {
        let mut b = GraphBuilder::new();
        b.declare_entity("u1", "user").unwrap();
        b.declare_entity("m1", "product").unwrap();
        b.declare_entity("m2", "product").unwrap();
        b.declare_entity("d1", "director").unwrap();
        b.add_triple("u1", "watched", "m1").unwrap();
        b.add_triple("m1", "directed_by", "d1").unwrap();
        b.add_triple("d1", "directed", "m2").unwrap();
        let g = b.finish().unwrap();
        let u1 = g.entity("u1").unwrap();
        let m1 = g.entity("m1").unwrap();
        let log = InteractionLog::from_events(&g, [(u1, m1, 100)]);
        (g, log)
    }

    #[test]
    fn chain_yields_single_candidate_with_unit_score() {
        let (g, log) = chain_graph();
        let u1 = g.entity("u1").unwrap();
        let set = enumerate_paths(&g, &log, u1, &EnumerationConfig::default()).unwrap();
        assert_eq!(set.candidates.len(), 1);
        let candidate = &set.candidates[0];
        assert_eq!(g.entity_id(candidate.product), "m2");
        assert_eq!(candidate.paths.len(), 1);
        assert_eq!(
            candidate.paths[0].path.serialize(&g),
            "u1|watched>|m1|directed_by>|d1|directed>|m2"
        );
        // every node on the walk has exactly one available move
        assert_eq!(candidate.paths[0].score, 1.0);
    }

    #[test]
    fn seen_products_are_excluded() {
        let (g, _) = chain_graph();
        let u1 = g.entity("u1").unwrap();
        let m1 = g.entity("m1").unwrap();
        let m2 = g.entity("m2").unwrap();
        let log = InteractionLog::from_events(&g, [(u1, m1, 100), (u1, m2, 200)]);
        // m2 now sits in training, and there is no path to anything else
        let set = enumerate_paths(&g, &log, u1, &EnumerationConfig::default()).unwrap();
        assert!(set.is_empty());
        assert!(set.warnings.is_empty());
    }

    #[test]
    fn no_training_interactions_warns() {
        let (g, _) = chain_graph();
        let u1 = g.entity("u1").unwrap();
        let empty = InteractionLog::from_events(&g, []);
        let set = enumerate_paths(&g, &empty, u1, &EnumerationConfig::default()).unwrap();
        assert!(set.is_empty());
        assert_eq!(set.warnings.len(), 1);
    }

    fn star_graph(n_unseen: usize) -> (KnowledgeGraph, InteractionLog) {
        let mut b = GraphBuilder::new();
        b.declare_entity("u1", "user").unwrap();
        b.declare_entity("m0", "product").unwrap();
        b.declare_entity("d1", "director").unwrap();
        b.add_triple("u1", "watched", "m0").unwrap();
        b.add_triple("d1", "directed", "m0").unwrap();
        for i in 1..=n_unseen {
            let id = format!("m{i}");
            b.declare_entity(&id, "product").unwrap();
            b.add_triple("d1", "directed", &id).unwrap();
        }
        let g = b.finish().unwrap();
        let u1 = g.entity("u1").unwrap();
        let m0 = g.entity("m0").unwrap();
        let log = InteractionLog::from_events(&g, [(u1, m0, 100)]);
        (g, log)
    }

    #[test]
    fn candidate_cap_keeps_highest_scores() {
        let (g, log) = star_graph(5);
        let u1 = g.entity("u1").unwrap();
        let cfg = EnumerationConfig {
            candidate_cap: 3,
            ..EnumerationConfig::default()
        };
        let set = enumerate_paths(&g, &log, u1, &cfg).unwrap();
        assert_eq!(set.candidates.len(), 3);
        // all five walks have equal scores, so the id tie-break keeps m1..m3
        let ids: Vec<&str> = set
            .candidates
            .iter()
            .map(|c| g.entity_id(c.product))
            .collect();
        assert_eq!(ids, vec!["m1", "m2", "m3"]);
    }

    #[test]
    fn score_is_product_of_reciprocal_choice_counts() {
        let (g, log) = star_graph(5);
        let u1 = g.entity("u1").unwrap();
        let set = enumerate_paths(&g, &log, u1, &EnumerationConfig::default()).unwrap();
        // u1 has 1 move; m0 has degree 2, one move after arrival; d1 has
        // degree 6, five moves after arrival
        let expected = 1.0 / (1.0 * 1.0 * 5.0);
        for candidate in &set.candidates {
            assert!((candidate.paths[0].score - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn hub_paths_score_lower() {
        let mut b = GraphBuilder::new();
        b.declare_entity("u1", "user").unwrap();
        b.declare_entity("m0", "product").unwrap();
        b.declare_entity("mt", "product").unwrap();
        b.declare_entity("niche", "tag").unwrap();
        b.declare_entity("hub", "tag").unwrap();
        b.add_triple("u1", "watched", "m0").unwrap();
        b.add_triple("m0", "tagged", "niche").unwrap();
        b.add_triple("m0", "tagged", "hub").unwrap();
        b.add_triple("mt", "tagged", "niche").unwrap();
        b.add_triple("mt", "tagged", "hub").unwrap();
        for i in 0..8 {
            let id = format!("x{i}");
            b.declare_entity(&id, "product").unwrap();
            b.add_triple(&id, "tagged", "hub").unwrap();
        }
        let g = b.finish().unwrap();
        let u1 = g.entity("u1").unwrap();
        let m0 = g.entity("m0").unwrap();
        let log = InteractionLog::from_events(&g, [(u1, m0, 100)]);
        let set = enumerate_paths(&g, &log, u1, &EnumerationConfig::default()).unwrap();
        let target = set
            .candidates
            .iter()
            .find(|c| g.entity_id(c.product) == "mt")
            .unwrap();
        let score_of = |tag: &str| {
            target
                .paths
                .iter()
                .find(|p| p.path.serialize(&g).contains(tag))
                .map(|p| p.score)
                .unwrap()
        };
        assert!(score_of("niche") > score_of("hub"));
    }

    #[test]
    fn baseline_relevance_is_min_max_of_score_sums() {
        let (g, log) = chain_graph();
        let u1 = g.entity("u1").unwrap();
        let mut set = enumerate_paths(&g, &log, u1, &EnumerationConfig::default()).unwrap();
        baseline_relevance(&mut set);
        // single candidate: degenerate normalization
        assert_eq!(set.candidates[0].relevance, Some(1.0));
    }

    #[test]
    fn baseline_relevance_normalizes_sums() {
        let (g, log) = chain_graph();
        let u1 = g.entity("u1").unwrap();
        let set = enumerate_paths(&g, &log, u1, &EnumerationConfig::default()).unwrap();
        let template = set.candidates[0].clone();
        let with_sum = |sum: f64| Candidate {
            paths: vec![ScoredPath {
                path: template.paths[0].path.clone(),
                score: sum,
            }],
            ..template.clone()
        };
        let mut synthetic = CandidateSet {
            user: u1,
            candidates: vec![with_sum(0.5), with_sum(0.3), with_sum(0.1)],
            warnings: Vec::new(),
        };
        baseline_relevance(&mut synthetic);
        let relevances: Vec<f64> = synthetic
            .candidates
            .iter()
            .map(|c| c.relevance.unwrap())
            .collect();
        for (actual, expected) in relevances.iter().zip([1.0, 0.5, 0.0]) {
            assert!((actual - expected).abs() < 1e-12, "{relevances:?}");
        }

        // equal sums: all 1.0 under the degenerate all-equal rule
        let mut equal = CandidateSet {
            user: u1,
            candidates: vec![with_sum(0.2), with_sum(0.2)],
            warnings: Vec::new(),
        };
        baseline_relevance(&mut equal);
        assert!(equal.candidates.iter().all(|c| c.relevance == Some(1.0)));
    }

    #[test]
    fn path_scores_match_independent_recomputation() {
        // denser graph with mixed fan-outs
        let mut b = GraphBuilder::new();
        b.declare_entity("u1", "user").unwrap();
        let mut triples: Vec<(String, String, String)> = Vec::new();
        let mut add = |b: &mut GraphBuilder, h: &str, r: &str, t: &str| {
            b.add_triple(h, r, t).unwrap();
            triples.push((h.to_string(), r.to_string(), t.to_string()));
        };
        for i in 0..6 {
            b.declare_entity(&format!("p{i}"), "product").unwrap();
        }
        for j in 0..3 {
            b.declare_entity(&format!("a{j}"), "attr").unwrap();
        }
        add(&mut b, "u1", "bought", "p0");
        add(&mut b, "u1", "bought", "p1");
        for i in 0..6 {
            for j in 0..3 {
                if (i + j) % 2 == 0 {
                    add(&mut b, &format!("p{i}"), "has", &format!("a{j}"));
                }
            }
        }
        let g = b.finish().unwrap();
        let u1 = g.entity("u1").unwrap();
        let log = InteractionLog::from_events(
            &g,
            [(u1, g.entity("p0").unwrap(), 1), (u1, g.entity("p1").unwrap(), 2)],
        );
        let set = enumerate_paths(&g, &log, u1, &EnumerationConfig::default()).unwrap();
        assert!(!set.is_empty());

        // recompute every score from the raw triple list
        let incident = |id: &str| {
            triples
                .iter()
                .filter(|(h, _, t)| h == id || t == id)
                .count()
        };
        for candidate in &set.candidates {
            for scored in &candidate.paths {
                let nodes = scored.path.nodes();
                let mut expected = 1.0;
                for (i, &node) in nodes[..nodes.len() - 1].iter().enumerate() {
                    let degree = incident(g.entity_id(node));
                    let choices = if i == 0 { degree } else { degree - 1 };
                    expected /= choices.max(1) as f64;
                }
                assert!(
                    (scored.score - expected).abs() < 1e-12,
                    "score mismatch on {}",
                    scored.path.serialize(&g)
                );
            }
        }
    }

    #[test]
    fn every_emitted_path_decomposes_and_starts_at_user() {
        let (g, log) = star_graph(4);
        let u1 = g.entity("u1").unwrap();
        let set = enumerate_paths(&g, &log, u1, &EnumerationConfig::default()).unwrap();
        for candidate in &set.candidates {
            for scored in &candidate.paths {
                let d = decompose_path(&scored.path, &g).unwrap();
                assert_eq!(d.user, u1);
                assert_eq!(d.recommended_product, candidate.product);
            }
        }
    }

    #[test]
    fn paths_tsv_round_trips() {
        let (g, log) = star_graph(3);
        let u1 = g.entity("u1").unwrap();
        let mut set = enumerate_paths(&g, &log, u1, &EnumerationConfig::default()).unwrap();
        baseline_relevance(&mut set);
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("paths.tsv");
        write_paths_tsv(&file, std::slice::from_ref(&set), &g).unwrap();
        let read = read_paths_tsv(&file, &g, Some(&log)).unwrap();
        assert_eq!(read.len(), 1);
        assert_eq!(read[0].user, set.user);
        assert_eq!(read[0].candidates.len(), set.candidates.len());
        for candidate in &read[0].candidates {
            let original = set
                .candidates
                .iter()
                .find(|c| c.product == candidate.product)
                .unwrap();
            assert_eq!(candidate.relevance, original.relevance);
            assert_eq!(candidate.paths, original.paths);
        }
    }

    #[test]
    fn inconsistent_relevance_is_rejected() {
        let (g, _) = chain_graph();
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("paths.tsv");
        std::fs::write(
            &file,
            "u1\tm2\t0.5\t1\tu1|watched>|m1|directed_by>|d1|directed>|m2\n\
             u1\tm2\t0.7\t0.5\tu1|watched>|m1|directed_by>|d1|directed>|m2\n",
        )
        .unwrap();
        let err = read_paths_tsv(&file, &g, None).unwrap_err();
        assert!(err.to_string().contains("inconsistent relevance"));
    }

    #[test]
    fn training_candidate_in_paths_file_is_rejected() {
        let (g, log) = chain_graph();
        let u1 = g.entity("u1").unwrap();
        let m2 = g.entity("m2").unwrap();
        let with_m2 = InteractionLog::from_events(
            &g,
            log.interactions(u1)
                .iter()
                .map(|i| (u1, i.product, i.timestamp))
                .chain([(u1, m2, 999)]),
        );
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("paths.tsv");
        std::fs::write(
            &file,
            "u1\tm2\t1\t1\tu1|watched>|m1|directed_by>|d1|directed>|m2\n",
        )
        .unwrap();
        assert!(read_paths_tsv(&file, &g, Some(&with_m2)).is_err());
    }
}
