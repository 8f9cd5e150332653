//! Explanation-property scores: linking interaction recency (LIR), shared
//! entity popularity (SEP), and explanation type diversity (ETD).
//!
//! LIR smooths each user's interaction timestamps with an exponentially
//! weighted moving average, `lir_i = (1 - beta) * lir_{i-1} + beta * t_i`
//! with `lir_1 = t_1`, then min-max normalizes per user. SEP applies the
//! same recurrence to per-type entity in-degrees sorted ascending, then
//! min-max normalizes per entity type. ETD is the number of distinct path
//! types in a selection relative to `min(k, total types)`.
//!
//! Tables are recomputed in batch; appending one interaction would only
//! extend the tail of a user's recurrence, but no incremental update is
//! provided. Construction parallelizes per user (LIR) and per entity type
//! (SEP); the finished tables are immutable.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path as FsPath;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kg::{EntityIdx, InteractionLog, KnowledgeGraph, RelIdx};
use crate::path::{decompose_path, Path};
use crate::tsv::{self, write_atomic};

fn check_beta(beta: f64, name: &str) -> Result<()> {
    if !(0.0..=1.0).contains(&beta) || beta.is_nan() {
        return Err(Error::Config(format!("{name} must lie in [0, 1], got {beta}")));
    }
    Ok(())
}

/// The smoothing recurrence shared by LIR and SEP: first value kept as-is,
/// every later value blended as `(1 - beta) * previous + beta * current`.
pub fn ewma(values: &[f64], beta: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    for &v in values {
        let next = match out.last() {
            None => v,
            Some(&prev) => (1.0 - beta) * prev + beta * v,
        };
        out.push(next);
    }
    out
}

/// Min-max normalize to [0, 1]. All-equal inputs (including singletons) map
/// to 1.0: a sole interaction is the user's most recent, a sole entity is
/// its type's most popular.
pub fn min_max_normalize(values: &[f64]) -> Vec<f64> {
    let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in values {
        min = min.min(v);
        max = max.max(v);
    }
    if values.is_empty() || min == max {
        return vec![1.0; values.len()];
    }
    values.iter().map(|&v| (v - min) / (max - min)).collect()
}

/// Normalized recency of each (user, product) interaction pair.
#[derive(Debug, Clone, PartialEq)]
pub struct LirTable {
    values: HashMap<(EntityIdx, EntityIdx), f64>,
    beta: f64,
}

/// Compute the LIR table from a chronologically sorted interaction log.
///
/// The recurrence runs over every event of a user; when a user interacted
/// with the same product more than once, the pair keeps the value of the
/// most recent occurrence.
pub fn compute_lir_table(log: &InteractionLog, beta: f64) -> Result<LirTable> {
    check_beta(beta, "beta_lir")?;
    let users: Vec<EntityIdx> = log.users().collect();
    let per_user: Vec<(EntityIdx, Vec<(EntityIdx, f64)>)> = users
        .par_iter()
        .map(|&user| {
            let history = log.interactions(user);
            let timestamps: Vec<f64> = history.iter().map(|i| i.timestamp as f64).collect();
            let normalized = min_max_normalize(&ewma(&timestamps, beta));
            let entries = history
                .iter()
                .zip(normalized)
                .map(|(interaction, value)| (interaction.product, value))
                .collect();
            (user, entries)
        })
        .collect();

    let mut values = HashMap::new();
    for (user, entries) in per_user {
        for (product, value) in entries {
            // chronological insertion: the most recent occurrence wins
            values.insert((user, product), value);
        }
    }
    Ok(LirTable { values, beta })
}

impl LirTable {
    /// Assemble a table from externally computed values in [0, 1]; the decay
    /// is recorded as unknown.
    pub fn from_values<I>(values: I) -> Result<Self>
    where
        I: IntoIterator<Item = ((EntityIdx, EntityIdx), f64)>,
    {
        let values: HashMap<_, _> = values.into_iter().collect();
        for &v in values.values() {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Data(format!("lir value {v} outside [0, 1]")));
            }
        }
        Ok(LirTable {
            values,
            beta: f64::NAN,
        })
    }

    pub fn get(&self, user: EntityIdx, product: EntityIdx) -> Option<f64> {
        self.values.get(&(user, product)).copied()
    }

    pub fn contains(&self, user: EntityIdx, product: EntityIdx) -> bool {
        self.values.contains_key(&(user, product))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Decay parameter the table was built with; NaN when loaded from a file
    /// that does not carry it.
    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn iter(&self) -> impl Iterator<Item = ((EntityIdx, EntityIdx), f64)> + '_ {
        self.values.iter().map(|(&k, &v)| (k, v))
    }

    /// Dump as `lir.tsv`: `user <TAB> product <TAB> value`, 9 decimal digits,
    /// sorted by user then product id.
    pub fn dump(&self, path: &FsPath, graph: &KnowledgeGraph) -> Result<()> {
        let mut rows: Vec<(&str, &str, f64)> = self
            .values
            .iter()
            .map(|(&(u, p), &v)| (graph.entity_id(u), graph.entity_id(p), v))
            .collect();
        rows.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut out = format!("# beta={}\n", self.beta);
        for (user, product, value) in rows {
            out.push_str(&format!("{user}\t{product}\t{}\n", tsv::fmt_value(value)));
        }
        write_atomic(path, &out)
    }

    /// Load a dumped table. Values must parse into [0, 1].
    pub fn load(path: &FsPath, graph: &KnowledgeGraph) -> Result<Self> {
        let beta = read_beta_comment(path)?;
        let mut values = HashMap::new();
        for rec in tsv::read_records(path, 3)? {
            let user = graph.entity(&rec.fields[0]).ok_or_else(|| {
                tsv::ingest_error(path, rec.line_no, format!("unknown user '{}'", rec.fields[0]))
            })?;
            let product = graph.entity(&rec.fields[1]).ok_or_else(|| {
                tsv::ingest_error(path, rec.line_no, format!("unknown product '{}'", rec.fields[1]))
            })?;
            let value = parse_unit_value(&rec.fields[2])
                .map_err(|msg| tsv::ingest_error(path, rec.line_no, msg))?;
            values.insert((user, product), value);
        }
        Ok(LirTable { values, beta })
    }
}

/// Normalized popularity of each entity, grouped by entity type.
#[derive(Debug, Clone, PartialEq)]
pub struct SepTable {
    values: HashMap<EntityIdx, f64>,
    beta: f64,
}

/// Compute the SEP table from the graph's in-degree ranking.
///
/// An entity's popularity is the number of triples it is involved in, as
/// head or tail. Entities of each type are sorted ascending by
/// (popularity, entity id); the recurrence then runs over the sorted
/// popularities and the result is normalized per type.
pub fn compute_sep_table(graph: &KnowledgeGraph, beta: f64) -> Result<SepTable> {
    check_beta(beta, "beta_sep")?;
    let types: Vec<_> = graph.types().collect();
    let per_type: Vec<Vec<(EntityIdx, f64)>> = types
        .par_iter()
        .map(|&ty| {
            let mut ranked: Vec<(EntityIdx, usize)> = graph
                .entities_of_type(ty)
                .map(|e| (e, graph.degree(e)))
                .collect();
            ranked.sort_by(|a, b| {
                a.1.cmp(&b.1)
                    .then_with(|| graph.entity_id(a.0).cmp(graph.entity_id(b.0)))
            });
            let degrees: Vec<f64> = ranked.iter().map(|&(_, d)| d as f64).collect();
            let normalized = min_max_normalize(&ewma(&degrees, beta));
            ranked
                .into_iter()
                .zip(normalized)
                .map(|((e, _), v)| (e, v))
                .collect()
        })
        .collect();

    let mut values = HashMap::new();
    for entries in per_type {
        values.extend(entries);
    }
    Ok(SepTable { values, beta })
}

impl SepTable {
    /// Assemble a table from externally computed values in [0, 1]; the decay
    /// is recorded as unknown.
    pub fn from_values<I>(values: I) -> Result<Self>
    where
        I: IntoIterator<Item = (EntityIdx, f64)>,
    {
        let values: HashMap<_, _> = values.into_iter().collect();
        for &v in values.values() {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Data(format!("sep value {v} outside [0, 1]")));
            }
        }
        Ok(SepTable {
            values,
            beta: f64::NAN,
        })
    }

    pub fn get(&self, entity: EntityIdx) -> Option<f64> {
        self.values.get(&entity).copied()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Dump as `sep.tsv`: `entity <TAB> value`, 9 decimal digits, sorted by entity id.
    pub fn dump(&self, path: &FsPath, graph: &KnowledgeGraph) -> Result<()> {
        let mut rows: Vec<(&str, f64)> = self
            .values
            .iter()
            .map(|(&e, &v)| (graph.entity_id(e), v))
            .collect();
        rows.sort_unstable_by(|a, b| a.0.cmp(b.0));
        let mut out = format!("# beta={}\n", self.beta);
        for (entity, value) in rows {
            out.push_str(&format!("{entity}\t{}\n", tsv::fmt_value(value)));
        }
        write_atomic(path, &out)
    }

    pub fn load(path: &FsPath, graph: &KnowledgeGraph) -> Result<Self> {
        let beta = read_beta_comment(path)?;
        let mut values = HashMap::new();
        for rec in tsv::read_records(path, 2)? {
            let entity = graph.entity(&rec.fields[0]).ok_or_else(|| {
                tsv::ingest_error(path, rec.line_no, format!("unknown entity '{}'", rec.fields[0]))
            })?;
            let value = parse_unit_value(&rec.fields[1])
                .map_err(|msg| tsv::ingest_error(path, rec.line_no, msg))?;
            values.insert(entity, value);
        }
        Ok(SepTable { values, beta })
    }
}

fn read_beta_comment(path: &FsPath) -> Result<f64> {
    let contents = fs::read_to_string(path)
        .map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?;
    for line in contents.lines() {
        if let Some(rest) = line.strip_prefix("# beta=") {
            return Ok(rest.trim().parse().unwrap_or(f64::NAN));
        }
    }
    Ok(f64::NAN)
}

fn parse_unit_value(field: &str) -> std::result::Result<f64, String> {
    let value: f64 = field
        .parse()
        .map_err(|_| format!("bad value '{field}'"))?;
    if !(0.0..=1.0).contains(&value) {
        return Err(format!("value {value} outside [0, 1]"));
    }
    Ok(value)
}

/// Shared entity novelty: the complement of popularity.
pub fn sen(sep_value: f64) -> f64 {
    1.0 - sep_value
}

/// Context for diversity scoring: the universe of path types observed across
/// all candidate paths, and the target list size.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EtdContext {
    all_types: BTreeSet<RelIdx>,
    k: usize,
}

impl EtdContext {
    pub fn new(all_types: BTreeSet<RelIdx>, k: usize) -> Result<Self> {
        if all_types.is_empty() {
            return Err(Error::Data("empty path-type universe".to_string()));
        }
        if k == 0 {
            return Err(Error::Config("list size k must be at least 1".to_string()));
        }
        Ok(EtdContext { all_types, k })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn num_types(&self) -> usize {
        self.all_types.len()
    }

    pub fn all_types(&self) -> &BTreeSet<RelIdx> {
        &self.all_types
    }

    /// Denominator of the diversity ratio: `min(k, |types|)`.
    pub fn denominator(&self) -> usize {
        self.k.min(self.all_types.len())
    }
}

/// Diversity of a selection of path types: distinct types over
/// `min(k, total types)`. An empty selection scores 0 so that marginal
/// gains are well-defined at the first greedy position.
pub fn etd(selected_types: &[RelIdx], ctx: &EtdContext) -> f64 {
    debug_assert!(selected_types.len() <= ctx.k);
    let unique: BTreeSet<RelIdx> = selected_types.iter().copied().collect();
    etd_from_unique(unique.len(), ctx)
}

/// Diversity from a precomputed distinct-type count.
pub fn etd_from_unique(unique_types: usize, ctx: &EtdContext) -> f64 {
    if unique_types == 0 {
        return 0.0;
    }
    unique_types as f64 / ctx.denominator() as f64
}

/// Look up the two item-level property values of a path: the recency of its
/// linking interaction and the popularity of its shared entity.
///
/// A missing entry is a hard error naming the pair or entity; it means the
/// tables were built from inputs that do not cover the candidate paths.
pub fn path_property_values(
    path: &Path,
    lir: &LirTable,
    sep: &SepTable,
    graph: &KnowledgeGraph,
) -> Result<(f64, f64)> {
    let decomposition = decompose_path(path, graph)?;
    let lir_value = lir
        .get(decomposition.user, decomposition.linked_product)
        .ok_or_else(|| {
            Error::MissingLookup(format!(
                "no recency value for interaction ({}, {})",
                graph.entity_id(decomposition.user),
                graph.entity_id(decomposition.linked_product)
            ))
        })?;
    let sep_value = sep.get(decomposition.shared_entity).ok_or_else(|| {
        Error::MissingLookup(format!(
            "no popularity value for shared entity '{}'",
            graph.entity_id(decomposition.shared_entity)
        ))
    })?;
    Ok((lir_value, sep_value))
}
