//! Knowledge graph and interaction log data model.
//!
//! Entities carry a type label (at least `user` and `product` must be
//! declared); triples connect entities through an open vocabulary of
//! relations. Entity ids are opaque strings in all file formats and are
//! interned to dense indices internally. Graphs and logs are immutable
//! once built and can be shared freely across threads.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path as FsPath;

use crate::error::{Error, Result};
use crate::tsv::{self, ingest_error};

/// Entity type that every graph must declare: the users.
pub const USER_TYPE: &str = "user";
/// Entity type that every graph must declare: the products.
pub const PRODUCT_TYPE: &str = "product";

/// Interned entity index. Never appears in file formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EntityIdx(u32);

/// Interned relation index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RelIdx(u32);

/// Interned entity-type index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TypeIdx(u32);

impl EntityIdx {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl RelIdx {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl TypeIdx {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// A typed, directed triple store with adjacency indices in both directions.
#[derive(Debug, Clone)]
pub struct KnowledgeGraph {
    entity_ids: Vec<String>,
    entity_lookup: HashMap<String, EntityIdx>,
    entity_types: Vec<TypeIdx>,
    type_names: Vec<String>,
    type_lookup: HashMap<String, TypeIdx>,
    relation_labels: Vec<String>,
    relation_lookup: HashMap<String, RelIdx>,
    triples: HashSet<(EntityIdx, RelIdx, EntityIdx)>,
    out_edges: Vec<Vec<(RelIdx, EntityIdx)>>,
    in_edges: Vec<Vec<(RelIdx, EntityIdx)>>,
    duplicate_triples: usize,
}

impl PartialEq for KnowledgeGraph {
    /// Structural equality; the duplicate-triple diagnostic counter is excluded.
    fn eq(&self, other: &Self) -> bool {
        self.entity_ids == other.entity_ids
            && self.entity_types == other.entity_types
            && self.type_names == other.type_names
            && self.relation_labels == other.relation_labels
            && self.triples == other.triples
    }
}

impl KnowledgeGraph {
    /// Load a graph from an `entities.tsv` (`entity_id <TAB> entity_type`) and a
    /// `kg.tsv` (`head <TAB> relation <TAB> tail`) file.
    pub fn load_files(entities_path: &FsPath, kg_path: &FsPath) -> Result<Self> {
        let mut builder = GraphBuilder::new();
        Self::declare_from_file(&mut builder, entities_path)?;
        for rec in tsv::read_records(kg_path, 3)? {
            builder
                .add_triple(&rec.fields[0], &rec.fields[1], &rec.fields[2])
                .map_err(|e| ingest_error(kg_path, rec.line_no, e.to_string()))?;
        }
        builder.finish()
    }

    /// Load only the entity declarations; useful when an operation needs
    /// entity types but no triples (splitting, for example).
    pub fn load_entities_only(entities_path: &FsPath) -> Result<Self> {
        let mut builder = GraphBuilder::new();
        Self::declare_from_file(&mut builder, entities_path)?;
        builder.finish()
    }

    fn declare_from_file(builder: &mut GraphBuilder, entities_path: &FsPath) -> Result<()> {
        for rec in tsv::read_records(entities_path, 2)? {
            builder
                .declare_entity(&rec.fields[0], &rec.fields[1])
                .map_err(|e| ingest_error(entities_path, rec.line_no, e.to_string()))?;
        }
        Ok(())
    }

    pub fn entity(&self, id: &str) -> Option<EntityIdx> {
        self.entity_lookup.get(id).copied()
    }

    pub fn entity_id(&self, e: EntityIdx) -> &str {
        &self.entity_ids[e.index()]
    }

    pub fn entity_type(&self, e: EntityIdx) -> TypeIdx {
        self.entity_types[e.index()]
    }

    pub fn type_name(&self, t: TypeIdx) -> &str {
        &self.type_names[t.index()]
    }

    pub fn type_by_name(&self, name: &str) -> Option<TypeIdx> {
        self.type_lookup.get(name).copied()
    }

    pub fn is_user(&self, e: EntityIdx) -> bool {
        self.type_name(self.entity_type(e)) == USER_TYPE
    }

    pub fn is_product(&self, e: EntityIdx) -> bool {
        self.type_name(self.entity_type(e)) == PRODUCT_TYPE
    }

    pub fn relation(&self, label: &str) -> Option<RelIdx> {
        self.relation_lookup.get(label).copied()
    }

    pub fn relation_label(&self, r: RelIdx) -> &str {
        &self.relation_labels[r.index()]
    }

    pub fn has_triple(&self, head: EntityIdx, relation: RelIdx, tail: EntityIdx) -> bool {
        self.triples.contains(&(head, relation, tail))
    }

    /// Outgoing edges of `e`, sorted by (relation, tail) for deterministic traversal.
    pub fn neighbors_out(&self, e: EntityIdx) -> &[(RelIdx, EntityIdx)] {
        &self.out_edges[e.index()]
    }

    /// Incoming edges of `e` as (relation, head), sorted like [`Self::neighbors_out`].
    pub fn neighbors_in(&self, e: EntityIdx) -> &[(RelIdx, EntityIdx)] {
        &self.in_edges[e.index()]
    }

    /// Number of triples the entity is involved in, as head or tail.
    pub fn degree(&self, e: EntityIdx) -> usize {
        self.out_edges[e.index()].len() + self.in_edges[e.index()].len()
    }

    pub fn num_entities(&self) -> usize {
        self.entity_ids.len()
    }

    pub fn num_triples(&self) -> usize {
        self.triples.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relation_labels.len()
    }

    pub fn num_types(&self) -> usize {
        self.type_names.len()
    }

    /// How many ingested triples were dropped as exact duplicates.
    pub fn duplicate_triples(&self) -> usize {
        self.duplicate_triples
    }

    pub fn entities(&self) -> impl Iterator<Item = EntityIdx> + '_ {
        (0..self.entity_ids.len() as u32).map(EntityIdx)
    }

    pub fn entities_of_type(&self, t: TypeIdx) -> impl Iterator<Item = EntityIdx> + '_ {
        self.entities().filter(move |e| self.entity_type(*e) == t)
    }

    pub fn types(&self) -> impl Iterator<Item = TypeIdx> + '_ {
        (0..self.type_names.len() as u32).map(TypeIdx)
    }

    /// A new graph extended with extra triples over the same entity set.
    ///
    /// Relations are registered on first sight, as during ingestion. The
    /// receiver is left untouched; graphs stay immutable after construction.
    pub fn with_triples<I>(&self, extra: I) -> Result<KnowledgeGraph>
    where
        I: IntoIterator<Item = (EntityIdx, String, EntityIdx)>,
    {
        let mut builder = GraphBuilder::from_graph(self);
        for (head, relation, tail) in extra {
            let rel = builder.register_relation(&relation)?;
            builder.add_triple_idx(head, rel, tail);
        }
        builder.finish()
    }
}

/// Single-writer construction phase of a [`KnowledgeGraph`].
#[derive(Debug, Default)]
pub struct GraphBuilder {
    entity_ids: Vec<String>,
    entity_lookup: HashMap<String, EntityIdx>,
    entity_types: Vec<TypeIdx>,
    type_names: Vec<String>,
    type_lookup: HashMap<String, TypeIdx>,
    relation_labels: Vec<String>,
    relation_lookup: HashMap<String, RelIdx>,
    triples: HashSet<(EntityIdx, RelIdx, EntityIdx)>,
    triple_order: Vec<(EntityIdx, RelIdx, EntityIdx)>,
    duplicate_triples: usize,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    fn from_graph(graph: &KnowledgeGraph) -> Self {
        GraphBuilder {
            entity_ids: graph.entity_ids.clone(),
            entity_lookup: graph.entity_lookup.clone(),
            entity_types: graph.entity_types.clone(),
            type_names: graph.type_names.clone(),
            type_lookup: graph.type_lookup.clone(),
            relation_labels: graph.relation_labels.clone(),
            relation_lookup: graph.relation_lookup.clone(),
            triples: graph.triples.clone(),
            triple_order: {
                let mut v: Vec<_> = graph.triples.iter().copied().collect();
                v.sort_unstable();
                v
            },
            duplicate_triples: graph.duplicate_triples,
        }
    }

    /// Declare an entity with its type. Re-declaring with the same type is a
    /// no-op so that loading the same records twice is idempotent; conflicting
    /// types are an error.
    pub fn declare_entity(&mut self, id: &str, entity_type: &str) -> Result<EntityIdx> {
        validate_token(id, "entity id")?;
        validate_token(entity_type, "entity type")?;
        let type_idx = self.register_type(entity_type);
        if let Some(&existing) = self.entity_lookup.get(id) {
            if self.entity_types[existing.index()] != type_idx {
                return Err(Error::Data(format!(
                    "entity '{}' re-declared as type '{}' (was '{}')",
                    id,
                    entity_type,
                    self.type_names[self.entity_types[existing.index()].index()]
                )));
            }
            return Ok(existing);
        }
        let idx = EntityIdx(self.entity_ids.len() as u32);
        self.entity_ids.push(id.to_string());
        self.entity_lookup.insert(id.to_string(), idx);
        self.entity_types.push(type_idx);
        Ok(idx)
    }

    fn register_type(&mut self, name: &str) -> TypeIdx {
        if let Some(&t) = self.type_lookup.get(name) {
            return t;
        }
        let t = TypeIdx(self.type_names.len() as u32);
        self.type_names.push(name.to_string());
        self.type_lookup.insert(name.to_string(), t);
        t
    }

    /// Register a relation label. Relations form an open vocabulary and are
    /// accepted on first sight.
    pub fn register_relation(&mut self, label: &str) -> Result<RelIdx> {
        validate_relation(label)?;
        if let Some(&r) = self.relation_lookup.get(label) {
            return Ok(r);
        }
        let r = RelIdx(self.relation_labels.len() as u32);
        self.relation_labels.push(label.to_string());
        self.relation_lookup.insert(label.to_string(), r);
        Ok(r)
    }

    /// Add a triple by ids. Both endpoints must have been declared.
    /// Returns false when the triple was an exact duplicate.
    pub fn add_triple(&mut self, head: &str, relation: &str, tail: &str) -> Result<bool> {
        let head_idx = self.entity_lookup.get(head).copied().ok_or_else(|| {
            Error::Data(format!("unknown entity '{head}' (no entity-type mapping declared)"))
        })?;
        let tail_idx = self.entity_lookup.get(tail).copied().ok_or_else(|| {
            Error::Data(format!("unknown entity '{tail}' (no entity-type mapping declared)"))
        })?;
        let rel = self.register_relation(relation)?;
        Ok(self.add_triple_idx(head_idx, rel, tail_idx))
    }

    /// Add a triple by interned indices (used when augmenting a graph).
    pub fn add_triple_idx(&mut self, head: EntityIdx, relation: RelIdx, tail: EntityIdx) -> bool {
        if self.triples.insert((head, relation, tail)) {
            self.triple_order.push((head, relation, tail));
            true
        } else {
            self.duplicate_triples += 1;
            false
        }
    }

    /// Freeze the builder into an immutable graph with sorted adjacency.
    pub fn finish(self) -> Result<KnowledgeGraph> {
        for required in [USER_TYPE, PRODUCT_TYPE] {
            if !self.type_lookup.contains_key(required) {
                return Err(Error::Data(format!(
                    "graph declares no '{required}' entities; both '{USER_TYPE}' and '{PRODUCT_TYPE}' types are required"
                )));
            }
        }
        let n = self.entity_ids.len();
        let mut out_edges: Vec<Vec<(RelIdx, EntityIdx)>> = vec![Vec::new(); n];
        let mut in_edges: Vec<Vec<(RelIdx, EntityIdx)>> = vec![Vec::new(); n];
        for &(head, rel, tail) in &self.triple_order {
            out_edges[head.index()].push((rel, tail));
            in_edges[tail.index()].push((rel, head));
        }
        for edges in out_edges.iter_mut().chain(in_edges.iter_mut()) {
            edges.sort_unstable();
        }
        Ok(KnowledgeGraph {
            entity_ids: self.entity_ids,
            entity_lookup: self.entity_lookup,
            entity_types: self.entity_types,
            type_names: self.type_names,
            type_lookup: self.type_lookup,
            relation_labels: self.relation_labels,
            relation_lookup: self.relation_lookup,
            triples: self.triples,
            out_edges,
            in_edges,
            duplicate_triples: self.duplicate_triples,
        })
    }
}

fn validate_token(token: &str, what: &str) -> Result<()> {
    if token.is_empty() {
        return Err(Error::Data(format!("empty {what}")));
    }
    if token.contains(['\t', '|']) {
        return Err(Error::Data(format!(
            "{what} '{token}' contains a reserved character (tab or '|')"
        )));
    }
    Ok(())
}

fn validate_relation(label: &str) -> Result<()> {
    validate_token(label, "relation label")?;
    if label.contains(['>', '<']) {
        return Err(Error::Data(format!(
            "relation label '{label}' contains a reserved direction character ('>' or '<')"
        )));
    }
    Ok(())
}

/// One user-product interaction event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Interaction {
    pub product: EntityIdx,
    pub timestamp: i64,
}

/// Per-user interaction histories, each sorted ascending by timestamp
/// (ties broken by product id for determinism).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InteractionLog {
    by_user: BTreeMap<EntityIdx, Vec<Interaction>>,
}

impl InteractionLog {
    /// Load `interactions.tsv` (`user_id <TAB> product_id <TAB> timestamp_unix_seconds`).
    pub fn load(path: &FsPath, graph: &KnowledgeGraph) -> Result<Self> {
        let mut events = Vec::new();
        for rec in tsv::read_records(path, 3)? {
            let user = graph.entity(&rec.fields[0]).ok_or_else(|| {
                ingest_error(path, rec.line_no, format!("unknown user '{}'", rec.fields[0]))
            })?;
            if !graph.is_user(user) {
                return Err(ingest_error(
                    path,
                    rec.line_no,
                    format!("entity '{}' is not of type '{USER_TYPE}'", rec.fields[0]),
                ));
            }
            let product = graph.entity(&rec.fields[1]).ok_or_else(|| {
                ingest_error(path, rec.line_no, format!("unknown product '{}'", rec.fields[1]))
            })?;
            if !graph.is_product(product) {
                return Err(ingest_error(
                    path,
                    rec.line_no,
                    format!("entity '{}' is not of type '{PRODUCT_TYPE}'", rec.fields[1]),
                ));
            }
            let timestamp: i64 = rec.fields[2].parse().map_err(|_| {
                ingest_error(path, rec.line_no, format!("bad timestamp '{}'", rec.fields[2]))
            })?;
            events.push((user, product, timestamp));
        }
        Ok(Self::from_events(graph, events))
    }

    /// Build from (user, product, timestamp) events, sorting each user's
    /// history by (timestamp, product id). Entity types are the caller's
    /// responsibility here; the file loader has already checked them.
    pub fn from_events<I>(graph: &KnowledgeGraph, events: I) -> Self
    where
        I: IntoIterator<Item = (EntityIdx, EntityIdx, i64)>,
    {
        let mut by_user: BTreeMap<EntityIdx, Vec<Interaction>> = BTreeMap::new();
        for (user, product, timestamp) in events {
            by_user
                .entry(user)
                .or_default()
                .push(Interaction { product, timestamp });
        }
        for history in by_user.values_mut() {
            history.sort_by(|a, b| {
                a.timestamp
                    .cmp(&b.timestamp)
                    .then_with(|| graph.entity_id(a.product).cmp(graph.entity_id(b.product)))
            });
        }
        InteractionLog { by_user }
    }

    /// Construct from per-user histories that are already sorted.
    pub(crate) fn from_sorted_parts(by_user: BTreeMap<EntityIdx, Vec<Interaction>>) -> Self {
        debug_assert!(by_user
            .values()
            .all(|h| h.windows(2).all(|w| w[0].timestamp <= w[1].timestamp)));
        InteractionLog { by_user }
    }

    pub fn users(&self) -> impl Iterator<Item = EntityIdx> + '_ {
        self.by_user.keys().copied()
    }

    /// The user's history, sorted ascending by timestamp. Empty if unknown.
    pub fn interactions(&self, user: EntityIdx) -> &[Interaction] {
        self.by_user.get(&user).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn contains_pair(&self, user: EntityIdx, product: EntityIdx) -> bool {
        self.interactions(user).iter().any(|i| i.product == product)
    }

    /// Distinct products in the user's history.
    pub fn product_set(&self, user: EntityIdx) -> HashSet<EntityIdx> {
        self.interactions(user).iter().map(|i| i.product).collect()
    }

    pub fn num_users(&self) -> usize {
        self.by_user.len()
    }

    pub fn num_events(&self) -> usize {
        self.by_user.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.by_user.is_empty()
    }

    /// Serialize back to the `interactions.tsv` format, users in index order.
    pub fn to_tsv(&self, graph: &KnowledgeGraph) -> String {
        let mut out = String::new();
        for (&user, history) in &self.by_user {
            for interaction in history {
                out.push_str(graph.entity_id(user));
                out.push('\t');
                out.push_str(graph.entity_id(interaction.product));
                out.push('\t');
                out.push_str(&interaction.timestamp.to_string());
                out.push('\n');
            }
        }
        out
    }
}
