//! Explanation paths and their three-part decomposition.
//!
//! A path is an alternating sequence of entities and relations walked over
//! the graph. Triples are stored directed, but a walk may traverse an edge
//! in either orientation, so every hop records a direction flag. A valid
//! user-product path splits into a past interaction (user, relation,
//! product), an entity chain through non-product entities, and a
//! recommendation hop from the shared entity into the recommended product.

use crate::error::{Error, Result, StructuralCode};
use crate::kg::{EntityIdx, KnowledgeGraph, RelIdx};

/// One hop of a path: the relation and whether the underlying triple is
/// traversed head-to-tail (`forward`) or tail-to-head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PathEdge {
    pub relation: RelIdx,
    pub forward: bool,
}

/// An alternating entity/relation walk. `nodes.len() == edges.len() + 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Path {
    nodes: Vec<EntityIdx>,
    edges: Vec<PathEdge>,
}

impl Path {
    /// Assemble a path, checking only the alternation counts. Graph-backed
    /// checks live in [`Path::validate`].
    pub fn new(nodes: Vec<EntityIdx>, edges: Vec<PathEdge>) -> Result<Self> {
        if edges.is_empty() || nodes.len() != edges.len() + 1 {
            return Err(Error::PathStructure {
                code: StructuralCode::Malformed,
                message: format!(
                    "{} nodes with {} edges; expected edges + 1 nodes and at least one edge",
                    nodes.len(),
                    edges.len()
                ),
            });
        }
        Ok(Path { nodes, edges })
    }

    pub fn nodes(&self) -> &[EntityIdx] {
        &self.nodes
    }

    pub fn edges(&self) -> &[PathEdge] {
        &self.edges
    }

    /// Path length = number of edges.
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        false // a path always has at least one edge
    }

    pub fn start(&self) -> EntityIdx {
        self.nodes[0]
    }

    pub fn end(&self) -> EntityIdx {
        *self.nodes.last().expect("path has nodes")
    }

    /// The relation sequence of the path.
    pub fn pattern(&self) -> impl Iterator<Item = RelIdx> + '_ {
        self.edges.iter().map(|e| e.relation)
    }

    /// The path type: the last relation of the pattern.
    pub fn path_type(&self) -> RelIdx {
        self.edges.last().expect("path has edges").relation
    }

    /// Check that every hop is backed by a graph triple in its recorded direction.
    pub fn validate(&self, graph: &KnowledgeGraph) -> Result<()> {
        for (i, edge) in self.edges.iter().enumerate() {
            let (head, tail) = if edge.forward {
                (self.nodes[i], self.nodes[i + 1])
            } else {
                (self.nodes[i + 1], self.nodes[i])
            };
            if !graph.has_triple(head, edge.relation, tail) {
                return Err(Error::PathStructure {
                    code: StructuralCode::MissingTriple,
                    message: format!(
                        "hop {} ({} -[{}{}]-> {}) is not a triple of the graph",
                        i + 1,
                        graph.entity_id(self.nodes[i]),
                        graph.relation_label(edge.relation),
                        if edge.forward { ">" } else { "<" },
                        graph.entity_id(self.nodes[i + 1]),
                    ),
                });
            }
        }
        Ok(())
    }

    /// Serialize as `e1|r1>|e2|r2<|e3|...`; `>`/`<` after a relation encodes
    /// the traversal direction of the underlying triple.
    pub fn serialize(&self, graph: &KnowledgeGraph) -> String {
        let mut out = String::new();
        out.push_str(graph.entity_id(self.nodes[0]));
        for (i, edge) in self.edges.iter().enumerate() {
            out.push('|');
            out.push_str(graph.relation_label(edge.relation));
            out.push(if edge.forward { '>' } else { '<' });
            out.push('|');
            out.push_str(graph.entity_id(self.nodes[i + 1]));
        }
        out
    }

    /// Parse the [`Path::serialize`] format. Entities and relations must
    /// already exist in the graph; hops are not checked against triples here.
    pub fn parse(s: &str, graph: &KnowledgeGraph) -> Result<Self> {
        let tokens: Vec<&str> = s.split('|').collect();
        if tokens.len() < 3 || tokens.len().is_multiple_of(2) {
            return Err(Error::Data(format!(
                "malformed serialized path '{s}': expected alternating entity and relation tokens"
            )));
        }
        let mut nodes = Vec::with_capacity(tokens.len() / 2 + 1);
        let mut edges = Vec::with_capacity(tokens.len() / 2);
        for (i, token) in tokens.iter().enumerate() {
            if i % 2 == 0 {
                let entity = graph.entity(token).ok_or_else(|| {
                    Error::Data(format!("serialized path references unknown entity '{token}'"))
                })?;
                nodes.push(entity);
            } else {
                let (label, forward) = match token.strip_suffix('>') {
                    Some(label) => (label, true),
                    None => match token.strip_suffix('<') {
                        Some(label) => (label, false),
                        None => {
                            return Err(Error::Data(format!(
                                "relation token '{token}' lacks a direction suffix ('>' or '<')"
                            )))
                        }
                    },
                };
                let relation = graph.relation(label).ok_or_else(|| {
                    Error::Data(format!("serialized path references unknown relation '{label}'"))
                })?;
                edges.push(PathEdge { relation, forward });
            }
        }
        Path::new(nodes, edges)
    }
}

/// The three conceptual parts of a user-product path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathDecomposition {
    /// The user at the start of the path.
    pub user: EntityIdx,
    /// Relation of the past interaction hop.
    pub interaction_relation: RelIdx,
    /// Product of the past interaction (second node).
    pub linked_product: EntityIdx,
    /// Intermediate hops from the linked product up to the shared entity.
    pub chain: Vec<(EntityIdx, PathEdge, EntityIdx)>,
    /// Penultimate node: the entity shared between the experienced and the
    /// recommended product.
    pub shared_entity: EntityIdx,
    /// Relation of the recommendation hop; this is the path type.
    pub recommendation_relation: RelIdx,
    /// The recommended product at the end of the path.
    pub recommended_product: EntityIdx,
}

/// Split a path into (past interaction, entity chain, recommendation).
///
/// Requires at least three edges, a user at the start, products at the second
/// and last positions, and no product anywhere in between.
pub fn decompose_path(path: &Path, graph: &KnowledgeGraph) -> Result<PathDecomposition> {
    path.validate(graph)?;
    let structural = |code: StructuralCode, message: String| Error::PathStructure { code, message };
    if path.len() < 3 {
        return Err(structural(
            StructuralCode::TooShort,
            format!("path has {} edges; at least 3 are required", path.len()),
        ));
    }
    let nodes = path.nodes();
    let edges = path.edges();
    let n = nodes.len();
    if !graph.is_user(nodes[0]) {
        return Err(structural(
            StructuralCode::StartNotUser,
            format!("first node '{}' is not a user", graph.entity_id(nodes[0])),
        ));
    }
    if !graph.is_product(nodes[n - 1]) {
        return Err(structural(
            StructuralCode::EndNotProduct,
            format!(
                "last node '{}' is of type '{}', not a product",
                graph.entity_id(nodes[n - 1]),
                graph.type_name(graph.entity_type(nodes[n - 1]))
            ),
        ));
    }
    if !graph.is_product(nodes[1]) {
        return Err(structural(
            StructuralCode::LinkNotProduct,
            format!(
                "second node '{}' is not a product; the first hop must be a past interaction",
                graph.entity_id(nodes[1])
            ),
        ));
    }
    for &node in &nodes[2..n - 1] {
        if graph.is_product(node) {
            return Err(structural(
                StructuralCode::ProductInChain,
                format!(
                    "product '{}' appears inside the entity chain",
                    graph.entity_id(node)
                ),
            ));
        }
    }
    let chain = (1..n - 2)
        .map(|i| (nodes[i], edges[i], nodes[i + 1]))
        .collect();
    Ok(PathDecomposition {
        user: nodes[0],
        interaction_relation: edges[0].relation,
        linked_product: nodes[1],
        chain,
        shared_entity: nodes[n - 2],
        recommendation_relation: edges[n - 2].relation,
        recommended_product: nodes[n - 1],
    })
}
